//! K-fold bandwidth selection under the sup-norm criterion: curves are split
//! into folds, the estimator is trained on the pooled remainder, and each
//! candidate h is scored by max_{j<k} |Γ̂_train(x_j,x_k;h) − z_test_{j,k}|
//! averaged over folds. The diagonal is excluded from the score because test
//! empirical variances carry the σ_ε² noise bias.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::estimator::{empirical_covariance, smooth_pair_values, EmpiricalCovariance, SampleMatrix};
use crate::grid::{DesignGrid, TriangleGrid};
use crate::rng::{RngSpec, StreamKind};
use crate::weights::{SmootherConfig, WeightCache};

/// Fold count, candidate bandwidths (nondecreasing, each in (0,1]), and the
/// seed that fixes the fold assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct CvPlan {
    pub folds: usize,
    pub h_candidates: Vec<f64>,
    pub seed: u64,
}

impl CvPlan {
    pub fn new(folds: usize, h_candidates: Vec<f64>, seed: u64) -> Result<Self> {
        let plan = CvPlan { folds, h_candidates, seed };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::invalid(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.h_candidates.is_empty() {
            return Err(Error::invalid("need at least one candidate bandwidth".to_string()));
        }
        for &h in &self.h_candidates {
            if !h.is_finite() || h <= 0.0 || h > 1.0 {
                return Err(Error::invalid(format!("candidate bandwidth {h} outside (0, 1]")));
            }
        }
        if self.h_candidates.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("candidate bandwidths must be nondecreasing".to_string()));
        }
        Ok(())
    }

    /// Deterministic fold id per curve: seeded permutation of 0..n, then
    /// contiguous chunks whose sizes differ by at most one.
    pub fn fold_assignment(&self, n: usize) -> Result<Vec<usize>> {
        self.validate()?;
        if self.folds > n {
            return Err(Error::invalid(format!("{} folds exceed {n} curves", self.folds)));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = RngSpec::new(self.seed).stream(StreamKind::FoldShuffle, 0);
        perm.shuffle(&mut rng);
        let (base, extra) = (n / self.folds, n % self.folds);
        let mut fold_of = vec![0usize; n];
        let mut pos = 0;
        for f in 0..self.folds {
            let size = base + usize::from(f < extra);
            for &curve in &perm[pos..pos + size] {
                fold_of[curve] = f;
            }
            pos += size;
        }
        Ok(fold_of)
    }
}

/// Scores per (candidate, fold), their fold means, and the selected h.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub h_candidates: Vec<f64>,
    /// fold_scores[l][r] = sup-norm error of candidate l on test fold r.
    pub fold_scores: Vec<Vec<f64>>,
    /// Mean over folds per candidate.
    pub scores: Vec<f64>,
    pub chosen_index: usize,
    pub chosen_h: f64,
    /// Test-fold id of each curve.
    pub fold_of: Vec<usize>,
}

pub fn kfold_cv(
    samples: &SampleMatrix,
    grid: &DesignGrid,
    base_cfg: &SmootherConfig,
    plan: &CvPlan,
) -> Result<CvReport> {
    let mut cache = WeightCache::new();
    kfold_cv_with_cache(samples, grid, base_cfg, plan, &mut cache)
}

/// Same as `kfold_cv` but reuses weight fields from `cache`; repeated calls
/// on fresh data (Monte Carlo replications) then skip the per-h solves.
pub fn kfold_cv_with_cache(
    samples: &SampleMatrix,
    grid: &DesignGrid,
    base_cfg: &SmootherConfig,
    plan: &CvPlan,
    cache: &mut WeightCache,
) -> Result<CvReport> {
    plan.validate()?;
    let (n, p) = (samples.n(), samples.p());
    if grid.len() != p {
        return Err(Error::invalid(format!("grid has {} points but samples have p = {p}", grid.len())));
    }
    // each test fold must support an empirical covariance (≥ 2 curves), and
    // fold sizes differ by ≤ 1, so the smallest is floor(n / folds)
    if n < 2 * plan.folds {
        return Err(Error::invalid(format!(
            "{n} curves cannot fill {} folds of at least 2 curves each",
            plan.folds
        )));
    }

    let fold_of = plan.fold_assignment(n)?;
    let k = plan.folds;
    let mut train_z: Vec<EmpiricalCovariance> = Vec::with_capacity(k);
    let mut test_z: Vec<EmpiricalCovariance> = Vec::with_capacity(k);
    for f in 0..k {
        let mut train_rows = Vec::new();
        let mut test_rows = Vec::new();
        for i in 0..n {
            let dst = if fold_of[i] == f { &mut test_rows } else { &mut train_rows };
            dst.extend_from_slice(samples.row(i));
        }
        let n_test = test_rows.len() / p;
        train_z.push(empirical_covariance(&SampleMatrix::from_flat(train_rows, n - n_test, p))?);
        test_z.push(empirical_covariance(&SampleMatrix::from_flat(test_rows, n_test, p))?);
    }

    // score over strict design pairs j < k, in the same row-major order that
    // strict_design_pairs enumerates
    let evals = TriangleGrid::strict_design_pairs(grid);
    let mut idx_pairs = Vec::with_capacity(p * (p - 1) / 2);
    for j in 0..p {
        for kk in j + 1..p {
            idx_pairs.push((j, kk));
        }
    }
    debug_assert_eq!(idx_pairs.len(), evals.pairs().len());

    let mut fold_scores = vec![vec![f64::INFINITY; k]; plan.h_candidates.len()];
    for (l, &h) in plan.h_candidates.iter().enumerate() {
        let cfg = base_cfg.clone().with_bandwidth(h);
        cfg.validate()?;
        let field = cache.get_or_compute(grid, &cfg, &evals)?;
        for f in 0..k {
            let vals = smooth_pair_values(&field, |j, kk| train_z[f].get(j, kk));
            let mut worst = 0.0f64;
            let mut hole = false;
            for (t, v) in vals.iter().enumerate() {
                match v {
                    Some(est) => {
                        let (j, kk) = idx_pairs[t];
                        worst = worst.max((est - test_z[f].get(j, kk)).abs());
                    }
                    None => {
                        hole = true;
                        break;
                    }
                }
            }
            // a candidate whose estimate has holes cannot be compared in sup
            // norm; it is scored +∞ and reported, never an error
            fold_scores[l][f] = if hole { f64::INFINITY } else { worst };
        }
    }

    let scores: Vec<f64> = fold_scores.iter().map(|fs| fs.iter().sum::<f64>() / k as f64).collect();
    let mut chosen_index = 0;
    for l in 1..scores.len() {
        if scores[l] < scores[chosen_index] {
            chosen_index = l;
        }
    }

    Ok(CvReport {
        h_candidates: plan.h_candidates.clone(),
        fold_scores,
        scores,
        chosen_index,
        chosen_h: plan.h_candidates[chosen_index],
        fold_of,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{KernelKind, PolyOrder};
    use crate::sim::{add_noise, simulate_ou};

    use crate::weights::PairDomain;

    fn base_cfg(h: f64) -> SmootherConfig {
        SmootherConfig::new(PolyOrder::new(1), h, KernelKind::EpanechnikovProduct, PairDomain::UpperTriangle)
            .unwrap()
    }

    fn ou_samples(n: usize, p: usize, seed: u64) -> (SampleMatrix, DesignGrid) {
        let grid = DesignGrid::equidistant(p).unwrap();
        let clean = simulate_ou(n, &grid, 3.0, 2.0, RngSpec::new(seed)).unwrap();
        let noisy = add_noise(&clean, 0.75, RngSpec::new(seed)).unwrap();
        (noisy, grid)
    }

    #[test]
    fn plan_validation() {
        assert!(CvPlan::new(1, vec![0.3], 0).is_err());
        assert!(CvPlan::new(5, vec![], 0).is_err());
        assert!(CvPlan::new(5, vec![0.0], 0).is_err());
        assert!(CvPlan::new(5, vec![1.5], 0).is_err());
        assert!(CvPlan::new(5, vec![0.4, 0.2], 0).is_err());
        assert!(CvPlan::new(5, vec![0.3, 0.3], 0).is_ok()); // duplicates allowed
    }

    #[test]
    fn fold_assignment_partitions_evenly() {
        for (n, k) in [(10, 5), (11, 3), (23, 5), (4, 2)] {
            let plan = CvPlan::new(k, vec![0.3], 7).unwrap();
            let fold_of = plan.fold_assignment(n).unwrap();
            assert_eq!(fold_of.len(), n);
            let mut counts = vec![0usize; k];
            for &f in &fold_of {
                counts[f] += 1;
            }
            assert_eq!(counts.iter().sum::<usize>(), n);
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(hi - lo <= 1, "n={n} k={k} counts {counts:?}");
        }
        let plan = CvPlan::new(5, vec![0.3], 7).unwrap();
        assert!(plan.fold_assignment(4).is_err()); // more folds than curves
    }

    #[test]
    fn fold_assignment_depends_on_seed_only() {
        let a = CvPlan::new(4, vec![0.3], 9).unwrap().fold_assignment(20).unwrap();
        let b = CvPlan::new(4, vec![0.1, 0.3], 9).unwrap().fold_assignment(20).unwrap();
        let c = CvPlan::new(4, vec![0.3], 10).unwrap().fold_assignment(20).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn singleton_grid_is_chosen_regardless_of_data() {
        let (samples, grid) = ou_samples(12, 8, 3);
        let plan = CvPlan::new(2, vec![0.3], 5).unwrap();
        let report = kfold_cv(&samples, &grid, &base_cfg(0.3), &plan).unwrap();
        assert_eq!(report.chosen_index, 0);
        assert_eq!(report.chosen_h, 0.3);
    }

    #[test]
    fn duplicate_candidates_tie_break_to_first() {
        let (samples, grid) = ou_samples(12, 8, 4);
        let plan = CvPlan::new(2, vec![0.3, 0.3], 5).unwrap();
        let report = kfold_cv(&samples, &grid, &base_cfg(0.3), &plan).unwrap();
        assert_eq!(report.scores[0], report.scores[1]);
        assert_eq!(report.chosen_index, 0);
    }

    #[test]
    fn report_is_deterministic() {
        let (samples, grid) = ou_samples(20, 10, 6);
        let plan = CvPlan::new(4, vec![0.2, 0.4, 0.8], 11).unwrap();
        let cfg = base_cfg(0.2);
        let a = kfold_cv(&samples, &grid, &cfg, &plan).unwrap();
        let b = kfold_cv(&samples, &grid, &cfg, &plan).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.scores[a.chosen_index], a.scores.iter().cloned().fold(f64::INFINITY, f64::min));
        assert!(a.scores.iter().all(|s| s.is_finite()));
    }

    #[test]
    fn too_few_curves_per_fold_is_rejected() {
        let (samples, grid) = ou_samples(9, 6, 8);
        let plan = CvPlan::new(5, vec![0.3], 5).unwrap();
        let err = kfold_cv(&samples, &grid, &base_cfg(0.3), &plan);
        assert!(err.is_err()); // 9 < 2·5
    }

    #[test]
    fn order_zero_full_window_matches_hand_computation() {
        // h = 1 and a uniform kernel make every strict pair j < k fall in
        // every window, so the m = 0 estimate is the plain mean of the train
        // covariance over those pairs; the fold score then follows by hand
        let grid = DesignGrid::equidistant(3).unwrap();
        let rows = vec![
            vec![1.0, 0.0, 2.0],
            vec![0.0, 1.0, 1.0],
            vec![2.0, 2.0, 0.0],
            vec![1.0, 3.0, 1.0],
        ];
        let samples = SampleMatrix::from_rows(rows).unwrap();
        let plan = CvPlan::new(2, vec![1.0], 13).unwrap();
        let cfg =
            SmootherConfig::new(PolyOrder::new(0), 1.0, KernelKind::Uniform, PairDomain::UpperTriangle).unwrap();
        let report = kfold_cv(&samples, &grid, &cfg, &plan).unwrap();

        let fold_of = plan.fold_assignment(4).unwrap();
        for f in 0..2 {
            let split = |want: bool| {
                let rows: Vec<Vec<f64>> = (0..4)
                    .filter(|&i| (fold_of[i] == f) == want)
                    .map(|i| samples.row(i).to_vec())
                    .collect();
                empirical_covariance(&SampleMatrix::from_rows(rows).unwrap()).unwrap()
            };
            let (train, test) = (split(false), split(true));
            let mean = (train.get(0, 1) + train.get(0, 2) + train.get(1, 2)) / 3.0;
            let mut expect = 0.0f64;
            for j in 0..3 {
                for k in j + 1..3 {
                    expect = expect.max((mean - test.get(j, k)).abs());
                }
            }
            assert!((report.fold_scores[0][f] - expect).abs() < 1e-12, "fold {f}");
        }
    }

    #[test]
    fn cache_reuse_changes_nothing() {
        let (samples_a, grid) = ou_samples(16, 8, 21);
        let (samples_b, _) = ou_samples(16, 8, 22);
        let plan = CvPlan::new(4, vec![0.25, 0.5], 7).unwrap();
        let cfg = base_cfg(0.25);
        let mut cache = WeightCache::new();
        let a1 = kfold_cv_with_cache(&samples_a, &grid, &cfg, &plan, &mut cache).unwrap();
        let b1 = kfold_cv_with_cache(&samples_b, &grid, &cfg, &plan, &mut cache).unwrap();
        assert_eq!(a1, kfold_cv(&samples_a, &grid, &cfg, &plan).unwrap());
        assert_eq!(b1, kfold_cv(&samples_b, &grid, &cfg, &plan).unwrap());
    }
}
