//! Local-polynomial weight fields over the upper triangle: Gram matrices,
//! the eigenvalue guard with order degradation, and the weight axioms
//! (W1)–(W4) as measurable quantities.
//!
//! For an evaluation point (x, y) the estimator is the intercept of a
//! weighted least-squares fit of a total-degree-m polynomial to the pair
//! values over design pairs inside the window
//! max(|x_j − x|, |x_k − y|) ≤ h. Solving the normal equations once per
//! evaluation point yields data-independent weights w_{j,k}(x, y; h):
//!
//!   B = (1/(p h)²) Σ U U^T K,   w_{j,k} = (1/(p h)²) e_1^T B⁻¹ U K,
//!
//! with U = U_m((x_j−x)/h, (x_k−y)/h) and K the kernel at the same point.
//! The 1/(p h)² factors cancel between the two displays; they are kept so
//! B has O(1) entries.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DesignGrid, TriangleGrid};
use crate::kernels::{kernel_eval, monomial_into, KernelKind, PolyOrder};

/// Which design pairs enter the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairDomain {
    /// Ordered pairs j < k: the restricted estimator (never smooths across
    /// the diagonal, tolerates kinks there).
    UpperTriangle,
    /// All pairs j ≠ k: the comparator that drops only the empirical
    /// variances but smooths over the diagonal.
    OffDiagonal,
}

pub const DEFAULT_MIN_EIGEN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherConfig {
    pub order: PolyOrder,
    /// Window half-width h ∈ (0, 1].
    pub bandwidth: f64,
    pub kernel: KernelKind,
    pub pair_domain: PairDomain,
    /// Relative eigenvalue floor: the local Gram matrix is rejected when
    /// λ_min ≤ min_eigen_tol · trace(B)/N_m.
    pub min_eigen_tol: f64,
}

impl SmootherConfig {
    pub fn new(order: PolyOrder, bandwidth: f64, kernel: KernelKind, pair_domain: PairDomain) -> Result<Self> {
        let cfg = SmootherConfig {
            order,
            bandwidth,
            kernel,
            pair_domain,
            min_eigen_tol: DEFAULT_MIN_EIGEN_TOL,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.bandwidth.is_finite() || self.bandwidth <= 0.0 || self.bandwidth > 1.0 {
            return Err(Error::invalid(format!(
                "bandwidth must lie in (0, 1], got {}",
                self.bandwidth
            )));
        }
        if !self.min_eigen_tol.is_finite() || self.min_eigen_tol <= 0.0 {
            return Err(Error::invalid(format!(
                "min_eigen_tol must be positive, got {}",
                self.min_eigen_tol
            )));
        }
        Ok(())
    }

    pub fn with_bandwidth(mut self, h: f64) -> Self {
        self.bandwidth = h;
        self
    }

    pub fn with_pair_domain(mut self, domain: PairDomain) -> Self {
        self.pair_domain = domain;
        self
    }
}

/// Weights for one evaluation point plus solve diagnostics.
#[derive(Debug, Clone)]
pub struct EvalWeights {
    /// Sparse (j, k, w) over design-pair indices; only in-window pairs with
    /// positive kernel mass are stored.
    pub entries: Vec<(usize, usize, f64)>,
    /// Smallest eigenvalue of the accepted Gram matrix.
    pub min_eigenvalue: f64,
    /// Polynomial degree actually used after the eigenvalue guard.
    pub effective_order: usize,
}

/// Data-independent weights for a whole evaluation grid; shared across folds
/// and replications.
#[derive(Debug, Clone)]
pub struct WeightField {
    pub evals: TriangleGrid,
    /// One entry per eval point; `None` marks a hole (no usable pairs at any
    /// order down to 0).
    pub weights: Vec<Option<EvalWeights>>,
    pub config: SmootherConfig,
    /// Number of design points the field was built for.
    pub p: usize,
}

impl WeightField {
    pub fn hole_count(&self) -> usize {
        self.weights.iter().filter(|w| w.is_none()).count()
    }

    pub fn hole_indices(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter_map(|(i, w)| w.is_none().then_some(i))
            .collect()
    }
}

struct WindowPair {
    j: usize,
    k: usize,
    u1: f64,
    u2: f64,
    kval: f64,
}

/// In-window pairs with positive kernel mass at (x, y). The window test is
/// the closed inequality max(|x_j − x|, |x_k − y|) ≤ h, evaluated on the raw
/// differences (the same predicate (W2) is verified with).
fn window_pairs(x: f64, y: f64, grid: &DesignGrid, cfg: &SmootherConfig) -> Vec<WindowPair> {
    let pts = grid.points();
    let h = cfg.bandwidth;
    // partition_point gives a candidate range; widen by one index per side so
    // boundary rounding of x ± h cannot drop a pair, then filter exactly.
    let range = |c: f64| {
        let lo = pts.partition_point(|&t| t < c - h).saturating_sub(1);
        let hi = (pts.partition_point(|&t| t <= c + h) + 1).min(pts.len());
        (lo, hi)
    };
    let (jlo, jhi) = range(x);
    let (klo, khi) = range(y);
    let mut out = Vec::new();
    for j in jlo..jhi {
        let dx = pts[j] - x;
        if dx.abs() > h {
            continue;
        }
        for k in klo..khi {
            match cfg.pair_domain {
                PairDomain::UpperTriangle => {
                    if k <= j {
                        continue;
                    }
                }
                PairDomain::OffDiagonal => {
                    if k == j {
                        continue;
                    }
                }
            }
            let dy = pts[k] - y;
            if dy.abs() > h {
                continue;
            }
            let u1 = dx / h;
            let u2 = dy / h;
            let kval = kernel_eval(cfg.kernel, u1, u2);
            if kval > 0.0 {
                out.push(WindowPair { j, k, u1, u2, kval });
            }
        }
    }
    out
}

/// Accumulate the Gram matrix at the given degree from prepared pairs.
fn gram_from_pairs(pairs: &[WindowPair], degree: usize, p: usize, h: f64) -> DMatrix<f64> {
    let n = PolyOrder::new(degree).basis_len();
    let mut b = DMatrix::<f64>::zeros(n, n);
    let mut u = Vec::with_capacity(n);
    for pair in pairs {
        monomial_into(degree, pair.u1, pair.u2, &mut u);
        for a in 0..n {
            let ua_k = u[a] * pair.kval;
            for c in a..n {
                b[(a, c)] += ua_k * u[c];
            }
        }
    }
    // mirror the upper triangle and apply the 1/(p h)² scale
    let scale = 1.0 / (p as f64 * h).powi(2);
    for a in 0..n {
        for c in a..n {
            let v = b[(a, c)] * scale;
            b[(a, c)] = v;
            b[(c, a)] = v;
        }
    }
    b
}

/// Gram matrix B_{p,h}(x, y) at the config's order over in-window pairs.
/// Zero in-window pairs give the zero matrix; singularity is detected by the
/// weight solve, not here.
pub fn build_gram(eval: (f64, f64), grid: &DesignGrid, cfg: &SmootherConfig) -> DMatrix<f64> {
    let pairs = window_pairs(eval.0, eval.1, grid, cfg);
    gram_from_pairs(&pairs, cfg.order.degree(), grid.len(), cfg.bandwidth)
}

/// Solve for one eval point, degrading the order when the eigenvalue guard
/// trips. Returns `None` (a hole) when even the constant fit has no mass.
fn solve_one(x: f64, y: f64, grid: &DesignGrid, cfg: &SmootherConfig) -> Option<EvalWeights> {
    let pairs = window_pairs(x, y, grid, cfg);
    if pairs.is_empty() {
        return None;
    }
    let p = grid.len();
    let h = cfg.bandwidth;
    let full = gram_from_pairs(&pairs, cfg.order.degree(), p, h);

    let mut degree = cfg.order.degree();
    loop {
        let nm = PolyOrder::new(degree).basis_len();
        let b = full.view((0, 0), (nm, nm)).into_owned();
        let trace = b.trace();
        if trace > 0.0 {
            let lam_min = b.clone().symmetric_eigen().eigenvalues.min();
            if lam_min > cfg.min_eigen_tol * trace / nm as f64 {
                if let Some(weights) = extract_weights(&b, &pairs, degree, p, h) {
                    return Some(EvalWeights {
                        entries: weights,
                        min_eigenvalue: lam_min,
                        effective_order: degree,
                    });
                }
            }
        }
        if degree == 0 {
            return None;
        }
        degree -= 1;
    }
}

/// w_{j,k} = (1/(p h)²) e_1^T B⁻¹ U K for every window pair. One step of
/// iterative refinement keeps the solve residual near machine precision even
/// when B sits close to the eigenvalue floor.
fn extract_weights(
    b: &DMatrix<f64>,
    pairs: &[WindowPair],
    degree: usize,
    p: usize,
    h: f64,
) -> Option<Vec<(usize, usize, f64)>> {
    let nm = b.nrows();
    let mut e1 = DVector::<f64>::zeros(nm);
    e1[0] = 1.0;
    let chol = b.clone().cholesky()?;
    let mut g = chol.solve(&e1);
    let resid = &e1 - b * &g;
    g += chol.solve(&resid);

    let scale = 1.0 / (p as f64 * h).powi(2);
    let mut u = Vec::with_capacity(nm);
    let out = pairs
        .iter()
        .map(|pair| {
            monomial_into(degree, pair.u1, pair.u2, &mut u);
            let fit: f64 = g.iter().zip(&u).map(|(gi, ui)| gi * ui).sum();
            (pair.j, pair.k, fit * pair.kval * scale)
        })
        .collect();
    Some(out)
}

/// Weight field over an evaluation grid; parallel over eval points with a
/// deterministic (index-ordered) result.
pub fn compute_weight_field(grid: &DesignGrid, cfg: &SmootherConfig, evals: &TriangleGrid) -> Result<WeightField> {
    cfg.validate()?;
    let weights: Vec<Option<EvalWeights>> = evals
        .pairs()
        .par_iter()
        .map(|&(x, y)| solve_one(x, y, grid, cfg))
        .collect();
    Ok(WeightField {
        evals: evals.clone(),
        weights,
        config: *cfg,
        p: grid.len(),
    })
}

/// Worst-case measured constants for the weight axioms.
#[derive(Debug, Clone)]
pub struct AxiomReport {
    /// (W1) max h-scaled moment residual: |Σ w (x_j−x)^{r1} (x_k−y)^{r2} / h^{r1+r2} − δ_{r1+r2,0}|
    /// over all eval points and exponents with r1+r2 ≤ effective order.
    pub w1_max_residual: f64,
    /// (W2) max |w| over stored pairs outside the closed window (0 by construction).
    pub w2_max_outside: f64,
    /// (W3) max |w| · (p h)².
    pub w3_constant: f64,
    /// (W4) max over adjacent eval points of |Δw| · (p h)² / min(shift/h, 1),
    /// where shift = max coordinate difference; the spec's h/shift form with
    /// the Lipschitz cap at shift = h.
    pub w4_constant: f64,
    pub hole_count: usize,
}

/// Recompute the axiom quantities directly from the stored sparse weights.
pub fn verify_weight_axioms(field: &WeightField, grid: &DesignGrid) -> AxiomReport {
    let pts = grid.points();
    let h = field.config.bandwidth;
    let ph2 = (field.p as f64 * h).powi(2);

    let mut w1 = 0.0f64;
    let mut w2 = 0.0f64;
    let mut w3 = 0.0f64;
    let mut w4 = 0.0f64;
    let mut holes = 0usize;

    let mut prev: Option<(usize, HashMap<(usize, usize), f64>)> = None;
    for (idx, (&(x, y), weights)) in field.evals.pairs().iter().zip(&field.weights).enumerate() {
        let Some(ew) = weights else {
            holes += 1;
            prev = None;
            continue;
        };
        // (W1): all moments up to the effective order, h-scaled.
        let m = ew.effective_order;
        for r1 in 0..=m {
            for r2 in 0..=(m - r1) {
                let mut s = 0.0;
                for &(j, k, w) in &ew.entries {
                    s += w * ((pts[j] - x) / h).powi(r1 as i32) * ((pts[k] - y) / h).powi(r2 as i32);
                }
                let target = if r1 + r2 == 0 { 1.0 } else { 0.0 };
                w1 = w1.max((s - target).abs());
            }
        }
        // (W2) and (W3)
        for &(j, k, w) in &ew.entries {
            if (pts[j] - x).abs() > h || (pts[k] - y).abs() > h {
                w2 = w2.max(w.abs());
            }
            w3 = w3.max(w.abs() * ph2);
        }
        // (W4): compare with the previous non-hole eval point.
        let map: HashMap<(usize, usize), f64> = ew.entries.iter().map(|&(j, k, w)| ((j, k), w)).collect();
        if let Some((pidx, pmap)) = &prev {
            let (px, py) = field.evals.pairs()[*pidx];
            let shift = (x - px).abs().max((y - py).abs());
            if shift > 0.0 {
                let mut dmax = 0.0f64;
                for (key, &w) in &map {
                    dmax = dmax.max((w - pmap.get(key).copied().unwrap_or(0.0)).abs());
                }
                for (key, &w) in pmap {
                    if !map.contains_key(key) {
                        dmax = dmax.max(w.abs());
                    }
                }
                w4 = w4.max(dmax * ph2 / (shift / h).min(1.0));
            }
        }
        prev = Some((idx, map));
    }

    AxiomReport {
        w1_max_residual: w1,
        w2_max_outside: w2,
        w3_constant: w3,
        w4_constant: w4,
        hole_count: holes,
    }
}

/// Cache of weight fields keyed by (grid, config, eval grid). Weight fields
/// are data-independent, so CV folds and Monte Carlo replications reuse them.
#[derive(Default)]
pub struct WeightCache {
    map: HashMap<CacheKey, Arc<WeightField>>,
}

#[derive(PartialEq, Eq, Hash)]
struct CacheKey {
    order: usize,
    h_bits: u64,
    kernel: KernelKind,
    domain: PairDomain,
    tol_bits: u64,
    grid_bits: Vec<u64>,
    eval_bits: Vec<(u64, u64)>,
}

impl CacheKey {
    fn new(grid: &DesignGrid, cfg: &SmootherConfig, evals: &TriangleGrid) -> Self {
        CacheKey {
            order: cfg.order.degree(),
            h_bits: cfg.bandwidth.to_bits(),
            kernel: cfg.kernel,
            domain: cfg.pair_domain,
            tol_bits: cfg.min_eigen_tol.to_bits(),
            grid_bits: grid.points().iter().map(|x| x.to_bits()).collect(),
            eval_bits: evals.pairs().iter().map(|&(x, y)| (x.to_bits(), y.to_bits())).collect(),
        }
    }
}

impl WeightCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(
        &mut self,
        grid: &DesignGrid,
        cfg: &SmootherConfig,
        evals: &TriangleGrid,
    ) -> Result<Arc<WeightField>> {
        let key = CacheKey::new(grid, cfg, evals);
        if let Some(field) = self.map.get(&key) {
            return Ok(Arc::clone(field));
        }
        let field = Arc::new(compute_weight_field(grid, cfg, evals)?);
        self.map.insert(key, Arc::clone(&field));
        Ok(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelKind;

    fn cfg(m: usize, h: f64, kernel: KernelKind, domain: PairDomain) -> SmootherConfig {
        SmootherConfig::new(PolyOrder::new(m), h, kernel, domain).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SmootherConfig::new(PolyOrder::new(1), 0.0, KernelKind::Uniform, PairDomain::UpperTriangle).is_err());
        assert!(SmootherConfig::new(PolyOrder::new(1), 1.5, KernelKind::Uniform, PairDomain::UpperTriangle).is_err());
        assert!(SmootherConfig::new(PolyOrder::new(1), 0.3, KernelKind::Uniform, PairDomain::UpperTriangle).is_ok());
    }

    #[test]
    fn gram_matches_hand_value() {
        // p=4 equidistant, h=1, Uniform, m=0, eval (0.5, 0.5): all 6 pairs
        // j<k are in window with K=1, so B = 6/16.
        let grid = DesignGrid::equidistant(4).unwrap();
        let c = cfg(0, 1.0, KernelKind::Uniform, PairDomain::UpperTriangle);
        let b = build_gram((0.5, 0.5), &grid, &c);
        assert_eq!(b.nrows(), 1);
        assert!((b[(0, 0)] - 0.375).abs() < 1e-15);
    }

    #[test]
    fn gram_empty_window_is_zero() {
        let grid = DesignGrid::equidistant(4).unwrap();
        // tiny window in a corner far from any pair (x_j, x_k) with j<k
        let c = cfg(0, 0.01, KernelKind::Uniform, PairDomain::UpperTriangle);
        let b = build_gram((0.99, 1.0), &grid, &c);
        assert_eq!(b[(0, 0)], 0.0);
    }

    #[test]
    fn pair_domain_counts() {
        // h=1 windows cover everything: UpperTriangle p(p-1)/2 pairs,
        // OffDiagonal p(p-1).
        let grid = DesignGrid::equidistant(6).unwrap();
        let evals = TriangleGrid::from_pairs(vec![(0.5, 0.5)]).unwrap();
        let tri = compute_weight_field(&grid, &cfg(0, 1.0, KernelKind::Uniform, PairDomain::UpperTriangle), &evals).unwrap();
        let off = compute_weight_field(&grid, &cfg(0, 1.0, KernelKind::Uniform, PairDomain::OffDiagonal), &evals).unwrap();
        assert_eq!(tri.weights[0].as_ref().unwrap().entries.len(), 15);
        assert_eq!(off.weights[0].as_ref().unwrap().entries.len(), 30);
    }

    #[test]
    fn constant_fit_is_local_mean() {
        let grid = DesignGrid::equidistant(10).unwrap();
        let c = cfg(0, 0.35, KernelKind::Uniform, PairDomain::UpperTriangle);
        let evals = TriangleGrid::from_pairs(vec![(0.3, 0.7)]).unwrap();
        let field = compute_weight_field(&grid, &c, &evals).unwrap();
        let ew = field.weights[0].as_ref().unwrap();
        let count = ew.entries.len();
        assert!(count > 0);
        for &(_, _, w) in &ew.entries {
            assert!((w - 1.0 / count as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_sum_to_one_and_kill_first_moments() {
        let grid = DesignGrid::equidistant(50).unwrap();
        let c = cfg(1, 0.3, KernelKind::EpanechnikovProduct, PairDomain::UpperTriangle);
        let evals = TriangleGrid::design_pairs(&grid);
        let field = compute_weight_field(&grid, &c, &evals).unwrap();
        assert_eq!(field.hole_count(), 0);
        let report = verify_weight_axioms(&field, &grid);
        assert!(report.w1_max_residual <= 1e-8, "W1 residual {}", report.w1_max_residual);
        assert_eq!(report.w2_max_outside, 0.0);
        assert!(report.w3_constant.is_finite());
    }

    #[test]
    fn order_degrades_at_starved_corners() {
        // A window containing exactly one pair cannot support an m=1 fit;
        // the guard must degrade to m=0 rather than emit garbage.
        let grid = DesignGrid::equidistant(10).unwrap();
        let c = cfg(1, 0.05, KernelKind::Uniform, PairDomain::UpperTriangle);
        let evals = TriangleGrid::from_pairs(vec![(0.05, 0.15)]).unwrap();
        let field = compute_weight_field(&grid, &c, &evals).unwrap();
        let ew = field.weights[0].as_ref().unwrap();
        assert_eq!(ew.entries.len(), 1);
        assert_eq!(ew.effective_order, 0);
        assert!((ew.entries[0].2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_window_marks_hole() {
        let grid = DesignGrid::equidistant(10).unwrap();
        let c = cfg(0, 0.02, KernelKind::Uniform, PairDomain::UpperTriangle);
        // No pair (j < k) lies within 0.02 of (0.98, 1.0)'s window... the
        // nearest design pair near the corner is (0.85, 0.95).
        let evals = TriangleGrid::from_pairs(vec![(0.98, 1.0)]).unwrap();
        let field = compute_weight_field(&grid, &c, &evals).unwrap();
        assert!(field.weights[0].is_none());
        assert_eq!(field.hole_count(), 1);
    }

    #[test]
    fn cache_returns_shared_field() {
        let grid = DesignGrid::equidistant(8).unwrap();
        let c = cfg(1, 0.4, KernelKind::EpanechnikovProduct, PairDomain::UpperTriangle);
        let evals = TriangleGrid::design_pairs(&grid);
        let mut cache = WeightCache::new();
        let a = cache.get_or_compute(&grid, &c, &evals).unwrap();
        let b = cache.get_or_compute(&grid, &c, &evals).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let c2 = c.with_bandwidth(0.5);
        let d = cache.get_or_compute(&grid, &c2, &evals).unwrap();
        assert!(!Arc::ptr_eq(&a, &d));
    }
}
