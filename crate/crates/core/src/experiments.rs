//! Monte Carlo studies: sup-norm bandwidth sweeps, rate-in-n tables, an
//! exact per-point error decomposition, the restricted-vs-off-diagonal
//! estimator comparison, and a CLT variance check. Every study is a
//! deterministic function of its configuration and the master seed, and is
//! reported as a long-format table.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::cv::CvReport;
use crate::error::{Error, Result};
use crate::estimator::{
    empirical_covariance, estimate_with_field, smooth_pair_values, CovarianceSurface, SampleMatrix,
};
use crate::grid::{DesignGrid, TriangleGrid};
use crate::kernels::{KernelKind, PolyOrder};
use crate::rng::{RngSpec, StreamKind};
use crate::sim::{add_noise, noise_matrix, ProcessSpec};
use crate::weights::{compute_weight_field, PairDomain, SmootherConfig, WeightField};

/// Per-point tolerance for the exact error-decomposition identity; the
/// identity is pure algebra, so violations mean the smoother or the term
/// wiring is broken, not that the data are unlucky.
pub const DECOMP_IDENTITY_TOL: f64 = 1e-9;

/// One long-format result row. `rep` is the replication index, or the fold
/// id for cross-validation fold scores; summary rows leave it empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    pub n: usize,
    pub p: usize,
    pub h: f64,
    pub m: usize,
    pub rep: Option<usize>,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn new() -> Self {
        Self::default()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn add(
        &mut self,
        experiment: &str,
        n: usize,
        p: usize,
        h: f64,
        m: usize,
        rep: Option<usize>,
        metric: &str,
        value: f64,
    ) {
        self.rows.push(ReportRow {
            experiment: experiment.to_string(),
            n,
            p,
            h,
            m,
            rep,
            metric: metric.to_string(),
            value,
        });
    }

    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    pub fn select(&self, metric: &str) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.metric == metric).collect()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] < v[best] {
            best = i;
        }
    }
    best
}

/// max over eval points of |Γ̂(x,y) − Γ(x,y)|; the triangle suffices because
/// both surfaces are symmetric.
pub fn sup_error(surface: &CovarianceSurface, truth: impl Fn(f64, f64) -> f64) -> Result<f64> {
    let holes = surface.holes();
    if !holes.is_empty() {
        let locs: Vec<String> = holes
            .iter()
            .take(5)
            .map(|&i| {
                let (x, y) = surface.evals().pairs()[i];
                format!("({x:.4}, {y:.4})")
            })
            .collect();
        return Err(Error::state(format!(
            "sup error undefined: {} hole(s) at {}{}",
            holes.len(),
            locs.join(", "),
            if holes.len() > 5 { ", …" } else { "" }
        )));
    }
    let mut worst = 0.0f64;
    for (&(x, y), v) in surface.evals().pairs().iter().zip(surface.values()) {
        worst = worst.max((v.unwrap() - truth(x, y)).abs());
    }
    Ok(worst)
}

/// R(x,y,x,y) = Γ(x,x)Γ(y,y) + Γ(x,y)², the asymptotic variance of
/// √n(Γ̂(x,y) − Γ(x,y)) for centered Gaussian processes. It is
/// Var(Z(x)Z(y)) by the Gaussian fourth-moment (Isserlis) identity
/// E[Z(x)²Z(y)²] = Γ(x,x)Γ(y,y) + 2Γ(x,y)².
pub fn fourth_moment_diag(spec: &ProcessSpec, x: f64, y: f64) -> f64 {
    spec.kernel(x, x) * spec.kernel(y, y) + spec.kernel(x, y) * spec.kernel(x, y)
}

/// Sup errors for every (bandwidth, replication) cell on the equidistant
/// grid: one simulated data set per replication, shared across bandwidths.
/// Holes make a cell +∞ rather than an error so sweeps can report degenerate
/// bandwidths instead of dying on them.
fn sweep_core(
    spec: &ProcessSpec,
    n: usize,
    p: usize,
    noise_sd: f64,
    base_cfg: &SmootherConfig,
    h_grid: &[f64],
    reps: usize,
    rng: RngSpec,
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    if reps == 0 {
        return Err(Error::invalid("need at least one replication".to_string()));
    }
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 curves, got {n}")));
    }
    if h_grid.is_empty() {
        return Err(Error::invalid("bandwidth grid is empty".to_string()));
    }
    let grid = DesignGrid::equidistant(p)?;
    let evals = TriangleGrid::design_pairs(&grid);
    let mut fields = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        let cfg = base_cfg.clone().with_bandwidth(h);
        cfg.validate()?;
        fields.push(compute_weight_field(&grid, &cfg, &evals)?);
    }
    let truth: Vec<f64> = evals.pairs().iter().map(|&(x, y)| spec.kernel(x, y)).collect();

    let per_rep: Result<Vec<Vec<f64>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let rep_rng = rng.derive(StreamKind::Replication, r as u64);
            let clean = spec.simulate(n, &grid, rep_rng)?;
            let noisy = add_noise(&clean, noise_sd, rep_rng)?;
            let z = empirical_covariance(&noisy)?;
            let errs = fields
                .iter()
                .map(|field| {
                    let vals = smooth_pair_values(field, |j, k| z.get(j, k));
                    let mut worst = 0.0f64;
                    for (v, t) in vals.iter().zip(&truth) {
                        match v {
                            Some(v) => worst = worst.max((v - t).abs()),
                            None => return f64::INFINITY,
                        }
                    }
                    worst
                })
                .collect();
            Ok(errs)
        })
        .collect();
    let per_rep = per_rep?;

    let mut out = vec![vec![0.0f64; reps]; h_grid.len()];
    for (r, errs) in per_rep.iter().enumerate() {
        for (l, &e) in errs.iter().enumerate() {
            out[l][r] = e;
        }
    }
    Ok(out)
}

/// Per-(h, replication) sup errors plus the mean curve and each
/// replication's argmin bandwidth.
#[allow(clippy::too_many_arguments)]
pub fn bandwidth_sweep(
    spec: &ProcessSpec,
    n: usize,
    p: usize,
    noise_sd: f64,
    order: PolyOrder,
    h_grid: &[f64],
    reps: usize,
    rng: RngSpec,
) -> Result<ExperimentReport> {
    if h_grid.is_empty() {
        return Err(Error::invalid("bandwidth grid is empty".to_string()));
    }
    let base = SmootherConfig::new(order, h_grid[0], KernelKind::EpanechnikovProduct, PairDomain::UpperTriangle)?;
    let sup = sweep_core(spec, n, p, noise_sd, &base, h_grid, reps, rng)?;
    let m = order.degree();
    let mut report = ExperimentReport::new();
    for (l, &h) in h_grid.iter().enumerate() {
        for (r, &e) in sup[l].iter().enumerate() {
            report.add("sweep", n, p, h, m, Some(r), "sup_error", e);
        }
    }
    for (l, &h) in h_grid.iter().enumerate() {
        report.add("sweep", n, p, h, m, None, "mean_sup_error", mean(&sup[l]));
    }
    for r in 0..reps {
        let per_h: Vec<f64> = (0..h_grid.len()).map(|l| sup[l][r]).collect();
        let best = argmin(&per_h);
        report.add("sweep", n, p, h_grid[best], m, Some(r), "argmin_h", h_grid[best]);
    }
    Ok(report)
}

/// The five error components at every eval point, each already smoothed by
/// the weight field, plus the realized total error Γ̂ − Γ. Per pair (j,k)
/// the components are
///
///   eps2  = n⁻¹ Σ_i ε_{i,j} ε_{i,k}
///   bias  = Γ(x_j,x_k) − Γ(x,y)
///   prc   = n⁻¹ Σ_i (Z_i(x_j) Z_i(x_k) − Γ(x_j,x_k))
///   mix   = n⁻¹ Σ_i (Z_i(x_j) ε_{i,k} + Z_i(x_k) ε_{i,j})
///   indep = (n(n−1))⁻¹ Σ_{i≠l} (ε_{i,j}ε_{l,k} + Z_i(x_j)Z_l(x_k)
///                                + Z_i(x_j)ε_{l,k} + ε_{i,j}Z_l(x_k))
///
/// and eps2 + bias + prc + mix − indep telescopes exactly to z_{j,k} − Γ(x,y),
/// so after smoothing the five terms reproduce Γ̂ − Γ identically.
#[derive(Debug, Clone)]
pub struct DecompositionTerms {
    pub eps2: Vec<f64>,
    pub bias: Vec<f64>,
    pub prc: Vec<f64>,
    pub mix: Vec<f64>,
    pub indep: Vec<f64>,
    pub total: Vec<f64>,
}

impl DecompositionTerms {
    /// max over eval points of |(eps2 + bias + prc + mix − indep) − total|.
    pub fn max_identity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for t in 0..self.total.len() {
            let lhs = self.eps2[t] + self.bias[t] + self.prc[t] + self.mix[t] - self.indep[t];
            worst = worst.max((lhs - self.total[t]).abs());
        }
        worst
    }
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

fn unwrap_all(vals: Vec<Option<f64>>, what: &str) -> Result<Vec<f64>> {
    vals.into_iter()
        .map(|v| v.ok_or_else(|| Error::state(format!("{what}: weight field has holes"))))
        .collect()
}

/// One replication of the error decomposition: simulate the latent process
/// and the noise separately, smooth each component with the same field, and
/// return them together with Γ̂ − Γ. The cross-replication sums use
/// Σ_{i≠l} a_i b_l = (Σa)(Σb) − Σ_i a_i b_i.
pub fn decompose_once(
    spec: &ProcessSpec,
    n: usize,
    grid: &DesignGrid,
    noise_sd: f64,
    field: &WeightField,
    rng: RngSpec,
) -> Result<DecompositionTerms> {
    spec.validate()?;
    if n < 2 {
        return Err(Error::invalid(format!("decomposition needs at least 2 curves, got {n}")));
    }
    if !noise_sd.is_finite() || noise_sd < 0.0 {
        return Err(Error::invalid(format!("noise sd must be ≥ 0, got {noise_sd}")));
    }
    let p = grid.len();
    if field.p != p {
        return Err(Error::invalid(format!(
            "weight field was built for p = {} but the grid has {p} points",
            field.p
        )));
    }

    let clean = spec.simulate(n, grid, rng)?;
    let eps = noise_matrix(n, p, noise_sd, rng);
    let y: Vec<f64> = clean.data().iter().zip(&eps).map(|(z, e)| z + e).collect();
    let z = empirical_covariance(&SampleMatrix::from_flat(y, n, p))?;
    let surface = estimate_with_field(&z, field)?;

    let nf = n as f64;
    let zm = DMatrix::from_row_slice(n, p, clean.data());
    let em = DMatrix::from_row_slice(n, p, &eps);
    let zz = zm.transpose() * &zm;
    let e2 = em.transpose() * &em;
    let ze = zm.transpose() * &em;
    let sz = zm.row_sum();
    let se = em.row_sum();
    let pts = grid.points();
    let gam = DMatrix::from_fn(p, p, |j, k| spec.kernel(pts[j], pts[k]));

    let eps2 = unwrap_all(smooth_pair_values(field, |j, k| e2[(j, k)] / nf), "eps2 term")?;
    let gsm = unwrap_all(smooth_pair_values(field, |j, k| gam[(j, k)]), "bias term")?;
    let prc = unwrap_all(
        smooth_pair_values(field, |j, k| zz[(j, k)] / nf - gam[(j, k)]),
        "process term",
    )?;
    let mix = unwrap_all(
        smooth_pair_values(field, |j, k| (ze[(j, k)] + ze[(k, j)]) / nf),
        "mixed term",
    )?;
    let indep = unwrap_all(
        smooth_pair_values(field, |j, k| {
            (se[j] * se[k] - e2[(j, k)] + sz[j] * sz[k] - zz[(j, k)] + sz[j] * se[k] - ze[(j, k)]
                + se[j] * sz[k]
                - ze[(k, j)])
                / (nf * (nf - 1.0))
        }),
        "independent term",
    )?;

    let mut bias = Vec::with_capacity(gsm.len());
    let mut total = Vec::with_capacity(gsm.len());
    for (t, &(x, yv)) in field.evals.pairs().iter().enumerate() {
        let g = spec.kernel(x, yv);
        bias.push(gsm[t] - g);
        let est = surface.values()[t].ok_or_else(|| Error::state("estimate has holes".to_string()))?;
        total.push(est - g);
    }

    Ok(DecompositionTerms { eps2, bias, prc, mix, indep, total })
}

/// Sup-norms of the decomposition components per replication, with the exact
/// identity enforced on every replication first. Reported metrics follow the
/// component labels dsc (bias), eps (noise products), mix (process×noise),
/// prc (process fluctuation), and sup (total); the independent term is
/// computed and checked but not reported.
#[allow(clippy::too_many_arguments)]
pub fn decomposition_study(
    spec: &ProcessSpec,
    n: usize,
    p: usize,
    noise_sd: f64,
    cfg: &SmootherConfig,
    reps: usize,
    rng: RngSpec,
) -> Result<ExperimentReport> {
    if reps == 0 {
        return Err(Error::invalid("need at least one replication".to_string()));
    }
    cfg.validate()?;
    let grid = DesignGrid::equidistant(p)?;
    let evals = TriangleGrid::design_pairs(&grid);
    let field = compute_weight_field(&grid, cfg, &evals)?;

    let terms: Result<Vec<DecompositionTerms>> = (0..reps)
        .into_par_iter()
        .map(|r| decompose_once(spec, n, &grid, noise_sd, &field, rng.derive(StreamKind::Replication, r as u64)))
        .collect();
    let terms = terms?;

    let (h, m) = (cfg.bandwidth, cfg.order.degree());
    let mut report = ExperimentReport::new();
    let mut sums = [0.0f64; 5];
    for (r, t) in terms.iter().enumerate() {
        let resid = t.max_identity_residual();
        if resid > DECOMP_IDENTITY_TOL {
            return Err(Error::internal(format!(
                "error-decomposition identity violated on replication {r}: residual {resid:.3e}"
            )));
        }
        let names = ["dsc", "eps", "mix", "prc", "sup"];
        let vals = [
            sup_abs(&t.bias),
            sup_abs(&t.eps2),
            sup_abs(&t.mix),
            sup_abs(&t.prc),
            sup_abs(&t.total),
        ];
        for i in 0..names.len() {
            report.add("decompose", n, p, h, m, Some(r), names[i], vals[i]);
            sums[i] += vals[i];
        }
    }
    for (name, acc) in ["dsc", "eps", "mix", "prc", "sup"].iter().zip(sums) {
        report.add("decompose", n, p, h, m, None, &format!("mean_{name}"), acc / reps as f64);
    }
    Ok(report)
}

/// Restricted (pairs j<k, evaluated on the triangle) versus off-diagonal
/// (pairs j≠k, smoothing across the diagonal) on two fixed targets: the
/// kinked OU kernel (θ=3, σ=2) and the smooth rank-2 kernel. Both domains
/// see identical simulated data per replication, so the comparison is paired.
#[allow(clippy::too_many_arguments)]
pub fn estimator_comparison(
    n: usize,
    p: usize,
    noise_sd: f64,
    orders: &[PolyOrder],
    h_grid: &[f64],
    reps: usize,
    rng: RngSpec,
) -> Result<ExperimentReport> {
    if orders.is_empty() {
        return Err(Error::invalid("need at least one polynomial order".to_string()));
    }
    if h_grid.is_empty() {
        return Err(Error::invalid("bandwidth grid is empty".to_string()));
    }
    let targets = [
        ("ou", ProcessSpec::Ou { theta: 3.0, sigma: 2.0 }),
        ("twoterm", ProcessSpec::TwoTerm),
    ];
    let domains = [("triangle", PairDomain::UpperTriangle), ("offdiag", PairDomain::OffDiagonal)];

    let mut report = ExperimentReport::new();
    for (tname, tspec) in &targets {
        for &order in orders {
            let m = order.degree();
            for (dname, domain) in domains {
                let base = SmootherConfig::new(order, h_grid[0], KernelKind::EpanechnikovProduct, domain)?;
                let sup = sweep_core(tspec, n, p, noise_sd, &base, h_grid, reps, rng)?;
                let means: Vec<f64> = sup.iter().map(|v| mean(v)).collect();
                for (l, &h) in h_grid.iter().enumerate() {
                    for (r, &e) in sup[l].iter().enumerate() {
                        report.add("compare", n, p, h, m, Some(r), &format!("sup_{tname}_{dname}"), e);
                    }
                    report.add("compare", n, p, h, m, None, &format!("mean_sup_{tname}_{dname}"), means[l]);
                }
                let best = argmin(&means);
                report.add(
                    "compare",
                    n,
                    p,
                    h_grid[best],
                    m,
                    None,
                    &format!("best_mean_sup_{tname}_{dname}"),
                    means[best],
                );
            }
        }
    }
    Ok(report)
}

/// Empirical mean and variance of √n(Γ̂(x,y) − Γ(x,y)) at fixed points,
/// against the closed-form Gaussian limit variance R(x,y,x,y). Points are
/// mirrored into x ≤ y; metrics are indexed by position in `points`.
#[allow(clippy::too_many_arguments)]
pub fn clt_check(
    spec: &ProcessSpec,
    noise_sd: f64,
    n: usize,
    p: usize,
    h: f64,
    order: PolyOrder,
    points: &[(f64, f64)],
    reps: usize,
    rng: RngSpec,
) -> Result<ExperimentReport> {
    spec.validate()?;
    if points.is_empty() {
        return Err(Error::invalid("need at least one evaluation point".to_string()));
    }
    if reps < 2 {
        return Err(Error::invalid("variance needs at least 2 replications".to_string()));
    }
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 curves, got {n}")));
    }
    let grid = DesignGrid::equidistant(p)?;
    let mirrored: Vec<(f64, f64)> = points.iter().map(|&(x, y)| if x <= y { (x, y) } else { (y, x) }).collect();
    let evals = TriangleGrid::from_pairs(mirrored.clone())?;
    let cfg = SmootherConfig::new(order, h, KernelKind::EpanechnikovProduct, PairDomain::UpperTriangle)?;
    let field = compute_weight_field(&grid, &cfg, &evals)?;
    if field.hole_count() > 0 {
        return Err(Error::state(format!(
            "{} of the evaluation points have empty windows at h = {h}",
            field.hole_count()
        )));
    }
    let truth: Vec<f64> = mirrored.iter().map(|&(x, y)| spec.kernel(x, y)).collect();

    let scaled: Result<Vec<Vec<f64>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let rep_rng = rng.derive(StreamKind::Replication, r as u64);
            let clean = spec.simulate(n, &grid, rep_rng)?;
            let noisy = add_noise(&clean, noise_sd, rep_rng)?;
            let z = empirical_covariance(&noisy)?;
            let vals = smooth_pair_values(&field, |j, k| z.get(j, k));
            vals.iter()
                .zip(&truth)
                .map(|(v, t)| {
                    v.map(|v| (n as f64).sqrt() * (v - t))
                        .ok_or_else(|| Error::state("estimate has holes".to_string()))
                })
                .collect()
        })
        .collect();
    let scaled = scaled?;

    let m = order.degree();
    let mut report = ExperimentReport::new();
    for (r, row) in scaled.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            report.add("clt", n, p, h, m, Some(r), &format!("scaled_err_{i}"), v);
        }
    }
    for (i, &(x, y)) in mirrored.iter().enumerate() {
        let series: Vec<f64> = scaled.iter().map(|row| row[i]).collect();
        let mu = mean(&series);
        let var = series.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (reps - 1) as f64;
        let theory = fourth_moment_diag(spec, x, y);
        report.add("clt", n, p, h, m, None, &format!("point_{i}_x"), x);
        report.add("clt", n, p, h, m, None, &format!("point_{i}_y"), y);
        report.add("clt", n, p, h, m, None, &format!("mean_{i}"), mu);
        report.add("clt", n, p, h, m, None, &format!("var_{i}"), var);
        report.add("clt", n, p, h, m, None, &format!("theory_var_{i}"), theory);
        report.add("clt", n, p, h, m, None, &format!("var_ratio_{i}"), var / theory);
    }
    Ok(report)
}

/// For each (n, p): sweep the bandwidth grid, keep the best-of-grid (oracle)
/// mean sup error, and report the log–log slope of that error against n.
#[allow(clippy::too_many_arguments)]
pub fn rate_table(
    spec: &ProcessSpec,
    sizes: &[(usize, usize)],
    noise_sd: f64,
    order: PolyOrder,
    h_grid: &[f64],
    reps: usize,
    rng: RngSpec,
) -> Result<ExperimentReport> {
    if sizes.is_empty() {
        return Err(Error::invalid("need at least one (n, p) size".to_string()));
    }
    if h_grid.is_empty() {
        return Err(Error::invalid("bandwidth grid is empty".to_string()));
    }
    let m = order.degree();
    let mut report = ExperimentReport::new();
    let mut oracle: Vec<(f64, f64)> = Vec::with_capacity(sizes.len());
    for &(n, p) in sizes {
        let base = SmootherConfig::new(order, h_grid[0], KernelKind::EpanechnikovProduct, PairDomain::UpperTriangle)?;
        let sup = sweep_core(spec, n, p, noise_sd, &base, h_grid, reps, rng)?;
        let means: Vec<f64> = sup.iter().map(|v| mean(v)).collect();
        for (l, &h) in h_grid.iter().enumerate() {
            report.add("rates", n, p, h, m, None, "mean_sup_error", means[l]);
        }
        let best = argmin(&means);
        report.add("rates", n, p, h_grid[best], m, None, "oracle_h", h_grid[best]);
        report.add("rates", n, p, h_grid[best], m, None, "oracle_mean_sup_error", means[best]);
        for (r, &e) in sup[best].iter().enumerate() {
            report.add("rates", n, p, h_grid[best], m, Some(r), "oracle_sup_error", e);
        }
        oracle.push((n as f64, means[best]));
    }

    // least-squares slope of ln(error) on ln(n); the n = p = 0 row marks it
    // as a cross-size summary
    if oracle.len() >= 2 && oracle.iter().all(|&(_, e)| e.is_finite() && e > 0.0) {
        let lx: Vec<f64> = oracle.iter().map(|&(n, _)| n.ln()).collect();
        let ly: Vec<f64> = oracle.iter().map(|&(_, e)| e.ln()).collect();
        let (mx, my) = (mean(&lx), mean(&ly));
        let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
        if sxx > 0.0 {
            let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
            report.add("rates", 0, 0, 0.0, m, None, "loglog_slope", sxy / sxx);
        }
    }
    Ok(report)
}

/// Flatten a cross-validation report into long-table rows: per-(h, fold)
/// scores keyed by fold id in the rep column, per-h mean scores, and the
/// chosen bandwidth.
pub fn cv_report_rows(cv: &CvReport, n: usize, p: usize, order: PolyOrder) -> ExperimentReport {
    let m = order.degree();
    let mut report = ExperimentReport::new();
    for (l, &h) in cv.h_candidates.iter().enumerate() {
        for (f, &s) in cv.fold_scores[l].iter().enumerate() {
            report.add("cv", n, p, h, m, Some(f), "fold_score", s);
        }
    }
    for (l, &h) in cv.h_candidates.iter().enumerate() {
        report.add("cv", n, p, h, m, None, "cv_score", cv.scores[l]);
    }
    report.add("cv", n, p, cv.chosen_h, m, None, "chosen_h", cv.chosen_h);
    report
}
