//! Exact-in-law Gaussian process simulators on a design grid, their
//! closed-form covariance kernels, and i.i.d. observation noise. No
//! discretization bias: marginal laws at the grid points match the kernels
//! exactly.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::SampleMatrix;
use crate::grid::DesignGrid;
use crate::rng::{RngSpec, StreamKind};

/// Γ_OU(s,t) = σ²/(2θ) (e^{−θ|t−s|} − e^{−θ(s+t)}); the kernel of
/// Z_t = σ ∫_0^t e^{−θ(t−s)} dB_s. Kinked on the diagonal.
pub fn ou_kernel(s: f64, t: f64, theta: f64, sigma: f64) -> Result<f64> {
    if !theta.is_finite() || theta <= 0.0 {
        return Err(Error::invalid(format!("OU needs θ > 0, got {theta}")));
    }
    Ok(sigma * sigma / (2.0 * theta) * ((-theta * (t - s).abs()).exp() - (-theta * (s + t)).exp()))
}

/// tilde-Γ(x,y) = (4/9) sin(πx) sin(πy) + (8/9) cos(4πx/5) cos(4πy/5); the
/// smooth rank-2 comparison kernel.
pub fn two_term_kernel(x: f64, y: f64) -> f64 {
    use std::f64::consts::PI;
    // products grouped so the value is bit-identical under argument swap
    4.0 / 9.0 * ((PI * x).sin() * (PI * y).sin())
        + 8.0 / 9.0 * ((0.8 * PI * x).cos() * (0.8 * PI * y).cos())
}

/// σ² min(s, t).
pub fn bm_kernel(s: f64, t: f64, sigma: f64) -> Result<f64> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::invalid(format!("Brownian motion needs σ ≥ 0, got {sigma}")));
    }
    Ok(sigma * sigma * s.min(t))
}

/// The simulated processes. σ = 0 is allowed (degenerate, identically-zero
/// paths); θ must be strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessSpec {
    Ou { theta: f64, sigma: f64 },
    TwoTerm,
    BrownianMotion { sigma: f64 },
}

impl ProcessSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ProcessSpec::Ou { theta, sigma } => {
                ou_kernel(0.0, 0.0, theta, sigma)?;
                if !sigma.is_finite() || sigma < 0.0 {
                    return Err(Error::invalid(format!("OU needs σ ≥ 0, got {sigma}")));
                }
            }
            ProcessSpec::TwoTerm => {}
            ProcessSpec::BrownianMotion { sigma } => {
                bm_kernel(0.0, 0.0, sigma)?;
            }
        }
        Ok(())
    }

    /// The exact covariance kernel; assumes `validate` passed.
    pub fn kernel(&self, s: f64, t: f64) -> f64 {
        match *self {
            ProcessSpec::Ou { theta, sigma } => {
                sigma * sigma / (2.0 * theta) * ((-theta * (t - s).abs()).exp() - (-theta * (s + t)).exp())
            }
            ProcessSpec::TwoTerm => two_term_kernel(s, t),
            ProcessSpec::BrownianMotion { sigma } => sigma * sigma * s.min(t),
        }
    }

    pub fn simulate(&self, n: usize, grid: &DesignGrid, rng: RngSpec) -> Result<SampleMatrix> {
        self.validate()?;
        match *self {
            ProcessSpec::Ou { theta, sigma } => simulate_ou(n, grid, theta, sigma, rng),
            ProcessSpec::TwoTerm => simulate_two_term(n, grid, rng),
            ProcessSpec::BrownianMotion { sigma } => simulate_bm(n, grid, sigma, rng),
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("need at least 1 curve".to_string()));
    }
    Ok(())
}

/// Run one generator per curve on its own substream and assemble the matrix;
/// row order equals curve-index order regardless of scheduling.
fn simulate_rows(n: usize, p: usize, gen: impl Fn(usize) -> Vec<f64> + Sync) -> SampleMatrix {
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(&gen).collect();
    let mut data = Vec::with_capacity(n * p);
    for row in rows {
        debug_assert_eq!(row.len(), p);
        data.extend_from_slice(&row);
    }
    SampleMatrix::from_flat(data, n, p)
}

/// Exact discretization of the OU-type process started at 0 at time 0:
/// Z(x_1) ~ N(0, Γ_OU(x_1, x_1)) and
/// Z(x_{j+1}) = e^{−θΔ_j} Z(x_j) + sqrt(σ²(1 − e^{−2θΔ_j})/(2θ)) ξ.
pub fn simulate_ou(n: usize, grid: &DesignGrid, theta: f64, sigma: f64, rng: RngSpec) -> Result<SampleMatrix> {
    check_n(n)?;
    if !theta.is_finite() || theta <= 0.0 {
        return Err(Error::invalid(format!("OU needs θ > 0, got {theta}")));
    }
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::invalid(format!("OU needs σ ≥ 0, got {sigma}")));
    }
    let pts = grid.points();
    let p = pts.len();
    // exp_m1 keeps 1 − e^{−2θΔ} accurate for tiny θΔ
    let var0 = sigma * sigma / (2.0 * theta) * (-(-2.0 * theta * pts[0]).exp_m1());
    let sd0 = var0.sqrt();
    let mut decay = Vec::with_capacity(p - 1);
    let mut inc_sd = Vec::with_capacity(p - 1);
    for j in 0..p - 1 {
        let dj = pts[j + 1] - pts[j];
        decay.push((-theta * dj).exp());
        inc_sd.push((sigma * sigma * (-(-2.0 * theta * dj).exp_m1()) / (2.0 * theta)).sqrt());
    }

    Ok(simulate_rows(n, p, |i| {
        let mut r = rng.stream(StreamKind::ProcessCurve, i as u64);
        let mut row = Vec::with_capacity(p);
        let mut z: f64 = sd0 * r.sample::<f64, _>(StandardNormal);
        row.push(z);
        for j in 0..p - 1 {
            z = decay[j] * z + inc_sd[j] * r.sample::<f64, _>(StandardNormal);
            row.push(z);
        }
        row
    }))
}

/// Rank-2 process Z(x) = (2/3) N₁ sin(πx) + (2√2/3) N₂ cos(4πx/5) with
/// independent standard normals; its covariance is exactly two_term_kernel.
pub fn simulate_two_term(n: usize, grid: &DesignGrid, rng: RngSpec) -> Result<SampleMatrix> {
    use std::f64::consts::PI;
    check_n(n)?;
    let pts = grid.points();
    let p = pts.len();
    let sin_basis: Vec<f64> = pts.iter().map(|&x| (PI * x).sin()).collect();
    let cos_basis: Vec<f64> = pts.iter().map(|&x| (0.8 * PI * x).cos()).collect();
    let (c1, c2) = (2.0 / 3.0, 2.0 * std::f64::consts::SQRT_2 / 3.0);

    Ok(simulate_rows(n, p, |i| {
        let mut r = rng.stream(StreamKind::ProcessCurve, i as u64);
        let n1: f64 = r.sample(StandardNormal);
        let n2: f64 = r.sample(StandardNormal);
        (0..p).map(|j| c1 * n1 * sin_basis[j] + c2 * n2 * cos_basis[j]).collect()
    }))
}

/// Brownian motion by cumulative increments: Var(Z(x_1)) = σ²x_1 and
/// increment variance σ²Δ_j afterwards.
pub fn simulate_bm(n: usize, grid: &DesignGrid, sigma: f64, rng: RngSpec) -> Result<SampleMatrix> {
    check_n(n)?;
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::invalid(format!("Brownian motion needs σ ≥ 0, got {sigma}")));
    }
    let pts = grid.points();
    let p = pts.len();
    let mut inc_sd = Vec::with_capacity(p);
    inc_sd.push(sigma * pts[0].sqrt());
    for j in 0..p - 1 {
        inc_sd.push(sigma * (pts[j + 1] - pts[j]).sqrt());
    }

    Ok(simulate_rows(n, p, |i| {
        let mut r = rng.stream(StreamKind::ProcessCurve, i as u64);
        let mut w = 0.0f64;
        (0..p)
            .map(|j| {
                w += inc_sd[j] * r.sample::<f64, _>(StandardNormal);
                w
            })
            .collect()
    }))
}

/// Noise draws for an n×p panel, one substream per curve; shared by
/// `add_noise` and the decomposition study (which needs ε explicitly).
pub(crate) fn noise_matrix(n: usize, p: usize, noise_sd: f64, rng: RngSpec) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.stream(StreamKind::NoiseCurve, i as u64);
            (0..p).map(|_| noise_sd * r.sample::<f64, _>(StandardNormal)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n * p);
    for row in rows {
        out.extend_from_slice(&row);
    }
    out
}

/// Add independent N(0, σ_ε²) to every entry. σ_ε = 0 returns the input
/// unchanged (bitwise) without consuming any randomness.
pub fn add_noise(samples: &SampleMatrix, noise_sd: f64, rng: RngSpec) -> Result<SampleMatrix> {
    if !noise_sd.is_finite() || noise_sd < 0.0 {
        return Err(Error::invalid(format!("noise sd must be ≥ 0, got {noise_sd}")));
    }
    if noise_sd == 0.0 {
        return Ok(samples.clone());
    }
    let (n, p) = (samples.n(), samples.p());
    let eps = noise_matrix(n, p, noise_sd, rng);
    let data = samples.data().iter().zip(&eps).map(|(y, e)| y + e).collect();
    Ok(SampleMatrix::from_flat(data, n, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::empirical_covariance;

    #[test]
    fn ou_kernel_values() {
        // direct evaluation at (1,1), θ=3, σ=2: (4/6)(1 − e⁻⁶)
        let v = ou_kernel(1.0, 1.0, 3.0, 2.0).unwrap();
        assert!((v - 0.665_014_165_215_555_7).abs() < 1e-15);
        // Γ(0, t) = 0
        for t in [0.0, 0.3, 1.0] {
            assert!(ou_kernel(0.0, t, 3.0, 2.0).unwrap().abs() < 1e-15);
        }
        // symmetry
        assert_eq!(ou_kernel(0.3, 0.8, 3.0, 2.0).unwrap(), ou_kernel(0.8, 0.3, 3.0, 2.0).unwrap());
        assert!(ou_kernel(0.5, 0.5, 0.0, 2.0).is_err());
        assert!(ou_kernel(0.5, 0.5, -1.0, 2.0).is_err());
    }

    #[test]
    fn ou_kernel_kink_jump_is_sigma_squared() {
        // one-sided slopes in t at t = s differ by σ²
        let (th, sg, s, d) = (3.0, 2.0, 0.5, 1e-5);
        let g = |a: f64, b: f64| ou_kernel(a, b, th, sg).unwrap();
        let right = (g(s, s + d) - g(s, s)) / d;
        let left = (g(s, s) - g(s, s - d)) / d;
        assert!(((left - right) - sg * sg).abs() / (sg * sg) < 0.05, "left {left} right {right}");
    }

    #[test]
    fn two_term_kernel_values() {
        assert!((two_term_kernel(0.0, 0.0) - 8.0 / 9.0).abs() < 1e-15);
        // tilde-Γ(0, y) = (8/9) cos(4πy/5)
        let y = 0.3f64;
        let expect = 8.0 / 9.0 * (0.8 * std::f64::consts::PI * y).cos();
        assert!((two_term_kernel(0.0, y) - expect).abs() < 1e-15);
        assert_eq!(two_term_kernel(0.2, 0.9), two_term_kernel(0.9, 0.2));
    }

    #[test]
    fn bm_kernel_values() {
        assert_eq!(bm_kernel(0.3, 0.7, 1.0).unwrap(), 0.3);
        assert_eq!(bm_kernel(0.6, 0.6, 2.0).unwrap(), 4.0 * 0.6);
        assert!(bm_kernel(0.1, 0.1, -1.0).is_err());
    }

    #[test]
    fn simulators_are_deterministic() {
        let grid = DesignGrid::equidistant(7).unwrap();
        let rng = RngSpec::new(99);
        for spec in [
            ProcessSpec::Ou { theta: 3.0, sigma: 2.0 },
            ProcessSpec::TwoTerm,
            ProcessSpec::BrownianMotion { sigma: 1.5 },
        ] {
            let a = spec.simulate(20, &grid, rng).unwrap();
            let b = spec.simulate(20, &grid, rng).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn sigma_zero_ou_is_identically_zero() {
        let grid = DesignGrid::equidistant(5).unwrap();
        let s = simulate_ou(10, &grid, 3.0, 0.0, RngSpec::new(1)).unwrap();
        assert!(s.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn curve_substreams_do_not_depend_on_n() {
        // curve i is a function of (seed, i) only, so prefixes agree
        let grid = DesignGrid::equidistant(6).unwrap();
        let rng = RngSpec::new(5);
        let small = simulate_ou(3, &grid, 3.0, 2.0, rng).unwrap();
        let large = simulate_ou(8, &grid, 3.0, 2.0, rng).unwrap();
        for i in 0..3 {
            assert_eq!(small.row(i), large.row(i));
        }
    }

    #[test]
    fn add_noise_zero_sd_is_identity() {
        let grid = DesignGrid::equidistant(5).unwrap();
        let s = simulate_ou(4, &grid, 3.0, 2.0, RngSpec::new(2)).unwrap();
        let noisy = add_noise(&s, 0.0, RngSpec::new(3)).unwrap();
        assert_eq!(s, noisy);
        assert!(add_noise(&s, -0.5, RngSpec::new(3)).is_err());
    }

    #[test]
    fn noise_variance_close_to_nominal() {
        // 10^6 entries: sample variance within 1% of σ_ε²
        let grid = DesignGrid::equidistant(100).unwrap();
        let zeros = SampleMatrix::from_rows(vec![vec![0.0; 100]; 10_000]).unwrap();
        let noisy = add_noise(&zeros, 0.75, RngSpec::new(11)).unwrap();
        let mean: f64 = noisy.data().iter().sum::<f64>() / 1e6;
        let var: f64 = noisy.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 1e6;
        assert!((var / (0.75 * 0.75) - 1.0).abs() < 0.01, "var {var}");
        let _ = grid;
    }

    #[test]
    fn two_term_paths_live_in_rank_two_span() {
        use std::f64::consts::PI;
        let grid = DesignGrid::equidistant(12).unwrap();
        let s = simulate_two_term(50, &grid, RngSpec::new(21)).unwrap();
        // project each curve on span{sin(πx), cos(4πx/5)} and check residual
        let b1: Vec<f64> = grid.points().iter().map(|&x| (PI * x).sin()).collect();
        let b2: Vec<f64> = grid.points().iter().map(|&x| (0.8 * PI * x).cos()).collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let (g11, g12, g22) = (dot(&b1, &b1), dot(&b1, &b2), dot(&b2, &b2));
        let det = g11 * g22 - g12 * g12;
        for i in 0..s.n() {
            let row = s.row(i);
            let (r1, r2) = (dot(row, &b1), dot(row, &b2));
            let a1 = (g22 * r1 - g12 * r2) / det;
            let a2 = (g11 * r2 - g12 * r1) / det;
            let resid: f64 = (0..12)
                .map(|j| (row[j] - a1 * b1[j] - a2 * b2[j]).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(resid <= 1e-10, "curve {i} residual {resid}");
        }
    }

    #[test]
    fn ou_moments_match_kernel_small_mc() {
        // quick check at modest n; the acceptance suite runs the 20000-curve
        // version for all three processes
        let grid = DesignGrid::equidistant(5).unwrap();
        let n = 4000;
        let s = simulate_ou(n, &grid, 3.0, 2.0, RngSpec::new(31)).unwrap();
        let z = empirical_covariance(&s).unwrap();
        for j in 0..5 {
            for k in j..5 {
                let x = grid.points()[j];
                let y = grid.points()[k];
                let truth = ou_kernel(x, y, 3.0, 2.0).unwrap();
                // Gaussian MC standard error of a covariance entry
                let se = ((ou_kernel(x, x, 3.0, 2.0).unwrap() * ou_kernel(y, y, 3.0, 2.0).unwrap()
                    + truth * truth)
                    / n as f64)
                    .sqrt();
                assert!(
                    (z.get(j, k) - truth).abs() <= 4.0 * se,
                    "({j},{k}): z {} vs {truth} (se {se})",
                    z.get(j, k)
                );
            }
        }
    }
}
