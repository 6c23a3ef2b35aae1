//! Empirical covariances and the smoothed covariance estimator on the upper
//! triangle, plus the derived standard-deviation and correlation outputs.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grid::{DesignGrid, TriangleGrid};
use crate::weights::{compute_weight_field, SmootherConfig, WeightField};

/// n curves observed at p synchronous design points, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    data: Vec<f64>,
    n: usize,
    p: usize,
}

impl SampleMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("sample matrix needs at least 1 curve".to_string()));
        }
        let p = rows[0].len();
        if p < 2 {
            return Err(Error::invalid(format!(
                "sample matrix needs at least 2 design points per curve, got {p}"
            )));
        }
        let mut data = Vec::with_capacity(n * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::invalid(format!(
                    "curve {} has {} values, expected {p}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::invalid(format!(
                        "non-finite value {v} at curve {}, design point {}",
                        i + 1,
                        j + 1
                    )));
                }
                data.push(v);
            }
        }
        Ok(SampleMatrix { data, n, p })
    }

    pub(crate) fn from_flat(data: Vec<f64>, n: usize, p: usize) -> Self {
        debug_assert_eq!(data.len(), n * p);
        SampleMatrix { data, n, p }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    pub(crate) fn data(&self) -> &[f64] {
        &self.data
    }
}

/// p×p symmetric matrix of empirical covariances
/// z_{j,k} = (n−1)⁻¹ Σ_i (Y_{i,j} Y_{i,k} − Ȳ_j Ȳ_k), plus the column means.
#[derive(Debug, Clone)]
pub struct EmpiricalCovariance {
    z: Vec<f64>,
    means: Vec<f64>,
    p: usize,
}

impl EmpiricalCovariance {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.z[j * self.p + k]
    }

    pub fn col_means(&self) -> &[f64] {
        &self.means
    }
}

/// Computed in the centered form Σ (Y_{i,j} − Ȳ_j)(Y_{i,k} − Ȳ_k)/(n−1),
/// which is algebraically identical to the definition but keeps column-mean
/// shifts from leaking in; j ≤ k is computed and mirrored so symmetry is
/// exact.
pub fn empirical_covariance(samples: &SampleMatrix) -> Result<EmpiricalCovariance> {
    let (n, p) = (samples.n(), samples.p());
    if n < 2 {
        return Err(Error::invalid(format!(
            "empirical covariance needs at least 2 curves (division by n−1), got {n}"
        )));
    }
    let data = samples.data();
    let mut means = vec![0.0f64; p];
    for i in 0..n {
        let row = &data[i * p..(i + 1) * p];
        for (m, &v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }

    let mut centered = vec![0.0f64; n * p];
    for i in 0..n {
        for j in 0..p {
            centered[i * p + j] = data[i * p + j] - means[j];
        }
    }

    let mut z = vec![0.0f64; p * p];
    let denom = (n - 1) as f64;
    for j in 0..p {
        for k in j..p {
            let mut s = 0.0;
            for i in 0..n {
                s += centered[i * p + j] * centered[i * p + k];
            }
            let v = s / denom;
            z[j * p + k] = v;
            z[k * p + j] = v;
        }
    }
    Ok(EmpiricalCovariance { z, means, p })
}

/// Estimated (or synthetic) kernel values on a triangular evaluation grid.
/// Queries mirror across the diagonal; holes stay explicit.
#[derive(Debug, Clone)]
pub struct CovarianceSurface {
    evals: TriangleGrid,
    values: Vec<Option<f64>>,
    config: Option<SmootherConfig>,
    index: HashMap<(u64, u64), usize>,
}

impl CovarianceSurface {
    pub fn from_parts(evals: TriangleGrid, values: Vec<Option<f64>>, config: Option<SmootherConfig>) -> Result<Self> {
        if evals.len() != values.len() {
            return Err(Error::invalid(format!(
                "surface has {} eval points but {} values",
                evals.len(),
                values.len()
            )));
        }
        let index = evals
            .pairs()
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| ((x.to_bits(), y.to_bits()), i))
            .collect();
        Ok(CovarianceSurface { evals, values, config, index })
    }

    pub fn evals(&self) -> &TriangleGrid {
        &self.evals
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn holes(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.is_none().then_some(i))
            .collect()
    }

    pub fn config(&self) -> Option<&SmootherConfig> {
        self.config.as_ref()
    }

    /// Γ̂(x, y) := Γ̂(y, x): both orderings resolve to the same storage cell.
    pub fn mirror_query(&self, x: f64, y: f64) -> Result<f64> {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let idx = self
            .index
            .get(&(lo.to_bits(), hi.to_bits()))
            .copied()
            .ok_or(Error::NotFound { x, y })?;
        self.values[idx].ok_or_else(|| {
            Error::state(format!("eval point ({lo}, {hi}) is a hole (no in-window pairs)"))
        })
    }
}

/// Apply a weight field to arbitrary pair values. This is the linear map at
/// the heart of the estimator; tests inject synthetic z (e.g. polynomials)
/// through it. For the OffDiagonal domain `value(j, k)` is also consulted
/// with j > k, so the callable must be defined there (empirical covariances
/// are symmetric, so this is automatic for the estimator).
pub fn smooth_pair_values(field: &WeightField, value: impl Fn(usize, usize) -> f64) -> Vec<Option<f64>> {
    field
        .weights
        .iter()
        .map(|w| {
            w.as_ref()
                .map(|ew| ew.entries.iter().map(|&(j, k, wt)| wt * value(j, k)).sum())
        })
        .collect()
}

/// Smooth an empirical covariance through a precomputed weight field.
pub fn estimate_with_field(z: &EmpiricalCovariance, field: &WeightField) -> Result<CovarianceSurface> {
    if z.p() != field.p {
        return Err(Error::invalid(format!(
            "empirical covariance is {}×{} but the weight field was built for p = {}",
            z.p(),
            z.p(),
            field.p
        )));
    }
    let values = smooth_pair_values(field, |j, k| z.get(j, k));
    CovarianceSurface::from_parts(field.evals.clone(), values, Some(field.config))
}

/// Γ̂(x,y) = Σ_pairs w_{j,k}(x,y;h) z_{j,k} on the given evaluation grid.
pub fn estimate(
    samples: &SampleMatrix,
    grid: &DesignGrid,
    cfg: &SmootherConfig,
    evals: &TriangleGrid,
) -> Result<CovarianceSurface> {
    if samples.p() != grid.len() {
        return Err(Error::invalid(format!(
            "samples have p = {} design points but the grid has {}",
            samples.p(),
            grid.len()
        )));
    }
    let z = empirical_covariance(samples)?;
    let field = compute_weight_field(grid, cfg, evals)?;
    estimate_with_field(&z, &field)
}

/// sd(x) = sqrt(max(Γ̂(x,x), 0)) over the surface's diagonal eval points.
#[derive(Debug, Clone)]
pub struct StdCurve {
    pub points: Vec<(f64, f64)>,
    /// How many diagonal values were negative and clamped to 0.
    pub clamped: usize,
}

pub fn std_curve(surface: &CovarianceSurface) -> Result<StdCurve> {
    let mut points = Vec::new();
    let mut clamped = 0;
    for (&(x, y), value) in surface.evals().pairs().iter().zip(surface.values()) {
        if x.to_bits() != y.to_bits() {
            continue;
        }
        let v = value.ok_or_else(|| {
            Error::state(format!("diagonal eval point ({x}, {x}) is a hole; no sd available"))
        })?;
        if v < 0.0 {
            clamped += 1;
        }
        points.push((x, v.max(0.0).sqrt()));
    }
    if points.is_empty() {
        return Err(Error::state(
            "surface has no diagonal eval points; estimate on a grid that includes (x, x)".to_string(),
        ));
    }
    Ok(StdCurve { points, clamped })
}

pub const DEFAULT_SD_FLOOR: f64 = 1e-6;

/// ρ̂(x,y) = Γ̂(x,y)/(sd(x) sd(y)), clamped to [−1,1]. Pairs where either sd
/// falls below `sd_floor` (or whose diagonal entry is a hole) become holes.
/// Diagonal entries are exactly 1 wherever sd ≥ sd_floor.
pub fn correlation_surface(surface: &CovarianceSurface, sd_floor: f64) -> Result<CovarianceSurface> {
    if !sd_floor.is_finite() || sd_floor < 0.0 {
        return Err(Error::invalid(format!("sd_floor must be nonnegative, got {sd_floor}")));
    }
    // sd per distinct coordinate, keyed by bit pattern; None = diagonal hole.
    let mut sd: HashMap<u64, Option<f64>> = HashMap::new();
    for (&(x, y), value) in surface.evals().pairs().iter().zip(surface.values()) {
        if x.to_bits() == y.to_bits() {
            sd.insert(x.to_bits(), value.map(|v| v.max(0.0).sqrt()));
        }
    }
    let lookup = |c: f64| -> Result<Option<f64>> {
        match sd.get(&c.to_bits()) {
            Some(v) => Ok(*v),
            None => Err(Error::state(format!(
                "correlation needs the diagonal entry ({c}, {c}), which is not on the eval grid"
            ))),
        }
    };

    let mut values = Vec::with_capacity(surface.values().len());
    for (&(x, y), value) in surface.evals().pairs().iter().zip(surface.values()) {
        let (sx, sy) = (lookup(x)?, lookup(y)?);
        let rho = match (value, sx, sy) {
            (Some(v), Some(sx), Some(sy)) if sx >= sd_floor && sy >= sd_floor => {
                if x.to_bits() == y.to_bits() {
                    Some(1.0)
                } else {
                    Some((v / (sx * sy)).clamp(-1.0, 1.0))
                }
            }
            _ => None,
        };
        values.push(rho);
    }
    CovarianceSurface::from_parts(surface.evals().clone(), values, surface.config().copied())
}
