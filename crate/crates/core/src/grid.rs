//! Design grids on [0,1] and evaluation grids on the closed upper triangle
//! T = {(x,y): 0 ≤ x ≤ y ≤ 1}.

use crate::error::{Error, Result};

/// Strictly increasing design points x_1 < … < x_p in [0,1], p ≥ 2.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignGrid {
    points: Vec<f64>,
}

impl DesignGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid(format!(
                "design grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        for (j, &x) in points.iter().enumerate() {
            if !x.is_finite() || !(0.0..=1.0).contains(&x) {
                return Err(Error::invalid(format!(
                    "design point {} is {x}, outside [0, 1]",
                    j + 1
                )));
            }
            if j > 0 && points[j - 1] >= x {
                return Err(Error::invalid(format!(
                    "design points must be strictly increasing, but point {} = {} >= point {} = {}",
                    j,
                    points[j - 1],
                    j + 1,
                    x
                )));
            }
        }
        Ok(DesignGrid { points })
    }

    /// Interior-equidistant grid x_j = (j − 1/2)/p, j = 1..p.
    pub fn equidistant(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::invalid(format!("need p >= 2 design points, got {p}")));
        }
        let pf = p as f64;
        Ok(DesignGrid {
            points: (1..=p).map(|j| (j as f64 - 0.5) / pf).collect(),
        })
    }

    /// Quantile grid for a design density f tabulated at uniform nodes on
    /// [0,1]: x_j solves ∫_0^{x_j} f = (j − 1/2)/p. The tabulation is
    /// refined to at least 1024 nodes, integrated with the trapezoid rule
    /// (internally renormalized to a CDF), and inverted by bisection to
    /// absolute tolerance 1e−12.
    pub fn from_density(p: usize, density: &[f64]) -> Result<Self> {
        if p < 2 {
            return Err(Error::invalid(format!("need p >= 2 design points, got {p}")));
        }
        if density.len() < 2 {
            return Err(Error::invalid(
                "density must be tabulated at >= 2 uniform nodes on [0,1]".to_string(),
            ));
        }
        if let Some(&bad) = density.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::invalid(format!(
                "density values must be positive and finite, got {bad}"
            )));
        }

        const MIN_CDF_NODES: usize = 1024;
        // Resample the tabulation (linear interpolation) onto a uniform grid
        // of at least MIN_CDF_NODES nodes, then integrate the interpolant.
        let nodes = density.len().max(MIN_CDF_NODES);
        let f: Vec<f64> = if density.len() == nodes {
            density.to_vec()
        } else {
            (0..nodes)
                .map(|i| {
                    let t = i as f64 / (nodes - 1) as f64;
                    interp_uniform(density, t)
                })
                .collect()
        };
        let dt = 1.0 / (nodes - 1) as f64;
        let mut cdf = vec![0.0; nodes];
        for i in 1..nodes {
            cdf[i] = cdf[i - 1] + 0.5 * dt * (f[i - 1] + f[i]);
        }
        let total = cdf[nodes - 1];

        // F(x) on the piecewise-linear interpolant of f, normalized to F(1)=1.
        let eval_cdf = |x: f64| -> f64 {
            let pos = (x / dt).floor();
            let i = (pos as usize).min(nodes - 2);
            let s = x - i as f64 * dt;
            let fx = f[i] + (f[i + 1] - f[i]) * (s / dt);
            (cdf[i] + 0.5 * s * (f[i] + fx)) / total
        };

        let mut points = Vec::with_capacity(p);
        for j in 1..=p {
            let q = (j as f64 - 0.5) / p as f64;
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                if eval_cdf(mid) < q {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            points.push(0.5 * (lo + hi));
        }
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// Linear interpolation of values tabulated at uniform nodes on [0,1].
fn interp_uniform(values: &[f64], t: f64) -> f64 {
    let m = values.len() - 1;
    let pos = t * m as f64;
    let i = (pos.floor() as usize).min(m - 1);
    let s = pos - i as f64;
    values[i] + (values[i + 1] - values[i]) * s
}

/// Evaluation points (x, y) with 0 ≤ x ≤ y ≤ 1, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleGrid {
    pairs: Vec<(f64, f64)>,
}

impl TriangleGrid {
    pub fn from_pairs(pairs: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(x, y)) in pairs.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() || !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
                return Err(Error::invalid(format!(
                    "eval point {} is ({x}, {y}), outside [0,1]^2",
                    i + 1
                )));
            }
            if x > y {
                return Err(Error::invalid(format!(
                    "eval point {} is ({x}, {y}) with x > y; evaluation is restricted to the upper triangle",
                    i + 1
                )));
            }
        }
        Ok(TriangleGrid { pairs })
    }

    /// All design pairs (x_j, x_k) with j ≤ k, row-major in (j, k).
    pub fn design_pairs(grid: &DesignGrid) -> Self {
        let pts = grid.points();
        let mut pairs = Vec::with_capacity(pts.len() * (pts.len() + 1) / 2);
        for j in 0..pts.len() {
            for k in j..pts.len() {
                pairs.push((pts[j], pts[k]));
            }
        }
        TriangleGrid { pairs }
    }

    /// Design pairs strictly above the diagonal (j < k); what CV scores.
    pub fn strict_design_pairs(grid: &DesignGrid) -> Self {
        let pts = grid.points();
        let mut pairs = Vec::with_capacity(pts.len() * (pts.len() - 1) / 2);
        for j in 0..pts.len() {
            for k in j + 1..pts.len() {
                pairs.push((pts[j], pts[k]));
            }
        }
        TriangleGrid { pairs }
    }

    /// Uniform m×m lattice on [0,1]² restricted to x ≤ y (for export grids).
    pub fn lattice(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid(format!("lattice needs m >= 2 nodes per axis, got {m}")));
        }
        let step = 1.0 / (m - 1) as f64;
        let mut pairs = Vec::with_capacity(m * (m + 1) / 2);
        for a in 0..m {
            for b in a..m {
                pairs.push(((a as f64 * step).min(1.0), (b as f64 * step).min(1.0)));
            }
        }
        Ok(TriangleGrid { pairs })
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Evaluation-grid choices for [`triangle_eval_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// All design pairs (x_j, x_k), j ≤ k — the default used by the studies.
    DesignPairs,
    /// Uniform lattice restricted to T with the given nodes per axis.
    Lattice(usize),
}

pub fn triangle_eval_grid(grid: &DesignGrid, mode: EvalMode) -> Result<TriangleGrid> {
    match mode {
        EvalMode::DesignPairs => Ok(TriangleGrid::design_pairs(grid)),
        EvalMode::Lattice(m) => TriangleGrid::lattice(m),
    }
}
