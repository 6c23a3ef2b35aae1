//! Monomial basis vectors U_m and compactly supported bivariate smoothing
//! kernels on [−1,1]².

/// Total degree m of the local polynomial fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolyOrder(usize);

impl PolyOrder {
    pub fn new(m: usize) -> Self {
        PolyOrder(m)
    }

    pub fn degree(self) -> usize {
        self.0
    }

    /// Basis length N_m = (m+1)(m+2)/2.
    pub fn basis_len(self) -> usize {
        (self.0 + 1) * (self.0 + 2) / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// 1 on [−1,1]², else 0.
    Uniform,
    /// (3/4)² (1−u1²)(1−u2²) on [−1,1]², else 0. The default: Lipschitz,
    /// which is what the weight-Lipschitz axiom (W4) leans on.
    EpanechnikovProduct,
}

/// K(u1, u2); support is contained in the closed square [−1,1]².
pub fn kernel_eval(kind: KernelKind, u1: f64, u2: f64) -> f64 {
    if u1.abs() > 1.0 || u2.abs() > 1.0 {
        return 0.0;
    }
    match kind {
        KernelKind::Uniform => 1.0,
        // 0.5625 = (3/4)²; the two factors are multiplied together first so
        // swapping the arguments gives the bit-identical value
        KernelKind::EpanechnikovProduct => 0.5625 * ((1.0 - u1 * u1) * (1.0 - u2 * u2)),
    }
}

/// U_m(u1, u2): the constant 1 followed by blocks of total degree l = 1..m,
/// each block ordered (u1^l/l!, u1^{l−1}u2/(l−1)!, …, u2^l/l!). With this
/// ordering U_m(0,0) is the first unit vector, so the fitted intercept is the
/// first coordinate of the solution.
pub fn monomial_vector(order: PolyOrder, u1: f64, u2: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(order.basis_len());
    monomial_into(order.degree(), u1, u2, &mut out);
    out
}

pub(crate) fn monomial_into(m: usize, u1: f64, u2: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    for l in 1..=m {
        for b in 0..=l {
            let a = l - b;
            out.push(u1.powi(a as i32) * u2.powi(b as i32) / (factorial(a) * factorial(b)));
        }
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}
