//! L²-orthonormal Hermite functions for the weight `e^{-x²}`.
//!
//! `φ_k(x) = H_k(x) e^{-x²/2} / sqrt(2^k k! sqrt(π))`, generated by the
//! normalized three-term recurrence so nothing overflows for large `k`.

const PI_POW_MINUS_QUARTER: f64 = 0.751_125_544_464_942_5;

/// Fills `out[k] = φ_k(x)` for `k < out.len()`.
pub fn hermite_functions(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI_POW_MINUS_QUARTER * (-0.5 * x * x).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// `φ_k'(x)` from the values `φ_0..=φ_{k+1}`.
pub fn hermite_derivative(phi: &[f64], k: usize) -> f64 {
    let kf = k as f64;
    let lower = if k == 0 { 0.0 } else { (kf / 2.0).sqrt() * phi[k - 1] };
    lower - ((kf + 1.0) / 2.0).sqrt() * phi[k + 1]
}

/// Christoffel–Darboux kernel `Σ_{k<N} φ_k(x) φ_k(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermiteKernel {
    pub n: usize,
}

impl HermiteKernel {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut px = vec![0.0; self.n];
        let mut py = vec![0.0; self.n];
        hermite_functions(x, &mut px);
        hermite_functions(y, &mut py);
        px.iter().zip(&py).map(|(a, b)| a * b).sum()
    }

    pub fn diag(&self, x: f64) -> f64 {
        let mut px = vec![0.0; self.n];
        hermite_functions(x, &mut px);
        px.iter().map(|a| a * a).sum()
    }

    /// `(ρ₁(x), ρ₁'(x))` with `ρ₁ = Σ φ_k²`.
    pub fn diag_with_derivative(&self, x: f64) -> (f64, f64) {
        let mut phi = vec![0.0; self.n + 1];
        hermite_functions(x, &mut phi);
        let mut rho = 0.0;
        let mut drho = 0.0;
        for k in 0..self.n {
            rho += phi[k] * phi[k];
            drho += 2.0 * phi[k] * hermite_derivative(&phi, k);
        }
        (rho, drho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;
    use approx::assert_abs_diff_eq;

    #[test]
    fn first_functions_match_closed_forms() {
        let x: f64 = 0.7;
        let mut phi = [0.0; 3];
        hermite_functions(x, &mut phi);
        let g = (-x * x / 2.0).exp();
        let c0 = std::f64::consts::PI.powf(-0.25);
        assert_abs_diff_eq!(phi[0], c0 * g, epsilon = 1e-15);
        assert_abs_diff_eq!(phi[1], c0 * 2f64.sqrt() * x * g, epsilon = 1e-15);
        // H_2 = 4x² - 2, norm sqrt(8 sqrt(pi))
        assert_abs_diff_eq!(phi[2], c0 * (4.0 * x * x - 2.0) / 8f64.sqrt() * g, epsilon = 1e-15);
    }

    #[test]
    fn orthonormal_under_quadrature() {
        let (t, w) = gauss_legendre(200);
        let n = 12;
        let mut gram = vec![vec![0.0; n]; n];
        let mut phi = vec![0.0; n];
        for (ti, wi) in t.iter().zip(&w) {
            let x = 12.0 * ti;
            hermite_functions(x, &mut phi);
            for (row, pi) in gram.iter_mut().zip(&phi) {
                for (g, pj) in row.iter_mut().zip(&phi) {
                    *g += 12.0 * wi * pi * pj;
                }
            }
        }
        for (i, row) in gram.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(g, e, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let mut phi = vec![0.0; 9];
        let mut hi = vec![0.0; 9];
        let mut lo = vec![0.0; 9];
        let (x, h) = (0.37, 1e-5);
        hermite_functions(x, &mut phi);
        hermite_functions(x + h, &mut hi);
        hermite_functions(x - h, &mut lo);
        for k in 0..8 {
            let fd = (hi[k] - lo[k]) / (2.0 * h);
            assert_abs_diff_eq!(hermite_derivative(&phi, k), fd, epsilon = 1e-9);
        }
    }

    #[test]
    fn high_order_is_finite() {
        let mut phi = vec![0.0; 1001];
        hermite_functions(20.0, &mut phi);
        assert!(phi.iter().all(|v| v.is_finite()));
        assert!(phi.iter().any(|v| v.abs() > 1e-3));
    }
}
