//! Reduced Palm kernels.
//!
//! Conditioning a projection kernel on a particle at `a` subtracts the
//! rank-one term `Π(x, a) Π(a, y) / Π(a, a)`. Iterating over several
//! anchors is a running Cholesky factorization of `Π` on the anchors, which
//! is what [`PalmKernel`] stores; the base kernel stays exact off-grid.

use crate::error::Result;
use crate::kernels::{Kernel, KernelModel, Window, INTENSITY_FLOOR};

#[derive(Debug, Clone)]
pub struct PalmKernel {
    base: KernelModel,
    anchors: Vec<f64>,
    /// Anchors that passed the intensity floor, in conditioning order.
    active: Vec<f64>,
    /// `factor[j][i] = u_i(active[j])` for `i < j`.
    factor: Vec<Vec<f64>>,
    /// `sqrt` of the conditional intensity at each active anchor.
    pivots: Vec<f64>,
}

impl From<KernelModel> for PalmKernel {
    fn from(base: KernelModel) -> Self {
        Self {
            base,
            anchors: Vec::new(),
            active: Vec::new(),
            factor: Vec::new(),
            pivots: Vec::new(),
        }
    }
}

impl From<&KernelModel> for PalmKernel {
    fn from(base: &KernelModel) -> Self {
        base.clone().into()
    }
}

impl PalmKernel {
    pub fn new(base: KernelModel, anchors: &[f64]) -> Result<Self> {
        let mut k = PalmKernel::from(base);
        for &a in anchors {
            k = k.reduce(a)?;
        }
        Ok(k)
    }

    pub fn base(&self) -> &KernelModel {
        &self.base
    }

    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    /// Anchors whose conditional intensity exceeded the floor.
    pub fn active_anchors(&self) -> &[f64] {
        &self.active
    }

    /// Conditions on one more particle at `a`. When the current intensity
    /// at `a` is at or below [`INTENSITY_FLOOR`] the kernel is returned
    /// unchanged apart from recording the anchor.
    pub fn reduce(&self, a: f64) -> Result<PalmKernel> {
        self.base.check_point(a)?;
        let u = self.features(a);
        let pivot2 = self.base.raw_diag(a) - u.iter().map(|v| v * v).sum::<f64>();
        let mut next = self.clone();
        next.anchors.push(a);
        if pivot2 > INTENSITY_FLOOR {
            next.active.push(a);
            next.factor.push(u);
            next.pivots.push(pivot2.sqrt());
        }
        Ok(next)
    }

    /// `u_j(x)`, so that `Π^A(x, y) = Π(x, y) − Σ_j u_j(x) u_j(y)`.
    pub fn features(&self, x: f64) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.active.len());
        for (j, &a) in self.active.iter().enumerate() {
            let mut v = self.base.raw(x, a);
            for (i, ui) in u.iter().enumerate() {
                v -= ui * self.factor[j][i];
            }
            u.push(v / self.pivots[j]);
        }
        u
    }
}

/// `Π^a` for a kernel or an already reduced Palm kernel.
pub fn palm_reduce(k: impl Into<PalmKernel>, a: f64) -> Result<PalmKernel> {
    k.into().reduce(a)
}

/// `Π^a(x, x)`.
pub fn palm_intensity(pk: &PalmKernel, x: f64) -> Result<f64> {
    pk.check_point(x)?;
    Ok(pk.raw_diag(x))
}

impl Kernel for PalmKernel {
    fn window(&self) -> Window {
        self.base.window()
    }

    fn raw(&self, x: f64, y: f64) -> f64 {
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        let ux = self.features(x);
        let uy = self.features(y);
        self.base.raw(x, y) - ux.iter().zip(&uy).map(|(a, b)| a * b).sum::<f64>()
    }

    fn raw_diag(&self, x: f64) -> f64 {
        let u = self.features(x);
        self.base.raw_diag(x) - u.iter().map(|v| v * v).sum::<f64>()
    }

    fn check_point(&self, x: f64) -> Result<()> {
        self.base.check_point(x)
    }

    fn focus_points(&self) -> Vec<f64> {
        self.active.clone()
    }

    fn gram(&self, xs: &[f64]) -> Vec<f64> {
        let n = xs.len();
        let mut g = self.base.gram(xs);
        if self.active.is_empty() {
            return g;
        }
        let feats: Vec<Vec<f64>> = xs.iter().map(|&x| self.features(x)).collect();
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = feats[i].iter().zip(&feats[j]).map(|(a, b)| a * b).sum();
                g[i * n + j] -= s;
                if i != j {
                    g[j * n + i] -= s;
                }
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{eval_kernel, IntegrableKernel};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sine() -> KernelModel {
        KernelModel::sine(Window::symmetric(10.0).unwrap())
    }

    #[test]
    fn anchor_row_vanishes() {
        let pk = palm_reduce(sine(), 0.0).unwrap();
        for y in [-3.0, -0.2, 0.0, 0.4, 7.5] {
            assert_abs_diff_eq!(eval_kernel(&pk, 0.0, y).unwrap(), 0.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(palm_intensity(&pk, 0.0).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn hand_computed_value() {
        let pk = palm_reduce(sine(), 0.0).unwrap();
        let expect = 1.0 - (2.0 / PI).powi(2);
        assert_abs_diff_eq!(eval_kernel(&pk, 0.5, 0.5).unwrap(), expect, epsilon = 1e-15);
        assert_abs_diff_eq!(palm_intensity(&pk, 0.5).unwrap(), 0.594_715_3, epsilon = 1e-7);
    }

    #[test]
    fn degenerate_anchor_leaves_kernel_unchanged() {
        // A = x²/2, B = x gives Π(x, y) = xy/2, whose intensity vanishes at 0.
        let k = IntegrableKernel::new(|x| 0.5 * x * x, |x| x, |x| x, |_| 1.0, 1.0).unwrap();
        let base = KernelModel::custom(k, Window::symmetric(2.0).unwrap());
        let pk = palm_reduce(&base, 0.0).unwrap();
        assert!(pk.active_anchors().is_empty());
        assert_eq!(pk.anchors(), &[0.0]);
        for x in [-1.5, -0.3, 0.7, 1.9] {
            for y in [-1.1, 0.2, 1.3] {
                assert_eq!(pk.raw(x, y), base.raw(x, y));
            }
        }
    }

    #[test]
    fn iterated_reduction_commutes() {
        let base = KernelModel::hermite(6, Window::symmetric(9.0).unwrap()).unwrap();
        let ab = palm_reduce(palm_reduce(&base, 0.3).unwrap(), -1.1).unwrap();
        let ba = palm_reduce(palm_reduce(&base, -1.1).unwrap(), 0.3).unwrap();
        for i in 0..15 {
            let x = -4.0 + 0.55 * i as f64;
            for j in 0..15 {
                let y = -3.7 + 0.5 * j as f64;
                assert_abs_diff_eq!(ab.raw(x, y), ba.raw(x, y), epsilon = 1e-10);
            }
        }
        // agrees with the explicit rank-one formula applied twice
        let once = palm_reduce(&base, 0.3).unwrap();
        let rank_one = |x: f64, y: f64| {
            once.raw(x, y) - once.raw(x, -1.1) * once.raw(-1.1, y) / once.raw(-1.1, -1.1)
        };
        for (x, y) in [(0.1, 0.9), (-2.0, 1.5), (2.2, 2.2)] {
            assert_abs_diff_eq!(ab.raw(x, y), rank_one(x, y), epsilon = 1e-12);
        }
    }

    #[test]
    fn palm_is_symmetric_and_nonnegative() {
        let pk = PalmKernel::new(sine(), &[0.0, 1.3]).unwrap();
        for i in 0..40 {
            let x = -9.9 + 0.5 * i as f64;
            assert!(pk.raw_diag(x) >= -1e-10);
            for j in 0..40 {
                let y = -9.7 + 0.49 * j as f64;
                assert_eq!(pk.raw(x, y), pk.raw(y, x));
            }
        }
    }

    #[test]
    fn intensity_vanishes_to_second_order() {
        for base in [sine(), KernelModel::hermite(4, Window::symmetric(9.0).unwrap()).unwrap()] {
            let a = 0.37;
            let pk = palm_reduce(&base, a).unwrap();
            let ratio = |h: f64| pk.raw_diag(a + h) / (h * h);
            let (r3, r4) = (ratio(1e-3), ratio(1e-4));
            assert!(r3 > 0.0 && ((r3 - r4) / r3).abs() < 0.1, "{r3} vs {r4}");
        }
    }

    #[test]
    fn outside_window_is_rejected() {
        assert!(palm_reduce(sine(), 11.0).is_err());
        let pk = palm_reduce(sine(), 1.0).unwrap();
        assert!(palm_intensity(&pk, -10.5).is_err());
    }
}
