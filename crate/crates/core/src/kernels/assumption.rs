use serde::{Deserialize, Serialize};

use super::{Kernel, KernelModel};
use crate::quadrature::PanelLayout;
use crate::sampler::{spectrum, PANEL_ORDER};

/// Outcome of the numerical checks of the standing kernel assumptions on
/// a window. Failures are recorded, never raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub symmetric: bool,
    pub symmetry_residual: f64,
    pub projection: bool,
    /// Largest eigenvalue excursion outside `[0, 1]`.
    pub projection_residual: f64,
    pub eigen_range: (f64, f64),
    pub trace: f64,
    pub smooth: bool,
    /// Largest second difference quotient of `Π` on the grid.
    pub max_second_difference: f64,
    pub integrable: bool,
    /// `∫ Π(x, x) / (1 + x²) dx` over the window.
    pub weighted_mass: f64,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.symmetric && self.projection && self.smooth && self.integrable
    }
}

const SYMMETRY_TOL: f64 = 1e-12;
const SMOOTH_STEP: f64 = 1e-3;
const SMOOTH_BOUND: f64 = 1e8;

/// Checks symmetry, the projection property of the discretized operator,
/// a second-difference smoothness proxy and integrability of
/// `ρ₁ / (1 + x²)`, all on a `grid_size`-node Gauss–Legendre grid.
pub fn check_assumption2(k: &KernelModel, grid_size: usize, tol: f64) -> crate::error::Result<AssumptionReport> {
    if grid_size < 16 {
        return Err(crate::error::invalid("assumption check needs grid_size >= 16"));
    }
    let layout = PanelLayout::with_node_count(k.window(), grid_size, PANEL_ORDER);
    let (rule, matrix, values, _) = spectrum(k, &layout)?;
    let xs = &rule.nodes;

    let mut sym: f64 = 0.0;
    let mut second: f64 = 0.0;
    let h = SMOOTH_STEP;
    let w = k.window();
    for (i, &x) in xs.iter().enumerate() {
        for &y in xs.iter().skip(i) {
            sym = sym.max((k.raw(x, y) - k.raw(y, x)).abs());
        }
        if x - h > w.lo && x + h < w.hi && k.check_point(x - h).is_ok() {
            for &y in xs.iter().step_by(4) {
                let d2 = (k.raw(x + h, y) - 2.0 * k.raw(x, y) + k.raw(x - h, y)) / (h * h);
                second = second.max(d2.abs());
            }
        }
    }

    let hi = values.first().copied().unwrap_or(0.0);
    let lo = values.last().copied().unwrap_or(0.0);
    let excursion = (hi - 1.0).max(-lo).max(0.0);
    let weighted = rule.integrate(|x| k.raw_diag(x) / (1.0 + x * x));

    Ok(AssumptionReport {
        symmetric: sym < SYMMETRY_TOL,
        symmetry_residual: sym,
        projection: excursion <= tol,
        projection_residual: excursion,
        eigen_range: (lo, hi),
        trace: matrix.trace(),
        smooth: second.is_finite() && second < SMOOTH_BOUND,
        max_second_difference: second,
        integrable: weighted.is_finite(),
        weighted_mass: weighted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Window;

    #[test]
    fn sine_passes() {
        let k = KernelModel::sine(Window::symmetric(10.0).unwrap());
        let r = check_assumption2(&k, 200, 1e-6).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.eigen_range.0 >= -1e-6 && r.eigen_range.1 <= 1.0 + 1e-6);
    }

    #[test]
    fn hermite_five_has_trace_five() {
        let k = KernelModel::hermite(5, Window::symmetric(10.0).unwrap()).unwrap();
        let r = check_assumption2(&k, 200, 1e-6).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.projection_residual < 1e-6);
        assert!((r.trace - 5.0).abs() < 1e-3);
    }

    #[test]
    fn too_small_grid_rejected() {
        let k = KernelModel::sine(Window::symmetric(1.0).unwrap());
        assert!(check_assumption2(&k, 8, 1e-6).is_err());
    }
}
