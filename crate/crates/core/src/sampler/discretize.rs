use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, Window};
use crate::quadrature::{CompositeRule, Focus, PanelLayout};

pub const DEFAULT_NODES: usize = 200;
pub const PANEL_ORDER: usize = 8;

/// Pre-clip eigenvalues may leave `[0, 1]` by at most this much.
const CLIP_SLACK: f64 = 1e-6;

/// Nyström discretization `√wᵢ Π(xᵢ, xⱼ) √wⱼ` with its eigendecomposition.
///
/// Eigenpairs are sorted by decreasing eigenvalue; eigenvalues are
/// clipped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct DiscretizedKernel {
    window: Window,
    rule: CompositeRule,
    sqrt_weights: Vec<f64>,
    matrix: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    raw_range: (f64, f64),
}

/// Default layout: `n_nodes / PANEL_ORDER` equal panels, graded towards
/// the kernel's focus points (Palm anchors).
pub fn default_layout<K: Kernel + ?Sized>(k: &K, n_nodes: usize) -> PanelLayout {
    let mut layout = PanelLayout::with_node_count(k.window(), n_nodes, PANEL_ORDER);
    let panel = layout.max_panel;
    for a in k.focus_points() {
        layout = layout.focus(Focus {
            center: a,
            finest: panel / 64.0,
            radius: panel,
        });
    }
    layout
}

pub fn discretize<K: Kernel + ?Sized>(k: &K, n_nodes: usize) -> Result<DiscretizedKernel> {
    if n_nodes < 16 {
        return Err(crate::error::invalid("discretization needs at least 16 nodes"));
    }
    discretize_layout(k, &default_layout(k, n_nodes))
}

/// Rule, weighted Gram matrix, eigenvalues (descending) and eigenvectors.
pub type Spectrum = (CompositeRule, DMatrix<f64>, Vec<f64>, DMatrix<f64>);

/// Weighted Gram matrix and its sorted (unclipped) eigendecomposition.
pub fn spectrum<K: Kernel + ?Sized>(k: &K, layout: &PanelLayout) -> Result<Spectrum> {
    let rule = layout.rule()?;
    let n = rule.len();
    let sw: Vec<f64> = rule.weights.iter().map(|w| w.sqrt()).collect();
    let gram = k.gram(&rule.nodes);
    let matrix = DMatrix::from_fn(n, n, |i, j| sw[i] * gram[i * n + j] * sw[j]);
    let eig = SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, 100_000)
        .ok_or(Error::EigenSolver(n))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((rule, matrix, values, vectors))
}

pub fn discretize_layout<K: Kernel + ?Sized>(k: &K, layout: &PanelLayout) -> Result<DiscretizedKernel> {
    let (rule, matrix, values, vectors) = spectrum(k, layout)?;
    let hi = values.first().copied().unwrap_or(0.0);
    let lo = values.last().copied().unwrap_or(0.0);
    if hi > 1.0 + CLIP_SLACK {
        return Err(Error::NotAContraction(hi));
    }
    if lo < -CLIP_SLACK {
        return Err(Error::NotAContraction(lo));
    }
    let sqrt_weights = rule.weights.iter().map(|w| w.sqrt()).collect();
    Ok(DiscretizedKernel {
        window: layout.window,
        rule,
        sqrt_weights,
        matrix,
        eigenvalues: values.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        eigenvectors: vectors,
        raw_range: (lo, hi),
    })
}

impl DiscretizedKernel {
    pub fn window(&self) -> Window {
        self.window
    }

    pub fn len(&self) -> usize {
        self.rule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.rule.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.rule.weights
    }

    pub fn sqrt_weights(&self) -> &[f64] {
        &self.sqrt_weights
    }

    pub fn cells(&self) -> &[(f64, f64)] {
        &self.rule.cells
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Smallest and largest eigenvalue before clipping.
    pub fn raw_eigen_range(&self) -> (f64, f64) {
        self.raw_range
    }

    /// Expected number of particles in the window.
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelModel;
    use crate::palm::palm_reduce;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sine_trace_is_window_length() {
        let k = KernelModel::sine(Window::symmetric(10.0).unwrap());
        let d = discretize(&k, 200).unwrap();
        assert!((d.trace() - 20.0).abs() < 1e-3);
        let sum: f64 = d.nodes().iter().zip(d.weights()).map(|(x, w)| w * k.raw_diag(*x)).sum();
        assert_abs_diff_eq!(sum, d.trace(), epsilon = 1e-8);
        let (lo, hi) = d.raw_eigen_range();
        assert!(lo > -1e-6 && hi < 1.0 + 1e-6);
    }

    #[test]
    fn hermite_rank_is_visible() {
        let k = KernelModel::hermite(4, Window::symmetric(8.0).unwrap()).unwrap();
        let d = discretize(&k, 200).unwrap();
        let big: Vec<f64> = d.eigenvalues().iter().copied().filter(|&l| l > 0.5).collect();
        assert_eq!(big.len(), 4);
        for l in big {
            assert!((l - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn trace_is_stable_under_refinement() {
        for k in [
            KernelModel::sine(Window::symmetric(6.0).unwrap()),
            KernelModel::hermite(3, Window::symmetric(8.0).unwrap()).unwrap(),
        ] {
            let a = discretize(&k, 96).unwrap().trace();
            let b = discretize(&k, 192).unwrap().trace();
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn palm_discretization_grades_towards_anchor() {
        let k = KernelModel::sine(Window::symmetric(5.0).unwrap());
        let pk = palm_reduce(&k, 0.3).unwrap();
        let d = discretize(&pk, 80).unwrap();
        let nearest = d
            .cells()
            .iter()
            .filter(|(a, b)| *a <= 0.3 && 0.3 <= *b)
            .map(|(a, b)| b - a)
            .fold(f64::INFINITY, f64::min);
        assert!(nearest < 0.01, "cell at anchor has width {nearest}");
        assert!((d.trace() - 9.0).abs() < 0.05);
    }

    #[test]
    fn non_contraction_is_rejected() {
        use crate::kernels::IntegrableKernel;
        // 2 × sine kernel
        let pi = std::f64::consts::PI;
        let k = IntegrableKernel::new(
            move |x| (pi * x).sin(),
            move |x| (pi * x).cos(),
            move |x| pi * (pi * x).cos(),
            move |x| -pi * (pi * x).sin(),
            2.0 / pi,
        )
        .unwrap();
        let model = KernelModel::custom(k, Window::symmetric(5.0).unwrap());
        assert!(matches!(discretize(&model, 80), Err(Error::NotAContraction(_))));
        assert!(discretize(&model, 8).is_err());
    }
}
