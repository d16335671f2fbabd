//! Gauss–Legendre rules and composite panel layouts.
//!
//! Every expectation in the crate is a window quadrature. A [`PanelLayout`]
//! splits the window at the discontinuities of the integrand, cuts each piece
//! into panels no longer than `max_panel`, optionally grades panels
//! geometrically towards a set of focus points, and puts an `order`-point
//! Gauss–Legendre rule on each panel.

use crate::error::{invalid, Result};
use crate::kernels::Window;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// nodes in increasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        // Tricomi initial guess for the i-th largest root.
        let theta = std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut x = theta.cos() * (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Geometric grading of panels towards a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Focus {
    pub center: f64,
    /// Length of the two innermost panels adjacent to `center`.
    pub finest: f64,
    /// Grading stops once a panel would exceed this distance from `center`.
    pub radius: f64,
}

/// Uniformly fine panels over a sub-interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineBand {
    pub lo: f64,
    pub hi: f64,
    pub max_panel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelLayout {
    pub window: Window,
    pub max_panel: f64,
    pub order: usize,
    pub breakpoints: Vec<f64>,
    pub focus: Vec<Focus>,
    pub bands: Vec<FineBand>,
}

/// A composite rule: nodes, weights and the panel cell of every node.
///
/// Cells partition the window. Within a panel the cell of node `i` has
/// length exactly `weights[i]` and contains `nodes[i]` (the
/// Chebyshev–Markov–Stieltjes separation property of Gauss rules).
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub cells: Vec<(f64, f64)>,
}

impl PanelLayout {
    pub fn new(window: Window, max_panel: f64, order: usize) -> Self {
        Self {
            window,
            max_panel,
            order,
            breakpoints: Vec::new(),
            focus: Vec::new(),
            bands: Vec::new(),
        }
    }

    /// Layout with roughly `n_nodes` nodes in `order`-point panels.
    pub fn with_node_count(window: Window, n_nodes: usize, order: usize) -> Self {
        let panels = (n_nodes / order).max(1);
        Self::new(window, window.len() / panels as f64, order)
    }

    pub fn breakpoints(mut self, pts: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(pts);
        self
    }

    pub fn focus(mut self, f: Focus) -> Self {
        self.focus.push(f);
        self
    }

    pub fn band(mut self, b: FineBand) -> Self {
        self.bands.push(b);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.max_panel > 0.0) || self.order == 0 {
            return Err(invalid("panel layout needs max_panel > 0 and order >= 1"));
        }
        for f in &self.focus {
            if !(f.finest > 0.0 && f.radius >= f.finest) {
                return Err(invalid("focus needs 0 < finest <= radius"));
            }
        }
        Ok(())
    }

    /// Sorted, deduplicated panel boundaries including the window ends.
    pub fn boundaries(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let Window { lo, hi } = self.window;
        let mut cuts = vec![lo, hi];
        cuts.extend(self.breakpoints.iter().copied());
        for f in &self.focus {
            cuts.push(f.center);
            let mut d = f.finest;
            while d <= f.radius {
                cuts.push(f.center - d);
                cuts.push(f.center + d);
                d *= 2.0;
            }
        }
        for b in &self.bands {
            cuts.push(b.lo);
            cuts.push(b.hi);
        }
        let mut cuts: Vec<f64> = cuts
            .into_iter()
            .filter(|c| c.is_finite() && *c >= lo && *c <= hi)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));

        let mut out = Vec::with_capacity(cuts.len() * 2);
        for seg in cuts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let mid = 0.5 * (a + b);
            let mut limit = self.max_panel;
            for band in &self.bands {
                if mid > band.lo && mid < band.hi {
                    limit = limit.min(band.max_panel);
                }
            }
            let pieces = ((b - a) / limit).ceil().max(1.0) as usize;
            for k in 0..pieces {
                out.push(a + (b - a) * k as f64 / pieces as f64);
            }
        }
        out.push(hi);
        Ok(out)
    }

    pub fn rule(&self) -> Result<CompositeRule> {
        let bounds = self.boundaries()?;
        let (t, w) = gauss_legendre(self.order);
        let n = (bounds.len() - 1) * self.order;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut cells = Vec::with_capacity(n);
        for seg in bounds.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let mut left = a;
            for (ti, wi) in t.iter().zip(&w) {
                let wi = wi * half;
                nodes.push(mid + half * ti);
                weights.push(wi);
                let right = (left + wi).min(b);
                cells.push((left, right));
                left = right;
            }
            if let Some(last) = cells.last_mut() {
                last.1 = b;
            }
        }
        Ok(CompositeRule {
            nodes,
            weights,
            cells,
        })
    }

    /// The same layout with panels halved and one extra node per panel;
    /// used to test whether a quadrature has converged.
    pub fn refined(&self) -> Self {
        let mut r = self.clone();
        r.max_panel *= 0.5;
        r.order += 2;
        for f in &mut r.focus {
            f.finest *= 0.5;
        }
        for b in &mut r.bands {
            b.max_panel *= 0.5;
        }
        r
    }
}

impl CompositeRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Integrates `f` on `layout` and on its refinement; warns when the two
/// disagree by more than `tol`. Returns the refined value.
pub fn integrate_checked(layout: &PanelLayout, f: impl Fn(f64) -> f64, tol: f64) -> Result<f64> {
    let coarse = layout.rule()?.integrate(&f);
    let fine = layout.refined().rule()?.integrate(&f);
    if (coarse - fine).abs() > tol {
        log::warn!(
            "quadrature not converged: {coarse:.12e} vs refined {fine:.12e} (tol {tol:e})"
        );
    }
    Ok(fine)
}
