//! Additive and multiplicative functionals of configurations, their
//! normalized versions, the variance norm and the distance on positive
//! multiplicative weights.
//!
//! Expectations are quadratures of `f · Π(x, x)` over the kernel's window,
//! i.e. exact for the window-restricted process.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimate::{mean_estimate, Estimate};
use crate::kernels::{Kernel, Window};
use crate::quadrature::{integrate_checked, PanelLayout};
use crate::sampler::{Configuration, PANEL_ORDER};

/// A real function of one point, with the points where it jumps.
pub trait TestFunction: Send + Sync {
    fn value(&self, x: f64) -> f64;

    /// Discontinuities; quadratures put panel boundaries there.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Constant the function is compared with outside the window when its
    /// variance norm is taken on ℝ. Zero for compactly supported functions.
    fn far_field(&self) -> f64 {
        0.0
    }
}

impl<T: TestFunction + ?Sized> TestFunction for &T {
    fn value(&self, x: f64) -> f64 {
        (**self).value(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        (**self).breakpoints()
    }
    fn far_field(&self) -> f64 {
        (**self).far_field()
    }
}

impl<T: TestFunction + ?Sized> TestFunction for Box<T> {
    fn value(&self, x: f64) -> f64 {
        (**self).value(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        (**self).breakpoints()
    }
    fn far_field(&self) -> f64 {
        (**self).far_field()
    }
}

/// A closure as a [`TestFunction`].
pub struct FnTest<F> {
    f: F,
    breakpoints: Vec<f64>,
    far_field: f64,
}

impl<F: Fn(f64) -> f64 + Send + Sync> FnTest<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            breakpoints: Vec::new(),
            far_field: 0.0,
        }
    }

    pub fn with_breakpoints(mut self, pts: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(pts);
        self
    }

    pub fn with_far_field(mut self, c: f64) -> Self {
        self.far_field = c;
        self
    }
}

impl<F: Fn(f64) -> f64 + Send + Sync> TestFunction for FnTest<F> {
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
    fn far_field(&self) -> f64 {
        self.far_field
    }
}

fn one() -> f64 {
    1.0
}

/// Test functions that can be named in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Preset {
    /// `1` on `[lo, hi)`.
    Indicator { lo: f64, hi: f64 },
    /// `height · exp(−(x − center)² / (2 width²))`.
    GaussianBump {
        center: f64,
        width: f64,
        #[serde(default = "one")]
        height: f64,
    },
    /// `2 / (a − x)` on `|x| < r`, `|x − a| > delta`; zero elsewhere.
    CoulombTruncated { a: f64, r: f64, delta: f64 },
    Constant { c: f64 },
    /// `Σ coef · f`.
    Linear { terms: Vec<LinearTerm> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTerm {
    pub coef: f64,
    pub f: Preset,
}

impl Preset {
    pub fn validate(&self) -> Result<()> {
        match self {
            Preset::Indicator { lo, hi } if !(lo < hi) => Err(invalid("indicator needs lo < hi")),
            Preset::GaussianBump { width, .. } if !(*width > 0.0) => {
                Err(invalid("gaussian bump needs width > 0"))
            }
            Preset::CoulombTruncated { r, delta, .. } if !(*r > 0.0 && *delta > 0.0) => {
                Err(invalid("coulomb cutoff needs r > 0 and delta > 0"))
            }
            Preset::Linear { terms } => terms.iter().try_for_each(|t| t.f.validate()),
            _ => Ok(()),
        }
    }
}

impl TestFunction for Preset {
    fn value(&self, x: f64) -> f64 {
        match self {
            Preset::Indicator { lo, hi } => {
                if x >= *lo && x < *hi {
                    1.0
                } else {
                    0.0
                }
            }
            Preset::GaussianBump {
                center,
                width,
                height,
            } => {
                let u = (x - center) / width;
                height * (-0.5 * u * u).exp()
            }
            Preset::CoulombTruncated { a, r, delta } => coulomb_cutoff(*a, *a, *r, *delta, x),
            Preset::Constant { c } => *c,
            Preset::Linear { terms } => terms.iter().map(|t| t.coef * t.f.value(x)).sum(),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Preset::Indicator { lo, hi } => vec![*lo, *hi],
            Preset::CoulombTruncated { a, r, delta } => vec![-r, *r, a - delta, a + delta],
            Preset::Linear { terms } => terms.iter().flat_map(|t| t.f.breakpoints()).collect(),
            _ => Vec::new(),
        }
    }

    fn far_field(&self) -> f64 {
        match self {
            Preset::Constant { c } => *c,
            Preset::Linear { terms } => terms.iter().map(|t| t.coef * t.f.far_field()).sum(),
            _ => 0.0,
        }
    }
}

/// Composite Gauss–Legendre settings for expectations and norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub max_panel: f64,
    pub order: usize,
    /// Repeat on a refined layout and warn on disagreement.
    pub check: bool,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            max_panel: 0.5,
            order: 16,
            check: true,
        }
    }
}

/// Refinement disagreement above which a quadrature warns.
pub const REFINEMENT_TOL: f64 = 1e-6;

/// Node count above which the variance norm skips its refinement check.
const NORM_CHECK_MAX_NODES: usize = 3000;

impl Quadrature {
    pub fn unchecked(self) -> Self {
        Self {
            check: false,
            ..self
        }
    }

    pub fn layout(&self, window: Window, breakpoints: impl IntoIterator<Item = f64>) -> PanelLayout {
        PanelLayout::new(window, self.max_panel, self.order).breakpoints(breakpoints)
    }

    pub fn integrate(
        &self,
        window: Window,
        breakpoints: impl IntoIterator<Item = f64>,
        f: impl Fn(f64) -> f64,
    ) -> Result<f64> {
        let layout = self.layout(window, breakpoints);
        if self.check {
            integrate_checked(&layout, f, REFINEMENT_TOL)
        } else {
            Ok(layout.rule()?.integrate(f))
        }
    }
}

/// `S_f(X) = Σ_{x∈X} f(x)`.
pub fn additive(f: &(impl TestFunction + ?Sized), x: &Configuration) -> f64 {
    x.iter().map(|p| f.value(p)).sum()
}

/// `E S_f = ∫_W f(x) Π(x, x) dx`.
pub fn expected_additive<K: Kernel + ?Sized>(
    f: &(impl TestFunction + ?Sized),
    k: &K,
    q: &Quadrature,
) -> Result<f64> {
    q.integrate(k.window(), f.breakpoints(), |x| f.value(x) * k.raw_diag(x))
}

/// `S̄_f(X) = S_f(X) − E S_f`.
pub fn normalized_additive<K: Kernel + ?Sized>(
    f: &(impl TestFunction + ?Sized),
    k: &K,
    q: &Quadrature,
    x: &Configuration,
) -> Result<f64> {
    Ok(additive(f, x) - expected_additive(f, k, q)?)
}

/// A test function with its expectation precomputed, for sample loops.
pub struct Centered<F> {
    pub f: F,
    pub mean: f64,
}

impl<F: TestFunction> Centered<F> {
    pub fn new<K: Kernel + ?Sized>(f: F, k: &K, q: &Quadrature) -> Result<Self> {
        let mean = expected_additive(&f, k, q)?;
        Ok(Self { f, mean })
    }

    pub fn eval(&self, x: &Configuration) -> f64 {
        additive(&self.f, x) - self.mean
    }
}

/// The variance norm
/// `½∬_{W²} (f(x) − f(y))² Π(x, y)² + ∫_W (f(x) − f_∞)² τ(x) dx`,
/// where `τ(x) = Π(x, x) − ∫_W Π(x, y)² dy` is the part of the kernel
/// leaking out of the window and `f_∞` is the far-field value.
///
/// For a projection kernel this is the full-line norm of `f` extended by
/// `f_∞` outside `W`; it vanishes on constants and ignores added
/// constants. With `f_∞ = 0` it also equals `Var S_f` for the
/// window-restricted process.
pub fn variance_norm<K: Kernel + ?Sized>(
    f: &(impl TestFunction + ?Sized),
    k: &K,
    q: &Quadrature,
) -> Result<f64> {
    let layout = q.layout(k.window(), f.breakpoints());
    let coarse = norm_on(f, k, &layout)?;
    if q.check {
        let fine_layout = layout.refined();
        if fine_layout.rule()?.len() <= NORM_CHECK_MAX_NODES {
            let fine = norm_on(f, k, &fine_layout)?;
            if (fine - coarse).abs() > REFINEMENT_TOL {
                log::warn!("variance norm not converged: {coarse:.12e} vs refined {fine:.12e}");
            }
            return Ok(fine);
        }
        log::debug!("variance norm refinement check skipped: too many nodes");
    }
    Ok(coarse)
}

fn norm_on<K: Kernel + ?Sized>(f: &(impl TestFunction + ?Sized), k: &K, layout: &PanelLayout) -> Result<f64> {
    let rule = layout.rule()?;
    let n = rule.len();
    let far = f.far_field();
    let g: Vec<f64> = rule.nodes.iter().map(|&x| f.value(x) - far).collect();
    let gram = k.gram(&rule.nodes);
    let w = &rule.weights;
    let mut pair = 0.0;
    let mut leak = 0.0;
    for i in 0..n {
        let row = &gram[i * n..(i + 1) * n];
        let mut inner = 0.0;
        let mut diff = 0.0;
        for j in 0..n {
            let p2 = row[j] * row[j] * w[j];
            inner += p2;
            let d = g[i] - g[j];
            diff += d * d * p2;
        }
        let tau = row[i] - inner;
        pair += w[i] * diff;
        leak += w[i] * g[i] * g[i] * tau;
    }
    Ok(0.5 * pair + leak)
}

/// `2 / (pole − x)` on `|x| < r`, `|x − a| > δ`, `|x − pole| > δ`.
fn coulomb_cutoff(a: f64, pole: f64, r: f64, delta: f64, x: f64) -> f64 {
    if x.abs() < r && (x - a).abs() > delta && (x - pole).abs() > delta {
        2.0 / (pole - x)
    } else {
        0.0
    }
}

/// Maximum `|b − a|` for the second anchor of a cutoff.
pub const DEFAULT_THETA: f64 = 0.25;

/// Cutoffs `(R, δ)` around an anchor `a`, optionally with a second anchor
/// `b` close to `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub r: f64,
    pub delta: f64,
    pub a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

impl CutoffSpec {
    pub fn new(r: f64, delta: f64, a: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("cutoff needs 0 < delta < 1, got {delta}")));
        }
        if !(r > a.abs() + 1.0) {
            return Err(invalid(format!("cutoff needs R > |a| + 1, got R = {r}, a = {a}")));
        }
        Ok(Self { r, delta, a, b: None })
    }

    pub fn with_b(self, b: f64) -> Result<Self> {
        if !((b - self.a).abs() < DEFAULT_THETA) {
            return Err(invalid(format!(
                "second anchor must satisfy |b - a| < {DEFAULT_THETA}, got {}",
                (b - self.a).abs()
            )));
        }
        Ok(Self { b: Some(b), ..self })
    }

    /// `f^{R,δ}_a` as a test function.
    pub fn function(&self) -> Preset {
        Preset::CoulombTruncated {
            a: self.a,
            r: self.r,
            delta: self.delta,
        }
    }

    /// `x ↦ 2/(b − x)` restricted as in [`regularized_coulomb_pair`].
    pub fn pair_function(&self) -> Result<impl TestFunction> {
        let b = self.b.ok_or_else(|| invalid("cutoff has no second anchor"))?;
        let Self { r, delta, a, .. } = *self;
        Ok(FnTest::new(move |x| coulomb_cutoff(a, b, r, delta, x))
            .with_breakpoints([-r, r, a - delta, a + delta, b - delta, b + delta]))
    }

    /// Whether `x` survives both cutoffs (and the one around `b`).
    pub fn keeps(&self, x: f64) -> bool {
        x.abs() < self.r
            && (x - self.a).abs() > self.delta
            && self.b.is_none_or(|b| (x - b).abs() > self.delta)
    }
}

/// `S^{R,δ}_a(X) = Σ 2/(a − x)` over `|x| < R`, `|x − a| > δ`.
pub fn regularized_coulomb(spec: &CutoffSpec, x: &Configuration) -> f64 {
    x.iter()
        .map(|p| coulomb_cutoff(spec.a, spec.a, spec.r, spec.delta, p))
        .sum()
}

/// `S^{R,δ}_{a,b}(X) = Σ 2/(b − x)` over `|x| < R`, `|x − a| > δ`,
/// `|x − b| > δ`.
pub fn regularized_coulomb_pair(spec: &CutoffSpec, x: &Configuration) -> Result<f64> {
    let b = spec.b.ok_or_else(|| invalid("cutoff has no second anchor"))?;
    Ok(x.iter()
        .map(|p| coulomb_cutoff(spec.a, b, spec.r, spec.delta, p))
        .sum())
}

/// `Ψ_g(X) = Π_{x∈X} g(x)`; the empty product is 1.
pub fn multiplicative(g: &(impl TestFunction + ?Sized), x: &Configuration) -> f64 {
    let mut p = 1.0;
    for v in x.iter() {
        let gv = g.value(v);
        if gv == 0.0 {
            return 0.0;
        }
        p *= gv;
    }
    p
}

/// `ln g` as a test function.
struct LogOf<'a, G: ?Sized>(&'a G);

impl<G: TestFunction + ?Sized> TestFunction for LogOf<'_, G> {
    fn value(&self, x: f64) -> f64 {
        self.0.value(x).ln()
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.0.breakpoints()
    }
    fn far_field(&self) -> f64 {
        self.0.far_field().ln()
    }
}

/// `E S_{ln g}`, failing when `ln g` is not integrable on the window.
pub fn expected_log<K: Kernel + ?Sized>(g: &(impl TestFunction + ?Sized), k: &K, q: &Quadrature) -> Result<f64> {
    let m = expected_additive(&LogOf(g), k, q)?;
    if !m.is_finite() {
        return Err(invalid("ln g is not integrable against the intensity on the window"));
    }
    Ok(m)
}

fn tilde_with_mean(g: &(impl TestFunction + ?Sized), mean_log: f64, x: &Configuration) -> Result<f64> {
    let mut s = 0.0;
    for p in x.iter() {
        let gv = g.value(p);
        if !(gv > 0.0) {
            return Err(invalid(format!("g({p}) = {gv} is not positive")));
        }
        s += gv.ln();
    }
    Ok((s - mean_log).exp())
}

/// `Ψ̃_g(X) = exp(S̄_{ln g}(X))`.
pub fn tilde_multiplicative<K: Kernel + ?Sized>(
    g: &(impl TestFunction + ?Sized),
    k: &K,
    q: &Quadrature,
    x: &Configuration,
) -> Result<f64> {
    tilde_with_mean(g, expected_log(g, k, q)?, x)
}

/// Relative standard error above which a normalizer is rejected.
pub const MAX_NORMALIZER_RELERR: f64 = 0.2;

/// `Ψ̄_g = Ψ̃_g / Ê Ψ̃_g`, with the normalizer estimated on the samples it
/// was built from.
#[derive(Debug, Clone)]
pub struct NormalizedMultiplicative<G> {
    g: G,
    mean_log: f64,
    pub normalizer: Estimate,
}

impl<G: TestFunction> NormalizedMultiplicative<G> {
    pub fn eval(&self, x: &Configuration) -> Result<f64> {
        Ok(tilde_with_mean(&self.g, self.mean_log, x)? / self.normalizer.value)
    }
}

pub fn normalized_multiplicative<G: TestFunction, K: Kernel + ?Sized>(
    g: G,
    k: &K,
    q: &Quadrature,
    samples: &[Configuration],
) -> Result<NormalizedMultiplicative<G>> {
    if samples.is_empty() {
        return Err(invalid("normalizer needs at least one sample"));
    }
    let mean_log = expected_log(&g, k, q)?;
    let values = samples
        .iter()
        .map(|x| tilde_with_mean(&g, mean_log, x))
        .collect::<Result<Vec<_>>>()?;
    let normalizer = mean_estimate(&values);
    check_normalizer(&normalizer)?;
    Ok(NormalizedMultiplicative {
        g,
        mean_log,
        normalizer,
    })
}

pub(crate) fn check_normalizer(z: &Estimate) -> Result<()> {
    if !(z.value > 0.0) {
        return Err(Error::DegenerateNormalizer(format!("estimate {} is not positive", z.value)));
    }
    if z.relative_stderr() > MAX_NORMALIZER_RELERR {
        return Err(Error::DegenerateNormalizer(format!(
            "relative standard error {:.3} exceeds {MAX_NORMALIZER_RELERR}",
            z.relative_stderr()
        )));
    }
    Ok(())
}

/// Parameters of the space of multiplicative weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GSpaceParams {
    pub alpha: f64,
    pub eps_floor: f64,
    pub m: f64,
    pub b1: Window,
    pub b2: Window,
}

pub const DEFAULT_ALPHA: f64 = 0.5;

impl GSpaceParams {
    pub fn new(eps_floor: f64, m: f64, b1: Window, b2: Window) -> Result<Self> {
        let p = Self {
            alpha: DEFAULT_ALPHA,
            eps_floor,
            m,
            b1,
            b2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::GSpace(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.m > self.eps_floor && self.eps_floor > 0.0) {
            return Err(Error::GSpace(format!(
                "need M > eps > 0, got M = {}, eps = {}",
                self.m, self.eps_floor
            )));
        }
        Ok(())
    }

    /// Largest eigenvalue of `Π` compressed to `B1 ∪ B2`, discretized.
    pub fn operator_norm<K: Kernel + ?Sized>(&self, k: &K) -> Result<f64> {
        let w = k.window();
        let lo = self.b1.lo.min(self.b2.lo).max(w.lo);
        let hi = self.b1.hi.max(self.b2.hi).min(w.hi);
        if !(lo < hi) {
            return Ok(0.0);
        }
        let span = Window::new(lo, hi)?;
        let layout = PanelLayout::with_node_count(span, 200, PANEL_ORDER).breakpoints([
            self.b1.lo, self.b1.hi, self.b2.lo, self.b2.hi,
        ]);
        let rule = layout.rule()?;
        let inside = |x: f64| self.b1.contains(x) || self.b2.contains(x);
        let keep: Vec<usize> = (0..rule.len()).filter(|&i| inside(rule.nodes[i])).collect();
        let xs: Vec<f64> = keep.iter().map(|&i| rule.nodes[i]).collect();
        let sw: Vec<f64> = keep.iter().map(|&i| rule.weights[i].sqrt()).collect();
        let n = xs.len();
        let gram = k.gram(&xs);
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| sw[i] * gram[i * n + j] * sw[j]);
        let eig = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 100_000).ok_or(Error::EigenSolver(n))?;
        Ok(eig.eigenvalues.iter().copied().fold(0.0, f64::max))
    }
}

/// `∫_{B2} |g1 − g2|^{1+α} ρ₁ + ∫_{W∖B2} |g1 − g2|² ρ₁`, after checking
/// that `Π` compressed to `B1 ∪ B2` is a strict contraction.
pub fn g_distance<K: Kernel + ?Sized>(
    g1: &(impl TestFunction + ?Sized),
    g2: &(impl TestFunction + ?Sized),
    params: &GSpaceParams,
    k: &K,
    q: &Quadrature,
) -> Result<f64> {
    params.validate()?;
    let norm = params.operator_norm(k)?;
    if !(norm < 1.0) {
        return Err(Error::GSpace(format!("operator norm on B1 ∪ B2 is {norm}, not below 1")));
    }
    let b2 = params.b2;
    let mut bps = g1.breakpoints();
    bps.extend(g2.breakpoints());
    bps.extend([b2.lo, b2.hi]);
    q.integrate(k.window(), bps, |x| {
        let d = (g1.value(x) - g2.value(x)).abs();
        let p = if b2.contains(x) { d.powf(1.0 + params.alpha) } else { d * d };
        p * k.raw_diag(x)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelModel;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn conf(p: &[f64]) -> Configuration {
        Configuration::new(p.to_vec()).unwrap()
    }

    fn sine(h: f64) -> KernelModel {
        KernelModel::sine(Window::symmetric(h).unwrap())
    }

    #[test]
    fn additive_examples() {
        let sq = FnTest::new(|x: f64| x * x);
        assert_eq!(additive(&sq, &conf(&[1.0, -2.0, 3.0])), 14.0);
        assert_eq!(additive(&sq, &Configuration::empty()), 0.0);
        let c = Preset::Constant { c: 2.5 };
        assert_eq!(additive(&c, &conf(&[0.1, 0.2, 0.3, 0.4, 0.5])), 12.5);
    }

    #[test]
    fn expectations() {
        let q = Quadrature::default();
        let ind = Preset::Indicator { lo: 0.0, hi: 1.0 };
        assert_abs_diff_eq!(expected_additive(&ind, &sine(10.0), &q).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(expected_additive(&Preset::Constant { c: 0.0 }, &sine(10.0), &q).unwrap(), 0.0);
        let h1 = KernelModel::hermite(1, Window::symmetric(10.0).unwrap()).unwrap();
        assert_abs_diff_eq!(
            expected_additive(&Preset::Constant { c: 1.0 }, &h1, &q).unwrap(),
            1.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn variance_norm_of_indicator_is_count_variance() {
        // Independent oracle: ∫_A ρ − ∬_{A²} Π² on a dense midpoint grid.
        let k = sine(10.0);
        let q = Quadrature::default();
        let v = variance_norm(&Preset::Indicator { lo: 0.0, hi: 1.0 }, &k, &q).unwrap();
        let layout = PanelLayout::new(Window::new(0.0, 1.0).unwrap(), 0.05, 20);
        let r = layout.rule().unwrap();
        let mut double = 0.0;
        for (x, wx) in r.nodes.iter().zip(&r.weights) {
            for (y, wy) in r.nodes.iter().zip(&r.weights) {
                double += wx * wy * k.raw(*x, *y).powi(2);
            }
        }
        assert_abs_diff_eq!(v, 1.0 - double, epsilon = 1e-8);
    }

    #[test]
    fn variance_norm_ignores_constants() {
        let k = KernelModel::hermite(3, Window::symmetric(8.0).unwrap()).unwrap();
        let q = Quadrature::default().unchecked();
        assert_abs_diff_eq!(variance_norm(&Preset::Constant { c: 3.0 }, &k, &q).unwrap(), 0.0, epsilon = 1e-14);
        let f = Preset::GaussianBump {
            center: 0.3,
            width: 0.7,
            height: 1.0,
        };
        let shifted = Preset::Linear {
            terms: vec![
                LinearTerm { coef: 1.0, f: f.clone() },
                LinearTerm {
                    coef: 1.0,
                    f: Preset::Constant { c: 4.0 },
                },
            ],
        };
        let a = variance_norm(&f, &k, &q).unwrap();
        let b = variance_norm(&shifted, &k, &q).unwrap();
        assert!(a > 0.0);
        assert_abs_diff_eq!(a, b, epsilon = 1e-12 * a);
    }

    #[test]
    fn coulomb_examples() {
        let x = conf(&[0.5, -2.0, 10.0]);
        let s = CutoffSpec::new(5.0, 0.1, 0.0).unwrap();
        assert_abs_diff_eq!(regularized_coulomb(&s, &x), -3.0, epsilon = 1e-15);
        let s = CutoffSpec::new(5.0, 0.6, 0.0).unwrap();
        assert_abs_diff_eq!(regularized_coulomb(&s, &x), 1.0, epsilon = 1e-15);
        assert_eq!(regularized_coulomb(&s, &Configuration::empty()), 0.0);

        let p = CutoffSpec::new(5.0, 0.05, 0.0).unwrap().with_b(0.1).unwrap();
        assert_abs_diff_eq!(regularized_coulomb_pair(&p, &conf(&[1.0])).unwrap(), 2.0 / (0.1 - 1.0), epsilon = 1e-15);
        assert_eq!(regularized_coulomb_pair(&p, &conf(&[0.01, -0.02])).unwrap(), 0.0);
        let same = CutoffSpec::new(5.0, 0.1, 0.0).unwrap().with_b(0.0).unwrap();
        assert_eq!(regularized_coulomb_pair(&same, &x).unwrap(), regularized_coulomb(&same, &x));
        assert!(regularized_coulomb_pair(&s, &x).is_err());
    }

    #[test]
    fn cutoff_validation() {
        assert!(CutoffSpec::new(5.0, 1.5, 0.0).is_err());
        assert!(CutoffSpec::new(1.2, 0.1, 0.5).is_err());
        assert!(CutoffSpec::new(5.0, 0.1, 0.0).unwrap().with_b(0.5).is_err());
    }

    #[test]
    fn multiplicative_examples() {
        let one = Preset::Constant { c: 1.0 };
        assert_eq!(multiplicative(&one, &conf(&[1.0, 2.0])), 1.0);
        let g = FnTest::new(|x: f64| x - 1.0);
        assert_eq!(multiplicative(&g, &Configuration::empty()), 1.0);
        assert_eq!(multiplicative(&g, &conf(&[1.0, 3.0])), 0.0);
    }

    #[test]
    fn tilde_multiplicative_examples() {
        let q = Quadrature::default();
        let k = KernelModel::hermite(3, Window::symmetric(9.0).unwrap()).unwrap();
        let x = conf(&[-1.0, 0.2, 1.1]);
        assert_eq!(tilde_multiplicative(&Preset::Constant { c: 1.0 }, &k, &q, &x).unwrap(), 1.0);
        let e = Preset::Constant { c: std::f64::consts::E };
        assert_abs_diff_eq!(tilde_multiplicative(&e, &k, &q, &x).unwrap(), 1.0, epsilon = 1e-9);
        let g = FnTest::new(|x: f64| 1.0 + 0.5 * (-x * x).exp());
        let psi = multiplicative(&g, &x);
        let m = expected_log(&g, &k, &q).unwrap();
        assert_abs_diff_eq!(tilde_multiplicative(&g, &k, &q, &x).unwrap(), psi * (-m).exp(), epsilon = 1e-12);
        let neg = FnTest::new(|x: f64| x);
        assert!(tilde_multiplicative(&neg, &k, &q, &x).is_err());
    }

    #[test]
    fn normalized_multiplicative_self_normalizes() {
        let q = Quadrature::default();
        let k = sine(5.0);
        let samples: Vec<_> = (0..50).map(|i| conf(&[-1.0 + 0.03 * i as f64, 2.0])).collect();
        let g = FnTest::new(|x: f64| 1.0 + 0.5 * (-x * x).exp());
        let nm = normalized_multiplicative(g, &k, &q, &samples).unwrap();
        let mean: f64 = samples.iter().map(|x| nm.eval(x).unwrap()).sum::<f64>() / 50.0;
        assert_abs_diff_eq!(mean, 1.0, epsilon = 1e-14);
        let unit = normalized_multiplicative(Preset::Constant { c: 1.0 }, &k, &q, &samples).unwrap();
        assert_eq!(unit.normalizer.value, 1.0);
        assert_eq!(unit.eval(&samples[3]).unwrap(), 1.0);
    }

    #[test]
    fn g_distance_properties() {
        let q = Quadrature::default();
        let k = sine(6.0);
        let p = GSpaceParams::new(0.1, 2.0, Window::new(-1.0, 0.0).unwrap(), Window::new(0.5, 1.5).unwrap()).unwrap();
        let g1 = FnTest::new(|x: f64| 1.0 + 0.3 * (-x * x).exp());
        let g2 = FnTest::new(|x: f64| 1.0 + 0.2 * (-(x - 0.5).powi(2)).exp());
        assert_eq!(g_distance(&g1, &g1, &p, &k, &q).unwrap(), 0.0);
        assert_eq!(g_distance(&g1, &g2, &p, &k, &q).unwrap(), g_distance(&g2, &g1, &p, &k, &q).unwrap());
        let far = FnTest::new(|x: f64| if x.abs() > 6.0 { 5.0 } else { 1.0 });
        let unit = Preset::Constant { c: 1.0 };
        assert_eq!(g_distance(&far, &unit, &p, &k, &q).unwrap(), 0.0);
        let wide = GSpaceParams::new(0.1, 2.0, Window::new(-5.9, 5.9).unwrap(), Window::new(0.0, 1.0).unwrap()).unwrap();
        assert!(wide.operator_norm(&k).unwrap() < 1.0);
        assert!(GSpaceParams::new(2.0, 1.0, p.b1, p.b2).is_err());
    }

    #[test]
    fn presets_round_trip() {
        let f = Preset::Linear {
            terms: vec![
                LinearTerm {
                    coef: 1.0,
                    f: Preset::Indicator { lo: -2.0, hi: -0.5 },
                },
                LinearTerm {
                    coef: -1.0,
                    f: Preset::GaussianBump {
                        center: 0.0,
                        width: 1.0,
                        height: 1.0,
                    },
                },
            ],
        };
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(serde_json::from_str::<Preset>(&s).unwrap(), f);
        let b: Preset = serde_json::from_str(r#"{"type":"gaussian-bump","center":1,"width":2}"#).unwrap();
        assert_eq!(b.value(1.0), 1.0);
    }

    proptest! {
        #[test]
        fn centering_is_linear(
            pts in proptest::collection::btree_set(-400i32..400, 0..12),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let x = conf(&pts.iter().map(|&p| p as f64 / 50.0).collect::<Vec<_>>());
            let k = sine(8.0);
            let q = Quadrature::default().unchecked();
            let f = Preset::Indicator { lo: -1.0, hi: 2.0 };
            let g = Preset::GaussianBump { center: 0.5, width: 1.3, height: 1.0 };
            let h = Preset::Linear { terms: vec![
                LinearTerm { coef: alpha, f: f.clone() },
                LinearTerm { coef: beta, f: g.clone() },
            ]};
            let lhs = normalized_additive(&h, &k, &q, &x).unwrap();
            let rhs = alpha * normalized_additive(&f, &k, &q, &x).unwrap()
                + beta * normalized_additive(&g, &k, &q, &x).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn enlarging_cutoffs_adds_the_collar(
            pts in proptest::collection::btree_set(-600i32..600, 0..15),
            r in 2.0f64..5.0,
            dr in 0.0f64..3.0,
            delta in 0.05f64..0.6,
            shrink in 0.1f64..1.0,
        ) {
            let x = conf(&pts.iter().map(|&p| p as f64 / 97.0).collect::<Vec<_>>());
            let a = 0.3;
            let inner = CutoffSpec::new(r, delta, a).unwrap();
            let outer = CutoffSpec::new(r + dr, delta * shrink, a).unwrap();
            let collar: f64 = x.iter()
                .filter(|&p| outer.keeps(p) && !inner.keeps(p))
                .map(|p| 2.0 / (a - p))
                .sum();
            let diff = regularized_coulomb(&outer, &x) - regularized_coulomb(&inner, &x);
            prop_assert!((diff - collar).abs() < 1e-9);
        }
    }
}
