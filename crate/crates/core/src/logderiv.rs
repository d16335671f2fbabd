//! The logarithmic derivative `d_P(a, X) = (ln ρ₁)'(a) + S̄_a(X)` through
//! its regularizations `S̄^{R,δ}_a`, the Radon–Nikodym factor between
//! nearby Palm measures, and Monte Carlo checks of the integration by
//! parts identity.
//!
//! Palm expectations `E^a S^{R,δ}_a` are quadratures against
//! `Π^a(x, x)`. The Palm intensity vanishes to second order at `a`, which
//! cancels the pole of `2/(a − x)`, so the integrand is bounded.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimate::{mean_estimate, ratio_estimate, Estimate};
use crate::exec::{run_batched, Exec, DEFAULT_BATCH};
use crate::functionals::{check_normalizer, regularized_coulomb, CutoffSpec, Quadrature, DEFAULT_THETA};
use crate::kernels::{Kernel, KernelModel, Window, INTENSITY_FLOOR};
use crate::palm::PalmKernel;
use crate::quadrature::PanelLayout;
use crate::sampler::{count_in, AnchorDensity, CampbellSampler, Configuration};

/// Cauchy gap below which a schedule counts as converged.
pub const DEFAULT_CONV_TOL: f64 = 1e-2;

/// Cutoff pairs `(R, δ)` with `R` non-decreasing and `δ` non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct RegularizationSchedule {
    pairs: Vec<(f64, f64)>,
}

impl RegularizationSchedule {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.len() < 3 {
            return Err(invalid("a schedule needs at least 3 (R, delta) pairs"));
        }
        if pairs.iter().any(|&(r, d)| !(r > 0.0 && d > 0.0 && r.is_finite())) {
            return Err(invalid("schedule pairs need R > 0 and delta > 0"));
        }
        if pairs.windows(2).any(|w| w[1].0 < w[0].0 || w[1].1 > w[0].1) {
            return Err(invalid("schedule needs R non-decreasing and delta non-increasing"));
        }
        Ok(Self { pairs })
    }

    /// Checks that every cutoff fits in `window` and is admissible at `a`.
    pub fn check(&self, window: Window, a: f64) -> Result<()> {
        let reach = window.lo.abs().max(window.hi.abs());
        let last = self.pairs.last().expect("non-empty").0;
        if last > reach {
            return Err(invalid(format!("largest R = {last} exceeds the window reach {reach}")));
        }
        for &(r, d) in &self.pairs {
            CutoffSpec::new(r, d, a)?;
        }
        Ok(())
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn cutoffs(&self, a: f64) -> Result<Vec<CutoffSpec>> {
        self.pairs.iter().map(|&(r, d)| CutoffSpec::new(r, d, a)).collect()
    }
}

impl TryFrom<Vec<(f64, f64)>> for RegularizationSchedule {
    type Error = Error;
    fn try_from(v: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RegularizationSchedule> for Vec<(f64, f64)> {
    fn from(s: RegularizationSchedule) -> Self {
        s.pairs
    }
}

/// `"R1:d1,R2:d2,..."`.
impl FromStr for RegularizationSchedule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let pairs = s
            .split(',')
            .map(|p| {
                let (r, d) = p
                    .split_once(':')
                    .ok_or_else(|| invalid(format!("schedule entry {p:?} is not R:delta")))?;
                let parse = |t: &str| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| invalid(format!("schedule entry {p:?}: {e}")))
                };
                Ok((parse(r)?, parse(d)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs)
    }
}

impl fmt::Display for RegularizationSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pairs.iter().map(|(r, d)| format!("{r}:{d}")).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairValue {
    pub r: f64,
    pub delta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDerivEstimate {
    pub per_pair: Vec<PairValue>,
    /// Value at the finest pair; no extrapolation in `(R, δ)` is attempted.
    pub extrapolated: f64,
    pub converged: bool,
    /// Difference between the last two pair values.
    pub cauchy_gap: f64,
}

/// Palm expectations `E^a S^{R,δ}_a` for every pair of a schedule, all
/// computed on one rule built over the union of cutoff breakpoints.
pub fn palm_coulomb_means<K: Kernel + ?Sized>(palm: &K, specs: &[CutoffSpec], q: &Quadrature) -> Result<Vec<f64>> {
    let bps: Vec<f64> = specs
        .iter()
        .flat_map(|s| [-s.r, s.r, s.a - s.delta, s.a + s.delta])
        .collect();
    let layout = q.layout(palm.window(), bps);
    let means = coulomb_means_on(palm, specs, &layout)?;
    if q.check {
        let fine = coulomb_means_on(palm, specs, &layout.refined())?;
        for (c, f) in means.iter().zip(&fine) {
            if (c - f).abs() > crate::functionals::REFINEMENT_TOL {
                log::warn!("Palm expectation not converged: {c:.12e} vs refined {f:.12e}");
            }
        }
        return Ok(fine);
    }
    Ok(means)
}

fn coulomb_means_on<K: Kernel + ?Sized>(palm: &K, specs: &[CutoffSpec], layout: &PanelLayout) -> Result<Vec<f64>> {
    let rule = layout.rule()?;
    let rho: Vec<f64> = rule.nodes.iter().map(|&x| palm.raw_diag(x)).collect();
    Ok(specs
        .iter()
        .map(|s| {
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .zip(&rho)
                .filter(|((&x, _), _)| s.keeps(x))
                .map(|((&x, &w), &r)| w * r * 2.0 / (s.a - x))
                .sum()
        })
        .collect())
}

fn check_anchor(k: &KernelModel, a: f64) -> Result<()> {
    k.check_point(a)?;
    let rho = k.raw_diag(a);
    if !(rho > INTENSITY_FLOOR) {
        return Err(Error::DegenerateIntensity {
            at: a,
            intensity: rho,
            floor: INTENSITY_FLOOR,
        });
    }
    Ok(())
}

/// `S̄^{R,δ}_a(X) = S^{R,δ}_a(X) − E^a S^{R,δ}_a`.
pub fn normalized_coulomb(k: &KernelModel, spec: &CutoffSpec, q: &Quadrature, x: &Configuration) -> Result<f64> {
    check_anchor(k, spec.a)?;
    let palm = PalmKernel::new(k.clone(), &[spec.a])?;
    let mean = palm_coulomb_means(&palm, std::slice::from_ref(spec), q)?[0];
    Ok(regularized_coulomb(spec, x) - mean)
}

/// `d_P(a, ·)` along a schedule, with the anchor-dependent parts
/// precomputed so that evaluation on a configuration is a single pass.
#[derive(Debug, Clone)]
pub struct LogDerivative {
    pub a: f64,
    pub intensity_term: f64,
    pub specs: Vec<CutoffSpec>,
    pub palm_means: Vec<f64>,
    pub conv_tol: f64,
}

impl LogDerivative {
    pub fn new(k: &KernelModel, a: f64, schedule: &RegularizationSchedule, q: &Quadrature) -> Result<Self> {
        check_anchor(k, a)?;
        schedule.check(k.window(), a)?;
        let specs = schedule.cutoffs(a)?;
        let palm = PalmKernel::new(k.clone(), &[a])?;
        let palm_means = palm_coulomb_means(&palm, &specs, q)?;
        Ok(Self {
            a,
            intensity_term: k.intensity_log_derivative(a)?,
            specs,
            palm_means,
            conv_tol: DEFAULT_CONV_TOL,
        })
    }

    /// Value at every schedule pair.
    pub fn values(&self, x: &Configuration) -> Vec<f64> {
        self.specs
            .iter()
            .zip(&self.palm_means)
            .map(|(s, m)| self.intensity_term + regularized_coulomb(s, x) - m)
            .collect()
    }

    /// Value at the finest pair.
    pub fn finest(&self, x: &Configuration) -> f64 {
        let s = self.specs.last().expect("non-empty schedule");
        let m = self.palm_means.last().expect("non-empty schedule");
        self.intensity_term + regularized_coulomb(s, x) - m
    }

    pub fn eval(&self, x: &Configuration) -> LogDerivEstimate {
        let values = self.values(x);
        let n = values.len();
        let cauchy_gap = (values[n - 1] - values[n - 2]).abs();
        LogDerivEstimate {
            per_pair: self
                .specs
                .iter()
                .zip(&values)
                .map(|(s, &value)| PairValue {
                    r: s.r,
                    delta: s.delta,
                    value,
                })
                .collect(),
            extrapolated: values[n - 1],
            converged: cauchy_gap < self.conv_tol,
            cauchy_gap,
        }
    }
}

/// `d_P(a, X)` along `schedule`.
pub fn log_derivative(
    k: &KernelModel,
    a: f64,
    schedule: &RegularizationSchedule,
    q: &Quadrature,
    x: &Configuration,
) -> Result<LogDerivEstimate> {
    Ok(LogDerivative::new(k, a, schedule, q)?.eval(x))
}

/// `−2a + Σ 2/(a − x)`: the log-derivative of the finite Hermite
/// ensemble, from differentiating its joint density in one coordinate.
pub fn hermite_closed_form(a: f64, x: &Configuration) -> f64 {
    -2.0 * a + x.iter().map(|p| 2.0 / (a - p)).sum::<f64>()
}

/// `Ψ̄^{R,δ}_{b,a}`, the density of `P^b` with respect to `P^a`, with its
/// normalizer estimated on samples of `P^a`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadonNikodymFactor {
    pub a: f64,
    pub b: f64,
    pub spec: CutoffSpec,
    /// `Ê^a Π ((x − b)/(x − a))²`; the constant `C` is its reciprocal.
    pub normalizer: Estimate,
}

impl RadonNikodymFactor {
    /// The unnormalized product over points surviving the cutoffs.
    pub fn product(&self, x: &Configuration) -> f64 {
        rn_product(&self.spec, self.a, self.b, x)
    }

    pub fn constant(&self) -> f64 {
        1.0 / self.normalizer.value
    }

    pub fn eval(&self, x: &Configuration) -> f64 {
        self.product(x) / self.normalizer.value
    }
}

fn rn_product(spec: &CutoffSpec, a: f64, b: f64, x: &Configuration) -> f64 {
    if a == b {
        return 1.0;
    }
    x.iter()
        .filter(|&p| spec.keeps(p))
        .map(|p| {
            let r = (p - b) / (p - a);
            r * r
        })
        .product()
}

fn rn_spec(spec: &CutoffSpec, a: f64, b: f64) -> Result<CutoffSpec> {
    CutoffSpec { a, b: None, ..*spec }.with_b(b)
}

pub fn radon_nikodym_factor(
    a: f64,
    b: f64,
    spec: &CutoffSpec,
    palm_samples: &[Configuration],
) -> Result<RadonNikodymFactor> {
    if palm_samples.is_empty() {
        return Err(invalid("Radon-Nikodym normalizer needs samples"));
    }
    let spec = rn_spec(spec, a, b)?;
    let values: Vec<f64> = palm_samples.iter().map(|x| rn_product(&spec, a, b, x)).collect();
    let normalizer = if a == b { Estimate::exact(1.0) } else { mean_estimate(&values) };
    check_normalizer(&normalizer)?;
    Ok(RadonNikodymFactor {
        a,
        b,
        spec,
        normalizer,
    })
}

/// `S^{R,δ}_{a,b}` evaluated with the cutoffs of `spec`.
fn pair_sum(spec: &CutoffSpec, b: f64, x: &Configuration) -> f64 {
    x.iter().filter(|&p| spec.keeps(p)).map(|p| 2.0 / (b - p)).sum()
}

/// `d/dε ln C^{R,δ}_{a+ε,a} = −E^a[Ψ̄^{R,δ}_{a+ε,a} S^{R,δ}_{a,a+ε}]`,
/// estimated as a ratio of sample means with a delta-method standard
/// error. `spec.b` holds `a + ε`; without it `ε = 0`.
pub fn dlnc_derivative(spec: &CutoffSpec, palm_samples: &[Configuration]) -> Result<Estimate> {
    if palm_samples.is_empty() {
        return Err(invalid("ln C derivative needs samples"));
    }
    let a = spec.a;
    let b = spec.b.unwrap_or(a);
    let spec = rn_spec(spec, a, b)?;
    let prod: Vec<f64> = palm_samples.iter().map(|x| rn_product(&spec, a, b, x)).collect();
    let weighted: Vec<f64> = palm_samples
        .iter()
        .zip(&prod)
        .map(|(x, p)| -p * pair_sum(&spec, b, x))
        .collect();
    check_normalizer(&mean_estimate(&prod))?;
    Ok(ratio_estimate(&weighted, &prod))
}

/// Empirical `L²(P^a)` distance between `(Ψ̄_{a+ε,a} − 1)/ε` and
/// `S̄^{R,δ}_a` for every `ε`.
pub fn rn_difference_quotient_check(
    k: &KernelModel,
    eps: &[f64],
    spec: &CutoffSpec,
    q: &Quadrature,
    palm_samples: &[Configuration],
) -> Result<Vec<(f64, f64)>> {
    if eps.iter().any(|e| *e == 0.0 || !(e.abs() < DEFAULT_THETA)) {
        return Err(invalid(format!("every epsilon must satisfy 0 < |eps| < {DEFAULT_THETA}")));
    }
    if eps.windows(2).any(|w| w[1].abs() >= w[0].abs()) {
        return Err(invalid("epsilons must decrease in absolute value"));
    }
    let a = spec.a;
    check_anchor(k, a)?;
    let base = CutoffSpec { b: None, ..*spec };
    let palm = PalmKernel::new(k.clone(), &[a])?;
    let mean = palm_coulomb_means(&palm, std::slice::from_ref(&base), q)?[0];
    let centered: Vec<f64> = palm_samples.iter().map(|x| regularized_coulomb(&base, x) - mean).collect();
    eps.iter()
        .map(|&e| {
            let f = radon_nikodym_factor(a, a + e, &base, palm_samples)?;
            let ms = palm_samples
                .iter()
                .zip(&centered)
                .map(|(x, s)| ((f.eval(x) - 1.0) / e - s).powi(2))
                .sum::<f64>()
                / palm_samples.len() as f64;
            Ok((e, ms.sqrt()))
        })
        .collect()
}

/// The smooth bump `exp(−1/(1 − t²))`, `t = (a − center)/radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub radius: f64,
}

impl Bump {
    pub fn support(&self) -> Result<Window> {
        Window::new(self.center - self.radius, self.center + self.radius)
    }

    pub fn value(&self, a: f64) -> f64 {
        let t = (a - self.center) / self.radius;
        if t.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - t * t)).exp()
        }
    }

    /// `χ'(a) / χ(a)`, finite inside the support.
    pub fn log_slope(&self, a: f64) -> f64 {
        let t = (a - self.center) / self.radius;
        let u = 1.0 - t * t;
        -2.0 * t / (u * u * self.radius)
    }

    pub fn derivative(&self, a: f64) -> f64 {
        let v = self.value(a);
        if v == 0.0 {
            0.0
        } else {
            v * self.log_slope(a)
        }
    }
}

/// Bounded local functionals `ψ(X)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Observable {
    Ones,
    /// `exp(−#_{[lo, hi)}(X))`.
    ExpCount { lo: f64, hi: f64 },
    /// `exp(−Σ exp(−((x − center)/width)²))`.
    ExpSmooth { center: f64, width: f64 },
}

impl Observable {
    pub fn eval(&self, x: &Configuration) -> f64 {
        match *self {
            Observable::Ones => 1.0,
            Observable::ExpCount { lo, hi } => (-(count_in(x, lo, hi) as f64)).exp(),
            Observable::ExpSmooth { center, width } => {
                let s: f64 = x.iter().map(|p| (-((p - center) / width).powi(2)).exp()).sum();
                (-s).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbpResult {
    /// `∫ χ'(a) ψ(X) dC_P`.
    pub lhs: Estimate,
    /// `−∫ d_P(a, X) χ(a) ψ(X) dC_P`.
    pub rhs: Estimate,
    /// `|lhs − rhs|` over the standard error of the per-sample difference.
    pub z_score: f64,
    pub n: u64,
    /// Fraction of samples whose schedule did not converge.
    pub unconverged: f64,
}

/// Checks `∫ ∂_a φ dC_P = −∫ d_P φ dC_P` for `φ(a, X) = χ(a) ψ(X)`.
///
/// Anchors are drawn with density `∝ χρ₁`, so both sides are `∫χρ₁`
/// times a sample mean; `χ'/χ` replaces `χ'`. `d_P` is taken at the
/// finest schedule pair.
#[allow(clippy::too_many_arguments)]
pub fn ibp_test(
    k: &KernelModel,
    chi: Bump,
    psi: Observable,
    schedule: &RegularizationSchedule,
    q: &Quadrature,
    layout: PanelLayout,
    n_samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<IbpResult> {
    Ok(ibp_battery(k, chi, &[psi], schedule, q, layout, n_samples, seed, exec)?[0])
}

/// [`ibp_test`] for several observables on one set of Campbell samples.
#[allow(clippy::too_many_arguments)]
pub fn ibp_battery(
    k: &KernelModel,
    chi: Bump,
    psis: &[Observable],
    schedule: &RegularizationSchedule,
    q: &Quadrature,
    layout: PanelLayout,
    n_samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<IbpResult>> {
    let support = chi.support()?;
    for a in [support.lo, support.hi] {
        schedule.check(k.window(), a)?;
    }
    let sampler = CampbellSampler::new(k.clone(), AnchorDensity::new(support, move |a| chi.value(a)), layout)?;
    let mass = sampler.mass();
    let q = q.unchecked();
    // Per sample: χ'/χ, −d_P, converged, ψ values.
    let rows = run_batched(exec, seed, n_samples, DEFAULT_BATCH, |rng, _| -> Result<(f64, f64, bool, Vec<f64>)> {
        let s = sampler.sample(rng)?;
        let d = LogDerivative::new(k, s.anchor, schedule, &q)?.eval(&s.config);
        let p = psis.iter().map(|o| o.eval(&s.config)).collect();
        Ok((chi.log_slope(s.anchor), -d.extrapolated, d.converged, p))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let unconverged = rows.iter().filter(|r| !r.2).count() as f64 / rows.len().max(1) as f64;
    if unconverged > 0.0 {
        log::info!("{:.1}% of samples did not converge along the schedule", 100.0 * unconverged);
    }
    Ok((0..psis.len())
        .map(|o| {
            let lhs: Vec<f64> = rows.iter().map(|r| mass * r.0 * r.3[o]).collect();
            let rhs: Vec<f64> = rows.iter().map(|r| mass * r.1 * r.3[o]).collect();
            let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(l, r)| l - r).collect();
            let d = mean_estimate(&diff);
            IbpResult {
                lhs: mean_estimate(&lhs),
                rhs: mean_estimate(&rhs),
                z_score: if d.value == 0.0 { 0.0 } else { d.value.abs() / d.stderr },
                n: rows.len() as u64,
                unconverged,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::stream;
    use crate::sampler::{discretize, sample_dpp};
    use approx::assert_abs_diff_eq;

    fn conf(p: &[f64]) -> Configuration {
        Configuration::new(p.to_vec()).unwrap()
    }

    #[test]
    fn schedule_parsing_and_validation() {
        let s: RegularizationSchedule = "5:0.2,10:0.1,20:0.05".parse().unwrap();
        assert_eq!(s.pairs(), &[(5.0, 0.2), (10.0, 0.1), (20.0, 0.05)]);
        assert_eq!(s.to_string().parse::<RegularizationSchedule>().unwrap(), s);
        assert!("5:0.2,10:0.1".parse::<RegularizationSchedule>().is_err());
        assert!("5:0.2,4:0.1,20:0.05".parse::<RegularizationSchedule>().is_err());
        assert!("5:0.2,10:0.3,20:0.05".parse::<RegularizationSchedule>().is_err());
        assert!("5-0.2".parse::<RegularizationSchedule>().is_err());
        assert!(s.check(Window::symmetric(10.0).unwrap(), 0.0).is_err());
        assert!(s.check(Window::symmetric(20.0).unwrap(), 0.0).is_ok());
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<RegularizationSchedule>(&json).unwrap(), s);
    }

    #[test]
    fn symmetric_pair_on_sine_gives_zero() {
        let k = KernelModel::sine(Window::symmetric(12.0).unwrap());
        let s: RegularizationSchedule = "4:0.2,8:0.1,10:0.05".parse().unwrap();
        let d = log_derivative(&k, 0.0, &s, &Quadrature::default(), &conf(&[-1.3, 1.3])).unwrap();
        assert_abs_diff_eq!(d.extrapolated, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn repeated_pairs_converge_trivially() {
        let k = KernelModel::sine(Window::symmetric(12.0).unwrap());
        let s: RegularizationSchedule = "8:0.1,8:0.1,8:0.1".parse().unwrap();
        let d = log_derivative(&k, 0.4, &s, &Quadrature::default(), &conf(&[-2.0, 1.0, 3.5])).unwrap();
        assert_eq!(d.cauchy_gap, 0.0);
        assert!(d.converged);
    }

    #[test]
    fn hermite_matches_closed_form() {
        for n in [2, 4] {
            let k = KernelModel::hermite(n, Window::symmetric(9.0).unwrap()).unwrap();
            let s: RegularizationSchedule = "9:1e-4,9:1e-4,9:1e-4".parse().unwrap();
            let ld = LogDerivative::new(&k, 0.37, &s, &Quadrature::default()).unwrap();
            let x: Vec<f64> = (0..n - 1).map(|i| -1.1 + 0.9 * i as f64).collect();
            let x = conf(&x);
            assert_abs_diff_eq!(ld.finest(&x), hermite_closed_form(0.37, &x), epsilon = 1e-6);
        }
    }

    #[test]
    fn normalized_coulomb_is_centered_on_palm_quadrature() {
        let k = KernelModel::hermite(1, Window::symmetric(8.0).unwrap()).unwrap();
        let spec = CutoffSpec::new(6.0, 0.1, 0.2).unwrap();
        // Rank one: the Palm process is empty, so S̄ = −E^a S = 0.
        let v = normalized_coulomb(&k, &spec, &Quadrature::default(), &Configuration::empty()).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        let far = KernelModel::hermite(1, Window::symmetric(40.0).unwrap()).unwrap();
        let spec = CutoffSpec::new(39.95, 0.1, 38.9).unwrap();
        assert!(matches!(
            normalized_coulomb(&far, &spec, &Quadrature::default(), &Configuration::empty()),
            Err(Error::DegenerateIntensity { .. })
        ));
    }

    #[test]
    fn rn_factor_identity_and_exclusion() {
        let spec = CutoffSpec::new(5.0, 0.05, 0.0).unwrap();
        let samples: Vec<_> = (0..20).map(|i| conf(&[-1.0 - 0.01 * i as f64, 0.5 + 0.02 * i as f64])).collect();
        let same = radon_nikodym_factor(0.0, 0.0, &spec, &samples).unwrap();
        assert_eq!(same.eval(&samples[0]), 1.0);
        let f = radon_nikodym_factor(0.0, 0.1, &spec, &samples).unwrap();
        let mean = samples.iter().map(|x| f.eval(x)).sum::<f64>() / 20.0;
        assert_abs_diff_eq!(mean, 1.0, epsilon = 1e-15);
        // 0.12 lies within δ of b and drops out of the product.
        assert_eq!(f.product(&conf(&[0.12])), 1.0);
        assert!(radon_nikodym_factor(0.0, 0.5, &spec, &samples).is_err());
    }

    #[test]
    fn dlnc_at_zero_is_minus_mean_coulomb() {
        let spec = CutoffSpec::new(5.0, 0.05, 0.0).unwrap();
        let samples = vec![conf(&[-1.0, 0.5]), conf(&[0.3, 2.0])];
        let e = dlnc_derivative(&spec, &samples).unwrap();
        let direct = -(regularized_coulomb(&spec, &samples[0]) + regularized_coulomb(&spec, &samples[1])) / 2.0;
        assert_abs_diff_eq!(e.value, direct, epsilon = 1e-12);
    }

    #[test]
    fn difference_quotient_rejects_zero() {
        let k = KernelModel::sine(Window::symmetric(8.0).unwrap());
        let spec = CutoffSpec::new(5.0, 0.05, 0.0).unwrap();
        let s = vec![conf(&[1.0])];
        assert!(rn_difference_quotient_check(&k, &[0.0], &spec, &Quadrature::default(), &s).is_err());
        assert!(rn_difference_quotient_check(&k, &[0.02, 0.2], &spec, &Quadrature::default(), &s).is_err());
    }

    #[test]
    fn difference_quotient_gap_shrinks_on_hermite() {
        let k = KernelModel::hermite(4, Window::symmetric(9.0).unwrap()).unwrap();
        let a = 0.2;
        let d = discretize(&PalmKernel::new(k.clone(), &[a]).unwrap(), 200).unwrap();
        let mut rng = stream(17, 0);
        let samples: Vec<_> = (0..4000).map(|_| sample_dpp(&d, &mut rng)).collect();
        let spec = CutoffSpec::new(9.0, 1e-3, a).unwrap();
        let eps = [0.2, 0.05, 0.02];
        let gaps = rn_difference_quotient_check(&k, &eps, &spec, &Quadrature::default(), &samples).unwrap();
        assert!(gaps.windows(2).all(|w| w[1].1 < w[0].1), "{gaps:?}");
        assert!(gaps[2].1 < 0.3 * gaps[0].1, "{gaps:?}");
    }

    #[test]
    fn bump_derivative_matches_finite_difference() {
        let b = Bump {
            center: 0.2,
            radius: 1.5,
        };
        for a in [-1.0, -0.3, 0.2, 0.9, 1.6] {
            let h = 1e-6;
            let fd = (b.value(a + h) - b.value(a - h)) / (2.0 * h);
            assert_abs_diff_eq!(b.derivative(a), fd, epsilon = 1e-8);
        }
        assert_eq!(b.value(2.0), 0.0);
    }

    #[test]
    fn observables() {
        let x = conf(&[0.0, 2.5, 2.7]);
        assert_eq!(Observable::Ones.eval(&x), 1.0);
        assert_abs_diff_eq!(Observable::ExpCount { lo: 2.0, hi: 3.0 }.eval(&x), (-2.0f64).exp());
        assert_eq!(Observable::ExpSmooth { center: 0.5, width: 1.0 }.eval(&Configuration::empty()), 1.0);
    }
}
