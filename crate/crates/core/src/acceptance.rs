//! The acceptance suite: eight Monte Carlo checks of the library against
//! independent oracles, each reduced to one pass/fail verdict.
//!
//! [`Scale::Quick`] divides every sample count by ten and keeps the
//! tolerances, so it has less power but the same meaning.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::dynamics::{run_diffusion, DiffusionConfig, DriftMode};
use crate::error::{invalid, Result};
use crate::estimate::{mean_estimate, ratio_estimate, variance_estimate, Estimate};
use crate::exec::{run_batched, Exec, DEFAULT_BATCH};
use crate::functionals::{variance_norm, CutoffSpec, LinearTerm, Preset, Quadrature, TestFunction};
use crate::kernels::{Kernel, KernelModel, KernelSpec, Window};
use crate::logderiv::{
    dlnc_derivative, hermite_closed_form, ibp_battery, radon_nikodym_factor, Bump, LogDerivative, Observable,
    RegularizationSchedule,
};
use crate::palm::PalmKernel;
use crate::sampler::{
    default_layout, discretize, empirical_intensity, sample_dpp, uniform_edges, Configuration, DiscretizedKernel,
    DEFAULT_NODES,
};

pub const DEFAULT_SEED: u64 = 20261017;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Full,
    Quick,
}

impl Scale {
    fn n(self, full: usize) -> usize {
        match self {
            Scale::Full => full,
            Scale::Quick => (full / 10).max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AcceptanceOptions {
    pub scale: Scale,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for AcceptanceOptions {
    fn default() -> Self {
        Self {
            scale: Scale::Full,
            seed: DEFAULT_SEED,
            exec: Exec::Parallel,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// One line: the decisive numbers, or the error that stopped the run.
    pub summary: String,
    pub metrics: Vec<Metric>,
    pub seconds: f64,
}

pub const CRITERIA: [(u8, &str); 8] = [
    (1, "isometry"),
    (2, "palm-correctness"),
    (3, "regularized-convergence"),
    (4, "finite-n-exact"),
    (5, "integration-by-parts"),
    (6, "radon-nikodym"),
    (7, "ln-c-consistency"),
    (8, "dynamics-invariance"),
];

const Z_MAX: f64 = 3.0;

/// Runs criterion `id`. Errors inside a criterion become a failed result.
pub fn run_criterion(id: u8, opts: &AcceptanceOptions) -> Result<CriterionResult> {
    let name = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map(|c| c.1)
        .ok_or_else(|| invalid(format!("no acceptance criterion {id}")))?;
    let seed = opts.seed.wrapping_add(1_000_003 * id as u64);
    let start = Instant::now();
    let mut m = Metrics::default();
    let outcome = match id {
        1 => isometry(opts, seed, &mut m),
        2 => palm_correctness(opts, seed, &mut m),
        3 => regularized_convergence(opts, seed, &mut m),
        4 => finite_n_exact(opts, seed, &mut m),
        5 => integration_by_parts(opts, seed, &mut m),
        6 => radon_nikodym(opts, seed, &mut m),
        7 => ln_c_consistency(opts, seed, &mut m),
        _ => dynamics_invariance(opts, seed, &mut m),
    };
    let (passed, summary) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    Ok(CriterionResult {
        id,
        name,
        passed,
        summary,
        metrics: m.0,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every criterion in order, reporting each as it finishes.
pub fn run_all(opts: &AcceptanceOptions, mut on_done: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .map(|&(id, _)| {
            let r = run_criterion(id, opts).expect("known criterion");
            on_done(&r);
            r
        })
        .collect()
}

#[derive(Default)]
struct Metrics(Vec<Metric>);

impl Metrics {
    fn push(&mut self, name: impl Into<String>, value: f64) {
        self.0.push(Metric {
            name: name.into(),
            value,
        });
    }
}

type Verdict = Result<(bool, String)>;

fn draws(disc: &DiscretizedKernel, n: usize, seed: u64, exec: Exec) -> Vec<Configuration> {
    run_batched(exec, seed, n, DEFAULT_BATCH, |rng, _| sample_dpp(disc, rng))
}

fn hermite(n: usize) -> Result<KernelModel> {
    KernelSpec::Hermite { n }.build(None)
}

fn isometry(opts: &AcceptanceOptions, seed: u64, m: &mut Metrics) -> Verdict {
    let bump = |center, width, height| Preset::GaussianBump { center, width, height };
    let fs = [
        ("indicator", Preset::Indicator { lo: 0.0, hi: 1.0 }),
        ("bump", bump(0.0, 1.0, 1.0)),
        ("tall-bump", bump(1.5, 0.5, 2.0)),
        ("coulomb", Preset::CoulombTruncated { a: 0.3, r: 4.0, delta: 0.25 }),
        (
            "linear",
            Preset::Linear {
                terms: vec![
                    LinearTerm {
                        coef: 1.0,
                        f: Preset::Indicator { lo: -2.0, hi: -0.5 },
                    },
                    LinearTerm {
                        coef: -1.0,
                        f: bump(0.0, 1.0, 1.0),
                    },
                ],
            },
        ),
    ];
    let kernels = [("sine", KernelModel::sine(Window::symmetric(10.0)?)), ("hermite5", hermite(5)?)];
    let n = opts.scale.n(20_000);
    let q = Quadrature::default();
    let mut worst = 0.0f64;
    for (ki, (kname, k)) in kernels.iter().enumerate() {
        let disc = discretize(k, DEFAULT_NODES)?;
        let samples = draws(&disc, n, seed + ki as u64, opts.exec);
        for (fname, f) in &fs {
            let values: Vec<f64> = samples.iter().map(|x| x.iter().map(|p| f.value(p)).sum()).collect();
            let mc = variance_estimate(&values);
            let oracle = variance_norm(f, k, &q)?;
            let zz = mc.z_against(&Estimate::exact(oracle));
            m.push(format!("{kname}/{fname}/mc"), mc.value);
            m.push(format!("{kname}/{fname}/norm"), oracle);
            m.push(format!("{kname}/{fname}/z"), zz);
            worst = worst.max(zz);
        }
    }
    Ok((worst < Z_MAX, format!("max |z| = {worst:.2} over 10 variances, {n} samples each")))
}

fn palm_correctness(opts: &AcceptanceOptions, seed: u64, m: &mut Metrics) -> Verdict {
    let (n_particles, a, width) = (6, 0.5, 0.1);
    let k = hermite(n_particles)?;
    let pk = PalmKernel::new(k.clone(), &[a])?;
    let disc = discretize(&pk, DEFAULT_NODES)?;
    let n = opts.scale.n(10_000);
    let samples = draws(&disc, n, seed, opts.exec);
    let wrong = samples.iter().filter(|x| x.len() != n_particles - 1).count();
    let w = k.window();
    let below = ((a - 0.5 * width - w.lo) / width).floor() as i64;
    let above = ((w.hi - a - 0.5 * width) / width).floor() as i64;
    let edges: Vec<f64> = (-below..=above + 1).map(|j| a - 0.5 * width + width * j as f64).collect();
    let hist = empirical_intensity(&samples, &edges)?;
    let inner = hist.density[below as usize].value;
    let peak = hist.density.iter().map(|e| e.value).fold(0.0, f64::max);
    let ratio = inner / peak;
    m.push("wrong-cardinality", wrong as f64);
    m.push("inner-bin", inner);
    m.push("peak-bin", peak);
    m.push("ratio", ratio);
    Ok((
        wrong == 0 && ratio < 0.05,
        format!("{wrong} of {n} samples with cardinality != {}; anchor bin / peak = {ratio:.4}", n_particles - 1),
    ))
}

fn regularized_convergence(opts: &AcceptanceOptions, seed: u64, m: &mut Metrics) -> Verdict {
    let a = 0.25;
    let full = [(5.0, 0.2), (10.0, 0.1), (20.0, 0.05)];
    let n = opts.scale.n(10_000);
    let q = Quadrature::default();
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (wi, w) in [10.0, 20.0, 40.0].into_iter().enumerate() {
        let k = KernelModel::sine(Window::symmetric(w)?);
        let schedule = RegularizationSchedule::new(full.iter().map(|&(r, d)| (f64::min(r, w), d)).collect())?;
        let ld = LogDerivative::new(&k, a, &schedule, &q)?;
        let pk = PalmKernel::new(k.clone(), &[a])?;
        let disc = discretize(&pk, (20.0 * w) as usize)?;
        let samples = draws(&disc, n, seed + wi as u64, opts.exec);
        let values: Vec<Vec<f64>> = samples.iter().map(|x| ld.values(x)).collect();
        let mut gaps = Vec::new();
        for i in 0..schedule.pairs().len() - 1 {
            let sq: Vec<f64> = values.iter().map(|v| (v[i] - v[i + 1]).powi(2)).collect();
            let mc = mean_estimate(&sq);
            let diff = Preset::Linear {
                terms: vec![
                    LinearTerm {
                        coef: 1.0,
                        f: ld.specs[i].function(),
                    },
                    LinearTerm {
                        coef: -1.0,
                        f: ld.specs[i + 1].function(),
                    },
                ],
            };
            let oracle = variance_norm(&diff, &pk, &q)?;
            let zz = mc.z_against(&Estimate::exact(oracle));
            worst = worst.max(zz);
            m.push(format!("W{w}/gap{i}/mc"), mc.value);
            m.push(format!("W{w}/gap{i}/norm"), oracle);
            m.push(format!("W{w}/gap{i}/z"), zz);
            gaps.push(mc.value.sqrt());
        }
        let monotone = gaps.windows(2).all(|g| g[1] < g[0]);
        ok &= monotone;
        lines.push(format!(
            "W={w}: {}",
            gaps.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>().join(" > ")
        ));
    }
    ok &= worst < Z_MAX;
    Ok((ok, format!("L2 gaps {}; max |z| vs norm = {worst:.2}", lines.join(", "))))
}

fn finite_n_exact(opts: &AcceptanceOptions, seed: u64, m: &mut Metrics) -> Verdict {
    let pairs = 100;
    let q = Quadrature::default().unchecked();
    let mut worst = 0.0f64;
    for (ni, n_particles) in [2usize, 4, 8].into_iter().enumerate() {
        let k = hermite(n_particles)?;
        let r = k.window().half_width();
        let schedule = RegularizationSchedule::new(vec![(r, 1e-3), (r, 1e-5), (r, 1e-7)])?;
        let disc = discretize(&k, DEFAULT_NODES)?;
        let errs = run_batched(opts.exec, seed + ni as u64, pairs, DEFAULT_BATCH, |rng, _| -> Result<f64> {
            let x = sample_dpp(&disc, rng);
            if x.is_empty() {
                return Err(invalid("empty Hermite sample"));
            }
            let i = rng.random_range(0..x.len());
            let a = x.points()[i];
            let rest = x.without(i);
            let got = LogDerivative::new(&k, a, &schedule, &q)?.finest(&rest);
            Ok((got - hermite_closed_form(a, &rest)).abs())
        });
        let errs = errs.into_iter().collect::<Result<Vec<_>>>()?;
        let max = errs.iter().cloned().fold(0.0, f64::max);
        m.push(format!("hermite{n_particles}/max-error"), max);
        worst = worst.max(max);
    }
    Ok((worst < 1e-4, format!("max |d - closed form| = {worst:.3e} over {pairs} pairs per N")))
}

fn integration_by_parts(opts: &AcceptanceOptions, seed: u64, m: &mut Metrics) -> Verdict {
    let chi = Bump {
        center: 0.0,
        radius: 1.0,
    };
    let psis = [
        Observable::Ones,
        Observable::ExpCount { lo: 2.0, hi: 3.0 },
        Observable::ExpSmooth {
            center: 0.5,
            width: 1.0,
        },
    ];
    let sine_schedule = RegularizationSchedule::new(vec![(5.0, 0.2), (10.0, 0.1), (20.0, 0.05)])?;
    let herm_schedule = RegularizationSchedule::new(vec![(6.0, 0.2), (8.0, 0.1), (10.0, 0.05)])?;
    let wide = Window::symmetric(10.0)?;
    let cases = [
        ("sine", KernelModel::sine(Window::symmetric(24.0)?), &sine_schedule, 384),
        ("hermite4", hermite(4)?.with_window(wide)?, &herm_schedule, DEFAULT_NODES),
        ("hermite8", hermite(8)?.with_window(wide)?, &herm_schedule, DEFAULT_NODES),
    ];
    let n = opts.scale.n(100_000);
    let q = Quadrature::default();
    let mut worst = 0.0f64;
    for (ci, (kname, k, schedule, nodes)) in cases.iter().enumerate() {
        let layout = default_layout(k, *nodes);
        let rs = ibp_battery(k, chi, &psis, schedule, &q, layout, n, seed + ci as u64, opts.exec)?;
        for (pi, r) in rs.iter().enumerate() {
            m.push(format!("{kname}/psi{pi}/lhs"), r.lhs.value);
            m.push(format!("{kname}/psi{pi}/rhs"), r.rhs.value);
            m.push(format!("{kname}/psi{pi}/z"), r.z_score);
            worst = worst.max(r.z_score);
        }
        m.push(format!("{kname}/unconverged"), rs[0].unconverged);
    }
    Ok((worst < Z_MAX, format!("max z = {worst:.2} over 9 cases, {n} Campbell samples per kernel")))
}

fn rn_observables() -> [Observable; 3] {
    [
        Observable::ExpCount { lo: 2.0, hi: 3.0 },
        Observable::ExpCount { lo: 0.0, hi: 1.0 },
        Observable::ExpSmooth {
            center: 0.5,
            width: 1.0,
        },
    ]
}

/// Sine on `[−12, 12]` and Hermite 6, with the node count used for each.
fn rn_kernels() -> Result<[(&'static str, KernelModel, usize); 2]> {
    Ok([
        ("sine", KernelModel::sine(Window::symmetric(12.0)?), 240),
        ("hermite6", hermite(6)?, DEFAULT_NODES),
    ])
}

fn palm_draws(k: &KernelModel, a: f64, nodes: usize, n: usize, seed: u64, exec: Exec) -> Result<Vec<Configuration>> {
    let disc = discretize(&PalmKernel::new(k.clone(), &[a])?, nodes)?;
    Ok(draws(&disc, n, seed, exec))
}

fn radon_nikodym(opts: &AcceptanceOptions, seed: u64, m: &mut Metrics) -> Verdict {
    let (a, b, delta) = (0.2, 0.3, 0.02);
    let n = opts.scale.n(40_000);
    let mut worst = 0.0f64;
    for (ki, (kname, k, nodes)) in rn_kernels()?.iter().enumerate() {
        let at_a = palm_draws(k, a, *nodes, n, seed + 2 * ki as u64, opts.exec)?;
        let at_b = palm_draws(k, b, *nodes, n, seed + 2 * ki as u64 + 1, opts.exec)?;
        let spec = CutoffSpec::new(k.window().half_width(), delta, a)?;
        let factor = radon_nikodym_factor(a, b, &spec, &at_a)?;
        let prod: Vec<f64> = at_a.iter().map(|x| factor.product(x)).collect();
        for (oi, phi) in rn_observables().iter().enumerate() {
            let weighted: Vec<f64> = at_a.iter().zip(&prod).map(|(x, p)| p * phi.eval(x)).collect();
            let moved = ratio_estimate(&weighted, &prod);
            let direct = mean_estimate(&at_b.iter().map(|x| phi.eval(x)).collect::<Vec<_>>());
            let zz = moved.z_against(&direct);
            m.push(format!("{kname}/phi{oi}/reweighted"), moved.value);
            m.push(format!("{kname}/phi{oi}/direct"), direct.value);
            m.push(format!("{kname}/phi{oi}/z"), zz);
            worst = worst.max(zz);
        }
    }
    Ok((worst < Z_MAX, format!("max z = {worst:.2} over 6 cases, {n} Palm samples per anchor")))
}

fn ln_c_consistency(opts: &AcceptanceOptions, seed: u64, m: &mut Metrics) -> Verdict {
    let (a, eps, delta) = (0.2, 0.05, 0.005);
    let n = opts.scale.n(40_000);
    let mut worst = 0.0f64;
    for (ki, (kname, k, nodes)) in rn_kernels()?.iter().enumerate() {
        // Independent sample sets, so the two standard errors combine.
        let fd_set = palm_draws(k, a, *nodes, n, seed + 2 * ki as u64, opts.exec)?;
        let slope_set = palm_draws(k, a, *nodes, n, seed + 2 * ki as u64 + 1, opts.exec)?;
        let spec = CutoffSpec::new(k.window().half_width(), delta, a)?;
        let z_eps = radon_nikodym_factor(a, a + eps, &spec, &fd_set)?.normalizer;
        let fd = Estimate {
            value: -z_eps.value.ln() / eps,
            stderr: z_eps.stderr / (z_eps.value * eps),
            n: z_eps.n,
        };
        let slope = dlnc_derivative(&spec.with_b(a + 0.5 * eps)?, &slope_set)?;
        let zz = fd.z_against(&slope);
        m.push(format!("{kname}/finite-difference"), fd.value);
        m.push(format!("{kname}/derivative"), slope.value);
        m.push(format!("{kname}/z"), zz);
        worst = worst.max(zz);
    }
    Ok((worst < Z_MAX, format!("max z = {worst:.2} at eps = {eps}, {n} Palm samples per estimator")))
}

fn dynamics_invariance(opts: &AcceptanceOptions, seed: u64, m: &mut Metrics) -> Verdict {
    let k = hermite(8)?;
    let edges = uniform_edges(-4.5, 4.5, 12);
    let n = opts.scale.n(500);
    let mut run = |confinement: f64| -> Result<f64> {
        let cfg = DiffusionConfig::new(1e-4, 0.5, DriftMode::ClosedFormHermite { confinement })?;
        let out = run_diffusion(&k, &cfg, n, &edges, seed, opts.exec)?;
        m.push(format!("c{confinement}/max-z"), out.report.max_abs_z);
        m.push(format!("c{confinement}/ks-positions"), out.report.ks_positions);
        m.push(format!("c{confinement}/failure-rate"), out.report.failure_rate);
        Ok(out.report.max_abs_z)
    };
    let invariant = run(1.0)?;
    let control = run(2.0)?;
    Ok((
        invariant < Z_MAX && control > Z_MAX,
        format!("max |z| = {invariant:.2} (need < 3); doubled confinement max |z| = {control:.2} (need > 3)"),
    ))
}
