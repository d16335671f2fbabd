//! Subcommand pipelines over a resolved [`ExperimentConfig`].

use std::fmt;
use std::io::{self, Write};

use dpp_logderiv::acceptance::{run_criterion, AcceptanceOptions, CriterionResult, Scale, CRITERIA};
use dpp_logderiv::dynamics::{run_diffusion, DiffusionConfig, DriftMode};
use dpp_logderiv::estimate::mean_estimate;
use dpp_logderiv::exec::{run_batched, DEFAULT_BATCH};
use dpp_logderiv::functionals::{CutoffSpec, Quadrature};
use dpp_logderiv::kernels::check_assumption2;
use dpp_logderiv::logderiv::{dlnc_derivative, ibp_test, radon_nikodym_factor, rn_difference_quotient_check, LogDerivative};
use dpp_logderiv::sampler::{default_layout, discretize, empirical_intensity, sample_dpp, uniform_edges};
use dpp_logderiv::{Configuration, Estimate, Exec, Kernel, KernelModel, PalmKernel, Window};
use serde::Serialize;

use crate::config::{DriftChoice, ExperimentConfig};
use crate::output::{sink, write_csv, write_json, write_jsonl, Meta, Row};
use crate::{EXIT_ACCEPTANCE, EXIT_PRECONDITION, EXIT_USAGE};

#[derive(Debug)]
pub enum Failure {
    Precondition(String),
    Usage(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Precondition(_) => EXIT_PRECONDITION,
            Failure::Usage(_) => EXIT_USAGE,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Precondition(m) | Failure::Usage(m) => f.write_str(m),
        }
    }
}

impl From<dpp_logderiv::Error> for Failure {
    fn from(e: dpp_logderiv::Error) -> Self {
        Failure::Precondition(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Precondition(format!("output: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Precondition(format!("output: {e}"))
    }
}

type Outcome = Result<u8, Failure>;

pub fn run(name: &str, cfg: ExperimentConfig) -> Outcome {
    let cfg = cfg.resolve()?;
    let exec = configure_workers(cfg.workers)?;
    let meta = Meta::new(name, &cfg);
    match name {
        "check-kernel" => check_kernel(&cfg, &meta),
        "sample" => sample(&cfg, &meta, exec),
        "intensity" => intensity(&cfg, &meta, exec),
        "logderiv" => logderiv(&cfg, &meta, exec),
        "ibp-test" => ibp(&cfg, &meta, exec),
        "rn-check" => rn_check(&cfg, &meta, exec),
        "diffuse" => diffuse(&cfg, &meta, exec),
        "acceptance" => acceptance(&cfg, &meta, exec),
        other => Err(Failure::Usage(format!("unknown subcommand {other}"))),
    }
}

#[cfg(feature = "parallel")]
fn configure_workers(workers: usize) -> Result<Exec, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| Failure::Precondition(format!("worker pool: {e}")))?;
    Ok(Exec::Parallel)
}

#[cfg(not(feature = "parallel"))]
fn configure_workers(_workers: usize) -> Result<Exec, Failure> {
    Ok(Exec::Sequential)
}

fn kernel(cfg: &ExperimentConfig) -> Result<KernelModel, Failure> {
    Ok(cfg.kernel.build(cfg.window)?)
}

/// Writes the secondary JSON document to `--summary`, or stderr.
fn summary<T: Serialize>(cfg: &ExperimentConfig, meta: &Meta, result: &T) -> Result<(), Failure> {
    match &cfg.summary {
        Some(p) => write_json(&mut *sink(Some(p))?, meta, result)?,
        None => write_json(&mut io::stderr().lock(), meta, result)?,
    }
    Ok(())
}

fn draws(cfg: &ExperimentConfig, k: &KernelModel, anchors: &[f64], exec: Exec) -> Result<Vec<Configuration>, Failure> {
    let disc = if anchors.is_empty() {
        discretize(k, cfg.n_nodes)?
    } else {
        discretize(&PalmKernel::new(k.clone(), anchors)?, cfg.n_nodes)?
    };
    Ok(run_batched(exec, cfg.seed, cfg.samples, DEFAULT_BATCH, |rng, _| sample_dpp(&disc, rng)))
}

fn check_kernel(cfg: &ExperimentConfig, meta: &Meta) -> Outcome {
    let report = check_assumption2(&kernel(cfg)?, cfg.grid, cfg.tol)?;
    write_json(&mut *sink(cfg.output.as_deref())?, meta, &report)?;
    if report.passed() {
        Ok(0)
    } else {
        Err(Failure::Precondition("kernel fails the projection/smoothness check".into()))
    }
}

fn sample(cfg: &ExperimentConfig, meta: &Meta, exec: Exec) -> Outcome {
    #[derive(Serialize)]
    struct Record<'a> {
        index: usize,
        points: &'a [f64],
    }
    let k = kernel(cfg)?;
    let samples = draws(cfg, &k, &cfg.palm_at, exec)?;
    let records = samples.iter().enumerate().map(|(index, x)| Record {
        index,
        points: x.points(),
    });
    write_jsonl(&mut *sink(cfg.output.as_deref())?, meta, records)?;
    Ok(0)
}

fn intensity(cfg: &ExperimentConfig, meta: &Meta, exec: Exec) -> Outcome {
    let k = kernel(cfg)?;
    let samples = draws(cfg, &k, &cfg.palm_at, exec)?;
    let w = k.window();
    let edges = uniform_edges(w.lo, w.hi, cfg.bins.max(1));
    let hist = empirical_intensity(&samples, &edges)?;
    let pk = PalmKernel::new(k.clone(), &cfg.palm_at)?;
    let q = Quadrature::default();
    let mut rows = Vec::new();
    for (i, bin) in edges.windows(2).enumerate() {
        let (lo, hi) = (bin[0], bin[1]);
        let mass = q.integrate(Window::new(lo, hi)?, [], |x| pk.raw_diag(x))?;
        rows.push(Row::new(format!("empirical:{lo}:{hi}"), hist.density[i]));
        rows.push(Row::new(format!("exact:{lo}:{hi}"), Estimate::exact(mass / (hi - lo))));
    }
    write_csv(&mut *sink(cfg.output.as_deref())?, meta, &rows)?;
    Ok(0)
}

fn logderiv(cfg: &ExperimentConfig, meta: &Meta, exec: Exec) -> Outcome {
    #[derive(Serialize)]
    struct Summary {
        extrapolated: Estimate,
        cauchy_gap: Estimate,
        converged: bool,
        converged_fraction: f64,
    }
    let k = kernel(cfg)?;
    let schedule = cfg.resolved_schedule()?;
    let ld = LogDerivative::new(&k, cfg.a, &schedule, &Quadrature::default())?;
    let configs = match &cfg.points {
        Some(p) => vec![Configuration::new(p.clone())?.within(k.window())?],
        None => draws(cfg, &k, &[cfg.a], exec)?,
    };
    let evals: Vec<_> = configs.iter().map(|x| ld.eval(x)).collect();
    let column = |f: &dyn Fn(&dpp_logderiv::logderiv::LogDerivEstimate) -> f64| -> Estimate {
        let v: Vec<f64> = evals.iter().map(f).collect();
        if v.len() == 1 {
            Estimate { n: 1, ..Estimate::exact(v[0]) }
        } else {
            mean_estimate(&v)
        }
    };
    let rows: Vec<Row> = schedule
        .pairs()
        .iter()
        .enumerate()
        .map(|(i, (r, d))| Row::new(format!("pair:{r}:{d}"), column(&|e| e.per_pair[i].value)))
        .collect();
    write_csv(&mut *sink(cfg.output.as_deref())?, meta, &rows)?;
    let gap = column(&|e| e.cauchy_gap);
    let s = Summary {
        extrapolated: column(&|e| e.extrapolated),
        cauchy_gap: gap,
        converged: gap.value < ld.conv_tol,
        converged_fraction: evals.iter().filter(|e| e.converged).count() as f64 / evals.len() as f64,
    };
    summary(cfg, meta, &s)?;
    Ok(0)
}

fn ibp(cfg: &ExperimentConfig, meta: &Meta, exec: Exec) -> Outcome {
    let k = kernel(cfg)?;
    let r = ibp_test(
        &k,
        cfg.chi,
        cfg.observable,
        &cfg.resolved_schedule()?,
        &Quadrature::default(),
        default_layout(&k, cfg.n_nodes),
        cfg.samples,
        cfg.seed,
        exec,
    )?;
    write_json(&mut *sink(cfg.output.as_deref())?, meta, &r)?;
    Ok(0)
}

fn rn_check(cfg: &ExperimentConfig, meta: &Meta, exec: Exec) -> Outcome {
    #[derive(Serialize)]
    struct Summary {
        gaps: Vec<(f64, f64)>,
        decreasing: bool,
    }
    let k = kernel(cfg)?;
    let r = cfg.cutoff_r.unwrap_or_else(|| k.window().half_width());
    let spec = CutoffSpec::new(r, cfg.delta, cfg.a)?;
    let samples = draws(cfg, &k, &[cfg.a], exec)?;
    let gaps = rn_difference_quotient_check(&k, &cfg.eps, &spec, &Quadrature::default(), &samples)?;
    let mut rows = Vec::new();
    for &(e, gap) in &gaps {
        let b = cfg.a + e;
        let factor = radon_nikodym_factor(cfg.a, b, &spec, &samples)?;
        rows.push(Row::new(format!("normalizer:{e}"), factor.normalizer));
        rows.push(Row::new(
            format!("dlnc:{e}"),
            dlnc_derivative(&spec.with_b(b)?, &samples)?,
        ));
        rows.push(Row::new(
            format!("gap:{e}"),
            Estimate {
                value: gap,
                stderr: f64::NAN,
                n: samples.len() as u64,
            },
        ));
    }
    write_csv(&mut *sink(cfg.output.as_deref())?, meta, &rows)?;
    let decreasing = gaps.windows(2).all(|w| w[1].1 < w[0].1);
    summary(cfg, meta, &Summary { gaps, decreasing })?;
    Ok(0)
}

fn diffuse(cfg: &ExperimentConfig, meta: &Meta, exec: Exec) -> Outcome {
    #[derive(Serialize)]
    struct Snapshot<'a> {
        index: usize,
        time: f64,
        points: &'a [f64],
    }
    let k = kernel(cfg)?;
    let drift = match cfg.drift {
        DriftChoice::Closed => DriftMode::ClosedFormHermite {
            confinement: cfg.confinement,
        },
        DriftChoice::Estimated => DriftMode::EstimatedLogderiv {
            schedule: cfg.resolved_schedule()?,
        },
    };
    let dc = DiffusionConfig::new(cfg.dt, cfg.t_end, drift)?;
    let w = k.window();
    let edges = uniform_edges(w.lo, w.hi, cfg.bins.max(1));
    let out = run_diffusion(&k, &dc, cfg.trajectories, &edges, cfg.seed, exec)?;
    let snaps = out
        .initial
        .iter()
        .map(|x| (0.0, x))
        .chain(out.terminal.iter().map(|x| (cfg.t_end, x)))
        .enumerate()
        .map(|(index, (time, x))| Snapshot {
            index,
            time,
            points: x.points(),
        });
    write_jsonl(&mut *sink(cfg.output.as_deref())?, meta, snaps)?;
    summary(cfg, meta, &out.report)?;
    Ok(0)
}

fn acceptance(cfg: &ExperimentConfig, meta: &Meta, exec: Exec) -> Outcome {
    let opts = AcceptanceOptions {
        scale: if cfg.quick { Scale::Quick } else { Scale::Full },
        seed: cfg.seed,
        exec,
    };
    let ids: Vec<u8> = CRITERIA
        .iter()
        .map(|c| c.0)
        .filter(|id| cfg.only.is_empty() || cfg.only.contains(id))
        .collect();
    if let Some(bad) = cfg.only.iter().find(|id| !CRITERIA.iter().any(|c| c.0 == **id)) {
        return Err(Failure::Usage(format!("no acceptance criterion {bad}")));
    }
    let mut results: Vec<CriterionResult> = Vec::new();
    let mut err = io::stderr().lock();
    for id in ids {
        let r = run_criterion(id, &opts)?;
        let tag = if r.passed { "PASS" } else { "FAIL" };
        writeln!(err, "[{tag}] {} {}: {} ({:.1}s)", r.id, r.name, r.summary, r.seconds)?;
        results.push(r);
    }
    write_json(&mut *sink(cfg.output.as_deref())?, meta, &results)?;
    Ok(if results.iter().all(|r| r.passed) { 0 } else { EXIT_ACCEPTANCE })
}
