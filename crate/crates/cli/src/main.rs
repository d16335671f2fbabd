//! `dpplog`: experiment harness for the dpp-logderiv library.
//!
//! Exit codes: 0 success, 1 precondition error, 2 acceptance failure,
//! 64 usage error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpp_logderiv::logderiv::{Bump, Observable, RegularizationSchedule};
use dpp_logderiv::{KernelSpec, Window};

use crate::config::{DriftChoice, ExperimentConfig};

pub const EXIT_PRECONDITION: u8 = 1;
pub const EXIT_ACCEPTANCE: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "dpplog", version, about = "Log-derivatives of determinantal point processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each overrides the `--config` value.
#[derive(Args, Default)]
struct Common {
    /// JSON file with an ExperimentConfig; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// sine, bessel:<s> or hermite:<N>.
    #[arg(long)]
    kernel: Option<KernelSpec>,
    /// Window as lo:hi.
    #[arg(long, value_parser = parse_window)]
    window: Option<Window>,
    /// Quadrature nodes of the discretized kernel.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Primary output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Secondary JSON summary file; stderr when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check symmetry, projection and smoothness of a kernel on a grid.
    CheckKernel {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Draw configurations (JSONL), optionally from a Palm process.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Palm anchors, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        palm_at: Option<Vec<f64>>,
    },
    /// Empirical against exact intensity per bin (CSV).
    Intensity {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        palm_at: Option<Vec<f64>>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// The log-derivative along a regularization schedule (CSV + JSON summary).
    Logderiv {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        /// R1:d1,R2:d2,...
        #[arg(long)]
        schedule: Option<RegularizationSchedule>,
        /// Evaluate on this configuration instead of Palm samples.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        points: Option<Vec<f64>>,
    },
    /// The integration-by-parts identity on Campbell samples (JSON).
    IbpTest {
        #[command(flatten)]
        common: Common,
        /// Bump test function as center:radius.
        #[arg(long, value_parser = parse_bump, allow_hyphen_values = true)]
        chi: Option<Bump>,
        /// ones, exp-count:<lo>:<hi> or exp-smooth:<center>:<width>.
        #[arg(long, value_parser = parse_observable, allow_hyphen_values = true)]
        observable: Option<Observable>,
        #[arg(long)]
        schedule: Option<RegularizationSchedule>,
    },
    /// Radon-Nikodym factors between nearby Palm measures (CSV + JSON summary).
    RnCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        /// Anchor shifts, decreasing in absolute value.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        eps: Option<Vec<f64>>,
        #[arg(long)]
        delta: Option<f64>,
        /// Outer cutoff; the window half-width when absent.
        #[arg(long = "R")]
        cutoff_r: Option<f64>,
    },
    /// Dyson dynamics started from the process (JSONL snapshots + JSON report).
    Diffuse {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "T")]
        t_end: Option<f64>,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long, value_enum)]
        drift: Option<DriftArg>,
        #[arg(long)]
        confinement: Option<f64>,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        schedule: Option<RegularizationSchedule>,
    },
    /// Run the acceptance suite (JSON); exit 2 if any criterion fails.
    Acceptance {
        #[command(flatten)]
        common: Common,
        /// Reduced sample counts, same tolerances.
        #[arg(long)]
        quick: bool,
        /// Criterion ids, comma separated.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<u8>>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum DriftArg {
    Closed,
    Estimated,
}

fn parse_window(s: &str) -> Result<Window, String> {
    let (lo, hi) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo = lo.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let hi = hi.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Window::new(lo, hi).map_err(|e| e.to_string())
}

fn parse_bump(s: &str) -> Result<Bump, String> {
    let (c, r) = s.split_once(':').ok_or("expected center:radius")?;
    Ok(Bump {
        center: c.trim().parse().map_err(|e: std::num::ParseFloatError| e.to_string())?,
        radius: r.trim().parse().map_err(|e: std::num::ParseFloatError| e.to_string())?,
    })
}

fn parse_observable(s: &str) -> Result<Observable, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| e.to_string());
    match parts.as_slice() {
        ["ones"] => Ok(Observable::Ones),
        ["exp-count", lo, hi] => Ok(Observable::ExpCount { lo: num(lo)?, hi: num(hi)? }),
        ["exp-smooth", c, w] => Ok(Observable::ExpSmooth {
            center: num(c)?,
            width: num(w)?,
        }),
        _ => Err("expected ones, exp-count:<lo>:<hi> or exp-smooth:<center>:<width>".into()),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Starts from the config file (or defaults) and applies the flags.
fn resolve(command: Command) -> Result<(&'static str, ExperimentConfig), commands::Failure> {
    let common = match &command {
        Command::CheckKernel { common, .. }
        | Command::Sample { common, .. }
        | Command::Intensity { common, .. }
        | Command::Logderiv { common, .. }
        | Command::IbpTest { common, .. }
        | Command::RnCheck { common, .. }
        | Command::Diffuse { common, .. }
        | Command::Acceptance { common, .. } => common,
    };
    let mut c = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| commands::Failure::Precondition(format!("reading {}: {e}", p.display())))?;
            ExperimentConfig::from_json(&text)
                .map_err(|e| commands::Failure::Usage(format!("config {}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    set(&mut c.seed, common.seed);
    set(&mut c.workers, common.workers);
    set(&mut c.kernel, common.kernel);
    if common.window.is_some() {
        c.window = common.window;
    }
    set(&mut c.n_nodes, common.nodes);
    set(&mut c.samples, common.samples);
    if common.output.is_some() {
        c.output = common.output.clone();
    }
    if common.summary.is_some() {
        c.summary = common.summary.clone();
    }
    let name = match command {
        Command::CheckKernel { grid, tol, .. } => {
            set(&mut c.grid, grid);
            set(&mut c.tol, tol);
            "check-kernel"
        }
        Command::Sample { palm_at, .. } => {
            set(&mut c.palm_at, palm_at);
            "sample"
        }
        Command::Intensity { palm_at, bins, .. } => {
            set(&mut c.palm_at, palm_at);
            set(&mut c.bins, bins);
            "intensity"
        }
        Command::Logderiv { a, schedule, points, .. } => {
            set(&mut c.a, a);
            if schedule.is_some() {
                c.schedule = schedule;
            }
            if points.is_some() {
                c.points = points;
            }
            "logderiv"
        }
        Command::IbpTest {
            chi,
            observable,
            schedule,
            ..
        } => {
            set(&mut c.chi, chi);
            set(&mut c.observable, observable);
            if schedule.is_some() {
                c.schedule = schedule;
            }
            "ibp-test"
        }
        Command::RnCheck {
            a, eps, delta, cutoff_r, ..
        } => {
            set(&mut c.a, a);
            set(&mut c.eps, eps);
            set(&mut c.delta, delta);
            if cutoff_r.is_some() {
                c.cutoff_r = cutoff_r;
            }
            "rn-check"
        }
        Command::Diffuse {
            dt,
            t_end,
            trajectories,
            drift,
            confinement,
            bins,
            schedule,
            ..
        } => {
            set(&mut c.dt, dt);
            set(&mut c.t_end, t_end);
            set(&mut c.trajectories, trajectories);
            set(
                &mut c.drift,
                drift.map(|d| match d {
                    DriftArg::Closed => DriftChoice::Closed,
                    DriftArg::Estimated => DriftChoice::Estimated,
                }),
            );
            set(&mut c.confinement, confinement);
            set(&mut c.bins, bins);
            if schedule.is_some() {
                c.schedule = schedule;
            }
            "diffuse"
        }
        Command::Acceptance { quick, only, .. } => {
            c.quick |= quick;
            set(&mut c.only, only);
            "acceptance"
        }
    };
    Ok((name, c))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = resolve(cli.command).and_then(|(name, cfg)| commands::run(name, cfg));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("dpplog: {f}");
            ExitCode::from(f.code())
        }
    }
}
