//! Finite-N interacting diffusion `dξᵢ = dBᵢ + ½ d_P(ξᵢ, {ξⱼ}_{j≠i}) dt`
//! and diagnostics of its stationarity.
//!
//! For the Hermite ensemble the drift is `½(−2ξᵢ + Σ 2/(ξᵢ − ξⱼ))`
//! (Dyson Brownian motion), which keeps the ensemble invariant.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimate::{mean_estimate, Estimate};
use crate::exec::{run_batched, Exec};
use crate::functionals::Quadrature;
use crate::kernels::KernelModel;
use crate::logderiv::{LogDerivative, RegularizationSchedule};
use crate::sampler::{count_in, discretize, sample_dpp, Configuration, Histogram, DEFAULT_NODES};

pub const DEFAULT_COLLISION_FLOOR: f64 = 1e-5;
pub const MAX_HALVINGS: u32 = 10;
/// Collision failure rate above which a run is rejected.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionState {
    positions: Vec<f64>,
    pub time: f64,
}

impl DiffusionState {
    pub fn new(mut positions: Vec<f64>, time: f64) -> Result<Self> {
        if positions.iter().any(|p| !p.is_finite()) || !(time >= 0.0) {
            return Err(invalid("diffusion state needs finite positions and time >= 0"));
        }
        positions.sort_by(f64::total_cmp);
        if positions.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("diffusion particles must be pairwise distinct"));
        }
        Ok(Self { positions, time })
    }

    pub fn from_configuration(x: &Configuration) -> Self {
        Self {
            positions: x.points().to_vec(),
            time: 0.0,
        }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn to_configuration(&self) -> Configuration {
        Configuration::new(self.positions.clone()).expect("state invariants")
    }

    pub fn min_gap(&self) -> f64 {
        min_gap(&self.positions)
    }
}

fn min_gap(p: &[f64]) -> f64 {
    p.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DriftMode {
    /// `½(−2c ξᵢ + Σ 2/(ξᵢ − ξⱼ))`; `c = 1` is the Hermite drift.
    ClosedFormHermite {
        #[serde(default = "unit")]
        confinement: f64,
    },
    /// `½ d_P` evaluated through the regularized log-derivative.
    EstimatedLogderiv { schedule: RegularizationSchedule },
}

fn unit() -> f64 {
    1.0
}

impl DriftMode {
    pub fn hermite() -> Self {
        DriftMode::ClosedFormHermite { confinement: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub dt: f64,
    pub t_end: f64,
    pub drift: DriftMode,
    pub collision_floor: f64,
    /// Drop the Brownian term (diagnostic).
    #[serde(default)]
    pub zero_noise: bool,
}

impl DiffusionConfig {
    pub fn new(dt: f64, t_end: f64, drift: DriftMode) -> Result<Self> {
        let c = Self {
            dt,
            t_end,
            drift,
            collision_floor: DEFAULT_COLLISION_FLOOR,
            zero_noise: false,
        };
        c.steps()?;
        Ok(c)
    }

    /// Number of steps `T / dt`, which must be an integer.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.t_end >= 0.0 && self.collision_floor > 0.0) {
            return Err(invalid("diffusion needs dt > 0, T >= 0 and a positive collision floor"));
        }
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
            return Err(invalid(format!("T = {} is not a multiple of dt = {}", self.t_end, self.dt)));
        }
        Ok(n as usize)
    }
}

/// The drift on particle `i`.
pub fn drift(i: usize, state: &DiffusionState, k: &KernelModel, mode: &DriftMode, floor: f64) -> Result<f64> {
    let g = state.min_gap();
    if g < floor {
        return Err(Error::Collision {
            gap: g,
            floor,
            halvings: 0,
        });
    }
    match mode {
        DriftMode::ClosedFormHermite { confinement } => Ok(closed_form(i, &state.positions, *confinement)),
        DriftMode::EstimatedLogderiv { schedule } => {
            let a = state.positions[i];
            let others = Configuration::new(
                state
                    .positions
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &p)| p)
                    .collect(),
            )?;
            let ld = LogDerivative::new(k, a, schedule, &Quadrature::default().unchecked())?;
            Ok(0.5 * ld.finest(&others))
        }
    }
}

fn closed_form(i: usize, p: &[f64], c: f64) -> f64 {
    let x = p[i];
    let mut s = -2.0 * c * x;
    for (j, &y) in p.iter().enumerate() {
        if j != i {
            s += 2.0 / (x - y);
        }
    }
    0.5 * s
}

fn drifts(p: &[f64], k: &KernelModel, mode: &DriftMode) -> Result<Vec<f64>> {
    match mode {
        DriftMode::ClosedFormHermite { confinement } => Ok((0..p.len()).map(|i| closed_form(i, p, *confinement)).collect()),
        DriftMode::EstimatedLogderiv { .. } => {
            let s = DiffusionState {
                positions: p.to_vec(),
                time: 0.0,
            };
            (0..p.len()).map(|i| drift(i, &s, k, mode, 0.0)).collect()
        }
    }
}

/// Euler–Maruyama over `dt` with increment `dw`. A step that reorders
/// particles or brings two closer than the floor is split in two halves,
/// the increment being divided by a Brownian bridge.
fn advance<R: Rng + ?Sized>(
    p: &[f64],
    dt: f64,
    dw: &[f64],
    depth: u32,
    k: &KernelModel,
    cfg: &DiffusionConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let b = drifts(p, k, &cfg.drift)?;
    let next: Vec<f64> = p.iter().zip(&b).zip(dw).map(|((x, d), w)| x + d * dt + w).collect();
    let gap = min_gap(&next);
    if gap >= cfg.collision_floor && next.iter().all(|x| x.is_finite()) {
        return Ok(next);
    }
    if depth >= MAX_HALVINGS {
        return Err(Error::Collision {
            gap,
            floor: cfg.collision_floor,
            halvings: depth,
        });
    }
    let sd = if cfg.zero_noise { 0.0 } else { (dt / 4.0).sqrt() };
    let w1: Vec<f64> = dw
        .iter()
        .map(|w| 0.5 * w + sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let w2: Vec<f64> = dw.iter().zip(&w1).map(|(w, a)| w - a).collect();
    let mid = advance(p, 0.5 * dt, &w1, depth + 1, k, cfg, rng)?;
    advance(&mid, 0.5 * dt, &w2, depth + 1, k, cfg, rng)
}

/// One Euler–Maruyama step of length `cfg.dt`.
pub fn step<R: Rng + ?Sized>(
    state: &DiffusionState,
    k: &KernelModel,
    cfg: &DiffusionConfig,
    rng: &mut R,
) -> Result<DiffusionState> {
    let sd = if cfg.zero_noise { 0.0 } else { cfg.dt.sqrt() };
    let dw: Vec<f64> = (0..state.positions.len())
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut next = advance(&state.positions, cfg.dt, &dw, 0, k, cfg, rng)?;
    next.sort_by(f64::total_cmp);
    Ok(DiffusionState {
        positions: next,
        time: state.time + cfg.dt,
    })
}

/// Runs `cfg.steps()` steps from `state`.
pub fn evolve<R: Rng + ?Sized>(
    state: &DiffusionState,
    k: &KernelModel,
    cfg: &DiffusionConfig,
    rng: &mut R,
) -> Result<DiffusionState> {
    let mut s = state.clone();
    for _ in 0..cfg.steps()? {
        s = step(&s, k, cfg, rng)?;
    }
    Ok(s)
}

/// Time-T against time-0 ensemble statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub edges: Vec<f64>,
    pub initial_density: Histogram,
    pub final_density: Histogram,
    /// Per-bin mean of `count_T − count_0` over trajectories.
    pub count_change: Vec<Estimate>,
    /// `count_change / stderr`; zero where the change is identically zero.
    pub z_scores: Vec<f64>,
    pub max_abs_z: f64,
    /// Two-sample Kolmogorov–Smirnov distance of pooled positions.
    pub ks_positions: f64,
    /// Two-sample Kolmogorov–Smirnov distance of nearest-neighbour gaps.
    pub ks_gaps: f64,
    pub gap_edges: Vec<f64>,
    pub initial_gaps: Vec<f64>,
    pub final_gaps: Vec<f64>,
    pub trajectories: usize,
    pub collision_failures: usize,
    pub failure_rate: f64,
}

#[derive(Debug, Clone)]
pub struct DiffusionOutcome {
    pub report: StationarityReport,
    pub initial: Vec<Configuration>,
    /// Terminal states of the trajectories that finished.
    pub terminal: Vec<Configuration>,
}

/// Samples `n_trajectories` initial states from the process of `k`,
/// evolves each to `cfg.t_end` on its own stream and compares the
/// ensembles. Trajectories that exhaust their halvings are dropped and
/// counted; more than 1% of them is an error.
pub fn run_diffusion(
    k: &KernelModel,
    cfg: &DiffusionConfig,
    n_trajectories: usize,
    edges: &[f64],
    seed: u64,
    exec: Exec,
) -> Result<DiffusionOutcome> {
    cfg.steps()?;
    if n_trajectories == 0 {
        return Err(invalid("need at least one trajectory"));
    }
    let disc = discretize(k, DEFAULT_NODES)?;
    let runs = run_batched(exec, seed, n_trajectories, 1, |rng, _| {
        let x0 = sample_dpp(&disc, rng);
        let s0 = DiffusionState::from_configuration(&x0);
        let end = evolve(&s0, k, cfg, rng).map(|s| s.to_configuration());
        (x0, end)
    });
    let mut initial = Vec::with_capacity(runs.len());
    let mut terminal = Vec::with_capacity(runs.len());
    let mut failures = 0;
    for (x0, end) in runs {
        match end {
            Ok(x) => {
                initial.push(x0);
                terminal.push(x);
            }
            Err(e @ Error::Collision { .. }) => {
                log::debug!("trajectory dropped: {e}");
                failures += 1;
            }
            Err(e) => return Err(e),
        }
    }
    let rate = failures as f64 / n_trajectories as f64;
    if rate > MAX_FAILURE_RATE {
        return Err(Error::Collision {
            gap: f64::NAN,
            floor: cfg.collision_floor,
            halvings: MAX_HALVINGS,
        });
    }
    let report = compare(&initial, &terminal, edges, failures, n_trajectories)?;
    Ok(DiffusionOutcome {
        report,
        initial,
        terminal,
    })
}

fn compare(
    initial: &[Configuration],
    terminal: &[Configuration],
    edges: &[f64],
    failures: usize,
    n: usize,
) -> Result<StationarityReport> {
    let initial_density = crate::sampler::empirical_intensity(initial, edges)?;
    let final_density = crate::sampler::empirical_intensity(terminal, edges)?;
    let count_change: Vec<Estimate> = edges
        .windows(2)
        .map(|w| {
            let d: Vec<f64> = initial
                .iter()
                .zip(terminal)
                .map(|(a, b)| count_in(b, w[0], w[1]) as f64 - count_in(a, w[0], w[1]) as f64)
                .collect();
            mean_estimate(&d)
        })
        .collect();
    let z_scores: Vec<f64> = count_change
        .iter()
        .map(|e| if e.value == 0.0 { 0.0 } else { e.value / e.stderr })
        .collect();
    let max_abs_z = z_scores.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let pool = |s: &[Configuration]| -> Vec<f64> { s.iter().flat_map(|x| x.iter()).collect() };
    let gaps = |s: &[Configuration]| -> Vec<f64> { s.iter().flat_map(nearest_gaps).collect() };
    let (g0, g1) = (gaps(initial), gaps(terminal));
    let gmax = g0.iter().chain(&g1).fold(0.0f64, |m, g| m.max(*g));
    let gap_edges = crate::sampler::uniform_edges(0.0, gmax.max(1e-12) * (1.0 + 1e-9), 20);
    Ok(StationarityReport {
        edges: edges.to_vec(),
        initial_density,
        final_density,
        count_change,
        z_scores,
        max_abs_z,
        ks_positions: ks_distance(&pool(initial), &pool(terminal)),
        ks_gaps: ks_distance(&g0, &g1),
        initial_gaps: histogram_fraction(&g0, &gap_edges),
        final_gaps: histogram_fraction(&g1, &gap_edges),
        gap_edges,
        trajectories: n,
        collision_failures: failures,
        failure_rate: failures as f64 / n as f64,
    })
}

/// Distance from every point to its nearest neighbour.
fn nearest_gaps(x: &Configuration) -> Vec<f64> {
    let p = x.points();
    (0..p.len())
        .filter_map(|i| {
            let l = if i > 0 { p[i] - p[i - 1] } else { f64::INFINITY };
            let r = if i + 1 < p.len() { p[i + 1] - p[i] } else { f64::INFINITY };
            let g = l.min(r);
            g.is_finite().then_some(g)
        })
        .collect()
}

fn histogram_fraction(v: &[f64], edges: &[f64]) -> Vec<f64> {
    let n = v.len().max(1) as f64;
    edges
        .windows(2)
        .map(|w| v.iter().filter(|&&x| x >= w[0] && x < w[1]).count() as f64 / n)
        .collect()
}

/// `sup |F₁ − F₂|` of the two empirical distribution functions.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
