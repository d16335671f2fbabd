//! The resolved experiment configuration: defaults, then `--config`, then flags.

use std::path::PathBuf;

use dpp_logderiv::acceptance::DEFAULT_SEED;
use dpp_logderiv::logderiv::{Bump, Observable, RegularizationSchedule};
use dpp_logderiv::sampler::DEFAULT_NODES;
use dpp_logderiv::{KernelSpec, Window};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftChoice {
    Closed,
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(with = "kernel_string")]
    pub kernel: KernelSpec,
    /// Defaults to the kernel's own window.
    pub window: Option<Window>,
    pub n_nodes: usize,
    /// Defaults to `(W/2, 0.2), (3W/4, 0.1), (W, 0.05)` for half-width `W`.
    pub schedule: Option<RegularizationSchedule>,
    pub samples: usize,
    pub seed: u64,
    /// Worker threads; 0 lets rayon decide.
    pub workers: usize,
    /// Anchors for Palm sampling in `sample` and `intensity`.
    pub palm_at: Vec<f64>,
    /// Anchor of the log-derivative and the Radon-Nikodym checks.
    pub a: f64,
    /// A fixed configuration for `logderiv`; sampling is skipped when set.
    pub points: Option<Vec<f64>>,
    pub eps: Vec<f64>,
    /// Outer cutoff of `rn-check`; defaults to the window half-width.
    pub cutoff_r: Option<f64>,
    pub delta: f64,
    pub chi: Bump,
    pub observable: Observable,
    pub bins: usize,
    pub grid: usize,
    pub tol: f64,
    pub dt: f64,
    pub t_end: f64,
    pub trajectories: usize,
    pub drift: DriftChoice,
    pub confinement: f64,
    pub quick: bool,
    /// Acceptance criteria to run; empty means all.
    pub only: Vec<u8>,
    pub output: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::Sine,
            window: None,
            n_nodes: DEFAULT_NODES,
            schedule: None,
            samples: 1000,
            seed: DEFAULT_SEED,
            workers: 0,
            palm_at: Vec::new(),
            a: 0.0,
            points: None,
            eps: vec![0.2, 0.1, 0.05],
            cutoff_r: None,
            delta: 0.02,
            chi: Bump {
                center: 0.0,
                radius: 1.0,
            },
            observable: Observable::Ones,
            bins: 40,
            grid: 400,
            tol: 1e-6,
            dt: 1e-4,
            t_end: 0.5,
            trajectories: 500,
            drift: DriftChoice::Closed,
            confinement: 1.0,
            quick: false,
            only: Vec::new(),
            output: None,
            summary: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn resolved_window(&self) -> Window {
        self.window.unwrap_or_else(|| self.kernel.default_window())
    }

    pub fn resolved_schedule(&self) -> dpp_logderiv::Result<RegularizationSchedule> {
        match &self.schedule {
            Some(s) => Ok(s.clone()),
            None => {
                let w = self.resolved_window().half_width();
                RegularizationSchedule::new(vec![(0.5 * w, 0.2), (0.75 * w, 0.1), (w, 0.05)])
            }
        }
    }

    /// Fills the derived defaults so the metadata block records what ran.
    pub fn resolve(mut self) -> dpp_logderiv::Result<Self> {
        self.window = Some(self.resolved_window());
        self.schedule = Some(self.resolved_schedule()?);
        Ok(self)
    }
}

mod kernel_string {
    use dpp_logderiv::KernelSpec;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(k: &KernelSpec, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(k)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<KernelSpec, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn partial_config_keeps_defaults() {
        let c = ExperimentConfig::from_json(r#"{"kernel": "hermite:4", "samples": 7}"#).unwrap();
        assert_eq!(c.kernel, KernelSpec::Hermite { n: 4 });
        assert_eq!(c.samples, 7);
        assert_eq!(c.seed, DEFAULT_SEED);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"sampels": 7}"#).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig {
            kernel: KernelSpec::Bessel { s: 0.5 },
            observable: Observable::ExpCount { lo: 2.0, hi: 3.0 },
            points: Some(vec![0.1, 1.0 / 3.0]),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    proptest! {
        #[test]
        fn floats_round_trip_exactly(a in -1e6f64..1e6, delta in 1e-12f64..1.0, dt in 1e-9f64..1.0, seed: u64) {
            let c = ExperimentConfig { a, delta, dt, seed, palm_at: vec![a, -a], ..Default::default() };
            let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
