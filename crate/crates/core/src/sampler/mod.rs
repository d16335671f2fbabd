//! Exact sampling of window-restricted determinantal processes and their
//! Palm versions on a Gauss–Legendre discretization.

mod campbell;
mod discretize;
mod dpp;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimate::{mean_estimate, Estimate};
use crate::kernels::Window;

pub use campbell::{sample_campbell, AnchorDensity, CampbellSample, CampbellSampler, PalmMixtureSampler};
pub use discretize::{default_layout, discretize, discretize_layout, spectrum, DiscretizedKernel, Spectrum, DEFAULT_NODES, PANEL_ORDER};
pub use dpp::{sample_dpp, sample_palm};

/// A finite configuration: strictly increasing, finite points.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    points: Vec<f64>,
}

impl Configuration {
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(invalid("configuration points must be finite"));
        }
        points.sort_by(f64::total_cmp);
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("configuration points must be distinct"));
        }
        Ok(Self { points })
    }

    /// Checks that every point lies in `window`.
    pub fn within(self, window: Window) -> Result<Self> {
        match self.points.iter().find(|p| !window.contains(**p)) {
            Some(p) => Err(invalid(format!(
                "point {p} outside window [{}, {}]",
                window.lo, window.hi
            ))),
            None => Ok(self),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().copied()
    }

    /// The configuration with one point removed (by index).
    pub fn without(&self, index: usize) -> Configuration {
        let mut points = self.points.clone();
        points.remove(index);
        Configuration { points }
    }

    pub(crate) fn from_sorted(points: Vec<f64>) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0] < w[1]));
        Self { points }
    }
}

/// Number of points in `[lo, hi)`.
pub fn count_in(x: &Configuration, lo: f64, hi: f64) -> usize {
    debug_assert!(lo < hi);
    let p = x.points();
    p.partition_point(|&v| v < hi) - p.partition_point(|&v| v < lo)
}

/// Mean count per unit length in each bin `[edges[i], edges[i+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<Estimate>,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

pub fn empirical_intensity(samples: &[Configuration], edges: &[f64]) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(invalid("empirical intensity needs at least one sample"));
    }
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("bin edges must be strictly increasing"));
    }
    let density = edges
        .windows(2)
        .map(|w| {
            let width = w[1] - w[0];
            let counts: Vec<f64> = samples.iter().map(|s| count_in(s, w[0], w[1]) as f64).collect();
            let e = mean_estimate(&counts);
            Estimate {
                value: e.value / width,
                stderr: e.stderr / width,
                n: e.n,
            }
        })
        .collect();
    Ok(Histogram {
        edges: edges.to_vec(),
        density,
    })
}
