//! Monte Carlo estimates and mergeable running moments.

use serde::{Deserialize, Serialize};

/// A value with its standard error; `n == 0` marks a deterministic
/// (quadrature) result, whose standard error is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            n: 0,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.n == 0
    }

    /// `|self - other|` in units of the combined standard error of two
    /// independent estimates. Returns 0 when both agree exactly.
    pub fn z_against(&self, other: &Estimate) -> f64 {
        let se = self.stderr.hypot(other.stderr);
        let d = (self.value - other.value).abs();
        if d == 0.0 {
            0.0
        } else {
            d / se
        }
    }

    pub fn relative_stderr(&self) -> f64 {
        self.stderr / self.value.abs()
    }
}

/// Welford accumulator of `(n, mean, M2)`; merges associatively.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        RunningStats {
            n,
            mean: self.mean + d * nb / n as f64,
            m2: self.m2 + other.m2 + d * d * na * nb / n as f64,
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.mean,
            stderr: (self.variance() / self.n.max(1) as f64).sqrt(),
            n: self.n,
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::new();
        for x in iter {
            s.push(x);
        }
        s
    }
}

pub fn mean_estimate(values: &[f64]) -> Estimate {
    values.iter().copied().collect::<RunningStats>().estimate()
}

/// Sample variance with the large-sample standard error
/// `sqrt((m4 - s⁴) / n)`.
pub fn variance_estimate(values: &[f64]) -> Estimate {
    let n = values.len();
    if n < 2 {
        return Estimate {
            value: 0.0,
            stderr: f64::INFINITY,
            n: n as u64,
        };
    }
    let stats: RunningStats = values.iter().copied().collect();
    let mean = stats.mean();
    let var = stats.variance();
    let m4 = values.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64;
    Estimate {
        value: var,
        stderr: ((m4 - var * var).max(0.0) / n as f64).sqrt(),
        n: n as u64,
    }
}

/// Ratio of means `Σu / Σv` with a delta-method standard error.
pub fn ratio_estimate(u: &[f64], v: &[f64]) -> Estimate {
    assert_eq!(u.len(), v.len());
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let r = mu / mv;
    let infl: Vec<f64> = u.iter().zip(v).map(|(a, b)| (a - r * b) / mv).collect();
    let se = mean_estimate(&infl).stderr;
    Estimate {
        value: r,
        stderr: se,
        n: u.len() as u64,
    }
}
