//! The kernel zoo: sine, Bessel, finite-N Hermite and user-supplied
//! integrable kernels, all evaluated on a finite [`Window`].

mod assumption;
pub mod bessel;
pub mod hermite;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use assumption::{check_assumption2, AssumptionReport};
use hermite::HermiteKernel;

/// Below this intensity a point is treated as carrying no particles.
pub const INTENSITY_FLOOR: f64 = 1e-12;

/// `|x - y|` below which the diagonal branch replaces the difference quotient.
pub const DIAG_SWITCH_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid(format!("window needs finite lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn symmetric(half_width: f64) -> Result<Self> {
        Self::new(-half_width, half_width)
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn check(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideWindow {
                x,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.len()
    }
}

/// A symmetric kernel restricted to a window.
///
/// `raw` and `raw_diag` skip domain checks; they are the hot path used by
/// quadratures and samplers that only ever query interior nodes.
pub trait Kernel: Send + Sync {
    fn window(&self) -> Window;

    fn raw(&self, x: f64, y: f64) -> f64;

    fn raw_diag(&self, x: f64) -> f64 {
        self.raw(x, x)
    }

    fn check_point(&self, x: f64) -> Result<()> {
        self.window().check(x)
    }

    /// Points discretizations should grade their panels towards.
    fn focus_points(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Row-major Gram matrix `Π(xs[i], xs[j])`.
    fn gram(&self, xs: &[f64]) -> Vec<f64> {
        let n = xs.len();
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            g[i * n + i] = self.raw_diag(xs[i]);
            for j in 0..i {
                let v = self.raw(xs[i], xs[j]);
                g[i * n + j] = v;
                g[j * n + i] = v;
            }
        }
        g
    }
}

/// `Π(x, y)` with domain checks.
pub fn eval_kernel<K: Kernel + ?Sized>(k: &K, x: f64, y: f64) -> Result<f64> {
    k.check_point(x)?;
    k.check_point(y)?;
    Ok(k.raw(x, y))
}

/// `ρ₁(x) = Π(x, x)`.
pub fn first_intensity<K: Kernel + ?Sized>(k: &K, x: f64) -> Result<f64> {
    k.check_point(x)?;
    Ok(k.raw_diag(x))
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `scale · (A(x)B(y) − A(y)B(x)) / (x − y)` with diagonal
/// `scale · (A'(x)B(x) − A(x)B'(x))`.
#[derive(Clone)]
pub struct IntegrableKernel {
    a: RealFn,
    b: RealFn,
    da: RealFn,
    db: RealFn,
    scale: f64,
}

impl fmt::Debug for IntegrableKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntegrableKernel")
            .field("scale", &self.scale)
            .finish_non_exhaustive()
    }
}

impl IntegrableKernel {
    pub fn new(
        a: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
        da: impl Fn(f64) -> f64 + Send + Sync + 'static,
        db: impl Fn(f64) -> f64 + Send + Sync + 'static,
        scale: f64,
    ) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("integrable kernel scale must be positive"));
        }
        Ok(Self {
            a: Arc::new(a),
            b: Arc::new(b),
            da: Arc::new(da),
            db: Arc::new(db),
            scale,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn diag(&self, x: f64) -> f64 {
        self.scale * ((self.da)(x) * (self.b)(x) - (self.a)(x) * (self.db)(x))
    }

    /// Off-diagonal difference quotient, no diagonal switch.
    pub fn quotient(&self, x: f64, y: f64) -> f64 {
        let num = (self.a)(x) * (self.b)(y) - (self.a)(y) * (self.b)(x);
        self.scale * num / (x - y)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        // Symmetric in (x, y) by construction: 2nd-order accurate
        // midpoint diagonal near the diagonal.
        if (x - y).abs() < DIAG_SWITCH_THRESHOLD {
            self.diag(0.5 * (x + y))
        } else {
            self.quotient(x, y)
        }
    }
}

#[derive(Debug, Clone)]
pub enum KernelVariant {
    Sine,
    Bessel { s: f64 },
    Hermite { n: usize },
    Custom(IntegrableKernel),
}

/// A kernel variant together with the window all numerics live on.
///
/// Immutable; cheap to clone for the built-in variants.
#[derive(Debug, Clone)]
pub struct KernelModel {
    variant: KernelVariant,
    window: Window,
}

impl KernelModel {
    pub fn new(variant: KernelVariant, window: Window) -> Result<Self> {
        match &variant {
            KernelVariant::Bessel { s } => {
                if !(*s > -1.0) {
                    return Err(invalid(format!("Bessel order must exceed -1, got {s}")));
                }
                if window.lo < 0.0 {
                    return Err(invalid("Bessel window must satisfy lo >= 0"));
                }
            }
            KernelVariant::Hermite { n } if *n == 0 => {
                return Err(invalid("Hermite kernel needs N >= 1"));
            }
            _ => {}
        }
        Ok(Self { variant, window })
    }

    pub fn sine(window: Window) -> Self {
        Self {
            variant: KernelVariant::Sine,
            window,
        }
    }

    pub fn hermite(n: usize, window: Window) -> Result<Self> {
        Self::new(KernelVariant::Hermite { n }, window)
    }

    pub fn bessel(s: f64, window: Window) -> Result<Self> {
        Self::new(KernelVariant::Bessel { s }, window)
    }

    pub fn custom(kernel: IntegrableKernel, window: Window) -> Self {
        Self {
            variant: KernelVariant::Custom(kernel),
            window,
        }
    }

    pub fn variant(&self) -> &KernelVariant {
        &self.variant
    }

    pub fn with_window(&self, window: Window) -> Result<Self> {
        Self::new(self.variant.clone(), window)
    }

    /// Rank of the kernel when it is a finite-rank projection on ℝ.
    pub fn finite_rank(&self) -> Option<usize> {
        match self.variant {
            KernelVariant::Hermite { n } => Some(n),
            _ => None,
        }
    }

    /// The `(A, B, A', B', scale)` representation of the variant.
    pub fn integrable(&self) -> IntegrableKernel {
        use std::f64::consts::PI;
        match &self.variant {
            KernelVariant::Sine => IntegrableKernel {
                a: Arc::new(|x: f64| (PI * x).sin()),
                b: Arc::new(|x: f64| (PI * x).cos()),
                da: Arc::new(|x: f64| PI * (PI * x).cos()),
                db: Arc::new(|x: f64| -PI * (PI * x).sin()),
                scale: 1.0 / PI,
            },
            KernelVariant::Hermite { n } => {
                let n = *n;
                let c = (n as f64 / 2.0).sqrt();
                let phi = move |x: f64| {
                    let mut v = vec![0.0; n + 2];
                    hermite::hermite_functions(x, &mut v);
                    v
                };
                let (p1, p2, p3, p4) = (phi, phi, phi, phi);
                IntegrableKernel {
                    a: Arc::new(move |x| c * p1(x)[n]),
                    b: Arc::new(move |x| p2(x)[n - 1]),
                    da: Arc::new(move |x| c * hermite::hermite_derivative(&p3(x), n)),
                    db: Arc::new(move |x| hermite::hermite_derivative(&p4(x), n - 1)),
                    scale: 1.0,
                }
            }
            KernelVariant::Bessel { s } => {
                let s = *s;
                IntegrableKernel {
                    a: Arc::new(move |x: f64| bessel::bessel_j(s, x.sqrt()).0),
                    b: Arc::new(move |x: f64| {
                        let z = x.sqrt();
                        z * bessel::bessel_j(s, z).1
                    }),
                    da: Arc::new(move |x: f64| {
                        let z = x.sqrt();
                        bessel::bessel_j(s, z).1 / (2.0 * z)
                    }),
                    db: Arc::new(move |x: f64| {
                        let j = bessel::bessel_j(s, x.sqrt()).0;
                        -0.5 * (1.0 - s * s / x) * j
                    }),
                    scale: 0.5,
                }
            }
            KernelVariant::Custom(k) => k.clone(),
        }
    }

    /// `(d/da) ln ρ₁(a)`.
    pub fn intensity_log_derivative(&self, a: f64) -> Result<f64> {
        let rho = first_intensity(self, a)?;
        if !(rho > INTENSITY_FLOOR) {
            return Err(Error::DegenerateIntensity {
                at: a,
                intensity: rho,
                floor: INTENSITY_FLOOR,
            });
        }
        match &self.variant {
            KernelVariant::Sine => Ok(0.0),
            KernelVariant::Hermite { n } => {
                let (rho, drho) = HermiteKernel { n: *n }.diag_with_derivative(a);
                Ok(drho / rho)
            }
            KernelVariant::Bessel { s } => {
                let (j, dj) = bessel::bessel_j(*s, a.sqrt());
                let drho = 0.25 * (s * s * j * j / (a * a) - dj * dj / a);
                Ok(drho / rho)
            }
            KernelVariant::Custom(k) => {
                let h = 1e-5 * a.abs().max(1.0);
                let (lo, hi) = (k.diag(a - h), k.diag(a + h));
                if !(lo > 0.0 && hi > 0.0) {
                    return Err(Error::DegenerateIntensity {
                        at: a,
                        intensity: lo.min(hi),
                        floor: INTENSITY_FLOOR,
                    });
                }
                Ok((hi.ln() - lo.ln()) / (2.0 * h))
            }
        }
    }
}

fn sinc_kernel(h: f64) -> f64 {
    use std::f64::consts::PI;
    if h.abs() < DIAG_SWITCH_THRESHOLD {
        let u = PI * h;
        1.0 - u * u / 6.0
    } else {
        (PI * h).sin() / (PI * h)
    }
}

impl Kernel for KernelModel {
    fn window(&self) -> Window {
        self.window
    }

    fn raw(&self, x: f64, y: f64) -> f64 {
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        match &self.variant {
            KernelVariant::Sine => sinc_kernel(x - y),
            KernelVariant::Hermite { n } => HermiteKernel { n: *n }.eval(x, y),
            KernelVariant::Bessel { s } => {
                if y - x < DIAG_SWITCH_THRESHOLD {
                    return self.raw_diag(0.5 * (x + y));
                }
                let (zx, zy) = (x.sqrt(), y.sqrt());
                let (jx, djx) = bessel::bessel_j(*s, zx);
                let (jy, djy) = bessel::bessel_j(*s, zy);
                (jx * zy * djy - jy * zx * djx) / (2.0 * (x - y))
            }
            KernelVariant::Custom(k) => k.eval(x, y),
        }
    }

    fn raw_diag(&self, x: f64) -> f64 {
        match &self.variant {
            KernelVariant::Sine => 1.0,
            KernelVariant::Hermite { n } => HermiteKernel { n: *n }.diag(x),
            KernelVariant::Bessel { s } => {
                let (j, dj) = bessel::bessel_j(*s, x.sqrt());
                0.25 * (dj * dj + (1.0 - s * s / x) * j * j)
            }
            KernelVariant::Custom(k) => k.diag(x),
        }
    }

    fn gram(&self, xs: &[f64]) -> Vec<f64> {
        let KernelVariant::Hermite { n: rank } = self.variant else {
            let n = xs.len();
            let mut g = vec![0.0; n * n];
            for i in 0..n {
                g[i * n + i] = self.raw_diag(xs[i]);
                for j in 0..i {
                    let v = self.raw(xs[i], xs[j]);
                    g[i * n + j] = v;
                    g[j * n + i] = v;
                }
            }
            return g;
        };
        let n = xs.len();
        let mut phi = vec![0.0; n * rank];
        for (i, &x) in xs.iter().enumerate() {
            hermite::hermite_functions(x, &mut phi[i * rank..(i + 1) * rank]);
        }
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            let pi = &phi[i * rank..(i + 1) * rank];
            for j in 0..=i {
                let pj = &phi[j * rank..(j + 1) * rank];
                let v: f64 = pi.iter().zip(pj).map(|(a, b)| a * b).sum();
                g[i * n + j] = v;
                g[j * n + i] = v;
            }
        }
        g
    }

    fn check_point(&self, x: f64) -> Result<()> {
        self.window.check(x)?;
        if matches!(self.variant, KernelVariant::Bessel { .. }) && !(x > 0.0) {
            return Err(Error::BesselDomain(x));
        }
        Ok(())
    }
}

/// Serializable kernel selector: `sine`, `bessel:<s>`, `hermite:<N>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KernelSpec {
    Sine,
    Bessel { s: f64 },
    Hermite { n: usize },
}

impl KernelSpec {
    /// A window holding essentially all the relevant mass: `[-10, 10]`
    /// for sine, the bulk plus a Gaussian tail margin for Hermite, and
    /// `(0, 100]` for Bessel.
    pub fn default_window(&self) -> Window {
        match *self {
            KernelSpec::Sine => Window { lo: -10.0, hi: 10.0 },
            KernelSpec::Hermite { n } => {
                let w = (2.0 * n as f64).sqrt() + 6.0;
                Window { lo: -w, hi: w }
            }
            KernelSpec::Bessel { .. } => Window { lo: 0.0, hi: 100.0 },
        }
    }

    pub fn build(&self, window: Option<Window>) -> Result<KernelModel> {
        let window = window.unwrap_or_else(|| self.default_window());
        let variant = match *self {
            KernelSpec::Sine => KernelVariant::Sine,
            KernelSpec::Bessel { s } => KernelVariant::Bessel { s },
            KernelSpec::Hermite { n } => KernelVariant::Hermite { n },
        };
        KernelModel::new(variant, window)
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name.trim().to_ascii_lowercase().as_str(), arg) {
            ("sine", None) => Ok(KernelSpec::Sine),
            ("bessel", Some(a)) => a
                .trim()
                .parse()
                .map(|s| KernelSpec::Bessel { s })
                .map_err(|_| invalid(format!("bad Bessel order {a:?}"))),
            ("hermite", Some(a)) => match a.trim().parse() {
                Ok(n) if n >= 1 => Ok(KernelSpec::Hermite { n }),
                _ => Err(invalid(format!("bad Hermite rank {a:?}"))),
            },
            _ => Err(invalid(format!(
                "unknown kernel {s:?}; expected sine, bessel:<s> or hermite:<N>"
            ))),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Sine => write!(f, "sine"),
            KernelSpec::Bessel { s } => write!(f, "bessel:{s}"),
            KernelSpec::Hermite { n } => write!(f, "hermite:{n}"),
        }
    }
}
