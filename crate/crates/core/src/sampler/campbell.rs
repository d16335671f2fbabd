use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dpp::{chain_rule, frame_of, jitter};
use super::{discretize_layout, Configuration, DiscretizedKernel};
use crate::error::{invalid, Error, Result};
use crate::kernels::{Kernel, KernelModel, Window, INTENSITY_FLOOR};
use crate::quadrature::{FineBand, PanelLayout};

/// Eigenvalues below this carry no eigenfunction mass at the anchor.
const EIGEN_FLOOR: f64 = 1e-12;

/// Samples `P^a` for arbitrary anchors from one base discretization.
///
/// The discretized process is a mixture over eigenvector subsets `J` of
/// projection processes. Conditioning on a particle at `a` reweights `J`
/// by `Σ_{j∈J} ψ_j(a)²`, where `ψ_j(a) = (vⱼ · m) / λⱼ` is the Nyström
/// extension of eigenvector `j` and `mᵢ = √wᵢ Π(xᵢ, a)`. Within the chosen
/// subset the direction `ψ_J(a)` is then projected out.
#[derive(Debug, Clone)]
pub struct PalmMixtureSampler {
    kernel: KernelModel,
    disc: DiscretizedKernel,
}

impl PalmMixtureSampler {
    pub fn new(kernel: KernelModel, layout: &PanelLayout) -> Result<Self> {
        let disc = discretize_layout(&kernel, layout)?;
        Ok(Self { kernel, disc })
    }

    pub fn discretization(&self) -> &DiscretizedKernel {
        &self.disc
    }

    pub fn kernel(&self) -> &KernelModel {
        &self.kernel
    }

    /// One draw of the reduced Palm process at `a`.
    pub fn sample_at<R: Rng + ?Sized>(&self, a: f64, rng: &mut R) -> Result<Configuration> {
        self.kernel.check_point(a)?;
        let rho = self.kernel.raw_diag(a);
        if !(rho > INTENSITY_FLOOR) {
            return Err(Error::DegenerateIntensity {
                at: a,
                intensity: rho,
                floor: INTENSITY_FLOOR,
            });
        }
        let d = &self.disc;
        let n = d.len();
        let m: Vec<f64> = (0..n)
            .map(|i| d.sqrt_weights()[i] * self.kernel.raw(d.nodes()[i], a))
            .collect();
        let v = d.eigenvectors();
        let lambda = d.eigenvalues();
        let psi: Vec<f64> = (0..n)
            .map(|j| {
                if lambda[j] > EIGEN_FLOOR {
                    let g: f64 = (0..n).map(|i| v[(i, j)] * m[i]).sum();
                    g / lambda[j]
                } else {
                    0.0
                }
            })
            .collect();
        let mass: Vec<f64> = psi.iter().zip(lambda).map(|(p, l)| l * p * p).collect();
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateIntensity {
                at: a,
                intensity: total,
                floor: INTENSITY_FLOOR,
            });
        }
        let mut u = rng.random::<f64>() * total;
        let mut first = n - 1;
        for (j, w) in mass.iter().enumerate() {
            if u < *w {
                first = j;
                break;
            }
            u -= w;
        }
        let mut columns = Vec::new();
        for (j, &l) in lambda.iter().enumerate() {
            // One uniform per eigenvector keeps the stream layout fixed.
            let keep = rng.random::<f64>() < l;
            if j == first || (keep && l > 0.0) {
                columns.push(j);
            }
        }
        let norm = columns.iter().map(|&j| psi[j] * psi[j]).sum::<f64>().sqrt();
        let frame = frame_of(d, &columns);
        let mut e0 = vec![0.0; n];
        for (i, e) in e0.iter_mut().enumerate() {
            *e = frame
                .row(i)
                .iter()
                .zip(&columns)
                .map(|(vij, &j)| vij * psi[j] / norm)
                .sum();
        }
        let nodes = chain_rule(&frame, &[e0], rng);
        Ok(jitter(d, &nodes, rng))
    }
}

/// A smooth bounded weight `χ` on the anchor, with a support interval.
#[derive(Clone)]
pub struct AnchorDensity {
    pub support: Window,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for AnchorDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnchorDensity").field("support", &self.support).finish_non_exhaustive()
    }
}

impl AnchorDensity {
    pub fn new(support: Window, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            support,
            f: Arc::new(f),
        }
    }

    /// Indicator of `support`.
    pub fn indicator(support: Window) -> Self {
        Self::new(support, move |x| if support.contains(x) { 1.0 } else { 0.0 })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.support.contains(x) {
            (self.f)(x)
        } else {
            0.0
        }
    }
}

/// One draw from the reduced Campbell measure restricted by `χ`.
///
/// `mass = ∫χρ₁`, so `mass · mean(F(anchor, config))` estimates
/// `∫∫ F dC_P` weighted by `χ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampbellSample {
    pub anchor: f64,
    pub config: Configuration,
    pub mass: f64,
}

/// Draws anchors with density `∝ χρ₁` by rejection and configurations
/// from `P^a` via [`PalmMixtureSampler`].
#[derive(Debug, Clone)]
pub struct CampbellSampler {
    density: AnchorDensity,
    palm: PalmMixtureSampler,
    envelope: f64,
    mass: f64,
}

/// Grid points used to bound `χρ₁` for rejection sampling.
const ENVELOPE_GRID: usize = 2000;
const ENVELOPE_MARGIN: f64 = 1.2;

impl CampbellSampler {
    /// `layout` is refined over the support of `χ` so that the sampled
    /// Palm intensity resolves its zero at the anchor.
    pub fn new(kernel: KernelModel, density: AnchorDensity, layout: PanelLayout) -> Result<Self> {
        let w = kernel.window();
        let s = density.support;
        if s.lo < w.lo || s.hi > w.hi {
            return Err(invalid("support of the anchor weight must lie inside the window"));
        }
        let fine = (layout.max_panel / 4.0).min(s.len() / 8.0);
        let layout = layout.band(FineBand {
            lo: s.lo,
            hi: s.hi,
            max_panel: fine,
        });
        let weight = |x: f64| {
            if kernel.check_point(x).is_err() {
                0.0
            } else {
                density.eval(x) * kernel.raw_diag(x)
            }
        };
        let mut peak: f64 = 0.0;
        for i in 0..=ENVELOPE_GRID {
            let x = s.lo + s.len() * i as f64 / ENVELOPE_GRID as f64;
            peak = peak.max(weight(x));
        }
        let mass = PanelLayout::new(s, s.len() / 32.0, 16).rule()?.integrate(weight);
        if !(mass > 0.0 && peak > 0.0) {
            return Err(Error::DegenerateNormalizer(format!("∫χρ₁ = {mass}")));
        }
        let palm = PalmMixtureSampler::new(kernel, &layout)?;
        Ok(Self {
            density,
            palm,
            envelope: ENVELOPE_MARGIN * peak,
            mass,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn density(&self) -> &AnchorDensity {
        &self.density
    }

    pub fn palm(&self) -> &PalmMixtureSampler {
        &self.palm
    }

    pub fn sample_anchor<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s = self.density.support;
        let k = self.palm.kernel();
        loop {
            let a = s.lo + rng.random::<f64>() * s.len();
            if k.check_point(a).is_err() {
                continue;
            }
            let w = self.density.eval(a) * k.raw_diag(a);
            if rng.random::<f64>() * self.envelope < w {
                return a;
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CampbellSample> {
        let anchor = self.sample_anchor(rng);
        let config = self.palm.sample_at(anchor, rng)?;
        Ok(CampbellSample {
            anchor,
            config,
            mass: self.mass,
        })
    }
}

/// One Campbell draw with a fresh sampler; loops should build a
/// [`CampbellSampler`] once.
pub fn sample_campbell<R: Rng + ?Sized>(
    k: &KernelModel,
    chi: AnchorDensity,
    n_nodes: usize,
    rng: &mut R,
) -> Result<CampbellSample> {
    let layout = super::discretize::default_layout(k, n_nodes);
    CampbellSampler::new(k.clone(), chi, layout)?.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::stream;

    #[test]
    fn hermite_mixture_palm_has_rank_minus_one_points() {
        let k = KernelModel::hermite(4, Window::symmetric(9.0).unwrap()).unwrap();
        let layout = PanelLayout::with_node_count(k.window(), 160, 8);
        let s = PalmMixtureSampler::new(k, &layout).unwrap();
        let mut rng = stream(3, 0);
        for i in 0..100 {
            let a = -1.5 + 0.03 * i as f64;
            assert_eq!(s.sample_at(a, &mut rng).unwrap().len(), 3);
        }
    }

    #[test]
    fn campbell_anchor_inside_support_and_not_in_config() {
        let k = KernelModel::sine(Window::symmetric(6.0).unwrap());
        let chi = AnchorDensity::indicator(Window::new(0.0, 1.0).unwrap());
        let layout = PanelLayout::with_node_count(k.window(), 120, 8);
        let s = CampbellSampler::new(k, chi, layout).unwrap();
        assert!((s.mass() - 1.0).abs() < 1e-12);
        let mut rng = stream(4, 0);
        for _ in 0..200 {
            let c = s.sample(&mut rng).unwrap();
            assert!((0.0..=1.0).contains(&c.anchor));
            assert!(c.config.iter().all(|x| x != c.anchor));
        }
    }

    #[test]
    fn zero_weight_is_degenerate() {
        let k = KernelModel::sine(Window::symmetric(3.0).unwrap());
        let chi = AnchorDensity::new(Window::new(0.0, 1.0).unwrap(), |_| 0.0);
        let layout = PanelLayout::with_node_count(k.window(), 48, 8);
        assert!(matches!(
            CampbellSampler::new(k, chi, layout),
            Err(Error::DegenerateNormalizer(_))
        ));
    }
}
