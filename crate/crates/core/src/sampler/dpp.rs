use rand::Rng;

use super::{discretize, Configuration, DiscretizedKernel};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelModel, INTENSITY_FLOOR};
use crate::palm::PalmKernel;

/// Row-major `n × k` matrix of orthonormal columns spanning the selected
/// eigenspace.
pub(crate) struct Frame {
    pub n: usize,
    pub k: usize,
    pub rows: Vec<f64>,
}

impl Frame {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.k..(i + 1) * self.k]
    }
}

/// Sequential sampling of the discrete projection process with kernel
/// `F Fᵀ`, optionally already conditioned on the unit directions in
/// `preset` (each a node-space vector in the span of `F`).
///
/// Each step draws node `i` with probability proportional to the
/// remaining projection density `r_i`, then removes the normalized
/// conditional column through `i` from the span.
pub(crate) fn chain_rule<R: Rng + ?Sized>(frame: &Frame, preset: &[Vec<f64>], rng: &mut R) -> Vec<usize> {
    let (n, k) = (frame.n, frame.k);
    let mut resid: Vec<f64> = (0..n)
        .map(|i| frame.row(i).iter().map(|v| v * v).sum())
        .collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for e in preset {
        for (r, v) in resid.iter_mut().zip(e) {
            *r = (*r - v * v).max(0.0);
        }
        basis.push(e.clone());
    }
    let steps = k.saturating_sub(preset.len());
    let mut picked = Vec::with_capacity(steps);
    for _ in 0..steps {
        let total: f64 = resid.iter().sum();
        if !(total > 0.0) {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut i = n - 1;
        for (j, r) in resid.iter().enumerate() {
            if u < *r {
                i = j;
                break;
            }
            u -= r;
        }
        // Guard against landing on a zero-mass node from rounding.
        if resid[i] <= 0.0 {
            i = resid
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(j, _)| j)
                .unwrap_or(0);
        }
        let ri = frame.row(i);
        let norm = resid[i].sqrt();
        let mut e = vec![0.0; n];
        for (j, ej) in e.iter_mut().enumerate() {
            let mut v: f64 = frame.row(j).iter().zip(ri).map(|(a, b)| a * b).sum();
            for b in &basis {
                v -= b[j] * b[i];
            }
            *ej = v / norm;
        }
        for (r, v) in resid.iter_mut().zip(&e) {
            *r = (*r - v * v).max(0.0);
        }
        resid[i] = 0.0;
        basis.push(e);
        picked.push(i);
    }
    picked
}

/// Places one point uniformly in the cell of every selected node.
pub(crate) fn jitter<R: Rng + ?Sized>(disc: &DiscretizedKernel, nodes: &[usize], rng: &mut R) -> Configuration {
    let mut pts: Vec<f64> = nodes
        .iter()
        .map(|&i| {
            let (a, b) = disc.cells()[i];
            a + rng.random::<f64>() * (b - a)
        })
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    Configuration::from_sorted(pts)
}

pub(crate) fn frame_of(disc: &DiscretizedKernel, columns: &[usize]) -> Frame {
    let n = disc.len();
    let k = columns.len();
    let v = disc.eigenvectors();
    let mut rows = vec![0.0; n * k];
    for i in 0..n {
        for (c, &j) in columns.iter().enumerate() {
            rows[i * k + c] = v[(i, j)];
        }
    }
    Frame { n, k, rows }
}

/// One draw of the discretized process: each eigenvector is kept with
/// probability equal to its eigenvalue, then one point per kept
/// eigenvector is placed by the chain rule and jittered within its cell.
pub fn sample_dpp<R: Rng + ?Sized>(disc: &DiscretizedKernel, rng: &mut R) -> Configuration {
    let columns: Vec<usize> = disc
        .eigenvalues()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 0.0 && rng.random::<f64>() < l)
        .map(|(j, _)| j)
        .collect();
    let frame = frame_of(disc, &columns);
    let nodes = chain_rule(&frame, &[], rng);
    jitter(disc, &nodes, rng)
}

/// A draw from the reduced Palm process at `anchors`: the process with
/// kernel `Π^{anchors}`, discretized with `n_nodes` nodes.
///
/// Each call builds a fresh discretization; loops should call
/// [`discretize`] on a [`PalmKernel`] once and reuse it with
/// [`sample_dpp`].
pub fn sample_palm<R: Rng + ?Sized>(
    k: &KernelModel,
    anchors: &[f64],
    n_nodes: usize,
    rng: &mut R,
) -> Result<Configuration> {
    for &a in anchors {
        k.check_point(a)?;
        let rho = k.raw_diag(a);
        if !(rho > INTENSITY_FLOOR) {
            return Err(Error::DegenerateIntensity {
                at: a,
                intensity: rho,
                floor: INTENSITY_FLOOR,
            });
        }
    }
    let pk = PalmKernel::new(k.clone(), anchors)?;
    let disc = discretize(&pk, n_nodes)?;
    Ok(sample_dpp(&disc, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::stream;
    use crate::kernels::Window;
    use crate::sampler::count_in;

    #[test]
    fn hermite_cardinality_equals_rank() {
        let k = KernelModel::hermite(3, Window::symmetric(9.0).unwrap()).unwrap();
        let d = discretize(&k, 160).unwrap();
        let mut rng = stream(11, 0);
        for _ in 0..200 {
            let x = sample_dpp(&d, &mut rng);
            assert_eq!(x.len(), 3);
            assert!(x.iter().all(|p| d.window().contains(p)));
        }
    }

    #[test]
    fn palm_hermite_drops_one_point() {
        let k = KernelModel::hermite(3, Window::symmetric(9.0).unwrap()).unwrap();
        let mut rng = stream(12, 0);
        for _ in 0..20 {
            assert_eq!(sample_palm(&k, &[0.0], 120, &mut rng).unwrap().len(), 2);
        }
        assert!(sample_palm(&k, &[30.0], 120, &mut rng).is_err());
    }

    #[test]
    fn identical_seeds_identical_samples() {
        let k = KernelModel::sine(Window::symmetric(4.0).unwrap());
        let d = discretize(&k, 64).unwrap();
        let a: Vec<_> = (0..10).map({
            let mut r = stream(5, 3);
            move |_| sample_dpp(&d, &mut r)
        }).collect();
        let d = discretize(&k, 64).unwrap();
        let b: Vec<_> = (0..10).map({
            let mut r = stream(5, 3);
            move |_| sample_dpp(&d, &mut r)
        }).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_anchor_list_matches_plain_sampling() {
        let k = KernelModel::hermite(2, Window::symmetric(8.0).unwrap()).unwrap();
        let d = discretize(&k, 96).unwrap();
        let x = sample_dpp(&d, &mut stream(9, 0));
        let y = sample_palm(&k, &[], 96, &mut stream(9, 0)).unwrap();
        assert_eq!(x, y);
        assert_eq!(count_in(&x, -8.0, 8.0), 2);
    }
}
