//! Sampler statistics against oracles built from the kernel, never from
//! the sampler itself.

use dpp_logderiv::estimate::{mean_estimate, variance_estimate, Estimate};
use dpp_logderiv::exec::{run_batched, stream, DEFAULT_BATCH};
use dpp_logderiv::functionals::Quadrature;
use dpp_logderiv::sampler::{
    count_in, default_layout, discretize, empirical_intensity, sample_dpp, uniform_edges, AnchorDensity,
    CampbellSampler, DiscretizedKernel,
};
use dpp_logderiv::{Configuration, Exec, Kernel, KernelModel, KernelSpec, PalmKernel, Window};

const Z_MAX: f64 = 4.0;

fn draws(disc: &DiscretizedKernel, n: usize, seed: u64, exec: Exec) -> Vec<Configuration> {
    run_batched(exec, seed, n, DEFAULT_BATCH, |rng, _| sample_dpp(disc, rng))
}

/// `V Λ Vᵀ` with the clipped spectrum the sampler uses.
fn projected(disc: &DiscretizedKernel) -> Vec<Vec<f64>> {
    let (v, lam) = (disc.eigenvectors(), disc.eigenvalues());
    let n = disc.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| v[(i, k)] * lam[k] * v[(j, k)]).sum()).collect())
        .collect()
}

#[test]
fn count_variance_matches_the_jittered_discrete_process() {
    // Cell i carries a point with probability L_ii and places it uniformly,
    // so the count in [0, 1) has variance Σ p_i L_ii − Σ p_i p_j L_ij².
    let k = KernelSpec::Hermite { n: 5 }.build(None).unwrap();
    let disc = discretize(&k, 200).unwrap();
    let l = projected(&disc);
    let p: Vec<f64> = disc
        .cells()
        .iter()
        .map(|&(lo, hi)| (hi.min(1.0) - lo.max(0.0)).max(0.0) / (hi - lo))
        .collect();
    let n = p.len();
    let mut oracle: f64 = (0..n).map(|i| p[i] * l[i][i]).sum();
    for i in 0..n {
        for j in 0..n {
            oracle -= p[i] * p[j] * l[i][j] * l[i][j];
        }
    }
    let counts: Vec<f64> = draws(&disc, 20_000, 11, Exec::Parallel)
        .iter()
        .map(|x| count_in(x, 0.0, 1.0) as f64)
        .collect();
    let mc = variance_estimate(&counts);
    let z = mc.z_against(&Estimate::exact(oracle));
    assert!(z < Z_MAX, "variance {} vs oracle {oracle}, z = {z}", mc.value);
}

#[test]
fn mean_count_is_the_trace() {
    let k = KernelModel::sine(Window::symmetric(5.0).unwrap());
    let disc = discretize(&k, 160).unwrap();
    let counts: Vec<f64> = draws(&disc, 5_000, 12, Exec::Parallel).iter().map(|x| x.len() as f64).collect();
    let mc = mean_estimate(&counts);
    assert!((disc.trace() - 10.0).abs() < 1e-6);
    assert!(mc.z_against(&Estimate::exact(10.0)) < Z_MAX, "mean count {}", mc.value);
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let k = KernelSpec::Hermite { n: 4 }.build(None).unwrap();
    let disc = discretize(&k, 120).unwrap();
    assert_eq!(draws(&disc, 600, 5, Exec::Sequential), draws(&disc, 600, 5, Exec::Parallel));
}

#[test]
fn palm_intensity_histogram_matches_the_palm_kernel() {
    let k = KernelSpec::Hermite { n: 3 }.build(None).unwrap();
    let pk = PalmKernel::new(k.clone(), &[0.3]).unwrap();
    let disc = discretize(&pk, 200).unwrap();
    let samples = draws(&disc, 20_000, 13, Exec::Parallel);
    let edges = uniform_edges(-4.0, 4.0, 16);
    let hist = empirical_intensity(&samples, &edges).unwrap();
    let q = Quadrature::default();
    for (i, bin) in edges.windows(2).enumerate() {
        let w = Window::new(bin[0], bin[1]).unwrap();
        let exact = q.integrate(w, [], |x| pk.raw_diag(x)).unwrap() / w.len();
        let z = hist.density[i].z_against(&Estimate::exact(exact));
        assert!(z < Z_MAX, "bin {bin:?}: {} vs {exact}, z = {z}", hist.density[i].value);
    }
}

#[test]
fn campbell_anchors_follow_the_intensity() {
    let k = KernelSpec::Hermite { n: 2 }.build(None).unwrap();
    let support = Window::new(-1.0, 1.0).unwrap();
    let sampler = CampbellSampler::new(k.clone(), AnchorDensity::indicator(support), default_layout(&k, 120)).unwrap();
    let q = Quadrature::default();
    let mass = q.integrate(support, [], |x| k.raw_diag(x)).unwrap();
    assert!((sampler.mass() - mass).abs() < 1e-9);
    let mut rng = stream(14, 0);
    let anchors = Configuration::new((0..20_000).map(|_| sampler.sample_anchor(&mut rng)).collect()).unwrap();
    let edges = uniform_edges(-1.0, 1.0, 10);
    for bin in edges.windows(2) {
        let w = Window::new(bin[0], bin[1]).unwrap();
        let p = q.integrate(w, [], |x| k.raw_diag(x)).unwrap() / mass;
        let hits = count_in(&anchors, bin[0], bin[1]) as f64;
        let n = anchors.len() as f64;
        let z = (hits - n * p).abs() / (n * p * (1.0 - p)).sqrt();
        assert!(z < Z_MAX, "bin {bin:?}: {hits} hits, expected {}", n * p);
    }
}
