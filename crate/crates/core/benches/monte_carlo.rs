//! Sequential against rayon execution of the same seeded Monte Carlo loops.
//! Both produce identical samples; only wall time differs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dpp_logderiv::exec::{run_batched, DEFAULT_BATCH};
use dpp_logderiv::logderiv::{ibp_test, Bump, Observable, RegularizationSchedule};
use dpp_logderiv::functionals::Quadrature;
use dpp_logderiv::sampler::{default_layout, discretize, sample_dpp};
use dpp_logderiv::{Exec, KernelModel, KernelSpec, Window};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn sampling(c: &mut Criterion) {
    let k = KernelModel::sine(Window::symmetric(10.0).unwrap());
    let disc = discretize(&k, 200).unwrap();
    let mut g = c.benchmark_group("sample_dpp_1024");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_batched(exec, 7, 1024, DEFAULT_BATCH, |rng, _| sample_dpp(&disc, rng)))
        });
    }
    g.finish();
}

fn campbell(c: &mut Criterion) {
    let k = KernelSpec::Hermite { n: 4 }.build(None).unwrap();
    let schedule = RegularizationSchedule::new(vec![(4.0, 0.2), (6.0, 0.1), (8.0, 0.05)]).unwrap();
    let chi = Bump {
        center: 0.0,
        radius: 1.0,
    };
    let mut g = c.benchmark_group("ibp_hermite4_512");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                ibp_test(
                    &k,
                    chi,
                    Observable::Ones,
                    &schedule,
                    &Quadrature::default(),
                    default_layout(&k, 200),
                    512,
                    7,
                    exec,
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, sampling, campbell);
criterion_main!(benches);
