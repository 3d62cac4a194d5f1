use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use spinmu::dynamics::TransferProblem;
use spinmu::lft::{absorb_controller, build_plant, output_matrix};
use spinmu::network::{build_hamiltonian, coupling_structure, SpinNetworkSpec};
use spinmu::par::map_slice;
use spinmu::ssv::{robust_performance_mu, MuOptions};
use spinmu::synthesis::{synthesize, SynthesisOptions};
use spinmu::ExecMode;

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn bench_synthesis(c: &mut Criterion) {
    let spec = SpinNetworkSpec::ring(11).unwrap();
    let prob = TransferProblem::new(11, 1, 3).unwrap();
    let opts = SynthesisOptions::default();
    let mut group = c.benchmark_group("synthesize_ring11_x16");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| synthesize(&spec, &prob, 16, 42, &opts, mode).unwrap())
        });
    }
    group.finish();
}

fn bench_mu_sweep(c: &mut Criterion) {
    let spec = SpinNetworkSpec::ring(11).unwrap();
    let prob = TransferProblem::new(11, 1, 3).unwrap();
    let ens = synthesize(&spec, &prob, 16, 42, &SynthesisOptions::default(), ExecMode::Parallel).unwrap();
    let h = build_hamiltonian(&spec).unwrap();
    let s56 = coupling_structure(&spec, 5).unwrap();
    let plant = build_plant(&h, &output_matrix(&prob), &[s56], Complex64::new(0.0, 0.0)).unwrap();
    let opts = MuOptions::default();
    let mut group = c.benchmark_group("mu_sweep_ring11_x16");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                map_slice(mode, &ens.controllers, |ctl| {
                    let g = absorb_controller(&plant, &ctl.d).unwrap();
                    black_box(robust_performance_mu(&g, &g.uncertainty_structure(), &opts).unwrap().lower)
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_synthesis, bench_mu_sweep);
criterion_main!(benches);
