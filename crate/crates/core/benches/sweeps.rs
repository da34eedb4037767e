use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sobolev_w2::bounds::harness::{run_sweep, CheckKind, Family, Sweep};
use sobolev_w2::bounds::CheckOptions;
use sobolev_w2::grid::{make_measure, smooth_signed, Generator, GridDomain};
use sobolev_w2::sobolev::{hminus1_norm, DEFAULT_TOL};
use sobolev_w2::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn theorem_sweeps(c: &mut Criterion) {
    let family = Family::BoundedRandom { rho_min: 0.5, rho_max: 4.0 };
    let cases = [
        ("interval_128", Sweep::new(CheckKind::CheckThm1, GridDomain::interval(128, 1.0).unwrap(), family.clone(), 0..32)),
        ("torus_16x16", Sweep::new(CheckKind::CheckThm1, GridDomain::unit_torus(2, 16).unwrap(), family, 0..8)),
    ];
    let opts = CheckOptions::default();
    let mut group = c.benchmark_group("thm1_sweep");
    group.sample_size(10);
    for (name, sweep) in &cases {
        for (mode, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(mode, name), sweep, |b, s| b.iter(|| run_sweep(s, &opts, exec)));
        }
    }
    group.finish();
}

fn norm_batch(c: &mut Criterion) {
    let d = GridDomain::unit_torus(2, 32).unwrap();
    let batch: Vec<_> = (0..16u64)
        .map(|seed| {
            let w = make_measure(&d, &Generator::BoundedRandom { rho_min: 0.5, rho_max: 2.0, seed }).unwrap();
            (smooth_signed(&d, 3, 100 + seed), w)
        })
        .collect();
    let mut group = c.benchmark_group("hminus1_batch_32x32");
    group.sample_size(10);
    for (mode, exec) in MODES {
        group.bench_function(mode, |b| {
            b.iter(|| exec.map(&batch, |(s, w)| hminus1_norm(s, w, DEFAULT_TOL).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, theorem_sweeps, norm_batch);
criterion_main!(benches);
