//! Sequential vs rayon over independent windows.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lie_events::events::{generate_events, EventGenConfig};
use lie_events::par::{self, Execution};
use lie_events::perf::walk_fixture;
use lie_events::stack::build_stack;
use lie_events::synth::{run_toy_experiment, toy_windows, ToyConfig};

fn events_and_stacks(c: &mut Criterion) {
    let windows = walk_fixture(7, 60, 200.0).unwrap();
    let cfg = EventGenConfig::default();
    let mut group = c.benchmark_group("batch_windows");
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| {
                par::map(exec, &windows, |w| {
                    let e = generate_events(&w.path, &w.corrected, &cfg).unwrap();
                    build_stack(&e, 200)
                })
            })
        });
    }
    group.finish();
}

fn toy(c: &mut Criterion) {
    let windows = toy_windows(3, 8, 1.0).unwrap();
    let mut group = c.benchmark_group("toy_experiment");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let cfg = ToyConfig {
            exec,
            ..ToyConfig::default()
        };
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| run_toy_experiment(&windows, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, events_and_stacks, toy);
criterion_main!(benches);
