use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use steiner_core::oracle::solve_exact_with;
use steiner_core::par::{self, Execution};
use steiner_core::tree_model::Point2;

fn terminals(seed: u64, n: usize) -> Vec<Point2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Point2::new(rng.gen(), rng.gen())).collect()
}

const SCHEDULES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

/// One instance, topologies spread over the pool.
fn single_instance(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_exact");
    group.sample_size(10);
    for n in [5, 6] {
        let t = terminals(n as u64, n);
        for (name, exec) in SCHEDULES {
            group.bench_with_input(BenchmarkId::new(name, n), &t, |b, t| {
                b.iter(|| solve_exact_with(black_box(t), exec).unwrap())
            });
        }
    }
    group.finish();
}

/// Many small instances, instances spread over the pool.
fn batch(c: &mut Criterion) {
    let instances: Vec<Vec<Point2>> = (0..64).map(|i| terminals(100 + i, 5)).collect();
    let mut group = c.benchmark_group("solve_batch_n5");
    group.sample_size(10);
    for (name, exec) in SCHEDULES {
        group.bench_function(name, |b| {
            b.iter(|| {
                par::map(exec, &instances, |t| {
                    solve_exact_with(t, Execution::Sequential).unwrap().length
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, single_instance, batch);
criterion_main!(benches);
