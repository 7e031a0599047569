use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vow::{spawn, Channel, Mode, Promise, Runtime};

fn promise_ops(c: &mut Criterion) {
    let mut group = c.benchmark_group("promise");
    for mode in [Mode::Baseline, Mode::Verified] {
        let rt = Runtime::with_mode(mode);
        group.bench_function(BenchmarkId::new("new-set-get", mode), |b| {
            rt.run_root(|| {
                b.iter(|| {
                    let p = Promise::new().unwrap();
                    p.set(black_box(1u64)).unwrap();
                    *p.get().unwrap()
                })
            })
            .unwrap();
        });
        group.bench_function(BenchmarkId::new("spawn-join", mode), |b| {
            rt.run_root(|| {
                b.iter(|| {
                    let p = Promise::new().unwrap();
                    let q = p.clone();
                    spawn(&[&p], move || q.set(7u64)).unwrap();
                    *p.get().unwrap()
                })
            })
            .unwrap();
        });
        group.bench_function(BenchmarkId::new("channel-1000", mode), |b| {
            rt.run_root(|| {
                b.iter(|| {
                    let c = Channel::new().unwrap();
                    let tx = c.clone();
                    spawn(&[&c], move || -> vow::Result<()> {
                        for i in 0..1000u32 {
                            tx.send(i)?;
                        }
                        tx.close()
                    })
                    .unwrap();
                    let mut sum = 0u64;
                    while let Some(v) = c.recv().unwrap() {
                        sum += u64::from(v);
                    }
                    sum
                })
            })
            .unwrap();
        });
    }
    group.finish();
}

fn workloads(c: &mut Criterion) {
    let mut group = c.benchmark_group("workload");
    group.sample_size(10);
    for bench in vow_bench::Benchmark::ALL {
        for mode in [Mode::Baseline, Mode::Verified] {
            group.bench_function(BenchmarkId::new(bench.name(), mode), |b| {
                b.iter(|| vow_bench::run_benchmark_scaled(bench.name(), mode, 1, 0, 0.25).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, promise_ops, workloads);
criterion_main!(benches);
