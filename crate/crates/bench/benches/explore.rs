use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use vow::lp::{explore, parse_program, random_program, ExploreOptions, RandomParams};

const CROSS_WAIT: &str = "new p\nnew q\nasync [] {}\nasync [q] {\n    get p\n    set q\n}\nget q\nset p\n";

fn exploration(c: &mut Criterion) {
    let options = ExploreOptions::default();
    let cross_wait = parse_program(CROSS_WAIT).unwrap();
    c.bench_function("explore/cross-wait", |b| {
        b.iter(|| explore(black_box(&cross_wait), &options).unwrap())
    });
    let params = RandomParams::default();
    let programs: Vec<_> = (0..100).map(|s| random_program(s, &params)).collect();
    c.bench_function("explore/random-100", |b| {
        b.iter(|| {
            for p in &programs {
                explore(p, &options).unwrap();
            }
        })
    });
}

criterion_group!(benches, exploration);
criterion_main!(benches);
