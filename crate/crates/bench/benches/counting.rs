use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nestmatch::extremal::max_weight_perfect_matching;
use nestmatch::generators::grid_graph;
use nestmatch::{count_by_enumeration, count_matchings_fkt, Sampler};
use nestmatch_bench::patterned_weights;

fn fkt(c: &mut Criterion) {
    for side in [8, 12, 16] {
        let g = grid_graph(side, side);
        c.bench_function(&format!("fkt_grid_{side}x{side}"), |b| {
            b.iter(|| count_matchings_fkt(black_box(&g)).unwrap())
        });
    }
}

fn enumeration(c: &mut Criterion) {
    let g = grid_graph(6, 6);
    c.bench_function("enumerate_grid_6x6", |b| {
        b.iter(|| count_by_enumeration(black_box(&g)))
    });
}

fn sampling(c: &mut Criterion) {
    let g = grid_graph(8, 8);
    let mut sampler = Sampler::new(&g, 1).unwrap();
    c.bench_function("sample_grid_8x8", |b| b.iter(|| sampler.sample().unwrap()));
}

fn blossom(c: &mut Criterion) {
    let g = grid_graph(10, 10);
    let w = patterned_weights(&g);
    c.bench_function("max_weight_grid_10x10", |b| {
        b.iter(|| max_weight_perfect_matching(black_box(&g), &w).unwrap())
    });
}

criterion_group!(benches, fkt, enumeration, sampling, blossom);
criterion_main!(benches);
