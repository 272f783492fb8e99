use criterion::{criterion_group, criterion_main, Criterion};
use nestmatch::recom::{collect_chain, district_dual_graph, ChainConfig, ChainMetrics};
use nestmatch_bench::column_plan;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn steps(c: &mut Criterion) {
    let start = column_plan(8, 0.05);
    c.bench_function("recom_step_8x8_k8", |b| {
        let mut p = start.clone();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        b.iter(|| p.recom_step(50, &mut rng))
    });
    c.bench_function("district_graph_8x8_k8", |b| {
        b.iter(|| district_dual_graph(&start))
    });
}

fn chain(c: &mut Criterion) {
    let start = column_plan(8, 0.05);
    let cfg = ChainConfig::new(8, 0.05, 100, 7);
    c.bench_function("chain_100_steps_8x8_k8", |b| {
        b.iter(|| collect_chain(&start, &cfg, &ChainMetrics::default()).unwrap())
    });
}

criterion_group!(benches, steps, chain);
criterion_main!(benches);
