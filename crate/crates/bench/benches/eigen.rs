use criterion::{criterion_group, criterion_main, Criterion};
use gap_bench::er;
use gap_bench::gap_core::eval::spectral_partition;
use gap_bench::gap_core::graph::pca_features;
use gap_bench::gap_core::numeric::{symmetric_eigs, Which};

fn eigen(c: &mut Criterion) {
    let g = er(2000, 20.0, 5);
    let lap = g.laplacian();
    let mut group = c.benchmark_group("eigen");
    group.sample_size(10);
    group.bench_function("laplacian smallest 4, n=2000", |b| {
        b.iter(|| symmetric_eigs(&lap, 4, Which::Smallest, 0).unwrap())
    });
    group.bench_function("pca 16, n=2000", |b| b.iter(|| pca_features(&g, 16).unwrap()));
    group.bench_function("spectral partition g=4, n=2000", |b| {
        b.iter(|| spectral_partition(&g, 4, 0).unwrap())
    });
    group.finish();
}

criterion_group!(benches, eigen);
criterion_main!(benches);
