use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gap_bench::gap_core::loss::{expected_ncut_value, LossGraph, LossPath};
use gap_bench::{er, soft_assignment};

fn loss_paths(c: &mut Criterion) {
    let mut group = c.benchmark_group("expected_ncut");
    for n in [200, 1000] {
        let g = er(n, 10.0, 1);
        let lg = LossGraph::new(&g).with_dense();
        let y = soft_assignment(n, 4, 2);
        for path in [LossPath::Sparse, LossPath::Dense] {
            group.bench_with_input(BenchmarkId::new(format!("{path:?}"), n), &y, |b, y| {
                b.iter(|| expected_ncut_value(&lg, y, path).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, loss_paths);
criterion_main!(benches);
