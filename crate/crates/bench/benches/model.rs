use criterion::{criterion_group, criterion_main, Criterion};
use gap_bench::er;
use gap_bench::gap_core::embedding::{EmbeddingKind, EmbeddingMode, NeighborSample, ProjectionBias};
use gap_bench::gap_core::graph::FeatureSpec;
use gap_bench::gap_core::{GapModel, ModelSpec};

fn spec(embedding: EmbeddingKind) -> ModelSpec {
    ModelSpec {
        partitions: 3,
        embedding,
        embedding_mode: EmbeddingMode::Trained,
        hidden: 32,
        sage_steps: 2,
        shared_pooling: false,
        neighbor_sample: NeighborSample::All,
        projection_bias: ProjectionBias::Agg,
        head_layers: vec![32],
        features: FeatureSpec::Pca { dim: 16 },
    }
}

// inference on a prepared graph: features are built once outside the loop
fn forward(c: &mut Criterion) {
    let g = er(2000, 20.0, 3);
    for kind in [EmbeddingKind::Gcn, EmbeddingKind::Sage] {
        let model = GapModel::new(spec(kind), 0).unwrap();
        let prep = model.prepare(&g).unwrap();
        c.bench_function(&format!("forward {kind:?} n=2000"), |b| {
            b.iter(|| model.probabilities(&prep).unwrap())
        });
    }
}

criterion_group!(benches, forward);
criterion_main!(benches);
