//! Invariants over random graphs and assignments.

use gap_core::embedding::{EmbeddingKind, EmbeddingMode, NeighborSample, ProjectionBias};
use gap_core::eval::{balancedness, brute_force_min_ncut, edge_cut_ratio, spectral_partition};
use gap_core::graph::FeatureSpec;
use gap_core::loss::{balance_error_value, exact_ncut, expected_ncut_value, HardAssignment, LossGraph, LossPath};
use gap_core::numeric::Matrix;
use gap_core::partitioner::{decode_checkpoint, encode_checkpoint, GapModel, ModelSpec};
use gap_core::Graph;
use proptest::prelude::*;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (3..=max_n).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n, 0.1f64..5.0), 1..3 * n).prop_filter_map("needs an edge", move |raw| {
            let edges: Vec<_> = raw.into_iter().filter(|(u, v, _)| u != v).collect();
            if edges.is_empty() {
                return None;
            }
            Graph::from_edges_dedup(n, edges).ok()
        })
    })
}

fn with_assignment(max_n: usize, parts: usize) -> impl Strategy<Value = (Graph, Vec<usize>)> {
    graph_strategy(max_n).prop_flat_map(move |g| {
        let n = g.num_nodes();
        (Just(g), proptest::collection::vec(0..parts, n))
    })
}

fn with_soft(max_n: usize, parts: usize) -> impl Strategy<Value = (Graph, Matrix)> {
    graph_strategy(max_n).prop_flat_map(move |g| {
        let n = g.num_nodes();
        (Just(g), proptest::collection::vec(0.01f64..1.0, n * parts)).prop_map(move |(g, raw)| {
            let mut y = Matrix::from_vec(n, parts, raw).unwrap();
            for r in 0..n {
                let s: f64 = y.row(r).iter().sum();
                y.row_mut(r).iter_mut().for_each(|v| *v /= s);
            }
            (g, y)
        })
    })
}

fn reverse_perm(n: usize) -> Vec<usize> {
    (0..n).rev().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_hot_expectation_is_exact((g, parts) in with_assignment(20, 3)) {
        let a = HardAssignment::new(parts, 3).unwrap();
        let exact = exact_ncut(&g, &a).unwrap();
        let expected = expected_ncut_value(&LossGraph::new(&g), &a.one_hot(), LossPath::Sparse).unwrap();
        prop_assert!((exact - expected).abs() < 1e-9);
    }

    #[test]
    fn relabeling_nodes_keeps_scores((g, parts) in with_assignment(20, 3)) {
        let n = g.num_nodes();
        let perm = reverse_perm(n);
        let a = HardAssignment::new(parts.clone(), 3).unwrap();
        let mut moved = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            moved[p] = parts[i];
        }
        let b = HardAssignment::new(moved, 3).unwrap();
        let h = g.permuted(&perm).unwrap();
        prop_assert!((exact_ncut(&g, &a).unwrap() - exact_ncut(&h, &b).unwrap()).abs() < 1e-9);
        prop_assert!((edge_cut_ratio(&g, &a).unwrap() - edge_cut_ratio(&h, &b).unwrap()).abs() < 1e-12);
        prop_assert_eq!(a.sizes(), b.sizes());
    }

    #[test]
    fn expected_ncut_is_bounded((g, y) in with_soft(25, 4)) {
        let lg = LossGraph::new(&g).with_dense();
        let sparse = expected_ncut_value(&lg, &y, LossPath::Sparse).unwrap();
        let dense = expected_ncut_value(&lg, &y, LossPath::Dense).unwrap();
        prop_assert!((-1e-12..=4.0 + 1e-12).contains(&sparse));
        prop_assert!((sparse - dense).abs() < 1e-10);
        prop_assert!(balance_error_value(&y).unwrap() >= 0.0);
    }

    #[test]
    fn metrics_stay_in_range((g, parts) in with_assignment(30, 4)) {
        let a = HardAssignment::new(parts, 4).unwrap();
        let cut = edge_cut_ratio(&g, &a).unwrap();
        let bal = balancedness(&a);
        prop_assert!((0.0..=1.0).contains(&cut));
        prop_assert!(bal > 0.0 && bal <= 1.0);
    }

    #[test]
    fn oracle_lower_bounds_every_assignment((g, parts) in with_assignment(9, 2)) {
        // the oracle only ranks assignments that use every partition
        prop_assume!(parts.contains(&0) && parts.contains(&1));
        let oracle = brute_force_min_ncut(&g, 2, false).unwrap();
        let a = HardAssignment::new(parts, 2).unwrap();
        prop_assert!(oracle.ncut <= exact_ncut(&g, &a).unwrap() + 1e-12);
        let spectral = spectral_partition(&g, 2, 0).unwrap();
        prop_assert!(oracle.ncut <= exact_ncut(&g, &spectral).unwrap() + 1e-12);
    }
}

fn spec(embedding: EmbeddingKind, parts: usize) -> ModelSpec {
    ModelSpec {
        partitions: parts,
        embedding,
        embedding_mode: EmbeddingMode::Trained,
        hidden: 6,
        sage_steps: 2,
        shared_pooling: false,
        neighbor_sample: NeighborSample::All,
        projection_bias: ProjectionBias::Agg,
        head_layers: vec![5],
        features: FeatureSpec::Pca { dim: 4 },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn probabilities_are_row_stochastic(g in graph_strategy(30), seed in any::<u64>(), sage in any::<bool>()) {
        let kind = if sage { EmbeddingKind::Sage } else { EmbeddingKind::Gcn };
        let model = GapModel::new(spec(kind, 3), seed).unwrap();
        let out = model.infer(&g).unwrap();
        for r in 0..g.num_nodes() {
            let row = out.probabilities.row(r);
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        prop_assert_eq!(out.assignment.len(), g.num_nodes());
    }

    #[test]
    fn checkpoints_round_trip(g in graph_strategy(20), seed in any::<u64>()) {
        let model = GapModel::new(spec(EmbeddingKind::Sage, 2), seed).unwrap();
        let bytes = encode_checkpoint(&model, None, Some("fp")).unwrap();
        let back = decode_checkpoint(&bytes).unwrap();
        prop_assert_eq!(back.meta.config_fingerprint.as_deref(), Some("fp"));
        prop_assert_eq!(back.model.spec(), model.spec());
        let before = model.infer(&g).unwrap().probabilities;
        let after = back.model.infer(&g).unwrap().probabilities;
        prop_assert_eq!(before.data(), after.data());
        prop_assert_eq!(encode_checkpoint(&back.model, None, Some("fp")).unwrap(), bytes);
    }
}
