//! Property tests for the algebraic invariants that hold on arbitrary
//! inputs, not just the fixed fixtures of the unit tests.

use proptest::prelude::*;

use pmlp_core::dataset::{csbm_generate, CsbmParams};
use pmlp_core::graph::{build_graph, perturb, propagate, transition_matrix, Perturbation};
use pmlp_core::matrix::{xavier_init, DenseMatrix};
use pmlp_core::nn::argmax_row;
use pmlp_core::{Rng, Scheme};

fn arb_graph(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2..max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
            .collect();
        let len = pairs.len();
        (Just(n), proptest::sample::subsequence(pairs, 0..=len))
    })
}

proptest! {
    #[test]
    fn propagate_is_linear((n, edges) in arb_graph(12), seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let g = build_graph(n, &edges).unwrap();
        let t = transition_matrix(&g, Scheme::Rw, 0).unwrap();
        let mut rng = Rng::from_seed(seed);
        let h1 = DenseMatrix::from_fn(n, 2, |_, _| rng.normal());
        let h2 = DenseMatrix::from_fn(n, 2, |_, _| rng.normal());
        let mut combined = h1.clone();
        combined.scale(a);
        combined.add_scaled(&h2, b).unwrap();
        let lhs = propagate(&t, &combined, 0.0, None).unwrap();
        let mut rhs = propagate(&t, &h1, 0.0, None).unwrap();
        rhs.scale(a);
        rhs.add_scaled(&propagate(&t, &h2, 0.0, None).unwrap(), b).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-9);
    }

    #[test]
    fn symmetric_operator_equals_its_transpose((n, edges) in arb_graph(16)) {
        let g = build_graph(n, &edges).unwrap();
        let dense = transition_matrix(&g, Scheme::Sym, 0).unwrap().to_dense();
        prop_assert!(dense.max_abs_diff(&dense.transpose()) == 0.0);
    }

    #[test]
    fn perturbation_is_deterministic_and_sized((n, edges) in arb_graph(10), ratio in 0.0f64..1.0, seed in 0u64..500) {
        let g = build_graph(n, &edges).unwrap();
        let e = g.num_edges();
        let noisy = perturb(&g, Perturbation::AddNoise, ratio, seed).unwrap();
        let again = perturb(&g, Perturbation::AddNoise, ratio, seed).unwrap();
        prop_assert_eq!(&noisy, &again);
        let possible = n * (n - 1) / 2 - e;
        let want = ((ratio * e as f64) as usize).min(possible);
        prop_assert_eq!(noisy.num_edges(), e + want);

        let kept = perturb(&g, Perturbation::Sparsify, ratio, seed).unwrap();
        prop_assert_eq!(kept.num_edges(), (ratio * e as f64).ceil() as usize);
        for edge in kept.edges() {
            prop_assert!(g.edges().contains(edge));
        }
    }

    #[test]
    fn argmax_is_shift_invariant(row in proptest::collection::vec(-1e3f64..1e3, 1..8), shift in -1e3f64..1e3) {
        let shifted: Vec<f64> = row.iter().map(|v| v + shift).collect();
        prop_assert_eq!(argmax_row(&row), argmax_row(&shifted));
    }

    #[test]
    fn xavier_entries_respect_the_bound(fan_in in 1usize..20, fan_out in 1usize..20, seed in 0u64..100) {
        let mut rng = Rng::from_seed(seed);
        let m = xavier_init(&mut rng, fan_in, fan_out);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        prop_assert!(m.data().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn csbm_split_parts_partition_correctly(seed in 0u64..40) {
        let ds = csbm_generate(&CsbmParams {
            n: 90,
            num_classes: 2,
            intra_p: 0.1,
            inter_q: 0.02,
            feature_dim: 3,
            feature_signal: 1.0,
            seed,
        }).unwrap();
        let split = &ds.split;
        let mut seen = vec![0u8; ds.n()];
        for part in [&split.train_ids, &split.valid_ids, &split.test_ids] {
            for &id in part {
                seen[id] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        // Train graph edges all have train endpoints and exist in the graph.
        for &(u, v) in split.train_graph.edges() {
            prop_assert!(split.train_ids.contains(&u) && split.train_ids.contains(&v));
            prop_assert!(split.full_graph.edges().contains(&(u, v)));
        }
    }
}
