//! Property tests for the pipeline invariants.

use mmfs_core::{
    data, eval, markov, select, DataMatrix, Orientation, SelectionResult, Variant,
};
use ndarray::Array2;
use proptest::prelude::*;

fn data_matrix_strategy(
    max_d: usize,
    max_n: usize,
) -> impl Strategy<Value = DataMatrix> {
    (1..=max_d, 2..=max_n)
        .prop_flat_map(|(d, n)| {
            prop::collection::vec(-100.0f64..100.0, d * n)
                .prop_map(move |values| (d, n, values))
        })
        .prop_map(|(d, n, values)| {
            let array = Array2::from_shape_vec((d, n), values).unwrap();
            DataMatrix::from_values(array).unwrap()
        })
}

fn labels_strategy(len: usize, classes: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..classes, len)
}

/// Sum over all length-t paths of edge-probability products.
fn path_sum(p: &Array2<f64>, t: usize, i: usize, j: usize) -> f64 {
    if t == 1 {
        return p[[i, j]];
    }
    (0..p.nrows())
        .filter(|&v| p[[i, v]] > 0.0)
        .map(|v| p[[i, v]] * path_sum(p, t - 1, v, j))
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transition_rows_are_stochastic_with_knn_support(
        x in data_matrix_strategy(4, 10),
        k_frac in 0.0f64..1.0,
        alpha in 1e-9f64..1e-2,
    ) {
        let n = x.instance_count();
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let k = k.min(n - 1);
        let dist = markov::pairwise_distances(&x);
        let graph = markov::knn_mask(&dist, k).unwrap();
        let p = markov::one_step_transition(&dist, &graph, alpha).unwrap();
        for i in 0..n {
            let row = p.values().row(i);
            prop_assert!((row.sum() - 1.0).abs() < 1e-10);
            prop_assert_eq!(row[i], 0.0);
            for j in 0..n {
                let is_neighbor = graph.neighbors(i).contains(&j);
                prop_assert_eq!(row[j] > 0.0, is_neighbor);
            }
        }
    }

    #[test]
    fn transition_is_scale_invariant(
        x in data_matrix_strategy(3, 8),
        scale in 1e-3f64..1e3,
    ) {
        let n = x.instance_count();
        let k = (n - 1).min(3);
        let dist = markov::pairwise_distances(&x);
        let graph = markov::knn_mask(&dist, k).unwrap();
        let p = markov::one_step_transition(&dist, &graph, 1e-6).unwrap();

        let scaled = markov::DistanceMatrix::new(dist.values() * scale).unwrap();
        let graph2 = markov::knn_mask(&scaled, k).unwrap();
        let p2 = markov::one_step_transition(&scaled, &graph2, 1e-6).unwrap();
        for (a, b) in p.values().iter().zip(p2.values()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn powers_states_and_reachability_order(
        x in data_matrix_strategy(3, 8),
        n_steps in 1usize..=6,
    ) {
        let n = x.instance_count();
        let k = (n - 1).min(2);
        let dist = markov::pairwise_distances(&x);
        let graph = markov::knn_mask(&dist, k).unwrap();
        let p = markov::one_step_transition(&dist, &graph, 1e-6).unwrap();
        let powers = markov::multi_step_transitions(&p, n_steps).unwrap();
        for power in &powers {
            for row in power.rows() {
                prop_assert!((row.sum() - 1.0).abs() < 1e-8);
            }
        }
        let v1 = markov::min_reachability(&powers, n_steps).unwrap();
        let v2 = markov::max_reachability(&powers, n_steps).unwrap();
        for i in 0..n {
            prop_assert_eq!(v1.values()[[i, i]], 0.0);
            prop_assert_eq!(v2.values()[[i, i]], 0.0);
            for j in 0..n {
                let lo = v1.values()[[i, j]];
                let hi = v2.values()[[i, j]];
                prop_assert!(lo <= hi);
                // identical support
                prop_assert_eq!(lo > 0.0, hi > 0.0);
            }
        }
    }

    #[test]
    fn small_powers_match_path_enumeration(
        x in data_matrix_strategy(3, 6),
        t in 1usize..=4,
    ) {
        let n = x.instance_count();
        let k = (n - 1).min(2);
        let dist = markov::pairwise_distances(&x);
        let graph = markov::knn_mask(&dist, k).unwrap();
        let p = markov::one_step_transition(&dist, &graph, 1e-6).unwrap();
        let powers = markov::multi_step_transitions(&p, t).unwrap();
        for i in 0..n {
            for j in 0..n {
                let brute = path_sum(p.values(), t, i, j);
                prop_assert!((powers[t - 1][[i, j]] - brute).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ranking_is_invariant_under_uniform_score_scaling(
        scores in prop::collection::vec(0.0f64..100.0, 2..20),
        scale in 1e-6f64..1e6,
        ascending in any::<bool>(),
    ) {
        let d = scores.len();
        let names: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
        let variant = if ascending { Variant::MinP } else { Variant::MaxP };
        let base = SelectionResult::from_scores(variant, scores.clone(), names.clone(), d).unwrap();
        let scaled: Vec<f64> = scores.iter().map(|v| v * scale).collect();
        let rescored = SelectionResult::from_scores(variant, scaled, names, d).unwrap();
        prop_assert_eq!(base.ranking, rescored.ranking);
    }

    #[test]
    fn inter_output_is_exact_size_and_contains_intersection(
        max_scores in prop::collection::vec(0.0f64..100.0, 4..16),
        min_seed in any::<u64>(),
        s_frac in 0.0f64..1.0,
    ) {
        let d = max_scores.len();
        let names: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
        // derive a second score vector deterministically but differently
        let min_scores: Vec<f64> = max_scores
            .iter()
            .enumerate()
            .map(|(i, v)| (v * 31.0 + (min_seed.wrapping_add(i as u64) % 97) as f64) % 100.0)
            .collect();
        let s = 1 + (s_frac * (d - 1) as f64) as usize;
        let rmax = SelectionResult::from_scores(Variant::MaxP, max_scores, names.clone(), s).unwrap();
        let rmin = SelectionResult::from_scores(Variant::MinP, min_scores, names, s).unwrap();
        let combined = select::select_inter(&rmin, &rmax, s).unwrap();

        prop_assert_eq!(combined.selected.len(), s);
        let unique: std::collections::HashSet<usize> = combined.selected.iter().copied().collect();
        prop_assert_eq!(unique.len(), s);
        let intersection: Vec<usize> = rmax
            .selected
            .iter()
            .copied()
            .filter(|i| rmin.selected.contains(i))
            .collect();
        if intersection.len() <= s {
            for idx in &intersection {
                prop_assert!(unique.contains(idx));
            }
        }
        // full ranking is a permutation
        let mut ranking = combined.ranking.clone();
        ranking.sort_unstable();
        prop_assert_eq!(ranking, (0..d).collect::<Vec<_>>());
    }

    #[test]
    fn acc_is_relabeling_invariant(
        truth in labels_strategy(12, 3),
        predicted in labels_strategy(12, 3),
        perm_pick in 0usize..6,
    ) {
        let perms: [[usize; 3]; 6] = [
            [0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0],
        ];
        let perm = perms[perm_pick];
        let base = eval::hungarian_acc(&predicted, &truth).unwrap();
        let relabeled: Vec<usize> = predicted.iter().map(|&l| perm[l]).collect();
        let after = eval::hungarian_acc(&relabeled, &truth).unwrap();
        prop_assert!((base - after).abs() < 1e-12);
        // also invariant when relabeling the truth side
        let truth_relabeled: Vec<usize> = truth.iter().map(|&l| perm[l]).collect();
        let after_truth = eval::hungarian_acc(&predicted, &truth_relabeled).unwrap();
        prop_assert!((base - after_truth).abs() < 1e-12);
    }

    #[test]
    fn acc_at_least_identity_fraction(
        truth in labels_strategy(10, 3),
        predicted in labels_strategy(10, 3),
    ) {
        let identity_matches = truth
            .iter()
            .zip(&predicted)
            .filter(|(t, p)| t == p)
            .count() as f64
            / truth.len() as f64;
        let acc = eval::hungarian_acc(&predicted, &truth).unwrap();
        prop_assert!(acc >= identity_matches - 1e-12);
    }

    #[test]
    fn nmi_symmetric_and_bounded(
        a in labels_strategy(14, 4),
        b in labels_strategy(14, 4),
    ) {
        let ab = eval::nmi(&a, &b).unwrap();
        let ba = eval::nmi(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn csv_round_trip(
        x in data_matrix_strategy(4, 8),
        label_pool in prop::collection::vec("[a-z]{1,4}", 1..4),
        with_labels in any::<bool>(),
    ) {
        let n = x.instance_count();
        let labels = if with_labels {
            Some((0..n).map(|i| label_pool[i % label_pool.len()].clone()).collect())
        } else {
            None
        };
        let ds = mmfs_core::LabeledDataset::with_label_name(
            x,
            labels,
            with_labels.then(|| "y".to_string()),
        ).unwrap();
        let mut buf = Vec::new();
        data::write_csv(&ds, &mut buf).unwrap();
        let reloaded = data::load_csv_from_reader(
            buf.as_slice(),
            with_labels.then_some("y"),
            Orientation::RowsAreInstances,
        ).unwrap();
        prop_assert_eq!(&reloaded.data, &ds.data);
        prop_assert_eq!(reloaded.labels(), ds.labels());
    }
}
