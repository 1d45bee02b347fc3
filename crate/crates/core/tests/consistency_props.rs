mod common;

use nalgebra::DVector;
use proptest::prelude::*;
use qddc::consistency::{
    build_polytope, contains_plant, generate_dataset, prune_redundant, widen_noise, Dataset, Excitation,
};
use qddc::experiments::{partition_coarse, sys1};
use qddc::linalg::plant_vector;
use qddc::lp::check_containment_farkas;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Each row evaluated at `(A, B)` equals the predicted successor
    /// coordinate, signed by the side of the bound.
    #[test]
    fn rows_are_the_predicted_transitions(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=2, t in 1usize..6) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, n, m);
        let ds = common::blurred_dataset(&sys, &mut rng, t, 0.3);
        let p = build_polytope(&ds).unwrap();
        prop_assert_eq!(p.faces(), 2 * n * t);
        let z = plant_vector(sys.a(), sys.b());
        for (s_idx, s) in ds.samples.iter().enumerate() {
            let pred = sys.a() * DVector::from_column_slice(&s.x) + sys.b() * DVector::from_column_slice(&s.u);
            for i in 0..n {
                let lower = s_idx * n + i;
                let upper = n * t + s_idx * n + i;
                prop_assert!((p.row_dot(upper, &z) - pred[i]).abs() <= 1e-12 * (1.0 + pred[i].abs()));
                prop_assert!((p.row_dot(lower, &z) + pred[i]).abs() <= 1e-12 * (1.0 + pred[i].abs()));
                prop_assert_eq!(p.h()[upper], s.q[i]);
                prop_assert_eq!(p.h()[lower], -s.p[i]);
            }
        }
        prop_assert!(contains_plant(&p, sys.a(), sys.b()).unwrap());
    }

    #[test]
    fn widening_only_grows_the_polytope(seed in any::<u64>(), eps in 0.0..0.5f64) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, 2, 1);
        let ds = common::blurred_dataset(&sys, &mut rng, 8, 0.2);
        let tight = build_polytope(&ds).unwrap();
        let wide = build_polytope(&widen_noise(&ds, eps).unwrap()).unwrap();
        prop_assert!(check_containment_farkas(&tight, &wide).unwrap());
    }

    #[test]
    fn more_data_nests_the_polytope(seed in any::<u64>(), t1 in 1usize..6, extra in 1usize..6) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, 2, 1);
        let ds = common::blurred_dataset(&sys, &mut rng, t1 + extra, 0.4);
        let small = build_polytope(&ds.prefix(t1)).unwrap();
        let large = build_polytope(&ds).unwrap();
        prop_assert!(check_containment_farkas(&large, &small).unwrap());
    }

    #[test]
    fn pruning_preserves_the_set(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, 2, 1);
        let ds = common::blurred_dataset(&sys, &mut rng, 12, 0.5);
        let p = build_polytope(&ds).unwrap();
        let pruned = prune_redundant(&p).unwrap();
        prop_assert!(pruned.faces() <= p.faces());
        prop_assert!(check_containment_farkas(&p, &pruned).unwrap());
        prop_assert!(check_containment_farkas(&pruned, &p).unwrap());
        prop_assert!(contains_plant(&pruned, sys.a(), sys.b()).unwrap());
    }
}

#[test]
fn generated_data_is_reproducible_and_consistent() {
    let sys = sys1();
    let part = partition_coarse();
    let a = generate_dataset(&sys, &part, 100, 1, &Excitation::default()).unwrap();
    let b = generate_dataset(&sys, &part, 100, 1, &Excitation::default()).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.len(), 100);
    let p = build_polytope(&a).unwrap();
    assert!(contains_plant(&p, sys.a(), sys.b()).unwrap());

    let back = Dataset::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(back.to_json().unwrap(), a.to_json().unwrap());

    let c = generate_dataset(&sys, &part, 100, 2, &Excitation::default()).unwrap();
    assert_ne!(a.to_json().unwrap(), c.to_json().unwrap());
}

#[test]
fn noisy_data_still_contains_the_truth() {
    let sys = sys1();
    let exc = Excitation {
        noise: 0.05,
        ..Excitation::default()
    };
    for seed in 0..5 {
        let ds = generate_dataset(&sys, &partition_coarse(), 40, seed, &exc).unwrap();
        assert_eq!(ds.epsilon, 0.05);
        let p = build_polytope(&ds).unwrap();
        assert!(contains_plant(&p, sys.a(), sys.b()).unwrap());
    }
}

#[test]
fn empty_dataset_file_round_trips() {
    let ds = generate_dataset(&sys1(), &partition_coarse(), 0, 3, &Excitation::default()).unwrap();
    assert!(ds.is_empty());
    let back = Dataset::from_json(&ds.to_json().unwrap()).unwrap();
    assert!(back.is_empty());
    assert!(build_polytope(&back).is_err());
}
