//! Property tests for the index-symmetry algebra and tensor containers.

use proptest::prelude::*;
use vnet_core::{
    canonical_key, canonical_unit, symmetry_orbit, InteractionTensor2B, Key4, Symmetry, TensorKind,
};

fn key_strategy(n: usize) -> impl Strategy<Value = Key4> {
    [0..n, 0..n, 0..n, 0..n]
}

fn class_strategy() -> impl Strategy<Value = Symmetry> {
    prop_oneof![Just(Symmetry::Eightfold), Just(Symmetry::Fourfold)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn canonicalization_is_idempotent_and_minimal(key in key_strategy(8), class in class_strategy()) {
        let canon = canonical_key(key, class);
        prop_assert_eq!(canonical_key(canon, class), canon);
        let orbit = symmetry_orbit(key, class);
        prop_assert!(orbit.contains(&key));
        prop_assert!(orbit.contains(&canon));
        prop_assert_eq!(canon, orbit.iter().copied().min().unwrap());
    }

    #[test]
    fn orbits_partition_consistently(key in key_strategy(6), class in class_strategy()) {
        let orbit = symmetry_orbit(key, class);
        let group_order = match class { Symmetry::Eightfold => 8, Symmetry::Fourfold => 4 };
        prop_assert!(group_order % orbit.len() == 0, "orbit size divides the group order");
        // Every member generates the same orbit set and the same canonical key.
        let mut sorted = orbit.clone();
        sorted.sort_unstable();
        for &member in &orbit {
            let mut other = symmetry_orbit(member, class);
            other.sort_unstable();
            prop_assert_eq!(&other, &sorted);
            prop_assert_eq!(canonical_key(member, class), canonical_key(key, class));
        }
    }

    #[test]
    fn replicated_tensors_pass_validation_and_read_back_canonically(
        n in 2usize..5,
        class in class_strategy(),
        seed in 0u64..1000,
    ) {
        // Pseudo-random but deterministic canonical values.
        let t = InteractionTensor2B::from_canonical(n, class, TensorKind::Bare, 1.0, |[p, q, r, s]| {
            let mix = seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add((p + q * 7 + r * 49 + s * 343) as u64);
            (mix % 1000) as f64 / 500.0 - 1.0
        }).unwrap();
        prop_assert_eq!(t.symmetry_deviation().0, 0.0);
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let key = [p, q, r, s];
                        prop_assert_eq!(t.value(key), t.value(canonical_key(key, class)));
                    }
                }
            }
        }
    }
}

#[test]
fn canonical_unit_counts_and_orbit_size_sums() {
    // Representative counts fixed by brute-force enumeration.
    assert_eq!(canonical_unit(1, Symmetry::Eightfold).len(), 1);
    assert_eq!(canonical_unit(2, Symmetry::Eightfold).len(), 6);
    assert_eq!(canonical_unit(3, Symmetry::Fourfold).len(), 27);
    assert_eq!(canonical_unit(6, Symmetry::Fourfold).len(), 351);
    assert_eq!(canonical_unit(8, Symmetry::Fourfold).len(), 1072);

    for n in 1..=6 {
        for class in [Symmetry::Eightfold, Symmetry::Fourfold] {
            let unit = canonical_unit(n, class);
            let total: usize = unit.iter().map(|&k| symmetry_orbit(k, class).len()).sum();
            assert_eq!(total, n.pow(4), "orbit sizes tile n^4 for n={n} {class:?}");
            for &k in &unit {
                assert_eq!(canonical_key(k, class), k, "unit members are canonical");
            }
        }
    }
}

#[test]
fn every_eightfold_canonical_key_is_fourfold_canonical() {
    for n in 1..=6 {
        let coarse = canonical_unit(n, Symmetry::Eightfold);
        let fine: std::collections::BTreeSet<Key4> =
            canonical_unit(n, Symmetry::Fourfold).into_iter().collect();
        for k in coarse {
            assert!(fine.contains(&k), "{k:?} at n={n}");
        }
    }
}
