//! Index symmetry of two-body interaction tensors in Mulliken (pq|rs) order.
//!
//! Bare tensors over real orbitals carry the full eight-element index group
//!   (pq|rs) = (qp|rs) = (pq|sr) = (qp|sr) = (rs|pq) = (sr|pq) = (rs|qp) = (sr|qp).
//! Downfolded (effective) tensors keep only the four-element subgroup generated
//! by the pair swap (pq|rs) = (rs|pq) and the simultaneous within-pair swap
//! (pq|rs) = (qp|sr); the individual within-pair swaps are broken.

/// Index tuple (p, q, r, s) in Mulliken order.
pub type Key4 = [usize; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symmetry {
    Eightfold,
    Fourfold,
}

impl Symmetry {
    pub fn group_order(self) -> usize {
        match self {
            Symmetry::Eightfold => 8,
            Symmetry::Fourfold => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Symmetry::Eightfold => "EIGHTFOLD",
            Symmetry::Fourfold => "FOURFOLD",
        }
    }

    /// The group elements applied to a tuple, identity first. May repeat
    /// tuples when indices coincide; `orbit` dedups.
    pub fn images(self, key: Key4) -> Vec<Key4> {
        let [p, q, r, s] = key;
        match self {
            Symmetry::Eightfold => vec![
                [p, q, r, s],
                [q, p, r, s],
                [p, q, s, r],
                [q, p, s, r],
                [r, s, p, q],
                [s, r, p, q],
                [r, s, q, p],
                [s, r, q, p],
            ],
            Symmetry::Fourfold => vec![[p, q, r, s], [r, s, p, q], [q, p, s, r], [s, r, q, p]],
        }
    }
}

/// Distinct tuples reachable from `key`, sorted ascending.
pub fn symmetry_orbit(key: Key4, class: Symmetry) -> Vec<Key4> {
    let mut orbit = class.images(key);
    orbit.sort_unstable();
    orbit.dedup();
    orbit
}

/// Lexicographically smallest member of the orbit; the unique representative.
pub fn canonical_key(key: Key4, class: Symmetry) -> Key4 {
    class
        .images(key)
        .into_iter()
        .min()
        .expect("orbit is never empty")
}

/// All canonical keys for `n_act` orbitals in lexicographic order.
/// Partitions the n_act^4 tuples: every tuple has exactly one representative here.
pub fn canonical_unit(n_act: usize, class: Symmetry) -> Vec<Key4> {
    let mut unit = Vec::new();
    for p in 0..n_act {
        for q in 0..n_act {
            for r in 0..n_act {
                for s in 0..n_act {
                    let key = [p, q, r, s];
                    if canonical_key(key, class) == key {
                        unit.push(key);
                    }
                }
            }
        }
    }
    unit
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourfold_canonical_of_2103() {
        // Orbit: (2,1,0,3), (0,3,2,1), (1,2,3,0), (3,0,1,2); smallest is (0,3,2,1).
        assert_eq!(
            canonical_key([2, 1, 0, 3], Symmetry::Fourfold),
            [0, 3, 2, 1]
        );
        let orbit = symmetry_orbit([2, 1, 0, 3], Symmetry::Fourfold);
        assert_eq!(
            orbit,
            vec![[0, 3, 2, 1], [1, 2, 3, 0], [2, 1, 0, 3], [3, 0, 1, 2]]
        );
    }

    #[test]
    fn diagonal_tuple_is_a_fixed_point() {
        for class in [Symmetry::Eightfold, Symmetry::Fourfold] {
            assert_eq!(symmetry_orbit([1, 1, 1, 1], class), vec![[1, 1, 1, 1]]);
            assert_eq!(canonical_key([1, 1, 1, 1], class), [1, 1, 1, 1]);
        }
    }

    #[test]
    fn orbit_sizes_divide_group_order() {
        for class in [Symmetry::Eightfold, Symmetry::Fourfold] {
            for key in canonical_unit(3, class) {
                let size = symmetry_orbit(key, class).len();
                assert_eq!(class.group_order() % size, 0, "orbit {key:?} size {size}");
            }
        }
    }

    #[test]
    fn single_orbital_unit_is_the_diagonal_tuple() {
        assert_eq!(canonical_unit(1, Symmetry::Eightfold), vec![[0, 0, 0, 0]]);
    }

    #[test]
    fn two_orbital_eightfold_unit_has_six_orbits() {
        // Brute-force partition of the 16 tuples; agrees with M(M+1)/2 for
        // M = n(n+1)/2 pair indices.
        let unit = canonical_unit(2, Symmetry::Eightfold);
        assert_eq!(unit.len(), 6);
        let total: usize = unit
            .iter()
            .map(|&k| symmetry_orbit(k, Symmetry::Eightfold).len())
            .sum();
        assert_eq!(total, 16);
    }

    #[test]
    fn canonical_units_partition_the_index_space() {
        for class in [Symmetry::Eightfold, Symmetry::Fourfold] {
            for n_act in 1..=5 {
                let unit = canonical_unit(n_act, class);
                let total: usize = unit.iter().map(|&k| symmetry_orbit(k, class).len()).sum();
                assert_eq!(total, n_act * n_act * n_act * n_act, "{class:?} n={n_act}");
                // Representatives are canonical and strictly increasing.
                for w in unit.windows(2) {
                    assert!(w[0] < w[1]);
                }
                for &k in &unit {
                    assert_eq!(canonical_key(k, class), k);
                }
            }
        }
    }

    #[test]
    fn fourfold_unit_count_n8_matches_burnside() {
        // (8^4 + 3 * 8^2) / 4 = 1072; bounded below by 8^4 / 4.
        let unit = canonical_unit(8, Symmetry::Fourfold);
        assert_eq!(unit.len(), 1072);
        assert!(unit.len() >= 4096 / 4);
    }

    #[test]
    fn eightfold_canonical_is_fourfold_canonical_refined() {
        // The fourfold group is a subgroup, so the eightfold canonical key of a
        // fourfold-canonical key never sorts above it.
        for key in canonical_unit(4, Symmetry::Fourfold) {
            assert!(canonical_key(key, Symmetry::Eightfold) <= key);
        }
    }
}
