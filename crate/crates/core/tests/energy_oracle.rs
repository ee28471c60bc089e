//! The determinant-space Hamiltonian against a brute-force second-quantized
//! oracle, and the energy decomposition on the synthetic benchmark.

mod common;

use ndarray::{Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vnet_core::energy::{
    build_hamiltonian, energy_report, enumerate_determinants, ground_energy, reference_energy,
    spatial_to_spin,
};
use vnet_core::linalg::jacobi_eigh;
use vnet_core::synth::{gen_synthetic, SynthConfig};
use vnet_core::{InteractionTensor2B, OneBodyTensor, Symmetry, TensorKind};

fn random_system(n: usize, seed: u64) -> (InteractionTensor2B, OneBodyTensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two =
        InteractionTensor2B::from_canonical(n, Symmetry::Eightfold, TensorKind::Bare, 1.0, |_| {
            rng.gen_range(-1.0..1.0)
        })
        .unwrap();
    let mut m = Array2::zeros((n, n));
    for p in 0..n {
        for q in 0..=p {
            let v = rng.gen_range(-1.0..1.0);
            m[[p, q]] = v;
            m[[q, p]] = v;
        }
    }
    (two, OneBodyTensor::new(m, 1.0).unwrap())
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn two_orbital_hamiltonian_matches_operator_algebra_oracle() {
    let (two, one) = random_system(2, 7);
    let h = spatial_to_spin(&two, &one, 0.3).unwrap();
    let basis = enumerate_determinants(2, 2, 0).unwrap();
    assert_eq!(basis.len(), 4);
    let built = build_hamiltonian(&h, &basis).unwrap();
    let oracle = common::fock_oracle_matrix(&two, &one, 0.3, &basis);
    assert!(max_abs_diff(&built, &oracle) <= 1e-12, "matrix mismatch");
}

#[test]
fn three_orbital_sectors_match_operator_algebra_oracle() {
    for seed in [1, 2, 3] {
        let (two, one) = random_system(3, seed);
        let h = spatial_to_spin(&two, &one, -0.5).unwrap();
        for (n_elec, ms2) in [(2, 0), (2, 2), (3, 1), (3, -1), (4, 0), (5, 1)] {
            let basis = enumerate_determinants(3, n_elec, ms2).unwrap();
            let built = build_hamiltonian(&h, &basis).unwrap();
            let oracle = common::fock_oracle_matrix(&two, &one, -0.5, &basis);
            assert!(
                max_abs_diff(&built, &oracle) <= 1e-12,
                "sector ({n_elec},{ms2}) seed {seed}"
            );
        }
    }
}

#[test]
fn ground_energy_agrees_with_direct_diagonalization_of_the_oracle() {
    let (two, one) = random_system(3, 11);
    let h = spatial_to_spin(&two, &one, 0.0).unwrap();
    let basis = enumerate_determinants(3, 3, 1).unwrap();
    let oracle = common::fock_oracle_matrix(&two, &one, 0.0, &basis);
    let eig = jacobi_eigh(&oracle, false).unwrap();
    let ground = ground_energy(&h, 3, 1).unwrap();
    assert!((ground.energy - eig.eigenvalues[0]).abs() <= 1e-10);
    assert_eq!(ground.dim, basis.len());
}

/// A fully decoupled pair of electrons in a diagonal model: H = Σ ε_p n_p +
/// U n_0↑ n_0↓ has known closed-form sector minima.
#[test]
fn diagonal_hubbard_atom_reproduces_closed_form_energies() {
    let n = 2;
    let (eps0, eps1, u) = (-1.0, 0.4, 0.8);
    let mut values = Array4::zeros((n, n, n, n));
    values[[0, 0, 0, 0]] = u;
    let two = InteractionTensor2B::new(values, Symmetry::Eightfold, TensorKind::Bare, 1.0).unwrap();
    let mut m = Array2::zeros((n, n));
    m[[0, 0]] = eps0;
    m[[1, 1]] = eps1;
    let one = OneBodyTensor::new(m, 1.0).unwrap();
    let h = spatial_to_spin(&two, &one, 0.0).unwrap();

    // Two electrons, S_z = 0: min(2ε0 + U, ε0 + ε1, 2ε1).
    let g = ground_energy(&h, 2, 0).unwrap();
    let expected = (2.0 * eps0 + u).min(eps0 + eps1).min(2.0 * eps1);
    assert!((g.energy - expected).abs() <= 1e-12);

    // Triplet sector has no double occupancy: ε0 + ε1 exactly.
    let g = ground_energy(&h, 2, 2).unwrap();
    assert!((g.energy - (eps0 + eps1)).abs() <= 1e-12);
}

#[test]
fn synthetic_benchmark_energies_are_variational_and_correlation_negative() {
    let cfg = SynthConfig::defaults(3, vec![1.0, 1.6, 2.2]);
    let (bare, eff) = gen_synthetic(&cfg).unwrap();
    for series in [&bare, &eff] {
        let reports = energy_report(series, 2, 0).unwrap();
        assert_eq!(reports.len(), 3);
        for rep in reports {
            assert!(rep.e_total <= rep.e_ref + 1e-10, "variational bound");
            assert!(rep.e_corr <= 1e-10, "correlation lowers the energy");
            assert!((rep.e_total - (rep.e_ref + rep.e_corr)).abs() <= 1e-12);
        }
    }
}

#[test]
fn oracle_matrix_is_symmetric_for_symmetric_inputs() {
    let (two, one) = random_system(3, 23);
    let basis = enumerate_determinants(3, 4, 0).unwrap();
    let oracle = common::fock_oracle_matrix(&two, &one, 0.1, &basis);
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            assert!((oracle[[i, j]] - oracle[[j, i]]).abs() <= 1e-12);
        }
    }
}

#[test]
fn reference_energy_is_a_diagonal_matrix_element_of_the_oracle() {
    let (two, one) = random_system(3, 31);
    let h = spatial_to_spin(&two, &one, 0.0).unwrap();
    let basis = enumerate_determinants(3, 4, 0).unwrap();
    let oracle = common::fock_oracle_matrix(&two, &one, 0.0, &basis);
    let e_ref = reference_energy(&h, 4, 0).unwrap();
    let aufbau = vnet_core::energy::reference_determinant(3, 4, 0).unwrap();
    let row = basis.iter().position(|&d| d == aufbau).unwrap();
    assert!((e_ref - oracle[[row, row]]).abs() <= 1e-12);
}
