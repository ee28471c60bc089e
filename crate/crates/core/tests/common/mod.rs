//! Independent oracles for the integration suite.
//!
//! Everything here deliberately avoids the library's own shortcuts: the MLP
//! oracle is plain nested loops, the Hamiltonian oracle applies raw
//! second-quantized operator strings term by term with no matrix-element
//! case analysis, and the orbit partition is brute force over all tuples.
#![allow(dead_code)]

use std::collections::HashMap;

use ndarray::Array2;
use vnet_core::{InteractionTensor2B, Key4, Mlp, OneBodyTensor, Symmetry};

/// Straightforward re-evaluation of the orbital network: explicit loops,
/// locally defined activation.
pub fn naive_mlp_forward(net: &Mlp, input: &[f64]) -> Vec<f64> {
    let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
    let n_layers = net.weights.len();
    let mut h: Vec<f64> = input.to_vec();
    for (k, (w, b)) in net.weights.iter().zip(&net.biases).enumerate() {
        let (rows, cols) = (w.shape()[0], w.shape()[1]);
        assert_eq!(cols, h.len());
        let mut z = vec![0.0; rows];
        for i in 0..rows {
            let mut acc = b[i];
            for j in 0..cols {
                acc += w[[i, j]] * h[j];
            }
            z[i] = acc;
        }
        h = if k + 1 == n_layers {
            z
        } else {
            z.iter().map(|&x| x * sigmoid(x)).collect()
        };
    }
    h
}

/// Applies a_P to a Fock state, with the sign from anticommuting past the
/// occupied modes below P, counted one bit at a time.
fn fock_annihilate(state: u64, p: usize) -> Option<(u64, f64)> {
    if state & (1u64 << p) == 0 {
        return None;
    }
    let mut sign = 1.0;
    for b in 0..p {
        if state & (1u64 << b) != 0 {
            sign = -sign;
        }
    }
    Some((state & !(1u64 << p), sign))
}

/// Applies a†_P; same sign rule, occupied target forbidden.
fn fock_create(state: u64, p: usize) -> Option<(u64, f64)> {
    if state & (1u64 << p) != 0 {
        return None;
    }
    let mut sign = 1.0;
    for b in 0..p {
        if state & (1u64 << b) != 0 {
            sign = -sign;
        }
    }
    Some((state | (1u64 << p), sign))
}

/// Applies a full operator string (rightmost factor first) to one state.
/// `ops`: (mode, create?) from left to right as written in the Hamiltonian.
fn apply_string(state: u64, ops: &[(usize, bool)]) -> Option<(u64, f64)> {
    let mut s = state;
    let mut sign = 1.0;
    for &(mode, create) in ops.iter().rev() {
        let step = if create {
            fock_create(s, mode)
        } else {
            fock_annihilate(s, mode)
        }?;
        s = step.0;
        sign *= step.1;
    }
    Some((s, sign))
}

/// Brute-force sector Hamiltonian:
///
///   H = E0 + Σ_PQ g_PQ a†_P a_Q + 1/2 Σ_PQRS <PQ|RS> a†_P a†_Q a_S a_R
///
/// with spin orbitals P = 2p + σ, g_PQ = h_pq δ_σσ', and the physicist
/// integral <PQ|RS> = (pr|qs) δ_{σPσR} δ_{σQσS} read straight from the
/// chemist-ordered spatial tensor. Every index combination is applied as an
/// operator string; no excitation-rank shortcut anywhere.
pub fn fock_oracle_matrix(
    two_body: &InteractionTensor2B,
    one_body: &OneBodyTensor,
    scalar: f64,
    basis: &[u64],
) -> Array2<f64> {
    let n_spin = 2 * two_body.n_act();
    let row_of: HashMap<u64, usize> = basis.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    let mut h = Array2::zeros((basis.len(), basis.len()));
    for (col, &det) in basis.iter().enumerate() {
        let mut acc: HashMap<u64, f64> = HashMap::new();
        *acc.entry(det).or_insert(0.0) += scalar;
        for pp in 0..n_spin {
            for qq in 0..n_spin {
                if pp % 2 != qq % 2 {
                    continue;
                }
                let g = one_body.values()[[pp / 2, qq / 2]];
                if let Some((s, sign)) = apply_string(det, &[(pp, true), (qq, false)]) {
                    *acc.entry(s).or_insert(0.0) += sign * g;
                }
            }
        }
        for pp in 0..n_spin {
            for qq in 0..n_spin {
                for rr in 0..n_spin {
                    if pp % 2 != rr % 2 {
                        continue;
                    }
                    for ss in 0..n_spin {
                        if qq % 2 != ss % 2 {
                            continue;
                        }
                        let v = two_body.value([pp / 2, rr / 2, qq / 2, ss / 2]);
                        let string = [(pp, true), (qq, true), (ss, false), (rr, false)];
                        if let Some((s, sign)) = apply_string(det, &string) {
                            *acc.entry(s).or_insert(0.0) += 0.5 * sign * v;
                        }
                    }
                }
            }
        }
        for (state, coeff) in acc {
            if coeff == 0.0 {
                continue;
            }
            let row = *row_of
                .get(&state)
                .expect("H conserves particle number and spin projection");
            h[[row, col]] += coeff;
        }
    }
    h
}

/// Plain-loop error metrics over all dense entries of two equal-shape
/// tensors: (max |Δ|, mean Δ²).
pub fn naive_tensor_errors(a: &InteractionTensor2B, b: &InteractionTensor2B) -> (f64, f64) {
    let n = a.n_act();
    assert_eq!(n, b.n_act());
    let mut max_abs = 0.0f64;
    let mut sq_sum = 0.0;
    let mut count = 0.0;
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let d = a.value([p, q, r, s]) - b.value([p, q, r, s]);
                    max_abs = max_abs.max(d.abs());
                    sq_sum += d * d;
                    count += 1.0;
                }
            }
        }
    }
    (max_abs, sq_sum / count)
}

/// Brute-force orbit partition: group all n⁴ tuples by the explicit image
/// lists of the two symmetry classes and return the lexicographic minimum of
/// each group, sorted.
pub fn brute_force_canonical_unit(n: usize, class: Symmetry) -> Vec<Key4> {
    let images = |[p, q, r, s]: Key4| -> Vec<Key4> {
        match class {
            Symmetry::Fourfold => {
                vec![[p, q, r, s], [r, s, p, q], [q, p, s, r], [s, r, q, p]]
            }
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
        }
    };
    let mut reps = std::collections::BTreeSet::new();
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let min = images([p, q, r, s]).into_iter().min().unwrap();
                    reps.insert(min);
                }
            }
        }
    }
    reps.into_iter().collect()
}
