//! Deterministic dense linear algebra: fixed-order slice kernels, a cyclic
//! Jacobi eigensolver, and a Lanczos ground-state solver with full
//! reorthogonalization. Summation orders are fixed so identical inputs give
//! bit-identical results.

use ndarray::Array2;

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x {
        *xi *= alpha;
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// out = W x for row-major W (rows x cols).
pub fn matvec(w: &Array2<f64>, x: &[f64], out: &mut [f64]) {
    let (rows, cols) = w.dim();
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    let data = w.as_slice().expect("standard layout");
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&data[i * cols..(i + 1) * cols], x);
    }
}

/// out = W^T x, accumulated row-wise so memory access stays contiguous.
pub fn matvec_t(w: &Array2<f64>, x: &[f64], out: &mut [f64]) {
    let (rows, cols) = w.dim();
    debug_assert_eq!(x.len(), rows);
    debug_assert_eq!(out.len(), cols);
    let data = w.as_slice().expect("standard layout");
    out.fill(0.0);
    for (i, &xi) in x.iter().enumerate() {
        axpy(xi, &data[i * cols..(i + 1) * cols], out);
    }
}

pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct EighResult {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `eigenvalues`.
    pub vectors: Option<Array2<f64>>,
}

/// Cyclic-by-rows Jacobi eigensolver for symmetric matrices. Converges when
/// the off-diagonal Frobenius norm falls below 1e-14 * ||A||_F; capped at 100
/// sweeps, reporting non-convergence rather than returning a bad answer.
pub fn jacobi_eigh(a: &Array2<f64>, want_vectors: bool) -> Result<EighResult> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::ShapeMismatch("jacobi needs a square matrix".into()));
    }
    if n == 0 {
        return Err(Error::EmptyInput("jacobi on empty matrix".into()));
    }
    let norm = frobenius(a);
    let mut m = a.clone();
    let mut z = want_vectors.then(|| Array2::eye(n));
    let threshold = 1e-14 * norm;
    const MAX_SWEEPS: usize = 100;

    let off = |m: &Array2<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * m[[i, j]] * m[[i, j]];
            }
        }
        s.sqrt()
    };

    let mut converged = norm == 0.0 || off(&m) <= threshold;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let aij = m[[i, j]];
                if aij == 0.0 {
                    continue;
                }
                // Symmetric Schur rotation zeroing m[i][j].
                let tau = (m[[j, j]] - m[[i, i]]) / (2.0 * aij);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mki = m[[k, i]];
                    let mkj = m[[k, j]];
                    m[[k, i]] = c * mki - s * mkj;
                    m[[k, j]] = s * mki + c * mkj;
                }
                for k in 0..n {
                    let mik = m[[i, k]];
                    let mjk = m[[j, k]];
                    m[[i, k]] = c * mik - s * mjk;
                    m[[j, k]] = s * mik + c * mjk;
                }
                if let Some(z) = z.as_mut() {
                    for k in 0..n {
                        let zki = z[[k, i]];
                        let zkj = z[[k, j]];
                        z[[k, i]] = c * zki - s * zkj;
                        z[[k, j]] = s * zki + c * zkj;
                    }
                }
            }
        }
        converged = off(&m) <= threshold;
    }
    if !converged {
        return Err(Error::NonConvergence {
            algorithm: "jacobi",
            limit: MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].total_cmp(&m[[j, j]]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[[i, i]]).collect();
    let vectors = z.map(|z| {
        let mut sorted = Array2::zeros((n, n));
        for (new, &old) in order.iter().enumerate() {
            for k in 0..n {
                sorted[[k, new]] = z[[k, old]];
            }
        }
        sorted
    });
    Ok(EighResult {
        eigenvalues,
        vectors,
    })
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.
fn tridiag_min_eig(alpha: &[f64], beta: &[f64]) -> f64 {
    let k = alpha.len();
    debug_assert_eq!(beta.len(), k.saturating_sub(1));
    // Gershgorin bounds.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let r = (if i > 0 { beta[i - 1].abs() } else { 0.0 })
            + (if i + 1 < k { beta[i].abs() } else { 0.0 });
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    // Count of eigenvalues below x via the Sturm sequence.
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut d = 1.0f64;
        for i in 0..k {
            let beta2 = if i > 0 {
                beta[i - 1] * beta[i - 1]
            } else {
                0.0
            };
            d = alpha[i] - x - beta2 / d;
            if d == 0.0 {
                d = 1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Lowest eigenvalue of the symmetric operator `apply` (dimension `n`) by
/// Lanczos iteration with full reorthogonalization. The start vector is the
/// `start` basis vector, so the Krylov space always contains it and the
/// returned value is a variational bound on the corresponding diagonal entry.
pub fn lanczos_min_eig(
    n: usize,
    start: usize,
    mut apply: impl FnMut(&[f64], &mut [f64]),
) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptyInput("lanczos on empty operator".into()));
    }
    let max_iter = n.min(400);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iter);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();

    let mut v = vec![0.0; n];
    v[start.min(n - 1)] = 1.0;
    let mut w = vec![0.0; n];
    let mut best = f64::INFINITY;
    let mut stagnant = 0usize;

    for _ in 0..max_iter {
        apply(&v, &mut w);
        let a = dot(&v, &w);
        alpha.push(a);
        // w -= a v + beta_prev v_prev, then full reorthogonalization against
        // every stored basis vector (twice is enough in 64-bit).
        axpy(-a, &v, &mut w);
        if let Some(prev) = basis.last() {
            axpy(-beta[beta.len() - 1], prev, &mut w);
        }
        basis.push(v.clone());
        for _ in 0..2 {
            for b in &basis {
                let overlap = dot(b, &w);
                if overlap != 0.0 {
                    axpy(-overlap, b, &mut w);
                }
            }
        }
        let theta = tridiag_min_eig(&alpha, &beta);
        if (best - theta).abs() <= 1e-13 * (1.0 + theta.abs()) {
            stagnant += 1;
        } else {
            stagnant = 0;
        }
        best = best.min(theta);
        if stagnant >= 3 {
            return Ok(best);
        }
        let b = norm2(&w);
        if b <= 1e-14 {
            // Krylov space exhausted: exact within the invariant subspace.
            return Ok(best);
        }
        beta.push(b);
        scale(1.0 / b, &mut w);
        std::mem::swap(&mut v, &mut w);
    }
    if stagnant >= 1 || alpha.len() == n {
        return Ok(best);
    }
    Err(Error::NonConvergence {
        algorithm: "lanczos",
        limit: max_iter,
    })
}
