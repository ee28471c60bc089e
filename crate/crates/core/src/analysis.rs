//! Prediction metrics and kernel screening analysis.
//!
//! The screening analysis asks how the learned effective kernel reshapes the
//! learned bare kernel: congruence-transforming the effective kernel by the
//! bare kernel's eigenvectors should leave it near-diagonal, and the
//! per-channel ratio profile tau_i = (eps_eff_i - eps_bare_i) / eps_bare_i,
//! sorted over retained channels, empirically follows a shifted-tangent
//! curve beta * tan(alpha * (rank - rank_c)).

use std::io::Write as IoWrite;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::jacobi_eigh;
use crate::model::KernelMatrix;
use crate::tensor::{GeometrySeries, InteractionTensor2B};

// ---------------------------------------------------------------------------
// Tensor comparison metrics

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    /// Maximum absolute elementwise error over all n^4 entries.
    pub mae: f64,
    /// Mean squared elementwise error over all n^4 entries.
    pub mse: f64,
}

/// Dense elementwise comparison of two tensors on the same orbital count.
pub fn tensor_metrics(
    prediction: &InteractionTensor2B,
    reference: &InteractionTensor2B,
) -> Result<MetricReport> {
    let n = prediction.n_act();
    if reference.n_act() != n {
        return Err(Error::ShapeMismatch(format!(
            "prediction n_act {} vs reference n_act {}",
            n,
            reference.n_act()
        )));
    }
    let mut max_abs = 0.0f64;
    let mut sum_sq = 0.0f64;
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let d = prediction.value([p, q, r, s]) - reference.value([p, q, r, s]);
                    max_abs = max_abs.max(d.abs());
                    sum_sq += d * d;
                }
            }
        }
    }
    Ok(MetricReport {
        mae: max_abs,
        mse: sum_sq / (n * n * n * n) as f64,
    })
}

/// Per-geometry comparison of two series paired by geometry value; geometries
/// present in only one series are an error.
pub fn series_metrics(
    predictions: &GeometrySeries,
    references: &GeometrySeries,
) -> Result<Vec<(f64, MetricReport)>> {
    if predictions.len() != references.len() {
        return Err(Error::ShapeMismatch(format!(
            "series lengths {} vs {}",
            predictions.len(),
            references.len()
        )));
    }
    let mut out = Vec::with_capacity(predictions.len());
    for entry in predictions.entries() {
        let other = references.entry_at(entry.geometry).ok_or_else(|| {
            Error::ShapeMismatch(format!(
                "no reference tensor at geometry {}",
                entry.geometry
            ))
        })?;
        out.push((
            entry.geometry,
            tensor_metrics(&entry.two_body, &other.two_body)?,
        ));
    }
    Ok(out)
}

/// Scale of the do-nothing baseline: treating the bare tensor as the
/// prediction of the effective one, averaged over the paired series.
pub fn bare_effective_gap(
    bare: &GeometrySeries,
    effective: &GeometrySeries,
) -> Result<MetricReport> {
    let per_geometry = series_metrics(bare, effective)?;
    let m = per_geometry.len() as f64;
    let mae = per_geometry.iter().fold(0.0f64, |a, (_, r)| a.max(r.mae));
    let mse = per_geometry.iter().map(|(_, r)| r.mse).sum::<f64>() / m;
    Ok(MetricReport { mae, mse })
}

/// CSV emitter: `geometry,mae,mse`.
pub fn write_metrics_csv<W: IoWrite>(
    mut w: W,
    rows: &[(f64, MetricReport)],
) -> std::io::Result<()> {
    writeln!(w, "geometry,mae,mse")?;
    for (g, r) in rows {
        writeln!(w, "{:.16e},{:.16e},{:.16e}", g, r.mae, r.mse)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Congruence diagonality

#[derive(Debug, Clone)]
pub struct CongruenceReport {
    /// diag(Z^T W_bare Z) where Z are the bare kernel's eigenvectors; equals
    /// the bare eigenvalues up to the same rounding as eps_eff, so the
    /// bare/effective channels are directly comparable.
    pub eps_bare: Vec<f64>,
    /// diag(Z^T W_eff Z) in the bare eigenbasis.
    pub eps_eff: Vec<f64>,
    /// ||offdiag(Z^T W_eff Z)||_F / ||Z^T W_eff Z||_F; 0 for a zero matrix.
    pub diagonality: f64,
}

fn congruence(z: &Array2<f64>, kernel: &KernelMatrix) -> Array2<f64> {
    let ell = kernel.ell();
    // K Z, column by column.
    let mut kz = Array2::zeros((ell, ell));
    let mut col = vec![0.0; ell];
    let mut out = vec![0.0; ell];
    for j in 0..ell {
        for i in 0..ell {
            col[i] = z[(i, j)];
        }
        kernel.apply(&col, &mut out);
        for i in 0..ell {
            kz[(i, j)] = out[i];
        }
    }
    // Z^T (K Z).
    let mut d = Array2::zeros((ell, ell));
    for i in 0..ell {
        for j in 0..ell {
            let mut acc = 0.0;
            for k in 0..ell {
                acc += z[(k, i)] * kz[(k, j)];
            }
            d[(i, j)] = acc;
        }
    }
    d
}

/// Transforms both kernels by the bare kernel's eigenvectors and reports the
/// diagonal channels plus how diagonal the transformed effective kernel is.
pub fn congruence_diagonality(bare: &KernelMatrix, eff: &KernelMatrix) -> Result<CongruenceReport> {
    if bare.ell() != eff.ell() {
        return Err(Error::ShapeMismatch(format!(
            "kernel sizes {} vs {}",
            bare.ell(),
            eff.ell()
        )));
    }
    let spectrum = jacobi_eigh(&bare.to_dense(), true)?;
    let z = spectrum.vectors.expect("vectors requested");
    let d_bare = congruence(&z, bare);
    let d_eff = congruence(&z, eff);
    let ell = bare.ell();
    let eps_bare: Vec<f64> = (0..ell).map(|i| d_bare[(i, i)]).collect();
    let eps_eff: Vec<f64> = (0..ell).map(|i| d_eff[(i, i)]).collect();
    let mut off_sq = 0.0;
    let mut tot_sq = 0.0;
    for i in 0..ell {
        for j in 0..ell {
            let v = d_eff[(i, j)];
            tot_sq += v * v;
            if i != j {
                off_sq += v * v;
            }
        }
    }
    let diagonality = if tot_sq == 0.0 {
        0.0
    } else {
        (off_sq / tot_sq).sqrt()
    };
    Ok(CongruenceReport {
        eps_bare,
        eps_eff,
        diagonality,
    })
}

// ---------------------------------------------------------------------------
// Screening ratios

#[derive(Debug, Clone)]
pub struct ScreeningReport {
    /// Ratios (eps_eff - eps_bare) / eps_bare over retained channels, sorted
    /// ascending; ranks in the tangent fit refer to positions in this order.
    pub tau: Vec<f64>,
    /// Channel indices (into eps_bare/eps_eff) excluded as near-null.
    pub excluded: Vec<usize>,
    /// Exclusion threshold actually applied: 1e-6 * max_i |eps_bare_i|.
    pub eta: f64,
}

pub fn screening_ratios(eps_bare: &[f64], eps_eff: &[f64]) -> Result<ScreeningReport> {
    if eps_bare.len() != eps_eff.len() {
        return Err(Error::ShapeMismatch(
            "channel lists have different lengths".into(),
        ));
    }
    if eps_bare.is_empty() {
        return Err(Error::EmptyInput("no channels to screen".into()));
    }
    let max_abs = eps_bare.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let eta = 1e-6 * max_abs;
    let mut tau = Vec::new();
    let mut excluded = Vec::new();
    for (i, (&b, &e)) in eps_bare.iter().zip(eps_eff).enumerate() {
        if b.abs() <= eta {
            excluded.push(i);
        } else {
            tau.push((e - b) / b);
        }
    }
    tau.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
    Ok(ScreeningReport { tau, excluded, eta })
}

// ---------------------------------------------------------------------------
// Shifted-tangent fit

/// Angles are kept this far inside (-pi/2, pi/2).
const ANGLE_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy)]
pub struct TanFit {
    pub beta: f64,
    pub alpha: f64,
    pub rank_c: f64,
    /// Root-mean-square residual of the fit over the profile.
    pub rms: f64,
}

fn tan_sse(tau: &[f64], alpha: f64, rank_c: f64) -> Option<(f64, f64)> {
    let half = std::f64::consts::FRAC_PI_2 - ANGLE_MARGIN;
    let mut st2 = 0.0;
    let mut stt = 0.0;
    let mut tans = Vec::with_capacity(tau.len());
    for (k, &t) in tau.iter().enumerate() {
        let theta = alpha * (k as f64 - rank_c);
        if theta.abs() >= half {
            return None;
        }
        let tk = theta.tan();
        st2 += tk * tk;
        stt += tk * t;
        tans.push(tk);
    }
    let beta = if st2 == 0.0 { 0.0 } else { stt / st2 };
    let sse = tau
        .iter()
        .zip(&tans)
        .map(|(&t, &tk)| {
            let r = beta * tk - t;
            r * r
        })
        .sum();
    Some((beta, sse))
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [
        [a[0][0], a[0][1], a[0][2], b[0]],
        [a[1][0], a[1][1], a[1][2], b[1]],
        [a[2][0], a[2][1], a[2][2], b[2]],
    ];
    for col in 0..3 {
        let piv =
            (col..3).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for row in (col + 1)..3 {
            let f = m[row][col] / m[col][col];
            for c in col..4 {
                m[row][c] -= f * m[col][c];
            }
        }
    }
    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut acc = m[col][3];
        for c in (col + 1)..3 {
            acc -= m[col][c] * x[c];
        }
        x[col] = acc / m[col][col];
    }
    Some(x)
}

/// Fits tau_k ~ beta * tan(alpha * (k - rank_c)) to a sorted ratio profile.
///
/// A coarse grid over (alpha, rank_c) with the closed-form beta is refined
/// through three 10x grid shrinks, then polished by a damped Gauss-Newton
/// descent; the polish is what takes the parameter recovery from grid
/// resolution (~1e-4) down to solver precision. All candidate angles stay
/// inside (-pi/2, pi/2) by a fixed margin.
pub fn tan_fit(tau: &[f64]) -> Result<TanFit> {
    let m = tau.len();
    if m == 0 {
        return Err(Error::EmptyInput("tangent fit over empty profile".into()));
    }
    if tau.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("ratio profile".into()));
    }
    let half = std::f64::consts::FRAC_PI_2 - ANGLE_MARGIN;
    if tau.iter().all(|&t| t == 0.0) {
        return Ok(TanFit {
            beta: 0.0,
            alpha: 1e-4,
            rank_c: (m as f64 - 1.0) / 2.0,
            rms: 0.0,
        });
    }

    // Coarse grid: rank_c in half-steps across (and slightly beyond) the
    // profile, alpha log-spaced up to the feasibility limit for that center.
    let mut best: Option<(f64, f64, f64, f64)> = None; // (sse, alpha, rank_c, beta)
    let consider = |alpha: f64, rank_c: f64, best: &mut Option<(f64, f64, f64, f64)>| {
        if alpha <= 0.0 {
            return;
        }
        if let Some((beta, sse)) = tan_sse(tau, alpha, rank_c) {
            if best.is_none_or(|(s, ..)| sse < s) {
                *best = Some((sse, alpha, rank_c, beta));
            }
        }
    };
    let mut ic = -1.0;
    while ic <= m as f64 {
        let dmax = (0.0 - ic).abs().max((m as f64 - 1.0 - ic).abs()).max(1e-9);
        let a_hi = half / dmax;
        let a_lo = (1e-4f64).min(a_hi / 2.0);
        for j in 0..200 {
            let f = j as f64 / 199.0;
            let alpha = a_lo * (a_hi / a_lo).powf(f);
            consider(alpha, ic, &mut best);
        }
        ic += 0.5;
    }
    let (_, mut alpha, mut rank_c, _) = best.expect("grid produced candidates");

    // Three 10x-shrinking local grids around the incumbent.
    let mut d_ic = 0.5;
    let mut d_la = 0.05; // half-span in log10(alpha)
    for _ in 0..3 {
        let (a0, c0) = (alpha, rank_c);
        for i in -10i32..=10 {
            let cand_c = c0 + d_ic * (i as f64) / 10.0;
            for j in -10i32..=10 {
                let cand_a = a0 * 10f64.powf(d_la * (j as f64) / 10.0);
                consider(cand_a, cand_c, &mut best);
            }
        }
        let (_, a, c, _) = best.unwrap();
        alpha = a;
        rank_c = c;
        d_ic /= 10.0;
        d_la /= 10.0;
    }
    let (mut sse, a_best, c_best, mut beta) = best.unwrap();
    alpha = a_best;
    rank_c = c_best;

    // Damped Gauss-Newton on (beta, alpha, rank_c).
    let mut lambda = 1e-10;
    for _ in 0..200 {
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (k, &t) in tau.iter().enumerate() {
            let d = k as f64 - rank_c;
            let theta = alpha * d;
            let tk = theta.tan();
            let sec2 = 1.0 + tk * tk;
            let r = beta * tk - t;
            let j = [tk, beta * d * sec2, -beta * alpha * sec2];
            for u in 0..3 {
                jtr[u] += j[u] * r;
                for v in 0..3 {
                    jtj[u][v] += j[u] * j[v];
                }
            }
        }
        let mut damped = jtj;
        for u in 0..3 {
            damped[u][u] += lambda * (1.0 + jtj[u][u]);
        }
        let step = match solve3(damped, [-jtr[0], -jtr[1], -jtr[2]]) {
            Some(s) => s,
            None => break,
        };
        let (nb, na, nc) = (beta + step[0], alpha + step[1], rank_c + step[2]);
        let feasible = na > 0.0 && (0..m).all(|k| (na * (k as f64 - nc)).abs() < half);
        let stepped_sse = feasible.then(|| {
            tau.iter()
                .enumerate()
                .map(|(k, &t)| {
                    let r = nb * (na * (k as f64 - nc)).tan() - t;
                    r * r
                })
                .sum::<f64>()
        });
        match stepped_sse {
            Some(s_new) if s_new < sse => {
                beta = nb;
                alpha = na;
                rank_c = nc;
                let gain = sse - s_new;
                sse = s_new;
                lambda = (lambda * 0.3).max(1e-16);
                if gain < 1e-30 {
                    break;
                }
            }
            _ => {
                lambda *= 10.0;
                if lambda > 1e8 {
                    break;
                }
            }
        }
    }
    Ok(TanFit {
        beta,
        alpha,
        rank_c,
        rms: (sse / m as f64).sqrt(),
    })
}

// ---------------------------------------------------------------------------
// Combined report

#[derive(Debug, Clone)]
pub struct KernelScreening {
    pub congruence: CongruenceReport,
    pub screening: ScreeningReport,
    pub fit: TanFit,
}

/// Full kernel-screening pipeline: congruence by the bare eigenbasis,
/// near-null channel exclusion, ratio profile, tangent fit.
pub fn kernel_screening(bare: &KernelMatrix, eff: &KernelMatrix) -> Result<KernelScreening> {
    let congruence = congruence_diagonality(bare, eff)?;
    let screening = screening_ratios(&congruence.eps_bare, &congruence.eps_eff)?;
    let fit = tan_fit(&screening.tau)?;
    Ok(KernelScreening {
        congruence,
        screening,
        fit,
    })
}

/// CSV emitter: `rank,tau,fit` for the sorted profile and the fitted curve.
pub fn write_tau_csv<W: IoWrite>(mut w: W, report: &KernelScreening) -> std::io::Result<()> {
    writeln!(w, "rank,tau,fit")?;
    let f = &report.fit;
    for (k, &t) in report.screening.tau.iter().enumerate() {
        let fitted = f.beta * (f.alpha * (k as f64 - f.rank_c)).tan();
        writeln!(w, "{},{:.16e},{:.16e}", k, t, fitted)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::Symmetry;
    use crate::tensor::TensorKind;

    fn kernel_from_dense(d: &Array2<f64>) -> KernelMatrix {
        let ell = d.nrows();
        let mut packed = Vec::new();
        for i in 0..ell {
            for j in i..ell {
                packed.push(d[(i, j)]);
            }
        }
        KernelMatrix::from_packed(ell, packed).unwrap()
    }

    #[test]
    fn metrics_on_hand_tensors() {
        let a = InteractionTensor2B::from_canonical(
            2,
            Symmetry::Fourfold,
            TensorKind::Effective,
            1.0,
            |_| 1.0,
        )
        .unwrap();
        let b = InteractionTensor2B::from_canonical(
            2,
            Symmetry::Fourfold,
            TensorKind::Effective,
            1.0,
            |[p, _, _, _]| if p == 0 { 1.0 } else { 0.5 },
        )
        .unwrap();
        let m = tensor_metrics(&a, &b).unwrap();
        assert_eq!(m.mae, 0.5);
        // Entries with canonical p = 1 differ by 0.5; by pair-swap symmetry
        // that is every (p,q,r,s) whose canonical form starts at 1: exactly
        // the tuples where both (p,q) and (r,s) sit in the q-major half for
        // p = 1, i.e. 4 of 16 entries here (0.25 of the mass).
        let count = (0..16)
            .filter(|&i| {
                let (p, q, r, s) = (i / 8, (i / 4) % 2, (i / 2) % 2, i % 2);
                let key = crate::symmetry::canonical_key([p, q, r, s], Symmetry::Fourfold);
                key[0] == 1
            })
            .count();
        assert!((m.mse - 0.25 * count as f64 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn congruence_of_identity_bare_reads_effective_directly() {
        let bare = kernel_from_dense(&Array2::eye(2));
        let eff = kernel_from_dense(&ndarray::arr2(&[[3.0, 4.0], [4.0, 3.0]]));
        let rep = congruence_diagonality(&bare, &eff).unwrap();
        assert_eq!(rep.eps_bare, vec![1.0, 1.0]);
        assert_eq!(rep.eps_eff, vec![3.0, 3.0]);
        // offdiag mass 32 of total 50.
        assert!((rep.diagonality - (32.0f64 / 50.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn doubling_the_kernel_gives_unit_ratios_exactly() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut dense = Array2::zeros((12, 12));
        for i in 0..12 {
            for j in i..12 {
                let v: f64 = rand::Rng::gen_range(&mut rng, -1.0..1.0);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
        }
        let bare = kernel_from_dense(&dense);
        let eff = bare.scaled(2.0);
        let rep = kernel_screening(&bare, &eff).unwrap();
        // Scaling by a power of two is exact in floating point, so the
        // congruence diagonals double bitwise and every ratio is exactly 1.
        for &t in &rep.screening.tau {
            assert_eq!(t, 1.0);
        }
        assert!(rep.congruence.diagonality < 1e-10);
        assert_eq!(rep.screening.excluded.len(), 0);
        // A constant profile is degenerate for the tangent model; the fit
        // must still return finite parameters.
        assert!(rep.fit.beta.is_finite() && rep.fit.alpha > 0.0);
    }

    #[test]
    fn near_null_channels_are_excluded() {
        let eps_bare = vec![1.0, 1e-9, -2.0];
        let eps_eff = vec![2.0, 5.0, -1.0];
        let rep = screening_ratios(&eps_bare, &eps_eff).unwrap();
        assert_eq!(rep.excluded, vec![1]);
        assert_eq!(rep.eta, 2e-6);
        assert_eq!(rep.tau, vec![-0.5, 1.0]);
    }

    #[test]
    fn tangent_fit_recovers_planted_parameters() {
        let (beta, alpha, rank_c) = (0.7, 0.031, 19.4);
        let tau: Vec<f64> = (0..40)
            .map(|k| beta * (alpha * (k as f64 - rank_c)).tan())
            .collect();
        let fit = tan_fit(&tau).unwrap();
        assert!(
            (fit.beta - beta).abs() <= 1e-6 * beta,
            "beta {} vs {}",
            fit.beta,
            beta
        );
        assert!(
            (fit.alpha - alpha).abs() <= 1e-6 * alpha,
            "alpha {}",
            fit.alpha
        );
        assert!((fit.rank_c - rank_c).abs() <= 1e-4, "rank_c {}", fit.rank_c);
        assert!(fit.rms <= 1e-9, "rms {:.3e}", fit.rms);
    }

    #[test]
    fn tangent_fit_handles_flat_and_empty_profiles() {
        let fit = tan_fit(&[0.0; 7]).unwrap();
        assert_eq!(fit.beta, 0.0);
        assert_eq!(fit.rms, 0.0);
        assert!(tan_fit(&[]).is_err());
        assert!(tan_fit(&[f64::NAN]).is_err());
    }

    #[test]
    fn tau_csv_lists_profile_and_fit() {
        let bare = kernel_from_dense(&Array2::eye(3));
        let eff = kernel_from_dense(&ndarray::arr2(&[
            [0.5, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 2.0],
        ]));
        let rep = kernel_screening(&bare, &eff).unwrap();
        let mut buf = Vec::new();
        write_tau_csv(&mut buf, &rep).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("rank,tau,fit\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
