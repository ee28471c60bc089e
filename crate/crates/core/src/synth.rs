//! Synthetic benchmark systems with tunable screening.
//!
//! Orbitals are one-dimensional Hermite-Gaussian functions split over two
//! centers a distance R apart (even indices left, odd indices right, rising
//! Hermite order), normalized on the quadrature grid. Two-body tensors are
//! pair-density contractions through an explicit interaction kernel; the
//! bare and effective series differ only in that kernel, which emulates a
//! geometry-independent screening of the interaction. One-body tensors carry
//! the kinetic term plus a harmonic well, and scalar terms are zero. The
//! whole generator is deterministic arithmetic: rerunning it reproduces
//! byte-identical data.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::symmetry::Symmetry;
use crate::tensor::{
    GeometryEntry, GeometrySeries, InteractionTensor2B, OneBodyTensor, ScalarTerm, TensorKind,
};

pub const DEFAULT_N_QUAD: usize = 256;
pub const DEFAULT_PADDING: f64 = 8.0;
pub const DEFAULT_SOFT_DELTA: f64 = 0.3;
pub const DEFAULT_YUKAWA_MU: f64 = 1.5;
pub const DEFAULT_OMEGA: f64 = 0.25;

/// Two-point interaction kernels; all symmetric in their arguments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// 1 / sqrt((x - y)^2 + delta^2).
    SoftCoulomb { delta: f64 },
    /// exp(-mu |x - y|) / sqrt((x - y)^2 + delta^2).
    Yukawa { mu: f64, delta: f64 },
    /// exp(-(x - y)^2 / (2 sigma^2)).
    Gaussian { sigma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            KernelSpec::SoftCoulomb { delta } => delta.is_finite() && delta > 0.0,
            KernelSpec::Yukawa { mu, delta } => {
                mu.is_finite() && mu >= 0.0 && delta.is_finite() && delta > 0.0
            }
            KernelSpec::Gaussian { sigma } => sigma.is_finite() && sigma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "kernel parameters out of range: {self:?}"
            )))
        }
    }

    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        match *self {
            KernelSpec::SoftCoulomb { delta } => 1.0 / (d * d + delta * delta).sqrt(),
            KernelSpec::Yukawa { mu, delta } => {
                (-mu * d.abs()).exp() / (d * d + delta * delta).sqrt()
            }
            KernelSpec::Gaussian { sigma } => (-d * d / (2.0 * sigma * sigma)).exp(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_act: usize,
    /// Strictly increasing center separations.
    pub geometries: Vec<f64>,
    pub bare_kernel: KernelSpec,
    pub eff_kernel: KernelSpec,
    /// Harmonic-well curvature in the one-body term.
    pub omega: f64,
    pub n_quad: usize,
    /// Grid half-width beyond R/2.
    pub padding: f64,
}

impl SynthConfig {
    pub fn defaults(n_act: usize, geometries: Vec<f64>) -> Self {
        SynthConfig {
            n_act,
            geometries,
            bare_kernel: KernelSpec::SoftCoulomb {
                delta: DEFAULT_SOFT_DELTA,
            },
            eff_kernel: KernelSpec::Yukawa {
                mu: DEFAULT_YUKAWA_MU,
                delta: DEFAULT_SOFT_DELTA,
            },
            omega: DEFAULT_OMEGA,
            n_quad: DEFAULT_N_QUAD,
            padding: DEFAULT_PADDING,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_act == 0 {
            return Err(Error::InvalidConfig("n_act must be >= 1".into()));
        }
        if self.geometries.is_empty() {
            return Err(Error::EmptyInput("no geometries requested".into()));
        }
        if self.geometries.iter().any(|g| !g.is_finite() || *g <= 0.0) {
            return Err(Error::InvalidConfig(
                "geometries must be finite and positive".into(),
            ));
        }
        if self.geometries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "geometries must be strictly increasing".into(),
            ));
        }
        if self.n_quad < 8 {
            return Err(Error::InvalidConfig("n_quad must be >= 8".into()));
        }
        if !(self.padding.is_finite() && self.padding > 0.0) {
            return Err(Error::InvalidConfig("padding must be > 0".into()));
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::InvalidConfig("omega must be >= 0".into()));
        }
        self.bare_kernel.validate()?;
        self.eff_kernel.validate()
    }
}

/// Physicists' Hermite polynomial H_m(u).
pub fn hermite(m: usize, u: f64) -> f64 {
    match m {
        0 => 1.0,
        1 => 2.0 * u,
        _ => {
            let mut prev = 1.0;
            let mut cur = 2.0 * u;
            for k in 1..m {
                let next = 2.0 * u * cur - 2.0 * k as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Orbital j: Hermite order floor(j/2), centered at -R/2 for even j and
/// +R/2 for odd j, unit width.
fn orbital_center(j: usize, r: f64) -> f64 {
    if j.is_multiple_of(2) {
        -r / 2.0
    } else {
        r / 2.0
    }
}

struct QuadratureBasis {
    xs: Vec<f64>,
    /// Trapezoid weights.
    ws: Vec<f64>,
    /// values[(j, i)] = f_j(x_i), grid-normalized.
    values: Array2<f64>,
    /// derivs[(j, i)] = f_j'(x_i), same normalization.
    derivs: Array2<f64>,
}

fn build_basis(cfg: &SynthConfig, r: f64) -> QuadratureBasis {
    let half = r / 2.0 + cfg.padding;
    let nq = cfg.n_quad;
    let h = 2.0 * half / (nq - 1) as f64;
    let xs: Vec<f64> = (0..nq).map(|i| -half + h * i as f64).collect();
    let mut ws = vec![h; nq];
    ws[0] = h / 2.0;
    ws[nq - 1] = h / 2.0;

    let n = cfg.n_act;
    let mut values = Array2::zeros((n, nq));
    let mut derivs = Array2::zeros((n, nq));
    for j in 0..n {
        let m = j / 2;
        let c = orbital_center(j, r);
        let mut norm_sq = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let u = x - c;
            let gauss = (-u * u / 2.0).exp();
            let f = hermite(m, u) * gauss;
            // d/du [H_m(u) e^(-u^2/2)] = (2m H_{m-1}(u) - u H_m(u)) e^(-u^2/2)
            let df = (if m == 0 {
                0.0
            } else {
                2.0 * m as f64 * hermite(m - 1, u)
            } - u * hermite(m, u))
                * gauss;
            values[(j, i)] = f;
            derivs[(j, i)] = df;
            norm_sq += ws[i] * f * f;
        }
        let inv = 1.0 / norm_sq.sqrt();
        for i in 0..nq {
            values[(j, i)] *= inv;
            derivs[(j, i)] *= inv;
        }
    }
    QuadratureBasis {
        xs,
        ws,
        values,
        derivs,
    }
}

/// Two-body tensor (pq|rs) = integral of rho_pq(x) K(x,y) rho_rs(y) with
/// rho_pq = f_p f_q, evaluated by trapezoid quadrature.
fn two_body_tensor(
    basis: &QuadratureBasis,
    kernel: &KernelSpec,
    n_act: usize,
    geometry: f64,
    symmetry: Symmetry,
    kind: TensorKind,
) -> Result<InteractionTensor2B> {
    let nq = basis.xs.len();
    // Weighted pair densities for unordered pairs.
    let pair_id = |a: usize, b: usize| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        lo * n_act + hi
    };
    let mut wrho: Vec<Option<Vec<f64>>> = vec![None; n_act * n_act];
    for p in 0..n_act {
        for q in p..n_act {
            let mut v = vec![0.0; nq];
            for i in 0..nq {
                v[i] = basis.ws[i] * basis.values[(p, i)] * basis.values[(q, i)];
            }
            wrho[pair_id(p, q)] = Some(v);
        }
    }
    // K-transformed pair densities, computed lazily per (r, s) pair.
    let mut kvec: Vec<Option<Vec<f64>>> = vec![None; n_act * n_act];
    let mut fill = |key: [usize; 4]| -> f64 {
        let [p, q, r, s] = key;
        let rs = pair_id(r, s);
        if kvec[rs].is_none() {
            let src = wrho[rs].as_ref().expect("pairs precomputed");
            let mut out = vec![0.0; nq];
            for (i, o) in out.iter_mut().enumerate() {
                let xi = basis.xs[i];
                let mut acc = 0.0;
                for (j, &w) in src.iter().enumerate() {
                    acc += kernel.evaluate(xi, basis.xs[j]) * w;
                }
                *o = acc;
            }
            kvec[rs] = Some(out);
        }
        let left = wrho[pair_id(p, q)].as_ref().expect("pairs precomputed");
        let right = kvec[rs].as_ref().expect("just filled");
        left.iter().zip(right).map(|(a, b)| a * b).sum()
    };
    InteractionTensor2B::from_canonical(n_act, symmetry, kind, geometry, &mut fill)
}

fn one_body_tensor(
    basis: &QuadratureBasis,
    omega: f64,
    n_act: usize,
    geometry: f64,
) -> Result<OneBodyTensor> {
    let nq = basis.xs.len();
    let mut m = Array2::zeros((n_act, n_act));
    for p in 0..n_act {
        for q in p..n_act {
            let mut acc = 0.0;
            for i in 0..nq {
                let kinetic = 0.5 * basis.derivs[(p, i)] * basis.derivs[(q, i)];
                let x = basis.xs[i];
                let well =
                    0.5 * omega * omega * x * x * basis.values[(p, i)] * basis.values[(q, i)];
                acc += basis.ws[i] * (kinetic + well);
            }
            m[(p, q)] = acc;
            m[(q, p)] = acc;
        }
    }
    OneBodyTensor::new(m, geometry)
}

/// One geometry of the benchmark under the given kernel.
pub fn synth_entry(
    cfg: &SynthConfig,
    geometry: f64,
    kernel: &KernelSpec,
    kind: TensorKind,
) -> Result<GeometryEntry> {
    let symmetry = match kind {
        TensorKind::Bare => Symmetry::Eightfold,
        TensorKind::Effective => Symmetry::Fourfold,
    };
    let basis = build_basis(cfg, geometry);
    let two_body = two_body_tensor(&basis, kernel, cfg.n_act, geometry, symmetry, kind)?;
    let one_body = one_body_tensor(&basis, cfg.omega, cfg.n_act, geometry)?;
    Ok(GeometryEntry {
        geometry,
        two_body,
        one_body: Some(one_body),
        scalar: Some(ScalarTerm(0.0)),
    })
}

/// The full benchmark: a bare series under the bare kernel and an effective
/// series under the screening kernel, on identical geometries.
pub fn gen_synthetic(cfg: &SynthConfig) -> Result<(GeometrySeries, GeometrySeries)> {
    cfg.validate()?;
    let mut bare = Vec::with_capacity(cfg.geometries.len());
    let mut eff = Vec::with_capacity(cfg.geometries.len());
    for &g in &cfg.geometries {
        bare.push(synth_entry(cfg, g, &cfg.bare_kernel, TensorKind::Bare)?);
        eff.push(synth_entry(cfg, g, &cfg.eff_kernel, TensorKind::Effective)?);
    }
    Ok((GeometrySeries::new(bare)?, GeometrySeries::new(eff)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_hand_values() {
        assert_eq!(hermite(0, 0.7), 1.0);
        assert_eq!(hermite(1, 0.7), 1.4);
        // H_2 = 4u^2 - 2, H_3 = 8u^3 - 12u.
        assert!((hermite(2, 0.7) - (4.0 * 0.49 - 2.0)).abs() < 1e-15);
        assert!((hermite(3, 0.5) - (8.0 * 0.125 - 12.0 * 0.5)).abs() < 1e-15);
    }

    fn small_config() -> SynthConfig {
        SynthConfig::defaults(3, vec![1.0, 2.0])
    }

    #[test]
    fn orbitals_are_grid_normalized_and_centered() {
        let cfg = small_config();
        let basis = build_basis(&cfg, 2.0);
        for j in 0..cfg.n_act {
            let norm: f64 = (0..basis.xs.len())
                .map(|i| basis.ws[i] * basis.values[(j, i)] * basis.values[(j, i)])
                .sum();
            assert!((norm - 1.0).abs() < 1e-12, "orbital {j} norm {norm}");
        }
        // Orbital 0 peaks near -R/2, orbital 1 near +R/2.
        let peak = |j: usize| {
            (0..basis.xs.len())
                .max_by(|&a, &b| {
                    basis.values[(j, a)]
                        .abs()
                        .partial_cmp(&basis.values[(j, b)].abs())
                        .unwrap()
                })
                .map(|i| basis.xs[i])
                .unwrap()
        };
        assert!((peak(0) + 1.0).abs() < 0.1);
        assert!((peak(1) - 1.0).abs() < 0.1);
    }

    #[test]
    fn kernels_are_symmetric_and_screening_reduces_them() {
        let soft = KernelSpec::SoftCoulomb { delta: 0.3 };
        let yuk = KernelSpec::Yukawa {
            mu: 1.5,
            delta: 0.3,
        };
        for (x, y) in [(0.0, 1.0), (-0.7, 2.2), (1.5, 1.5)] {
            assert_eq!(soft.evaluate(x, y), soft.evaluate(y, x));
            assert!(yuk.evaluate(x, y) <= soft.evaluate(x, y));
        }
        // At coincidence the Yukawa factor is 1.
        assert_eq!(yuk.evaluate(0.4, 0.4), soft.evaluate(0.4, 0.4));
        assert!(KernelSpec::Gaussian { sigma: 0.0 }.validate().is_err());
        assert!(KernelSpec::SoftCoulomb { delta: -1.0 }.validate().is_err());
    }

    #[test]
    fn generated_tensors_match_a_direct_double_sum() {
        let cfg = small_config();
        let entry = synth_entry(&cfg, 1.5, &cfg.bare_kernel, TensorKind::Bare).unwrap();
        let basis = build_basis(&cfg, 1.5);
        let key = [0, 1, 2, 2];
        let mut brute = 0.0;
        for i in 0..basis.xs.len() {
            for j in 0..basis.xs.len() {
                brute += basis.ws[i]
                    * basis.values[(0, i)]
                    * basis.values[(1, i)]
                    * cfg.bare_kernel.evaluate(basis.xs[i], basis.xs[j])
                    * basis.ws[j]
                    * basis.values[(2, j)]
                    * basis.values[(2, j)];
            }
        }
        let got = entry.two_body.value(key);
        assert!(
            (got - brute).abs() <= 1e-10 * brute.abs().max(1.0),
            "{got} vs {brute}"
        );
    }

    #[test]
    fn benchmark_series_are_deterministic_and_kernel_sensitive() {
        let cfg = small_config();
        let (bare1, eff1) = gen_synthetic(&cfg).unwrap();
        let (bare2, _) = gen_synthetic(&cfg).unwrap();
        assert_eq!(bare1.len(), 2);
        assert_eq!(eff1.kind(), TensorKind::Effective);
        assert_eq!(eff1.symmetry(), Symmetry::Fourfold);
        // Bitwise reproducibility.
        for (a, b) in bare1.entries().iter().zip(bare2.entries()) {
            assert_eq!(
                a.two_body.value([0, 1, 1, 2]),
                b.two_body.value([0, 1, 1, 2])
            );
            assert_eq!(
                a.one_body.as_ref().unwrap().value(0, 1),
                b.one_body.as_ref().unwrap().value(0, 1)
            );
        }
        // Screening shrinks the repulsion on the diagonal.
        let b00 = bare1.entries()[0].two_body.value([0, 0, 0, 0]);
        let e00 = eff1.entries()[0].two_body.value([0, 0, 0, 0]);
        assert!(e00 < b00, "screened {e00} vs bare {b00}");
        // Geometry dependence.
        let g1 = bare1.entries()[0].two_body.value([0, 1, 0, 1]);
        let g2 = bare1.entries()[1].two_body.value([0, 1, 0, 1]);
        assert!((g1 - g2).abs() > 1e-6);
    }

    #[test]
    fn one_body_has_positive_kinetic_diagonal() {
        let mut cfg = small_config();
        cfg.omega = 0.0;
        let entry = synth_entry(&cfg, 1.0, &cfg.bare_kernel, TensorKind::Bare).unwrap();
        let one = entry.one_body.as_ref().unwrap();
        for p in 0..cfg.n_act {
            assert!(one.value(p, p) > 0.0);
        }
        assert_eq!(entry.scalar.unwrap().0, 0.0);
    }

    #[test]
    fn config_validation_rejects_bad_input() {
        let mut cfg = small_config();
        cfg.geometries = vec![2.0, 1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = small_config();
        cfg.geometries.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = small_config();
        cfg.n_quad = 4;
        assert!(cfg.validate().is_err());
    }
}
