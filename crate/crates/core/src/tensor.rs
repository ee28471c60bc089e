//! Dense tensor containers with validated symmetry.
//!
//! All types are immutable after construction; constructors reject non-finite
//! entries and symmetry violations beyond the ingest tolerance 1e-10, so any
//! held value is safe to consume downstream.

use ndarray::{Array2, Array4};

use crate::error::{Error, Result};
use crate::symmetry::{canonical_unit, symmetry_orbit, Key4, Symmetry};

/// Ingest tolerance for declared-symmetry validation.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TensorKind {
    Bare,
    Effective,
}

impl TensorKind {
    pub fn name(self) -> &'static str {
        match self {
            TensorKind::Bare => "bare",
            TensorKind::Effective => "effective",
        }
    }
}

/// Two-body interaction tensor (pq|rs) over an active space of `n_act` orbitals.
#[derive(Debug, Clone)]
pub struct InteractionTensor2B {
    n_act: usize,
    values: Array4<f64>,
    symmetry: Symmetry,
    kind: TensorKind,
    geometry: f64,
}

impl InteractionTensor2B {
    pub fn new(
        values: Array4<f64>,
        symmetry: Symmetry,
        kind: TensorKind,
        geometry: f64,
    ) -> Result<Self> {
        let n_act = values.shape()[0];
        if n_act == 0 {
            return Err(Error::EmptyInput("two-body tensor with n_act = 0".into()));
        }
        if values.shape() != [n_act, n_act, n_act, n_act] {
            return Err(Error::ShapeMismatch(format!(
                "two-body tensor must be n^4, got {:?}",
                values.shape()
            )));
        }
        if !geometry.is_finite() {
            return Err(Error::NonFinite("geometry scalar".into()));
        }
        for (idx, &v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("two-body entry at {idx:?}")));
            }
        }
        let tensor = InteractionTensor2B {
            n_act,
            values,
            symmetry,
            kind,
            geometry,
        };
        tensor.check_symmetry(SYMMETRY_TOL)?;
        Ok(tensor)
    }

    /// Builds the full tensor from values on canonical keys of `symmetry`,
    /// replicating each value over its orbit. `fill` is called once per
    /// canonical key; entries are bitwise equal across every orbit.
    pub fn from_canonical(
        n_act: usize,
        symmetry: Symmetry,
        kind: TensorKind,
        geometry: f64,
        mut fill: impl FnMut(Key4) -> f64,
    ) -> Result<Self> {
        let mut values = Array4::zeros((n_act, n_act, n_act, n_act));
        for key in canonical_unit(n_act, symmetry) {
            let v = fill(key);
            for [p, q, r, s] in symmetry_orbit(key, symmetry) {
                values[[p, q, r, s]] = v;
            }
        }
        Self::new(values, symmetry, kind, geometry)
    }

    pub fn n_act(&self) -> usize {
        self.n_act
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn kind(&self) -> TensorKind {
        self.kind
    }

    pub fn geometry(&self) -> f64 {
        self.geometry
    }

    pub fn value(&self, key: Key4) -> f64 {
        self.values[[key[0], key[1], key[2], key[3]]]
    }

    pub fn values(&self) -> &Array4<f64> {
        &self.values
    }

    /// Worst absolute deviation across declared-symmetry orbits.
    pub fn symmetry_deviation(&self) -> (f64, Key4) {
        let mut worst = (0.0f64, [0, 0, 0, 0]);
        for key in canonical_unit(self.n_act, self.symmetry) {
            let v = self.value(key);
            for image in symmetry_orbit(key, self.symmetry) {
                let dev = (self.value(image) - v).abs();
                if dev > worst.0 {
                    worst = (dev, image);
                }
            }
        }
        worst
    }

    fn check_symmetry(&self, tol: f64) -> Result<()> {
        let (dev, key) = self.symmetry_deviation();
        if dev > tol {
            return Err(Error::SymmetryViolation {
                class: self.symmetry.name().into(),
                key,
                deviation: dev,
            });
        }
        Ok(())
    }

    /// Orbit-averaged projection onto the declared class. Idempotent; entries
    /// of an already symmetric tensor are reproduced bit-for-bit: orbit sizes
    /// are powers of two, so the pairwise sum of identical values is an exact
    /// power-of-two multiple and the division restores them losslessly.
    pub fn symmetrize(values: &Array4<f64>, symmetry: Symmetry) -> Array4<f64> {
        let n_act = values.shape()[0];
        let mut out = Array4::zeros(values.raw_dim());
        for key in canonical_unit(n_act, symmetry) {
            let orbit = symmetry_orbit(key, symmetry);
            let mut sums: Vec<f64> = orbit
                .iter()
                .map(|&[p, q, r, s]| values[[p, q, r, s]])
                .collect();
            while sums.len() > 1 {
                sums = sums.chunks(2).map(|c| c.iter().sum()).collect();
            }
            let mean = sums[0] / orbit.len() as f64;
            for [p, q, r, s] in orbit {
                out[[p, q, r, s]] = mean;
            }
        }
        out
    }
}

/// One-body tensor h_pq; symmetric.
#[derive(Debug, Clone)]
pub struct OneBodyTensor {
    n_act: usize,
    values: Array2<f64>,
    geometry: f64,
}

impl OneBodyTensor {
    pub fn new(values: Array2<f64>, geometry: f64) -> Result<Self> {
        let n_act = values.shape()[0];
        if n_act == 0 {
            return Err(Error::EmptyInput("one-body tensor with n_act = 0".into()));
        }
        if values.shape() != [n_act, n_act] {
            return Err(Error::ShapeMismatch(format!(
                "one-body tensor must be square, got {:?}",
                values.shape()
            )));
        }
        for (idx, &v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("one-body entry at {idx:?}")));
            }
        }
        for p in 0..n_act {
            for q in (p + 1)..n_act {
                let dev = (values[[p, q]] - values[[q, p]]).abs();
                if dev > SYMMETRY_TOL {
                    return Err(Error::SymmetryViolation {
                        class: "one-body symmetric".into(),
                        key: [p, q, 0, 0],
                        deviation: dev,
                    });
                }
            }
        }
        Ok(OneBodyTensor {
            n_act,
            values,
            geometry,
        })
    }

    pub fn n_act(&self) -> usize {
        self.n_act
    }

    pub fn geometry(&self) -> f64 {
        self.geometry
    }

    pub fn value(&self, p: usize, q: usize) -> f64 {
        self.values[[p, q]]
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// Constant energy offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarTerm(pub f64);

impl ScalarTerm {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite("scalar term".into()));
        }
        Ok(ScalarTerm(value))
    }
}

/// All tensor data attached to one geometry.
#[derive(Debug, Clone)]
pub struct GeometryEntry {
    pub geometry: f64,
    pub two_body: InteractionTensor2B,
    pub one_body: Option<OneBodyTensor>,
    pub scalar: Option<ScalarTerm>,
}

/// Tensors across a family of geometries, ordered by strictly increasing
/// geometry scalar. All entries share n_act, symmetry class, and kind.
#[derive(Debug, Clone)]
pub struct GeometrySeries {
    entries: Vec<GeometryEntry>,
}

impl GeometrySeries {
    pub fn new(entries: Vec<GeometryEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyInput("geometry series".into()));
        }
        let n_act = entries[0].two_body.n_act();
        let symmetry = entries[0].two_body.symmetry();
        let kind = entries[0].two_body.kind();
        for e in &entries {
            if e.two_body.n_act() != n_act {
                return Err(Error::InvalidSeries("mixed n_act across entries".into()));
            }
            if e.two_body.symmetry() != symmetry {
                return Err(Error::InvalidSeries(
                    "mixed symmetry classes across entries".into(),
                ));
            }
            if e.two_body.kind() != kind {
                return Err(Error::InvalidSeries(
                    "mixed tensor kinds across entries".into(),
                ));
            }
            if e.geometry != e.two_body.geometry() {
                return Err(Error::InvalidSeries(format!(
                    "entry geometry {} disagrees with its tensor ({})",
                    e.geometry,
                    e.two_body.geometry()
                )));
            }
            if let Some(ob) = &e.one_body {
                if ob.n_act() != n_act {
                    return Err(Error::InvalidSeries("one-body n_act mismatch".into()));
                }
            }
        }
        for w in entries.windows(2) {
            if w[1].geometry <= w[0].geometry {
                return Err(Error::InvalidSeries(format!(
                    "geometries must strictly increase ({} then {})",
                    w[0].geometry, w[1].geometry
                )));
            }
        }
        Ok(GeometrySeries { entries })
    }

    pub fn entries(&self) -> &[GeometryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_act(&self) -> usize {
        self.entries[0].two_body.n_act()
    }

    pub fn symmetry(&self) -> Symmetry {
        self.entries[0].two_body.symmetry()
    }

    pub fn kind(&self) -> TensorKind {
        self.entries[0].two_body.kind()
    }

    pub fn geometries(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.geometry).collect()
    }

    pub fn entry_at(&self, geometry: f64) -> Option<&GeometryEntry> {
        self.entries.iter().find(|e| e.geometry == geometry)
    }

    /// Sub-series restricted to the given geometries (exact match required).
    pub fn select(&self, geometries: &[f64]) -> Result<GeometrySeries> {
        let mut picked = Vec::new();
        for &g in geometries {
            let e = self.entry_at(g).ok_or_else(|| {
                Error::InvalidSeries(format!("geometry {g} not present in series"))
            })?;
            picked.push(e.clone());
        }
        picked.sort_by(|a, b| a.geometry.total_cmp(&b.geometry));
        GeometrySeries::new(picked)
    }

    /// Complement of `select`: entries whose geometry is not listed.
    pub fn without(&self, geometries: &[f64]) -> Result<GeometrySeries> {
        let rest: Vec<GeometryEntry> = self
            .entries
            .iter()
            .filter(|e| !geometries.contains(&e.geometry))
            .cloned()
            .collect();
        GeometrySeries::new(rest)
    }
}
