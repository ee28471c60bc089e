//! Zero-masking of systematically vanishing tensor entries.
//!
//! Masking is decided on the FOURFOLD canonical unit from the bare tensors
//! across all geometries: an entry is masked iff the mean of |value| stays
//! below eps1 AND the population std of the raw values stays below eps2.
//! Training, prediction, and metrics all operate on the retained set; masked
//! entries are pinned to exactly zero.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::symmetry::{canonical_unit, Key4, Symmetry};
use crate::tensor::{GeometrySeries, TensorKind};

/// Default masking thresholds (mean of |value| and std of raw values).
pub const MASK_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct IndexMask {
    n_act: usize,
    symmetry: Symmetry,
    /// FOURFOLD canonical keys in lexicographic order.
    canonical: Vec<Key4>,
    masked: Vec<bool>,
    index_of: HashMap<Key4, usize>,
}

impl IndexMask {
    pub fn new(n_act: usize, symmetry: Symmetry, masked_keys: &[Key4]) -> Result<Self> {
        let canonical = canonical_unit(n_act, symmetry);
        let index_of: HashMap<Key4, usize> =
            canonical.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let mut masked = vec![false; canonical.len()];
        for key in masked_keys {
            let &i = index_of.get(key).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "masked key {key:?} is not canonical for n_act = {n_act}"
                ))
            })?;
            masked[i] = true;
        }
        Ok(IndexMask {
            n_act,
            symmetry,
            canonical,
            masked,
            index_of,
        })
    }

    /// Mask with every canonical key retained.
    pub fn all_retained(n_act: usize) -> Self {
        Self::new(n_act, Symmetry::Fourfold, &[]).expect("no masked keys to reject")
    }

    pub fn n_act(&self) -> usize {
        self.n_act
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn canonical_keys(&self) -> &[Key4] {
        &self.canonical
    }

    pub fn is_masked(&self, key: Key4) -> Option<bool> {
        self.index_of.get(&key).map(|&i| self.masked[i])
    }

    pub fn retained_keys(&self) -> impl Iterator<Item = Key4> + '_ {
        self.canonical
            .iter()
            .zip(&self.masked)
            .filter(|(_, &m)| !m)
            .map(|(&k, _)| k)
    }

    pub fn masked_keys(&self) -> impl Iterator<Item = Key4> + '_ {
        self.canonical
            .iter()
            .zip(&self.masked)
            .filter(|(_, &m)| m)
            .map(|(&k, _)| k)
    }

    pub fn n_retained(&self) -> usize {
        self.masked.iter().filter(|&&m| !m).count()
    }

    pub fn n_masked(&self) -> usize {
        self.masked.iter().filter(|&&m| m).count()
    }
}

/// Builds the mask from a series of bare EIGHTFOLD tensors.
pub fn build_zero_mask(series: &GeometrySeries, eps1: f64, eps2: f64) -> Result<IndexMask> {
    if series.kind() != TensorKind::Bare || series.symmetry() != Symmetry::Eightfold {
        return Err(Error::InvalidConfig(
            "zero mask is defined on bare EIGHTFOLD tensor series".into(),
        ));
    }
    if !(eps1.is_finite() && eps2.is_finite() && eps1 >= 0.0 && eps2 >= 0.0) {
        return Err(Error::InvalidConfig(
            "mask thresholds must be finite and >= 0".into(),
        ));
    }
    let n_act = series.n_act();
    let n_geom = series.len() as f64;
    let mut masked = Vec::new();
    for key in canonical_unit(n_act, Symmetry::Fourfold) {
        let mut mean_abs = 0.0;
        let mut mean = 0.0;
        for e in series.entries() {
            let v = e.two_body.value(key);
            mean_abs += v.abs();
            mean += v;
        }
        mean_abs /= n_geom;
        mean /= n_geom;
        let mut var = 0.0;
        for e in series.entries() {
            let d = e.two_body.value(key) - mean;
            var += d * d;
        }
        let std = (var / n_geom).sqrt();
        if mean_abs < eps1 && std < eps2 {
            masked.push(key);
        }
    }
    IndexMask::new(n_act, Symmetry::Fourfold, &masked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{GeometryEntry, InteractionTensor2B};

    /// Series of two geometries where key (0,0,0,0) oscillates around zero
    /// with tiny magnitude and (1,1,1,1) is large.
    fn series_with_small_entry(amplitude: f64) -> GeometrySeries {
        let entries = [1.0, 2.0]
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let sign = if i == 0 { 1.0 } else { -1.0 };
                GeometryEntry {
                    geometry: g,
                    two_body: InteractionTensor2B::from_canonical(
                        2,
                        Symmetry::Eightfold,
                        TensorKind::Bare,
                        g,
                        |key| {
                            if key == [0, 0, 0, 0] {
                                sign * amplitude
                            } else {
                                1.0 + g
                            }
                        },
                    )
                    .unwrap(),
                    one_body: None,
                    scalar: None,
                }
            })
            .collect();
        GeometrySeries::new(entries).unwrap()
    }

    #[test]
    fn small_mean_and_small_std_masks() {
        // mean |v| = 5e-6 < 1e-5 and std = 5e-6 < 1e-5.
        let mask = build_zero_mask(&series_with_small_entry(5e-6), MASK_EPS, MASK_EPS).unwrap();
        assert_eq!(mask.is_masked([0, 0, 0, 0]), Some(true));
        assert_eq!(mask.is_masked([1, 1, 1, 1]), Some(false));
    }

    #[test]
    fn oscillating_entry_with_large_std_is_retained() {
        // mean of raw values is 0 but std = 2e-3 >= eps2: kept.
        let mask = build_zero_mask(&series_with_small_entry(2e-3), MASK_EPS, MASK_EPS).unwrap();
        assert_eq!(mask.is_masked([0, 0, 0, 0]), Some(false));
    }

    #[test]
    fn mean_uses_absolute_values() {
        // Raw mean cancels to zero; mean |v| = 2e-3 blocks the first test.
        let series = series_with_small_entry(2e-3);
        let mask = build_zero_mask(&series, MASK_EPS, 1e300).unwrap();
        assert_eq!(mask.is_masked([0, 0, 0, 0]), Some(false));
    }

    #[test]
    fn masked_set_grows_with_thresholds() {
        let series = series_with_small_entry(5e-6);
        let tight = build_zero_mask(&series, 1e-7, 1e-7).unwrap();
        let loose = build_zero_mask(&series, 1e-2, 1e-2).unwrap();
        assert!(tight.n_masked() <= loose.n_masked());
        for key in tight.masked_keys() {
            assert_eq!(loose.is_masked(key), Some(true));
        }
    }

    #[test]
    fn retained_and_masked_partition_the_unit() {
        let mask = build_zero_mask(&series_with_small_entry(5e-6), MASK_EPS, MASK_EPS).unwrap();
        assert_eq!(
            mask.n_retained() + mask.n_masked(),
            mask.canonical_keys().len()
        );
    }

    #[test]
    fn rejects_effective_series() {
        let entries = vec![GeometryEntry {
            geometry: 1.0,
            two_body: InteractionTensor2B::from_canonical(
                2,
                Symmetry::Fourfold,
                TensorKind::Effective,
                1.0,
                |_| 1.0,
            )
            .unwrap(),
            one_body: None,
            scalar: None,
        }];
        let series = GeometrySeries::new(entries).unwrap();
        assert!(build_zero_mask(&series, MASK_EPS, MASK_EPS).is_err());
    }
}
