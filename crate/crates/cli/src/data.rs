//! Tensor-series loading through run manifests. A data source is either a
//! directory containing `manifest.json` or a manifest path itself; tensor
//! records are verified against their recorded digests before parsing.

use std::path::{Path, PathBuf};

use vnet_core::exchange::{read_exchange_file, ExchangeMeta};
use vnet_core::tensor::{GeometryEntry, GeometrySeries, TensorKind};
use vnet_core::{Error, Result};

use crate::manifest::{self, kind_str, RunManifest};

pub struct LoadedSeries {
    pub series: GeometrySeries,
    /// Absolute tensor-file paths, geometry order.
    pub files: Vec<PathBuf>,
    pub manifest_path: PathBuf,
}

pub fn manifest_path(source: &Path) -> PathBuf {
    if source.is_dir() {
        source.join("manifest.json")
    } else {
        source.to_path_buf()
    }
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::FileFormat {
        path: path.display().to_string(),
        line: e.line(),
        what: e.to_string(),
    })
}

/// Reads every tensor record of `kind` listed in the source's manifest.
pub fn load_series(source: &Path, kind: TensorKind) -> Result<LoadedSeries> {
    let manifest_path = manifest_path(source);
    let manifest = read_manifest(&manifest_path)?;
    let base = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();

    let mut tagged: Vec<(f64, PathBuf, GeometryEntry)> = Vec::new();
    for record in &manifest.outputs {
        let Some(kind_tag) = &record.kind else {
            continue;
        };
        if manifest::parse_kind(kind_tag)? != kind {
            continue;
        }
        let symmetry = record.symmetry.as_deref().ok_or_else(|| {
            Error::InvalidSeries(format!("{}: tensor record without symmetry", record.path))
        })?;
        let geometry = record.geometry.ok_or_else(|| {
            Error::InvalidSeries(format!("{}: tensor record without geometry", record.path))
        })?;

        let path = base.join(&record.path);
        let digest = manifest::sha256_file(&path)?;
        if digest != record.sha256 {
            return Err(Error::InvalidSeries(format!(
                "{}: content digest {} does not match the manifest ({})",
                path.display(),
                &digest[..12],
                &record.sha256[..12]
            )));
        }

        let meta = ExchangeMeta::new(kind, manifest::parse_symmetry(symmetry)?, geometry);
        let data = read_exchange_file(&path, &meta)?;
        let two_body = data.two_body.ok_or_else(|| {
            Error::InvalidSeries(format!("{}: no two-body block", path.display()))
        })?;
        tagged.push((
            geometry,
            path,
            GeometryEntry {
                geometry,
                two_body,
                one_body: data.one_body,
                scalar: Some(data.scalar),
            },
        ));
    }
    if tagged.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{}: no {} tensors listed",
            manifest_path.display(),
            kind_str(kind)
        )));
    }
    tagged.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite geometries"));
    let files = tagged.iter().map(|(_, p, _)| p.clone()).collect();
    let entries = tagged.into_iter().map(|(_, _, e)| e).collect();
    Ok(LoadedSeries {
        series: GeometrySeries::new(entries)?,
        files,
        manifest_path,
    })
}

/// Maps user-requested geometries onto the stored grid, absorbing decimal
/// round-off (|difference| <= 1e-9 * max(1, |requested|)).
pub fn resolve_geometries(requested: &[f64], available: &[f64]) -> Result<Vec<f64>> {
    let mut resolved = Vec::with_capacity(requested.len());
    for &want in requested {
        let tol = 1e-9 * want.abs().max(1.0);
        let best = available
            .iter()
            .copied()
            .min_by(|a, b| {
                (a - want)
                    .abs()
                    .partial_cmp(&(b - want).abs())
                    .expect("finite geometries")
            })
            .ok_or_else(|| Error::EmptyInput("no geometries available".into()))?;
        if (best - want).abs() > tol {
            return Err(Error::InvalidSeries(format!(
                "geometry {want} not in the data set (closest is {best})"
            )));
        }
        resolved.push(best);
    }
    Ok(resolved)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_resolution_absorbs_round_off_and_rejects_gaps() {
        let grid: Vec<f64> = (0..5).map(|k| 1.0 + 0.05 * k as f64).collect();
        let got = resolve_geometries(&[1.15, 1.0], &grid).unwrap();
        assert_eq!(got[0].to_bits(), grid[3].to_bits());
        assert_eq!(got[1].to_bits(), grid[0].to_bits());
        assert!(resolve_geometries(&[1.17], &grid).is_err());
    }
}
