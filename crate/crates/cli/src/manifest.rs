//! JSON run manifests: which command ran, with which resolved settings and
//! seed, reading which inputs, producing which files. File records carry
//! SHA-256 digests, and tensor records carry kind/symmetry/geometry so a
//! manifest doubles as the index of a data directory.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vnet_core::symmetry::Symmetry;
use vnet_core::tensor::TensorKind;
use vnet_core::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the manifest's directory when possible.
    pub path: String,
    pub sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub threads: usize,
    pub config: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub timings_s: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, threads: usize, config: impl Serialize) -> Self {
        RunManifest {
            command: command.to_string(),
            seed,
            threads,
            config: serde_json::to_value(config).expect("config snapshots serialize"),
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_s: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, base: &Path, path: &Path) -> Result<()> {
        self.inputs.push(plain_record(base, path)?);
        Ok(())
    }

    pub fn add_output(&mut self, base: &Path, path: &Path) -> Result<()> {
        self.outputs.push(plain_record(base, path)?);
        Ok(())
    }

    pub fn add_tensor_output(
        &mut self,
        base: &Path,
        path: &Path,
        kind: TensorKind,
        symmetry: Symmetry,
        geometry: f64,
    ) -> Result<()> {
        let mut record = plain_record(base, path)?;
        record.kind = Some(kind_str(kind).into());
        record.symmetry = Some(symmetry_str(symmetry).into());
        record.geometry = Some(geometry);
        self.outputs.push(record);
        Ok(())
    }

    pub fn add_timing(&mut self, label: &str, seconds: f64) {
        self.timings_s.insert(label.to_string(), seconds);
    }

    /// Written last: every listed output already exists by this point.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifests serialize");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}

fn plain_record(base: &Path, path: &Path) -> Result<FileRecord> {
    Ok(FileRecord {
        path: display_path(base, path),
        sha256: sha256_file(path)?,
        kind: None,
        symmetry: None,
        geometry: None,
    })
}

/// Paths inside `base` are recorded relative to it, anything else verbatim.
fn display_path(base: &Path, path: &Path) -> String {
    path.strip_prefix(base)
        .unwrap_or(path)
        .display()
        .to_string()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

pub fn kind_str(kind: TensorKind) -> &'static str {
    match kind {
        TensorKind::Bare => "bare",
        TensorKind::Effective => "effective",
    }
}

pub fn parse_kind(s: &str) -> Result<TensorKind> {
    match s {
        "bare" => Ok(TensorKind::Bare),
        "effective" => Ok(TensorKind::Effective),
        other => Err(Error::InvalidConfig(format!(
            "unknown tensor kind '{other}'"
        ))),
    }
}

pub fn symmetry_str(symmetry: Symmetry) -> &'static str {
    match symmetry {
        Symmetry::Eightfold => "eightfold",
        Symmetry::Fourfold => "fourfold",
    }
}

pub fn parse_symmetry(s: &str) -> Result<Symmetry> {
    match s {
        "eightfold" => Ok(Symmetry::Eightfold),
        "fourfold" => Ok(Symmetry::Fourfold),
        other => Err(Error::InvalidConfig(format!("unknown symmetry '{other}'"))),
    }
}
