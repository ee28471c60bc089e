//! TOML settings file and the little parsers shared by flags and file
//! entries (kernel specs, geometry grids, float lists). Flags always win
//! over file values; built-in defaults fill whatever remains.

use std::path::Path;

use serde::Deserialize;
use vnet_core::synth::KernelSpec;
use vnet_core::{Error, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub finetune: FinetuneSection,
    #[serde(default)]
    pub ffm: FfmSection,
    #[serde(default)]
    pub synth: SynthSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub ell: Option<usize>,
    pub width: Option<usize>,
    pub depth: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub lr0: Option<f64>,
    pub batch_size: Option<usize>,
    pub heldout_every: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneSection {
    pub refs: Option<String>,
    pub epochs: Option<usize>,
    pub lr0: Option<f64>,
    pub batch_size: Option<usize>,
    pub heldout_every: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FfmSection {
    pub n_freq: Option<usize>,
    pub sigma_f: Option<f64>,
    pub width: Option<usize>,
    pub depth: Option<usize>,
    pub epochs: Option<usize>,
    pub lr0: Option<f64>,
    pub batch_size: Option<usize>,
    pub heldout_every: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n_act: Option<usize>,
    pub geometries: Option<String>,
    pub bare_kernel: Option<String>,
    pub eff_kernel: Option<String>,
    pub omega: Option<f64>,
    pub n_quad: Option<usize>,
    pub padding: Option<f64>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    toml::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {}", path.display(), e.message())))
}

/// Flag > config file > default.
pub fn resolve<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// "soft-coulomb:delta=0.3", "yukawa:mu=1.5,delta=0.3", "gaussian:sigma=2.0".
pub fn parse_kernel(spec: &str) -> Result<KernelSpec> {
    let bad = |what: &str| Error::InvalidConfig(format!("kernel spec '{spec}': {what}"));
    let (name, params) = spec.split_once(':').unwrap_or((spec, ""));
    let mut pairs = std::collections::BTreeMap::new();
    for part in params.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| bad("parameters must be key=value"))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| bad(&format!("'{v}' is not a number")))?;
        pairs.insert(k.trim().to_string(), v);
    }
    let mut take = |key: &str| {
        pairs
            .remove(key)
            .ok_or_else(|| bad(&format!("missing parameter '{key}'")))
    };
    let kernel = match name.trim() {
        "soft-coulomb" => KernelSpec::SoftCoulomb {
            delta: take("delta")?,
        },
        "yukawa" => KernelSpec::Yukawa {
            mu: take("mu")?,
            delta: take("delta")?,
        },
        "gaussian" => KernelSpec::Gaussian {
            sigma: take("sigma")?,
        },
        other => return Err(bad(&format!("unknown kernel '{other}'"))),
    };
    if let Some(extra) = pairs.keys().next() {
        return Err(bad(&format!("unexpected parameter '{extra}'")));
    }
    kernel.validate()?;
    Ok(kernel)
}

/// Comma list ("1.0,1.3") or inclusive range "start:stop:count". The result
/// is sorted ascending; duplicates are refused rather than deduplicated.
pub fn parse_geometries(spec: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| Error::InvalidConfig(format!("geometry spec '{spec}': {what}"));
    let mut geoms = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, stop, count] = parts.as_slice() else {
            return Err(bad("range form is start:stop:count"));
        };
        let start: f64 = start.trim().parse().map_err(|_| bad("bad start"))?;
        let stop: f64 = stop.trim().parse().map_err(|_| bad("bad stop"))?;
        let count: usize = count.trim().parse().map_err(|_| bad("bad count"))?;
        if count < 2 {
            return Err(bad("range needs at least 2 points"));
        }
        let step = (stop - start) / (count - 1) as f64;
        (0..count).map(|k| start + step * k as f64).collect()
    } else {
        parse_float_list(spec)?
    };
    if geoms.iter().any(|g| !g.is_finite()) {
        return Err(bad("non-finite geometry"));
    }
    geoms.sort_by(|a, b| a.partial_cmp(b).expect("finite geometries"));
    for pair in geoms.windows(2) {
        if pair[0] == pair[1] {
            return Err(bad(&format!("duplicate geometry {}", pair[0])));
        }
    }
    Ok(geoms)
}

pub fn parse_float_list(spec: &str) -> Result<Vec<f64>> {
    let vals: Result<Vec<f64>> = spec
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("'{s}' is not a number")))
        })
        .collect();
    let vals = vals?;
    if vals.is_empty() {
        return Err(Error::EmptyInput("empty list".into()));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("list entry".into()));
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_specs_parse() {
        assert!(matches!(
            parse_kernel("soft-coulomb:delta=0.3").unwrap(),
            KernelSpec::SoftCoulomb { delta } if delta == 0.3
        ));
        assert!(matches!(
            parse_kernel("yukawa:mu=1.5,delta=0.4").unwrap(),
            KernelSpec::Yukawa { mu, delta } if mu == 1.5 && delta == 0.4
        ));
        assert!(matches!(
            parse_kernel("gaussian:sigma=2.0").unwrap(),
            KernelSpec::Gaussian { sigma } if sigma == 2.0
        ));
        assert!(parse_kernel("coulomb").is_err());
        assert!(parse_kernel("yukawa:mu=1.5").is_err());
        assert!(parse_kernel("gaussian:sigma=2.0,extra=1").is_err());
        assert!(parse_kernel("gaussian:sigma=-1").is_err());
    }

    #[test]
    fn geometry_specs_parse() {
        assert_eq!(parse_geometries("2.0,1.0").unwrap(), vec![1.0, 2.0]);
        let grid = parse_geometries("1.0:2.0:5").unwrap();
        assert_eq!(grid.len(), 5);
        assert_eq!(grid[0], 1.0);
        assert_eq!(grid[4], 2.0);
        assert!(parse_geometries("1.0,1.0").is_err());
        assert!(parse_geometries("1.0:2.0:1").is_err());
        assert!(parse_geometries("1.0:2.0").is_err());
    }

    #[test]
    fn missing_config_file_is_default_and_bad_toml_is_rejected() {
        let cfg = load(None).unwrap();
        assert!(cfg.seed.is_none());
        let dir = std::env::temp_dir().join("vnet-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.toml");
        std::fs::write(&path, "epochs = [not toml").unwrap();
        assert!(load(Some(&path)).is_err());
        let good = dir.join("good.toml");
        std::fs::write(&good, "seed = 9\n[train]\nepochs = 12\n").unwrap();
        let cfg = load(Some(&good)).unwrap();
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.train.epochs, Some(12));
    }
}
