//! Versioned text checkpoints for trainers.
//!
//! The format is line-oriented and self-describing: a header of key-value
//! pairs, the masked canonical keys, then named parameter and optimizer
//! arrays with one value per line at 17 significant digits. That precision
//! makes save/load lossless for f64, so a resumed run continues the exact
//! trajectory of an uninterrupted one.

use std::fmt::Write as FmtWrite;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exchange::fmt17;
use crate::ffm::{FfmConfig, FfmModel, FfmTrainer};
use crate::mask::IndexMask;
use crate::model::{KernelMatrix, Mlp, ModelConfig, VNetModel};
use crate::symmetry::{Key4, Symmetry};
use crate::tensor::TensorKind;
use crate::train::{trainable_shapes, AdamState, TrainConfig, Trainer};

pub const CHECKPOINT_FORMAT: u32 = 1;

fn mismatch(what: impl Into<String>) -> Error {
    Error::CheckpointMismatch(what.into())
}

// ---------------------------------------------------------------------------
// Writing

fn push_kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key} {value}");
}

fn push_kv_f(out: &mut String, key: &str, value: f64) {
    let _ = writeln!(out, "{key} {}", fmt17(value));
}

fn push_train_config(out: &mut String, cfg: &TrainConfig) {
    push_kv(out, "seed", cfg.seed);
    push_kv(out, "epochs", cfg.epochs);
    push_kv_f(out, "lr0", cfg.lr0);
    push_kv(out, "batch_size", cfg.batch_size);
    push_kv_f(out, "beta1", cfg.beta1);
    push_kv_f(out, "beta2", cfg.beta2);
    push_kv_f(out, "eps_adam", cfg.eps_adam);
    push_kv(out, "heldout_every", cfg.heldout_every);
}

fn push_mask(out: &mut String, mask: &IndexMask) {
    let masked: Vec<Key4> = mask.masked_keys().collect();
    push_kv(out, "masked", masked.len());
    for k in masked {
        let _ = writeln!(out, "{} {} {} {}", k[0], k[1], k[2], k[3]);
    }
}

fn push_array(out: &mut String, name: &str, data: &[f64]) {
    let _ = writeln!(out, "array {name} {}", data.len());
    for &v in data {
        let _ = writeln!(out, "{}", fmt17(v));
    }
}

fn push_mlp(out: &mut String, net: &Mlp) {
    for (k, (w, b)) in net.weights.iter().zip(&net.biases).enumerate() {
        push_array(out, &format!("w{}", k + 1), w.as_slice().expect("layout"));
        push_array(out, &format!("b{}", k + 1), b);
    }
}

fn push_adam(out: &mut String, adam: &AdamState) {
    push_kv(out, "adam_t", adam.t);
    for (i, m) in adam.m.iter().enumerate() {
        push_array(out, &format!("adam_m_{i}"), m);
    }
    for (i, v) in adam.v.iter().enumerate() {
        push_array(out, &format!("adam_v_{i}"), v);
    }
}

pub fn vnet_checkpoint_string(trainer: &Trainer, mask: &IndexMask) -> String {
    let mut out = String::new();
    push_kv(&mut out, "format", CHECKPOINT_FORMAT);
    push_kv(&mut out, "kind", "vnet");
    let cfg = &trainer.model.config;
    push_kv(&mut out, "n_act", cfg.n_act);
    push_kv(&mut out, "ell", cfg.ell);
    push_kv(&mut out, "hidden_width", cfg.hidden_width);
    push_kv(&mut out, "depth", cfg.depth);
    let phase = match trainer.phase {
        TensorKind::Bare => "bare",
        TensorKind::Effective => "effective",
    };
    push_kv(&mut out, "phase", phase);
    push_kv(&mut out, "from_scratch", trainer.from_scratch as u8);
    push_kv(
        &mut out,
        "has_eff",
        trainer.model.kernel_eff.is_some() as u8,
    );
    push_train_config(&mut out, &trainer.config);
    push_kv(&mut out, "epochs_done", trainer.epochs_done);
    push_mask(&mut out, mask);
    push_mlp(&mut out, &trainer.model.net);
    push_array(&mut out, "kernel_bare", trainer.model.kernel_bare.packed());
    if let Some(eff) = &trainer.model.kernel_eff {
        push_array(&mut out, "kernel_eff", eff.packed());
    }
    push_adam(&mut out, &trainer.adam);
    out.push_str("end\n");
    out
}

pub fn ffm_checkpoint_string(trainer: &FfmTrainer, mask: &IndexMask) -> String {
    let mut out = String::new();
    push_kv(&mut out, "format", CHECKPOINT_FORMAT);
    push_kv(&mut out, "kind", "ffm");
    let cfg = &trainer.model.config;
    push_kv(&mut out, "n_act", cfg.n_act);
    push_kv(&mut out, "n_freq", cfg.n_freq);
    push_kv_f(&mut out, "sigma_f", cfg.sigma_f);
    push_kv(&mut out, "hidden_width", cfg.hidden_width);
    push_kv(&mut out, "depth", cfg.depth);
    push_train_config(&mut out, &trainer.config);
    push_kv(&mut out, "epochs_done", trainer.epochs_done);
    push_mask(&mut out, mask);
    push_array(
        &mut out,
        "b_matrix",
        trainer.model.b_matrix.as_slice().expect("layout"),
    );
    push_mlp(&mut out, &trainer.model.net);
    push_adam(&mut out, &trainer.adam);
    out.push_str("end\n");
    out
}

pub fn save_vnet(trainer: &Trainer, mask: &IndexMask, path: &Path) -> Result<()> {
    std::fs::write(path, vnet_checkpoint_string(trainer, mask)).map_err(|e| Error::io(path, e))
}

pub fn save_ffm(trainer: &FfmTrainer, mask: &IndexMask, path: &Path) -> Result<()> {
    std::fs::write(path, ffm_checkpoint_string(trainer, mask)).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Reading

struct Reader<'a> {
    lines: std::str::Lines<'a>,
    lineno: usize,
    path: String,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str, path: &str) -> Self {
        Reader {
            lines: text.lines(),
            lineno: 0,
            path: path.to_string(),
        }
    }

    fn err(&self, what: impl Into<String>) -> Error {
        Error::FileFormat {
            path: self.path.clone(),
            line: self.lineno,
            what: what.into(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        self.lineno += 1;
        self.lines
            .next()
            .ok_or_else(|| self.err("unexpected end of checkpoint"))
    }

    /// Next line must be `<key> <value>`; returns the value text.
    fn kv(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim()),
            _ => Err(self.err(format!("expected `{key} <value>`, found `{line}`"))),
        }
    }

    fn kv_parse<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.kv(key)?;
        v.parse()
            .map_err(|_| self.err(format!("cannot parse `{v}` as {key}")))
    }

    fn mask(&mut self, n_act: usize) -> Result<IndexMask> {
        let count: usize = self.kv_parse("masked")?;
        let mut keys = Vec::with_capacity(count);
        for _ in 0..count {
            let line = self.next_line()?;
            let parts: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| self.err(format!("bad masked key line `{line}`")))?;
            if parts.len() != 4 {
                return Err(self.err(format!("masked key needs 4 indices, got `{line}`")));
            }
            keys.push([parts[0], parts[1], parts[2], parts[3]]);
        }
        IndexMask::new(n_act, Symmetry::Fourfold, &keys)
    }

    fn array(&mut self, name: &str, expect_len: usize) -> Result<Vec<f64>> {
        let header = self.next_line()?;
        let mut toks = header.split_whitespace();
        let tag = toks.next();
        let got_name = toks.next();
        let got_len: Option<usize> = toks.next().and_then(|t| t.parse().ok());
        if tag != Some("array") || got_name != Some(name) {
            return Err(self.err(format!("expected `array {name} ...`, found `{header}`")));
        }
        let len = got_len.ok_or_else(|| self.err("array header lacks a length"))?;
        if len != expect_len {
            return Err(mismatch(format!(
                "array {name} has length {len}, expected {expect_len}"
            )));
        }
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let line = self.next_line()?;
            let v: f64 = line
                .trim()
                .parse()
                .map_err(|_| self.err(format!("bad float `{line}` in array {name}")))?;
            data.push(v);
        }
        Ok(data)
    }

    fn mlp(&mut self, dims: &[(usize, usize)]) -> Result<Mlp> {
        let mut weights = Vec::with_capacity(dims.len());
        let mut biases = Vec::with_capacity(dims.len());
        for (k, &(rows, cols)) in dims.iter().enumerate() {
            let w = self.array(&format!("w{}", k + 1), rows * cols)?;
            let b = self.array(&format!("b{}", k + 1), rows)?;
            let w = ndarray::Array2::from_shape_vec((rows, cols), w)
                .map_err(|e| mismatch(format!("w{}: {e}", k + 1)))?;
            weights.push(w);
            biases.push(b);
        }
        Ok(Mlp { weights, biases })
    }

    fn adam(&mut self, shapes: &[usize]) -> Result<AdamState> {
        let t: u64 = self.kv_parse("adam_t")?;
        let mut m = Vec::with_capacity(shapes.len());
        for (i, &n) in shapes.iter().enumerate() {
            m.push(self.array(&format!("adam_m_{i}"), n)?);
        }
        let mut v = Vec::with_capacity(shapes.len());
        for (i, &n) in shapes.iter().enumerate() {
            v.push(self.array(&format!("adam_v_{i}"), n)?);
        }
        Ok(AdamState { t, m, v })
    }

    fn train_config(&mut self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            seed: self.kv_parse("seed")?,
            epochs: self.kv_parse("epochs")?,
            lr0: self.kv_parse("lr0")?,
            batch_size: self.kv_parse("batch_size")?,
            beta1: self.kv_parse("beta1")?,
            beta2: self.kv_parse("beta2")?,
            eps_adam: self.kv_parse("eps_adam")?,
            heldout_every: self.kv_parse("heldout_every")?,
        })
    }

    fn header(&mut self, want_kind: &str) -> Result<()> {
        let version: u32 = self.kv_parse("format")?;
        if version != CHECKPOINT_FORMAT {
            return Err(mismatch(format!(
                "unsupported checkpoint format {version} (this build reads {CHECKPOINT_FORMAT})"
            )));
        }
        let kind = self.kv("kind")?;
        if kind != want_kind {
            return Err(mismatch(format!(
                "checkpoint kind `{kind}`, expected `{want_kind}`"
            )));
        }
        Ok(())
    }
}

pub fn parse_vnet_checkpoint(text: &str, origin: &str) -> Result<(Trainer, IndexMask)> {
    let mut r = Reader::new(text, origin);
    r.header("vnet")?;
    let n_act: usize = r.kv_parse("n_act")?;
    let ell: usize = r.kv_parse("ell")?;
    let hidden_width: usize = r.kv_parse("hidden_width")?;
    let depth: usize = r.kv_parse("depth")?;
    let config = ModelConfig::new(n_act, ell, hidden_width, depth)?;
    let phase = match r.kv("phase")? {
        "bare" => TensorKind::Bare,
        "effective" => TensorKind::Effective,
        other => return Err(r.err(format!("unknown phase `{other}`"))),
    };
    let from_scratch = r.kv_parse::<u8>("from_scratch")? != 0;
    let has_eff = r.kv_parse::<u8>("has_eff")? != 0;
    if phase == TensorKind::Effective && !has_eff {
        return Err(mismatch(
            "effective-phase checkpoint lacks an effective kernel",
        ));
    }
    let tcfg = r.train_config()?;
    tcfg.validate()?;
    let epochs_done: usize = r.kv_parse("epochs_done")?;
    let mask = r.mask(n_act)?;
    let net = r.mlp(&config.layer_dims())?;
    let packed_len = KernelMatrix::packed_len(ell);
    let kernel_bare = KernelMatrix::from_packed(ell, r.array("kernel_bare", packed_len)?)?;
    let kernel_eff = if has_eff {
        Some(KernelMatrix::from_packed(
            ell,
            r.array("kernel_eff", packed_len)?,
        )?)
    } else {
        None
    };
    let adam = r.adam(&trainable_shapes(&config))?;
    let model = VNetModel {
        config,
        net,
        kernel_bare,
        kernel_eff,
    };
    Ok((
        Trainer {
            model,
            phase,
            config: tcfg,
            adam,
            epochs_done,
            from_scratch,
        },
        mask,
    ))
}

pub fn parse_ffm_checkpoint(text: &str, origin: &str) -> Result<(FfmTrainer, IndexMask)> {
    let mut r = Reader::new(text, origin);
    r.header("ffm")?;
    let n_act: usize = r.kv_parse("n_act")?;
    let n_freq: usize = r.kv_parse("n_freq")?;
    let sigma_f: f64 = r.kv_parse("sigma_f")?;
    let hidden_width: usize = r.kv_parse("hidden_width")?;
    let depth: usize = r.kv_parse("depth")?;
    let config = FfmConfig::new(n_act, n_freq, sigma_f, hidden_width, depth)?;
    let tcfg = r.train_config()?;
    tcfg.validate()?;
    let epochs_done: usize = r.kv_parse("epochs_done")?;
    let mask = r.mask(n_act)?;
    let b_flat = r.array("b_matrix", n_freq * 5)?;
    let b_matrix = ndarray::Array2::from_shape_vec((n_freq, 5), b_flat)
        .map_err(|e| mismatch(format!("b_matrix: {e}")))?;
    let dims = config.layer_dims();
    let net = r.mlp(&dims)?;
    let shapes: Vec<usize> = dims.iter().flat_map(|&(a, b)| [a * b, a]).collect();
    let adam = r.adam(&shapes)?;
    Ok((
        FfmTrainer {
            model: FfmModel {
                config,
                b_matrix,
                net,
            },
            config: tcfg,
            adam,
            epochs_done,
        },
        mask,
    ))
}

pub fn load_vnet(path: &Path) -> Result<(Trainer, IndexMask)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_vnet_checkpoint(&text, &path.display().to_string())
}

pub fn load_ffm(path: &Path) -> Result<(FfmTrainer, IndexMask)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ffm_checkpoint(&text, &path.display().to_string())
}

/// Peeks at the `kind` field so callers can dispatch without trying both
/// parsers.
pub fn checkpoint_kind(text: &str) -> Result<String> {
    let mut r = Reader::new(text, "<peek>");
    let _version: u32 = r.kv_parse("format")?;
    Ok(r.kv("kind")?.to_string())
}
