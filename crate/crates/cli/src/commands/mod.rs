//! Subcommand implementations. Each command resolves its settings
//! (flag > config file > default), runs the corresponding core routines,
//! writes its outputs, and finishes with a run manifest so the outputs are
//! discoverable and verifiable afterwards.

mod generate;
mod reporting;
mod training;

use std::path::{Path, PathBuf};
use std::time::Instant;

use vnet_core::{Error, Result};

use crate::args::{Cli, Command, KindArg};
use crate::config::{self, FileConfig};
use vnet_core::tensor::TensorKind;

/// Seed when neither the command line nor the config file provides one.
pub const DEFAULT_SEED: u64 = 7;

/// Settings shared by every command.
pub struct Ctx {
    pub file: FileConfig,
    pub seed: u64,
    pub threads: usize,
}

pub fn run(cli: Cli) -> Result<()> {
    let file = config::load(cli.config.as_deref())?;
    let ctx = Ctx {
        seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        threads: thread_count()?,
        file,
    };
    match cli.command {
        Command::GenSynthetic(args) => generate::gen_synthetic_cmd(&ctx, &args),
        Command::Pretrain(args) => training::pretrain_cmd(&ctx, &args),
        Command::Finetune(args) => training::finetune_cmd(&ctx, &args),
        Command::FfmTrain(args) => training::ffm_train_cmd(&ctx, &args),
        Command::Predict(args) => reporting::predict_cmd(&ctx, &args),
        Command::Metrics(args) => reporting::metrics_cmd(&ctx, &args),
        Command::KernelAnalysis(args) => reporting::kernel_analysis_cmd(&ctx, &args),
        Command::Energy(args) => reporting::energy_cmd(&ctx, &args),
        Command::GradCheck(args) => reporting::grad_check_cmd(&ctx, &args),
    }
}

/// VNET_THREADS is the only environment variable read. Compute paths are
/// sequential today, so the value only bounds future parallelism; it is
/// still validated and recorded in every run manifest.
fn thread_count() -> Result<usize> {
    match std::env::var("VNET_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(e) => Err(Error::InvalidConfig(format!("VNET_THREADS: {e}"))),
        Ok(raw) => raw
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "VNET_THREADS must be a positive integer, got '{raw}'"
                ))
            }),
    }
}

pub fn kind_of(arg: KindArg) -> TensorKind {
    match arg {
        KindArg::Bare => TensorKind::Bare,
        KindArg::Effective => TensorKind::Effective,
    }
}

pub fn elapsed_s(t0: Instant) -> f64 {
    t0.elapsed().as_secs_f64()
}

/// `path` with its extension replaced by `ext` ("loss.csv" next to
/// "model.ckpt" becomes "model.loss.csv").
pub fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

pub fn create_dir_all(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Creates the parent directory of a file about to be written.
pub fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => create_dir_all(dir),
        _ => Ok(()),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Base directory for relativizing manifest records of a file output.
pub fn base_of(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf()
}
