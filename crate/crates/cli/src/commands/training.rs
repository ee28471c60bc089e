//! `pretrain`, `finetune`, `ffm-train`: the three training stages. All of
//! them consume a generated data directory, print the sample-stream hash so
//! runs are comparable across machines, and leave a checkpoint, a loss CSV,
//! and a run manifest behind.

use std::path::Path;
use std::time::Instant;

use vnet_core::checkpoint::{load_vnet, save_ffm, save_vnet};
use vnet_core::ffm::{FfmConfig, FfmTrainer, DEFAULT_FFM_EPOCHS, DEFAULT_N_FREQ, DEFAULT_SIGMA_F};
use vnet_core::model::{
    param_count, ModelConfig, DEFAULT_DEPTH, DEFAULT_ELL, DEFAULT_HIDDEN_WIDTH,
};
use vnet_core::tensor::{GeometrySeries, TensorKind};
use vnet_core::train::{
    build_samples, sample_stream_hash, write_loss_csv, LossReport, TrainSample,
};
use vnet_core::{build_zero_mask, Error, IndexMask, Result, TrainConfig, Trainer, MASK_EPS};

use super::{base_of, elapsed_s, ensure_parent, sibling, write_text, Ctx};
use crate::args::{FfmTrainArgs, FinetuneArgs, ModelFlags, PretrainArgs, TrainFlags};
use crate::config::{parse_geometries, resolve};
use crate::data::{self, resolve_geometries, LoadedSeries};
use crate::manifest::RunManifest;

/// Reference geometries when neither flag nor config file names any.
pub const DEFAULT_REFS: &str = "1.15,1.45,1.95,2.45";

pub fn pretrain_cmd(ctx: &Ctx, args: &PretrainArgs) -> Result<()> {
    let loaded = data::load_series(&args.data_dir, TensorKind::Bare)?;
    let bare = &loaded.series;
    let mask = build_zero_mask(bare, MASK_EPS, MASK_EPS)?;
    let mcfg = model_config(bare.n_act(), &args.model, ctx)?;
    let tr = &ctx.file.train;
    let tcfg = resolve_train(
        TrainConfig::pretrain_default(ctx.seed),
        &args.train,
        tr.epochs,
        tr.lr0,
        tr.batch_size,
        tr.heldout_every,
    )?;

    let samples = build_samples(bare, &mask)?;
    announce("pretraining", &samples, &bare.geometries());
    let t0 = Instant::now();
    let mut trainer = Trainer::new_pretrain(&mcfg, &tcfg)?;
    let history = trainer.train(&samples, None)?;
    let train_time = elapsed_s(t0);

    ensure_parent(&args.out)?;
    save_vnet(&trainer, &mask, &args.out)?;
    let loss_csv = args
        .loss_csv
        .clone()
        .unwrap_or_else(|| sibling(&args.out, "loss.csv"));
    write_loss(&loss_csv, &history)?;

    let mut manifest = RunManifest::new(
        "pretrain",
        ctx.seed,
        ctx.threads,
        serde_json::json!({
            "data_dir": args.data_dir.display().to_string(),
            "model": model_json(&mcfg),
            "train": train_json(&tcfg),
        }),
    );
    add_series_inputs(&mut manifest, &loaded)?;
    let base = base_of(&args.out);
    manifest.add_output(&base, &args.out)?;
    manifest.add_output(&base, &loss_csv)?;
    manifest.add_timing("train", train_time);
    manifest.write(&sibling(&args.out, "manifest.json"))?;

    finish("pretrained", &history, train_time, &args.out);
    Ok(())
}

pub fn finetune_cmd(ctx: &Ctx, args: &FinetuneArgs) -> Result<()> {
    let loaded = data::load_series(&args.data_dir, TensorKind::Effective)?;
    let eff = &loaded.series;
    let ft = &ctx.file.finetune;
    let tr = &ctx.file.train;
    let tcfg = resolve_train(
        TrainConfig::finetune_default(ctx.seed),
        &args.train,
        ft.epochs.or(tr.epochs),
        ft.lr0.or(tr.lr0),
        ft.batch_size.or(tr.batch_size),
        ft.heldout_every.or(tr.heldout_every),
    )?;

    let refs_spec = args
        .refs
        .clone()
        .or_else(|| ft.refs.clone())
        .unwrap_or_else(|| DEFAULT_REFS.into());
    let (refs, heldout, ref_geoms) = split_references(eff, &refs_spec)?;

    let mut bare_loaded = None;
    let mut checkpoint_input = None;
    let (mut trainer, mask) = if args.from_scratch {
        let loaded_bare = data::load_series(&args.data_dir, TensorKind::Bare)?;
        let mask = build_zero_mask(&loaded_bare.series, MASK_EPS, MASK_EPS)?;
        let mcfg = model_config(eff.n_act(), &args.model, ctx)?;
        bare_loaded = Some(loaded_bare);
        (Trainer::new_finetune_scratch(&mcfg, &tcfg)?, mask)
    } else {
        let ck = args.checkpoint.as_ref().expect("clap enforces presence");
        let (ck_trainer, mask) = load_vnet(ck)?;
        reject_model_flags(&args.model, &ck_trainer.model.config)?;
        checkpoint_input = Some(ck.clone());
        (Trainer::new_finetune(ck_trainer.into_model(), &tcfg)?, mask)
    };

    let samples = build_samples(&refs, &mask)?;
    let heldout_samples = match &heldout {
        Some(series) => Some(build_samples(series, &mask)?),
        None => None,
    };
    announce("finetuning", &samples, &ref_geoms);
    let t0 = Instant::now();
    let history = trainer.train(&samples, heldout_samples.as_deref())?;
    let train_time = elapsed_s(t0);

    ensure_parent(&args.out)?;
    save_vnet(&trainer, &mask, &args.out)?;
    let loss_csv = args
        .loss_csv
        .clone()
        .unwrap_or_else(|| sibling(&args.out, "loss.csv"));
    write_loss(&loss_csv, &history)?;

    let mut manifest = RunManifest::new(
        "finetune",
        ctx.seed,
        ctx.threads,
        serde_json::json!({
            "data_dir": args.data_dir.display().to_string(),
            "refs": ref_geoms,
            "from_scratch": args.from_scratch,
            "model": model_json(&trainer.model.config),
            "train": train_json(&tcfg),
        }),
    );
    add_series_inputs(&mut manifest, &loaded)?;
    if let Some(loaded_bare) = &bare_loaded {
        for f in &loaded_bare.files {
            manifest.add_input(&base_of(&loaded_bare.manifest_path), f)?;
        }
    }
    if let Some(ck) = &checkpoint_input {
        manifest.add_input(&base_of(ck), ck)?;
    }
    let base = base_of(&args.out);
    manifest.add_output(&base, &args.out)?;
    manifest.add_output(&base, &loss_csv)?;
    manifest.add_timing("train", train_time);
    manifest.write(&sibling(&args.out, "manifest.json"))?;

    finish("finetuned", &history, train_time, &args.out);
    if let Some(last) = history.last() {
        if let Some(h) = last.heldout_mse {
            println!(
                "held-out mse {h:.6e} over {} geometries",
                heldout.map_or(0, |s| s.len())
            );
        }
    }
    Ok(())
}

pub fn ffm_train_cmd(ctx: &Ctx, args: &FfmTrainArgs) -> Result<()> {
    let loaded = data::load_series(&args.data_dir, TensorKind::Effective)?;
    let eff = &loaded.series;
    let loaded_bare = data::load_series(&args.data_dir, TensorKind::Bare)?;
    let mask = build_zero_mask(&loaded_bare.series, MASK_EPS, MASK_EPS)?;

    let fs = &ctx.file.ffm;
    let fcfg = FfmConfig::new(
        eff.n_act(),
        resolve(args.n_freq, fs.n_freq, DEFAULT_N_FREQ),
        resolve(args.sigma_f, fs.sigma_f, DEFAULT_SIGMA_F),
        resolve(args.width, fs.width, DEFAULT_HIDDEN_WIDTH),
        resolve(args.depth, fs.depth, DEFAULT_DEPTH),
    )?;
    let mut base_cfg = TrainConfig::pretrain_default(ctx.seed);
    base_cfg.epochs = DEFAULT_FFM_EPOCHS;
    let tcfg = resolve_train(
        base_cfg,
        &args.train,
        fs.epochs,
        fs.lr0,
        fs.batch_size,
        fs.heldout_every,
    )?;

    let refs_spec = args
        .refs
        .clone()
        .or_else(|| ctx.file.finetune.refs.clone())
        .unwrap_or_else(|| DEFAULT_REFS.into());
    let (refs, heldout, ref_geoms) = split_references(eff, &refs_spec)?;

    let samples = build_samples(&refs, &mask)?;
    let heldout_samples = match &heldout {
        Some(series) => Some(build_samples(series, &mask)?),
        None => None,
    };
    announce("ffm training", &samples, &ref_geoms);
    let t0 = Instant::now();
    let mut trainer = FfmTrainer::new(&fcfg, &tcfg)?;
    let history = trainer.train(&samples, heldout_samples.as_deref())?;
    let train_time = elapsed_s(t0);

    ensure_parent(&args.out)?;
    save_ffm(&trainer, &mask, &args.out)?;
    let loss_csv = args
        .loss_csv
        .clone()
        .unwrap_or_else(|| sibling(&args.out, "loss.csv"));
    write_loss(&loss_csv, &history)?;

    let mut manifest = RunManifest::new(
        "ffm-train",
        ctx.seed,
        ctx.threads,
        serde_json::json!({
            "data_dir": args.data_dir.display().to_string(),
            "refs": ref_geoms,
            "ffm": {
                "n_act": fcfg.n_act,
                "n_freq": fcfg.n_freq,
                "sigma_f": fcfg.sigma_f,
                "width": fcfg.hidden_width,
                "depth": fcfg.depth,
            },
            "train": train_json(&tcfg),
        }),
    );
    add_series_inputs(&mut manifest, &loaded)?;
    let base = base_of(&args.out);
    manifest.add_output(&base, &args.out)?;
    manifest.add_output(&base, &loss_csv)?;
    manifest.add_timing("train", train_time);
    manifest.write(&sibling(&args.out, "manifest.json"))?;

    finish("ffm trained", &history, train_time, &args.out);
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared plumbing

/// Applies flag/file overrides to a core default, flag first.
fn resolve_train(
    mut cfg: TrainConfig,
    flags: &TrainFlags,
    file_epochs: Option<usize>,
    file_lr0: Option<f64>,
    file_batch: Option<usize>,
    file_heldout: Option<usize>,
) -> Result<TrainConfig> {
    if let Some(v) = flags.epochs.or(file_epochs) {
        cfg.epochs = v;
    }
    if let Some(v) = flags.lr0.or(file_lr0) {
        cfg.lr0 = v;
    }
    if let Some(v) = flags.batch_size.or(file_batch) {
        cfg.batch_size = v;
    }
    if let Some(v) = flags.heldout_every.or(file_heldout) {
        cfg.heldout_every = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn model_config(n_act: usize, flags: &ModelFlags, ctx: &Ctx) -> Result<ModelConfig> {
    let m = &ctx.file.model;
    ModelConfig::new(
        n_act,
        resolve(flags.ell, m.ell, DEFAULT_ELL),
        resolve(flags.width, m.width, DEFAULT_HIDDEN_WIDTH),
        resolve(flags.depth, m.depth, DEFAULT_DEPTH),
    )
}

/// A checkpoint fixes the model shape; contradicting flags are mistakes.
fn reject_model_flags(flags: &ModelFlags, cfg: &ModelConfig) -> Result<()> {
    let clash = |name: &str, got: Option<usize>, have: usize| match got {
        Some(v) if v != have => Err(Error::InvalidConfig(format!(
            "--{name} {v} disagrees with the checkpoint ({have}); \
             the model shape is fixed by the checkpoint"
        ))),
        _ => Ok(()),
    };
    clash("ell", flags.ell, cfg.ell)?;
    clash("width", flags.width, cfg.hidden_width)?;
    clash("depth", flags.depth, cfg.depth)
}

/// Splits a series into reference and held-out parts; held-out is `None`
/// when the references cover the whole series.
fn split_references(
    series: &GeometrySeries,
    spec: &str,
) -> Result<(GeometrySeries, Option<GeometrySeries>, Vec<f64>)> {
    let want = parse_geometries(spec)?;
    let geoms = resolve_geometries(&want, &series.geometries())?;
    let refs = series.select(&geoms)?;
    let heldout = if refs.len() < series.len() {
        Some(series.without(&geoms)?)
    } else {
        None
    };
    Ok((refs, heldout, geoms))
}

fn announce(stage: &str, samples: &[TrainSample], geometries: &[f64]) {
    let list: Vec<String> = geometries.iter().map(|g| format!("{g}")).collect();
    println!(
        "{stage}: {} samples over geometries [{}], stream hash {:016x}",
        samples.len(),
        list.join(", "),
        sample_stream_hash(samples)
    );
}

fn finish(stage: &str, history: &[LossReport], seconds: f64, out: &Path) {
    match history.last() {
        Some(last) => println!(
            "{stage} in {seconds:.1} s ({} epochs, final train mse {:.6e}) -> {}",
            last.epoch,
            last.train_mse,
            out.display()
        ),
        None => println!("{stage} in {seconds:.1} s (0 epochs) -> {}", out.display()),
    }
}

fn write_loss(path: &Path, history: &[LossReport]) -> Result<()> {
    let mut buf = Vec::new();
    write_loss_csv(&mut buf, history).expect("in-memory write");
    write_text(path, std::str::from_utf8(&buf).expect("ascii csv"))
}

fn add_series_inputs(manifest: &mut RunManifest, loaded: &LoadedSeries) -> Result<()> {
    let base = base_of(&loaded.manifest_path);
    manifest.add_input(&base, &loaded.manifest_path)?;
    for f in &loaded.files {
        manifest.add_input(&base, f)?;
    }
    Ok(())
}

fn model_json(cfg: &ModelConfig) -> serde_json::Value {
    serde_json::json!({
        "n_act": cfg.n_act,
        "ell": cfg.ell,
        "width": cfg.hidden_width,
        "depth": cfg.depth,
        "params": param_count(cfg),
    })
}

fn train_json(cfg: &TrainConfig) -> serde_json::Value {
    serde_json::json!({
        "epochs": cfg.epochs,
        "lr0": cfg.lr0,
        "batch_size": cfg.batch_size,
        "seed": cfg.seed,
        "heldout_every": cfg.heldout_every,
    })
}

/// Masks travel with checkpoints; exposed for the reporting commands.
pub fn checkpoint_model(path: &Path) -> Result<(vnet_core::VNetModel, IndexMask)> {
    let (trainer, mask) = load_vnet(path)?;
    Ok((trainer.into_model(), mask))
}
