//! `predict`, `metrics`, `kernel-analysis`, `energy`, `grad-check`: the
//! commands that read trained checkpoints or generated data and produce
//! tensors, tables, and pass/fail verdicts.

use std::time::Instant;

use vnet_core::analysis::{kernel_screening, series_metrics, write_metrics_csv, write_tau_csv};
use vnet_core::energy::{correlation_match, energy_report, write_energy_csv, EnergyDecomposition};
use vnet_core::exchange::{write_exchange_file, ExchangeContent};
use vnet_core::model::ModelConfig;
use vnet_core::tensor::{GeometryEntry, GeometrySeries, ScalarTerm, TensorKind};
use vnet_core::train::grad_check;
use vnet_core::{Error, IndexMask, Result, VNetModel};

use super::training::checkpoint_model;
use super::{base_of, elapsed_s, ensure_parent, kind_of, write_text, Ctx};
use crate::args::{EnergyArgs, GradCheckArgs, KernelAnalysisArgs, MetricsArgs, PredictArgs};
use crate::config::parse_geometries;
use crate::data::{self, resolve_geometries};
use crate::manifest::{kind_str, RunManifest};

pub fn predict_cmd(ctx: &Ctx, args: &PredictArgs) -> Result<()> {
    if args.trials == 0 {
        return Err(Error::InvalidConfig("trials must be >= 1".into()));
    }
    let (model, mask) = checkpoint_model(&args.checkpoint)?;
    if model.kernel_eff.is_none() {
        return Err(Error::MissingEffectiveKernel);
    }

    // One warm-up evaluation, then timed trials of the same call.
    let mut tensor = model.eval_tensor(TensorKind::Effective, args.geometry, &mask)?;
    let mut times = Vec::with_capacity(args.trials);
    for _ in 0..args.trials {
        let t0 = Instant::now();
        tensor = model.eval_tensor(TensorKind::Effective, args.geometry, &mask)?;
        times.push(elapsed_s(t0));
    }
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / times.len() as f64;
    println!(
        "predicted n_act {} effective tensor at R = {}: {:.3} ms +/- {:.3} ms over {} trials",
        model.config.n_act,
        args.geometry,
        mean * 1e3,
        var.sqrt() * 1e3,
        args.trials
    );

    ensure_parent(&args.out)?;
    write_exchange_file(
        &args.out,
        &ExchangeContent {
            scalar: ScalarTerm(0.0),
            one_body: None,
            two_body: Some(&tensor),
            n_act: model.config.n_act,
            n_elec: args.n_elec,
            ms2: args.ms2,
        },
    )?;

    let mut manifest = RunManifest::new(
        "predict",
        ctx.seed,
        ctx.threads,
        serde_json::json!({
            "checkpoint": args.checkpoint.display().to_string(),
            "geometry": args.geometry,
            "trials": args.trials,
            "n_elec": args.n_elec,
            "ms2": args.ms2,
        }),
    );
    manifest.add_input(&base_of(&args.checkpoint), &args.checkpoint)?;
    let base = base_of(&args.out);
    manifest.add_tensor_output(
        &base,
        &args.out,
        tensor.kind(),
        tensor.symmetry(),
        args.geometry,
    )?;
    manifest.add_timing("predict_mean", mean);
    manifest.write(&super::sibling(&args.out, "manifest.json"))?;
    println!("tensor -> {}", args.out.display());
    Ok(())
}

pub fn metrics_cmd(ctx: &Ctx, args: &MetricsArgs) -> Result<()> {
    let kind = kind_of(args.kind);
    let ref_loaded = data::load_series(&args.reference, kind)?;
    let reference = &ref_loaded.series;

    let mut manifest = RunManifest::new(
        "metrics",
        ctx.seed,
        ctx.threads,
        serde_json::json!({
            "reference": args.reference.display().to_string(),
            "predicted": args.predicted.as_ref().map(|p| p.display().to_string()),
            "checkpoint": args.checkpoint.as_ref().map(|p| p.display().to_string()),
            "kind": kind_str(kind),
        }),
    );
    manifest.add_input(
        &base_of(&ref_loaded.manifest_path),
        &ref_loaded.manifest_path,
    )?;

    let (predicted, ref_sel) = match (&args.predicted, &args.checkpoint) {
        (Some(src), _) => {
            let pred_loaded = data::load_series(src, kind)?;
            manifest.add_input(
                &base_of(&pred_loaded.manifest_path),
                &pred_loaded.manifest_path,
            )?;
            // Stamp predicted entries onto the reference grid so pairing by
            // geometry value succeeds across decimal round-off.
            let aligned =
                resolve_geometries(&pred_loaded.series.geometries(), &reference.geometries())?;
            let entries: Vec<GeometryEntry> = pred_loaded
                .series
                .entries()
                .iter()
                .zip(&aligned)
                .map(|(e, &g)| GeometryEntry {
                    geometry: g,
                    ..e.clone()
                })
                .collect();
            (GeometrySeries::new(entries)?, reference.select(&aligned)?)
        }
        (None, Some(ck)) => {
            manifest.add_input(&base_of(ck), ck)?;
            let (model, mask) = checkpoint_model(ck)?;
            let predicted = predict_series(&model, &mask, kind, reference)?;
            (predicted, reference.clone())
        }
        (None, None) => unreachable!("clap requires one source"),
    };

    let rows = series_metrics(&predicted, &ref_sel)?;
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, &rows).expect("in-memory write");
    write_text(&args.out, std::str::from_utf8(&buf).expect("ascii csv"))?;

    let mean_mse = rows.iter().map(|(_, m)| m.mse).sum::<f64>() / rows.len() as f64;
    let worst_mae = rows.iter().fold(0.0f64, |a, (_, m)| a.max(m.mae));
    for (g, m) in &rows {
        println!("R = {g:<8}: mae {:.6e}, mse {:.6e}", m.mae, m.mse);
    }
    println!(
        "{} geometries: mean mse {mean_mse:.6e}, worst mae {worst_mae:.6e} -> {}",
        rows.len(),
        args.out.display()
    );

    manifest.add_output(&base_of(&args.out), &args.out)?;
    manifest.write(&super::sibling(&args.out, "manifest.json"))?;
    Ok(())
}

pub fn kernel_analysis_cmd(ctx: &Ctx, args: &KernelAnalysisArgs) -> Result<()> {
    let (model, _mask) = checkpoint_model(&args.checkpoint)?;
    let eff = model
        .kernel_eff
        .as_ref()
        .ok_or(Error::MissingEffectiveKernel)?;

    let t0 = Instant::now();
    let report = kernel_screening(&model.kernel_bare, eff)?;
    let analysis_time = elapsed_s(t0);

    let mut buf = Vec::new();
    write_tau_csv(&mut buf, &report).expect("in-memory write");
    write_text(&args.out, std::str::from_utf8(&buf).expect("ascii csv"))?;

    let s = &report.screening;
    println!(
        "congruence diagonality {:.3e} (off-diagonal fraction in the bare eigenbasis)",
        report.congruence.diagonality
    );
    println!(
        "{} channels retained, {} excluded below eta = {:.3e}",
        s.tau.len(),
        s.excluded.len(),
        s.eta
    );
    println!(
        "ratio profile fit: tau(k) = {:.6} * tan({:.6} * (k - {:.3})), rms {:.3e}",
        report.fit.beta, report.fit.alpha, report.fit.rank_c, report.fit.rms
    );

    let mut manifest = RunManifest::new(
        "kernel-analysis",
        ctx.seed,
        ctx.threads,
        serde_json::json!({
            "checkpoint": args.checkpoint.display().to_string(),
            "ell": model.config.ell,
        }),
    );
    manifest.add_input(&base_of(&args.checkpoint), &args.checkpoint)?;
    manifest.add_output(&base_of(&args.out), &args.out)?;
    manifest.add_timing("analysis", analysis_time);
    manifest.write(&super::sibling(&args.out, "manifest.json"))?;
    println!("profile -> {}", args.out.display());
    Ok(())
}

pub fn energy_cmd(ctx: &Ctx, args: &EnergyArgs) -> Result<()> {
    let kind = kind_of(args.kind);
    let loaded = data::load_series(&args.data_dir, kind)?;
    let series = match &args.geometries {
        Some(spec) => {
            let want = parse_geometries(spec)?;
            let geoms = resolve_geometries(&want, &loaded.series.geometries())?;
            loaded.series.select(&geoms)?
        }
        None => loaded.series.clone(),
    };

    let t0 = Instant::now();
    let reports = energy_report(&series, args.n_elec, args.ms2)?;
    let solve_time = elapsed_s(t0);
    print_energies(kind_str(kind), &reports);
    let mut buf = Vec::new();
    write_energy_csv(&mut buf, &reports).expect("in-memory write");
    write_text(&args.out, std::str::from_utf8(&buf).expect("ascii csv"))?;

    let mut manifest = RunManifest::new(
        "energy",
        ctx.seed,
        ctx.threads,
        serde_json::json!({
            "data_dir": args.data_dir.display().to_string(),
            "kind": kind_str(kind),
            "n_elec": args.n_elec,
            "ms2": args.ms2,
            "geometries": series.geometries(),
        }),
    );
    manifest.add_input(&base_of(&loaded.manifest_path), &loaded.manifest_path)?;
    manifest.add_output(&base_of(&args.out), &args.out)?;
    manifest.add_timing("solve", solve_time);

    if let Some(ck) = &args.checkpoint {
        let predicted_out = args.predicted_out.as_ref().expect("clap ties the flags");
        manifest.add_input(&base_of(ck), ck)?;
        let (model, mask) = checkpoint_model(ck)?;
        // Predicted two-body tensors; the stored one-body and scalar parts
        // are kept so the decompositions differ only in what the model learns.
        let predicted = predict_series(&model, &mask, kind, &series)?;
        let t0 = Instant::now();
        let pred_reports = energy_report(&predicted, args.n_elec, args.ms2)?;
        let pred_time = elapsed_s(t0);
        print_energies("predicted", &pred_reports);
        let mut buf = Vec::new();
        write_energy_csv(&mut buf, &pred_reports).expect("in-memory write");
        write_text(predicted_out, std::str::from_utf8(&buf).expect("ascii csv"))?;

        let worst_total = reports
            .iter()
            .zip(&pred_reports)
            .fold(0.0f64, |a, (t, p)| a.max((t.e_total - p.e_total).abs()));
        println!(
            "predicted vs stored: worst |dE_total| {worst_total:.6e}, \
             worst relative correlation error {:.6e}",
            correlation_match(&pred_reports, &reports)?
        );
        manifest.add_output(&base_of(predicted_out), predicted_out)?;
        manifest.add_timing("solve_predicted", pred_time);
    }

    manifest.write(&super::sibling(&args.out, "manifest.json"))?;
    println!("decomposition -> {}", args.out.display());
    Ok(())
}

pub fn grad_check_cmd(ctx: &Ctx, args: &GradCheckArgs) -> Result<()> {
    let mcfg = ModelConfig::new(args.n_act, args.ell, args.width, args.depth)?;
    let mut worst = 0.0f64;
    for (phase, seed) in [
        (TensorKind::Bare, ctx.seed),
        (TensorKind::Effective, ctx.seed.wrapping_add(1)),
    ] {
        let rep = grad_check(
            &mcfg,
            phase,
            seed,
            args.batches,
            args.batch_size,
            args.fd_step,
            args.corrupt,
        )?;
        println!(
            "{} phase (worst of {} batches):",
            kind_str(phase),
            args.batches
        );
        for (name, err) in &rep.per_array {
            println!("  {name:<12} {err:.3e}");
        }
        worst = worst.max(rep.max_rel_error);
    }
    if worst > 1e-6 {
        return Err(Error::Numerical(format!(
            "analytic and finite-difference gradients disagree: \
             worst relative error {worst:.3e} exceeds 1e-6"
        )));
    }
    println!("gradient check passed: worst relative error {worst:.3e} (tolerance 1e-6)");
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared helpers

/// Model predictions at every geometry of `template`, keeping its stored
/// one-body and scalar parts.
fn predict_series(
    model: &VNetModel,
    mask: &IndexMask,
    kind: TensorKind,
    template: &GeometrySeries,
) -> Result<GeometrySeries> {
    let mut entries = Vec::with_capacity(template.len());
    for e in template.entries() {
        entries.push(GeometryEntry {
            geometry: e.geometry,
            two_body: model.eval_tensor(kind, e.geometry, mask)?,
            one_body: e.one_body.clone(),
            scalar: e.scalar,
        });
    }
    GeometrySeries::new(entries)
}

fn print_energies(label: &str, rows: &[EnergyDecomposition]) {
    for r in rows {
        println!(
            "{label:<10} R = {:<8}: e_total {:+.10e}, e_ref {:+.10e}, e_corr {:+.6e}, dim {}",
            r.geometry, r.e_total, r.e_ref, r.e_corr, r.dim
        );
    }
}
