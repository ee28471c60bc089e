//! End-to-end composition: generate -> pretrain -> finetune -> predict ->
//! metrics -> energy -> ffm-train -> kernel-analysis, all through the binary
//! with tiny settings, sharing one temporary workspace.

use std::path::Path;
use std::process::{Command, Output};

fn vnet(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vnet"))
        .args(args)
        .current_dir(dir)
        .env_remove("VNET_THREADS")
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn commands_compose_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // Generate a tiny data set twice; tensor files must be byte-identical.
    let gen_args = [
        "gen-synthetic",
        "--n-act",
        "2",
        "--geometries",
        "0.9,1.3,1.8,2.4",
        "--n-quad",
        "64",
    ];
    let out = vnet(&[&gen_args[..], &["--out-dir", "data"]].concat(), root);
    assert_ok(&out, "gen-synthetic");
    let out = vnet(&[&gen_args[..], &["--out-dir", "data2"]].concat(), root);
    assert_ok(&out, "gen-synthetic rerun");
    for stem in ["bare", "eff"] {
        for i in 0..4 {
            let name = format!("{stem}_{i:03}.fcidump");
            let a = std::fs::read(root.join("data").join(&name)).unwrap();
            let b = std::fs::read(root.join("data2").join(&name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }
    assert!(root.join("data/manifest.json").exists());

    // Pretrain on the bare series.
    let out = vnet(
        &[
            "--seed",
            "11",
            "pretrain",
            "--data-dir",
            "data",
            "--out",
            "runs/pre.ckpt",
            "--ell",
            "6",
            "--width",
            "8",
            "--depth",
            "2",
            "--epochs",
            "30",
            "--batch-size",
            "64",
        ],
        root,
    );
    assert_ok(&out, "pretrain");
    assert!(stdout(&out).contains("stream hash"));
    assert!(root.join("runs/pre.ckpt").exists());
    assert!(root.join("runs/pre.loss.csv").exists());
    assert!(root.join("runs/pre.manifest.json").exists());
    let loss = read(&root.join("runs/pre.loss.csv"));
    assert!(loss.starts_with("epoch,train_mse,heldout_mse"));
    assert_eq!(
        loss.trim_end().lines().count(),
        31,
        "header + one row per epoch"
    );

    // Finetune from the pretrained checkpoint on two reference geometries.
    let out = vnet(
        &[
            "--seed",
            "11",
            "finetune",
            "--data-dir",
            "data",
            "--checkpoint",
            "runs/pre.ckpt",
            "--out",
            "runs/fine.ckpt",
            "--refs",
            "1.3,2.4",
            "--epochs",
            "40",
        ],
        root,
    );
    assert_ok(&out, "finetune");
    assert!(root.join("runs/fine.ckpt").exists());
    let manifest = read(&root.join("runs/fine.manifest.json"));
    assert!(manifest.contains("\"from_scratch\": false"));

    // The ablation flag trains without any checkpoint.
    let out = vnet(
        &[
            "finetune",
            "--data-dir",
            "data",
            "--from-scratch",
            "--out",
            "runs/scratch.ckpt",
            "--refs",
            "1.3,2.4",
            "--epochs",
            "5",
            "--ell",
            "6",
            "--width",
            "8",
            "--depth",
            "2",
        ],
        root,
    );
    assert_ok(&out, "finetune --from-scratch");

    // Predict at a held-out geometry and reuse the output as a data source.
    let out = vnet(
        &[
            "predict",
            "--checkpoint",
            "runs/fine.ckpt",
            "--geometry",
            "1.8",
            "--out",
            "pred/tensor.fcidump",
            "--trials",
            "3",
        ],
        root,
    );
    assert_ok(&out, "predict");
    assert!(stdout(&out).contains("ms +/-"));
    let pred_manifest = read(&root.join("pred/tensor.manifest.json"));
    assert!(pred_manifest.contains("\"kind\": \"effective\""));
    assert!(pred_manifest.contains("\"geometry\": 1.8"));

    // Metrics between the stored series and the predicted file.
    let out = vnet(
        &[
            "metrics",
            "--reference",
            "data",
            "--predicted",
            "pred/tensor.manifest.json",
            "--out",
            "reports/single.csv",
        ],
        root,
    );
    assert_ok(&out, "metrics vs predicted file");
    let csv = read(&root.join("reports/single.csv"));
    assert!(csv.starts_with("geometry,mae,mse"));
    assert_eq!(csv.trim_end().lines().count(), 2, "one compared geometry");

    // Metrics straight from the checkpoint cover every stored geometry.
    let out = vnet(
        &[
            "metrics",
            "--reference",
            "data",
            "--checkpoint",
            "runs/fine.ckpt",
            "--out",
            "reports/all.csv",
        ],
        root,
    );
    assert_ok(&out, "metrics vs checkpoint");
    let csv = read(&root.join("reports/all.csv"));
    assert_eq!(
        csv.trim_end().lines().count(),
        5,
        "four compared geometries"
    );

    // Energy decompositions of stored and predicted tensors.
    let out = vnet(
        &[
            "energy",
            "--data-dir",
            "data",
            "--n-elec",
            "2",
            "--checkpoint",
            "runs/fine.ckpt",
            "--predicted-out",
            "reports/pred_energy.csv",
            "--out",
            "reports/energy.csv",
        ],
        root,
    );
    assert_ok(&out, "energy");
    assert!(stdout(&out).contains("worst |dE_total|"));
    let csv = read(&root.join("reports/energy.csv"));
    assert!(csv.starts_with("geometry,e_total,e_ref,e_corr,dim"));
    assert_eq!(csv.trim_end().lines().count(), 5);
    assert!(root.join("reports/pred_energy.csv").exists());

    // Fourier-feature baseline on the same references.
    let out = vnet(
        &[
            "ffm-train",
            "--data-dir",
            "data",
            "--out",
            "runs/ffm.ckpt",
            "--refs",
            "1.3,2.4",
            "--n-freq",
            "8",
            "--width",
            "6",
            "--depth",
            "2",
            "--epochs",
            "10",
        ],
        root,
    );
    assert_ok(&out, "ffm-train");
    assert!(root.join("runs/ffm.ckpt").exists());
    assert!(root.join("runs/ffm.loss.csv").exists());

    // Kernel screening profile from the finetuned checkpoint.
    let out = vnet(
        &[
            "kernel-analysis",
            "--checkpoint",
            "runs/fine.ckpt",
            "--out",
            "reports/tau.csv",
        ],
        root,
    );
    assert_ok(&out, "kernel-analysis");
    let csv = read(&root.join("reports/tau.csv"));
    assert!(csv.starts_with("rank,tau,fit"));
    assert!(stdout(&out).contains("congruence diagonality"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(
        root.join("vnet.toml"),
        "seed = 5\n\n[train]\nepochs = 5\n\n[model]\nell = 6\nwidth = 8\ndepth = 2\n",
    )
    .unwrap();

    let out = vnet(
        &[
            "gen-synthetic",
            "--out-dir",
            "data",
            "--n-act",
            "2",
            "--geometries",
            "0.9,1.4",
            "--n-quad",
            "64",
        ],
        root,
    );
    assert_ok(&out, "gen-synthetic");

    // Epoch count comes from the file: 5 rows after the header.
    let out = vnet(
        &[
            "--config",
            "vnet.toml",
            "pretrain",
            "--data-dir",
            "data",
            "--out",
            "runs/file.ckpt",
        ],
        root,
    );
    assert_ok(&out, "pretrain with config file");
    let loss = read(&root.join("runs/file.loss.csv"));
    assert_eq!(loss.trim_end().lines().count(), 6);

    // The flag wins over the file.
    let out = vnet(
        &[
            "--config",
            "vnet.toml",
            "pretrain",
            "--data-dir",
            "data",
            "--out",
            "runs/flag.ckpt",
            "--epochs",
            "2",
        ],
        root,
    );
    assert_ok(&out, "pretrain with overriding flag");
    let loss = read(&root.join("runs/flag.loss.csv"));
    assert_eq!(loss.trim_end().lines().count(), 3);

    // The file seed lands in the manifest.
    let manifest = read(&root.join("runs/file.manifest.json"));
    assert!(manifest.contains("\"seed\": 5"));
}
