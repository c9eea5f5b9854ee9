use std::path::Path;
use std::process::{Command, Output};

fn ddosnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddosnet"))
        .args(args)
        .output()
        .expect("run ddosnet")
}

fn ok(args: &[&str]) -> String {
    let out = ddosnet(args);
    assert!(
        out.status.success(),
        "ddosnet {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// synth → prepare, shared by the tests below.
fn prepared(root: &Path, seed: &str) -> (String, String) {
    let raw = root.join("raw");
    let run = root.join("run");
    ok(&[
        "synth", "--out-dir", path(&raw), "--seed", seed, "--n-benign", "60", "--n-attack", "60",
        "--n-features", "8", "--separation", "8",
    ]);
    let catalog = raw.join("synthetic.catalog");
    ok(&[
        "prepare",
        "--catalog",
        path(&catalog),
        "--data",
        path(&raw.join("synthetic.csv")),
        "--out-dir",
        path(&run),
        "--seed",
        seed,
    ]);
    (path(&catalog).to_string(), path(&run).to_string())
}

#[test]
fn full_command_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let (catalog, run) = prepared(dir.path(), "3");
    let run_dir = Path::new(&run);
    for f in ["train.csv", "val.csv", "test.csv", "scaler.json", "manifest.json"] {
        assert!(run_dir.join(f).exists(), "{f}");
    }
    let common = [
        "--catalog", &catalog, "--out-dir", &run, "--seq-len", "2", "--epochs", "2", "--pretrain-epochs", "1",
        "--lr", "0.001", "--strict-determinism",
    ];

    let mut train_args = vec!["train"];
    train_args.extend(common);
    let progress = ok(&train_args);
    let lines: Vec<&str> = progress.lines().collect();
    assert_eq!(lines.len(), 3, "{progress}");
    assert_eq!(lines[0].split_whitespace().count(), 5);
    assert!(lines[0].starts_with("pretrain 1 ") && lines[1].starts_with("finetune 1 "));
    let history = std::fs::read_to_string(run_dir.join("history.csv")).unwrap();
    assert!(history.starts_with("phase,epoch,train_loss,val_loss,seconds\npretrain,1,"));

    let model = run_dir.join("model.json");
    let mut eval_args = vec!["evaluate", "--model", path(&model)];
    eval_args.extend(common);
    let report = ok(&eval_args);
    assert!(report.contains("accuracy") && report.contains("auc"));
    let csv = std::fs::read_to_string(run_dir.join("report.csv")).unwrap();
    assert!(csv.starts_with("model,precision_attack,precision_benign,recall_attack,recall_benign,f1_attack,f1_benign,accuracy\nDDoSNet,"));

    let mut base_args = vec!["baseline", "--kinds", "all", "--model", path(&model)];
    base_args.extend(common);
    ok(&base_args);
    let table = std::fs::read_to_string(run_dir.join("baselines.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 6 + 1);
    for line in table.lines().skip(1).take(6) {
        let acc: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(acc >= 0.95, "{line}");
    }

    let mut sweep_args = vec!["sweep-lr", "--rates", "0.01,0.001"];
    sweep_args.extend(common);
    ok(&sweep_args);
    let sweep = std::fs::read_to_string(run_dir.join("sweep_lr.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
    assert!(sweep.lines().nth(1).unwrap().starts_with("0.01,"));

    let history_path = format!("{run}/history.csv");
    let mut plot_args = vec!["plot", "loss", "--history", &history_path];
    plot_args.extend(common);
    ok(&plot_args);
    assert!(run_dir.join("loss_finetune.svg").exists());

    let data = format!("{run}/train.csv");
    let mut andrews = vec!["plot", "andrews", "--data", &data, "--k", "4"];
    andrews.extend(common);
    ok(&andrews);
    assert!(run_dir.join("andrews.svg").exists());
}

#[test]
fn prepare_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (_, run_a) = prepared(a.path(), "9");
    let (_, run_b) = prepared(b.path(), "9");
    for f in ["train.csv", "val.csv", "test.csv", "scaler.json", "manifest.json"] {
        let x = std::fs::read(Path::new(&run_a).join(f)).unwrap();
        let y = std::fs::read(Path::new(&run_b).join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    // missing input file: configuration error
    let missing = ddosnet(&["prepare", "--data", "/nonexistent.csv", "--out-dir", path(&out_dir)]);
    assert_eq!(missing.status.code(), Some(2));
    // unknown flag
    assert_eq!(ddosnet(&["train", "--bogus"]).status.code(), Some(2));
    // unparsable data file: data error
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "not,a,flow,file\n1,2,3,4\n").unwrap();
    let code = ddosnet(&["prepare", "--data", path(&bad), "--out-dir", path(&out_dir)]).status.code();
    assert_eq!(code, Some(3));
    // train without prepared splits
    let code = ddosnet(&["train", "--out-dir", path(&dir.path().join("empty"))]).status.code();
    assert_eq!(code, Some(3));
}

#[test]
fn default_catalog_has_77_features() {
    let dir = tempfile::tempdir().unwrap();
    let catalog = ddosnet::catalog::FeatureCatalog::cicddos2019();
    assert_eq!(catalog.feature_count(), 77);
    // a CSV in the corpus layout, including identity columns and a non-finite row
    let mut header: Vec<String> = catalog.dropped_names().to_vec();
    header.extend(catalog.feature_names().iter().cloned());
    header.push(" Label".into());
    let mut text = header.join(",") + "\n";
    for i in 0..30 {
        let mut row: Vec<String> = catalog.dropped_names().iter().map(|_| "x".to_string()).collect();
        row.extend((0..77).map(|j| ((i * 7 + j) % 13).to_string()));
        row.push(if i % 2 == 0 { "BENIGN".into() } else { "DrDoS_DNS".into() });
        text += &(row.join(",") + "\n");
    }
    let mut bad: Vec<String> = catalog.dropped_names().iter().map(|_| "x".to_string()).collect();
    bad.extend((0..77).map(|j| if j == 5 { "Infinity".to_string() } else { "1".to_string() }));
    bad.push("BENIGN".into());
    text += &(bad.join(",") + "\n");
    let csv = dir.path().join("day.csv");
    std::fs::write(&csv, text).unwrap();
    let out_dir = dir.path().join("out");
    ok(&["prepare", "--data", path(&csv), "--out-dir", path(&out_dir)]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["cleaning"]["rows_dropped_nonfinite"], 1);
    assert_eq!(manifest["cleaning"]["rows_kept"], 30);
    let train = std::fs::read_to_string(out_dir.join("train.csv")).unwrap();
    assert_eq!(train.lines().next().unwrap().split(',').count(), 78);
}
