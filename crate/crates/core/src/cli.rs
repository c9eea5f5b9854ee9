//! Command implementations behind the `ddosnet` binary.
//!
//! Every command reads its inputs, writes only inside the configured output
//! directory, and is a pure function of its configuration, inputs and seed.
//! Progress goes to the supplied writer; warnings go to stderr.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::json;

use crate::baselines::{predict_baseline, train_baseline, BaselineKind, Hyper};
use crate::catalog::{load_catalog, Dataset, FeatureCatalog, LabelClass};
use crate::error::{Error, Result};
use crate::ingest::{generate_synthetic, load_flow_csv, write_flow_csv, CleaningReport, SynthSpec};
use crate::metrics::{auc, per_class_report, roc_curve, write_report_csv, MetricReport};
use crate::model::{finetune_with, predict, pretrain_with, AutoencoderModel, TrainConfig, TrainHistory, ENCODER_WIDTHS};
use crate::persist::{
    load_history, load_model, load_scaler, save_history, save_model_file, save_scaler, sha256_file, write_text,
    Manifest, ModelFile, MANIFEST_FILE, MANIFEST_FORMAT_VERSION,
};
use crate::preprocess::{
    apply_minmax, balance_sample, fit_minmax, frame_sequences, hold_out_subtype, stratified_split,
    stratified_subsample, GroupKey, SplitSpec,
};
use crate::viz::{render_andrews, render_loss, render_roc, PcaFitOn};

pub const DEFAULT_SEQ_LEN: usize = 7;
pub const DEFAULT_PRETRAIN_EPOCHS: usize = 20;
pub const DEFAULT_SWEEP_RATES: [f64; 4] = [0.1, 0.01, 0.001, 0.0001];

pub const TRAIN_FILE: &str = "train.csv";
pub const VAL_FILE: &str = "val.csv";
pub const TEST_FILE: &str = "test.csv";
pub const HOLDOUT_FILE: &str = "holdout.csv";
pub const SCALER_FILE: &str = "scaler.json";
pub const MODEL_FILE: &str = "model.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const SYNTH_DATA_FILE: &str = "synthetic.csv";
pub const SYNTH_CATALOG_FILE: &str = "synthetic.catalog";

/// Settings shared by the commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// `None` selects the built-in CICDDoS2019 catalog.
    pub catalog: Option<PathBuf>,
    pub data: Vec<PathBuf>,
    pub split: SplitSpec,
    /// Target train/val/test sizes; overrides the split fractions.
    pub split_counts: Option<[usize; 3]>,
    pub holdout_subtype: Option<String>,
    pub balance: Option<(usize, GroupKey)>,
    pub train: TrainConfig,
    pub pretrain_epochs: usize,
    pub seq_len: usize,
    pub out_dir: PathBuf,
    /// Directory holding prepared splits; defaults to `out_dir`.
    pub prepared_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            catalog: None,
            data: Vec::new(),
            split: SplitSpec::default(),
            split_counts: None,
            holdout_subtype: None,
            balance: None,
            train: TrainConfig::default(),
            pretrain_epochs: DEFAULT_PRETRAIN_EPOCHS,
            seq_len: DEFAULT_SEQ_LEN,
            out_dir: PathBuf::from("out"),
            prepared_dir: None,
        }
    }
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    pub fn prepared(&self) -> &Path {
        self.prepared_dir.as_deref().unwrap_or(&self.out_dir)
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn load_catalog(&self) -> Result<Arc<FeatureCatalog>> {
        Ok(Arc::new(match &self.catalog {
            Some(path) => load_catalog(path)?,
            None => FeatureCatalog::cicddos2019(),
        }))
    }

    /// Checks referenced input paths and creates the output directory.
    pub fn validate(&self) -> Result<()> {
        for path in self.catalog.iter().chain(&self.data) {
            if !path.exists() {
                return Err(Error::Config(format!("{} does not exist", path.display())));
            }
        }
        if self.seq_len == 0 {
            return Err(Error::Config("--seq-len must be at least 1".into()));
        }
        std::fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))
    }

    fn pretrain_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.pretrain_epochs,
            ..self.train.clone()
        }
    }
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn step_dim_for(features: usize, seq_len: usize) -> Result<usize> {
    if seq_len == 0 || !features.is_multiple_of(seq_len) {
        return Err(Error::Config(format!(
            "--seq-len {seq_len} does not divide the feature count {features}"
        )));
    }
    Ok(features / seq_len)
}

fn load_split(path: &Path, catalog: &Arc<FeatureCatalog>) -> Result<Dataset> {
    let (mut data, report) = load_flow_csv(path, catalog)?;
    if report.rows_kept != report.rows_read {
        return Err(Error::Data(format!(
            "{} contains {} unusable rows; prepared splits must be clean",
            path.display(),
            report.rows_read - report.rows_kept
        )));
    }
    data.provenance = file_name(path);
    Ok(data)
}

/// Writes a seeded two-class Gaussian dataset and its catalog.
pub fn cmd_synth(spec: &SynthSpec, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let data = generate_synthetic(spec)?;
    let csv_path = out_dir.join(SYNTH_DATA_FILE);
    let catalog_path = out_dir.join(SYNTH_CATALOG_FILE);
    write_flow_csv(&data, &csv_path)?;
    write_text(&catalog_path, &data.catalog.to_text())?;
    Ok((csv_path, catalog_path))
}

#[derive(Debug, Clone)]
pub struct PrepareSummary {
    pub manifest: Manifest,
    pub cleaning: CleaningReport,
}

/// ingest → drop → clean → encode → split → balance (train only) → scale
/// (fitted on train), then writes the splits, scaler and manifest.
pub fn cmd_prepare(cfg: &RunConfig, log: &mut dyn Write) -> Result<PrepareSummary> {
    cfg.validate()?;
    if cfg.data.is_empty() {
        return Err(Error::Config("prepare needs at least one --data file".into()));
    }
    let catalog = cfg.load_catalog()?;
    let mut cleaning = CleaningReport::default();
    let mut inputs = BTreeMap::new();
    let mut combined: Option<Dataset> = None;
    for path in &cfg.data {
        let (mut part, report) = load_flow_csv(path, &catalog)?;
        part.provenance = file_name(path);
        cleaning.merge(&report);
        inputs.insert(file_name(path), sha256_file(path)?);
        let _ = writeln!(
            log,
            "{}: read {} rows, kept {}, dropped {} non-finite, {} malformed",
            file_name(path),
            report.rows_read,
            report.rows_kept,
            report.rows_dropped_nonfinite,
            report.rows_dropped_malformed
        );
        combined = Some(match combined {
            None => part,
            Some(acc) => acc.concat(part)?,
        });
    }
    let mut data = combined.ok_or_else(|| Error::Data("no records".into()))?;
    if data.is_empty() {
        return Err(Error::Data("no usable records after cleaning".into()));
    }

    let mut holdout = None;
    if let Some(subtype) = &cfg.holdout_subtype {
        let (rest, held) = hold_out_subtype(&data, subtype);
        if held.is_empty() {
            return Err(Error::Data(format!("no records with subtype {subtype:?}")));
        }
        data = rest;
        holdout = Some(held);
    }

    let mut split = cfg.split;
    split.seed = cfg.seed();
    if let Some(counts) = cfg.split_counts {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::Config("--split-counts must not all be zero".into()));
        }
        if total > data.len() {
            return Err(Error::Data(format!(
                "--split-counts asks for {total} records, only {} available",
                data.len()
            )));
        }
        data = stratified_subsample(&data, total, cfg.seed());
        split.train_fraction = counts[0] as f64 / total as f64;
        split.val_fraction = counts[1] as f64 / total as f64;
        split.test_fraction = counts[2] as f64 / total as f64;
    }
    let (mut train, val, test) = stratified_split(&data, &split)?;
    if let Some((per_group, key)) = cfg.balance {
        train = balance_sample(&train, per_group, key, cfg.seed())?;
    }
    let scaler = fit_minmax(&train)?;
    let mut outputs = BTreeMap::new();
    let mut split_sizes = BTreeMap::new();
    let mut parts = vec![(TRAIN_FILE, train), (VAL_FILE, val), (TEST_FILE, test)];
    if let Some(held) = holdout {
        parts.push((HOLDOUT_FILE, held));
    }
    for (name, part) in &parts {
        let scaled = apply_minmax(part, &scaler)?;
        let path = cfg.out(name);
        write_flow_csv(&scaled, &path)?;
        outputs.insert(name.to_string(), sha256_file(&path)?);
        split_sizes.insert(name.trim_end_matches(".csv").to_string(), part.len());
    }
    save_scaler(&scaler, &catalog, cfg.out(SCALER_FILE))?;
    outputs.insert(SCALER_FILE.to_string(), sha256_file(cfg.out(SCALER_FILE))?);

    let mut settings = BTreeMap::new();
    settings.insert("seed".into(), json!(cfg.seed()));
    settings.insert("split".into(), serde_json::to_value(split)?);
    settings.insert("split_counts".into(), json!(cfg.split_counts));
    settings.insert("holdout_subtype".into(), json!(cfg.holdout_subtype));
    settings.insert(
        "balance".into(),
        json!(cfg.balance.map(|(n, key)| json!({"per_group": n, "key": key}))),
    );
    let manifest = Manifest {
        format_version: MANIFEST_FORMAT_VERSION,
        catalog_version: catalog.version_tag().to_string(),
        catalog_hash: catalog.digest(),
        inputs,
        outputs,
        cleaning,
        split_sizes,
        settings,
    };
    manifest.save(cfg.out(MANIFEST_FILE))?;
    manifest.verify_outputs(&cfg.out_dir)?;
    let _ = writeln!(
        log,
        "prepared {} features: {}",
        catalog.feature_count(),
        manifest
            .split_sizes
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(PrepareSummary { manifest, cleaning })
}

fn load_manifest(dir: &Path, catalog: &FeatureCatalog) -> Result<Manifest> {
    let manifest = Manifest::load(dir.join(MANIFEST_FILE))?;
    manifest.verify_outputs(dir)?;
    if manifest.catalog_hash != catalog.digest() {
        return Err(Error::Catalog(format!(
            "splits in {} were prepared with catalog {}, active catalog is {}",
            dir.display(),
            manifest.catalog_hash,
            catalog.digest()
        )));
    }
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: AutoencoderModel,
    pub file: ModelFile,
    pub pretrain: TrainHistory,
    pub finetune: TrainHistory,
}

fn train_model(
    cfg: &RunConfig,
    train: &Dataset,
    val: &Dataset,
    log: &mut dyn Write,
) -> Result<(AutoencoderModel, TrainHistory, TrainHistory)> {
    cfg.train.validate()?;
    let step_dim = step_dim_for(train.feature_count(), cfg.seq_len)?;
    let train_seq = frame_sequences(train, cfg.seq_len)?;
    let val_seq = frame_sequences(val, cfg.seq_len)?;
    let mut model = AutoencoderModel::new(cfg.seq_len, step_dim, &ENCODER_WIDTHS, cfg.train.activation, cfg.seed())?;
    let mut progress = |phase: crate::model::Phase, e: &crate::model::EpochRecord| {
        let _ = writeln!(log, "{phase} {} {:.6} {:.6} {:.3}", e.epoch, e.train_loss, e.val_loss, e.seconds);
    };
    let pretrain = if cfg.pretrain_epochs > 0 {
        pretrain_with(&mut model, &train_seq, &val_seq, &cfg.pretrain_config(), &mut progress)?
    } else {
        TrainHistory {
            phase: crate::model::Phase::Pretrain,
            epochs: Vec::new(),
            best_epoch: None,
        }
    };
    let finetune = finetune_with(&mut model, &train_seq, &val_seq, &cfg.train, &mut progress)?;
    Ok((model, pretrain, finetune))
}

fn provenance(cfg: &RunConfig, manifest: &Manifest) -> Result<BTreeMap<String, serde_json::Value>> {
    let mut p = BTreeMap::new();
    p.insert("seed".into(), json!(cfg.seed()));
    p.insert("train_config".into(), serde_json::to_value(&cfg.train)?);
    p.insert("pretrain_epochs".into(), json!(cfg.pretrain_epochs));
    p.insert("encoder_widths".into(), json!(ENCODER_WIDTHS));
    p.insert("catalog_version".into(), json!(manifest.catalog_version));
    p.insert("splits".into(), json!(manifest.outputs));
    p.insert("inputs".into(), json!(manifest.inputs));
    Ok(p)
}

fn strip_timing(history: &TrainHistory) -> TrainHistory {
    let mut h = history.clone();
    h.epochs.iter_mut().for_each(|e| e.seconds = 0.0);
    h
}

/// Pretrains then fine-tunes on the prepared splits and writes the model,
/// history CSV and loss plots.
pub fn cmd_train(cfg: &RunConfig, log: &mut dyn Write) -> Result<TrainOutcome> {
    cfg.validate()?;
    let catalog = cfg.load_catalog()?;
    let manifest = load_manifest(cfg.prepared(), &catalog)?;
    let train = load_split(&cfg.prepared().join(TRAIN_FILE), &catalog)?;
    let val = load_split(&cfg.prepared().join(VAL_FILE), &catalog)?;
    let (model, pretrain, finetune) = match train_model(cfg, &train, &val, log) {
        Err(Error::NonFiniteLoss { phase, epoch, history }) => {
            save_history(&[&history], cfg.out(HISTORY_FILE))?;
            return Err(Error::NonFiniteLoss { phase, epoch, history });
        }
        other => other?,
    };
    let file = ModelFile::from_model(&model, &catalog.digest(), provenance(cfg, &manifest)?);
    save_model_file(&file, cfg.out(MODEL_FILE))?;
    let (pre_out, fine_out) = if cfg.train.strict_determinism {
        (strip_timing(&pretrain), strip_timing(&finetune))
    } else {
        (pretrain.clone(), finetune.clone())
    };
    save_history(&[&pre_out, &fine_out], cfg.out(HISTORY_FILE))?;
    if !pretrain.epochs.is_empty() {
        render_loss(&pretrain, cfg.out("loss_pretrain.svg"))?;
    }
    render_loss(&finetune, cfg.out("loss_finetune.svg"))?;
    Ok(TrainOutcome {
        model,
        file,
        pretrain,
        finetune,
    })
}

fn evaluate_model(model: &AutoencoderModel, data: &Dataset) -> Result<(MetricReport, Vec<f64>)> {
    let batch = frame_sequences(data, model.seq_len)?;
    if batch.step_dim != model.step_dim {
        return Err(Error::Dimension(format!(
            "model expects {} features per step, data framed to {}",
            model.step_dim, batch.step_dim
        )));
    }
    let (scores, labels) = predict(model, &batch)?;
    Ok((per_class_report(&batch.labels, &labels, Some(&scores))?, scores))
}

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub model: PathBuf,
    /// Defaults to the prepared test split.
    pub test: Option<PathBuf>,
    /// Scales raw input; prepared splits are already scaled.
    pub scaler: Option<PathBuf>,
}

/// Scores a saved model and writes `report.txt`, `report.csv` and `roc.svg`.
pub fn cmd_evaluate(cfg: &RunConfig, opts: &EvaluateOptions, log: &mut dyn Write) -> Result<MetricReport> {
    cfg.validate()?;
    let catalog = cfg.load_catalog()?;
    let loaded = load_model(&opts.model, Some(&catalog))?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let test_path = opts.test.clone().unwrap_or_else(|| cfg.prepared().join(TEST_FILE));
    let mut test = load_split(&test_path, &catalog)?;
    if let Some(path) = &opts.scaler {
        test = apply_minmax(&test, &load_scaler(path, Some(&catalog))?)?;
    }
    let (report, scores) = evaluate_model(&loaded.model, &test)?;
    let text = report.to_text();
    let _ = write!(log, "{text}");
    write_text(&cfg.out("report.txt"), &text)?;
    let mut csv = Vec::new();
    write_report_csv("model", [("DDoSNet".to_string(), &report)], &mut csv)?;
    std::fs::write(cfg.out("report.csv"), csv).map_err(|e| Error::io(cfg.out("report.csv"), e))?;
    if report.auc.is_some() {
        let curve = roc_curve(&test.labels(), &scores)?;
        render_roc(&curve, auc(&curve), cfg.out("roc.svg"))?;
    }
    Ok(report)
}

/// Trains and scores each requested baseline on the prepared splits, plus
/// an optional saved model; writes `baselines.csv`.
pub fn cmd_baseline(
    cfg: &RunConfig,
    kinds: &[BaselineKind],
    hyper: &BTreeMap<BaselineKind, Hyper>,
    model: Option<&Path>,
    log: &mut dyn Write,
) -> Result<Vec<(String, MetricReport)>> {
    cfg.validate()?;
    let catalog = cfg.load_catalog()?;
    load_manifest(cfg.prepared(), &catalog)?;
    let train = load_split(&cfg.prepared().join(TRAIN_FILE), &catalog)?;
    let test = load_split(&cfg.prepared().join(TEST_FILE), &catalog)?;
    let empty = Hyper::new();
    let mut rows = kinds
        .par_iter()
        .map(|&kind| {
            let fitted = train_baseline(kind, &train, hyper.get(&kind).unwrap_or(&empty), cfg.seed())?;
            let (scores, labels) = predict_baseline(&fitted, &test)?;
            Ok((kind.name().to_string(), per_class_report(&test.labels(), &labels, Some(&scores))?))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(path) = model {
        let loaded = load_model(path, Some(&catalog))?;
        for w in &loaded.warnings {
            eprintln!("warning: {w}");
        }
        rows.push(("DDoSNet".to_string(), evaluate_model(&loaded.model, &test)?.0));
    }
    let mut csv = Vec::new();
    write_report_csv("model", rows.iter().map(|(k, r)| (k.clone(), r)), &mut csv)?;
    let _ = log.write_all(&csv);
    std::fs::write(cfg.out("baselines.csv"), csv).map_err(|e| Error::io(cfg.out("baselines.csv"), e))?;
    Ok(rows)
}

/// One full train and evaluate per learning rate. Rate `i` uses seed
/// `seed ^ i`. Writes `sweep_lr.csv`.
pub fn cmd_sweep_lr(cfg: &RunConfig, rates: &[f64], log: &mut dyn Write) -> Result<Vec<(f64, MetricReport)>> {
    cfg.validate()?;
    if rates.is_empty() {
        return Err(Error::Config("no learning rates given".into()));
    }
    let catalog = cfg.load_catalog()?;
    load_manifest(cfg.prepared(), &catalog)?;
    let train = load_split(&cfg.prepared().join(TRAIN_FILE), &catalog)?;
    let val = load_split(&cfg.prepared().join(VAL_FILE), &catalog)?;
    let test = load_split(&cfg.prepared().join(TEST_FILE), &catalog)?;
    let run = |(i, &rate): (usize, &f64)| -> Result<(f64, MetricReport)> {
        let mut local = cfg.clone();
        local.train.learning_rate = rate;
        local.train.seed = cfg.seed() ^ i as u64;
        let (model, _, _) = train_model(&local, &train, &val, &mut std::io::sink())?;
        Ok((rate, evaluate_model(&model, &test)?.0))
    };
    let rows: Vec<(f64, MetricReport)> = if cfg.train.strict_determinism {
        rates.iter().enumerate().map(run).collect::<Result<_>>()?
    } else {
        rates.par_iter().enumerate().map(run).collect::<Result<_>>()?
    };
    let mut csv = Vec::new();
    write_report_csv("learning_rate", rows.iter().map(|(r, m)| (r.to_string(), m)), &mut csv)?;
    let _ = log.write_all(&csv);
    std::fs::write(cfg.out("sweep_lr.csv"), csv).map_err(|e| Error::io(cfg.out("sweep_lr.csv"), e))?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub enum PlotRequest {
    Andrews {
        data: PathBuf,
        sample_fraction: f64,
        k: usize,
        fit_on: PcaFitOn,
    },
    Loss {
        history: PathBuf,
    },
    Roc {
        model: PathBuf,
        test: PathBuf,
    },
}

/// Renders one figure into the output directory and returns its path.
pub fn cmd_plot(cfg: &RunConfig, request: &PlotRequest) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let catalog = cfg.load_catalog()?;
    match request {
        PlotRequest::Andrews {
            data,
            sample_fraction,
            k,
            fit_on,
        } => {
            let (ds, _) = load_flow_csv(data, &catalog)?;
            let out = cfg.out("andrews.svg");
            render_andrews(&ds, *sample_fraction, *k, cfg.seed(), *fit_on, &out)?;
            Ok(vec![out])
        }
        PlotRequest::Loss { history } => {
            let mut written = Vec::new();
            for h in load_history(history)? {
                let out = cfg.out(&format!("loss_{}.svg", h.phase));
                render_loss(&h, &out)?;
                written.push(out);
            }
            if written.is_empty() {
                return Err(Error::Data(format!("{} holds no epochs", history.display())));
            }
            Ok(written)
        }
        PlotRequest::Roc { model, test } => {
            let loaded = load_model(model, Some(&catalog))?;
            let ds = load_split(test, &catalog)?;
            let batch = frame_sequences(&ds, loaded.model.seq_len)?;
            let (scores, _) = predict(&loaded.model, &batch)?;
            let curve = roc_curve(&batch.labels, &scores)?;
            if !batch.labels.contains(&LabelClass::Attack) || !batch.labels.contains(&LabelClass::Benign) {
                return Err(Error::Data("ROC needs both classes in the test data".into()));
            }
            let out = cfg.out("roc.svg");
            render_roc(&curve, auc(&curve), &out)?;
            Ok(vec![out])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(dir: &Path, data: PathBuf, catalog: PathBuf) -> RunConfig {
        RunConfig {
            catalog: Some(catalog),
            data: vec![data],
            seq_len: 2,
            pretrain_epochs: 1,
            train: TrainConfig {
                epochs: 2,
                learning_rate: 1e-3,
                seed: 4,
                strict_determinism: true,
                ..TrainConfig::default()
            },
            out_dir: dir.to_path_buf(),
            ..RunConfig::default()
        }
    }

    fn synth(dir: &Path) -> (PathBuf, PathBuf) {
        cmd_synth(
            &SynthSpec {
                n_benign: 60,
                n_attack: 40,
                n_features: 6,
                class_separation: 8.0,
                noise_scale: 1.0,
                seed: 3,
            },
            dir,
        )
        .unwrap()
    }

    #[test]
    fn seq_len_must_divide_features() {
        assert_eq!(step_dim_for(77, 7).unwrap(), 11);
        assert!(matches!(step_dim_for(77, 5), Err(Error::Config(_))));
    }

    #[test]
    fn missing_input_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            data: vec![dir.path().join("absent.csv")],
            out_dir: dir.path().join("out"),
            ..RunConfig::default()
        };
        let err = cmd_prepare(&cfg, &mut std::io::sink()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn prepare_train_evaluate_round() {
        let dir = tempfile::tempdir().unwrap();
        let (data, catalog) = synth(&dir.path().join("raw"));
        let cfg = small_config(&dir.path().join("run"), data, catalog);
        let summary = cmd_prepare(&cfg, &mut std::io::sink()).unwrap();
        assert_eq!(summary.manifest.split_sizes["train"], 70);
        assert_eq!(summary.cleaning.rows_kept, 100);

        let mut log = Vec::new();
        let outcome = cmd_train(&cfg, &mut log).unwrap();
        let lines: Vec<String> = String::from_utf8(log).unwrap().lines().map(String::from).collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("pretrain 1 ") && lines[2].starts_with("finetune 2 "));
        assert_eq!(outcome.finetune.epochs.len(), 2);
        let history = std::fs::read_to_string(cfg.out(HISTORY_FILE)).unwrap();
        assert!(history.lines().nth(1).unwrap().ends_with(",0"));

        let report = cmd_evaluate(
            &cfg,
            &EvaluateOptions {
                model: cfg.out(MODEL_FILE),
                test: None,
                scaler: None,
            },
            &mut std::io::sink(),
        )
        .unwrap();
        assert!(report.auc.is_some());
        assert!(cfg.out("roc.svg").exists() && cfg.out("report.csv").exists());
    }

    #[test]
    fn stale_split_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (data, catalog) = synth(&dir.path().join("raw"));
        let cfg = small_config(&dir.path().join("run"), data, catalog);
        cmd_prepare(&cfg, &mut std::io::sink()).unwrap();
        let train = cfg.out(TRAIN_FILE);
        let mut text = std::fs::read_to_string(&train).unwrap();
        text.push_str(&text.lines().nth(1).unwrap().to_string());
        text.push('\n');
        std::fs::write(&train, text).unwrap();
        let err = cmd_train(&cfg, &mut std::io::sink()).unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
    }
}
