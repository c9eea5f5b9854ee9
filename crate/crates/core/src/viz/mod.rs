//! Analysis figures: PCA, Andrews curves, loss curves and ROC, as SVG.

pub mod pca;
pub mod svg;

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;

use rand::seq::index::sample;

use crate::catalog::{Dataset, LabelClass};
use crate::error::{Error, Result};
use crate::metrics::RocCurve;
use crate::model::TrainHistory;
use crate::nn::Rng;

pub use pca::{pca_fit_rows, pca_transform, PcaModel};
pub use svg::{PlotSpec, Series};

pub const ANDREWS_SAMPLES: usize = 200;
pub const BENIGN_COLOR: &str = "#1f77b4";
pub const ATTACK_COLOR: &str = "#d62728";

pub fn pca_fit(data: &Dataset, k: usize) -> Result<PcaModel> {
    let rows: Vec<Vec<f64>> = data.records.iter().map(|r| r.features.clone()).collect();
    pca_fit_rows(&rows, k)
}

/// `x₁/√2 + x₂ sin t + x₃ cos t + x₄ sin 2t + x₅ cos 2t + …`
pub fn andrews_value(x: &[f64], t: f64) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            if i == 0 {
                v * FRAC_1_SQRT_2
            } else {
                let k = i.div_ceil(2) as f64;
                if i % 2 == 1 {
                    v * (k * t).sin()
                } else {
                    v * (k * t).cos()
                }
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PcaFitOn {
    #[default]
    Sample,
    Full,
}

impl std::str::FromStr for PcaFitOn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(PcaFitOn::Sample),
            "full" => Ok(PcaFitOn::Full),
            other => Err(Error::Config(format!("--pca-fit-on must be full or sample, got {other:?}"))),
        }
    }
}

fn write_file(out: &Path, text: &str) -> Result<()> {
    std::fs::write(out, text).map_err(|e| Error::io(out, e))
}

/// Andrews curves of a seeded random sample after PCA to `k` dimensions.
pub fn andrews_svg(data: &Dataset, sample_fraction: f64, k: usize, seed: u64, fit_on: PcaFitOn) -> Result<String> {
    if !(sample_fraction > 0.0 && sample_fraction <= 1.0) {
        return Err(Error::Config(format!("sample fraction must be in (0,1], got {sample_fraction}")));
    }
    let n = ((data.len() as f64 * sample_fraction).round() as usize).clamp(2.min(data.len()), data.len());
    let mut rng = Rng::new(seed);
    let mut chosen = sample(&mut rng, data.len(), n).into_vec();
    chosen.sort_unstable();
    let rows: Vec<Vec<f64>> = chosen.iter().map(|&i| data.records[i].features.clone()).collect();
    let k = k.min(data.feature_count());
    let model = match fit_on {
        PcaFitOn::Sample => pca_fit_rows(&rows, k)?,
        PcaFitOn::Full => pca_fit(data, k)?,
    };
    let reduced = pca_transform(&model, &rows)?;

    let ts: Vec<f64> = (0..ANDREWS_SAMPLES)
        .map(|i| -PI + 2.0 * PI * i as f64 / (ANDREWS_SAMPLES - 1) as f64)
        .collect();
    let mut spec = PlotSpec::new(
        format!("Andrews curves ({} records, PCA k={k})", rows.len()),
        "t",
        "f(t)",
    );
    spec.x_range = Some((-PI, PI));
    let mut legend_done = [false; 2];
    for (&i, z) in chosen.iter().zip(&reduced) {
        let label = data.records[i].label;
        let (name, color) = match label {
            LabelClass::Benign => ("Benign", BENIGN_COLOR),
            LabelClass::Attack => ("Attack", ATTACK_COLOR),
        };
        let mut series = Series::new(name, ts.iter().map(|&t| (t, andrews_value(z, t))).collect(), color);
        series.stroke_width = 0.6;
        series.opacity = 0.35;
        series.legend = !std::mem::replace(&mut legend_done[label.index()], true);
        spec.series.push(series);
    }
    Ok(svg::render(&spec))
}

pub fn render_andrews(
    data: &Dataset,
    sample_fraction: f64,
    k: usize,
    seed: u64,
    fit_on: PcaFitOn,
    out: impl AsRef<Path>,
) -> Result<()> {
    write_file(out.as_ref(), &andrews_svg(data, sample_fraction, k, seed, fit_on)?)
}

pub fn loss_svg(history: &TrainHistory) -> Result<String> {
    if history.epochs.is_empty() {
        return Err(Error::Data("empty training history".into()));
    }
    let mut spec = PlotSpec::new(format!("Training and validation loss ({})", history.phase), "epoch", "loss");
    let last = history.epochs.last().map_or(1, |e| e.epoch) as f64;
    spec.x_range = Some((1.0, last.max(2.0)));
    spec.series.push(Series::new(
        "train",
        history.epochs.iter().map(|e| (e.epoch as f64, e.train_loss)).collect(),
        BENIGN_COLOR,
    ));
    spec.series.push(Series::new(
        "validation",
        history.epochs.iter().map(|e| (e.epoch as f64, e.val_loss)).collect(),
        "#ff7f0e",
    ));
    if let Some(best) = history.best_epoch {
        spec.annotation = Some(format!("kept epoch {best}"));
    }
    Ok(svg::render(&spec))
}

pub fn render_loss(history: &TrainHistory, out: impl AsRef<Path>) -> Result<()> {
    write_file(out.as_ref(), &loss_svg(history)?)
}

pub fn roc_svg(curve: &RocCurve, auc: f64) -> Result<String> {
    if curve.points.is_empty() {
        return Err(Error::Data("empty ROC curve".into()));
    }
    let mut spec = PlotSpec::new("ROC", "false positive rate", "true positive rate");
    spec.x_range = Some((0.0, 1.0));
    spec.y_range = Some((0.0, 1.0));
    spec.diagonal = true;
    spec.annotation = Some(format!("AUC = {auc:.3}"));
    spec.series.push(Series::new("model", curve.points.clone(), ATTACK_COLOR));
    Ok(svg::render(&spec))
}

pub fn render_roc(curve: &RocCurve, auc: f64, out: impl AsRef<Path>) -> Result<()> {
    write_file(out.as_ref(), &roc_svg(curve, auc)?)
}
