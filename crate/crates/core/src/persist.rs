//! On-disk formats: model files, scaler files, run manifests and training
//! history CSVs.
//!
//! Model and scaler files are JSON. Reals are written in the shortest form
//! that parses back to the same bits, so a save/load/save cycle is byte-stable.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::FeatureCatalog;
use crate::error::{Error, Result};
use crate::ingest::CleaningReport;
use crate::model::{AutoencoderModel, BlockRole, EpochRecord, Phase, TrainHistory};
use crate::nn::{Activation, InitScheme};
use crate::preprocess::ScalerParams;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const SCALER_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDescriptor {
    pub role: BlockRole,
    pub input: usize,
    pub output: usize,
    /// `None` for the linear projections.
    pub activation: Option<Activation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub role: BlockRole,
    pub shape: [usize; 2],
    /// Row-major; biases are a single row.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub catalog_hash: String,
    pub seq_len: usize,
    pub step_dim: usize,
    pub layers: Vec<LayerDescriptor>,
    pub blocks: Vec<ParamBlock>,
    /// Seeds, training configuration and dataset description.
    pub provenance: BTreeMap<String, serde_json::Value>,
}

fn block_shapes(model: &AutoencoderModel) -> Vec<[usize; 2]> {
    let mut shapes = Vec::new();
    for l in model.encoder.iter().chain(&model.decoder) {
        shapes.push([l.w_xz.rows(), l.w_xz.cols()]);
        shapes.push([l.w_zz.rows(), l.w_zz.cols()]);
        shapes.push([1, l.b_h.len()]);
    }
    for p in [&model.recon, &model.head] {
        shapes.push([p.w_zf.rows(), p.w_zf.cols()]);
        shapes.push([1, p.b_f.len()]);
    }
    shapes
}

impl ModelFile {
    pub fn from_model(
        model: &AutoencoderModel,
        catalog_hash: &str,
        provenance: BTreeMap<String, serde_json::Value>,
    ) -> Self {
        let mut layers: Vec<LayerDescriptor> = Vec::new();
        for (role, stack) in [(BlockRole::Encoder, &model.encoder), (BlockRole::Decoder, &model.decoder)] {
            layers.extend(stack.iter().map(|l| LayerDescriptor {
                role,
                input: l.input_size(),
                output: l.hidden_size(),
                activation: Some(l.activation),
            }));
        }
        for (role, p) in [(BlockRole::Recon, &model.recon), (BlockRole::Head, &model.head)] {
            layers.push(LayerDescriptor {
                role,
                input: p.w_zf.rows(),
                output: p.w_zf.cols(),
                activation: None,
            });
        }
        let blocks = model
            .block_names()
            .into_iter()
            .zip(model.block_roles())
            .zip(block_shapes(model))
            .zip(model.blocks())
            .map(|(((name, role), shape), data)| ParamBlock {
                name,
                role,
                shape,
                values: data.chunks(shape[1].max(1)).map(<[f64]>::to_vec).collect(),
            })
            .collect();
        Self {
            format_version: MODEL_FORMAT_VERSION,
            catalog_hash: catalog_hash.to_string(),
            seq_len: model.seq_len,
            step_dim: model.step_dim,
            layers,
            blocks,
            provenance,
        }
    }

    /// Rebuilds the model, checking every declared shape against its arrays.
    pub fn to_model(&self) -> Result<AutoencoderModel> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFile(format!(
                "unsupported format_version {} (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let encoder: Vec<&LayerDescriptor> = self.layers.iter().filter(|l| l.role == BlockRole::Encoder).collect();
        let widths: Vec<usize> = encoder.iter().map(|l| l.output).collect();
        let activation = encoder
            .first()
            .and_then(|l| l.activation)
            .ok_or_else(|| Error::ModelFile("no encoder layers declared".into()))?;
        if self.layers.iter().any(|l| l.activation.is_some_and(|a| a != activation)) {
            return Err(Error::ModelFile("mixed activations are not supported".into()));
        }
        let mut model =
            AutoencoderModel::with_init(self.seq_len, self.step_dim, &widths, activation, 0, InitScheme::Zeros)
                .map_err(|e| Error::ModelFile(format!("layer descriptors: {e}")))?;
        let expected: Vec<(String, [usize; 2])> = model.block_names().into_iter().zip(block_shapes(&model)).collect();
        if self.blocks.len() != expected.len() {
            return Err(Error::ModelFile(format!(
                "expected {} parameter blocks, found {}",
                expected.len(),
                self.blocks.len()
            )));
        }
        for (((name, shape), block), target) in expected.iter().zip(&self.blocks).zip(model.blocks_mut()) {
            if &block.name != name {
                return Err(Error::ModelFile(format!("block {:?} found where {name:?} expected", block.name)));
            }
            if block.shape != *shape {
                return Err(Error::ModelFile(format!(
                    "block {name}: declared shape {:?}, architecture needs {shape:?}",
                    block.shape
                )));
            }
            if block.values.len() != shape[0] || block.values.iter().any(|row| row.len() != shape[1]) {
                let found: Vec<usize> = block.values.iter().map(Vec::len).collect();
                return Err(Error::ModelFile(format!(
                    "block {name}: declared shape {shape:?} but array rows have lengths {found:?}"
                )));
            }
            for (dst, src) in target.chunks_mut(shape[1].max(1)).zip(&block.values) {
                dst.copy_from_slice(src);
            }
        }
        let declared: Vec<(usize, usize)> = self.layers.iter().map(|l| (l.input, l.output)).collect();
        let actual: Vec<(usize, usize)> = ModelFile::from_model(&model, "", BTreeMap::new())
            .layers
            .iter()
            .map(|l| (l.input, l.output))
            .collect();
        if declared != actual {
            return Err(Error::ModelFile(format!("layer descriptors {declared:?} do not match {actual:?}")));
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

pub fn save_model_file(file: &ModelFile, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &file.to_json()?)
}

pub fn save_model(
    model: &AutoencoderModel,
    catalog: &FeatureCatalog,
    provenance: BTreeMap<String, serde_json::Value>,
    path: impl AsRef<Path>,
) -> Result<()> {
    save_model_file(&ModelFile::from_model(model, &catalog.digest(), provenance), path)
}

/// A model read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: AutoencoderModel,
    pub file: ModelFile,
    /// Non-fatal problems, such as a catalog digest that does not match.
    pub warnings: Vec<String>,
}

pub fn parse_model(text: &str, catalog: Option<&FeatureCatalog>) -> Result<LoadedModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::ModelFile(format!("malformed model JSON: {e}")))?;
    let model = file.to_model()?;
    let mut warnings = Vec::new();
    if let Some(catalog) = catalog {
        let digest = catalog.digest();
        if digest != file.catalog_hash {
            warnings.push(format!(
                "model was trained with catalog {} but the active catalog is {digest}",
                file.catalog_hash
            ));
        }
    }
    Ok(LoadedModel { model, file, warnings })
}

pub fn load_model(path: impl AsRef<Path>, catalog: Option<&FeatureCatalog>) -> Result<LoadedModel> {
    parse_model(&read_text(path.as_ref())?, catalog)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerFile {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub provenance: String,
}

pub fn save_scaler(scaler: &ScalerParams, catalog: &FeatureCatalog, path: impl AsRef<Path>) -> Result<()> {
    if scaler.len() != catalog.feature_count() {
        return Err(Error::Dimension(format!(
            "scaler has {} features, catalog {}",
            scaler.len(),
            catalog.feature_count()
        )));
    }
    let file = ScalerFile {
        format_version: SCALER_FORMAT_VERSION,
        feature_names: catalog.feature_names().to_vec(),
        min: scaler.min.clone(),
        max: scaler.max.clone(),
        provenance: scaler.fitted_on.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    write_text(path.as_ref(), &text)
}

pub fn parse_scaler(text: &str, catalog: Option<&FeatureCatalog>) -> Result<ScalerParams> {
    let file: ScalerFile = serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed scaler file: {e}")))?;
    if file.format_version != SCALER_FORMAT_VERSION {
        return Err(Error::Config(format!("unsupported scaler format_version {}", file.format_version)));
    }
    if file.min.len() != file.feature_names.len() || file.max.len() != file.feature_names.len() {
        return Err(Error::Dimension("scaler vectors disagree with its feature list".into()));
    }
    if let Some(catalog) = catalog {
        if file.feature_names != catalog.feature_names() {
            return Err(Error::Catalog("scaler was fitted on a different feature list".into()));
        }
    }
    Ok(ScalerParams {
        min: file.min,
        max: file.max,
        fitted_on: file.provenance,
    })
}

pub fn load_scaler(path: impl AsRef<Path>, catalog: Option<&FeatureCatalog>) -> Result<ScalerParams> {
    parse_scaler(&read_text(path.as_ref())?, catalog)
}

/// Record of a `prepare` run: what went in, what came out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub catalog_version: String,
    pub catalog_hash: String,
    /// Input file name → sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output file name → sha256.
    pub outputs: BTreeMap<String, String>,
    pub cleaning: CleaningReport,
    pub split_sizes: BTreeMap<String, usize>,
    pub settings: BTreeMap<String, serde_json::Value>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_text(path.as_ref(), &text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        serde_json::from_str(&read_text(path.as_ref())?)
            .map_err(|e| Error::Config(format!("malformed manifest {}: {e}", path.as_ref().display())))
    }

    /// Fails if any listed output in `dir` no longer matches its recorded hash.
    pub fn verify_outputs(&self, dir: impl AsRef<Path>) -> Result<()> {
        for (name, expected) in &self.outputs {
            let actual = sha256_file(dir.as_ref().join(name))?;
            if &actual != expected {
                return Err(Error::Data(format!(
                    "{name} changed since it was prepared (sha256 {actual}, manifest {expected})"
                )));
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub const HISTORY_COLUMNS: [&str; 5] = ["phase", "epoch", "train_loss", "val_loss", "seconds"];

/// One row per epoch, histories in the order given.
pub fn write_history_csv(histories: &[&TrainHistory], writer: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HISTORY_COLUMNS)?;
    for h in histories {
        for e in &h.epochs {
            w.write_record([
                h.phase.name().to_string(),
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.val_loss.to_string(),
                e.seconds.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("history", e))?;
    Ok(())
}

pub fn save_history(histories: &[&TrainHistory], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = std::io::BufWriter::new(file);
    write_history_csv(histories, &mut buf)?;
    buf.flush().map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
struct HistoryRow {
    phase: Phase,
    epoch: usize,
    train_loss: f64,
    val_loss: f64,
    seconds: f64,
}

/// Inverse of [`write_history_csv`]: consecutive rows of one phase form one history.
pub fn read_history_csv(reader: impl std::io::Read) -> Result<Vec<TrainHistory>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out: Vec<TrainHistory> = Vec::new();
    for row in rdr.deserialize() {
        let row: HistoryRow = row?;
        let record = EpochRecord {
            epoch: row.epoch,
            train_loss: row.train_loss,
            val_loss: row.val_loss,
            seconds: row.seconds,
        };
        match out.last_mut() {
            Some(h) if h.phase == row.phase => h.epochs.push(record),
            _ => out.push(TrainHistory {
                phase: row.phase,
                epochs: vec![record],
                best_epoch: None,
            }),
        }
    }
    Ok(out)
}

pub fn load_history(path: impl AsRef<Path>) -> Result<Vec<TrainHistory>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_history_csv(file)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
