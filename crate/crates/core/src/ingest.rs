//! Flow CSV ingestion, row cleaning, label encoding and synthetic data.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::catalog::{validate_record, Dataset, FeatureCatalog, FlowRecord, LabelClass};
use crate::error::{Error, Result};
use crate::nn::Rng;

/// Attack subtype attached to synthetic attack records.
pub const SYNTHETIC_SUBTYPE: &str = "SYNTHETIC";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub rows_read: usize,
    pub rows_dropped_nonfinite: usize,
    pub rows_dropped_malformed: usize,
    pub rows_kept: usize,
}

impl CleaningReport {
    pub fn merge(&mut self, other: &CleaningReport) {
        self.rows_read += other.rows_read;
        self.rows_dropped_nonfinite += other.rows_dropped_nonfinite;
        self.rows_dropped_malformed += other.rows_dropped_malformed;
        self.rows_kept += other.rows_kept;
    }
}

/// "BENIGN" (any case, trimmed) is benign; anything else non-empty is an attack.
pub fn encode_labels(raw_label: &str) -> Result<(LabelClass, Option<String>)> {
    let label = raw_label.trim();
    if label.is_empty() {
        return Err(Error::Data("empty label".into()));
    }
    if label.eq_ignore_ascii_case("BENIGN") {
        Ok((LabelClass::Benign, None))
    } else {
        Ok((LabelClass::Attack, Some(label.to_string())))
    }
}

fn parse_cell(cell: &str) -> f64 {
    // "Infinity", "inf", "NaN" parse to non-finite values; garbage becomes NaN.
    cell.trim().parse::<f64>().unwrap_or(f64::NAN)
}

/// Loads one flow CSV. Columns are matched to the catalog by trimmed name;
/// rows with any non-finite feature or a bad shape are dropped and counted.
pub fn load_flow_csv(
    path: impl AsRef<Path>,
    catalog: &Arc<FeatureCatalog>,
) -> Result<(Dataset, CleaningReport)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    read_flow_csv(file, catalog, &name)
}

pub fn read_flow_csv(
    reader: impl std::io::Read,
    catalog: &Arc<FeatureCatalog>,
    source_name: &str,
) -> Result<(Dataset, CleaningReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers().map_err(|e| {
        Error::Data(format!("{source_name}: unreadable header: {e}"))
    })?;
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(Error::Data(format!("{source_name}: missing header row")));
    }
    let width = header.len();
    let positions: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let lookup = |col: &str| {
        positions
            .get(col)
            .copied()
            .ok_or_else(|| Error::Data(format!("{source_name}: header lacks column {col:?}")))
    };
    let feature_cols = catalog
        .feature_names()
        .iter()
        .map(|f| lookup(f))
        .collect::<Result<Vec<_>>>()?;
    let label_col = lookup(catalog.label_name())?;

    let mut report = CleaningReport::default();
    let mut records = Vec::new();
    for (row, result) in rdr.records().enumerate() {
        report.rows_read += 1;
        let Ok(fields) = result else {
            report.rows_dropped_malformed += 1;
            continue;
        };
        if fields.len() != width {
            report.rows_dropped_malformed += 1;
            continue;
        }
        let Ok((label, subtype)) = encode_labels(&fields[label_col]) else {
            report.rows_dropped_malformed += 1;
            continue;
        };
        let record = FlowRecord {
            features: feature_cols.iter().map(|&c| parse_cell(&fields[c])).collect(),
            label,
            subtype,
            source_row: row,
        };
        if !validate_record(&record, catalog).is_empty() {
            report.rows_dropped_nonfinite += 1;
            continue;
        }
        report.rows_kept += 1;
        records.push(record);
    }

    let dataset = Dataset::new(Arc::clone(catalog), records, format!("file {source_name}"))?;
    Ok((dataset, report))
}

/// Writes the flow CSV dialect: catalog feature names then the label column.
pub fn write_flow_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_flow_csv_to(data, file)
}

pub fn write_flow_csv_to(data: &Dataset, writer: impl std::io::Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.catalog.feature_names().iter().map(String::as_str).collect();
    header.push(data.catalog.label_name());
    wtr.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for r in &data.records {
        row.clear();
        row.extend(r.features.iter().map(|v| v.to_string()));
        row.push(r.raw_label().to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_benign: usize,
    pub n_attack: usize,
    pub n_features: usize,
    /// Euclidean distance between the two class means.
    pub class_separation: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 {
            return Err(Error::Config("synthetic data needs at least one feature".into()));
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return Err(Error::Config("class_separation must be finite and >= 0".into()));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::Config("noise_scale must be finite and > 0".into()));
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    let catalog = Arc::new(FeatureCatalog::synthetic(spec.n_features)?);
    generate_synthetic_with(spec, &catalog)
}

/// Two isotropic Gaussian clouds. Benign is centred at the origin, attack at
/// a seeded random direction scaled to `class_separation`.
pub fn generate_synthetic_with(spec: &SynthSpec, catalog: &Arc<FeatureCatalog>) -> Result<Dataset> {
    spec.validate()?;
    if catalog.feature_count() != spec.n_features {
        return Err(Error::Config(format!(
            "synthetic spec has {} features, catalog has {}",
            spec.n_features,
            catalog.feature_count()
        )));
    }
    let mut rng = Rng::new(spec.seed);
    let d = spec.n_features;

    let mut direction: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        direction.iter_mut().for_each(|v| *v /= norm);
    } else {
        direction[0] = 1.0;
    }
    let attack_mean: Vec<f64> = direction.iter().map(|v| v * spec.class_separation).collect();

    let mut records = Vec::with_capacity(spec.n_benign + spec.n_attack);
    let classes = std::iter::repeat_n(LabelClass::Benign, spec.n_benign)
        .chain(std::iter::repeat_n(LabelClass::Attack, spec.n_attack));
    for label in classes {
        let features = (0..d)
            .map(|i| {
                let centre = if label == LabelClass::Attack { attack_mean[i] } else { 0.0 };
                let z: f64 = StandardNormal.sample(&mut rng);
                centre + spec.noise_scale * z
            })
            .collect();
        records.push(FlowRecord {
            features,
            label,
            subtype: (label == LabelClass::Attack).then(|| SYNTHETIC_SUBTYPE.to_string()),
            source_row: 0,
        });
    }
    records.shuffle(&mut rng);
    for (i, r) in records.iter_mut().enumerate() {
        r.source_row = i;
    }

    Dataset::new(
        Arc::clone(catalog),
        records,
        format!(
            "synthetic benign={} attack={} features={} separation={} noise={} seed={}",
            spec.n_benign, spec.n_attack, spec.n_features, spec.class_separation, spec.noise_scale, spec.seed
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_catalog() -> Arc<FeatureCatalog> {
        Arc::new(
            FeatureCatalog::parse("drop Flow ID\nfeature Flow Duration\nfeature Total Fwd Packets\nlabel Label\n")
                .unwrap(),
        )
    }

    #[test]
    fn label_encoding() {
        assert_eq!(encode_labels("BENIGN").unwrap(), (LabelClass::Benign, None));
        assert_eq!(encode_labels("  benign ").unwrap(), (LabelClass::Benign, None));
        assert_eq!(
            encode_labels("Syn").unwrap(),
            (LabelClass::Attack, Some("Syn".to_string()))
        );
        assert!(encode_labels("").is_err());
        assert!(encode_labels("   ").is_err());
    }

    #[test]
    fn drops_infinity_rows() {
        let mut csv = String::from(" Flow ID, Flow Duration, Total Fwd Packets, Extra, Label\n");
        for i in 0..10 {
            let dur = if i == 3 || i == 7 { "Infinity".to_string() } else { format!("{}", i * 10) };
            csv.push_str(&format!("id{i}, {dur}, {i}, x, {}\n", if i % 2 == 0 { "BENIGN" } else { "Syn" }));
        }
        let (ds, report) = read_flow_csv(csv.as_bytes(), &small_catalog(), "mem").unwrap();
        assert_eq!(ds.len(), 8);
        assert_eq!(report.rows_read, 10);
        assert_eq!(report.rows_dropped_nonfinite, 2);
        assert_eq!(report.rows_dropped_malformed, 0);
        assert_eq!(report.rows_kept, 8);
        assert_eq!(ds.records[0].features, vec![0.0, 0.0]);
        assert_eq!(ds.records[1].subtype.as_deref(), Some("Syn"));
        assert_eq!(ds.records[3].source_row, 4);
    }

    #[test]
    fn nonfinite_spellings_and_malformed_rows() {
        let csv = "Flow Duration,Total Fwd Packets,Label\n\
                   1,inf,BENIGN\n\
                   NaN,2,BENIGN\n\
                   nan,2,BENIGN\n\
                   abc,2,BENIGN\n\
                   ,2,BENIGN\n\
                   1,2\n\
                   1,2,\n\
                   1,2,BENIGN\n";
        let (ds, report) = read_flow_csv(csv.as_bytes(), &small_catalog(), "mem").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(report.rows_dropped_nonfinite, 5);
        assert_eq!(report.rows_dropped_malformed, 2);
        assert_eq!(
            report.rows_read,
            report.rows_kept + report.rows_dropped_nonfinite + report.rows_dropped_malformed
        );
    }

    #[test]
    fn missing_columns_are_errors() {
        let csv = "Total Fwd Packets,Label\n1,BENIGN\n";
        let err = read_flow_csv(csv.as_bytes(), &small_catalog(), "mem").unwrap_err();
        assert!(err.to_string().contains("Flow Duration"), "{err}");
        let csv = "Flow Duration,Total Fwd Packets\n1,2\n";
        assert!(read_flow_csv(csv.as_bytes(), &small_catalog(), "mem").is_err());
        assert!(read_flow_csv("".as_bytes(), &small_catalog(), "mem").is_err());
    }

    #[test]
    fn csv_write_read_round_trip() {
        let spec = SynthSpec {
            n_benign: 20,
            n_attack: 15,
            n_features: 5,
            class_separation: 3.0,
            noise_scale: 0.7,
            seed: 11,
        };
        let ds = generate_synthetic(&spec).unwrap();
        let mut buf = Vec::new();
        write_flow_csv_to(&ds, &mut buf).unwrap();
        let (back, report) = read_flow_csv(&buf[..], &ds.catalog, "mem").unwrap();
        assert_eq!(report.rows_kept, 35);
        for (a, b) in ds.records.iter().zip(&back.records) {
            assert_eq!(a.features, b.features);
            assert_eq!(a.label, b.label);
            assert_eq!(a.subtype, b.subtype);
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SynthSpec {
            n_benign: 50,
            n_attack: 30,
            n_features: 7,
            class_separation: 2.0,
            noise_scale: 1.0,
            seed: 1,
        };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.count(LabelClass::Attack), 30);
        assert!(a.records.iter().all(|r| r.features.iter().all(|v| v.is_finite())));
        let c = generate_synthetic(&SynthSpec { seed: 2, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_class_means_are_separated() {
        let spec = SynthSpec {
            n_benign: 4000,
            n_attack: 4000,
            n_features: 4,
            class_separation: 5.0,
            noise_scale: 1.0,
            seed: 3,
        };
        let ds = generate_synthetic(&spec).unwrap();
        let mean = |label| {
            let rows: Vec<_> = ds.records.iter().filter(|r| r.label == label).collect();
            (0..4)
                .map(|i| rows.iter().map(|r| r.features[i]).sum::<f64>() / rows.len() as f64)
                .collect::<Vec<_>>()
        };
        let (b, a) = (mean(LabelClass::Benign), mean(LabelClass::Attack));
        let dist = b.iter().zip(&a).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!((dist - 5.0).abs() < 0.15, "{dist}");
    }

    #[test]
    fn synthetic_spec_validation() {
        let ok = SynthSpec {
            n_benign: 1,
            n_attack: 1,
            n_features: 1,
            class_separation: 0.0,
            noise_scale: 1.0,
            seed: 0,
        };
        assert!(generate_synthetic(&ok).is_ok());
        assert!(generate_synthetic(&SynthSpec { n_features: 0, ..ok }).is_err());
        assert!(generate_synthetic(&SynthSpec { noise_scale: 0.0, ..ok }).is_err());
        assert!(generate_synthetic(&SynthSpec { class_separation: -1.0, ..ok }).is_err());
    }
}
