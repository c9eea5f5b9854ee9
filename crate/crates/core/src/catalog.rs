//! Flow-record data model and the feature catalog.
//!
//! The catalog decides which CSV columns become model features, which are
//! discarded (socket and identity columns), and which one carries the label.
//! It is data, not code: see `data/cicddos2019.catalog` for the default.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const DEFAULT_CATALOG: &str = include_str!("../data/cicddos2019.catalog");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    feature_names: Vec<String>,
    dropped_names: Vec<String>,
    label_name: String,
    version_tag: String,
}

impl FeatureCatalog {
    pub fn new(
        feature_names: Vec<String>,
        dropped_names: Vec<String>,
        label_name: String,
        version_tag: String,
    ) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(Error::Catalog("no feature columns".into()));
        }
        if label_name.is_empty() {
            return Err(Error::Catalog("no label column".into()));
        }
        let mut seen = HashSet::new();
        for name in feature_names.iter().chain(&dropped_names) {
            if name == &label_name {
                return Err(Error::Catalog(format!(
                    "label column {name:?} also listed as feature or drop"
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Catalog(format!("duplicate column {name:?}")));
            }
        }
        Ok(Self {
            feature_names,
            dropped_names,
            label_name,
            version_tag,
        })
    }

    /// The shipped CICDDoS2019 catalog (77 features).
    pub fn cicddos2019() -> Self {
        Self::parse(DEFAULT_CATALOG).expect("bundled catalog is valid")
    }

    /// Synthetic catalog with columns `f0..f{n-1}` and label `Label`.
    pub fn synthetic(n_features: usize) -> Result<Self> {
        Self::new(
            (0..n_features).map(|i| format!("f{i}")).collect(),
            Vec::new(),
            "Label".into(),
            format!("synthetic-{n_features}"),
        )
    }

    /// Parses the line-oriented catalog text format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut features = Vec::new();
        let mut dropped = Vec::new();
        let mut label = None;
        let mut version = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (directive, rest) = line.split_once(char::is_whitespace).ok_or_else(|| {
                Error::Catalog(format!("line {}: missing column name", lineno + 1))
            })?;
            let name = rest.trim().to_string();
            match directive {
                "feature" => features.push(name),
                "drop" => dropped.push(name),
                "label" => {
                    if label.replace(name).is_some() {
                        return Err(Error::Catalog(format!(
                            "line {}: second label directive",
                            lineno + 1
                        )));
                    }
                }
                "version" => version = name,
                other => {
                    return Err(Error::Catalog(format!(
                        "line {}: unknown directive {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        let label = label.ok_or_else(|| Error::Catalog("no label directive".into()))?;
        Self::new(features, dropped, label, version)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.version_tag.is_empty() {
            let _ = writeln!(out, "version {}", self.version_tag);
        }
        let _ = writeln!(out, "label {}", self.label_name);
        for name in &self.dropped_names {
            let _ = writeln!(out, "drop {name}");
        }
        for name in &self.feature_names {
            let _ = writeln!(out, "feature {name}");
        }
        out
    }

    /// SHA-256 of the canonical text form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn dropped_names(&self) -> &[String] {
        &self.dropped_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn version_tag(&self) -> &str {
        &self.version_tag
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<FeatureCatalog> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FeatureCatalog::parse(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum LabelClass {
    Benign = 0,
    Attack = 1,
}

impl LabelClass {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(LabelClass::Benign),
            1 => Some(LabelClass::Attack),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub features: Vec<f64>,
    pub label: LabelClass,
    pub subtype: Option<String>,
    pub source_row: usize,
}

impl FlowRecord {
    /// Label text as it appears in a flow CSV.
    pub fn raw_label(&self) -> &str {
        match (&self.subtype, self.label) {
            (Some(s), _) => s,
            (None, LabelClass::Benign) => "BENIGN",
            (None, LabelClass::Attack) => "ATTACK",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Length { expected: usize, found: usize },
    NonFinite { index: usize },
}

/// Empty result means the record is valid.
pub fn validate_record(record: &FlowRecord, catalog: &FeatureCatalog) -> Vec<Violation> {
    let mut violations = Vec::new();
    if record.features.len() != catalog.feature_count() {
        violations.push(Violation::Length {
            expected: catalog.feature_count(),
            found: record.features.len(),
        });
    }
    for (index, v) in record.features.iter().enumerate() {
        if !v.is_finite() {
            violations.push(Violation::NonFinite { index });
        }
    }
    violations
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<FlowRecord>,
    pub catalog: Arc<FeatureCatalog>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(catalog: Arc<FeatureCatalog>, records: Vec<FlowRecord>, provenance: String) -> Result<Self> {
        let n = catalog.feature_count();
        if let Some(r) = records.iter().find(|r| r.features.len() != n) {
            return Err(Error::Dimension(format!(
                "record from row {} has {} features, catalog has {n}",
                r.source_row,
                r.features.len()
            )));
        }
        Ok(Self {
            records,
            catalog,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.catalog.feature_count()
    }

    pub fn labels(&self) -> Vec<LabelClass> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn count(&self, label: LabelClass) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    /// Same catalog, new record set.
    pub fn with_records(&self, records: Vec<FlowRecord>, provenance: String) -> Self {
        Self {
            records,
            catalog: Arc::clone(&self.catalog),
            provenance,
        }
    }

    pub fn concat(mut self, other: Dataset) -> Result<Self> {
        if *self.catalog != *other.catalog {
            return Err(Error::Data("cannot concatenate datasets with different catalogs".into()));
        }
        self.records.extend(other.records);
        self.provenance = format!("{}; {}", self.provenance, other.provenance);
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(features: Vec<f64>) -> FlowRecord {
        FlowRecord {
            features,
            label: LabelClass::Benign,
            subtype: None,
            source_row: 0,
        }
    }

    #[test]
    fn default_catalog_has_77_features() {
        let cat = FeatureCatalog::cicddos2019();
        assert_eq!(cat.feature_count(), 77);
        assert_eq!(cat.label_name(), "Label");
        for name in [
            "Flow ID",
            "Source IP",
            "Source Port",
            "Destination IP",
            "Destination Port",
            "Timestamp",
        ] {
            assert!(cat.dropped_names().iter().any(|d| d == name), "{name}");
        }
        assert_eq!(cat.feature_names()[0], "Protocol");
        assert!(cat.feature_names().iter().any(|f| f == "Flow Duration"));
    }

    #[test]
    fn catalog_with_77_features_and_6_drops() {
        let mut text = String::from("label Label\n");
        for d in ["Flow ID", "Source IP", "Source Port", "Destination IP", "Destination Port", "Timestamp"] {
            text.push_str(&format!("drop {d}\n"));
        }
        for i in 0..77 {
            text.push_str(&format!("feature col {i}\n"));
        }
        let cat = FeatureCatalog::parse(&text).unwrap();
        assert_eq!(cat.feature_count(), 77);
        assert_eq!(cat.dropped_names().len(), 6);
        assert_eq!(cat.feature_names()[3], "col 3");
    }

    #[test]
    fn minimal_catalog() {
        let cat = FeatureCatalog::parse("# tiny\nfeature x   # trailing\nlabel y\n").unwrap();
        assert_eq!(cat.feature_names(), ["x"]);
        assert!(cat.dropped_names().is_empty());
    }

    #[test]
    fn label_listed_as_feature_is_rejected() {
        let err = FeatureCatalog::parse("feature Label\nfeature a\nlabel Label\n").unwrap_err();
        assert!(matches!(err, Error::Catalog(_)));
    }

    #[test]
    fn duplicates_and_bad_lines_are_rejected() {
        assert!(FeatureCatalog::parse("feature a\nfeature a\nlabel l\n").is_err());
        assert!(FeatureCatalog::parse("feature a\ndrop a\nlabel l\n").is_err());
        assert!(FeatureCatalog::parse("feature a\nbogus b\nlabel l\n").is_err());
        assert!(FeatureCatalog::parse("feature a\n").is_err());
        assert!(FeatureCatalog::parse("label l\n").is_err());
        assert!(FeatureCatalog::parse("feature\nlabel l\n").is_err());
    }

    #[test]
    fn text_round_trip() {
        let cat = FeatureCatalog::cicddos2019();
        let back = FeatureCatalog::parse(&cat.to_text()).unwrap();
        assert_eq!(cat, back);
        assert_eq!(cat.digest(), back.digest());
    }

    #[test]
    fn validate_records() {
        let cat = FeatureCatalog::cicddos2019();
        assert!(validate_record(&record(vec![1.0; 77]), &cat).is_empty());
        assert_eq!(
            validate_record(&record(vec![1.0; 76]), &cat),
            vec![Violation::Length { expected: 77, found: 76 }]
        );
        let mut v = vec![0.5; 77];
        v[12] = f64::INFINITY;
        assert_eq!(
            validate_record(&record(v), &cat),
            vec![Violation::NonFinite { index: 12 }]
        );
    }

    #[test]
    fn label_codes_are_fixed() {
        assert_eq!(LabelClass::Benign.code(), 0);
        assert_eq!(LabelClass::Attack.code(), 1);
        assert_eq!(LabelClass::from_code(1), Some(LabelClass::Attack));
        assert_eq!(LabelClass::from_code(2), None);
    }
}
