//! Min-max scaling, seeded sampling and splitting, and sequence framing.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::catalog::{Dataset, LabelClass};
use crate::error::{Error, Result};
use crate::nn::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub fitted_on: String,
}

pub fn fit_minmax(data: &Dataset) -> Result<ScalerParams> {
    if data.is_empty() {
        return Err(Error::Data("cannot fit a scaler on an empty dataset".into()));
    }
    let d = data.feature_count();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for r in &data.records {
        for (i, &v) in r.features.iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    Ok(ScalerParams {
        min,
        max,
        fitted_on: data.provenance.clone(),
    })
}

impl ScalerParams {
    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    /// `(x - min) / (max - min)`, 0 for constant features. Not clamped.
    pub fn transform(&self, features: &mut [f64]) {
        for ((v, &lo), &hi) in features.iter_mut().zip(&self.min).zip(&self.max) {
            let range = hi - lo;
            *v = if range > 0.0 { (*v - lo) / range } else { 0.0 };
        }
    }
}

pub fn apply_minmax(data: &Dataset, scaler: &ScalerParams) -> Result<Dataset> {
    if scaler.len() != data.feature_count() {
        return Err(Error::Dimension(format!(
            "scaler has {} features, dataset has {}",
            scaler.len(),
            data.feature_count()
        )));
    }
    let records = data
        .records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            scaler.transform(&mut r.features);
            r
        })
        .collect();
    Ok(data.with_records(records, format!("{} | minmax", data.provenance)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub stratify_by_label: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            val_fraction: 0.2,
            test_fraction: 0.1,
            seed: 0,
            stratify_by_label: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fractions = [self.train_fraction, self.val_fraction, self.test_fraction];
        if fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(Error::Config(format!("split fractions must lie in (0,1): {fractions:?}")));
        }
        if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must sum to 1: {fractions:?}")));
        }
        Ok(())
    }

    fn fractions(&self) -> [f64; 3] {
        [self.train_fraction, self.val_fraction, self.test_fraction]
    }
}

/// Largest-remainder apportionment of `n` items over `fractions`.
fn apportion(n: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut remaining = n.saturating_sub(counts.iter().sum());
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        counts[i] += 1;
        remaining -= 1;
    }
    counts
}

fn class_indices(data: &Dataset) -> BTreeMap<LabelClass, Vec<usize>> {
    let mut groups: BTreeMap<LabelClass, Vec<usize>> = BTreeMap::new();
    for (i, r) in data.records.iter().enumerate() {
        groups.entry(r.label).or_default().push(i);
    }
    groups
}

fn take(data: &Dataset, mut indices: Vec<usize>, tag: &str) -> Dataset {
    indices.sort_unstable();
    let records = indices.into_iter().map(|i| data.records[i].clone()).collect();
    data.with_records(records, format!("{} | {tag}", data.provenance))
}

/// Seeded train/validation/test partition, stratified by label by default.
pub fn stratified_split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let groups = if spec.stratify_by_label {
        let groups = class_indices(data);
        if let Some((label, idx)) = groups.iter().find(|(_, idx)| idx.len() < 3) {
            return Err(Error::Data(format!(
                "class {label:?} has {} records; stratified split needs at least 3",
                idx.len()
            )));
        }
        groups.into_values().collect()
    } else {
        vec![(0..data.len()).collect::<Vec<_>>()]
    };

    let mut parts: [Vec<usize>; 3] = Default::default();
    for mut idx in groups {
        idx.shuffle(&mut rng);
        let counts = apportion(idx.len(), &spec.fractions());
        let mut rest = &idx[..];
        for (part, n) in parts.iter_mut().zip(counts) {
            let (head, tail) = rest.split_at(n);
            part.extend_from_slice(head);
            rest = tail;
        }
    }
    let [train, val, test] = parts;
    let tag = |name: &str| format!("{name} split seed={}", spec.seed);
    Ok((
        take(data, train, &tag("train")),
        take(data, val, &tag("val")),
        take(data, test, &tag("test")),
    ))
}

/// Stratified random subsample of exactly `n` records (or all, if fewer).
pub fn stratified_subsample(data: &Dataset, n: usize, seed: u64) -> Dataset {
    if n >= data.len() {
        return data.clone();
    }
    let mut rng = Rng::new(seed);
    let groups = class_indices(data);
    let fractions: Vec<f64> = groups.values().map(|g| g.len() as f64 / data.len() as f64).collect();
    let counts = apportion(n, &fractions);
    let mut chosen = Vec::with_capacity(n);
    for (mut idx, k) in groups.into_values().zip(counts) {
        idx.shuffle(&mut rng);
        chosen.extend_from_slice(&idx[..k.min(idx.len())]);
    }
    take(data, chosen, &format!("subsample n={n} seed={seed}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKey {
    Label,
    Subtype,
}

impl std::str::FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "label" => Ok(GroupKey::Label),
            "subtype" => Ok(GroupKey::Subtype),
            other => Err(Error::Config(format!("unknown balance key {other:?}"))),
        }
    }
}

/// Caps every group at `per_group_count` records, sampled without replacement.
pub fn balance_sample(data: &Dataset, per_group_count: usize, key: GroupKey, seed: u64) -> Result<Dataset> {
    if per_group_count == 0 {
        return Err(Error::Config("per_group_count must be at least 1".into()));
    }
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in data.records.iter().enumerate() {
        let name = match key {
            GroupKey::Label => format!("{:?}", r.label),
            GroupKey::Subtype => r.raw_label().to_string(),
        };
        groups.entry(name).or_default().push(i);
    }
    let mut rng = Rng::new(seed);
    let mut chosen = Vec::new();
    for mut idx in groups.into_values() {
        idx.shuffle(&mut rng);
        idx.truncate(per_group_count);
        chosen.extend(idx);
    }
    Ok(take(data, chosen, &format!("balanced {per_group_count}/group seed={seed}")))
}

/// Moves every record whose subtype equals `subtype` out of `data`.
/// Returns `(remaining, held_out)`.
pub fn hold_out_subtype(data: &Dataset, subtype: &str) -> (Dataset, Dataset) {
    let (held, rest): (Vec<_>, Vec<_>) = data
        .records
        .iter()
        .cloned()
        .partition(|r| r.subtype.as_deref() == Some(subtype));
    (
        data.with_records(rest, format!("{} | without {subtype}", data.provenance)),
        data.with_records(held, format!("{} | only {subtype}", data.provenance)),
    )
}

/// Records reshaped to `[n_records × seq_len × step_dim]`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    values: Vec<f64>,
    pub labels: Vec<LabelClass>,
    pub seq_len: usize,
    pub step_dim: usize,
}

impl SequenceBatch {
    pub fn from_flat(values: Vec<f64>, labels: Vec<LabelClass>, seq_len: usize, step_dim: usize) -> Result<Self> {
        let width = seq_len * step_dim;
        if width == 0 || values.len() != labels.len() * width {
            return Err(Error::Dimension(format!(
                "{} values for {} records of {seq_len}x{step_dim}",
                values.len(),
                labels.len()
            )));
        }
        Ok(Self {
            values,
            labels,
            seq_len,
            step_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.seq_len * self.step_dim
    }

    /// One record's sequence, steps concatenated (also its flat feature vector).
    pub fn record(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn step(&self, i: usize, t: usize) -> &[f64] {
        let start = i * self.width() + t * self.step_dim;
        &self.values[start..start + self.step_dim]
    }

    pub fn select(&self, indices: &[usize]) -> SequenceBatch {
        let mut values = Vec::with_capacity(indices.len() * self.width());
        for &i in indices {
            values.extend_from_slice(self.record(i));
        }
        SequenceBatch {
            values,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            seq_len: self.seq_len,
            step_dim: self.step_dim,
        }
    }
}

pub fn frame_sequences(data: &Dataset, seq_len: usize) -> Result<SequenceBatch> {
    let d = data.feature_count();
    if seq_len == 0 || !d.is_multiple_of(seq_len) {
        return Err(Error::Config(format!(
            "sequence length {seq_len} does not divide the feature count {d}"
        )));
    }
    let mut values = Vec::with_capacity(data.len() * d);
    for r in &data.records {
        values.extend_from_slice(&r.features);
    }
    SequenceBatch::from_flat(values, data.labels(), seq_len, d / seq_len)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::catalog::{FeatureCatalog, FlowRecord};

    fn dataset(rows: Vec<(Vec<f64>, LabelClass, Option<&str>)>) -> Dataset {
        let d = rows.first().map_or(1, |r| r.0.len());
        let catalog = Arc::new(FeatureCatalog::synthetic(d).unwrap());
        let records = rows
            .into_iter()
            .enumerate()
            .map(|(i, (features, label, subtype))| FlowRecord {
                features,
                label,
                subtype: subtype.map(str::to_string),
                source_row: i,
            })
            .collect();
        Dataset::new(catalog, records, "test".into()).unwrap()
    }

    fn column(values: &[f64]) -> Dataset {
        dataset(values.iter().map(|&v| (vec![v], LabelClass::Benign, None)).collect())
    }

    fn labelled(n_benign: usize, n_attack: usize) -> Dataset {
        let rows = (0..n_benign + n_attack)
            .map(|i| {
                let label = if i < n_benign { LabelClass::Benign } else { LabelClass::Attack };
                (vec![i as f64], label, None)
            })
            .collect();
        dataset(rows)
    }

    #[test]
    fn minmax_fit_and_apply() {
        let ds = column(&[2.0, 4.0, 6.0]);
        let s = fit_minmax(&ds).unwrap();
        assert_eq!((s.min.clone(), s.max.clone()), (vec![2.0], vec![6.0]));
        let out = apply_minmax(&ds, &s).unwrap();
        let vals: Vec<f64> = out.records.iter().map(|r| r.features[0]).collect();
        assert_eq!(vals, vec![0.0, 0.5, 1.0]);

        let constant = column(&[5.0, 5.0]);
        let s = fit_minmax(&constant).unwrap();
        assert_eq!((s.min[0], s.max[0]), (5.0, 5.0));
        let out = apply_minmax(&constant, &s).unwrap();
        assert!(out.records.iter().all(|r| r.features[0] == 0.0));

        let s = ScalerParams { min: vec![2.0], max: vec![6.0], fitted_on: String::new() };
        let out = apply_minmax(&column(&[8.0]), &s).unwrap();
        assert_eq!(out.records[0].features[0], 1.5);
    }

    #[test]
    fn minmax_per_column_and_errors() {
        let ds = dataset(vec![
            (vec![1.0, -3.0], LabelClass::Benign, None),
            (vec![5.0, 10.0], LabelClass::Benign, None),
        ]);
        let s = fit_minmax(&ds).unwrap();
        assert_eq!(s.min, vec![1.0, -3.0]);
        assert_eq!(s.max, vec![5.0, 10.0]);
        assert!(fit_minmax(&ds.with_records(vec![], String::new())).is_err());
        let wrong = ScalerParams { min: vec![0.0], max: vec![1.0], fitted_on: String::new() };
        assert!(apply_minmax(&ds, &wrong).is_err());
    }

    #[test]
    fn split_counts_per_class() {
        let ds = labelled(50, 50);
        let spec = SplitSpec { seed: 7, ..SplitSpec::default() };
        let (tr, va, te) = stratified_split(&ds, &spec).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (70, 20, 10));
        for (part, n) in [(&tr, 35), (&va, 10), (&te, 5)] {
            assert_eq!(part.count(LabelClass::Attack), n);
            assert_eq!(part.count(LabelClass::Benign), n);
        }
        let again = stratified_split(&ds, &spec).unwrap();
        assert_eq!((tr, va, te), again);
    }

    #[test]
    fn split_rejects_tiny_classes_and_bad_fractions() {
        assert!(stratified_split(&labelled(10, 2), &SplitSpec::default()).is_err());
        let bad = SplitSpec { train_fraction: 0.5, ..SplitSpec::default() };
        assert!(stratified_split(&labelled(10, 10), &bad).is_err());
        let unstrat = SplitSpec { stratify_by_label: false, ..SplitSpec::default() };
        let (tr, va, te) = stratified_split(&labelled(10, 2), &unstrat).unwrap();
        assert_eq!(tr.len() + va.len() + te.len(), 12);
    }

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(50, &[0.7, 0.2, 0.1]), vec![35, 10, 5]);
        assert_eq!(apportion(3, &[0.7, 0.2, 0.1]), vec![2, 1, 0]);
        assert_eq!(apportion(7, &[0.5, 0.25, 0.25]).iter().sum::<usize>(), 7);
    }

    #[test]
    fn balance_caps_groups() {
        let mut rows = Vec::new();
        for i in 0..1000 {
            rows.push((vec![i as f64], LabelClass::Attack, Some("Syn")));
        }
        for i in 0..50 {
            rows.push((vec![i as f64], LabelClass::Attack, Some("NetBIOS")));
        }
        let ds = dataset(rows);
        let out = balance_sample(&ds, 100, GroupKey::Subtype, 3).unwrap();
        let count = |name| out.records.iter().filter(|r| r.subtype.as_deref() == Some(name)).count();
        assert_eq!((count("Syn"), count("NetBIOS")), (100, 50));
        assert_eq!(out, balance_sample(&ds, 100, GroupKey::Subtype, 3).unwrap());
        assert_ne!(out, balance_sample(&ds, 100, GroupKey::Subtype, 4).unwrap());

        let all = balance_sample(&ds, 5000, GroupKey::Label, 3).unwrap();
        assert_eq!(all.records, ds.records);
        assert!(balance_sample(&ds, 0, GroupKey::Label, 3).is_err());
    }

    #[test]
    fn subsample_keeps_proportions() {
        let ds = labelled(300, 100);
        let out = stratified_subsample(&ds, 200, 1);
        assert_eq!(out.len(), 200);
        assert_eq!(out.count(LabelClass::Attack), 50);
    }

    #[test]
    fn holdout_by_subtype() {
        let ds = dataset(vec![
            (vec![0.0], LabelClass::Attack, Some("PortScan")),
            (vec![1.0], LabelClass::Attack, Some("Syn")),
            (vec![2.0], LabelClass::Benign, None),
        ]);
        let (rest, held) = hold_out_subtype(&ds, "PortScan");
        assert_eq!((rest.len(), held.len()), (2, 1));
    }

    #[test]
    fn framing() {
        let ds = dataset(vec![((0..77).map(f64::from).collect(), LabelClass::Attack, None)]);
        let b = frame_sequences(&ds, 7).unwrap();
        assert_eq!((b.seq_len, b.step_dim), (7, 11));
        assert_eq!(b.step(0, 1)[0], 11.0);
        let b1 = frame_sequences(&ds, 1).unwrap();
        assert_eq!((b1.seq_len, b1.step_dim), (1, 77));
        assert!(frame_sequences(&ds, 5).is_err());
        assert!(frame_sequences(&ds, 0).is_err());
    }

    proptest! {
        #[test]
        fn normalized_in_unit_interval(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 2..30)) {
            let ds = dataset(rows.into_iter().map(|r| (r, LabelClass::Benign, None)).collect());
            let s = fit_minmax(&ds).unwrap();
            let out = apply_minmax(&ds, &s).unwrap();
            for r in &out.records {
                for &v in &r.features {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
            // Re-fitting already normalized data is a no-op when every column spans [0,1].
            let s2 = fit_minmax(&out).unwrap();
            if s2.min.iter().all(|&m| m == 0.0) && s2.max.iter().all(|&m| m == 1.0) {
                prop_assert_eq!(apply_minmax(&out, &s2).unwrap().records, out.records);
            }
        }

        #[test]
        fn split_partitions(n_b in 3usize..60, n_a in 3usize..60, seed in 0u64..100, strat in any::<bool>()) {
            let ds = labelled(n_b, n_a);
            let spec = SplitSpec { seed, stratify_by_label: strat, ..SplitSpec::default() };
            let (tr, va, te) = stratified_split(&ds, &spec).unwrap();
            prop_assert_eq!(tr.len() + va.len() + te.len(), ds.len());
            let mut seen = HashSet::new();
            for r in tr.records.iter().chain(&va.records).chain(&te.records) {
                prop_assert!(seen.insert(r.source_row));
            }
            if strat {
                for label in [LabelClass::Benign, LabelClass::Attack] {
                    let n = ds.count(label) as f64;
                    for (part, f) in [(&tr, 0.7), (&va, 0.2), (&te, 0.1)] {
                        prop_assert!((part.count(label) as f64 - f * n).abs() <= 1.0);
                    }
                }
            }
        }

        #[test]
        fn frame_flatten_round_trip(vals in prop::collection::vec(-1e3f64..1e3, 12), seq_len in prop::sample::select(vec![1usize, 2, 3, 4, 6, 12])) {
            let ds = dataset(vec![(vals.clone(), LabelClass::Attack, None)]);
            let b = frame_sequences(&ds, seq_len).unwrap();
            prop_assert_eq!(b.record(0), &vals[..]);
            let steps: Vec<f64> = (0..seq_len).flat_map(|t| b.step(0, t).to_vec()).collect();
            prop_assert_eq!(steps, vals);
        }
    }
}
