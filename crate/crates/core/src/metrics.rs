//! Confusion matrix, precision/recall/F-score/accuracy, ROC and AUC.
//! Attack is the positive class throughout.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::catalog::LabelClass;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Benign treated as the positive class.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }

    /// Rows are the actual class (Attack, Benign), columns the predicted
    /// class in the same order; each row sums to 1 (or 0 if the class is absent).
    pub fn row_normalized(&self) -> [[f64; 2]; 2] {
        let row = |a: u64, b: u64| {
            let n = (a + b) as f64;
            if n == 0.0 {
                [0.0, 0.0]
            } else {
                [a as f64 / n, b as f64 / n]
            }
        };
        [row(self.tp, self.fn_), row(self.fp, self.tn)]
    }
}

pub fn confusion(labels_true: &[LabelClass], labels_pred: &[LabelClass]) -> Result<ConfusionMatrix> {
    if labels_true.len() != labels_pred.len() {
        return Err(Error::Dimension(format!(
            "{} true labels vs {} predictions",
            labels_true.len(),
            labels_pred.len()
        )));
    }
    if labels_true.is_empty() {
        return Err(Error::Data("no labels to evaluate".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in labels_true.iter().zip(labels_pred) {
        match (t, p) {
            (LabelClass::Attack, LabelClass::Attack) => cm.tp += 1,
            (LabelClass::Benign, LabelClass::Attack) => cm.fp += 1,
            (LabelClass::Benign, LabelClass::Benign) => cm.tn += 1,
            (LabelClass::Attack, LabelClass::Benign) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn precision(cm: &ConfusionMatrix) -> f64 {
    ratio(cm.tp, cm.tp + cm.fp)
}

pub fn recall(cm: &ConfusionMatrix) -> f64 {
    ratio(cm.tp, cm.tp + cm.fn_)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f_score(cm: &ConfusionMatrix) -> f64 {
    let (p, r) = (precision(cm), recall(cm));
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    ratio(cm.tp + cm.tn, cm.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl ClassMetrics {
    fn from_cm(cm: &ConfusionMatrix) -> Self {
        Self {
            precision: precision(cm),
            recall: recall(cm),
            f_score: f_score(cm),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub attack: ClassMetrics,
    pub benign: ClassMetrics,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub auc: Option<f64>,
    /// Metrics that hit 0/0 and were reported as 0.
    pub undefined: Vec<String>,
}

pub fn per_class_report(
    labels_true: &[LabelClass],
    labels_pred: &[LabelClass],
    scores: Option<&[f64]>,
) -> Result<MetricReport> {
    let cm = confusion(labels_true, labels_pred)?;
    let mut undefined = Vec::new();
    for (name, m) in [("attack", cm), ("benign", cm.swapped())] {
        if m.tp + m.fp == 0 {
            undefined.push(format!("precision_{name}"));
        }
        if m.tp + m.fn_ == 0 {
            undefined.push(format!("recall_{name}"));
        }
    }
    let auc = match scores {
        Some(s) => {
            if s.len() != labels_true.len() {
                return Err(Error::Dimension(format!(
                    "{} scores for {} labels",
                    s.len(),
                    labels_true.len()
                )));
            }
            let both = labels_true.contains(&LabelClass::Attack) && labels_true.contains(&LabelClass::Benign);
            if both {
                Some(auc(&roc_curve(labels_true, s)?))
            } else {
                undefined.push("auc".into());
                None
            }
        }
        None => None,
    };
    Ok(MetricReport {
        attack: ClassMetrics::from_cm(&cm),
        benign: ClassMetrics::from_cm(&cm.swapped()),
        accuracy: accuracy(&cm),
        confusion: cm,
        auc,
        undefined,
    })
}

impl MetricReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<8} {:>9} {:>9} {:>9}", "class", "precision", "recall", "f-score");
        for (name, m) in [("Attack", &self.attack), ("Benign", &self.benign)] {
            let _ = writeln!(s, "{name:<8} {:>9.4} {:>9.4} {:>9.4}", m.precision, m.recall, m.f_score);
        }
        let _ = writeln!(s, "accuracy {:.4}", self.accuracy);
        if let Some(auc) = self.auc {
            let _ = writeln!(s, "auc      {auc:.4}");
        }
        let cm = &self.confusion;
        let norm = cm.row_normalized();
        let _ = writeln!(s, "confusion (rows actual, cols predicted)");
        let _ = writeln!(s, "{:<8} {:>8} {:>8}", "", "Attack", "Benign");
        let _ = writeln!(s, "{:<8} {:>8} {:>8}   {:.4} {:.4}", "Attack", cm.tp, cm.fn_, norm[0][0], norm[0][1]);
        let _ = writeln!(s, "{:<8} {:>8} {:>8}   {:.4} {:.4}", "Benign", cm.fp, cm.tn, norm[1][0], norm[1][1]);
        if !self.undefined.is_empty() {
            let _ = writeln!(s, "undefined (reported as 0): {}", self.undefined.join(", "));
        }
        s
    }

    /// Values in benchmark-CSV column order (after the key column).
    pub fn csv_fields(&self) -> [String; 7] {
        [
            self.attack.precision,
            self.benign.precision,
            self.attack.recall,
            self.benign.recall,
            self.attack.f_score,
            self.benign.f_score,
            self.accuracy,
        ]
        .map(|v| format!("{v:.4}"))
    }
}

pub const REPORT_COLUMNS: [&str; 7] = [
    "precision_attack",
    "precision_benign",
    "recall_attack",
    "recall_benign",
    "f1_attack",
    "f1_benign",
    "accuracy",
];

/// Benchmark table: `key_column` followed by [`REPORT_COLUMNS`], one row per report.
pub fn write_report_csv<'a>(
    key_column: &str,
    rows: impl IntoIterator<Item = (String, &'a MetricReport)>,
    writer: impl std::io::Write,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![key_column];
    header.extend(REPORT_COLUMNS);
    wtr.write_record(&header)?;
    for (key, report) in rows {
        let mut row = vec![key];
        row.extend(report.csv_fields());
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (false-positive rate, true-positive rate), from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    /// Score threshold for each point (`score >= threshold` is Attack); the
    /// first entry is +inf.
    pub thresholds: Vec<f64>,
}

/// Sweeps the distinct scores in descending order; tied scores cross the
/// threshold together.
pub fn roc_curve(labels_true: &[LabelClass], scores: &[f64]) -> Result<RocCurve> {
    if labels_true.len() != scores.len() {
        return Err(Error::Dimension(format!(
            "{} labels vs {} scores",
            labels_true.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    let positives = labels_true.iter().filter(|&&l| l == LabelClass::Attack).count();
    let negatives = labels_true.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Data("ROC needs both classes present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            match labels_true[order[i]] {
                LabelClass::Attack => tp += 1,
                LabelClass::Benign => fp += 1,
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
        thresholds.push(threshold);
    }
    Ok(RocCurve { points, thresholds })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use LabelClass::{Attack as A, Benign as B};

    fn cm(tp: u64, fp: u64, tn: u64, fn_: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, fp, tn, fn_ }
    }

    #[test]
    fn confusion_counts() {
        let truth: Vec<_> = [A; 50].into_iter().chain([B; 50]).collect();
        assert_eq!(confusion(&truth, &truth).unwrap(), cm(50, 0, 50, 0));
        assert_eq!(confusion(&truth, &[A; 100]).unwrap(), cm(50, 50, 0, 0));
        assert!(confusion(&truth, &[A; 3]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn metric_arithmetic() {
        let c = cm(99, 1, 99, 1);
        for v in [precision(&c), recall(&c), f_score(&c), accuracy(&c)] {
            assert!((v - 0.99).abs() < 1e-12);
        }
        let zero = cm(0, 0, 5, 5);
        assert_eq!(precision(&zero), 0.0);
        assert_eq!(f_score(&zero), 0.0);
        let perfect = cm(10, 0, 7, 0);
        assert_eq!(
            [precision(&perfect), recall(&perfect), f_score(&perfect), accuracy(&perfect)],
            [1.0; 4]
        );
    }

    #[test]
    fn per_class_reports() {
        let truth: Vec<_> = [A; 100].into_iter().chain([B; 100]).collect();
        let mut pred = truth.clone();
        pred[0] = B;
        pred[150] = A;
        let r = per_class_report(&truth, &pred, None).unwrap();
        assert_eq!(r.attack, r.benign);
        assert!(r.undefined.is_empty());

        let all_attack = per_class_report(&truth, &[A; 200], None).unwrap();
        assert_eq!(all_attack.benign.recall, 0.0);
        assert_eq!(all_attack.attack.recall, 1.0);
        assert_eq!(all_attack.accuracy, 0.5);
        assert_eq!(all_attack.undefined, vec!["precision_benign".to_string()]);
        assert!(all_attack.to_text().contains("precision_benign"));
    }

    #[test]
    fn roc_cases() {
        let labels = [A, A, B, B];
        let perfect = roc_curve(&labels, &[0.9, 0.8, 0.2, 0.1]).unwrap();
        assert!(perfect.points.contains(&(0.0, 1.0)));
        assert_eq!(auc(&perfect), 1.0);

        let flat = roc_curve(&labels, &[0.5; 4]).unwrap();
        assert_eq!(flat.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(auc(&flat), 0.5);

        let one_inversion = roc_curve(&labels, &[0.9, 0.4, 0.6, 0.1]).unwrap();
        assert_eq!(
            one_inversion.points,
            vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]
        );
        assert!((auc(&one_inversion) - 0.75).abs() < 1e-15);

        assert!(roc_curve(&[A, A], &[0.1, 0.2]).is_err());
        assert!(roc_curve(&[A, B], &[0.1]).is_err());
    }

    #[test]
    fn report_csv_layout() {
        let r = per_class_report(&[A, B], &[A, B], Some(&[0.9, 0.1])).unwrap();
        assert_eq!(r.auc, Some(1.0));
        let mut buf = Vec::new();
        write_report_csv("kind", [("LR".to_string(), &r)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "kind,precision_attack,precision_benign,recall_attack,recall_benign,f1_attack,f1_benign,accuracy\n\
             LR,1.0000,1.0000,1.0000,1.0000,1.0000,1.0000,1.0000\n"
        );
    }
}
