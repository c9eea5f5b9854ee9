//! Classical classifiers behind one train/predict interface, operating on
//! flat feature vectors: Gaussian naive Bayes, CART, gradient-boosted trees,
//! random forest, linear SVM and logistic regression.

pub mod linear;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{Dataset, LabelClass};
use crate::error::{Error, Result};
use crate::metrics::{per_class_report, MetricReport};
use crate::model::label_for_score;
use crate::nn::Rng;

use linear::{fit_logistic, fit_svm, sigmoid, LinearModel, LinearSvm};
use tree::{build_tree, Target, Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaselineKind {
    NB,
    DT,
    Booster,
    RF,
    SVM,
    LR,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] = [
        BaselineKind::NB,
        BaselineKind::DT,
        BaselineKind::Booster,
        BaselineKind::RF,
        BaselineKind::SVM,
        BaselineKind::LR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::NB => "NB",
            BaselineKind::DT => "DT",
            BaselineKind::Booster => "Booster",
            BaselineKind::RF => "RF",
            BaselineKind::SVM => "SVM",
            BaselineKind::LR => "LR",
        }
    }

    fn allowed_keys(self) -> &'static [&'static str] {
        match self {
            BaselineKind::NB => &["var_floor"],
            BaselineKind::DT => &["max_depth", "min_leaf"],
            BaselineKind::RF => &["n_trees", "max_depth", "min_leaf", "max_features", "bootstrap"],
            BaselineKind::Booster => &["n_stages", "max_depth", "min_leaf", "shrinkage"],
            BaselineKind::SVM => &["epochs", "l2"],
            BaselineKind::LR => &["iterations", "l2"],
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown baseline {s:?}")))
    }
}

/// Hyper-parameter overrides, `key -> value`.
pub type Hyper = BTreeMap<String, f64>;

fn hyper_get(hyper: &Hyper, key: &str, default: f64) -> f64 {
    hyper.get(key).copied().unwrap_or(default)
}

fn hyper_usize(hyper: &Hyper, key: &str, default: usize) -> Result<usize> {
    match hyper.get(key) {
        None => Ok(default),
        Some(&v) if v >= 0.0 && v.fract() == 0.0 => Ok(v as usize),
        Some(v) => Err(Error::Config(format!("{key} must be a non-negative integer, got {v}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Indexed by class code.
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
    pub priors: [f64; 2],
}

impl GaussianNb {
    fn fit(x: &[Vec<f64>], y: &[f64], var_floor: f64) -> Self {
        let d = x[0].len();
        let mut means = [vec![0.0; d], vec![0.0; d]];
        let mut variances = [vec![0.0; d], vec![0.0; d]];
        let mut counts = [0usize; 2];
        for (row, &yi) in x.iter().zip(y) {
            let c = yi as usize;
            counts[c] += 1;
            for (m, v) in means[c].iter_mut().zip(row) {
                *m += v;
            }
        }
        for c in 0..2 {
            if counts[c] > 0 {
                means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
            }
        }
        for (row, &yi) in x.iter().zip(y) {
            let c = yi as usize;
            for ((s, v), m) in variances[c].iter_mut().zip(row).zip(&means[c]) {
                *s += (v - m) * (v - m);
            }
        }
        for c in 0..2 {
            let n = counts[c].max(1) as f64;
            variances[c].iter_mut().for_each(|s| *s = (*s / n).max(var_floor));
        }
        let total = x.len() as f64;
        let priors = [counts[0] as f64 / total, counts[1] as f64 / total];
        Self {
            means,
            variances,
            priors,
        }
    }

    fn log_joint(&self, c: usize, x: &[f64]) -> f64 {
        if self.priors[c] == 0.0 {
            return f64::NEG_INFINITY;
        }
        let ll: f64 = x
            .iter()
            .zip(&self.means[c])
            .zip(&self.variances[c])
            .map(|((v, m), s)| -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + (v - m) * (v - m) / s))
            .sum();
        self.priors[c].ln() + ll
    }

    /// Posterior P(Attack | x).
    pub fn posterior(&self, x: &[f64]) -> f64 {
        let lb = self.log_joint(0, x);
        let la = self.log_joint(1, x);
        if la == f64::NEG_INFINITY {
            return 0.0;
        }
        if lb == f64::NEG_INFINITY {
            return 1.0;
        }
        sigmoid(la - lb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub tree_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boosted {
    pub init_score: f64,
    pub trees: Vec<Tree>,
    pub stage_weights: Vec<f64>,
    pub shrinkage: f64,
}

impl Boosted {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.init_score
            + self
                .trees
                .iter()
                .zip(&self.stage_weights)
                .map(|(t, w)| self.shrinkage * w * t.predict(x))
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BaselineParams {
    NaiveBayes(GaussianNb),
    DecisionTree(Tree),
    RandomForest(Forest),
    Booster(Boosted),
    Svm(LinearSvm),
    Logistic(LinearModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub n_features: usize,
    pub params: BaselineParams,
}

fn matrix(data: &Dataset) -> (Vec<Vec<f64>>, Vec<f64>) {
    let x = data.records.iter().map(|r| r.features.clone()).collect();
    let y = data.records.iter().map(|r| f64::from(r.label.code())).collect();
    (x, y)
}

/// Bootstrap sample (with replacement) of `n` row indices.
pub fn bootstrap_rows(n: usize, rng: &mut Rng) -> Vec<usize> {
    (0..n).map(|_| rng.index(n)).collect()
}

pub fn default_tree_params(hyper: &Hyper) -> Result<TreeParams> {
    Ok(TreeParams {
        max_depth: hyper_usize(hyper, "max_depth", 12)?,
        min_leaf: hyper_usize(hyper, "min_leaf", 5)?,
        max_features: None,
    })
}

pub fn train_baseline(kind: BaselineKind, train: &Dataset, hyper: &Hyper, seed: u64) -> Result<BaselineModel> {
    if let Some(key) = hyper.keys().find(|k| !kind.allowed_keys().contains(&k.as_str())) {
        return Err(Error::Config(format!("{kind} does not take hyper-parameter {key:?}")));
    }
    if train.is_empty() {
        return Err(Error::Data(format!("{kind}: empty training set")));
    }
    let both = train.count(LabelClass::Attack) > 0 && train.count(LabelClass::Benign) > 0;
    if !both && kind != BaselineKind::NB {
        return Err(Error::Data(format!("{kind}: training set must contain both classes")));
    }
    let (x, y) = matrix(train);
    let d = train.feature_count();
    let mut rng = Rng::new(seed);

    let params = match kind {
        BaselineKind::NB => BaselineParams::NaiveBayes(GaussianNb::fit(&x, &y, hyper_get(hyper, "var_floor", 1e-9))),
        BaselineKind::DT => {
            let params = TreeParams {
                max_depth: hyper_usize(hyper, "max_depth", 12)?,
                min_leaf: hyper_usize(hyper, "min_leaf", 5)?,
                max_features: None,
            };
            BaselineParams::DecisionTree(build_tree(&x, &Target::Classify(&y), (0..x.len()).collect(), &params, &mut rng))
        }
        BaselineKind::RF => {
            let n_trees = hyper_usize(hyper, "n_trees", 100)?.max(1);
            let bag = match hyper_usize(hyper, "max_features", 0)? {
                0 => ((d as f64).sqrt().round() as usize).max(1),
                k => k.min(d),
            };
            let params = TreeParams {
                max_depth: hyper_usize(hyper, "max_depth", 12)?,
                min_leaf: hyper_usize(hyper, "min_leaf", 5)?,
                max_features: Some(bag),
            };
            let bootstrap = hyper_get(hyper, "bootstrap", 1.0) != 0.0;
            let tree_seeds: Vec<u64> = (0..n_trees as u64).map(|i| rng.derive(i).seed()).collect();
            let trees = tree_seeds
                .par_iter()
                .map(|&s| {
                    let mut tree_rng = Rng::new(s);
                    let rows = if bootstrap {
                        bootstrap_rows(x.len(), &mut tree_rng)
                    } else {
                        (0..x.len()).collect()
                    };
                    build_tree(&x, &Target::Classify(&y), rows, &params, &mut tree_rng)
                })
                .collect();
            BaselineParams::RandomForest(Forest { trees, tree_seeds })
        }
        BaselineKind::Booster => {
            let n_stages = hyper_usize(hyper, "n_stages", 100)?.max(1);
            let shrinkage = hyper_get(hyper, "shrinkage", 0.1);
            let params = TreeParams {
                max_depth: hyper_usize(hyper, "max_depth", 3)?,
                min_leaf: hyper_usize(hyper, "min_leaf", 5)?,
                max_features: None,
            };
            let p0 = (y.iter().sum::<f64>() / y.len() as f64).clamp(1e-6, 1.0 - 1e-6);
            let mut model = Boosted {
                init_score: (p0 / (1.0 - p0)).ln(),
                trees: Vec::with_capacity(n_stages),
                stage_weights: Vec::with_capacity(n_stages),
                shrinkage,
            };
            let mut margins = vec![model.init_score; x.len()];
            for _ in 0..n_stages {
                let probs: Vec<f64> = margins.iter().map(|&m| sigmoid(m)).collect();
                let grad: Vec<f64> = probs.iter().zip(&y).map(|(p, yi)| yi - p).collect();
                let hess: Vec<f64> = probs.iter().map(|p| p * (1.0 - p)).collect();
                let tree = build_tree(&x, &Target::Newton { grad: &grad, hess: &hess }, (0..x.len()).collect(), &params, &mut rng);
                for (m, row) in margins.iter_mut().zip(&x) {
                    *m += shrinkage * tree.predict(row);
                }
                model.trees.push(tree);
                model.stage_weights.push(1.0);
            }
            BaselineParams::Booster(model)
        }
        BaselineKind::SVM => {
            let epochs = hyper_usize(hyper, "epochs", 10)?.max(1);
            let l2 = hyper_get(hyper, "l2", 1e-4);
            if l2 <= 0.0 {
                return Err(Error::Config("SVM l2 must be > 0".into()));
            }
            BaselineParams::Svm(fit_svm(&x, &y, epochs, l2, &mut rng))
        }
        BaselineKind::LR => {
            let iterations = hyper_usize(hyper, "iterations", 200)?;
            BaselineParams::Logistic(fit_logistic(&x, &y, iterations, hyper_get(hyper, "l2", 1e-4)))
        }
    };
    Ok(BaselineModel {
        kind,
        n_features: d,
        params,
    })
}

impl BaselineModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        match &self.params {
            BaselineParams::NaiveBayes(nb) => nb.posterior(x),
            BaselineParams::DecisionTree(t) => t.predict(x),
            BaselineParams::RandomForest(f) => {
                f.trees.iter().map(|t| t.predict(x)).sum::<f64>() / f.trees.len() as f64
            }
            BaselineParams::Booster(b) => sigmoid(b.margin(x)),
            BaselineParams::Svm(s) => sigmoid(s.platt_scale * s.linear.margin(x)),
            BaselineParams::Logistic(l) => sigmoid(l.margin(x)),
        }
    }
}

/// Attack score in [0,1] per record and the thresholded label.
pub fn predict_baseline(model: &BaselineModel, data: &Dataset) -> Result<(Vec<f64>, Vec<LabelClass>)> {
    if data.feature_count() != model.n_features {
        return Err(Error::Dimension(format!(
            "{} trained on {} features, data has {}",
            model.kind,
            model.n_features,
            data.feature_count()
        )));
    }
    let scores: Vec<f64> = data.records.par_iter().map(|r| model.score(&r.features)).collect();
    let labels = scores.iter().map(|&s| label_for_score(s)).collect();
    Ok((scores, labels))
}

/// Trains each kind on `train` and evaluates it on `test`. Kinds train in
/// parallel; each is a pure function of (data, seed).
pub fn run_benchmark(
    train: &Dataset,
    test: &Dataset,
    kinds: &[BaselineKind],
    seed: u64,
) -> Result<Vec<(String, MetricReport)>> {
    let truth = test.labels();
    kinds
        .par_iter()
        .map(|&kind| {
            let model = train_baseline(kind, train, &Hyper::new(), seed)?;
            let (scores, labels) = predict_baseline(&model, test)?;
            Ok((kind.name().to_string(), per_class_report(&truth, &labels, Some(&scores))?))
        })
        .collect()
}
