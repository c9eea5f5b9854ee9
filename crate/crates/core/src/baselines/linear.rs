//! Logistic regression (batch gradient descent) and a linear SVM (averaged
//! Pegasos subgradient with a one-parameter Platt calibration).
//!
//! Both fit in z-scored coordinates and fold the scaling back into the
//! stored weight vector and bias.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::nn::Rng;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(d: usize) -> Self {
        Self {
            weights: vec![0.0; d],
            bias: 0.0,
        }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

struct Standardized {
    rows: Vec<Vec<f64>>,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

fn standardize(x: &[Vec<f64>]) -> Standardized {
    let n = x.len() as f64;
    let d = x.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; d];
    for row in x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n;
        }
    }
    let mut scale = vec![0.0; d];
    for row in x {
        for ((s, v), m) in scale.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in &mut scale {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    let rows = x
        .iter()
        .map(|row| row.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) / s).collect())
        .collect();
    Standardized { rows, mean, scale }
}

impl Standardized {
    /// Maps weights fitted on z-scores back to raw coordinates.
    fn unscale(&self, w: &[f64], b: f64) -> LinearModel {
        let weights: Vec<f64> = w.iter().zip(&self.scale).map(|(w, s)| w / s).collect();
        let bias = b - weights.iter().zip(&self.mean).map(|(w, m)| w * m).sum::<f64>();
        LinearModel { weights, bias }
    }
}

/// Largest eigenvalue of `AᵀA / n` for `A = [x | 1]`, by power iteration.
fn gram_spectral_radius(rows: &[Vec<f64>]) -> f64 {
    let d = rows.first().map_or(0, Vec::len) + 1;
    let n = rows.len() as f64;
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..50 {
        let mut next = vec![0.0; d];
        for row in rows {
            let dot = row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() + v[d - 1];
            for (o, a) in next.iter_mut().zip(row) {
                *o += a * dot / n;
            }
            next[d - 1] += dot / n;
        }
        let norm = next.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = next.into_iter().map(|a| a / norm).collect();
    }
    lambda
}

/// L2-regularised logistic regression by full-batch gradient descent with
/// step `1/L`, `L` the Lipschitz constant of the loss gradient.
pub fn fit_logistic(x: &[Vec<f64>], y: &[f64], iterations: usize, l2: f64) -> LinearModel {
    let z = standardize(x);
    let d = z.mean.len();
    let n = x.len() as f64;
    let lipschitz = 0.25 * gram_spectral_radius(&z.rows) + l2;
    let step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..iterations {
        let mut gw: Vec<f64> = w.iter().map(|wi| l2 * wi).collect();
        let mut gb = 0.0;
        for (row, &yi) in z.rows.iter().zip(y) {
            let m = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let r = (sigmoid(m) - yi) / n;
            for (g, a) in gw.iter_mut().zip(row) {
                *g += r * a;
            }
            gb += r;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= step * g;
        }
        b -= step * gb;
    }
    z.unscale(&w, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub linear: LinearModel,
    /// Platt slope: score = sigmoid(platt_scale · margin).
    pub platt_scale: f64,
}

/// Averaged Pegasos on the hinge loss; labels mapped to ±1. The bias is an
/// augmented constant feature.
pub fn fit_svm(x: &[Vec<f64>], y: &[f64], epochs: usize, l2: f64, rng: &mut Rng) -> LinearSvm {
    let z = standardize(x);
    let d = z.mean.len();
    let mut w = vec![0.0; d + 1];
    let mut avg = vec![0.0; d + 1];
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut t = 0u64;
    for _ in 0..epochs {
        order.shuffle(rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (l2 * t as f64);
            let yi = if y[i] > 0.5 { 1.0 } else { -1.0 };
            let row = &z.rows[i];
            let m = w[d] + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let shrink = 1.0 - eta * l2;
            w.iter_mut().for_each(|wi| *wi *= shrink);
            if yi * m < 1.0 {
                for (wi, a) in w.iter_mut().zip(row) {
                    *wi += eta * yi * a;
                }
                w[d] += eta * yi;
            }
            let k = 1.0 / t as f64;
            for (a, wi) in avg.iter_mut().zip(&w) {
                *a += (wi - *a) * k;
            }
        }
    }
    let linear = z.unscale(&avg[..d], avg[d]);
    let margins: Vec<f64> = x.iter().map(|row| linear.margin(row)).collect();
    let platt_scale = fit_platt_scale(&margins, y);
    LinearSvm { linear, platt_scale }
}

/// One-parameter Platt fit: minimises logistic loss of `sigmoid(a·m)` over
/// `a >= 0` by Newton's method, with a small ridge so separable data stays finite.
pub fn fit_platt_scale(margins: &[f64], y: &[f64]) -> f64 {
    const RIDGE: f64 = 1e-2;
    let spread = margins.iter().map(|m| m * m).sum::<f64>() / margins.len().max(1) as f64;
    if spread == 0.0 {
        return 1.0;
    }
    let mut a = 1.0 / spread.sqrt();
    for _ in 0..100 {
        let (mut g, mut h) = (RIDGE * a, RIDGE);
        for (&m, &yi) in margins.iter().zip(y) {
            let p = sigmoid(a * m);
            g += (p - yi) * m;
            h += p * (1.0 - p) * m * m;
        }
        let next = (a - g / h).max(0.0);
        if (next - a).abs() <= 1e-12 * a.max(1.0) {
            a = next;
            break;
        }
        a = next;
    }
    a
}
