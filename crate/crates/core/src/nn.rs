//! Dense numeric substrate: matrices, activations, losses, Adam, seeded
//! initialization and a central-difference gradient oracle.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
pub const PROB_FLOOR: f64 = 1e-12;

/// Seeded generator. The 64-bit seed is expanded to a ChaCha key with splitmix64.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha12Rng,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Self {
            seed,
            inner: ChaCha12Rng::from_seed(key),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream, e.g. one per tree or per epoch.
    pub fn derive(&self, tag: u64) -> Rng {
        let mut state = self.seed ^ tag.wrapping_mul(0xD1B5_4A32_D192_ED03);
        Rng::new(splitmix64(&mut state))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out += x · self` for a row vector `x` of length `rows`.
    pub fn accumulate_vec_mul(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(i)) {
                *o += xi * w;
            }
        }
    }

    /// `out += self · g` for a column vector `g` of length `cols`.
    pub fn accumulate_mul_vec(&self, g: &[f64], out: &mut [f64]) {
        debug_assert_eq!(g.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o += row.iter().zip(g).map(|(w, gi)| w * gi).sum::<f64>();
        }
    }

    /// `self += x ⊗ g` (outer product).
    pub fn accumulate_outer(&mut self, x: &[f64], g: &[f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(g.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (w, &gj) in self.row_mut(i).iter_mut().zip(g) {
                *w += xi * gj;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Relu => a.max(0.0),
            Activation::Tanh => a.tanh(),
        }
    }

    /// Derivative given the pre-activation `a` and the output `z`.
    pub fn derivative(self, a: f64, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z * z,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| Activation::Relu.apply(v)).collect()
}

/// Subgradient at exactly 0 is 0.
pub fn relu_grad(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-Σ onehot·ln(max(p, 1e-12))`.
pub fn categorical_crossentropy(probs: &[f64], onehot: &[f64]) -> Result<f64> {
    if probs.len() != onehot.len() {
        return Err(Error::Dimension(format!(
            "crossentropy over {} probabilities and {} targets",
            probs.len(),
            onehot.len()
        )));
    }
    Ok(-probs
        .iter()
        .zip(onehot)
        .filter(|(_, &y)| y != 0.0)
        .map(|(&p, &y)| y * p.max(PROB_FLOOR).ln())
        .sum::<f64>())
}

pub fn mse(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(Error::Dimension(format!(
            "mse over vectors of length {} and {}",
            x.len(),
            x_hat.len()
        )));
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    Ok(x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
}

/// Adam moments for a list of parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(block_sizes: &[usize]) -> Self {
        Self {
            first_moment: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step_count: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
        }
    }
}

/// One bias-corrected Adam update. A non-finite gradient is reported and
/// leaves both parameters and state untouched.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::Dimension(format!(
            "adam over {} parameter blocks, {} gradient blocks, {} moment blocks",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.first_moment[i].len() {
            return Err(Error::Dimension(format!(
                "adam block {i}: {} params, {} grads, {} moments",
                p.len(),
                g.len(),
                state.first_moment[i].len()
            )));
        }
    }
    if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numeric("non-finite gradient; update skipped".into()));
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        for j in 0..p.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Central differences `(f(p + eps·e_i) − f(p − eps·e_i)) / 2eps`.
pub fn finite_diff_grad(mut f: impl FnMut(&[f64]) -> f64, params: &[f64], eps: f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + eps;
            let plus = f(&p);
            p[i] = orig - eps;
            let minus = f(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitScheme {
    #[default]
    GlorotUniform,
    Zeros,
}

/// `rows` is fan-in, `cols` is fan-out.
pub fn init_weights(rows: usize, cols: usize, rng: &mut Rng, scheme: InitScheme) -> Matrix {
    match scheme {
        InitScheme::Zeros => Matrix::zeros(rows, cols),
        InitScheme::GlorotUniform => {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect();
            Matrix { rows, cols, data }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use super::Rng;
    use rand::RngCore;

    #[test]
    fn relu_values() {
        assert_eq!(relu(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 2.0]);
        assert_eq!(relu_grad(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn softmax_values() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        for c in [-3.0, 0.0, 17.5] {
            let p = softmax(&[c, c + 3f64.ln()]);
            assert!((p[0] - 0.25).abs() < 1e-12);
            assert!((p[1] - 0.75).abs() < 1e-12);
        }
        let p = softmax(&[1000.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-300);
    }

    #[test]
    fn crossentropy_values() {
        assert!(categorical_crossentropy(&[1.0, 0.0], &[1.0, 0.0]).unwrap().abs() < 1e-15);
        let l = categorical_crossentropy(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let l = categorical_crossentropy(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((l - 27.631_021_115_928_547).abs() < 1e-9);
        assert!(categorical_crossentropy(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn mse_values() {
        assert_eq!(mse(&[0.3, 0.2], &[0.3, 0.2]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!(mse(&[0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut p = vec![1.0, -2.0];
        let mut state = AdamState::new(&[2]);
        state.first_moment[0] = vec![0.5, -0.5];
        state.second_moment[0] = vec![0.25, 0.25];
        adam_step(&mut [&mut p[..]], &[&[0.0, 0.0][..]], &mut state, 0.0).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(state.first_moment[0], vec![0.45, -0.45]);
        assert!(state.second_moment[0][0] < 0.25);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn adam_first_step_is_sign_times_lr() {
        // t=1: m_hat = g, v_hat = g², so the step is lr·g/(|g|+eps).
        let g = [0.3, -4.0, 1e-3];
        let mut p = [0.0; 3];
        let mut state = AdamState::new(&[3]);
        let lr = 0.01;
        adam_step(&mut [&mut p[..]], &[&g[..]], &mut state, lr).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            let expected = -gi.signum() * lr;
            assert!((pi - expected).abs() <= lr * 1e-4, "{pi} vs {expected}");
        }
    }

    #[test]
    fn adam_is_deterministic_and_rejects_bad_input() {
        let run = || {
            let mut p = vec![0.1, 0.2];
            let mut s = AdamState::new(&[2]);
            for _ in 0..3 {
                adam_step(&mut [&mut p[..]], &[&[0.5, -0.1][..]], &mut s, 0.1).unwrap();
            }
            (p, s)
        };
        assert_eq!(run(), run());

        let mut p = [0.0; 2];
        let mut s = AdamState::new(&[2]);
        let err = adam_step(&mut [&mut p[..]], &[&[f64::NAN, 0.0][..]], &mut s, 0.1).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert_eq!(s.step_count, 0);
        assert!(adam_step(&mut [&mut p[..]], &[&[0.0][..]], &mut s, 0.1).is_err());
    }

    #[test]
    fn finite_differences() {
        let g = finite_diff_grad(|p| p[0] * p[0], &[3.0], 1e-5);
        assert!((g[0] - 6.0).abs() < 1e-6);
        let s = [2.0, -1.5, 0.25];
        let g = finite_diff_grad(|p| p.iter().zip(&s).map(|(a, b)| a * b).sum(), &[0.3, 0.1, -7.0], 1e-5);
        for (a, b) in g.iter().zip(s) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn glorot_init() {
        let a = init_weights(2, 3, &mut Rng::new(1), InitScheme::GlorotUniform);
        let b = init_weights(2, 3, &mut Rng::new(1), InitScheme::GlorotUniform);
        assert_eq!(a, b);
        let w = init_weights(64, 32, &mut Rng::new(9), InitScheme::GlorotUniform);
        let bound = (6.0f64 / 96.0).sqrt();
        assert!((bound - 0.25).abs() < 1e-12);
        assert!(w.as_slice().iter().all(|v| v.abs() <= bound));
        let z = init_weights(4, 4, &mut Rng::new(1), InitScheme::Zeros);
        assert!(z.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn derived_streams_differ() {
        let base = Rng::new(5);
        let mut a = base.derive(1);
        let mut b = base.derive(2);
        assert_ne!(a.next_u64(), b.next_u64());
        assert_eq!(Rng::new(5).derive(1).next_u64(), base.derive(1).next_u64());
    }

    proptest! {
        #[test]
        fn relu_idempotent(x in prop::collection::vec(-10.0f64..10.0, 0..20)) {
            prop_assert_eq!(relu(&relu(&x)), relu(&x));
        }

        #[test]
        fn softmax_normalized_and_shift_invariant(
            x in prop::collection::vec(-50.0f64..50.0, 1..10),
            c in -100.0f64..100.0,
        ) {
            let p = softmax(&x);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            for (a, b) in p.iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn crossentropy_nonnegative(x in prop::collection::vec(-20.0f64..20.0, 2..6), k in 0usize..6) {
            let p = softmax(&x);
            let mut y = vec![0.0; p.len()];
            y[k % p.len()] = 1.0;
            prop_assert!(categorical_crossentropy(&p, &y).unwrap() >= 0.0);
        }

        #[test]
        fn mse_symmetric(pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..20)) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
        }

        #[test]
        fn adam_zero_lr_is_noop(p0 in prop::collection::vec(-1.0f64..1.0, 1..8), seed in 0u64..1000) {
            let mut rng = Rng::new(seed);
            let g: Vec<f64> = p0.iter().map(|_| rng.uniform(-1.0, 1.0)).collect();
            let mut p = p0.clone();
            let mut s = AdamState::new(&[p.len()]);
            adam_step(&mut [&mut p[..]], &[&g[..]], &mut s, 0.0).unwrap();
            prop_assert_eq!(
                p.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                p0.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
