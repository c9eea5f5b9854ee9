//! Stacked simple-RNN autoencoder with a two-way softmax head.
//!
//! Every layer computes `z_t = act(x_t·W_xz + z_{t-1}·W_zz + b_h)` with
//! `z_0 = 0`. The encoder narrows (64, 32, 16, 8 by default), the decoder
//! mirrors it, a per-timestep projection reconstructs the input steps, and
//! the head reads the final decoder state. Gradients are exact
//! backpropagation through time, computed per record and reduced in record
//! order so results do not depend on thread scheduling.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::LabelClass;
use crate::error::{Error, Result};
use crate::nn::{adam_step, init_weights, softmax, Activation, AdamState, InitScheme, Matrix, Rng, PROB_FLOOR};
use crate::preprocess::SequenceBatch;

pub const ENCODER_WIDTHS: [usize; 4] = [64, 32, 16, 8];
pub const NUM_CLASSES: usize = 2;
pub const CLIP_NORM: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnLayer {
    /// input × hidden
    pub w_xz: Matrix,
    /// hidden × hidden; row `i` multiplies `z_{t-1}[i]`
    pub w_zz: Matrix,
    pub b_h: Vec<f64>,
    pub activation: Activation,
}

impl RnnLayer {
    pub fn new(input: usize, hidden: usize, activation: Activation, rng: &mut Rng, scheme: InitScheme) -> Self {
        Self {
            w_xz: init_weights(input, hidden, rng, scheme),
            w_zz: init_weights(hidden, hidden, rng, scheme),
            b_h: vec![0.0; hidden],
            activation,
        }
    }

    pub fn from_parts(w_xz: Matrix, w_zz: Matrix, b_h: Vec<f64>, activation: Activation) -> Result<Self> {
        let hidden = b_h.len();
        if w_xz.cols() != hidden || w_zz.shape() != (hidden, hidden) {
            return Err(Error::Dimension(format!(
                "rnn layer: W_xz {:?}, W_zz {:?}, bias {hidden}",
                w_xz.shape(),
                w_zz.shape()
            )));
        }
        Ok(Self {
            w_xz,
            w_zz,
            b_h,
            activation,
        })
    }

    pub fn input_size(&self) -> usize {
        self.w_xz.rows()
    }

    pub fn hidden_size(&self) -> usize {
        self.b_h.len()
    }

    /// Flat `[seq_len × input]` → (pre-activations, states), both `[seq_len × hidden]`.
    fn run(&self, inputs: &[f64], seq_len: usize) -> (Vec<f64>, Vec<f64>) {
        let (n_in, h) = (self.input_size(), self.hidden_size());
        let mut pre = vec![0.0; seq_len * h];
        let mut states = vec![0.0; seq_len * h];
        for t in 0..seq_len {
            let a = &mut pre[t * h..(t + 1) * h];
            a.copy_from_slice(&self.b_h);
            self.w_xz.accumulate_vec_mul(&inputs[t * n_in..(t + 1) * n_in], a);
            if t > 0 {
                let (prev, _) = states.split_at(t * h);
                self.w_zz.accumulate_vec_mul(&prev[(t - 1) * h..], a);
            }
            for j in 0..h {
                states[t * h + j] = self.activation.apply(a[j]);
            }
        }
        (pre, states)
    }

    /// Accumulates parameter gradients into `grads` (w_xz, w_zz, b_h) given
    /// `d_states` = dL/dz_t from above. Returns dL/dx_t when `want_inputs`.
    fn backward(
        &self,
        inputs: &[f64],
        pre: &[f64],
        states: &[f64],
        d_states: &[f64],
        grads: &mut [Vec<f64>],
        want_inputs: bool,
    ) -> Option<Vec<f64>> {
        let (n_in, h) = (self.input_size(), self.hidden_size());
        let seq_len = states.len() / h;
        let mut d_inputs = want_inputs.then(|| vec![0.0; seq_len * n_in]);
        let mut carry = vec![0.0; h];
        let mut g = vec![0.0; h];
        let [g_xz, g_zz, g_b] = grads else {
            unreachable!("rnn layer has three parameter blocks")
        };
        for t in (0..seq_len).rev() {
            for j in 0..h {
                let k = t * h + j;
                g[j] = (d_states[k] + carry[j]) * self.activation.derivative(pre[k], states[k]);
            }
            outer_into(g_xz, n_in, h, &inputs[t * n_in..(t + 1) * n_in], &g);
            if t > 0 {
                outer_into(g_zz, h, h, &states[(t - 1) * h..t * h], &g);
            }
            for (b, gj) in g_b.iter_mut().zip(&g) {
                *b += gj;
            }
            carry.iter_mut().for_each(|c| *c = 0.0);
            self.w_zz.accumulate_mul_vec(&g, &mut carry);
            if let Some(dx) = d_inputs.as_mut() {
                self.w_xz.accumulate_mul_vec(&g, &mut dx[t * n_in..(t + 1) * n_in]);
            }
        }
        d_inputs
    }
}

fn outer_into(block: &mut [f64], rows: usize, cols: usize, x: &[f64], g: &[f64]) {
    debug_assert_eq!(block.len(), rows * cols);
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (w, &gj) in block[i * cols..(i + 1) * cols].iter_mut().zip(g) {
            *w += xi * gj;
        }
    }
}

/// States `z_1..z_T` for the given input steps, starting from `z0`.
pub fn rnn_forward(layer: &RnnLayer, inputs: &[Vec<f64>], z0: &[f64]) -> Result<Vec<Vec<f64>>> {
    let h = layer.hidden_size();
    if z0.len() != h {
        return Err(Error::Dimension(format!("initial state has {} entries, layer has {h}", z0.len())));
    }
    let mut z = z0.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for x in inputs {
        if x.len() != layer.input_size() {
            return Err(Error::Dimension(format!(
                "input step has {} entries, layer expects {}",
                x.len(),
                layer.input_size()
            )));
        }
        let mut a = layer.b_h.clone();
        layer.w_xz.accumulate_vec_mul(x, &mut a);
        layer.w_zz.accumulate_vec_mul(&z, &mut a);
        z = a.into_iter().map(|v| layer.activation.apply(v)).collect();
        out.push(z.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputProjection {
    /// hidden × output
    pub w_zf: Matrix,
    pub b_f: Vec<f64>,
}

impl OutputProjection {
    pub fn new(hidden: usize, out: usize, rng: &mut Rng, scheme: InitScheme) -> Self {
        Self {
            w_zf: init_weights(hidden, out, rng, scheme),
            b_f: vec![0.0; out],
        }
    }

    pub fn from_parts(w_zf: Matrix, b_f: Vec<f64>) -> Result<Self> {
        if w_zf.cols() != b_f.len() {
            return Err(Error::Dimension(format!(
                "projection: W {:?} with bias {}",
                w_zf.shape(),
                b_f.len()
            )));
        }
        Ok(Self { w_zf, b_f })
    }

    fn apply(&self, state: &[f64]) -> Vec<f64> {
        let mut out = self.b_f.clone();
        self.w_zf.accumulate_vec_mul(state, &mut out);
        out
    }

    fn backward(&self, state: &[f64], d_out: &[f64], grads: &mut [Vec<f64>], d_state: &mut [f64]) {
        let [g_w, g_b] = grads else {
            unreachable!("projection has two parameter blocks")
        };
        outer_into(g_w, self.w_zf.rows(), self.w_zf.cols(), state, d_out);
        for (b, d) in g_b.iter_mut().zip(d_out) {
            *b += d;
        }
        self.w_zf.accumulate_mul_vec(d_out, d_state);
    }
}

/// `f = h·W_zf + b_f`, no activation.
pub fn project_output(proj: &OutputProjection, state: &[f64]) -> Result<Vec<f64>> {
    if state.len() != proj.w_zf.rows() {
        return Err(Error::Dimension(format!(
            "state has {} entries, projection expects {}",
            state.len(),
            proj.w_zf.rows()
        )));
    }
    Ok(proj.apply(state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockRole {
    Encoder,
    Decoder,
    Recon,
    Head,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub encoder: Vec<RnnLayer>,
    pub decoder: Vec<RnnLayer>,
    pub recon: OutputProjection,
    pub head: OutputProjection,
    pub seq_len: usize,
    pub step_dim: usize,
}

/// Output of [`forward`] for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Per record, `[seq_len × step_dim]` flattened.
    pub reconstruction: Vec<Vec<f64>>,
    pub bottleneck: Vec<Vec<f64>>,
    pub class_probs: Vec<[f64; NUM_CLASSES]>,
}

struct RecordTrace {
    /// inputs, pre-activations, states per layer (encoder then decoder)
    layers: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    reconstruction: Vec<f64>,
    logits: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    ReconstructionMse,
    CrossEntropy,
}

impl AutoencoderModel {
    /// Encoder widths are given top-down (e.g. 64, 32, 16, 8); the decoder mirrors them.
    pub fn new(
        seq_len: usize,
        step_dim: usize,
        encoder_widths: &[usize],
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        Self::with_init(seq_len, step_dim, encoder_widths, activation, seed, InitScheme::GlorotUniform)
    }

    pub fn with_init(
        seq_len: usize,
        step_dim: usize,
        encoder_widths: &[usize],
        activation: Activation,
        seed: u64,
        scheme: InitScheme,
    ) -> Result<Self> {
        if seq_len == 0 || step_dim == 0 {
            return Err(Error::Config("seq_len and step_dim must be positive".into()));
        }
        if encoder_widths.is_empty() || encoder_widths.contains(&0) {
            return Err(Error::Config("encoder widths must be non-empty and positive".into()));
        }
        if encoder_widths.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(format!(
                "encoder widths must strictly decrease: {encoder_widths:?}"
            )));
        }
        let mut rng = Rng::new(seed);
        let mut encoder = Vec::new();
        let mut input = step_dim;
        for &w in encoder_widths {
            encoder.push(RnnLayer::new(input, w, activation, &mut rng, scheme));
            input = w;
        }
        let mut decoder = Vec::new();
        for &w in encoder_widths.iter().rev() {
            decoder.push(RnnLayer::new(input, w, activation, &mut rng, scheme));
            input = w;
        }
        let recon = OutputProjection::new(input, step_dim, &mut rng, scheme);
        let head = OutputProjection::new(input, NUM_CLASSES, &mut rng, scheme);
        Ok(Self {
            encoder,
            decoder,
            recon,
            head,
            seq_len,
            step_dim,
        })
    }

    pub fn layer_widths(&self) -> Vec<usize> {
        self.encoder.iter().chain(&self.decoder).map(RnnLayer::hidden_size).collect()
    }

    pub fn bottleneck_size(&self) -> usize {
        self.encoder.last().map_or(0, RnnLayer::hidden_size)
    }

    /// Checks that every block agrees with its neighbours.
    pub fn validate(&self) -> Result<()> {
        let mut input = self.step_dim;
        for (i, layer) in self.encoder.iter().chain(&self.decoder).enumerate() {
            if layer.input_size() != input {
                return Err(Error::Dimension(format!(
                    "layer {i} expects {} inputs, previous layer gives {input}",
                    layer.input_size()
                )));
            }
            if layer.w_zz.shape() != (layer.hidden_size(), layer.hidden_size()) {
                return Err(Error::Dimension(format!("layer {i} recurrent block is not square")));
            }
            input = layer.hidden_size();
        }
        if self.encoder.is_empty() || self.decoder.len() != self.encoder.len() {
            return Err(Error::Dimension("decoder must mirror the encoder".into()));
        }
        let enc: Vec<usize> = self.encoder.iter().map(RnnLayer::hidden_size).collect();
        let dec: Vec<usize> = self.decoder.iter().rev().map(RnnLayer::hidden_size).collect();
        if enc != dec {
            return Err(Error::Dimension(format!("decoder widths {dec:?} do not mirror {enc:?}")));
        }
        if self.recon.w_zf.shape() != (input, self.step_dim) || self.recon.b_f.len() != self.step_dim {
            return Err(Error::Dimension("reconstruction projection shape".into()));
        }
        if self.head.w_zf.shape() != (input, NUM_CLASSES) || self.head.b_f.len() != NUM_CLASSES {
            return Err(Error::Dimension("head projection shape".into()));
        }
        Ok(())
    }

    /// Parameter blocks in canonical order: per layer `w_xz, w_zz, b_h`
    /// (encoder then decoder), then recon `w, b`, then head `w, b`.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in self.encoder.iter().chain(&self.decoder) {
            out.push(l.w_xz.as_slice());
            out.push(l.w_zz.as_slice());
            out.push(&l.b_h);
        }
        for p in [&self.recon, &self.head] {
            out.push(p.w_zf.as_slice());
            out.push(&p.b_f);
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            out.push(l.w_xz.as_mut_slice());
            out.push(l.w_zz.as_mut_slice());
            out.push(&mut l.b_h);
        }
        for p in [&mut self.recon, &mut self.head] {
            out.push(p.w_zf.as_mut_slice());
            out.push(&mut p.b_f);
        }
        out
    }

    pub fn block_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (side, layers) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            for i in 0..layers.len() {
                for p in ["w_xz", "w_zz", "b_h"] {
                    out.push(format!("{side}.{i}.{p}"));
                }
            }
        }
        out.extend(["recon.w_zf", "recon.b_f", "head.w_zf", "head.b_f"].map(String::from));
        out
    }

    pub fn block_roles(&self) -> Vec<BlockRole> {
        let mut out = vec![BlockRole::Encoder; 3 * self.encoder.len()];
        out.extend(vec![BlockRole::Decoder; 3 * self.decoder.len()]);
        out.extend([BlockRole::Recon, BlockRole::Recon, BlockRole::Head, BlockRole::Head]);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.blocks().iter().map(|b| vec![0.0; b.len()]).collect()
    }

    fn check_batch(&self, batch: &SequenceBatch) -> Result<()> {
        if batch.seq_len != self.seq_len || batch.step_dim != self.step_dim {
            return Err(Error::Dimension(format!(
                "batch is {}x{}, model expects {}x{}",
                batch.seq_len, batch.step_dim, self.seq_len, self.step_dim
            )));
        }
        Ok(())
    }

    fn trace(&self, record: &[f64]) -> RecordTrace {
        let t_len = self.seq_len;
        let mut layers = Vec::with_capacity(self.encoder.len() + self.decoder.len());
        let mut input = record.to_vec();
        for layer in self.encoder.iter().chain(&self.decoder) {
            let (pre, states) = layer.run(&input, t_len);
            let next = states.clone();
            layers.push((input, pre, states));
            input = next;
        }
        let top = &layers.last().expect("at least one layer").2;
        let h = top.len() / t_len;
        let mut reconstruction = Vec::with_capacity(t_len * self.step_dim);
        for t in 0..t_len {
            reconstruction.extend(self.recon.apply(&top[t * h..(t + 1) * h]));
        }
        let logits = self.head.apply(&top[(t_len - 1) * h..]);
        RecordTrace {
            layers,
            reconstruction,
            logits,
        }
    }

    fn bottleneck_of(&self, trace: &RecordTrace) -> Vec<f64> {
        let states = &trace.layers[self.encoder.len() - 1].2;
        let h = self.bottleneck_size();
        states[(self.seq_len - 1) * h..].to_vec()
    }

    fn record_loss(&self, trace: &RecordTrace, record: &[f64], label: LabelClass, objective: Objective) -> f64 {
        match objective {
            Objective::ReconstructionMse => {
                let n = record.len() as f64;
                trace
                    .reconstruction
                    .iter()
                    .zip(record)
                    .map(|(r, x)| (r - x) * (r - x))
                    .sum::<f64>()
                    / n
            }
            Objective::CrossEntropy => {
                let p = softmax(&trace.logits);
                -p[label.index()].max(PROB_FLOOR).ln()
            }
        }
    }

    /// Loss and full gradient for one record, unscaled.
    fn record_grads(&self, record: &[f64], label: LabelClass, objective: Objective) -> (f64, Vec<Vec<f64>>) {
        let trace = self.trace(record);
        let loss = self.record_loss(&trace, record, label, objective);
        let mut grads = self.zero_grads();
        let n_layers = self.encoder.len() + self.decoder.len();
        let top_h = self.decoder.last().expect("decoder").hidden_size();
        let t_len = self.seq_len;
        let mut d_states = vec![0.0; t_len * top_h];
        let top = &trace.layers[n_layers - 1].2;

        match objective {
            Objective::ReconstructionMse => {
                let scale = 2.0 / record.len() as f64;
                let (recon_grads, _) = grads.split_at_mut(3 * n_layers + 2);
                let recon_grads = &mut recon_grads[3 * n_layers..];
                for t in 0..t_len {
                    let s = t * self.step_dim;
                    let d_out: Vec<f64> = (0..self.step_dim)
                        .map(|j| scale * (trace.reconstruction[s + j] - record[s + j]))
                        .collect();
                    self.recon.backward(
                        &top[t * top_h..(t + 1) * top_h],
                        &d_out,
                        recon_grads,
                        &mut d_states[t * top_h..(t + 1) * top_h],
                    );
                }
            }
            Objective::CrossEntropy => {
                let mut d_logits = softmax(&trace.logits);
                d_logits[label.index()] -= 1.0;
                let head_grads = &mut grads[3 * n_layers + 2..];
                let last = (t_len - 1) * top_h;
                self.head.backward(&top[last..], &d_logits, head_grads, &mut d_states[last..]);
            }
        }

        let layers: Vec<&RnnLayer> = self.encoder.iter().chain(&self.decoder).collect();
        for li in (0..n_layers).rev() {
            let (inputs, pre, states) = &trace.layers[li];
            let d_in = layers[li].backward(inputs, pre, states, &d_states, &mut grads[3 * li..3 * li + 3], li > 0);
            if let Some(d) = d_in {
                d_states = d;
            }
        }
        (loss, grads)
    }
}

/// Runs the full model on a batch.
pub fn forward(model: &AutoencoderModel, batch: &SequenceBatch) -> Result<ForwardOutput> {
    model.check_batch(batch)?;
    let traces: Vec<RecordTrace> = (0..batch.len())
        .into_par_iter()
        .map(|i| model.trace(batch.record(i)))
        .collect();
    let mut out = ForwardOutput {
        reconstruction: Vec::with_capacity(traces.len()),
        bottleneck: Vec::with_capacity(traces.len()),
        class_probs: Vec::with_capacity(traces.len()),
    };
    for trace in traces {
        out.bottleneck.push(model.bottleneck_of(&trace));
        let p = softmax(&trace.logits);
        out.class_probs.push([p[0], p[1]]);
        out.reconstruction.push(trace.reconstruction);
    }
    Ok(out)
}

/// Mean objective and its exact gradient over the selected records.
fn batch_grads(
    model: &AutoencoderModel,
    batch: &SequenceBatch,
    indices: &[usize],
    objective: Objective,
    parallel: bool,
) -> (f64, Vec<Vec<f64>>) {
    let per_record = |&i: &usize| model.record_grads(batch.record(i), batch.labels[i], objective);
    let results: Vec<(f64, Vec<Vec<f64>>)> = if parallel {
        indices.par_iter().map(per_record).collect()
    } else {
        indices.iter().map(per_record).collect()
    };
    let mut total = model.zero_grads();
    let mut loss = 0.0;
    for (l, grads) in &results {
        loss += l;
        for (acc, g) in total.iter_mut().zip(grads) {
            for (a, v) in acc.iter_mut().zip(g) {
                *a += v;
            }
        }
    }
    let scale = 1.0 / indices.len().max(1) as f64;
    for block in &mut total {
        block.iter_mut().for_each(|v| *v *= scale);
    }
    (loss * scale, total)
}

/// Gradient of the batch-mean objective with respect to every parameter
/// block, in [`AutoencoderModel::blocks`] order.
pub fn bptt_grads(model: &AutoencoderModel, batch: &SequenceBatch, objective: Objective) -> Result<(f64, Vec<Vec<f64>>)> {
    model.check_batch(batch)?;
    if batch.is_empty() {
        return Err(Error::Data("empty batch".into()));
    }
    let indices: Vec<usize> = (0..batch.len()).collect();
    let (loss, grads) = batch_grads(model, batch, &indices, objective, true);
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {loss}")));
    }
    Ok((loss, grads))
}

/// Mean objective over the whole batch, no gradients.
pub fn batch_loss(model: &AutoencoderModel, batch: &SequenceBatch, objective: Objective) -> Result<f64> {
    model.check_batch(batch)?;
    if batch.is_empty() {
        return Ok(0.0);
    }
    let losses: Vec<f64> = (0..batch.len())
        .into_par_iter()
        .map(|i| {
            let trace = model.trace(batch.record(i));
            model.record_loss(&trace, batch.record(i), batch.labels[i], objective)
        })
        .collect();
    Ok(losses.iter().sum::<f64>() / batch.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FineTuneScope {
    HeadOnly,
    #[default]
    WholeNetwork,
}

impl std::str::FromStr for FineTuneScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head_only" | "head-only" => Ok(FineTuneScope::HeadOnly),
            "whole_network" | "whole-network" => Ok(FineTuneScope::WholeNetwork),
            other => Err(Error::Config(format!("unknown fine-tune scope {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub activation: Activation,
    pub fine_tune_scope: FineTuneScope,
    pub clip_norm: f64,
    /// Disables parallel gradient evaluation.
    pub strict_determinism: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-4,
            seed: 0,
            activation: Activation::Relu,
            fine_tune_scope: FineTuneScope::WholeNetwork,
            clip_norm: CLIP_NORM,
            strict_determinism: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Finetune,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Pretrain => "pretrain",
            Phase::Finetune => "finetune",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub phase: Phase,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, if model selection ran.
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    fn new(phase: Phase) -> Self {
        Self {
            phase,
            epochs: Vec::new(),
            best_epoch: None,
        }
    }
}

fn global_norm(grads: &[Vec<f64>], trainable: &[bool]) -> f64 {
    grads
        .iter()
        .zip(trainable)
        .filter(|(_, &t)| t)
        .flat_map(|(g, _)| g.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

fn run_phase(
    model: &mut AutoencoderModel,
    train: &SequenceBatch,
    val: &SequenceBatch,
    cfg: &TrainConfig,
    phase: Phase,
    trainable: &[bool],
    on_epoch: &mut dyn FnMut(Phase, &EpochRecord),
) -> Result<TrainHistory> {
    cfg.validate()?;
    model.check_batch(train)?;
    model.check_batch(val)?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Data(format!("{phase}: training and validation sets must be non-empty")));
    }
    let objective = match phase {
        Phase::Pretrain => Objective::ReconstructionMse,
        Phase::Finetune => Objective::CrossEntropy,
    };
    let sizes: Vec<usize> = model
        .blocks()
        .iter()
        .zip(trainable)
        .filter(|(_, &t)| t)
        .map(|(b, _)| b.len())
        .collect();
    let mut adam = AdamState::new(&sizes);
    let mut rng = Rng::new(cfg.seed).derive(phase as u64 + 1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory::new(phase);
    let mut best: Option<(f64, usize, AutoencoderModel)> = None;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (loss, mut grads) = batch_grads(model, train, chunk, objective, !cfg.strict_determinism);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    phase: phase.name().into(),
                    epoch,
                    history,
                });
            }
            loss_sum += loss * chunk.len() as f64;
            let norm = global_norm(&grads, trainable);
            if norm > cfg.clip_norm {
                let s = cfg.clip_norm / norm;
                grads.iter_mut().flatten().for_each(|v| *v *= s);
            }
            let mut params: Vec<&mut [f64]> = model
                .blocks_mut()
                .into_iter()
                .zip(trainable)
                .filter(|(_, &t)| t)
                .map(|(b, _)| b)
                .collect();
            let grads: Vec<&[f64]> = grads
                .iter()
                .zip(trainable)
                .filter(|(_, &t)| t)
                .map(|(g, _)| g.as_slice())
                .collect();
            adam_step(&mut params, &grads, &mut adam, cfg.learning_rate)?;
        }
        let train_loss = loss_sum / train.len() as f64;
        let val_loss = batch_loss(model, val, objective)?;
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(phase, &record);
        history.epochs.push(record);
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                phase: phase.name().into(),
                epoch,
                history,
            });
        }
        if phase == Phase::Finetune && best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, model.clone()));
        }
    }
    if let Some((_, epoch, snapshot)) = best {
        *model = snapshot;
        history.best_epoch = Some(epoch);
    }
    Ok(history)
}

/// Unsupervised stage: minimises mean squared reconstruction error.
pub fn pretrain(model: &mut AutoencoderModel, train: &SequenceBatch, val: &SequenceBatch, cfg: &TrainConfig) -> Result<TrainHistory> {
    pretrain_with(model, train, val, cfg, &mut |_, _| {})
}

pub fn pretrain_with(
    model: &mut AutoencoderModel,
    train: &SequenceBatch,
    val: &SequenceBatch,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(Phase, &EpochRecord),
) -> Result<TrainHistory> {
    let trainable: Vec<bool> = model.block_roles().iter().map(|r| *r != BlockRole::Head).collect();
    run_phase(model, train, val, cfg, Phase::Pretrain, &trainable, on_epoch)
}

/// Supervised stage: minimises crossentropy of the head, then restores the
/// parameters from the epoch with the lowest validation loss.
pub fn finetune(model: &mut AutoencoderModel, train: &SequenceBatch, val: &SequenceBatch, cfg: &TrainConfig) -> Result<TrainHistory> {
    finetune_with(model, train, val, cfg, &mut |_, _| {})
}

pub fn finetune_with(
    model: &mut AutoencoderModel,
    train: &SequenceBatch,
    val: &SequenceBatch,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(Phase, &EpochRecord),
) -> Result<TrainHistory> {
    let trainable: Vec<bool> = model
        .block_roles()
        .iter()
        .map(|r| match cfg.fine_tune_scope {
            FineTuneScope::HeadOnly => *r == BlockRole::Head,
            FineTuneScope::WholeNetwork => *r != BlockRole::Recon,
        })
        .collect();
    run_phase(model, train, val, cfg, Phase::Finetune, &trainable, on_epoch)
}

/// Attack probability per record and the thresholded label (ties go to Attack).
pub fn predict(model: &AutoencoderModel, batch: &SequenceBatch) -> Result<(Vec<f64>, Vec<LabelClass>)> {
    let out = forward(model, batch)?;
    let scores: Vec<f64> = out.class_probs.iter().map(|p| p[LabelClass::Attack.index()]).collect();
    let labels = scores.iter().map(|&s| label_for_score(s)).collect();
    Ok((scores, labels))
}

pub fn label_for_score(score: f64) -> LabelClass {
    if score >= 0.5 {
        LabelClass::Attack
    } else {
        LabelClass::Benign
    }
}
