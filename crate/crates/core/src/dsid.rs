//! Symptom-class identifier: a fully connected ReLU network with a softmax
//! output, trained by mini-batch Adam on categorical cross-entropy.
//!
//! The same engine also drives a multi-head variant (several softmax groups
//! over one shared trunk), used internally as the per-attribute baseline.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::rng::SeededRng;
use crate::{Error, Result};

/// Probabilities are clamped to at least this value before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    dims: Vec<usize>,
    /// `weights[l]` is `dims[l + 1] × dims[l]`, row-major.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpJson {
    pub dims: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "a network needs at least an input and an output size, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidParameter(format!(
            "layer sizes must be positive, got {dims:?}"
        )));
    }
    Ok(())
}

/// Glorot-uniform weights, zero biases.
pub fn init_model(dims: &[usize], seed: u64) -> Result<MlpModel> {
    check_dims(dims)?;
    let mut rng = SeededRng::new(seed);
    let mut weights = Vec::with_capacity(dims.len() - 1);
    let mut biases = Vec::with_capacity(dims.len() - 1);
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        weights.push(
            (0..fan_in * fan_out)
                .map(|_| rng.uniform_range(-limit, limit))
                .collect(),
        );
        biases.push(vec![0.0; fan_out]);
    }
    Ok(MlpModel {
        dims: dims.to_vec(),
        weights,
        biases,
    })
}

impl MlpModel {
    /// Builds a model from explicit parameters; `weights[l]` is given as rows.
    pub fn from_parts(dims: Vec<usize>, weights: Vec<Vec<Vec<f64>>>, biases: Vec<Vec<f64>>) -> Result<Self> {
        check_dims(&dims)?;
        let layers = dims.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::DimensionMismatch {
                expected: layers,
                got: weights.len().min(biases.len()),
            });
        }
        let mut flat = Vec::with_capacity(layers);
        for l in 0..layers {
            let (n_in, n_out) = (dims[l], dims[l + 1]);
            if weights[l].len() != n_out || biases[l].len() != n_out {
                return Err(Error::DimensionMismatch {
                    expected: n_out,
                    got: weights[l].len(),
                });
            }
            let mut w = Vec::with_capacity(n_in * n_out);
            for row in &weights[l] {
                if row.len() != n_in {
                    return Err(Error::DimensionMismatch {
                        expected: n_in,
                        got: row.len(),
                    });
                }
                w.extend_from_slice(row);
            }
            flat.push(w);
        }
        if flat.iter().chain(&biases).flatten().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite network parameter".into()));
        }
        Ok(Self {
            dims,
            weights: flat,
            biases,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("dims checked non-empty")
    }

    /// `(rows, cols)` of every weight matrix.
    pub fn weight_shapes(&self) -> Vec<(usize, usize)> {
        self.dims.windows(2).map(|w| (w[1], w[0])).collect()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// All parameters, layer by layer: weights (row-major) then biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: params.len(),
            });
        }
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&params[at..at + nw]);
            at += nw;
            b.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    pub fn to_json(&self) -> MlpJson {
        MlpJson {
            dims: self.dims.clone(),
            weights: self
                .weights
                .iter()
                .zip(self.dims.windows(2))
                .map(|(w, d)| w.chunks(d[0]).map(<[f64]>::to_vec).collect())
                .collect(),
            biases: self.biases.clone(),
        }
    }

    pub fn from_json(json: &MlpJson) -> Result<Self> {
        Self::from_parts(json.dims.clone(), json.weights.clone(), json.biases.clone())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&serde_json::from_str(&text)?)
    }
}

/// Scratch buffers for one forward/backward pass.
struct Workspace {
    /// Post-activation values per layer; `acts[0]` is the input.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(dims: &[usize]) -> Self {
        Self {
            acts: dims.iter().map(|&d| vec![0.0; d]).collect(),
            deltas: dims[1..].iter().map(|&d| vec![0.0; d]).collect(),
        }
    }
}

/// Softmax in place over each consecutive group of `heads` sizes.
fn grouped_softmax(z: &mut [f64], heads: &[usize]) {
    let mut at = 0;
    for &h in heads {
        let g = &mut z[at..at + h];
        let m = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in g.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        g.iter_mut().for_each(|v| *v /= s);
        at += h;
    }
}

fn forward_into(model: &MlpModel, heads: &[usize], x: &[f64], ws: &mut Workspace) {
    ws.acts[0].copy_from_slice(x);
    let last = model.n_layers() - 1;
    for l in 0..model.n_layers() {
        let n_in = model.dims[l];
        let (lo, hi) = ws.acts.split_at_mut(l + 1);
        let input = &lo[l];
        let out = &mut hi[0];
        let w = &model.weights[l];
        for (j, o) in out.iter_mut().enumerate() {
            let row = &w[j * n_in..(j + 1) * n_in];
            let z = model.biases[l][j] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
            *o = if l < last { z.max(0.0) } else { z };
        }
        if l == last {
            grouped_softmax(out, heads);
        }
    }
}

fn check_input(model: &MlpModel, x: &[f64]) -> Result<()> {
    if x.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Class probabilities for one input row.
pub fn forward(model: &MlpModel, x: &[f64]) -> Result<Vec<f64>> {
    check_input(model, x)?;
    let mut ws = Workspace::new(&model.dims);
    forward_into(model, &[model.output_dim()], x, &mut ws);
    Ok(ws.acts.pop().expect("output layer"))
}

/// Mean cross-entropy of predicted rows against class indices.
pub fn loss(batch_probs: &[Vec<f64>], batch_labels: &[usize]) -> Result<f64> {
    if batch_probs.len() != batch_labels.len() {
        return Err(Error::DimensionMismatch {
            expected: batch_probs.len(),
            got: batch_labels.len(),
        });
    }
    if batch_probs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    for (p, &y) in batch_probs.iter().zip(batch_labels) {
        let py = *p
            .get(y)
            .ok_or_else(|| Error::InvalidParameter(format!("label {y} out of range")))?;
        total -= py.clamp(PROB_FLOOR, 1.0).ln();
    }
    Ok(total / batch_probs.len() as f64)
}

/// Argmax of the output (lowest index on ties) and its probability.
pub fn predict_class(model: &MlpModel, x: &[f64]) -> Result<(usize, f64)> {
    Ok(argmax(&forward(model, x)?))
}

fn argmax(p: &[f64]) -> (usize, f64) {
    let mut best = (0, p[0]);
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Loss and gradient accumulation for one sample; returns the sample loss.
fn backward_into(
    model: &MlpModel,
    heads: &[usize],
    labels: &[usize],
    ws: &mut Workspace,
    gw: &mut [Vec<f64>],
    gb: &mut [Vec<f64>],
) -> f64 {
    let l_out = model.n_layers() - 1;
    let mut sample_loss = 0.0;
    {
        let probs = &ws.acts[l_out + 1];
        let delta = &mut ws.deltas[l_out];
        delta.copy_from_slice(probs);
        let mut at = 0;
        for (&h, &y) in heads.iter().zip(labels) {
            sample_loss -= probs[at + y].clamp(PROB_FLOOR, 1.0).ln();
            delta[at + y] -= 1.0;
            at += h;
        }
    }
    for l in (0..=l_out).rev() {
        let n_in = model.dims[l];
        let input = &ws.acts[l];
        let delta = &ws.deltas[l];
        for (j, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb[l][j] += d;
            for (g, a) in gw[l][j * n_in..(j + 1) * n_in].iter_mut().zip(input) {
                *g += d * a;
            }
        }
        if l > 0 {
            let (lo, hi) = ws.deltas.split_at_mut(l);
            let prev = &mut lo[l - 1];
            let delta = &hi[0];
            prev.iter_mut().for_each(|p| *p = 0.0);
            let w = &model.weights[l];
            for (j, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (p, wv) in prev.iter_mut().zip(&w[j * n_in..(j + 1) * n_in]) {
                    *p += d * wv;
                }
            }
            // ReLU derivative, taken as 0 at the kink
            for (p, &a) in prev.iter_mut().zip(&ws.acts[l]) {
                if a <= 0.0 {
                    *p = 0.0;
                }
            }
        }
    }
    sample_loss
}

/// Parameter gradient in the same layout as the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(model: &MlpModel) -> Self {
        Self {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Same ordering as [`MlpModel::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

fn batch_grad(
    model: &MlpModel,
    heads: &[usize],
    xs: &[&[f64]],
    ys: &[&[usize]],
    ws: &mut Workspace,
    grads: &mut Gradients,
) -> f64 {
    grads
        .weights
        .iter_mut()
        .chain(&mut grads.biases)
        .for_each(|g| g.iter_mut().for_each(|v| *v = 0.0));
    let mut total = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        forward_into(model, heads, x, ws);
        total += backward_into(model, heads, y, ws, &mut grads.weights, &mut grads.biases);
    }
    let scale = 1.0 / xs.len() as f64;
    grads
        .weights
        .iter_mut()
        .chain(&mut grads.biases)
        .for_each(|g| g.iter_mut().for_each(|v| *v *= scale));
    total * scale
}

/// Mean cross-entropy over the rows and its analytic gradient.
pub fn loss_and_gradient(model: &MlpModel, xs: &[Vec<f64>], labels: &[usize]) -> Result<(f64, Gradients)> {
    if xs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: labels.len(),
        });
    }
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    for x in xs {
        check_input(model, x)?;
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= model.output_dim()) {
        return Err(Error::InvalidParameter(format!("label {y} out of range")));
    }
    let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let yr: Vec<&[usize]> = labels.iter().map(std::slice::from_ref).collect();
    let mut grads = Gradients::zeros(model);
    let mut ws = Workspace::new(&model.dims);
    let l = batch_grad(model, &[model.output_dim()], &xr, &yr, &mut ws, &mut grads);
    Ok((l, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Stop once this many consecutive epochs fail to improve the validation
    /// loss; `None` disables early stopping.
    pub early_stop_patience: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 16,
            batch_size: 50,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            early_stop_patience: Some(3),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0 && self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            return bad("Adam betas must lie in (0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        if self.early_stop_patience == Some(0) {
            return bad("early_stop_patience must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_acc: Vec<f64>,
    /// Last epoch run (1-based).
    pub stopped_epoch: usize,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
    pub early_stopped: bool,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_acc\n");
        for e in 0..self.train_loss.len() {
            out.push_str(&format!(
                "{},{:?},{:?},{:?}\n",
                e + 1,
                self.train_loss[e],
                self.val_loss[e],
                self.val_acc[e]
            ));
        }
        out
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.adam_beta1.powi(self.t);
        let c2 = 1.0 - cfg.adam_beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = cfg.adam_beta1 * self.m[i] + (1.0 - cfg.adam_beta1) * grad[i];
            self.v[i] = cfg.adam_beta2 * self.v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.adam_eps);
        }
    }
}

/// Applies an update stored flat to the model's layered parameters.
fn adam_update(model: &mut MlpModel, grads: &Gradients, opt: &mut [Adam], cfg: &TrainConfig) {
    let layers = model.n_layers();
    for l in 0..layers {
        opt[2 * l].step(&mut model.weights[l], &grads.weights[l], cfg);
        opt[2 * l + 1].step(&mut model.biases[l], &grads.biases[l], cfg);
    }
}

/// Mean loss and per-head averaged accuracy of a multi-head model.
fn evaluate(model: &MlpModel, heads: &[usize], x: &FeatureMatrix, y: &[usize]) -> (f64, f64) {
    let nh = heads.len();
    let mut ws = Workspace::new(&model.dims);
    let mut total = 0.0;
    let mut correct = vec![0usize; nh];
    for i in 0..x.n_rows() {
        forward_into(model, heads, x.row(i), &mut ws);
        let probs = &ws.acts[model.n_layers()];
        let mut at = 0;
        for (h, &size) in heads.iter().enumerate() {
            let label = y[i * nh + h];
            total -= probs[at + label].clamp(PROB_FLOOR, 1.0).ln();
            if argmax(&probs[at..at + size]).0 == label {
                correct[h] += 1;
            }
            at += size;
        }
    }
    let n = x.n_rows() as f64;
    let acc = correct.iter().map(|&c| c as f64 / n).sum::<f64>() / nh as f64;
    (total / n, acc)
}

fn check_labels(model: &MlpModel, heads: &[usize], x: &FeatureMatrix, y: &[usize]) -> Result<()> {
    if x.n_cols() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: x.n_cols(),
        });
    }
    if y.len() != x.n_rows() * heads.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows() * heads.len(),
            got: y.len(),
        });
    }
    for (i, &label) in y.iter().enumerate() {
        if label >= heads[i % heads.len()] {
            return Err(Error::InvalidParameter(format!("label {label} out of range")));
        }
    }
    Ok(())
}

/// Training loop shared by the single- and multi-head models. `y` holds
/// `heads.len()` labels per row.
fn train_heads(
    model: &MlpModel,
    heads: &[usize],
    train_x: &FeatureMatrix,
    train_y: &[usize],
    val_x: &FeatureMatrix,
    val_y: &[usize],
    config: &TrainConfig,
) -> Result<(MlpModel, TrainHistory)> {
    config.validate()?;
    if train_x.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    check_labels(model, heads, train_x, train_y)?;
    if val_x.n_rows() > 0 {
        check_labels(model, heads, val_x, val_y)?;
    }
    let nh = heads.len();
    let mut model = model.clone();
    let mut opt: Vec<Adam> = model
        .weights
        .iter()
        .zip(&model.biases)
        .flat_map(|(w, b)| [w.len(), b.len()])
        .map(|n| Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        })
        .collect();
    let mut ws = Workspace::new(&model.dims);
    let mut grads = Gradients::zeros(&model);
    let mut rng = SeededRng::new(config.seed);
    let mut order: Vec<usize> = (0..train_x.n_rows()).collect();

    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        val_acc: Vec::new(),
        stopped_epoch: 0,
        best_epoch: 0,
        early_stopped: false,
    };
    let mut best: Option<(f64, MlpModel)> = None;
    let mut stale = 0;
    for epoch in 1..=config.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| train_x.row(i)).collect();
            let ys: Vec<&[usize]> = batch.iter().map(|&i| &train_y[i * nh..(i + 1) * nh]).collect();
            let l = batch_grad(&model, heads, &xs, &ys, &mut ws, &mut grads);
            epoch_loss += l * batch.len() as f64;
            adam_update(&mut model, &grads, &mut opt, config);
        }
        if model.flat_params().iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("parameters diverged in epoch {epoch}")));
        }
        let train_loss = epoch_loss / train_x.n_rows() as f64;
        // without a validation set, training loss drives early stopping
        let (val_loss, val_acc) = if val_x.n_rows() > 0 {
            evaluate(&model, heads, val_x, val_y)
        } else {
            (f64::NAN, f64::NAN)
        };
        let monitored = if val_x.n_rows() > 0 { val_loss } else { train_loss };
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.val_acc.push(val_acc);
        history.stopped_epoch = epoch;
        if best.as_ref().is_none_or(|(b, _)| monitored < *b) {
            best = Some((monitored, model.clone()));
            history.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        if config.early_stop_patience.is_some_and(|p| stale >= p) {
            history.early_stopped = true;
            model = best.take().expect("set in first epoch").1;
            break;
        }
    }
    if !history.early_stopped {
        history.best_epoch = history.stopped_epoch;
    }
    Ok((model, history))
}

/// Trains on `train_labels` (class indices), monitoring the validation split.
pub fn train(
    model: &MlpModel,
    train_data: &FeatureMatrix,
    train_labels: &[usize],
    val_data: &FeatureMatrix,
    val_labels: &[usize],
    config: &TrainConfig,
) -> Result<(MlpModel, TrainHistory)> {
    train_heads(
        model,
        &[model.output_dim()],
        train_data,
        train_labels,
        val_data,
        val_labels,
        config,
    )
}

/// Fraction of rows whose predicted class equals the label.
pub fn accuracy(model: &MlpModel, data: &FeatureMatrix, labels: &[usize]) -> Result<f64> {
    if data.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    check_labels(model, &[model.output_dim()], data, labels)?;
    Ok(evaluate(model, &[model.output_dim()], data, labels).1)
}

/// One shared trunk with one softmax head per attribute. Each head is scored
/// on its own attribute and the accuracies are averaged.
#[derive(Debug, Clone)]
pub(crate) struct MultiHead {
    pub model: MlpModel,
    pub heads: Vec<usize>,
}

impl MultiHead {
    pub fn init(input: usize, hidden: &[usize], heads: &[usize], seed: u64) -> Result<Self> {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(heads.iter().sum());
        Ok(Self {
            model: init_model(&dims, seed)?,
            heads: heads.to_vec(),
        })
    }

    /// `y` holds one label per head per row.
    pub fn train(
        &self,
        x: &FeatureMatrix,
        y: &[usize],
        vx: &FeatureMatrix,
        vy: &[usize],
        config: &TrainConfig,
    ) -> Result<(Self, TrainHistory)> {
        let (model, history) = train_heads(&self.model, &self.heads, x, y, vx, vy, config)?;
        Ok((
            Self {
                model,
                heads: self.heads.clone(),
            },
            history,
        ))
    }

    pub fn accuracy(&self, x: &FeatureMatrix, y: &[usize]) -> Result<f64> {
        if x.n_rows() == 0 {
            return Err(Error::EmptyInput);
        }
        check_labels(&self.model, &self.heads, x, y)?;
        Ok(evaluate(&self.model, &self.heads, x, y).1)
    }
}
