//! Minibatch training with softmax cross-entropy.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::autodiff::Tape;
use crate::cells::{time_major, Gate, Model, ModelParams, ModelSpec, ScoreModel};
use crate::data::{Dataset, Splits};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(Error::validation(format!("unknown optimizer {s:?}"))),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a training-loss improvement of at least `min_delta`
    /// before stopping.
    pub patience: usize,
    pub min_delta: f64,
    /// Global gradient-norm clipping threshold; off by default.
    pub clip: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            min_delta: 1e-4,
            clip: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch size must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::validation("max epochs must be at least 1"));
        }
        if self.patience == 0 {
            return Err(Error::validation("patience must be at least 1"));
        }
        if !(self.min_delta >= 0.0) {
            return Err(Error::validation("min delta must be nonnegative"));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(Error::validation("clip threshold must be positive"));
            }
        }
        Ok(())
    }
}

/// Gradient-descent state for one parameter set.
#[derive(Clone, Debug)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        step: i32,
        m: Vec<Tensor>,
        v: Vec<Tensor>,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, params: &ModelParams) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => {
                let zeros: Vec<Tensor> = params.tensors().iter().map(|t| Tensor::zeros(t.rows(), t.cols())).collect();
                Optimizer::Adam {
                    lr,
                    beta1: 0.9,
                    beta2: 0.999,
                    eps: 1e-8,
                    step: 0,
                    m: zeros.clone(),
                    v: zeros,
                }
            }
        }
    }

    /// Applies one update; `grads` follows [`ModelParams::tensors`] order.
    pub fn step(&mut self, params: &mut ModelParams, grads: &[Tensor]) {
        let tensors = params.tensors_mut();
        assert_eq!(tensors.len(), grads.len(), "one gradient per parameter tensor");
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in tensors.into_iter().zip(grads) {
                    for (w, &d) in p.data_mut().iter_mut().zip(g.data()) {
                        *w -= *lr * d;
                    }
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
                step,
                m,
                v,
            } => {
                *step += 1;
                let c1 = 1.0 - beta1.powi(*step);
                let c2 = 1.0 - beta2.powi(*step);
                for (k, (p, g)) in tensors.into_iter().zip(grads).enumerate() {
                    let (mk, vk) = (m[k].data_mut(), v[k].data_mut());
                    for (j, (w, &d)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                        mk[j] = *beta1 * mk[j] + (1.0 - *beta1) * d;
                        vk[j] = *beta2 * vk[j] + (1.0 - *beta2) * d * d;
                        let m_hat = mk[j] / c1;
                        let v_hat = vk[j] / c2;
                        *w -= *lr * m_hat / (v_hat.sqrt() + *eps);
                    }
                }
            }
        }
    }
}

/// Uniform `[−1/√h, 1/√h]` for every tensor, then forget-gate bias `+1`.
pub fn init_params(spec: &ModelSpec, seed: u64) -> Result<ModelParams> {
    spec.validate()?;
    let bound = 1.0 / (spec.hidden as f64).sqrt();
    let mut r = rng::stream(seed, rng::INIT_STREAM);
    let mut params = spec.zero_params();
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v = r.gen_range(-bound..=bound);
        }
    }
    params.cell.lstm_mut().b[Gate::Forget as usize] = Tensor::full(1, spec.hidden, 1.0);
    Ok(params)
}

/// Mean cross-entropy of one batch and its gradient for every parameter.
pub fn batch_gradients(model: &Model, xs: &[&Tensor], labels: &[usize]) -> Result<(f64, Vec<Tensor>)> {
    let tape = Tape::new();
    let bound = model.params.bind(&tape, true)?;
    let x = tape.constant(time_major(xs)?)?;
    let scores = model.forward(&bound, x, xs.len())?.scores;
    let loss = tape.cross_entropy(scores, labels)?;
    let value = loss.value().data()[0];
    let grads = tape.backward(loss)?;
    Ok((value, bound.vars().into_iter().map(|v| grads.wrt(v)).collect()))
}

/// Index of the largest score; the first one wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Predicted class of every sample.
pub fn predictions(model: &impl ScoreModel, data: &[&Tensor]) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(data.len());
    for chunk in data.chunks(100) {
        let tape = Tape::new();
        let x = tape.constant(time_major(chunk)?)?;
        let s = model.scores(x, chunk.len())?;
        let s = s.value();
        out.extend(s.data().chunks(s.cols()).map(argmax));
    }
    Ok(out)
}

pub fn accuracy(model: &impl ScoreModel, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::validation("cannot measure accuracy on an empty dataset"));
    }
    let pred = predictions(model, &data.inputs())?;
    let hits = pred.iter().zip(&data.samples).filter(|(p, s)| **p == s.label).count();
    Ok(hits as f64 / data.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainResult {
    /// Parameters from the epoch with the best test accuracy; the latest such
    /// epoch wins ties.
    pub model: Model,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub test_accuracy: f64,
    pub history: Vec<EpochRecord>,
}

impl TrainResult {
    /// Training log as CSV with columns `epoch,train_loss,test_acc`.
    pub fn write_log(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "epoch,train_loss,test_acc")?;
        for r in &self.history {
            writeln!(w, "{},{:.9e},{:.6}", r.epoch, r.train_loss, r.test_accuracy)?;
        }
        Ok(())
    }
}

pub fn train(spec: ModelSpec, data: &Splits, config: &TrainConfig) -> Result<TrainResult> {
    train_with(spec, data, config, |_| {})
}

/// Trains from [`init_params`], calling `on_epoch` after every epoch.
pub fn train_with(
    spec: ModelSpec,
    data: &Splits,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainResult> {
    config.validate()?;
    spec.validate()?;
    for d in [&data.train, &data.test] {
        if d.features != spec.features {
            return Err(Error::validation(format!(
                "model expects {} features, dataset has {}",
                spec.features, d.features
            )));
        }
        if d.classes != spec.classes {
            return Err(Error::validation(format!(
                "model has {} classes, dataset has {}",
                spec.classes, d.classes
            )));
        }
        if d.is_empty() {
            return Err(Error::validation("training and test splits must be non-empty"));
        }
    }
    let mut model = Model::new(spec, init_params(&spec, config.seed)?)?;
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, &model.params);
    let mut shuffle = rng::stream(config.seed, rng::SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    let mut history = Vec::new();
    let mut best: Option<(usize, f64, ModelParams)> = None;
    let mut best_loss = f64::INFINITY;
    let mut stale = 0;
    let diverged = |epoch: usize| Error::Divergence {
        last_finite_epoch: epoch.saturating_sub(1),
    };

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xs: Vec<&Tensor> = batch.iter().map(|&i| &data.train.samples[i].x).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| data.train.samples[i].label).collect();
            let (loss, mut grads) = match batch_gradients(&model, &xs, &labels) {
                Ok(v) => v,
                Err(Error::NonFinite { .. }) => return Err(diverged(epoch)),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(diverged(epoch));
            }
            if let Some(c) = config.clip {
                clip_global_norm(&mut grads, c);
            }
            opt.step(&mut model.params, &grads);
            total += loss * batch.len() as f64;
        }
        let train_loss = total / data.train.len() as f64;
        if !train_loss.is_finite() || model.params.tensors().iter().any(|t| !t.is_finite()) {
            return Err(diverged(epoch));
        }
        let test_accuracy = match accuracy(&model, &data.test) {
            Ok(a) => a,
            Err(Error::NonFinite { .. }) => return Err(diverged(epoch)),
            Err(e) => return Err(e),
        };
        let record = EpochRecord {
            epoch,
            train_loss,
            test_accuracy,
        };
        on_epoch(&record);
        history.push(record);
        if best.as_ref().is_none_or(|b| test_accuracy >= b.1) {
            best = Some((epoch, test_accuracy, model.params.clone()));
        }
        if train_loss < best_loss - config.min_delta {
            best_loss = train_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    let (best_epoch, test_accuracy, params) = best.expect("at least one epoch runs");
    Ok(TrainResult {
        model: Model::new(spec, params)?,
        epochs_run: history.len(),
        best_epoch,
        test_accuracy,
        history,
    })
}

fn clip_global_norm(grads: &mut [Tensor], max: f64) {
    let norm = grads.iter().flat_map(|g| g.data()).map(|v| v * v).sum::<f64>().sqrt();
    if norm > max {
        let k = max / norm;
        for g in grads {
            g.data_mut().iter_mut().for_each(|v| *v *= k);
        }
    }
}
