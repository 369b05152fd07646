//! Adam with linear warmup/decay, and the mini-batch loop shared by the
//! gradient-trained backends.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AgentConfig, EpochReport, TrainingReport};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Learning rate at 1-based `step`: linear ramp over the warmup steps, then
/// linear decay to zero at `total`.
pub fn scheduled_rate(base: f64, step: usize, total: usize, warmup_ratio: f64) -> f64 {
    let warmup = ((total as f64) * warmup_ratio).ceil().max(1.0) as usize;
    if step <= warmup {
        base * step as f64 / warmup as f64
    } else {
        base * (total.saturating_sub(step)) as f64 / (total - warmup).max(1) as f64
    }
}

pub struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: OptimizerConfig, n: usize) -> Self {
        let OptimizerConfig::Adam { beta1, beta2, epsilon } = cfg;
        Self { beta1, beta2, epsilon, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + self.epsilon);
        }
    }
}

/// A model with a flat parameter vector and a two-class softmax output.
pub trait Differentiable {
    type Input;

    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn probs(&self, input: &Self::Input) -> [f64; 2];
    /// Adds d(loss)/d(params) into `grad` and returns the cross-entropy loss.
    fn accumulate(&self, input: &Self::Input, label: usize, grad: &mut [f64]) -> f64;
}

pub fn cross_entropy(p: [f64; 2], label: usize) -> f64 {
    -(p[label].max(1e-300)).ln()
}

pub fn softmax2(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e = [(z[0] - m).exp(), (z[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

pub fn argmax2(p: [f64; 2]) -> usize {
    usize::from(p[1] > p[0])
}

fn mean_loss<M: Differentiable>(model: &M, data: &[(M::Input, usize)]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.iter().map(|(x, y)| cross_entropy(model.probs(x), *y)).sum::<f64>() / data.len() as f64
}

pub fn accuracy<M: Differentiable>(model: &M, data: &[(M::Input, usize)]) -> Option<f64> {
    if data.is_empty() {
        return None;
    }
    let hits = data.iter().filter(|(x, y)| argmax2(model.probs(x)) == *y).count();
    Some(hits as f64 / data.len() as f64)
}

/// Mini-batch training with a seeded shuffle per epoch.
pub fn fit<M: Differentiable>(
    model: &mut M,
    train: &[(M::Input, usize)],
    held_out: &[(M::Input, usize)],
    cfg: &AgentConfig,
) -> Result<TrainingReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005e_ed0f_7a1e);
    let batches_per_epoch = train.len().div_ceil(cfg.batch_size);
    let total_steps = batches_per_epoch * cfg.epochs;
    let mut adam = Adam::new(cfg.optimizer, model.params().len());
    let mut grad = vec![0.0; model.params().len()];
    let initial_loss = mean_loss(model, train);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            step += 1;
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                let (x, y) = &train[i];
                batch_loss += model.accumulate(x, *y, &mut grad);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { step, loss: batch_loss });
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            let lr = scheduled_rate(cfg.learning_rate, step, total_steps, cfg.warmup_ratio);
            adam.step(model.params_mut(), &grad, lr);
            if model.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged { step, loss: f64::NAN });
            }
            epoch_loss += batch_loss;
        }
        epochs.push(EpochReport {
            epoch: epoch + 1,
            mean_loss: epoch_loss / train.len() as f64,
            held_out_accuracy: accuracy(model, held_out),
        });
    }
    Ok(TrainingReport {
        train_size: train.len(),
        held_out_size: held_out.len(),
        steps: total_steps,
        initial_loss,
        final_loss: mean_loss(model, train),
        epochs,
    })
}
