//! Mini-batch AdamW training with early stopping.

use alloc::vec;
use alloc::vec::Vec;

use super::model::{Mlp, MlpConfig, Mode};
use crate::error::{bail, Result};
use crate::rng::{Domain, RngStream};

/// Row-major feature matrix with labels and per-row loss weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub dim: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

impl Samples {
    pub fn new(dim: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let w = vec![1.0; y.len()];
        Self::weighted(dim, x, y, w)
    }

    pub fn weighted(dim: usize, x: Vec<f64>, y: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if dim == 0 || x.len() != dim * y.len() || w.len() != y.len() {
            bail!(Data, "{} values, {} labels, {} weights for dimension {}", x.len(), y.len(), w.len(), dim);
        }
        if x.iter().chain(&y).chain(&w).any(|v| !v.is_finite()) || w.iter().any(|v| *v < 0.0) {
            bail!(Data, "samples must be finite with non-negative weights");
        }
        Ok(Self { dim, x, y, w })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    /// Rows at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut x = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            x.extend_from_slice(self.row(i));
        }
        Self { dim: self.dim, x, y: idx.iter().map(|&i| self.y[i]).collect(), w: idx.iter().map(|&i| self.w[i]).collect() }
    }
}

/// Per-column z-scoring fitted on training data. Constant columns get unit
/// scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(values: &[f64], dim: usize) -> Self {
        let rows = values.len() / dim;
        let mut mean = vec![0.0; dim];
        let mut std = vec![0.0; dim];
        for r in 0..rows {
            for c in 0..dim {
                mean[c] += values[r * dim + c] / rows as f64;
            }
        }
        for r in 0..rows {
            for c in 0..dim {
                let d = values[r * dim + c] - mean[c];
                std[c] += d * d / rows as f64;
            }
        }
        for s in std.iter_mut() {
            *s = libm::sqrt(*s);
            if !(*s > 1e-12) {
                *s = 1.0;
            }
        }
        Self { mean, std }
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        let dim = self.mean.len();
        values.iter().enumerate().map(|(i, v)| (v - self.mean[i % dim]) / self.std[i % dim]).collect()
    }

    pub fn invert(&self, values: &[f64]) -> Vec<f64> {
        let dim = self.mean.len();
        values.iter().enumerate().map(|(i, v)| v * self.std[i % dim] + self.mean[i % dim]).collect()
    }
}

/// Patience-based stopping on a validation loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    pub wait: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::INFINITY, best_epoch: 0, wait: 0 }
    }

    /// Record the loss of `epoch` (1-based).
    pub fn observe(&mut self, epoch: usize, loss: f64) -> Verdict {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.wait = 0;
            Verdict::Improved
        } else {
            self.wait += 1;
            if self.wait >= self.patience {
                Verdict::Stop
            } else {
                Verdict::Continue
            }
        }
    }
}

/// Adam moments with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamW {
    pub fn new(n: usize, lr: f64, weight_decay: f64) -> Self {
        Self { lr, weight_decay, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= self.lr * (self.weight_decay * params[i] + mhat / (libm::sqrt(vhat) + self.eps));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub val_mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
}

/// Weighted MSE and MAE of eval-mode predictions.
pub fn evaluate_loss(model: &Mlp, data: &Samples) -> Result<(f64, f64)> {
    let pred = model.predict(&data.x, data.len())?;
    let wsum: f64 = data.w.iter().sum();
    let (mut mse, mut mae) = (0.0, 0.0);
    for i in 0..data.len() {
        let e = pred[i] - data.y[i];
        mse += data.w[i] * e * e;
        mae += data.w[i] * e.abs();
    }
    Ok((mse / wsum, mae / wsum))
}

/// Train `model` in place, restoring the weights of the best validation epoch.
///
/// A trailing mini-batch with a single row is dropped, since batch
/// statistics need two.
pub fn train(model: &mut Mlp, cfg: &MlpConfig, train: &Samples, val: &Samples) -> Result<History> {
    cfg.validate()?;
    if train.len() < 2 || val.is_empty() {
        bail!(Data, "need at least two training rows and one validation row");
    }
    if train.dim != model.input_dim() || val.dim != model.input_dim() {
        bail!(Data, "feature dimension does not match the model input");
    }
    let mut opt = AdamW::new(model.params().len(), cfg.lr, cfg.weight_decay);
    let mut stop = EarlyStopping::new(cfg.patience);
    let mut best = model.clone();
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let (mut bx, mut by, mut bw) = (Vec::new(), Vec::new(), Vec::new());
    for epoch in 1..=cfg.max_epochs {
        RngStream::new(cfg.seed, Domain::MlpShuffle, epoch as u64).shuffle(&mut order);
        let (mut total, mut seen) = (0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            if batch.len() < 2 {
                continue;
            }
            bx.clear();
            by.clear();
            bw.clear();
            for &i in batch {
                bx.extend_from_slice(train.row(i));
                by.push(train.y[i]);
                bw.push(train.w[i]);
            }
            if !(bw.iter().sum::<f64>() > 0.0) {
                continue;
            }
            let (loss, grad, stats) = model.loss_grad(&bx, &by, &bw, Mode::Train)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                bail!(Diverged, "non-finite loss {} at epoch {}", loss, epoch);
            }
            model.update_running(&stats, batch.len());
            opt.step(model.params_mut(), &grad);
            total += loss * batch.len() as f64;
            seen += batch.len() as f64;
        }
        let (val_mse, val_mae) = evaluate_loss(model, val)?;
        if !val_mse.is_finite() {
            bail!(Diverged, "non-finite validation loss at epoch {}", epoch);
        }
        epochs.push(EpochStats { epoch, train_mse: total / seen, val_mse, val_mae });
        match stop.observe(epoch, val_mse) {
            Verdict::Improved => best = model.clone(),
            Verdict::Continue => {}
            Verdict::Stop => break,
        }
    }
    *model = best;
    Ok(History { epochs, best_epoch: stop.best_epoch })
}

/// Network plus the feature and label scaling it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub mlp: Mlp,
    pub x_scale: Standardizer,
    pub y_scale: Standardizer,
}

impl Regressor {
    /// Fit scalers on `train`, then train a fresh network.
    pub fn fit(cfg: &MlpConfig, train_set: &Samples, val: &Samples) -> Result<(Self, History)> {
        let x_scale = Standardizer::fit(&train_set.x, train_set.dim);
        let y_scale = Standardizer::fit(&train_set.y, 1);
        let scale = |s: &Samples| Samples { dim: s.dim, x: x_scale.apply(&s.x), y: y_scale.apply(&s.y), w: s.w.clone() };
        let mut mlp = Mlp::new(cfg)?;
        let history = train(&mut mlp, cfg, &scale(train_set), &scale(val))?;
        Ok((Self { mlp, x_scale, y_scale }, history))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let dim = self.x_scale.mean.len();
        if x.len() % dim != 0 {
            bail!(Data, "{} values do not form rows of {}", x.len(), dim);
        }
        let z = self.mlp.predict(&self.x_scale.apply(x), x.len() / dim)?;
        Ok(self.y_scale.invert(&z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_protocol() {
        let mut s = EarlyStopping::new(25);
        assert_eq!(s.observe(1, 1.0), Verdict::Improved);
        let mut stopped = None;
        for epoch in 2..=300 {
            if s.observe(epoch, 1.0 + epoch as f64) == Verdict::Stop {
                stopped = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped, Some(26));
        assert_eq!(s.best_epoch, 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut opt = AdamW::new(2, 0.1, 0.0);
        let mut p = [1.0, -1.0];
        opt.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] + 0.9).abs() < 1e-6);
        let mut decayed = AdamW::new(1, 0.1, 0.5);
        let mut q = [2.0];
        decayed.step(&mut q, &[0.0]);
        assert!((q[0] - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn standardizer_roundtrip() {
        let s = Standardizer::fit(&[1.0, 5.0, 3.0, 5.0], 2);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        let z = s.apply(&[4.0, 7.0]);
        assert_eq!(z, vec![2.0, 2.0]);
        assert_eq!(s.invert(&z), vec![4.0, 7.0]);
    }
}
