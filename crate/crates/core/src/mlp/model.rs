//! Network definition, forward pass, and backpropagation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::rng::{Domain, RngStream};

/// Architecture and training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpConfig {
    pub input_dim: usize,
    /// Width of the first hidden layer; each following layer halves it down to
    /// 8. Zero gives a plain linear model.
    pub first_hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub init_std: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            first_hidden: 64,
            lr: 1e-3,
            weight_decay: 1e-4,
            batch_size: 32,
            max_epochs: 300,
            patience: 25,
            init_std: 0.01,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            bail!(Config, "input dimension must be positive");
        }
        let n = self.first_hidden;
        if n != 0 && (n < 8 || n % 8 != 0 || !(n / 8).is_power_of_two()) {
            bail!(Config, "first hidden width {} does not halve down to 8", n);
        }
        let positive = [self.lr, self.init_std, self.bn_eps];
        if positive.iter().any(|v| !(*v > 0.0)) || !(self.weight_decay >= 0.0) {
            bail!(Config, "learning rate, init scale, and epsilon must be positive");
        }
        if !(0.0..=1.0).contains(&self.bn_momentum) {
            bail!(Config, "batch-norm momentum must lie in [0, 1]");
        }
        if self.batch_size < 2 || self.max_epochs == 0 || self.patience == 0 {
            bail!(Config, "batch size must be at least 2 and epochs/patience positive");
        }
        Ok(())
    }

    /// Layer widths from input to the single output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        let mut n = self.first_hidden;
        while n >= 8 {
            w.push(n);
            n /= 2;
        }
        w.push(1);
        w
    }
}

/// Whether batch normalization uses the batch's own statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Offsets of one hidden layer's parameters in the flat vector.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Hidden {
    fan_in: usize,
    width: usize,
    w: usize,
    b: usize,
    gamma: usize,
    beta: usize,
}

/// Batch statistics of every hidden layer, `(mean, biased variance)`.
pub type BatchStats = Vec<(Vec<f64>, Vec<f64>)>;

/// Fully connected regressor: each hidden layer is linear, then ReLU, then
/// batch normalization; a final linear layer has one output.
///
/// Parameters live in one flat vector laid out per hidden layer as weights
/// (row-major, one row per unit), biases, BN scales, BN shifts, followed by
/// the output weights and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    hidden: Vec<Hidden>,
    out_w: usize,
    out_b: usize,
    params: Vec<f64>,
    running_mean: Vec<Vec<f64>>,
    running_var: Vec<Vec<f64>>,
    bn_momentum: f64,
    bn_eps: f64,
}

struct Cache {
    /// Input to every layer, the last entry feeding the output layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of every hidden layer.
    z: Vec<Vec<f64>>,
    xhat: Vec<Vec<f64>>,
    inv_std: Vec<Vec<f64>>,
    stats: BatchStats,
}

impl Mlp {
    /// Normal weights, zero biases, unit BN scales.
    pub fn new(cfg: &MlpConfig) -> Result<Self> {
        cfg.validate()?;
        let mut m = Self::with_widths(&cfg.widths(), cfg.bn_momentum, cfg.bn_eps)?;
        let mut rng = RngStream::new(cfg.seed, Domain::MlpInit, 0);
        let mut slots: Vec<usize> = Vec::new();
        for h in &m.hidden {
            slots.extend(h.w..h.w + h.width * h.fan_in);
        }
        slots.extend(m.out_w..m.out_b);
        for i in slots {
            m.params[i] = cfg.init_std * rng.normal();
        }
        Ok(m)
    }

    /// Arbitrary architecture with all weights zero and BN scales one.
    pub fn with_widths(widths: &[usize], bn_momentum: f64, bn_eps: f64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) || widths[widths.len() - 1] != 1 {
            bail!(Config, "widths must be positive and end in a single output");
        }
        let mut hidden = Vec::new();
        let mut at = 0;
        for pair in widths[..widths.len() - 1].windows(2) {
            let (fan_in, width) = (pair[0], pair[1]);
            let w = at;
            let b = w + fan_in * width;
            let gamma = b + width;
            let beta = gamma + width;
            at = beta + width;
            hidden.push(Hidden { fan_in, width, w, b, gamma, beta });
        }
        let out_w = at;
        let out_b = out_w + widths[widths.len() - 2];
        let mut params = vec![0.0; out_b + 1];
        for h in &hidden {
            params[h.gamma..h.gamma + h.width].fill(1.0);
        }
        Ok(Self {
            widths: widths.to_vec(),
            running_mean: hidden.iter().map(|h| vec![0.0; h.width]).collect(),
            running_var: hidden.iter().map(|h| vec![1.0; h.width]).collect(),
            hidden,
            out_w,
            out_b,
            params,
            bn_momentum,
            bn_eps,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn running_stats(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.running_mean, &self.running_var)
    }

    pub fn set_running_stats(&mut self, mean: Vec<Vec<f64>>, var: Vec<Vec<f64>>) -> Result<()> {
        let shape_ok = |s: &[Vec<f64>]| s.len() == self.hidden.len() && s.iter().zip(&self.hidden).all(|(v, h)| v.len() == h.width);
        if !shape_ok(&mean) || !shape_ok(&var) {
            bail!(Data, "running statistics do not match the architecture");
        }
        self.running_mean = mean;
        self.running_var = var;
        Ok(())
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            bail!(Data, "expected {} parameters, got {}", self.params.len(), params.len());
        }
        self.params = params;
        Ok(())
    }

    /// Index of hidden-layer unit `unit`'s bias in the flat vector.
    pub fn bias_index(&self, layer: usize, unit: usize) -> usize {
        self.hidden[layer].b + unit
    }

    pub fn num_hidden(&self) -> usize {
        self.hidden.len()
    }

    fn check(&self, x: &[f64], rows: usize, mode: Mode) -> Result<()> {
        if rows == 0 || x.len() != rows * self.input_dim() {
            bail!(Data, "expected {} rows of {} features, got {} values", rows, self.input_dim(), x.len());
        }
        if mode == Mode::Train && rows < 2 && !self.hidden.is_empty() {
            bail!(Usage, "batch statistics need at least two rows");
        }
        Ok(())
    }

    fn run(&self, x: &[f64], rows: usize, mode: Mode) -> (Vec<f64>, Cache) {
        let p = &self.params;
        let mut cache = Cache { inputs: vec![x.to_vec()], z: Vec::new(), xhat: Vec::new(), inv_std: Vec::new(), stats: Vec::new() };
        for (l, h) in self.hidden.iter().enumerate() {
            let a = &cache.inputs[l];
            let mut z = vec![0.0; rows * h.width];
            for r in 0..rows {
                let row = &a[r * h.fan_in..(r + 1) * h.fan_in];
                for u in 0..h.width {
                    let w = &p[h.w + u * h.fan_in..h.w + (u + 1) * h.fan_in];
                    z[r * h.width + u] = p[h.b + u] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            let act: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
            let (mean, var) = match mode {
                Mode::Train => {
                    let mut mean = vec![0.0; h.width];
                    let mut var = vec![0.0; h.width];
                    for r in 0..rows {
                        for u in 0..h.width {
                            mean[u] += act[r * h.width + u];
                        }
                    }
                    mean.iter_mut().for_each(|m| *m /= rows as f64);
                    for r in 0..rows {
                        for u in 0..h.width {
                            let d = act[r * h.width + u] - mean[u];
                            var[u] += d * d;
                        }
                    }
                    var.iter_mut().for_each(|v| *v /= rows as f64);
                    (mean, var)
                }
                Mode::Eval => (self.running_mean[l].clone(), self.running_var[l].clone()),
            };
            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / libm::sqrt(v + self.bn_eps)).collect();
            let mut xhat = vec![0.0; rows * h.width];
            let mut out = vec![0.0; rows * h.width];
            for r in 0..rows {
                for u in 0..h.width {
                    let k = r * h.width + u;
                    xhat[k] = (act[k] - mean[u]) * inv_std[u];
                    out[k] = p[h.gamma + u] * xhat[k] + p[h.beta + u];
                }
            }
            cache.z.push(z);
            cache.xhat.push(xhat);
            cache.inv_std.push(inv_std);
            cache.stats.push((mean, var));
            cache.inputs.push(out);
        }
        let last = &cache.inputs[self.hidden.len()];
        let fan_in = self.widths[self.widths.len() - 2];
        let w = &p[self.out_w..self.out_b];
        let y = (0..rows)
            .map(|r| p[self.out_b] + w.iter().zip(&last[r * fan_in..(r + 1) * fan_in]).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        (y, cache)
    }

    /// Predictions using the running batch-norm statistics.
    pub fn predict(&self, x: &[f64], rows: usize) -> Result<Vec<f64>> {
        self.check(x, rows, Mode::Eval)?;
        Ok(self.run(x, rows, Mode::Eval).0)
    }

    /// Forward pass; in training mode the running statistics are updated.
    pub fn forward(&mut self, x: &[f64], rows: usize, mode: Mode) -> Result<Vec<f64>> {
        self.check(x, rows, mode)?;
        let (y, cache) = self.run(x, rows, mode);
        if mode == Mode::Train {
            self.update_running(&cache.stats, rows);
        }
        Ok(y)
    }

    /// Exponential update of the running statistics; the variance uses the
    /// unbiased batch estimate.
    pub fn update_running(&mut self, stats: &BatchStats, rows: usize) {
        let m = self.bn_momentum;
        let unbias = if rows > 1 { rows as f64 / (rows - 1) as f64 } else { 1.0 };
        for (l, (mean, var)) in stats.iter().enumerate() {
            for u in 0..mean.len() {
                self.running_mean[l][u] = (1.0 - m) * self.running_mean[l][u] + m * mean[u];
                self.running_var[l][u] = (1.0 - m) * self.running_var[l][u] + m * var[u] * unbias;
            }
        }
    }

    /// Weighted mean squared error `Σ wᵢ (ŷᵢ - yᵢ)² / Σ wᵢ`, its gradient with
    /// respect to every parameter, and the batch statistics used.
    pub fn loss_grad(&self, x: &[f64], y: &[f64], weights: &[f64], mode: Mode) -> Result<(f64, Vec<f64>, BatchStats)> {
        let rows = y.len();
        self.check(x, rows, mode)?;
        if weights.len() != rows {
            bail!(Data, "{} weights for {} rows", weights.len(), rows);
        }
        let wsum: f64 = weights.iter().sum();
        if !(wsum > 0.0) {
            bail!(Data, "sample weights must have a positive sum");
        }
        let (pred, cache) = self.run(x, rows, mode);
        let mut loss = 0.0;
        let mut d_out = vec![0.0; rows];
        for r in 0..rows {
            let e = pred[r] - y[r];
            loss += weights[r] * e * e;
            d_out[r] = 2.0 * weights[r] * e / wsum;
        }
        loss /= wsum;

        let p = &self.params;
        let mut g = vec![0.0; p.len()];
        let fan_in = self.widths[self.widths.len() - 2];
        let last = &cache.inputs[self.hidden.len()];
        let mut da = vec![0.0; rows * fan_in];
        for r in 0..rows {
            g[self.out_b] += d_out[r];
            for k in 0..fan_in {
                g[self.out_w + k] += d_out[r] * last[r * fan_in + k];
                da[r * fan_in + k] = d_out[r] * p[self.out_w + k];
            }
        }
        for (l, h) in self.hidden.iter().enumerate().rev() {
            let (xhat, inv_std, z) = (&cache.xhat[l], &cache.inv_std[l], &cache.z[l]);
            let wd = h.width;
            // Through batch norm: `da` holds dL/d(output) of this layer.
            let mut dact = vec![0.0; rows * wd];
            for u in 0..wd {
                let (mut sum_d, mut sum_dx) = (0.0, 0.0);
                for r in 0..rows {
                    let k = r * wd + u;
                    g[h.gamma + u] += da[k] * xhat[k];
                    g[h.beta + u] += da[k];
                    let dxhat = da[k] * p[h.gamma + u];
                    sum_d += dxhat;
                    sum_dx += dxhat * xhat[k];
                }
                for r in 0..rows {
                    let k = r * wd + u;
                    let dxhat = da[k] * p[h.gamma + u];
                    dact[k] = match mode {
                        Mode::Eval => dxhat * inv_std[u],
                        Mode::Train => {
                            inv_std[u] * (dxhat - sum_d / rows as f64 - xhat[k] * sum_dx / rows as f64)
                        }
                    };
                }
            }
            // Through ReLU and the linear map.
            let input = &cache.inputs[l];
            let mut da_prev = vec![0.0; rows * h.fan_in];
            for r in 0..rows {
                for u in 0..wd {
                    let k = r * wd + u;
                    if z[k] <= 0.0 {
                        continue;
                    }
                    let dz = dact[k];
                    g[h.b + u] += dz;
                    let row = &input[r * h.fan_in..(r + 1) * h.fan_in];
                    for i in 0..h.fan_in {
                        g[h.w + u * h.fan_in + i] += dz * row[i];
                        da_prev[r * h.fan_in + i] += dz * p[h.w + u * h.fan_in + i];
                    }
                }
            }
            da = da_prev;
        }
        Ok((loss, g, cache.stats))
    }

    /// Signs of every hidden pre-activation on a batch; a change means a ReLU
    /// kink was crossed.
    pub fn activation_pattern(&self, x: &[f64], rows: usize, mode: Mode) -> Vec<bool> {
        self.run(x, rows, mode).1.z.iter().flatten().map(|v| *v > 0.0).collect()
    }

    /// Smallest `|pre-activation|` over a batch.
    pub fn min_abs_preactivation(&self, x: &[f64], rows: usize, mode: Mode) -> f64 {
        self.run(x, rows, mode).1.z.iter().flatten().fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }

    /// Hidden pre-activations of one layer, `rows × width`.
    pub fn preactivations(&self, x: &[f64], rows: usize, mode: Mode, layer: usize) -> Vec<f64> {
        self.run(x, rows, mode).1.z.swap_remove(layer)
    }
}
