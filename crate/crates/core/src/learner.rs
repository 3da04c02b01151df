//! Feed-forward controller: five (dense → ReLU → batch-norm) units and a
//! final dense layer mapping standardized (rel_x, rel_y, rel_theta, v_ego,
//! v_ref) to raw (throttle, steer).
//!
//! All trainable parameters live in one flat vector so the optimizer and the
//! gradient check can treat them uniformly. Per unit the layout is
//! `W (width × in), b, gamma, beta`, followed by the output layer's
//! `W (2 × width), b`.
//!
//! Model file (text, one record per line, floats in shortest round-trip form):
//!
//! ```text
//! # pursuit-mlp
//! version 1
//! dims <inputs> <width> <units> <outputs>
//! batchnorm <eps> <momentum>
//! feature_mean <5 values>
//! feature_std <5 values>
//! params <count> <values...>
//! running_mean <unit> <width values>
//! running_var <unit> <width values>
//! ```

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::labels::LabeledSample;
use crate::sim::{Controller, Observation};
use crate::vehicle::ControlCommand;

pub const INPUTS: usize = 5;
pub const OUTPUTS: usize = 2;
pub const UNITS: usize = 5;
pub const WIDTH: usize = 64;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;
pub const MODEL_VERSION: u32 = 1;
const MODEL_MAGIC: &str = "# pursuit-mlp";

/// Per-feature standardization, frozen at train time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureNorm {
    pub mean: [f64; INPUTS],
    pub std: [f64; INPUTS],
}

impl FeatureNorm {
    pub const IDENTITY: FeatureNorm = FeatureNorm {
        mean: [0.0; INPUTS],
        std: [1.0; INPUTS],
    };

    pub fn fit(rows: &[[f64; INPUTS]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        let n = rows.len() as f64;
        let mut mean = [0.0; INPUTS];
        let mut std = [0.0; INPUTS];
        for j in 0..INPUTS {
            mean[j] = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            std[j] = (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
            if !(std[j] > 1e-12) {
                return Err(Error::ZeroVariance(j));
            }
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, f: &[f64; INPUTS]) -> [f64; INPUTS] {
        std::array::from_fn(|j| (f[j] - self.mean[j]) / self.std[j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct UnitLayout {
    w: usize,
    b: usize,
    gamma: usize,
    beta: usize,
    nin: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub width: usize,
    pub params: Vec<f64>,
    pub running_mean: Vec<Vec<f64>>,
    pub running_var: Vec<Vec<f64>>,
    pub norm: FeatureNorm,
    /// Batch-norm uses batch statistics (and updates running ones) when set.
    pub training: bool,
}

/// Activations kept from a forward pass for backprop.
struct Cache {
    /// Input to each unit, then the output-layer input.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation per unit.
    pre: Vec<Vec<f64>>,
    /// Normalized activations per unit.
    xhat: Vec<Vec<f64>>,
    /// 1/sqrt(var + eps) per unit and channel.
    inv_std: Vec<Vec<f64>>,
    batch_stats: bool,
    out: Vec<f64>,
}

fn linear(x: &[f64], n: usize, nin: usize, w: &[f64], b: &[f64], nout: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * nout];
    for i in 0..n {
        let xi = &x[i * nin..(i + 1) * nin];
        for o in 0..nout {
            let wo = &w[o * nin..(o + 1) * nin];
            out[i * nout + o] = b[o] + xi.iter().zip(wo).map(|(a, c)| a * c).sum::<f64>();
        }
    }
    out
}

impl Mlp {
    /// He-initialized hidden layers, unit batch-norm scale, zero output layer.
    pub fn new(width: usize, norm: FeatureNorm, seed: u64) -> Self {
        let mut m = Self {
            width,
            params: Vec::new(),
            running_mean: vec![vec![0.0; width]; UNITS],
            running_var: vec![vec![1.0; width]; UNITS],
            norm,
            training: false,
        };
        m.params = vec![0.0; m.param_count()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for u in 0..UNITS {
            let l = m.unit(u);
            let he = Normal::new(0.0, (2.0 / l.nin as f64).sqrt()).expect("valid std");
            for p in &mut m.params[l.w..l.w + width * l.nin] {
                *p = he.sample(&mut rng);
            }
            m.params[l.gamma..l.gamma + width].fill(1.0);
        }
        m
    }

    fn unit(&self, u: usize) -> UnitLayout {
        let w = self.width;
        let first = w * INPUTS + 3 * w;
        let rest = w * w + 3 * w;
        let start = if u == 0 { 0 } else { first + (u - 1) * rest };
        let nin = if u == 0 { INPUTS } else { w };
        UnitLayout {
            w: start,
            b: start + w * nin,
            gamma: start + w * nin + w,
            beta: start + w * nin + 2 * w,
            nin,
        }
    }

    fn out_layout(&self) -> (usize, usize) {
        let l = self.unit(UNITS - 1);
        let w = l.beta + self.width;
        (w, w + OUTPUTS * self.width)
    }

    pub fn param_count(&self) -> usize {
        let w = self.width;
        (w * INPUTS + 3 * w) + (UNITS - 1) * (w * w + 3 * w) + OUTPUTS * w + OUTPUTS
    }

    /// Forward over a row-major batch of already-standardized inputs.
    /// In training mode with `update_stats`, running statistics move toward
    /// the batch statistics.
    fn forward_batch(&mut self, x: &[f64], n: usize, update_stats: bool) -> Cache {
        let w = self.width;
        let batch_stats = self.training && n > 1;
        let mut cache = Cache {
            inputs: Vec::with_capacity(UNITS + 1),
            pre: Vec::with_capacity(UNITS),
            xhat: Vec::with_capacity(UNITS),
            inv_std: Vec::with_capacity(UNITS),
            batch_stats,
            out: Vec::new(),
        };
        let mut h = x.to_vec();
        for u in 0..UNITS {
            let l = self.unit(u);
            let z = linear(&h, n, l.nin, &self.params[l.w..l.b], &self.params[l.b..l.gamma], w);
            let a: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
            let (mean, var) = if batch_stats {
                let mut mean = vec![0.0; w];
                let mut var = vec![0.0; w];
                for i in 0..n {
                    for c in 0..w {
                        mean[c] += a[i * w + c];
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n as f64);
                for i in 0..n {
                    for c in 0..w {
                        var[c] += (a[i * w + c] - mean[c]).powi(2);
                    }
                }
                var.iter_mut().for_each(|v| *v /= n as f64);
                if update_stats {
                    let unbias = n as f64 / (n as f64 - 1.0);
                    for c in 0..w {
                        self.running_mean[u][c] =
                            (1.0 - BN_MOMENTUM) * self.running_mean[u][c] + BN_MOMENTUM * mean[c];
                        self.running_var[u][c] =
                            (1.0 - BN_MOMENTUM) * self.running_var[u][c] + BN_MOMENTUM * var[c] * unbias;
                    }
                }
                (mean, var)
            } else {
                (self.running_mean[u].clone(), self.running_var[u].clone())
            };
            let inv: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
            let gamma = &self.params[l.gamma..l.beta];
            let beta = &self.params[l.beta..l.beta + w];
            let mut xhat = vec![0.0; n * w];
            let mut y = vec![0.0; n * w];
            for i in 0..n {
                for c in 0..w {
                    let xh = (a[i * w + c] - mean[c]) * inv[c];
                    xhat[i * w + c] = xh;
                    y[i * w + c] = gamma[c] * xh + beta[c];
                }
            }
            cache.inputs.push(std::mem::replace(&mut h, y));
            cache.pre.push(z);
            cache.xhat.push(xhat);
            cache.inv_std.push(inv);
        }
        let (ow, ob) = self.out_layout();
        cache.out = linear(&h, n, w, &self.params[ow..ob], &self.params[ob..ob + OUTPUTS], OUTPUTS);
        cache.inputs.push(h);
        cache
    }

    /// Gradient of the loss with respect to all parameters, given
    /// `dout = dLoss/dOutput`.
    fn backward(&self, cache: &Cache, n: usize, dout: &[f64]) -> Vec<f64> {
        let w = self.width;
        let mut grad = vec![0.0; self.params.len()];
        let (ow, ob) = self.out_layout();
        let h = &cache.inputs[UNITS];
        let mut dh = vec![0.0; n * w];
        for i in 0..n {
            for o in 0..OUTPUTS {
                let g = dout[i * OUTPUTS + o];
                grad[ob + o] += g;
                let wrow = &self.params[ow + o * w..ow + (o + 1) * w];
                let grow = &mut grad[ow + o * w..ow + (o + 1) * w];
                for c in 0..w {
                    grow[c] += g * h[i * w + c];
                    dh[i * w + c] += g * wrow[c];
                }
            }
        }
        for u in (0..UNITS).rev() {
            let l = self.unit(u);
            let xhat = &cache.xhat[u];
            let inv = &cache.inv_std[u];
            let gamma = &self.params[l.gamma..l.beta];
            // Batch norm.
            let mut da = vec![0.0; n * w];
            for c in 0..w {
                let mut sum_dy = 0.0;
                let mut sum_dy_xhat = 0.0;
                for i in 0..n {
                    let dy = dh[i * w + c];
                    sum_dy += dy;
                    sum_dy_xhat += dy * xhat[i * w + c];
                }
                grad[l.beta + c] += sum_dy;
                grad[l.gamma + c] += sum_dy_xhat;
                let k = gamma[c] * inv[c];
                if cache.batch_stats {
                    let nf = n as f64;
                    for i in 0..n {
                        da[i * w + c] =
                            k / nf * (nf * dh[i * w + c] - sum_dy - xhat[i * w + c] * sum_dy_xhat);
                    }
                } else {
                    for i in 0..n {
                        da[i * w + c] = k * dh[i * w + c];
                    }
                }
            }
            // ReLU.
            let z = &cache.pre[u];
            for (d, zv) in da.iter_mut().zip(z) {
                if *zv <= 0.0 {
                    *d = 0.0;
                }
            }
            // Dense.
            let x = &cache.inputs[u];
            let mut dx = vec![0.0; n * l.nin];
            for i in 0..n {
                let xi = &x[i * l.nin..(i + 1) * l.nin];
                for o in 0..w {
                    let g = da[i * w + o];
                    if g == 0.0 {
                        continue;
                    }
                    grad[l.b + o] += g;
                    let wrow = &self.params[l.w + o * l.nin..l.w + (o + 1) * l.nin];
                    let grow = &mut grad[l.w + o * l.nin..l.w + (o + 1) * l.nin];
                    let dxi = &mut dx[i * l.nin..(i + 1) * l.nin];
                    for k in 0..l.nin {
                        grow[k] += g * xi[k];
                        dxi[k] += g * wrow[k];
                    }
                }
            }
            dh = dx;
        }
        grad
    }

    fn standardize(&self, rows: &[[f64; INPUTS]]) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(rows.len() * INPUTS);
        for r in rows {
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("feature"));
            }
            x.extend_from_slice(&self.norm.apply(r));
        }
        Ok(x)
    }

    /// Raw outputs for each row (inference mode, running statistics).
    pub fn predict_batch(&self, rows: &[[f64; INPUTS]]) -> Result<Vec<[f64; OUTPUTS]>> {
        let x = self.standardize(rows)?;
        let mut m = self.clone();
        m.training = false;
        let c = m.forward_batch(&x, rows.len(), false);
        Ok(c.out.chunks_exact(OUTPUTS).map(|o| [o[0], o[1]]).collect())
    }

    /// Raw outputs for one feature vector (inference mode).
    pub fn predict(&self, f: &[f64; INPUTS]) -> Result<[f64; OUTPUTS]> {
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature"));
        }
        let w = self.width;
        let mut h = [0.0; 256];
        let mut next = [0.0; 256];
        let x = self.norm.apply(f);
        h[..INPUTS].copy_from_slice(&x);
        let mut nin = INPUTS;
        for u in 0..UNITS {
            let l = self.unit(u);
            for c in 0..w {
                let wr = &self.params[l.w + c * nin..l.w + (c + 1) * nin];
                let z = self.params[l.b + c] + wr.iter().zip(&h[..nin]).map(|(a, b)| a * b).sum::<f64>();
                let a = z.max(0.0);
                let xh = (a - self.running_mean[u][c]) / (self.running_var[u][c] + BN_EPS).sqrt();
                next[c] = self.params[l.gamma + c] * xh + self.params[l.beta + c];
            }
            h[..w].copy_from_slice(&next[..w]);
            nin = w;
        }
        let (ow, ob) = self.out_layout();
        Ok(std::array::from_fn(|o| {
            let wr = &self.params[ow + o * w..ow + (o + 1) * w];
            self.params[ob + o] + wr.iter().zip(&h[..w]).map(|(a, b)| a * b).sum::<f64>()
        }))
    }

    /// Clamped control command for one feature vector.
    pub fn command(&self, f: &[f64; INPUTS]) -> Result<ControlCommand> {
        let [throttle, steer] = self.predict(f)?;
        ControlCommand::clamp(throttle, steer)
    }

    /// Mean squared error over rows and outputs, with its parameter gradient.
    /// Running statistics are left untouched.
    pub fn loss_and_grad(&self, rows: &[[f64; INPUTS]], targets: &[[f64; OUTPUTS]]) -> Result<(f64, Vec<f64>)> {
        let x = self.standardize(rows)?;
        let mut m = self.clone();
        let n = rows.len();
        let c = m.forward_batch(&x, n, false);
        let (loss, dout) = mse(&c.out, targets);
        Ok((loss, self.backward(&c, n, &dout)))
    }

    pub fn loss(&self, rows: &[[f64; INPUTS]], targets: &[[f64; OUTPUTS]]) -> Result<f64> {
        let x = self.standardize(rows)?;
        let mut m = self.clone();
        let c = m.forward_batch(&x, rows.len(), false);
        Ok(mse(&c.out, targets).0)
    }
}

fn mse(out: &[f64], targets: &[[f64; OUTPUTS]]) -> (f64, Vec<f64>) {
    let count = out.len() as f64;
    let mut loss = 0.0;
    let mut d = vec![0.0; out.len()];
    for (i, t) in targets.iter().enumerate() {
        for o in 0..OUTPUTS {
            let r = out[i * OUTPUTS + o] - t[o];
            loss += r * r;
            d[i * OUTPUTS + o] = 2.0 * r / count;
        }
    }
    (loss / count, d)
}

/// Largest relative difference between analytic and central-difference
/// gradients over every parameter. Gradients below `1e-6` in magnitude are
/// compared against that floor instead of their own size.
pub fn grad_check(model: &Mlp, rows: &[[f64; INPUTS]], targets: &[[f64; OUTPUTS]], h: f64) -> Result<f64> {
    let (_, analytic) = model.loss_and_grad(rows, targets)?;
    let mut m = model.clone();
    let mut worst: f64 = 0.0;
    for p in 0..m.params.len() {
        let orig = m.params[p];
        m.params[p] = orig + h;
        let up = m.loss(rows, targets)?;
        m.params[p] = orig - h;
        let down = m.loss(rows, targets)?;
        m.params[p] = orig;
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[p].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[p] - numeric).abs() / denom);
    }
    Ok(worst)
}

/// Smallest |pre-activation| across all units for one row in inference
/// mode; grad checks want this away from the ReLU kink.
pub fn min_abs_preactivation(model: &Mlp, rows: &[[f64; INPUTS]]) -> Result<f64> {
    let x = model.standardize(rows)?;
    let mut m = model.clone();
    let c = m.forward_batch(&x, rows.len(), false);
    Ok(c.pre.iter().flatten().fold(f64::INFINITY, |a, v| a.min(v.abs())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub const ADAM: Optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub epochs: usize,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    pub phases: Vec<Phase>,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub val_fraction: f64,
    pub width: usize,
    /// Fixed standardization; fitted on the training split when `None`.
    pub norm: Option<FeatureNorm>,
    /// Drop samples whose MPC solve did not converge.
    pub skip_unconverged: bool,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            phases: vec![Phase { epochs: 300, lr: 1e-4 }, Phase { epochs: 50, lr: 1e-6 }],
            batch_size: 256,
            seed: 0,
            optimizer: Optimizer::ADAM,
            val_fraction: 0.2,
            width: WIDTH,
            norm: None,
            skip_unconverged: true,
        }
    }
}

impl TrainSchedule {
    pub fn total_epochs(&self) -> usize {
        self.phases.iter().map(|p| p.epochs).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    /// Mean minibatch loss per epoch (training mode).
    pub train_loss: Vec<f64>,
    /// Inference-mode loss on the validation split per epoch; empty when the
    /// split is empty.
    pub val_loss: Vec<f64>,
    pub train_size: usize,
    pub val_size: usize,
}

/// Train on MSE over (throttle, steer). Deterministic given the schedule.
pub fn train(samples: &[LabeledSample], schedule: &TrainSchedule) -> Result<(Mlp, TrainReport)> {
    let usable: Vec<&LabeledSample> = samples
        .iter()
        .filter(|s| s.converged || !schedule.skip_unconverged)
        .collect();
    if usable.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if schedule.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut order: Vec<usize> = (0..usable.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((usable.len() as f64) * schedule.val_fraction).floor() as usize;
    let n_val = n_val.min(usable.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let rows = |idx: &[usize]| -> Vec<[f64; INPUTS]> { idx.iter().map(|&i| usable[i].features()).collect() };
    let labels = |idx: &[usize]| -> Vec<[f64; OUTPUTS]> {
        idx.iter()
            .map(|&i| [usable[i].label.throttle, usable[i].label.steer])
            .collect()
    };
    let (train_x, train_y) = (rows(train_idx), labels(train_idx));
    let (val_x, val_y) = (rows(val_idx), labels(val_idx));
    let norm = match schedule.norm {
        Some(n) => n,
        None => FeatureNorm::fit(&train_x)?,
    };
    let mut model = Mlp::new(schedule.width, norm, schedule.seed);
    let x_all = model.standardize(&train_x)?;

    let np = model.params.len();
    let mut m1 = vec![0.0; np];
    let mut m2 = vec![0.0; np];
    let mut t = 0i32;
    let mut report = TrainReport {
        train_size: train_x.len(),
        val_size: val_x.len(),
        ..Default::default()
    };
    let mut perm: Vec<usize> = (0..train_x.len()).collect();
    let bs = schedule.batch_size;
    for phase in &schedule.phases {
        for _ in 0..phase.epochs {
            perm.shuffle(&mut rng);
            let mut batches: Vec<&[usize]> = perm.chunks(bs).collect();
            // A trailing single-row batch has no batch statistics; fold it in.
            if batches.len() > 1 && batches[batches.len() - 1].len() < 2 {
                batches.pop();
                let k = batches.len() - 1;
                batches[k] = &perm[k * bs..];
            }
            let mut epoch_loss = 0.0;
            model.training = true;
            for b in &batches {
                let n = b.len();
                let mut xb = Vec::with_capacity(n * INPUTS);
                let mut yb = Vec::with_capacity(n);
                for &i in b.iter() {
                    xb.extend_from_slice(&x_all[i * INPUTS..(i + 1) * INPUTS]);
                    yb.push(train_y[i]);
                }
                let cache = model.forward_batch(&xb, n, true);
                let (loss, dout) = mse(&cache.out, &yb);
                let grad = model.backward(&cache, n, &dout);
                epoch_loss += loss;
                t += 1;
                match schedule.optimizer {
                    Optimizer::Sgd => {
                        for (p, g) in model.params.iter_mut().zip(&grad) {
                            *p -= phase.lr * g;
                        }
                    }
                    Optimizer::Adam { beta1, beta2, eps } => {
                        let c1 = 1.0 - beta1.powi(t);
                        let c2 = 1.0 - beta2.powi(t);
                        for k in 0..np {
                            m1[k] = beta1 * m1[k] + (1.0 - beta1) * grad[k];
                            m2[k] = beta2 * m2[k] + (1.0 - beta2) * grad[k] * grad[k];
                            model.params[k] -= phase.lr * (m1[k] / c1) / ((m2[k] / c2).sqrt() + eps);
                        }
                    }
                }
            }
            model.training = false;
            report.train_loss.push(epoch_loss / batches.len() as f64);
            if !val_x.is_empty() {
                report.val_loss.push(model.loss(&val_x, &val_y)?);
            }
        }
    }
    model.training = false;
    Ok((model, report))
}

/// Per-output MSE of the model on `samples` (inference mode).
pub fn per_output_mse(model: &Mlp, samples: &[LabeledSample]) -> Result<[f64; OUTPUTS]> {
    if samples.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let rows: Vec<_> = samples.iter().map(|s| s.features()).collect();
    let pred = model.predict_batch(&rows)?;
    let mut acc = [0.0; OUTPUTS];
    for (p, s) in pred.iter().zip(samples) {
        acc[0] += (p[0] - s.label.throttle).powi(2);
        acc[1] += (p[1] - s.label.steer).powi(2);
    }
    Ok(acc.map(|a| a / samples.len() as f64))
}

fn join(vals: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v}");
    }
    s
}

pub fn save_model<W: Write>(mut w: W, m: &Mlp) -> Result<()> {
    writeln!(w, "{MODEL_MAGIC}")?;
    writeln!(w, "version {MODEL_VERSION}")?;
    writeln!(w, "dims {INPUTS} {} {UNITS} {OUTPUTS}", m.width)?;
    writeln!(w, "batchnorm {BN_EPS} {BN_MOMENTUM}")?;
    writeln!(w, "feature_mean {}", join(&m.norm.mean))?;
    writeln!(w, "feature_std {}", join(&m.norm.std))?;
    writeln!(w, "params {} {}", m.params.len(), join(&m.params))?;
    for u in 0..UNITS {
        writeln!(w, "running_mean {u} {}", join(&m.running_mean[u]))?;
        writeln!(w, "running_var {u} {}", join(&m.running_var[u]))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_model<R: BufRead>(r: R) -> Result<Mlp> {
    let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
    let mut it = lines.iter().enumerate().map(|(i, l)| (i + 1, l.as_str()));
    let perr = |line: usize, msg: &str| Error::Parse {
        line,
        msg: msg.to_string(),
    };
    let (_, magic) = it.next().ok_or(Error::Empty("model file"))?;
    if magic.trim() != MODEL_MAGIC {
        return Err(Error::Header {
            found: magic.trim().to_string(),
            expected: MODEL_MAGIC,
        });
    }
    let mut record = |name: &str| -> Result<(usize, Vec<String>)> {
        let (n, line) = it.next().ok_or_else(|| perr(0, &format!("missing {name}")))?;
        let mut tok = line.split_whitespace();
        if tok.next() != Some(name) {
            return Err(perr(n, &format!("expected {name}")));
        }
        Ok((n, tok.map(str::to_string).collect()))
    };
    let floats = |n: usize, v: &[String]| -> Result<Vec<f64>> {
        v.iter()
            .map(|s| s.parse::<f64>().map_err(|e| perr(n, &e.to_string())))
            .collect()
    };
    let (n, v) = record("version")?;
    let found: u32 = v.first().and_then(|s| s.parse().ok()).ok_or_else(|| perr(n, "bad version"))?;
    if found != MODEL_VERSION {
        return Err(Error::Version {
            found,
            expected: MODEL_VERSION,
        });
    }
    let (n, v) = record("dims")?;
    let dims: Vec<usize> = v.iter().filter_map(|s| s.parse().ok()).collect();
    if dims.len() != 4 || dims[0] != INPUTS || dims[2] != UNITS || dims[3] != OUTPUTS || dims[1] == 0 {
        return Err(perr(n, "unsupported architecture"));
    }
    let width = dims[1];
    let (n, v) = record("batchnorm")?;
    let bn = floats(n, &v)?;
    if bn != [BN_EPS, BN_MOMENTUM] {
        return Err(perr(n, "unsupported batch-norm constants"));
    }
    let (n, v) = record("feature_mean")?;
    let mean: [f64; INPUTS] = floats(n, &v)?.try_into().map_err(|_| perr(n, "expected 5 values"))?;
    let (n, v) = record("feature_std")?;
    let std: [f64; INPUTS] = floats(n, &v)?.try_into().map_err(|_| perr(n, "expected 5 values"))?;
    let mut m = Mlp::new(width, FeatureNorm { mean, std }, 0);
    let (n, v) = record("params")?;
    let count: usize = v.first().and_then(|s| s.parse().ok()).ok_or_else(|| perr(n, "bad count"))?;
    let params = floats(n, &v[1..])?;
    if count != m.param_count() || params.len() != count {
        return Err(perr(n, "parameter count mismatch"));
    }
    m.params = params;
    for u in 0..UNITS {
        for name in ["running_mean", "running_var"] {
            let (n, v) = record(name)?;
            if v.first().map(String::as_str) != Some(&u.to_string()) {
                return Err(perr(n, "unit index out of order"));
            }
            let vals = floats(n, &v[1..])?;
            if vals.len() != width {
                return Err(perr(n, "wrong running-stat length"));
            }
            if name == "running_mean" {
                m.running_mean[u] = vals;
            } else {
                m.running_var[u] = vals;
            }
        }
    }
    Ok(m)
}

/// Closed-loop controller backed by a trained model. An invalid detection
/// yields idle controls.
#[derive(Debug, Clone)]
pub struct MlpController {
    pub model: Mlp,
}

impl MlpController {
    pub fn new(mut model: Mlp) -> Self {
        model.training = false;
        Self { model }
    }
}

impl Controller for MlpController {
    fn command(&mut self, obs: &Observation) -> Result<ControlCommand> {
        let Some(rel) = obs.detection.pose() else {
            return Ok(ControlCommand::IDLE);
        };
        self.model.command(&[rel.x, rel.y, rel.theta, obs.ego.v, obs.v_ref])
    }
}
