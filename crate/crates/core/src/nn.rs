//! Local tanh networks combined linearly over the local Pauli set.
//!
//! Each Pauli `P` owns a small MLP reading only the coordinates `I_P`,
//! rescaled from `[-1,1]` to `[0,1]`. The model output is
//! `f(x) = sum_P w_P MLP_P(x|I_P)`, trained on
//! `(1/B) sum (f - y)^2 + lambda |w|_1` with AdamW. Weight decay applies to
//! the network parameters only, never to the last-layer weights `w`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{local_coordinates, ParamHamiltonian};
use crate::pauli::PauliString;

/// Rows per gradient chunk. Chunks are reduced in order, so results do not
/// depend on the number of worker threads.
const CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub width: usize,
    /// Number of hidden tanh layers.
    pub depth: usize,
    pub lambda_l1: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds the batch order; initialization takes its own seed.
    pub seed: u64,
    /// Reported when any network parameter grows beyond it.
    pub w_max: f64,
    /// Apply the `l1` term as a soft-threshold after each step instead of
    /// through its subgradient.
    pub proximal_l1: bool,
    pub early_stop_tol: f64,
    pub early_stop_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            width: 64,
            depth: 2,
            lambda_l1: 1e-3,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            w_max: 1e3,
            proximal_l1: false,
            early_stop_tol: 1e-7,
            early_stop_window: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.depth == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("width, depth, epochs and batch_size must be positive"));
        }
        if !(self.lr > 0.0) || self.lambda_l1 < 0.0 || self.weight_decay < 0.0 {
            return Err(Error::config("lr must be positive; lambda_l1 and weight_decay nonnegative"));
        }
        Ok(())
    }
}

/// Per-Pauli local networks plus the last-layer weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedModel {
    pub paulis: Vec<PauliString>,
    pub local: Vec<Vec<usize>>,
    pub width: usize,
    pub depth: usize,
    pub delta1: f64,
    pub n_params: usize,
    /// All network parameters; block `P` holds, layer by layer, the
    /// row-major weight matrix followed by the bias vector.
    pub theta: Vec<f64>,
    pub w: Vec<f64>,
    offsets: Vec<usize>,
}

/// Gradient with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub theta: Vec<f64>,
    pub w: Vec<f64>,
}

fn layer_dims(input: usize, width: usize, depth: usize) -> Vec<usize> {
    let mut d = vec![input];
    d.extend(std::iter::repeat_n(width, depth));
    d.push(1);
    d
}

/// Reusable buffers for one gradient pass.
#[derive(Default)]
struct Scratch {
    acts: Vec<f64>,
    outs: Vec<f64>,
    delta: Vec<f64>,
    prev: Vec<f64>,
}

/// Dot product with four independent partial sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    let mut s = [0.0; 4];
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            s[k] += x[k] * y[k];
        }
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn block_len(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl CombinedModel {
    /// Zero-initialized model over explicit local coordinate sets.
    pub fn zeros(paulis: Vec<PauliString>, local: Vec<Vec<usize>>, n_params: usize, width: usize, depth: usize, delta1: f64) -> Result<Self> {
        if paulis.len() != local.len() {
            return Err(Error::Dimension {
                expected: paulis.len(),
                actual: local.len(),
            });
        }
        if width == 0 || depth == 0 {
            return Err(Error::config("width and depth must be positive"));
        }
        if let Some(&c) = local.iter().flatten().find(|&&c| c >= n_params) {
            return Err(Error::domain(format!("local coordinate {c} out of range")));
        }
        let mut offsets = vec![0];
        for ip in &local {
            let len = block_len(&layer_dims(ip.len(), width, depth));
            offsets.push(offsets.last().unwrap() + len);
        }
        Ok(CombinedModel {
            theta: vec![0.0; *offsets.last().unwrap()],
            w: vec![0.0; paulis.len()],
            paulis,
            local,
            width,
            depth,
            delta1,
            n_params,
            offsets,
        })
    }

    /// Xavier-uniform network weights, zero biases, zero last layer.
    pub fn init(h: &ParamHamiltonian, paulis: Vec<PauliString>, delta1: f64, cfg: &TrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let local = paulis.iter().map(|p| local_coordinates(p, h, delta1)).collect();
        let mut m = CombinedModel::zeros(paulis, local, h.n_params(), cfg.width, cfg.depth, delta1)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in 0..m.paulis.len() {
            let dims = m.dims(p);
            let mut off = m.offsets[p];
            for l in dims.windows(2) {
                let (fan_in, fan_out) = (l[0], l[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for v in &mut m.theta[off..off + fan_in * fan_out] {
                    *v = rng.random_range(-bound..=bound);
                }
                off += fan_in * fan_out + fan_out;
            }
        }
        Ok(m)
    }

    /// Layer widths of the network for Pauli `p`, input first.
    fn dims(&self, p: usize) -> Vec<usize> {
        layer_dims(self.local[p].len(), self.width, self.depth)
    }

    pub fn n_paulis(&self) -> usize {
        self.paulis.len()
    }

    pub fn block(&self, p: usize) -> std::ops::Range<usize> {
        self.offsets[p]..self.offsets[p + 1]
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_params {
            return Err(Error::Dimension {
                expected: self.n_params,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Width of layer `l` of the network for Pauli `p`; layer 0 is the input.
    fn layer_width(&self, p: usize, l: usize) -> usize {
        if l == 0 {
            self.local[p].len()
        } else if l <= self.depth {
            self.width
        } else {
            1
        }
    }

    /// Number of activations `local_forward` stores for Pauli `p`.
    fn act_len(&self, p: usize) -> usize {
        self.local[p].len() + self.depth * self.width + 1
    }

    fn max_act_len(&self) -> usize {
        (0..self.n_paulis()).map(|p| self.act_len(p)).max().unwrap_or(0)
    }

    /// Output of the local network of Pauli `p`, writing every layer's
    /// activations into `acts` (input first).
    fn local_forward(&self, p: usize, x: &[f64], acts: &mut [f64]) -> f64 {
        for (a, &c) in acts.iter_mut().zip(&self.local[p]) {
            *a = 0.5 * (x[c] + 1.0);
        }
        let mut off = self.offsets[p];
        let mut a_start = 0;
        for l in 0..=self.depth {
            let (fi, fo) = (self.layer_width(p, l), self.layer_width(p, l + 1));
            let (head, tail) = acts.split_at_mut(a_start + fi);
            let a = &head[a_start..];
            let wm = &self.theta[off..off + fi * fo];
            let b = &self.theta[off + fi * fo..off + fi * fo + fo];
            for (i, z) in tail[..fo].iter_mut().enumerate() {
                let v = b[i] + dot(&wm[i * fi..(i + 1) * fi], a);
                *z = if l < self.depth { v.tanh() } else { v };
            }
            off += fi * fo + fo;
            a_start += fi;
        }
        acts[a_start]
    }

    /// `MLP_P(x)` for Pauli index `p`.
    pub fn local_output(&self, p: usize, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.local_forward(p, x, &mut vec![0.0; self.act_len(p)]))
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let mut acts = vec![0.0; self.max_act_len()];
        Ok((0..self.n_paulis())
            .filter(|&p| self.w[p] != 0.0)
            .map(|p| self.w[p] * self.local_forward(p, x, &mut acts))
            .sum())
    }

    /// Adds `gp` times the gradient of `MLP_P` to `grad`, given the
    /// activations of a forward pass.
    fn local_backward(&self, p: usize, acts: &[f64], gp: f64, grad: &mut [f64], s: &mut Scratch) {
        s.delta.clear();
        s.delta.push(gp);
        let mut off_end = self.offsets[p + 1];
        let mut a_end = self.act_len(p) - 1;
        for l in (0..=self.depth).rev() {
            let (fi, fo) = (self.layer_width(p, l), self.layer_width(p, l + 1));
            let start = off_end - (fi * fo + fo);
            let a = &acts[a_end - fi..a_end];
            for (i, &di) in s.delta.iter().enumerate() {
                axpy(di, a, &mut grad[start + i * fi..start + (i + 1) * fi]);
                grad[start + fi * fo + i] += di;
            }
            if l > 0 {
                s.prev.clear();
                s.prev.resize(fi, 0.0);
                let wm = &self.theta[start..start + fi * fo];
                for (i, &di) in s.delta.iter().enumerate() {
                    axpy(di, &wm[i * fi..(i + 1) * fi], &mut s.prev);
                }
                for (pj, aj) in s.prev.iter_mut().zip(a) {
                    *pj *= 1.0 - aj * aj;
                }
                std::mem::swap(&mut s.delta, &mut s.prev);
            }
            off_end = start;
            a_end -= fi;
        }
    }

    /// Adds the gradient of `scale * (f(x) - y)^2 / 2` to `grad` and
    /// returns the squared residual.
    fn accumulate(&self, x: &[f64], y: f64, scale: f64, grad: &mut Gradient, s: &mut Scratch) -> f64 {
        let total: usize = (0..self.n_paulis()).map(|p| self.act_len(p)).sum();
        s.acts.resize(total, 0.0);
        s.outs.resize(self.n_paulis(), 0.0);
        let mut f = 0.0;
        let mut start = 0;
        for p in 0..self.n_paulis() {
            let len = self.act_len(p);
            let o = self.local_forward(p, x, &mut s.acts[start..start + len]);
            s.outs[p] = o;
            if self.w[p] != 0.0 {
                f += self.w[p] * o;
            }
            start += len;
        }
        let r = f - y;
        let g = scale * r;
        let acts = std::mem::take(&mut s.acts);
        let mut start = 0;
        for p in 0..self.n_paulis() {
            let len = self.act_len(p);
            grad.w[p] += g * s.outs[p];
            let gp = g * self.w[p];
            if gp != 0.0 {
                self.local_backward(p, &acts[start..start + len], gp, &mut grad.theta, s);
            }
            start += len;
        }
        s.acts = acts;
        r * r
    }

    /// Batch objective `(1/B) sum (f - y)^2 + lambda |w|_1` and its exact
    /// gradient; the subgradient of `|w_P|` at zero is taken as zero.
    pub fn loss_and_grad(&self, xs: &[&[f64]], ys: &[f64], lambda: f64) -> Result<(f64, Gradient)> {
        let (mse, mut grad) = self.mse_and_grad(xs, ys)?;
        for (g, w) in grad.w.iter_mut().zip(&self.w) {
            if *w != 0.0 {
                *g += lambda * w.signum();
            }
        }
        Ok((mse + lambda * self.w_l1(), grad))
    }

    fn mse_and_grad(&self, xs: &[&[f64]], ys: &[f64]) -> Result<(f64, Gradient)> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::Dimension {
                expected: xs.len().max(1),
                actual: ys.len(),
            });
        }
        for x in xs {
            self.check(x)?;
        }
        let b = xs.len() as f64;
        let parts: Vec<(f64, Gradient)> = xs
            .par_chunks(CHUNK)
            .zip(ys.par_chunks(CHUNK))
            .map(|(cx, cy)| {
                let mut grad = Gradient {
                    theta: vec![0.0; self.theta.len()],
                    w: vec![0.0; self.w.len()],
                };
                let mut scratch = Scratch::default();
                let mut sse = 0.0;
                for (x, &y) in cx.iter().zip(cy) {
                    sse += self.accumulate(x, y, 2.0 / b, &mut grad, &mut scratch);
                }
                (sse, grad)
            })
            .collect();
        let mut iter = parts.into_iter();
        let (mut sse, mut grad) = iter.next().unwrap();
        for (s, g) in iter {
            sse += s;
            grad.theta.iter_mut().zip(&g.theta).for_each(|(a, v)| *a += v);
            grad.w.iter_mut().zip(&g.w).for_each(|(a, v)| *a += v);
        }
        Ok((sse / b, grad))
    }

    pub fn mse(&self, xs: &[&[f64]], ys: &[f64]) -> Result<f64> {
        let preds: Vec<f64> = xs.par_iter().map(|x| self.forward(x)).collect::<Result<_>>()?;
        Ok(preds.iter().zip(ys).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / ys.len() as f64)
    }

    pub fn w_l1(&self) -> f64 {
        self.w.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs_theta(&self) -> f64 {
        self.theta.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(|w|_1, max |theta_i|)`.
    pub fn weight_report(&self) -> (f64, f64) {
        (self.w_l1(), self.max_abs_theta())
    }

    /// `sum_P |w_P| (|W_out,P|_1 + |b_out,P|)`: hidden activations lie in
    /// `[-1, 1]`, so this bounds `|f(x)|` for every input.
    pub fn output_bound(&self) -> f64 {
        (0..self.n_paulis())
            .map(|p| {
                let end = self.offsets[p + 1];
                let out = &self.theta[end - self.width - 1..end];
                self.w[p].abs() * out.iter().map(|v| v.abs()).sum::<f64>()
            })
            .sum()
    }
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub objective: f64,
    pub mse: f64,
    pub w_l1: f64,
    pub max_abs_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub initial_objective: f64,
    pub epochs: Vec<EpochStats>,
    pub stopped_early: bool,
    /// Some network parameter exceeded the configured `w_max`.
    pub w_max_exceeded: bool,
}

impl TrainTrace {
    pub fn final_stats(&self) -> &EpochStats {
        self.epochs.last().expect("at least one epoch")
    }
}

struct Adam {
    m_theta: Vec<f64>,
    v_theta: Vec<f64>,
    m_w: Vec<f64>,
    v_w: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(model: &CombinedModel) -> Self {
        Adam {
            m_theta: vec![0.0; model.theta.len()],
            v_theta: vec![0.0; model.theta.len()],
            m_w: vec![0.0; model.w.len()],
            v_w: vec![0.0; model.w.len()],
            t: 0,
        }
    }

    fn step(&mut self, model: &mut CombinedModel, grad: &Gradient, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], decay: f64| {
            for i in 0..p.len() {
                p[i] *= 1.0 - cfg.lr * decay;
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                p[i] -= cfg.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + cfg.eps);
            }
        };
        update(&mut model.theta, &grad.theta, &mut self.m_theta, &mut self.v_theta, cfg.weight_decay);
        update(&mut model.w, &grad.w, &mut self.m_w, &mut self.v_w, 0.0);
        if cfg.proximal_l1 {
            let t = cfg.lr * cfg.lambda_l1;
            model.w.iter_mut().for_each(|w| *w = crate::linear::soft_threshold(*w, t));
        }
    }
}

/// AdamW training over shuffled mini-batches until the epoch budget runs
/// out or the objective stops improving.
pub fn train(mut model: CombinedModel, xs: &[Vec<f64>], ys: &[f64], cfg: &TrainConfig) -> Result<(CombinedModel, TrainTrace)> {
    cfg.validate()?;
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::domain("training set is empty or labels do not match"));
    }
    let rows: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    let objective = |m: &CombinedModel| -> Result<(f64, f64)> {
        let mse = m.mse(&rows, ys)?;
        Ok((mse + cfg.lambda_l1 * m.w_l1(), mse))
    };
    let initial_objective = objective(&model)?.0;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(&model);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut epochs = Vec::new();
    let mut best = initial_objective;
    let mut best_epoch = 0;
    let mut stopped_early = false;
    let mut w_max_exceeded = false;
    let lambda = if cfg.proximal_l1 { 0.0 } else { cfg.lambda_l1 };
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let bx: Vec<&[f64]> = batch.iter().map(|&i| rows[i]).collect();
            let by: Vec<f64> = batch.iter().map(|&i| ys[i]).collect();
            let (_, grad) = model.loss_and_grad(&bx, &by, lambda)?;
            adam.step(&mut model, &grad, cfg);
        }
        let (obj, mse) = objective(&model)?;
        if !obj.is_finite() {
            return Err(Error::Diverged { epoch, objective: obj });
        }
        let max_abs_theta = model.max_abs_theta();
        w_max_exceeded |= max_abs_theta > cfg.w_max;
        epochs.push(EpochStats {
            epoch,
            objective: obj,
            mse,
            w_l1: model.w_l1(),
            max_abs_theta,
        });
        if obj < best - cfg.early_stop_tol {
            best = obj;
            best_epoch = epoch;
        } else if epoch - best_epoch >= cfg.early_stop_window {
            stopped_early = true;
            break;
        }
    }
    let last = epochs.last().unwrap().objective;
    if last > initial_objective {
        return Err(Error::Convergence {
            method: "network training",
            iterations: epochs.len(),
            detail: format!("final objective {last:.6e} above initial {initial_objective:.6e}"),
        });
    }
    Ok((
        model,
        TrainTrace {
            initial_objective,
            epochs,
            stopped_early,
            w_max_exceeded,
        },
    ))
}

/// Trains one model per target on the same inputs and batch order, which
/// minimizes the summed objective since the models share no parameters.
pub fn train_joint(models: Vec<CombinedModel>, xs: &[Vec<f64>], ys: &[Vec<f64>], cfg: &TrainConfig) -> Result<Vec<(CombinedModel, TrainTrace)>> {
    if models.len() != ys.len() {
        return Err(Error::Dimension {
            expected: models.len(),
            actual: ys.len(),
        });
    }
    models.into_iter().zip(ys).map(|(m, y)| train(m, xs, y, cfg)).collect()
}
