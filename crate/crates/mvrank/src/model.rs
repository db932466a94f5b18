//! A one-hidden-layer perceptron scorer with hand-rolled backpropagation.
//!
//! The network maps R^d through a ReLU hidden layer of size 2d and a sigmoid
//! output, so scores live in (0,1). Training follows a two-phase epoch: one
//! plain SGD pass of per-sample binary cross-entropy steps over the shuffled
//! training set, then a single full-batch step on the penalized objective
//! `mean BCE - lambda * proxy`, where the proxy is the smooth rank statistic
//! of [`crate::rankstats::w_phi_proxy`] over the label-1 points.
//!
//! Gradients are exact (see the finite-difference tests); the ReLU
//! derivative at 0 and the `phi` derivative at jump points are taken as 0.

use crate::datagen::{Sample, LABEL_NORMAL};
use crate::error::{Error, Result};
use crate::rankstats::w_phi_proxy;
use crate::rng::rng_from_seed;
use crate::scoregen::ScoreGen;
use rand::seq::SliceRandom;
use rand::Rng;

/// Scores are clamped into [SCORE_CLAMP, 1 - SCORE_CLAMP]: the float sigmoid
/// saturates to exactly 0 or 1 for |z| beyond ~37, which would break the
/// advertised open-interval range and the log losses.
pub const SCORE_CLAMP: f64 = 1e-12;

/// One-hidden-layer MLP scorer: sigmoid(w2 . relu(w1 x + b1) + b2).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MlpScorer {
    d: usize,
    hidden: usize,
    /// hidden x d, row-major.
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lambda: f64,
    pub phi: ScoreGen,
    pub learning_rate: f64,
    pub seed: u64,
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::params("training needs at least 1 epoch"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::params(format!(
                "lambda must be a nonnegative real, got {}",
                self.lambda
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::params(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Per-epoch diagnostics recorded during training.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochTrace {
    pub epoch: usize,
    /// Mean BCE over the full training batch at epoch end.
    pub bce: f64,
    /// Smooth rank-statistic proxy over the label-1 points at epoch end.
    pub w_proxy: f64,
    /// Accuracy reported by the evaluation hook, when one is supplied.
    pub acc_75: Option<f64>,
}

/// Callback evaluating a model snapshot at the end of each epoch (typically
/// the flagged-outlier accuracy on a held-out test set).
pub type EvalHook<'a> = &'a dyn Fn(&MlpScorer) -> Result<f64>;

/// Fresh network: hidden size 2d, weights uniform in (-1/sqrt(fan_in),
/// 1/sqrt(fan_in)), biases zero. Deterministic per seed.
pub fn mlp_new(d: usize, seed: u64) -> Result<MlpScorer> {
    if d == 0 {
        return Err(Error::params("input dimension must be at least 1"));
    }
    let hidden = 2 * d;
    let mut rng = rng_from_seed(seed);
    let bound1 = 1.0 / (d as f64).sqrt();
    let w1 = (0..hidden * d).map(|_| rng.gen_range(-bound1..bound1)).collect();
    let bound2 = 1.0 / (hidden as f64).sqrt();
    let w2 = (0..hidden).map(|_| rng.gen_range(-bound2..bound2)).collect();
    Ok(MlpScorer {
        d,
        hidden,
        w1,
        b1: vec![0.0; hidden],
        w2,
        b2: 0.0,
    })
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl MlpScorer {
    /// Assemble a scorer from explicit parameters (test fixtures may use any
    /// hidden size, not just 2d).
    pub fn from_parts(d: usize, hidden: usize, w1: Vec<f64>, b1: Vec<f64>, w2: Vec<f64>, b2: f64) -> Result<Self> {
        if d == 0 || hidden == 0 {
            return Err(Error::params("dimensions must be at least 1"));
        }
        if w1.len() != hidden * d || b1.len() != hidden || w2.len() != hidden {
            return Err(Error::params(format!(
                "parameter shapes do not match d={d}, hidden={hidden}"
            )));
        }
        if !w1.iter().chain(&b1).chain(&w2).chain([&b2]).all(|v| v.is_finite()) {
            return Err(Error::params("model parameters must be finite"));
        }
        Ok(MlpScorer { d, hidden, w1, b1, w2, b2 })
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn b2(&self) -> f64 {
        self.b2
    }

    /// Total parameter count.
    pub fn param_len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Flatten parameters in the order w1, b1, w2, b2.
    pub fn params(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_len());
        flat.extend_from_slice(&self.w1);
        flat.extend_from_slice(&self.b1);
        flat.extend_from_slice(&self.w2);
        flat.push(self.b2);
        flat
    }

    /// Overwrite parameters from a flat vector (inverse of [`Self::params`]).
    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_len() {
            return Err(Error::params(format!(
                "expected {} parameters, got {}",
                self.param_len(),
                flat.len()
            )));
        }
        if !flat.iter().all(|v| v.is_finite()) {
            return Err(Error::params("model parameters must be finite"));
        }
        let (w1, rest) = flat.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2 = b2[0];
        Ok(())
    }

    /// Hidden activations and pre-sigmoid output for `x`.
    fn forward_hidden(&self, x: &[f64], a: &mut Vec<f64>) -> f64 {
        a.clear();
        let mut z2 = self.b2;
        for k in 0..self.hidden {
            let row = &self.w1[k * self.d..(k + 1) * self.d];
            let z1: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[k];
            let act = z1.max(0.0);
            a.push(act);
            z2 += self.w2[k] * act;
        }
        z2
    }

    /// Score a point: strictly inside (0, 1).
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::params(format!(
                "expected a {}-dimensional input, got {}",
                self.d,
                x.len()
            )));
        }
        let mut a = Vec::with_capacity(self.hidden);
        let z2 = self.forward_hidden(x, &mut a);
        Ok(sigmoid(z2).clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP))
    }

    /// Scores of every point of a sample.
    pub fn score_sample(&self, sample: &Sample) -> Result<Vec<f64>> {
        if sample.dim() != self.d {
            return Err(Error::params(format!(
                "model expects {}-dimensional points, sample is {}-dimensional",
                self.d,
                sample.dim()
            )));
        }
        let mut a = Vec::with_capacity(self.hidden);
        Ok(sample
            .points()
            .map(|p| sigmoid(self.forward_hidden(p, &mut a)).clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP))
            .collect())
    }

    /// Accumulate `dz2 * d z2 / d theta` into the flat gradient buffer,
    /// given the hidden activations of the forward pass.
    fn accumulate_dz2(&self, x: &[f64], a: &[f64], dz2: f64, grad: &mut [f64]) {
        let nw1 = self.w1.len();
        let nb1 = self.b1.len();
        for k in 0..self.hidden {
            // ReLU gate: derivative 0 at and below the kink.
            if a[k] > 0.0 {
                let da = dz2 * self.w2[k];
                let row = &mut grad[k * self.d..(k + 1) * self.d];
                for (g, &v) in row.iter_mut().zip(x) {
                    *g += da * v;
                }
                grad[nw1 + k] += da;
            }
            grad[nw1 + nb1 + k] += dz2 * a[k];
        }
        grad[nw1 + nb1 + self.hidden] += dz2;
    }

    /// Exact gradient of `bce_loss(forward(x), y)` w.r.t. the flat parameters.
    pub fn bce_gradient(&self, x: &[f64], y: u8) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::params("input dimension mismatch"));
        }
        let mut a = Vec::with_capacity(self.hidden);
        let z2 = self.forward_hidden(x, &mut a);
        // d BCE / d z2 for the sigmoid-BCE composition.
        let dz2 = sigmoid(z2) - y as f64;
        let mut grad = vec![0.0; self.param_len()];
        self.accumulate_dz2(x, &a, dz2, &mut grad);
        Ok(grad)
    }

    /// The penalized full-batch objective
    /// `mean BCE - lambda * w_phi_proxy(phi, scores of label-1 points, m)`.
    pub fn regularized_loss(&self, train: &Sample, lambda: f64, phi: &ScoreGen) -> Result<f64> {
        let labels = train
            .labels()
            .ok_or_else(|| Error::params("the regularized objective needs labeled data"))?;
        let scores = self.score_sample(train)?;
        let mut bce_sum = 0.0;
        for (&s, &y) in scores.iter().zip(labels) {
            bce_sum += bce_loss(s, y)?;
        }
        let mut loss = bce_sum / train.len() as f64;
        if lambda != 0.0 {
            let normal_scores: Vec<f64> = scores
                .iter()
                .zip(labels)
                .filter(|(_, &y)| y == LABEL_NORMAL)
                .map(|(&s, _)| s)
                .collect();
            let m = train.len() - normal_scores.len();
            loss -= lambda * w_phi_proxy(phi, &normal_scores, m)?;
        }
        Ok(loss)
    }

    /// Exact gradient of [`Self::regularized_loss`].
    pub fn regularized_gradient(&self, train: &Sample, lambda: f64, phi: &ScoreGen) -> Result<Vec<f64>> {
        let labels = train
            .labels()
            .ok_or_else(|| Error::params("the regularized objective needs labeled data"))?;
        if train.is_empty() {
            return Err(Error::params("cannot take a batch step on an empty sample"));
        }
        let batch = train.len() as f64;
        let n = labels.iter().filter(|&&y| y == LABEL_NORMAL).count();
        let m = train.len() - n;
        if lambda != 0.0 && (n == 0 || m == 0) {
            return Err(Error::params(
                "the rank-statistic penalty needs both label classes present",
            ));
        }
        let big_n = (n + m) as f64;
        let mut grad = vec![0.0; self.param_len()];
        let mut a = Vec::with_capacity(self.hidden);
        for (i, &y) in labels.iter().enumerate() {
            let x = train.point(i);
            let z2 = self.forward_hidden(x, &mut a);
            let s = sigmoid(z2);
            let mut dz2 = (s - y as f64) / batch;
            if lambda != 0.0 && y == LABEL_NORMAL {
                // d/dz2 of -lambda*phi((N*s+1)/(N+1)) with s = sigmoid(z2):
                // the chain rule through the affine rank substitute and the
                // sigmoid derivative s(1-s).
                let arg = (big_n * s.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP) + 1.0) / (big_n + 1.0);
                dz2 -= lambda * phi.derivative(arg)? * (big_n / (big_n + 1.0)) * s * (1.0 - s);
            }
            self.accumulate_dz2(x, &a, dz2, &mut grad);
        }
        Ok(grad)
    }
}

/// Binary cross-entropy `-y ln(y_hat) - (1-y) ln(1 - y_hat)`.
///
/// Predictions at exactly 0 or 1 are clamped into [1e-12, 1 - 1e-12] with a
/// diagnostic, so the loss stays finite.
pub fn bce_loss(y_hat: f64, y: u8) -> Result<f64> {
    if y > 1 {
        return Err(Error::params(format!("label must be 0 or 1, got {y}")));
    }
    if !(0.0..=1.0).contains(&y_hat) || y_hat.is_nan() {
        return Err(Error::domain(format!(
            "prediction must lie in [0,1], got {y_hat}"
        )));
    }
    let p = if y_hat <= 0.0 || y_hat >= 1.0 {
        log::warn!("BCE prediction {y_hat} at the boundary; clamping to avoid an infinite loss");
        y_hat.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP)
    } else {
        y_hat
    };
    Ok(if y == 1 { -p.ln() } else { -(-p).ln_1p() })
}

/// One per-sample SGD step on the BCE loss.
pub fn sgd_step_bce(model: &mut MlpScorer, x: &[f64], y: u8, lr: f64) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::params(format!("learning rate must be positive, got {lr}")));
    }
    let grad = model.bce_gradient(x, y)?;
    apply_step(model, &grad, lr)
}

/// One full-batch gradient step on the penalized objective.
pub fn batch_step_regularized(model: &mut MlpScorer, train: &Sample, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    let grad = model.regularized_gradient(train, cfg.lambda, &cfg.phi)?;
    apply_step(model, &grad, cfg.learning_rate)
}

fn apply_step(model: &mut MlpScorer, grad: &[f64], lr: f64) -> Result<()> {
    let mut params = model.params();
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= lr * g;
    }
    model.set_params(&params)
}

/// Train a fresh scorer on a labeled sample.
///
/// Each epoch makes one shuffled pass of per-sample BCE steps over the whole
/// training set, then one full-batch step on `mean BCE - lambda * proxy`,
/// and records an [`EpochTrace`] (with the hook's accuracy, when given).
/// Initialization, shuffling, and therefore the whole trajectory are
/// deterministic in `cfg.seed`.
pub fn train(
    train_set: &Sample,
    cfg: &TrainConfig,
    eval_hook: Option<EvalHook<'_>>,
) -> Result<(MlpScorer, Vec<EpochTrace>)> {
    cfg.validate()?;
    let labels = train_set
        .labels()
        .ok_or_else(|| Error::params("training needs labeled data"))?
        .to_vec();
    if train_set.is_empty() {
        return Err(Error::params("training sample is empty"));
    }
    let mut model = mlp_new(train_set.dim(), cfg.seed)?;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut shuffle_rng = rng_from_seed(crate::rng::split_seed(cfg.seed, u64::MAX));
    let mut traces = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for &i in &order {
            sgd_step_bce(&mut model, train_set.point(i), labels[i], cfg.learning_rate)?;
        }
        batch_step_regularized(&mut model, train_set, cfg)?;

        let scores = model.score_sample(train_set)?;
        let mut bce_sum = 0.0;
        for (&s, &y) in scores.iter().zip(&labels) {
            bce_sum += bce_loss(s, y)?;
        }
        let normal_scores: Vec<f64> = scores
            .iter()
            .zip(&labels)
            .filter(|(_, &y)| y == LABEL_NORMAL)
            .map(|(&s, _)| s)
            .collect();
        let m = train_set.len() - normal_scores.len();
        let w_proxy = if normal_scores.is_empty() || m == 0 {
            f64::NAN
        } else {
            w_phi_proxy(&cfg.phi, &normal_scores, m)?
        };
        let acc_75 = match eval_hook {
            Some(hook) => Some(hook(&model)?),
            None => None,
        };
        traces.push(EpochTrace {
            epoch,
            bce: bce_sum / train_set.len() as f64,
            w_proxy,
            acc_75,
        });
    }
    Ok((model, traces))
}
