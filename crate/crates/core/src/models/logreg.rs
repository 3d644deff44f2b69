//! L2-regularized logistic regression over sparse clause features.

use alloc::vec;
use alloc::vec::Vec;

use super::config::{EpochRecord, TrainConfig, DEFAULT_THRESHOLD};
use super::BestTracker;
use crate::error::{Error, Result};
use crate::eval::Confusion;
use crate::features::SparseVector;
use crate::math::{ln, sigmoid};
use crate::nn::{Optimizer, ParamBlock, Parameterized};
use crate::rng::{Rng, STREAM_SHUFFLE};

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegParams {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Parameterized for LogRegParams {
    fn blocks(&self) -> Vec<ParamBlock<'_>> {
        vec![
            ParamBlock {
                name: "w".into(),
                shape: vec![self.w.len()],
                data: &self.w,
            },
            ParamBlock {
                name: "b".into(),
                shape: vec![1],
                data: core::slice::from_ref(&self.b),
            },
        ]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w, core::slice::from_mut(&mut self.b)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub params: LogRegParams,
    pub l2_lambda: f64,
    pub threshold: f64,
}

/// A vectorized clause with its gold label.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: SparseVector,
    pub label: bool,
}

impl LogRegModel {
    pub fn zeros(dim: usize, l2_lambda: f64) -> Self {
        LogRegModel {
            params: LogRegParams {
                w: vec![0.0; dim],
                b: 0.0,
            },
            l2_lambda,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn dim(&self) -> usize {
        self.params.w.len()
    }

    /// `p(y = 1 | f) = σ(w·f + b)`
    pub fn predict_proba(&self, f: &SparseVector) -> Result<f64> {
        if f.dim() != self.dim() {
            return Err(Error::ShapeMismatch {
                what: "logistic regression input",
                expected: self.dim(),
                got: f.dim(),
            });
        }
        Ok(sigmoid(f.dot(&self.params.w) + self.params.b))
    }

    pub fn predict(&self, f: &SparseVector) -> Result<bool> {
        Ok(self.predict_proba(f)? >= self.threshold)
    }
}

/// Per-example weighted cross-entropy `−log p(gold)` from the logit.
fn logistic_loss(z: f64, label: bool) -> f64 {
    // log(1 + e^{−z}) for y=1 and log(1 + e^{z}) for y=0, stably.
    let s = if label { -z } else { z };
    if s > 0.0 {
        s + ln(1.0 + libm::exp(-s))
    } else {
        libm::log1p(libm::exp(s))
    }
}

/// Mean weighted cross-entropy over `batch` plus `λ‖w‖²`.
pub fn regularized_loss(
    params: &LogRegParams,
    batch: &[&Example],
    l2_lambda: f64,
    pos_weight: f64,
) -> f64 {
    let mut total = 0.0;
    for ex in batch {
        let z = ex.features.dot(&params.w) + params.b;
        let weight = if ex.label { pos_weight } else { 1.0 };
        total += weight * logistic_loss(z, ex.label);
    }
    total / batch.len() as f64 + l2_lambda * crate::math::norm_sq(&params.w)
}

/// Loss and gradient of [`regularized_loss`]; the bias is not regularized.
pub fn regularized_loss_and_grad(
    params: &LogRegParams,
    batch: &[&Example],
    l2_lambda: f64,
    pos_weight: f64,
    grads: &mut LogRegParams,
) -> f64 {
    grads.zero();
    let n = batch.len() as f64;
    let mut total = 0.0;
    for ex in batch {
        let z = ex.features.dot(&params.w) + params.b;
        let weight = if ex.label { pos_weight } else { 1.0 };
        total += weight * logistic_loss(z, ex.label);
        let y = if ex.label { 1.0 } else { 0.0 };
        let d = weight * (sigmoid(z) - y) / n;
        for &(c, v) in ex.features.entries() {
            grads.w[c as usize] += d * v;
        }
        grads.b += d;
    }
    for (g, w) in grads.w.iter_mut().zip(&params.w) {
        *g += 2.0 * l2_lambda * w;
    }
    total / n + l2_lambda * crate::math::norm_sq(&params.w)
}

fn confusion(model: &LogRegModel, data: &[Example]) -> Result<Confusion> {
    let mut c = Confusion::default();
    for ex in data {
        c.record(model.predict(&ex.features)?, ex.label);
    }
    Ok(c)
}

/// Mini-batch training; returns the CV-best epoch's weights (the last epoch
/// when `cv` is empty) and the per-epoch history.
pub fn logreg_train(
    train: &[Example],
    cv: &[Example],
    dim: usize,
    config: &TrainConfig,
) -> Result<(LogRegModel, Vec<EpochRecord>)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if let Some(ex) = train.iter().chain(cv).find(|e| e.features.dim() != dim) {
        return Err(Error::ShapeMismatch {
            what: "example features",
            expected: dim,
            got: ex.features.dim(),
        });
    }
    let mut model = LogRegModel::zeros(dim, config.l2_lambda);
    let mut grads = model.params.zeros_like();
    let mut opt = Optimizer::new(config.optimizer);
    let mut rng = Rng::with_stream(config.seed, STREAM_SHUFFLE);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut tracker = BestTracker::new(config.patience);

    for epoch in 1..=config.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for idx in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = idx.iter().map(|&i| &train[i]).collect();
            let loss = regularized_loss_and_grad(
                &model.params,
                &batch,
                config.l2_lambda,
                config.pos_weight,
                &mut grads,
            );
            loss_sum += loss * batch.len() as f64;
            opt.step(&mut model.params, &grads)?;
        }
        let cv_scores = if cv.is_empty() {
            None
        } else {
            Some(confusion(&model, cv)?.scores())
        };
        let keep_going = tracker.observe(
            epoch,
            loss_sum / train.len() as f64,
            cv_scores,
            &model.params,
        );
        if !keep_going {
            break;
        }
    }
    let (best, history) = tracker.finish();
    model.params = best.expect("at least one epoch ran");
    Ok((model, history))
}
