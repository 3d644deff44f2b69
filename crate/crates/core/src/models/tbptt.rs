//! Truncated backpropagation through time for the clause-level model.
//!
//! A dialog is cut into consecutive windows of `unroll` clauses. Gradients
//! flow only inside a window; the final LSTM state of window k (its value,
//! not its gradient) seeds window k+1, and state resets to zero at every
//! dialog boundary.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use super::config::{EpochRecord, GlobalConfig, TrainConfig, DEFAULT_THRESHOLD};
use super::global::{GlobalContextModel, GlobalParams, RecurrentState, StateGrad};
use super::BestTracker;
use crate::error::{Error, Result};
use crate::eval::Confusion;
use crate::features::SparseVector;
use crate::nn::{Optimizer, Parameterized};
use crate::rng::{Rng, STREAM_DROPOUT, STREAM_SHUFFLE};

/// A vectorized dialog with gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceExample {
    pub features: Vec<SparseVector>,
    pub labels: Vec<bool>,
}

impl SequenceExample {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    fn golds(&self) -> Vec<usize> {
        self.labels.iter().map(|&l| l as usize).collect()
    }
}

/// Consecutive windows of `unroll` steps; the last may be shorter.
pub fn chunk_ranges(len: usize, unroll: usize) -> Vec<Range<usize>> {
    assert!(unroll >= 1, "unroll must be positive");
    (0..len)
        .step_by(unroll)
        .map(|start| start..(start + unroll).min(len))
        .collect()
}

/// Mean per-clause cross-entropy of a whole sequence, no dropout.
pub fn sequence_loss(params: &GlobalParams, seq: &SequenceExample) -> Result<f64> {
    let (probs, _) = params.forward_chunk(&seq.features, &params.zero_state(), None)?;
    let n = seq.len() as f64;
    Ok(probs
        .iter()
        .zip(&seq.labels)
        .map(|(p, &y)| -libm::log(p[y as usize]))
        .sum::<f64>()
        / n)
}

/// Truncated gradient of the mean sequence loss: each window is
/// backpropagated on its own and the window gradients are summed.
pub fn tbptt_gradients(
    params: &GlobalParams,
    seq: &SequenceExample,
    unroll: usize,
) -> Result<(f64, GlobalParams)> {
    let golds = seq.golds();
    let weight = 1.0 / seq.len() as f64;
    let mut grads = params.zeros_like();
    let mut state = params.zero_state();
    let mut loss = 0.0;
    for r in chunk_ranges(seq.len(), unroll) {
        let chunk = &seq.features[r.clone()];
        let trace = params.forward_chunk_trace(chunk, &state, None)?;
        let weights = vec![weight; r.len()];
        let (l, _) = params.backward_chunk(chunk, &trace, &golds[r], &weights, None, &mut grads)?;
        loss += l;
        state = trace.outgoing;
    }
    Ok((loss, grads))
}

/// Exact gradient of the mean sequence loss. The forward pass is stored in
/// windows of `segment` steps and the backward pass carries state gradients
/// across window boundaries.
pub fn full_bptt_gradients(
    params: &GlobalParams,
    seq: &SequenceExample,
    segment: usize,
) -> Result<(f64, GlobalParams)> {
    let golds = seq.golds();
    let weight = 1.0 / seq.len() as f64;
    let ranges = chunk_ranges(seq.len(), segment);
    let mut traces = Vec::with_capacity(ranges.len());
    let mut state = params.zero_state();
    for r in &ranges {
        let trace = params.forward_chunk_trace(&seq.features[r.clone()], &state, None)?;
        state = trace.outgoing.clone();
        traces.push(trace);
    }
    let mut grads = params.zeros_like();
    let mut carry: Option<StateGrad> = None;
    let mut loss = 0.0;
    for (r, trace) in ranges.iter().zip(&traces).rev() {
        let weights = vec![weight; r.len()];
        let (l, into) = params.backward_chunk(
            &seq.features[r.clone()],
            trace,
            &golds[r.clone()],
            &weights,
            carry.take(),
            &mut grads,
        )?;
        loss += l;
        carry = Some(into);
    }
    Ok((loss, grads))
}

fn confusion(model: &GlobalContextModel, data: &[SequenceExample]) -> Result<Confusion> {
    let mut c = Confusion::default();
    for seq in data {
        for (p, &y) in model
            .predict_sequence(&seq.features)?
            .iter()
            .zip(&seq.labels)
        {
            c.record(p[1] >= DEFAULT_THRESHOLD, y);
        }
    }
    Ok(c)
}

struct Stream<'a> {
    seq: &'a SequenceExample,
    golds: Vec<usize>,
    pos: usize,
    state: RecurrentState,
}

/// Trains a clause-level model with truncated BPTT.
///
/// `streams` dialogs are advanced in lockstep; each update sums the window
/// gradients of every active stream, normalized by the number of clauses in
/// the update. The CV-best epoch is returned.
pub fn tbptt_train(
    train: &[SequenceExample],
    cv: &[SequenceExample],
    dim: usize,
    model_config: GlobalConfig,
    config: &TrainConfig,
) -> Result<(GlobalContextModel, Vec<EpochRecord>)> {
    config.validate()?;
    model_config.validate()?;
    if train.is_empty() || train.iter().any(|s| s.is_empty()) {
        return Err(Error::EmptyTrainingSet);
    }
    for s in train.iter().chain(cv) {
        if s.labels.len() != s.features.len() {
            return Err(Error::LengthMismatch {
                left: s.features.len(),
                right: s.labels.len(),
            });
        }
        if let Some(f) = s.features.iter().find(|f| f.dim() != dim) {
            return Err(Error::ShapeMismatch {
                what: "sequence features",
                expected: dim,
                got: f.dim(),
            });
        }
    }

    let mut model = GlobalContextModel::new(dim, model_config, config.seed)?;
    let mut opt = Optimizer::new(config.optimizer);
    let mut shuffle_rng = Rng::with_stream(config.seed, STREAM_SHUFFLE);
    let mut dropout_rng = Rng::with_stream(config.seed, STREAM_DROPOUT);
    let mut grads = model.params.zeros_like();
    let mut tracker = BestTracker::new(config.patience);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let total_clauses: usize = train.iter().map(SequenceExample::len).sum();
    let rate = model_config.dropout;

    for epoch in 1..=config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for group in order.chunks(config.streams) {
            let mut streams: Vec<Stream<'_>> = group
                .iter()
                .map(|&i| Stream {
                    seq: &train[i],
                    golds: train[i].golds(),
                    pos: 0,
                    state: model.zero_state(),
                })
                .collect();
            loop {
                let active: Vec<usize> = (0..streams.len())
                    .filter(|&k| streams[k].pos < streams[k].seq.len())
                    .collect();
                if active.is_empty() {
                    break;
                }
                let windows: Vec<Range<usize>> = active
                    .iter()
                    .map(|&k| {
                        let s = &streams[k];
                        s.pos..(s.pos + config.unroll).min(s.seq.len())
                    })
                    .collect();
                let n: usize = windows.iter().map(|r| r.len()).sum();
                grads.zero();
                for (&k, r) in active.iter().zip(&windows) {
                    let s = &mut streams[k];
                    let chunk = &s.seq.features[r.clone()];
                    let trace = model.params.forward_chunk_trace(
                        chunk,
                        &s.state,
                        Some((rate, &mut dropout_rng)),
                    )?;
                    let golds = &s.golds[r.clone()];
                    let weights: Vec<f64> = golds
                        .iter()
                        .map(|&g| if g == 1 { config.pos_weight } else { 1.0 } / n as f64)
                        .collect();
                    let (l, _) = model
                        .params
                        .backward_chunk(chunk, &trace, golds, &weights, None, &mut grads)?;
                    loss_sum += l * n as f64;
                    s.state = trace.outgoing;
                    s.pos = r.end;
                }
                opt.step(&mut model.params, &grads)?;
            }
        }
        let cv_scores = if cv.is_empty() {
            None
        } else {
            Some(confusion(&model, cv)?.scores())
        };
        let train_loss = loss_sum / total_clauses as f64;
        log::info!(
            "epoch {epoch}: train loss {train_loss:.5}, cv f1 {:?}",
            cv_scores.map(|s| s.f1)
        );
        if !tracker.observe(epoch, train_loss, cv_scores, &model.params) {
            break;
        }
    }
    let (best, history) = tracker.finish();
    model.params = best.expect("at least one epoch ran");
    Ok((model, history))
}
