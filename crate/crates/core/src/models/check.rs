//! Finite-difference gradient checks of each architecture at tiny sizes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::config::{GlobalConfig, LocalConfig, ModelKind};
use super::global::GlobalParams;
use super::local::{local_loss, local_loss_and_grad, LocalParams, WordExample};
use super::logreg::{regularized_loss, regularized_loss_and_grad, Example, LogRegParams};
use super::tbptt::{full_bptt_gradients, sequence_loss, SequenceExample};
use crate::error::Result;
use crate::features::{SparseVector, META_DIM};
use crate::nn::{grad_check, GradCheckReport, Parameterized};
use crate::rng::{Rng, STREAM_GRADCHECK, STREAM_INIT};

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
pub const GRADCHECK_STEP: f64 = 1e-5;

const TINY_DIM: usize = 12;
const TINY_STEPS: usize = 6;
const TINY_SEGMENT: usize = 4;
const TINY_VOCAB: usize = 6;
const TINY_CLAUSE: usize = 5;

/// Factor applied to analytic gradients when a corrupted backward pass is
/// requested, as a negative control for the checker itself.
pub const CORRUPTION_FACTOR: f64 = 1.01;

pub fn tiny_global_config(layers: usize) -> GlobalConfig {
    GlobalConfig {
        embed: 4,
        hidden: 5,
        mlp_hidden: 3,
        layers,
        dropout: 0.0,
    }
}

pub fn tiny_local_config() -> LocalConfig {
    LocalConfig {
        embed: 4,
        hidden: 5,
    }
}

fn random_sparse(rng: &mut Rng, dim: usize, density: f64) -> SparseVector {
    let entries = (0..dim)
        .filter_map(|c| {
            if rng.bernoulli(density) {
                Some((c as u32, 1.0 + rng.below(3) as f64))
            } else {
                None
            }
        })
        .collect();
    SparseVector::new(dim, entries).expect("indices are in range")
}

fn random_meta(rng: &mut Rng) -> [f64; META_DIM] {
    let mut m = [0.0; META_DIM];
    for v in &mut m {
        *v = rng.bernoulli(0.5) as u8 as f64;
    }
    m
}

fn finish<P: Parameterized>(
    params: &P,
    mut grads: P,
    loss: impl FnMut(&P) -> f64,
    corrupt: bool,
    rng: &mut Rng,
) -> GradCheckReport {
    if corrupt {
        grads.scale(CORRUPTION_FACTOR);
    }
    grad_check(params, &grads, loss, GRADCHECK_STEP, None, rng)
}

/// Checks the analytic gradient of `kind` at a tiny size with dropout off.
/// Parameters and data are drawn from `seed`.
pub fn tiny_gradcheck(kind: ModelKind, seed: u64, corrupt: bool) -> Result<GradCheckReport> {
    let mut init = Rng::with_stream(seed, STREAM_INIT);
    let mut rng = Rng::with_stream(seed, STREAM_GRADCHECK);
    match kind {
        ModelKind::LogReg => {
            let mut params = LogRegParams {
                w: alloc::vec![0.0; TINY_DIM],
                b: init.uniform_range(-0.5, 0.5),
            };
            init.fill_uniform(&mut params.w, 0.5);
            let data: Vec<Example> = (0..8)
                .map(|_| Example {
                    features: random_sparse(&mut rng, TINY_DIM, 0.3),
                    label: rng.bernoulli(0.4),
                })
                .collect();
            let batch: Vec<&Example> = data.iter().collect();
            let (l2, pos_weight) = (1e-2, 2.0);
            let mut grads = params.zeros_like();
            regularized_loss_and_grad(&params, &batch, l2, pos_weight, &mut grads);
            Ok(finish(
                &params,
                grads,
                |q| regularized_loss(q, &batch, l2, pos_weight),
                corrupt,
                &mut rng,
            ))
        }
        ModelKind::Local => {
            let params = LocalParams::init(TINY_VOCAB + 1, &tiny_local_config(), &mut init);
            let data: Vec<WordExample> = (0..2)
                .map(|_| WordExample {
                    rows: (0..TINY_CLAUSE)
                        .map(|_| rng.below(TINY_VOCAB + 1))
                        .collect(),
                    meta: random_meta(&mut rng),
                    label: rng.bernoulli(0.5),
                })
                .collect();
            let batch: Vec<&WordExample> = data.iter().collect();
            let mut grads = params.zeros_like();
            local_loss_and_grad(&params, &batch, 1.5, &mut grads)?;
            let mut failure = None;
            let report = finish(
                &params,
                grads,
                |q| match local_loss(q, &batch, 1.5) {
                    Ok(l) => l,
                    Err(e) => {
                        failure = Some(e);
                        f64::NAN
                    }
                },
                corrupt,
                &mut rng,
            );
            failure.map_or(Ok(report), Err)
        }
        ModelKind::Global1 | ModelKind::Global2 => {
            let layers = if kind == ModelKind::Global2 { 2 } else { 1 };
            let params = GlobalParams::init(TINY_DIM, &tiny_global_config(layers), &mut init);
            let seq = SequenceExample {
                features: (0..TINY_STEPS)
                    .map(|_| random_sparse(&mut rng, TINY_DIM, 0.3))
                    .collect(),
                labels: (0..TINY_STEPS).map(|_| rng.bernoulli(0.4)).collect(),
            };
            let (_, grads) = full_bptt_gradients(&params, &seq, TINY_SEGMENT)?;
            let mut failure = None;
            let report = finish(
                &params,
                grads,
                |q| match sequence_loss(q, &seq) {
                    Ok(l) => l,
                    Err(e) => {
                        failure = Some(e);
                        f64::NAN
                    }
                },
                corrupt,
                &mut rng,
            );
            failure.map_or(Ok(report), Err)
        }
    }
}

/// One-line human-readable summary of a report.
pub fn describe(kind: ModelKind, seed: u64, report: &GradCheckReport) -> String {
    let verdict = if report.max_relative_error < GRADCHECK_TOLERANCE {
        "ok"
    } else {
        "FAIL"
    };
    let worst = report
        .worst
        .as_ref()
        .map(|(name, i, a, n)| format!(" worst={name}[{i}] analytic={a:e} numeric={n:e}"))
        .unwrap_or_default();
    format!(
        "{kind} seed={seed} checked={} max_rel_err={:e} {verdict}{worst}",
        report.checked, report.max_relative_error
    )
}
