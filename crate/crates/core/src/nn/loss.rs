use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, ln};

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| exp(z - max)).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

/// Returns `−log softmax(logits)[gold]` and its gradient `softmax − onehot(gold)`.
pub fn softmax_cross_entropy(logits: &[f64], gold: usize) -> Result<(f64, Vec<f64>)> {
    if logits.len() < 2 || gold >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label: gold,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| exp(z - max)).sum();
    let log_z = max + ln(sum);
    let loss = log_z - logits[gold];
    let mut grad: Vec<f64> = logits.iter().map(|&z| exp(z - log_z)).collect();
    grad[gold] -= 1.0;
    Ok((loss, grad))
}
