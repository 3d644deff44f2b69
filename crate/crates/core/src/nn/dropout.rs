use alloc::vec;
use alloc::vec::Vec;

use crate::rng::Rng;

/// Per-unit multipliers: `0` for dropped units, `1/(1−rate)` for survivors.
pub fn sample_mask(len: usize, rate: f64, rng: &mut Rng) -> Vec<f64> {
    debug_assert!((0.0..1.0).contains(&rate));
    if rate == 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.bernoulli(rate) { 0.0 } else { keep })
        .collect()
}

/// Inverted dropout. At inference (`training == false`) the input is returned unchanged.
pub fn dropout(x: &[f64], rate: f64, rng: &mut Rng, training: bool) -> (Vec<f64>, Vec<f64>) {
    if !training {
        return (x.to_vec(), vec![1.0; x.len()]);
    }
    let mask = sample_mask(x.len(), rate, rng);
    let y = x.iter().zip(&mask).map(|(a, m)| a * m).collect();
    (y, mask)
}
