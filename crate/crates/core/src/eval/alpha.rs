use alloc::collections::BTreeMap;

use crate::error::{Error, Result};

/// Krippendorff's alpha for two coders, nominal metric, no missing data.
///
/// Each unit contributes both ordered pairs of its two values to the
/// coincidence matrix `o`; with `n = 2N` pairable values and marginals `n_c`,
/// `D_o = Σ_{c≠k} o_ck / n` and `D_e = Σ_{c≠k} n_c n_k / (n(n−1))`.
pub fn krippendorff_alpha_nominal<T: Ord>(coder_a: &[T], coder_b: &[T]) -> Result<f64> {
    if coder_a.len() != coder_b.len() {
        return Err(Error::LengthMismatch {
            left: coder_a.len(),
            right: coder_b.len(),
        });
    }
    if coder_a.len() < 2 {
        return Err(Error::InvalidConfig(
            "alpha needs at least two units".into(),
        ));
    }
    let mut marginals: BTreeMap<&T, u64> = BTreeMap::new();
    let mut disagreeing_units = 0u64;
    for (a, b) in coder_a.iter().zip(coder_b) {
        *marginals.entry(a).or_insert(0) += 1;
        *marginals.entry(b).or_insert(0) += 1;
        if a != b {
            disagreeing_units += 1;
        }
    }
    if marginals.len() < 2 {
        return Err(Error::ConstantData);
    }
    let n = 2 * coder_a.len() as u64;
    // Each disagreeing unit puts 1 into o_ab and 1 into o_ba.
    let observed = (2 * disagreeing_units) as f64 / n as f64;
    let sum_sq: u64 = marginals.values().map(|&c| c * c).sum();
    let expected = (n * n - sum_sq) as f64 / (n * (n - 1)) as f64;
    Ok(1.0 - observed / expected)
}
