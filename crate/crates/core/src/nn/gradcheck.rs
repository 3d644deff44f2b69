use alloc::string::String;
use alloc::vec::Vec;

use super::params::Parameterized;
use crate::rng::Rng;

/// Denominator floor: central differences at the default step carry about
/// 1e-10 of absolute round-off, so coordinates smaller than this are judged
/// on absolute error instead.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// `|a − n| / max(|a|, |n|, RELATIVE_ERROR_FLOOR)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = libm::fabs(analytic)
        .max(libm::fabs(numeric))
        .max(RELATIVE_ERROR_FLOOR);
    libm::fabs(analytic - numeric) / denom
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// `(block name, index, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// Compares `analytic` against central differences of `loss` around `params`.
///
/// With `max_per_block = Some(k)` at most `k` coordinates per block are
/// probed, chosen with `rng`; otherwise every coordinate is checked.
pub fn grad_check<P, F>(
    params: &P,
    analytic: &P,
    mut loss: F,
    eps: f64,
    max_per_block: Option<usize>,
    rng: &mut Rng,
) -> GradCheckReport
where
    P: Parameterized,
    F: FnMut(&P) -> f64,
{
    let names: Vec<(String, usize)> = params
        .blocks()
        .iter()
        .map(|b| (b.name.clone(), b.data.len()))
        .collect();
    let grads: Vec<Vec<f64>> = analytic.blocks().iter().map(|b| b.data.to_vec()).collect();
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        worst: None,
    };
    for (bi, (name, len)) in names.iter().enumerate() {
        let coords: Vec<usize> = match max_per_block {
            Some(k) if k < *len => (0..k).map(|_| rng.below(*len)).collect(),
            _ => (0..*len).collect(),
        };
        for idx in coords {
            let orig = probe.blocks_mut()[bi][idx];
            probe.blocks_mut()[bi][idx] = orig + eps;
            let lp = loss(&probe);
            probe.blocks_mut()[bi][idx] = orig - eps;
            let lm = loss(&probe);
            probe.blocks_mut()[bi][idx] = orig;
            let numeric = (lp - lm) / (2.0 * eps);
            let a = grads[bi][idx];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((name.clone(), idx, a, numeric));
            }
        }
    }
    report
}
