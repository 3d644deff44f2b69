//! Hand-differentiated numerical kernels: LSTM cell, affine layers,
//! softmax cross-entropy, inverted dropout, optimizers and a
//! finite-difference gradient checker. Everything runs in `f64`.

mod dense;
mod dropout;
mod gradcheck;
mod loss;
mod lstm;
mod optim;
mod params;

pub use dense::DenseParams;
pub use dropout::{dropout, sample_mask};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, RELATIVE_ERROR_FLOOR};
pub use loss::{softmax, softmax_cross_entropy};
pub use lstm::{LstmParams, LstmState, StepCache};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use params::{ParamBlock, Parameterized};
