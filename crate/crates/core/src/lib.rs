//! Sequence labeling of social norm violations in dialog transcripts.
//!
//! This crate is the allocation-only numerical core: the dialog data model,
//! sparse feature extraction, a small hand-differentiated LSTM kernel, the
//! three classifier architectures with truncated-BPTT training, evaluation
//! metrics and a planted-rule synthetic corpus generator. It performs no IO;
//! file formats and the command-line tool live in the `normseq` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod math;
pub mod models;
pub mod nn;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
