//! File formats, checkpoints and the command-line interface for the
//! `normseq_core` violation-detection models.

pub mod checkpoint;
pub mod cli;
pub mod io;
