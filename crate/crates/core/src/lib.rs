//! Detecting disengagement in behavioral and affect feature sequences as an
//! anomaly-detection problem.
//!
//! Autoencoders (TCN, LSTM, feedforward) are trained on engaged sequences
//! only; their reconstruction error scores unseen sequences. Supervised
//! binary classifiers with the same backbones serve as baselines.

pub mod cli;
pub mod detect;
pub mod error;
pub mod features;
pub mod io;
pub mod models;
pub mod seqnn;
pub mod synth;

pub use error::{Error, Result};
