//! Autoencoder and binary-classifier architectures built from [`crate::seqnn`].

mod checkpoint;
mod config;
mod network;
mod tcn;

pub use checkpoint::{load_checkpoint, save_checkpoint, FORMAT_VERSION, MAGIC};
pub use config::{receptive_field, Arch, ModelConfig};
pub use network::{
    reconstruction_error, ClassifierBody, DenseStack, Model, Network, Output, OutputGrad, Trace,
};
pub use tcn::{BlockCache, TemporalBlock, Tcn};
