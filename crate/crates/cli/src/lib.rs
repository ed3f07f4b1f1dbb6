//! Command-line plumbing for the qfcn toolkit: configuration, MNIST IDX
//! files, checkpoints, oracle verification, training runs and the
//! convolution benchmark.

pub mod bench;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod idx;
pub mod output;
pub mod train_mnist;
pub mod train_ts;
pub mod verify;

pub use error::{CliError, CliResult};
