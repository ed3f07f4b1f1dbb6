//! Simulation of quantum Fourier convolutional networks.
//!
//! The crate provides a dense state-vector simulator, QFT circuits,
//! amplitude encoding with noise, the Fourier convolution layer, hybrid
//! training utilities, and the classical reference implementations used to
//! check them.

pub mod encode;
pub mod error;
pub mod fourier_conv;
pub mod models;
pub mod qft;
pub mod rng;
pub mod statevec;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
