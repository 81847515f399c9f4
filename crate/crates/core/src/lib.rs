//! Sparse spiking neural network inference with a cost model of a
//! block-convolution accelerator: bit-serial encoding, gated one-to-all
//! sparse convolution, LIF neurons, compressed weights and DRAM traffic.

pub mod engine;
pub mod error;
pub mod format;
pub mod model;
pub mod neuron;
pub mod oracle;
pub mod sim;
pub mod tensor;
pub mod weights;

pub use error::{Error, Result};
