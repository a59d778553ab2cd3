//! Detector-noise characterization and two-step readout mitigation.
//!
//! The crate covers the full chain from detector tomography through the
//! decomposition of a noisy POVM element into a rotated ideal projector plus a
//! residual, to the local-unitary pre-processing and affine post-processing
//! that correct measured probabilities. The witness and circuit modules apply
//! the chain to certifying entangled two-qubit states.

pub mod circuits;
pub mod decomposer;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod mitigator;
pub mod optimize;
pub mod qops;
pub mod tomography;
pub mod witness;

pub use error::{Error, Result};
