//! Training-free scattering transformer.
//!
//! Wavelet scattering coefficients are contextualized by a fixed transformer
//! block (sinusoidal positions plus projection-free self-attention) and fed to
//! a quadratic-kernel SVM. The crate also carries the murmur-detection data
//! pipeline and the challenge metrics used to score it.

pub mod classifier;
pub mod contextualizer;
pub mod error;
pub mod evaluation;
pub mod pipeline;
pub mod scattering;

pub use error::{Error, ErrorKind, Result};
