//! End-to-end murmur detection pipeline built on `sctf_core`.
//!
//! The commands mirror the subcommands of the `sctf` binary and share one
//! output directory: `prepare` writes the segment manifest, `embed` the
//! embeddings, `train` the model, `evaluate` the metrics and `ablate` the
//! baseline comparison.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod synth;

pub use config::{Grouping, Mode, RunConfig, Seeds, TrainConfig};
