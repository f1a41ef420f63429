//! Training-free transformer block over scattering features.
//!
//! One block, no learned weights: sinusoidal positions are added to the token
//! sequence, the sequence attends to itself through
//! `softmax(X X^T / sqrt(d)) X`, an optional fixed projection follows, and the
//! rows are pooled into one [`Embedding`]. There is no residual connection and
//! no normalization.
//!
//! Tokens come from one of two modes:
//! * paths-as-sequence: each scattering path of a segment is a token whose
//!   features are its frame values. Positions index paths in canonical order,
//!   which is not temporal.
//! * multi-segment: each segment of a recording contributes its path-averaged
//!   vector, in temporal order.

mod attention;
mod export;
mod feed_forward;
mod positional;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scattering::ScatteringMatrix;

pub use attention::{attention_weights, self_attention};
pub use export::{
    read_embeddings_binary, read_embeddings_csv, write_embeddings_binary, write_embeddings_csv,
    EmbeddingKind, EmbeddingSet,
};
pub use feed_forward::{feed_forward, projection_matrix, ColumnVariance, FeedForward};
pub use positional::positional_encoding;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceMode {
    PathsAsSequence,
    MultiSegment,
}

/// Token sequence, one row per token, all rows of width `d_model`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    rows: Array2<f64>,
    mode: SequenceMode,
}

impl FeatureSequence {
    pub fn new(rows: Array2<f64>, mode: SequenceMode) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(Error::Shape(format!(
                "feature sequence must be non-empty, got {}x{}",
                rows.nrows(),
                rows.ncols()
            )));
        }
        if let Some(((r, c), _)) = rows.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite feature at ({r}, {c})")));
        }
        Ok(Self { rows, mode })
    }

    /// Stacks equal-length token vectors in the given order.
    pub fn from_tokens(tokens: &[Vec<f64>], mode: SequenceMode) -> Result<Self> {
        let first = tokens
            .first()
            .ok_or_else(|| Error::Shape("at least one token is required".into()))?;
        let d = first.len();
        if let Some((i, t)) = tokens.iter().enumerate().find(|(_, t)| t.len() != d) {
            return Err(Error::Shape(format!(
                "token {i} has dimension {}, expected {d}",
                t.len()
            )));
        }
        let flat: Vec<f64> = tokens.iter().flatten().copied().collect();
        let rows = Array2::from_shape_vec((tokens.len(), d), flat)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(rows, mode)
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn mode(&self) -> SequenceMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn d_model(&self) -> usize {
        self.rows.ncols()
    }
}

/// `X + PE`, with the position table sized to the sequence.
pub fn add_positional_encoding(x: &FeatureSequence) -> FeatureSequence {
    let pe = positional_encoding(x.len(), x.d_model());
    FeatureSequence {
        rows: &x.rows + &pe,
        mode: x.mode,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    MeanOverRows,
    /// Row-major concatenation; only meaningful for fixed-length sequences.
    Flatten,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextConfig {
    #[serde(default)]
    pub ffn: FeedForward,
    #[serde(default)]
    pub pooling: Pooling,
    /// Add sinusoidal positions before attention.
    #[serde(default = "default_true")]
    pub positional_encoding: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self {
            ffn: FeedForward::Identity,
            pooling: Pooling::MeanOverRows,
            positional_encoding: true,
        }
    }
}

/// Fixed-length vector for one segment or recording.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub values: Vec<f64>,
    /// Segment or recording identifier.
    pub provenance: String,
}

impl Embedding {
    pub fn new(values: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape(
                "embedding must have at least one value".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                row: i,
                detail: "embedding value is not finite".into(),
            });
        }
        Ok(Self {
            values,
            provenance: provenance.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }
}

pub fn pool(x: &FeatureSequence, pooling: Pooling) -> Vec<f64> {
    match pooling {
        Pooling::MeanOverRows => x
            .rows
            .mean_axis(Axis(0))
            .unwrap_or_else(|| Array1::zeros(x.d_model()))
            .to_vec(),
        Pooling::Flatten => x.rows.iter().copied().collect(),
    }
}

/// Positions (if enabled) followed by self-attention; the input of the projection stage.
pub fn attend(x: &FeatureSequence, cfg: &ContextConfig) -> Result<FeatureSequence> {
    if cfg.positional_encoding {
        self_attention(&add_positional_encoding(x))
    } else {
        self_attention(x)
    }
}

/// Full block: positions, attention, projection, pooling.
pub fn contextualize(x: &FeatureSequence, cfg: &ContextConfig) -> Result<Embedding> {
    let attended = attend(x, cfg)?;
    let projected = feed_forward(&attended, &cfg.ffn)?;
    Embedding::new(pool(&projected, cfg.pooling), String::new())
}

/// Paths-as-sequence mode: every scattering path is a token of width `frames`.
pub fn contextualize_paths_mode(sm: &ScatteringMatrix, cfg: &ContextConfig) -> Result<Embedding> {
    let seq = FeatureSequence::new(sm.values().clone(), SequenceMode::PathsAsSequence)?;
    contextualize(&seq, cfg)
}

/// Multi-segment mode: per-segment path averages, in temporal order, are the tokens.
pub fn contextualize_multisegment_mode(
    tokens: &[Vec<f64>],
    cfg: &ContextConfig,
) -> Result<Embedding> {
    let seq = FeatureSequence::from_tokens(tokens, SequenceMode::MultiSegment)?;
    contextualize(&seq, cfg)
}
