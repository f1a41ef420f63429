use ndarray::{Array2, ArrayView1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::FeatureSequence;
use crate::error::{Error, Result};

/// Optional fixed projection applied after attention.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeedForward {
    /// Pass the attended sequence through untouched.
    #[default]
    Identity,
    /// Right-multiply by a seeded Gaussian `d_model x target_dim` matrix with
    /// entries `N(0, 1) / sqrt(target_dim)`.
    RandomProjection { target_dim: usize, seed: u64 },
    /// Keep the `target_dim` highest-variance columns. `selected` is filled by
    /// [`FeedForward::fit_selection`] from training-split statistics.
    TopVarianceSelection {
        target_dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        selected: Option<Vec<usize>>,
    },
}

impl FeedForward {
    pub fn output_dim(&self, d_model: usize) -> usize {
        match self {
            FeedForward::Identity => d_model,
            FeedForward::RandomProjection { target_dim, .. }
            | FeedForward::TopVarianceSelection { target_dim, .. } => *target_dim,
        }
    }

    pub fn validate(&self, d_model: usize) -> Result<()> {
        match self {
            FeedForward::Identity => Ok(()),
            FeedForward::RandomProjection { target_dim, .. }
            | FeedForward::TopVarianceSelection { target_dim, .. } => {
                if *target_dim == 0 || *target_dim > d_model {
                    Err(Error::InvalidConfig(format!(
                        "projection target_dim {target_dim} must lie in 1..={d_model}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn needs_fit(&self) -> bool {
        matches!(
            self,
            FeedForward::TopVarianceSelection { selected: None, .. }
        )
    }

    /// Fixes the selected columns from training statistics. No-op for the other variants.
    pub fn fit_selection(&mut self, stats: &ColumnVariance) -> Result<()> {
        if let FeedForward::TopVarianceSelection {
            target_dim,
            selected,
        } = self
        {
            *selected = Some(stats.top_columns(*target_dim)?);
        }
        Ok(())
    }
}

/// Seeded Gaussian projection matrix used by [`FeedForward::RandomProjection`].
pub fn projection_matrix(d_model: usize, target_dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (target_dim as f64).sqrt();
    Array2::from_shape_simple_fn((d_model, target_dim), || {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * scale
    })
}

pub fn feed_forward(x: &FeatureSequence, ffn: &FeedForward) -> Result<FeatureSequence> {
    let d_model = x.d_model();
    ffn.validate(d_model)?;
    let rows = match ffn {
        FeedForward::Identity => return Ok(x.clone()),
        FeedForward::RandomProjection { target_dim, seed } => {
            x.rows()
                .dot(&projection_matrix(d_model, *target_dim, *seed))
        }
        FeedForward::TopVarianceSelection { selected, .. } => {
            let columns = selected.as_ref().ok_or_else(|| {
                Error::State("variance selection used before its statistics were fitted".into())
            })?;
            if let Some(&c) = columns.iter().find(|&&c| c >= d_model) {
                return Err(Error::Shape(format!(
                    "selected column {c} out of range for d_model {d_model}"
                )));
            }
            x.rows().select(Axis(1), columns)
        }
    };
    FeatureSequence::new(rows, x.mode())
}

/// Streaming per-column mean and variance (Welford).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ColumnVariance {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl ColumnVariance {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, row: ArrayView1<'_, f64>) -> Result<()> {
        if row.len() != self.mean.len() {
            return Err(Error::Shape(format!(
                "row of width {} pushed into statistics of width {}",
                row.len(),
                self.mean.len()
            )));
        }
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(row) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
        Ok(())
    }

    pub fn push_sequence(&mut self, x: &FeatureSequence) -> Result<()> {
        for row in x.rows().rows() {
            self.push(row)?;
        }
        Ok(())
    }

    pub fn variances(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.m2.iter().map(|s| s / n).collect()
    }

    /// Indices of the `k` largest variances, ascending; ties favour lower indices.
    pub fn top_columns(&self, k: usize) -> Result<Vec<usize>> {
        if self.count == 0 {
            return Err(Error::State(
                "no rows observed for variance selection".into(),
            ));
        }
        if k == 0 || k > self.mean.len() {
            return Err(Error::InvalidConfig(format!(
                "cannot select {k} of {} columns",
                self.mean.len()
            )));
        }
        let var = self.variances();
        let mut order: Vec<usize> = (0..var.len()).collect();
        order.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
        let mut keep = order[..k].to_vec();
        keep.sort_unstable();
        Ok(keep)
    }
}
