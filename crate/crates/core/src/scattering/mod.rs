//! Wavelet scattering front-end.
//!
//! A scattering network cascades three fixed operations: convolution with a
//! wavelet filter bank, a complex modulus and low-pass averaging. Order-`m`
//! coefficients are `|...|f * psi_1| * ... * psi_m| * phi_J`; the
//! [`ScatteringMatrix`] stacks every order up to `M` as rows (paths) against
//! subsampled time frames.
//!
//! Two implementations are provided: [`scattering_transform`] works in the
//! frequency domain, [`scattering_transform_direct`] evaluates the same
//! circular convolutions by plain summation and serves as a reference.

mod direct;
mod dump;
mod filter_bank;
mod transform;

use std::fmt;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use direct::scattering_transform_direct;
pub use dump::write_matrix_csv;
pub use filter_bank::{build_filter_bank, FilterBank, Geometry, LowPass, Wavelet, XI_MAX};
pub use transform::scattering_transform;

/// Default floor added before log compression of coefficients.
pub const LOG_EPSILON: f64 = 1e-6;

/// Mono audio with its sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Data("signal has no samples".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidArgument(
                "sample rate must be positive".into(),
            ));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Parameters of the scattering network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatteringConfig {
    /// Invariance scale in octaves; averaging spans roughly `2^j` samples.
    pub j: u32,
    /// Wavelets per octave, one entry per order.
    pub q: Vec<u32>,
    /// Maximal scattering order (1 or 2).
    pub max_order: usize,
    /// Segment length in samples.
    pub segment_len: usize,
    /// Output frames are spaced `2^(j - oversampling)` samples apart.
    pub oversampling: u32,
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        Self {
            j: 8,
            q: vec![8, 1],
            max_order: 2,
            segment_len: 40_000,
            oversampling: 0,
        }
    }
}

impl ScatteringConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.max_order) {
            return Err(Error::InvalidConfig(format!(
                "max_order must be 1 or 2, got {}",
                self.max_order
            )));
        }
        if self.q.len() != self.max_order {
            return Err(Error::InvalidConfig(format!(
                "expected {} Q values (one per order), got {}",
                self.max_order,
                self.q.len()
            )));
        }
        if self.q.contains(&0) {
            return Err(Error::InvalidConfig("Q entries must be positive".into()));
        }
        if self.j == 0 || self.j > 30 {
            return Err(Error::InvalidConfig(format!(
                "J must lie in 1..=30, got {}",
                self.j
            )));
        }
        if (1usize << self.j) > self.segment_len {
            return Err(Error::InvalidConfig(format!(
                "2^J = {} exceeds segment length {}",
                1usize << self.j,
                self.segment_len
            )));
        }
        if self.oversampling > self.j {
            return Err(Error::InvalidConfig(format!(
                "oversampling {} exceeds J = {}",
                self.oversampling, self.j
            )));
        }
        Ok(())
    }

    /// Distance in samples between consecutive output frames.
    pub fn stride(&self) -> usize {
        1usize << (self.j - self.oversampling)
    }

    pub fn n_frames(&self) -> usize {
        self.segment_len.div_ceil(self.stride())
    }
}

/// Identifies one row of a scattering matrix by its sequence of wavelet indices.
///
/// Index 0 is the highest-frequency wavelet of its order's family.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PathDescriptor {
    pub order: usize,
    pub scales: Vec<usize>,
}

impl PathDescriptor {
    pub fn zeroth() -> Self {
        Self {
            order: 0,
            scales: Vec::new(),
        }
    }
}

impl fmt::Display for PathDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let scales: Vec<String> = self.scales.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", scales.join(";"))
    }
}

/// Paths x frames matrix of nonnegative scattering coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatteringMatrix {
    values: Array2<f64>,
    path_index: Vec<PathDescriptor>,
    frame_rate: f64,
}

impl ScatteringMatrix {
    pub fn new(
        values: Array2<f64>,
        path_index: Vec<PathDescriptor>,
        frame_rate: f64,
    ) -> Result<Self> {
        if values.nrows() != path_index.len() {
            return Err(Error::Shape(format!(
                "{} rows but {} path descriptors",
                values.nrows(),
                path_index.len()
            )));
        }
        if values.ncols() == 0 || values.nrows() == 0 {
            return Err(Error::Shape("scattering matrix must be non-empty".into()));
        }
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bad frame rate {frame_rate}"
            )));
        }
        if let Some(((r, c), v)) = values
            .indexed_iter()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::Data(format!(
                "coefficient ({r}, {c}) = {v} is not a finite nonnegative value"
            )));
        }
        Ok(Self {
            values,
            path_index,
            frame_rate,
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn paths(&self) -> &[PathDescriptor] {
        &self.path_index
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn n_paths(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, path: usize) -> ArrayView1<'_, f64> {
        self.values.row(path)
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

/// Mean over frames of every path; one entry per row.
pub fn path_average(matrix: &ScatteringMatrix) -> Vec<f64> {
    let frames = matrix.n_frames() as f64;
    matrix
        .values
        .rows()
        .into_iter()
        .map(|row| row.sum() / frames)
        .collect()
}

/// Elementwise `ln(eps + x)`.
pub fn log_compress(values: &mut Array2<f64>, eps: f64) {
    values.mapv_inplace(|v| (eps + v).ln());
}
