//! One-vs-rest quadratic-kernel SVM head.
//!
//! Inputs are standardized with training statistics, then one binary machine
//! per class is fitted with SMO. Scores are raw decision values (uncalibrated
//! margins), ordered Present, Unknown, Absent.

mod kernel;
mod persist;
pub mod smo;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::contextualizer::Embedding;
use crate::error::{Error, Result};

pub use kernel::{kernel_quadratic, QuadraticKernel};
pub use persist::{read_model, write_model};

/// Patient-level murmur label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MurmurLabel {
    Present,
    Unknown,
    Absent,
}

impl MurmurLabel {
    /// Score order, which is also the tie-break priority.
    pub const ALL: [MurmurLabel; 3] = [
        MurmurLabel::Present,
        MurmurLabel::Unknown,
        MurmurLabel::Absent,
    ];

    pub fn index(self) -> usize {
        match self {
            MurmurLabel::Present => 0,
            MurmurLabel::Unknown => 1,
            MurmurLabel::Absent => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MurmurLabel::Present => "Present",
            MurmurLabel::Unknown => "Unknown",
            MurmurLabel::Absent => "Absent",
        }
    }
}

impl std::fmt::Display for MurmurLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MurmurLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Present" | "present" => Ok(MurmurLabel::Present),
            "Unknown" | "unknown" => Ok(MurmurLabel::Unknown),
            "Absent" | "absent" => Ok(MurmurLabel::Absent),
            other => Err(Error::Data(format!("unknown murmur label '{other}'"))),
        }
    }
}

/// Per-class decision values ordered (Present, Unknown, Absent).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores(pub [f64; 3]);

impl ClassScores {
    pub fn new(scores: [f64; 3]) -> Result<Self> {
        if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                row: i,
                detail: "class score is not finite".into(),
            });
        }
        Ok(Self(scores))
    }

    pub fn get(&self, label: MurmurLabel) -> f64 {
        self.0[label.index()]
    }
}

/// Argmax, ties resolved Present > Unknown > Absent.
pub fn predict_label(scores: &ClassScores) -> MurmurLabel {
    let mut best = MurmurLabel::Present;
    for label in MurmurLabel::ALL {
        if scores.get(label) > scores.get(best) {
            best = label;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmConfig {
    pub c: f64,
    /// `None` means `1 / dim`.
    pub gamma: Option<f64>,
    pub coef0: f64,
    pub tol: f64,
    /// SMO iteration cap; `None` means `max(100 * n, 100_000)`.
    pub max_passes: Option<usize>,
    /// Kernel-row cache budget in MiB.
    pub cache_mb: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            coef0: 1.0,
            tol: 1e-3,
            max_passes: None,
            cache_mb: 256,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "c must be positive, got {}",
                self.c
            )));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "gamma must be positive, got {g}"
                )));
            }
        }
        if !self.coef0.is_finite() {
            return Err(Error::InvalidConfig("coef0 must be finite".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_passes == Some(0) {
            return Err(Error::InvalidConfig("max_passes must be positive".into()));
        }
        Ok(())
    }

    pub fn gamma_for(&self, dim: usize) -> f64 {
        self.gamma.unwrap_or(1.0 / dim.max(1) as f64)
    }

    pub fn kernel_for(&self, dim: usize) -> QuadraticKernel {
        QuadraticKernel {
            gamma: self.gamma_for(dim),
            coef0: self.coef0,
        }
    }
}

/// The 3x3 search grid: `c` in {0.1, 1, 10} and `gamma` in {0.1, 1, 10} / dim.
pub fn hyperparameter_grid(base: &SvmConfig, dim: usize) -> Vec<SvmConfig> {
    let mut grid = Vec::with_capacity(9);
    for c in [0.1, 1.0, 10.0] {
        for g in [0.1, 1.0, 10.0] {
            grid.push(SvmConfig {
                c,
                gamma: Some(g / dim.max(1) as f64),
                ..base.clone()
            });
        }
    }
    grid
}

/// Per-dimension mean and population standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    const MIN_STD: f64 = 1e-12;

    pub fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean = x.sum_axis(Axis(0)) / n;
        let std = x
            .axis_iter(Axis(1))
            .zip(mean.iter())
            .map(|(col, &m)| {
                let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
                if s < Self::MIN_STD {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Self {
            mean: mean.to_vec(),
            std,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        Array1::from_iter(
            x.iter()
                .zip(self.mean.iter().zip(&self.std))
                .map(|(v, (m, s))| (v - m) / s),
        )
    }

    pub fn apply_rows(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

/// One-vs-rest machine: `f(x) = sum_i coef_i K(sv_i, x) + bias`, `coef_i = alpha_i y_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMachine {
    pub support: Array2<f64>,
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl BinaryMachine {
    /// A class absent from training always scores -1.
    fn constant(dim: usize) -> Self {
        Self {
            support: Array2::zeros((0, dim)),
            coef: Vec::new(),
            bias: -1.0,
        }
    }

    pub fn n_support(&self) -> usize {
        self.coef.len()
    }

    fn decision(&self, kernel: &QuadraticKernel, x: ArrayView1<'_, f64>) -> f64 {
        smo::decision_value(&self.support, &self.coef, self.bias, kernel, x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub kernel: QuadraticKernel,
    pub c: f64,
    pub standardizer: Standardizer,
    /// Indexed by [`MurmurLabel::index`].
    pub machines: Vec<BinaryMachine>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MachineReport {
    pub label: MurmurLabel,
    pub iterations: usize,
    pub kkt_gap: f64,
    pub converged: bool,
    pub n_support: usize,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn predict_scores(&self, e: &Embedding) -> Result<ClassScores> {
        self.predict_scores_slice(&e.values)
    }

    pub fn predict_scores_slice(&self, x: &[f64]) -> Result<ClassScores> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "embedding has dimension {}, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        let z = self.standardizer.apply(ArrayView1::from(x));
        let mut scores = [0.0; 3];
        for (s, m) in scores.iter_mut().zip(&self.machines) {
            *s = m.decision(&self.kernel, z.view());
        }
        ClassScores::new(scores)
    }
}

pub fn predict_scores(model: &SvmModel, e: &Embedding) -> Result<ClassScores> {
    model.predict_scores(e)
}

pub fn train(
    embeddings: &[Embedding],
    labels: &[MurmurLabel],
    cfg: &SvmConfig,
) -> Result<SvmModel> {
    train_with_report(embeddings, labels, cfg).map(|(m, _)| m)
}

pub fn train_with_report(
    embeddings: &[Embedding],
    labels: &[MurmurLabel],
    cfg: &SvmConfig,
) -> Result<(SvmModel, Vec<MachineReport>)> {
    if embeddings.is_empty() {
        return Err(Error::DegenerateData("no training examples".into()));
    }
    let dim = embeddings[0].dim();
    let mut x = Array2::zeros((embeddings.len(), dim));
    for (i, e) in embeddings.iter().enumerate() {
        if e.dim() != dim {
            return Err(Error::Shape(format!(
                "training example {i} has dimension {}, expected {dim}",
                e.dim()
            )));
        }
        x.row_mut(i).assign(&ArrayView1::from(&e.values[..]));
    }
    train_matrix(&x, labels, cfg)
}

/// Trains on the rows of `x`.
pub fn train_matrix(
    x: &Array2<f64>,
    labels: &[MurmurLabel],
    cfg: &SvmConfig,
) -> Result<(SvmModel, Vec<MachineReport>)> {
    cfg.validate()?;
    let (n, dim) = x.dim();
    if labels.len() != n {
        return Err(Error::Shape(format!(
            "{n} examples but {} labels",
            labels.len()
        )));
    }
    if n == 0 || dim == 0 {
        return Err(Error::DegenerateData("empty training matrix".into()));
    }
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "non-finite feature in training example {}",
            pos / dim
        )));
    }
    let mut present = [false; 3];
    for l in labels {
        present[l.index()] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::DegenerateData(
            "training labels contain a single class".into(),
        ));
    }

    let standardizer = Standardizer::fit(x);
    let z = standardizer.apply_rows(x);
    let kernel = cfg.kernel_for(dim);
    let params = smo::SmoParams {
        c: cfg.c,
        tol: cfg.tol,
        max_iterations: cfg.max_passes.unwrap_or((100 * n).max(100_000)),
        cache_bytes: cfg.cache_mb.saturating_mul(1 << 20),
    };

    let mut machines = Vec::with_capacity(3);
    let mut reports = Vec::with_capacity(3);
    for label in MurmurLabel::ALL {
        if !present[label.index()] {
            machines.push(BinaryMachine::constant(dim));
            reports.push(MachineReport {
                label,
                iterations: 0,
                kkt_gap: 0.0,
                converged: true,
                n_support: 0,
            });
            continue;
        }
        let y: Vec<f64> = labels
            .iter()
            .map(|&l| if l == label { 1.0 } else { -1.0 })
            .collect();
        let sol = smo::solve(&z, &y, kernel, &params);
        if !sol.converged {
            log::warn!(
                "{label} machine stopped after {} iterations with KKT gap {:.3e}",
                sol.iterations,
                sol.kkt_gap
            );
        }
        let sv: Vec<usize> = (0..n).filter(|&i| sol.alpha[i] > 0.0).collect();
        let machine = BinaryMachine {
            support: z.select(Axis(0), &sv),
            coef: sv.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
            bias: sol.bias,
        };
        if !machine.bias.is_finite() {
            return Err(Error::Numeric {
                row: label.index(),
                detail: "SVM bias is not finite".into(),
            });
        }
        reports.push(MachineReport {
            label,
            iterations: sol.iterations,
            kkt_gap: sol.kkt_gap,
            converged: sol.converged,
            n_support: sv.len(),
        });
        machines.push(machine);
    }
    Ok((
        SvmModel {
            kernel,
            c: cfg.c,
            standardizer,
            machines,
        },
        reports,
    ))
}
