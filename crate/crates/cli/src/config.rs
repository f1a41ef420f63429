use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sctf_core::classifier::SvmConfig;
use sctf_core::contextualizer::{ContextConfig, EmbeddingKind, FeedForward};
use sctf_core::evaluation::Aggregation;
use sctf_core::pipeline::PipelineConfig;
use sctf_core::scattering::ScatteringConfig;
use sctf_core::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[serde(rename = "paths")]
    PathsAsSequence,
    #[default]
    #[serde(rename = "multiseg")]
    MultiSegment,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paths" => Ok(Mode::PathsAsSequence),
            "multiseg" => Ok(Mode::MultiSegment),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode '{other}' (expected paths or multiseg)"
            ))),
        }
    }
}

/// What a multi-segment token sequence spans.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    #[default]
    PerRecording,
    PerPatient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub split: u64,
    pub oversample: u64,
    pub projection: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            split: 20220,
            oversample: 20221,
            projection: 20222,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Pick `c` and `gamma` by patient-level cross-validation on the training split.
    pub grid_search: bool,
    pub cv_folds: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            grid_search: true,
            cv_folds: 3,
        }
    }
}

/// Every knob of a run. Loaded from TOML, then overridden by command-line flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset_dir: PathBuf,
    pub output_dir: PathBuf,
    pub mode: Mode,
    pub grouping: Grouping,
    /// Embed with path-averaged scattering vectors only (no positions, attention or projection).
    pub ablate_baseline: bool,
    /// Apply `ln(1e-6 + x)` to scattering coefficients before contextualization.
    pub log_coeffs: bool,
    pub aggregation: Aggregation,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub seeds: Seeds,
    pub pipeline: PipelineConfig,
    pub scattering: ScatteringConfig,
    pub context: ContextConfig,
    pub svm: SvmConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            mode: Mode::default(),
            grouping: Grouping::default(),
            ablate_baseline: false,
            log_coeffs: false,
            aggregation: Aggregation::Mean,
            workers: 0,
            seeds: Seeds::default(),
            pipeline: PipelineConfig::default(),
            scattering: ScatteringConfig::default(),
            context: ContextConfig::default(),
            svm: SvmConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Applies one `dotted.key=value` assignment; the value is parsed as TOML,
    /// falling back to a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("expected key=value, got '{assignment}'"))
        })?;
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut root =
            toml::Value::try_from(&*self).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let parts: Vec<&str> = key.trim().split('.').collect();
        let mut node = &mut root;
        for part in &parts[..parts.len() - 1] {
            let table = node.as_table_mut().ok_or_else(|| {
                Error::InvalidArgument(format!("'{key}' does not name a config table"))
            })?;
            node = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        node.as_table_mut()
            .ok_or_else(|| Error::InvalidArgument(format!("'{key}' does not name a config table")))?
            .insert(parts[parts.len() - 1].to_string(), value);
        *self = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(format!("{key}: {e}")))?;
        Ok(())
    }

    /// Copies the projection seed into the projection stage.
    pub fn resolved(mut self) -> Self {
        if let FeedForward::RandomProjection { seed, .. } = &mut self.context.ffn {
            *seed = self.seeds.projection;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.scattering.validate()?;
        self.svm.validate()?;
        let window = self
            .pipeline
            .segment
            .window_samples(self.pipeline.target_rate);
        if self.scattering.segment_len != window {
            return Err(Error::InvalidConfig(format!(
                "scattering.segment_len is {} but a {} s window at {} Hz has {window} samples",
                self.scattering.segment_len,
                self.pipeline.segment.window_s,
                self.pipeline.target_rate
            )));
        }
        if self.train.cv_folds < 2 {
            return Err(Error::InvalidConfig(
                "train.cv_folds must be at least 2".into(),
            ));
        }
        Ok(())
    }

    pub fn require_dataset(&self) -> Result<()> {
        if self.dataset_dir.is_dir() {
            Ok(())
        } else {
            Err(Error::io(
                &self.dataset_dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
            ))
        }
    }

    pub fn embedding_kind(&self) -> EmbeddingKind {
        if self.ablate_baseline {
            EmbeddingKind::Baseline
        } else {
            match self.mode {
                Mode::PathsAsSequence => EmbeddingKind::Paths,
                Mode::MultiSegment => EmbeddingKind::MultiSegment,
            }
        }
    }

    /// Single-line JSON echo embedded in every artifact.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("run config serializes")
    }

    pub fn preamble(&self) -> Vec<String> {
        vec![format!("config={}", self.echo())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_consistent() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.embedding_kind(), EmbeddingKind::MultiSegment);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig {
            mode: Mode::PathsAsSequence,
            log_coeffs: true,
            ..Default::default()
        };
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg = RunConfig::from_toml_str("mode = \"paths\"\n[scattering]\nj = 6\n").unwrap();
        assert_eq!(cfg.mode, Mode::PathsAsSequence);
        assert_eq!(cfg.scattering.j, 6);
        assert_eq!(cfg.scattering.q, vec![8, 1]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_toml_str("bogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn window_must_match_segment_len() {
        let mut cfg = RunConfig::default();
        cfg.scattering.segment_len = 1024;
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let mut cfg = RunConfig::default();
        cfg.apply_override("svm.c=10").unwrap();
        cfg.apply_override("pipeline.segment.pad_fraction=0.5")
            .unwrap();
        cfg.apply_override("aggregation=median").unwrap();
        cfg.apply_override("context.ffn.kind=random_projection")
            .unwrap_err();
        assert_eq!(cfg.svm.c, 10.0);
        assert_eq!(cfg.pipeline.segment.pad_fraction, 0.5);
        assert_eq!(cfg.aggregation, Aggregation::Median);
        assert!(cfg.apply_override("svm.bogus=1").is_err());
        assert!(cfg.apply_override("no_equals").is_err());
    }

    #[test]
    fn projection_seed_is_applied() {
        let mut cfg = RunConfig::default();
        cfg.context.ffn = FeedForward::RandomProjection {
            target_dim: 8,
            seed: 0,
        };
        cfg.seeds.projection = 77;
        match cfg.resolved().context.ffn {
            FeedForward::RandomProjection { seed, .. } => assert_eq!(seed, 77),
            _ => unreachable!(),
        }
    }
}
