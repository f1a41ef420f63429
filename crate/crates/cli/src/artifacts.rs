use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sctf_core::contextualizer::EmbeddingKind;
use sctf_core::{Error, Result};

use crate::config::RunConfig;

/// File names inside an output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.csv")
    }

    pub fn embeddings_csv(&self, kind: EmbeddingKind) -> PathBuf {
        self.root.join(format!("embeddings_{}.csv", kind.as_str()))
    }

    pub fn embeddings_bin(&self, kind: EmbeddingKind) -> PathBuf {
        self.root.join(format!("embeddings_{}.bin", kind.as_str()))
    }

    pub fn model(&self, kind: EmbeddingKind) -> PathBuf {
        self.root.join(format!("model_{}.svm2", kind.as_str()))
    }

    pub fn model_info(&self, kind: EmbeddingKind) -> PathBuf {
        self.root.join(format!("model_{}.json", kind.as_str()))
    }

    pub fn cv(&self, kind: EmbeddingKind) -> PathBuf {
        self.root.join(format!("cv_{}.csv", kind.as_str()))
    }

    pub fn metrics_csv(&self, kind: EmbeddingKind) -> PathBuf {
        self.root.join(format!("metrics_{}.csv", kind.as_str()))
    }

    pub fn metrics_txt(&self, kind: EmbeddingKind) -> PathBuf {
        self.root.join(format!("metrics_{}.txt", kind.as_str()))
    }

    pub fn predictions(&self, kind: EmbeddingKind) -> PathBuf {
        self.root.join(format!("predictions_{}.csv", kind.as_str()))
    }

    pub fn ablation_csv(&self) -> PathBuf {
        self.root.join("ablation.csv")
    }

    pub fn ablation_txt(&self) -> PathBuf {
        self.root.join("ablation.txt")
    }

    pub fn ablation_bars(&self) -> PathBuf {
        self.root.join("ablation_bars.csv")
    }

    pub fn run_config(&self) -> PathBuf {
        self.root.join("run_config.json")
    }
}

/// Everything `evaluate` needs to know about how a model was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub kind: EmbeddingKind,
    pub split_fingerprint: String,
    pub c: f64,
    pub gamma: f64,
    pub training_accuracy: f64,
    pub training_examples: usize,
    pub config: RunConfig,
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn open_read(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes a file through `body`, attaching the path to any I/O error.
pub fn write_with<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_with(path, |out| out.write_all(text.as_bytes()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_reader(open_read(path)?)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Writes the resolved run configuration next to the artifacts.
pub fn write_run_config(layout: &Layout, cfg: &RunConfig) -> Result<()> {
    write_json(&layout.run_config(), cfg)
}
