pub mod ablate;
pub mod embed;
pub mod evaluate;
pub mod prepare;
pub mod train;

use sctf_core::contextualizer::EmbeddingKind;
use sctf_core::{Error, Result};

use crate::artifacts::Layout;
use crate::config::RunConfig;

/// Concatenates every text report present in the output directory.
pub fn report(cfg: &RunConfig) -> Result<String> {
    let layout = Layout::new(&cfg.output_dir);
    let mut paths: Vec<_> = [
        EmbeddingKind::MultiSegment,
        EmbeddingKind::Paths,
        EmbeddingKind::Baseline,
    ]
    .into_iter()
    .map(|k| layout.metrics_txt(k))
    .collect();
    paths.push(layout.ablation_txt());
    let mut out = String::new();
    for path in paths.iter().filter(|p| p.is_file()) {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        out += &format!("== {}\n{text}\n", path.display());
    }
    if out.is_empty() {
        return Err(Error::Data(format!(
            "no reports found in {}",
            layout.root.display()
        )));
    }
    Ok(out)
}
