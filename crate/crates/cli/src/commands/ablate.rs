use std::io::Write;

use sctf_core::contextualizer::EmbeddingKind;
use sctf_core::evaluation::{
    ablation_compare, write_ablation_csv, AblationComparison, MetricsReport,
};
use sctf_core::{Error, Result};

use super::{embed, evaluate, prepare, train};
use crate::artifacts::{write_text, write_with, Layout};
use crate::config::RunConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct AblationOutcome {
    pub baseline: MetricsReport,
    pub full: MetricsReport,
    pub comparison: AblationComparison,
}

/// `metric,arm,value` rows, one bar per metric and arm.
pub fn write_bars_csv<W: Write>(
    cmp: &AblationComparison,
    preamble: &[String],
    mut out: W,
) -> std::io::Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "metric,arm,value")?;
    for r in &cmp.rows {
        writeln!(out, "{},baseline,{}", r.metric, r.baseline)?;
        writeln!(out, "{},full,{}", r.metric, r.full)?;
    }
    Ok(())
}

fn run_arm(cfg: &RunConfig) -> Result<MetricsReport> {
    embed::embed(cfg)?;
    train::train(cfg)?;
    evaluate::evaluate(cfg).map(|(report, _)| report)
}

/// Prepares once, then runs the path-averaged baseline and the full model on the same split.
pub fn ablate(cfg: &RunConfig) -> Result<AblationOutcome> {
    let full_cfg = RunConfig {
        ablate_baseline: false,
        ..cfg.clone()
    };
    let baseline_cfg = RunConfig {
        ablate_baseline: true,
        ..cfg.clone()
    };
    if full_cfg.embedding_kind() == EmbeddingKind::Baseline {
        return Err(Error::State("full arm resolved to the baseline".into()));
    }
    prepare::prepare(&full_cfg)?;
    let baseline = run_arm(&baseline_cfg).map_err(|e| e.context("baseline arm"))?;
    let full = run_arm(&full_cfg).map_err(|e| e.context("full arm"))?;
    let comparison = ablation_compare(&full, &baseline)?;

    let layout = Layout::new(&cfg.output_dir);
    let preamble = full_cfg.preamble();
    write_with(&layout.ablation_csv(), |out| {
        write_ablation_csv(&comparison, &preamble, out)
    })?;
    write_with(&layout.ablation_bars(), |out| {
        write_bars_csv(&comparison, &preamble, out)
    })?;
    write_text(
        &layout.ablation_txt(),
        &format!(
            "full mode {} vs path-averaged baseline\n{}",
            full_cfg.embedding_kind().as_str(),
            comparison.render_text()
        ),
    )?;
    Ok(AblationOutcome {
        baseline,
        full,
        comparison,
    })
}
