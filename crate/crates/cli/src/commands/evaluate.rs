use std::collections::BTreeMap;
use std::io::Write;

use sctf_core::classifier::{read_model, MurmurLabel};
use sctf_core::contextualizer::{Embedding, EmbeddingKind};
use sctf_core::evaluation::{
    evaluate as evaluate_patients, read_metrics_csv, split_fingerprint, write_metrics_csv,
    MetricsReport, PatientPrediction, TestPatient,
};
use sctf_core::{Error, Result};

use super::embed::patient_of;
use super::prepare::split_ids;
use super::train::load_labelled;
use crate::artifacts::{open_read, read_json, write_text, write_with, Layout, ModelInfo};
use crate::config::RunConfig;

pub fn write_predictions_csv<W: Write>(
    predictions: &[PatientPrediction],
    preamble: &[String],
    mut out: W,
) -> std::io::Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    writeln!(
        out,
        "patient_id,truth,predicted,score_present,score_unknown,score_absent"
    )?;
    for p in predictions {
        let s = p.scores.0;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.patient_id, p.truth, p.predicted, s[0], s[1], s[2]
        )?;
    }
    Ok(())
}

/// Scores the held-out patients with the trained model and writes the reports.
pub fn evaluate(cfg: &RunConfig) -> Result<(MetricsReport, Vec<PatientPrediction>)> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.output_dir);
    let kind = cfg.embedding_kind();
    let (data, rows) = load_labelled(&layout, kind)?;
    let info: ModelInfo = read_json(&layout.model_info(kind))?;
    let (_, test_ids) = split_ids(&rows);
    let fingerprint = split_fingerprint(&test_ids);
    if info.split_fingerprint != fingerprint {
        return Err(Error::Comparison(format!(
            "model was trained against split {} but the manifest describes split {fingerprint}",
            info.split_fingerprint
        )));
    }
    let model = read_model(open_read(&layout.model(kind))?)?;

    let mut grouped: BTreeMap<String, (MurmurLabel, Vec<Embedding>)> = BTreeMap::new();
    for (e, label) in data.test {
        grouped
            .entry(patient_of(&e.provenance).to_string())
            .or_insert_with(|| (label, Vec::new()))
            .1
            .push(e);
    }
    let patients: Vec<TestPatient<Vec<Embedding>>> = grouped
        .into_iter()
        .map(|(patient_id, (label, input))| TestPatient {
            patient_id,
            label,
            input,
        })
        .collect();
    if patients.len() != test_ids.len() {
        return Err(Error::Data(format!(
            "{} test patients in the manifest but {} have embeddings",
            test_ids.len(),
            patients.len()
        )));
    }
    let (report, predictions) = evaluate_patients(
        &patients,
        |embeddings: &Vec<Embedding>| embeddings.iter().map(|e| model.predict_scores(e)).collect(),
        cfg.aggregation,
    )?;
    for label in report.undefined_recall() {
        log::warn!(
            "recall for {label} is undefined: no test patients; UAR averages the remaining classes"
        );
    }
    write_reports(&layout, kind, cfg, &report)?;
    write_with(&layout.predictions(kind), |out| {
        write_predictions_csv(&predictions, &cfg.preamble(), out)
    })?;
    Ok((report, predictions))
}

pub fn write_reports(
    layout: &Layout,
    kind: EmbeddingKind,
    cfg: &RunConfig,
    report: &MetricsReport,
) -> Result<()> {
    write_with(&layout.metrics_csv(kind), |out| {
        write_metrics_csv(report, &cfg.preamble(), out)
    })?;
    write_text(
        &layout.metrics_txt(kind),
        &format!("mode {}\n{}", kind.as_str(), report.render_text()),
    )
}

pub fn read_report(layout: &Layout, kind: EmbeddingKind) -> Result<MetricsReport> {
    let path = layout.metrics_csv(kind);
    read_metrics_csv(open_read(&path)?, &path)
}
