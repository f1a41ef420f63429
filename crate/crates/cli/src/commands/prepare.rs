use rayon::prelude::*;

use sctf_core::pipeline::{
    check_leakage, load_metadata, load_recording, patient_split, segment_starts, write_manifest,
    ManifestRow, PatientRecord, SplitSide,
};
use sctf_core::{Error, Result};

use crate::artifacts::{create_dir, write_run_config, write_with, Layout};
use crate::config::RunConfig;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrepareSummary {
    pub patients: [usize; 2],
    pub segments: [usize; 2],
    pub skipped_patients: Vec<String>,
}

impl PrepareSummary {
    pub fn render_text(&self) -> String {
        let mut s = format!(
            "train: {} patients, {} segments\ntest:  {} patients, {} segments\n",
            self.patients[0], self.segments[0], self.patients[1], self.segments[1]
        );
        if !self.skipped_patients.is_empty() {
            s += &format!("skipped: {}\n", self.skipped_patients.join(" "));
        }
        s
    }
}

fn patient_rows(
    patient: &PatientRecord,
    side: SplitSide,
    cfg: &RunConfig,
) -> Result<Vec<ManifestRow>> {
    let mut rows = Vec::new();
    for rec in &patient.recordings {
        let signal = load_recording(&rec.audio_path, &cfg.pipeline)
            .map_err(|e| e.context(format!("patient {}", patient.patient_id)))?;
        for start in segment_starts(signal.len(), signal.sample_rate(), &cfg.pipeline.segment) {
            rows.push(ManifestRow {
                patient_id: patient.patient_id.clone(),
                recording: rec.name(),
                start_sample: start,
                label: patient.label,
                split: side,
            });
        }
    }
    Ok(rows)
}

/// Splits patients, segments every recording and writes the manifest.
pub fn prepare(cfg: &RunConfig) -> Result<PrepareSummary> {
    cfg.validate()?;
    cfg.require_dataset()?;
    let (records, report) = load_metadata(&cfg.dataset_dir)?;
    for id in &report.skipped_missing_audio {
        log::warn!("patient {id} skipped: audio file missing");
    }
    if records.is_empty() {
        return Err(Error::Data(format!(
            "no usable patients in {}",
            cfg.dataset_dir.display()
        )));
    }
    let split = patient_split(&records, cfg.pipeline.train_fraction, cfg.seeds.split)?;
    let assigned: Vec<(&PatientRecord, SplitSide)> = split
        .train
        .iter()
        .map(|p| (p, SplitSide::Train))
        .chain(split.test.iter().map(|p| (p, SplitSide::Test)))
        .collect();
    let per_patient = assigned
        .par_iter()
        .map(|&(p, side)| patient_rows(p, side, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut summary = PrepareSummary {
        patients: [0; 2],
        segments: [0; 2],
        skipped_patients: report.skipped_missing_audio.clone(),
    };
    let mut rows = Vec::new();
    for ((patient, side), patient_rows) in assigned.iter().zip(per_patient) {
        if patient_rows.is_empty() {
            log::warn!(
                "patient {} skipped: no recording is long enough",
                patient.patient_id
            );
            summary.skipped_patients.push(patient.patient_id.clone());
            continue;
        }
        let k = (*side == SplitSide::Test) as usize;
        summary.patients[k] += 1;
        summary.segments[k] += patient_rows.len();
        rows.extend(patient_rows);
    }
    if summary.patients[0] == 0 {
        return Err(Error::Data(
            "no training patient has a usable segment".into(),
        ));
    }
    if summary.patients[1] == 0 {
        log::warn!("the test split is empty; evaluation will not be possible");
    }
    rows.sort_by(|a, b| {
        (a.split as u8, &a.patient_id, &a.recording, a.start_sample).cmp(&(
            b.split as u8,
            &b.patient_id,
            &b.recording,
            b.start_sample,
        ))
    });
    leakage_check(&rows)?;

    let layout = Layout::new(&cfg.output_dir);
    create_dir(&layout.root)?;
    write_with(&layout.manifest(), |out| {
        write_manifest(&rows, &cfg.preamble(), out)
    })?;
    write_run_config(&layout, cfg)?;
    Ok(summary)
}

/// Patient ids on each side of a manifest, sorted and deduplicated.
pub fn split_ids(rows: &[ManifestRow]) -> (Vec<String>, Vec<String>) {
    let mut train: Vec<String> = Vec::new();
    let mut test: Vec<String> = Vec::new();
    for r in rows {
        match r.split {
            SplitSide::Train => train.push(r.patient_id.clone()),
            SplitSide::Test => test.push(r.patient_id.clone()),
        }
    }
    for ids in [&mut train, &mut test] {
        ids.sort();
        ids.dedup();
    }
    (train, test)
}

pub(crate) fn leakage_check(rows: &[ManifestRow]) -> Result<()> {
    let (train, test) = split_ids(rows);
    check_leakage(&train, &test)
}
