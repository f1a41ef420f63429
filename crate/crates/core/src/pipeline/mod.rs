//! Data ingestion: metadata, audio decoding, resampling, segmentation,
//! patient-level splitting and class balancing.

mod audio;
mod manifest;
mod metadata;
mod resample;
mod segment;
mod split;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scattering::Signal;

pub use audio::{peak_normalize, read_wav, write_wav};
pub use manifest::{read_manifest, write_manifest, ManifestRow, SplitSide, MANIFEST_HEADER};
pub use metadata::{load_metadata, parse_patient_metadata, LoadReport, PatientRecord, Recording};
pub use resample::{resample, resampled_len, CUTOFF_FRACTION};
pub use segment::{segment, segment_starts, Segment, SegmentPolicy};
pub use split::{check_leakage, largest_remainder, oversample, patient_split, DatasetSplit};

pub const TARGET_RATE: u32 = 8000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub target_rate: u32,
    pub segment: SegmentPolicy,
    pub train_fraction: f64,
    pub peak_normalize: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            target_rate: TARGET_RATE,
            segment: SegmentPolicy::default(),
            train_fraction: 0.75,
            peak_normalize: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_rate == 0 {
            return Err(Error::InvalidConfig("target_rate must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "train_fraction must lie in (0, 1)".into(),
            ));
        }
        self.segment.validate()
    }
}

/// Decodes, resamples and (optionally) peak-normalizes one recording.
pub fn load_recording(path: &Path, cfg: &PipelineConfig) -> Result<Signal> {
    let raw = read_wav(path)?;
    let resampled = resample(&raw, cfg.target_rate)?;
    if !cfg.peak_normalize {
        return Ok(resampled);
    }
    let mut samples = resampled.into_samples();
    peak_normalize(&mut samples);
    Signal::new(samples, cfg.target_rate)
}

/// All windows of one recording, labelled with the patient's label.
pub fn segment_recording(
    patient: &PatientRecord,
    recording_index: usize,
    signal: &Signal,
    policy: &SegmentPolicy,
) -> Result<Vec<Segment>> {
    let recording = patient.recordings.get(recording_index).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "patient {} has no recording {recording_index}",
            patient.patient_id
        ))
    })?;
    let pieces = segment(signal, policy)?;
    if pieces.is_empty() {
        log::info!(
            "recording {} discarded ({:.2} s is too short)",
            recording.name(),
            signal.duration_secs()
        );
    }
    Ok(pieces
        .into_iter()
        .map(|(start_sample, signal)| Segment {
            patient_id: patient.patient_id.clone(),
            recording_index,
            recording: recording.name(),
            start_sample,
            signal,
            label: patient.label,
        })
        .collect())
}
