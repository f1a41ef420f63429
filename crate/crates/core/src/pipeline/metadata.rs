//! CirCor DigiScope patient metadata.
//!
//! Each patient has a `<id>.txt` whose first line is `<id> <n_locations> <rate>`,
//! followed by one `<LOC> <hea> <wav> <tsv>` line per recording and
//! `#Key: value` attribute lines, one of which is `#Murmur:`.

use std::path::{Path, PathBuf};

use crate::classifier::MurmurLabel;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Recording {
    pub location: String,
    pub audio_path: PathBuf,
}

impl Recording {
    /// File stem, unique within a dataset.
    pub fn name(&self) -> String {
        self.audio_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.location.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatientRecord {
    pub patient_id: String,
    pub label: MurmurLabel,
    pub recordings: Vec<Recording>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub metadata_files: usize,
    pub loaded: usize,
    /// Patients whose metadata names an audio file that does not exist.
    pub skipped_missing_audio: Vec<String>,
}

pub fn parse_patient_metadata(text: &str, file: &Path, audio_dir: &Path) -> Result<PatientRecord> {
    let parse_err = |line: usize, message: String| Error::Parse {
        file: file.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (header_idx, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty metadata file".into()))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() < 3 || head[1].parse::<usize>().is_err() || head[2].parse::<u32>().is_err() {
        return Err(parse_err(
            header_idx + 1,
            format!("expected '<patient> <n_locations> <sample_rate>', got '{header}'"),
        ));
    }
    let patient_id = head[0].to_string();
    let declared: usize = head[1].parse().unwrap_or(0);

    let mut recordings = Vec::new();
    let mut label = None;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if let Some(attr) = line.strip_prefix('#') {
            if let Some((key, value)) = attr.split_once(':') {
                if key.trim() == "Murmur" {
                    label = Some(
                        value
                            .parse::<MurmurLabel>()
                            .map_err(|e| e.context(format!("{}:{line_no}", file.display())))?,
                    );
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let wav = fields.get(2).filter(|w| w.ends_with(".wav"));
        match (fields.first(), wav) {
            (Some(loc), Some(wav)) => recordings.push(Recording {
                location: loc.to_string(),
                audio_path: audio_dir.join(wav),
            }),
            _ => {
                return Err(parse_err(
                    line_no,
                    format!("expected '<location> <hea> <wav> <tsv>', got '{line}'"),
                ))
            }
        }
    }
    let label = label
        .ok_or_else(|| parse_err(text.lines().count().max(1), "no '#Murmur:' field".into()))?;
    if recordings.is_empty() {
        return Err(parse_err(
            header_idx + 1,
            format!("patient {patient_id} lists no recordings"),
        ));
    }
    if recordings.len() != declared {
        log::warn!(
            "{}: header declares {declared} recordings, {} listed",
            file.display(),
            recordings.len()
        );
    }
    Ok(PatientRecord {
        patient_id,
        label,
        recordings,
    })
}

/// Reads every `*.txt` in `dir` (sorted by file name). Patients referencing
/// missing audio are skipped and listed in the report.
pub fn load_metadata(dir: &Path) -> Result<(Vec<PatientRecord>, LoadReport)> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "txt") && path.is_file() {
            files.push(path);
        }
    }
    files.sort();

    let mut report = LoadReport {
        metadata_files: files.len(),
        ..Default::default()
    };
    let mut records: Vec<PatientRecord> = Vec::new();
    for file in &files {
        let text = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
        let record = parse_patient_metadata(&text, file, dir)?;
        if let Some(missing) = record.recordings.iter().find(|r| !r.audio_path.is_file()) {
            log::warn!(
                "skipping patient {}: missing audio {}",
                record.patient_id,
                missing.audio_path.display()
            );
            report.skipped_missing_audio.push(record.patient_id);
            continue;
        }
        if records.iter().any(|r| r.patient_id == record.patient_id) {
            return Err(Error::Data(format!(
                "{}: duplicate patient id {}",
                file.display(),
                record.patient_id
            )));
        }
        records.push(record);
    }
    if records.is_empty() {
        log::warn!("no patients loaded from {}", dir.display());
    }
    report.loaded = records.len();
    Ok((records, report))
}
