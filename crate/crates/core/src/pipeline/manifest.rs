use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::MurmurLabel;
use crate::error::{Error, Result};

pub const MANIFEST_HEADER: &str = "patient_id,recording,start_sample,label,split";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSide {
    Train,
    Test,
}

impl SplitSide {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitSide::Train => "train",
            SplitSide::Test => "test",
        }
    }
}

impl std::str::FromStr for SplitSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitSide::Train),
            "test" => Ok(SplitSide::Test),
            other => Err(Error::Data(format!("unknown split '{other}'"))),
        }
    }
}

/// One segment as listed in a manifest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRow {
    pub patient_id: String,
    pub recording: String,
    pub start_sample: usize,
    pub label: MurmurLabel,
    pub split: SplitSide,
}

pub fn write_manifest<W: Write>(
    rows: &[ManifestRow],
    preamble: &[String],
    mut out: W,
) -> std::io::Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "{MANIFEST_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.patient_id,
            r.recording,
            r.start_sample,
            r.label,
            r.split.as_str()
        )?;
    }
    Ok(())
}

pub fn read_manifest<R: BufRead>(input: R, source: &Path) -> Result<Vec<ManifestRow>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        file: source.to_path_buf(),
        line,
        message,
    };
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line.trim() != MANIFEST_HEADER {
                return Err(parse_err(
                    line_no,
                    format!("expected header '{MANIFEST_HEADER}'"),
                ));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(parse_err(
                line_no,
                format!("expected 5 fields, got {}", f.len()),
            ));
        }
        let start_sample = f[2]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad start_sample '{}'", f[2])))?;
        let label = f[3]
            .parse()
            .map_err(|e: Error| parse_err(line_no, e.to_string()))?;
        let split = f[4]
            .parse()
            .map_err(|e: Error| parse_err(line_no, e.to_string()))?;
        rows.push(ManifestRow {
            patient_id: f[0].to_string(),
            recording: f[1].to_string(),
            start_sample,
            label,
            split,
        });
    }
    if !seen_header {
        return Err(parse_err(1, "empty manifest".into()));
    }
    Ok(rows)
}
