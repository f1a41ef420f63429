use std::collections::HashMap;
use std::path::PathBuf;

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use sctf_core::contextualizer::{
    attend, contextualize, write_embeddings_binary, write_embeddings_csv, ColumnVariance,
    ContextConfig, Embedding, EmbeddingKind, EmbeddingSet, FeatureSequence, SequenceMode,
};
use sctf_core::pipeline::{load_metadata, load_recording, read_manifest, ManifestRow, SplitSide};
use sctf_core::scattering::{
    build_filter_bank, log_compress, scattering_transform, FilterBank, Signal, LOG_EPSILON,
};
use sctf_core::{Error, Result};

use super::prepare::leakage_check;
use crate::artifacts::{open_read, write_run_config, write_with, Layout};
use crate::config::{Grouping, RunConfig};

/// Segments of one recording that appear in the manifest.
#[derive(Clone, Debug)]
struct RecordingGroup {
    patient_id: String,
    recording: String,
    side: SplitSide,
    audio_path: PathBuf,
    starts: Vec<usize>,
}

/// Groups consecutive manifest rows by recording, keeping manifest order.
fn group_rows(
    rows: &[ManifestRow],
    audio: &HashMap<String, PathBuf>,
) -> Result<Vec<RecordingGroup>> {
    let mut groups: Vec<RecordingGroup> = Vec::new();
    for r in rows {
        if let Some(g) = groups.last_mut() {
            if g.patient_id == r.patient_id && g.recording == r.recording {
                g.starts.push(r.start_sample);
                continue;
            }
        }
        let audio_path = audio.get(&r.recording).cloned().ok_or_else(|| {
            Error::Data(format!(
                "manifest names unknown recording '{}'",
                r.recording
            ))
        })?;
        groups.push(RecordingGroup {
            patient_id: r.patient_id.clone(),
            recording: r.recording.clone(),
            side: r.split,
            audio_path,
            starts: vec![r.start_sample],
        });
    }
    Ok(groups)
}

struct Extractor<'a> {
    cfg: &'a RunConfig,
    bank: FilterBank,
}

impl Extractor<'_> {
    /// Scattering matrices (log-compressed if configured) of every listed window.
    fn scatter(&self, group: &RecordingGroup) -> Result<Vec<Array2<f64>>> {
        let signal = load_recording(&group.audio_path, &self.cfg.pipeline)?;
        let win = self.cfg.scattering.segment_len;
        let x = signal.samples();
        group
            .starts
            .iter()
            .map(|&start| {
                if start >= x.len() {
                    return Err(Error::Data(format!(
                        "segment start {start} lies beyond the recording ({} samples)",
                        x.len()
                    )));
                }
                let mut buf = x[start..(start + win).min(x.len())].to_vec();
                buf.resize(win, 0.0);
                let window = Signal::new(buf, signal.sample_rate())?;
                let mut values =
                    scattering_transform(&window, &self.bank, &self.cfg.scattering)?.into_values();
                if self.cfg.log_coeffs {
                    log_compress(&mut values, LOG_EPSILON);
                }
                Ok(values)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| {
                e.context(format!(
                    "recording {} of patient {}",
                    group.recording, group.patient_id
                ))
            })
    }
}

fn path_average(values: &Array2<f64>) -> Vec<f64> {
    values
        .mean_axis(Axis(1))
        .expect("scattering matrix has frames")
        .to_vec()
}

fn segment_id(group: &RecordingGroup, start: usize) -> String {
    format!("{}/{}/{}", group.patient_id, group.recording, start)
}

/// Fits a top-variance selection on the attended training sequences, if configured.
fn fit_context<F>(
    cfg: &ContextConfig,
    train: &[F],
    attended: impl Fn(&F) -> Result<Vec<FeatureSequence>> + Sync,
) -> Result<ContextConfig>
where
    F: Sync,
{
    let mut fitted = cfg.clone();
    if !cfg.ffn.needs_fit() {
        return Ok(fitted);
    }
    let mut stats: Option<ColumnVariance> = None;
    for chunk in train.chunks(32) {
        let seqs = chunk
            .par_iter()
            .map(&attended)
            .collect::<Result<Vec<_>>>()?;
        for seq in seqs.iter().flatten() {
            stats
                .get_or_insert_with(|| ColumnVariance::new(seq.d_model()))
                .push_sequence(seq)?;
        }
    }
    let stats = stats.ok_or_else(|| {
        Error::DegenerateData("no training sequences to fit the selection".into())
    })?;
    fitted.ffn.fit_selection(&stats)?;
    Ok(fitted)
}

/// Computes embeddings of the configured kind for every manifest row.
pub fn compute_embeddings(cfg: &RunConfig, rows: &[ManifestRow]) -> Result<EmbeddingSet> {
    let (records, _) = load_metadata(&cfg.dataset_dir)?;
    let audio: HashMap<String, PathBuf> = records
        .iter()
        .flat_map(|p| {
            p.recordings
                .iter()
                .map(|r| (r.name(), r.audio_path.clone()))
        })
        .collect();
    let groups = group_rows(rows, &audio)?;
    let ex = Extractor {
        cfg,
        bank: build_filter_bank(&cfg.scattering, cfg.pipeline.target_rate)?,
    };
    let kind = cfg.embedding_kind();
    let train_groups: Vec<RecordingGroup> = groups
        .iter()
        .filter(|g| g.side == SplitSide::Train)
        .cloned()
        .collect();

    let embeddings: Vec<Embedding> = match kind {
        EmbeddingKind::Baseline => {
            let per_group = groups
                .par_iter()
                .map(|g| {
                    let mats = ex.scatter(g)?;
                    g.starts
                        .iter()
                        .zip(&mats)
                        .map(|(&s, m)| Embedding::new(path_average(m), segment_id(g, s)))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            per_group.into_iter().flatten().collect()
        }
        EmbeddingKind::Paths => {
            let to_seq = |m: Array2<f64>| FeatureSequence::new(m, SequenceMode::PathsAsSequence);
            let context = fit_context(&cfg.context, &train_groups, |g| {
                ex.scatter(g)?
                    .into_iter()
                    .map(|m| attend(&to_seq(m)?, &cfg.context))
                    .collect()
            })?;
            let per_group = groups
                .par_iter()
                .map(|g| {
                    let mats = ex.scatter(g)?;
                    g.starts
                        .iter()
                        .zip(mats)
                        .map(|(&s, m)| {
                            Ok(contextualize(&to_seq(m)?, &context)?
                                .with_provenance(segment_id(g, s)))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            per_group.into_iter().flatten().collect()
        }
        EmbeddingKind::MultiSegment => {
            let tokens = groups
                .par_iter()
                .map(|g| Ok(ex.scatter(g)?.iter().map(path_average).collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()?;
            let sequences = token_sequences(&groups, tokens, cfg.grouping);
            let train_seqs: Vec<&TokenSequence> = sequences
                .iter()
                .filter(|s| s.side == SplitSide::Train)
                .collect();
            let context = fit_context(&cfg.context, &train_seqs, |s| {
                Ok(vec![attend(&s.features()?, &cfg.context)?])
            })?;
            sequences
                .par_iter()
                .map(|s| {
                    contextualize(&s.features()?, &context)
                        .map(|e| e.with_provenance(s.id.clone()))
                        .map_err(|e| e.context(s.id.clone()))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    EmbeddingSet::new(kind, embeddings)
}

struct TokenSequence {
    id: String,
    side: SplitSide,
    tokens: Vec<Vec<f64>>,
}

impl TokenSequence {
    fn features(&self) -> Result<FeatureSequence> {
        FeatureSequence::from_tokens(&self.tokens, SequenceMode::MultiSegment)
    }
}

/// One token per segment, in temporal order, spanning a recording or a whole patient.
fn token_sequences(
    groups: &[RecordingGroup],
    tokens: Vec<Vec<Vec<f64>>>,
    grouping: Grouping,
) -> Vec<TokenSequence> {
    let mut out: Vec<TokenSequence> = Vec::new();
    for (g, t) in groups.iter().zip(tokens) {
        match grouping {
            Grouping::PerRecording => out.push(TokenSequence {
                id: format!("{}/{}", g.patient_id, g.recording),
                side: g.side,
                tokens: t,
            }),
            Grouping::PerPatient => match out.last_mut() {
                Some(last) if last.id == g.patient_id => last.tokens.extend(t),
                _ => out.push(TokenSequence {
                    id: g.patient_id.clone(),
                    side: g.side,
                    tokens: t,
                }),
            },
        }
    }
    out
}

/// Patient id of an embedding, segment or recording identifier.
pub fn patient_of(id: &str) -> &str {
    id.split('/').next().unwrap_or(id)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmbedSummary {
    pub kind: EmbeddingKind,
    pub count: usize,
    pub dim: usize,
}

pub fn read_manifest_checked(layout: &Layout) -> Result<Vec<ManifestRow>> {
    let path = layout.manifest();
    let rows = read_manifest(open_read(&path)?, &path)?;
    if rows.is_empty() {
        return Err(Error::Data(format!("{} lists no segments", path.display())));
    }
    leakage_check(&rows)?;
    Ok(rows)
}

/// Reads the manifest, embeds every segment and writes the CSV and binary exports.
pub fn embed(cfg: &RunConfig) -> Result<EmbedSummary> {
    cfg.validate()?;
    cfg.require_dataset()?;
    let layout = Layout::new(&cfg.output_dir);
    let rows = read_manifest_checked(&layout)?;
    let set = compute_embeddings(cfg, &rows)?;
    let kind = set.kind;
    write_with(&layout.embeddings_csv(kind), |out| {
        write_embeddings_csv(&set, &cfg.preamble(), out)
    })?;
    write_with(&layout.embeddings_bin(kind), |out| {
        write_embeddings_binary(&set, out)
    })?;
    write_run_config(&layout, cfg)?;
    Ok(EmbedSummary {
        kind,
        count: set.embeddings.len(),
        dim: set.dim(),
    })
}
