//! Synthetic CirCor-format datasets whose classes differ only in event order.
//!
//! Every recording is a sequence of equal-length blocks drawn from three
//! sound types. Block boundaries fall on the segmentation hop grid, so each
//! window spans exactly two blocks, and every class yields the same multiset
//! of unordered block pairs. Averaging over time inside a window forgets which
//! block came first, so per-window averages are identically distributed
//! across classes; only the order of the windows differs.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sctf_core::classifier::MurmurLabel;
use sctf_core::pipeline::{write_wav, SegmentPolicy};
use sctf_core::scattering::{ScatteringConfig, Signal};
use sctf_core::{Error, Result};

use crate::artifacts::{create_dir, write_text};
use crate::config::{Grouping, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Block {
    A,
    B,
    C,
}

/// Block order of a class. Windows spanning two blocks see the pairs
/// {A,B} and {A,C} twice each in every class.
fn pattern(label: MurmurLabel) -> [Block; 5] {
    use Block::*;
    match label {
        MurmurLabel::Present => [A, B, A, C, A],
        MurmurLabel::Unknown => [B, A, C, A, B],
        MurmurLabel::Absent => [C, A, B, A, C],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub patients_per_class: usize,
    pub recordings_per_patient: usize,
    /// Sample rate of the written WAV files.
    pub sample_rate: u32,
    /// Block length in seconds; match the segmentation hop.
    pub block_s: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            patients_per_class: 16,
            recordings_per_patient: 2,
            sample_rate: 4000,
            block_s: 2.5,
            seed: 0,
        }
    }
}

const LOCATIONS: [&str; 4] = ["AV", "PV", "TV", "MV"];

/// Per-recording variation of the three sound types.
struct Voice {
    f_a: f64,
    f_b: f64,
    beat: f64,
    noise: f64,
}

fn render_block(
    block: Block,
    voice: &Voice,
    n: usize,
    rate: f64,
    offset: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let tau = 2.0 * std::f64::consts::PI;
    (0..n)
        .map(|i| {
            let t = (offset + i) as f64 / rate;
            let noise = voice.noise * (rng.random::<f64>() - 0.5);
            let tone = match block {
                // Steady low tone.
                Block::A => 0.6 * (tau * voice.f_a * t).sin(),
                // Pulsed higher tone.
                Block::B => {
                    let gate = 0.5 * (1.0 - (tau * voice.beat * t).cos());
                    0.8 * gate * (tau * voice.f_b * t).sin()
                }
                // Broadband noise burst.
                Block::C => 0.7 * (rng.random::<f64>() - 0.5),
            };
            tone + noise
        })
        .collect()
}

fn recording(label: MurmurLabel, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<Signal> {
    let rate = spec.sample_rate as f64;
    let block_len = (spec.block_s * rate).round() as usize;
    let voice = Voice {
        f_a: 120.0 * rng.random_range(0.9..1.1),
        f_b: 320.0 * rng.random_range(0.9..1.1),
        beat: 1.2 * rng.random_range(0.8..1.2),
        noise: rng.random_range(0.02..0.08),
    };
    let mut samples = Vec::with_capacity(5 * block_len);
    for block in pattern(label) {
        let offset = samples.len();
        samples.extend(render_block(block, &voice, block_len, rate, offset, rng));
    }
    Signal::new(samples, spec.sample_rate)
}

/// Writes `<id>.txt` metadata and `<id>_<LOC>.wav` audio for every patient.
/// Returns the number of patients written.
pub fn write_synthetic_dataset(dir: &Path, spec: &SynthSpec) -> Result<usize> {
    if spec.patients_per_class == 0 || spec.recordings_per_patient == 0 {
        return Err(Error::InvalidArgument(
            "synthetic dataset needs patients and recordings".into(),
        ));
    }
    if spec.recordings_per_patient > LOCATIONS.len() {
        return Err(Error::InvalidArgument(format!(
            "at most {} recordings per patient",
            LOCATIONS.len()
        )));
    }
    create_dir(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut written = 0;
    for label in MurmurLabel::ALL {
        for _ in 0..spec.patients_per_class {
            let id = format!("{}", 50_000 + written);
            let locations = &LOCATIONS[..spec.recordings_per_patient];
            let mut text = format!("{id} {} {}\n", locations.len(), spec.sample_rate);
            for loc in locations {
                text += &format!("{loc} {id}_{loc}.hea {id}_{loc}.wav {id}_{loc}.tsv\n");
                write_wav(
                    &dir.join(format!("{id}_{loc}.wav")),
                    &recording(label, spec, &mut rng)?,
                )?;
            }
            text += &format!("#Age: Child\n#Murmur: {label}\n#Outcome: Normal\n");
            write_text(&dir.join(format!("{id}.txt")), &text)?;
            written += 1;
        }
    }
    Ok(written)
}

/// A run configuration sized for synthetic data: 1 kHz audio, a shallower
/// scattering network and log-compressed coefficients.
pub fn synthetic_run_config(dataset_dir: &Path, output_dir: &Path) -> RunConfig {
    let mut cfg = RunConfig {
        dataset_dir: dataset_dir.to_path_buf(),
        output_dir: output_dir.to_path_buf(),
        grouping: Grouping::PerRecording,
        log_coeffs: true,
        ..RunConfig::default()
    };
    cfg.pipeline.target_rate = 1000;
    cfg.pipeline.segment = SegmentPolicy::default();
    cfg.scattering = ScatteringConfig {
        j: 6,
        q: vec![4, 1],
        segment_len: cfg.pipeline.segment.window_samples(1000),
        ..ScatteringConfig::default()
    };
    cfg
}
