use serde::{Deserialize, Serialize};

use crate::classifier::MurmurLabel;
use crate::error::{Error, Result};
use crate::scattering::Signal;

/// Windowing thresholds, in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentPolicy {
    pub window_s: f64,
    pub hop_s: f64,
    /// Audio left uncovered after the last full window (or a recording
    /// shorter than one window) is kept, zero-padded, when at least this
    /// fraction of a window long.
    pub pad_fraction: f64,
    /// Recordings shorter than this are dropped.
    pub min_duration_s: f64,
}

impl Default for SegmentPolicy {
    fn default() -> Self {
        Self {
            window_s: 5.0,
            hop_s: 2.5,
            pad_fraction: 0.6,
            min_duration_s: 3.0,
        }
    }
}

impl SegmentPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_s > 0.0 && self.hop_s > 0.0) {
            return Err(Error::InvalidConfig(
                "segment window and hop must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.pad_fraction) {
            return Err(Error::InvalidConfig(
                "pad_fraction must lie in [0, 1]".into(),
            ));
        }
        if self.min_duration_s < 0.0 {
            return Err(Error::InvalidConfig(
                "min_duration_s must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn window_samples(&self, rate: u32) -> usize {
        (self.window_s * rate as f64).round() as usize
    }

    pub fn hop_samples(&self, rate: u32) -> usize {
        (self.hop_s * rate as f64).round().max(1.0) as usize
    }
}

/// Start offsets of every window kept for a recording of `len` samples.
pub fn segment_starts(len: usize, rate: u32, policy: &SegmentPolicy) -> Vec<usize> {
    let win = policy.window_samples(rate);
    let hop = policy.hop_samples(rate);
    let min_len = (policy.min_duration_s * rate as f64).round() as usize;
    let keep_tail = |tail: usize| tail > 0 && tail as f64 >= policy.pad_fraction * win as f64;
    if len < min_len.max(1) {
        return Vec::new();
    }
    if len < win {
        return if keep_tail(len) { vec![0] } else { Vec::new() };
    }
    let count = (len - win) / hop + 1;
    let mut starts: Vec<usize> = (0..count).map(|i| i * hop).collect();
    let covered = (count - 1) * hop + win;
    if keep_tail(len - covered) {
        starts.push(covered);
    }
    starts
}

/// Cuts a signal into windows, zero-padding a kept tail to full length.
pub fn segment(signal: &Signal, policy: &SegmentPolicy) -> Result<Vec<(usize, Signal)>> {
    let rate = signal.sample_rate();
    let win = policy.window_samples(rate);
    let x = signal.samples();
    segment_starts(x.len(), rate, policy)
        .into_iter()
        .map(|start| {
            let end = (start + win).min(x.len());
            let mut buf = x[start..end].to_vec();
            buf.resize(win, 0.0);
            Ok((start, Signal::new(buf, rate)?))
        })
        .collect()
}

/// One fixed-length window of a patient's recording.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub patient_id: String,
    pub recording_index: usize,
    /// File stem of the source recording.
    pub recording: String,
    pub start_sample: usize,
    pub signal: Signal,
    pub label: MurmurLabel,
}

impl Segment {
    pub fn id(&self) -> String {
        format!(
            "{}/{}/{}",
            self.patient_id, self.recording, self.start_sample
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RATE: u32 = 8000;

    fn starts(seconds: f64) -> Vec<usize> {
        segment_starts(
            (seconds * RATE as f64) as usize,
            RATE,
            &SegmentPolicy::default(),
        )
    }

    #[test]
    fn documented_examples() {
        assert_eq!(starts(10.0), vec![0, 20000, 40000]);
        assert_eq!(starts(20.0).len(), 7);
        assert_eq!(starts(4.0), vec![0]);
        assert_eq!(starts(5.0), vec![0]);
        assert!(starts(2.9).is_empty());
        assert_eq!(starts(3.0), vec![0]);
    }

    #[test]
    fn short_recording_is_zero_padded() {
        let sig = Signal::new(vec![1.0; 32000], RATE).unwrap();
        let segs = segment(&sig, &SegmentPolicy::default()).unwrap();
        assert_eq!(segs.len(), 1);
        let s = segs[0].1.samples();
        assert_eq!(s.len(), 40000);
        assert_eq!(s[31999], 1.0);
        assert!(s[32000..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn long_tail_kept_when_hop_exceeds_pad_threshold() {
        let policy = SegmentPolicy {
            window_s: 1.0,
            hop_s: 1.0,
            pad_fraction: 0.6,
            min_duration_s: 0.0,
        };
        assert_eq!(segment_starts(2700, 1000, &policy), vec![0, 1000, 2000]);
        assert_eq!(segment_starts(2500, 1000, &policy), vec![0, 1000]);
    }

    #[test]
    fn invalid_policy() {
        let p = SegmentPolicy {
            hop_s: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
