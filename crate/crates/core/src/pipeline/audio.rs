use std::path::Path;

use crate::error::{Error, Result};
use crate::scattering::Signal;

/// Decodes a PCM or float WAV, averaging channels to mono, scaled to [-1, 1].
pub fn read_wav(path: &Path) -> Result<Signal> {
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?
        }
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
    };
    let mono: Vec<f64> = interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    Signal::new(mono, spec.sample_rate).map_err(|e| e.context(path.display().to_string()))
}

/// Writes 16-bit mono PCM, clipping to [-1, 1].
pub fn write_wav(path: &Path, signal: &Signal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &v in signal.samples() {
        let q = (v.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16;
        writer.write_sample(q).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}

/// Scales so that `max |x| = 1`; silent input is returned unchanged.
pub fn peak_normalize(samples: &mut [f64]) {
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        samples.iter_mut().for_each(|v| *v /= peak);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wav_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let samples: Vec<f64> = (0..400).map(|i| (i as f64 * 0.05).sin() * 0.8).collect();
        write_wav(&path, &Signal::new(samples.clone(), 8000).unwrap()).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate(), 8000);
        for (a, b) in samples.iter().zip(back.samples()) {
            assert!((a - b).abs() < 2.0 / 32767.0);
        }
    }

    #[test]
    fn stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 4000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for _ in 0..10 {
            w.write_sample(16384i16).unwrap();
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        let s = read_wav(&path).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.samples().iter().all(|&v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_wav(Path::new("/nonexistent/x.wav")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.wav"));
    }

    #[test]
    fn peak_normalization() {
        let mut x = vec![0.5, -2.0, 1.0];
        peak_normalize(&mut x);
        assert_eq!(x, vec![0.25, -1.0, 0.5]);
        let mut z = vec![0.0; 3];
        peak_normalize(&mut z);
        assert_eq!(z, vec![0.0; 3]);
    }
}
