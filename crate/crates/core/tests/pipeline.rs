use std::collections::HashSet;
use std::path::Path;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use sctf_core::classifier::MurmurLabel;
use sctf_core::pipeline::{
    load_metadata, oversample, patient_split, resample, segment, segment_starts, write_wav,
    PatientRecord, Recording, SegmentPolicy,
};
use sctf_core::scattering::Signal;

fn sine(freq: f64, rate: u32, len: usize, amp: f64) -> Vec<f64> {
    (0..len)
        .map(|n| amp * (2.0 * std::f64::consts::PI * freq * n as f64 / rate as f64).sin())
        .collect()
}

#[test]
fn same_rate_is_identity() {
    let s = Signal::new(sine(440.0, 8000, 1000, 0.7), 8000).unwrap();
    assert_eq!(resample(&s, 8000).unwrap(), s);
}

#[test]
fn doubling_rate_doubles_length() {
    let s = Signal::new(sine(300.0, 4000, 4000, 1.0), 4000).unwrap();
    let r = resample(&s, 8000).unwrap();
    assert_eq!(r.len(), 8000);
    assert_eq!(r.sample_rate(), 8000);
    // Interpolated values follow the continuous sine away from the edges.
    let reference = sine(300.0, 8000, 8000, 1.0);
    for (n, (a, b)) in r
        .samples()
        .iter()
        .zip(&reference)
        .enumerate()
        .take(7600)
        .skip(400)
    {
        assert!((a - b).abs() < 1e-3, "sample {n}");
    }
}

#[test]
fn one_kilohertz_survives_decimation() {
    let s = Signal::new(sine(1000.0, 32000, 32000 * 2, 1.0), 32000).unwrap();
    let r = resample(&s, 8000).unwrap();
    assert_eq!(r.len(), 16000);
    let n = 4096;
    let start = 6000;
    let mut buf: Vec<Complex<f64>> = r.samples()[start..start + n]
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
            Complex::new(v * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let peak = (0..n / 2)
        .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
        .unwrap();
    let expected = 1000.0 / 8000.0 * n as f64;
    assert!((peak as f64 - expected).abs() <= 1.0, "peak at bin {peak}");

    let mid = &r.samples()[2000..14000];
    let rms = (mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64).sqrt();
    let gain = rms * std::f64::consts::SQRT_2;
    assert!((gain - 1.0).abs() < 0.01, "passband gain {gain}");
}

#[test]
fn content_above_target_nyquist_is_rejected() {
    let s = Signal::new(sine(6000.0, 32000, 32000, 1.0), 32000).unwrap();
    let r = resample(&s, 8000).unwrap();
    let mid = &r.samples()[1000..7000];
    let peak = mid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(peak < 1e-3, "alias leaked with amplitude {peak}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn resampling_is_linear(
        samples in prop::collection::vec(-1.0f64..1.0, 50..400),
        a in -10.0f64..10.0,
        rates in prop::sample::select(vec![(44100u32, 8000u32), (4000, 8000), (2000, 8000), (16000, 8000)]),
    ) {
        let base = resample(&Signal::new(samples.clone(), rates.0).unwrap(), rates.1).unwrap();
        let scaled_in: Vec<f64> = samples.iter().map(|v| a * v).collect();
        let scaled = resample(&Signal::new(scaled_in, rates.0).unwrap(), rates.1).unwrap();
        for (x, y) in base.samples().iter().zip(scaled.samples()) {
            prop_assert!((a * x - y).abs() <= 1e-9);
        }
    }
}

#[test]
fn segment_counts_match_closed_form() {
    let policy = SegmentPolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let len = rng.random_range(40_000..2_000_000usize);
        let starts = segment_starts(len, 8000, &policy);
        assert_eq!(starts.len(), (len - 40_000) / 20_000 + 1, "len {len}");
        assert!(starts.iter().all(|&s| s + 40_000 <= len));
    }
}

#[test]
fn every_segment_is_full_length() {
    let sig = Signal::new(vec![0.1; 8000 * 13], 8000).unwrap();
    let segs = segment(&sig, &SegmentPolicy::default()).unwrap();
    assert_eq!(segs.len(), 4);
    assert_eq!(segs.last().unwrap().0, 60_000);
    assert!(segs
        .iter()
        .all(|(_, s)| s.len() == 40_000 && s.sample_rate() == 8000));
}

fn patients(counts: [usize; 3]) -> Vec<PatientRecord> {
    let mut out = Vec::new();
    let mut id = 0;
    for (k, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            out.push(PatientRecord {
                patient_id: format!("{}", 1000 + id),
                label: MurmurLabel::ALL[k],
                recordings: vec![Recording {
                    location: "AV".into(),
                    audio_path: format!("{}_AV.wav", 1000 + id).into(),
                }],
            });
            id += 1;
        }
    }
    out
}

#[test]
fn split_of_one_hundred_patients() {
    let records = patients([30, 20, 50]);
    for seed in 0..10 {
        let split = patient_split(&records, 0.75, seed).unwrap();
        assert_eq!(split.train.len(), 75);
        assert_eq!(split.test.len(), 25);
        for (k, &n) in [30usize, 20, 50].iter().enumerate() {
            let train = split
                .train
                .iter()
                .filter(|r| r.label == MurmurLabel::ALL[k])
                .count();
            assert!((train as f64 - 0.75 * n as f64).abs() <= 1.0);
        }
        assert_eq!(split, patient_split(&records, 0.75, seed).unwrap());
    }
    assert_ne!(
        patient_split(&records, 0.75, 1).unwrap().test,
        patient_split(&records, 0.75, 2).unwrap().test
    );
}

#[test]
fn split_ignores_input_order() {
    let records = patients([7, 5, 13]);
    let mut reversed = records.clone();
    reversed.reverse();
    assert_eq!(
        patient_split(&records, 0.75, 9).unwrap(),
        patient_split(&reversed, 0.75, 9).unwrap()
    );
}

#[test]
fn singleton_class_goes_to_train() {
    let records = patients([1, 4, 8]);
    let split = patient_split(&records, 0.75, 0).unwrap();
    assert!(split.train.iter().any(|r| r.label == MurmurLabel::Present));
    assert!(split.test.iter().all(|r| r.label != MurmurLabel::Present));
}

#[test]
fn split_rejects_tiny_or_duplicate_input() {
    assert!(patient_split(&[], 0.75, 0).is_err());
    let singletons = patient_split(&patients([1, 1, 1]), 0.75, 0).unwrap();
    assert_eq!((singletons.train.len(), singletons.test.len()), (3, 0));
    let mut dup = patients([2, 2, 2]);
    dup[1].patient_id = dup[0].patient_id.clone();
    assert!(patient_split(&dup, 0.75, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn splits_are_disjoint_and_proportional(p in 2usize..40, u in 2usize..40, a in 2usize..80, seed in any::<u64>()) {
        let records = patients([p, u, a]);
        let split = patient_split(&records, 0.75, seed).unwrap();
        let train: HashSet<&str> = split.train.iter().map(|r| r.patient_id.as_str()).collect();
        prop_assert!(split.test.iter().all(|r| !train.contains(r.patient_id.as_str())));
        prop_assert_eq!(split.train.len() + split.test.len(), records.len());
        let total = records.len() as f64;
        prop_assert!((split.train.len() as f64 - 0.75 * total).abs() <= 1.0);
        for (k, &n) in [p, u, a].iter().enumerate() {
            let t = split.train.iter().filter(|r| r.label == MurmurLabel::ALL[k]).count();
            prop_assert!((t as f64 - 0.75 * n as f64).abs() <= 1.0);
        }
    }
}

#[test]
fn oversampled_histograms_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..20u64 {
        let items: Vec<(usize, MurmurLabel)> = (0..rng.random_range(3..300))
            .map(|i| (i, MurmurLabel::ALL[rng.random_range(0..3)]))
            .chain((0..3).map(|k| (1000 + k, MurmurLabel::ALL[k])))
            .collect();
        let out = oversample(&items, |x| x.1, seed).unwrap();
        let counts: Vec<usize> = MurmurLabel::ALL
            .iter()
            .map(|&l| out.iter().filter(|x| x.1 == l).count())
            .collect();
        assert!(
            counts.iter().all(|&c| c == counts[0]),
            "seed {seed}: {counts:?}"
        );
        assert_eq!(&out[..items.len()], &items[..]);
        assert_eq!(out, oversample(&items, |x| x.1, seed).unwrap());
    }
}

fn write_patient(dir: &Path, id: &str, label: &str, locations: &[&str], with_audio: bool) {
    let mut text = format!("{id} {} 4000\n", locations.len());
    for loc in locations {
        text += &format!("{loc} {id}_{loc}.hea {id}_{loc}.wav {id}_{loc}.tsv\n");
        if with_audio {
            let s = Signal::new(sine(100.0, 4000, 4000 * 6, 0.5), 4000).unwrap();
            write_wav(&dir.join(format!("{id}_{loc}.wav")), &s).unwrap();
        }
    }
    text += &format!("#Age: Child\n#Murmur: {label}\n#Outcome: Normal\n");
    std::fs::write(dir.join(format!("{id}.txt")), text).unwrap();
}

#[test]
fn metadata_fixture() {
    let dir = tempfile::tempdir().unwrap();
    write_patient(dir.path(), "100", "Present", &["AV", "MV"], true);
    write_patient(dir.path(), "101", "Absent", &["PV"], true);
    write_patient(dir.path(), "102", "Unknown", &["TV"], true);
    write_patient(dir.path(), "103", "Absent", &["AV"], false);
    let (records, report) = load_metadata(dir.path()).unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(report.metadata_files, 4);
    assert_eq!(report.skipped_missing_audio, vec!["103".to_string()]);
    let labels: Vec<MurmurLabel> = records.iter().map(|r| r.label).collect();
    assert_eq!(
        labels,
        vec![
            MurmurLabel::Present,
            MurmurLabel::Absent,
            MurmurLabel::Unknown
        ]
    );
    assert_eq!(records[0].recordings.len(), 2);
}

#[test]
fn empty_directory_loads_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let (records, report) = load_metadata(dir.path()).unwrap();
    assert!(records.is_empty());
    assert_eq!(report.loaded, 0);
}
