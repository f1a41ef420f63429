use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sctf_core::scattering::{
    build_filter_bank, scattering_transform, scattering_transform_direct, ScatteringConfig,
    ScatteringMatrix, Signal,
};

fn cfg(j: u32, q: Vec<u32>, segment_len: usize) -> ScatteringConfig {
    ScatteringConfig {
        j,
        max_order: q.len(),
        q,
        segment_len,
        oversampling: 0,
    }
}

fn random_signal(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Sum of a few random sinusoids in a band, i.e. a smooth band-limited signal.
fn band_limited(len: usize, seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tones: Vec<(f64, f64, f64)> = (0..12)
        .map(|_| {
            (
                rng.random_range(lo..hi),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.2..1.0),
            )
        })
        .collect();
    (0..len)
        .map(|n| {
            tones
                .iter()
                .map(|(f, ph, a)| a * (std::f64::consts::TAU * f * n as f64 + ph).sin())
                .sum::<f64>()
                / 12.0
        })
        .collect()
}

fn frobenius(a: &ScatteringMatrix, b: &ScatteringMatrix) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn norm(m: &ScatteringMatrix) -> f64 {
    m.values().iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn fast_matches_direct_across_lengths() {
    for (len, config) in [
        (128, cfg(3, vec![4, 1], 128)),
        (256, cfg(4, vec![4, 2], 256)),
        (512, cfg(5, vec![2, 1], 512)),
    ] {
        let bank = build_filter_bank(&config, 8000).unwrap();
        for seed in 0..50 {
            let s = Signal::new(random_signal(len, seed), 8000).unwrap();
            let fast = scattering_transform(&s, &bank, &config).unwrap();
            let direct = scattering_transform_direct(&s, &bank, &config).unwrap();
            let rel = frobenius(&fast, &direct) / norm(&direct);
            assert!(rel <= 1e-6, "len {len} seed {seed}: relative error {rel}");
        }
    }
}

#[test]
fn sine_peaks_at_nearest_wavelet() {
    let config = cfg(6, vec![8], 1024);
    let bank = build_filter_bank(&config, 8000).unwrap();
    let x: Vec<f64> = (0..1024)
        .map(|n| (std::f64::consts::TAU * 440.0 * n as f64 / 8000.0).sin())
        .collect();
    let s = Signal::new(x, 8000).unwrap();
    let direct = scattering_transform_direct(&s, &bank, &config).unwrap();
    let fast = scattering_transform(&s, &bank, &config).unwrap();

    let argmax = |m: &ScatteringMatrix| {
        (1..m.n_paths())
            .max_by(|&a, &b| m.row(a).sum().partial_cmp(&m.row(b).sum()).unwrap())
            .unwrap()
    };
    let nearest = bank
        .wavelets(1)
        .iter()
        .min_by(|a, b| {
            (a.center_hz - 440.0)
                .abs()
                .partial_cmp(&(b.center_hz - 440.0).abs())
                .unwrap()
        })
        .unwrap();
    assert_eq!(direct.paths()[argmax(&direct)].scales, vec![nearest.lambda]);
    assert_eq!(argmax(&fast), argmax(&direct));
}

#[test]
fn non_expansive() {
    let config = cfg(5, vec![8, 1], 1024);
    let bank = build_filter_bank(&config, 8000).unwrap();
    for seed in 0..20 {
        let f = random_signal(1024, 2 * seed);
        let g = random_signal(1024, 2 * seed + 1);
        let diff: f64 = f
            .iter()
            .zip(&g)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let sf = scattering_transform(&Signal::new(f, 8000).unwrap(), &bank, &config).unwrap();
        let sg = scattering_transform(&Signal::new(g, 8000).unwrap(), &bank, &config).unwrap();
        assert!(frobenius(&sf, &sg) <= diff * (1.0 + 1e-6));
    }
}

#[test]
fn more_stable_to_translation_than_the_signal() {
    let config = cfg(6, vec![8, 1], 2048);
    let bank = build_filter_bank(&config, 8000).unwrap();
    let max_shift = (1usize << config.j) / 8;
    for seed in 0..10 {
        let long = band_limited(2048 + max_shift, seed, 0.02, 0.2);
        let base = &long[..2048];
        let s_base =
            scattering_transform(&Signal::new(base.to_vec(), 8000).unwrap(), &bank, &config)
                .unwrap();
        for shift in 1..=max_shift {
            let moved = &long[shift..shift + 2048];
            let raw = base
                .iter()
                .zip(moved)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                / base.iter().map(|v| v * v).sum::<f64>().sqrt();
            let s_moved =
                scattering_transform(&Signal::new(moved.to_vec(), 8000).unwrap(), &bank, &config)
                    .unwrap();
            let scat = frobenius(&s_base, &s_moved) / norm(&s_base);
            assert!(scat <= raw, "seed {seed} shift {shift}: {scat} > {raw}");
        }
    }
}

#[test]
fn nonnegative_and_deterministic() {
    let config = cfg(5, vec![4, 2], 700);
    let bank = build_filter_bank(&config, 8000).unwrap();
    for seed in 0..5 {
        let s = Signal::new(random_signal(700, seed), 8000).unwrap();
        let a = scattering_transform(&s, &bank, &config).unwrap();
        let b = scattering_transform(&s, &bank, &config).unwrap();
        assert!(a.values().iter().all(|&v| v >= 0.0));
        let bits =
            |m: &ScatteringMatrix| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}

#[test]
fn bank_is_shareable_across_threads() {
    let config = cfg(4, vec![4], 256);
    let bank = std::sync::Arc::new(build_filter_bank(&config, 8000).unwrap());
    let handles: Vec<_> = (0..4)
        .map(|seed| {
            let bank = bank.clone();
            let config = config.clone();
            std::thread::spawn(move || {
                let s = Signal::new(random_signal(256, seed), 8000).unwrap();
                scattering_transform(&s, &bank, &config).unwrap()
            })
        })
        .collect();
    for (seed, h) in handles.into_iter().enumerate() {
        let threaded = h.join().unwrap();
        let s = Signal::new(random_signal(256, seed as u64), 8000).unwrap();
        assert_eq!(threaded, scattering_transform(&s, &bank, &config).unwrap());
    }
}
