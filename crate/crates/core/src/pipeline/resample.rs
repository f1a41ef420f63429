//! Rational-ratio polyphase resampler.
//!
//! For `dst / src = up / down` in lowest terms, output sample `m` sits at input
//! time `m * down / up`. Its fractional part takes one of `up` values, so the
//! windowed-sinc kernel is tabulated once per phase.

use crate::error::{Error, Result};
use crate::scattering::Signal;

/// Kernel half-width, in zero crossings of the prototype low-pass.
const ZERO_CROSSINGS: f64 = 24.0;
const KAISER_BETA: f64 = 8.6;
/// Cutoff as a fraction of the lower of the two rates.
pub const CUTOFF_FRACTION: f64 = 0.45;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

struct PolyphaseBank {
    /// Row `p` holds taps for input offsets `-half+1 ..= half` at phase `p / up`.
    taps: Vec<Vec<f64>>,
    half: i64,
}

impl PolyphaseBank {
    fn new(up: u64, cutoff: f64) -> Self {
        let width = ZERO_CROSSINGS / (2.0 * cutoff);
        let half = width.ceil() as i64;
        let norm = bessel_i0(KAISER_BETA);
        let taps = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut row: Vec<f64> = (-half + 1..=half)
                    .map(|k| {
                        let tau = frac - k as f64;
                        let r = tau / width;
                        if r.abs() >= 1.0 {
                            0.0
                        } else {
                            let w = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm;
                            2.0 * cutoff * sinc(2.0 * cutoff * tau) * w
                        }
                    })
                    .collect();
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= sum);
                row
            })
            .collect();
        Self { taps, half }
    }
}

/// Output length `round(len * dst / src)`.
pub fn resampled_len(len: usize, src: u32, dst: u32) -> usize {
    let num = len as u128 * dst as u128;
    ((2 * num + src as u128) / (2 * src as u128)) as usize
}

pub fn resample(signal: &Signal, target_rate: u32) -> Result<Signal> {
    if target_rate == 0 {
        return Err(Error::InvalidArgument(
            "target sample rate must be positive".into(),
        ));
    }
    let src = signal.sample_rate();
    if src == target_rate {
        return Ok(signal.clone());
    }
    let g = gcd(src as u64, target_rate as u64);
    let up = target_rate as u64 / g;
    let down = src as u64 / g;
    let cutoff = CUTOFF_FRACTION * src.min(target_rate) as f64 / src as f64;
    let bank = PolyphaseBank::new(up, cutoff);

    let x = signal.samples();
    let n_in = x.len() as i64;
    let n_out = resampled_len(x.len(), src, target_rate).max(1);
    let mut out = Vec::with_capacity(n_out);
    for m in 0..n_out as u64 {
        let pos = m * down;
        let base = (pos / up) as i64;
        let row = &bank.taps[(pos % up) as usize];
        let first = base - bank.half + 1;
        let lo = (-first).max(0) as usize;
        let hi = (n_in - first).clamp(0, row.len() as i64) as usize;
        let mut acc = 0.0;
        for (k, &h) in row.iter().enumerate().take(hi).skip(lo) {
            acc += h * x[(first + k as i64) as usize];
        }
        out.push(acc);
    }
    Signal::new(out, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_lengths() {
        assert_eq!(resampled_len(4000, 4000, 8000), 8000);
        assert_eq!(resampled_len(44100, 44100, 8000), 8000);
        assert_eq!(resampled_len(3, 4000, 8000), 6);
        assert_eq!(resampled_len(7, 44100, 8000), 1);
    }

    #[test]
    fn kernel_rows_have_unit_gain() {
        let bank = PolyphaseBank::new(80, 0.45 * 8000.0 / 44100.0);
        for row in &bank.taps {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_target_rejected() {
        let s = Signal::new(vec![0.0; 4], 8000).unwrap();
        assert!(matches!(resample(&s, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn bessel_reference() {
        // I0(1) = 1.2660658777520082
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_2).abs() < 1e-15);
    }
}
