use ndarray::Array2;
use rustfft::num_complex::Complex64;

use super::transform::check_inputs;
use super::{FilterBank, ScatteringConfig, ScatteringMatrix, Signal};
use crate::error::Result;

struct DirectEvaluator {
    p: usize,
    /// `exp(2 pi i r / P)` for `r` in `0..P`.
    twiddle: Vec<Complex64>,
}

impl DirectEvaluator {
    fn new(p: usize) -> Self {
        let twiddle = (0..p)
            .map(|r| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * r as f64 / p as f64))
            .collect();
        Self { p, twiddle }
    }

    /// Impulse response of a sampled frequency response, by explicit summation.
    fn impulse_response(&self, response: &[f64]) -> Vec<Complex64> {
        let p = self.p;
        (0..p)
            .map(|n| {
                let mut acc = Complex64::default();
                for (k, &h) in response.iter().enumerate() {
                    if h != 0.0 {
                        acc += self.twiddle[(k * n) % p] * h;
                    }
                }
                acc / p as f64
            })
            .collect()
    }

    fn circular_at(&self, x: &[f64], h: &[Complex64], n: usize) -> Complex64 {
        let p = self.p;
        let mut acc = Complex64::default();
        for (m, &xm) in x.iter().enumerate() {
            if xm != 0.0 {
                acc += h[(n + p - m) % p] * xm;
            }
        }
        acc
    }

    fn modulus_of_convolution(&self, x: &[f64], h: &[Complex64]) -> Vec<f64> {
        (0..self.p)
            .map(|n| self.circular_at(x, h, n).norm())
            .collect()
    }
}

/// Reference scattering transform by naive circular convolution.
///
/// Filters are brought to the time domain by explicit DFT sums and every
/// convolution is an O(P^2) loop, so no fast transform is involved. Meant for
/// checking [`scattering_transform`](super::scattering_transform) on short
/// segments (a few thousand samples at most).
pub fn scattering_transform_direct(
    signal: &Signal,
    bank: &FilterBank,
    config: &ScatteringConfig,
) -> Result<ScatteringMatrix> {
    check_inputs(signal, bank, config)?;
    let g = *bank.geometry();
    let eval = DirectEvaluator::new(g.padded_len);
    let phi = eval.impulse_response(&bank.low_pass().response);
    let frames: Vec<usize> = (0..g.n_frames).map(|t| g.frame_position(t)).collect();
    let low_pass = |u: &[f64]| -> Vec<f64> {
        frames
            .iter()
            .map(|&n| eval.circular_at(u, &phi, n).re.max(0.0))
            .collect()
    };

    let x = g.pad(signal.samples());
    let mut values = Array2::<f64>::zeros((bank.paths().len(), g.n_frames));
    let mut put = |row: usize, data: Vec<f64>| {
        for (t, v) in data.into_iter().enumerate() {
            values[[row, t]] = v;
        }
    };
    put(0, low_pass(&x));

    let first_family = bank.wavelets(1);
    let second_filters: Vec<Vec<Complex64>> = if config.max_order == 2 {
        bank.wavelets(2)
            .iter()
            .map(|w| eval.impulse_response(&w.response))
            .collect()
    } else {
        Vec::new()
    };

    let mut second_row = 1 + first_family.len();
    for (i, first) in first_family.iter().enumerate() {
        let h1 = eval.impulse_response(&first.response);
        let u1 = eval.modulus_of_convolution(&x, &h1);
        put(1 + i, low_pass(&u1));
        if config.max_order == 2 {
            for &l2 in bank.children(first.lambda) {
                let u2 = eval.modulus_of_convolution(&u1, &second_filters[l2]);
                put(second_row, low_pass(&u2));
                second_row += 1;
            }
        }
    }

    ScatteringMatrix::new(values, bank.paths().to_vec(), bank.frame_rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scattering::{build_filter_bank, scattering_transform};

    fn cfg(j: u32, q: Vec<u32>, segment_len: usize) -> ScatteringConfig {
        ScatteringConfig {
            j,
            max_order: q.len(),
            q,
            segment_len,
            oversampling: 0,
        }
    }

    #[test]
    fn zero_signal() {
        let c = cfg(3, vec![2, 1], 64);
        let bank = build_filter_bank(&c, 8000).unwrap();
        let sm = scattering_transform_direct(&Signal::new(vec![0.0; 64], 8000).unwrap(), &bank, &c)
            .unwrap();
        assert!(sm.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_rows_follow_filter_envelopes() {
        let c = cfg(4, vec![4], 256);
        let bank = build_filter_bank(&c, 8000).unwrap();
        let g = *bank.geometry();
        let center = 128;
        let mut x = vec![0.0; 256];
        x[center] = 1.0;
        let sm =
            scattering_transform_direct(&Signal::new(x.clone(), 8000).unwrap(), &bank, &c).unwrap();
        let fast = scattering_transform(&Signal::new(x, 8000).unwrap(), &bank, &c).unwrap();

        let eval = DirectEvaluator::new(g.padded_len);
        let phi = eval.impulse_response(&bank.low_pass().response);
        // Reflection padding mirrors the impulse into the margins as well.
        let images: Vec<usize> = g
            .pad(&{
                let mut v = vec![0.0; 256];
                v[center] = 1.0;
                v
            })
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == 1.0)
            .map(|(n, _)| n)
            .collect();
        assert!(images.contains(&(g.pad_left + center)));
        for (i, w) in bank.wavelets(1).iter().enumerate() {
            // |delta * psi| is the filter translated to each impulse image.
            let h = eval.impulse_response(&w.response);
            let p = g.padded_len;
            let single: f64 = h.iter().map(|c| c.norm()).sum();
            assert!((single - 1.0).abs() < 1e-9);
            let envelope: Vec<f64> = (0..p)
                .map(|n| {
                    images
                        .iter()
                        .map(|&o| h[(n + p - o) % p])
                        .sum::<Complex64>()
                        .norm()
                })
                .collect();
            for t in 0..g.n_frames {
                let n = g.frame_position(t);
                let expected: f64 = (0..p)
                    .map(|m| envelope[m] * phi[(n + p - m) % p].re)
                    .sum::<f64>()
                    .max(0.0);
                let got = sm.values()[[1 + i, t]];
                assert!(
                    (got - expected).abs() <= 1e-12,
                    "row {i} frame {t}: {got} vs {expected}"
                );
                assert!((fast.values()[[1 + i, t]] - expected).abs() <= 1e-9);
            }
        }
    }
}
