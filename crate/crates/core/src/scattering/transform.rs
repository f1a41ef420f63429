use ndarray::Array2;
use rustfft::num_complex::Complex64;

use super::{FilterBank, ScatteringConfig, ScatteringMatrix, Signal};
use crate::error::{Error, Result};

pub(super) fn check_inputs(
    signal: &Signal,
    bank: &FilterBank,
    config: &ScatteringConfig,
) -> Result<()> {
    if bank.config() != config {
        return Err(Error::InvalidConfig(
            "filter bank was built for a different scattering configuration".into(),
        ));
    }
    if signal.len() != config.segment_len {
        return Err(Error::Shape(format!(
            "signal has {} samples, segment length is {}",
            signal.len(),
            config.segment_len
        )));
    }
    if signal.sample_rate() != bank.sample_rate() {
        return Err(Error::Shape(format!(
            "signal sampled at {} Hz, filter bank built for {} Hz",
            signal.sample_rate(),
            bank.sample_rate()
        )));
    }
    if let Some(i) = signal.samples().iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite sample at index {i}")));
    }
    Ok(())
}

struct Workspace<'a> {
    bank: &'a FilterBank,
    scratch: Vec<Complex64>,
}

impl<'a> Workspace<'a> {
    fn new(bank: &'a FilterBank) -> Self {
        let len = bank
            .fft
            .get_inplace_scratch_len()
            .max(bank.ifft.get_inplace_scratch_len())
            .max(bank.ifft_frames.get_inplace_scratch_len());
        Self {
            bank,
            scratch: vec![Complex64::default(); len],
        }
    }

    fn forward_real(&mut self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.bank
            .fft
            .process_with_scratch(&mut buf, &mut self.scratch);
        buf
    }

    /// `|ifft(spectrum * response)|` at full resolution.
    fn band_modulus(&mut self, spectrum: &[Complex64], response: &[f64]) -> Vec<f64> {
        let p = spectrum.len() as f64;
        let mut buf: Vec<Complex64> = spectrum.iter().zip(response).map(|(s, &h)| s * h).collect();
        self.bank
            .ifft
            .process_with_scratch(&mut buf, &mut self.scratch);
        buf.iter().map(|c| c.norm() / p).collect()
    }

    /// Low-pass filters `spectrum` and samples the result at the output frames.
    ///
    /// Subsampling by `s` in time equals folding the spectrum into `P / s`
    /// bins, so only a short inverse transform is needed.
    fn low_pass_frames(&mut self, spectrum: &[Complex64]) -> Vec<f64> {
        let g = self.bank.geometry();
        let phi = &self.bank.low_pass().response;
        let short = g.padded_len / g.stride;
        let mut folded = vec![Complex64::default(); short];
        for (k, (s, &h)) in spectrum.iter().zip(phi).enumerate() {
            folded[k % short] += s * h;
        }
        self.bank
            .ifft_frames
            .process_with_scratch(&mut folded, &mut self.scratch);
        let norm = g.padded_len as f64;
        let first = g.pad_left / g.stride;
        folded[first..first + g.n_frames]
            .iter()
            .map(|c| (c.re / norm).max(0.0))
            .collect()
    }
}

/// Computes the scattering matrix of one segment in the frequency domain.
///
/// The segment is reflection-padded to the bank's power-of-two length, every
/// convolution is a pointwise product of spectra, and rows come out in the
/// bank's canonical path order.
pub fn scattering_transform(
    signal: &Signal,
    bank: &FilterBank,
    config: &ScatteringConfig,
) -> Result<ScatteringMatrix> {
    check_inputs(signal, bank, config)?;
    let g = *bank.geometry();
    let mut ws = Workspace::new(bank);

    let padded = g.pad(signal.samples());
    let spectrum = ws.forward_real(&padded);

    let n_paths = bank.paths().len();
    let mut values = Array2::<f64>::zeros((n_paths, g.n_frames));
    values
        .row_mut(0)
        .assign(&ndarray::Array1::from(ws.low_pass_frames(&spectrum)));

    let n_first = bank.wavelets(1).len();
    let mut second_row = 1 + n_first;
    for (i, first) in bank.wavelets(1).iter().enumerate() {
        let envelope = ws.band_modulus(&spectrum, &first.response);
        let envelope_spectrum = ws.forward_real(&envelope);
        let row = ws.low_pass_frames(&envelope_spectrum);
        values.row_mut(1 + i).assign(&ndarray::Array1::from(row));

        if config.max_order == 2 {
            for &l2 in bank.children(first.lambda) {
                let second = &bank.wavelets(2)[l2];
                let u2 = ws.band_modulus(&envelope_spectrum, &second.response);
                let u2_spectrum = ws.forward_real(&u2);
                let row = ws.low_pass_frames(&u2_spectrum);
                values
                    .row_mut(second_row)
                    .assign(&ndarray::Array1::from(row));
                second_row += 1;
            }
        }
    }
    debug_assert_eq!(
        second_row,
        if config.max_order == 2 {
            n_paths
        } else {
            1 + n_first
        }
    );

    ScatteringMatrix::new(values, bank.paths().to_vec(), bank.frame_rate())
}
