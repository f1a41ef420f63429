use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{PathDescriptor, ScatteringConfig};
use crate::error::{Error, Result};

/// Center frequency of the highest wavelet, in cycles per sample.
pub const XI_MAX: f64 = 0.35;

/// Width of the low-pass at `J = 0`, in cycles per sample; halves per octave.
const SIGMA_PHI_0: f64 = 0.1;

/// Padding and subsampling layout shared by the fast and direct transforms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geometry {
    pub segment_len: usize,
    /// Power-of-two working length after reflection padding.
    pub padded_len: usize,
    /// Samples prepended to the signal; a multiple of `stride`.
    pub pad_left: usize,
    pub stride: usize,
    pub n_frames: usize,
}

impl Geometry {
    fn new(config: &ScatteringConfig) -> Self {
        let margin = 1usize << config.j;
        let segment_len = config.segment_len;
        let stride = config.stride();
        let padded_len = (segment_len + 2 * margin).next_power_of_two();
        let pad_left = (padded_len - segment_len) / 2 / stride * stride;
        Self {
            segment_len,
            padded_len,
            pad_left,
            stride,
            n_frames: config.n_frames(),
        }
    }

    /// Position in the padded buffer of output frame `t`.
    pub fn frame_position(&self, t: usize) -> usize {
        self.pad_left + t * self.stride
    }

    /// Reflection-pads `x` (mirror about the end samples, edges not repeated).
    pub fn pad(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len() as i64;
        let period = 2 * (n - 1).max(1);
        (0..self.padded_len)
            .map(|i| {
                if n == 1 {
                    return x[0];
                }
                let p = (i as i64 - self.pad_left as i64).rem_euclid(period);
                let idx = if p >= n { period - p } else { p };
                x[idx as usize]
            })
            .collect()
    }

    /// Signed frequency of DFT bin `k`, in cycles per sample.
    pub fn frequency(&self, k: usize) -> f64 {
        let p = self.padded_len;
        if k <= p / 2 {
            k as f64 / p as f64
        } else {
            (k as f64 - p as f64) / p as f64
        }
    }
}

/// One analytic Morlet band-pass filter, sampled on the padded DFT grid.
#[derive(Clone, Debug)]
pub struct Wavelet {
    /// Index within its order's family; 0 is the highest frequency.
    pub lambda: usize,
    /// Center frequency, cycles per sample.
    pub xi: f64,
    /// Gaussian width, cycles per sample.
    pub sigma: f64,
    pub center_hz: f64,
    /// Real, nonnegative frequency response; zero on negative frequencies.
    pub response: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LowPass {
    pub sigma: f64,
    pub response: Vec<f64>,
}

/// Immutable wavelet and low-pass filters plus the canonical path list.
#[derive(Clone)]
pub struct FilterBank {
    config: ScatteringConfig,
    sample_rate: u32,
    geometry: Geometry,
    psi: Vec<Vec<Wavelet>>,
    phi: LowPass,
    paths: Vec<PathDescriptor>,
    children: Vec<Vec<usize>>,
    pub(super) fft: Arc<dyn Fft<f64>>,
    pub(super) ifft: Arc<dyn Fft<f64>>,
    pub(super) ifft_frames: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FilterBank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FilterBank")
            .field("config", &self.config)
            .field("sample_rate", &self.sample_rate)
            .field("geometry", &self.geometry)
            .field("n_paths", &self.paths.len())
            .finish()
    }
}

impl FilterBank {
    pub fn config(&self) -> &ScatteringConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Band-pass family of scattering order `order` (1-based).
    pub fn wavelets(&self, order: usize) -> &[Wavelet] {
        &self.psi[order - 1]
    }

    pub fn low_pass(&self) -> &LowPass {
        &self.phi
    }

    pub fn paths(&self) -> &[PathDescriptor] {
        &self.paths
    }

    /// Second-order wavelets admissible after first-order wavelet `lambda1`.
    pub fn children(&self, lambda1: usize) -> &[usize] {
        self.children.get(lambda1).map_or(&[], Vec::as_slice)
    }

    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.geometry.stride as f64
    }

    /// Littlewood-Paley sum `|phi|^2 + (|psi(w)|^2 + |psi(-w)|^2) / 2` over the
    /// family of `order`, per DFT bin. Real inputs see this energy response.
    pub fn littlewood_paley(&self, order: usize) -> Vec<f64> {
        littlewood_paley_sum(&self.phi.response, &self.psi[order - 1])
    }
}

fn littlewood_paley_sum(phi: &[f64], family: &[Wavelet]) -> Vec<f64> {
    let p = phi.len();
    (0..p)
        .map(|k| {
            let mirror = (p - k) % p;
            let band: f64 = family
                .iter()
                .map(|w| w.response[k].powi(2) + w.response[mirror].powi(2))
                .sum();
            phi[k].powi(2) + 0.5 * band
        })
        .collect()
}

/// Bandwidth giving half-power crossings between neighbours `2^(1/q)` apart.
fn morlet_sigma(xi: f64, q: u32) -> f64 {
    xi * (1.0 - 2f64.powf(-1.0 / q as f64)) / (2.0 * std::f64::consts::LN_2.sqrt())
}

fn morlet_family(
    j: u32,
    q: u32,
    geometry: &Geometry,
    sample_rate: u32,
    ifft: &Arc<dyn Fft<f64>>,
) -> Vec<Wavelet> {
    let p = geometry.padded_len;
    let count = (j * q) as usize;
    (0..count)
        .map(|lambda| {
            let xi = XI_MAX * 2f64.powf(-(lambda as f64) / q as f64);
            let sigma = morlet_sigma(xi, q);
            let two_var = 2.0 * sigma * sigma;
            // Gabor minus a scaled Gaussian so the response vanishes at DC:
            // G(f - xi) - G(-xi) G(f) = G(f - xi) (1 - exp(-f xi / sigma^2)).
            let mut response: Vec<f64> = (0..p)
                .map(|k| {
                    let f = geometry.frequency(k);
                    if f <= 0.0 {
                        0.0
                    } else {
                        (-(f - xi).powi(2) / two_var).exp() * -(-f * xi / (sigma * sigma)).exp_m1()
                    }
                })
                .collect();
            let l1 = time_domain_l1(&response, ifft);
            response.iter_mut().for_each(|v| *v /= l1);
            Wavelet {
                lambda,
                xi,
                sigma,
                center_hz: xi * sample_rate as f64,
                response,
            }
        })
        .collect()
}

fn time_domain_l1(response: &[f64], ifft: &Arc<dyn Fft<f64>>) -> f64 {
    let p = response.len() as f64;
    let mut buf: Vec<Complex64> = response.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    ifft.process(&mut buf);
    buf.iter().map(|c| c.norm()).sum::<f64>() / p
}

/// Largest gain `<= 1` applied to a family keeping its Littlewood-Paley sum at or below one.
fn frame_scale(phi: &[f64], family: &[Wavelet]) -> f64 {
    let p = phi.len();
    let mut scale_sq = 1.0f64;
    for (k, &lp) in phi.iter().enumerate() {
        let mirror = (p - k) % p;
        let band: f64 = 0.5
            * family
                .iter()
                .map(|w| w.response[k].powi(2) + w.response[mirror].powi(2))
                .sum::<f64>();
        if band > 0.0 {
            let room = (1.0 - lp * lp).max(0.0);
            scale_sq = scale_sq.min(room / band);
        }
    }
    scale_sq.sqrt()
}

/// Builds Morlet wavelet families and the Gaussian low-pass for `config`.
///
/// Each order `m` gets `J * Q[m]` wavelets with centers `XI_MAX * 2^(-lambda/Q)`.
/// Second-order pairs are kept only when the lower edge of the second wavelet's
/// band (`xi2 - 2 sigma2`) falls inside the first wavelet's envelope band
/// (`2 sigma1`).
pub fn build_filter_bank(config: &ScatteringConfig, sample_rate: u32) -> Result<FilterBank> {
    config.validate()?;
    if sample_rate == 0 {
        return Err(Error::InvalidArgument(
            "sample rate must be positive".into(),
        ));
    }
    let geometry = Geometry::new(config);
    let p = geometry.padded_len;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(p);
    let ifft = planner.plan_fft_inverse(p);
    let ifft_frames = planner.plan_fft_inverse(p / geometry.stride);

    let sigma_phi = SIGMA_PHI_0 / (1u64 << config.j) as f64;
    let phi_response: Vec<f64> = (0..p)
        .map(|k| {
            let f = geometry.frequency(k);
            (-f * f / (2.0 * sigma_phi * sigma_phi)).exp()
        })
        .collect();

    let mut psi = Vec::with_capacity(config.max_order);
    for &q in &config.q {
        let mut family = morlet_family(config.j, q, &geometry, sample_rate, &ifft);
        let scale = frame_scale(&phi_response, &family);
        if scale < 1.0 {
            for w in &mut family {
                w.response.iter_mut().for_each(|v| *v *= scale);
            }
        }
        psi.push(family);
    }

    let mut paths = vec![PathDescriptor::zeroth()];
    paths.extend(psi[0].iter().map(|w| PathDescriptor {
        order: 1,
        scales: vec![w.lambda],
    }));
    let mut children = Vec::new();
    if config.max_order == 2 {
        for first in &psi[0] {
            let admissible: Vec<usize> = psi[1]
                .iter()
                .filter(|second| second.xi - 2.0 * second.sigma < 2.0 * first.sigma)
                .map(|second| second.lambda)
                .collect();
            paths.extend(admissible.iter().map(|&l2| PathDescriptor {
                order: 2,
                scales: vec![first.lambda, l2],
            }));
            children.push(admissible);
        }
    }

    Ok(FilterBank {
        config: config.clone(),
        sample_rate,
        geometry,
        psi,
        phi: LowPass {
            sigma: sigma_phi,
            response: phi_response,
        },
        paths,
        children,
        fft,
        ifft,
        ifft_frames,
    })
}
