//! Welch power spectral density.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumBin {
    pub freq: f64,
    /// One-sided PSD (m^2/Hz).
    pub psd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowInfo {
    pub name: &'static str,
    pub segment_len: usize,
    pub overlap: f64,
    pub segments: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<SpectrumBin>,
    pub resolution: f64,
    pub window: WindowInfo,
}

impl Spectrum {
    /// Rectangle-rule integral of the PSD, i.e. the variance it accounts for.
    pub fn total_power(&self) -> f64 {
        self.bins.iter().map(|b| b.psd).sum::<f64>() * self.resolution
    }

    fn index_of(&self, freq: f64) -> usize {
        ((freq / self.resolution).round() as usize).min(self.bins.len() - 1)
    }
}

/// Averaged periodogram with a periodic Hann window, mean removed per segment,
/// and consecutive segments overlapping by `overlap` of their length.
pub fn psd(samples: &[f64], sample_rate: f64, segment_len: usize, overlap: f64) -> Result<Spectrum> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sample rate must be > 0, got {sample_rate}"
        )));
    }
    if segment_len < 2 || !segment_len.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "segment length must be a power of two >= 2, got {segment_len}"
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidInput(format!(
            "overlap must lie in [0, 1), got {overlap}"
        )));
    }
    if samples.len() < segment_len {
        return Err(Error::InvalidInput(format!(
            "{} samples cannot fill one segment of {segment_len}",
            samples.len()
        )));
    }
    if let Some(x) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite sample {x}")));
    }

    let n = segment_len;
    let hop = ((n as f64 * (1.0 - overlap)).round() as usize).max(1);
    let segments = (samples.len() - n) / hop + 1;
    let window: Vec<f64> = (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect();
    let w_energy: f64 = window.iter().map(|w| w * w).sum();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let half = n / 2;
    let mut acc = vec![0.0; half + 1];
    for s in 0..segments {
        let seg = &samples[s * hop..s * hop + n];
        let mean = seg.iter().sum::<f64>() / n as f64;
        for ((b, x), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }

    let scale = 1.0 / (sample_rate * w_energy * segments as f64);
    let resolution = sample_rate / n as f64;
    let bins = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || k == half { 1.0 } else { 2.0 };
            SpectrumBin {
                freq: k as f64 * resolution,
                psd: a * scale * one_sided,
            }
        })
        .collect();
    Ok(Spectrum {
        bins,
        resolution,
        window: WindowInfo {
            name: "hann",
            segment_len: n,
            overlap,
            segments,
        },
    })
}

/// Frequency of the dominant spectral peak near `freq`, if there is one.
///
/// The peak is the largest bin in `[freq / band, freq * band]`. It counts as
/// dominant when it lies within `max(tolerance, resolution)` of `freq`, is a
/// local maximum, and exceeds `prominence` times the larger PSD value at the
/// two band edges. For a tone pass `tolerance = 0` (one bin); for a resonance
/// of quality factor `q`, `freq / (2 q)` is its half-power half-width.
pub fn dominant_peak_near(spectrum: &Spectrum, freq: f64, band: f64, tolerance: f64, prominence: f64) -> Option<f64> {
    if spectrum.bins.len() < 3 || !(band > 1.0) || !(freq > 0.0) {
        return None;
    }
    let lo = spectrum.index_of(freq / band).max(1);
    let hi = spectrum.index_of(freq * band).min(spectrum.bins.len() - 2);
    if lo >= hi {
        return None;
    }
    let (k, peak) = (lo..=hi)
        .map(|k| (k, spectrum.bins[k].psd))
        .fold((lo, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
    let b = &spectrum.bins;
    let local_max = peak >= b[k - 1].psd && peak >= b[k + 1].psd;
    let edge = b[lo].psd.max(b[hi].psd);
    let near = (b[k].freq - freq).abs() <= tolerance.max(spectrum.resolution);
    (local_max && near && peak > prominence * edge).then_some(b[k].freq)
}
