use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{bail, Result};

/// HTK Mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * Float::log10(1.0 + hz / 700.0)
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (Float::powf(10.0, mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the Mel scale, applied to a
/// one-sided power spectrum of `fft_size / 2 + 1` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MelBank {
    pub n_mels: usize,
    pub fft_size: usize,
    pub sample_rate: u32,
    pub fmin: f64,
    pub fmax: f64,
    /// `n_mels x (fft_size / 2 + 1)`, row-major.
    pub weights: Vec<f64>,
}

impl MelBank {
    pub fn new(n_mels: usize, fft_size: usize, sample_rate: u32, fmin: f64, fmax: f64) -> Result<Self> {
        let nyquist = sample_rate as f64 / 2.0;
        if n_mels == 0 || fft_size < 2 {
            bail!(Config, "mel bank needs n_mels > 0 and fft_size >= 2");
        }
        if !(0.0 <= fmin && fmin < fmax && fmax <= nyquist) {
            bail!(Config, "mel range must satisfy 0 <= fmin < fmax <= {nyquist}, got {fmin}..{fmax}");
        }
        let bins = fft_size / 2 + 1;
        let edges: Vec<f64> = {
            let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
            (0..n_mels + 2)
                .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
                .collect()
        };
        let bin_hz = sample_rate as f64 / fft_size as f64;
        let mut weights = Vec::with_capacity(n_mels * bins);
        for m in 0..n_mels {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..bins {
                let f = k as f64 * bin_hz;
                let up = (f - left) / (center - left);
                let down = (right - f) / (right - center);
                weights.push(up.min(down).max(0.0));
            }
        }
        Ok(Self { n_mels, fft_size, sample_rate, fmin, fmax, weights })
    }

    /// Defaults for a sample rate: FFT size for a 25 ms frame, 20 Hz up to
    /// Nyquist minus 400 Hz.
    pub fn standard(n_mels: usize, sample_rate: u32, frame_len: usize) -> Result<Self> {
        let fft_size = frame_len.next_power_of_two();
        Self::new(n_mels, fft_size, sample_rate, 20.0, sample_rate as f64 / 2.0 - 400.0)
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn row(&self, m: usize) -> &[f64] {
        let b = self.bins();
        &self.weights[m * b..(m + 1) * b]
    }

    /// Peak frequency of each filter in Hz.
    pub fn centers(&self) -> Vec<f64> {
        let (lo, hi) = (hz_to_mel(self.fmin), hz_to_mel(self.fmax));
        (1..=self.n_mels)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (self.n_mels + 1) as f64))
            .collect()
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        (0..self.n_mels)
            .map(|m| self.row(m).iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}
