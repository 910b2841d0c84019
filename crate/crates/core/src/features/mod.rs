//! Log-Mel front end and sliding-window mean/variance normalization.

mod fft;
mod mel;

use alloc::vec::Vec;

use core::f64::consts::PI;
use num_traits::Float;

use crate::error::{bail, Result};
use crate::tensor::FeatureMatrix;
use crate::EPS;

pub use mel::{hz_to_mel, mel_to_hz, MelBank};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
/// Floor applied before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

/// Mono audio in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            bail!(Input, "waveform is empty");
        }
        if sample_rate == 0 {
            bail!(Input, "sample rate must be positive");
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            bail!(Input, "sample {i} is outside [-1, 1]: {}", samples[i]);
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameConfig {
    pub frame_ms: f64,
    pub shift_ms: f64,
    pub n_mels: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self { frame_ms: 25.0, shift_ms: 10.0, n_mels: 80 }
    }
}

impl FrameConfig {
    pub fn frame_len(&self, sample_rate: u32) -> usize {
        Float::round(sample_rate as f64 * self.frame_ms / 1000.0) as usize
    }

    pub fn shift_len(&self, sample_rate: u32) -> usize {
        Float::round(sample_rate as f64 * self.shift_ms / 1000.0) as usize
    }

    /// `1 + floor((samples - frame_len) / shift_len)`, or 0 when the signal
    /// is shorter than one frame.
    pub fn num_frames(&self, samples: usize, sample_rate: u32) -> usize {
        let (frame, shift) = (self.frame_len(sample_rate), self.shift_len(sample_rate));
        if samples < frame || shift == 0 {
            0
        } else {
            1 + (samples - frame) / shift
        }
    }
}

/// Symmetric Hamming window.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return alloc::vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * Float::cos(2.0 * PI * n as f64 / (len - 1) as f64))
        .collect()
}

/// `n_mels x T` log-Mel energies: Hamming window, power spectrum, Mel
/// filterbank, natural log floored at [`LOG_FLOOR`].
pub fn extract_logmel(w: &Waveform, cfg: &FrameConfig) -> Result<FeatureMatrix> {
    let frame = cfg.frame_len(w.sample_rate);
    let shift = cfg.shift_len(w.sample_rate);
    if frame == 0 || shift == 0 {
        bail!(Config, "frame and shift must each cover at least one sample");
    }
    let t = cfg.num_frames(w.samples.len(), w.sample_rate);
    if t == 0 {
        bail!(
            Input,
            "waveform has {} samples, shorter than one {frame}-sample frame",
            w.samples.len()
        );
    }
    let bank = MelBank::standard(cfg.n_mels, w.sample_rate, frame)?;
    let window = hamming(frame);
    let mut out = alloc::vec![0.0; cfg.n_mels * t];
    let mut buf = alloc::vec![0.0; frame];
    for i in 0..t {
        let chunk = &w.samples[i * shift..i * shift + frame];
        for ((b, s), h) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = s * h;
        }
        let power = fft::power_spectrum(&buf, bank.fft_size);
        for (m, e) in bank.apply(&power).into_iter().enumerate() {
            out[m * t + i] = Float::ln(e.max(LOG_FLOOR));
        }
    }
    FeatureMatrix::new(cfg.n_mels, t, out)
}

/// Window of `len` frames around frame `t`: centered, shifted inward at
/// the utterance edges, and cut to the utterance when it is shorter.
pub fn cmvn_window(t: usize, frames: usize, len: usize) -> (usize, usize) {
    let start = t.saturating_sub(len / 2).min(frames.saturating_sub(len));
    (start, (start + len).min(frames))
}

/// Per-channel mean and variance normalization over a sliding window of
/// `window_s` seconds at `shift_ms` frame shift.
pub fn sliding_cmvn(f: &FeatureMatrix, window_s: f64, shift_ms: f64) -> Result<FeatureMatrix> {
    if !(window_s > 0.0 && shift_ms > 0.0) {
        bail!(Config, "CMVN window and shift must be positive");
    }
    let len = (Float::round(window_s * 1000.0 / shift_ms) as usize).max(1);
    let (channels, frames) = f.shape();
    let mut out = Vec::with_capacity(channels * frames);
    for c in 0..channels {
        let row = f.row(c);
        // shift by the channel mean so the running sums stay well conditioned
        let shift = row.iter().sum::<f64>() / frames as f64;
        let mut s1 = alloc::vec![0.0; frames + 1];
        let mut s2 = alloc::vec![0.0; frames + 1];
        for (i, &v) in row.iter().enumerate() {
            let d = v - shift;
            s1[i + 1] = s1[i] + d;
            s2[i + 1] = s2[i] + d * d;
        }
        for (t, &v) in row.iter().enumerate() {
            let (a, b) = cmvn_window(t, frames, len);
            let n = (b - a) as f64;
            let mean = (s1[b] - s1[a]) / n;
            let var = ((s2[b] - s2[a]) / n - mean * mean).max(0.0);
            out.push((v - shift - mean) / (var.sqrt() + EPS));
        }
    }
    FeatureMatrix::new(channels, frames, out)
}
