//! Additive angular margin softmax.
//!
//! ```text
//! loss = -log( e^{s cos(theta_y + m)} / (e^{s cos(theta_y + m)} + sum_{j != y} e^{s cos theta_j}) )
//! ```
//!
//! Cosines are clamped to `[-1 + 1e-7, 1 - 1e-7]`; the clamp has zero
//! derivative outside that range.

use alloc::vec::Vec;

use core::f64::consts::FRAC_PI_2;
use num_traits::Float;

use crate::error::{bail, Result};
use crate::tensor::FeatureMatrix;

pub const COS_CLAMP: f64 = 1e-7;
const NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AamConfig {
    /// Additive angular margin in radians.
    pub margin: f64,
    /// Logit scale.
    pub scale: f64,
}

impl Default for AamConfig {
    fn default() -> Self {
        Self { margin: 0.2, scale: 30.0 }
    }
}

impl AamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..FRAC_PI_2).contains(&self.margin) {
            bail!(Config, "AAM margin must lie in [0, pi/2), got {}", self.margin);
        }
        if self.scale.is_nan() || self.scale <= 0.0 {
            bail!(Config, "AAM scale must be positive, got {}", self.scale);
        }
        Ok(())
    }
}

fn clamp_cos(c: f64) -> f64 {
    c.clamp(-1.0 + COS_CLAMP, 1.0 - COS_CLAMP)
}

fn logits(cos: &[f64], label: usize, margin: f64, scale: f64) -> Vec<f64> {
    cos.iter()
        .enumerate()
        .map(|(j, &c)| {
            let c = clamp_cos(c);
            if j == label {
                scale * Float::cos(Float::acos(c) + margin)
            } else {
                scale * c
            }
        })
        .collect()
}

fn softmax(z: &[f64]) -> (Vec<f64>, f64) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| Float::exp(v - max)).collect();
    let total: f64 = exps.iter().sum();
    (exps.iter().map(|e| e / total).collect(), max + Float::ln(total))
}

pub(crate) fn loss_from_cosines(cos: &[f64], label: usize, margin: f64, scale: f64) -> f64 {
    let z = logits(cos, label, margin, scale);
    let (_, lse) = softmax(&z);
    lse - z[label]
}

/// Derivative of the loss with respect to each class cosine.
pub(crate) fn cosine_grads(cos: &[f64], label: usize, margin: f64, scale: f64) -> Vec<f64> {
    let z = logits(cos, label, margin, scale);
    let (p, _) = softmax(&z);
    cos.iter()
        .enumerate()
        .map(|(j, &c)| {
            let clamped = c != clamp_cos(c);
            let dz = p[j] - if j == label { 1.0 } else { 0.0 };
            if clamped {
                0.0
            } else if j == label {
                let theta = Float::acos(c);
                dz * scale * Float::sin(theta + margin) / Float::sin(theta)
            } else {
                dz * scale
            }
        })
        .collect()
}

/// Loss of one unit embedding against unit class rows (`K x D`).
pub fn aam_softmax_loss(embedding: &[f64], label: usize, class_weights: &FeatureMatrix, cfg: &AamConfig) -> Result<f64> {
    cfg.validate()?;
    if class_weights.frames() != embedding.len() {
        bail!(
            Dimension,
            "class weights have {} columns, embedding has {} values",
            class_weights.frames(),
            embedding.len()
        );
    }
    if label >= class_weights.channels() {
        bail!(Usage, "label {label} out of range for {} classes", class_weights.channels());
    }
    let unit = |v: &[f64]| (Float::sqrt(v.iter().map(|a| a * a).sum::<f64>()) - 1.0).abs() <= NORM_TOL;
    if !unit(embedding) {
        bail!(Usage, "embedding is not L2-normalized");
    }
    if let Some(j) = (0..class_weights.channels()).find(|&j| !unit(class_weights.row(j))) {
        bail!(Usage, "class weight row {j} is not L2-normalized");
    }
    let cos: Vec<f64> = (0..class_weights.channels())
        .map(|j| class_weights.row(j).iter().zip(embedding).map(|(a, b)| a * b).sum())
        .collect();
    Ok(loss_from_cosines(&cos, label, cfg.margin, cfg.scale))
}
