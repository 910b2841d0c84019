use core::f64::consts::PI;
use num_traits::Float;

use crate::error::{bail, Result};

/// Linear warm-up to `lr_max`, then cosine annealing down to `lr_min` on
/// the last step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    pub warmup_steps: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub total_steps: usize,
}

impl ScheduleConfig {
    pub fn new(total_steps: usize) -> Self {
        Self { warmup_steps: 10, lr_max: 1e-3, lr_min: 1e-8, total_steps }
    }

    pub fn validate(&self) -> Result<()> {
        if self.warmup_steps >= self.total_steps {
            bail!(
                Config,
                "warm-up ({}) must be shorter than the schedule ({})",
                self.warmup_steps,
                self.total_steps
            );
        }
        if !(0.0 <= self.lr_min && self.lr_min < self.lr_max) {
            bail!(Config, "need 0 <= lr_min < lr_max, got {} and {}", self.lr_min, self.lr_max);
        }
        Ok(())
    }
}

pub fn cosine_lr(step: usize, cfg: &ScheduleConfig) -> Result<f64> {
    cfg.validate()?;
    if step >= cfg.total_steps {
        bail!(Usage, "step {step} outside a {}-step schedule", cfg.total_steps);
    }
    if step < cfg.warmup_steps {
        return Ok(cfg.lr_max * step as f64 / cfg.warmup_steps as f64);
    }
    let span = cfg.total_steps - 1 - cfg.warmup_steps;
    let progress = if span == 0 { 0.0 } else { (step - cfg.warmup_steps) as f64 / span as f64 };
    Ok(cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + Float::cos(PI * progress)))
}
