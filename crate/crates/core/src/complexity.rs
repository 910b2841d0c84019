//! Exact parameter (PN) and multiply-accumulate (MAC) accounting.
//!
//! Counting convention, applied uniformly:
//! - a convolution costs `out * in * kernel` MACs per frame (padded taps
//!   included) plus `out` bias additions per frame;
//! - a moving average of window `w > 1` costs `w` per element (`w - 1`
//!   additions and one scaling); window 1 is free;
//! - the cross-subset mean costs `J` per element;
//! - frame Z-normalization costs 4 per element plus 3 per frame;
//! - element-wise additions (residuals) cost 1 per element, ReLU is free;
//! - statistics pooling over `F` frames costs `3F + 3` per channel;
//! - the embedding head costs its matrix-vector product plus bias, and L2
//!   normalization adds `2E + 1`.
//!
//! Everything except the head and the per-channel pooling constants is
//! proportional to the number of frames.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::format;

use crate::error::{bail, Result};
use crate::model::{build_model, ModelConfig, ModelGraph, Stage};
use crate::real::Real;
use crate::tensor::ConvParams;

pub const ZNORM_OPS_PER_ELEMENT: u64 = 4;
pub const ZNORM_OPS_PER_FRAME: u64 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageCost {
    pub name: String,
    pub pn: u64,
    /// Lanes the per-lane work is repeated over.
    pub lanes: u64,
    /// Work done once for each lane.
    pub per_lane_macs: u64,
    /// Work done once for the whole stage.
    pub shared_macs: u64,
}

impl StageCost {
    pub fn macs(&self) -> u64 {
        self.lanes * self.per_lane_macs + self.shared_macs
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityReport {
    pub pn: u64,
    pub macs: u64,
    pub per_stage: Vec<StageCost>,
}

impl ComplexityReport {
    /// Sum of the lane-proportional work over all stages.
    pub fn lane_macs(&self) -> u64 {
        self.per_stage.iter().map(|s| s.lanes * s.per_lane_macs).sum()
    }
}

pub fn conv_params(p: &ConvParams<impl Real>) -> u64 {
    (p.out_channels * p.in_channels * p.kernel_size + p.out_channels) as u64
}

/// MACs of one convolution over `frames` frames on one lane.
pub fn conv_macs(p: &ConvParams<impl Real>, frames: u64) -> u64 {
    let (o, i, k) = (p.out_channels as u64, p.in_channels as u64, p.kernel_size as u64);
    o * i * k * frames + o * frames
}

pub fn count_params<T: Real>(model: &ModelGraph<T>) -> u64 {
    analyze(model, 1).pn
}

pub fn count_macs<T: Real>(model: &ModelGraph<T>, frames: usize) -> u64 {
    analyze(model, frames).macs
}

/// Per-stage costs for one forward pass over `frames` input frames.
pub fn analyze<T: Real>(model: &ModelGraph<T>, frames: usize) -> ComplexityReport {
    let t = frames as u64;
    let mut lanes = 1u64;
    let mut width = model.input_dim() as u64;
    let mut per_stage = Vec::with_capacity(model.stages.len());
    for (idx, stage) in model.stages.iter().enumerate() {
        let cost = match stage {
            Stage::Tm { plan, params } => {
                let j = plan.j as u64;
                let q = params.hidden_dim() as u64;
                let l = plan.l as u64;
                let w = params.pool_window as u64;
                let pool = if w > 1 { q * t * w } else { 0 };
                let per_lane = conv_macs(&params.init, t)
                    + pool
                    + conv_macs(&params.fuse, t)
                    + ZNORM_OPS_PER_ELEMENT * l * t
                    + ZNORM_OPS_PER_FRAME * t
                    + l * t;
                let shared = j * q * t + conv_macs(&params.interact, t);
                lanes = j;
                width = l;
                StageCost {
                    name: format!("{idx}:tm"),
                    pn: conv_params(&params.init) + conv_params(&params.interact) + conv_params(&params.fuse),
                    lanes: j,
                    per_lane_macs: per_lane,
                    shared_macs: shared,
                }
            }
            Stage::Block(b) => {
                let out = b.conv.out_channels as u64;
                let residual = if b.residual { out * t } else { 0 };
                width = out;
                StageCost {
                    name: format!("{idx}:block"),
                    pn: conv_params(&b.conv),
                    lanes,
                    per_lane_macs: conv_macs(&b.conv, t) + residual,
                    shared_macs: 0,
                }
            }
            Stage::Concat => StageCost {
                name: format!("{idx}:concat"),
                pn: 0,
                lanes,
                per_lane_macs: 0,
                shared_macs: 0,
            },
            Stage::StatsPool => {
                let spliced = lanes * t;
                let c = StageCost {
                    name: format!("{idx}:statspool"),
                    pn: 0,
                    lanes: 1,
                    per_lane_macs: 0,
                    shared_macs: width * (3 * spliced + 3),
                };
                lanes = 1;
                width *= 2;
                c
            }
            Stage::Embedding(p) => {
                let e = p.out_channels as u64;
                StageCost {
                    name: format!("{idx}:embedding"),
                    pn: conv_params(p),
                    lanes: 1,
                    per_lane_macs: 0,
                    shared_macs: conv_macs(p, 1) + 2 * e + 1,
                }
            }
        };
        per_stage.push(cost);
    }
    ComplexityReport {
        pn: per_stage.iter().map(|s| s.pn).sum(),
        macs: per_stage.iter().map(StageCost::macs).sum(),
        per_stage,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub pn: u64,
    pub macs: u64,
    /// Percent of the first row's PN.
    pub pn_pct: f64,
    pub macs_pct: f64,
}

/// One row per config, ratios relative to the first (benchmark) config.
pub fn complexity_report(configs: &[ModelConfig], frames: usize) -> Result<Vec<ReportRow>> {
    if configs.is_empty() {
        bail!(Usage, "complexity report needs at least one config");
    }
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in configs {
        let g = build_model(cfg, 0)?;
        let r = analyze(&g, frames);
        rows.push((cfg.name.clone(), r.pn, r.macs));
    }
    let (pn0, macs0) = (rows[0].1 as f64, rows[0].2 as f64);
    Ok(rows
        .into_iter()
        .map(|(name, pn, macs)| ReportRow {
            name,
            pn,
            macs,
            pn_pct: 100.0 * pn as f64 / pn0,
            macs_pct: 100.0 * macs as f64 / macs0,
        })
        .collect())
}

/// `(stage, pn, macs)` triples.
pub fn stage_table(report: &ComplexityReport) -> Vec<(String, u64, u64)> {
    report.per_stage.iter().map(|s| (s.name.clone(), s.pn, s.macs())).collect()
}
