//! A TM-augmented stack of frame-level blocks with a statistics-pooling
//! embedding head.
//!
//! With the TM enabled the graph is
//! `TM, Block, TM, Block, ..., Concat, StatsPool, Embedding`. Each TM cuts
//! its input into lanes, every block runs on each lane with one shared
//! weight set, and `Concat` splices the lanes along the frame axis so the
//! head sees the same channel count whatever `J` is. Without the TM the
//! graph is `Block, ..., StatsPool, Embedding` on the full feature.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::partition::{plan_partition, PartitionPlan};
use crate::real::Real;
use crate::tape::{ConvLeaves, Gradients, NodeId, Tape};
use crate::tensor::{
    add, concat_frames, dilated_conv1d, pointwise_conv, relu, seeded_rng, stats_pooling, ConvParams,
    FeatureMatrix,
};
use crate::tm::{tm_forward_lanes, tm_forward_taped, tm_init_with, TmLeaves, TmParams, DEFAULT_POOL_WINDOW};
use crate::EPS;

pub const DEFAULT_EMBEDDING_DIM: usize = 256;

/// Partition settings of one TM.
#[derive(Debug, Clone, PartialEq)]
pub struct TmSpec {
    /// Channels per subset. `None` means one subset for the first TM and
    /// the current lane width for later ones.
    pub subset_dim: Option<usize>,
    pub overlap: f64,
    /// Hidden width; `None` means twice the subset dimension.
    pub q: Option<usize>,
}

impl TmSpec {
    pub fn new(subset_dim: usize, overlap: f64) -> Self {
        Self { subset_dim: Some(subset_dim), overlap, q: None }
    }

    /// Keeps the incoming lanes as they are.
    pub fn lanes() -> Self {
        Self { subset_dim: None, overlap: 0.0, q: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    pub channels: usize,
    pub kernel: usize,
    pub dilation: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub name: String,
    /// Channels of the input feature (`N`).
    pub input_dim: usize,
    pub tm_enabled: bool,
    /// One entry per block when the TM is enabled; ignored otherwise.
    pub tms: Vec<TmSpec>,
    pub blocks: Vec<BlockSpec>,
    pub embedding_dim: usize,
    pub pool_window: usize,
}

fn default_blocks(channels: usize, num_blocks: usize) -> Vec<BlockSpec> {
    (0..num_blocks)
        .map(|i| BlockSpec { channels, kernel: 3, dilation: i + 1 })
        .collect()
}

impl ModelConfig {
    /// Plain block stack without any TM.
    pub fn baseline(input_dim: usize, channels: usize, num_blocks: usize) -> Self {
        Self {
            name: String::from("baseline"),
            input_dim,
            tm_enabled: false,
            tms: Vec::new(),
            blocks: default_blocks(channels, num_blocks),
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            pool_window: DEFAULT_POOL_WINDOW,
        }
    }

    /// A TM in front of every block; later TMs keep the lanes produced by
    /// the first one.
    pub fn with_tm(input_dim: usize, subset_dim: usize, overlap: f64, channels: usize, num_blocks: usize) -> Self {
        let mut tms = vec![TmSpec::new(subset_dim, overlap)];
        tms.extend((1..num_blocks).map(|_| TmSpec::lanes()));
        Self {
            name: format!("tm-l{subset_dim}"),
            input_dim,
            tm_enabled: true,
            tms,
            blocks: default_blocks(channels, num_blocks),
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            pool_window: DEFAULT_POOL_WINDOW,
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }
}

/// Dilated convolution, ReLU, and an identity shortcut when the channel
/// count is preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBlock<T: Real = f64> {
    pub conv: ConvParams<T>,
    pub residual: bool,
}

pub fn frame_block_forward<T: Real>(x: &FeatureMatrix<T>, block: &FrameBlock<T>) -> Result<FeatureMatrix<T>> {
    let y = relu(&dilated_conv1d(x, &block.conv)?);
    if block.residual {
        add(&y, x)
    } else {
        Ok(y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage<T: Real = f64> {
    Tm { plan: PartitionPlan, params: TmParams<T> },
    Block(FrameBlock<T>),
    /// Splices all lanes along the frame axis.
    Concat,
    StatsPool,
    /// Linear map from pooled statistics to the embedding, followed by L2
    /// normalization.
    Embedding(ConvParams<T>),
}

impl<T: Real> Stage<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Stage::Tm { .. } => "tm",
            Stage::Block(_) => "block",
            Stage::Concat => "concat",
            Stage::StatsPool => "statspool",
            Stage::Embedding(_) => "embedding",
        }
    }

    /// Parameter sets in storage order.
    pub fn convs(&self) -> Vec<&ConvParams<T>> {
        match self {
            Stage::Tm { params, .. } => vec![&params.init, &params.interact, &params.fuse],
            Stage::Block(b) => vec![&b.conv],
            Stage::Embedding(p) => vec![p],
            Stage::Concat | Stage::StatsPool => Vec::new(),
        }
    }

    pub fn convs_mut(&mut self) -> Vec<&mut ConvParams<T>> {
        match self {
            Stage::Tm { params, .. } => vec![&mut params.init, &mut params.interact, &mut params.fuse],
            Stage::Block(b) => vec![&mut b.conv],
            Stage::Embedding(p) => vec![p],
            Stage::Concat | Stage::StatsPool => Vec::new(),
        }
    }

    /// Applies the stage to the current lanes. After `StatsPool` there is a
    /// single `2C x 1` lane.
    pub fn apply(&self, lanes: Vec<FeatureMatrix<T>>) -> Result<Vec<FeatureMatrix<T>>> {
        match self {
            Stage::Tm { plan, params } => Ok(tm_forward_lanes(&lanes, plan, params)?.outputs),
            Stage::Block(b) => lanes.iter().map(|x| frame_block_forward(x, b)).collect(),
            Stage::Concat => {
                let refs: Vec<&FeatureMatrix<T>> = lanes.iter().collect();
                Ok(vec![concat_frames(&refs)?])
            }
            Stage::StatsPool => {
                let x = single_lane(&lanes)?;
                Ok(vec![FeatureMatrix::from_raw(2 * x.channels(), 1, stats_pooling(x))])
            }
            Stage::Embedding(p) => {
                let y = pointwise_conv(single_lane(&lanes)?, p)?;
                let norm = y.data().iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
                let norm = norm.max(T::from_f64(EPS));
                Ok(vec![y.map(|v| v / norm)])
            }
        }
    }
}

fn single_lane<T: Real>(lanes: &[FeatureMatrix<T>]) -> Result<&FeatureMatrix<T>> {
    match lanes {
        [x] => Ok(x),
        _ => bail!(Dimension, "expected one lane, got {}", lanes.len()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph<T: Real = f64> {
    pub config: ModelConfig,
    pub stages: Vec<Stage<T>>,
}

/// Builds and initializes the graph described by `config`.
pub fn build_model(config: &ModelConfig, seed: u64) -> Result<ModelGraph> {
    let mut rng = seeded_rng(seed);
    let stage_err = |idx: usize, what: &str, e: Error| -> Error {
        let msg = match e {
            Error::Dimension(m) | Error::Config(m) | Error::Partition(m) | Error::Usage(m) | Error::Input(m) => m,
        };
        Error::Config(format!("stage {idx} ({what}): {msg}"))
    };
    if config.blocks.is_empty() {
        bail!(Config, "model needs at least one block");
    }
    if config.input_dim == 0 || config.embedding_dim == 0 {
        bail!(Config, "input_dim and embedding_dim must be positive");
    }
    if config.tm_enabled && config.tms.len() != config.blocks.len() {
        bail!(
            Config,
            "{} TM specs given for {} blocks; one per block is required",
            config.tms.len(),
            config.blocks.len()
        );
    }

    let mut stages = Vec::new();
    let (mut lanes, mut width) = (1usize, config.input_dim);
    for (b, block) in config.blocks.iter().enumerate() {
        if config.tm_enabled {
            let spec = &config.tms[b];
            let idx = stages.len();
            let what = format!("tm {}", b + 1);
            let total = lanes * width;
            let l = spec.subset_dim.unwrap_or(if b == 0 { total } else { width });
            let plan = plan_partition(total, l, spec.overlap).map_err(|e| stage_err(idx, &what, e))?;
            let params = tm_init_with(l, spec.q, config.pool_window, &mut rng).map_err(|e| stage_err(idx, &what, e))?;
            lanes = plan.j;
            width = l;
            stages.push(Stage::Tm { plan, params });
        }
        let idx = stages.len();
        let what = format!("block {}", b + 1);
        if block.kernel % 2 == 0 {
            return Err(stage_err(idx, &what, Error::Config(format!("kernel {} must be odd", block.kernel))));
        }
        let conv = ConvParams::init(block.channels, width, block.kernel, block.dilation, &mut rng)
            .map_err(|e| stage_err(idx, &what, e))?;
        stages.push(Stage::Block(FrameBlock { conv, residual: width == block.channels }));
        width = block.channels;
    }
    if config.tm_enabled {
        stages.push(Stage::Concat);
    }
    stages.push(Stage::StatsPool);
    let idx = stages.len();
    let head = ConvParams::pointwise(config.embedding_dim, 2 * width, &mut rng)
        .map_err(|e| stage_err(idx, "embedding", e))?;
    stages.push(Stage::Embedding(head));
    Ok(ModelGraph { config: config.clone(), stages })
}

impl<T: Real> ModelGraph<T> {
    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn embedding_dim(&self) -> usize {
        self.config.embedding_dim
    }

    /// Number of stored parameters.
    pub fn param_len(&self) -> usize {
        self.stages.iter().flat_map(|s| s.convs()).map(|c| c.param_count()).sum()
    }

    /// All parameters in stage order, weights before bias per layer.
    pub fn params_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_len());
        for c in self.stages.iter().flat_map(|s| s.convs()) {
            out.extend_from_slice(&c.weights);
            out.extend_from_slice(&c.bias);
        }
        out
    }

    pub fn set_params_flat(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.param_len() {
            bail!(Dimension, "expected {} parameters, got {}", self.param_len(), values.len());
        }
        let mut off = 0;
        for c in self.stages.iter_mut().flat_map(|s| s.convs_mut()) {
            let nw = c.weights.len();
            c.weights.copy_from_slice(&values[off..off + nw]);
            off += nw;
            let nb = c.bias.len();
            c.bias.copy_from_slice(&values[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ModelGraph<U> {
        let stages = self
            .stages
            .iter()
            .map(|s| match s {
                Stage::Tm { plan, params } => Stage::Tm { plan: plan.clone(), params: params.cast() },
                Stage::Block(b) => Stage::Block(FrameBlock { conv: b.conv.cast(), residual: b.residual }),
                Stage::Concat => Stage::Concat,
                Stage::StatsPool => Stage::StatsPool,
                Stage::Embedding(p) => Stage::Embedding(p.cast()),
            })
            .collect();
        ModelGraph { config: self.config.clone(), stages }
    }

    /// Lanes after every stage, starting with the input.
    pub fn forward_trace(&self, f: &FeatureMatrix<T>) -> Result<Vec<Vec<FeatureMatrix<T>>>> {
        if f.channels() != self.input_dim() {
            bail!(Dimension, "model expects {} input channels, got {}", self.input_dim(), f.channels());
        }
        let mut trace = vec![vec![f.clone()]];
        for stage in &self.stages {
            let next = stage.apply(trace.last().cloned().unwrap_or_default())?;
            trace.push(next);
        }
        Ok(trace)
    }
}

/// Unit-norm speaker embedding of `f`.
pub fn model_forward<T: Real>(model: &ModelGraph<T>, f: &FeatureMatrix<T>) -> Result<Vec<T>> {
    if f.channels() != model.input_dim() {
        bail!(Dimension, "model expects {} input channels, got {}", model.input_dim(), f.channels());
    }
    let mut lanes = vec![f.clone()];
    for stage in &model.stages {
        lanes = stage.apply(lanes)?;
    }
    Ok(single_lane(&lanes)?.data().to_vec())
}

#[derive(Debug, Clone)]
enum StageLeaves {
    Tm(TmLeaves),
    Conv(ConvLeaves),
    None,
}

/// Tape leaves for every parameter of a [`ModelGraph`].
#[derive(Debug, Clone)]
pub struct ModelLeaves {
    stages: Vec<StageLeaves>,
}

impl ModelLeaves {
    pub fn register(tape: &mut Tape, model: &ModelGraph<f64>) -> Self {
        let stages = model
            .stages
            .iter()
            .map(|s| match s {
                Stage::Tm { params, .. } => StageLeaves::Tm(TmLeaves::register(tape, params)),
                Stage::Block(b) => StageLeaves::Conv(tape.conv_params(&b.conv)),
                Stage::Embedding(p) => StageLeaves::Conv(tape.conv_params(p)),
                Stage::Concat | Stage::StatsPool => StageLeaves::None,
            })
            .collect();
        Self { stages }
    }

    fn conv_leaves(&self) -> Vec<&ConvLeaves> {
        self.stages
            .iter()
            .flat_map(|s| match s {
                StageLeaves::Tm(t) => vec![&t.init, &t.interact, &t.fuse],
                StageLeaves::Conv(c) => vec![c],
                StageLeaves::None => Vec::new(),
            })
            .collect()
    }

    /// Gradient for every parameter, in [`ModelGraph::params_flat`] order.
    pub fn flat_grads(&self, tape: &Tape, grads: &Gradients) -> Vec<f64> {
        let mut out = Vec::new();
        for c in self.conv_leaves() {
            out.extend_from_slice(grads.wrt(tape, c.weights).data());
            out.extend_from_slice(grads.wrt(tape, c.bias).data());
        }
        out
    }
}

/// Recorded counterpart of [`model_forward`]; returns the `D x 1`
/// embedding node.
pub fn model_forward_taped(tape: &mut Tape, model: &ModelGraph<f64>, leaves: &ModelLeaves, input: NodeId) -> Result<NodeId> {
    let f = tape.value(input);
    if f.channels() != model.input_dim() {
        bail!(Dimension, "model expects {} input channels, got {}", model.input_dim(), f.channels());
    }
    let mut lanes = vec![input];
    for (stage, sl) in model.stages.iter().zip(&leaves.stages) {
        lanes = match (stage, sl) {
            (Stage::Tm { plan, .. }, StageLeaves::Tm(t)) => tm_forward_taped(tape, &lanes, plan, t)?.outputs,
            (Stage::Block(b), StageLeaves::Conv(c)) => {
                let mut out = Vec::with_capacity(lanes.len());
                for &x in &lanes {
                    let y = tape.conv(x, c)?;
                    let y = tape.relu(y)?;
                    out.push(if b.residual { tape.add(y, x)? } else { y });
                }
                out
            }
            (Stage::Concat, _) => {
                if lanes.len() == 1 {
                    lanes
                } else {
                    vec![tape.concat_frames(&lanes)?]
                }
            }
            (Stage::StatsPool, _) => vec![tape.stats_pool(one(&lanes)?)?],
            (Stage::Embedding(_), StageLeaves::Conv(c)) => {
                let y = tape.conv(one(&lanes)?, c)?;
                vec![tape.l2_normalize(y)?]
            }
            _ => bail!(Usage, "leaves were registered for a different model"),
        };
    }
    one(&lanes)
}

fn one(lanes: &[NodeId]) -> Result<NodeId> {
    match lanes {
        [x] => Ok(*x),
        _ => bail!(Dimension, "expected one lane, got {}", lanes.len()),
    }
}
