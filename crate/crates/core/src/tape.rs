//! Wengert-list reverse-mode differentiation over [`FeatureMatrix`] values.
//!
//! Every operation appends a node holding its output value and the ids of
//! its inputs. [`Tape::backward`] walks the list in reverse, applying each
//! op's vector-Jacobian product. The tape is single-writer and works in
//! `f64` only.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::eval::aam;
use crate::tensor::{conv_kernel, stats_pool_kernel, znorm_kernel, ConvParams, FeatureMatrix};
use crate::EPS;
use num_traits::Float;

type Matrix = FeatureMatrix<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Leaf ids for one convolution's weights (`out x in*kernel`) and bias
/// (`out x 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvLeaves {
    pub weights: NodeId,
    pub bias: NodeId,
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_size: usize,
    pub dilation: usize,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv { x: NodeId, p: ConvLeaves },
    MovingAvg { x: NodeId, window: usize },
    ZNorm(NodeId),
    StatsPool(NodeId),
    Mean(Vec<NodeId>),
    ConcatChannels(Vec<NodeId>),
    ConcatFrames(Vec<NodeId>),
    Slice { x: NodeId, start: usize, len: usize },
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Relu(NodeId),
    L2Normalize(NodeId),
    NormalizeRows(NodeId),
    Aam { emb: NodeId, weights: NodeId, label: usize, margin: f64, scale: f64 },
    Sum(NodeId),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Matrix,
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Matrix) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn conv_params(&mut self, p: &ConvParams<f64>) -> ConvLeaves {
        let w = Matrix::from_raw(p.out_channels, p.in_channels * p.kernel_size, p.weights.clone());
        let b = Matrix::from_raw(p.out_channels, 1, p.bias.clone());
        ConvLeaves {
            weights: self.leaf(w),
            bias: self.leaf(b),
            out_channels: p.out_channels,
            in_channels: p.in_channels,
            kernel_size: p.kernel_size,
            dilation: p.dilation,
        }
    }

    /// Reads a parameter set back from leaf values (or gradients shaped like
    /// them).
    pub fn conv_from(weights: &Matrix, bias: &Matrix, leaves: &ConvLeaves) -> ConvParams<f64> {
        ConvParams {
            out_channels: leaves.out_channels,
            in_channels: leaves.in_channels,
            kernel_size: leaves.kernel_size,
            dilation: leaves.dilation,
            weights: weights.data().to_vec(),
            bias: bias.data().to_vec(),
        }
    }

    fn record(&mut self, op: Op) -> Result<NodeId> {
        let value = self.eval(&op)?;
        Ok(self.push(op, value))
    }

    pub fn conv(&mut self, x: NodeId, p: &ConvLeaves) -> Result<NodeId> {
        self.record(Op::Conv { x, p: *p })
    }

    pub fn moving_avg(&mut self, x: NodeId, window: usize) -> Result<NodeId> {
        self.record(Op::MovingAvg { x, window })
    }

    pub fn znorm(&mut self, x: NodeId) -> Result<NodeId> {
        self.record(Op::ZNorm(x))
    }

    /// Output is a `2C x 1` column (means then stds).
    pub fn stats_pool(&mut self, x: NodeId) -> Result<NodeId> {
        self.record(Op::StatsPool(x))
    }

    pub fn mean(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        self.record(Op::Mean(xs.to_vec()))
    }

    pub fn concat_channels(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        self.record(Op::ConcatChannels(xs.to_vec()))
    }

    pub fn concat_frames(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        self.record(Op::ConcatFrames(xs.to_vec()))
    }

    pub fn slice_channels(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        self.record(Op::Slice { x, start, len })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Add(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Mul(a, b))
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.record(Op::Relu(x))
    }

    /// Scales the whole matrix to unit Frobenius norm.
    pub fn l2_normalize(&mut self, x: NodeId) -> Result<NodeId> {
        self.record(Op::L2Normalize(x))
    }

    /// Scales every channel row to unit norm.
    pub fn normalize_rows(&mut self, x: NodeId) -> Result<NodeId> {
        self.record(Op::NormalizeRows(x))
    }

    /// AAM-Softmax loss of a unit `D x 1` embedding against unit class rows
    /// `K x D`.
    pub fn aam_loss(&mut self, emb: NodeId, weights: NodeId, label: usize, margin: f64, scale: f64) -> Result<NodeId> {
        self.record(Op::Aam { emb, weights, label, margin, scale })
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        self.record(Op::Sum(x))
    }

    fn eval(&self, op: &Op) -> Result<Matrix> {
        self.eval_with(op, |id| &self.nodes[id.0].value)
    }

    fn eval_with<'a>(&'a self, op: &Op, val: impl Fn(NodeId) -> &'a Matrix) -> Result<Matrix> {
        Ok(match op {
            Op::Leaf => bail!(Usage, "leaves have no forward rule"),
            Op::Conv { x, p } => {
                let xv = val(*x);
                if xv.channels() != p.in_channels {
                    bail!(Dimension, "conv expects {} channels, got {}", p.in_channels, xv.channels());
                }
                if p.kernel_size % 2 == 0 {
                    bail!(Config, "conv kernel must be odd, got {}", p.kernel_size);
                }
                let data = conv_kernel(
                    xv.data(),
                    p.in_channels,
                    xv.frames(),
                    val(p.weights).data(),
                    val(p.bias).data(),
                    p.out_channels,
                    p.kernel_size,
                    p.dilation,
                );
                Matrix::from_raw(p.out_channels, xv.frames(), data)
            }
            Op::MovingAvg { x, window } => crate::tensor::moving_avg_pool(val(*x), *window)?,
            Op::ZNorm(x) => crate::tensor::znorm_frames(val(*x)),
            Op::StatsPool(x) => {
                let xv = val(*x);
                let s = stats_pool_kernel(xv.data(), xv.channels(), xv.frames());
                Matrix::from_raw(s.len(), 1, s)
            }
            Op::Mean(xs) => {
                let Some(first) = xs.first() else {
                    bail!(Dimension, "mean of nothing");
                };
                let shape = val(*first).shape();
                let mut acc = vec![0.0; shape.0 * shape.1];
                for (i, x) in xs.iter().enumerate() {
                    let v = val(*x);
                    if v.shape() != shape {
                        bail!(Dimension, "mean operand {i} has shape {:?}, expected {shape:?}", v.shape());
                    }
                    for (a, b) in acc.iter_mut().zip(v.data()) {
                        *a += b;
                    }
                }
                let n = xs.len() as f64;
                acc.iter_mut().for_each(|a| *a /= n);
                Matrix::from_raw(shape.0, shape.1, acc)
            }
            Op::ConcatChannels(xs) => {
                let parts: Vec<&Matrix> = xs.iter().map(|x| val(*x)).collect();
                crate::tensor::concat_channels(&parts)?
            }
            Op::ConcatFrames(xs) => {
                let parts: Vec<&Matrix> = xs.iter().map(|x| val(*x)).collect();
                crate::tensor::concat_frames(&parts)?
            }
            Op::Slice { x, start, len } => val(*x).slice_channels(*start, *len)?,
            Op::Add(a, b) => crate::tensor::add(val(*a), val(*b))?,
            Op::Mul(a, b) => {
                let (x, y) = (val(*a), val(*b));
                if x.shape() != y.shape() {
                    bail!(Dimension, "cannot multiply {:?} and {:?}", x.shape(), y.shape());
                }
                Matrix::from_raw(x.channels(), x.frames(), x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect())
            }
            Op::Relu(x) => crate::tensor::relu(val(*x)),
            Op::L2Normalize(x) => {
                let v = val(*x);
                let norm = Float::sqrt(v.data().iter().map(|a| a * a).sum::<f64>()).max(EPS);
                v.map(|a| a / norm)
            }
            Op::NormalizeRows(x) => {
                let v = val(*x);
                let mut data = Vec::with_capacity(v.data().len());
                for c in 0..v.channels() {
                    let row = v.row(c);
                    let norm = Float::sqrt(row.iter().map(|a| a * a).sum::<f64>()).max(EPS);
                    data.extend(row.iter().map(|a| a / norm));
                }
                Matrix::from_raw(v.channels(), v.frames(), data)
            }
            Op::Aam { emb, weights, label, margin, scale } => {
                let (e, w) = (val(*emb), val(*weights));
                if e.frames() != 1 || w.frames() != e.channels() {
                    bail!(
                        Dimension,
                        "AAM loss needs a Dx1 embedding and KxD weights, got {:?} and {:?}",
                        e.shape(),
                        w.shape()
                    );
                }
                if *label >= w.channels() {
                    bail!(Usage, "label {label} out of range for {} classes", w.channels());
                }
                let cos = class_cosines(e, w);
                let loss = aam::loss_from_cosines(&cos, *label, *margin, *scale);
                Matrix::from_raw(1, 1, vec![loss])
            }
            Op::Sum(x) => Matrix::from_raw(1, 1, vec![val(*x).data().iter().sum()]),
        })
    }

    /// Recomputes every non-leaf node from the recorded leaves.
    pub fn replay(&self) -> Result<Vec<Matrix>> {
        let mut values: Vec<Matrix> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node.op {
                Op::Leaf => node.value.clone(),
                ref op => {
                    let vals = &values;
                    self.eval_with(op, |id| &vals[id.0])?
                }
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Reverse accumulation from a scalar `loss` node seeded with
    /// `loss_grad`.
    pub fn backward(&self, loss: NodeId, loss_grad: f64) -> Result<Gradients> {
        let Some(node) = self.nodes.get(loss.0) else {
            bail!(Usage, "node {} is not on this tape", loss.0);
        };
        if node.value.shape() != (1, 1) {
            bail!(Usage, "backward needs a scalar output, node {} is {:?}", loss.0, node.value.shape());
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![loss_grad]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads: grads
                .into_iter()
                .zip(&self.nodes)
                .map(|(g, n)| g.map(|g| Matrix::from_raw(n.value.channels(), n.value.frames(), g)))
                .collect(),
        })
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let val = |id: NodeId| &self.nodes[id.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::Conv { x, p } => {
                let xv = val(*x);
                let w = val(p.weights).data();
                let frames = xv.frames();
                let pad = ((p.kernel_size - 1) * p.dilation / 2) as isize;
                let mut gx = vec![0.0; xv.data().len()];
                let mut gw = vec![0.0; w.len()];
                let mut gb = vec![0.0; p.out_channels];
                for o in 0..p.out_channels {
                    let go = &g[o * frames..(o + 1) * frames];
                    gb[o] = go.iter().sum();
                    for c in 0..p.in_channels {
                        let xin = &xv.data()[c * frames..(c + 1) * frames];
                        for k in 0..p.kernel_size {
                            let widx = (o * p.in_channels + c) * p.kernel_size + k;
                            let shift = (k * p.dilation) as isize - pad;
                            let lo = (-shift).max(0) as usize;
                            let hi = (frames as isize - shift).min(frames as isize);
                            if hi <= lo as isize {
                                continue;
                            }
                            let hi = hi as usize;
                            let s0 = (lo as isize + shift) as usize;
                            let s1 = (hi as isize + shift) as usize;
                            let mut acc = 0.0;
                            for (gy, xval) in go[lo..hi].iter().zip(&xin[s0..s1]) {
                                acc += gy * xval;
                            }
                            gw[widx] += acc;
                            let wv = w[widx];
                            for (gxv, gy) in gx[c * frames + s0..c * frames + s1].iter_mut().zip(&go[lo..hi]) {
                                *gxv += wv * gy;
                            }
                        }
                    }
                }
                accumulate(grads, *x, &gx);
                accumulate(grads, p.weights, &gw);
                accumulate(grads, p.bias, &gb);
            }
            Op::MovingAvg { x, window } => {
                let xv = val(*x);
                let (channels, frames) = xv.shape();
                if *window == 1 {
                    accumulate(grads, *x, g);
                    return;
                }
                let half = (*window / 2) as isize;
                let last = frames as isize - 1;
                let scale = *window as f64;
                let mut gx = vec![0.0; g.len()];
                for c in 0..channels {
                    for t in 0..frames as isize {
                        let gy = g[c * frames + t as usize] / scale;
                        for j in -half..=half {
                            gx[c * frames + (t + j).clamp(0, last) as usize] += gy;
                        }
                    }
                }
                accumulate(grads, *x, &gx);
            }
            Op::ZNorm(x) => {
                let xv = val(*x);
                let (channels, frames) = xv.shape();
                let (_, mean, std) = znorm_kernel(xv.data(), channels, frames);
                let n = channels as f64;
                let mut gx = vec![0.0; g.len()];
                for t in 0..frames {
                    let s = std[t] + EPS;
                    let mut gsum = 0.0;
                    let mut gd = 0.0;
                    for c in 0..channels {
                        let gi = g[c * frames + t];
                        gsum += gi;
                        gd += gi * (xv.data()[c * frames + t] - mean[t]);
                    }
                    let gmean = gsum / n;
                    let dstd = if std[t] > 0.0 { gd / (s * s * n * std[t]) } else { 0.0 };
                    for c in 0..channels {
                        let d = xv.data()[c * frames + t] - mean[t];
                        gx[c * frames + t] = (g[c * frames + t] - gmean) / s - dstd * d;
                    }
                }
                accumulate(grads, *x, &gx);
            }
            Op::StatsPool(x) => {
                let xv = val(*x);
                let (channels, frames) = xv.shape();
                let out = node.value.data();
                let n = frames as f64;
                let mut gx = vec![0.0; xv.data().len()];
                for c in 0..channels {
                    let row = xv.row(c);
                    let m = out[c];
                    let var = row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                    let sd = Float::sqrt(var);
                    let gm = g[c] / n;
                    let gs = if sd > EPS { g[channels + c] / (n * sd) } else { 0.0 };
                    for (t, v) in row.iter().enumerate() {
                        gx[c * frames + t] = gm + gs * (v - m);
                    }
                }
                accumulate(grads, *x, &gx);
            }
            Op::Mean(xs) => {
                let n = xs.len() as f64;
                let gx: Vec<f64> = g.iter().map(|v| v / n).collect();
                for x in xs {
                    accumulate(grads, *x, &gx);
                }
            }
            Op::ConcatChannels(xs) => {
                let mut off = 0;
                for x in xs {
                    let len = val(*x).data().len();
                    accumulate(grads, *x, &g[off..off + len]);
                    off += len;
                }
            }
            Op::ConcatFrames(xs) => {
                let total = node.value.frames();
                let mut off = 0;
                for x in xs {
                    let (channels, frames) = val(*x).shape();
                    let mut gx = Vec::with_capacity(channels * frames);
                    for c in 0..channels {
                        gx.extend_from_slice(&g[c * total + off..c * total + off + frames]);
                    }
                    accumulate(grads, *x, &gx);
                    off += frames;
                }
            }
            Op::Slice { x, start, len } => {
                let xv = val(*x);
                let frames = xv.frames();
                let mut gx = vec![0.0; xv.data().len()];
                gx[start * frames..(start + len) * frames].copy_from_slice(g);
                accumulate(grads, *x, &gx);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g);
                accumulate(grads, *b, g);
            }
            Op::Mul(a, b) => {
                let ga: Vec<f64> = val(*b).data().iter().zip(g).map(|(y, gy)| y * gy).collect();
                let gb: Vec<f64> = val(*a).data().iter().zip(g).map(|(x, gy)| x * gy).collect();
                accumulate(grads, *a, &ga);
                accumulate(grads, *b, &gb);
            }
            Op::Relu(x) => {
                let gx: Vec<f64> = val(*x)
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(&v, &gy)| if v > 0.0 { gy } else { 0.0 })
                    .collect();
                accumulate(grads, *x, &gx);
            }
            Op::L2Normalize(x) => {
                let xv = val(*x);
                let norm = Float::sqrt(xv.data().iter().map(|a| a * a).sum::<f64>());
                let gx = unit_vjp(node.value.data(), g, norm);
                accumulate(grads, *x, &gx);
            }
            Op::NormalizeRows(x) => {
                let xv = val(*x);
                let frames = xv.frames();
                let mut gx = Vec::with_capacity(g.len());
                for c in 0..xv.channels() {
                    let norm = Float::sqrt(xv.row(c).iter().map(|a| a * a).sum::<f64>());
                    gx.extend(unit_vjp(node.value.row(c), &g[c * frames..(c + 1) * frames], norm));
                }
                accumulate(grads, *x, &gx);
            }
            Op::Aam { emb, weights, label, margin, scale } => {
                let (e, w) = (val(*emb), val(*weights));
                let cos = class_cosines(e, w);
                let dcos = aam::cosine_grads(&cos, *label, *margin, *scale);
                let dim = e.channels();
                let mut ge = vec![0.0; dim];
                let mut gw = vec![0.0; w.data().len()];
                for (j, dc) in dcos.iter().enumerate() {
                    let dc = dc * g[0];
                    if dc == 0.0 {
                        continue;
                    }
                    for d in 0..dim {
                        ge[d] += dc * w.get(j, d);
                        gw[j * dim + d] = dc * e.data()[d];
                    }
                }
                accumulate(grads, *emb, &ge);
                accumulate(grads, *weights, &gw);
            }
            Op::Sum(x) => {
                let gx = vec![g[0]; val(*x).data().len()];
                accumulate(grads, *x, &gx);
            }
        }
    }
}

fn class_cosines(e: &Matrix, w: &Matrix) -> Vec<f64> {
    (0..w.channels())
        .map(|j| w.row(j).iter().zip(e.data()).map(|(a, b)| a * b).sum())
        .collect()
}

/// VJP of `y = x / max(|x|, EPS)` given `y` and `|x|`.
fn unit_vjp(y: &[f64], g: &[f64], norm: f64) -> Vec<f64> {
    if norm > EPS {
        let yg: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
        y.iter().zip(g).map(|(yi, gi)| (gi - yi * yg) / norm).collect()
    } else {
        g.iter().map(|gi| gi / EPS).collect()
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], id: NodeId, g: &[f64]) {
    match &mut grads[id.0] {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g.to_vec()),
    }
}

/// Gradients of a scalar with respect to every node that influences it.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient of `id`, or zeros shaped like its value when the output
    /// does not depend on it.
    pub fn wrt(&self, tape: &Tape, id: NodeId) -> Matrix {
        match self.get(id) {
            Some(g) => g.clone(),
            None => {
                let (c, f) = tape.value(id).shape();
                Matrix::zeros(c, f)
            }
        }
    }

    pub fn conv(&self, tape: &Tape, leaves: &ConvLeaves) -> ConvParams<f64> {
        Tape::conv_from(&self.wrt(tape, leaves.weights), &self.wrt(tape, leaves.bias), leaves)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn sum_of_identity_conv_has_unit_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Matrix::from_fn(3, 4, |c, t| (c * 4 + t) as f64 * 0.1));
        let eye: Vec<f64> = (0..9).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect();
        let p = ConvParams::new(3, 3, 1, 1, eye, vec![0.0; 3]).unwrap();
        let leaves = tape.conv_params(&p);
        let y = tape.conv(x, &leaves).unwrap();
        let loss = tape.sum(y).unwrap();
        let g = tape.backward(loss, 1.0).unwrap();
        assert!(g.wrt(&tape, x).data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_seed_gives_zero_gradients() {
        let mut tape = Tape::new();
        let x = tape.leaf(Matrix::from_fn(2, 5, |c, t| (c as f64 - t as f64).sin()));
        let z = tape.znorm(x).unwrap();
        let r = tape.relu(z).unwrap();
        let s = tape.stats_pool(r).unwrap();
        let loss = tape.sum(s).unwrap();
        let g = tape.backward(loss, 0.0).unwrap();
        assert!(g.wrt(&tape, x).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_needs_scalar() {
        let mut tape = Tape::new();
        let x = tape.leaf(Matrix::zeros(2, 2));
        let y = tape.relu(x).unwrap();
        assert!(matches!(tape.backward(y, 1.0), Err(Error::Usage(_))));
    }

    #[test]
    fn replay_is_bitwise() {
        let mut tape = Tape::new();
        let mut rng = crate::tensor::seeded_rng(3);
        let x = tape.leaf(Matrix::from_fn(4, 6, |c, t| ((c * 7 + t * 3) % 5) as f64 - 2.1));
        let p = tape.conv_params(&ConvParams::init(5, 4, 3, 2, &mut rng).unwrap());
        let y = tape.conv(x, &p).unwrap();
        let a = tape.moving_avg(y, 3).unwrap();
        let z = tape.znorm(a).unwrap();
        let s = tape.stats_pool(z).unwrap();
        let n = tape.l2_normalize(s).unwrap();
        tape.sum(n).unwrap();
        let replayed = tape.replay().unwrap();
        for (i, v) in replayed.iter().enumerate() {
            let orig = tape.value(NodeId(i));
            assert_eq!(
                v.data().iter().map(|f| f.to_bits()).collect::<Vec<_>>(),
                orig.data().iter().map(|f| f.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
