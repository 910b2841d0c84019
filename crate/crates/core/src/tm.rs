//! The transformation module: feature partition followed by feature
//! fusion.
//!
//! For each subset `F_i` (L x T):
//!
//! ```text
//! G_i  = init(F_i)                       L  -> Q, kernel 1
//! P_i  = moving_avg(G_i)                 Q x T, shape preserving
//! V    = interact(mean_i P_i)            Q  -> Q, kernel 1, shared by all i
//! U_i  = fuse([G_i ; V])                 2Q -> L, kernel 1
//! Z_i  = znorm_frames(U_i)
//! F'_i = Z_i + F_i
//! ```
//!
//! One parameter set serves every subset, so the module's size does not
//! depend on `J` or on the overlap.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::partition::{split, PartitionPlan};
use crate::real::Real;
use crate::tape::{ConvLeaves, NodeId, Tape};
use crate::tensor::{
    add, concat_channels, moving_avg_pool, pointwise_conv, seeded_rng, znorm_frames, ConvParams,
    FeatureMatrix,
};

/// Default temporal window of the pooling layer.
pub const DEFAULT_POOL_WINDOW: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TmParams<T: Real = f64> {
    /// `L -> Q` initialization layer.
    pub init: ConvParams<T>,
    /// `Q -> Q` interaction layer.
    pub interact: ConvParams<T>,
    /// `2Q -> L` fusion layer.
    pub fuse: ConvParams<T>,
    pub pool_window: usize,
}

impl<T: Real> TmParams<T> {
    pub fn subset_dim(&self) -> usize {
        self.init.in_channels
    }

    pub fn hidden_dim(&self) -> usize {
        self.init.out_channels
    }

    pub fn param_count(&self) -> usize {
        self.init.param_count() + self.interact.param_count() + self.fuse.param_count()
    }

    pub fn cast<U: Real>(&self) -> TmParams<U> {
        TmParams {
            init: self.init.cast(),
            interact: self.interact.cast(),
            fuse: self.fuse.cast(),
            pool_window: self.pool_window,
        }
    }

    fn validate(&self) -> Result<()> {
        let (l, q) = (self.subset_dim(), self.hidden_dim());
        let ok = [&self.init, &self.interact, &self.fuse].iter().all(|p| p.kernel_size == 1)
            && self.interact.in_channels == q
            && self.interact.out_channels == q
            && self.fuse.in_channels == 2 * q
            && self.fuse.out_channels == l;
        if !ok {
            bail!(Config, "inconsistent TM layer shapes for L={l}, Q={q}");
        }
        if self.pool_window.is_multiple_of(2) {
            bail!(Config, "pooling window must be odd, got {}", self.pool_window);
        }
        Ok(())
    }
}

/// Seeded parameters for subsets of `l` channels. `q` defaults to `2 * l`.
pub fn tm_init(l: usize, q: Option<usize>, pool_window: usize, seed: u64) -> Result<TmParams> {
    tm_init_with(l, q, pool_window, &mut seeded_rng(seed))
}

pub(crate) fn tm_init_with(
    l: usize,
    q: Option<usize>,
    pool_window: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<TmParams> {
    let q = q.unwrap_or(2 * l);
    if l == 0 || q == 0 {
        bail!(Config, "TM dimensions must be positive, got L={l}, Q={q}");
    }
    if pool_window == 0 || pool_window.is_multiple_of(2) {
        bail!(Config, "pooling window must be odd and positive, got {pool_window}");
    }
    Ok(TmParams {
        init: ConvParams::pointwise(q, l, rng)?,
        interact: ConvParams::pointwise(q, q, rng)?,
        fuse: ConvParams::pointwise(l, 2 * q, rng)?,
        pool_window,
    })
}

/// `V = interact(mean_i P_i)`.
pub fn interact<T: Real>(pooled: &[FeatureMatrix<T>], params: &TmParams<T>) -> Result<FeatureMatrix<T>> {
    let Some(first) = pooled.first() else {
        bail!(Dimension, "interaction needs at least one subset");
    };
    let shape = first.shape();
    if let Some(i) = pooled.iter().position(|p| p.shape() != shape) {
        bail!(Dimension, "pooled subset {i} has shape {:?}, expected {shape:?}", pooled[i].shape());
    }
    let mut acc = alloc::vec![T::zero(); shape.0 * shape.1];
    for p in pooled {
        for (a, &v) in acc.iter_mut().zip(p.data()) {
            *a = *a + v;
        }
    }
    let n = T::from_f64(pooled.len() as f64);
    acc.iter_mut().for_each(|a| *a = *a / n);
    pointwise_conv(&FeatureMatrix::from_raw(shape.0, shape.1, acc), &params.interact)
}

/// `U_i = fuse([G_i ; V])`.
pub fn fuse<T: Real>(g: &FeatureMatrix<T>, v: &FeatureMatrix<T>, params: &TmParams<T>) -> Result<FeatureMatrix<T>> {
    if g.shape() != v.shape() {
        bail!(Dimension, "fusion inputs differ in shape: {:?} vs {:?}", g.shape(), v.shape());
    }
    pointwise_conv(&concat_channels(&[g, v])?, &params.fuse)
}

/// Every intermediate of one TM pass, one entry per subset except `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct TmIntermediate<T: Real = f64> {
    pub g: Vec<FeatureMatrix<T>>,
    pub p: Vec<FeatureMatrix<T>>,
    pub v: FeatureMatrix<T>,
    pub u: Vec<FeatureMatrix<T>>,
    pub z: Vec<FeatureMatrix<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmOutput<T: Real = f64> {
    /// `F'_i`, each `L x T`.
    pub outputs: Vec<FeatureMatrix<T>>,
    pub intermediates: TmIntermediate<T>,
}

/// Runs the module on a full `N x T` feature.
pub fn tm_forward<T: Real>(f: &FeatureMatrix<T>, plan: &PartitionPlan, params: &TmParams<T>) -> Result<TmOutput<T>> {
    tm_forward_lanes(core::slice::from_ref(f), plan, params)
}

/// Runs the module on the channel concatenation of `lanes`. When the lanes
/// already match the plan's subsets they are used directly.
pub fn tm_forward_lanes<T: Real>(
    lanes: &[FeatureMatrix<T>],
    plan: &PartitionPlan,
    params: &TmParams<T>,
) -> Result<TmOutput<T>> {
    params.validate()?;
    if plan.l != params.subset_dim() {
        bail!(
            Dimension,
            "plan subset dimension {} does not match TM input channels {}",
            plan.l,
            params.subset_dim()
        );
    }
    let subsets = if lanes_match_plan(lanes.iter().map(|l| l.channels()), plan) {
        lanes.to_vec()
    } else {
        let refs: Vec<&FeatureMatrix<T>> = lanes.iter().collect();
        split(&concat_channels(&refs)?, plan)?
    };

    let g = subsets
        .iter()
        .map(|s| pointwise_conv(s, &params.init))
        .collect::<Result<Vec<_>>>()?;
    let p = g
        .iter()
        .map(|x| moving_avg_pool(x, params.pool_window))
        .collect::<Result<Vec<_>>>()?;
    let v = interact(&p, params)?;
    let u = g.iter().map(|gi| fuse(gi, &v, params)).collect::<Result<Vec<_>>>()?;
    let z: Vec<_> = u.iter().map(znorm_frames).collect();
    let outputs = z
        .iter()
        .zip(&subsets)
        .map(|(zi, fi)| add(zi, fi))
        .collect::<Result<Vec<_>>>()?;
    Ok(TmOutput { outputs, intermediates: TmIntermediate { g, p, v, u, z } })
}

pub(crate) fn lanes_match_plan(mut widths: impl ExactSizeIterator<Item = usize>, plan: &PartitionPlan) -> bool {
    plan.is_disjoint() && widths.len() == plan.j && widths.all(|w| w == plan.l)
}

/// Tape leaves for one [`TmParams`].
#[derive(Debug, Clone, Copy)]
pub struct TmLeaves {
    pub init: ConvLeaves,
    pub interact: ConvLeaves,
    pub fuse: ConvLeaves,
    pub pool_window: usize,
}

impl TmLeaves {
    pub fn register(tape: &mut Tape, params: &TmParams<f64>) -> Self {
        Self {
            init: tape.conv_params(&params.init),
            interact: tape.conv_params(&params.interact),
            fuse: tape.conv_params(&params.fuse),
            pool_window: params.pool_window,
        }
    }
}

/// Node ids of one recorded TM pass, mirroring [`TmIntermediate`].
#[derive(Debug, Clone)]
pub struct TmNodes {
    pub outputs: Vec<NodeId>,
    pub g: Vec<NodeId>,
    pub p: Vec<NodeId>,
    pub v: NodeId,
    pub u: Vec<NodeId>,
    pub z: Vec<NodeId>,
}

/// Recorded counterpart of [`tm_forward_lanes`].
pub fn tm_forward_taped(tape: &mut Tape, lanes: &[NodeId], plan: &PartitionPlan, leaves: &TmLeaves) -> Result<TmNodes> {
    if plan.l != leaves.init.in_channels {
        bail!(
            Dimension,
            "plan subset dimension {} does not match TM input channels {}",
            plan.l,
            leaves.init.in_channels
        );
    }
    let widths: Vec<usize> = lanes.iter().map(|&id| tape.value(id).channels()).collect();
    let subsets = if lanes_match_plan(widths.iter().copied(), plan) {
        lanes.to_vec()
    } else {
        let total: usize = widths.iter().sum();
        if total != plan.n {
            bail!(Dimension, "partition plan expects {} channels, got {total}", plan.n);
        }
        let whole = if lanes.len() == 1 { lanes[0] } else { tape.concat_channels(lanes)? };
        plan.starts
            .iter()
            .map(|&s| tape.slice_channels(whole, s, plan.l))
            .collect::<Result<Vec<_>>>()?
    };

    let mut g = Vec::with_capacity(subsets.len());
    let mut p = Vec::with_capacity(subsets.len());
    for &s in &subsets {
        let gi = tape.conv(s, &leaves.init)?;
        g.push(gi);
        p.push(if leaves.pool_window == 1 { gi } else { tape.moving_avg(gi, leaves.pool_window)? });
    }
    let mean = tape.mean(&p)?;
    let v = tape.conv(mean, &leaves.interact)?;
    let mut u = Vec::with_capacity(subsets.len());
    let mut z = Vec::with_capacity(subsets.len());
    let mut outputs = Vec::with_capacity(subsets.len());
    for (&gi, &fi) in g.iter().zip(&subsets) {
        let cat = tape.concat_channels(&[gi, v])?;
        let ui = tape.conv(cat, &leaves.fuse)?;
        let zi = tape.znorm(ui)?;
        outputs.push(tape.add(zi, fi)?);
        u.push(ui);
        z.push(zi);
    }
    Ok(TmNodes { outputs, g, p, v, u, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::plan_partition;
    use crate::Error;
    use alloc::vec;

    fn wave(c: usize, t: usize, seed: f64) -> FeatureMatrix {
        FeatureMatrix::from_fn(c, t, |i, j| ((i as f64 + 1.3) * (j as f64 + seed)).sin())
    }

    #[test]
    fn default_hidden_dim_and_count() {
        let p = tm_init(20, None, 3, 11).unwrap();
        assert_eq!(p.hidden_dim(), 40);
        assert_eq!(p.param_count(), 4100);
        assert_eq!(p, tm_init(20, None, 3, 11).unwrap());
        assert_ne!(p, tm_init(20, None, 3, 12).unwrap());
        assert!(matches!(tm_init(20, None, 2, 1), Err(Error::Config(_))));
        assert!(matches!(tm_init(0, None, 3, 1), Err(Error::Config(_))));
    }

    #[test]
    fn interaction_mean_cases() {
        let params = tm_init(3, Some(4), 3, 5).unwrap();
        let a = wave(4, 6, 0.4);
        let single = interact(core::slice::from_ref(&a), &params).unwrap();
        assert_eq!(single, pointwise_conv(&a, &params.interact).unwrap());
        let triple = interact(&[a.clone(), a.clone(), a.clone()], &params).unwrap();
        assert!(single.max_abs_diff(&triple) < 1e-15);

        let mut zero_bias = params.clone();
        zero_bias.interact.bias.iter_mut().for_each(|b| *b = 0.0);
        let neg = a.map(|v| -v);
        let v = interact(&[a, neg], &zero_bias).unwrap();
        assert!(v.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn fuse_cases() {
        // 2Q = 4, L = 2
        let mut params = tm_init(2, Some(2), 1, 0).unwrap();
        params.fuse = ConvParams::new(2, 4, 1, 1, vec![1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 0.0, 2.0], vec![0.1, -0.2]).unwrap();
        let g = FeatureMatrix::from_rows(&[[1.0, 0.0], [2.0, -1.0]]).unwrap();
        let v = FeatureMatrix::from_rows(&[[0.5, 1.0], [3.0, 2.0]]).unwrap();
        let u = fuse(&g, &v, &params).unwrap();
        // column t=0: x = [1, 2, 0.5, 3]; t=1: x = [0, -1, 1, 2]
        let want = [
            [0.1 + 1.0 + 4.0 + 1.5 + 12.0, 0.1 + 0.0 - 2.0 + 3.0 + 8.0],
            [-0.2 - 1.0 + 1.0 + 0.0 + 6.0, -0.2 + 0.0 - 0.5 + 0.0 + 4.0],
        ];
        for c in 0..2 {
            for t in 0..2 {
                assert!((u.get(c, t) - want[c][t]).abs() < 1e-12, "{c},{t}");
            }
        }

        // only the V half selected -> independent of G
        params.fuse = ConvParams::new(2, 4, 1, 1, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0], vec![0.0; 2]).unwrap();
        assert_eq!(fuse(&g, &v, &params).unwrap(), fuse(&g.map(|x| 7.0 * x), &v, &params).unwrap());

        params.fuse = ConvParams::new(2, 4, 1, 1, vec![0.3; 8], vec![1.5, -2.0]).unwrap();
        let zero = FeatureMatrix::zeros(2, 3);
        let u = fuse(&zero, &zero, &params).unwrap();
        assert!(u.row(0).iter().all(|&x| x == 1.5) && u.row(1).iter().all(|&x| x == -2.0));
    }

    #[test]
    fn forward_shapes() {
        let plan = plan_partition(80, 20, 0.0).unwrap();
        let params = tm_init(20, None, 3, 1).unwrap();
        let out = tm_forward(&wave(80, 13, 0.2), &plan, &params).unwrap();
        assert_eq!(out.outputs.len(), 4);
        assert!(out.outputs.iter().all(|o| o.shape() == (20, 13)));
        assert_eq!(out.intermediates.v.shape(), (40, 13));
    }

    #[test]
    fn zero_fusion_passes_input_through() {
        let plan = plan_partition(8, 4, 0.0).unwrap();
        let mut params = tm_init(4, None, 3, 9).unwrap();
        params.fuse = ConvParams::zeros(4, 16, 1, 1);
        let f = wave(8, 5, 0.9);
        let out = tm_forward(&f, &plan, &params).unwrap();
        for (o, s) in out.outputs.iter().zip(split(&f, &plan).unwrap()) {
            assert_eq!(o, &s);
        }
    }

    #[test]
    fn taped_matches_plain_bitwise() {
        let plan = plan_partition(12, 6, 0.5).unwrap();
        let params = tm_init(6, Some(5), 3, 4).unwrap();
        let f = wave(12, 7, 0.1);
        let plain = tm_forward(&f, &plan, &params).unwrap();
        let mut tape = Tape::new();
        let x = tape.leaf(f);
        let leaves = TmLeaves::register(&mut tape, &params);
        let nodes = tm_forward_taped(&mut tape, &[x], &plan, &leaves).unwrap();
        for (id, m) in nodes.outputs.iter().zip(&plain.outputs) {
            assert_eq!(tape.value(*id), m);
        }
        assert_eq!(tape.value(nodes.v), &plain.intermediates.v);
    }

    #[test]
    fn mismatched_plan_rejected() {
        let plan = plan_partition(80, 20, 0.0).unwrap();
        let params = tm_init(10, None, 3, 1).unwrap();
        assert!(matches!(tm_forward(&wave(80, 4, 0.0), &plan, &params), Err(Error::Dimension(_))));
    }
}
