//! Channel-axis partition of a feature into `J` equally sized, possibly
//! overlapping subsets.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::real::Real;
use crate::tensor::{concat_channels, FeatureMatrix};

/// How an `N`-channel feature is cut into `J` subsets of `L` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    /// Channels of the full feature.
    pub n: usize,
    /// Channels per subset.
    pub l: usize,
    pub overlap_fraction: f64,
    /// Channels shared by adjacent subsets, `round(overlap_fraction * L)`.
    pub overlap_dims: usize,
    pub stride: usize,
    /// Number of subsets.
    pub j: usize,
    pub starts: Vec<usize>,
}

/// Lays out `J` subsets of `l` channels over `n` channels, adjacent
/// subsets sharing `round(overlap_fraction * l)` channels (half rounds up).
///
/// The last subset must end exactly at channel `n`; uneven layouts are
/// rejected rather than padded.
pub fn plan_partition(n: usize, l: usize, overlap_fraction: f64) -> Result<PartitionPlan> {
    if !(0.0..1.0).contains(&overlap_fraction) {
        bail!(Config, "overlap fraction must lie in [0, 1), got {overlap_fraction}");
    }
    if l == 0 || l > n {
        bail!(Config, "subset dimension L={l} must satisfy 1 <= L <= N={n}");
    }
    let overlap_dims = num_traits::Float::floor(overlap_fraction * l as f64 + 0.5) as usize;
    if overlap_dims >= l {
        bail!(Partition, "overlap of {overlap_dims} channels leaves no stride for N={n}, L={l}");
    }
    let stride = l - overlap_dims;
    if !(n - l).is_multiple_of(stride) {
        bail!(
            Partition,
            "N={n}, L={l}, stride={stride}: (N-L) is not a multiple of the stride"
        );
    }
    let j = (n - l) / stride + 1;
    let starts = (0..j).map(|i| i * stride).collect();
    Ok(PartitionPlan { n, l, overlap_fraction, overlap_dims, stride, j, starts })
}

impl PartitionPlan {
    /// True when subsets tile the feature without sharing channels.
    pub fn is_disjoint(&self) -> bool {
        self.stride == self.l
    }
}

/// Cuts `f` into the plan's subsets; overlapping channels are copied into
/// every subset that covers them.
pub fn split<T: Real>(f: &FeatureMatrix<T>, plan: &PartitionPlan) -> Result<Vec<FeatureMatrix<T>>> {
    if f.channels() != plan.n {
        bail!(Dimension, "partition plan expects {} channels, got {}", plan.n, f.channels());
    }
    plan.starts.iter().map(|&s| f.slice_channels(s, plan.l)).collect()
}

/// Stacks equally shaped subsets along the channel axis.
pub fn concat_subsets<T: Real>(subsets: &[FeatureMatrix<T>]) -> Result<FeatureMatrix<T>> {
    let Some(first) = subsets.first() else {
        bail!(Dimension, "no subsets to concatenate");
    };
    if let Some(i) = subsets.iter().position(|s| s.shape() != first.shape()) {
        bail!(
            Dimension,
            "subset {i} has shape {:?}, expected {:?}",
            subsets[i].shape(),
            first.shape()
        );
    }
    let refs: Vec<&FeatureMatrix<T>> = subsets.iter().collect();
    concat_channels(&refs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;
    use alloc::vec;

    #[test]
    fn reference_layouts() {
        let p = plan_partition(80, 20, 0.0).unwrap();
        assert_eq!((p.j, p.stride), (4, 20));
        assert_eq!(p.starts, [0, 20, 40, 60]);
        let p = plan_partition(80, 20, 0.5).unwrap();
        assert_eq!((p.j, p.stride, p.overlap_dims), (7, 10, 10));
        let p = plan_partition(80, 20, 0.25).unwrap();
        assert_eq!((p.j, p.stride, p.overlap_dims), (5, 15, 5));
        assert_eq!(plan_partition(80, 80, 0.0).unwrap().j, 1);
    }

    #[test]
    fn uneven_layout_names_dims() {
        match plan_partition(80, 30, 0.0) {
            Err(Error::Partition(msg)) => {
                assert!(msg.contains("N=80") && msg.contains("L=30") && msg.contains("stride=30"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(plan_partition(10, 11, 0.0), Err(Error::Config(_))));
        assert!(matches!(plan_partition(10, 5, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn split_examples() {
        let f = FeatureMatrix::from_rows(&[[1.0, 1.5], [2.0, 2.5], [3.0, 3.5], [4.0, 4.5]]).unwrap();
        let one = split(&f, &plan_partition(4, 4, 0.0).unwrap()).unwrap();
        assert_eq!(one, vec![f.clone()]);

        let halves = split(&f, &plan_partition(4, 2, 0.0).unwrap()).unwrap();
        assert_eq!(halves[0], f.slice_channels(0, 2).unwrap());
        assert_eq!(halves[1], f.slice_channels(2, 2).unwrap());

        let overlapped = split(&f, &plan_partition(4, 2, 0.5).unwrap()).unwrap();
        assert_eq!(overlapped.len(), 3);
        for (i, s) in overlapped.iter().enumerate() {
            assert_eq!(s, &f.slice_channels(i, 2).unwrap());
        }
        assert!(matches!(
            split(&f, &plan_partition(6, 2, 0.0).unwrap()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn concat_shapes() {
        let parts: Vec<FeatureMatrix> = (0..3).map(|i| FeatureMatrix::filled(2, 5, i as f64)).collect();
        assert_eq!(concat_subsets(&parts).unwrap().shape(), (6, 5));
        assert_eq!(concat_subsets(&parts[..1]).unwrap(), parts[0]);
        let bad = [FeatureMatrix::<f64>::zeros(2, 5), FeatureMatrix::zeros(3, 5)];
        assert!(matches!(concat_subsets(&bad), Err(Error::Dimension(_))));
    }
}
