use alloc::vec::Vec;

use super::{ConvParams, FeatureMatrix};
use crate::error::{bail, Result};
use crate::real::Real;
use crate::EPS;

/// Kernel-size-1 convolution: `out[q,t] = bias[q] + sum_c W[q,c] x[c,t]`.
pub fn pointwise_conv<T: Real>(x: &FeatureMatrix<T>, p: &ConvParams<T>) -> Result<FeatureMatrix<T>> {
    if p.kernel_size != 1 {
        bail!(Config, "pointwise convolution needs kernel_size 1, got {}", p.kernel_size);
    }
    check_in(x, p)?;
    let data = conv_kernel(x.data(), p.in_channels, x.frames(), &p.weights, &p.bias, p.out_channels, 1, 1);
    Ok(FeatureMatrix::from_raw(p.out_channels, x.frames(), data))
}

/// Same-length dilated cross-correlation with symmetric zero padding of
/// `(kernel_size - 1) * dilation / 2` frames per side.
pub fn dilated_conv1d<T: Real>(x: &FeatureMatrix<T>, p: &ConvParams<T>) -> Result<FeatureMatrix<T>> {
    if p.kernel_size.is_multiple_of(2) {
        bail!(Config, "dilated convolution needs an odd kernel_size, got {}", p.kernel_size);
    }
    check_in(x, p)?;
    let data = conv_kernel(
        x.data(),
        p.in_channels,
        x.frames(),
        &p.weights,
        &p.bias,
        p.out_channels,
        p.kernel_size,
        p.dilation,
    );
    Ok(FeatureMatrix::from_raw(p.out_channels, x.frames(), data))
}

fn check_in<T: Real>(x: &FeatureMatrix<T>, p: &ConvParams<T>) -> Result<()> {
    if x.channels() != p.in_channels {
        bail!(
            Dimension,
            "convolution expects {} input channels, got {}",
            p.in_channels,
            x.channels()
        );
    }
    Ok(())
}

/// Raw same-length convolution. `kernel` must be odd; `weights` is
/// `out x in x kernel` row-major.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_kernel<T: Real>(
    x: &[T],
    in_channels: usize,
    frames: usize,
    weights: &[T],
    bias: &[T],
    out_channels: usize,
    kernel: usize,
    dilation: usize,
) -> Vec<T> {
    let pad = ((kernel - 1) * dilation / 2) as isize;
    let mut out = Vec::with_capacity(out_channels * frames);
    for &b in bias.iter().take(out_channels) {
        out.extend(core::iter::repeat_n(b, frames));
    }
    for o in 0..out_channels {
        let row = &mut out[o * frames..(o + 1) * frames];
        for c in 0..in_channels {
            let xin = &x[c * frames..(c + 1) * frames];
            for k in 0..kernel {
                let w = weights[(o * in_channels + c) * kernel + k];
                let shift = (k * dilation) as isize - pad;
                let lo = (-shift).max(0) as usize;
                let hi = (frames as isize - shift).min(frames as isize);
                if hi <= lo as isize {
                    continue;
                }
                let hi = hi as usize;
                let src = &xin[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
                for (y, &v) in row[lo..hi].iter_mut().zip(src) {
                    *y = *y + w * v;
                }
            }
        }
    }
    out
}

/// Temporal moving average over `window` frames (odd), replicating edge
/// frames. Output shape equals input shape.
pub fn moving_avg_pool<T: Real>(x: &FeatureMatrix<T>, window: usize) -> Result<FeatureMatrix<T>> {
    if window == 0 || window.is_multiple_of(2) {
        bail!(Config, "pooling window must be odd and positive, got {window}");
    }
    Ok(FeatureMatrix::from_raw(
        x.channels(),
        x.frames(),
        moving_avg_kernel(x.data(), x.channels(), x.frames(), window),
    ))
}

pub(crate) fn moving_avg_kernel<T: Real>(x: &[T], channels: usize, frames: usize, window: usize) -> Vec<T> {
    if window == 1 {
        return x.to_vec();
    }
    let half = (window / 2) as isize;
    let last = frames as isize - 1;
    let scale = T::from_f64(window as f64);
    let mut out = Vec::with_capacity(x.len());
    for c in 0..channels {
        let row = &x[c * frames..(c + 1) * frames];
        for t in 0..frames as isize {
            let mut acc = T::zero();
            for j in -half..=half {
                acc = acc + row[(t + j).clamp(0, last) as usize];
            }
            out.push(acc / scale);
        }
    }
    out
}

/// Per-frame Z-score across channels with population statistics:
/// `(x - mean_t) / (std_t + EPS)`.
pub fn znorm_frames<T: Real>(x: &FeatureMatrix<T>) -> FeatureMatrix<T> {
    let (data, _, _) = znorm_kernel(x.data(), x.channels(), x.frames());
    FeatureMatrix::from_raw(x.channels(), x.frames(), data)
}

/// Returns the normalized data plus per-frame means and stds.
pub(crate) fn znorm_kernel<T: Real>(x: &[T], channels: usize, frames: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
    let n = T::from_f64(channels as f64);
    let mut mean = alloc::vec![T::zero(); frames];
    for c in 0..channels {
        for (m, &v) in mean.iter_mut().zip(&x[c * frames..(c + 1) * frames]) {
            *m = *m + v;
        }
    }
    for m in &mut mean {
        *m = *m / n;
    }
    let mut var = alloc::vec![T::zero(); frames];
    for c in 0..channels {
        for ((s, &v), &m) in var.iter_mut().zip(&x[c * frames..(c + 1) * frames]).zip(&mean) {
            let d = v - m;
            *s = *s + d * d;
        }
    }
    let std: Vec<T> = var.iter().map(|&s| (s / n).sqrt()).collect();
    let eps = T::from_f64(EPS);
    let mut out = Vec::with_capacity(x.len());
    for c in 0..channels {
        for t in 0..frames {
            out.push((x[c * frames + t] - mean[t]) / (std[t] + eps));
        }
    }
    (out, mean, std)
}

/// Per-channel temporal mean followed by per-channel temporal population
/// std, the latter floored at `EPS`. Length `2 * channels`.
pub fn stats_pooling<T: Real>(x: &FeatureMatrix<T>) -> Vec<T> {
    stats_pool_kernel(x.data(), x.channels(), x.frames())
}

pub(crate) fn stats_pool_kernel<T: Real>(x: &[T], channels: usize, frames: usize) -> Vec<T> {
    let n = T::from_f64(frames as f64);
    let eps = T::from_f64(EPS);
    let mut out = alloc::vec![T::zero(); 2 * channels];
    for c in 0..channels {
        let row = &x[c * frames..(c + 1) * frames];
        let m = row.iter().fold(T::zero(), |a, &v| a + v) / n;
        let var = row.iter().fold(T::zero(), |a, &v| a + (v - m) * (v - m)) / n;
        out[c] = m;
        out[channels + c] = var.sqrt().max(eps);
    }
    out
}

pub fn relu<T: Real>(x: &FeatureMatrix<T>) -> FeatureMatrix<T> {
    x.map(|v| v.max(T::zero()))
}

pub fn add<T: Real>(a: &FeatureMatrix<T>, b: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
    if a.shape() != b.shape() {
        bail!(Dimension, "cannot add {:?} and {:?}", a.shape(), b.shape());
    }
    Ok(FeatureMatrix::from_raw(
        a.channels(),
        a.frames(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect(),
    ))
}

/// Stacks matrices along the channel axis, in order.
pub fn concat_channels<T: Real>(parts: &[&FeatureMatrix<T>]) -> Result<FeatureMatrix<T>> {
    let Some(first) = parts.first() else {
        bail!(Dimension, "nothing to concatenate");
    };
    let frames = first.frames();
    let mut channels = 0;
    let mut data = Vec::new();
    for (i, p) in parts.iter().enumerate() {
        if p.frames() != frames {
            bail!(Dimension, "part {i} has {} frames, expected {frames}", p.frames());
        }
        channels += p.channels();
        data.extend_from_slice(p.data());
    }
    Ok(FeatureMatrix::from_raw(channels, frames, data))
}

/// Splices matrices along the frame axis, in order.
pub fn concat_frames<T: Real>(parts: &[&FeatureMatrix<T>]) -> Result<FeatureMatrix<T>> {
    let Some(first) = parts.first() else {
        bail!(Dimension, "nothing to concatenate");
    };
    let channels = first.channels();
    if let Some(i) = parts.iter().position(|p| p.channels() != channels) {
        bail!(Dimension, "part {i} has {} channels, expected {channels}", parts[i].channels());
    }
    let frames: usize = parts.iter().map(|p| p.frames()).sum();
    let mut data = Vec::with_capacity(channels * frames);
    for c in 0..channels {
        for p in parts {
            data.extend_from_slice(p.row(c));
        }
    }
    Ok(FeatureMatrix::from_raw(channels, frames, data))
}
