//! Dense channels-by-frames matrices and the convolution parameter sets
//! that act on them.

mod ops;

use alloc::vec::Vec;

use num_traits::Float;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Result};
use crate::real::Real;

pub use ops::{
    add, concat_channels, concat_frames, dilated_conv1d, moving_avg_pool, pointwise_conv, relu,
    stats_pooling, znorm_frames,
};
pub(crate) use ops::{conv_kernel, stats_pool_kernel, znorm_kernel};

/// A `channels x frames` real matrix stored row-major in `(channel, frame)`
/// order.
///
/// Used both for audio features (channel = Mel bin) and for deep features
/// (channel = convolution output). Values are immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T: Real = f64> {
    channels: usize,
    frames: usize,
    data: Vec<T>,
}

impl<T: Real> FeatureMatrix<T> {
    /// Builds a matrix, checking shape and finiteness.
    pub fn new(channels: usize, frames: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 || frames == 0 {
            bail!(Dimension, "matrix must be non-empty, got {channels}x{frames}");
        }
        if data.len() != channels * frames {
            bail!(
                Dimension,
                "data length {} does not match {channels}x{frames}",
                data.len()
            );
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            bail!(Input, "non-finite value at channel {}, frame {}", i / frames, i % frames);
        }
        Ok(Self { channels, frames, data })
    }

    /// Shape-checked in debug builds only; callers guarantee finiteness.
    pub(crate) fn from_raw(channels: usize, frames: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), channels * frames);
        Self { channels, frames, data }
    }

    pub fn zeros(channels: usize, frames: usize) -> Self {
        Self::from_raw(channels, frames, alloc::vec![T::zero(); channels * frames])
    }

    pub fn filled(channels: usize, frames: usize, value: T) -> Self {
        Self::from_raw(channels, frames, alloc::vec![value; channels * frames])
    }

    pub fn from_fn(channels: usize, frames: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(channels * frames);
        for c in 0..channels {
            for t in 0..frames {
                data.push(f(c, t));
            }
        }
        Self::from_raw(channels, frames, data)
    }

    /// One row per channel; all rows must have the same length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            bail!(Dimension, "no rows given");
        };
        let frames = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * frames);
        for (i, r) in rows.iter().enumerate() {
            if r.as_ref().len() != frames {
                bail!(Dimension, "row {i} has {} values, expected {frames}", r.as_ref().len());
            }
            data.extend_from_slice(r.as_ref());
        }
        Self::new(rows.len(), frames, data)
    }

    /// A `len x 1` column.
    pub fn column(values: Vec<T>) -> Result<Self> {
        let n = values.len();
        Self::new(n, 1, values)
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn frames(&self) -> usize {
        self.frames
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.frames)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, channel: usize, frame: usize) -> T {
        self.data[channel * self.frames + frame]
    }

    #[inline]
    pub fn row(&self, channel: usize) -> &[T] {
        &self.data[channel * self.frames..(channel + 1) * self.frames]
    }

    /// Channels `[start, start + len)` as a new matrix.
    pub fn slice_channels(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.channels {
            bail!(
                Dimension,
                "channel slice [{start}, {}) out of range for {} channels",
                start + len,
                self.channels
            );
        }
        let f = self.frames;
        Ok(Self::from_raw(len, f, self.data[start * f..(start + len) * f].to_vec()))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(self.channels, self.frames, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn cast<U: Real>(&self) -> FeatureMatrix<U> {
        FeatureMatrix::from_raw(
            self.channels,
            self.frames,
            self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        )
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
            .fold(0.0, f64::max)
    }
}

/// Weights and bias of a 1-D convolution.
///
/// Weights are stored row-major as `out x in x kernel`. A kernel size of 1
/// is a pointwise (channel-mixing) convolution and ignores the dilation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T: Real = f64> {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_size: usize,
    pub dilation: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> ConvParams<T> {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_size: usize,
        dilation: usize,
        weights: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self> {
        check_dims(out_channels, in_channels, kernel_size, dilation)?;
        if weights.len() != out_channels * in_channels * kernel_size {
            bail!(
                Dimension,
                "weight length {} does not match {out_channels}x{in_channels}x{kernel_size}",
                weights.len()
            );
        }
        if bias.len() != out_channels {
            bail!(Dimension, "bias length {} does not match {out_channels}", bias.len());
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            bail!(Input, "non-finite convolution parameter");
        }
        Ok(Self { out_channels, in_channels, kernel_size, dilation, weights, bias })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kernel_size: usize, dilation: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            kernel_size,
            dilation,
            weights: alloc::vec![T::zero(); out_channels * in_channels * kernel_size],
            bias: alloc::vec![T::zero(); out_channels],
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and bias,
    /// with `fan_in = in_channels * kernel_size`.
    pub fn init(
        out_channels: usize,
        in_channels: usize,
        kernel_size: usize,
        dilation: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        check_dims(out_channels, in_channels, kernel_size, dilation)?;
        let mut p = Self::zeros(out_channels, in_channels, kernel_size, dilation);
        let bound = 1.0 / Float::sqrt((in_channels * kernel_size) as f64);
        for w in p.weights.iter_mut().chain(p.bias.iter_mut()) {
            *w = T::from_f64(rng.random_range(-bound..=bound));
        }
        Ok(p)
    }

    pub fn pointwise(out_channels: usize, in_channels: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Self::init(out_channels, in_channels, 1, 1, rng)
    }

    #[inline]
    pub fn weight(&self, out: usize, input: usize, tap: usize) -> T {
        self.weights[(out * self.in_channels + input) * self.kernel_size + tap]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn cast<U: Real>(&self) -> ConvParams<U> {
        ConvParams {
            out_channels: self.out_channels,
            in_channels: self.in_channels,
            kernel_size: self.kernel_size,
            dilation: self.dilation,
            weights: self.weights.iter().map(|v| U::from_f64(v.as_f64())).collect(),
            bias: self.bias.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }
}

fn check_dims(out: usize, input: usize, kernel: usize, dilation: usize) -> Result<()> {
    if out == 0 || input == 0 || kernel == 0 || dilation == 0 {
        bail!(
            Config,
            "conv dimensions must be positive: out={out} in={input} kernel={kernel} dilation={dilation}"
        );
    }
    Ok(())
}

/// Seeded generator used for every parameter initialization.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
