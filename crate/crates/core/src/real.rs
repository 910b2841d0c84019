use core::fmt::Debug;

use num_traits::Float;

/// Scalar type of a [`FeatureMatrix`](crate::FeatureMatrix).
///
/// Implemented for `f64` (the default everywhere) and `f32`. The tape and
/// all gradient work is `f64` only.
pub trait Real: Float + Default + Debug + Send + Sync + 'static {
    /// Identifier used by binary formats: 0 for `f64`, 1 for `f32`.
    const DTYPE: u8;

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f64 {
    const DTYPE: u8 = 0;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    const DTYPE: u8 = 1;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}
