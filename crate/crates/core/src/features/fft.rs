use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::PI;
use num_traits::Float;

/// In-place iterative radix-2 FFT. `re.len()` must be a power of two.
pub(crate) fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    debug_assert!(n.is_power_of_two() && im.len() == n);
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let (w_im, w_re) = Float::sin_cos(ang);
        for start in (0..n).step_by(len) {
            let (mut cr, mut ci) = (1.0, 0.0);
            for k in 0..len / 2 {
                let a = start + k;
                let b = a + len / 2;
                let tr = re[b] * cr - im[b] * ci;
                let ti = re[b] * ci + im[b] * cr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                let next = cr * w_re - ci * w_im;
                ci = cr * w_im + ci * w_re;
                cr = next;
            }
        }
        len <<= 1;
    }
}

/// `|X_k|^2` for `k = 0..=n/2` of a real frame zero-padded to `n`.
pub(crate) fn power_spectrum(frame: &[f64], n: usize) -> Vec<f64> {
    let mut re = vec![0.0; n];
    re[..frame.len()].copy_from_slice(frame);
    let mut im = vec![0.0; n];
    fft_in_place(&mut re, &mut im);
    (0..=n / 2).map(|k| re[k] * re[k] + im[k] * im[k]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_dft() {
        let n = 64;
        let x: Vec<f64> = (0..50).map(|i| ((i * i) as f64 * 0.013).sin() + 0.1 * i as f64).collect();
        let fast = power_spectrum(&x, n);
        for (k, &p) in fast.iter().enumerate() {
            let (mut r, mut i) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let a = -2.0 * PI * (k * t) as f64 / n as f64;
                r += v * Float::cos(a);
                i += v * Float::sin(a);
            }
            assert!((p - (r * r + i * i)).abs() < 1e-9 * (1.0 + p), "bin {k}");
        }
    }
}
