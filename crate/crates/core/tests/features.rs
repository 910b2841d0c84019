use std::f64::consts::PI;

use proptest::prelude::*;
use rand::Rng;
use tmfuse_core::features::{extract_logmel, sliding_cmvn, FrameConfig, Waveform, DEFAULT_SAMPLE_RATE};
use tmfuse_core::tensor::seeded_rng;
use tmfuse_core::FeatureMatrix;

fn sine(hz: f64, seconds: f64) -> Waveform {
    let n = (seconds * DEFAULT_SAMPLE_RATE as f64) as usize;
    let s = (0..n).map(|i| 0.5 * (2.0 * PI * hz * i as f64 / DEFAULT_SAMPLE_RATE as f64).sin()).collect();
    Waveform::new(s, DEFAULT_SAMPLE_RATE).unwrap()
}

#[test]
fn one_second_is_98_frames() {
    let f = extract_logmel(&sine(440.0, 1.0), &FrameConfig::default()).unwrap();
    assert_eq!(f.shape(), (80, 98));
}

#[test]
fn sine_peaks_in_nearest_filter() {
    // filter centers from the HTK formula, 20 Hz .. 7600 Hz, 80 filters
    let mel = |hz: f64| 2595.0 * (1.0 + hz / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let (lo, hi) = (mel(20.0), mel(7600.0));
    let centers: Vec<f64> = (1..=80).map(|i| hz(lo + (hi - lo) * i as f64 / 81.0)).collect();
    for tone in [1000.0, 500.0, 3000.0] {
        let nearest = (0..80)
            .min_by(|&a, &b| (centers[a] - tone).abs().total_cmp(&(centers[b] - tone).abs()))
            .unwrap();
        let f = extract_logmel(&sine(tone, 0.5), &FrameConfig::default()).unwrap();
        for t in 0..f.frames() {
            let argmax = (0..80).max_by(|&a, &b| f.get(a, t).total_cmp(&f.get(b, t))).unwrap();
            assert_eq!(argmax, nearest, "{tone} Hz, frame {t}");
        }
    }
}

#[test]
fn filterbank_energy_is_linear_in_power() {
    let mut rng = seeded_rng(3);
    let cfg = FrameConfig::default();
    let energy = |amp: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        let s: Vec<f64> = (0..1600).map(|_| rng.random_range(-amp..amp)).collect();
        let f = extract_logmel(&Waveform::new(s, DEFAULT_SAMPLE_RATE).unwrap(), &cfg).unwrap();
        f.data().iter().map(|v| v.exp()).sum::<f64>()
    };
    let (mut low, mut high) = (0.0, 0.0);
    for _ in 0..100 {
        low += energy(0.1, &mut rng);
        high += energy(0.2, &mut rng);
    }
    assert!(low.is_finite() && high.is_finite());
    let ratio = high / low;
    assert!((ratio / 4.0 - 1.0).abs() <= 0.05, "{ratio}");
}

fn naive_cmvn(f: &FeatureMatrix, len: usize) -> FeatureMatrix {
    let t = f.frames();
    FeatureMatrix::from_fn(f.channels(), t, |c, i| {
        let start = i.saturating_sub(len / 2).min(t.saturating_sub(len));
        let end = (start + len).min(t);
        let w = &f.row(c)[start..end];
        let m = w.iter().sum::<f64>() / w.len() as f64;
        let sd = (w.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / w.len() as f64).sqrt();
        (f.get(c, i) - m) / (sd + 1e-8)
    })
}

#[test]
fn cmvn_matches_naive_windows() {
    let ramp = FeatureMatrix::from_fn(3, 600, |c, t| (c as f64 + 1.0) * t as f64 * 0.05 + (t as f64 * 0.3).sin());
    let got = sliding_cmvn(&ramp, 3.0, 10.0).unwrap();
    let want = naive_cmvn(&ramp, 300);
    assert!(got.max_abs_diff(&want) <= 1e-9, "{}", got.max_abs_diff(&want));

    // a window wholly inside the utterance is centered on its frame
    let got_mid = got.row(0)[300];
    let w = &ramp.row(0)[150..450];
    let m = w.iter().sum::<f64>() / 300.0;
    let sd = (w.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 300.0).sqrt();
    assert!((got_mid - (ramp.get(0, 300) - m) / (sd + 1e-8)).abs() <= 1e-9);
}

#[test]
fn cmvn_window_statistics_are_centered() {
    let mut rng = seeded_rng(5);
    let f = FeatureMatrix::from_fn(2, 900, |_, _| rng.random_range(-3.0..7.0));
    let n = sliding_cmvn(&f, 3.0, 10.0).unwrap();
    // the center frame's window, renormalized with its own statistics
    let t = 450;
    for c in 0..2 {
        let w = &f.row(c)[t - 150..t + 150];
        let m = w.iter().sum::<f64>() / 300.0;
        let sd = (w.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 300.0).sqrt();
        let mean: f64 = w.iter().map(|v| (v - m) / (sd + 1e-8)).sum::<f64>() / 300.0;
        assert!(mean.abs() <= 1e-6);
        assert!((n.get(c, t) - (f.get(c, t) - m) / (sd + 1e-8)).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_count_matches_iteration(samples in 400usize..20_000) {
        let cfg = FrameConfig::default();
        let mut count = 0;
        let mut start = 0;
        while start + 400 <= samples {
            count += 1;
            start += 160;
        }
        prop_assert_eq!(cfg.num_frames(samples, DEFAULT_SAMPLE_RATE), count);
    }
}
