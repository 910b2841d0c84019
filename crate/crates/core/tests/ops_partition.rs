use proptest::prelude::*;
use rand::Rng;
use tmfuse_core::partition::{concat_subsets, split};
use tmfuse_core::tape::Tape;
use tmfuse_core::tensor::{
    concat_channels, concat_frames, dilated_conv1d, moving_avg_pool, pointwise_conv, seeded_rng, stats_pooling,
    znorm_frames,
};
use tmfuse_core::{plan_partition, ConvParams, FeatureMatrix};

fn random(c: usize, t: usize, seed: u64) -> FeatureMatrix {
    let mut rng = seeded_rng(seed);
    FeatureMatrix::from_fn(c, t, |_, _| rng.random_range(-1.0..1.0))
}

fn random_conv(out: usize, inp: usize, k: usize, d: usize, seed: u64) -> ConvParams {
    ConvParams::init(out, inp, k, d, &mut seeded_rng(seed)).unwrap()
}

/// Start offsets found by stepping through every channel position.
fn enumerate_starts(n: usize, l: usize, stride: usize) -> Vec<usize> {
    let mut starts = Vec::new();
    let mut s = 0;
    while s + l <= n {
        starts.push(s);
        s += stride;
    }
    starts
}

#[test]
fn known_partitions() {
    for (overlap, j) in [(0.0, 4), (0.25, 5), (0.5, 7)] {
        let plan = plan_partition(80, 20, overlap).unwrap();
        assert_eq!(plan.j, j, "overlap {overlap}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn j_matches_enumeration(n in 1usize..200, l in 1usize..60, overlap in 0.0f64..0.95) {
        prop_assume!(l <= n);
        match plan_partition(n, l, overlap) {
            Ok(plan) => {
                let starts = enumerate_starts(n, l, plan.stride);
                prop_assert_eq!(plan.j, starts.len());
                prop_assert_eq!(&plan.starts, &starts);
                prop_assert_eq!(starts.last().unwrap() + l, n);
                let mut seen = vec![0usize; n];
                for s in &plan.starts {
                    for c in *s..s + l {
                        seen[c] += 1;
                    }
                }
                prop_assert!(seen.iter().all(|&k| k >= 1));
                if plan.overlap_dims == 0 {
                    prop_assert!(seen.iter().all(|&k| k == 1));
                }
            }
            Err(e) => {
                let od = (overlap * l as f64 + 0.5).floor() as usize;
                prop_assert!(od >= l || (n - l) % (l - od) != 0, "{e}");
            }
        }
    }

    #[test]
    fn disjoint_round_trip(l in 1usize..8, j in 1usize..6, t in 1usize..10, seed in 0u64..1000) {
        let f = random(l * j, t, seed);
        let plan = plan_partition(l * j, l, 0.0).unwrap();
        let back = concat_subsets(&split(&f, &plan).unwrap()).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn op_shapes(c in 1usize..6, o in 1usize..6, t in 1usize..12, k in 0usize..3, d in 1usize..4, seed in 0u64..1000) {
        let x = random(c, t, seed);
        let k = 2 * k + 1;
        prop_assert_eq!(pointwise_conv(&x, &random_conv(o, c, 1, 1, seed)).unwrap().shape(), (o, t));
        prop_assert_eq!(dilated_conv1d(&x, &random_conv(o, c, k, d, seed)).unwrap().shape(), (o, t));
        prop_assert_eq!(moving_avg_pool(&x, k).unwrap().shape(), (c, t));
        prop_assert_eq!(znorm_frames(&x).shape(), (c, t));
        prop_assert_eq!(stats_pooling(&x).len(), 2 * c);
        let y = random(o, t, seed + 1);
        prop_assert_eq!(concat_channels(&[&x, &y]).unwrap().shape(), (c + o, t));
        let z = random(c, t + 2, seed + 2);
        prop_assert_eq!(concat_frames(&[&x, &z]).unwrap().shape(), (c, 2 * t + 2));
    }

    #[test]
    fn pointwise_is_linear(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in 0u64..1000) {
        let mut p = random_conv(4, 3, 1, 1, seed);
        p.bias.iter_mut().for_each(|b| *b = 0.0);
        let (x, y) = (random(3, 5, seed + 1), random(3, 5, seed + 2));
        let mix = FeatureMatrix::new(3, 5, x.data().iter().zip(y.data()).map(|(a, b)| alpha * a + beta * b).collect()).unwrap();
        let lhs = pointwise_conv(&mix, &p).unwrap();
        let (fx, fy) = (pointwise_conv(&x, &p).unwrap(), pointwise_conv(&y, &p).unwrap());
        for i in 0..lhs.data().len() {
            let rhs = alpha * fx.data()[i] + beta * fy.data()[i];
            prop_assert!((lhs.data()[i] - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn moving_average_keeps_constants(v in -100.0f64..100.0, w in 0usize..4, c in 1usize..4, t in 1usize..9) {
        let x = FeatureMatrix::filled(c, t, v);
        let y = moving_avg_pool(&x, 2 * w + 1).unwrap();
        let mean = y.data().iter().sum::<f64>() / y.data().len() as f64;
        prop_assert!(y.data().iter().all(|&a| (a - v).abs() <= 1e-13 * v.abs().max(1.0)));
        prop_assert!((mean - v).abs() <= 1e-13 * v.abs().max(1.0));
    }

    #[test]
    fn tape_replay_is_bitwise(seed in 0u64..1000) {
        let mut tape = Tape::new();
        let x = tape.leaf(random(4, 6, seed));
        let p = tape.conv_params(&random_conv(3, 4, 3, 2, seed));
        let y = tape.conv(x, &p).unwrap();
        let y = tape.relu(y).unwrap();
        let z = tape.znorm(y).unwrap();
        let s = tape.stats_pool(z).unwrap();
        let n = tape.l2_normalize(s).unwrap();
        let values = tape.replay().unwrap();
        for id in [y, z, s, n] {
            prop_assert_eq!(&values[id.index()], tape.value(id));
        }
    }
}

#[test]
fn hand_examples() {
    let x: FeatureMatrix = FeatureMatrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
    let ones = ConvParams::new(1, 1, 3, 1, vec![1.0; 3], vec![0.0]).unwrap();
    assert_eq!(dilated_conv1d(&x, &ones).unwrap().data(), &[3.0, 6.0, 5.0]);
    let avg = moving_avg_pool(&x, 3).unwrap();
    for (a, b) in avg.data().iter().zip([4.0 / 3.0, 2.0, 8.0 / 3.0]) {
        assert!((a - b).abs() < 1e-15);
    }
    let col: FeatureMatrix = FeatureMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
    let z = znorm_frames(&col);
    assert!((z.data()[0] + 1.224744871391589).abs() < 1e-7);
    let pair: FeatureMatrix = FeatureMatrix::from_rows(&[vec![0.0, 2.0]]).unwrap();
    assert_eq!(stats_pooling(&pair), vec![1.0, 1.0]);
}
