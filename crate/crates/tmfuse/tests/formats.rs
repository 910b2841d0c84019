use std::path::Path;

use proptest::prelude::*;
use tempfile::tempdir;
use tmfuse::{config, fmat, model_file, trials, wav};
use tmfuse_core::{build_model, model_forward, BlockSpec, FeatureMatrix, ModelConfig, TmSpec};

fn err_text<T: std::fmt::Debug>(r: tmfuse::Result<T>) -> String {
    r.unwrap_err().to_string()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fmat_round_trips_bitwise(c in 1usize..6, t in 1usize..9, seed in any::<u64>()) {
        let mut s = seed;
        let m = FeatureMatrix::from_fn(c, t, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            f64::from_bits(s >> 2) - 1.0
        });
        let back = fmat::decode(&fmat::encode(&m), Path::new("x")).unwrap();
        prop_assert_eq!(back, fmat::Fmat::F64(m.clone()));
        let m32: FeatureMatrix<f32> = m.cast();
        let back = fmat::decode(&fmat::encode(&m32), Path::new("x")).unwrap();
        prop_assert_eq!(back, fmat::Fmat::F32(m32));
    }

    #[test]
    fn config_text_round_trips(
        n in 4usize..64,
        l in 1usize..4,
        blocks in 1usize..4,
        ch in proptest::collection::vec(1usize..40, 3),
        overlap in 0.0f64..0.9,
        q in proptest::option::of(1usize..50),
        tm in any::<bool>(),
    ) {
        let cfg = ModelConfig {
            name: "p".into(),
            input_dim: n,
            tm_enabled: tm,
            tms: if tm {
                (0..blocks).map(|b| TmSpec { subset_dim: (b == 0).then_some(l), overlap, q }).collect()
            } else {
                Vec::new()
            },
            blocks: (0..blocks).map(|b| BlockSpec { channels: ch[b], kernel: 2 * b + 1, dilation: b + 2 }).collect(),
            embedding_dim: 7,
            pool_window: 5,
        };
        prop_assert_eq!(config::parse(&config::to_text(&cfg), Path::new("p.cfg")).unwrap(), cfg);
    }
}

#[test]
fn fmat_layout_and_errors() {
    let m = FeatureMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
    let bytes = fmat::encode(&m);
    assert_eq!(&bytes[..5], b"FMAT1");
    assert_eq!(&bytes[5..14], &[3, 0, 0, 0, 2, 0, 0, 0, 0]);
    assert_eq!(bytes.len(), 14 + 6 * 8);
    assert_eq!(&bytes[14..22], &1.0f64.to_le_bytes());
    assert_eq!(&bytes[22..30], &2.0f64.to_le_bytes());

    let p = Path::new("feat.fmat");
    let cases: Vec<(Vec<u8>, &str)> = vec![
        (bytes[..10].to_vec(), "header"),
        ([b"FMAT2", &bytes[5..]].concat(), "magic"),
        ([&bytes[..5], &[0, 0, 0, 0], &bytes[9..]].concat(), "channels=0"),
        ([&bytes[..9], &[0, 0, 0, 0], &bytes[13..]].concat(), "frames=0"),
        ([&bytes[..13], &[7], &bytes[14..]].concat(), "dtype=7"),
        (bytes[..bytes.len() - 3].to_vec(), "payload"),
    ];
    for (b, field) in cases {
        let e = err_text(fmat::decode(&b, p));
        assert!(e.contains("feat.fmat") && e.contains(field), "{field}: {e}");
    }
}

#[test]
fn csv_round_trip_and_errors() {
    let dir = tempdir().unwrap();
    let m = FeatureMatrix::from_rows(&[[0.1, -2.5e-17, 3.0], [1.0 / 3.0, 7.0, -0.0]]).unwrap();
    let p = dir.path().join("m.csv");
    fmat::save_any(&p, &m).unwrap();
    assert_eq!(fmat::load_any(&p).unwrap(), m);
    std::fs::write(&p, "1,2\n3,x\n").unwrap();
    let e = err_text(fmat::load_any(&p));
    assert!(e.contains("row 2 column 2"), "{e}");
    std::fs::write(&p, "1,2\n3\n").unwrap();
    assert!(fmat::load_any(&p).is_err());
}

#[test]
fn wav_reading() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("a.wav");
    wav::write_wav_pcm16(&p, &[0, 16384, -32768, 32767], 16_000).unwrap();
    let w = wav::read_wav(&p).unwrap();
    assert_eq!(w.samples, vec![0.0, 0.5, -1.0, 32767.0 / 32768.0]);
    assert_eq!(w.sample_rate, 16_000);

    let spec = |channels, bits, fmt| hound::WavSpec { channels, sample_rate: 8000, bits_per_sample: bits, sample_format: fmt };
    let stereo = dir.path().join("s.wav");
    let mut wr = hound::WavWriter::create(&stereo, spec(2, 16, hound::SampleFormat::Int)).unwrap();
    for _ in 0..8 {
        wr.write_sample(1i16).unwrap();
    }
    wr.finalize().unwrap();
    assert!(err_text(wav::read_wav(&stereo)).contains("channels=2"));

    let byte = dir.path().join("b.wav");
    let mut wr = hound::WavWriter::create(&byte, spec(1, 8, hound::SampleFormat::Int)).unwrap();
    wr.write_sample(1i8).unwrap();
    wr.finalize().unwrap();
    assert!(err_text(wav::read_wav(&byte)).contains("bits_per_sample=8"));

    let float = dir.path().join("f.wav");
    let mut wr = hound::WavWriter::create(&float, spec(1, 32, hound::SampleFormat::Float)).unwrap();
    wr.write_sample(0.5f32).unwrap();
    wr.finalize().unwrap();
    assert!(err_text(wav::read_wav(&float)).contains("format=float"));

    let junk = dir.path().join("j.wav");
    std::fs::write(&junk, b"RIFX\0\0\0\0WAVEjunk").unwrap();
    let e = err_text(wav::read_wav(&junk));
    assert!(e.contains("j.wav") && e.contains("header"), "{e}");
}

#[test]
fn model_file_round_trip() {
    let dir = tempdir().unwrap();
    let cfg = ModelConfig::with_tm(12, 4, 0.5, 6, 2);
    let model = build_model(&cfg, 11).unwrap();
    let p = dir.path().join("m.tmmd");
    model_file::save(&p, &model).unwrap();
    let back = model_file::load(&p).unwrap();
    assert_eq!(back, model);
    let x = FeatureMatrix::from_fn(12, 9, |c, t| ((c * 7 + t * 3) % 5) as f64 - 2.0);
    assert_eq!(model_forward(&back, &x).unwrap(), model_forward(&model, &x).unwrap());

    let bytes = std::fs::read(&p).unwrap();
    assert_eq!(&bytes[..5], b"TMMD1");
    let len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    assert_eq!(std::str::from_utf8(&bytes[9..9 + len]).unwrap(), config::to_text(&cfg));
    let count = u64::from_le_bytes(bytes[9 + len..17 + len].try_into().unwrap()) as usize;
    assert_eq!(count, model.param_len());
    assert_eq!(bytes.len(), 17 + len + 8 * count);
    let first = f64::from_le_bytes(bytes[17 + len..25 + len].try_into().unwrap());
    assert_eq!(first, model.params_flat()[0]);

    let q = Path::new("m.tmmd");
    assert!(err_text(model_file::decode(&bytes[..bytes.len() - 8], q)).contains("parameters"));
    assert!(err_text(model_file::decode(b"TMMD0\0\0\0\0", q)).contains("magic"));
    let mut wrong = bytes.clone();
    wrong[9 + len] ^= 1;
    assert!(err_text(model_file::decode(&wrong, q)).contains("parameter count"));
}

#[test]
fn config_file_errors_name_file_and_line() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("bad.cfg");
    std::fs::write(&p, "# comment\nn = 80\nkernel = three\n").unwrap();
    let e = err_text(config::load(&p));
    assert!(e.contains("bad.cfg") && e.contains("line 3") && e.contains("kernel"), "{e}");
}

#[test]
fn trial_files() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("t.tsv");
    std::fs::write(&p, "target\t0.9\nnontarget\t0.1\n").unwrap();
    assert_eq!(trials::load_scored(&p).unwrap().counts(), (1, 1));
    assert!(trials::load_pairs(&p).is_err());
    std::fs::write(&p, "target\ta\tb\n").unwrap();
    assert_eq!(trials::load_pairs(&p).unwrap().len(), 1);
    let e = err_text(trials::load_scored(&p));
    assert!(e.contains("t.tsv") && e.contains("line 1"), "{e}");
}
