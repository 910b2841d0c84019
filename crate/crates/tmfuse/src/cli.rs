//! The `tmfuse` command line.
//!
//! Every command builds its whole stdout as a string before anything is
//! written, so output is identical across runs and thread counts.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{error::ErrorKind, CommandFactory, Parser, Subcommand, ValueEnum};
use tmfuse_core::complexity::{analyze, complexity_report};
use tmfuse_core::eval::{compute_eer, cosine_score, synth_dataset, SynthConfig, TrainConfig, TrialSet};
use tmfuse_core::features::{extract_logmel, sliding_cmvn, FrameConfig};
use tmfuse_core::gradcheck::check_model;
use tmfuse_core::model::Stage;
use tmfuse_core::tm::tm_forward_lanes;
use tmfuse_core::{build_model, count_params, model_forward, plan_partition, FeatureMatrix, ModelGraph, Real};

use crate::error::{Error, Result};
use crate::fmat;
use crate::numfmt::{g6, rate};
use crate::parallel::RayonRunner;
use crate::{config, model_file, trials, wav};

#[derive(Debug, Parser)]
#[command(name = "tmfuse", version, about = "Transformation Module toolkit for speaker embedding models")]
struct Cli {
    /// Upper bound on worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Precision {
    F64,
    F32,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Print the subset count, stride and start channels of a partition.
    PartitionPlan {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        l: usize,
        /// Overlap as a fraction of the subset size.
        #[arg(long, default_value_t = 0.0)]
        overlap: f64,
    },
    /// Parameter and MAC counts, relative to the first config.
    Complexity {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value_t = 200)]
        frames: usize,
        /// Also print a per-stage breakdown.
        #[arg(long)]
        stages: bool,
    },
    /// Embed one feature matrix.
    Forward {
        #[arg(long, required_unless_present = "model")]
        config: Option<PathBuf>,
        /// Trained model; replaces `--config` and `--seed`.
        #[arg(long, conflicts_with = "config")]
        model: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, required_unless_present = "model")]
        seed: Option<u64>,
        /// Write every TM intermediate here as FMAT1 files.
        #[arg(long)]
        dump_intermediates: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "f64")]
        precision: Precision,
        /// Write the embedding as a `D x 1` matrix instead of printing it.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Finite-difference check of the model gradients.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        frames: usize,
        /// Parameters to check, sampled when the model has more.
        #[arg(long, default_value_t = 300)]
        max_params: usize,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Log-Mel features of a 16-bit PCM mono WAV file.
    ExtractFeatures {
        input: PathBuf,
        /// `.csv` writes CSV, anything else FMAT1.
        output: PathBuf,
        /// Sliding-window mean and variance normalization.
        #[arg(long)]
        cmvn: bool,
        #[arg(long, default_value_t = 3.0)]
        cmvn_window: f64,
        #[arg(long, default_value_t = 80)]
        n_mels: usize,
    },
    /// Train on a synthetic speaker dataset.
    TrainToy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 10)]
        speakers: usize,
        #[arg(long, default_value_t = 20)]
        utts: usize,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = 2.0)]
        noise: f64,
        #[arg(long, default_value_t = 16)]
        batch: usize,
        #[arg(long, default_value_t = 5e-3)]
        lr: f64,
        #[arg(long, default_value_t = 10)]
        warmup: usize,
        #[arg(long, default_value_t = 0.25)]
        val_fraction: f64,
        /// Stop after this many epochs without a better validation EER.
        #[arg(long)]
        patience: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Metrics as `epoch loss val_eer lr` TSV.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Cosine-score a trial list with a trained model.
    Score {
        #[arg(long)]
        model: PathBuf,
        /// `label<TAB>enroll<TAB>test` lines.
        #[arg(long)]
        trials: PathBuf,
        /// Directory holding `<id>.fmat` (or `<id>.csv`) per utterance id.
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Equal error rate of a scored trial list.
    Eer {
        /// `label<TAB>score` lines.
        #[arg(long)]
        trials: PathBuf,
        /// Also print the threshold.
        #[arg(long)]
        verbose: bool,
    },
}

/// Runs one invocation and returns the process exit code: 0 on success, 1
/// for bad arguments or inputs, 2 for internal failures.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let mut text = e.render().to_string();
            if !text.contains("Usage:") {
                text.push('\n');
                text.push_str(&usage_for(&args));
            }
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    let result = catch_unwind(AssertUnwindSafe(|| dispatch(cli)))
        .unwrap_or_else(|_| Err(Error::Internal("command panicked".into())));
    match result {
        Ok(text) => match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(err, "error: writing stdout: {e}");
                2
            }
        },
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Usage line of the subcommand named in `args`, or of the whole program.
fn usage_for(args: &[OsString]) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let sub = args
        .iter()
        .skip(1)
        .find_map(|a| cmd.get_subcommands().find(|s| a.to_str() == Some(s.get_name())).cloned());
    let usage = match sub {
        Some(mut s) => s.render_usage(),
        None => cmd.render_usage(),
    };
    format!("{usage}\n")
}

fn dispatch(cli: Cli) -> Result<String> {
    let threads = cli.threads;
    match cli.cmd {
        Cmd::PartitionPlan { n, l, overlap } => {
            let p = plan_partition(n, l, overlap)?;
            let starts: Vec<String> = p.starts.iter().map(|s| s.to_string()).collect();
            Ok(format!("J={}\tstride={}\tstarts={}\n", p.j, p.stride, starts.join(",")))
        }
        Cmd::Complexity { configs, frames, stages } => complexity(&configs, frames, stages),
        Cmd::Forward { config, model, input, seed, dump_intermediates, precision, output } => {
            let model = match (model, config, seed) {
                (Some(m), _, _) => model_file::load(m)?,
                (None, Some(c), Some(s)) => build_model(&config::load(c)?, s)?,
                _ => return Err(Error::Internal("argument parser let through forward without a model".into())),
            };
            let x = fmat::load_any_typed(&input)?;
            let dump = dump_intermediates.as_deref();
            match precision {
                Precision::F64 => forward(&model, &x.to_f64(), dump, output.as_deref()),
                Precision::F32 => forward(&model.cast::<f32>(), &x.to_f32(), dump, output.as_deref()),
            }
        }
        Cmd::Gradcheck { config, seed, frames, max_params, tol } => {
            let cfg = config::load(&config)?;
            let r = check_model(&cfg, seed, frames, max_params)?;
            let verdict = if r.passes(tol) { "PASS" } else { "FAIL" };
            let line = format!("max_rel_err={}\tchecked={}\t{verdict}\n", g6(r.max_rel_err), r.checked);
            if r.passes(tol) {
                Ok(line)
            } else {
                Err(Error::Internal(format!("gradient check failed: {}", line.trim_end())))
            }
        }
        Cmd::ExtractFeatures { input, output, cmvn, cmvn_window, n_mels } => {
            let w = wav::read_wav(&input)?;
            let fc = FrameConfig { n_mels, ..FrameConfig::default() };
            let mut f = extract_logmel(&w, &fc)?;
            if cmvn {
                f = sliding_cmvn(&f, cmvn_window, fc.shift_ms)?;
            }
            fmat::save_any(&output, &f)?;
            Ok(format!("channels={}\tframes={}\n", f.channels(), f.frames()))
        }
        Cmd::TrainToy {
            config,
            seed,
            epochs,
            speakers,
            utts,
            frames,
            noise,
            batch,
            lr,
            warmup,
            val_fraction,
            patience,
            out,
            log,
        } => {
            let cfg = config::load(&config)?;
            let data = synth_dataset(&SynthConfig {
                n_speakers: speakers,
                n_utts: utts,
                dim: cfg.input_dim,
                frames,
                noise,
                seed,
            })?;
            let tc = TrainConfig {
                epochs,
                batch_size: batch,
                warmup_steps: warmup,
                lr_max: lr,
                val_fraction,
                patience,
                seed,
                ..TrainConfig::default()
            };
            let runner = RayonRunner::new(threads)?;
            let outcome = tmfuse_core::eval::train::train_toy_with(&runner, &cfg, &data, &tc)?;
            let mut table = String::from("epoch\tloss\tval_eer\tlr\n");
            for m in &outcome.log {
                writeln!(table, "{}\t{}\t{}\t{}", m.epoch, g6(m.loss), g6(m.val_eer), g6(m.lr)).unwrap();
            }
            if let Some(p) = &log {
                std::fs::write(p, &table).map_err(|e| Error::io(p, e))?;
            }
            if let Some(p) = &out {
                model_file::save(p, &outcome.model)?;
            }
            writeln!(
                table,
                "params={}\tbest_epoch={}\tstopped_early={}",
                count_params(&outcome.model),
                outcome.best_epoch,
                outcome.stopped_early
            )
            .unwrap();
            Ok(table)
        }
        Cmd::Score { model, trials: list, features, out } => {
            let model = model_file::load(model)?;
            let pairs = trials::load_pairs(&list)?;
            let ids: BTreeMap<&str, ()> =
                pairs.iter().flat_map(|p| [(p.enroll.as_str(), ()), (p.test.as_str(), ())]).collect();
            let ids: Vec<&str> = ids.into_keys().collect();
            let runner = RayonRunner::new(threads)?;
            let embs = runner.map(&ids, |id| -> Result<Vec<f64>> {
                let x = fmat::load_any(feature_path(&features, id))?;
                Ok(model_forward(&model, &x)?)
            });
            let mut by_id = BTreeMap::new();
            for (id, e) in ids.iter().zip(embs) {
                by_id.insert(*id, e?);
            }
            let mut set = TrialSet::new();
            for p in &pairs {
                set.push(cosine_score(&by_id[p.enroll.as_str()], &by_id[p.test.as_str()])?, p.target);
            }
            let text = trials::format_scored(&set);
            match out {
                Some(p) => {
                    std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
                    Ok(String::new())
                }
                None => Ok(text),
            }
        }
        Cmd::Eer { trials: list, verbose } => {
            let e = compute_eer(&trials::load_scored(&list)?)?;
            if verbose {
                Ok(format!("EER={}\tthreshold={}\n", rate(e.eer), g6(e.threshold)))
            } else {
                Ok(format!("EER={}\n", rate(e.eer)))
            }
        }
    }
}

/// `<dir>/<id>` when `id` names a file with an extension, else
/// `<dir>/<id>.fmat`.
fn feature_path(dir: &Path, id: &str) -> PathBuf {
    let p = dir.join(id);
    if p.extension().is_some() {
        p
    } else {
        dir.join(format!("{id}.fmat"))
    }
}

fn complexity(paths: &[PathBuf], frames: usize, stages: bool) -> Result<String> {
    let configs = paths.iter().map(config::load).collect::<Result<Vec<_>>>()?;
    let rows = complexity_report(&configs, frames)?;
    let mut s = String::from("name\tpn\tmacs\tpn_pct\tmacs_pct\n");
    for r in &rows {
        writeln!(s, "{}\t{}\t{}\t{}\t{}", r.name, r.pn, r.macs, g6(r.pn_pct), g6(r.macs_pct)).unwrap();
    }
    if stages {
        s.push_str("\nname\tstage\tpn\tmacs\n");
        for cfg in &configs {
            let report = analyze(&build_model(cfg, 0)?, frames);
            for st in &report.per_stage {
                writeln!(s, "{}\t{}\t{}\t{}", cfg.name, st.name, st.pn, st.macs()).unwrap();
            }
        }
    }
    Ok(s)
}

fn forward<T: Real>(
    model: &ModelGraph<T>,
    x: &FeatureMatrix<T>,
    dump: Option<&Path>,
    output: Option<&Path>,
) -> Result<String> {
    let trace = model.forward_trace(x)?;
    if let Some(dir) = dump {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut k = 0;
        for (s, stage) in model.stages.iter().enumerate() {
            let Stage::Tm { plan, params } = stage else { continue };
            k += 1;
            let r = tm_forward_lanes(&trace[s], plan, params)?;
            let im = &r.intermediates;
            let save = |name: String, m: &FeatureMatrix<T>| fmat::save(dir.join(format!("tm{k}_{name}.fmat")), m);
            for i in 0..plan.j {
                save(format!("g_{}", i + 1), &im.g[i])?;
                save(format!("p_{}", i + 1), &im.p[i])?;
                save(format!("u_{}", i + 1), &im.u[i])?;
                save(format!("z_{}", i + 1), &im.z[i])?;
                save(format!("fprime_{}", i + 1), &r.outputs[i])?;
            }
            save("v".into(), &im.v)?;
        }
    }
    let emb = trace
        .last()
        .and_then(|l| l.first())
        .ok_or_else(|| Error::Internal("model produced no output".into()))?;
    match output {
        Some(p) => {
            fmat::save_any(p, emb)?;
            Ok(String::new())
        }
        None => Ok(emb.data().iter().map(|v| g6(v.as_f64()) + "\n").collect()),
    }
}
