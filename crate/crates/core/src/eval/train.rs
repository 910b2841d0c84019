//! Synthetic speakers and a small AAM-Softmax training loop.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::aam::AamConfig;
use super::adam::{adam_step, AdamState};
use super::schedule::{cosine_lr, ScheduleConfig};
use super::scoring::{compute_eer, TrialSet};
use crate::error::{bail, Result};
use crate::model::{build_model, model_forward, model_forward_taped, ModelConfig, ModelGraph, ModelLeaves};
use crate::tape::Tape;
use crate::tensor::FeatureMatrix;

const BUMPS_PER_SPEAKER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub n_utts: usize,
    pub dim: usize,
    pub frames: usize,
    pub noise: f64,
    pub seed: u64,
}

/// Labelled utterances.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<FeatureMatrix>,
    pub speakers: Vec<usize>,
    pub n_speakers: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if self.features.len() != self.speakers.len() {
            bail!(Input, "{} utterances but {} labels", self.features.len(), self.speakers.len());
        }
        if let Some(&s) = self.speakers.iter().find(|&&s| s >= self.n_speakers) {
            bail!(Input, "speaker id {s} out of range for {} speakers", self.n_speakers);
        }
        let mut seen = vec![false; self.n_speakers];
        self.speakers.iter().for_each(|&s| seen[s] = true);
        if seen.iter().filter(|&&b| b).count() < 2 {
            bail!(Input, "dataset needs at least two speakers");
        }
        if let Some((i, f)) = self.features.iter().enumerate().find(|(_, f)| f.channels() != input_dim) {
            bail!(Input, "utterance {i} has {} channels, model expects {input_dim}", f.channels());
        }
        Ok(())
    }

    /// Per speaker, moves the last `ceil(fraction * count)` utterances
    /// (at least one, never all) into a held-out set.
    pub fn split(&self, fraction: f64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&fraction) {
            bail!(Config, "validation fraction must lie in [0, 1), got {fraction}");
        }
        let mut train = Dataset { features: Vec::new(), speakers: Vec::new(), n_speakers: self.n_speakers };
        let mut val = train.clone();
        for s in 0..self.n_speakers {
            let idx: Vec<usize> = (0..self.len()).filter(|&i| self.speakers[i] == s).collect();
            if idx.is_empty() {
                continue;
            }
            let n_val = if fraction == 0.0 {
                0
            } else {
                (Float::ceil(fraction * idx.len() as f64) as usize).clamp(1, idx.len().saturating_sub(1))
            };
            for (k, &i) in idx.iter().enumerate() {
                let dst = if k >= idx.len() - n_val { &mut val } else { &mut train };
                dst.features.push(self.features[i].clone());
                dst.speakers.push(s);
            }
        }
        Ok((train, val))
    }
}

/// Each speaker gets a fixed spectral pattern made of a few Gaussian bumps
/// over the channel axis; every frame of an utterance is that pattern plus
/// white noise.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.n_speakers < 2 {
        bail!(Config, "need at least two speakers, got {}", cfg.n_speakers);
    }
    if cfg.n_utts == 0 || cfg.dim == 0 || cfg.frames == 0 {
        bail!(Config, "utterance count, dimension and frames must be positive");
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        bail!(Config, "noise must be a non-negative number, got {}", cfg.noise);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut features = Vec::with_capacity(cfg.n_speakers * cfg.n_utts);
    let mut speakers = Vec::with_capacity(features.capacity());
    let dim = cfg.dim as f64;
    for s in 0..cfg.n_speakers {
        let mut pattern = vec![0.0; cfg.dim];
        for _ in 0..BUMPS_PER_SPEAKER {
            let center = rng.random_range(0.0..dim);
            let width = rng.random_range(0.03..0.12) * dim;
            let amp: f64 = rng.sample(StandardNormal);
            for (c, p) in pattern.iter_mut().enumerate() {
                let z = (c as f64 - center) / width;
                *p += amp * Float::exp(-0.5 * z * z);
            }
        }
        for _ in 0..cfg.n_utts {
            let mut data = Vec::with_capacity(cfg.dim * cfg.frames);
            for &p in &pattern {
                for _ in 0..cfg.frames {
                    let n: f64 = rng.sample(StandardNormal);
                    data.push(p + cfg.noise * n);
                }
            }
            features.push(FeatureMatrix::new(cfg.dim, cfg.frames, data)?);
            speakers.push(s);
        }
    }
    Ok(Dataset { features, speakers, n_speakers: cfg.n_speakers })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub aam: AamConfig,
    pub warmup_steps: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub val_fraction: f64,
    /// Stop after this many epochs without a lower validation loss.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 512,
            aam: AamConfig::default(),
            warmup_steps: 10,
            lr_max: 1e-3,
            lr_min: 1e-8,
            val_fraction: 0.2,
            patience: Some(10),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean AAM loss over the training split after the epoch.
    pub loss: f64,
    /// Mean AAM loss over the validation split.
    pub val_loss: f64,
    pub val_eer: f64,
    /// Learning rate of the epoch's last step.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// The model of the epoch with the lowest validation loss.
    pub model: ModelGraph,
    /// Raw class weights, `speakers x embedding_dim`.
    pub classifier: FeatureMatrix,
    /// Entry 0 describes the untrained model.
    pub log: Vec<EpochMetrics>,
    /// Epoch `model` comes from; 0 when no epoch improved on the start.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Loss and flat gradient (model parameters, then class weights) of one
/// utterance.
pub fn utterance_gradient(
    model: &ModelGraph,
    classifier: &FeatureMatrix,
    features: &FeatureMatrix,
    speaker: usize,
    aam: &AamConfig,
) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let leaves = ModelLeaves::register(&mut tape, model);
    let w_raw = tape.leaf(classifier.clone());
    let input = tape.leaf(features.clone());
    let emb = model_forward_taped(&mut tape, model, &leaves, input)?;
    let w = tape.normalize_rows(w_raw)?;
    let loss = tape.aam_loss(emb, w, speaker, aam.margin, aam.scale)?;
    let grads = tape.backward(loss, 1.0)?;
    let mut flat = leaves.flat_grads(&tape, &grads);
    flat.extend_from_slice(grads.wrt(&tape, w_raw).data());
    Ok((tape.value(loss).data()[0], flat))
}

/// Loss of one utterance without recording a tape.
pub fn utterance_loss(
    model: &ModelGraph,
    classifier: &FeatureMatrix,
    features: &FeatureMatrix,
    speaker: usize,
    aam: &AamConfig,
) -> Result<f64> {
    let emb = model_forward(model, features)?;
    let cos: Vec<f64> = (0..classifier.channels())
        .map(|k| {
            let row = classifier.row(k);
            let n = Float::sqrt(row.iter().map(|a| a * a).sum::<f64>());
            row.iter().zip(&emb).map(|(a, b)| a * b).sum::<f64>() / n
        })
        .collect();
    Ok(super::aam::loss_from_cosines(&cos, speaker, aam.margin, aam.scale))
}

/// Runs a per-index job for every index in `0..n`, returning results in
/// index order. Implementations may run jobs concurrently.
pub trait BatchRunner {
    fn run<R: Send>(&self, n: usize, job: &(dyn Fn(usize) -> R + Sync)) -> Vec<R>;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl BatchRunner for Sequential {
    fn run<R: Send>(&self, n: usize, job: &(dyn Fn(usize) -> R + Sync)) -> Vec<R> {
        (0..n).map(job).collect()
    }
}

struct Evaluation {
    loss: f64,
    val_loss: f64,
    val_eer: f64,
}

fn evaluate<B: BatchRunner>(
    runner: &B,
    model: &ModelGraph,
    classifier: &FeatureMatrix,
    train: &Dataset,
    val: &Dataset,
    aam: &AamConfig,
) -> Result<Evaluation> {
    let losses = runner.run(train.len(), &|i| {
        utterance_loss(model, classifier, &train.features[i], train.speakers[i], aam)
    });
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    let val_losses = runner.run(val.len(), &|i| {
        utterance_loss(model, classifier, &val.features[i], val.speakers[i], aam)
    });
    let mut val_total = 0.0;
    for l in val_losses {
        val_total += l?;
    }
    let embs = runner.run(val.len(), &|i| model_forward(model, &val.features[i]));
    let embs = embs.into_iter().collect::<Result<Vec<_>>>()?;
    let trials = TrialSet::all_pairs(&embs, &val.speakers)?;
    Ok(Evaluation {
        loss: total / train.len() as f64,
        val_loss: val_total / val.len() as f64,
        val_eer: compute_eer(&trials)?.eer })
}

/// [`train_toy_with`] on the calling thread.
pub fn train_toy(config: &ModelConfig, dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_toy_with(&Sequential, config, dataset, cfg)
}

/// Trains a freshly built model on `dataset` with AAM-Softmax, Adam and a
/// warm-up cosine schedule, and returns the state with the lowest
/// validation loss. Per-utterance gradients of a mini-batch are
/// summed in index order, so the result does not depend on the runner.
pub fn train_toy_with<B: BatchRunner>(
    runner: &B,
    config: &ModelConfig,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.aam.validate()?;
    if cfg.batch_size == 0 {
        bail!(Config, "batch size must be positive");
    }
    dataset.validate(config.input_dim)?;
    let (train, val) = dataset.split(cfg.val_fraction)?;
    let (n_tgt, n_non) = TrialSet::all_pairs(&vec![vec![1.0]; val.len()], &val.speakers)?.counts();
    if n_tgt == 0 || n_non == 0 {
        bail!(Input, "validation split cannot form both target and nontarget trials");
    }
    if train.is_empty() {
        bail!(Input, "training split is empty");
    }

    let mut model = build_model(config, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_c1a5);
    let dim = model.embedding_dim();
    let class_data: Vec<f64> = (0..dataset.n_speakers * dim).map(|_| rng.sample(StandardNormal)).collect();
    let mut classifier = FeatureMatrix::new(dataset.n_speakers, dim, class_data)?;

    let first = evaluate(runner, &model, &classifier, &train, &val, &cfg.aam)?;
    let mut log = vec![EpochMetrics {
        epoch: 0,
        loss: first.loss,
        val_loss: first.val_loss,
        val_eer: first.val_eer,
        lr: 0.0,
    }];
    if cfg.epochs == 0 {
        return Ok(TrainOutcome { model, classifier, log, best_epoch: 0, stopped_early: false });
    }

    let steps_per_epoch = train.len().div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * steps_per_epoch;
    let schedule = ScheduleConfig {
        warmup_steps: cfg.warmup_steps.min(total_steps - 1),
        lr_max: cfg.lr_max,
        lr_min: cfg.lr_min,
        total_steps,
    };
    schedule.validate()?;

    let n_model = model.param_len();
    let mut params = model.params_flat();
    params.extend_from_slice(classifier.data());
    let mut adam = AdamState::new(params.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let (mut best_loss, mut since_best) = (first.val_loss, 0usize);
    let mut best = (0, model.clone(), classifier.clone());
    let mut stopped_early = false;
    let mut step = 0;

    for epoch in 1..=cfg.epochs {
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut shuffle_rng);
        let mut lr = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results = runner.run(batch.len(), &|k| {
                let i = batch[k];
                utterance_gradient(&model, &classifier, &train.features[i], train.speakers[i], &cfg.aam)
            });
            let mut grad = vec![0.0; params.len()];
            for r in results {
                let (_, g) = r?;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            lr = cosine_lr(step, &schedule)?;
            adam_step(&mut params, &grad, &mut adam, lr);
            model.set_params_flat(&params[..n_model])?;
            classifier = FeatureMatrix::new(dataset.n_speakers, dim, params[n_model..].to_vec())?;
            step += 1;
        }
        let ev = evaluate(runner, &model, &classifier, &train, &val, &cfg.aam)?;
        log.push(EpochMetrics { epoch, loss: ev.loss, val_loss: ev.val_loss, val_eer: ev.val_eer, lr });
        if ev.val_loss < best_loss {
            best_loss = ev.val_loss;
            since_best = 0;
            best = (epoch, model.clone(), classifier.clone());
        } else {
            since_best += 1;
        }
        if cfg.patience.is_some_and(|p| since_best >= p) && epoch < cfg.epochs {
            stopped_early = true;
            break;
        }
    }
    let (best_epoch, model, classifier) = best;
    Ok(TrainOutcome { model, classifier, log, best_epoch, stopped_early })
}
