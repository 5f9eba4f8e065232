use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{optimizer_step, BestSnapshot, Checkpoint, OptimizerState, TrainConfig};
use crate::dataio::{ConversationSample, Dataset};
use crate::error::{Error, Result};
use crate::eval::{predict, ConfusionMatrix};
use crate::lda::{Corpus, LdaModel, TopicDistribution};
use crate::network::{Mode, ModelParams};
use crate::numcore::Gradients;
use crate::objective::{attach_loss, LossReport, SampleLoss};

/// LDA topic distribution per training-sample id.
pub type TargetMap = BTreeMap<String, TopicDistribution>;

/// Mixes a base seed with two stream coordinates (splitmix64 finalizer).
pub(crate) fn stream_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fits LDA on the supervisory documents of `train` and returns the fitted
/// model with each document's topic distribution keyed by sample id.
pub fn fit_targets(train: &Dataset, cfg: &TrainConfig) -> Result<(LdaModel, TargetMap)> {
    let missing: Vec<&str> = train
        .samples
        .iter()
        .filter(|s| !s.has_doc())
        .map(|s| s.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "topic supervision is enabled but {} training samples have no document: {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    let docs: Vec<&[String]> = train
        .samples
        .iter()
        .map(|s| s.doc_tokens().expect("checked above"))
        .collect();
    let corpus = Corpus::from_token_docs(docs);
    let lda = LdaModel::fit(&corpus, &cfg.lda_config())?;
    let mut targets = TargetMap::new();
    for (d, s) in train.samples.iter().enumerate() {
        targets.insert(s.id.clone(), lda.doc_topic_distribution(d)?);
    }
    Ok((lda, targets))
}

/// Topic targets for training. Empty, without touching any document, when
/// topic supervision is off.
pub fn prepare_targets(train: &Dataset, cfg: &TrainConfig) -> Result<TargetMap> {
    if !cfg.sdat_enabled {
        return Ok(TargetMap::new());
    }
    fit_targets(train, cfg).map(|(_, t)| t)
}

/// Losses of one sample. `kl` is present only when the model has a topic
/// head and a target was supplied.
pub fn sample_loss(
    model: &ModelParams,
    sample: &ConversationSample,
    target: Option<&TopicDistribution>,
    cfg: &TrainConfig,
    mode: Mode,
) -> Result<SampleLoss> {
    let mut pass = model.forward(sample, mode)?;
    let vars = attach_loss(
        &mut pass.tape,
        &pass.vars,
        sample.label(cfg.label_target),
        target,
        &cfg.weights,
        cfg.kl_direction,
    )?;
    Ok(SampleLoss {
        id: sample.id.clone(),
        ce: pass.tape.value(vars.ce).item(),
        kl: vars.kl.map(|v| pass.tape.value(v).item()),
    })
}

/// Evaluation-mode losses over a whole dataset.
pub fn dataset_losses(
    model: &ModelParams,
    ds: &Dataset,
    targets: &TargetMap,
    cfg: &TrainConfig,
) -> Result<LossReport> {
    let per_sample = ds
        .samples
        .par_iter()
        .map(|s| sample_loss(model, s, targets.get(&s.id), cfg, Mode::Eval))
        .collect::<Result<Vec<_>>>()?;
    Ok(LossReport::from_samples(per_sample, &cfg.weights))
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_s: f64,
    pub l_t: f64,
    pub total: f64,
    pub val_accuracy: f64,
    pub val_weighted_f1: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub config: TrainConfig,
    pub history: Vec<EpochRecord>,
    /// Parameters with the highest validation accuracy (earliest on ties).
    pub best: Checkpoint,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub best_val_weighted_f1: f64,
    /// Resumable state after the last epoch.
    pub last: Checkpoint,
}

/// A training run in progress: model, optimizer, epoch counter, best model.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    train: &'a Dataset,
    val: &'a Dataset,
    targets: TargetMap,
    model: ModelParams,
    optimizer: OptimizerState,
    epoch: usize,
    best: BestSnapshot,
    best_f1: f64,
}

fn validation_scores(model: &ModelParams, val: &Dataset, cfg: &TrainConfig) -> Result<(f64, f64)> {
    let pred = predict(model, val)?;
    let cm = ConfusionMatrix::from_predictions(&pred, &val.labels(cfg.label_target))?;
    Ok((cm.accuracy(), cm.weighted_f1()))
}

fn check_dims(train: &Dataset, val: &Dataset) -> Result<()> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train.dims != val.dims {
        return Err(Error::Validation(format!(
            "training dims {:?} differ from validation dims {:?}",
            train.dims, val.dims
        )));
    }
    Ok(())
}

impl<'a> Trainer<'a> {
    /// Fresh run: topic targets from LDA (when enabled), seeded initialization.
    pub fn new(train: &'a Dataset, val: &'a Dataset, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        check_dims(train, val)?;
        let targets = if cfg.modalities.text {
            prepare_targets(train, &cfg).map_err(|e| e.in_stage("topic targets"))?
        } else {
            TargetMap::new()
        };
        Self::with_targets(train, val, cfg, targets)
    }

    /// Fresh run with externally supplied topic targets.
    pub fn with_targets(
        train: &'a Dataset,
        val: &'a Dataset,
        cfg: TrainConfig,
        targets: TargetMap,
    ) -> Result<Self> {
        cfg.validate()?;
        check_dims(train, val)?;
        let model = ModelParams::init(&cfg.arch(train.dims), cfg.seed)?;
        let optimizer = OptimizerState::new(cfg.optimizer, &model.store);
        let (acc, f1) = validation_scores(&model, val, &cfg)?;
        let best = BestSnapshot {
            epoch: 0,
            val_accuracy: acc,
            params: model.to_records(),
        };
        Ok(Trainer {
            cfg,
            train,
            val,
            targets,
            model,
            optimizer,
            epoch: 0,
            best,
            best_f1: f1,
        })
    }

    /// Continues a run from a resumable checkpoint up to `epochs` total
    /// epochs. Targets are recomputed from `train` unless supplied.
    pub fn resume(
        ckpt: &Checkpoint,
        train: &'a Dataset,
        val: &'a Dataset,
        epochs: usize,
        targets: Option<TargetMap>,
    ) -> Result<Self> {
        let mut cfg = ckpt.config.clone();
        cfg.epochs = epochs;
        cfg.validate()?;
        check_dims(train, val)?;
        let optimizer = ckpt.optimizer.clone().ok_or_else(|| {
            Error::Config("checkpoint has no optimizer state and cannot be resumed".into())
        })?;
        let best = ckpt
            .best
            .clone()
            .ok_or_else(|| Error::Config("checkpoint has no best-model record".into()))?;
        let model = ckpt.model()?;
        if model.arch != cfg.arch(train.dims) {
            return Err(Error::Validation(
                "checkpoint architecture does not match the data".into(),
            ));
        }
        let best_model = ModelParams::from_records(model.arch.clone(), &best.params)?;
        let (_, best_f1) = validation_scores(&best_model, val, &cfg)?;
        let targets = match targets {
            Some(t) => t,
            None if cfg.modalities.text => prepare_targets(train, &cfg)?,
            None => TargetMap::new(),
        };
        Ok(Trainer {
            cfg,
            train,
            val,
            targets,
            model,
            optimizer,
            epoch: ckpt.epoch,
            best,
            best_f1,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn targets(&self) -> &TargetMap {
        &self.targets
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Resumable snapshot of the current state.
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            self.cfg.clone(),
            &self.model,
            self.epoch,
            Some(self.optimizer.clone()),
            Some(self.best.clone()),
        )
    }

    /// Runs one epoch and returns its log record.
    pub fn step_epoch(&mut self) -> Result<EpochRecord> {
        let started = Instant::now();
        let epoch = self.epoch + 1;
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(self.cfg.seed, epoch as u64, 0));
        order.shuffle(&mut rng);

        let mut losses = Vec::with_capacity(order.len());
        for (batch_no, batch) in order.chunks(self.cfg.batch_size).enumerate() {
            let diverged = |message: String| Error::Divergence {
                epoch,
                batch: batch_no,
                message,
            };
            let offset = batch_no * self.cfg.batch_size;
            let results = batch
                .par_iter()
                .enumerate()
                .map(|(j, &idx)| {
                    let sample = &self.train.samples[idx];
                    let dropout_seed =
                        stream_seed(self.cfg.seed, epoch as u64, (offset + j + 1) as u64);
                    let mut pass = self
                        .model
                        .forward(sample, Mode::Train { seed: dropout_seed })?;
                    let vars = attach_loss(
                        &mut pass.tape,
                        &pass.vars,
                        sample.label(self.cfg.label_target),
                        self.targets.get(&sample.id),
                        &self.cfg.weights,
                        self.cfg.kl_direction,
                    )?;
                    let loss = SampleLoss {
                        id: sample.id.clone(),
                        ce: pass.tape.value(vars.ce).item(),
                        kl: vars.kl.map(|v| pass.tape.value(v).item()),
                    };
                    let grads = pass.tape.backward(vars.total)?;
                    Ok((loss, grads))
                })
                .collect::<Result<Vec<_>>>()?;

            // Reduction in sample order keeps the sum bit-reproducible.
            let mut sum = Gradients::empty(self.model.store.len());
            for (loss, grads) in results {
                if !loss.ce.is_finite() || loss.kl.is_some_and(|k| !k.is_finite()) {
                    return Err(diverged(format!("non-finite loss on sample `{}`", loss.id)));
                }
                sum.add_assign(&grads);
                losses.push(loss);
            }
            sum.scale(1.0 / batch.len() as f64);
            optimizer_step(
                &mut self.model.store,
                &sum,
                self.cfg.learning_rate,
                &mut self.optimizer,
            )
            .map_err(|e| match e {
                Error::NonFinite(what) => diverged(format!("non-finite {what}")),
                other => other,
            })?;
        }

        let report = LossReport::from_samples(losses, &self.cfg.weights);
        let (val_accuracy, val_weighted_f1) = validation_scores(&self.model, self.val, &self.cfg)?;
        self.epoch = epoch;
        if val_accuracy > self.best.val_accuracy {
            self.best = BestSnapshot {
                epoch,
                val_accuracy,
                params: self.model.to_records(),
            };
            self.best_f1 = val_weighted_f1;
        }
        Ok(EpochRecord {
            epoch,
            l_s: report.l_s,
            l_t: report.l_t,
            total: report.total,
            val_accuracy,
            val_weighted_f1,
            seconds: started.elapsed().as_secs_f64(),
        })
    }

    /// Trains until the configured epoch count, calling `on_epoch` after each.
    pub fn run_with(
        mut self,
        mut on_epoch: impl FnMut(&EpochRecord, &Trainer),
    ) -> Result<TrainRun> {
        let mut history = Vec::new();
        while self.epoch < self.cfg.epochs {
            let record = self.step_epoch()?;
            log::info!(
                "epoch {} loss {:.5} (ce {:.5}, kl {:.5}) val acc {:.4}",
                record.epoch,
                record.total,
                record.l_s,
                record.l_t,
                record.val_accuracy
            );
            on_epoch(&record, &self);
            history.push(record);
        }
        let best_model = ModelParams::from_records(self.model.arch.clone(), &self.best.params)?;
        Ok(TrainRun {
            best: Checkpoint::new(self.cfg.clone(), &best_model, self.best.epoch, None, None),
            best_epoch: self.best.epoch,
            best_val_accuracy: self.best.val_accuracy,
            best_val_weighted_f1: self.best_f1,
            last: self.checkpoint(),
            config: self.cfg,
            history,
        })
    }

    pub fn run(self) -> Result<TrainRun> {
        self.run_with(|_, _| {})
    }
}

/// Trains a fresh model on `train`, selecting by accuracy on `val`.
pub fn train(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<TrainRun> {
    Trainer::new(train, val, cfg.clone())?.run()
}
