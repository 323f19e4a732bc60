use log::{debug, info};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamHyper, AdamState};
use super::callbacks::{early_stop_update, plateau_update, EarlyStopper, LrSchedule};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};
use crate::selfonn::Model;
use crate::tensor::{cross_entropy_with_softmax, Tensor};

/// One labelled, preprocessed input.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: Tensor,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Reshuffle the batch order every epoch.
    pub shuffle: bool,
    /// Minimum decrease of the validation loss that counts as improvement.
    pub min_delta: f64,
    pub lr_factor: f64,
    pub lr_patience: usize,
    pub min_lr: f64,
    pub early_stop_patience: usize,
    pub adam: AdamHyper,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_lr: 0.001,
            batch_size: 16,
            max_epochs: 300,
            seed: 0,
            shuffle: true,
            min_delta: 0.0,
            lr_factor: 0.5,
            lr_patience: 3,
            min_lr: 5e-5,
            early_stop_patience: 5,
            adam: AdamHyper::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.initial_lr)));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return Err(Error::Config(format!("lr_factor must lie in (0, 1), got {}", self.lr_factor)));
        }
        if self.min_lr > self.initial_lr {
            return Err(Error::Config(format!(
                "min_lr {} exceeds initial lr {}",
                self.min_lr, self.initial_lr
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Learning rate used for this epoch's updates.
    pub lr: f64,
}

impl EpochRecord {
    pub const LOG_HEADER: &'static str = "epoch\ttrain_loss\ttrain_acc\tval_loss\tval_acc\tlr";

    /// Tab-separated log line; floats use shortest round-trip formatting.
    pub fn log_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.epoch, self.train_loss, self.train_accuracy, self.val_loss, self.val_accuracy, self.lr
        )
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    /// Parameters restored from the epoch with the lowest validation loss.
    pub model: Model,
    pub records: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

/// Mean cross-entropy and predicted class per sample.
pub fn evaluate(model: &Model, samples: &[&Sample]) -> Result<(f64, Vec<usize>)> {
    if samples.is_empty() {
        return Err(Error::Input("cannot evaluate an empty sample set".into()));
    }
    let mut total = 0.0;
    let mut preds = Vec::with_capacity(samples.len());
    for s in samples {
        let logits = model.predict_logits(&s.input)?;
        total += cross_entropy_with_softmax(&logits, s.label)?.0;
        preds.push(logits.argmax());
    }
    Ok((total / samples.len() as f64, preds))
}

/// Mean loss, number of correct predictions and mean flat gradient over one
/// mini-batch. Per-sample gradients are summed in batch order.
pub fn batch_gradient(model: &Model, batch: &[&Sample]) -> Result<(f64, usize, Vec<f64>)> {
    let mut grad = vec![0.0; model.param_count()];
    let mut loss = 0.0;
    let mut correct = 0;
    for s in batch {
        let (logits, cache) = model.forward(&s.input)?;
        let (l, g_logits) = cross_entropy_with_softmax(&logits, s.label)?;
        loss += l;
        if logits.argmax() == s.label {
            correct += 1;
        }
        for (acc, g) in grad.iter_mut().zip(model.backward(&cache, &g_logits)?) {
            *acc += g;
        }
    }
    let n = batch.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, correct, grad))
}

/// Mini-batch Adam training with plateau LR reduction and early stopping on
/// the validation loss. Per epoch: train on every batch, evaluate on `val`,
/// then update the LR schedule, then the early stopper.
pub fn fit(model: &Model, train: &[&Sample], val: &[&Sample], cfg: &TrainConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    if cfg.max_epochs == 0 {
        return Ok(FitOutcome {
            model: model.clone(),
            records: Vec::new(),
            best_epoch: None,
            stopped_early: false,
        });
    }
    if train.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    if val.is_empty() {
        return Err(Error::Input("validation set is empty".into()));
    }

    let mut model = model.clone();
    let mut params = model.flatten();
    let mut adam = AdamState::new(params.len(), cfg.adam);
    let mut sched = LrSchedule::new(cfg.initial_lr);
    sched.factor = cfg.lr_factor;
    sched.patience = cfg.lr_patience;
    sched.min_lr = cfg.min_lr;
    sched.min_delta = cfg.min_delta;
    let mut stopper = EarlyStopper::new(cfg.early_stop_patience);
    stopper.min_delta = cfg.min_delta;

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = seed::rng(cfg.seed, Stream::Batching, 0);
    let mut records = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let lr = sched.current_lr;
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| train[i]).collect();
            let (loss, ok, grad) = batch_gradient(&model, &batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch, batch: b + 1 });
            }
            loss_sum += loss * batch.len() as f64;
            correct += ok;
            adam_step(&mut params, &grad, &mut adam, lr)?;
            model.set_flat(&params)?;
        }
        let (val_loss, val_preds) = evaluate(&model, val)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch, batch: 0 });
        }
        let val_correct = val_preds.iter().zip(val).filter(|(p, s)| **p == s.label).count();
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
            val_loss,
            val_accuracy: val_correct as f64 / val.len() as f64,
            lr,
        };
        info!("{}", record.log_line());
        records.push(record);

        sched = plateau_update(sched, val_loss);
        stopper = early_stop_update(stopper, val_loss, &params);
        if stopper.stopped {
            debug!("early stop after epoch {epoch}");
            break;
        }
    }

    if let Some(best) = stopper.best_weights() {
        model.set_flat(best)?;
    }
    Ok(FitOutcome {
        model,
        best_epoch: stopper.best_epoch.map(|e| e + 1),
        stopped_early: stopper.stopped,
        records,
    })
}
