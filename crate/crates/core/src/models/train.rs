use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::models::Trainable;
use crate::nn::AdamState;
use crate::rng::{derive_seed, stream_rng};
use crate::Scalar;

/// Samples per gradient chunk. Chunks are summed in a fixed order, so the
/// result does not depend on the thread count.
const CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub task_weights: Vec<f64>,
    /// Rescale the batch gradient to this global norm when exceeded.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(num_tasks: usize) -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 50,
            patience: 10,
            task_weights: vec![1.0; num_tasks],
            clip_norm: None,
            seed: 0,
        }
    }

    pub fn from_config(cfg: &KvConfig, num_tasks: usize, seed: u64) -> Result<Self> {
        let d = Self::new(num_tasks);
        let t = TrainConfig {
            learning_rate: cfg.get_or("learning_rate", d.learning_rate)?,
            batch_size: cfg.get_or("batch_size", d.batch_size)?,
            max_epochs: cfg.get_or("max_epochs", d.max_epochs)?,
            patience: cfg.get_or("patience", d.patience)?,
            task_weights: cfg.get_list("task_weights")?.unwrap_or(d.task_weights),
            clip_norm: cfg.get("clip_norm")?,
            seed,
        };
        t.validate(num_tasks)?;
        Ok(t)
    }

    pub fn validate(&self, num_tasks: usize) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs", "must be positive"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::config("clip_norm", "must be positive"));
            }
        }
        crate::models::weighted_sum(&self.task_weights, &vec![0.0f64; num_tasks]).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: M,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

impl<M> TrainOutcome<M> {
    pub fn write_history_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "val_loss", "val_accuracy"])?;
        for e in &self.history {
            w.write_record([
                e.epoch.to_string(),
                format!("{:.9}", e.train_loss),
                format!("{:.9}", e.val_loss),
                format!("{:.6}", e.val_accuracy),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Summed loss and gradient over `batch`.
fn batch_gradient<T: Scalar, M: Trainable<T>>(model: &M, batch: &[&M::Sample], weights: &[f64]) -> Result<(T, M)> {
    let parts = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = model.zeros_like();
            let mut loss = T::zero();
            for s in chunk {
                loss += model.loss_grad(s, weights, &mut g)?;
            }
            Ok((loss, g))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = parts.into_iter();
    let (mut loss, mut grads) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss += l;
        grads.accumulate(&g);
    }
    Ok((loss, grads))
}

/// Mean loss and accuracy over `samples`.
pub(crate) fn evaluate_loss<T: Scalar, M: Trainable<T>>(
    model: &M,
    samples: &[&M::Sample],
    weights: &[f64],
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let parts = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut loss = 0.0;
            let mut correct = 0usize;
            for s in chunk {
                let (l, ok) = model.eval_sample(s, weights)?;
                loss += l.as_f64();
                correct += ok as usize;
            }
            Ok((loss, correct))
        })
        .collect::<Result<Vec<_>>>()?;
    let (loss, correct) = parts.into_iter().fold((0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok((loss / samples.len() as f64, correct as f64 / samples.len() as f64))
}

/// Non-finite activations other than bad inputs mean the parameters blew up.
fn diverged(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite(name) if name != crate::models::INPUT => Error::Diverged { epoch },
        e => e,
    }
}

/// Mini-batch Adam with seeded shuffling and early stopping on validation
/// loss (training loss when `val` is empty).
pub fn train<T, M, F>(
    mut model: M,
    train_set: &[&M::Sample],
    val: &[&M::Sample],
    cfg: &TrainConfig,
    mut progress: F,
) -> Result<TrainOutcome<M>>
where
    T: Scalar,
    M: Trainable<T>,
    F: FnMut(&EpochStats),
{
    cfg.validate(model.num_tasks())?;
    if train_set.is_empty() {
        return Err(Error::Dataset("training split is empty".into()));
    }
    let mut adam = AdamState::new(&model, cfg.learning_rate);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let shuffle_seed = derive_seed(cfg.seed, "shuffle");
    let mut best: Option<(f64, M, usize)> = None;
    let mut history = Vec::new();
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut stream_rng(shuffle_seed, epoch as u64));
        let mut total = 0.0;
        let mut batch = Vec::with_capacity(cfg.batch_size);
        for idx in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(idx.iter().map(|&i| train_set[i]));
            let (loss, mut grads) = batch_gradient(&model, &batch, &cfg.task_weights).map_err(|e| diverged(e, epoch))?;
            if !loss.is_finite() || grads.check_finite().is_err() {
                return Err(Error::Diverged { epoch });
            }
            total += loss.as_f64();
            grads.scale_all(T::one() / T::lit(batch.len() as f64));
            if let Some(c) = cfg.clip_norm {
                let n = grads.global_norm().as_f64();
                if n > c {
                    grads.scale_all(T::lit(c / n));
                }
            }
            adam.step(&mut model, &grads)?;
        }
        if model.check_finite().is_err() {
            return Err(Error::Diverged { epoch });
        }
        let train_loss = total / train_set.len() as f64;
        let (val_loss, val_accuracy) = if val.is_empty() {
            evaluate_loss(&model, train_set, &cfg.task_weights)
        } else {
            evaluate_loss(&model, val, &cfg.task_weights)
        }
        .map_err(|e| diverged(e, epoch))?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let stats = EpochStats { epoch, train_loss, val_loss, val_accuracy };
        progress(&stats);
        history.push(stats);
        if best.as_ref().is_none_or(|b| val_loss < b.0) {
            best = Some((val_loss, model.clone(), epoch));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let (_, model, best_epoch) = best.expect("at least one epoch");
    Ok(TrainOutcome { model, history, best_epoch })
}
