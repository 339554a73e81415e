//! The branch classifier, the two generic window models, their training loop
//! and evaluation metrics.

mod branch;
mod generic;
mod metrics;
mod train;

use std::collections::BTreeMap;

pub use branch::{argmax, BranchClassifier, DEFAULT_GRU_WIDTHS};
pub use generic::{
    multi_task_loss_a, multi_task_loss_b, EventPrediction, GenericModelA, GenericModelB, Head, ReflectionPrediction,
};
pub use metrics::{
    branch_labels, evaluate_branch, evaluate_model_a, evaluate_model_b, ConfusionMatrix, ErrorStats, Histogram,
    RegressionReport, DEFAULT_LEVEL_EDGES, DEFAULT_POSITION_EDGES,
};
pub use train::{train, EpochStats, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};
use crate::nn::ParamSet;
use crate::Scalar;

/// A model the training loop can fit.
pub trait Trainable<T: Scalar>: ParamSet<T> + Clone + Send + Sync {
    type Sample: Sync;

    fn num_tasks(&self) -> usize;

    /// Weighted loss of one sample; its gradient is added to `grads`.
    fn loss_grad(&self, s: &Self::Sample, weights: &[f64], grads: &mut Self) -> Result<T>;

    /// Weighted loss and whether the classification output is right.
    fn eval_sample(&self, s: &Self::Sample, weights: &[f64]) -> Result<(T, bool)>;
}

/// `Σ w_k · loss_k`; rejects negative or all-zero weights.
pub fn weighted_sum<T: Scalar>(weights: &[f64], losses: &[T]) -> Result<T> {
    if weights.len() != losses.len() {
        return Err(Error::config("task_weights", format!("{} weights for {} tasks", weights.len(), losses.len())));
    }
    if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) || weights.iter().all(|&w| w == 0.0) {
        return Err(Error::config("task_weights", format!("{weights:?} must be non-negative and not all zero")));
    }
    let mut total = T::zero();
    for (&w, &l) in weights.iter().zip(losses) {
        if w != 0.0 {
            total += T::lit(w) * l;
        }
    }
    Ok(total)
}

/// Single-feature input sequence; rejects non-finite samples.
pub(crate) fn input_seq<T: Scalar>(values: &[f64]) -> Result<crate::nn::Seq<T>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(INPUT.into()));
    }
    Ok(crate::nn::Seq::from_scalars(&values.iter().map(|&v| T::lit(v)).collect::<Vec<_>>()))
}

/// Name carried by [`Error::NonFinite`] for bad model inputs.
pub const INPUT: &str = "model input";

pub(crate) fn checkpoint_meta(kind: &str, extra: &BTreeMap<String, String>) -> BTreeMap<String, String> {
    let mut m = extra.clone();
    m.insert("model".into(), kind.into());
    m.insert("version".into(), crate::VERSION.into());
    m
}

/// Metadata lines of a parameter file, without decoding parameters.
pub fn peek_meta(text: &str) -> Result<BTreeMap<String, String>> {
    let mut meta = BTreeMap::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("meta ") {
            let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
            meta.insert(k.to_string(), v.to_string());
        }
    }
    if meta.is_empty() {
        return Err(Error::format("checkpoint", "no metadata"));
    }
    Ok(meta)
}

pub(crate) fn expect_meta(meta: &BTreeMap<String, String>, key: &str, want: &str) -> Result<()> {
    match meta.get(key) {
        Some(v) if v == want => Ok(()),
        Some(v) => Err(Error::format("checkpoint", format!("{key} is `{v}`, expected `{want}`"))),
        None => Err(Error::format("checkpoint", format!("missing {key}"))),
    }
}

pub(crate) fn meta_usize(meta: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    meta.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::format("checkpoint", format!("missing or invalid {key}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_sum_rules() {
        assert_eq!(weighted_sum(&[1.0, 0.0], &[2.0f64, f64::NAN]).unwrap(), 2.0);
        assert_eq!(weighted_sum(&[0.5, 2.0], &[2.0f64, 3.0]).unwrap(), 7.0);
        assert!(weighted_sum(&[0.0, 0.0], &[1.0f64, 1.0]).is_err());
        assert!(weighted_sum(&[-1.0, 1.0], &[1.0f64, 1.0]).is_err());
        assert!(weighted_sum(&[1.0], &[1.0f64, 1.0]).is_err());
    }
}
