use std::collections::BTreeMap;

use rand::Rng;

use crate::dataset::NetworkSample;
use crate::error::{Error, Result};
use crate::models::{checkpoint_meta, expect_meta, meta_usize, Trainable};
use crate::nn::{
    decode_params, encode_params, prefixed, softmax, softmax_crossentropy, Activation, Dense, Gru, ParamSet, Seq,
    Tensor,
};
use crate::Scalar;

/// Stacked GRU encoder read at its final state, followed by a softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchClassifier<T> {
    pub gru_stack: Vec<Gru<T>>,
    pub head: Dense<T>,
    pub seq_len: usize,
}

pub const DEFAULT_GRU_WIDTHS: [usize; 3] = [64, 32, 16];

impl<T: Scalar> BranchClassifier<T> {
    pub fn new<R: Rng + ?Sized>(widths: &[usize], seq_len: usize, classes: usize, rng: &mut R) -> Result<Self> {
        if widths.is_empty() || widths.contains(&0) || classes < 2 || seq_len == 0 {
            return Err(Error::config("gru_widths", format!("invalid classifier shape {widths:?} → {classes}")));
        }
        let mut gru_stack = Vec::with_capacity(widths.len());
        let mut input = 1;
        for &w in widths {
            gru_stack.push(Gru::chrono(input, w, seq_len, rng));
            input = w;
        }
        let head = Dense::new(input, classes, Activation::Identity, rng);
        Ok(BranchClassifier { gru_stack, head, seq_len })
    }

    pub fn widths(&self) -> Vec<usize> {
        self.gru_stack.iter().map(|g| g.hidden_dim()).collect()
    }

    pub fn classes(&self) -> usize {
        self.head.n_out()
    }

    fn input(&self, values: &[f64]) -> Result<Seq<T>> {
        if values.len() != self.seq_len {
            return Err(Error::Shape(format!("classifier expects {} samples, got {}", self.seq_len, values.len())));
        }
        crate::models::input_seq(values)
    }

    fn logits(&self, values: &[f64]) -> Result<Vec<T>> {
        let mut h = self.input(values)?;
        for g in &self.gru_stack {
            h = g.forward_seq(&h)?;
        }
        self.head.forward(h.last())
    }

    /// Class probabilities for one normalized trace region.
    pub fn classify_branch(&self, values: &[f64]) -> Result<Vec<T>> {
        Ok(softmax(&self.logits(values)?))
    }

    pub fn predict(&self, values: &[f64]) -> Result<usize> {
        Ok(argmax(&self.classify_branch(values)?))
    }

    pub fn to_checkpoint(&self, meta: &BTreeMap<String, String>) -> String {
        let mut m = checkpoint_meta("branch", meta);
        m.insert("gru_widths".into(), join(&self.widths()));
        m.insert("seq_len".into(), self.seq_len.to_string());
        m.insert("classes".into(), self.classes().to_string());
        encode_params(self, &m)
    }

    pub fn from_checkpoint(text: &str) -> Result<(Self, BTreeMap<String, String>)> {
        let meta = crate::models::peek_meta(text)?;
        expect_meta(&meta, "model", "branch")?;
        let widths: Vec<usize> = meta
            .get("gru_widths")
            .ok_or_else(|| Error::format("checkpoint", "missing gru_widths"))?
            .split(',')
            .map(|s| s.parse().map_err(|_| Error::format("checkpoint", format!("bad width `{s}`"))))
            .collect::<Result<_>>()?;
        let mut rng = crate::rng::stream_rng(0, 0);
        let mut m = Self::new(&widths, meta_usize(&meta, "seq_len")?, meta_usize(&meta, "classes")?, &mut rng)?;
        let meta = decode_params(text, &mut m)?;
        Ok((m, meta))
    }
}

pub(crate) fn join(v: &[usize]) -> String {
    v.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",")
}

pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl<T: Scalar> ParamSet<T> for BranchClassifier<T> {
    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out: Vec<(String, &Tensor<T>)> = Vec::new();
        for (i, g) in self.gru_stack.iter().enumerate() {
            out.extend(prefixed(&format!("gru{i}"), g.params()));
        }
        out.extend(prefixed("head", self.head.params()));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out: Vec<&mut Tensor<T>> = Vec::new();
        for g in self.gru_stack.iter_mut() {
            out.extend(g.params_mut());
        }
        out.extend(self.head.params_mut());
        out
    }
}

impl<T: Scalar> Trainable<T> for BranchClassifier<T> {
    type Sample = NetworkSample;

    fn num_tasks(&self) -> usize {
        1
    }

    fn loss_grad(&self, s: &NetworkSample, weights: &[f64], grads: &mut Self) -> Result<T> {
        let xs = self.input(&s.values)?;
        let mut inputs = vec![xs];
        let mut caches = Vec::with_capacity(self.gru_stack.len());
        for g in &self.gru_stack {
            let c = g.forward_seq_cached(inputs.last().expect("input"))?;
            inputs.push(c.out.clone());
            caches.push(c);
        }
        let top = inputs.last().expect("output");
        let hc = self.head.forward_cached(top.last())?;
        let (ce, mut dl, _) = softmax_crossentropy(&hc.out, s.label)?;
        let w = T::lit(weights[0]);
        for d in dl.iter_mut() {
            *d *= w;
        }
        let dh = self.head.backward(&hc, &dl, &mut grads.head);
        let mut d_out = Seq::zeros(top.steps, top.dim);
        d_out.step_mut(top.steps - 1).copy_from_slice(&dh);
        for (k, g) in self.gru_stack.iter().enumerate().rev() {
            d_out = g.backward_seq(&inputs[k], &caches[k], &d_out, &mut grads.gru_stack[k]);
        }
        Ok(w * ce)
    }

    fn eval_sample(&self, s: &NetworkSample, weights: &[f64]) -> Result<(T, bool)> {
        let logits = self.logits(&s.values)?;
        let (ce, _, p) = softmax_crossentropy(&logits, s.label)?;
        Ok((T::lit(weights[0]) * ce, argmax(&p) == s.label))
    }
}
