use std::collections::BTreeMap;

use rand::Rng;

use crate::dataset::{EventClass, WindowSample};
use crate::error::{Error, Result};
use crate::models::branch::argmax;
use crate::models::{checkpoint_meta, expect_meta, meta_usize, weighted_sum, Trainable};
use crate::nn::{
    categorical_crossentropy, decode_params, encode_params, mse_grad, mse_loss, prefixed, softmax,
    softmax_crossentropy, Activation, Dense, DenseCache, Lstm, LstmCache, ParamSet, Seq, Tensor,
};
use crate::Scalar;

/// A task-specific hidden layer followed by its output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Head<T> {
    pub hidden: Dense<T>,
    pub out: Dense<T>,
}

struct HeadCache<T> {
    hidden: DenseCache<T>,
    out: DenseCache<T>,
}

impl<T: Scalar> Head<T> {
    fn new<R: Rng + ?Sized>(n_in: usize, width: usize, n_out: usize, out_act: Activation, rng: &mut R) -> Self {
        Head { hidden: Dense::new(n_in, width, Activation::Relu, rng), out: Dense::new(width, n_out, out_act, rng) }
    }

    fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.out.forward(&self.hidden.forward(x)?)
    }

    fn forward_cached(&self, x: &[T]) -> Result<HeadCache<T>> {
        let hidden = self.hidden.forward_cached(x)?;
        let out = self.out.forward_cached(&hidden.out)?;
        Ok(HeadCache { hidden, out })
    }

    fn backward(&self, c: &HeadCache<T>, d_out: &[T], g: &mut Head<T>) -> Vec<T> {
        let d = self.out.backward(&c.out, d_out, &mut g.out);
        self.hidden.backward(&c.hidden, &d, &mut g.hidden)
    }

    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v = prefixed("hidden", self.hidden.params());
        v.extend(prefixed("out", self.out.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = self.hidden.params_mut();
        v.extend(self.out.params_mut());
        v
    }
}

fn window_input<T: Scalar>(values: &[f64], window_len: usize) -> Result<Seq<T>> {
    if values.len() != window_len {
        return Err(Error::Shape(format!("model expects {window_len}-sample windows, got {}", values.len())));
    }
    crate::models::input_seq(values)
}

fn targets<T: Scalar>(v: [f64; 2]) -> [T; 2] {
    [T::lit(v[0]), T::lit(v[1])]
}

fn scaled<T: Scalar>(mut v: Vec<T>, k: f64) -> Vec<T> {
    let k = T::lit(k);
    for x in v.iter_mut() {
        *x *= k;
    }
    v
}

fn add_into<T: Scalar>(acc: &mut [T], v: &[T]) {
    for (a, &b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// Outputs of model A for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionPrediction<T> {
    /// Probabilities of 0, 1 and 2 reflections.
    pub type_probs: Vec<T>,
    pub positions: [T; 2],
    pub levels: [T; 2],
}

impl<T: Scalar> ReflectionPrediction<T> {
    pub fn count(&self) -> usize {
        argmax(&self.type_probs)
    }
}

/// Outputs of model B for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct EventPrediction<T> {
    pub event_probs: Vec<T>,
    pub locations: [T; 2],
}

impl<T: Scalar> EventPrediction<T> {
    pub fn event_class(&self) -> EventClass {
        EventClass::from_index(argmax(&self.event_probs)).expect("seven outputs")
    }
}

/// `w_cls·CCE + w_pos·MSE + w_lvl·MSE` with masked regression terms.
pub fn multi_task_loss_a<T: Scalar>(out: &ReflectionPrediction<T>, target: &WindowSample, weights: &[f64]) -> Result<T> {
    let ce = categorical_crossentropy(&out.type_probs, target.type_class())?;
    let pos = mse_loss(&out.positions, &targets(target.positions), &target.mask);
    let lvl = mse_loss(&out.levels, &targets(target.levels), &target.mask);
    weighted_sum(weights, &[ce, pos, lvl])
}

/// `w_cls·CCE + w_loc·MSE` with a masked location term.
pub fn multi_task_loss_b<T: Scalar>(out: &EventPrediction<T>, target: &WindowSample, weights: &[f64]) -> Result<T> {
    let ce = categorical_crossentropy(&out.event_probs, target.event_class.index())?;
    let loc = mse_loss(&out.locations, &targets(target.positions), &target.mask);
    weighted_sum(weights, &[ce, loc])
}

/// Shared LSTM encoder with reflection-count, position and level heads.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericModelA<T> {
    pub encoder: Lstm<T>,
    pub head_type: Head<T>,
    pub head_pos: Head<T>,
    pub head_level: Head<T>,
    pub window_len: usize,
}

/// Shared LSTM encoder with event-class and location heads.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericModelB<T> {
    pub encoder: Lstm<T>,
    pub head_event: Head<T>,
    pub head_loc: Head<T>,
    pub window_len: usize,
}

impl<T: Scalar> GenericModelA<T> {
    pub fn new<R: Rng + ?Sized>(hidden: usize, window_len: usize, rng: &mut R) -> Result<Self> {
        if hidden == 0 || window_len == 0 {
            return Err(Error::config("lstm_hidden", "must be positive"));
        }
        Ok(GenericModelA {
            encoder: Lstm::new(1, hidden, rng),
            head_type: Head::new(hidden, 16, 3, Activation::Identity, rng),
            head_pos: Head::new(hidden, 32, 2, Activation::Sigmoid, rng),
            head_level: Head::new(hidden, 16, 2, Activation::Sigmoid, rng),
            window_len,
        })
    }

    pub fn predict_reflections(&self, values: &[f64]) -> Result<ReflectionPrediction<T>> {
        let h = self.encoder.forward_seq(&window_input(values, self.window_len)?)?;
        let z = h.last();
        let p = self.head_pos.forward(z)?;
        let l = self.head_level.forward(z)?;
        Ok(ReflectionPrediction {
            type_probs: softmax(&self.head_type.forward(z)?),
            positions: [p[0], p[1]],
            levels: [l[0], l[1]],
        })
    }

    pub fn to_checkpoint(&self, meta: &BTreeMap<String, String>) -> String {
        let mut m = checkpoint_meta("generic-a", meta);
        m.insert("lstm_hidden".into(), self.encoder.hidden_dim().to_string());
        m.insert("window_len".into(), self.window_len.to_string());
        encode_params(self, &m)
    }

    pub fn from_checkpoint(text: &str) -> Result<(Self, BTreeMap<String, String>)> {
        let meta = crate::models::peek_meta(text)?;
        expect_meta(&meta, "model", "generic-a")?;
        let mut rng = crate::rng::stream_rng(0, 0);
        let mut m = Self::new(meta_usize(&meta, "lstm_hidden")?, meta_usize(&meta, "window_len")?, &mut rng)?;
        let meta = decode_params(text, &mut m)?;
        Ok((m, meta))
    }
}

impl<T: Scalar> GenericModelB<T> {
    pub fn new<R: Rng + ?Sized>(hidden: usize, window_len: usize, rng: &mut R) -> Result<Self> {
        if hidden == 0 || window_len == 0 {
            return Err(Error::config("lstm_hidden", "must be positive"));
        }
        Ok(GenericModelB {
            encoder: Lstm::new(1, hidden, rng),
            head_event: Head::new(hidden, 16, EventClass::ALL.len(), Activation::Identity, rng),
            head_loc: Head::new(hidden, 32, 2, Activation::Sigmoid, rng),
            window_len,
        })
    }

    pub fn predict_event(&self, values: &[f64]) -> Result<EventPrediction<T>> {
        let h = self.encoder.forward_seq(&window_input(values, self.window_len)?)?;
        let z = h.last();
        let l = self.head_loc.forward(z)?;
        Ok(EventPrediction { event_probs: softmax(&self.head_event.forward(z)?), locations: [l[0], l[1]] })
    }

    pub fn to_checkpoint(&self, meta: &BTreeMap<String, String>) -> String {
        let mut m = checkpoint_meta("generic-b", meta);
        m.insert("lstm_hidden".into(), self.encoder.hidden_dim().to_string());
        m.insert("window_len".into(), self.window_len.to_string());
        encode_params(self, &m)
    }

    pub fn from_checkpoint(text: &str) -> Result<(Self, BTreeMap<String, String>)> {
        let meta = crate::models::peek_meta(text)?;
        expect_meta(&meta, "model", "generic-b")?;
        let mut rng = crate::rng::stream_rng(0, 0);
        let mut m = Self::new(meta_usize(&meta, "lstm_hidden")?, meta_usize(&meta, "window_len")?, &mut rng)?;
        let meta = decode_params(text, &mut m)?;
        Ok((m, meta))
    }
}

impl<T: Scalar> ParamSet<T> for GenericModelA<T> {
    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v = prefixed("encoder", self.encoder.params());
        v.extend(prefixed("head_type", self.head_type.params()));
        v.extend(prefixed("head_pos", self.head_pos.params()));
        v.extend(prefixed("head_level", self.head_level.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = self.encoder.params_mut();
        v.extend(self.head_type.params_mut());
        v.extend(self.head_pos.params_mut());
        v.extend(self.head_level.params_mut());
        v
    }
}

impl<T: Scalar> ParamSet<T> for GenericModelB<T> {
    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v = prefixed("encoder", self.encoder.params());
        v.extend(prefixed("head_event", self.head_event.params()));
        v.extend(prefixed("head_loc", self.head_loc.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = self.encoder.params_mut();
        v.extend(self.head_event.params_mut());
        v.extend(self.head_loc.params_mut());
        v
    }
}

fn encode<T: Scalar>(enc: &Lstm<T>, values: &[f64], window_len: usize) -> Result<(Seq<T>, LstmCache<T>)> {
    let xs = window_input(values, window_len)?;
    let cache = enc.forward_seq_cached(&xs)?;
    Ok((xs, cache))
}

fn encoder_backward<T: Scalar>(enc: &Lstm<T>, xs: &Seq<T>, cache: &LstmCache<T>, dz: &[T], g: &mut Lstm<T>) {
    let mut d = Seq::zeros(xs.steps, enc.hidden_dim());
    d.step_mut(xs.steps - 1).copy_from_slice(dz);
    enc.backward_seq(xs, cache, &d, g);
}

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::config("task_weights", format!("{} weights for {n} tasks", weights.len())));
    }
    Ok(())
}

impl<T: Scalar> Trainable<T> for GenericModelA<T> {
    type Sample = WindowSample;

    fn num_tasks(&self) -> usize {
        3
    }

    fn loss_grad(&self, s: &WindowSample, weights: &[f64], grads: &mut Self) -> Result<T> {
        check_weights(weights, 3)?;
        let (xs, cache) = encode(&self.encoder, &s.values, self.window_len)?;
        let z = cache.h.last();
        let ct = self.head_type.forward_cached(z)?;
        let cp = self.head_pos.forward_cached(z)?;
        let cl = self.head_level.forward_cached(z)?;
        let (ce, d_logits, _) = softmax_crossentropy(&ct.out.out, s.type_class())?;
        let (tp, tl) = (targets(s.positions), targets(s.levels));
        let pos = mse_loss(&cp.out.out, &tp, &s.mask);
        let lvl = mse_loss(&cl.out.out, &tl, &s.mask);
        let loss = weighted_sum(weights, &[ce, pos, lvl])?;
        let mut dz = self.head_type.backward(&ct, &scaled(d_logits, weights[0]), &mut grads.head_type);
        let d = self.head_pos.backward(&cp, &scaled(mse_grad(&cp.out.out, &tp, &s.mask), weights[1]), &mut grads.head_pos);
        add_into(&mut dz, &d);
        let d = self.head_level.backward(
            &cl,
            &scaled(mse_grad(&cl.out.out, &tl, &s.mask), weights[2]),
            &mut grads.head_level,
        );
        add_into(&mut dz, &d);
        encoder_backward(&self.encoder, &xs, &cache, &dz, &mut grads.encoder);
        Ok(loss)
    }

    fn eval_sample(&self, s: &WindowSample, weights: &[f64]) -> Result<(T, bool)> {
        check_weights(weights, 3)?;
        let p = self.predict_reflections(&s.values)?;
        Ok((multi_task_loss_a(&p, s, weights)?, p.count() == s.type_class()))
    }
}

impl<T: Scalar> Trainable<T> for GenericModelB<T> {
    type Sample = WindowSample;

    fn num_tasks(&self) -> usize {
        2
    }

    fn loss_grad(&self, s: &WindowSample, weights: &[f64], grads: &mut Self) -> Result<T> {
        check_weights(weights, 2)?;
        let (xs, cache) = encode(&self.encoder, &s.values, self.window_len)?;
        let z = cache.h.last();
        let ce_cache = self.head_event.forward_cached(z)?;
        let cl = self.head_loc.forward_cached(z)?;
        let (ce, d_logits, _) = softmax_crossentropy(&ce_cache.out.out, s.event_class.index())?;
        let tp = targets(s.positions);
        let loc = mse_loss(&cl.out.out, &tp, &s.mask);
        let loss = weighted_sum(weights, &[ce, loc])?;
        let mut dz = self.head_event.backward(&ce_cache, &scaled(d_logits, weights[0]), &mut grads.head_event);
        let d = self.head_loc.backward(&cl, &scaled(mse_grad(&cl.out.out, &tp, &s.mask), weights[1]), &mut grads.head_loc);
        add_into(&mut dz, &d);
        encoder_backward(&self.encoder, &xs, &cache, &dz, &mut grads.encoder);
        Ok(loss)
    }

    fn eval_sample(&self, s: &WindowSample, weights: &[f64]) -> Result<(T, bool)> {
        check_weights(weights, 2)?;
        let p = self.predict_event(&s.values)?;
        Ok((multi_task_loss_b(&p, s, weights)?, p.event_class() == s.event_class))
    }
}
