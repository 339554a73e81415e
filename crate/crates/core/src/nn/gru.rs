//! Gated recurrent unit with the update convention `h' = (1 - z) ⊙ h + z ⊙ h̃`:
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
//! ```

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::ops::{flush_subnormal, gemv_acc, gemv_t_acc, ger_acc, sigmoid};
use crate::nn::{ParamSet, Seq, Tensor};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Gru<T> {
    pub w_z: Tensor<T>,
    pub u_z: Tensor<T>,
    pub b_z: Tensor<T>,
    pub w_r: Tensor<T>,
    pub u_r: Tensor<T>,
    pub b_r: Tensor<T>,
    pub w_h: Tensor<T>,
    pub u_h: Tensor<T>,
    pub b_h: Tensor<T>,
}

/// Per-step activations kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct GruCache<T> {
    pub z: Seq<T>,
    pub r: Seq<T>,
    pub cand: Seq<T>,
    pub out: Seq<T>,
}

impl<T: Scalar> Gru<T> {
    /// Weights uniform in ±1/√fan_in, biases zero except the update gate,
    /// which starts at `update_bias`.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, update_bias: f64, rng: &mut R) -> Self {
        let wb = 1.0 / (input as f64).sqrt();
        let ub = 1.0 / (hidden as f64).sqrt();
        Gru {
            w_z: Tensor::uniform(&[hidden, input], wb, rng),
            u_z: Tensor::uniform(&[hidden, hidden], ub, rng),
            b_z: Tensor::filled(&[hidden], T::lit(update_bias)),
            w_r: Tensor::uniform(&[hidden, input], wb, rng),
            u_r: Tensor::uniform(&[hidden, hidden], ub, rng),
            b_r: Tensor::zeros(&[hidden]),
            w_h: Tensor::uniform(&[hidden, input], wb, rng),
            u_h: Tensor::uniform(&[hidden, hidden], ub, rng),
            b_h: Tensor::zeros(&[hidden]),
        }
    }

    /// Like [`Gru::new`], but each update-gate bias is `−ln(u)` with
    /// `u ~ U(1, max_steps − 1)`, spreading the units' initial memory time
    /// scales up to `max_steps`.
    pub fn chrono<R: Rng + ?Sized>(input: usize, hidden: usize, max_steps: usize, rng: &mut R) -> Self {
        let mut g = Self::new(input, hidden, 0.0, rng);
        let hi = (max_steps.max(3) - 1) as f64;
        for b in g.b_z.data_mut() {
            *b = T::lit(-rng.random_range(1.0..hi).ln());
        }
        g
    }

    /// All-zero parameters.
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Gru {
            w_z: Tensor::zeros(&[hidden, input]),
            u_z: Tensor::zeros(&[hidden, hidden]),
            b_z: Tensor::zeros(&[hidden]),
            w_r: Tensor::zeros(&[hidden, input]),
            u_r: Tensor::zeros(&[hidden, hidden]),
            b_r: Tensor::zeros(&[hidden]),
            w_h: Tensor::zeros(&[hidden, input]),
            u_h: Tensor::zeros(&[hidden, hidden]),
            b_h: Tensor::zeros(&[hidden]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.u_z.rows()
    }

    /// One step; returns `(h', z, r, h̃)`.
    fn step(&self, x: &[T], h: &[T]) -> (Vec<T>, Vec<T>, Vec<T>, Vec<T>) {
        let n = self.hidden_dim();
        let mut z = self.b_z.data().to_vec();
        gemv_acc(self.w_z.data(), x, &mut z);
        gemv_acc(self.u_z.data(), h, &mut z);
        let mut r = self.b_r.data().to_vec();
        gemv_acc(self.w_r.data(), x, &mut r);
        gemv_acc(self.u_r.data(), h, &mut r);
        for j in 0..n {
            z[j] = sigmoid(z[j]);
            r[j] = sigmoid(r[j]);
        }
        let rh: Vec<T> = r.iter().zip(h).map(|(&a, &b)| a * b).collect();
        let mut c = self.b_h.data().to_vec();
        gemv_acc(self.w_h.data(), x, &mut c);
        gemv_acc(self.u_h.data(), &rh, &mut c);
        let mut out = vec![T::zero(); n];
        for j in 0..n {
            c[j] = c[j].tanh();
            out[j] = (T::one() - z[j]) * h[j] + z[j] * c[j];
        }
        (out, z, r, c)
    }

    fn check_dims(&self, x: usize, h: usize) -> Result<()> {
        if x != self.input_dim() || h != self.hidden_dim() {
            return Err(Error::Shape(format!(
                "GRU({}→{}) given input {x}, state {h}",
                self.input_dim(),
                self.hidden_dim()
            )));
        }
        Ok(())
    }

    pub fn cell_forward(&self, x: &[T], h_prev: &[T]) -> Result<Vec<T>> {
        self.check_dims(x.len(), h_prev.len())?;
        let (out, ..) = self.step(x, h_prev);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gru state".into()));
        }
        Ok(out)
    }

    /// Run from a zero state; returns the state after every step.
    pub fn forward_seq(&self, xs: &Seq<T>) -> Result<Seq<T>> {
        Ok(self.forward_seq_cached(xs)?.out)
    }

    pub fn forward_seq_cached(&self, xs: &Seq<T>) -> Result<GruCache<T>> {
        let n = self.hidden_dim();
        self.check_dims(xs.dim, n)?;
        let mut cache =
            GruCache { z: Seq::zeros(xs.steps, n), r: Seq::zeros(xs.steps, n), cand: Seq::zeros(xs.steps, n), out: Seq::zeros(xs.steps, n) };
        let mut h = vec![T::zero(); n];
        for t in 0..xs.steps {
            let (out, z, r, c) = self.step(xs.step(t), &h);
            cache.z.step_mut(t).copy_from_slice(&z);
            cache.r.step_mut(t).copy_from_slice(&r);
            cache.cand.step_mut(t).copy_from_slice(&c);
            cache.out.step_mut(t).copy_from_slice(&out);
            h = out;
        }
        if !cache.out.is_finite() {
            return Err(Error::NonFinite("gru state".into()));
        }
        Ok(cache)
    }

    /// Backpropagation through time. `d_out` holds the loss gradient with
    /// respect to every emitted state; returns the gradient w.r.t. the inputs.
    pub fn backward_seq(&self, xs: &Seq<T>, cache: &GruCache<T>, d_out: &Seq<T>, grads: &mut Gru<T>) -> Seq<T> {
        let n = self.hidden_dim();
        let zero = vec![T::zero(); n];
        let mut d_in = Seq::zeros(xs.steps, xs.dim);
        let mut dh_next = vec![T::zero(); n];
        let mut da_z = vec![T::zero(); n];
        let mut da_r = vec![T::zero(); n];
        let mut da_h = vec![T::zero(); n];
        let mut rh = vec![T::zero(); n];
        for t in (0..xs.steps).rev() {
            let x = xs.step(t);
            let h_prev = if t == 0 { &zero[..] } else { cache.out.step(t - 1) };
            let (z, r, c) = (cache.z.step(t), cache.r.step(t), cache.cand.step(t));
            let mut dh_prev = vec![T::zero(); n];
            for j in 0..n {
                let dh = d_out.step(t)[j] + dh_next[j];
                let dz = dh * (c[j] - h_prev[j]);
                da_h[j] = dh * z[j] * (T::one() - c[j] * c[j]);
                da_z[j] = dz * z[j] * (T::one() - z[j]);
                dh_prev[j] = dh * (T::one() - z[j]);
                rh[j] = r[j] * h_prev[j];
            }
            ger_acc(grads.w_h.data_mut(), &da_h, x);
            ger_acc(grads.u_h.data_mut(), &da_h, &rh);
            add(grads.b_h.data_mut(), &da_h);
            let mut d_rh = vec![T::zero(); n];
            gemv_t_acc(self.u_h.data(), &da_h, &mut d_rh);
            for j in 0..n {
                da_r[j] = d_rh[j] * h_prev[j] * r[j] * (T::one() - r[j]);
                dh_prev[j] += d_rh[j] * r[j];
            }
            ger_acc(grads.w_z.data_mut(), &da_z, x);
            ger_acc(grads.u_z.data_mut(), &da_z, h_prev);
            add(grads.b_z.data_mut(), &da_z);
            ger_acc(grads.w_r.data_mut(), &da_r, x);
            ger_acc(grads.u_r.data_mut(), &da_r, h_prev);
            add(grads.b_r.data_mut(), &da_r);
            gemv_t_acc(self.u_z.data(), &da_z, &mut dh_prev);
            gemv_t_acc(self.u_r.data(), &da_r, &mut dh_prev);
            let dx = d_in.step_mut(t);
            gemv_t_acc(self.w_z.data(), &da_z, dx);
            gemv_t_acc(self.w_r.data(), &da_r, dx);
            gemv_t_acc(self.w_h.data(), &da_h, dx);
            flush_subnormal(&mut dh_prev);
            dh_next = dh_prev;
        }
        flush_subnormal(&mut d_in.data);
        d_in
    }
}

fn add<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl<T: Scalar> ParamSet<T> for Gru<T> {
    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        vec![
            ("w_z".into(), &self.w_z),
            ("u_z".into(), &self.u_z),
            ("b_z".into(), &self.b_z),
            ("w_r".into(), &self.w_r),
            ("u_r".into(), &self.u_r),
            ("b_r".into(), &self.b_r),
            ("w_h".into(), &self.w_h),
            ("u_h".into(), &self.u_h),
            ("b_h".into(), &self.b_h),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.u_h,
            &mut self.b_h,
        ]
    }
}

/// Free-function form of a single GRU step.
pub fn gru_cell_forward<T: Scalar>(x: &[T], h_prev: &[T], p: &Gru<T>) -> Result<Vec<T>> {
    p.cell_forward(x, h_prev)
}
