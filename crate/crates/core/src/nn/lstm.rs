//! Long short-term memory cell with input, forget and output gates:
//!
//! ```text
//! i, f, o = σ(W x + U h + b)      g = tanh(W_g x + U_g h + b_g)
//! c' = f ⊙ c + i ⊙ g              h' = o ⊙ tanh(c')
//! ```

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::ops::{flush_subnormal, gemv_acc, gemv_t_acc, ger_acc, sigmoid};
use crate::nn::{ParamSet, Seq, Tensor};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Lstm<T> {
    pub w_i: Tensor<T>,
    pub u_i: Tensor<T>,
    pub b_i: Tensor<T>,
    pub w_f: Tensor<T>,
    pub u_f: Tensor<T>,
    pub b_f: Tensor<T>,
    pub w_o: Tensor<T>,
    pub u_o: Tensor<T>,
    pub b_o: Tensor<T>,
    pub w_g: Tensor<T>,
    pub u_g: Tensor<T>,
    pub b_g: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    pub i: Seq<T>,
    pub f: Seq<T>,
    pub o: Seq<T>,
    pub g: Seq<T>,
    pub c: Seq<T>,
    pub h: Seq<T>,
}

impl<T: Scalar> Lstm<T> {
    /// Weights uniform in ±1/√fan_in, forget-gate bias 1, other biases 0.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let wb = 1.0 / (input as f64).sqrt();
        let ub = 1.0 / (hidden as f64).sqrt();
        let mut w = || Tensor::uniform(&[hidden, input], wb, rng);
        let (w_i, w_f, w_o, w_g) = (w(), w(), w(), w());
        let mut u = || Tensor::uniform(&[hidden, hidden], ub, rng);
        let (u_i, u_f, u_o, u_g) = (u(), u(), u(), u());
        Lstm {
            w_i,
            u_i,
            b_i: Tensor::zeros(&[hidden]),
            w_f,
            u_f,
            b_f: Tensor::filled(&[hidden], T::one()),
            w_o,
            u_o,
            b_o: Tensor::zeros(&[hidden]),
            w_g,
            u_g,
            b_g: Tensor::zeros(&[hidden]),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Tensor::zeros(&[hidden, input]);
        let u = || Tensor::zeros(&[hidden, hidden]);
        let b = || Tensor::zeros(&[hidden]);
        Lstm { w_i: w(), u_i: u(), b_i: b(), w_f: w(), u_f: u(), b_f: b(), w_o: w(), u_o: u(), b_o: b(), w_g: w(), u_g: u(), b_g: b() }
    }

    pub fn input_dim(&self) -> usize {
        self.w_i.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.u_i.rows()
    }

    fn check_dims(&self, x: usize, h: usize) -> Result<()> {
        if x != self.input_dim() || h != self.hidden_dim() {
            return Err(Error::Shape(format!(
                "LSTM({}→{}) given input {x}, state {h}",
                self.input_dim(),
                self.hidden_dim()
            )));
        }
        Ok(())
    }

    fn gate(w: &Tensor<T>, u: &Tensor<T>, b: &Tensor<T>, x: &[T], h: &[T]) -> Vec<T> {
        let mut a = b.data().to_vec();
        gemv_acc(w.data(), x, &mut a);
        gemv_acc(u.data(), h, &mut a);
        a
    }

    /// One step; returns `[i, f, o, g, c', h']`.
    fn step(&self, x: &[T], h: &[T], c: &[T]) -> [Vec<T>; 6] {
        let mut i = Self::gate(&self.w_i, &self.u_i, &self.b_i, x, h);
        let mut f = Self::gate(&self.w_f, &self.u_f, &self.b_f, x, h);
        let mut o = Self::gate(&self.w_o, &self.u_o, &self.b_o, x, h);
        let mut g = Self::gate(&self.w_g, &self.u_g, &self.b_g, x, h);
        let n = h.len();
        let mut c2 = vec![T::zero(); n];
        let mut h2 = vec![T::zero(); n];
        for j in 0..n {
            i[j] = sigmoid(i[j]);
            f[j] = sigmoid(f[j]);
            o[j] = sigmoid(o[j]);
            g[j] = g[j].tanh();
            c2[j] = f[j] * c[j] + i[j] * g[j];
            h2[j] = o[j] * c2[j].tanh();
        }
        [i, f, o, g, c2, h2]
    }

    /// Returns `(h', c')`.
    pub fn cell_forward(&self, x: &[T], h_prev: &[T], c_prev: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        self.check_dims(x.len(), h_prev.len())?;
        self.check_dims(x.len(), c_prev.len())?;
        let [.., c, h] = self.step(x, h_prev, c_prev);
        if h.iter().chain(&c).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lstm state".into()));
        }
        Ok((h, c))
    }

    /// Hidden states for every step, starting from zero state.
    pub fn forward_seq(&self, xs: &Seq<T>) -> Result<Seq<T>> {
        Ok(self.forward_seq_cached(xs)?.h)
    }

    pub fn forward_seq_cached(&self, xs: &Seq<T>) -> Result<LstmCache<T>> {
        let n = self.hidden_dim();
        self.check_dims(xs.dim, n)?;
        let z = || Seq::zeros(xs.steps, n);
        let mut cache = LstmCache { i: z(), f: z(), o: z(), g: z(), c: z(), h: z() };
        let mut h = vec![T::zero(); n];
        let mut c = vec![T::zero(); n];
        for t in 0..xs.steps {
            let [i, f, o, g, c2, h2] = self.step(xs.step(t), &h, &c);
            cache.i.step_mut(t).copy_from_slice(&i);
            cache.f.step_mut(t).copy_from_slice(&f);
            cache.o.step_mut(t).copy_from_slice(&o);
            cache.g.step_mut(t).copy_from_slice(&g);
            cache.c.step_mut(t).copy_from_slice(&c2);
            cache.h.step_mut(t).copy_from_slice(&h2);
            h = h2;
            c = c2;
        }
        if !cache.h.is_finite() || !cache.c.is_finite() {
            return Err(Error::NonFinite("lstm state".into()));
        }
        Ok(cache)
    }

    /// Backpropagation through time given the gradient w.r.t. every hidden
    /// state; returns the gradient w.r.t. the inputs.
    pub fn backward_seq(&self, xs: &Seq<T>, cache: &LstmCache<T>, d_h: &Seq<T>, grads: &mut Lstm<T>) -> Seq<T> {
        let n = self.hidden_dim();
        let zero = vec![T::zero(); n];
        let mut d_in = Seq::zeros(xs.steps, xs.dim);
        let mut dh_next = vec![T::zero(); n];
        let mut dc_next = vec![T::zero(); n];
        let mut da_i = vec![T::zero(); n];
        let mut da_f = vec![T::zero(); n];
        let mut da_o = vec![T::zero(); n];
        let mut da_g = vec![T::zero(); n];
        for t in (0..xs.steps).rev() {
            let x = xs.step(t);
            let (h_prev, c_prev) =
                if t == 0 { (&zero[..], &zero[..]) } else { (cache.h.step(t - 1), cache.c.step(t - 1)) };
            let (i, f, o, g, c) = (cache.i.step(t), cache.f.step(t), cache.o.step(t), cache.g.step(t), cache.c.step(t));
            for j in 0..n {
                let dh = d_h.step(t)[j] + dh_next[j];
                let tc = c[j].tanh();
                let dc = dc_next[j] + dh * o[j] * (T::one() - tc * tc);
                da_o[j] = dh * tc * o[j] * (T::one() - o[j]);
                da_i[j] = dc * g[j] * i[j] * (T::one() - i[j]);
                da_f[j] = dc * c_prev[j] * f[j] * (T::one() - f[j]);
                da_g[j] = dc * i[j] * (T::one() - g[j] * g[j]);
                dc_next[j] = dc * f[j];
            }
            flush_subnormal(&mut dc_next);
            let mut dh_prev = vec![T::zero(); n];
            let dx = d_in.step_mut(t);
            for (da, w, u, gw, gu, gb) in [
                (&da_i, &self.w_i, &self.u_i, &mut grads.w_i, &mut grads.u_i, &mut grads.b_i),
                (&da_f, &self.w_f, &self.u_f, &mut grads.w_f, &mut grads.u_f, &mut grads.b_f),
                (&da_o, &self.w_o, &self.u_o, &mut grads.w_o, &mut grads.u_o, &mut grads.b_o),
                (&da_g, &self.w_g, &self.u_g, &mut grads.w_g, &mut grads.u_g, &mut grads.b_g),
            ] {
                ger_acc(gw.data_mut(), da, x);
                ger_acc(gu.data_mut(), da, h_prev);
                for (b, &d) in gb.data_mut().iter_mut().zip(da.iter()) {
                    *b += d;
                }
                gemv_t_acc(u.data(), da, &mut dh_prev);
                gemv_t_acc(w.data(), da, dx);
            }
            flush_subnormal(&mut dh_prev);
            dh_next = dh_prev;
        }
        flush_subnormal(&mut d_in.data);
        d_in
    }
}

impl<T: Scalar> ParamSet<T> for Lstm<T> {
    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        vec![
            ("w_i".into(), &self.w_i),
            ("u_i".into(), &self.u_i),
            ("b_i".into(), &self.b_i),
            ("w_f".into(), &self.w_f),
            ("u_f".into(), &self.u_f),
            ("b_f".into(), &self.b_f),
            ("w_o".into(), &self.w_o),
            ("u_o".into(), &self.u_o),
            ("b_o".into(), &self.b_o),
            ("w_g".into(), &self.w_g),
            ("u_g".into(), &self.u_g),
            ("b_g".into(), &self.b_g),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![
            &mut self.w_i,
            &mut self.u_i,
            &mut self.b_i,
            &mut self.w_f,
            &mut self.u_f,
            &mut self.b_f,
            &mut self.w_o,
            &mut self.u_o,
            &mut self.b_o,
            &mut self.w_g,
            &mut self.u_g,
            &mut self.b_g,
        ]
    }
}

/// Free-function form of a single LSTM step.
pub fn lstm_cell_forward<T: Scalar>(x: &[T], h_prev: &[T], c_prev: &[T], p: &Lstm<T>) -> Result<(Vec<T>, Vec<T>)> {
    p.cell_forward(x, h_prev, c_prev)
}
