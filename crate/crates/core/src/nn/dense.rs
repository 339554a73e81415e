use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::ops::{gemv_acc, gemv_t_acc, ger_acc};
use crate::nn::{Activation, ParamSet, Tensor};
use crate::Scalar;

/// Fully connected layer `activation(W x + b)`, `W` stored `[n_out, n_in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseCache<T> {
    pub input: Vec<T>,
    pub pre: Vec<T>,
    pub out: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new<R: Rng + ?Sized>(n_in: usize, n_out: usize, activation: Activation, rng: &mut R) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        Dense { weight: Tensor::uniform(&[n_out, n_in], bound, rng), bias: Tensor::zeros(&[n_out]), activation }
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>, activation: Activation) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.rows()] {
            return Err(Error::Shape(format!("dense weight {:?} with bias {:?}", weight.shape(), bias.shape())));
        }
        Ok(Dense { weight, bias, activation })
    }

    pub fn n_in(&self) -> usize {
        self.weight.cols()
    }

    pub fn n_out(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_cached(x)?.out)
    }

    pub fn forward_cached(&self, x: &[T]) -> Result<DenseCache<T>> {
        if x.len() != self.n_in() {
            return Err(Error::Shape(format!("dense expects {} inputs, got {}", self.n_in(), x.len())));
        }
        let mut pre = self.bias.data().to_vec();
        gemv_acc(self.weight.data(), x, &mut pre);
        let out = pre.iter().map(|&p| self.activation.apply(p)).collect();
        Ok(DenseCache { input: x.to_vec(), pre, out })
    }

    /// Accumulate parameter gradients into `grads`; returns the input gradient.
    pub fn backward(&self, cache: &DenseCache<T>, d_out: &[T], grads: &mut Dense<T>) -> Vec<T> {
        let d_pre: Vec<T> = d_out
            .iter()
            .zip(cache.pre.iter().zip(&cache.out))
            .map(|(&d, (&p, &o))| d * self.activation.derivative(p, o))
            .collect();
        ger_acc(grads.weight.data_mut(), &d_pre, &cache.input);
        for (b, &d) in grads.bias.data_mut().iter_mut().zip(&d_pre) {
            *b += d;
        }
        let mut dx = vec![T::zero(); self.n_in()];
        gemv_t_acc(self.weight.data(), &d_pre, &mut dx);
        dx
    }
}

impl<T: Scalar> ParamSet<T> for Dense<T> {
    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}
