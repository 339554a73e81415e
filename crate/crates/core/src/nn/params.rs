use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::Scalar;

/// A fixed, ordered collection of named parameter tensors.
///
/// Gradients are represented by a second value of the same type, so the
/// optimizer, the gradient checker and checkpoints all walk the same order.
pub trait ParamSet<T: Scalar> {
    fn params(&self) -> Vec<(String, &Tensor<T>)>;
    fn params_mut(&mut self) -> Vec<&mut Tensor<T>>;

    fn num_params(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    fn zero(&mut self) {
        for t in self.params_mut() {
            t.fill(T::zero());
        }
    }

    /// Zeroed copy, used as a gradient accumulator.
    fn zeros_like(&self) -> Self
    where
        Self: Clone,
    {
        let mut g = self.clone();
        g.zero();
        g
    }

    fn accumulate(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let src: Vec<&Tensor<T>> = other.params().into_iter().map(|(_, t)| t).collect();
        for (dst, s) in self.params_mut().into_iter().zip(src) {
            dst.add_assign(s);
        }
    }

    fn scale_all(&mut self, k: T) {
        for t in self.params_mut() {
            t.scale(k);
        }
    }

    fn global_norm(&self) -> T {
        self.params().iter().map(|(_, t)| t.sum_squares()).sum::<T>().sqrt()
    }

    /// Error naming the first tensor holding a NaN or infinity.
    fn check_finite(&self) -> Result<()> {
        match self.params().into_iter().find(|(_, t)| !t.is_finite()) {
            Some((name, _)) => Err(Error::NonFinite(name)),
            None => Ok(()),
        }
    }

    fn flatten(&self) -> Vec<T> {
        self.params().iter().flat_map(|(_, t)| t.data().iter().copied()).collect()
    }
}

pub(crate) fn prefixed<'a, T>(prefix: &str, inner: Vec<(String, &'a Tensor<T>)>) -> Vec<(String, &'a Tensor<T>)> {
    inner.into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)).collect()
}
