use crate::error::{Error, Result};
use crate::nn::{ParamSet, Tensor};
use crate::Scalar;

/// Bias-corrected Adam with one pair of moment tensors per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<P: ParamSet<T>>(params: &P, learning_rate: f64) -> Self {
        let zeros = || params.params().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        AdamState { m: zeros(), v: zeros(), t: 0, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, learning_rate }
    }

    /// Apply one update in place.
    pub fn step<P: ParamSet<T>>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let gs: Vec<&Tensor<T>> = grads.params().into_iter().map(|(_, t)| t).collect();
        let ps = params.params_mut();
        if ps.len() != self.m.len() || gs.len() != ps.len() {
            return Err(Error::Shape("optimizer state does not match parameters".into()));
        }
        self.t += 1;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let c1 = T::one() - T::lit(self.beta1.powi(self.t as i32));
        let c2 = T::one() - T::lit(self.beta2.powi(self.t as i32));
        let lr = T::lit(self.learning_rate);
        let eps = T::lit(self.epsilon);
        for (((p, g), m), v) in ps.into_iter().zip(gs).zip(&mut self.m).zip(&mut self.v) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Shape(format!("parameter {:?} vs gradient {:?}", p.shape(), g.shape())));
            }
            for (((w, &gi), mi), vi) in
                p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut())
            {
                *mi = b1 * *mi + (T::one() - b1) * gi;
                *vi = b2 * *vi + (T::one() - b2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step<T: Scalar, P: ParamSet<T>>(params: &mut P, grads: &P, state: &mut AdamState<T>) -> Result<()> {
    state.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone)]
    struct One(Tensor<f64>);

    impl ParamSet<f64> for One {
        fn params(&self) -> Vec<(String, &Tensor<f64>)> {
            vec![("theta".into(), &self.0)]
        }
        fn params_mut(&mut self) -> Vec<&mut Tensor<f64>> {
            vec![&mut self.0]
        }
    }

    fn one(v: &[f64]) -> One {
        One(Tensor::from_vec(&[v.len()], v.to_vec()).unwrap())
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = one(&[1.0, -2.0]);
        let mut st = AdamState::new(&p, 1e-3);
        adam_step(&mut p, &one(&[0.3, 0.3]), &mut st).unwrap();
        let after = p.clone();
        let m0 = st.m[0].data()[0];
        adam_step(&mut p, &one(&[0.0, 0.0]), &mut st).unwrap();
        assert!(st.m[0].data()[0].abs() < m0.abs());
        // the decaying momentum still moves parameters; a fresh state does not
        let mut q = one(&[1.0, -2.0]);
        let mut fresh = AdamState::new(&q, 1e-3);
        adam_step(&mut q, &one(&[0.0, 0.0]), &mut fresh).unwrap();
        assert_eq!(q.0.data(), &[1.0, -2.0]);
        assert_eq!(fresh.t, 1);
        assert_ne!(after.0.data(), p.0.data());
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [1e-3, 0.5, -7.0, 1e4] {
            let mut p = one(&[0.0]);
            let mut st = AdamState::new(&p, 1e-3);
            adam_step(&mut p, &one(&[g]), &mut st).unwrap();
            let d = p.0.data()[0];
            assert!((d.abs() - 1e-3).abs() < 1e-7, "g={g} moved {d}");
            assert_eq!(d.signum(), -g.signum());
        }
    }

    #[test]
    fn descends_quadratic() {
        let mut p = one(&[1.0]);
        let mut st = AdamState::new(&p, 0.1);
        let mut prev = 1.0;
        for _ in 0..2 {
            let g = one(&[p.0.data()[0]]);
            adam_step(&mut p, &g, &mut st).unwrap();
            let th = p.0.data()[0];
            assert!(th < prev);
            prev = th;
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = one(&[1.0]);
        let mut st = AdamState::new(&one(&[1.0, 2.0]), 0.1);
        assert!(adam_step(&mut p, &one(&[0.1]), &mut st).is_err());
    }
}
