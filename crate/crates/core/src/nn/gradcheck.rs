use crate::nn::ParamSet;
use crate::Scalar;

/// Central-difference gradient `(L(θ+δ) − L(θ−δ)) / 2δ` for every parameter
/// coordinate, in [`ParamSet::flatten`] order. `params` is restored exactly.
pub fn numeric_gradient<T, P, F>(mut loss: F, params: &mut P, step: f64) -> Vec<T>
where
    T: Scalar,
    P: ParamSet<T>,
    F: FnMut(&P) -> T,
{
    let shapes: Vec<usize> = params.params().iter().map(|(_, t)| t.len()).collect();
    let delta = T::lit(step);
    let mut out = Vec::with_capacity(shapes.iter().sum());
    for (pi, &len) in shapes.iter().enumerate() {
        for k in 0..len {
            let orig = params.params_mut()[pi].data()[k];
            params.params_mut()[pi].data_mut()[k] = orig + delta;
            let up = loss(params);
            params.params_mut()[pi].data_mut()[k] = orig - delta;
            let down = loss(params);
            params.params_mut()[pi].data_mut()[k] = orig;
            out.push((up - down) / (delta + delta));
        }
    }
    out
}

/// `‖a − b‖ / max(‖a‖ + ‖b‖, tiny)`; zero when both vectors are zero.
pub fn relative_error<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    let mut diff = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x.as_f64(), y.as_f64());
        diff += (x - y) * (x - y);
        na += x * x;
        nb += y * y;
    }
    let denom = na.sqrt() + nb.sqrt();
    if denom < 1e-300 {
        0.0
    } else {
        diff.sqrt() / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[derive(Clone)]
    struct Theta(Tensor<f64>);

    impl ParamSet<f64> for Theta {
        fn params(&self) -> Vec<(String, &Tensor<f64>)> {
            vec![("theta".into(), &self.0)]
        }
        fn params_mut(&mut self) -> Vec<&mut Tensor<f64>> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn quadratic() {
        let mut p = Theta(Tensor::from_vec(&[1], vec![3.0]).unwrap());
        let g = numeric_gradient(|p: &Theta| p.0.data()[0].powi(2), &mut p, 1e-6);
        assert!((g[0] - 6.0).abs() < 1e-6);
        assert_eq!(p.0.data()[0], 3.0);
    }

    #[test]
    fn constant() {
        let mut p = Theta(Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap());
        let g = numeric_gradient(|_: &Theta| 4.2, &mut p, 1e-6);
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn relative_error_basics() {
        assert_eq!(relative_error(&[0.0f64, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(relative_error(&[1.0f64, 2.0], &[1.0, 2.0]), 0.0);
        assert!((relative_error(&[1.0f64], &[-1.0]) - 1.0).abs() < 1e-15);
    }
}
