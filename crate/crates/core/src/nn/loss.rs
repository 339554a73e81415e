use crate::error::{Error, Result};
use crate::Scalar;

/// Floor added inside the logarithm of the cross-entropy.
pub const CCE_EPSILON: f64 = 1e-12;

/// Max-shifted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn check_distribution<T: Scalar>(p: &[T], y: usize) -> Result<()> {
    if y >= p.len() {
        return Err(Error::InvalidDistribution(format!("class {y} outside {} outputs", p.len())));
    }
    if p.iter().any(|&v| !v.is_finite() || v < T::zero() || v > T::one()) {
        return Err(Error::InvalidDistribution("probabilities outside [0, 1]".into()));
    }
    let s: f64 = p.iter().map(|v| v.as_f64()).sum();
    if (s - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidDistribution(format!("probabilities sum to {s}")));
    }
    Ok(())
}

/// `−ln(p_y + ε)` in nats.
pub fn categorical_crossentropy<T: Scalar>(p: &[T], y: usize) -> Result<T> {
    check_distribution(p, y)?;
    Ok(-(p[y] + T::lit(CCE_EPSILON)).ln())
}

/// Cross-entropy of `softmax(logits)` and its gradient w.r.t. the logits.
///
/// With the ε floor the gradient is `p_y / (p_y + ε) · (p − onehot(y))`.
pub fn softmax_crossentropy<T: Scalar>(logits: &[T], y: usize) -> Result<(T, Vec<T>, Vec<T>)> {
    let p = softmax(logits);
    let loss = categorical_crossentropy(&p, y)?;
    let k = p[y] / (p[y] + T::lit(CCE_EPSILON));
    let grad = p.iter().enumerate().map(|(i, &pi)| k * (pi - if i == y { T::one() } else { T::zero() })).collect();
    Ok((loss, grad, p))
}

/// Mean of `(pred − target)²` over entries whose mask is set; zero when
/// nothing is valid.
pub fn mse_loss<T: Scalar>(pred: &[T], target: &[T], mask: &[bool]) -> T {
    let mut sum = T::zero();
    let mut n = 0usize;
    for ((&p, &t), &m) in pred.iter().zip(target).zip(mask) {
        if m {
            sum += (p - t) * (p - t);
            n += 1;
        }
    }
    if n == 0 {
        T::zero()
    } else {
        sum / T::lit(n as f64)
    }
}

/// Gradient of [`mse_loss`] w.r.t. `pred`.
pub fn mse_grad<T: Scalar>(pred: &[T], target: &[T], mask: &[bool]) -> Vec<T> {
    let n = mask.iter().filter(|&&m| m).count();
    if n == 0 {
        return vec![T::zero(); pred.len()];
    }
    let k = T::lit(2.0 / n as f64);
    pred.iter()
        .zip(target)
        .zip(mask)
        .map(|((&p, &t), &m)| if m { k * (p - t) } else { T::zero() })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0f64, 0.0]), vec![0.5, 0.5]);
        let p = softmax(&[2f64.ln(), 0.0]);
        assert_abs_diff_eq!(p[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 1.0 / 3.0, epsilon = 1e-15);
        let a = softmax(&[0.3f64, -1.2, 2.0]);
        let b = softmax(&[100.3f64, 98.8, 102.0]);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let p = softmax(&[1e300f64, 0.0]);
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn crossentropy_examples() {
        assert_abs_diff_eq!(categorical_crossentropy(&[0.0f64, 1.0], 1).unwrap(), 0.0, epsilon = 1e-11);
        let u9 = vec![1.0f64 / 9.0; 9];
        assert_abs_diff_eq!(categorical_crossentropy(&u9, 4).unwrap(), 9f64.ln(), epsilon = 1e-9);
        let u7 = vec![1.0f64 / 7.0; 7];
        assert_abs_diff_eq!(categorical_crossentropy(&u7, 0).unwrap(), 7f64.ln(), epsilon = 1e-9);
        assert_abs_diff_eq!(9f64.ln(), 2.1972, epsilon = 1e-4);
        assert_abs_diff_eq!(7f64.ln(), 1.9459, epsilon = 1e-4);
    }

    #[test]
    fn crossentropy_rejects_bad_input() {
        assert!(categorical_crossentropy(&[0.5f64, 0.6], 0).is_err());
        assert!(categorical_crossentropy(&[-0.5f64, 1.5], 0).is_err());
        assert!(categorical_crossentropy(&[0.5f64, 0.5], 2).is_err());
        assert!(categorical_crossentropy(&[f64::NAN, 1.0], 0).is_err());
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[0.3f64, 0.4], &[0.3, 0.4], &[true, true]), 0.0);
        assert_eq!(mse_loss(&[1.0f64, 0.0], &[0.0, 0.0], &[true, true]), 0.5);
        assert_eq!(mse_loss(&[1.0f64, 7.0], &[0.0, 0.0], &[false, false]), 0.0);
        assert_eq!(mse_grad(&[1.0f64, 7.0], &[0.0, 0.0], &[true, false]), vec![2.0, 0.0]);
    }

    #[test]
    fn softmax_ce_gradient_matches_differences() {
        let logits = [0.2f64, -0.7, 1.1, 0.05];
        let (_, g, _) = softmax_crossentropy(&logits, 2).unwrap();
        for k in 0..4 {
            let mut a = logits;
            let mut b = logits;
            a[k] += 1e-6;
            b[k] -= 1e-6;
            let num = (softmax_crossentropy(&a, 2).unwrap().0 - softmax_crossentropy(&b, 2).unwrap().0) / 2e-6;
            assert_abs_diff_eq!(g[k], num, epsilon = 1e-8);
        }
    }
}
