//! Vector kernels used by the layers. Fixed summation order, so results are
//! reproducible bit for bit on one platform.

use crate::Scalar;

const LANES: usize = 8;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..LANES {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    let mut s = T::zero();
    for v in acc {
        s += v;
    }
    s + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `y += W x` for row-major `W` with `y.len()` rows.
#[inline]
pub fn gemv_acc<T: Scalar>(w: &[T], x: &[T], y: &mut [T]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), cols * y.len());
    for (yi, row) in y.iter_mut().zip(w.chunks_exact(cols)) {
        *yi += dot(row, x);
    }
}

/// `dx += Wᵀ d`
#[inline]
pub fn gemv_t_acc<T: Scalar>(w: &[T], d: &[T], dx: &mut [T]) {
    let cols = dx.len();
    debug_assert_eq!(w.len(), cols * d.len());
    for (&di, row) in d.iter().zip(w.chunks_exact(cols)) {
        if di != T::zero() {
            axpy(di, row, dx);
        }
    }
}

/// `dW += d xᵀ`
#[inline]
pub fn ger_acc<T: Scalar>(dw: &mut [T], d: &[T], x: &[T]) {
    let cols = x.len();
    debug_assert_eq!(dw.len(), cols * d.len());
    for (&di, row) in d.iter().zip(dw.chunks_exact_mut(cols)) {
        if di != T::zero() {
            axpy(di, x, row);
        }
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Zero out subnormal values. Gradients carried back over hundreds of steps
/// decay into the subnormal range, where arithmetic is very slow and the
/// contribution is negligible.
pub fn flush_subnormal<T: Scalar>(v: &mut [T]) {
    let tiny = T::min_positive_value();
    for x in v {
        if x.abs() < tiny {
            *x = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..19).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..19).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-9);
    }

    #[test]
    fn gemv_family() {
        // W = [[1,1],[0,1]]
        let w = [1.0, 1.0, 0.0, 1.0];
        let mut y = [0.0; 2];
        gemv_acc(&w, &[1.0, 2.0], &mut y);
        assert_eq!(y, [3.0, 2.0]);
        let mut dx = [0.0; 2];
        gemv_t_acc(&w, &[1.0, 1.0], &mut dx);
        assert_eq!(dx, [1.0, 2.0]);
        let mut dw = [0.0; 4];
        ger_acc(&mut dw, &[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!(dw, [3.0, 4.0, 6.0, 8.0]);
    }
}
