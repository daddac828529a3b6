use super::Tensor;
use crate::error::Result;
use crate::scalar::Scalar;

/// Predictions are clamped to `[BCE_CLAMP, 1 − BCE_CLAMP]` before the log.
pub const BCE_CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy and its gradient with respect to `pred`.
///
/// The gradient is evaluated at the clamped prediction so saturated
/// outputs still receive a finite push toward the target.
pub fn bce_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    target.expect_shape(pred.shape(), "bce target")?;
    let n = T::of(pred.len() as f64);
    let lo = T::of(BCE_CLAMP);
    let hi = T::one() - lo;
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let p = p.max(lo).min(hi);
        let one_m_p = T::one() - p;
        total = total - (t * p.ln() + (T::one() - t) * one_m_p.ln());
        grad.push((-(t / p) + (T::one() - t) / one_m_p) / n);
    }
    Ok((total / n, Tensor::new(pred.shape(), grad)?))
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    target.expect_shape(pred.shape(), "mse target")?;
    let n = T::of(pred.len() as f64);
    let two = T::of(2.0);
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let d = p - t;
        total = total + d * d;
        grad.push(two * d / n);
    }
    Ok((total / n, Tensor::new(pred.shape(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_of_exact_prediction_is_zero() {
        let p = Tensor::<f64>::from_fn([3, 2], |i| i as f64 * 0.1);
        let (l, g) = mse_loss(&p, &p).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bce_at_half_is_ln2() {
        let p = Tensor::<f64>::full([4], 0.5);
        let t = Tensor::new([4], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let (l, _) = bce_loss(&p, &t).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn bce_clamps_saturated_predictions() {
        let p = Tensor::<f64>::new([2], vec![0.0, 1.0]).unwrap();
        let t = Tensor::new([2], vec![1.0, 0.0]).unwrap();
        let (l, g) = bce_loss(&p, &t).unwrap();
        assert!(l.is_finite() && (l - (-(1e-7f64).ln())).abs() < 1e-6);
        assert!(g.all_finite());
    }

    #[test]
    fn shape_mismatch() {
        let p = Tensor::<f32>::zeros([2]);
        assert!(bce_loss(&p, &Tensor::zeros([3])).is_err());
        assert!(mse_loss(&p, &Tensor::zeros([1, 2])).is_err());
    }
}
