use super::Tensor;
use crate::error::Result;
use crate::scalar::Scalar;

pub fn relu_fwd<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes gradient where the forward input was strictly positive.
pub fn relu_bwd<T: Scalar>(grad_out: &Tensor<T>, input: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.expect_shape(input.shape(), "relu grad_out")?;
    let data = grad_out
        .data()
        .iter()
        .zip(input.data())
        .map(|(&g, &x)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(input.shape(), data)
}

pub fn sigmoid_fwd<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| T::one() / (T::one() + (-v).exp()))
}

/// Uses the saved forward output `s`: `grad · s·(1−s)`.
pub fn sigmoid_bwd<T: Scalar>(grad_out: &Tensor<T>, output: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.expect_shape(output.shape(), "sigmoid grad_out")?;
    let data = grad_out
        .data()
        .iter()
        .zip(output.data())
        .map(|(&g, &s)| g * s * (T::one() - s))
        .collect();
    Tensor::new(output.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_values() {
        let t = Tensor::<f64>::new([4], vec![-1.0, 0.0, 2.0, -0.5]).unwrap();
        assert_eq!(relu_fwd(&t).data(), &[0.0, 0.0, 2.0, 0.0]);
        let g = relu_bwd(&Tensor::full([4], 1.0), &t).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn sigmoid_values() {
        let t = Tensor::<f64>::new([3], vec![0.0, 40.0, -40.0]).unwrap();
        let s = sigmoid_fwd(&t);
        assert_eq!(s.data()[0], 0.5);
        assert!((s.data()[1] - 1.0).abs() < 1e-12);
        assert!(s.data()[2] > 0.0 && s.data()[2] < 1e-12);
        let g = sigmoid_bwd(&Tensor::full([3], 1.0), &s).unwrap();
        assert_eq!(g.data()[0], 0.25);
    }
}
