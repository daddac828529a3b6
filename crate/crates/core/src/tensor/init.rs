use super::Tensor;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Kaiming-uniform: `U(−√(6/fan_in), √(6/fan_in))`.
pub fn kaiming_uniform<T: Scalar>(rng: &mut Rng, shape: &[usize], fan_in: usize) -> Tensor<T> {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    Tensor::from_fn(shape.to_vec(), |_| T::of(rng.uniform(-bound, bound)))
}
