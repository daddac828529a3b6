use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::{GemmDims, Scalar, Strided, StridedMut};

/// Lane-blocked dot product with a fixed summation order.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    const LANES: usize = 8;
    let mut acc = [T::zero(); LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail = ca.remainder().iter().zip(cb.remainder()).fold(T::zero(), |s, (&x, &y)| s + x * y);
    for (xa, xb) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] = acc[l] + xa[l] * xb[l];
        }
    }
    acc.iter().fold(tail, |s, &v| s + v)
}

/// Affine map `out[n,o] = bias[o] + Σ_f w[o,f]·in[n,f]`.
pub fn fc_fwd<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, f) = input.dims2()?;
    let (o, wf) = weight.dims2()?;
    if wf != f {
        return Err(Error::Shape(format!("fc expects {wf} features, got {f}")));
    }
    bias.expect_shape(&[o], "fc bias")?;
    // Weight rows are contiguous, so each output is a unit-stride dot
    // product; a packed GEMM spends most of its time repacking the weight
    // when the batch is small.
    let mut out = vec![T::zero(); n * o];
    if f == 0 {
        for row in out.chunks_exact_mut(o.max(1)) {
            row.copy_from_slice(&bias.data()[..row.len()]);
        }
        return Tensor::new([n, o], out);
    }
    for (j, (w_row, &b)) in weight.data().chunks_exact(f).zip(bias.data()).enumerate() {
        for (i, x_row) in input.data().chunks_exact(f).enumerate() {
            out[i * o + j] = b + dot(x_row, w_row);
        }
    }
    Tensor::new([n, o], out)
}

#[derive(Debug, Clone)]
pub struct FcGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn fc_bwd<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weight: &Tensor<T>,
    need_input_grad: bool,
) -> Result<FcGrads<T>> {
    let (n, f) = input.dims2()?;
    let (o, _) = weight.dims2()?;
    weight.expect_shape(&[o, f], "fc weight")?;
    grad_out.expect_shape(&[n, o], "fc grad_out")?;
    let mut g_w = vec![T::zero(); o * f];
    T::gemm(
        GemmDims { m: o, k: n, n: f },
        Strided::transposed(grad_out.data(), o),
        Strided::row_major(input.data(), f),
        StridedMut::row_major(&mut g_w, f),
        false,
    );
    let mut g_b = vec![T::zero(); o];
    for row in grad_out.data().chunks(o) {
        for (b, &g) in g_b.iter_mut().zip(row) {
            *b = *b + g;
        }
    }
    let g_in = if need_input_grad {
        let mut g = vec![T::zero(); n * f];
        T::gemm(
            GemmDims { m: n, k: o, n: f },
            Strided::row_major(grad_out.data(), o),
            Strided::row_major(weight.data(), f),
            StridedMut::row_major(&mut g, f),
            false,
        );
        Some(Tensor::new([n, f], g)?)
    } else {
        None
    };
    Ok(FcGrads {
        input: g_in,
        weight: Tensor::new([o, f], g_w)?,
        bias: Tensor::new([o], g_b)?,
    })
}
