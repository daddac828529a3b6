use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::{GemmDims, Scalar, Strided, StridedMut};

const K: usize = 3;

/// Unfolds one `(c, h, w)` image into a `(c·9) × (h·w)` patch matrix with
/// zero padding of 1. Row `ci·9 + dy·3 + dx`, column `y·w + x`.
fn im2col<T: Scalar>(image: &[T], c: usize, h: usize, w: usize, col: &mut [T]) {
    let hw = h * w;
    for ci in 0..c {
        let plane = &image[ci * hw..(ci + 1) * hw];
        for dy in 0..K {
            for dx in 0..K {
                let row = &mut col[((ci * K + dy) * K + dx) * hw..][..hw];
                for y in 0..h {
                    let out = &mut row[y * w..(y + 1) * w];
                    let sy = y as isize + dy as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        out.fill(T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    for (x, o) in out.iter_mut().enumerate() {
                        let sx = x as isize + dx as isize - 1;
                        *o = if sx < 0 || sx >= w as isize { T::zero() } else { src[sx as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the image.
fn col2im<T: Scalar>(col: &[T], c: usize, h: usize, w: usize, image: &mut [T]) {
    let hw = h * w;
    for ci in 0..c {
        let plane = &mut image[ci * hw..(ci + 1) * hw];
        for dy in 0..K {
            for dx in 0..K {
                let row = &col[((ci * K + dy) * K + dx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + dy as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    for x in 0..w {
                        let sx = x as isize + dx as isize - 1;
                        if sx >= 0 && sx < w as isize {
                            dst[sx as usize] = dst[sx as usize] + row[y * w + x];
                        }
                    }
                }
            }
        }
    }
}

fn check_params<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<(usize, usize, usize, usize, usize)> {
    let (n, c_in, h, w) = input.dims4()?;
    let [c_out, wc_in, kh, kw] = weight.shape()[..] else {
        return Err(Error::Shape(format!("conv weight must be rank 4, got {:?}", weight.shape())));
    };
    if (kh, kw) != (K, K) {
        return Err(Error::Shape(format!("conv kernel must be 3x3, got {kh}x{kw}")));
    }
    if wc_in != c_in {
        return Err(Error::Shape(format!("conv channel mismatch: input has {c_in}, weight expects {wc_in}")));
    }
    bias.expect_shape(&[c_out], "conv bias")?;
    Ok((n, c_in, h, w, c_out))
}

/// 3×3 convolution, stride 1, zero "same" padding.
///
/// `out[n,co,y,x] = bias[co] + Σ w[co,ci,dy,dx]·in[n,ci,y+dy-1,x+dx-1]`,
/// accumulated in `(ci, dy, dx)` order.
pub fn conv2d_fwd<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c_in, h, w, c_out) = check_params(input, weight, bias)?;
    let hw = h * w;
    let kk = c_in * K * K;
    let mut out = vec![T::zero(); n * c_out * hw];
    let mut col = vec![T::zero(); kk * hw];
    for img in 0..n {
        im2col(&input.data()[img * c_in * hw..(img + 1) * c_in * hw], c_in, h, w, &mut col);
        let dst = &mut out[img * c_out * hw..(img + 1) * c_out * hw];
        for (co, plane) in dst.chunks_mut(hw).enumerate() {
            plane.fill(bias.data()[co]);
        }
        T::gemm(
            GemmDims { m: c_out, k: kk, n: hw },
            Strided::row_major(weight.data(), kk),
            Strided::row_major(&col, hw),
            StridedMut::row_major(dst, hw),
            true,
        );
    }
    Tensor::new([n, c_out, h, w], out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    /// `None` when the caller asked not to propagate into the input.
    pub input: Option<Tensor<T>>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Exact gradients of [`conv2d_fwd`] given the saved forward input.
pub fn conv2d_bwd<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weight: &Tensor<T>,
    need_input_grad: bool,
) -> Result<ConvGrads<T>> {
    let (n, c_in, h, w) = input.dims4()?;
    let c_out = weight.shape().first().copied().unwrap_or(0);
    weight.expect_shape(&[c_out, c_in, K, K], "conv weight")?;
    grad_out.expect_shape(&[n, c_out, h, w], "conv grad_out")?;
    let hw = h * w;
    let kk = c_in * K * K;
    let mut g_w = vec![T::zero(); c_out * kk];
    let mut g_b = vec![T::zero(); c_out];
    let mut g_in = need_input_grad.then(|| vec![T::zero(); n * c_in * hw]);
    let mut col = vec![T::zero(); kk * hw];
    let mut g_col = vec![T::zero(); if need_input_grad { kk * hw } else { 0 }];
    for img in 0..n {
        let go = &grad_out.data()[img * c_out * hw..(img + 1) * c_out * hw];
        for (co, plane) in go.chunks(hw).enumerate() {
            g_b[co] = g_b[co] + plane.iter().copied().sum::<T>();
        }
        im2col(&input.data()[img * c_in * hw..(img + 1) * c_in * hw], c_in, h, w, &mut col);
        T::gemm(
            GemmDims { m: c_out, k: hw, n: kk },
            Strided::row_major(go, hw),
            Strided::transposed(&col, hw),
            StridedMut::row_major(&mut g_w, kk),
            true,
        );
        if let Some(g_in) = g_in.as_mut() {
            T::gemm(
                GemmDims { m: kk, k: c_out, n: hw },
                Strided::transposed(weight.data(), kk),
                Strided::row_major(go, hw),
                StridedMut::row_major(&mut g_col, hw),
                false,
            );
            col2im(&g_col, c_in, h, w, &mut g_in[img * c_in * hw..(img + 1) * c_in * hw]);
        }
    }
    Ok(ConvGrads {
        input: g_in.map(|d| Tensor::new([n, c_in, h, w], d)).transpose()?,
        weight: Tensor::new([c_out, c_in, K, K], g_w)?,
        bias: Tensor::new([c_out], g_b)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Direct six-loop convolution, independent of the patch-matrix path.
    fn naive_conv(input: &Tensor<f64>, weight: &Tensor<f64>, bias: &Tensor<f64>) -> Vec<f64> {
        let (n, c_in, h, w) = input.dims4().unwrap();
        let c_out = weight.shape()[0];
        let x = input.data();
        let k = weight.data();
        let mut out = vec![0.0; n * c_out * h * w];
        for b in 0..n {
            for co in 0..c_out {
                for y in 0..h {
                    for xo in 0..w {
                        let mut acc = bias.data()[co];
                        for ci in 0..c_in {
                            for dy in 0..3 {
                                for dx in 0..3 {
                                    let sy = y as isize + dy as isize - 1;
                                    let sx = xo as isize + dx as isize - 1;
                                    let v = if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                        0.0
                                    } else {
                                        x[((b * c_in + ci) * h + sy as usize) * w + sx as usize]
                                    };
                                    acc += k[((co * c_in + ci) * 3 + dy) * 3 + dx] * v;
                                }
                            }
                        }
                        out[((b * c_out + co) * h + y) * w + xo] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn delta_kernel_is_identity() {
        let c = 3;
        let input = Tensor::<f64>::from_fn([2, c, 4, 5], |i| i as f64 * 0.25 - 3.0);
        let mut wdata = vec![0.0; c * c * 9];
        for ch in 0..c {
            wdata[((ch * c + ch) * 3 + 1) * 3 + 1] = 1.0;
        }
        let weight = Tensor::new([c, c, 3, 3], wdata).unwrap();
        let out = conv2d_fwd(&input, &weight, &Tensor::zeros([c])).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn all_ones_kernel_hand_sums() {
        let input = Tensor::<f64>::full([1, 1, 3, 3], 1.0);
        let weight = Tensor::full([1, 1, 3, 3], 1.0);
        let out = conv2d_fwd(&input, &weight, &Tensor::zeros([1])).unwrap();
        assert_eq!(out.data(), &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn matches_direct_convolution() {
        let mut rng = Rng::new(5);
        let input = Tensor::<f64>::from_fn([2, 3, 5, 5], |_| rng.uniform(-1.0, 1.0));
        let weight = Tensor::from_fn([4, 3, 3, 3], |_| rng.uniform(-1.0, 1.0));
        let bias = Tensor::from_fn([4], |_| rng.uniform(-1.0, 1.0));
        let out = conv2d_fwd(&input, &weight, &bias).unwrap();
        assert_eq!(out.data(), &naive_conv(&input, &weight, &bias)[..]);

        let out32 = conv2d_fwd(&input.cast::<f32>(), &weight.cast(), &bias.cast()).unwrap();
        for (a, b) in out32.data().iter().zip(out.data()) {
            assert!((*a as f64 - b).abs() < 1e-5);
        }
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let input = Tensor::<f32>::zeros([1, 2, 4, 4]);
        let weight = Tensor::zeros([1, 3, 3, 3]);
        assert!(conv2d_fwd(&input, &weight, &Tensor::zeros([1])).is_err());
        let weight5 = Tensor::zeros([1, 2, 5, 5]);
        assert!(conv2d_fwd(&input, &weight5, &Tensor::zeros([1])).is_err());
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let mut rng = Rng::new(9);
        let input = Tensor::<f64>::from_fn([2, 2, 4, 4], |_| rng.uniform(-1.0, 1.0));
        let weight = Tensor::from_fn([3, 2, 3, 3], |_| rng.uniform(-1.0, 1.0));
        let g = conv2d_bwd(&Tensor::zeros([2, 3, 4, 4]), &input, &weight, true).unwrap();
        assert!(g.input.unwrap().data().iter().all(|&v| v == 0.0));
        assert!(g.weight.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bias_grad_is_channel_sum() {
        let mut rng = Rng::new(10);
        let input = Tensor::<f64>::from_fn([2, 1, 3, 3], |_| rng.uniform(-1.0, 1.0));
        let weight = Tensor::from_fn([2, 1, 3, 3], |_| rng.uniform(-1.0, 1.0));
        let go = Tensor::from_fn([2, 2, 3, 3], |_| rng.uniform(-1.0, 1.0));
        let g = conv2d_bwd(&go, &input, &weight, false).unwrap();
        assert!(g.input.is_none());
        for co in 0..2 {
            let mut s = 0.0;
            for b in 0..2 {
                s += go.data()[(b * 2 + co) * 9..(b * 2 + co + 1) * 9].iter().sum::<f64>();
            }
            assert!((g.bias.data()[co] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_rejects_mismatched_context() {
        let input = Tensor::<f32>::zeros([1, 2, 4, 4]);
        let weight = Tensor::zeros([3, 2, 3, 3]);
        assert!(conv2d_bwd(&Tensor::zeros([1, 3, 4, 5]), &input, &weight, true).is_err());
    }
}
