use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Output of a 2×2 max pool and, per output cell, the raster offset
/// (`dy·2 + dx`) of the winning input.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled<T> {
    pub output: Tensor<T>,
    pub argmax: Vec<u8>,
}

/// 2×2 max pool with stride 2. Ties go to the first window element in
/// raster order.
pub fn maxpool2_fwd<T: Scalar>(input: &Tensor<T>) -> Result<Pooled<T>> {
    let (n, c, h, w) = input.dims4()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!("max pool needs even spatial dims, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for plane in input.data().chunks(h * w) {
        for y in 0..oh {
            for x in 0..ow {
                let mut best = plane[2 * y * w + 2 * x];
                let mut which = 0u8;
                for off in 1..4u8 {
                    let v = plane[(2 * y + (off / 2) as usize) * w + 2 * x + (off % 2) as usize];
                    if v > best {
                        best = v;
                        which = off;
                    }
                }
                out.push(best);
                argmax.push(which);
            }
        }
    }
    Ok(Pooled {
        output: Tensor::new([n, c, oh, ow], out)?,
        argmax,
    })
}

/// Routes each output gradient to the input position that won its window.
pub fn maxpool2_bwd<T: Scalar>(grad_out: &Tensor<T>, argmax: &[u8]) -> Result<Tensor<T>> {
    let (n, c, oh, ow) = grad_out.dims4()?;
    if argmax.len() != grad_out.len() {
        return Err(Error::Shape(format!(
            "argmax has {} entries for {} gradients",
            argmax.len(),
            grad_out.len()
        )));
    }
    let (h, w) = (oh * 2, ow * 2);
    let mut g = vec![T::zero(); n * c * h * w];
    for (p, plane) in g.chunks_mut(h * w).enumerate() {
        let base = p * oh * ow;
        for y in 0..oh {
            for x in 0..ow {
                let i = base + y * ow + x;
                let off = argmax[i] as usize;
                plane[(2 * y + off / 2) * w + 2 * x + off % 2] = grad_out.data()[i];
            }
        }
    }
    Tensor::new([n, c, h, w], g)
}

/// Nearest-neighbour 2× upsampling: every pixel becomes a 2×2 block.
pub fn upsample2_fwd<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = input.dims4()?;
    let (oh, ow) = (h * 2, w * 2);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for plane in input.data().chunks(h * w) {
        for y in 0..oh {
            let row = &plane[(y / 2) * w..(y / 2 + 1) * w];
            for &v in row {
                out.push(v);
                out.push(v);
            }
        }
    }
    Tensor::new([n, c, oh, ow], out)
}

/// Each input gradient is the sum over the 2×2 block it was copied into.
pub fn upsample2_bwd<T: Scalar>(grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = grad_out.dims4()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!("upsample grad must have even dims, got {h}x{w}")));
    }
    let (ih, iw) = (h / 2, w / 2);
    let mut g = Vec::with_capacity(n * c * ih * iw);
    for plane in grad_out.data().chunks(h * w) {
        for y in 0..ih {
            for x in 0..iw {
                let top = 2 * y * w + 2 * x;
                g.push(plane[top] + plane[top + 1] + plane[top + w] + plane[top + w + 1]);
            }
        }
    }
    Tensor::new([n, c, ih, iw], g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn single_window() {
        let t = Tensor::<f32>::new([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = maxpool2_fwd(&t).unwrap();
        assert_eq!(p.output.data(), &[4.0]);
        assert_eq!(p.argmax, [3]);
    }

    #[test]
    fn ties_pick_first_in_raster_order() {
        let t = Tensor::<f32>::full([2, 3, 4, 6], 1.5);
        let p = maxpool2_fwd(&t).unwrap();
        assert!(p.output.data().iter().all(|&v| v == 1.5));
        assert!(p.argmax.iter().all(|&a| a == 0));
    }

    #[test]
    fn odd_dims_rejected() {
        assert!(maxpool2_fwd(&Tensor::<f32>::zeros([1, 1, 3, 4])).is_err());
    }

    #[test]
    fn matches_window_scan() {
        let mut rng = Rng::new(4);
        let t = Tensor::<f64>::from_fn([2, 3, 6, 8], |_| rng.uniform(-1.0, 1.0));
        let p = maxpool2_fwd(&t).unwrap();
        let d = t.data();
        for b in 0..2 {
            for c in 0..3 {
                for y in 0..3 {
                    for x in 0..4 {
                        let at = |dy: usize, dx: usize| d[((b * 3 + c) * 6 + 2 * y + dy) * 8 + 2 * x + dx];
                        let m = at(0, 0).max(at(0, 1)).max(at(1, 0)).max(at(1, 1));
                        assert_eq!(p.output.data()[((b * 3 + c) * 3 + y) * 4 + x], m);
                    }
                }
            }
        }
    }

    #[test]
    fn pool_backward_routes_once() {
        let mut rng = Rng::new(6);
        let t = Tensor::<f64>::from_fn([1, 2, 4, 4], |_| rng.uniform(-1.0, 1.0));
        let p = maxpool2_fwd(&t).unwrap();
        let ones = Tensor::full(p.output.shape(), 1.0);
        let g = maxpool2_bwd(&ones, &p.argmax).unwrap();
        assert_eq!(g.shape(), t.shape());
        // Exactly one position per window receives the unit gradient.
        assert_eq!(g.data().iter().filter(|&&v| v == 1.0).count(), p.output.len());
        assert!(g.data().iter().all(|&v| v == 0.0 || v == 1.0));

        let z = maxpool2_bwd(&Tensor::<f64>::zeros(p.output.shape()), &p.argmax).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn upsample_replicates() {
        let t = Tensor::<f32>::new([1, 1, 1, 1], vec![7.0]).unwrap();
        assert_eq!(upsample2_fwd(&t).unwrap().data(), &[7.0; 4]);

        let mut rng = Rng::new(8);
        let r = Tensor::<f64>::from_fn([2, 2, 3, 5], |_| rng.uniform(-1.0, 1.0));
        let u = upsample2_fwd(&r).unwrap();
        assert_eq!(u.shape(), &[2, 2, 6, 10]);
        for p in 0..4 {
            for y in 0..6 {
                for x in 0..10 {
                    assert_eq!(u.data()[p * 60 + y * 10 + x], r.data()[p * 15 + (y / 2) * 5 + x / 2]);
                }
            }
        }
    }

    #[test]
    fn upsample_backward_sums_blocks() {
        let g = upsample2_bwd(&Tensor::<f32>::full([1, 2, 4, 6], 1.0)).unwrap();
        assert_eq!(g.shape(), &[1, 2, 2, 3]);
        assert!(g.data().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn pool_then_upsample_fixes_blockwise_constants() {
        let t = Tensor::<f32>::full([1, 2, 4, 4], 3.0);
        assert_eq!(upsample2_fwd(&maxpool2_fwd(&t).unwrap().output).unwrap(), t);
    }
}
