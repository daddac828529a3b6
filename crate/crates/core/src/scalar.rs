//! Scalar abstractions shared by the tensor engine and the metrics code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Real scalar the tensor engine is generic over.
///
/// Training runs in `f32`; gradient checking switches the whole graph to
/// `f64`. The only operation that differs per type is the matrix product:
/// `f32` goes through a blocked SIMD kernel, `f64` uses a plain loop that
/// accumulates every output in strictly increasing `k` order so results are
/// reproducible against a naive reference.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// `C = A·B` (or `C += A·B` when `accumulate`), all operands addressed
    /// through row/column strides.
    fn gemm(dims: GemmDims, a: Strided<'_, Self>, b: Strided<'_, Self>, c: StridedMut<'_, Self>, accumulate: bool);

    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to every Scalar")
    }

    fn to_f32_lossy(self) -> f32 {
        self.to_f32().unwrap_or(f32::NAN)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GemmDims {
    pub m: usize,
    pub k: usize,
    pub n: usize,
}

/// Read-only matrix view: element `(i, j)` lives at `data[i*rs + j*cs]`.
#[derive(Clone, Copy)]
pub struct Strided<'a, T> {
    pub data: &'a [T],
    pub rs: usize,
    pub cs: usize,
}

pub struct StridedMut<'a, T> {
    pub data: &'a mut [T],
    pub rs: usize,
    pub cs: usize,
}

impl<'a, T> Strided<'a, T> {
    pub fn row_major(data: &'a [T], cols: usize) -> Self {
        Strided { data, rs: cols, cs: 1 }
    }

    /// View of the transpose of a row-major `rows × cols` matrix.
    pub fn transposed(data: &'a [T], cols: usize) -> Self {
        Strided { data, rs: 1, cs: cols }
    }
}

impl<'a, T> StridedMut<'a, T> {
    pub fn row_major(data: &'a mut [T], cols: usize) -> Self {
        StridedMut { data, rs: cols, cs: 1 }
    }
}

fn check_extent(len: usize, rows: usize, cols: usize, rs: usize, cs: usize) {
    if rows > 0 && cols > 0 {
        let last = (rows - 1) * rs + (cols - 1) * cs;
        assert!(last < len, "gemm operand too short: need index {last}, have {len}");
    }
}

fn check_operands<T>(d: GemmDims, a: &Strided<'_, T>, b: &Strided<'_, T>, c: &StridedMut<'_, T>) {
    check_extent(a.data.len(), d.m, d.k, a.rs, a.cs);
    check_extent(b.data.len(), d.k, d.n, b.rs, b.cs);
    check_extent(c.data.len(), d.m, d.n, c.rs, c.cs);
}

impl Scalar for f32 {
    fn gemm(d: GemmDims, a: Strided<'_, f32>, b: Strided<'_, f32>, c: StridedMut<'_, f32>, accumulate: bool) {
        check_operands(d, &a, &b, &c);
        if d.m == 0 || d.n == 0 {
            return;
        }
        let beta = if accumulate { 1.0 } else { 0.0 };
        // SAFETY: all three operands were bounds-checked against their strides above.
        unsafe {
            matrixmultiply::sgemm(
                d.m,
                d.k,
                d.n,
                1.0,
                a.data.as_ptr(),
                a.rs as isize,
                a.cs as isize,
                b.data.as_ptr(),
                b.rs as isize,
                b.cs as isize,
                beta,
                c.data.as_mut_ptr(),
                c.rs as isize,
                c.cs as isize,
            );
        }
    }
}

impl Scalar for f64 {
    fn gemm(d: GemmDims, a: Strided<'_, f64>, b: Strided<'_, f64>, c: StridedMut<'_, f64>, accumulate: bool) {
        check_operands(d, &a, &b, &c);
        let StridedMut { data: out, rs: rsc, cs: csc } = c;
        for i in 0..d.m {
            if !accumulate {
                for j in 0..d.n {
                    out[i * rsc + j * csc] = 0.0;
                }
            }
            for k in 0..d.k {
                let aik = a.data[i * a.rs + k * a.cs];
                for j in 0..d.n {
                    out[i * rsc + j * csc] += aik * b.data[k * b.rs + j * b.cs];
                }
            }
        }
    }
}

/// Exact-or-approximate fraction type used for ROC coordinates.
///
/// Implemented for `f32`/`f64` and for `Ratio<i64>`, which makes the
/// trapezoid area exact.
pub trait Fraction: Num + Clone + PartialOrd + Debug {
    fn from_counts(num: u64, den: u64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Fraction for f64 {
    fn from_counts(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Fraction for f32 {
    fn from_counts(num: u64, den: u64) -> Self {
        (num as f64 / den as f64) as f32
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

impl Fraction for Ratio<i64> {
    fn from_counts(num: u64, den: u64) -> Self {
        Ratio::new(num as i64, den as i64)
    }
    fn to_f64(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_paths_agree_on_small_product() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0]; // 3x2
        let mut c64 = [0.0f64; 4];
        f64::gemm(
            GemmDims { m: 2, k: 3, n: 2 },
            Strided::row_major(&a, 3),
            Strided::row_major(&b, 2),
            StridedMut::row_major(&mut c64, 2),
            false,
        );
        assert_eq!(c64, [4.0, 5.0, 10.0, 11.0]);

        let a32: Vec<f32> = a.iter().map(|&v| v as f32).collect();
        let b32: Vec<f32> = b.iter().map(|&v| v as f32).collect();
        let mut c32 = [1.0f32; 4];
        f32::gemm(
            GemmDims { m: 2, k: 3, n: 2 },
            Strided::row_major(&a32, 3),
            Strided::row_major(&b32, 2),
            StridedMut::row_major(&mut c32, 2),
            true,
        );
        assert_eq!(c32, [5.0, 6.0, 11.0, 12.0]);
    }

    #[test]
    fn transposed_view_reads_columns() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3, use as its 3x2 transpose
        let b = [1.0, 1.0];
        let mut c = [0.0f64; 3];
        f64::gemm(
            GemmDims { m: 3, k: 2, n: 1 },
            Strided::transposed(&a, 3),
            Strided::row_major(&b, 1),
            StridedMut::row_major(&mut c, 1),
            false,
        );
        assert_eq!(c, [5.0, 7.0, 9.0]);
    }

    #[test]
    fn ratio_fraction_is_exact() {
        let r = Ratio::<i64>::from_counts(1, 3);
        assert_eq!(r + Ratio::from_counts(2, 3), Ratio::from_integer(1));
    }
}
