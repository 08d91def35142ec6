//! Dense rank-4 tensors in `(N, C, H, W)` row-major layout.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;
use core::iter::Sum;
use core::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

use crate::error::{Error, Result};

/// Floating-point element type of a [`Tensor`].
///
/// Production paths use `f32`; gradient checks run the same kernels in `f64`.
pub trait Scalar:
    Float + Default + Debug + AddAssign + SubAssign + MulAssign + Sum + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// `c ← c + a·b` for an `m × k` matrix `a` and a `k × n` matrix `b`, each
    /// given as `(buffer, row stride, column stride)`.
    #[doc(hidden)]
    fn gemm_acc(
        m: usize,
        k: usize,
        n: usize,
        a: Strided<'_, Self>,
        b: Strided<'_, Self>,
        c: StridedMut<'_, Self>,
    );
}

/// Read-only strided matrix view: `(data, row stride, column stride)`.
#[doc(hidden)]
pub type Strided<'a, T> = (&'a [T], usize, usize);
#[doc(hidden)]
pub type StridedMut<'a, T> = (&'a mut [T], usize, usize);

#[inline]
fn check_extent(len: usize, rows: usize, cols: usize, rs: usize, cs: usize) {
    if rows > 0 && cols > 0 {
        assert!(
            (rows - 1) * rs + (cols - 1) * cs < len,
            "strided view exceeds its buffer"
        );
    }
}

macro_rules! scalar_impl {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }

            fn gemm_acc(
                m: usize,
                k: usize,
                n: usize,
                a: Strided<'_, Self>,
                b: Strided<'_, Self>,
                c: StridedMut<'_, Self>,
            ) {
                if m == 0 || n == 0 || k == 0 {
                    return;
                }
                check_extent(a.0.len(), m, k, a.1, a.2);
                check_extent(b.0.len(), k, n, b.1, b.2);
                check_extent(c.0.len(), m, n, c.1, c.2);
                // SAFETY: every index touched lies inside its slice (checked
                // above), and `c` is an exclusive borrow so it aliases neither input.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.0.as_ptr(),
                        a.1 as isize,
                        a.2 as isize,
                        b.0.as_ptr(),
                        b.1 as isize,
                        b.2 as isize,
                        1.0,
                        c.0.as_mut_ptr(),
                        c.1 as isize,
                        c.2 as isize,
                    );
                }
            }
        }
    };
}

scalar_impl!(f32, matrixmultiply::sgemm);
scalar_impl!(f64, matrixmultiply::dgemm);

/// Extent of a tensor along `(batch, channels, height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Dims {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Dims {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Dims { n, c, h, w }
    }

    pub const fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn plane(&self) -> usize {
        self.h * self.w
    }

    pub const fn as_array(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }
}

impl From<[usize; 4]> for Dims {
    fn from(d: [usize; 4]) -> Self {
        Dims::new(d[0], d[1], d[2], d[3])
    }
}

impl core::fmt::Display for Dims {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.c, self.h, self.w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    dims: Dims,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(dims: impl Into<Dims>) -> Self {
        let dims = dims.into();
        Tensor {
            dims,
            data: vec![T::zero(); dims.len()],
        }
    }

    pub fn filled(dims: impl Into<Dims>, value: T) -> Self {
        let dims = dims.into();
        Tensor {
            dims,
            data: vec![value; dims.len()],
        }
    }

    pub fn from_vec(dims: impl Into<Dims>, data: Vec<T>) -> Result<Self> {
        let dims = dims.into();
        if data.len() != dims.len() {
            return Err(Error::shape(
                "Tensor::from_vec",
                "data length",
                dims.len(),
                data.len(),
            ));
        }
        Ok(Tensor { dims, data })
    }

    pub fn from_fn(
        dims: impl Into<Dims>,
        mut f: impl FnMut(usize, usize, usize, usize) -> T,
    ) -> Self {
        let dims = dims.into();
        let mut data = Vec::with_capacity(dims.len());
        for n in 0..dims.n {
            for c in 0..dims.c {
                for y in 0..dims.h {
                    for x in 0..dims.w {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        Tensor { dims, data }
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    fn offset(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        debug_assert!(n < self.dims.n && c < self.dims.c && y < self.dims.h && x < self.dims.w);
        ((n * self.dims.c + c) * self.dims.h + y) * self.dims.w + x
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.offset(n, c, y, x)]
    }

    #[inline]
    pub fn at_mut(&mut self, n: usize, c: usize, y: usize, x: usize) -> &mut T {
        let o = self.offset(n, c, y, x);
        &mut self.data[o]
    }

    /// The `H × W` plane of channel `c` in batch entry `n`.
    #[inline]
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let p = self.dims.plane();
        let start = (n * self.dims.c + c) * p;
        &self.data[start..start + p]
    }

    #[inline]
    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [T] {
        let p = self.dims.plane();
        let start = (n * self.dims.c + c) * p;
        &mut self.data[start..start + p]
    }

    /// All channels of batch entry `n`.
    pub fn item(&self, n: usize) -> &[T] {
        let s = self.dims.c * self.dims.plane();
        &self.data[n * s..(n + 1) * s]
    }

    pub fn reshape(self, dims: impl Into<Dims>) -> Result<Self> {
        Tensor::from_vec(dims, self.data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            dims: self.dims,
            data: self.data.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    /// Inner product accumulated in `f64`.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.expect_dims("Tensor::dot", other.dims)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a.to_f64() * b.to_f64())
            .sum())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Errors with [`Error::NonFinite`] if any element is NaN or infinite.
    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.expect_dims("Tensor::add_assign", other.dims)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// Checks that `self` has exactly `dims`, naming the first differing axis.
    pub fn expect_dims(&self, op: &'static str, dims: Dims) -> Result<()> {
        check_dims(op, dims, self.dims)
    }
}

pub(crate) fn check_dims(op: &'static str, expected: Dims, found: Dims) -> Result<()> {
    const AXES: [&str; 4] = ["batch", "channel", "height", "width"];
    let (e, f) = (expected.as_array(), found.as_array());
    for i in 0..4 {
        if e[i] != f[i] {
            return Err(Error::shape(op, AXES[i], e[i], f[i]));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::<f32>::from_vec([1, 1, 2, 2], vec![0.0; 3]).is_err());
        let t = Tensor::<f32>::from_vec([1, 2, 2, 2], (0..8).map(|v| v as f32).collect()).unwrap();
        assert_eq!(t.at(0, 1, 0, 1), 5.0);
        assert_eq!(t.plane(0, 1), &[4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn dims_mismatch_names_axis() {
        let t = Tensor::<f64>::zeros([1, 2, 3, 4]);
        let err = t.expect_dims("op", Dims::new(1, 2, 5, 4)).unwrap_err();
        assert_eq!(err, Error::shape("op", "height", 5, 3));
    }

    #[test]
    fn finiteness_check() {
        let mut t = Tensor::<f32>::zeros([1, 1, 2, 2]);
        assert!(t.check_finite("t").is_ok());
        t.data_mut()[3] = f32::NAN;
        assert_eq!(t.check_finite("t"), Err(Error::NonFinite("t")));
    }

    #[test]
    fn cast_roundtrip_f32_exact() {
        let t = Tensor::<f32>::from_fn([1, 2, 3, 3], |_, c, y, x| (c * 9 + y * 3 + x) as f32 * 0.1);
        assert_eq!(t.cast::<f64>().cast::<f32>(), t);
    }
}
