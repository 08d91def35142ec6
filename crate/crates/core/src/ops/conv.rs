//! 2-D convolution and transposed convolution.
//!
//! Three primitives carry every case:
//!
//! * `correlate`: `out[a] = Σ_b K[a, b] ⋆ in[b]` (strided cross-correlation),
//! * `scatter`: its adjoint, `out[b] = Σ_a K[a, b]ᵀ in[a]`,
//! * `kernel_grad`: `∂⟨correlate(x, K), y⟩ / ∂K`.
//!
//! A convolution is `correlate` plus bias, and its input gradient is
//! `scatter`. A transposed convolution swaps the two.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{check_dims, Dims, Scalar, Strided, Tensor};

/// Weights of a convolution layer.
///
/// For [`conv2d_forward`] the kernel is laid out `(C_out, C_in, kH, kW)`. For
/// [`conv2d_transpose_forward`] the same tensor is read as
/// `(C_in, C_out, kH, kW)`, so a kernel shared between a convolution and a
/// transposed convolution makes the two operators adjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T = f32> {
    pub kernel: Tensor<T>,
    pub bias: Vec<T>,
    pub stride: usize,
    pub padding: usize,
}

/// Gradients returned by the backward kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T = f32> {
    pub input: Tensor<T>,
    pub kernel: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvParams<T> {
    /// Stride-1 convolution with "same" padding for odd kernel sizes.
    pub fn same(kernel: Tensor<T>, bias: Vec<T>) -> Result<Self> {
        let pad = kernel.dims().h / 2;
        Self::new(kernel, bias, 1, pad)
    }

    /// Validates a convolution whose kernel is read as `(C_out, C_in, kH, kW)`.
    pub fn new(kernel: Tensor<T>, bias: Vec<T>, stride: usize, padding: usize) -> Result<Self> {
        let p = ConvParams {
            kernel,
            bias,
            stride,
            padding,
        };
        p.validate("ConvParams", p.kernel.dims().n)?;
        Ok(p)
    }

    /// Validates a transposed convolution whose kernel is read as
    /// `(C_in, C_out, kH, kW)`.
    pub fn new_transpose(
        kernel: Tensor<T>,
        bias: Vec<T>,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let p = ConvParams {
            kernel,
            bias,
            stride,
            padding,
        };
        p.validate("ConvParams", p.kernel.dims().c)?;
        Ok(p)
    }

    fn validate(&self, op: &'static str, bias_len: usize) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::invalid(op, "stride must be positive"));
        }
        let k = self.kernel.dims();
        if k.h == 0 || k.w == 0 {
            return Err(Error::invalid(op, "empty kernel"));
        }
        if self.bias.len() != bias_len {
            return Err(Error::shape(op, "bias length", bias_len, self.bias.len()));
        }
        Ok(())
    }
}

/// Spatial output extent of a convolution, `None` if the kernel does not fit.
pub fn conv_output_size(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Option<usize> {
    if stride == 0 {
        return None;
    }
    (input + 2 * padding)
        .checked_sub(kernel)
        .map(|r| r / stride + 1)
}

/// Spatial output extent of a transposed convolution.
pub fn transpose_output_size(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Option<usize> {
    if input == 0 {
        return None;
    }
    ((input - 1) * stride + kernel)
        .checked_sub(2 * padding)
        .filter(|&v| v > 0)
}

pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, params: &ConvParams<T>) -> Result<Tensor<T>> {
    const OP: &str = "conv2d_forward";
    params.validate(OP, params.kernel.dims().n)?;
    let (i, k) = (input.dims(), params.kernel.dims());
    if i.c != k.c {
        return Err(Error::shape(OP, "channel", k.c, i.c));
    }
    let (oh, ow) = conv_out_hw(OP, i, k, params)?;
    let mut out = correlate(input, &params.kernel, params.stride, params.padding, oh, ow);
    add_bias(&mut out, &params.bias);
    Ok(out)
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    const OP: &str = "conv2d_backward";
    params.validate(OP, params.kernel.dims().n)?;
    let (i, k) = (input.dims(), params.kernel.dims());
    if i.c != k.c {
        return Err(Error::shape(OP, "channel", k.c, i.c));
    }
    let (oh, ow) = conv_out_hw(OP, i, k, params)?;
    check_dims(OP, Dims::new(i.n, k.n, oh, ow), grad_out.dims())?;
    Ok(ConvGrads {
        input: scatter(
            grad_out,
            &params.kernel,
            params.stride,
            params.padding,
            i.h,
            i.w,
        ),
        kernel: kernel_grad(input, grad_out, k, params.stride, params.padding),
        bias: channel_sums(grad_out),
    })
}

pub fn conv2d_transpose_forward<T: Scalar>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
) -> Result<Tensor<T>> {
    const OP: &str = "conv2d_transpose_forward";
    params.validate(OP, params.kernel.dims().c)?;
    let (i, k) = (input.dims(), params.kernel.dims());
    if i.c != k.n {
        return Err(Error::shape(OP, "channel", k.n, i.c));
    }
    let (oh, ow) = transpose_out_hw(OP, i, k, params)?;
    let mut out = scatter(input, &params.kernel, params.stride, params.padding, oh, ow);
    add_bias(&mut out, &params.bias);
    Ok(out)
}

pub fn conv2d_transpose_backward<T: Scalar>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    const OP: &str = "conv2d_transpose_backward";
    params.validate(OP, params.kernel.dims().c)?;
    let (i, k) = (input.dims(), params.kernel.dims());
    if i.c != k.n {
        return Err(Error::shape(OP, "channel", k.n, i.c));
    }
    let (oh, ow) = transpose_out_hw(OP, i, k, params)?;
    check_dims(OP, Dims::new(i.n, k.c, oh, ow), grad_out.dims())?;
    Ok(ConvGrads {
        input: correlate(
            grad_out,
            &params.kernel,
            params.stride,
            params.padding,
            i.h,
            i.w,
        ),
        kernel: kernel_grad(grad_out, input, k, params.stride, params.padding),
        bias: channel_sums(grad_out),
    })
}

fn conv_out_hw<T: Scalar>(
    op: &'static str,
    i: Dims,
    k: Dims,
    p: &ConvParams<T>,
) -> Result<(usize, usize)> {
    let oh = conv_output_size(i.h, k.h, p.stride, p.padding)
        .ok_or_else(|| Error::shape(op, "height", k.h, i.h + 2 * p.padding))?;
    let ow = conv_output_size(i.w, k.w, p.stride, p.padding)
        .ok_or_else(|| Error::shape(op, "width", k.w, i.w + 2 * p.padding))?;
    Ok((oh, ow))
}

fn transpose_out_hw<T: Scalar>(
    op: &'static str,
    i: Dims,
    k: Dims,
    p: &ConvParams<T>,
) -> Result<(usize, usize)> {
    let oh = transpose_output_size(i.h, k.h, p.stride, p.padding)
        .ok_or_else(|| Error::invalid(op, "padding removes the whole output height"))?;
    let ow = transpose_output_size(i.w, k.w, p.stride, p.padding)
        .ok_or_else(|| Error::invalid(op, "padding removes the whole output width"))?;
    Ok((oh, ow))
}

/// Output indices `o` in `lo..hi` such that `0 <= o * stride + offset < in_len`.
#[inline]
fn valid_range(out_len: usize, in_len: usize, stride: usize, offset: isize) -> (usize, usize) {
    let s = stride as isize;
    let lo = if offset >= 0 {
        0
    } else {
        (-offset + s - 1) / s
    };
    let last = in_len as isize - 1 - offset;
    let hi = if last < 0 {
        0
    } else {
        (last / s + 1).min(out_len as isize)
    };
    let lo = lo.min(hi);
    (lo as usize, hi as usize)
}

/// Patch-matrix elements per chunk; bounds scratch memory on large images.
const CHUNK_ELEMS: usize = 1 << 18;

/// Geometry shared by the three primitives: a `B`-channel image `x` of
/// `xh × xw` and an `A`-channel image `y` of `yh × yw`, related by
/// `y = correlate(x, K)` for a kernel `(A, B, kh, kw)`.
#[derive(Clone, Copy)]
struct Geometry {
    b: usize,
    xh: usize,
    xw: usize,
    kh: usize,
    kw: usize,
    yw: usize,
    ypix: usize,
    stride: usize,
    pad: usize,
}

impl Geometry {
    fn new(xd: Dims, kd: Dims, yh: usize, yw: usize, stride: usize, pad: usize) -> Self {
        Geometry {
            b: kd.c,
            xh: xd.h,
            xw: xd.w,
            kh: kd.h,
            kw: kd.w,
            yw,
            ypix: yh * yw,
            stride,
            pad,
        }
    }

    /// Rows of the patch matrix, one per `(b, ky, kx)`.
    fn rows(&self) -> usize {
        self.b * self.kh * self.kw
    }

    /// The patch matrix is `x` itself.
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    fn chunk(&self) -> usize {
        (CHUNK_ELEMS / self.rows().max(1)).clamp(1, self.ypix.max(1))
    }

    /// Visits every patch-matrix element of pixels `p0..p1` that reads inside
    /// `x`, as `(row, column in chunk, x offset within one item)`.
    #[inline]
    fn for_each_tap(&self, p0: usize, p1: usize, mut f: impl FnMut(usize, usize, usize)) {
        let (s, pad) = (self.stride as isize, self.pad as isize);
        for b in 0..self.b {
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let r = (b * self.kh + ky) * self.kw + kx;
                    let (lo, hi) = valid_range(self.yw, self.xw, self.stride, kx as isize - pad);
                    let mut p = p0;
                    while p < p1 {
                        let (oy, ox0) = (p / self.yw, p % self.yw);
                        let ox1 = self.yw.min(ox0 + (p1 - p));
                        let iy = oy as isize * s + ky as isize - pad;
                        if iy >= 0 && (iy as usize) < self.xh {
                            let row = (b * self.xh + iy as usize) * self.xw;
                            for ox in ox0.max(lo)..ox1.min(hi) {
                                let ix = (ox as isize * s + kx as isize - pad) as usize;
                                f(r, p - p0 + ox - ox0, row + ix);
                            }
                        }
                        p += ox1 - ox0;
                    }
                }
            }
        }
    }

    /// Fills `col` (rows × `p1 − p0`) with the patches of one item of `x`.
    fn im2col<T: Scalar>(&self, x: &[T], p0: usize, p1: usize, col: &mut [T]) {
        let width = p1 - p0;
        col.fill(T::zero());
        self.for_each_tap(p0, p1, |r, j, xi| col[r * width + j] = x[xi]);
    }

    /// Adds the patches in `col` back onto one item of `x`.
    fn col2im<T: Scalar>(&self, col: &[T], p0: usize, p1: usize, x: &mut [T]) {
        let width = p1 - p0;
        self.for_each_tap(p0, p1, |r, j, xi| x[xi] += col[r * width + j]);
    }
}

/// `out[n, a, oy, ox] = Σ_{b, ky, kx} K[a, b, ky, kx] · in[n, b, oy·s + ky − p, ox·s + kx − p]`.
fn correlate<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
) -> Tensor<T> {
    let (i, k) = (input.dims(), kernel.dims());
    let g = Geometry::new(i, k, out_h, out_w, stride, pad);
    let mut out = Tensor::zeros([i.n, k.n, out_h, out_w]);
    let (rows, ypix, step) = (g.rows(), g.ypix, g.chunk());
    let mut col = vec![T::zero(); if g.is_pointwise() { 0 } else { rows * step }];
    for n in 0..i.n {
        let x = input.item(n);
        let y = &mut out.data_mut()[n * k.n * ypix..(n + 1) * k.n * ypix];
        for p0 in (0..ypix).step_by(step) {
            let p1 = (p0 + step).min(ypix);
            let width = p1 - p0;
            let b: Strided<'_, T> = if g.is_pointwise() {
                (&x[p0..], ypix, 1)
            } else {
                g.im2col(x, p0, p1, &mut col[..rows * width]);
                (&col[..rows * width], width, 1)
            };
            T::gemm_acc(
                k.n,
                rows,
                width,
                (kernel.data(), rows, 1),
                b,
                (&mut y[p0..], ypix, 1),
            );
        }
    }
    out
}

/// Adjoint of [`correlate`]: `input` has `K.n` channels, the result `K.c`.
fn scatter<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
) -> Tensor<T> {
    let (i, k) = (input.dims(), kernel.dims());
    let xd = Dims::new(i.n, k.c, out_h, out_w);
    let g = Geometry::new(xd, k, i.h, i.w, stride, pad);
    let mut out = Tensor::zeros(xd);
    let (rows, ypix, step) = (g.rows(), g.ypix, g.chunk());
    let xlen = xd.c * xd.h * xd.w;
    let mut col = vec![T::zero(); if g.is_pointwise() { 0 } else { rows * step }];
    for n in 0..i.n {
        let y = input.item(n);
        let x = &mut out.data_mut()[n * xlen..(n + 1) * xlen];
        for p0 in (0..ypix).step_by(step) {
            let p1 = (p0 + step).min(ypix);
            let width = p1 - p0;
            let kt: Strided<'_, T> = (kernel.data(), 1, rows);
            if g.is_pointwise() {
                T::gemm_acc(
                    rows,
                    k.n,
                    width,
                    kt,
                    (&y[p0..], ypix, 1),
                    (&mut x[p0..], ypix, 1),
                );
            } else {
                let c = &mut col[..rows * width];
                c.fill(T::zero());
                T::gemm_acc(
                    rows,
                    k.n,
                    width,
                    kt,
                    (&y[p0..], ypix, 1),
                    (&mut *c, width, 1),
                );
                g.col2im(c, p0, p1, x);
            }
        }
    }
    out
}

/// `∂⟨correlate(x, K), y⟩ / ∂K` for a kernel of extent `kdims = (A, B, kH, kW)`,
/// with `x` carrying `B` channels and `y` carrying `A`.
fn kernel_grad<T: Scalar>(
    x: &Tensor<T>,
    y: &Tensor<T>,
    kdims: Dims,
    stride: usize,
    pad: usize,
) -> Tensor<T> {
    let (xd, yd) = (x.dims(), y.dims());
    let g = Geometry::new(xd, kdims, yd.h, yd.w, stride, pad);
    let mut grad = Tensor::zeros(kdims);
    let (rows, ypix, step) = (g.rows(), g.ypix, g.chunk());
    let mut col = vec![T::zero(); if g.is_pointwise() { 0 } else { rows * step }];
    for n in 0..xd.n {
        let (xi, yi) = (x.item(n), y.item(n));
        for p0 in (0..ypix).step_by(step) {
            let p1 = (p0 + step).min(ypix);
            let width = p1 - p0;
            let bt: Strided<'_, T> = if g.is_pointwise() {
                (&xi[p0..], 1, ypix)
            } else {
                g.im2col(xi, p0, p1, &mut col[..rows * width]);
                (&col[..rows * width], 1, width)
            };
            T::gemm_acc(
                kdims.n,
                width,
                rows,
                (&yi[p0..], ypix, 1),
                bt,
                (grad.data_mut(), rows, 1),
            );
        }
    }
    grad
}

fn add_bias<T: Scalar>(out: &mut Tensor<T>, bias: &[T]) {
    let d = out.dims();
    for n in 0..d.n {
        for (c, &b) in bias.iter().enumerate() {
            if b != T::zero() {
                for v in out.plane_mut(n, c) {
                    *v += b;
                }
            }
        }
    }
}

fn channel_sums<T: Scalar>(t: &Tensor<T>) -> Vec<T> {
    let d = t.dims();
    let mut sums = vec![T::zero(); d.c];
    for n in 0..d.n {
        for (c, s) in sums.iter_mut().enumerate() {
            *s += t.plane(n, c).iter().copied().sum::<T>();
        }
    }
    sums
}
