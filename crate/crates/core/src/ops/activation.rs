use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub fn relu_forward<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn relu_inplace<T: Scalar>(t: &mut Tensor<T>) {
    for v in t.data_mut() {
        if !(*v > T::zero()) {
            *v = T::zero();
        }
    }
}

/// Passes `grad_out` where the activation is strictly positive.
///
/// The subgradient at exactly 0 is 0. Because `relu(x) > 0` iff `x > 0`,
/// `input` may be either the pre-activation or the ReLU output.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.expect_dims("relu_backward", input.dims())?;
    let mut g = grad_out.clone();
    for (gv, &x) in g.data_mut().iter_mut().zip(input.data()) {
        if !(x > T::zero()) {
            *gv = T::zero();
        }
    }
    Ok(g)
}

/// Per-pixel softmax across the channel axis, with max subtraction.
pub fn softmax_channels<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let d = input.dims();
    if d.c < 2 {
        return Err(Error::invalid(
            "softmax_channels",
            "need at least two channels",
        ));
    }
    let plane = d.plane();
    let mut out = Tensor::zeros(d);
    let src = input.data();
    let dst = out.data_mut();
    for n in 0..d.n {
        let base = n * d.c * plane;
        for p in 0..plane {
            let mut max = T::neg_infinity();
            for c in 0..d.c {
                max = max.max(src[base + c * plane + p]);
            }
            let mut sum = T::zero();
            for c in 0..d.c {
                let e = (src[base + c * plane + p] - max).exp();
                dst[base + c * plane + p] = e;
                sum += e;
            }
            let inv = T::one() / sum;
            for c in 0..d.c {
                dst[base + c * plane + p] *= inv;
            }
        }
    }
    Ok(out)
}
