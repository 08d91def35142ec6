use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{check_dims, Dims, Scalar, Tensor};

/// Argmax positions recorded by [`maxpool2x2_forward`].
///
/// Each entry is the position inside its 2×2 window in row-major scan order
/// (0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices {
    input_dims: Dims,
    argmax: Vec<u8>,
}

impl PoolIndices {
    pub fn input_dims(&self) -> Dims {
        self.input_dims
    }

    pub fn output_dims(&self) -> Dims {
        let d = self.input_dims;
        Dims::new(d.n, d.c, d.h / 2, d.w / 2)
    }

    pub fn positions(&self) -> &[u8] {
        &self.argmax
    }
}

/// 2×2 max pooling with stride 2.
///
/// On ties the first maximum in scan order wins and is the only position that
/// receives gradient in [`maxpool2x2_backward`].
pub fn maxpool2x2_forward<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices)> {
    const OP: &str = "maxpool2x2_forward";
    let d = input.dims();
    if d.h % 2 != 0 {
        return Err(Error::invalid(OP, alloc::format!("height {} is odd", d.h)));
    }
    if d.w % 2 != 0 {
        return Err(Error::invalid(OP, alloc::format!("width {} is odd", d.w)));
    }
    let (oh, ow) = (d.h / 2, d.w / 2);
    let mut out = Tensor::zeros([d.n, d.c, oh, ow]);
    let mut argmax = Vec::with_capacity(d.n * d.c * oh * ow);
    for n in 0..d.n {
        for c in 0..d.c {
            let src = input.plane(n, c);
            let dst = out.plane_mut(n, c);
            for oy in 0..oh {
                let r0 = &src[2 * oy * d.w..(2 * oy + 1) * d.w];
                let r1 = &src[(2 * oy + 1) * d.w..(2 * oy + 2) * d.w];
                for ox in 0..ow {
                    let window = [r0[2 * ox], r0[2 * ox + 1], r1[2 * ox], r1[2 * ox + 1]];
                    let mut best = 0u8;
                    for k in 1..4u8 {
                        if window[k as usize] > window[best as usize] {
                            best = k;
                        }
                    }
                    dst[oy * ow + ox] = window[best as usize];
                    argmax.push(best);
                }
            }
        }
    }
    Ok((
        out,
        PoolIndices {
            input_dims: d,
            argmax,
        },
    ))
}

pub fn maxpool2x2_backward<T: Scalar>(
    indices: &PoolIndices,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    check_dims(
        "maxpool2x2_backward",
        indices.output_dims(),
        grad_out.dims(),
    )?;
    let d = indices.input_dims;
    let (oh, ow) = (d.h / 2, d.w / 2);
    let mut grad = Tensor::zeros(d);
    let mut it = indices.argmax.iter();
    for n in 0..d.n {
        for c in 0..d.c {
            let g = grad_out.plane(n, c);
            let dst = grad.plane_mut(n, c);
            for oy in 0..oh {
                for ox in 0..ow {
                    let k = *it.next().expect("index count matches output dims") as usize;
                    dst[(2 * oy + k / 2) * d.w + 2 * ox + k % 2] = g[oy * ow + ox];
                }
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn window_max_and_gradient_route() {
        let x = Tensor::from_vec([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, idx) = maxpool2x2_forward(&x).unwrap();
        assert_eq!(y.data(), &[4.0]);
        let g = maxpool2x2_backward(&idx, &Tensor::filled([1, 1, 1, 1], 1.0)).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 0.0, 1.0]);
    }

    /// Every 2×2 window over {0, 1, 2}: the routed position must be the first
    /// maximum in scan order, checked by brute force.
    #[test]
    fn tie_break_is_first_in_scan_order_exhaustive() {
        for code in 0..81u32 {
            let mut w = [0.0f64; 4];
            let mut c = code;
            for v in &mut w {
                *v = (c % 3) as f64;
                c /= 3;
            }
            let max = w.iter().cloned().fold(f64::MIN, f64::max);
            let first = w.iter().position(|&v| v == max).unwrap();
            let x = Tensor::from_vec([1, 1, 2, 2], w.to_vec()).unwrap();
            let (_, idx) = maxpool2x2_forward(&x).unwrap();
            let g = maxpool2x2_backward(&idx, &Tensor::filled([1, 1, 1, 1], 1.0)).unwrap();
            let expect: Vec<f64> = (0..4).map(|k| if k == first { 1.0 } else { 0.0 }).collect();
            assert_eq!(g.data(), &expect[..], "window {w:?}");
        }
    }

    #[test]
    fn halves_spatial_dims_and_five_pools_reach_bottleneck() {
        let x = Tensor::<f32>::zeros([1, 2, 640, 640]);
        let (mut y, _) = maxpool2x2_forward(&x).unwrap();
        assert_eq!(y.dims(), Dims::new(1, 2, 320, 320));
        for _ in 0..4 {
            y = maxpool2x2_forward(&y).unwrap().0;
        }
        assert_eq!((y.dims().h, y.dims().w), (20, 20));
    }

    #[test]
    fn rejects_odd_and_stale_indices() {
        assert!(maxpool2x2_forward(&Tensor::<f32>::zeros([1, 1, 3, 4])).is_err());
        assert!(maxpool2x2_forward(&Tensor::<f32>::zeros([1, 1, 4, 5])).is_err());
        let (_, idx) = maxpool2x2_forward(&Tensor::<f32>::zeros([1, 1, 4, 4])).unwrap();
        assert!(maxpool2x2_backward(&idx, &Tensor::<f32>::zeros([1, 1, 3, 2])).is_err());
        let zero = maxpool2x2_backward(&idx, &Tensor::<f32>::zeros([1, 1, 2, 2])).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));
    }
}
