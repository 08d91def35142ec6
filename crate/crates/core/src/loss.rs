//! Categorical cross-entropy over per-pixel logits, and pixel accuracy.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Logits `(N, K, H, W)` with one target class id per pixel, `N·H·W` ids in
/// `(n, y, x)` order.
#[derive(Debug, Clone, Copy)]
pub struct LossBatch<'a, T> {
    pub logits: &'a Tensor<T>,
    pub targets: &'a [u8],
    /// Target id excluded from both loss and accuracy. `None` counts every pixel.
    pub ignore: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<T> {
    /// Mean of `−log softmax(logits)[target]` over counted pixels.
    pub loss: f64,
    pub grad_logits: Tensor<T>,
    pub counted_pixels: usize,
}

impl<'a, T: Scalar> LossBatch<'a, T> {
    pub fn new(logits: &'a Tensor<T>, targets: &'a [u8]) -> Self {
        LossBatch {
            logits,
            targets,
            ignore: None,
        }
    }

    pub fn ignoring(mut self, id: u8) -> Self {
        self.ignore = Some(id);
        self
    }

    fn validate(&self, op: &'static str) -> Result<()> {
        let d = self.logits.dims();
        let expected = d.n * d.h * d.w;
        if self.targets.len() != expected {
            return Err(Error::shape(
                op,
                "target length",
                expected,
                self.targets.len(),
            ));
        }
        if let Some(&id) = self
            .targets
            .iter()
            .find(|&&t| Some(t) != self.ignore && t as usize >= d.c)
        {
            return Err(Error::TargetOutOfRange { id, classes: d.c });
        }
        Ok(())
    }

    #[inline]
    fn counts(&self, t: u8) -> bool {
        Some(t) != self.ignore
    }
}

/// Mean categorical cross-entropy and its gradient `(softmax − onehot) / count`.
///
/// Ignored pixels receive zero gradient. If every pixel is ignored the loss is
/// 0.
pub fn cross_entropy_loss<T: Scalar>(batch: LossBatch<'_, T>) -> Result<LossOutput<T>> {
    batch.validate("cross_entropy_loss")?;
    batch.logits.check_finite("logits")?;
    let d = batch.logits.dims();
    let plane = d.plane();
    let counted = batch.targets.iter().filter(|&&t| batch.counts(t)).count();
    let mut grad = Tensor::zeros(d);
    if counted == 0 {
        return Ok(LossOutput {
            loss: 0.0,
            grad_logits: grad,
            counted_pixels: 0,
        });
    }
    let inv = T::from_f64(1.0 / counted as f64);
    let src = batch.logits.data();
    let dst = grad.data_mut();
    let mut total = 0.0f64;
    for n in 0..d.n {
        let base = n * d.c * plane;
        for p in 0..plane {
            let t = batch.targets[n * plane + p];
            if !batch.counts(t) {
                continue;
            }
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
            let lse = max + sum.ln();
            total += (lse - src[base + t as usize * plane + p]).to_f64();
            let scale = inv / sum;
            for c in 0..d.c {
                dst[base + c * plane + p] *= scale;
            }
            dst[base + t as usize * plane + p] -= inv;
        }
    }
    Ok(LossOutput {
        loss: total / counted as f64,
        grad_logits: grad,
        counted_pixels: counted,
    })
}

/// Fraction of counted pixels whose argmax channel equals the target.
///
/// Argmax ties resolve to the lowest channel. Returns 0 when no pixel counts.
pub fn pixel_accuracy<T: Scalar>(batch: LossBatch<'_, T>) -> Result<f64> {
    batch.validate("pixel_accuracy")?;
    let d = batch.logits.dims();
    let plane = d.plane();
    let src = batch.logits.data();
    let (mut hit, mut counted) = (0usize, 0usize);
    for n in 0..d.n {
        let base = n * d.c * plane;
        for p in 0..plane {
            let t = batch.targets[n * plane + p];
            if !batch.counts(t) {
                continue;
            }
            counted += 1;
            let mut best = 0;
            for c in 1..d.c {
                if src[base + c * plane + p] > src[base + best * plane + p] {
                    best = c;
                }
            }
            if best == t as usize {
                hit += 1;
            }
        }
    }
    Ok(if counted == 0 {
        0.0
    } else {
        hit as f64 / counted as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn logits_for(classes: &[usize], k: usize, hi: f64, lo: f64) -> Tensor<f64> {
        Tensor::from_fn([1, k, 1, classes.len()], |_, c, _, x| {
            if classes[x] == c {
                hi
            } else {
                lo
            }
        })
    }

    #[test]
    fn perfect_prediction_has_near_zero_loss() {
        let targets = [0u8, 1, 2, 1];
        let logits = logits_for(&[0, 1, 2, 1], 3, 30.0, -30.0);
        let out = cross_entropy_loss(LossBatch::new(&logits, &targets)).unwrap();
        assert!(out.loss < 1e-9 && out.loss >= 0.0);
        assert_eq!(
            pixel_accuracy(LossBatch::new(&logits, &targets)).unwrap(),
            1.0
        );
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Tensor::<f64>::zeros([2, 3, 2, 2]);
        let targets = [0u8, 1, 2, 0, 1, 1, 2, 2];
        let out = cross_entropy_loss(LossBatch::new(&logits, &targets)).unwrap();
        assert!((out.loss - 3.0f64.ln()).abs() < 1e-12);
        assert!((out.loss - 1.0986).abs() < 1e-4);
    }

    #[test]
    fn accuracy_counts_all_pixels() {
        let logits = logits_for(&[1, 2, 2, 2], 3, 1.0, 0.0);
        assert_eq!(
            pixel_accuracy(LossBatch::new(&logits, &[1, 1, 2, 0])).unwrap(),
            0.5
        );
        let bg = logits_for(&[0, 0], 3, 1.0, 0.0);
        assert_eq!(pixel_accuracy(LossBatch::new(&bg, &[1, 1])).unwrap(), 0.0);
    }

    #[test]
    fn target_out_of_range_rejected() {
        let logits = Tensor::<f32>::zeros([1, 3, 1, 2]);
        assert_eq!(
            cross_entropy_loss(LossBatch::new(&logits, &[0, 3])).unwrap_err(),
            Error::TargetOutOfRange { id: 3, classes: 3 }
        );
        // 255 is fine once ignored.
        let out = cross_entropy_loss(LossBatch::new(&logits, &[0, 255]).ignoring(255)).unwrap();
        assert_eq!(out.counted_pixels, 1);
        assert!(out
            .grad_logits
            .data()
            .iter()
            .skip(1)
            .step_by(2)
            .all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_sums_to_zero_per_pixel() {
        let logits = Tensor::<f64>::from_fn([2, 3, 3, 3], |n, c, y, x| {
            ((n * 7 + c * 5 + y * 3 + x) % 11) as f64 - 5.0
        });
        let targets: Vec<u8> = (0..18).map(|i| (i % 3) as u8).collect();
        let out = cross_entropy_loss(LossBatch::new(&logits, &targets)).unwrap();
        let g = &out.grad_logits;
        for n in 0..2 {
            for y in 0..3 {
                for x in 0..3 {
                    let s: f64 = (0..3).map(|c| g.at(n, c, y, x)).sum();
                    assert!(s.abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn all_ignored_is_zero() {
        let logits = Tensor::<f32>::filled([1, 3, 1, 2], 1.0);
        let out = cross_entropy_loss(LossBatch::new(&logits, &[255, 255]).ignoring(255)).unwrap();
        assert_eq!(out.loss, 0.0);
        assert_eq!(out.counted_pixels, 0);
    }
}
