//! Adam with bias correction.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{Dims, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    /// Fine-tuning defaults: learning rate 1e-6, β₁ 0.9, β₂ 0.999, ε 1e-8.
    fn default() -> Self {
        AdamConfig {
            lr: 1e-6,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f32> {
    pub config: AdamConfig,
    step: u64,
    first: Tensor<T>,
    second: Tensor<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(dims: Dims, config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            first: Tensor::zeros(dims),
            second: Tensor::zeros(dims),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &Tensor<T> {
        &self.first
    }

    pub fn second_moment(&self) -> &Tensor<T> {
        &self.second
    }
}

/// One Adam update of `param` in place.
///
/// `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`, `θ ← θ − lr·m̂ / (√v̂ + ε)` with
/// `m̂ = m / (1−β₁ᵗ)` and `v̂ = v / (1−β₂ᵗ)`.
pub fn adam_step<T: Scalar>(
    param: &mut Tensor<T>,
    grad: &Tensor<T>,
    state: &mut AdamState<T>,
) -> Result<()> {
    const OP: &str = "adam_step";
    grad.expect_dims(OP, param.dims())?;
    state.first.expect_dims(OP, param.dims())?;
    adam_step_slice(param.data_mut(), grad.data(), state)
}

/// [`adam_step`] over flat buffers, for parameters that are not tensors (biases).
pub fn adam_step_slice<T: Scalar>(
    param: &mut [T],
    grad: &[T],
    state: &mut AdamState<T>,
) -> Result<()> {
    const OP: &str = "adam_step";
    if grad.len() != param.len() {
        return Err(Error::shape(OP, "gradient length", param.len(), grad.len()));
    }
    if state.first.len() != param.len() {
        return Err(Error::shape(
            OP,
            "moment length",
            param.len(),
            state.first.len(),
        ));
    }
    state.step += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - num_traits::Float::powi(beta1, t);
    let c2 = 1.0 - num_traits::Float::powi(beta2, t);
    let m = state.first.data_mut();
    let v = state.second.data_mut();
    for (((p, &g), m), v) in param.iter_mut().zip(grad).zip(m).zip(v) {
        let g = g.to_f64();
        let mi = beta1 * m.to_f64() + (1.0 - beta1) * g;
        let vi = beta2 * v.to_f64() + (1.0 - beta2) * g * g;
        *m = T::from_f64(mi);
        *v = T::from_f64(vi);
        let update = lr * (mi / c1) / (num_traits::Float::sqrt(vi / c2) + epsilon);
        *p = T::from_f64(p.to_f64() - update);
    }
    Ok(())
}

/// [`adam_step`] that first rejects a non-finite gradient, leaving state untouched.
pub fn adam_step_checked<T: Scalar>(
    param: &mut Tensor<T>,
    grad: &Tensor<T>,
    state: &mut AdamState<T>,
) -> Result<()> {
    if !grad.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    adam_step(param, grad, state)
}

/// One [`AdamState`] per parameter of a model, in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamBank<T = f32> {
    pub config: AdamConfig,
    states: Vec<AdamState<T>>,
}

impl<T: Scalar> AdamBank<T> {
    pub fn new(dims: impl IntoIterator<Item = Dims>, config: AdamConfig) -> Self {
        AdamBank {
            config,
            states: dims
                .into_iter()
                .map(|d| AdamState::new(d, config))
                .collect(),
        }
    }

    pub fn states(&self) -> &[AdamState<T>] {
        &self.states
    }

    pub fn state_mut(&mut self, index: usize) -> &mut AdamState<T> {
        &mut self.states[index]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_gradient_leaves_param_unchanged() {
        let mut p = Tensor::<f32>::from_fn([1, 1, 2, 2], |_, _, y, x| (y * 2 + x) as f32);
        let before = p.clone();
        let mut s = AdamState::new(p.dims(), AdamConfig::default());
        let g = Tensor::zeros(p.dims());
        adam_step(&mut p, &g, &mut s).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = Tensor::<f64>::zeros([1, 1, 1, 1]);
        let mut s = AdamState::new(p.dims(), AdamConfig::default());
        adam_step(&mut p, &Tensor::filled([1, 1, 1, 1], 0.1), &mut s).unwrap();
        // -lr * 0.1 / (0.1 + 1e-8)
        let expected = -1e-6 * 0.1 / (0.1 + 1e-8);
        assert!((p.data()[0] - expected).abs() < 1e-20);
        assert!((p.data()[0] + 1e-6).abs() < 1e-12);
    }

    #[test]
    fn deterministic_over_ten_steps() {
        let run = || {
            let mut p = Tensor::<f32>::from_fn([1, 2, 3, 3], |_, c, y, x| (c + y * x) as f32 * 0.1);
            let mut s = AdamState::new(
                p.dims(),
                AdamConfig {
                    lr: 1e-2,
                    ..AdamConfig::default()
                },
            );
            for k in 0..10 {
                let g = Tensor::from_fn(p.dims(), |_, c, y, x| {
                    ((k + c + y + 2 * x) % 5) as f32 - 2.0
                });
                adam_step(&mut p, &g, &mut s).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        assert!(a
            .data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn checked_mode_rejects_non_finite() {
        let mut p = Tensor::<f32>::zeros([1, 1, 1, 2]);
        let mut s = AdamState::new(p.dims(), AdamConfig::default());
        let g = Tensor::from_vec([1, 1, 1, 2], vec![1.0, f32::INFINITY]).unwrap();
        assert_eq!(
            adam_step_checked(&mut p, &g, &mut s),
            Err(Error::NonFinite("gradient"))
        );
        assert_eq!(s.step(), 0);
    }

    #[test]
    fn dims_mismatch_rejected() {
        let mut p = Tensor::<f32>::zeros([1, 1, 1, 2]);
        let mut s = AdamState::new(p.dims(), AdamConfig::default());
        assert!(adam_step(&mut p, &Tensor::zeros([1, 1, 2, 1]), &mut s).is_err());
    }
}
