//! Mini-batch training with Adam and periodic validation.

use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::adam::{AdamBank, AdamConfig};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::loss::{cross_entropy_loss, pixel_accuracy, LossBatch};
use crate::mask::ClassMask;
use crate::sampler::{assemble_batch, BatchSampler, VoidPolicy};
use crate::tensor::Tensor;
use crate::unet::{Mode, UNetModel};

/// Random access to `(image, mask)` tiles of one split.
pub trait TileSource {
    fn len(&self) -> usize;

    fn tile(&self, index: usize) -> Result<(GrayImage, ClassMask)>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl TileSource for [(GrayImage, ClassMask)] {
    fn len(&self) -> usize {
        <[_]>::len(self)
    }

    fn tile(&self, index: usize) -> Result<(GrayImage, ClassMask)> {
        self.get(index).cloned().ok_or_else(|| {
            Error::invalid(
                "TileSource::tile",
                alloc::format!("index {index} out of range"),
            )
        })
    }
}

impl TileSource for Vec<(GrayImage, ClassMask)> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn tile(&self, index: usize) -> Result<(GrayImage, ClassMask)> {
        self.as_slice().tile(index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub iters_per_epoch: usize,
    pub val_iters: usize,
    pub seed: u64,
    pub void_policy: VoidPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            batch_size: 4,
            epochs: 40,
            iters_per_epoch: 200,
            val_iters: 100,
            seed: 0,
            void_policy: VoidPolicy::Background,
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub loss: f64,
    /// Accuracy of the logits the step was computed from, before the update.
    pub accuracy: f64,
}

/// Forward, loss, backward and one Adam update on a prepared batch.
/// `step` only labels the error if the loss is not finite.
pub fn train_step(
    model: &mut UNetModel<f32>,
    bank: &mut AdamBank<f32>,
    input: &Tensor<f32>,
    targets: &[u8],
    ignore: Option<u8>,
    step: u64,
) -> Result<StepOutput> {
    model.set_mode(Mode::Training);
    let logits = model.forward(input)?;
    let batch = LossBatch {
        logits: &logits,
        targets,
        ignore,
    };
    let out = cross_entropy_loss(batch)?;
    if !out.loss.is_finite() {
        return Err(Error::Diverged { step });
    }
    let accuracy = pixel_accuracy(batch)?;
    let grads = model.backward(&out.grad_logits)?;
    model.apply_adam(&grads, bank).map_err(|e| match e {
        Error::NonFinite(_) => Error::Diverged { step },
        other => other,
    })?;
    Ok(StepOutput {
        loss: out.loss,
        accuracy,
    })
}

fn load_batch(
    source: &dyn TileSource,
    indices: &[usize],
    policy: VoidPolicy,
) -> Result<(Tensor<f32>, Vec<u8>)> {
    let tiles = indices
        .iter()
        .map(|&i| source.tile(i))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<(&GrayImage, &ClassMask)> = tiles.iter().map(|(g, m)| (g, m)).collect();
    assemble_batch(&refs, policy)
}

/// Drives epochs of `iters_per_epoch` steps followed by `val_iters`
/// validation batches. Batch order depends only on the seed and split sizes.
pub struct Trainer {
    model: UNetModel<f32>,
    bank: AdamBank<f32>,
    config: TrainConfig,
    train_sampler: BatchSampler,
    val_sampler: Option<BatchSampler>,
    epoch: usize,
    step: u64,
}

impl Trainer {
    pub fn new(
        model: UNetModel<f32>,
        config: TrainConfig,
        train_len: usize,
        val_len: usize,
    ) -> Result<Self> {
        if config.iters_per_epoch == 0 {
            return Err(Error::Config(
                "iterations per epoch must be positive".into(),
            ));
        }
        let train_sampler =
            BatchSampler::new(train_len, config.batch_size, config.seed.wrapping_add(1))?;
        let val_sampler = if val_len > 0 && config.val_iters > 0 {
            Some(BatchSampler::new(
                val_len,
                config.batch_size,
                config.seed.wrapping_add(2),
            )?)
        } else {
            None
        };
        Ok(Trainer {
            bank: model.adam(config.adam),
            model,
            config,
            train_sampler,
            val_sampler,
            epoch: 0,
            step: 0,
        })
    }

    pub fn model(&self) -> &UNetModel<f32> {
        &self.model
    }

    pub fn into_model(self) -> UNetModel<f32> {
        self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Optimizer steps taken so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn run_epoch(
        &mut self,
        train: &dyn TileSource,
        val: Option<&dyn TileSource>,
    ) -> Result<EpochLog> {
        let policy = self.config.void_policy;
        let (mut loss, mut acc) = (0.0, 0.0);
        for _ in 0..self.config.iters_per_epoch {
            let idx = self.train_sampler.next_batch();
            let (input, targets) = load_batch(train, &idx, policy)?;
            self.step += 1;
            let out = train_step(
                &mut self.model,
                &mut self.bank,
                &input,
                &targets,
                policy.ignore_id(),
                self.step,
            )?;
            loss += out.loss;
            acc += out.accuracy;
        }
        let n = self.config.iters_per_epoch as f64;
        self.epoch += 1;
        let (val_loss, val_accuracy) = match (val, self.val_sampler.as_mut()) {
            (Some(v), Some(s)) => {
                let (l, a) = validate(&self.model, v, s, self.config.val_iters, policy)?;
                (Some(l), Some(a))
            }
            _ => (None, None),
        };
        Ok(EpochLog {
            epoch: self.epoch,
            train_loss: loss / n,
            train_accuracy: acc / n,
            val_loss,
            val_accuracy,
        })
    }

    /// Runs every configured epoch, handing each log line and the current
    /// model to `on_epoch`.
    pub fn run(
        &mut self,
        train: &dyn TileSource,
        val: Option<&dyn TileSource>,
        mut on_epoch: impl FnMut(&EpochLog, &UNetModel<f32>) -> Result<()>,
    ) -> Result<Vec<EpochLog>> {
        let mut logs = Vec::with_capacity(self.config.epochs);
        for _ in 0..self.config.epochs {
            let log = self.run_epoch(train, val)?;
            on_epoch(&log, &self.model)?;
            logs.push(log);
        }
        Ok(logs)
    }
}

/// Mean loss and accuracy over `iters` sampled batches, without updates.
pub fn validate(
    model: &UNetModel<f32>,
    source: &dyn TileSource,
    sampler: &mut BatchSampler,
    iters: usize,
    policy: VoidPolicy,
) -> Result<(f64, f64)> {
    let (mut loss, mut acc) = (0.0, 0.0);
    for _ in 0..iters {
        let idx = sampler.next_batch();
        let (input, targets) = load_batch(source, &idx, policy)?;
        let logits = model.infer(&input)?;
        let batch = LossBatch {
            logits: &logits,
            targets: &targets,
            ignore: policy.ignore_id(),
        };
        loss += cross_entropy_loss(batch)?.loss;
        acc += pixel_accuracy(batch)?;
    }
    let n = iters.max(1) as f64;
    Ok((loss / n, acc / n))
}

/// Keeps the model with the lowest validation loss seen so far.
#[derive(Default)]
pub struct BestTracker {
    best: Option<(f64, usize, Box<UNetModel<f32>>)>,
}

impl BestTracker {
    /// Returns true when `log` improves on every earlier epoch.
    pub fn observe(&mut self, log: &EpochLog, model: &UNetModel<f32>) -> bool {
        let Some(v) = log.val_loss else { return false };
        let better = self.best.as_ref().is_none_or(|(b, _, _)| v < *b);
        if better {
            self.best = Some((v, log.epoch, Box::new(model.clone())));
        }
        better
    }

    pub fn best(&self) -> Option<(usize, &UNetModel<f32>)> {
        self.best.as_ref().map(|(_, e, m)| (*e, &**m))
    }
}
