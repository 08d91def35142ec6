//! Seeded batch sampling over a tile set.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{images_to_tensor, GrayImage};
use crate::mask::{ClassMask, VOID};
use crate::tensor::{Scalar, Tensor};

/// How unannotated (`VOID`) pixels enter the training loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoidPolicy {
    /// Train them as background.
    #[default]
    Background,
    /// Exclude them from the loss.
    Ignore,
}

impl VoidPolicy {
    /// Target id the loss should ignore under this policy.
    pub fn ignore_id(self) -> Option<u8> {
        match self {
            VoidPolicy::Background => None,
            VoidPolicy::Ignore => Some(VOID),
        }
    }
}

/// Draws batches of indices from `0..len` by walking a seeded permutation,
/// reshuffling whenever it is exhausted. A batch may straddle two
/// permutations. The index sequence depends only on `(len, batch_size, seed)`.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    batch_size: usize,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    passes: u64,
}

impl BatchSampler {
    pub fn new(len: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("BatchSampler::new", "empty split"));
        }
        if batch_size == 0 {
            return Err(Error::invalid(
                "BatchSampler::new",
                "batch size must be positive",
            ));
        }
        let mut s = BatchSampler {
            batch_size,
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: (0..len).collect(),
            cursor: 0,
            passes: 0,
        };
        s.reshuffle();
        Ok(s)
    }

    fn reshuffle(&mut self) {
        self.order.sort_unstable();
        self.order.shuffle(&mut self.rng);
        self.cursor = 0;
        self.passes += 1;
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        let mut batch = Vec::with_capacity(self.batch_size);
        while batch.len() < self.batch_size {
            if self.cursor == self.order.len() {
                self.reshuffle();
            }
            batch.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        batch
    }

    /// Number of permutations drawn so far.
    pub fn passes(&self) -> u64 {
        self.passes
    }
}

/// Stacks tiles into network input `(N, 1, H, W)` in `[0, 1]` and loss targets.
///
/// `VOID` pixels become background under [`VoidPolicy::Background`] and stay
/// `VOID` (to be ignored by the loss) under [`VoidPolicy::Ignore`].
pub fn assemble_batch<T: Scalar>(
    tiles: &[(&GrayImage, &ClassMask)],
    policy: VoidPolicy,
) -> Result<(Tensor<T>, Vec<u8>)> {
    let images: Vec<&GrayImage> = tiles.iter().map(|t| t.0).collect();
    let input = images_to_tensor(&images)?;
    let mut targets = Vec::with_capacity(input.len());
    for (img, mask) in tiles {
        if (mask.height, mask.width) != (img.height, img.width) {
            return Err(Error::shape(
                "assemble_batch",
                "mask size",
                img.height * img.width,
                mask.len(),
            ));
        }
        targets.extend(mask.training_targets(policy == VoidPolicy::Ignore));
    }
    Ok((input, targets))
}
