//! Numerical core for pixel-wise fracture-mode segmentation of SEM
//! micrographs.
//!
//! Everything in this crate is pure computation over in-memory buffers and
//! builds without `std` (an allocator is required). File formats, PNG
//! decoding, JSON and the command-line driver live in the `fractoseg` crate.
//!
//! Module map:
//!
//! * [`tensor`] and [`ops`]: rank-4 `(N, C, H, W)` tensors and the forward and
//!   backward kernels of every layer the network uses.
//! * [`loss`] and [`adam`]: categorical cross-entropy, pixel accuracy and the
//!   Adam optimizer.
//! * [`unet`] and [`weights`]: the VGG16-style U-net and its FSEG weight
//!   container.
//! * [`mask`], [`raster`], [`tiling`], [`sampler`]: class masks, polygon
//!   rasterization, tiling and seeded batch sampling.
//! * [`train`]: the training loop over any [`train::TileSource`].
//! * [`metrics`] and [`quantify`]: confusion counts, IoU and F-beta, argmax
//!   classification, overlays and area fractions.
//! * [`synth`]: seeded generator of synthetic fracture-like tiles.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod adam;
pub mod error;
pub mod image;
pub mod loss;
pub mod mask;
pub mod metrics;
pub mod ops;
pub mod quantify;
pub mod raster;
pub mod sampler;
pub mod synth;
pub mod tensor;
pub mod tiling;
pub mod train;
pub mod unet;
pub mod weights;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};
