//! Forward and backward kernels for the fixed layer set of the network.
//!
//! All kernels are pure: identical inputs produce bit-identical outputs. Each
//! reduction is evaluated in a fixed order, so results do not depend on
//! scheduling.

mod activation;
mod concat;
mod conv;
mod pool;

pub use activation::{relu_backward, relu_forward, relu_inplace, softmax_channels};
pub use concat::{concat_channels, split_channels};
pub use conv::{
    conv2d_backward, conv2d_forward, conv2d_transpose_backward, conv2d_transpose_forward,
    conv_output_size, transpose_output_size, ConvGrads, ConvParams,
};
pub use pool::{maxpool2x2_backward, maxpool2x2_forward, PoolIndices};
