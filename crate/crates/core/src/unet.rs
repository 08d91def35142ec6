//! VGG16-style U-net: encoder stages of `conv3×3 + ReLU` repeated and a 2×2
//! max pool, a mirrored decoder of 2×2 stride-2 transposed convolutions,
//! skip concatenation and `conv3×3 + ReLU` repeats, and a 1×1 classifier.
//!
//! Parameters are addressed by stable names:
//!
//! | layer                 | kernel shape                  |
//! |-----------------------|-------------------------------|
//! | `enc{s}.conv{r}`      | `(C_s, C_in, 3, 3)`           |
//! | `dec{s}.up`           | `(C_prev, C_s, 2, 2)`         |
//! | `dec{s}.conv{r}`      | `(C_s, 2·C_s or C_s, 3, 3)`   |
//! | `head`                | `(num_classes, C_1, 1, 1)`    |
//!
//! with `.kernel` and `.bias` suffixes. Stages are numbered from 1 at full
//! resolution; `C_prev` is `C_S` for the deepest decoder stage and `C_{s+1}`
//! otherwise.
//!
//! The full-scale configuration ([`UNetConfig::full`], widths
//! 64/128/256/512/512) has 39,291,331 parameters; the five-stage desk
//! configuration ([`UNetConfig::desk`]) has 615,099 and the three-stage
//! 8/16/32 variant has 79,675.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::adam::{adam_step_slice, AdamBank, AdamConfig};
use crate::error::{Error, Result};
use crate::ops::{
    concat_channels, conv2d_backward, conv2d_forward, conv2d_transpose_backward,
    conv2d_transpose_forward, maxpool2x2_backward, maxpool2x2_forward, relu_backward, relu_inplace,
    split_channels, ConvParams, PoolIndices,
};
use crate::tensor::{Dims, Scalar, Tensor};
use crate::weights::{NamedTensor, WeightsError};

const VGG16_WIDTHS: [usize; 5] = [64, 128, 256, 512, 512];
const DESK_WIDTHS: [usize; 5] = [8, 16, 32, 64, 64];
const VGG16_REPEATS: [usize; 5] = [2, 2, 3, 3, 3];

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct UNetConfig {
    pub stages: usize,
    pub encoder_channels: Vec<usize>,
    pub conv_repeats: Vec<usize>,
    pub num_classes: usize,
    pub input_channels: usize,
}

impl UNetConfig {
    /// VGG16 widths, five stages, three classes, grayscale input.
    pub fn full() -> Self {
        UNetConfig {
            stages: 5,
            encoder_channels: VGG16_WIDTHS.to_vec(),
            conv_repeats: VGG16_REPEATS.to_vec(),
            num_classes: 3,
            input_channels: 1,
        }
    }

    /// Five-stage network with widths 8/16/32/64/64 for CPU training.
    pub fn desk() -> Self {
        Self::desk_stages(5)
    }

    /// The first `stages` stages of [`UNetConfig::desk`].
    pub fn desk_stages(stages: usize) -> Self {
        let s = stages.min(5);
        UNetConfig {
            stages,
            encoder_channels: DESK_WIDTHS[..s].to_vec(),
            conv_repeats: VGG16_REPEATS[..s].to_vec(),
            num_classes: 3,
            input_channels: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 || self.stages > 16 {
            return Err(Error::Config(format!(
                "stage count {} outside 1..=16",
                self.stages
            )));
        }
        if self.encoder_channels.len() != self.stages {
            return Err(Error::Config(format!(
                "{} encoder widths for {} stages",
                self.encoder_channels.len(),
                self.stages
            )));
        }
        if self.conv_repeats.len() != self.stages {
            return Err(Error::Config(format!(
                "{} conv repeat counts for {} stages",
                self.conv_repeats.len(),
                self.stages
            )));
        }
        if self.encoder_channels.contains(&0) || self.conv_repeats.contains(&0) {
            return Err(Error::Config(
                "widths and repeat counts must be positive".into(),
            ));
        }
        if self.num_classes < 2 || self.input_channels == 0 {
            return Err(Error::Config(
                "need at least two classes and one input channel".into(),
            ));
        }
        Ok(())
    }

    /// Spatial sizes must be divisible by this.
    pub fn multiple(&self) -> usize {
        1 << self.stages
    }

    pub fn check_input(&self, height: usize, width: usize) -> Result<()> {
        let m = self.multiple();
        if height == 0 || width == 0 || height % m != 0 || width % m != 0 {
            return Err(Error::Divisibility {
                height,
                width,
                multiple: m,
            });
        }
        Ok(())
    }

    /// Walks the stage arithmetic for an `height × width` input, checking that
    /// every decoder upsampling lands on its encoder skip and that concat
    /// widths feed the next convolution.
    pub fn shape_walk(&self, height: usize, width: usize) -> Result<Vec<StageShape>> {
        self.validate()?;
        self.check_input(height, width)?;
        let mut out = Vec::with_capacity(self.stages);
        let (mut h, mut w) = (height, width);
        for s in 0..self.stages {
            let c = self.encoder_channels[s];
            out.push(StageShape {
                stage: s + 1,
                encoder_output: Dims::new(1, c, h, w),
                decoder_input: Dims::new(1, 2 * c, h, w),
            });
            h /= 2;
            w /= 2;
        }
        let bottleneck = (h, w);
        // Decoder: transposed 2×2/stride-2 doubles, then concat with the skip.
        let (mut h, mut w) = bottleneck;
        for s in (0..self.stages).rev() {
            let uh = crate::ops::transpose_output_size(h, 2, 2, 0).unwrap_or(0);
            let uw = crate::ops::transpose_output_size(w, 2, 2, 0).unwrap_or(0);
            let skip = out[s].encoder_output;
            if (uh, uw) != (skip.h, skip.w) {
                return Err(Error::Config(format!(
                    "stage {}: upsampled {}x{} does not match skip {}x{}",
                    s + 1,
                    uh,
                    uw,
                    skip.h,
                    skip.w
                )));
            }
            h = uh;
            w = uw;
        }
        Ok(out)
    }

    /// Bottleneck spatial size for an `height × width` input.
    pub fn bottleneck(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        self.check_input(height, width)?;
        Ok((height >> self.stages, width >> self.stages))
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        let mut c_in = self.input_channels;
        for s in 0..self.stages {
            let c = self.encoder_channels[s];
            for r in 0..self.conv_repeats[s] {
                specs.push(LayerSpec {
                    name: format!("enc{}.conv{}", s + 1, r + 1),
                    kind: LayerKind::Conv,
                    role: Role::Encoder,
                    kernel: Dims::new(c, c_in, 3, 3),
                });
                c_in = c;
            }
        }
        for s in (0..self.stages).rev() {
            let c = self.encoder_channels[s];
            specs.push(LayerSpec {
                name: format!("dec{}.up", s + 1),
                kind: LayerKind::Up,
                role: Role::Decoder,
                kernel: Dims::new(c_in, c, 2, 2),
            });
            c_in = 2 * c;
            for r in 0..self.conv_repeats[s] {
                specs.push(LayerSpec {
                    name: format!("dec{}.conv{}", s + 1, r + 1),
                    kind: LayerKind::Conv,
                    role: Role::Decoder,
                    kernel: Dims::new(c, c_in, 3, 3),
                });
                c_in = c;
            }
        }
        specs.push(LayerSpec {
            name: "head".into(),
            kind: LayerKind::Head,
            role: Role::Head,
            kernel: Dims::new(self.num_classes, c_in, 1, 1),
        });
        specs
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_specs()
            .iter()
            .map(|l| l.kernel.len() + l.bias_len())
            .sum()
    }

    /// Recovers a configuration from stored tensor names and shapes.
    pub fn infer(tensors: &[NamedTensor]) -> core::result::Result<Self, WeightsError> {
        let find = |name: &str| tensors.iter().find(|t| t.name == name);
        let mut encoder_channels = Vec::new();
        let mut conv_repeats = Vec::new();
        let mut input_channels = 0;
        for s in 1.. {
            let mut r = 0;
            while let Some(t) = find(&format!("enc{s}.conv{}.kernel", r + 1)) {
                if t.shape.len() != 4 {
                    return Err(WeightsError::DimMismatch {
                        name: t.name.clone(),
                        expected: vec![0; 4],
                        found: t.shape.clone(),
                    });
                }
                if s == 1 && r == 0 {
                    input_channels = t.shape[1];
                }
                if r == 0 {
                    encoder_channels.push(t.shape[0]);
                }
                r += 1;
            }
            if r == 0 {
                break;
            }
            conv_repeats.push(r);
        }
        let head = find("head.kernel")
            .ok_or_else(|| WeightsError::MissingTensors(vec!["head.kernel".into()]))?;
        if encoder_channels.is_empty() {
            return Err(WeightsError::MissingTensors(vec![
                "enc1.conv1.kernel".into()
            ]));
        }
        Ok(UNetConfig {
            stages: encoder_channels.len(),
            encoder_channels,
            conv_repeats,
            num_classes: head.shape.first().copied().unwrap_or(0),
            input_channels,
        })
    }
}

/// Per-stage shapes from [`UNetConfig::shape_walk`], batch size 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageShape {
    pub stage: usize,
    pub encoder_output: Dims,
    /// After concatenating the skip with the upsampled decoder features.
    pub decoder_input: Dims,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// 3×3 same convolution followed by ReLU.
    Conv,
    /// 2×2 stride-2 transposed convolution, no activation.
    Up,
    /// 1×1 convolution to class logits, no activation.
    Head,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Encoder,
    Decoder,
    Head,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub role: Role,
    pub kernel: Dims,
}

impl LayerSpec {
    pub fn bias_len(&self) -> usize {
        match self.kind {
            LayerKind::Up => self.kernel.c,
            _ => self.kernel.n,
        }
    }

    fn he_std(&self) -> f64 {
        let k = self.kernel;
        let fan_in = match self.kind {
            // Each output pixel of a stride-2 2×2 transposed conv sees one tap per input channel.
            LayerKind::Up => k.n,
            _ => k.c * k.h * k.w,
        };
        num_traits::Float::sqrt(2.0 / fan_in as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub spec: LayerSpec,
    pub params: ConvParams<T>,
    pub frozen: bool,
}

/// Parameter gradients, aligned with [`UNetModel::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGrad<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<T> {
    pub kernel: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Gradients<T> {
    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.kernel.is_finite() && g.bias.iter().all(|b| b.is_finite()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

#[derive(Debug, Clone, Default)]
struct Cache<T> {
    /// Input of each layer, in layer order.
    inputs: Vec<Tensor<T>>,
    /// Post-activation output of each `Conv` layer (unused slots stay empty).
    outputs: Vec<Option<Tensor<T>>>,
    pools: Vec<PoolIndices>,
    logits_dims: Dims,
}

#[derive(Debug, Clone)]
pub struct UNetModel<T = f32> {
    config: UNetConfig,
    layers: Vec<Layer<T>>,
    /// Layer indices of each encoder stage, each decoder stage (deepest first),
    /// and the head.
    encoder: Vec<Vec<usize>>,
    decoder: Vec<(usize, Vec<usize>)>,
    head: usize,
    mode: Mode,
    cache: Option<Cache<T>>,
}

impl<T: Scalar> UNetModel<T> {
    /// He-normal kernels drawn from a ChaCha8 stream seeded with `seed`,
    /// zero biases.
    pub fn build(config: UNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        config.shape_walk(config.multiple(), config.multiple())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = config
            .layer_specs()
            .into_iter()
            .map(|spec| {
                let normal = Normal::new(0.0, spec.he_std()).expect("positive std");
                let k = spec.kernel;
                let data = (0..k.len())
                    .map(|_| T::from_f64(normal.sample(&mut rng)))
                    .collect();
                let kernel = Tensor::from_vec(k, data)?;
                let params = Self::make_params(&spec, kernel, vec![T::zero(); spec.bias_len()])?;
                Ok(Layer {
                    spec,
                    params,
                    frozen: false,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(config, layers))
    }

    fn make_params(spec: &LayerSpec, kernel: Tensor<T>, bias: Vec<T>) -> Result<ConvParams<T>> {
        match spec.kind {
            LayerKind::Conv => ConvParams::same(kernel, bias),
            LayerKind::Up => ConvParams::new_transpose(kernel, bias, 2, 0),
            LayerKind::Head => ConvParams::new(kernel, bias, 1, 0),
        }
    }

    fn assemble(config: UNetConfig, layers: Vec<Layer<T>>) -> Self {
        let mut next = 0;
        let mut encoder = Vec::new();
        for s in 0..config.stages {
            encoder.push((next..next + config.conv_repeats[s]).collect());
            next += config.conv_repeats[s];
        }
        let mut decoder = Vec::new();
        for s in (0..config.stages).rev() {
            let up = next;
            decoder.push((up, (up + 1..up + 1 + config.conv_repeats[s]).collect()));
            next += 1 + config.conv_repeats[s];
        }
        UNetModel {
            config,
            layers,
            encoder,
            decoder,
            head: next,
            mode: Mode::Inference,
            cache: None,
        }
    }

    pub fn config(&self) -> &UNetConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        if mode == Mode::Inference {
            self.cache = None;
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.params.kernel.len() + l.params.bias.len())
            .sum()
    }

    /// Parameter names in storage order (`<layer>.kernel`, `<layer>.bias`).
    pub fn parameter_names(&self) -> Vec<String> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    format!("{}.kernel", l.spec.name),
                    format!("{}.bias", l.spec.name),
                ]
            })
            .collect()
    }

    pub fn layer(&self, name: &str) -> Option<&Layer<T>> {
        self.layers.iter().find(|l| l.spec.name == name)
    }

    pub fn layer_mut(&mut self, name: &str) -> Option<&mut Layer<T>> {
        self.layers.iter_mut().find(|l| l.spec.name == name)
    }

    pub fn set_encoder_frozen(&mut self, frozen: bool) {
        for l in &mut self.layers {
            if l.spec.role == Role::Encoder {
                l.frozen = frozen;
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> UNetModel<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                spec: l.spec.clone(),
                params: ConvParams {
                    kernel: l.params.kernel.cast(),
                    bias: l
                        .params
                        .bias
                        .iter()
                        .map(|&b| U::from_f64(b.to_f64()))
                        .collect(),
                    stride: l.params.stride,
                    padding: l.params.padding,
                },
                frozen: l.frozen,
            })
            .collect();
        let mut m = UNetModel::assemble(self.config.clone(), layers);
        m.mode = self.mode;
        m
    }

    /// Forward pass. In [`Mode::Training`] the activations are cached for
    /// [`UNetModel::backward`]; in [`Mode::Inference`] nothing is retained.
    pub fn forward(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        match self.mode {
            Mode::Training => {
                let mut cache = Cache::default();
                let logits = self.run(input, Some(&mut cache))?;
                cache.logits_dims = logits.dims();
                self.cache = Some(cache);
                Ok(logits)
            }
            Mode::Inference => self.infer(input),
        }
    }

    /// Forward pass without caching; usable through a shared reference.
    pub fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.run(input, None)
    }

    fn run(&self, input: &Tensor<T>, mut cache: Option<&mut Cache<T>>) -> Result<Tensor<T>> {
        let d = input.dims();
        if d.c != self.config.input_channels {
            return Err(Error::shape(
                "UNetModel::forward",
                "channel",
                self.config.input_channels,
                d.c,
            ));
        }
        self.config.check_input(d.h, d.w)?;
        if let Some(c) = cache.as_deref_mut() {
            c.inputs = Vec::with_capacity(self.layers.len());
            c.outputs = Vec::with_capacity(self.layers.len());
        }

        let mut x = input.clone();
        let mut skips = Vec::with_capacity(self.config.stages);
        for stage in &self.encoder {
            for &li in stage {
                x = self.conv_relu(li, x, cache.as_deref_mut())?;
            }
            let (pooled, idx) = maxpool2x2_forward(&x)?;
            skips.push(x);
            if let Some(c) = cache.as_deref_mut() {
                c.pools.push(idx);
            }
            x = pooled;
        }
        for (k, (up, convs)) in self.decoder.iter().enumerate() {
            let s = self.config.stages - 1 - k;
            let u = conv2d_transpose_forward(&x, &self.layers[*up].params)?;
            if let Some(c) = cache.as_deref_mut() {
                c.inputs.push(x);
                c.outputs.push(None);
            }
            x = concat_channels(&skips[s], &u)?;
            for &li in convs {
                x = self.conv_relu(li, x, cache.as_deref_mut())?;
            }
        }
        let logits = conv2d_forward(&x, &self.layers[self.head].params)?;
        if let Some(c) = cache {
            c.inputs.push(x);
            c.outputs.push(None);
        }
        Ok(logits)
    }

    fn conv_relu(
        &self,
        li: usize,
        x: Tensor<T>,
        cache: Option<&mut Cache<T>>,
    ) -> Result<Tensor<T>> {
        let mut y = conv2d_forward(&x, &self.layers[li].params)?;
        relu_inplace(&mut y);
        if let Some(c) = cache {
            c.inputs.push(x);
            c.outputs.push(Some(y.clone()));
        }
        Ok(y)
    }

    /// Backpropagates `grad_logits` through the cached forward pass.
    ///
    /// Frozen layers report all-zero gradients. The cache is consumed.
    pub fn backward(&mut self, grad_logits: &Tensor<T>) -> Result<Gradients<T>> {
        let cache = self.cache.take().ok_or(Error::NoForwardCache)?;
        grad_logits.expect_dims("UNetModel::backward", cache.logits_dims)?;
        let mut grads: Vec<Option<LayerGrad<T>>> = vec![None; self.layers.len()];

        let head = &self.layers[self.head];
        let g = conv2d_backward(&cache.inputs[self.head], &head.params, grad_logits)?;
        grads[self.head] = Some(LayerGrad {
            kernel: g.kernel,
            bias: g.bias,
        });
        let mut gx = g.input;

        let mut skip_grads: Vec<Option<Tensor<T>>> = vec![None; self.config.stages];
        for (k, (up, convs)) in self.decoder.iter().enumerate().rev() {
            let s = self.config.stages - 1 - k;
            for &li in convs.iter().rev() {
                gx = self.conv_relu_backward(li, &cache, &gx, &mut grads)?;
            }
            let (g_skip, g_up) = split_channels(&gx, self.config.encoder_channels[s])?;
            skip_grads[s] = Some(g_skip);
            let g = conv2d_transpose_backward(&cache.inputs[*up], &self.layers[*up].params, &g_up)?;
            grads[*up] = Some(LayerGrad {
                kernel: g.kernel,
                bias: g.bias,
            });
            gx = g.input;
        }

        for (s, stage) in self.encoder.iter().enumerate().rev() {
            gx = maxpool2x2_backward(&cache.pools[s], &gx)?;
            gx.add_assign(skip_grads[s].as_ref().expect("decoder visited every stage"))?;
            for &li in stage.iter().rev() {
                gx = self.conv_relu_backward(li, &cache, &gx, &mut grads)?;
            }
        }

        let layers = grads
            .into_iter()
            .zip(&self.layers)
            .map(|(g, l)| {
                let g = g.expect("every layer visited");
                if l.frozen {
                    LayerGrad {
                        kernel: Tensor::zeros(g.kernel.dims()),
                        bias: vec![T::zero(); g.bias.len()],
                    }
                } else {
                    g
                }
            })
            .collect();
        Ok(Gradients { layers })
    }

    fn conv_relu_backward(
        &self,
        li: usize,
        cache: &Cache<T>,
        grad_out: &Tensor<T>,
        grads: &mut [Option<LayerGrad<T>>],
    ) -> Result<Tensor<T>> {
        let y = cache.outputs[li]
            .as_ref()
            .expect("conv layers cache their output");
        let g = relu_backward(y, grad_out)?;
        let g = conv2d_backward(&cache.inputs[li], &self.layers[li].params, &g)?;
        grads[li] = Some(LayerGrad {
            kernel: g.kernel,
            bias: g.bias,
        });
        Ok(g.input)
    }

    /// Fresh Adam moments for every parameter (kernel, bias per layer).
    pub fn adam(&self, config: AdamConfig) -> AdamBank<T> {
        AdamBank::new(
            self.layers.iter().flat_map(|l| {
                [
                    l.params.kernel.dims(),
                    Dims::new(1, 1, 1, l.params.bias.len()),
                ]
            }),
            config,
        )
    }

    /// Applies one Adam step to every trainable parameter. Frozen layers and
    /// their optimizer state are left untouched.
    pub fn apply_adam(&mut self, grads: &Gradients<T>, bank: &mut AdamBank<T>) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::shape(
                "apply_adam",
                "layer count",
                self.layers.len(),
                grads.layers.len(),
            ));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient"));
        }
        for (i, (layer, g)) in self.layers.iter_mut().zip(&grads.layers).enumerate() {
            if layer.frozen {
                continue;
            }
            adam_step_slice(
                layer.params.kernel.data_mut(),
                g.kernel.data(),
                bank.state_mut(2 * i),
            )?;
            adam_step_slice(&mut layer.params.bias, &g.bias, bank.state_mut(2 * i + 1))?;
        }
        Ok(())
    }
}

impl UNetModel<f32> {
    /// Parameters as named `f32` tensors, in storage order. Biases have rank 1.
    pub fn to_named_tensors(&self) -> Vec<NamedTensor> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &self.layers {
            out.push(NamedTensor {
                name: format!("{}.kernel", l.spec.name),
                shape: l.params.kernel.dims().as_array().to_vec(),
                data: l.params.kernel.data().to_vec(),
            });
            out.push(NamedTensor {
                name: format!("{}.bias", l.spec.name),
                shape: vec![l.params.bias.len()],
                data: l.params.bias.clone(),
            });
        }
        out
    }

    /// Builds a model for `config` from a complete set of named tensors.
    ///
    /// Unknown names, missing names and shape mismatches are distinct errors.
    pub fn from_named_tensors(config: UNetConfig, tensors: &[NamedTensor]) -> Result<Self> {
        config.validate()?;
        let specs = config.layer_specs();
        let expected: Vec<String> = specs
            .iter()
            .flat_map(|s| [format!("{}.kernel", s.name), format!("{}.bias", s.name)])
            .collect();
        if let Some(t) = tensors.iter().find(|t| !expected.contains(&t.name)) {
            return Err(WeightsError::UnknownTensor(t.name.clone()).into());
        }
        let missing: Vec<String> = expected
            .iter()
            .filter(|n| !tensors.iter().any(|t| &t.name == *n))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(WeightsError::MissingTensors(missing).into());
        }
        let layers = specs
            .into_iter()
            .map(|spec| {
                let (kernel, bias) = load_layer(&spec, tensors)?;
                let params = Self::make_params(&spec, kernel, bias)?;
                Ok(Layer {
                    spec,
                    params,
                    frozen: false,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(config, layers))
    }

    /// Replaces every encoder parameter with the matching named tensor.
    ///
    /// Tensors for other layers are ignored. A first-layer kernel stored with
    /// three input channels (RGB-pretrained) is averaged over its input
    /// channels when the model takes one. All absent encoder tensors are listed
    /// in the error, and the model is unchanged on error.
    pub fn import_encoder(&mut self, tensors: &[NamedTensor], freeze: bool) -> Result<()> {
        let encoder: Vec<usize> = (0..self.layers.len())
            .filter(|&i| self.layers[i].spec.role == Role::Encoder)
            .collect();
        let missing: Vec<String> = encoder
            .iter()
            .flat_map(|&i| {
                let n = &self.layers[i].spec.name;
                [format!("{n}.kernel"), format!("{n}.bias")]
            })
            .filter(|n| !tensors.iter().any(|t| &t.name == n))
            .collect();
        if !missing.is_empty() {
            return Err(WeightsError::MissingTensors(missing).into());
        }
        let loaded = encoder
            .iter()
            .map(|&i| {
                let spec = &self.layers[i].spec;
                let (kernel, bias) = load_layer_averaging(spec, tensors)?;
                Ok((i, kernel, bias))
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, kernel, bias) in loaded {
            let l = &mut self.layers[i];
            l.params.kernel = kernel;
            l.params.bias = bias;
            l.frozen = freeze;
        }
        Ok(())
    }
}

fn find<'a>(
    tensors: &'a [NamedTensor],
    name: &str,
) -> core::result::Result<&'a NamedTensor, WeightsError> {
    tensors
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| WeightsError::MissingTensors(vec![name.into()]))
}

fn load_layer(spec: &LayerSpec, tensors: &[NamedTensor]) -> Result<(Tensor<f32>, Vec<f32>)> {
    let kname = format!("{}.kernel", spec.name);
    let k = find(tensors, &kname)?;
    let expect = spec.kernel.as_array().to_vec();
    if k.shape != expect {
        return Err(WeightsError::DimMismatch {
            name: kname,
            expected: expect,
            found: k.shape.clone(),
        }
        .into());
    }
    let bias = load_bias(spec, tensors)?;
    Ok((Tensor::from_vec(spec.kernel, k.data.clone())?, bias))
}

fn load_bias(spec: &LayerSpec, tensors: &[NamedTensor]) -> Result<Vec<f32>> {
    let bname = format!("{}.bias", spec.name);
    let b = find(tensors, &bname)?;
    if b.shape != [spec.bias_len()] {
        return Err(WeightsError::DimMismatch {
            name: bname,
            expected: vec![spec.bias_len()],
            found: b.shape.clone(),
        }
        .into());
    }
    Ok(b.data.clone())
}

fn load_layer_averaging(
    spec: &LayerSpec,
    tensors: &[NamedTensor],
) -> Result<(Tensor<f32>, Vec<f32>)> {
    let kname = format!("{}.kernel", spec.name);
    let k = find(tensors, &kname)?;
    let want = spec.kernel;
    if want.c == 1 && k.shape == [want.n, 3, want.h, want.w] {
        let src = Tensor::from_vec([want.n, 3, want.h, want.w], k.data.clone())?;
        let kernel = Tensor::from_fn(want, |o, _, y, x| {
            (src.at(o, 0, y, x) + src.at(o, 1, y, x) + src.at(o, 2, y, x)) / 3.0
        });
        return Ok((kernel, load_bias(spec, tensors)?));
    }
    load_layer(spec, tensors)
}
