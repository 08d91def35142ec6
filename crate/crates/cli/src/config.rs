//! Run configuration: TOML file, then command-line overrides.
//!
//! ```toml
//! seed = 0
//! deterministic = true
//!
//! [model]
//! preset = "full"          # or "desk"
//! # stages = 3             # optional overrides of the preset
//! # encoder_channels = [8, 16, 32]
//! # conv_repeats = [2, 2, 3]
//!
//! [train]
//! lr = 1e-6
//! beta1 = 0.9
//! beta2 = 0.999
//! epsilon = 1e-8
//! batch_size = 4
//! epochs = 40
//! iters_per_epoch = 200
//! val_iters = 100
//! void_policy = "background"   # or "ignore"
//! freeze_encoder = false
//! # encoder_weights = "vgg16_encoder.fseg"
//!
//! [data]
//! tile_size = 640
//! # stride = 640
//! split_ratios = [0.8176, 0.1419, 0.0405]
//!
//! [eval]
//! brightness_threshold = 220
//! exclude_void = false
//! beta = 1.0
//! ```

use std::path::{Path, PathBuf};

use fractoseg_core::adam::AdamConfig;
use fractoseg_core::image::DEFAULT_BRIGHTNESS_THRESHOLD;
use fractoseg_core::sampler::VoidPolicy;
use fractoseg_core::train::TrainConfig;
use fractoseg_core::unet::UNetConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Full,
    Desk,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub preset: Preset,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoder_channels: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conv_repeats: Option<Vec<usize>>,
}

impl ModelSection {
    pub fn resolve(&self) -> Result<UNetConfig> {
        let stages = self.stages.unwrap_or(5);
        let mut c = match self.preset {
            Preset::Full => {
                let mut c = UNetConfig::full();
                c.stages = stages;
                c.encoder_channels.truncate(stages);
                c.conv_repeats.truncate(stages);
                c
            }
            Preset::Desk => UNetConfig::desk_stages(stages),
        };
        if let Some(ch) = &self.encoder_channels {
            c.encoder_channels = ch.clone();
        }
        if let Some(r) = &self.conv_repeats {
            c.conv_repeats = r.clone();
        }
        c.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub iters_per_epoch: usize,
    pub val_iters: usize,
    pub void_policy: VoidPolicy,
    pub freeze_encoder: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoder_weights: Option<PathBuf>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let a = AdamConfig::default();
        let t = TrainConfig::default();
        TrainSection {
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            epsilon: a.epsilon,
            batch_size: t.batch_size,
            epochs: t.epochs,
            iters_per_epoch: t.iters_per_epoch,
            val_iters: t.val_iters,
            void_policy: t.void_policy,
            freeze_encoder: false,
            encoder_weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub tile_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    pub split_ratios: [f64; 3],
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            tile_size: 640,
            stride: None,
            // 605 / 105 / 30 of 740 tiles.
            split_ratios: [605.0 / 740.0, 105.0 / 740.0, 30.0 / 740.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub brightness_threshold: Option<u8>,
    pub exclude_void: bool,
    pub beta: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            brightness_threshold: Some(DEFAULT_BRIGHTNESS_THRESHOLD),
            exclude_void: false,
            beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub deterministic: bool,
    pub model: ModelSection,
    pub train: TrainSection,
    pub data: DataSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            deterministic: true,
            model: ModelSection::default(),
            train: TrainSection::default(),
            data: DataSection::default(),
            eval: EvalSection::default(),
        }
    }
}

/// Values given on the command line; `None` keeps the file or default value.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// TOML run configuration; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub tile_size: Option<usize>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub iters_per_epoch: Option<usize>,
    #[arg(long, global = true)]
    pub val_iters: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    /// Pixels brighter than this are excluded from evaluation; 255 disables the filter
    #[arg(long, global = true)]
    pub brightness_threshold: Option<u8>,
    /// Headline the void-excluded metrics (both variants are always reported)
    #[arg(long, global = true)]
    pub exclude_void: bool,
    /// Require bit-reproducible execution
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[arg(long, global = true)]
    pub freeze_encoder: bool,
    #[arg(long, global = true)]
    pub encoder_weights: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }

    /// File values (if any), then overrides, then validation.
    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut c = match &o.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(o.seed => c.seed);
        set!(o.tile_size => c.data.tile_size);
        set!(o.batch_size => c.train.batch_size);
        set!(o.epochs => c.train.epochs);
        set!(o.iters_per_epoch => c.train.iters_per_epoch);
        set!(o.val_iters => c.train.val_iters);
        set!(o.lr => c.train.lr);
        if let Some(t) = o.brightness_threshold {
            c.eval.brightness_threshold = (t < 255).then_some(t);
        }
        c.eval.exclude_void |= o.exclude_void;
        c.deterministic |= o.deterministic;
        c.train.freeze_encoder |= o.freeze_encoder;
        if o.encoder_weights.is_some() {
            c.train.encoder_weights = o.encoder_weights.clone();
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        let t = &self.train;
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", t.lr));
        }
        if !(0.0..1.0).contains(&t.beta1) || !(0.0..1.0).contains(&t.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)".into());
        }
        if !(t.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if t.batch_size == 0 || t.iters_per_epoch == 0 {
            return bad("batch size and iterations per epoch must be positive".into());
        }
        let d = &self.data;
        if d.tile_size == 0 || d.tile_size % 32 != 0 {
            return bad(format!(
                "tile size {} is not a positive multiple of 32",
                d.tile_size
            ));
        }
        if d.stride == Some(0) {
            return bad("stride must be positive".into());
        }
        let sum: f64 = d.split_ratios.iter().sum();
        if d.split_ratios.iter().any(|r| !(*r >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
            return bad(format!(
                "split ratios {:?} must be non-negative and sum to 1",
                d.split_ratios
            ));
        }
        if !(self.eval.beta > 0.0) {
            return bad("beta must be positive".into());
        }
        self.model.resolve()?;
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            adam: AdamConfig {
                lr: t.lr,
                beta1: t.beta1,
                beta2: t.beta2,
                epsilon: t.epsilon,
            },
            batch_size: t.batch_size,
            epochs: t.epochs,
            iters_per_epoch: t.iters_per_epoch,
            val_iters: t.val_iters,
            seed: self.seed,
            void_policy: t.void_policy,
        }
    }

    /// Writes the resolved configuration next to a command's outputs.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        let path = dir.join("config.resolved.toml");
        std::fs::write(&path, self.to_toml()).map_err(CliError::io(&path))
    }
}
