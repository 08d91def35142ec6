//! Command-line surface.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::evaluate::Predictions;
use crate::commands::{dataset, evaluate, predict, report, train};
use crate::config::{Overrides, RunConfig};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "fractoseg",
    version,
    about = "Fracture-mode segmentation of SEM micrographs"
)]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rasterize VIA annotations, tile the images and split them by source
    DatasetBuild {
        /// VIA JSON export or project file
        #[arg(long)]
        via: PathBuf,
        /// Directory holding the annotated images
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated train,val,test fractions
        #[arg(long, value_delimiter = ',')]
        split_ratios: Option<Vec<f64>>,
        /// Tile stride; defaults to the tile size
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Train on a manifest's train split, validating on val
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Run directory for weights, log and resolved config
        #[arg(long)]
        out: PathBuf,
        /// Model size preset
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
        /// Number of pooling stages
        #[arg(long)]
        stages: Option<usize>,
    },
    /// Classify images and write masks, overlays and area fractions
    Predict {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write blue/green overlay PNGs
        #[arg(long)]
        overlay: bool,
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Score predictions on a manifest split
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Predict with these weights
        #[arg(long, conflicts_with = "masks", required_unless_present = "masks")]
        weights: Option<PathBuf>,
        /// Use masks previously written by `predict`
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize the training log and evaluation report of a run directory
    Report { dir: PathBuf },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum PresetArg {
    Full,
    Desk,
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = RunConfig::resolve(&cli.overrides)?;
    match cli.command {
        Command::DatasetBuild {
            via,
            images,
            out,
            split_ratios,
            stride,
        } => {
            if let Some(r) = split_ratios {
                config.data.split_ratios = r.try_into().map_err(|_| {
                    CliError::Config("--split-ratios takes three comma-separated values".into())
                })?;
            }
            if stride.is_some() {
                config.data.stride = stride;
            }
            config.validate()?;
            let m = dataset::dataset_build(&via, &images, &out, &config)?;
            for (split, entries) in &m.splits {
                println!(
                    "{split}: {} tiles from {} images",
                    entries.len(),
                    m.sources(split).len()
                );
            }
        }
        Command::Train {
            manifest,
            out,
            preset,
            stages,
        } => {
            if let Some(p) = preset {
                config.model.preset = match p {
                    PresetArg::Full => crate::config::Preset::Full,
                    PresetArg::Desk => crate::config::Preset::Desk,
                };
            }
            if stages.is_some() {
                config.model.stages = stages;
            }
            config.validate()?;
            train::train(&manifest, &out, &config)?;
        }
        Command::Predict {
            weights,
            out,
            overlay,
            images,
        } => {
            predict::predict(&weights, &images, &out, overlay, &config)?;
        }
        Command::Evaluate {
            manifest,
            split,
            weights,
            masks,
            out,
        } => {
            let source = match (weights, masks) {
                (Some(w), _) => Predictions::Weights(w),
                (None, Some(m)) => Predictions::MaskDir(m),
                (None, None) => return Err(CliError::Config("give --weights or --masks".into())),
            };
            let r = evaluate::evaluate(&manifest, &split, &source, &out, &config)?;
            println!("{r}");
            let v = if config.eval.exclude_void {
                &r.void_excluded
            } else {
                &r.with_void
            };
            println!(
                "headline ({}): mean IoU {:?}, F-beta {:?}",
                if config.eval.exclude_void {
                    "void excluded"
                } else {
                    "with void"
                },
                v.mean_iou,
                v.f_beta
            );
        }
        Command::Report { dir } => print!("{}", report::report(&dir)?),
    }
    Ok(())
}
