//! Seeded synthetic fractograph tiles.
//!
//! A tile is split into a few coarse Voronoi regions. Intergranular regions
//! carry a fine grain texture with bright grain edges, transgranular regions
//! are smooth linear facets, background regions are dark and flat.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::mask::{ClassMask, BACKGROUND, INTERGRANULAR, TRANSGRANULAR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub size: usize,
    /// Number of coarse regions per tile.
    pub regions: (usize, usize),
    /// Probability that a coarse region is background.
    pub background_probability: f64,
    /// Mean spacing of the fine grains in pixels.
    pub grain_spacing: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            size: 64,
            regions: (3, 6),
            background_probability: 0.1,
            grain_spacing: 9.0,
        }
    }
}

struct Facet {
    base: f64,
    gy: f64,
    gx: f64,
}

fn nearest2(sites: &[(f64, f64)], y: f64, x: f64) -> (usize, f64, f64) {
    let (mut best, mut d1, mut d2) = (0, f64::INFINITY, f64::INFINITY);
    for (i, &(sy, sx)) in sites.iter().enumerate() {
        let d = ((sy - y) * (sy - y) + (sx - x) * (sx - x)).sqrt();
        if d < d1 {
            d2 = d1;
            d1 = d;
            best = i;
        } else if d < d2 {
            d2 = d;
        }
    }
    (best, d1, d2)
}

/// Tile `index` of the stream seeded by `seed`; the same pair always gives the same tile.
pub fn generate_tile(
    config: &SynthConfig,
    seed: u64,
    index: u64,
) -> Result<(GrayImage, ClassMask)> {
    let n = config.size;
    if n == 0
        || config.regions.0 == 0
        || config.regions.0 > config.regions.1
        || !(config.grain_spacing >= 2.0)
    {
        return Err(Error::Config(alloc::format!(
            "invalid synthetic tile config {config:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let fine_noise = Normal::new(0.0, 12.0).expect("finite");
    let smooth_noise = Normal::new(0.0, 3.0).expect("finite");
    let size = n as f64;

    let k = rng.random_range(config.regions.0..=config.regions.1);
    let coarse: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.random::<f64>() * size, rng.random::<f64>() * size))
        .collect();
    let mut labels: Vec<u8> = (0..k)
        .map(|i| {
            if rng.random::<f64>() < config.background_probability {
                BACKGROUND
            } else if i % 2 == 0 {
                INTERGRANULAR
            } else {
                TRANSGRANULAR
            }
        })
        .collect();
    if !labels.contains(&INTERGRANULAR) && !labels.contains(&TRANSGRANULAR) {
        labels[0] = INTERGRANULAR;
    }
    let facets: Vec<Facet> = (0..k)
        .map(|_| {
            let angle = rng.random::<f64>() * core::f64::consts::TAU;
            let slope = 0.6 + rng.random::<f64>() * 0.9;
            Facet {
                base: 95.0 + rng.random::<f64>() * 60.0,
                gy: slope * angle.sin(),
                gx: slope * angle.cos(),
            }
        })
        .collect();

    let s = config.grain_spacing;
    let cells = (size / s).ceil() as usize + 1;
    let mut grains = Vec::with_capacity(cells * cells);
    let mut grain_gray = Vec::with_capacity(cells * cells);
    for gy in 0..cells {
        for gx in 0..cells {
            let y = (gy as f64 + rng.random::<f64>()) * s - s / 2.0;
            let x = (gx as f64 + rng.random::<f64>()) * s - s / 2.0;
            grains.push((y, x));
            grain_gray.push(70.0 + rng.random::<f64>() * 80.0);
        }
    }
    let bg_level = 20.0 + rng.random::<f64>() * 20.0;

    let mut pixels = Vec::with_capacity(n * n);
    let mut ids = Vec::with_capacity(n * n);
    let center = size / 2.0;
    for y in 0..n {
        for x in 0..n {
            let (py, px) = (y as f64 + 0.5, x as f64 + 0.5);
            let (region, _, _) = nearest2(&coarse, py, px);
            let class = labels[region];
            let v = match class {
                INTERGRANULAR => {
                    let (g, d1, d2) = nearest2(&grains, py, px);
                    let edge = d2 - d1;
                    if edge < 1.6 {
                        215.0 - 20.0 * edge + fine_noise.sample(&mut rng) * 0.5
                    } else {
                        grain_gray[g] + fine_noise.sample(&mut rng)
                    }
                }
                TRANSGRANULAR => {
                    let f = &facets[region];
                    f.base
                        + f.gy * (py - center)
                        + f.gx * (px - center)
                        + smooth_noise.sample(&mut rng)
                }
                _ => bg_level + smooth_noise.sample(&mut rng),
            };
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
            ids.push(class);
        }
    }
    Ok((GrayImage::new(n, n, pixels)?, ClassMask::new(n, n, ids)?))
}

/// Tiles `first..first + count` of the stream seeded by `seed`.
pub fn generate_set(
    config: &SynthConfig,
    seed: u64,
    first: u64,
    count: usize,
) -> Result<Vec<(GrayImage, ClassMask)>> {
    (0..count as u64)
        .map(|i| generate_tile(config, seed, first + i))
        .collect()
}
