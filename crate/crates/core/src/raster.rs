//! Polygon annotations and their even-odd scanline rasterization.
//!
//! A pixel `(row i, column j)` belongs to a polygon iff its center
//! `(j + 0.5, i + 0.5)` is inside under the even-odd rule. Edges are treated
//! half-open in `y`, so a center lying exactly on a horizontal edge or vertex
//! is classified consistently with the classic crossing-number test.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::mask::{ClassMask, FractureClass, VOID};

/// Closed polygon in pixel coordinates, `(x, y)` per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub points: Vec<(f64, f64)>,
}

impl Polygon {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::invalid(
                "Polygon::new",
                alloc::format!("{} vertices, need at least 3", points.len()),
            ));
        }
        if points
            .iter()
            .any(|&(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(Error::invalid("Polygon::new", "non-finite vertex"));
        }
        Ok(Polygon { points })
    }

    /// Vertices clamped into `[0, width] × [0, height]`.
    pub fn clamped(&self, height: usize, width: usize) -> Polygon {
        Polygon {
            points: self
                .points
                .iter()
                .map(|&(x, y)| (x.clamp(0.0, width as f64), y.clamp(0.0, height as f64)))
                .collect(),
        }
    }

    /// Shoelace area (absolute value).
    pub fn area(&self) -> f64 {
        let n = self.points.len();
        let mut twice = 0.0;
        for i in 0..n {
            let (x0, y0) = self.points[i];
            let (x1, y1) = self.points[(i + 1) % n];
            twice += x0 * y1 - x1 * y0;
        }
        (twice * 0.5).abs()
    }

    /// Even-odd crossing-number test for a single point.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let n = self.points.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (xi, yi) = self.points[i];
            let (xj, yj) = self.points[j];
            if (yi > y) != (yj > y) && x < xi + (y - yi) * (xj - xi) / (yj - yi) {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub polygon: Polygon,
    pub class: FractureClass,
}

/// Regions per image filename, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationProject {
    pub entries: BTreeMap<String, Vec<Region>>,
}

impl AnnotationProject {
    pub fn region_count(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rasterized {
    pub mask: ClassMask,
    /// Regions skipped because they have zero area after clamping.
    pub skipped_degenerate: usize,
}

/// Fills `regions` in order into a `height × width` mask; later regions
/// overwrite earlier ones and uncovered pixels are [`VOID`].
pub fn rasterize(regions: &[Region], height: usize, width: usize) -> Rasterized {
    let mut mask = ClassMask::filled(height, width, VOID);
    let mut skipped = 0;
    let mut crossings = Vec::new();
    for region in regions {
        let poly = region.polygon.clamped(height, width);
        if poly.area() == 0.0 {
            log::warn!(
                "skipping degenerate {} polygon (zero area after clamping)",
                region.class.label()
            );
            skipped += 1;
            continue;
        }
        let id = region.class.id();
        let n = poly.points.len();
        for row in 0..height {
            let yc = row as f64 + 0.5;
            crossings.clear();
            let mut j = n - 1;
            for i in 0..n {
                let (xi, yi) = poly.points[i];
                let (xj, yj) = poly.points[j];
                if (yi > yc) != (yj > yc) {
                    crossings.push(xi + (yc - yi) * (xj - xi) / (yj - yi));
                }
                j = i;
            }
            crossings.sort_by(|a, b| a.partial_cmp(b).expect("finite crossings"));
            // Centers x with crossings[2k] <= x < crossings[2k+1] are inside.
            for span in crossings.chunks_exact(2) {
                let start = first_center_at_or_after(span[0]);
                let end = first_center_at_or_after(span[1]).min(width);
                for col in start..end {
                    mask.set(row, col, id);
                }
            }
        }
    }
    Rasterized {
        mask,
        skipped_degenerate: skipped,
    }
}

/// Smallest column whose center `col + 0.5` is `>= x`.
fn first_center_at_or_after(x: f64) -> usize {
    let c = (x - 0.5).ceil();
    if c <= 0.0 {
        0
    } else {
        c as usize
    }
}
