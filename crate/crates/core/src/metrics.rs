//! Confusion counts and the segmentation scores derived from them.
//!
//! Ratios that would divide by zero are `None`, never 0.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{ClassMask, BACKGROUND, INTERGRANULAR, NUM_CLASSES, VOID};
use crate::quantify::AreaFractions;

/// `K × K` pixel counts, rows ground truth, columns prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub classes: usize,
    /// Row-major, `counts[gt * classes + pred]`.
    pub counts: Vec<u64>,
}

impl ConfusionCounts {
    pub fn new(classes: usize) -> Self {
        ConfusionCounts {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    #[inline]
    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    #[inline]
    pub fn add(&mut self, gt: usize, pred: usize, n: u64) {
        self.counts[gt * self.classes + pred] += n;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn tp(&self, c: usize) -> u64 {
        self.get(c, c)
    }

    /// Pixels predicted `c` whose ground truth is another class.
    pub fn fp(&self, c: usize) -> u64 {
        (0..self.classes)
            .filter(|&g| g != c)
            .map(|g| self.get(g, c))
            .sum()
    }

    /// Pixels of ground-truth class `c` predicted as another class.
    pub fn fn_(&self, c: usize) -> u64 {
        (0..self.classes)
            .filter(|&p| p != c)
            .map(|p| self.get(c, p))
            .sum()
    }

    pub fn gt_total(&self, c: usize) -> u64 {
        (0..self.classes).map(|p| self.get(c, p)).sum()
    }

    /// Element-wise sum; associative and commutative.
    pub fn merge(&mut self, other: &ConfusionCounts) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::shape(
                "ConfusionCounts::merge",
                "class count",
                self.classes,
                other.classes,
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

/// Counts pixels of one mask pair.
///
/// A pixel contributes iff it is evaluable and, when `exclude_void` is set,
/// its ground truth is neither `VOID` nor `BACKGROUND`. With `exclude_void`
/// unset, ground-truth `VOID` is counted as background. Predictions must be
/// class ids below [`NUM_CLASSES`].
pub fn accumulate(
    gt: &ClassMask,
    pred: &ClassMask,
    evaluable: Option<&[bool]>,
    exclude_void: bool,
) -> Result<ConfusionCounts> {
    const OP: &str = "accumulate";
    if gt.height != pred.height {
        return Err(Error::shape(OP, "height", gt.height, pred.height));
    }
    if gt.width != pred.width {
        return Err(Error::shape(OP, "width", gt.width, pred.width));
    }
    if let Some(e) = evaluable {
        if e.len() != gt.len() {
            return Err(Error::shape(OP, "evaluable mask length", gt.len(), e.len()));
        }
    }
    let mut counts = ConfusionCounts::new(NUM_CLASSES);
    for (i, (&g, &p)) in gt.ids.iter().zip(&pred.ids).enumerate() {
        if evaluable.is_some_and(|e| !e[i]) {
            continue;
        }
        if exclude_void && (g == VOID || g == BACKGROUND) {
            continue;
        }
        let g = if g == VOID { BACKGROUND } else { g } as usize;
        if g >= NUM_CLASSES {
            return Err(Error::invalid(
                OP,
                alloc::format!("ground-truth id {g} is not a class"),
            ));
        }
        if p as usize >= NUM_CLASSES {
            return Err(Error::invalid(
                OP,
                alloc::format!("predicted id {p} is not a class"),
            ));
        }
        counts.add(g, p as usize, 1);
    }
    Ok(counts)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `tp / (tp + fp + fn)` for class `c`.
pub fn iou(counts: &ConfusionCounts, c: usize) -> Option<f64> {
    let tp = counts.tp(c);
    ratio(tp, tp + counts.fp(c) + counts.fn_(c))
}

/// Unweighted mean IoU over classes present in the ground truth.
pub fn mean_iou(counts: &ConfusionCounts) -> Option<f64> {
    let vals: Vec<f64> = (0..counts.classes)
        .filter(|&c| counts.gt_total(c) > 0)
        .filter_map(|c| iou(counts, c))
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// `(1 + β²)·tp / ((1 + β²)·tp + β²·fn + fp)` with `positive` as the positive class.
pub fn f_measure(counts: &ConfusionCounts, positive: usize, beta: f64) -> Option<f64> {
    let (tp, fp, fn_) = (
        counts.tp(positive) as f64,
        counts.fp(positive) as f64,
        counts.fn_(positive) as f64,
    );
    if tp == 0.0 && fp == 0.0 && fn_ == 0.0 {
        return None;
    }
    let b2 = beta * beta;
    Some((1.0 + b2) * tp / ((1.0 + b2) * tp + b2 * fn_ + fp))
}

pub fn pixel_accuracy(counts: &ConfusionCounts) -> Option<f64> {
    ratio(
        (0..counts.classes).map(|c| counts.tp(c)).sum(),
        counts.total(),
    )
}

/// Ground truth, prediction and optional evaluable-pixel mask for one image.
#[derive(Debug, Clone, Copy)]
pub struct EvalPair<'a> {
    pub gt: &'a ClassMask,
    pub pred: &'a ClassMask,
    pub evaluable: Option<&'a [bool]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub beta: f64,
    pub positive_class: u8,
    /// Recorded in the report; the caller builds the evaluable masks.
    pub brightness_threshold: Option<u8>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            beta: 1.0,
            positive_class: INTERGRANULAR,
            brightness_threshold: None,
        }
    }
}

/// Scores under one void-handling variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub exclude_void: bool,
    pub evaluated_pixels: u64,
    pub confusion: ConfusionCounts,
    /// Indexed by class id; `None` where undefined.
    pub per_class_iou: Vec<Option<f64>>,
    /// Micro-averaged: counts pooled over all images first.
    pub mean_iou: Option<f64>,
    /// Mean over images of each image's mean IoU.
    pub per_image_mean_iou: Option<f64>,
    pub f_beta: Option<f64>,
    pub pixel_accuracy: Option<f64>,
}

impl VariantReport {
    fn from_counts(
        exclude_void: bool,
        counts: ConfusionCounts,
        per_image: &[ConfusionCounts],
        o: &EvalOptions,
    ) -> Self {
        let per_image_vals: Vec<f64> = per_image.iter().filter_map(mean_iou).collect();
        VariantReport {
            exclude_void,
            evaluated_pixels: counts.total(),
            per_class_iou: (0..counts.classes).map(|c| iou(&counts, c)).collect(),
            mean_iou: mean_iou(&counts),
            per_image_mean_iou: (!per_image_vals.is_empty())
                .then(|| per_image_vals.iter().sum::<f64>() / per_image_vals.len() as f64),
            f_beta: f_measure(&counts, o.positive_class as usize, o.beta),
            pixel_accuracy: pixel_accuracy(&counts),
            confusion: counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub images: usize,
    pub beta: f64,
    pub positive_class: u8,
    pub brightness_threshold: Option<u8>,
    pub with_void: VariantReport,
    pub void_excluded: VariantReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_fractions: Option<AreaFractions>,
}

/// Scores a set of image pairs under both void variants, pooling counts
/// across images before taking ratios.
pub fn evaluate_pair_set(pairs: &[EvalPair<'_>], options: &EvalOptions) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::invalid("evaluate_pair_set", "no image pairs"));
    }
    let mut variants = Vec::with_capacity(2);
    for exclude_void in [false, true] {
        let per_image = pairs
            .iter()
            .map(|p| accumulate(p.gt, p.pred, p.evaluable, exclude_void))
            .collect::<Result<Vec<_>>>()?;
        let mut total = ConfusionCounts::new(NUM_CLASSES);
        for c in &per_image {
            total.merge(c)?;
        }
        variants.push(VariantReport::from_counts(
            exclude_void,
            total,
            &per_image,
            options,
        ));
    }
    let void_excluded = variants.pop().expect("two variants");
    let with_void = variants.pop().expect("two variants");
    Ok(EvalReport {
        images: pairs.len(),
        beta: options.beta,
        positive_class: options.positive_class,
        brightness_threshold: options.brightness_threshold,
        with_void,
        void_excluded,
        area_fractions: None,
    })
}

struct Pct(Option<f64>);

impl fmt::Display for Pct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{:>8.2}%", 100.0 * v),
            None => write!(f, "{:>9}", "n/a"),
        }
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "images: {}   brightness filter: {}   F-beta: beta={} positive class={}",
            self.images,
            match self.brightness_threshold {
                Some(t) => alloc::format!("intensity > {t} excluded"),
                None => "off".into(),
            },
            self.beta,
            self.positive_class
        )?;
        writeln!(f, "{:<26}{:>12}{:>12}", "metric", "with void", "void excl.")?;
        let (a, b) = (&self.with_void, &self.void_excluded);
        writeln!(
            f,
            "{:<26}{:>12}{:>12}",
            "evaluated pixels", a.evaluated_pixels, b.evaluated_pixels
        )?;
        for (c, name) in ["IoU background", "IoU intergranular", "IoU transgranular"]
            .iter()
            .enumerate()
        {
            writeln!(
                f,
                "{:<26}   {}   {}",
                name,
                Pct(a.per_class_iou[c]),
                Pct(b.per_class_iou[c])
            )?;
        }
        writeln!(
            f,
            "{:<26}   {}   {}",
            "mean IoU (pooled)",
            Pct(a.mean_iou),
            Pct(b.mean_iou)
        )?;
        writeln!(
            f,
            "{:<26}   {}   {}",
            "mean IoU (per image)",
            Pct(a.per_image_mean_iou),
            Pct(b.per_image_mean_iou)
        )?;
        writeln!(
            f,
            "{:<26}   {}   {}",
            "F-beta",
            Pct(a.f_beta),
            Pct(b.f_beta)
        )?;
        write!(
            f,
            "{:<26}   {}   {}",
            "pixel accuracy",
            Pct(a.pixel_accuracy),
            Pct(b.pixel_accuracy)
        )?;
        if let Some(af) = &self.area_fractions {
            write!(
                f,
                "\narea fractions: intergranular {} transgranular {} ({} / {} px)",
                Pct(af.intergranular_fraction),
                Pct(af.transgranular_fraction),
                af.intergranular_pixels,
                af.transgranular_pixels
            )?;
        }
        Ok(())
    }
}
