//! Independent oracles shared by the integration tests and the acceptance suite.

#![allow(dead_code)]

use fractoseg_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, dims: [usize; 4], lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(dims, |_, _, _, _| rng.random_range(lo..hi))
}

/// Values in ±[0.1, 1], so a small perturbation never crosses a ReLU kink.
pub fn away_from_zero(rng: &mut ChaCha8Rng, dims: [usize; 4]) -> Tensor<f64> {
    Tensor::from_fn(dims, |_, _, _, _| {
        let m = rng.random_range(0.1..1.0);
        if rng.random::<bool>() {
            m
        } else {
            -m
        }
    })
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of `f` at `x` along the coordinates in `indices`.
pub fn numeric_grad(
    x: &[f64],
    indices: &[usize],
    h: f64,
    mut f: impl FnMut(&[f64]) -> f64,
) -> Vec<f64> {
    let mut probe = x.to_vec();
    indices
        .iter()
        .map(|&i| {
            probe[i] = x[i] + h;
            let plus = f(&probe);
            probe[i] = x[i] - h;
            let minus = f(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

pub fn sample_indices(rng: &mut ChaCha8Rng, len: usize, count: usize) -> Vec<usize> {
    if len <= count {
        return (0..len).collect();
    }
    let mut picked = Vec::with_capacity(count);
    while picked.len() < count {
        let i = rng.random_range(0..len);
        if !picked.contains(&i) {
            picked.push(i);
        }
    }
    picked
}

/// Direct-loop cross-correlation, kernel `(C_out, C_in, kh, kw)`.
pub fn naive_conv(
    x: &Tensor<f64>,
    k: &Tensor<f64>,
    bias: &[f64],
    stride: usize,
    pad: usize,
) -> Tensor<f64> {
    let (xd, kd) = (x.dims(), k.dims());
    let oh = (xd.h + 2 * pad - kd.h) / stride + 1;
    let ow = (xd.w + 2 * pad - kd.w) / stride + 1;
    Tensor::from_fn([xd.n, kd.n, oh, ow], |n, o, y, xx| {
        let mut acc = bias[o];
        for c in 0..xd.c {
            for i in 0..kd.h {
                for j in 0..kd.w {
                    let iy = (y * stride + i) as isize - pad as isize;
                    let ix = (xx * stride + j) as isize - pad as isize;
                    if iy >= 0 && ix >= 0 && (iy as usize) < xd.h && (ix as usize) < xd.w {
                        acc += x.at(n, c, iy as usize, ix as usize) * k.at(o, c, i, j);
                    }
                }
            }
        }
        acc
    })
}

/// Per-class tallies recounted pixel by pixel from set definitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Recount {
    pub evaluated: u64,
    pub correct: u64,
    pub tp: [u64; 3],
    pub fp: [u64; 3],
    pub fn_: [u64; 3],
    pub gt_present: [bool; 3],
}

/// Void-excluded mode drops ground-truth 0 and 255; otherwise ground-truth 255 counts as 0.
pub fn recount(gt: &[u8], pred: &[u8], evaluable: Option<&[bool]>, exclude_void: bool) -> Recount {
    let mut r = Recount {
        evaluated: 0,
        correct: 0,
        tp: [0; 3],
        fp: [0; 3],
        fn_: [0; 3],
        gt_present: [false; 3],
    };
    for i in 0..gt.len() {
        if let Some(e) = evaluable {
            if !e[i] {
                continue;
            }
        }
        let mut g = gt[i];
        if exclude_void && (g == 0 || g == 255) {
            continue;
        }
        if g == 255 {
            g = 0;
        }
        let p = pred[i];
        r.evaluated += 1;
        r.gt_present[g as usize] = true;
        for c in 0..3u8 {
            match (g == c, p == c) {
                (true, true) => r.tp[c as usize] += 1,
                (false, true) => r.fp[c as usize] += 1,
                (true, false) => r.fn_[c as usize] += 1,
                _ => {}
            }
        }
        if g == p {
            r.correct += 1;
        }
    }
    r
}

impl Recount {
    pub fn iou(&self, c: usize) -> Option<f64> {
        let den = self.tp[c] + self.fp[c] + self.fn_[c];
        (den > 0).then(|| self.tp[c] as f64 / den as f64)
    }

    pub fn mean_iou(&self) -> Option<f64> {
        let v: Vec<f64> = (0..3)
            .filter(|&c| self.gt_present[c])
            .filter_map(|c| self.iou(c))
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn f_beta(&self, c: usize, beta: f64) -> Option<f64> {
        let (tp, fp, fn_) = (self.tp[c] as f64, self.fp[c] as f64, self.fn_[c] as f64);
        let b2 = beta * beta;
        let den = (1.0 + b2) * tp + b2 * fn_ + fp;
        (den > 0.0).then(|| (1.0 + b2) * tp / den)
    }

    pub fn accuracy(&self) -> Option<f64> {
        (self.evaluated > 0).then(|| self.correct as f64 / self.evaluated as f64)
    }
}

pub fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

pub mod gradcheck;

/// `|⟨conv(x), y⟩ − ⟨x, conv_transpose(y)⟩|` for one random configuration
/// sharing a single kernel tensor between the two operators.
pub fn adjoint_gap(seed: u64) -> f64 {
    use fractoseg_core::ops::{conv2d_forward, conv2d_transpose_forward, ConvParams};
    let mut r = rng(seed);
    let (cin, cout) = (r.random_range(1..5), r.random_range(1..5));
    let k = r.random_range(1..5);
    let stride = r.random_range(1..4);
    let pad = r.random_range(0..k);
    // Input sizes for which the transposed output lands exactly on the input size.
    let mut pick = || loop {
        let steps = r.random_range(1..6) as isize;
        let size = (steps - 1) * stride as isize + k as isize - 2 * pad as isize;
        if size >= 1 {
            break size as usize;
        }
    };
    let (h, w) = (pick(), pick());
    let n = r.random_range(1..3);
    let kernel = uniform(&mut r, [cout, cin, k, k], -1.0, 1.0);
    let x = uniform(&mut r, [n, cin, h, w], -1.0, 1.0);
    let fwd = ConvParams::new(kernel.clone(), vec![0.0; cout], stride, pad).unwrap();
    let cx = conv2d_forward(&x, &fwd).unwrap();
    let y = uniform(&mut r, cx.dims().as_array(), -1.0, 1.0);
    let adj = ConvParams::new_transpose(kernel, vec![0.0; cin], stride, pad).unwrap();
    let ty = conv2d_transpose_forward(&y, &adj).unwrap();
    assert_eq!(ty.dims(), x.dims());
    (cx.dot(&y).unwrap() - x.dot(&ty).unwrap()).abs()
}

/// Compares the metrics module with [`recount`] on one random 32×32 pair in
/// all four combinations of void exclusion and brightness masking.
pub fn metric_instance(seed: u64) -> Result<(), String> {
    use fractoseg_core::image::{brightness_mask, GrayImage};
    use fractoseg_core::mask::ClassMask;
    use fractoseg_core::metrics::{accumulate, f_measure, iou, mean_iou, pixel_accuracy};
    const TOL: f64 = 1e-12;
    let mut r = rng(seed);
    let gt_ids: Vec<u8> = (0..1024)
        .map(|_| [0, 1, 2, 255][r.random_range(0..4)])
        .collect();
    let pred_ids: Vec<u8> = (0..1024).map(|_| r.random_range(0..3)).collect();
    let pixels: Vec<u8> = (0..1024).map(|_| r.random()).collect();
    let gt = ClassMask::new(32, 32, gt_ids.clone()).unwrap();
    let pred = ClassMask::new(32, 32, pred_ids.clone()).unwrap();
    let bright = brightness_mask(&GrayImage::new(32, 32, pixels).unwrap(), 220);
    for exclude in [false, true] {
        for ev in [None, Some(bright.as_slice())] {
            let tag = format!(
                "seed {seed} exclude_void {exclude} brightness {}",
                ev.is_some()
            );
            let c = accumulate(&gt, &pred, ev, exclude).map_err(|e| e.to_string())?;
            let o = recount(&gt_ids, &pred_ids, ev, exclude);
            if c.total() != o.evaluated {
                return Err(format!("{tag}: evaluated {} vs {}", c.total(), o.evaluated));
            }
            for k in 0..3 {
                if (c.tp(k), c.fp(k), c.fn_(k)) != (o.tp[k], o.fp[k], o.fn_[k]) {
                    return Err(format!("{tag}: class {k} counts differ"));
                }
                if !close(iou(&c, k), o.iou(k), TOL) {
                    return Err(format!("{tag}: IoU class {k}"));
                }
            }
            if !close(mean_iou(&c), o.mean_iou(), TOL) {
                return Err(format!("{tag}: mean IoU"));
            }
            if !close(pixel_accuracy(&c), o.accuracy(), TOL) {
                return Err(format!("{tag}: accuracy"));
            }
            for beta in [0.5, 1.0, 2.0] {
                if !close(f_measure(&c, 1, beta), o.f_beta(1, beta), TOL) {
                    return Err(format!("{tag}: F-beta {beta}"));
                }
            }
            if let (Some(f1), Some(j)) = (f_measure(&c, 1, 1.0), iou(&c, 1)) {
                if (f1 - 2.0 * j / (1.0 + j)).abs() > TOL {
                    return Err(format!("{tag}: F1 identity {f1} vs IoU {j}"));
                }
            }
        }
    }
    Ok(())
}
