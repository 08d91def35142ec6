mod support;

use fractoseg_core::image::GrayImage;
use fractoseg_core::mask::ClassMask;
use fractoseg_core::mask::FractureClass;
use fractoseg_core::metrics::{
    accumulate, f_measure, iou, mean_iou, pixel_accuracy, ConfusionCounts,
};
use fractoseg_core::ops::softmax_channels;
use fractoseg_core::quantify::{area_fractions, classify};
use fractoseg_core::raster::{rasterize, Polygon, Region};
use fractoseg_core::weights::{decode, encode, NamedTensor};
use fractoseg_core::Tensor;
use proptest::prelude::*;

#[test]
fn conv_and_transpose_are_adjoint() {
    for seed in 0..100 {
        let gap = support::adjoint_gap(seed);
        assert!(gap < 1e-10, "seed {seed}: gap {gap:e}");
    }
}

#[test]
fn metrics_match_pixel_recount() {
    for seed in 0..200 {
        support::metric_instance(seed).unwrap();
    }
}

fn mask_strategy(len: usize, ids: &'static [u8]) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(prop::sample::select(ids), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_sums_to_one(data in prop::collection::vec(-30.0f64..30.0, 2 * 3 * 4 * 4)) {
        let t = Tensor::from_vec([2, 3, 4, 4], data).unwrap();
        let s = softmax_channels(&t).unwrap();
        for n in 0..2 {
            for p in 0..16 {
                let total: f64 = (0..3).map(|c| s.item(n)[c * 16 + p]).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn classify_is_invariant_under_softmax(data in prop::collection::vec(-5.0f64..5.0, 3 * 8 * 8)) {
        let t = Tensor::from_vec([1, 3, 8, 8], data).unwrap();
        prop_assert_eq!(classify(&t).unwrap(), classify(&softmax_channels(&t).unwrap()).unwrap());
    }

    #[test]
    fn accumulate_is_additive(gt in mask_strategy(256, &[0, 1, 2, 255]), pred in mask_strategy(256, &[0, 1, 2]), split in 1usize..15, exclude in any::<bool>()) {
        let whole = accumulate(&ClassMask::new(16, 16, gt.clone()).unwrap(), &ClassMask::new(16, 16, pred.clone()).unwrap(), None, exclude).unwrap();
        let rows = split * 16;
        let top = accumulate(
            &ClassMask::new(split, 16, gt[..rows].to_vec()).unwrap(),
            &ClassMask::new(split, 16, pred[..rows].to_vec()).unwrap(), None, exclude).unwrap();
        let mut sum = accumulate(
            &ClassMask::new(16 - split, 16, gt[rows..].to_vec()).unwrap(),
            &ClassMask::new(16 - split, 16, pred[rows..].to_vec()).unwrap(), None, exclude).unwrap();
        sum.merge(&top).unwrap();
        prop_assert_eq!(whole, sum);
    }

    #[test]
    fn metrics_are_relabeling_invariant(gt in mask_strategy(256, &[0, 1, 2]), pred in mask_strategy(256, &[0, 1, 2]), perm in Just([0u8, 1, 2]).prop_shuffle()) {
        let relabel = |v: &[u8]| v.iter().map(|&i| perm[i as usize]).collect::<Vec<u8>>();
        let a = accumulate(&ClassMask::new(16, 16, gt.clone()).unwrap(), &ClassMask::new(16, 16, pred.clone()).unwrap(), None, false).unwrap();
        let b = accumulate(&ClassMask::new(16, 16, relabel(&gt)).unwrap(), &ClassMask::new(16, 16, relabel(&pred)).unwrap(), None, false).unwrap();
        for c in 0..3 {
            let pc = perm[c] as usize;
            prop_assert_eq!(iou(&a, c), iou(&b, pc));
            prop_assert_eq!(f_measure(&a, c, 1.0), f_measure(&b, pc, 1.0));
        }
        // Class order changes the summation order of the mean.
        prop_assert!(support::close(mean_iou(&a), mean_iou(&b), 1e-12));
        prop_assert_eq!(pixel_accuracy(&a), pixel_accuracy(&b));
    }

    #[test]
    fn void_exclusion_never_lowers_mode_iou(gt in mask_strategy(256, &[1, 2, 255]), pred in mask_strategy(256, &[1, 2])) {
        // Predictions on void pixels are always a fracture mode, hence wrong.
        let g = ClassMask::new(16, 16, gt).unwrap();
        let p = ClassMask::new(16, 16, pred).unwrap();
        let with = accumulate(&g, &p, None, false).unwrap();
        let without = accumulate(&g, &p, None, true).unwrap();
        for c in 1..3 {
            if let (Some(a), Some(b)) = (iou(&with, c), iou(&without, c)) {
                prop_assert!(b >= a);
            }
        }
    }

    #[test]
    fn duplicating_pairs_keeps_ratios(gt in mask_strategy(64, &[0, 1, 2]), pred in mask_strategy(64, &[0, 1, 2])) {
        let once = accumulate(&ClassMask::new(8, 8, gt).unwrap(), &ClassMask::new(8, 8, pred).unwrap(), None, false).unwrap();
        let mut twice = once.clone();
        twice.merge(&once).unwrap();
        prop_assert_eq!(mean_iou(&once), mean_iou(&twice));
        prop_assert_eq!(pixel_accuracy(&once), pixel_accuracy(&twice));
        prop_assert_eq!(f_measure(&once, 1, 1.0), f_measure(&twice, 1, 1.0));
    }

    #[test]
    fn area_fractions_ignore_pixel_order(ids in mask_strategy(64, &[0, 1, 2, 255]), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = ids.clone();
        shuffled.shuffle(&mut support::rng(seed));
        let a = area_fractions(&ClassMask::new(8, 8, ids).unwrap(), None).unwrap();
        let b = area_fractions(&ClassMask::new(8, 8, shuffled).unwrap(), None).unwrap();
        prop_assert_eq!(a.clone(), b);
        if let (Some(i), Some(t)) = (a.intergranular_fraction, a.transgranular_fraction) {
            prop_assert!((i + t - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rasterized_polygon_matches_point_test(points in prop::collection::vec((0.0f64..24.0, 0.0f64..24.0), 3..8)) {
        let polygon = Polygon::new(points.clone()).unwrap();
        let raster = rasterize(&[Region { polygon, class: FractureClass::Transgranular }], 24, 24);
        // Even-odd point-in-polygon test at each pixel center.
        let inside = |px: f64, py: f64| {
            let mut c = false;
            let n = points.len();
            let mut j = n - 1;
            for i in 0..n {
                let (xi, yi) = points[i];
                let (xj, yj) = points[j];
                if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
                    c = !c;
                }
                j = i;
            }
            c
        };
        if raster.skipped_degenerate == 0 {
            for y in 0..24 {
                for x in 0..24 {
                    let expected = if inside(x as f64 + 0.5, y as f64 + 0.5) { 2 } else { 255 };
                    prop_assert_eq!(raster.mask.get(y, x), expected, "pixel ({}, {})", y, x);
                }
            }
        }
    }

    #[test]
    fn weights_roundtrip(shape in prop::collection::vec(1usize..4, 1..5), seed in any::<u64>()) {
        use rand::Rng;
        let mut r = support::rng(seed);
        let len: usize = shape.iter().product();
        let t = NamedTensor { name: "enc1.conv1.kernel".into(), shape, data: (0..len).map(|_| r.random::<f32>()).collect() };
        let back = decode(&encode(std::slice::from_ref(&t)).unwrap()).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(&back[0].name, &t.name);
        prop_assert_eq!(&back[0].shape, &t.shape);
        prop_assert!(back[0].data.iter().zip(&t.data).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn reflect_pad_then_crop_is_identity(w in 1usize..40, h in 1usize..40, seed in any::<u64>()) {
        use rand::Rng;
        let mut r = support::rng(seed);
        let img = GrayImage::new(w, h, (0..w * h).map(|_| r.random()).collect()).unwrap();
        let padded = img.reflect_pad(h.div_ceil(32) * 32, w.div_ceil(32) * 32).unwrap();
        prop_assert_eq!(padded.crop(0, 0, h, w).unwrap(), img);
    }
}

#[test]
fn confusion_merge_is_commutative() {
    let mut a = ConfusionCounts::new(3);
    a.add(1, 2, 5);
    let mut b = ConfusionCounts::new(3);
    b.add(0, 0, 3);
    let (mut ab, mut ba) = (a.clone(), b.clone());
    ab.merge(&b).unwrap();
    ba.merge(&a).unwrap();
    assert_eq!(ab, ba);
}
