mod common;

use common::*;
use kidseg::ensemble::{combine, combine_voxel};
use kidseg::exchange::CaseMasks;
use kidseg::metrics::{confusion_counts, prf};
use kidseg::preprocess::{
    dilate, erode, fill_holes, hist_equalize, mean_filter_binarize, median_filter, morph_open, otsu_threshold,
    smooth_transforms, RawTransform,
};
use kidseg::validation::{
    connected_components, kidney_failures, label_components, measure_region, tumor_failures, validate_detailed,
    RegionVerdict, TumorVerdict, ValidationRules,
};
use kidseg::volume::{Dims, LabelVolume, MaskRole, MaskVolume, Spacing};
use proptest::prelude::*;

fn bytes(n: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(any::<u8>(), n)
}

/// Thresholds small enough for random 12^3 volumes to produce every verdict.
fn small_rules() -> ValidationRules {
    ValidationRules {
        kidney_min_volume: 20.0,
        kidney_min_frames: 2,
        tumor_min_volume: 6.0,
        tumor_min_major: 2.0,
        tumor_min_minor: 0.5,
        tumor_min_frames: 2,
        tumor_min_sphericity: 0.1,
        ..ValidationRules::default()
    }
}

fn labels_from(dims: Dims, raw: &[u8]) -> LabelVolume {
    // mostly background, some kidney and tumor
    let data = raw
        .iter()
        .map(|&b| match b {
            0..=159 => 0,
            160..=219 => 1,
            _ => 2,
        })
        .collect();
    LabelVolume::new(dims, Spacing::default(), data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn otsu_matches_exhaustive_search(w in 1usize..24, h in 1usize..24, seed in bytes(576)) {
        let px: Vec<u8> = seed[..w * h].to_vec();
        let img = gray(w, h, px.clone());
        let (t, mask) = otsu_threshold(&img);
        prop_assert_eq!(t, otsu_oracle(&px));
        for (m, p) in mask.data.iter().zip(&px) {
            prop_assert_eq!(*m, (*p > t) as u8);
        }
    }

    #[test]
    fn equalization_is_monotone(w in 1usize..20, h in 1usize..20, seed in bytes(400)) {
        let img = gray(w, h, seed[..w * h].to_vec());
        let eq = hist_equalize(&img);
        for i in 0..img.data.len() {
            for j in 0..img.data.len() {
                if img.data[i] <= img.data[j] {
                    prop_assert!(eq.data[i] <= eq.data[j]);
                }
            }
        }
    }

    #[test]
    fn median_and_mean_match_window_oracles(
        w in 1usize..20, h in 1usize..20, k in prop::sample::select(vec![1usize, 3, 5, 9]),
        density in 1u8..255, seed in bytes(400),
    ) {
        let m = mask_from_bytes(w, h, &seed[..w * h], density);
        prop_assert_eq!(median_filter(&m, k), median_oracle(&m, k));
        prop_assert_eq!(mean_filter_binarize(&m, k), mean_oracle(&m, k));
    }

    #[test]
    fn erosion_dilation_match_oracles(
        w in 1usize..20, h in 1usize..20, k in prop::sample::select(vec![1usize, 3, 5, 7]),
        density in 1u8..255, seed in bytes(400),
    ) {
        let m = mask_from_bytes(w, h, &seed[..w * h], density);
        prop_assert_eq!(erode(&m, k), minmax_oracle(&m, k, false));
        prop_assert_eq!(dilate(&m, k), minmax_oracle(&m, k, true));
    }

    #[test]
    fn opening_is_idempotent_and_anti_extensive(
        w in 1usize..40, h in 1usize..40, k in prop::sample::select(vec![3usize, 5, 9]),
        density in 1u8..255, seed in bytes(1600),
    ) {
        let m = mask_from_bytes(w, h, &seed[..w * h], density);
        let o = morph_open(&m, k);
        prop_assert_eq!(&morph_open(&o, k), &o);
        prop_assert!(o.data.iter().zip(&m.data).all(|(&a, &b)| a <= b));
    }

    #[test]
    fn fill_holes_is_extensive_idempotent_and_leaves_no_enclosed_background(
        w in 1usize..30, h in 1usize..30, density in 1u8..255, seed in bytes(900),
    ) {
        let m = mask_from_bytes(w, h, &seed[..w * h], density);
        let f = fill_holes(&m);
        prop_assert!(m.data.iter().zip(&f.data).all(|(&a, &b)| a <= b));
        prop_assert_eq!(&fill_holes(&f), &f);
        // every remaining background pixel reaches the border through background
        let inverted = f.map(|v| 1 - v);
        let dims = Dims::new(w, h, 1);
        let flat: Vec<u8> = inverted.data.clone();
        for comp in bfs4(&flat, w, h) {
            let touches = comp.iter().any(|&i| {
                let (x, y, _) = dims.coords(i);
                x == 0 || y == 0 || x == w - 1 || y == h - 1
            });
            prop_assert!(touches);
        }
    }

    #[test]
    fn components_match_bfs_partition(d in 1usize..9, density in 1u8..200, seed in bytes(512)) {
        let dims = Dims::new(8, 8, d);
        let data: Vec<u8> = seed[..dims.len()].iter().map(|&b| (b < density) as u8).collect();
        let labels = LabelVolume::new(dims, Spacing::default(), data.clone()).unwrap();
        let mut got = label_components(&labels, 1);
        got.sort();
        prop_assert_eq!(got, bfs_components(&data, dims, 1));
    }

    #[test]
    fn combine_is_monotone_in_every_mask(seed in bytes(3 * 64), flip in 0usize..(3 * 64)) {
        let dims = Dims::new(4, 4, 4);
        let bits: Vec<u8> = seed.iter().map(|b| b & 1).collect();
        let build = |bits: &[u8]| {
            let m = |role, k: usize| {
                MaskVolume::new(dims, Spacing::default(), role, bits[k * 64..(k + 1) * 64].to_vec()).unwrap()
            };
            combine(&CaseMasks::new(m(MaskRole::KtLax, 0), m(MaskRole::KtStrict, 1), m(MaskRole::Tumor, 2)).unwrap())
                .unwrap()
        };
        let before = build(&bits);
        let mut more = bits.clone();
        more[flip] = 1;
        let after = build(&more);
        prop_assert!(before.data().iter().zip(after.data()).all(|(a, b)| a <= b));
        for (i, &l) in before.data().iter().enumerate() {
            prop_assert_eq!(l, combine_voxel(bits[i], bits[64 + i], bits[128 + i]));
        }
    }

    #[test]
    fn f1_is_symmetric(tp in 0u64..1000, fp in 0u64..1000, fn_ in 0u64..1000) {
        let (a, b) = (prf(tp, fp, fn_), prf(tp, fn_, fp));
        prop_assert!((a.f1 - b.f1).abs() < 1e-15);
        for s in [a.precision, a.recall, a.f1] {
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn confusion_accounting_is_exact(p in bytes(64), t in bytes(64)) {
        let dims = Dims::new(4, 4, 4);
        let pred = LabelVolume::new(dims, Spacing::default(), p.iter().map(|b| b % 3).collect()).unwrap();
        let truth = LabelVolume::new(dims, Spacing::default(), t.iter().map(|b| b % 3).collect()).unwrap();
        for class in 0..3u8 {
            let c = confusion_counts(&pred, &truth, class).unwrap();
            prop_assert_eq!((c.tp + c.fn_) as usize, truth.count(class));
            prop_assert_eq!((c.tp + c.fp) as usize, pred.count(class));
            let s = prf(c.tp, c.fp, c.fn_);
            let identical = (0..64).all(|i| (pred.data()[i] == class) == (truth.data()[i] == class));
            prop_assert_eq!(identical, s.precision == 1.0 && s.recall == 1.0 && s.f1 == 1.0);
        }
    }

    #[test]
    fn validation_invariants(seed in bytes(12 * 12 * 12)) {
        let dims = Dims::new(12, 12, 12);
        let input = labels_from(dims, &seed);
        let rules = small_rules();
        let outcome = validate_detailed(&input, &rules).unwrap();
        let out = outcome.labels.data();
        let inp = input.data();

        // label-set monotonicity
        for (&a, &b) in inp.iter().zip(out) {
            match a {
                0 => prop_assert_eq!(b, 0),
                1 => prop_assert!(b <= 1),
                _ => {}
            }
        }

        // accounting identity for label 1
        let kept_kidney: usize = outcome.regions.iter()
            .filter(|r| r.verdict == RegionVerdict::KidneyConfirmed)
            .map(|r| r.properties.volume).sum();
        let relabelled: usize = outcome.regions.iter()
            .filter(|r| r.verdict == RegionVerdict::Tumor(TumorVerdict::RelabelKidney))
            .map(|r| r.properties.volume).sum();
        prop_assert_eq!(outcome.labels.count(1), kept_kidney + relabelled);

        // surviving tumors satisfy every tumor rule when re-measured
        for r in connected_components(&outcome.labels, 2) {
            prop_assert!(tumor_failures(&r.properties, &rules).is_empty());
        }
        // label-1 components made only of original kidney voxels satisfy the kidney rules
        for r in connected_components(&outcome.labels, 1) {
            if r.voxels.iter().all(|&i| inp[i] == 1) {
                prop_assert!(kidney_failures(&r.properties, &rules).is_empty());
            }
        }
    }

    #[test]
    fn region_invariants(seed in bytes(6 * 6 * 6), density in 20u8..200) {
        let dims = Dims::new(6, 6, 6);
        let data: Vec<u8> = seed.iter().map(|&b| (b < density) as u8).collect();
        let labels = LabelVolume::new(dims, Spacing::default(), data).unwrap();
        for r in connected_components(&labels, 1) {
            let p = &r.properties;
            prop_assert_eq!(p.volume, r.voxels.len());
            prop_assert!(p.major_axis >= p.minor_axis && p.minor_axis >= 0.0);
            prop_assert!(p.sphericity > 0.0 && p.sphericity <= 1.0 + 1e-12);
            prop_assert!(p.frame_span <= p.bbox.max[2] - p.bbox.min[2] + 1);
            for &i in &r.voxels {
                let (x, y, z) = dims.coords(i);
                prop_assert!(p.bbox.contains([x, y, z]));
            }
            let coords: Vec<[usize; 3]> = r.voxels.iter().map(|&i| { let (x, y, z) = dims.coords(i); [x, y, z] }).collect();
            prop_assert_eq!(measure_region(&coords, dims.depth), *p);
        }
    }

    #[test]
    fn smoothing_reproduces_low_degree_polynomials(
        d in 6usize..40,
        c in prop::array::uniform5(-0.5f64..0.5),
        z0 in 1.2f64..3.5,
    ) {
        let x = |i: usize| 2.0 * i as f64 / (d - 1) as f64 - 1.0;
        let poly = |i: usize, scale: f64, off: f64| {
            let t = x(i);
            off + scale * (c[0] + c[1] * t + c[2] * t * t + c[3] * t.powi(3) + c[4] * t.powi(4))
        };
        let raw: Vec<RawTransform> = (0..d)
            .map(|i| RawTransform {
                center: (poly(i, 40.0, 256.0), poly(i, -30.0, 250.0)),
                zoom: (z0 + 0.1 * poly(i, 1.0, 0.0)).clamp(1.0, 4.0),
                valid: true,
            })
            .collect();
        prop_assume!(raw.iter().all(|r| r.zoom > 1.0 && r.zoom < 4.0));
        for (r, s) in raw.iter().zip(smooth_transforms(&raw, (512, 512))) {
            prop_assert!((r.center.0 - s.smooth_center.0).abs() < 1e-6);
            prop_assert!((r.center.1 - s.smooth_center.1).abs() < 1e-6);
            prop_assert!((r.zoom - s.smooth_zoom).abs() < 1e-6);
        }
    }
}

/// 4-connected components of ones in a 2D image.
fn bfs4(data: &[u8], w: usize, h: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; data.len()];
    let mut out = Vec::new();
    for s in 0..data.len() {
        if data[s] == 0 || seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![s];
        let mut comp = Vec::new();
        while let Some(i) = stack.pop() {
            comp.push(i);
            let (x, y) = (i % w, i / w);
            let mut n = Vec::new();
            if x > 0 {
                n.push(i - 1);
            }
            if x + 1 < w {
                n.push(i + 1);
            }
            if y > 0 {
                n.push(i - w);
            }
            if y + 1 < h {
                n.push(i + w);
            }
            for j in n {
                if data[j] == 1 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        out.push(comp);
    }
    out
}
