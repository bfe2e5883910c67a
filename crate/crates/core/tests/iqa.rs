mod common;

use std::collections::BTreeMap;

use common::*;
use pcle_core::baselines::{unsharp_sharpen, SharpenParams};
use pcle_core::imagecore::circular_fov;
use pcle_core::iqa::*;
use pcle_core::Image;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn ssim_matches_direct_convolution_oracle() {
    let mut r = rng(2024);
    let p = SsimParams::default();
    for k in 0..50 {
        let (w, h) = (r.random_range(16..=64), r.random_range(16..=64));
        let a = random_image(w, h, &mut r);
        // Correlated partner so values span a useful range.
        let mix: f64 = r.random();
        let n = random_image(w, h, &mut r);
        let b = Image::from_fn(w, h, |x, y| mix * a.get(x, y) + (1.0 - mix) * n.get(x, y));
        let got = ssim(&a, &b, &p).unwrap();
        let want = ssim_default(&a, &b);
        assert!((got - want).abs() < 1e-6, "pair {k} ({w}x{h}): {got} vs {want}");
    }
}

#[test]
fn ssim_oracle_with_fov() {
    let mut r = rng(8);
    let fov = circular_fov(48, 48, 0.0).unwrap();
    let a = random_image(48, 48, &mut r).with_fov(fov.clone()).unwrap();
    let b = random_image(48, 48, &mut r).with_fov(fov).unwrap();
    let got = ssim(&a, &b, &SsimParams::default()).unwrap();
    assert!((got - ssim_default(&a, &b)).abs() < 1e-6);
}

#[test]
fn ssim_self_is_exactly_one() {
    let x = random_image(40, 33, &mut rng(1));
    assert_eq!(ssim(&x, &x, &SsimParams::default()).unwrap(), 1.0);
}

#[test]
fn ssim_of_inverted_checkerboard_is_negative() {
    let x = Image::from_fn(32, 32, |x, y| ((x + y) % 2) as f64);
    let inv = x.map(|v| 1.0 - v);
    assert!(ssim(&x, &inv, &SsimParams::default()).unwrap() < 0.0);
}

#[test]
fn ssim_needs_a_window() {
    let x = Image::filled(8, 8, 0.5);
    assert!(ssim(&x, &x, &SsimParams::default()).is_err());
}

#[test]
fn gcf_constant_is_zero() {
    assert_eq!(gcf(&Image::filled(64, 64, 0.3), &GcfParams::default()).unwrap(), 0.0);
}

#[test]
fn gcf_two_by_two_hand_calculation() {
    let l = |p: f64| 100.0 * p.powf(2.2).sqrt();
    let img = Image::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    // Every pixel has two neighbours, both at the opposite luminance.
    assert!((gcf(&img, &GcfParams::single_level()).unwrap() - 100.0).abs() < 1e-12);

    let v = [0.2, 0.7, 0.5, 0.9];
    let img = Image::new(2, 2, v.to_vec()).unwrap();
    let (a, b, c, d) = (l(v[0]), l(v[1]), l(v[2]), l(v[3]));
    let local = [
        ((a - b).abs() + (a - c).abs()) / 2.0,
        ((b - a).abs() + (b - d).abs()) / 2.0,
        ((c - a).abs() + (c - d).abs()) / 2.0,
        ((d - b).abs() + (d - c).abs()) / 2.0,
    ];
    let want = local.iter().sum::<f64>() / 4.0;
    assert!((gcf(&img, &GcfParams::single_level()).unwrap() - want).abs() < 1e-12);
}

#[test]
fn gcf_weights_follow_polynomial() {
    let p = GcfParams::default();
    for (i, w) in p.weights.iter().enumerate() {
        let t = (i + 1) as f64 / 9.0;
        assert!((w - ((-0.406385 * t + 0.334573) * t + 0.0877526)).abs() < 1e-15);
    }
}

#[test]
fn sharpening_raises_gcf_on_corpus() {
    let p = GcfParams::default();
    let ups = corpus()
        .iter()
        .take(10)
        .filter(|(_, img)| {
            let s = unsharp_sharpen(img, &SharpenParams::default()).unwrap();
            delta_gcf(&s, img, &p).unwrap() > 0.0
        })
        .count();
    assert!(ups >= 9, "{ups}/10");
}

#[test]
fn delta_gcf_is_antisymmetric() {
    let mut r = rng(3);
    let (a, b) = (random_image(40, 40, &mut r), random_image(40, 40, &mut r));
    let p = GcfParams::default();
    assert_eq!(delta_gcf(&a, &a, &p).unwrap(), 0.0);
    assert_eq!(delta_gcf(&a, &b, &p).unwrap(), -delta_gcf(&b, &a, &p).unwrap());
}

fn ci(m: &str, s: f64, g: f64) -> CompositeInput {
    CompositeInput { method: m.into(), ssim_vs_hr: s, dgcf_vs_lr: g }
}

#[test]
fn tot_cs_closed_forms() {
    let t = tot_cs(&[ci("a", 0.8, 0.0), ci("b", 0.9, 0.5), ci("c", 1.0, 1.0)]).unwrap();
    assert_eq!(t, vec![0.0, 0.5, 1.0]);
    let t = tot_cs(&[ci("a", 0.7, 0.1), ci("b", 0.7, 0.3)]).unwrap();
    assert_eq!(t, vec![0.25, 0.75]);
    assert!(tot_cs(&[ci("a", 0.7, 0.1)]).is_err());
}

#[test]
fn ssim_l1_reductions() {
    let mut r = rng(12);
    let (a, b) = (random_image(24, 24, &mut r), random_image(24, 24, &mut r));
    let p = SsimParams::default();
    assert_eq!(ssim_l1_score(&a, &a, 0.84, &p).unwrap(), 0.0);
    let mae = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
    assert_eq!(ssim_l1_score(&a, &b, 0.0, &p).unwrap(), mae);
    assert!((ssim_l1_score(&a, &b, 1.0, &p).unwrap() - (1.0 - ssim_default(&a, &b))).abs() < 1e-6);
}

/// Deterministic pairs with a known shift; reference values from
/// `scipy.stats.ttest_rel(b, a)` on the same formulas.
#[test]
fn paired_t_matches_reference() {
    let cases = [
        (10, 0.1, 1.035421318491878, 0.32749091841664746),
        (30, 0.25, 3.7949022314631367, 0.0006961387344038875),
        (100, 0.05, 1.5022622453189196, 0.1362124808308196),
        (12, 0.0, 0.38760192796553916, 0.7057056672325361),
        (50, -0.4, -7.651685267957497, 6.536160713232042e-10),
    ];
    for (n, shift, t_ref, p_ref) in cases {
        let a: Vec<f64> = (0..n).map(|i| (i as f64 * 1.7).sin() + 0.3 * (i as f64 * 0.37).cos()).collect();
        let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v + shift + 0.5 * (i as f64 * 2.3 + 0.1).cos()).collect();
        let r = paired_t_test(&b, &a).unwrap();
        assert!((r.t - t_ref).abs() < 1e-9, "n={n}: t {} vs {t_ref}", r.t);
        assert!((r.p_value - p_ref).abs() < 1e-6, "n={n}: p {} vs {p_ref}", r.p_value);
    }
}

fn set(imgs: &[Image]) -> ImageSet {
    imgs.iter().enumerate().map(|(i, im)| (format!("img{i}"), im.clone())).collect()
}

#[test]
fn evaluate_identity_and_baseline_rows() {
    let mut r = rng(40);
    let hr: Vec<Image> = (0..4).map(|_| random_image(32, 32, &mut r)).collect();
    let lr: Vec<Image> = hr.iter().map(|h| h.map(|v| 0.5 * v + 0.25)).collect();
    let methods = BTreeMap::from([("copy".to_string(), set(&hr))]);
    let rep = evaluate(&methods, &set(&lr), &set(&hr), &EvalParams::default()).unwrap();
    let lr_row = rep.methods.iter().find(|m| m.method == LR_METHOD).unwrap();
    assert_eq!((lr_row.dgcf_vs_lr.mean, lr_row.dgcf_vs_lr.std), (0.0, 0.0));
    let copy = rep.methods.iter().find(|m| m.method == "copy").unwrap();
    assert_eq!((copy.ssim_vs_hr.mean, copy.ssim_vs_hr.std), (1.0, 0.0));
    assert_eq!((copy.dgcf_vs_hr.mean, copy.dgcf_vs_hr.std), (0.0, 0.0));
}

#[test]
fn evaluate_aggregates_recompute_from_rows() {
    let mut r = rng(41);
    let hr: Vec<Image> = (0..5).map(|_| random_image(24, 24, &mut r)).collect();
    let lr: Vec<Image> = hr.iter().map(|h| h.map(|v| 0.8 * v + 0.1)).collect();
    let noisy: Vec<Image> = hr.iter().map(|h| h.map(|v| (v + 0.05).min(1.0))).collect();
    let methods = BTreeMap::from([("copy".to_string(), set(&hr)), ("noisy".to_string(), set(&noisy))]);
    let rep = evaluate(&methods, &set(&lr), &set(&hr), &EvalParams::default()).unwrap();
    for m in &rep.methods {
        let rows: Vec<_> = rep.rows.iter().filter(|r| r.method == m.method).collect();
        let (s_mean, s_std) = mean_std(&rows.iter().map(|r| r.ssim_vs_hr).collect::<Vec<_>>());
        let (h_mean, h_std) = mean_std(&rows.iter().map(|r| r.gcf - r.gcf_hr).collect::<Vec<_>>());
        let (l_mean, l_std) = mean_std(&rows.iter().map(|r| r.gcf - r.gcf_lr).collect::<Vec<_>>());
        for (a, b) in [
            (m.ssim_vs_hr.mean, s_mean),
            (m.ssim_vs_hr.std, s_std),
            (m.dgcf_vs_hr.mean, h_mean),
            (m.dgcf_vs_hr.std, h_std),
            (m.dgcf_vs_lr.mean, l_mean),
            (m.dgcf_vs_lr.std, l_std),
        ] {
            assert!((a - b).abs() < 1e-12);
        }
    }
    let d = tempfile::tempdir().unwrap();
    rep.write(d.path()).unwrap();
    assert!(d.path().join("images.csv").is_file() && d.path().join("aggregate.csv").is_file());
}

#[test]
fn evaluate_names_missing_ids() {
    let mut r = rng(42);
    let hr: Vec<Image> = (0..3).map(|_| random_image(16, 16, &mut r)).collect();
    let mut lr = set(&hr);
    lr.remove("img1");
    let err = evaluate(&BTreeMap::new(), &lr, &set(&hr), &EvalParams::default()).unwrap_err();
    assert!(err.to_string().contains("img1"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ssim_symmetric_and_bounded(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let (a, b) = (random_image(20, 20, &mut r), random_image(20, 20, &mut r));
        let p = SsimParams::default();
        let (ab, ba) = (ssim(&a, &b, &p).unwrap(), ssim(&b, &a, &p).unwrap());
        prop_assert!((ab - ba).abs() < 1e-15);
        prop_assert!(ab.abs() <= 1.0);
    }

    #[test]
    fn ssim_scale_invariance(seed in 0u64..10_000, scale in 0.1f64..10.0) {
        let mut r = rng(seed);
        let (a, b) = (random_image(20, 20, &mut r), random_image(20, 20, &mut r));
        let p = SsimParams::default();
        let q = SsimParams { dynamic_range: scale, ..p };
        let base = ssim(&a, &b, &p).unwrap();
        let scaled = ssim(&a.map(|v| scale * v), &b.map(|v| scale * v), &q).unwrap();
        prop_assert!((base - scaled).abs() < 1e-9);
    }

    #[test]
    fn gcf_nonnegative(seed in 0u64..10_000) {
        let img = random_image(33, 29, &mut rng(seed));
        prop_assert!(gcf(&img, &GcfParams::default()).unwrap() >= 0.0);
    }

    #[test]
    fn tot_cs_extremes(s in proptest::collection::vec(0.0f64..1.0, 3..8), g in proptest::collection::vec(-1.0f64..1.0, 8)) {
        let mut rows: Vec<CompositeInput> = s.iter().zip(&g).enumerate().map(|(i, (&s, &g))| ci(&format!("m{i}"), s, g)).collect();
        let smax = s.iter().cloned().fold(f64::MIN, f64::max);
        let gmax = g.iter().cloned().fold(f64::MIN, f64::max);
        let smin = s.iter().cloned().fold(f64::MAX, f64::min);
        let gmin = g.iter().cloned().fold(f64::MAX, f64::min);
        rows.push(ci("best", smax + 0.1, gmax + 0.1));
        rows.push(ci("worst", smin - 0.1, gmin - 0.1));
        let t = tot_cs(&rows).unwrap();
        prop_assert_eq!(t[t.len() - 2], 1.0);
        prop_assert_eq!(t[t.len() - 1], 0.0);
        prop_assert!(t.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
