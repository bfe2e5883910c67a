//! Acceptance suite, criteria 1 to 11. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use pcle_core::baselines::{unsharp_sharpen, wiener_deconvolve, SharpenParams, WienerParams};
use pcle_core::dataset::{Split, SplitManifest};
use pcle_core::fibresim::*;
use pcle_core::imagecore::circular_fov;
use pcle_core::iqa::*;
use pcle_core::mosaic::synthetic::{random_walk_sequence, smooth_texture, WalkParams};
use pcle_core::mosaic::{backproject, build_mosaic, FrameSequence, MosaicParams};
use pcle_core::{Image, Mask};
use rand::Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Andrew's monotone chain, counter-clockwise.
fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Smallest signed distance from `q` to the hull edges; positive inside.
fn hull_depth(hull: &[(f64, f64)], q: (f64, f64)) -> f64 {
    (0..hull.len())
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
            let len = (b.0 - a.0).hypot(b.1 - a.1);
            ((b.0 - a.0) * (q.1 - a.1) - (b.1 - a.1) * (q.0 - a.0)) / len
        })
        .fold(f64::INFINITY, f64::min)
}

fn random_layout(r: &mut impl Rng, w: usize, h: usize, n: usize, fov: Mask) -> FibreLayout {
    loop {
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (r.random_range(0.0..(w - 1) as f64), r.random_range(0.0..(h - 1) as f64))).collect();
        if let Ok(l) = FibreLayout::from_positions(w, h, pts, fov.clone()) {
            return l;
        }
    }
}

fn c1_interpolation_exactness() -> Outcome {
    let mut r = rng(101);
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for k in 0..20 {
        let n = if k == 0 { 30 } else if k == 1 { 500 } else { r.random_range(30..=500) };
        let (w, h) = (r.random_range(48..=160), r.random_range(48..=160));
        let l = random_layout(&mut r, w, h, n, Mask::full(w, h));
        let (a, b, c): (f64, f64, f64) = (r.random_range(-1.0..1.0), r.random_range(-0.05..0.05), r.random_range(-0.05..0.05));
        let f = |x: f64, y: f64| a + b * x + c * y;
        let fs = FibreSignals { values: l.fibres().iter().map(|&(x, y)| f(x, y)).collect() };
        let out = reconstruct(&fs, &l).map_err(|e| e.to_string())?;
        let hull = convex_hull(l.fibres());
        for i in 0..w * h {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            let depth = hull_depth(&hull, (x, y));
            let covered = l.coverage(i).is_some();
            check!(!(depth > 1e-7 && !covered), "layout {k}: pixel ({x},{y}) inside the hull but not covered");
            check!(!(depth < -1e-7 && covered), "layout {k}: pixel ({x},{y}) outside the hull but covered");
            if covered {
                let e = (out.data()[i] - f(x, y)).abs();
                worst = worst.max(e);
                check!(e <= 1e-9, "layout {k} ({n} fibres): pixel ({x},{y}) off by {e:e}");
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} in-hull pixels over 20 layouts, max error {worst:.1e}"))
}

fn c2_voronoi_equivalence() -> Outcome {
    let mut r = rng(202);
    let mut layouts = Vec::new();
    for _ in 0..6 {
        let (w, h) = (r.random_range(32..=256), r.random_range(32..=256));
        let n = r.random_range(30..=200);
        layouts.push(random_layout(&mut r, w, h, n, Mask::full(w, h)));
    }
    let fov = circular_fov(256, 256, 0.0).map_err(|e| e.to_string())?;
    // Jitter-free lattice: many exact ties.
    let lattice = generate_layout(256, 256, &LatticeParams { spacing: 18.0, jitter: 0.0, seed: 0 }, &fov).map_err(|e| e.to_string())?;
    check!(lattice.len() <= 200, "lattice has {} fibres", lattice.len());
    layouts.push(lattice);
    let mut pixels = 0usize;
    for (k, l) in layouts.iter().enumerate() {
        let w = l.width();
        for i in 0..w * l.height() {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            match l.nearest_fibre(i) {
                None => check!(!l.fov().get(i % w, i / w), "layout {k}: in-FoV pixel ({x},{y}) has no cell"),
                Some(f) => {
                    let best = brute_nearest(l.fibres(), x, y);
                    check!(
                        dist2(l.fibres()[f], x, y) == dist2(l.fibres()[best], x, y),
                        "layout {k}: pixel ({x},{y}) assigned to fibre {f}, nearest is {best}"
                    );
                    pixels += 1;
                }
            }
        }
    }
    Ok(format!("{pixels} pixels over {} layouts, all nearest", layouts.len()))
}

fn c3_noise_statistics() -> Outcome {
    let n = 100_000;
    let mut r = rng(303);
    let fs = FibreSignals { values: (0..n).map(|_| r.random::<f64>()).collect() };
    let model = NoiseModel { seed: 304, ..NoiseModel::default() };
    check!(model.sigma_mult == 0.05 && model.sigma_add_rel == 0.01, "default sigmas {model:?}");
    let nfs = add_noise(&fs, &model).map_err(|e| e.to_string())?;
    let err: Vec<f64> = nfs.values.iter().zip(&fs.values).map(|(a, b)| a - b).collect();
    let (lo, hi) = fs.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let mean_sq = fs.values.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let sigma = (model.sigma_mult.powi(2) * mean_sq + (model.sigma_add_rel * (hi - lo)).powi(2)).sqrt();
    let (m, s) = mean_std(&err);
    let bound = 3.0 * sigma / (n as f64).sqrt();
    check!(m.abs() <= bound, "mean error {m:e} exceeds {bound:e}");
    check!((s / sigma - 1.0).abs() <= 0.05, "std {s} vs analytic {sigma}");
    let quiet = add_noise(&fs, &NoiseModel::noiseless()).map_err(|e| e.to_string())?;
    check!(quiet.values.iter().zip(&fs.values).all(|(a, b)| a.to_bits() == b.to_bits()), "zero-sigma output differs from input");
    Ok(format!("mean {m:.2e} (bound {bound:.2e}), std ratio {:.4}, zero-sigma identical", s / sigma))
}

fn c4_ssim_oracle() -> Outcome {
    let mut r = rng(404);
    let p = SsimParams::default();
    let mut worst = 0.0f64;
    for k in 0..50 {
        let (w, h) = (r.random_range(16..=64), r.random_range(16..=64));
        let a = random_image(w, h, &mut r);
        let mix: f64 = r.random();
        let noise = random_image(w, h, &mut r);
        let b = Image::from_fn(w, h, |x, y| mix * a.get(x, y) + (1.0 - mix) * noise.get(x, y));
        let got = ssim(&a, &b, &p).map_err(|e| e.to_string())?;
        let e = (got - ssim_default(&a, &b)).abs();
        worst = worst.max(e);
        check!(e <= 1e-6, "pair {k} ({w}x{h}) differs by {e:e}");
        check!(ssim(&a, &a, &p).map_err(|e| e.to_string())? == 1.0, "ssim(x, x) != 1 for pair {k}");
    }
    Ok(format!("50 pairs, max difference {worst:.1e}, ssim(x,x) = 1"))
}

fn c5_gcf_properties() -> Outcome {
    let p = GcfParams::default();
    let z = gcf(&Image::filled(64, 64, 0.37), &p).map_err(|e| e.to_string())?;
    check!(z == 0.0, "constant image GCF {z}");
    let v = [0.2, 0.7, 0.5, 0.9];
    let lum = |x: f64| 100.0 * x.powf(2.2).sqrt();
    let (a, b, c, d) = (lum(v[0]), lum(v[1]), lum(v[2]), lum(v[3]));
    let want = (((a - b).abs() + (a - c).abs()) / 2.0 + ((b - a).abs() + (b - d).abs()) / 2.0 + ((c - a).abs() + (c - d).abs()) / 2.0 + ((d - b).abs() + (d - c).abs()) / 2.0) / 4.0;
    let img = Image::new(2, 2, v.to_vec()).map_err(|e| e.to_string())?;
    let got = gcf(&img, &GcfParams::single_level()).map_err(|e| e.to_string())?;
    check!((got - want).abs() <= 1e-12, "2x2 GCF {got} vs hand value {want}");
    let corpus = corpus();
    let mut ups = 0;
    for (_, img) in corpus.iter().take(10) {
        let s = unsharp_sharpen(img, &SharpenParams::default()).map_err(|e| e.to_string())?;
        if delta_gcf(&s, img, &p).map_err(|e| e.to_string())? > 0.0 {
            ups += 1;
        }
    }
    check!(ups >= 9, "sharpening raised GCF on {ups}/10 images");
    Ok(format!("constant 0, 2x2 exact, sharpening raises GCF on {ups}/10"))
}

fn c6_degradation_sign() -> Outcome {
    let corpus = corpus();
    check!(corpus.len() == 20, "corpus has {} images", corpus.len());
    let fov = circular_fov(128, 128, 0.0).map_err(|e| e.to_string())?;
    let layout = generate_layout(128, 128, &LatticeParams::default(), &fov).map_err(|e| e.to_string())?;
    let (gp, sp) = (GcfParams::default(), SsimParams::default());
    let (mut dgcf, mut ssims) = (Vec::new(), Vec::new());
    for (k, (_, img)) in corpus.iter().enumerate() {
        let hr = img.clone().with_fov(fov.clone()).map_err(|e| e.to_string())?;
        let model = NoiseModel { seed: k as u64, ..NoiseModel::default() };
        let lr = simulate_lr(&hr, &layout, &model, ExtractionMode::VoronoiAverage).map_err(|e| e.to_string())?.image;
        dgcf.push(delta_gcf(&lr, &hr, &gp).map_err(|e| e.to_string())?);
        ssims.push(ssim(&lr, &hr, &sp).map_err(|e| e.to_string())?);
    }
    let (dm, ds) = mean_std(&dgcf);
    let (sm, ss) = mean_std(&ssims);
    let neg = dgcf.iter().filter(|&&d| d < 0.0).count();
    let p = sign_test_p(neg, dgcf.len());
    check!(dm < 0.0, "mean dGCF {dm}");
    check!(p < 0.05, "sign test p = {p} ({neg}/20 negative)");
    check!(sm > 0.5 && sm < 1.0, "mean SSIM {sm}");
    Ok(format!("dGCF {dm:.3}±{ds:.3} ({neg}/20 negative, p = {p:.1e}), SSIM {sm:.3}±{ss:.3}"))
}

fn c7_mosaicking() -> Outcome {
    let fov = circular_fov(64, 64, 0.0).map_err(|e| e.to_string())?;
    let p = SsimParams::default();
    let sources = registrable_sources();
    check!(sources.len() >= 5, "only {} registrable sources", sources.len());
    let mut worst = 0.0f64;
    let mut frames = 0;
    for (name, src) in &sources {
        for seed in 0..3 {
            let walk = WalkParams { frames: 8, frame_width: 64, frame_height: 64, step: 4.0, noise_sigma: 0.02, seed };
            let s = random_walk_sequence(src, &walk, Some(&fov)).map_err(|e| e.to_string())?;
            let (canvas, rep) = build_mosaic(&s.sequence, &MosaicParams::default()).map_err(|e| e.to_string())?;
            for (f, t) in rep.frames.iter().zip(&s.truth) {
                let e = (f.transform.dx - t.dx).hypot(f.transform.dy - t.dy);
                worst = worst.max(e);
                check!(e <= 0.5, "{name} seed {seed} frame {}: offset error {e:.3} px", f.frame);
            }
            for (i, hr) in backproject(&canvas, &s.sequence, &rep).map_err(|e| e.to_string())? {
                let before = ssim(&s.sequence.frames()[i], &s.clean[i], &p).map_err(|e| e.to_string())?;
                let after = ssim(&hr, &s.clean[i], &p).map_err(|e| e.to_string())?;
                check!(after > before, "{name} seed {seed} frame {i}: back-projected SSIM {after:.4} <= noisy {before:.4}");
                frames += 1;
            }
        }
    }
    let clean = smooth_texture(64, 64, 21);
    let sigma = 0.05;
    let mut ratios = Vec::new();
    for n in [4usize, 16] {
        let noise = Normal::new(0.0, sigma).map_err(|e| e.to_string())?;
        let seq: Vec<Image> = (0..n)
            .map(|k| {
                let mut r = rng(700 + k as u64);
                let mut f = clean.clone();
                f.data_mut().iter_mut().for_each(|v| *v += noise.sample(&mut r));
                f
            })
            .collect();
        let seq = FrameSequence::new("static", seq).map_err(|e| e.to_string())?;
        let (canvas, _) = build_mosaic(&seq, &MosaicParams::default()).map_err(|e| e.to_string())?;
        let fused = canvas.fused();
        let (ox, oy) = canvas.origin();
        let mut resid = Vec::new();
        for y in 8..56i64 {
            for x in 8..56i64 {
                resid.push(fused.get((x - ox) as usize, (y - oy) as usize) - clean.get(x as usize, y as usize));
            }
        }
        let ratio = mean_std(&resid).1 / (sigma / (n as f64).sqrt());
        check!((ratio - 1.0).abs() <= 0.2, "static N = {n}: noise ratio to 1/sqrt(N) is {ratio:.3}");
        ratios.push(ratio);
    }
    let names: Vec<&str> = sources.iter().map(|(n, _)| n.as_str()).collect();
    Ok(format!(
        "{} sources {names:?} x 3 walks, max offset error {worst:.3} px, SSIM gain on {frames}/{frames} frames, static ratios {:.3}/{:.3}",
        sources.len(),
        ratios[0],
        ratios[1]
    ))
}

fn c8_wiener_gain() -> Outcome {
    let p = SsimParams::default();
    let params = WienerParams::default();
    check!(params.psf_sigma == 2.0, "default PSF sigma {}", params.psf_sigma);
    let noise = Normal::new(0.0, 0.005).map_err(|e| e.to_string())?;
    let mut gains = Vec::new();
    for (k, (_, img)) in corpus().iter().take(10).enumerate() {
        let mut r = rng(800 + k as u64);
        let mut blurred = blur_direct(img, 2.0);
        blurred.data_mut().iter_mut().for_each(|v| *v += noise.sample(&mut r));
        let restored = wiener_deconvolve(&blurred, &params).map_err(|e| e.to_string())?;
        gains.push(ssim(&restored, img, &p).map_err(|e| e.to_string())? - ssim(&blurred, img, &p).map_err(|e| e.to_string())?);
    }
    let (m, s) = mean_std(&gains);
    check!(m >= 0.02, "mean SSIM gain {m:.4}");
    Ok(format!("mean SSIM gain {m:.4}±{s:.4} over 10 images"))
}

fn c9_tot_cs() -> Outcome {
    let row = |m: &str, s: f64, g: f64| CompositeInput { method: m.into(), ssim_vs_hr: s, dgcf_vs_lr: g };
    let t = tot_cs(&[row("low", 0.61, -0.3), row("mid", 0.72, 0.45), row("high", 0.83, 1.2)]).map_err(|e| e.to_string())?;
    check!(t == vec![0.0, 0.5, 1.0], "three-method scores {t:?}");
    // Off-centre middle method: average of its two min-max positions.
    let mut r = rng(909);
    for _ in 0..100 {
        let (s, g): (f64, f64) = (r.random(), r.random_range(-1.0..1.0));
        let t = tot_cs(&[row("a", 0.0, -1.0), row("b", s, g), row("c", 1.0, 1.0)]).map_err(|e| e.to_string())?;
        let want = (s + (g + 1.0) / 2.0) / 2.0;
        check!((t[1] - want).abs() <= 1e-12 && t[0] == 0.0 && t[2] == 1.0, "{t:?} vs middle {want}");
    }
    let mut r = rng(910);
    let hr: ImageSet = (0..4).map(|i| (format!("f{i}"), random_image(32, 32, &mut r))).collect();
    let lr: ImageSet = hr.iter().map(|(k, v)| (k.clone(), v.map(|x| 0.6 * x + 0.2))).collect();
    let sharp: ImageSet = lr.iter().map(|(k, v)| (k.clone(), unsharp_sharpen(v, &SharpenParams::default()).unwrap())).collect();
    let methods = BTreeMap::from([("sharpen".to_string(), sharp)]);
    let rep = evaluate(&methods, &lr, &hr, &EvalParams::default()).map_err(|e| e.to_string())?;
    let lr_row = rep.methods.iter().find(|m| m.method == LR_METHOD).ok_or("no LR row")?;
    check!(lr_row.dgcf_vs_lr.mean == 0.0 && lr_row.dgcf_vs_lr.std == 0.0, "LR row dGCF vs LR {:?}", lr_row.dgcf_vs_lr);
    Ok("dominated 0, middle 0.5, dominating 1, closed form on 100 cases, LR row 0±0".into())
}

fn pcle(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pcle")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("pcle {args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn file_hashes(dir: &Path) -> BTreeMap<String, String> {
    walkdir::WalkDir::new(dir)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file() && e.file_name() != "run.json")
        .map(|e| (e.path().strip_prefix(dir).unwrap().display().to_string(), pcle_core::provenance::hash_file(e.path()).unwrap()))
        .collect()
}

fn c10_determinism() -> Outcome {
    let d = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = d.path();
    let s = |p: &PathBuf| p.display().to_string();
    let hr = root.join("hr");
    fs::create_dir_all(&hr).map_err(|e| e.to_string())?;
    for n in ["camera", "coins", "brick"] {
        fs::copy(corpus_dir().join(format!("{n}.png")), hr.join(format!("{n}.png"))).map_err(|e| e.to_string())?;
    }
    let mut records = String::from("sequence_id,tissue_label,probe_id,frame_dir\n");
    for label in ["healthy", "lesion"] {
        for i in 0..119 {
            records.push_str(&format!("{label}-{i:04},{label},probe{},{label}-{i:04}\n", i % 3));
        }
    }
    let rec = root.join("records.csv");
    fs::write(&rec, records).map_err(|e| e.to_string())?;
    let frames = root.join("frames");
    fs::create_dir_all(&frames).map_err(|e| e.to_string())?;
    let src = &corpus().into_iter().find(|(n, _)| n == "coins").ok_or("coins missing")?.1;
    for (k, (dx, dy)) in [(0, 0), (3, 1), (5, 4)].into_iter().enumerate() {
        let f = src.crop(20 + dx, 20 + dy, 64, 64).map_err(|e| e.to_string())?;
        pcle_core::imagecore::save_image(&f, frames.join(format!("{k:03}.png")), 16).map_err(|e| e.to_string())?;
    }

    let sim = root.join("sim");
    let wiener = root.join("wiener");
    let eval = root.join("eval");
    let split = root.join("split");
    let mosaic = root.join("mosaic");
    let runs: Vec<(&str, &PathBuf, Vec<String>)> = vec![
        ("simulate", &sim, vec!["simulate".into(), "--hr".into(), s(&hr), "--out".into(), s(&sim), "--seed".into(), "11".into()]),
        ("wiener", &wiener, vec!["baseline".into(), "wiener".into(), "--input".into(), s(&sim.join("lr")), "--out".into(), s(&wiener)]),
        (
            "evaluate",
            &eval,
            vec!["evaluate".into(), "--hr".into(), s(&hr), "--lr".into(), s(&sim.join("lr")), "--method".into(), format!("wiener={}", wiener.display()), "--out".into(), s(&eval)],
        ),
        ("split", &split, vec!["dataset".into(), "split".into(), "--records".into(), s(&rec), "--seed".into(), "42".into(), "--out".into(), s(&split)]),
        ("mosaic", &mosaic, vec!["mosaic".into(), "--input".into(), s(&frames), "--out".into(), s(&mosaic)]),
    ];
    let mut files = 0;
    for (name, out, args) in &runs {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        pcle(&args)?;
        let again = root.join(format!("{name}-replay"));
        pcle(&["replay", &s(&out.join("run.json")), "--out", &s(&again)])?;
        let (a, b) = (file_hashes(out), file_hashes(&again));
        check!(!a.is_empty() && a == b, "{name}: replayed outputs differ");
        files += a.len();
    }

    let m = SplitManifest::read(&split.join("split.csv")).map_err(|e| e.to_string())?;
    let ids: BTreeSet<&str> = m.rows.iter().map(|r| r.sequence_id.as_str()).collect();
    check!(m.rows.len() == 238 && ids.len() == 238, "split has {} rows for {} sequences", m.rows.len(), ids.len());
    let counts = m.counts();
    for label in ["healthy", "lesion"] {
        for (sp, f) in Split::ALL.iter().zip([0.70, 0.15, 0.15]) {
            let n = counts.get(&(label.to_string(), *sp)).copied().unwrap_or(0);
            check!((n as f64 - f * 119.0).abs() <= 1.0, "{label} {sp:?}: {n} sequences");
        }
    }
    Ok(format!("5 commands replayed hash-identical ({files} files); split 238 sequences, per-label deviation <= 1"))
}

fn c11_paired_t() -> Outcome {
    // (n, shift, t, p) from scipy.stats.ttest_rel(b, a) on the same samples.
    let cases = [
        (10, 0.1, 1.035421318491878, 0.32749091841664746),
        (30, 0.25, 3.7949022314631367, 0.0006961387344038875),
        (100, 0.05, 1.5022622453189196, 0.1362124808308196),
        (12, 0.0, 0.38760192796553916, 0.7057056672325361),
        (50, -0.4, -7.651685267957497, 6.536160713232042e-10),
    ];
    let mut worst = 0.0f64;
    for (n, shift, t_ref, p_ref) in cases {
        let a: Vec<f64> = (0..n).map(|i| (i as f64 * 1.7).sin() + 0.3 * (i as f64 * 0.37).cos()).collect();
        let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v + shift + 0.5 * (i as f64 * 2.3 + 0.1).cos()).collect();
        let r = paired_t_test(&b, &a).map_err(|e| e.to_string())?;
        worst = worst.max((r.p_value - p_ref).abs());
        check!((r.t - t_ref).abs() <= 1e-9, "n {n}: t {} vs {t_ref}", r.t);
        check!((r.p_value - p_ref).abs() <= 1e-6, "n {n}: p {} vs {p_ref}", r.p_value);
    }
    Ok(format!("5 cases, max p difference {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 11] = [
        ("interpolation exactness", c1_interpolation_exactness, Some(Duration::from_secs(10))),
        ("voronoi oracle equivalence", c2_voronoi_equivalence, Some(Duration::from_secs(30))),
        ("noise model statistics", c3_noise_statistics, Some(Duration::from_secs(5))),
        ("ssim oracle", c4_ssim_oracle, None),
        ("gcf properties", c5_gcf_properties, None),
        ("degradation sign check", c6_degradation_sign, None),
        ("mosaicking recovery", c7_mosaicking, None),
        ("wiener restoration gain", c8_wiener_gain, None),
        ("tot_cs algebra", c9_tot_cs, None),
        ("determinism", c10_determinism, None),
        ("paired-t machinery", c11_paired_t, None),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let dt = t0.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(l)) if dt > *l => Err(format!("took {dt:.1?}, limit {l:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{dt:.1?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{dt:.1?}]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed in {:.1?}", criteria.len() - failed, criteria.len(), start.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
