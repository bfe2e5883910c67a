//! Independent reference implementations used by the integration tests and
//! the acceptance suite. Written directly from the definitions, without
//! sharing code with the library.
#![allow(dead_code)]

use std::path::PathBuf;

use pcle_core::imagecore::{load_image, BitDepthPolicy};
use pcle_core::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Public-domain grayscale test images, 128x128.
pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/corpus")
}

pub fn corpus() -> Vec<(String, Image)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, load_image(&p, BitDepthPolicy::Require8).unwrap())
        })
        .collect()
}

pub fn random_image(w: usize, h: usize, rng: &mut impl Rng) -> Image {
    let data = (0..w * h).map(|_| rng.random::<f64>()).collect();
    Image::new(w, h, data).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Index of the closest point by exhaustive search; ties go to the lowest index.
pub fn brute_nearest(points: &[(f64, f64)], x: f64, y: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &(px, py)) in points.iter().enumerate() {
        let d = (px - x).powi(2) + (py - y).powi(2);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

pub fn dist2(p: (f64, f64), x: f64, y: f64) -> f64 {
    (p.0 - x).powi(2) + (p.1 - y).powi(2)
}

/// Barycentric coordinates from signed sub-triangle areas.
pub fn area_weights(a: (f64, f64), b: (f64, f64), c: (f64, f64), p: (f64, f64)) -> [f64; 3] {
    let cross = |o: (f64, f64), u: (f64, f64), v: (f64, f64)| (u.0 - o.0) * (v.1 - o.1) - (u.1 - o.1) * (v.0 - o.0);
    let total = cross(a, b, c);
    [cross(p, b, c) / total, cross(a, p, c) / total, cross(a, b, p) / total]
}

/// Piecewise-linear interpolation at `p` by scanning every triangle.
pub fn interpolate_scan(points: &[(f64, f64)], tris: &[[usize; 3]], values: &[f64], p: (f64, f64)) -> Option<f64> {
    for t in tris {
        let w = area_weights(points[t[0]], points[t[1]], points[t[2]], p);
        if w.iter().all(|&l| l >= -1e-9) {
            return Some(w[0] * values[t[0]] + w[1] * values[t[1]] + w[2] * values[t[2]]);
        }
    }
    None
}

/// SSIM by explicit 2-D Gaussian window sums at every window position whose
/// footprint lies inside both FoVs.
pub fn ssim_direct(a: &Image, b: &Image, window: usize, sigma: f64, k1: f64, k2: f64, l: f64) -> f64 {
    let (w, h) = (a.width(), a.height());
    let r = (window / 2) as isize;
    let mut kernel = vec![0.0; window * window];
    for j in 0..window {
        for i in 0..window {
            let (dx, dy) = (i as f64 - r as f64, j as f64 - r as f64);
            kernel[j * window + i] = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
        }
    }
    let s: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= s);
    let c1 = (k1 * l).powi(2);
    let c2 = (k2 * l).powi(2);
    let (mut total, mut count) = (0.0, 0usize);
    for y0 in 0..=h - window {
        'win: for x0 in 0..=w - window {
            for j in 0..window {
                for i in 0..window {
                    if !(a.in_fov(x0 + i, y0 + j) && b.in_fov(x0 + i, y0 + j)) {
                        continue 'win;
                    }
                }
            }
            let (mut ma, mut mb) = (0.0, 0.0);
            for j in 0..window {
                for i in 0..window {
                    let k = kernel[j * window + i];
                    ma += k * a.get(x0 + i, y0 + j);
                    mb += k * b.get(x0 + i, y0 + j);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for j in 0..window {
                for i in 0..window {
                    let k = kernel[j * window + i];
                    let (da, db) = (a.get(x0 + i, y0 + j) - ma, b.get(x0 + i, y0 + j) - mb);
                    va += k * da * da;
                    vb += k * db * db;
                    cov += k * da * db;
                }
            }
            total += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}

pub fn ssim_default(a: &Image, b: &Image) -> f64 {
    ssim_direct(a, b, 11, 1.5, 0.01, 0.03, 1.0)
}

/// Gaussian blur by direct 2-D convolution with mirrored (edge-inclusive) borders.
pub fn blur_direct(img: &Image, sigma: f64) -> Image {
    let r = (3.0 * sigma).ceil() as isize;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let refl = |i: isize, n: isize| {
        let p = 2 * n;
        let m = i.rem_euclid(p);
        if m < n { m } else { p - 1 - m }
    };
    let mut norm = 0.0;
    for j in -r..=r {
        for i in -r..=r {
            norm += (-((i * i + j * j) as f64) / (2.0 * sigma * sigma)).exp();
        }
    }
    Image::from_fn(img.width(), img.height(), |x, y| {
        let mut acc = 0.0;
        for j in -r..=r {
            for i in -r..=r {
                let k = (-((i * i + j * j) as f64) / (2.0 * sigma * sigma)).exp();
                acc += k * img.get(refl(x as isize + i, w) as usize, refl(y as isize + j, h) as usize);
            }
        }
        acc / norm
    })
}

/// Sample mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

/// Two-sided exact sign-test p-value for `k` positives out of `n`.
pub fn sign_test_p(k: usize, n: usize) -> f64 {
    let binom = |n: usize, k: usize| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    let tail = |k0: usize| (k0..=n).map(|i| binom(n, i)).sum::<f64>() / 2f64.powi(n as i32);
    let extreme = k.max(n - k);
    (2.0 * tail(extreme)).min(1.0)
}

/// Cramer-Rao bound (px, worst axis) on a translation between two frames of
/// `area` pixels drawn from `img`, with independent noise `sigma` in each.
pub fn translation_crb(img: &Image, sigma: f64, area: f64) -> f64 {
    let (w, h) = (img.width(), img.height());
    let (mut gx, mut gy, mut n) = (0.0, 0.0, 0.0);
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            gx += ((img.get(x + 1, y) - img.get(x - 1, y)) / 2.0).powi(2);
            gy += ((img.get(x, y + 1) - img.get(x, y - 1)) / 2.0).powi(2);
            n += 1.0;
        }
    }
    let g = gx.min(gy) / n;
    (2.0 * sigma * sigma / (area * g)).sqrt()
}

/// Corpus images band-limited to roughly the resolution of a fibre bundle
/// (Gaussian, sigma 1 px), keeping those with in-image std of at least 0.1.
pub fn mosaic_sources() -> Vec<(String, Image)> {
    corpus()
        .into_iter()
        .map(|(n, img)| (n, blur_direct(&img, 1.0)))
        .filter(|(_, img)| mean_std(img.data()).1 >= 0.1)
        .collect()
}

/// Mosaic sources with enough texture to register 64 px circular frames at
/// noise 0.02: per-step bound at most 0.025 px.
pub fn registrable_sources() -> Vec<(String, Image)> {
    let area = std::f64::consts::PI * 32.0 * 32.0;
    mosaic_sources().into_iter().filter(|(_, img)| translation_crb(img, 0.02, area) <= 0.025).collect()
}
