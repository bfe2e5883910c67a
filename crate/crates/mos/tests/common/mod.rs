#![allow(dead_code)]

use std::path::{Path, PathBuf};

use pcle_core::imagecore::save_image;
use pcle_core::Image;
use pcle_mos::{prepare_survey, Bundle, Key, SurveyInputs, SurveyOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const METHODS: [&str; 4] = ["srgan", "fsrcnn", "edsr", "sharpen"];

/// Six id-aligned directories of small distinct images. The method
/// directories carry one extra id each that is absent elsewhere.
pub fn fixture(root: &Path, n_ids: usize) -> SurveyInputs {
    let dir = |name: &str| {
        let d = root.join("src").join(name);
        std::fs::create_dir_all(&d).unwrap();
        d
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut write = |d: &Path, id: &str| {
        let img = Image::new(8, 8, (0..64).map(|_| rng.random::<f64>()).collect()).unwrap();
        save_image(&img, d.join(format!("{id}.png")), 8).unwrap();
    };
    let input = dir("input");
    let hr = dir("hr");
    let methods: Vec<(String, PathBuf)> = METHODS.iter().map(|m| (m.to_string(), dir(m))).collect();
    for k in 0..n_ids {
        let id = format!("frame{k:03}");
        write(&input, &id);
        write(&hr, &id);
        for (_, d) in &methods {
            write(d, &id);
        }
    }
    for (m, d) in &methods {
        write(d, &format!("only_{m}"));
    }
    SurveyInputs { input_dir: input, hr_dir: hr, methods }
}

pub fn bundle(root: &Path, n_ids: usize, opts: &SurveyOptions) -> (PathBuf, Bundle, Key, PathBuf) {
    let inputs = fixture(root, n_ids);
    let public = root.join("public");
    let key_path = root.join("private/key.json");
    let (b, k) = prepare_survey(&inputs, opts, &public, &key_path).unwrap();
    (public, b, k, key_path)
}

pub fn contains_method_name(text: &str) -> Option<&'static str> {
    let lower = text.to_ascii_lowercase();
    METHODS.iter().copied().find(|m| lower.contains(m))
}
