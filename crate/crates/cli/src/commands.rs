use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use pcle_core::baselines::{unsharp_sharpen, wiener_deconvolve, SharpenParams, WienerParams};
use pcle_core::dataset::{build_pairs, load_records, stratified_split, Fractions, LrSource, SplitManifest};
use pcle_core::fibresim::{generate_layout, load_layout, simulate_lr, FibreLayout, LatticeParams, NoiseModel};
use pcle_core::imagecore::{circular_fov, load_image, save_image, BitDepthPolicy};
use pcle_core::iqa::{default_weight, evaluate, EvalParams, ImageSet};
use pcle_core::mosaic::{backproject, build_mosaic, filter_sequences, numbered_frames, write_outputs, FrameSequence, MosaicParams};
use pcle_core::provenance::{derive_seed, write_csv_with_header};
use pcle_core::{Image, Mask};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::*;

const IMAGE_EXTENSIONS: [&str; 2] = ["png", "pgm"];

fn is_image(p: &Path) -> bool {
    p.extension().and_then(|e| e.to_str()).is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Image files keyed by stem: the file itself, or every image directly in a directory.
pub fn list_images(path: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let files: Vec<PathBuf> = if path.is_file() {
        vec![path.to_path_buf()]
    } else {
        fs::read_dir(path)
            .with_context(|| format!("cannot list images in {}", path.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .filter(|p| p.is_file() && is_image(p))
            .collect()
    };
    let mut out = BTreeMap::new();
    for p in files {
        let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        if let Some(prev) = out.insert(id.clone(), p.clone()) {
            bail!("image id `{id}` appears twice: {} and {}", prev.display(), p.display());
        }
    }
    ensure!(!out.is_empty(), "no PNG or PGM images found at {}", path.display());
    Ok(out)
}

fn fov_mask(kind: FovKind, margin: f64, w: usize, h: usize) -> Result<Mask> {
    Ok(match kind {
        FovKind::Full => Mask::full(w, h),
        FovKind::Circular => circular_fov(w, h, margin)?,
    })
}

fn load_with_fov(path: &Path, kind: FovKind, margin: f64) -> Result<Image> {
    let mut img = load_image(path, BitDepthPolicy::default())?;
    if kind == FovKind::Circular {
        img.set_fov(Some(fov_mask(kind, margin, img.width(), img.height())?))?;
    }
    Ok(img)
}

fn load_set(dir: &Path, kind: FovKind, margin: f64) -> Result<ImageSet> {
    let files = list_images(dir)?;
    let loaded: Vec<(String, Result<Image>)> = files.into_par_iter().map(|(id, p)| (id, load_with_fov(&p, kind, margin))).collect();
    loaded.into_iter().map(|(id, r)| Ok((id, r?))).collect()
}

fn parse_method(s: &str) -> Result<(String, PathBuf)> {
    match s.split_once('=') {
        Some((name, dir)) if !name.is_empty() && !dir.is_empty() => Ok((name.to_string(), PathBuf::from(dir))),
        _ => bail!("--method expects NAME=DIR, got `{s}`"),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

impl LayoutArgs {
    fn noise(&self, seed: u64) -> Result<NoiseModel> {
        let n = NoiseModel { sigma_mult: self.sigma_mult, sigma_add_rel: self.sigma_add_rel, seed };
        n.validate()?;
        Ok(n)
    }

    fn build(&self, w: usize, h: usize, seed: u64) -> Result<FibreLayout> {
        let fov = fov_mask(self.fov, self.fov_margin, w, h)?;
        Ok(match &self.layout {
            Some(p) => load_layout(p, w, h, &fov)?,
            None => {
                let params = LatticeParams { spacing: self.layout_spacing, jitter: self.layout_jitter, seed: self.layout_seed.unwrap_or(seed) };
                generate_layout(w, h, &params, &fov)?
            }
        })
    }
}

#[derive(Serialize)]
struct SimRow {
    image_id: String,
    width: usize,
    height: usize,
    layout_hash: String,
    noise_seed: u64,
    clamped: usize,
}

pub fn simulate(a: &SimulateArgs) -> Result<Vec<PathBuf>> {
    let files = list_images(&a.hr)?;
    let noise = a.layout.noise(a.seed)?;
    let hr: Vec<(String, Image)> = files
        .into_par_iter()
        .map(|(id, p)| Ok((id, load_image(&p, BitDepthPolicy::default())?)))
        .collect::<Result<_>>()?;
    let sizes: BTreeSet<(usize, usize)> = hr.iter().map(|(_, i)| (i.width(), i.height())).collect();
    let mut layouts = BTreeMap::new();
    for &(w, h) in &sizes {
        layouts.insert((w, h), a.layout.build(w, h, a.seed).with_context(|| format!("building the {w}x{h} fibre layout"))?);
    }

    let lr_dir = a.out.join("lr");
    create_dir(&lr_dir)?;
    let sims: Vec<(String, Result<Image>, u64)> = hr
        .into_par_iter()
        .map(|(id, mut img)| {
            let layout = &layouts[&(img.width(), img.height())];
            let model = NoiseModel { seed: derive_seed(a.seed, &id), ..noise };
            let r = img
                .set_fov(Some(layout.fov().clone()))
                .and_then(|_| simulate_lr(&img, layout, &model, a.layout.mode.into()))
                .map(|s| s.image)
                .map_err(anyhow::Error::from);
            (id, r, model.seed)
        })
        .collect();

    let mut written = Vec::new();
    let mut rows = Vec::new();
    for (id, r, noise_seed) in sims {
        let img = r.with_context(|| format!("simulating `{id}`"))?;
        let p = lr_dir.join(format!("{id}.png"));
        let rep = save_image(&img, &p, 16)?;
        let layout = &layouts[&(img.width(), img.height())];
        rows.push(SimRow { image_id: id, width: img.width(), height: img.height(), layout_hash: layout.hash(), noise_seed, clamped: rep.clamped });
        written.push(p);
    }
    for ((w, h), layout) in &layouts {
        let name = if layouts.len() == 1 { "layout.csv".to_string() } else { format!("layout_{w}x{h}.csv") };
        let p = a.out.join(name);
        layout.save(&p)?;
        written.push(p);
    }
    let p = a.out.join("simulation.csv");
    let header = serde_json::json!({ "noise": noise, "mode": a.layout.mode });
    write_csv_with_header(&p, &header, &["image_id", "width", "height", "layout_hash", "noise_seed", "clamped"], &rows)?;
    written.push(p);
    Ok(written)
}

fn sequence_dirs(input: &Path) -> Result<Vec<(String, PathBuf)>> {
    ensure!(input.is_dir(), "{} is not a directory", input.display());
    if !numbered_frames(input)?.is_empty() {
        let id = input.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "sequence".into());
        return Ok(vec![(id, input.to_path_buf())]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(input)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<Vec<_>>>()?;
    dirs.retain(|p| p.is_dir());
    dirs.sort();
    let mut out = Vec::new();
    for d in dirs {
        if !numbered_frames(&d)?.is_empty() {
            out.push((d.file_name().unwrap_or_default().to_string_lossy().into_owned(), d));
        }
    }
    ensure!(!out.is_empty(), "no frame sequences found under {}", input.display());
    Ok(out)
}

pub fn mosaic(a: &MosaicArgs) -> Result<Vec<PathBuf>> {
    let mut params = MosaicParams::default();
    let r = &mut params.registration;
    r.taper = a.taper.unwrap_or(r.taper);
    r.peak_sigma = a.peak_sigma.unwrap_or(r.peak_sigma);
    r.refine_iterations = a.refine_iterations.unwrap_or(r.refine_iterations);
    r.refine_whitening = a.refine_whitening.unwrap_or(r.refine_whitening);
    r.polish_iterations = a.polish_iterations.unwrap_or(r.polish_iterations);
    params.max_frame_residual = a.max_frame_residual;
    params.registration.validate()?;

    let seqs = sequence_dirs(&a.input)?;
    let results: Vec<_> = seqs
        .par_iter()
        .map(|(id, dir)| -> Result<_> {
            let first = numbered_frames(dir)?.remove(0);
            let probe = load_image(&first, BitDepthPolicy::default())?;
            let fov = match a.fov {
                FovKind::Full => None,
                k => Some(fov_mask(k, a.fov_margin, probe.width(), probe.height())?),
            };
            let seq = FrameSequence::load_dir(dir, id, fov.as_ref(), BitDepthPolicy::default())?;
            let (canvas, report) = build_mosaic(&seq, &params)?;
            let hr = backproject(&canvas, &seq, &report)?;
            Ok((canvas, report, hr))
        })
        .collect();
    let mut done = Vec::new();
    for ((id, _), r) in seqs.iter().zip(results) {
        done.push(r.with_context(|| format!("sequence `{id}`"))?);
    }
    let reports: Vec<_> = done.iter().map(|(_, r, _)| r.clone()).collect();
    let filter = filter_sequences(&reports, a.max_sequence_residual.unwrap_or(f64::INFINITY));

    create_dir(&a.out)?;
    let mut written = Vec::new();
    for ((id, _), (canvas, report, hr)) in seqs.iter().zip(&done) {
        if !filter.accepted.contains(id) {
            log::warn!("sequence `{id}` rejected: median residual {:.4}", report.median_residual());
            continue;
        }
        let header = serde_json::json!({ "sequence_id": id, "params": params });
        written.extend(write_outputs(&a.out.join(id), canvas, report, hr, &header)?);
    }
    let p = a.out.join("sequences.csv");
    let header = serde_json::json!({ "params": params, "max_sequence_residual": a.max_sequence_residual });
    write_csv_with_header(&p, &header, &["sequence_id", "median_residual", "accepted_frames", "rejected_frames", "accepted"], &filter.diagnostics)?;
    written.push(p);
    Ok(written)
}

fn eval_params(m: &MetricArgs) -> Result<EvalParams> {
    let mut p = EvalParams::default();
    let s = &mut p.ssim;
    s.window = m.ssim_window.unwrap_or(s.window);
    s.sigma = m.ssim_sigma.unwrap_or(s.sigma);
    s.k1 = m.ssim_k1.unwrap_or(s.k1);
    s.k2 = m.ssim_k2.unwrap_or(s.k2);
    s.dynamic_range = m.dynamic_range.unwrap_or(s.dynamic_range);
    p.gcf.gamma = m.gcf_gamma.unwrap_or(p.gcf.gamma);
    if let Some(f) = &m.gcf_factors {
        p.gcf.weights = (1..=f.len()).map(default_weight).collect();
        p.gcf.factors = f.clone();
    }
    if let Some(w) = &m.gcf_weights {
        p.gcf.weights = w.clone();
    }
    p.ssim.validate()?;
    p.gcf.validate()?;
    Ok(p)
}

pub fn evaluate_cmd(a: &EvaluateArgs) -> Result<Vec<PathBuf>> {
    let params = eval_params(&a.metrics)?;
    let hr = load_set(&a.hr, a.fov, a.fov_margin).context("loading HR images")?;
    let lr = load_set(&a.lr, a.fov, a.fov_margin).context("loading LR images")?;
    let mut methods = BTreeMap::new();
    for m in &a.methods {
        let (name, dir) = parse_method(m)?;
        let set = load_set(&dir, a.fov, a.fov_margin).with_context(|| format!("loading method `{name}`"))?;
        ensure!(methods.insert(name.clone(), set).is_none(), "method `{name}` given twice");
    }
    let report = evaluate(&methods, &lr, &hr, &params)?;
    report.write(&a.out)?;
    Ok(["images.csv", "aggregate.csv", "table.csv"].iter().map(|f| a.out.join(f)).collect())
}

fn map_images(input: &Path, out: &Path, f: impl Fn(&Image) -> pcle_core::Result<Image> + Sync) -> Result<Vec<PathBuf>> {
    let files = list_images(input)?;
    create_dir(out)?;
    let results: Vec<(PathBuf, Result<Image>)> = files
        .into_par_iter()
        .map(|(id, p)| {
            let r = load_image(&p, BitDepthPolicy::default()).and_then(|img| f(&img)).map_err(anyhow::Error::from);
            (out.join(format!("{id}.png")), r.with_context(|| format!("processing {}", p.display())))
        })
        .collect();
    let mut written = Vec::new();
    for (p, r) in results {
        save_image(&r?, &p, 16)?;
        written.push(p);
    }
    Ok(written)
}

pub fn wiener(a: &WienerArgs) -> Result<Vec<PathBuf>> {
    let params = WienerParams { psf_sigma: a.psf_sigma, nsr: a.nsr, psf_support: a.psf_support, boundary: a.boundary.into() };
    params.validate()?;
    map_images(&a.input, &a.out, |img| wiener_deconvolve(img, &params))
}

pub fn sharpen(a: &SharpenArgs) -> Result<Vec<PathBuf>> {
    let params = SharpenParams { radius: a.radius, amount: a.amount, clamp: !a.no_clamp };
    params.validate()?;
    map_images(&a.input, &a.out, |img| unsharp_sharpen(img, &params))
}

pub fn split(a: &SplitArgs) -> Result<Vec<PathBuf>> {
    ensure!(a.fractions.len() == 3, "--fractions needs three values (train,validation,test), got {}", a.fractions.len());
    let fractions = Fractions([a.fractions[0], a.fractions[1], a.fractions[2]]);
    fractions.validate()?;
    let vocab: Option<Vec<&str>> = a.labels.as_ref().map(|v| v.iter().map(String::as_str).collect());
    let records = load_records(&a.records, vocab.as_deref())?;
    let m = stratified_split(&records, fractions, a.seed)?;
    create_dir(&a.out)?;
    let p = a.out.join("split.csv");
    m.write(&p)?;
    for ((label, s), n) in m.counts() {
        log::info!("{label} {s}: {n}");
    }
    Ok(vec![p])
}

pub fn pairs(a: &PairsArgs) -> Result<Vec<PathBuf>> {
    let records = load_records(&a.records, None)?;
    let split = SplitManifest::read(&a.split)?;
    create_dir(&a.out)?;
    let lr_out = a.out.join("lr");
    let manifest = match &a.lr_root {
        Some(root) => build_pairs(&split, &records, &a.hr_root, LrSource::Org { root })?,
        None => {
            let first = records
                .iter()
                .find_map(|r| numbered_frames(&a.hr_root.join(&r.frame_dir)).ok().and_then(|f| f.into_iter().next()))
                .context("no HR frame found to size the fibre layout")?;
            let probe = load_image(&first, BitDepthPolicy::default())?;
            let layout = a.layout.build(probe.width(), probe.height(), a.seed)?;
            let noise = a.layout.noise(a.seed)?;
            build_pairs(&split, &records, &a.hr_root, LrSource::Syn { layout: &layout, noise, mode: a.layout.mode.into(), out_root: &lr_out })?
        }
    };
    let p = a.out.join("pairs.csv");
    manifest.write(&p)?;
    let mut written = vec![p];
    if a.lr_root.is_none() {
        written.extend(manifest.rows.iter().map(|r| lr_out.join(&r.lr_path)));
    }
    if !manifest.header.skipped.is_empty() {
        log::warn!("{} frames skipped, see the pairs.csv header", manifest.header.skipped.len());
    }
    Ok(written)
}

pub fn survey_prep(a: &PrepArgs) -> Result<Vec<PathBuf>> {
    let methods = a.methods.iter().map(|m| parse_method(m)).collect::<Result<Vec<_>>>()?;
    let inputs = pcle_mos::SurveyInputs { input_dir: a.input.clone(), hr_dir: a.hr.clone(), methods };
    let opts = pcle_mos::SurveyOptions { n_cases: a.n_cases, seed: a.seed, raters: a.raters.clone(), cases_per_rater: a.cases_per_rater };
    let public = a.out.join("public");
    let key = a.out.join("private").join("key.json");
    create_dir(&public)?;
    pcle_mos::prepare_survey(&inputs, &opts, &public, &key)?;
    let mut written: Vec<PathBuf> = walkdir::WalkDir::new(&public)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    written.push(key);
    Ok(written)
}

pub fn survey_export(a: &ExportArgs) -> Result<Vec<PathBuf>> {
    let key = pcle_mos::Key::read(&a.key)?;
    let out = pcle_mos::export_mos(&a.log, &key)?;
    let header = serde_json::json!({ "methods": key.methods, "std": "population", "records": "latest per rater, case and candidate" });
    out.write(&a.out, &header)?;
    Ok(vec![a.out.join("mos.csv"), a.out.join("raters.csv")])
}

pub fn serve(a: &ServeArgs) -> Result<()> {
    let state = std::sync::Arc::new(pcle_mos::AppState::open(&a.bundle, &a.log)?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(pcle_mos::serve(a.addr, state, a.static_dir.clone())).with_context(|| format!("serving on {}", a.addr))
}
