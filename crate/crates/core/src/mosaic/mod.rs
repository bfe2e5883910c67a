//! Pseudo ground truth from frame sequences: chained translation
//! registration, temporal fusion on a shared canvas, and back-projection of
//! the fused canvas into every frame.

mod register;
pub mod synthetic;

pub use register::{estimate_translation, RegistrationParams};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::imagecore::{load_image, save_image, BitDepthPolicy, Image, Mask};
use crate::provenance::write_csv_with_header;
use crate::{Error, Result};

/// Frame-to-canvas translation: frame pixel `q` lands at `q + (dx, dy)` in
/// frame-0 coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidTransform {
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone)]
pub struct FrameSequence {
    id: String,
    frames: Vec<Image>,
}

impl FrameSequence {
    pub fn new(id: impl Into<String>, frames: Vec<Image>) -> Result<Self> {
        let id = id.into();
        if frames.len() < 2 {
            return Err(Error::InvalidParameter(format!("sequence `{id}` needs at least 2 frames, got {}", frames.len())));
        }
        for (i, f) in frames.iter().enumerate().skip(1) {
            if !f.same_shape(&frames[0]) || f.fov() != frames[0].fov() {
                return Err(Error::Dimensions(format!("sequence `{id}`: frame {i} differs in size or FoV from frame 0")));
            }
        }
        Ok(Self { id, frames })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Loads every PNG/PGM file in `dir`, ordered by the number embedded in
    /// the file name (`frame_2` before `frame_10`).
    pub fn load_dir(dir: &Path, id: &str, fov: Option<&Mask>, policy: BitDepthPolicy) -> Result<Self> {
        let paths = numbered_frames(dir)?;
        let mut frames = Vec::with_capacity(paths.len());
        for p in &paths {
            let mut img = load_image(p, policy)?;
            if let Some(m) = fov {
                img.set_fov(Some(m.clone()))?;
            }
            frames.push(img);
        }
        Self::new(id, frames)
    }
}

fn frame_number(p: &Path) -> Option<u64> {
    let stem = p.file_stem()?.to_str()?;
    let digits: String = stem
        .chars()
        .rev()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits.parse().ok()
}

/// Image files in `dir` sorted by the last run of digits in their stem.
pub fn numbered_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|source| Error::Read { path: dir.to_path_buf(), source })?;
    let mut out = Vec::new();
    for entry in rd {
        let p = entry.map_err(|source| Error::Read { path: dir.to_path_buf(), source })?.path();
        let ext = p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !matches!(ext.as_deref(), Some("png" | "pgm")) {
            continue;
        }
        let n = frame_number(&p).ok_or_else(|| Error::Format { path: p.clone(), reason: "frame file name carries no number".into() })?;
        out.push((n, p));
    }
    out.sort();
    for w in out.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Format { path: w[1].1.clone(), reason: format!("frame number {} appears twice", w[0].0) });
        }
    }
    Ok(out.into_iter().map(|(_, p)| p).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRegistration {
    pub frame: usize,
    pub transform: RigidTransform,
    /// RMS intensity difference against the previous accepted frame over
    /// the aligned overlap. 0 for the anchor, NaN when registration failed.
    pub residual: f64,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationReport {
    pub sequence_id: String,
    pub frames: Vec<FrameRegistration>,
}

#[derive(Serialize)]
struct ReportRow {
    frame: usize,
    dx: f64,
    dy: f64,
    residual: f64,
    accepted: bool,
}

impl RegistrationReport {
    pub fn accepted(&self) -> impl Iterator<Item = &FrameRegistration> {
        self.frames.iter().filter(|f| f.accepted)
    }

    /// Median residual over registered (non-anchor, accepted) frames; 0 when
    /// there are none.
    pub fn median_residual(&self) -> f64 {
        let mut r: Vec<f64> = self.frames.iter().skip(1).filter(|f| f.accepted).map(|f| f.residual).collect();
        median(&mut r).unwrap_or(0.0)
    }

    pub fn write_csv(&self, path: &Path, header: &serde_json::Value) -> Result<()> {
        let rows: Vec<ReportRow> = self
            .frames
            .iter()
            .map(|f| ReportRow { frame: f.frame, dx: f.transform.dx, dy: f.transform.dy, residual: f.residual, accepted: f.accepted })
            .collect();
        write_csv_with_header(path, header, &["frame", "dx", "dy", "residual", "accepted"], &rows)
    }
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MosaicParams {
    pub registration: RegistrationParams,
    /// Frames whose residual exceeds this are rejected from fusion.
    #[serde(default)]
    pub max_frame_residual: Option<f64>,
}

/// Weighted fusion accumulator. Canvas pixel `(0, 0)` sits at `origin` in
/// frame-0 coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MosaicCanvas {
    width: usize,
    height: usize,
    origin: (i64, i64),
    sum: Vec<f64>,
    weight: Vec<f64>,
}

impl MosaicCanvas {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin(&self) -> (i64, i64) {
        self.origin
    }

    pub fn sum(&self) -> &[f64] {
        &self.sum
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    /// `sum / weight` where weight > 0, with that region as FoV; 0 elsewhere.
    pub fn fused(&self) -> Image {
        let data = self.sum.iter().zip(&self.weight).map(|(&s, &w)| if w > 0.0 { s / w } else { 0.0 }).collect();
        let mask = Mask::new(self.width, self.height, self.weight.iter().map(|&w| w > 0.0).collect()).expect("congruent");
        Image::new(self.width, self.height, data).and_then(|i| i.with_fov(mask)).expect("congruent")
    }

    pub fn weight_image(&self) -> Image {
        Image::new(self.width, self.height, self.weight.clone()).expect("congruent")
    }

    fn splat(&mut self, frame: &Image, t: RigidTransform) {
        let (ox, oy) = (t.dx - self.origin.0 as f64, t.dy - self.origin.1 as f64);
        for y in 0..frame.height() {
            for x in 0..frame.width() {
                if !frame.in_fov(x, y) {
                    continue;
                }
                let v = frame.get(x, y);
                let (cx, cy) = (x as f64 + ox, y as f64 + oy);
                for (px, py, w) in bilinear(cx, cy) {
                    if w > 0.0 && px >= 0 && py >= 0 && (px as usize) < self.width && (py as usize) < self.height {
                        let i = py as usize * self.width + px as usize;
                        self.sum[i] += w * v;
                        self.weight[i] += w;
                    }
                }
            }
        }
    }
}

fn bilinear(x: f64, y: f64) -> [(i64, i64, f64); 4] {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as i64, y0 as i64);
    [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1, y0, fx * (1.0 - fy)),
        (x0, y0 + 1, (1.0 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ]
}

/// RMS of `moving(q) - fixed(q - d)` over moving in-FoV pixels whose four
/// bilinear taps in `fixed` are all in its FoV.
fn overlap_residual(fixed: &Image, moving: &Image, d: RigidTransform) -> Option<f64> {
    let (w, h) = (fixed.width() as i64, fixed.height() as i64);
    let (mut ss, mut n) = (0.0, 0usize);
    for y in 0..moving.height() {
        for x in 0..moving.width() {
            if !moving.in_fov(x, y) {
                continue;
            }
            let mut acc = 0.0;
            let mut ok = true;
            for (px, py, wt) in bilinear(x as f64 - d.dx, y as f64 - d.dy) {
                if wt == 0.0 {
                    continue;
                }
                if px < 0 || py < 0 || px >= w || py >= h || !fixed.in_fov(px as usize, py as usize) {
                    ok = false;
                    break;
                }
                acc += wt * fixed.get(px as usize, py as usize);
            }
            if ok {
                ss += (moving.get(x, y) - acc).powi(2);
                n += 1;
            }
        }
    }
    (n > 0).then(|| (ss / n as f64).sqrt())
}

/// Registers each frame to the previous accepted one, composes the
/// translations and fuses accepted frames on a canvas in index order.
pub fn build_mosaic(seq: &FrameSequence, params: &MosaicParams) -> Result<(MosaicCanvas, RegistrationReport)> {
    params.registration.validate()?;
    let frames = seq.frames();
    let mut regs = vec![FrameRegistration { frame: 0, transform: RigidTransform::default(), residual: 0.0, accepted: true, error: None }];
    let mut last = 0usize;
    for i in 1..frames.len() {
        let outcome = estimate_translation(&frames[last], &frames[i], &params.registration).and_then(|d| {
            let r = overlap_residual(&frames[last], &frames[i], d)
                .ok_or_else(|| Error::Degenerate(format!("frame {i} has no overlap with frame {last}")))?;
            Ok((d, r))
        });
        let prev = regs[last].transform;
        let reg = match outcome {
            Ok((d, r)) => {
                let transform = RigidTransform { dx: prev.dx - d.dx, dy: prev.dy - d.dy };
                match params.max_frame_residual {
                    Some(max) if r > max => FrameRegistration {
                        frame: i,
                        transform,
                        residual: r,
                        accepted: false,
                        error: Some(format!("residual {r:.4} above {max}")),
                    },
                    _ => FrameRegistration { frame: i, transform, residual: r, accepted: true, error: None },
                }
            }
            Err(e) => {
                log::warn!("sequence `{}`: frame {i} rejected: {e}", seq.id());
                FrameRegistration { frame: i, transform: prev, residual: f64::NAN, accepted: false, error: Some(e.to_string()) }
            }
        };
        if reg.accepted {
            last = i;
        }
        regs.push(reg);
    }
    let report = RegistrationReport { sequence_id: seq.id().to_string(), frames: regs };

    let (w, h) = (frames[0].width() as f64, frames[0].height() as f64);
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for r in report.accepted() {
        x0 = x0.min(r.transform.dx);
        y0 = y0.min(r.transform.dy);
        x1 = x1.max(r.transform.dx);
        y1 = y1.max(r.transform.dy);
    }
    let origin = (x0.floor() as i64, y0.floor() as i64);
    let width = (w + x1.ceil() - origin.0 as f64) as usize;
    let height = (h + y1.ceil() - origin.1 as f64) as usize;
    let mut canvas = MosaicCanvas { width, height, origin, sum: vec![0.0; width * height], weight: vec![0.0; width * height] };
    for r in report.accepted() {
        canvas.splat(&frames[r.frame], r.transform);
    }
    Ok((canvas, report))
}

/// One pseudo-HR image per accepted frame, sampled bilinearly from the fused
/// canvas. Taps without canvas weight are dropped and the rest renormalized;
/// a pixel with no usable tap keeps the input value.
pub fn backproject(canvas: &MosaicCanvas, seq: &FrameSequence, report: &RegistrationReport) -> Result<Vec<(usize, Image)>> {
    if report.frames.len() != seq.len() {
        return Err(Error::Dimensions(format!("report has {} frames, sequence {}", report.frames.len(), seq.len())));
    }
    let fused = canvas.fused();
    let mut out = Vec::new();
    for r in report.accepted() {
        let frame = &seq.frames()[r.frame];
        let (ox, oy) = (r.transform.dx - canvas.origin.0 as f64, r.transform.dy - canvas.origin.1 as f64);
        let mut img = frame.clone();
        for y in 0..frame.height() {
            for x in 0..frame.width() {
                if !frame.in_fov(x, y) {
                    continue;
                }
                let (mut acc, mut wsum) = (0.0, 0.0);
                for (px, py, wt) in bilinear(x as f64 + ox, y as f64 + oy) {
                    if wt > 0.0 && px >= 0 && py >= 0 && (px as usize) < canvas.width && (py as usize) < canvas.height {
                        let i = py as usize * canvas.width + px as usize;
                        if canvas.weight[i] > 0.0 {
                            acc += wt * fused.data()[i];
                            wsum += wt;
                        }
                    }
                }
                if wsum > 0.0 {
                    img.set(x, y, acc / wsum);
                }
            }
        }
        out.push((r.frame, img));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDiagnostic {
    pub sequence_id: String,
    pub median_residual: f64,
    pub accepted_frames: usize,
    pub rejected_frames: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SequenceFilter {
    pub accepted: Vec<String>,
    pub rejected: Vec<String>,
    pub diagnostics: Vec<SequenceDiagnostic>,
}

/// Rejects sequences whose median frame residual exceeds `threshold`.
pub fn filter_sequences(reports: &[RegistrationReport], threshold: f64) -> SequenceFilter {
    let mut out = SequenceFilter::default();
    for r in reports {
        let m = r.median_residual();
        let ok = m <= threshold;
        let acc = r.accepted().count();
        out.diagnostics.push(SequenceDiagnostic {
            sequence_id: r.sequence_id.clone(),
            median_residual: m,
            accepted_frames: acc,
            rejected_frames: r.frames.len() - acc,
            accepted: ok,
        });
        if ok {
            out.accepted.push(r.sequence_id.clone());
        } else {
            out.rejected.push(r.sequence_id.clone());
        }
    }
    out
}

/// Writes `mosaic.png`, `weight.png` (scaled by frame count), `hr/<n>.png`
/// and `registration.csv` into `dir`. Returns the written paths.
pub fn write_outputs(
    dir: &Path,
    canvas: &MosaicCanvas,
    report: &RegistrationReport,
    hr: &[(usize, Image)],
    header: &serde_json::Value,
) -> Result<Vec<PathBuf>> {
    let hr_dir = dir.join("hr");
    std::fs::create_dir_all(&hr_dir).map_err(|source| Error::Write { path: hr_dir.clone(), source })?;
    let mut written = Vec::new();
    let p = dir.join("mosaic.png");
    save_image(&canvas.fused(), &p, 16)?;
    written.push(p);
    let n = report.frames.len().max(1) as f64;
    let p = dir.join("weight.png");
    save_image(&canvas.weight_image().map(|w| w / n), &p, 16)?;
    written.push(p);
    for (i, img) in hr {
        let p = hr_dir.join(format!("{i:05}.png"));
        save_image(img, &p, 16)?;
        written.push(p);
    }
    let p = dir.join("registration.csv");
    report.write_csv(&p, header)?;
    written.push(p);
    Ok(written)
}
