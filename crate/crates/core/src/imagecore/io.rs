//! 8/16-bit grayscale PNG and binary PGM (P5) reading and writing.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Image, Mask};
use crate::{Error, Result};

/// How stored sample depth is accepted on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitDepthPolicy {
    /// Accept 8- or 16-bit data and divide by the format maximum
    /// (255, 65535, or the PGM `maxval`).
    #[default]
    FormatMaximum,
    /// Reject anything that is not stored with 8 bits per sample.
    Require8,
    /// Reject anything that is not stored with 16 bits per sample.
    Require16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SaveReport {
    /// Pixels that were outside [0,1] (or NaN) and had to be clamped.
    pub clamped: usize,
}

struct Raw {
    width: usize,
    height: usize,
    bits: u8,
    maxval: u32,
    samples: Vec<u32>,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), reason: reason.into() }
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("pnm"))
}

fn read_raw(path: &Path) -> Result<Raw> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
    if bytes.starts_with(b"P5") {
        decode_pgm(path, &bytes)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        decode_png(path, &bytes)
    } else if bytes.starts_with(b"P6") || bytes.starts_with(b"P3") {
        Err(format_err(path, "multi-channel PNM input is not supported"))
    } else {
        Err(format_err(path, "not a PNG or binary PGM (P5) file"))
    }
}

fn decode_png(path: &Path, bytes: &[u8]) -> Result<Raw> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| format_err(path, e.to_string()))?;
    let (color, depth) = reader.output_color_type();
    if color != png::ColorType::Grayscale {
        return Err(format_err(path, format!("multi-channel PNG ({color:?}) is not supported")));
    }
    let bits = match depth {
        png::BitDepth::Eight => 8,
        png::BitDepth::Sixteen => 16,
        other => return Err(format_err(path, format!("unsupported bit depth {other:?}"))),
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| format_err(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| format_err(path, e.to_string()))?;
    let (width, height) = (info.width as usize, info.height as usize);
    let line = info.line_size;
    let mut samples = Vec::with_capacity(width * height);
    for row in buf.chunks(line).take(height) {
        if bits == 8 {
            samples.extend(row[..width].iter().map(|&b| b as u32));
        } else {
            samples.extend(row[..2 * width].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32));
        }
    }
    Ok(Raw { width, height, bits, maxval: if bits == 8 { 255 } else { 65535 }, samples })
}

fn decode_pgm(path: &Path, bytes: &[u8]) -> Result<Raw> {
    // Header: magic, width, height, maxval, separated by whitespace with
    // optional '#' comments, then exactly one whitespace byte before data.
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(path, "malformed PGM header"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(format_err(path, "malformed PGM header"));
    }
    pos += 1;
    let [width, height, maxval] = fields.map(|v| v as usize);
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(format_err(path, format!("unsupported PGM geometry {width}x{height} maxval {maxval}")));
    }
    let bits = if maxval < 256 { 8 } else { 16 };
    let need = width * height * (bits as usize / 8);
    let data = bytes
        .get(pos..pos + need)
        .ok_or_else(|| format_err(path, "truncated PGM data"))?;
    let samples = if bits == 8 {
        data.iter().map(|&b| b as u32).collect()
    } else {
        data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32).collect()
    };
    Ok(Raw { width, height, bits, maxval: maxval as u32, samples })
}

/// Loads a grayscale image, mapping samples linearly to [0,1] by the format
/// maximum. No gamma handling is applied.
pub fn load_image(path: impl AsRef<Path>, policy: BitDepthPolicy) -> Result<Image> {
    let path = path.as_ref();
    let raw = read_raw(path)?;
    match (policy, raw.bits) {
        (BitDepthPolicy::Require8, b) if b != 8 => {
            return Err(format_err(path, format!("expected 8-bit samples, found {b}-bit")))
        }
        (BitDepthPolicy::Require16, b) if b != 16 => {
            return Err(format_err(path, format!("expected 16-bit samples, found {b}-bit")))
        }
        _ => {}
    }
    let scale = raw.maxval as f64;
    let data = raw.samples.iter().map(|&s| (s as f64 / scale).min(1.0)).collect();
    Image::new(raw.width, raw.height, data)
}

/// Loads a mask image; any nonzero sample is inside the field of view.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let raw = read_raw(path)?;
    Mask::new(raw.width, raw.height, raw.samples.iter().map(|&s| s != 0).collect())
}

fn quantize(img: &Image, bit_depth: u8) -> Result<(Vec<u32>, SaveReport)> {
    let max = match bit_depth {
        8 => 255.0,
        16 => 65535.0,
        other => {
            return Err(Error::InvalidParameter(format!("bit depth must be 8 or 16, got {other}")))
        }
    };
    let mut report = SaveReport::default();
    let samples = img
        .data()
        .iter()
        .map(|&v| {
            let c = if v.is_nan() {
                0.0
            } else {
                v.clamp(0.0, 1.0)
            };
            if c != v {
                report.clamped += 1;
            }
            (c * max).round() as u32
        })
        .collect();
    Ok((samples, report))
}

fn write_samples(path: &Path, width: usize, height: usize, bit_depth: u8, samples: &[u32]) -> Result<()> {
    let werr = |source: std::io::Error| Error::Write { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(werr)?;
    let mut out = BufWriter::new(file);
    let bytes: Vec<u8> = if bit_depth == 8 {
        samples.iter().map(|&s| s as u8).collect()
    } else {
        samples.iter().flat_map(|&s| (s as u16).to_be_bytes()).collect()
    };
    if is_pgm(path) {
        let maxval = if bit_depth == 8 { 255 } else { 65535 };
        write!(out, "P5\n{width} {height}\n{maxval}\n").map_err(werr)?;
        out.write_all(&bytes).map_err(werr)?;
    } else {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(if bit_depth == 8 { png::BitDepth::Eight } else { png::BitDepth::Sixteen });
        let to_io = |e: png::EncodingError| werr(std::io::Error::other(e.to_string()));
        let mut writer = enc.write_header().map_err(to_io)?;
        writer.write_image_data(&bytes).map_err(to_io)?;
        writer.finish().map_err(to_io)?;
    }
    out.flush().map_err(werr)
}

/// Saves an image as PNG (or PGM when the extension is `.pgm`). Values
/// outside [0,1] are clamped and counted in the returned report.
pub fn save_image(img: &Image, path: impl AsRef<Path>, bit_depth: u8) -> Result<SaveReport> {
    let path = path.as_ref();
    let (samples, report) = quantize(img, bit_depth)?;
    write_samples(path, img.width(), img.height(), bit_depth, &samples)?;
    if report.clamped > 0 {
        log::warn!("{}: clamped {} pixels to [0,1]", path.display(), report.clamped);
    }
    Ok(report)
}

/// Saves a mask as an 8-bit image with 255 = inside.
pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let samples: Vec<u32> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_samples(path.as_ref(), mask.width(), mask.height(), 8, &samples)
}
