//! Clip readers and writers.
//!
//! Three on-disk layouts are supported:
//!
//! - **Y4M** (`YUV4MPEG2`): single file, 8-bit 4:4:4 planes, the lingua
//!   franca for piping video through external tools. Clips come back in the
//!   YUV colorspace.
//! - **Frame directory**: one image per frame (`frame_0000.ppm`, PNG also
//!   accepted on load), RGB.
//! - **Raw planar**: bare `f32` (or `u8`) planes next to a small JSON sidecar
//!   carrying dimensions, colorspace, and sample type. The only format that
//!   round-trips real-valued samples without 8-bit quantization.
//!
//! Quantization to/from 8 bits happens here and nowhere else in the library:
//! `u8` sources map to real values as `v / 255`, and writers use
//! `round(v * 255)` after clamping.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array4;
use serde::{Deserialize, Serialize};

use crate::clip::{Colorspace, VideoClip};
use crate::error::{Error, Result};

/// On-disk clip layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipFormat {
    Y4m,
    FrameDir,
    RawPlanar,
}

/// Guesses the format from the path: `.y4m` files, `.raw` files, otherwise a
/// frame directory.
pub fn infer_format(path: &Path) -> ClipFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("y4m") => ClipFormat::Y4m,
        Some(e) if e.eq_ignore_ascii_case("raw") => ClipFormat::RawPlanar,
        _ => ClipFormat::FrameDir,
    }
}

pub fn load_clip(path: &Path, format: ClipFormat) -> Result<VideoClip> {
    match format {
        ClipFormat::Y4m => load_y4m(path),
        ClipFormat::FrameDir => load_frame_dir(path),
        ClipFormat::RawPlanar => load_raw_planar(path),
    }
}

pub fn save_clip(clip: &VideoClip, path: &Path, format: ClipFormat) -> Result<()> {
    match format {
        ClipFormat::Y4m => save_y4m(clip, path),
        ClipFormat::FrameDir => save_frame_dir(clip, path),
        ClipFormat::RawPlanar => save_raw_planar(clip, path),
    }
}

#[inline]
fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

// ---------------------------------------------------------------------------
// Y4M
// ---------------------------------------------------------------------------

fn read_until_newline(r: &mut impl BufRead) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.read_until(b'\n', &mut buf)?;
    if buf.last() == Some(&b'\n') {
        buf.pop();
    }
    Ok(buf)
}

fn load_y4m(path: &Path) -> Result<VideoClip> {
    let mut r = BufReader::new(File::open(path)?);
    let header = read_until_newline(&mut r)?;
    let header = String::from_utf8_lossy(&header).into_owned();
    let mut tokens = header.split_ascii_whitespace();
    if tokens.next() != Some("YUV4MPEG2") {
        return Err(Error::UnsupportedFormat(format!(
            "{}: missing YUV4MPEG2 signature",
            path.display()
        )));
    }
    let (mut w, mut h) = (0usize, 0usize);
    let mut subsampling = "420".to_string(); // the y4m default when C is absent
    for tok in tokens {
        match tok.split_at(1) {
            ("W", v) => w = v.parse().map_err(|_| bad_y4m(path, "W"))?,
            ("H", v) => h = v.parse().map_err(|_| bad_y4m(path, "H"))?,
            ("C", v) => subsampling = v.to_string(),
            _ => {} // frame rate, interlacing, aspect: irrelevant here
        }
    }
    if w == 0 || h == 0 {
        return Err(bad_y4m(path, "dimensions"));
    }
    if !subsampling.starts_with("444") {
        return Err(Error::UnsupportedFormat(format!(
            "{}: only C444 is supported, got C{subsampling}",
            path.display()
        )));
    }

    let plane = w * h;
    let mut frames: Vec<Vec<u8>> = Vec::new();
    loop {
        let marker = read_until_newline(&mut r)?;
        if marker.is_empty() {
            break; // EOF
        }
        if !marker.starts_with(b"FRAME") {
            return Err(bad_y4m(path, "FRAME marker"));
        }
        let mut data = vec![0u8; plane * 3];
        r.read_exact(&mut data)?;
        frames.push(data);
    }
    if frames.is_empty() {
        return Err(Error::BadDims(format!("{}: no frames", path.display())));
    }

    let t = frames.len();
    let mut data = Array4::zeros((t, h, w, 3));
    for (ti, raw) in frames.iter().enumerate() {
        for c in 0..3 {
            let base = c * plane;
            for y in 0..h {
                for x in 0..w {
                    data[[ti, y, x, c]] = raw[base + y * w + x] as f64 / 255.0;
                }
            }
        }
    }
    VideoClip::new(data, Colorspace::Yuv)
}

fn bad_y4m(path: &Path, what: &str) -> Error {
    Error::UnsupportedFormat(format!("{}: malformed y4m ({what})", path.display()))
}

fn save_y4m(clip: &VideoClip, path: &Path) -> Result<()> {
    let yuv = clip.to_colorspace(Colorspace::Yuv);
    let (t, h, w) = yuv.dims();
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "YUV4MPEG2 W{w} H{h} F30:1 Ip A1:1 C444")?;
    let mut plane = vec![0u8; w * h];
    for ti in 0..t {
        out.write_all(b"FRAME\n")?;
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    plane[y * w + x] = quantize8(yuv.data[[ti, y, x, c]]);
                }
            }
            out.write_all(&plane)?;
        }
    }
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Frame directory
// ---------------------------------------------------------------------------

fn load_frame_dir(path: &Path) -> Result<VideoClip> {
    let mut entries: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()),
                Some(ref e) if e == "ppm" || e == "png"
            )
        })
        .collect();
    if entries.is_empty() {
        return Err(Error::BadDims(format!(
            "{}: no .ppm/.png frames",
            path.display()
        )));
    }
    entries.sort();

    let mut data: Option<Array4<f64>> = None;
    let t = entries.len();
    for (ti, frame_path) in entries.iter().enumerate() {
        let (w, h, rgb) = load_frame_image(frame_path)?;
        let arr = data.get_or_insert_with(|| Array4::zeros((t, h, w, 3)));
        let (_, ah, aw, _) = arr.dim();
        if (ah, aw) != (h, w) {
            return Err(Error::BadDims(format!(
                "{}: frame size {w}x{h} disagrees with {aw}x{ah}",
                frame_path.display()
            )));
        }
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    arr[[ti, y, x, c]] = rgb[(y * w + x) * 3 + c] as f64 / 255.0;
                }
            }
        }
    }
    VideoClip::new(data.unwrap(), Colorspace::Rgb)
}

/// Reads one frame as 8-bit RGB; PPM handled natively, PNG via `image`.
fn load_frame_image(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("ppm") => load_ppm(path),
        Some("png") => {
            let img = image::open(path)
                .map_err(|e| Error::UnsupportedFormat(format!("{}: {e}", path.display())))?
                .to_rgb8();
            let (w, h) = img.dimensions();
            Ok((w as usize, h as usize, img.into_raw()))
        }
        _ => Err(Error::UnsupportedFormat(format!(
            "{}: not a supported frame image",
            path.display()
        ))),
    }
}

fn load_ppm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let raw = fs::read(path)?;
    let mut pos = 0usize;
    let mut token = |raw: &[u8]| -> Result<String> {
        // Skip whitespace and '#' comments between header fields.
        loop {
            while pos < raw.len() && raw[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < raw.len() && raw[pos] == b'#' {
                while pos < raw.len() && raw[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < raw.len() && !raw[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::UnsupportedFormat(format!(
                "{}: truncated ppm header",
                path.display()
            )));
        }
        Ok(String::from_utf8_lossy(&raw[start..pos]).into_owned())
    };

    let magic = token(&raw)?;
    if magic != "P6" {
        return Err(Error::UnsupportedFormat(format!(
            "{}: expected P6, got {magic}",
            path.display()
        )));
    }
    let w: usize = token(&raw)?.parse().map_err(|_| bad_ppm(path))?;
    let h: usize = token(&raw)?.parse().map_err(|_| bad_ppm(path))?;
    let maxval: usize = token(&raw)?.parse().map_err(|_| bad_ppm(path))?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: only maxval 255 supported",
            path.display()
        )));
    }
    pos += 1; // single whitespace after maxval
    let need = w * h * 3;
    if raw.len() < pos + need {
        return Err(bad_ppm(path));
    }
    Ok((w, h, raw[pos..pos + need].to_vec()))
}

fn bad_ppm(path: &Path) -> Error {
    Error::UnsupportedFormat(format!("{}: malformed ppm", path.display()))
}

fn save_frame_dir(clip: &VideoClip, path: &Path) -> Result<()> {
    let rgb = clip.to_colorspace(Colorspace::Rgb);
    let (t, h, w) = rgb.dims();
    fs::create_dir_all(path)?;
    for ti in 0..t {
        let mut buf = Vec::with_capacity(w * h * 3 + 32);
        write!(buf, "P6\n{w} {h}\n255\n")?;
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    buf.push(quantize8(rgb.data[[ti, y, x, c]]));
                }
            }
        }
        fs::write(path.join(format!("frame_{ti:04}.ppm")), buf)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Raw planar
// ---------------------------------------------------------------------------

/// Sidecar schema written next to `.raw` data as `<name>.raw.json`.
#[derive(Debug, Serialize, Deserialize)]
struct RawSidecar {
    version: u32,
    t: usize,
    h: usize,
    w: usize,
    c: usize,
    colorspace: Colorspace,
    dtype: RawDtype,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawDtype {
    F32,
    U8,
}

const RAW_SIDECAR_VERSION: u32 = 1;

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Writes `f32` planes, frame-major with one `H x W` plane per channel.
fn save_raw_planar(clip: &VideoClip, path: &Path) -> Result<()> {
    let (t, h, w) = clip.dims();
    let sidecar = RawSidecar {
        version: RAW_SIDECAR_VERSION,
        t,
        h,
        w,
        c: 3,
        colorspace: clip.colorspace,
        dtype: RawDtype::F32,
    };
    let mut out = BufWriter::new(File::create(path)?);
    for ti in 0..t {
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    let v = clip.data[[ti, y, x, c]] as f32;
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    out.flush()?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// 8-bit flavor of the raw planar writer, mostly useful to hand data to tools
/// that expect bytes.
pub fn save_raw_planar_u8(clip: &VideoClip, path: &Path) -> Result<()> {
    let (t, h, w) = clip.dims();
    let sidecar = RawSidecar {
        version: RAW_SIDECAR_VERSION,
        t,
        h,
        w,
        c: 3,
        colorspace: clip.colorspace,
        dtype: RawDtype::U8,
    };
    let mut out = BufWriter::new(File::create(path)?);
    for ti in 0..t {
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    out.write_all(&[quantize8(clip.data[[ti, y, x, c]])])?;
                }
            }
        }
    }
    out.flush()?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

fn load_raw_planar(path: &Path) -> Result<VideoClip> {
    let sidecar: RawSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    if sidecar.version != RAW_SIDECAR_VERSION {
        return Err(Error::UnsupportedFormat(format!(
            "{}: sidecar version {} (supported: {RAW_SIDECAR_VERSION})",
            path.display(),
            sidecar.version
        )));
    }
    if sidecar.c != 3 {
        return Err(Error::BadDims(format!(
            "{}: expected 3 channels, sidecar says {}",
            path.display(),
            sidecar.c
        )));
    }
    let (t, h, w) = (sidecar.t, sidecar.h, sidecar.w);
    let n = t * h * w * 3;
    let raw = fs::read(path)?;
    let sample_size = match sidecar.dtype {
        RawDtype::F32 => 4,
        RawDtype::U8 => 1,
    };
    if raw.len() != n * sample_size {
        return Err(Error::BadDims(format!(
            "{}: {} bytes, sidecar implies {}",
            path.display(),
            raw.len(),
            n * sample_size
        )));
    }
    let mut data = Array4::zeros((t, h, w, 3));
    let mut i = 0usize;
    for ti in 0..t {
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    data[[ti, y, x, c]] = match sidecar.dtype {
                        RawDtype::F32 => {
                            let b = [raw[i], raw[i + 1], raw[i + 2], raw[i + 3]];
                            f32::from_le_bytes(b) as f64
                        }
                        RawDtype::U8 => raw[i] as f64 / 255.0,
                    };
                    i += sample_size;
                }
            }
        }
    }
    VideoClip::new(data, sidecar.colorspace)
}
