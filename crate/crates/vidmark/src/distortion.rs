//! The distortion library: every degradation the robustness harness can throw
//! at a marked clip, behind one seeded, declarative interface.
//!
//! A [`DistortionSpec`] is a kind plus a seed. Applying the same spec to the
//! same clip always produces the same output; randomness (which frames drop,
//! where the crop window lands, the noise field, ...) comes from a ChaCha
//! stream keyed by the seed, never from global state. Specs serialize to JSON
//! so evaluation configs can pin an exact attack.
//!
//! All distortions are defined on RGB pixels; a YUV clip is converted in and
//! back out, so callers never need to care. Temporal edits (drop, swap,
//! shift, average) permute or mix whole frames and touch no pixel values.

use std::process::{Command, Stdio};

use ndarray::{Array2, Array3, Array4, Axis, s};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{FftPlanner, num_complex::Complex};
use serde::{Deserialize, Serialize};

use crate::clip::{Colorspace, LUMA_WEIGHTS, VideoClip, rgb_to_yuv, yuv_to_rgb};
use crate::error::{Error, Result};
use crate::io::{self, ClipFormat};
use crate::jpeg::{self, Plane};

fn default_blur_sigma() -> f64 {
    2.0
}
fn default_spatial_taps() -> usize {
    5
}
fn default_temporal_taps() -> usize {
    3
}

/// One degradation, with whatever parameters it needs.
///
/// Serialized form is internally tagged:
/// `{"kind": "gaussian_noise", "std": 0.04}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistortionKind {
    /// Pass-through; the control cell in every sweep.
    Identity,
    /// Each frame is independently dropped with probability `p`; a dropped
    /// frame is replaced by freezing the most recent surviving frame (or the
    /// first surviving frame, for a dropped head). Clip length is preserved.
    FrameDrop { p: f64 },
    /// Adjacent frame pairs `(0,1), (2,3), ...` are independently swapped
    /// with probability `p`.
    FrameSwap { p: f64 },
    /// Each output frame is the mean of an `n`-frame window centered on it
    /// (edges clamp). `n` must be odd.
    FrameAverage { n: usize },
    /// The whole clip is cyclically rotated by a uniformly random offset
    /// `k`: output frame `t` is input frame `(t + T - k) mod T`.
    FrameShift,
    /// A uniformly placed window of `ratio * H` by `ratio * W` pixels
    /// survives; everything outside it is blacked out. Same window on every
    /// frame, and the frame geometry is unchanged.
    Crop { ratio: f64 },
    /// Separable Gaussian blur: `spatial_taps`-tap kernels along both image
    /// axes and a `temporal_taps`-tap kernel along time, all with the same
    /// `sigma`, symmetric border handling.
    GaussianBlur {
        sigma: f64,
        #[serde(default = "default_spatial_taps")]
        spatial_taps: usize,
        #[serde(default = "default_temporal_taps")]
        temporal_taps: usize,
    },
    /// I.i.d. zero-mean Gaussian noise with standard deviation `std` added
    /// to every sample, then clamped to `[0, 1]`.
    GaussianNoise { std: f64 },
    /// One hue-angle offset per clip, uniform in `±(strength * 90°)` on the
    /// HSV cylinder.
    Hue { strength: f64 },
    /// One saturation factor per clip, uniform in `[lo, hi]`, applied as a
    /// luma-preserving mix toward/away from gray.
    Saturation { lo: f64, hi: f64 },
    /// Per-frame JPEG-style transform coding at the given quality (1-100),
    /// full-resolution chroma.
    JpegProxy { quality: u8 },
    /// Keeps only the centered low-frequency cube covering roughly
    /// `fraction` of each FFT axis; all other 3-D spectrum coefficients are
    /// zeroed.
    FreqTruncate { fraction: f64 },
    /// Round trip through a real video codec via an external command
    /// (see [`external_codec`]); `crf` is the rate-control knob.
    ExternalCodec { crf: u32 },
}

impl DistortionKind {
    /// The snake_case label used in reports and CSV rows.
    pub fn name(&self) -> &'static str {
        match self {
            DistortionKind::Identity => "identity",
            DistortionKind::FrameDrop { .. } => "frame_drop",
            DistortionKind::FrameSwap { .. } => "frame_swap",
            DistortionKind::FrameAverage { .. } => "frame_average",
            DistortionKind::FrameShift => "frame_shift",
            DistortionKind::Crop { .. } => "crop",
            DistortionKind::GaussianBlur { .. } => "gaussian_blur",
            DistortionKind::GaussianNoise { .. } => "gaussian_noise",
            DistortionKind::Hue { .. } => "hue",
            DistortionKind::Saturation { .. } => "saturation",
            DistortionKind::JpegProxy { .. } => "jpeg_proxy",
            DistortionKind::FreqTruncate { .. } => "freq_truncate",
            DistortionKind::ExternalCodec { .. } => "external_codec",
        }
    }

    /// The principal scalar parameter, for the `strength` report column.
    /// Parameterless kinds report 0.
    pub fn strength(&self) -> f64 {
        match self {
            DistortionKind::Identity | DistortionKind::FrameShift => 0.0,
            DistortionKind::FrameDrop { p } | DistortionKind::FrameSwap { p } => *p,
            DistortionKind::FrameAverage { n } => *n as f64,
            DistortionKind::Crop { ratio } => *ratio,
            DistortionKind::GaussianBlur { sigma, .. } => *sigma,
            DistortionKind::GaussianNoise { std } => *std,
            DistortionKind::Hue { strength } => *strength,
            DistortionKind::Saturation { lo, hi } => (hi - 1.0).max(1.0 - lo),
            DistortionKind::JpegProxy { quality } => *quality as f64,
            DistortionKind::FreqTruncate { fraction } => *fraction,
            DistortionKind::ExternalCodec { crf } => *crf as f64,
        }
    }

    /// The same kind with its principal parameter replaced, for expanding a
    /// strength grid over one attack. Parameterless kinds are returned
    /// unchanged.
    pub fn with_strength(&self, strength: f64) -> DistortionKind {
        match self {
            DistortionKind::Identity => DistortionKind::Identity,
            DistortionKind::FrameShift => DistortionKind::FrameShift,
            DistortionKind::FrameDrop { .. } => DistortionKind::FrameDrop { p: strength },
            DistortionKind::FrameSwap { .. } => DistortionKind::FrameSwap { p: strength },
            DistortionKind::FrameAverage { .. } => DistortionKind::FrameAverage {
                n: strength.round().max(1.0) as usize,
            },
            DistortionKind::Crop { .. } => DistortionKind::Crop { ratio: strength },
            DistortionKind::GaussianBlur {
                spatial_taps,
                temporal_taps,
                ..
            } => DistortionKind::GaussianBlur {
                sigma: strength,
                spatial_taps: *spatial_taps,
                temporal_taps: *temporal_taps,
            },
            DistortionKind::GaussianNoise { .. } => DistortionKind::GaussianNoise { std: strength },
            DistortionKind::Hue { .. } => DistortionKind::Hue { strength },
            DistortionKind::Saturation { .. } => DistortionKind::Saturation {
                lo: (1.0 - strength).max(0.0),
                hi: 1.0 + strength,
            },
            DistortionKind::JpegProxy { .. } => DistortionKind::JpegProxy {
                quality: strength.round().clamp(1.0, 100.0) as u8,
            },
            DistortionKind::FreqTruncate { .. } => {
                DistortionKind::FreqTruncate { fraction: strength }
            }
            DistortionKind::ExternalCodec { .. } => DistortionKind::ExternalCodec {
                crf: strength.round().max(0.0) as u32,
            },
        }
    }
}

/// A fully pinned attack: kind plus the seed for its random choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionSpec {
    pub kind: DistortionKind,
    pub seed: u64,
}

impl DistortionSpec {
    pub fn new(kind: DistortionKind, seed: u64) -> Self {
        DistortionSpec { kind, seed }
    }
}

/// The standard attack battery: every kind that needs no external binary,
/// at its canonical strength. [`sample_random`] draws uniformly from this
/// set unless the caller supplies a pool of their own.
pub fn default_pool() -> Vec<DistortionKind> {
    vec![
        DistortionKind::FrameDrop { p: 0.5 },
        DistortionKind::FrameSwap { p: 0.5 },
        DistortionKind::FrameAverage { n: 3 },
        DistortionKind::FrameShift,
        DistortionKind::Crop { ratio: 0.4 },
        DistortionKind::GaussianBlur {
            sigma: default_blur_sigma(),
            spatial_taps: default_spatial_taps(),
            temporal_taps: default_temporal_taps(),
        },
        DistortionKind::GaussianNoise { std: 0.04 },
        DistortionKind::Hue { strength: 1.0 },
        DistortionKind::Saturation { lo: 0.5, hi: 1.5 },
        DistortionKind::JpegProxy { quality: 50 },
        DistortionKind::FreqTruncate { fraction: 0.5 },
    ]
}

/// Draws one attack uniformly from `pool` and gives it a fresh instance
/// seed, both derived from `seed`. Every kind in the pool has equal
/// probability.
pub fn sample_random(pool: &[DistortionKind], seed: u64) -> Result<DistortionSpec> {
    if pool.is_empty() {
        return Err(Error::BadParam("distortion pool is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = rng.random_range(0..pool.len());
    let instance_seed = rng.random::<u64>();
    Ok(DistortionSpec::new(pool[idx].clone(), instance_seed))
}

/// Applies one attack. The output clip has the same dimensions and
/// colorspace as the input.
pub fn apply(clip: &VideoClip, spec: &DistortionSpec) -> Result<VideoClip> {
    let original = clip.colorspace;
    let rgb = clip.to_colorspace(Colorspace::Rgb);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let out = match &spec.kind {
        DistortionKind::Identity => rgb.clone(),
        DistortionKind::FrameDrop { p } => frame_drop(&rgb, *p, &mut rng)?,
        DistortionKind::FrameSwap { p } => frame_swap(&rgb, *p, &mut rng)?,
        DistortionKind::FrameAverage { n } => frame_average(&rgb, *n)?,
        DistortionKind::FrameShift => {
            let t = rgb.num_frames();
            rotate_frames(&rgb, rng.random_range(0..t))
        }
        DistortionKind::Crop { ratio } => crop(&rgb, *ratio, &mut rng)?,
        DistortionKind::GaussianBlur {
            sigma,
            spatial_taps,
            temporal_taps,
        } => gaussian_blur(&rgb, *sigma, *spatial_taps, *temporal_taps)?,
        DistortionKind::GaussianNoise { std } => gaussian_noise(&rgb, *std, &mut rng)?,
        DistortionKind::Hue { strength } => hue_shift(&rgb, *strength, &mut rng)?,
        DistortionKind::Saturation { lo, hi } => saturation(&rgb, *lo, *hi, &mut rng)?,
        DistortionKind::JpegProxy { quality } => jpeg_proxy(&rgb, *quality)?,
        DistortionKind::FreqTruncate { fraction } => freq_truncate(&rgb, *fraction)?,
        DistortionKind::ExternalCodec { crf } => external_codec(&rgb, *crf, None)?,
    };
    Ok(out.to_colorspace(original))
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::BadParam(format!(
            "{what} must be in [0, 1], got {p}"
        )));
    }
    Ok(())
}

/// Source frame index for each output position under the drop-and-freeze
/// rule. Split out so the mapping itself is testable.
fn drop_sources(t_len: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let kept: Vec<bool> = (0..t_len).map(|_| rng.random::<f64>() >= p).collect();
    let first_kept = kept.iter().position(|k| *k).unwrap_or(0);
    let mut sources = Vec::with_capacity(t_len);
    let mut last = first_kept;
    for (t, keep) in kept.iter().enumerate() {
        if *keep {
            last = t;
        }
        sources.push(if t < first_kept { first_kept } else { last });
    }
    sources
}

fn frame_drop(clip: &VideoClip, p: f64, rng: &mut ChaCha8Rng) -> Result<VideoClip> {
    check_prob(p, "frame drop probability")?;
    let sources = drop_sources(clip.num_frames(), p, rng);
    let mut data = clip.data.clone();
    for (t, src) in sources.iter().enumerate() {
        if *src != t {
            let frame = clip.data.index_axis(Axis(0), *src).to_owned();
            data.index_axis_mut(Axis(0), t).assign(&frame);
        }
    }
    VideoClip::new(data, clip.colorspace)
}

fn frame_swap(clip: &VideoClip, p: f64, rng: &mut ChaCha8Rng) -> Result<VideoClip> {
    check_prob(p, "frame swap probability")?;
    let t_len = clip.num_frames();
    let mut data = clip.data.clone();
    let mut t = 0;
    while t + 1 < t_len {
        if rng.random::<f64>() < p {
            let a = clip.data.index_axis(Axis(0), t).to_owned();
            let b = clip.data.index_axis(Axis(0), t + 1).to_owned();
            data.index_axis_mut(Axis(0), t).assign(&b);
            data.index_axis_mut(Axis(0), t + 1).assign(&a);
        }
        t += 2;
    }
    VideoClip::new(data, clip.colorspace)
}

fn frame_average(clip: &VideoClip, n: usize) -> Result<VideoClip> {
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::BadParam(format!(
            "frame averaging window must be odd and positive, got {n}"
        )));
    }
    let t_len = clip.num_frames();
    let half = n / 2;
    let mut data = Array4::zeros(clip.data.raw_dim());
    for t in 0..t_len {
        let lo = t.saturating_sub(half);
        let hi = (t + half).min(t_len - 1);
        let mut acc = clip.data.index_axis(Axis(0), lo).to_owned();
        for s in lo + 1..=hi {
            acc += &clip.data.index_axis(Axis(0), s);
        }
        acc /= (hi - lo + 1) as f64;
        data.index_axis_mut(Axis(0), t).assign(&acc);
    }
    VideoClip::new(data, clip.colorspace)
}

/// Cyclic rotation by `k`: output frame `t` is input frame `(t + T - k) % T`,
/// i.e. the clip starts `k` frames "later" and wraps.
fn rotate_frames(clip: &VideoClip, k: usize) -> VideoClip {
    let t_len = clip.num_frames();
    let mut data = Array4::zeros(clip.data.raw_dim());
    for t in 0..t_len {
        let src = (t + t_len - k % t_len) % t_len;
        data.index_axis_mut(Axis(0), t)
            .assign(&clip.data.index_axis(Axis(0), src));
    }
    VideoClip {
        data,
        colorspace: clip.colorspace,
    }
}

fn crop(clip: &VideoClip, ratio: f64, rng: &mut ChaCha8Rng) -> Result<VideoClip> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::BadParam(format!(
            "crop ratio must be in (0, 1], got {ratio}"
        )));
    }
    let (_, h, w) = clip.dims();
    let box_h = ((ratio * h as f64).round() as usize).clamp(1, h);
    let box_w = ((ratio * w as f64).round() as usize).clamp(1, w);
    // Draw order is part of the contract: top edge first, then left edge.
    let y0 = rng.random_range(0..=h - box_h);
    let x0 = rng.random_range(0..=w - box_w);
    let mut data = Array4::zeros(clip.data.raw_dim());
    data.slice_mut(s![.., y0..y0 + box_h, x0..x0 + box_w, ..])
        .assign(&clip.data.slice(s![.., y0..y0 + box_h, x0..x0 + box_w, ..]));
    VideoClip::new(data, clip.colorspace)
}

fn gaussian_taps(len: usize, sigma: f64) -> Vec<f64> {
    let center = (len - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..len)
        .map(|i| (-((i as f64 - center).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Symmetric border index: `-1 -> 0`, `-2 -> 1`, `n -> n-1`, `n+1 -> n-2`.
fn reflect_index(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

fn convolve_axis(data: &Array4<f64>, axis: Axis, taps: &[f64]) -> Array4<f64> {
    let n = data.len_of(axis);
    let half = taps.len() / 2;
    let mut out = data.clone();
    for (lane_in, mut lane_out) in data.lanes(axis).into_iter().zip(out.lanes_mut(axis)) {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, w) in taps.iter().enumerate() {
                let idx = reflect_index(i as isize + j as isize - half as isize, n);
                acc += w * lane_in[idx];
            }
            lane_out[i] = acc;
        }
    }
    out
}

fn gaussian_blur(
    clip: &VideoClip,
    sigma: f64,
    spatial_taps: usize,
    temporal_taps: usize,
) -> Result<VideoClip> {
    if sigma <= 0.0 {
        return Err(Error::BadParam(format!(
            "blur sigma must be positive, got {sigma}"
        )));
    }
    if spatial_taps == 0 || temporal_taps == 0 {
        return Err(Error::BadParam("blur kernels need at least one tap".into()));
    }
    let spatial = gaussian_taps(spatial_taps, sigma);
    let temporal = gaussian_taps(temporal_taps, sigma);
    let mut data = convolve_axis(&clip.data, Axis(1), &spatial);
    data = convolve_axis(&data, Axis(2), &spatial);
    data = convolve_axis(&data, Axis(0), &temporal);
    VideoClip::new(data, clip.colorspace)
}

fn gaussian_noise(clip: &VideoClip, std: f64, rng: &mut ChaCha8Rng) -> Result<VideoClip> {
    if std < 0.0 {
        return Err(Error::BadParam(format!(
            "noise standard deviation must be non-negative, got {std}"
        )));
    }
    let normal = Normal::new(0.0, std)
        .map_err(|e| Error::BadParam(format!("invalid noise parameters: {e}")))?;
    let mut out = clip.clone();
    for v in out.data.iter_mut() {
        *v += normal.sample(rng);
    }
    out.clamp_unit();
    Ok(out)
}

fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / d).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / d + 2.0)
    } else {
        60.0 * ((r - g) / d + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r1, g1, b1) = match hp as usize % 6 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    (r1 + m, g1 + m, b1 + m)
}

fn hue_shift(clip: &VideoClip, strength: f64, rng: &mut ChaCha8Rng) -> Result<VideoClip> {
    if !(0.0..=1.0).contains(&strength) {
        return Err(Error::BadParam(format!(
            "hue strength must be in [0, 1], got {strength}"
        )));
    }
    let span = strength * 90.0;
    let offset = rng.random_range(-span..=span);
    let mut out = clip.clone();
    for mut px in out.data.rows_mut() {
        let (h, s, v) = rgb_to_hsv(px[0], px[1], px[2]);
        let (r, g, b) = hsv_to_rgb((h + offset).rem_euclid(360.0), s, v);
        px[0] = r;
        px[1] = g;
        px[2] = b;
    }
    Ok(out)
}

fn saturation(clip: &VideoClip, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Result<VideoClip> {
    if !(lo >= 0.0 && lo <= hi) {
        return Err(Error::BadParam(format!(
            "saturation range must satisfy 0 <= lo <= hi, got [{lo}, {hi}]"
        )));
    }
    let factor = rng.random_range(lo..=hi);
    let mut out = clip.clone();
    for mut px in out.data.rows_mut() {
        let y = LUMA_WEIGHTS[0] * px[0] + LUMA_WEIGHTS[1] * px[1] + LUMA_WEIGHTS[2] * px[2];
        for v in px.iter_mut() {
            *v = y + (*v - y) * factor;
        }
    }
    out.clamp_unit();
    Ok(out)
}

fn jpeg_proxy(clip: &VideoClip, quality: u8) -> Result<VideoClip> {
    if !(1..=100).contains(&quality) {
        return Err(Error::BadParam(format!(
            "jpeg quality must be in 1..=100, got {quality}"
        )));
    }
    let (t_len, h, w) = clip.dims();
    let mut out = clip.clone();
    let mut planes = [
        Array2::zeros((h, w)),
        Array2::zeros((h, w)),
        Array2::zeros((h, w)),
    ];
    for t in 0..t_len {
        for y in 0..h {
            for x in 0..w {
                let (yy, cb, cr) = rgb_to_yuv(
                    clip.data[[t, y, x, 0]],
                    clip.data[[t, y, x, 1]],
                    clip.data[[t, y, x, 2]],
                );
                planes[0][[y, x]] = yy;
                planes[1][[y, x]] = cb;
                planes[2][[y, x]] = cr;
            }
        }
        let coded = [
            jpeg::transcode_plane(&planes[0], Plane::Luma, quality),
            jpeg::transcode_plane(&planes[1], Plane::Chroma, quality),
            jpeg::transcode_plane(&planes[2], Plane::Chroma, quality),
        ];
        for y in 0..h {
            for x in 0..w {
                let (r, g, b) = yuv_to_rgb(coded[0][[y, x]], coded[1][[y, x]], coded[2][[y, x]]);
                out.data[[t, y, x, 0]] = r;
                out.data[[t, y, x, 1]] = g;
                out.data[[t, y, x, 2]] = b;
            }
        }
    }
    out.clamp_unit();
    Ok(out)
}

/// Whether FFT bin `k` of an axis of length `n` is inside the kept cube. The
/// kept set is symmetric under `k -> n - k` so real input stays real.
fn bin_kept(k: usize, n: usize, fraction: f64) -> bool {
    let half = (fraction * n as f64 / 2.0).floor() as usize;
    k.min(n - k) <= half
}

fn fft_axis(vol: &mut Array3<Complex<f64>>, axis: Axis, fft: &std::sync::Arc<dyn rustfft::Fft<f64>>) {
    let mut scratch = vec![Complex::new(0.0, 0.0); vol.len_of(axis)];
    for mut lane in vol.lanes_mut(axis) {
        for (s, v) in scratch.iter_mut().zip(lane.iter()) {
            *s = *v;
        }
        fft.process(&mut scratch);
        for (v, s) in lane.iter_mut().zip(scratch.iter()) {
            *v = *s;
        }
    }
}

fn freq_truncate(clip: &VideoClip, fraction: f64) -> Result<VideoClip> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::BadParam(format!(
            "frequency fraction must be in (0, 1], got {fraction}"
        )));
    }
    let (t_len, h, w) = clip.dims();
    let mut planner = FftPlanner::new();
    let forward = [
        planner.plan_fft_forward(t_len),
        planner.plan_fft_forward(h),
        planner.plan_fft_forward(w),
    ];
    let inverse = [
        planner.plan_fft_inverse(t_len),
        planner.plan_fft_inverse(h),
        planner.plan_fft_inverse(w),
    ];
    let norm = 1.0 / (t_len * h * w) as f64;

    let mut out = clip.clone();
    for ch in 0..3 {
        let mut vol = Array3::from_shape_fn((t_len, h, w), |(t, y, x)| {
            Complex::new(clip.data[[t, y, x, ch]], 0.0)
        });
        for (axis, fft) in forward.iter().enumerate() {
            fft_axis(&mut vol, Axis(axis), fft);
        }
        for ((t, y, x), v) in vol.indexed_iter_mut() {
            if !(bin_kept(t, t_len, fraction)
                && bin_kept(y, h, fraction)
                && bin_kept(x, w, fraction))
            {
                *v = Complex::new(0.0, 0.0);
            }
        }
        for (axis, fft) in inverse.iter().enumerate() {
            fft_axis(&mut vol, Axis(axis), fft);
        }
        for ((t, y, x), v) in vol.indexed_iter() {
            out.data[[t, y, x, ch]] = v.re * norm;
        }
    }
    out.clamp_unit();
    Ok(out)
}

/// Environment variable holding the external codec command template.
pub const CODEC_CMD_ENV: &str = "VIDMARK_CODEC_CMD";

/// Default template used when `ffmpeg` is on PATH: encode to H.264 at the
/// requested CRF, then decode back to a full-resolution Y4M.
const FFMPEG_TEMPLATE: &str = "ffmpeg -y -loglevel error -i {in} -c:v libx264 -preset veryfast \
     -crf {crf} -pix_fmt yuv444p {out}.mp4 && \
     ffmpeg -y -loglevel error -i {out}.mp4 -pix_fmt yuv444p {out}";

/// Finds the codec command template: an explicit argument wins, then the
/// `VIDMARK_CODEC_CMD` environment variable, then a stock ffmpeg pipeline if
/// `ffmpeg` is runnable. `None` means codec distortions cannot run here.
pub fn resolve_codec_template(explicit: Option<&str>) -> Option<String> {
    if let Some(t) = explicit {
        return Some(t.to_string());
    }
    if let Ok(t) = std::env::var(CODEC_CMD_ENV) {
        if !t.is_empty() {
            return Some(t);
        }
    }
    let ffmpeg_ok = Command::new("ffmpeg")
        .arg("-version")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .map(|s| s.success())
        .unwrap_or(false);
    if ffmpeg_ok {
        Some(FFMPEG_TEMPLATE.to_string())
    } else {
        None
    }
}

/// True when [`external_codec`] would be able to run.
pub fn codec_available() -> bool {
    resolve_codec_template(None).is_some()
}

/// Round trip through an external codec command. The template (see
/// [`resolve_codec_template`]) is run via `sh -c` with `{in}`, `{out}`, and
/// `{crf}` substituted; it must read the Y4M at `{in}` and leave a decoded
/// Y4M of identical dimensions at `{out}`.
pub fn external_codec(clip: &VideoClip, crf: u32, template: Option<&str>) -> Result<VideoClip> {
    let template = resolve_codec_template(template).ok_or_else(|| {
        Error::CodecUnavailable(format!(
            "no codec command: set {CODEC_CMD_ENV} or install ffmpeg"
        ))
    })?;
    let dir = tempfile::tempdir()?;
    let in_path = dir.path().join("in.y4m");
    let out_path = dir.path().join("out.y4m");
    io::save_clip(clip, &in_path, ClipFormat::Y4m)?;

    let cmd = template
        .replace("{in}", &in_path.to_string_lossy())
        .replace("{out}", &out_path.to_string_lossy())
        .replace("{crf}", &crf.to_string());
    let status = Command::new("sh").arg("-c").arg(&cmd).status()?;
    if !status.success() {
        return Err(Error::CodecUnavailable(format!(
            "codec command exited with {status}"
        )));
    }
    if !out_path.exists() {
        return Err(Error::CodecUnavailable(
            "codec command produced no output file".into(),
        ));
    }
    let decoded = io::load_clip(&out_path, ClipFormat::Y4m)?;
    if decoded.dims() != clip.dims() {
        return Err(Error::BadDims(format!(
            "codec changed clip dimensions: {:?} -> {:?}",
            clip.dims(),
            decoded.dims()
        )));
    }
    Ok(decoded.to_colorspace(clip.colorspace))
}
