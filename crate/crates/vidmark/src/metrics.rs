//! Quality and payload metrics.
//!
//! - [`psnr`]: peak signal-to-noise ratio over all samples of all channels,
//!   with peak 1.0. Identical inputs yield `f64::INFINITY`.
//! - [`mssim`]: mean SSIM computed per frame on the luma plane with the
//!   standard 11x11 Gaussian window (sigma 1.5, K1 = 0.01, K2 = 0.03, L = 1),
//!   averaged over windows and frames.
//! - [`tpsnr`]: PSNR between the consecutive-frame difference signals of the
//!   two clips — a cheap proxy for temporal-consistency metrics. Flicker
//!   introduced by processing shows up here even when per-frame PSNR is high.
//! - [`bit_accuracy`]: fraction of matching payload bits.

use ndarray::Array2;

use crate::clip::VideoClip;
use crate::error::{Error, Result};

/// Everything the harness records about embedding quality.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct QualityReport {
    /// dB; `None` encodes +infinity (identical inputs) for JSON's benefit.
    pub psnr_db: Option<f64>,
    pub mssim: f64,
    /// dB over temporal difference signals; `None` encodes +infinity.
    pub tpsnr_db: Option<f64>,
}

impl QualityReport {
    pub fn measure(reference: &VideoClip, test: &VideoClip) -> Result<QualityReport> {
        Ok(QualityReport {
            psnr_db: finite_or_none(psnr(reference, test)?),
            mssim: mssim(reference, test)?,
            tpsnr_db: finite_or_none(tpsnr(reference, test)?),
        })
    }
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn check_same_shape(a: &VideoClip, b: &VideoClip) -> Result<()> {
    if a.data.dim() != b.data.dim() {
        return Err(Error::BadDims(format!(
            "clip shapes differ: {:?} vs {:?}",
            a.data.dim(),
            b.data.dim()
        )));
    }
    if a.colorspace != b.colorspace {
        return Err(Error::BadDims(
            "clips are in different colorspaces".into(),
        ));
    }
    Ok(())
}

/// Mean squared error over every sample of every channel.
fn mse(a: &VideoClip, b: &VideoClip) -> f64 {
    let n = a.data.len() as f64;
    a.data
        .iter()
        .zip(b.data.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n
}

/// PSNR in dB with peak 1.0; `+inf` when the clips are identical.
pub fn psnr(a: &VideoClip, b: &VideoClip) -> Result<f64> {
    check_same_shape(a, b)?;
    let e = mse(a, b);
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / e).log10())
}

/// PSNR of the temporal difference signals `x[t+1] - x[t]`.
///
/// Single-frame clips have an empty difference signal and compare as
/// identical (`+inf`).
pub fn tpsnr(a: &VideoClip, b: &VideoClip) -> Result<f64> {
    check_same_shape(a, b)?;
    let (t, _, _) = a.dims();
    if t < 2 {
        return Ok(f64::INFINITY);
    }
    let mut acc = 0.0f64;
    let mut n = 0usize;
    for (x, y) in a.data.outer_iter().zip(a.data.outer_iter().skip(1)).zip(
        b.data.outer_iter().zip(b.data.outer_iter().skip(1)),
    ) {
        let ((a0, a1), (b0, b1)) = (x, y);
        for (((p, q), r), s) in a0.iter().zip(a1.iter()).zip(b0.iter()).zip(b1.iter()) {
            let d = (q - p) - (s - r);
            acc += d * d;
            n += 1;
        }
    }
    if acc == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (n as f64 / acc).log10())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn ssim_window_weights() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for y in 0..SSIM_WINDOW {
        for x in 0..SSIM_WINDOW {
            let dy = y as f64 - c;
            let dx = x as f64 - c;
            let g = (-(dx * dx + dy * dy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w[y * SSIM_WINDOW + x] = g;
            sum += g;
        }
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Mean SSIM over all valid window positions of every frame's luma plane.
///
/// Frames must be at least 11x11. Scores land in `[-1, 1]` with 1.0 for
/// identical clips.
pub fn mssim(a: &VideoClip, b: &VideoClip) -> Result<f64> {
    check_same_shape(a, b)?;
    let (t, h, w) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::BadDims(format!(
            "frames {w}x{h} are smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let weights = ssim_window_weights();
    let c1 = SSIM_K1 * SSIM_K1; // (K1 * L)^2 with L = 1
    let c2 = SSIM_K2 * SSIM_K2;

    let la = a.luma();
    let lb = b.luma();
    let mut total = 0.0f64;
    let mut windows = 0usize;
    for ti in 0..t {
        let fa: Array2<f64> = la.index_axis(ndarray::Axis(0), ti).to_owned();
        let fb: Array2<f64> = lb.index_axis(ndarray::Axis(0), ti).to_owned();
        for y0 in 0..=(h - SSIM_WINDOW) {
            for x0 in 0..=(w - SSIM_WINDOW) {
                let (mut mu_a, mut mu_b) = (0.0f64, 0.0f64);
                let (mut aa, mut bb, mut ab) = (0.0f64, 0.0f64, 0.0f64);
                for dy in 0..SSIM_WINDOW {
                    for dx in 0..SSIM_WINDOW {
                        let g = weights[dy * SSIM_WINDOW + dx];
                        let va = fa[[y0 + dy, x0 + dx]];
                        let vb = fb[[y0 + dy, x0 + dx]];
                        mu_a += g * va;
                        mu_b += g * vb;
                        aa += g * va * va;
                        bb += g * vb * vb;
                        ab += g * va * vb;
                    }
                }
                let var_a = aa - mu_a * mu_a;
                let var_b = bb - mu_b * mu_b;
                let cov = ab - mu_a * mu_b;
                let score = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                    / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
                total += score;
                windows += 1;
            }
        }
    }
    Ok(total / windows as f64)
}

/// Fraction of positions where the two bit strings agree.
pub fn bit_accuracy(sent: &[bool], got: &[bool]) -> Result<f64> {
    if sent.len() != got.len() || sent.is_empty() {
        return Err(Error::BadDims(format!(
            "bit strings of length {} vs {}",
            sent.len(),
            got.len()
        )));
    }
    let matches = sent.iter().zip(got).filter(|(a, b)| a == b).count();
    Ok(matches as f64 / sent.len() as f64)
}
