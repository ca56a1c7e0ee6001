//! In-memory video representation.
//!
//! A [`VideoClip`] is a dense `T x H x W x C` array of `f64` samples in
//! `[0, 1]` with `C = 3` channels, tagged with a [`Colorspace`]. All
//! processing stays real-valued; quantization to 8 bits happens only at the
//! file-format boundary (see the `io` module).

use ndarray::{Array3, Array4, Axis};

use crate::error::{Error, Result};

/// Channel interpretation of a clip.
///
/// `Yuv` means full-range BT.601 YCbCr with the chroma planes offset so that
/// neutral chroma sits at 0.5 (the JFIF convention, mapped onto `[0, 1]`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Colorspace {
    Rgb,
    Yuv,
}

/// BT.601 luma weights for full-range RGB.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// A real-valued video clip: `T` frames of `H x W` pixels with 3 channels.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    /// Samples indexed `(t, y, x, c)`.
    pub data: Array4<f64>,
    pub colorspace: Colorspace,
}

impl VideoClip {
    /// Wraps an array as a clip. The channel axis must have length 3 and no
    /// spatial/temporal axis may be empty.
    pub fn new(data: Array4<f64>, colorspace: Colorspace) -> Result<Self> {
        let (t, h, w, c) = data.dim();
        if c != 3 {
            return Err(Error::BadDims(format!("expected 3 channels, got {c}")));
        }
        if t == 0 || h == 0 || w == 0 {
            return Err(Error::BadDims(format!("empty clip axis in {t}x{h}x{w}")));
        }
        Ok(Self { data, colorspace })
    }

    /// All-zero clip (black in RGB terms).
    pub fn zeros(t: usize, h: usize, w: usize, colorspace: Colorspace) -> Self {
        Self {
            data: Array4::zeros((t, h, w, 3)),
            colorspace,
        }
    }

    /// `(T, H, W)` without the channel axis.
    pub fn dims(&self) -> (usize, usize, usize) {
        let (t, h, w, _) = self.data.dim();
        (t, h, w)
    }

    pub fn num_frames(&self) -> usize {
        self.data.dim().0
    }

    /// Extracts the luma plane as a `T x H x W` array.
    ///
    /// For YUV clips this is a copy of channel 0; for RGB clips it is the
    /// BT.601 weighted sum, computed without converting the whole clip.
    pub fn luma(&self) -> Array3<f64> {
        let (t, h, w, _) = self.data.dim();
        match self.colorspace {
            Colorspace::Yuv => self.data.index_axis(Axis(3), 0).to_owned(),
            Colorspace::Rgb => {
                let mut out = Array3::zeros((t, h, w));
                for ((i, j, k), y) in out.indexed_iter_mut() {
                    let r = self.data[[i, j, k, 0]];
                    let g = self.data[[i, j, k, 1]];
                    let b = self.data[[i, j, k, 2]];
                    *y = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b;
                }
                out
            }
        }
    }

    /// Adds `alpha * residual` to the luma component in place, leaving chroma
    /// untouched.
    ///
    /// For YUV clips this touches channel 0 only. For RGB clips the residual
    /// is added to all three channels, which perturbs BT.601 luma by exactly
    /// `alpha * residual` (the weights sum to 1) and leaves both chroma
    /// differences unchanged.
    pub fn add_luma(&mut self, residual: &Array3<f64>, alpha: f64) -> Result<()> {
        let (t, h, w, _) = self.data.dim();
        if residual.dim() != (t, h, w) {
            return Err(Error::BadDims(format!(
                "residual {:?} does not match clip {t}x{h}x{w}",
                residual.dim()
            )));
        }
        match self.colorspace {
            Colorspace::Yuv => {
                let mut y = self.data.index_axis_mut(Axis(3), 0);
                y.zip_mut_with(residual, |v, r| *v += alpha * r);
            }
            Colorspace::Rgb => {
                for ((i, j, k), r) in residual.indexed_iter() {
                    let d = alpha * r;
                    self.data[[i, j, k, 0]] += d;
                    self.data[[i, j, k, 1]] += d;
                    self.data[[i, j, k, 2]] += d;
                }
            }
        }
        Ok(())
    }

    /// Clamps every sample to `[0, 1]` in place.
    pub fn clamp_unit(&mut self) {
        self.data.mapv_inplace(|v| v.clamp(0.0, 1.0));
    }

    /// Converts to the requested colorspace; a no-op copy if already there.
    pub fn to_colorspace(&self, target: Colorspace) -> VideoClip {
        if self.colorspace == target {
            return self.clone();
        }
        let mut data = self.data.clone();
        match target {
            Colorspace::Yuv => {
                for mut px in data.rows_mut() {
                    let [r, g, b] = [px[0], px[1], px[2]];
                    let (y, u, v) = rgb_to_yuv(r, g, b);
                    px[0] = y;
                    px[1] = u;
                    px[2] = v;
                }
            }
            Colorspace::Rgb => {
                for mut px in data.rows_mut() {
                    let [y, u, v] = [px[0], px[1], px[2]];
                    let (r, g, b) = yuv_to_rgb(y, u, v);
                    px[0] = r;
                    px[1] = g;
                    px[2] = b;
                }
            }
        }
        VideoClip {
            data,
            colorspace: target,
        }
    }
}

/// Full-range BT.601 RGB -> YCbCr, chroma offset to 0.5.
#[inline]
pub fn rgb_to_yuv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let u = -0.168_735_891_647_855_6 * r - 0.331_264_108_352_144_4 * g + 0.5 * b + 0.5;
    let v = 0.5 * r - 0.418_687_589_158_345_2 * g - 0.081_312_410_841_654_79 * b + 0.5;
    (y, u, v)
}

/// Inverse of [`rgb_to_yuv`].
#[inline]
pub fn yuv_to_rgb(y: f64, u: f64, v: f64) -> (f64, f64, f64) {
    let cb = u - 0.5;
    let cr = v - 0.5;
    let r = y + 1.402 * cr;
    let g = y - 0.344_136_286_201_022_15 * cb - 0.714_136_286_201_022_1 * cr;
    let b = y + 1.772 * cb;
    (r, g, b)
}
