//! Separable 3D Haar wavelet analysis and synthesis.
//!
//! The transform is the orthonormal Haar filter bank applied along the
//! temporal, vertical, and horizontal axes in turn, then recursed on the
//! low-pass octant. Each decomposition level therefore splits its input into
//! eight subbands addressed by a three-letter code such as `LLH`, where the
//! letters give the temporal, vertical, and horizontal half in that order.
//! The `LLL` octant is carried down to the next level; the remaining seven
//! detail bands are stored.
//!
//! Orthonormality matters downstream: coefficient perturbations map to pixel
//! residuals of identical energy, so embedding strength can be reasoned about
//! in either domain.

use ndarray::{Array3, Axis, s};

use crate::error::{Error, Result};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Subband address within one decomposition level.
///
/// Letter order is `(temporal, vertical, horizontal)`; `L` selects the
/// low-pass half along that axis and `H` the high-pass half.
#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    PartialOrd,
    Ord,
    Hash,
    serde::Serialize,
    serde::Deserialize,
)]
#[serde(rename_all = "UPPERCASE")]
pub enum BandCode {
    Lll,
    Llh,
    Lhl,
    Lhh,
    Hll,
    Hlh,
    Hhl,
    Hhh,
}

impl BandCode {
    pub const ALL: [BandCode; 8] = [
        BandCode::Lll,
        BandCode::Llh,
        BandCode::Lhl,
        BandCode::Lhh,
        BandCode::Hll,
        BandCode::Hlh,
        BandCode::Hhl,
        BandCode::Hhh,
    ];

    /// The seven detail bands of a level, in index order.
    pub const DETAIL: [BandCode; 7] = [
        BandCode::Llh,
        BandCode::Lhl,
        BandCode::Lhh,
        BandCode::Hll,
        BandCode::Hlh,
        BandCode::Hhl,
        BandCode::Hhh,
    ];

    /// 3-bit code: temporal bit is the MSB, horizontal the LSB; `Lll == 0`.
    pub fn index(self) -> usize {
        match self {
            BandCode::Lll => 0,
            BandCode::Llh => 1,
            BandCode::Lhl => 2,
            BandCode::Lhh => 3,
            BandCode::Hll => 4,
            BandCode::Hlh => 5,
            BandCode::Hhl => 6,
            BandCode::Hhh => 7,
        }
    }

    pub fn from_index(i: usize) -> Option<BandCode> {
        BandCode::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BandCode::Lll => "LLL",
            BandCode::Llh => "LLH",
            BandCode::Lhl => "LHL",
            BandCode::Lhh => "LHH",
            BandCode::Hll => "HLL",
            BandCode::Hlh => "HLH",
            BandCode::Hhl => "HHL",
            BandCode::Hhh => "HHH",
        }
    }

    pub fn parse(s: &str) -> Result<BandCode> {
        BandCode::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::BadBandCode(format!("unknown band code {s:?}")))
    }
}

impl std::fmt::Display for BandCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Multi-level 3D Haar decomposition of a `T x H x W` volume.
///
/// `detail[l - 1]` holds the seven detail bands of level `l` (finest level
/// first) in [`BandCode::DETAIL`] order; `approx` is the `LLL` band of the
/// deepest level. Subbands are plain owned arrays, so callers may edit them
/// and run [`dwt3_inverse`] to get the modified volume back.
#[derive(Debug, Clone)]
pub struct WaveletPyramid {
    levels: usize,
    dims: (usize, usize, usize),
    detail: Vec<[Array3<f64>; 7]>,
    approx: Array3<f64>,
}

impl WaveletPyramid {
    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Dimensions of the analyzed volume.
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    /// Subband shape at `level` (1-based): each axis halves per level.
    pub fn level_shape(&self, level: usize) -> (usize, usize, usize) {
        let (t, h, w) = self.dims;
        (t >> level, h >> level, w >> level)
    }

    fn check_addr(&self, level: usize, code: BandCode) -> Result<()> {
        if level == 0 || level > self.levels {
            return Err(Error::BadBandCode(format!(
                "level {level} out of range 1..={}",
                self.levels
            )));
        }
        if code == BandCode::Lll && level != self.levels {
            return Err(Error::BadBandCode(format!(
                "LLL is only addressable at the deepest level ({})",
                self.levels
            )));
        }
        Ok(())
    }

    /// Immutable view of one subband.
    pub fn band(&self, level: usize, code: BandCode) -> Result<&Array3<f64>> {
        self.check_addr(level, code)?;
        Ok(match code {
            BandCode::Lll => &self.approx,
            _ => &self.detail[level - 1][code.index() - 1],
        })
    }

    /// Mutable view of one subband; edits feed into [`dwt3_inverse`].
    pub fn band_mut(&mut self, level: usize, code: BandCode) -> Result<&mut Array3<f64>> {
        self.check_addr(level, code)?;
        Ok(match code {
            BandCode::Lll => &mut self.approx,
            _ => &mut self.detail[level - 1][code.index() - 1],
        })
    }

    /// Sum of squared coefficients over every stored subband.
    pub fn energy(&self) -> f64 {
        let mut e: f64 = self.approx.iter().map(|v| v * v).sum();
        for level in &self.detail {
            for band in level {
                e += band.iter().map(|v| v * v).sum::<f64>();
            }
        }
        e
    }
}

fn check_shape(dims: (usize, usize, usize), levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::BadShape("need at least one level".into()));
    }
    let div = 1usize << levels;
    for (name, n) in [("T", dims.0), ("H", dims.1), ("W", dims.2)] {
        if n < div {
            return Err(Error::BadShape(format!(
                "axis {name}={n} is shorter than 2^{levels}"
            )));
        }
        if n % div != 0 {
            return Err(Error::BadShape(format!(
                "axis {name}={n} is not divisible by 2^{levels}; pad the input first"
            )));
        }
    }
    Ok(())
}

/// One orthonormal Haar analysis step along `axis`, in place:
/// lane `[x0, x1, x2, ...]` becomes `[averages | details]` with
/// `a_i = (x_{2i} + x_{2i+1}) / sqrt(2)` and `d_i = (x_{2i} - x_{2i+1}) / sqrt(2)`.
fn haar_step_axis(vol: &mut Array3<f64>, axis: Axis) {
    let n = vol.len_of(axis);
    debug_assert!(n.is_multiple_of(2));
    let half = n / 2;
    let mut scratch = vec![0.0f64; n];
    for mut lane in vol.lanes_mut(axis) {
        for i in 0..half {
            let x0 = lane[2 * i];
            let x1 = lane[2 * i + 1];
            scratch[i] = (x0 + x1) * FRAC_1_SQRT_2;
            scratch[half + i] = (x0 - x1) * FRAC_1_SQRT_2;
        }
        for (dst, v) in lane.iter_mut().zip(&scratch) {
            *dst = *v;
        }
    }
}

/// Inverse of [`haar_step_axis`].
fn haar_unstep_axis(vol: &mut Array3<f64>, axis: Axis) {
    let n = vol.len_of(axis);
    debug_assert!(n.is_multiple_of(2));
    let half = n / 2;
    let mut scratch = vec![0.0f64; n];
    for mut lane in vol.lanes_mut(axis) {
        for i in 0..half {
            let a = lane[i];
            let d = lane[half + i];
            scratch[2 * i] = (a + d) * FRAC_1_SQRT_2;
            scratch[2 * i + 1] = (a - d) * FRAC_1_SQRT_2;
        }
        for (dst, v) in lane.iter_mut().zip(&scratch) {
            *dst = *v;
        }
    }
}

/// Slice bounds of `code` inside a transformed block of shape `(t, h, w)`.
fn octant_ranges(code: BandCode, t: usize, h: usize, w: usize) -> [std::ops::Range<usize>; 3] {
    let pick = |high: bool, n: usize| if high { n / 2..n } else { 0..n / 2 };
    let idx = code.index();
    [
        pick(idx & 4 != 0, t),
        pick(idx & 2 != 0, h),
        pick(idx & 1 != 0, w),
    ]
}

/// Forward multi-level 3D Haar transform.
///
/// Every axis must be divisible by `2^levels`; inputs that are not should be
/// padded by the caller (see [`pad_to_multiple`]) so that synthesis can crop
/// back to the original extent.
pub fn dwt3_forward(vol: &Array3<f64>, levels: usize) -> Result<WaveletPyramid> {
    check_shape(vol.dim(), levels)?;
    let mut work = vol.clone();
    let mut detail = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (t, h, w) = work.dim();
        haar_step_axis(&mut work, Axis(0));
        haar_step_axis(&mut work, Axis(1));
        haar_step_axis(&mut work, Axis(2));
        let mut bands = Vec::with_capacity(7);
        for code in BandCode::DETAIL {
            let [rt, rh, rw] = octant_ranges(code, t, h, w);
            bands.push(work.slice(s![rt, rh, rw]).to_owned());
        }
        let bands: [Array3<f64>; 7] = bands.try_into().expect("seven detail bands");
        detail.push(bands);
        work = work.slice(s![0..t / 2, 0..h / 2, 0..w / 2]).to_owned();
    }
    Ok(WaveletPyramid {
        levels,
        dims: vol.dim(),
        detail,
        approx: work,
    })
}

/// Synthesis back to a `T x H x W` volume. Exact inverse of [`dwt3_forward`]
/// up to floating-point rounding.
pub fn dwt3_inverse(pyr: &WaveletPyramid) -> Array3<f64> {
    let mut cur = pyr.approx.clone();
    for level in (1..=pyr.levels).rev() {
        let (bt, bh, bw) = cur.dim();
        let (t, h, w) = (bt * 2, bh * 2, bw * 2);
        let mut block = Array3::zeros((t, h, w));
        block.slice_mut(s![0..bt, 0..bh, 0..bw]).assign(&cur);
        for code in BandCode::DETAIL {
            let [rt, rh, rw] = octant_ranges(code, t, h, w);
            block
                .slice_mut(s![rt, rh, rw])
                .assign(&pyr.detail[level - 1][code.index() - 1]);
        }
        haar_unstep_axis(&mut block, Axis(2));
        haar_unstep_axis(&mut block, Axis(1));
        haar_unstep_axis(&mut block, Axis(0));
        cur = block;
    }
    cur
}

/// Pads a volume so every axis is a multiple of `2^levels`, replicating the
/// trailing edge. Returns the padded volume and the original dimensions for a
/// later [`crop_to`].
pub fn pad_to_multiple(vol: &Array3<f64>, levels: usize) -> (Array3<f64>, (usize, usize, usize)) {
    let (t, h, w) = vol.dim();
    let div = 1usize << levels;
    let round_up = |n: usize| n.div_ceil(div) * div;
    let (pt, ph, pw) = (round_up(t), round_up(h), round_up(w));
    if (pt, ph, pw) == (t, h, w) {
        return (vol.clone(), (t, h, w));
    }
    let mut out = Array3::zeros((pt, ph, pw));
    for ((i, j, k), v) in out.indexed_iter_mut() {
        *v = vol[[i.min(t - 1), j.min(h - 1), k.min(w - 1)]];
    }
    (out, (t, h, w))
}

/// Crops a (padded) volume back to `dims`.
pub fn crop_to(vol: &Array3<f64>, dims: (usize, usize, usize)) -> Array3<f64> {
    vol.slice(s![0..dims.0, 0..dims.1, 0..dims.2]).to_owned()
}
