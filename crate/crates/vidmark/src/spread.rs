//! Spread-spectrum watermark embedding and blind extraction.
//!
//! The payload is a short bit string. Each bit is assigned a disjoint set of
//! `chip_len` coefficient slots drawn from the mid-frequency subbands of the
//! luma channel's 3-level 3D Haar decomposition (by default the six level-2
//! bands that mix low- and high-pass axes — the `LLL` approximation is
//! excluded to keep the mark invisible, `HHH` because it rarely survives
//! processing). Embedding adds `alpha * chip * (2b - 1)` to each slot, where
//! the chips are a balanced pseudo-random ±1 sequence derived from the key
//! seed. The marked clip is the cover plus a strength-scaled residual; with
//! clamping disabled that residual is exactly linear in `alpha`.
//!
//! Extraction is blind: correlate the suspect clip's coefficients with the
//! chip sequences. Correlations are standardized per band against the band's
//! own empirical scale, then soft-combined with weights proportional to each
//! band's correlation-energy surplus, so bands wrecked by an attack drop out
//! of the vote.
//!
//! Everything is derived deterministically from `(seed, payload geometry)`;
//! a key file stores only that recipe, never the chips themselves.

use std::path::Path;

use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clip::VideoClip;
use crate::detector::NullModel;
use crate::error::{Error, Result};
use crate::wavelet::{
    crop_to, dwt3_forward, dwt3_inverse, pad_to_multiple, BandCode, WaveletPyramid,
};

/// Payload bit string.
pub type Message = Vec<bool>;

/// Decomposition depth used by this scheme.
pub const DWT_LEVELS: usize = 3;

/// Level whose subbands carry the payload: deep enough to survive filtering,
/// shallow enough to leave plenty of slots.
pub const DEFAULT_LEVEL: usize = 2;

/// Default carrier bands: everything at the embedding level except the `LLL`
/// approximation (visibility) and the `HHH` corner (fragility).
pub fn default_bands() -> Vec<BandCode> {
    vec![
        BandCode::Llh,
        BandCode::Lhl,
        BandCode::Lhh,
        BandCode::Hll,
        BandCode::Hlh,
        BandCode::Hhl,
    ]
}

/// Serializable key recipe. The concrete slot assignment is re-derived from
/// this (plus the clip geometry) on every use; see [`KeySpec::materialize`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeySpec {
    pub version: u32,
    pub seed: u64,
    /// Payload length in bits.
    pub m: usize,
    /// Coefficient slots per bit.
    pub chip_len: usize,
    /// Decomposition level carrying the payload.
    pub level: usize,
    pub bands: Vec<BandCode>,
    /// Detector calibration; written back by `calibrate`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub null: Option<NullModel>,
}

pub const KEY_VERSION: u32 = 1;

impl KeySpec {
    pub fn new(seed: u64, m: usize, chip_len: usize) -> KeySpec {
        KeySpec {
            version: KEY_VERSION,
            seed,
            m,
            chip_len,
            level: DEFAULT_LEVEL,
            bands: default_bands(),
            null: None,
        }
    }

    fn check(&self) -> Result<()> {
        if self.version != KEY_VERSION {
            return Err(Error::UnsupportedFormat(format!(
                "key version {} (supported: {KEY_VERSION})",
                self.version
            )));
        }
        if self.m == 0 || self.chip_len == 0 {
            return Err(Error::BadParam("m and chip_len must be positive".into()));
        }
        if self.level == 0 || self.level > DWT_LEVELS {
            return Err(Error::BadParam(format!(
                "embedding level {} outside 1..={DWT_LEVELS}",
                self.level
            )));
        }
        if self.bands.is_empty() {
            return Err(Error::BadParam("no carrier bands".into()));
        }
        let mut seen = self.bands.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.bands.len() {
            return Err(Error::BadParam("duplicate carrier band".into()));
        }
        if self.bands.contains(&BandCode::Lll) && self.level != DWT_LEVELS {
            return Err(Error::BadBandCode(
                "LLL carries payload only at the deepest level".into(),
            ));
        }
        Ok(())
    }

    /// Derives the concrete per-bit slot assignment and chip sequences for a
    /// clip of the given dimensions.
    pub fn materialize(&self, clip_dims: (usize, usize, usize)) -> Result<WatermarkKey> {
        self.check()?;
        let mut slots = usable_slots(clip_dims, self.level, self.bands.len());
        let needed = self.m * self.chip_len;
        if needed > slots.len() {
            return Err(Error::PayloadTooLarge {
                needed,
                capacity: slots.len(),
            });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);

        // Balanced ±1 chips for every bit: |sum| <= 1 by construction.
        let mut chips = Vec::with_capacity(self.m);
        for _ in 0..self.m {
            let mut seq = vec![1.0f64; self.chip_len.div_ceil(2)];
            seq.resize(self.chip_len, -1.0);
            seq.shuffle(&mut rng);
            chips.push(seq);
        }

        // One shuffled pass over all candidate slots, chunked per bit, gives
        // disjoint assignments (zero cross-bit interference) spread across
        // every carrier band.
        slots.shuffle(&mut rng);
        slots.truncate(needed);
        let assignment: Vec<Vec<Slot>> = slots
            .chunks(self.chip_len)
            .map(|c| c.to_vec())
            .collect();

        Ok(WatermarkKey {
            spec: self.clone(),
            clip_dims,
            assignment,
            chips,
        })
    }
}

/// One coefficient slot: a band (index into `spec.bands`) plus coordinates
/// within that band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub band: usize,
    pub t: usize,
    pub y: usize,
    pub x: usize,
}

/// A key recipe materialized for concrete clip dimensions.
#[derive(Debug, Clone)]
pub struct WatermarkKey {
    pub spec: KeySpec,
    /// Dimensions (pre-padding) this key was derived for.
    pub clip_dims: (usize, usize, usize),
    /// `m` disjoint slot lists of `chip_len` entries each.
    assignment: Vec<Vec<Slot>>,
    /// `m` balanced ±1 sequences of `chip_len` entries each.
    chips: Vec<Vec<f64>>,
}

impl WatermarkKey {
    pub fn assignment(&self) -> &[Vec<Slot>] {
        &self.assignment
    }

    pub fn chips(&self) -> &[Vec<f64>] {
        &self.chips
    }

    fn check_clip(&self, clip: &VideoClip) -> Result<()> {
        if clip.dims() != self.clip_dims {
            return Err(Error::KeyClipMismatch {
                key_dims: self.clip_dims,
                clip_dims: clip.dims(),
            });
        }
        Ok(())
    }
}

fn padded_dims(dims: (usize, usize, usize)) -> (usize, usize, usize) {
    let div = 1usize << DWT_LEVELS;
    let up = |n: usize| n.div_ceil(div) * div;
    (up(dims.0), up(dims.1), up(dims.2))
}

fn level_band_shape(padded: (usize, usize, usize), level: usize) -> (usize, usize, usize) {
    (padded.0 >> level, padded.1 >> level, padded.2 >> level)
}

/// Candidate slots for clips of `clip_dims`, across `n_bands` carrier bands.
///
/// When the clip needs padding to reach a transform-friendly size, slots
/// whose basis support reaches into the padded region are excluded: Haar
/// basis functions at level `l` cover non-overlapping `2^l`-sample blocks,
/// so a slot either lives entirely in real content (and survives the
/// crop/re-pad round trip exactly) or partly in synthetic padding (and would
/// lose part of its chip on every crop).
fn usable_slots(clip_dims: (usize, usize, usize), level: usize, n_bands: usize) -> Vec<Slot> {
    let shape = level_band_shape(padded_dims(clip_dims), level);
    let support = 1usize << level;
    let fits = |coord: usize, extent: usize| (coord + 1) * support <= extent;
    let mut slots = Vec::new();
    for band in 0..n_bands {
        for t in (0..shape.0).filter(|t| fits(*t, clip_dims.0)) {
            for y in (0..shape.1).filter(|y| fits(*y, clip_dims.1)) {
                for x in (0..shape.2).filter(|x| fits(*x, clip_dims.2)) {
                    slots.push(Slot { band, t, y, x });
                }
            }
        }
    }
    slots
}

/// Maximum payload (bits) a clip of `clip_dims` can carry at `chip_len`
/// slots per bit, using the default level and bands.
pub fn capacity(clip_dims: (usize, usize, usize), chip_len: usize) -> usize {
    if chip_len == 0 {
        return 0;
    }
    usable_slots(clip_dims, DEFAULT_LEVEL, default_bands().len()).len() / chip_len
}

/// Convenience constructor: default level/bands, seeded recipe, materialized
/// for `clip_dims`.
pub fn gen_key(
    seed: u64,
    m: usize,
    clip_dims: (usize, usize, usize),
    chip_len: usize,
) -> Result<WatermarkKey> {
    KeySpec::new(seed, m, chip_len).materialize(clip_dims)
}

pub fn save_key_spec(spec: &KeySpec, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(spec)?)?;
    Ok(())
}

pub fn load_key_spec(path: &Path) -> Result<KeySpec> {
    let spec: KeySpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    spec.check()?;
    Ok(spec)
}

/// The unit-strength luma residual for `(key, msg)`: the synthesis of a
/// coefficient volume holding `chip * (2b - 1)` at every assigned slot.
///
/// The marked clip is `cover + alpha * residual` (then clamped), so the
/// residual fully determines the mark and is independent of both `alpha`
/// and the cover.
pub fn residual(key: &WatermarkKey, msg: &Message) -> Result<Array3<f64>> {
    if msg.len() != key.spec.m {
        return Err(Error::BadDims(format!(
            "message has {} bits, key expects {}",
            msg.len(),
            key.spec.m
        )));
    }
    let padded = padded_dims(key.clip_dims);
    let shape = level_band_shape(padded, key.spec.level);
    let mut planes: Vec<Array3<f64>> = vec![Array3::zeros(shape); key.spec.bands.len()];
    for (i, (slots, chips)) in key.assignment.iter().zip(&key.chips).enumerate() {
        let sign = if msg[i] { 1.0 } else { -1.0 };
        for (slot, chip) in slots.iter().zip(chips) {
            planes[slot.band][[slot.t, slot.y, slot.x]] = chip * sign;
        }
    }
    let zeros = Array3::zeros(padded);
    let mut pyr: WaveletPyramid = dwt3_forward(&zeros, DWT_LEVELS)?;
    for (bi, code) in key.spec.bands.iter().enumerate() {
        pyr.band_mut(key.spec.level, *code)?.assign(&planes[bi]);
    }
    let full = dwt3_inverse(&pyr);
    Ok(crop_to(&full, key.clip_dims))
}

/// Adds `alpha * residual` to the cover's luma and clamps to `[0, 1]`.
pub fn apply_residual(cover: &VideoClip, residual: &Array3<f64>, alpha: f64) -> Result<VideoClip> {
    let mut out = cover.clone();
    out.add_luma(residual, alpha)?;
    out.clamp_unit();
    Ok(out)
}

/// Embeds `msg` into `cover` at strength `alpha`.
///
/// `alpha == 0` returns the cover unchanged, bit for bit. Output samples are
/// clamped to `[0, 1]`; use [`embed_unclamped`] to study the raw residual.
pub fn embed(cover: &VideoClip, msg: &Message, key: &WatermarkKey, alpha: f64) -> Result<VideoClip> {
    key.check_clip(cover)?;
    if alpha == 0.0 {
        if msg.len() != key.spec.m {
            return Err(Error::BadDims(format!(
                "message has {} bits, key expects {}",
                msg.len(),
                key.spec.m
            )));
        }
        return Ok(cover.clone());
    }
    let r = residual(key, msg)?;
    apply_residual(cover, &r, alpha)
}

/// Embeds `msg` into a clip of arbitrary length by cutting it into
/// key-sized temporal segments (the tail is padded by frame replication,
/// marked, and trimmed back) and embedding the same message in each with
/// the same key. This is how long content gets marked: every key-aligned
/// window then carries the full payload, which is what sliding-window
/// detection relies on.
pub fn embed_tiled(
    cover: &VideoClip,
    msg: &Message,
    key: &WatermarkKey,
    alpha: f64,
) -> Result<VideoClip> {
    let (kt, kh, kw) = key.clip_dims;
    let (_, h, w) = cover.dims();
    if (h, w) != (kh, kw) {
        return Err(Error::KeyClipMismatch {
            key_dims: key.clip_dims,
            clip_dims: cover.dims(),
        });
    }
    let (segments, layout) = crate::tile::tile_temporal(cover, kt)?;
    let marked: Vec<VideoClip> = segments
        .iter()
        .map(|seg| embed(seg, msg, key, alpha))
        .collect::<Result<_>>()?;
    crate::tile::untile_temporal(&marked, &layout)
}

/// Combined decode of a segment-wise marked clip (see [`embed_tiled`]).
#[derive(Debug, Clone)]
pub struct TiledExtraction {
    pub message: Message,
    /// Per-bit soft scores, averaged over segments (repetition decoding).
    pub soft: Vec<f64>,
    pub segments: Vec<ExtractionResult>,
}

/// Decodes a clip marked with [`embed_tiled`]: every key-length segment
/// carries the same message, so the per-bit soft votes average across
/// segments before thresholding. Short or ragged clips are padded the same
/// way the embedder padded them.
pub fn extract_tiled(suspect: &VideoClip, key: &WatermarkKey) -> Result<TiledExtraction> {
    let (kt, kh, kw) = key.clip_dims;
    let (_, h, w) = suspect.dims();
    if (h, w) != (kh, kw) {
        return Err(Error::KeyClipMismatch {
            key_dims: key.clip_dims,
            clip_dims: suspect.dims(),
        });
    }
    let (segments, _) = crate::tile::tile_temporal(suspect, kt)?;
    let results: Vec<ExtractionResult> = segments
        .iter()
        .map(|seg| extract(seg, key))
        .collect::<Result<_>>()?;
    let m = key.spec.m;
    let mut soft = vec![0.0f64; m];
    for res in &results {
        for (acc, s) in soft.iter_mut().zip(&res.soft) {
            *acc += s;
        }
    }
    for s in &mut soft {
        *s /= results.len() as f64;
    }
    let message = soft.iter().map(|s| *s > 0.0).collect();
    Ok(TiledExtraction {
        message,
        soft,
        segments: results,
    })
}

/// [`embed`] without the final clamp — the marked clip may exceed `[0, 1]`.
/// Exists so the `alpha`-linearity of the scheme can be verified directly.
pub fn embed_unclamped(
    cover: &VideoClip,
    msg: &Message,
    key: &WatermarkKey,
    alpha: f64,
) -> Result<VideoClip> {
    key.check_clip(cover)?;
    let r = residual(key, msg)?;
    let mut out = cover.clone();
    out.add_luma(&r, alpha)?;
    Ok(out)
}

/// Outcome of blind extraction.
#[derive(Debug, Clone)]
pub struct ExtractionResult {
    /// Hard bit decisions: `soft > 0`; an exact zero decodes as 0.
    pub message: Message,
    /// Per-bit combined correlation; magnitude is confidence.
    pub soft: Vec<f64>,
    /// Standardized per-band correlations, `m x bands`.
    pub per_band: Vec<Vec<f64>>,
    /// The SNR-derived combining weights actually used (sums to 1).
    pub band_weights: Vec<f64>,
    /// Mean absolute soft score — the detection statistic.
    pub raw_stat: f64,
    /// `raw_stat` standardized against the analytic chip-noise null.
    pub z: f64,
    /// `z` squashed to `[0, 1]`; replaced by calibrated scoring in the
    /// detector, which standardizes against an empirical null instead.
    pub detection: f64,
}

/// Logistic squash used for detection scores: 0.5 at `z == SCORE_MIDPOINT`.
pub const SCORE_MIDPOINT: f64 = 4.0;
pub const SCORE_SCALE: f64 = 0.75;

pub fn score_from_z(z: f64) -> f64 {
    1.0 / (1.0 + (-(z - SCORE_MIDPOINT) / SCORE_SCALE).exp())
}

/// Blind extraction: correlate the suspect's coefficients with the key's
/// chips and soft-combine the per-band votes.
pub fn extract(suspect: &VideoClip, key: &WatermarkKey) -> Result<ExtractionResult> {
    key.check_clip(suspect)?;
    let (padded, _) = pad_to_multiple(&suspect.luma(), DWT_LEVELS);
    let pyr = dwt3_forward(&padded, DWT_LEVELS)?;

    let n_bands = key.spec.bands.len();
    let m = key.spec.m;

    let bands: Vec<&Array3<f64>> = key
        .spec
        .bands
        .iter()
        .map(|c| pyr.band(key.spec.level, *c))
        .collect::<Result<_>>()?;

    // Per-band coefficient scale; the trailing epsilon keeps flat content
    // (all-zero bands) from dividing by zero.
    let sigma: Vec<f64> = bands
        .iter()
        .map(|b| {
            let ms = b.iter().map(|v| v * v).sum::<f64>() / b.len() as f64;
            ms.sqrt().max(1e-9)
        })
        .collect();

    // Standardized correlation of every (bit, band) pair.
    let mut rho = vec![vec![0.0f64; n_bands]; m];
    let mut counts = vec![vec![0usize; n_bands]; m];
    for (i, (slots, chips)) in key.assignment.iter().zip(&key.chips).enumerate() {
        let mut corr = vec![0.0f64; n_bands];
        for (slot, chip) in slots.iter().zip(chips) {
            corr[slot.band] += chip * bands[slot.band][[slot.t, slot.y, slot.x]];
            counts[i][slot.band] += 1;
        }
        for b in 0..n_bands {
            if counts[i][b] > 0 {
                rho[i][b] = corr[b] / ((counts[i][b] as f64).sqrt() * sigma[b]);
            }
        }
    }

    // Correlation-energy surplus per band: under no watermark the
    // standardized correlations have unit variance, so anything above 1 is
    // signal. Bands with no surplus get zero weight.
    let mut weights = vec![0.0f64; n_bands];
    for b in 0..n_bands {
        let mut e = 0.0f64;
        let mut n = 0usize;
        for i in 0..m {
            if counts[i][b] > 0 {
                e += rho[i][b] * rho[i][b];
                n += 1;
            }
        }
        if n > 0 {
            weights[b] = (e / n as f64 - 1.0).max(0.0);
        }
    }
    let wsum: f64 = weights.iter().sum();
    if wsum > 0.0 {
        for w in &mut weights {
            *w /= wsum;
        }
    } else {
        // No band shows signal; fall back to a uniform vote.
        for w in &mut weights {
            *w = 1.0 / n_bands as f64;
        }
    }

    let soft: Vec<f64> = (0..m)
        .map(|i| (0..n_bands).map(|b| weights[b] * rho[i][b]).sum())
        .collect();
    let message: Message = soft.iter().map(|s| *s > 0.0).collect();

    // Analytic null: each soft score is a weighted sum of ~unit-variance
    // terms, so |soft| has a folded-normal distribution.
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    let s = s2.sqrt();
    let raw_stat = soft.iter().map(|v| v.abs()).sum::<f64>() / m as f64;
    let null_mean = s * (2.0 / std::f64::consts::PI).sqrt();
    let null_std = s * (1.0 - 2.0 / std::f64::consts::PI).sqrt() / (m as f64).sqrt();
    let z = (raw_stat - null_mean) / null_std;

    Ok(ExtractionResult {
        message,
        soft,
        per_band: rho,
        band_weights: weights,
        raw_stat,
        z,
        detection: score_from_z(z),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clip::Colorspace;
    use crate::metrics::bit_accuracy;
    use ndarray::Array4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn textured_clip(seed: u64, t: usize, h: usize, w: usize) -> VideoClip {
        // Mid-gray base with enough random texture that extraction has to
        // work against realistic coefficient noise.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data =
            Array4::from_shape_fn((t, h, w, 3), |_| 0.5 + 0.25 * (rng.random::<f64>() - 0.5));
        VideoClip::new(data, Colorspace::Rgb).unwrap()
    }

    fn random_message(seed: u64, m: usize) -> Message {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| rng.random::<bool>()).collect()
    }

    const DIMS: (usize, usize, usize) = (8, 64, 64);

    #[test]
    fn capacity_accounting() {
        // Six bands of 2x32x32 coefficients at level 2 for an 8x128x128 clip.
        assert_eq!(capacity((8, 128, 128), 1), 12288);
        assert_eq!(capacity((8, 128, 128), 128), 96);
        // 13 frames pad up to 16, giving 4 temporal slot positions, but only
        // the 3 whose 4-frame support stays inside the real 13 frames count.
        assert_eq!(capacity((13, 128, 128), 1), 3 * 32 * 32 * 6);
        assert_eq!(capacity((8, 128, 128), 0), 0);
    }

    #[test]
    fn payload_limit_is_enforced() {
        assert!(gen_key(1, 96, (8, 128, 128), 128).is_ok());
        assert!(matches!(
            gen_key(1, 96, (8, 128, 128), 129),
            Err(Error::PayloadTooLarge { .. })
        ));
        assert!(matches!(
            gen_key(1, 97, (8, 128, 128), 128),
            Err(Error::PayloadTooLarge { .. })
        ));
    }

    #[test]
    fn derivation_is_deterministic() {
        let a = gen_key(42, 16, DIMS, 32).unwrap();
        let b = gen_key(42, 16, DIMS, 32).unwrap();
        assert_eq!(a.assignment(), b.assignment());
        assert_eq!(a.chips(), b.chips());
        let c = gen_key(43, 16, DIMS, 32).unwrap();
        assert_ne!(a.assignment(), c.assignment());
    }

    #[test]
    fn chips_are_balanced() {
        for chip_len in [32usize, 33, 64, 128] {
            let key = gen_key(7, 8, DIMS, chip_len).unwrap();
            for chips in key.chips() {
                let sum: f64 = chips.iter().sum();
                assert!(sum.abs() <= 1.0, "chip sum {sum} at len {chip_len}");
            }
        }
    }

    #[test]
    fn assignments_are_disjoint_and_in_range() {
        let key = gen_key(3, 96, (8, 128, 128), 128).unwrap();
        let mut seen = std::collections::HashSet::new();
        for slots in key.assignment() {
            assert_eq!(slots.len(), 128);
            for slot in slots {
                assert!(slot.band < 6);
                assert!(slot.t < 2 && slot.y < 32 && slot.x < 32);
                // Disjointness makes the spreading patterns of different bits
                // exactly orthogonal: no coefficient votes for two bits.
                assert!(seen.insert((slot.band, slot.t, slot.y, slot.x)));
            }
        }
        assert_eq!(seen.len(), 96 * 128);
    }

    #[test]
    fn zero_alpha_is_identity() {
        let cover = textured_clip(1, DIMS.0, DIMS.1, DIMS.2);
        let key = gen_key(5, 32, DIMS, 64).unwrap();
        let msg = random_message(2, 32);
        let out = embed(&cover, &msg, &key, 0.0).unwrap();
        assert_eq!(out.data, cover.data);
    }

    #[test]
    fn residual_is_linear_in_alpha() {
        let cover = textured_clip(2, DIMS.0, DIMS.1, DIMS.2);
        let key = gen_key(6, 32, DIMS, 64).unwrap();
        let msg = random_message(3, 32);
        for alpha in [0.25, 0.5, 1.0, 2.0] {
            let d1 = embed_unclamped(&cover, &msg, &key, alpha).unwrap();
            let d2 = embed_unclamped(&cover, &msg, &key, 2.0 * alpha).unwrap();
            for ((a, b), c) in d1
                .data
                .iter()
                .zip(d2.data.iter())
                .zip(cover.data.iter())
            {
                let r1 = a - c;
                let r2 = b - c;
                assert!((r2 - 2.0 * r1).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn residual_energy_matches_coefficient_energy() {
        // Orthonormal synthesis: the pixel-domain residual energy equals the
        // chip energy, m * chip_len (every chip is ±1).
        let key = gen_key(8, 32, DIMS, 64).unwrap();
        let msg = random_message(4, 32);
        let r = residual(&key, &msg).unwrap();
        let energy: f64 = r.iter().map(|v| v * v).sum();
        let expect = (32 * 64) as f64;
        assert!((energy - expect).abs() < 1e-6 * expect);
    }

    #[test]
    fn clean_round_trip_recovers_message() {
        let cover = textured_clip(3, DIMS.0, DIMS.1, DIMS.2);
        let key = gen_key(11, 24, DIMS, 64).unwrap();
        let msg = random_message(5, 24);
        let marked = embed(&cover, &msg, &key, 0.02).unwrap();
        let got = extract(&marked, &key).unwrap();
        assert_eq!(got.message, msg);
        assert_eq!(bit_accuracy(&msg, &got.message).unwrap(), 1.0);
        // Soft scores side with their bits.
        for (s, b) in got.soft.iter().zip(&msg) {
            assert_eq!(*s > 0.0, *b);
        }
        assert!(got.detection > 0.99, "detection {}", got.detection);
    }

    #[test]
    fn wrong_key_reads_noise() {
        let cover = textured_clip(4, DIMS.0, DIMS.1, DIMS.2);
        let key = gen_key(21, 48, DIMS, 24).unwrap();
        let msg = random_message(6, 48);
        let marked = embed(&cover, &msg, &key, 0.02).unwrap();
        let other = gen_key(22, 48, DIMS, 24).unwrap();
        let got = extract(&marked, &other).unwrap();
        let acc = bit_accuracy(&msg, &got.message).unwrap();
        assert!((0.25..=0.75).contains(&acc), "accuracy {acc}");
        assert!(got.detection < 0.1, "detection {}", got.detection);
    }

    #[test]
    fn unmarked_clip_scores_low() {
        let cover = textured_clip(5, DIMS.0, DIMS.1, DIMS.2);
        let key = gen_key(31, 32, DIMS, 64).unwrap();
        let got = extract(&cover, &key).unwrap();
        assert!(got.detection < 0.1, "detection {}", got.detection);
        assert!(got.z.abs() < 6.0, "z {}", got.z);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let cover = textured_clip(6, 8, 32, 32);
        let key = gen_key(41, 16, DIMS, 16).unwrap();
        let msg = random_message(7, 16);
        assert!(matches!(
            embed(&cover, &msg, &key, 0.02),
            Err(Error::KeyClipMismatch { .. })
        ));
        assert!(matches!(
            extract(&cover, &key),
            Err(Error::KeyClipMismatch { .. })
        ));
    }

    #[test]
    fn message_length_mismatch_is_rejected() {
        let cover = textured_clip(7, DIMS.0, DIMS.1, DIMS.2);
        let key = gen_key(51, 16, DIMS, 16).unwrap();
        let msg = random_message(8, 15);
        assert!(embed(&cover, &msg, &key, 0.02).is_err());
        assert!(embed(&cover, &msg, &key, 0.0).is_err());
    }

    #[test]
    fn works_on_yuv_clips_identically() {
        let cover = textured_clip(8, DIMS.0, DIMS.1, DIMS.2);
        let key = gen_key(61, 24, DIMS, 64).unwrap();
        let msg = random_message(9, 24);
        let marked_rgb = embed(&cover, &msg, &key, 0.02).unwrap();
        let marked_yuv = embed(&cover.to_colorspace(Colorspace::Yuv), &msg, &key, 0.02).unwrap();
        // Same luma perturbation either way.
        let la = marked_rgb.luma();
        let lb = marked_yuv.luma();
        let worst = la
            .iter()
            .zip(lb.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-9, "luma diverged by {worst}");
        assert_eq!(extract(&marked_yuv, &key).unwrap().message, msg);
    }

    #[test]
    fn non_multiple_dims_round_trip_via_padding() {
        let cover = textured_clip(9, 6, 50, 45);
        let key = gen_key(71, 16, (6, 50, 45), 32).unwrap();
        let msg = random_message(10, 16);
        let marked = embed(&cover, &msg, &key, 0.02).unwrap();
        assert_eq!(marked.dims(), (6, 50, 45));
        assert_eq!(extract(&marked, &key).unwrap().message, msg);
    }

    #[test]
    fn key_spec_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("key.json");
        let mut spec = KeySpec::new(99, 96, 128);
        spec.null = Some(NullModel {
            mean: 0.031,
            std: 0.004,
            n: 100,
        });
        save_key_spec(&spec, &path).unwrap();
        let loaded = load_key_spec(&path).unwrap();
        assert_eq!(loaded.seed, 99);
        assert_eq!(loaded.m, 96);
        assert_eq!(loaded.chip_len, 128);
        assert_eq!(loaded.level, DEFAULT_LEVEL);
        assert_eq!(loaded.bands, default_bands());
        let null = loaded.null.unwrap();
        assert_eq!(null.n, 100);
        // Chips are never serialized: the file is just the recipe.
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains("chips"));
        assert!(!text.contains("assignment"));
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(KeySpec::new(1, 0, 16).materialize(DIMS).is_err());
        let mut spec = KeySpec::new(1, 8, 16);
        spec.level = 4;
        assert!(spec.materialize(DIMS).is_err());
        let mut spec = KeySpec::new(1, 8, 16);
        spec.bands = vec![BandCode::Llh, BandCode::Llh];
        assert!(spec.materialize(DIMS).is_err());
        let mut spec = KeySpec::new(1, 8, 16);
        spec.bands = vec![BandCode::Lll];
        assert!(spec.materialize(DIMS).is_err());
    }

    #[test]
    fn tiled_embedding_marks_every_segment() {
        let key = gen_key(5, 12, (8, 32, 32), 64).unwrap();
        let cover = textured_clip(31, 20, 32, 32);
        let msg = random_message(32, 12);
        let marked = embed_tiled(&cover, &msg, &key, 0.1).unwrap();
        assert_eq!(marked.dims(), cover.dims());
        // Each key-aligned full segment decodes the message on its own; the
        // padded tail segment was marked too but is checked only for length.
        for start in [0usize, 8] {
            let seg = VideoClip {
                data: marked
                    .data
                    .slice_axis(ndarray::Axis(0), ndarray::Slice::from(start..start + 8))
                    .to_owned(),
                colorspace: marked.colorspace,
            };
            let res = extract(&seg, &key).unwrap();
            assert_eq!(res.message, msg, "segment at {start}");
        }
    }

    #[test]
    fn tiled_extraction_averages_segment_votes() {
        let key = gen_key(5, 12, (8, 32, 32), 64).unwrap();
        let cover = textured_clip(31, 20, 32, 32);
        let msg = random_message(32, 12);
        let marked = embed_tiled(&cover, &msg, &key, 0.1).unwrap();
        let res = extract_tiled(&marked, &key).unwrap();
        assert_eq!(res.message, msg);
        assert_eq!(res.segments.len(), 3, "20 frames tile into 3 segments");
        // The averaged soft score must match the mean of the per-segment
        // scores bit for bit.
        for i in 0..12 {
            let mean = res.segments.iter().map(|s| s.soft[i]).sum::<f64>() / 3.0;
            assert!((res.soft[i] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn tiled_extraction_beats_single_segment_on_noisy_input() {
        // Repetition across segments is the whole point: under heavy noise
        // the averaged decode should be at least as good as any one segment.
        use rand_distr::{Distribution, Normal};
        let key = gen_key(5, 24, (8, 32, 32), 32).unwrap();
        let cover = textured_clip(77, 32, 32, 32);
        let msg = random_message(9, 24);
        let marked = embed_tiled(&cover, &msg, &key, 0.05).unwrap();
        let mut noisy = marked.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let normal = Normal::new(0.0, 0.08).unwrap();
        noisy.data.mapv_inplace(|v| v + normal.sample(&mut rng));
        let combined = extract_tiled(&noisy, &key).unwrap();
        let combined_acc = crate::metrics::bit_accuracy(&msg, &combined.message).unwrap();
        let best_single = combined
            .segments
            .iter()
            .map(|s| crate::metrics::bit_accuracy(&msg, &s.message).unwrap())
            .fold(0.0f64, f64::max);
        assert!(
            combined_acc + 1e-9 >= best_single,
            "combined {combined_acc} vs best single {best_single}"
        );
    }

    #[test]
    fn tiled_embedding_rejects_spatial_mismatch() {
        let key = gen_key(5, 12, (8, 32, 32), 64).unwrap();
        let cover = textured_clip(31, 20, 32, 16);
        assert!(matches!(
            embed_tiled(&cover, &random_message(1, 12), &key, 0.1).unwrap_err(),
            Error::KeyClipMismatch { .. }
        ));
    }
}
