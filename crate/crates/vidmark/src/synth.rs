//! Deterministic synthetic video: the test and evaluation corpus.
//!
//! Three scene families with different statistics:
//!
//! * [`SceneKind::PanTexture`] — a camera pan over a static textured field
//!   plus per-frame grain. Mid-scale texture puts real energy into the
//!   embedding bands and the pan decorrelates frames quickly, which is what
//!   makes temporal attacks (frame drop) genuinely destructive. This is the
//!   workhorse for robustness evaluation.
//! * [`SceneKind::DriftGradient`] — smooth drifting shading with almost no
//!   texture; the easy end of the content spectrum.
//! * [`SceneKind::Plasma`] — moving sinusoidal interference at mid spatial
//!   frequencies; banded, periodic content.
//!
//! Everything is a pure function of `(kind, dims, seed)`.

use ndarray::{Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clip::{Colorspace, VideoClip};
use crate::error::{Error, Result};

/// Scene family for [`render`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    PanTexture,
    DriftGradient,
    Plasma,
}

impl SceneKind {
    pub const ALL: [SceneKind; 3] = [
        SceneKind::PanTexture,
        SceneKind::DriftGradient,
        SceneKind::Plasma,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SceneKind::PanTexture => "pan_texture",
            SceneKind::DriftGradient => "drift_gradient",
            SceneKind::Plasma => "plasma",
        }
    }

    pub fn parse(s: &str) -> Result<SceneKind> {
        match s {
            "pan_texture" => Ok(SceneKind::PanTexture),
            "drift_gradient" => Ok(SceneKind::DriftGradient),
            "plasma" => Ok(SceneKind::Plasma),
            other => Err(Error::BadParam(format!(
                "unknown scene kind '{other}' (expected pan_texture, drift_gradient, or plasma)"
            ))),
        }
    }
}

impl std::fmt::Display for SceneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// SplitMix64 step: the project-wide way to derive independent sub-seeds
/// from a base seed and a stream index.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9e3779b97f4a7c15)
        .wrapping_add(stream.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

// Pan-texture amplitude tuning. The mid field carries the energy that lands
// in the embedding bands; grain sets the per-frame decorrelation floor;
// coarse structure is mostly cosmetic (it lives below the embedding bands).
const PAN_COARSE_AMP: f64 = 0.02;
const PAN_MID_AMP: f64 = 0.11;
const PAN_GRAIN_AMP: f64 = 0.02;
const PAN_CHROMA_AMP: f64 = 0.06;

/// Renders one clip. Dimensions are free (subject to being non-empty);
/// the same `(kind, dims, seed)` always yields the same clip.
pub fn render(kind: SceneKind, dims: (usize, usize, usize), seed: u64) -> Result<VideoClip> {
    let (t, h, w) = dims;
    if t == 0 || h == 0 || w == 0 {
        return Err(Error::BadDims(format!("empty clip dimensions {dims:?}")));
    }
    match kind {
        SceneKind::PanTexture => pan_texture(dims, seed),
        SceneKind::DriftGradient => drift_gradient(dims, seed),
        SceneKind::Plasma => plasma(dims, seed),
    }
}

/// Renders `n` clips cycling through `kinds`, with per-clip seeds derived
/// from `base_seed`.
pub fn corpus(
    kinds: &[SceneKind],
    n: usize,
    dims: (usize, usize, usize),
    base_seed: u64,
) -> Result<Vec<VideoClip>> {
    if kinds.is_empty() {
        return Err(Error::CorpusEmpty);
    }
    (0..n)
        .map(|i| render(kinds[i % kinds.len()], dims, derive_seed(base_seed, i as u64)))
        .collect()
}

/// Zero-mean, unit-RMS spatially high-pass noise (Laplacian-filtered).
/// Its spectrum rises toward high frequencies, which mirrors how sharp
/// real-world texture behaves under low-pass degradations: blurring such
/// content removes cover detail at least as fast as it removes any
/// fine-scale signal riding on it.
fn box_smooth(field: &mut Array2<f64>, passes: usize) {
    let (h, w) = field.dim();
    let mut scratch = Array2::zeros((h, w));
    for _ in 0..passes {
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let yy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                        let xx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                        acc += field[[yy, xx]];
                    }
                }
                scratch[[y, x]] = acc / 9.0;
            }
        }
        std::mem::swap(field, &mut scratch);
    }
}

fn normalize_field(mut field: Array2<f64>) -> Array2<f64> {
    let mean = field.iter().sum::<f64>() / field.len() as f64;
    let rms = (field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / field.len() as f64)
        .sqrt()
        .max(1e-12);
    field.mapv_inplace(|v| (v - mean) / rms);
    field
}

/// Zero-mean, unit-RMS noise field smoothed by `passes` rounds of 3x3 box
/// blur (correlation length grows with `passes`).
fn smooth_field(rng: &mut ChaCha8Rng, h: usize, w: usize, passes: usize) -> Array2<f64> {
    let mut field = Array2::from_shape_fn((h, w), |_| rng.random::<f64>() - 0.5);
    box_smooth(&mut field, passes);
    normalize_field(field)
}

/// Zero-mean, unit-RMS noise field whose structure lives between two
/// correlation lengths: the difference of a lightly and a heavily smoothed
/// copy of the same noise. Unlike raw grain its energy sits at the scales
/// a few-level wavelet analysis actually sees, and unlike smooth shading
/// it does not survive a strong blur, so it behaves like natural fine
/// texture under both.
fn bandpass_field(
    rng: &mut ChaCha8Rng,
    h: usize,
    w: usize,
    fine_passes: usize,
    coarse_passes: usize,
) -> Array2<f64> {
    let noise = Array2::from_shape_fn((h, w), |_| rng.random::<f64>() - 0.5);
    let mut fine = noise.clone();
    box_smooth(&mut fine, fine_passes);
    let mut coarse = noise;
    box_smooth(&mut coarse, coarse_passes);
    normalize_field(fine - coarse)
}

/// Adds a luma value plus two chroma deviations to a pixel. The deviation
/// directions are orthogonal to the luma weights, so the pixel's luma is
/// exactly `l` before clamping.
fn compose_pixel(l: f64, d1: f64, d2: f64) -> (f64, f64, f64) {
    // (1, -0.299/0.587, 0) and (0, -0.114/0.587, 1) both have zero dot
    // product with the BT.601 luma weights.
    let r = l + d1;
    let g = l - 0.5094 * d1 - 0.1942 * d2;
    let b = l + d2;
    (r.clamp(0.0, 1.0), g.clamp(0.0, 1.0), b.clamp(0.0, 1.0))
}

fn pan_texture(dims: (usize, usize, usize), seed: u64) -> Result<VideoClip> {
    pan_texture_with_amps(dims, seed, PAN_COARSE_AMP, PAN_MID_AMP, PAN_GRAIN_AMP)
}

fn pan_texture_with_amps(
    dims: (usize, usize, usize),
    seed: u64,
    coarse_amp: f64,
    mid_amp: f64,
    grain_amp: f64,
) -> Result<VideoClip> {
    let (t_len, h, w) = dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Two independent motions. The fine texture pans fast so consecutive
    // frames decorrelate; the coarse shading drifts slowly so its energy
    // stays at low temporal frequency instead of smearing across the
    // temporal spectrum (a fast-moving smooth layer would masquerade as
    // fine temporal detail and distort how attacks land on real footage).
    let vy = rng.random_range(1..=3) * if rng.random::<bool>() { 1 } else { -1 };
    let vx = rng.random_range(3..=6) * if rng.random::<bool>() { 1 } else { -1 };
    let cvy: i64 = if rng.random::<bool>() { 1 } else { -1 };
    let cvx: i64 = if rng.random::<bool>() { 1 } else { -1 };

    // Field extents and frame-0 offsets such that every frame stays inside.
    let pan_geometry = |v: i64, extent: usize| {
        let span = ((t_len as i64 - 1) * v).unsigned_abs() as usize;
        (extent + span, if v >= 0 { 0 } else { span })
    };
    let (fh, base_y) = pan_geometry(vy, h);
    let (fw, base_x) = pan_geometry(vx, w);
    let (ch, cbase_y) = pan_geometry(cvy, h);
    let (cw, cbase_x) = pan_geometry(cvx, w);

    let coarse = smooth_field(&mut rng, ch, cw, 24);
    let mid = bandpass_field(&mut rng, fh, fw, 1, 8);
    let tint1 = smooth_field(&mut rng, ch, cw, 8);
    let tint2 = smooth_field(&mut rng, ch, cw, 8);

    let mut data = Array4::zeros((t_len, h, w, 3));
    for t in 0..t_len {
        let oy = (base_y as i64 + t as i64 * vy) as usize;
        let ox = (base_x as i64 + t as i64 * vx) as usize;
        let coy = (cbase_y as i64 + t as i64 * cvy) as usize;
        let cox = (cbase_x as i64 + t as i64 * cvx) as usize;
        for y in 0..h {
            for x in 0..w {
                let (fy, fx) = (oy + y, ox + x);
                let (gy, gx) = (coy + y, cox + x);
                let l = 0.5
                    + coarse_amp * coarse[[gy, gx]]
                    + mid_amp * mid[[fy, fx]]
                    + grain_amp * (rng.random::<f64>() - 0.5) * 3.464;
                let (r, g, b) = compose_pixel(
                    l,
                    PAN_CHROMA_AMP * tint1[[gy, gx]],
                    PAN_CHROMA_AMP * tint2[[gy, gx]],
                );
                data[[t, y, x, 0]] = r;
                data[[t, y, x, 1]] = g;
                data[[t, y, x, 2]] = b;
            }
        }
    }
    VideoClip::new(data, Colorspace::Rgb)
}

fn drift_gradient(dims: (usize, usize, usize), seed: u64) -> Result<VideoClip> {
    let (t_len, h, w) = dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fy = rng.random_range(1..=2) as f64;
    let fx = rng.random_range(1..=2) as f64;
    let dy = rng.random_range(1.0..=3.0);
    let dx = rng.random_range(1.0..=3.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let wobble = rng.random_range(0.01..=0.03);
    let tint_phase = rng.random_range(0.0..std::f64::consts::TAU);

    let mut data = Array4::zeros((t_len, h, w, 3));
    for t in 0..t_len {
        let bright = 1.0 + wobble * (0.37 * t as f64 + phase).sin();
        for y in 0..h {
            for x in 0..w {
                let arg = std::f64::consts::TAU
                    * (fy * (y as f64 + dy * t as f64) / h as f64
                        + fx * (x as f64 + dx * t as f64) / w as f64)
                    + phase;
                let l = (0.5 + 0.22 * arg.sin()) * bright;
                let d1 = 0.05 * (arg + tint_phase).cos();
                let d2 = 0.05 * (0.5 * arg + tint_phase).sin();
                let (r, g, b) = compose_pixel(l, d1, d2);
                data[[t, y, x, 0]] = r;
                data[[t, y, x, 1]] = g;
                data[[t, y, x, 2]] = b;
            }
        }
    }
    VideoClip::new(data, Colorspace::Rgb)
}

fn plasma(dims: (usize, usize, usize), seed: u64) -> Result<VideoClip> {
    let (t_len, h, w) = dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const COMPONENTS: usize = 4;
    let mut comps = Vec::with_capacity(COMPONENTS);
    for _ in 0..COMPONENTS {
        let wavelength = rng.random_range(8.0..=32.0);
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let omega = std::f64::consts::TAU / wavelength;
        let speed = rng.random_range(0.3..=1.2) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        comps.push((omega * angle.cos(), omega * angle.sin(), speed, phase));
    }
    let mut data = Array4::zeros((t_len, h, w, 3));
    for t in 0..t_len {
        for y in 0..h {
            for x in 0..w {
                let mut s = 0.0;
                let mut c = 0.0;
                for (ky, kx, speed, phase) in &comps {
                    let arg = ky * y as f64 + kx * x as f64 + speed * t as f64 + phase;
                    s += arg.sin();
                    c += arg.cos();
                }
                let l = 0.5 + 0.15 * s / COMPONENTS as f64;
                let (r, g, b) = compose_pixel(
                    l,
                    0.04 * c / COMPONENTS as f64,
                    -0.04 * s / COMPONENTS as f64,
                );
                data[[t, y, x, 0]] = r;
                data[[t, y, x, 1]] = g;
                data[[t, y, x, 2]] = b;
            }
        }
    }
    VideoClip::new(data, Colorspace::Rgb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spread::{DWT_LEVELS, default_bands};
    use crate::wavelet::{dwt3_forward, pad_to_multiple};

    #[test]
    fn rendering_is_deterministic_and_in_range() {
        for kind in SceneKind::ALL {
            let a = render(kind, (6, 40, 48), 9).unwrap();
            let b = render(kind, (6, 40, 48), 9).unwrap();
            assert_eq!(a.data, b.data, "{kind}");
            let c = render(kind, (6, 40, 48), 10).unwrap();
            assert_ne!(a.data, c.data, "{kind}");
            assert!(a.data.iter().all(|v| (0.0..=1.0).contains(v)), "{kind}");
            assert_eq!(a.dims(), (6, 40, 48));
            assert_eq!(a.colorspace, Colorspace::Rgb);
        }
    }

    #[test]
    fn corpus_cycles_kinds_and_derives_seeds() {
        let clips = corpus(&SceneKind::ALL, 5, (4, 16, 16), 7).unwrap();
        assert_eq!(clips.len(), 5);
        // Clip 3 is PanTexture again but with a different derived seed.
        assert_ne!(clips[0].data, clips[3].data);
        assert!(corpus(&[], 3, (4, 16, 16), 7).is_err());
        let again = corpus(&SceneKind::ALL, 5, (4, 16, 16), 7).unwrap();
        for (a, b) in clips.iter().zip(again.iter()) {
            assert_eq!(a.data, b.data);
        }
    }

    #[test]
    fn derive_seed_separates_streams() {
        let a = derive_seed(1, 0);
        let b = derive_seed(1, 1);
        let c = derive_seed(2, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(derive_seed(1, 0), a);
    }

    /// Mean RMS of the six embedding-band coefficient sets of the clip's luma.
    fn mean_band_rms(clip: &VideoClip) -> f64 {
        let luma = clip.luma();
        let (padded, _) = pad_to_multiple(&luma, DWT_LEVELS);
        let pyr = dwt3_forward(&padded, DWT_LEVELS).unwrap();
        let mut acc = 0.0;
        for code in default_bands() {
            let band = pyr.band(2, code).unwrap();
            let ms = band.iter().map(|v| v * v).sum::<f64>() / band.len() as f64;
            acc += ms.sqrt();
        }
        acc / 6.0
    }

    #[test]
    fn pan_texture_has_energy_in_the_embedding_bands() {
        // The robustness criteria need real cover noise in the bands the
        // mark occupies: neither so little that every attack is survivable
        // nor so much that nothing is.
        let mut rms = Vec::new();
        for seed in 0..6 {
            let clip = render(SceneKind::PanTexture, (8, 128, 128), seed).unwrap();
            rms.push(mean_band_rms(&clip));
        }
        let mean = rms.iter().sum::<f64>() / rms.len() as f64;
        assert!(
            (0.08..=0.22).contains(&mean),
            "mean embedding-band RMS {mean} outside the tuned window ({rms:?})"
        );
    }

    #[test]
    fn pan_texture_frames_decorrelate() {
        // Fast pan plus grain: consecutive frames must differ substantially
        // (low tPSNR), or temporal attacks would be free.
        let clip = render(SceneKind::PanTexture, (8, 64, 64), 3).unwrap();
        let luma = clip.luma();
        let mut diff = 0.0;
        let mut count = 0usize;
        for t in 1..8 {
            for y in 0..64 {
                for x in 0..64 {
                    let d = luma[[t, y, x]] - luma[[t - 1, y, x]];
                    diff += d * d;
                    count += 1;
                }
            }
        }
        let rms = (diff / count as f64).sqrt();
        assert!(rms > 0.05, "consecutive-frame RMS difference {rms} too low");
    }

    /// Manual tuning probe for the corpus constants: prints band RMS, the
    /// PSNR-37 embedding strength, and mean bit accuracy under the standard
    /// attack panel. Run with
    /// `cargo test -p vidmark --lib tuning_probe -- --ignored --nocapture`.
    #[test]
    #[ignore]
    fn tuning_probe() {
        use crate::distortion::{self, DistortionKind, DistortionSpec};
        use crate::metrics::{bit_accuracy, psnr};
        use crate::spread::{self, KeySpec};
        use rand::Rng;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;

        let dims = (8usize, 128usize, 128usize);
        let n_clips = 12;
        let clips = corpus(&[SceneKind::PanTexture], n_clips, dims, 4242).unwrap();
        let spec = KeySpec::new(99, 96, 128);
        let key = spec.materialize(dims).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let msg: Vec<bool> = (0..96).map(|_| rng.random()).collect();

        let rms: Vec<f64> = clips.iter().map(mean_band_rms).collect();
        let mean_rms = rms.iter().sum::<f64>() / rms.len() as f64;
        println!("mean band RMS: {mean_rms:.4}");

        // Bisect alpha to mean PSNR 37 over the corpus.
        let target = 37.0;
        let (mut lo, mut hi) = (0.001, 0.3);
        let mut alpha = 0.05;
        for _ in 0..25 {
            alpha = 0.5 * (lo + hi);
            let mean_psnr = clips
                .iter()
                .map(|c| {
                    let m = spread::embed(c, &msg, &key, alpha).unwrap();
                    psnr(c, &m).unwrap()
                })
                .sum::<f64>()
                / n_clips as f64;
            if mean_psnr > target {
                lo = alpha;
            } else {
                hi = alpha;
            }
        }
        println!("alpha @ 37dB: {alpha:.5}");

        let panel: Vec<(&str, DistortionKind)> = vec![
            ("identity", DistortionKind::Identity),
            ("noise.04", DistortionKind::GaussianNoise { std: 0.04 }),
            (
                "blur2.0",
                DistortionKind::GaussianBlur {
                    sigma: 2.0,
                    spatial_taps: 5,
                    temporal_taps: 3,
                },
            ),
            ("crop.4", DistortionKind::Crop { ratio: 0.4 }),
            ("crop.5", DistortionKind::Crop { ratio: 0.5 }),
            ("drop.5", DistortionKind::FrameDrop { p: 0.5 }),
            ("swap.5", DistortionKind::FrameSwap { p: 0.5 }),
        ];
        for (label, kind) in panel {
            let mut acc = 0.0;
            let mut det = 0.0;
            for (i, clip) in clips.iter().enumerate() {
                let marked = spread::embed(clip, &msg, &key, alpha).unwrap();
                let attacked = distortion::apply(
                    &marked,
                    &DistortionSpec::new(kind.clone(), derive_seed(7, i as u64)),
                )
                .unwrap();
                let res = spread::extract(&attacked, &key).unwrap();
                acc += bit_accuracy(&msg, &res.message).unwrap();
                det += res.detection;
            }
            println!(
                "{label:>9}: acc {:.4}  det {:.3}",
                acc / n_clips as f64,
                det / n_clips as f64
            );
        }

        // Which source layer owns each band's energy, and how does it fare
        // under blur? Render each layer alone and tabulate band RMS.
        let solo = [
            ("coarse", (PAN_COARSE_AMP, 0.0, 0.0)),
            ("mid", (0.0, PAN_MID_AMP, 0.0)),
            ("grain", (0.0, 0.0, PAN_GRAIN_AMP)),
        ];
        for (name, (ca, ma, ga)) in solo {
            let clip = pan_texture_with_amps(dims, 4242, ca, ma, ga).unwrap();
            let blurred = distortion::apply(
                &clip,
                &DistortionSpec::new(
                    DistortionKind::GaussianBlur {
                        sigma: 2.0,
                        spatial_taps: 5,
                        temporal_taps: 3,
                    },
                    7,
                ),
            )
            .unwrap();
            for (tag, c) in [("pre", &clip), ("post", &blurred)] {
                use crate::wavelet::{dwt3_forward, pad_to_multiple};
                let (padded, _) = pad_to_multiple(&c.luma(), 3);
                let pyr = dwt3_forward(&padded, 3).unwrap();
                let sig: Vec<String> = key
                    .spec
                    .bands
                    .iter()
                    .map(|code| {
                        let b = pyr.band(key.spec.level, *code).unwrap();
                        let s = (b.iter().map(|v| v * v).sum::<f64>()
                            / b.len() as f64)
                            .sqrt();
                        format!("{code:?} {s:.4}")
                    })
                    .collect();
                println!("solo {name:>6} {tag:>4}: {}", sig.join("  "));
            }
        }

        // Per-band autopsy on one clip under blur: where does the vote die?
        let clip = &clips[0];
        let marked = spread::embed(clip, &msg, &key, alpha).unwrap();
        let blurred = distortion::apply(
            &marked,
            &DistortionSpec::new(
                DistortionKind::GaussianBlur {
                    sigma: 2.0,
                    spatial_taps: 5,
                    temporal_taps: 3,
                },
                7,
            ),
        )
        .unwrap();
        for (tag, suspect) in [("clean", &marked), ("blur", &blurred)] {
            let res = spread::extract(suspect, &key).unwrap();
            let band_sigma = {
                use crate::wavelet::pad_to_multiple;
                use crate::wavelet::dwt3_forward;
                let (padded, _) = pad_to_multiple(&suspect.luma(), 3);
                let pyr = dwt3_forward(&padded, 3).unwrap();
                key.spec
                    .bands
                    .iter()
                    .map(|c| {
                        let b = pyr.band(key.spec.level, *c).unwrap();
                        (b.iter().map(|v| v * v).sum::<f64>() / b.len() as f64).sqrt()
                    })
                    .collect::<Vec<_>>()
            };
            for (b, code) in key.spec.bands.iter().enumerate() {
                let signed: Vec<f64> = (0..96)
                    .map(|i| res.per_band[i][b] * if msg[i] { 1.0 } else { -1.0 })
                    .collect();
                let mean = signed.iter().sum::<f64>() / 96.0;
                let band_acc =
                    signed.iter().filter(|v| **v > 0.0).count() as f64 / 96.0;
                println!(
                    "{tag} {code:?}: sigma {:.4} w {:.3} rho {mean:+.3} acc {band_acc:.3}",
                    band_sigma[b], res.band_weights[b]
                );
            }
        }
    }

    #[test]
    fn scene_kind_names_round_trip() {
        for kind in SceneKind::ALL {
            assert_eq!(SceneKind::parse(kind.as_str()).unwrap(), kind);
        }
        assert!(SceneKind::parse("nope").is_err());
        let json = serde_json::to_string(&SceneKind::PanTexture).unwrap();
        assert_eq!(json, "\"pan_texture\"");
    }
}
