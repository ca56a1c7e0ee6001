//! Temporal watermark detection: finding *which frames* of a longer video
//! carry the mark, without knowing the payload.
//!
//! The extractor's raw statistic (mean absolute soft bit score) has a known
//! analytic null, but real content deviates from the i.i.d. assumptions
//! behind it, so detection runs against an *empirical* null: feed
//! [`calibrate_null`] a set of unmarked clips once, store the resulting
//! [`NullModel`] with the key, and every later [`detect`] call standardizes
//! its windows against it.
//!
//! [`detect`] slides a fixed-length window along the clip, extracts with a
//! window-sized key, and maps each window's z-score to a `[0, 1]` score; a
//! frame's score is the best score of any window covering it. Frames above
//! a threshold survive [`filter_frames`], and [`kept_runs`] turns the mask
//! into editable segments.
//!
//! The module also builds the synthetic editing scenario used to evaluate
//! all of this: a marked patch composited into a longer unmarked background
//! ([`make_editing_scenario`]), which detection should localize.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clip::VideoClip;
use crate::error::{Error, Result};
use crate::spread::{self, KeySpec, score_from_z};

/// Null distribution of the detection statistic on unwatermarked content,
/// estimated by `calibrate_null` and stored alongside the key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullModel {
    pub mean: f64,
    pub std: f64,
    /// Number of calibration windows behind the estimate.
    pub n: usize,
}

/// Frames per detection window; also the temporal size of the key the
/// detector materializes.
pub const DEFAULT_WINDOW: usize = 8;
/// Window step. 1 gives every alignment, which is what a detector facing
/// unknown insertion points needs.
pub const DEFAULT_STRIDE: usize = 1;
/// Frame-score threshold for keeping a frame as "marked".
pub const DEFAULT_THRESHOLD: f64 = 0.3;

/// Minimum number of calibration windows before a null model is trusted.
pub const MIN_NULL_SAMPLES: usize = 20;

/// One scored detection window.
#[derive(Debug, Clone)]
pub struct WindowScore {
    /// First frame the window covers.
    pub start: usize,
    /// Standardized detection statistic against the null model.
    pub z: f64,
    /// `z` squashed to `[0, 1]`.
    pub score: f64,
    /// The extractor's soft bit scores for this window, kept so callers can
    /// aggregate payload evidence across windows without re-extracting.
    pub soft: Vec<f64>,
}

/// Everything [`detect`] learned about one clip.
#[derive(Debug, Clone)]
pub struct DetectionTrace {
    pub window_len: usize,
    pub stride: usize,
    /// Per-frame score: the best score of any window covering the frame.
    pub frame_scores: Vec<f64>,
    pub windows: Vec<WindowScore>,
}

/// Estimates the null distribution of the raw detection statistic from
/// unmarked clips. Each clip is cut into non-overlapping `window_len`-frame
/// windows and every window contributes one sample; fewer than
/// [`MIN_NULL_SAMPLES`] total is an error. All clips must share the spatial
/// dimensions detection will later run at.
pub fn calibrate_null(
    spec: &KeySpec,
    clips: &[VideoClip],
    window_len: usize,
) -> Result<NullModel> {
    if window_len == 0 {
        return Err(Error::BadParam("window length must be positive".into()));
    }
    let mut samples = Vec::new();
    let mut key = None;
    for clip in clips {
        let (t_len, h, w) = clip.dims();
        if t_len < window_len {
            continue;
        }
        let key = match &key {
            Some(k) => k,
            None => {
                key = Some(spec.materialize((window_len, h, w))?);
                key.as_ref().unwrap()
            }
        };
        for start in (0..=t_len - window_len).step_by(window_len) {
            let window = window_clip(clip, start, window_len);
            let res = spread::extract(&window, key)?;
            samples.push(res.raw_stat);
        }
    }
    if samples.len() < MIN_NULL_SAMPLES {
        return Err(Error::InsufficientSamples {
            got: samples.len(),
            need: MIN_NULL_SAMPLES,
        });
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt().max(1e-12);
    Ok(NullModel { mean, std, n })
}

fn window_clip(clip: &VideoClip, start: usize, len: usize) -> VideoClip {
    use ndarray::{Axis, Slice};
    VideoClip {
        data: clip
            .data
            .slice_axis(Axis(0), Slice::from(start..start + len))
            .to_owned(),
        colorspace: clip.colorspace,
    }
}

/// Scores every `window_len`-frame window of `clip` (stride `stride`, and
/// the final window is always included so the tail is covered) against the
/// calibrated null. The clip must be at least one window long.
pub fn detect(
    spec: &KeySpec,
    clip: &VideoClip,
    null: &NullModel,
    window_len: usize,
    stride: usize,
) -> Result<DetectionTrace> {
    let (t_len, h, w) = clip.dims();
    if window_len == 0 || stride == 0 {
        return Err(Error::BadParam(
            "window length and stride must be positive".into(),
        ));
    }
    if t_len < window_len {
        return Err(Error::ClipTooShort {
            len: t_len,
            window: window_len,
        });
    }
    let key = spec.materialize((window_len, h, w))?;

    let last_start = t_len - window_len;
    let mut starts: Vec<usize> = (0..=last_start).step_by(stride).collect();
    if *starts.last().unwrap() != last_start {
        starts.push(last_start);
    }

    let mut windows = Vec::with_capacity(starts.len());
    let mut frame_scores = vec![0.0f64; t_len];
    for start in starts {
        let window = window_clip(clip, start, window_len);
        let res = spread::extract(&window, &key)?;
        let z = (res.raw_stat - null.mean) / null.std;
        let score = score_from_z(z);
        for fs in &mut frame_scores[start..start + window_len] {
            if score > *fs {
                *fs = score;
            }
        }
        windows.push(WindowScore {
            start,
            z,
            score,
            soft: res.soft,
        });
    }
    Ok(DetectionTrace {
        window_len,
        stride,
        frame_scores,
        windows,
    })
}

/// Per-frame keep mask: true where the frame score clears `threshold`.
pub fn filter_frames(trace: &DetectionTrace, threshold: f64) -> Vec<bool> {
    trace.frame_scores.iter().map(|s| *s > threshold).collect()
}

/// Maximal runs of kept frames as half-open `[start, end)` ranges.
pub fn kept_runs(kept: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (t, k) in kept.iter().enumerate() {
        match (k, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                runs.push((s, t));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, kept.len()));
    }
    runs
}

/// Area under the ROC curve for positive vs negative score samples
/// (Mann-Whitney form, ties get half credit).
pub fn auc(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::BadParam(
            "AUC needs at least one positive and one negative sample".into(),
        ));
    }
    let mut wins = 0.0f64;
    for p in positives {
        for n in negatives {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (positives.len() * negatives.len()) as f64)
}

/// A longer unmarked video with a marked patch composited into part of it,
/// plus the ground truth detection should recover.
#[derive(Debug, Clone)]
pub struct EditingScenario {
    pub video: VideoClip,
    /// Per-frame ground truth: true where the patch is present.
    pub labels: Vec<bool>,
    /// First frame carrying the patch.
    pub insert_at: usize,
    /// Patch placement as half-open row and column ranges.
    pub rows: (usize, usize),
    pub cols: (usize, usize),
}

/// Margin between the patch and the frame border in the editing scenario.
const PATCH_MARGIN: usize = 4;

/// Row and column ranges a `p_h`x`p_w` patch occupies inside a
/// `bg_h`x`bg_w` frame under the standard lower-left placement. Exposed so
/// callers can carve the same region out of footage with no patch in it
/// (e.g. to calibrate the detector on clean background).
pub fn patch_region(
    bg_h: usize,
    bg_w: usize,
    p_h: usize,
    p_w: usize,
) -> Result<((usize, usize), (usize, usize))> {
    if p_h + 2 * PATCH_MARGIN > bg_h || p_w + 2 * PATCH_MARGIN > bg_w {
        return Err(Error::BadGeometry(format!(
            "patch {p_h}x{p_w} plus {PATCH_MARGIN}px margins does not fit in {bg_h}x{bg_w}"
        )));
    }
    Ok((
        (bg_h - PATCH_MARGIN - p_h, bg_h - PATCH_MARGIN),
        (PATCH_MARGIN, PATCH_MARGIN + p_w),
    ))
}

/// Composites `patch` into `background` in the lower-left corner (a
/// [`PATCH_MARGIN`]-pixel margin from both edges), starting at frame
/// `insert_at`. The patch first gets a seeded saturation adjustment (factor
/// uniform in `[0.5, 1.5]`), standing in for the color grading an editor
/// applies when reusing footage. Both clips must be RGB-representable; the
/// output is RGB.
pub fn make_editing_scenario(
    background: &VideoClip,
    patch: &VideoClip,
    insert_at: usize,
    seed: u64,
) -> Result<EditingScenario> {
    use crate::clip::Colorspace;
    use crate::distortion::{self, DistortionKind, DistortionSpec};

    let (bg_t, bg_h, bg_w) = background.dims();
    let (p_t, p_h, p_w) = patch.dims();
    if insert_at + p_t > bg_t {
        return Err(Error::BadGeometry(format!(
            "patch frames [{insert_at}, {}) exceed background length {bg_t}",
            insert_at + p_t
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factor = rng.random_range(0.5..=1.5);
    // A degenerate range pins the factor while reusing the distortion's
    // luma-preserving saturation math.
    let graded = distortion::apply(
        &patch.to_colorspace(Colorspace::Rgb),
        &DistortionSpec::new(
            DistortionKind::Saturation {
                lo: factor,
                hi: factor,
            },
            0,
        ),
    )?;

    let (rows, cols) = patch_region(bg_h, bg_w, p_h, p_w)?;
    let mut video = background.to_colorspace(Colorspace::Rgb);
    for t in 0..p_t {
        for y in 0..p_h {
            for x in 0..p_w {
                for c in 0..3 {
                    video.data[[insert_at + t, rows.0 + y, cols.0 + x, c]] =
                        graded.data[[t, y, x, c]];
                }
            }
        }
    }
    let labels = (0..bg_t)
        .map(|t| t >= insert_at && t < insert_at + p_t)
        .collect();
    Ok(EditingScenario {
        video,
        labels,
        insert_at,
        rows,
        cols,
    })
}

/// The spatial sub-view detection runs on: the patch placement region of an
/// editing-scenario video (every frame, patch rows and columns only).
pub fn extract_region(
    clip: &VideoClip,
    rows: (usize, usize),
    cols: (usize, usize),
) -> Result<VideoClip> {
    use ndarray::s;
    let (_, h, w) = clip.dims();
    if rows.0 >= rows.1 || cols.0 >= cols.1 || rows.1 > h || cols.1 > w {
        return Err(Error::BadGeometry(format!(
            "region rows {rows:?} cols {cols:?} outside {h}x{w} frame"
        )));
    }
    VideoClip::new(
        clip.data
            .slice(s![.., rows.0..rows.1, cols.0..cols.1, ..])
            .to_owned(),
        clip.colorspace,
    )
}
