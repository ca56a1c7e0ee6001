//! Config-driven evaluation harness.
//!
//! One engine drives four protocols over a clip corpus: the robustness
//! matrix (every distortion cell at a fixed operating point), strength and
//! payload sweeps (quality-vs-robustness and capacity-vs-robustness
//! trade-offs), a dimension sweep (clip length x resolution grid), and the
//! editing scenario (a marked patch composited into longer unmarked
//! footage, decoded with and without detector gating).
//!
//! Runs are deterministic: every random draw derives from
//! [`EvalConfig::master_seed`], so re-running a config reproduces the
//! report byte for byte (external-codec cells excepted — the encoder is
//! outside our control). Long runs can be resumed: completed rows land in
//! a journal file as they finish and are not recomputed.

mod engine;
mod report;

pub use engine::{
    fit_alpha_to_psnr, fused_detection, run_editing_app, run_matrix, run_matrix_resumable,
    sweep_alpha, sweep_dimensions, sweep_payload, Embedded,
};
pub use report::{
    csv_string, emit_csv, emit_json, parse_csv, Aggregate, EditingSummary, EvalReport, EvalRow,
    ReportFlags, ResumeLog, CSV_HEADER,
};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::distortion::DistortionKind;
use crate::error::{Error, Result};
use crate::synth::SceneKind;

/// Method label stamped on every report row.
pub const METHOD: &str = "dwt3-ss";

/// Buckets in per-cell bit-accuracy histograms.
pub const HISTOGRAM_BUCKETS: usize = 20;

pub type Dims = (usize, usize, usize);

/// Everything a run needs; serializable so configs round-trip losslessly
/// through JSON files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub corpus: CorpusSpec,
    pub key: KeySource,
    pub alpha: AlphaSpec,
    #[serde(default = "default_payloads")]
    pub payloads: Vec<usize>,
    #[serde(default)]
    pub distortions: Vec<DistortionCell>,
    /// Distortion draws per (cell, clip).
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Temporal tile length; also the detection window.
    #[serde(default = "default_segment_len")]
    pub segment_len: usize,
    /// (frames, height, width) grid for the dimension sweep.
    #[serde(default)]
    pub dimensions: Vec<Dims>,
    #[serde(default)]
    pub editing: Option<EditingConfig>,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    /// External codec command template (`{in}`, `{out}`, `{crf}`
    /// placeholders). The `VIDMARK_CODEC_CMD` environment variable
    /// overrides it; with neither set, a stock ffmpeg pipeline is used when
    /// ffmpeg is on PATH.
    #[serde(default)]
    pub codec_cmd: Option<String>,
    #[serde(default)]
    pub outputs: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusSpec {
    /// Clips rendered on the fly; scene kinds cycle through the list.
    Synthetic {
        #[serde(default = "default_kinds")]
        kinds: Vec<SceneKind>,
        count: usize,
        dims: Dims,
    },
    /// Clips loaded from files (format inferred from each extension).
    Paths { paths: Vec<PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "snake_case", deny_unknown_fields)]
pub enum KeySource {
    /// Key derived from a seed; chip length fills the available slots for
    /// each payload.
    Seed { seed: u64 },
    /// Key spec loaded from a file; only valid when the payload list is
    /// exactly its `m`.
    Path { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaSpec {
    Fixed {
        value: f64,
    },
    List {
        values: Vec<f64>,
    },
    /// Per-clip bisection to a PSNR target.
    TargetPsnr {
        db: f64,
        #[serde(default = "default_psnr_tol")]
        tol_db: f64,
    },
}

/// A distortion kind plus an optional strength grid. An empty grid runs the
/// kind at the strength it was written with; a non-empty grid runs one cell
/// per listed strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionCell {
    #[serde(flatten)]
    pub kind: DistortionKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strengths: Vec<f64>,
}

impl From<DistortionKind> for DistortionCell {
    fn from(kind: DistortionKind) -> Self {
        DistortionCell {
            kind,
            strengths: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

/// Parameters of the editing scenario runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditingConfig {
    /// Background lengths in frames, one report group per entry.
    #[serde(default = "default_background_lens")]
    pub background_lens: Vec<usize>,
    /// Background frame size (height, width).
    #[serde(default = "default_background_hw")]
    pub background_hw: (usize, usize),
    /// Marked patch dimensions (frames, height, width).
    #[serde(default = "default_patch_dims")]
    pub patch_dims: Dims,
    /// Scenario draws per background length.
    #[serde(default = "default_editing_repeats")]
    pub repeats: usize,
    /// Clean backgrounds used to calibrate the detector null.
    #[serde(default = "default_calibration_backgrounds")]
    pub calibration_backgrounds: usize,
}

impl Default for EditingConfig {
    fn default() -> Self {
        EditingConfig {
            background_lens: default_background_lens(),
            background_hw: default_background_hw(),
            patch_dims: default_patch_dims(),
            repeats: default_editing_repeats(),
            calibration_backgrounds: default_calibration_backgrounds(),
        }
    }
}

fn default_payloads() -> Vec<usize> {
    vec![96]
}
fn default_repeats() -> usize {
    1
}
fn default_segment_len() -> usize {
    8
}
fn default_master_seed() -> u64 {
    2024
}
fn default_psnr_tol() -> f64 {
    0.25
}
fn default_kinds() -> Vec<SceneKind> {
    SceneKind::ALL.to_vec()
}
fn default_background_lens() -> Vec<usize> {
    vec![60, 120, 240]
}
fn default_background_hw() -> (usize, usize) {
    (240, 462)
}
fn default_patch_dims() -> Dims {
    (16, 128, 128)
}
fn default_editing_repeats() -> usize {
    6
}
fn default_calibration_backgrounds() -> usize {
    4
}

impl EvalConfig {
    /// Checks the constraints every protocol shares. Protocol entry points
    /// add their own (e.g. the strength sweep needs at least two alphas).
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::ConfigInvalid("repeats must be at least 1".into()));
        }
        if self.segment_len == 0 {
            return Err(Error::ConfigInvalid("segment_len must be positive".into()));
        }
        if self.payloads.is_empty() {
            return Err(Error::ConfigInvalid("payload list is empty".into()));
        }
        if self.payloads.contains(&0) {
            return Err(Error::ConfigInvalid("payload of 0 bits".into()));
        }
        match &self.alpha {
            AlphaSpec::Fixed { value } if *value <= 0.0 => {
                return Err(Error::ConfigInvalid(format!(
                    "alpha must be positive, got {value}"
                )));
            }
            AlphaSpec::List { values } => {
                if values.is_empty() {
                    return Err(Error::ConfigInvalid("alpha list is empty".into()));
                }
                if values.iter().any(|a| *a <= 0.0) {
                    return Err(Error::ConfigInvalid("alpha list has a non-positive entry".into()));
                }
            }
            AlphaSpec::TargetPsnr { db, tol_db } => {
                if !(10.0..=80.0).contains(db) {
                    return Err(Error::ConfigInvalid(format!(
                        "PSNR target {db} dB outside the sane 10-80 dB range"
                    )));
                }
                if *tol_db <= 0.0 {
                    return Err(Error::ConfigInvalid("PSNR tolerance must be positive".into()));
                }
            }
            AlphaSpec::Fixed { .. } => {}
        }
        match &self.corpus {
            CorpusSpec::Synthetic { kinds, count, dims } => {
                if *count == 0 || kinds.is_empty() {
                    return Err(Error::CorpusEmpty);
                }
                let (t, h, w) = *dims;
                if t == 0 || h == 0 || w == 0 {
                    return Err(Error::ConfigInvalid(format!(
                        "degenerate corpus dims {dims:?}"
                    )));
                }
            }
            CorpusSpec::Paths { paths } => {
                if paths.is_empty() {
                    return Err(Error::CorpusEmpty);
                }
            }
        }
        if let Some(ed) = &self.editing {
            if ed.background_lens.is_empty() {
                return Err(Error::ConfigInvalid("no background lengths".into()));
            }
            if ed.repeats == 0 {
                return Err(Error::ConfigInvalid("editing repeats must be at least 1".into()));
            }
            let (pt, ph, pw) = ed.patch_dims;
            if pt == 0 || ph == 0 || pw == 0 {
                return Err(Error::ConfigInvalid(format!(
                    "degenerate patch dims {:?}",
                    ed.patch_dims
                )));
            }
            if let Some(min) = ed.background_lens.iter().min() {
                if *min < pt.max(self.segment_len) {
                    return Err(Error::ConfigInvalid(format!(
                        "background length {min} cannot hold a {pt}-frame patch \
                         and a {}-frame detection window",
                        self.segment_len
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The standard robustness matrix: identity plus the eight classic cells
/// (codec, frame average, drop, swap, blur, noise, crop, hue).
pub fn table_matrix_cells() -> Vec<DistortionCell> {
    vec![
        DistortionKind::Identity.into(),
        DistortionKind::ExternalCodec { crf: 22 }.into(),
        DistortionKind::FrameAverage { n: 3 }.into(),
        DistortionKind::FrameDrop { p: 0.5 }.into(),
        DistortionKind::FrameSwap { p: 0.5 }.into(),
        DistortionKind::GaussianBlur {
            sigma: 2.0,
            spatial_taps: 5,
            temporal_taps: 3,
        }
        .into(),
        DistortionKind::GaussianNoise { std: 0.04 }.into(),
        DistortionKind::Crop { ratio: 0.4 }.into(),
        DistortionKind::Hue { strength: 1.0 }.into(),
    ]
}

/// The four-cell panel used by the strength and payload sweeps: codec,
/// crop-out, frame drop, noise.
pub fn four_panel_cells() -> Vec<DistortionCell> {
    vec![
        DistortionKind::ExternalCodec { crf: 22 }.into(),
        DistortionKind::Crop { ratio: 0.5 }.into(),
        DistortionKind::FrameDrop { p: 0.5 }.into(),
        DistortionKind::GaussianNoise { std: 0.04 }.into(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config() -> EvalConfig {
        EvalConfig {
            corpus: CorpusSpec::Synthetic {
                kinds: vec![SceneKind::PanTexture],
                count: 2,
                dims: (8, 32, 32),
            },
            key: KeySource::Seed { seed: 7 },
            alpha: AlphaSpec::Fixed { value: 0.05 },
            payloads: vec![16],
            distortions: vec![DistortionKind::Identity.into()],
            repeats: 1,
            segment_len: 8,
            dimensions: Vec::new(),
            editing: None,
            master_seed: 99,
            codec_cmd: None,
            outputs: OutputSpec::default(),
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = EvalConfig {
            alpha: AlphaSpec::TargetPsnr {
                db: 37.0,
                tol_db: 0.25,
            },
            distortions: table_matrix_cells(),
            editing: Some(EditingConfig::default()),
            dimensions: vec![(8, 32, 32), (16, 32, 32)],
            ..minimal_config()
        };
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: EvalConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn distortion_cells_serialize_flat() {
        let cell = DistortionCell {
            kind: DistortionKind::GaussianNoise { std: 0.04 },
            strengths: vec![0.02, 0.04],
        };
        let text = serde_json::to_string(&cell).unwrap();
        assert_eq!(
            text,
            r#"{"kind":"gaussian_noise","std":0.04,"strengths":[0.02,0.04]}"#
        );
        let back: DistortionCell = serde_json::from_str(&text).unwrap();
        assert_eq!(cell, back);
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        let text = r#"{
            "corpus": {"source": "paths", "paths": ["a.y4m"]},
            "key": {"from": "seed", "seed": 1},
            "alpha": {"mode": "fixed", "value": 0.05},
            "surprise": true
        }"#;
        assert!(serde_json::from_str::<EvalConfig>(text).is_err());
    }

    #[test]
    fn validation_catches_bad_configs() {
        let mut cfg = minimal_config();
        cfg.repeats = 0;
        assert!(matches!(cfg.validate(), Err(Error::ConfigInvalid(_))));

        let mut cfg = minimal_config();
        cfg.payloads = vec![];
        assert!(matches!(cfg.validate(), Err(Error::ConfigInvalid(_))));

        let mut cfg = minimal_config();
        cfg.alpha = AlphaSpec::List { values: vec![] };
        assert!(matches!(cfg.validate(), Err(Error::ConfigInvalid(_))));

        let mut cfg = minimal_config();
        cfg.corpus = CorpusSpec::Paths { paths: vec![] };
        assert!(matches!(cfg.validate(), Err(Error::CorpusEmpty)));

        let mut cfg = minimal_config();
        cfg.corpus = CorpusSpec::Synthetic {
            kinds: vec![],
            count: 5,
            dims: (8, 32, 32),
        };
        assert!(matches!(cfg.validate(), Err(Error::CorpusEmpty)));

        let mut cfg = minimal_config();
        cfg.editing = Some(EditingConfig {
            background_lens: vec![4],
            ..EditingConfig::default()
        });
        assert!(matches!(cfg.validate(), Err(Error::ConfigInvalid(_))));

        assert!(minimal_config().validate().is_ok());
    }

    #[test]
    fn preset_panels_have_the_expected_shape() {
        assert_eq!(table_matrix_cells().len(), 9);
        assert_eq!(four_panel_cells().len(), 4);
        for cell in table_matrix_cells() {
            assert!(cell.strengths.is_empty());
        }
    }
}
