//! Report data model and serialization.
//!
//! A run produces one [`EvalRow`] per (clip, distortion draw) and one
//! [`Aggregate`] per table cell. Aggregates carry the `[row_start, row_len)`
//! range of the rows they summarize, so any consumer can re-derive (or
//! re-slice) a cell's statistics from the flat row list.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{EvalConfig, HISTOGRAM_BUCKETS};

/// Column order of the CSV emission; one row per line, no quoting (clip ids
/// are sanitized at corpus resolution).
pub const CSV_HEADER: &str =
    "method,alpha,payload,distortion,strength,clip,seed,bit_acc,psnr,mssim,tpsnr,det_score,ms";

/// One embedding/attack/decode measurement.
///
/// `psnr`/`tpsnr` use `None` for +infinity (identical clips), which JSON
/// cannot carry as a number. `bit_acc`/`det_score` are `None` only on
/// skipped rows (external codec unavailable) and serialize to CSV as NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub alpha: f64,
    pub payload: usize,
    pub distortion: String,
    pub strength: f64,
    pub clip: String,
    pub seed: u64,
    pub bit_acc: Option<f64>,
    pub psnr: Option<f64>,
    pub mssim: f64,
    pub tpsnr: Option<f64>,
    pub det_score: Option<f64>,
    /// Wall-clock cost of the attack + decode, rounded to milliseconds. The
    /// one column that is not reproducible across runs; comparisons should
    /// mask it.
    pub ms: u64,
    pub skipped: bool,
}

impl EvalRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            fmt_f64(self.alpha),
            self.payload,
            self.distortion,
            fmt_f64(self.strength),
            self.clip,
            self.seed,
            fmt_f64(self.bit_acc.unwrap_or(f64::NAN)),
            fmt_f64(self.psnr.unwrap_or(f64::INFINITY)),
            fmt_f64(self.mssim),
            fmt_f64(self.tpsnr.unwrap_or(f64::INFINITY)),
            fmt_f64(self.det_score.unwrap_or(f64::NAN)),
            self.ms,
        )
    }
}

/// Shortest representation that parses back to the same f64; `inf` / `NaN`
/// spell themselves.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Summary statistics for one contiguous run of rows (a table cell).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub payload: usize,
    /// Mean of the row alphas; varies per clip under a PSNR target.
    pub alpha_nominal: f64,
    pub distortion: String,
    pub strength: f64,
    pub rows: usize,
    pub skipped: usize,
    pub mean_bit_acc: Option<f64>,
    pub std_bit_acc: Option<f64>,
    pub mean_det_score: Option<f64>,
    /// `None` when any contributing row compared identical (+inf dB).
    pub mean_psnr: Option<f64>,
    pub mean_mssim: f64,
    pub mean_tpsnr: Option<f64>,
    /// Bit-accuracy counts over [0, 1] split into equal buckets; the top
    /// bucket includes exact 1.0.
    pub bit_acc_histogram: Vec<usize>,
    /// Range of `EvalReport::rows` this cell summarizes.
    pub row_start: usize,
    pub row_len: usize,
}

impl Aggregate {
    /// Summarizes `rows[row_start..row_start + row_len]`; the range must be
    /// non-empty and uniform in method, payload, distortion, and strength.
    pub fn compute(rows: &[EvalRow], row_start: usize, row_len: usize) -> Aggregate {
        let slice = &rows[row_start..row_start + row_len];
        let first = &slice[0];
        debug_assert!(slice.iter().all(|r| {
            r.method == first.method
                && r.payload == first.payload
                && r.distortion == first.distortion
                && r.strength == first.strength
        }));

        let live: Vec<&EvalRow> = slice.iter().filter(|r| !r.skipped).collect();
        let accs: Vec<f64> = live.iter().filter_map(|r| r.bit_acc).collect();
        let dets: Vec<f64> = live.iter().filter_map(|r| r.det_score).collect();

        let mut histogram = vec![0usize; HISTOGRAM_BUCKETS];
        for &acc in &accs {
            let bucket = ((acc * HISTOGRAM_BUCKETS as f64) as usize).min(HISTOGRAM_BUCKETS - 1);
            histogram[bucket] += 1;
        }

        let mean_bit_acc = mean(&accs);
        let std_bit_acc = mean_bit_acc.map(|m| {
            (accs.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / accs.len() as f64).sqrt()
        });

        Aggregate {
            method: first.method.clone(),
            payload: first.payload,
            alpha_nominal: slice.iter().map(|r| r.alpha).sum::<f64>() / slice.len() as f64,
            distortion: first.distortion.clone(),
            strength: first.strength,
            rows: slice.len(),
            skipped: slice.len() - live.len(),
            mean_bit_acc,
            std_bit_acc,
            mean_det_score: mean(&dets),
            mean_psnr: mean_optional(slice.iter().map(|r| r.psnr)),
            mean_mssim: slice.iter().map(|r| r.mssim).sum::<f64>() / slice.len() as f64,
            mean_tpsnr: mean_optional(slice.iter().map(|r| r.tpsnr)),
            bit_acc_histogram: histogram,
            row_start,
            row_len,
        }
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Mean of values where `None` stands for +infinity: one infinite term
/// makes the mean infinite, reported as `None`.
fn mean_optional(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for x in xs {
        sum += x?;
        n += 1;
    }
    if n == 0 {
        None
    } else {
        Some(sum / n as f64)
    }
}

/// Semantics notes and run-level outcomes a reader needs to interpret the
/// numbers, stamped into every JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFlags {
    pub crop_semantics: String,
    pub drop_semantics: String,
    pub psnr_channels: String,
    /// Dimension sweeps render fresh clips per grid point rather than
    /// resampling the corpus.
    pub synthesized_dimensions: bool,
    /// Some clip in the run was padded (replicated last frame) to fill a
    /// partial trailing segment.
    pub padded_cells: bool,
    /// External-codec cells were skipped because no encoder was found.
    pub codec_skipped: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub editing: Vec<EditingSummary>,
}

impl Default for ReportFlags {
    fn default() -> Self {
        ReportFlags {
            crop_semantics: "crop keeps a centered-at-random ratio*H x ratio*W window and \
                             blacks out the rest; frame geometry unchanged"
                .into(),
            drop_semantics: "dropped frames freeze the most recent surviving frame; clip \
                             length preserved"
                .into(),
            psnr_channels: "PSNR/tPSNR over all three RGB channels, peak 1.0".into(),
            synthesized_dimensions: false,
            padded_cells: false,
            codec_skipped: false,
            editing: Vec::new(),
        }
    }
}

/// Per-background-length outcome of the editing scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditingSummary {
    pub background_len: usize,
    pub with_detector_acc: f64,
    pub without_detector_acc: f64,
    /// Mean overlap (intersection over union) between frames the detector
    /// kept and the true marked span.
    pub mean_iou: f64,
}

/// A complete run: the config that produced it, every measurement, and the
/// per-cell summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub rows: Vec<EvalRow>,
    pub aggregates: Vec<Aggregate>,
    pub flags: ReportFlags,
}

impl EvalReport {
    pub fn csv(&self) -> String {
        csv_string(&self.rows)
    }

    /// Writes whichever of the CSV / JSON outputs the config asks for.
    pub fn write_outputs(&self) -> Result<()> {
        if let Some(path) = &self.config.outputs.csv {
            emit_csv(&self.rows, path)?;
        }
        if let Some(path) = &self.config.outputs.json {
            emit_json(self, path)?;
        }
        Ok(())
    }
}

pub fn csv_string(rows: &[EvalRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

pub fn emit_csv(rows: &[EvalRow], path: &Path) -> Result<()> {
    fs::write(path, csv_string(rows))?;
    Ok(())
}

/// Parses CSV produced by [`csv_string`] back into rows. Float cells use
/// shortest-round-trip forms, so rows survive the trip exactly; a NaN
/// bit-accuracy cell marks a skipped row.
pub fn parse_csv(text: &str) -> Result<Vec<EvalRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(head) if head == CSV_HEADER => {}
        other => {
            return Err(Error::BadParam(format!(
                "not a report CSV; header was {other:?}"
            )));
        }
    }
    lines.map(parse_csv_row).collect()
}

fn parse_csv_row(line: &str) -> Result<EvalRow> {
    let cells: Vec<&str> = line.split(',').collect();
    if cells.len() != 13 {
        return Err(Error::BadParam(format!(
            "CSV row has {} cells, expected 13: {line}",
            cells.len()
        )));
    }
    let float = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::BadParam(format!("bad number {s:?} in CSV row: {line}")))
    };
    let finite_or_none = |v: f64| if v.is_finite() { Some(v) } else { None };
    let value_or_nan = |v: f64| if v.is_nan() { None } else { Some(v) };

    let bit_acc = value_or_nan(float(cells[7])?);
    Ok(EvalRow {
        method: cells[0].into(),
        alpha: float(cells[1])?,
        payload: cells[2]
            .parse()
            .map_err(|_| Error::BadParam(format!("bad payload {:?} in CSV row", cells[2])))?,
        distortion: cells[3].into(),
        strength: float(cells[4])?,
        clip: cells[5].into(),
        seed: cells[6]
            .parse()
            .map_err(|_| Error::BadParam(format!("bad seed {:?} in CSV row", cells[6])))?,
        bit_acc,
        psnr: finite_or_none(float(cells[8])?),
        mssim: float(cells[9])?,
        tpsnr: finite_or_none(float(cells[10])?),
        det_score: value_or_nan(float(cells[11])?),
        ms: cells[12]
            .parse()
            .map_err(|_| Error::BadParam(format!("bad timing {:?} in CSV row", cells[12])))?,
        skipped: bit_acc.is_none(),
    })
}

pub fn emit_json(report: &EvalReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Append-only journal of finished rows, for resuming interrupted runs.
///
/// Line 1 is the config; each later line is one row. On open the journal is
/// replayed: if the stored config matches, previously finished rows are
/// returned for reuse; a config change or an unparseable head starts the
/// journal over. A torn tail line (killed mid-write) is dropped.
pub struct ResumeLog {
    file: fs::File,
}

impl ResumeLog {
    pub fn open(path: &Path, config: &EvalConfig) -> Result<(ResumeLog, Vec<EvalRow>)> {
        let mut rows: Vec<EvalRow> = Vec::new();
        if let Ok(text) = fs::read_to_string(path) {
            let mut lines = text.lines();
            let head_matches = lines
                .next()
                .and_then(|l| serde_json::from_str::<EvalConfig>(l).ok())
                .is_some_and(|stored| stored == *config);
            if head_matches {
                for line in lines {
                    match serde_json::from_str::<EvalRow>(line) {
                        Ok(row) => rows.push(row),
                        Err(_) => break,
                    }
                }
            }
        }
        // Rewrite from scratch: drops a torn tail and stale configs in one
        // motion, then leaves the handle positioned for appends.
        let mut file = fs::File::create(path)?;
        writeln!(file, "{}", serde_json::to_string(config)?)?;
        for row in &rows {
            writeln!(file, "{}", serde_json::to_string(row)?)?;
        }
        file.flush()?;
        Ok((ResumeLog { file }, rows))
    }

    pub fn append(&mut self, row: &EvalRow) -> Result<()> {
        writeln!(self.file, "{}", serde_json::to_string(row)?)?;
        self.file.flush()?;
        Ok(())
    }
}

/// Identity of a row within a run, used to match journal entries to work
/// items. `ms` is deliberately excluded.
pub fn resume_key(row: &EvalRow) -> String {
    format!(
        "{}|{}|{}|{}|{}|{}|{}",
        row.method,
        fmt_f64(row.alpha),
        row.payload,
        row.distortion,
        fmt_f64(row.strength),
        row.clip,
        row.seed
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distortion::DistortionKind;
    use crate::eval::{AlphaSpec, CorpusSpec, KeySource, OutputSpec};
    use crate::synth::SceneKind;

    fn sample_row(clip: &str, bit_acc: f64) -> EvalRow {
        EvalRow {
            method: "dwt3-ss".into(),
            alpha: 0.05,
            payload: 96,
            distortion: "gaussian_noise".into(),
            strength: 0.04,
            clip: clip.into(),
            seed: 11,
            bit_acc: Some(bit_acc),
            psnr: Some(37.25),
            mssim: 0.985,
            tpsnr: Some(33.5),
            det_score: Some(0.97),
            ms: 120,
            skipped: false,
        }
    }

    fn tiny_config() -> EvalConfig {
        EvalConfig {
            corpus: CorpusSpec::Synthetic {
                kinds: vec![SceneKind::PanTexture],
                count: 1,
                dims: (8, 32, 32),
            },
            key: KeySource::Seed { seed: 3 },
            alpha: AlphaSpec::Fixed { value: 0.05 },
            payloads: vec![16],
            distortions: vec![DistortionKind::Identity.into()],
            repeats: 1,
            segment_len: 8,
            dimensions: Vec::new(),
            editing: None,
            master_seed: 5,
            codec_cmd: None,
            outputs: OutputSpec::default(),
        }
    }

    #[test]
    fn csv_lines_come_out_exact() {
        let mut skipped = sample_row("pan_texture-001", 0.5);
        skipped.bit_acc = None;
        skipped.det_score = None;
        skipped.skipped = true;
        skipped.ms = 0;
        skipped.distortion = "external_codec".into();
        skipped.strength = 22.0;
        let mut identical = sample_row("pan_texture-000", 1.0);
        identical.psnr = None;
        identical.tpsnr = None;

        let text = csv_string(&[sample_row("pan_texture-000", 0.875), skipped, identical]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "dwt3-ss,0.05,96,gaussian_noise,0.04,pan_texture-000,11,0.875,37.25,0.985,33.5,0.97,120"
        );
        assert_eq!(
            lines[2],
            "dwt3-ss,0.05,96,external_codec,22,pan_texture-001,11,NaN,37.25,0.985,33.5,NaN,0"
        );
        assert_eq!(
            lines[3],
            "dwt3-ss,0.05,96,gaussian_noise,0.04,pan_texture-000,11,1,inf,0.985,inf,0.97,120"
        );
    }

    #[test]
    fn csv_round_trips_rows_exactly() {
        let mut skipped = sample_row("b", 0.0);
        skipped.bit_acc = None;
        skipped.det_score = None;
        skipped.skipped = true;
        skipped.ms = 0;
        let mut identical = sample_row("c", 1.0);
        identical.psnr = None;
        identical.tpsnr = None;
        let rows = vec![sample_row("a", 0.8125), skipped, identical];

        let parsed = parse_csv(&csv_string(&rows)).unwrap();
        assert_eq!(parsed, rows);

        assert!(parse_csv("method,alpha\n1,2\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\nhalf,a,row\n")).is_err());
    }

    #[test]
    fn aggregate_summarizes_its_row_range() {
        let mut rows = vec![
            sample_row("a", 1.0),
            sample_row("b", 0.75),
            sample_row("c", 0.5),
        ];
        rows[2].bit_acc = None;
        rows[2].det_score = None;
        rows[2].skipped = true;

        let agg = Aggregate::compute(&rows, 0, 3);
        assert_eq!(agg.rows, 3);
        assert_eq!(agg.skipped, 1);
        let mean = agg.mean_bit_acc.unwrap();
        assert!((mean - 0.875).abs() < 1e-12);
        assert!((agg.std_bit_acc.unwrap() - 0.125).abs() < 1e-12);
        assert!((agg.mean_det_score.unwrap() - 0.97).abs() < 1e-12);
        assert!((agg.mean_psnr.unwrap() - 37.25).abs() < 1e-12);
        assert_eq!(agg.bit_acc_histogram.iter().sum::<usize>(), 2);
        assert_eq!(agg.bit_acc_histogram[HISTOGRAM_BUCKETS - 1], 1);
        assert_eq!(agg.bit_acc_histogram[15], 1); // 0.75 * 20

        // One identical-clip row pulls the mean PSNR to +inf.
        rows[1].psnr = None;
        let agg = Aggregate::compute(&rows, 0, 3);
        assert_eq!(agg.mean_psnr, None);
    }

    #[test]
    fn histogram_puts_exact_one_in_the_top_bucket() {
        let rows = vec![
            sample_row("a", 0.0),
            sample_row("b", 0.049),
            sample_row("c", 0.95),
            sample_row("d", 1.0),
        ];
        let agg = Aggregate::compute(&rows, 0, 4);
        assert_eq!(agg.bit_acc_histogram[0], 2);
        assert_eq!(agg.bit_acc_histogram[HISTOGRAM_BUCKETS - 1], 2);
    }

    #[test]
    fn resume_log_round_trips_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let cfg = tiny_config();

        let (mut log, restored) = ResumeLog::open(&path, &cfg).unwrap();
        assert!(restored.is_empty());
        log.append(&sample_row("a", 1.0)).unwrap();
        log.append(&sample_row("b", 0.875)).unwrap();
        drop(log);

        let (_log, restored) = ResumeLog::open(&path, &cfg).unwrap();
        assert_eq!(restored.len(), 2);
        assert_eq!(restored[0], sample_row("a", 1.0));
        assert_eq!(restored[1], sample_row("b", 0.875));
    }

    #[test]
    fn resume_log_discards_on_config_change() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");

        let (mut log, _) = ResumeLog::open(&path, &tiny_config()).unwrap();
        log.append(&sample_row("a", 1.0)).unwrap();
        drop(log);

        let mut changed = tiny_config();
        changed.master_seed += 1;
        let (_log, restored) = ResumeLog::open(&path, &changed).unwrap();
        assert!(restored.is_empty());
    }

    #[test]
    fn resume_log_drops_a_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let cfg = tiny_config();

        let (mut log, _) = ResumeLog::open(&path, &cfg).unwrap();
        log.append(&sample_row("a", 1.0)).unwrap();
        drop(log);
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("{\"method\":\"dwt3-ss\",\"alpha\"");
        fs::write(&path, text).unwrap();

        let (_log, restored) = ResumeLog::open(&path, &cfg).unwrap();
        assert_eq!(restored, vec![sample_row("a", 1.0)]);
        // The rewrite scrubbed the torn line off disk too.
        let clean = fs::read_to_string(&path).unwrap();
        assert_eq!(clean.lines().count(), 2);
    }

    #[test]
    fn resume_keys_distinguish_rows_and_ignore_timing() {
        let a = sample_row("a", 1.0);
        let mut later = a.clone();
        later.ms = 9999;
        later.bit_acc = Some(0.25);
        assert_eq!(resume_key(&a), resume_key(&later));

        let mut other = a.clone();
        other.seed = 12;
        assert_ne!(resume_key(&a), resume_key(&other));
    }

    #[test]
    fn report_round_trips_through_json() {
        let rows = vec![sample_row("a", 1.0)];
        let aggregates = vec![Aggregate::compute(&rows, 0, 1)];
        let report = EvalReport {
            config: tiny_config(),
            rows,
            aggregates,
            flags: ReportFlags::default(),
        };
        let text = serde_json::to_string(&report).unwrap();
        let back: EvalReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report, back);
    }
}
