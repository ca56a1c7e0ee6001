//! `vidmark` — command-line front end for the watermarking toolkit.
//!
//! Single-clip commands (`gen-key`, `synth`, `embed`, `extract`, `attack`,
//! `calibrate`, `detect`) wire the library together for interactive use and
//! shell pipelines; `eval` runs the config-driven benchmark protocols and
//! writes CSV/JSON reports; `report` converts between the two report
//! serializations.
//!
//! Exit codes: 0 on success, 2 on configuration problems (bad flags, bad
//! config files, impossible payloads, empty corpora), 3 when `--strict-codec`
//! is set and external-codec cells had to be skipped, 1 otherwise.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vidmark::detector;
use vidmark::distortion::{self, DistortionKind, DistortionSpec};
use vidmark::eval::{self, CorpusSpec, EvalConfig, EvalReport};
use vidmark::io::{infer_format, load_clip, save_clip};
use vidmark::metrics;
use vidmark::spread::{self, Message};
use vidmark::synth::{self, SceneKind};
use vidmark::{Error, VideoClip};

type Dims = (usize, usize, usize);

#[derive(Parser)]
#[command(
    name = "vidmark",
    version,
    about = "Blind video watermarking: embed, attack, extract, detect, benchmark"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Create a watermark key file
    GenKey(GenKeyArgs),
    /// Render a synthetic test clip
    Synth(SynthArgs),
    /// Embed a message into a clip
    Embed(EmbedArgs),
    /// Blindly decode the message from a clip
    Extract(ExtractArgs),
    /// Apply one distortion to a clip
    Attack(AttackArgs),
    /// Estimate the detector's score null from unmarked clips
    Calibrate(CalibrateArgs),
    /// Scan a clip for watermarked frames
    Detect(DetectArgs),
    /// Run a benchmark protocol from a config file
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Convert between report serializations and print summaries
    Report(ReportArgs),
}

#[derive(Args)]
struct GenKeyArgs {
    /// Key seed
    #[arg(long)]
    seed: u64,
    /// Payload length in bits
    #[arg(long)]
    bits: usize,
    /// Coefficient slots per bit; omit to fill the capacity of --dims
    #[arg(long)]
    chip_len: Option<usize>,
    /// Segment dimensions TxHxW used to size and check the key
    #[arg(long, value_parser = parse_dims)]
    dims: Option<Dims>,
    /// Where to write the key (JSON)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene family: pan_texture, drift_gradient, or plasma
    #[arg(long, value_parser = SceneKind::parse)]
    scene: SceneKind,
    /// Clip dimensions TxHxW
    #[arg(long, value_parser = parse_dims)]
    dims: Dims,
    #[arg(long)]
    seed: u64,
    /// Output clip path (format from the extension)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct StrengthArg {
    /// Embedding strength
    #[arg(long)]
    alpha: Option<f64>,
    /// Pick the strength that lands the marked clip at this PSNR (dB)
    #[arg(long)]
    target_psnr: Option<f64>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct MessageArg {
    /// Literal message bits, e.g. 0110100101
    #[arg(long)]
    message: Option<String>,
    /// Draw the message bits from this seed instead
    #[arg(long)]
    message_seed: Option<u64>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Key file (JSON)
    #[arg(long)]
    key: PathBuf,
    /// Cover clip
    #[arg(long)]
    input: PathBuf,
    /// Marked clip destination
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    strength: StrengthArg,
    #[command(flatten)]
    message: MessageArg,
    /// Save the embedded bits here (JSON array)
    #[arg(long)]
    message_out: Option<PathBuf>,
    /// Frames per embedding segment
    #[arg(long, default_value_t = 8)]
    segment_len: usize,
}

#[derive(Args)]
struct ExtractArgs {
    /// Key file (JSON)
    #[arg(long)]
    key: PathBuf,
    /// Suspect clip
    #[arg(long)]
    input: PathBuf,
    /// Frames per embedding segment
    #[arg(long, default_value_t = 8)]
    segment_len: usize,
    /// Compare against these bits (literal 0/1 string, or @path to a JSON array)
    #[arg(long)]
    expect: Option<String>,
    /// Machine-readable output
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AttackArgs {
    /// Attack name from the standard set, e.g. gaussian_noise, crop, frame_drop
    #[arg(long, conflicts_with = "spec")]
    kind: Option<String>,
    /// Override the attack's principal strength parameter
    #[arg(long, requires = "kind")]
    strength: Option<f64>,
    /// Full attack description as JSON, e.g. {"kind":"gaussian_blur","sigma":1.5}
    #[arg(long)]
    spec: Option<String>,
    /// Seed for the attack's random choices
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Key file; the fitted null model is written back into it
    #[arg(long)]
    key: PathBuf,
    /// Frames per detection window
    #[arg(long, default_value_t = detector::DEFAULT_WINDOW)]
    window: usize,
    /// Unmarked clips to estimate the score distribution from
    #[arg(required = true)]
    clips: Vec<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Calibrated key file
    #[arg(long)]
    key: PathBuf,
    /// Clip to scan
    #[arg(long)]
    input: PathBuf,
    /// Frames per detection window
    #[arg(long, default_value_t = detector::DEFAULT_WINDOW)]
    window: usize,
    /// Window step in frames
    #[arg(long, default_value_t = detector::DEFAULT_STRIDE)]
    stride: usize,
    /// Frame score needed to keep a frame
    #[arg(long, default_value_t = detector::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Machine-readable output
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Robustness matrix: every configured distortion cell
    Matrix(EvalRunArgs),
    /// Strength sweep over the configured alpha list
    Alpha(EvalRunArgs),
    /// Payload sweep at matched embedding quality
    Payload(EvalRunArgs),
    /// Clip-geometry sweep over the configured dimensions grid
    Dims(EvalRunArgs),
    /// Editing scenario with detector-gated decoding
    Editing(EvalRunArgs),
}

#[derive(Args)]
struct EvalRunArgs {
    /// Run configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Write the row table here (overrides the config)
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the full report here (overrides the config)
    #[arg(long)]
    json: Option<PathBuf>,
    /// Journal finished rows here and reuse them on re-run (matrix only)
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Fail (exit 3) if external-codec cells had to be skipped
    #[arg(long)]
    strict_codec: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// A full report (.json) or a row table (.csv)
    #[arg(long)]
    input: PathBuf,
    /// Write rows as CSV here
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write JSON here (full report for JSON input, bare rows for CSV input)
    #[arg(long)]
    json: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = match err.downcast_ref::<Error>() {
                Some(
                    Error::ConfigInvalid(_) | Error::CorpusEmpty | Error::PayloadTooLarge { .. },
                ) => 2,
                Some(Error::CodecUnavailable(_)) => 3,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cmd: Cmd) -> anyhow::Result<()> {
    match cmd {
        Cmd::GenKey(args) => run_gen_key(args),
        Cmd::Synth(args) => run_synth(args),
        Cmd::Embed(args) => run_embed(args),
        Cmd::Extract(args) => run_extract(args),
        Cmd::Attack(args) => run_attack(args),
        Cmd::Calibrate(args) => run_calibrate(args),
        Cmd::Detect(args) => run_detect(args),
        Cmd::Eval(cmd) => run_eval(cmd),
        Cmd::Report(args) => run_report(args),
    }
}

fn parse_dims(s: &str) -> Result<Dims, String> {
    let parts: Vec<&str> = s.split('x').collect();
    let parse = |p: &str| p.parse::<usize>().map_err(|_| format!("bad extent {p:?} in {s:?}"));
    match parts.as_slice() {
        [t, h, w] => Ok((parse(t)?, parse(h)?, parse(w)?)),
        _ => Err(format!("dimensions must look like TxHxW, got {s:?}")),
    }
}

fn run_gen_key(args: GenKeyArgs) -> anyhow::Result<()> {
    if args.bits == 0 {
        return Err(Error::ConfigInvalid("payload of 0 bits".into()).into());
    }
    let chip_len = match (args.chip_len, args.dims) {
        (Some(c), _) => c,
        (None, Some(dims)) => {
            let slots = spread::capacity(dims, 1);
            let chip_len = slots / args.bits;
            if chip_len == 0 {
                return Err(Error::PayloadTooLarge {
                    needed: args.bits,
                    capacity: slots,
                }
                .into());
            }
            chip_len
        }
        (None, None) => {
            return Err(
                Error::ConfigInvalid("give --chip-len or --dims to size the key".into()).into(),
            );
        }
    };
    let spec = spread::KeySpec::new(args.seed, args.bits, chip_len);
    if let Some(dims) = args.dims {
        // Fails fast if the payload cannot fit a segment of these dims.
        spec.materialize(dims)?;
    }
    spread::save_key_spec(&spec, &args.out)?;
    println!(
        "key: {} bits x {} slots/bit (seed {}) -> {}",
        spec.m,
        spec.chip_len,
        spec.seed,
        args.out.display()
    );
    Ok(())
}

fn run_synth(args: SynthArgs) -> anyhow::Result<()> {
    let clip = synth::render(args.scene, args.dims, args.seed)?;
    save_clip(&clip, &args.out, infer_format(&args.out))?;
    let (t, h, w) = clip.dims();
    println!(
        "{} {t}x{h}x{w} (seed {}) -> {}",
        args.scene.as_str(),
        args.seed,
        args.out.display()
    );
    Ok(())
}

fn resolve_message(arg: &MessageArg, m: usize) -> anyhow::Result<Message> {
    if let Some(bits) = &arg.message {
        let msg = parse_bits(bits)?;
        if msg.len() != m {
            return Err(Error::ConfigInvalid(format!(
                "message has {} bits but the key carries {m}",
                msg.len()
            ))
            .into());
        }
        Ok(msg)
    } else {
        let seed = arg.message_seed.expect("clap enforces the group");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..m).map(|_| rng.random::<bool>()).collect())
    }
}

fn parse_bits(s: &str) -> anyhow::Result<Message> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::ConfigInvalid(format!("message bit {c:?} is not 0 or 1")).into()),
        })
        .collect()
}

fn bits_string(msg: &[bool]) -> String {
    msg.iter().map(|b| if *b { '1' } else { '0' }).collect()
}

fn load_clip_arg(path: &Path) -> anyhow::Result<VideoClip> {
    load_clip(path, infer_format(path)).with_context(|| format!("loading {}", path.display()))
}

fn run_embed(args: EmbedArgs) -> anyhow::Result<()> {
    let spec = spread::load_key_spec(&args.key)?;
    let cover = load_clip_arg(&args.input)?;
    let (_, h, w) = cover.dims();
    let key = spec.materialize((args.segment_len, h, w))?;
    let msg = resolve_message(&args.message, spec.m)?;

    let emb = match (args.strength.alpha, args.strength.target_psnr) {
        (Some(alpha), None) => {
            let marked = spread::embed_tiled(&cover, &msg, &key, alpha)?;
            let quality = metrics::QualityReport::measure(&cover, &marked)?;
            eval::Embedded {
                alpha,
                marked,
                quality,
            }
        }
        (None, Some(db)) => eval::fit_alpha_to_psnr(&cover, &msg, &key, db, 0.25)?,
        _ => unreachable!("clap enforces exactly one strength flag"),
    };

    save_clip(&emb.marked, &args.output, infer_format(&args.output))?;
    if let Some(path) = &args.message_out {
        fs::write(path, serde_json::to_string(&msg)?)?;
    }
    let psnr = emb
        .quality
        .psnr_db
        .map_or("inf".to_string(), |v| format!("{v:.2}"));
    println!(
        "embedded {} bits at alpha {:.6} (psnr {psnr} dB, mssim {:.4}) -> {}",
        msg.len(),
        emb.alpha,
        emb.quality.mssim,
        args.output.display()
    );
    Ok(())
}

fn run_extract(args: ExtractArgs) -> anyhow::Result<()> {
    let spec = spread::load_key_spec(&args.key)?;
    let suspect = load_clip_arg(&args.input)?;
    let (_, h, w) = suspect.dims();
    let key = spec.materialize((args.segment_len, h, w))?;
    let ext = spread::extract_tiled(&suspect, &key)?;
    let detection = eval::fused_detection(&ext);

    let expected = match &args.expect {
        Some(spec) => Some(load_expected_bits(spec)?),
        None => None,
    };
    let accuracy = expected
        .as_ref()
        .map(|sent| metrics::bit_accuracy(sent, &ext.message))
        .transpose()?;

    if args.json {
        let out = serde_json::json!({
            "bits": bits_string(&ext.message),
            "soft": ext.soft,
            "detection": detection,
            "segments": ext.segments.iter()
                .map(|s| serde_json::json!({"z": s.z, "detection": s.detection}))
                .collect::<Vec<_>>(),
            "accuracy": accuracy,
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("bits {}", bits_string(&ext.message));
        println!(
            "detection {detection:.4} over {} segment(s)",
            ext.segments.len()
        );
        if let Some(acc) = accuracy {
            println!("accuracy {acc:.4}");
        }
    }
    Ok(())
}

fn load_expected_bits(spec: &str) -> anyhow::Result<Message> {
    if let Some(path) = spec.strip_prefix('@') {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading expected bits {path}"))?;
        Ok(serde_json::from_str(&text)?)
    } else {
        parse_bits(spec)
    }
}

/// Every attack at its customary parameters, for `--kind` lookup by name.
fn named_attacks() -> Vec<DistortionKind> {
    let mut kinds = distortion::default_pool();
    for extra in [
        DistortionKind::Identity,
        DistortionKind::ExternalCodec { crf: 22 },
    ] {
        if !kinds.iter().any(|k| k.name() == extra.name()) {
            kinds.push(extra);
        }
    }
    kinds
}

fn run_attack(args: AttackArgs) -> anyhow::Result<()> {
    let kind = match (&args.kind, &args.spec) {
        (Some(name), None) => {
            let catalog = named_attacks();
            let base = catalog
                .iter()
                .find(|k| k.name() == name)
                .cloned()
                .ok_or_else(|| {
                    let names: Vec<&str> = catalog.iter().map(|k| k.name()).collect();
                    Error::ConfigInvalid(format!(
                        "unknown attack {name:?}; one of: {}",
                        names.join(", ")
                    ))
                })?;
            match args.strength {
                Some(s) => base.with_strength(s),
                None => base,
            }
        }
        (None, Some(text)) => serde_json::from_str(text)
            .map_err(|e| Error::ConfigInvalid(format!("attack spec does not parse: {e}")))?,
        _ => {
            return Err(Error::ConfigInvalid("give --kind or --spec".into()).into());
        }
    };
    let clip = load_clip_arg(&args.input)?;
    let attacked = distortion::apply(&clip, &DistortionSpec::new(kind.clone(), args.seed))?;
    save_clip(&attacked, &args.output, infer_format(&args.output))?;
    println!(
        "{} (strength {}, seed {}) -> {}",
        kind.name(),
        kind.strength(),
        args.seed,
        args.output.display()
    );
    Ok(())
}

fn run_calibrate(args: CalibrateArgs) -> anyhow::Result<()> {
    let mut spec = spread::load_key_spec(&args.key)?;
    let clips: Vec<VideoClip> = args
        .clips
        .iter()
        .map(|p| load_clip_arg(p))
        .collect::<anyhow::Result<_>>()?;
    let null = detector::calibrate_null(&spec, &clips, args.window)?;
    spec.null = Some(null);
    spread::save_key_spec(&spec, &args.key)?;
    println!(
        "null: mean {:.4}, std {:.4} from {} windows -> {}",
        null.mean,
        null.std,
        null.n,
        args.key.display()
    );
    Ok(())
}

fn run_detect(args: DetectArgs) -> anyhow::Result<()> {
    let spec = spread::load_key_spec(&args.key)?;
    let null = spec.null.ok_or_else(|| {
        Error::ConfigInvalid("key has no null model; run `vidmark calibrate` first".into())
    })?;
    let clip = load_clip_arg(&args.input)?;
    let trace = detector::detect(&spec, &clip, &null, args.window, args.stride)?;
    let kept = detector::filter_frames(&trace, args.threshold);
    let runs = detector::kept_runs(&kept);
    let kept_count = kept.iter().filter(|k| **k).count();
    let best = trace
        .windows
        .iter()
        .map(|w| w.score)
        .fold(f64::NEG_INFINITY, f64::max);

    if args.json {
        let out = serde_json::json!({
            "frame_scores": trace.frame_scores,
            "windows": trace.windows.iter()
                .map(|w| serde_json::json!({"start": w.start, "z": w.z, "score": w.score}))
                .collect::<Vec<_>>(),
            "kept": kept,
            "runs": runs,
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!(
            "{} windows, best score {best:.4}",
            trace.windows.len()
        );
        let spans: Vec<String> = runs.iter().map(|(s, e)| format!("[{s}, {e})")).collect();
        println!(
            "kept {kept_count}/{} frames in {} run(s) {}",
            kept.len(),
            runs.len(),
            spans.join(" ")
        );
    }
    Ok(())
}

fn run_eval(cmd: EvalCmd) -> anyhow::Result<()> {
    let (args, run): (
        &EvalRunArgs,
        fn(&EvalConfig) -> vidmark::Result<EvalReport>,
    ) = match &cmd {
        EvalCmd::Matrix(a) => (a, eval::run_matrix),
        EvalCmd::Alpha(a) => (a, eval::sweep_alpha),
        EvalCmd::Payload(a) => (a, eval::sweep_payload),
        EvalCmd::Dims(a) => (a, eval::sweep_dimensions),
        EvalCmd::Editing(a) => (a, eval::run_editing_app),
    };

    let text = fs::read_to_string(&args.config).map_err(|e| {
        Error::ConfigInvalid(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let mut cfg: EvalConfig = serde_json::from_str(&text)
        .map_err(|e| Error::ConfigInvalid(format!("config does not parse: {e}")))?;
    expand_corpus_globs(&mut cfg)?;
    if args.csv.is_some() {
        cfg.outputs.csv = args.csv.clone();
    }
    if args.json.is_some() {
        cfg.outputs.json = args.json.clone();
    }

    let report = match (&cmd, &args.resume) {
        (EvalCmd::Matrix(_), Some(journal)) => eval::run_matrix_resumable(&cfg, journal)?,
        (_, Some(_)) => {
            return Err(
                Error::ConfigInvalid("resume journals apply to `eval matrix` runs".into()).into(),
            );
        }
        (_, None) => run(&cfg)?,
    };

    print_aggregates(&report);
    if let Some(path) = &report.config.outputs.csv {
        println!("rows -> {}", path.display());
    }
    if let Some(path) = &report.config.outputs.json {
        println!("report -> {}", path.display());
    }
    if args.strict_codec && report.flags.codec_skipped {
        return Err(Error::CodecUnavailable(
            "external-codec cells were skipped in this run".into(),
        )
        .into());
    }
    Ok(())
}

/// Expands shell-style patterns in a path corpus, sorted for determinism.
fn expand_corpus_globs(cfg: &mut EvalConfig) -> anyhow::Result<()> {
    let CorpusSpec::Paths { paths } = &mut cfg.corpus else {
        return Ok(());
    };
    let mut expanded: Vec<PathBuf> = Vec::new();
    for path in paths.iter() {
        let text = path.to_string_lossy();
        if text.contains(['*', '?', '[']) {
            let mut hits: Vec<PathBuf> = glob::glob(&text)
                .map_err(|e| Error::ConfigInvalid(format!("bad corpus pattern {text:?}: {e}")))?
                .collect::<Result<_, _>>()
                .with_context(|| format!("expanding corpus pattern {text:?}"))?;
            if hits.is_empty() {
                return Err(
                    Error::ConfigInvalid(format!("corpus pattern {text:?} matches nothing")).into(),
                );
            }
            hits.sort();
            expanded.extend(hits);
        } else {
            expanded.push(path.clone());
        }
    }
    *paths = expanded;
    Ok(())
}

fn print_aggregates(report: &EvalReport) {
    let opt = |v: Option<f64>, prec: usize| match v {
        Some(v) => format!("{v:.prec$}"),
        None => "-".into(),
    };
    println!(
        "{:<18} {:>7} {:>9} {:<16} {:>8} {:>7} {:>7} {:>7} {:>8} {:>7} {:>6}",
        "method",
        "payload",
        "alpha",
        "distortion",
        "strength",
        "acc",
        "std",
        "det",
        "psnr",
        "mssim",
        "rows"
    );
    for a in &report.aggregates {
        let rows = if a.skipped > 0 {
            format!("{}({}s)", a.rows, a.skipped)
        } else {
            a.rows.to_string()
        };
        println!(
            "{:<18} {:>7} {:>9.5} {:<16} {:>8} {:>7} {:>7} {:>7} {:>8} {:>7.4} {:>6}",
            a.method,
            a.payload,
            a.alpha_nominal,
            a.distortion,
            format!("{}", a.strength),
            opt(a.mean_bit_acc, 4),
            opt(a.std_bit_acc, 4),
            opt(a.mean_det_score, 4),
            opt(a.mean_psnr, 2),
            a.mean_mssim,
            rows
        );
    }
    for s in &report.flags.editing {
        println!(
            "editing len {:>4}: with detector {:.4}, without {:.4}, span IoU {:.3}",
            s.background_len, s.with_detector_acc, s.without_detector_acc, s.mean_iou
        );
    }
}

fn run_report(args: ReportArgs) -> anyhow::Result<()> {
    let ext = args
        .input
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    match ext.as_str() {
        "json" => {
            let text = fs::read_to_string(&args.input)
                .with_context(|| format!("reading {}", args.input.display()))?;
            let report: EvalReport = serde_json::from_str(&text)
                .map_err(|e| Error::ConfigInvalid(format!("report does not parse: {e}")))?;
            if let Some(path) = &args.csv {
                eval::emit_csv(&report.rows, path)?;
                println!("rows -> {}", path.display());
            }
            if let Some(path) = &args.json {
                eval::emit_json(&report, path)?;
                println!("report -> {}", path.display());
            }
            print_aggregates(&report);
        }
        "csv" => {
            let text = fs::read_to_string(&args.input)
                .with_context(|| format!("reading {}", args.input.display()))?;
            let rows = eval::parse_csv(&text)?;
            if args.csv.is_some() {
                return Err(Error::ConfigInvalid(
                    "input is already CSV; use --json to convert".into(),
                )
                .into());
            }
            match &args.json {
                Some(path) => {
                    let mut text = serde_json::to_string_pretty(&rows)?;
                    text.push('\n');
                    fs::write(path, text)?;
                    println!("{} rows -> {}", rows.len(), path.display());
                }
                None => println!("{} rows", rows.len()),
            }
        }
        other => {
            return Err(Error::ConfigInvalid(format!(
                "report input must be .json or .csv, got {other:?}"
            ))
            .into());
        }
    }
    Ok(())
}
