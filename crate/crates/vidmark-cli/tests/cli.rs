//! End-to-end runs of the `vidmark` binary: each test drives real
//! subprocesses through temp directories and asserts on exit codes and
//! parsed output.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn vidmark(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vidmark"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawning vidmark")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = vidmark(dir, args);
    assert!(
        out.status.success(),
        "vidmark {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn json_field(text: &str, field: &str) -> serde_json::Value {
    let v: serde_json::Value = serde_json::from_str(text).expect("json output");
    v.get(field).cloned().unwrap_or(serde_json::Value::Null)
}

#[test]
fn help_lists_subcommands() {
    let dir = TempDir::new().unwrap();
    let text = ok(dir.path(), &["--help"]);
    for sub in [
        "gen-key",
        "synth",
        "embed",
        "extract",
        "attack",
        "calibrate",
        "detect",
        "eval",
        "report",
    ] {
        assert!(text.contains(sub), "--help does not mention {sub}");
    }
}

#[test]
fn embed_attack_extract_loop() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "gen-key", "--seed", "9", "--bits", "16", "--dims", "8x64x64", "--out", "key.json",
        ],
    );
    ok(
        d,
        &[
            "synth",
            "--scene",
            "pan_texture",
            "--dims",
            "16x64x64",
            "--seed",
            "3",
            "--out",
            "cover.npy",
        ],
    );
    let embed_out = ok(
        d,
        &[
            "embed",
            "--key",
            "key.json",
            "--input",
            "cover.npy",
            "--output",
            "marked.npy",
            "--target-psnr",
            "37",
            "--message-seed",
            "5",
            "--message-out",
            "msg.json",
        ],
    );
    assert!(embed_out.contains("embedded 16 bits"), "got: {embed_out}");

    let clean = ok(
        d,
        &[
            "extract",
            "--key",
            "key.json",
            "--input",
            "marked.npy",
            "--expect",
            "@msg.json",
            "--json",
        ],
    );
    assert_eq!(json_field(&clean, "accuracy"), serde_json::json!(1.0));
    let det = json_field(&clean, "detection").as_f64().unwrap();
    assert!(det > 0.9, "clean detection {det}");

    ok(
        d,
        &[
            "attack",
            "--kind",
            "gaussian_noise",
            "--strength",
            "0.04",
            "--seed",
            "7",
            "--input",
            "marked.npy",
            "--output",
            "noisy.npy",
        ],
    );
    let noisy = ok(
        d,
        &[
            "extract",
            "--key",
            "key.json",
            "--input",
            "noisy.npy",
            "--expect",
            "@msg.json",
            "--json",
        ],
    );
    let acc = json_field(&noisy, "accuracy").as_f64().unwrap();
    assert!(acc >= 0.9, "noisy accuracy {acc}");
}

fn matrix_config() -> serde_json::Value {
    serde_json::json!({
        "corpus": {"source": "synthetic", "kinds": ["pan_texture"], "count": 2, "dims": [8, 32, 32]},
        "key": {"from": "seed", "seed": 11},
        "alpha": {"mode": "fixed", "value": 0.08},
        "payloads": [16],
        "distortions": [
            {"kind": "identity"},
            {"kind": "gaussian_noise", "std": 0.04}
        ],
        "repeats": 1,
        "master_seed": 77
    })
}

fn strip_ms_column(csv: &str) -> String {
    csv.lines()
        .map(|line| match line.rsplit_once(',') {
            Some((head, _)) => head.to_string(),
            None => line.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn eval_matrix_writes_stable_reports() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.json"), matrix_config().to_string()).unwrap();

    let text = ok(
        d,
        &[
            "eval", "matrix", "--config", "cfg.json", "--csv", "run1.csv", "--json", "run1.json",
        ],
    );
    assert!(text.contains("identity"), "summary table: {text}");

    let csv1 = fs::read_to_string(d.join("run1.csv")).unwrap();
    let mut lines = csv1.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,alpha,payload,distortion,strength,clip,seed,bit_acc,psnr,mssim,tpsnr,det_score,ms"
    );
    assert_eq!(lines.count(), 4, "2 clips x 2 cells x 1 repeat");

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("run1.json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 4);
    assert_eq!(report["aggregates"].as_array().unwrap().len(), 2);

    ok(
        d,
        &[
            "eval", "matrix", "--config", "cfg.json", "--csv", "run2.csv",
        ],
    );
    let csv2 = fs::read_to_string(d.join("run2.csv")).unwrap();
    assert_eq!(
        strip_ms_column(&csv1),
        strip_ms_column(&csv2),
        "re-run changed row content"
    );
}

#[test]
fn bad_configs_exit_2() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();

    let mut cfg = matrix_config();
    cfg["repeats"] = serde_json::json!(0);
    fs::write(d.join("bad.json"), cfg.to_string()).unwrap();
    let out = vidmark(d, &["eval", "matrix", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(2), "zero repeats should exit 2");

    let out = vidmark(d, &["eval", "matrix", "--config", "missing.json"]);
    assert_eq!(out.status.code(), Some(2), "missing config should exit 2");
}

#[test]
fn strict_codec_exits_3_without_encoder() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let mut cfg = matrix_config();
    cfg["distortions"] = serde_json::json!([{"kind": "external_codec", "crf": 22}]);
    fs::write(d.join("cfg.json"), cfg.to_string()).unwrap();
    let out = vidmark(
        d,
        &["eval", "matrix", "--config", "cfg.json", "--strict-codec"],
    );
    let code = out.status.code();
    assert!(
        code == Some(0) || code == Some(3),
        "strict codec run exited {code:?}"
    );
}

#[test]
fn calibrate_then_detect() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "gen-key", "--seed", "4", "--bits", "16", "--dims", "8x32x32", "--out", "key.json",
        ],
    );
    let mut clips: Vec<String> = Vec::new();
    for i in 0..3 {
        let name = format!("bg{i}.npy");
        ok(
            d,
            &[
                "synth",
                "--scene",
                "plasma",
                "--dims",
                "64x32x32",
                "--seed",
                &i.to_string(),
                "--out",
                &name,
            ],
        );
        clips.push(name);
    }
    let cal = ok(
        d,
        &[
            "calibrate",
            "--key",
            "key.json",
            "--window",
            "8",
            &clips[0],
            &clips[1],
            &clips[2],
        ],
    );
    assert!(cal.contains("24 windows"), "got: {cal}");
    let key: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("key.json")).unwrap()).unwrap();
    assert!(key.get("null").is_some(), "calibrate did not store the null");

    ok(
        d,
        &[
            "synth",
            "--scene",
            "pan_texture",
            "--dims",
            "16x32x32",
            "--seed",
            "9",
            "--out",
            "cover.npy",
        ],
    );
    ok(
        d,
        &[
            "embed",
            "--key",
            "key.json",
            "--input",
            "cover.npy",
            "--output",
            "marked.npy",
            "--alpha",
            "0.08",
            "--message-seed",
            "1",
        ],
    );
    let text = ok(
        d,
        &["detect", "--key", "key.json", "--input", "marked.npy"],
    );
    assert!(text.contains("kept"), "got: {text}");
    let json = ok(
        d,
        &[
            "detect", "--key", "key.json", "--input", "marked.npy", "--json",
        ],
    );
    let kept: Vec<bool> =
        serde_json::from_value(json_field(&json, "kept")).expect("kept frame mask");
    assert_eq!(kept.len(), 16);
    assert!(kept.iter().filter(|k| **k).count() >= 8, "marked frames lost");
}

#[test]
fn report_round_trips() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.json"), matrix_config().to_string()).unwrap();
    ok(
        d,
        &[
            "eval", "matrix", "--config", "cfg.json", "--csv", "run.csv", "--json", "run.json",
        ],
    );

    ok(
        d,
        &["report", "--input", "run.json", "--csv", "from_json.csv"],
    );
    assert_eq!(
        fs::read_to_string(d.join("run.csv")).unwrap(),
        fs::read_to_string(d.join("from_json.csv")).unwrap(),
        "report CSV differs from the run's own CSV"
    );

    ok(
        d,
        &["report", "--input", "run.csv", "--json", "rows.json"],
    );
    let rows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("rows.json")).unwrap()).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("run.json")).unwrap()).unwrap();
    assert_eq!(&rows, &report["rows"], "CSV-parsed rows differ");
}

#[test]
fn unknown_attack_names_the_alternatives() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "--scene",
            "plasma",
            "--dims",
            "8x16x16",
            "--seed",
            "0",
            "--out",
            "c.npy",
        ],
    );
    let out = vidmark(
        d,
        &[
            "attack", "--kind", "melt", "--input", "c.npy", "--output", "x.npy",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("gaussian_noise"), "stderr: {err}");
}
