use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use coincept::encoder::{param_count, EncoderConfig};
use coincept::tasks::anomaly::{delay_adjust, prf};
use rustfft::{num_complex::Complex, FftPlanner};
use serde_json::Value;

const TINY: &[&str] = &[
    "--set",
    "encoder.hidden_dim=4",
    "--set",
    "encoder.output_dim=8",
    "--set",
    "encoder.base_kernels=[2,3]",
    "--set",
    "encoder.n_blocks=2",
    "--set",
    "train.batch_size=2",
    "--set",
    "train.window_len=64",
];

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_coincept"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn coincept")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn schema() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let text = include_str!("../schema/output.schema.json");
        jsonschema::validator_for(&serde_json::from_str(text).unwrap()).unwrap()
    })
}

/// Runs to success and returns the schema-checked stdout document.
fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    let errors: Vec<String> = schema().iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema violations {errors:?} in {v}");
    v
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(rows: &[Vec<String>], c: usize) -> Vec<f64> {
    rows.iter().map(|r| r[c].parse().unwrap()).collect()
}

fn toy(dir: &Path) -> PathBuf {
    let path = dir.join("toy.csv");
    ok_json(&["synth", "--kind", "toy", "--seed", "1", "--out", p(&path)]);
    path
}

fn train_tiny(data: &Path, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["train", "--data", p(data), "--out", p(out), "--iters", "3"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    ok_json(&args)
}

#[test]
fn synth_toy_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let va = ok_json(&["synth", "--kind", "toy", "--seed", "1", "--out", p(&a)]);
    ok_json(&["synth", "--kind", "toy", "--seed", "1", "--out", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(
        va["metrics"]["regions"],
        serde_json::json!([[0, 300], [300, 600], [600, 900]])
    );
    assert_eq!(read_csv(&a).1.len(), 900);
}

#[test]
fn synth_classes_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.tsv");
    let test = dir.path().join("test.tsv");
    let v = ok_json(&[
        "synth",
        "--kind",
        "classes",
        "--per-class",
        "20",
        "--out",
        p(&train),
        "--test-out",
        p(&test),
    ]);
    assert_eq!(v["metrics"]["rows"], 60);
    let text = std::fs::read_to_string(&train).unwrap();
    assert_eq!(text.lines().count(), 60);
    assert_eq!(std::fs::read_to_string(&test).unwrap().lines().count(), 60);
}

#[test]
fn bad_kind_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    assert_eq!(code(&["synth", "--kind", "spiral", "--out", p(&out)]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
}

#[test]
fn perturb_alpha_zero_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let src = toy(dir.path());
    let out = dir.path().join("p.csv");
    ok_json(&["perturb", "--in", p(&src), "--alpha", "0", "--out", p(&out)]);
    let (ha, ra) = read_csv(&src);
    let (hb, rb) = read_csv(&out);
    assert_eq!(ha, hb);
    assert_eq!(ra.len(), rb.len());
    for (a, b) in ra.iter().zip(&rb) {
        assert_eq!(a[0], b[0], "timestamps kept");
        for (x, y) in a[1..].iter().zip(&b[1..]) {
            let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
            assert!((x - y).abs() < 1e-8);
        }
    }
}

fn high_band_energy(x: &[f64], cutoff: f64) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    (0..=n / 2)
        .filter(|&f| f as f64 / n as f64 >= cutoff)
        .map(|f| buf[f].norm_sqr())
        .sum()
}

#[test]
fn perturb_shrinks_high_band_of_toy() {
    let dir = tempfile::tempdir().unwrap();
    let src = toy(dir.path());
    let out = dir.path().join("p.csv");
    let v = ok_json(&["perturb", "--in", p(&src), "--alpha", "0.2", "--out", p(&out)]);
    assert_eq!(v["metrics"]["rows"], 900);
    assert_eq!(v["metrics"]["columns"], 1);
    let (_, ra) = read_csv(&src);
    let (_, rb) = read_csv(&out);
    let (a, b) = (column(&ra, 1), column(&rb, 1));
    for cutoff in [0.05, 0.15, 0.25] {
        let (ea, eb) = (high_band_energy(&a, cutoff), high_band_energy(&b, cutoff));
        assert!(eb < ea, "cutoff {cutoff}: {eb} !< {ea}");
    }
}

#[test]
fn train_missing_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = dir.path().join("m.ckpt");
    assert_eq!(code(&["train", "--data", p(&missing), "--out", p(&out)]), 2);
}

#[test]
fn train_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy(dir.path());
    let (a, b) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
    let trace = dir.path().join("trace.csv");
    let v = train_tiny(&data, &a, &["--seed", "4", "--trace", p(&trace)]);
    train_tiny(&data, &b, &["--seed", "4"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(v["metrics"]["iterations"], 3);
    let (h, rows) = read_csv(&trace);
    assert_eq!(h, ["iteration", "loss"]);
    assert_eq!(rows.len(), 3);
    let c = dir.path().join("c.ckpt");
    train_tiny(&data, &c, &["--seed", "5"]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn divergent_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy(dir.path());
    let out = dir.path().join("x.ckpt");
    let mut args = vec![
        "train",
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--iters",
        "5",
        "--set",
        "train.lr=1e300",
    ];
    args.extend_from_slice(TINY);
    let res = run(&args);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("iteration"));
    assert!(!out.exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[encoder]\nhidden_dim = 0\n").unwrap();
    assert_eq!(code(&["inspect", "--config", p(&cfg)]), 2);
    std::fs::write(&cfg, "[train]\nlearning_rate = 0.1\n").unwrap();
    let out = run(&["inspect", "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
    assert_eq!(code(&["inspect", "--set", "encoder"]), 2);
}

#[test]
fn inspect_reports_receptive_fields_and_params() {
    let v = ok_json(&["inspect"]);
    let m = &v["metrics"];
    let unit = &m["blocks"][2]["units"][2];
    assert_eq!(unit["kernel"], 8);
    assert_eq!(unit["dilation"], 225);
    assert_eq!(unit["receptive_field"], 3375);
    assert_eq!(m["max_receptive_field"], 3375);
    assert_eq!(m["params"], param_count(&EncoderConfig::default()));

    let deep = ok_json(&["inspect", "--set", "encoder.n_blocks=6"]);
    let rf6 = deep["metrics"]["max_receptive_field"].as_u64().unwrap();
    assert_eq!(rf6, 3375 * 3375);
    let ratio = deep["metrics"]["params"].as_f64().unwrap() / m["params"].as_f64().unwrap();
    assert!(ratio < 2.2, "params grew {ratio}x");
    assert_ne!(deep["config_hash"], v["config_hash"]);
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[encoder]\nn_blocks = 2\nbase_kernels = [3]\n").unwrap();
    let from_file = ok_json(&["inspect", "--config", p(&cfg)]);
    assert_eq!(from_file["metrics"]["max_receptive_field"], 25);
    let overridden = ok_json(&["inspect", "--config", p(&cfg), "--set", "encoder.n_blocks=1"]);
    assert_eq!(overridden["metrics"]["max_receptive_field"], 5);
}

#[test]
fn eval_classify_reports_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.tsv");
    let test = dir.path().join("test.tsv");
    ok_json(&[
        "synth",
        "--kind",
        "classes",
        "--per-class",
        "6",
        "--len",
        "48",
        "--out",
        p(&train),
        "--test-out",
        p(&test),
    ]);
    let ckpt = dir.path().join("m.ckpt");
    train_tiny(&train, &ckpt, &[]);
    let out_dir = dir.path().join("eval");
    let v = ok_json(&[
        "eval-classify",
        "--ckpt",
        p(&ckpt),
        "--data",
        p(&train),
        "--test",
        p(&test),
        "--out-dir",
        p(&out_dir),
    ]);
    let acc = v["metrics"]["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(v["metrics"]["n_test"], 18);
    let (h, rows) = read_csv(&out_dir.join("predictions.csv"));
    assert_eq!(h, ["index", "label", "predicted"]);
    assert_eq!(rows.len(), 18);
}

fn labeled_stream(dir: &Path) -> PathBuf {
    let path = dir.join("stream.csv");
    let spikes = [150, 190, 260];
    let mut text = String::from("t,x,is_anomaly\n");
    for t in 0..300 {
        let mut x = (t as f64 * 0.21).sin();
        let label = spikes.iter().any(|&s| t >= s && t < s + 4);
        if spikes.contains(&t) {
            x += 5.0;
        }
        text.push_str(&format!("{t},{x},{}\n", u8::from(label)));
    }
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn eval_anomaly_metrics_match_the_delay_adjusted_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = labeled_stream(dir.path());
    let ckpt = dir.path().join("m.ckpt");
    train_tiny(&data, &ckpt, &[]);
    let out_dir = dir.path().join("eval");
    let v = ok_json(&[
        "eval-anomaly",
        "--ckpt",
        p(&ckpt),
        "--data",
        p(&data),
        "--out-dir",
        p(&out_dir),
        "--set",
        "anomaly.input_len=32",
        "--set",
        "anomaly.trailing_window=40",
        "--set",
        "anomaly.delay=2",
    ]);
    let (h, rows) = read_csv(&out_dir.join("scores.csv"));
    assert_eq!(h, ["t", "score", "flag", "label"]);
    assert_eq!(rows.len(), 300);
    let flags: Vec<bool> = rows.iter().map(|r| r[2] == "1").collect();
    let truth: Vec<bool> = rows.iter().map(|r| r[3] == "1").collect();
    assert!(rows[..31].iter().all(|r| r[1].is_empty()));
    let expected = prf(&delay_adjust(&flags, &truth, 2), &truth);
    let m = &v["metrics"];
    assert_eq!(m["precision"].as_f64().unwrap(), expected.precision);
    assert_eq!(m["recall"].as_f64().unwrap(), expected.recall);
    assert_eq!(m["f1"].as_f64().unwrap(), expected.f1);
    assert_eq!(
        m["n_flags"].as_u64().unwrap() as usize,
        flags.iter().filter(|&&f| f).count()
    );
}

#[test]
fn eval_anomaly_without_labels_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy(dir.path());
    let ckpt = dir.path().join("m.ckpt");
    train_tiny(&data, &ckpt, &[]);
    assert_eq!(code(&["eval-anomaly", "--ckpt", p(&ckpt), "--data", p(&data)]), 2);
}

#[test]
fn analyze_emits_scalars_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy(dir.path());
    let ckpt = dir.path().join("m.ckpt");
    train_tiny(&data, &ckpt, &[]);
    let out_dir = dir.path().join("an");
    let v = ok_json(&[
        "analyze",
        "--ckpt",
        p(&ckpt),
        "--data",
        p(&data),
        "--segment",
        "90",
        "--bins",
        "8",
        "--out-dir",
        p(&out_dir),
    ]);
    assert_eq!(v["metrics"]["samples"], 10);
    let (h, rows) = read_csv(&out_dir.join("pair_distances.csv"));
    assert_eq!(h, ["bin_center", "count"]);
    assert_eq!(rows.len(), 8);
    let total: f64 = column(&rows, 1).iter().sum();
    assert_eq!(total, 10.0);
}

#[test]
fn eval_forecast_and_encode() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy(dir.path());
    let ckpt = dir.path().join("m.ckpt");
    train_tiny(&data, &ckpt, &[]);
    let out_dir = dir.path().join("fc");
    let v = ok_json(&[
        "eval-forecast",
        "--ckpt",
        p(&ckpt),
        "--data",
        p(&data),
        "--horizon",
        "4",
        "--horizon",
        "12",
        "--set",
        "forecast.input_len=48",
        "--out-dir",
        p(&out_dir),
    ]);
    assert_eq!(v["metrics"]["horizons"].as_array().unwrap().len(), 2);
    assert_eq!(read_csv(&out_dir.join("forecast.csv")).1.len(), 2);

    let reps = dir.path().join("z.csv");
    let e = ok_json(&["encode", "--ckpt", p(&ckpt), "--data", p(&data), "--out", p(&reps)]);
    assert_eq!(e["metrics"]["dim"], 8);
    let (h, rows) = read_csv(&reps);
    assert_eq!(h.len(), 9);
    assert_eq!(rows.len(), 900);
}

#[test]
fn checkpoint_mismatches_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy(dir.path());
    let ckpt = dir.path().join("m.ckpt");
    train_tiny(&data, &ckpt, &[]);

    let two = dir.path().join("two.csv");
    let mut text = String::from("t,a,b\n");
    for t in 0..200 {
        text.push_str(&format!("{t},{},{}\n", (t as f64).sin(), (t as f64).cos()));
    }
    std::fs::write(&two, text).unwrap();
    let reps = dir.path().join("z.csv");
    assert_eq!(
        code(&["encode", "--ckpt", p(&ckpt), "--data", p(&two), "--out", p(&reps)]),
        4
    );

    assert_eq!(
        code(&[
            "encode",
            "--ckpt",
            p(&ckpt),
            "--data",
            p(&data),
            "--out",
            p(&reps),
            "--set",
            "encoder.hidden_dim=5"
        ]),
        4
    );

    let mut bytes = std::fs::read(&ckpt).unwrap();
    bytes.truncate(bytes.len() - 3);
    let broken = dir.path().join("broken.ckpt");
    std::fs::write(&broken, bytes).unwrap();
    assert_eq!(
        code(&["encode", "--ckpt", p(&broken), "--data", p(&data), "--out", p(&reps)]),
        4
    );
}

#[test]
fn thread_cap_is_validated() {
    let out = bin()
        .env("COINCEPT_THREADS", "zero")
        .args(["inspect"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().env("COINCEPT_THREADS", "1").args(["inspect"]).output().unwrap();
    assert!(out.status.success());
}

#[test]
fn schema_rejects_incomplete_documents() {
    let doc = serde_json::json!({
        "task": "eval-classify",
        "config_hash": "0".repeat(64),
        "metrics": { "penalty": 1.0 },
        "artifacts": {}
    });
    assert!(!schema().is_valid(&doc));
    let doc = serde_json::json!({
        "task": "inspect",
        "config_hash": "short",
        "metrics": {},
        "artifacts": {}
    });
    assert!(!schema().is_valid(&doc));
}
