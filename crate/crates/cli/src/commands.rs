//! Subcommand implementations. Each returns the JSON document printed on
//! stdout.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use coincept::checkpoint::Checkpoint;
use coincept::datasets::{read_ucr_pair, synth_classes, synth_toy, write_csv_wide, write_ucr_tsv, StreamDataset};
use coincept::encoder::{dilation_of, param_count, receptive_field_of, EncoderConfig};
use coincept::tasks::analysis::{alignment, pair_distance_histogram, uniformity};
use coincept::tasks::anomaly::anomaly_stream_eval;
use coincept::tasks::classify::{accuracy, rbf_classifier_fit};
use coincept::tasks::forecast::forecast_eval;
use coincept::tasks::FrozenEncoder;
use coincept::trainer::{train, write_loss_trace};
use coincept::wavelet::{d4_filters, perturb};
use coincept::{Error, Result, Series};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{resolve, Resolved, RunConfig};
use crate::data::{self, check_features, Data};
use crate::{Command, ConfigArgs, SynthKind};

#[derive(Debug, Serialize)]
pub struct Output {
    pub task: &'static str,
    pub config_hash: String,
    pub metrics: Value,
    pub artifacts: BTreeMap<&'static str, String>,
}

impl Output {
    fn new(task: &'static str, cfg: &RunConfig, metrics: Value) -> Self {
        Output {
            task,
            config_hash: cfg.hash(),
            metrics,
            artifacts: BTreeMap::new(),
        }
    }

    fn artifact(mut self, name: &'static str, path: &Path) -> Self {
        self.artifacts.insert(name, path.display().to_string());
        self
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn report_config(cfg: &RunConfig) {
    eprintln!("# resolved config\n{}", cfg.to_toml());
}

fn load_config(args: &ConfigArgs) -> Result<Resolved> {
    let r = resolve(args.config.as_deref(), &args.overrides)?;
    r.config.validate()?;
    Ok(r)
}

/// Config for commands that consume a checkpoint: the checkpoint's encoder
/// and training sections win, and an explicitly set encoder key that
/// disagrees is a mismatch.
fn config_for_checkpoint(args: &ConfigArgs, ckpt: &Checkpoint) -> Result<RunConfig> {
    let r = load_config(args)?;
    let mut cfg = r.config.clone();
    let conflicts = r.encoder_conflicts(&ckpt.encoder);
    if !conflicts.is_empty() {
        return Err(Error::ArtifactMismatch(format!(
            "encoder keys {conflicts:?} in the config disagree with the checkpoint"
        )));
    }
    cfg.encoder = ckpt.encoder.clone();
    cfg.train = ckpt.train.clone();
    report_config(&cfg);
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for r in rows {
        text.push_str(&r.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn run(cmd: Command) -> Result<Output> {
    match cmd {
        Command::Synth {
            kind,
            out,
            test_out,
            seed,
            len,
            per_class,
            sigma,
            cfg,
        } => synth_cmd(kind, &out, test_out.as_deref(), seed, len, per_class, sigma, &cfg),
        Command::Perturb {
            input,
            out,
            alpha,
            timestamp,
            cfg,
        } => perturb_cmd(&input, &out, alpha, timestamp.as_deref(), &cfg),
        Command::Train {
            data,
            out,
            trace,
            seed,
            iters,
            timestamp,
            cfg,
        } => train_cmd(&data, &out, trace.as_deref(), seed, iters, timestamp.as_deref(), &cfg),
        Command::Encode {
            ckpt,
            data,
            out,
            timestamp,
            cfg,
        } => encode_cmd(&ckpt, &data, &out, timestamp.as_deref(), &cfg),
        Command::EvalForecast {
            ckpt,
            data,
            horizon,
            out_dir,
            timestamp,
            cfg,
        } => forecast_cmd(&ckpt, &data, &horizon, out_dir, timestamp.as_deref(), &cfg),
        Command::EvalClassify {
            ckpt,
            data,
            test,
            out_dir,
            cfg,
        } => classify_cmd(&ckpt, &data, &test, out_dir, &cfg),
        Command::EvalAnomaly {
            ckpt,
            data,
            out_dir,
            timestamp,
            cfg,
        } => anomaly_cmd(&ckpt, &data, out_dir, timestamp.as_deref(), &cfg),
        Command::Analyze {
            ckpt,
            data,
            segment,
            bins,
            out_dir,
            timestamp,
            cfg,
        } => analyze_cmd(&ckpt, &data, segment, bins, out_dir, timestamp.as_deref(), &cfg),
        Command::Inspect { ckpt, cfg } => inspect_cmd(ckpt.as_deref(), &cfg),
    }
}

#[allow(clippy::too_many_arguments)]
fn synth_cmd(
    kind: SynthKind,
    out: &Path,
    test_out: Option<&Path>,
    seed: u64,
    len: Option<usize>,
    per_class: Option<usize>,
    sigma: Option<f64>,
    args: &ConfigArgs,
) -> Result<Output> {
    let mut cfg = load_config(args)?.config;
    match kind {
        SynthKind::Toy => {
            if per_class.is_some() || sigma.is_some() || test_out.is_some() {
                return Err(Error::InvalidArgument(
                    "--per-class, --sigma and --test-out apply to --kind classes".into(),
                ));
            }
            if let Some(l) = len {
                cfg.toy.len = l;
            }
            report_config(&cfg);
            let toy = synth_toy(&cfg.toy, seed)?;
            let ds = StreamDataset::from_series(toy.series, None);
            write_csv_wide(out, &ds)?;
            let regions: Vec<[usize; 2]> = toy.regions.iter().map(|r| [r.start, r.end]).collect();
            let metrics = json!({ "kind": "toy", "seed": seed, "rows": ds.series.len(), "regions": regions });
            Ok(Output::new("synth", &cfg, metrics).artifact("data", out))
        }
        SynthKind::Classes => {
            if let Some(v) = len {
                cfg.classes.len = v;
            }
            if let Some(v) = per_class {
                cfg.classes.per_class = v;
            }
            if let Some(v) = sigma {
                cfg.classes.sigma = v;
            }
            report_config(&cfg);
            let ds = synth_classes(&cfg.classes, seed)?;
            write_ucr_tsv(out, &ds.train)?;
            let metrics = json!({
                "kind": "classes",
                "seed": seed,
                "rows": ds.train.len(),
                "test_rows": test_out.map(|_| ds.test.len()),
                "classes": ds.n_classes,
                "len": cfg.classes.len,
            });
            let mut o = Output::new("synth", &cfg, metrics).artifact("data", out);
            if let Some(t) = test_out {
                write_ucr_tsv(t, &ds.test)?;
                o = o.artifact("test", t);
            }
            Ok(o)
        }
    }
}

fn perturb_cmd(input: &Path, out: &Path, alpha: Option<f64>, ts: Option<&str>, args: &ConfigArgs) -> Result<Output> {
    let mut cfg = load_config(args)?.config;
    if let Some(a) = alpha {
        cfg.train.alpha_thresh = a;
        cfg.train.validate()?;
    }
    report_config(&cfg);
    let ds = data::load_stream(input, ts)?;
    let perturbed = perturb(&ds.series, &cfg.train.perturb_config(), &d4_filters())?;
    let rms = (ds
        .series
        .data()
        .iter()
        .zip(perturbed.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / ds.series.data().len() as f64)
        .sqrt();
    let out_ds = StreamDataset {
        series: perturbed,
        ..ds
    };
    write_csv_wide(out, &out_ds)?;
    let metrics = json!({
        "rows": out_ds.series.len(),
        "columns": out_ds.series.n_features(),
        "alpha": cfg.train.alpha_thresh,
        "rms_change": rms,
    });
    Ok(Output::new("perturb", &cfg, metrics).artifact("data", out))
}

fn train_cmd(
    data_path: &Path,
    out: &Path,
    trace_path: Option<&Path>,
    seed: Option<u64>,
    iters: Option<usize>,
    ts: Option<&str>,
    args: &ConfigArgs,
) -> Result<Output> {
    let mut cfg = resolve(args.config.as_deref(), &args.overrides)?.config;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    if let Some(i) = iters {
        cfg.train.iters = i;
    }
    let data = data::load(data_path, ts)?;
    let inferred = data.n_features();
    if cfg.encoder.n_features != inferred {
        log::info!("n_features set to {inferred} from {}", data_path.display());
        cfg.encoder.n_features = inferred;
    }
    cfg.validate()?;
    report_config(&cfg);
    let start = Instant::now();
    let result = train(&data.series(), &cfg.encoder, &cfg.train)?;
    let seconds = start.elapsed().as_secs_f64();
    result.checkpoint.save(out)?;
    let tail = result.trace.len().min(50);
    let tail_mean = result.trace[result.trace.len() - tail..].iter().sum::<f64>() / tail as f64;
    let metrics = json!({
        "iterations": result.trace.len(),
        "first_loss": result.trace[0],
        "final_loss": result.checkpoint.final_loss,
        "tail_mean_loss": tail_mean,
        "params": result.checkpoint.params.count(),
        "window_len": result.checkpoint.train.window_len,
        "seconds": seconds,
    });
    let mut o = Output::new("train", &cfg, metrics).artifact("checkpoint", out);
    if let Some(t) = trace_path {
        write_loss_trace(t, &result.trace)?;
        o = o.artifact("trace", t);
    }
    Ok(o)
}

fn normalized(enc: &FrozenEncoder, series: &[Series]) -> Result<Vec<Series>> {
    series.iter().map(|s| enc.normalize(s)).collect()
}

fn fmt_row(v: &[f64]) -> impl Iterator<Item = String> + '_ {
    v.iter().map(|x| x.to_string())
}

fn encode_cmd(ckpt_path: &Path, data_path: &Path, out: &Path, ts: Option<&str>, args: &ConfigArgs) -> Result<Output> {
    let ckpt = Checkpoint::load(ckpt_path)?;
    let cfg = config_for_checkpoint(args, &ckpt)?;
    let data = data::load(data_path, ts)?;
    check_features(ckpt.encoder.n_features, data.n_features(), data_path)?;
    let enc = FrozenEncoder::new(&ckpt);
    let dim = ckpt.encoder.output_dim;
    let z_cols = (0..dim).map(|k| format!("z{k}"));
    let rows = match &data {
        Data::Stream(s) => {
            let z = enc
                .encode_all(&normalized(&enc, std::slice::from_ref(&s.series))?, false)?
                .remove(0);
            let vals: Vec<f64> = z.data().iter().map(|&v| v as f64).collect();
            let header: Vec<String> = std::iter::once(s.timestamp_column.clone()).chain(z_cols).collect();
            let rows = s
                .timestamps
                .iter()
                .zip(vals.chunks(dim))
                .map(|(t, r)| std::iter::once(t.clone()).chain(fmt_row(r)).collect());
            write_csv(out, &header, rows)?;
            s.series.len()
        }
        Data::Labeled(d) => {
            let z = enc.pooled(&normalized(&enc, &d.train.series)?)?;
            let header: Vec<String> = std::iter::once("label".to_string()).chain(z_cols).collect();
            let rows = d
                .train
                .labels
                .iter()
                .zip(&z)
                .map(|(l, r)| std::iter::once(d.class_names[*l].clone()).chain(fmt_row(r)).collect());
            write_csv(out, &header, rows)?;
            z.len()
        }
    };
    let metrics = json!({ "rows": rows, "dim": dim, "pooled": matches!(data, Data::Labeled(_)) });
    Ok(Output::new("encode", &cfg, metrics).artifact("representations", out))
}

fn forecast_cmd(
    ckpt_path: &Path,
    data_path: &Path,
    horizons: &[usize],
    out_dir: Option<PathBuf>,
    ts: Option<&str>,
    args: &ConfigArgs,
) -> Result<Output> {
    let ckpt = Checkpoint::load(ckpt_path)?;
    let cfg = config_for_checkpoint(args, &ckpt)?;
    let ds = data::load_stream(data_path, ts)?;
    check_features(ckpt.encoder.n_features, ds.series.n_features(), data_path)?;
    let horizons = if horizons.is_empty() {
        vec![cfg.forecast.horizon]
    } else {
        horizons.to_vec()
    };
    let mut reports = Vec::new();
    for &h in &horizons {
        let spec = coincept::tasks::forecast::ForecastSpec {
            horizon: h,
            ..cfg.forecast.clone()
        };
        reports.push(forecast_eval(&ckpt, &ds.series, &spec)?);
    }
    let metrics = json!({
        "horizons": reports.iter().map(|r| json!({
            "horizon": r.horizon,
            "mse": r.mse,
            "mae": r.mae,
            "penalty": r.penalty,
            "input_len": r.input_len,
            "n_train": r.n_train,
            "n_valid": r.n_valid,
            "n_test": r.n_test,
        })).collect::<Vec<_>>(),
    });
    let mut o = Output::new("eval-forecast", &cfg, metrics);
    if let Some(dir) = out_dir {
        ensure_dir(&dir)?;
        let path = dir.join("forecast.csv");
        let header = ["horizon", "mse", "mae", "penalty"].map(String::from);
        write_csv(
            &path,
            &header,
            reports.iter().map(|r| {
                vec![
                    r.horizon.to_string(),
                    r.mse.to_string(),
                    r.mae.to_string(),
                    r.penalty.to_string(),
                ]
            }),
        )?;
        o = o.artifact("metrics_csv", &path);
    }
    Ok(o)
}

fn classify_cmd(
    ckpt_path: &Path,
    train_path: &Path,
    test_path: &Path,
    out_dir: Option<PathBuf>,
    args: &ConfigArgs,
) -> Result<Output> {
    let ckpt = Checkpoint::load(ckpt_path)?;
    let cfg = config_for_checkpoint(args, &ckpt)?;
    let ds = read_ucr_pair(train_path, test_path)?;
    let found = ds.train.series.first().map_or(1, Series::n_features);
    check_features(ckpt.encoder.n_features, found, train_path)?;
    let enc = FrozenEncoder::new(&ckpt);
    let z_train = enc.pooled(&normalized(&enc, &ds.train.series)?)?;
    let z_test = enc.pooled(&normalized(&enc, &ds.test.series)?)?;
    let sel = rbf_classifier_fit(&z_train, &ds.train.labels, &cfg.classify)?;
    let pred = sel.classifier.predict(&z_test);
    let acc = accuracy(&pred, &ds.test.labels);
    let metrics = json!({
        "accuracy": acc,
        "penalty": sel.classifier.penalty,
        "gamma": sel.classifier.gamma,
        "folds": sel.folds,
        "n_train": z_train.len(),
        "n_test": z_test.len(),
        "n_classes": ds.n_classes,
    });
    let mut o = Output::new("eval-classify", &cfg, metrics);
    if let Some(dir) = out_dir {
        ensure_dir(&dir)?;
        let path = dir.join("predictions.csv");
        let header = ["index", "label", "predicted"].map(String::from);
        write_csv(
            &path,
            &header,
            pred.iter()
                .zip(&ds.test.labels)
                .enumerate()
                .map(|(i, (p, l))| vec![i.to_string(), ds.class_names[*l].clone(), ds.class_names[*p].clone()]),
        )?;
        o = o.artifact("predictions", &path);
    }
    Ok(o)
}

fn anomaly_cmd(
    ckpt_path: &Path,
    data_path: &Path,
    out_dir: Option<PathBuf>,
    ts: Option<&str>,
    args: &ConfigArgs,
) -> Result<Output> {
    let ckpt = Checkpoint::load(ckpt_path)?;
    let cfg = config_for_checkpoint(args, &ckpt)?;
    let ds = data::load_stream(data_path, ts)?;
    check_features(ckpt.encoder.n_features, ds.series.n_features(), data_path)?;
    let truth = ds.labels.as_ref().ok_or_else(|| {
        Error::Validation(format!(
            "{} has no {} column",
            data_path.display(),
            coincept::datasets::LABEL_COLUMN
        ))
    })?;
    let report = anomaly_stream_eval(&ckpt, &ds.series, truth, &cfg.anomaly)?;
    let metrics = serde_json::to_value(&report).expect("report serializes");
    let mut o = Output::new("eval-anomaly", &cfg, metrics);
    if let Some(dir) = out_dir {
        ensure_dir(&dir)?;
        let path = dir.join("scores.csv");
        let off = cfg.anomaly.diff_order;
        let header = [
            ds.timestamp_column.clone(),
            "score".into(),
            "flag".into(),
            "label".into(),
        ];
        write_csv(
            &path,
            &header,
            report.scores.iter().enumerate().map(|(i, s)| {
                vec![
                    ds.timestamps[i + off].clone(),
                    s.map_or(String::new(), |v| v.to_string()),
                    u8::from(report.flags[i]).to_string(),
                    u8::from(truth[i + off]).to_string(),
                ]
            }),
        )?;
        o = o.artifact("scores", &path);
    }
    Ok(o)
}

#[allow(clippy::too_many_arguments)]
fn analyze_cmd(
    ckpt_path: &Path,
    data_path: &Path,
    segment: Option<usize>,
    bins: usize,
    out_dir: Option<PathBuf>,
    ts: Option<&str>,
    args: &ConfigArgs,
) -> Result<Output> {
    let ckpt = Checkpoint::load(ckpt_path)?;
    let cfg = config_for_checkpoint(args, &ckpt)?;
    let data = data::load(data_path, ts)?;
    check_features(ckpt.encoder.n_features, data.n_features(), data_path)?;
    let enc = FrozenEncoder::new(&ckpt);
    let samples: Vec<Series> = match &data {
        Data::Labeled(d) => d.train.series.clone(),
        Data::Stream(s) => {
            let seg = segment.unwrap_or(ckpt.train.window_len).min(s.series.len());
            if seg == 0 {
                return Err(Error::InvalidArgument("--segment must be >= 1".into()));
            }
            (0..s.series.len() / seg)
                .map(|i| s.series.slice(i * seg, (i + 1) * seg))
                .collect()
        }
    };
    let raw = normalized(&enc, &samples)?;
    let bank = d4_filters();
    let pc = ckpt.train.perturb_config();
    let pert = raw.iter().map(|s| perturb(s, &pc, &bank)).collect::<Result<Vec<_>>>()?;
    let zp = enc.pooled(&raw)?;
    let zq = enc.pooled(&pert)?;
    let hist = pair_distance_histogram(&zp, &zq, bins)?;
    let metrics = json!({
        "samples": zp.len(),
        "alignment": alignment(&zp, &zq)?,
        "uniformity_raw": uniformity(&zp)?,
        "uniformity_perturbed": uniformity(&zq)?,
        "histogram": hist.iter().map(|(c, n)| json!({"center": c, "count": n})).collect::<Vec<_>>(),
    });
    let mut o = Output::new("analyze", &cfg, metrics);
    if let Some(dir) = out_dir {
        ensure_dir(&dir)?;
        let path = dir.join("pair_distances.csv");
        let header = ["bin_center", "count"].map(String::from);
        write_csv(
            &path,
            &header,
            hist.iter().map(|(c, n)| vec![c.to_string(), n.to_string()]),
        )?;
        o = o.artifact("histogram", &path);
    }
    Ok(o)
}

fn saturating_u64(v: u128) -> u64 {
    u64::try_from(v).unwrap_or(u64::MAX)
}

fn inspect_cmd(ckpt_path: Option<&Path>, args: &ConfigArgs) -> Result<Output> {
    let cfg = match ckpt_path {
        Some(p) => config_for_checkpoint(args, &Checkpoint::load(p)?)?,
        None => {
            let c = load_config(args)?.config;
            report_config(&c);
            c
        }
    };
    let enc: &EncoderConfig = &cfg.encoder;
    let mut blocks = Vec::new();
    eprintln!(
        "{:>5} {:>6} {:>9} {:>16}",
        "block", "kernel", "dilation", "receptive_field"
    );
    for i in 1..=enc.n_blocks {
        let units: Vec<Value> = enc
            .base_kernels
            .iter()
            .map(|&k| {
                let d = dilation_of(k, i);
                let rf = receptive_field_of(k, i);
                eprintln!("{i:>5} {k:>6} {d:>9} {rf:>16}");
                json!({ "kernel": k, "dilation": d, "receptive_field": saturating_u64(rf) })
            })
            .collect();
        let max_rf = enc
            .base_kernels
            .iter()
            .map(|&k| receptive_field_of(k, i))
            .max()
            .unwrap_or(1);
        blocks.push(json!({ "block": i, "units": units, "max_receptive_field": saturating_u64(max_rf) }));
    }
    let params = param_count(enc);
    eprintln!("parameters: {params}");
    let metrics = json!({
        "blocks": blocks,
        "max_receptive_field": saturating_u64(enc.max_receptive_field()),
        "params": params,
    });
    Ok(Output::new("inspect", &cfg, metrics))
}
