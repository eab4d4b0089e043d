use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{LabeledDataset, LabeledSplit, StreamDataset, LABEL_COLUMN};
use crate::error::{Error, Result};
use crate::series::Series;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn open(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_value(cell: &str, line: usize) -> Result<f64> {
    let c = cell.trim();
    if c.eq_ignore_ascii_case("nan") || c.is_empty() {
        return Ok(f64::NAN);
    }
    c.parse::<f64>()
        .map_err(|_| parse_err(line, format!("not a number: {c:?}")))
}

struct RawSplit {
    rows: Vec<Vec<f64>>,
    labels: Vec<i64>,
}

fn read_raw_ucr(path: &Path) -> Result<RawSplit> {
    let text = open(path)?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        if cells.len() < 2 {
            return Err(parse_err(lineno, "row has a label but no values"));
        }
        if let Some(w) = width {
            if cells.len() != w {
                return Err(parse_err(
                    lineno,
                    format!("ragged row: {} columns, expected {w}", cells.len()),
                ));
            }
        }
        width = Some(cells.len());
        let raw = cells[0].trim();
        let v: f64 = raw
            .parse()
            .map_err(|_| parse_err(lineno, format!("label is not a number: {raw:?}")))?;
        if !v.is_finite() || v.fract() != 0.0 || v.abs() > 1e15 {
            return Err(parse_err(lineno, format!("label is not integer-like: {raw:?}")));
        }
        labels.push(v as i64);
        let values = cells[1..]
            .iter()
            .map(|c| parse_value(c, lineno).map(|x| if x.is_nan() { 0.0 } else { x }))
            .collect::<Result<Vec<_>>>()?;
        if values.iter().any(|x| !x.is_finite()) {
            return Err(parse_err(lineno, "infinite value"));
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(parse_err(0, format!("{}: no data rows", path.display())));
    }
    Ok(RawSplit { rows, labels })
}

fn assemble(splits: Vec<RawSplit>) -> Result<LabeledDataset> {
    let ids: BTreeSet<i64> = splits.iter().flat_map(|s| s.labels.iter().copied()).collect();
    let index: BTreeMap<i64, usize> = ids.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let mut out: Vec<LabeledSplit> = splits
        .iter()
        .map(|s| LabeledSplit {
            series: s.rows.iter().map(|r| Series::univariate(r.clone())).collect(),
            labels: s.labels.iter().map(|k| index[k]).collect(),
        })
        .collect();
    let test = if out.len() > 1 {
        out.pop().unwrap()
    } else {
        LabeledSplit::default()
    };
    let train = out.pop().unwrap();
    let ds = LabeledDataset {
        train,
        test,
        n_classes: ids.len(),
        class_names: ids.iter().map(i64::to_string).collect(),
    };
    ds.validate()?;
    Ok(ds)
}

/// One UCR-format file (label, then values; tab separated) as the training
/// split. Labels are remapped to `0..C` in ascending numeric order; missing
/// cells become 0.
pub fn read_ucr_tsv(path: &Path) -> Result<LabeledDataset> {
    assemble(vec![read_raw_ucr(path)?])
}

/// Train and test files with one shared label mapping.
pub fn read_ucr_pair(train: &Path, test: &Path) -> Result<LabeledDataset> {
    assemble(vec![read_raw_ucr(train)?, read_raw_ucr(test)?])
}

/// Writes series with integer labels, one row per series.
pub fn write_ucr_tsv(path: &Path, split: &LabeledSplit) -> Result<()> {
    let mut out = String::new();
    for (s, l) in split.series.iter().zip(&split.labels) {
        out.push_str(&l.to_string());
        for v in s.data() {
            out.push('\t');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => parse_err(line, format!("{other:?}")),
    }
}

/// Reads a headed CSV whose columns are all numeric except the timestamp
/// column (first column when `timestamp` is `None`). A column named
/// `is_anomaly` is taken as 0/1 labels. Timestamps must strictly increase,
/// numerically when all parse as numbers, lexicographically otherwise.
pub fn read_csv_wide(path: &Path, timestamp: Option<&str>) -> Result<StreamDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(parse_err(1, "missing header row"));
    }
    let ts_col = match timestamp {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("no timestamp column {name:?}")))?,
        None => 0,
    };
    let label_col = header.iter().position(|h| h == LABEL_COLUMN);
    let value_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != ts_col && Some(c) != label_col)
        .collect();
    if value_cols.is_empty() {
        return Err(parse_err(1, "no value columns"));
    }
    let mut timestamps = Vec::new();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        timestamps.push(rec[ts_col].to_string());
        for &c in &value_cols {
            let v = parse_value(&rec[c], line)?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {:?}: non-finite value", header[c])));
            }
            data.push(v);
        }
        if let Some(c) = label_col {
            labels.push(match rec[c].trim() {
                "0" | "0.0" => false,
                "1" | "1.0" => true,
                other => return Err(parse_err(line, format!("{LABEL_COLUMN} must be 0 or 1, got {other:?}"))),
            });
        }
    }
    if timestamps.is_empty() {
        return Err(parse_err(2, "no data rows"));
    }
    check_monotone(&timestamps)?;
    Ok(StreamDataset {
        timestamps,
        timestamp_column: header[ts_col].clone(),
        columns: value_cols.iter().map(|&c| header[c].clone()).collect(),
        series: Series::new(data, value_cols.len())?,
        labels: label_col.map(|_| labels),
    })
}

fn check_monotone(ts: &[String]) -> Result<()> {
    let numeric: Option<Vec<f64>> = ts.iter().map(|t| t.parse::<f64>().ok()).collect();
    for i in 1..ts.len() {
        let ok = match &numeric {
            Some(n) => n[i] > n[i - 1],
            None => ts[i] > ts[i - 1],
        };
        if !ok {
            return Err(Error::Validation(format!(
                "timestamps not strictly increasing at row {}: {:?} after {:?}",
                i + 1,
                ts[i],
                ts[i - 1]
            )));
        }
    }
    Ok(())
}

/// Inverse of [`read_csv_wide`]; values use the shortest round-trip form.
pub fn write_csv_wide(path: &Path, ds: &StreamDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec![ds.timestamp_column.clone()];
    header.extend(ds.columns.iter().cloned());
    if ds.labels.is_some() {
        header.push(LABEL_COLUMN.to_string());
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for t in 0..ds.series.len() {
        let mut row = vec![ds.timestamps[t].clone()];
        row.extend(ds.series.row(t).iter().map(|v| v.to_string()));
        if let Some(l) = &ds.labels {
            row.push(if l[t] { "1" } else { "0" }.to_string());
        }
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl StreamDataset {
    /// Stream with integer timestamps `0..len` and columns `x0, x1, …`.
    pub fn from_series(series: Series, labels: Option<Vec<bool>>) -> Self {
        StreamDataset {
            timestamps: (0..series.len()).map(|t| t.to_string()).collect(),
            timestamp_column: "timestamp".into(),
            columns: (0..series.n_features()).map(|c| format!("x{c}")).collect(),
            series,
            labels,
        }
    }
}
