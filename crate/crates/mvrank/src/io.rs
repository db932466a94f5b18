//! File formats: CSV for tabular artifacts, JSON for configs and models.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every f64 exactly, so each emitted file can be re-ingested
//! by its reader without loss. Readers report malformed content with the
//! offending path and line number.

use crate::config::ExperimentConfig;
use crate::datagen::Sample;
use crate::error::{Error, Result};
use crate::model::{EpochTrace, MlpScorer};
use crate::mvcurve::MVCurve;
use crate::procedure::RankedTestSet;
use std::fmt::Write as _;
use std::path::Path;

/// Format a float with 17 significant digits (exact f64 round trip).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_float(field: &str, path: &Path, line: usize) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("expected a real number, got '{field}'"),
    })
}

fn parse_count(field: &str, path: &Path, line: usize) -> Result<usize> {
    field.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("expected an integer, got '{field}'"),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Write a CSV file from a header and stringified rows.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

/// Read a CSV file into (header, rows), enforcing a rectangular shape.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "empty file, expected a CSV header".into(),
    })?;
    let header: Vec<String> = header_line.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if row.len() != header.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!(
                    "expected {} fields per the header, got {}",
                    header.len(),
                    row.len()
                ),
            });
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn expect_header(path: &Path, got: &[String], want: &[&str]) -> Result<()> {
    if got.len() != want.len() || got.iter().zip(want).any(|(g, w)| g != w) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header '{}', got '{}'", want.join(","), got.join(",")),
        });
    }
    Ok(())
}

// ---- samples: x0,...,x{d-1}[,label] -------------------------------------

pub fn write_sample(path: &Path, sample: &Sample) -> Result<()> {
    let d = sample.dim();
    let mut out = String::new();
    for c in 0..d {
        if c > 0 {
            out.push(',');
        }
        let _ = write!(out, "x{c}");
    }
    if sample.labels().is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for (i, p) in sample.points().enumerate() {
        for (c, v) in p.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&fmt_float(*v));
        }
        if let Some(labels) = sample.labels() {
            let _ = write!(out, ",{}", labels[i]);
        }
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_sample(path: &Path) -> Result<Sample> {
    let (header, rows) = read_csv(path)?;
    let labeled = header.last().map(|h| h == "label").unwrap_or(false);
    let d = if labeled { header.len() - 1 } else { header.len() };
    if d == 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "sample file has no coordinate columns".into(),
        });
    }
    for (c, name) in header[..d].iter().enumerate() {
        if name != &format!("x{c}") {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected coordinate column 'x{c}', got '{name}'"),
            });
        }
    }
    let mut coords = Vec::with_capacity(rows.len() * d);
    let mut labels = if labeled { Some(Vec::with_capacity(rows.len())) } else { None };
    for (i, row) in rows.iter().enumerate() {
        let line = i + 2; // header is line 1
        for field in &row[..d] {
            coords.push(parse_float(field, path, line)?);
        }
        if let Some(ref mut ls) = labels {
            let raw = parse_count(&row[d], path, line)?;
            if raw > 1 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("labels must be 0 or 1, got {raw}"),
                });
            }
            ls.push(raw as u8);
        }
    }
    Sample::from_flat(coords, d, labels)
}

// ---- epoch traces: epoch,lambda,bce,w_proxy,acc75 ------------------------

pub const TRACES_HEADER: [&str; 5] = ["epoch", "lambda", "bce", "w_proxy", "acc75"];

/// One parsed row of a traces file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub lambda: f64,
    pub bce: f64,
    pub w_proxy: f64,
    pub acc_75: Option<f64>,
}

pub fn write_traces(path: &Path, runs: &[(f64, &[EpochTrace])]) -> Result<()> {
    let rows: Vec<Vec<String>> = runs
        .iter()
        .flat_map(|(lambda, traces)| {
            traces.iter().map(move |t| {
                vec![
                    t.epoch.to_string(),
                    fmt_float(*lambda),
                    fmt_float(t.bce),
                    fmt_float(t.w_proxy),
                    t.acc_75.map(fmt_float).unwrap_or_default(),
                ]
            })
        })
        .collect();
    write_csv(path, &TRACES_HEADER, &rows)
}

pub fn read_traces(path: &Path) -> Result<Vec<TraceRow>> {
    let (header, rows) = read_csv(path)?;
    expect_header(path, &header, &TRACES_HEADER)?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let line = i + 2;
            Ok(TraceRow {
                epoch: parse_count(&row[0], path, line)?,
                lambda: parse_float(&row[1], path, line)?,
                bce: parse_float(&row[2], path, line)?,
                w_proxy: parse_float(&row[3], path, line)?,
                acc_75: if row[4].is_empty() {
                    None
                } else {
                    Some(parse_float(&row[4], path, line)?)
                },
            })
        })
        .collect()
}

// ---- accuracy table: n_lowest,acc ----------------------------------------

pub const ACCURACY_HEADER: [&str; 2] = ["n_lowest", "acc"];

pub fn write_accuracy(path: &Path, rows: &[(usize, f64)]) -> Result<()> {
    let out: Vec<Vec<String>> = rows
        .iter()
        .map(|(k, acc)| vec![k.to_string(), fmt_float(*acc)])
        .collect();
    write_csv(path, &ACCURACY_HEADER, &out)
}

pub fn read_accuracy(path: &Path) -> Result<Vec<(usize, f64)>> {
    let (header, rows) = read_csv(path)?;
    expect_header(path, &header, &ACCURACY_HEADER)?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let line = i + 2;
            Ok((parse_count(&row[0], path, line)?, parse_float(&row[1], path, line)?))
        })
        .collect()
}

// ---- ranked test set: rank,test_index,score,is_flagged,true_label --------

pub const RANKED_HEADER: [&str; 5] = ["rank", "test_index", "score", "is_flagged", "true_label"];

/// One parsed row of a ranked test-set file.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedRow {
    pub rank: usize,
    pub test_index: usize,
    pub score: f64,
    pub is_flagged: bool,
    pub true_label: Option<u8>,
}

pub fn write_ranked(path: &Path, ranked: &RankedTestSet, labels: Option<&[u8]>) -> Result<()> {
    let rows: Vec<Vec<String>> = ranked
        .indices()
        .iter()
        .zip(ranked.scores())
        .enumerate()
        .map(|(rank, (&idx, &score))| {
            vec![
                (rank + 1).to_string(),
                idx.to_string(),
                fmt_float(score),
                (rank < ranked.n_lowest()).to_string(),
                labels.map(|l| l[idx].to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(path, &RANKED_HEADER, &rows)
}

pub fn read_ranked(path: &Path) -> Result<Vec<RankedRow>> {
    let (header, rows) = read_csv(path)?;
    expect_header(path, &header, &RANKED_HEADER)?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let line = i + 2;
            let flagged = match row[3].as_str() {
                "true" => true,
                "false" => false,
                other => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line,
                        message: format!("expected true/false, got '{other}'"),
                    })
                }
            };
            Ok(RankedRow {
                rank: parse_count(&row[0], path, line)?,
                test_index: parse_count(&row[1], path, line)?,
                score: parse_float(&row[2], path, line)?,
                is_flagged: flagged,
                true_label: if row[4].is_empty() {
                    None
                } else {
                    Some(parse_count(&row[4], path, line)? as u8)
                },
            })
        })
        .collect()
}

// ---- MV curves: alpha,volume ----------------------------------------------

pub const CURVE_HEADER: [&str; 2] = ["alpha", "volume"];

/// Write the exact breakpoints of a curve.
pub fn write_curve_breakpoints(path: &Path, curve: &MVCurve) -> Result<()> {
    let rows: Vec<Vec<String>> = curve
        .breakpoints()
        .iter()
        .map(|&(a, v)| vec![fmt_float(a), fmt_float(v)])
        .collect();
    write_csv(path, &CURVE_HEADER, &rows)
}

/// Write a dense evaluation of a curve on `grid_size` midpoints of (0,1).
pub fn write_curve_grid(path: &Path, curve: &MVCurve, grid_size: usize) -> Result<()> {
    let rows = (0..grid_size)
        .map(|i| {
            let alpha = (i as f64 + 0.5) / grid_size as f64;
            curve.eval(alpha).map(|v| vec![fmt_float(alpha), fmt_float(v)])
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv(path, &CURVE_HEADER, &rows)
}

/// Read back (alpha, volume) pairs.
pub fn read_curve(path: &Path) -> Result<Vec<(f64, f64)>> {
    let (header, rows) = read_csv(path)?;
    expect_header(path, &header, &CURVE_HEADER)?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let line = i + 2;
            Ok((parse_float(&row[0], path, line)?, parse_float(&row[1], path, line)?))
        })
        .collect()
}

// ---- accuracy summary: n_lowest,mean_acc,std_acc,repetitions --------------

pub const SUMMARY_HEADER: [&str; 4] = ["n_lowest", "mean_acc", "std_acc", "repetitions"];

/// One aggregated accuracy cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n_lowest: usize,
    /// Absent when no completed repetition produced this cell.
    pub mean_acc: Option<f64>,
    /// Sample standard deviation; absent for fewer than 2 repetitions.
    pub std_acc: Option<f64>,
    pub repetitions: usize,
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let out: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n_lowest.to_string(),
                r.mean_acc.map(fmt_float).unwrap_or_default(),
                r.std_acc.map(fmt_float).unwrap_or_default(),
                r.repetitions.to_string(),
            ]
        })
        .collect();
    write_csv(path, &SUMMARY_HEADER, &out)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let (header, rows) = read_csv(path)?;
    expect_header(path, &header, &SUMMARY_HEADER)?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let line = i + 2;
            let opt = |field: &str| -> Result<Option<f64>> {
                if field.is_empty() {
                    Ok(None)
                } else {
                    parse_float(field, path, line).map(Some)
                }
            };
            Ok(SummaryRow {
                n_lowest: parse_count(&row[0], path, line)?,
                mean_acc: opt(&row[1])?,
                std_acc: opt(&row[2])?,
                repetitions: parse_count(&row[3], path, line)?,
            })
        })
        .collect()
}

// ---- model JSON ------------------------------------------------------------

#[derive(serde::Deserialize)]
struct ModelFile {
    d: usize,
    hidden: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

pub fn write_model(path: &Path, model: &MlpScorer) -> Result<()> {
    let mut json = serde_json::to_string_pretty(model).expect("model serializes");
    json.push('\n');
    write_text(path, &json)
}

pub fn read_model(path: &Path) -> Result<MlpScorer> {
    let text = read_text(path)?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: format!("invalid model file: {e}"),
    })?;
    MlpScorer::from_parts(file.d, file.hidden, file.w1, file.b1, file.w2, file.b2)
}

// ---- config JSON -----------------------------------------------------------

pub fn write_config(path: &Path, cfg: &ExperimentConfig) -> Result<()> {
    write_text(path, &cfg.to_json())
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_json(&read_text(path)?)
}
