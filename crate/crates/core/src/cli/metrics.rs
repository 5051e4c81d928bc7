//! Per-seed metrics files and their cross-seed aggregate.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::EvalResult;

pub const METRICS_HEADER: &str = "env_steps,train_loss,eval_metric,eval_std,epsilon,wall_seconds,seed";
pub const AGGREGATE_HEADER: &str = "env_steps,mean,std,n_seeds";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub env_steps: u64,
    /// Mean loss of the updates since the previous row; NaN before the first update.
    pub train_loss: f64,
    pub eval_metric: f64,
    pub eval_std: f64,
    pub epsilon: f64,
    pub wall_seconds: f64,
    pub seed: u64,
}

impl MetricsRow {
    pub fn new(env_steps: u64, train_loss: f64, eval: &EvalResult, epsilon: f64, wall_seconds: f64, seed: u64) -> Self {
        Self {
            env_steps,
            train_loss,
            eval_metric: eval.mean,
            eval_std: eval.std,
            epsilon,
            wall_seconds,
            seed,
        }
    }
}

/// Appends rows to a metrics file, flushing after each so that any prefix
/// of the file stays parseable.
pub struct MetricsWriter {
    inner: csv::Writer<File>,
    last_step: Option<u64>,
}

impl MetricsWriter {
    /// Opens `path` for appending, writing the header if the file is new or empty.
    pub fn append(path: &Path) -> Result<Self> {
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        let last_step = if file.metadata()?.len() == 0 {
            writeln!(file, "{METRICS_HEADER}")?;
            None
        } else {
            read_metrics(path)?.last().map(|r| r.env_steps)
        };
        let inner = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        Ok(Self { inner, last_step })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        if let Some(prev) = self.last_step {
            if row.env_steps <= prev {
                return Err(Error::Consistency(format!(
                    "metrics rows must increase in env_steps ({} after {prev})",
                    row.env_steps
                )));
            }
        }
        self.inner.serialize(row).map_err(csv_io)?;
        self.inner.flush()?;
        self.last_step = Some(row.env_steps);
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn parse_error(path: &Path, e: &csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    let msg = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        _ => e.to_string(),
    };
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    }
}

fn check_header(path: &Path, first: Option<&str>, expected: &str) -> Result<()> {
    match first {
        Some(h) if h.trim_end_matches('\r') == expected => Ok(()),
        Some(h) => Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: format!("unexpected header {h:?}, expected {expected:?}"),
        }),
        None => Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: "empty file".into(),
        }),
    }
}

fn first_line(path: &Path) -> Result<Option<String>> {
    let mut line = String::new();
    let n = BufReader::new(File::open(path)?).read_line(&mut line)?;
    Ok((n > 0).then(|| line.trim_end_matches('\n').to_string()))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path, header: &str) -> Result<Vec<T>> {
    check_header(path, first_line(path)?.as_deref(), header)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_io)?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| parse_error(path, &e)))
        .collect()
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let rows: Vec<MetricsRow> = read_rows(path, METRICS_HEADER)?;
    for (i, w) in rows.windows(2).enumerate() {
        if w[1].env_steps <= w[0].env_steps {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: i as u64 + 3,
                msg: format!("env_steps {} does not increase", w[1].env_steps),
            });
        }
    }
    Ok(rows)
}

/// Drops rows past `env_steps`, as left behind by a run interrupted after
/// its last checkpoint.
pub fn truncate_metrics(path: &Path, env_steps: u64) -> Result<()> {
    let keep: Vec<MetricsRow> = read_metrics(path)?
        .into_iter()
        .filter(|r| r.env_steps <= env_steps)
        .collect();
    std::fs::remove_file(path)?;
    let mut w = MetricsWriter::append(path)?;
    for r in &keep {
        w.write(r)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub env_steps: u64,
    pub mean: f64,
    pub std: f64,
    pub n_seeds: usize,
}

/// Mean and population std of the evaluation metric across seeds, row by
/// row. Rows are matched by position; the step label is the largest
/// multiple of `eval_interval` not above the seeds' smallest step count.
pub fn aggregate(runs: &[Vec<MetricsRow>], eval_interval: u64) -> Vec<AggregateRow> {
    let len = runs.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let values: Vec<f64> = runs.iter().map(|r| r[i].eval_metric).collect();
            let (mean, std) = crate::learner::mean_std(&values);
            let step = runs.iter().map(|r| r[i].env_steps).min().unwrap_or(0);
            AggregateRow {
                env_steps: step - step % eval_interval.max(1),
                mean,
                std,
                n_seeds: values.len(),
            }
        })
        .collect()
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut file = File::create(path)?;
    writeln!(file, "{AGGREGATE_HEADER}")?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    for r in rows {
        w.serialize(r).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    read_rows(path, AGGREGATE_HEADER)
}

/// Reads a file that is either a per-seed metrics file or an aggregate.
pub fn read_curve(path: &Path) -> Result<Vec<AggregateRow>> {
    match first_line(path)?.as_deref().map(|h| h.trim_end_matches('\r')) {
        Some(AGGREGATE_HEADER) => read_aggregate(path),
        _ => Ok(aggregate(&[read_metrics(path)?], 1)),
    }
}
