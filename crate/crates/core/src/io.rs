//! CSV ingestion and the file formats written by the command-line tool.
//!
//! Floats in CSV output are written with 17 significant digits so that files
//! round-trip exactly and are byte-stable across runs.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::ProbTable;
use crate::error::{Error, Result};
use crate::filter::FilteredPath;
use crate::intensity::IntensityPath;
use crate::observation::CountSeries;

/// Column names tried, in order, when no column is selected and the file has
/// more than one column.
const COUNT_COLUMN_NAMES: [&str; 4] = ["y", "count", "counts", "value"];
const TIME_COLUMN_NAMES: [&str; 5] = ["t", "time", "date", "timestamp", "period"];

/// Formats like C's `%.17g`: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros removed.
pub fn fmt_g17(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..17).contains(&exp) {
        trim_zeros(format!("{:.*}", (16 - exp) as usize, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!(
            "{}e{sign}{:02}",
            trim_zeros(mantissa.to_string()),
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Picks the count column: an explicit name or zero-based index, the only
/// column, or the first column with a conventional count name.
fn select_column(
    header: Option<&csv::StringRecord>,
    width: usize,
    column: Option<&str>,
) -> Result<usize> {
    if let Some(sel) = column {
        if let Some(h) = header {
            if let Some(i) = h.iter().position(|name| name.trim() == sel) {
                return Ok(i);
            }
        }
        return match sel.parse::<usize>() {
            Ok(i) if i < width => Ok(i),
            Ok(i) => Err(Error::InvalidInput(format!(
                "column index {i} out of range (file has {width} columns)"
            ))),
            Err(_) => Err(Error::InvalidInput(format!("no column named {sel:?}"))),
        };
    }
    if width == 1 {
        return Ok(0);
    }
    header
        .and_then(|h| {
            COUNT_COLUMN_NAMES.iter().find_map(|want| {
                h.iter()
                    .position(|name| name.trim().eq_ignore_ascii_case(want))
            })
        })
        .ok_or_else(|| {
            Error::InvalidInput(format!(
                "file has {width} columns; select the count column with --column"
            ))
        })
}

fn parse_count(field: &str, line: usize) -> Result<u64> {
    let s = field.trim();
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    // Accept integral floats such as "3.0" written by other tools.
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) => Ok(v as u64),
        _ => Err(Error::InvalidInput(format!(
            "line {line}: {s:?} is not a non-negative integer count"
        ))),
    }
}

/// Reads counts from CSV text. A first row whose selected field is not a
/// count is taken as a header.
pub fn read_counts_from<R: Read>(reader: R, column: Option<&str>) -> Result<CountSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let first = match records.next() {
        Some(r) => r?,
        None => return Err(Error::InvalidInput("empty input".into())),
    };
    let width = first.len();
    let looks_like_header = {
        let idx = select_column(None, width, column)
            .unwrap_or_else(|_| column.and_then(|c| c.parse().ok()).unwrap_or(0));
        first
            .get(idx)
            .map(|f| f.trim().parse::<f64>().is_err())
            .unwrap_or(true)
    };
    let header = looks_like_header.then_some(&first);
    let col = select_column(header, width, column)?;
    let time_col = header.and_then(|h| {
        h.iter().enumerate().find_map(|(i, name)| {
            (i != col
                && TIME_COLUMN_NAMES
                    .iter()
                    .any(|t| name.trim().eq_ignore_ascii_case(t)))
            .then_some(i)
        })
    });

    let mut counts = Vec::new();
    let mut stamps = Vec::new();
    let mut push = |rec: &csv::StringRecord, line: usize| -> Result<()> {
        let field = rec
            .get(col)
            .ok_or_else(|| Error::InvalidInput(format!("line {line}: missing column {col}")))?;
        counts.push(parse_count(field, line)?);
        if let Some(tc) = time_col {
            stamps.push(rec.get(tc).unwrap_or_default().to_string());
        }
        Ok(())
    };
    if header.is_none() {
        push(&first, 1)?;
    }
    for (i, rec) in records.enumerate() {
        push(&rec?, i + 2)?;
    }
    if counts.is_empty() {
        return Err(Error::InvalidInput("no counts found".into()));
    }
    let mut series = CountSeries::new(counts);
    if time_col.is_some() {
        series.timestamps = Some(stamps);
    }
    Ok(series)
}

pub fn read_counts(path: &Path, column: Option<&str>) -> Result<CountSeries> {
    read_counts_from(File::open(path)?, column)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn time_label(series: &CountSeries, t: usize) -> String {
    match &series.timestamps {
        Some(ts) => ts[t].clone(),
        None => (t + 1).to_string(),
    }
}

/// Counts as `t,y`, with the latent intensity as a third column when given.
pub fn write_counts<W: Write>(
    out: W,
    series: &CountSeries,
    intensity: Option<&IntensityPath>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match intensity {
        Some(path) => {
            w.write_record(["t", "y", "lambda"])?;
            for (t, (&y, &lam)) in series.counts.iter().zip(path.values()).enumerate() {
                w.write_record([time_label(series, t), y.to_string(), fmt_g17(lam)])?;
            }
        }
        None => {
            w.write_record(["t", "y"])?;
            for (t, &y) in series.counts.iter().enumerate() {
                w.write_record([time_label(series, t), y.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_filtered<W: Write>(out: W, series: &CountSeries, path: &FilteredPath) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "y", "lambda_filtered", "error_var", "innovation"])?;
    for (t, ((&y, state), step)) in series
        .counts
        .iter()
        .zip(&path.states)
        .zip(&path.steps)
        .enumerate()
    {
        w.write_record([
            time_label(series, t),
            y.to_string(),
            fmt_g17(state.lambda_filtered),
            fmt_g17(state.error_var),
            fmt_g17(step.innovation),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_residuals<W: Write>(out: W, series: &CountSeries, residuals: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "y", "residual"])?;
    for (t, (&y, &r)) in series.counts.iter().zip(residuals).enumerate() {
        w.write_record([time_label(series, t), y.to_string(), fmt_g17(r)])?;
    }
    w.flush()?;
    Ok(())
}

/// `lag,acf,pacf` for one named series; lags start at 1.
pub fn write_acf_pacf<W: Write>(out: W, rows: &[(&str, &[f64], &[f64])]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series", "lag", "acf", "pacf"])?;
    for (name, acf, pacf) in rows {
        for (k, (a, p)) in acf.iter().zip(pacf.iter()).enumerate() {
            w.write_record([
                name.to_string(),
                (k + 1).to_string(),
                fmt_g17(*a),
                fmt_g17(*p),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_prob_table<W: Write>(out: W, table: &ProbTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "fitted", "empirical", "fitted_mc_se"])?;
    for (i, &k) in table.support.iter().enumerate() {
        let se = table
            .fitted_mc_se
            .as_ref()
            .map(|s| fmt_g17(s[i]))
            .unwrap_or_default();
        w.write_record([
            k.to_string(),
            fmt_g17(table.fitted[i]),
            fmt_g17(table.empirical[i]),
            se,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the long-format plotting file.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub series: String,
    pub x: f64,
    pub value: f64,
}

impl PlotPoint {
    pub fn new(series: &str, x: f64, value: f64) -> Self {
        Self {
            series: series.into(),
            x,
            value,
        }
    }
}

pub fn write_plot_long<W: Write>(out: W, points: &[PlotPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series", "x", "value"])?;
    for p in points {
        w.write_record([p.series.clone(), fmt_g17(p.x), fmt_g17(p.value)])?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    write_json(&mut w, value)?;
    w.flush()?;
    Ok(())
}

/// Opens `path` for writing through a buffered writer.
pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    create(path)
}

/// Hex SHA-256 of the compact JSON encoding of `value`.
pub fn config_hash<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Sidecar written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub command: String,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub version: String,
}

impl Metadata {
    pub fn new<T: Serialize + ?Sized>(
        command: &str,
        seed: Option<u64>,
        config: &T,
    ) -> Result<Self> {
        Ok(Self {
            command: command.into(),
            seed,
            config_sha256: config_hash(config)?,
            version: env!("CARGO_PKG_VERSION").into(),
        })
    }
}
