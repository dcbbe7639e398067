//! Text formats for sample sets, matrices, run records and summaries.
//!
//! A sample-set file starts with `p=<int>,n=<int>,K=<int>`, followed by
//! `K` blocks of `p` comma-separated rows and an optional final line
//! `labels=<comma list>`. Numbers are written in shortest round-trip form.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{SpdMat, SymMat};
use crate::model::SampleSet;

use super::{RunRecord, Summary};

/// Contents of a sample-set file.
#[derive(Clone, Debug)]
pub struct SampleFile {
    pub samples: SampleSet,
    pub n: usize,
    pub labels: Option<Vec<usize>>,
}

fn write_rows(out: &mut String, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
}

fn parse_row(line: &str, p: usize, lineno: usize) -> Result<Vec<f64>> {
    let vals = line
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
    if vals.len() != p {
        return Err(Error::Parse(format!(
            "line {lineno}: expected {p} values, found {}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn header_field(part: &str, key: &str) -> Result<usize> {
    let (k, v) = part
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("malformed header field '{part}'")))?;
    if k.trim() != key {
        return Err(Error::Parse(format!("expected header key '{key}', found '{}'", k.trim())));
    }
    v.trim()
        .parse()
        .map_err(|e| Error::Parse(format!("header field {key}: {e}")))
}

pub fn format_sample_set(data: &SampleSet, n: usize, labels: Option<&[usize]>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "p={},n={},K={}", data.dim(), n, data.len());
    for s in data.iter() {
        write_rows(&mut out, s.as_matrix());
    }
    if let Some(labels) = labels {
        let l: Vec<String> = labels.iter().map(|y| y.to_string()).collect();
        let _ = writeln!(out, "labels={}", l.join(","));
    }
    out
}

pub fn parse_sample_set(text: &str) -> Result<SampleFile> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty sample file".into()))?;
    let parts: Vec<&str> = header.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("malformed header '{header}'")));
    }
    let p = header_field(parts[0], "p")?;
    let n = header_field(parts[1], "n")?;
    let k = header_field(parts[2], "K")?;
    if p == 0 || k == 0 {
        return Err(Error::Parse("p and K must be positive".into()));
    }
    let mut samples = Vec::with_capacity(k);
    for _ in 0..k {
        let mut data = Vec::with_capacity(p * p);
        for _ in 0..p {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::Parse("sample file ends early".into()))?;
            data.extend(parse_row(line, p, no)?);
        }
        let sym = SymMat::from_matrix(DMatrix::from_row_slice(p, p, &data))?;
        samples.push(SpdMat::new(sym)?);
    }
    let labels = match lines.next() {
        None => None,
        Some((no, line)) => {
            let rest = line
                .strip_prefix("labels=")
                .ok_or_else(|| Error::Parse(format!("line {no}: unexpected content")))?;
            let labels = rest
                .split(',')
                .map(|v| v.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("line {no}: {e}")))?;
            if labels.len() != k {
                return Err(Error::Parse(format!("{} labels for {k} samples", labels.len())));
            }
            Some(labels)
        }
    };
    if let Some((no, _)) = lines.next() {
        return Err(Error::Parse(format!("line {no}: trailing content")));
    }
    Ok(SampleFile {
        samples: SampleSet::new(samples)?,
        n,
        labels,
    })
}

pub fn write_sample_set(path: &Path, data: &SampleSet, n: usize, labels: Option<&[usize]>) -> Result<()> {
    std::fs::write(path, format_sample_set(data, n, labels)).map_err(|e| Error::io_at(path, e))?;
    Ok(())
}

pub fn read_sample_set(path: &Path) -> Result<SampleFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
    parse_sample_set(&text)
}

/// `p=<int>` followed by `p` rows.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("p={}\n", m.nrows());
    write_rows(&mut out, m);
    out
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let p = header_field(header, "p")?;
    let mut data = Vec::with_capacity(p * p);
    for _ in 0..p {
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::Parse("matrix file ends early".into()))?;
        data.extend(parse_row(line, p, no)?);
    }
    Ok(DMatrix::from_row_slice(p, p, &data))
}

pub fn write_records_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record([
        "repetition", "estimator", "n", "K", "error", "iterations", "seconds", "converged", "failure",
    ])
    .map_err(csv_error)?;
    for r in records {
        w.write_record([
            r.repetition.to_string(),
            r.estimator.clone(),
            r.n.to_string(),
            r.k.to_string(),
            format!("{:e}", r.error),
            r.iterations.to_string(),
            format!("{:e}", r.seconds),
            r.converged.to_string(),
            r.failure.clone().unwrap_or_default(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Trace of one run: `iteration,cost,error,time`.
pub fn write_trace_csv(path: &Path, record: &RunRecord) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io_at(path, e))?;
    let mut f = std::io::BufWriter::new(file);
    writeln!(f, "iteration,cost,error,time")?;
    for t in &record.trace {
        writeln!(f, "{},{:e},{:e},{:e}", t.iteration, t.cost, t.error, t.time)?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_summary_json(path: &Path, summary: &Summary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io_at(path, e))?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}
