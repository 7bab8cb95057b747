//! File formats: CSV series, JSON models and estimates, CSV/JSON reports.
//!
//! Every writer is deterministic. JSON floats use the shortest
//! representation that parses back to the same `f64`; series CSV values are
//! written with 17 significant digits.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft::{SpectralKind, SpectralMatrix};
use crate::error::{Error, Result};
use crate::estimator::{FrequencyEstimate, Method, SpectralEstimate, DEFAULT_ETA};
use crate::linalg;
use crate::metrics::{ReplicateSummary, Roc};
use crate::model::{NoiseFamily, VarmaModel};
use crate::series::TimeSeriesMatrix;
use crate::{CMatrix, RMatrix};

pub const SCHEMA_VERSION: &str = "1";

fn parse_error(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        location: location.into(),
        message: message.into(),
    }
}

fn check_version(found: &str) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            expected: SCHEMA_VERSION.into(),
            found: found.into(),
        });
    }
    Ok(())
}

/// Reads a series CSV: mandatory header of channel names, one numeric row
/// per time point. Lines starting with `#` are ignored.
pub fn read_series_from<R: Read>(reader: R, source: &str) -> Result<TimeSeriesMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_error(source, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(parse_error(source, "missing header row"));
    }
    let p = names.len();
    let mut values = Vec::new();
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(format!("{source}: line {line}"), e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != p {
            return Err(parse_error(
                format!("{source}: line {line}"),
                format!("expected {p} fields, found {}", record.len()),
            ));
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_error(
                    format!("{source}: line {line}, row {rows}, column {c} ({})", names[c]),
                    format!("not a number: '{cell}'"),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_error(
                    format!("{source}: line {line}, row {rows}, column {c} ({})", names[c]),
                    format!("non-finite value '{cell}'"),
                ));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows < 2 {
        return Err(parse_error(source, format!("need at least 2 rows, found {rows}")));
    }
    TimeSeriesMatrix::with_names(RMatrix::from_row_slice(rows, p, &values), names)
}

pub fn read_series(path: &Path) -> Result<TimeSeriesMatrix> {
    let file = fs::File::open(path)?;
    read_series_from(file, &path.display().to_string())
}

pub fn write_series_to<W: Write>(x: &TimeSeriesMatrix, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(x.names())?;
    let data = x.data();
    let mut row = Vec::with_capacity(x.p());
    for r in 0..x.n() {
        row.clear();
        row.extend((0..x.p()).map(|c| format!("{:.16e}", data[(r, c)])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series(x: &TimeSeriesMatrix, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_series_to(x, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// JSON form of a [`VarmaModel`]. Either `preset` + `p`, or explicit
/// coefficient lists (`ar`, `ma` as lists of row-major `p × p` matrices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    pub p: usize,
    #[serde(default)]
    pub ar: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub ma: Vec<Vec<Vec<f64>>>,
    /// Noise covariance; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub noise: NoiseSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    BlockVma,
    BlockVar,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseSpec {
    #[default]
    Gaussian,
    StudentT {
        df: f64,
    },
    Laplace,
}

impl From<NoiseSpec> for NoiseFamily {
    fn from(n: NoiseSpec) -> Self {
        match n {
            NoiseSpec::Gaussian => NoiseFamily::Gaussian,
            NoiseSpec::StudentT { df } => NoiseFamily::StudentT { df },
            NoiseSpec::Laplace => NoiseFamily::Laplace,
        }
    }
}

impl From<NoiseFamily> for NoiseSpec {
    fn from(n: NoiseFamily) -> Self {
        match n {
            NoiseFamily::Gaussian => NoiseSpec::Gaussian,
            NoiseFamily::StudentT { df } => NoiseSpec::StudentT { df },
            NoiseFamily::Laplace => NoiseSpec::Laplace,
        }
    }
}

fn rows_of(m: &RMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn matrix_of(rows: &[Vec<f64>], p: usize, what: &str) -> Result<RMatrix> {
    if rows.len() != p || rows.iter().any(|r| r.len() != p) {
        return Err(parse_error(what, format!("expected a {p}×{p} matrix")));
    }
    Ok(RMatrix::from_fn(p, p, |r, c| rows[r][c]))
}

impl ModelFile {
    pub fn from_model(model: &VarmaModel) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            preset: None,
            p: model.dim(),
            ar: model.ar_coeffs().iter().map(rows_of).collect(),
            ma: model.ma_coeffs().iter().map(rows_of).collect(),
            cov: Some(rows_of(model.noise_cov())),
            noise: model.noise_family().into(),
        }
    }

    pub fn to_model(&self) -> Result<VarmaModel> {
        check_version(&self.schema_version)?;
        let model = match self.preset {
            Some(Preset::BlockVma) => VarmaModel::block_vma(self.p)?,
            Some(Preset::BlockVar) => VarmaModel::block_var(self.p)?,
            None => {
                let ar = self
                    .ar
                    .iter()
                    .enumerate()
                    .map(|(i, a)| matrix_of(a, self.p, &format!("ar[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                let ma = self
                    .ma
                    .iter()
                    .enumerate()
                    .map(|(i, b)| matrix_of(b, self.p, &format!("ma[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                let cov = match &self.cov {
                    Some(c) => matrix_of(c, self.p, "cov")?,
                    None => RMatrix::identity(self.p, self.p),
                };
                return VarmaModel::new(self.p, ar, ma, cov, self.noise.into());
            }
        };
        model.with_noise(self.noise.into())
    }
}

pub fn read_model(path: &Path) -> Result<VarmaModel> {
    let text = fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    file.to_model()
}

pub fn write_model(model: &VarmaModel, path: &Path) -> Result<()> {
    write_json(&ModelFile::from_model(model), path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EstimateFile {
    schema_version: String,
    method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    n: usize,
    p: usize,
    m: usize,
    frequencies: Vec<FrequencyRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FrequencyRecord {
    j: i64,
    omega: f64,
    kind: SpectralKind,
    lambda: Option<f64>,
    /// Diagnostic only; recomputed rather than read back.
    min_eigenvalue: f64,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

fn estimate_file(est: &SpectralEstimate) -> EstimateFile {
    EstimateFile {
        schema_version: SCHEMA_VERSION.into(),
        method: est.method.name().into(),
        eta: est.method.eta(),
        n: est.n,
        p: est.p,
        m: est.m,
        frequencies: est
            .per_frequency
            .iter()
            .map(|(&j, e)| {
                let m = e.matrix.entries();
                let part = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
                    (0..m.nrows()).map(|r| m.row(r).iter().map(f).collect()).collect()
                };
                FrequencyRecord {
                    j,
                    omega: e.matrix.omega(),
                    kind: e.matrix.kind(),
                    lambda: e.lambda,
                    min_eigenvalue: linalg::hermitian_min_eigenvalue(m),
                    re: part(|z| z.re),
                    im: part(|z| z.im),
                }
            })
            .collect(),
    }
}

pub fn estimate_to_string(est: &SpectralEstimate) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&estimate_file(est))?;
    s.push('\n');
    Ok(s)
}

pub fn estimate_from_str(text: &str) -> Result<SpectralEstimate> {
    #[derive(Deserialize)]
    struct Version {
        schema_version: String,
    }
    let v: Version = serde_json::from_str(text)?;
    check_version(&v.schema_version)?;
    let file: EstimateFile = serde_json::from_str(text)?;
    let mut method: Method = file.method.parse()?;
    if let Method::AdaptiveLasso { eta } = &mut method {
        *eta = file.eta.unwrap_or(DEFAULT_ETA);
    }
    let p = file.p;
    let mut per_frequency = BTreeMap::new();
    for rec in file.frequencies {
        let where_ = format!("frequency {}", rec.j);
        if rec.re.len() != p || rec.im.len() != p || rec.re.iter().chain(&rec.im).any(|r| r.len() != p) {
            return Err(parse_error(where_, format!("expected {p}×{p} real and imaginary parts")));
        }
        let entries = CMatrix::from_fn(p, p, |r, c| Complex64::new(rec.re[r][c], rec.im[r][c]));
        let prev = per_frequency.insert(
            rec.j,
            FrequencyEstimate {
                matrix: SpectralMatrix::new(entries, rec.omega, rec.kind),
                lambda: rec.lambda,
            },
        );
        if prev.is_some() {
            return Err(parse_error(where_, "duplicate frequency"));
        }
    }
    Ok(SpectralEstimate {
        n: file.n,
        p,
        m: file.m,
        method,
        per_frequency,
    })
}

pub fn write_estimate(est: &SpectralEstimate, path: &Path) -> Result<()> {
    fs::write(path, estimate_to_string(est)?)?;
    Ok(())
}

pub fn read_estimate(path: &Path) -> Result<SpectralEstimate> {
    estimate_from_str(&fs::read_to_string(path)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Summary table rows `(method, p, n, m, metric, mean, sd)`; `sd` is empty
/// when fewer than two replicates were run.
pub fn summary_csv(rows: &[ReplicateSummary]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["method", "p", "n", "m", "metric", "mean", "sd"])?;
    for row in rows {
        for (metric, stat) in &row.metrics {
            w.write_record([
                row.method.clone(),
                row.p.to_string(),
                row.n.to_string(),
                row.m.to_string(),
                metric.clone(),
                stat.mean.to_string(),
                stat.sd.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// ROC points as `fpr,tpr` CSV.
pub fn roc_csv(roc: &Roc) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["fpr", "tpr"])?;
    for (f, t) in &roc.points {
        w.write_record([f.to_string(), t.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Weighted adjacency matrix with a header of channel names.
pub fn graph_csv(graph: &RMatrix, names: &[String]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(names)?;
    for r in 0..graph.nrows() {
        w.write_record(graph.row(r).iter().map(|v| v.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
