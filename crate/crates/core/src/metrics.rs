//! Scoring spectral estimates against a known truth.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft::{FourierGrid, SpectralMatrix};
use crate::error::{Error, Result};
use crate::estimator::{self, SpectralEstimate};
use crate::linalg;
use crate::model::VarmaModel;
use crate::RMatrix;

/// Relative truth-support tolerance, as a fraction of the largest truth modulus.
pub const DEFAULT_ZERO_TOL: f64 = 1e-12;

/// True spectral density at every Fourier frequency of `n` samples.
pub fn truth_spectra(model: &VarmaModel, n: usize) -> Result<BTreeMap<i64, SpectralMatrix>> {
    let grid = FourierGrid::new(n)?;
    grid.indices()
        .map(|j| Ok((j, model.spectral_density(grid.frequency(j))?)))
        .collect()
}

fn check_frequencies(est: &SpectralEstimate, truth: &BTreeMap<i64, SpectralMatrix>) -> Result<()> {
    if est.len() != truth.len() || est.indices().zip(truth.keys()).any(|(a, &b)| a != b) {
        return Err(Error::FrequencyMismatch);
    }
    Ok(())
}

/// `100 · Σ_j ‖f̂(ω_j) − f(ω_j)‖²_F / Σ_j ‖f(ω_j)‖²_F`.
pub fn rmise(est: &SpectralEstimate, truth: &BTreeMap<i64, SpectralMatrix>) -> Result<f64> {
    check_frequencies(est, truth)?;
    let mut err = 0.0;
    let mut total = 0.0;
    for (j, f) in truth {
        let e = est.get(*j).ok_or(Error::FrequencyMismatch)?;
        if e.dim() != f.dim() {
            return Err(Error::param("estimate and truth dimensions differ"));
        }
        err += linalg::frobenius_sq(&(e.entries() - f.entries()));
        total += linalg::frobenius_sq(f.entries());
    }
    if total <= 0.0 {
        return Err(Error::Numerical("true spectrum is identically zero".into()));
    }
    Ok(100.0 * err / total)
}

/// Absolute truth tolerance from a relative one.
pub fn absolute_zero_tol(truth: &BTreeMap<i64, SpectralMatrix>, relative: f64) -> f64 {
    relative
        * truth
            .values()
            .map(|f| linalg::max_modulus(f.entries()))
            .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl SupportScore {
    /// Scores from counts. No predicted positives gives precision 1; an
    /// empty truth gives recall 1.
    pub fn from_counts(true_pos: usize, predicted: usize, actual: usize) -> Self {
        let precision = if predicted == 0 {
            1.0
        } else {
            true_pos as f64 / predicted as f64
        };
        let recall = if actual == 0 {
            1.0
        } else if predicted == 0 {
            0.0
        } else {
            true_pos as f64 / actual as f64
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportScores {
    pub per_frequency: BTreeMap<i64, SupportScore>,
    /// Arithmetic means over frequencies.
    pub mean: SupportScore,
}

/// Support recovery. Truth entries with modulus `≤ zero_tol` count as zero;
/// estimate entries count as zero only when exactly zero.
pub fn support_scores(
    est: &SpectralEstimate,
    truth: &BTreeMap<i64, SpectralMatrix>,
    zero_tol: f64,
    include_diagonal: bool,
) -> Result<SupportScores> {
    check_frequencies(est, truth)?;
    if !(zero_tol >= 0.0) {
        return Err(Error::param("zero tolerance must be non-negative"));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut per_frequency = BTreeMap::new();
    for (&j, f) in truth {
        let e = est.get(j).ok_or(Error::FrequencyMismatch)?.entries();
        let t = f.entries();
        let p = t.nrows();
        let (mut tp, mut predicted, mut actual) = (0, 0, 0);
        for r in 0..p {
            for s in 0..p {
                if r == s && !include_diagonal {
                    continue;
                }
                let hit = e[(r, s)] != zero;
                let real = t[(r, s)].norm() > zero_tol;
                predicted += hit as usize;
                actual += real as usize;
                tp += (hit && real) as usize;
            }
        }
        per_frequency.insert(j, SupportScore::from_counts(tp, predicted, actual));
    }
    let k = per_frequency.len().max(1) as f64;
    let sum = per_frequency.values().fold((0.0, 0.0, 0.0), |acc, s| {
        (acc.0 + s.precision, acc.1 + s.recall, acc.2 + s.f1)
    });
    Ok(SupportScores {
        per_frequency,
        mean: SupportScore {
            precision: sum.0 / k,
            recall: sum.1 / k,
            f1: sum.2 / k,
        },
    })
}

/// Edges present in the truth at any frequency, diagonal excluded.
pub fn truth_support(truth: &BTreeMap<i64, SpectralMatrix>, zero_tol: f64) -> DMatrix<bool> {
    let p = truth.values().next().map(|f| f.dim()).unwrap_or(0);
    let mut support = DMatrix::from_element(p, p, false);
    for f in truth.values() {
        for r in 0..p {
            for s in 0..p {
                if r != s && f.entries()[(r, s)].norm() > zero_tol {
                    support[(r, s)] = true;
                }
            }
        }
    }
    support
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    /// `(false-positive rate, true-positive rate)`, from `(0,0)` to `(1,1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC curve of a weighted graph against a truth support over the strict
/// upper triangle, sweeping the threshold over the unique weights from the
/// largest down.
pub fn roc_points(graph: &RMatrix, truth_support: &DMatrix<bool>) -> Result<Roc> {
    let p = graph.nrows();
    if graph.ncols() != p || truth_support.nrows() != p || truth_support.ncols() != p {
        return Err(Error::param("graph and truth support must be square of equal size"));
    }
    let mut edges: Vec<(f64, bool)> = Vec::with_capacity(p * p.saturating_sub(1) / 2);
    for s in 0..p {
        for r in 0..s {
            let w = graph[(r, s)];
            if !w.is_finite() {
                return Err(Error::param("graph weights must be finite"));
            }
            edges.push((w, truth_support[(r, s)]));
        }
    }
    edges.sort_by(|a, b| b.0.total_cmp(&a.0));
    let positives = edges.iter().filter(|e| e.1).count();
    let negatives = edges.len() - positives;
    let rate = |k: usize, total: usize| if total == 0 { 0.0 } else { k as f64 / total as f64 };

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < edges.len() {
        let w = edges[i].0;
        while i < edges.len() && edges[i].0 == w {
            if edges[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((rate(fp, negatives), rate(tp, positives)));
    }
    if points.last() != Some(&(1.0, 1.0)) {
        points.push((1.0, 1.0));
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    Ok(Roc { points, auc })
}

/// Sample mean and standard deviation (divisor `k − 1`) of replicate values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateStat {
    pub mean: f64,
    pub sd: Option<f64>,
}

pub fn summarize(values: &[f64]) -> ReplicateStat {
    let k = values.len();
    if k == 0 {
        return ReplicateStat {
            mean: f64::NAN,
            sd: None,
        };
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    let sd = (k >= 2).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (k - 1) as f64).sqrt()
    });
    ReplicateStat { mean, sd }
}

/// Scores of one estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub p: usize,
    pub n: usize,
    pub m: usize,
    pub rmise: f64,
    pub support: SupportScores,
    pub roc: Option<Roc>,
}

impl EvaluationReport {
    /// Scalar metrics by name, in a fixed order.
    pub fn scalars(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("rmise", self.rmise),
            ("precision", 100.0 * self.support.mean.precision),
            ("recall", 100.0 * self.support.mean.recall),
            ("f1", 100.0 * self.support.mean.f1),
        ];
        if let Some(roc) = &self.roc {
            out.push(("auc", roc.auc));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationOptions {
    /// Relative truth-support tolerance.
    pub zero_tol: f64,
    pub include_diagonal: bool,
    pub roc: bool,
}

impl Default for EvaluationOptions {
    fn default() -> Self {
        Self {
            zero_tol: DEFAULT_ZERO_TOL,
            include_diagonal: false,
            roc: false,
        }
    }
}

pub fn evaluate(
    est: &SpectralEstimate,
    truth: &BTreeMap<i64, SpectralMatrix>,
    opts: EvaluationOptions,
) -> Result<EvaluationReport> {
    let tol = absolute_zero_tol(truth, opts.zero_tol);
    let roc = if opts.roc {
        let graph = estimator::aggregate_coherence_graph(est)?;
        Some(roc_points(&graph, &truth_support(truth, tol))?)
    } else {
        None
    };
    Ok(EvaluationReport {
        method: est.method.name().to_string(),
        p: est.p,
        n: est.n,
        m: est.m,
        rmise: rmise(est, truth)?,
        support: support_scores(est, truth, tol, opts.include_diagonal)?,
        roc,
    })
}

/// Mean and sd of every scalar metric over replicates of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub method: String,
    pub p: usize,
    pub n: usize,
    pub m: usize,
    pub replicates: usize,
    pub metrics: Vec<(String, ReplicateStat)>,
    pub notice: Option<String>,
}

pub fn replicate_summary(reports: &[EvaluationReport]) -> Result<ReplicateSummary> {
    let first = reports
        .first()
        .ok_or_else(|| Error::param("no replicates to summarize"))?;
    let names: Vec<&str> = first.scalars().iter().map(|(k, _)| *k).collect();
    let mut metrics = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let values: Vec<f64> = reports
            .iter()
            .map(|r| r.scalars().get(i).map(|v| v.1).unwrap_or(f64::NAN))
            .collect();
        metrics.push((name.to_string(), summarize(&values)));
    }
    let notice = (reports.len() < 2)
        .then(|| "fewer than 2 replicates: standard deviations omitted".to_string());
    if let Some(n) = &notice {
        log::info!("{n}");
    }
    Ok(ReplicateSummary {
        method: first.method.clone(),
        p: first.p,
        n: first.n,
        m: first.m,
        replicates: reports.len(),
        metrics,
        notice,
    })
}
