//! Replicated simulation benchmark over (model, p, n, method) cells.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dft::{Periodograms, SpectralMatrix};
use crate::error::{Error, Result};
use crate::estimator::{Method, DEFAULT_ETA};
use crate::io;
use crate::metrics::{self, EvaluationOptions, EvaluationReport, ReplicateSummary};
use crate::model::VarmaModel;
use crate::tuning::{self, derive_seed, LambdaGrid, SpanRule, TuningConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    /// Block-diagonal VMA(1) with 3×3 blocks.
    Vma,
    /// Block-diagonal VAR(1) with 3×3 blocks.
    Var,
}

impl ModelFamily {
    pub fn model(&self, p: usize) -> Result<VarmaModel> {
        match self {
            ModelFamily::Vma => VarmaModel::block_vma(p),
            ModelFamily::Var => VarmaModel::block_var(p),
        }
    }

    pub fn span_rule(&self) -> SpanRule {
        match self {
            ModelFamily::Vma => SpanRule::MaLike,
            ModelFamily::Var => SpanRule::ArLike,
        }
    }
}

fn default_methods() -> Vec<String> {
    ["smoothed", "shrinkage", "hard", "lasso", "alasso"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_replicates() -> usize {
    20
}

fn default_grid_size() -> usize {
    tuning::DEFAULT_GRID_POINTS
}

fn default_splits() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_zero_tol() -> f64 {
    metrics::DEFAULT_ZERO_TOL
}

/// Benchmark description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub family: ModelFamily,
    pub p: Vec<usize>,
    pub n: Vec<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Span rule; defaults to the family's rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span_rule: Option<SpanRule>,
    /// Fixed half-span overriding the span rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_splits")]
    pub n_splits: usize,
    #[serde(default = "default_true")]
    pub roc: bool,
    #[serde(default)]
    pub include_diagonal: bool,
    #[serde(default = "default_zero_tol")]
    pub zero_tol: f64,
}

impl BenchmarkSpec {
    /// Desk-scale default grid.
    pub fn desk_default(family: ModelFamily) -> Self {
        Self {
            family,
            p: vec![12, 24],
            n: vec![100, 200, 400],
            methods: default_methods(),
            replicates: default_replicates(),
            seed: 0,
            span_rule: None,
            m: None,
            grid_size: default_grid_size(),
            n_splits: default_splits(),
            roc: true,
            include_diagonal: false,
            zero_tol: default_zero_tol(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn span(&self, n: usize) -> usize {
        self.m
            .unwrap_or_else(|| tuning::default_span(n, self.span_rule.unwrap_or(self.family.span_rule())))
    }

    pub fn parsed_methods(&self) -> Result<Vec<Method>> {
        self.methods.iter().map(|m| m.parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::param("replicates must be at least 1"));
        }
        if self.p.is_empty() || self.n.is_empty() || self.methods.is_empty() {
            return Err(Error::param("p, n and methods lists must be nonempty"));
        }
        if self.grid_size < 1 || self.n_splits < 1 {
            return Err(Error::param("grid_size and n_splits must be at least 1"));
        }
        self.parsed_methods()?;
        for &p in &self.p {
            if p == 0 || p % 3 != 0 {
                return Err(Error::param(format!("block models need p a positive multiple of 3, got {p}")));
            }
        }
        for &n in &self.n {
            let m = self.span(n);
            if n < 3 || 2 * m + 1 > n {
                return Err(Error::param(format!("span m = {m} does not fit n = {n}")));
            }
        }
        Ok(())
    }

    /// `(p, n)` cells in a fixed order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.p
            .iter()
            .flat_map(|&p| self.n.iter().map(move |&n| (p, n)))
            .collect()
    }
}

/// Outcome of one `(p, n)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub p: usize,
    pub n: usize,
    pub m: usize,
    /// One summary per method, in spec order.
    pub summaries: Vec<ReplicateSummary>,
    /// ROC curve of the first replicate per method.
    pub roc: Vec<(String, metrics::Roc)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub cells: Vec<CellResult>,
    pub failures: Vec<String>,
}

impl BenchResult {
    pub fn summaries(&self) -> impl Iterator<Item = &ReplicateSummary> {
        self.cells.iter().flat_map(|c| c.summaries.iter())
    }

    /// Mean of `metric` for a method in a cell.
    pub fn mean(&self, method: &str, p: usize, n: usize, metric: &str) -> Option<f64> {
        self.summaries()
            .find(|s| s.method == method && s.p == p && s.n == n)
            .and_then(|s| s.metrics.iter().find(|(k, _)| k == metric))
            .map(|(_, v)| v.mean)
    }
}

/// One replicate: simulate, estimate with every method, score.
fn replicate(
    spec: &BenchmarkSpec,
    model: &VarmaModel,
    truth: &BTreeMap<i64, SpectralMatrix>,
    methods: &[Method],
    n: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<EvaluationReport>> {
    let x = model.simulate_stationary(n, seed)?;
    let pg = Periodograms::new(&x)?;
    let opts = EvaluationOptions {
        zero_tol: spec.zero_tol,
        include_diagonal: spec.include_diagonal,
        roc: spec.roc,
    };
    let cfg = TuningConfig {
        m,
        n_splits: spec.n_splits,
        lambda_grid: LambdaGrid::Adaptive {
            points: spec.grid_size,
        },
        seed: derive_seed(seed, &[0x7475_6e65]),
        deflate: false,
    };
    methods
        .iter()
        .map(|&method| {
            let (est, _) = tuning::estimate_method(&pg, method, None, &cfg)?;
            metrics::evaluate(&est, truth, opts)
        })
        .collect()
}

fn run_cell(spec: &BenchmarkSpec, methods: &[Method], index: usize, p: usize, n: usize) -> Result<CellResult> {
    let model = spec.family.model(p)?;
    let m = spec.span(n);
    let truth = metrics::truth_spectra(&model, n)?;
    let reps: Vec<Vec<EvaluationReport>> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(spec.seed, &[index as u64, r as u64]);
            replicate(spec, &model, &truth, methods, n, m, seed)
        })
        .collect::<Result<_>>()?;
    let mut summaries = Vec::with_capacity(methods.len());
    let mut roc = Vec::new();
    for (k, method) in methods.iter().enumerate() {
        let reports: Vec<EvaluationReport> = reps.iter().map(|r| r[k].clone()).collect();
        summaries.push(metrics::replicate_summary(&reports)?);
        if let Some(curve) = &reports[0].roc {
            roc.push((method.name().to_string(), curve.clone()));
        }
    }
    Ok(CellResult {
        p,
        n,
        m,
        summaries,
        roc,
    })
}

/// Runs every cell. A failing cell is logged and skipped; the others
/// proceed. `jobs` bounds the worker threads (all cores when `None`).
pub fn run(spec: &BenchmarkSpec, jobs: Option<usize>) -> Result<BenchResult> {
    spec.validate()?;
    let methods = spec.parsed_methods()?;
    let methods: Vec<Method> = methods
        .into_iter()
        .map(|m| match m {
            Method::AdaptiveLasso { .. } => Method::AdaptiveLasso { eta: DEFAULT_ETA },
            other => other,
        })
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Result<CellResult>> = pool.install(|| {
        spec.cells()
            .into_par_iter()
            .enumerate()
            .map(|(i, (p, n))| run_cell(spec, &methods, i, p, n))
            .collect()
    });
    let mut result = BenchResult {
        cells: Vec::new(),
        failures: Vec::new(),
    };
    for ((p, n), outcome) in spec.cells().into_iter().zip(outcomes) {
        match outcome {
            Ok(cell) => result.cells.push(cell),
            Err(e) => {
                log::error!("cell p={p} n={n} aborted: {e}");
                result.failures.push(format!("p={p} n={n}: {e}"));
            }
        }
    }
    Ok(result)
}

/// Writes `rmise.csv`, `support.csv`, `summary.json` and one
/// `roc_<method>_p<p>_n<n>.csv` per cell and method into `out_dir`.
pub fn write_outputs(result: &BenchResult, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let only = |names: &[&str]| -> Vec<ReplicateSummary> {
        result
            .summaries()
            .map(|s| ReplicateSummary {
                metrics: s
                    .metrics
                    .iter()
                    .filter(|(k, _)| names.contains(&k.as_str()))
                    .cloned()
                    .collect(),
                ..s.clone()
            })
            .collect()
    };
    fs::write(out_dir.join("rmise.csv"), io::summary_csv(&only(&["rmise"]))?)?;
    fs::write(
        out_dir.join("support.csv"),
        io::summary_csv(&only(&["precision", "recall", "f1", "auc"]))?,
    )?;
    for cell in &result.cells {
        for (method, roc) in &cell.roc {
            let name = format!("roc_{method}_p{}_n{}.csv", cell.p, cell.n);
            fs::write(out_dir.join(name), io::roc_csv(roc)?)?;
        }
    }
    io::write_json(result, &out_dir.join("summary.json"))?;
    Ok(())
}
