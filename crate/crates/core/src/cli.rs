//! The `specthresh` command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{self, BenchmarkSpec};
use crate::dft::Periodograms;
use crate::error::{Error, Result};
use crate::estimator::{self, Method};
use crate::io;
use crate::metrics::{self, EvaluationOptions};
use crate::tuning::{self, LambdaGrid, SpanRule, TuningConfig};

#[derive(Debug, Parser)]
#[command(name = "specthresh", version, about = "Sparse spectral density estimation for multivariate time series")]
pub struct Cli {
    /// Random seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "SPECTHRESH_JOBS")]
    pub jobs: Option<usize>,
    /// Output file (output directory for `bench`); stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a series from a model file.
    Simulate(SimulateArgs),
    /// Estimate the spectral density matrix of a series.
    Estimate(EstimateArgs),
    /// Score estimates against a model's true spectrum.
    Evaluate(EvaluateArgs),
    /// Run a replicated simulation benchmark.
    Bench(BenchArgs),
    /// Aggregate coherence graph of an estimate.
    Coherence(CoherenceArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model JSON file.
    #[arg(long)]
    pub model: PathBuf,
    /// Number of observations.
    #[arg(short, long)]
    pub n: usize,
    /// Discarded warm-up rows; by default the model's own.
    #[arg(long, conflicts_with = "stationary")]
    pub burn_in: Option<usize>,
    /// Start from an exact stationary draw instead of a burn-in.
    #[arg(long)]
    pub stationary: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Series CSV file.
    #[arg(long)]
    pub series: PathBuf,
    /// smoothed, shrinkage, hard, lasso or alasso.
    #[arg(long, default_value = "lasso")]
    pub method: String,
    /// Adaptive-lasso exponent.
    #[arg(long, default_value_t = estimator::DEFAULT_ETA)]
    pub eta: f64,
    /// Smoothing half-span.
    #[arg(short, long, conflicts_with = "span_rule")]
    pub m: Option<usize>,
    /// ma_like (m = √n) or ar_like (m = ⅔√n).
    #[arg(long, default_value = "ma_like")]
    pub span_rule: String,
    /// Fixed threshold at every frequency instead of tuning.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Number of random window splits per frequency.
    #[arg(long, default_value_t = 1)]
    pub splits: usize,
    /// Candidates in the per-frequency threshold grid.
    #[arg(long, default_value_t = tuning::DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    /// Scale tuned thresholds by √(|J₁|/(2m+1)).
    #[arg(long)]
    pub deflate: bool,
    /// Treat the series as mean zero instead of centering it.
    #[arg(long)]
    pub assume_centered: bool,
    /// Write the per-frequency tuning risks as JSON.
    #[arg(long)]
    pub tuning_report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Estimate JSON files.
    #[arg(long, required = true, num_args = 1..)]
    pub estimate: Vec<PathBuf>,
    /// Model JSON file giving the truth.
    #[arg(long)]
    pub model: PathBuf,
    /// Truth entries below this fraction of the largest modulus count as zero.
    #[arg(long, default_value_t = metrics::DEFAULT_ZERO_TOL)]
    pub zero_tol: f64,
    /// Count diagonal entries in precision and recall.
    #[arg(long)]
    pub include_diagonal: bool,
    /// Also write full reports (including ROC points) as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Benchmark spec JSON file.
    #[arg(long)]
    pub spec: PathBuf,
}

#[derive(Debug, Args)]
pub struct CoherenceArgs {
    /// Estimate JSON file.
    #[arg(long)]
    pub estimate: PathBuf,
    /// Threshold coherences at 2λ/τ before aggregating.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Lower bound on the diagonal; the smallest estimated diagonal when omitted.
    #[arg(long, requires = "lambda")]
    pub tau: Option<f64>,
    /// Comma-separated channel names for the header.
    #[arg(long, value_delimiter = ',')]
    pub names: Option<Vec<String>>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let model = io::read_model(&args.model)?;
    let x = if args.stationary {
        model.simulate_stationary(args.n, cli.seed)?
    } else {
        let burn = args.burn_in.unwrap_or_else(|| model.default_burn_in());
        model.simulate(args.n, burn, cli.seed)?
    };
    let mut buf = Vec::new();
    io::write_series_to(&x, &mut buf)?;
    emit(cli.out.as_deref(), std::str::from_utf8(&buf).expect("csv output is utf-8"))
}

fn estimate(cli: &Cli, args: &EstimateArgs) -> Result<()> {
    let mut x = io::read_series(&args.series)?;
    if args.assume_centered {
        x = x.assume_centered();
    }
    let mut method: Method = args.method.parse()?;
    if let Method::AdaptiveLasso { eta } = &mut method {
        if !(args.eta > 0.0) {
            return Err(Error::param("η must be positive"));
        }
        *eta = args.eta;
    }
    let m = match args.m {
        Some(m) => m,
        None => tuning::default_span(x.n(), args.span_rule.parse::<SpanRule>()?),
    };
    estimator::check_span(x.n(), m)?;
    let cfg = TuningConfig {
        m,
        n_splits: args.splits,
        lambda_grid: LambdaGrid::Adaptive {
            points: args.grid_points,
        },
        seed: cli.seed,
        deflate: args.deflate,
    };
    let pg = Periodograms::new(&x)?;
    let (est, reports) = tuning::estimate_method(&pg, method, args.lambda, &cfg)?;
    if let Some(path) = &args.tuning_report {
        io::write_json(&reports, path)?;
    }
    emit(cli.out.as_deref(), &io::estimate_to_string(&est)?)
}

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let model = io::read_model(&args.model)?;
    let opts = EvaluationOptions {
        zero_tol: args.zero_tol,
        include_diagonal: args.include_diagonal,
        roc: true,
    };
    let mut reports = Vec::new();
    for path in &args.estimate {
        let est = io::read_estimate(path)?;
        if est.p != model.dim() {
            return Err(Error::param(format!(
                "{}: estimate has p = {}, model has p = {}",
                path.display(),
                est.p,
                model.dim()
            )));
        }
        let truth = metrics::truth_spectra(&model, est.n)?;
        reports.push(metrics::evaluate(&est, &truth, opts)?);
    }
    if let Some(path) = &args.json {
        io::write_json(&reports, path)?;
    }
    let rows = reports
        .iter()
        .map(|r| metrics::replicate_summary(std::slice::from_ref(r)))
        .collect::<Result<Vec<_>>>()?;
    emit(cli.out.as_deref(), &io::summary_csv(&rows)?)
}

fn run_bench(cli: &Cli, args: &BenchArgs) -> Result<()> {
    let mut spec = BenchmarkSpec::from_json(&fs::read_to_string(&args.spec)?)?;
    if cli.seed != 0 {
        spec.seed = cli.seed;
    }
    let out = cli
        .out
        .as_deref()
        .ok_or_else(|| Error::param("bench needs --out <directory>"))?;
    let result = bench::run(&spec, cli.jobs)?;
    bench::write_outputs(&result, out)?;
    if !result.failures.is_empty() {
        return Err(Error::Numerical(format!("{} benchmark cell(s) failed", result.failures.len())));
    }
    Ok(())
}

fn coherence(cli: &Cli, args: &CoherenceArgs) -> Result<()> {
    let mut est = io::read_estimate(&args.estimate)?;
    if let Some(lambda) = args.lambda {
        let tau = match args.tau {
            Some(t) => t,
            None => est
                .per_frequency
                .values()
                .map(|e| estimator::min_diagonal(&e.matrix))
                .fold(f64::INFINITY, f64::min),
        };
        for e in est.per_frequency.values_mut() {
            let g = estimator::coherence(&e.matrix, 0.0)?;
            // Scaling back by the diagonal keeps the aggregate a coherence graph.
            let kept = estimator::coherence_threshold(&g, lambda, tau)?;
            let m = e.matrix.entries().clone();
            let p = m.nrows();
            let mut out = m.clone();
            for r in 0..p {
                for s in 0..p {
                    if r != s && kept.entries()[(r, s)].norm() == 0.0 {
                        out[(r, s)] = num_complex::Complex64::new(0.0, 0.0);
                    }
                }
            }
            e.matrix = crate::SpectralMatrix::new(out, e.matrix.omega(), e.matrix.kind());
        }
    }
    let graph = estimator::aggregate_coherence_graph(&est)?;
    let names = match &args.names {
        Some(n) if n.len() == est.p => n.clone(),
        Some(_) => return Err(Error::param("number of names does not match p")),
        None => (1..=est.p).map(|i| format!("x{i}")).collect(),
    };
    emit(cli.out.as_deref(), &io::graph_csv(&graph, &names)?)
}

pub fn execute(cli: &Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Estimate(a) => estimate(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Bench(a) => run_bench(cli, a),
        Command::Coherence(a) => coherence(cli, a),
    })
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
