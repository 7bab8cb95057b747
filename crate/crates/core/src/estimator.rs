//! Averaged periodogram, thresholding operators, diagonal shrinkage and
//! coherence.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::dft::{FourierGrid, Periodograms, SpectralKind, SpectralMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::series::TimeSeriesMatrix;
use crate::{CMatrix, RMatrix};

/// Default adaptive-lasso exponent.
pub const DEFAULT_ETA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdKind {
    Hard,
    Lasso,
    AdaptiveLasso,
}

/// Entrywise generalized thresholding operator `S_λ` on complex scalars.
///
/// Every kind satisfies, for all `z` and `λ ≥ 0`:
/// `|S_λ(z)| ≤ |z|`, `S_λ(z) = 0` when `|z| ≤ λ`, and `|S_λ(z) − z| ≤ λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdOperator {
    pub kind: ThresholdKind,
    /// Adaptive-lasso exponent η; ignored by the other kinds.
    pub eta: f64,
}

impl ThresholdOperator {
    pub fn hard() -> Self {
        Self {
            kind: ThresholdKind::Hard,
            eta: DEFAULT_ETA,
        }
    }

    pub fn lasso() -> Self {
        Self {
            kind: ThresholdKind::Lasso,
            eta: DEFAULT_ETA,
        }
    }

    pub fn adaptive_lasso(eta: f64) -> Self {
        Self {
            kind: ThresholdKind::AdaptiveLasso,
            eta,
        }
    }

    /// Applies the operator to one complex entry.
    ///
    /// Hard thresholding keeps `z` only when `|z| > λ`, so that the zero set
    /// includes the boundary `|z| = λ`.
    pub fn apply(&self, z: Complex64, lambda: f64) -> Complex64 {
        let modulus = z.norm();
        if modulus <= lambda || modulus == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let factor = match self.kind {
            ThresholdKind::Hard => return z,
            ThresholdKind::Lasso => (modulus - lambda) / modulus,
            ThresholdKind::AdaptiveLasso => {
                // |z| − λ^{η+1}|z|^{−η} = |z|(1 − (λ/|z|)^{η+1})
                1.0 - (lambda / modulus).powf(self.eta + 1.0)
            }
        };
        if factor <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        // Rounding can leave |z·f − z| an ulp above λ; shrink slightly less
        // until the computed result satisfies the bound. f = 1 always does.
        let mut factor = factor.min(1.0);
        loop {
            let out = z * factor;
            if (out - z).norm() <= lambda || factor >= 1.0 {
                return out;
            }
            factor = factor.next_up().min(1.0);
        }
    }
}

/// Estimator family recorded in a [`SpectralEstimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Smoothed,
    Shrinkage,
    Hard,
    Lasso,
    AdaptiveLasso { eta: f64 },
}

impl Method {
    pub fn operator(&self) -> Option<ThresholdOperator> {
        match *self {
            Method::Hard => Some(ThresholdOperator::hard()),
            Method::Lasso => Some(ThresholdOperator::lasso()),
            Method::AdaptiveLasso { eta } => Some(ThresholdOperator::adaptive_lasso(eta)),
            Method::Smoothed | Method::Shrinkage => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Smoothed => "smoothed",
            Method::Shrinkage => "shrinkage",
            Method::Hard => "hard",
            Method::Lasso => "lasso",
            Method::AdaptiveLasso { .. } => "alasso",
        }
    }

    pub fn eta(&self) -> Option<f64> {
        match *self {
            Method::AdaptiveLasso { eta } => Some(eta),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoothed" => Ok(Method::Smoothed),
            "shrinkage" => Ok(Method::Shrinkage),
            "hard" => Ok(Method::Hard),
            "lasso" => Ok(Method::Lasso),
            "alasso" | "adaptive_lasso" => Ok(Method::AdaptiveLasso { eta: DEFAULT_ETA }),
            other => Err(Error::param(format!("unknown method '{other}'"))),
        }
    }
}

/// Estimate at one Fourier frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyEstimate {
    pub matrix: SpectralMatrix,
    pub lambda: Option<f64>,
}

/// Spectral estimate over a set of Fourier frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub method: Method,
    pub per_frequency: BTreeMap<i64, FrequencyEstimate>,
}

impl SpectralEstimate {
    pub fn get(&self, j: i64) -> Option<&SpectralMatrix> {
        self.per_frequency.get(&j).map(|e| &e.matrix)
    }

    pub fn lambda(&self, j: i64) -> Option<f64> {
        self.per_frequency.get(&j).and_then(|e| e.lambda)
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        self.per_frequency.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.per_frequency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_frequency.is_empty()
    }

    /// Count of exactly-zero off-diagonal entries over all frequencies.
    pub fn off_diagonal_zeros(&self) -> usize {
        self.per_frequency
            .values()
            .map(|e| {
                let m = e.matrix.entries();
                let p = m.nrows();
                (0..p)
                    .flat_map(|r| (0..p).map(move |s| (r, s)))
                    .filter(|&(r, s)| r != s && m[(r, s)] == Complex64::new(0.0, 0.0))
                    .count()
            })
            .sum()
    }
}

pub(crate) fn check_span(n: usize, m: usize) -> Result<()> {
    if 2 * m + 1 > n {
        return Err(Error::param(format!(
            "smoothing span 2m+1 = {} exceeds n = {n}",
            2 * m + 1
        )));
    }
    Ok(())
}

/// The smoothing window `{j−m, …, j+m}` (unwrapped).
pub fn window(j: i64, m: usize) -> std::ops::RangeInclusive<i64> {
    let m = m as i64;
    (j - m)..=(j + m)
}

/// `f̂(ω_j; m) = (1/(2π(2m+1))) Σ_{|k|≤m} I(ω_{j+k})` from cached DFTs.
pub fn smoothed(pg: &Periodograms, m: usize, j: i64) -> Result<SpectralMatrix> {
    check_span(pg.n(), m)?;
    pg.grid().check(j)?;
    Ok(SpectralMatrix::new(
        pg.mean_over(window(j, m)),
        pg.grid().frequency(j),
        SpectralKind::Averaged,
    ))
}

/// Averaged periodogram at a single Fourier index, straight from data.
pub fn averaged_periodogram(x: &TimeSeriesMatrix, m: usize, j: i64) -> Result<SpectralMatrix> {
    let grid = FourierGrid::new(x.n())?;
    check_span(x.n(), m)?;
    grid.check(j)?;
    let data = x.analysis_data();
    let mut acc = CMatrix::zeros(x.p(), x.p());
    for k in window(j, m) {
        let d = crate::dft::dft_at(&data, grid.frequency(grid.wrap(k)));
        acc += &d * d.adjoint();
    }
    acc /= Complex64::new(2.0 * PI * (2 * m + 1) as f64, 0.0);
    Ok(SpectralMatrix::new(
        linalg::symmetrize(&acc),
        grid.frequency(j),
        SpectralKind::Averaged,
    ))
}

/// Applies `op` entrywise; the diagonal is left untouched when
/// `preserve_diagonal` is set. The result is Hermitian by construction.
pub fn apply_threshold(
    f_hat: &SpectralMatrix,
    op: ThresholdOperator,
    lambda: f64,
    preserve_diagonal: bool,
) -> Result<SpectralMatrix> {
    if !(lambda >= 0.0) {
        return Err(Error::param(format!("threshold must be non-negative, got {lambda}")));
    }
    Ok(SpectralMatrix::new(
        threshold_entries(f_hat.entries(), op, lambda, preserve_diagonal),
        f_hat.omega(),
        SpectralKind::Thresholded,
    ))
}

pub(crate) fn threshold_entries(
    m: &CMatrix,
    op: ThresholdOperator,
    lambda: f64,
    preserve_diagonal: bool,
) -> CMatrix {
    let p = m.nrows();
    let mut out = m.clone();
    for s in 0..p {
        if !preserve_diagonal {
            out[(s, s)] = op.apply(m[(s, s)], lambda);
        }
        for r in 0..s {
            let v = op.apply(m[(r, s)], lambda);
            out[(r, s)] = v;
            out[(s, r)] = v.conj();
        }
    }
    out
}

/// Thresholded averaged periodogram with per-frequency thresholds.
///
/// `lambdas` may be given for `j` or `−j`; values are mirrored across the
/// pair. Negative frequencies are computed as conjugates of their positive
/// partners, so the estimate is exactly conjugate symmetric.
pub fn threshold_estimate(
    x: &TimeSeriesMatrix,
    m: usize,
    op: ThresholdOperator,
    lambdas: &BTreeMap<i64, f64>,
    frequencies: Option<&[i64]>,
) -> Result<SpectralEstimate> {
    let pg = Periodograms::new(x)?;
    threshold_from(&pg, m, op, lambdas, frequencies, true)
}

pub fn threshold_from(
    pg: &Periodograms,
    m: usize,
    op: ThresholdOperator,
    lambdas: &BTreeMap<i64, f64>,
    frequencies: Option<&[i64]>,
    preserve_diagonal: bool,
) -> Result<SpectralEstimate> {
    check_span(pg.n(), m)?;
    let grid = *pg.grid();
    let requested: Vec<i64> = match frequencies {
        Some(js) => js.to_vec(),
        None => grid.indices().collect(),
    };
    let mut per_frequency = BTreeMap::new();
    let mut cache: BTreeMap<i64, (CMatrix, f64)> = BTreeMap::new();
    for &j in &requested {
        grid.check(j)?;
        let base = if j < 0 { -j } else { j };
        let lambda = lambdas
            .get(&j)
            .or_else(|| lambdas.get(&-j))
            .copied()
            .ok_or(Error::MissingLambda(j))?;
        if !(lambda >= 0.0) {
            return Err(Error::param(format!("threshold for j = {j} must be non-negative")));
        }
        let entries = match cache.get(&base) {
            Some((e, l)) if *l == lambda => e.clone(),
            _ => {
                let raw = pg.mean_over(window(base, m));
                let e = threshold_entries(&raw, op, lambda, preserve_diagonal);
                cache.insert(base, (e.clone(), lambda));
                e
            }
        };
        let entries = if j < 0 { entries.map(|z| z.conj()) } else { entries };
        per_frequency.insert(
            j,
            FrequencyEstimate {
                matrix: SpectralMatrix::new(entries, grid.frequency(j), SpectralKind::Thresholded),
                lambda: Some(lambda),
            },
        );
    }
    let method = match op.kind {
        ThresholdKind::Hard => Method::Hard,
        ThresholdKind::Lasso => Method::Lasso,
        ThresholdKind::AdaptiveLasso => Method::AdaptiveLasso { eta: op.eta },
    };
    Ok(SpectralEstimate {
        n: pg.n(),
        p: pg.p(),
        m,
        method,
        per_frequency,
    })
}

/// Averaged periodogram at every Fourier frequency.
pub fn smoothed_estimate(pg: &Periodograms, m: usize) -> Result<SpectralEstimate> {
    check_span(pg.n(), m)?;
    let grid = *pg.grid();
    let mut per_frequency = BTreeMap::new();
    for j in grid.nonnegative() {
        let f = smoothed(pg, m, j)?;
        if j > 0 && grid.contains(-j) {
            per_frequency.insert(
                -j,
                FrequencyEstimate {
                    matrix: f.conj(),
                    lambda: None,
                },
            );
        }
        per_frequency.insert(j, FrequencyEstimate { matrix: f, lambda: None });
    }
    Ok(SpectralEstimate {
        n: pg.n(),
        p: pg.p(),
        m,
        method: Method::Smoothed,
        per_frequency,
    })
}

/// Plug-in quantities of the diagonal shrinkage estimator at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageWeights {
    pub mu: f64,
    pub alpha2: f64,
    pub beta2: f64,
    pub delta2: f64,
    /// Weight on the target `μ̂I`, in `[0, 1]`.
    pub rho: f64,
}

/// Diagonal shrinkage of the averaged periodogram toward `μ̂I`:
/// `ρ̂ μ̂ I + (1 − ρ̂) f̂` with `μ̂ = tr(f̂)/p`,
/// `β̂² = (1/((2m+1)2m)) Σ_k (1/p)‖I(ω_k)/2π − f̂‖²_F`,
/// `δ̂² = (1/p)‖f̂ − μ̂I‖²_F`, `α̂² = max(δ̂² − β̂², 0)` and
/// `ρ̂ = β̂²/δ̂² = 1 − α̂²/δ̂²` (clamped to `[0, 1]`).
pub fn shrinkage_at(pg: &Periodograms, m: usize, j: i64) -> Result<(SpectralMatrix, ShrinkageWeights)> {
    if m < 1 {
        return Err(Error::param("shrinkage needs a window of at least 2 periodograms (m ≥ 1)"));
    }
    let f_hat = smoothed(pg, m, j)?;
    let p = pg.p();
    let pf = p as f64;
    let fm = f_hat.entries();
    let mu = linalg::trace_re(fm) / pf;
    let mut centred = fm.clone();
    for i in 0..p {
        centred[(i, i)] -= mu;
    }
    let delta2 = linalg::frobenius_sq(&centred) / pf;
    let scale = Complex64::new(1.0 / (2.0 * PI), 0.0);
    let dispersion: f64 = window(j, m)
        .map(|k| linalg::frobenius_sq(&(pg.periodogram(k) * scale - fm)) / pf)
        .sum();
    let w = (2 * m + 1) as f64;
    let beta2 = (dispersion / (w * (w - 1.0))).min(delta2);
    let alpha2 = (delta2 - beta2).max(0.0);
    let rho = if delta2 > 0.0 {
        (beta2 / delta2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut out = fm * Complex64::new(1.0 - rho, 0.0);
    for i in 0..p {
        out[(i, i)] += rho * mu;
    }
    Ok((
        SpectralMatrix::new(out, f_hat.omega(), SpectralKind::Shrunk),
        ShrinkageWeights {
            mu,
            alpha2,
            beta2,
            delta2,
            rho,
        },
    ))
}

pub fn shrinkage_estimate(x: &TimeSeriesMatrix, m: usize, j: i64) -> Result<SpectralMatrix> {
    let pg = Periodograms::new(x)?;
    Ok(shrinkage_at(&pg, m, j)?.0)
}

/// Shrinkage estimate at every Fourier frequency.
pub fn shrinkage_from(pg: &Periodograms, m: usize) -> Result<SpectralEstimate> {
    check_span(pg.n(), m)?;
    let grid = *pg.grid();
    let mut per_frequency = BTreeMap::new();
    for j in grid.nonnegative() {
        let (f, _) = shrinkage_at(pg, m, j)?;
        if j > 0 && grid.contains(-j) {
            per_frequency.insert(
                -j,
                FrequencyEstimate {
                    matrix: f.conj(),
                    lambda: None,
                },
            );
        }
        per_frequency.insert(j, FrequencyEstimate { matrix: f, lambda: None });
    }
    Ok(SpectralEstimate {
        n: pg.n(),
        p: pg.p(),
        m,
        method: Method::Shrinkage,
        per_frequency,
    })
}

/// Coherence `g_rs = f_rs / √(f_rr f_ss)`.
pub fn coherence(f: &SpectralMatrix, tau_floor: f64) -> Result<SpectralMatrix> {
    let m = f.entries();
    let p = m.nrows();
    let diag: Vec<f64> = (0..p).map(|i| m[(i, i)].re).collect();
    for (channel, &value) in diag.iter().enumerate() {
        if !(value > 0.0) || value < tau_floor {
            return Err(Error::DegenerateChannel {
                channel,
                value,
                floor: tau_floor,
            });
        }
    }
    let mut g = CMatrix::zeros(p, p);
    for s in 0..p {
        g[(s, s)] = Complex64::new(1.0, 0.0);
        for r in 0..s {
            let v = m[(r, s)] / (diag[r] * diag[s]).sqrt();
            g[(r, s)] = v;
            g[(s, r)] = v.conj();
        }
    }
    Ok(SpectralMatrix::new(g, f.omega(), SpectralKind::Coherence))
}

/// Coherence at every frequency of an estimate.
pub fn coherence_of(est: &SpectralEstimate, tau_floor: f64) -> Result<BTreeMap<i64, SpectralMatrix>> {
    est.per_frequency
        .iter()
        .map(|(&j, e)| Ok((j, coherence(&e.matrix, tau_floor)?)))
        .collect()
}

/// Hard-thresholds the off-diagonal coherence at level `2λ/τ`.
pub fn coherence_threshold(g_hat: &SpectralMatrix, lambda: f64, tau: f64) -> Result<SpectralMatrix> {
    if !(tau > 0.0) {
        return Err(Error::param(format!("τ must be positive, got {tau}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::param(format!("threshold must be non-negative, got {lambda}")));
    }
    let level = 2.0 * lambda / tau;
    Ok(SpectralMatrix::new(
        threshold_entries(g_hat.entries(), ThresholdOperator::hard(), level, true),
        g_hat.omega(),
        SpectralKind::Coherence,
    ))
}

/// `τ̂ = min_r f̂_rr(ω)`, the plug-in for the unknown minimum diagonal.
pub fn min_diagonal(f: &SpectralMatrix) -> f64 {
    let m = f.entries();
    (0..m.nrows()).map(|i| m[(i, i)].re).fold(f64::INFINITY, f64::min)
}

/// Weighted adjacency `G_rs = mean_j |g_rs(ω_j)|` with zero diagonal.
pub fn aggregate_coherence_graph(est: &SpectralEstimate) -> Result<RMatrix> {
    let p = est.p;
    let mut graph = RMatrix::zeros(p, p);
    if est.is_empty() {
        return Ok(graph);
    }
    for e in est.per_frequency.values() {
        let g = coherence(&e.matrix, 0.0)?;
        for r in 0..p {
            for s in 0..p {
                if r != s {
                    graph[(r, s)] += g.entries()[(r, s)].norm();
                }
            }
        }
    }
    graph /= est.len() as f64;
    // exact symmetry
    for r in 0..p {
        for s in 0..r {
            let v = 0.5 * (graph[(r, s)] + graph[(s, r)]);
            graph[(r, s)] = v;
            graph[(s, r)] = v;
        }
    }
    Ok(graph)
}
