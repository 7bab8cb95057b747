//! Threshold selection by frequency-domain sample splitting, the theoretical
//! threshold formula and smoothing-span heuristics.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dft::{FourierGrid, Periodograms};
use crate::error::{Error, Result};
use crate::estimator::{self, threshold_entries, SpectralEstimate, ThresholdOperator};
use crate::linalg;
use crate::model::VarmaModel;
use crate::series::TimeSeriesMatrix;

/// Number of candidates in the default per-frequency threshold grid.
pub const DEFAULT_GRID_POINTS: usize = 20;

/// Candidate thresholds for one frequency.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaGrid {
    /// The same explicit grid at every frequency.
    Fixed(Vec<f64>),
    /// `points` equispaced values between the smallest and largest
    /// off-diagonal modulus of the averaged periodogram at that frequency.
    Adaptive { points: usize },
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Adaptive {
            points: DEFAULT_GRID_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningConfig {
    pub m: usize,
    pub n_splits: usize,
    pub lambda_grid: LambdaGrid,
    pub seed: u64,
    /// Multiply the selected threshold by `√(|J₁|/(2m+1))` before applying it
    /// to the full-window estimate.
    pub deflate: bool,
}

impl TuningConfig {
    pub fn new(m: usize, seed: u64) -> Self {
        Self {
            m,
            n_splits: 1,
            lambda_grid: LambdaGrid::default(),
            seed,
            deflate: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_splits < 1 {
            return Err(Error::param("number of splits must be at least 1"));
        }
        match &self.lambda_grid {
            LambdaGrid::Fixed(grid) => check_grid(grid),
            LambdaGrid::Adaptive { points } if *points < 1 => {
                Err(Error::param("threshold grid needs at least one point"))
            }
            LambdaGrid::Adaptive { .. } => Ok(()),
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::param("threshold grid is empty"));
    }
    if grid.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(Error::param("threshold grid values must be finite and non-negative"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("threshold grid must be strictly increasing"));
    }
    Ok(())
}

/// Averaged split risk over a threshold grid at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRisk {
    pub j: i64,
    pub grid: Vec<f64>,
    pub risk: Vec<f64>,
    pub chosen: f64,
    pub n_splits: usize,
    pub seed: u64,
}

impl SplitRisk {
    pub fn per_lambda(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.iter().copied().zip(self.risk.iter().copied())
    }
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed for a sub-stream identified by `parts`.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

fn frequency_rng(seed: u64, j: i64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[j as u64]))
}

/// Randomly splits the wrapped window `{j−m, …, j+m}` into two halves whose
/// sizes differ by at most one, keeping `k` and `−k` together whenever both
/// fall in the window.
pub fn split_frequencies<R: Rng + ?Sized>(
    grid: &FourierGrid,
    j: i64,
    m: usize,
    rng: &mut R,
) -> Result<(Vec<i64>, Vec<i64>)> {
    if m == 0 {
        return Err(Error::param("cannot split a window of one frequency (m = 0)"));
    }
    estimator::check_span(grid.n(), m)?;
    let window: Vec<i64> = estimator::window(j, m).map(|k| grid.wrap(k)).collect();

    let mut units: Vec<Vec<i64>> = Vec::new();
    let mut placed = vec![false; window.len()];
    for (i, &k) in window.iter().enumerate() {
        if placed[i] {
            continue;
        }
        placed[i] = true;
        let partner = grid.wrap(-k);
        let mut unit = vec![k];
        if partner != k {
            if let Some(pi) = window.iter().position(|&x| x == partner) {
                placed[pi] = true;
                unit.push(partner);
            }
        }
        units.push(unit);
    }
    units.shuffle(rng);

    let cap = m + 1;
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for unit in units {
        if first.len() + unit.len() <= cap {
            first.extend(unit);
        } else {
            second.extend(unit);
        }
    }
    if rng.random::<bool>() {
        std::mem::swap(&mut first, &mut second);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

/// Default grid: equispaced between the extreme off-diagonal moduli.
pub fn default_lambda_grid(f_hat: &crate::CMatrix, points: usize) -> Vec<f64> {
    let p = f_hat.nrows();
    let moduli: Vec<f64> = (0..p)
        .flat_map(|s| (0..s).map(move |r| (r, s)))
        .map(|(r, s)| f_hat[(r, s)].norm())
        .collect();
    if moduli.is_empty() {
        return vec![0.0];
    }
    let lo = moduli.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = moduli.iter().copied().fold(0.0, f64::max);
    if points <= 1 || hi <= lo {
        return vec![lo];
    }
    let step = (hi - lo) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
    grid[points - 1] = hi;
    grid.dedup_by(|a, b| a <= b);
    grid
}

/// Threshold selection at Fourier index `j` straight from data.
pub fn select_threshold(
    x: &TimeSeriesMatrix,
    j: i64,
    cfg: &TuningConfig,
    op: ThresholdOperator,
) -> Result<SplitRisk> {
    let pg = Periodograms::new(x)?;
    select_threshold_with(&pg, j, cfg, op)
}

pub fn select_threshold_with(
    pg: &Periodograms,
    j: i64,
    cfg: &TuningConfig,
    op: ThresholdOperator,
) -> Result<SplitRisk> {
    cfg.validate()?;
    pg.grid().check(j)?;
    let grid = match &cfg.lambda_grid {
        LambdaGrid::Fixed(g) => g.clone(),
        LambdaGrid::Adaptive { points } => {
            estimator::check_span(pg.n(), cfg.m)?;
            let f_hat = pg.mean_over(estimator::window(j, cfg.m));
            default_lambda_grid(&f_hat, *points)
        }
    };
    let (risk, _) = risk_curve(pg, j, cfg, op, &grid, false)?;
    let mut best = 0;
    for (i, &r) in risk.iter().enumerate() {
        if r < risk[best] {
            best = i;
        }
    }
    Ok(SplitRisk {
        j,
        chosen: grid[best],
        grid,
        risk,
        n_splits: cfg.n_splits,
        seed: cfg.seed,
    })
}

/// Averaged split risk per grid value and the mean size of `J₁`. With
/// `swap` the roles of the two halves are exchanged.
pub(crate) fn risk_curve(
    pg: &Periodograms,
    j: i64,
    cfg: &TuningConfig,
    op: ThresholdOperator,
    grid: &[f64],
    swap: bool,
) -> Result<(Vec<f64>, f64)> {
    let mut rng = frequency_rng(cfg.seed, j);
    let mut risk = vec![0.0; grid.len()];
    let mut first_size = 0usize;
    for _ in 0..cfg.n_splits {
        let (mut j1, mut j2) = split_frequencies(pg.grid(), j, cfg.m, &mut rng)?;
        if swap {
            std::mem::swap(&mut j1, &mut j2);
        }
        first_size += j1.len();
        let f1 = pg.mean_over(j1.iter().copied());
        let f2 = pg.mean_over(j2.iter().copied());
        for (r, &lambda) in risk.iter_mut().zip(grid) {
            *r += linalg::frobenius_sq(&(threshold_entries(&f1, op, lambda, true) - &f2));
        }
    }
    let splits = cfg.n_splits as f64;
    risk.iter_mut().for_each(|r| *r /= splits);
    Ok((risk, first_size as f64 / splits))
}

/// Tunes every non-negative frequency in parallel and returns the
/// thresholded estimate over all of `F_n` together with the tuning reports.
pub fn tuned_estimate(
    pg: &Periodograms,
    cfg: &TuningConfig,
    op: ThresholdOperator,
) -> Result<(SpectralEstimate, Vec<SplitRisk>)> {
    cfg.validate()?;
    let width = (2 * cfg.m + 1) as f64;
    let tuned: Vec<(SplitRisk, f64)> = pg
        .grid()
        .nonnegative()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|j| {
            let report = select_threshold_with(pg, j, cfg, op)?;
            let applied = if cfg.deflate {
                let (_, size) = risk_curve(pg, j, cfg, op, &[report.chosen], false)?;
                report.chosen * (size / width).sqrt()
            } else {
                report.chosen
            };
            Ok((report, applied))
        })
        .collect::<Result<_>>()?;
    let lambdas: BTreeMap<i64, f64> = tuned.iter().map(|(r, l)| (r.j, *l)).collect();
    let est = estimator::threshold_from(pg, cfg.m, op, &lambdas, None, true)?;
    Ok((est, tuned.into_iter().map(|(r, _)| r).collect()))
}

/// Runs one estimator on cached periodograms. Thresholding methods use
/// `fixed_lambda` at every frequency when given, and sample-splitting
/// tuning with `cfg` otherwise.
pub fn estimate_method(
    pg: &Periodograms,
    method: crate::Method,
    fixed_lambda: Option<f64>,
    cfg: &TuningConfig,
) -> Result<(SpectralEstimate, Vec<SplitRisk>)> {
    use crate::Method;
    match (method, method.operator()) {
        (Method::Smoothed, _) => Ok((estimator::smoothed_estimate(pg, cfg.m)?, Vec::new())),
        (Method::Shrinkage, _) => Ok((estimator::shrinkage_from(pg, cfg.m)?, Vec::new())),
        (_, Some(op)) => match fixed_lambda {
            Some(lambda) => {
                let lambdas = pg.grid().nonnegative().map(|j| (j, lambda)).collect();
                Ok((estimator::threshold_from(pg, cfg.m, op, &lambdas, None, true)?, Vec::new()))
            }
            None => tuned_estimate(pg, cfg, op),
        },
        (_, None) => unreachable!("thresholding methods carry an operator"),
    }
}

/// Model-dependent quantities entering the theoretical threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelQuantities {
    /// Stability measure `⦀f⦀ = ess sup_ω ‖f(ω)‖`.
    pub stability: f64,
    pub omega_n: f64,
    pub l_n: f64,
}

impl ModelQuantities {
    pub fn from_model(model: &VarmaModel, n: usize, grid_size: usize) -> Result<Self> {
        Ok(Self {
            stability: model.stability_measure(grid_size)?,
            omega_n: model.omega_n(n)?,
            l_n: model.l_n(n)?,
        })
    }
}

/// `λ = 2R⦀f⦀√(log p/m) + 2[(m + 1/2π)/n · Ω_n + L_n/2π]`.
pub fn theoretical_threshold(q: ModelQuantities, p: f64, n: usize, m: usize, r: f64) -> Result<f64> {
    if m < 1 || n < 1 {
        return Err(Error::param("theoretical threshold needs m ≥ 1 and n ≥ 1"));
    }
    if !(p >= 1.0) || [q.stability, q.omega_n, q.l_n, r].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::param("theoretical threshold inputs must be non-negative and p ≥ 1"));
    }
    let m = m as f64;
    let variance = 2.0 * r * q.stability * (p.ln() / m).sqrt();
    let bias = 2.0 * ((m + 1.0 / (2.0 * PI)) / n as f64 * q.omega_n + q.l_n / (2.0 * PI));
    Ok(variance + bias)
}

/// How quickly the autocovariances of the target family decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanRule {
    /// `m = round(√n)`.
    MaLike,
    /// `m = round((2/3)√n)`, a narrower window for more persistent processes.
    ArLike,
}

impl std::str::FromStr for SpanRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ma_like" | "ma" | "vma" => Ok(SpanRule::MaLike),
            "ar_like" | "ar" | "var" => Ok(SpanRule::ArLike),
            other => Err(Error::param(format!("unknown span rule '{other}'"))),
        }
    }
}

pub fn default_span(n: usize, rule: SpanRule) -> usize {
    let root = (n as f64).sqrt();
    let m = match rule {
        SpanRule::MaLike => root.round(),
        SpanRule::ArLike => (2.0 / 3.0 * root).round(),
    } as usize;
    m.max(1).min(n.saturating_sub(1) / 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RMatrix;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn split_keeps_conjugate_pairs_together() {
        let grid = FourierGrid::new(20).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..40 {
            let (a, b) = split_frequencies(&grid, 0, 1, &mut rng(seed)).unwrap();
            assert!(
                (a == vec![-1, 1] && b == vec![0]) || (a == vec![0] && b == vec![-1, 1]),
                "{a:?} {b:?}"
            );
            seen.insert(a);
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn split_rejects_zero_span() {
        let grid = FourierGrid::new(20).unwrap();
        assert!(split_frequencies(&grid, 3, 0, &mut rng(0)).is_err());
        assert!(split_frequencies(&grid, 3, 10, &mut rng(0)).is_err());
    }

    #[test]
    fn split_without_pairs_is_balanced() {
        let grid = FourierGrid::new(100).unwrap();
        let (a, b) = split_frequencies(&grid, 30, 5, &mut rng(4)).unwrap();
        assert_eq!(a.len() + b.len(), 11);
        assert!(a.len().abs_diff(b.len()) <= 1);
    }

    #[test]
    fn split_wraps_near_nyquist() {
        // window {8, 9, 10, 11, 12} at n = 20 wraps to {8, 9, 10, −9, −8}
        let grid = FourierGrid::new(20).unwrap();
        for seed in 0..20 {
            let (a, _) = split_frequencies(&grid, 10, 2, &mut rng(seed)).unwrap();
            for k in &a {
                let partner = grid.wrap(-k);
                assert!(a.contains(&partner), "{a:?}");
            }
        }
    }

    #[test]
    fn singleton_grid_gives_plain_split_risk() {
        let wn = VarmaModel::white_noise(RMatrix::identity(4, 4)).unwrap();
        let x = wn.simulate(60, 0, 2).unwrap();
        let pg = Periodograms::new(&x).unwrap();
        let mut cfg = TuningConfig::new(4, 9);
        cfg.lambda_grid = LambdaGrid::Fixed(vec![0.0]);
        cfg.n_splits = 3;
        let risk = select_threshold_with(&pg, 7, &cfg, ThresholdOperator::lasso()).unwrap();
        assert_eq!(risk.chosen, 0.0);

        let mut r = frequency_rng(9, 7);
        let mut expect = 0.0;
        for _ in 0..3 {
            let (a, b) = split_frequencies(pg.grid(), 7, 4, &mut r).unwrap();
            expect += linalg::frobenius_sq(&(pg.mean_over(a) - pg.mean_over(b)));
        }
        assert!((risk.risk[0] - expect / 3.0).abs() < 1e-12 * expect);
    }

    #[test]
    fn selection_is_deterministic() {
        let m = VarmaModel::block_vma(6).unwrap();
        let x = m.simulate(80, 0, 3).unwrap();
        let cfg = TuningConfig::new(6, 17);
        let a = select_threshold(&x, 5, &cfg, ThresholdOperator::hard()).unwrap();
        let b = select_threshold(&x, 5, &cfg, ThresholdOperator::hard()).unwrap();
        assert_eq!(a, b);
        assert!(a.grid.contains(&a.chosen));
        let best = a.risk.iter().copied().fold(f64::INFINITY, f64::min);
        let first = a.risk.iter().position(|&r| r == best).unwrap();
        assert_eq!(a.grid[first], a.chosen);
    }

    #[test]
    fn large_threshold_wins_on_white_noise() {
        let wn = VarmaModel::white_noise(RMatrix::identity(6, 6)).unwrap();
        let mut wins = 0;
        let trials = 40;
        for t in 0..trials {
            let x = wn.simulate(200, 0, 1000 + t).unwrap();
            let pg = Periodograms::new(&x).unwrap();
            let mut cfg = TuningConfig::new(10, t);
            cfg.n_splits = 50;
            cfg.lambda_grid = LambdaGrid::Fixed(vec![0.0, 1e6]);
            let r = select_threshold_with(&pg, 20, &cfg, ThresholdOperator::hard()).unwrap();
            if r.chosen > 0.0 {
                wins += 1;
            }
        }
        assert!(wins * 10 >= trials * 9, "large threshold won {wins}/{trials}");
    }

    #[test]
    fn relabeling_halves_leaves_mean_risk_stable() {
        let m = VarmaModel::block_vma(6).unwrap();
        let x = m.simulate(200, 0, 21).unwrap();
        let pg = Periodograms::new(&x).unwrap();
        let mut cfg = TuningConfig::new(14, 5);
        cfg.n_splits = 200;
        let grid = [0.0, 0.05, 0.1];
        let op = ThresholdOperator::lasso();
        let (a, _) = risk_curve(&pg, 30, &cfg, op, &grid, false).unwrap();
        let (b, _) = risk_curve(&pg, 30, &cfg, op, &grid, true).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 0.1 * x.max(*y), "{x} vs {y}");
        }
    }

    #[test]
    fn default_grid_spans_off_diagonal_moduli() {
        let m = VarmaModel::block_vma(6).unwrap();
        let x = m.simulate(100, 0, 8).unwrap();
        let pg = Periodograms::new(&x).unwrap();
        let f = pg.mean_over(estimator::window(4, 10));
        let g = default_lambda_grid(&f, 20);
        assert_eq!(g.len(), 20);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let moduli: Vec<f64> = (0..6)
            .flat_map(|s| (0..s).map(move |r| (r, s)))
            .map(|(r, s)| f[(r, s)].norm())
            .collect();
        assert_eq!(g[19], moduli.iter().copied().fold(0.0, f64::max));
        assert_eq!(default_lambda_grid(&crate::CMatrix::identity(1, 1), 20), vec![0.0]);
    }

    #[test]
    fn tuned_estimate_is_conjugate_symmetric() {
        let m = VarmaModel::block_vma(3).unwrap();
        let x = m.simulate(50, 0, 6).unwrap();
        let pg = Periodograms::new(&x).unwrap();
        let (est, reports) = tuned_estimate(&pg, &TuningConfig::new(5, 1), ThresholdOperator::lasso()).unwrap();
        assert_eq!(reports.len(), 26);
        assert_eq!(est.len(), 50);
        for j in 1..25 {
            assert_eq!(&est.get(j).unwrap().conj().into_entries(), est.get(-j).unwrap().entries());
            assert_eq!(est.lambda(j), est.lambda(-j));
        }
        let mut cfg = TuningConfig::new(5, 1);
        cfg.deflate = true;
        let (deflated, _) = tuned_estimate(&pg, &cfg, ThresholdOperator::lasso()).unwrap();
        assert!(deflated.lambda(3).unwrap() <= est.lambda(3).unwrap());
    }

    #[test]
    fn theoretical_threshold_examples() {
        let q = ModelQuantities {
            stability: 1.0 / (2.0 * PI),
            omega_n: 0.0,
            l_n: 0.0,
        };
        let v = theoretical_threshold(q, std::f64::consts::E, 50, 4, 1.0).unwrap();
        assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let zero = ModelQuantities {
            stability: 1.0,
            omega_n: 0.0,
            l_n: 0.0,
        };
        assert_eq!(theoretical_threshold(zero, 10.0, 50, 4, 0.0).unwrap(), 0.0);
        assert!(theoretical_threshold(zero, 10.0, 50, 0, 1.0).is_err());
    }

    #[test]
    fn theoretical_threshold_terms_move_with_span() {
        let q = ModelQuantities {
            stability: 0.8,
            omega_n: 3.0,
            l_n: 0.1,
        };
        let variance = |m| theoretical_threshold(ModelQuantities { omega_n: 0.0, l_n: 0.0, ..q }, 12.0, 200, m, 1.0).unwrap();
        let bias = |m| theoretical_threshold(q, 12.0, 200, m, 0.0).unwrap();
        for m in 1..30 {
            assert!(variance(m + 1) < variance(m));
            assert!(bias(m + 1) > bias(m));
        }
    }

    #[test]
    fn span_rules() {
        assert_eq!(default_span(100, SpanRule::MaLike), 10);
        assert_eq!(default_span(100, SpanRule::ArLike), 7);
        assert_eq!(default_span(200, SpanRule::MaLike), 14);
        assert!(default_span(9, SpanRule::ArLike) >= 1);
        for n in 9..500 {
            for rule in [SpanRule::MaLike, SpanRule::ArLike] {
                assert!(2 * default_span(n, rule) < n);
            }
        }
    }

    #[test]
    fn seeds_differ_across_parts() {
        assert_ne!(derive_seed(1, &[0]), derive_seed(1, &[1]));
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_eq!(derive_seed(7, &[3, 4]), derive_seed(7, &[3, 4]));
    }
}
