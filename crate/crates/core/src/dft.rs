//! Fourier-frequency grid, trigonometric design vectors and periodograms.
//!
//! The DFT of the data matrix at `ω` is `d(ω) = 𝒳ᵀ(C(ω) − iS(ω))` with
//! `C(ω)[t] = cos(tω)/√n` and `S(ω)[t] = sin(tω)/√n`, `t = 0..n−1`, and the
//! periodogram is `I(ω) = d(ω) d(ω)†`. Transforms are evaluated directly,
//! `O(n)` per frequency and channel.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::series::TimeSeriesMatrix;
use crate::{CMatrix, RMatrix};

/// The Fourier frequencies `ω_j = 2πj/n`, `j ∈ F_n = {−⌊(n−1)/2⌋, …, ⌊n/2⌋}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FourierGrid {
    n: usize,
}

impl FourierGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("Fourier grid needs n ≥ 2"));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lowest(&self) -> i64 {
        -(((self.n - 1) / 2) as i64)
    }

    pub fn highest(&self) -> i64 {
        (self.n / 2) as i64
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> + Clone {
        self.lowest()..=self.highest()
    }

    /// Non-negative indices `0..=⌊n/2⌋`.
    pub fn nonnegative(&self) -> impl Iterator<Item = i64> + Clone {
        0..=self.highest()
    }

    pub fn contains(&self, j: i64) -> bool {
        (self.lowest()..=self.highest()).contains(&j)
    }

    pub fn check(&self, j: i64) -> Result<()> {
        if self.contains(j) {
            Ok(())
        } else {
            Err(Error::Index { j, n: self.n })
        }
    }

    pub fn frequency(&self, j: i64) -> f64 {
        2.0 * PI * j as f64 / self.n as f64
    }

    /// Canonical representative of `k mod n` in `F_n`.
    pub fn wrap(&self, k: i64) -> i64 {
        let n = self.n as i64;
        let r = k.rem_euclid(n);
        if r > self.highest() {
            r - n
        } else {
            r
        }
    }

    /// Position of `j` in [`FourierGrid::indices`] order.
    pub fn position(&self, j: i64) -> usize {
        (j - self.lowest()) as usize
    }

    /// Whether `j` is its own negative modulo `n` (0, and `n/2` for even `n`).
    pub fn is_self_conjugate(&self, j: i64) -> bool {
        self.wrap(-j) == self.wrap(j)
    }
}

/// What a [`SpectralMatrix`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralKind {
    True,
    Periodogram,
    Averaged,
    Thresholded,
    Shrunk,
    Coherence,
}

/// A `p × p` complex Hermitian matrix attached to one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrix {
    entries: CMatrix,
    omega: f64,
    kind: SpectralKind,
}

impl SpectralMatrix {
    pub fn new(entries: CMatrix, omega: f64, kind: SpectralKind) -> Self {
        debug_assert!(entries.is_square());
        Self {
            entries,
            omega,
            kind,
        }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn kind(&self) -> SpectralKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Hermitian within `tol` relative to the largest entry modulus.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::hermitian_defect(&self.entries) <= tol * linalg::max_modulus(&self.entries).max(1.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::hermitian_min_eigenvalue(&self.entries)
    }

    pub fn trace(&self) -> f64 {
        linalg::trace_re(&self.entries)
    }

    pub fn conj(&self) -> Self {
        Self {
            entries: self.entries.map(|z| z.conj()),
            omega: -self.omega,
            kind: self.kind,
        }
    }
}

/// Trigonometric design vectors `(C_j, S_j)` at Fourier index `j`.
pub fn cos_sin_vectors(grid: &FourierGrid, j: i64) -> Result<(DVector<f64>, DVector<f64>)> {
    grid.check(j)?;
    let n = grid.n();
    let omega = grid.frequency(j);
    let scale = 1.0 / (n as f64).sqrt();
    let c = DVector::from_fn(n, |t, _| (t as f64 * omega).cos() * scale);
    let s = DVector::from_fn(n, |t, _| (t as f64 * omega).sin() * scale);
    Ok((c, s))
}

/// `d(ω) = 𝒳ᵀ(C(ω) − iS(ω))` at an arbitrary frequency, `data` already
/// prepared (centered as required).
pub(crate) fn dft_at(data: &RMatrix, omega: f64) -> DVector<Complex64> {
    let (n, p) = data.shape();
    let scale = 1.0 / (n as f64).sqrt();
    let mut d = DVector::from_element(p, Complex64::new(0.0, 0.0));
    for t in 0..n {
        let (sin, cos) = (t as f64 * omega).sin_cos();
        let w = Complex64::new(cos * scale, -sin * scale);
        for r in 0..p {
            d[r] += w * data[(t, r)];
        }
    }
    d
}

/// DFT vector `d(ω_j)` of the (centered) data.
pub fn dft_vector(x: &TimeSeriesMatrix, grid: &FourierGrid, j: i64) -> Result<DVector<Complex64>> {
    check_grid(x, grid)?;
    grid.check(j)?;
    Ok(dft_at(&x.analysis_data(), grid.frequency(j)))
}

/// Raw periodogram `I(ω_j) = d(ω_j) d(ω_j)†`.
pub fn periodogram(x: &TimeSeriesMatrix, grid: &FourierGrid, j: i64) -> Result<SpectralMatrix> {
    let d = dft_vector(x, grid, j)?;
    Ok(SpectralMatrix::new(
        outer(&d),
        grid.frequency(j),
        SpectralKind::Periodogram,
    ))
}

fn outer(d: &DVector<Complex64>) -> CMatrix {
    d * d.adjoint()
}

fn check_grid(x: &TimeSeriesMatrix, grid: &FourierGrid) -> Result<()> {
    if x.n() != grid.n() {
        return Err(Error::param(format!(
            "series has {} rows but the grid is for n = {}",
            x.n(),
            grid.n()
        )));
    }
    Ok(())
}

/// DFT vectors at every Fourier frequency, from which periodograms and
/// their window sums are formed. Indices outside `F_n` wrap modulo `n`.
#[derive(Debug, Clone)]
pub struct Periodograms {
    grid: FourierGrid,
    p: usize,
    /// `dft[position(j)] = d(ω_j)`.
    dft: Vec<DVector<Complex64>>,
}

impl Periodograms {
    pub fn new(x: &TimeSeriesMatrix) -> Result<Self> {
        let grid = FourierGrid::new(x.n())?;
        let data = x.analysis_data();
        let dft = grid
            .indices()
            .map(|j| dft_at(&data, grid.frequency(j)))
            .collect();
        Ok(Self {
            grid,
            p: x.p(),
            dft,
        })
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dft(&self, k: i64) -> &DVector<Complex64> {
        &self.dft[self.grid.position(self.grid.wrap(k))]
    }

    /// `I(ω_k)` for any integer `k` (periodic in `k` with period `n`).
    pub fn periodogram(&self, k: i64) -> CMatrix {
        outer(self.dft(k))
    }

    /// `Σ_{k∈ks} I(ω_k)`.
    pub fn sum<I: IntoIterator<Item = i64>>(&self, ks: I) -> CMatrix {
        self.accumulate(ks).0
    }

    /// `(1/(2π|ks|)) Σ_{k∈ks} I(ω_k)`.
    pub fn mean_over<I: IntoIterator<Item = i64>>(&self, ks: I) -> CMatrix {
        let (mut acc, count) = self.accumulate(ks);
        if count > 0 {
            acc /= Complex64::new(2.0 * PI * count as f64, 0.0);
        }
        acc
    }

    /// Upper triangle of `Σ d d†` accumulated, then mirrored.
    fn accumulate<I: IntoIterator<Item = i64>>(&self, ks: I) -> (CMatrix, usize) {
        let p = self.p;
        let mut acc = CMatrix::zeros(p, p);
        let mut count = 0usize;
        for k in ks {
            let d = self.dft(k);
            for s in 0..p {
                let ds = d[s].conj();
                for r in 0..=s {
                    acc[(r, s)] += d[r] * ds;
                }
            }
            count += 1;
        }
        for s in 0..p {
            acc[(s, s)].im = 0.0;
            for r in (s + 1)..p {
                acc[(r, s)] = acc[(s, r)].conj();
            }
        }
        (acc, count)
    }
}

/// Spectral norm of the `2n × n` matrix stacking all `C_jᵀ` and `S_jᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DftNormReport {
    pub n: usize,
    pub rows: usize,
    pub norm: f64,
}

pub fn dft_matrix_norm_check(grid: &FourierGrid) -> Result<DftNormReport> {
    let n = grid.n();
    if n > 512 {
        return Err(Error::param("dense norm check is limited to n ≤ 512"));
    }
    let rows = 2 * n;
    let mut q = RMatrix::zeros(rows, n);
    for (i, j) in grid.indices().enumerate() {
        let (c, s) = cos_sin_vectors(grid, j)?;
        q.row_mut(2 * i).copy_from(&c.transpose());
        q.row_mut(2 * i + 1).copy_from(&s.transpose());
    }
    Ok(DftNormReport {
        n,
        rows,
        norm: linalg::spectral_norm_real(&q),
    })
}
