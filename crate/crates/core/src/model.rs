//! VARMA generative models: simulation and ground-truth spectral quantities.
//!
//! A model is
//!
//! ```text
//! X_t = Σ_ℓ A_ℓ X_{t-ℓ} + ε_t + Σ_ℓ B_ℓ ε_{t-ℓ},   ε_t = L u_t,  L Lᵀ = Σ_ε
//! ```
//!
//! where `u_t` has i.i.d. unit-variance coordinates drawn from one of the
//! noise families. Autocovariances use the convention
//! `Γ(ℓ) = Cov(X_t, X_{t-ℓ})`, so `Γ(-ℓ) = Γ(ℓ)ᵀ` and
//! `f(ω) = (1/2π) Σ_ℓ Γ(ℓ) e^{-iℓω}`.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};

use crate::dft::{SpectralKind, SpectralMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::series::TimeSeriesMatrix;
use crate::{CMatrix, RMatrix};

/// Burn-in used for models with an autoregressive part.
pub const DEFAULT_AR_BURN_IN: usize = 500;
/// Frequency grid size used to approximate the essential supremum of ‖f(ω)‖.
pub const DEFAULT_STABILITY_GRID: usize = 512;

const LYAPUNOV_TOL: f64 = 1e-14;
const LYAPUNOV_MAX_DOUBLINGS: usize = 64;
const TAIL_TOL: f64 = 1e-12;

/// Distribution of the standardized innovations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFamily {
    Gaussian,
    /// Student t with `df > 4` degrees of freedom, rescaled to unit variance.
    StudentT { df: f64 },
    /// Laplace, rescaled to unit variance.
    Laplace,
}

impl NoiseFamily {
    fn validate(&self) -> Result<()> {
        match *self {
            NoiseFamily::StudentT { df } if !(df > 4.0) => Err(Error::param(format!(
                "student_t noise requires df > 4 (finite fourth moment), got {df}"
            ))),
            _ => Ok(()),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseFamily::Gaussian => StandardNormal.sample(rng),
            NoiseFamily::StudentT { df } => {
                let t: f64 = StudentT::new(df).expect("validated df").sample(rng);
                t * ((df - 2.0) / df).sqrt()
            }
            NoiseFamily::Laplace => {
                let e: f64 = Exp1.sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * e / std::f64::consts::SQRT_2
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::StudentT { .. } => "student_t",
            NoiseFamily::Laplace => "laplace",
        }
    }
}

/// Stable VARMA(d, q) model.
#[derive(Debug, Clone)]
pub struct VarmaModel {
    dim: usize,
    ar: Vec<RMatrix>,
    ma: Vec<RMatrix>,
    noise_cov: RMatrix,
    noise: NoiseFamily,
    noise_factor: RMatrix,
    ar_radius: f64,
}

impl VarmaModel {
    pub fn new(
        dim: usize,
        ar: Vec<RMatrix>,
        ma: Vec<RMatrix>,
        noise_cov: RMatrix,
        noise: NoiseFamily,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("model dimension must be positive"));
        }
        for (name, mats) in [("ar", &ar), ("ma", &ma)] {
            if let Some((i, m)) = mats
                .iter()
                .enumerate()
                .find(|(_, m)| m.nrows() != dim || m.ncols() != dim)
            {
                return Err(Error::param(format!(
                    "{name} coefficient {} is {}×{}, expected {dim}×{dim}",
                    i + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        if noise_cov.nrows() != dim || noise_cov.ncols() != dim {
            return Err(Error::param("noise covariance has wrong shape"));
        }
        let asym = (&noise_cov - noise_cov.transpose()).abs().max();
        if asym > 1e-10 * noise_cov.abs().max().max(1.0) {
            return Err(Error::param("noise covariance is not symmetric"));
        }
        noise.validate()?;
        let noise_factor = linalg::psd_factor(&noise_cov)?;
        let ar_radius = if ar.is_empty() {
            0.0
        } else {
            linalg::spectral_radius(&companion_of(dim, &ar))
        };
        if ar_radius >= 1.0 {
            return Err(Error::Unstable { radius: ar_radius });
        }
        Ok(Self {
            dim,
            ar,
            ma,
            noise_cov,
            noise,
            noise_factor,
            ar_radius,
        })
    }

    /// White noise with covariance `Σ_ε`.
    pub fn white_noise(noise_cov: RMatrix) -> Result<Self> {
        Self::new(noise_cov.nrows(), vec![], vec![], noise_cov, NoiseFamily::Gaussian)
    }

    pub fn var1(a: RMatrix, noise_cov: RMatrix) -> Result<Self> {
        Self::new(a.nrows(), vec![a], vec![], noise_cov, NoiseFamily::Gaussian)
    }

    pub fn vma1(b: RMatrix, noise_cov: RMatrix) -> Result<Self> {
        Self::new(b.nrows(), vec![], vec![b], noise_cov, NoiseFamily::Gaussian)
    }

    /// Block-diagonal VAR(1) with identical upper-triangular 3×3 blocks and
    /// standard Gaussian noise; `p` must be a multiple of 3.
    pub fn block_var(p: usize) -> Result<Self> {
        Self::var1(block_transition(p)?, RMatrix::identity(p, p))
    }

    /// Block-diagonal VMA(1) counterpart of [`VarmaModel::block_var`].
    pub fn block_vma(p: usize) -> Result<Self> {
        Self::vma1(block_transition(p)?, RMatrix::identity(p, p))
    }

    pub fn with_noise(mut self, noise: NoiseFamily) -> Result<Self> {
        noise.validate()?;
        self.noise = noise;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ar_coeffs(&self) -> &[RMatrix] {
        &self.ar
    }

    pub fn ma_coeffs(&self) -> &[RMatrix] {
        &self.ma
    }

    pub fn noise_cov(&self) -> &RMatrix {
        &self.noise_cov
    }

    pub fn noise_family(&self) -> NoiseFamily {
        self.noise
    }

    pub fn has_ar(&self) -> bool {
        !self.ar.is_empty()
    }

    /// Spectral radius of the AR companion matrix (0 without an AR part).
    pub fn ar_spectral_radius(&self) -> f64 {
        self.ar_radius
    }

    /// Companion matrix of the AR part, `dp × dp`.
    pub fn companion(&self) -> RMatrix {
        companion_of(self.dim, &self.ar)
    }

    pub fn default_burn_in(&self) -> usize {
        if self.has_ar() {
            DEFAULT_AR_BURN_IN
        } else {
            0
        }
    }

    /// Smallest lag `L` with `ρ^L < 1e-12`, `ρ` the AR spectral radius; the
    /// MA order for pure moving averages.
    pub fn default_tail_cap(&self) -> usize {
        let q = self.ma.len();
        if !self.has_ar() || self.ar_radius == 0.0 {
            return q.max(self.ar.len());
        }
        let l = (TAIL_TOL.ln() / self.ar_radius.ln()).ceil() as usize;
        l.max(q + self.ar.len())
    }

    /// Augmented state-space form `Z_t = F Z_{t-1} + G ε_t` with
    /// `Z_t = [X_t, …, X_{t-d+1}, ε_t, …, ε_{t-q+1}]`.
    fn state_space(&self) -> (RMatrix, RMatrix) {
        let p = self.dim;
        let d = self.ar.len();
        let q = self.ma.len();
        let ns = p * (d + q);
        let mut f = RMatrix::zeros(ns, ns);
        let mut g = RMatrix::zeros(ns, p);
        for (l, a) in self.ar.iter().enumerate() {
            f.view_mut((0, l * p), (p, p)).copy_from(a);
        }
        for (l, b) in self.ma.iter().enumerate() {
            f.view_mut((0, (d + l) * p), (p, p)).copy_from(b);
        }
        for l in 1..d {
            f.view_mut((l * p, (l - 1) * p), (p, p))
                .copy_from(&RMatrix::identity(p, p));
        }
        for l in 1..q {
            f.view_mut(((d + l) * p, (d + l - 1) * p), (p, p))
                .copy_from(&RMatrix::identity(p, p));
        }
        g.view_mut((0, 0), (p, p)).copy_from(&RMatrix::identity(p, p));
        if q > 0 {
            g.view_mut((d * p, 0), (p, p))
                .copy_from(&RMatrix::identity(p, p));
        }
        (f, g)
    }

    /// Stationary covariance of the augmented state (models with an AR part).
    fn state_covariance(&self) -> Result<(RMatrix, RMatrix)> {
        let (f, g) = self.state_space();
        let q = &g * &self.noise_cov * g.transpose();
        let p = solve_lyapunov(&f, &q)?;
        Ok((f, p))
    }

    /// Autocovariances `Γ(0), …, Γ(l_max)`.
    pub fn autocov(&self, l_max: usize) -> Result<AutocovSequence> {
        let p = self.dim;
        let mut lags = Vec::with_capacity(l_max + 1);
        if !self.has_ar() {
            // Exact finite convolution with Ψ_0 = I, Ψ_k = B_k.
            let mut psi = vec![RMatrix::identity(p, p)];
            psi.extend(self.ma.iter().cloned());
            let q = self.ma.len();
            for l in 0..=l_max {
                let mut g = RMatrix::zeros(p, p);
                if l <= q {
                    for k in 0..=(q - l) {
                        g += &psi[k + l] * &self.noise_cov * psi[k].transpose();
                    }
                }
                lags.push(g);
            }
            return Ok(AutocovSequence { lags });
        }
        let (f, state_cov) = self.state_covariance()?;
        // Γ(ℓ) = [F^ℓ P]_{11}: propagate the first block row.
        let ns = f.nrows();
        let mut row = RMatrix::zeros(p, ns);
        row.view_mut((0, 0), (p, p)).copy_from(&RMatrix::identity(p, p));
        for _ in 0..=l_max {
            let full = &row * &state_cov;
            lags.push(full.view((0, 0), (p, p)).into_owned());
            row = &row * &f;
        }
        let g0 = &lags[0];
        lags[0] = (g0 + g0.transpose()) * 0.5;
        Ok(AutocovSequence { lags })
    }

    /// True spectral density
    /// `f(ω) = (1/2π) 𝒜⁻¹(z) ℬ(z) Σ_ε ℬ†(z) 𝒜⁻†(z)`, `z = e^{-iω}`.
    pub fn spectral_density(&self, omega: f64) -> Result<SpectralMatrix> {
        let p = self.dim;
        let z = Complex64::from_polar(1.0, -omega);
        let mut a_poly = CMatrix::identity(p, p);
        let mut zl = Complex64::new(1.0, 0.0);
        for a in &self.ar {
            zl *= z;
            a_poly -= linalg::to_complex(a) * zl;
        }
        let mut b_poly = CMatrix::identity(p, p);
        zl = Complex64::new(1.0, 0.0);
        for b in &self.ma {
            zl *= z;
            b_poly += linalg::to_complex(b) * zl;
        }
        let transfer = if self.has_ar() {
            let lu = a_poly.clone().lu();
            let sol = lu.solve(&b_poly).ok_or_else(|| {
                Error::Numerical(format!("AR polynomial is singular at ω = {omega}"))
            })?;
            if sol.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::Numerical(format!(
                    "AR polynomial is numerically singular at ω = {omega}"
                )));
            }
            sol
        } else {
            b_poly
        };
        let sigma = linalg::to_complex(&self.noise_cov);
        let f = &transfer * sigma * transfer.adjoint() / Complex64::new(2.0 * PI, 0.0);
        Ok(SpectralMatrix::new(linalg::symmetrize(&f), omega, SpectralKind::True))
    }

    /// True spectral density at every Fourier frequency of a grid, keyed by
    /// the same ordering as [`crate::FourierGrid::indices`].
    pub fn spectral_density_on(&self, grid: &crate::FourierGrid) -> Result<Vec<SpectralMatrix>> {
        grid.indices()
            .map(|j| self.spectral_density(grid.frequency(j)))
            .collect()
    }

    /// Grid approximation of `ess sup_ω ‖f(ω)‖` on `grid_size` equispaced
    /// points `ω_k = −π + 2πk/grid_size`. The approximation error is of order
    /// `Lip(‖f‖)·π/grid_size`; the grid for `2g` contains the grid for `g`.
    pub fn stability_measure(&self, grid_size: usize) -> Result<f64> {
        if grid_size < 8 {
            return Err(Error::param("stability grid needs at least 8 points"));
        }
        let mut best = 0.0_f64;
        for k in 0..grid_size {
            let omega = -PI + 2.0 * PI * k as f64 / grid_size as f64;
            let f = self.spectral_density(omega)?;
            best = best.max(linalg::spectral_norm(f.entries()));
        }
        Ok(best)
    }

    /// `Ω_n(f)` from autocovariances computed to lag `n`.
    pub fn omega_n(&self, n: usize) -> Result<f64> {
        omega_n(&self.autocov(n)?, n)
    }

    /// `L_n(f)` truncated at `max(default_tail_cap, n + 1)`.
    pub fn l_n(&self, n: usize) -> Result<f64> {
        let cap = self.default_tail_cap().max(n + 1);
        l_n(&self.autocov(cap)?, n, cap)
    }

    /// Simulates `n` observations after discarding `burn_in` rows. The
    /// recursion starts from zero lagged observations and freshly drawn
    /// pre-sample innovations.
    pub fn simulate(&self, n: usize, burn_in: usize, seed: u64) -> Result<TimeSeriesMatrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.ar.len();
        let q = self.ma.len();
        let x_hist = vec![DVector::zeros(self.dim); d];
        let e_hist = (0..q).map(|_| self.draw_innovation(&mut rng)).collect();
        self.run(n, burn_in, x_hist, e_hist, &mut rng)
    }

    /// Simulates `n` observations started from a Gaussian draw of the
    /// stationary state distribution, so no burn-in is needed. Exact for
    /// Gaussian noise.
    pub fn simulate_stationary(&self, n: usize, seed: u64) -> Result<TimeSeriesMatrix> {
        if !self.has_ar() {
            return self.simulate(n, 0, seed);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = self.dim;
        let d = self.ar.len();
        let q = self.ma.len();
        let (_, state_cov) = self.state_covariance()?;
        let factor = linalg::psd_factor(&state_cov)?;
        let u = DVector::from_fn(factor.ncols(), |_, _| StandardNormal.sample(&mut rng));
        let z = factor * u;
        let x_hist = (0..d).map(|l| z.rows(l * p, p).into_owned()).collect();
        let e_hist = (0..q).map(|l| z.rows((d + l) * p, p).into_owned()).collect();
        // The state already holds X_t at lag 0; treat it as history for the next step.
        self.run(n, 0, x_hist, e_hist, &mut rng)
    }

    fn draw_innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let u = DVector::from_fn(self.dim, |_, _| self.noise.sample(rng));
        &self.noise_factor * u
    }

    /// `x_hist[0]` is the most recent observation, `e_hist[0]` the most
    /// recent innovation.
    fn run(
        &self,
        n: usize,
        burn_in: usize,
        mut x_hist: Vec<DVector<f64>>,
        mut e_hist: Vec<DVector<f64>>,
        rng: &mut ChaCha8Rng,
    ) -> Result<TimeSeriesMatrix> {
        if n < 2 {
            return Err(Error::param("simulation needs n ≥ 2"));
        }
        let p = self.dim;
        let mut out = RMatrix::zeros(n, p);
        for t in 0..(burn_in + n) {
            let eps = self.draw_innovation(rng);
            let mut x = eps.clone();
            for (a, xl) in self.ar.iter().zip(x_hist.iter()) {
                x.gemv(1.0, a, xl, 1.0);
            }
            for (b, el) in self.ma.iter().zip(e_hist.iter()) {
                x.gemv(1.0, b, el, 1.0);
            }
            if !x_hist.is_empty() {
                x_hist.pop();
                x_hist.insert(0, x.clone());
            }
            if !e_hist.is_empty() {
                e_hist.pop();
                e_hist.insert(0, eps);
            }
            if t >= burn_in {
                out.row_mut(t - burn_in).copy_from(&x.transpose());
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("simulation produced non-finite values".into()));
        }
        TimeSeriesMatrix::new(out)
    }

    /// Numeric check of the order-of-bias bounds for `Ω_n` and `L_n`.
    pub fn check_order_bias_bounds(&self, n: usize) -> Result<OrderBiasReport> {
        let cap = self.default_tail_cap().max(n + 1);
        let acov = self.autocov(cap)?;
        let omega = omega_n(&acov, n)?;
        let tail = l_n(&acov, n, cap)?;
        let mut notices = Vec::new();

        // Geometric decay: fit ρ_X above the AR radius and the smallest σ_X
        // with ‖Γ(ℓ)‖_max ≤ σ_X ρ_X^ℓ over the computed lags.
        let rho_x = if self.ar_radius > 0.0 {
            0.5 * (1.0 + self.ar_radius)
        } else {
            0.5
        };
        let sigma_x = acov
            .lags
            .iter()
            .enumerate()
            .map(|(l, g)| g.abs().max() / rho_x.powi(l as i32))
            .fold(0.0, f64::max);
        let geometric = {
            let omega_bound = 2.0 * sigma_x * lag_weighted_geometric_sum(rho_x, n);
            let l_bound = 2.0 * sigma_x * rho_x.powi(n as i32 + 1) / (1.0 - rho_x);
            BoundCheck::new(omega, tail, omega_bound, l_bound)
        };

        let var = if !self.has_ar() {
            notices.push("no AR part: VAR bound not applicable".to_string());
            None
        } else if !self.ma.is_empty() {
            notices.push("VARMA model: VAR bound not applicable".to_string());
            None
        } else {
            match linalg::diagonalize(&self.companion()) {
                None => {
                    notices.push(
                        "companion matrix is not diagonalizable within tolerance: VAR bound skipped"
                            .to_string(),
                    );
                    None
                }
                Some(diag) => {
                    let lam = self.ar_radius;
                    let kappa = diag.condition;
                    let noise_norm = linalg::spectral_norm_real(&self.noise_cov);
                    let scale = 2.0 * kappa * kappa * noise_norm / (1.0 - lam * lam);
                    let omega_bound = scale * lag_weighted_geometric_sum(lam, n);
                    let l_bound = scale * lam.powi(n as i32 + 1) / (1.0 - lam);
                    Some(VarBoundCheck {
                        kappa,
                        lambda_max: lam,
                        check: BoundCheck::new(omega, tail, omega_bound, l_bound),
                    })
                }
            }
        };
        let holds = geometric.holds && var.as_ref().is_none_or(|v| v.check.holds);
        Ok(OrderBiasReport {
            n,
            omega_n: omega,
            l_n: tail,
            sigma_x,
            rho_x,
            geometric,
            var,
            notices,
            holds,
        })
    }
}

/// `Σ_{ℓ=1}^n ℓ x^ℓ = x(1 + n x^{n+1} − (n+1) x^n)/(1−x)²`.
pub fn lag_weighted_geometric_sum(x: f64, n: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    x * (1.0 + nf * x.powi(n as i32 + 1) - (nf + 1.0) * x.powi(n as i32)) / (1.0 - x).powi(2)
}

fn companion_of(p: usize, ar: &[RMatrix]) -> RMatrix {
    let d = ar.len();
    let mut c = RMatrix::zeros(p * d, p * d);
    for (l, a) in ar.iter().enumerate() {
        c.view_mut((0, l * p), (p, p)).copy_from(a);
    }
    for l in 1..d {
        c.view_mut((l * p, (l - 1) * p), (p, p))
            .copy_from(&RMatrix::identity(p, p));
    }
    c
}

/// 3×3 upper-triangular block with 0.5 on the diagonal and 0.9 on the first
/// superdiagonal.
pub fn base_block() -> RMatrix {
    RMatrix::from_row_slice(3, 3, &[0.5, 0.9, 0.0, 0.0, 0.5, 0.9, 0.0, 0.0, 0.5])
}

/// Block-diagonal `p × p` transition matrix built from [`base_block`].
pub fn block_transition(p: usize) -> Result<RMatrix> {
    if p == 0 || !p.is_multiple_of(3) {
        return Err(Error::param(format!("block models need p a positive multiple of 3, got {p}")));
    }
    let block = base_block();
    let mut m = RMatrix::zeros(p, p);
    for b in 0..p / 3 {
        m.view_mut((3 * b, 3 * b), (3, 3)).copy_from(&block);
    }
    Ok(m)
}

/// Solves `P = F P Fᵀ + Q` by summing `Σ_k F^k Q (Fᵀ)^k` with doubling steps,
/// stopping once the added block has max-norm below `1e-14·max(1, ‖P‖_max)`.
pub fn solve_lyapunov(f: &RMatrix, q: &RMatrix) -> Result<RMatrix> {
    let mut p = q.clone();
    let mut a = f.clone();
    for _ in 0..LYAPUNOV_MAX_DOUBLINGS {
        let term = &a * &p * a.transpose();
        let size = term.abs().max();
        p += &term;
        if size < LYAPUNOV_TOL * p.abs().max().max(1.0) {
            return Ok((&p + p.transpose()) * 0.5);
        }
        a = &a * &a;
        if a.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    let residual = (&p - f * &p * f.transpose() - q).abs().max();
    Err(Error::Lyapunov {
        iterations: LYAPUNOV_MAX_DOUBLINGS,
        residual,
    })
}

/// Autocovariances `Γ(0), …, Γ(l_max)`; negative lags are `Γ(ℓ)ᵀ`.
#[derive(Debug, Clone)]
pub struct AutocovSequence {
    pub lags: Vec<RMatrix>,
}

impl AutocovSequence {
    pub fn l_max(&self) -> usize {
        self.lags.len().saturating_sub(1)
    }

    pub fn dim(&self) -> usize {
        self.lags.first().map_or(0, |g| g.nrows())
    }

    /// `Γ(ℓ)` for any integer lag within range.
    pub fn at(&self, lag: i64) -> Option<RMatrix> {
        let l = lag.unsigned_abs() as usize;
        let g = self.lags.get(l)?;
        Some(if lag >= 0 { g.clone() } else { g.transpose() })
    }

    /// `(1/2π) Σ_{|ℓ|≤l_max} Γ(ℓ) e^{-iℓω}`.
    pub fn spectral_sum(&self, omega: f64) -> CMatrix {
        let mut f = linalg::to_complex(&self.lags[0]);
        for (l, g) in self.lags.iter().enumerate().skip(1) {
            let e = Complex64::from_polar(1.0, -(l as f64) * omega);
            let gc = linalg::to_complex(g);
            f += &gc * e + gc.transpose() * e.conj();
        }
        f / Complex64::new(2.0 * PI, 0.0)
    }
}

/// `Ω_n(f) = max_{r,s} Σ_{ℓ=-n}^{n} |ℓ| |Γ_rs(ℓ)|`.
pub fn omega_n(acov: &AutocovSequence, n: usize) -> Result<f64> {
    if acov.l_max() < n {
        return Err(Error::param(format!(
            "Ω_n needs lags up to {n}, sequence has {}",
            acov.l_max()
        )));
    }
    Ok(pairwise_max(acov, 1, n, |l| l as f64))
}

/// `L_n(f) = max_{r,s} Σ_{|ℓ|>n} |Γ_rs(ℓ)|`, truncated to `|ℓ| ≤ tail_cap`.
/// For a geometrically decaying sequence with `‖Γ(ℓ)‖_max ≤ c ρ^ℓ` the
/// omitted mass is at most `2cρ^{tail_cap+1}/(1−ρ)`.
pub fn l_n(acov: &AutocovSequence, n: usize, tail_cap: usize) -> Result<f64> {
    if tail_cap <= n {
        return Err(Error::param("tail cap must exceed n"));
    }
    if acov.l_max() < tail_cap {
        return Err(Error::param(format!(
            "L_n needs lags up to {tail_cap}, sequence has {}",
            acov.l_max()
        )));
    }
    Ok(pairwise_max(acov, n + 1, tail_cap, |_| 1.0))
}

fn pairwise_max(acov: &AutocovSequence, from: usize, to: usize, weight: impl Fn(usize) -> f64) -> f64 {
    let p = acov.dim();
    let mut best = 0.0_f64;
    for r in 0..p {
        for s in 0..p {
            let total: f64 = (from..=to)
                .map(|l| {
                    let g = &acov.lags[l];
                    weight(l) * (g[(r, s)].abs() + g[(s, r)].abs())
                })
                .sum();
            best = best.max(total);
        }
    }
    best
}

/// `max_s Σ_r |m_rs|^q` for `q ∈ [0, 1)`; `q = 0` counts nonzeros per column.
pub fn weak_sparsity_norm(m: &CMatrix, q: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::param(format!("weak sparsity exponent must lie in [0, 1), got {q}")));
    }
    let col = |c: usize| -> f64 {
        m.column(c)
            .iter()
            .map(|z| {
                let a = z.norm();
                if q == 0.0 {
                    if a != 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    a.powf(q)
                }
            })
            .sum()
    };
    Ok((0..m.ncols()).map(col).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub omega_bound: f64,
    pub l_bound: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn new(omega: f64, tail: f64, omega_bound: f64, l_bound: f64) -> Self {
        let slack = |b: f64| b + 1e-9 * b.abs().max(1e-300);
        Self {
            omega_bound,
            l_bound,
            holds: omega <= slack(omega_bound) && tail <= slack(l_bound),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarBoundCheck {
    /// Condition number `‖S‖‖S⁻¹‖` of the eigenvector matrix.
    pub kappa: f64,
    pub lambda_max: f64,
    pub check: BoundCheck,
}

/// Computed `Ω_n`, `L_n` against their closed-form upper bounds.
#[derive(Debug, Clone)]
pub struct OrderBiasReport {
    pub n: usize,
    pub omega_n: f64,
    pub l_n: f64,
    pub sigma_x: f64,
    pub rho_x: f64,
    /// Geometric-decay bound with fitted `(σ_X, ρ_X)`.
    pub geometric: BoundCheck,
    /// Diagonalizable-VAR bound; `None` when not applicable.
    pub var: Option<VarBoundCheck>,
    pub notices: Vec<String>,
    pub holds: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn ar1_scalar(a: f64) -> VarmaModel {
        VarmaModel::var1(RMatrix::from_element(1, 1, a), RMatrix::identity(1, 1)).unwrap()
    }

    #[test]
    fn rejects_unstable_and_bad_df() {
        let err = VarmaModel::var1(RMatrix::from_element(1, 1, 1.0), RMatrix::identity(1, 1))
            .unwrap_err();
        assert!(matches!(err, Error::Unstable { .. }));
        assert!(err.to_string().starts_with("unstable: spectral radius ≥ 1"));
        let err = VarmaModel::white_noise(RMatrix::identity(2, 2))
            .unwrap()
            .with_noise(NoiseFamily::StudentT { df: 4.0 })
            .unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
    }

    #[test]
    fn rejects_shape_mismatch_and_asymmetric_cov() {
        assert!(VarmaModel::var1(RMatrix::zeros(2, 3), RMatrix::identity(2, 2)).is_err());
        let cov = RMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(VarmaModel::white_noise(cov).is_err());
    }

    #[test]
    fn white_noise_spectrum_is_flat() {
        let m = VarmaModel::white_noise(RMatrix::identity(3, 3)).unwrap();
        for omega in [-PI, -1.0, 0.0, 0.7, PI] {
            let f = m.spectral_density(omega).unwrap();
            let expect = CMatrix::identity(3, 3) / Complex64::new(2.0 * PI, 0.0);
            assert!(linalg::max_abs_diff(f.entries(), &expect) < 1e-15);
        }
        assert!(close(m.stability_measure(64).unwrap(), 1.0 / (2.0 * PI), 1e-15));
    }

    #[test]
    fn scalar_ar1_spectrum_and_autocov() {
        let m = ar1_scalar(0.5);
        let f0 = m.spectral_density(0.0).unwrap();
        assert!(close(f0.entries()[(0, 0)].re, 2.0 / PI, 1e-14));
        let acov = m.autocov(10).unwrap();
        for l in 0..=10 {
            let expect = 4.0 / 3.0 * 0.5_f64.powi(l as i32);
            assert!(close(acov.lags[l][(0, 0)], expect, 1e-13), "lag {l}");
        }
        // Ω_3 = (4/3)·2·(1·0.5 + 2·0.25 + 3·0.125)
        assert!(close(omega_n(&acov, 3).unwrap(), 11.0 / 3.0, 1e-12));
        // L_2 = (4/3)·2·0.5³/(1−0.5)
        assert!(close(m.l_n(2).unwrap(), 2.0 / 3.0, 1e-11));
        assert!(close(m.stability_measure(512).unwrap(), 2.0 / PI, 1e-12));
    }

    #[test]
    fn white_noise_autocov_and_dependence_measures() {
        let cov = RMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let m = VarmaModel::white_noise(cov.clone()).unwrap();
        let acov = m.autocov(4).unwrap();
        assert_eq!(acov.lags[0], cov);
        assert!(acov.lags[1..].iter().all(|g| g.abs().max() == 0.0));
        for n in 0..4 {
            assert_eq!(omega_n(&acov, n).unwrap(), 0.0);
        }
        assert_eq!(m.l_n(2).unwrap(), 0.0);
    }

    #[test]
    fn vma_autocov_has_finite_support_and_matches_spectrum() {
        let b = base_block();
        let m = VarmaModel::vma1(b, RMatrix::identity(3, 3)).unwrap();
        let acov = m.autocov(5).unwrap();
        assert!(acov.lags[2..].iter().all(|g| g.abs().max() == 0.0));
        for omega in [0.0, PI / 4.0, 1.3, PI] {
            let f = m.spectral_density(omega).unwrap();
            let brute = acov.spectral_sum(omega);
            assert!(linalg::max_abs_diff(f.entries(), &brute) < 1e-10);
        }
        for n in 1..4 {
            assert_eq!(m.l_n(n).unwrap(), 0.0);
        }
    }

    #[test]
    fn ar_autocov_matches_spectrum_via_long_sum() {
        let a = RMatrix::from_row_slice(2, 2, &[0.4, 0.2, -0.1, 0.3]);
        let m = VarmaModel::var1(a.clone(), RMatrix::identity(2, 2)).unwrap();
        let acov = m.autocov(200).unwrap();
        // Lyapunov identity Γ(0) = A Γ(0) Aᵀ + Σ
        let g0 = &acov.lags[0];
        assert!((g0 - &a * g0 * a.transpose() - RMatrix::identity(2, 2)).abs().max() < 1e-13);
        let f = m.spectral_density(0.9).unwrap();
        assert!(linalg::max_abs_diff(f.entries(), &acov.spectral_sum(0.9)) < 1e-12);
    }

    #[test]
    fn varma_autocov_matches_spectrum() {
        let a = RMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, -0.4]);
        let b = RMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.2, 0.1]);
        let m = VarmaModel::new(2, vec![a], vec![b], RMatrix::identity(2, 2), NoiseFamily::Gaussian)
            .unwrap();
        let acov = m.autocov(120).unwrap();
        for omega in [0.0, 1.0, 2.5] {
            let f = m.spectral_density(omega).unwrap();
            assert!(linalg::max_abs_diff(f.entries(), &acov.spectral_sum(omega)) < 1e-12);
        }
    }

    #[test]
    fn var2_companion_autocov_matches_spectrum() {
        let a1 = RMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.3]);
        let a2 = RMatrix::from_row_slice(2, 2, &[-0.2, 0.0, 0.1, 0.2]);
        let m = VarmaModel::new(2, vec![a1, a2], vec![], RMatrix::identity(2, 2), NoiseFamily::Gaussian)
            .unwrap();
        let acov = m.autocov(200).unwrap();
        let f = m.spectral_density(0.4).unwrap();
        assert!(linalg::max_abs_diff(f.entries(), &acov.spectral_sum(0.4)) < 1e-12);
    }

    #[test]
    fn omega_n_is_monotone() {
        let m = VarmaModel::block_var(6).unwrap();
        let acov = m.autocov(40).unwrap();
        let mut prev = 0.0;
        for n in 0..40 {
            let v = omega_n(&acov, n).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        let mut prev = f64::INFINITY;
        let cap = m.default_tail_cap();
        let long = m.autocov(cap).unwrap();
        for n in 0..40 {
            let v = l_n(&long, n, cap).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn insufficient_lags_are_rejected() {
        let m = ar1_scalar(0.5);
        let acov = m.autocov(3).unwrap();
        assert!(omega_n(&acov, 4).is_err());
        assert!(l_n(&acov, 2, 2).is_err());
        assert!(l_n(&acov, 2, 5).is_err());
    }

    #[test]
    fn weak_sparsity_examples() {
        let id = CMatrix::identity(3, 3);
        assert!(close(weak_sparsity_norm(&id, 0.5).unwrap(), 1.0, 1e-15));
        let d = CMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(4.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]));
        assert!(close(weak_sparsity_norm(&d, 0.5).unwrap(), 2.0, 1e-15));
        let ones = CMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(close(weak_sparsity_norm(&ones, 0.5).unwrap(), 2.0, 1e-15));
        assert_eq!(weak_sparsity_norm(&d, 0.0).unwrap(), 1.0);
        assert!(weak_sparsity_norm(&d, 1.0).is_err());
    }

    #[test]
    fn stability_grid_refinement_never_decreases() {
        let m = VarmaModel::var1(
            RMatrix::from_row_slice(2, 2, &[0.3, 0.4, -0.2, 0.5]),
            RMatrix::identity(2, 2),
        )
        .unwrap();
        let mut prev = 0.0;
        for g in [8, 16, 32, 64, 128] {
            let v = m.stability_measure(g).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        assert!(m.stability_measure(7).is_err());
    }

    #[test]
    fn simulate_is_deterministic_and_validates() {
        let m = VarmaModel::block_vma(6).unwrap();
        let a = m.simulate(50, 0, 7).unwrap();
        let b = m.simulate(50, 0, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, m.simulate(50, 0, 8).unwrap());
        assert_eq!(a.n(), 50);
        assert_eq!(a.p(), 6);
    }

    #[test]
    fn heavy_tailed_noise_has_unit_variance() {
        for family in [NoiseFamily::StudentT { df: 8.0 }, NoiseFamily::Laplace] {
            let m = VarmaModel::white_noise(RMatrix::identity(2, 2))
                .unwrap()
                .with_noise(family)
                .unwrap();
            let x = m.simulate(100_000, 0, 3).unwrap();
            for c in 0..2 {
                let v = x.data().column(c).iter().map(|v| v * v).sum::<f64>() / 1e5;
                assert!((v - 1.0).abs() < 0.05, "{family:?}: {v}");
            }
        }
    }

    #[test]
    fn order_bias_bounds_white_noise_and_var1() {
        let wn = VarmaModel::white_noise(RMatrix::identity(3, 3)).unwrap();
        let r = wn.check_order_bias_bounds(10).unwrap();
        assert_eq!(r.omega_n, 0.0);
        assert_eq!(r.l_n, 0.0);
        assert!(r.holds);

        let a = RMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.1, 0.3]);
        let m = VarmaModel::var1(a, RMatrix::identity(2, 2)).unwrap();
        let r = m.check_order_bias_bounds(20).unwrap();
        assert!(r.holds);
        let v = r.var.expect("diagonalizable");
        assert!(v.check.holds && v.kappa >= 1.0);
    }

    #[test]
    fn order_bias_block_var_skips_defective_companion() {
        let m = VarmaModel::block_var(12).unwrap();
        let r = m.check_order_bias_bounds(100).unwrap();
        assert!(r.holds);
        assert!(r.var.is_none());
        assert!(r.notices.iter().any(|s| s.contains("not diagonalizable")));
    }

    #[test]
    fn lag_weighted_sum_matches_direct() {
        for &x in &[0.1_f64, 0.5, 0.93] {
            for n in [1usize, 5, 40] {
                let direct: f64 = (1..=n).map(|l| l as f64 * x.powi(l as i32)).sum();
                assert!((lag_weighted_geometric_sum(x, n) - direct).abs() < 1e-10 * direct.max(1.0));
            }
        }
    }
}
