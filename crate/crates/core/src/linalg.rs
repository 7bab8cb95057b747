//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::{CMatrix, RMatrix};

/// Squared Frobenius norm of a complex matrix.
pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Largest entry modulus.
pub fn max_modulus(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest modulus of `m - m†`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for r in 0..n {
        for s in r..n {
            worst = worst.max((m[(r, s)] - m[(s, r)].conj()).norm());
        }
    }
    worst
}

/// Average `m` with its conjugate transpose.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// Real trace of a (Hermitian) complex matrix.
pub fn trace_re(m: &CMatrix) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn hermitian_min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Spectral (operator 2-) norm of a complex matrix.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn spectral_norm_real(m: &RMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Maximum absolute column sum, ‖M‖₁.
pub fn one_norm(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|c| m.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Symmetric PSD square root `L` with `L Lᵀ = s`, via Cholesky when possible
/// and a clipped eigen-decomposition otherwise (singular covariances).
pub fn psd_factor(s: &RMatrix) -> Result<RMatrix> {
    if let Some(ch) = s.clone().cholesky() {
        return Ok(ch.l());
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
    if eig.eigenvalues.iter().any(|&v| v < -1e-10 * scale) {
        return Err(Error::param("covariance matrix is not positive semidefinite"));
    }
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root))
}

/// Eigenvalues of a general real square matrix.
pub fn real_eigenvalues(m: &RMatrix) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.clone().complex_eigenvalues().iter().copied().collect()
}

pub fn spectral_radius(m: &RMatrix) -> f64 {
    real_eigenvalues(m)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Eigen-decomposition `m = S D S⁻¹` of a real matrix, when it exists.
#[derive(Debug, Clone)]
pub struct Diagonalization {
    pub eigenvalues: Vec<Complex64>,
    /// Eigenvectors as unit-norm columns.
    pub vectors: CMatrix,
    /// Condition number κ = ‖S‖‖S⁻¹‖.
    pub condition: f64,
}

/// Attempts to diagonalize `m`. Returns `None` when some eigenvalue cluster is
/// defective (geometric multiplicity below algebraic) or the eigenvector
/// matrix is numerically singular.
pub fn diagonalize(m: &RMatrix) -> Option<Diagonalization> {
    let n = m.nrows();
    if n == 0 {
        return None;
    }
    let mut eigenvalues = real_eigenvalues(m);
    eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let scale = spectral_norm_real(m).max(1.0);
    let cluster_tol = 1e-6 * scale;
    let null_tol = 1e-7 * scale;

    // Group numerically coincident eigenvalues.
    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    for ev in eigenvalues {
        match clusters
            .iter_mut()
            .find(|c| c.iter().any(|x| (x - ev).norm() < cluster_tol))
        {
            Some(c) => c.push(ev),
            None => clusters.push(vec![ev]),
        }
    }

    let mc = to_complex(m);
    let mut columns: Vec<nalgebra::DVector<Complex64>> = Vec::with_capacity(n);
    let mut ordered = Vec::with_capacity(n);
    for cluster in &clusters {
        let k = cluster.len();
        let centre = cluster.iter().sum::<Complex64>() / k as f64;
        let shifted = &mc - CMatrix::identity(n, n) * centre;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t?;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        if svd.singular_values[idx[k - 1]] > null_tol {
            return None;
        }
        for &i in idx.iter().take(k) {
            let v = v_t.row(i).adjoint();
            let norm = v.norm();
            columns.push(v / Complex64::new(norm, 0.0));
        }
        ordered.extend(cluster.iter().copied());
    }
    let vectors = CMatrix::from_columns(&columns);
    let sv = vectors.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin <= 1e-12 * smax {
        return None;
    }
    Some(Diagonalization {
        eigenvalues: ordered,
        vectors,
        condition: smax / smin,
    })
}
