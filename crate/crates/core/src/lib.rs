//! Estimation of large spectral density matrices of multivariate stationary
//! time series by thresholding averaged periodograms.
//!
//! The crate is organised around the estimation pipeline:
//!
//! - [`model`]: VARMA generative models, simulation and ground-truth spectra.
//! - [`dft`]: Fourier grid, trigonometric design vectors and periodograms.
//! - [`estimator`]: averaged periodogram, thresholding operators, diagonal
//!   shrinkage and coherence.
//! - [`tuning`]: frequency-domain sample-splitting threshold selection.
//! - [`metrics`]: RMISE, support recovery scores and ROC curves.
//! - [`io`]: CSV/JSON file formats.
//! - [`bench`]: replicated simulation benchmark driver.
//! - [`cli`]: the `specthresh` command-line front end.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod dft;
pub mod error;
pub mod estimator;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod series;
pub mod tuning;

pub use dft::{FourierGrid, Periodograms, SpectralKind, SpectralMatrix};
pub use error::{Error, Result};
pub use estimator::{Method, SpectralEstimate, ThresholdKind, ThresholdOperator};
pub use model::{NoiseFamily, VarmaModel};
pub use series::TimeSeriesMatrix;

/// Complex matrix type used for all spectral quantities.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;
/// Real matrix type used for coefficients, covariances and data.
pub type RMatrix = nalgebra::DMatrix<f64>;
