//! Numerical core for ridge-regression initialization experiments.
//!
//! The crate is organised around the pipeline the experiment CLI drives:
//!
//! * [`linalg`] — dense matrices, symmetric eigendecomposition (cyclic
//!   Jacobi), thin SVD via the smaller Gram matrix, SPD solves.
//! * [`data`] — LIBSVM ingestion, centering/standardization, synthetic
//!   generators with controlled eigenfeature spectra, binary caching.
//! * [`spectral`] — eigenfeature statistics: variances, response
//!   covariances, regularity ratios and the boundedness constant tau.
//! * [`primal`] / [`dual`] — the two ridge formulations, closed-form
//!   minimizers, gradient descent, homotopic initialization and the
//!   suboptimality envelopes.
//! * [`rcdm`] — randomized coordinate descent on the dual with both the
//!   conservative and the diagonal step-size rules, plus the
//!   convergence-theorem checkers.
//! * [`glm`] — generalized linear models with the biased gradient step.

pub mod data;
pub mod dual;
pub mod glm;
pub mod linalg;
pub mod primal;
pub mod rcdm;
pub mod spectral;
pub mod trace;

pub use data::{Dataset, RawDataset, SyntheticSpec};
pub use dual::DualRidgeProblem;
pub use glm::{GlmProblem, Link};
pub use linalg::{DenseMatrix, LinalgError, SymEig, ThinSvd};
pub use primal::RidgeProblem;
pub use spectral::{SpectralDecomposition, TauProfile};
pub use trace::OptimizerTrace;

/// Errors shared by the solver modules.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("iterates diverged: suboptimality grew past {0:.3e} times the initial value")]
    Diverged(f64),
    #[error("rho = {rho:.6e} outside [{lo:.6e}, {hi:.6e}]")]
    RhoOutOfRange { rho: f64, lo: f64, hi: f64 },
    #[error("zeta = {zeta:.6e} outside (0, {limit:.6e})")]
    ZetaOutOfRange { zeta: f64, limit: f64 },
    #[error("all eigenfeature variances are zero (rank 0 data)")]
    AllZeroVariance,
}
