//! Primal ridge regression: objective, closed-form minimizer, gradient
//! descent (iterative and via the diagonalized closed form), suboptimality
//! identities and the boundedness envelope for zero initialization.

use std::sync::OnceLock;

use crate::data::Dataset;
use crate::linalg::{self, DenseMatrix, SymEig};
use crate::spectral::{self, SpectralDecomposition, TauProfile};
use crate::trace::{should_log, OptimizerTrace, TraceMeta, TraceStep};
use crate::ModelError;

/// Runs abort when suboptimality exceeds this multiple of its initial value.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

/// Quadratic `Q(beta) = ½ betaᵀ H beta − betaᵀ b` with
/// `H = (1/n) XᵀX + mu I` and `b = (1/n) Xᵀ y`.
#[derive(Debug)]
pub struct RidgeProblem {
    hessian: DenseMatrix,
    linear: Vec<f64>,
    mu: f64,
    minimizer_cache: OnceLock<Vec<f64>>,
    optimum_cache: OnceLock<f64>,
    eig_cache: OnceLock<SymEig>,
}

impl RidgeProblem {
    pub fn from_dataset(data: &Dataset, mu: f64) -> Self {
        assert!(mu > 0.0, "ridge regularizer must be positive");
        let n = data.n() as f64;
        let mut hessian = data.x.gram(n);
        hessian.add_diag(mu);
        let linear = linalg::scale(&data.x.matvec_t(&data.y), 1.0 / n);
        Self::from_parts(hessian, linear, mu)
    }

    /// Construct directly from `(H, b, mu)`; used by random-problem tests.
    pub fn from_parts(hessian: DenseMatrix, linear: Vec<f64>, mu: f64) -> Self {
        assert_eq!(hessian.rows(), linear.len());
        RidgeProblem {
            hessian,
            linear,
            mu,
            minimizer_cache: OnceLock::new(),
            optimum_cache: OnceLock::new(),
            eig_cache: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn hessian(&self) -> &DenseMatrix {
        &self.hessian
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    fn check_dim(&self, beta: &[f64]) -> Result<(), ModelError> {
        if beta.len() != self.dim() {
            return Err(ModelError::DimensionMismatch { expected: self.dim(), got: beta.len() });
        }
        Ok(())
    }

    /// `Q(beta) = ½ betaᵀHbeta − betaᵀb`.
    pub fn objective(&self, beta: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(beta)?;
        let hb = self.hessian.matvec(beta);
        Ok(0.5 * linalg::dot(beta, &hb) - linalg::dot(beta, &self.linear))
    }

    /// `∇Q(beta) = Hbeta − b`.
    pub fn gradient(&self, beta: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_dim(beta)?;
        let mut g = self.hessian.matvec(beta);
        for (gi, bi) in g.iter_mut().zip(&self.linear) {
            *gi -= bi;
        }
        Ok(g)
    }

    fn eig(&self) -> &SymEig {
        self.eig_cache.get_or_init(|| {
            linalg::sym_eig(&self.hessian).expect("ridge Hessian is symmetric and finite")
        })
    }

    /// `beta* = H⁻¹ b` by Cholesky, cached.
    pub fn minimizer(&self) -> Result<&[f64], ModelError> {
        if self.minimizer_cache.get().is_none() {
            let m = linalg::solve_spd(&self.hessian, &self.linear)?;
            let _ = self.minimizer_cache.set(m);
        }
        Ok(self.minimizer_cache.get().unwrap())
    }

    /// `Q* = Q(beta*) = −½ bᵀ beta*`.
    pub fn optimum(&self) -> Result<f64, ModelError> {
        if self.optimum_cache.get().is_none() {
            let v = -0.5 * linalg::dot(&self.linear, self.minimizer()?);
            let _ = self.optimum_cache.set(v);
        }
        Ok(*self.optimum_cache.get().unwrap())
    }

    /// Largest regularized eigenvalue `lambda_1`.
    pub fn lambda_max(&self) -> f64 {
        self.eig().values.first().copied().unwrap_or(self.mu)
    }

    /// Condition number `kappa = lambda_1 / lambda_d`.
    pub fn condition_number(&self) -> f64 {
        let vals = &self.eig().values;
        match (vals.first(), vals.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        }
    }

    /// Step size with guaranteed linear convergence (`gamma = 1/lambda_1`).
    pub fn default_step_size(&self) -> f64 {
        1.0 / self.lambda_max()
    }

    /// `Q(beta) − Q*` from the cached optimum.
    pub fn suboptimality(&self, beta: &[f64]) -> Result<f64, ModelError> {
        Ok(self.objective(beta)? - self.optimum()?)
    }

    /// The same gap through the quadratic-form identity
    /// `½ (beta−beta*)ᵀ H (beta−beta*)`.
    pub fn suboptimality_quadratic(&self, beta: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(beta)?;
        let delta = linalg::sub(beta, self.minimizer()?);
        let hd = self.hessian.matvec(&delta);
        Ok(0.5 * linalg::dot(&delta, &hd))
    }

    /// Plain gradient descent, logging every step up to 1000 and every
    /// 10th after. Flags (without rejecting) step sizes at or beyond
    /// `2/lambda_1`.
    pub fn gd_run(
        &self,
        beta0: &[f64],
        gamma: f64,
        steps: usize,
    ) -> Result<OptimizerTrace, ModelError> {
        self.check_dim(beta0)?;
        assert!(gamma > 0.0);
        let flagged = gamma >= 2.0 / self.lambda_max();
        let opt = self.minimizer()?.to_vec();
        let q_star = self.optimum()?;

        let mut beta = beta0.to_vec();
        let mut rows = Vec::new();
        let mut divergence_cap = f64::NAN;
        for t in 0..=steps {
            let gap = self.objective(&beta)? - q_star;
            if t == 0 {
                // Absolute floor keeps runs started at the optimum from
                // tripping on rounding noise.
                divergence_cap =
                    DIVERGENCE_FACTOR * gap.abs().max(1e-12 * (1.0 + q_star.abs()));
            }
            if gap > divergence_cap {
                return Err(ModelError::Diverged(DIVERGENCE_FACTOR));
            }
            let grad = self.gradient(&beta)?;
            if should_log(t, steps) {
                rows.push(TraceStep {
                    t,
                    suboptimality: gap,
                    grad_norm: linalg::norm2(&grad),
                    dist_to_opt: linalg::norm2(&linalg::sub(&beta, &opt)),
                    wall_epochs: t as f64,
                    kernel_part: None,
                    image_part: None,
                });
            }
            if t < steps {
                linalg::axpy(-gamma, &grad, &mut beta);
            }
        }
        Ok(OptimizerTrace {
            steps: rows,
            meta: TraceMeta {
                step_size: format!("{gamma:.6e}"),
                init_label: "explicit".into(),
                seed: 0,
                step_flagged: flagged,
            },
        })
    }

    /// Iterate `t` of gradient descent in closed form:
    /// `beta* + (I − gamma H)^t (beta0 − beta*)`, evaluated in the
    /// eigenbasis of `H`.
    pub fn gd_closed_form(
        &self,
        beta0: &[f64],
        gamma: f64,
        t: usize,
    ) -> Result<Vec<f64>, ModelError> {
        self.check_dim(beta0)?;
        let opt = self.minimizer()?;
        let delta = linalg::sub(beta0, opt);
        let eig = self.eig();
        let mut out = opt.to_vec();
        for k in 0..self.dim() {
            let col = eig.vectors.column(k);
            let factor = (1.0 - gamma * eig.values[k]).powi(t as i32);
            let coef = factor * linalg::dot(&col, &delta);
            linalg::axpy(coef, &col, &mut out);
        }
        Ok(out)
    }
}

/// Value of the zero-initialization suboptimality envelope at step `t`:
/// `½ [r(zeta) (1−gamma·zeta)^{2t} + (d − r(zeta))] · tau · zeta`.
#[derive(Debug, Clone, Copy)]
pub struct BoundValue {
    pub value: f64,
    /// Set when `gamma * zeta >= 1`, where the decaying factor is no
    /// longer meaningful.
    pub decay_flagged: bool,
}

pub fn primal_bound(
    profile: &TauProfile,
    spec: &SpectralDecomposition,
    gamma: f64,
    zeta: f64,
    t: usize,
    d: usize,
) -> BoundValue {
    assert!(zeta >= 0.0);
    let r = spectral::count_above(spec, zeta);
    let decay = (1.0 - gamma * zeta).powi(2 * t as i32);
    let value = 0.5 * (r as f64 * decay + (d as f64 - r as f64)) * profile.tau * zeta;
    BoundValue { value, decay_flagged: gamma * zeta >= 1.0 }
}
