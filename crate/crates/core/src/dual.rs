//! Dual ridge regression: objective construction, closed-form minimizers,
//! homotopic initialization, the image/kernel suboptimality decomposition,
//! the dual↔primal mapping, and the initialization-distance envelope.
//!
//! The dual quadratic lives in sample space:
//! `Q_mu(alpha) = ½ alphaᵀ G alpha − bᵀ alpha` with
//! `G = (1/(mu n²)) X Xᵀ + (1/n) I` and `b = y/n`. Directions in the null
//! space of `Xᵀ` all carry eigenvalue `1/n` and their optimal coordinates
//! do not depend on the regularizer, which is what homotopic
//! initialization exploits.

use std::sync::OnceLock;

use crate::data::Dataset;
use crate::linalg::{self, DenseMatrix, ThinSvd};
use crate::spectral::{self, SpectralDecomposition, TauProfile};
use crate::ModelError;

/// Largest sample count for which the dual Hessian is materialized for a
/// direct factorization; beyond it every G-product goes through `X`.
pub const DIRECT_SOLVE_MAX_N: usize = 2000;

/// The experiment default `nu = 0.25 √mu`.
pub fn quarter_sqrt_rule(mu: f64) -> f64 {
    0.25 * mu.sqrt()
}

#[derive(Debug)]
pub struct DualRidgeProblem {
    x: DenseMatrix,
    y: Vec<f64>,
    mu: f64,
    svd: ThinSvd,
    g_diag: Vec<f64>,
    minimizer_cache: OnceLock<Vec<f64>>,
    optimum_cache: OnceLock<f64>,
}

/// Initial point for the target problem, solved at the larger
/// regularizer `nu`.
#[derive(Debug, Clone)]
pub struct HomotopicInit {
    pub nu: f64,
    pub alpha0: Vec<f64>,
    /// "direct" or "cyclic-cd(tol)".
    pub method: String,
    /// Coordinate sweeps consumed by the iterative path (0 for direct).
    pub iterations: usize,
}

impl DualRidgeProblem {
    pub fn new(data: &Dataset, mu: f64) -> Result<Self, ModelError> {
        assert!(mu > 0.0, "dual ridge needs mu > 0");
        let svd = linalg::thin_svd(&data.x, true)?;
        Ok(Self::from_svd(data.x.clone(), data.y.clone(), mu, svd))
    }

    /// Rebuild at a different regularizer without recomputing the SVD.
    pub fn with_mu(&self, mu: f64) -> Self {
        Self::from_svd(self.x.clone(), self.y.clone(), mu, self.svd.clone())
    }

    fn from_svd(x: DenseMatrix, y: Vec<f64>, mu: f64, svd: ThinSvd) -> Self {
        let n = x.rows() as f64;
        let g_diag: Vec<f64> = (0..x.rows())
            .map(|r| {
                let row = x.row(r);
                linalg::dot(row, row) / (mu * n * n) + 1.0 / n
            })
            .collect();
        DualRidgeProblem {
            x,
            y,
            mu,
            svd,
            g_diag,
            minimizer_cache: OnceLock::new(),
            optimum_cache: OnceLock::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn svd(&self) -> &ThinSvd {
        &self.svd
    }

    /// Diagonal of `G`.
    pub fn g_diag(&self) -> &[f64] {
        &self.g_diag
    }

    /// `b = y / n`.
    pub fn rhs(&self) -> Vec<f64> {
        linalg::scale(&self.y, 1.0 / self.n() as f64)
    }

    /// Regularized spectrum `lambda_i = sigma_i² + mu` over the image.
    pub fn lambdas(&self) -> Vec<f64> {
        self.svd.singulars.iter().map(|s| s * s + self.mu).collect()
    }

    /// Eigenvalues of `G`: `lambda_i/(n mu)` on the image, `1/n` on the
    /// kernel of `Xᵀ`.
    pub fn g_image_eigenvalues(&self) -> Vec<f64> {
        let nmu = self.n() as f64 * self.mu;
        self.lambdas().iter().map(|l| l / nmu).collect()
    }

    pub fn g_norm(&self) -> f64 {
        self.g_image_eigenvalues().first().copied().unwrap_or(0.0).max(1.0 / self.n() as f64)
    }

    fn check_dim(&self, alpha: &[f64]) -> Result<(), ModelError> {
        if alpha.len() != self.n() {
            return Err(ModelError::DimensionMismatch { expected: self.n(), got: alpha.len() });
        }
        Ok(())
    }

    /// `Q_mu(alpha)`, evaluated in `O(nd)` through `v = Xᵀ alpha`.
    pub fn objective(&self, alpha: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(alpha)?;
        let n = self.n() as f64;
        let v = self.x.matvec_t(alpha);
        Ok(linalg::dot(&v, &v) / (2.0 * self.mu * n * n) + linalg::dot(alpha, alpha) / (2.0 * n)
            - linalg::dot(&self.y, alpha) / n)
    }

    /// `∇Q_mu(alpha) = G alpha − b` without materializing `G`.
    pub fn gradient(&self, alpha: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_dim(alpha)?;
        let n = self.n() as f64;
        let v = self.x.matvec_t(alpha);
        let mut g = self.x.matvec(&v);
        for ((gi, ai), yi) in g.iter_mut().zip(alpha).zip(&self.y) {
            *gi = *gi / (self.mu * n * n) + ai / n - yi / n;
        }
        Ok(g)
    }

    /// Materialized `G`; test/desk use only.
    pub fn dense_hessian(&self) -> DenseMatrix {
        let n = self.n() as f64;
        let mut g = self.x.gram_outer(self.mu * n * n);
        g.add_diag(1.0 / n);
        g
    }

    /// `alpha* = G⁻¹ b`, cached. Direct Cholesky up to
    /// [`DIRECT_SOLVE_MAX_N`] samples, otherwise the rank-`r` inversion
    /// `alpha* = y − U diag(sigma_i²/lambda_i) Uᵀ y` through the SVD.
    pub fn minimizer(&self) -> Result<&[f64], ModelError> {
        if self.minimizer_cache.get().is_none() {
            let alpha = if self.n() <= DIRECT_SOLVE_MAX_N {
                linalg::solve_spd(&self.dense_hessian(), &self.rhs())?
            } else {
                self.minimizer_via_svd()
            };
            #[cfg(debug_assertions)]
            {
                let residual = linalg::norm2(&self.gradient(&alpha)?);
                let scale = linalg::norm2(&self.rhs()).max(f64::MIN_POSITIVE);
                debug_assert!(
                    residual <= 1e-8 * scale,
                    "dual solve residual {residual:.3e} vs rhs scale {scale:.3e}"
                );
            }
            let _ = self.minimizer_cache.set(alpha);
        }
        Ok(self.minimizer_cache.get().unwrap())
    }

    fn minimizer_via_svd(&self) -> Vec<f64> {
        let uty = self.svd.left.matvec_t(&self.y);
        let mut alpha = self.y.clone();
        for (k, &s) in self.svd.singulars.iter().enumerate() {
            let s2 = s * s;
            let coef = -s2 / (s2 + self.mu) * uty[k];
            let col = self.svd.left.column(k);
            linalg::axpy(coef, &col, &mut alpha);
        }
        alpha
    }

    /// `Q*_mu`, cached.
    pub fn optimum(&self) -> Result<f64, ModelError> {
        if self.optimum_cache.get().is_none() {
            let v = self.objective(self.minimizer()?)?;
            let _ = self.optimum_cache.set(v);
        }
        Ok(*self.optimum_cache.get().unwrap())
    }

    pub fn suboptimality(&self, alpha: &[f64]) -> Result<f64, ModelError> {
        Ok(self.objective(alpha)? - self.optimum()?)
    }

    /// Exact (or tolerance-controlled iterative) minimizer at the larger
    /// regularizer `nu`, to be used as the starting point at `mu`.
    pub fn homotopic_init(&self, nu: f64, method: SolveMethod) -> Result<HomotopicInit, ModelError> {
        assert!(nu > 0.0);
        let at_nu = self.with_mu(nu);
        match method {
            SolveMethod::Direct => Ok(HomotopicInit {
                nu,
                alpha0: at_nu.minimizer()?.to_vec(),
                method: "direct".into(),
                iterations: 0,
            }),
            SolveMethod::CyclicCd { tol, max_sweeps } => {
                let (alpha0, sweeps) = at_nu.cyclic_cd_solve(tol, max_sweeps)?;
                Ok(HomotopicInit {
                    nu,
                    alpha0,
                    method: format!("cyclic-cd({tol:.1e})"),
                    iterations: sweeps,
                })
            }
        }
    }

    /// Cyclic coordinate descent with the coordinate Lipschitz steps
    /// `1/G_rr`, stopped when the strong-convexity certificate
    /// `n ||∇Q||² / 2` drops below `tol`. Cheap because the strong
    /// convexity grows with the regularizer.
    fn cyclic_cd_solve(&self, tol: f64, max_sweeps: usize) -> Result<(Vec<f64>, usize), ModelError> {
        let n = self.n();
        let nf = n as f64;
        let mut alpha = vec![0.0; n];
        let mut v = vec![0.0; self.d()];
        for sweep in 1..=max_sweeps {
            for r in 0..n {
                let grad_r = linalg::dot(self.x.row(r), &v) / (self.mu * nf * nf) + alpha[r] / nf
                    - self.y[r] / nf;
                let delta = -grad_r / self.g_diag[r];
                alpha[r] += delta;
                linalg::axpy(delta, self.x.row(r), &mut v);
            }
            v = self.x.matvec_t(&alpha);
            let g = self.gradient(&alpha)?;
            let certificate = 0.5 * nf * linalg::dot(&g, &g);
            if certificate <= tol {
                return Ok((alpha, sweep));
            }
        }
        Ok((alpha, max_sweeps))
    }

    /// Split `Q_mu(alpha) − Q*` into the image and kernel contributions:
    /// `(1/(2n)) Σ_{i≤r} (lambda_i/mu) w_i² + (1/(2n)) ||P_ker Δ||²` with
    /// `w = Uᵀ Δ`. The two parts sum to the direct suboptimality.
    pub fn suboptimality_split(&self, alpha: &[f64]) -> Result<(f64, f64), ModelError> {
        self.check_dim(alpha)?;
        let delta = linalg::sub(alpha, self.minimizer()?);
        let n = self.n() as f64;
        let w = self.svd.left.matvec_t(&delta);
        let lambdas = self.lambdas();
        let image: f64 = w
            .iter()
            .zip(&lambdas)
            .map(|(wi, li)| li / self.mu * wi * wi)
            .sum::<f64>()
            / (2.0 * n);
        let kernel_sq = (linalg::dot(&delta, &delta) - linalg::dot(&w, &w)).max(0.0);
        Ok((image, kernel_sq / (2.0 * n)))
    }

    /// Projection of `v` onto the kernel of `Xᵀ` (`v − U Uᵀ v`).
    pub fn kernel_projection(&self, v: &[f64]) -> Vec<f64> {
        let w = self.svd.left.matvec_t(v);
        let mut out = v.to_vec();
        for (k, &wk) in w.iter().enumerate() {
            let col = self.svd.left.column(k);
            linalg::axpy(-wk, &col, &mut out);
        }
        out
    }

    /// `beta = (n mu)⁻¹ Xᵀ alpha`: maps the dual minimizer to the primal
    /// one.
    pub fn dual_to_primal(&self, alpha: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_dim(alpha)?;
        Ok(linalg::scale(&self.x.matvec_t(alpha), 1.0 / (self.n() as f64 * self.mu)))
    }

    /// Mean squared loss of the mapped primal parameter on a held-out set.
    pub fn test_error(&self, alpha: &[f64], test: &Dataset) -> Result<f64, ModelError> {
        let beta = self.dual_to_primal(alpha)?;
        Ok(mean_squared_loss(&beta, test))
    }
}

pub fn mean_squared_loss(beta: &[f64], data: &Dataset) -> f64 {
    if data.n() == 0 {
        return f64::NAN;
    }
    let pred = data.x.matvec(beta);
    pred.iter().zip(&data.y).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / data.n() as f64
}

#[derive(Debug, Clone, Copy)]
pub enum SolveMethod {
    Direct,
    CyclicCd { tol: f64, max_sweeps: usize },
}

/// Squared per-coordinate gaps `(Uᵀ(alpha*_nu − alpha*_mu))_i²` in closed
/// form: `n [ (mu−nu) sigma_i / ((sigma_i²+mu)(sigma_i²+nu)) ]² c_i²`.
/// Kernel coordinates (`sigma = 0`) gap by zero.
pub fn dual_init_gap(spec: &SpectralDecomposition, mu: f64, nu: f64) -> Vec<f64> {
    assert!(mu > 0.0 && nu > 0.0);
    let n = spec.n() as f64;
    spec.svd
        .singulars
        .iter()
        .zip(&spec.response_cov)
        .map(|(&s, &c)| {
            let s2 = s * s;
            let factor = (mu - nu) * s / ((s2 + mu) * (s2 + nu));
            n * factor * factor * c * c
        })
        .collect()
}

/// Envelope on the squared distance between the two dual minimizers:
/// `((mu−nu)²/nu) · (d − r(zeta)) · n · tau · zeta`.
pub fn homotopic_distance_bound(
    profile: &TauProfile,
    spec: &SpectralDecomposition,
    mu: f64,
    nu: f64,
    zeta: f64,
    n: usize,
    d: usize,
) -> f64 {
    assert!(zeta >= 0.0);
    let r = spectral::count_above(spec, zeta);
    (mu - nu) * (mu - nu) / nu * (d.saturating_sub(r)) as f64 * n as f64 * profile.tau * zeta
}
