//! Generalized linear models under Gaussian designs with the biased
//! gradient step `w ← w − gamma_t R'(w) − eta_t E[yx]`.
//!
//! The risk is `R(w) = E[phi(xᵀw) − y·xᵀw]`. For Gaussian inputs the
//! gradient collapses (integration by parts) to
//! `R'(w) = −E[yx] + E[phi''(xᵀw)] Σ w`, which is what makes a bias
//! toward `E[yx]` effective in the transient phase.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::linalg::{self, DenseMatrix};
use crate::spectral::TauProfile;
use crate::trace::{should_log, OptimizerTrace, TraceMeta, TraceStep};
use crate::ModelError;

/// Smooth link functions handled by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    /// `phi(a) = log(1 + exp(a))`.
    Logistic,
    /// `phi(a) = a²`.
    Squared,
}

impl Link {
    pub fn value(self, a: f64) -> f64 {
        match self {
            // max(a,0) + log1p(exp(-|a|)) avoids overflow on both tails.
            Link::Logistic => a.max(0.0) + (-a.abs()).exp().ln_1p(),
            Link::Squared => a * a,
        }
    }

    pub fn d1(self, a: f64) -> f64 {
        match self {
            Link::Logistic => {
                if a >= 0.0 {
                    1.0 / (1.0 + (-a).exp())
                } else {
                    let e = a.exp();
                    e / (1.0 + e)
                }
            }
            Link::Squared => 2.0 * a,
        }
    }

    pub fn d2(self, a: f64) -> f64 {
        match self {
            Link::Logistic => {
                let s = self.d1(a);
                s * (1.0 - s)
            }
            Link::Squared => 2.0,
        }
    }

    /// Uniform bound on `|phi''|`.
    pub fn d2_bound(self) -> f64 {
        match self {
            Link::Logistic => 0.25,
            Link::Squared => 2.0,
        }
    }
}

/// A finite sample from a mean-zero Gaussian design with the covariance
/// that generated it. Risk and gradients are empirical means over the
/// sample; `sigma`/`l` are the design parameters used by the
/// Stein-identity and bound evaluators.
#[derive(Debug, Clone)]
pub struct GlmProblem {
    pub x: DenseMatrix,
    pub y: Vec<f64>,
    pub sigma: DenseMatrix,
    /// `L = ||Sigma||`.
    pub l: f64,
    pub link: Link,
}

/// Response rule used by the sampler.
#[derive(Debug, Clone, Copy)]
pub enum ResponseModel<'a> {
    /// `y = xᵀ w + noise_std · N(0,1)`.
    Linear { w: &'a [f64], noise_std: f64 },
    /// `y ~ Bernoulli(sigmoid(xᵀ w))` with {0,1} labels.
    BernoulliLogit { w: &'a [f64] },
}

impl GlmProblem {
    /// Draw `n` rows `x ~ N(0, sigma)` and responses per `model`.
    pub fn generate(
        n: usize,
        sigma: &DenseMatrix,
        model: ResponseModel<'_>,
        link: Link,
        seed: u64,
    ) -> Result<GlmProblem, ModelError> {
        let d = sigma.rows();
        let chol = linalg::cholesky(sigma)?;
        let l = linalg::sym_eig(sigma)?.values[0];
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut x = DenseMatrix::zeros(n, d);
        let mut y = vec![0.0; n];
        let mut z = vec![0.0; d];
        for i in 0..n {
            for zj in z.iter_mut() {
                *zj = standard_normal(&mut rng);
            }
            // x_i = chol · z
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..=j {
                    s += chol.get(j, k) * z[k];
                }
                x.set(i, j, s);
            }
            let row = x.row(i);
            y[i] = match model {
                ResponseModel::Linear { w, noise_std } => {
                    linalg::dot(row, w) + noise_std * standard_normal(&mut rng)
                }
                ResponseModel::BernoulliLogit { w } => {
                    let p = Link::Logistic.d1(linalg::dot(row, w));
                    if rng.gen_range(0.0..1.0) < p {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
        }
        Ok(GlmProblem { x, y, sigma: sigma.clone(), l, link })
    }

    /// Reinterpret the empirical second moment as the design covariance;
    /// makes sample-level identities exact.
    pub fn with_empirical_sigma(mut self) -> Result<GlmProblem, ModelError> {
        self.sigma = self.second_moment();
        self.l = linalg::sym_eig(&self.sigma)?.values[0];
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    fn check_dim(&self, w: &[f64]) -> Result<(), ModelError> {
        if w.len() != self.d() {
            return Err(ModelError::DimensionMismatch { expected: self.d(), got: w.len() });
        }
        Ok(())
    }

    /// Empirical second moment `(1/n) Σ x xᵀ`.
    pub fn second_moment(&self) -> DenseMatrix {
        self.x.gram(self.n() as f64)
    }

    /// `Ê[y x]`.
    pub fn eyx(&self) -> Vec<f64> {
        linalg::scale(&self.x.matvec_t(&self.y), 1.0 / self.n() as f64)
    }

    /// Empirical risk `Ê[phi(xᵀw) − y xᵀw]`.
    pub fn risk(&self, w: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(w)?;
        let mut total = 0.0;
        for i in 0..self.n() {
            let a = linalg::dot(self.x.row(i), w);
            total += self.link.value(a) - self.y[i] * a;
        }
        Ok(total / self.n() as f64)
    }

    /// `R'(w) = Ê[x phi'(xᵀw)] − Ê[yx]`.
    pub fn gradient(&self, w: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_dim(w)?;
        let mut g = vec![0.0; self.d()];
        for i in 0..self.n() {
            let row = self.x.row(i);
            let coef = self.link.d1(linalg::dot(row, w)) - self.y[i];
            linalg::axpy(coef, row, &mut g);
        }
        Ok(linalg::scale(&g, 1.0 / self.n() as f64))
    }

    /// `Ê[phi''(xᵀ w)]`.
    pub fn mean_curvature(&self, w: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(w)?;
        let total: f64 =
            (0..self.n()).map(|i| self.link.d2(linalg::dot(self.x.row(i), w))).sum();
        Ok(total / self.n() as f64)
    }

    /// Norm of the empirical Stein defect
    /// `Ê[x phi'(xᵀw)] − Ê[phi''(xᵀw)] Σ w`; decays as `n^{-1/2}`.
    pub fn stein_residual(&self, w: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(w)?;
        let mut lhs = vec![0.0; self.d()];
        let mut curv = 0.0;
        for i in 0..self.n() {
            let row = self.x.row(i);
            let a = linalg::dot(row, w);
            linalg::axpy(self.link.d1(a), row, &mut lhs);
            curv += self.link.d2(a);
        }
        let nf = self.n() as f64;
        let lhs = linalg::scale(&lhs, 1.0 / nf);
        let rhs = linalg::scale(&self.sigma.matvec(w), curv / nf);
        Ok(linalg::norm2(&linalg::sub(&lhs, &rhs)))
    }

    /// Plain gradient descent with the safe step `1/(phi_bar ||Σ̂||)`,
    /// run to the requested gradient norm. Returns the iterate and the
    /// achieved gradient norm.
    pub fn plain_gd_minimizer(
        &self,
        tol: f64,
        max_steps: usize,
    ) -> Result<(Vec<f64>, f64), ModelError> {
        let l_hat = linalg::sym_eig(&self.second_moment())?.values[0];
        let gamma = 1.0 / (self.link.d2_bound() * l_hat);
        let mut w = vec![0.0; self.d()];
        let mut gnorm = f64::INFINITY;
        for _ in 0..max_steps {
            let g = self.gradient(&w)?;
            gnorm = linalg::norm2(&g);
            if gnorm <= tol {
                break;
            }
            linalg::axpy(-gamma, &g, &mut w);
        }
        Ok((w, gnorm))
    }

    /// Least-squares fit of the gradient onto the two-term decomposition
    /// `R'(w) ≈ xi_1 Σ (w − w*) + xi_2 Ê[yx]`, which is exact in
    /// population for Gaussian designs. Recovers the constants of the
    /// contraction schedule `gamma = (L xi_1)⁻¹`, `eta = −gamma xi_2`.
    pub fn fit_schedule_constants(
        &self,
        w: &[f64],
        w_star: &[f64],
    ) -> Result<(f64, f64), ModelError> {
        self.check_dim(w)?;
        self.check_dim(w_star)?;
        let g = self.gradient(w)?;
        let a = self.sigma.matvec(&linalg::sub(w, w_star));
        let e = self.eyx();
        // 2x2 normal equations.
        let (aa, ae, ee) = (linalg::dot(&a, &a), linalg::dot(&a, &e), linalg::dot(&e, &e));
        let (ga, ge) = (linalg::dot(&g, &a), linalg::dot(&g, &e));
        let det = aa * ee - ae * ae;
        if det.abs() <= 1e-14 * (aa * ee).max(f64::MIN_POSITIVE) {
            // Degenerate span: project on the curvature term alone.
            return Ok((ga / aa.max(f64::MIN_POSITIVE), 0.0));
        }
        Ok(((ga * ee - ge * ae) / det, (ge * aa - ga * ae) / det))
    }

    /// Biased gradient descent `w ← w − gamma_t R'(w) − eta_t Ê[yx]`.
    /// `w_star` supplies the reference for suboptimality and distances.
    pub fn biased_gd_run(
        &self,
        w0: &[f64],
        schedule: &Schedule,
        steps: usize,
        w_star: &[f64],
    ) -> Result<OptimizerTrace, ModelError> {
        self.check_dim(w0)?;
        self.check_dim(w_star)?;
        let eyx = self.eyx();
        let r_star = self.risk(w_star)?;
        let mut w = w0.to_vec();
        let mut rows = Vec::new();
        let mut divergence_cap = f64::NAN;
        for t in 0..=steps {
            let gap = self.risk(&w)? - r_star;
            if t == 0 {
                divergence_cap = 1e12 * gap.abs().max(1e-12 * (1.0 + r_star.abs()));
            } else if gap > divergence_cap {
                return Err(ModelError::Diverged(1e12));
            }
            let grad = self.gradient(&w)?;
            if should_log(t, steps) {
                rows.push(TraceStep {
                    t,
                    suboptimality: gap,
                    grad_norm: linalg::norm2(&grad),
                    dist_to_opt: linalg::norm2(&linalg::sub(&w, w_star)),
                    wall_epochs: t as f64,
                    kernel_part: None,
                    image_part: None,
                });
            }
            if t < steps {
                let (gamma, eta) = schedule.step(self, t, &w, &grad, &eyx, Some(w_star))?;
                linalg::axpy(-gamma, &grad, &mut w);
                linalg::axpy(-eta, &eyx, &mut w);
            }
        }
        Ok(OptimizerTrace {
            steps: rows,
            meta: TraceMeta {
                step_size: schedule.label(),
                init_label: "explicit".into(),
                seed: 0,
                step_flagged: false,
            },
        })
    }
}

fn standard_normal(rng: &mut ChaCha20Rng) -> f64 {
    loop {
        let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let z = (-2.0 * u.ln()).sqrt() * v.cos();
        if z.is_finite() {
            return z;
        }
    }
}

// ── Step schedules ─────────────────────────────────────────────────────

/// Candidate grid for the line-searched biased step.
#[derive(Debug, Clone)]
pub struct ScheduleGrid {
    pub gammas: Vec<f64>,
    pub etas: Vec<f64>,
}

impl ScheduleGrid {
    /// 20 log-spaced `gamma` in `[1e-3/L, 10/L]`; 21 `eta` symmetric
    /// around 0, scaled so the bias displacement stays at the `1/L`
    /// length scale.
    pub fn default_for(l: f64, eyx_norm: f64) -> ScheduleGrid {
        let gammas = log_spaced(1e-3 / l, 10.0 / l, 20);
        let eta_max = 1.0 / (l * eyx_norm.max(f64::MIN_POSITIVE.sqrt()));
        let etas = (-10..=10).map(|k| eta_max * k as f64 / 10.0).collect();
        ScheduleGrid { gammas, etas }
    }

    /// Denser gamma sweep for contraction measurements.
    pub fn dense_for(l: f64, eyx_norm: f64) -> ScheduleGrid {
        let gammas = log_spaced(0.25 / l, 16.0 / l, 80);
        let eta_max = 1.0 / (l * eyx_norm.max(f64::MIN_POSITIVE.sqrt()));
        let etas = (-10..=10).map(|k| eta_max * k as f64 / 10.0).collect();
        ScheduleGrid { gammas, etas }
    }
}

pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let ratio = (hi / lo).ln();
    (0..count).map(|k| lo * (ratio * k as f64 / (count - 1) as f64).exp()).collect()
}

/// Per-step rule for `(gamma_t, eta_t)`.
#[derive(Debug, Clone)]
pub enum Schedule {
    Fixed { gamma: f64, eta: f64 },
    /// The curvature schedule `gamma = (L xi_1)⁻¹`, `eta = −gamma xi_2`,
    /// exact for the squared link (`xi_1 = Ê[phi''] = 2`, `xi_2 = 0`)
    /// with `L = ||Σ̂||`.
    AnalyticSquared,
    /// Grid search each step (see [`schedule_search`]).
    LineSearch(ScheduleGrid),
}

impl Schedule {
    pub fn label(&self) -> String {
        match self {
            Schedule::Fixed { gamma, eta } => format!("fixed({gamma:.3e},{eta:.3e})"),
            Schedule::AnalyticSquared => "analytic-squared".into(),
            Schedule::LineSearch(_) => "line-search".into(),
        }
    }

    fn step(
        &self,
        p: &GlmProblem,
        _t: usize,
        w: &[f64],
        grad: &[f64],
        _eyx: &[f64],
        w_star: Option<&[f64]>,
    ) -> Result<(f64, f64), ModelError> {
        match self {
            Schedule::Fixed { gamma, eta } => Ok((*gamma, *eta)),
            Schedule::AnalyticSquared => {
                assert_eq!(p.link, Link::Squared);
                let l_hat = linalg::sym_eig(&p.second_moment())?.values[0];
                Ok((1.0 / (2.0 * l_hat), 0.0))
            }
            Schedule::LineSearch(grid) => {
                let _ = grad;
                schedule_search(p, w, grid, w_star)
            }
        }
    }
}

/// Pick the `(gamma, eta)` pair on the grid minimizing
/// `||w⁺ − w*||_Σ` when `w_star` is available, else the risk of `w⁺`.
/// Ties break toward smaller `gamma`, then smaller `|eta|`.
pub fn schedule_search(
    p: &GlmProblem,
    w: &[f64],
    grid: &ScheduleGrid,
    w_star: Option<&[f64]>,
) -> Result<(f64, f64), ModelError> {
    assert!(!grid.gammas.is_empty() && !grid.etas.is_empty());
    let grad = p.gradient(w)?;
    let eyx = p.eyx();
    let mut best: Option<(f64, f64, f64)> = None;
    for &gamma in &grid.gammas {
        for &eta in &grid.etas {
            let mut cand = w.to_vec();
            linalg::axpy(-gamma, &grad, &mut cand);
            linalg::axpy(-eta, &eyx, &mut cand);
            let score = match w_star {
                Some(ws) => {
                    let delta = linalg::sub(&cand, ws);
                    linalg::dot(&delta, &p.sigma.matvec(&delta))
                }
                None => p.risk(&cand)?,
            };
            let better = match best {
                None => true,
                Some((s, g, e)) => {
                    score < s - 1e-15 * s.abs()
                        || ((score - s).abs() <= 1e-15 * s.abs().max(1e-300)
                            && (gamma < g || (gamma == g && eta.abs() < e.abs())))
                }
            };
            if better {
                best = Some((score, gamma, eta));
            }
        }
    }
    let (_, gamma, eta) = best.unwrap();
    Ok((gamma, eta))
}

// ── Boundedness envelope ───────────────────────────────────────────────

/// Both readings of the zero-initialization GLM envelope at step `t`.
///
/// `literal` follows the stated form
/// `c_{w*} tau phi_bar ((1−zeta/L)^{2t} (1 − r(zeta)) + r(zeta) zeta)`;
/// `primal_analog` mirrors the ridge envelope,
/// `c_{w*} tau phi_bar (r(zeta) (1−zeta/L)^{2t} + (d − r(zeta))) zeta`.
/// `1 − r(zeta)` can go negative since `r` is a count, which is why both
/// are reported.
#[derive(Debug, Clone, Copy)]
pub struct GlmBound {
    pub literal: f64,
    pub primal_analog: f64,
    pub c_w_star: f64,
    pub r_zeta: usize,
}

pub fn glm_bound(
    profile: &TauProfile,
    p: &GlmProblem,
    w_star: &[f64],
    zeta: f64,
    t: usize,
) -> Result<GlmBound, ModelError> {
    if !(zeta > 0.0 && zeta < p.l) {
        return Err(ModelError::ZetaOutOfRange { zeta, limit: p.l });
    }
    let c_w_star = 1.0 / p.mean_curvature(w_star)?;
    let tau = profile.tau;
    let phi_bar = p.link.d2_bound();
    let r = profile.per_feature.iter().filter(|f| f.sigma2 > zeta).count();
    let d = p.d();
    let decay = (1.0 - zeta / p.l).powi(2 * t as i32);
    let literal = c_w_star * tau * phi_bar * (decay * (1.0 - r as f64) + r as f64 * zeta);
    let primal_analog =
        c_w_star * tau * phi_bar * (r as f64 * decay + (d as f64 - r as f64)) * zeta;
    Ok(GlmBound { literal, primal_analog, c_w_star, r_zeta: r })
}
