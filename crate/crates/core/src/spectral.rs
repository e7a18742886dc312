//! Eigenfeature representation and regularity statistics.
//!
//! The data is rotated into eigenfeatures `Z = X V` (right singular
//! vectors of the scaled SVD). Everything the bound evaluators need lives
//! here: the variances `sigma_j²`, the response covariances
//! `c_j = E[Y Z_j]`, the per-feature regularity ratios `rho_j²/sigma_j²`,
//! the boundedness constant `tau`, and the threshold counts `r(zeta)`.

use std::fmt::Write as _;

use crate::data::Dataset;
use crate::linalg::{self, ThinSvd};
use crate::ModelError;

/// Features with variance below `RANK_REL_TOL * sigma_1²` are treated as
/// zero-variance when forming ratios.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Scaled SVD plus the eigenfeature statistics for a dataset at a given
/// regularizer.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub svd: ThinSvd,
    /// `sigma_j² = E[Z_j²]`, descending.
    pub z_variances: Vec<f64>,
    /// `c_j = E[Y Z_j]`.
    pub response_cov: Vec<f64>,
    pub mu: f64,
    /// `lambda_j = sigma_j² + mu`.
    pub regularized_variances: Vec<f64>,
    n: usize,
    d: usize,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Ambient feature dimension (not the rank).
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rank(&self) -> usize {
        self.svd.rank()
    }
}

/// Rotate into eigenfeatures and collect variances and response
/// covariances. `Z = XV` satisfies `(1/n) ZᵀZ = Σ²`; `c = (1/n) Zᵀ y`.
pub fn decompose(data: &Dataset, mu: f64) -> Result<SpectralDecomposition, ModelError> {
    assert!(mu >= 0.0, "mu must be nonnegative");
    let svd = linalg::thin_svd(&data.x, true)?;
    let n = data.n();
    let z_variances: Vec<f64> = svd.singulars.iter().map(|s| s * s).collect();
    // c_j = (1/n) z_jᵀ y with z_j = √n sigma_j u_j.
    let sqrt_n = (n as f64).sqrt();
    let uty = svd.left.matvec_t(&data.y);
    let response_cov: Vec<f64> = svd
        .singulars
        .iter()
        .zip(&uty)
        .map(|(s, uy)| s * uy * sqrt_n / n as f64)
        .collect();
    let regularized_variances = z_variances.iter().map(|v| v + mu).collect();
    Ok(SpectralDecomposition {
        svd,
        z_variances,
        response_cov,
        mu,
        regularized_variances,
        n,
        d: data.d(),
    })
}

/// Regularity statistics of one eigenfeature.
#[derive(Debug, Clone, Copy)]
pub struct FeatureRegularity {
    pub sigma2: f64,
    pub rho2: f64,
    /// `rho² / sigma²`; `tau` is the maximum of these.
    pub ratio: f64,
}

/// Per-eigenfeature regularity ratios and the boundedness constant.
#[derive(Debug, Clone)]
pub struct TauProfile {
    pub per_feature: Vec<FeatureRegularity>,
    pub tau: f64,
    /// Number of features skipped for having (near-)zero variance.
    pub omitted_zero_variance: usize,
}

/// `rho_j² = c_j² / sigma_j²` over features above the rank tolerance;
/// `tau = max_j rho_j² / sigma_j²`.
pub fn measure_tau(spec: &SpectralDecomposition) -> Result<TauProfile, ModelError> {
    let sigma1 = spec.z_variances.first().copied().unwrap_or(0.0);
    if sigma1 <= 0.0 {
        return Err(ModelError::AllZeroVariance);
    }
    let cutoff = RANK_REL_TOL * sigma1;
    let mut per_feature = Vec::new();
    let mut omitted = spec.d.saturating_sub(spec.z_variances.len());
    for (&s2, &c) in spec.z_variances.iter().zip(&spec.response_cov) {
        if s2 <= cutoff {
            omitted += 1;
            continue;
        }
        let rho2 = c * c / s2;
        per_feature.push(FeatureRegularity { sigma2: s2, rho2, ratio: rho2 / s2 });
    }
    if per_feature.is_empty() {
        return Err(ModelError::AllZeroVariance);
    }
    let tau = per_feature.iter().map(|f| f.ratio).fold(0.0, f64::max);
    Ok(TauProfile { per_feature, tau, omitted_zero_variance: omitted })
}

/// `r(zeta)`: number of eigenfeatures with variance strictly above `zeta`.
/// Counts over the ambient dimension (features beyond the rank have
/// variance zero).
pub fn count_above(spec: &SpectralDecomposition, zeta: f64) -> usize {
    assert!(zeta >= 0.0);
    spec.z_variances.iter().filter(|&&v| v > zeta).count()
}

/// One scatter point per nonzero-variance eigenfeature. The log axes
/// follow the figure convention: horizontal `log10(E[Z²]²)` and vertical
/// `log10(E[YZ]² / E[Z²]²)`; the plain `(sigma², rho²)` pair rides along.
#[derive(Debug, Clone, Copy)]
pub struct ScatterRow {
    pub j: usize,
    pub log10_h: f64,
    pub log10_v: f64,
    pub sigma2: f64,
    pub rho2: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct ScatterTable {
    pub rows: Vec<ScatterRow>,
    pub omitted_zero_variance: usize,
}

impl ScatterTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,log10_h,log10_v,sigma2,rho2,ratio\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.10},{:.10},{:.12e},{:.12e},{:.12e}",
                r.j, r.log10_h, r.log10_v, r.sigma2, r.rho2, r.ratio
            );
        }
        out
    }
}

pub fn export_scatter(profile: &TauProfile) -> ScatterTable {
    let rows = profile
        .per_feature
        .iter()
        .enumerate()
        .map(|(j, f)| {
            // E[YZ]² = rho² sigma²; vertical = log10(rho² sigma² / sigma⁴)
            // = log10(ratio), horizontal = log10(sigma⁴).
            let h = (f.sigma2 * f.sigma2).log10();
            let v = (f.rho2 / f.sigma2).max(f64::MIN_POSITIVE).log10();
            ScatterRow { j, log10_h: h, log10_v: v, sigma2: f.sigma2, rho2: f.rho2, ratio: f.ratio }
        })
        .collect();
    ScatterTable { rows, omitted_zero_variance: profile.omitted_zero_variance }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Dataset, SplitTag, SyntheticSpec};
    use crate::linalg::DenseMatrix;

    fn orthogonal_design() -> Dataset {
        // X = √n I: every eigenfeature has unit variance.
        let n = 3;
        let s = (n as f64).sqrt();
        let x = DenseMatrix::diag(&[s, s, s]);
        let y = vec![1.0, -1.0, 0.5];
        Dataset::from_parts(x, y, SplitTag::All)
    }

    #[test]
    fn decompose_identity_design() {
        let ds = orthogonal_design();
        let spec = decompose(&ds, 0.0).unwrap();
        for &v in &spec.z_variances {
            assert!((v - 1.0).abs() < 1e-12, "variance {v}");
        }
        // c_j = (1/n) z_jᵀ y with z columns ±√n e_j; |c_j| = |y_j|/√n.
        let mut measured: Vec<f64> = spec.response_cov.iter().map(|c| c.abs()).collect();
        measured.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let s = 3.0f64.sqrt();
        let mut expected: Vec<f64> = vec![1.0 / s, 1.0 / s, 0.5 / s];
        expected.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (m, e) in measured.iter().zip(&expected) {
            assert!((m - e).abs() < 1e-12);
        }
    }

    #[test]
    fn regularized_variances_shift_exactly() {
        let ds = orthogonal_design();
        let spec = decompose(&ds, 0.1).unwrap();
        for (l, v) in spec.regularized_variances.iter().zip(&spec.z_variances) {
            assert_eq!(*l, v + 0.1);
        }
    }

    #[test]
    fn decompose_recovers_synthetic_spectrum() {
        let gen = SyntheticSpec {
            n: 4000,
            d: 5,
            spectrum: vec![1.0, 0.6, 0.3, 0.1, 0.05],
            correlations: vec![0.4, 0.3, 0.2, 0.1, 0.02],
            noise_seed: 5,
        };
        let ds = generate_synthetic(&gen).unwrap();
        let spec = decompose(&ds, 0.0).unwrap();
        for (measured, target) in spec.z_variances.iter().zip(&gen.spectrum) {
            let rel = (measured - target).abs() / target;
            assert!(rel < 0.05, "variance {measured} vs {target}");
        }
        let profile = measure_tau(&spec).unwrap();
        for (f, rho) in profile.per_feature.iter().zip(&gen.correlations) {
            let target = rho * rho;
            if target > 1e-3 {
                let rel = (f.rho2 - target).abs() / target;
                assert!(rel < 0.10, "rho² {} vs {target}", f.rho2);
            }
        }
    }

    #[test]
    fn tau_of_perfectly_correlated_top_feature() {
        // y equals the top eigenfeature (both unit variance): rho² = 1 and
        // with sigma² = 1 the ratio is 1.
        let n = 4;
        let s = (n as f64).sqrt();
        let mut x = DenseMatrix::zeros(n, 1);
        let dirs = [0.5, -0.5, 0.5, -0.5]; // unit vector entries /1... orthonormal col
        for (i, &u) in dirs.iter().enumerate() {
            x.set(i, 0, s * u);
        }
        let y: Vec<f64> = dirs.iter().map(|&u| s * u).collect();
        let ds = Dataset::from_parts(x, y, SplitTag::All);
        let spec = decompose(&ds, 0.0).unwrap();
        let profile = measure_tau(&spec).unwrap();
        assert!((profile.per_feature[0].rho2 - 1.0).abs() < 1e-10);
        assert!((profile.tau - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tau_of_independent_response_is_small() {
        let gen = SyntheticSpec {
            n: 8000,
            d: 4,
            spectrum: vec![1.0, 0.5, 0.25, 0.125],
            correlations: vec![0.0; 4],
            noise_seed: 11,
        };
        let ds = generate_synthetic(&gen).unwrap();
        let profile = measure_tau(&decompose(&ds, 0.0).unwrap()).unwrap();
        assert!(profile.tau < 0.05, "tau = {}", profile.tau);
    }

    #[test]
    fn count_above_thresholds() {
        let gen = SyntheticSpec {
            n: 500,
            d: 3,
            spectrum: vec![1.0, 0.5, 0.01],
            correlations: vec![0.1, 0.1, 0.01],
            noise_seed: 3,
        };
        let spec = decompose(&generate_synthetic(&gen).unwrap(), 0.0).unwrap();
        assert_eq!(count_above(&spec, 0.0), 3);
        assert_eq!(count_above(&spec, 0.1), 2);
        assert_eq!(count_above(&spec, 2.0), 0);
    }

    #[test]
    fn scatter_point_log_arithmetic() {
        // sigma² = 1, c² = 0.01 → horizontal 0, vertical -2.
        let profile = TauProfile {
            per_feature: vec![FeatureRegularity { sigma2: 1.0, rho2: 0.01, ratio: 0.01 }],
            tau: 0.01,
            omitted_zero_variance: 1,
        };
        let table = export_scatter(&profile);
        assert_eq!(table.rows.len(), 1);
        assert!((table.rows[0].log10_h - 0.0).abs() < 1e-12);
        assert!((table.rows[0].log10_v + 2.0).abs() < 1e-12);
        assert_eq!(table.omitted_zero_variance, 1);
        let csv = table.to_csv();
        assert!(csv.starts_with("j,log10_h,log10_v,sigma2,rho2,ratio\n"));
    }

    #[test]
    fn zero_variance_feature_is_omitted_and_counted() {
        // Second column identically zero.
        let mut x = DenseMatrix::zeros(4, 2);
        for i in 0..4 {
            x.set(i, 0, (i as f64) - 1.5);
        }
        let ds = Dataset::from_parts(x, vec![1.0, -1.0, 1.0, -1.0], SplitTag::All);
        let profile = measure_tau(&decompose(&ds, 0.0).unwrap()).unwrap();
        assert_eq!(profile.per_feature.len(), 1);
        assert_eq!(profile.omitted_zero_variance, 1);
    }

    #[test]
    fn rank_zero_data_is_an_error() {
        let ds = Dataset::from_parts(DenseMatrix::zeros(3, 2), vec![1.0, 0.0, -1.0], SplitTag::All);
        let spec = decompose(&ds, 0.0).unwrap();
        assert!(matches!(measure_tau(&spec), Err(ModelError::AllZeroVariance)));
    }

    #[test]
    fn bessel_inequality_on_normalized_eigenfeatures() {
        // Σ rho_j² ≤ E[Y²]: projections of y onto orthonormal directions.
        for seed in 0..5 {
            let gen = SyntheticSpec {
                n: 300,
                d: 6,
                spectrum: vec![1.0, 0.8, 0.5, 0.2, 0.1, 0.05],
                correlations: vec![0.5, 0.3, 0.2, 0.1, 0.05, 0.0],
                noise_seed: seed,
            };
            let ds = generate_synthetic(&gen).unwrap();
            let profile = measure_tau(&decompose(&ds, 0.0).unwrap()).unwrap();
            let total: f64 = profile.per_feature.iter().map(|f| f.rho2).sum();
            assert!(total <= ds.y_second_moment() + 1e-6, "Bessel violated: {total}");
        }
    }

    #[test]
    fn spectrum_invariant_to_orthogonal_reparameterization() {
        use rand::SeedableRng;
        let gen = SyntheticSpec {
            n: 200,
            d: 4,
            spectrum: vec![1.0, 0.5, 0.2, 0.1],
            correlations: vec![0.3, 0.2, 0.1, 0.0],
            noise_seed: 9,
        };
        let ds = generate_synthetic(&gen).unwrap();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(77);
        let mut q = crate::data::gaussian_matrix(4, 4, &mut rng);
        crate::linalg::orthonormalize_columns(&mut q);
        let xq = ds.x.matmul(&q);
        let rotated = Dataset::from_parts(xq, ds.y.clone(), SplitTag::All);

        let p1 = measure_tau(&decompose(&ds, 0.0).unwrap()).unwrap();
        let p2 = measure_tau(&decompose(&rotated, 0.0).unwrap()).unwrap();
        assert_eq!(p1.per_feature.len(), p2.per_feature.len());
        for (a, b) in p1.per_feature.iter().zip(&p2.per_feature) {
            assert!((a.sigma2 - b.sigma2).abs() <= 1e-8 * a.sigma2.max(1.0));
            assert!((a.rho2 - b.rho2).abs() <= 1e-8 * a.rho2.max(1.0));
        }
    }
}
