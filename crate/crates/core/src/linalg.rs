//! Minimal dense linear algebra: matrix/vector arithmetic, symmetric
//! eigendecomposition, thin SVD and positive-definite solves.
//!
//! Everything downstream works on small dense matrices (hundreds of rows,
//! occasionally a few thousand), so the implementations favour accuracy and
//! simplicity over speed: cyclic Jacobi rotations for eigenpairs, the Gram
//! matrix of the smaller side for the SVD, and an unblocked Cholesky.

/// Default convergence threshold for the Jacobi sweep, relative to the
/// Frobenius norm of the input.
pub const JACOBI_TOL: f64 = 1e-12;
/// Absolute symmetry tolerance accepted by [`sym_eig`].
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Singular values below `RANK_TOL * sigma_max` are truncated to define rank.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {diff:.3e}")]
    NonSymmetric { i: usize, j: usize, diff: f64 },
    #[error("matrix contains a non-finite entry at ({i},{j})")]
    NonFinite { i: usize, j: usize },
    #[error("matrix is not positive definite (pivot {pivot:.3e} at column {col})")]
    NotPositiveDefinite { col: usize, pivot: f64 },
    #[error("Jacobi sweep did not converge after {0} sweeps")]
    NoConvergence(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in entries.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> Result<(), LinalgError> {
        for i in 0..self.rows {
            for j in 0..self.cols {
                if !self.get(i, j).is_finite() {
                    return Err(LinalgError::NonFinite { i, j });
                }
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `self * v`
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            out[i] = dot(self.row(i), v);
        }
        out
    }

    /// `selfᵀ * v`
    pub fn matvec_t(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            if vi != 0.0 {
                for (o, &x) in out.iter_mut().zip(self.row(i)) {
                    *o += vi * x;
                }
            }
        }
        out
    }

    /// `self * other`
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a != 0.0 {
                    for j in 0..other.cols {
                        out.data[i * out.cols + j] += a * other.get(k, j);
                    }
                }
            }
        }
        out
    }

    /// Gram matrix `selfᵀ * self / scale`, built exactly symmetric.
    pub fn gram(&self, scale: f64) -> DenseMatrix {
        let d = self.cols;
        let mut g = DenseMatrix::zeros(d, d);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..d {
                let xi = row[i];
                if xi != 0.0 {
                    for j in i..d {
                        g.data[i * d + j] += xi * row[j];
                    }
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                let v = g.get(i, j) / scale;
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }

    /// Outer Gram matrix `self * selfᵀ / scale`.
    pub fn gram_outer(&self, scale: f64) -> DenseMatrix {
        let n = self.rows;
        let mut g = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(self.row(i), self.row(j)) / scale;
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }

    pub fn add_diag(&mut self, v: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            let x = self.get(i, i) + v;
            self.set(i, i, x);
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

// ── Vector helpers ─────────────────────────────────────────────────────

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ── Symmetric eigendecomposition ───────────────────────────────────────

/// Eigendecomposition of a symmetric matrix: `A = V diag(values) Vᵀ`.
///
/// `values` are sorted descending and the columns of `vectors` are the
/// matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl SymEig {
    /// Reconstruct `V diag(values) Vᵀ`, for residual checks.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.values.len();
        let mut out = DenseMatrix::zeros(n, n);
        for k in 0..n {
            let w = self.values[k];
            for i in 0..n {
                let vik = self.vectors.get(i, k);
                if vik != 0.0 {
                    for j in 0..n {
                        let v = out.get(i, j) + w * vik * self.vectors.get(j, k);
                        out.set(i, j, v);
                    }
                }
            }
        }
        out
    }

    /// `A⁻¹ b` through the spectral factors. Zero eigenvalues are rejected
    /// by the caller; this is the test oracle for [`solve_spd`].
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.values.len();
        assert_eq!(b.len(), n);
        let mut out = vec![0.0; n];
        for k in 0..n {
            let col = self.vectors.column(k);
            let coef = dot(&col, b) / self.values[k];
            axpy(coef, &col, &mut out);
        }
        out
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Converges when the off-diagonal Frobenius norm drops below
/// `JACOBI_TOL * ||A||_F`. Deterministic for a fixed input.
pub fn sym_eig(a: &DenseMatrix) -> Result<SymEig, LinalgError> {
    sym_eig_with(a, JACOBI_TOL)
}

pub fn sym_eig_with(a: &DenseMatrix, tol: f64) -> Result<SymEig, LinalgError> {
    if a.rows() != a.cols() {
        return Err(LinalgError::DimensionMismatch { expected: a.rows(), got: a.cols() });
    }
    a.is_finite()?;
    let n = a.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (a.get(i, j) - a.get(j, i)).abs();
            if diff > SYMMETRY_TOL {
                return Err(LinalgError::NonSymmetric { i, j, diff });
            }
        }
    }
    if n == 0 {
        return Ok(SymEig { values: vec![], vectors: DenseMatrix::zeros(0, 0) });
    }

    let mut m = a.clone();
    // Work on an exactly symmetric copy.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m.get(i, j) + m.get(j, i));
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    let mut v = DenseMatrix::identity(n);
    let fro = m.frobenius();
    let threshold = tol * fro.max(f64::MIN_POSITIVE);

    const MAX_SWEEPS: usize = 100;
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += 2.0 * m.get(i, j) * m.get(i, j);
            }
        }
        if off.sqrt() <= threshold {
            return Ok(sorted_eig(m, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                // Rotation annihilating (p, q); tau form is stable for
                // nearly equal diagonal entries.
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;

                m.set(p, p, app - h);
                m.set(q, q, aqq + h);
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);
                for k in 0..n {
                    if k != p && k != q {
                        let akp = m.get(k, p);
                        let akq = m.get(k, q);
                        let np = akp - s * (akq + tau * akp);
                        let nq = akq + s * (akp - tau * akq);
                        m.set(k, p, np);
                        m.set(p, k, np);
                        m.set(k, q, nq);
                        m.set(q, k, nq);
                    }
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp - s * (vkq + tau * vkp));
                    v.set(k, q, vkq + s * (vkp - tau * vkq));
                }
            }
        }
    }
    Err(LinalgError::NoConvergence(MAX_SWEEPS))
}

fn sorted_eig(m: DenseMatrix, v: DenseMatrix) -> SymEig {
    let n = m.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).unwrap());
    let mut values = Vec::with_capacity(n);
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(m.get(src, src));
        for r in 0..n {
            vectors.set(r, dst, v.get(r, src));
        }
    }
    let eig = SymEig { values, vectors };
    #[cfg(debug_assertions)]
    {
        // The original matrix has been rotated away; orthonormality of V is
        // the invariant still checkable here.
        let mut ortho = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for r in 0..n {
                    s += eig.vectors.get(r, i) * eig.vectors.get(r, j);
                }
                let target = if i == j { 1.0 } else { 0.0 };
                ortho = ortho.max((s - target).abs());
            }
        }
        debug_assert!(ortho <= 1e-10, "eigenvector orthonormality drift {ortho:.3e}");
    }
    eig
}

// ── Thin SVD ───────────────────────────────────────────────────────────

/// Thin singular value decomposition `X = s · U Σ Vᵀ` with `s = √n` when
/// `scaled` (so that `XᵀX = n V Σ² Vᵀ`) and `s = 1` otherwise.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// `n × r`, orthonormal columns.
    pub left: DenseMatrix,
    /// `r` singular values, descending, strictly above the rank cutoff.
    pub singulars: Vec<f64>,
    /// `d × r`, orthonormal columns.
    pub right: DenseMatrix,
    pub scaled: bool,
}

impl ThinSvd {
    pub fn rank(&self) -> usize {
        self.singulars.len()
    }

    /// `s · U Σ Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.left.rows();
        let d = self.right.rows();
        let s = if self.scaled { (n as f64).sqrt() } else { 1.0 };
        let mut out = DenseMatrix::zeros(n, d);
        for k in 0..self.rank() {
            let sv = s * self.singulars[k];
            for i in 0..n {
                let u = self.left.get(i, k) * sv;
                if u != 0.0 {
                    for j in 0..d {
                        let v = out.get(i, j) + u * self.right.get(j, k);
                        out.set(i, j, v);
                    }
                }
            }
        }
        out
    }
}

/// Thin SVD computed through the symmetric eigendecomposition of the
/// smaller Gram matrix (`XᵀX` when `d ≤ n`, else `XXᵀ`), recovering the
/// other factor by projection. Singular values below
/// `RANK_TOL * sigma_max` are truncated.
pub fn thin_svd(x: &DenseMatrix, scaled: bool) -> Result<ThinSvd, LinalgError> {
    x.is_finite()?;
    let (n, d) = (x.rows(), x.cols());
    let s = if scaled { (n.max(1) as f64).sqrt() } else { 1.0 };
    let gram_scale = s * s;

    let (values, vectors, right_side) = if d <= n {
        let e = sym_eig(&x.gram(gram_scale))?;
        (e.values, e.vectors, true)
    } else {
        let e = sym_eig(&x.gram_outer(gram_scale))?;
        (e.values, e.vectors, false)
    };

    let sigma_max = values.first().copied().unwrap_or(0.0).max(0.0).sqrt();
    let cutoff = RANK_TOL * sigma_max;
    let mut singulars = Vec::new();
    for &w in &values {
        let sv = w.max(0.0).sqrt();
        if sv > cutoff && sv > 0.0 {
            singulars.push(sv);
        }
    }
    let r = singulars.len();

    if right_side {
        // vectors are V (d × d); U = X V Σ⁻¹ / s
        let mut right = DenseMatrix::zeros(d, r);
        for k in 0..r {
            for i in 0..d {
                right.set(i, k, vectors.get(i, k));
            }
        }
        let mut left = DenseMatrix::zeros(n, r);
        for k in 0..r {
            let col = right.column(k);
            let inv = 1.0 / (s * singulars[k]);
            for i in 0..n {
                left.set(i, k, dot(x.row(i), &col) * inv);
            }
        }
        Ok(ThinSvd { left, singulars, right, scaled })
    } else {
        // vectors are U (n × n); V = Xᵀ U Σ⁻¹ / s
        let mut left = DenseMatrix::zeros(n, r);
        for k in 0..r {
            for i in 0..n {
                left.set(i, k, vectors.get(i, k));
            }
        }
        let mut right = DenseMatrix::zeros(d, r);
        for k in 0..r {
            let col = left.column(k);
            let proj = x.matvec_t(&col);
            let inv = 1.0 / (s * singulars[k]);
            for j in 0..d {
                right.set(j, k, proj[j] * inv);
            }
        }
        Ok(ThinSvd { left, singulars, right, scaled })
    }
}

// ── SPD solves ─────────────────────────────────────────────────────────

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
pub fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, got: a.cols() });
    }
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(LinalgError::NotPositiveDefinite { col: j, pivot: sum });
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Solve `A x = b` for symmetric positive-definite `A` via Cholesky.
pub fn solve_spd(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = a.rows();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, got: b.len() });
    }
    let l = cholesky(a)?;
    Ok(cholesky_solve(&l, b))
}

/// Solve with an existing Cholesky factor.
pub fn cholesky_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l.get(i, k) * y[k];
        }
        y[i] = sum / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l.get(k, i) * x[k];
        }
        x[i] = sum / l.get(i, i);
    }
    x
}

/// Orthonormalize the columns of `m` in place with modified Gram-Schmidt,
/// run twice for numerical safety. Columns are assumed independent (random
/// Gaussian draws in practice).
pub fn orthonormalize_columns(m: &mut DenseMatrix) {
    let (rows, cols) = (m.rows(), m.cols());
    for _pass in 0..2 {
        for j in 0..cols {
            let mut col = m.column(j);
            for k in 0..j {
                let other = m.column(k);
                let coef = dot(&col, &other);
                axpy(-coef, &other, &mut col);
            }
            let nrm = norm2(&col);
            assert!(nrm > 0.0, "rank-deficient basis draw");
            for i in 0..rows {
                m.set(i, j, col[i] / nrm);
            }
        }
    }
}
