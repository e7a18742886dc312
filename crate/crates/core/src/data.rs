//! Dataset ingestion and preparation: LIBSVM parsing, centering and
//! response standardization with a deterministic train/test split, synthetic
//! generators with controlled eigenfeature spectra, and a flat binary cache.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::linalg::{self, DenseMatrix};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("train fraction {0} outside (0, 1)")]
    BadTrainFraction(f64),
    #[error("infeasible synthetic spec: sum of squared correlations {0:.4} exceeds 1")]
    InfeasibleSpec(f64),
    #[error("invalid synthetic spec: {0}")]
    BadSpec(String),
    #[error("bad cache file: {0}")]
    BadCache(String),
}

// ── Raw LIBSVM data ────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub label: f64,
    /// 1-based feature indices, strictly increasing.
    pub features: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct RawDataset {
    pub rows: Vec<RawRow>,
    /// Largest feature index seen.
    pub dim: usize,
}

/// Parse LIBSVM text: one `label idx:val idx:val ...` sample per line.
/// Blank lines are skipped; `#` starts a comment.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<RawDataset, DataError> {
    let mut out = RawDataset::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let data = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = data.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue; // blank line
        };
        let label: f64 = label_tok
            .parse()
            .map_err(|_| DataError::Parse { line: lineno, reason: format!("bad label `{label_tok}`") })?;
        if !label.is_finite() {
            return Err(DataError::Parse { line: lineno, reason: "non-finite label".into() });
        }
        let mut features = Vec::new();
        let mut last_idx = 0usize;
        for tok in tokens {
            let Some(colon) = tok.find(':') else {
                return Err(DataError::Parse {
                    line: lineno,
                    reason: format!("token `{tok}` has no `:`"),
                });
            };
            let idx: usize = tok[..colon].parse().map_err(|_| DataError::Parse {
                line: lineno,
                reason: format!("bad feature index in `{tok}`"),
            })?;
            let val: f64 = tok[colon + 1..].parse().map_err(|_| DataError::Parse {
                line: lineno,
                reason: format!("bad feature value in `{tok}`"),
            })?;
            if idx == 0 {
                return Err(DataError::Parse { line: lineno, reason: "feature index 0 (indices are 1-based)".into() });
            }
            if idx <= last_idx {
                return Err(DataError::Parse {
                    line: lineno,
                    reason: format!("non-increasing feature index {idx} after {last_idx}"),
                });
            }
            if !val.is_finite() {
                return Err(DataError::Parse { line: lineno, reason: format!("non-finite value in `{tok}`") });
            }
            last_idx = idx;
            features.push((idx, val));
        }
        out.dim = out.dim.max(last_idx);
        out.rows.push(RawRow { label, features });
    }
    Ok(out)
}

/// Load a LIBSVM file; `.gz` paths are decompressed transparently.
pub fn load_libsvm_path<P: AsRef<Path>>(path: P) -> Result<RawDataset, DataError> {
    let path = path.as_ref();
    let file = File::open(path)?;
    if path.extension().map(|e| e == "gz").unwrap_or(false) {
        let gz = flate2::read::GzDecoder::new(file);
        parse_libsvm(BufReader::new(gz))
    } else {
        parse_libsvm(BufReader::new(file))
    }
}

// ── Prepared datasets ──────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Test,
    All,
}

/// Transform learned on the training split and applied to both splits.
#[derive(Debug, Clone)]
pub struct Preprocessing {
    pub feature_means: Vec<f64>,
    /// Per-feature divisors when feature scaling was requested, else empty.
    pub feature_scales: Vec<f64>,
    pub y_mean: f64,
    pub y_scale: f64,
    /// Train response was constant; `y_scale` was forced to 1.
    pub degenerate_response: bool,
}

/// Centered design matrix with a standardized response.
///
/// Variances here and everywhere downstream use the `1/n` (population)
/// convention, matching the expectation notation of the analysis.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DenseMatrix,
    pub y: Vec<f64>,
    pub preprocessing: Preprocessing,
    pub split: SplitTag,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    /// Wrap already-prepared matrices (synthetic pipelines, tests).
    pub fn from_parts(x: DenseMatrix, y: Vec<f64>, split: SplitTag) -> Self {
        assert_eq!(x.rows(), y.len());
        let d = x.cols();
        Dataset {
            x,
            y,
            preprocessing: Preprocessing {
                feature_means: vec![0.0; d],
                feature_scales: vec![],
                y_mean: 0.0,
                y_scale: 1.0,
                degenerate_response: false,
            },
            split,
        }
    }

    /// Population mean of `y²` (1 for a standardized response).
    pub fn y_second_moment(&self) -> f64 {
        self.y.iter().map(|v| v * v).sum::<f64>() / self.n() as f64
    }

    /// Re-encode as a raw dataset (dense rows become index:value pairs),
    /// feeding prepared data back through the split pipeline.
    pub fn to_raw(&self) -> RawDataset {
        let rows = (0..self.n())
            .map(|i| RawRow {
                label: self.y[i],
                features: self
                    .x
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j + 1, *v))
                    .collect(),
            })
            .collect();
        RawDataset { rows, dim: self.d() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PreprocessOptions {
    pub split_seed: u64,
    pub train_fraction: f64,
    /// Also divide features by their train-set standard deviation.
    pub scale_features: bool,
}

/// Densify, shuffle deterministically, split, then center features and
/// standardize the response using train statistics only.
pub fn preprocess(
    raw: &RawDataset,
    split_seed: u64,
    train_fraction: f64,
) -> Result<(Dataset, Dataset), DataError> {
    preprocess_with(raw, PreprocessOptions { split_seed, train_fraction, scale_features: false })
}

/// Center and standardize the whole dataset with no held-out split
/// (profiling pipelines).
pub fn preprocess_all(raw: &RawDataset, scale_features: bool) -> Result<Dataset, DataError> {
    let n = raw.rows.len();
    if n < 2 {
        return Err(DataError::TooFewRows { needed: 2, got: n });
    }
    let d = raw.dim;
    let mut x = DenseMatrix::zeros(n, d);
    let mut y = Vec::with_capacity(n);
    for (r, row) in raw.rows.iter().enumerate() {
        y.push(row.label);
        for &(idx, val) in &row.features {
            x.set(r, idx - 1, val);
        }
    }
    let nf = n as f64;
    let mut feature_means = vec![0.0; d];
    for r in 0..n {
        for (m, &v) in feature_means.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    for m in &mut feature_means {
        *m /= nf;
    }
    let mut feature_scales = Vec::new();
    if scale_features {
        let mut var = vec![0.0; d];
        for r in 0..n {
            for ((s, &m), &v) in var.iter_mut().zip(&feature_means).zip(x.row(r)) {
                *s += (v - m) * (v - m);
            }
        }
        feature_scales = var
            .iter()
            .map(|s| {
                let sd = (s / nf).sqrt();
                if sd < 1e-150 {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
    }
    let y_mean = y.iter().sum::<f64>() / nf;
    let y_var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / nf;
    let degenerate = y_var <= 0.0;
    let y_scale = if degenerate { 1.0 } else { y_var.sqrt() };
    for r in 0..n {
        for j in 0..d {
            let mut v = x.get(r, j) - feature_means[j];
            if !feature_scales.is_empty() {
                v /= feature_scales[j];
            }
            x.set(r, j, v);
        }
    }
    for v in y.iter_mut() {
        *v = (*v - y_mean) / y_scale;
    }
    Ok(Dataset {
        x,
        y,
        preprocessing: Preprocessing {
            feature_means,
            feature_scales,
            y_mean,
            y_scale,
            degenerate_response: degenerate,
        },
        split: SplitTag::All,
    })
}

pub fn preprocess_with(
    raw: &RawDataset,
    opts: PreprocessOptions,
) -> Result<(Dataset, Dataset), DataError> {
    if !(opts.train_fraction > 0.0 && opts.train_fraction < 1.0) {
        return Err(DataError::BadTrainFraction(opts.train_fraction));
    }
    let n = raw.rows.len();
    if n < 2 {
        return Err(DataError::TooFewRows { needed: 2, got: n });
    }
    let d = raw.dim;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(opts.split_seed);
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let n_train = ((n as f64 * opts.train_fraction).round() as usize).clamp(1, n);

    let densify = |indices: &[usize]| -> (DenseMatrix, Vec<f64>) {
        let mut x = DenseMatrix::zeros(indices.len(), d);
        let mut y = Vec::with_capacity(indices.len());
        for (r, &src) in indices.iter().enumerate() {
            let row = &raw.rows[src];
            y.push(row.label);
            for &(idx, val) in &row.features {
                x.set(r, idx - 1, val);
            }
        }
        (x, y)
    };
    let (mut x_train, mut y_train) = densify(&order[..n_train]);
    let (mut x_test, mut y_test) = densify(&order[n_train..]);

    // Train statistics.
    let nt = n_train as f64;
    let mut feature_means = vec![0.0; d];
    for r in 0..n_train {
        for (m, &v) in feature_means.iter_mut().zip(x_train.row(r)) {
            *m += v;
        }
    }
    for m in &mut feature_means {
        *m /= nt;
    }
    let y_mean = y_train.iter().sum::<f64>() / nt;
    let y_var = y_train.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / nt;
    let degenerate = y_var <= 0.0;
    let y_scale = if degenerate { 1.0 } else { y_var.sqrt() };

    let mut feature_scales = Vec::new();
    if opts.scale_features {
        let mut var = vec![0.0; d];
        for r in 0..n_train {
            for ((s, &m), &v) in var.iter_mut().zip(&feature_means).zip(x_train.row(r)) {
                *s += (v - m) * (v - m);
            }
        }
        feature_scales = var.iter().map(|s| (s / nt).sqrt().max(f64::MIN_POSITIVE.sqrt())).collect();
        // Constant features are left unscaled.
        for s in &mut feature_scales {
            if *s < 1e-150 {
                *s = 1.0;
            }
        }
    }

    let apply = |x: &mut DenseMatrix, y: &mut [f64]| {
        for r in 0..x.rows() {
            for j in 0..d {
                let mut v = x.get(r, j) - feature_means[j];
                if !feature_scales.is_empty() {
                    v /= feature_scales[j];
                }
                x.set(r, j, v);
            }
        }
        for v in y.iter_mut() {
            *v = (*v - y_mean) / y_scale;
        }
    };
    apply(&mut x_train, &mut y_train);
    apply(&mut x_test, &mut y_test);

    let prep = Preprocessing {
        feature_means,
        feature_scales,
        y_mean,
        y_scale,
        degenerate_response: degenerate,
    };
    Ok((
        Dataset { x: x_train, y: y_train, preprocessing: prep.clone(), split: SplitTag::Train },
        Dataset { x: x_test, y: y_test, preprocessing: prep, split: SplitTag::Test },
    ))
}

// ── Synthetic generation ───────────────────────────────────────────────

/// Target spectrum and response correlations for a synthetic dataset.
///
/// The generated data satisfies, up to sampling noise: eigenfeature
/// variances equal to `spectrum`, response correlation with eigenfeature
/// `j` equal to `correlations[j]`, and a unit-variance response.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    /// Target eigenfeature variances, descending.
    pub spectrum: Vec<f64>,
    /// Target correlation coefficients `rho_j` (not squared).
    pub correlations: Vec<f64>,
    pub noise_seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.d == 0 || self.n <= self.d {
            return Err(DataError::BadSpec(format!("need n > d > 0, got n={}, d={}", self.n, self.d)));
        }
        if self.spectrum.len() != self.d || self.correlations.len() != self.d {
            return Err(DataError::BadSpec("spectrum/correlations length must equal d".into()));
        }
        let mut prev = f64::INFINITY;
        for &s in &self.spectrum {
            if !(s >= 0.0) || s > prev {
                return Err(DataError::BadSpec("spectrum must be nonnegative and descending".into()));
            }
            prev = s;
        }
        let mut total = 0.0;
        for &r in &self.correlations {
            let r2 = r * r;
            if !(0.0..=1.0).contains(&r2) {
                return Err(DataError::BadSpec("correlations must satisfy 0 <= rho^2 <= 1".into()));
            }
            total += r2;
        }
        if total > 1.0 {
            return Err(DataError::InfeasibleSpec(total));
        }
        Ok(())
    }

    /// Sum of squared correlations (response variance explained).
    pub fn explained(&self) -> f64 {
        self.correlations.iter().map(|r| r * r).sum()
    }

    /// A boundedness-regular preset: variances decay geometrically from 1
    /// to `1/cond`, and squared correlations are
    /// `tau * min(sigma_j², zeta_ref)` with `zeta_ref` the median variance.
    /// The regularity ratio then equals `tau` on every eigenfeature at or
    /// below the median and drops off above it, so the suboptimality
    /// envelopes dominate coordinate-wise for every threshold
    /// `zeta >= zeta_ref` (see [`SyntheticSpec::envelope_zeta_floor`]).
    pub fn tau_regular(n: usize, d: usize, tau: f64, cond: f64, seed: u64) -> SyntheticSpec {
        assert!(d >= 2 && cond > 1.0 && tau > 0.0);
        let spectrum: Vec<f64> = (0..d)
            .map(|j| (-(j as f64) / (d as f64 - 1.0) * cond.ln()).exp())
            .collect();
        let zeta_ref = spectrum[d / 2];
        let correlations: Vec<f64> =
            spectrum.iter().map(|s| (tau * s.min(zeta_ref)).sqrt()).collect();
        let spec = SyntheticSpec { n, d, spectrum, correlations, noise_seed: seed };
        debug_assert!(spec.explained() <= 1.0, "tau_regular preset infeasible");
        spec
    }

    /// Smallest envelope threshold with coordinate-wise bound dominance on
    /// [`SyntheticSpec::tau_regular`] data: the median target variance.
    pub fn envelope_zeta_floor(&self) -> f64 {
        self.spectrum[self.d / 2]
    }
}

fn standard_normal(rng: &mut ChaCha20Rng) -> f64 {
    // Box-Muller; one value per call keeps the stream order obvious.
    loop {
        let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = (-2.0 * u.ln()).sqrt();
        let z = r * v.cos();
        if z.is_finite() {
            return z;
        }
    }
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha20Rng) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m.set(i, j, standard_normal(rng));
        }
    }
    m
}

/// Build `X = √n · U diag(sigma) Vᵀ` from random orthonormal factors and
/// `y = Σ_j rho_j √n u_j + residual noise`, then center and standardize.
///
/// The left factor and the residual are drawn orthogonal to the all-ones
/// vector and to each other, so the generated data hits the target
/// spectrum and correlations exactly (up to rounding) rather than only in
/// expectation: the centering/standardization pass is then a no-op.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset, DataError> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let mut rng = ChaCha20Rng::seed_from_u64(spec.noise_seed);

    let mut u = gaussian_matrix(n, d, &mut rng);
    center_columns(&mut u);
    linalg::orthonormalize_columns(&mut u);
    let mut v = gaussian_matrix(d, d, &mut rng);
    linalg::orthonormalize_columns(&mut v);

    let sqrt_n = (n as f64).sqrt();
    let mut x = DenseMatrix::zeros(n, d);
    for k in 0..d {
        let sv = sqrt_n * spec.spectrum[k].sqrt();
        for i in 0..n {
            let a = u.get(i, k) * sv;
            if a != 0.0 {
                for j in 0..d {
                    let val = x.get(i, j) + a * v.get(j, k);
                    x.set(i, j, val);
                }
            }
        }
    }

    // Residual direction orthogonal to 1 and to every u_j, unit population
    // variance.
    let mut noise: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
    let mean = noise.iter().sum::<f64>() / n as f64;
    for v in noise.iter_mut() {
        *v -= mean;
    }
    for k in 0..d {
        let col = u.column(k);
        let coef = linalg::dot(&noise, &col);
        linalg::axpy(-coef, &col, &mut noise);
    }
    let nrm = linalg::norm2(&noise);
    for v in noise.iter_mut() {
        *v *= sqrt_n / nrm.max(f64::MIN_POSITIVE);
    }

    // y = Σ rho_j (√n u_j) + eps·noise has unit variance by construction.
    let explained = spec.explained();
    let eps = (1.0 - explained).max(0.0).sqrt();
    let mut y = vec![0.0; n];
    for (j, &rho) in spec.correlations.iter().enumerate() {
        if rho != 0.0 {
            let col = u.column(j);
            linalg::axpy(rho * sqrt_n, &col, &mut y);
        }
    }
    linalg::axpy(eps, &noise, &mut y);

    // Safety pass through the real-data standardization; removes fp-level
    // residual mean/variance drift.
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let y_var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n as f64;
    let y_scale = if y_var > 0.0 { y_var.sqrt() } else { 1.0 };
    for yi in y.iter_mut() {
        *yi = (*yi - y_mean) / y_scale;
    }

    Ok(Dataset {
        x,
        y,
        preprocessing: Preprocessing {
            feature_means: vec![0.0; d],
            feature_scales: vec![],
            y_mean,
            y_scale,
            degenerate_response: y_var <= 0.0,
        },
        split: SplitTag::All,
    })
}

fn center_columns(m: &mut DenseMatrix) {
    let (rows, cols) = (m.rows(), m.cols());
    for j in 0..cols {
        let mean: f64 = (0..rows).map(|i| m.get(i, j)).sum::<f64>() / rows as f64;
        for i in 0..rows {
            let v = m.get(i, j) - mean;
            m.set(i, j, v);
        }
    }
}

// ── Binary cache ───────────────────────────────────────────────────────

const CACHE_MAGIC: &[u8; 5] = b"HOPT1";

/// Write the numeric content as: magic, n and d as u64 LE, row-major `x`
/// as f64 LE, then `y`. Bit-exact round trip.
pub fn write_cache<W: Write>(w: &mut W, data: &Dataset) -> Result<(), DataError> {
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&(data.n() as u64).to_le_bytes())?;
    w.write_all(&(data.d() as u64).to_le_bytes())?;
    for v in data.x.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in &data.y {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_cache<R: Read>(r: &mut R) -> Result<Dataset, DataError> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(DataError::BadCache("bad magic".into()));
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let n = u64::from_le_bytes(buf8) as usize;
    r.read_exact(&mut buf8)?;
    let d = u64::from_le_bytes(buf8) as usize;
    if n.checked_mul(d).is_none() {
        return Err(DataError::BadCache("dimensions overflow".into()));
    }
    let mut x = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        r.read_exact(&mut buf8)?;
        x.push(f64::from_le_bytes(buf8));
    }
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut buf8)?;
        y.push(f64::from_le_bytes(buf8));
    }
    Ok(Dataset::from_parts(DenseMatrix::from_vec(n, d, x), y, SplitTag::All))
}

pub fn write_cache_path<P: AsRef<Path>>(path: P, data: &Dataset) -> Result<(), DataError> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    write_cache(&mut f, data)
}

pub fn read_cache_path<P: AsRef<Path>>(path: P) -> Result<Dataset, DataError> {
    let mut f = BufReader::new(File::open(path)?);
    read_cache(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_single_row() {
        let raw = parse_libsvm("+1 1:0.5 3:-2\n".as_bytes()).unwrap();
        assert_eq!(raw.rows.len(), 1);
        assert_eq!(raw.dim, 3);
        assert_eq!(raw.rows[0].label, 1.0);
        assert_eq!(raw.rows[0].features, vec![(1, 0.5), (3, -2.0)]);
    }

    #[test]
    fn parse_empty_input() {
        let raw = parse_libsvm("".as_bytes()).unwrap();
        assert_eq!(raw.rows.len(), 0);
        assert_eq!(raw.dim, 0);
    }

    #[test]
    fn parse_rejects_non_increasing_indices() {
        let err = parse_libsvm("-1 2:1 1:1\n".as_bytes()).unwrap_err();
        match err {
            DataError::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_malformed_tokens() {
        assert!(parse_libsvm("1 nocolon\n".as_bytes()).is_err());
        assert!(parse_libsvm("abc 1:1\n".as_bytes()).is_err());
        assert!(parse_libsvm("1 1:nan\n".as_bytes()).is_err());
    }

    #[test]
    fn preprocess_two_rows_hand_standardization() {
        // Labels {0, 2} both forced into train: mean 1, population std 1,
        // so y becomes (-1, 1) in some shuffle order.
        let raw = parse_libsvm("0 1:1\n2 1:2\n".as_bytes()).unwrap();
        let (train, test) = preprocess(&raw, 3, 0.9).unwrap();
        assert_eq!(train.n(), 2);
        assert_eq!(test.n(), 0);
        let mut ys = train.y.clone();
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ys[0] + 1.0).abs() < 1e-12 && (ys[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn preprocess_split_sizes() {
        let text: String = (0..10).map(|i| format!("{i} 1:{i}\n")).collect();
        let (train, test) = preprocess(&parse_libsvm(text.as_bytes()).unwrap(), 0, 0.8).unwrap();
        assert_eq!(train.n(), 8);
        assert_eq!(test.n(), 2);
    }

    #[test]
    fn preprocess_centers_and_standardizes() {
        let text = "1 1:4 2:-1\n3 1:6 2:3\n5 1:2 2:1\n7 1:0 2:5\n";
        let (train, _) = preprocess(&parse_libsvm(text.as_bytes()).unwrap(), 1, 0.99).unwrap();
        let n = train.n() as f64;
        for j in 0..train.d() {
            let mean: f64 = (0..train.n()).map(|i| train.x.get(i, j)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-12, "column {j} mean {mean}");
        }
        let ym: f64 = train.y.iter().sum::<f64>() / n;
        let yv: f64 = train.y.iter().map(|v| (v - ym) * (v - ym)).sum::<f64>() / n;
        assert!(ym.abs() < 1e-12);
        assert!((yv - 1.0).abs() < 1e-12);
    }

    #[test]
    fn preprocess_is_idempotent() {
        let text = "1 1:4 2:-1\n3 1:6 2:3\n5 1:2 2:1\n7 1:0 2:5\n";
        let (train, _) = preprocess(&parse_libsvm(text.as_bytes()).unwrap(), 1, 0.99).unwrap();
        // Re-encode the prepared data as a raw dataset and preprocess again.
        let rows: Vec<RawRow> = (0..train.n())
            .map(|i| RawRow {
                label: train.y[i],
                features: (0..train.d()).map(|j| (j + 1, train.x.get(i, j))).collect(),
            })
            .collect();
        let raw = RawDataset { rows, dim: train.d() };
        let (again, _) = preprocess(&raw, 99, 0.999).unwrap();
        // Same multiset of rows regardless of shuffle; compare sorted copies.
        let collect = |ds: &Dataset| {
            let mut rows: Vec<Vec<i64>> = (0..ds.n())
                .map(|i| {
                    let mut r: Vec<i64> =
                        ds.x.row(i).iter().map(|v| (v * 1e12).round() as i64).collect();
                    r.push((ds.y[i] * 1e12).round() as i64);
                    r
                })
                .collect();
            rows.sort();
            rows
        };
        assert_eq!(collect(&train), collect(&again));
    }

    #[test]
    fn preprocess_all_keeps_every_row() {
        let text: String = (0..37).map(|i| format!("{} 1:{}\n", i % 5, i)).collect();
        let raw = parse_libsvm(text.as_bytes()).unwrap();
        let all = preprocess_all(&raw, false).unwrap();
        assert_eq!(all.n(), 37);
        let mean: f64 = all.y.iter().sum::<f64>() / 37.0;
        assert!(mean.abs() < 1e-12);
        let scaled = preprocess_all(&raw, true).unwrap();
        let var0: f64 = (0..37).map(|i| scaled.x.get(i, 0).powi(2)).sum::<f64>() / 37.0;
        assert!((var0 - 1.0).abs() < 1e-10, "scaled feature variance {var0}");
    }

    #[test]
    fn degenerate_response_is_flagged() {
        let raw = parse_libsvm("1 1:1\n1 1:2\n1 1:3\n".as_bytes()).unwrap();
        let (train, _) = preprocess(&raw, 0, 0.99).unwrap();
        assert!(train.preprocessing.degenerate_response);
        assert_eq!(train.preprocessing.y_scale, 1.0);
        assert!(train.y.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn synthetic_rejects_infeasible_correlations() {
        let spec = SyntheticSpec {
            n: 100,
            d: 2,
            spectrum: vec![1.0, 0.5],
            correlations: vec![0.9, 0.9], // 0.81 + 0.81 > 1
            noise_seed: 0,
        };
        assert!(matches!(generate_synthetic(&spec), Err(DataError::InfeasibleSpec(_))));
    }

    #[test]
    fn synthetic_single_uncorrelated_feature() {
        let spec = SyntheticSpec {
            n: 5000,
            d: 1,
            spectrum: vec![1.0],
            correlations: vec![0.0],
            noise_seed: 42,
        };
        let ds = generate_synthetic(&spec).unwrap();
        let n = ds.n() as f64;
        let col = ds.x.column(0);
        let c: f64 = col.iter().zip(&ds.y).map(|(x, y)| x * y).sum::<f64>() / n;
        let var: f64 = col.iter().map(|x| x * x).sum::<f64>() / n;
        let rho2 = c * c / var;
        assert!(rho2 < 0.05, "rho^2 = {rho2}");
    }

    #[test]
    fn cache_roundtrip_is_bit_exact() {
        let spec = SyntheticSpec {
            n: 20,
            d: 3,
            spectrum: vec![1.0, 0.5, 0.1],
            correlations: vec![0.3, 0.2, 0.05],
            noise_seed: 7,
        };
        let ds = generate_synthetic(&spec).unwrap();
        let mut buf = Vec::new();
        write_cache(&mut buf, &ds).unwrap();
        let back = read_cache(&mut buf.as_slice()).unwrap();
        assert_eq!(ds.x.data(), back.x.data());
        assert_eq!(ds.y, back.y);
    }

    #[test]
    fn cache_rejects_bad_magic() {
        let err = read_cache(&mut &b"WRONG\0\0\0\0\0\0\0\0"[..]).unwrap_err();
        assert!(matches!(err, DataError::BadCache(_)));
    }

    #[test]
    fn gzip_path_roundtrip() {
        let dir = std::env::temp_dir().join(format!("hopt-gz-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("toy.txt.gz");
        let mut enc =
            flate2::write::GzEncoder::new(File::create(&path).unwrap(), flate2::Compression::fast());
        enc.write_all(b"+1 1:0.5 3:-2\n-1 2:1\n").unwrap();
        enc.finish().unwrap();
        let raw = load_libsvm_path(&path).unwrap();
        assert_eq!(raw.rows.len(), 2);
        assert_eq!(raw.dim, 3);
        std::fs::remove_dir_all(&dir).ok();
    }
}
