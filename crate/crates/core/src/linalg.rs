//! Small dense kernels: sample covariance, cyclic Jacobi eigendecomposition
//! and Pearson correlation.
//!
//! Every matrix handled here is a local covariance over a handful of features,
//! so the routines favour determinism and robustness over asymptotic speed.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Largest matrix `eig_sym` accepts by default.
pub const DEFAULT_EIG_LIMIT: usize = 64;

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;

/// Square symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DegenerateSample("matrix dimension must be positive".into()));
        }
        Ok(Self { dim, entries: vec![0.0; dim * dim] })
    }

    /// Builds a matrix from row-major entries, replacing each off-diagonal
    /// pair by its mean so the result is exactly symmetric.
    pub fn from_row_major(dim: usize, mut entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DegenerateSample("matrix dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (entries[i * dim + j] + entries[j * dim + i]);
                entries[i * dim + j] = avg;
                entries[j * dim + i] = avg;
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }
}

/// Eigenpairs of a symmetric matrix, values in non-increasing order.
///
/// Vectors are stored contiguously: vector `j` occupies
/// `vectors[j * dim..(j + 1) * dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPack {
    dim: usize,
    values: Vec<f64>,
    vectors: Vec<f64>,
}

impl EigenPack {
    pub fn from_parts(dim: usize, values: Vec<f64>, vectors: Vec<f64>) -> Result<Self> {
        if vectors.len() != values.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: values.len() * dim,
                found: vectors.len(),
            });
        }
        if values.len() > dim {
            return Err(Error::DimensionMismatch { expected: dim, found: values.len() });
        }
        Ok(Self { dim, values, vectors })
    }

    /// Number of eigenpairs held.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Length of each eigenvector.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.dim..(j + 1) * self.dim]
    }

    pub fn vectors_flat(&self) -> &[f64] {
        &self.vectors
    }

    /// Keeps the leading `n` eigenpairs.
    pub fn truncate(&mut self, n: usize) {
        let n = n.min(self.values.len());
        self.values.truncate(n);
        self.vectors.truncate(n * self.dim);
    }

    /// Clamps every eigenvalue to at least `relative * largest`, using 1 in
    /// place of the largest value when no eigenvalue is positive.
    pub fn apply_floor(&mut self, relative: f64) {
        let largest = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let base = if largest > 0.0 { largest } else { 1.0 };
        let floor = relative * base;
        for v in &mut self.values {
            if v.is_nan() || *v < floor {
                *v = floor;
            }
        }
    }

    /// `Σ_j |diff · v_j| / √e_j` over the leading `n` eigenpairs.
    pub fn normalized_projection(&self, diff: &[f64], n: usize) -> f64 {
        debug_assert_eq!(diff.len(), self.dim);
        let mut total = 0.0;
        for (j, &value) in self.values.iter().enumerate().take(n) {
            let proj = dot(diff, self.vector(j));
            total += proj.abs() / value.sqrt();
        }
        total
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Unbiased sample covariance `1/(m-1) Σ (x-μ)(x-μ)ᵀ`.
///
/// Samples are accumulated in lexicographic order, so the result does not
/// depend on the order in which they are passed.
pub fn covariance<S: AsRef<[f64]>>(samples: &[S]) -> Result<SymmetricMatrix> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::DegenerateSample(format!("covariance needs at least 2 samples, got {m}")));
    }
    let dim = samples[0].as_ref().len();
    if dim == 0 {
        return Err(Error::DegenerateSample("samples have zero dimension".into()));
    }
    if let Some(bad) = samples.iter().find(|s| s.as_ref().len() != dim) {
        return Err(Error::DegenerateSample(format!(
            "sample dimensions disagree ({dim} vs {})",
            bad.as_ref().len()
        )));
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| lexicographic(samples[a].as_ref(), samples[b].as_ref()));

    let mut mean = vec![0.0; dim];
    for &i in &order {
        for (acc, x) in mean.iter_mut().zip(samples[i].as_ref()) {
            *acc += x;
        }
    }
    for v in &mut mean {
        *v /= m as f64;
    }

    let mut entries = vec![0.0; dim * dim];
    let mut centered = vec![0.0; dim];
    for &i in &order {
        for ((c, x), mu) in centered.iter_mut().zip(samples[i].as_ref()).zip(&mean) {
            *c = x - mu;
        }
        for r in 0..dim {
            for c in r..dim {
                entries[r * dim + c] += centered[r] * centered[c];
            }
        }
    }
    let scale = 1.0 / (m as f64 - 1.0);
    for r in 0..dim {
        for c in r..dim {
            let v = entries[r * dim + c] * scale;
            entries[r * dim + c] = v;
            entries[c * dim + r] = v;
        }
    }
    Ok(SymmetricMatrix { dim, entries })
}

/// Full eigendecomposition with the default size limit.
pub fn eig_sym(matrix: &SymmetricMatrix) -> Result<EigenPack> {
    eig_sym_with_limit(matrix, DEFAULT_EIG_LIMIT)
}

/// Cyclic Jacobi eigendecomposition.
///
/// Eigenvalues come back sorted descending (ties keep diagonal order) and
/// each eigenvector is signed so its largest-magnitude component is positive.
pub fn eig_sym_with_limit(matrix: &SymmetricMatrix, limit: usize) -> Result<EigenPack> {
    let n = matrix.dim;
    if n > limit {
        return Err(Error::DimensionTooLarge { dim: n, limit });
    }
    let mut a = matrix.entries.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = OFF_DIAGONAL_TOLERANCE * norm;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(&a, n);
        if off <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, n, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&a, n) > threshold {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y * n + y].total_cmp(&a[x * n + x]).then(x.cmp(&y)));

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * n);
    for &col in &order {
        values.push(a[col * n + col]);
        let start = vectors.len();
        vectors.extend((0..n).map(|row| v[row * n + col]));
        fix_sign(&mut vectors[start..]);
    }
    Ok(EigenPack { dim: n, values, vectors })
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            sum += 2.0 * a[p * n + q] * a[p * n + q];
        }
    }
    sum.sqrt()
}

// Annihilates a[p][q] with a plane rotation and accumulates it into v.
fn rotate(a: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = a[r * n + p];
        let arq = a[r * n + q];
        let new_rp = c * arp - s * arq;
        let new_rq = s * arp + c * arq;
        a[r * n + p] = new_rp;
        a[p * n + r] = new_rp;
        a[r * n + q] = new_rq;
        a[q * n + r] = new_rq;
    }
    a[p * n + p] = app - t * apq;
    a[q * n + q] = aqq + t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;

    for r in 0..n {
        let vrp = v[r * n + p];
        let vrq = v[r * n + q];
        v[r * n + p] = c * vrp - s * vrq;
        v[r * n + q] = s * vrp + c * vrq;
    }
}

// Components within round-off of the largest magnitude count as tied; the
// first of them decides the sign.
fn fix_sign(vector: &mut [f64]) {
    let largest = vector.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let cutoff = largest * (1.0 - 1e-12);
    let best = vector.iter().position(|x| x.abs() >= cutoff).unwrap_or(0);
    if vector[best] < 0.0 {
        for x in vector.iter_mut() {
            *x = -*x;
        }
    }
}

/// Pearson correlation; exactly 0 when either column is constant.
pub fn pearson(col_a: &[f64], col_b: &[f64]) -> Result<f64> {
    if col_a.len() != col_b.len() {
        return Err(Error::DimensionMismatch { expected: col_a.len(), found: col_b.len() });
    }
    let m = col_a.len();
    if m < 2 {
        return Err(Error::DegenerateSample(format!("correlation needs at least 2 samples, got {m}")));
    }
    let mean_a = col_a.iter().sum::<f64>() / m as f64;
    let mean_b = col_b.iter().sum::<f64>() / m as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in col_a.iter().zip(col_b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(0.0);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}
