//! First principal component by power iteration on the covariance matrix.

use crate::error::{invalid, Error, Result};
use crate::linalg::SquareMatrix;
use crate::numeric::{dot, ExactSum};

const RESIDUAL_TOL: f64 = 1e-8;
const MAX_ITERATIONS: usize = 100_000;

/// Covariance of dense rows, `(1/N) Σ (x − μ)(x − μ)ᵀ`, summed exactly.
fn dense_covariance<R: AsRef<[f64]>>(rows: &[R]) -> Result<SquareMatrix> {
    let d = rows.first().ok_or_else(|| invalid("no rows"))?.as_ref().len();
    if rows.iter().any(|r| r.as_ref().len() != d) {
        return Err(invalid("rows have differing dimensions"));
    }
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r.as_ref()[j]).collect::<ExactSum>().value() / n).collect();
    let mut acc = vec![ExactSum::new(); d * d];
    let mut centered = vec![0.0; d];
    for r in rows {
        for (c, (&x, &m)) in centered.iter_mut().zip(r.as_ref().iter().zip(&mean)) {
            *c = x - m;
        }
        for i in 0..d {
            for j in i..d {
                acc[i * d + j].add(centered[i] * centered[j]);
            }
        }
    }
    let mut cov = SquareMatrix::zeros(d);
    for i in 0..d {
        for j in i..d {
            let v = acc[i * d + j].value() / n;
            cov.add(i, j, v);
            if i != j {
                cov.add(j, i, v);
            }
        }
    }
    Ok(cov)
}

/// Covariance of binary rows given as sorted lists of active feature indices.
/// All intermediate sums are integer counts, hence exact.
pub(crate) fn sparse_binary_covariance(rows: &[Vec<u32>], d: usize) -> Result<SquareMatrix> {
    if rows.is_empty() {
        return Err(invalid("no rows"));
    }
    let mut counts = vec![0u64; d * d];
    let mut ones = vec![0u64; d];
    for r in rows {
        for &i in r {
            let i = i as usize;
            if i >= d {
                return Err(Error::DimensionMismatch { expected: d, actual: i + 1 });
            }
            ones[i] += 1;
            for &j in r {
                counts[i * d + j as usize] += 1;
            }
        }
    }
    let n = rows.len() as f64;
    let mut cov = SquareMatrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let mi = ones[i] as f64 / n;
            let mj = ones[j] as f64 / n;
            cov.add(i, j, counts[i * d + j] as f64 / n - mi * mj);
        }
    }
    Ok(cov)
}

fn mat_vec(m: &SquareMatrix, v: &[f64]) -> Vec<f64> {
    let d = m.size();
    (0..d).map(|i| (0..d).map(|j| m.get(i, j) * v[j]).collect::<ExactSum>().value()).collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Top eigenvector of a symmetric positive semidefinite matrix. Iterates
/// until `‖Cv − λv‖ ≤ 1e−8·λ`.
pub(crate) fn top_eigenvector(cov: &SquareMatrix) -> Result<Vec<f64>> {
    let d = cov.size();
    let scale = (0..d).map(|i| cov.get(i, i)).fold(0.0f64, f64::max);
    if !(scale > 0.0) {
        return Err(Error::Degenerate("features have zero variance".into()));
    }
    // Deterministic start with no special alignment to coordinate axes.
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract()).collect();
    normalize(&mut v);
    for _ in 0..MAX_ITERATIONS {
        let mut w = mat_vec(cov, &v);
        let lambda = dot(&w, &v);
        let residual: f64 = w.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        if normalize(&mut w) == 0.0 {
            return Err(Error::Degenerate("power iteration collapsed to zero".into()));
        }
        if residual <= RESIDUAL_TOL * lambda.abs() {
            fix_sign(&mut w);
            return Ok(w);
        }
        v = w;
    }
    Err(Error::Degenerate("power iteration did not converge".into()))
}

/// Unit vector along the direction of greatest variance of the rows.
pub fn first_principal_component<R: AsRef<[f64]>>(features: &[R]) -> Result<Vec<f64>> {
    if features.len() < 2 {
        return Err(invalid("principal component needs at least two rows"));
    }
    top_eigenvector(&dense_covariance(features)?)
}

pub fn first_principal_component_sparse(rows: &[Vec<u32>], d: usize) -> Result<Vec<f64>> {
    if rows.len() < 2 {
        return Err(invalid("principal component needs at least two rows"));
    }
    top_eigenvector(&sparse_binary_covariance(rows, d)?)
}
