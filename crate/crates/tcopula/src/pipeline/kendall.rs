//! Kendall tau-b rank correlation and the induced copula correlation matrix.

use crate::copula::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::pipeline::ResidualMatrix;
use nalgebra::{DMatrix, SymmetricEigen};
use std::cmp::Ordering;
use std::f64::consts::PI;

fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Pairs tied within sorted groups of equal keys: sum of t*(t-1)/2.
fn tie_pairs<K: PartialEq, T>(sorted: &[T], key: impl Fn(&T) -> K) -> u64 {
    let mut total = 0u64;
    let mut pos = 0usize;
    while pos < sorted.len() {
        let mut end = pos + 1;
        while end < sorted.len() && key(&sorted[end]) == key(&sorted[pos]) {
            end += 1;
        }
        let t = (end - pos) as u64;
        total += t * (t - 1) / 2;
        pos = end;
    }
    total
}

/// Count inversions in `v` by merge sort, leaving `v` sorted.
fn merge_count(v: &mut [f64], scratch: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = v.split_at_mut(mid);
    let mut inv = merge_count(left, scratch) + merge_count(right, scratch);
    scratch.clear();
    let (mut i, mut j) = (0usize, 0usize);
    while i < left.len() && j < right.len() {
        if right[j] < left[i] {
            inv += (left.len() - i) as u64;
            scratch.push(right[j]);
            j += 1;
        } else {
            scratch.push(left[i]);
            i += 1;
        }
    }
    scratch.extend_from_slice(&left[i..]);
    scratch.extend_from_slice(&right[j..]);
    v.copy_from_slice(scratch);
    inv
}

/// Kendall tau-b of two samples in O(K log K) via Knight's algorithm.
///
/// Ties are handled with the tau-b normalization; a constant column makes
/// the coefficient undefined and is reported as an error.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("{} vs {} points", x.len(), y.len())));
    }
    let k = x.len();
    if k < 2 {
        return Err(Error::data("need at least 2 points".to_string()));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite value in sample".to_string()));
    }

    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| cmp_f64(a.0, b.0).then(cmp_f64(a.1, b.1)));

    let n0 = (k as u64) * (k as u64 - 1) / 2;
    let n1 = tie_pairs(&pairs, |p| p.0.to_bits());
    let n3 = tie_pairs(&pairs, |p| (p.0.to_bits(), p.1.to_bits()));
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut scratch = Vec::with_capacity(k);
    let discordant = merge_count(&mut ys, &mut scratch);
    let n2 = tie_pairs(&ys, |v| v.to_bits());

    let denom_x = (n0 - n1) as f64;
    let denom_y = (n0 - n2) as f64;
    if denom_x <= 0.0 || denom_y <= 0.0 {
        return Err(Error::data("tau undefined for a constant column".to_string()));
    }
    // Concordant minus discordant: start from all non-tied-in-x pairs, remove
    // y ties among them, and subtract discordances twice.
    let numer = (n0 - n1) as f64 - (n2 - n3) as f64 - 2.0 * discordant as f64;
    Ok(numer / (denom_x * denom_y).sqrt())
}

/// Project a symmetric matrix onto the correlation matrices: clip eigenvalues
/// at `floor`, rebuild and rescale to unit diagonal.
pub fn nearest_correlation(m: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let vals = eig.eigenvalues.map(|l| l.max(floor));
    let mut out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    let n = out.nrows();
    let scale: Vec<f64> = (0..n).map(|i| out[(i, i)].sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] /= scale[i] * scale[j];
        }
    }
    for i in 0..n {
        out[(i, i)] = 1.0;
        for j in 0..i {
            let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = avg;
            out[(j, i)] = avg;
        }
    }
    Ok(out)
}

/// Pairwise Kendall-tau correlation estimate Sigma_ij = sin(pi tau_ij / 2),
/// projected to the nearest positive-definite correlation matrix if the raw
/// transform is not one.
pub fn kendall_corr(residuals: &ResidualMatrix) -> Result<CorrelationMatrix> {
    let n = residuals.dim();
    let cols: Vec<Vec<f64>> = (0..n).map(|i| residuals.column(i)).collect();
    let mut m = DMatrix::<f64>::identity(n, n);
    let clamp = 1.0 - 1e-10;
    for i in 0..n {
        for j in 0..i {
            let tau = kendall_tau(&cols[i], &cols[j])?;
            let rho = (PI * tau / 2.0).sin().clamp(-clamp, clamp);
            m[(i, j)] = rho;
            m[(j, i)] = rho;
        }
    }
    match CorrelationMatrix::new(m.clone()) {
        Ok(c) => Ok(c),
        Err(_) => {
            let fixed = nearest_correlation(&m, 1e-8)?;
            CorrelationMatrix::new(fixed)
        }
    }
}
