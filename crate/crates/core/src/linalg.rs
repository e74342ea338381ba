//! Small dense helpers over row-major `Vec<Vec<f64>>` matrices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = Vec<Vec<f64>>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Checks that `m` is square and returns its order.
pub fn square_order(m: &Matrix) -> Result<usize> {
    let n = m.len();
    if m.iter().any(|r| r.len() != n) {
        return Err(Error::Contract(format!("matrix with {n} rows is not square")));
    }
    Ok(n)
}

pub fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows, cols, |i, j| m[i][j])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Matrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues in descending
/// order. Column `k` of the returned vectors pairs with eigenvalue `k`.
pub fn symmetric_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = square_order(m)?;
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let eig = SymmetricEigen::new(to_dmatrix(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = (0..n).map(|i| order.iter().map(|&k| eig.eigenvectors[(i, k)]).collect()).collect();
    Ok((values, vectors))
}

pub fn min_eigenvalue(m: &Matrix) -> Result<f64> {
    let (values, _) = symmetric_eigen(m)?;
    Ok(values.last().copied().unwrap_or(0.0))
}

pub fn max_asymmetry(m: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.len() {
        for j in 0..i {
            worst = worst.max((m[i][j] - m[j][i]).abs());
        }
    }
    worst
}
