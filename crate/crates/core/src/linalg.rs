//! Small dense helpers shared across modules.
//!
//! Vectorization is column-wise everywhere: `vec(X)[i + rows * j] = X[(i, j)]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Column-wise vectorization.
pub fn vec_col(x: &DMatrix<f64>) -> Vec<f64> {
    // nalgebra stores column-major already
    x.as_slice().to_vec()
}

/// Inverse of [`vec_col`].
pub fn unvec_col(v: &[f64], rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if v.len() != rows * cols {
        return Err(Error::dim(format!(
            "cannot reshape {} entries into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v))
}

/// Stacks `[vec(A); vec(B)]`.
pub fn plant_vector(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let mut z = vec_col(a);
    z.extend_from_slice(b.as_slice());
    z
}

/// Splits `z = [vec(A); vec(B)]` back into `(A, B)`.
pub fn split_plant_vector(z: &[f64], n: usize, m: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if z.len() != n * (n + m) {
        return Err(Error::dim(format!(
            "plant vector has {} entries, expected {}",
            z.len(),
            n * (n + m)
        )));
    }
    let a = unvec_col(&z[..n * n], n, n)?;
    let b = unvec_col(&z[n * n..], n, m)?;
    Ok((a, b))
}

pub fn matrix_from_rows(rows: &[Vec<f64>], cols_if_empty: usize) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(cols_if_empty, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::dim("ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows())
        .map(|i| x.row(i).iter().copied().collect())
        .collect()
}

pub fn inf_norm(x: &DVector<f64>) -> f64 {
    x.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Sign vectors `α ∈ {−1, 1}^n` in binary order: bit `j` of the index set
/// means `α_j = −1`.
pub fn sign_vectors(n: usize) -> impl Iterator<Item = Vec<f64>> {
    (0..1usize << n).map(move |code| {
        (0..n)
            .map(|j| if code >> j & 1 == 1 { -1.0 } else { 1.0 })
            .collect()
    })
}
