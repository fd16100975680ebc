//! Dense decompositions, delegated to nalgebra in `f64`.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::Scalar;

pub(crate) fn to_dmatrix<T: Scalar>(a: ArrayView2<T>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]].f64())
}

pub(crate) fn from_dmatrix<T: Scalar>(m: &DMatrix<f64>) -> Array2<T> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| T::of(m[(i, j)]))
}

/// Singular values in descending order.
pub fn singular_values<T: Scalar>(a: ArrayView2<T>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = to_dmatrix(a).singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Orthonormal basis for the column space of a full-column-rank matrix.
pub fn orthonormal_columns<T: Scalar>(a: ArrayView2<T>) -> Result<Array2<T>> {
    Ok(from_dmatrix(&orthonormalize(&to_dmatrix(a))?))
}

pub(crate) fn orthonormalize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cols = m.ncols();
    if cols == 0 || m.nrows() < cols {
        return Err(Error::RankDeficient {
            rank: m.nrows().min(cols),
            cols,
        });
    }
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let qr = m.clone().qr();
    let r = qr.r();
    let tol = scale * (m.nrows().max(cols) as f64) * 1e-12;
    let rank = (0..cols).filter(|&j| r[(j, j)].abs() > tol).count();
    if scale == 0.0 || rank < cols {
        return Err(Error::RankDeficient { rank, cols });
    }
    Ok(qr.q())
}

/// Top-`k` principal directions (right singular vectors) of the rows of `x`,
/// as a `D x k` matrix with orthonormal columns.
pub fn principal_subspace<T: Scalar>(x: ArrayView2<T>, k: usize) -> Result<Array2<T>> {
    let (n, d) = x.dim();
    if k == 0 || k > d || k > n {
        return Err(Error::shape(format!(
            "cannot take {k} principal directions of a {n}x{d} matrix"
        )));
    }
    let svd = to_dmatrix(x).svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    Ok(Array2::from_shape_fn((d, k), |(i, j)| T::of(v_t[(order[j], i)])))
}

/// Squared distance of the rows of `x` to their best rank-`k` linear
/// subspace (about the row mean when `center`).
pub fn pca_residual<T: Scalar>(x: ArrayView2<T>, k: usize, center: bool) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    let mut m = to_dmatrix(x);
    if center {
        let mean = m.row_mean();
        for mut row in m.row_iter_mut() {
            row -= &mean;
        }
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s.iter().skip(k).map(|v| v * v).sum()
}
