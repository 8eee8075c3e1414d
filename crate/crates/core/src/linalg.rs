//! Thin wrappers over faer. faer is built without its rayon feature, so all
//! decompositions here run on the calling thread and are reproducible.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues nondecreasing.
pub(crate) fn sym_eigen(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("symmetric eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let vals: Vec<f64> = (0..s.nrows()).map(|i| s[i]).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Linalg("non-finite eigenvalue".into()));
    }
    Ok((vals, evd.U().to_owned()))
}

/// Solves `A x = b` for symmetric positive-definite `A` by Cholesky.
pub(crate) fn spd_solve(a: &Mat<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| Error::Linalg(format!("Cholesky factorization failed: {e:?}")))?;
    let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = llt.solve(&rhs);
    Ok((0..b.len()).map(|i| x[(i, 0)]).collect())
}

pub(crate) fn mat_vec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.nrows()];
    for (j, &xj) in x.iter().enumerate().take(a.ncols()) {
        if xj == 0.0 {
            continue;
        }
        let col = a.col(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += col[i] * xj;
        }
    }
    out
}

/// `Aᵀ x`.
pub(crate) fn mat_t_vec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.ncols())
        .map(|j| {
            let col = a.col(j);
            let mut s = 0.0;
            for (i, xi) in x.iter().enumerate() {
                s += col[i] * xi;
            }
            s
        })
        .collect()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
