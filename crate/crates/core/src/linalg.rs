use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::Example;

/// Relative singular-value cutoff for minimum-norm least squares.
const PINV_RTOL: f64 = 1e-12;

/// Design matrix with an optional trailing column of ones.
pub(crate) fn design(examples: &[Example], augment: bool) -> DMatrix<f64> {
    let d = examples.first().map_or(0, Example::dim);
    let cols = d + usize::from(augment);
    DMatrix::from_fn(examples.len(), cols, |i, j| {
        if j < d {
            examples[i].x[j]
        } else {
            1.0
        }
    })
}

pub(crate) fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = a.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

/// Minimum-norm solution of `min ||A x - b||_2`.
pub(crate) fn min_norm_lstsq(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(DVector::zeros(a.ncols()));
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Ok(DVector::zeros(svd.v_t.as_ref().map_or(0, |v| v.ncols())));
    }
    let eps = smax * PINV_RTOL * (svd.singular_values.len() as f64).max(1.0);
    svd.solve(b, eps).map_err(|_| Error::NotPositiveDefinite)
}

/// Inverse of a symmetric positive-definite matrix.
pub(crate) fn spd_inverse(a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.inverse())
}
