use super::schur::schur_form;

use super::{ensure_finite, ensure_square, invert, ComplexMatrix, ZERO};
use crate::error::{Error, Result};

/// Eigenvalues closer than this to the closed negative real axis have no
/// principal square root.
pub const BRANCH_CUT_TOLERANCE: f64 = 1e-10;

/// Principal square root via the complex Schur form (Björck–Hammarling
/// recurrence on the triangular factor).
pub fn principal_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(a, "principal_sqrt")?;
    ensure_finite(a)?;
    let n = a.nrows();
    let (q, t) = schur_form(a)?;

    for i in 0..n {
        let z = t[(i, i)];
        let distance = if z.re <= 0.0 { z.im.abs() } else { z.norm() };
        if distance <= BRANCH_CUT_TOLERANCE {
            return Err(Error::BranchCut { re: z.re, im: z.im });
        }
    }

    let mut r = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        r[(j, j)] = t[(j, j)].sqrt();
        for i in (0..j).rev() {
            let mut s = t[(i, j)];
            for k in i + 1..j {
                s -= r[(i, k)] * r[(k, j)];
            }
            let denom = r[(i, i)] + r[(j, j)];
            r[(i, j)] = if denom == ZERO { ZERO } else { s / denom };
        }
    }
    Ok(&q * r * q.adjoint())
}

/// Binary matrix geometric mean `A·(A⁻¹B)^{1/2}`.
pub fn matrix_geometric_mean(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(a, "matrix_geometric_mean")?;
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "geometric mean of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let ratio = invert(a)? * b;
    Ok(a * principal_sqrt(&ratio)?)
}
