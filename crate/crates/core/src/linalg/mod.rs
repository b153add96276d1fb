//! Dense complex-matrix primitives used by the reconstruction algorithms.
//!
//! Everything here is a pure function over [`ComplexMatrix`] values; there is
//! no shared state.

mod assignment;
mod eigen;
mod rank1;
mod schur;
mod sqrt;

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use assignment::optimal_assignment;
pub use eigen::{
    eigen_decompose, estimate_spectral_rotation, phase_sorted_eigencolumns, sort_eigencolumns,
    sorting_tolerance, EigenDecomposition, SortedColumns,
};
pub use rank1::{rank1_phase_factor, weighted_phase_residual};
pub use sqrt::{matrix_geometric_mean, principal_sqrt};

/// Square (or column-block) array of complex amplitudes.
pub type ComplexMatrix = DMatrix<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Smallest acceptable `sigma_min / sigma_max` for [`project_unitary`].
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Real angles in radians, each reduced to `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseVector(Vec<f64>);

impl PhaseVector {
    pub fn new(phases: impl IntoIterator<Item = f64>) -> Self {
        Self(phases.into_iter().map(reduce_angle).collect())
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `diag(exp(i·phase))`.
    pub fn to_diagonal(&self) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&DVector::from_iterator(
            self.0.len(),
            self.0.iter().map(|&p| Complex64::from_polar(1.0, p)),
        ))
    }

    /// Largest circular distance between corresponding entries.
    pub fn max_distance(&self, other: &PhaseVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| circular_distance(a, b))
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for PhaseVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

/// Reduce an angle to `[0, 2π)`.
pub fn reduce_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Distance between two angles on the unit circle, in `[0, π]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        TAU - d
    } else {
        d
    }
}

/// Nearest unitary matrix in the Frobenius norm (the polar factor `W·Vᴴ` of
/// the singular value decomposition `A = W·Σ·Vᴴ`).
pub fn project_unitary(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(a, "project_unitary")?;
    ensure_finite(a)?;
    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_max > 0.0) || s_min <= RANK_TOLERANCE * s_max {
        return Err(Error::RankDeficient {
            ratio: if s_max > 0.0 { s_min / s_max } else { 0.0 },
        });
    }
    let (Some(w), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::NoConvergence);
    };
    Ok(w * v_t)
}

/// General inverse with an explicit singularity check.
pub fn invert(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(a, "invert")?;
    a.clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|z| z.is_finite()))
        .ok_or(Error::RankDeficient { ratio: 0.0 })
}

/// 2-norm condition number from the singular values.
pub fn condition_number(a: &ComplexMatrix) -> f64 {
    let s = a.singular_values();
    let min = s.min();
    if min > 0.0 {
        s.max() / min
    } else {
        f64::INFINITY
    }
}

/// `max |(AᴴA − I)_ij|`.
pub fn unitarity_defect(a: &ComplexMatrix) -> f64 {
    let g = a.adjoint() * a;
    max_abs_diff(&g, &ComplexMatrix::identity(a.nrows(), a.ncols()))
}

/// Entrywise max-modulus distance.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Scale every column to unit norm and rotate it so its largest-modulus entry
/// is real and positive. Ties in modulus go to the lowest row index.
pub fn gauge_fix_columns(a: &mut ComplexMatrix) {
    for mut col in a.column_iter_mut() {
        let norm = col.norm();
        if norm == 0.0 {
            continue;
        }
        let mut pivot = col[0];
        for z in col.iter() {
            if z.norm() > pivot.norm() {
                pivot = *z;
            }
        }
        let phase = Complex64::from_polar(1.0 / norm, -pivot.arg());
        col.iter_mut().for_each(|z| *z *= phase);
    }
}

/// Multiply each column of `b` by the unit phase that best aligns it with the
/// corresponding column of `reference` (maximizing `Re⟨ref, b⟩`).
pub fn align_columns(b: &mut ComplexMatrix, reference: &ComplexMatrix) {
    for (mut col, r) in b.column_iter_mut().zip(reference.column_iter()) {
        let overlap = col.dotc(&r);
        if overlap.norm() > 0.0 {
            let phase = overlap / overlap.norm();
            col.iter_mut().for_each(|z| *z *= phase);
        }
    }
}

/// `diag(exp(i·phases))` for raw, unreduced phases.
pub fn phase_diagonal(phases: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&DVector::from_iterator(
        phases.len(),
        phases.iter().map(|&p| Complex64::from_polar(1.0, p)),
    ))
}

pub(crate) fn ensure_square(a: &ComplexMatrix, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{what} needs a nonempty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_finite(a: &ComplexMatrix) -> Result<()> {
    if a.iter().all(|z| z.is_finite()) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch("matrix has non-finite entries".into()))
    }
}
