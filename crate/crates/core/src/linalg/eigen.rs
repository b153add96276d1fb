use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use super::schur::schur_form;
use super::{circular_distance, ensure_finite, ensure_square, gauge_fix_columns, optimal_assignment};
use super::{ComplexMatrix, ZERO};
use crate::error::{Error, Result};

/// Eigenvalues and unit-norm eigenvectors (as columns) of a square matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<Complex64>,
    pub vectors: ComplexMatrix,
}

impl EigenDecomposition {
    /// Multiply every eigenvalue by `exp(-i·angle)`.
    pub fn rotated(mut self, angle: f64) -> Self {
        let r = Complex64::from_polar(1.0, -angle);
        self.values.iter_mut().for_each(|v| *v *= r);
        self
    }
}

/// Eigenvector block selected by target eigenvalue phases.
#[derive(Debug, Clone)]
pub struct SortedColumns {
    /// `N × M`, column `i` belongs to target `i`, gauge-fixed.
    pub columns: ComplexMatrix,
    /// Index of the eigenpair matched to each target.
    pub picks: Vec<usize>,
    /// Largest circular distance between a target and its matched eigenvalue.
    pub worst_distance: f64,
}

/// Default sorting tolerance for `m` targets: a quarter of the grid spacing
/// `2π/(m+1)`.
pub fn sorting_tolerance(m: usize) -> f64 {
    TAU / (m as f64 + 1.0) / 4.0
}

/// Complex Schur factorization followed by back-substitution on the
/// triangular factor.
pub fn eigen_decompose(x: &ComplexMatrix) -> Result<EigenDecomposition> {
    ensure_square(x, "eigen_decompose")?;
    ensure_finite(x)?;
    let n = x.nrows();
    let (q, t) = schur_form(x)?;
    let values: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();

    // Denominator floor for (near-)repeated eigenvalues, as in LAPACK's ztrevc.
    let floor = (f64::EPSILON * t.norm()).max(f64::MIN_POSITIVE);
    let mut y = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = ZERO;
            for l in j + 1..=k {
                s += t[(j, l)] * y[(l, k)];
            }
            let mut d = t[(j, j)] - values[k];
            if d.norm() < floor {
                d = Complex64::new(floor, 0.0);
            }
            y[(j, k)] = -s / d;
        }
    }
    let mut vectors = q * y;
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        col /= Complex64::new(norm, 0.0);
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Match `targets` (mode, phase) to eigenpairs by an optimal one-to-one
/// assignment on circular phase distance and return the gauge-fixed columns.
pub fn sort_eigencolumns(
    decomposition: &EigenDecomposition,
    targets: &[(usize, f64)],
    tolerance: f64,
) -> Result<SortedColumns> {
    let n = decomposition.values.len();
    if targets.len() > n || targets.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} targets for {n} eigenpairs",
            targets.len()
        )));
    }
    let phases: Vec<f64> = decomposition.values.iter().map(|v| v.arg()).collect();
    let cost: Vec<Vec<f64>> = targets
        .iter()
        .map(|&(_, target)| phases.iter().map(|&p| circular_distance(p, target)).collect())
        .collect();

    for (row, &(mode, target)) in cost.iter().zip(targets) {
        let near: Vec<usize> = (0..n).filter(|&k| row[k] < tolerance).collect();
        for (a, &ka) in near.iter().enumerate() {
            for &kb in &near[a + 1..] {
                if circular_distance(phases[ka], phases[kb]) < tolerance {
                    return Err(Error::SortingAmbiguity { mode, target });
                }
            }
        }
    }

    let picks = optimal_assignment(&cost);
    let worst_distance = picks
        .iter()
        .enumerate()
        .map(|(i, &k)| cost[i][k])
        .fold(0.0, f64::max);
    let mut columns = decomposition.vectors.select_columns(picks.iter());
    gauge_fix_columns(&mut columns);
    Ok(SortedColumns { columns, picks, worst_distance })
}

/// Eigendecompose `x` and select the eigenvectors whose eigenvalue phases
/// match `targets`, using the default [`sorting_tolerance`].
pub fn phase_sorted_eigencolumns(x: &ComplexMatrix, targets: &[(usize, f64)]) -> Result<SortedColumns> {
    let decomposition = eigen_decompose(x)?;
    sort_eigencolumns(&decomposition, targets, sorting_tolerance(targets.len()))
}

/// Find the global rotation `α` for which the eigenvalue phases, shifted by
/// `-α`, best match the `expected` spectrum (one phase per eigenvalue).
///
/// The candidate rotations align the first expected phase with each observed
/// eigenvalue in turn; the winner is refined by the mean matched residual.
/// Fails with [`Error::SortingAmbiguity`] if a rotation farther than
/// `tolerance` from the winner also matches every eigenvalue within
/// `tolerance` (a rotationally symmetric spectrum).
pub fn estimate_spectral_rotation(values: &[Complex64], expected: &[f64], tolerance: f64) -> Result<f64> {
    let n = values.len();
    if expected.len() != n || n == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{} expected phases for {n} eigenvalues",
            expected.len()
        )));
    }
    let phases: Vec<f64> = values.iter().map(|v| v.arg()).collect();

    let evaluate = |alpha: f64| -> (f64, f64, Vec<usize>) {
        let cost: Vec<Vec<f64>> = expected
            .iter()
            .map(|&e| phases.iter().map(|&p| circular_distance(p - alpha, e)).collect())
            .collect();
        let picks = optimal_assignment(&cost);
        let matched = picks.iter().enumerate().map(|(i, &k)| cost[i][k]);
        let (total, worst) = matched.fold((0.0, 0.0_f64), |(t, w), c| (t + c, w.max(c)));
        (total, worst, picks)
    };

    let candidates: Vec<(f64, f64, f64, Vec<usize>)> = phases
        .iter()
        .map(|&p| {
            let alpha = p - expected[0];
            let (total, worst, picks) = evaluate(alpha);
            (alpha, total, worst, picks)
        })
        .collect();
    let best = candidates
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty spectrum");

    if candidates
        .iter()
        .any(|c| circular_distance(c.0, best.0) > tolerance && c.2 < tolerance)
    {
        return Err(Error::SortingAmbiguity { mode: 0, target: best.0 });
    }

    // signed residuals in (-π, π]
    let shift: f64 = best
        .3
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let r = (phases[k] - best.0 - expected[i]).rem_euclid(TAU);
            if r > PI {
                r - TAU
            } else {
                r
            }
        })
        .sum::<f64>()
        / n as f64;
    Ok(best.0 + shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use crate::linalg::{invert, max_abs_diff, phase_diagonal};
    use crate::testutil::{random_matrix, random_unitary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diagonal(values: &[Complex64]) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&DVector::from_column_slice(values))
    }

    fn grid_targets(n: usize) -> Vec<(usize, f64)> {
        (0..n).map(|j| (j, TAU * (j + 1) as f64 / (n as f64 + 1.0))).collect()
    }

    fn phases_of(targets: &[(usize, f64)]) -> Vec<f64> {
        targets.iter().map(|t| t.1).collect()
    }

    /// Columns of `a` equal columns of `b` up to a unit-modulus factor each.
    fn max_column_mismatch(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        a.column_iter()
            .zip(b.column_iter())
            .map(|(x, y)| {
                let overlap = y.dotc(&x);
                let phase = overlap / overlap.norm();
                (x - y * phase).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn decomposition_reproduces_general_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [1, 3, 8, 20] {
            let x = random_matrix(n, &mut rng);
            let d = eigen_decompose(&x).unwrap();
            let lhs = &x * &d.vectors;
            let rhs = &d.vectors * diagonal(&d.values);
            assert!(max_abs_diff(&lhs, &rhs) < 1e-10 * x.norm(), "n = {n}");
        }
    }

    #[test]
    fn diagonal_phase_matrix_gives_canonical_basis() {
        let targets = grid_targets(5);
        let x = phase_diagonal(&phases_of(&targets));
        let sorted = phase_sorted_eigencolumns(&x, &targets).unwrap();
        assert!(max_abs_diff(&sorted.columns, &ComplexMatrix::identity(5, 5)) < 1e-14);
        assert!(sorted.worst_distance < 1e-14);
    }

    #[test]
    fn similarity_recovers_columns_up_to_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [2, 6, 10, 30] {
            let c = random_unitary(n, &mut rng);
            let targets = grid_targets(n);
            let x = &c * phase_diagonal(&phases_of(&targets)) * c.adjoint();
            let sorted = phase_sorted_eigencolumns(&x, &targets).unwrap();
            assert!(max_column_mismatch(&sorted.columns, &c) < 1e-10, "n = {n}");

            // reassembling C Φ C⁻¹ reproduces X
            let rebuilt = &sorted.columns * phase_diagonal(&phases_of(&targets)) * invert(&sorted.columns).unwrap();
            assert!(max_abs_diff(&rebuilt, &x) < 1e-10);
        }
    }

    #[test]
    fn non_unitary_similarity_is_supported() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut c = random_matrix(6, &mut rng);
        crate::linalg::gauge_fix_columns(&mut c);
        let targets = grid_targets(6);
        let x = &c * phase_diagonal(&phases_of(&targets)) * invert(&c).unwrap();
        let sorted = phase_sorted_eigencolumns(&x, &targets).unwrap();
        assert!(max_column_mismatch(&sorted.columns, &c) < 1e-9);
    }

    #[test]
    fn perturbed_similarity_stays_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 8;
        let c = random_unitary(n, &mut rng);
        let targets = grid_targets(n);
        let mut e = random_matrix(n, &mut rng);
        e *= Complex64::new(1e-6 / e.norm(), 0.0);
        let x = &c * phase_diagonal(&phases_of(&targets)) * c.adjoint() + e;
        let sorted = phase_sorted_eigencolumns(&x, &targets).unwrap();
        assert!(max_column_mismatch(&sorted.columns, &c) < 1e-4);
    }

    #[test]
    fn partial_targets_ignore_degenerate_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 6;
        let c = random_unitary(n, &mut rng);
        // modes 2 and 3 active, everything else at phase 0
        let mut phases = vec![0.0; n];
        let targets = vec![(2, TAU / 3.0), (3, 2.0 * TAU / 3.0)];
        for &(j, p) in &targets {
            phases[j] = p;
        }
        let x = &c * phase_diagonal(&phases) * c.adjoint();
        let sorted = phase_sorted_eigencolumns(&x, &targets).unwrap();
        let expected = c.select_columns([2, 3].iter());
        assert!(max_column_mismatch(&sorted.columns, &expected) < 1e-10);
    }

    #[test]
    fn clustered_eigenvalues_are_ambiguous() {
        let phases = [0.5, 0.52, 2.0];
        let x = phase_diagonal(&phases);
        let targets = vec![(0, 0.51), (1, 2.0), (2, 4.0)];
        let err = phase_sorted_eigencolumns(&x, &targets).unwrap_err();
        assert!(matches!(err, Error::SortingAmbiguity { mode: 0, .. }));
    }

    #[test]
    fn rotation_of_gapped_grid_is_recovered() {
        let targets = grid_targets(7);
        let expected = phases_of(&targets);
        for alpha in [0.0, 0.3, -2.0, 3.1] {
            let values: Vec<Complex64> = expected.iter().rev().map(|&p| Complex64::from_polar(1.0, p + alpha)).collect();
            let got = estimate_spectral_rotation(&values, &expected, sorting_tolerance(7)).unwrap();
            assert!(circular_distance(got, alpha) < 1e-12, "alpha = {alpha}, got {got}");
        }
    }

    #[test]
    fn symmetric_spectrum_rotation_is_ambiguous() {
        // {0, 2π/3, 4π/3} is invariant under rotation by 2π/3
        let expected = vec![0.0, TAU / 3.0, 2.0 * TAU / 3.0];
        let values: Vec<Complex64> = expected.iter().map(|&p| Complex64::from_polar(1.0, p + 0.2)).collect();
        let err = estimate_spectral_rotation(&values, &expected, sorting_tolerance(2)).unwrap_err();
        assert!(matches!(err, Error::SortingAmbiguity { .. }));
    }
}
