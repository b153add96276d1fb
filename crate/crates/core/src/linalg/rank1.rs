use num_complex::Complex64;

use super::{ComplexMatrix, PhaseVector, ZERO};
use crate::error::{Error, Result};

/// Weights below this fraction of the largest weight are treated as absent.
pub const WEIGHT_CUTOFF: f64 = 1e-8;

/// Fit `R_pq ≈ exp(i(δ_p + δ'_q))` in the weighted least-squares sense.
///
/// Entries are first reduced to unit modulus and scaled by their weights; the
/// leading singular pair of that matrix is projected entrywise to the unit
/// circle. The global phase is fixed by `δ_1 = 0`.
pub fn rank1_phase_factor(r: &ComplexMatrix, weights: &nalgebra::DMatrix<f64>) -> Result<(PhaseVector, PhaseVector)> {
    if r.shape() != weights.shape() {
        return Err(Error::DimensionMismatch(format!(
            "ratio {:?} vs weights {:?}",
            r.shape(),
            weights.shape()
        )));
    }
    let (rows, cols) = r.shape();
    let max_weight = weights.iter().cloned().fold(0.0, f64::max);
    if !(max_weight > 0.0) {
        return Err(Error::DisconnectedSupport);
    }
    let cutoff = WEIGHT_CUTOFF * max_weight;

    let mut unit = ComplexMatrix::zeros(rows, cols);
    for q in 0..cols {
        for p in 0..rows {
            let z = r[(p, q)];
            let w = weights[(p, q)];
            if w > cutoff && z.norm() > 0.0 && z.is_finite() {
                unit[(p, q)] = z / z.norm() * w;
            }
        }
    }
    if !support_is_connected(&unit) {
        return Err(Error::DisconnectedSupport);
    }

    let svd = unit.svd(true, true);
    let lead = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::NoConvergence);
    };
    // unit ≈ σ·u·vᴴ, so arg R_pq ≈ arg u_p − arg v_q
    let reference = u[(0, lead)].arg();
    let left = PhaseVector::new((0..rows).map(|p| u[(p, lead)].arg() - reference));
    // row `lead` of vᴴ holds conj(v)
    let right = PhaseVector::new((0..cols).map(|q| v_t[(lead, q)].arg() + reference));
    Ok((left, right))
}

/// `Σ w_pq |R_pq/|R_pq| − exp(i(δ_p + δ'_q))|²` over entries with positive weight.
pub fn weighted_phase_residual(
    r: &ComplexMatrix,
    weights: &nalgebra::DMatrix<f64>,
    left: &PhaseVector,
    right: &PhaseVector,
) -> f64 {
    let mut total = 0.0;
    for q in 0..r.ncols() {
        for p in 0..r.nrows() {
            let w = weights[(p, q)];
            let z = r[(p, q)];
            if w > 0.0 && z.norm() > 0.0 {
                let model = Complex64::from_polar(1.0, left[p] + right[q]);
                total += w * (z / z.norm() - model).norm_sqr();
            }
        }
    }
    total
}

/// Bipartite rows/columns graph with an edge per nonzero entry is connected.
fn support_is_connected(m: &ComplexMatrix) -> bool {
    let (rows, cols) = m.shape();
    // nodes 0..rows are rows, rows..rows+cols are columns
    let mut seen = vec![false; rows + cols];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(node) = stack.pop() {
        let neighbours: Vec<usize> = if node < rows {
            (0..cols).filter(|&q| m[(node, q)] != ZERO).map(|q| rows + q).collect()
        } else {
            let q = node - rows;
            (0..rows).filter(|&p| m[(p, q)] != ZERO).collect()
        };
        for next in neighbours {
            if !seen[next] {
                seen[next] = true;
                stack.push(next);
            }
        }
    }
    seen.iter().all(|&s| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::circular_distance;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn outer(left: &[f64], right: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_fn(left.len(), right.len(), |p, q| Complex64::from_polar(1.0, left[p] + right[q]))
    }

    /// Brute-force reference: trust row 1 for the column phases, column 1 for the rows.
    fn single_row_reference(r: &ComplexMatrix) -> (PhaseVector, PhaseVector) {
        let right = PhaseVector::new((0..r.ncols()).map(|q| r[(0, q)].arg()));
        let left = PhaseVector::new((0..r.nrows()).map(|p| r[(p, 0)].arg() - right[0]));
        (left, right)
    }

    #[test]
    fn all_ones_gives_zero_phases() {
        let r = ComplexMatrix::from_element(4, 4, Complex64::new(1.0, 0.0));
        let (u, v) = rank1_phase_factor(&r, &DMatrix::from_element(4, 4, 1.0)).unwrap();
        assert!(u.max_distance(&PhaseVector::zeros(4)) < 1e-12);
        assert!(v.max_distance(&PhaseVector::zeros(4)) < 1e-12);
    }

    #[test]
    fn exact_outer_product_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for n in [2, 5, 10, 30] {
            let left: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
            let right: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
            let r = outer(&left, &right);
            let weights = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.1..1.0));
            let (u, v) = rank1_phase_factor(&r, &weights).unwrap();
            for p in 0..n {
                assert!(circular_distance(u[p], left[p] - left[0]) < 1e-12);
                assert!(circular_distance(v[p], right[p] + left[0]) < 1e-12);
            }
            let rebuilt = outer(u.as_slice(), v.as_slice());
            assert!(crate::linalg::max_abs_diff(&rebuilt, &r) < 1e-12);
        }
    }

    #[test]
    fn noisy_outer_product_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10;
        let left: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
        let right: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
        let clean = outer(&left, &right);
        let noisy = clean.map(|z| {
            let e = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            z * (Complex64::new(1.0, 0.0) + e * (1e-3 / 2f64.sqrt()))
        });
        let weights = DMatrix::from_element(n, n, 1.0);
        let (u, v) = rank1_phase_factor(&noisy, &weights).unwrap();
        for p in 0..n {
            for q in 0..n {
                let fitted = u[p] + v[q];
                assert!(circular_distance(fitted, left[p] + right[q]) <= 1e-2);
            }
        }
    }

    #[test]
    fn beats_single_row_reference_under_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..20 {
            let n = 8;
            let left: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
            let right: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
            let r = outer(&left, &right).map(|z| z * Complex64::from_polar(1.0, rng.random_range(-0.05..0.05)));
            let weights = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.2..1.0));
            let (u, v) = rank1_phase_factor(&r, &weights).unwrap();
            let (ru, rv) = single_row_reference(&r);
            let ours = weighted_phase_residual(&r, &weights, &u, &v);
            let reference = weighted_phase_residual(&r, &weights, &ru, &rv);
            assert!(ours <= reference, "{ours} > {reference}");
        }
    }

    #[test]
    fn disconnected_support_is_rejected() {
        let r = ComplexMatrix::from_element(4, 4, Complex64::new(1.0, 0.0));
        // block diagonal support: rows {0,1}×cols {0,1} and rows {2,3}×cols {2,3}
        let weights = DMatrix::from_fn(4, 4, |p, q| if (p < 2) == (q < 2) { 1.0 } else { 0.0 });
        assert_eq!(rank1_phase_factor(&r, &weights).unwrap_err(), Error::DisconnectedSupport);
        // tiny weights count as absent
        let weights = DMatrix::from_fn(4, 4, |p, q| if (p < 2) == (q < 2) { 1.0 } else { 1e-12 });
        assert_eq!(rank1_phase_factor(&r, &weights).unwrap_err(), Error::DisconnectedSupport);
    }
}
