//! Mixing-layer reconstruction from tomography records.
//!
//! With phases `Φ` programmed on phase layer `m` (all others zero) the device
//! implements `V_m = C_m·Φ·C_m⁻¹·C_1`, so the columns of the cumulative matrix
//! `C_m = U_K·…·U_m` are eigenvectors of `V_m·C_1⁻¹`, labelled by which phase
//! of `Φ` their eigenvalue carries. Mixing layers then follow from
//! `U_m = C_{m+1}⁻¹·C_m` and `U_K = C_K`.
//!
//! Intensity-only records are known only up to their output phases. Pairing
//! each pattern with its conjugate gives `X = Ṽ_m·C̃_1⁻¹` and
//! `Y = C̃_1·(Ṽ_m^c)⁻¹`, which satisfy `X = D·Y·D'` for two unknown diagonal
//! phase matrices; once those are fitted, both `D⁻¹X` and `Y·D'` are similar
//! to `Φ` through `C̃_m` and their two eigen-solutions are averaged.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    align_columns, condition_number, eigen_decompose, estimate_spectral_rotation, gauge_fix_columns, invert,
    matrix_geometric_mean, phase_diagonal, phase_sorted_eigencolumns, project_unitary, rank1_phase_factor,
    sort_eigencolumns, sorting_tolerance, weighted_phase_residual, ComplexMatrix, PhaseVector,
};
use crate::model::InterferometerModel;
use crate::tomography::{Configuration, MeasurementPlan, TomographyMode, TomographyRecord};

/// Tunable limits of the reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionOptions {
    /// Largest accepted column distance between the X- and Y-derived
    /// estimates of one block.
    pub divergence_limit: f64,
    /// Largest accepted condition number of an assembled cumulative matrix.
    pub condition_limit: f64,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self { divergence_limit: 0.5, condition_limit: 1e8 }
    }
}

/// How the column phases of a cumulative estimate are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// Taken as measured (the baseline `C_1`).
    Measured,
    /// Unit-norm columns, largest-modulus entry real and positive.
    UnitNormRealPivot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeEstimate {
    /// Layer index `m`, 1-based.
    pub layer: usize,
    pub matrix: ComplexMatrix,
    pub gauge: Gauge,
    /// Condition number before unitary projection.
    pub condition: f64,
    /// Frobenius distance moved by the unitary projection.
    pub projection_residual: f64,
}

/// Per-block diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagnostics {
    pub layer: usize,
    pub modes: Vec<usize>,
    /// Worst circular distance between a target phase and its eigenvalue.
    pub sorting_residual: f64,
    /// Mean weighted residual of the relative-phase fit (intensity mode).
    pub phase_residual: Option<f64>,
    /// `‖D⁻¹X − Y·D'‖_F` (intensity mode).
    pub combination_disagreement: Option<f64>,
    /// Largest column distance between the two aligned estimates (intensity mode).
    pub estimate_spread: Option<f64>,
    /// Global spectral rotation removed before sorting (intensity mode).
    pub spectral_rotation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub model_estimate: InterferometerModel,
    pub cumulative_estimates: Vec<CumulativeEstimate>,
    pub blocks: Vec<BlockDiagnostics>,
    pub mode: TomographyMode,
}

/// Column block of one cumulative matrix with its diagnostics.
#[derive(Debug, Clone)]
pub struct BlockSolution {
    pub columns: ComplexMatrix,
    pub diagnostics: BlockDiagnostics,
}

/// Full tomography: eigenvectors of `V_m·C_1⁻¹` matched to the pattern phases.
pub fn solve_cumulative_full(
    v_m: &ComplexMatrix,
    c1: &ComplexMatrix,
    config: &Configuration,
) -> Result<BlockSolution> {
    let x = v_m * invert(c1)?;
    let sorted = phase_sorted_eigencolumns(&x, &config.targets())?;
    Ok(BlockSolution {
        columns: sorted.columns,
        diagnostics: BlockDiagnostics {
            layer: config.layer,
            modes: config.active_modes.clone(),
            sorting_residual: sorted.worst_distance,
            phase_residual: None,
            combination_disagreement: None,
            estimate_spread: None,
            spectral_rotation: None,
        },
    })
}

/// Fit `X = diag(e^{iδ})·Y·diag(e^{iδ'})` from the entrywise ratios
/// `x_pq / y_pq`, weighted by `|x_pq·y_pq|`, with `δ_1 = 0`.
pub fn recover_relative_phases(x: &ComplexMatrix, y: &ComplexMatrix) -> Result<(PhaseVector, PhaseVector)> {
    let (ratio, weights) = ratio_and_weights(x, y)?;
    rank1_phase_factor(&ratio, &weights)
}

fn ratio_and_weights(x: &ComplexMatrix, y: &ComplexMatrix) -> Result<(ComplexMatrix, nalgebra::DMatrix<f64>)> {
    if x.shape() != y.shape() {
        return Err(Error::DimensionMismatch(format!("X {:?} vs Y {:?}", x.shape(), y.shape())));
    }
    let ratio = x.zip_map(y, |a, b| if b.norm() > 0.0 { a / b } else { Complex64::new(0.0, 0.0) });
    let weights = nalgebra::DMatrix::from_fn(x.nrows(), x.ncols(), |p, q| (x[(p, q)] * y[(p, q)]).norm());
    Ok((ratio, weights))
}

/// Intensity-only tomography: recover the relative output phases between the
/// plain and conjugate patterns, eigen-solve both de-phased similarity
/// matrices and combine the two estimates.
pub fn solve_cumulative_intensity(
    v_m: &ComplexMatrix,
    v_mc: &ComplexMatrix,
    c1: &ComplexMatrix,
    config: &Configuration,
    options: &ReconstructionOptions,
) -> Result<BlockSolution> {
    let n = c1.nrows();
    let x = v_m * invert(c1)?;
    let y = c1 * invert(v_mc)?;
    let (ratio, weights) = ratio_and_weights(&x, &y)?;
    let (delta, delta_c) = rank1_phase_factor(&ratio, &weights)?;
    let phase_residual = weighted_phase_residual(&ratio, &weights, &delta, &delta_c) / weights.sum();

    let minus_delta: Vec<f64> = delta.as_slice().iter().map(|d| -d).collect();
    let from_x = phase_diagonal(&minus_delta) * &x;
    let from_y = &y * delta_c.to_diagonal();
    let disagreement = (&from_x - &from_y).norm();

    // The fitted phases leave one global phase free. It rotates both
    // de-phased spectra by the same angle, so estimate it once from the
    // pooled eigenvalues against the known pattern spectrum.
    let targets = config.targets();
    let spectrum = config.spectrum(n);
    let tolerance = sorting_tolerance(targets.len());
    let dec_x = eigen_decompose(&from_x)?;
    let dec_y = eigen_decompose(&from_y)?;
    let pooled = [dec_x.values.as_slice(), dec_y.values.as_slice()].concat();
    let rotation = estimate_spectral_rotation(&pooled, &[spectrum.as_slice(), spectrum.as_slice()].concat(), tolerance)?;
    let sorted_x = sort_eigencolumns(&dec_x.rotated(rotation), &targets, tolerance)?;
    let sorted_y = sort_eigencolumns(&dec_y.rotated(rotation), &targets, tolerance)?;
    let (est_x, sort_x) = (sorted_x.columns, sorted_x.worst_distance);
    let (mut est_y, sort_y) = (sorted_y.columns, sorted_y.worst_distance);
    align_columns(&mut est_y, &est_x);

    let spread = est_x
        .column_iter()
        .zip(est_y.column_iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if !(spread <= options.divergence_limit) {
        return Err(Error::CombinationDivergence { disagreement: spread, limit: options.divergence_limit });
    }

    let mut columns = if targets.len() == n {
        matrix_geometric_mean(&est_x, &est_y)?
    } else {
        (&est_x + &est_y) * Complex64::new(0.5, 0.0)
    };
    gauge_fix_columns(&mut columns);

    Ok(BlockSolution {
        columns,
        diagnostics: BlockDiagnostics {
            layer: config.layer,
            modes: config.active_modes.clone(),
            sorting_residual: sort_x.max(sort_y),
            phase_residual: Some(phase_residual),
            combination_disagreement: Some(disagreement),
            estimate_spread: Some(spread),
            spectral_rotation: Some(rotation),
        },
    })
}

/// `U_m = P[C_{m+1}⁻¹·C_m]` for `m < K` and `U_K = P[C_K]`.
///
/// `cumulatives` must hold `C_1..C_K` in order.
pub fn extract_mixing_layers(cumulatives: &[CumulativeEstimate]) -> Result<Vec<ComplexMatrix>> {
    for (i, c) in cumulatives.iter().enumerate() {
        if c.layer != i + 1 {
            return Err(Error::PlanMismatch(format!(
                "cumulative estimate {} found at position {}",
                c.layer,
                i + 1
            )));
        }
    }
    let Some(last) = cumulatives.last() else {
        return Err(Error::PlanMismatch("no cumulative estimates".into()));
    };
    let mut layers: Vec<ComplexMatrix> = cumulatives
        .windows(2)
        .map(|pair| project_unitary(&(invert(&pair[1].matrix)? * &pair[0].matrix)))
        .collect::<Result<_>>()?;
    layers.push(project_unitary(&last.matrix)?);
    Ok(layers)
}

/// Reconstruct the model from records that match `plan` one-to-one.
pub fn reconstruct(records: &[TomographyRecord], plan: &MeasurementPlan) -> Result<ReconstructionResult> {
    reconstruct_with(records, plan, &ReconstructionOptions::default())
}

pub fn reconstruct_with(
    records: &[TomographyRecord],
    plan: &MeasurementPlan,
    options: &ReconstructionOptions,
) -> Result<ReconstructionResult> {
    check_records(records, plan)?;
    let n = plan.modes;
    let c1 = &records[0].measured;

    // (record index of the plain pattern, conjugate record index)
    let step = match plan.mode {
        TomographyMode::Full => 1,
        TomographyMode::IntensityOnly => 2,
    };
    let jobs: Vec<usize> = (1..records.len()).step_by(step).collect();
    let solutions: Vec<BlockSolution> = jobs
        .par_iter()
        .map(|&i| {
            let plain = &records[i];
            match plan.mode {
                TomographyMode::Full => solve_cumulative_full(&plain.measured, c1, &plain.configuration),
                TomographyMode::IntensityOnly => solve_cumulative_intensity(
                    &plain.measured,
                    &records[i + 1].measured,
                    c1,
                    &plain.configuration,
                    options,
                ),
            }
        })
        .collect::<Result<_>>()?;

    let mut cumulative_estimates = vec![CumulativeEstimate {
        layer: 1,
        matrix: project_unitary(c1)?,
        gauge: Gauge::Measured,
        condition: condition_number(c1),
        projection_residual: (project_unitary(c1)? - c1).norm(),
    }];
    let mut assembled = vec![ComplexMatrix::zeros(n, n); plan.depth.saturating_sub(1)];
    for solution in &solutions {
        let target = &mut assembled[solution.diagnostics.layer - 2];
        for (j, &mode) in solution.diagnostics.modes.iter().enumerate() {
            target.set_column(mode, &solution.columns.column(j));
        }
    }
    for (i, matrix) in assembled.into_iter().enumerate() {
        let condition = condition_number(&matrix);
        if !(condition <= options.condition_limit) {
            return Err(Error::IllConditioned(condition));
        }
        let mut projected = project_unitary(&matrix)?;
        gauge_fix_columns(&mut projected);
        cumulative_estimates.push(CumulativeEstimate {
            layer: i + 2,
            projection_residual: (&projected - &matrix).norm(),
            matrix: projected,
            gauge: Gauge::UnitNormRealPivot,
            condition,
        });
    }

    let layers = extract_mixing_layers(&cumulative_estimates)?;
    Ok(ReconstructionResult {
        model_estimate: InterferometerModel::new(layers)?,
        cumulative_estimates,
        blocks: solutions.into_iter().map(|s| s.diagnostics).collect(),
        mode: plan.mode,
    })
}

fn check_records(records: &[TomographyRecord], plan: &MeasurementPlan) -> Result<()> {
    if records.len() != plan.len() {
        return Err(Error::PlanMismatch(format!("{} records for a plan of {}", records.len(), plan.len())));
    }
    for (i, (record, config)) in records.iter().zip(&plan.configurations).enumerate() {
        if record.mode != plan.mode {
            return Err(Error::PlanMismatch(format!("record {i} is {} tomography", record.mode)));
        }
        if &record.configuration != config {
            return Err(Error::PlanMismatch(format!("record {i} does not match its planned configuration")));
        }
        if record.measured.shape() != (plan.modes, plan.modes) {
            return Err(Error::PlanMismatch(format!("record {i} has shape {:?}", record.measured.shape())));
        }
    }
    if !records.first().is_some_and(|r| r.configuration.is_baseline()) {
        return Err(Error::PlanMismatch("baseline record missing".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{delta_t_max, output_phase_fidelity};
    use crate::linalg::{max_abs_diff, unitarity_defect};
    use crate::model::{cumulative_matrix, random_model, transfer_matrix, PhaseConfiguration};
    use crate::random::{ginibre, substream};
    use crate::tomography::{plan_measurements, simulate_plan, strip_output_phases};
    use rand::Rng;
    use std::f64::consts::TAU;

    fn column_phase_mismatch(estimate: &ComplexMatrix, truth: &ComplexMatrix) -> f64 {
        // |diag(C†Ĉ)| = 1 when columns agree up to unit-modulus factors
        let overlap = truth.adjoint() * estimate;
        (0..overlap.ncols()).map(|j| (overlap[(j, j)].norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    fn identity_model(n: usize, k: usize) -> InterferometerModel {
        InterferometerModel::new(vec![ComplexMatrix::identity(n, n); k]).unwrap()
    }

    fn perturb(m: &ComplexMatrix, size: f64, seed: u64) -> ComplexMatrix {
        let g = ginibre(m.nrows(), &mut substream(seed, 99));
        m + &g * Complex64::new(size / g.norm(), 0.0)
    }

    #[test]
    fn full_block_from_known_model() {
        let model = random_model(5, 3, 0.2, &mut substream(1, 0)).unwrap();
        let plan = plan_measurements(5, 3, 5, TomographyMode::Full).unwrap();
        let records = simulate_plan(&model, &plan, 0.0, 2).unwrap();
        let config = &records[1].configuration;
        assert_eq!(config.layer, 2);
        let block = solve_cumulative_full(&records[1].measured, &records[0].measured, config).unwrap();
        let truth = cumulative_matrix(&model, 2).unwrap();
        assert!(column_phase_mismatch(&block.columns, &truth) < 1e-10);

        let noisy = solve_cumulative_full(
            &perturb(&records[1].measured, 1e-6, 3),
            &perturb(&records[0].measured, 1e-6, 4),
            config,
        )
        .unwrap();
        let mut aligned = noisy.columns.clone();
        align_columns(&mut aligned, &block.columns);
        assert!(max_abs_diff(&aligned, &block.columns) < 1e-4);
    }

    #[test]
    fn identity_mixers_give_canonical_columns() {
        let model = identity_model(4, 3);
        let plan = plan_measurements(4, 3, 4, TomographyMode::Full).unwrap();
        let records = simulate_plan(&model, &plan, 0.0, 1).unwrap();
        let block =
            solve_cumulative_full(&records[1].measured, &records[0].measured, &records[1].configuration).unwrap();
        assert!(max_abs_diff(&block.columns, &ComplexMatrix::identity(4, 4)) < 1e-12);

        // a diagonal device has zeros in its first column, so output phases
        // cannot be stripped
        let plan = plan_measurements(4, 3, 4, TomographyMode::IntensityOnly).unwrap();
        assert!(matches!(simulate_plan(&model, &plan, 0.0, 1), Err(Error::ZeroFirstColumnEntry { row: 1, .. })));
    }

    #[test]
    fn relative_phases_of_equal_matrices_vanish() {
        let y = ginibre(5, &mut substream(5, 0));
        let (a, b) = recover_relative_phases(&y, &y).unwrap();
        assert!(a.max_distance(&PhaseVector::zeros(5)) < 1e-12);
        assert!(b.max_distance(&PhaseVector::zeros(5)) < 1e-12);
    }

    #[test]
    fn relative_phases_from_constructed_sandwich() {
        let mut rng = substream(6, 0);
        let n = 7;
        let d1: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
        let d2: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
        let y = ginibre(n, &mut rng);
        let x = phase_diagonal(&d1) * &y * phase_diagonal(&d2);
        let (a, b) = recover_relative_phases(&x, &y).unwrap();
        for p in 0..n {
            assert!(crate::linalg::circular_distance(a[p], d1[p] - d1[0]) < 1e-12);
            assert!(crate::linalg::circular_distance(b[p], d2[p] + d1[0]) < 1e-12);
        }
        let rebuilt = a.to_diagonal() * &y * b.to_diagonal();
        assert!(max_abs_diff(&rebuilt, &x) < 1e-12);

        let noisy = x.map(|z| z * (Complex64::new(1.0, 0.0) + Complex64::new(rng.random_range(-7e-4..7e-4), rng.random_range(-7e-4..7e-4))));
        let (a, b) = recover_relative_phases(&noisy, &y).unwrap();
        for p in 0..n {
            assert!(crate::linalg::circular_distance(a[p], d1[p] - d1[0]) < 1e-2);
            assert!(crate::linalg::circular_distance(b[p], d2[p] + d1[0]) < 1e-2);
        }
    }

    #[test]
    fn intensity_block_from_known_model() {
        let (n, k) = (5, 3);
        let model = random_model(n, k, 0.2, &mut substream(7, 0)).unwrap();
        let plan = plan_measurements(n, k, n, TomographyMode::IntensityOnly).unwrap();
        let records = simulate_plan(&model, &plan, 0.0, 8).unwrap();
        let (plain, conj) = (&records[1], &records[2]);
        assert!(!plain.configuration.conjugate && conj.configuration.conjugate);
        let block = solve_cumulative_intensity(
            &plain.measured,
            &conj.measured,
            &records[0].measured,
            &plain.configuration,
            &ReconstructionOptions::default(),
        )
        .unwrap();
        // C̃_2 = D[C_1]·C_2
        let (_, d_c1) = strip_output_phases(&cumulative_matrix(&model, 1).unwrap()).unwrap();
        let truth = d_c1.to_diagonal() * cumulative_matrix(&model, 2).unwrap();
        assert!(column_phase_mismatch(&block.columns, &truth) < 1e-10);
        let mut expected = truth.clone();
        gauge_fix_columns(&mut expected);
        assert!(max_abs_diff(&block.columns, &expected) < 1e-10);
        assert!(block.diagnostics.combination_disagreement.unwrap() < 1e-10);
        assert!(block.diagnostics.estimate_spread.unwrap() < 1e-10);
    }

    #[test]
    fn intensity_block_under_noise() {
        let (n, k) = (6, 3);
        let model = random_model(n, k, 0.1, &mut substream(9, 0)).unwrap();
        let plan = plan_measurements(n, k, n, TomographyMode::IntensityOnly).unwrap();
        let (_, d_c1) = strip_output_phases(&cumulative_matrix(&model, 1).unwrap()).unwrap();
        let mut truth = d_c1.to_diagonal() * cumulative_matrix(&model, 2).unwrap();
        gauge_fix_columns(&mut truth);
        let mut combined_ok = 0;
        let trials = 30;
        for trial in 0..trials {
            let records = simulate_plan(&model, &plan, 1e-4 / (plan.len() as f64).sqrt(), 100 + trial).unwrap();
            let c1 = &records[0].measured;
            let x = &records[1].measured * invert(c1).unwrap();
            let y = c1 * invert(&records[2].measured).unwrap();
            let (d, dc) = recover_relative_phases(&x, &y).unwrap();
            let minus: Vec<f64> = d.as_slice().iter().map(|v| -v).collect();
            let cfg = &records[1].configuration;
            let tol = sorting_tolerance(n);
            let single = |m: ComplexMatrix| {
                let dec = eigen_decompose(&m).unwrap();
                let rot = estimate_spectral_rotation(&dec.values, &cfg.spectrum(n), tol).unwrap();
                let mut c = sort_eigencolumns(&dec.rotated(rot), &cfg.targets(), tol).unwrap().columns;
                align_columns(&mut c, &truth);
                (c - &truth).norm()
            };
            let err_x = single(phase_diagonal(&minus) * &x);
            let err_y = single(&y * dc.to_diagonal());
            let block = solve_cumulative_intensity(
                &records[1].measured,
                &records[2].measured,
                c1,
                cfg,
                &ReconstructionOptions::default(),
            )
            .unwrap();
            assert!(block.diagnostics.estimate_spread.unwrap() <= 1e-2);
            let mut combined = block.columns.clone();
            align_columns(&mut combined, &truth);
            let err = (combined - &truth).norm();
            if err <= err_x.max(err_y) {
                combined_ok += 1;
            }
        }
        assert_eq!(combined_ok, trials);
    }

    #[test]
    fn single_layer_uses_baseline_only() {
        let model = random_model(4, 1, 0.1, &mut substream(10, 0)).unwrap();
        for mode in [TomographyMode::Full, TomographyMode::IntensityOnly] {
            let plan = plan_measurements(4, 1, 4, mode).unwrap();
            assert_eq!(plan.len(), 1);
            let records = simulate_plan(&model, &plan, 1e-3, 11).unwrap();
            let result = reconstruct(&records, &plan).unwrap();
            let expected = project_unitary(&records[0].measured).unwrap();
            assert!(max_abs_diff(&result.model_estimate.layers()[0], &expected) < 1e-14);
        }
    }

    #[test]
    fn noiseless_full_reconstruction_is_exact() {
        for (n, m) in [(6, 6), (10, 10), (10, 2), (5, 1)] {
            let model = random_model(n, n, 0.1, &mut substream(12, n as u64)).unwrap();
            let plan = plan_measurements(n, n, m, TomographyMode::Full).unwrap();
            let records = simulate_plan(&model, &plan, 0.0, 13).unwrap();
            let result = reconstruct(&records, &plan).unwrap();
            let dt = delta_t_max(&model, &result.model_estimate).unwrap();
            assert!(dt <= 1e-8, "N = {n}, M = {m}: {dt:e}");
            for layer in result.model_estimate.layers() {
                assert!(unitarity_defect(layer) < 1e-10);
            }
        }
    }

    #[test]
    fn noiseless_intensity_reconstruction_is_exact_up_to_output_phases() {
        let n = 6;
        let model = random_model(n, n, 0.1, &mut substream(14, 0)).unwrap();
        for m in [6, 3, 1] {
            let plan = plan_measurements(n, n, m, TomographyMode::IntensityOnly).unwrap();
            let records = simulate_plan(&model, &plan, 0.0, 15).unwrap();
            let result = reconstruct(&records, &plan).unwrap();
            assert!(delta_t_max(&model, &result.model_estimate).unwrap() <= 1e-8);
            let mut rng = substream(16, 0);
            let mut plain_min: f64 = 1.0;
            for _ in 0..100 {
                let config = PhaseConfiguration::random(n, n, &mut rng);
                let v_true = transfer_matrix(&model, &config).unwrap();
                let v_pred = transfer_matrix(&result.model_estimate, &config).unwrap();
                let f = output_phase_fidelity(&v_true, &v_pred).unwrap();
                assert!(1.0 - f.output_phase <= 1e-10, "M = {m}: {:e}", 1.0 - f.output_phase);
                plain_min = plain_min.min(f.plain);
            }
            // the last layer is only known up to output phases
            assert!(plain_min < 0.999);
            for block in &result.blocks {
                assert!(block.combination_disagreement.unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn off_by_one_block_is_rotationally_ambiguous() {
        // M' = N − 1 leaves the pattern spectrum invariant under a rotation
        let model = random_model(4, 2, 0.1, &mut substream(17, 0)).unwrap();
        let plan = plan_measurements(4, 2, 3, TomographyMode::IntensityOnly).unwrap();
        let records = simulate_plan(&model, &plan, 0.0, 18).unwrap();
        assert!(matches!(reconstruct(&records, &plan), Err(Error::SortingAmbiguity { .. })));
    }

    #[test]
    fn gauge_changes_leave_predictions_unchanged() {
        let n = 5;
        let model = random_model(n, 4, 0.1, &mut substream(19, 0)).unwrap();
        let plan = plan_measurements(n, 4, n, TomographyMode::Full).unwrap();
        let records = simulate_plan(&model, &plan, 1e-3, 20).unwrap();
        let result = reconstruct(&records, &plan).unwrap();
        let mut rng = substream(21, 0);
        let mut regauged = result.cumulative_estimates.clone();
        for c in regauged.iter_mut().skip(1) {
            let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
            c.matrix = &c.matrix * phase_diagonal(&lambda);
        }
        let layers = InterferometerModel::new(extract_mixing_layers(&regauged).unwrap()).unwrap();
        for _ in 0..20 {
            let config = PhaseConfiguration::random(n, 4, &mut rng);
            let a = transfer_matrix(&result.model_estimate, &config).unwrap();
            let b = transfer_matrix(&layers, &config).unwrap();
            assert!(max_abs_diff(&a, &b) <= 1e-9);
        }
    }

    #[test]
    fn mismatched_records_are_rejected() {
        let model = random_model(4, 3, 0.1, &mut substream(22, 0)).unwrap();
        let plan = plan_measurements(4, 3, 4, TomographyMode::Full).unwrap();
        let records = simulate_plan(&model, &plan, 0.0, 23).unwrap();
        assert!(matches!(reconstruct(&records[1..], &plan), Err(Error::PlanMismatch(_))));
        let mut swapped = records.clone();
        swapped.swap(1, 2);
        assert!(matches!(reconstruct(&swapped, &plan), Err(Error::PlanMismatch(_))));
        let other = plan_measurements(4, 3, 4, TomographyMode::IntensityOnly).unwrap();
        assert!(matches!(reconstruct(&records, &other), Err(Error::PlanMismatch(_))));
    }

    #[test]
    fn extraction_requires_ordered_estimates() {
        let model = random_model(3, 3, 0.1, &mut substream(24, 0)).unwrap();
        let mut estimates: Vec<CumulativeEstimate> = (1..=3)
            .map(|m| CumulativeEstimate {
                layer: m,
                matrix: cumulative_matrix(&model, m).unwrap(),
                gauge: Gauge::Measured,
                condition: 1.0,
                projection_residual: 0.0,
            })
            .collect();
        let layers = extract_mixing_layers(&estimates).unwrap();
        for (a, b) in layers.iter().zip(model.layers()) {
            assert!(max_abs_diff(a, b) < 1e-12);
        }
        estimates.swap(0, 1);
        assert!(extract_mixing_layers(&estimates).is_err());
    }
}
