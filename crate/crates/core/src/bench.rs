//! Benchmark metrics and the Monte-Carlo campaign loop.
//!
//! Three figures of merit are collected per trial: the largest transmission
//! coefficient error over all mixing layers, the 95th percentile of the
//! output-phase-optimized infidelity over random phase configurations, and
//! the wall-clock time of the reconstruction call alone.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::model::{random_model, transfer_matrix, InterferometerModel, PhaseConfiguration};
use crate::random::{derive_seed, substream};
use crate::reconstruct::reconstruct;
use crate::tomography::{plan_measurements, simulate_plan, TomographyMode};

/// `max_{k,m,n} | |U_k^true|²_mn − |U_k^rec|²_mn |`.
pub fn delta_t_max(truth: &InterferometerModel, estimate: &InterferometerModel) -> Result<f64> {
    if truth.modes() != estimate.modes() || truth.depth() != estimate.depth() {
        return Err(Error::DimensionMismatch(format!(
            "models are {}x{} and {}x{} (modes x layers)",
            truth.modes(),
            truth.depth(),
            estimate.modes(),
            estimate.depth()
        )));
    }
    Ok(truth
        .layers()
        .iter()
        .zip(estimate.layers())
        .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x.norm_sqr() - y.norm_sqr()).abs()))
        .fold(0.0, f64::max))
}

/// Plain and output-phase-optimized fidelity of a predicted transfer matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fidelity {
    /// `|Tr(V_true† V_pred)|² / (Tr(V_true† V_true)·Tr(V_pred† V_pred))`.
    pub plain: f64,
    /// The same, maximized over diagonal unit-modulus output phases on both
    /// matrices: the numerator becomes `(Σ_n |Σ_m conj(V_true,nm)·V_pred,nm|)²`.
    pub output_phase: f64,
}

pub fn output_phase_fidelity(v_true: &ComplexMatrix, v_pred: &ComplexMatrix) -> Result<Fidelity> {
    if v_true.shape() != v_pred.shape() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", v_true.shape(), v_pred.shape())));
    }
    let norm_true = v_true.norm_squared();
    let norm_pred = v_pred.norm_squared();
    if !(norm_true > 0.0 && norm_pred > 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let denominator = norm_true * norm_pred;
    let row_overlaps: Vec<_> = v_true
        .row_iter()
        .zip(v_pred.row_iter())
        .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<num_complex::Complex64>())
        .collect();
    let trace: num_complex::Complex64 = row_overlaps.iter().sum();
    let matched: f64 = row_overlaps.iter().map(|z| z.norm()).sum();
    Ok(Fidelity {
        plain: (trace.norm_sqr() / denominator).min(1.0),
        output_phase: (matched * matched / denominator).min(1.0),
    })
}

/// Nearest-rank percentile (`percent` in 1..=100) of a nonempty sample.
pub fn nearest_rank_percentile(values: &[f64], percent: usize) -> f64 {
    assert!(!values.is_empty() && (1..=100).contains(&percent));
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (percent * sorted.len()).div_ceil(100).max(1);
    sorted[rank - 1]
}

/// Smallest accepted sample count for [`fidelity_percentile`].
pub const MIN_FIDELITY_SAMPLES: usize = 20;

/// 95th percentile of `1 − F̃` over `samples` phase configurations drawn
/// uniformly on `[0, 2π)` for every phase of every layer.
pub fn fidelity_percentile<R: rand::Rng + ?Sized>(
    truth: &InterferometerModel,
    estimate: &InterferometerModel,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if samples < MIN_FIDELITY_SAMPLES {
        return Err(Error::Validation {
            field: "fidelity_samples".into(),
            reason: format!("need at least {MIN_FIDELITY_SAMPLES}, got {samples}"),
        });
    }
    let infidelities = (0..samples)
        .map(|_| {
            let config = PhaseConfiguration::random(truth.modes(), truth.depth(), rng);
            let v_true = transfer_matrix(truth, &config)?;
            let v_pred = transfer_matrix(estimate, &config)?;
            Ok((1.0 - output_phase_fidelity(&v_true, &v_pred)?.output_phase).max(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(nearest_rank_percentile(&infidelities, 95))
}

/// One point of an experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    #[serde(rename = "N")]
    pub modes: usize,
    #[serde(rename = "K")]
    pub depth: usize,
    #[serde(rename = "M")]
    pub block_size: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub mode: TomographyMode,
}

/// Which figure a grid point feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    /// Error metrics against ε.
    ErrorSweep,
    /// Reconstruction time against N.
    Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub points: Vec<(GridPoint, Vec<Series>)>,
    pub trials: usize,
    pub fidelity_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub epsilon: f64,
    pub mode: TomographyMode,
    pub trial: usize,
    pub seed: u64,
    pub delta_t_max: Option<f64>,
    pub delta_f95: Option<f64>,
    pub reconstruction_seconds: Option<f64>,
    pub failure: Option<String>,
}

impl TrialOutcome {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Median and quartiles (linear interpolation between order statistics).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Summary {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let at = |q: f64| {
            let pos = q * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        };
        Some(Self { median: at(0.5), q25: at(0.25), q75: at(0.75) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub point: GridPoint,
    pub series: Vec<Series>,
    /// Configurations measured per trial.
    pub measurements: usize,
    pub trials: usize,
    pub failures: usize,
    pub delta_t_max: Option<Summary>,
    pub delta_f95: Option<Summary>,
    pub seconds: Option<Summary>,
    pub outcomes: Vec<TrialOutcome>,
}

impl PointReport {
    /// More than half of the trials failed.
    pub fn exceeded_failure_threshold(&self) -> bool {
        2 * self.failures > self.trials
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub trials: usize,
    pub fidelity_samples: usize,
    pub seed: u64,
    pub points: Vec<PointReport>,
}

impl BenchmarkReport {
    pub fn any_point_failed(&self) -> bool {
        self.points.iter().any(PointReport::exceeded_failure_threshold)
    }
}

/// Random streams of one trial. The device and the fidelity sample depend
/// only on `(seed, N, K, γ, trial)`, so every mode and noise level at the
/// same trial index sees the same device; tomography noise additionally
/// depends on the mode, `M` and ε.
fn trial_seeds(seed: u64, point: &GridPoint, trial: usize) -> (u64, u64) {
    let device = derive_seed(seed, &[point.modes as u64, point.depth as u64, point.gamma.to_bits(), trial as u64]);
    let mode = match point.mode {
        TomographyMode::Full => 0,
        TomographyMode::IntensityOnly => 1,
    };
    let noise = derive_seed(device, &[mode, point.block_size as u64, point.epsilon.to_bits()]);
    (device, noise)
}

/// Run one trial: draw a device, simulate its tomography, reconstruct
/// (timed) and score the estimate.
pub fn run_trial(point: &GridPoint, trial: usize, fidelity_samples: usize, seed: u64) -> TrialOutcome {
    let (device_seed, noise_seed) = trial_seeds(seed, point, trial);
    let mut outcome = TrialOutcome {
        epsilon: point.epsilon,
        mode: point.mode,
        trial,
        seed: device_seed,
        delta_t_max: None,
        delta_f95: None,
        reconstruction_seconds: None,
        failure: None,
    };
    let scored = (|| -> Result<(f64, f64, f64)> {
        let truth = random_model(point.modes, point.depth, point.gamma, &mut substream(device_seed, 0))?;
        let plan = plan_measurements(point.modes, point.depth, point.block_size, point.mode)?;
        let records = simulate_plan(&truth, &plan, point.epsilon, noise_seed)?;
        let started = Instant::now();
        let result = reconstruct(&records, &plan)?;
        let seconds = started.elapsed().as_secs_f64();
        let dt = delta_t_max(&truth, &result.model_estimate)?;
        let df = fidelity_percentile(&truth, &result.model_estimate, fidelity_samples, &mut substream(device_seed, 1))?;
        Ok((dt, df, seconds))
    })();
    match scored {
        Ok((dt, df, seconds)) => {
            outcome.delta_t_max = Some(dt);
            outcome.delta_f95 = Some(df);
            outcome.reconstruction_seconds = Some(seconds);
        }
        Err(e) => outcome.failure = Some(e.to_string()),
    }
    outcome
}

/// Run every trial of every grid point (in parallel on the current rayon
/// pool) and aggregate. Results other than timings do not depend on the
/// schedule.
pub fn run_campaign(spec: &CampaignSpec) -> Result<BenchmarkReport> {
    if spec.points.is_empty() || spec.trials == 0 {
        return Err(Error::Validation { field: "grid".into(), reason: "need at least one point and one trial".into() });
    }
    let jobs: Vec<(usize, usize)> =
        (0..spec.points.len()).flat_map(|g| (0..spec.trials).map(move |t| (g, t))).collect();
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(g, t)| run_trial(&spec.points[g].0, t, spec.fidelity_samples, spec.seed))
        .collect();

    let points = spec
        .points
        .iter()
        .zip(outcomes.chunks(spec.trials))
        .map(|((point, series), outcomes)| {
            let ok: Vec<&TrialOutcome> = outcomes.iter().filter(|o| !o.failed()).collect();
            let collect = |f: fn(&TrialOutcome) -> Option<f64>| ok.iter().filter_map(|o| f(o)).collect::<Vec<_>>();
            let measurements = plan_measurements(point.modes, point.depth, point.block_size, point.mode)
                .map(|p| p.len())
                .unwrap_or(0);
            PointReport {
                point: *point,
                series: series.clone(),
                measurements,
                trials: outcomes.len(),
                failures: outcomes.len() - ok.len(),
                delta_t_max: Summary::of(&collect(|o| o.delta_t_max)),
                delta_f95: Summary::of(&collect(|o| o.delta_f95)),
                seconds: Summary::of(&collect(|o| o.reconstruction_seconds)),
                outcomes: outcomes.to_vec(),
            }
        })
        .collect();
    Ok(BenchmarkReport { trials: spec.trials, fidelity_samples: spec.fidelity_samples, seed: spec.seed, points })
}
