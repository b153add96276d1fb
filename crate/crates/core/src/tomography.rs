//! Measurement planning and the simulated tomography oracle.
//!
//! A plan lists the phase patterns to program: the all-zero baseline, then
//! for every phase layer `m = 2..K` and every block of at most `M` modes a
//! pattern with equally spaced phases on that block. Intensity-only plans add
//! the conjugate of every pattern.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{project_unitary, ComplexMatrix, PhaseVector};
use crate::model::{transfer_matrix, InterferometerModel, PhaseConfiguration};
use crate::random::{ginibre, substream};

/// Smallest first-column modulus for which output phases are defined.
pub const FIRST_COLUMN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TomographyMode {
    /// Transfer matrix measured with phases (up to nothing in simulation).
    #[serde(rename = "full")]
    Full,
    /// Transfer matrix known only up to output phases; reported with its
    /// first column real and nonnegative.
    #[serde(rename = "intensity")]
    IntensityOnly,
}

impl TomographyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TomographyMode::Full => "full",
            TomographyMode::IntensityOnly => "intensity",
        }
    }
}

impl std::fmt::Display for TomographyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TomographyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(TomographyMode::Full),
            "intensity" => Ok(TomographyMode::IntensityOnly),
            other => Err(Error::Validation {
                field: "modes".into(),
                reason: format!("unknown tomography mode `{other}`"),
            }),
        }
    }
}

/// One phase pattern to program.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    /// Phase layer carrying the pattern (2..=K), or 0 for the baseline.
    pub layer: usize,
    /// 0-based modes with nonzero phase, ascending.
    pub active_modes: Vec<usize>,
    pub conjugate: bool,
    pub phase_pattern: PhaseConfiguration,
}

impl Configuration {
    pub fn baseline(modes: usize, depth: usize) -> Self {
        Self {
            layer: 0,
            active_modes: Vec::new(),
            conjugate: false,
            phase_pattern: PhaseConfiguration::zeros(modes, depth),
        }
    }

    /// Pattern on `layer` over `active_modes` with phases `2πr/(M'+1)`,
    /// `r = 1..M'`, negated when `conjugate`.
    pub fn block(modes: usize, depth: usize, layer: usize, active_modes: Vec<usize>, conjugate: bool) -> Self {
        let mut phase_pattern = PhaseConfiguration::zeros(modes, depth);
        let sign = if conjugate { -1.0 } else { 1.0 };
        for (mode, phase) in block_phases(&active_modes) {
            phase_pattern.set(layer, mode, sign * phase);
        }
        Self { layer, active_modes, conjugate, phase_pattern }
    }

    pub fn is_baseline(&self) -> bool {
        self.layer == 0
    }

    /// Eigenvalue targets `(mode, phase)` of the un-conjugated pattern.
    pub fn targets(&self) -> Vec<(usize, f64)> {
        block_phases(&self.active_modes)
    }

    /// Phase of every mode on the pattern layer (0 on inactive modes), for
    /// the un-conjugated pattern.
    pub fn spectrum(&self, modes: usize) -> Vec<f64> {
        let mut phases = vec![0.0; modes];
        for (mode, phase) in self.targets() {
            phases[mode] = phase;
        }
        phases
    }
}

fn block_phases(active_modes: &[usize]) -> Vec<(usize, f64)> {
    let spacing = TAU / (active_modes.len() as f64 + 1.0);
    active_modes
        .iter()
        .enumerate()
        .map(|(r, &mode)| (mode, spacing * (r + 1) as f64))
        .collect()
}

/// Ordered list of configurations for one reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPlan {
    pub modes: usize,
    pub depth: usize,
    pub block_size: usize,
    pub mode: TomographyMode,
    pub configurations: Vec<Configuration>,
}

impl MeasurementPlan {
    /// Total number of measured transfer matrices `L`.
    pub fn len(&self) -> usize {
        self.configurations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configurations.is_empty()
    }

    /// Configuration count of the full-tomography plan of the same size.
    pub fn full_tomography_len(&self) -> usize {
        1 + (self.depth - 1) * blocks(self.modes, self.block_size).len()
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        blocks(self.modes, self.block_size)
    }
}

/// Contiguous mode blocks of size `block_size` (the last may be shorter).
pub fn blocks(modes: usize, block_size: usize) -> Vec<Vec<usize>> {
    (0..modes)
        .collect::<Vec<_>>()
        .chunks(block_size)
        .map(<[usize]>::to_vec)
        .collect()
}

/// Baseline first, then `(layer, block[, conjugate])` in lexicographic order.
pub fn plan_measurements(modes: usize, depth: usize, block_size: usize, mode: TomographyMode) -> Result<MeasurementPlan> {
    if modes == 0 || depth == 0 {
        return Err(Error::Validation { field: "N/K".into(), reason: "must be positive".into() });
    }
    if block_size == 0 || block_size > modes {
        return Err(Error::Validation {
            field: "M".into(),
            reason: format!("must satisfy 1 <= M <= N = {modes}, got {block_size}"),
        });
    }
    let mut configurations = vec![Configuration::baseline(modes, depth)];
    for layer in 2..=depth {
        for block in blocks(modes, block_size) {
            configurations.push(Configuration::block(modes, depth, layer, block.clone(), false));
            if mode == TomographyMode::IntensityOnly {
                configurations.push(Configuration::block(modes, depth, layer, block, true));
            }
        }
    }
    Ok(MeasurementPlan { modes, depth, block_size, mode, configurations })
}

/// One configuration with its measured transfer matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyRecord {
    pub configuration: Configuration,
    pub measured: ComplexMatrix,
    pub mode: TomographyMode,
}

/// Canonical form under output phases: `D·V` with
/// `D = diag(exp(-i·arg V_{n1}))`, so the first column is real and
/// nonnegative. Returns the stripped matrix and the applied phases
/// `δ_n = -arg V_{n1}`.
pub fn strip_output_phases(v: &ComplexMatrix) -> Result<(ComplexMatrix, PhaseVector)> {
    if v.ncols() == 0 {
        return Err(Error::DimensionMismatch("empty matrix".into()));
    }
    let mut stripped = v.clone();
    let mut applied = Vec::with_capacity(v.nrows());
    for (row, mut r) in stripped.row_iter_mut().enumerate() {
        let lead = r[0];
        let modulus = lead.norm();
        if !(modulus >= FIRST_COLUMN_TOLERANCE) {
            return Err(Error::ZeroFirstColumnEntry { row, modulus });
        }
        let delta = -lead.arg();
        r *= Complex64::from_polar(1.0, delta);
        r[0] = Complex64::new(modulus, 0.0);
        applied.push(delta);
    }
    Ok((stripped, PhaseVector::new(applied)))
}

/// Noisy tomography of one transfer matrix:
/// `project_unitary(V + ε·√L·G)`, additionally stripped of output phases in
/// intensity mode.
pub fn simulate_tomography<R: Rng + ?Sized>(
    v_true: &ComplexMatrix,
    epsilon: f64,
    total_measurements: usize,
    mode: TomographyMode,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    let n = v_true.nrows();
    let scale = epsilon * (total_measurements as f64).sqrt();
    let noisy = v_true + ginibre(n, rng) * Complex64::new(scale, 0.0);
    let measured = project_unitary(&noisy)?;
    match mode {
        TomographyMode::Full => Ok(measured),
        TomographyMode::IntensityOnly => Ok(strip_output_phases(&measured)?.0),
    }
}

/// Measure every configuration of `plan` on `model`. Record `i` draws its
/// noise from substream `i` of `seed`.
pub fn simulate_plan(
    model: &InterferometerModel,
    plan: &MeasurementPlan,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<TomographyRecord>> {
    let total = plan.len();
    plan.configurations
        .iter()
        .enumerate()
        .map(|(i, configuration)| {
            let v = transfer_matrix(model, &configuration.phase_pattern)?;
            let mut rng = substream(seed, i as u64);
            let measured = simulate_tomography(&v, epsilon, total, plan.mode, &mut rng)?;
            Ok(TomographyRecord { configuration: configuration.clone(), measured, mode: plan.mode })
        })
        .collect()
}
