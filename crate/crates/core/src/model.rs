//! The interferometer architecture: alternating programmable phase layers
//! and static mixing layers,
//!
//! ```text
//! V = Φ_{K+1} · U_K · Φ_K · … · Φ_2 · U_1 · Φ_1
//! ```
//!
//! Mixing layers are indexed from 1 in the public API to match that product.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{project_unitary, reduce_angle, unitarity_defect, ComplexMatrix};
use crate::random::ginibre;

/// Entrywise tolerance on `UᴴU − I` for a mixing layer.
pub const UNITARY_TOLERANCE: f64 = 1e-10;

/// Mode count, layer count and the `K` mixing-layer unitaries.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferometerModel {
    modes: usize,
    layers: Vec<ComplexMatrix>,
}

impl InterferometerModel {
    /// Build a model, checking that every layer is an `N×N` unitary.
    pub fn new(layers: Vec<ComplexMatrix>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::DimensionMismatch("model needs at least one mixing layer".into()));
        };
        let modes = first.nrows();
        for (k, layer) in layers.iter().enumerate() {
            if layer.shape() != (modes, modes) {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} is {}x{}, expected {modes}x{modes}",
                    k + 1,
                    layer.nrows(),
                    layer.ncols()
                )));
            }
            let defect = unitarity_defect(layer);
            if !(defect <= UNITARY_TOLERANCE) {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} is not unitary (defect {defect:.3e})",
                    k + 1
                )));
            }
        }
        Ok(Self { modes, layers })
    }

    /// Mode count `N`.
    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Mixing-layer count `K`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[ComplexMatrix] {
        &self.layers
    }

    /// Mixing layer `U_k`, 1-based.
    pub fn layer(&self, k: usize) -> Result<&ComplexMatrix> {
        if k == 0 || k > self.layers.len() {
            return Err(Error::IndexOutOfRange { index: k, max: self.layers.len() });
        }
        Ok(&self.layers[k - 1])
    }

    pub fn into_layers(self) -> Vec<ComplexMatrix> {
        self.layers
    }
}

/// Phases of all `K+1` phase layers; row `k-1` is `Φ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfiguration {
    phases: DMatrix<f64>,
}

impl PhaseConfiguration {
    /// All-zero configuration for `depth` mixing layers.
    pub fn zeros(modes: usize, depth: usize) -> Self {
        Self { phases: DMatrix::zeros(depth + 1, modes) }
    }

    /// Every phase independently uniform on `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(modes: usize, depth: usize, rng: &mut R) -> Self {
        Self {
            phases: DMatrix::from_fn(depth + 1, modes, |_, _| rng.random_range(0.0..TAU)),
        }
    }

    /// From a `(K+1) × N` array; phases are reduced to `[0, 2π)`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let modes = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || modes == 0 || rows.iter().any(|r| r.len() != modes) {
            return Err(Error::DimensionMismatch("ragged or empty phase configuration".into()));
        }
        if rows.iter().flatten().any(|p| !p.is_finite()) {
            return Err(Error::DimensionMismatch("non-finite phase".into()));
        }
        Ok(Self {
            phases: DMatrix::from_fn(rows.len(), modes, |k, n| reduce_angle(rows[k][n])),
        })
    }

    pub fn modes(&self) -> usize {
        self.phases.ncols()
    }

    /// Number of mixing layers this configuration is sized for.
    pub fn depth(&self) -> usize {
        self.phases.nrows() - 1
    }

    /// Phase of mode `n` (0-based) on phase layer `k` (1-based).
    pub fn get(&self, k: usize, n: usize) -> f64 {
        self.phases[(k - 1, n)]
    }

    /// Set a phase, reducing it to `[0, 2π)`; `k` is 1-based, `n` 0-based.
    pub fn set(&mut self, k: usize, n: usize, phase: f64) {
        self.phases[(k - 1, n)] = reduce_angle(phase);
    }

    /// Phases of layer `k` (1-based).
    pub fn layer(&self, k: usize) -> Vec<f64> {
        self.phases.row(k - 1).iter().copied().collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (1..=self.depth() + 1).map(|k| self.layer(k)).collect()
    }
}

/// Transfer matrix of `model` programmed with `config`.
pub fn transfer_matrix(model: &InterferometerModel, config: &PhaseConfiguration) -> Result<ComplexMatrix> {
    if config.modes() != model.modes() || config.depth() != model.depth() {
        return Err(Error::DimensionMismatch(format!(
            "configuration is {}x{} (layers x modes), model needs {}x{}",
            config.depth() + 1,
            config.modes(),
            model.depth() + 1,
            model.modes()
        )));
    }
    let n = model.modes();
    // Φ·M scales row i of M by exp(iφ_i)
    let scale_rows = |m: &mut ComplexMatrix, k: usize| {
        for (i, mut row) in m.row_iter_mut().enumerate() {
            row *= Complex64::from_polar(1.0, config.get(k, i));
        }
    };
    let mut v = ComplexMatrix::identity(n, n);
    scale_rows(&mut v, 1);
    for (k, layer) in model.layers().iter().enumerate() {
        v = layer * v;
        scale_rows(&mut v, k + 2);
    }
    Ok(v)
}

/// Cumulative matrix `C_m = U_K · … · U_m` for `1 ≤ m ≤ K`.
pub fn cumulative_matrix(model: &InterferometerModel, m: usize) -> Result<ComplexMatrix> {
    let depth = model.depth();
    if m == 0 || m > depth {
        return Err(Error::IndexOutOfRange { index: m, max: depth });
    }
    let layers = model.layers();
    // same association order as transfer_matrix, so C_1 matches it exactly
    let mut c = layers[m - 1].clone();
    for layer in &layers[m..] {
        c = layer * c;
    }
    Ok(c)
}

/// Nominal mixer: the normalized Sylvester–Hadamard matrix when `N` is a
/// power of two, otherwise the unitary DFT matrix.
pub fn standard_mixer(n: usize) -> ComplexMatrix {
    assert!(n >= 2, "mixer needs at least two modes");
    if n.is_power_of_two() {
        let base = ComplexMatrix::from_row_slice(
            2,
            2,
            &[1.0, 1.0, 1.0, -1.0].map(|x| Complex64::new(x * FRAC_1_SQRT_2, 0.0)),
        );
        let mut h = base.clone();
        while h.nrows() < n {
            h = h.kronecker(&base);
        }
        h
    } else {
        let scale = 1.0 / (n as f64).sqrt();
        ComplexMatrix::from_fn(n, n, |j, k| {
            Complex64::from_polar(scale, TAU * ((j * k) % n) as f64 / n as f64)
        })
    }
}

/// Name of the mixer [`standard_mixer`] uses for `n` modes.
pub fn mixer_kind(n: usize) -> &'static str {
    if n.is_power_of_two() {
        "sylvester-hadamard"
    } else {
        "dft"
    }
}

const MAX_DRAWS: usize = 3;

/// Device with manufacturing error: every layer is
/// `project_unitary(standard_mixer(N) + γ·G)` with `G` a fresh Ginibre draw.
pub fn random_model<R: Rng + ?Sized>(modes: usize, depth: usize, gamma: f64, rng: &mut R) -> Result<InterferometerModel> {
    if modes < 2 || depth == 0 || !(gamma >= 0.0) {
        return Err(Error::DimensionMismatch(format!(
            "random_model needs N >= 2, K >= 1, gamma >= 0 (got {modes}, {depth}, {gamma})"
        )));
    }
    let mixer = standard_mixer(modes);
    let mut layers = Vec::with_capacity(depth);
    for _ in 0..depth {
        let mut last = Error::RankDeficient { ratio: 0.0 };
        let mut layer = None;
        for _ in 0..MAX_DRAWS {
            let noisy = &mixer + ginibre(modes, rng) * Complex64::new(gamma, 0.0);
            match project_unitary(&noisy) {
                Ok(u) => {
                    layer = Some(u);
                    break;
                }
                Err(e) => last = e,
            }
        }
        layers.push(layer.ok_or(last)?);
    }
    InterferometerModel::new(layers)
}
