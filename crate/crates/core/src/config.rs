//! Experiment configuration documents and the built-in presets.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bench::{CampaignSpec, GridPoint, Series, MIN_FIDELITY_SAMPLES};
use crate::error::{Error, Result};
use crate::tomography::TomographyMode;

/// A validated experiment: an ε sweep at fixed size, plus an optional
/// size sweep (`N = K = M`) at a single ε for timing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(rename = "N")]
    pub modes: usize,
    #[serde(rename = "K")]
    pub depth: usize,
    #[serde(rename = "M")]
    pub block_size: usize,
    pub gamma: f64,
    pub epsilons: Vec<f64>,
    #[serde(rename = "modes")]
    pub tomography_modes: Vec<TomographyMode>,
    pub trials: usize,
    pub fidelity_samples: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub timing_sizes: Vec<usize>,
    pub timing_epsilon: f64,
}

/// The document schema: every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    #[serde(rename = "N")]
    modes: Option<usize>,
    #[serde(rename = "K")]
    depth: Option<usize>,
    #[serde(rename = "M")]
    block_size: Option<usize>,
    gamma: Option<f64>,
    epsilons: Option<Vec<f64>>,
    #[serde(rename = "modes")]
    tomography_modes: Option<Vec<TomographyMode>>,
    trials: Option<usize>,
    fidelity_samples: Option<usize>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    timing_sizes: Option<Vec<usize>>,
    timing_epsilon: Option<f64>,
}

pub const DEFAULT_SEED: u64 = 20231;

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            modes: 10,
            depth: 10,
            block_size: 10,
            gamma: 0.1,
            epsilons: vec![1e-4, 1e-3, 1e-2],
            tomography_modes: vec![TomographyMode::Full, TomographyMode::IntensityOnly],
            trials: 100,
            fidelity_samples: 1000,
            seed: DEFAULT_SEED,
            output_dir: PathBuf::from("results"),
            timing_sizes: Vec::new(),
            timing_epsilon: 1e-3,
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::Validation { field: field.into(), reason: reason.into() }
}

/// Parse a JSON config. Missing fields take their defaults; `M` defaults to
/// `N`. An empty (or whitespace-only) document is the default config.
pub fn parse_config(document: &str) -> Result<ExperimentConfig> {
    let doc: ConfigDoc = if document.trim().is_empty() {
        ConfigDoc::default()
    } else {
        serde_json::from_str(document).map_err(|e| invalid("document", e.to_string()))?
    };
    let defaults = ExperimentConfig::default();
    let modes = doc.modes.unwrap_or(defaults.modes);
    let config = ExperimentConfig {
        modes,
        depth: doc.depth.unwrap_or(defaults.depth),
        block_size: doc.block_size.unwrap_or(modes),
        gamma: doc.gamma.unwrap_or(defaults.gamma),
        epsilons: doc.epsilons.unwrap_or(defaults.epsilons),
        tomography_modes: doc.tomography_modes.unwrap_or(defaults.tomography_modes),
        trials: doc.trials.unwrap_or(defaults.trials),
        fidelity_samples: doc.fidelity_samples.unwrap_or(defaults.fidelity_samples),
        seed: doc.seed.unwrap_or(defaults.seed),
        output_dir: doc.output_dir.unwrap_or(defaults.output_dir),
        timing_sizes: doc.timing_sizes.unwrap_or(defaults.timing_sizes),
        timing_epsilon: doc.timing_epsilon.unwrap_or(defaults.timing_epsilon),
    };
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        // a single mode has no mixing to reconstruct
        if self.modes < 2 {
            return Err(invalid("N", "must be at least 2"));
        }
        if self.depth == 0 {
            return Err(invalid("K", "must be at least 1"));
        }
        if self.block_size == 0 || self.block_size > self.modes {
            return Err(invalid("M", format!("must lie in 1..={}, got {}", self.modes, self.block_size)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(invalid("gamma", "must be finite and nonnegative"));
        }
        if self.epsilons.is_empty() {
            return Err(invalid("epsilons", "must be nonempty"));
        }
        if self.epsilons.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(invalid("epsilons", "every entry must be finite and nonnegative"));
        }
        if self.tomography_modes.is_empty() {
            return Err(invalid("modes", "must name at least one of full, intensity"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.fidelity_samples < MIN_FIDELITY_SAMPLES {
            return Err(invalid("fidelity_samples", format!("must be at least {MIN_FIDELITY_SAMPLES}")));
        }
        if self.timing_sizes.iter().any(|&n| n < 2) {
            return Err(invalid("timing_sizes", "sizes must be at least 2"));
        }
        if !(self.timing_epsilon.is_finite() && self.timing_epsilon >= 0.0) {
            return Err(invalid("timing_epsilon", "must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize")
    }

    /// Grid points in a fixed order: the ε sweep (mode-major), then the
    /// size sweep. A size-sweep point equal to a sweep point is merged into
    /// it rather than run twice.
    pub fn campaign(&self) -> CampaignSpec {
        let mut points: Vec<(GridPoint, Vec<Series>)> = Vec::new();
        let mut add = |point: GridPoint, series: Series| {
            match points.iter_mut().find(|(p, _)| *p == point) {
                Some((_, s)) if !s.contains(&series) => s.push(series),
                Some(_) => {}
                None => points.push((point, vec![series])),
            }
        };
        for &mode in &self.tomography_modes {
            for &epsilon in &self.epsilons {
                let point = GridPoint {
                    modes: self.modes,
                    depth: self.depth,
                    block_size: self.block_size,
                    gamma: self.gamma,
                    epsilon,
                    mode,
                };
                add(point, Series::ErrorSweep);
            }
        }
        for &mode in &self.tomography_modes {
            for &n in &self.timing_sizes {
                let point = GridPoint { modes: n, depth: n, block_size: n, gamma: self.gamma, epsilon: self.timing_epsilon, mode };
                add(point, Series::Timing);
            }
        }
        CampaignSpec { points, trials: self.trials, fidelity_samples: self.fidelity_samples, seed: self.seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Full-scale reproduction: ε sweep over five decades at `N = K = 10`
    /// and the `N = K` timing sweep up to 30, 100 trials, 1000 samples.
    Paper,
    /// Reduced grid for quick checks: 20 trials, 200 samples.
    Desk,
}

impl Preset {
    pub fn config(self) -> ExperimentConfig {
        match self {
            Preset::Paper => ExperimentConfig {
                epsilons: vec![1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
                timing_sizes: vec![5, 10, 15, 20, 25, 30],
                ..ExperimentConfig::default()
            },
            Preset::Desk => ExperimentConfig {
                trials: 20,
                fidelity_samples: 200,
                timing_sizes: vec![5, 10, 15, 20],
                ..ExperimentConfig::default()
            },
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(invalid("preset", format!("unknown preset {other:?}"))),
        }
    }
}
