//! Model reconstruction for programmable multiport interferometers.
//!
//! The device is an alternating product of static mixing layers and
//! programmable diagonal phase layers. Given transfer matrices measured for a
//! small set of phase patterns, [`reconstruct`] recovers every mixing layer
//! either from full (phase-sensitive) tomography or from intensity-only
//! tomography, where each measured matrix is known only up to its output
//! phases. [`bench`] reproduces the Monte-Carlo benchmark methodology used to
//! compare the two.

pub mod bench;
pub mod config;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod random;
pub mod reconstruct;
pub mod report;
pub mod tomography;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, PhaseVector};
pub use model::{InterferometerModel, PhaseConfiguration};
pub use reconstruct::{reconstruct, ReconstructionResult};
pub use tomography::{plan_measurements, MeasurementPlan, TomographyMode, TomographyRecord};
