//! Monte Carlo laboratory for the stochastic heat equation
//! `u_t = ½u_xx + u^γ ξ` on the unit circle, `γ > 1`.
//!
//! The numerical core is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`). The ensemble harness works in `f64`; the aliases at the
//! bottom of this file name the concrete types it uses.

pub mod error;
pub mod fourier;
pub mod functionals;
pub mod harness;
pub mod lattice;
pub mod martingale_checks;
pub mod noise;
pub mod scalar;
pub mod sode;
pub mod spde;
pub mod stats;

pub use error::{Error, Result};
pub use harness::{run_ensemble, EnsembleSummary, ExperimentConfig, ExperimentKind, RunOptions};
pub use lattice::{Field, GridSpec};
pub use noise::{derive_stream, NoiseStream};
pub use scalar::Real;

use serde::{Deserialize, Serialize};

/// How a simulated path ended.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PathStatus {
    #[default]
    Completed,
    /// Reached exactly zero at `step` and stayed there.
    Absorbed { step: usize },
    /// Produced a non-finite value at `step`; the path stopped there.
    Exploded { step: usize },
}

impl PathStatus {
    pub fn exploded(&self) -> bool {
        matches!(self, PathStatus::Exploded { .. })
    }
}

pub type Field64 = Field<f64>;
pub type SodeConfig64 = sode::SodeConfig<f64>;
pub type SodePath64 = sode::SodePath<f64>;
pub type SpdeConfig64 = spde::SpdeConfig<f64>;
pub type Trajectory64 = spde::Trajectory<f64>;
pub type CoupledPair64 = spde::CoupledPair<f64>;
