//! Partition function estimation for Ising models.
//!
//! Every estimator here produces a density of states g(E) over exact energy
//! levels; ln Z at any temperature then follows from a log-sum-exp over
//! levels. Exact enumeration provides the ground truth at desk scale.

pub mod dos;
pub mod embed;
pub mod enumerate;
pub mod error;
pub mod ga;
pub mod instance;
pub mod math;
pub mod mhr;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod surrogate;
pub mod sweep;
mod state;
pub mod wang_landau;

pub use dos::{accumulate, dos_from_histogram, estimate_partition, DosEstimate, EnergyHistogram};
pub use enumerate::{enumerate_exact, enumerate_exact_with_limit, exact_partition, ExactSpectrum};
pub use error::{Error, Result};
pub use math::{log_relative_error, log_sum_exp};
pub use model::{EnergyLevel, InverseTemperature, IsingModel, SpinConfiguration};
