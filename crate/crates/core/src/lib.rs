//! Landau-Zener sweeps of a qubit coupled to one harmonic oscillator mode
//! that starts in a thermal state.
//!
//! The crate provides the Hamiltonian on a truncated Fock space, thermal
//! initial ensembles, an adaptive propagator for the exact dynamics, the
//! incoherent crossing-network approximation, and a sweep driver that
//! writes CSV results.

pub mod error;
pub mod model;
pub mod operators;
pub mod propagator;
pub mod semiclassical;
pub mod sweep;
pub mod thermal;

pub use error::{Error, Result};
pub use model::{sweep_rate_for_target, timescale_ratio, Config, Frame, ModelParams, NumericalControls};
pub use operators::{
    build_hamiltonian, build_polaron_hamiltonian, BasisLayout, HamiltonianSplit, ProductOperator, Sector,
};
pub use propagator::{excited_population, mixed_excited_probability, propagate, StateVector, TrajectoryResult};
pub use semiclassical::{lz_probability, semiclassical_excited_probability, CrossingEvent};
pub use sweep::{converge, max_temperature_slope, peak_coupling, run_fock_scan, run_sweep, ResultRecord, SweepSpec};
pub use thermal::{boltzmann_weights, choose_truncation, initial_ensemble, FockDistribution, MixedEnsemble};
