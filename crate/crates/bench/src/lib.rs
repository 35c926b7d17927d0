//! Shared fixtures for the benchmarks in `benches/`.

use lzosc_core::thermal::{pure_member, EnsembleMember};
use lzosc_core::{ModelParams, NumericalControls};

/// Controls used by the trajectory benchmarks.
pub fn small_controls() -> NumericalControls {
    NumericalControls {
        local_error_tol: 1e-6,
        ..NumericalControls::default()
    }
}

/// Pure member on level `n` with its default truncation and window.
pub fn member(params: &ModelParams, controls: &NumericalControls, n: usize) -> EnsembleMember {
    pure_member(params, controls, n).expect("valid parameters")
}
