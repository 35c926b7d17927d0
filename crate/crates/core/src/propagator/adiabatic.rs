//! First-order dressed states away from level crossings.
//!
//! Far from its crossings a diabatic level |i⟩ is followed adiabatically by
//!
//! ```text
//! |ĩ⟩ ≈ |i⟩ + Σ_j A_ji |j⟩,   A_ji = V_ji / (E_i(t) − E_j(t)),
//! ```
//!
//! where V is the static coupling and E the diabatic energies. Diabatic
//! populations keep cross terms of order V/(vt) long after a crossing, while
//! populations in the dressed basis settle to their asymptotic values up to
//! O((V/δ)²). Only pairs with different sweep slopes and detuning of at least
//! `min_detuning` enter A.

use num_complex::Complex64;

use super::StateVector;
use crate::operators::{HamiltonianSplit, Sector};

fn apply_mixing(h: &HamiltonianSplit, t: f64, psi: &[Complex64], sign: f64, min_detuning: f64) -> Vec<Complex64> {
    let e = h.diagonal_at(t);
    let d = h.drive_diagonal();
    let mut out = psi.to_vec();
    for (r, c, v) in h.couplings() {
        if d[r] == d[c] {
            continue;
        }
        let gap = e[c] - e[r];
        if gap.abs() >= min_detuning {
            out[r] += psi[c] * (sign * v / gap);
        }
    }
    out
}

fn normalised(mut x: Vec<Complex64>) -> Vec<Complex64> {
    let n = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in &mut x {
        *c /= n;
    }
    x
}

/// Maps dressed-basis amplitudes to the diabatic basis, normalised.
pub fn dress(h: &HamiltonianSplit, t: f64, psi: &[Complex64], min_detuning: f64) -> Vec<Complex64> {
    normalised(apply_mixing(h, t, psi, 1.0, min_detuning))
}

/// Maps diabatic amplitudes to the dressed basis, normalised.
pub fn undress(h: &HamiltonianSplit, t: f64, psi: &[Complex64], min_detuning: f64) -> Vec<Complex64> {
    normalised(apply_mixing(h, t, psi, -1.0, min_detuning))
}

/// Weight of `state` on the dressed ↓ levels at `state.time`, relative to
/// its total weight.
pub fn adiabatic_excited_population(h: &HamiltonianSplit, state: &StateVector, min_detuning: f64) -> f64 {
    let c = apply_mixing(h, state.time, &state.amplitudes, -1.0, min_detuning);
    let total: f64 = c.iter().map(|a| a.norm_sqr()).sum();
    c[h.layout.range(Sector::Down)]
        .iter()
        .map(|a| a.norm_sqr())
        .sum::<f64>()
        / total
}
