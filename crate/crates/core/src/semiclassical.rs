//! Incoherent approximation: level populations change only at crossings.
//!
//! The diabatic levels are the polaron levels, E_{↓n} = vt/2 + nħω − g²/ħω
//! and E_{↑m} = −vt/2 + mħω − g²/ħω. Every pair (↓n, ↑n+k) crosses at the
//! same instant t_k = kħω/v, with gap Δ|⟨n|D(2g/ħω)|n+k⟩|. Each crossing is
//! treated as an isolated Landau–Zener problem and phases are discarded, so
//! each event acts on a pair of populations with a doubly stochastic map.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::ModelParams;
use crate::operators::{BasisLayout, DisplacementTable, Sector};
use crate::thermal::{boltzmann_weights, thermal_cutoff};

/// Events whose gaps are all below this (in units of Δ) are skipped.
pub const GAP_FLOOR: f64 = 1e-12;

/// All crossings (↓n, ↑n+k) at t_k = kħω/v.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub k: i64,
    pub time: f64,
    /// Level pairs (n, m) with m = n + k: ↓n meets ↑m.
    pub pairs: Vec<(usize, usize)>,
    pub gaps: Vec<f64>,
}

/// Populations of the ↓ and ↑ polaron levels.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOccupations {
    pub layout: BasisLayout,
    pub probabilities: Vec<f64>,
}

impl LevelOccupations {
    /// All weight on ↓ levels, distributed as `down`.
    pub fn from_down(down: &[f64], n_fock: usize) -> Self {
        let layout = BasisLayout::uniform(n_fock);
        let mut probabilities = vec![0.0; layout.dim()];
        probabilities[..down.len()].copy_from_slice(down);
        Self { layout, probabilities }
    }

    pub fn down(&self) -> &[f64] {
        &self.probabilities[self.layout.range(Sector::Down)]
    }

    pub fn up(&self) -> &[f64] {
        &self.probabilities[self.layout.range(Sector::Up)]
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn excited(&self) -> f64 {
        self.down().iter().sum()
    }
}

/// Diabatic passage probability exp(−π·gap²/(2v)) with ħ = 1.
pub fn lz_probability(gap: f64, rate: f64) -> f64 {
    (-std::f64::consts::PI * gap * gap / (2.0 * rate)).exp()
}

/// Crossing events for `n_fock` levels per sector with |t_k| ≤ `t_f`, in
/// time order. Events with every gap below [`GAP_FLOOR`]·Δ are left out.
pub fn enumerate_crossings(params: &ModelParams, n_fock: usize, t_f: f64) -> Result<Vec<CrossingEvent>> {
    params.validate()?;
    if n_fock == 0 {
        return Err(invalid("n_fock", "truncation must be at least 1"));
    }
    let fc = DisplacementTable::new(params.equilibrium_separation(), n_fock, n_fock);
    let spacing = params.omega / params.sweep_rate;
    let k_max = ((t_f / spacing).floor() as i64).min(n_fock as i64 - 1);
    let floor = GAP_FLOOR * params.delta;
    let mut events = Vec::new();
    for k in -k_max..=k_max {
        let n_range = if k >= 0 {
            0..n_fock - k as usize
        } else {
            (-k) as usize..n_fock
        };
        let pairs: Vec<(usize, usize)> = n_range.map(|n| (n, (n as i64 + k) as usize)).collect();
        let gaps: Vec<f64> = pairs.iter().map(|&(n, m)| params.delta * fc.get(n, m).abs()).collect();
        if gaps.iter().all(|&g| g < floor) {
            continue;
        }
        events.push(CrossingEvent {
            k,
            time: k as f64 * spacing,
            pairs,
            gaps,
        });
    }
    Ok(events)
}

/// Applies every Landau–Zener exchange of `event` to `occ`.
pub fn apply_event(occ: &mut LevelOccupations, event: &CrossingEvent, rate: f64) {
    for (&(n, m), &gap) in event.pairs.iter().zip(&event.gaps) {
        let q = lz_probability(gap, rate);
        let a = occ.layout.index(Sector::Down, n);
        let b = occ.layout.index(Sector::Up, m);
        let (pa, pb) = (occ.probabilities[a], occ.probabilities[b]);
        occ.probabilities[a] = q * pa + (1.0 - q) * pb;
        occ.probabilities[b] = (1.0 - q) * pa + q * pb;
    }
}

/// Excited-state probability in the incoherent approximation, starting from
/// the Boltzmann mixture of ↓ polaron levels truncated at `tail_tol` and
/// using `n_fock` levels per sector.
pub fn semiclassical_excited_probability(params: &ModelParams, n_fock: usize, tail_tol: f64) -> Result<f64> {
    params.validate()?;
    let thermal = thermal_cutoff(params.omega, params.temperature, tail_tol);
    if thermal > n_fock {
        return Err(Error::TruncationTooSmall {
            discarded: (-params.omega / params.temperature * n_fock as f64).exp(),
            tolerance: tail_tol,
            n_fock,
        });
    }
    let weights = boltzmann_weights(params.omega, params.temperature, thermal, tail_tol)?;
    let mut occ = LevelOccupations::from_down(&weights.probabilities, n_fock);
    let t_f = n_fock as f64 * params.omega / params.sweep_rate;
    for event in enumerate_crossings(params, n_fock, t_f)? {
        apply_event(&mut occ, &event, params.sweep_rate);
    }
    Ok(occ.excited())
}
