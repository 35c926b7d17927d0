//! Time evolution of pure states under H(t) = static + v·t·drive.
//!
//! Each step applies the fourth-order commutator-free Magnus scheme
//!
//! ```text
//! ψ(t+h) = exp(−i(h/2)H(t+5h/6)) · exp(−i(h/2)H(t+h/6)) ψ(t)
//! ```
//!
//! which is exact through fourth order when H is linear in t. Each
//! exponential is a Lanczos projection. The step size is controlled by step
//! doubling, and the maps are unitary up to the Krylov tolerance, so the norm
//! is monitored rather than forced.
//!
//! When the diabatic structure allows it (no coupling between levels with the
//! same slope, as in the polaron frame) a trajectory can stop early, once
//! every populated level is past all of its crossings by a given margin.
//! From then on populations in the dressed basis of [`adiabatic`] no longer
//! change.

pub mod adiabatic;
pub mod ensemble;
mod krylov;

pub use ensemble::{mixed_excited_probability, EnsembleResult, MemberOutcome};
pub use krylov::{Krylov, KrylovStats};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Frame;
use crate::operators::{BasisLayout, HamiltonianSplit, Sector};

/// Pure state on the product space at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>, time: f64) -> Self {
        Self { amplitudes, time }
    }

    /// The basis state with index `i`.
    pub fn basis(dim: usize, i: usize, time: f64) -> Self {
        let mut amplitudes = vec![Complex64::default(); dim];
        amplitudes[i] = Complex64::new(1.0, 0.0);
        Self { amplitudes, time }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Σ_n |⟨σ, n|ψ⟩|².
    pub fn sector_population(&self, layout: &BasisLayout, sector: Sector) -> f64 {
        self.amplitudes[layout.range(sector)].iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Qubit excited-state population after the sweep.
///
/// At large positive t the upper diabatic qubit state is |↓⟩, so this is the
/// total weight in the ↓ sector. The frames used here differ only by
/// sector-wise rotations of the oscillator, so the value is frame independent.
pub fn excited_population(state: &StateVector, layout: &BasisLayout) -> f64 {
    state.sector_population(layout, Sector::Down)
}

/// Integration window and tolerances for one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationSettings {
    /// Final time; may lie before the start time for backward evolution.
    pub t_end: f64,
    /// Local error tolerance per step, as a 2-norm.
    pub local_error_tol: f64,
    /// Largest tolerated accumulated norm change before the trajectory is
    /// aborted.
    pub norm_limit: f64,
    /// Population of the top Fock levels that flags truncation contamination.
    pub boundary_threshold: f64,
    /// Fraction of each sector treated as its top levels.
    pub boundary_fraction: f64,
    /// Detuning (energy) below which a coupled pair counts as active. When
    /// set, the run stops before `t_end` once no populated level has an
    /// active pair left ahead of it.
    pub settle_margin: Option<f64>,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Largest Lanczos subspace per exponential.
    pub krylov_max_dim: usize,
}

impl PropagationSettings {
    pub fn new(t_end: f64, local_error_tol: f64) -> Self {
        Self {
            t_end,
            local_error_tol,
            norm_limit: 1e-6,
            boundary_threshold: 1e-6,
            boundary_fraction: 0.05,
            settle_margin: None,
            initial_step: 0.05,
            max_step: 2.0,
            min_step: 1e-9,
            krylov_max_dim: 48,
        }
    }
}

/// Final-time observables and diagnostics of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub p_excited: f64,
    /// Level populations of the ↓ sector at the final time (working frame).
    pub down_populations: Vec<f64>,
    /// Level populations of the ↑ sector at the final time (working frame).
    pub up_populations: Vec<f64>,
    /// Accumulated |Δ‖ψ‖²| over accepted integration steps.
    pub norm_drift: f64,
    pub steps_taken: usize,
    pub steps_rejected: usize,
    pub max_krylov_dim: usize,
    /// Largest top-level population seen in either sector.
    pub boundary_population: f64,
    /// True if `boundary_population` exceeded the threshold.
    pub truncation_flag: bool,
    /// Time at which the run ended; before `t_end` if it settled early.
    pub final_time: f64,
}

impl TrajectoryResult {
    /// Oscillator level populations summed over both qubit sectors. Only
    /// meaningful when both sectors share a truncation and a frame.
    pub fn fock_populations(&self) -> Vec<f64> {
        let n = self.down_populations.len().max(self.up_populations.len());
        (0..n)
            .map(|k| {
                self.down_populations.get(k).copied().unwrap_or(0.0)
                    + self.up_populations.get(k).copied().unwrap_or(0.0)
            })
            .collect()
    }
}

/// Per-level time intervals during which a level is within the margin of at
/// least one coupling partner.
#[derive(Debug, Clone)]
struct Activity {
    start: Vec<f64>,
    end: Vec<f64>,
}

impl Activity {
    /// `None` when two coupled levels share a slope, since such a pair never
    /// detunes and never settles.
    fn new(h: &HamiltonianSplit, margin: f64) -> Option<Self> {
        let n = h.dim();
        let e = h.static_diagonal();
        let d = h.drive_diagonal();
        let v = h.sweep_rate;
        let mut start = vec![f64::INFINITY; n];
        let mut end = vec![f64::NEG_INFINITY; n];
        for (i, j, _) in h.couplings() {
            let rate = v * (d[i] - d[j]);
            if rate == 0.0 {
                return None;
            }
            // E_i(t) − E_j(t) = (e_i − e_j) + rate·t vanishes at t_c.
            let tc = (e[j] - e[i]) / rate;
            let half = margin / rate.abs();
            start[i] = start[i].min(tc - half);
            end[i] = end[i].max(tc + half);
        }
        Some(Self { start, end })
    }
}

/// Earliest time at which a populated level of `psi` comes within `margin`
/// of one of its coupling partners. `None` if that never happens or if the
/// structure of `h` has coupled levels with equal slopes.
pub fn activity_start(h: &HamiltonianSplit, psi: &[Complex64], margin: f64) -> Option<f64> {
    let act = Activity::new(h, margin)?;
    psi.iter()
        .zip(&act.start)
        .filter(|(c, _)| c.norm_sqr() > SETTLED_POPULATION_FLOOR)
        .map(|(_, &s)| s)
        .filter(|s| s.is_finite())
        .min_by(f64::total_cmp)
}

/// Evolves `state` to `settings.t_end` under `h`.
pub fn propagate(
    state: &mut StateVector,
    h: &HamiltonianSplit,
    settings: &PropagationSettings,
) -> Result<TrajectoryResult> {
    let mut stepper = Stepper::new(h, settings);
    stepper.run(state)
}

/// Workspace for repeated propagation with one Hamiltonian.
struct Stepper<'a> {
    h: &'a HamiltonianSplit,
    s: &'a PropagationSettings,
    krylov: Krylov,
    activity: Option<Activity>,
    full: Vec<Complex64>,
    half: Vec<Complex64>,
    max_krylov_dim: usize,
}

const CF4_NODES: (f64, f64) = (1.0 / 6.0, 5.0 / 6.0);
// Levels lighter than this are ignored when deciding whether a run settled.
const SETTLED_POPULATION_FLOOR: f64 = 1e-14;

impl<'a> Stepper<'a> {
    fn new(h: &'a HamiltonianSplit, s: &'a PropagationSettings) -> Self {
        let n = h.dim();
        let activity = s.settle_margin.and_then(|m| Activity::new(h, m));
        Self {
            h,
            s,
            krylov: Krylov::new(n, s.krylov_max_dim.min(n).max(1)),
            activity,
            full: vec![Complex64::default(); n],
            half: vec![Complex64::default(); n],
            max_krylov_dim: 0,
        }
    }

    /// One CF4 step of signed length `step` from `t`, in place.
    fn cf4(&mut self, t: f64, step: f64, psi: &mut [Complex64], tol: f64) -> bool {
        let (c1, c2) = CF4_NODES;
        let h = self.h;
        for c in [c1, c2] {
            let tc = t + c * step;
            match self.krylov.apply_exp(|x, y| h.apply_at(tc, x, y), 0.5 * step, psi, tol) {
                Some(st) => self.max_krylov_dim = self.max_krylov_dim.max(st.dim),
                None => return false,
            }
        }
        true
    }

    /// True if no populated level has an active pair at or after `t`.
    fn settled(&self, psi: &[Complex64], t: f64, forward: bool) -> bool {
        let Some(act) = self.activity.as_ref() else {
            return false;
        };
        psi.iter().enumerate().all(|(i, c)| {
            c.norm_sqr() <= SETTLED_POPULATION_FLOOR || if forward { act.end[i] < t } else { act.start[i] > t }
        })
    }

    /// Largest population on the top levels of a monitored sector. In the
    /// polaron frame only the ↑ sector is watched: the ↓ levels above the
    /// initial ones carry a slowly decaying virtual tail that is not ladder
    /// climbing and does not feed back into the readout.
    fn boundary_population(&self, psi: &[Complex64]) -> f64 {
        let layout = self.h.layout;
        let sectors: &[Sector] = match self.h.frame {
            Frame::Polaron => &[Sector::Up],
            Frame::Bare => &[Sector::Down, Sector::Up],
        };
        sectors
            .iter()
            .map(|&sector| {
                let r = layout.range(sector);
                let k = ((r.len() as f64 * self.s.boundary_fraction).ceil() as usize).max(1);
                psi[r.end - k..r.end].iter().map(|c| c.norm_sqr()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    fn run(&mut self, state: &mut StateVector) -> Result<TrajectoryResult> {
        let s = *self.s;
        let t_end = s.t_end;
        let forward = t_end >= state.time;
        let sign = if forward { 1.0 } else { -1.0 };
        let krylov_tol = 1e-2 * s.local_error_tol;
        let mut t = state.time;
        let mut h = s.initial_step.min(s.max_step);
        let mut steps = 0;
        let mut rejected = 0;
        let mut drift: f64 = 0.0;
        let mut boundary = self.boundary_population(&state.amplitudes);

        while (t_end - t) * sign > 0.0 {
            if self.settled(&state.amplitudes, t, forward) {
                break;
            }
            let remaining = (t_end - t).abs();
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            let signed = sign * step;

            self.full.copy_from_slice(&state.amplitudes);
            self.half.copy_from_slice(&state.amplitudes);
            let mut full = std::mem::take(&mut self.full);
            let mut half = std::mem::take(&mut self.half);
            let ok = self.cf4(t, signed, &mut full, krylov_tol)
                && self.cf4(t, 0.5 * signed, &mut half, krylov_tol)
                && self.cf4(t + 0.5 * signed, 0.5 * signed, &mut half, krylov_tol);
            let err = if ok {
                full.iter()
                    .zip(&half)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
                    / 15.0
            } else {
                f64::INFINITY
            };

            if err <= s.local_error_tol {
                let before = state.norm_sqr();
                state.amplitudes.copy_from_slice(&half);
                t = if last { t_end } else { t + signed };
                steps += 1;
                drift += (state.norm_sqr() - before).abs();
                if drift > s.norm_limit {
                    return Err(Error::NormDrift {
                        drift,
                        limit: s.norm_limit,
                        time: t,
                    });
                }
                boundary = boundary.max(self.boundary_population(&state.amplitudes));
            } else {
                rejected += 1;
            }
            self.full = full;
            self.half = half;

            let factor = if err == 0.0 {
                2.0
            } else if err.is_finite() {
                (0.9 * (s.local_error_tol / err).powf(0.2)).clamp(0.2, 2.0)
            } else {
                0.5
            };
            if !(last && err <= s.local_error_tol) {
                h = (step * factor).min(s.max_step);
            }
            if h < s.min_step {
                return Err(Error::StepUnderflow { time: t, step: h });
            }
        }
        state.time = t;

        let layout = self.h.layout;
        let pops = |sector| {
            state.amplitudes[layout.range(sector)]
                .iter()
                .map(|c| c.norm_sqr())
                .collect::<Vec<f64>>()
        };
        Ok(TrajectoryResult {
            p_excited: excited_population(state, &layout),
            down_populations: pops(Sector::Down),
            up_populations: pops(Sector::Up),
            norm_drift: drift,
            steps_taken: steps,
            steps_rejected: rejected,
            max_krylov_dim: self.max_krylov_dim,
            boundary_population: boundary,
            truncation_flag: boundary > s.boundary_threshold,
            final_time: t,
        })
    }
}
