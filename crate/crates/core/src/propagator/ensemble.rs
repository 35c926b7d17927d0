//! Ensemble average over the pure components of the initial mixture.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adiabatic::{adiabatic_excited_population, dress};
use super::{activity_start, propagate, PropagationSettings, StateVector, TrajectoryResult};
use crate::error::{Error, Result};
use crate::model::{Frame, ModelParams, NumericalControls};
use crate::operators::{
    bare_to_polaron, build_hamiltonian, build_polaron_hamiltonian, polaron_to_bare, HamiltonianSplit,
};
use crate::thermal::{EnsembleMember, MixedEnsemble};

/// Members at least this heavy must succeed for the point to succeed.
pub const CRITICAL_MEMBER_WEIGHT: f64 = 1e-6;

/// Result of one ensemble member.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemberOutcome {
    pub fock_level: usize,
    pub weight: f64,
    pub dim: usize,
    pub capped: bool,
    /// Excited population in the dressed basis at the end of the run.
    pub p_excited: Option<f64>,
    /// `None` if the trajectory failed; the error text is in `error`.
    pub trajectory: Option<TrajectoryResult>,
    pub error: Option<String>,
}

/// Weighted excited-state probability and aggregated diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub p_excited: f64,
    pub norm_drift: f64,
    /// True if any successful member touched its truncation boundary.
    pub truncation_flag: bool,
    /// True if any member layout was clipped by the hard maximum.
    pub capped: bool,
    /// Largest per-sector truncation used by any member.
    pub fock_dim: usize,
    /// Weight of light members whose trajectories failed and were left out.
    pub failed_weight: f64,
    pub members: Vec<MemberOutcome>,
}

/// Hamiltonian for one member, in the ensemble's frame.
pub fn member_hamiltonian(
    params: &ModelParams,
    controls: &NumericalControls,
    frame: Frame,
    member: &EnsembleMember,
) -> Result<HamiltonianSplit> {
    match frame {
        Frame::Bare => build_hamiltonian(params, member.layout.down),
        Frame::Polaron => build_polaron_hamiltonian(params, member.layout, controls.coupling_floor),
    }
}

/// Settings for a member whose window ends at `t_f`.
pub fn member_settings(params: &ModelParams, controls: &NumericalControls, t_f: f64) -> PropagationSettings {
    let mut s = PropagationSettings::new(t_f, controls.local_error_tol);
    s.settle_margin = Some(controls.window_margin * params.delta);
    s
}

/// Runs one member and returns its excited population with the trajectory.
///
/// The member starts in the dressed version of its initial state at the
/// first time one of its levels comes within the window margin of a
/// crossing (never before −t_f). Up to then the evolution is adiabatic and
/// only contributes a phase. The population is read out in the dressed
/// basis, after the run settles or at +t_f. Dressing always uses the polaron
/// levels, so both frames are read out the same way.
pub fn run_member_trajectory(
    frame: Frame,
    member: &EnsembleMember,
    params: &ModelParams,
    controls: &NumericalControls,
) -> Result<(f64, TrajectoryResult)> {
    let margin = controls.window_margin * params.delta;
    let guard = 0.5 * margin;
    let t_f = -member.state.time;
    let guide_layout = member.polaron_layout;
    let guide = build_polaron_hamiltonian(params, guide_layout, controls.coupling_floor)?;
    let n_bare = member.layout.down;
    let psi = match frame {
        Frame::Polaron => member.state.amplitudes.clone(),
        Frame::Bare => bare_to_polaron(params, n_bare, &member.state.amplitudes, guide_layout),
    };
    let t_a = activity_start(&guide, &psi, margin).map_or(-t_f, |t| t.max(-t_f));
    let psi = dress(&guide, t_a, &psi, guard);

    let settings = member_settings(params, controls, t_f);
    let (mut state, bare) = match frame {
        Frame::Polaron => (StateVector::new(psi, t_a), None),
        Frame::Bare => {
            let mut x = polaron_to_bare(params, guide_layout, &psi, n_bare);
            let norm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            x.iter_mut().for_each(|c| *c /= norm);
            (StateVector::new(x, t_a), Some(build_hamiltonian(params, n_bare)?))
        }
    };
    let trajectory = propagate(&mut state, bare.as_ref().unwrap_or(&guide), &settings)?;
    let p = match bare {
        None => adiabatic_excited_population(&guide, &state, guard),
        Some(_) => {
            let pol = bare_to_polaron(params, n_bare, &state.amplitudes, guide_layout);
            adiabatic_excited_population(&guide, &StateVector::new(pol, state.time), guard)
        }
    };
    Ok((p, trajectory))
}

/// P = Σ_i w_i p_i over the ensemble, members propagated in parallel.
///
/// A failure of any member with weight ≥ [`CRITICAL_MEMBER_WEIGHT`] fails
/// the whole point; lighter failures are dropped and the rest renormalised.
pub fn mixed_excited_probability(
    ensemble: &MixedEnsemble,
    params: &ModelParams,
    controls: &NumericalControls,
) -> Result<EnsembleResult> {
    let outcomes: Vec<(MemberOutcome, Option<Error>)> = ensemble
        .members
        .par_iter()
        .map(|m| run_member(ensemble.frame, m, params, controls))
        .collect();

    let total = outcomes.len();
    let mut first_critical = None;
    let mut critical = 0;
    let mut p = 0.0;
    let mut ok_weight = 0.0;
    let mut failed_weight = 0.0;
    let mut drift: f64 = 0.0;
    let mut flag = false;
    let mut members = Vec::with_capacity(total);
    for (outcome, err) in outcomes {
        match (&outcome.trajectory, err) {
            (Some(t), _) => {
                p += outcome.weight * outcome.p_excited.unwrap_or(t.p_excited);
                ok_weight += outcome.weight;
                drift = drift.max(t.norm_drift);
                flag |= t.truncation_flag;
            }
            (None, Some(e)) => {
                failed_weight += outcome.weight;
                if outcome.weight >= CRITICAL_MEMBER_WEIGHT {
                    critical += 1;
                    first_critical.get_or_insert(e);
                }
            }
            (None, None) => unreachable!("failed member without an error"),
        }
        members.push(outcome);
    }
    if let Some(first) = first_critical {
        return Err(Error::Ensemble {
            failed: critical,
            total,
            first: Box::new(first),
        });
    }
    Ok(EnsembleResult {
        p_excited: p / ok_weight,
        norm_drift: drift,
        truncation_flag: flag,
        capped: members.iter().any(|m| m.capped),
        fock_dim: members.iter().map(|m| m.dim).max().unwrap_or(0),
        failed_weight,
        members,
    })
}

fn run_member(
    frame: Frame,
    member: &EnsembleMember,
    params: &ModelParams,
    controls: &NumericalControls,
) -> (MemberOutcome, Option<Error>) {
    let mut outcome = MemberOutcome {
        fock_level: member.fock_level,
        weight: member.weight,
        dim: member.layout.down.max(member.layout.up),
        capped: member.capped,
        p_excited: None,
        trajectory: None,
        error: None,
    };
    match run_member_trajectory(frame, member, params, controls) {
        Ok((p, t)) => {
            outcome.p_excited = Some(p);
            outcome.trajectory = Some(t);
            (outcome, None)
        }
        Err(e) => {
            outcome.error = Some(e.to_string());
            (outcome, Some(e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::adiabatic::adiabatic_excited_population;
    use crate::thermal::{initial_ensemble, pure_member, TruncationPlan};

    fn ensemble(p: &ModelParams, c: &NumericalControls) -> MixedEnsemble {
        let plan = TruncationPlan::new(p, c).unwrap();
        initial_ensemble(p, c, &plan).unwrap()
    }

    fn member(p: &ModelParams, c: &NumericalControls, n: usize) -> EnsembleMember {
        pure_member(p, c, n).unwrap()
    }

    #[test]
    fn mixture_is_the_weighted_member_average() {
        let p = ModelParams::new(1.0, 0.5, 0.7);
        let c = NumericalControls {
            local_error_tol: 1e-6,
            ..NumericalControls::default()
        };
        let ens = ensemble(&p, &c);
        assert!(ens.members.len() > 3);
        let r = mixed_excited_probability(&ens, &p, &c).unwrap();
        let sum: f64 = r.members.iter().map(|m| m.weight * m.p_excited.unwrap()).sum();
        assert!((r.p_excited - sum).abs() < 1e-14);
        let lo = r
            .members
            .iter()
            .map(|m| m.p_excited.unwrap())
            .fold(f64::INFINITY, f64::min);
        let hi = r.members.iter().map(|m| m.p_excited.unwrap()).fold(0.0, f64::max);
        assert!(lo <= r.p_excited && r.p_excited <= hi);
        assert!(r.norm_drift < 1e-6);

        // Splitting every member into two half-weight copies changes nothing.
        let mut split = ens.clone();
        split.members = ens
            .members
            .iter()
            .flat_map(|m| {
                let mut h = m.clone();
                h.weight *= 0.5;
                [h.clone(), h]
            })
            .collect();
        let r2 = mixed_excited_probability(&split, &p, &c).unwrap();
        assert!((r2.p_excited - r.p_excited).abs() < 1e-12);
    }

    #[test]
    fn zero_coupling_thermal_point_is_bare_lz() {
        let c = NumericalControls::default();
        for t in [0.0, 1.0, 2.5, 5.0] {
            let p = ModelParams::new(1.0, 0.0, t);
            let r = mixed_excited_probability(&ensemble(&p, &c), &p, &c).unwrap();
            assert!((r.p_excited - 0.1).abs() < 2e-3, "T={t}: {}", r.p_excited);
            assert!(!r.truncation_flag);
        }
    }

    #[test]
    fn zero_temperature_is_bare_lz_at_any_coupling() {
        let c = NumericalControls {
            local_error_tol: 1e-6,
            ..NumericalControls::default()
        };
        for (omega, g) in [(1.0, 0.5), (5.0, 1.0)] {
            let p = ModelParams::new(omega, g, 0.0);
            let r = mixed_excited_probability(&ensemble(&p, &c), &p, &c).unwrap();
            assert_eq!(r.members.len(), 1);
            assert!((r.p_excited - 0.1).abs() < 1e-2, "ω={omega} g={g}: {}", r.p_excited);
        }
    }

    #[test]
    fn frames_agree() {
        let p = ModelParams::new(1.0, 0.6, 0.0);
        let base = NumericalControls {
            local_error_tol: 1e-7,
            ..NumericalControls::default()
        };
        let bare = NumericalControls {
            frame: Frame::Bare,
            ..base.clone()
        };
        for n in [0, 2] {
            let (a, _) = run_member_trajectory(Frame::Polaron, &member(&p, &base, n), &p, &base).unwrap();
            let (b, _) = run_member_trajectory(Frame::Bare, &member(&p, &bare, n), &p, &bare).unwrap();
            assert!((a - b).abs() < 1e-4, "n={n}: polaron {a} bare {b}");
        }
    }

    #[test]
    fn settling_early_matches_full_window() {
        let p = ModelParams::new(1.0, 0.8, 0.0);
        let c = NumericalControls {
            local_error_tol: 1e-7,
            ..NumericalControls::default()
        };
        let m = member(&p, &c, 1);
        let h = member_hamiltonian(&p, &c, Frame::Polaron, &m).unwrap();
        let t_f = -m.state.time;
        let margin = c.window_margin;
        let t_a = activity_start(&h, &m.state.amplitudes, margin).unwrap().max(-t_f);
        let psi = dress(&h, t_a, &m.state.amplitudes, 0.5 * margin);
        let mut early = StateVector::new(psi.clone(), t_a);
        let mut full = StateVector::new(psi, t_a);
        let r = propagate(&mut early, &h, &member_settings(&p, &c, t_f)).unwrap();
        propagate(&mut full, &h, &PropagationSettings::new(t_f, c.local_error_tol)).unwrap();
        assert!(r.final_time < t_f);
        let a = adiabatic_excited_population(&h, &early, 0.5 * margin);
        let b = adiabatic_excited_population(&h, &full, 0.5 * margin);
        assert!((a - b).abs() < 1e-5, "{a} vs {b}");
    }
}
