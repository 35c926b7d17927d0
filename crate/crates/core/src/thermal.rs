//! Thermal initial states and Fock-space truncation.
//!
//! At the start of the sweep the qubit sits in |↓⟩ and the oscillator is in
//! a Boltzmann mixture. By default the mixture is taken in the displaced
//! basis D(g/ħω)|n⟩, i.e. around the mean-field equilibrium conditioned on
//! σ_z = −1. The mixture is represented by its pure eigen-components, which
//! evolve independently.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::model::{Frame, ModelParams, NumericalControls};
use crate::operators::{BasisLayout, DisplacementTable, Sector};
use crate::propagator::StateVector;

/// Truncated, renormalised Boltzmann occupation of the oscillator levels.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDistribution {
    pub probabilities: Vec<f64>,
    /// Weight of the untruncated distribution beyond the last kept level.
    pub discarded_tail: f64,
}

impl FockDistribution {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.probabilities.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }
}

/// Boltzmann ratio r = e^{−ħω/k_BT}, as ln r (−∞ at T = 0).
fn log_ratio(omega: f64, temperature: f64) -> f64 {
    if temperature == 0.0 {
        f64::NEG_INFINITY
    } else {
        -omega / temperature
    }
}

/// p_n ∝ e^{−nħω/k_BT} for n < `n_fock`, renormalised.
///
/// Fails if the untruncated weight beyond `n_fock` exceeds `tail_tol`.
pub fn boltzmann_weights(omega: f64, temperature: f64, n_fock: usize, tail_tol: f64) -> Result<FockDistribution> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(invalid("omega", format!("{omega} must be > 0")));
    }
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(invalid("temperature", format!("{temperature} must be >= 0")));
    }
    if n_fock == 0 {
        return Err(invalid("n_fock", "truncation must be at least 1"));
    }
    let lr = log_ratio(omega, temperature);
    if lr == f64::NEG_INFINITY {
        let mut probabilities = vec![0.0; n_fock];
        probabilities[0] = 1.0;
        return Ok(FockDistribution {
            probabilities,
            discarded_tail: 0.0,
        });
    }
    // Untruncated p_n = (1 − r) rⁿ; the tail beyond N is r^N.
    let discarded_tail = (lr * n_fock as f64).exp();
    if discarded_tail > tail_tol {
        return Err(Error::TruncationTooSmall {
            discarded: discarded_tail,
            tolerance: tail_tol,
            n_fock,
        });
    }
    let log_norm = (-lr.exp_m1()).ln() - (-(lr * n_fock as f64).exp_m1()).ln();
    let probabilities = (0..n_fock).map(|n| (lr * n as f64 + log_norm).exp()).collect();
    Ok(FockDistribution {
        probabilities,
        discarded_tail,
    })
}

/// Bose–Einstein mean occupation 1/(e^{ħω/k_BT} − 1).
pub fn bose_einstein_mean(omega: f64, temperature: f64) -> f64 {
    if temperature == 0.0 {
        0.0
    } else {
        1.0 / (omega / temperature).exp_m1()
    }
}

/// Number of lowest levels whose cumulative Boltzmann weight reaches 1 − tol.
pub fn thermal_cutoff(omega: f64, temperature: f64, tol: f64) -> usize {
    let lr = log_ratio(omega, temperature);
    if lr == f64::NEG_INFINITY {
        return 1;
    }
    // Smallest N with r^N ≤ tol.
    let mut n = (tol.ln() / lr).ceil().max(1.0) as usize;
    while n > 1 && lr * (n - 1) as f64 <= tol.ln() {
        n -= 1;
    }
    while lr * n as f64 > tol.ln() {
        n += 1;
    }
    n
}

/// For each row count r, the smallest truncation M such that every state
/// D(λ)|n⟩ with n < r leaves at most `tol` weight on levels ≥ M.
#[derive(Debug, Clone)]
pub struct ReachTable {
    prefix_max: Vec<usize>,
}

impl ReachTable {
    pub fn new(lambda: f64, rows: usize, tol: f64) -> Self {
        let rows = rows.max(1);
        if lambda == 0.0 {
            return Self {
                prefix_max: (1..=rows).collect(),
            };
        }
        let radius = ((rows - 1) as f64).sqrt() + lambda.abs();
        let mut cols = (radius * radius + 12.0 * radius + 40.0).ceil() as usize;
        loop {
            // |⟨m|D(λ)|n⟩| = |⟨n|D(λ)|m⟩|, so rows of the table are the states.
            let table = DisplacementTable::new(lambda, rows, cols);
            let mut reach = Vec::with_capacity(rows);
            let mut complete = true;
            for n in 0..rows {
                let row = table.row(n);
                let total: f64 = row.iter().map(|f| f * f).sum();
                let outside = (1.0 - total).max(0.0);
                if outside > 0.1 * tol {
                    complete = false;
                    break;
                }
                let mut tail = outside;
                let mut m = cols;
                while m > 0 && tail + row[m - 1] * row[m - 1] <= tol {
                    tail += row[m - 1] * row[m - 1];
                    m -= 1;
                }
                reach.push(m.max(1));
            }
            if complete {
                let mut prefix_max = Vec::with_capacity(rows);
                let mut best = 0;
                for r in reach {
                    best = best.max(r);
                    prefix_max.push(best);
                }
                return Self { prefix_max };
            }
            cols += cols / 2;
        }
    }

    /// Truncation covering D(λ)|n⟩ for all n < `rows`.
    pub fn reach(&self, rows: usize) -> usize {
        let rows = rows.clamp(1, self.prefix_max.len());
        self.prefix_max[rows - 1]
    }

    pub fn rows(&self) -> usize {
        self.prefix_max.len()
    }
}

/// Uniform truncation returned by [`choose_truncation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub n_fock: usize,
    /// Levels needed to hold 1 − `boltzmann_tail_tol` of the thermal weight.
    pub thermal_states: usize,
    /// True if the hard maximum clipped the result.
    pub capped: bool,
}

/// Uniform Fock truncation for the undisplaced frame.
///
/// The result is at least n_th + ⌈4g/ħω⌉ + headroom, where n_th is the
/// thermal cutoff. It is raised where needed so that every oscillator state
/// the dynamics can reach fits with at most `leakage_tol` weight outside.
/// The ↓ levels start around +g/ħω and the ↑ levels they feed sit around
/// −g/ħω, so the reach is computed from Franck–Condon overlaps at both
/// displacements.
pub fn choose_truncation(params: &ModelParams, controls: &NumericalControls) -> Result<Truncation> {
    let plan = TruncationPlan::new(params, controls)?;
    let top = plan.thermal_states.saturating_sub(1);
    let (n_fock, capped) = plan.bare_dim(top);
    Ok(Truncation {
        n_fock,
        thermal_states: plan.thermal_states,
        capped,
    })
}

/// Truncation data shared by all ensemble members of one parameter point.
#[derive(Debug, Clone)]
pub struct TruncationPlan {
    params: ModelParams,
    headroom: usize,
    scale: f64,
    cap: usize,
    fixed: Option<usize>,
    displaced: bool,
    pub thermal_states: usize,
    /// λ = g/ħω: bare content of displaced levels.
    shift_reach: ReachTable,
    /// λ = 2g/ħω: ↑ polaron levels fed by ↓ polaron levels.
    cross_reach: ReachTable,
}

impl TruncationPlan {
    pub fn new(params: &ModelParams, controls: &NumericalControls) -> Result<Self> {
        params.validate()?;
        controls.validate()?;
        let thermal_states = thermal_cutoff(params.omega, params.temperature, controls.boltzmann_tail_tol);
        Self::covering(params, controls, thermal_states)
    }

    /// Plan for members on the lowest `levels` levels, whatever the
    /// temperature. Used for pure Fock-state runs.
    pub fn covering(params: &ModelParams, controls: &NumericalControls, levels: usize) -> Result<Self> {
        params.validate()?;
        controls.validate()?;
        let thermal_states = levels.max(1);
        let tol = controls.leakage_tol;
        let alpha = params.polaron_displacement();
        let cap = controls.fock_dim_max;
        // Highest initially populated ↓ polaron level.
        let shift_rows = (thermal_states + 1).min(cap);
        let shift_small = ReachTable::new(alpha, shift_rows, tol);
        let down_top = if controls.displaced_init {
            thermal_states
        } else {
            shift_small.reach(thermal_states)
        };
        let cross_reach = ReachTable::new(2.0 * alpha, down_top.min(cap).max(1), tol);
        let up_top = cross_reach.reach(down_top).min(cap);
        let shift_reach = ReachTable::new(alpha, up_top.max(down_top).min(cap).max(1), tol);
        Ok(Self {
            params: *params,
            headroom: controls.fock_headroom,
            scale: controls.fock_scale,
            cap,
            fixed: controls.fock_dim,
            displaced: controls.displaced_init,
            thermal_states,
            shift_reach,
            cross_reach,
        })
    }

    fn finish(&self, n: usize) -> (usize, bool) {
        let scaled = (n as f64 * self.scale).ceil() as usize;
        if scaled > self.cap {
            (self.cap, true)
        } else {
            (scaled.max(1), false)
        }
    }

    /// Highest ↓ polaron level populated at the start, plus one, for a
    /// member built on thermal level `n`.
    fn down_levels(&self, n: usize) -> usize {
        if self.displaced {
            n + 1
        } else {
            self.shift_reach.reach(n + 1)
        }
    }

    /// Per-sector truncation in the polaron frame for the member on level `n`.
    pub fn polaron_layout(&self, n: usize) -> (BasisLayout, bool) {
        if let Some(f) = self.fixed {
            let (d, c) = self.finish(f);
            return (BasisLayout::uniform(d), c);
        }
        let down = self.down_levels(n);
        let up = self.cross_reach.reach(down);
        let (d, c1) = self.finish(down + self.headroom);
        let (u, c2) = self.finish(up + self.headroom);
        (BasisLayout { down: d, up: u }, c1 || c2)
    }

    /// Uniform truncation in the bare frame for the member on level `n`.
    pub fn bare_dim(&self, n: usize) -> (usize, bool) {
        if let Some(f) = self.fixed {
            return self.finish(f);
        }
        let p = &self.params;
        let rule = n + 1 + (4.0 * p.g / p.omega).ceil() as usize + self.headroom;
        let down = self.down_levels(n);
        let up = self.cross_reach.reach(down);
        let reach = self.shift_reach.reach(up.max(down)).max(n + 1);
        self.finish(rule.max(reach + self.headroom))
    }

    /// Half-width t_f of the evolution window for a layout: the diabatic
    /// splitting v·t_f exceeds the largest crossing energy of the layout by
    /// `margin`·Δ.
    pub fn window(&self, layout: &BasisLayout, margin: f64) -> f64 {
        let p = &self.params;
        let n = layout.down.max(layout.up) as f64;
        (p.omega * n + margin * p.delta) / p.sweep_rate
    }
}

/// One pure component of the initial mixture.
#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub weight: f64,
    /// Thermal level n the member is built on.
    pub fock_level: usize,
    pub layout: BasisLayout,
    /// Polaron layout of the member, used for dressing in either frame.
    pub polaron_layout: BasisLayout,
    /// True if a layout dimension hit the hard maximum.
    pub capped: bool,
    pub state: StateVector,
}

/// Boltzmann-weighted set of orthogonal pure states.
#[derive(Debug, Clone)]
pub struct MixedEnsemble {
    pub frame: Frame,
    pub distribution: FockDistribution,
    pub members: Vec<EnsembleMember>,
    /// Total weight of members dropped below `min_member_weight`.
    pub dropped_weight: f64,
}

impl MixedEnsemble {
    pub fn total_weight(&self) -> f64 {
        self.members.iter().map(|m| m.weight).sum()
    }
}

/// |↓⟩ ⊗ (D(g/ħω) if `displaced`)|n⟩ expressed in `frame` on `layout`,
/// renormalised after truncation.
pub fn member_state(
    params: &ModelParams,
    frame: Frame,
    layout: BasisLayout,
    n: usize,
    displaced: bool,
    time: f64,
) -> StateVector {
    let dim = layout.dim();
    let alpha = params.polaron_displacement();
    // Expansion coefficients over the ↓ levels of the frame.
    let lambda = match (frame, displaced) {
        (Frame::Polaron, true) | (Frame::Bare, false) => None,
        // ⟨k|D(α)|n⟩ in the bare basis.
        (Frame::Bare, true) => Some(alpha),
        // ⟨k|D(α)†|n⟩ = ⟨k|D(−α)|n⟩ in the displaced basis.
        (Frame::Polaron, false) => Some(-alpha),
    };
    match lambda {
        None | Some(0.0) => StateVector::basis(dim, layout.index(Sector::Down, n), time),
        Some(l) => {
            let table = DisplacementTable::new(l, layout.down, n + 1);
            let mut amps = vec![Complex64::default(); dim];
            let mut norm = 0.0;
            for k in 0..layout.down {
                let c = table.get(k, n);
                amps[layout.index(Sector::Down, k)] = Complex64::new(c, 0.0);
                norm += c * c;
            }
            let s = norm.sqrt().recip();
            for a in &mut amps {
                *a *= s;
            }
            StateVector::new(amps, time)
        }
    }
}

/// Builds the initial ensemble with the truncation rules of `plan`.
///
/// Each member gets its own layout and starts at its own −t_f.
pub fn initial_ensemble(
    params: &ModelParams,
    controls: &NumericalControls,
    plan: &TruncationPlan,
) -> Result<MixedEnsemble> {
    let distribution = boltzmann_weights(
        params.omega,
        params.temperature,
        plan.thermal_states,
        controls.boltzmann_tail_tol,
    )?;
    let mut members = Vec::new();
    let mut dropped = 0.0;
    for (n, &w) in distribution.probabilities.iter().enumerate() {
        if w < controls.min_member_weight {
            dropped += w;
            continue;
        }
        let (layout, capped, t_f) = member_geometry(plan, controls, n);
        let (polaron_layout, _) = plan.polaron_layout(n);
        let state = member_state(params, controls.frame, layout, n, controls.displaced_init, -t_f);
        members.push(EnsembleMember {
            weight: w,
            fock_level: n,
            layout,
            polaron_layout,
            capped,
            state,
        });
    }
    let kept: f64 = members.iter().map(|m| m.weight).sum();
    for m in &mut members {
        m.weight /= kept;
    }
    Ok(MixedEnsemble {
        frame: controls.frame,
        distribution,
        members,
        dropped_weight: dropped,
    })
}

/// Weight-one member on level `n` with the truncation and window a thermal
/// ensemble would give it, for runs from a pure Fock state.
pub fn pure_member(params: &ModelParams, controls: &NumericalControls, n: usize) -> Result<EnsembleMember> {
    let plan = TruncationPlan::covering(params, controls, n + 1)?;
    let (layout, capped, t_f) = member_geometry(&plan, controls, n);
    Ok(EnsembleMember {
        weight: 1.0,
        fock_level: n,
        layout,
        polaron_layout: plan.polaron_layout(n).0,
        capped,
        state: member_state(params, controls.frame, layout, n, controls.displaced_init, -t_f),
    })
}

/// Layout, cap flag and window half-width for the member on level `n`.
pub fn member_geometry(plan: &TruncationPlan, controls: &NumericalControls, n: usize) -> (BasisLayout, bool, f64) {
    let (pol, pol_capped) = plan.polaron_layout(n);
    let t_f = controls
        .time_horizon
        .unwrap_or_else(|| plan.window(&pol, controls.window_margin));
    match controls.frame {
        Frame::Polaron => (pol, pol_capped, t_f),
        Frame::Bare => {
            let (n_fock, capped) = plan.bare_dim(n);
            (BasisLayout::uniform(n_fock), capped, t_f)
        }
    }
}
