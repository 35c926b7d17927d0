//! Parameter space, unit conventions and numerical controls.
//!
//! Energies are measured in units of the minimum qubit gap and ħ = 1, so a
//! `ModelParams` with `delta = 1` carries the four physical ratios ω/Δ, g/Δ,
//! k_BT/Δ and ħv/Δ² directly. `delta` is kept as a field so that the scale
//! invariance of the problem can be checked, but every default uses Δ = 1.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Physical parameters of the swept qubit coupled to one oscillator mode.
///
/// JSON keys: `delta`, `omega`, `g`, `temperature`, `sweep_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Minimum qubit gap Δ (default 1).
    pub delta: f64,
    /// Oscillator quantum ħω (default 1).
    pub omega: f64,
    /// Qubit-oscillator coupling g (default 0).
    pub g: f64,
    /// Thermal energy k_BT of the initial oscillator state (default 0).
    pub temperature: f64,
    /// Sweep rate v (default: the rate giving P_LZ = 0.1 at Δ = 1).
    pub sweep_rate: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            delta: 1.0,
            omega: 1.0,
            g: 0.0,
            temperature: 0.0,
            sweep_rate: sweep_rate_for_target(1.0, DEFAULT_P_LZ).expect("valid default target"),
        }
    }
}

/// Target Landau-Zener probability used to fix the sweep rate.
pub const DEFAULT_P_LZ: f64 = 0.1;

impl ModelParams {
    /// Params at Δ = 1 with v tuned to `DEFAULT_P_LZ`.
    pub fn new(omega: f64, g: f64, temperature: f64) -> Self {
        Self {
            omega,
            g,
            temperature,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("delta", self.delta)?;
        check_positive("omega", self.omega)?;
        check_non_negative("g", self.g)?;
        check_non_negative("temperature", self.temperature)?;
        check_positive("sweep_rate", self.sweep_rate)?;
        Ok(())
    }

    /// Mean-field displacement g/ħω of the oscillator when σ_z = −1.
    pub fn polaron_displacement(&self) -> f64 {
        self.g / self.omega
    }

    /// Separation 2g/ħω between the two conditional oscillator equilibria.
    pub fn equilibrium_separation(&self) -> f64 {
        2.0 * self.g / self.omega
    }

    /// Polaron energy shift g²/ħω.
    pub fn polaron_shift(&self) -> f64 {
        self.g * self.g / self.omega
    }

    /// Same physics with every energy multiplied by `factor` (v by its square).
    pub fn rescaled(&self, factor: f64) -> Self {
        Self {
            delta: self.delta * factor,
            omega: self.omega * factor,
            g: self.g * factor,
            temperature: self.temperature * factor,
            sweep_rate: self.sweep_rate * factor * factor,
        }
    }
}

/// Basis in which the product space is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Undisplaced Fock states |σ⟩⊗|n⟩.
    Bare,
    /// Fock states displaced by the σ_z-conditioned equilibrium ∓g/ħω.
    Polaron,
}

/// Numerical controls shared by the solvers.
///
/// JSON keys match the field names. `fock_dim` and `time_horizon` default to
/// `null`, meaning they are derived from the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericalControls {
    /// Uniform oscillator truncation for both qubit sectors (`null` = automatic).
    pub fock_dim: Option<usize>,
    /// Hard ceiling on any sector truncation (default 2500).
    pub fock_dim_max: usize,
    /// Multiplier applied to every resolved truncation (default 1).
    pub fock_scale: f64,
    /// Levels kept above the highest populated level (default 20).
    pub fock_headroom: usize,
    /// Evolution window half-width t_f (`null` = automatic).
    pub time_horizon: Option<f64>,
    /// Detuning, in units of Δ, kept between the window edges and any crossing (default 40).
    pub window_margin: f64,
    /// Per-step local error tolerance of the propagator (default 1e-8).
    pub local_error_tol: f64,
    /// Largest thermal weight that may be discarded by truncation (default 1e-6).
    pub boltzmann_tail_tol: f64,
    /// Ensemble members lighter than this are dropped (default 1e-9).
    pub min_member_weight: f64,
    /// Franck–Condon factors below this are treated as zero (default 1e-7).
    pub coupling_floor: f64,
    /// Oscillator weight allowed to leak past a sector truncation (default 1e-10).
    pub leakage_tol: f64,
    /// Representation used by the quantum propagator (default `polaron`).
    pub frame: Frame,
    /// Start the oscillator in the displaced thermal state (default true).
    pub displaced_init: bool,
    /// Worker threads for parallel execution (0 = one per core).
    pub workers: usize,
}

impl Default for NumericalControls {
    fn default() -> Self {
        Self {
            fock_dim: None,
            fock_dim_max: 2500,
            fock_scale: 1.0,
            fock_headroom: 20,
            time_horizon: None,
            window_margin: 40.0,
            local_error_tol: 1e-8,
            boltzmann_tail_tol: 1e-6,
            min_member_weight: 1e-9,
            coupling_floor: 1e-7,
            leakage_tol: 1e-10,
            frame: Frame::Polaron,
            displaced_init: true,
            workers: 0,
        }
    }
}

impl NumericalControls {
    pub fn validate(&self) -> Result<()> {
        if let Some(n) = self.fock_dim {
            if n == 0 {
                return Err(invalid("fock_dim", "must be at least 1"));
            }
        }
        if self.fock_dim_max == 0 {
            return Err(invalid("fock_dim_max", "must be at least 1"));
        }
        check_positive("fock_scale", self.fock_scale)?;
        if let Some(t) = self.time_horizon {
            check_positive("time_horizon", t)?;
        }
        check_positive("window_margin", self.window_margin)?;
        check_unit_open("local_error_tol", self.local_error_tol)?;
        check_unit_open("boltzmann_tail_tol", self.boltzmann_tail_tol)?;
        check_unit_open("min_member_weight", self.min_member_weight)?;
        check_unit_open("coupling_floor", self.coupling_floor)?;
        check_unit_open("leakage_tol", self.leakage_tol)?;
        Ok(())
    }
}

/// Contents of a `--config` file.
///
/// Top-level keys are the `ModelParams` fields plus `p_lz_target`; the
/// numerical controls live under `controls`. A missing `sweep_rate` is
/// derived from `p_lz_target` and `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub delta: f64,
    pub omega: f64,
    pub g: f64,
    pub temperature: f64,
    pub sweep_rate: Option<f64>,
    /// Target P_LZ used when `sweep_rate` is absent (default 0.1).
    pub p_lz_target: f64,
    pub controls: NumericalControls,
}

impl Default for Config {
    fn default() -> Self {
        let p = ModelParams::default();
        Self {
            delta: p.delta,
            omega: p.omega,
            g: p.g,
            temperature: p.temperature,
            sweep_rate: None,
            p_lz_target: DEFAULT_P_LZ,
            controls: NumericalControls::default(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.params()?;
        cfg.controls.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Resolved, validated model parameters.
    pub fn params(&self) -> Result<ModelParams> {
        let sweep_rate = match self.sweep_rate {
            Some(v) => v,
            None => sweep_rate_for_target(self.delta, self.p_lz_target)?,
        };
        let p = ModelParams {
            delta: self.delta,
            omega: self.omega,
            g: self.g,
            temperature: self.temperature,
            sweep_rate,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Sweep rate v for which a bare crossing of gap `delta` has diabatic-passage
/// probability `p_lz`: v = πΔ² / (2 ln(1/p)).
pub fn sweep_rate_for_target(delta: f64, p_lz: f64) -> Result<f64> {
    check_positive("delta", delta)?;
    if !(p_lz > 0.0 && p_lz < 1.0) {
        return Err(invalid("p_lz", format!("{p_lz} is outside (0, 1)")));
    }
    Ok(PI * delta * delta / (2.0 * (1.0 / p_lz).ln()))
}

/// Ratio τ_separation / τ_LZ = ħω/Δ of the crossing spacing to the duration
/// of a single Landau-Zener transition. Values well below one mean
/// neighbouring crossings overlap in time.
pub fn timescale_ratio(params: &ModelParams) -> f64 {
    params.omega / params.delta
}

fn check_positive(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("{x} must be finite and > 0")))
    }
}

fn check_non_negative(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("{x} must be finite and >= 0")))
    }
}

fn check_unit_open(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("{x} is outside (0, 1)")))
    }
}
