//! Experiment driver: parameter grids, Fock-number scans and convergence
//! checks.
//!
//! Every point is an independent task. Points run concurrently on a rayon
//! pool (ensemble members inside a point share the same pool) and results
//! come back in grid order, so output files do not depend on scheduling.

mod analysis;
mod io;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use analysis::{max_temperature_slope, peak_coupling, Peak, SlopeMax};
pub use io::{format_sig, read_csv, write_csv, write_csv_to, write_sidecar, CSV_HEADER};

use crate::error::{invalid, Error, Result};
use crate::model::{sweep_rate_for_target, ModelParams, NumericalControls, DEFAULT_P_LZ};
use crate::propagator::ensemble::{mixed_excited_probability, run_member_trajectory};
use crate::semiclassical::semiclassical_excited_probability;
use crate::thermal::{initial_ensemble, member_geometry, pure_member, TruncationPlan};

/// Largest |Δp| a point may show under any refinement and still pass.
pub const CONVERGENCE_THRESHOLD: f64 = 1e-3;

/// Which solvers a sweep runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Quantum,
    Semiclassical,
    Both,
}

impl SolverChoice {
    pub fn tags(self) -> &'static [SolverTag] {
        match self {
            Self::Quantum => &[SolverTag::Quantum],
            Self::Semiclassical => &[SolverTag::Semiclassical],
            Self::Both => &[SolverTag::Quantum, SolverTag::Semiclassical],
        }
    }
}

/// Solver that produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverTag {
    Quantum,
    Semiclassical,
}

impl SolverTag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Quantum => "quantum",
            Self::Semiclassical => "semiclassical",
        }
    }
}

impl std::str::FromStr for SolverTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(Self::Quantum),
            "semiclassical" => Ok(Self::Semiclassical),
            _ => Err(invalid("solver", format!("unknown solver `{s}`"))),
        }
    }
}

/// One grid axis, either evenly spaced or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Range { start: f64, stop: f64, points: usize },
    Values(Vec<f64>),
}

impl Axis {
    pub fn range(start: f64, stop: f64, points: usize) -> Self {
        Self::Range { start, stop, points }
    }

    /// Grid values; endpoints of a range are hit exactly.
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Values(v) => v.clone(),
            Self::Range { start, points: 1, .. } => vec![*start],
            &Self::Range { start, stop, points } => (0..points)
                .map(|i| {
                    if i + 1 == points {
                        stop
                    } else {
                        start + (stop - start) * i as f64 / (points - 1) as f64
                    }
                })
                .collect(),
        }
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        let v = self.values();
        if v.is_empty() {
            return Err(invalid(name, "grid is empty"));
        }
        if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(invalid(name, "grid values must be finite and non-negative"));
        }
        if v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(name, "grid values must be strictly increasing"));
        }
        Ok(())
    }
}

/// Upper temperature bound applied to one ω value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureCap {
    pub omega: f64,
    pub max_temperature: f64,
}

/// Pure-state scan over the initial oscillator level at fixed ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockScanSpec {
    pub omega: f64,
    pub g_values: Vec<f64>,
    /// First and last initial level, inclusive.
    pub n_first: usize,
    pub n_last: usize,
}

/// Grid of parameter points.
///
/// The default grid is 9 couplings in [0, 2] by 11
/// temperatures in [0, 5] for ω/Δ ∈ {0.2, 1, 5}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub delta: f64,
    /// Fixed sweep rate; `null` derives it from `p_lz_target`.
    pub sweep_rate: Option<f64>,
    pub p_lz_target: f64,
    pub omega_values: Vec<f64>,
    pub g_grid: Axis,
    pub temperature_grid: Axis,
    /// Temperatures above the cap are left out for that ω.
    pub temperature_caps: Vec<TemperatureCap>,
    pub solver: SolverChoice,
    pub fock_scan: Option<FockScanSpec>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            delta: 1.0,
            sweep_rate: None,
            p_lz_target: DEFAULT_P_LZ,
            omega_values: vec![0.2, 1.0, 5.0],
            g_grid: Axis::range(0.0, 2.0, 9),
            temperature_grid: Axis::range(0.0, 5.0, 11),
            temperature_caps: Vec::new(),
            solver: SolverChoice::Quantum,
            fock_scan: None,
        }
    }
}

impl SweepSpec {
    /// 33 × 41 grids matching the published heatmaps.
    pub fn full_resolution() -> Self {
        Self {
            g_grid: Axis::range(0.0, 2.0, 33),
            temperature_grid: Axis::range(0.0, 5.0, 41),
            ..Self::default()
        }
    }

    /// Caps k_BT/Δ at 3 for ω/Δ = 0.2, keeping truncations moderate.
    pub fn with_low_omega_cap(mut self) -> Self {
        self.temperature_caps.push(TemperatureCap {
            omega: 0.2,
            max_temperature: 3.0,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.base_params(1.0)?;
        if self.omega_values.is_empty() {
            return Err(invalid("omega_values", "grid is empty"));
        }
        if self.omega_values.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid("omega_values", "values must be positive"));
        }
        self.g_grid.validate("g_grid")?;
        self.temperature_grid.validate("temperature_grid")?;
        if let Some(scan) = &self.fock_scan {
            if !(scan.omega > 0.0) || scan.g_values.is_empty() || scan.n_first > scan.n_last {
                return Err(invalid("fock_scan", "needs ω > 0, at least one g and n_first ≤ n_last"));
            }
        }
        Ok(())
    }

    /// Parameters for ω with g = T = 0.
    pub fn base_params(&self, omega: f64) -> Result<ModelParams> {
        let sweep_rate = match self.sweep_rate {
            Some(v) => v,
            None => sweep_rate_for_target(self.delta, self.p_lz_target)?,
        };
        let p = ModelParams {
            delta: self.delta,
            omega,
            g: 0.0,
            temperature: 0.0,
            sweep_rate,
        };
        p.validate()?;
        Ok(p)
    }

    /// Grid points in lexicographic (ω, g, T) order.
    pub fn points(&self) -> Result<Vec<ModelParams>> {
        let gs = self.g_grid.values();
        let ts = self.temperature_grid.values();
        let mut out = Vec::new();
        for &omega in &self.omega_values {
            let base = self.base_params(omega)?;
            let cap = self
                .temperature_caps
                .iter()
                .find(|c| (c.omega - omega).abs() <= 1e-12 * omega)
                .map_or(f64::INFINITY, |c| c.max_temperature);
            for &g in &gs {
                for &t in ts.iter().filter(|&&t| t <= cap) {
                    out.push(ModelParams {
                        g,
                        temperature: t,
                        ..base
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Outcome of a grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointFlag {
    Ok,
    /// Population reached the truncation boundary.
    Boundary,
    /// A truncation was clipped by the hard maximum.
    Capped,
    Failed,
}

impl PointFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Boundary => "boundary",
            Self::Capped => "capped",
            Self::Failed => "failed",
        }
    }
}

impl std::str::FromStr for PointFlag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(Self::Ok),
            "boundary" => Ok(Self::Boundary),
            "capped" => Ok(Self::Capped),
            "failed" => Ok(Self::Failed),
            _ => Err(invalid("flag", format!("unknown flag `{s}`"))),
        }
    }
}

/// Result of one point for one solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub solver: SolverTag,
    pub params: ModelParams,
    /// Initial oscillator level, for Fock-scan records.
    pub fock_level: Option<usize>,
    /// `None` if the point failed.
    pub p_excited: Option<f64>,
    /// Largest per-sector truncation used.
    pub fock_dim: usize,
    /// Thermal weight left out of the ensemble.
    pub tail: f64,
    pub norm_drift: f64,
    pub flag: PointFlag,
    pub wall_s: f64,
    pub error: Option<String>,
}

impl ResultRecord {
    fn failed(solver: SolverTag, params: ModelParams, fock_level: Option<usize>, e: Error, wall_s: f64) -> Self {
        Self {
            solver,
            params,
            fock_level,
            p_excited: None,
            fock_dim: 0,
            tail: 0.0,
            norm_drift: 0.0,
            flag: PointFlag::Failed,
            wall_s,
            error: Some(e.to_string()),
        }
    }
}

fn flag_of(boundary: bool, capped: bool) -> PointFlag {
    if boundary {
        PointFlag::Boundary
    } else if capped {
        PointFlag::Capped
    } else {
        PointFlag::Ok
    }
}

/// Runs one point with one solver. Failures are recorded, not returned.
pub fn run_point(params: &ModelParams, controls: &NumericalControls, solver: SolverTag) -> ResultRecord {
    let clock = Instant::now();
    let out = match solver {
        SolverTag::Quantum => quantum_point(params, controls),
        SolverTag::Semiclassical => semiclassical_point(params, controls),
    };
    let wall_s = clock.elapsed().as_secs_f64();
    match out {
        Ok(mut r) => {
            r.wall_s = wall_s;
            r
        }
        Err(e) => ResultRecord::failed(solver, *params, None, e, wall_s),
    }
}

fn quantum_point(params: &ModelParams, controls: &NumericalControls) -> Result<ResultRecord> {
    let plan = TruncationPlan::new(params, controls)?;
    let ensemble = initial_ensemble(params, controls, &plan)?;
    let res = mixed_excited_probability(&ensemble, params, controls)?;
    Ok(ResultRecord {
        solver: SolverTag::Quantum,
        params: *params,
        fock_level: None,
        p_excited: Some(res.p_excited),
        fock_dim: res.fock_dim,
        tail: ensemble.distribution.discarded_tail + ensemble.dropped_weight + res.failed_weight,
        norm_drift: res.norm_drift,
        flag: flag_of(res.truncation_flag, res.capped),
        wall_s: 0.0,
        error: None,
    })
}

/// Uniform truncation for the incoherent solver: the polaron layout of the
/// highest thermal member covers every level the network can reach.
pub fn semiclassical_fock_dim(params: &ModelParams, controls: &NumericalControls) -> Result<(usize, bool)> {
    let plan = TruncationPlan::new(params, controls)?;
    let (layout, capped) = plan.polaron_layout(plan.thermal_states - 1);
    Ok((layout.down.max(layout.up), capped))
}

fn semiclassical_point(params: &ModelParams, controls: &NumericalControls) -> Result<ResultRecord> {
    let (n_fock, capped) = semiclassical_fock_dim(params, controls)?;
    let p = semiclassical_excited_probability(params, n_fock, controls.boltzmann_tail_tol)?;
    let tail = if params.temperature == 0.0 {
        0.0
    } else {
        let r = (-params.omega / params.temperature).exp();
        r.powi(crate::thermal::thermal_cutoff(params.omega, params.temperature, controls.boltzmann_tail_tol) as i32)
    };
    Ok(ResultRecord {
        solver: SolverTag::Semiclassical,
        params: *params,
        fock_level: None,
        p_excited: Some(p),
        fock_dim: n_fock,
        tail,
        norm_drift: 0.0,
        flag: flag_of(false, capped),
        wall_s: 0.0,
        error: None,
    })
}

/// Runs `tasks` on a pool with `workers` threads (0 = one per core) and
/// returns results in task order.
fn run_parallel<T: Sync, R: Send>(workers: usize, tasks: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Result<Vec<R>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid("workers", e.to_string()))?;
    Ok(pool.install(|| tasks.par_iter().map(&f).collect()))
}

/// One record per (ω, g, T, solver), in that lexicographic order.
///
/// Only invalid input is an error; failed points are recorded in-line.
pub fn run_sweep(spec: &SweepSpec, controls: &NumericalControls) -> Result<Vec<ResultRecord>> {
    run_sweep_with(spec, controls, |_| {})
}

/// [`run_sweep`] calling `progress` as each record completes, in completion
/// order.
pub fn run_sweep_with(
    spec: &SweepSpec,
    controls: &NumericalControls,
    progress: impl Fn(&ResultRecord) + Sync + Send,
) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    controls.validate()?;
    let tasks: Vec<(ModelParams, SolverTag)> = spec
        .points()?
        .into_iter()
        .flat_map(|p| spec.solver.tags().iter().map(move |&s| (p, s)))
        .collect();
    run_parallel(controls.workers, &tasks, |(p, s)| {
        let r = run_point(p, controls, *s);
        progress(&r);
        r
    })
}

/// Propagates |↓⟩ ⊗ D(g/ħω)|n⟩ for every g in `scan.g_values` and every
/// n in the scan range, with no thermal averaging. Records are ordered by
/// (g, n) and carry `temperature = 0`.
pub fn run_fock_scan(spec: &SweepSpec, controls: &NumericalControls) -> Result<Vec<ResultRecord>> {
    let scan = spec
        .fock_scan
        .as_ref()
        .ok_or_else(|| invalid("fock_scan", "spec has no fock_scan section"))?;
    spec.validate()?;
    controls.validate()?;
    let base = spec.base_params(scan.omega)?;
    let tasks: Vec<(ModelParams, usize)> = scan
        .g_values
        .iter()
        .flat_map(|&g| (scan.n_first..=scan.n_last).map(move |n| (ModelParams { g, ..base }, n)))
        .collect();
    run_parallel(controls.workers, &tasks, |(p, n)| fock_point(p, controls, *n))
}

/// Quantum result for the pure initial level `n`.
pub fn fock_point(params: &ModelParams, controls: &NumericalControls, n: usize) -> ResultRecord {
    let clock = Instant::now();
    let out = (|| {
        let member = pure_member(params, controls, n)?;
        let (p, traj) = run_member_trajectory(controls.frame, &member, params, controls)?;
        Ok::<_, Error>(ResultRecord {
            solver: SolverTag::Quantum,
            params: *params,
            fock_level: Some(n),
            p_excited: Some(p),
            fock_dim: member.layout.down.max(member.layout.up),
            tail: 0.0,
            norm_drift: traj.norm_drift,
            flag: flag_of(traj.truncation_flag, member.capped),
            wall_s: 0.0,
            error: None,
        })
    })();
    let wall_s = clock.elapsed().as_secs_f64();
    match out {
        Ok(mut r) => {
            r.wall_s = wall_s;
            r
        }
        Err(e) => ResultRecord::failed(SolverTag::Quantum, *params, Some(n), e, wall_s),
    }
}

/// Sensitivity of one quantum point to its numerical controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub params: ModelParams,
    pub baseline: ResultRecord,
    /// Δp with every truncation doubled; `None` if either run failed.
    pub fock_delta: Option<f64>,
    /// Δp with the evolution window and its margins doubled.
    pub horizon_delta: Option<f64>,
    /// Δp with the local error tolerance divided by ten.
    pub tolerance_delta: Option<f64>,
    pub passed: bool,
}

/// Re-runs a point with (a) doubled truncations, (b) a doubled window and
/// (c) a ten times tighter step tolerance, and compares each with the
/// baseline. A point whose baseline touched the truncation boundary fails
/// (a) whatever the delta.
pub fn converge(params: &ModelParams, controls: &NumericalControls) -> Result<ConvergenceReport> {
    params.validate()?;
    controls.validate()?;
    let baseline = run_point(params, controls, SolverTag::Quantum);

    let mut wide = controls.clone();
    match &mut wide.fock_dim {
        Some(n) => *n *= 2,
        None => wide.fock_scale *= 2.0,
    }

    let plan = TruncationPlan::new(params, controls)?;
    let (_, _, t_f) = member_geometry(&plan, controls, plan.thermal_states - 1);
    let mut long = controls.clone();
    long.time_horizon = Some(2.0 * t_f);
    long.window_margin *= 2.0;

    let mut tight = controls.clone();
    tight.local_error_tol *= 0.1;

    let variants = [wide, long, tight];
    let reruns = run_parallel(controls.workers, &variants, |c| {
        run_point(params, c, SolverTag::Quantum)
    })?;
    let delta = |r: &ResultRecord| Some(r.p_excited? - baseline.p_excited?);
    let deltas: Vec<Option<f64>> = reruns.iter().map(delta).collect();
    let within = |d: Option<f64>| d.is_some_and(|d| d.abs() < CONVERGENCE_THRESHOLD);
    let passed = baseline.flag != PointFlag::Boundary && deltas.iter().all(|&d| within(d));
    Ok(ConvergenceReport {
        params: *params,
        baseline,
        fock_delta: deltas[0],
        horizon_delta: deltas[1],
        tolerance_delta: deltas[2],
        passed,
    })
}
