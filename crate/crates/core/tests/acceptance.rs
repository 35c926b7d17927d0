//! Acceptance run. Prints one PASS/FAIL line per criterion.
//!
//! Environment:
//! - `ACCEPTANCE_ONLY=C1,C6` runs a subset.
//! - `ACCEPTANCE_STRICT=1` exits non-zero if any line fails.
//! - `ACCEPTANCE_FULL=1` adds the long ω/Δ = 0.2 run up to k_BT/Δ = 5.
//! - `ACCEPTANCE_CACHE=<dir>` keeps each grid as CSV plus JSON sidecar in
//!   `dir` and reuses a file whose sidecar records the same spec and
//!   controls. Without it every grid is computed and written under the cargo
//!   target temp dir.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use lzosc_core::operators::DisplacementTable;
use lzosc_core::propagator::PropagationSettings;
use lzosc_core::semiclassical::{apply_event, enumerate_crossings, LevelOccupations};
use lzosc_core::sweep::Peak;
use lzosc_core::sweep::{read_csv, write_csv, write_sidecar};
use lzosc_core::sweep::{run_sweep_with, Axis, FockScanSpec, PointFlag, SolverChoice, SolverTag};
use lzosc_core::thermal::thermal_cutoff;
use lzosc_core::{
    boltzmann_weights, build_hamiltonian, converge, max_temperature_slope, peak_coupling, propagate, run_fock_scan,
    ModelParams, NumericalControls, ResultRecord, StateVector, SweepSpec,
};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

// Pinned tolerances.
const BASELINE_TOL: f64 = 0.002;
const ZERO_T_TOL: f64 = 0.010;
const SLOPE_REF: f64 = 0.18;
const SLOPE_EXPONENT: f64 = -0.57;
const SLOPE_REL_TOL_1: f64 = 0.25;
const SLOPE_REL_TOL_5: f64 = 0.30;
const LOW_OMEGA_PEAK: (f64, f64) = (0.4, 1.1);
const SEMICLASSICAL_MARGIN: f64 = 0.005;
/// Frozen from the converged ω/Δ = 1 grids.
const AGREEMENT_BOUND: f64 = 0.03;
const NORM_DRIFT_MAX: f64 = 1e-6;
const ORACLE_TOL: f64 = 1e-6;
const CONSERVATION_TOL: f64 = 1e-12;
const FC_TOL: f64 = 1e-10;
/// Fock-scan peak must sit at 1 ≤ n ≤ this.
const FOCK_PEAK_MAX_LEVEL: usize = 10;
/// Required drop from the Fock-scan peak to the last level.
const FOCK_DROP: f64 = 0.02;
const LOW_OMEGA_T_CAP: f64 = 3.0;

fn controls() -> NumericalControls {
    NumericalControls {
        local_error_tol: 1e-6,
        ..NumericalControls::default()
    }
}

/// Thermal ω/Δ = 0.2 grids: a 1e-3 Boltzmann tail bounds the error in p by
/// 1e-3 and halves the member count; the looser step tolerance and margin
/// each move p by about 1e-4.
fn low_omega_controls() -> NumericalControls {
    NumericalControls {
        local_error_tol: 1e-5,
        boltzmann_tail_tol: 1e-3,
        window_margin: 20.0,
        ..controls()
    }
}

fn controls_for(omega: f64) -> NumericalControls {
    if omega < 1.0 {
        low_omega_controls()
    } else {
        controls()
    }
}

struct Line {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
}

struct Runs {
    records: Vec<ResultRecord>,
    out_dir: PathBuf,
    reuse: bool,
    reused: usize,
}

impl Runs {
    fn sweep(&mut self, name: &str, spec: SweepSpec, controls: &NumericalControls) -> Vec<ResultRecord> {
        if let Some(recs) = self.cached(name, &spec, controls) {
            return self.keep(recs);
        }
        let clock = Instant::now();
        let total = spec.points().map(|p| p.len() * spec.solver.tags().len()).unwrap_or(0);
        let done = AtomicUsize::new(0);
        let recs = run_sweep_with(&spec, controls, |r| {
            let k = done.fetch_add(1, Ordering::Relaxed) + 1;
            eprintln!(
                "  {name} [{k}/{total}] {} g={} T={} p={:?} {:.1}s",
                r.solver.as_str(),
                r.params.g,
                r.params.temperature,
                r.p_excited,
                r.wall_s
            );
        })
        .expect("acceptance spec is valid");
        self.store(name, &spec, controls, &recs, clock)
    }

    fn fock_scan(&mut self, name: &str, spec: SweepSpec, controls: &NumericalControls) -> Vec<ResultRecord> {
        if let Some(recs) = self.cached(name, &spec, controls) {
            return self.keep(recs);
        }
        let clock = Instant::now();
        let recs = run_fock_scan(&spec, controls).expect("acceptance spec is valid");
        self.store(name, &spec, controls, &recs, clock)
    }

    fn cached(&mut self, name: &str, spec: &SweepSpec, controls: &NumericalControls) -> Option<Vec<ResultRecord>> {
        if !self.reuse {
            return None;
        }
        let csv = self.out_dir.join(format!("{name}.csv"));
        let text = std::fs::read_to_string(csv.with_extension("json")).ok()?;
        let sidecar: serde_json::Value = serde_json::from_str(&text).ok()?;
        let same = sidecar["spec"] == serde_json::to_value(spec).ok()?
            && sidecar["controls"] == serde_json::to_value(controls).ok()?;
        let recs = if same { read_csv(&csv).ok()? } else { return None };
        eprintln!("  {name}: {} records reused from {}", recs.len(), csv.display());
        self.reused += 1;
        Some(recs)
    }

    fn store(
        &mut self,
        name: &str,
        spec: &SweepSpec,
        controls: &NumericalControls,
        recs: &[ResultRecord],
        clock: Instant,
    ) -> Vec<ResultRecord> {
        eprintln!(
            "  {name}: {} records in {:.0}s",
            recs.len(),
            clock.elapsed().as_secs_f64()
        );
        let csv = self.out_dir.join(format!("{name}.csv"));
        let written = std::fs::create_dir_all(&self.out_dir)
            .map_err(lzosc_core::Error::from)
            .and_then(|_| write_csv(&csv, recs, true))
            .and_then(|_| write_sidecar(&csv.with_extension("json"), spec, controls, recs));
        if let Err(e) = written {
            eprintln!("  {name}: not saved: {e}");
        }
        self.keep(recs.to_vec())
    }

    fn keep(&mut self, recs: Vec<ResultRecord>) -> Vec<ResultRecord> {
        self.records.extend_from_slice(&recs);
        recs
    }
}

fn spec(omegas: &[f64], g: Axis, t: Axis, solver: SolverChoice) -> SweepSpec {
    SweepSpec {
        omega_values: omegas.to_vec(),
        g_grid: g,
        temperature_grid: t,
        solver,
        ..SweepSpec::default()
    }
}

fn quantum(recs: &[ResultRecord]) -> impl Iterator<Item = &ResultRecord> {
    recs.iter().filter(|r| r.solver == SolverTag::Quantum)
}

fn failures(recs: &[ResultRecord]) -> Vec<String> {
    recs.iter()
        .filter(|r| r.p_excited.is_none() || r.flag == PointFlag::Boundary)
        .map(|r| {
            format!(
                "{} ω={} g={} T={}: {}",
                r.solver.as_str(),
                r.params.omega,
                r.params.g,
                r.params.temperature,
                r.error.as_deref().unwrap_or(r.flag.as_str())
            )
        })
        .collect()
}

/// Every point within `tol` of 0.1.
fn near_lz(recs: &[ResultRecord], tol: f64) -> (bool, String) {
    let bad = failures(recs);
    if !bad.is_empty() {
        return (false, bad.join("; "));
    }
    let worst = quantum(recs)
        .map(|r| (r.p_excited.unwrap() - 0.1).abs())
        .fold(0.0, f64::max);
    (
        worst <= tol,
        format!("max |p − 0.1| = {worst:.2e} over {} points (tol {tol})", recs.len()),
    )
}

fn c1(runs: &mut Runs) -> Line {
    let recs = runs.sweep(
        "c1_baseline",
        spec(
            &[1.0],
            Axis::Values(vec![0.0]),
            Axis::Values(vec![0.0, 1.0, 2.5, 5.0]),
            SolverChoice::Quantum,
        ),
        &controls(),
    );
    let (pass, detail) = near_lz(&recs, BASELINE_TOL);
    Line {
        id: "C1",
        title: "zero-coupling baseline",
        pass,
        detail,
    }
}

fn c2(runs: &mut Runs) -> Line {
    let recs = runs.sweep(
        "c2_zero_temperature",
        spec(
            &[0.2, 1.0, 5.0],
            Axis::Values(vec![0.5, 1.0, 2.0]),
            Axis::Values(vec![0.0]),
            SolverChoice::Quantum,
        ),
        &controls(),
    );
    let (pass, detail) = near_lz(&recs, ZERO_T_TOL);
    Line {
        id: "C2",
        title: "zero-temperature exactness",
        pass,
        detail,
    }
}

/// Default (g, T) grid at one ω with both solvers, computed once.
fn default_grid(runs: &mut Runs, cache: &mut Vec<(f64, Vec<ResultRecord>)>, omega: f64) -> Vec<ResultRecord> {
    if let Some((_, recs)) = cache.iter().find(|(w, _)| *w == omega) {
        return recs.clone();
    }
    let base = SweepSpec::default();
    let recs = runs.sweep(
        &format!("default_grid_omega{omega}"),
        spec(&[omega], base.g_grid, base.temperature_grid, SolverChoice::Both),
        &controls(),
    );
    cache.push((omega, recs.clone()));
    recs
}

fn c3(runs: &mut Runs, cache: &mut Vec<(f64, Vec<ResultRecord>)>) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for (omega, rel) in [(1.0, SLOPE_REL_TOL_1), (5.0, SLOPE_REL_TOL_5)] {
        let recs: Vec<ResultRecord> = quantum(&default_grid(runs, cache, omega)).cloned().collect();
        let want = SLOPE_REF * f64::powf(omega, SLOPE_EXPONENT);
        match max_temperature_slope(&recs, omega) {
            Ok(s) => {
                let ok = (s.slope - want).abs() <= rel * want;
                pass &= ok;
                parts.push(format!(
                    "ω={omega}: {:.4} at g={} T={} (want {want:.4} ± {:.0}%)",
                    s.slope,
                    s.g,
                    s.temperature,
                    rel * 100.0
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("ω={omega}: {e}"));
            }
        }
    }
    Line {
        id: "C3",
        title: "slope law",
        pass,
        detail: parts.join("; "),
    }
}

fn c4(runs: &mut Runs) -> Line {
    let low = runs.sweep(
        "c4a_peak_omega0.2_T3",
        spec(
            &[0.2],
            Axis::range(0.0, 2.0, 9),
            Axis::Values(vec![3.0]),
            SolverChoice::Quantum,
        ),
        &low_omega_controls(),
    );
    let high = runs.sweep(
        "c4b_peak_omega5_T3",
        spec(
            &[5.0],
            Axis::range(0.0, 6.0, 25),
            Axis::Values(vec![3.0]),
            SolverChoice::Quantum,
        ),
        &controls(),
    );
    let (a_ok, a) = match peak_coupling(&low, 0.2, 3.0) {
        Ok(Peak::Interior { g, p_excited }) => (
            (LOW_OMEGA_PEAK.0..=LOW_OMEGA_PEAK.1).contains(&g),
            format!(
                "(a) ω=0.2: peak g={g} p={p_excited:.4} (want g in [{}, {}])",
                LOW_OMEGA_PEAK.0, LOW_OMEGA_PEAK.1
            ),
        ),
        Ok(Peak::Monotonic) => (false, "(a) ω=0.2: no interior peak".to_string()),
        Err(e) => (false, format!("(a) ω=0.2: {e}")),
    };
    let (b_ok, b) = match peak_coupling(&high, 5.0, 3.0) {
        Ok(Peak::Interior { g, p_excited }) => (
            g > 1.0,
            format!(
                "(b) ω=5: peak g={g} p={p_excited:.4}, parabolic vertex g≈{:.3} (want g > 1)",
                vertex(&high)
            ),
        ),
        Ok(Peak::Monotonic) => (false, "(b) ω=5: no interior peak on [0, 6]".to_string()),
        Err(e) => (false, format!("(b) ω=5: {e}")),
    };
    Line {
        id: "C4",
        title: "peak locations",
        pass: a_ok && b_ok,
        detail: format!("{a}; {b}"),
    }
}

/// Vertex of the parabola through the largest p of a g slice and its two
/// neighbours. Reported only; the gate uses the grid maximum.
fn vertex(recs: &[ResultRecord]) -> f64 {
    let mut pts: Vec<(f64, f64)> = recs.iter().filter_map(|r| Some((r.params.g, r.p_excited?))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let i = (0..pts.len())
        .max_by(|&a, &b| pts[a].1.total_cmp(&pts[b].1))
        .unwrap_or(0);
    if i == 0 || i + 1 >= pts.len() {
        return f64::NAN;
    }
    let ((x0, y0), (x1, y1), (x2, y2)) = (pts[i - 1], pts[i], pts[i + 1]);
    let h = 0.5 * (x2 - x0);
    x1 + 0.5 * h * (y0 - y2) / (y0 - 2.0 * y1 + y2)
}

/// Interior maximum of p over a one-dimensional slice sorted by `key`.
fn interior_max(recs: &[ResultRecord], key: impl Fn(&ResultRecord) -> f64) -> Result<(f64, f64, f64, f64), String> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for r in recs {
        match r.p_excited {
            Some(p) => pts.push((key(r), p)),
            None => return Err(failures(std::slice::from_ref(r)).join("")),
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (i, &(x, p)) = pts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .ok_or("empty slice")?;
    if i == 0 || i + 1 == pts.len() {
        return Err(format!("maximum at the edge x={x} p={p:.4}"));
    }
    Ok((x, p, pts[0].1, pts[pts.len() - 1].1))
}

fn c5(runs: &mut Runs) -> Line {
    let recs = runs.sweep(
        "c5_omega0.2_g2",
        spec(
            &[0.2],
            Axis::Values(vec![2.0]),
            Axis::range(0.0, LOW_OMEGA_T_CAP, 7),
            SolverChoice::Quantum,
        ),
        &low_omega_controls(),
    );
    let (pass, detail) = match interior_max(&recs, |r| r.params.temperature) {
        Ok((t, p, _, last)) => (true, format!("max p={p:.4} at T={t}, p(T={LOW_OMEGA_T_CAP})={last:.4}")),
        Err(e) => (false, e),
    };
    Line {
        id: "C5",
        title: "non-monotonic temperature dependence",
        pass,
        detail,
    }
}

fn c6(runs: &mut Runs) -> Line {
    let scan = SweepSpec {
        fock_scan: Some(FockScanSpec {
            omega: 0.2,
            g_values: vec![1.0],
            n_first: 0,
            n_last: 30,
        }),
        ..SweepSpec::default()
    };
    let recs = runs.fock_scan("c6_fock_scan", scan, &controls());
    let (pass, detail) = match interior_max(&recs, |r| r.fock_level.unwrap_or(0) as f64) {
        Ok((n, p, _, last)) => (
            n >= 1.0 && n <= FOCK_PEAK_MAX_LEVEL as f64 && p - last >= FOCK_DROP,
            format!("peak p={p:.4} at n={n}, p(30)={last:.4} (want 1 ≤ n ≤ {FOCK_PEAK_MAX_LEVEL}, drop ≥ {FOCK_DROP})"),
        ),
        Err(e) => (false, e),
    };
    Line {
        id: "C6",
        title: "Fock-scan structure",
        pass,
        detail,
    }
}

/// Signed P_semiclassical − P_quantum at every grid point.
fn solver_diffs(recs: &[ResultRecord]) -> Result<Vec<(f64, f64, f64)>, String> {
    let bad = failures(recs);
    if !bad.is_empty() {
        return Err(bad.join("; "));
    }
    let mut out = Vec::new();
    for q in quantum(recs) {
        let s = recs
            .iter()
            .find(|r| r.solver == SolverTag::Semiclassical && r.params == q.params)
            .ok_or_else(|| format!("no semiclassical record at g={} T={}", q.params.g, q.params.temperature))?;
        out.push((
            q.params.g,
            q.params.temperature,
            s.p_excited.unwrap() - q.p_excited.unwrap(),
        ));
    }
    Ok(out)
}

fn c7(runs: &mut Runs, cache: &mut Vec<(f64, Vec<ResultRecord>)>) -> Line {
    let (pass, detail) = match solver_diffs(&default_grid(runs, cache, 5.0)) {
        Ok(d) => {
            let (g, t, worst) = d
                .iter()
                .copied()
                .fold((0.0, 0.0, f64::NEG_INFINITY), |a, b| if b.2 > a.2 { b } else { a });
            (
                worst <= SEMICLASSICAL_MARGIN,
                format!(
                    "max(P_sc − P_q) = {worst:.4} at g={g} T={t} over {} points (bound {SEMICLASSICAL_MARGIN})",
                    d.len()
                ),
            )
        }
        Err(e) => (false, e),
    };
    Line {
        id: "C7",
        title: "semiclassical underestimate",
        pass,
        detail,
    }
}

fn c8(runs: &mut Runs, cache: &mut Vec<(f64, Vec<ResultRecord>)>) -> Line {
    let (pass, detail) = match solver_diffs(&default_grid(runs, cache, 1.0)) {
        Ok(d) => {
            let (g, t, worst) = d
                .iter()
                .map(|&(g, t, x)| (g, t, x.abs()))
                .fold((0.0, 0.0, 0.0), |a, b| if b.2 > a.2 { b } else { a });
            (
                worst < AGREEMENT_BOUND,
                format!(
                    "max|P_q − P_sc| = {worst:.4} at g={g} T={t} over {} points (bound {AGREEMENT_BOUND})",
                    d.len()
                ),
            )
        }
        Err(e) => (false, e),
    };
    Line {
        id: "C8",
        title: "semiclassical agreement window",
        pass,
        detail,
    }
}

/// Piecewise-constant evolution: exact exponential of the dense H at each
/// step midpoint, via its eigendecomposition.
fn piecewise_exact(h: &lzosc_core::HamiltonianSplit, psi0: &[Complex64], t0: f64, t1: f64, dt: f64) -> Vec<Complex64> {
    let steps = ((t1 - t0) / dt).ceil() as usize;
    let dt = (t1 - t0) / steps as f64;
    let mut y = psi0.to_vec();
    for i in 0..steps {
        let eig = SymmetricEigen::new(h.dense_at(t0 + (i as f64 + 0.5) * dt));
        let v = &eig.eigenvectors;
        let n = y.len();
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        for (k, ck) in c.iter_mut().enumerate() {
            let proj: Complex64 = (0..n).map(|j| y[j] * v[(j, k)]).sum();
            *ck = proj * Complex64::from_polar(1.0, -eig.eigenvalues[k] * dt);
        }
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = (0..n).map(|k| c[k] * v[(j, k)]).sum();
        }
    }
    y
}

fn oracle_error() -> f64 {
    let mut worst: f64 = 0.0;
    for (omega, g) in [(1.0, 0.7), (0.5, 1.5), (3.0, 0.4)] {
        let params = ModelParams::new(omega, g, 0.0);
        let h = build_hamiltonian(&params, 4).expect("valid");
        let dim = h.dim();
        let mut amps: Vec<Complex64> = (0..dim)
            .map(|i| Complex64::new(1.0 / (1.0 + i as f64), 0.3 * (i % 3) as f64))
            .collect();
        let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|c| *c /= norm);
        let want = piecewise_exact(&h, &amps, -8.0, 8.0, 1e-3);
        let mut state = StateVector::new(amps, -8.0);
        propagate(&mut state, &h, &PropagationSettings::new(8.0, 1e-10)).expect("propagates");
        for (a, b) in state.amplitudes.iter().zip(&want) {
            worst = worst.max((a - b).norm());
        }
    }
    worst
}

/// Largest change of total probability over a full semiclassical sweep.
fn conservation_error() -> f64 {
    let mut worst: f64 = 0.0;
    for (omega, g, t) in [(0.2, 2.0, 3.0), (1.0, 1.0, 2.0), (5.0, 2.0, 5.0)] {
        let params = ModelParams::new(omega, g, t);
        let thermal = thermal_cutoff(omega, t, 1e-6);
        let n_fock = thermal + 40;
        let w = boltzmann_weights(omega, t, thermal, 1e-6).expect("valid");
        let mut occ = LevelOccupations::from_down(&w.probabilities, n_fock);
        let before = occ.total();
        let t_f = n_fock as f64 * omega / params.sweep_rate;
        for e in enumerate_crossings(&params, n_fock, t_f).expect("valid") {
            apply_event(&mut occ, &e, params.sweep_rate);
            worst = worst.max((occ.total() - before).abs());
        }
    }
    worst
}

/// exp(λ(a† − a)) by scaling and squaring of a Taylor series.
fn displacement_brute_force(lambda: f64, dim: usize) -> DMatrix<f64> {
    let mut gen = DMatrix::<f64>::zeros(dim, dim);
    for n in 1..dim {
        let s = (n as f64).sqrt();
        gen[(n, n - 1)] = lambda * s;
        gen[(n - 1, n)] = -lambda * s;
    }
    let squarings = (gen.abs().row_sum().max().max(1.0).log2().ceil() as i32) + 4;
    let scaled = &gen / 2f64.powi(squarings);
    let mut term = DMatrix::<f64>::identity(dim, dim);
    let mut sum = term.clone();
    for i in 1..40 {
        term = &term * &scaled / i as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

fn fc_error() -> f64 {
    let mut worst: f64 = 0.0;
    for lambda in [0.3, -1.0, 2.5, 4.0] {
        let exact = displacement_brute_force(lambda, 160);
        let table = DisplacementTable::new(lambda, 40, 40);
        for n in 0..40 {
            for m in 0..40 {
                worst = worst.max((table.get(n, m) - exact[(n, m)]).abs());
            }
        }
    }
    worst
}

/// Points re-run under doubled truncation, window and tightened tolerance.
const CONVERGE_POINTS: [(f64, f64, f64); 6] = [
    (1.0, 1.0, 1.0),
    (1.0, 2.0, 5.0),
    (5.0, 2.0, 3.0),
    (5.0, 0.5, 5.0),
    (0.2, 1.0, 1.0),
    (0.2, 0.5, 2.0),
];

fn c9(runs: &Runs) -> Line {
    let mut parts = Vec::new();
    let mut pass = true;

    let drift = runs.records.iter().map(|r| r.norm_drift).fold(0.0, f64::max);
    let traj = quantum(&runs.records).filter(|r| r.p_excited.is_some()).count();
    pass &= drift < NORM_DRIFT_MAX;
    parts.push(format!("norm drift {drift:.1e} over {traj} quantum points"));

    let oracle = oracle_error();
    pass &= oracle < ORACLE_TOL;
    parts.push(format!("N≤8 oracle {oracle:.1e}"));

    let cons = conservation_error();
    pass &= cons < CONSERVATION_TOL;
    parts.push(format!("semiclassical conservation {cons:.1e}"));

    let fc = fc_error();
    pass &= fc < FC_TOL;
    parts.push(format!("FC recurrence {fc:.1e}"));

    let mut worst: f64 = 0.0;
    let mut failed = Vec::new();
    for (omega, g, t) in CONVERGE_POINTS {
        let params = ModelParams::new(omega, g, t);
        match converge(&params, &controls_for(omega)) {
            Ok(r) => {
                eprintln!(
                    "  converge ω={omega} g={g} T={t}: p={:?} deltas {:?} {:?} {:?}",
                    r.baseline.p_excited, r.fock_delta, r.horizon_delta, r.tolerance_delta
                );
                for d in [r.fock_delta, r.horizon_delta, r.tolerance_delta] {
                    worst = worst.max(d.map_or(f64::INFINITY, f64::abs));
                }
                if !r.passed {
                    failed.push(format!("(ω={omega}, g={g}, T={t})"));
                }
            }
            Err(e) => failed.push(format!("(ω={omega}, g={g}, T={t}): {e}")),
        }
    }
    pass &= failed.is_empty();
    parts.push(format!(
        "converge on {} points, max delta {worst:.1e}{}",
        CONVERGE_POINTS.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(", failed {}", failed.join(" "))
        }
    ));
    Line {
        id: "C9",
        title: "property suite",
        pass,
        detail: parts.join("; "),
    }
}

fn c10(runs: &mut Runs, full: bool) -> Line {
    let low: Vec<&ResultRecord> = runs
        .records
        .iter()
        .filter(|r| r.params.omega == 0.2 && r.fock_level.is_none())
        .collect();
    let hottest = low.iter().map(|r| r.params.temperature).fold(0.0, f64::max);
    let mut pass = hottest <= LOW_OMEGA_T_CAP;
    let mut detail = format!("ω=0.2 gates use T ≤ {hottest} over {} points", low.len());
    if full {
        let recs = runs.sweep(
            "c10_omega0.2_full_range",
            spec(
                &[0.2],
                Axis::Values(vec![1.0, 2.0]),
                Axis::range(0.0, 5.0, 11),
                SolverChoice::Quantum,
            ),
            &low_omega_controls(),
        );
        let bad = failures(&recs);
        pass &= bad.is_empty();
        let dim = recs.iter().map(|r| r.fock_dim).max().unwrap_or(0);
        detail.push_str(&format!(
            "; full range to T=5: {} points, largest sector {dim}",
            recs.len()
        ));
        if !bad.is_empty() {
            detail.push_str(&format!(", failed {}", bad.join("; ")));
        }
    } else {
        detail.push_str("; full range to T=5 skipped (ACCEPTANCE_FULL=1)");
    }
    Line {
        id: "C10",
        title: "low-frequency scale",
        pass,
        detail,
    }
}

fn main() {
    let only: Option<BTreeSet<String>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').map(|x| x.trim().to_uppercase()).collect());
    let flag = |name: &str| std::env::var(name).is_ok_and(|v| v == "1");
    let wanted = |id: &str| only.as_ref().map_or(true, |s| s.contains(id));

    let cache = std::env::var_os("ACCEPTANCE_CACHE").map(PathBuf::from);
    let mut runs = Runs {
        records: Vec::new(),
        reuse: cache.is_some(),
        out_dir: cache.unwrap_or_else(|| PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")),
        reused: 0,
    };
    let mut grids = Vec::new();
    let clock = Instant::now();
    let mut lines = Vec::new();
    let mut run = |id: &str, f: &mut dyn FnMut(&mut Runs, &mut Vec<(f64, Vec<ResultRecord>)>) -> Line| {
        if wanted(id) {
            let line = f(&mut runs, &mut grids);
            println!(
                "{} [{}] {}: {}",
                if line.pass { "PASS" } else { "FAIL" },
                line.id,
                line.title,
                line.detail
            );
            lines.push(line);
        }
    };
    run("C1", &mut |r, _| c1(r));
    run("C2", &mut |r, _| c2(r));
    run("C3", &mut |r, c| c3(r, c));
    run("C4", &mut |r, _| c4(r));
    run("C5", &mut |r, _| c5(r));
    run("C6", &mut |r, _| c6(r));
    run("C7", &mut |r, c| c7(r, c));
    run("C8", &mut |r, c| c8(r, c));
    run("C9", &mut |r, _| c9(r));
    run("C10", &mut |r, _| c10(r, flag("ACCEPTANCE_FULL")));

    let failed = lines.iter().filter(|l| !l.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.0}s ({} grids reused from {})",
        lines.len() - failed,
        clock.elapsed().as_secs_f64(),
        runs.reused,
        runs.out_dir.display()
    );
    if failed > 0 && flag("ACCEPTANCE_STRICT") {
        std::process::exit(1);
    }
}
