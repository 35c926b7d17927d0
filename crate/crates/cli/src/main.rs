//! `lzosc`: single points, grids, Fock-number scans, convergence checks and
//! analyses of results files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use lzosc_core::model::{Config, Frame, ModelParams, NumericalControls};
use lzosc_core::sweep::{
    self, converge, max_temperature_slope, peak_coupling, read_csv, run_fock_scan, run_point, run_sweep_with,
    write_csv, write_csv_to, write_sidecar, Axis, FockScanSpec, Peak, PointFlag, ResultRecord, SolverChoice, SweepSpec,
};
use lzosc_core::Error;

/// Landau-Zener sweeps of a qubit coupled to a thermal oscillator.
#[derive(Parser, Debug)]
#[command(name = "lzosc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a single parameter point.
    Run {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, value_enum, default_value_t = SolverArg::Quantum)]
        solver: SolverArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a (ω, g, T) grid.
    Sweep {
        /// JSON sweep spec; flags below override its fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// 33 × 41 grids instead of the default 9 × 11.
        #[arg(long)]
        full: bool,
        /// Cap k_BT/Δ at 3 for ω/Δ = 0.2.
        #[arg(long)]
        cap_low_omega: bool,
        #[arg(long, value_delimiter = ',')]
        omega: Option<Vec<f64>>,
        /// Explicit coupling values, comma separated.
        #[arg(long, value_delimiter = ',')]
        g: Option<Vec<f64>>,
        /// Explicit temperatures, comma separated.
        #[arg(long, value_delimiter = ',')]
        temperature: Option<Vec<f64>>,
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
        #[command(flatten)]
        controls: ControlArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Scan the initial Fock level at fixed ω without thermal averaging.
    FockScan {
        #[arg(long)]
        omega: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        g: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        n_first: usize,
        #[arg(long)]
        n_last: usize,
        #[command(flatten)]
        controls: ControlArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Check one point against doubled truncation, doubled window and a
    /// tighter step tolerance.
    Converge {
        #[command(flatten)]
        point: PointArgs,
    },
    /// Slope or peak analysis of an existing results file.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = SolverArg::Quantum)]
        solver: SolverArg,
        #[command(subcommand)]
        what: Analysis,
    },
}

#[derive(Subcommand, Debug)]
enum Analysis {
    /// Largest dP/d(k_BT/Δ) on the grid at ω.
    Slope {
        #[arg(long)]
        omega: f64,
    },
    /// Coupling of the interior maximum of P(g) at (ω, T).
    Peak {
        #[arg(long)]
        omega: f64,
        #[arg(long)]
        temperature: f64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SolverArg {
    Quantum,
    Semiclassical,
    Both,
}

impl From<SolverArg> for SolverChoice {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Quantum => Self::Quantum,
            SolverArg::Semiclassical => Self::Semiclassical,
            SolverArg::Both => Self::Both,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FrameArg {
    Bare,
    Polaron,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Results CSV; a `.json` sidecar is written next to it. Without it the
    /// CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write wall_s = 0 so repeated runs give identical files.
    #[arg(long)]
    no_timing: bool,
}

/// Model parameters; each flag overrides the matching `--config` key.
#[derive(Args, Debug)]
struct PointArgs {
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    sweep_rate: Option<f64>,
    #[arg(long)]
    p_lz_target: Option<f64>,
    #[command(flatten)]
    controls: ControlArgs,
}

/// Numerical controls; each flag overrides the matching `--config` key.
#[derive(Args, Debug)]
struct ControlArgs {
    /// JSON config file (model parameters and a `controls` object).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    fock_dim: Option<usize>,
    #[arg(long)]
    fock_dim_max: Option<usize>,
    #[arg(long)]
    fock_scale: Option<f64>,
    #[arg(long)]
    fock_headroom: Option<usize>,
    #[arg(long)]
    time_horizon: Option<f64>,
    #[arg(long)]
    window_margin: Option<f64>,
    #[arg(long)]
    local_error_tol: Option<f64>,
    #[arg(long)]
    boltzmann_tail_tol: Option<f64>,
    #[arg(long)]
    min_member_weight: Option<f64>,
    #[arg(long)]
    coupling_floor: Option<f64>,
    #[arg(long)]
    leakage_tol: Option<f64>,
    #[arg(long, value_enum)]
    frame: Option<FrameArg>,
    /// Start from the undisplaced thermal state.
    #[arg(long)]
    undisplaced: bool,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    workers: Option<usize>,
}

impl ControlArgs {
    fn config(&self) -> Result<Config, Error> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let c = &mut cfg.controls;
        if self.fock_dim.is_some() {
            c.fock_dim = self.fock_dim;
        }
        if self.time_horizon.is_some() {
            c.time_horizon = self.time_horizon;
        }
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = self.$f { c.$f = v; })*};
        }
        set!(
            fock_dim_max,
            fock_scale,
            fock_headroom,
            window_margin,
            local_error_tol,
            boltzmann_tail_tol,
            min_member_weight,
            coupling_floor,
            leakage_tol,
            workers
        );
        if let Some(f) = self.frame {
            c.frame = match f {
                FrameArg::Bare => Frame::Bare,
                FrameArg::Polaron => Frame::Polaron,
            };
        }
        if self.undisplaced {
            c.displaced_init = false;
        }
        c.validate()?;
        Ok(cfg)
    }
}

impl PointArgs {
    fn resolve(&self) -> Result<(ModelParams, NumericalControls), Error> {
        let mut cfg = self.controls.config()?;
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = self.$f { cfg.$f = v; })*};
        }
        set!(omega, g, temperature, delta, p_lz_target);
        if self.sweep_rate.is_some() {
            cfg.sweep_rate = self.sweep_rate;
        }
        Ok((cfg.params()?, cfg.controls))
    }
}

/// Errors that map to exit code 2.
fn is_validation(e: &anyhow::Error) -> bool {
    matches!(
        e.downcast_ref::<Error>(),
        Some(
            Error::InvalidParameter { .. }
                | Error::IncompleteGrid(_)
                | Error::Json(_)
                | Error::TruncationTooSmall { .. }
        )
    )
}

fn emit<S: serde::Serialize>(
    records: &[ResultRecord],
    output: &OutputArgs,
    spec: &S,
    controls: &NumericalControls,
) -> anyhow::Result<()> {
    match &output.out {
        Some(path) => {
            write_csv(path, records, !output.no_timing).with_context(|| format!("writing {}", path.display()))?;
            write_sidecar(&path.with_extension("json"), spec, controls, records)?;
            eprintln!("wrote {} records to {}", records.len(), path.display());
        }
        None => write_csv_to(std::io::stdout().lock(), records, !output.no_timing)?,
    }
    for r in records.iter().filter(|r| r.flag == PointFlag::Failed) {
        eprintln!(
            "failed: {} omega={} g={} T={}: {}",
            r.solver.as_str(),
            r.params.omega,
            r.params.g,
            r.params.temperature,
            r.error.as_deref().unwrap_or("unknown error")
        );
    }
    Ok(())
}

fn status(records: &[ResultRecord]) -> ExitCode {
    if records.iter().any(|r| r.flag == PointFlag::Failed) {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}

fn load_spec(path: Option<&Path>, full: bool) -> anyhow::Result<SweepSpec> {
    Ok(match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).map_err(Error::from)?
        }
        None if full => SweepSpec::full_resolution(),
        None => SweepSpec::default(),
    })
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { point, solver, output } => {
            let (params, controls) = point.resolve()?;
            let records: Vec<ResultRecord> = SolverChoice::from(solver)
                .tags()
                .iter()
                .map(|&s| run_point(&params, &controls, s))
                .collect();
            emit(&records, &output, &params, &controls)?;
            Ok(status(&records))
        }
        Command::Sweep {
            spec,
            full,
            cap_low_omega,
            omega,
            g,
            temperature,
            solver,
            controls,
            output,
        } => {
            let mut spec = load_spec(spec.as_deref(), full)?;
            let cfg = controls.config()?;
            if controls.config.is_some() {
                spec.delta = cfg.delta;
                spec.sweep_rate = cfg.sweep_rate;
                spec.p_lz_target = cfg.p_lz_target;
            }
            if cap_low_omega {
                spec = spec.with_low_omega_cap();
            }
            if let Some(w) = omega {
                spec.omega_values = w;
            }
            if let Some(v) = g {
                spec.g_grid = Axis::Values(v);
            }
            if let Some(v) = temperature {
                spec.temperature_grid = Axis::Values(v);
            }
            if let Some(s) = solver {
                spec.solver = s.into();
            }
            let total = spec.points()?.len() * spec.solver.tags().len();
            let done = AtomicUsize::new(0);
            let records = run_sweep_with(&spec, &cfg.controls, |r| {
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                eprintln!(
                    "[{k}/{total}] {} omega={} g={} T={} p={} {} {:.1}s",
                    r.solver.as_str(),
                    r.params.omega,
                    r.params.g,
                    r.params.temperature,
                    r.p_excited.map_or("-".into(), sweep::format_sig),
                    r.flag.as_str(),
                    r.wall_s
                );
            })?;
            emit(&records, &output, &spec, &cfg.controls)?;
            Ok(status(&records))
        }
        Command::FockScan {
            omega,
            g,
            n_first,
            n_last,
            controls,
            output,
        } => {
            let cfg = controls.config()?;
            let spec = SweepSpec {
                delta: cfg.delta,
                sweep_rate: cfg.sweep_rate,
                p_lz_target: cfg.p_lz_target,
                fock_scan: Some(FockScanSpec {
                    omega,
                    g_values: g,
                    n_first,
                    n_last,
                }),
                ..SweepSpec::default()
            };
            let records = run_fock_scan(&spec, &cfg.controls)?;
            emit(&records, &output, &spec, &cfg.controls)?;
            Ok(status(&records))
        }
        Command::Converge { point } => {
            let (params, controls) = point.resolve()?;
            let report = converge(&params, &controls)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            eprintln!("{}", if report.passed { "converged" } else { "NOT converged" });
            Ok(if report.baseline.flag == PointFlag::Failed {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Analyze { input, solver, what } => {
            let records: Vec<ResultRecord> = read_csv(&input)?
                .into_iter()
                .filter(|r| SolverChoice::from(solver).tags().contains(&r.solver))
                .collect();
            if solver == SolverArg::Both {
                anyhow::bail!(Error::InvalidParameter {
                    name: "solver",
                    reason: "analyze needs a single solver".into()
                });
            }
            match what {
                Analysis::Slope { omega } => {
                    let s = max_temperature_slope(&records, omega)?;
                    println!(
                        "max_slope={} g={} temperature={}",
                        sweep::format_sig(s.slope),
                        sweep::format_sig(s.g),
                        sweep::format_sig(s.temperature)
                    );
                }
                Analysis::Peak { omega, temperature } => match peak_coupling(&records, omega, temperature)? {
                    Peak::Interior { g, p_excited } => {
                        println!(
                            "peak g={} p_excited={}",
                            sweep::format_sig(g),
                            sweep::format_sig(p_excited)
                        )
                    }
                    Peak::Monotonic => println!("monotonic"),
                },
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_validation(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
