//! CSV results files and their JSON sidecars.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{PointFlag, ResultRecord, SolverTag};
use crate::error::{invalid, Error, Result};
use crate::model::{ModelParams, NumericalControls};

/// Columns of every results file. Fock-scan files add a trailing
/// `fock_level` column.
pub const CSV_HEADER: [&str; 11] = [
    "solver",
    "omega",
    "g",
    "temperature",
    "sweep_rate",
    "fock_dim",
    "p_excited",
    "tail",
    "norm_drift",
    "flag",
    "wall_s",
];

const FOCK_LEVEL: &str = "fock_level";

/// `x` with 10 significant digits, trailing zeros removed. Plain notation
/// is used for decimal exponents in [−5, 10).
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..10).contains(&exp) {
        trim_zeros(format!("{:.*}", (9 - exp) as usize, x))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Writes `records` as CSV. With `timing` false every `wall_s` is written
/// as 0 so that repeated runs give identical files.
pub fn write_csv(path: &Path, records: &[ResultRecord], timing: bool) -> Result<()> {
    write_csv_to(BufWriter::new(File::create(path)?), records, timing)
}

/// [`write_csv`] into any writer.
pub fn write_csv_to<W: Write>(out: W, records: &[ResultRecord], timing: bool) -> Result<()> {
    let scan = records.iter().any(|r| r.fock_level.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    if scan {
        header.push(FOCK_LEVEL);
    }
    w.write_record(&header)?;
    for r in records {
        let p = &r.params;
        let mut row = vec![
            r.solver.as_str().to_string(),
            format_sig(p.omega),
            format_sig(p.g),
            format_sig(p.temperature),
            format_sig(p.sweep_rate),
            r.fock_dim.to_string(),
            r.p_excited.map(format_sig).unwrap_or_default(),
            format_sig(r.tail),
            format_sig(r.norm_drift),
            r.flag.as_str().to_string(),
            format_sig(if timing { r.wall_s } else { 0.0 }),
        ];
        if scan {
            row.push(r.fock_level.map(|n| n.to_string()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(field: &str, name: &'static str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| invalid(name, format!("`{field}` is not a number")))
}

/// Reads a results file written by [`write_csv`]. Δ is taken as 1 and
/// error texts, which live in the sidecar, are not restored.
pub fn read_csv(path: &Path) -> Result<Vec<ResultRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    let scan = match names.as_slice() {
        [h @ .., last] if h == CSV_HEADER && *last == FOCK_LEVEL => true,
        h if h == CSV_HEADER => false,
        _ => return Err(invalid("csv", format!("unexpected header `{}`", names.join(",")))),
    };
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let f = |i: usize| row.get(i).unwrap_or("");
        let solver: SolverTag = f(0).parse()?;
        let flag: PointFlag = f(9).parse()?;
        out.push(ResultRecord {
            solver,
            params: ModelParams {
                delta: 1.0,
                omega: parse_f64(f(1), "omega")?,
                g: parse_f64(f(2), "g")?,
                temperature: parse_f64(f(3), "temperature")?,
                sweep_rate: parse_f64(f(4), "sweep_rate")?,
            },
            fock_level: match (scan, f(11)) {
                (true, s) if !s.is_empty() => Some(
                    s.parse()
                        .map_err(|_| invalid("fock_level", format!("`{s}` is not a level")))?,
                ),
                _ => None,
            },
            p_excited: match f(6) {
                "" => None,
                s => Some(parse_f64(s, "p_excited")?),
            },
            fock_dim: f(5)
                .parse()
                .map_err(|_| invalid("fock_dim", format!("`{}` is not a count", f(5))))?,
            tail: parse_f64(f(7), "tail")?,
            norm_drift: parse_f64(f(8), "norm_drift")?,
            flag,
            wall_s: parse_f64(f(10), "wall_s")?,
            error: None,
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct Failure<'a> {
    row: usize,
    solver: SolverTag,
    params: &'a ModelParams,
    fock_level: Option<usize>,
    error: &'a str,
}

#[derive(Serialize)]
struct Sidecar<'a, S: Serialize> {
    version: &'static str,
    spec: &'a S,
    controls: &'a NumericalControls,
    records: usize,
    failures: Vec<Failure<'a>>,
}

/// Writes the JSON sidecar: the spec and controls that produced `records`
/// and the error text of every failed row.
pub fn write_sidecar<S: Serialize>(
    path: &Path,
    spec: &S,
    controls: &NumericalControls,
    records: &[ResultRecord],
) -> Result<()> {
    let failures = records
        .iter()
        .enumerate()
        .filter_map(|(row, r)| {
            r.error.as_deref().map(|error| Failure {
                row,
                solver: r.solver,
                params: &r.params,
                fock_level: r.fock_level,
                error,
            })
        })
        .collect();
    let doc = Sidecar {
        version: env!("CARGO_PKG_VERSION"),
        spec,
        controls,
        records: records.len(),
        failures,
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &doc).map_err(Error::from)?;
    writeln!(w)?;
    Ok(())
}
