//! Slope and peak analyses over result records.

use serde::{Deserialize, Serialize};

use super::ResultRecord;
use crate::error::{Error, Result};

/// Smallest number of temperatures for a slope scan.
const MIN_TEMPERATURES: usize = 5;
/// Smallest number of couplings for a peak search.
const MIN_COUPLINGS: usize = 8;

/// Largest dP/d(k_BT/Δ) over a grid and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeMax {
    pub slope: f64,
    pub g: f64,
    pub temperature: f64,
}

/// Location of the maximum of P(g) on a slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Peak {
    Interior {
        g: f64,
        p_excited: f64,
    },
    /// The maximum sits at the first or last coupling.
    Monotonic,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| close(*a, *b));
    v
}

/// Grid records at ω, excluding Fock-scan records.
fn at_omega(records: &[ResultRecord], omega: f64) -> Vec<&ResultRecord> {
    records
        .iter()
        .filter(|r| r.fock_level.is_none() && close(r.params.omega, omega))
        .collect()
}

/// p on the (g, T) grid, row per g. Fails unless every cell holds exactly
/// one successful record.
fn grid(records: &[&ResultRecord]) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let gs = sorted_unique(records.iter().map(|r| r.params.g).collect());
    let ts = sorted_unique(records.iter().map(|r| r.params.temperature).collect());
    let mut p = vec![vec![None; ts.len()]; gs.len()];
    for r in records {
        let i = gs
            .iter()
            .position(|&g| close(g, r.params.g))
            .expect("g collected above");
        let j = ts
            .iter()
            .position(|&t| close(t, r.params.temperature))
            .expect("T collected above");
        let value = r.p_excited.ok_or_else(|| {
            Error::IncompleteGrid(format!("point g={} T={} failed", r.params.g, r.params.temperature))
        })?;
        if p[i][j].replace(value).is_some() {
            return Err(Error::IncompleteGrid(format!(
                "duplicate records at g={} T={}",
                r.params.g, r.params.temperature
            )));
        }
    }
    let p = p
        .into_iter()
        .zip(&gs)
        .map(|(row, g)| {
            row.into_iter()
                .zip(&ts)
                .map(|(v, t)| v.ok_or_else(|| Error::IncompleteGrid(format!("missing point g={g} T={t}"))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((gs, ts, p))
}

/// Maximum centred-difference slope dP/d(k_BT/Δ) over a complete (g, T)
/// grid at ω. Endpoint temperatures are excluded.
pub fn max_temperature_slope(records: &[ResultRecord], omega: f64) -> Result<SlopeMax> {
    let recs = at_omega(records, omega);
    if recs.is_empty() {
        return Err(Error::IncompleteGrid(format!("no records at omega={omega}")));
    }
    let (gs, ts, p) = grid(&recs)?;
    if ts.len() < MIN_TEMPERATURES {
        return Err(Error::IncompleteGrid(format!(
            "{} temperatures, need at least {MIN_TEMPERATURES}",
            ts.len()
        )));
    }
    let mut best = SlopeMax {
        slope: f64::NEG_INFINITY,
        g: f64::NAN,
        temperature: f64::NAN,
    };
    for (row, &g) in p.iter().zip(&gs) {
        for j in 1..ts.len() - 1 {
            let slope = (row[j + 1] - row[j - 1]) / (ts[j + 1] - ts[j - 1]);
            if slope > best.slope {
                best = SlopeMax {
                    slope,
                    g,
                    temperature: ts[j],
                };
            }
        }
    }
    Ok(best)
}

/// Coupling at the interior maximum of P(g) on the slice (ω, T), or
/// [`Peak::Monotonic`] if the maximum is at either end.
pub fn peak_coupling(records: &[ResultRecord], omega: f64, temperature: f64) -> Result<Peak> {
    let slice: Vec<&ResultRecord> = at_omega(records, omega)
        .into_iter()
        .filter(|r| close(r.params.temperature, temperature))
        .collect();
    let (gs, _, p) = grid(&slice)?;
    if gs.len() < MIN_COUPLINGS {
        return Err(Error::IncompleteGrid(format!(
            "{} couplings at omega={omega} T={temperature}, need at least {MIN_COUPLINGS}",
            gs.len()
        )));
    }
    let values: Vec<f64> = p.iter().map(|row| row[0]).collect();
    let (imax, &pmax) = values.iter().enumerate().fold(
        (0, &f64::NEG_INFINITY),
        |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc },
    );
    if imax == 0 || imax + 1 == values.len() {
        Ok(Peak::Monotonic)
    } else {
        Ok(Peak::Interior {
            g: gs[imax],
            p_excited: pmax,
        })
    }
}
