//! Operators on the qubit ⊗ truncated-oscillator product space.
//!
//! The basis is qubit-major with |↓⟩ first: index(↓, n) = n and
//! index(↑, m) = N↓ + m. The two sectors may carry different truncations,
//! which the polaron frame exploits.
//!
//! Every operator built here is real in this basis, so matrices store `f64`
//! and act on complex state vectors.

mod displacement;

pub use displacement::{displacement_matrix_element, DisplacementTable};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sprs::{CsMat, TriMat};

use crate::error::{invalid, Result};
use crate::model::{Frame, ModelParams};

/// Eigenvalue of σ_z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Down,
    Up,
}

impl Sector {
    pub fn sigma_z(self) -> f64 {
        match self {
            Sector::Down => -1.0,
            Sector::Up => 1.0,
        }
    }
}

/// Oscillator truncation per qubit sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisLayout {
    pub down: usize,
    pub up: usize,
}

impl BasisLayout {
    pub fn uniform(n_fock: usize) -> Self {
        Self {
            down: n_fock,
            up: n_fock,
        }
    }

    pub fn dim(&self) -> usize {
        self.down + self.up
    }

    pub fn len(&self, sector: Sector) -> usize {
        match sector {
            Sector::Down => self.down,
            Sector::Up => self.up,
        }
    }

    #[inline]
    pub fn index(&self, sector: Sector, n: usize) -> usize {
        match sector {
            Sector::Down => n,
            Sector::Up => self.down + n,
        }
    }

    /// Inverse of [`index`](Self::index).
    pub fn level(&self, i: usize) -> (Sector, usize) {
        if i < self.down {
            (Sector::Down, i)
        } else {
            (Sector::Up, i - self.down)
        }
    }

    pub fn range(&self, sector: Sector) -> std::ops::Range<usize> {
        match sector {
            Sector::Down => 0..self.down,
            Sector::Up => self.down..self.dim(),
        }
    }
}

/// Sparse real operator on the product space.
#[derive(Debug, Clone)]
pub struct ProductOperator {
    matrix: CsMat<f64>,
}

impl ProductOperator {
    fn from_triplets(dim: usize, tri: TriMat<f64>) -> Self {
        debug_assert_eq!(tri.rows(), dim);
        Self { matrix: tri.to_csr() }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut tri = TriMat::new((n, n));
        for (i, &v) in values.iter().enumerate() {
            if v != 0.0 {
                tri.add_triplet(i, i, v);
            }
        }
        Self::from_triplets(n, tri)
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    pub fn matrix(&self) -> &CsMat<f64> {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix.get(row, col).copied().unwrap_or(0.0)
    }

    /// y = A x.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (row, vec) in self.matrix.outer_iterator().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (col, &a) in vec.iter() {
                acc += x[col] * a;
            }
            y[row] = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut d = DMatrix::zeros(n, n);
        for (v, (r, c)) in self.matrix.iter() {
            d[(r, c)] += *v;
        }
        d
    }

    /// max |A − Aᵀ| over stored entries (A is real, so this is the Hermiticity defect).
    pub fn hermiticity_error(&self) -> f64 {
        self.matrix
            .iter()
            .map(|(v, (r, c))| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// Main diagonal as a dense vector.
    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }
}

/// H(t) = static + v·t·drive, with the drive −σ_z/2 kept as a diagonal.
#[derive(Debug, Clone)]
pub struct HamiltonianSplit {
    pub layout: BasisLayout,
    pub frame: Frame,
    pub sweep_rate: f64,
    pub static_part: ProductOperator,
    drive: Vec<f64>,
    static_diag: Vec<f64>,
    // Static part without its diagonal, in raw CSR form for the hot loop.
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl HamiltonianSplit {
    fn new(layout: BasisLayout, frame: Frame, sweep_rate: f64, static_part: ProductOperator) -> Self {
        let dim = layout.dim();
        let mut drive = vec![0.5; dim];
        for d in &mut drive[layout.range(Sector::Up)] {
            *d = -0.5;
        }
        let mut static_diag = vec![0.0; dim];
        let mut indptr = Vec::with_capacity(dim + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (row, vec) in static_part.matrix.outer_iterator().enumerate() {
            for (col, &a) in vec.iter() {
                if col == row {
                    static_diag[row] += a;
                } else {
                    indices.push(col);
                    values.push(a);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            layout,
            frame,
            sweep_rate,
            static_part,
            drive,
            static_diag,
            indptr,
            indices,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// The drive operator −σ_z/2 (multiplied by v·t in H(t)).
    pub fn drive_part(&self) -> ProductOperator {
        ProductOperator::diagonal(&self.drive)
    }

    pub fn drive_diagonal(&self) -> &[f64] {
        &self.drive
    }

    pub fn static_diagonal(&self) -> &[f64] {
        &self.static_diag
    }

    /// Off-diagonal static couplings as (row, col, value), each pair listed both ways.
    pub fn couplings(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |r| self.couplings_of(r))
    }

    /// Off-diagonal static couplings of one row, as (row, col, value).
    pub fn couplings_of(&self, row: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (self.indptr[row]..self.indptr[row + 1]).map(move |k| (row, self.indices[k], self.values[k]))
    }

    /// Nonzero count of H(t) for generic t.
    pub fn nnz(&self) -> usize {
        self.values.len() + self.dim()
    }

    /// Diagonal of H(t).
    pub fn diagonal_at(&self, t: f64) -> Vec<f64> {
        let vt = self.sweep_rate * t;
        self.static_diag
            .iter()
            .zip(&self.drive)
            .map(|(s, d)| s + vt * d)
            .collect()
    }

    /// y = H(t) x.
    pub fn apply_at(&self, t: f64, x: &[Complex64], y: &mut [Complex64]) {
        let vt = self.sweep_rate * t;
        for row in 0..x.len() {
            let mut acc = x[row] * (self.static_diag[row] + vt * self.drive[row]);
            for k in self.indptr[row]..self.indptr[row + 1] {
                acc += x[self.indices[k]] * self.values[k];
            }
            y[row] = acc;
        }
    }

    /// Dense H(t), for oracles and small instances.
    pub fn dense_at(&self, t: f64) -> DMatrix<f64> {
        let mut h = self.static_part.to_dense();
        let vt = self.sweep_rate * t;
        for (i, d) in self.drive.iter().enumerate() {
            h[(i, i)] += vt * d;
        }
        h
    }

    /// Gershgorin bounds on the spectrum of H(t).
    pub fn spectral_bounds(&self, t: f64) -> (f64, f64) {
        let vt = self.sweep_rate * t;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in 0..self.dim() {
            let c = self.static_diag[row] + vt * self.drive[row];
            let r: f64 = self.values[self.indptr[row]..self.indptr[row + 1]]
                .iter()
                .map(|v| v.abs())
                .sum();
            lo = lo.min(c - r);
            hi = hi.max(c + r);
        }
        (lo, hi)
    }
}

/// H(t) = −(vt/2)σ_z − (Δ/2)σ_x + ħω a†a + g σ_z(a + a†) on N Fock
/// levels per sector, in the undisplaced basis.
pub fn build_hamiltonian(params: &ModelParams, n_fock: usize) -> Result<HamiltonianSplit> {
    params.validate()?;
    if n_fock == 0 {
        return Err(invalid("n_fock", "truncation must be at least 1"));
    }
    let layout = BasisLayout::uniform(n_fock);
    let dim = layout.dim();
    let mut tri = TriMat::with_capacity((dim, dim), 8 * n_fock);
    for sector in [Sector::Down, Sector::Up] {
        let s = sector.sigma_z();
        for n in 0..n_fock {
            let i = layout.index(sector, n);
            let e = params.omega * n as f64;
            if e != 0.0 {
                tri.add_triplet(i, i, e);
            }
            if n + 1 < n_fock && params.g != 0.0 {
                let j = layout.index(sector, n + 1);
                let c = s * params.g * ((n + 1) as f64).sqrt();
                tri.add_triplet(i, j, c);
                tri.add_triplet(j, i, c);
            }
        }
    }
    let x = -0.5 * params.delta;
    for n in 0..n_fock {
        let d = layout.index(Sector::Down, n);
        let u = layout.index(Sector::Up, n);
        tri.add_triplet(d, u, x);
        tri.add_triplet(u, d, x);
    }
    let op = ProductOperator::from_triplets(dim, tri);
    Ok(HamiltonianSplit::new(layout, Frame::Bare, params.sweep_rate, op))
}

/// The same Hamiltonian in the polaron frame.
///
/// Sector ↓ uses the levels D(g/ħω)|n⟩ and sector ↑ uses D(−g/ħω)|m⟩, which
/// diagonalise ħω a†a + g σ_z(a + a†) with energies ħω n − g²/ħω. The only
/// off-diagonal terms are the Franck–Condon couplings
/// −(Δ/2)⟨n|D(−2g/ħω)|m⟩ between ↓n and ↑m; those with overlap magnitude
/// below `coupling_floor` are dropped.
pub fn build_polaron_hamiltonian(
    params: &ModelParams,
    layout: BasisLayout,
    coupling_floor: f64,
) -> Result<HamiltonianSplit> {
    params.validate()?;
    if layout.down == 0 || layout.up == 0 {
        return Err(invalid("layout", "each sector needs at least one level"));
    }
    let dim = layout.dim();
    let shift = params.polaron_shift();
    let fc = DisplacementTable::new(-params.equilibrium_separation(), layout.down, layout.up);
    let mut tri = TriMat::new((dim, dim));
    for sector in [Sector::Down, Sector::Up] {
        for n in 0..layout.len(sector) {
            let e = params.omega * n as f64 - shift;
            if e != 0.0 {
                let i = layout.index(sector, n);
                tri.add_triplet(i, i, e);
            }
        }
    }
    let x = -0.5 * params.delta;
    for n in 0..layout.down {
        for (m, &f) in fc.row(n).iter().enumerate() {
            if f.abs() >= coupling_floor {
                let d = layout.index(Sector::Down, n);
                let u = layout.index(Sector::Up, m);
                tri.add_triplet(d, u, x * f);
                tri.add_triplet(u, d, x * f);
            }
        }
    }
    let op = ProductOperator::from_triplets(dim, tri);
    Ok(HamiltonianSplit::new(layout, Frame::Polaron, params.sweep_rate, op))
}

/// Amplitudes on the bare basis with `n_bare` levels per sector, from
/// amplitudes on the polaron basis `layout`.
pub fn polaron_to_bare(params: &ModelParams, layout: BasisLayout, psi: &[Complex64], n_bare: usize) -> Vec<Complex64> {
    let bare = BasisLayout::uniform(n_bare);
    let mut out = vec![Complex64::default(); bare.dim()];
    for sector in [Sector::Down, Sector::Up] {
        let table = sector_displacement(params, sector, n_bare, layout.len(sector));
        let src = &psi[layout.range(sector)];
        for (k, o) in out[bare.range(sector)].iter_mut().enumerate() {
            *o = table.row(k).iter().zip(src).map(|(d, c)| c * *d).sum();
        }
    }
    out
}

/// Inverse of [`polaron_to_bare`], up to truncation.
pub fn bare_to_polaron(params: &ModelParams, n_bare: usize, psi: &[Complex64], layout: BasisLayout) -> Vec<Complex64> {
    let bare = BasisLayout::uniform(n_bare);
    let mut out = vec![Complex64::default(); layout.dim()];
    for sector in [Sector::Down, Sector::Up] {
        let table = sector_displacement(params, sector, n_bare, layout.len(sector));
        let dst = &mut out[layout.range(sector)];
        for (k, c) in psi[bare.range(sector)].iter().enumerate() {
            for (o, d) in dst.iter_mut().zip(table.row(k)) {
                *o += c * *d;
            }
        }
    }
    out
}

// ⟨k|D(−σ_z g/ħω)|n⟩: the polaron levels of `sector` in the bare basis.
fn sector_displacement(params: &ModelParams, sector: Sector, rows: usize, cols: usize) -> DisplacementTable {
    DisplacementTable::new(-sector.sigma_z() * params.polaron_displacement(), rows, cols)
}
