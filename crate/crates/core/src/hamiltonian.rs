//! Single-particle tight-binding Hamiltonian of the dielectric/filament region.
//!
//! Only interior rows enter the device matrix; the electrode rows are
//! represented by lead self-energies. Device sites are numbered row-major over
//! the interior, `(j - 1) * nx + i`, so the matrix is banded with half
//! bandwidth `nx`.

use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::lattice::DeviceGrid;
use crate::potential::PotentialField;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HamiltonianError {
    #[error("dimension mismatch: grid is {grid:?}, potential is {field:?}")]
    DimensionMismatch {
        grid: (usize, usize),
        field: (usize, usize),
    },
    #[error("invalid Hamiltonian: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightBindingHamiltonian {
    width: usize,
    rows: usize,
    onsite: Vec<f64>,
    hopping: f64,
    contact_potential: [f64; 2],
}

impl TightBindingHamiltonian {
    /// Hamiltonian of a `width x rows` strip with the given on-site energies
    /// (row-major) and uniform hopping `-hopping` between 4-neighbours.
    pub fn from_onsite(
        width: usize,
        rows: usize,
        onsite: Vec<f64>,
        hopping: f64,
    ) -> Result<Self, HamiltonianError> {
        if width == 0 || rows == 0 {
            return Err(HamiltonianError::Invalid(format!(
                "empty device {width}x{rows}"
            )));
        }
        if onsite.len() != width * rows {
            return Err(HamiltonianError::Invalid(format!(
                "expected {} on-site energies, got {}",
                width * rows,
                onsite.len()
            )));
        }
        Ok(Self {
            width,
            rows,
            onsite,
            hopping,
            contact_potential: [0.0, 0.0],
        })
    }

    /// Electrostatic potential of the (active, counter) electrodes, in eV.
    pub fn with_contact_potential(mut self, active: f64, counter: f64) -> Self {
        self.contact_potential = [active, counter];
        self
    }

    /// Number of device sites.
    pub fn n(&self) -> usize {
        self.width * self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn hopping(&self) -> f64 {
        self.hopping
    }

    pub fn onsite(&self) -> &[f64] {
        &self.onsite
    }

    pub fn contact_potential(&self) -> [f64; 2] {
        self.contact_potential
    }

    pub fn site_index(&self, i: usize, row: usize) -> usize {
        row * self.width + i
    }

    /// Inverse of [`site_index`](Self::site_index).
    pub fn site_coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    /// Upper-triangle neighbour pairs `(a, b)` with `a < b`.
    pub fn bonds(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        (0..self.n()).flat_map(move |a| {
            let right = (a % w + 1 < w).then_some((a, a + 1));
            let below = (a + w < self.n()).then_some((a, a + w));
            right.into_iter().chain(below)
        })
    }

    /// All nonzero entries as `(row, col, value)`, row-major.
    pub fn entries(&self) -> Vec<(usize, usize, Complex64)> {
        let mut out = Vec::with_capacity(self.n() * 5);
        for (a, &e) in self.onsite.iter().enumerate() {
            out.push((a, a, Complex64::new(e, 0.0)));
        }
        let t = Complex64::new(-self.hopping, 0.0);
        for (a, b) in self.bonds() {
            out.push((a, b, t));
            out.push((b, a, t));
        }
        out.sort_by_key(|&(r, c, _)| (r, c));
        out
    }

    /// Dense row-major copy, `n * n` entries.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let n = self.n();
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for (r, c, v) in self.entries() {
            m[r * n + c] = v;
        }
        m
    }

    /// Coordinate text dump: `row col real imag` per nonzero.
    pub fn to_coordinate_text(&self) -> String {
        let mut out = String::new();
        for (r, c, v) in self.entries() {
            let _ = writeln!(out, "{r} {c} {} {}", v.re, v.im);
        }
        out
    }

    pub fn onsite_range(&self) -> (f64, f64) {
        self.onsite
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
                (lo.min(e), hi.max(e))
            })
    }
}

/// Builds the device Hamiltonian from the cell layout and the potential.
///
/// Diagonal: retention energy of the cell kind plus `phi` (volts map 1:1 to eV).
pub fn build_hamiltonian(
    grid: &DeviceGrid,
    phi: &PotentialField,
) -> Result<TightBindingHamiltonian, HamiltonianError> {
    let (nx, ny) = (grid.nx(), grid.ny());
    if (phi.nx(), phi.ny()) != (nx, ny) {
        return Err(HamiltonianError::DimensionMismatch {
            grid: (nx, ny),
            field: (phi.nx(), phi.ny()),
        });
    }
    let params = grid.params();
    let onsite: Vec<f64> = (1..ny - 1)
        .flat_map(|j| (0..nx).map(move |i| (i, j)))
        .map(|(i, j)| params.onsite(grid.kind(i, j)) + phi.get(i, j))
        .collect();
    let h = TightBindingHamiltonian::from_onsite(nx, ny - 2, onsite, params.hopping_ev)?;
    Ok(h.with_contact_potential(phi.get(0, 0), phi.get(0, ny - 1)))
}
