//! Device lattice: the 2D grid of atomic-size cells between the two electrodes.
//!
//! Cells are addressed as `(i, j)` with `i` the column (`0..nx`) and `j` the row
//! counted from the top (`0..ny`). Row `0` is the active electrode, row `ny - 1`
//! the counter electrode; everything in between is the switching dielectric.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("grid dimension too small: {nx}x{ny} (need at least 3x3)")]
    DimensionTooSmall { nx: usize, ny: usize },
    #[error("invalid material parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("cell ({i}, {j}) is outside the {nx}x{ny} grid")]
    OutOfBounds { i: usize, j: usize, nx: usize, ny: usize },
    #[error("cell ({i}, {j}) belongs to an electrode row and cannot change kind")]
    ElectrodeCell { i: usize, j: usize },
    #[error("electrode kind {kind:?} is not allowed in the interior")]
    InteriorElectrode { kind: CellKind },
    #[error("malformed grid snapshot at line {line}: {reason}")]
    Snapshot { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Dielectric,
    MetalIon,
    ActiveElectrode,
    CounterElectrode,
}

impl CellKind {
    pub fn code(self) -> char {
        match self {
            CellKind::Dielectric => 'D',
            CellKind::MetalIon => 'M',
            CellKind::ActiveElectrode => 'A',
            CellKind::CounterElectrode => 'C',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'D' => Some(CellKind::Dielectric),
            'M' => Some(CellKind::MetalIon),
            'A' => Some(CellKind::ActiveElectrode),
            'C' => Some(CellKind::CounterElectrode),
            _ => None,
        }
    }

    pub fn is_electrode(self) -> bool {
        matches!(self, CellKind::ActiveElectrode | CellKind::CounterElectrode)
    }
}

/// Material constants of the dielectric/filament system. Energies in eV, pitch in nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// Dielectric retention (on-site) energy.
    pub eodi_ev: f64,
    /// Metal-ion retention (on-site) energy.
    pub em_ev: f64,
    /// Nearest-neighbour overlap integral.
    pub hopping_ev: f64,
    pub lattice_nm: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            eodi_ev: 10.8,
            em_ev: 7.9,
            hopping_ev: 0.6,
            lattice_nm: 0.3,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<(), LatticeError> {
        let positive = [
            ("eodi_ev", self.eodi_ev),
            ("em_ev", self.em_ev),
            ("hopping_ev", self.hopping_ev),
            ("lattice_nm", self.lattice_nm),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(LatticeError::InvalidParam {
                    name,
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        if self.eodi_ev <= self.em_ev {
            return Err(LatticeError::InvalidParam {
                name: "eodi_ev",
                reason: format!(
                    "dielectric retention energy {} must exceed metal retention energy {}",
                    self.eodi_ev, self.em_ev
                ),
            });
        }
        Ok(())
    }

    pub fn onsite(&self, kind: CellKind) -> f64 {
        match kind {
            CellKind::Dielectric => self.eodi_ev,
            // electrodes are metallic; they only appear as leads in practice
            _ => self.em_ev,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceGrid {
    nx: usize,
    ny: usize,
    cells: Vec<CellKind>,
    params: MaterialParams,
}

impl DeviceGrid {
    /// Fresh device: one electrode row at the top and bottom, all-dielectric interior.
    pub fn new(nx: usize, ny: usize, params: MaterialParams) -> Result<Self, LatticeError> {
        if nx < 3 || ny < 3 {
            return Err(LatticeError::DimensionTooSmall { nx, ny });
        }
        params.validate()?;
        let mut cells = vec![CellKind::Dielectric; nx * ny];
        cells[..nx].fill(CellKind::ActiveElectrode);
        cells[(ny - 1) * nx..].fill(CellKind::CounterElectrode);
        Ok(Self {
            nx,
            ny,
            cells,
            params,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    /// Replaces the material constants; the cell layout is untouched.
    pub fn with_params(mut self, params: MaterialParams) -> Result<Self, LatticeError> {
        params.validate()?;
        self.params = params;
        Ok(self)
    }

    pub fn cells(&self) -> &[CellKind] {
        &self.cells
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn kind(&self, i: usize, j: usize) -> CellKind {
        self.cells[self.index(i, j)]
    }

    pub fn is_interior_row(&self, j: usize) -> bool {
        j > 0 && j + 1 < self.ny
    }

    /// Number of interior (switching) rows.
    pub fn interior_rows(&self) -> usize {
        self.ny - 2
    }

    pub fn interior_cells(&self) -> usize {
        self.nx * self.interior_rows()
    }

    pub fn set_kind(&mut self, i: usize, j: usize, kind: CellKind) -> Result<(), LatticeError> {
        if i >= self.nx || j >= self.ny {
            return Err(LatticeError::OutOfBounds {
                i,
                j,
                nx: self.nx,
                ny: self.ny,
            });
        }
        if !self.is_interior_row(j) {
            return Err(LatticeError::ElectrodeCell { i, j });
        }
        if kind.is_electrode() {
            return Err(LatticeError::InteriorElectrode { kind });
        }
        let idx = self.index(i, j);
        self.cells[idx] = kind;
        Ok(())
    }

    /// Sets an interior cell whose coordinates are already known to be valid.
    pub(crate) fn set_interior_unchecked(&mut self, idx: usize, kind: CellKind) {
        debug_assert!(!kind.is_electrode());
        debug_assert!(idx >= self.nx && idx < (self.ny - 1) * self.nx);
        self.cells[idx] = kind;
    }

    pub fn metal_count(&self) -> usize {
        self.cells
            .iter()
            .filter(|&&k| k == CellKind::MetalIon)
            .count()
    }

    pub fn metal_fraction(&self) -> f64 {
        self.metal_count() as f64 / self.interior_cells() as f64
    }

    /// True iff a 4-connected chain of metal cells joins the row next to the
    /// counter electrode with the row next to the active electrode.
    pub fn filament_connected(&self) -> bool {
        let nx = self.nx;
        let top = 1;
        let bottom = self.ny - 2;
        let mut seen = vec![false; self.cells.len()];
        let mut stack: Vec<usize> = Vec::new();
        for i in 0..nx {
            let idx = self.index(i, bottom);
            if self.cells[idx] == CellKind::MetalIon {
                seen[idx] = true;
                stack.push(idx);
            }
        }
        while let Some(idx) = stack.pop() {
            let (i, j) = (idx % nx, idx / nx);
            if j == top {
                return true;
            }
            let mut visit = |n: usize| {
                if !seen[n] && self.cells[n] == CellKind::MetalIon {
                    seen[n] = true;
                    stack.push(n);
                }
            };
            if i > 0 {
                visit(idx - 1);
            }
            if i + 1 < nx {
                visit(idx + 1);
            }
            if j > top {
                visit(idx - nx);
            }
            if j < bottom {
                visit(idx + nx);
            }
        }
        false
    }

    /// Plain-text snapshot: `nx ny` header, then one line of cell codes per row.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::with_capacity((self.nx + 1) * (self.ny + 1) + 16);
        out.push_str(&format!("{} {}\n", self.nx, self.ny));
        for row in self.cells.chunks(self.nx) {
            out.extend(row.iter().map(|k| k.code()));
            out.push('\n');
        }
        out
    }

    /// Parses a snapshot written by [`DeviceGrid::to_snapshot`].
    pub fn from_snapshot(text: &str, params: MaterialParams) -> Result<Self, LatticeError> {
        let bad = |line: usize, reason: String| LatticeError::Snapshot { line, reason };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad(1, "empty snapshot".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(1, format!("bad header {header:?}: {e}")))?;
        let [nx, ny] = dims[..] else {
            return Err(bad(1, format!("header must be `nx ny`, got {header:?}")));
        };
        let mut grid = Self::new(nx, ny, params)?;
        for j in 0..ny {
            let line_no = j + 2;
            let row = lines
                .next()
                .ok_or_else(|| bad(line_no, format!("expected {ny} rows")))?;
            if row.chars().count() != nx {
                return Err(bad(line_no, format!("expected {nx} cells, got {}", row.len())));
            }
            for (i, c) in row.chars().enumerate() {
                let kind = CellKind::from_code(c)
                    .ok_or_else(|| bad(line_no, format!("unknown cell code {c:?}")))?;
                let expected = grid.kind(i, j);
                if grid.is_interior_row(j) {
                    if kind.is_electrode() {
                        return Err(bad(line_no, format!("electrode code {c:?} in interior")));
                    }
                    grid.set_kind(i, j, kind)?;
                } else if kind != expected {
                    return Err(bad(
                        line_no,
                        format!("electrode row must be {:?}, got {c:?}", expected.code()),
                    ));
                }
            }
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(bad(ny + 2, "trailing content after grid rows".into()));
        }
        Ok(grid)
    }
}

impl fmt::Display for DeviceGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_snapshot())
    }
}

impl FromStr for DeviceGrid {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_snapshot(s, MaterialParams::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, ny: usize) -> DeviceGrid {
        DeviceGrid::new(nx, ny, MaterialParams::default()).unwrap()
    }

    #[test]
    fn smallest_grid_has_one_interior_row() {
        let g = grid(3, 3);
        assert_eq!(g.interior_rows(), 1);
        assert_eq!(g.interior_cells(), 3);
        assert!((0..3).all(|i| g.kind(i, 1) == CellKind::Dielectric));
        assert!((0..3).all(|i| g.kind(i, 0) == CellKind::ActiveElectrode));
        assert!((0..3).all(|i| g.kind(i, 2) == CellKind::CounterElectrode));
    }

    #[test]
    fn reference_grid_interior() {
        let params = MaterialParams {
            eodi_ev: 10.8,
            em_ev: 7.9,
            ..MaterialParams::default()
        };
        let g = DeviceGrid::new(30, 30, params).unwrap();
        assert_eq!(g.interior_rows(), 28);
        assert_eq!(g.interior_cells(), 840);
        let dielectric = g
            .cells()
            .iter()
            .filter(|&&k| k == CellKind::Dielectric)
            .count();
        assert_eq!(dielectric, 840);
    }

    #[test]
    fn too_small_is_rejected() {
        assert_eq!(
            DeviceGrid::new(2, 5, MaterialParams::default()),
            Err(LatticeError::DimensionTooSmall { nx: 2, ny: 5 })
        );
        assert!(DeviceGrid::new(5, 2, MaterialParams::default()).is_err());
    }

    #[test]
    fn params_are_validated() {
        let inverted = MaterialParams {
            eodi_ev: 7.0,
            em_ev: 8.0,
            ..MaterialParams::default()
        };
        assert!(matches!(
            DeviceGrid::new(5, 5, inverted),
            Err(LatticeError::InvalidParam { name: "eodi_ev", .. })
        ));
        let zero_hop = MaterialParams {
            hopping_ev: 0.0,
            ..MaterialParams::default()
        };
        assert!(DeviceGrid::new(5, 5, zero_hop).is_err());
    }

    #[test]
    fn electrode_rows_are_immutable() {
        let mut g = grid(4, 4);
        assert_eq!(
            g.set_kind(1, 0, CellKind::MetalIon),
            Err(LatticeError::ElectrodeCell { i: 1, j: 0 })
        );
        assert!(g.set_kind(1, 3, CellKind::Dielectric).is_err());
        assert!(g.set_kind(1, 1, CellKind::ActiveElectrode).is_err());
        assert!(g.set_kind(9, 1, CellKind::MetalIon).is_err());
    }

    #[test]
    fn connectivity_cases() {
        let mut g = grid(5, 6);
        assert!(!g.filament_connected());
        for j in 1..5 {
            g.set_kind(2, j, CellKind::MetalIon).unwrap();
        }
        assert!(g.filament_connected());
        g.set_kind(2, 3, CellKind::Dielectric).unwrap();
        assert!(!g.filament_connected());
        // detour around the gap
        g.set_kind(3, 2, CellKind::MetalIon).unwrap();
        g.set_kind(3, 3, CellKind::MetalIon).unwrap();
        g.set_kind(3, 4, CellKind::MetalIon).unwrap();
        assert!(g.filament_connected());
    }

    #[test]
    fn diagonal_contact_does_not_connect() {
        let mut g = grid(4, 4);
        g.set_kind(0, 2, CellKind::MetalIon).unwrap();
        g.set_kind(1, 1, CellKind::MetalIon).unwrap();
        assert!(!g.filament_connected());
    }

    #[test]
    fn metal_fraction_counts() {
        // 28 columns x 28 interior rows
        let mut g = grid(28, 30);
        assert_eq!(g.metal_fraction(), 0.0);
        for j in 1..29 {
            g.set_kind(7, j, CellKind::MetalIon).unwrap();
        }
        assert_eq!(g.metal_count(), 28);
        assert_eq!(g.metal_fraction(), 28.0 / 784.0);

        let mut full = grid(6, 5);
        for j in 1..4 {
            for i in 0..6 {
                full.set_kind(i, j, CellKind::MetalIon).unwrap();
            }
        }
        assert_eq!(full.metal_fraction(), 1.0);
    }

    #[test]
    fn snapshot_format() {
        let mut g = grid(3, 4);
        g.set_kind(1, 2, CellKind::MetalIon).unwrap();
        assert_eq!(g.to_snapshot(), "3 4\nAAA\nDDD\nDMD\nCCC\n");
        let back: DeviceGrid = g.to_snapshot().parse().unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn snapshot_errors_name_the_line() {
        let err = DeviceGrid::from_snapshot("3 4\nAAA\nDXD\nDDD\nCCC\n", MaterialParams::default())
            .unwrap_err();
        assert!(matches!(err, LatticeError::Snapshot { line: 3, .. }));
        let err = DeviceGrid::from_snapshot("3 4\nAAA\nDAD\nDDD\nCCC\n", MaterialParams::default())
            .unwrap_err();
        assert!(matches!(err, LatticeError::Snapshot { line: 3, .. }));
        let err = DeviceGrid::from_snapshot("3 4\nADA\nDDD\nDDD\nCCC\n", MaterialParams::default())
            .unwrap_err();
        assert!(matches!(err, LatticeError::Snapshot { line: 2, .. }));
        assert!(DeviceGrid::from_snapshot("3\n", MaterialParams::default()).is_err());
        assert!(DeviceGrid::from_snapshot("3 4\nAAA\nDD\n", MaterialParams::default()).is_err());
    }
}
