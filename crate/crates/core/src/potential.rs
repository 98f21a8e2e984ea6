//! Electrostatic potential across the dielectric/filament stack.
//!
//! Solves the variable-coefficient Laplace equation `div(sigma grad phi) = 0`
//! on the cell grid. The active electrode row is held at the applied voltage,
//! the counter electrode row at zero, and the side walls carry no normal flux.
//!
//! Faces between two interior cells use the harmonic mean of their
//! conductivities; a face to an electrode uses the interior cell's own
//! conductivity, as for a Dirichlet node one pitch away. The five-point system
//! is solved either exactly by banded Cholesky or by successive
//! over-relaxation.

use std::fmt::Write as _;

use thiserror::Error;

use crate::lattice::{CellKind, DeviceGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("invalid solver parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("potential solve did not converge after {iterations} iterations (residual {residual:.3e} V, target {target:.3e} V)")]
    NotConverged {
        iterations: usize,
        residual: f64,
        target: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    /// Banded Cholesky factorisation of the five-point system.
    Direct,
    /// Successive over-relaxation, stopped at `tol` or `max_iterations`.
    Sor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub method: SolverMethod,
    /// Conductivity of metal and electrode cells relative to the dielectric.
    pub sigma_ratio: f64,
    pub omega: f64,
    /// Relative residual target; the absolute target is `tol * |v_applied|`
    /// (or `tol` itself at zero bias).
    pub tol: f64,
    /// Iteration cap; `None` means `100 * nx * ny`.
    pub max_iterations: Option<usize>,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            method: SolverMethod::Direct,
            sigma_ratio: 1e4,
            omega: 1.8,
            tol: 1e-8,
            max_iterations: None,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), PotentialError> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(PotentialError::InvalidParam {
                name: "tol",
                reason: format!("must be > 0, got {}", self.tol),
            });
        }
        if !(self.sigma_ratio.is_finite() && self.sigma_ratio > 0.0) {
            return Err(PotentialError::InvalidParam {
                name: "sigma_ratio",
                reason: format!("must be > 0, got {}", self.sigma_ratio),
            });
        }
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(PotentialError::InvalidParam {
                name: "omega",
                reason: format!("must lie in (0, 2), got {}", self.omega),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    nx: usize,
    ny: usize,
    v_applied: f64,
    phi: Vec<f64>,
    residual: f64,
    iterations: usize,
}

impl PotentialField {
    /// Zero potential everywhere, as for an unbiased device.
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            v_applied: 0.0,
            phi: vec![0.0; nx * ny],
            residual: 0.0,
            iterations: 0,
        }
    }

    /// Wraps an explicit row-major field (`phi[j * nx + i]`).
    pub fn from_values(nx: usize, ny: usize, v_applied: f64, phi: Vec<f64>) -> Self {
        assert_eq!(phi.len(), nx * ny, "potential field size mismatch");
        Self {
            nx,
            ny,
            v_applied,
            phi,
            residual: 0.0,
            iterations: 0,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn v_applied(&self) -> f64 {
        self.v_applied
    }

    pub fn values(&self) -> &[f64] {
        &self.phi
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.phi[j * self.nx + i]
    }

    /// Max-norm of the normalised residual at exit, in volts.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn min(&self) -> f64 {
        self.phi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_csv(&self) -> String {
        field_csv(self.nx, &self.phi)
    }
}

/// One line per row, values with 9 significant digits.
pub(crate) fn field_csv(nx: usize, values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 17);
    for row in values.chunks(nx) {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:.8e}");
        }
        out.push('\n');
    }
    out
}

// Face conductance between two cells: harmonic mean of the cell conductivities.
fn face(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Stencil weights for every interior cell: west, east, north, south.
struct Stencil {
    weights: Vec<[f64; 4]>,
    inv_total: Vec<f64>,
}

impl Stencil {
    fn new(grid: &DeviceGrid, sigma_ratio: f64) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let sigma = |i: usize, j: usize| match grid.kind(i, j) {
            CellKind::Dielectric => 1.0,
            _ => sigma_ratio,
        };
        let mut weights = Vec::with_capacity(nx * (ny - 2));
        let mut inv_total = Vec::with_capacity(nx * (ny - 2));
        for j in 1..ny - 1 {
            for i in 0..nx {
                let s = sigma(i, j);
                let west = if i > 0 { face(s, sigma(i - 1, j)) } else { 0.0 };
                let east = if i + 1 < nx { face(s, sigma(i + 1, j)) } else { 0.0 };
                let north = if j > 1 { face(s, sigma(i, j - 1)) } else { s };
                let south = if j + 2 < ny { face(s, sigma(i, j + 1)) } else { s };
                weights.push([west, east, north, south]);
                inv_total.push(1.0 / (west + east + north + south));
            }
        }
        Self { weights, inv_total }
    }
}

/// Solves for the potential at the given bias.
///
/// The result is clipped to `[min(0, v), max(0, v)]`, which only removes
/// round-off (or, for SOR, over-relaxation overshoot).
pub fn solve_potential(
    grid: &DeviceGrid,
    v_applied: f64,
    params: &SolverParams,
) -> Result<PotentialField, PotentialError> {
    params.validate()?;
    let (nx, ny) = (grid.nx(), grid.ny());
    if v_applied == 0.0 {
        return Ok(PotentialField::zeros(nx, ny));
    }

    // Parallel-plate profile: the SOR starting point, and the boundary rows.
    let mut phi = vec![0.0; nx * ny];
    for j in 0..ny {
        let value = v_applied * (ny - 1 - j) as f64 / (ny - 1) as f64;
        phi[j * nx..(j + 1) * nx].fill(value);
    }
    phi[..nx].fill(v_applied);
    phi[(ny - 1) * nx..].fill(0.0);

    let stencil = Stencil::new(grid, params.sigma_ratio);
    let target = params.tol * v_applied.abs();
    let iterations = match params.method {
        SolverMethod::Direct => {
            solve_direct(&mut phi, nx, ny, &stencil);
            0
        }
        SolverMethod::Sor => sor(&mut phi, nx, ny, &stencil, params, target)?,
    };
    let (lo, hi) = (v_applied.min(0.0), v_applied.max(0.0));
    for v in &mut phi[nx..(ny - 1) * nx] {
        *v = v.clamp(lo, hi);
    }
    let residual = max_residual(&phi, nx, ny, &stencil);
    if residual > target {
        return Err(PotentialError::NotConverged {
            iterations,
            residual,
            target,
        });
    }
    Ok(PotentialField {
        nx,
        ny,
        v_applied,
        phi,
        residual,
        iterations,
    })
}

fn sor(
    phi: &mut [f64],
    nx: usize,
    ny: usize,
    stencil: &Stencil,
    params: &SolverParams,
    target: f64,
) -> Result<usize, PotentialError> {
    let max_iterations = params.max_iterations.unwrap_or(100 * nx * ny);
    let omega = params.omega;
    let mut residual = max_residual(phi, nx, ny, stencil);
    let mut iterations = 0;
    while residual > target {
        if iterations >= max_iterations {
            return Err(PotentialError::NotConverged {
                iterations,
                residual,
                target,
            });
        }
        for j in 1..ny - 1 {
            for i in 0..nx {
                let k = (j - 1) * nx + i;
                let idx = j * nx + i;
                let relaxed = relaxed_value(phi, idx, i, nx, &stencil.weights[k]) * stencil.inv_total[k];
                phi[idx] += omega * (relaxed - phi[idx]);
            }
        }
        iterations += 1;
        if iterations % 8 == 0 || iterations >= max_iterations {
            residual = max_residual(phi, nx, ny, stencil);
        }
    }
    Ok(iterations)
}

/// Exact solve of the interior system by banded Cholesky (half bandwidth `nx`).
fn solve_direct(phi: &mut [f64], nx: usize, ny: usize, stencil: &Stencil) {
    let n = nx * (ny - 2);
    let b = nx;
    let w = b + 1;
    // lower band, entry (k, m) for k - b <= m <= k at k * w + (m + b - k)
    let mut l = vec![0.0; n * w];
    let at = |k: usize, m: usize| k * w + (m + b - k);
    let mut rhs = vec![0.0; n];
    for k in 0..n {
        let [west, _, north, south] = stencil.weights[k];
        l[at(k, k)] = 1.0 / stencil.inv_total[k];
        if k % nx > 0 {
            l[at(k, k - 1)] = -west;
        }
        if k >= nx {
            l[at(k, k - nx)] = -north;
        }
        let (i, j) = (k % nx, k / nx + 1);
        if j == 1 {
            rhs[k] += north * phi[i];
        }
        if j == ny - 2 {
            rhs[k] += south * phi[(ny - 1) * nx + i];
        }
    }
    for k in 0..n {
        let start = k.saturating_sub(b);
        for m in start..=k {
            let mut s = l[at(k, m)];
            for p in start.max(m.saturating_sub(b))..m {
                s -= l[at(k, p)] * l[at(m, p)];
            }
            l[at(k, m)] = if m == k { s.sqrt() } else { s / l[at(m, m)] };
        }
    }
    for k in 0..n {
        let mut s = rhs[k];
        for m in k.saturating_sub(b)..k {
            s -= l[at(k, m)] * rhs[m];
        }
        rhs[k] = s / l[at(k, k)];
    }
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for m in k + 1..(k + b + 1).min(n) {
            s -= l[at(m, k)] * rhs[m];
        }
        rhs[k] = s / l[at(k, k)];
    }
    phi[nx..(ny - 1) * nx].copy_from_slice(&rhs);
}

#[inline]
fn relaxed_value(phi: &[f64], idx: usize, i: usize, nx: usize, w: &[f64; 4]) -> f64 {
    let west = if i > 0 { w[0] * phi[idx - 1] } else { 0.0 };
    let east = if i + 1 < nx { w[1] * phi[idx + 1] } else { 0.0 };
    west + east + w[2] * phi[idx - nx] + w[3] * phi[idx + nx]
}

fn max_residual(phi: &[f64], nx: usize, ny: usize, stencil: &Stencil) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 1..ny - 1 {
        for i in 0..nx {
            let k = (j - 1) * nx + i;
            let idx = j * nx + i;
            let r = relaxed_value(phi, idx, i, nx, &stencil.weights[k]) * stencil.inv_total[k] - phi[idx];
            worst = worst.max(r.abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::MaterialParams;

    fn grid(nx: usize, ny: usize) -> DeviceGrid {
        DeviceGrid::new(nx, ny, MaterialParams::default()).unwrap()
    }

    #[test]
    fn zero_bias_is_zero_field() {
        let mut g = grid(8, 8);
        g.set_kind(3, 4, CellKind::MetalIon).unwrap();
        let field = solve_potential(&g, 0.0, &SolverParams::default()).unwrap();
        assert!(field.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn electrode_rows_hold_boundary_values() {
        let mut g = grid(6, 7);
        g.set_kind(2, 3, CellKind::MetalIon).unwrap();
        let field = solve_potential(&g, -1.3, &SolverParams::default()).unwrap();
        for i in 0..6 {
            assert_eq!(field.get(i, 0), -1.3);
            assert_eq!(field.get(i, 6), 0.0);
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let params = SolverParams {
            tol: 0.0,
            ..SolverParams::default()
        };
        assert!(matches!(
            solve_potential(&grid(4, 4), 1.0, &params),
            Err(PotentialError::InvalidParam { name: "tol", .. })
        ));
    }

    #[test]
    fn iteration_budget_is_enforced() {
        let mut g = grid(10, 10);
        for j in 1..6 {
            g.set_kind(4, j, CellKind::MetalIon).unwrap();
        }
        let params = SolverParams {
            method: SolverMethod::Sor,
            max_iterations: Some(2),
            ..SolverParams::default()
        };
        assert!(matches!(
            solve_potential(&g, 1.0, &params),
            Err(PotentialError::NotConverged { .. })
        ));
    }

    #[test]
    fn direct_and_sor_agree() {
        let mut g = grid(9, 11);
        for (i, j) in [(2, 3), (2, 4), (3, 4), (6, 8), (6, 9), (7, 2)] {
            g.set_kind(i, j, CellKind::MetalIon).unwrap();
        }
        let direct = solve_potential(&g, 2.0, &SolverParams::default()).unwrap();
        let sor = SolverParams {
            method: SolverMethod::Sor,
            tol: 1e-12,
            sigma_ratio: 10.0,
            ..SolverParams::default()
        };
        let direct10 = solve_potential(&g, 2.0, &SolverParams { sigma_ratio: 10.0, ..SolverParams::default() }).unwrap();
        let iterative = solve_potential(&g, 2.0, &sor).unwrap();
        for (a, b) in direct10.values().iter().zip(iterative.values()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert!(iterative.iterations() > 0);
        assert_eq!(direct.iterations(), 0);
        assert!(direct.residual() <= 1e-8 * 2.0);
    }

    #[test]
    fn csv_layout() {
        let field = PotentialField::from_values(2, 3, 1.0, vec![1.0, 1.0, 0.5, 0.25, 0.0, 0.0]);
        let csv = field.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "5.00000000e-1,2.50000000e-1");
    }
}
