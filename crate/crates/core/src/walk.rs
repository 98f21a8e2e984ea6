//! Discrete-time quantum walk of the metal ions on the cell lattice.
//!
//! The walker carries a two-qubit coin per site. One evolution step applies the
//! potential phase, the Hadamard-squared coin and the conditional shift, in that
//! order. The coin basis selects the move: `|00>` to `i + 1`, `|01>` to `i - 1`,
//! `|10>` to `j + 1`, `|11>` to `j - 1`. The walker lives on the interior rows;
//! a move that would leave them, or leave the grid sideways, reflects in place
//! with the coin flipped to the opposite direction.

use num_complex::Complex64;
use thiserror::Error;

use crate::lattice::{CellKind, DeviceGrid};
use crate::potential::PotentialField;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WalkError {
    #[error("dimension mismatch: walker is {walker:?}, field is {field:?}")]
    DimensionMismatch {
        walker: (usize, usize),
        field: (usize, usize),
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    /// Positive bias: ions nucleate at the counter electrode and the filament grows.
    Set,
    /// Negative bias: walkers enter from the active-electrode side and dissolve it.
    Reset,
}

pub const COIN_DIM: usize = 4;

/// Coin amplitudes for `|00>, |01>, |10>, |11>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinState(pub [Complex64; COIN_DIM]);

impl CoinState {
    /// `(|00> + i|01> + i|10> - |11>) / 2`, the unbiased starting coin.
    pub fn symmetric() -> Self {
        let h = 0.5;
        Self([
            Complex64::new(h, 0.0),
            Complex64::new(0.0, h),
            Complex64::new(0.0, h),
            Complex64::new(-h, 0.0),
        ])
    }

    pub fn basis(k: usize) -> Self {
        let mut c = [Complex64::new(0.0, 0.0); COIN_DIM];
        c[k] = Complex64::new(1.0, 0.0);
        Self(c)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Applies `H (x) H` to one site's coin in place.
#[inline]
fn hadamard2(c: &mut [Complex64]) {
    let (a, b, cc, d) = (c[0], c[1], c[2], c[3]);
    c[0] = (a + b + cc + d) * 0.5;
    c[1] = (a - b + cc - d) * 0.5;
    c[2] = (a + b - cc - d) * 0.5;
    c[3] = (a - b - cc + d) * 0.5;
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkerState {
    nx: usize,
    ny: usize,
    amp: Vec<Complex64>,
}

impl WalkerState {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            amp: vec![Complex64::new(0.0, 0.0); nx * ny * COIN_DIM],
        }
    }

    /// A walker localised on interior site `(i, j)` with the given coin.
    pub fn localized(nx: usize, ny: usize, i: usize, j: usize, coin: CoinState) -> Self {
        let mut s = Self::zeros(nx, ny);
        s.set_site(i, j, coin);
        s
    }

    /// Starting state for a voltage branch.
    ///
    /// SET: one walker at the centre of the row next to the counter electrode.
    /// RESET: an equal superposition of walkers at the two ends of the row next
    /// to the active electrode.
    pub fn init(grid: &DeviceGrid, polarity: Polarity) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let coin = CoinState::symmetric();
        match polarity {
            Polarity::Set => Self::localized(nx, ny, nx / 2, ny - 2, coin),
            Polarity::Reset => {
                let mut s = Self::zeros(nx, ny);
                let w = std::f64::consts::FRAC_1_SQRT_2;
                let half = CoinState(coin.0.map(|a| a * w));
                s.set_site(0, 1, half);
                s.set_site(nx - 1, 1, half);
                s
            }
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amp
    }

    /// Raw amplitude vector, indexed `((j * nx + i) * 4 + coin)`.
    pub fn from_amplitudes(nx: usize, ny: usize, amp: Vec<Complex64>) -> Self {
        assert_eq!(amp.len(), nx * ny * COIN_DIM, "amplitude vector size mismatch");
        Self { nx, ny, amp }
    }

    pub fn site(&self, i: usize, j: usize) -> CoinState {
        let base = (j * self.nx + i) * COIN_DIM;
        let mut c = [Complex64::new(0.0, 0.0); COIN_DIM];
        c.copy_from_slice(&self.amp[base..base + COIN_DIM]);
        CoinState(c)
    }

    pub fn set_site(&mut self, i: usize, j: usize, coin: CoinState) {
        let base = (j * self.nx + i) * COIN_DIM;
        self.amp[base..base + COIN_DIM].copy_from_slice(&coin.0);
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_field(&self, phi: &PotentialField) -> Result<(), WalkError> {
        if (phi.nx(), phi.ny()) != (self.nx, self.ny) {
            return Err(WalkError::DimensionMismatch {
                walker: (self.nx, self.ny),
                field: (phi.nx(), phi.ny()),
            });
        }
        Ok(())
    }

    /// Coin operator `H (x) H` at every site.
    pub fn coin_step(&mut self) {
        for site in self.amp.chunks_exact_mut(COIN_DIM) {
            hadamard2(site);
        }
    }

    /// Multiplies site `(i, j)` by `exp(i * alpha * phi(i, j))`.
    pub fn phase_step(&mut self, phi: &PotentialField, alpha: f64) -> Result<(), WalkError> {
        self.check_field(phi)?;
        if alpha == 0.0 {
            return Ok(());
        }
        for (site, &v) in self.amp.chunks_exact_mut(COIN_DIM).zip(phi.values()) {
            if v == 0.0 {
                continue;
            }
            let rot = Complex64::from_polar(1.0, alpha * v);
            for a in site {
                *a *= rot;
            }
        }
        Ok(())
    }

    /// Conditional shift with reflecting walls.
    pub fn shift_step(&mut self) {
        let mut next = vec![Complex64::new(0.0, 0.0); self.amp.len()];
        self.shift_into(&mut next);
        self.amp = next;
    }

    fn shift_into(&self, next: &mut [Complex64]) {
        let (nx, ny) = (self.nx, self.ny);
        let at = |i: usize, j: usize, c: usize| (j * nx + i) * COIN_DIM + c;
        for j in 1..ny - 1 {
            for i in 0..nx {
                let src = at(i, j, 0);
                let [right, left, up, down] = [
                    self.amp[src],
                    self.amp[src + 1],
                    self.amp[src + 2],
                    self.amp[src + 3],
                ];
                if i + 1 < nx {
                    next[at(i + 1, j, 0)] = right;
                } else {
                    next[at(i, j, 1)] = right;
                }
                if i > 0 {
                    next[at(i - 1, j, 1)] = left;
                } else {
                    next[at(i, j, 0)] = left;
                }
                if j + 2 < ny {
                    next[at(i, j + 1, 2)] = up;
                } else {
                    next[at(i, j, 3)] = up;
                }
                if j > 1 {
                    next[at(i, j - 1, 3)] = down;
                } else {
                    next[at(i, j, 2)] = down;
                }
            }
        }
    }

    /// `n_steps` applications of shift . coin . phase.
    pub fn evolve(
        &mut self,
        phi: &PotentialField,
        alpha: f64,
        n_steps: usize,
    ) -> Result<(), WalkError> {
        self.check_field(phi)?;
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.amp.len()];
        for _ in 0..n_steps {
            self.phase_step(phi, alpha)?;
            self.coin_step();
            self.shift_into(&mut scratch);
            std::mem::swap(&mut self.amp, &mut scratch);
        }
        Ok(())
    }

    pub fn position_probabilities(&self) -> ProbabilityField {
        let p = self
            .amp
            .chunks_exact(COIN_DIM)
            .map(|site| site.iter().map(|a| a.norm_sqr()).sum())
            .collect();
        ProbabilityField {
            nx: self.nx,
            ny: self.ny,
            p,
        }
    }
}

/// Site occupation probabilities of the walker, row-major like the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityField {
    nx: usize,
    ny: usize,
    p: Vec<f64>,
}

impl ProbabilityField {
    pub fn from_values(nx: usize, ny: usize, p: Vec<f64>) -> Self {
        assert_eq!(p.len(), nx * ny, "probability field size mismatch");
        Self { nx, ny, p }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[j * self.nx + i]
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        crate::potential::field_csv(self.nx, &self.p)
    }
}

/// Threshold occupation rule. Returns the number of cells that changed kind.
///
/// SET turns every interior dielectric cell with `p > theta` into metal; RESET
/// turns every interior metal cell with `p > theta` back into dielectric.
pub fn apply_threshold(
    grid: &mut DeviceGrid,
    probs: &ProbabilityField,
    theta: f64,
    polarity: Polarity,
) -> Result<usize, WalkError> {
    if (probs.nx(), probs.ny()) != (grid.nx(), grid.ny()) {
        return Err(WalkError::DimensionMismatch {
            walker: (probs.nx(), probs.ny()),
            field: (grid.nx(), grid.ny()),
        });
    }
    let (from, to) = match polarity {
        Polarity::Set => (CellKind::Dielectric, CellKind::MetalIon),
        Polarity::Reset => (CellKind::MetalIon, CellKind::Dielectric),
    };
    let nx = grid.nx();
    let interior = nx..(grid.ny() - 1) * nx;
    let flips: Vec<usize> = interior
        .filter(|&idx| grid.cells()[idx] == from && probs.p[idx] > theta)
        .collect();
    for &idx in &flips {
        grid.set_interior_unchecked(idx, to);
    }
    Ok(flips.len())
}

/// Pure form of [`apply_threshold`].
pub fn threshold_update(
    grid: &DeviceGrid,
    probs: &ProbabilityField,
    theta: f64,
    polarity: Polarity,
) -> Result<DeviceGrid, WalkError> {
    let mut next = grid.clone();
    apply_threshold(&mut next, probs, theta, polarity)?;
    Ok(next)
}

/// Default occupation threshold: twice the uniform probability.
pub fn default_theta(nx: usize, ny: usize) -> f64 {
    2.0 / (nx * ny) as f64
}
