#![allow(dead_code)]

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;
use qwmem::lattice::{CellKind, DeviceGrid, MaterialParams};
use qwmem::potential::PotentialField;
use qwmem::walk::WalkerState;

/// Draws `n` values from `strategy` with a fixed seed.
pub fn sample<S: Strategy>(strategy: S, n: usize) -> Vec<S::Value> {
    let mut runner = TestRunner::deterministic();
    (0..n)
        .map(|_| strategy.new_tree(&mut runner).expect("strategy yields values").current())
        .collect()
}

pub fn grid_from_mask(nx: usize, ny: usize, mask: &[bool]) -> DeviceGrid {
    let mut g = DeviceGrid::new(nx, ny, MaterialParams::default()).unwrap();
    for (k, &m) in mask.iter().enumerate() {
        if m {
            g.set_kind(k % nx, k / nx + 1, CellKind::MetalIon).unwrap();
        }
    }
    g
}

pub fn random_grid() -> impl Strategy<Value = DeviceGrid> {
    (3usize..14, 3usize..14).prop_flat_map(|(nx, ny)| {
        proptest::collection::vec(proptest::bool::weighted(0.35), nx * (ny - 2))
            .prop_map(move |mask| grid_from_mask(nx, ny, &mask))
    })
}

pub type Dense = Vec<Vec<Complex64>>;

pub fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let mut out = vec![vec![zero(); n]; n];
    for r in 0..n {
        for k in 0..n {
            if a[r][k] == zero() {
                continue;
            }
            for c in 0..n {
                out[r][c] += a[r][k] * b[k][c];
            }
        }
    }
    out
}

/// Explicit one-step operator on the interior rows (electrode rows carry no amplitude).
pub struct DenseWalk {
    pub nx: usize,
    pub ny: usize,
    pub u: Dense,
}

impl DenseWalk {
    pub fn new(phi: &PotentialField, alpha: f64) -> Self {
        let (nx, ny) = (phi.nx(), phi.ny());
        let sites = nx * (ny - 2);
        let n = 4 * sites;
        let idx = |i: usize, j: usize, c: usize| ((j - 1) * nx + i) * 4 + c;

        let h = 1.0 / 2f64.sqrt();
        let h1 = [[h, h], [h, -h]];
        // coin index = 2a + b for the pair of qubits (a, b)
        let mut hh = [[0.0; 4]; 4];
        for (a, ra) in h1.iter().enumerate() {
            for (b, rb) in h1.iter().enumerate() {
                for (a2, &va) in ra.iter().enumerate() {
                    for (b2, &vb) in rb.iter().enumerate() {
                        hh[2 * a + b][2 * a2 + b2] = va * vb;
                    }
                }
            }
        }

        let mut phase = vec![vec![zero(); n]; n];
        let mut coin = vec![vec![zero(); n]; n];
        let mut shift = vec![vec![zero(); n]; n];
        for j in 1..ny - 1 {
            for i in 0..nx {
                let rot = Complex64::from_polar(1.0, alpha * phi.get(i, j));
                for c in 0..4 {
                    phase[idx(i, j, c)][idx(i, j, c)] = rot;
                    for c2 in 0..4 {
                        coin[idx(i, j, c)][idx(i, j, c2)] = Complex64::new(hh[c][c2], 0.0);
                    }
                    // right, left, toward the counter electrode, toward the active one
                    let (di, dj, opposite) = [(1, 0, 1), (-1, 0, 0), (0, 1, 3), (0, -1, 2)][c];
                    let ti = i as isize + di;
                    let tj = j as isize + dj;
                    let inside = ti >= 0 && ti < nx as isize && tj >= 1 && tj <= ny as isize - 2;
                    let dst = if inside {
                        idx(ti as usize, tj as usize, c)
                    } else {
                        idx(i, j, opposite)
                    };
                    shift[dst][idx(i, j, c)] = Complex64::new(1.0, 0.0);
                }
            }
        }
        let u = matmul(&shift, &matmul(&coin, &phase));
        Self { nx, ny, u }
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.u
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn embed(&self, state: &WalkerState) -> Vec<Complex64> {
        state.amplitudes()[4 * self.nx..4 * self.nx * (self.ny - 1)].to_vec()
    }
}

pub fn random_state(nx: usize, ny: usize, raw: &[(f64, f64)]) -> WalkerState {
    let mut amp = vec![zero(); nx * ny * 4];
    let interior = &mut amp[4 * nx..4 * nx * (ny - 1)];
    for (a, &(re, im)) in interior.iter_mut().zip(raw) {
        *a = Complex64::new(re, im);
    }
    let norm: f64 = interior.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in interior.iter_mut() {
        *a /= norm;
    }
    WalkerState::from_amplitudes(nx, ny, amp)
}

