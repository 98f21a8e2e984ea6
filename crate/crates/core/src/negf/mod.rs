//! Conductance of the device from its tight-binding Hamiltonian.
//!
//! `G(E) = Trace[Gamma_1 G_D Gamma_2 G_A]` with
//! `G_D = [(E + i eta) I - H - Sigma_1 - Sigma_2]^-1` and `G_A = G_D^dagger`.
//! Transmission is kept dimensionless; the conductance quantum is applied only
//! when a spectrum is reduced to a single conductance.
//!
//! The device matrix is banded (half bandwidth = device width), so every
//! solve goes through a pivoted band LU rather than a dense one.

pub mod banded;
pub mod lead;
pub mod matrix;

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_complex::Complex64;
use thiserror::Error;

use crate::hamiltonian::TightBindingHamiltonian;
use banded::{BandedLu, BandedMatrix};
pub use lead::{lead_self_energy, surface_green, Contact, LeadModel, SelfEnergy};
pub use matrix::CMatrix;

/// `2 q^2 / h` in siemens.
pub const CONDUCTANCE_QUANTUM: f64 = 7.748_091_729_863_649e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NegfError {
    #[error("singular system matrix at pivot {pivot} (resonance with zero broadening?)")]
    Singular { pivot: usize },
    #[error("surface Green's function did not converge at E = {energy} eV after {iterations} iterations")]
    DecimationNotConverged { energy: f64, iterations: usize },
    #[error("invalid NEGF parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("self-energy width {sigma} does not match device width {device}")]
    WidthMismatch { sigma: usize, device: usize },
    #[error("no energy grid points fall inside the window [{lo}, {hi}] eV")]
    EmptyWindow { lo: f64, hi: f64 },
    #[error("empty transmission spectrum")]
    EmptySpectrum,
    #[error("at E = {energy} eV: {source}")]
    AtEnergy {
        energy: f64,
        #[source]
        source: Box<NegfError>,
    },
}

fn check_widths(
    h: &TightBindingHamiltonian,
    s1: &SelfEnergy,
    s2: &SelfEnergy,
) -> Result<(), NegfError> {
    for s in [s1, s2] {
        if s.width() != h.width() {
            return Err(NegfError::WidthMismatch {
                sigma: s.width(),
                device: h.width(),
            });
        }
    }
    Ok(())
}

/// Factorises `(E + i eta) I - H - Sigma_1 - Sigma_2`.
fn factor_system(
    energy: f64,
    h: &TightBindingHamiltonian,
    s1: &SelfEnergy,
    s2: &SelfEnergy,
    eta: f64,
) -> Result<BandedLu, NegfError> {
    check_widths(h, s1, s2)?;
    if !(eta >= 0.0) {
        return Err(NegfError::InvalidParam {
            name: "eta",
            reason: format!("must be >= 0, got {eta}"),
        });
    }
    let (n, w, rows) = (h.n(), h.width(), h.rows());
    let bw = w.max(1);
    let mut a = BandedMatrix::zeros(n, bw, bw);
    let z = Complex64::new(energy, eta);
    for (k, &e) in h.onsite().iter().enumerate() {
        a.set(k, k, z - e);
    }
    let t = Complex64::new(h.hopping(), 0.0);
    for (p, q) in h.bonds() {
        a.set(p, q, t);
        a.set(q, p, t);
    }
    for s in [s1, s2] {
        let off = s.row_offset(rows);
        let block = s.block();
        for r in 0..w {
            for c in 0..w {
                let v = block[(r, c)];
                if v != Complex64::new(0.0, 0.0) {
                    a.add(off + r, off + c, -v);
                }
            }
        }
    }
    a.factor()
}

/// Retarded Green's function as a dense `n x n` matrix.
pub fn retarded_green(
    energy: f64,
    h: &TightBindingHamiltonian,
    s1: &SelfEnergy,
    s2: &SelfEnergy,
    eta: f64,
) -> Result<CMatrix, NegfError> {
    let lu = factor_system(energy, h, s1, s2, eta)?;
    let n = h.n();
    let mut g = CMatrix::zeros(n, n);
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        col.fill(Complex64::new(0.0, 0.0));
        col[c] = Complex64::new(1.0, 0.0);
        lu.solve_from(&mut col, c);
        for r in 0..n {
            g[(r, c)] = col[r];
        }
    }
    Ok(g)
}

/// Advanced Green's function, the conjugate transpose of the retarded one.
pub fn advanced_green(retarded: &CMatrix) -> CMatrix {
    retarded.adjoint()
}

/// Block of `G_D` with rows on contact `rows_of` and columns on contact `cols_of`.
fn green_block(
    lu: &BandedLu,
    h: &TightBindingHamiltonian,
    rows_of: &SelfEnergy,
    cols_of: &SelfEnergy,
) -> CMatrix {
    let (n, w) = (h.n(), h.width());
    let row_off = rows_of.row_offset(h.rows());
    let col_off = cols_of.row_offset(h.rows());
    let mut block = CMatrix::zeros(w, w);
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..w {
        col.fill(Complex64::new(0.0, 0.0));
        col[col_off + c] = Complex64::new(1.0, 0.0);
        lu.solve_from(&mut col, col_off + c);
        for r in 0..w {
            block[(r, c)] = col[row_off + r];
        }
    }
    block
}

/// `Trace[Gamma_1 G_D Gamma_2 G_A]` at one energy (dimensionless transmission).
pub fn conductance_at_energy(
    energy: f64,
    h: &TightBindingHamiltonian,
    s1: &SelfEnergy,
    s2: &SelfEnergy,
    eta: f64,
) -> Result<f64, NegfError> {
    let lu = factor_system(energy, h, s1, s2, eta)?;
    let g12 = green_block(&lu, h, s1, s2);
    let gamma1 = s1.broadening();
    let gamma2 = s2.broadening();
    if gamma1.is_diagonal() && gamma2.is_diagonal() {
        let (d1, d2) = (gamma1.diagonal(), gamma2.diagonal());
        let mut t = 0.0;
        for (r, g1) in d1.iter().enumerate() {
            for (c, g2) in d2.iter().enumerate() {
                t += g1.re * g2.re * g12[(r, c)].norm_sqr();
            }
        }
        return Ok(t);
    }
    let prod = &(&(&gamma1 * &g12) * &gamma2) * &g12.adjoint();
    Ok(prod.trace().re)
}

/// Uniformly spaced energies; a single point sits at `e_min`.
pub fn energy_grid(e_min: f64, e_max: f64, n_energies: usize) -> Vec<f64> {
    match n_energies {
        0 => Vec::new(),
        1 => vec![e_min],
        n => {
            let step = (e_max - e_min) / (n - 1) as f64;
            (0..n).map(|k| e_min + step * k as f64).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionSpectrum {
    pub energies: Vec<f64>,
    pub transmission: Vec<f64>,
}

impl TransmissionSpectrum {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("energy_eV,transmission\n");
        for (e, t) in self.energies.iter().zip(&self.transmission) {
            let _ = writeln!(out, "{e},{t}");
        }
        out
    }
}

/// Transmission at every energy in `energies`, spread over at most `workers`
/// threads. Each energy is evaluated independently and written by index, so
/// the result does not depend on the worker count.
pub fn conductance_spectrum(
    h: &TightBindingHamiltonian,
    leads: &LeadModel,
    energies: &[f64],
    eta: f64,
    workers: usize,
) -> Result<TransmissionSpectrum, NegfError> {
    if energies.is_empty() {
        return Err(NegfError::EmptySpectrum);
    }
    if workers == 0 {
        return Err(NegfError::InvalidParam {
            name: "workers",
            reason: "must be >= 1".into(),
        });
    }
    leads.validate()?;
    let [v_active, v_counter] = h.contact_potential();
    let evaluate = |energy: f64| -> Result<f64, NegfError> {
        let s1 = SelfEnergy::for_contact(leads, Contact::Active, h.width(), energy, v_active)?;
        let s2 = SelfEnergy::for_contact(leads, Contact::Counter, h.width(), energy, v_counter)?;
        conductance_at_energy(energy, h, &s1, &s2, eta)
    };

    let results: Vec<Result<f64, NegfError>> = if workers == 1 || energies.len() == 1 {
        energies.iter().map(|&e| evaluate(e)).collect()
    } else {
        let slots: Mutex<Vec<Option<Result<f64, NegfError>>>> =
            Mutex::new(vec![None; energies.len()]);
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..workers.min(energies.len()) {
                scope.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        let k = next.fetch_add(1, Ordering::Relaxed);
                        if k >= energies.len() {
                            break;
                        }
                        local.push((k, evaluate(energies[k])));
                    }
                    let mut slots = slots.lock().expect("result slots poisoned");
                    for (k, r) in local {
                        slots[k] = Some(r);
                    }
                });
            }
        });
        slots
            .into_inner()
            .expect("result slots poisoned")
            .into_iter()
            .map(|r| r.expect("every energy is evaluated"))
            .collect()
    };

    let mut transmission = Vec::with_capacity(energies.len());
    for (&energy, r) in energies.iter().zip(results) {
        match r {
            Ok(t) => transmission.push(t),
            Err(e) => {
                return Err(NegfError::AtEnergy {
                    energy,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(TransmissionSpectrum {
        energies: energies.to_vec(),
        transmission,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregation {
    /// Mean transmission over `[mu - |v|/2, mu + |v|/2]`.
    MeanWindow,
    /// Landauer bias window with Fermi levels `mu +/- v/2`.
    FermiWindow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregationParams {
    pub mode: Aggregation,
    /// Equilibrium electrode Fermi level (eV).
    pub fermi_level_ev: f64,
    pub kt_ev: f64,
}

impl Default for AggregationParams {
    fn default() -> Self {
        Self {
            mode: Aggregation::FermiWindow,
            fermi_level_ev: 6.6,
            kt_ev: 0.025,
        }
    }
}

pub fn fermi(energy: f64, mu: f64, kt: f64) -> f64 {
    0.5 * (1.0 - ((energy - mu) / (2.0 * kt)).tanh())
}

/// `-df/dE`.
pub fn thermal_window(energy: f64, mu: f64, kt: f64) -> f64 {
    let c = ((energy - mu) / (2.0 * kt)).cosh();
    1.0 / (4.0 * kt * c * c)
}

fn trapezoid(x: &[f64], y: impl Fn(usize) -> f64) -> f64 {
    x.windows(2)
        .enumerate()
        .map(|(k, w)| 0.5 * (w[1] - w[0]) * (y(k) + y(k + 1)))
        .sum()
}

/// Reduces a transmission spectrum to a conductance in siemens at bias `v_applied`.
pub fn aggregate_conductance(
    spectrum: &TransmissionSpectrum,
    params: &AggregationParams,
    v_applied: f64,
) -> Result<f64, NegfError> {
    if spectrum.is_empty() {
        return Err(NegfError::EmptySpectrum);
    }
    let mu = params.fermi_level_ev;
    let g = &spectrum.transmission;
    let e = &spectrum.energies;
    match params.mode {
        Aggregation::MeanWindow => {
            let half = v_applied.abs() / 2.0;
            let (lo, hi) = (mu - half, mu + half);
            let slack = 1e-12 * (1.0 + mu.abs());
            let inside: Vec<f64> = e
                .iter()
                .zip(g)
                .filter(|(&en, _)| en >= lo - slack && en <= hi + slack)
                .map(|(_, &t)| t)
                .collect();
            if inside.is_empty() {
                return Err(NegfError::EmptyWindow { lo, hi });
            }
            Ok(CONDUCTANCE_QUANTUM * inside.iter().sum::<f64>() / inside.len() as f64)
        }
        Aggregation::FermiWindow => {
            if !(params.kt_ev > 0.0) {
                return Err(NegfError::InvalidParam {
                    name: "kt",
                    reason: format!("must be > 0, got {}", params.kt_ev),
                });
            }
            if spectrum.len() == 1 {
                return Ok(CONDUCTANCE_QUANTUM * g[0]);
            }
            let kt = params.kt_ev;
            let integral = if v_applied == 0.0 {
                trapezoid(e, |k| g[k] * thermal_window(e[k], mu, kt))
            } else {
                let (mu1, mu2) = (mu + v_applied / 2.0, mu - v_applied / 2.0);
                trapezoid(e, |k| g[k] * (fermi(e[k], mu1, kt) - fermi(e[k], mu2, kt))) / v_applied
            };
            Ok(CONDUCTANCE_QUANTUM * integral)
        }
    }
}
