//! Contact self-energies.
//!
//! Each electrode couples to the device row next to it. In the wide-band limit
//! the coupling is a constant imaginary on-site term; in the semi-infinite mode
//! the electrode is continued as a uniform lattice strip of the device width
//! and its surface Green's function is found by Sancho-Rubio decimation.

use num_complex::Complex64;

use super::matrix::CMatrix;
use super::NegfError;
use crate::lattice::{DeviceGrid, MaterialParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Contact {
    Active,
    Counter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeadModel {
    /// Energy-independent broadening `gamma` (eV) on every contact-row site.
    WideBand { gamma: f64 },
    /// Semi-infinite strip with on-site `onsite_ev` and hopping `-hopping_ev`.
    /// `eta_ev` is the small imaginary part used inside the decimation.
    SemiInfinite {
        onsite_ev: f64,
        hopping_ev: f64,
        eta_ev: f64,
    },
}

impl Default for LeadModel {
    fn default() -> Self {
        LeadModel::WideBand { gamma: 1.0 }
    }
}

impl LeadModel {
    /// Metallic leads matching the material's metal on-site energy and hopping.
    pub fn semi_infinite_for(params: &MaterialParams) -> Self {
        LeadModel::SemiInfinite {
            onsite_ev: params.em_ev,
            hopping_ev: params.hopping_ev,
            eta_ev: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<(), NegfError> {
        let bad = |name: &'static str, v: f64| NegfError::InvalidParam {
            name,
            reason: format!("must be > 0, got {v}"),
        };
        match *self {
            LeadModel::WideBand { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(bad("gamma", gamma))
            }
            LeadModel::SemiInfinite {
                hopping_ev, eta_ev, ..
            } => {
                if !(hopping_ev > 0.0) {
                    Err(bad("hopping", hopping_ev))
                } else if !(eta_ev > 0.0) {
                    Err(bad("lead eta", eta_ev))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Self-energy of one contact, restricted to the `width` sites of the device
/// row adjacent to that contact.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfEnergy {
    contact: Contact,
    block: CMatrix,
}

impl SelfEnergy {
    pub fn new(contact: Contact, block: CMatrix) -> Self {
        assert_eq!(block.rows(), block.cols(), "self-energy block must be square");
        Self { contact, block }
    }

    pub fn wide_band(contact: Contact, width: usize, gamma: f64) -> Self {
        let diag = vec![Complex64::new(0.0, -gamma / 2.0); width];
        Self::new(contact, CMatrix::from_diagonal(&diag))
    }

    /// `potential_ev` shifts the lead's on-site energy (semi-infinite mode only).
    pub fn for_contact(
        model: &LeadModel,
        contact: Contact,
        width: usize,
        energy: f64,
        potential_ev: f64,
    ) -> Result<Self, NegfError> {
        match *model {
            LeadModel::WideBand { gamma } => Ok(Self::wide_band(contact, width, gamma)),
            LeadModel::SemiInfinite {
                onsite_ev,
                hopping_ev,
                eta_ev,
            } => {
                let g = surface_green(width, onsite_ev + potential_ev, hopping_ev, energy, eta_ev)?;
                let t2 = Complex64::new(hopping_ev * hopping_ev, 0.0);
                Ok(Self::new(contact, g.scale(t2)))
            }
        }
    }

    pub fn contact(&self) -> Contact {
        self.contact
    }

    pub fn width(&self) -> usize {
        self.block.rows()
    }

    pub fn block(&self) -> &CMatrix {
        &self.block
    }

    /// `Gamma = i (Sigma - Sigma^dagger)`.
    pub fn broadening(&self) -> CMatrix {
        (&self.block - &self.block.adjoint()).scale(Complex64::new(0.0, 1.0))
    }

    /// Embeds the block into an `n x n` device matrix with `rows` device rows.
    pub fn to_dense(&self, rows: usize) -> CMatrix {
        let w = self.width();
        let offset = self.row_offset(rows);
        let mut m = CMatrix::zeros(w * rows, w * rows);
        for r in 0..w {
            for c in 0..w {
                m[(offset + r, offset + c)] = self.block[(r, c)];
            }
        }
        m
    }

    /// Index of the first device site touching this contact.
    pub fn row_offset(&self, rows: usize) -> usize {
        match self.contact {
            Contact::Active => 0,
            Contact::Counter => (rows - 1) * self.width(),
        }
    }
}

/// Self-energy of `contact` for the given grid at energy `energy`.
pub fn lead_self_energy(
    grid: &DeviceGrid,
    contact: Contact,
    energy: f64,
    model: &LeadModel,
) -> Result<SelfEnergy, NegfError> {
    model.validate()?;
    SelfEnergy::for_contact(model, contact, grid.nx(), energy, 0.0)
}

const DECIMATION_TOL: f64 = 1e-10;
const DECIMATION_MAX_ITER: usize = 200;
const POLISH_STEPS: usize = 8;

/// Surface Green's function of a semi-infinite chain with on-site `onsite`
/// and hopping `-hopping`, by Sancho-Rubio decimation.
///
/// Near the band centre with a tiny `eta` the decimated energies grow like
/// `1/eta` and lose digits, so the result is refined with Newton steps on
/// `t^2 g^2 - (z - e0) g + 1 = 0`. Decimation selects the retarded root.
pub fn surface_green_chain(
    onsite: f64,
    hopping: f64,
    energy: f64,
    eta: f64,
) -> Result<Complex64, NegfError> {
    let z = Complex64::new(energy, eta);
    let (mut eps_s, mut eps_b) = (Complex64::new(onsite, 0.0), Complex64::new(onsite, 0.0));
    let (mut alpha, mut beta) = (Complex64::new(-hopping, 0.0), Complex64::new(-hopping, 0.0));
    let mut converged = false;
    for _ in 0..DECIMATION_MAX_ITER {
        let g = (z - eps_b).inv();
        let (ag, bg) = (alpha * g, beta * g);
        eps_s += ag * beta;
        eps_b += ag * beta + bg * alpha;
        alpha *= ag;
        beta *= bg;
        if alpha.norm() < DECIMATION_TOL && beta.norm() < DECIMATION_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(NegfError::DecimationNotConverged {
            energy,
            iterations: DECIMATION_MAX_ITER,
        });
    }
    let mut g = (z - eps_s).inv();
    let t2 = hopping * hopping;
    let b = z - onsite;
    for _ in 0..POLISH_STEPS {
        let slope = 2.0 * t2 * g - b;
        if slope.norm() == 0.0 {
            break;
        }
        let step = (t2 * g * g - b * g + 1.0) / slope;
        g -= step;
        if step.norm() <= f64::EPSILON * g.norm() {
            break;
        }
    }
    if g.im > 0.0 {
        // Newton wandered to the advanced root (only possible at a band edge)
        g = g.conj();
    }
    Ok(g)
}

/// Surface Green's function of a semi-infinite strip of `width` sites per
/// layer with open side edges and hopping `-hopping` within and between layers.
///
/// The layer Hamiltonian is diagonal in the transverse sine modes and the
/// inter-layer coupling is proportional to the identity, so each mode is an
/// independent chain.
pub fn surface_green(
    width: usize,
    onsite: f64,
    hopping: f64,
    energy: f64,
    eta: f64,
) -> Result<CMatrix, NegfError> {
    use std::f64::consts::PI;
    let norm = (2.0 / (width + 1) as f64).sqrt();
    let mode = |m: usize, i: usize| norm * (PI * ((m + 1) * (i + 1)) as f64 / (width + 1) as f64).sin();
    let g_modes = (0..width)
        .map(|m| {
            let e_m = onsite - 2.0 * hopping * (PI * (m + 1) as f64 / (width + 1) as f64).cos();
            surface_green_chain(e_m, hopping, energy, eta)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut g = CMatrix::zeros(width, width);
    for (m, &gm) in g_modes.iter().enumerate() {
        for r in 0..width {
            let ur = mode(m, r) * gm;
            for c in 0..width {
                g[(r, c)] += ur * mode(m, c);
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wide_band_diagonal() {
        let s = SelfEnergy::wide_band(Contact::Active, 30, 1.0);
        assert!(s.block().is_diagonal());
        assert!(s
            .block()
            .diagonal()
            .iter()
            .all(|&v| v == Complex64::new(0.0, -0.5)));
        let gamma = s.broadening();
        assert!(gamma.diagonal().iter().all(|&v| (v - 1.0).norm() < 1e-15));
    }

    #[test]
    fn hermitian_self_energy_has_no_broadening() {
        let block = CMatrix::from_row_major(
            2,
            2,
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.5, 0.25),
                Complex64::new(0.5, -0.25),
                Complex64::new(-2.0, 0.0),
            ],
        );
        let s = SelfEnergy::new(Contact::Counter, block);
        assert_eq!(s.broadening().max_abs(), 0.0);
    }

    #[test]
    fn grid_self_energy_uses_grid_width() {
        let grid = DeviceGrid::new(30, 6, MaterialParams::default()).unwrap();
        let s = lead_self_energy(&grid, Contact::Counter, 8.0, &LeadModel::WideBand { gamma: 1.0 }).unwrap();
        assert_eq!(s.width(), 30);
        assert_eq!(s.row_offset(4), 90);
        assert!(lead_self_energy(&grid, Contact::Active, 8.0, &LeadModel::WideBand { gamma: 0.0 }).is_err());
    }

    #[test]
    fn one_dimensional_lead_matches_closed_form() {
        // hopping -t, E - e0 = -2 t cos(ka)  =>  Sigma = -t exp(ika)
        let (t, e0) = (1.3, 0.4);
        for ka in [0.3, 1.0, std::f64::consts::FRAC_PI_2, 2.2, 2.8] {
            let energy = e0 - 2.0 * t * f64::cos(ka);
            let s = SelfEnergy::for_contact(
                &LeadModel::SemiInfinite {
                    onsite_ev: e0,
                    hopping_ev: t,
                    eta_ev: 1e-9,
                },
                Contact::Active,
                1,
                energy,
                0.0,
            )
            .unwrap();
            let exact = -t * Complex64::from_polar(1.0, ka);
            let got = s.block()[(0, 0)];
            assert!((got - exact).norm() < 1e-7, "ka={ka}: {got} vs {exact}");
            assert!((got.im + t * ka.sin()).abs() < 1e-7);
        }
    }

    #[test]
    fn outside_band_lead_is_real() {
        let s = surface_green(1, 0.0, 1.0, 3.0, 1e-9).unwrap();
        // g = (E - sqrt(E^2 - 4 t^2)) / (2 t^2) for E > 2t
        let exact = (3.0 - (9.0f64 - 4.0).sqrt()) / 2.0;
        assert!((s[(0, 0)].re - exact).abs() < 1e-9);
        assert!(s[(0, 0)].im.abs() < 1e-8);
    }

    // direct matrix Sancho-Rubio on the whole strip, away from the band centre
    fn matrix_decimation(width: usize, onsite: f64, t: f64, energy: f64, eta: f64) -> CMatrix {
        let z = Complex64::new(energy, eta);
        let layer = CMatrix::from_fn(width, width, |r, c| match r.abs_diff(c) {
            0 => Complex64::new(onsite, 0.0),
            1 => Complex64::new(-t, 0.0),
            _ => Complex64::new(0.0, 0.0),
        });
        let zi = CMatrix::identity(width).scale(z);
        let (mut es, mut eb) = (layer.clone(), layer);
        let mut a = CMatrix::identity(width).scale(Complex64::new(-t, 0.0));
        let mut b = a.clone();
        for _ in 0..300 {
            let g = (&zi - &eb).inverse().unwrap();
            let (ag, bg) = (&a * &g, &b * &g);
            let (agb, bga) = (&ag * &b, &bg * &a);
            es = &es + &agb;
            eb = &(&eb + &agb) + &bga;
            a = &ag * &a;
            b = &bg * &b;
            if a.max_abs() < 1e-12 && b.max_abs() < 1e-12 {
                break;
            }
        }
        (&zi - &es).inverse().unwrap()
    }

    #[test]
    fn mode_decomposition_matches_matrix_decimation() {
        for energy in [-2.3, -0.7, 1.9, 3.5] {
            let fast = surface_green(5, 0.2, 1.0, energy, 1e-3).unwrap();
            let slow = matrix_decimation(5, 0.2, 1.0, energy, 1e-3);
            assert!((&fast - &slow).max_abs() < 1e-8, "E={energy}");
        }
    }

    #[test]
    fn strip_lead_broadening_is_positive() {
        let s = SelfEnergy::for_contact(
            &LeadModel::SemiInfinite {
                onsite_ev: 0.0,
                hopping_ev: 1.0,
                eta_ev: 1e-9,
            },
            Contact::Counter,
            4,
            0.7,
            0.0,
        )
        .unwrap();
        let gamma = s.broadening();
        // Hermitian with non-negative diagonal
        assert!((&gamma - &gamma.adjoint()).max_abs() < 1e-9);
        assert!(gamma.diagonal().iter().all(|v| v.re > -1e-12));
    }
}
