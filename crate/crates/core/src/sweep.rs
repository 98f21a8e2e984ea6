//! Staircase voltage sweep coupling filament growth to conductance.
//!
//! Each step: evolve the walker in the potential of the previous step, apply
//! the occupation threshold, move to the new voltage, re-solve the potential,
//! build the Hamiltonian and reduce the transmission spectrum to a current.

use std::fmt::Write as _;

use thiserror::Error;

use crate::hamiltonian::{build_hamiltonian, HamiltonianError};
use crate::lattice::DeviceGrid;
use crate::negf::{
    aggregate_conductance, conductance_spectrum, energy_grid, AggregationParams, LeadModel,
    NegfError,
};
use crate::potential::{solve_potential, PotentialError, PotentialField, SolverParams};
use crate::walk::{apply_threshold, default_theta, Polarity, WalkError, WalkerState};

/// How the energy grid of the transmission spectrum is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyWindow {
    /// `[min on-site - 4t, max on-site + 4t]`, recomputed every step.
    Band,
    /// `[mu - V/2 - margin, mu + V/2 + margin]` with `V` the largest sweep
    /// magnitude; the same grid is used for every step.
    BiasWindow { margin_ev: f64 },
}

/// When a fresh walker is prepared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkerReset {
    /// New walker at every voltage step.
    PerStep,
    /// One walker per polarity branch; it keeps evolving while the polarity
    /// is unchanged.
    PerBranch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub v_max: f64,
    pub v_min: f64,
    pub dv: f64,
    /// Occupation threshold; `None` means [`default_theta`] for the grid.
    pub theta: Option<f64>,
    pub alpha: f64,
    /// Walk steps per voltage step; `None` means the grid height.
    pub walk_steps: Option<usize>,
    pub walker_reset: WalkerReset,
    pub i_compliance: f64,
    pub leads: LeadModel,
    pub eta: f64,
    pub window: EnergyWindow,
    pub n_energies: usize,
    pub aggregation: AggregationParams,
    pub solver: SolverParams,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            v_max: 4.5,
            v_min: -4.5,
            dv: 0.25,
            theta: None,
            alpha: 1.0,
            walk_steps: None,
            walker_reset: WalkerReset::PerBranch,
            i_compliance: 1e-3,
            leads: LeadModel::default(),
            eta: 1e-6,
            window: EnergyWindow::BiasWindow { margin_ev: 0.25 },
            n_energies: 64,
            aggregation: AggregationParams::default(),
            solver: SolverParams::default(),
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error(transparent)]
    Negf(#[from] NegfError),
}

/// A sweep aborted at `step`; `partial` holds every completed step.
#[derive(Debug, Clone, Error)]
#[error("sweep failed at step {step} (V = {voltage} V): {source}")]
pub struct SweepError {
    pub step: usize,
    pub voltage: f64,
    #[source]
    pub source: StepError,
    pub partial: Box<IVRecord>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), StepError> {
        let bad = |msg: String| Err(StepError::Config(msg));
        if !(self.dv > 0.0 && self.dv.is_finite()) {
            return bad(format!("dv must be > 0, got {}", self.dv));
        }
        if !(self.v_min < 0.0 && self.v_max > 0.0) {
            return bad(format!(
                "need v_min < 0 < v_max, got v_min={} v_max={}",
                self.v_min, self.v_max
            ));
        }
        for (name, v) in [("v_max", self.v_max), ("v_min", self.v_min)] {
            let k = v / self.dv;
            if (k - k.round()).abs() > 1e-9 * k.abs().max(1.0) {
                return bad(format!("{name}={v} is not a multiple of dv={}", self.dv));
            }
        }
        if !(self.i_compliance > 0.0) {
            return bad(format!("i_compliance must be > 0, got {}", self.i_compliance));
        }
        if let Some(theta) = self.theta {
            if !(theta > 0.0) {
                return bad(format!("theta must be > 0, got {theta}"));
            }
        }
        if !self.alpha.is_finite() {
            return bad(format!("alpha must be finite, got {}", self.alpha));
        }
        if self.walk_steps == Some(0) {
            return bad("walk_steps must be >= 1".into());
        }
        if !(self.eta >= 0.0) {
            return bad(format!("eta must be >= 0, got {}", self.eta));
        }
        if self.n_energies == 0 {
            return bad("n_energies must be >= 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        if let EnergyWindow::BiasWindow { margin_ev } = self.window {
            if !(margin_ev >= 0.0) {
                return bad(format!("energy margin must be >= 0, got {margin_ev}"));
            }
        }
        if !(self.aggregation.kt_ev > 0.0) {
            return bad(format!("kt must be > 0, got {}", self.aggregation.kt_ev));
        }
        self.leads.validate()?;
        self.solver.validate()?;
        Ok(())
    }

    /// Voltages of the staircase `0 -> v_max -> 0 -> v_min -> 0`, each with
    /// its segment. Voltages are `k * dv` for integer `k`, so repeated levels
    /// are bit-identical.
    pub fn staircase(&self) -> Vec<(f64, Segment)> {
        let up = (self.v_max / self.dv).round() as i64;
        let down = (-self.v_min / self.dv).round() as i64;
        let dv = self.dv;
        let mut out = Vec::with_capacity((2 * (up + down) + 1) as usize);
        out.extend((0..=up).map(|k| (k as f64 * dv, Segment::Rising)));
        out.extend((0..up).rev().map(|k| (k as f64 * dv, Segment::Falling)));
        out.extend((1..=down).map(|k| (-(k as f64) * dv, Segment::Descending)));
        // `+ 0.0` keeps the final level at +0 rather than -0
        out.extend((0..down).rev().map(|k| (-(k as f64) * dv + 0.0, Segment::Returning)));
        out
    }

    fn energies(&self, h_onsite: (f64, f64), hopping: f64) -> Vec<f64> {
        let (lo, hi) = match self.window {
            EnergyWindow::Band => (h_onsite.0 - 4.0 * hopping, h_onsite.1 + 4.0 * hopping),
            EnergyWindow::BiasWindow { margin_ev } => {
                let half = self.v_max.max(-self.v_min) / 2.0 + margin_ev;
                let mu = self.aggregation.fermi_level_ev;
                (mu - half, mu + half)
            }
        };
        energy_grid(lo, hi, self.n_energies)
    }
}

/// Part of the staircase a step belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Segment {
    /// `0 -> v_max`, including both ends.
    Rising,
    /// `v_max -> 0`, excluding the peak.
    Falling,
    /// `0 -> v_min`, excluding the start.
    Descending,
    /// `v_min -> 0`, excluding the trough.
    Returning,
}

impl Segment {
    pub fn polarity(self) -> Polarity {
        match self {
            Segment::Rising | Segment::Falling => Polarity::Set,
            Segment::Descending | Segment::Returning => Polarity::Reset,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Segment::Rising => "rising",
            Segment::Falling => "falling",
            Segment::Descending => "descending",
            Segment::Returning => "returning",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IVStep {
    pub step: usize,
    pub voltage: f64,
    pub conductance: f64,
    pub current: f64,
    pub connected: bool,
    pub segment: Segment,
    /// Cells flipped by the threshold rule at this step.
    pub flipped: usize,
    /// Filament state after this step.
    pub grid: DeviceGrid,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IVRecord {
    pub steps: Vec<IVStep>,
}

impl IVRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn voltages(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.voltage).collect()
    }

    pub fn currents(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.current).collect()
    }

    pub fn connected(&self) -> Vec<bool> {
        self.steps.iter().map(|s| s.connected).collect()
    }

    /// CSV with header `step,voltage_V,conductance_S,current_A,connected`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,voltage_V,conductance_S,current_A,connected\n");
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{},{},{:e},{:e},{}",
                s.step,
                s.voltage,
                s.conductance,
                s.current,
                u8::from(s.connected)
            );
        }
        out
    }
}

/// Runs the full staircase on `grid`.
pub fn run_sweep(grid: &DeviceGrid, cfg: &SweepConfig) -> Result<IVRecord, SweepError> {
    run_sweep_with(grid, cfg, |_| {})
}

/// As [`run_sweep`], calling `on_step` after every completed step.
pub fn run_sweep_with(
    grid: &DeviceGrid,
    cfg: &SweepConfig,
    mut on_step: impl FnMut(&IVStep),
) -> Result<IVRecord, SweepError> {
    let mut record = IVRecord::default();
    let fail = |step: usize, voltage: f64, source: StepError, record: &IVRecord| SweepError {
        step,
        voltage,
        source,
        partial: Box::new(record.clone()),
    };
    if let Err(e) = cfg.validate() {
        return Err(fail(0, 0.0, e, &record));
    }

    let mut grid = grid.clone();
    let (nx, ny) = (grid.nx(), grid.ny());
    let theta = cfg.theta.unwrap_or_else(|| default_theta(nx, ny));
    let walk_steps = cfg.walk_steps.unwrap_or(ny);
    let mut phi = PotentialField::zeros(nx, ny);
    let mut walker: Option<(Polarity, WalkerState)> = None;

    for (step, (voltage, segment)) in cfg.staircase().into_iter().enumerate() {
        let polarity = segment.polarity();
        let outcome = (|| -> Result<IVStep, StepError> {
            let walker = match &mut walker {
                Some((p, w)) if *p == polarity && cfg.walker_reset == WalkerReset::PerBranch => w,
                slot => &mut slot.insert((polarity, WalkerState::init(&grid, polarity))).1,
            };
            walker.evolve(&phi, cfg.alpha, walk_steps)?;
            let probs = walker.position_probabilities();
            let flipped = apply_threshold(&mut grid, &probs, theta, polarity)?;

            phi = solve_potential(&grid, voltage, &cfg.solver)?;
            let h = build_hamiltonian(&grid, &phi)?;
            let energies = cfg.energies(h.onsite_range(), h.hopping());
            let spectrum = conductance_spectrum(&h, &cfg.leads, &energies, cfg.eta, cfg.workers)?;
            let conductance = aggregate_conductance(&spectrum, &cfg.aggregation, voltage)?;
            let current = (conductance * voltage).clamp(-cfg.i_compliance, cfg.i_compliance);
            Ok(IVStep {
                step,
                voltage,
                conductance,
                current,
                connected: grid.filament_connected(),
                segment,
                flipped,
                grid: grid.clone(),
            })
        })();
        match outcome {
            Ok(s) => {
                log::debug!(
                    "step {step} V={voltage} G={:e} I={:e} flipped={} metal={:.3} connected={}",
                    s.conductance,
                    s.current,
                    s.flipped,
                    s.grid.metal_fraction(),
                    s.connected
                );
                on_step(&s);
                record.steps.push(s);
            }
            Err(e) => return Err(fail(step, voltage, e, &record)),
        }
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResistanceError {
    #[error("read voltage must be > 0, got {0}")]
    InvalidReadVoltage(f64),
    #[error("the {0} branch does not bracket the read voltage {1} V")]
    MissingBranch(&'static str, f64),
}

/// Current at `v` by linear interpolation over `points` (any order).
fn interpolate(points: &mut [(f64, f64)], v: f64) -> Option<f64> {
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    points.windows(2).find_map(|w| {
        let ((v0, i0), (v1, i1)) = (w[0], w[1]);
        if v0 <= v && v <= v1 && v1 > v0 {
            Some(i0 + (i1 - i0) * (v - v0) / (v1 - v0))
        } else {
            None
        }
    })
}

/// `(r_on, r_off)` at `v_read`: `r_off` is read on the rising `0 -> v_max`
/// segment before the filament forms, `r_on` on the falling `v_max -> 0`
/// segment (which starts at the peak).
pub fn resistance_states(record: &IVRecord, v_read: f64) -> Result<(f64, f64), ResistanceError> {
    if !(v_read > 0.0) {
        return Err(ResistanceError::InvalidReadVoltage(v_read));
    }
    let rising: Vec<(f64, f64)> = record
        .steps
        .iter()
        .filter(|s| s.segment == Segment::Rising)
        .map(|s| (s.voltage, s.current))
        .collect();
    // the falling branch starts from the peak, which is the last rising step
    let peak = rising.iter().copied().max_by(|a, b| a.0.total_cmp(&b.0));
    let mut falling: Vec<(f64, f64)> = peak
        .into_iter()
        .chain(
            record
                .steps
                .iter()
                .filter(|s| s.segment == Segment::Falling)
                .map(|s| (s.voltage, s.current)),
        )
        .collect();
    let mut rising = rising;
    let i_off = interpolate(&mut rising, v_read)
        .ok_or(ResistanceError::MissingBranch("pre-SET", v_read))?;
    if record.steps.iter().all(|s| s.segment != Segment::Falling) {
        return Err(ResistanceError::MissingBranch("post-SET", v_read));
    }
    let i_on = interpolate(&mut falling, v_read)
        .ok_or(ResistanceError::MissingBranch("post-SET", v_read))?;
    Ok((v_read / i_on, v_read / i_off))
}
