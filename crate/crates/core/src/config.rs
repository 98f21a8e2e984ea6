//! Flat `key = value` run configuration.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored. Unknown
//! and repeated keys are rejected. Missing keys take the defaults listed by
//! [`RunConfig::default`]. [`RunConfig::to_text`] writes every key, and parsing
//! that text gives back an identical configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::lattice::{DeviceGrid, LatticeError, MaterialParams};
use crate::negf::{Aggregation, AggregationParams, LeadModel};
use crate::potential::{SolverMethod, SolverParams};
use crate::sweep::{EnergyWindow, SweepConfig, WalkerReset};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "QWMEM_WORKERS";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given more than once")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {reason}")]
    Parse {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("`{key}` out of range: {reason}")]
    Range { key: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeadKind {
    WideBand,
    Surface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Bias,
    Band,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl LogLevel {
    pub fn to_filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
            LogLevel::Trace => log::LevelFilter::Trace,
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub material: MaterialParams,
    pub v_max: f64,
    pub v_min: f64,
    pub dv: f64,
    pub theta: Option<f64>,
    pub alpha: f64,
    pub walk_steps: Option<usize>,
    pub walker_reset: WalkerReset,
    pub i_compliance: f64,
    pub lead: LeadKind,
    pub gamma_ev: f64,
    pub lead_eta_ev: f64,
    pub eta_ev: f64,
    pub energy_window: WindowKind,
    pub energy_margin_ev: f64,
    pub n_energies: usize,
    pub aggregation: Aggregation,
    pub fermi_level_ev: f64,
    pub kt_ev: f64,
    pub solver: SolverMethod,
    pub sigma_ratio: f64,
    pub omega: f64,
    pub solver_tol: f64,
    pub max_iterations: Option<usize>,
    pub workers: usize,
    pub v_read: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub snapshots: bool,
    pub log_level: LogLevel,
}

/// Worker count from [`WORKERS_ENV`], else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

impl Default for RunConfig {
    fn default() -> Self {
        let sweep = SweepConfig::default();
        let solver = SolverParams::default();
        let agg = AggregationParams::default();
        Self {
            nx: 30,
            ny: 30,
            material: MaterialParams::default(),
            v_max: sweep.v_max,
            v_min: sweep.v_min,
            dv: sweep.dv,
            theta: None,
            alpha: sweep.alpha,
            walk_steps: None,
            walker_reset: sweep.walker_reset,
            i_compliance: sweep.i_compliance,
            lead: LeadKind::WideBand,
            gamma_ev: 1.0,
            lead_eta_ev: 1e-9,
            eta_ev: sweep.eta,
            energy_window: WindowKind::Bias,
            energy_margin_ev: 0.25,
            n_energies: sweep.n_energies,
            aggregation: agg.mode,
            fermi_level_ev: agg.fermi_level_ev,
            kt_ev: agg.kt_ev,
            solver: solver.method,
            sigma_ratio: solver.sigma_ratio,
            omega: solver.omega,
            solver_tol: solver.tol,
            max_iterations: solver.max_iterations,
            workers: default_workers(),
            v_read: None,
            out_dir: None,
            snapshots: false,
            log_level: LogLevel::Info,
        }
    }
}

fn parse_auto<T: FromStr>(v: &str) -> Result<Option<T>, String>
where
    T::Err: std::fmt::Display,
{
    if v == "auto" {
        Ok(None)
    } else {
        v.parse().map(Some).map_err(|e: T::Err| e.to_string())
    }
}

fn show_auto<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), |x| x.to_string())
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

fn parse_choice<T: Copy>(v: &str, choices: &[(&str, T)]) -> Result<T, String> {
    choices
        .iter()
        .find(|(name, _)| *name == v)
        .map(|&(_, c)| c)
        .ok_or_else(|| {
            let names: Vec<&str> = choices.iter().map(|(n, _)| *n).collect();
            format!("expected one of {}, got `{v}`", names.join(", "))
        })
}

fn show_choice<T: Copy + PartialEq>(v: T, choices: &[(&'static str, T)]) -> &'static str {
    choices.iter().find(|(_, c)| *c == v).map(|(n, _)| *n).expect("choice listed")
}

const RESET_CHOICES: &[(&str, WalkerReset)] = &[
    ("per_branch", WalkerReset::PerBranch),
    ("per_step", WalkerReset::PerStep),
];
const LEAD_CHOICES: &[(&str, LeadKind)] =
    &[("wide_band", LeadKind::WideBand), ("surface", LeadKind::Surface)];
const WINDOW_CHOICES: &[(&str, WindowKind)] = &[("bias", WindowKind::Bias), ("band", WindowKind::Band)];
const AGG_CHOICES: &[(&str, Aggregation)] = &[
    ("fermi_window", Aggregation::FermiWindow),
    ("mean_window", Aggregation::MeanWindow),
];
const SOLVER_CHOICES: &[(&str, SolverMethod)] =
    &[("direct", SolverMethod::Direct), ("sor", SolverMethod::Sor)];
const LOG_CHOICES: &[(&str, LogLevel)] = &[
    ("error", LogLevel::Error),
    ("warn", LogLevel::Warn),
    ("info", LogLevel::Info),
    ("debug", LogLevel::Debug),
    ("trace", LogLevel::Trace),
];

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "nx",
    "ny",
    "eodi_ev",
    "em_ev",
    "hopping_ev",
    "lattice_nm",
    "v_max",
    "v_min",
    "dv",
    "theta",
    "alpha",
    "walk_steps",
    "walker_reset",
    "i_compliance",
    "lead",
    "gamma_ev",
    "lead_eta_ev",
    "eta_ev",
    "energy_window",
    "energy_margin_ev",
    "n_energies",
    "aggregation",
    "fermi_level_ev",
    "kt_ev",
    "solver",
    "sigma_ratio",
    "omega",
    "solver_tol",
    "max_iterations",
    "workers",
    "v_read",
    "out_dir",
    "snapshots",
    "log_level",
];

impl RunConfig {
    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        fn num<T: FromStr>(v: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse().map_err(|e: T::Err| e.to_string())
        }
        match key {
            "nx" => self.nx = num(v)?,
            "ny" => self.ny = num(v)?,
            "eodi_ev" => self.material.eodi_ev = num(v)?,
            "em_ev" => self.material.em_ev = num(v)?,
            "hopping_ev" => self.material.hopping_ev = num(v)?,
            "lattice_nm" => self.material.lattice_nm = num(v)?,
            "v_max" => self.v_max = num(v)?,
            "v_min" => self.v_min = num(v)?,
            "dv" => self.dv = num(v)?,
            "theta" => self.theta = parse_auto(v)?,
            "alpha" => self.alpha = num(v)?,
            "walk_steps" => self.walk_steps = parse_auto(v)?,
            "walker_reset" => self.walker_reset = parse_choice(v, RESET_CHOICES)?,
            "i_compliance" => self.i_compliance = num(v)?,
            "lead" => self.lead = parse_choice(v, LEAD_CHOICES)?,
            "gamma_ev" => self.gamma_ev = num(v)?,
            "lead_eta_ev" => self.lead_eta_ev = num(v)?,
            "eta_ev" => self.eta_ev = num(v)?,
            "energy_window" => self.energy_window = parse_choice(v, WINDOW_CHOICES)?,
            "energy_margin_ev" => self.energy_margin_ev = num(v)?,
            "n_energies" => self.n_energies = num(v)?,
            "aggregation" => self.aggregation = parse_choice(v, AGG_CHOICES)?,
            "fermi_level_ev" => self.fermi_level_ev = num(v)?,
            "kt_ev" => self.kt_ev = num(v)?,
            "solver" => self.solver = parse_choice(v, SOLVER_CHOICES)?,
            "sigma_ratio" => self.sigma_ratio = num(v)?,
            "omega" => self.omega = num(v)?,
            "solver_tol" => self.solver_tol = num(v)?,
            "max_iterations" => self.max_iterations = parse_auto(v)?,
            "workers" => self.workers = num(v)?,
            "v_read" => self.v_read = parse_auto(v)?,
            "out_dir" => self.out_dir = (!v.is_empty()).then(|| PathBuf::from(v)),
            "snapshots" => self.snapshots = parse_bool(v)?,
            "log_level" => self.log_level = parse_choice(v, LOG_CHOICES)?,
            _ => unreachable!("key checked against KEYS"),
        }
        Ok(())
    }

    /// The text form of every key, one per line.
    pub fn to_text(&self) -> String {
        let m = &self.material;
        let values: Vec<String> = vec![
            self.nx.to_string(),
            self.ny.to_string(),
            m.eodi_ev.to_string(),
            m.em_ev.to_string(),
            m.hopping_ev.to_string(),
            m.lattice_nm.to_string(),
            self.v_max.to_string(),
            self.v_min.to_string(),
            self.dv.to_string(),
            show_auto(&self.theta),
            self.alpha.to_string(),
            show_auto(&self.walk_steps),
            show_choice(self.walker_reset, RESET_CHOICES).into(),
            self.i_compliance.to_string(),
            show_choice(self.lead, LEAD_CHOICES).into(),
            self.gamma_ev.to_string(),
            self.lead_eta_ev.to_string(),
            self.eta_ev.to_string(),
            show_choice(self.energy_window, WINDOW_CHOICES).into(),
            self.energy_margin_ev.to_string(),
            self.n_energies.to_string(),
            show_choice(self.aggregation, AGG_CHOICES).into(),
            self.fermi_level_ev.to_string(),
            self.kt_ev.to_string(),
            show_choice(self.solver, SOLVER_CHOICES).into(),
            self.sigma_ratio.to_string(),
            self.omega.to_string(),
            self.solver_tol.to_string(),
            show_auto(&self.max_iterations),
            self.workers.to_string(),
            show_auto(&self.v_read),
            self.out_dir
                .as_ref()
                .map_or_else(String::new, |p| p.display().to_string()),
            self.snapshots.to_string(),
            show_choice(self.log_level, LOG_CHOICES).into(),
        ];
        let mut out = String::from("# resolved configuration\n");
        for (k, v) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn range(key: &'static str, ok: bool, reason: impl Into<String>) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Range {
                    key,
                    reason: reason.into(),
                })
            }
        }
        let m = &self.material;
        range("nx", self.nx >= 1, format!("must be >= 1, got {}", self.nx))?;
        range("ny", self.ny >= 3, format!("must be >= 3, got {}", self.ny))?;
        range("eodi_ev", m.eodi_ev > 0.0, format!("must be > 0, got {}", m.eodi_ev))?;
        range("em_ev", m.em_ev > 0.0, format!("must be > 0, got {}", m.em_ev))?;
        range(
            "em_ev",
            m.em_ev < m.eodi_ev,
            format!("must be below eodi_ev ({}), got {}", m.eodi_ev, m.em_ev),
        )?;
        range("hopping_ev", m.hopping_ev > 0.0, format!("must be > 0, got {}", m.hopping_ev))?;
        range("lattice_nm", m.lattice_nm > 0.0, format!("must be > 0, got {}", m.lattice_nm))?;
        range("dv", self.dv > 0.0 && self.dv.is_finite(), format!("must be > 0, got {}", self.dv))?;
        range("v_max", self.v_max > 0.0, format!("must be > 0, got {}", self.v_max))?;
        range("v_min", self.v_min < 0.0, format!("must be < 0, got {}", self.v_min))?;
        for (key, v) in [("v_max", self.v_max), ("v_min", self.v_min)] {
            let k = v / self.dv;
            range(
                key,
                (k - k.round()).abs() <= 1e-9 * k.abs().max(1.0),
                format!("{v} is not a whole number of dv = {} steps", self.dv),
            )?;
        }
        if let Some(theta) = self.theta {
            range("theta", theta > 0.0, format!("must be > 0, got {theta}"))?;
        }
        range("alpha", self.alpha.is_finite(), format!("must be finite, got {}", self.alpha))?;
        range("walk_steps", self.walk_steps != Some(0), "must be >= 1")?;
        range(
            "i_compliance",
            self.i_compliance > 0.0,
            format!("must be > 0, got {}", self.i_compliance),
        )?;
        range("gamma_ev", self.gamma_ev > 0.0, format!("must be > 0, got {}", self.gamma_ev))?;
        range(
            "lead_eta_ev",
            self.lead_eta_ev > 0.0,
            format!("must be > 0, got {}", self.lead_eta_ev),
        )?;
        range("eta_ev", self.eta_ev >= 0.0, format!("must be >= 0, got {}", self.eta_ev))?;
        range(
            "energy_margin_ev",
            self.energy_margin_ev >= 0.0,
            format!("must be >= 0, got {}", self.energy_margin_ev),
        )?;
        range("n_energies", self.n_energies >= 1, "must be >= 1")?;
        range(
            "fermi_level_ev",
            self.fermi_level_ev.is_finite(),
            format!("must be finite, got {}", self.fermi_level_ev),
        )?;
        range("kt_ev", self.kt_ev > 0.0, format!("must be > 0, got {}", self.kt_ev))?;
        range(
            "sigma_ratio",
            self.sigma_ratio >= 1.0,
            format!("must be >= 1, got {}", self.sigma_ratio),
        )?;
        range(
            "omega",
            self.omega > 0.0 && self.omega < 2.0,
            format!("must lie in (0, 2), got {}", self.omega),
        )?;
        range(
            "solver_tol",
            self.solver_tol > 0.0,
            format!("must be > 0, got {}", self.solver_tol),
        )?;
        range("max_iterations", self.max_iterations != Some(0), "must be >= 1")?;
        range("workers", self.workers >= 1, "must be >= 1")?;
        if let Some(v) = self.v_read {
            range(
                "v_read",
                v > 0.0 && v <= self.v_max,
                format!("must lie in (0, v_max], got {v}"),
            )?;
        }
        Ok(())
    }

    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            method: self.solver,
            sigma_ratio: self.sigma_ratio,
            omega: self.omega,
            tol: self.solver_tol,
            max_iterations: self.max_iterations,
        }
    }

    pub fn lead_model(&self) -> LeadModel {
        match self.lead {
            LeadKind::WideBand => LeadModel::WideBand {
                gamma: self.gamma_ev,
            },
            LeadKind::Surface => LeadModel::SemiInfinite {
                onsite_ev: self.material.em_ev,
                hopping_ev: self.material.hopping_ev,
                eta_ev: self.lead_eta_ev,
            },
        }
    }

    pub fn aggregation_params(&self) -> AggregationParams {
        AggregationParams {
            mode: self.aggregation,
            fermi_level_ev: self.fermi_level_ev,
            kt_ev: self.kt_ev,
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            v_max: self.v_max,
            v_min: self.v_min,
            dv: self.dv,
            theta: self.theta,
            alpha: self.alpha,
            walk_steps: self.walk_steps,
            walker_reset: self.walker_reset,
            i_compliance: self.i_compliance,
            leads: self.lead_model(),
            eta: self.eta_ev,
            window: match self.energy_window {
                WindowKind::Bias => EnergyWindow::BiasWindow {
                    margin_ev: self.energy_margin_ev,
                },
                WindowKind::Band => EnergyWindow::Band,
            },
            n_energies: self.n_energies,
            aggregation: self.aggregation_params(),
            solver: self.solver_params(),
            workers: self.workers,
        }
    }

    /// Read voltage for the resistance states: `v_read`, or a fifth of `v_max`.
    pub fn read_voltage(&self) -> f64 {
        self.v_read.unwrap_or(0.2 * self.v_max)
    }

    /// Fresh all-dielectric grid.
    pub fn grid(&self) -> Result<DeviceGrid, LatticeError> {
        DeviceGrid::new(self.nx, self.ny, self.material)
    }
}

/// Parses configuration text on top of the defaults and validates the result.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen = std::collections::HashSet::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: content.to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::Duplicate {
                line,
                key: key.to_string(),
            });
        }
        cfg.set(key, value).map_err(|reason| ConfigError::Parse {
            line,
            key: key.to_string(),
            reason,
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_config(s)
    }
}
