//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{parse_config, LogLevel, RunConfig};
use crate::hamiltonian::build_hamiltonian;
use crate::io::write_atomic;
use crate::lattice::DeviceGrid;
use crate::negf::{conductance_spectrum, energy_grid, TransmissionSpectrum};
use crate::potential::solve_potential;
use crate::sweep::{resistance_states, run_sweep_with, IVRecord};
use crate::walk::{Polarity, WalkerState};

#[derive(Debug, Parser)]
#[command(
    name = "qwmem",
    version,
    about = "Quantum-walk filament growth and Green's function conductance of a memristor lattice",
    arg_required_else_help = true
)]
struct Cli {
    /// Overrides the configured log level (RUST_LOG takes precedence).
    #[arg(long, global = true, value_enum)]
    log_level: Option<LevelArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LevelArg {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full staircase I-V sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Write the filament state after every step.
        #[arg(long)]
        snapshots: bool,
    },
    /// Transmission spectrum at a single bias.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Applied voltage (V).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        voltage: f64,
        /// Lowest energy (eV); defaults to the configured window.
        #[arg(long, allow_hyphen_values = true)]
        e_min: Option<f64>,
        /// Highest energy (eV).
        #[arg(long, allow_hyphen_values = true)]
        e_max: Option<f64>,
    },
    /// Walk-only evolution with probability-field dumps.
    Walk {
        #[command(flatten)]
        common: Common,
        /// Applied voltage for the guiding potential (V).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        voltage: f64,
        #[arg(long, value_enum, default_value_t = PolarityArg::Set)]
        polarity: PolarityArg,
        /// Total walk steps; defaults to the configured walk length.
        #[arg(long)]
        steps: Option<usize>,
        /// Dump the probability field every this many steps.
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
    /// Spectrum wall time across worker counts.
    Bench {
        /// Grid edge length (square grid).
        #[arg(long, default_value_t = 40)]
        grid: usize,
        #[arg(long, default_value_t = 64)]
        energies: usize,
        /// Comma-separated worker counts.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        workers: Vec<usize>,
        /// Timed repetitions per worker count; the fastest is reported.
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// CSV destination; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file (key = value).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Starting filament snapshot instead of a fresh grid.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Worker threads for the spectrum.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolarityArg {
    Set,
    Reset,
}

impl From<LevelArg> for LogLevel {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Error => LogLevel::Error,
            LevelArg::Warn => LogLevel::Warn,
            LevelArg::Info => LogLevel::Info,
            LevelArg::Debug => LogLevel::Debug,
            LevelArg::Trace => LogLevel::Trace,
        }
    }
}

fn init_logging(level: LogLevel) {
    let mut builder = env_logger::Builder::new();
    builder.filter_level(level.to_filter());
    if let Ok(spec) = std::env::var("RUST_LOG") {
        builder.parse_filters(&spec);
    }
    // a second call (tests running several commands) keeps the first logger
    let _ = builder.try_init();
}

struct Prepared {
    cfg: RunConfig,
    out: PathBuf,
    grid: DeviceGrid,
}

fn prepare(common: &Common, level: Option<LevelArg>) -> Result<Prepared> {
    let text = match &common.config {
        Some(path) => fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text).with_context(|| match &common.config {
        Some(p) => format!("in config {}", p.display()),
        None => "in default config".into(),
    })?;
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = Some(out.clone());
    }
    if let Some(level) = level {
        cfg.log_level = level.into();
    }
    cfg.validate()?;
    init_logging(cfg.log_level);
    let out = cfg
        .out_dir
        .clone()
        .context("no output directory: pass --out or set out_dir")?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let grid = match &common.grid {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading grid {}", path.display()))?;
            let g = DeviceGrid::from_snapshot(&text, cfg.material)
                .with_context(|| format!("in grid {}", path.display()))?;
            cfg.nx = g.nx();
            cfg.ny = g.ny();
            g
        }
        None => cfg.grid()?,
    };
    write_file(&out.join("config.cfg"), &cfg.to_text())?;
    Ok(Prepared { cfg, out, grid })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn cmd_sweep(p: Prepared, snapshots: bool) -> Result<()> {
    let Prepared { cfg, out, grid } = p;
    let snapshots = snapshots || cfg.snapshots;
    let snap_dir = out.join("snapshots");
    if snapshots {
        fs::create_dir_all(&snap_dir)?;
        write_file(&snap_dir.join("initial.txt"), &grid.to_snapshot())?;
    }
    let sweep = cfg.sweep_config();
    let total = sweep.staircase().len();
    let width = total.to_string().len().max(4);
    let mut snap_err = None;
    let started = Instant::now();
    let result = run_sweep_with(&grid, &sweep, |s| {
        log::info!(
            "step {}/{} V={} I={:e} A connected={}",
            s.step + 1,
            total,
            s.voltage,
            s.current,
            s.connected
        );
        if snapshots && snap_err.is_none() {
            let path = snap_dir.join(format!("step_{:0width$}.txt", s.step));
            snap_err = write_file(&path, &s.grid.to_snapshot()).err();
        }
    });
    let record: IVRecord = match &result {
        Ok(r) => r.clone(),
        Err(e) => (*e.partial).clone(),
    };
    write_file(&out.join("iv.csv"), &record.to_csv())?;
    if let Some(e) = snap_err {
        return Err(e);
    }
    let record = result.context("sweep aborted; iv.csv holds the completed steps")?;
    log::info!("sweep finished in {:.1} s", started.elapsed().as_secs_f64());

    let v_read = cfg.read_voltage();
    match resistance_states(&record, v_read) {
        Ok((r_on, r_off)) => {
            let summary = format!(
                "v_read_V,r_on_ohm,r_off_ohm,ratio\n{v_read},{r_on:e},{r_off:e},{}\n",
                r_off / r_on
            );
            write_file(&out.join("summary.csv"), &summary)?;
            println!("r_on = {r_on:.4e} ohm, r_off = {r_off:.4e} ohm, r_off/r_on = {:.3}", r_off / r_on);
        }
        Err(e) => log::warn!("no resistance states: {e}"),
    }
    Ok(())
}

fn cmd_spectrum(p: Prepared, voltage: f64, e_min: Option<f64>, e_max: Option<f64>) -> Result<()> {
    let Prepared { cfg, out, grid } = p;
    let phi = solve_potential(&grid, voltage, &cfg.solver_params())?;
    let h = build_hamiltonian(&grid, &phi)?;
    let sweep = cfg.sweep_config();
    let default_window = {
        let (lo, hi) = h.onsite_range();
        match cfg.energy_window {
            crate::config::WindowKind::Band => (lo - 4.0 * h.hopping(), hi + 4.0 * h.hopping()),
            crate::config::WindowKind::Bias => {
                let half = voltage.abs() / 2.0 + cfg.energy_margin_ev;
                (cfg.fermi_level_ev - half, cfg.fermi_level_ev + half)
            }
        }
    };
    let lo = e_min.unwrap_or(default_window.0);
    let hi = e_max.unwrap_or(default_window.1);
    if !(lo <= hi) {
        bail!("empty energy range [{lo}, {hi}]");
    }
    let energies = energy_grid(lo, hi, cfg.n_energies);
    let spectrum = conductance_spectrum(&h, &sweep.leads, &energies, cfg.eta_ev, cfg.workers)?;
    let g = crate::negf::aggregate_conductance(&spectrum, &cfg.aggregation_params(), voltage);
    write_file(&out.join("spectrum.csv"), &spectrum.to_csv())?;
    write_file(&out.join("potential.csv"), &phi.to_csv())?;
    write_file(&out.join("hamiltonian.txt"), &h.to_coordinate_text())?;
    match g {
        Ok(g) => println!("conductance = {g:e} S"),
        Err(e) => log::warn!("no aggregate conductance: {e}"),
    }
    Ok(())
}

fn cmd_walk(p: Prepared, voltage: f64, polarity: PolarityArg, steps: Option<usize>, every: usize) -> Result<()> {
    let Prepared { cfg, out, grid } = p;
    if every == 0 {
        bail!("--every must be >= 1");
    }
    let polarity = match polarity {
        PolarityArg::Set => Polarity::Set,
        PolarityArg::Reset => Polarity::Reset,
    };
    let phi = solve_potential(&grid, voltage, &cfg.solver_params())?;
    let steps = steps.or(cfg.walk_steps).unwrap_or(grid.ny());
    let width = steps.to_string().len().max(4);
    let mut walker = WalkerState::init(&grid, polarity);
    let dump = |walker: &WalkerState, k: usize| {
        let path = out.join(format!("prob_{k:0width$}.csv"));
        write_file(&path, &walker.position_probabilities().to_csv())
    };
    dump(&walker, 0)?;
    let mut done = 0;
    while done < steps {
        let n = every.min(steps - done);
        walker.evolve(&phi, cfg.alpha, n)?;
        done += n;
        dump(&walker, done)?;
    }
    println!("norm after {steps} steps: {:.15}", walker.norm_sqr());
    Ok(())
}

/// One row of the scaling table.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub workers: usize,
    pub wall_ms: f64,
}

/// Times the spectrum of a `size x size` device with a partial filament at
/// 1 V for each worker count. Fails if any two spectra differ.
pub fn scaling_benchmark(
    size: usize,
    n_energies: usize,
    workers: &[usize],
    repeats: usize,
) -> Result<Vec<BenchRow>> {
    if workers.is_empty() || workers.contains(&0) {
        bail!("worker counts must be >= 1");
    }
    let cfg = RunConfig {
        nx: size,
        ny: size,
        ..RunConfig::default()
    };
    cfg.validate()?;
    let mut grid = cfg.grid()?;
    // a filament half way across the dielectric
    for j in (grid.ny() / 2)..grid.ny() - 1 {
        grid.set_kind(size / 2, j, crate::lattice::CellKind::MetalIon)?;
    }
    let phi = solve_potential(&grid, 1.0, &cfg.solver_params())?;
    let h = build_hamiltonian(&grid, &phi)?;
    let mu = cfg.fermi_level_ev;
    let energies = energy_grid(mu - 2.5, mu + 2.5, n_energies);
    let leads = cfg.lead_model();

    let mut reference: Option<TransmissionSpectrum> = None;
    let mut rows = Vec::new();
    for &w in workers {
        let mut best = f64::INFINITY;
        for _ in 0..repeats.max(1) {
            let t = Instant::now();
            let spec = conductance_spectrum(&h, &leads, &energies, cfg.eta_ev, w)?;
            best = best.min(t.elapsed().as_secs_f64() * 1e3);
            match &reference {
                None => reference = Some(spec),
                Some(r) if r.transmission != spec.transmission => {
                    bail!("spectrum with {w} workers differs from the first run")
                }
                Some(_) => {}
            }
        }
        log::info!("{w} workers: {best:.1} ms");
        rows.push(BenchRow { workers: w, wall_ms: best });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("workers,wall_ms\n");
    for r in rows {
        out.push_str(&format!("{},{:.3}\n", r.workers, r.wall_ms));
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep { common, snapshots } => cmd_sweep(prepare(&common, cli.log_level)?, snapshots),
        Command::Spectrum {
            common,
            voltage,
            e_min,
            e_max,
        } => cmd_spectrum(prepare(&common, cli.log_level)?, voltage, e_min, e_max),
        Command::Walk {
            common,
            voltage,
            polarity,
            steps,
            every,
        } => cmd_walk(prepare(&common, cli.log_level)?, voltage, polarity, steps, every),
        Command::Bench {
            grid,
            energies,
            workers,
            repeats,
            out,
        } => {
            init_logging(cli.log_level.map_or(LogLevel::Info, Into::into));
            if grid < 3 {
                bail!("--grid must be >= 3");
            }
            if energies == 0 {
                bail!("--energies must be >= 1");
            }
            let rows = scaling_benchmark(grid, energies, &workers, repeats)?;
            let csv = bench_csv(&rows);
            match out {
                Some(path) => write_file(&path, &csv)?,
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

/// Runs the tool with `args` (program name first) and returns the exit code:
/// 0 on success, 1 on runtime errors, 2 on usage errors.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_arguments_is_a_usage_error() {
        assert_eq!(run_cli(["qwmem"]), 2);
        assert_eq!(run_cli(["qwmem", "frobnicate"]), 2);
        assert_eq!(run_cli(["qwmem", "bench", "--workers", "x"]), 2);
    }

    #[test]
    fn help_exits_cleanly() {
        assert_eq!(run_cli(["qwmem", "--help"]), 0);
    }

    #[test]
    fn bench_table() {
        let rows = scaling_benchmark(6, 4, &[1, 2], 1).unwrap();
        assert_eq!(rows.iter().map(|r| r.workers).collect::<Vec<_>>(), vec![1, 2]);
        let csv = bench_csv(&rows);
        assert!(csv.starts_with("workers,wall_ms\n1,"));
        assert!(scaling_benchmark(6, 4, &[0], 1).is_err());
    }
}
