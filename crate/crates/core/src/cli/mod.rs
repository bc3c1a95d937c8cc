//! Command-line frontend. One binary, file-driven subcommands, reproducible
//! outputs: every text artifact embeds the tool version, a config hash, and
//! the seed; no timestamps, so reruns are byte-identical.

mod commands;
mod kernels;
mod reproduce;

use crate::error::{EblError, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "eblsim",
    version,
    about = "Electron-beam lithography dose simulation for Dolan-bridge junctions"
)]
pub struct Cli {
    /// Cap the worker thread count (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Emit machine-readable JSON summaries on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte Carlo transport and write the event dump + summary.
    Simulate(SimulateArgs),
    /// Aggregate an event dump into radial PSF tables and fit reports.
    Psf(PsfArgs),
    /// Rasterize a layout, convolve with a kernel, extract traces/metrics.
    Dosemap(DosemapArgs),
    /// Proximity-effect correction of a layout's dose factors.
    Pec(PecArgs),
    /// Sweep base dose and classify bridge formation.
    Sweep(SweepArgs),
    /// Write a built-in junction geometry as a layout file.
    Geometry(GeometryArgs),
    /// Run the whole pipeline and compare against the reference figures.
    ReproducePaper(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Stack/beam TOML configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Override the configured trajectory count.
    #[arg(long)]
    pub trajectories: Option<u64>,
    /// Override the configured RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PsfArgs {
    /// Stack/beam TOML configuration (defines the layer windows).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory holding events.bin and exits.csv from `simulate`.
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = crate::psf::DEFAULT_BINS)]
    pub bins: usize,
    /// Power-law fit window in nm.
    #[arg(long, default_value_t = crate::psf::DEFAULT_FIT_RANGE_NM.0)]
    pub fit_min: f64,
    #[arg(long, default_value_t = crate::psf::DEFAULT_FIT_RANGE_NM.1)]
    pub fit_max: f64,
    /// Angular histogram bins over [0, 90] degrees.
    #[arg(long, default_value_t = 90)]
    pub angular_bins: usize,
}

/// Kernel source shared by dosemap/pec/sweep: PSF tables from `psf`, or an
/// analytic power-law + Gaussian model.
#[derive(Debug, Args, Clone)]
pub struct KernelArgs {
    /// Directory holding psf_full.csv (+ per-layer tables) from `psf`.
    #[arg(long)]
    pub psf: Option<PathBuf>,
    /// Analytic kernel: backscatter power-law exponent.
    #[arg(long)]
    pub analytic_b: Option<f64>,
    /// Analytic kernel: forward Gaussian sigma, nm.
    #[arg(long, default_value_t = 25.0)]
    pub analytic_sigma: f64,
    /// Analytic kernel: backscattered energy fraction.
    #[arg(long, default_value_t = 0.38)]
    pub analytic_backscatter_fraction: f64,
    /// Kernel/grid pitch, nm.
    #[arg(long, default_value_t = 10.0)]
    pub pitch: f64,
    /// Kernel half-width (influence radius), nm.
    #[arg(long, default_value_t = 4000.0)]
    pub half_width: f64,
}

/// Layout source shared by dosemap/pec/sweep.
#[derive(Debug, Args, Clone)]
pub struct LayoutArgs {
    /// Layout file in the eblsim text format.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Built-in geometry: thin-dolan | l-shape | horseshoe | x-junction.
    #[arg(long)]
    pub geometry: Option<String>,
    /// Bridge gap for built-in geometries, nm.
    #[arg(long)]
    pub bridge_gap: Option<f64>,
    /// Booster dose factor for the x-junction.
    #[arg(long)]
    pub booster_factor: Option<f64>,
    /// Base dose override, uC/cm^2.
    #[arg(long)]
    pub base_dose: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DosemapArgs {
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Use the direct-summation convolution oracle instead of the FFT path.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct PecArgs {
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Target mean dose per shape, uC/cm^2.
    #[arg(long)]
    pub target: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: u32,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Dose range start:end:step in uC/cm^2.
    #[arg(long, default_value = "350:870:20")]
    pub range: String,
    /// Resist thresholds mma:pmma:collapse; omitted = calibrate on the
    /// horseshoe defaults.
    #[arg(long)]
    pub thresholds: Option<String>,
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    /// thin-dolan | l-shape | horseshoe | x-junction.
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub bridge_gap: Option<f64>,
    #[arg(long)]
    pub booster_factor: Option<f64>,
    #[arg(long)]
    pub base_dose: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Trajectory count for the reference run.
    #[arg(long, default_value_t = 200_000)]
    pub trajectories: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Grid pitch for the dose maps, nm.
    #[arg(long, default_value_t = 10.0)]
    pub pitch: f64,
}

/// Binary entry point: parse, dispatch, map errors to exit codes.
pub fn run() {
    let cli = Cli::parse();
    std::process::exit(run_cli(cli));
}

pub fn run_cli(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        // Ignore the error if a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(&args, cli.json),
        Command::Psf(args) => commands::psf(&args, cli.json),
        Command::Dosemap(args) => commands::dosemap(&args, cli.json),
        Command::Pec(args) => commands::pec(&args, cli.json),
        Command::Sweep(args) => commands::sweep(&args, cli.json),
        Command::Geometry(args) => commands::geometry(&args, cli.json),
        Command::ReproducePaper(args) => reproduce::run(&args, cli.json),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

/// Tracks files written by a command so failures leave no partial outputs.
pub(crate) struct OutputDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputDir {
    pub(crate) fn create(dir: &std::path::Path) -> Result<OutputDir> {
        std::fs::create_dir_all(dir).map_err(|e| EblError::io(dir, e))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            committed: false,
        })
    }

    pub(crate) fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    pub(crate) fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

/// Parse "a:b:c" triples used by --range and --thresholds.
pub(crate) fn parse_triple(s: &str, what: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(EblError::validation(
            what,
            format!("expected three `:`-separated numbers, got `{s}`"),
        ));
    }
    let mut vals = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        vals[i] = p.trim().parse().map_err(|_| {
            EblError::validation(what, format!("`{p}` is not a number in `{s}`"))
        })?;
    }
    Ok((vals[0], vals[1], vals[2]))
}
