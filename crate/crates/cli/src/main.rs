//! `spd` — spin-phonon relaxation runs: dataset ingestion, SVD mode
//! projection, bath spectra, and Bloch-Redfield T1/T2 scans.
//!
//! Exit codes: 0 success, 1 validation failure, 2 tolerance failure
//! (`compare`), 3 numerical failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use spinphonon::bath::{BathError, EffectiveMethod, Flavor};
use spinphonon::dynamics::{DynamicsError, ModeSource};
use spinphonon::embed::EmbedError;
use spinphonon::ode::OdeError;

use commands::ToleranceFailure;
use config::RunConfig;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FlavorArg {
    Quantum,
    Classical,
}

impl From<FlavorArg> for Flavor {
    fn from(f: FlavorArg) -> Self {
        match f {
            FlavorArg::Quantum => Flavor::Quantum,
            FlavorArg::Classical => Flavor::Classical,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Full,
    Projected,
    NaiveCutoff,
}

impl From<MethodArg> for ModeSource {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Full => ModeSource::Full,
            MethodArg::Projected => ModeSource::Projected,
            MethodArg::NaiveCutoff => ModeSource::NaiveCutoff,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EffectiveArg {
    Exact,
    Lorentzian,
}

impl From<EffectiveArg> for EffectiveMethod {
    fn from(m: EffectiveArg) -> Self {
        match m {
            EffectiveArg::Exact => EffectiveMethod::Exact,
            EffectiveArg::Lorentzian => EffectiveMethod::Lorentzian,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "spd",
    version,
    about = "Spin-phonon relaxation: SVD mode projection and Bloch-Redfield T1/T2"
)]
struct Cli {
    /// Config file (TOML or JSON); command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Dataset file (spd-1 or spd-cart-1 JSON).
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,

    /// Temperatures in K, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    temps: Option<Vec<f64>>,

    /// Field magnitudes in T, comma separated (applied along the dataset's
    /// field direction).
    #[arg(long, global = true, value_delimiter = ',')]
    fields: Option<Vec<f64>>,

    /// Spectral-density flavor.
    #[arg(long, global = true, value_enum)]
    flavor: Option<FlavorArg>,

    /// Gaussian broadening of the mode delta functions, cm^-1.
    #[arg(long, global = true)]
    broadening_cm1: Option<f64>,

    /// Singular-value retention threshold (relative to the largest).
    #[arg(long, global = true)]
    sv_threshold: Option<f64>,

    /// Force the secular approximation on.
    #[arg(long, global = true, conflicts_with = "no_secular")]
    secular: bool,

    /// Disable the secular approximation.
    #[arg(long, global = true)]
    no_secular: bool,

    /// Bath construction: full star bath, SVD-projected embedding, or a
    /// plain coupling-strength cutoff.
    #[arg(long, global = true, value_enum)]
    method: Option<MethodArg>,

    /// Effective-density construction for --method projected.
    #[arg(long, global = true, value_enum)]
    effective_method: Option<EffectiveArg>,

    /// Retention fraction for --method naive-cutoff.
    #[arg(long, global = true)]
    cutoff_frac: Option<f64>,

    /// Worker threads for scans (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Seed for synthetic generation; recorded in every output header.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset and emit participation norms per mode.
    Ingest,
    /// Generate a reproducible synthetic dataset.
    Synth {
        /// Number of phonon modes.
        #[arg(long)]
        modes: Option<usize>,
        /// Frequency band minimum, cm^-1.
        #[arg(long)]
        freq_min: Option<f64>,
        /// Frequency band maximum, cm^-1.
        #[arg(long)]
        freq_max: Option<f64>,
        /// Standard deviation of gradient entries.
        #[arg(long)]
        grad_sigma: Option<f64>,
    },
    /// SVD mode projection; emits the embedding file and a report.
    Embed,
    /// Bath spectral densities on a frequency grid, one CSV per temperature.
    Spectrum,
    /// T1/T2 scan over temperatures and fields.
    Relax {
        /// Also dump per-point envelope trajectories.
        #[arg(long)]
        trajectory: bool,
    },
    /// Side-by-side T1: full bath vs projected (or naive-cutoff) bath.
    Compare {
        /// Maximum tolerated relative T1 deviation.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Exact unitary spin ⊗ primary-mode evolution from a thermal state.
    Oracle {
        /// Oscillator levels per primary mode (default: sized from T).
        #[arg(long)]
        levels: Option<usize>,
        /// Trajectory span in ps.
        #[arg(long)]
        span_ps: Option<f64>,
        /// Trajectory points.
        #[arg(long)]
        points: Option<usize>,
    },
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &cli.dataset {
        config.dataset = Some(v.clone());
    }
    if let Some(v) = &cli.temps {
        config.temps_k = v.clone();
    }
    if let Some(v) = &cli.fields {
        config.fields_t = v.clone();
    }
    if let Some(v) = cli.flavor {
        config.flavor = v.into();
    }
    if let Some(v) = cli.broadening_cm1 {
        config.broadening_cm1 = v;
    }
    if let Some(v) = cli.sv_threshold {
        config.sv_threshold = v;
    }
    if cli.secular {
        config.secular = true;
    }
    if cli.no_secular {
        config.secular = false;
    }
    if let Some(v) = cli.method {
        config.method = v.into();
    }
    if let Some(v) = cli.effective_method {
        config.effective_method = v.into();
    }
    if let Some(v) = cli.cutoff_frac {
        config.cutoff_frac = v;
    }
    if let Some(v) = cli.jobs {
        config.jobs = Some(v);
    }
    if let Some(v) = cli.seed {
        config.seed = v;
    }
    if let Some(v) = &cli.out {
        config.out = v.clone();
    }

    match &cli.command {
        Command::Synth {
            modes,
            freq_min,
            freq_max,
            grad_sigma,
        } => {
            if let Some(v) = modes {
                config.synth_modes = *v;
            }
            if let Some(v) = freq_min {
                config.synth_freq_min_cm1 = *v;
            }
            if let Some(v) = freq_max {
                config.synth_freq_max_cm1 = *v;
            }
            if let Some(v) = grad_sigma {
                config.synth_grad_sigma = *v;
            }
        }
        Command::Relax { trajectory } => {
            if *trajectory {
                config.trajectory = true;
            }
        }
        Command::Compare { tolerance: Some(v) } => config.compare_tolerance = *v,
        Command::Compare { tolerance: None } => {}
        Command::Oracle {
            levels,
            span_ps,
            points,
        } => {
            if let Some(v) = levels {
                config.oracle_levels = *v;
            }
            if let Some(v) = span_ps {
                config.oracle_span_ps = *v;
            }
            if let Some(v) = points {
                config.traj_points = *v;
            }
        }
        _ => {}
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<()> {
    let config = resolve_config(cli)?;
    if let Some(jobs) = config.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }
    match &cli.command {
        Command::Ingest => commands::cmd_ingest(&config),
        Command::Synth { .. } => commands::cmd_synth(&config),
        Command::Embed => commands::cmd_embed(&config),
        Command::Spectrum => commands::cmd_spectrum(&config),
        Command::Relax { .. } => commands::cmd_relax(&config),
        Command::Compare { .. } => commands::cmd_compare(&config),
        Command::Oracle { .. } => commands::cmd_oracle(&config),
    }
}

/// 1 validation, 2 tolerance, 3 numerical.
fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<ToleranceFailure>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<DynamicsError>() {
            return match e {
                DynamicsError::Ode(_)
                | DynamicsError::InvariantViolation { .. }
                | DynamicsError::Truncation { .. }
                | DynamicsError::Bath(BathError::OutOfRange { .. })
                | DynamicsError::Embed(EmbedError::Instability { .. }) => 3,
                _ => 1,
            };
        }
        if let Some(e) = cause.downcast_ref::<EmbedError>() {
            return match e {
                EmbedError::Instability { .. } => 3,
                _ => 1,
            };
        }
        if let Some(e) = cause.downcast_ref::<BathError>() {
            return match e {
                BathError::OutOfRange { .. } => 3,
                _ => 1,
            };
        }
        if cause.downcast_ref::<OdeError>().is_some() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<spinphonon::Error>() {
            return match e {
                spinphonon::Error::Dynamics(DynamicsError::Ode(_))
                | spinphonon::Error::Dynamics(DynamicsError::InvariantViolation { .. })
                | spinphonon::Error::Dynamics(DynamicsError::Truncation { .. })
                | spinphonon::Error::Embed(EmbedError::Instability { .. })
                | spinphonon::Error::Bath(BathError::OutOfRange { .. }) => 3,
                _ => 1,
            };
        }
    }
    1
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}
