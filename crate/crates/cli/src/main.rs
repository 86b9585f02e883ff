//! `omc`: command-line front end for the odor link simulator.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use omc_core::channel::{concentration_at, diffusion_range_at, ChannelParams};
use omc_core::domain::{ConfigError, Violations};
use omc_core::infotheory::capacity_pipeline_with;
use omc_core::psychophysics::build_scheme;
use omc_core::simulation::{simulate_symbol, trial_records, write_trial_csv};
use omc_core::sweeps::{sweep_with, write_sweep_csv, SweepParam};
use omc_core::{validate_config, Execution, ExperimentConfig};
use serde::Serialize;
use thiserror::Error;

#[derive(Parser)]
#[command(name = "omc", version, about = "Odor-based molecular communication link simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration to start from.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Override a config field, e.g. `--set link.airflow_speed_v=2.5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed for the Monte-Carlo streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trials per symbol.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run trials on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    PaperDefaults,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the concentration field at one point.
    Propagate {
        /// Distance from the transmitter in m (default: the receiver).
        #[arg(long)]
        x: Option<f64>,
        /// Time in s (default: the transit time R/v).
        #[arg(long)]
        t: Option<f64>,
        /// Emitted concentration in ou/m³ (default: the top symbol's).
        #[arg(long)]
        concentration: Option<f64>,
        /// Diffusion coefficient in m²/s (default: middle of the range at T).
        #[arg(long)]
        diffusion: Option<f64>,
    },
    /// Monte-Carlo statistics of one transmitted symbol.
    Simulate {
        #[arg(long, default_value_t = 1)]
        symbol: usize,
        /// Also dump every trial to this CSV file.
        #[arg(long)]
        trials_csv: Option<PathBuf>,
    },
    /// Detection probabilities and capacity, as JSON.
    Capacity,
    /// Capacity over a range of one parameter, as CSV.
    Sweep {
        #[arg(long, value_parser = parse_param)]
        param: SweepParam,
        /// Comma-separated values (default: the parameter's standard grid).
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Intensity and concentration bands of the scheme.
    DumpBands,
}

fn parse_param(s: &str) -> Result<SweepParam, String> {
    s.parse().map_err(|e: omc_core::Error| e.to_string())
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Invalid(Violations),
    #[error("{0}")]
    Config(ConfigError),
    #[error("{0}")]
    Core(omc_core::Error),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Config(ConfigError::Io { .. }) => 2,
            CliError::Core(omc_core::Error::Io(_)) => 2,
            CliError::Core(omc_core::Error::Csv(e)) if e.is_io_error() => 2,
            _ => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Invalid(v) => CliError::Invalid(v),
            other => CliError::Config(other),
        }
    }
}

impl From<omc_core::Error> for CliError {
    fn from(e: omc_core::Error) -> Self {
        match e {
            omc_core::Error::Invalid(v) => CliError::Invalid(v),
            omc_core::Error::Config(c) => c.into(),
            other => CliError::Core(other),
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let Cli { common, command } = cli;
    let cfg = load_config(&common, &command)?;
    let exec = if common.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let out = common.out.clone();
    match common.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?;
            pool.install(|| execute(&command, &cfg, exec, out.as_deref()))
        }
        None => execute(&command, &cfg, exec, out.as_deref()),
    }
}

fn load_config(common: &Common, command: &Command) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&common.config, common.preset, command) {
        (Some(path), _, _) => ExperimentConfig::load(path)?,
        (None, Some(Preset::PaperDefaults), _) => ExperimentConfig::paper_defaults(),
        (None, None, Command::Sweep { param, .. }) => param.baseline(),
        (None, None, _) => ExperimentConfig::paper_defaults(),
    };
    for assignment in &common.overrides {
        cfg.set(assignment)?;
    }
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.trial_count = trials;
    }
    validate_config(cfg).map_err(CliError::Invalid)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(io_err(format!("cannot create {}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let mut w = open_output(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io {
        context: "cannot write JSON".into(),
        source: e.into(),
    })?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err("cannot write output"))
}

#[derive(Serialize)]
struct PropagateReport {
    x: f64,
    t: f64,
    initial_concentration: f64,
    diffusion: f64,
    concentration: f64,
}

fn execute(command: &Command, cfg: &ExperimentConfig, exec: Execution, out: Option<&Path>) -> Result<(), CliError> {
    let scheme = build_scheme(&cfg.scheme_levels, cfg.intensity_halfwidth, &cfg.odorant).map_err(omc_core::Error::from)?;
    match command {
        Command::Propagate {
            x,
            t,
            concentration,
            diffusion,
        } => {
            let (d_lo, d_hi) = diffusion_range_at(&cfg.odorant, cfg.link.temperature);
            let top = scheme.symbols().last().expect("validated scheme is non-empty");
            let p = ChannelParams {
                initial_concentration: concentration.unwrap_or(top.transmit_concentration),
                separation: cfg.link.tx_rx_separation,
                airflow_speed: cfg.link.airflow_speed,
                symbol_period: cfg.link.symbol_period,
                diffusion: diffusion.unwrap_or(0.5 * (d_lo + d_hi)),
            };
            if !p.is_valid() {
                return Err(CliError::Usage("channel parameters must be positive".into()));
            }
            let x = x.unwrap_or(p.separation);
            let t = t.unwrap_or(p.transit_time());
            if !(0.0..=p.separation).contains(&x) || t.is_nan() || t < 0.0 {
                return Err(CliError::Usage(format!("need 0 <= x <= {} and t >= 0", p.separation)));
            }
            let report = PropagateReport {
                x,
                t,
                initial_concentration: p.initial_concentration,
                diffusion: p.diffusion,
                concentration: concentration_at(x, t, &p),
            };
            write_json(&report, out)
        }
        Command::Simulate { symbol, trials_csv } => {
            let run = simulate_symbol(&scheme, *symbol, cfg, exec)?;
            if let Some(path) = trials_csv {
                let file = File::create(path).map_err(io_err(format!("cannot create {}", path.display())))?;
                write_trial_csv(trial_records(&scheme, *symbol, cfg)?, BufWriter::new(file))?;
            }
            write_json(&run, out)
        }
        Command::Capacity => write_json(&capacity_pipeline_with(cfg, exec)?, out),
        Command::Sweep { param, values } => {
            let values = values.clone().unwrap_or_else(|| param.default_values());
            let rows = sweep_with(*param, &values, cfg, exec)?;
            write_sweep_csv(&rows, open_output(out)?)?;
            Ok(())
        }
        Command::DumpBands => {
            let mut w = open_output(out)?;
            let mut text = format!(
                "{:>6} {:>6} {:>8} {:>8} {:>12} {:>12} {:>12}\n",
                "symbol", "level", "I_lo", "I_hi", "c_lo", "c_hi", "transmit"
            );
            for s in scheme.symbols() {
                let b = &s.band;
                text.push_str(&format!(
                    "{:>6} {:>6.2} {:>8.3} {:>8.3} {:>12.4} {:>12.4} {:>12.4}\n",
                    s.index, b.level, b.intensity_lo, b.intensity_hi, b.conc_lo, b.conc_hi, s.transmit_concentration
                ));
            }
            w.write_all(text.as_bytes())
                .and_then(|_| w.flush())
                .map_err(io_err("cannot write output"))
        }
    }
}
