//! Odor-based molecular communication link model.
//!
//! A transmitter emits an odor at a concentration that encodes one of M
//! intensity levels (OISK). Airflow and diffusion carry it to a receiver
//! that reads the concentration and decides which intensity band it falls
//! into. Uncertainty in the diffusion coefficient and receiver noise are
//! simulated by Monte Carlo; the resulting Gaussian fits yield detection
//! probabilities and the channel capacity in bit/slot.
//!
//! Modules, bottom up:
//! - [`domain`]: configuration schema and validation
//! - [`psychophysics`]: Weber-Fechner law, intensity bands, decoding
//! - [`channel`]: closed-form advection-diffusion field, temperature scaling
//! - [`simulation`]: seeded, parallel Monte-Carlo trials
//! - [`infotheory`]: detection probabilities, mutual information, capacity
//! - [`sweeps`]: parameter sweeps and CSV export

pub mod channel;
pub mod domain;
pub mod infotheory;
pub mod psychophysics;
pub mod simulation;
pub mod sweeps;

pub use domain::{validate_config, ExperimentConfig, LinkConfig, NoiseSpec, OdorantSpec};
pub use infotheory::{capacity_pipeline, channel_capacity, CapacityResult, DetectionMatrix};
pub use psychophysics::{build_scheme, OiskScheme};
pub use simulation::{Execution, SymbolStats};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Invalid(#[from] domain::Violations),
    #[error(transparent)]
    Config(#[from] domain::ConfigError),
    #[error(transparent)]
    Scheme(#[from] psychophysics::SchemeError),
    #[error("symbol {symbol} not in an alphabet of {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },
    #[error("capacity is defined for binary schemes only, got M = {0}")]
    UnsupportedAlphabet(usize),
    #[error("unknown sweep parameter `{0}` (expected v, tau, T or awgn)")]
    UnknownSweepParam(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
