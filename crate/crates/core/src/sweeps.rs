//! One-parameter sweeps over airflow, symbol period, temperature and
//! receiver noise, with CSV export.
//!
//! Every row runs with the same master seed (common random numbers), so a
//! row depends only on its own configuration: rerunning one value alone, or
//! running rows in parallel, reproduces it exactly.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::domain::ExperimentConfig;
use crate::infotheory::{capacity_pipeline_with, CapacityResult};
use crate::simulation::{Execution, SymbolStats};
use crate::Error;

/// Temperatures over which the Fuller correlation is trusted for benzene.
pub const FULLER_VALID_RANGE: (f64, f64) = (290.0, 400.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum SweepParam {
    #[serde(rename = "v")]
    AirflowSpeed,
    #[serde(rename = "tau")]
    SymbolPeriod,
    #[serde(rename = "T")]
    Temperature,
    #[serde(rename = "awgn")]
    Awgn,
}

impl SweepParam {
    pub const ALL: [SweepParam; 4] = [Self::AirflowSpeed, Self::SymbolPeriod, Self::Temperature, Self::Awgn];

    pub fn name(self) -> &'static str {
        match self {
            Self::AirflowSpeed => "v",
            Self::SymbolPeriod => "tau",
            Self::Temperature => "T",
            Self::Awgn => "awgn",
        }
    }

    /// Writes `value` into the field this parameter controls.
    pub fn apply(self, cfg: &mut ExperimentConfig, value: f64) {
        match self {
            Self::AirflowSpeed => cfg.link.airflow_speed = value,
            Self::SymbolPeriod => cfg.link.symbol_period = value,
            Self::Temperature => cfg.link.temperature = value,
            Self::Awgn => cfg.noise.std_dev = value,
        }
    }

    /// Default grid for this parameter.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            Self::AirflowSpeed => (1..=8).map(|i| i as f64 * 0.5).collect(),
            Self::SymbolPeriod => vec![1e-9, 1e-6, 2e-6, 5e-6, 10e-6, 20e-6, 100e-6, 1e-3],
            Self::Temperature => (0..=22).map(|i| 290.0 + 5.0 * i as f64).collect(),
            Self::Awgn => (0..=12).map(|i| 1.0 + 0.25 * i as f64).collect(),
        }
    }

    /// Baseline the parameter is swept around. Temperature and noise sweeps
    /// run at the airflow that maximises capacity at room temperature.
    pub fn baseline(self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::paper_defaults();
        if matches!(self, Self::Temperature | Self::Awgn) {
            cfg.link.airflow_speed = 2.5;
        }
        cfg
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownSweepParam(s.to_owned()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub stats: Vec<SymbolStats>,
    pub result: CapacityResult,
}

/// Runs the capacity pipeline once per value, rows sorted by value.
pub fn sweep(param: SweepParam, values: &[f64], cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, Error> {
    sweep_with(param, values, cfg, Execution::default())
}

pub fn sweep_with(
    param: SweepParam,
    values: &[f64],
    cfg: &ExperimentConfig,
    exec: Execution,
) -> Result<Vec<SweepRow>, Error> {
    let mut values = values.to_vec();
    values.sort_by(f64::total_cmp);
    if param == SweepParam::Temperature {
        let (lo, hi) = FULLER_VALID_RANGE;
        for &t in values.iter().filter(|&&t| !(lo..=hi).contains(&t)) {
            log::warn!("temperature {t} K is outside the Fuller validity range [{lo}, {hi}] K");
        }
    }
    let row = |value: f64| -> Result<SweepRow, Error> {
        let mut c = cfg.clone();
        param.apply(&mut c, value);
        let out = capacity_pipeline_with(&c, exec)?;
        Ok(SweepRow {
            param,
            value,
            stats: out.stats,
            result: out.result,
        })
    };
    map_rows(&values, exec, row)
}

#[cfg(feature = "parallel")]
fn map_rows<T: Send>(
    values: &[f64],
    exec: Execution,
    f: impl Fn(f64) -> Result<T, Error> + Sync,
) -> Result<Vec<T>, Error> {
    use rayon::prelude::*;
    match exec {
        Execution::Parallel => values.par_iter().map(|&v| f(v)).collect(),
        Execution::Sequential => values.iter().map(|&v| f(v)).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_rows<T>(values: &[f64], _exec: Execution, f: impl Fn(f64) -> Result<T, Error>) -> Result<Vec<T>, Error> {
    values.iter().map(|&v| f(v)).collect()
}

pub fn sweep_airflow(values: &[f64], cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, Error> {
    sweep(SweepParam::AirflowSpeed, values, cfg)
}

pub fn sweep_symbol_period(values: &[f64], cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, Error> {
    sweep(SweepParam::SymbolPeriod, values, cfg)
}

/// Rescales the diffusion range to each temperature before simulating.
pub fn sweep_temperature(values: &[f64], cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, Error> {
    sweep(SweepParam::Temperature, values, cfg)
}

pub fn sweep_awgn(values: &[f64], cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, Error> {
    sweep(SweepParam::Awgn, values, cfg)
}

/// Formats like C's `%.{digits}g`.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_owned() } else { x.to_string() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_owned()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes binary-alphabet sweep rows as CSV: the swept parameter, the two
/// Gaussian fits, the detection matrix, the maximiser and the capacity.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    let param = rows.first().map_or("param", |r| r.param.name());
    w.write_record([
        param,
        "mu0",
        "sigma0",
        "mu1",
        "sigma1",
        "P00",
        "P01",
        "P10",
        "P11",
        "alpha_star",
        "capacity",
    ])?;
    for r in rows {
        if r.stats.len() != 2 {
            return Err(Error::UnsupportedAlphabet(r.stats.len()));
        }
        let m = &r.result.matrix;
        let fields = [
            r.value,
            r.stats[0].mean,
            r.stats[0].std_dev,
            r.stats[1].mean,
            r.stats[1].std_dev,
            m.p00,
            m.p01,
            m.p10,
            m.p11,
            r.result.alpha_star,
            r.result.capacity,
        ];
        w.write_record(fields.iter().map(|&x| format_significant(x, 6)))?;
    }
    w.flush()?;
    Ok(())
}
