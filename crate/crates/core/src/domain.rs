//! Configuration schema and validation.
//!
//! Units are fixed by the schema: metres, m/s, seconds, kelvin, m²/s and
//! ou/m³. Nothing downstream converts units.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowest and highest level of the odor intensity scale.
pub const INTENSITY_SCALE_MIN: f64 = 0.0;
pub const INTENSITY_SCALE_MAX: f64 = 6.0;

/// Default Monte-Carlo sample size per transmitted symbol.
pub const DEFAULT_TRIAL_COUNT: u64 = 100_000;

/// Default master seed of the paper-defaults preset.
pub const DEFAULT_MASTER_SEED: u64 = 0x0DD0_5EED;

/// Psychophysical and diffusive constants of an odorant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdorantSpec {
    pub name: String,
    pub weber_fechner_k: f64,
    pub intensity_intercept_d: f64,
    /// Lower end of the diffusion coefficient range at the reference
    /// temperature, m²/s.
    pub diffusion_min: f64,
    /// Upper end of the diffusion coefficient range, m²/s.
    pub diffusion_max: f64,
    pub reference_temperature: f64,
    /// Free-form record of assumptions folded into the diffusion range
    /// (ambient pressure in particular).
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub comment: String,
}

impl OdorantSpec {
    /// Benzene at 298 K and 1 atm: k = 2.59, d = 0.5,
    /// D in [69, 75] Torr·cm²/s converted to m²/s.
    pub fn benzene() -> Self {
        Self {
            name: "benzene".to_owned(),
            weber_fechner_k: 2.59,
            intensity_intercept_d: 0.5,
            diffusion_min: 9.078e-6,
            diffusion_max: 9.868e-6,
            reference_temperature: 298.0,
            comment: "ambient pressure 1 atm (760 Torr) folded into the diffusion range".to_owned(),
        }
    }
}

/// Geometry and signalling parameters of one transmitter-receiver link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    #[serde(rename = "tx_rx_separation_R")]
    pub tx_rx_separation: f64,
    #[serde(rename = "airflow_speed_v")]
    pub airflow_speed: f64,
    #[serde(rename = "symbol_period_tau")]
    pub symbol_period: f64,
    #[serde(rename = "temperature_T")]
    pub temperature: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            tx_rx_separation: 50.0,
            airflow_speed: 4.0,
            symbol_period: 20e-6,
            temperature: 298.0,
        }
    }
}

/// Additive white Gaussian noise at the receiver, in ou/m³.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(rename = "awgn_mean_mu_n")]
    pub mean: f64,
    #[serde(rename = "awgn_std_sigma_n")]
    pub std_dev: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            mean: 0.0,
            std_dev: 1.0,
        }
    }
}

/// Everything needed to run one capacity experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub odorant: OdorantSpec,
    pub link: LinkConfig,
    pub noise: NoiseSpec,
    pub scheme_levels: Vec<f64>,
    pub intensity_halfwidth: f64,
    pub trial_count: u64,
    #[serde(with = "seed_repr")]
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// The built-in `paper-defaults` preset: benzene, R = 50 m, v = 4 m/s,
    /// tau = 20 us, T = 298 K, AWGN N(0, 1), levels {4, 5} with halfwidth
    /// 0.25.
    pub fn paper_defaults() -> Self {
        Self {
            odorant: OdorantSpec::benzene(),
            link: LinkConfig::default(),
            noise: NoiseSpec::default(),
            scheme_levels: vec![4.0, 5.0],
            intensity_halfwidth: 0.25,
            trial_count: DEFAULT_TRIAL_COUNT,
            master_seed: DEFAULT_MASTER_SEED,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Serialize(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Applies a `dotted.key=value` override, e.g. `link.airflow_speed_v=2.5`.
    ///
    /// The key must already exist in the schema. The value is parsed as a
    /// TOML value, falling back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Override(format!("expected key=value, got `{assignment}`")))?;
        let key = key.trim();
        let raw = raw.trim();
        let value = parse_override_value(raw);

        let mut doc = toml::Value::try_from(&*self).map_err(|e| ConfigError::Serialize(e.to_string()))?;
        let mut slot = &mut doc;
        for part in key.split('.') {
            slot = slot
                .as_table_mut()
                .and_then(|t| t.get_mut(part))
                .ok_or_else(|| ConfigError::Override(format!("unknown key `{key}`")))?;
        }
        // Integers given for float fields are fine; toml deserializes them.
        *slot = value;
        *self = doc
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Override(format!("`{key}`: {e}")))?;
        Ok(())
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::paper_defaults()
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    match toml::from_str::<Wrap>(&format!("v = {raw}")) {
        Ok(w) => w.v,
        Err(_) => toml::Value::String(raw.to_owned()),
    }
}

/// TOML integers are signed 64-bit, so seeds above `i64::MAX` are written
/// as hex strings. Both forms are accepted on input.
mod seed_repr {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&format!("{seed:#018x}")),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        struct SeedVisitor;
        impl Visitor<'_> for SeedVisitor {
            type Value = u64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a non-negative integer or a 0x-prefixed hex string")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<u64, E> {
                u64::try_from(v).map_err(|_| E::custom("master_seed must be non-negative"))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<u64, E> {
                Ok(v)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<u64, E> {
                let parsed = match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
                    Some(hex) => u64::from_str_radix(hex, 16),
                    None => v.parse(),
                };
                parsed.map_err(|e| E::custom(format!("bad master_seed `{v}`: {e}")))
            }
        }
        d.deserialize_any(SeedVisitor)
    }
}

/// One violated invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

/// Every invariant a configuration failed, not just the first.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("invalid configuration ({} violation(s)): {}", .0.len(), join_violations(.0))]
pub struct Violations(pub Vec<Violation>);

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl Violations {
    pub fn iter(&self) -> impl Iterator<Item = &Violation> {
        self.0.iter()
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.0.iter().any(|v| v.to_string().contains(needle))
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config serialization error: {0}")]
    Serialize(String),
    #[error("bad override: {0}")]
    Override(String),
    #[error(transparent)]
    Invalid(#[from] Violations),
}

struct Checker(Vec<Violation>);

impl Checker {
    fn require(&mut self, ok: bool, field: &str, reason: impl Into<String>) {
        if !ok {
            self.0.push(Violation {
                field: field.to_owned(),
                reason: reason.into(),
            });
        }
    }

    fn positive(&mut self, value: f64, field: &str, short: &str) {
        // NaN fails too.
        self.require(value > 0.0, field, format!("{short} must be positive (got {value})"));
    }
}

/// Checks every type invariant and returns the config unchanged when all
/// of them hold.
pub fn validate_config(cfg: ExperimentConfig) -> Result<ExperimentConfig, Violations> {
    let mut c = Checker(Vec::new());

    let o = &cfg.odorant;
    c.positive(o.weber_fechner_k, "odorant.weber_fechner_k", "weber_fechner_k");
    c.require(
        o.intensity_intercept_d.is_finite(),
        "odorant.intensity_intercept_d",
        "intensity_intercept_d must be finite",
    );
    c.positive(o.diffusion_min, "odorant.diffusion_min", "diffusion_min");
    c.require(
        o.diffusion_min <= o.diffusion_max && o.diffusion_max.is_finite(),
        "odorant.diffusion_max",
        format!(
            "diffusion_max must be finite and >= diffusion_min (got [{}, {}])",
            o.diffusion_min, o.diffusion_max
        ),
    );
    c.positive(o.reference_temperature, "odorant.reference_temperature", "reference_temperature");

    let l = &cfg.link;
    c.positive(l.tx_rx_separation, "link.tx_rx_separation_R", "tx_rx_separation_R");
    c.positive(l.airflow_speed, "link.airflow_speed_v", "airflow_speed_v");
    c.positive(l.symbol_period, "link.symbol_period_tau", "symbol_period_tau");
    c.positive(l.temperature, "link.temperature_T", "temperature_T");

    c.require(cfg.noise.mean.is_finite(), "noise.awgn_mean_mu_n", "awgn_mean_mu_n must be finite");
    c.require(
        cfg.noise.std_dev >= 0.0 && cfg.noise.std_dev.is_finite(),
        "noise.awgn_std_sigma_n",
        format!("awgn_std_sigma_n must be non-negative (got {})", cfg.noise.std_dev),
    );

    c.positive(cfg.intensity_halfwidth, "intensity_halfwidth", "intensity_halfwidth");
    c.require(cfg.trial_count > 0, "trial_count", "trial_count must be positive");

    let levels = &cfg.scheme_levels;
    c.require(!levels.is_empty(), "scheme_levels", "scheme_levels must not be empty");
    for (i, &lvl) in levels.iter().enumerate() {
        c.require(
            (INTENSITY_SCALE_MIN..=INTENSITY_SCALE_MAX).contains(&lvl),
            &format!("scheme_levels[{i}]"),
            format!("level {lvl} outside the intensity scale [0, 6]"),
        );
    }
    for (i, pair) in levels.windows(2).enumerate() {
        let (lo, hi) = (pair[0], pair[1]);
        if hi <= lo {
            c.require(
                false,
                &format!("scheme_levels[{}]", i + 1),
                format!("levels must be strictly increasing ({lo} then {hi})"),
            );
        } else if cfg.intensity_halfwidth > 0.0 {
            c.require(
                hi - lo > 2.0 * cfg.intensity_halfwidth,
                &format!("scheme_levels[{}]", i + 1),
                format!(
                    "bands overlap: levels {lo} and {hi} are closer than 2 x halfwidth {}",
                    cfg.intensity_halfwidth
                ),
            );
        }
    }

    if c.0.is_empty() {
        Ok(cfg)
    } else {
        Err(Violations(c.0))
    }
}
