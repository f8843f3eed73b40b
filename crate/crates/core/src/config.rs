//! Flat `key = value` run configuration.
//!
//! ```text
//! # diode
//! tau_n_ps = 179
//! tau_p_ps = 4.33
//! tau_c_ps = 3.18
//! tau_l_ps = 1.81
//! p_l_mw = 78.5          # optional
//! # target
//! y_bar = 0.0175
//! omega_hz = 1e10
//! envelope = raised_cosine
//! eps_max = 0.4
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown or repeated keys and
//! unparsable values are errors; nothing falls back to a default silently
//! except the optional keys listed in [`KNOWN_KEYS`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::experiments::{Controller, Scenario};
use crate::flatness::{EnvelopeSpec, ModulationSpec, PhaseSpec};
use crate::params::{DiodeTimeConstants, ParamError, PhysicalScaling};

/// Every accepted key with whether it is required.
pub const KNOWN_KEYS: &[(&str, bool)] = &[
    ("tau_n_ps", true),
    ("tau_p_ps", true),
    ("tau_c_ps", true),
    ("tau_l_ps", true),
    ("p_l_mw", false),
    ("i_th_ma", false),
    ("alpha", false),
    ("y_bar", true),
    ("omega_hz", true),
    ("envelope", true),
    ("eps_max", true),
    ("env_divisor", false),
    ("mod_phase_rad", false),
    ("t_end_ns", false),
    ("dt_ps", false),
    ("controller", false),
    ("output", false),
];

/// Carrier periods simulated by default when the envelope has no period.
pub const DEFAULT_CARRIER_PERIODS: f64 = 10.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: key `{key}` given more than once")]
    Duplicate { key: String, line: usize },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: cannot parse `{value}` as a number")]
    Number { key: &'static str, value: String },
    #[error("key `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

impl ConfigError {
    fn invalid(key: &'static str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key,
            message: message.into(),
        }
    }
}

/// Everything a `run`, `sweep` or `coeffs` invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub constants: DiodeTimeConstants,
    /// Watts.
    pub p_l: Option<f64>,
    /// Amperes.
    pub i_th: Option<f64>,
    pub alpha: Option<f64>,
    pub spec: ModulationSpec,
    /// Seconds.
    pub t_end: f64,
    /// Seconds.
    pub dt: f64,
    pub controller: Controller,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse()
    }

    pub fn scaling(&self) -> Option<PhysicalScaling> {
        self.p_l.map(|p_l| PhysicalScaling {
            p_l,
            i_th: self.i_th,
            alpha: self.alpha,
        })
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        Scenario::new(
            self.spec,
            self.controller,
            self.constants,
            0.0,
            self.t_end,
            self.dt,
        )
        .map_err(|e| ConfigError::invalid("t_end_ns", e.to_string()))
    }
}

impl std::str::FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let entries = parse_entries(text)?;
        let get = |key: &'static str| entries.get(key).map(String::as_str);
        let require = |key: &'static str| get(key).ok_or(ConfigError::Missing(key));
        let number = |key: &'static str| -> Result<Option<f64>, ConfigError> {
            get(key).map(|v| parse_number(key, v, 0)).transpose()
        };
        let scaled = |key: &'static str, exp: i32| -> Result<Option<f64>, ConfigError> {
            get(key).map(|v| parse_number(key, v, exp)).transpose()
        };
        let required_scaled = |key: &'static str, exp: i32| -> Result<f64, ConfigError> {
            parse_number(key, require(key)?, exp)
        };

        let constants = DiodeTimeConstants {
            tau_n: required_scaled("tau_n_ps", -12)?,
            tau_p: required_scaled("tau_p_ps", -12)?,
            tau_c: required_scaled("tau_c_ps", -12)?,
            tau_l: required_scaled("tau_l_ps", -12)?,
        }
        .validate()
        .map_err(|e| match e {
            ParamError::NonPositiveParameter(name) => {
                let key = KNOWN_KEYS
                    .iter()
                    .map(|(k, _)| *k)
                    .find(|k| k.starts_with(name))
                    .unwrap_or("tau");
                ConfigError::invalid(key, "must be finite and strictly positive")
            }
            other => ConfigError::invalid("tau", other.to_string()),
        })?;

        let p_l = scaled("p_l_mw", -3)?;
        let i_th = scaled("i_th_ma", -3)?;
        let alpha = number("alpha")?;
        for (key, value) in [("p_l_mw", p_l), ("i_th_ma", i_th), ("alpha", alpha)] {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(ConfigError::invalid(key, "must be strictly positive"));
                }
            }
        }

        let y_bar = parse_number("y_bar", require("y_bar")?, 0)?;
        let freq = parse_number("omega_hz", require("omega_hz")?, 0)?;
        let omega = 2.0 * PI * freq;
        let eps_max = parse_number("eps_max", require("eps_max")?, 0)?;
        let divisor = number("env_divisor")?.unwrap_or(EnvelopeSpec::DEFAULT_DIVISOR);
        let envelope = match require("envelope")? {
            "raised_cosine" => EnvelopeSpec::RaisedCosine { eps_max, divisor },
            "constant" => EnvelopeSpec::Constant(eps_max),
            other => {
                return Err(ConfigError::invalid(
                    "envelope",
                    format!("expected raised_cosine or constant, got `{other}`"),
                ))
            }
        };
        let phase = PhaseSpec::Constant(number("mod_phase_rad")?.unwrap_or(0.0));
        let spec = ModulationSpec::new(y_bar, omega, envelope, phase).map_err(|e| {
            let key = if !(y_bar > 0.0) {
                "y_bar"
            } else if !(omega > 0.0) {
                "omega_hz"
            } else if matches!(envelope, EnvelopeSpec::RaisedCosine { divisor, .. } if !(divisor > 0.0)) {
                "env_divisor"
            } else {
                "eps_max"
            };
            ConfigError::invalid(key, e.to_string())
        })?;

        let t_end = match scaled("t_end_ns", -9)? {
            Some(t) => t,
            None => envelope
                .period(omega)
                .unwrap_or(DEFAULT_CARRIER_PERIODS * 2.0 * PI / omega),
        };
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(ConfigError::invalid(
                "t_end_ns",
                "must be strictly positive",
            ));
        }
        let dt = scaled("dt_ps", -12)?.unwrap_or(Scenario::DEFAULT_DT);
        if !(dt > 0.0 && dt <= t_end) {
            return Err(ConfigError::invalid(
                "dt_ps",
                "must be positive and no longer than the run",
            ));
        }
        let steps = (t_end / dt).round();
        if (steps * dt - t_end).abs() > 1e-9 * t_end {
            return Err(ConfigError::invalid(
                "dt_ps",
                "run length must be a whole number of steps",
            ));
        }
        let controller = match get("controller") {
            Some(name) => name
                .parse()
                .map_err(|e: crate::experiments::ExperimentError| {
                    ConfigError::invalid("controller", e.to_string())
                })?,
            None => Controller::Exact,
        };

        Ok(RunConfig {
            constants,
            p_l,
            i_th,
            alpha,
            spec,
            t_end,
            dt,
            controller,
            output: get("output").map(PathBuf::from),
        })
    }
}

fn parse_entries(text: &str) -> Result<BTreeMap<&'static str, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: line_no })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line: line_no });
        }
        let known = KNOWN_KEYS
            .iter()
            .map(|(k, _)| *k)
            .find(|k| *k == key)
            .ok_or_else(|| ConfigError::UnknownKey {
                key: key.to_string(),
                line: line_no,
            })?;
        if out.insert(known, value.to_string()).is_some() {
            return Err(ConfigError::Duplicate {
                key: key.to_string(),
                line: line_no,
            });
        }
    }
    Ok(out)
}

/// Parses a decimal and scales it by `10^exp`. Plain decimals are rescaled
/// textually so that `179` with `exp = -12` is exactly the literal
/// `179e-12`.
fn parse_number(key: &'static str, value: &str, exp: i32) -> Result<f64, ConfigError> {
    let err = || ConfigError::Number {
        key,
        value: value.to_string(),
    };
    let plain = value
        .trim_start_matches(['+', '-'])
        .chars()
        .all(|ch| ch.is_ascii_digit() || ch == '.');
    let parsed = if exp == 0 {
        value.parse::<f64>()
    } else if plain {
        format!("{value}e{exp}").parse::<f64>()
    } else {
        value.parse::<f64>().map(|v| v * 10f64.powi(exp))
    };
    match parsed {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(err()),
    }
}
