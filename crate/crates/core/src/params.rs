//! Diode time constants, physical scales, and normalization helpers.
//!
//! The normalized model is fully determined by four time scales
//! `(tau_n, tau_p, tau_c, tau_l)`, all in seconds. Physical quantities
//! (light power, threshold current) only enter through [`PhysicalScaling`]
//! when converting to or from normalized units.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameter `{0}` must be finite and strictly positive")]
    NonPositiveParameter(&'static str),
    #[error("negative optical power {0} W")]
    NegativePower(f64),
    #[error("unknown time constant `{0}` (expected tau_n, tau_p, tau_c or tau_l)")]
    UnknownTimeConstant(String),
}

fn check_positive(name: &'static str, value: f64) -> Result<f64, ParamError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ParamError::NonPositiveParameter(name))
    }
}

/// The four time scales of the normalized rate equations, in seconds.
///
/// Only positivity is enforced. Orderings such as `tau_p < tau_n` are
/// deliberately not checked so that robustness sweeps can scale any
/// constant freely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiodeTimeConstants {
    /// Carrier lifetime.
    pub tau_n: f64,
    /// Photon lifetime.
    pub tau_p: f64,
    /// Capture time scale.
    pub tau_c: f64,
    /// Stimulated-emission time scale, `1 / (B tau_n I_th)`.
    pub tau_l: f64,
}

impl DiodeTimeConstants {
    /// Commercial diode used as the reference scenario: 179, 4.33, 3.18 and
    /// 1.81 ps.
    pub const REFERENCE: DiodeTimeConstants = DiodeTimeConstants {
        tau_n: 179e-12,
        tau_p: 4.33e-12,
        tau_c: 3.18e-12,
        tau_l: 1.81e-12,
    };

    pub fn new(tau_n: f64, tau_p: f64, tau_c: f64, tau_l: f64) -> Result<Self, ParamError> {
        DiodeTimeConstants {
            tau_n,
            tau_p,
            tau_c,
            tau_l,
        }
        .validate()
    }

    /// Returns `self` unchanged when every constant is finite and positive.
    pub fn validate(self) -> Result<Self, ParamError> {
        check_positive("tau_n", self.tau_n)?;
        check_positive("tau_p", self.tau_p)?;
        check_positive("tau_c", self.tau_c)?;
        check_positive("tau_l", self.tau_l)?;
        Ok(self)
    }

    pub fn get(&self, which: TimeConstant) -> f64 {
        match which {
            TimeConstant::TauN => self.tau_n,
            TimeConstant::TauP => self.tau_p,
            TimeConstant::TauC => self.tau_c,
            TimeConstant::TauL => self.tau_l,
        }
    }

    /// Copy with one constant multiplied by `factor`.
    pub fn scaled(self, which: TimeConstant, factor: f64) -> Result<Self, ParamError> {
        let mut out = self;
        match which {
            TimeConstant::TauN => out.tau_n *= factor,
            TimeConstant::TauP => out.tau_p *= factor,
            TimeConstant::TauC => out.tau_c *= factor,
            TimeConstant::TauL => out.tau_l *= factor,
        }
        out.validate()
    }

    /// Static gain `1 + tau_n / tau_c` from light level to drive current.
    pub fn static_gain(&self) -> f64 {
        1.0 + self.tau_n / self.tau_c
    }

    /// Gain-compression ratio `tau_p / tau_l`.
    pub fn compression(&self) -> f64 {
        self.tau_p / self.tau_l
    }
}

/// Names of the individual time constants, used by parameter sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeConstant {
    TauN,
    TauP,
    TauC,
    TauL,
}

impl TimeConstant {
    pub const ALL: [TimeConstant; 4] = [
        TimeConstant::TauN,
        TimeConstant::TauP,
        TimeConstant::TauC,
        TimeConstant::TauL,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimeConstant::TauN => "tau_n",
            TimeConstant::TauP => "tau_p",
            TimeConstant::TauC => "tau_c",
            TimeConstant::TauL => "tau_l",
        }
    }
}

impl fmt::Display for TimeConstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TimeConstant {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TimeConstant::ALL
            .into_iter()
            .find(|tc| tc.name() == s)
            .ok_or_else(|| ParamError::UnknownTimeConstant(s.to_string()))
    }
}

/// Physical scales needed to move between normalized and SI quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalScaling {
    /// Saturation power scale `P_l`, watts.
    pub p_l: f64,
    /// Threshold current, amperes.
    pub i_th: Option<f64>,
    /// Linewidth-enhancement factor.
    pub alpha: Option<f64>,
}

impl PhysicalScaling {
    pub fn new(p_l: f64, i_th: Option<f64>, alpha: Option<f64>) -> Result<Self, ParamError> {
        check_positive("p_l", p_l)?;
        if let Some(i) = i_th {
            check_positive("i_th", i)?;
        }
        if let Some(a) = alpha {
            check_positive("alpha", a)?;
        }
        Ok(PhysicalScaling { p_l, i_th, alpha })
    }
}

/// Raw physical parameters, only used to derive `tau_l` and `P_l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPhysicalParams {
    pub b: f64,
    pub f: f64,
    pub i_th: f64,
    pub tau_n: f64,
    pub tau_p: f64,
    pub tau_c: f64,
}

impl RawPhysicalParams {
    pub fn validate(self) -> Result<Self, ParamError> {
        check_positive("b", self.b)?;
        check_positive("f", self.f)?;
        check_positive("i_th", self.i_th)?;
        check_positive("tau_n", self.tau_n)?;
        check_positive("tau_p", self.tau_p)?;
        check_positive("tau_c", self.tau_c)?;
        Ok(self)
    }
}

/// Derived scales `(tau_l, p_l)` with `tau_l = 1/(B tau_n I_th)` and
/// `p_l = I_th tau_n / (F tau_c)`.
pub fn derive_scales(raw: RawPhysicalParams) -> Result<(f64, f64), ParamError> {
    let raw = raw.validate()?;
    let tau_l = 1.0 / (raw.b * raw.tau_n * raw.i_th);
    let p_l = raw.i_th * raw.tau_n / (raw.f * raw.tau_c);
    check_positive("tau_l", tau_l)?;
    check_positive("p_l", p_l)?;
    Ok((tau_l, p_l))
}

/// Time constants of a raw parameter set, with `tau_l` derived.
pub fn time_constants_from_raw(raw: RawPhysicalParams) -> Result<DiodeTimeConstants, ParamError> {
    let (tau_l, _) = derive_scales(raw)?;
    DiodeTimeConstants::new(raw.tau_n, raw.tau_p, raw.tau_c, tau_l)
}

pub fn normalize_power(p: f64, scaling: &PhysicalScaling) -> Result<f64, ParamError> {
    if !(p >= 0.0) {
        return Err(ParamError::NegativePower(p));
    }
    Ok(p / scaling.p_l)
}

pub fn denormalize_power(y: f64, scaling: &PhysicalScaling) -> f64 {
    y * scaling.p_l
}

/// Physical drive current for a normalized input, when `i_th` is known.
pub fn denormalize_current(u: f64, scaling: &PhysicalScaling) -> Option<f64> {
    scaling.i_th.map(|i_th| u * i_th)
}
