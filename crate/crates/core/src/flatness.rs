//! Target light waveforms and flat inversion of the rate equations.
//!
//! The light level `y` is a flat output: the carrier density and the drive
//! current are algebraic in `y`, `log y` and their first two derivatives,
//!
//! ```text
//! x = 1 + y + tau_p y' + tau_l (log y)'
//! u = 1 + (1 + tau_n/tau_c) y + (tau_n + tau_p + tau_n tau_p/tau_c) y'
//!       + tau_n tau_p y'' + tau_l ((log y)' + tau_n (log y)'')
//! ```
//!
//! Target derivatives are always evaluated in closed form.

use std::f64::consts::PI;

use thiserror::Error;

use crate::model::{InputSignal, NormalizedState};
use crate::params::DiodeTimeConstants;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlatnessError {
    #[error("target light level must be strictly positive, got {0}")]
    NonPositiveTarget(f64),
    #[error("invalid modulation spec: {0}")]
    InvalidSpec(String),
    #[error("state carries no optical phase")]
    MissingPhase,
}

/// Slow amplitude `eps(t)` of the modulation. Peaks must lie in `[0, 1)` so
/// the target stays positive; keep them at or below 0.5 for tight tracking,
/// since `log y` derivatives grow like `1/(1 - eps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeSpec {
    Constant(f64),
    /// `eps(t) = eps_max / 2 * (1 - cos(omega t / divisor))`.
    RaisedCosine {
        eps_max: f64,
        divisor: f64,
    },
}

impl EnvelopeSpec {
    pub const DEFAULT_DIVISOR: f64 = 10.0;

    /// The reference envelope `eps(t) = (1 - cos(omega t / 10)) / 5`.
    pub const REFERENCE: EnvelopeSpec = EnvelopeSpec::RaisedCosine {
        eps_max: 0.4,
        divisor: 10.0,
    };

    pub fn eps_max(&self) -> f64 {
        match *self {
            EnvelopeSpec::Constant(e) => e,
            EnvelopeSpec::RaisedCosine { eps_max, .. } => eps_max,
        }
    }

    /// `(eps, eps', eps'')` at time `t` for carrier frequency `omega`.
    pub fn eval(&self, t: f64, omega: f64) -> (f64, f64, f64) {
        match *self {
            EnvelopeSpec::Constant(e) => (e, 0.0, 0.0),
            EnvelopeSpec::RaisedCosine { eps_max, divisor } => {
                let w = omega / divisor;
                let (s, c) = (w * t).sin_cos();
                let half = 0.5 * eps_max;
                (half * (1.0 - c), half * w * s, half * w * w * c)
            }
        }
    }

    /// Slow period of the envelope, if it has one.
    pub fn period(&self, omega: f64) -> Option<f64> {
        match *self {
            EnvelopeSpec::Constant(_) => None,
            EnvelopeSpec::RaisedCosine { divisor, .. } => Some(2.0 * PI * divisor / omega),
        }
    }

    fn validate(&self) -> Result<(), FlatnessError> {
        let e = self.eps_max();
        if !(e.is_finite() && (0.0..1.0).contains(&e)) {
            return Err(FlatnessError::InvalidSpec(format!(
                "envelope peak must lie in [0, 1), got {e}"
            )));
        }
        if let EnvelopeSpec::RaisedCosine { divisor, .. } = *self {
            if !(divisor.is_finite() && divisor > 0.0) {
                return Err(FlatnessError::InvalidSpec(format!(
                    "envelope divisor must be positive, got {divisor}"
                )));
            }
        }
        Ok(())
    }
}

/// Slow phase `phi(t)` of the modulation. `|phi'| << omega` is a usage
/// contract and is not checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseSpec {
    Constant(f64),
    /// `phi(t) = phi0 + rate t`, a small carrier-frequency offset.
    Linear {
        phi0: f64,
        rate: f64,
    },
}

impl PhaseSpec {
    /// `(phi, phi', phi'')`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        match *self {
            PhaseSpec::Constant(p) => (p, 0.0, 0.0),
            PhaseSpec::Linear { phi0, rate } => (phi0 + rate * t, rate, 0.0),
        }
    }
}

/// Target `y(t) = y_bar (1 + eps(t) cos(omega t + phi(t)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationSpec {
    y_bar: f64,
    omega: f64,
    envelope: EnvelopeSpec,
    mod_phase: PhaseSpec,
}

impl ModulationSpec {
    pub fn new(
        y_bar: f64,
        omega: f64,
        envelope: EnvelopeSpec,
        mod_phase: PhaseSpec,
    ) -> Result<Self, FlatnessError> {
        if !(y_bar.is_finite() && y_bar > 0.0) {
            return Err(FlatnessError::InvalidSpec(format!(
                "y_bar must be positive, got {y_bar}"
            )));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(FlatnessError::InvalidSpec(format!(
                "omega must be positive, got {omega}"
            )));
        }
        envelope.validate()?;
        let (p, dp, d2p) = mod_phase.eval(0.0);
        if ![p, dp, d2p].iter().all(|v| v.is_finite()) {
            return Err(FlatnessError::InvalidSpec(
                "modulation phase must be finite".into(),
            ));
        }
        Ok(ModulationSpec {
            y_bar,
            omega,
            envelope,
            mod_phase,
        })
    }

    /// Reference scenario: `y_bar = 0.0175`, 10 GHz carrier, raised-cosine
    /// envelope peaking at 0.4 with divisor 10, zero phase.
    pub fn reference() -> Self {
        ModulationSpec::new(
            0.0175,
            2.0 * PI * 1e10,
            EnvelopeSpec::REFERENCE,
            PhaseSpec::Constant(0.0),
        )
        .expect("reference spec is valid")
    }

    pub fn y_bar(&self) -> f64 {
        self.y_bar
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn envelope(&self) -> EnvelopeSpec {
        self.envelope
    }

    pub fn mod_phase(&self) -> PhaseSpec {
        self.mod_phase
    }

    /// Envelope and carrier argument `(eps(t), omega t + phi(t))`.
    pub fn quadrature_args(&self, t: f64) -> (f64, f64) {
        let (eps, _, _) = self.envelope.eval(t, self.omega);
        let (phi, _, _) = self.mod_phase.eval(t);
        (eps, self.omega * t + phi)
    }
}

/// `y`, its first two derivatives and those of `log y`, at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeBundle {
    pub y: f64,
    pub dy: f64,
    pub d2y: f64,
    pub dlogy: f64,
    pub d2logy: f64,
}

impl DerivativeBundle {
    /// Fills in the log-derivatives from `y`, `y'` and `y''`.
    pub fn from_y_derivatives(y: f64, dy: f64, d2y: f64) -> Result<Self, FlatnessError> {
        if !(y > 0.0) {
            return Err(FlatnessError::NonPositiveTarget(y));
        }
        let dlogy = dy / y;
        Ok(DerivativeBundle {
            y,
            dy,
            d2y,
            dlogy,
            d2logy: d2y / y - dlogy * dlogy,
        })
    }

    pub fn constant(y: f64) -> Result<Self, FlatnessError> {
        Self::from_y_derivatives(y, 0.0, 0.0)
    }
}

pub fn eval_target(spec: &ModulationSpec, t: f64) -> Result<DerivativeBundle, FlatnessError> {
    let (eps, deps, d2eps) = spec.envelope.eval(t, spec.omega);
    let (phi, dphi, d2phi) = spec.mod_phase.eval(t);
    let (s, c) = (spec.omega * t + phi).sin_cos();
    let rate = spec.omega + dphi;
    let yb = spec.y_bar;
    let y = yb * (1.0 + eps * c);
    let dy = yb * (deps * c - eps * rate * s);
    let d2y = yb * (d2eps * c - 2.0 * deps * rate * s - eps * d2phi * s - eps * rate * rate * c);
    DerivativeBundle::from_y_derivatives(y, dy, d2y)
}

/// The five coefficients of the affine flat-inversion map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatCoefficients {
    /// On `y`: `1 + tau_n / tau_c`.
    pub y: f64,
    /// On `y'`: `tau_n + tau_p + tau_n tau_p / tau_c`.
    pub dy: f64,
    /// On `y''`: `tau_n tau_p`.
    pub d2y: f64,
    /// On `(log y)'`: `tau_l`.
    pub dlogy: f64,
    /// On `(log y)''`: `tau_l tau_n`.
    pub d2logy: f64,
}

impl FlatCoefficients {
    pub fn new(c: &DiodeTimeConstants) -> Self {
        FlatCoefficients {
            y: 1.0 + c.tau_n / c.tau_c,
            dy: c.tau_n + c.tau_p + c.tau_n * c.tau_p / c.tau_c,
            d2y: c.tau_n * c.tau_p,
            dlogy: c.tau_l,
            d2logy: c.tau_l * c.tau_n,
        }
    }

    pub fn apply(&self, d: &DerivativeBundle) -> f64 {
        1.0 + self.y * d.y
            + self.dy * d.dy
            + self.d2y * d.d2y
            + self.dlogy * d.dlogy
            + self.d2logy * d.d2logy
    }
}

/// Drive current that makes the plant follow the bundle exactly.
pub fn flat_input(d: &DerivativeBundle, c: &DiodeTimeConstants) -> Result<f64, FlatnessError> {
    if !(d.y > 0.0) {
        return Err(FlatnessError::NonPositiveTarget(d.y));
    }
    Ok(FlatCoefficients::new(c).apply(d))
}

/// Quasi-static drive `1 + (1 + tau_n/tau_c) y`, ignoring all dynamics.
pub fn static_input(y: f64, c: &DiodeTimeConstants) -> f64 {
    1.0 + c.static_gain() * y
}

/// State `(y, x)` at `t0` that lies on the target trajectory.
pub fn consistent_initial_state(
    spec: &ModulationSpec,
    c: &DiodeTimeConstants,
    t0: f64,
) -> Result<NormalizedState, FlatnessError> {
    let d = eval_target(spec, t0)?;
    Ok(NormalizedState::new(d.y, carrier_density(&d, c)))
}

/// Carrier density implied by the photon balance along a target.
pub fn carrier_density(d: &DerivativeBundle, c: &DiodeTimeConstants) -> f64 {
    1.0 + d.y + c.tau_p * d.dy + c.tau_l * d.dlogy
}

/// Flat output of the phase-extended model,
/// `z = log y + (tau_p/tau_l) y - (2/alpha) phi_opt`.
///
/// Uses `log(P/P_l)`, so it differs from the physical quantity by the
/// constant `log P_l`.
pub fn z_output(
    s: &NormalizedState,
    c: &DiodeTimeConstants,
    alpha: f64,
) -> Result<f64, FlatnessError> {
    if !(s.y > 0.0) {
        return Err(FlatnessError::NonPositiveTarget(s.y));
    }
    let phi = s.phi_opt.ok_or(FlatnessError::MissingPhase)?;
    Ok(s.y.ln() + c.compression() * s.y - 2.0 / alpha * phi)
}

/// Exact flat-inversion pre-compensator for a target.
#[derive(Debug, Clone)]
pub struct FlatInput {
    pub spec: ModulationSpec,
    pub constants: DiodeTimeConstants,
}

impl InputSignal for FlatInput {
    fn eval(&self, t: f64) -> f64 {
        eval_target(&self.spec, t)
            .and_then(|d| flat_input(&d, &self.constants))
            .unwrap_or(f64::NAN)
    }

    fn label(&self) -> &str {
        "exact"
    }
}

/// Static-model drive applied to the target light level.
#[derive(Debug, Clone)]
pub struct StaticInput {
    pub spec: ModulationSpec,
    pub constants: DiodeTimeConstants,
}

impl InputSignal for StaticInput {
    fn eval(&self, t: f64) -> f64 {
        let (eps, arg) = self.spec.quadrature_args(t);
        static_input(self.spec.y_bar * (1.0 + eps * arg.cos()), &self.constants)
    }

    fn label(&self) -> &str {
        "static"
    }
}
