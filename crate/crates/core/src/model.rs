//! Normalized laser-diode rate equations and a fixed-step RK4 integrator.
//!
//! With `y = P / P_l` and `u = I / I_th` the plant reads
//!
//! ```text
//! dy/dt = r(y, x) - y / tau_p
//! dx/dt = (u - x) / tau_n - (tau_p / tau_c) r(y, x)
//! r(y, x) = ((x - 1) / tau_l + 1 / tau_p) y / (1 + (tau_p / tau_l) y)
//! ```
//!
//! and, when a linewidth-enhancement factor `alpha` is configured, the
//! optical phase follows `dphi/dt = alpha / (2 tau_l) (x - 1)`.
//! See `docs/derivation.md` for the reduction from physical units.

use std::io::{self, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::params::{DiodeTimeConstants, PhysicalScaling};
use crate::sci;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("state diverged at t = {t:e} s (non-finite or negative light level)")]
    StateDiverged { t: f64 },
    #[error("trajectory carries no optical phase")]
    MissingPhase,
    #[error("invalid integration span: {0}")]
    InvalidSpan(String),
    #[error("initial light level must be non-negative and finite, got {0}")]
    InvalidInitialState(f64),
}

/// Plant state in normalized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedState {
    /// Normalized photon number / light power.
    pub y: f64,
    /// Normalized carrier density (1 is transparency).
    pub x: f64,
    /// Optical phase in radians, only tracked in phase-extended runs.
    pub phi_opt: Option<f64>,
}

impl NormalizedState {
    pub fn new(y: f64, x: f64) -> Self {
        NormalizedState {
            y,
            x,
            phi_opt: None,
        }
    }

    pub fn with_phase(self, phi_opt: f64) -> Self {
        NormalizedState {
            phi_opt: Some(phi_opt),
            ..self
        }
    }

    fn is_finite(&self) -> bool {
        self.y.is_finite() && self.x.is_finite() && self.phi_opt.is_none_or(f64::is_finite)
    }
}

/// Time derivative of a [`NormalizedState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRate {
    pub dy: f64,
    pub dx: f64,
    pub dphi_opt: Option<f64>,
}

/// Normalized drive current `u = I / I_th` as a function of time.
pub trait InputSignal: Sync {
    fn eval(&self, t: f64) -> f64;

    fn label(&self) -> &str;
}

/// Wraps a closure as an [`InputSignal`].
pub struct FnInput<F> {
    label: String,
    f: F,
}

impl<F: Fn(f64) -> f64 + Sync> FnInput<F> {
    pub fn new(label: impl Into<String>, f: F) -> Self {
        FnInput {
            label: label.into(),
            f,
        }
    }
}

impl<F: Fn(f64) -> f64 + Sync> InputSignal for FnInput<F> {
    fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    fn label(&self) -> &str {
        &self.label
    }
}

/// Constant drive.
#[derive(Debug, Clone, Copy)]
pub struct ConstantInput(pub f64);

impl InputSignal for ConstantInput {
    fn eval(&self, _t: f64) -> f64 {
        self.0
    }

    fn label(&self) -> &str {
        "constant"
    }
}

/// Net stimulated-emission rate divided by `P_l`.
pub fn stimulated_rate(y: f64, x: f64, c: &DiodeTimeConstants) -> f64 {
    ((x - 1.0) / c.tau_l + 1.0 / c.tau_p) * y / (1.0 + c.compression() * y)
}

/// Right-hand side of the normalized rate equations. The phase rate is
/// present only when both `alpha` and `s.phi_opt` are.
pub fn rhs(s: &NormalizedState, u: f64, c: &DiodeTimeConstants, alpha: Option<f64>) -> StateRate {
    let r = stimulated_rate(s.y, s.x, c);
    StateRate {
        dy: r - s.y / c.tau_p,
        dx: (u - s.x) / c.tau_n - (c.tau_p / c.tau_c) * r,
        dphi_opt: match (alpha, s.phi_opt) {
            (Some(a), Some(_)) => Some(a / (2.0 * c.tau_l) * (s.x - 1.0)),
            _ => None,
        },
    }
}

/// A diode model ready to be integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plant {
    pub constants: DiodeTimeConstants,
    /// Linewidth-enhancement factor; enables the optical-phase state.
    pub alpha: Option<f64>,
}

impl Plant {
    pub fn new(constants: DiodeTimeConstants) -> Self {
        Plant {
            constants,
            alpha: None,
        }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Plant {
            alpha: Some(alpha),
            ..self
        }
    }

    pub fn rhs(&self, s: &NormalizedState, u: f64) -> StateRate {
        rhs(s, u, &self.constants, self.alpha)
    }

    /// Classical fixed-step RK4 from `t0` to `t1`.
    ///
    /// The span must be an integer multiple of `dt`; sample `k` sits at
    /// `t0 + k dt` and both endpoints are included. With `alpha` set the
    /// phase starts from `s0.phi_opt`, or 0 if absent. A negative or
    /// non-finite state aborts the run.
    pub fn integrate(
        &self,
        s0: NormalizedState,
        input: &dyn InputSignal,
        t0: f64,
        t1: f64,
        dt: f64,
    ) -> Result<Trajectory, ModelError> {
        let steps = step_count(t0, t1, dt)?;
        if !(s0.y >= 0.0) || !s0.is_finite() {
            return Err(ModelError::InvalidInitialState(s0.y));
        }
        let phased = self.alpha.is_some();
        let mut state = [s0.y, s0.x, s0.phi_opt.unwrap_or(0.0)];

        let mut t = Vec::with_capacity(steps + 1);
        let mut states = Vec::with_capacity(steps + 1);
        let mut u = Vec::with_capacity(steps + 1);
        let to_state = |v: &[f64; 3]| NormalizedState {
            y: v[0],
            x: v[1],
            phi_opt: phased.then_some(v[2]),
        };

        for k in 0..=steps {
            let tk = t0 + k as f64 * dt;
            t.push(tk);
            states.push(to_state(&state));
            u.push(input.eval(tk));
            if k == steps {
                break;
            }
            state = self.rk4_step(&state, input, tk, dt);
            let next = to_state(&state);
            if !next.is_finite() || next.y < 0.0 {
                return Err(ModelError::StateDiverged { t: tk + dt });
            }
        }

        Ok(Trajectory { t, states, u, dt })
    }

    fn deriv(&self, v: &[f64; 3], u: f64) -> [f64; 3] {
        let c = &self.constants;
        let r = stimulated_rate(v[0], v[1], c);
        let dphi = self
            .alpha
            .map_or(0.0, |a| a / (2.0 * c.tau_l) * (v[1] - 1.0));
        [
            r - v[0] / c.tau_p,
            (u - v[1]) / c.tau_n - (c.tau_p / c.tau_c) * r,
            dphi,
        ]
    }

    fn rk4_step(&self, v: &[f64; 3], input: &dyn InputSignal, t: f64, dt: f64) -> [f64; 3] {
        let half = 0.5 * dt;
        let u_mid = input.eval(t + half);
        let k1 = self.deriv(v, input.eval(t));
        let k2 = self.deriv(&axpy(v, half, &k1), u_mid);
        let k3 = self.deriv(&axpy(v, half, &k2), u_mid);
        let k4 = self.deriv(&axpy(v, dt, &k3), input.eval(t + dt));
        let mut out = *v;
        for i in 0..3 {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }
}

fn axpy(v: &[f64; 3], a: f64, k: &[f64; 3]) -> [f64; 3] {
    [v[0] + a * k[0], v[1] + a * k[1], v[2] + a * k[2]]
}

fn step_count(t0: f64, t1: f64, dt: f64) -> Result<usize, ModelError> {
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(ModelError::InvalidSpan(format!(
            "need t1 > t0, got [{t0:e}, {t1:e}]"
        )));
    }
    let span = t1 - t0;
    if !(dt > 0.0 && dt.is_finite() && dt <= span) {
        return Err(ModelError::InvalidSpan(format!(
            "dt = {dt:e} outside (0, {span:e}]"
        )));
    }
    let n = (span / dt).round();
    if (n * dt - span).abs() > 1e-9 * span {
        return Err(ModelError::InvalidSpan(format!(
            "span {span:e} is not an integer multiple of dt = {dt:e}"
        )));
    }
    Ok(n as usize)
}

/// Uniformly sampled plant trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub states: Vec<NormalizedState>,
    pub u: Vec<f64>,
    pub dt: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn has_phase(&self) -> bool {
        self.states.first().is_some_and(|s| s.phi_opt.is_some())
    }

    pub fn y(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.y).collect()
    }

    pub fn last(&self) -> Option<&NormalizedState> {
        self.states.last()
    }

    /// CSV with header `t_s,u,y,x[,phi_opt]`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let phased = self.has_phase();
        if phased {
            writeln!(w, "t_s,u,y,x,phi_opt")?;
        } else {
            writeln!(w, "t_s,u,y,x")?;
        }
        for ((t, u), s) in self.t.iter().zip(&self.u).zip(&self.states) {
            write!(w, "{},{},{},{}", sci(*t), sci(*u), sci(s.y), sci(s.x))?;
            match s.phi_opt {
                Some(phi) if phased => writeln!(w, ",{}", sci(phi))?,
                _ => writeln!(w)?,
            }
        }
        Ok(())
    }
}

/// Baseband optical field `sqrt(p_l y) exp(-i phi_opt)` per sample.
pub fn complex_envelope(
    traj: &Trajectory,
    scaling: &PhysicalScaling,
) -> Result<Vec<Complex64>, ModelError> {
    traj.states
        .iter()
        .map(|s| {
            let phi = s.phi_opt.ok_or(ModelError::MissingPhase)?;
            Ok(Complex64::from_polar((scaling.p_l * s.y).sqrt(), -phi))
        })
        .collect()
}
