//! Quasi-harmonic approximation of the flat inversion.
//!
//! For a target `y = y_bar (1 + eps cos(theta))` with slowly varying `eps`
//! and phase, the derivative terms are approximated by
//!
//! ```text
//! y'         ~ -y_bar eps omega sin(theta)
//! y''        ~ -y_bar eps omega^2 cos(theta)
//! (log y)'   ~ -eps omega sin(theta) (1 - eps cos(theta))
//! (log y)''  ~ -eps omega^2 (cos(theta) + eps (2 sin^2(theta) - 1))
//! ```
//!
//! Substituting into the flat inversion gives a degree-2 polynomial in the
//! quadrature pair `s = eps sin(theta)`, `c = eps cos(theta)`; see
//! `docs/derivation.md` for the expansion.

use crate::flatness::{DerivativeBundle, FlatCoefficients, ModulationSpec};
use crate::model::InputSignal;
use crate::params::DiodeTimeConstants;

/// `(eps sin(theta), eps cos(theta))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraturePair {
    pub s: f64,
    pub c: f64,
}

impl QuadraturePair {
    pub fn new(eps: f64, phase_arg: f64) -> Self {
        let (sin, cos) = phase_arg.sin_cos();
        QuadraturePair {
            s: eps * sin,
            c: eps * cos,
        }
    }
}

/// `u ~ k0 + ks s + kc c + kss s^2 + kcc c^2 + ksc s c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialInput {
    pub k0: f64,
    pub ks: f64,
    pub kc: f64,
    pub kss: f64,
    pub kcc: f64,
    pub ksc: f64,
}

impl PolynomialInput {
    pub fn eval(&self, q: QuadraturePair) -> f64 {
        let QuadraturePair { s, c } = q;
        self.k0 + self.ks * s + self.kc * c + self.kss * s * s + self.kcc * c * c + self.ksc * s * c
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.k0, self.ks, self.kc, self.kss, self.kcc, self.ksc]
    }
}

/// Approximate `(y', y'')`, dropping envelope and phase derivatives.
pub fn approx_y_derivatives(y_bar: f64, eps: f64, omega: f64, phase_arg: f64) -> (f64, f64) {
    let (s, c) = phase_arg.sin_cos();
    (-y_bar * eps * omega * s, -y_bar * eps * omega * omega * c)
}

/// Second-order small-`eps` approximation of `((log y)', (log y)'')`.
pub fn approx_log_derivatives(eps: f64, omega: f64, phase_arg: f64) -> (f64, f64) {
    let (s, c) = phase_arg.sin_cos();
    (
        -eps * omega * s * (1.0 - eps * c),
        -eps * omega * omega * (c + eps * (2.0 * s * s - 1.0)),
    )
}

/// Approximate derivative bundle; `y` itself is exact.
pub fn approx_bundle(y_bar: f64, eps: f64, omega: f64, phase_arg: f64) -> DerivativeBundle {
    let (dy, d2y) = approx_y_derivatives(y_bar, eps, omega, phase_arg);
    let (dlogy, d2logy) = approx_log_derivatives(eps, omega, phase_arg);
    DerivativeBundle {
        y: y_bar * (1.0 + eps * phase_arg.cos()),
        dy,
        d2y,
        dlogy,
        d2logy,
    }
}

pub fn polynomial_coefficients(y_bar: f64, omega: f64, c: &DiodeTimeConstants) -> PolynomialInput {
    let a = FlatCoefficients::new(c);
    let w2 = omega * omega;
    PolynomialInput {
        k0: 1.0 + a.y * y_bar,
        ks: -a.dy * y_bar * omega - a.dlogy * omega,
        kc: a.y * y_bar - a.d2y * y_bar * w2 - a.d2logy * w2,
        kss: -a.d2logy * w2,
        kcc: a.d2logy * w2,
        ksc: a.dlogy * omega,
    }
}

pub fn eval_polynomial(p: &PolynomialInput, eps: f64, phase_arg: f64) -> f64 {
    p.eval(QuadraturePair::new(eps, phase_arg))
}

/// Polynomial pre-compensator driven by the target's envelope and phase.
#[derive(Debug, Clone)]
pub struct PolynomialDrive {
    pub spec: ModulationSpec,
    pub coeffs: PolynomialInput,
}

impl PolynomialDrive {
    pub fn new(spec: ModulationSpec, c: &DiodeTimeConstants) -> Self {
        PolynomialDrive {
            coeffs: polynomial_coefficients(spec.y_bar(), spec.omega(), c),
            spec,
        }
    }
}

impl InputSignal for PolynomialDrive {
    fn eval(&self, t: f64) -> f64 {
        let (eps, arg) = self.spec.quadrature_args(t);
        eval_polynomial(&self.coeffs, eps, arg)
    }

    fn label(&self) -> &str {
        "polynomial"
    }
}
