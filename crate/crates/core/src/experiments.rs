//! Scenario runs comparing pre-compensators, with tracking and harmonic
//! distortion metrics and plant-parameter sweeps.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::flatness::{
    consistent_initial_state, eval_target, FlatInput, FlatnessError, ModulationSpec, StaticInput,
};
use crate::model::{InputSignal, ModelError, Plant, Trajectory};
use crate::params::{DiodeTimeConstants, ParamError, TimeConstant};
use crate::quasiharmonic::PolynomialDrive;
use crate::sci;

/// Harmonics `2..=HIGHEST_HARMONIC` count as distortion.
pub const HIGHEST_HARMONIC: usize = 5;
pub const MIN_WINDOW_PERIODS: f64 = 10.0;
pub const MIN_SAMPLES_PER_PERIOD: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid scenario: {0}")]
    ScenarioInvalid(String),
    #[error("analysis window spans {periods:.3} carrier periods, need at least 10")]
    WindowTooShort { periods: f64 },
    #[error("analysis window spans {periods} carrier periods, not an integer number")]
    WindowNotPeriodic { periods: f64 },
    #[error("{per_period:.2} samples per carrier period, need at least 20")]
    Undersampled { per_period: f64 },
    #[error("window {start}..{end} exceeds {len} samples")]
    WindowOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("signal has no component at the carrier frequency")]
    NoFundamental,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Flatness(#[from] FlatnessError),
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Which pre-compensator builds the drive current.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Controller {
    /// Exact flat inversion.
    Exact,
    /// Static model, derivatives ignored.
    Static,
    /// Quasi-harmonic degree-2 polynomial.
    Polynomial,
}

impl Controller {
    pub const ALL: [Controller; 3] = [
        Controller::Exact,
        Controller::Static,
        Controller::Polynomial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Controller::Exact => "exact",
            Controller::Static => "static",
            Controller::Polynomial => "polynomial",
        }
    }

    pub fn input(
        self,
        spec: ModulationSpec,
        constants: DiodeTimeConstants,
    ) -> Box<dyn InputSignal> {
        match self {
            Controller::Exact => Box::new(FlatInput { spec, constants }),
            Controller::Static => Box::new(StaticInput { spec, constants }),
            Controller::Polynomial => Box::new(PolynomialDrive::new(spec, &constants)),
        }
    }
}

impl fmt::Display for Controller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Controller {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Controller::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                ExperimentError::ScenarioInvalid(format!(
                    "unknown controller `{s}` (expected exact, static or polynomial)"
                ))
            })
    }
}

/// Multiplies one plant time constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub param: TimeConstant,
    pub multiplier: f64,
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.param, self.multiplier)
    }
}

impl FromStr for Perturbation {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, mult) = s.trim().split_once(':').ok_or_else(|| {
            ExperimentError::ScenarioInvalid(format!("expected `param:multiplier`, got `{s}`"))
        })?;
        let param = name.trim().parse::<TimeConstant>()?;
        let multiplier: f64 = mult
            .trim()
            .parse()
            .map_err(|_| ExperimentError::ScenarioInvalid(format!("bad multiplier `{mult}`")))?;
        if !(multiplier.is_finite() && multiplier > 0.0) {
            return Err(ExperimentError::ScenarioInvalid(format!(
                "multiplier must be positive, got {multiplier}"
            )));
        }
        Ok(Perturbation { param, multiplier })
    }
}

/// Parses `"tau_n:2.0,tau_p:0.5"`. An empty string is an empty sweep.
pub fn parse_sweep(spec: &str) -> Result<Vec<Perturbation>, ExperimentError> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// One simulation: a target, a pre-compensator designed with
/// `controller_constants`, and a plant running with `plant_constants`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ModulationSpec,
    pub controller: Controller,
    pub plant_constants: DiodeTimeConstants,
    pub controller_constants: DiodeTimeConstants,
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub label: String,
    /// Set by sweeps; `None` for an unperturbed plant.
    pub perturbation: Option<Perturbation>,
}

impl Scenario {
    pub const DEFAULT_DT: f64 = 0.01e-12;

    /// Nominal plant and controller over `[t0, t1]`.
    pub fn new(
        spec: ModulationSpec,
        controller: Controller,
        constants: DiodeTimeConstants,
        t0: f64,
        t1: f64,
        dt: f64,
    ) -> Result<Self, ExperimentError> {
        Scenario {
            spec,
            controller,
            plant_constants: constants,
            controller_constants: constants,
            t0,
            t1,
            dt,
            label: controller.name().to_string(),
            perturbation: None,
        }
        .validate()
    }

    /// The reference diode and target over one envelope period (1 ns) at
    /// `dt = 0.01 ps`.
    pub fn reference(controller: Controller) -> Self {
        let spec = ModulationSpec::reference();
        let t1 = spec
            .envelope()
            .period(spec.omega())
            .expect("raised cosine has a period");
        Scenario::new(
            spec,
            controller,
            DiodeTimeConstants::REFERENCE,
            0.0,
            t1,
            Self::DEFAULT_DT,
        )
        .expect("reference scenario is valid")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_controller(mut self, controller: Controller) -> Self {
        self.controller = controller;
        self
    }

    pub fn validate(self) -> Result<Self, ExperimentError> {
        self.plant_constants.validate()?;
        self.controller_constants.validate()?;
        if !(self.t0.is_finite() && self.t1.is_finite() && self.t1 > self.t0) {
            return Err(ExperimentError::ScenarioInvalid(format!(
                "need t1 > t0, got [{:e}, {:e}]",
                self.t0, self.t1
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ExperimentError::ScenarioInvalid(format!(
                "dt must be positive, got {:e}",
                self.dt
            )));
        }
        Ok(self)
    }

    /// Copy with the plant (not the controller) perturbed.
    pub fn perturbed(&self, p: Perturbation) -> Result<Self, ExperimentError> {
        let mut out = self.clone();
        out.plant_constants = self.plant_constants.scaled(p.param, p.multiplier)?;
        out.perturbation = Some(p);
        Ok(out)
    }
}

/// Tracking and distortion figures for one run. Errors are normalized by
/// `y_bar`; `thd` is `None` when fewer than 10 whole carrier periods fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub max_abs_err: f64,
    pub rms_err: f64,
    pub thd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub label: String,
    pub controller: Controller,
    pub perturbation: Option<Perturbation>,
    pub trajectory: Trajectory,
    pub y_ref: Vec<f64>,
    pub metrics: Metrics,
}

impl SimResult {
    /// Per-sample CSV `t_s,u,y_ref,y_sim,x,err` with `err = y_sim - y_ref`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t_s,u,y_ref,y_sim,x,err")?;
        let tr = &self.trajectory;
        for (((t, u), s), y_ref) in tr.t.iter().zip(&tr.u).zip(&tr.states).zip(&self.y_ref) {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                sci(*t),
                sci(*u),
                sci(*y_ref),
                sci(s.y),
                sci(s.x),
                sci(s.y - y_ref)
            )?;
        }
        Ok(())
    }

    pub fn summary_row(&self) -> SummaryRow {
        SummaryRow {
            label: self.label.clone(),
            controller: self.controller,
            perturbation: self.perturbation,
            metrics: self.metrics,
        }
    }
}

/// One line of the metrics summary CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub controller: Controller,
    pub perturbation: Option<Perturbation>,
    pub metrics: Metrics,
}

pub const SUMMARY_HEADER: &str = "label,controller,perturbation,max_abs_err,rms_err,thd";

impl fmt::Display for SummaryRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pert = self
            .perturbation
            .map_or_else(|| "none".to_string(), |p| p.to_string());
        let thd = self.metrics.thd.map(sci).unwrap_or_default();
        write!(
            f,
            "{},{},{},{},{},{}",
            self.label,
            self.controller,
            pert,
            sci(self.metrics.max_abs_err),
            sci(self.metrics.rms_err),
            thd
        )
    }
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// Simulates a scenario from the state consistent with the target, as
/// known to the controller designer.
pub fn run(s: &Scenario) -> Result<SimResult, ExperimentError> {
    let s = s.clone().validate()?;
    let input = s.controller.input(s.spec, s.controller_constants);
    let s0 = consistent_initial_state(&s.spec, &s.controller_constants, s.t0)?;
    let trajectory =
        Plant::new(s.plant_constants).integrate(s0, input.as_ref(), s.t0, s.t1, s.dt)?;
    let y_ref = trajectory
        .t
        .iter()
        .map(|&t| eval_target(&s.spec, t).map(|d| d.y))
        .collect::<Result<Vec<_>, _>>()?;
    let metrics = compute_metrics(&trajectory, &y_ref, &s.spec);
    Ok(SimResult {
        label: s.label,
        controller: s.controller,
        perturbation: s.perturbation,
        trajectory,
        y_ref,
        metrics,
    })
}

fn compute_metrics(traj: &Trajectory, y_ref: &[f64], spec: &ModulationSpec) -> Metrics {
    let y_bar = spec.y_bar();
    let (mut max, mut sq) = (0.0f64, 0.0f64);
    for (s, r) in traj.states.iter().zip(y_ref) {
        let e = (s.y - r).abs() / y_bar;
        max = max.max(e);
        sq += e * e;
    }
    let y = traj.y();
    let thd = thd_window(y.len(), spec.omega(), traj.dt)
        .and_then(|w| harmonic_distortion(&y, spec.omega(), traj.dt, w).ok());
    Metrics {
        max_abs_err: max,
        rms_err: (sq / y_ref.len() as f64).sqrt(),
        thd,
    }
}

/// Longest window from sample 0 covering a whole number (at least 10) of
/// carrier periods.
fn thd_window(len: usize, omega: f64, dt: f64) -> Option<Range<usize>> {
    if len < 2 {
        return None;
    }
    let per_period = 2.0 * PI / (omega * dt);
    let periods = ((len - 1) as f64 / per_period + 1e-9).floor();
    if periods < MIN_WINDOW_PERIODS {
        return None;
    }
    let n = (periods * per_period).round() as usize;
    (n < len).then_some(0..n)
}

/// Amplitude ratio of harmonics 2..=5 (root-sum-square) to the fundamental,
/// by direct correlation over `window`, which must span a whole number of
/// carrier periods. A fundamental below `1e-12` of the window RMS counts as
/// absent.
pub fn harmonic_distortion(
    y: &[f64],
    omega: f64,
    dt: f64,
    window: Range<usize>,
) -> Result<f64, ExperimentError> {
    if window.end > y.len() || window.start > window.end {
        return Err(ExperimentError::WindowOutOfRange {
            start: window.start,
            end: window.end,
            len: y.len(),
        });
    }
    let per_period = 2.0 * PI / (omega * dt);
    if per_period < MIN_SAMPLES_PER_PERIOD {
        return Err(ExperimentError::Undersampled { per_period });
    }
    let samples = &y[window];
    let periods = samples.len() as f64 / per_period;
    if periods < MIN_WINDOW_PERIODS - 1e-9 {
        return Err(ExperimentError::WindowTooShort { periods });
    }
    if (periods - periods.round()).abs() > 1e-6 {
        return Err(ExperimentError::WindowNotPeriodic { periods });
    }

    let amplitude = |k: usize| {
        let wk = k as f64 * omega * dt;
        let (re, im) = samples
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(re, im), (n, &v)| {
                let (s, c) = (wk * n as f64).sin_cos();
                (re + v * c, im + v * s)
            });
        2.0 * re.hypot(im) / samples.len() as f64
    };
    let fundamental = amplitude(1);
    let rms = (samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64).sqrt();
    if !(fundamental > 1e-12 * rms) {
        return Err(ExperimentError::NoFundamental);
    }
    let harmonics: f64 = (2..=HIGHEST_HARMONIC).map(|k| amplitude(k).powi(2)).sum();
    Ok(harmonics.sqrt() / fundamental)
}

/// Runs `base` once per perturbation of the plant, controller untouched.
/// Rows come back in input order.
pub fn robustness_sweep(
    base: &Scenario,
    perturbations: &[Perturbation],
) -> Result<Vec<SummaryRow>, ExperimentError> {
    perturbations
        .par_iter()
        .map(|&p| {
            let scenario = base.perturbed(p)?;
            run(&scenario).map(|r| r.summary_row())
        })
        .collect()
}
