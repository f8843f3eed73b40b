//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Built with `harness = false` so the lines are
//! always visible in `cargo test` output.
//!
//! Oracles are written out here rather than borrowed from the library: the
//! target waveform, the flat inversion formula and the `z` output are all
//! recomputed from their closed forms.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flatdiode::experiments::{run, Controller, Metrics, Perturbation, Scenario, SimResult};
use flatdiode::flatness::{consistent_initial_state, eval_target, FlatInput, ModulationSpec};
use flatdiode::model::{rhs, ConstantInput, NormalizedState, Plant};
use flatdiode::params::{DiodeTimeConstants, TimeConstant};
use flatdiode::quasiharmonic::{eval_polynomial, polynomial_coefficients};

const C: DiodeTimeConstants = DiodeTimeConstants::REFERENCE;
const Y_BAR: f64 = 0.0175;
const OMEGA: f64 = 2.0 * PI * 1e10;
const EPS_MAX: f64 = 0.4;
const ALPHA: f64 = 3.0;
const SEED: u64 = 0x5eed_f1a7;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Outcome { passed, detail }
    }
}

/// Reference target and its first two time derivatives.
fn target(t: f64) -> [f64; 3] {
    let m = 10.0;
    let eps = 0.5 * EPS_MAX * (1.0 - (OMEGA * t / m).cos());
    let deps = 0.5 * EPS_MAX * OMEGA / m * (OMEGA * t / m).sin();
    let d2eps = 0.5 * EPS_MAX * (OMEGA / m).powi(2) * (OMEGA * t / m).cos();
    let (s, c) = (OMEGA * t).sin_cos();
    [
        Y_BAR * (1.0 + eps * c),
        Y_BAR * (deps * c - eps * OMEGA * s),
        Y_BAR * (d2eps * c - 2.0 * deps * OMEGA * s - eps * OMEGA * OMEGA * c),
    ]
}

fn reference_run(controller: Controller) -> SimResult {
    run(&Scenario::reference(controller)).expect("reference scenario runs")
}

fn max_dev_from_target(r: &SimResult) -> f64 {
    r.trajectory
        .t
        .iter()
        .zip(&r.trajectory.states)
        .map(|(&t, s)| (s.y - target(t)[0]).abs() / Y_BAR)
        .fold(0.0, f64::max)
}

fn round_trip() -> Outcome {
    let start = Instant::now();
    let r = reference_run(Controller::Exact);
    let elapsed = start.elapsed().as_secs_f64();
    let err = max_dev_from_target(&r);
    Outcome::new(
        r.trajectory.len() == 100_001 && err <= 1e-3 && elapsed < 1.0,
        format!(
            "max |y_sim - y_ref|/y_bar = {err:.3e} (limit 1e-3), {} samples, {elapsed:.3} s",
            r.trajectory.len()
        ),
    )
}

fn static_degradation() -> Outcome {
    let exact = reference_run(Controller::Exact);
    let stat = reference_run(Controller::Static);
    let (ee, es) = (max_dev_from_target(&exact), max_dev_from_target(&stat));
    let (te, ts) = (exact.metrics.thd, stat.metrics.thd);
    let passed = es >= 10.0 * ee && matches!((te, ts), (Some(a), Some(b)) if b > a);
    Outcome::new(
        passed,
        format!("max err static {es:.3e} vs exact {ee:.3e}; thd static {ts:?} vs exact {te:?}"),
    )
}

fn polynomial_fidelity() -> Outcome {
    let exact = reference_run(Controller::Exact);
    let poly = reference_run(Controller::Polynomial);
    let err = max_dev_from_target(&poly);
    let dev = poly
        .trajectory
        .states
        .iter()
        .zip(&exact.trajectory.states)
        .map(|(p, e)| (p.y - e.y).abs() / Y_BAR)
        .fold(0.0, f64::max);
    Outcome::new(
        err <= 5e-2 && dev <= 5e-2,
        format!("max err {err:.4e} (limit 5e-2), deviation from exact response {dev:.4e} y_bar (limit 5e-2)"),
    )
}

fn tau_n_doubled() -> Result<SimResult, String> {
    let p = Perturbation {
        param: TimeConstant::TauN,
        multiplier: 2.0,
    };
    Scenario::reference(Controller::Polynomial)
        .perturbed(p)
        .and_then(|s| run(&s))
        .map_err(|e| e.to_string())
}

fn robustness() -> Outcome {
    match tau_n_doubled() {
        Ok(r) => {
            let (lo, hi) = r
                .trajectory
                .states
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                    (lo.min(s.y), hi.max(s.y))
                });
            let m = r.metrics;
            let finite = m.max_abs_err.is_finite()
                && m.rms_err.is_finite()
                && m.thd.is_some_and(f64::is_finite);
            Outcome::new(
                lo >= 0.0 && hi <= 3.0 * Y_BAR && finite,
                format!(
                    "y in [{:.3}, {:.3}] y_bar; max err {:.3e}, rms {:.3e}, thd {:?}",
                    lo / Y_BAR,
                    hi / Y_BAR,
                    m.max_abs_err,
                    m.rms_err,
                    m.thd
                ),
            )
        }
        Err(e) => Outcome::new(false, e),
    }
}

/// Turn-on transient with relaxation oscillations; smooth tracked runs reach
/// roundoff before the finest step and would hide the slope.
fn integrator_order() -> Outcome {
    let input = ConstantInput(10.0);
    let s0 = NormalizedState::new(1e-6, 1.0);
    let integrate = |dt: f64| {
        Plant::new(C)
            .integrate(s0, &input, 0.0, 0.2e-9, dt)
            .expect("transient integrates")
    };
    let fine_dt = 0.0025e-12;
    let reference = integrate(fine_dt);
    let pts: Vec<(f64, f64)> = [0.08e-12, 0.04e-12, 0.02e-12, 0.01e-12]
        .iter()
        .map(|&dt: &f64| {
            let stride = (dt / fine_dt).round() as usize;
            let err = integrate(dt)
                .states
                .iter()
                .enumerate()
                .map(|(k, s)| (s.y - reference.states[k * stride].y).abs())
                .fold(0.0, f64::max);
            (dt.ln(), err.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    Outcome::new(
        (3.7..=4.3).contains(&slope),
        format!("exponent {slope:.3} (need [3.7, 4.3])"),
    )
}

/// Each derivative is checked against a central difference of the quantity
/// one order below it. Relative errors use `max(|value|, natural scale)` so
/// zero crossings do not blow up the ratio.
fn analytic_derivatives() -> Outcome {
    let spec = ModulationSpec::reference();
    let h = 1e-15;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let t = rng.gen_range(0.0..=1e-9);
        let [lo, mid, hi] =
            [t - h, t, t + h].map(|t| eval_target(&spec, t).expect("target defined"));
        let oracle = target(t);
        let checks = [
            (mid.y, oracle[0], Y_BAR),
            (mid.dy, (hi.y - lo.y) / (2.0 * h), Y_BAR * OMEGA),
            (mid.d2y, (hi.dy - lo.dy) / (2.0 * h), Y_BAR * OMEGA * OMEGA),
            (mid.dlogy, (hi.y / lo.y).ln() / (2.0 * h), OMEGA),
            (mid.d2logy, (hi.dlogy - lo.dlogy) / (2.0 * h), OMEGA * OMEGA),
        ];
        for (analytic, fd, scale) in checks {
            worst = worst.max((analytic - fd).abs() / analytic.abs().max(scale));
        }
    }
    Outcome::new(
        worst <= 1e-6,
        format!("worst relative error {worst:.3e} over 100 times (limit 1e-6)"),
    )
}

fn equilibrium() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let y = 1.0 - rng.gen::<f64>();
        let x = 1.0 + y;
        let u = 1.0 + (1.0 + C.tau_n / C.tau_c) * y;
        let d = rhs(&NormalizedState::new(y, x), u, &C, None);
        let r = ((x - 1.0) / C.tau_l + 1.0 / C.tau_p) * y / (1.0 + C.tau_p / C.tau_l * y);
        let scale_y = r.abs().max(y / C.tau_p);
        let scale_x = ((u - x) / C.tau_n).abs().max(C.tau_p / C.tau_c * r.abs());
        worst = worst.max(d.dy.abs() / scale_y).max(d.dx.abs() / scale_x);
    }
    Outcome::new(
        worst <= 1e-14,
        format!("worst relative residual {worst:.3e} over 50 y_bar (limit 1e-14)"),
    )
}

/// Worst relative mismatch between central-differenced `z` and `expected(y)`
/// along the phase-extended exact-controller run.
fn z_rate_error(expected: impl Fn(f64) -> f64) -> Result<f64, String> {
    let spec = ModulationSpec::reference();
    let s0 = consistent_initial_state(&spec, &C, 0.0).map_err(|e| e.to_string())?;
    let dt = 0.01e-12;
    let traj = Plant::new(C)
        .with_alpha(ALPHA)
        .integrate(
            s0.with_phase(0.0),
            &FlatInput { spec, constants: C },
            0.0,
            1e-9,
            dt,
        )
        .map_err(|e| e.to_string())?;
    let z: Vec<f64> = traj
        .states
        .iter()
        .map(|s| s.y.ln() + C.tau_p / C.tau_l * s.y - 2.0 / ALPHA * s.phi_opt.unwrap_or(f64::NAN))
        .collect();
    Ok((1..z.len() - 1)
        .map(|k| {
            let fd = (z[k + 1] - z[k - 1]) / (2.0 * dt);
            let e = expected(traj.states[k].y);
            (fd - e).abs() / e.abs()
        })
        .fold(0.0, f64::max))
}

fn z_identity() -> Outcome {
    let stated = z_rate_error(|y| -(1.0 + C.tau_p / C.tau_l * y) / C.tau_p);
    let derived = z_rate_error(|y| -y / C.tau_l);
    match (stated, derived) {
        (Ok(s), Ok(d)) => Outcome::new(
            s <= 1e-3,
            format!("relative error vs -(1+(tau_p/tau_l)y)/tau_p: {s:.3e} (limit 1e-3); vs -y/tau_l: {d:.3e}"),
        ),
        (Err(e), _) | (_, Err(e)) => Outcome::new(false, e),
    }
}

/// Flat inversion written out term by term with the quasi-harmonic
/// derivative approximations substituted.
fn approximate_inversion(eps: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let y = Y_BAR * (1.0 + eps * c);
    let dy = -Y_BAR * eps * OMEGA * s;
    let d2y = -Y_BAR * eps * OMEGA * OMEGA * c;
    let dlogy = -eps * OMEGA * s * (1.0 - eps * c);
    let d2logy = -eps * OMEGA * OMEGA * (c + eps * (2.0 * s * s - 1.0));
    1.0 + (1.0 + C.tau_n / C.tau_c) * y
        + (C.tau_n + C.tau_p + C.tau_n * C.tau_p / C.tau_c) * dy
        + C.tau_n * C.tau_p * d2y
        + C.tau_l * (dlogy + C.tau_n * d2logy)
}

fn polynomial_equivalence() -> Outcome {
    let p = polynomial_coefficients(Y_BAR, OMEGA, &C);
    let mut worst = 0.0f64;
    for i in 0..100 {
        for j in 0..100 {
            let eps = EPS_MAX * i as f64 / 99.0;
            let theta = 2.0 * PI * j as f64 / 100.0;
            let direct = approximate_inversion(eps, theta);
            worst = worst.max((eval_polynomial(&p, eps, theta) - direct).abs() / direct.abs());
        }
    }
    Outcome::new(
        worst <= 1e-12,
        format!("worst relative error {worst:.3e} on 10^4 points (limit 1e-12)"),
    )
}

fn reference_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/reference.conf")
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let outputs: Vec<Result<Vec<u8>, String>> = ["a.csv", "b.csv"]
        .iter()
        .map(|name| {
            let path = dir.path().join(name);
            let status = Command::new(env!("CARGO_BIN_EXE_flatdiode"))
                .args(["run", "--config"])
                .arg(reference_config())
                .arg("--output")
                .arg(&path)
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(String::from_utf8_lossy(&status.stderr).into_owned());
            }
            std::fs::read(&path).map_err(|e| e.to_string())
        })
        .collect();
    match (&outputs[0], &outputs[1]) {
        (Ok(a), Ok(b)) => Outcome::new(
            !a.is_empty() && a == b,
            format!(
                "two runs, {} and {} bytes, identical: {}",
                a.len(),
                b.len(),
                a == b
            ),
        ),
        (Err(e), _) | (_, Err(e)) => Outcome::new(false, e.clone()),
    }
}

fn metric(m: &Metrics, name: &str) -> Option<f64> {
    match name {
        "max_abs_err" => Some(m.max_abs_err),
        "rms_err" => Some(m.rms_err),
        "thd" => m.thd,
        _ => None,
    }
}

/// Compares the reference-scenario metrics against `tests/data/baseline.csv`.
fn regression_baseline() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/baseline.csv");
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => return Outcome::new(false, format!("{}: {e}", path.display())),
    };
    let runs: Vec<(&str, Metrics)> = vec![
        ("exact", reference_run(Controller::Exact).metrics),
        ("static", reference_run(Controller::Static).metrics),
        ("polynomial", reference_run(Controller::Polynomial).metrics),
        (
            "polynomial_tau_n_x2",
            tau_n_doubled().map(|r| r.metrics).unwrap_or(Metrics {
                max_abs_err: f64::NAN,
                rms_err: f64::NAN,
                thd: None,
            }),
        ),
    ];
    let mut failures = Vec::new();
    let mut checked = 0;
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let [scenario, name, kind, value, tol] = f[..] else {
            failures.push(format!("malformed row {line:?}"));
            continue;
        };
        let (value, tol): (f64, f64) = (
            value.parse().unwrap_or(f64::NAN),
            tol.parse().unwrap_or(f64::NAN),
        );
        let measured = runs
            .iter()
            .find(|r| r.0 == scenario)
            .and_then(|r| metric(&r.1, name));
        let ok = match (kind, measured) {
            ("max", Some(m)) => m <= value,
            ("eq", Some(m)) => (m - value).abs() <= tol * value.abs(),
            _ => false,
        };
        checked += 1;
        if !ok {
            failures.push(format!(
                "{scenario}.{name} = {measured:?} vs {kind} {value:e}"
            ));
        }
    }
    Outcome::new(
        failures.is_empty() && checked > 0,
        if failures.is_empty() {
            format!("{checked} baseline metrics reproduced")
        } else {
            failures.join("; ")
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("1 round-trip flat inversion", round_trip),
        ("2 static baseline degradation", static_degradation),
        ("3 polynomial approximation fidelity", polynomial_fidelity),
        ("4 robustness to doubled tau_n", robustness),
        ("5 integrator order", integrator_order),
        ("6 analytic target derivatives", analytic_derivatives),
        ("7 equilibrium identity", equilibrium),
        ("8 z flat-output identity", z_identity),
        ("9 polynomial/bundle equivalence", polynomial_equivalence),
        ("10 determinism of run", determinism),
        ("regression baseline", regression_baseline),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!(
            "{} {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
