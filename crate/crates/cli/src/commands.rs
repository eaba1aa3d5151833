use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use isochron_core::criteria::{check_conditions, classify_system, FrequencyClass, PhiKernel, Verdict, DEFAULT_Q_MAX, DEFAULT_TOL};
use isochron_core::diagnostics::{sweep, verdicts_to_csv, Classification, SweepConfig};
use isochron_core::flow::{strobe_orbit, FlowSpec, PhaseState};
use isochron_core::model::{check_hypotheses, OscillatorSystem};
use isochron_core::poincare::{nonresonant_return, resonant_return, verify_map_asymptotics, ConvergenceTable, MapMode};

use crate::config::{Command, Section};
use crate::output::write_atomic;
use crate::CliError;

pub struct Context<'a> {
    pub system: &'a OscillatorSystem,
    pub params: &'a Section,
    pub out_dir: &'a Path,
    pub tol: Option<f64>,
}

/// What a finished command reports: its exit code and a summary for stdout.
pub struct Outcome {
    pub code: u8,
    pub summary: String,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Self { code: 0, summary }
    }
}

const FLOW_KEYS: [&str; 3] = ["rel_tol", "abs_tol", "max_step"];

fn flow_spec(p: &Section) -> Result<FlowSpec, CliError> {
    let d = FlowSpec::default();
    let spec = FlowSpec {
        rel_tol: p.get_or("rel_tol", d.rel_tol)?,
        abs_tol: p.get_or("abs_tol", d.abs_tol)?,
        max_step: p.get_or("max_step", d.max_step)?,
        ..d
    };
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(spec)
}

fn allowed<'k>(own: &[&'k str], flow: bool) -> Vec<&'k str> {
    let mut v = own.to_vec();
    if flow {
        v.extend(FLOW_KEYS);
    }
    v
}

fn positive_count(p: &Section, key: &str, default: usize) -> Result<usize, CliError> {
    let n = p.get_or(key, default)?;
    if n == 0 {
        return Err(CliError::Config(format!("'{key}' must be at least 1")));
    }
    Ok(n)
}

fn frequency(sys: &OscillatorSystem, p: &Section) -> Result<FrequencyClass, CliError> {
    Ok(classify_system(sys, DEFAULT_TOL, p.get_or("q_max", DEFAULT_Q_MAX)?))
}

fn t0_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

pub fn run(cmd: Command, cx: &Context) -> Result<Outcome, CliError> {
    match cmd {
        Command::Check => check(cx),
        Command::Simulate => simulate(cx),
        Command::Poincare => poincare(cx),
        Command::Phi => phi(cx),
        Command::Sweep => sweep_cmd(cx),
        Command::Verify => verify(cx),
    }
}

fn check(cx: &Context) -> Result<Outcome, CliError> {
    let p = cx.params;
    p.reject_unknown("command", &["tol", "q_max"])?;
    let tol = match cx.tol {
        Some(t) => t,
        None => p.get_or("tol", DEFAULT_TOL)?,
    };
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(CliError::Config(format!("tolerance must be finite and non-negative, got {tol}")));
    }
    let q_max = p.get_or("q_max", DEFAULT_Q_MAX)?;
    let report = check_conditions(cx.system, tol, q_max)?;

    let mut text = report.to_text();
    text.push_str("hypotheses:\n");
    for c in check_hypotheses(cx.system).checks {
        let mark = if c.passed { "ok" } else { "FAILED" };
        let note = if c.heuristic { " (heuristic)" } else { "" };
        let _ = writeln!(text, "  {}: {mark}{note}, {}", c.name, c.detail);
    }
    write_atomic(cx.out_dir, "check_report.txt", &text)?;
    write_atomic(cx.out_dir, "zero_set.csv", &report.to_csv())?;
    let code = match report.verdict() {
        Some(Verdict::Yes) => 0,
        Some(Verdict::No) => 4,
        Some(Verdict::EqualityWithinTol) => 5,
        None => return Err(CliError::Numerics("no condition was evaluated".into())),
    };
    Ok(Outcome { code, summary: text })
}

fn simulate(cx: &Context) -> Result<Outcome, CliError> {
    let p = cx.params;
    p.reject_unknown("command", &allowed(&["x0", "y0", "t0", "periods"], true))?;
    let s0 = PhaseState::new(p.get_or("x0", 1.0)?, p.get_or("y0", 0.0)?, p.get_or("t0", 0.0)?);
    let periods = positive_count(p, "periods", 100)?;
    let orbit = strobe_orbit(cx.system, s0, periods, &flow_spec(p)?)?;
    let mut csv = String::from("k,t,x,y,energy\n");
    for (k, s) in std::iter::once(&s0).chain(&orbit.states).enumerate() {
        let _ = writeln!(csv, "{k},{:e},{:e},{:e},{:e}", s.t, s.x, s.y, cx.system.energy(s.x, s.y));
    }
    write_atomic(cx.out_dir, "simulate.csv", &csv)?;
    if orbit.escaped {
        return Err(CliError::Numerics(format!(
            "orbit left the representable range after {} of {periods} periods",
            orbit.states.len()
        )));
    }
    Ok(Outcome::ok(format!("simulate: {periods} stroboscopic samples written to simulate.csv")))
}

fn poincare(cx: &Context) -> Result<Outcome, CliError> {
    let p = cx.params;
    p.reject_unknown("command", &allowed(&["action", "t0_samples", "q_max"], true))?;
    let i0 = p.get_or("action", 1e3)?;
    let n = positive_count(p, "t0_samples", 16)?;
    let spec = flow_spec(p)?;
    let freq = frequency(cx.system, p)?;
    let mut csv = String::from("t0,t1,rho0,rho1,elapsed,eps\n");
    for t0 in t0_grid(n) {
        let r = match freq {
            FrequencyClass::Rational { m, n } => resonant_return(cx.system, (m, n), t0, i0, &spec)?,
            FrequencyClass::Irrational { .. } => nonresonant_return(cx.system, t0, i0, &spec)?,
        };
        let _ = writeln!(csv, "{:e},{:e},{:e},{:e},{:e},{:e}", r.t0, r.t1, r.rho0, r.rho1, r.elapsed, r.eps);
    }
    write_atomic(cx.out_dir, "poincare.csv", &csv)?;
    let kind = match freq {
        FrequencyClass::Rational { m, n } => format!("resonant return map, omega = {n}/{m}"),
        FrequencyClass::Irrational { .. } => "non-resonant return map".to_string(),
    };
    Ok(Outcome::ok(format!("poincare: {kind}, {n} section times at I0 = {i0} written to poincare.csv")))
}

fn phi(cx: &Context) -> Result<Outcome, CliError> {
    let p = cx.params;
    p.reject_unknown("command", &["samples", "m", "q_max"])?;
    let n = positive_count(p, "samples", 64)?;
    let m = match p.get::<u64>("m")? {
        Some(0) => return Err(CliError::Config("'m' must be at least 1".into())),
        Some(m) => m,
        None => match frequency(cx.system, p)? {
            FrequencyClass::Rational { m, .. } => m,
            FrequencyClass::Irrational { .. } => {
                return Err(CliError::Config("omega is not rational within budget; set 'm' explicitly".into()))
            }
        },
    };
    let k = PhiKernel::new(&cx.system.forcing, m, cx.system.a(), cx.system.b())?;
    let mut csv = String::from("theta,phi,phi_prime\n");
    for th in t0_grid(n) {
        let _ = writeln!(csv, "{:e},{:e},{:e}", th, k.eval(th), k.derivative(th));
    }
    write_atomic(cx.out_dir, "phi.csv", &csv)?;
    Ok(Outcome::ok(format!("phi: {n} samples with m = {m} written to phi.csv")))
}

fn sweep_cmd(cx: &Context) -> Result<Outcome, CliError> {
    let p = cx.params;
    p.reject_unknown("command", &allowed(&["periods", "escape_threshold", "plateau_factor"], true))?;
    let grid = SweepConfig::default_grid(cx.system)?;
    let d = SweepConfig::new(grid);
    let cfg = SweepConfig {
        n_periods: p.get_or("periods", d.n_periods)?,
        escape_threshold: p.get_or("escape_threshold", d.escape_threshold)?,
        plateau_factor: p.get_or("plateau_factor", d.plateau_factor)?,
        flow: flow_spec(p)?,
        ..d
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let verdicts = sweep(cx.system, &cfg);
    write_atomic(cx.out_dir, "sweep.csv", &verdicts_to_csv(&verdicts))?;
    let count = |c| verdicts.iter().filter(|v| v.classification == c).count();
    let summary = format!(
        "sweep: {} orbits x {} periods: {} bounded_like, {} escaped, {} undecided; written to sweep.csv",
        verdicts.len(),
        cfg.n_periods,
        count(Classification::BoundedLike),
        count(Classification::Escaped),
        count(Classification::Undecided),
    );
    if let Some(v) = verdicts.iter().find(|v| v.reason.is_some()) {
        return Err(CliError::Numerics(format!(
            "{summary}\norbit from ({}, {}) failed: {}",
            v.initial.x,
            v.initial.y,
            v.reason.as_deref().unwrap_or_default()
        )));
    }
    Ok(Outcome::ok(summary))
}

fn verify(cx: &Context) -> Result<Outcome, CliError> {
    let p = cx.params;
    p.reject_unknown("command", &allowed(&["ladder", "t0_samples", "floor", "q_max"], true))?;
    let ladder = p.list("ladder")?.unwrap_or_else(|| vec![1e2, 1e3, 1e4]);
    let n = positive_count(p, "t0_samples", 4)?;
    let floor = p.get_or("floor", 1e-6)?;
    let mode = match frequency(cx.system, p)? {
        FrequencyClass::Rational { m, n } => MapMode::Resonant { m, n },
        FrequencyClass::Irrational { .. } => MapMode::Nonresonant,
    };
    let table = verify_map_asymptotics(cx.system, mode, &t0_grid(n), &ladder, &flow_spec(p)?)?;
    write_atomic(cx.out_dir, "verify.csv", &table.to_csv())?;
    let decreasing = table.residuals_decreasing(floor);
    let summary = residual_summary(&table, decreasing);
    Ok(Outcome { code: if decreasing { 0 } else { 3 }, summary })
}

fn residual_summary(table: &ConvergenceTable, decreasing: bool) -> String {
    let mut s = String::from("verify: residual by I0 (max over section times)\n");
    let mut ladder: Vec<f64> = table.rows.iter().map(|r| r.i0).collect();
    ladder.sort_by(f64::total_cmp);
    ladder.dedup();
    for i0 in ladder {
        let worst = table.rows.iter().filter(|r| r.i0 == i0).map(|r| r.residual).fold(0.0, f64::max);
        let _ = writeln!(s, "  I0 = {i0:e}: {worst:.6e}");
    }
    let _ = write!(s, "residuals decreasing along every ladder: {}", if decreasing { "yes" } else { "no" });
    s
}
