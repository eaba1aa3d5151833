//! Return maps on the section `θ = 0` at high energy and their first-order
//! asymptotics.
//!
//! The action variable of the exchanged system is `H = I + Ψ` with
//! `Ψ = (2π/ω)(G(x) - x f(t))`; it is scaled as `ρ = ε² H`. Every return
//! starts with `ε = H₀^{-1/2}`, so `ρ₀ = 1`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::action_angle::{c_weighted_integral, energy_of_action, to_action_angle, turning_points};
use crate::error::{Error, Result};
use crate::flow::{angle_return, FlowSpec, PhaseState};
use crate::model::{eval_G, OscillatorSystem};
use crate::numerics::fd_derivative;

/// A point of the scaled section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledCoords {
    pub t0: f64,
    pub rho: f64,
    pub eps: f64,
}

/// One measured return to the section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnRecord {
    pub t0: f64,
    pub t1: f64,
    pub rho0: f64,
    pub rho1: f64,
    pub elapsed: f64,
    pub eps: f64,
}

impl ReturnRecord {
    pub fn start(&self) -> ScaledCoords {
        ScaledCoords { t0: self.t0, rho: self.rho0, eps: self.eps }
    }

    pub fn end(&self) -> ScaledCoords {
        ScaledCoords { t0: self.t1, rho: self.rho1, eps: self.eps }
    }
}

/// `H = I + (2π/ω)(G(x) - x f(t))` at a phase point.
pub fn exchanged_action(sys: &OscillatorSystem, s: PhaseState) -> Result<f64> {
    let aa = to_action_angle(&sys.potential, s.x, s.y)?;
    let psi = 2.0 * PI / sys.omega * (eval_G(&sys.perturbation, s.x)? - s.x * sys.forcing.eval(s.t));
    Ok(aa.action + psi)
}

fn section_return(sys: &OscillatorSystem, t0: f64, i0: f64, revolutions: usize, spec: &FlowSpec) -> Result<ReturnRecord> {
    if !(i0 >= 100.0 && i0.is_finite()) {
        return Err(Error::InvalidInput(format!("initial action must be at least 100, got {i0}")));
    }
    if !t0.is_finite() {
        return Err(Error::InvalidInput(format!("section time must be finite, got {t0}")));
    }
    let lvl = turning_points(&sys.potential, energy_of_action(sys.omega, i0))?;
    let s0 = PhaseState::new(lvl.beta, 0.0, t0);
    let h0 = exchanged_action(sys, s0)?;
    if h0 <= 0.0 {
        return Err(Error::Domain(format!("exchanged action {h0} is not positive")));
    }
    let eps = h0.powf(-0.5);
    let (end, elapsed) = angle_return(sys, s0, revolutions, spec)?;
    let h1 = exchanged_action(sys, end)?;
    Ok(ReturnRecord { t0, t1: end.t, rho0: eps * eps * h0, rho1: eps * eps * h1, elapsed, eps })
}

/// Return after `n` revolutions when `ω = n/m`; the unperturbed return time
/// is `2πm`.
pub fn resonant_return(
    sys: &OscillatorSystem,
    mq: (u64, u64),
    t0: f64,
    i0: f64,
    spec: &FlowSpec,
) -> Result<ReturnRecord> {
    let (m, n) = mq;
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput(format!("resonance ({m}, {n}) needs positive integers")));
    }
    if ((n as f64 / m as f64) - sys.omega).abs() > 1e-9 * sys.omega {
        return Err(Error::InvalidInput(format!("ω = {} is not {n}/{m}", sys.omega)));
    }
    section_return(sys, t0, i0, n as usize, spec)
}

/// Return after a single revolution; the unperturbed return time is `2π/ω`.
pub fn nonresonant_return(sys: &OscillatorSystem, t0: f64, i0: f64, spec: &FlowSpec) -> Result<ReturnRecord> {
    section_return(sys, t0, i0, 1, spec)
}

fn g_jump(sys: &OscillatorSystem) -> f64 {
    sys.perturbation.g_plus / sys.a() - sys.perturbation.g_minus / sys.b()
}

/// `(l₁(t₀), l₂(t₀))` of the resonant map.
pub fn asymptotic_l1l2(sys: &OscillatorSystem, mq: (u64, u64), t0: f64) -> Result<(f64, f64)> {
    let (a, b) = (sys.a(), sys.b());
    let mf = mq.0 as f64;
    let f = &sys.forcing;
    let (conv_f, conv_df) = if f.is_zero() {
        (0.0, 0.0)
    } else {
        (
            c_weighted_integral(a, b, mf, |s| f.eval(t0 + mf * s))?,
            c_weighted_integral(a, b, mf, |s| f.derivative(t0 + mf * s))?,
        )
    };
    Ok((2.0 * sys.omega * g_jump(sys) - conv_f / a.sqrt(), conv_df))
}

/// `(Σ₁, Σ₂)` of the non-resonant map at `(t₀, ρ₀)`.
pub fn nonresonant_sigma(sys: &OscillatorSystem, t0: f64, rho0: f64) -> Result<(f64, f64)> {
    if !(rho0 > 0.0) {
        return Err(Error::InvalidInput(format!("rho0 must be positive, got {rho0}")));
    }
    let (a, b, w) = (sys.a(), sys.b(), sys.omega);
    let f = &sys.forcing;
    let (conv_f, conv_df) = if f.is_zero() {
        (0.0, 0.0)
    } else {
        let conv_df = if f.degree() == 0 { 0.0 } else { c_weighted_integral(a, b, 1.0 / w, |s| f.derivative(t0 + s / w))? };
        (c_weighted_integral(a, b, 1.0 / w, |s| f.eval(t0 + s / w))?, conv_df)
    };
    let pre = w.powf(-1.5) * PI.sqrt();
    let s1 = pre / rho0.sqrt() * (2.0 * w * g_jump(sys) - conv_f / a.sqrt());
    let s2 = 2.0 * pre * (rho0 / a).sqrt() * conv_df;
    Ok((s1, s2))
}

/// `∫₀^{2π} ∂Σ₁/∂ρ₀ dt₀` in closed form.
pub fn averaged_twist(sys: &OscillatorSystem, rho0: f64) -> f64 {
    let (a, b) = (sys.a(), sys.b());
    let bracket = g_jump(sys) - sys.forcing.mean() * (1.0 / a - 1.0 / b);
    if bracket == 0.0 {
        return 0.0;
    }
    -2.0 * PI.powf(1.5) * sys.omega.powf(-0.5) * rho0.powf(-1.5) * bracket
}

/// The same integral from finite differences of [`nonresonant_sigma`] in
/// `ρ₀`, summed over `n_t0` equally spaced section times.
pub fn twist_integral_fd(sys: &OscillatorSystem, rho0: f64, n_t0: usize) -> Result<f64> {
    if n_t0 == 0 || !(rho0 > 0.0) {
        return Err(Error::InvalidInput("need n_t0 ≥ 1 and rho0 > 0".into()));
    }
    let dt = 2.0 * PI / n_t0 as f64;
    let parts: Vec<Result<f64>> = (0..n_t0)
        .into_par_iter()
        .map(|k| {
            let t0 = k as f64 * dt;
            let cell = std::cell::Cell::new(None);
            let d = fd_derivative(
                |r| match nonresonant_sigma(sys, t0, r) {
                    Ok((s1, _)) => s1,
                    Err(e) => {
                        cell.set(Some(e));
                        f64::NAN
                    }
                },
                rho0,
                1,
                0.05 * rho0,
            )?;
            match cell.into_inner() {
                Some(e) => Err(e),
                None => Ok(d.value),
            }
        })
        .collect();
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(total * dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapMode {
    Resonant { m: u64, n: u64 },
    Nonresonant,
}

/// One `(t₀, I₀)` entry of a [`ConvergenceTable`]. Deviations are raw,
/// not divided by `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub t0: f64,
    pub i0: f64,
    pub eps: f64,
    pub measured_dt: f64,
    pub predicted_dt: f64,
    pub measured_drho: f64,
    pub predicted_drho: f64,
    /// `max(|Δt error|, |Δρ error|) / ε`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub mode: MapMode,
    /// Sorted by `(t0, I0)`.
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub const CSV_HEADER: &'static str = "t0,I0,eps,measured_dt,predicted_dt,measured_drho,predicted_drho,residual";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.t0, r.i0, r.eps, r.measured_dt, r.predicted_dt, r.measured_drho, r.predicted_drho, r.residual
            );
        }
        out
    }

    /// Rows of one section time, in ladder order.
    pub fn ladder(&self, t0: f64) -> Vec<&ConvergenceRow> {
        self.rows.iter().filter(|r| r.t0 == t0).collect()
    }

    /// Every ladder has strictly decreasing residuals, except that rungs
    /// already below `floor` only need to stay below it.
    pub fn residuals_decreasing(&self, floor: f64) -> bool {
        let mut t0s: Vec<f64> = self.rows.iter().map(|r| r.t0).collect();
        t0s.dedup();
        t0s.iter().all(|&t0| {
            self.ladder(t0).windows(2).all(|w| {
                let (prev, next) = (w[0].residual, w[1].residual);
                if prev <= floor {
                    next <= floor
                } else {
                    next < prev
                }
            })
        })
    }
}

fn convergence_row(sys: &OscillatorSystem, mode: MapMode, t0: f64, i0: f64, spec: &FlowSpec) -> Result<ConvergenceRow> {
    let (rec, base, pdt, pdrho) = match mode {
        MapMode::Resonant { m, n } => {
            let rec = resonant_return(sys, (m, n), t0, i0, spec)?;
            let (l1, l2) = asymptotic_l1l2(sys, (m, n), t0)?;
            let k = m as f64 * PI.sqrt() * sys.omega.powf(-0.5);
            let e = rec.eps;
            let r0 = rec.rho0;
            (rec, 2.0 * PI * m as f64, -e * k * l1 / r0.sqrt(), -2.0 * e * k / sys.a().sqrt() * l2 * r0.sqrt())
        }
        MapMode::Nonresonant => {
            let rec = nonresonant_return(sys, t0, i0, spec)?;
            let (s1, s2) = nonresonant_sigma(sys, t0, rec.rho0)?;
            (rec, 2.0 * PI / sys.omega, -rec.eps * s1, -rec.eps * s2)
        }
    };
    let mdt = rec.t1 - rec.t0 - base;
    let mdrho = rec.rho1 - rec.rho0;
    let residual = (mdt - pdt).abs().max((mdrho - pdrho).abs()) / rec.eps;
    Ok(ConvergenceRow {
        t0,
        i0,
        eps: rec.eps,
        measured_dt: mdt,
        predicted_dt: pdt,
        measured_drho: mdrho,
        predicted_drho: pdrho,
        residual,
    })
}

/// Measured returns against the first-order map for every `(t₀, I₀)`.
/// The ladder must be increasing with at least three rungs.
pub fn verify_map_asymptotics(
    sys: &OscillatorSystem,
    mode: MapMode,
    t0_grid: &[f64],
    i0_ladder: &[f64],
    spec: &FlowSpec,
) -> Result<ConvergenceTable> {
    if i0_ladder.len() < 3 {
        return Err(Error::InvalidInput(format!("the action ladder needs at least 3 rungs, got {}", i0_ladder.len())));
    }
    if i0_ladder.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("the action ladder must be strictly increasing".into()));
    }
    if t0_grid.is_empty() {
        return Err(Error::InvalidInput("empty t0 grid".into()));
    }
    spec.validate()?;
    let mut t0s = t0_grid.to_vec();
    t0s.sort_by(f64::total_cmp);
    t0s.dedup();
    let jobs: Vec<(f64, f64)> = t0s.iter().flat_map(|&t0| i0_ladder.iter().map(move |&i0| (t0, i0))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(t0, i0)| convergence_row(sys, mode, t0, i0, spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable { mode, rows })
}
