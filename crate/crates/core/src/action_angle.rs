//! Action-angle coordinates of the unperturbed oscillator `x'' + V'(x) = 0`.
//!
//! The angle is measured from the right turning point `(β_h, 0)` and runs
//! over `[0, 2π/ω)`; it decreases along the flow. The action is the enclosed
//! area, which for an isochronous potential is `I = 2π h / ω`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::flow::{free_flow, FlowSpec, PhaseState};
use crate::model::{bf_inverse, custom_turning_point, OscillatorSystem, PotentialKind, PotentialSpec};
use crate::numerics::{integrate, integrate_pieces, integrate_turning_offset, QuadratureSpec, Singular, TurningWeight};

/// Canonical coordinates `(θ, I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionAngle {
    pub theta: f64,
    pub action: f64,
}

/// Energy `h` with turning points `-alpha < 0 < beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLevel {
    pub h: f64,
    pub alpha: f64,
    pub beta: f64,
}

fn quad_spec() -> QuadratureSpec {
    QuadratureSpec { abs_tol: 1e-14, rel_tol: 1e-12, max_subdivisions: 2000 }
}

/// Energy belonging to action `I`.
pub fn energy_of_action(omega: f64, action: f64) -> f64 {
    omega * action / (2.0 * PI)
}

pub fn turning_points(p: &PotentialSpec, h: f64) -> Result<EnergyLevel> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("energy must be positive, got {h}")));
    }
    let (alpha, beta) = match p.kind {
        PotentialKind::AsymmetricLinear { a, b } => ((2.0 * h / b).sqrt(), (2.0 * h / a).sqrt()),
        PotentialKind::Harmonic { k } => {
            let r = (2.0 * h / k).sqrt();
            (r, r)
        }
        PotentialKind::BonheureFabry { sigma } => {
            let y = (2.0 * h).sqrt();
            (-bf_inverse(sigma, -y), bf_inverse(sigma, y))
        }
        PotentialKind::Custom { .. } => (custom_turning_point(p, h, -1.0)?, custom_turning_point(p, h, 1.0)?),
    };
    Ok(EnergyLevel { h, alpha, beta })
}

fn gap(p: &PotentialSpec, h: f64) -> impl Fn(f64) -> f64 + '_ {
    move |s| 2.0 * (h - p.v(s))
}

// Integral with the turning point at the `at` end; `2(h - V(s))` is
// evaluated from the exact offset to that end, with `h` taken as `V(e)` so
// the integrand vanishes exactly there.
fn turning(
    p: &PotentialSpec,
    lo: f64,
    hi: f64,
    at: Singular,
    weight: TurningWeight,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let (e, sign) = if at == Singular::Hi { (hi, 1.0) } else { (lo, -1.0) };
    let f = |s: f64, d: f64| 2.0 * p.v_diff(e, s, sign * d);
    Ok(integrate_turning_offset(f, lo, hi, at, weight, spec)?.value)
}

/// `(T₋, T₊, T)`: time spent left and right of the origin and the period.
pub fn period_parts(p: &PotentialSpec, h: f64) -> Result<(f64, f64, f64)> {
    let lvl = turning_points(p, h)?;
    let spec = quad_spec();
    let t_plus = 2.0 * turning(p, 0.0, lvl.beta, Singular::Hi, TurningWeight::InvSqrt, &spec)?;
    let t_minus = 2.0 * turning(p, -lvl.alpha, 0.0, Singular::Lo, TurningWeight::InvSqrt, &spec)?;
    Ok((t_minus, t_plus, t_minus + t_plus))
}

// ∫_x^β ds / sqrt(2(h - V)), i.e. the angle on the upper half plane.
fn upper_angle(p: &PotentialSpec, lvl: &EnergyLevel, x: f64) -> Result<f64> {
    let spec = quad_spec();
    let f = gap(p, lvl.h);
    if x >= lvl.beta {
        return Ok(0.0);
    }
    let inv = TurningWeight::InvSqrt;
    if x >= 0.0 {
        return turning(p, x, lvl.beta, Singular::Hi, inv, &spec);
    }
    let half_plus = turning(p, 0.0, lvl.beta, Singular::Hi, inv, &spec)?;
    if x >= -0.5 * lvl.alpha {
        let inner = integrate(|s| 1.0 / f(s).sqrt(), x, 0.0, &spec)?.value;
        return Ok(half_plus + inner);
    }
    let half_minus = turning(p, -lvl.alpha, 0.0, Singular::Lo, inv, &spec)?;
    if x <= -lvl.alpha {
        return Ok(half_plus + half_minus);
    }
    let outer = turning(p, -lvl.alpha, x, Singular::Lo, inv, &spec)?;
    Ok(half_plus + half_minus - outer)
}

// Near a turning point β - x is known only to an ulp, which costs √ulp in
// the angle. There the time from the turning point is ∫₀^|y| dv / |V'(X(v))|
// with X(v) the turning point of energy h - v²/2.
fn angle_from_velocity(p: &PotentialSpec, lvl: &EnergyLevel, x: f64, y: f64) -> Result<f64> {
    let spec = quad_spec();
    let failed = std::cell::Cell::new(false);
    let integrand = |v: f64| match turning_points(p, lvl.h - 0.5 * v * v) {
        Ok(l) => 1.0 / p.dv(if x >= 0.0 { l.beta } else { -l.alpha }).abs(),
        Err(_) => {
            failed.set(true);
            0.0
        }
    };
    let near = integrate(integrand, 0.0, y.abs(), &spec)?.value;
    if failed.get() {
        return Err(Error::NonConvergent(format!("turning point lost near ({x}, {y})")));
    }
    if x >= 0.0 {
        return Ok(near);
    }
    let inv = TurningWeight::InvSqrt;
    let half_plus = turning(p, 0.0, lvl.beta, Singular::Hi, inv, &spec)?;
    let half_minus = turning(p, -lvl.alpha, 0.0, Singular::Lo, inv, &spec)?;
    Ok(half_plus + half_minus - near)
}

fn angle_at(p: &PotentialSpec, lvl: &EnergyLevel, x: f64, y: f64) -> Result<f64> {
    let period = 2.0 * PI / p.omega();
    let raw = if y * y < 0.02 * lvl.h {
        angle_from_velocity(p, lvl, x, y)?
    } else {
        upper_angle(p, lvl, x)?
    };
    let theta = if y >= 0.0 { raw } else { period - raw };
    Ok(theta.rem_euclid(period))
}

/// Angle alone; cheaper than [`to_action_angle`].
pub(crate) fn angle_of(p: &PotentialSpec, x: f64, y: f64) -> Result<f64> {
    if x == 0.0 && y == 0.0 {
        return Err(Error::OriginState);
    }
    let h = 0.5 * y * y + p.v(x);
    let lvl = turning_points(p, h)?;
    angle_at(p, &lvl, x, y)
}

/// `(θ, I)` of the phase point `(x, y)`.
pub fn to_action_angle(p: &PotentialSpec, x: f64, y: f64) -> Result<ActionAngle> {
    if x == 0.0 && y == 0.0 {
        return Err(Error::OriginState);
    }
    let h = 0.5 * y * y + p.v(x);
    let lvl = turning_points(p, h)?;
    let theta = angle_at(p, &lvl, x, y)?;
    let spec = QuadratureSpec { abs_tol: f64::MIN_POSITIVE, ..quad_spec() };
    let right = turning(p, 0.0, lvl.beta, Singular::Hi, TurningWeight::Sqrt, &spec)?;
    let left = turning(p, -lvl.alpha, 0.0, Singular::Lo, TurningWeight::Sqrt, &spec)?;
    Ok(ActionAngle { theta, action: 2.0 * (left + right) })
}

fn flow_spec() -> FlowSpec {
    FlowSpec { rel_tol: 1e-13, abs_tol: 1e-14, ..FlowSpec::default() }
}

/// Phase point `(x, y)` with the given action-angle coordinates.
///
/// Runs the unperturbed flow from `(β_h, 0)` for time `θ`; the result is
/// that solution's position with the velocity reflected.
pub fn from_action_angle(p: &PotentialSpec, aa: ActionAngle) -> Result<(f64, f64)> {
    if !(aa.action > 0.0 && aa.action.is_finite() && aa.theta.is_finite()) {
        return Err(Error::InvalidInput(format!("need a positive action and finite angle: {aa:?}")));
    }
    let omega = p.omega();
    let lvl = turning_points(p, energy_of_action(omega, aa.action))?;
    let theta = aa.theta.rem_euclid(2.0 * PI / omega);
    if theta == 0.0 {
        return Ok((lvl.beta, 0.0));
    }
    let spec = FlowSpec { abs_tol: 1e-14 * lvl.beta.max(1.0), ..flow_spec() };
    let s = free_flow(p, PhaseState::new(lvl.beta, 0.0, 0.0), theta, &spec)?;
    Ok((s.x, -s.y))
}

/// Period `π/√a + π/√b` of the reference solution.
pub fn reference_period(a: f64, b: f64) -> f64 {
    PI / a.sqrt() + PI / b.sqrt()
}

// θ shifted into [-π/(2√a), T - π/(2√a)).
fn reduce(a: f64, b: f64, theta: f64) -> f64 {
    let q = PI / (2.0 * a.sqrt());
    (theta + q).rem_euclid(reference_period(a, b)) - q
}

/// Solution of `x'' + a x⁺ - b x⁻ = 0` with `x(0) = 1`, `x'(0) = 0`.
#[allow(non_snake_case)]
pub fn reference_C(a: f64, b: f64, theta: f64) -> f64 {
    let (ra, rb) = (a.sqrt(), b.sqrt());
    let phi = reduce(a, b, theta);
    let q = PI / (2.0 * ra);
    if phi <= q {
        (ra * phi).cos()
    } else {
        -(ra / rb) * (rb * (phi - q)).sin()
    }
}

/// Derivative of [`reference_C`].
#[allow(non_snake_case)]
pub fn reference_C_prime(a: f64, b: f64, theta: f64) -> f64 {
    let (ra, rb) = (a.sqrt(), b.sqrt());
    let phi = reduce(a, b, theta);
    let q = PI / (2.0 * ra);
    if phi <= q {
        -ra * (ra * phi).sin()
    } else {
        -ra * (rb * (phi - q)).cos()
    }
}

/// Breakpoints for integrating a function of `C(scale · t)` over
/// `[lo, hi]`: the endpoints plus every zero of `C` in between, where its
/// second derivative jumps.
pub fn reference_breakpoints(a: f64, b: f64, scale: f64, lo: f64, hi: f64) -> Vec<f64> {
    let period = reference_period(a, b);
    let q = PI / (2.0 * a.sqrt());
    let mut pts = vec![lo, hi];
    for offset in [q, -q] {
        // zeros of C(scale·t) at t = (offset + k·period)/scale
        let k_lo = ((scale * lo - offset) / period).floor() as i64;
        let k_hi = ((scale * hi - offset) / period).ceil() as i64;
        for k in k_lo..=k_hi {
            let t = (offset + k as f64 * period) / scale;
            if t > lo && t < hi {
                pts.push(t);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + y.abs()));
    pts
}

/// `∫₀^{2π} w(ϑ) C(scale · ϑ) dϑ`, split at the kinks of `C`.
pub fn c_weighted_integral<W: Fn(f64) -> f64>(a: f64, b: f64, scale: f64, w: W) -> Result<f64> {
    let pts = reference_breakpoints(a, b, scale, 0.0, 2.0 * PI);
    let spec = QuadratureSpec { abs_tol: 1e-13, rel_tol: 1e-12, max_subdivisions: 4000 };
    Ok(integrate_pieces(|s| w(s) * reference_C(a, b, scale * s), &pts, &spec)?.value)
}

/// Leading term `sqrt(ω/(π a)) · sqrt(I) · C(θ)` of the position.
pub fn xbar(sys: &OscillatorSystem, aa: ActionAngle) -> f64 {
    let (a, b) = (sys.a(), sys.b());
    (sys.omega / (PI * a)).sqrt() * aa.action.sqrt() * reference_C(a, b, aa.theta)
}

/// `x(θ, I) - xbar(θ, I)`.
#[allow(non_snake_case)]
pub fn remainder_X(sys: &OscillatorSystem, aa: ActionAngle) -> Result<f64> {
    let (x, _) = from_action_angle(&sys.potential, aa)?;
    Ok(x - xbar(sys, aa))
}
