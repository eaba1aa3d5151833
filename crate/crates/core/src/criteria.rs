//! Frequency classification and the boundedness conditions built on the
//! convolution `Φ_f(θ) = ∫₀^{2π} f(θ + m t) C(m t) dt`.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use crate::action_angle::c_weighted_integral;
use crate::error::{Error, Result};
use crate::model::{ForcingSpec, OscillatorSystem};
use crate::numerics::{find_root, RootSpec};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_Q_MAX: u64 = 10_000;
/// Base grid for extrema and zero scans.
pub const GRID_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrequencyClass {
    /// `ω = n/m` in lowest terms.
    Rational { m: u64, n: u64 },
    /// No convergent within budget; the `(p, q)` convergents that were tried.
    Irrational { convergents: Vec<(u64, u64)> },
}

/// Continued-fraction policy: the first convergent `p/q` with `q ≤ q_max`
/// and `|ω - p/q| < tol` makes `ω` rational.
pub fn classify_frequency(omega: f64, tol: f64, q_max: u64) -> FrequencyClass {
    let mut convergents = Vec::new();
    if !(omega > 0.0 && omega.is_finite()) {
        return FrequencyClass::Irrational { convergents };
    }
    let (mut p0, mut q0, mut p1, mut q1) = (1u64, 0u64, omega.floor() as u64, 1u64);
    let mut rest = omega - omega.floor();
    loop {
        if q1 > q_max {
            break;
        }
        convergents.push((p1, q1));
        if (omega - p1 as f64 / q1 as f64).abs() < tol {
            let g = gcd(p1, q1);
            return FrequencyClass::Rational { m: q1 / g, n: p1 / g };
        }
        if rest <= 0.0 {
            break;
        }
        let inv = 1.0 / rest;
        let a = inv.floor();
        rest = inv - a;
        if a > u32::MAX as f64 {
            break;
        }
        let a = a as u64;
        let (Some(p2), Some(q2)) = (a.checked_mul(p1).and_then(|v| v.checked_add(p0)), a.checked_mul(q1).and_then(|v| v.checked_add(q0)))
        else {
            break;
        };
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
    }
    FrequencyClass::Irrational { convergents }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Uses the exact ratio of a built-in potential when there is one.
pub fn classify_system(sys: &OscillatorSystem, tol: f64, q_max: u64) -> FrequencyClass {
    match sys.omega_ratio {
        Some((m, n)) => FrequencyClass::Rational { m, n },
        None => classify_frequency(sys.omega, tol, q_max),
    }
}

fn check_m(m: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidInput("m must be at least 1".into()));
    }
    Ok(m as f64)
}

/// `Φ_f(θ)` by direct quadrature.
pub fn phi_f(f: &ForcingSpec, m: u64, a: f64, b: f64, theta: f64) -> Result<f64> {
    let mf = check_m(m)?;
    if f.is_zero() {
        return Ok(0.0);
    }
    c_weighted_integral(a, b, mf, |t| f.eval(theta + mf * t))
}

/// `Φ'_f(θ) = ∫₀^{2π} f'(θ + m t) C(m t) dt`.
pub fn phi_f_prime(f: &ForcingSpec, m: u64, a: f64, b: f64, theta: f64) -> Result<f64> {
    let mf = check_m(m)?;
    if f.degree() == 0 {
        return Ok(0.0);
    }
    c_weighted_integral(a, b, mf, |t| f.derivative(theta + mf * t))
}

/// `Φ_f` through the moments `∫ cos(kmt) C(mt) dt`, `∫ sin(kmt) C(mt) dt`;
/// after construction each evaluation is a short trigonometric sum.
#[derive(Debug, Clone)]
pub struct PhiKernel {
    /// `(α_k, β_k)` with `Φ_f(θ) = Σ α_k cos kθ + β_k sin kθ`.
    coeffs: Vec<(f64, f64)>,
}

impl PhiKernel {
    pub fn new(f: &ForcingSpec, m: u64, a: f64, b: f64) -> Result<Self> {
        let mf = check_m(m)?;
        let (cs, ss) = (f.cos_coeffs(), f.sin_coeffs());
        let mut coeffs = Vec::with_capacity(f.degree() + 1);
        for k in 0..=f.degree() {
            let (ak, bk) = (cs[k], if k == 0 { 0.0 } else { ss[k - 1] });
            if ak == 0.0 && bk == 0.0 {
                coeffs.push((0.0, 0.0));
                continue;
            }
            let kf = k as f64;
            let mc = c_weighted_integral(a, b, mf, |t| (kf * mf * t).cos())?;
            let ms = if k == 0 { 0.0 } else { c_weighted_integral(a, b, mf, |t| (kf * mf * t).sin())? };
            coeffs.push((ak * mc + bk * ms, bk * mc - ak * ms));
        }
        Ok(Self { coeffs })
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let mut acc = self.coeffs[0].0;
        for (k, &(al, be)) in self.coeffs.iter().enumerate().skip(1) {
            let (s, c) = (k as f64 * theta).sin_cos();
            acc += al * c + be * s;
        }
        acc
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &(al, be)) in self.coeffs.iter().enumerate().skip(1) {
            let kf = k as f64;
            let (s, c) = (kf * theta).sin_cos();
            acc += kf * (be * c - al * s);
        }
        acc
    }

    /// `Φ_f` does not depend on `θ`.
    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().skip(1).all(|&(al, be)| al == 0.0 && be == 0.0)
    }

    fn scale(&self) -> f64 {
        self.coeffs.iter().map(|&(al, be)| al.abs() + be.abs()).sum()
    }
}

fn grid(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| 2.0 * PI * k as f64 / n as f64)
}

// min and max of Φ over the circle: grid, then roots of Φ' around the best
// grid points
fn phi_range(k: &PhiKernel) -> Result<(f64, f64)> {
    if k.is_constant() {
        let c = k.eval(0.0);
        return Ok((c, c));
    }
    let h = 2.0 * PI / GRID_POINTS as f64;
    let vals: Vec<f64> = grid(GRID_POINTS).map(|t| k.eval(t)).collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let spec = RootSpec { abs_tol: 1e-14, max_iters: 200 };
    for i in 0..GRID_POINTS {
        let prev = vals[(i + GRID_POINTS - 1) % GRID_POINTS];
        let next = vals[(i + 1) % GRID_POINTS];
        let v = vals[i];
        lo = lo.min(v);
        hi = hi.max(v);
        let is_ext = (v >= prev && v >= next) || (v <= prev && v <= next);
        if !is_ext {
            continue;
        }
        let t = i as f64 * h;
        let (a, b) = (t - h, t + h);
        let (da, db) = (k.derivative(a), k.derivative(b));
        if da == 0.0 || db == 0.0 || da.signum() == db.signum() {
            continue;
        }
        let r = find_root(|s| k.derivative(s), a, b, &spec)?;
        let v = k.eval(r);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// A zero of `Φ_f` with the slope there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroSetEntry {
    pub theta: f64,
    pub phi_prime: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSet {
    pub entries: Vec<ZeroSetEntry>,
    /// `Φ_f ≡ 0`: every `θ` is a zero.
    pub degenerate: bool,
}

/// Zeros of `Φ_f` in `[0, 2π)` found from sign changes on the base grid.
/// Tangential zeros between grid points are not detected.
#[allow(non_snake_case)]
pub fn zero_set_A(f: &ForcingSpec, m: u64, a: f64, b: f64) -> Result<ZeroSet> {
    let k = PhiKernel::new(f, m, a, b)?;
    zeros_of(&k)
}

fn zeros_of(k: &PhiKernel) -> Result<ZeroSet> {
    let scale = k.scale();
    if scale == 0.0 {
        return Ok(ZeroSet { entries: vec![], degenerate: true });
    }
    if k.is_constant() {
        return Ok(ZeroSet { entries: vec![], degenerate: false });
    }
    let spec = RootSpec { abs_tol: 1e-14, max_iters: 200 };
    let h = 2.0 * PI / GRID_POINTS as f64;
    let mut entries = Vec::new();
    for i in 0..GRID_POINTS {
        let (t0, t1) = (i as f64 * h, (i + 1) as f64 * h);
        let (v0, v1) = (k.eval(t0), k.eval(t1));
        let theta = if v0 == 0.0 {
            t0
        } else if v0.signum() != v1.signum() && v1 != 0.0 {
            find_root(|s| k.eval(s), t0, t1, &spec)?
        } else {
            continue;
        };
        let theta = theta.rem_euclid(2.0 * PI);
        entries.push(ZeroSetEntry { theta, phi_prime: k.derivative(theta) });
    }
    Ok(ZeroSet { entries, degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    No,
    EqualityWithinTol,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::EqualityWithinTol => "equality_within_tol",
        })
    }
}

/// Outcome of the boundedness checks. The resonant and non-resonant fields
/// are filled by the respective check only.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub frequency: FrequencyClass,
    pub phi_min: f64,
    pub phi_max: f64,
    pub rc_lhs_range: Option<(f64, f64)>,
    pub rc_rhs: Option<f64>,
    pub rc_holds: Option<Verdict>,
    pub nrc_lhs: Option<f64>,
    pub nrc_rhs: Option<f64>,
    pub nrc_holds: Option<Verdict>,
    pub zero_set: Vec<ZeroSetEntry>,
    pub phi_degenerate: bool,
}

impl ConditionReport {
    /// The verdict of whichever branch ran.
    pub fn verdict(&self) -> Option<Verdict> {
        self.rc_holds.or(self.nrc_holds)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match &self.frequency {
            FrequencyClass::Rational { m, n } => {
                let _ = writeln!(s, "frequency: rational, omega = {n}/{m} (resonant branch)");
            }
            FrequencyClass::Irrational { convergents } => {
                let last = convergents.last().map(|(p, q)| format!("{p}/{q}")).unwrap_or_else(|| "-".into());
                let _ = writeln!(s, "frequency: irrational within budget, last convergent {last} (non-resonant branch)");
            }
        }
        if let (Some((lo, hi)), Some(rhs), Some(v)) = (self.rc_lhs_range, self.rc_rhs, self.rc_holds) {
            let _ = writeln!(s, "phi range: [{:.12e}, {:.12e}]", self.phi_min, self.phi_max);
            let _ = writeln!(s, "L = sqrt(b)(sqrt(a)+sqrt(b)) phi ranges over [{lo:.12e}, {hi:.12e}]");
            let _ = writeln!(s, "4[b g(+inf) - a g(-inf)] = {rhs:.12e}");
            let _ = writeln!(s, "resonant condition holds: {v}");
            if self.phi_degenerate {
                let _ = writeln!(s, "phi vanishes identically");
            } else {
                let _ = writeln!(s, "zeros of phi: {}", self.zero_set.len());
                for z in &self.zero_set {
                    let _ = writeln!(s, "  theta = {:.12}, phi' = {:.6e}", z.theta, z.phi_prime);
                }
            }
        }
        if let (Some(lhs), Some(rhs), Some(v)) = (self.nrc_lhs, self.nrc_rhs, self.nrc_holds) {
            let _ = writeln!(s, "(b - a)[f] = {lhs:.12e}");
            let _ = writeln!(s, "b g(+inf) - a g(-inf) = {rhs:.12e}");
            let _ = writeln!(s, "non-resonant condition holds: {v}");
        }
        let conclusion = match self.verdict() {
            Some(Verdict::Yes) => "all solutions are bounded by the theorem",
            Some(Verdict::No) => "condition fails; the theorem gives no conclusion",
            Some(Verdict::EqualityWithinTol) => "borderline; numerically indistinguishable from the excluded case",
            None => "no condition evaluated",
        };
        let _ = writeln!(s, "verdict: {conclusion}");
        s
    }

    /// One row per zero of `Φ_f`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,phi_prime\n");
        for z in &self.zero_set {
            let _ = writeln!(s, "{:e},{:e}", z.theta, z.phi_prime);
        }
        s
    }
}

fn blank(frequency: FrequencyClass) -> ConditionReport {
    ConditionReport {
        frequency,
        phi_min: 0.0,
        phi_max: 0.0,
        rc_lhs_range: None,
        rc_rhs: None,
        rc_holds: None,
        nrc_lhs: None,
        nrc_rhs: None,
        nrc_holds: None,
        zero_set: vec![],
        phi_degenerate: false,
    }
}

/// The resonant condition for `ω = n/m`: `4[b g(+∞) - a g(-∞)]` must stay
/// out of the range of `L = √b(√a + √b) Φ_f` by more than `tol` (relative to
/// the size of the numbers involved).
pub fn check_resonant(sys: &OscillatorSystem, mq: (u64, u64), tol: f64) -> Result<ConditionReport> {
    let (m, n) = mq;
    let (a, b) = (sys.a(), sys.b());
    if ((n as f64 / m as f64) - sys.omega).abs() > 1e-9 * sys.omega {
        return Err(Error::InvalidInput(format!("ω = {} is not {n}/{m}", sys.omega)));
    }
    let kernel = PhiKernel::new(&sys.forcing, m, a, b)?;
    let (phi_min, phi_max) = phi_range(&kernel)?;
    let c = b.sqrt() * (a.sqrt() + b.sqrt());
    let (lo, hi) = (c * phi_min, c * phi_max);
    let g = &sys.perturbation;
    let rhs = 4.0 * (b * g.g_plus - a * g.g_minus);
    let margin = tol * rhs.abs().max(lo.abs()).max(hi.abs()).max(1.0);
    let verdict = if rhs > hi + margin || rhs < lo - margin {
        Verdict::Yes
    } else if lo == hi && rhs == lo {
        Verdict::No
    } else if (rhs - hi).abs() <= margin || (rhs - lo).abs() <= margin {
        Verdict::EqualityWithinTol
    } else {
        Verdict::No
    };
    let zeros = zeros_of(&kernel)?;
    Ok(ConditionReport {
        phi_min,
        phi_max,
        rc_lhs_range: Some((lo, hi)),
        rc_rhs: Some(rhs),
        rc_holds: Some(verdict),
        zero_set: zeros.entries,
        phi_degenerate: zeros.degenerate,
        ..blank(FrequencyClass::Rational { m, n })
    })
}

/// The non-resonant condition `(b - a)[f] ≠ b g(+∞) - a g(-∞)`. Exact
/// equality fails; a gap within `tol` is borderline.
pub fn check_nonresonant(sys: &OscillatorSystem, tol: f64) -> Result<ConditionReport> {
    let frequency = classify_system(sys, tol.min(DEFAULT_TOL), DEFAULT_Q_MAX);
    check_nonresonant_as(sys, frequency, tol)
}

fn check_nonresonant_as(sys: &OscillatorSystem, frequency: FrequencyClass, tol: f64) -> Result<ConditionReport> {
    if let FrequencyClass::Rational { m, n } = frequency {
        return Err(Error::InvalidInput(format!("ω = {n}/{m} is rational; use the resonant check")));
    }
    let (a, b) = (sys.a(), sys.b());
    let g = &sys.perturbation;
    let lhs = (b - a) * sys.forcing.mean();
    let rhs = b * g.g_plus - a * g.g_minus;
    let gap = (lhs - rhs).abs();
    let verdict = if gap == 0.0 {
        Verdict::No
    } else if gap <= tol * lhs.abs().max(rhs.abs()).max(1.0) {
        Verdict::EqualityWithinTol
    } else {
        Verdict::Yes
    };
    Ok(ConditionReport { nrc_lhs: Some(lhs), nrc_rhs: Some(rhs), nrc_holds: Some(verdict), ..blank(frequency) })
}

/// Classifies `ω` and runs the matching check.
pub fn check_conditions(sys: &OscillatorSystem, tol: f64, q_max: u64) -> Result<ConditionReport> {
    match classify_system(sys, DEFAULT_TOL, q_max) {
        FrequencyClass::Rational { m, n } => check_resonant(sys, (m, n), tol),
        irr => check_nonresonant_as(sys, irr, tol),
    }
}
