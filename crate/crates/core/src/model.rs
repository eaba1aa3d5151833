//! The oscillator triple `(V, g, f)` for `x'' + V'(x) + g(x) = f(t)`.
//!
//! Built-in potentials carry closed-form derivatives; custom ones are plain
//! closures. Declared asymptotic data (slopes of `V'` and limits of `g`)
//! travel with the specs and are cross-checked by [`check_hypotheses`].

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{fd_derivative, find_root, integrate, QuadratureSpec, RootSpec};

/// Shared scalar function used by custom specs.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Maximum harmonic degree accepted for a forcing.
pub const MAX_HARMONIC: usize = 64;

#[derive(Clone)]
pub enum PotentialKind {
    /// `V = a x²/2` for `x >= 0`, `b x²/2` for `x < 0`.
    AsymmetricLinear { a: f64, b: f64 },
    /// The algebraic isochronous family with `σ ∈ [0, 1)`.
    BonheureFabry { sigma: f64 },
    /// `V = k x²/2`.
    Harmonic { k: f64 },
    Custom { v: ScalarFn, dv: ScalarFn, d2v: ScalarFn },
}

impl fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AsymmetricLinear { a, b } => write!(f, "AsymmetricLinear({a}, {b})"),
            Self::BonheureFabry { sigma } => write!(f, "BonheureFabry({sigma})"),
            Self::Harmonic { k } => write!(f, "Harmonic({k})"),
            Self::Custom { .. } => write!(f, "Custom"),
        }
    }
}

/// A potential together with its declared slopes `a = V''(+∞)`,
/// `b = V''(-∞)`.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub a_inf: f64,
    pub b_inf: f64,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")))
    }
}

impl PotentialSpec {
    pub fn asymmetric_linear(a: f64, b: f64) -> Result<Self> {
        let (a, b) = (positive("a", a)?, positive("b", b)?);
        Ok(Self { kind: PotentialKind::AsymmetricLinear { a, b }, a_inf: a, b_inf: b })
    }

    pub fn bonheure_fabry(sigma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&sigma) {
            return Err(Error::InvalidInput(format!("sigma must lie in [0, 1), got {sigma}")));
        }
        let r = sigma.sqrt();
        Ok(Self {
            kind: PotentialKind::BonheureFabry { sigma },
            a_inf: 1.0 / ((1.0 + r) * (1.0 + r)),
            b_inf: 1.0 / ((1.0 - r) * (1.0 - r)),
        })
    }

    pub fn harmonic(k: f64) -> Result<Self> {
        let k = positive("k", k)?;
        Ok(Self { kind: PotentialKind::Harmonic { k }, a_inf: k, b_inf: k })
    }

    pub fn custom(v: ScalarFn, dv: ScalarFn, d2v: ScalarFn, a_inf: f64, b_inf: f64) -> Result<Self> {
        Ok(Self {
            kind: PotentialKind::Custom { v, dv, d2v },
            a_inf: positive("a_inf", a_inf)?,
            b_inf: positive("b_inf", b_inf)?,
        })
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self.kind, PotentialKind::Custom { .. })
    }

    /// True when `V''` jumps at the origin, so integrators must stop there.
    pub fn has_kink_at_origin(&self) -> bool {
        matches!(self.kind, PotentialKind::AsymmetricLinear { a, b } if a != b)
    }

    /// `V(x)`.
    pub fn v(&self, x: f64) -> f64 {
        match &self.kind {
            PotentialKind::AsymmetricLinear { a, b } => {
                if x >= 0.0 {
                    0.5 * a * x * x
                } else {
                    0.5 * b * x * x
                }
            }
            PotentialKind::BonheureFabry { sigma } => {
                let y = bf_y(*sigma, x);
                0.5 * y * y
            }
            PotentialKind::Harmonic { k } => 0.5 * k * x * x,
            PotentialKind::Custom { v, .. } => v(x),
        }
    }

    /// `V'(x)`.
    pub fn dv(&self, x: f64) -> f64 {
        match &self.kind {
            PotentialKind::AsymmetricLinear { a, b } => {
                if x >= 0.0 {
                    a * x
                } else {
                    b * x
                }
            }
            PotentialKind::BonheureFabry { sigma } => bf_y(*sigma, x) * bf_dy(*sigma, x),
            PotentialKind::Harmonic { k } => k * x,
            PotentialKind::Custom { dv, .. } => dv(x),
        }
    }

    /// `V''(x)`; the right-hand value at a kink.
    pub fn d2v(&self, x: f64) -> f64 {
        match &self.kind {
            PotentialKind::AsymmetricLinear { a, b } => {
                if x >= 0.0 {
                    *a
                } else {
                    *b
                }
            }
            PotentialKind::BonheureFabry { sigma } => {
                let s = *sigma;
                let dy = bf_dy(s, x);
                let root = bf_root(s, x);
                dy * dy - bf_y(s, x) * s / (root * root * root)
            }
            PotentialKind::Harmonic { k } => *k,
            PotentialKind::Custom { d2v, .. } => d2v(x),
        }
    }

    /// `V(e) - V(s)` where `d = e - s` is known exactly; avoids the
    /// cancellation of the direct difference when `s` is close to `e`.
    pub fn v_diff(&self, e: f64, s: f64, d: f64) -> f64 {
        let same_side = (e >= 0.0) == (s >= 0.0);
        match &self.kind {
            PotentialKind::AsymmetricLinear { a, b } if same_side => {
                let k = if e >= 0.0 { a } else { b };
                0.5 * k * d * (e + s)
            }
            PotentialKind::Harmonic { k } => 0.5 * k * d * (e + s),
            PotentialKind::BonheureFabry { sigma } => {
                let sg = *sigma;
                let (we, ws) = (e + 1.0, s + 1.0);
                let (re, rs) = (bf_root(sg, e), bf_root(sg, s));
                let dy = d * (1.0 - sg * (we + ws) / (re + rs)) / (1.0 - sg);
                0.5 * dy * (bf_y(sg, e) + bf_y(sg, s))
            }
            _ => self.v(e) - self.v(s),
        }
    }

    /// `ω = 2 (1/√a + 1/√b)⁻¹` from the declared slopes.
    pub fn omega(&self) -> f64 {
        2.0 / (1.0 / self.a_inf.sqrt() + 1.0 / self.b_inf.sqrt())
    }

    /// `ω = n/m` exactly, returned as `(m, n)`, when the slopes make that
    /// decidable without floating-point guesswork.
    pub fn exact_omega_ratio(&self) -> Option<(u64, u64)> {
        match self.kind {
            PotentialKind::BonheureFabry { .. } => Some((1, 1)),
            PotentialKind::AsymmetricLinear { .. } | PotentialKind::Harmonic { .. } => {
                let (pa, qa) = rational_sqrt(self.a_inf)?;
                let (pb, qb) = rational_sqrt(self.b_inf)?;
                let n = 2 * pa * pb;
                let m = pa * qb + pb * qa;
                let g = gcd(n, m);
                Some((m / g, n / g))
            }
            PotentialKind::Custom { .. } => None,
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `√v = p/q` with `q <= 1000` when `p²/q²` reproduces `v` exactly.
fn rational_sqrt(v: f64) -> Option<(u64, u64)> {
    let r = v.sqrt();
    (1..=1000u64).find_map(|q| {
        let p = (r * q as f64).round();
        if !(1.0..=1e6).contains(&p) {
            return None;
        }
        let p = p as u64;
        ((p * p) as f64 / (q * q) as f64 == v).then(|| {
            let g = gcd(p, q);
            (p / g, q / g)
        })
    })
}

// V = Y²/2 with Y = (w - S)/(1 - σ), w = x + 1, S = sqrt(1 + σ x (x + 2)).
fn bf_root(sigma: f64, x: f64) -> f64 {
    (1.0 + sigma * x * (x + 2.0)).sqrt()
}

fn bf_y(sigma: f64, x: f64) -> f64 {
    let s = bf_root(sigma, x);
    if x + 1.0 >= 0.0 {
        x * ((x + 2.0) / (x + (1.0 + s)))
    } else {
        (x + (1.0 - s)) / (1.0 - sigma)
    }
}

fn bf_dy(sigma: f64, x: f64) -> f64 {
    let w = x + 1.0;
    let s = bf_root(sigma, x);
    if w >= 0.0 {
        (1.0 + sigma * w * w) / (s * (s + sigma * w))
    } else {
        (s - sigma * w) / ((1.0 - sigma) * s)
    }
}

/// Position where the Bonheure-Fabry `Y` equals `y`.
pub(crate) fn bf_inverse(sigma: f64, y: f64) -> f64 {
    y + sigma * y * y / (1.0 + (1.0 + sigma * y * y).sqrt())
}

/// `V^(deriv)(x)` for `deriv` in `0..=2`.
pub fn eval_potential(p: &PotentialSpec, x: f64, deriv: usize) -> Result<f64> {
    let v = match deriv {
        0 => p.v(x),
        1 => p.dv(x),
        2 => p.d2v(x),
        _ => return Err(Error::InvalidInput(format!("potential derivative order {deriv} outside 0..=2"))),
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("potential derivative {deriv} not finite at x = {x}")))
    }
}

/// `(a, b)`: declared slopes for built-ins, probed limits of `V''` for custom
/// potentials.
pub fn asymptotic_slopes(p: &PotentialSpec) -> Result<(f64, f64)> {
    if p.is_builtin() {
        return Ok((p.a_inf, p.b_inf));
    }
    let probe = |sign: f64| -> Result<f64> {
        let vals: Vec<f64> = [1e4, 1e5, 1e6].iter().map(|&r| p.d2v(sign * r)).collect();
        let last = vals[2];
        let agree = vals.iter().all(|v| v.is_finite() && (v - last).abs() <= 1e-3 * last.abs());
        if agree && last > 0.0 {
            Ok(last)
        } else {
            Err(Error::NonConvergent(format!(
                "V'' probes at {}1e4, 1e5, 1e6 disagree: {vals:?}",
                if sign > 0.0 { "+" } else { "-" }
            )))
        }
    };
    Ok((probe(1.0)?, probe(-1.0)?))
}

/// Limits of `V''` at `±∞` measured by central differences of `V'` at
/// `|x| = 10⁴, 10⁵, 10⁶`, whatever the potential declares. The three probes
/// must agree to `rel_tol`.
pub fn probed_slopes(p: &PotentialSpec, rel_tol: f64) -> Result<(f64, f64)> {
    let probe = |sign: f64| -> Result<f64> {
        let mut vals = Vec::with_capacity(3);
        for r in [1e4, 1e5, 1e6] {
            let x = sign * r;
            vals.push(fd_derivative(|s| p.dv(s), x, 1, 1e-2 * r)?.value);
        }
        let last = vals[2];
        if vals.iter().all(|v| v.is_finite() && (v - last).abs() <= rel_tol * last.abs()) {
            Ok(last)
        } else {
            Err(Error::NonConvergent(format!("slope probes disagree: {vals:?}")))
        }
    };
    Ok((probe(1.0)?, probe(-1.0)?))
}

/// `W(x) = V(x)/V'(x)`, extended by `W(0) = 0`.
#[allow(non_snake_case)]
pub fn eval_W(p: &PotentialSpec, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        p.v(x) / p.dv(x)
    }
}

/// The part of `V` not captured by the asymptotic quadratic `a x²/2`
/// (`x >= 0`) or `b x²/2` (`x < 0`), and its first two derivatives.
#[allow(non_snake_case)]
pub fn eval_Phi_split(p: &PotentialSpec, x: f64, deriv: usize) -> f64 {
    let slope = if x >= 0.0 { p.a_inf } else { p.b_inf };
    match deriv {
        0 => p.v(x) - 0.5 * slope * x * x,
        1 => p.dv(x) - slope * x,
        _ => p.d2v(x) - slope,
    }
}

#[derive(Clone)]
pub enum PerturbationKind {
    Zero,
    /// `g(x) = scale · atan(x)`.
    Arctan { scale: f64 },
    BoundedCustom { g: ScalarFn },
}

impl fmt::Debug for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Arctan { scale } => write!(f, "Arctan({scale})"),
            Self::BoundedCustom { .. } => write!(f, "BoundedCustom"),
        }
    }
}

/// The bounded perturbation `g` with declared limits `g(±∞)`.
#[derive(Clone, Debug)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub g_plus: f64,
    pub g_minus: f64,
}

impl PerturbationSpec {
    pub fn zero() -> Self {
        Self { kind: PerturbationKind::Zero, g_plus: 0.0, g_minus: 0.0 }
    }

    pub fn arctan(scale: f64) -> Result<Self> {
        if !scale.is_finite() {
            return Err(Error::InvalidInput(format!("arctan scale must be finite, got {scale}")));
        }
        Ok(Self { kind: PerturbationKind::Arctan { scale }, g_plus: scale * FRAC_PI_2, g_minus: -scale * FRAC_PI_2 })
    }

    pub fn bounded_custom(g: ScalarFn, g_plus: f64, g_minus: f64) -> Result<Self> {
        if !(g_plus.is_finite() && g_minus.is_finite()) {
            return Err(Error::InvalidInput("declared limits of g must be finite".into()));
        }
        Ok(Self { kind: PerturbationKind::BoundedCustom { g }, g_plus, g_minus })
    }

    pub fn g(&self, x: f64) -> f64 {
        match &self.kind {
            PerturbationKind::Zero => 0.0,
            PerturbationKind::Arctan { scale } => scale * x.atan(),
            PerturbationKind::BoundedCustom { g } => g(x),
        }
    }
}

/// `G(x) = ∫₀ˣ g(s) ds`.
#[allow(non_snake_case)]
pub fn eval_G(g: &PerturbationSpec, x: f64) -> Result<f64> {
    match &g.kind {
        PerturbationKind::Zero => Ok(0.0),
        PerturbationKind::Arctan { scale } => Ok(scale * (x * x.atan() - 0.5 * (x * x).ln_1p())),
        PerturbationKind::BoundedCustom { g } => {
            let spec = QuadratureSpec::with_tol(1e-12);
            let (lo, hi, sign) = if x >= 0.0 { (0.0, x, 1.0) } else { (x, 0.0, -1.0) };
            Ok(sign * integrate(|s| g(s), lo, hi, &spec)?.value)
        }
    }
}

/// A real trigonometric polynomial
/// `f(t) = c₀ + Σ_k (c_k cos kt + s_k sin kt)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ForcingSpec {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl ForcingSpec {
    /// `fourier_cos = [c₀, c₁, ...]`, `fourier_sin = [s₁, s₂, ...]`.
    pub fn new(fourier_cos: Vec<f64>, fourier_sin: Vec<f64>) -> Result<Self> {
        if fourier_cos.iter().chain(&fourier_sin).any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("forcing coefficients must be finite".into()));
        }
        let degree = fourier_cos.len().saturating_sub(1).max(fourier_sin.len());
        if degree > MAX_HARMONIC {
            return Err(Error::InvalidInput(format!(
                "forcing degree {degree} exceeds the supported maximum {MAX_HARMONIC}"
            )));
        }
        let mut cos = fourier_cos;
        let mut sin = fourier_sin;
        cos.resize(degree + 1, 0.0);
        sin.resize(degree, 0.0);
        Ok(Self { cos, sin })
    }

    pub fn zero() -> Self {
        Self { cos: vec![0.0], sin: vec![] }
    }

    pub fn constant(c0: f64) -> Self {
        Self { cos: vec![c0], sin: vec![] }
    }

    /// `amplitude · cos t`.
    pub fn cosine(amplitude: f64) -> Self {
        Self { cos: vec![0.0, amplitude], sin: vec![0.0] }
    }

    pub fn degree(&self) -> usize {
        self.sin.len()
    }

    /// `c₀ .. c_K`.
    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos
    }

    /// `s₁ .. s_K`.
    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin
    }

    pub fn mean(&self) -> f64 {
        self.cos[0]
    }

    pub fn is_zero(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|&c| c == 0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = self.cos[0];
        for k in 1..=self.degree() {
            let (s, c) = (k as f64 * t).sin_cos();
            acc += self.cos[k] * c + self.sin[k - 1] * s;
        }
        acc
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for k in 1..=self.degree() {
            let kf = k as f64;
            let (s, c) = (kf * t).sin_cos();
            acc += kf * (self.sin[k - 1] * c - self.cos[k] * s);
        }
        acc
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: f64, other: &ForcingSpec, beta: f64) -> ForcingSpec {
        let degree = self.degree().max(other.degree());
        let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        ForcingSpec {
            cos: (0..=degree).map(|i| alpha * get(&self.cos, i) + beta * get(&other.cos, i)).collect(),
            sin: (0..degree).map(|i| alpha * get(&self.sin, i) + beta * get(&other.sin, i)).collect(),
        }
    }
}

/// The full system `x'' + V'(x) + g(x) = f(t)`.
#[derive(Clone, Debug)]
pub struct OscillatorSystem {
    pub potential: PotentialSpec,
    pub perturbation: PerturbationSpec,
    pub forcing: ForcingSpec,
    pub omega: f64,
    /// `(m, n)` with `ω = n/m` when known exactly.
    pub omega_ratio: Option<(u64, u64)>,
}

impl OscillatorSystem {
    pub fn new(potential: PotentialSpec, perturbation: PerturbationSpec, forcing: ForcingSpec) -> Self {
        let omega = potential.omega();
        let omega_ratio = potential.exact_omega_ratio();
        Self { potential, perturbation, forcing, omega, omega_ratio }
    }

    /// Same potential with `g = 0`, `f = 0`.
    pub fn unperturbed(potential: PotentialSpec) -> Self {
        Self::new(potential, PerturbationSpec::zero(), ForcingSpec::zero())
    }

    pub fn a(&self) -> f64 {
        self.potential.a_inf
    }

    pub fn b(&self) -> f64 {
        self.potential.b_inf
    }

    /// Right-hand side of `y' = -V'(x) - g(x) + f(t)`.
    pub fn acceleration(&self, x: f64, t: f64) -> f64 {
        -self.potential.dv(x) - self.perturbation.g(x) + self.forcing.eval(t)
    }

    /// Unperturbed energy `y²/2 + V(x)`.
    pub fn energy(&self, x: f64, y: f64) -> f64 {
        0.5 * y * y + self.potential.v(x)
    }
}

/// One line of a [`HypothesisReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Finite sampling cannot establish the property; the check is evidence only.
    pub heuristic: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &'static str, passed: bool, heuristic: bool, detail: String) {
        self.checks.push(HypothesisCheck { name, passed, heuristic, detail });
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.heuristic { " (heuristic)" } else { "" };
            writeln!(f, "{:<22} {}{}  {}", c.name, if c.passed { "pass" } else { "FAIL" }, tag, c.detail)?;
        }
        Ok(())
    }
}

fn log_grid(lo_exp: i32, hi_exp: i32, per_decade: usize) -> Vec<f64> {
    let n = (hi_exp - lo_exp) as usize * per_decade;
    (0..=n).map(|i| 10f64.powf(lo_exp as f64 + i as f64 / per_decade as f64)).collect()
}

// x^p |h^(order)(x)| at |x| ∈ {1e2, 1e3, 1e4} on both sides, via finite
// differences with a step proportional to |x|.
fn decay_profile(h: &dyn Fn(f64) -> f64, order: usize, power: i32, rel_step: f64) -> Result<[[f64; 3]; 2]> {
    let mut out = [[0.0; 3]; 2];
    for (side, sign) in [1.0, -1.0].into_iter().enumerate() {
        for (i, r) in [1e2, 1e3, 1e4].into_iter().enumerate() {
            let x = sign * r;
            let d = fd_derivative(h, x, order, rel_step * r)?;
            out[side][i] = r.powi(power) * d.value.abs();
        }
    }
    Ok(out)
}

fn non_increasing(profile: &[[f64; 3]; 2], floor: f64) -> bool {
    profile.iter().all(|p| p[1] <= p[0] + floor && p[2] <= p[1] + floor)
}

/// Numerical evidence for the standing hypotheses on `V` and `g`.
///
/// Never fails: problems are recorded as failed checks.
pub fn check_hypotheses(sys: &OscillatorSystem) -> HypothesisReport {
    let mut report = HypothesisReport::default();
    let p = &sys.potential;
    let g = &sys.perturbation;

    let v0 = p.v(0.0);
    let dv0 = p.dv(0.0);
    report.push(
        "origin",
        v0.abs() <= 1e-12 && dv0.abs() <= 1e-12,
        false,
        format!("V(0) = {v0:e}, V'(0) = {dv0:e}"),
    );

    let grid = log_grid(-3, 6, 4);
    let mut worst: Option<String> = None;
    for &r in &grid {
        for x in [r, -r] {
            let (v, dv, d2v) = (p.v(x), p.dv(x), p.d2v(x));
            if !(v > 0.0 && dv * x > 0.0 && d2v > 0.0 && d2v.is_finite()) && worst.is_none() {
                worst = Some(format!("at x = {x:e}: V = {v:e}, V' = {dv:e}, V'' = {d2v:e}"));
            }
        }
    }
    report.push(
        "convexity",
        worst.is_none(),
        false,
        worst.unwrap_or_else(|| format!("V > 0, xV' > 0, V'' > 0 on {} points", 2 * grid.len())),
    );

    let slopes = match asymptotic_slopes(p) {
        Ok((a, b)) => {
            let probe_a = p.d2v(1e6);
            let probe_b = p.d2v(-1e6);
            let ok = (probe_a - p.a_inf).abs() <= 1e-3 * p.a_inf
                && (probe_b - p.b_inf).abs() <= 1e-3 * p.b_inf
                && (a - p.a_inf).abs() <= 1e-3 * p.a_inf
                && (b - p.b_inf).abs() <= 1e-3 * p.b_inf;
            (ok, format!("declared ({}, {}), V''(±1e6) = ({probe_a}, {probe_b})", p.a_inf, p.b_inf))
        }
        Err(e) => (false, e.to_string()),
    };
    report.push("slope_limits", slopes.0, false, slopes.1);

    let near: Vec<f64> = log_grid(-6, -3, 4).into_iter().flat_map(|r| [r, -r]).collect();
    let sup_near = near.iter().map(|&x| p.d2v(x).abs()).fold(0.0, f64::max);
    report.push(
        "regular_near_origin",
        sup_near.is_finite(),
        true,
        format!("sup |V''| on 1e-6 <= |x| <= 1e-3 is {sup_near:e}; one-sided limits are not verifiable by sampling"),
    );

    let scale_v = p.a_inf.max(p.b_inf).max(1.0);
    let d2v = |x: f64| p.d2v(x);
    let (ok, detail) = match decay_profile(&d2v, 4, 4, 0.2) {
        Ok(prof) => (
            non_increasing(&prof, 1e-6 * scale_v),
            format!("|x^4 V^(6)| at 1e2, 1e3, 1e4: +{:?} -{:?}", prof[0], prof[1]),
        ),
        Err(e) => (false, e.to_string()),
    };
    report.push("potential_decay", ok, true, detail);

    let sup_g = grid.iter().flat_map(|&r| [g.g(r), g.g(-r)]).map(f64::abs).fold(0.0, f64::max);
    report.push("g_bounded", sup_g.is_finite(), true, format!("sup |g| on the sample grid is {sup_g:e}"));

    let (gp, gm) = (g.g(1e6), g.g(-1e6));
    let limits_ok = (gp - g.g_plus).abs() <= 1e-3 * g.g_plus.abs().max(1.0)
        && (gm - g.g_minus).abs() <= 1e-3 * g.g_minus.abs().max(1.0);
    report.push(
        "g_limits",
        limits_ok,
        false,
        format!("declared ({}, {}), g(±1e6) = ({gp}, {gm})", g.g_plus, g.g_minus),
    );

    let scale_g = g.g_plus.abs().max(g.g_minus.abs()).max(1.0);
    let gfun = |x: f64| g.g(x);
    let (ok, detail) = match decay_profile(&gfun, 6, 6, 0.3) {
        Ok(prof) => (
            non_increasing(&prof, 1e-6 * scale_g),
            format!("|x^6 g^(6)| at 1e2, 1e3, 1e4: +{:?} -{:?}", prof[0], prof[1]),
        ),
        Err(e) => (false, e.to_string()),
    };
    report.push("g_decay", ok, true, detail);

    report
}

/// Turning point of a custom potential on the side given by `sign`.
pub(crate) fn custom_turning_point(p: &PotentialSpec, h: f64, sign: f64) -> Result<f64> {
    let mut hi = 1.0f64;
    while p.v(sign * hi) < h {
        hi *= 2.0;
        if hi > 1e150 {
            return Err(Error::NoBracket { lo: 0.0, hi: sign * hi, f_lo: -h, f_hi: p.v(sign * hi) - h });
        }
    }
    let spec = RootSpec { abs_tol: 1e-15 * hi, max_iters: 400 };
    find_root(|r| p.v(sign * r) - h, 0.0, hi, &spec)
}
