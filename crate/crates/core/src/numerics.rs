//! Numerical kernel: adaptive Gauss-Kronrod quadrature, turning-point
//! quadrature for `1/sqrt(F)` integrands, bracketed root finding and
//! finite-difference derivatives.
//!
//! Everything here is pure; the closures passed in are only ever called from
//! the current thread.

use crate::error::{Error, Result};

/// Tolerances for [`integrate`] and friends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-10, max_subdivisions: 2000 }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = Self { abs_tol, rel_tol, max_subdivisions };
        spec.validate()?;
        Ok(spec)
    }

    /// Same subdivision budget, both tolerances set to `tol`.
    pub fn with_tol(tol: f64) -> Self {
        Self { abs_tol: tol, rel_tol: tol, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "quadrature tolerances must be positive (abs {}, rel {})",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::InvalidInput("max_subdivisions must be at least 1".into()));
        }
        Ok(())
    }
}

/// Tolerances for [`find_root`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSpec {
    pub abs_tol: f64,
    pub max_iters: usize,
}

impl Default for RootSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-12, max_iters: 200 }
    }
}

/// Value of an integral together with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

/// Which end(s) of the interval carry the simple zero of `F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Singular {
    Lo,
    Hi,
    Both,
}

// 15-point Kronrod extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Panel> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut finite = fc.is_finite();
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        finite &= pair.is_finite();
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    if !finite {
        return Err(Error::Domain(format!("integrand not finite on [{lo}, {hi}]")));
    }
    Ok(Panel { lo, hi, value: kronrod * half, error: ((kronrod - gauss) * half).abs() })
}

/// Adaptive quadrature of `f` over `[lo, hi]`.
///
/// The panel with the largest error estimate is bisected until the summed
/// estimate meets `max(abs_tol, rel_tol * |value|)`. Ties are broken by panel
/// order, so results are reproducible bit for bit.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<Quadrature> {
    spec.validate()?;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidInput(format!("integration limits must be finite ({lo}, {hi})")));
    }
    if lo > hi {
        return Err(Error::InvalidInput(format!("integration limits out of order ({lo} > {hi})")));
    }
    if lo == hi {
        return Ok(Quadrature { value: 0.0, error: 0.0, subdivisions: 0 });
    }

    let mut panels = vec![gauss_kronrod(&f, lo, hi)?];
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let target = spec.abs_tol.max(spec.rel_tol * value.abs());
        if error <= target {
            return Ok(Quadrature { value, error, subdivisions: panels.len() });
        }
        if panels.len() >= spec.max_subdivisions {
            return Err(Error::NonConvergent(format!(
                "quadrature on [{lo}, {hi}] stalled at error {error:e} after {} panels (target {target:e})",
                panels.len()
            )));
        }

        // worst panel that can still be split
        let mut worst: Option<usize> = None;
        for (i, p) in panels.iter().enumerate() {
            let splittable = (p.hi - p.lo) > 64.0 * f64::EPSILON * p.lo.abs().max(p.hi.abs()).max(f64::MIN_POSITIVE);
            if splittable && worst.map_or(true, |w| p.error > panels[w].error) {
                worst = Some(i);
            }
        }
        let Some(w) = worst else {
            return Err(Error::NonConvergent(format!(
                "quadrature on [{lo}, {hi}] hit round-off floor at error {error:e}"
            )));
        };
        let p = panels[w];
        let mid = 0.5 * (p.lo + p.hi);
        panels[w] = gauss_kronrod(&f, p.lo, mid)?;
        panels.insert(w + 1, gauss_kronrod(&f, mid, p.hi)?);
    }
}

/// Integral over consecutive pieces `[pts[0], pts[1]], [pts[1], pts[2]], ...`.
///
/// Used for integrands with known kinks (the reference solution `C` is only
/// piecewise smooth).
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, pts: &[f64], spec: &QuadratureSpec) -> Result<Quadrature> {
    let mut total = Quadrature { value: 0.0, error: 0.0, subdivisions: 0 };
    for w in pts.windows(2) {
        let q = integrate(&f, w[0], w[1], spec)?;
        total.value += q.value;
        total.error += q.error;
        total.subdivisions += q.subdivisions;
    }
    Ok(total)
}

/// Shape of a turning-point integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurningWeight {
    /// `1 / sqrt(F)`
    InvSqrt,
    /// `sqrt(F)`
    Sqrt,
}

/// `∫ ds / sqrt(F(s)) ds` over `[lo, hi]` where `F` has a simple zero at the
/// flagged endpoint(s).
///
/// The substitution `s = endpoint ∓ u²` turns the inverse square-root
/// singularity into a smooth integrand in `u`.
pub fn integrate_turning<F: Fn(f64) -> f64>(
    fn_under_sqrt: F,
    lo: f64,
    hi: f64,
    singular_at: Singular,
    spec: &QuadratureSpec,
) -> Result<Quadrature> {
    integrate_turning_offset(|s, _| fn_under_sqrt(s), lo, hi, singular_at, TurningWeight::InvSqrt, spec)
}

/// `∫ sqrt(F(s)) ds` with the same endpoint regularization as
/// [`integrate_turning`]; this is the shape of action (area) integrals.
pub fn integrate_turning_sqrt<F: Fn(f64) -> f64>(
    fn_under_sqrt: F,
    lo: f64,
    hi: f64,
    singular_at: Singular,
    spec: &QuadratureSpec,
) -> Result<Quadrature> {
    integrate_turning_offset(|s, _| fn_under_sqrt(s), lo, hi, singular_at, TurningWeight::Sqrt, spec)
}

/// General form of [`integrate_turning`]: `fun(s, d)` receives the point `s`
/// and its exact distance `d = u²` from the singular endpoint, so callers can
/// evaluate `F` without cancellation right next to its zero.
pub fn integrate_turning_offset<F: Fn(f64, f64) -> f64>(
    fun: F,
    lo: f64,
    hi: f64,
    singular_at: Singular,
    weight: TurningWeight,
    spec: &QuadratureSpec,
) -> Result<Quadrature> {
    if lo > hi {
        return Err(Error::InvalidInput(format!("integration limits out of order ({lo} > {hi})")));
    }
    match singular_at {
        Singular::Both => {
            let mid = 0.5 * (lo + hi);
            let left = one_sided(&fun, lo, mid, lo, weight, spec)?;
            let right = one_sided(&fun, mid, hi, hi, weight, spec)?;
            Ok(Quadrature {
                value: left.value + right.value,
                error: left.error + right.error,
                subdivisions: left.subdivisions + right.subdivisions,
            })
        }
        Singular::Lo => one_sided(&fun, lo, hi, lo, weight, spec),
        Singular::Hi => one_sided(&fun, lo, hi, hi, weight, spec),
    }
}

fn one_sided<F: Fn(f64, f64) -> f64>(
    fun: &F,
    lo: f64,
    hi: f64,
    endpoint: f64,
    weight: TurningWeight,
    spec: &QuadratureSpec,
) -> Result<Quadrature> {
    let len = hi - lo;
    if len == 0.0 {
        return Ok(Quadrature { value: 0.0, error: 0.0, subdivisions: 0 });
    }
    let umax = len.sqrt();
    // s = endpoint ± u², moving into the interval
    let dir = if endpoint == hi { -1.0 } else { 1.0 };
    // below this u the point is within round-off of the zero of F
    let u_floor = 1e-7 * len.max(endpoint.abs()).sqrt();
    let bad = std::cell::Cell::new(None::<f64>);

    let eval = |u: f64| -> Option<f64> {
        let d = u * u;
        let val = fun(endpoint + dir * d, d);
        if val > 0.0 && val.is_finite() {
            Some(match weight {
                TurningWeight::InvSqrt => 2.0 * u / val.sqrt(),
                TurningWeight::Sqrt => 2.0 * u * val.sqrt(),
            })
        } else {
            None
        }
    };
    let integrand = |u: f64| -> f64 {
        match eval(u) {
            Some(v) => v,
            None if u <= u_floor => match eval(u_floor.min(umax)) {
                Some(v) => v,
                None => {
                    bad.set(Some(endpoint + dir * u * u));
                    0.0
                }
            },
            None => {
                if bad.get().is_none() {
                    bad.set(Some(endpoint + dir * u * u));
                }
                0.0
            }
        }
    };
    let q = integrate(integrand, 0.0, umax, spec);
    if let Some(s) = bad.get() {
        return Err(Error::Domain(format!(
            "F(s) <= 0 inside the turning-point interval [{lo}, {hi}] at s = {s}"
        )));
    }
    q
}

/// Bracketed root of `f` in `[lo, hi]` (Brent: inverse quadratic / secant
/// steps guarded by bisection; never leaves the bracket).
pub fn find_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, spec: &RootSpec) -> Result<f64> {
    if !(spec.abs_tol > 0.0) {
        return Err(Error::InvalidInput("root tolerance must be positive".into()));
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(Error::Domain(format!("non-finite function value at bracket [{lo}, {hi}]")));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoBracket { lo, hi, f_lo: fa, f_hi: fb });
    }

    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..spec.max_iters {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * spec.abs_tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::Domain(format!("non-finite function value at x = {b}")));
        }
    }
    Err(Error::NonConvergent(format!(
        "root finder exhausted {} iterations, bracket [{b}, {c}]",
        spec.max_iters
    )))
}

/// Finite-difference derivative with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub value: f64,
    pub error: f64,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn central_difference<F: Fn(f64) -> f64>(f: &F, x: f64, order: usize, step: f64) -> Result<f64> {
    let mut acc = 0.0;
    for j in 0..=order {
        let xj = x + (order as f64 / 2.0 - j as f64) * step;
        let fj = f(xj);
        if !fj.is_finite() {
            return Err(Error::StencilOutOfDomain(xj));
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binomial(order, j) * fj;
    }
    Ok(acc / step.powi(order as i32))
}

/// Central finite difference of order `order` (1..=6) at `x`, refined by two
/// levels of Richardson extrapolation over steps `h, h/2, h/4`.
///
/// Only meant for spot checks of decay hypotheses; the dynamics always use
/// analytic derivatives.
pub fn fd_derivative<F: Fn(f64) -> f64>(f: F, x: f64, order: usize, base_step: f64) -> Result<Derivative> {
    if !(1..=6).contains(&order) {
        return Err(Error::InvalidInput(format!("derivative order {order} outside 1..=6")));
    }
    if !(base_step > 0.0 && base_step.is_finite()) {
        return Err(Error::InvalidInput(format!("base step must be positive, got {base_step}")));
    }
    let d1 = central_difference(&f, x, order, base_step)?;
    let d2 = central_difference(&f, x, order, base_step / 2.0)?;
    let d4 = central_difference(&f, x, order, base_step / 4.0)?;
    // the central stencils have even error expansions in h
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d4 - d2) / 3.0;
    let value = (16.0 * r2 - r1) / 15.0;
    Ok(Derivative { value, error: (value - r2).abs() })
}
