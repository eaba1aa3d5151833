//! Long-horizon orbit experiments: stroboscopic amplitude tracking,
//! escape and growth classification, rotation numbers.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::action_angle::{from_action_angle, ActionAngle};
use crate::error::{Error, Result};
use crate::flow::{FlowSpec, Forced, PhaseState, Stepper};
use crate::model::OscillatorSystem;
use crate::numerics::{find_root, RootSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub initial_grid: Vec<PhaseState>,
    pub n_periods: usize,
    pub escape_threshold: f64,
    /// `bounded_like` needs the sup over the last 20% of periods to be at
    /// most this factor times the sup over the middle 20%.
    pub plateau_factor: f64,
    pub flow: FlowSpec,
}

impl SweepConfig {
    pub fn new(initial_grid: Vec<PhaseState>) -> Self {
        Self { initial_grid, n_periods: 10_000, escape_threshold: 1e6, plateau_factor: 1.05, flow: FlowSpec::default() }
    }

    /// 8 actions log-spaced in `[10, 10⁵]` times 8 equally spaced angles,
    /// action-major, all at `t = 0`.
    pub fn default_grid(sys: &OscillatorSystem) -> Result<Vec<PhaseState>> {
        let period = 2.0 * PI / sys.omega;
        let mut out = Vec::with_capacity(64);
        for i in 0..8 {
            let action = 10f64.powf(1.0 + 4.0 * i as f64 / 7.0);
            for j in 0..8 {
                let theta = period * j as f64 / 8.0;
                let (x, y) = from_action_angle(&sys.potential, ActionAngle { theta, action })?;
                out.push(PhaseState::new(x, y, 0.0));
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_periods < 10 {
            return Err(Error::InvalidInput(format!("n_periods must be at least 10, got {}", self.n_periods)));
        }
        let max_amp = self.initial_grid.iter().map(PhaseState::amplitude).fold(0.0, f64::max);
        if !(self.escape_threshold > max_amp) {
            return Err(Error::InvalidInput(format!(
                "escape threshold {} must exceed the largest initial amplitude {max_amp}",
                self.escape_threshold
            )));
        }
        if !(self.plateau_factor >= 1.0) {
            return Err(Error::InvalidInput("plateau factor must be at least 1".into()));
        }
        self.flow.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    BoundedLike,
    Escaped,
    Undecided,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::BoundedLike => "bounded_like",
            Classification::Escaped => "escaped",
            Classification::Undecided => "undecided",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitVerdict {
    pub initial: PhaseState,
    /// Largest `|x| + |y|` over the stroboscopic samples.
    pub sup_amplitude: f64,
    pub classification: Classification,
    pub growth_exponent: f64,
    /// Forcing periods per revolution; NaN when fewer than two section
    /// crossings were seen.
    pub rotation_number: f64,
    /// Why an orbit ended up undecided, when a failure caused it.
    pub reason: Option<String>,
}

struct Track {
    /// `|x| + |y|` at `t0 + 2πk`, `k = 0, 1, ...`.
    strobe_amplitudes: Vec<f64>,
    escaped: bool,
    /// Times of crossings of the half-line `y = 0, x > 0` in the direction
    /// of the unperturbed motion.
    crossings: Vec<f64>,
}

fn track(sys: &OscillatorSystem, s0: PhaseState, n_periods: usize, threshold: f64, spec: &FlowSpec) -> Result<Track> {
    let mut st = Stepper::new(Forced(sys), s0, 1.0, *spec)?;
    let mut amps = Vec::with_capacity(n_periods + 1);
    amps.push(s0.amplitude());
    let mut crossings = Vec::new();
    let root = RootSpec { abs_tol: 1e-13, max_iters: 200 };
    let mut prev = s0;
    for k in 1..=n_periods {
        let t_end = s0.t + 2.0 * PI * k as f64;
        while st.state().t < t_end {
            let info = match st.step(t_end) {
                Ok(i) => i,
                Err(Error::BlowUp { .. }) => return Ok(Track { strobe_amplitudes: amps, escaped: true, crossings }),
                Err(e) => return Err(e),
            };
            let s = info.state;
            if prev.y > 0.0 && s.y <= 0.0 && (prev.x > 0.0 || s.x > 0.0) {
                let t_c = if s.y == 0.0 {
                    s.t
                } else {
                    let dense = st.dense().expect("an accepted step exists");
                    find_root(|t| dense.eval(t)[1], prev.t, s.t, &root)?
                };
                crossings.push(t_c);
            }
            prev = s;
        }
        let a = st.state().amplitude();
        amps.push(a);
        if a >= threshold {
            return Ok(Track { strobe_amplitudes: amps, escaped: true, crossings });
        }
    }
    Ok(Track { strobe_amplitudes: amps, escaped: false, crossings })
}

fn rotation_from(crossings: &[f64]) -> f64 {
    match crossings {
        [first, .., last] => (last - first) / (2.0 * PI * (crossings.len() - 1) as f64),
        _ => f64::NAN,
    }
}

/// Average number of forcing periods `2π` per revolution around the
/// origin; `1/ω` for the unperturbed oscillator.
pub fn rotation_number(sys: &OscillatorSystem, s0: PhaseState, n_periods: usize, spec: &FlowSpec) -> Result<f64> {
    if s0.x == 0.0 && s0.y == 0.0 {
        return Err(Error::OriginApproach { t: s0.t });
    }
    if n_periods == 0 {
        return Err(Error::InvalidInput("n_periods must be at least 1".into()));
    }
    let tr = track(sys, s0, n_periods, f64::INFINITY, spec)?;
    if tr.escaped {
        return Err(Error::BlowUp { t: f64::NAN, amplitude: f64::INFINITY });
    }
    if tr.crossings.len() < 2 {
        return Err(Error::OriginApproach { t: s0.t + 2.0 * PI * n_periods as f64 });
    }
    Ok(rotation_from(&tr.crossings))
}

/// Least-squares slope of `log A_k` against `log k` over the tail half of
/// the samples, with its `r²`. A flat tail has exponent 0.
pub fn growth_fit(amplitudes: &[f64]) -> Result<(f64, f64)> {
    if amplitudes.len() < 10 {
        return Err(Error::InvalidInput(format!("growth fit needs at least 10 samples, got {}", amplitudes.len())));
    }
    if amplitudes.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidInput("growth fit needs positive finite amplitudes".into()));
    }
    let n = amplitudes.len();
    let pts: Vec<(f64, f64)> = (n / 2..n).map(|i| (((i + 1) as f64).ln(), amplitudes[i].ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit);
    }
    if syy <= 1e-24 * m * (1.0 + my * my) {
        return Ok((0.0, 1.0));
    }
    Ok((sxy / sxx, sxy * sxy / (sxx * syy)))
}

fn running_sup(v: &[f64]) -> Vec<f64> {
    let mut acc = f64::NEG_INFINITY;
    v.iter()
        .map(|&a| {
            acc = acc.max(a);
            acc
        })
        .collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn verdict(sys: &OscillatorSystem, s0: PhaseState, cfg: &SweepConfig) -> OrbitVerdict {
    let tr = match track(sys, s0, cfg.n_periods, cfg.escape_threshold, &cfg.flow) {
        Ok(tr) => tr,
        Err(e) => {
            return OrbitVerdict {
                initial: s0,
                sup_amplitude: s0.amplitude(),
                classification: Classification::Undecided,
                growth_exponent: 0.0,
                rotation_number: f64::NAN,
                reason: Some(e.to_string()),
            }
        }
    };
    let amps = &tr.strobe_amplitudes;
    let sup_amplitude = if tr.escaped { sup(amps).max(cfg.escape_threshold) } else { sup(amps) };
    // samples k = 1.. are the periods
    let periods = &amps[1..];
    let growth_exponent = if periods.len() >= 10 {
        growth_fit(&running_sup(periods)).map(|g| g.0).unwrap_or(0.0)
    } else {
        0.0
    };
    let classification = if tr.escaped {
        Classification::Escaped
    } else {
        let n = periods.len();
        let middle = sup(&periods[(2 * n) / 5..(3 * n) / 5]);
        let last = sup(&periods[(4 * n) / 5..]);
        if last <= cfg.plateau_factor * middle {
            Classification::BoundedLike
        } else {
            Classification::Undecided
        }
    };
    OrbitVerdict {
        initial: s0,
        sup_amplitude,
        classification,
        growth_exponent,
        rotation_number: rotation_from(&tr.crossings),
        reason: None,
    }
}

/// One verdict per initial state, in input order. Integrator failures
/// give `undecided` with the reason attached. An invalid configuration
/// makes every orbit undecided.
pub fn sweep(sys: &OscillatorSystem, cfg: &SweepConfig) -> Vec<OrbitVerdict> {
    if let Err(e) = cfg.validate() {
        return cfg
            .initial_grid
            .iter()
            .map(|&s0| OrbitVerdict {
                initial: s0,
                sup_amplitude: s0.amplitude(),
                classification: Classification::Undecided,
                growth_exponent: 0.0,
                rotation_number: f64::NAN,
                reason: Some(e.to_string()),
            })
            .collect();
    }
    cfg.initial_grid.par_iter().map(|&s0| verdict(sys, s0, cfg)).collect()
}

pub const VERDICT_CSV_HEADER: &str = "x0,y0,sup_amplitude,classification,growth_exponent,rotation_number";

pub fn verdicts_to_csv(verdicts: &[OrbitVerdict]) -> String {
    let mut s = String::from(VERDICT_CSV_HEADER);
    s.push('\n');
    for v in verdicts {
        let _ = writeln!(
            s,
            "{:e},{:e},{:e},{},{:e},{:e}",
            v.initial.x, v.initial.y, v.sup_amplitude, v.classification, v.growth_exponent, v.rotation_number
        );
    }
    s
}
