//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every check prints its own PASS/FAIL line; exits non-zero on any failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use isochron_core::action_angle::{period_parts, remainder_X, to_action_angle, ActionAngle};
use isochron_core::criteria::phi_f;
use isochron_core::diagnostics::{sweep, Classification, SweepConfig};
use isochron_core::flow::{FlowSpec, PhaseState};
use isochron_core::model::{probed_slopes, ForcingSpec, OscillatorSystem, PerturbationSpec, PotentialSpec};
use isochron_core::poincare::{asymptotic_l1l2, averaged_twist, twist_integral_fd, verify_map_asymptotics, MapMode};

type Check = Result<String, String>;
type CheckFn = fn() -> Check;

fn ok_if(pass: bool, detail: String) -> Check {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn isochrony() -> Check {
    let al = PotentialSpec::asymmetric_linear(4.0, 1.0).unwrap();
    let mut worst_al = 0.0f64;
    for h in [1.0, 1e2, 1e4] {
        let (_, _, t) = period_parts(&al, h).map_err(|e| e.to_string())?;
        worst_al = worst_al.max((t - 1.5 * PI).abs());
    }
    let mut worst_bf = 0.0f64;
    for sigma in [0.0, 0.25, 0.5] {
        let bf = PotentialSpec::bonheure_fabry(sigma).unwrap();
        for h in [1.0, 100.0] {
            let (_, _, t) = period_parts(&bf, h).map_err(|e| e.to_string())?;
            worst_bf = worst_bf.max((t - 2.0 * PI).abs());
        }
    }
    ok_if(
        worst_al < 1e-8 && worst_bf < 1e-6,
        format!("max |T - 3π/2| = {worst_al:.2e} (asymmetric), max |T - 2π| = {worst_bf:.2e} (Bonheure-Fabry)"),
    )
}

fn action_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pots = [
        ("asymmetric(4,1)", PotentialSpec::asymmetric_linear(4.0, 1.0).unwrap()),
        ("bonheure-fabry(0.25)", PotentialSpec::bonheure_fabry(0.25).unwrap()),
        ("harmonic(1)", PotentialSpec::harmonic(1.0).unwrap()),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, p) in &pots {
        let mut w = 0.0f64;
        for _ in 0..100 {
            let r = 10f64.powf(rng.gen_range(-1.0..2.0));
            let phi = rng.gen_range(0.0..2.0 * PI);
            let (x, y) = (r * phi.cos(), r * phi.sin());
            let aa = to_action_angle(p, x, y).map_err(|e| format!("{name}: {e}"))?;
            let h = 0.5 * y * y + p.v(x);
            let expect = 2.0 * PI * h / p.omega();
            w = w.max((aa.action - expect).abs() / expect);
        }
        parts.push(format!("{name} {w:.1e}"));
        worst = worst.max(w);
    }
    ok_if(worst < 1e-8, format!("max relative error over 3x100 states: {}", parts.join(", ")))
}

fn analytic_phi() -> Check {
    let f = ForcingSpec::cosine(1.0);
    let mut worst = 0.0f64;
    for k in 0..256 {
        let th = 2.0 * PI * k as f64 / 256.0;
        let v = phi_f(&f, 1, 1.0, 1.0, th).map_err(|e| e.to_string())?;
        worst = worst.max((v - PI * th.cos()).abs());
    }
    ok_if(worst < 1e-8, format!("max |Φ(θ) - π cos θ| over 256 θ = {worst:.2e}"))
}

fn sigma_zero_collapse() -> Check {
    let p = PotentialSpec::bonheure_fabry(0.0).unwrap();
    let mut worst = 0.0f64;
    for k in 0..=20_000 {
        let x = -100.0 + 0.01 * k as f64;
        worst = worst.max((p.v(x) - 0.5 * x * x).abs());
    }
    ok_if(worst < 1e-12, format!("max |V(x) - x²/2| on |x| ≤ 100 = {worst:.2e}"))
}

fn slope_limits() -> Check {
    let p = PotentialSpec::bonheure_fabry(0.25).unwrap();
    let (a, b) = probed_slopes(&p, 1e-3).map_err(|e| e.to_string())?;
    ok_if(
        (a - 4.0 / 9.0).abs() < 1e-3 && (b - 4.0).abs() < 1e-3,
        format!("probed slopes ({a:.9}, {b:.9}) vs (4/9, 4)"),
    )
}

fn remainder_decay() -> Check {
    let sys = OscillatorSystem::unperturbed(PotentialSpec::bonheure_fabry(0.25).unwrap());
    let period = 2.0 * PI / sys.omega;
    let mut sups = Vec::new();
    for action in [1e2, 1e3, 1e4] {
        let mut s = 0.0f64;
        for k in 0..96 {
            let aa = ActionAngle { theta: period * k as f64 / 96.0, action };
            let x = remainder_X(&sys, aa).map_err(|e| e.to_string())?;
            s = s.max(x.abs() / action.sqrt());
        }
        sups.push(s);
    }
    ok_if(
        sups[1] < sups[0] && sups[2] < sups[1],
        format!("sup |X|/√I at I = 1e2, 1e3, 1e4: {:.3e}, {:.3e}, {:.3e}", sups[0], sups[1], sups[2]),
    )
}

fn resonant_map() -> Check {
    let sys = OscillatorSystem::new(
        PotentialSpec::harmonic(1.0).unwrap(),
        PerturbationSpec::arctan(1.0).unwrap(),
        ForcingSpec::zero(),
    );
    let table = verify_map_asymptotics(&sys, MapMode::Resonant { m: 1, n: 1 }, &[0.0], &[1e2, 1e3, 1e4], &FlowSpec::default())
        .map_err(|e| e.to_string())?;
    let predicted = -PI.sqrt() * 2.0 * PI;
    let signed: Vec<f64> = table.rows.iter().map(|r| r.measured_dt / r.eps - predicted).collect();
    let decreasing = signed.windows(2).all(|w| w[1].abs() < w[0].abs());
    let rel = signed[2].abs() / predicted.abs();
    ok_if(
        decreasing && rel < 0.15,
        format!(
            "(t1 - t0 - 2π)/ε minus -2π√π at I0 = 1e2, 1e3, 1e4: {:.4}, {:.4}, {:.4}; final relative {rel:.4}",
            signed[0], signed[1], signed[2]
        ),
    )
}

fn averaged_twist_check() -> Check {
    let fixtures = [
        (2.0, 1.0, PerturbationSpec::arctan(1.0).unwrap(), ForcingSpec::new(vec![0.5, 1.0], vec![0.0]).unwrap()),
        (3.0, 1.0, PerturbationSpec::zero(), ForcingSpec::new(vec![1.0, 0.0, 0.4], vec![0.3, 0.0]).unwrap()),
        (1.0, 5.0, PerturbationSpec::arctan(-0.7).unwrap(), ForcingSpec::new(vec![-0.2, 0.3, 0.0, 1.0], vec![0.0, 0.5, 0.0]).unwrap()),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (a, b, g, f) in fixtures {
        let sys = OscillatorSystem::new(PotentialSpec::asymmetric_linear(a, b).unwrap(), g, f);
        let closed = averaged_twist(&sys, 1.0);
        let fd = twist_integral_fd(&sys, 1.0, 64).map_err(|e| e.to_string())?;
        worst = worst.max((fd - closed).abs());
        parts.push(format!("{closed:.8} vs {fd:.8}"));
    }
    ok_if(worst < 1e-6, format!("closed form vs finite differences: {}; max gap {worst:.1e}", parts.join(", ")))
}

fn positive_boundedness() -> Check {
    // 4[b g(+∞) - a g(-∞)] = 4π s = 8π² for s = 2π
    let sys = OscillatorSystem::new(
        PotentialSpec::harmonic(1.0).unwrap(),
        PerturbationSpec::arctan(2.0 * PI).unwrap(),
        ForcingSpec::cosine(1.0),
    );
    let grid = SweepConfig::default_grid(&sys).map_err(|e| e.to_string())?;
    let cfg = SweepConfig::new(grid);
    let out = sweep(&sys, &cfg);
    let escaped = out.iter().filter(|v| v.classification == Classification::Escaped).count();
    let bounded = out.iter().filter(|v| v.classification == Classification::BoundedLike).count();
    let failed = out.iter().filter(|v| v.reason.is_some()).count();
    ok_if(
        escaped == 0 && failed == 0,
        format!("{} orbits x {} periods: {escaped} escaped, {bounded} bounded-like, {failed} failed", out.len(), cfg.n_periods),
    )
}

fn negative_control() -> Check {
    let sys = OscillatorSystem::new(PotentialSpec::harmonic(1.0).unwrap(), PerturbationSpec::zero(), ForcingSpec::cosine(1.0));
    let cfg = SweepConfig::new(vec![PhaseState::new(0.0, 0.0, 0.0)]);
    let v = &sweep(&sys, &cfg)[0];
    let e = v.growth_exponent;
    ok_if(
        (0.9..=1.1).contains(&e) && v.reason.is_none(),
        format!("growth exponent {e:.6}, sup amplitude {:.1} after {} periods ({})", v.sup_amplitude, cfg.n_periods, v.classification),
    )
}

fn criteria_map_consistency() -> Check {
    let forcings = [
        ForcingSpec::new(vec![0.3, 1.0, 0.0, 0.5], vec![0.2, 0.7, 0.0]).unwrap(),
        ForcingSpec::new(vec![-0.5, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.3], vec![0.0, 0.0, 0.0, 1.0]).unwrap(),
    ];
    let (a, b) = (4.0f64, 1.0f64);
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    for f in forcings {
        let sys = OscillatorSystem::new(PotentialSpec::asymmetric_linear(a, b).unwrap(), PerturbationSpec::arctan(2.0).unwrap(), f.clone());
        let rhs = 4.0 * (b * sys.perturbation.g_plus - a * sys.perturbation.g_minus);
        let mut ratios = Vec::new();
        for k in 0..32 {
            let t0 = 2.0 * PI * k as f64 / 32.0;
            let lhs = b.sqrt() * (a.sqrt() + b.sqrt()) * phi_f(&f, 3, a, b, t0).map_err(|e| e.to_string())? - rhs;
            let (l1, _) = asymptotic_l1l2(&sys, (3, 4), t0).map_err(|e| e.to_string())?;
            ratios.push(lhs / -l1);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let spread = ratios.iter().map(|r| (r - mean).abs()).fold(0.0, f64::max) / mean.abs();
        worst = worst.max(spread);
        parts.push(format!("constant {mean:.12} spread {spread:.1e}"));
    }
    ok_if(worst < 1e-6 && parts.len() == 2, parts.join("; "))
}

fn main() -> ExitCode {
    let checks: [(&str, CheckFn); 11] = [
        ("isochrony of the built-in potentials", isochrony),
        ("action equals 2πh/ω", action_identity),
        ("Φ for cosine forcing", analytic_phi),
        ("Bonheure-Fabry at σ = 0 is harmonic", sigma_zero_collapse),
        ("Bonheure-Fabry slope limits", slope_limits),
        ("position remainder decays", remainder_decay),
        ("resonant return map asymptotics", resonant_map),
        ("averaged twist", averaged_twist_check),
        ("bounded orbits when the resonant condition holds", positive_boundedness),
        ("linear resonance grows linearly", negative_control),
        ("resonant condition is proportional to l1", criteria_map_consistency),
    ];
    let mut failures = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("acceptance {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("acceptance {:>2} FAIL  {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} passed", checks.len() - failures, checks.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
