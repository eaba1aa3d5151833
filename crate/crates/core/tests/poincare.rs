use std::f64::consts::PI;

use isochron_core::flow::FlowSpec;
use isochron_core::model::{ForcingSpec, OscillatorSystem, PerturbationSpec, PotentialSpec};
use isochron_core::poincare::*;

fn harmonic_arctan() -> OscillatorSystem {
    OscillatorSystem::new(
        PotentialSpec::harmonic(1.0).unwrap(),
        PerturbationSpec::arctan(1.0).unwrap(),
        ForcingSpec::zero(),
    )
}

fn system(a: f64, b: f64, g: PerturbationSpec, f: ForcingSpec) -> OscillatorSystem {
    OscillatorSystem::new(PotentialSpec::asymmetric_linear(a, b).unwrap(), g, f)
}

#[test]
fn unperturbed_return_is_exact() {
    let sys = OscillatorSystem::unperturbed(PotentialSpec::asymmetric_linear(4.0, 1.0).unwrap());
    let rec = resonant_return(&sys, (3, 4), 0.7, 100.0, &FlowSpec::default()).unwrap();
    assert!((rec.elapsed - 6.0 * PI).abs() < 1e-8, "{rec:?}");
    assert!((rec.rho1 - rec.rho0).abs() < 1e-8);
    assert!((rec.rho0 - 1.0).abs() < 1e-12);
    assert!((rec.eps - 0.1).abs() < 1e-12);
}

#[test]
fn l1_l2_examples() {
    let (l1, l2) = asymptotic_l1l2(&harmonic_arctan(), (1, 1), 0.3).unwrap();
    assert!((l1 - 2.0 * PI).abs() < 1e-10 && l2.abs() < 1e-12);

    let sys = system(1.0, 1.0, PerturbationSpec::zero(), ForcingSpec::cosine(1.0));
    for t0 in [0.0, 0.4, 2.0, 5.5] {
        let (l1, l2) = asymptotic_l1l2(&sys, (1, 1), t0).unwrap();
        assert!((l1 + PI * t0.cos()).abs() < 1e-9, "t0 = {t0}: {l1}");
        assert!((l2 + PI * t0.sin()).abs() < 1e-9, "t0 = {t0}: {l2}");
    }

    let sys = OscillatorSystem::unperturbed(PotentialSpec::asymmetric_linear(4.0, 1.0).unwrap());
    assert_eq!(asymptotic_l1l2(&sys, (3, 4), 1.0).unwrap(), (0.0, 0.0));
}

#[test]
fn l2_has_zero_mean() {
    let f = ForcingSpec::new(vec![0.5, 0.3, 0.0, 0.2], vec![0.1, -0.4, 0.0]).unwrap();
    let sys = system(4.0, 1.0, PerturbationSpec::arctan(1.0).unwrap(), f);
    let n = 64;
    let mean: f64 =
        (0..n).map(|k| asymptotic_l1l2(&sys, (3, 4), 2.0 * PI * k as f64 / n as f64).unwrap().1).sum::<f64>() / n as f64;
    assert!(mean.abs() < 1e-10, "{mean}");
}

#[test]
fn sigma_examples() {
    let sys = OscillatorSystem::unperturbed(PotentialSpec::asymmetric_linear(2.0, 1.0).unwrap());
    assert_eq!(nonresonant_sigma(&sys, 0.5, 1.0).unwrap(), (0.0, 0.0));

    // constant forcing: sigma1 is a brute-force integral of C over one period
    let c0 = 1.5;
    let sys = system(2.0, 1.0, PerturbationSpec::zero(), ForcingSpec::constant(c0));
    let w = sys.omega;
    let n = 200_000;
    let h = 2.0 * PI / n as f64;
    let int_c: f64 = (0..n)
        .map(|k| isochron_core::action_angle::reference_C(2.0, 1.0, (k as f64 + 0.5) * h / w) * h)
        .sum();
    let rho0 = 1.3;
    let (s1, s2) = nonresonant_sigma(&sys, 0.2, rho0).unwrap();
    let expect = -w.powf(-1.5) * (PI / rho0).sqrt() * c0 / 2f64.sqrt() * int_c;
    assert!((s1 - expect).abs() < 1e-8, "{s1} vs {expect}");
    assert_eq!(s2, 0.0);

    let sys = system(2.0, 1.0, PerturbationSpec::arctan(1.0).unwrap(), ForcingSpec::zero());
    let (s1, s2) = nonresonant_sigma(&sys, 0.0, 1.0).unwrap();
    let expect = w.powf(-1.5) * PI.sqrt() * 2.0 * w * (PI / 2.0) * 1.5;
    assert!((s1 - expect).abs() < 1e-10 && s2 == 0.0);
}

#[test]
fn averaged_twist_examples() {
    let sys = OscillatorSystem::unperturbed(PotentialSpec::asymmetric_linear(2.0, 1.0).unwrap());
    assert_eq!(averaged_twist(&sys, 1.0), 0.0);

    let sys = system(2.0, 1.0, PerturbationSpec::zero(), ForcingSpec::constant(1.0));
    let w = 4.0 - 2.0 * 2f64.sqrt();
    assert!((sys.omega - w).abs() < 1e-14);
    assert!((averaged_twist(&sys, 1.0) + PI.powf(1.5) / w.sqrt()).abs() < 1e-12);

    let sys = system(1.0, 1.0, PerturbationSpec::arctan(1.0).unwrap(), ForcingSpec::cosine(1.0));
    for rho0 in [0.5f64, 1.0, 2.0] {
        let expect = -2.0 * PI.powf(1.5) * rho0.powf(-1.5) * PI;
        assert!((averaged_twist(&sys, rho0) - expect).abs() < 1e-12);
    }
}

#[test]
fn averaged_twist_matches_finite_differences() {
    let f = ForcingSpec::new(vec![0.7, 1.0, 0.3], vec![0.5, 0.0]).unwrap();
    let sys = system(2.0, 1.0, PerturbationSpec::arctan(0.5).unwrap(), f);
    for rho0 in [1.0, 1.7] {
        let fd = twist_integral_fd(&sys, rho0, 32).unwrap();
        let closed = averaged_twist(&sys, rho0);
        assert!((fd - closed).abs() < 1e-6 * closed.abs().max(1.0), "{fd} vs {closed}");
    }
}

#[test]
fn resonant_time_shift_approaches_prediction() {
    let sys = harmonic_arctan();
    let table = verify_map_asymptotics(&sys, MapMode::Resonant { m: 1, n: 1 }, &[0.0], &[1e2, 1e3, 1e4], &FlowSpec::default())
        .unwrap();
    assert_eq!(table.rows.len(), 3);
    for row in &table.rows {
        // predicted time shift is -√π · 2π · ε
        assert!((row.predicted_dt / row.eps + PI.sqrt() * 2.0 * PI).abs() < 1e-9);
    }
    assert!(table.residuals_decreasing(1e-6), "{}", table.to_csv());
}

#[test]
fn deviation_scales_like_inverse_sqrt_action() {
    // only harmonics divisible by n survive the convolution with C(3t)
    let f = ForcingSpec::new(vec![0.0, 0.0, 0.0, 0.0, 0.5], vec![0.0; 4]).unwrap();
    let sys = system(4.0, 1.0, PerturbationSpec::zero(), f);
    let spec = FlowSpec::default();
    let d1 = resonant_return(&sys, (3, 4), 0.3, 400.0, &spec).unwrap();
    let d2 = resonant_return(&sys, (3, 4), 0.3, 1600.0, &spec).unwrap();
    let r = (d1.t1 - d1.t0 - 6.0 * PI) / (d2.t1 - d2.t0 - 6.0 * PI);
    assert!((1.6..2.4).contains(&r), "ratio {r}");
}

#[test]
fn nonresonant_residual_decreases() {
    let f = ForcingSpec::new(vec![0.5, 1.0], vec![0.0]).unwrap();
    let sys = system(2.0, 1.0, PerturbationSpec::arctan(1.0).unwrap(), f);
    let table =
        verify_map_asymptotics(&sys, MapMode::Nonresonant, &[0.0, 2.0], &[1e2, 1e3, 1e4], &FlowSpec::default()).unwrap();
    assert!(table.residuals_decreasing(1e-6), "{}", table.to_csv());
}

#[test]
fn unperturbed_table_is_flat() {
    let sys = OscillatorSystem::unperturbed(PotentialSpec::bonheure_fabry(0.25).unwrap());
    let table =
        verify_map_asymptotics(&sys, MapMode::Resonant { m: 1, n: 1 }, &[0.0, 1.0], &[1e2, 1e3, 1e4], &FlowSpec::default())
            .unwrap();
    assert!(table.rows.iter().all(|r| r.residual < 1e-6), "{}", table.to_csv());
    assert!(table.residuals_decreasing(1e-6));
}

#[test]
fn table_csv_layout() {
    let table = ConvergenceTable {
        mode: MapMode::Nonresonant,
        rows: vec![ConvergenceRow {
            t0: 0.0,
            i0: 100.0,
            eps: 0.1,
            measured_dt: 0.5,
            predicted_dt: 0.25,
            measured_drho: 0.0,
            predicted_drho: 0.0,
            residual: 2.5,
        }],
    };
    let csv = table.to_csv();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t0,I0,eps,measured_dt,predicted_dt,measured_drho,predicted_drho,residual"
    );
    assert_eq!(lines.next().unwrap().split(',').count(), 8);
}

#[test]
fn ladder_validation() {
    let sys = harmonic_arctan();
    let spec = FlowSpec::default();
    assert!(verify_map_asymptotics(&sys, MapMode::Nonresonant, &[0.0], &[1e2, 1e3], &spec).is_err());
    assert!(verify_map_asymptotics(&sys, MapMode::Nonresonant, &[0.0], &[1e3, 1e2, 1e4], &spec).is_err());
}
