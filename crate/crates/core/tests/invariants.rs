use std::f64::consts::PI;

use proptest::prelude::*;

use isochron_core::action_angle::{from_action_angle, period_parts, to_action_angle, ActionAngle};
use isochron_core::criteria::{classify_frequency, phi_f, FrequencyClass};
use isochron_core::model::{ForcingSpec, PotentialSpec};

fn potential() -> impl Strategy<Value = PotentialSpec> {
    prop_oneof![
        (0.2f64..9.0, 0.2f64..9.0).prop_map(|(a, b)| PotentialSpec::asymmetric_linear(a, b).unwrap()),
        (0.0f64..0.8).prop_map(|s| PotentialSpec::bonheure_fabry(s).unwrap()),
        (0.2f64..9.0).prop_map(|k| PotentialSpec::harmonic(k).unwrap()),
    ]
}

fn forcing() -> impl Strategy<Value = ForcingSpec> {
    (prop::collection::vec(-2.0f64..2.0, 1..5), prop::collection::vec(-2.0f64..2.0, 0..4))
        .prop_map(|(c, s)| ForcingSpec::new(c, s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn action_angle_round_trip(p in potential(), r in 0.05f64..300.0, phi in 0.0f64..(2.0 * PI)) {
        let (x, y) = (r * phi.cos(), r * phi.sin());
        let aa = to_action_angle(&p, x, y).unwrap();
        prop_assert!(aa.theta >= 0.0 && aa.theta < 2.0 * PI / p.omega());
        let (x2, y2) = from_action_angle(&p, aa).unwrap();
        prop_assert!((x2 - x).abs() <= 1e-7 * r && (y2 - y).abs() <= 1e-7 * r, "({x}, {y}) -> ({x2}, {y2})");
    }

    #[test]
    fn period_is_energy_independent(p in potential(), h in 1e-2f64..1e5) {
        let (_, _, t) = period_parts(&p, h).unwrap();
        prop_assert!((t - 2.0 * PI / p.omega()).abs() < 1e-6 * t);
    }

    #[test]
    fn action_is_linear_in_energy(p in potential(), h in 1e-2f64..1e4, theta in 0.0f64..1.0) {
        let aa = ActionAngle { theta: theta * 2.0 * PI / p.omega(), action: 2.0 * PI * h / p.omega() };
        let (x, y) = from_action_angle(&p, aa).unwrap();
        let h2 = 0.5 * y * y + p.v(x);
        prop_assert!((h2 - h).abs() < 1e-8 * h);
    }

    #[test]
    fn phi_is_linear_in_forcing(
        f in forcing(), g in forcing(), al in -3.0f64..3.0, be in -3.0f64..3.0,
        a in 0.5f64..6.0, b in 0.5f64..6.0, m in 1u64..4, th in 0.0f64..(2.0 * PI),
    ) {
        let lhs = phi_f(&f.combine(al, &g, be), m, a, b, th).unwrap();
        let rhs = al * phi_f(&f, m, a, b, th).unwrap() + be * phi_f(&g, m, a, b, th).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn phi_is_periodic(f in forcing(), a in 0.5f64..6.0, b in 0.5f64..6.0, th in 0.0f64..(2.0 * PI)) {
        let v0 = phi_f(&f, 1, a, b, th).unwrap();
        let v1 = phi_f(&f, 1, a, b, th + 2.0 * PI).unwrap();
        prop_assert!((v0 - v1).abs() < 1e-9 * (1.0 + v0.abs()));
    }

    #[test]
    fn small_rationals_are_recognised(p in 1u64..200, q in 1u64..200) {
        match classify_frequency(p as f64 / q as f64, 1e-12, 10_000) {
            FrequencyClass::Rational { m, n } => prop_assert_eq!(n * q, m * p),
            other => prop_assert!(false, "{other:?}"),
        }
    }
}
