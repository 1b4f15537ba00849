mod common;

use common::rest_to_rest;
use craneplan::flatness::{
    angles_from_accel, flat_map, flat_rk4_step, flat_step, flat_to_input, flat_to_state, FlatJet, FlatState,
};
use craneplan::model::{CraneParams, FrictionVariant, Smoothing};
use craneplan::optimizer::nlp::relative_mismatch;
use craneplan::real::Dual;
use proptest::prelude::*;

/// Payload jets with a taut rope and moderate derivatives.
fn jet() -> impl Strategy<Value = FlatJet> {
    (
        (0.2f64..1.0, 0.2f64..0.7, -0.8f64..-0.3),
        prop::array::uniform3(-0.5f64..0.5),
        prop::array::uniform3(-2.0f64..2.0),
        prop::array::uniform3(-10.0f64..10.0),
        prop::array::uniform3(-50.0f64..50.0),
    )
        .prop_map(|((x, y, z), v, a, j, s)| {
            let p = [x, y, z];
            FlatJet {
                axes: std::array::from_fn(|i| [p[i], v[i], a[i], j[i], s[i]]),
            }
        })
}

fn flat_state() -> impl Strategy<Value = FlatState> {
    prop::array::uniform12(-10.0f64..10.0).prop_map(FlatState)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn state_map_reproduces_payload_position(jet in jet()) {
        let s = flat_to_state(&jet, &CraneParams::default()).unwrap();
        let p = s.payload_position();
        let q = jet.position();
        for i in 0..3 {
            prop_assert!((p[i] - q[i]).abs() < 1e-12, "{p:?} vs {q:?}");
        }
    }

    #[test]
    fn rk4_equals_exact_hold(x in flat_state(), snap in prop::array::uniform3(-100.0f64..100.0), h in 1e-4f64..0.5) {
        let rk = flat_rk4_step(&x.0, &snap, h);
        let exact = flat_step(&x, snap, h);
        prop_assert!(close(&rk, &exact.0, 1e-13), "{rk:?} vs {exact:?}");
    }

    #[test]
    fn hold_steps_compose(x in flat_state(), snap in prop::array::uniform3(-100.0f64..100.0), a in 0.0f64..0.5, b in 0.0f64..0.5) {
        let two = flat_step(&flat_step(&x, snap, a), snap, b);
        let one = flat_step(&x, snap, a + b);
        prop_assert!(close(&two.0, &one.0, 1e-13), "{two:?} vs {one:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn input_map_gradient_matches_finite_differences(jet in jet()) {
        let params = CraneParams::default();
        let variant = FrictionVariant::COMPLETE;
        let smoothing = Smoothing::default();
        let axes: [[Dual<15>; 5]; 3] =
            std::array::from_fn(|i| std::array::from_fn(|k| Dual::variable(jet.axes[i][k], 5 * i + k)));
        let img = flat_map(&axes, &params, &variant, &smoothing).unwrap();
        let h = 1e-6;
        for col in 0..15 {
            let shifted = |delta: f64| {
                let mut j = jet;
                j.axes[col / 5][col % 5] += delta;
                flat_to_input(&j, &params, &variant, &smoothing).unwrap().to_array()
            };
            let (up, down) = (shifted(h), shifted(-h));
            for r in 0..3 {
                let fd = (up[r] - down[r]) / (2.0 * h);
                let err = relative_mismatch(img.input[r].eps[col], fd);
                prop_assert!(err < 1e-6, "d input {r} / d jet {col}: {} vs {fd}", img.input[r].eps[col]);
            }
        }
    }
}

#[test]
fn angle_rates_match_finite_differences() {
    let params = CraneParams::default();
    let (a, b, duration) = ([0.2, 0.2, -0.7], [1.0, 0.7, -0.4], 2.5);
    let h = 1e-4;
    let mut checked = 0;
    for k in 1..50 {
        let t = k as f64 * duration / 50.0;
        let s = flat_to_state(&rest_to_rest(a, b, duration, t), &params).unwrap();
        let angles = |t: f64| angles_from_accel(rest_to_rest(a, b, duration, t).derivative(2), params.g).unwrap();
        let (plus, minus) = (angles(t + h), angles(t - h));
        for (analytic, fd) in [
            (s.dalpha, (plus.0 - minus.0) / (2.0 * h)),
            (s.dbeta, (plus.1 - minus.1) / (2.0 * h)),
        ] {
            if analytic.abs() > 0.05 {
                assert!(((fd - analytic) / analytic).abs() < 1e-5, "t = {t}: {analytic} vs {fd}");
                checked += 1;
            }
        }
    }
    assert!(checked > 40);
}
