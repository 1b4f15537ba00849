mod common;

use common::synthetic_plan;
use craneplan::geometry::{box_clearance, box_signed_distance, rope_points, verify_trajectory, BoxObstacle};
use craneplan::model::{CraneParams, FrictionVariant, Smoothing};
use proptest::prelude::*;

/// Minimum of a convex function on `[lo, hi]` by ternary search.
fn ternary_min(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    for _ in 0..60 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) <= f(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    f(0.5 * (a + b))
}

/// Distance from `p` to the box surface, minimized over each face by nested
/// ternary search (the distance to a rectangle is convex in its coordinates).
fn brute_force_surface_distance(p: [f64; 3], b: &BoxObstacle) -> f64 {
    let mut best = f64::INFINITY;
    for fixed in 0..3 {
        let (u, v) = ((fixed + 1) % 3, (fixed + 2) % 3);
        for level in [b.min[fixed], b.max[fixed]] {
            let at = |su: f64, sv: f64| {
                let mut q = [0.0; 3];
                q[fixed] = level;
                q[u] = su;
                q[v] = sv;
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
            };
            let d = ternary_min(b.min[u], b.max[u], |su| ternary_min(b.min[v], b.max[v], |sv| at(su, sv)));
            best = best.min(d);
        }
    }
    best
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-2.0f64..2.0)
}

fn obstacle() -> impl Strategy<Value = BoxObstacle> {
    (prop::array::uniform3(-1.0f64..1.0), prop::array::uniform3(0.01f64..1.0))
        .prop_map(|(lo, size)| BoxObstacle::new(lo, std::array::from_fn(|i| lo[i] + size[i])).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn clearance_matches_brute_force_distance(p in point(), b in obstacle(), eps in 0.0f64..0.05) {
        let phi = box_clearance(p, &b, eps);
        let inside = b.contains(p);
        let oracle = if inside { 0.0 } else { brute_force_surface_distance(p, &b) };
        prop_assert!((phi + eps - oracle).abs() < 1e-6, "phi + eps = {}, oracle {oracle}", phi + eps);
        prop_assert_eq!(phi + eps > 0.0, !inside);
    }

    #[test]
    fn signed_distance_matches_brute_force(p in point(), b in obstacle()) {
        let oracle = brute_force_surface_distance(p, &b);
        let expected = if b.contains(p) { -oracle } else { oracle };
        prop_assert!((box_signed_distance(p, &b) - expected).abs() < 1e-6);
    }

    #[test]
    fn rope_points_are_collinear_and_evenly_spaced(
        trolley in point(),
        payload in point(),
        n in 2usize..20,
    ) {
        let pts = rope_points(trolley, payload, n);
        prop_assert_eq!(pts.len(), n);
        prop_assert_eq!(pts[0], trolley);
        let len = |a: [f64; 3], b: [f64; 3]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        let gap = len(trolley, payload) / (n - 1) as f64;
        for (j, w) in pts.windows(2).enumerate() {
            prop_assert!((len(w[0], w[1]) - gap).abs() < 1e-12, "gap {j}");
            // distance to the trolley grows linearly along the rope
            prop_assert!((len(trolley, w[1]) - (j + 1) as f64 * gap).abs() < 1e-12);
        }
        prop_assert!(len(pts[n - 1], payload) < 1e-12);
    }

    #[test]
    fn clearance_drops_by_the_margin_increase(p in point(), b in obstacle(), e1 in 0.0f64..0.1, de in 0.0f64..0.1) {
        let diff = box_clearance(p, &b, e1) - box_clearance(p, &b, e1 + de);
        prop_assert!((diff - de).abs() < 1e-12);
    }

    #[test]
    fn clearance_is_translation_invariant(p in point(), b in obstacle(), shift in prop::array::uniform3(-1.0f64..1.0)) {
        let moved = BoxObstacle::new(
            std::array::from_fn(|i| b.min[i] + shift[i]),
            std::array::from_fn(|i| b.max[i] + shift[i]),
        )
        .unwrap();
        let q = std::array::from_fn(|i| p[i] + shift[i]);
        prop_assert!((box_clearance(p, &b, 0.01) - box_clearance(q, &moved, 0.01)).abs() < 1e-12);
    }
}

#[test]
fn verification_at_zero_margin_detects_penetration() {
    let params = CraneParams::default();
    let plan = synthetic_plan(
        [0.2, 0.4, -0.6],
        [1.0, 0.4, -0.6],
        3.0,
        0.01,
        &params,
        &FrictionVariant::COMPLETE,
        &Smoothing::tanh(0.003),
    );
    let wall = BoxObstacle::new([0.55, 0.0, -0.9], [0.65, 0.9, -0.35]).unwrap();
    let report = verify_trajectory(&plan, &[wall], 9, 0.0, 10, &params).unwrap();
    assert!(report.collided);
    assert_eq!(report.obstacle_hit, vec![true]);
    assert!(report.min_clearance < -0.04, "penetration depth {}", report.min_clearance);
    let t = report.first_violation_time.unwrap();
    assert!(t > 0.0 && t < 3.0);
    // a box off to the side is never touched
    let aside = BoxObstacle::new([0.55, 0.7, -0.9], [0.65, 0.9, -0.35]).unwrap();
    let clear = verify_trajectory(&plan, &[aside], 9, 0.0, 10, &params).unwrap();
    assert!(!clear.collided && clear.min_clearance > 0.2);
}
