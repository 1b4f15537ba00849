#![allow(dead_code)]

use craneplan::flatness::{trajectory_to_plan, FlatJet, FlatState};
use craneplan::model::{CraneParams, FrictionVariant, Smoothing};
use craneplan::plan::Plan;

/// Ninth-order rest-to-rest profile on `[0, 1]`: derivatives up to the fourth
/// vanish at both ends.
const REST_TO_REST: [f64; 10] = [0.0, 0.0, 0.0, 0.0, 0.0, 126.0, -420.0, 540.0, -315.0, 70.0];

/// Value and first four derivatives of a polynomial at `s`.
fn poly_derivatives(c: &[f64], s: f64) -> [f64; 5] {
    let mut out = [0.0; 5];
    let mut coeffs = c.to_vec();
    for slot in out.iter_mut() {
        *slot = coeffs.iter().rev().fold(0.0, |acc, &a| acc * s + a);
        coeffs = coeffs.iter().enumerate().skip(1).map(|(k, a)| k as f64 * a).collect();
    }
    out
}

/// Flat jet at time `t` of a move from `a` to `b` taking `duration` seconds,
/// held at the endpoints outside `[0, duration]`.
pub fn rest_to_rest(a: [f64; 3], b: [f64; 3], duration: f64, t: f64) -> FlatJet {
    let s = (t / duration).clamp(0.0, 1.0);
    let d = poly_derivatives(&REST_TO_REST, s);
    let axes = std::array::from_fn(|i| {
        let delta = b[i] - a[i];
        std::array::from_fn(|k| {
            let scaled = delta * d[k] / duration.powi(k as i32);
            if k == 0 {
                a[i] + scaled
            } else {
                scaled
            }
        })
    });
    FlatJet { axes }
}

/// Plan sampled every `dt` from a rest-to-rest move.
pub fn synthetic_plan(
    a: [f64; 3],
    b: [f64; 3],
    duration: f64,
    dt: f64,
    params: &CraneParams,
    variant: &FrictionVariant,
    smoothing: &Smoothing,
) -> Plan {
    let n = (duration / dt).round() as usize;
    let jets: Vec<FlatJet> = (0..=n).map(|k| rest_to_rest(a, b, duration, k as f64 * dt)).collect();
    let nodes: Vec<FlatState> = jets.iter().map(FlatJet::flat_state).collect();
    let snaps: Vec<[f64; 3]> = jets.iter().map(FlatJet::snap).collect();
    trajectory_to_plan(&nodes, &snaps, dt, params, variant, smoothing).expect("synthetic plan is regular")
}

/// Copy of `params` without any friction.
pub fn frictionless(params: &CraneParams) -> CraneParams {
    CraneParams {
        d_x_minus: 0.0,
        d_x_plus: 0.0,
        d_y_minus: 0.0,
        d_y_plus: 0.0,
        d_l: 0.0,
        a_x: [0.0; 5],
        b_x: [0.0; 5],
        a_y: [0.0; 5],
        b_y: [0.0; 5],
        c_l: 0.0,
        ..params.clone()
    }
}
