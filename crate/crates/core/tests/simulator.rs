mod common;

use common::{frictionless, synthetic_plan};
use craneplan::experiments::metrics;
use craneplan::model::{breakaway_force, Axis, CraneParams, CraneState, FrictionVariant, InputForces, Smoothing};
use craneplan::simulator::{mechanical_energy, run_closed_loop, sim_step, PiGains, SimConfig};
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI};

fn swinging(l: f64, alpha_off: f64, beta: f64) -> CraneState {
    CraneState {
        alpha: FRAC_PI_2 + alpha_off,
        beta,
        ..CraneState::at_rest(0.6, 0.45, l)
    }
}

/// Hoist force that balances the weight of a hanging payload.
fn hold(params: &CraneParams) -> f64 {
    -params.m_p * params.g
}

fn smoothing() -> Smoothing {
    Smoothing::tanh(0.003)
}

#[test]
fn frictionless_unforced_energy_is_conserved() {
    let params = frictionless(&CraneParams::default());
    let cfg = SimConfig::default();
    let u = InputForces::new(0.0, 0.0, 0.0);
    let mut s = swinging(0.5, 0.25, 0.2);
    let e0 = mechanical_energy(&s, &params);
    let (mut worst, mut scale) = (0.0f64, e0.abs());
    for _ in 0..10_000 {
        s = sim_step(&s, &u, &params, &cfg).unwrap();
        let e = mechanical_energy(&s, &params);
        // the payload falls freely; drift is relative to the largest kinetic energy reached
        let kinetic = e - params.m_p * params.g * s.payload_position()[2];
        scale = scale.max(kinetic);
        worst = worst.max((e - e0).abs());
    }
    assert!(worst / scale < 1e-6, "relative energy drift {:e}", worst / scale);
}

#[test]
fn stuck_trolley_pendulum_period() {
    let params = CraneParams::default();
    let cfg = SimConfig::default();
    let l = 0.6;
    let u = InputForces::new(0.0, 0.0, hold(&params));
    let mut s = swinging(l, 0.02, 0.0);
    let mut crossings = Vec::new();
    let mut prev = s.alpha - FRAC_PI_2;
    for k in 1..=10_000 {
        s = sim_step(&s, &u, &params, &cfg).unwrap();
        let cur = s.alpha - FRAC_PI_2;
        if prev > 0.0 && cur <= 0.0 {
            // linear interpolation of the downward zero crossing
            crossings.push((k as f64 - cur / (cur - prev)) * cfg.dt);
        }
        prev = cur;
    }
    assert_eq!([s.dx_t, s.dy_t, s.dl], [0.0; 3], "trolleys and hoist should stick");
    assert!(crossings.len() >= 5);
    let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    let oracle = 2.0 * PI * (l / params.g).sqrt();
    assert!(((period - oracle) / oracle).abs() < 0.01, "period {period} vs {oracle}");
}

#[test]
fn zero_force_axis_below_dead_band_stays_at_rest() {
    let params = CraneParams::default();
    let cfg = SimConfig::default();
    let u = InputForces::new(0.0, 0.0, hold(&params));
    let start = CraneState {
        dx_t: 0.5 * cfg.v_dead,
        dy_t: -0.5 * cfg.v_dead,
        ..CraneState::at_rest(0.4, 0.5, 0.7)
    };
    let mut s = start;
    for _ in 0..10_000 {
        s = sim_step(&s, &u, &params, &cfg).unwrap();
        assert!(s.dx_t.abs() < cfg.v_dead && s.dy_t.abs() < cfg.v_dead && s.dl.abs() < cfg.v_dead);
    }
    assert_eq!(s.actuated(), start.actuated());
}

#[test]
fn closed_loop_is_deterministic() {
    let params = CraneParams::default();
    let plan = synthetic_plan(
        [0.3, 0.3, -0.6],
        [0.9, 0.6, -0.5],
        3.0,
        0.01,
        &params,
        &FrictionVariant::COMPLETE,
        &smoothing(),
    );
    let a = run_closed_loop(&plan, &params, &PiGains::default(), &SimConfig::default()).unwrap();
    let b = run_closed_loop(&plan, &params, &PiGains::default(), &SimConfig::default()).unwrap();
    let bits = |log: &craneplan::simulator::SimLog| -> Vec<u64> {
        log.samples
            .iter()
            .flat_map(|s| s.state.to_array().into_iter().chain(s.u_applied).chain(s.payload))
            .map(f64::to_bits)
            .collect()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.saturation_time, b.saturation_time);
}

#[test]
fn static_plan_is_an_equilibrium() {
    let params = CraneParams::default();
    let p = [0.5, 0.4, -0.6];
    let plan = synthetic_plan(p, p, 2.0, 0.01, &params, &FrictionVariant::COMPLETE, &smoothing());
    let log = run_closed_loop(&plan, &params, &PiGains::default(), &SimConfig::default()).unwrap();
    for s in &log.samples {
        for i in 0..3 {
            assert!((s.payload[i] - p[i]).abs() < 1e-9, "payload moved at t = {}", s.t);
            assert!(s.u_fb[i].abs() < 1e-9);
        }
    }
    assert_eq!(log.saturation_time, [0.0; 3]);
}

#[test]
fn matched_model_plan_is_tracked() {
    let params = CraneParams::default();
    let sim = SimConfig::default();
    let plan = synthetic_plan(
        [0.3, 0.3, -0.6],
        [0.9, 0.6, -0.5],
        3.0,
        0.01,
        &params,
        &FrictionVariant::COMPLETE,
        &smoothing(),
    );
    let log = run_closed_loop(&plan, &params, &PiGains::default(), &sim).unwrap();
    let m = metrics(&log, &plan, &[], 9, &sim).unwrap();
    assert!(log.aborted.is_none());
    assert!(m.max_tracking_error < 0.01, "{m:?}");
    assert!(m.residual_oscillation < 0.01, "{m:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn applied_forces_respect_actuator_limits(
        dx in 0.2f64..0.8,
        dy in -0.3f64..0.3,
        dz in -0.2f64..0.2,
        duration in 1.0f64..3.0,
    ) {
        let params = CraneParams::default();
        let a = [0.2, 0.45, -0.55];
        let b = [a[0] + dx, a[1] + dy, a[2] + dz];
        let plan = synthetic_plan(a, b, duration, 0.01, &params, &FrictionVariant::COMPLETE, &smoothing());
        let sim = SimConfig { settle_time: 2.0, ..Default::default() };
        let log = run_closed_loop(&plan, &params, &PiGains::default(), &sim).unwrap();
        for s in &log.samples {
            for i in 0..3 {
                prop_assert!(s.u_applied[i] >= params.u_min[i] && s.u_applied[i] <= params.u_max[i]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn no_spontaneous_breakout_below_breakaway(
        x in 0.05f64..1.15,
        y in 0.05f64..0.85,
        l in 0.2f64..0.85,
        vel in prop::array::uniform3(-0.99f64..0.99),
        load in prop::array::uniform3(-0.99f64..0.99),
    ) {
        let params = CraneParams::default();
        let cfg = SimConfig::default();
        // vertical rope: the net force on each trolley is its actuator force
        let state = CraneState {
            dx_t: vel[0] * cfg.v_dead,
            dy_t: vel[1] * cfg.v_dead,
            dl: vel[2] * cfg.v_dead,
            ..CraneState::at_rest(x, y, l)
        };
        let pos = [x, y, l];
        let net: [f64; 3] = std::array::from_fn(|i| {
            let c = breakaway_force(Axis::ALL[i], pos[i], load[i].signum(), &params, &FrictionVariant::COMPLETE).unwrap();
            load[i] * c
        });
        let u = InputForces::new(net[0], net[1], hold(&params) + net[2]);
        let next = sim_step(&state, &u, &params, &cfg).unwrap();
        for v in next.actuated_velocity() {
            prop_assert!(v.abs() < cfg.v_dead, "{next:?}");
        }
    }
}
