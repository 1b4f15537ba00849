//! Closed-loop simulation of the crane with stick-slip dry friction.
//!
//! The plant integrates the full nonlinear equations of motion with the exact
//! (unsmoothed) friction model. Stiction is resolved per step with a Karnopp
//! dead-band: an axis slower than `v_dead` sticks while the force needed to
//! hold it stays below the breakaway level.

use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};
use crate::io::{write_row, Provenance};
use crate::model::{
    accelerations_with_friction, dry_friction, eom_accelerations, viscous_coeff, Accelerations, Axis,
    CraneParams, CraneState, FrictionVariant, InputForces, Smoothing,
};
use crate::plan::Plan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisGains {
    /// Proportional gain [N/m].
    pub kp: f64,
    /// Integral gain [N/(m·s)].
    pub ki: f64,
    /// Bound on the integral contribution [N].
    pub integrator_limit: f64,
}

impl AxisGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp >= 0.0 && self.ki >= 0.0 && self.kp.is_finite() && self.ki.is_finite()) {
            return Err(CraneError::InvalidInput(format!(
                "PI gains must be finite and non-negative, got kp = {}, ki = {}",
                self.kp, self.ki
            )));
        }
        if !(self.integrator_limit > 0.0) {
            return Err(CraneError::InvalidInput(format!(
                "integrator limit must be positive, got {}",
                self.integrator_limit
            )));
        }
        Ok(())
    }
}

/// Independent PI loops on the trolley positions and the rope length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PiGains {
    pub x: AxisGains,
    pub y: AxisGains,
    pub hoist: AxisGains,
}

impl Default for PiGains {
    /// Gains tuned for minimum IAE on the no-dry-friction plan of the
    /// single-obstacle scenario with the default crane.
    fn default() -> Self {
        Self {
            x: AxisGains {
                kp: 2854.0,
                ki: 698.0,
                integrator_limit: 6.0,
            },
            y: AxisGains {
                kp: 1920.0,
                ki: 370.0,
                integrator_limit: 5.0,
            },
            hoist: AxisGains {
                kp: 1903.0,
                ki: 960.0,
                integrator_limit: 6.0,
            },
        }
    }
}

impl PiGains {
    pub fn axis(&self, axis: Axis) -> &AxisGains {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Hoist => &self.hoist,
        }
    }

    pub fn axis_mut(&mut self, axis: Axis) -> &mut AxisGains {
        match axis {
            Axis::X => &mut self.x,
            Axis::Y => &mut self.y,
            Axis::Hoist => &mut self.hoist,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Axis::ALL.iter().try_for_each(|&a| self.axis(a).validate())
    }
}

/// Integrator of one PI loop, stored as its force contribution [N].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PiState {
    pub integral: f64,
}

/// One PI update with conditional-integration anti-windup.
///
/// The integrator is frozen while the combined command `u_ff + u_fb` lies
/// outside `limits` and the error pushes it further out, and it is always
/// clamped to the integrator limit. Returns the feedback force.
pub fn pi_step(
    reference: f64,
    measurement: f64,
    u_ff: f64,
    gains: &AxisGains,
    state: PiState,
    dt: f64,
    limits: (f64, f64),
) -> (f64, PiState) {
    let e = reference - measurement;
    let p = gains.kp * e;
    let u = u_ff + p + state.integral;
    let winding = (u > limits.1 && e > 0.0) || (u < limits.0 && e < 0.0);
    let mut integral = state.integral;
    if !winding {
        integral += gains.ki * e * dt;
    }
    integral = integral.clamp(-gains.integrator_limit, gains.integrator_limit);
    (p + integral, PiState { integral })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Integration step [s].
    pub dt: f64,
    /// Controller sampling period [s]; a multiple of `dt`. The command is
    /// held between samples.
    pub control_dt: f64,
    /// Stiction dead-band [m/s].
    pub v_dead: f64,
    /// Logging interval [s]; a multiple of `dt`.
    pub log_dt: f64,
    /// Simulated time after the end of the plan [s].
    pub settle_time: f64,
    /// Trolley and hoist speed below which the crane counts as stopped [m/s].
    pub stop_velocity: f64,
    /// How long the speeds must stay below the threshold [s].
    pub stop_hold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            control_dt: 0.01,
            v_dead: 1e-3,
            log_dt: 0.01,
            settle_time: 15.0,
            stop_velocity: 2e-3,
            stop_hold: 0.5,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CraneError::InvalidInput(m));
        if !(self.dt > 0.0) || !(self.v_dead > 0.0) {
            return bad(format!("step {} and dead-band {} must be positive", self.dt, self.v_dead));
        }
        for (name, v) in [("log interval", self.log_dt), ("control period", self.control_dt)] {
            let ratio = v / self.dt;
            if !(ratio >= 1.0) || (ratio - ratio.round()).abs() > 1e-6 {
                return bad(format!("{name} {v} is not a multiple of the step {}", self.dt));
            }
        }
        if !(self.settle_time >= 0.0) || !(self.stop_velocity > 0.0) || !(self.stop_hold >= 0.0) {
            return bad("settle time, stop velocity and stop hold must be non-negative".into());
        }
        Ok(())
    }

    pub(crate) fn steps_per_log(&self) -> usize {
        (self.log_dt / self.dt).round() as usize
    }

    pub(crate) fn steps_per_control(&self) -> usize {
        (self.control_dt / self.dt).round() as usize
    }
}

fn clamp_to_workspace(axis: Axis, position: f64, params: &CraneParams) -> f64 {
    let (lo, hi) = params.workspace(axis);
    position.clamp(lo, hi)
}

/// Sliding friction for an axis moving in direction `dir` (±1), as the term
/// `d` subtracted in the equations of motion.
fn sliding_friction(axis: Axis, position: f64, velocity: f64, dir: f64, params: &CraneParams) -> f64 {
    let pos = clamp_to_workspace(axis, position, params);
    let dry = dry_friction(axis, pos, dir, params, &FrictionVariant::COMPLETE).unwrap_or(0.0);
    viscous_coeff(axis, dir, params) * velocity + dir * dry
}

fn breakaway(axis: Axis, position: f64, dir: f64, params: &CraneParams) -> f64 {
    let pos = clamp_to_workspace(axis, position, params);
    dry_friction(axis, pos, dir, params, &FrictionVariant::COMPLETE).unwrap_or(0.0)
}

/// Karnopp friction for one axis, returned as the resisting term `d` of the
/// equations of motion (the force acting on the axis is `−d`).
///
/// `applied` is the friction that would keep the axis at rest, i.e. the net
/// force of everything else acting on it. Positions outside the workspace
/// are clamped before the dry-friction polynomials are evaluated.
pub fn stiction_force(
    axis: Axis,
    position: f64,
    velocity: f64,
    applied: f64,
    params: &CraneParams,
    v_dead: f64,
) -> f64 {
    if velocity.abs() >= v_dead {
        return sliding_friction(axis, position, velocity, velocity.signum(), params);
    }
    if applied == 0.0 {
        return 0.0;
    }
    let dir = applied.signum();
    let c = breakaway(axis, position, dir, params);
    if c > 0.0 && applied.abs() <= c {
        applied
    } else {
        dir * c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Stick,
    Slip(f64),
}

fn zero_stuck(s: &CraneState, modes: &[Mode; 3]) -> CraneState {
    let mut s = *s;
    if modes[0] == Mode::Stick {
        s.dx_t = 0.0;
    }
    if modes[1] == Mode::Stick {
        s.dy_t = 0.0;
    }
    if modes[2] == Mode::Stick {
        s.dl = 0.0;
    }
    s
}

fn axis_acc(a: &Accelerations) -> Vector3<f64> {
    Vector3::new(a.x_t, a.y_t, a.l)
}

/// Friction forces for fixed stick/slip modes. Sticking axes receive the
/// holding forces that zero their accelerations; the actuated accelerations
/// are affine in the friction terms, so one linear solve is exact.
fn resolve_friction(s: &CraneState, u: &InputForces, modes: &[Mode; 3], params: &CraneParams) -> Result<[f64; 3]> {
    let pos = s.actuated();
    let vel = s.actuated_velocity();
    let mut d = [0.0; 3];
    for (i, axis) in Axis::ALL.into_iter().enumerate() {
        if let Mode::Slip(dir) = modes[i] {
            d[i] = sliding_friction(axis, pos[i], vel[i], dir, params);
        }
    }
    let stuck: Vec<usize> = (0..3).filter(|&i| modes[i] == Mode::Stick).collect();
    if stuck.is_empty() {
        return Ok(d);
    }
    let a0 = axis_acc(&accelerations_with_friction(s, u, d, params)?);
    let mut jac = Matrix3::zeros();
    for &j in &stuck {
        let mut dj = d;
        dj[j] += 1.0;
        jac.set_column(j, &(axis_acc(&accelerations_with_friction(s, u, dj, params)?) - a0));
    }
    let mut m = Matrix3::identity();
    let mut rhs = Vector3::zeros();
    for &i in &stuck {
        for &j in &stuck {
            m[(i, j)] = jac[(i, j)];
        }
        rhs[i] = -a0[i];
    }
    let delta = m.lu().solve(&rhs).ok_or_else(|| CraneError::Singular {
        equation: "stiction",
        detail: "holding forces are not determined".into(),
    })?;
    for &i in &stuck {
        d[i] += delta[i];
    }
    Ok(d)
}

/// Stick/slip decision at the start of a step. Slow axes start stuck and are
/// released one pass at a time while their holding force exceeds breakaway.
fn resolve_modes(s: &CraneState, u: &InputForces, params: &CraneParams, v_dead: f64) -> Result<[Mode; 3]> {
    let vel = s.actuated_velocity();
    let pos = s.actuated();
    let mut modes = vel.map(|v| if v.abs() >= v_dead { Mode::Slip(v.signum()) } else { Mode::Stick });
    for _ in 0..3 {
        let probe = zero_stuck(s, &modes);
        let d = resolve_friction(&probe, u, &modes, params)?;
        let mut changed = false;
        for (i, axis) in Axis::ALL.into_iter().enumerate() {
            if modes[i] != Mode::Stick {
                continue;
            }
            let hold = d[i];
            let c = breakaway(axis, pos[i], hold.signum(), params);
            if !(c > 0.0 && hold.abs() <= c) {
                modes[i] = Mode::Slip(hold.signum());
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(modes)
}

fn derivative(s: &CraneState, u: &InputForces, modes: &[Mode; 3], params: &CraneParams) -> Result<[f64; 10]> {
    let d = resolve_friction(s, u, modes, params)?;
    let a = accelerations_with_friction(s, u, d, params)?;
    let stuck = |i: usize| modes[i] == Mode::Stick;
    Ok([
        s.dx_t,
        if stuck(0) { 0.0 } else { a.x_t },
        s.dy_t,
        if stuck(1) { 0.0 } else { a.y_t },
        s.dl,
        if stuck(2) { 0.0 } else { a.l },
        s.dalpha,
        a.alpha,
        s.dbeta,
        a.beta,
    ])
}

fn rk4<F>(s: &CraneState, h: f64, mut f: F) -> Result<CraneState>
where
    F: FnMut(&CraneState) -> Result<[f64; 10]>,
{
    let x = s.to_array();
    let shift = |k: &[f64; 10], c: f64| CraneState::from_array(std::array::from_fn(|i| x[i] + c * k[i]));
    let k1 = f(s)?;
    let k2 = f(&shift(&k1, 0.5 * h))?;
    let k3 = f(&shift(&k2, 0.5 * h))?;
    let k4 = f(&shift(&k3, h))?;
    Ok(CraneState::from_array(std::array::from_fn(|i| {
        x[i] + h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])
    })))
}

/// One RK4 step of the plant with stick-slip friction. Modes are decided at
/// the start of the step and held for its duration.
pub fn sim_step(state: &CraneState, u: &InputForces, params: &CraneParams, cfg: &SimConfig) -> Result<CraneState> {
    let modes = resolve_modes(state, u, params, cfg.v_dead)?;
    let start = zero_stuck(state, &modes);
    let next = rk4(&start, cfg.dt, |s| derivative(s, u, &modes, params))?;
    Ok(zero_stuck(&next, &modes))
}

/// Open-loop integration of the equations of motion with friction from
/// [`eom_accelerations`] (no stiction logic). Returns the state every
/// `log_every` steps, starting with the initial state.
pub fn integrate_open_loop<F>(
    start: CraneState,
    mut input: F,
    params: &CraneParams,
    variant: &FrictionVariant,
    smoothing: &Smoothing,
    dt: f64,
    steps: usize,
    log_every: usize,
) -> Result<Vec<(f64, CraneState)>>
where
    F: FnMut(f64) -> InputForces,
{
    if !(dt > 0.0) || log_every == 0 {
        return Err(CraneError::InvalidInput("step and logging interval must be positive".into()));
    }
    let mut s = start;
    let mut out = vec![(0.0, s)];
    for k in 0..steps {
        let t = k as f64 * dt;
        let mut rhs = |tau: f64| {
            let u = input(tau);
            move |x: &CraneState| -> Result<[f64; 10]> {
                let a = eom_accelerations(x, &u, params, variant, smoothing)?;
                Ok([x.dx_t, a.x_t, x.dy_t, a.y_t, x.dl, a.l, x.dalpha, a.alpha, x.dbeta, a.beta])
            }
        };
        // inputs are sampled at the stage times
        let (f0, fh, f1) = (rhs(t), rhs(t + 0.5 * dt), rhs(t + dt));
        let x = s.to_array();
        let shift = |k: &[f64; 10], c: f64| CraneState::from_array(std::array::from_fn(|i| x[i] + c * k[i]));
        let k1 = f0(&s)?;
        let k2 = fh(&shift(&k1, 0.5 * dt))?;
        let k3 = fh(&shift(&k2, 0.5 * dt))?;
        let k4 = f1(&shift(&k3, dt))?;
        s = CraneState::from_array(std::array::from_fn(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])));
        if (k + 1) % log_every == 0 {
            out.push(((k + 1) as f64 * dt, s));
        }
    }
    Ok(out)
}

/// Payload velocity from the generalized coordinates and rates.
pub fn payload_velocity(s: &CraneState) -> [f64; 3] {
    let (sa, ca) = s.alpha.sin_cos();
    let (sb, cb) = s.beta.sin_cos();
    [
        s.dx_t + s.dl * sb * sa + s.l * (cb * s.dbeta * sa + sb * ca * s.dalpha),
        s.dy_t + s.dl * ca - s.l * sa * s.dalpha,
        -s.dl * sa * cb - s.l * (ca * cb * s.dalpha - sa * sb * s.dbeta),
    ]
}

/// Kinetic plus potential energy of trolleys, hoist drum and payload.
pub fn mechanical_energy(s: &CraneState, params: &CraneParams) -> f64 {
    let v = payload_velocity(s);
    let p = s.payload_position();
    0.5 * params.mass_x() * s.dx_t * s.dx_t
        + 0.5 * params.mass_y() * s.dy_t * s.dy_t
        + 0.5 * params.j_l * s.dl * s.dl
        + 0.5 * params.m_p * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        + params.m_p * params.g * p[2]
}

/// One logged sample of a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSample {
    pub t: f64,
    pub state: CraneState,
    /// References `(x_t, y_t, L)`.
    pub reference: [f64; 3],
    pub u_ff: [f64; 3],
    pub u_fb: [f64; 3],
    /// Command after saturation.
    pub u_applied: [f64; 3],
    pub payload: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimLog {
    pub samples: Vec<SimSample>,
    /// End time of the plan; references are held afterwards.
    pub plan_end: f64,
    /// Time each actuator spent saturated, at integration resolution [s].
    pub saturation_time: [f64; 3],
    /// Set when integration stopped early; the samples up to then are kept.
    pub aborted: Option<String>,
}

pub const SIM_COLUMNS: [&str; 26] = [
    "t", "x_t", "dx_t", "y_t", "dy_t", "L", "dL", "alpha", "dalpha", "beta", "dbeta", "ref_x_t",
    "ref_y_t", "ref_L", "ff_x", "ff_y", "ff_l", "fb_x", "fb_y", "fb_l", "u_x", "u_y", "u_l", "x_p",
    "y_p", "z_p",
];

impl SimLog {
    pub fn write_csv<W: Write>(&self, mut w: W, provenance: &Provenance) -> Result<()> {
        provenance.write_header(&mut w)?;
        if let Some(reason) = &self.aborted {
            writeln!(w, "# aborted: {}", reason.replace('\n', " "))?;
        }
        writeln!(w, "{}", SIM_COLUMNS.join(","))?;
        for s in &self.samples {
            let mut row = Vec::with_capacity(SIM_COLUMNS.len());
            row.push(s.t);
            row.extend_from_slice(&s.state.to_array());
            row.extend_from_slice(&s.reference);
            row.extend_from_slice(&s.u_ff);
            row.extend_from_slice(&s.u_fb);
            row.extend_from_slice(&s.u_applied);
            row.extend_from_slice(&s.payload);
            write_row(&mut w, &row)?;
        }
        Ok(())
    }
}

/// Tracks `plan` with feedforward plus PI feedback on the simulated plant.
///
/// The controller sees only the actuated coordinates and updates the
/// feedback every `cfg.control_dt`; the feedforward follows the plan at the
/// integration rate. References and
/// feedforward hold their final values after the plan ends, and the run
/// continues for `cfg.settle_time`. A singular configuration stops the run
/// and is reported in [`SimLog::aborted`].
pub fn run_closed_loop(plan: &Plan, params: &CraneParams, gains: &PiGains, cfg: &SimConfig) -> Result<SimLog> {
    cfg.validate()?;
    gains.validate()?;
    params.validate()?;
    let first = plan
        .samples
        .first()
        .ok_or_else(|| CraneError::InvalidInput("cannot simulate an empty plan".into()))?;
    let per_log = cfg.steps_per_log();
    let plan_end = plan.duration();
    let logs = ((plan_end + cfg.settle_time) / cfg.log_dt - 1e-9).ceil() as usize;
    let steps = logs * per_log;
    let limits: [(f64, f64); 3] = std::array::from_fn(|i| (params.u_min[i], params.u_max[i]));

    let mut state = first.state;
    let mut pi = [PiState::default(); 3];
    let mut log = SimLog {
        samples: Vec::with_capacity(logs + 1),
        plan_end,
        ..Default::default()
    };
    let per_control = cfg.steps_per_control();
    let mut u_fb = [0.0; 3];
    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let sample = plan.sample_at(t).expect("plan is not empty");
        let reference = sample.reference();
        let u_ff = sample.u_ff.to_array();
        if k % per_control == 0 {
            let measured = state.actuated();
            for i in 0..3 {
                let (fb, next) = pi_step(
                    reference[i],
                    measured[i],
                    u_ff[i],
                    gains.axis(Axis::ALL[i]),
                    pi[i],
                    cfg.control_dt,
                    limits[i],
                );
                pi[i] = next;
                u_fb[i] = fb;
            }
        }
        let mut u_applied = [0.0; 3];
        for i in 0..3 {
            let raw = u_ff[i] + u_fb[i];
            u_applied[i] = raw.clamp(limits[i].0, limits[i].1);
            if raw != u_applied[i] && k < steps {
                log.saturation_time[i] += cfg.dt;
            }
        }
        if k % per_log == 0 {
            log.samples.push(SimSample {
                t,
                state,
                reference,
                u_ff,
                u_fb,
                u_applied,
                payload: state.payload_position(),
            });
        }
        if k == steps {
            break;
        }
        match sim_step(&state, &InputForces::from_array(u_applied), params, cfg) {
            Ok(next) if next.to_array().iter().all(|v| v.is_finite()) => state = next,
            Ok(_) => {
                log.aborted = Some(format!("non-finite state after t = {t:.3} s from {state:?}"));
                break;
            }
            Err(e) => {
                log.aborted = Some(format!("t = {t:.3} s: {e}; state {state:?}"));
                break;
            }
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> CraneParams {
        CraneParams::default()
    }

    #[test]
    fn pi_examples() {
        let g = AxisGains {
            kp: 2.0,
            ki: 0.0,
            integrator_limit: 1.0,
        };
        let (u, _) = pi_step(0.0, 0.0, 0.0, &g, PiState::default(), 1e-3, (-1.0, 1.0));
        assert_eq!(u, 0.0);
        let (u, _) = pi_step(1.0, 0.0, 0.0, &g, PiState::default(), 1e-3, (-10.0, 10.0));
        assert_eq!(u, 2.0);
    }

    #[test]
    fn integrator_stays_bounded_under_saturation() {
        let g = AxisGains {
            kp: 1.0,
            ki: 5.0,
            integrator_limit: 0.7,
        };
        let mut st = PiState::default();
        for _ in 0..10_000 {
            st = pi_step(1.0, 0.0, 0.0, &g, st, 1e-3, (-0.5, 0.5)).1;
            assert!(st.integral.abs() <= 0.7);
        }
        // saturated from the first step, so the integrator never moved
        assert_eq!(st.integral, 0.0);
    }

    #[test]
    fn stiction_examples() {
        let p = params();
        let c = breakaway(Axis::X, 0.5, 1.0, &p);
        assert!(c > 0.0);
        assert_eq!(stiction_force(Axis::X, 0.5, 0.0, 0.0, &p, 1e-3), 0.0);
        assert_eq!(stiction_force(Axis::X, 0.5, 5e-4, 0.5 * c, &p, 1e-3), 0.5 * c);
        assert_eq!(stiction_force(Axis::X, 0.5, 0.0, 2.0 * c, &p, 1e-3), c);
        let v = 0.2;
        let expected = p.d_x_plus * v + crate::model::poly(&p.b_x, 0.5);
        assert!((stiction_force(Axis::X, 0.5, v, 0.0, &p, 1e-3) - expected).abs() < 1e-12);
        let expected = -p.d_x_minus * v - crate::model::poly(&p.a_x, 0.5);
        assert!((stiction_force(Axis::X, 0.5, -v, 0.0, &p, 1e-3) - expected).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let p = params();
        let s = CraneState::at_rest(0.4, 0.5, 0.6);
        let u = InputForces::new(0.0, 0.0, -p.m_p * p.g);
        let next = sim_step(&s, &u, &p, &SimConfig::default()).unwrap();
        for (a, b) in next.to_array().iter().zip(s.to_array()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn trolley_below_breakaway_does_not_move() {
        let p = params();
        let mut s = CraneState::at_rest(0.4, 0.5, 0.6);
        let c = breakaway(Axis::X, 0.4, 1.0, &p);
        let u = InputForces::new(0.9 * c, 0.0, -p.m_p * p.g);
        let cfg = SimConfig::default();
        for _ in 0..1000 {
            s = sim_step(&s, &u, &p, &cfg).unwrap();
        }
        assert_eq!(s.x_t, 0.4);
        assert_eq!(s.dx_t, 0.0);
        let u = InputForces::new(1.5 * c, 0.0, -p.m_p * p.g);
        let s = (0..100).try_fold(s, |s, _| sim_step(&s, &u, &p, &cfg)).unwrap();
        assert!(s.x_t > 0.4);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        let bad = SimConfig {
            log_dt: 0.0105,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SimConfig {
            v_dead: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
