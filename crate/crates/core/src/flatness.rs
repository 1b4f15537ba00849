//! Flat-output machinery.
//!
//! The payload position `r_p` is a flat output of the crane: trolley
//! position, rope length, swing angles and the actuator forces are algebraic
//! functions of `r_p` and its first four time derivatives. Derivatives are
//! propagated through the inverse kinematic maps with truncated Taylor jets,
//! and the flat dynamics reduce to three decoupled quadruple integrators
//! driven by the snap.

use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};
use crate::jet::Jet;
use crate::model::{
    effective_friction, Axis, CraneParams, CraneState, FrictionVariant, InputForces, Smoothing,
};
use crate::plan::{Plan, PlanSample};
use crate::real::Real;

/// Smallest admissible `z̈_p + g` for the inverse maps (rope under tension).
pub const FREE_FALL_TOL: f64 = 1e-6;

/// Payload position and its first four time derivatives, per axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlatJet {
    /// `axes[i][k]` is the `k`-th derivative of coordinate `i` (x, y, z).
    pub axes: [[f64; 5]; 3],
}

impl FlatJet {
    pub fn at_rest(p: [f64; 3]) -> Self {
        let mut axes = [[0.0; 5]; 3];
        for i in 0..3 {
            axes[i][0] = p[i];
        }
        Self { axes }
    }

    pub fn from_state_and_snap(x: &FlatState, snap: [f64; 3]) -> Self {
        let mut axes = [[0.0; 5]; 3];
        for i in 0..3 {
            axes[i][..4].copy_from_slice(&x.0[4 * i..4 * i + 4]);
            axes[i][4] = snap[i];
        }
        Self { axes }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.axes[0][0], self.axes[1][0], self.axes[2][0]]
    }

    pub fn derivative(&self, k: usize) -> [f64; 3] {
        [self.axes[0][k], self.axes[1][k], self.axes[2][k]]
    }

    pub fn flat_state(&self) -> FlatState {
        let mut s = [0.0; 12];
        for i in 0..3 {
            s[4 * i..4 * i + 4].copy_from_slice(&self.axes[i][..4]);
        }
        FlatState(s)
    }

    pub fn snap(&self) -> [f64; 3] {
        self.derivative(4)
    }

    pub fn is_finite(&self) -> bool {
        self.axes.iter().flatten().all(|v| v.is_finite())
    }
}

/// State of the flat integrator chain,
/// `[x_p, ẋ_p, ẍ_p, x_p⁽³⁾, y_p, …, z_p⁽³⁾]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlatState(pub [f64; 12]);

impl FlatState {
    pub fn at_rest(p: [f64; 3]) -> Self {
        FlatJet::at_rest(p).flat_state()
    }

    pub fn position(&self) -> [f64; 3] {
        [self.0[0], self.0[4], self.0[8]]
    }

    /// Derivative `k` (0..=3) of every axis.
    pub fn derivative(&self, k: usize) -> [f64; 3] {
        [self.0[k], self.0[4 + k], self.0[8 + k]]
    }
}

/// Swing angles from the payload acceleration.
pub fn angles_from_accel(acc: [f64; 3], g: f64) -> Result<(f64, f64)> {
    let tension = acc[2] + g;
    if !(tension > FREE_FALL_TOL) {
        return Err(CraneError::FreeFall { margin: tension });
    }
    let alpha = (acc[0] * acc[0] + tension * tension).sqrt().atan2(-acc[1]);
    let beta = (-acc[0]).atan2(tension);
    Ok((alpha, beta))
}

/// Actuated coordinates, swing angles and inputs as jets (exact to order 2).
#[derive(Debug, Clone, Copy)]
pub struct FlatImage<S: Real> {
    pub x_t: Jet<S>,
    pub y_t: Jet<S>,
    pub l: Jet<S>,
    pub alpha: Jet<S>,
    pub beta: Jet<S>,
    pub input: [S; 3],
}

/// Inverse kinematic maps without the force computation.
pub fn flat_kinematics<S: Real>(axes: &[[S; 5]; 3], g: f64) -> Result<FlatImage<S>> {
    let jets: [Jet<S>; 3] = std::array::from_fn(|i| Jet::from_derivatives(axes[i]));
    let acc: [Jet<S>; 3] = std::array::from_fn(|i| jets[i].differentiate().differentiate());
    let tension = acc[2].add_scalar(S::cst(g));
    if !(tension.value().re() > FREE_FALL_TOL) {
        return Err(CraneError::FreeFall {
            margin: tension.value().re(),
        });
    }
    let radial = (acc[0] * acc[0] + tension * tension).sqrt();
    let alpha = radial.atan2(&-acc[1]);
    let beta = (-acc[0]).atan2(&tension);
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let denom = sa * cb;
    if !(denom.value().re() > 1e-9) {
        return Err(CraneError::Singular {
            equation: "rope length map",
            detail: format!("sin(alpha) cos(beta) = {:.3e}", denom.value().re()),
        });
    }
    let l = -jets[2] / denom;
    let x_t = jets[0] - l * sb * sa;
    let y_t = jets[1] - l * ca;
    Ok(FlatImage {
        x_t,
        y_t,
        l,
        alpha,
        beta,
        input: [S::zero(); 3],
    })
}

/// Full flat map: kinematics plus the actuator forces `u = ψ(r_p, …, r_p⁽⁴⁾, θ)`.
pub fn flat_map<S: Real>(
    axes: &[[S; 5]; 3],
    params: &CraneParams,
    variant: &FrictionVariant,
    smoothing: &Smoothing,
) -> Result<FlatImage<S>> {
    let mut img = flat_kinematics(axes, params.g)?;
    let d = |j: &Jet<S>, k| j.derivative(k);
    let (x_t, dx_t, ddx_t) = (d(&img.x_t, 0), d(&img.x_t, 1), d(&img.x_t, 2));
    let (y_t, dy_t, ddy_t) = (d(&img.y_t, 0), d(&img.y_t, 1), d(&img.y_t, 2));
    let (l, dl, ddl) = (d(&img.l, 0), d(&img.l, 1), d(&img.l, 2));
    let (a, da) = (d(&img.alpha, 0), d(&img.alpha, 1));
    let (b, db) = (d(&img.beta, 0), d(&img.beta, 1));
    let (sa, ca) = (a.sin(), a.cos());
    let (sb, cb) = (b.sin(), b.cos());
    let mp = params.m_p;
    let g = params.g;

    // hoist equation solved for the net rope force f_l - d_l
    let rope = ddl.scale(params.mass_hoist()) + (ca * ddy_t).scale(mp) + (sa * sb * ddx_t).scale(mp)
        - (l * da * da).scale(mp)
        - (l * db * db * sa * sa).scale(mp)
        - (cb * sa).scale(g * mp);
    let d_x = effective_friction(Axis::X, x_t, dx_t, params, variant, smoothing)?;
    let d_y = effective_friction(Axis::Y, y_t, dy_t, params, variant, smoothing)?;
    let d_l = effective_friction(Axis::Hoist, l, dl, params, variant, smoothing)?;
    let f_l = rope + d_l;
    let f_x = ddx_t.scale(params.mass_x()) + d_x + rope * sa * sb;
    let f_y = ddy_t.scale(params.mass_y()) + d_y + rope * ca;
    img.input = [f_x, f_y, f_l];
    Ok(img)
}

fn image_to_state(img: &FlatImage<f64>) -> CraneState {
    CraneState {
        x_t: img.x_t.value(),
        y_t: img.y_t.value(),
        dx_t: img.x_t.derivative(1),
        dy_t: img.y_t.derivative(1),
        l: img.l.value(),
        dl: img.l.derivative(1),
        alpha: img.alpha.value(),
        beta: img.beta.value(),
        dalpha: img.alpha.derivative(1),
        dbeta: img.beta.derivative(1),
    }
}

/// Crane state corresponding to a flat jet.
pub fn flat_to_state(jet: &FlatJet, params: &CraneParams) -> Result<CraneState> {
    flat_kinematics(&jet.axes, params.g).map(|img| image_to_state(&img))
}

/// Actuator forces realizing the flat jet (friction in smoothed form).
pub fn flat_to_input(
    jet: &FlatJet,
    params: &CraneParams,
    variant: &FrictionVariant,
    smoothing: &Smoothing,
) -> Result<InputForces> {
    flat_map(&jet.axes, params, variant, smoothing).map(|img| InputForces::from_array(img.input))
}

/// State and input in one pass.
pub fn flat_to_state_and_input(
    jet: &FlatJet,
    params: &CraneParams,
    variant: &FrictionVariant,
    smoothing: &Smoothing,
) -> Result<(CraneState, InputForces)> {
    let img = flat_map(&jet.axes, params, variant, smoothing)?;
    Ok((image_to_state(&img), InputForces::from_array(img.input)))
}

/// Exact zero-order-hold step of the integrator chain. The per-axis system
/// matrix is nilpotent, so the matrix exponential is a finite Taylor sum.
pub fn flat_step(x: &FlatState, snap: [f64; 3], dt: f64) -> FlatState {
    let h = dt;
    let (h2, h3, h4) = (h * h / 2.0, h * h * h / 6.0, h * h * h * h / 24.0);
    let mut out = [0.0; 12];
    for i in 0..3 {
        let [p, v, a, j] = [x.0[4 * i], x.0[4 * i + 1], x.0[4 * i + 2], x.0[4 * i + 3]];
        let s = snap[i];
        out[4 * i] = p + v * h + a * h2 + j * h3 + s * h4;
        out[4 * i + 1] = v + a * h + j * h2 + s * h3;
        out[4 * i + 2] = a + j * h + s * h2;
        out[4 * i + 3] = j + s * h;
    }
    FlatState(out)
}

/// Classical fourth-order Runge–Kutta step of the integrator chain with the
/// snap held constant. Generic so that the step length can be a decision
/// variable under automatic differentiation.
pub fn flat_rk4_step<S: Real>(x: &[S; 12], snap: &[S; 3], h: S) -> [S; 12] {
    let rhs = |y: &[S; 12]| -> [S; 12] {
        let mut d = [S::zero(); 12];
        for i in 0..3 {
            d[4 * i] = y[4 * i + 1];
            d[4 * i + 1] = y[4 * i + 2];
            d[4 * i + 2] = y[4 * i + 3];
            d[4 * i + 3] = snap[i];
        }
        d
    };
    let axpy = |y: &[S; 12], k: &[S; 12], c: S| -> [S; 12] { std::array::from_fn(|i| y[i] + k[i] * c) };
    let half = h.scale(0.5);
    let k1 = rhs(x);
    let k2 = rhs(&axpy(x, &k1, half));
    let k3 = rhs(&axpy(x, &k2, half));
    let k4 = rhs(&axpy(x, &k3, h));
    let sixth = h.scale(1.0 / 6.0);
    std::array::from_fn(|i| x[i] + (k1[i] + (k2[i] + k3[i]).scale(2.0) + k4[i]) * sixth)
}

/// Maps an optimized flat trajectory to actuated-coordinate references and
/// the feedforward force. `snaps[k]` acts on `[t_k, t_{k+1})`; the last node
/// uses `snap_end`.
pub fn trajectory_to_plan(
    nodes: &[FlatState],
    snaps: &[[f64; 3]],
    dt: f64,
    params: &CraneParams,
    variant: &FrictionVariant,
    smoothing: &Smoothing,
) -> Result<Plan> {
    if nodes.is_empty() {
        return Err(CraneError::InvalidInput("empty trajectory".into()));
    }
    if snaps.len() + 1 != nodes.len() && snaps.len() != nodes.len() {
        return Err(CraneError::InvalidInput(format!(
            "{} nodes need {} or {} snaps, got {}",
            nodes.len(),
            nodes.len() - 1,
            nodes.len(),
            snaps.len()
        )));
    }
    if nodes.len() > 1 && !(dt > 0.0) {
        return Err(CraneError::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let samples = nodes
        .iter()
        .enumerate()
        .map(|(k, node)| {
            let snap = snaps.get(k).copied().unwrap_or([0.0; 3]);
            let jet = FlatJet::from_state_and_snap(node, snap);
            let (state, input) =
                flat_to_state_and_input(&jet, params, variant, smoothing).map_err(|e| e.at_node(k))?;
            Ok(PlanSample {
                t: k as f64 * dt,
                jet,
                state,
                u_ff: input,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Plan { samples })
}

/// Resamples a piecewise-constant-snap trajectory on a uniform output grid
/// using exact propagation inside each interval. When the duration is not a
/// multiple of `dt_out` the terminal node is placed on the next grid point,
/// which is exact for trajectories that end at rest.
pub fn resample_flat(nodes: &[FlatState], snaps: &[[f64; 3]], dt_node: f64, dt_out: f64) -> (Vec<FlatState>, Vec<[f64; 3]>) {
    if nodes.len() < 2 || !(dt_out > 0.0) {
        return (nodes.to_vec(), snaps.to_vec());
    }
    let intervals = nodes.len() - 1;
    let total = intervals as f64 * dt_node;
    let count = (total / dt_out + 1e-9).floor() as usize;
    let mut states = Vec::with_capacity(count + 2);
    let mut out_snaps = Vec::with_capacity(count + 2);
    for i in 0..=count {
        let t = (i as f64 * dt_out).min(total);
        let k = ((t / dt_node).floor() as usize).min(intervals - 1);
        let tau = t - k as f64 * dt_node;
        states.push(flat_step(&nodes[k], snaps[k], tau));
        out_snaps.push(snaps[k]);
    }
    if total - count as f64 * dt_out > 1e-9 {
        states.push(nodes[intervals]);
        out_snaps.push(snaps.get(intervals).copied().unwrap_or([0.0; 3]));
    } else if let Some(last) = states.last_mut() {
        // land exactly on the terminal node
        *last = nodes[intervals];
        if let Some(s) = out_snaps.last_mut() {
            *s = snaps.get(intervals).copied().unwrap_or([0.0; 3]);
        }
    }
    (states, out_snaps)
}
