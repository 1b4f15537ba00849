//! Crane parameters, friction laws and the nonlinear equations of motion.
//!
//! Sign convention: every friction term `d(·)` carries the sign of the axis
//! velocity and is subtracted from the applied actuator force, so it always
//! opposes motion. Dry-friction polynomials are pure magnitudes.

use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};
use crate::real::Real;

/// Number of equispaced points used to validate friction polynomials.
pub const POLY_VALIDATION_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Hoist,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Hoist];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Hoist => 2,
        }
    }
}

/// Physical parameters of the crane. Field names in configuration files match
/// the symbols of the dynamic model (`m_r`, `J_x`, `D_x_minus`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CraneParams {
    pub m_r: f64,
    pub m_t: f64,
    pub m_p: f64,
    #[serde(rename = "J_x")]
    pub j_x: f64,
    #[serde(rename = "J_y")]
    pub j_y: f64,
    #[serde(rename = "J_l")]
    pub j_l: f64,
    pub g: f64,
    #[serde(rename = "D_x_minus")]
    pub d_x_minus: f64,
    #[serde(rename = "D_x_plus")]
    pub d_x_plus: f64,
    #[serde(rename = "D_y_minus")]
    pub d_y_minus: f64,
    #[serde(rename = "D_y_plus")]
    pub d_y_plus: f64,
    #[serde(rename = "D_l")]
    pub d_l: f64,
    /// C⁻ polynomial of the X axis (motion towards negative x).
    pub a_x: [f64; 5],
    /// C⁺ polynomial of the X axis.
    pub b_x: [f64; 5],
    pub a_y: [f64; 5],
    pub b_y: [f64; 5],
    #[serde(rename = "C_l")]
    pub c_l: f64,
    pub u_min: [f64; 3],
    pub u_max: [f64; 3],
    pub xt_min: f64,
    pub xt_max: f64,
    pub yt_min: f64,
    pub yt_max: f64,
    #[serde(rename = "L_min")]
    pub l_min: f64,
    #[serde(rename = "L_max")]
    pub l_max: f64,
}

impl Default for CraneParams {
    /// Laboratory-scale crane (roughly 1 m travel, 1 kg payload).
    fn default() -> Self {
        Self {
            m_r: 2.2,
            m_t: 1.2,
            m_p: 1.0,
            j_x: 0.6,
            j_y: 0.4,
            j_l: 0.3,
            g: 9.81,
            d_x_minus: 11.0,
            d_x_plus: 13.0,
            d_y_minus: 8.0,
            d_y_plus: 9.0,
            d_l: 7.0,
            a_x: [3.6, -2.0, 2.2, -0.9, 0.2],
            b_x: [4.4, 1.2, -2.4, 1.2, -0.15],
            a_y: [2.4, 1.5, -1.6, 0.5, 0.0],
            b_y: [3.0, -1.8, 2.5, -0.8, 0.0],
            c_l: 3.0,
            u_min: [-12.0, -9.0, -16.0],
            u_max: [12.0, 9.0, 1.0],
            xt_min: 0.0,
            xt_max: 1.2,
            yt_min: 0.0,
            yt_max: 0.9,
            l_min: 0.15,
            l_max: 0.9,
        }
    }
}

pub(crate) fn poly<S: Real>(c: &[f64; 5], x: S) -> S {
    let mut acc = S::cst(c[4]);
    for k in (0..4).rev() {
        acc = acc * x + S::cst(c[k]);
    }
    acc
}

/// Exact integral of a quartic over `[lo, hi]`.
pub(crate) fn poly_integral(c: &[f64; 5], lo: f64, hi: f64) -> f64 {
    let prim = |x: f64| (0..5).map(|k| c[k] * x.powi(k as i32 + 1) / (k + 1) as f64).sum::<f64>();
    prim(hi) - prim(lo)
}

impl CraneParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CraneError::InvalidParams(m));
        for (name, v) in [("m_r", self.m_r), ("m_t", self.m_t), ("m_p", self.m_p), ("g", self.g)] {
            if !(v > 0.0) {
                return bad(format!("{name} must be strictly positive, got {v}"));
            }
        }
        for (name, v) in [("J_x", self.j_x), ("J_y", self.j_y), ("J_l", self.j_l)] {
            if !(v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        for (name, v) in [
            ("D_x_minus", self.d_x_minus),
            ("D_x_plus", self.d_x_plus),
            ("D_y_minus", self.d_y_minus),
            ("D_y_plus", self.d_y_plus),
            ("D_l", self.d_l),
            ("C_l", self.c_l),
        ] {
            if !(v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.l_min > 0.0 && self.l_min < self.l_max) {
            return bad(format!("need 0 < L_min < L_max, got [{}, {}]", self.l_min, self.l_max));
        }
        if !(self.xt_min < self.xt_max) || !(self.yt_min < self.yt_max) {
            return bad("trolley workspace bounds must satisfy min < max".into());
        }
        for i in 0..3 {
            if !(self.u_min[i] < 0.0 && 0.0 < self.u_max[i]) {
                return bad(format!(
                    "actuator limits must bracket zero on axis {i}: [{}, {}]",
                    self.u_min[i], self.u_max[i]
                ));
            }
        }
        let hold = -self.g * self.m_p;
        if !(self.u_min[2] < hold && hold < self.u_max[2]) {
            return bad(format!(
                "hoist limits [{}, {}] do not bracket the holding force {hold}",
                self.u_min[2], self.u_max[2]
            ));
        }
        let polys = [
            ("a_x", &self.a_x, self.xt_min, self.xt_max),
            ("b_x", &self.b_x, self.xt_min, self.xt_max),
            ("a_y", &self.a_y, self.yt_min, self.yt_max),
            ("b_y", &self.b_y, self.yt_min, self.yt_max),
        ];
        for (name, c, lo, hi) in polys {
            if let Some(x) = first_negative(c, lo, hi) {
                return bad(format!("dry-friction polynomial {name} is negative at {x}"));
            }
        }
        let all = self
            .a_x
            .iter()
            .chain(&self.b_x)
            .chain(&self.a_y)
            .chain(&self.b_y)
            .chain(&self.u_min)
            .chain(&self.u_max)
            .all(|v| v.is_finite());
        if !all {
            return bad("non-finite coefficient".into());
        }
        Ok(())
    }

    /// Combined mass of rail and trolley seen by the X actuator.
    pub fn mass_x(&self) -> f64 {
        self.j_x + self.m_t + self.m_r
    }

    pub fn mass_y(&self) -> f64 {
        self.j_y + self.m_t
    }

    pub fn mass_hoist(&self) -> f64 {
        self.m_p + self.j_l
    }

    pub fn workspace(&self, axis: Axis) -> (f64, f64) {
        match axis {
            Axis::X => (self.xt_min, self.xt_max),
            Axis::Y => (self.yt_min, self.yt_max),
            Axis::Hoist => (self.l_min, self.l_max),
        }
    }

    /// Viscous coefficients (negative direction, positive direction).
    pub(crate) fn viscous_pair(&self, axis: Axis) -> (f64, f64) {
        match axis {
            Axis::X => (self.d_x_minus, self.d_x_plus),
            Axis::Y => (self.d_y_minus, self.d_y_plus),
            Axis::Hoist => (self.d_l, self.d_l),
        }
    }

    pub(crate) fn dry_polys(&self, axis: Axis) -> Option<(&[f64; 5], &[f64; 5])> {
        match axis {
            Axis::X => Some((&self.a_x, &self.b_x)),
            Axis::Y => Some((&self.a_y, &self.b_y)),
            Axis::Hoist => None,
        }
    }
}

/// Returns the first sample where the polynomial is negative, if any.
pub fn first_negative(c: &[f64; 5], lo: f64, hi: f64) -> Option<f64> {
    let n = POLY_VALIDATION_SAMPLES;
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .find(|&x| poly(c, x) < 0.0)
}

/// Planning-model tag for the three friction-model fidelities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Cm,
    Sm,
    Nfm,
}

impl ModelTag {
    pub const ALL: [ModelTag; 3] = [ModelTag::Cm, ModelTag::Sm, ModelTag::Nfm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::Cm => "cm",
            ModelTag::Sm => "sm",
            ModelTag::Nfm => "nfm",
        }
    }
}

impl std::str::FromStr for ModelTag {
    type Err = CraneError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cm" | "complete" => Ok(ModelTag::Cm),
            "sm" | "simplified" => Ok(ModelTag::Sm),
            "nfm" | "nodryfriction" => Ok(ModelTag::Nfm),
            other => Err(CraneError::Config(format!("unknown model variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DryModel {
    /// Position- and direction-dependent quartic polynomials.
    Complete,
    /// One constant magnitude per axis.
    Simplified { x: f64, y: f64, hoist: f64 },
    NoDryFriction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionVariant {
    pub dry: DryModel,
    /// Replace the direction-dependent viscous pair by its mean.
    pub averaged_viscous: bool,
}

impl FrictionVariant {
    pub const COMPLETE: FrictionVariant = FrictionVariant {
        dry: DryModel::Complete,
        averaged_viscous: false,
    };

    pub fn validate(&self) -> Result<()> {
        if let DryModel::Simplified { x, y, hoist } = self.dry {
            if !(x >= 0.0 && y >= 0.0 && hoist >= 0.0) {
                return Err(CraneError::InvalidParams(
                    "simplified dry-friction constants must be non-negative".into(),
                ));
            }
        }
        Ok(())
    }

    /// Variant used when planning with the given model tag. `complete` holds
    /// the identified complete-model coefficients.
    pub fn for_tag(tag: ModelTag, complete: &CraneParams) -> Self {
        match tag {
            ModelTag::Cm => Self::COMPLETE,
            ModelTag::Sm => {
                let [x, y] = simplified_dry_constants(complete);
                Self {
                    dry: DryModel::Simplified {
                        x,
                        y,
                        hoist: complete.c_l,
                    },
                    averaged_viscous: true,
                }
            }
            ModelTag::Nfm => Self {
                dry: DryModel::NoDryFriction,
                averaged_viscous: true,
            },
        }
    }
}

/// Workspace-averaged mean of the C⁻ and C⁺ polynomials for X and Y.
fn simplified_dry_constants(p: &CraneParams) -> [f64; 2] {
    let avg = |c: &[f64; 5], lo: f64, hi: f64| poly_integral(c, lo, hi) / (hi - lo);
    [
        0.5 * (avg(&p.a_x, p.xt_min, p.xt_max) + avg(&p.b_x, p.xt_min, p.xt_max)),
        0.5 * (avg(&p.a_y, p.yt_min, p.yt_max) + avg(&p.b_y, p.yt_min, p.yt_max)),
    ]
}

/// Rewrites complete-model parameters into the parameter set of a reduced
/// model: constant dry coefficients (SM) or none (NFM), averaged viscous terms.
pub fn derive_variant_params(complete: &CraneParams, target: ModelTag) -> CraneParams {
    let mut p = complete.clone();
    if target == ModelTag::Cm {
        return p;
    }
    let dx = 0.5 * (p.d_x_minus + p.d_x_plus);
    let dy = 0.5 * (p.d_y_minus + p.d_y_plus);
    p.d_x_minus = dx;
    p.d_x_plus = dx;
    p.d_y_minus = dy;
    p.d_y_plus = dy;
    let constant = |c: f64| [c, 0.0, 0.0, 0.0, 0.0];
    match target {
        ModelTag::Sm => {
            let [cx, cy] = simplified_dry_constants(complete);
            p.a_x = constant(cx);
            p.b_x = constant(cx);
            p.a_y = constant(cy);
            p.b_y = constant(cy);
        }
        ModelTag::Nfm => {
            p.a_x = [0.0; 5];
            p.b_x = [0.0; 5];
            p.a_y = [0.0; 5];
            p.b_y = [0.0; 5];
            p.c_l = 0.0;
        }
        ModelTag::Cm => unreachable!(),
    }
    p
}

/// Replacement of `sign(·)` by `tanh(v / v_eps)` for differentiable callers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smoothing {
    pub enabled: bool,
    pub v_eps: f64,
}

impl Smoothing {
    pub const DEFAULT_V_EPS: f64 = 0.01;

    pub fn exact() -> Self {
        Self {
            enabled: false,
            v_eps: Self::DEFAULT_V_EPS,
        }
    }

    pub fn tanh(v_eps: f64) -> Self {
        Self { enabled: true, v_eps }
    }
}

impl Default for Smoothing {
    fn default() -> Self {
        Self::tanh(Self::DEFAULT_V_EPS)
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Direction-dependent viscous coefficient (exact piecewise form).
pub fn viscous_coeff(axis: Axis, velocity: f64, params: &CraneParams) -> f64 {
    let (minus, plus) = params.viscous_pair(axis);
    match axis {
        Axis::Hoist => params.d_l,
        _ if velocity < 0.0 => minus,
        _ if velocity > 0.0 => plus,
        _ => 0.0,
    }
}

fn check_workspace(axis: Axis, position: f64, params: &CraneParams) -> Result<()> {
    let (min, max) = params.workspace(axis);
    let slack = 1e-9 * (max - min);
    if position < min - slack || position > max + slack || !position.is_finite() {
        return Err(CraneError::OutOfWorkspace {
            axis,
            position,
            min,
            max,
        });
    }
    Ok(())
}

/// Dry-friction magnitude for the given direction of motion (zero at rest).
pub fn dry_friction(
    axis: Axis,
    position: f64,
    velocity: f64,
    params: &CraneParams,
    variant: &FrictionVariant,
) -> Result<f64> {
    if velocity == 0.0 {
        return Ok(0.0);
    }
    Ok(match variant.dry {
        DryModel::NoDryFriction => 0.0,
        DryModel::Simplified { x, y, hoist } => match axis {
            Axis::X => x,
            Axis::Y => y,
            Axis::Hoist => hoist,
        },
        DryModel::Complete => match params.dry_polys(axis) {
            None => params.c_l,
            Some((minus, plus)) => {
                check_workspace(axis, position, params)?;
                if velocity > 0.0 {
                    poly(plus, position)
                } else {
                    poly(minus, position)
                }
            }
        },
    })
}

/// Breakaway (static) friction level for an axis pushed in `direction`.
pub fn breakaway_force(
    axis: Axis,
    position: f64,
    direction: f64,
    params: &CraneParams,
    variant: &FrictionVariant,
) -> Result<f64> {
    dry_friction(axis, position, direction, params, variant)
}

/// Effective friction `d = D(v)·v + C(x, v)` carrying the sign of `v`.
///
/// With smoothing enabled every sign and branch selection is blended through
/// `tanh(v / v_eps)`, which makes the map C¹ in `v`. Smoothed evaluation does
/// not range-check the position (the polynomial is simply extended), since
/// optimizer iterates may leave the workspace transiently.
pub fn effective_friction<S: Real>(
    axis: Axis,
    position: S,
    velocity: S,
    params: &CraneParams,
    variant: &FrictionVariant,
    smoothing: &Smoothing,
) -> Result<S> {
    if !smoothing.enabled {
        let v = velocity.re();
        let x = position.re();
        let dry = dry_friction(axis, x, v, params, variant)?;
        let visc = viscous_coeff_variant(axis, v, params, variant);
        // derivative information is not meaningful across the exact branches
        return Ok(velocity.scale(visc) + S::cst(sign(v) * dry));
    }
    if !(smoothing.v_eps > 0.0) {
        return Err(CraneError::InvalidInput(format!(
            "smoothing velocity must be positive, got {}",
            smoothing.v_eps
        )));
    }
    let s = velocity.scale(1.0 / smoothing.v_eps).tanh();
    let up = (S::one() + s).scale(0.5);
    let down = (S::one() - s).scale(0.5);
    let (d_minus, d_plus) = params.viscous_pair(axis);
    let visc = if variant.averaged_viscous || axis == Axis::Hoist {
        S::cst(0.5 * (d_minus + d_plus))
    } else {
        up.scale(d_plus) + down.scale(d_minus)
    };
    let dry = match variant.dry {
        DryModel::NoDryFriction => S::zero(),
        DryModel::Simplified { x, y, hoist } => s.scale(match axis {
            Axis::X => x,
            Axis::Y => y,
            Axis::Hoist => hoist,
        }),
        DryModel::Complete => match params.dry_polys(axis) {
            None => s.scale(params.c_l),
            Some((minus, plus)) => s * (up * poly(plus, position) + down * poly(minus, position)),
        },
    };
    Ok(visc * velocity + dry)
}

fn viscous_coeff_variant(axis: Axis, v: f64, params: &CraneParams, variant: &FrictionVariant) -> f64 {
    if variant.averaged_viscous && v != 0.0 {
        let (m, p) = params.viscous_pair(axis);
        0.5 * (m + p)
    } else {
        viscous_coeff(axis, v, params)
    }
}

/// Generalized coordinates and velocities of the crane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CraneState {
    pub x_t: f64,
    pub y_t: f64,
    pub dx_t: f64,
    pub dy_t: f64,
    pub l: f64,
    pub dl: f64,
    pub alpha: f64,
    pub beta: f64,
    pub dalpha: f64,
    pub dbeta: f64,
}

impl CraneState {
    /// Payload hanging straight down below a trolley at rest.
    pub fn at_rest(x_t: f64, y_t: f64, l: f64) -> Self {
        Self {
            x_t,
            y_t,
            l,
            alpha: std::f64::consts::FRAC_PI_2,
            ..Default::default()
        }
    }

    /// Ordering `[x_t, ẋ_t, y_t, ẏ_t, L, L̇, α, α̇, β, β̇]`.
    pub fn to_array(&self) -> [f64; 10] {
        [
            self.x_t, self.dx_t, self.y_t, self.dy_t, self.l, self.dl, self.alpha, self.dalpha,
            self.beta, self.dbeta,
        ]
    }

    pub fn from_array(a: [f64; 10]) -> Self {
        Self {
            x_t: a[0],
            dx_t: a[1],
            y_t: a[2],
            dy_t: a[3],
            l: a[4],
            dl: a[5],
            alpha: a[6],
            dalpha: a[7],
            beta: a[8],
            dbeta: a[9],
        }
    }

    /// Actuated coordinates `(x_t, y_t, L)`.
    pub fn actuated(&self) -> [f64; 3] {
        [self.x_t, self.y_t, self.l]
    }

    pub fn actuated_velocity(&self) -> [f64; 3] {
        [self.dx_t, self.dy_t, self.dl]
    }

    pub fn trolley_point(&self) -> [f64; 3] {
        [self.x_t, self.y_t, 0.0]
    }

    /// Forward kinematics of the rigid rope.
    pub fn payload_position(&self) -> [f64; 3] {
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        [
            self.x_t + self.l * sb * sa,
            self.y_t + self.l * ca,
            -self.l * sa * cb,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InputForces {
    pub f_x: f64,
    pub f_y: f64,
    pub f_l: f64,
}

impl InputForces {
    pub fn new(f_x: f64, f_y: f64, f_l: f64) -> Self {
        Self { f_x, f_y, f_l }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.f_x, self.f_y, self.f_l]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Second derivatives of the generalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Accelerations {
    pub x_t: f64,
    pub y_t: f64,
    pub l: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Minimum |sin α| accepted before the β equation is declared singular.
pub const SIN_ALPHA_TOL: f64 = 1e-6;

/// Evaluates the equations of motion with explicit friction forces
/// `d = (d_x, d_y, d_l)`.
pub fn accelerations_with_friction(
    s: &CraneState,
    u: &InputForces,
    d: [f64; 3],
    params: &CraneParams,
) -> Result<Accelerations> {
    if !(s.l > 0.0) {
        return Err(CraneError::Singular {
            equation: "rope length",
            detail: format!("L = {}", s.l),
        });
    }
    let (sa, ca) = s.alpha.sin_cos();
    let (sb, cb) = s.beta.sin_cos();
    if sa.abs() < SIN_ALPHA_TOL {
        return Err(CraneError::Singular {
            equation: "beta dynamics",
            detail: format!("sin(alpha) = {sa:.3e}"),
        });
    }
    let mp = params.m_p;
    let g = params.g;
    let rope = u.f_l - d[2];
    let xdd = (u.f_x - d[0] - rope * sa * sb) / params.mass_x();
    let ydd = (u.f_y - d[1] - rope * ca) / params.mass_y();
    let ldd = (rope - mp * ca * ydd + mp * s.l * s.dalpha * s.dalpha + mp * s.l * s.dbeta * s.dbeta
        - mp * ca * ca * s.l * s.dbeta * s.dbeta
        - mp * sa * sb * xdd
        + g * mp * cb * sa)
        / params.mass_hoist();
    let add = (sa * ydd - ca * sb * xdd + g * ca * cb + ca * sa * s.l * s.dbeta * s.dbeta
        - 2.0 * s.dl * s.dalpha)
        / s.l;
    let bdd = (-g * sb - cb * xdd - 2.0 * sa * s.dl * s.dbeta - 2.0 * ca * s.l * s.dalpha * s.dbeta)
        / (sa * s.l);
    Ok(Accelerations {
        x_t: xdd,
        y_t: ydd,
        l: ldd,
        alpha: add,
        beta: bdd,
    })
}

/// Full nonlinear equations of motion with friction from [`effective_friction`].
pub fn eom_accelerations(
    state: &CraneState,
    u: &InputForces,
    params: &CraneParams,
    variant: &FrictionVariant,
    smoothing: &Smoothing,
) -> Result<Accelerations> {
    let d = [
        effective_friction(Axis::X, state.x_t, state.dx_t, params, variant, smoothing)?,
        effective_friction(Axis::Y, state.y_t, state.dy_t, params, variant, smoothing)?,
        effective_friction(Axis::Hoist, state.l, state.dl, params, variant, smoothing)?,
    ];
    accelerations_with_friction(state, u, d, params)
}
