//! Box obstacles, rope discretization and clearance evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};
use crate::flatness::{flat_to_state, FlatJet, FlatState};
use crate::model::CraneParams;
use crate::plan::Plan;
use crate::real::Real;

/// Regularization length of the smoothed Euclidean norm used by the optimizer.
pub const NORM_SMOOTHING: f64 = 1e-6;

/// Axis-aligned box `[X_min, X_max] × [Y_min, Y_max] × [Z_min, Z_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxObstacle {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoxObstacle {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        let b = Self { min, max };
        b.validate()?;
        Ok(b)
    }

    /// From the six-number form `[X_min, X_max, Y_min, Y_max, Z_min, Z_max]`.
    pub fn from_limits(l: [f64; 6]) -> Result<Self> {
        Self::new([l[0], l[2], l[4]], [l[1], l[3], l[5]])
    }

    pub fn limits(&self) -> [f64; 6] {
        [self.min[0], self.max[0], self.min[1], self.max[1], self.min[2], self.max[2]]
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..3 {
            if !(self.min[i] < self.max[i]) {
                return Err(CraneError::InvalidInput(format!(
                    "box axis {i}: min {} must be below max {}",
                    self.min[i], self.max[i]
                )));
            }
        }
        Ok(())
    }

    pub fn inflated(&self, margin: f64) -> Self {
        Self {
            min: self.min.map(|v| v - margin),
            max: self.max.map(|v| v + margin),
        }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Exact test whether the segment `a → b` touches the box (slab method).
    pub fn intersects_segment(&self, a: [f64; 3], b: [f64; 3]) -> bool {
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for i in 0..3 {
            let d = b[i] - a[i];
            if d.abs() < 1e-15 {
                if a[i] < self.min[i] || a[i] > self.max[i] {
                    return false;
                }
            } else {
                let (mut lo, mut hi) = ((self.min[i] - a[i]) / d, (self.max[i] - a[i]) / d);
                if lo > hi {
                    std::mem::swap(&mut lo, &mut hi);
                }
                t0 = t0.max(lo);
                t1 = t1.min(hi);
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClearanceConfig {
    /// Number of rope sample points, trolley and payload included.
    pub n_rope: usize,
    /// Safety margin ε [m].
    pub margin: f64,
}

impl Default for ClearanceConfig {
    fn default() -> Self {
        Self {
            n_rope: 9,
            margin: 0.01,
        }
    }
}

impl ClearanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rope < 2 {
            return Err(CraneError::InvalidInput(format!("need at least 2 rope points, got {}", self.n_rope)));
        }
        if !(self.margin >= 0.0) {
            return Err(CraneError::InvalidInput(format!("margin must be non-negative, got {}", self.margin)));
        }
        Ok(())
    }
}

/// `n` equidistant points from the trolley (first) to the payload (last).
pub fn rope_points<S: Real>(trolley: [S; 3], payload: [S; 3], n: usize) -> Vec<[S; 3]> {
    let n = n.max(2);
    (0..n)
        .map(|j| {
            let w = j as f64 / (n - 1) as f64;
            std::array::from_fn(|i| trolley[i].scale(1.0 - w) + payload[i].scale(w))
        })
        .collect()
}

fn axis_gaps<S: Real>(p: [S; 3], b: &BoxObstacle) -> [S; 3] {
    std::array::from_fn(|i| {
        S::zero()
            .max(S::cst(b.min[i]) - p[i])
            .max(p[i] - S::cst(b.max[i]))
    })
}

/// Clearance `φ = ‖d‖₂ − ε`; non-negative means safe.
pub fn box_clearance(p: [f64; 3], b: &BoxObstacle, margin: f64) -> f64 {
    let d = axis_gaps(p, b);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() - margin
}

/// Signed distance to the box: the exterior distance outside, minus the
/// penetration depth inside. Used for collision checks, where the exterior
/// form cannot tell a point inside the box from one on its surface.
pub fn box_signed_distance(p: [f64; 3], b: &BoxObstacle) -> f64 {
    if b.contains(p) {
        -(0..3).map(|i| (p[i] - b.min[i]).min(b.max[i] - p[i])).fold(f64::INFINITY, f64::min)
    } else {
        box_clearance(p, b, 0.0)
    }
}

/// Differentiable clearance with `√(‖d‖² + δ²) − δ` in place of the norm.
pub fn box_clearance_smooth<S: Real>(p: [S; 3], b: &BoxObstacle, margin: f64) -> S {
    let d = axis_gaps(p, b);
    let delta = NORM_SMOOTHING;
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + S::cst(delta * delta)).sqrt() - S::cst(delta + margin)
}

/// Clearance of every rope sample `j` against every obstacle `i`, indexed
/// `[j][i]`. The last row is the payload.
pub fn clearance_all(
    x: &FlatState,
    obstacles: &[BoxObstacle],
    cfg: &ClearanceConfig,
    params: &CraneParams,
) -> Result<Vec<Vec<f64>>> {
    let jet = FlatJet::from_state_and_snap(x, [0.0; 3]);
    let s = flat_to_state(&jet, params)?;
    Ok(rope_clearances(s.trolley_point(), x.position(), obstacles, cfg.n_rope, cfg.margin))
}

pub fn rope_clearances(
    trolley: [f64; 3],
    payload: [f64; 3],
    obstacles: &[BoxObstacle],
    n_rope: usize,
    margin: f64,
) -> Vec<Vec<f64>> {
    if obstacles.is_empty() {
        return Vec::new();
    }
    rope_points(trolley, payload, n_rope)
        .into_iter()
        .map(|p| obstacles.iter().map(|b| box_clearance(p, b, margin)).collect())
        .collect()
}

/// Signed clearance `box_signed_distance − margin` of every rope sample
/// against every obstacle, indexed like [`rope_clearances`].
pub fn rope_signed_clearances(
    trolley: [f64; 3],
    payload: [f64; 3],
    obstacles: &[BoxObstacle],
    n_rope: usize,
    margin: f64,
) -> Vec<Vec<f64>> {
    if obstacles.is_empty() {
        return Vec::new();
    }
    rope_points(trolley, payload, n_rope)
        .into_iter()
        .map(|p| obstacles.iter().map(|b| box_signed_distance(p, b) - margin).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub collided: bool,
    pub first_violation_time: Option<f64>,
    /// Minimum signed clearance (negative inside an obstacle) over the
    /// densified trajectory; `+∞` (serialized as `null`) when there are no
    /// obstacles.
    #[serde(with = "inf_as_null")]
    pub min_clearance: f64,
    /// Time at which the minimum clearance occurs.
    pub min_clearance_time: Option<f64>,
    /// Per-obstacle collision flags.
    pub obstacle_hit: Vec<bool>,
    pub margin: f64,
    pub oversample: usize,
    pub samples_checked: usize,
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Checks a plan for collisions on a grid `oversample` times finer than its
/// samples, interpolating flat states linearly. `margin = 0` tests for true
/// contact; a positive margin tests the safety envelope.
pub fn verify_trajectory(
    plan: &Plan,
    obstacles: &[BoxObstacle],
    n_rope: usize,
    margin: f64,
    oversample: usize,
    params: &CraneParams,
) -> Result<CollisionReport> {
    if oversample < 1 {
        return Err(CraneError::InvalidInput("oversample factor must be at least 1".into()));
    }
    let mut report = CollisionReport {
        collided: false,
        first_violation_time: None,
        min_clearance: f64::INFINITY,
        min_clearance_time: None,
        obstacle_hit: vec![false; obstacles.len()],
        margin,
        oversample,
        samples_checked: 0,
    };
    let mut check = |t: f64, jet: &FlatJet| -> Result<()> {
        report.samples_checked += 1;
        if obstacles.is_empty() {
            return Ok(());
        }
        let state = flat_to_state(jet, params)?;
        let phi = rope_signed_clearances(state.trolley_point(), jet.position(), obstacles, n_rope, margin);
        for row in &phi {
            for (i, &v) in row.iter().enumerate() {
                if v < report.min_clearance {
                    report.min_clearance = v;
                    report.min_clearance_time = Some(t);
                }
                if v < 0.0 {
                    report.obstacle_hit[i] = true;
                    report.collided = true;
                    if report.first_violation_time.is_none() {
                        report.first_violation_time = Some(t);
                    }
                }
            }
        }
        Ok(())
    };
    let samples = &plan.samples;
    for (k, s) in samples.iter().enumerate() {
        check(s.t, &s.jet).map_err(|e| e.at_node(k))?;
        if let Some(next) = samples.get(k + 1) {
            for m in 1..oversample {
                let w = m as f64 / oversample as f64;
                let mut axes = [[0.0; 5]; 3];
                for ax in 0..3 {
                    for d in 0..5 {
                        axes[ax][d] = s.jet.axes[ax][d] + w * (next.jet.axes[ax][d] - s.jet.axes[ax][d]);
                    }
                }
                let t = s.t + w * (next.t - s.t);
                check(t, &FlatJet { axes }).map_err(|e| e.at_node(k))?;
            }
        }
    }
    Ok(report)
}
