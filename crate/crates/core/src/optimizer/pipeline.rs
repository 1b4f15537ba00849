//! Two-stage planner: geometric seed, then trajectory optimization, then
//! independent collision verification of the resampled plan.

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nlp::NlpProblem;
use super::sqp::{solve, SolveReport, SolveStatus, SqpOptions};
use super::transcription::{CraneNlp, PathSpec, Transcription};
use crate::error::{CraneError, Result};
use crate::flatness::{resample_flat, trajectory_to_plan, FlatState};
use crate::geometry::{verify_trajectory, BoxObstacle, ClearanceConfig, CollisionReport};
use crate::model::{Axis, CraneParams, FrictionVariant, Smoothing};
use crate::plan::Plan;
use crate::seed::{plan_guess, Bounds, SeedConfig};

/// Rest-to-rest transfer of the payload between two positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub start: [f64; 3],
    pub goal: [f64; 3],
    /// Obstacles as `[x_min, x_max, y_min, y_max, z_min, z_max]`.
    #[serde(default, with = "box_list")]
    pub obstacles: Vec<BoxObstacle>,
}

mod box_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::geometry::BoxObstacle;

    pub fn serialize<S: Serializer>(v: &[BoxObstacle], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(BoxObstacle::limits).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BoxObstacle>, D::Error> {
        Vec::<[f64; 6]>::deserialize(d)?
            .into_iter()
            .map(|l| BoxObstacle::from_limits(l).map_err(serde::de::Error::custom))
            .collect()
    }
}

impl Scenario {
    pub fn validate(&self, params: &CraneParams) -> Result<()> {
        for o in &self.obstacles {
            o.validate()?;
        }
        let b = payload_bounds(params);
        for (name, p) in [("start", self.start), ("goal", self.goal)] {
            if !b.contains(p) {
                return Err(CraneError::InvalidInput(format!(
                    "{name} {p:?} is outside the payload workspace {:?}..{:?}",
                    b.min, b.max
                )));
            }
        }
        Ok(())
    }
}

/// Payload positions reachable at rest.
pub fn payload_bounds(params: &CraneParams) -> Bounds {
    let (x0, x1) = params.workspace(Axis::X);
    let (y0, y1) = params.workspace(Axis::Y);
    Bounds {
        min: [x0, y0, -params.l_max],
        max: [x1, y1, -params.l_min],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub intervals: usize,
    pub lambda: f64,
    /// Final-time bounds relative to the guess duration.
    pub t_lower_factor: f64,
    pub t_upper_factor: f64,
    /// Output sampling time of the plan [s].
    pub output_dt: f64,
    pub oversample: usize,
    /// Safety margin ε [m].
    pub margin: f64,
    pub n_rope: usize,
    /// Extra margin rounds used when verification finds inter-node dips.
    pub margin_refinements: usize,
    pub v_eps: f64,
    pub multistart: usize,
    pub seed: SeedConfig,
    pub sqp: SqpOptions,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            intervals: 100,
            lambda: 0.001,
            t_lower_factor: 0.5,
            t_upper_factor: 3.0,
            output_dt: 0.01,
            oversample: 10,
            margin: 0.01,
            n_rope: 9,
            margin_refinements: 4,
            v_eps: 0.003,
            multistart: 1,
            seed: SeedConfig::default(),
            sqp: SqpOptions::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CraneError::InvalidInput(m));
        if self.intervals < 2 {
            return bad(format!("need at least 2 intervals, got {}", self.intervals));
        }
        if !(self.output_dt > 0.0) || self.oversample < 1 {
            return bad("output step must be positive and oversampling at least 1".into());
        }
        if !(self.t_lower_factor > 0.0) || !(self.t_upper_factor >= self.t_lower_factor) {
            return bad("final-time factors must satisfy 0 < lower <= upper".into());
        }
        if !(self.v_eps > 0.0) || self.multistart < 1 {
            return bad("smoothing width must be positive and multistart at least 1".into());
        }
        self.clearance().validate()?;
        self.seed.validate(self.margin)?;
        self.sqp.validate()
    }

    pub fn clearance(&self) -> ClearanceConfig {
        ClearanceConfig {
            n_rope: self.n_rope,
            margin: self.margin,
        }
    }

    pub fn smoothing(&self) -> Smoothing {
        Smoothing::tanh(self.v_eps)
    }
}

/// Successful planning result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    #[serde(skip)]
    pub plan: Plan,
    #[serde(skip)]
    pub nodes: Vec<FlatState>,
    #[serde(skip)]
    pub snaps: Vec<[f64; 3]>,
    pub report: SolveReport,
    pub verification: CollisionReport,
    pub t_guess: f64,
    pub t_end: f64,
    /// Margin used in the optimization (ε plus any refinement).
    pub optimized_margin: f64,
    pub waypoints: Vec<[f64; 3]>,
    pub rrt_seed: u64,
}

/// Plans one rest-to-rest trajectory. With `cfg.multistart > 1` several
/// RRT* seeds are tried concurrently and the fastest verified plan wins.
pub fn plan_pipeline(
    scenario: &Scenario,
    params: &CraneParams,
    variant: &FrictionVariant,
    cfg: &PlannerConfig,
) -> Result<PlanOutcome> {
    cfg.validate()?;
    params.validate()?;
    variant.validate()?;
    scenario.validate(params)?;
    if cfg.multistart == 1 {
        return plan_single(scenario, params, variant, cfg, cfg.seed.rng_seed);
    }
    let results: Vec<Result<PlanOutcome>> = (0..cfg.multistart as u64)
        .into_par_iter()
        .map(|i| plan_single(scenario, params, variant, cfg, cfg.seed.rng_seed.wrapping_add(i)))
        .collect();
    let mut best: Option<PlanOutcome> = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(o) => {
                if best.as_ref().map_or(true, |b| o.report.objective < b.report.objective) {
                    best = Some(o);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one start"))
}

fn plan_single(
    scenario: &Scenario,
    params: &CraneParams,
    variant: &FrictionVariant,
    cfg: &PlannerConfig,
    rrt_seed: u64,
) -> Result<PlanOutcome> {
    let seed_cfg = SeedConfig {
        rng_seed: rrt_seed,
        ..cfg.seed.clone()
    };
    let bounds = payload_bounds(params);
    let (waypoints, guess) = plan_guess(
        scenario.start,
        scenario.goal,
        &scenario.obstacles,
        &bounds,
        &seed_cfg,
        cfg.intervals,
    )
    .map_err(|e| e.in_stage("seed"))?;
    let t_guess = guess.duration;
    debug!("seed: {} waypoints, T_guess = {t_guess:.3} s", waypoints.len());

    let tr = Transcription::new(
        cfg.intervals,
        cfg.lambda,
        cfg.t_lower_factor * t_guess,
        cfg.t_upper_factor * t_guess,
    )
    .map_err(|e| e.in_stage("transcription"))?;
    let mut z = tr.pack(&guess.nodes, &guess.snaps, t_guess)?;
    let mut margin = cfg.margin;
    let smoothing = cfg.smoothing();

    for round in 0..=cfg.margin_refinements {
        let path = PathSpec::new(
            scenario.obstacles.clone(),
            ClearanceConfig {
                n_rope: cfg.n_rope,
                margin,
            },
        );
        let nlp = CraneNlp::new(
            tr.clone(),
            FlatState::at_rest(scenario.start),
            FlatState::at_rest(scenario.goal),
            params.clone(),
            *variant,
            smoothing,
            Some(path),
        )
        .map_err(|e| e.in_stage("transcription"))?;
        let (sol, report) = solve(&nlp, &z, &cfg.sqp).map_err(|e| e.in_stage("optimization"))?;
        info!(
            "optimization round {round}: {:?} after {} iterations, T = {:.4} s, violation {:.2e}",
            report.status,
            report.iterations,
            tr.final_time(&sol),
            report.max_violation
        );
        if !report.is_feasible(cfg.sqp.tol_violation) {
            let detail = format!(
                "{:?} with constraint violation {:.3e} after {} iterations",
                report.status, report.max_violation, report.iterations
            );
            let err = match report.status {
                SolveStatus::Infeasible => CraneError::Infeasible(detail),
                _ => CraneError::Solver(detail),
            };
            return Err(err.in_stage("optimization"));
        }
        debug_assert_eq!(nlp.num_vars(), sol.len());
        let (nodes, snaps, t_end) = tr.unpack(&sol);
        let h = t_end / cfg.intervals as f64;
        let (dense, dense_snaps) = resample_flat(&nodes, &snaps, h, cfg.output_dt);
        let plan = trajectory_to_plan(&dense, &dense_snaps, cfg.output_dt, params, variant, &smoothing)
            .map_err(|e| e.in_stage("plan"))?;
        let verification = verify_trajectory(
            &plan,
            &scenario.obstacles,
            cfg.n_rope,
            cfg.margin,
            cfg.oversample,
            params,
        )
        .map_err(|e| e.in_stage("verification"))?;
        if !verification.collided {
            return Ok(PlanOutcome {
                plan,
                nodes,
                snaps,
                report,
                verification,
                t_guess,
                t_end,
                optimized_margin: margin,
                waypoints,
                rrt_seed,
            });
        }
        // inter-node dip: enlarge the optimized margin by the observed
        // shortfall and warm-start from the current solution
        let shortfall = -verification.min_clearance;
        margin += 1.5 * shortfall + 1e-3;
        debug!("verification dip {shortfall:.2e} m, retrying with margin {margin:.4} m");
        z = sol;
    }
    Err(CraneError::Stage {
        stage: "verification",
        source: Box::new(CraneError::Verification(format!(
            "plan still violates the {} m margin after {} refinements",
            cfg.margin, cfg.margin_refinements
        ))),
    })
}
