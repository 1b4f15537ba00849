//! Closed-loop evaluation: run metrics, PI tuning and friction-uncertainty
//! sweeps.

use std::io::Write;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};
use crate::geometry::{rope_signed_clearances, BoxObstacle};
use crate::io::{fmt_f64, Provenance};
use crate::model::{first_negative, Axis, CraneParams, ModelTag};
use crate::plan::Plan;
use crate::simulator::{run_closed_loop, PiGains, SimConfig, SimLog};

/// One random friction realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    /// Relative variation δ: factors are drawn from `[1 − δ, 1 + δ]`.
    pub level: f64,
    pub seed: u64,
}

/// Resampling budget when a perturbed polynomial turns negative.
pub const PERTURB_RETRIES: usize = 1000;

/// Scales every dry-friction coefficient by an independent uniform factor
/// in `[1 − δ, 1 + δ]` (clipped at zero). Draws that make a friction
/// polynomial negative on the workspace are rejected and redrawn. Viscous
/// coefficients are left untouched.
pub fn perturb_friction(params: &CraneParams, spec: &PerturbationSpec) -> Result<CraneParams> {
    let d = spec.level;
    if !(d >= 0.0) || !d.is_finite() {
        return Err(CraneError::InvalidInput(format!("perturbation level must be non-negative, got {d}")));
    }
    if d == 0.0 {
        return Ok(params.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..PERTURB_RETRIES {
        let mut factor = || rng.gen_range(1.0 - d..=1.0 + d).max(0.0);
        let mut p = params.clone();
        for c in [&mut p.a_x, &mut p.b_x, &mut p.a_y, &mut p.b_y] {
            for v in c.iter_mut() {
                *v *= factor();
            }
        }
        p.c_l *= factor();
        let ok = [(&p.a_x, Axis::X), (&p.b_x, Axis::X), (&p.a_y, Axis::Y), (&p.b_y, Axis::Y)]
            .iter()
            .all(|(c, axis)| {
                let (lo, hi) = p.workspace(*axis);
                first_negative(c, lo, hi).is_none()
            });
        if ok {
            p.validate()?;
            return Ok(p);
        }
    }
    Err(CraneError::RetriesExhausted(format!(
        "no non-negative friction draw at level {d} after {PERTURB_RETRIES} attempts"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub collided: bool,
    pub first_collision_time: Option<f64>,
    /// Time at which trolleys and hoist come to rest [s].
    pub stop_time: f64,
    /// False when the crane never stopped; `stop_time` is then the horizon.
    pub stopped: bool,
    /// Largest payload distance from its hanging rest position after the stop [m].
    pub residual_oscillation: f64,
    /// Largest payload distance from the planned payload position [m].
    pub max_tracking_error: f64,
    /// Integral of absolute error of `(x_t, y_t, L)` [m·s].
    pub iae: [f64; 3],
    pub saturation_time: [f64; 3],
    pub aborted: bool,
}

/// Extracts the comparison metrics from a closed-loop log.
///
/// The rest position is the payload hanging straight below the trolley at
/// the final rope length, both taken at the end of the log. Collisions are
/// checked on the logged samples with zero margin.
pub fn metrics(
    log: &SimLog,
    plan: &Plan,
    obstacles: &[BoxObstacle],
    n_rope: usize,
    cfg: &SimConfig,
) -> Result<RunMetrics> {
    let last = log
        .samples
        .last()
        .ok_or_else(|| CraneError::InvalidInput("empty simulation log".into()))?;
    let dt = cfg.log_dt;

    let mut stop_index = None;
    let mut calm_since: Option<usize> = None;
    for (k, s) in log.samples.iter().enumerate() {
        let calm = s.t >= log.plan_end - 1e-9
            && s.state.actuated_velocity().iter().all(|v| v.abs() < cfg.stop_velocity);
        if !calm {
            calm_since = None;
            continue;
        }
        let start = *calm_since.get_or_insert(k);
        if s.t - log.samples[start].t >= cfg.stop_hold - 1e-9 {
            stop_index = Some(start);
            break;
        }
    }
    let (stop_time, stopped) = match stop_index {
        Some(k) => (log.samples[k].t, true),
        None => (last.t, false),
    };

    let rest = [last.state.x_t, last.state.y_t, -last.state.l];
    let residual_oscillation = log
        .samples
        .iter()
        .filter(|s| s.t >= stop_time)
        .map(|s| dist(s.payload, rest))
        .fold(0.0, f64::max);

    let mut iae = [0.0; 3];
    let mut max_tracking_error = 0.0f64;
    let mut first_collision_time = None;
    for (k, s) in log.samples.iter().enumerate() {
        let meas = s.state.actuated();
        if k + 1 < log.samples.len() {
            for i in 0..3 {
                iae[i] += (s.reference[i] - meas[i]).abs() * dt;
            }
        }
        if let Some(p) = plan.sample_at(s.t) {
            max_tracking_error = max_tracking_error.max(dist(s.payload, p.jet.position()));
        }
        if first_collision_time.is_none() && !obstacles.is_empty() {
            let phi = rope_signed_clearances(s.state.trolley_point(), s.payload, obstacles, n_rope, 0.0);
            if phi.iter().flatten().any(|&v| v < 0.0) {
                first_collision_time = Some(s.t);
            }
        }
    }
    Ok(RunMetrics {
        collided: first_collision_time.is_some(),
        first_collision_time,
        stop_time,
        stopped,
        residual_oscillation,
        max_tracking_error,
        iae,
        saturation_time: log.saturation_time,
        aborted: log.aborted.is_some(),
    })
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    /// Closed-loop evaluations allowed.
    pub budget: usize,
    /// Initial multiplicative step on each gain.
    pub initial_step: f64,
    /// Search stops once the step factor falls below this.
    pub min_step: f64,
    /// Simulated time after the plan end used for the IAE [s].
    pub settle_time: f64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            budget: 300,
            initial_step: 2.0,
            min_step: 1.05,
            settle_time: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub gains: PiGains,
    pub iae: f64,
    pub initial_iae: f64,
    pub evaluations: usize,
    pub budget_exhausted: bool,
}

/// Total IAE of one closed-loop run; aborted runs count as infinitely bad.
fn total_iae(plan: &Plan, params: &CraneParams, gains: &PiGains, cfg: &SimConfig) -> Result<f64> {
    let log = run_closed_loop(plan, params, gains, cfg)?;
    if log.aborted.is_some() {
        return Ok(f64::INFINITY);
    }
    let m = metrics(&log, plan, &[], 1, cfg)?;
    Ok(m.iae.iter().sum())
}

/// Multiplicative coordinate search over `(Kp, Ki)` of each axis that
/// minimizes the summed IAE. A gain at zero is probed at a small positive
/// value, so zero initial gains can be improved.
pub fn tune_pi(
    plan: &Plan,
    params: &CraneParams,
    initial: &PiGains,
    sim: &SimConfig,
    cfg: &TuneConfig,
) -> Result<TuneOutcome> {
    initial.validate()?;
    if cfg.budget == 0 || !(cfg.initial_step > 1.0) || !(cfg.min_step > 1.0) {
        return Err(CraneError::InvalidInput("tuning needs a budget and step factors above 1".into()));
    }
    let sim = SimConfig {
        settle_time: cfg.settle_time,
        ..sim.clone()
    };
    let mut best = *initial;
    let mut best_iae = total_iae(plan, params, &best, &sim)?;
    let initial_iae = best_iae;
    let mut evaluations = 1;
    let mut step = cfg.initial_step;
    let exhausted = 'search: loop {
        let mut improved = false;
        for axis in Axis::ALL {
            for which in 0..2 {
                for up in [true, false] {
                    if evaluations >= cfg.budget {
                        break 'search true;
                    }
                    let mut trial = best;
                    let g = trial.axis_mut(axis);
                    let v = if which == 0 { &mut g.kp } else { &mut g.ki };
                    *v = match (*v == 0.0, up) {
                        (true, true) => 1.0,
                        (true, false) => continue,
                        (false, true) => *v * step,
                        (false, false) => *v / step,
                    };
                    let iae = total_iae(plan, params, &trial, &sim)?;
                    evaluations += 1;
                    if iae < best_iae {
                        debug!("tuning: {axis:?} gain {which} -> IAE {iae:.5}");
                        best = trial;
                        best_iae = iae;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            step = step.sqrt();
            if step < cfg.min_step {
                break false;
            }
        }
    };
    info!("PI tuning: IAE {initial_iae:.5} -> {best_iae:.5} in {evaluations} runs");
    Ok(TuneOutcome {
        gains: best,
        iae: best_iae,
        initial_iae,
        evaluations,
        budget_exhausted: exhausted,
    })
}

/// Perturbation ladder of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub min_level: f64,
    pub max_level: f64,
    /// Number of evenly spaced levels between the bounds.
    pub levels: usize,
    /// Runs at each level.
    pub runs_per_level: usize,
    pub master_seed: u64,
    /// Aggregates use levels up to this value.
    pub cutoff: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            min_level: 0.02,
            max_level: 1.5,
            levels: 75,
            runs_per_level: 1,
            master_seed: 2024,
            cutoff: 1.0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.runs_per_level == 0 {
            return Err(CraneError::InvalidInput("sweep needs at least one level and one run".into()));
        }
        if !(self.min_level >= 0.0 && self.max_level >= self.min_level && self.max_level.is_finite()) {
            return Err(CraneError::InvalidInput(format!(
                "invalid level range [{}, {}]",
                self.min_level, self.max_level
            )));
        }
        Ok(())
    }

    pub fn level(&self, index: usize) -> f64 {
        if self.levels == 1 {
            return self.min_level;
        }
        self.min_level + (self.max_level - self.min_level) * index as f64 / (self.levels - 1) as f64
    }

    /// Every run of the ladder as (level, run index, perturbation seed). Runs
    /// with the same index share a friction draw across plans.
    pub fn runs(&self) -> Vec<(f64, usize, u64)> {
        (0..self.levels * self.runs_per_level)
            .map(|r| {
                let seed = self.master_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(r as u64);
                (self.level(r / self.runs_per_level), r, seed)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub plan: ModelTag,
    pub level: f64,
    pub run: usize,
    pub seed: u64,
    /// Set when the run could not be simulated; metrics are then absent.
    pub failure: Option<String>,
    pub metrics: Option<RunMetrics>,
}

pub const SWEEP_COLUMNS: [&str; 18] = [
    "plan", "level", "run", "seed", "failed", "collided", "first_collision_time", "stop_time",
    "stopped", "residual_oscillation", "max_tracking_error", "iae_x", "iae_y", "iae_l", "sat_x",
    "sat_y", "sat_l", "aborted",
];

/// Simulates every plan under every friction draw of the ladder. Runs are
/// independent and execute concurrently; rows come back sorted by plan and
/// run index. Collisions are checked with `n_rope` rope samples.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    plans: &[(ModelTag, Plan)],
    obstacles: &[BoxObstacle],
    n_rope: usize,
    params: &CraneParams,
    gains: &PiGains,
    sim: &SimConfig,
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    sim.validate()?;
    gains.validate()?;
    let runs = cfg.runs();
    let jobs: Vec<(usize, (f64, usize, u64))> = (0..plans.len())
        .flat_map(|p| runs.iter().map(move |&r| (p, r)))
        .collect();
    let mut rows: Vec<SweepRow> = jobs
        .into_par_iter()
        .map(|(p, (level, run, seed))| {
            let (tag, plan) = &plans[p];
            let outcome = perturb_friction(params, &PerturbationSpec { level, seed })
                .and_then(|perturbed| run_closed_loop(plan, &perturbed, gains, sim))
                .and_then(|log| metrics(&log, plan, obstacles, n_rope, sim));
            let (failure, metrics) = match outcome {
                Ok(m) => (None, Some(m)),
                Err(e) => (Some(e.to_string()), None),
            };
            SweepRow {
                plan: *tag,
                level,
                run,
                seed,
                failure,
                metrics,
            }
        })
        .collect();
    rows.sort_by(|a, b| (a.plan, a.run).cmp(&(b.plan, b.run)));
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W, provenance: &Provenance) -> Result<()> {
    provenance.write_header(&mut w)?;
    writeln!(w, "{}", SWEEP_COLUMNS.join(","))?;
    let opt = |v: Option<f64>| v.map_or(String::new(), fmt_f64);
    for r in rows {
        write!(w, "{},{},{},{},{}", r.plan.as_str(), fmt_f64(r.level), r.run, r.seed, r.failure.is_some())?;
        match &r.metrics {
            Some(m) => {
                let f = fmt_f64;
                writeln!(
                    w,
                    ",{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    m.collided,
                    opt(m.first_collision_time),
                    f(m.stop_time),
                    m.stopped,
                    f(m.residual_oscillation),
                    f(m.max_tracking_error),
                    f(m.iae[0]),
                    f(m.iae[1]),
                    f(m.iae[2]),
                    f(m.saturation_time[0]),
                    f(m.saturation_time[1]),
                    f(m.saturation_time[2]),
                    m.aborted
                )?
            }
            None => writeln!(w, "{}", ",".repeat(SWEEP_COLUMNS.len() - 5))?,
        }
    }
    Ok(())
}

/// Median and quartiles (linear interpolation between order statistics).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let x = p * (v.len() - 1) as f64;
        let (i, f) = (x.floor() as usize, x.fract());
        if i + 1 < v.len() {
            v[i] + f * (v[i + 1] - v[i])
        } else {
            v[i]
        }
    };
    Some(Quartiles {
        q1: q(0.25),
        median: q(0.5),
        q3: q(0.75),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub plan: ModelTag,
    pub cutoff: f64,
    pub runs: usize,
    pub failed: usize,
    pub collision_rate: f64,
    pub residual_oscillation: Option<Quartiles>,
    pub stop_time: Option<Quartiles>,
    pub max_tracking_error: Option<Quartiles>,
    /// Collision rate at every level, in ladder order.
    pub collision_rate_by_level: Vec<(f64, f64)>,
}

/// Aggregates the rows of each plan up to `cutoff`. Collided runs are
/// included; failed runs only count towards `failed`.
pub fn summarize(rows: &[SweepRow], cutoff: f64) -> Vec<PlanSummary> {
    let mut tags: Vec<ModelTag> = rows.iter().map(|r| r.plan).collect();
    tags.dedup();
    tags.into_iter()
        .map(|tag| {
            let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.plan == tag).collect();
            let within: Vec<&SweepRow> = mine.iter().copied().filter(|r| r.level <= cutoff + 1e-12).collect();
            let ok: Vec<&RunMetrics> = within.iter().filter_map(|r| r.metrics.as_ref()).collect();
            let collect = |f: fn(&RunMetrics) -> f64| quartiles(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
            let mut by_level: Vec<(f64, f64)> = Vec::new();
            for r in &mine {
                if by_level.last().map_or(true, |(l, _)| *l != r.level) {
                    let at: Vec<&RunMetrics> = mine
                        .iter()
                        .filter(|x| x.level == r.level)
                        .filter_map(|x| x.metrics.as_ref())
                        .collect();
                    let rate = at.iter().filter(|m| m.collided).count() as f64 / at.len().max(1) as f64;
                    by_level.push((r.level, rate));
                }
            }
            PlanSummary {
                plan: tag,
                cutoff,
                runs: within.len(),
                failed: within.len() - ok.len(),
                collision_rate: ok.iter().filter(|m| m.collided).count() as f64 / ok.len().max(1) as f64,
                residual_oscillation: collect(|m| m.residual_oscillation),
                stop_time: collect(|m| m.stop_time),
                max_tracking_error: collect(|m| m.max_tracking_error),
                collision_rate_by_level: by_level,
            }
        })
        .collect()
}
