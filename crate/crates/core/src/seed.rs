//! Geometric initial guess: RRT* over payload positions, greedy shortcutting
//! and a clamped cubic spline sampled onto the collocation grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};
use crate::flatness::FlatState;
use crate::geometry::{box_signed_distance, BoxObstacle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    /// RRT* iteration budget.
    pub iterations: usize,
    /// Steering step [m].
    pub step: f64,
    pub goal_bias: f64,
    /// Shrinking-ball constant: radius = min(gamma · (ln n / n)^(1/3), 2 · step).
    pub gamma: f64,
    pub rng_seed: u64,
    /// Obstacle inflation used by the geometric planner [m].
    pub inflation: f64,
    /// Average payload speed for time allocation [m/s].
    pub avg_speed: f64,
    /// Duration assigned to a degenerate (zero-length) guess [s].
    pub static_duration: f64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            iterations: 3000,
            step: 0.1,
            goal_bias: 0.1,
            gamma: 1.5,
            rng_seed: 1,
            inflation: 0.05,
            avg_speed: 0.25,
            static_duration: 1.0,
        }
    }
}

impl SeedConfig {
    pub fn validate(&self, margin: f64) -> Result<()> {
        let bad = |m: String| Err(CraneError::InvalidInput(m));
        if self.iterations < 1 {
            return bad("iteration budget must be at least 1".into());
        }
        if !(self.step > 0.0) {
            return bad(format!("steering step must be positive, got {}", self.step));
        }
        if !(0.0..1.0).contains(&self.goal_bias) {
            return bad(format!("goal bias must lie in [0, 1), got {}", self.goal_bias));
        }
        if !(self.inflation >= margin) {
            return bad(format!(
                "inflation {} must be at least the safety margin {margin}",
                self.inflation
            ));
        }
        if !(self.avg_speed > 0.0) || !(self.static_duration > 0.0) {
            return bad("average speed and static duration must be positive".into());
        }
        Ok(())
    }
}

/// Axis-aligned sampling region for payload positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Bounds {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn path_length(path: &[[f64; 3]]) -> f64 {
    path.windows(2).map(|w| dist(w[0], w[1])).sum()
}

fn segment_free(a: [f64; 3], b: [f64; 3], inflated: &[BoxObstacle]) -> bool {
    !inflated.iter().any(|o| o.intersects_segment(a, b))
}

#[derive(Debug, Clone)]
struct Node {
    p: [f64; 3],
    parent: Option<usize>,
    cost: f64,
    children: Vec<usize>,
}

/// Result of an RRT* run.
#[derive(Debug, Clone, PartialEq)]
pub struct RrtOutcome {
    pub waypoints: Vec<[f64; 3]>,
    /// Best start-to-goal cost after each iteration (`+∞` until connected).
    pub best_cost_history: Vec<f64>,
    pub tree_size: usize,
}

/// Asymptotically optimal sampling-based planner for the payload position.
/// Obstacles are inflated by `cfg.inflation`; segments are checked exactly.
pub fn rrt_star(
    start: [f64; 3],
    goal: [f64; 3],
    obstacles: &[BoxObstacle],
    bounds: &Bounds,
    cfg: &SeedConfig,
) -> Result<RrtOutcome> {
    let inflated: Vec<BoxObstacle> = obstacles.iter().map(|o| o.inflated(cfg.inflation)).collect();
    for (name, p) in [("start", start), ("goal", goal)] {
        if !bounds.contains(p) {
            return Err(CraneError::InvalidInput(format!("{name} {p:?} lies outside the workspace")));
        }
        if inflated.iter().any(|o| o.contains(p)) {
            return Err(CraneError::Infeasible(format!("{name} {p:?} lies inside an inflated obstacle")));
        }
    }
    if dist(start, goal) < 1e-12 {
        return Ok(RrtOutcome {
            waypoints: vec![start],
            best_cost_history: vec![0.0],
            tree_size: 1,
        });
    }
    if segment_free(start, goal, &inflated) {
        let c = dist(start, goal);
        return Ok(RrtOutcome {
            waypoints: vec![start, goal],
            best_cost_history: vec![c],
            tree_size: 2,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut nodes = vec![Node {
        p: start,
        parent: None,
        cost: 0.0,
        children: Vec::new(),
    }];
    let mut goal_links: Vec<usize> = Vec::new();
    let mut history = Vec::with_capacity(cfg.iterations);
    let best_goal = |nodes: &[Node], links: &[usize]| -> Option<(usize, f64)> {
        links
            .iter()
            .map(|&i| (i, nodes[i].cost + dist(nodes[i].p, goal)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    };

    for _ in 0..cfg.iterations {
        let sample = if rng.gen::<f64>() < cfg.goal_bias {
            goal
        } else {
            std::array::from_fn(|i| rng.gen_range(bounds.min[i]..=bounds.max[i]))
        };
        let nearest = (0..nodes.len())
            .min_by(|&a, &b| dist(nodes[a].p, sample).total_cmp(&dist(nodes[b].p, sample)))
            .expect("tree is never empty");
        let d = dist(nodes[nearest].p, sample);
        if d < 1e-12 {
            history.push(best_goal(&nodes, &goal_links).map_or(f64::INFINITY, |b| b.1));
            continue;
        }
        let reach = d.min(cfg.step);
        let from = nodes[nearest].p;
        let new_p: [f64; 3] = std::array::from_fn(|i| from[i] + (sample[i] - from[i]) * reach / d);
        if !bounds.contains(new_p) || !segment_free(from, new_p, &inflated) {
            history.push(best_goal(&nodes, &goal_links).map_or(f64::INFINITY, |b| b.1));
            continue;
        }
        let n = nodes.len() as f64 + 1.0;
        let radius = (cfg.gamma * (n.ln() / n).cbrt()).min(2.0 * cfg.step).max(cfg.step);
        let near: Vec<usize> = (0..nodes.len()).filter(|&i| dist(nodes[i].p, new_p) <= radius).collect();

        let mut parent = nearest;
        let mut cost = nodes[nearest].cost + dist(from, new_p);
        for &i in &near {
            let c = nodes[i].cost + dist(nodes[i].p, new_p);
            if c < cost && segment_free(nodes[i].p, new_p, &inflated) {
                parent = i;
                cost = c;
            }
        }
        let id = nodes.len();
        nodes.push(Node {
            p: new_p,
            parent: Some(parent),
            cost,
            children: Vec::new(),
        });
        nodes[parent].children.push(id);

        for &i in &near {
            if i == parent {
                continue;
            }
            let c = cost + dist(new_p, nodes[i].p);
            if c + 1e-12 < nodes[i].cost && segment_free(new_p, nodes[i].p, &inflated) {
                if let Some(old) = nodes[i].parent {
                    nodes[old].children.retain(|&ch| ch != i);
                }
                nodes[i].parent = Some(id);
                nodes[id].children.push(i);
                let delta = nodes[i].cost - c;
                propagate_decrease(&mut nodes, i, delta);
            }
        }

        if dist(new_p, goal) <= cfg.step && segment_free(new_p, goal, &inflated) {
            goal_links.push(id);
        }
        history.push(best_goal(&nodes, &goal_links).map_or(f64::INFINITY, |b| b.1));
    }

    let (best, _) = best_goal(&nodes, &goal_links).ok_or(CraneError::NoPathFound {
        iterations: cfg.iterations,
    })?;
    let mut path = vec![goal];
    let mut cur = Some(best);
    while let Some(i) = cur {
        path.push(nodes[i].p);
        cur = nodes[i].parent;
    }
    path.reverse();
    Ok(RrtOutcome {
        waypoints: path,
        best_cost_history: history,
        tree_size: nodes.len(),
    })
}

fn propagate_decrease(nodes: &mut [Node], root: usize, delta: f64) {
    let mut stack = vec![root];
    while let Some(i) = stack.pop() {
        nodes[i].cost -= delta;
        stack.extend(nodes[i].children.iter().copied());
    }
}

/// Greedy shortcutting: from each kept waypoint jump to the farthest later
/// waypoint reachable by a collision-free straight segment.
pub fn shortcut(path: &[[f64; 3]], obstacles: &[BoxObstacle], cfg: &SeedConfig) -> Vec<[f64; 3]> {
    if path.len() <= 2 {
        return path.to_vec();
    }
    let inflated: Vec<BoxObstacle> = obstacles.iter().map(|o| o.inflated(cfg.inflation)).collect();
    let mut out = vec![path[0]];
    let mut i = 0;
    while i < path.len() - 1 {
        let mut j = path.len() - 1;
        while j > i + 1 && !segment_free(path[i], path[j], &inflated) {
            j -= 1;
        }
        out.push(path[j]);
        i = j;
    }
    out
}

/// Flat-trajectory initial guess on the collocation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Guess {
    pub nodes: Vec<FlatState>,
    pub snaps: Vec<[f64; 3]>,
    pub duration: f64,
}

/// Clamped cubic spline in one coordinate over knots `t`.
struct CubicSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>, // second derivatives at knots
}

impl CubicSpline {
    fn clamped(t: &[f64], y: &[f64]) -> Self {
        let n = t.len();
        let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        // tridiagonal system for the knot second derivatives, zero end slopes
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut r = vec![0.0; n];
        b[0] = 2.0 * h[0];
        c[0] = h[0];
        r[0] = 6.0 * ((y[1] - y[0]) / h[0]);
        for i in 1..n - 1 {
            a[i] = h[i - 1];
            b[i] = 2.0 * (h[i - 1] + h[i]);
            c[i] = h[i];
            r[i] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        a[n - 1] = h[n - 2];
        b[n - 1] = 2.0 * h[n - 2];
        r[n - 1] = -6.0 * ((y[n - 1] - y[n - 2]) / h[n - 2]);
        // Thomas algorithm
        for i in 1..n {
            let w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            r[i] -= w * r[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = r[n - 1] / b[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (r[i] - c[i] * m[i + 1]) / b[i];
        }
        Self {
            t: t.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    /// Value, first and second derivative.
    fn eval(&self, t: f64) -> [f64; 3] {
        let n = self.t.len();
        let i = self.t.partition_point(|&k| k <= t).clamp(1, n - 1) - 1;
        let h = self.t[i + 1] - self.t[i];
        let (a, b) = (self.t[i + 1] - t, t - self.t[i]);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let value = m0 * a.powi(3) / (6.0 * h)
            + m1 * b.powi(3) / (6.0 * h)
            + (y0 / h - m0 * h / 6.0) * a
            + (y1 / h - m1 * h / 6.0) * b;
        let slope = -m0 * a * a / (2.0 * h) + m1 * b * b / (2.0 * h) - (y0 / h - m0 * h / 6.0)
            + (y1 / h - m1 * h / 6.0);
        let curvature = (m0 * a + m1 * b) / h;
        [value, slope, curvature]
    }
}

/// Fits a rest-to-rest flat guess through the waypoints and samples it at
/// `intervals + 1` equally spaced nodes.
pub fn fit_guess(waypoints: &[[f64; 3]], cfg: &SeedConfig, intervals: usize) -> Result<Guess> {
    if waypoints.is_empty() {
        return Err(CraneError::InvalidInput("need at least one waypoint".into()));
    }
    if intervals < 1 {
        return Err(CraneError::InvalidInput("need at least one interval".into()));
    }
    // drop repeated points, they would create zero-length knots
    let mut pts: Vec<[f64; 3]> = vec![waypoints[0]];
    for &p in &waypoints[1..] {
        if dist(*pts.last().unwrap(), p) > 1e-9 {
            pts.push(p);
        }
    }
    if pts.len() < 2 {
        let node = FlatState::at_rest(pts[0]);
        return Ok(Guess {
            nodes: vec![node; intervals + 1],
            snaps: vec![[0.0; 3]; intervals],
            duration: cfg.static_duration,
        });
    }
    let mut knots = vec![0.0];
    for w in pts.windows(2) {
        knots.push(knots.last().unwrap() + dist(w[0], w[1]) / cfg.avg_speed);
    }
    let duration = *knots.last().unwrap();
    let splines: Vec<CubicSpline> = (0..3)
        .map(|ax| CubicSpline::clamped(&knots, &pts.iter().map(|p| p[ax]).collect::<Vec<_>>()))
        .collect();
    let h = duration / intervals as f64;
    let samples: Vec<[[f64; 3]; 3]> = (0..=intervals)
        .map(|k| std::array::from_fn(|ax| splines[ax].eval((k as f64 * h).min(duration))))
        .collect();
    let mut nodes: Vec<FlatState> = Vec::with_capacity(intervals + 1);
    for k in 0..=intervals {
        let mut s = [0.0; 12];
        for ax in 0..3 {
            let jerk = if k == 0 || k == intervals {
                0.0
            } else {
                (samples[k + 1][ax][2] - samples[k - 1][ax][2]) / (2.0 * h)
            };
            s[4 * ax] = samples[k][ax][0];
            s[4 * ax + 1] = samples[k][ax][1];
            s[4 * ax + 2] = samples[k][ax][2];
            s[4 * ax + 3] = jerk;
        }
        nodes.push(FlatState(s));
    }
    // rest-to-rest boundary conditions
    for k in [0, intervals] {
        let p = nodes[k].position();
        nodes[k] = FlatState::at_rest(p);
    }
    let snaps = (0..intervals)
        .map(|k| std::array::from_fn(|ax| (nodes[k + 1].0[4 * ax + 3] - nodes[k].0[4 * ax + 3]) / h))
        .collect();
    Ok(Guess { nodes, snaps, duration })
}

/// Minimum signed distance of the guess positions to the inflated obstacles.
pub fn guess_clearance(guess: &Guess, obstacles: &[BoxObstacle], inflation: f64) -> f64 {
    guess
        .nodes
        .iter()
        .flat_map(|n| obstacles.iter().map(move |o| box_signed_distance(n.position(), &o.inflated(inflation))))
        .fold(f64::INFINITY, f64::min)
}

/// Full seed pipeline: plan, shortcut, fit; waypoints are densified until
/// every sampled position clears the inflated obstacles.
pub fn plan_guess(
    start: [f64; 3],
    goal: [f64; 3],
    obstacles: &[BoxObstacle],
    bounds: &Bounds,
    cfg: &SeedConfig,
    intervals: usize,
) -> Result<(Vec<[f64; 3]>, Guess)> {
    let outcome = rrt_star(start, goal, obstacles, bounds, cfg)?;
    let mut waypoints = shortcut(&outcome.waypoints, obstacles, cfg);
    let mut guess = fit_guess(&waypoints, cfg, intervals)?;
    for _ in 0..8 {
        if guess_clearance(&guess, obstacles, cfg.inflation) >= 0.0 {
            return Ok((waypoints, guess));
        }
        let mut dense = vec![waypoints[0]];
        for w in waypoints.windows(2) {
            dense.push(std::array::from_fn(|i| 0.5 * (w[0][i] + w[1][i])));
            dense.push(w[1]);
        }
        waypoints = dense;
        guess = fit_guess(&waypoints, cfg, intervals)?;
    }
    if guess_clearance(&guess, obstacles, cfg.inflation) >= 0.0 {
        Ok((waypoints, guess))
    } else {
        Err(CraneError::InvalidInput(
            "spline guess keeps intersecting inflated obstacles".into(),
        ))
    }
}
