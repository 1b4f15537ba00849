//! Direct collocation of the free-final-time planning problem on the flat
//! integrator chain.
//!
//! Decision vector: flat states at `N + 1` nodes (12 each), piecewise
//! constant snaps on `N` intervals (3 each), final time `T` (1).

use nalgebra::{SMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nlp::{NlpProblem, Triplets};
use crate::error::{CraneError, Result};
use crate::flatness::{flat_map, flat_rk4_step, FlatState};
use crate::geometry::{box_clearance_smooth, rope_points, BoxObstacle, ClearanceConfig};
use crate::model::{CraneParams, FrictionVariant, Smoothing};
use crate::real::{Dual, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcription {
    pub intervals: usize,
    /// Snap weight.
    pub lambda: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Pin the snap of the last interval to zero (`ū(T) = ū_END = 0`).
    pub pin_terminal_snap: bool,
}

impl Transcription {
    pub fn new(intervals: usize, lambda: f64, t_min: f64, t_max: f64) -> Result<Self> {
        let tr = Self {
            intervals,
            lambda,
            t_min,
            t_max,
            pin_terminal_snap: true,
        };
        tr.validate()?;
        Ok(tr)
    }

    pub fn validate(&self) -> Result<()> {
        if self.intervals < 2 {
            return Err(CraneError::InvalidInput(format!(
                "need at least 2 intervals, got {}",
                self.intervals
            )));
        }
        if !(self.lambda >= 0.0) {
            return Err(CraneError::InvalidInput(format!("snap weight must be >= 0, got {}", self.lambda)));
        }
        if !(self.t_min > 0.0) || !(self.t_max >= self.t_min) {
            return Err(CraneError::InvalidInput(format!(
                "final-time bounds [{}, {}] are invalid",
                self.t_min, self.t_max
            )));
        }
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        12 * (self.intervals + 1) + 3 * self.intervals + 1
    }

    pub fn node_index(&self, k: usize) -> usize {
        12 * k
    }

    pub fn snap_index(&self, k: usize) -> usize {
        12 * (self.intervals + 1) + 3 * k
    }

    pub fn time_index(&self) -> usize {
        self.num_vars() - 1
    }

    pub fn node(&self, z: &[f64], k: usize) -> FlatState {
        let i = self.node_index(k);
        FlatState(z[i..i + 12].try_into().expect("slice of length 12"))
    }

    pub fn snap(&self, z: &[f64], k: usize) -> [f64; 3] {
        let i = self.snap_index(k);
        [z[i], z[i + 1], z[i + 2]]
    }

    pub fn final_time(&self, z: &[f64]) -> f64 {
        z[self.time_index()]
    }

    pub fn step(&self, z: &[f64]) -> f64 {
        self.final_time(z) / self.intervals as f64
    }

    pub fn pack(&self, nodes: &[FlatState], snaps: &[[f64; 3]], t_end: f64) -> Result<Vec<f64>> {
        if nodes.len() != self.intervals + 1 || snaps.len() != self.intervals {
            return Err(CraneError::InvalidInput(format!(
                "layout expects {} nodes and {} snaps, got {} and {}",
                self.intervals + 1,
                self.intervals,
                nodes.len(),
                snaps.len()
            )));
        }
        let mut z = Vec::with_capacity(self.num_vars());
        for n in nodes {
            z.extend_from_slice(&n.0);
        }
        for s in snaps {
            z.extend_from_slice(s);
        }
        z.push(t_end);
        Ok(z)
    }

    pub fn unpack(&self, z: &[f64]) -> (Vec<FlatState>, Vec<[f64; 3]>, f64) {
        let nodes = (0..=self.intervals).map(|k| self.node(z, k)).collect();
        let snaps = (0..self.intervals).map(|k| self.snap(z, k)).collect();
        (nodes, snaps, self.final_time(z))
    }
}

/// `T + λ Σ_k ‖ū_k‖² · T/N`.
pub fn objective(z: &[f64], tr: &Transcription) -> f64 {
    let h = tr.step(z);
    let snap_sq: f64 = (0..tr.intervals)
        .map(|k| tr.snap(z, k).iter().map(|s| s * s).sum::<f64>())
        .sum();
    tr.final_time(z) + tr.lambda * snap_sq * h
}

/// `x_{k+1} − RK4(x_k, ū_k, T/N)` for every interval, stacked.
pub fn defects(z: &[f64], tr: &Transcription) -> Vec<f64> {
    let h = tr.step(z);
    let mut out = Vec::with_capacity(12 * tr.intervals);
    for k in 0..tr.intervals {
        let next = flat_rk4_step(&tr.node(z, k).0, &tr.snap(z, k), h);
        let actual = tr.node(z, k + 1).0;
        out.extend((0..12).map(|i| actual[i] - next[i]));
    }
    out
}

/// Path constraints enforced at every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub obstacles: Vec<BoxObstacle>,
    pub clearance: ClearanceConfig,
    /// Lower bound on `(z̈_p + g) / g`.
    pub tension_floor: f64,
}

impl PathSpec {
    pub fn new(obstacles: Vec<BoxObstacle>, clearance: ClearanceConfig) -> Self {
        Self {
            obstacles,
            clearance,
            tension_floor: 0.1,
        }
    }

    /// Constraints per node: 6 box rows, 6 input rows, 1 tension row and
    /// one clearance row per (rope point, obstacle) pair.
    pub fn rows_per_node(&self) -> usize {
        13 + self.clearance.n_rope * self.obstacles.len()
    }
}

/// Everything the node constraint function needs besides the variables.
#[derive(Debug, Clone)]
struct NodeContext<'a> {
    params: &'a CraneParams,
    variant: &'a FrictionVariant,
    smoothing: &'a Smoothing,
    path: &'a PathSpec,
}

/// Node constraints `c(x, ū) ≥ 0` in the row order documented by
/// [`PathSpec::rows_per_node`].
fn node_constraints_generic<S: Real>(x: &[S; 12], snap: &[S; 3], ctx: &NodeContext) -> Result<Vec<S>> {
    let p = ctx.params;
    let axes: [[S; 5]; 3] =
        std::array::from_fn(|i| [x[4 * i], x[4 * i + 1], x[4 * i + 2], x[4 * i + 3], snap[i]]);
    let img = flat_map(&axes, p, ctx.variant, ctx.smoothing)?;
    let (x_t, y_t, l) = (img.x_t.value(), img.y_t.value(), img.l.value());
    let mut c = Vec::with_capacity(ctx.path.rows_per_node());
    c.push(x_t - S::cst(p.xt_min));
    c.push(S::cst(p.xt_max) - x_t);
    c.push(y_t - S::cst(p.yt_min));
    c.push(S::cst(p.yt_max) - y_t);
    c.push(l - S::cst(p.l_min));
    c.push(S::cst(p.l_max) - l);
    for i in 0..3 {
        c.push(img.input[i] - S::cst(p.u_min[i]));
        c.push(S::cst(p.u_max[i]) - img.input[i]);
    }
    c.push(x[10] + S::cst(p.g * (1.0 - ctx.path.tension_floor)));
    if !ctx.path.obstacles.is_empty() {
        let payload = [x[0], x[4], x[8]];
        let trolley = [x_t, y_t, S::zero()];
        for q in rope_points(trolley, payload, ctx.path.clearance.n_rope) {
            for b in &ctx.path.obstacles {
                c.push(box_clearance_smooth(q, b, ctx.path.clearance.margin));
            }
        }
    }
    Ok(c)
}

/// Node constraint values at a plain point.
pub fn node_constraints(
    x: &FlatState,
    snap: [f64; 3],
    params: &CraneParams,
    variant: &FrictionVariant,
    smoothing: &Smoothing,
    path: &PathSpec,
) -> Result<Vec<f64>> {
    let ctx = NodeContext {
        params,
        variant,
        smoothing,
        path,
    };
    node_constraints_generic(&x.0, &snap, &ctx)
}

/// Rest-to-rest planning problem assembled for the SQP solver.
#[derive(Debug, Clone)]
pub struct CraneNlp {
    pub tr: Transcription,
    pub start: FlatState,
    pub end: FlatState,
    pub params: CraneParams,
    pub variant: FrictionVariant,
    pub smoothing: Smoothing,
    /// `None` drops all path constraints (pure minimum-snap problem).
    pub path: Option<PathSpec>,
}

/// Seeds for the 16 local variables of interval `k`: node `k`, snap `k`, `T`.
fn seeded<const N: usize>(vals: &[f64], offset: usize) -> Vec<Dual<N>> {
    vals.iter()
        .enumerate()
        .map(|(i, &v)| Dual::variable(v, offset + i))
        .collect()
}

impl CraneNlp {
    pub fn new(
        tr: Transcription,
        start: FlatState,
        end: FlatState,
        params: CraneParams,
        variant: FrictionVariant,
        smoothing: Smoothing,
        path: Option<PathSpec>,
    ) -> Result<Self> {
        tr.validate()?;
        params.validate()?;
        if let Some(p) = &path {
            p.clearance.validate()?;
            for o in &p.obstacles {
                o.validate()?;
            }
        }
        let nlp = Self {
            tr,
            start,
            end,
            params,
            variant,
            smoothing,
            path,
        };
        for (name, x) in [("start", &nlp.start), ("end", &nlp.end)] {
            if let Some(path) = &nlp.path {
                node_constraints(x, [0.0; 3], &nlp.params, &nlp.variant, &nlp.smoothing, path).map_err(|e| {
                    CraneError::InvalidInput(format!("{name} state cannot be mapped to the crane: {e}"))
                })?;
            }
        }
        Ok(nlp)
    }

    fn ctx(&self) -> Option<NodeContext<'_>> {
        self.path.as_ref().map(|path| NodeContext {
            params: &self.params,
            variant: &self.variant,
            smoothing: &self.smoothing,
            path,
        })
    }

    pub fn rows_per_node(&self) -> usize {
        self.path.as_ref().map_or(0, PathSpec::rows_per_node)
    }

    fn node_snap(&self, z: &[f64], k: usize) -> [f64; 3] {
        if k < self.tr.intervals {
            self.tr.snap(z, k)
        } else {
            [0.0; 3]
        }
    }

    /// Local function of interval `k` whose Hessian is the interval block of
    /// the Lagrangian Hessian: weighted node constraints, weighted negative
    /// RK4 map and the snap cost. Returns its gradient in the 16 local
    /// variables.
    fn local_gradient(&self, k: usize, v: &[f64; 16], w_eq: &[f64], w_in: &[f64]) -> Result<[f64; 16]> {
        let tr = &self.tr;
        let d: Vec<Dual<16>> = seeded(v, 0);
        let x: [Dual<16>; 12] = std::array::from_fn(|i| d[i]);
        let last = k == tr.intervals;
        let s: [Dual<16>; 3] = if last {
            [Dual::constant(0.0); 3]
        } else {
            [d[12], d[13], d[14]]
        };
        let t = d[15];
        let mut acc = Dual::<16>::constant(0.0);
        if let Some(ctx) = self.ctx() {
            let c = node_constraints_generic(&x, &s, &ctx)?;
            let rows = self.rows_per_node();
            for (i, ci) in c.into_iter().enumerate() {
                let w = w_in[k * rows + i];
                if w != 0.0 {
                    acc += ci.scale(w);
                }
            }
        }
        if !last {
            let h = t.scale(1.0 / tr.intervals as f64);
            let next = flat_rk4_step(&x, &s, h);
            for i in 0..12 {
                let w = w_eq[12 * k + i];
                if w != 0.0 {
                    acc -= next[i].scale(w);
                }
            }
            let sq = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
            acc += (sq * h).scale(tr.lambda);
        }
        Ok(acc.eps)
    }

    fn local_vars(&self, z: &[f64], k: usize) -> [f64; 16] {
        let mut v = [0.0; 16];
        let i = self.tr.node_index(k);
        v[..12].copy_from_slice(&z[i..i + 12]);
        if k < self.tr.intervals {
            v[12..15].copy_from_slice(&self.tr.snap(z, k));
        }
        v[15] = self.tr.final_time(z);
        v
    }

    /// Global column of local variable `j` of interval `k`, if it exists.
    fn local_column(&self, k: usize, j: usize) -> Option<usize> {
        match j {
            0..=11 => Some(self.tr.node_index(k) + j),
            12..=14 if k < self.tr.intervals => Some(self.tr.snap_index(k) + j - 12),
            15 => Some(self.tr.time_index()),
            _ => None,
        }
    }

    /// Positive semidefinite part of the interval Hessian block, obtained by
    /// central differences of the AD gradient.
    fn local_hessian(&self, z: &[f64], k: usize, w_eq: &[f64], w_in: &[f64]) -> Result<SMatrix<f64, 16, 16>> {
        let v0 = self.local_vars(z, k);
        let mut h = SMatrix::<f64, 16, 16>::zeros();
        let active: Vec<usize> = (0..16).filter(|&j| self.local_column(k, j).is_some()).collect();
        for &j in &active {
            let step = 1e-6 * v0[j].abs().max(1.0);
            let mut vp = v0;
            let mut vm = v0;
            vp[j] += step;
            vm[j] -= step;
            let gp = self.local_gradient(k, &vp, w_eq, w_in)?;
            let gm = self.local_gradient(k, &vm, w_eq, w_in)?;
            for &i in &active {
                h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
            }
        }
        let sym = (h + h.transpose()) * 0.5;
        if sym.iter().all(|v| *v == 0.0) {
            return Ok(sym);
        }
        let eig = SymmetricEigen::new(sym);
        let clipped = eig.eigenvalues.map(|l| l.max(0.0));
        Ok(eig.eigenvectors * SMatrix::<f64, 16, 16>::from_diagonal(&clipped) * eig.eigenvectors.transpose())
    }

    /// Node constraint values and their Jacobian with respect to node `k`
    /// and its snap (15 local columns).
    fn node_rows_with_jacobian(&self, z: &[f64], k: usize) -> Result<Vec<Dual<15>>> {
        let ctx = self.ctx().expect("called only with path constraints");
        let node = self.tr.node(z, k);
        let snap = self.node_snap(z, k);
        let x: [Dual<15>; 12] = std::array::from_fn(|i| Dual::variable(node.0[i], i));
        let s: [Dual<15>; 3] = if k < self.tr.intervals {
            std::array::from_fn(|i| Dual::variable(snap[i], 12 + i))
        } else {
            [Dual::constant(0.0); 3]
        };
        node_constraints_generic(&x, &s, &ctx).map_err(|e| e.at_node(k))
    }
}

impl NlpProblem for CraneNlp {
    fn num_vars(&self) -> usize {
        self.tr.num_vars()
    }

    fn num_eq(&self) -> usize {
        12 * self.tr.intervals + 24 + if self.tr.pin_terminal_snap { 3 } else { 0 }
    }

    fn num_ineq(&self) -> usize {
        (self.tr.intervals + 1) * self.rows_per_node()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.num_vars();
        let mut lb = vec![f64::NEG_INFINITY; n];
        let mut ub = vec![f64::INFINITY; n];
        lb[n - 1] = self.tr.t_min;
        ub[n - 1] = self.tr.t_max;
        (lb, ub)
    }

    fn objective(&self, z: &[f64]) -> Result<f64> {
        Ok(objective(z, &self.tr))
    }

    fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        let tr = &self.tr;
        let h = tr.step(z);
        let mut g = vec![0.0; tr.num_vars()];
        let mut snap_sq = 0.0;
        for k in 0..tr.intervals {
            let s = tr.snap(z, k);
            for i in 0..3 {
                g[tr.snap_index(k) + i] = 2.0 * tr.lambda * s[i] * h;
                snap_sq += s[i] * s[i];
            }
        }
        g[tr.time_index()] = 1.0 + tr.lambda * snap_sq / tr.intervals as f64;
        Ok(g)
    }

    fn eq_constraints(&self, z: &[f64]) -> Result<Vec<f64>> {
        let tr = &self.tr;
        let mut c = defects(z, tr);
        let first = tr.node(z, 0);
        let last = tr.node(z, tr.intervals);
        c.extend((0..12).map(|i| first.0[i] - self.start.0[i]));
        c.extend((0..12).map(|i| last.0[i] - self.end.0[i]));
        if tr.pin_terminal_snap {
            c.extend(tr.snap(z, tr.intervals - 1));
        }
        Ok(c)
    }

    fn ineq_constraints(&self, z: &[f64]) -> Result<Vec<f64>> {
        let Some(ctx) = self.ctx() else {
            return Ok(Vec::new());
        };
        let rows: Vec<Vec<f64>> = (0..=self.tr.intervals)
            .into_par_iter()
            .map(|k| {
                node_constraints_generic(&self.tr.node(z, k).0, &self.node_snap(z, k), &ctx).map_err(|e| e.at_node(k))
            })
            .collect::<Result<_>>()?;
        Ok(rows.concat())
    }

    fn eq_jacobian(&self, z: &[f64]) -> Result<Triplets> {
        let tr = &self.tr;
        let n_int = tr.intervals;
        let mut jac = Triplets::new(self.num_eq(), self.num_vars());
        let h = tr.step(z);
        for k in 0..n_int {
            let node = tr.node(z, k);
            let snap = tr.snap(z, k);
            let x: [Dual<16>; 12] = std::array::from_fn(|i| Dual::variable(node.0[i], i));
            let s: [Dual<16>; 3] = std::array::from_fn(|i| Dual::variable(snap[i], 12 + i));
            let hd = Dual::<16>::variable(h, 15);
            let next = flat_rk4_step(&x, &s, hd);
            for r in 0..12 {
                let row = 12 * k + r;
                jac.push(row, tr.node_index(k + 1) + r, 1.0);
                for j in 0..16 {
                    let v = next[r].eps[j];
                    if v == 0.0 {
                        continue;
                    }
                    let col = match j {
                        0..=11 => tr.node_index(k) + j,
                        12..=14 => tr.snap_index(k) + j - 12,
                        _ => tr.time_index(),
                    };
                    // dh/dT = 1/N
                    let scale = if j == 15 { 1.0 / n_int as f64 } else { 1.0 };
                    jac.push(row, col, -v * scale);
                }
            }
        }
        let base = 12 * n_int;
        for i in 0..12 {
            jac.push(base + i, tr.node_index(0) + i, 1.0);
            jac.push(base + 12 + i, tr.node_index(n_int) + i, 1.0);
        }
        if tr.pin_terminal_snap {
            for i in 0..3 {
                jac.push(base + 24 + i, tr.snap_index(n_int - 1) + i, 1.0);
            }
        }
        Ok(jac)
    }

    fn ineq_jacobian(&self, z: &[f64]) -> Result<Triplets> {
        let mut jac = Triplets::new(self.num_ineq(), self.num_vars());
        if self.path.is_none() {
            return Ok(jac);
        }
        let rows = self.rows_per_node();
        let blocks: Vec<Vec<Dual<15>>> = (0..=self.tr.intervals)
            .into_par_iter()
            .map(|k| self.node_rows_with_jacobian(z, k))
            .collect::<Result<_>>()?;
        for (k, block) in blocks.iter().enumerate() {
            for (r, c) in block.iter().enumerate() {
                for j in 0..15 {
                    let v = c.eps[j];
                    if v == 0.0 {
                        continue;
                    }
                    if let Some(col) = self.local_column(k, j) {
                        jac.push(k * rows + r, col, v);
                    }
                }
            }
        }
        Ok(jac)
    }

    fn lagrangian_hessian(&self, z: &[f64], w_eq: &[f64], w_in: &[f64]) -> Result<Triplets> {
        let n = self.num_vars();
        let blocks: Vec<SMatrix<f64, 16, 16>> = (0..=self.tr.intervals)
            .into_par_iter()
            .map(|k| self.local_hessian(z, k, w_eq, w_in).map_err(|e| e.at_node(k)))
            .collect::<Result<_>>()?;
        let mut hess = Triplets::new(n, n);
        for (k, b) in blocks.iter().enumerate() {
            for j in 0..16 {
                let Some(cj) = self.local_column(k, j) else { continue };
                for i in 0..16 {
                    let Some(ci) = self.local_column(k, i) else { continue };
                    let v = b[(i, j)];
                    if ci <= cj && v != 0.0 {
                        hess.push(ci, cj, v);
                    }
                }
            }
        }
        Ok(hess)
    }
}
