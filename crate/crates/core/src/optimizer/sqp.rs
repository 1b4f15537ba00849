//! Sequential quadratic programming with an l1 merit function. Each
//! subproblem is a sparse convex QP solved by clarabel; inconsistent
//! linearizations fall back to an elastic (l1-relaxed) subproblem.

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use log::debug;
use serde::{Deserialize, Serialize};

use super::nlp::{NlpProblem, Triplets};
use crate::error::{CraneError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Feasible point at which no further progress could be made.
    FeasibleStalled,
    Infeasible,
    IterationLimit,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    /// Largest violation of equalities, inequalities and bounds.
    pub max_violation: f64,
    /// Infinity norm of the Lagrangian gradient at the returned point.
    pub stationarity: f64,
    pub wall_time_s: f64,
}

impl SolveReport {
    /// The returned point satisfies the constraints to the requested tolerance.
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SqpOptions {
    pub max_iter: usize,
    pub tol_violation: f64,
    pub tol_stationarity: f64,
    /// Initial proximal weight added to the Hessian diagonal.
    pub prox: f64,
    pub prox_min: f64,
    pub prox_max: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Penalty weight on the slack of elastic subproblems.
    pub elastic_weight: f64,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol_violation: 1e-6,
            tol_stationarity: 1e-4,
            prox: 1e-10,
            prox_min: 1e-10,
            prox_max: 1e4,
            armijo: 1e-4,
            max_backtracks: 30,
            elastic_weight: 1e3,
        }
    }
}

impl SqpOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || !(self.tol_violation > 0.0) || !(self.tol_stationarity > 0.0) {
            return Err(CraneError::InvalidInput(
                "SQP needs a positive iteration budget and tolerances".into(),
            ));
        }
        Ok(())
    }
}

/// Function values and derivatives at one iterate.
struct Eval {
    f: f64,
    g: Vec<f64>,
    ce: Vec<f64>,
    ci: Vec<f64>,
    je: Triplets,
    ji: Triplets,
}

fn evaluate<P: NlpProblem + ?Sized>(nlp: &P, z: &[f64]) -> Result<Eval> {
    Ok(Eval {
        f: nlp.objective(z)?,
        g: nlp.gradient(z)?,
        ce: nlp.eq_constraints(z)?,
        ci: nlp.ineq_constraints(z)?,
        je: nlp.eq_jacobian(z)?,
        ji: nlp.ineq_jacobian(z)?,
    })
}

fn l1_violation(ce: &[f64], ci: &[f64]) -> f64 {
    ce.iter().map(|v| v.abs()).sum::<f64>() + ci.iter().map(|v| (-v).max(0.0)).sum::<f64>()
}

fn max_violation(ce: &[f64], ci: &[f64], z: &[f64], lb: &[f64], ub: &[f64]) -> f64 {
    let e = ce.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let i = ci.iter().fold(0.0f64, |m, v| m.max(-v));
    let b = z
        .iter()
        .zip(lb.iter().zip(ub))
        .fold(0.0f64, |m, (x, (l, u))| m.max(l - x).max(x - u));
    e.max(i).max(b)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Multipliers in the convention `L = f + y_eqᵀ c_E − y_inᵀ c_I − y_lbᵀ(z − lb) + y_ubᵀ(z − ub)`.
#[derive(Debug, Clone)]
struct Multipliers {
    eq: Vec<f64>,
    ineq: Vec<f64>,
    /// Net bound multiplier per variable (`y_ub − y_lb`).
    bound: Vec<f64>,
}

struct QpStep {
    d: Vec<f64>,
    y: Multipliers,
    elastic: bool,
}

/// Builds and solves the QP subproblem. In elastic mode the linearized
/// constraints are relaxed with l1-penalized slacks.
fn solve_qp(
    hess: &Triplets,
    prox: f64,
    ev: &Eval,
    z: &[f64],
    lb: &[f64],
    ub: &[f64],
    elastic: Option<f64>,
) -> Option<QpStep> {
    let n = z.len();
    let me = ev.ce.len();
    let mi = ev.ci.len();
    let ns = if elastic.is_some() { 2 * me + mi } else { 0 };
    let nv = n + ns;

    // Hessian, upper triangle
    let (mut pr, mut pc, mut pv) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..hess.nnz() {
        let (r, c) = (hess.rows[k], hess.cols[k]);
        if r <= c {
            pr.push(r);
            pc.push(c);
            pv.push(hess.vals[k]);
        }
    }
    for i in 0..n {
        pr.push(i);
        pc.push(i);
        pv.push(prox);
    }
    let p = CscMatrix::new_from_triplets(nv, nv, pr, pc, pv);
    let mut q = ev.g.clone();
    if let Some(w) = elastic {
        q.extend(std::iter::repeat(w).take(ns));
    }

    let (mut ar, mut ac, mut av) = (Vec::new(), Vec::new(), Vec::new());
    let mut b = Vec::new();
    for k in 0..ev.je.nnz() {
        ar.push(ev.je.rows[k]);
        ac.push(ev.je.cols[k]);
        av.push(ev.je.vals[k]);
    }
    b.extend(ev.ce.iter().map(|v| -v));
    if elastic.is_some() {
        for r in 0..me {
            ar.extend([r, r]);
            ac.extend([n + r, n + me + r]);
            av.extend([1.0, -1.0]);
        }
    }
    // fixed variables become equality rows
    let fixed: Vec<usize> = (0..n).filter(|&i| lb[i] == ub[i]).collect();
    let mut row = me;
    for &i in &fixed {
        ar.push(row);
        ac.push(i);
        av.push(1.0);
        b.push(ub[i] - z[i]);
        row += 1;
    }
    let n_zero = row;
    for k in 0..ev.ji.nnz() {
        ar.push(row + ev.ji.rows[k]);
        ac.push(ev.ji.cols[k]);
        av.push(-ev.ji.vals[k]);
    }
    if elastic.is_some() {
        for r in 0..mi {
            ar.push(row + r);
            ac.push(n + 2 * me + r);
            av.push(-1.0);
        }
    }
    b.extend_from_slice(&ev.ci);
    row += mi;
    let mut bound_rows = Vec::new();
    for i in 0..n {
        if lb[i] == ub[i] {
            continue;
        }
        if ub[i].is_finite() {
            ar.push(row);
            ac.push(i);
            av.push(1.0);
            b.push(ub[i] - z[i]);
            bound_rows.push((i, 1.0));
            row += 1;
        }
        if lb[i].is_finite() {
            ar.push(row);
            ac.push(i);
            av.push(-1.0);
            b.push(z[i] - lb[i]);
            bound_rows.push((i, -1.0));
            row += 1;
        }
    }
    for s in 0..ns {
        ar.push(row);
        ac.push(n + s);
        av.push(-1.0);
        b.push(0.0);
        row += 1;
    }
    let a = CscMatrix::new_from_triplets(row, nv, ar, ac, av);
    let cones = [SupportedConeT::ZeroConeT(n_zero), SupportedConeT::NonnegativeConeT(row - n_zero)];
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(400)
        .tol_gap_abs(1e-11)
        .tol_gap_rel(1e-11)
        .tol_feas(1e-10)
        .build()
        .ok()?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).ok()?;
    solver.solve();
    let sol = &solver.solution;
    if !matches!(sol.status, SolverStatus::Solved | SolverStatus::AlmostSolved) {
        debug!("QP subproblem status {:?} (elastic: {})", sol.status, elastic.is_some());
        return None;
    }
    if sol.x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut bound = vec![0.0; n];
    for (k, &i) in fixed.iter().enumerate() {
        bound[i] += sol.z[me + k];
    }
    for (k, &(i, sign)) in bound_rows.iter().enumerate() {
        bound[i] += sign * sol.z[n_zero + mi + k];
    }
    Some(QpStep {
        d: sol.x[..n].to_vec(),
        y: Multipliers {
            eq: sol.z[..me].to_vec(),
            ineq: sol.z[n_zero..n_zero + mi].to_vec(),
            bound,
        },
        elastic: elastic.is_some(),
    })
}

fn lagrangian_gradient(ev: &Eval, y: &Multipliers) -> Vec<f64> {
    let mut r = ev.g.clone();
    for (ri, v) in r.iter_mut().zip(ev.je.tmul_vec(&y.eq)) {
        *ri += v;
    }
    for (ri, v) in r.iter_mut().zip(ev.ji.tmul_vec(&y.ineq)) {
        *ri -= v;
    }
    for (ri, v) in r.iter_mut().zip(&y.bound) {
        *ri += v;
    }
    r
}

fn complementarity(ev: &Eval, y: &Multipliers, z: &[f64], lb: &[f64], ub: &[f64]) -> f64 {
    let ineq = ev
        .ci
        .iter()
        .zip(&y.ineq)
        .fold(0.0f64, |m, (c, w)| m.max((c.max(0.0) * w).abs()));
    let bounds = (0..z.len()).fold(0.0f64, |m, i| {
        let w = y.bound[i];
        let gap = if w > 0.0 { ub[i] - z[i] } else { z[i] - lb[i] };
        if w == 0.0 || !gap.is_finite() {
            m
        } else {
            m.max((gap * w).abs())
        }
    });
    ineq.max(bounds)
}

/// Solves the NLP from `guess`. Returns the final iterate together with a
/// report; evaluation failures at the initial point are errors, all other
/// outcomes are encoded in [`SolveStatus`].
pub fn solve<P: NlpProblem + ?Sized>(nlp: &P, guess: &[f64], opts: &SqpOptions) -> Result<(Vec<f64>, SolveReport)> {
    opts.validate()?;
    let start = Instant::now();
    let n = nlp.num_vars();
    if guess.len() != n {
        return Err(CraneError::InvalidInput(format!(
            "guess has {} entries, problem has {n} variables",
            guess.len()
        )));
    }
    let (lb, ub) = nlp.bounds();
    let mut z: Vec<f64> = (0..n).map(|i| guess[i].clamp(lb[i], ub[i])).collect();
    let mut ev = evaluate(nlp, &z)?;
    let mut y = Multipliers {
        eq: vec![0.0; ev.ce.len()],
        ineq: vec![0.0; ev.ci.len()],
        bound: vec![0.0; n],
    };
    let mut rho = 1.0f64;
    let mut prox = opts.prox;
    let mut stalled_elastic = 0usize;
    let mut last_violation = f64::INFINITY;

    let report = |status, iterations, ev: &Eval, z: &[f64], y: &Multipliers| SolveReport {
        status,
        iterations,
        objective: ev.f,
        max_violation: max_violation(&ev.ce, &ev.ci, z, &lb, &ub),
        stationarity: inf_norm(&lagrangian_gradient(ev, y)),
        wall_time_s: start.elapsed().as_secs_f64(),
    };

    for iter in 0..opts.max_iter {
        let viol = max_violation(&ev.ce, &ev.ci, &z, &lb, &ub);
        let stat = inf_norm(&lagrangian_gradient(&ev, &y));
        let comp = complementarity(&ev, &y, &z, &lb, &ub);
        debug!("sqp {iter}: f={:.6} viol={viol:.3e} stat={stat:.3e} comp={comp:.3e} prox={prox:.1e}", ev.f);
        if viol <= opts.tol_violation && stat <= opts.tol_stationarity && comp <= opts.tol_stationarity {
            return Ok((z.clone(), report(SolveStatus::Optimal, iter, &ev, &z, &y)));
        }

        let hess = nlp.lagrangian_hessian(&z, &y.eq, &y.ineq)?;
        let mut step = solve_qp(&hess, prox, &ev, &z, &lb, &ub, None);
        if step.is_none() {
            let w = opts.elastic_weight.max(2.0 * rho);
            step = solve_qp(&hess, prox, &ev, &z, &lb, &ub, Some(w));
        }
        let Some(step) = step else {
            prox *= 100.0;
            if prox > opts.prox_max {
                let status = if viol <= opts.tol_violation {
                    SolveStatus::FeasibleStalled
                } else {
                    SolveStatus::LineSearchFailed
                };
                return Ok((z.clone(), report(status, iter, &ev, &z, &y)));
            }
            continue;
        };

        if step.elastic {
            if viol > 0.999 * last_violation {
                stalled_elastic += 1;
            } else {
                stalled_elastic = 0;
            }
            if stalled_elastic >= 5 && viol > opts.tol_violation {
                return Ok((z.clone(), report(SolveStatus::Infeasible, iter, &ev, &z, &y)));
            }
        } else {
            stalled_elastic = 0;
        }
        last_violation = viol;

        let ymax = inf_norm(&step.y.eq).max(inf_norm(&step.y.ineq));
        if rho < 1.1 * ymax {
            rho = (2.0 * ymax).max(1.0);
        }
        let merit = |f: f64, ce: &[f64], ci: &[f64]| f + rho * l1_violation(ce, ci);
        let phi0 = merit(ev.f, &ev.ce, &ev.ci);
        let d = &step.d;
        let lin_ce: Vec<f64> = ev.je.mul_vec(d).iter().zip(&ev.ce).map(|(a, b)| a + b).collect();
        let lin_ci: Vec<f64> = ev.ji.mul_vec(d).iter().zip(&ev.ci).map(|(a, b)| a + b).collect();
        let gd: f64 = ev.g.iter().zip(d).map(|(a, b)| a * b).sum();
        let dphi = gd + rho * (l1_violation(&lin_ce, &lin_ci) - l1_violation(&ev.ce, &ev.ci));

        if inf_norm(d) <= 1e-14 * (1.0 + inf_norm(&z)) {
            y = step.y;
            let status = if viol <= opts.tol_violation {
                if inf_norm(&lagrangian_gradient(&ev, &y)) <= opts.tol_stationarity {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::FeasibleStalled
                }
            } else {
                SolveStatus::Infeasible
            };
            return Ok((z.clone(), report(status, iter + 1, &ev, &z, &y)));
        }

        let trial = |alpha: f64, dir: &[f64]| -> Option<(Vec<f64>, f64, Vec<f64>, Vec<f64>)> {
            let zt: Vec<f64> = (0..n).map(|i| (z[i] + alpha * dir[i]).clamp(lb[i], ub[i])).collect();
            let f = nlp.objective(&zt).ok()?;
            let ce = nlp.eq_constraints(&zt).ok()?;
            let ci = nlp.ineq_constraints(&zt).ok()?;
            if !f.is_finite() {
                return None;
            }
            Some((zt, f, ce, ci))
        };

        let mut accepted: Option<Vec<f64>> = None;
        // full step, then a second-order correction, then backtracking
        if let Some((zt, f, ce, ci)) = trial(1.0, d) {
            if merit(f, &ce, &ci) <= phi0 + opts.armijo * dphi.min(0.0) {
                accepted = Some(zt);
            } else {
                let soc_ev = Eval {
                    f: ev.f,
                    g: ev.g.clone(),
                    ce: ce.iter().zip(ev.je.mul_vec(d)).map(|(c, jd)| c - jd).collect(),
                    ci: ci.iter().zip(ev.ji.mul_vec(d)).map(|(c, jd)| c - jd).collect(),
                    je: ev.je.clone(),
                    ji: ev.ji.clone(),
                };
                if let Some(soc) = solve_qp(&hess, prox, &soc_ev, &z, &lb, &ub, None) {
                    if let Some((zs, fs, ces, cis)) = trial(1.0, &soc.d) {
                        if merit(fs, &ces, &cis) <= phi0 + opts.armijo * dphi.min(0.0) {
                            accepted = Some(zs);
                        }
                    }
                }
            }
        }
        if accepted.is_none() {
            let mut alpha = 0.5;
            for _ in 0..opts.max_backtracks {
                if let Some((zt, f, ce, ci)) = trial(alpha, d) {
                    if merit(f, &ce, &ci) <= phi0 + opts.armijo * alpha * dphi.min(0.0) {
                        accepted = Some(zt);
                        break;
                    }
                }
                alpha *= 0.5;
            }
        }

        match accepted {
            Some(zn) => {
                match evaluate(nlp, &zn) {
                    Ok(e) => {
                        z = zn;
                        ev = e;
                        y = step.y;
                        prox = (prox * 0.3).max(opts.prox_min);
                    }
                    Err(_) => prox *= 10.0,
                }
            }
            None => {
                prox *= 10.0;
                if prox > opts.prox_max {
                    let status = if viol <= opts.tol_violation {
                        SolveStatus::FeasibleStalled
                    } else {
                        SolveStatus::LineSearchFailed
                    };
                    return Ok((z.clone(), report(status, iter + 1, &ev, &z, &y)));
                }
            }
        }
    }
    Ok((z.clone(), report(SolveStatus::IterationLimit, opts.max_iter, &ev, &z, &y)))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// min (x−1)² + (y−2)²  s.t.  x + y = 1,  x ≥ 0.5.
    struct SmallQp;

    impl NlpProblem for SmallQp {
        fn num_vars(&self) -> usize {
            2
        }
        fn num_eq(&self) -> usize {
            1
        }
        fn num_ineq(&self) -> usize {
            1
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![f64::NEG_INFINITY; 2], vec![f64::INFINITY; 2])
        }
        fn objective(&self, z: &[f64]) -> Result<f64> {
            Ok((z[0] - 1.0).powi(2) + (z[1] - 2.0).powi(2))
        }
        fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![2.0 * (z[0] - 1.0), 2.0 * (z[1] - 2.0)])
        }
        fn eq_constraints(&self, z: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![z[0] + z[1] - 1.0])
        }
        fn ineq_constraints(&self, z: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![z[0] - 0.5])
        }
        fn eq_jacobian(&self, _: &[f64]) -> Result<Triplets> {
            let mut t = Triplets::new(1, 2);
            t.push(0, 0, 1.0);
            t.push(0, 1, 1.0);
            Ok(t)
        }
        fn ineq_jacobian(&self, _: &[f64]) -> Result<Triplets> {
            let mut t = Triplets::new(1, 2);
            t.push(0, 0, 1.0);
            Ok(t)
        }
        fn lagrangian_hessian(&self, _: &[f64], _: &[f64], _: &[f64]) -> Result<Triplets> {
            let mut t = Triplets::new(2, 2);
            t.push(0, 0, 2.0);
            t.push(1, 1, 2.0);
            Ok(t)
        }
    }

    /// Nonconvex: min −x·y  s.t.  x² + y² ≤ 2, with a curvature-free Hessian
    /// approximation compensated by the proximal term.
    struct Circle;

    impl NlpProblem for Circle {
        fn num_vars(&self) -> usize {
            2
        }
        fn num_eq(&self) -> usize {
            0
        }
        fn num_ineq(&self) -> usize {
            1
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![0.0; 2], vec![10.0; 2])
        }
        fn objective(&self, z: &[f64]) -> Result<f64> {
            Ok(-z[0] * z[1])
        }
        fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![-z[1], -z[0]])
        }
        fn eq_constraints(&self, _: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![])
        }
        fn ineq_constraints(&self, z: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![2.0 - z[0] * z[0] - z[1] * z[1]])
        }
        fn eq_jacobian(&self, _: &[f64]) -> Result<Triplets> {
            Ok(Triplets::new(0, 2))
        }
        fn ineq_jacobian(&self, z: &[f64]) -> Result<Triplets> {
            let mut t = Triplets::new(1, 2);
            t.push(0, 0, -2.0 * z[0]);
            t.push(0, 1, -2.0 * z[1]);
            Ok(t)
        }
        fn lagrangian_hessian(&self, _: &[f64], _: &[f64], w_in: &[f64]) -> Result<Triplets> {
            // exact Hessian [[−2w, −1], [−1, −2w]] is indefinite; use its
            // positive part via the multiplier-dependent diagonal
            let mut t = Triplets::new(2, 2);
            let w = (-2.0 * w_in[0]).max(0.0);
            t.push(0, 0, w + 1.0);
            t.push(1, 1, w + 1.0);
            Ok(t)
        }
    }

    struct Inconsistent;

    impl NlpProblem for Inconsistent {
        fn num_vars(&self) -> usize {
            1
        }
        fn num_eq(&self) -> usize {
            1
        }
        fn num_ineq(&self) -> usize {
            1
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![f64::NEG_INFINITY], vec![f64::INFINITY])
        }
        fn objective(&self, z: &[f64]) -> Result<f64> {
            Ok(z[0] * z[0])
        }
        fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![2.0 * z[0]])
        }
        fn eq_constraints(&self, z: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![z[0] - 1.0])
        }
        fn ineq_constraints(&self, z: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![-z[0]])
        }
        fn eq_jacobian(&self, _: &[f64]) -> Result<Triplets> {
            let mut t = Triplets::new(1, 1);
            t.push(0, 0, 1.0);
            Ok(t)
        }
        fn ineq_jacobian(&self, _: &[f64]) -> Result<Triplets> {
            let mut t = Triplets::new(1, 1);
            t.push(0, 0, -1.0);
            Ok(t)
        }
        fn lagrangian_hessian(&self, _: &[f64], _: &[f64], _: &[f64]) -> Result<Triplets> {
            let mut t = Triplets::new(1, 1);
            t.push(0, 0, 2.0);
            Ok(t)
        }
    }

    #[test]
    fn equality_and_inequality_qp() {
        let (z, rep) = solve(&SmallQp, &[3.0, 3.0], &SqpOptions::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal);
        // unconstrained-on-line optimum (0, 1) violates x ≥ 0.5
        assert!((z[0] - 0.5).abs() < 1e-6 && (z[1] - 0.5).abs() < 1e-6, "{z:?}");
    }

    #[test]
    fn nonconvex_circle() {
        let opts = SqpOptions {
            tol_stationarity: 1e-7,
            ..Default::default()
        };
        let (z, rep) = solve(&Circle, &[1.2, 0.3], &opts).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal, "{rep:?}");
        assert!((z[0] - 1.0).abs() < 1e-5 && (z[1] - 1.0).abs() < 1e-5, "{z:?}");
    }

    #[test]
    fn inconsistent_constraints_are_reported() {
        let (_, rep) = solve(&Inconsistent, &[0.3], &SqpOptions::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Infeasible, "{rep:?}");
    }

    #[test]
    fn wrong_guess_length_is_an_error() {
        assert!(solve(&SmallQp, &[0.0], &SqpOptions::default()).is_err());
    }
}
