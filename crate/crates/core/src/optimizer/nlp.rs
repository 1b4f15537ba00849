//! Solver-agnostic nonlinear program interface.

use crate::error::Result;

/// Sparse matrix in coordinate form; repeated entries are summed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            ..Default::default()
        }
    }

    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.nrows && c < self.ncols, "entry ({r}, {c}) out of bounds");
        self.rows.push(r);
        self.cols.push(c);
        self.vals.push(v);
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for k in 0..self.nnz() {
            y[self.rows[k]] += self.vals[k] * x[self.cols[k]];
        }
        y
    }

    /// `y = Aᵀ x`.
    pub fn tmul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        for k in 0..self.nnz() {
            y[self.cols[k]] += self.vals[k] * x[self.rows[k]];
        }
        y
    }

    /// Dense copy, for tests and small problems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for k in 0..self.nnz() {
            d[self.rows[k]][self.cols[k]] += self.vals[k];
        }
        d
    }
}

/// A smooth NLP
///
/// ```text
/// min f(z)  s.t.  c_E(z) = 0,  c_I(z) ≥ 0,  lb ≤ z ≤ ub
/// ```
///
/// Implementations must be pure: every callback depends on its arguments only.
pub trait NlpProblem: Sync {
    fn num_vars(&self) -> usize;
    fn num_eq(&self) -> usize;
    fn num_ineq(&self) -> usize;
    /// Variable bounds; infinite entries are allowed.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);

    fn objective(&self, z: &[f64]) -> Result<f64>;
    fn gradient(&self, z: &[f64]) -> Result<Vec<f64>>;
    fn eq_constraints(&self, z: &[f64]) -> Result<Vec<f64>>;
    fn ineq_constraints(&self, z: &[f64]) -> Result<Vec<f64>>;
    fn eq_jacobian(&self, z: &[f64]) -> Result<Triplets>;
    fn ineq_jacobian(&self, z: &[f64]) -> Result<Triplets>;

    /// Positive semidefinite approximation of the Hessian of
    /// `f + w_Eᵀ c_E + w_Iᵀ c_I`. Only upper-triangular entries are read.
    fn lagrangian_hessian(&self, z: &[f64], w_eq: &[f64], w_in: &[f64]) -> Result<Triplets>;
}

/// Worst-case relative mismatch between an analytic derivative and a
/// central finite difference, `|a − fd| / max(1, |fd|)`.
pub fn relative_mismatch(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / fd.abs().max(1.0)
}

/// Central-difference directional check of the Jacobian columns `cols`.
/// Returns the largest relative mismatch over all rows of all columns.
pub fn check_jacobian_columns<F>(f: F, jac: &Triplets, z: &[f64], cols: &[usize], step: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let dense_col = |c: usize| -> Vec<f64> {
        let mut v = vec![0.0; jac.nrows];
        for k in 0..jac.nnz() {
            if jac.cols[k] == c {
                v[jac.rows[k]] += jac.vals[k];
            }
        }
        v
    };
    let mut worst = 0.0f64;
    for &c in cols {
        let h = step * z[c].abs().max(1.0);
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[c] += h;
        zm[c] -= h;
        let fp = f(&zp)?;
        let fm = f(&zm)?;
        let a = dense_col(c);
        for r in 0..jac.nrows {
            let fd = (fp[r] - fm[r]) / (2.0 * h);
            worst = worst.max(relative_mismatch(a[r], fd));
        }
    }
    Ok(worst)
}
