//! Truncated Taylor jets of order four.
//!
//! A [`Jet`] stores the normalized Taylor coefficients `c[k] = f⁽ᵏ⁾(t)/k!` of
//! a scalar signal. Arithmetic follows the truncated Cauchy-product rules, so
//! composing jets propagates exact time derivatives up to fourth order. The
//! coefficient type is generic, which lets the same code run on plain `f64`
//! or on [`Dual`](crate::real::Dual) numbers for parameter sensitivities.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::real::Real;

pub const ORDER: usize = 4;
const LEN: usize = ORDER + 1;

const FACT: [f64; LEN] = [1.0, 1.0, 2.0, 6.0, 24.0];

#[derive(Clone, Copy, Debug)]
pub struct Jet<S: Real> {
    c: [S; LEN],
}

impl<S: Real> Jet<S> {
    pub fn constant(v: S) -> Self {
        let mut c = [S::zero(); LEN];
        c[0] = v;
        Self { c }
    }

    /// Builds a jet from a value and its first four time derivatives.
    pub fn from_derivatives(d: [S; LEN]) -> Self {
        let mut c = d;
        for (k, ck) in c.iter_mut().enumerate() {
            *ck = ck.scale(1.0 / FACT[k]);
        }
        Self { c }
    }

    pub fn value(&self) -> S {
        self.c[0]
    }

    /// `k`-th time derivative.
    pub fn derivative(&self, k: usize) -> S {
        self.c[k].scale(FACT[k])
    }

    pub fn derivatives(&self) -> [S; LEN] {
        std::array::from_fn(|k| self.derivative(k))
    }

    /// Jet of the time derivative. The highest coefficient is unknown after
    /// differentiation and is set to zero; only orders below `ORDER` remain exact.
    pub fn differentiate(&self) -> Self {
        let mut c = [S::zero(); LEN];
        for k in 0..ORDER {
            c[k] = self.c[k + 1].scale((k + 1) as f64);
        }
        Self { c }
    }

    fn integrate(&self, value: S) -> Self {
        let mut c = [S::zero(); LEN];
        c[0] = value;
        for k in 1..LEN {
            c[k] = self.c[k - 1].scale(1.0 / k as f64);
        }
        Self { c }
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            c: self.c.map(|v| v.scale(k)),
        }
    }

    pub fn add_scalar(mut self, v: S) -> Self {
        self.c[0] += v;
        self
    }

    pub fn mul_scalar(&self, v: S) -> Self {
        Self {
            c: self.c.map(|x| x * v),
        }
    }

    pub fn sqrt(&self) -> Self {
        let mut s = [S::zero(); LEN];
        s[0] = self.c[0].sqrt();
        let two_s0 = s[0].scale(2.0);
        for k in 1..LEN {
            let mut acc = self.c[k];
            for j in 1..k {
                acc -= s[j] * s[k - j];
            }
            s[k] = acc / two_s0;
        }
        Self { c: s }
    }

    /// Simultaneous sine and cosine.
    pub fn sin_cos(&self) -> (Self, Self) {
        let mut s = [S::zero(); LEN];
        let mut c = [S::zero(); LEN];
        s[0] = self.c[0].sin();
        c[0] = self.c[0].cos();
        for k in 1..LEN {
            let mut ds = S::zero();
            let mut dc = S::zero();
            for j in 1..=k {
                let ja = self.c[j].scale(j as f64);
                ds += ja * c[k - j];
                dc -= ja * s[k - j];
            }
            s[k] = ds.scale(1.0 / k as f64);
            c[k] = dc.scale(1.0 / k as f64);
        }
        (Self { c: s }, Self { c })
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Self {
        self.sin_cos().1
    }

    pub fn tanh(&self) -> Self {
        // t' = (1 - t²) a'
        let mut t = [S::zero(); LEN];
        let mut w = [S::zero(); LEN]; // 1 - t²
        t[0] = self.c[0].tanh();
        w[0] = S::one() - t[0] * t[0];
        for k in 1..LEN {
            let mut acc = S::zero();
            for j in 1..=k {
                acc += self.c[j].scale(j as f64) * w[k - j];
            }
            t[k] = acc.scale(1.0 / k as f64);
            let mut sq = S::zero();
            for j in 0..=k {
                sq += t[j] * t[k - j];
            }
            w[k] = -sq;
        }
        Self { c: t }
    }

    /// Two-argument arctangent `atan2(self, x)`, continuous along the jet.
    pub fn atan2(&self, x: &Self) -> Self {
        let y = self;
        let num = *x * y.differentiate() - *y * x.differentiate();
        let den = *x * *x + *y * *y;
        (num / den).integrate(y.c[0].atan2(x.c[0]))
    }
}

impl<S: Real> Add for Jet<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            c: std::array::from_fn(|k| self.c[k] + rhs.c[k]),
        }
    }
}

impl<S: Real> Sub for Jet<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self {
            c: std::array::from_fn(|k| self.c[k] - rhs.c[k]),
        }
    }
}

impl<S: Real> Neg for Jet<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            c: self.c.map(|v| -v),
        }
    }
}

impl<S: Real> Mul for Jet<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut c = [S::zero(); LEN];
        for k in 0..LEN {
            let mut acc = S::zero();
            for j in 0..=k {
                acc += self.c[j] * rhs.c[k - j];
            }
            c[k] = acc;
        }
        Self { c }
    }
}

impl<S: Real> Div for Jet<S> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let mut q = [S::zero(); LEN];
        for k in 0..LEN {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= rhs.c[j] * q[k - j];
            }
            q[k] = acc / rhs.c[0];
        }
        Self { c: q }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Polynomial-in-time test signal with its exact derivatives.
    fn signal(coeffs: &[f64], t: f64) -> [f64; LEN] {
        let mut d = [0.0; LEN];
        for (k, dk) in d.iter_mut().enumerate() {
            for (i, &a) in coeffs.iter().enumerate() {
                if i >= k {
                    let falling: f64 = (0..k).map(|m| (i - m) as f64).product();
                    *dk += a * falling * t.powi((i - k) as i32);
                }
            }
        }
        d
    }

    fn jet_at(coeffs: &[f64], t: f64) -> Jet<f64> {
        Jet::from_derivatives(signal(coeffs, t))
    }

    /// Finite-difference derivatives of order 1..4 of a scalar function of time.
    fn fd_derivs<F: Fn(f64) -> f64>(f: F, t: f64) -> [f64; LEN] {
        let h = 1e-2;
        let f0 = f(t);
        let (fp1, fm1, fp2, fm2) = (f(t + h), f(t - h), f(t + 2.0 * h), f(t - 2.0 * h));
        let (fp3, fm3) = (f(t + 3.0 * h), f(t - 3.0 * h));
        [
            f0,
            (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h),
            (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h),
            (-fp3 + 8.0 * fp2 - 13.0 * fp1 + 13.0 * fm1 - 8.0 * fm2 + fm3) / (8.0 * h.powi(3)),
            (-fp3 + 12.0 * fp2 - 39.0 * fp1 + 56.0 * f0 - 39.0 * fm1 + 12.0 * fm2 - fm3)
                / (6.0 * h.powi(4)),
        ]
    }

    fn assert_close(a: [f64; LEN], b: [f64; LEN], tol: f64) {
        for k in 0..LEN {
            let scale = 1.0 + b[k].abs();
            assert!((a[k] - b[k]).abs() < tol * scale, "order {k}: {} vs {}", a[k], b[k]);
        }
    }

    const P: [f64; 4] = [0.3, -0.7, 0.25, 0.4];
    const Q: [f64; 4] = [1.4, 0.2, -0.3, 0.1];
    const T0: f64 = 0.6;

    fn eval(c: &[f64], t: f64) -> f64 {
        signal(c, t)[0]
    }

    #[test]
    fn products_and_quotients() {
        let (p, q) = (jet_at(&P, T0), jet_at(&Q, T0));
        assert_close(
            (p * q).derivatives(),
            fd_derivs(|t| eval(&P, t) * eval(&Q, t), T0),
            1e-5,
        );
        assert_close(
            (p / q).derivatives(),
            fd_derivs(|t| eval(&P, t) / eval(&Q, t), T0),
            1e-5,
        );
    }

    #[test]
    fn transcendental_functions() {
        let (p, q) = (jet_at(&P, T0), jet_at(&Q, T0));
        assert_close(p.sin().derivatives(), fd_derivs(|t| eval(&P, t).sin(), T0), 1e-5);
        assert_close(p.cos().derivatives(), fd_derivs(|t| eval(&P, t).cos(), T0), 1e-5);
        assert_close(p.tanh().derivatives(), fd_derivs(|t| eval(&P, t).tanh(), T0), 1e-5);
        assert_close(q.sqrt().derivatives(), fd_derivs(|t| eval(&Q, t).sqrt(), T0), 1e-5);
        assert_close(
            p.atan2(&q).derivatives(),
            fd_derivs(|t| eval(&P, t).atan2(eval(&Q, t)), T0),
            1e-5,
        );
        // second quadrant, negative abscissa
        let nq = -q;
        assert_close(
            p.atan2(&nq).derivatives(),
            fd_derivs(|t| eval(&P, t).atan2(-eval(&Q, t)), T0),
            1e-5,
        );
    }

    #[test]
    fn differentiate_shifts_orders() {
        let p = jet_at(&P, T0);
        let d = p.differentiate();
        for k in 0..ORDER {
            assert!((d.derivative(k) - p.derivative(k + 1)).abs() < 1e-12);
        }
    }
}
