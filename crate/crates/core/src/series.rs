//! Multivariate power series over `Z_q`, truncated at a total degree.
//!
//! Monomials above the truncation degree are dropped by every operation. The
//! Frobenius lift acts by `σ` on coefficients and `x_i ↦ x_i^p`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::witt::{WittContext, Zq};

pub type Monomial = Vec<u32>;

fn degree(m: &[u32]) -> u32 {
    m.iter().sum()
}

fn add_exp(a: &[u32], b: &[u32]) -> Monomial {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `C(k, j)` modulo `p^N` as an element of `Z_q`.
fn binomial(ctx: &WittContext, k: u32, j: u32) -> Zq {
    if j > k {
        return ctx.zero();
    }
    // exact in u128 for the degrees used here
    let mut c: u128 = 1;
    for i in 0..j as u128 {
        c = c * (k as u128 - i) / (i + 1);
    }
    ctx.from_u64((c % ctx.modulus() as u128) as u64)
}

fn eval_monomial(ctx: &WittContext, exp: &[u32], point: &[Zq]) -> Zq {
    let mut v = ctx.one();
    for (&e, &x) in exp.iter().zip(point) {
        if e > 0 {
            v = ctx.mul(v, ctx.pow(x, e as u128));
        }
    }
    v
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedSeries {
    vars: usize,
    dmax: u32,
    terms: BTreeMap<Monomial, Zq>,
}

impl TruncatedSeries {
    pub fn zero(vars: usize, dmax: u32) -> TruncatedSeries {
        TruncatedSeries { vars, dmax, terms: BTreeMap::new() }
    }

    pub fn constant(vars: usize, dmax: u32, c: Zq) -> TruncatedSeries {
        TruncatedSeries::monomial(vars, dmax, vec![0; vars], c)
    }

    pub fn monomial(vars: usize, dmax: u32, exp: Monomial, c: Zq) -> TruncatedSeries {
        let mut s = TruncatedSeries::zero(vars, dmax);
        s.add_term(exp, c, None);
        s
    }

    /// The variable `x_i`.
    pub fn var(ctx: &WittContext, vars: usize, dmax: u32, i: usize) -> TruncatedSeries {
        let mut e = vec![0; vars];
        e[i] = 1;
        TruncatedSeries::monomial(vars, dmax, e, ctx.one())
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn dmax(&self) -> u32 {
        self.dmax
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Zq)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exp: &[u32]) -> Zq {
        self.terms.get(exp).copied().unwrap_or(Zq::ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Lowest total degree of a nonzero term.
    pub fn order(&self) -> Option<u32> {
        self.terms.keys().map(|e| degree(e)).min()
    }

    fn add_term(&mut self, exp: Monomial, c: Zq, ctx: Option<&WittContext>) {
        if degree(&exp) > self.dmax || c.is_zero() {
            return;
        }
        match ctx {
            None => {
                self.terms.insert(exp, c);
            }
            Some(ctx) => {
                let e = self.terms.entry(exp.clone()).or_insert(Zq::ZERO);
                *e = ctx.add(*e, c);
                if e.is_zero() {
                    self.terms.remove(&exp);
                }
            }
        }
    }

    pub fn add(&self, ctx: &WittContext, o: &TruncatedSeries) -> TruncatedSeries {
        let mut s = self.clone();
        for (e, &c) in &o.terms {
            s.add_term(e.clone(), c, Some(ctx));
        }
        s
    }

    pub fn neg(&self, ctx: &WittContext) -> TruncatedSeries {
        let mut s = self.clone();
        for v in s.terms.values_mut() {
            *v = ctx.neg(*v);
        }
        s
    }

    pub fn sub(&self, ctx: &WittContext, o: &TruncatedSeries) -> TruncatedSeries {
        self.add(ctx, &o.neg(ctx))
    }

    pub fn scale(&self, ctx: &WittContext, c: Zq) -> TruncatedSeries {
        let mut s = TruncatedSeries::zero(self.vars, self.dmax);
        for (e, &v) in &self.terms {
            s.add_term(e.clone(), ctx.mul(v, c), None);
        }
        s
    }

    pub fn mul(&self, ctx: &WittContext, o: &TruncatedSeries) -> TruncatedSeries {
        let mut s = TruncatedSeries::zero(self.vars, self.dmax.min(o.dmax));
        for (a, &x) in &self.terms {
            for (b, &y) in &o.terms {
                if degree(a) + degree(b) <= s.dmax {
                    s.add_term(add_exp(a, b), ctx.mul(x, y), Some(ctx));
                }
            }
        }
        s
    }

    /// `Φ_S`: `σ` on coefficients and `x_i ↦ x_i^p`.
    pub fn frobenius_lift(&self, ctx: &WittContext) -> TruncatedSeries {
        let p = ctx.p() as u32;
        let mut s = TruncatedSeries::zero(self.vars, self.dmax);
        for (e, &v) in &self.terms {
            let e2: Monomial = e.iter().map(|&k| k * p).collect();
            s.add_term(e2, ctx.frobenius(v, 1), None);
        }
        s
    }

    pub fn derivative(&self, ctx: &WittContext, i: usize) -> TruncatedSeries {
        let mut s = TruncatedSeries::zero(self.vars, self.dmax);
        for (e, &v) in &self.terms {
            if e[i] > 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                s.add_term(e2, ctx.scale_int(v, e[i] as i64), None);
            }
        }
        s
    }

    /// Divided derivative `Σ c_e Π C(e_i, k_i) x^{e-k}`.
    pub fn hasse_derivative(&self, ctx: &WittContext, k: &[u32]) -> TruncatedSeries {
        let mut s = TruncatedSeries::zero(self.vars, self.dmax);
        for (e, &v) in &self.terms {
            if e.iter().zip(k).any(|(a, b)| a < b) {
                continue;
            }
            let mut c = v;
            for (&a, &b) in e.iter().zip(k) {
                c = ctx.mul(c, binomial(ctx, a, b));
            }
            let e2: Monomial = e.iter().zip(k).map(|(a, b)| a - b).collect();
            s.add_term(e2, c, Some(ctx));
        }
        s
    }

    /// Value at a point of `(pZ_q)^n` (or any point when the series is a polynomial).
    pub fn eval(&self, ctx: &WittContext, point: &[Zq]) -> Zq {
        let mut v = ctx.zero();
        for (e, &c) in &self.terms {
            v = ctx.add(v, ctx.mul(c, eval_monomial(ctx, e, point)));
        }
        v
    }

    /// Smallest coefficient valuation (`N` for the zero series).
    pub fn valuation(&self, ctx: &WittContext) -> u32 {
        self.terms.values().map(|&c| ctx.valuation(c)).min().unwrap_or(ctx.precision())
    }
}

/// Power series with matrix coefficients; all coefficients share one shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatSeries {
    pub rows: usize,
    pub cols: usize,
    vars: usize,
    dmax: u32,
    terms: BTreeMap<Monomial, Mat>,
}

impl MatSeries {
    pub fn zero(rows: usize, cols: usize, vars: usize, dmax: u32) -> MatSeries {
        MatSeries { rows, cols, vars, dmax, terms: BTreeMap::new() }
    }

    pub fn constant(m: Mat, vars: usize, dmax: u32) -> MatSeries {
        let mut s = MatSeries::zero(m.rows, m.cols, vars, dmax);
        s.add_term(vec![0; vars], m, None);
        s
    }

    pub fn identity(ctx: &WittContext, r: usize, vars: usize, dmax: u32) -> MatSeries {
        MatSeries::constant(Mat::identity(ctx, r), vars, dmax)
    }

    /// `m · f` for a scalar series `f`.
    pub fn from_scalar(ctx: &WittContext, m: &Mat, f: &TruncatedSeries) -> MatSeries {
        let mut s = MatSeries::zero(m.rows, m.cols, f.vars, f.dmax);
        for (e, &c) in &f.terms {
            s.add_term(e.clone(), m.scale(ctx, c), Some(ctx));
        }
        s
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn dmax(&self) -> u32 {
        self.dmax
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Mat)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exp: &[u32]) -> Mat {
        self.terms.get(exp).cloned().unwrap_or_else(|| Mat::zeros(self.rows, self.cols))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, exp: Monomial, m: Mat, ctx: Option<&WittContext>) {
        if degree(&exp) > self.dmax || m.is_zero() {
            return;
        }
        match ctx {
            None => {
                self.terms.insert(exp, m);
            }
            Some(ctx) => {
                let z = Mat::zeros(self.rows, self.cols);
                let e = self.terms.entry(exp.clone()).or_insert(z);
                *e = e.add(ctx, &m);
                if e.is_zero() {
                    self.terms.remove(&exp);
                }
            }
        }
    }

    pub fn add(&self, ctx: &WittContext, o: &MatSeries) -> MatSeries {
        let mut s = self.clone();
        for (e, m) in &o.terms {
            s.add_term(e.clone(), m.clone(), Some(ctx));
        }
        s
    }

    pub fn transpose(&self) -> MatSeries {
        let mut s = MatSeries::zero(self.cols, self.rows, self.vars, self.dmax);
        for (e, m) in &self.terms {
            s.terms.insert(e.clone(), m.transpose());
        }
        s
    }

    pub fn sub(&self, ctx: &WittContext, o: &MatSeries) -> MatSeries {
        let mut s = self.clone();
        for (e, m) in &o.terms {
            s.add_term(e.clone(), m.neg(ctx), Some(ctx));
        }
        s
    }

    pub fn mul(&self, ctx: &WittContext, o: &MatSeries) -> MatSeries {
        let mut s = MatSeries::zero(self.rows, o.cols, self.vars, self.dmax.min(o.dmax));
        for (a, x) in &self.terms {
            for (b, y) in &o.terms {
                if degree(a) + degree(b) <= s.dmax {
                    s.add_term(add_exp(a, b), x.mul(ctx, y), Some(ctx));
                }
            }
        }
        s
    }

    /// Left multiplication by a constant matrix.
    pub fn lmul(&self, ctx: &WittContext, m: &Mat) -> MatSeries {
        let mut s = MatSeries::zero(m.rows, self.cols, self.vars, self.dmax);
        for (e, x) in &self.terms {
            s.add_term(e.clone(), m.mul(ctx, x), None);
        }
        s
    }

    pub fn mul_p_pow(&self, ctx: &WittContext, k: u32) -> MatSeries {
        let mut s = MatSeries::zero(self.rows, self.cols, self.vars, self.dmax);
        for (e, x) in &self.terms {
            s.add_term(e.clone(), x.mul_p_pow(ctx, k), None);
        }
        s
    }

    /// Multiplication by the monomial `x^exp`.
    pub fn shift(&self, exp: &[u32]) -> MatSeries {
        let mut s = MatSeries::zero(self.rows, self.cols, self.vars, self.dmax);
        for (e, x) in &self.terms {
            s.add_term(add_exp(e, exp), x.clone(), None);
        }
        s
    }

    pub fn frobenius_lift(&self, ctx: &WittContext) -> MatSeries {
        let p = ctx.p() as u32;
        let mut s = MatSeries::zero(self.rows, self.cols, self.vars, self.dmax);
        for (e, x) in &self.terms {
            let e2: Monomial = e.iter().map(|&k| k * p).collect();
            s.add_term(e2, x.frobenius(ctx, 1), None);
        }
        s
    }

    pub fn derivative(&self, ctx: &WittContext, i: usize) -> MatSeries {
        let mut s = MatSeries::zero(self.rows, self.cols, self.vars, self.dmax);
        for (e, x) in &self.terms {
            if e[i] > 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                s.add_term(e2, x.scale(ctx, ctx.from_u64(e[i] as u64)), None);
            }
        }
        s
    }

    pub fn hasse_derivative(&self, ctx: &WittContext, k: &[u32]) -> MatSeries {
        let mut s = MatSeries::zero(self.rows, self.cols, self.vars, self.dmax);
        for (e, x) in &self.terms {
            if e.iter().zip(k).any(|(a, b)| a < b) {
                continue;
            }
            let mut c = ctx.one();
            for (&a, &b) in e.iter().zip(k) {
                c = ctx.mul(c, binomial(ctx, a, b));
            }
            let e2: Monomial = e.iter().zip(k).map(|(a, b)| a - b).collect();
            s.add_term(e2, x.scale(ctx, c), Some(ctx));
        }
        s
    }

    pub fn eval(&self, ctx: &WittContext, point: &[Zq]) -> Mat {
        let mut v = Mat::zeros(self.rows, self.cols);
        for (e, x) in &self.terms {
            v = v.add(ctx, &x.scale(ctx, eval_monomial(ctx, e, point)));
        }
        v
    }

    pub fn entry(&self, i: usize, j: usize) -> TruncatedSeries {
        let mut s = TruncatedSeries::zero(self.vars, self.dmax);
        for (e, x) in &self.terms {
            s.add_term(e.clone(), x[(i, j)], None);
        }
        s
    }

    /// Smallest valuation over all coefficients.
    pub fn valuation(&self, ctx: &WittContext) -> u32 {
        self.terms.values().map(|m| m.valuation(ctx)).min().unwrap_or(ctx.precision())
    }

    /// Truncation to a smaller degree.
    pub fn truncate(&self, d: u32) -> MatSeries {
        let mut s = self.clone();
        s.dmax = d.min(self.dmax);
        s.terms.retain(|e, _| degree(e) <= d);
        s
    }
}

/// Evaluation requires the point to lie in `(pZ_q)^n` unless the series is a polynomial.
pub fn check_point(ctx: &WittContext, point: &[Zq]) -> Result<()> {
    if point.iter().any(|&x| !x.is_zero() && ctx.valuation(x) == 0) {
        return Err(Error::NonTermination("evaluation point has a unit coordinate".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_truncate() {
        let ctx = WittContext::new(2, 1, 10).unwrap();
        let x = TruncatedSeries::var(&ctx, 1, 3, 0);
        let one = TruncatedSeries::constant(1, 3, ctx.one());
        let s = one.add(&ctx, &x);
        let s4 = s.mul(&ctx, &s).mul(&ctx, &s).mul(&ctx, &s);
        // (1+x)^4 = 1 + 4x + 6x² + 4x³ + x⁴, cut at degree 3
        assert_eq!(s4.coeff(&[2]), ctx.from_u64(6));
        assert_eq!(s4.coeff(&[4]), ctx.zero());
        let f = s.frobenius_lift(&ctx);
        assert_eq!(f.coeff(&[2]), ctx.one());
        assert_eq!(s4.derivative(&ctx, 0).coeff(&[1]), ctx.from_u64(12));
        assert_eq!(s4.hasse_derivative(&ctx, &[2]).coeff(&[1]), ctx.from_u64(12));
    }
}
