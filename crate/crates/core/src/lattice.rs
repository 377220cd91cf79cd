//! Lattices in `K^m` (`K = Z_q[1/p]`) at finite precision, and semilinear maps.
//!
//! A lattice is stored as `p^{-scale}` times the column span of an integral
//! basis, together with a precision `prec`: the stored object is exactly
//! `p^{-scale} (span(basis) + p^prec Z_q^m)`. Bases are kept in a canonical
//! column Hermite form with primitive content, so equal lattices at equal
//! precision have identical representations.

use crate::error::{Error, Result};
use crate::matrix::{self, eliminate, Mat};
use crate::witt::{WittContext, Zq};

#[derive(Clone, Debug)]
pub struct Lattice {
    ambient: usize,
    basis: Mat,
    scale: i32,
    prec: u32,
}

/// The map `x -> p^{-denom} · mat · σ^twist(x)`, with `mat` known modulo `p^prec`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemilinearMap {
    pub mat: Mat,
    pub twist: i64,
    pub denom: i32,
    pub prec: u32,
}

/// Hermite basis of `span(cols) + p^t Z_q^m`, columns ordered by pivot row.
///
/// The columns are first compressed to a minimal generating set, so residues
/// left by non-unit pivots cannot surface as extra generators.
fn hermite(ctx: &WittContext, cols: &Mat, t: u32) -> Mat {
    let m = cols.rows;
    let el = eliminate(ctx, cols, t, true, None);
    let q = el.q.expect("column transform");
    let gens = cols.mul(ctx, &q);
    let mut work: Vec<Vec<Zq>> = (0..el.rank).map(|j| reduce_vec(ctx, &gens.col(j), t)).collect();
    let mut active: Vec<usize> = (0..work.len()).collect();
    let mut pivots: Vec<(usize, usize, u32)> = Vec::new(); // (row, column index, valuation)
    for i in 0..m {
        let mut best: Option<(u32, usize)> = None;
        for (pos, &j) in active.iter().enumerate() {
            let v = ctx.valuation(work[j][i]);
            if v < t && best.map_or(true, |(bv, _)| v < bv) {
                best = Some((v, pos));
                if v == 0 {
                    break;
                }
            }
        }
        let Some((v, pos)) = best else { continue };
        let j = active[pos];
        let unit = ctx.div_p_pow(work[j][i], v);
        let uinv = ctx.inv(unit).expect("unit part");
        for x in work[j].iter_mut() {
            *x = ctx.reduce_mod_p_pow(ctx.mul(*x, uinv), t);
        }
        work[j][i] = ctx.p_pow(v);
        active.remove(pos);
        let pivot_col = work[j].clone();
        for &k in &active {
            let a = work[k][i];
            if a.is_zero() {
                continue;
            }
            let c = ctx.div_p_pow(a, v);
            for r in 0..m {
                if !pivot_col[r].is_zero() {
                    work[k][r] = ctx.reduce_mod_p_pow(ctx.sub(work[k][r], ctx.mul(c, pivot_col[r])), t);
                }
            }
            work[k][i] = ctx.zero();
        }
        pivots.push((i, j, v));
    }
    // Reduce entries in each pivot row modulo the pivot, top to bottom.
    for idx in 0..pivots.len() {
        let (row, j, v) = pivots[idx];
        let pivot_col = work[j].clone();
        for &(_, k, _) in &pivots[..idx] {
            let a = work[k][row];
            let q = ctx.quot_p_pow(a, v);
            if q.is_zero() {
                continue;
            }
            for r in row..m {
                if !pivot_col[r].is_zero() {
                    work[k][r] = ctx.reduce_mod_p_pow(ctx.sub(work[k][r], ctx.mul(q, pivot_col[r])), t);
                }
            }
        }
    }
    let out: Vec<Vec<Zq>> = pivots.iter().map(|&(_, j, _)| work[j].clone()).collect();
    Mat::from_cols(m, &out)
}

/// Whether every column of `a` lies in `span(b) + p^t Z_q^m`.
fn spans_mod(ctx: &WittContext, b: &Mat, a: &Mat, t: u32) -> bool {
    let el = eliminate(ctx, b, t, false, Some(a));
    let py = el.companion.expect("companion");
    (0..a.cols).all(|c| {
        (0..a.rows).all(|i| {
            let v = ctx.valuation(ctx.reduce_mod_p_pow(py[(i, c)], t));
            v >= t || (i < el.rank && v >= el.divisors[i])
        })
    })
}

/// Equality of `span(a) + p^t` and `span(b) + p^t`.
fn same_span(ctx: &WittContext, a: &Mat, b: &Mat, t: u32) -> bool {
    spans_mod(ctx, b, a, t) && spans_mod(ctx, a, b, t)
}

fn reduce_vec(ctx: &WittContext, v: &[Zq], t: u32) -> Vec<Zq> {
    v.iter().map(|&x| ctx.reduce_mod_p_pow(x, t)).collect()
}

impl Lattice {
    /// Builds `p^{-scale} span(basis)` known modulo `p^{prec - scale}`.
    pub fn new(ctx: &WittContext, basis: Mat, scale: i32, prec: u32) -> Result<Lattice> {
        let n = ctx.precision();
        if prec + ctx.loss_budget() < n {
            return Err(Error::precision(
                "lattice",
                format!("precision {prec} of {n} left, budget {}", ctx.loss_budget()),
            ));
        }
        let ambient = basis.rows;
        let mut b = hermite(ctx, &basis, prec);
        let mut scale = scale;
        let mut prec = prec;
        if b.cols > 0 {
            let content = b.valuation(ctx);
            if content > 0 {
                b = b.div_p_pow(ctx, content);
                scale -= content as i32;
                prec -= content;
            }
            if b.cols == ambient && prec < n {
                let el = eliminate(ctx, &b, prec, false, None);
                if el.rank == ambient {
                    // All elementary divisors are resolved, so the lattice is exact.
                    prec = n;
                }
            }
        } else {
            scale = 0;
        }
        if prec + ctx.loss_budget() < n {
            return Err(Error::precision(
                "lattice",
                format!("precision {prec} of {n} left, budget {}", ctx.loss_budget()),
            ));
        }
        Ok(Lattice { ambient, basis: b, scale, prec })
    }

    /// Lattice spanned exactly by the given integral columns.
    pub fn from_basis(ctx: &WittContext, basis: Mat) -> Result<Lattice> {
        Lattice::new(ctx, basis, 0, ctx.precision())
    }

    pub fn full(ctx: &WittContext, m: usize) -> Lattice {
        Lattice { ambient: m, basis: Mat::identity(ctx, m), scale: 0, prec: ctx.precision() }
    }

    pub fn zero(ctx: &WittContext, m: usize) -> Lattice {
        Lattice { ambient: m, basis: Mat::zeros(m, 0), scale: 0, prec: ctx.precision() }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }
    pub fn rank(&self) -> usize {
        self.basis.cols
    }
    pub fn basis(&self) -> &Mat {
        &self.basis
    }
    pub fn scale(&self) -> i32 {
        self.scale
    }
    pub fn prec(&self) -> u32 {
        self.prec
    }
    pub fn loss(&self, ctx: &WittContext) -> u32 {
        ctx.precision() - self.prec
    }
    pub fn is_zero(&self) -> bool {
        self.basis.cols == 0
    }
    pub fn is_integral(&self) -> bool {
        self.scale <= 0
    }

    /// Basis vectors as elements of `K^m`: returned as an integral matrix and
    /// the power of p that divides it.
    pub fn generators(&self) -> (Mat, i32) {
        (self.basis.clone(), self.scale)
    }

    /// Basis at a chosen scale `e >= self.scale`, with the matching precision.
    pub fn basis_at_scale(&self, ctx: &WittContext, e: i32) -> (Mat, u32) {
        debug_assert!(e >= self.scale);
        let k = (e - self.scale) as u32;
        (self.basis.mul_p_pow(ctx, k), (self.prec + k).min(ctx.precision()))
    }

    /// Integral basis when the lattice lies inside `Z_q^m`.
    pub fn integral_basis(&self, ctx: &WittContext) -> Result<Mat> {
        if self.scale > 0 {
            return Err(Error::InclusionViolated("lattice is not integral".into()));
        }
        Ok(self.basis_at_scale(ctx, 0).0)
    }

    /// `p^k L`.
    pub fn scaled(&self, k: i32) -> Lattice {
        let mut l = self.clone();
        if !l.is_zero() {
            l.scale -= k;
        }
        l
    }

    /// Replaces the precision by a smaller value (never raises it).
    pub fn with_prec(&self, ctx: &WittContext, prec: u32) -> Result<Lattice> {
        if prec >= self.prec {
            return Ok(self.clone());
        }
        Lattice::new(ctx, self.basis.clone(), self.scale, prec)
    }

    fn common_scale(a: &Lattice, b: &Lattice) -> i32 {
        match (a.is_zero(), b.is_zero()) {
            (true, true) => 0,
            (true, false) => b.scale,
            (false, true) => a.scale,
            _ => a.scale.max(b.scale),
        }
    }

    pub fn sum(&self, ctx: &WittContext, other: &Lattice) -> Result<Lattice> {
        shape(self.ambient, other.ambient)?;
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        let e = Lattice::common_scale(self, other);
        let (a, ta) = self.basis_at_scale(ctx, e);
        let (b, tb) = other.basis_at_scale(ctx, e);
        Lattice::new(ctx, a.hcat(&b), e, ta.min(tb))
    }

    pub fn sum_all(ctx: &WittContext, m: usize, ls: &[Lattice]) -> Result<Lattice> {
        let nonzero: Vec<&Lattice> = ls.iter().filter(|l| !l.is_zero()).collect();
        if nonzero.is_empty() {
            return Ok(Lattice::zero(ctx, m));
        }
        let e = nonzero.iter().map(|l| l.scale).max().unwrap();
        let mut t = ctx.precision();
        let mut cols = Mat::zeros(m, 0);
        for l in nonzero {
            shape(m, l.ambient)?;
            let (b, tb) = l.basis_at_scale(ctx, e);
            t = t.min(tb);
            cols = cols.hcat(&b);
        }
        Lattice::new(ctx, cols, e, t)
    }

    pub fn intersect(&self, ctx: &WittContext, other: &Lattice) -> Result<Lattice> {
        shape(self.ambient, other.ambient)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Lattice::zero(ctx, self.ambient));
        }
        let e = Lattice::common_scale(self, other);
        let (a, ta) = self.basis_at_scale(ctx, e);
        let (b, tb) = other.basis_at_scale(ctx, e);
        let t = ta.min(tb);
        let k1 = a.cols;
        let stacked = a.hcat(&b.neg(ctx));
        let el = eliminate(ctx, &stacked, t, true, None);
        let vmax = el.divisors.iter().copied().max().unwrap_or(0);
        let q = el.q.unwrap();
        let ker = q.col_range(el.rank, stacked.cols);
        if ker.cols == 0 {
            return Ok(Lattice::zero(ctx, self.ambient));
        }
        // Express the result through the side with the smaller scale.
        let (low, coeffs) = if self.scale <= other.scale {
            (self, ker.row_range(0, k1))
        } else {
            (other, ker.row_range(k1, stacked.cols).neg(ctx))
        };
        let t_new = low.prec.min(t.saturating_sub(vmax));
        let basis = low.basis.mul(ctx, &coeffs);
        Lattice::new(ctx, basis, low.scale, t_new)
    }

    /// `L[1/p] ∩ ambient`.
    pub fn saturate(&self, ctx: &WittContext, ambient: &Lattice) -> Result<Lattice> {
        shape(self.ambient, ambient.ambient)?;
        if self.is_zero() || ambient.is_zero() {
            return Ok(Lattice::zero(ctx, self.ambient));
        }
        let s = matrix::elementary_divisors(ctx, &self.basis, self.prec)
            .last()
            .copied()
            .unwrap_or(0) as i32;
        let k = (ambient.scale + s - self.scale).max(0);
        self.scaled(-k).intersect(ctx, ambient)
    }

    /// Containment `self ⊆ other` at the common precision.
    pub fn is_sublattice_of(&self, ctx: &WittContext, other: &Lattice) -> Result<bool> {
        if self.is_zero() {
            return Ok(true);
        }
        let s = self.sum(ctx, other)?;
        Ok(s.equals(ctx, other))
    }

    /// Equality of canonical forms at the smaller of the two precisions.
    pub fn equals(&self, ctx: &WittContext, other: &Lattice) -> bool {
        if self.ambient != other.ambient {
            return false;
        }
        if self.is_zero() || other.is_zero() {
            return self.is_zero() && other.is_zero();
        }
        let e = self.scale.max(other.scale);
        let (a, ta) = self.basis_at_scale(ctx, e);
        let (b, tb) = other.basis_at_scale(ctx, e);
        same_span(ctx, &a, &b, ta.min(tb))
    }

    /// Same as [`equals`](Self::equals) but only modulo `p^k` at the common scale.
    pub fn equals_mod(&self, ctx: &WittContext, other: &Lattice, k: u32) -> bool {
        if self.ambient != other.ambient {
            return false;
        }
        if self.is_zero() || other.is_zero() {
            return self.is_zero() && other.is_zero();
        }
        let e = self.scale.max(other.scale);
        let (a, ta) = self.basis_at_scale(ctx, e);
        let (b, tb) = other.basis_at_scale(ctx, e);
        same_span(ctx, &a, &b, ta.min(tb).min(k))
    }

    pub fn apply(&self, ctx: &WittContext, f: &SemilinearMap) -> Result<Lattice> {
        shape(f.mat.cols, self.ambient)?;
        if self.is_zero() {
            return Ok(Lattice::zero(ctx, f.mat.rows));
        }
        let img = f.mat.mul(ctx, &self.basis.frobenius(ctx, f.twist));
        Lattice::new(ctx, img, self.scale + f.denom, self.prec.min(f.prec))
    }

    /// `{x : f(x) ∈ L}` for maps injective after inverting p.
    pub fn preimage(&self, ctx: &WittContext, f: &SemilinearMap) -> Result<Lattice> {
        shape(f.mat.rows, self.ambient)?;
        let inv = f.inverse(ctx)?;
        self.apply(ctx, &inv)
    }

    /// Coordinates of `self ⊆ frame[1/p]` with respect to the frame basis, as a
    /// lattice in `K^{rank(frame)}`.
    pub fn coords_in(&self, ctx: &WittContext, frame: &Lattice) -> Result<Lattice> {
        shape(self.ambient, frame.ambient)?;
        let k = frame.rank();
        if self.is_zero() {
            return Ok(Lattice::zero(ctx, k));
        }
        let t = self.prec.min(frame.prec);
        let (c, j) = coords_matrix(ctx, &frame.basis, &self.basis, t)?;
        // self = p^{-e_L} S_F (C / p^j) = p^{-e_F} S_F (p^{e_F - e_L - j} C)
        let prec = t.saturating_sub(j);
        Lattice::new(ctx, c, self.scale + j as i32 - frame.scale, prec)
    }

    /// Inverse of [`coords_in`](Self::coords_in).
    pub fn from_coords(&self, ctx: &WittContext, frame: &Lattice) -> Result<Lattice> {
        shape(self.ambient, frame.rank())?;
        if self.is_zero() {
            return Ok(Lattice::zero(ctx, frame.ambient));
        }
        let b = frame.basis.mul(ctx, &self.basis);
        Lattice::new(ctx, b, self.scale + frame.scale, self.prec.min(frame.prec))
    }

    /// `dim_k (sup / (sub + p sup))`.
    pub fn mod_p_dimension(ctx: &WittContext, sub: &Lattice, sup: &Lattice) -> Result<usize> {
        shape(sub.ambient, sup.ambient)?;
        if sup.is_zero() {
            return Ok(0);
        }
        if sub.is_zero() {
            return Ok(sup.rank());
        }
        let c = sub.coords_in(ctx, sup)?;
        if c.scale > 0 {
            return Err(Error::InclusionViolated("sublattice is not contained".into()));
        }
        let m = c.integral_basis(ctx)?;
        Ok(sup.rank() - matrix::rank_mod_p(ctx, &m))
    }

    /// Elementary divisor valuations of `sub` inside `sup` (requires equal rank).
    pub fn relative_divisors(ctx: &WittContext, sub: &Lattice, sup: &Lattice) -> Result<Vec<u32>> {
        let c = sub.coords_in(ctx, sup)?;
        if c.scale > 0 {
            return Err(Error::InclusionViolated("sublattice is not contained".into()));
        }
        let m = c.integral_basis(ctx)?;
        Ok(matrix::elementary_divisors(ctx, &m, c.prec))
    }
}

fn shape(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("ambient ranks {a} and {b} differ")));
    }
    Ok(())
}

/// Solves `S_F C = p^j S` with `j` the largest elementary divisor of `S_F`.
pub fn coords_matrix(ctx: &WittContext, frame: &Mat, s: &Mat, t: u32) -> Result<(Mat, u32)> {
    let el = eliminate(ctx, frame, t, true, Some(s));
    if el.rank < frame.cols {
        return Err(Error::precision("coords", "frame basis is degenerate"));
    }
    let j = el.divisors.iter().copied().max().unwrap_or(0);
    let q = el.q.unwrap();
    let py = el.companion.unwrap();
    for i in el.rank..frame.rows {
        for c in 0..s.cols {
            if ctx.valuation(ctx.reduce_mod_p_pow(py[(i, c)], t)) < t.saturating_sub(j) {
                return Err(Error::InclusionViolated(format!(
                    "column {c} does not lie in the frame span"
                )));
            }
        }
    }
    let mut z = Mat::zeros(frame.cols, s.cols);
    for (i, &v) in el.divisors.iter().enumerate() {
        for c in 0..s.cols {
            z[(i, c)] = ctx.mul_p_pow(py[(i, c)], j - v);
        }
    }
    Ok((q.mul(ctx, &z), j))
}

impl SemilinearMap {
    pub fn new(ctx: &WittContext, mat: Mat, twist: i64, denom: i32) -> SemilinearMap {
        let twist = twist.rem_euclid(ctx.degree() as i64);
        SemilinearMap { mat, twist, denom, prec: ctx.precision() }
    }

    pub fn with_prec(mut self, prec: u32) -> SemilinearMap {
        self.prec = self.prec.min(prec);
        self
    }

    pub fn identity(ctx: &WittContext, m: usize) -> SemilinearMap {
        SemilinearMap::new(ctx, Mat::identity(ctx, m), 0, 0)
    }

    /// Multiplication by `p^k`.
    pub fn p_power(ctx: &WittContext, m: usize, k: i32) -> SemilinearMap {
        SemilinearMap::new(ctx, Mat::identity(ctx, m), 0, -k)
    }

    pub fn linear(ctx: &WittContext, mat: Mat) -> SemilinearMap {
        SemilinearMap::new(ctx, mat, 0, 0)
    }

    /// `f ∘ g`.
    pub fn compose(&self, ctx: &WittContext, g: &SemilinearMap) -> SemilinearMap {
        let m = self.mat.mul(ctx, &g.mat.frobenius(ctx, self.twist));
        SemilinearMap::new(ctx, m, self.twist + g.twist, self.denom + g.denom)
            .with_prec(self.prec.min(g.prec))
    }

    /// Multiplies the map by `p^k`.
    pub fn times_p_pow(&self, k: i32) -> SemilinearMap {
        let mut f = self.clone();
        f.denom -= k;
        f
    }

    /// Applies the map to integral columns; the result is `p^{-denom}` times the returned matrix.
    pub fn apply_mat(&self, ctx: &WittContext, x: &Mat) -> Mat {
        self.mat.mul(ctx, &x.frobenius(ctx, self.twist))
    }

    /// Inverse map. Its matrix is known to `a` fewer digits, where `p^a`
    /// is the largest elementary divisor of the matrix.
    pub fn inverse(&self, ctx: &WittContext) -> Result<SemilinearMap> {
        if !self.mat.is_square() {
            return Err(Error::Shape("only square maps are inverted".into()));
        }
        let (b, a) = matrix::scaled_inverse(ctx, &self.mat, self.prec)
            .map_err(|_| Error::SingularMap("determinant vanishes at working precision".into()))?;
        // f^{-1}(y) = σ^{-e}(p^{d} A^{-1} y) = p^{d - a} σ^{-e}(B) σ^{-e}(y)
        let e = -self.twist;
        Ok(SemilinearMap::new(ctx, b.frobenius(ctx, e), e, a as i32 - self.denom)
            .with_prec(self.prec.saturating_sub(a)))
    }

    /// Matrix of the map in the coordinates of a frame lattice, which must be
    /// carried into its own span after inverting p.
    pub fn restrict(&self, ctx: &WittContext, frame: &Lattice) -> Result<SemilinearMap> {
        let img = self.apply_mat(ctx, frame.basis());
        let t = frame.prec().min(self.prec);
        let (c, j) = coords_matrix(ctx, frame.basis(), &img, t)?;
        Ok(SemilinearMap::new(ctx, c, self.twist, self.denom + j as i32)
            .with_prec(t.saturating_sub(j)))
    }

    /// Approximate equality of maps modulo `p^k` after matching denominators.
    pub fn equals_mod(&self, ctx: &WittContext, other: &SemilinearMap, k: u32) -> bool {
        let n = ctx.degree() as i64;
        if self.twist.rem_euclid(n) != other.twist.rem_euclid(n) {
            return false;
        }
        let d = self.denom.max(other.denom);
        let a = self.mat.mul_p_pow(ctx, (d - self.denom) as u32);
        let b = other.mat.mul_p_pow(ctx, (d - other.denom) as u32);
        a.eq_mod(ctx, &b, k)
    }
}
