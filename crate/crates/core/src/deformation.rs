//! Deformation data over `S = Z_q[[x_1..x_n]]`: the universal element, the
//! connection form solving the horizontality equations, Kodaira–Spencer
//! images, point trivializations and correction factors.

use crate::error::{Error, Result};
use crate::hodge::{square_zero_witness, unvec, EndFrobenius, HodgeSplitting};
use crate::isocrystal::{FIsocrystal, Projector};
use crate::lattice::{coords_matrix, Lattice, SemilinearMap};
use crate::matrix::{self, Mat};
use crate::series::{check_point, MatSeries, TruncatedSeries};
use crate::witt::{WittContext, Zq};

/// Default truncation degree `2(p-1)+1`.
pub fn default_degree(ctx: &WittContext) -> u32 {
    2 * (ctx.p() as u32 - 1) + 1
}

/// Coordinates of the columns `p^{-denom} y` in an integral basis, or `None`
/// when they are not integral.
fn integral_coords(ctx: &WittContext, basis: &Mat, y: &Mat, denom: i32, t: u32) -> Result<Option<Mat>> {
    let (c, j) = match coords_matrix(ctx, basis, y, t) {
        Ok(v) => v,
        Err(Error::InclusionViolated(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let shift = j as i32 + denom;
    let t2 = t.saturating_sub(j);
    let c = c.reduce_mod_p_pow(ctx, t2);
    if shift <= 0 {
        return Ok(Some(c.mul_p_pow(ctx, (-shift) as u32)));
    }
    if c.valuation(ctx) < shift as u32 {
        return Ok(None);
    }
    Ok(Some(c.div_p_pow(ctx, shift as u32)))
}

fn vec_matrix(xs: &[Mat], r: usize) -> Mat {
    let cols: Vec<Vec<Zq>> = xs.iter().map(|x| x.vec_cols()).collect();
    Mat::from_cols(r * r, &cols)
}

/// Dieudonné matrix with its denominator absorbed.
fn integral_phi(ctx: &WittContext, x: &FIsocrystal) -> Result<Mat> {
    let d = x.phi.denom;
    if d <= 0 {
        return Ok(x.phi.mat.mul_p_pow(ctx, (-d) as u32));
    }
    if x.phi.mat.valuation(ctx) < d as u32 {
        return Err(Error::HypothesisViolated("Frobenius is not integral".into()));
    }
    Ok(x.phi.mat.div_p_pow(ctx, d as u32))
}

/// Tuple `(v_1, ..., v_n)` whose images under ν are linearly independent.
#[derive(Clone, Debug)]
pub struct DeformationBasis {
    pub v: Vec<Mat>,
}

impl DeformationBasis {
    pub fn new(ctx: &WittContext, split: &HodgeSplitting, v: Vec<Mat>) -> Result<DeformationBasis> {
        let cols: Vec<Vec<Zq>> = v.iter().map(|x| split.nu(ctx, x)).collect();
        let rank = matrix::rank_mod_p(ctx, &Mat::from_cols(split.c * split.d, &cols));
        if rank != v.len() {
            return Err(Error::HypothesisViolated(format!(
                "ν-images of the {} basis elements span only dimension {rank}",
                v.len()
            )));
        }
        Ok(DeformationBasis { v })
    }

    /// Basis elements of `E` picked greedily until their ν-images span `ν(E)`.
    pub fn from_lattice(ctx: &WittContext, split: &HodgeSplitting, e: &Lattice) -> Result<DeformationBasis> {
        let r = split.c + split.d;
        let b = e.integral_basis(ctx)?;
        let mut chosen: Vec<Mat> = Vec::new();
        let mut cols: Vec<Vec<Zq>> = Vec::new();
        for j in 0..b.cols {
            let x = unvec(&b.col(j), r);
            let mut trial = cols.clone();
            trial.push(split.nu(ctx, &x));
            if matrix::rank_mod_p(ctx, &Mat::from_cols(split.c * split.d, &trial)) == trial.len() {
                cols = trial;
                chosen.push(x);
            }
        }
        Ok(DeformationBasis { v: chosen })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// `1 + Σ v_i x_i`.
pub fn universal_element(ctx: &WittContext, v: &[Mat], r: usize, dmax: u32) -> MatSeries {
    let n = v.len();
    let mut u = MatSeries::identity(ctx, r, n, dmax);
    for (i, vi) in v.iter().enumerate() {
        let mut e = vec![0; n];
        e[i] = 1;
        u = u.add(ctx, &MatSeries::constant(vi.clone(), n, dmax).shift(&e));
    }
    u
}

/// `Φ_N = u_univ (φ ⊗ Φ_S)` on `M ⊗ S`.
#[derive(Clone, Debug)]
pub struct FrobeniusSeries {
    pub u: MatSeries,
    pub phi: SemilinearMap,
}

impl FrobeniusSeries {
    pub fn new(ctx: &WittContext, x: &FIsocrystal, v: &[Mat], dmax: u32) -> FrobeniusSeries {
        FrobeniusSeries { u: universal_element(ctx, v, x.rank(), dmax), phi: x.phi.clone() }
    }

    /// Image of a column series; the result carries the factor `p^{-phi.denom}`.
    pub fn apply(&self, ctx: &WittContext, f: &MatSeries) -> MatSeries {
        self.u.mul(ctx, &f.frobenius_lift(ctx).lmul(ctx, &self.phi.mat))
    }
}

/// `ω = Σ_i Σ_l e_l ⊗ w_{l,i} dx_i` for a basis `e_l` of `E`.
#[derive(Clone, Debug)]
pub struct ConnectionForm {
    pub r: usize,
    pub vars: usize,
    pub dmax: u32,
    pub e_basis: Vec<Mat>,
    /// `w[l][i]`.
    pub w: Vec<Vec<TruncatedSeries>>,
    /// `pφ(e_l) = Σ_j a[j][l] e_j`.
    pub a: Mat,
    /// `v_i = Σ_j b[j][i] e_j`.
    pub b: Mat,
}

impl ConnectionForm {
    /// `Σ_l e_l w_{l,i}` as an `End(M)`-valued series.
    pub fn omega(&self, ctx: &WittContext, i: usize) -> MatSeries {
        let mut s = MatSeries::zero(self.r, self.r, self.vars, self.dmax);
        for (l, e) in self.e_basis.iter().enumerate() {
            s = s.add(ctx, &MatSeries::from_scalar(ctx, e, &self.w[l][i]));
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        self.w.iter().all(|row| row.iter().all(|s| s.is_zero()))
    }
}

/// Solves `b_i + w_i = O_i(w_i)` with `O_i(w)_j = Σ_l a_{jl} Φ_S(w_l) x_i^{p-1}`
/// by summing `O_i^k(-b_i)`; the sum is finite at the truncation degree.
pub fn solve_connection(
    ctx: &WittContext,
    fr: &EndFrobenius,
    e: &Lattice,
    basis: &DeformationBasis,
    dmax: u32,
) -> Result<ConnectionForm> {
    let r = fr.r;
    let n = basis.len();
    let nprec = ctx.precision();
    let eb = if e.is_zero() { Mat::zeros(r * r, 0) } else { e.integral_basis(ctx)? };
    let m = eb.cols;
    if let Some((i, j)) = square_zero_witness(ctx, e, r)? {
        return Err(Error::HypothesisViolated(format!(
            "E² != 0: basis elements {i} and {j} have nonzero product"
        )));
    }
    let e_basis: Vec<Mat> = (0..m).map(|j| unvec(&eb.col(j), r)).collect();
    let pphi = fr.p_phi();
    let a = if m == 0 {
        Mat::zeros(0, 0)
    } else {
        let img = pphi.apply_mat(ctx, &eb);
        integral_coords(ctx, &eb, &img, pphi.denom, e.prec().min(pphi.prec))?
            .ok_or_else(|| Error::HypothesisViolated("pφ(E) is not contained in E".into()))?
    };
    let b = if n == 0 {
        Mat::zeros(m, 0)
    } else if m == 0 {
        if basis.v.iter().any(|v| !v.is_zero()) {
            return Err(Error::HypothesisViolated("deformation basis is not contained in E = 0".into()));
        }
        Mat::zeros(0, n)
    } else {
        integral_coords(ctx, &eb, &vec_matrix(&basis.v, r), 0, e.prec())?
            .ok_or_else(|| Error::HypothesisViolated("deformation basis is not contained in E".into()))?
    };
    let p = ctx.p() as u32;
    let mut w = vec![vec![TruncatedSeries::zero(n, dmax); n]; m];
    for i in 0..n {
        let mut shift = vec![0; n];
        shift[i] = p - 1;
        let mut term: Vec<TruncatedSeries> =
            (0..m).map(|j| TruncatedSeries::constant(n, dmax, ctx.neg(b[(j, i)]))).collect();
        for _ in 0..=dmax + 1 {
            if term.iter().all(|s| s.is_zero()) {
                break;
            }
            for j in 0..m {
                w[j][i] = w[j][i].add(ctx, &term[j]);
            }
            let lifted: Vec<TruncatedSeries> = term.iter().map(|s| s.frobenius_lift(ctx)).collect();
            let xs = TruncatedSeries::monomial(n, dmax, shift.clone(), ctx.one());
            term = (0..m)
                .map(|j| {
                    let mut acc = TruncatedSeries::zero(n, dmax);
                    for (l, f) in lifted.iter().enumerate() {
                        if !a[(j, l)].is_zero() {
                            acc = acc.add(ctx, &f.scale(ctx, a[(j, l)]));
                        }
                    }
                    acc.mul(ctx, &xs)
                })
                .collect();
        }
        if term.iter().any(|s| !s.is_zero()) {
            return Err(Error::NonConvergence { op: "solve_connection", iterations: dmax as usize + 2 });
        }
    }
    let _ = nprec;
    Ok(ConnectionForm { r, vars: n, dmax, e_basis, w, a, b })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HorizontalityReport {
    /// Smallest p-adic valuation among residual coefficients, per generator.
    pub residual_valuations: Vec<u32>,
    pub verified_degree: u32,
    pub vanishes: bool,
}

/// Both sides of `∇ Φ_N(c) = (Φ_N ⊗ dΦ_S) ∇(c)` for `c` running over a basis
/// of `p^{-1}F¹ + M`, scaled by `p` to stay integral.
pub fn verify_horizontality(
    ctx: &WittContext,
    x: &FIsocrystal,
    form: &ConnectionForm,
    basis: &DeformationBasis,
    split: &HodgeSplitting,
) -> Result<HorizontalityReport> {
    let r = x.rank();
    let n = form.vars;
    let d = form.dmax;
    let a = integral_phi(ctx, x)?;
    let u = universal_element(ctx, &basis.v, r, d);
    let omegas: Vec<MatSeries> = (0..n).map(|i| form.omega(ctx, i)).collect();
    let p = ctx.p() as u32;
    let mut vals = Vec::new();
    for s in 0..r {
        let mut c = Mat::from_cols(r, &[split.change.col(s)]);
        if s >= split.d {
            c = c.mul_p_pow(ctx, 1);
        }
        let phic = a.mul(ctx, &c.frobenius(ctx, 1));
        let up = u.mul(ctx, &MatSeries::constant(phic, n, d));
        let cs = MatSeries::constant(c, n, d);
        let mut v = ctx.precision();
        for (i, om) in omegas.iter().enumerate() {
            let lhs = up.derivative(ctx, i).add(ctx, &om.mul(ctx, &up));
            let mut shift = vec![0; n];
            shift[i] = p - 1;
            let rhs = u
                .mul(ctx, &om.mul(ctx, &cs).frobenius_lift(ctx).lmul(ctx, &a))
                .shift(&shift)
                .mul_p_pow(ctx, 1);
            v = v.min(lhs.sub(ctx, &rhs).valuation(ctx));
        }
        vals.push(v);
    }
    let vanishes = vals.iter().all(|&v| v >= ctx.precision());
    Ok(HorizontalityReport { residual_valuations: vals, verified_degree: d, vanishes })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KodairaSpencer {
    pub dim: usize,
    pub nu_dim: usize,
    pub matches: bool,
}

/// Image of `∂/∂x_i ↦ ∇(∂/∂x_i) mod (p, I)` in the tangent space, compared with `ν(span B)`.
pub fn kodaira_spencer_image(
    ctx: &WittContext,
    form: &ConnectionForm,
    basis: &DeformationBasis,
    split: &HodgeSplitting,
) -> KodairaSpencer {
    let n = form.vars;
    let k = split.c * split.d;
    let ks: Vec<Vec<Zq>> =
        (0..n).map(|i| split.nu(ctx, &form.omega(ctx, i).coeff(&vec![0; n]))).collect();
    let nus: Vec<Vec<Zq>> = basis.v.iter().map(|v| split.nu(ctx, v)).collect();
    let dim = matrix::rank_mod_p(ctx, &Mat::from_cols(k, &ks));
    let nu_dim = matrix::rank_mod_p(ctx, &Mat::from_cols(k, &nus));
    let mut both = ks.clone();
    both.extend(nus);
    let joint = matrix::rank_mod_p(ctx, &Mat::from_cols(k, &both));
    KodairaSpencer { dim, nu_dim, matches: dim == nu_dim && joint == dim }
}

/// Connection matrices on `Ẽ = E ⊕ W t` in the basis `(e_1, ..., e_m, t)`:
/// `blocks[i][row][col]` is the `dx_i`-part.
#[derive(Clone, Debug)]
pub struct TildeConnection {
    pub blocks: Vec<Vec<Vec<TruncatedSeries>>>,
    pub e_part_zero: bool,
    pub t_part_in_e: bool,
}

pub fn induced_connection_tilde(ctx: &WittContext, form: &ConnectionForm, t: &Projector) -> Result<TildeConnection> {
    let r = form.r;
    let m = form.e_basis.len();
    let n = form.vars;
    for (l, el) in form.e_basis.iter().enumerate() {
        for (j, ej) in form.e_basis.iter().enumerate() {
            if !el.mul(ctx, ej).sub(ctx, &ej.mul(ctx, el)).is_zero() {
                return Err(Error::HypothesisViolated(format!("[e_{l}, e_{j}] != 0")));
            }
        }
    }
    let mut coords = Mat::zeros(m, m);
    if m > 0 {
        let eb = vec_matrix(&form.e_basis, r);
        let brs: Vec<Mat> =
            form.e_basis.iter().map(|el| el.mul(ctx, &t.mat).sub(ctx, &t.mat.mul(ctx, el))).collect();
        let prec = ctx.precision().saturating_sub(t.denom);
        coords = integral_coords(ctx, &eb, &vec_matrix(&brs, r), t.denom as i32, prec)?
            .ok_or_else(|| Error::HypothesisViolated("[E, t] is not contained in E".into()))?;
    }
    let zero = TruncatedSeries::zero(n, form.dmax);
    let mut blocks = Vec::new();
    for i in 0..n {
        let mut blk = vec![vec![zero.clone(); m + 1]; m + 1];
        for (j, row) in blk.iter_mut().enumerate().take(m) {
            let mut acc = zero.clone();
            for l in 0..m {
                if !coords[(j, l)].is_zero() {
                    acc = acc.add(ctx, &form.w[l][i].scale(ctx, coords[(j, l)]));
                }
            }
            row[m] = acc;
        }
        blocks.push(blk);
    }
    Ok(TildeConnection { blocks, e_part_zero: true, t_part_in_e: true })
}

#[derive(Clone, Debug)]
pub struct Trivialization {
    pub u_h: Mat,
    pub u_inf: Mat,
    pub steps: usize,
    pub loss: u32,
    /// `u_inf u_h φ(u_inf)^{-1} ≡ 1` modulo `p^{N - loss}`.
    pub certified: bool,
}

/// Least common multiple of slope denominators, bounding the convergence rate.
fn slope_lcm(x: &FIsocrystal, ctx: &WittContext) -> Result<usize> {
    let mut l: usize = 1;
    for (s, _) in x.newton_slopes(ctx)? {
        l = num_integer::lcm(l, *s.denom() as usize);
    }
    Ok(l)
}

/// Isomorphism from `(M, u_h φ)` to `(M, φ)` for `u_h = 1 + Σ [point_i] v_i`,
/// built as the limit of `(1 + φ^{-k}(n_h)) ··· (1 + φ^{-1}(n_h))`.
pub fn trivialize_at_point(
    ctx: &WittContext,
    x: &FIsocrystal,
    fr: &EndFrobenius,
    e: &Lattice,
    basis: &DeformationBasis,
    point: &[Zq],
) -> Result<Trivialization> {
    let r = x.rank();
    let nprec = ctx.precision();
    if point.len() != basis.len() {
        return Err(Error::Shape(format!("{} coordinates for {} basis elements", point.len(), basis.len())));
    }
    let id = Mat::identity(ctx, r);
    let teich: Vec<Zq> = point.iter().map(|&c| ctx.teichmuller(ctx.residue(c))).collect();
    let mut nh = Mat::zeros(r, r);
    for (v, &c) in basis.v.iter().zip(&teich) {
        nh = nh.add(ctx, &v.scale(ctx, c));
    }
    let u_h = id.add(ctx, &nh);
    if e.is_zero() || nh.is_zero() {
        return Ok(Trivialization { u_h, u_inf: id, steps: 0, loss: 0, certified: true });
    }
    let eb = e.integral_basis(ctx)?;
    let finv = fr.phi_inv.restrict(ctx, e)?;
    let (fmat, t) = if finv.denom <= 0 {
        (finv.mat.mul_p_pow(ctx, (-finv.denom) as u32), finv.prec)
    } else {
        let d = finv.denom as u32;
        let m = finv.mat.reduce_mod_p_pow(ctx, finv.prec);
        if m.valuation(ctx) < d {
            return Err(Error::HypothesisViolated("φ^{-1}(E) is not contained in E".into()));
        }
        (m.div_p_pow(ctx, d), finv.prec.saturating_sub(d))
    };
    let mut c = integral_coords(ctx, &eb, &Mat::from_cols(r * r, &[nh.vec_cols()]), 0, e.prec())?
        .ok_or_else(|| Error::HypothesisViolated("deformation basis is not contained in E".into()))?;
    let cap = (nprec as usize + 2 * r) * slope_lcm(x, ctx)?;
    let mut g = id.clone();
    let mut steps = 0;
    loop {
        if steps >= cap {
            return Err(Error::NonConvergence { op: "trivialize_at_point", iterations: cap });
        }
        c = fmat.mul(ctx, &c.frobenius(ctx, finv.twist)).reduce_mod_p_pow(ctx, t);
        steps += 1;
        if c.is_zero() {
            break;
        }
        let n = unvec(&eb.mul(ctx, &c).col(0), r);
        g = id.add(ctx, &n).mul(ctx, &g);
    }
    let ginv = matrix::inverse_unimodular(ctx, &g)?;
    let a = &x.phi.mat;
    let lhs = g.mul(ctx, &u_h).mul(ctx, a).mul(ctx, &ginv.frobenius(ctx, 1));
    let certified = lhs.eq_mod(ctx, a, t);
    Ok(Trivialization { u_h, u_inf: g, steps, loss: nprec - t, certified })
}

#[derive(Clone, Debug)]
pub struct CorrectionFactor {
    pub g: Mat,
    pub y: Vec<Zq>,
    /// `g` is correct modulo `p^prec`.
    pub prec: u32,
    pub terms: usize,
    pub unit_mod_p: bool,
    /// `g - 1 ∈ pE`.
    pub in_pe: bool,
}

fn floor_log(p: u64, j: u64) -> u32 {
    let mut k = 0;
    let mut q = p;
    while q <= j {
        k += 1;
        q *= p;
    }
    k
}

/// Multi-indices of total degree `1..jmax` in `n` variables.
fn multi_indices(n: usize, jmax: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == cur.len() {
            if cur.iter().sum::<u32>() > 0 {
                out.push(cur.clone());
            }
            return;
        }
        for k in 0..=left {
            cur[i] = k;
            rec(i + 1, left - k, cur, out);
        }
        cur[i] = 0;
    }
    if jmax > 0 {
        rec(0, jmax - 1, &mut cur, &mut out);
    }
    out
}

/// `g_z = Σ_J ∇(∂)^J (m ⊗ 1) y^J / J!` with `y_i = σ(z_i) - z_i^p`, evaluated at `x = z^p`.
///
/// With `E² = 0` the iterated connection collapses to `∇(∂)^J = ∂^{J - e_b} ω_b`,
/// `b` the innermost index, so each term is a divided derivative of `ω_b`
/// times `y^J / j_b`.
pub fn correction_factor(ctx: &WittContext, form: &ConnectionForm, z: &[Zq]) -> Result<CorrectionFactor> {
    let n = form.vars;
    let r = form.r;
    let nprec = ctx.precision();
    if z.len() != n {
        return Err(Error::Shape(format!("{} coordinates for {n} variables", z.len())));
    }
    let p = ctx.p();
    let y: Vec<Zq> = z.iter().map(|&zi| ctx.sub(ctx.frobenius(zi, 1), ctx.pow(zi, p as u128))).collect();
    let id = Mat::identity(ctx, r);
    if y.iter().all(|v| v.is_zero()) || form.is_zero() {
        return Ok(CorrectionFactor { g: id, y, prec: nprec, terms: 0, unit_mod_p: true, in_pe: true });
    }
    check_point(ctx, z)?;
    let vy = y.iter().filter(|v| !v.is_zero()).map(|&v| ctx.valuation(v)).min().unwrap();
    if vy == 0 {
        return Err(Error::NonTermination("σ(z) - z^p is a unit".into()));
    }
    // term valuation is at least f(j) = j·vy - log_p(j), increasing in j
    let f = |j: u32| (j * vy).saturating_sub(floor_log(p, j as u64));
    let mut jmax = 1;
    while f(jmax) < nprec {
        jmax += 1;
    }
    let x0: Vec<Zq> = z.iter().map(|&zi| ctx.pow(zi, p as u128)).collect();
    let vx = x0.iter().map(|&v| ctx.valuation(v)).min().unwrap();
    let d = form.dmax;
    let mut prec = nprec;
    for j in 1..jmax {
        // error from monomials above the truncation degree
        let extra = if j <= d + 1 { (d + 2 - j).saturating_mul(vx) } else { 0 };
        if vx >= nprec && j <= d + 1 {
            continue;
        }
        prec = prec.min(f(j).saturating_add(extra));
    }
    let omegas: Vec<MatSeries> = (0..n).map(|i| form.omega(ctx, i)).collect();
    let mut g = id.clone();
    let mut terms = 0;
    for jv in multi_indices(n, jmax) {
        if jv.iter().zip(&y).any(|(&k, v)| k > 0 && v.is_zero()) {
            continue;
        }
        let b = (0..n).rev().find(|&i| jv[i] > 0).unwrap();
        let mut k = jv.clone();
        k[b] -= 1;
        let val = omegas[b].hasse_derivative(ctx, &k).eval(ctx, &x0);
        if val.is_zero() {
            continue;
        }
        let mut yj = ctx.one();
        for (i, &ji) in jv.iter().enumerate() {
            yj = ctx.mul(yj, ctx.pow(y[i], ji as u128));
        }
        let jb = jv[b] as u64;
        let vb = ctx.valuation(ctx.from_u64(jb));
        let unit = ctx.inv(ctx.from_u64(jb / p.pow(vb))).expect("unit");
        let coef = ctx.mul(ctx.div_p_pow(yj, vb), unit);
        g = g.add(ctx, &val.scale(ctx, coef));
        terms += 1;
    }
    let g = g.reduce_mod_p_pow(ctx, prec);
    let diff = g.sub(ctx, &id);
    let unit_mod_p = diff.valuation(ctx) >= 1;
    let in_pe = if form.e_basis.is_empty() {
        diff.is_zero()
    } else {
        let eb = vec_matrix(&form.e_basis, r);
        integral_coords(ctx, &eb, &Mat::from_cols(r * r, &[diff.vec_cols()]), 1, prec)?.is_some()
    };
    Ok(CorrectionFactor { g, y, prec, terms, unit_mod_p, in_pe })
}
