//! Hodge splittings, the tangent map ν, Dieudonné sublattices of End(M),
//! axiom checks and Lie elements.

use crate::error::{Error, Result};
use crate::isocrystal::{end_phi, end_phi_inverse, EndDecomposition, FIsocrystal, Projector, SlopeData};
use crate::lattice::{Lattice, SemilinearMap};
use crate::matrix::{self, Mat};
use crate::witt::{WittContext, Zq};

/// `M = F¹ ⊕ F⁰` given by a unimodular change of basis `C = [F¹ | F⁰]`.
#[derive(Clone, Debug)]
pub struct HodgeSplitting {
    pub d: usize,
    pub c: usize,
    pub change: Mat,
    pub change_inv: Mat,
}

/// Frobenius data on `End(M)`, computed once per module.
#[derive(Clone, Debug)]
pub struct EndFrobenius {
    pub r: usize,
    pub phi: SemilinearMap,
    pub phi_inv: SemilinearMap,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxiomResult {
    pub pass: bool,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxiomReport {
    pub axiom_i: AxiomResult,
    pub axiom_ii: AxiomResult,
    pub axiom_iii: Option<AxiomResult>,
    pub axiom_iv: Option<AxiomResult>,
    pub rank_f0: Option<usize>,
    pub rank_fm1: Option<usize>,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.axiom_i.pass
            && self.axiom_ii.pass
            && self.axiom_iii.as_ref().map_or(true, |a| a.pass)
            && self.axiom_iv.as_ref().map_or(true, |a| a.pass)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StableMode {
    /// Largest sublattice stable under `φ^{-1}` and `pφ`.
    Minus,
    /// Largest sublattice stable under `φ` and `pφ^{-1}`.
    Plus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuperMode {
    /// Smallest superlattice stable under `φ` and `pφ^{-1}`.
    Phi,
    /// Smallest superlattice stable under `pφ` and `φ^{-1}`.
    PPhi,
}

pub fn unvec(v: &[Zq], r: usize) -> Mat {
    Mat::unvec_cols(v, r, r)
}

/// Basis columns of a lattice in `End(M)` as `r × r` matrices (at scale 0).
pub fn basis_endos(ctx: &WittContext, l: &Lattice, r: usize) -> Result<Vec<Mat>> {
    let b = l.integral_basis(ctx)?;
    Ok((0..b.cols).map(|j| unvec(&b.col(j), r)).collect())
}

pub fn endos_to_lattice(ctx: &WittContext, xs: &[Mat], r: usize, prec: u32) -> Result<Lattice> {
    let cols: Vec<Vec<Zq>> = xs.iter().map(|x| x.vec_cols()).collect();
    Lattice::new(ctx, Mat::from_cols(r * r, &cols), 0, prec)
}

impl EndFrobenius {
    pub fn new(ctx: &WittContext, x: &FIsocrystal) -> Result<EndFrobenius> {
        Ok(EndFrobenius { r: x.rank(), phi: end_phi(ctx, &x.phi)?, phi_inv: end_phi_inverse(ctx, &x.phi)? })
    }

    pub fn end_lattice(&self, ctx: &WittContext) -> Lattice {
        Lattice::full(ctx, self.r * self.r)
    }

    pub fn p_phi(&self) -> SemilinearMap {
        self.phi.times_p_pow(1)
    }

    pub fn p_phi_inv(&self) -> SemilinearMap {
        self.phi_inv.times_p_pow(1)
    }

    /// `φ(x)` as `(mat, denom)`.
    pub fn apply_elem(&self, ctx: &WittContext, x: &Mat, denom: i32) -> (Mat, i32) {
        let v = Mat::from_cols(self.r * self.r, &[x.vec_cols()]);
        let y = self.phi.apply_mat(ctx, &v);
        (unvec(&y.col(0), self.r), denom + self.phi.denom)
    }
}

impl HodgeSplitting {
    /// Splitting with `F¹` a lift of `ker(φ mod p)` and `F⁰` a complementary lift.
    pub fn default_for(ctx: &WittContext, x: &FIsocrystal) -> Result<HodgeSplitting> {
        let r = x.rank();
        let a = normalized_phi_matrix(ctx, x)?;
        let el = matrix::eliminate(ctx, &a, 1, true, None);
        let q = el.q.unwrap();
        // ker(A σ(·)) mod p = σ^{-1}(ker A mod p); kernel columns of Q come last.
        let rank = el.rank;
        let mut order: Vec<usize> = (rank..r).collect();
        order.extend(0..rank);
        let change = q.select_cols(&order).frobenius(ctx, -1);
        HodgeSplitting::from_change(ctx, x, change, r - rank)
    }

    /// Splitting from explicit `F¹` columns followed by `F⁰` columns.
    pub fn from_columns(ctx: &WittContext, x: &FIsocrystal, f1: &Mat, f0: &Mat) -> Result<HodgeSplitting> {
        HodgeSplitting::from_change(ctx, x, f1.hcat(f0), f1.cols)
    }

    fn from_change(ctx: &WittContext, x: &FIsocrystal, change: Mat, d: usize) -> Result<HodgeSplitting> {
        let r = x.rank();
        if change.rows != r || change.cols != r {
            return Err(Error::SplittingInvalid(format!("expected {r} columns, got {}", change.cols)));
        }
        let change_inv = matrix::inverse_unimodular(ctx, &change)
            .map_err(|_| Error::SplittingInvalid("F¹ + F⁰ is not all of M".into()))?;
        let a = normalized_phi_matrix(ctx, x)?;
        let f1 = change.col_range(0, d);
        let img = a.mul(ctx, &f1.frobenius(ctx, 1));
        if img.valuation(ctx) < 1 {
            return Err(Error::SplittingInvalid("F¹ is not killed by φ mod p".into()));
        }
        let kernel_dim = r - matrix::rank_mod_p(ctx, &a);
        if kernel_dim != d {
            return Err(Error::SplittingInvalid(format!("F¹ has rank {d}, ker φ̄ has dimension {kernel_dim}")));
        }
        Ok(HodgeSplitting { d, c: r - d, change, change_inv })
    }

    pub fn f1(&self) -> Mat {
        self.change.col_range(0, self.d)
    }

    pub fn f0(&self) -> Mat {
        self.change.col_range(self.d, self.d + self.c)
    }

    /// `C^{-1} x C`: the endomorphism in the adapted basis.
    pub fn to_adapted(&self, ctx: &WittContext, x: &Mat) -> Mat {
        self.change_inv.mul(ctx, x).mul(ctx, &self.change)
    }

    pub fn from_adapted(&self, ctx: &WittContext, y: &Mat) -> Mat {
        self.change.mul(ctx, y).mul(ctx, &self.change_inv)
    }

    /// `ν(x)`: the `Hom(F¹, F⁰)` block mod p, flattened to length `c·d`.
    pub fn nu(&self, ctx: &WittContext, x: &Mat) -> Vec<Zq> {
        let y = self.to_adapted(ctx, x);
        let mut out = Vec::with_capacity(self.c * self.d);
        for j in 0..self.d {
            for i in self.d..self.d + self.c {
                out.push(ctx.residue(y[(i, j)]));
            }
        }
        out
    }

    /// Elementary lattices of `End(M)`: `Hom(F¹,F⁰)` and `End(F¹) ⊕ End(F⁰)`.
    pub fn graded_pieces(&self, ctx: &WittContext) -> Result<(Lattice, Lattice, Lattice)> {
        let r = self.c + self.d;
        let mut f0 = Vec::new();
        let mut fm1 = Vec::new();
        let mut fp1 = Vec::new();
        for i in 0..r {
            for j in 0..r {
                let mut y = Mat::zeros(r, r);
                y[(i, j)] = ctx.one();
                let x = self.from_adapted(ctx, &y);
                match (i < self.d, j < self.d) {
                    (true, true) | (false, false) => f0.push(x),
                    (false, true) => fm1.push(x),
                    (true, false) => fp1.push(x),
                }
            }
        }
        let n = ctx.precision();
        Ok((
            endos_to_lattice(ctx, &f0, r, n)?,
            endos_to_lattice(ctx, &fm1, r, n)?,
            endos_to_lattice(ctx, &fp1, r, n)?,
        ))
    }
}

/// The Frobenius matrix with its denominator absorbed (integral for Dieudonné modules).
fn normalized_phi_matrix(ctx: &WittContext, x: &FIsocrystal) -> Result<Mat> {
    let d = x.phi.denom;
    if d > 0 {
        if x.phi.mat.valuation(ctx) < d as u32 {
            return Err(Error::SplittingInvalid("Frobenius is not integral".into()));
        }
        Ok(x.phi.mat.div_p_pow(ctx, d as u32))
    } else {
        Ok(x.phi.mat.mul_p_pow(ctx, (-d) as u32))
    }
}

/// Image of a lattice of `End(M)` under ν: `(spanning vectors, dimension)`.
pub fn nu_image(ctx: &WittContext, l: &Lattice, split: &HodgeSplitting) -> Result<(Mat, usize)> {
    let r = split.c + split.d;
    let xs = basis_endos(ctx, l, r)?;
    let cols: Vec<Vec<Zq>> = xs.iter().map(|x| split.nu(ctx, x)).collect();
    let m = Mat::from_cols(split.c * split.d, &cols);
    let dim = matrix::rank_mod_p(ctx, &m);
    Ok((m, dim))
}

/// Whether `φ(x) ∉ End(M) ⇔ ν(x) ≠ 0` holds for `x ∈ End(M)`.
pub fn star_property_check(ctx: &WittContext, fr: &EndFrobenius, split: &HodgeSplitting, x: &Mat) -> bool {
    let (y, d) = fr.apply_elem(ctx, x, 0);
    let integral = d <= 0 || y.reduce_mod_p_pow(ctx, fr.phi.prec).valuation(ctx) >= d as u32;
    let nu_zero = split.nu(ctx, x).iter().all(|z| z.is_zero());
    integral == nu_zero
}

/// `σ_φ = φ ∘ μ(p)`, where `μ(p)` divides `F¹` by p and fixes `F⁰`.
pub fn sigma_phi(ctx: &WittContext, x: &FIsocrystal, split: &HodgeSplitting) -> Result<SemilinearMap> {
    let r = x.rank();
    let a = normalized_phi_matrix(ctx, x)?;
    let mut dg = Mat::zeros(r, r);
    for i in 0..r {
        dg[(i, i)] = if i < split.d { ctx.one() } else { ctx.p_pow(1) };
    }
    // p μ(p) = C diag(1, p) C^{-1}
    let pmu = split.change.mul(ctx, &dg).mul(ctx, &split.change_inv);
    let m = a.mul(ctx, &pmu.frobenius(ctx, 1));
    if m.valuation(ctx) < 1 {
        return Err(Error::SplittingInvalid("φ(F¹) is not contained in pM".into()));
    }
    let s = m.div_p_pow(ctx, 1);
    if matrix::rank_mod_p(ctx, &s) < r {
        return Err(Error::SplittingInvalid("σ_φ is not an automorphism of M".into()));
    }
    Ok(SemilinearMap::new(ctx, s, x.phi.twist, 0).with_prec(x.phi.prec - 1))
}

fn iteration_cap(ctx: &WittContext, r: usize) -> usize {
    r * r * ctx.precision() as usize
}

/// Largest sublattice of `v` stable under the operators of `mode`.
pub fn largest_sub_dieudonne(
    ctx: &WittContext,
    fr: &EndFrobenius,
    v: &Lattice,
    mode: StableMode,
) -> Result<Lattice> {
    if v.is_zero() {
        return Ok(v.clone());
    }
    let end = fr.end_lattice(ctx);
    let frame = v.saturate(ctx, &end)?;
    let f = fr.phi.restrict(ctx, &frame)?;
    let finv = fr.phi_inv.restrict(ctx, &frame)?;
    let (shrink, keep) = match mode {
        StableMode::Minus => (f.clone(), f.times_p_pow(1)),
        StableMode::Plus => (finv.clone(), finv.times_p_pow(1)),
    };
    // preimage of E under `keep` equals `keep^{-1}(E)`
    let keep_inv = match mode {
        StableMode::Minus => finv.times_p_pow(-1),
        StableMode::Plus => f.times_p_pow(-1),
    };
    let mut e = v.coords_in(ctx, &frame)?;
    let cap = iteration_cap(ctx, fr.r);
    for _ in 0..cap {
        let mut next = e.intersect(ctx, &e.apply(ctx, &shrink)?)?;
        if !e.apply(ctx, &keep)?.is_sublattice_of(ctx, &e)? {
            next = next.intersect(ctx, &e.apply(ctx, &keep_inv)?)?;
        }
        if next.equals(ctx, &e) {
            let inv_check = match mode {
                StableMode::Minus => &finv,
                StableMode::Plus => &f,
            };
            if !e.apply(ctx, inv_check)?.is_sublattice_of(ctx, &e)?
                || !e.apply(ctx, &keep)?.is_sublattice_of(ctx, &e)?
            {
                return Err(Error::precision("largest_sub_dieudonne", "fixed point is not stable"));
            }
            return e.from_coords(ctx, &frame);
        }
        e = next;
    }
    Err(Error::NonConvergence { op: "largest_sub_dieudonne", iterations: cap })
}

/// Smallest superlattice of `v` inside `frame[1/p]` stable under the operators of `mode`.
pub fn smallest_super_dieudonne(
    ctx: &WittContext,
    fr: &EndFrobenius,
    v: &Lattice,
    frame: &Lattice,
    mode: SuperMode,
) -> Result<Lattice> {
    if v.is_zero() {
        return Ok(v.clone());
    }
    let f = fr.phi.restrict(ctx, frame)?;
    let finv = fr.phi_inv.restrict(ctx, frame)?;
    let (g1, g2) = match mode {
        SuperMode::Phi => (f, finv.times_p_pow(1)),
        SuperMode::PPhi => (f.times_p_pow(1), finv),
    };
    let mut e = v.coords_in(ctx, frame)?;
    let cap = iteration_cap(ctx, fr.r);
    for _ in 0..cap {
        let next = Lattice::sum_all(ctx, e.ambient(), &[e.clone(), e.apply(ctx, &g1)?, e.apply(ctx, &g2)?])?;
        if next.equals(ctx, &e) {
            return e.from_coords(ctx, frame);
        }
        e = next;
    }
    Err(Error::NonConvergence { op: "smallest_super_dieudonne", iterations: cap })
}

/// `c_E = dim_k (E / φ^{-1}(E))` for `(E, pφ)` Dieudonné.
pub fn codim_of_dieudonne(ctx: &WittContext, fr: &EndFrobenius, e: &Lattice) -> Result<usize> {
    if e.is_zero() {
        return Ok(0);
    }
    let end = fr.end_lattice(ctx);
    let frame = e.saturate(ctx, &end)?;
    let ec = e.coords_in(ctx, &frame)?;
    let finv = fr.phi_inv.restrict(ctx, &frame)?;
    let img = ec.apply(ctx, &finv)?;
    Lattice::mod_p_dimension(ctx, &img, &ec)
}

/// Checks `dim ν(E) = c_E`; returns both numbers.
pub fn tangent_vs_codim(
    ctx: &WittContext,
    fr: &EndFrobenius,
    split: &HodgeSplitting,
    e: &Lattice,
) -> Result<(usize, usize)> {
    let (_, dim) = nu_image(ctx, e, split)?;
    let c = codim_of_dieudonne(ctx, fr, e)?;
    Ok((dim, c))
}

fn pass() -> AxiomResult {
    AxiomResult { pass: true, witness: None }
}

fn fail(w: impl Into<String>) -> AxiomResult {
    AxiomResult { pass: false, witness: Some(w.into()) }
}

/// First pair of basis elements with nonzero product, if any.
pub fn square_zero_witness(ctx: &WittContext, e: &Lattice, r: usize) -> Result<Option<(usize, usize)>> {
    let xs = basis_endos(ctx, e, r)?;
    let t = e.prec();
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in xs.iter().enumerate() {
            let prod = x.mul(ctx, y).reduce_mod_p_pow(ctx, t);
            if !prod.is_zero() {
                return Ok(Some((i, j)));
            }
        }
    }
    Ok(None)
}

fn direct_sum_check(ctx: &WittContext, e: &Lattice, a: &Lattice, b: &Lattice, what: &str) -> Result<AxiomResult> {
    if a.rank() + b.rank() != e.rank() {
        return Ok(fail(format!("{what}: ranks {} + {} != {}", a.rank(), b.rank(), e.rank())));
    }
    let s = a.sum(ctx, b)?;
    if !s.equals(ctx, e) {
        return Ok(fail(format!("{what}: sum of summands differs from E")));
    }
    if !a.intersect(ctx, b)?.is_zero() {
        return Ok(fail(format!("{what}: summands intersect")));
    }
    Ok(pass())
}

pub fn check_axioms(
    ctx: &WittContext,
    fr: &EndFrobenius,
    e: &Lattice,
    split: Option<&HodgeSplitting>,
    decomp: &EndDecomposition,
) -> Result<AxiomReport> {
    let r = fr.r;
    let sat = e.saturate(ctx, &decomp.v_minus)?;
    let o = largest_sub_dieudonne(ctx, fr, &sat, StableMode::Minus)?;
    let axiom_i = if o.equals(ctx, e) {
        pass()
    } else {
        fail(format!("largest Dieudonné lattice has rank {} and differs from E", o.rank()))
    };
    let axiom_ii = match square_zero_witness(ctx, e, r)? {
        None => pass(),
        Some((i, j)) => fail(format!("basis elements {i} and {j} have nonzero product")),
    };
    let (mut axiom_iii, mut axiom_iv, mut rank_f0, mut rank_fm1) = (None, None, None, None);
    if let Some(split) = split {
        let (g0, gm1, _) = split.graded_pieces(ctx)?;
        let f0e = e.intersect(ctx, &g0)?;
        let fm1e = e.intersect(ctx, &gm1)?;
        rank_f0 = Some(f0e.rank());
        rank_fm1 = Some(fm1e.rank());
        axiom_iii = Some(direct_sum_check(ctx, e, &f0e, &fm1e, "F⁰(E) ⊕ F⁻¹(E)")?);
        let a = f0e.apply(ctx, &fr.phi)?;
        let b = fm1e.apply(ctx, &fr.p_phi())?;
        axiom_iv = Some(direct_sum_check(ctx, e, &a, &b, "φ(F⁰(E)) ⊕ pφ(F⁻¹(E))")?);
    }
    Ok(AxiomReport { axiom_i, axiom_ii, axiom_iii, axiom_iv, rank_f0, rank_fm1 })
}

/// Checks `φ(t) = t`, `t² = t` and `[x, t] = x` on a basis of `E`.
pub fn validate_lie_element(ctx: &WittContext, fr: &EndFrobenius, e: &Lattice, t: &Projector) -> Result<()> {
    let r = fr.r;
    let k = t.denom;
    let prec = fr.phi.prec.saturating_sub(2 * k + 1);
    let (ft, fd) = fr.apply_elem(ctx, &t.mat, k as i32);
    // compare p^{-fd} ft with p^{-k} t
    let lhs = align(ctx, &ft, fd, k as i32);
    let rhs = align(ctx, &t.mat, k as i32, fd);
    if !lhs.eq_mod(ctx, &rhs, prec) {
        return Err(Error::ValidationFailed("φ(t) != t".into()));
    }
    // t² = t  ⇔  T² = p^k T for T = p^k t
    let t2 = t.mat.mul(ctx, &t.mat);
    if !t2.eq_mod(ctx, &t.mat.mul_p_pow(ctx, k), prec) {
        return Err(Error::ValidationFailed("projector: t² != t".into()));
    }
    for (i, x) in basis_endos(ctx, e, r)?.iter().enumerate() {
        // [x, t] = x  ⇔  x T - T x = p^k x
        let br = x.mul(ctx, &t.mat).sub(ctx, &t.mat.mul(ctx, x));
        if !br.eq_mod(ctx, &x.mul_p_pow(ctx, k), prec.min(e.prec())) {
            return Err(Error::ValidationFailed(format!("[x, t] != x for basis element {i}")));
        }
    }
    Ok(())
}

/// `p^{-da} a` rewritten over the common denominator `max(da, db)`.
fn align(ctx: &WittContext, a: &Mat, da: i32, db: i32) -> Mat {
    let d = da.max(db);
    a.mul_p_pow(ctx, (d - da) as u32)
}

/// Lie element `t` for `E`: built from slope projectors when `M` splits and
/// the images of `E` span a sum of slope components, else the supplied one.
pub fn lie_element(
    ctx: &WittContext,
    fr: &EndFrobenius,
    e: &Lattice,
    s: &SlopeData,
    user_t: Option<&Projector>,
) -> Result<Projector> {
    if let Some(t) = user_t {
        validate_lie_element(ctx, fr, e, t)?;
        return Ok(t.clone());
    }
    let r = fr.r;
    if !s.split {
        return Err(Error::NoAutoConstruction("M is not the direct sum of its slope components".into()));
    }
    let m = Lattice::full(ctx, r);
    let mut images = Vec::new();
    for x in basis_endos(ctx, e, r)? {
        images.push(Lattice::new(ctx, x, 0, e.prec())?);
    }
    let w0 = Lattice::sum_all(ctx, r, &images)?.saturate(ctx, &m)?;
    let mut inside = Vec::new();
    for (i, comp) in s.components.iter().enumerate() {
        if comp.is_sublattice_of(ctx, &w0)? {
            inside.push(i);
        } else if !comp.intersect(ctx, &w0)?.is_zero() {
            return Err(Error::NoAutoConstruction("image of E is not a sum of slope components".into()));
        }
    }
    let total: usize = inside.iter().map(|&i| s.components[i].rank()).sum();
    if total != w0.rank() {
        return Err(Error::NoAutoConstruction("image of E is not a sum of slope components".into()));
    }
    let mut t = Mat::zeros(r, r);
    for i in 0..s.slopes.len() {
        if !inside.contains(&i) {
            t = t.add(ctx, &s.projectors[i].mat);
        }
    }
    let t = Projector { mat: t, denom: 0 };
    validate_lie_element(ctx, fr, e, &t)?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isocrystal::{end_decompose, slope_split};

    #[test]
    fn ordinary_rank_two() {
        let ctx = WittContext::new(2, 1, 20).unwrap();
        let x = FIsocrystal::new(&ctx, Mat::from_ints(&ctx, &[vec![1, 0], vec![0, 2]])).unwrap();
        let s = slope_split(&ctx, &x).unwrap();
        let d = end_decompose(&ctx, &x, &s).unwrap();
        let fr = EndFrobenius::new(&ctx, &x).unwrap();
        let split = HodgeSplitting::default_for(&ctx, &x).unwrap();
        assert_eq!((split.d, split.c), (1, 1));
        let o = largest_sub_dieudonne(&ctx, &fr, &d.v_minus, StableMode::Minus).unwrap();
        assert_eq!(o.rank(), 1);
        assert!(o.equals(&ctx, &d.v_minus));
        assert_eq!(tangent_vs_codim(&ctx, &fr, &split, &o).unwrap(), (1, 1));
        let rep = check_axioms(&ctx, &fr, &o, Some(&split), &d).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        let t = lie_element(&ctx, &fr, &o, &s, None).unwrap();
        assert_eq!(t.mat, Mat::from_ints(&ctx, &[vec![0, 0], vec![0, 1]]));
        let sp = sigma_phi(&ctx, &x, &split).unwrap();
        assert_eq!(sp.mat, Mat::identity(&ctx, 2));
    }

    #[test]
    fn supersingular_sigma_phi() {
        let ctx = WittContext::new(3, 1, 12).unwrap();
        let x = FIsocrystal::new(&ctx, Mat::from_ints(&ctx, &[vec![0, 3], vec![1, 0]])).unwrap();
        let split = HodgeSplitting::default_for(&ctx, &x).unwrap();
        let sp = sigma_phi(&ctx, &x, &split).unwrap();
        assert_eq!(sp.mat, Mat::from_ints(&ctx, &[vec![0, 1], vec![1, 0]]));
    }

    #[test]
    fn bad_user_projector_is_rejected() {
        let ctx = WittContext::new(2, 1, 20).unwrap();
        let x = FIsocrystal::new(&ctx, Mat::from_ints(&ctx, &[vec![1, 0], vec![0, 2]])).unwrap();
        let s = slope_split(&ctx, &x).unwrap();
        let d = end_decompose(&ctx, &x, &s).unwrap();
        let fr = EndFrobenius::new(&ctx, &x).unwrap();
        let t = Projector { mat: Mat::from_ints(&ctx, &[vec![0, 0], vec![0, 2]]), denom: 0 };
        let err = lie_element(&ctx, &fr, &d.v_minus, &s, Some(&t)).unwrap_err();
        assert!(matches!(err, Error::ValidationFailed(ref m) if m.contains("projector")), "{err:?}");
    }
}
