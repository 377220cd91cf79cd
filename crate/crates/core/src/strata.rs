//! Dimension theory: the closed-form codimension of the constant-isogeny
//! stratum, group-restricted variants, the symplectic formula and the Cayley
//! element.

use crate::error::{Error, Result};
use crate::hodge::{
    basis_endos, endos_to_lattice, largest_sub_dieudonne, tangent_vs_codim, nu_image, EndFrobenius,
    HodgeSplitting, StableMode,
};
use crate::isocrystal::{EndDecomposition, FIsocrystal, SlopeData, Q};
use crate::lattice::Lattice;
use crate::matrix::{self, Mat};
use crate::series::MatSeries;
use crate::witt::{WittContext, Zq};

/// Whether `x` lies in `l`.
fn contains(ctx: &WittContext, l: &Lattice, x: &Mat) -> Result<bool> {
    if x.is_zero() {
        return Ok(true);
    }
    let single = Lattice::from_basis(ctx, Mat::from_cols(x.rows * x.cols, &[x.vec_cols()]))?;
    single.is_sublattice_of(ctx, l)
}

fn span_dim(ctx: &WittContext, a: &Mat, b: &Mat) -> usize {
    matrix::rank_mod_p(ctx, &a.hcat(b))
}

fn qabs(x: Q) -> Q {
    if x < Q::from(0) { -x } else { x }
}

/// `Σ_{α<β} r_α r_β (β - α)` from a slope multiset.
pub fn traverso_closed_form(slopes: &[(Q, usize)]) -> Q {
    let mut t = Q::from(0);
    for (i, &(a, ra)) in slopes.iter().enumerate() {
        for &(b, rb) in &slopes[i + 1..] {
            t += Q::from((ra * rb) as i64) * qabs(b - a);
        }
    }
    t
}

/// `½ Σ_{(α,β)} |c_α d_β - c_β d_α|` with `d_α = α r_α`, `c_α = (1-α) r_α`.
pub fn codimension_form(slopes: &[(Q, usize)]) -> Q {
    let one = Q::from(1);
    let mut t = Q::from(0);
    for &(a, ra) in slopes {
        for &(b, rb) in slopes {
            let (ra, rb) = (Q::from(ra as i64), Q::from(rb as i64));
            let (ca, da) = ((one - a) * ra, a * ra);
            let (cb, db) = ((one - b) * rb, b * rb);
            t += qabs(ca * db - cb * da);
        }
    }
    t / Q::from(2)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraversoReport {
    pub lattice_side: usize,
    pub closed_form: i64,
}

/// `dim ν(O_-)` against `Σ r_α r_β (β - α)`.
pub fn traverso(
    ctx: &WittContext,
    fr: &EndFrobenius,
    decomp: &EndDecomposition,
    s: &SlopeData,
    split: &HodgeSplitting,
) -> Result<TraversoReport> {
    let o = largest_sub_dieudonne(ctx, fr, &decomp.v_minus, StableMode::Minus)?;
    let (_, lattice_side) = nu_image(ctx, &o, split)?;
    let pairs: Vec<(Q, usize)> = s.slopes.iter().copied().zip(s.mults.iter().copied()).collect();
    let cf = traverso_closed_form(&pairs);
    let closed_form = cf.to_integer();
    if !cf.is_integer() || closed_form != lattice_side as i64 {
        return Err(Error::VerificationMismatch(format!(
            "dim ν(O_-) = {lattice_side}, closed form {cf}"
        )));
    }
    Ok(TraversoReport { lattice_side, closed_form })
}

#[derive(Clone, Debug)]
pub enum GroupKind {
    FullGl,
    /// Gram matrix of an alternating form.
    Symplectic(Mat),
    Custom,
}

/// A group through its Lie lattice `𝔤 ⊆ End(M)`, saturated.
#[derive(Clone, Debug)]
pub struct GroupData {
    pub kind: GroupKind,
    pub r: usize,
    pub lie: Lattice,
}

impl GroupData {
    pub fn full_gl(ctx: &WittContext, r: usize) -> GroupData {
        GroupData { kind: GroupKind::FullGl, r, lie: Lattice::full(ctx, r * r) }
    }

    /// `𝔤 = {x : xᵀψ + ψx = 0}`.
    pub fn symplectic(ctx: &WittContext, psi: Mat) -> Result<GroupData> {
        let r = psi.rows;
        if !psi.is_square() || r % 2 != 0 {
            return Err(Error::Shape(format!("alternating form of size {}×{}", psi.rows, psi.cols)));
        }
        for i in 0..r {
            if !psi[(i, i)].is_zero() {
                return Err(Error::CertificateInvalid(format!("ψ(e_{i}, e_{i}) != 0")));
            }
            for j in 0..i {
                if ctx.add(psi[(i, j)], psi[(j, i)]) != ctx.zero() {
                    return Err(Error::CertificateInvalid("ψ is not alternating".into()));
                }
            }
        }
        matrix::inverse_unimodular(ctx, &psi)
            .map_err(|_| Error::CertificateInvalid("ψ is not perfect".into()))?;
        let mut cols = Vec::with_capacity(r * r);
        for b in 0..r {
            for a in 0..r {
                let mut e = Mat::zeros(r, r);
                e[(a, b)] = ctx.one();
                cols.push(e.transpose().mul(ctx, &psi).add(ctx, &psi.mul(ctx, &e)).vec_cols());
            }
        }
        let k = matrix::kernel(ctx, &Mat::from_cols(r * r, &cols), ctx.precision());
        let lie = Lattice::from_basis(ctx, k)?;
        Ok(GroupData { kind: GroupKind::Symplectic(psi), r, lie })
    }

    pub fn custom(ctx: &WittContext, r: usize, lie: Lattice) -> Result<GroupData> {
        let lie = lie.saturate(ctx, &Lattice::full(ctx, r * r))?;
        Ok(GroupData { kind: GroupKind::Custom, r, lie })
    }

    pub fn dim(&self) -> usize {
        self.lie.rank()
    }

    /// Bracket closure, `φ`-stability of `𝔤[1/p]`, and compatibility with the
    /// Hodge grading (plus isotropy of `F¹`, `F⁰` in the symplectic case).
    pub fn certify(&self, ctx: &WittContext, fr: &EndFrobenius, split: &HodgeSplitting) -> Result<()> {
        let r = self.r;
        let end = fr.end_lattice(ctx);
        if let GroupKind::FullGl = self.kind {
            return Ok(());
        }
        let xs = basis_endos(ctx, &self.lie, r)?;
        for (i, x) in xs.iter().enumerate() {
            for y in &xs[i + 1..] {
                let br = x.mul(ctx, y).sub(ctx, &y.mul(ctx, x));
                if !contains(ctx, &self.lie, &br)? {
                    return Err(Error::CertificateInvalid("𝔤 is not closed under the bracket".into()));
                }
            }
        }
        let img = self.lie.apply(ctx, &fr.phi)?.saturate(ctx, &end)?;
        if !img.equals(ctx, &self.lie) {
            return Err(Error::CertificateInvalid("φ(𝔤[1/p]) != 𝔤[1/p]".into()));
        }
        let d = split.d;
        for x in &xs {
            let y = split.to_adapted(ctx, x);
            // degrees -1, 0, 1 of the grading by μ
            for deg in [-1i32, 0, 1] {
                let part = Mat::from_fn(r, r, |i, j| {
                    let k = (j < d) as i32 - (i < d) as i32;
                    if k == deg { y[(i, j)] } else { ctx.zero() }
                });
                if !contains(ctx, &self.lie, &split.from_adapted(ctx, &part))? {
                    return Err(Error::CertificateInvalid("𝔤 is not graded by the Hodge splitting".into()));
                }
            }
        }
        if let GroupKind::Symplectic(psi) = &self.kind {
            for f in [split.f1(), split.f0()] {
                if !f.transpose().mul(ctx, psi).mul(ctx, &f).is_zero() {
                    return Err(Error::CertificateInvalid("Hodge splitting is not isotropic for ψ".into()));
                }
            }
        }
        Ok(())
    }
}

/// `N_G(μ) = Hom(F¹, F⁰) ∩ 𝔤` and `n_G = dim ν(N_G(μ))`.
pub fn n_g_mu(ctx: &WittContext, gd: &GroupData, split: &HodgeSplitting) -> Result<(Lattice, usize)> {
    let (_, hom, _) = split.graded_pieces(ctx)?;
    let n = hom.intersect(ctx, &gd.lie)?;
    let (_, dim) = nu_image(ctx, &n, split)?;
    if dim != n.rank() {
        return Err(Error::CertificateInvalid(format!("ν is not injective on N_G(μ): rank {} vs {dim}", n.rank())));
    }
    Ok((n, dim))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrataReport {
    pub n_g: usize,
    pub c_minus: usize,
    pub c_minus_g: usize,
    pub tangent_dim: usize,
    pub v_minus_g_rank: usize,
    pub o_minus_g_rank: usize,
    /// `ν(O_-(G)) = ν(V_-(G)) ∩ ν(O_-)`.
    pub fact_a: bool,
    /// `V_- = V_-(G) ⊕ (trace complement)` as `pφ`-lattices, when that complement exists.
    pub fact_b: bool,
    pub tangent_bound_holds: bool,
}

pub fn strata_dims(
    ctx: &WittContext,
    gd: &GroupData,
    fr: &EndFrobenius,
    decomp: &EndDecomposition,
    split: &HodgeSplitting,
) -> Result<StrataReport> {
    let r = gd.r;
    gd.certify(ctx, fr, split)?;
    let (n, n_g) = n_g_mu(ctx, gd, split)?;
    let o = largest_sub_dieudonne(ctx, fr, &decomp.v_minus, StableMode::Minus)?;
    let v_g = decomp.v_minus.intersect(ctx, &gd.lie)?;
    let o_g = o.intersect(ctx, &gd.lie)?;
    let (dim, c_e) = tangent_vs_codim(ctx, fr, split, &o_g)?;
    if dim != c_e {
        return Err(Error::VerificationMismatch(format!("dim ν(O_-(G)) = {dim}, c = {c_e}")));
    }
    let (nu_n, a) = nu_image(ctx, &n, split)?;
    let (nu_o, c_minus) = nu_image(ctx, &o, split)?;
    let (nu_v, dv) = nu_image(ctx, &v_g, split)?;
    let tangent_dim = a + c_minus - span_dim(ctx, &nu_n, &nu_o);
    let meet = dv + c_minus - span_dim(ctx, &nu_v, &nu_o);
    let fact_a = meet == dim;

    let fact_b = if gd.lie.rank() == r * r {
        true
    } else {
        // trace-orthogonal of 𝔤 inside V_-: Tr(xy) = vec(xᵀ)·vec(y)
        let xs = basis_endos(ctx, &gd.lie, r)?;
        let rows: Vec<Vec<Zq>> = xs.iter().map(|x| x.transpose().vec_cols()).collect();
        let form = Mat::from_cols(r * r, &rows).transpose();
        let perp = endos_to_lattice(
            ctx,
            &basis_from_columns(&matrix::kernel(ctx, &form, ctx.precision()), r),
            r,
            ctx.precision(),
        )?;
        let comp = decomp.v_minus.intersect(ctx, &perp)?;
        let total = v_g.sum(ctx, &comp)?;
        v_g.rank() + comp.rank() == decomp.v_minus.rank() && total.equals(ctx, &decomp.v_minus)
    };
    let tangent_bound_holds = tangent_dim >= dim;
    if fact_b && tangent_dim != dim {
        return Err(Error::VerificationMismatch(format!(
            "complement certificate holds but tangent dimension {tangent_dim} != c_-(G) = {dim}"
        )));
    }
    Ok(StrataReport {
        n_g,
        c_minus,
        c_minus_g: dim,
        tangent_dim,
        v_minus_g_rank: v_g.rank(),
        o_minus_g_rank: o_g.rank(),
        fact_a,
        fact_b,
        tangent_bound_holds,
    })
}

fn basis_from_columns(k: &Mat, r: usize) -> Vec<Mat> {
    (0..k.cols).map(|j| Mat::unvec_cols(&k.col(j), r, r)).collect()
}

/// Slopes pair up as `α_i + α_{m+1-i} = 1` with equal multiplicities.
pub fn manin_symmetric(s: &SlopeData) -> bool {
    let m = s.slopes.len();
    (0..m).all(|i| s.slopes[i] + s.slopes[m - 1 - i] == Q::from(1) && s.mults[i] == s.mults[m - 1 - i])
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolarizedReport {
    pub lattice_side: usize,
    pub closed_form: i64,
    pub c_minus: usize,
    pub strata: StrataReport,
}

/// `c_-(Sp)` against `½ c_- + Σ_{(α, 1-α)} r_α (½ - α)`.
pub fn polarized_dim(
    ctx: &WittContext,
    x: &FIsocrystal,
    fr: &EndFrobenius,
    decomp: &EndDecomposition,
    s: &SlopeData,
    split: &HodgeSplitting,
    psi: &Mat,
) -> Result<PolarizedReport> {
    if split.c != split.d {
        return Err(Error::HypothesisViolated(format!("dimension {} != codimension {}", split.d, split.c)));
    }
    if !manin_symmetric(s) {
        return Err(Error::SlopeSymmetryViolated(format!("slopes {:?} with multiplicities {:?}", s.slopes, s.mults)));
    }
    let d = x.phi.denom;
    let lhs = x.phi.mat.transpose().mul(ctx, psi).mul(ctx, &x.phi.mat);
    let rhs = psi.frobenius(ctx, 1).mul_p_pow(ctx, (1 + 2 * d).max(0) as u32);
    if 1 + 2 * d < 0 || !lhs.eq_mod(ctx, &rhs, ctx.precision()) {
        return Err(Error::CertificateInvalid("ψ(φx, φy) != p σ(ψ(x, y))".into()));
    }
    let gd = GroupData::symplectic(ctx, psi.clone())?;
    let strata = strata_dims(ctx, &gd, fr, decomp, split)?;
    let pairs: Vec<(Q, usize)> = s.slopes.iter().copied().zip(s.mults.iter().copied()).collect();
    let tau = traverso_closed_form(&pairs);
    let half = Q::new(1, 2);
    let mut cf = tau * half;
    for &(a, ra) in &pairs {
        if a < half {
            cf += Q::from(ra as i64) * (half - a);
        }
    }
    if !cf.is_integer() || cf.to_integer() != strata.c_minus_g as i64 {
        return Err(Error::VerificationMismatch(format!("c_-(Sp) = {}, closed form {cf}", strata.c_minus_g)));
    }
    Ok(PolarizedReport { lattice_side: strata.c_minus_g, closed_form: cf.to_integer(), c_minus: strata.c_minus, strata })
}

#[derive(Clone, Debug)]
pub struct CayleyElement {
    pub series: MatSeries,
    /// `ϖᵀ ψ ϖ = ψ` through the truncation degree.
    pub symplectic: bool,
    /// Every coefficient of `ϖ - 1` lies in `O_-`.
    pub in_o_minus: bool,
}

/// `ϖ = (1 - Σ v_i x_i)(1 + Σ v_i x_i)^{-1}`.
pub fn cayley_element(ctx: &WittContext, psi: &Mat, v: &[Mat], o_minus: &Lattice, dmax: u32) -> Result<CayleyElement> {
    if ctx.p() == 2 {
        return Err(Error::WrongCharacteristic);
    }
    let r = psi.rows;
    let n = v.len();
    let id = MatSeries::identity(ctx, r, n, dmax);
    let mut a = MatSeries::zero(r, r, n, dmax);
    for (i, vi) in v.iter().enumerate() {
        let mut e = vec![0; n];
        e[i] = 1;
        a = a.add(ctx, &MatSeries::constant(vi.clone(), n, dmax).shift(&e));
    }
    // (1 + A)^{-1} = Σ (-A)^k, finite since A has no constant term
    let mut inv = id.clone();
    let mut pw = id.clone();
    for _ in 0..dmax {
        pw = MatSeries::zero(r, r, n, dmax).sub(ctx, &pw.mul(ctx, &a));
        if pw.is_zero() {
            break;
        }
        inv = inv.add(ctx, &pw);
    }
    let w = id.sub(ctx, &a).mul(ctx, &inv);
    let psis = MatSeries::constant(psi.clone(), n, dmax);
    let symplectic = w.transpose().mul(ctx, &psis).mul(ctx, &w).sub(ctx, &psis).is_zero();
    let mut in_o_minus = true;
    for (_, m) in w.sub(ctx, &id).terms() {
        if !contains(ctx, o_minus, m)? {
            in_o_minus = false;
            break;
        }
    }
    Ok(CayleyElement { series: w, symplectic, in_o_minus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isocrystal::{end_decompose, slope_split};

    #[test]
    fn codimension_forms_agree() {
        let sl = vec![(Q::new(0, 1), 2), (Q::new(1, 3), 3), (Q::new(1, 2), 2), (Q::new(1, 1), 1)];
        assert_eq!(traverso_closed_form(&sl), codimension_form(&sl));
    }

    fn symplectic_ordinary(p: u64, d: usize) -> (WittContext, FIsocrystal, Mat) {
        let ctx = WittContext::new(p, 1, 20).unwrap();
        let r = 2 * d;
        let mut a = Mat::zeros(r, r);
        let mut psi = Mat::zeros(r, r);
        for i in 0..d {
            a[(i, i)] = ctx.one();
            a[(d + i, d + i)] = ctx.p_pow(1);
            psi[(i, d + i)] = ctx.one();
            psi[(d + i, i)] = ctx.from_i64(-1);
        }
        (ctx.clone(), FIsocrystal::new(&ctx, a).unwrap(), psi)
    }

    #[test]
    fn symplectic_ordinary_dims() {
        for (d, want) in [(1usize, 1i64), (2, 3)] {
            let (ctx, x, psi) = symplectic_ordinary(3, d);
            let s = slope_split(&ctx, &x).unwrap();
            let dec = end_decompose(&ctx, &x, &s).unwrap();
            let fr = EndFrobenius::new(&ctx, &x).unwrap();
            let id = Mat::identity(&ctx, 2 * d);
            let split = HodgeSplitting::from_columns(&ctx, &x, &id.col_range(d, 2 * d), &id.col_range(0, d)).unwrap();
            let rep = polarized_dim(&ctx, &x, &fr, &dec, &s, &split, &psi).unwrap();
            assert_eq!(rep.closed_form, want);
            assert_eq!(rep.strata.n_g as i64, want);
            assert_eq!(rep.strata.tangent_dim as i64, want);
            assert!(rep.strata.fact_a && rep.strata.fact_b);
        }
    }

    #[test]
    fn cayley_elliptic() {
        let (ctx, x, psi) = symplectic_ordinary(3, 1);
        let s = slope_split(&ctx, &x).unwrap();
        let dec = end_decompose(&ctx, &x, &s).unwrap();
        let fr = EndFrobenius::new(&ctx, &x).unwrap();
        let o = largest_sub_dieudonne(&ctx, &fr, &dec.v_minus, StableMode::Minus).unwrap();
        let v = basis_endos(&ctx, &o, 2).unwrap();
        let c = cayley_element(&ctx, &psi, &v, &o, 5).unwrap();
        assert!(c.symplectic && c.in_o_minus);
        let lin = c.series.coeff(&[1]);
        assert_eq!(lin, v[0].scale(&ctx, ctx.from_i64(-2)));
        assert!(c.series.coeff(&[2]).is_zero());
        let id = Mat::identity(&ctx, 2);
        let bad = cayley_element(&ctx, &psi, &[v[0].add(&ctx, &id)], &o, 5).unwrap();
        assert!(!bad.symplectic);
    }
}
