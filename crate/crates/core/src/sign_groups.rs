//! Trace duality between opposite Hom-blocks of `End(M)[1/p]`, the lattices
//! `O_±(Y)`, their duals, and slope-pair bookkeeping (strings, slices).

use rand::Rng;

use crate::error::{Error, Result};
use crate::hodge::{
    codim_of_dieudonne, largest_sub_dieudonne, nu_image, smallest_super_dieudonne,
    square_zero_witness, unvec, EndFrobenius, HodgeSplitting, StableMode, SuperMode,
};
use crate::isocrystal::{EndDecomposition, SlopeData, Q};
use crate::lattice::Lattice;
use crate::matrix::{self, Mat};
use crate::witt::{WittContext, Zq};

/// A set of slope pairs `(α_i, α_j)` with `i < j`, stored by slope index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlopePairSet {
    pub pairs: Vec<(usize, usize)>,
}

impl SlopePairSet {
    pub fn new(m: usize, pairs: &[(usize, usize)]) -> Result<SlopePairSet> {
        let mut v = pairs.to_vec();
        for &(i, j) in &v {
            if i >= j || j >= m {
                return Err(Error::InvalidContext(format!("({i}, {j}) is not a slope pair among {m} slopes")));
            }
        }
        v.sort_unstable();
        v.dedup();
        Ok(SlopePairSet { pairs: v })
    }

    /// All pairs `i < j < m`.
    pub fn all(m: usize) -> SlopePairSet {
        let pairs = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
        SlopePairSet { pairs }
    }

    pub fn singleton(i: usize, j: usize) -> SlopePairSet {
        SlopePairSet { pairs: vec![(i, j)] }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.pairs.iter().map(|p| p.0).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn targets(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.pairs.iter().map(|p| p.1).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// No slope occurs both as a source and as a target.
    pub fn is_square_zero(&self) -> bool {
        let t = self.targets();
        self.sources().iter().all(|s| !t.contains(s))
    }

    pub fn is_subset_of(&self, other: &SlopePairSet) -> bool {
        self.pairs.iter().all(|p| other.pairs.contains(p))
    }

    /// Nonempty proper subsets, in a fixed order.
    pub fn proper_subsets(&self) -> Vec<SlopePairSet> {
        let k = self.pairs.len();
        (1..(1u64 << k) - 1)
            .map(|mask| SlopePairSet {
                pairs: (0..k).filter(|b| mask >> b & 1 == 1).map(|b| self.pairs[b]).collect(),
            })
            .collect()
    }

    /// Pairs ending at `a`.
    pub fn lower_string(m: usize, a: usize) -> SlopePairSet {
        SlopePairSet { pairs: (0..a.min(m)).map(|b| (b, a)).collect() }
    }

    /// Pairs starting at `a`.
    pub fn upper_string(m: usize, a: usize) -> SlopePairSet {
        SlopePairSet { pairs: (a + 1..m).map(|b| (a, b)).collect() }
    }

    /// `{(α_i, α_j) : i < l <= j}` for `1 <= l < m` (indices from 0).
    pub fn slice_chain_member(m: usize, l: usize) -> SlopePairSet {
        let pairs = (0..l).flat_map(|i| (l..m).map(move |j| (i, j))).collect();
        SlopePairSet { pairs }
    }

    pub fn label(&self, slopes: &[Q]) -> String {
        let parts: Vec<String> =
            self.pairs.iter().map(|&(i, j)| format!("({},{})", slopes[i], slopes[j])).collect();
        format!("{{{}}}", parts.join(","))
    }
}

/// Lower and upper strings for every slope index.
pub fn strings(m: usize) -> Vec<(SlopePairSet, SlopePairSet)> {
    (0..m).map(|a| (SlopePairSet::lower_string(m, a), SlopePairSet::upper_string(m, a))).collect()
}

/// The chain `Y[1], ..., Y[m-1]`; each member is checked to be square-zero of size `l(m-l)`.
pub fn slice_chain(m: usize) -> Vec<SlopePairSet> {
    (1..m)
        .map(|l| {
            let y = SlopePairSet::slice_chain_member(m, l);
            assert_eq!(y.len(), l * (m - l));
            assert!(y.is_square_zero());
            y
        })
        .collect()
}

/// Largest square-zero subset of all pairs, found by exhaustive search.
pub fn max_square_zero_size(m: usize) -> usize {
    let all = SlopePairSet::all(m).pairs;
    let k = all.len();
    assert!(k <= 20, "exhaustive search limited to at most 6 slopes");
    let mut best = 0;
    for mask in 0u64..(1u64 << k) {
        let set = SlopePairSet {
            pairs: (0..k).filter(|b| mask >> b & 1 == 1).map(|b| all[b]).collect(),
        };
        if set.len() > best && set.is_square_zero() {
            best = set.len();
        }
    }
    best
}

/// `Tr(xy)`.
pub fn trace(ctx: &WittContext, x: &Mat, y: &Mat) -> Zq {
    let mut s = ctx.zero();
    for i in 0..x.rows {
        for j in 0..x.cols {
            s = ctx.add(s, ctx.mul(x[(i, j)], y[(j, i)]));
        }
    }
    s
}

/// Gram matrix `Tr(a_k, b_l)` of the stored bases (scales not applied).
pub fn trace_gram(ctx: &WittContext, a: &Lattice, b: &Lattice, r: usize) -> Mat {
    let xs: Vec<Mat> = (0..a.rank()).map(|k| unvec(&a.basis().col(k), r)).collect();
    let ys: Vec<Mat> = (0..b.rank()).map(|l| unvec(&b.basis().col(l), r)).collect();
    Mat::from_fn(xs.len(), ys.len(), |k, l| trace(ctx, &xs[k], &ys[l]))
}

/// `Tr(φx, φy) = σ(Tr(x, y))` on `count` random integral pairs.
pub fn frobenius_invariance_check(ctx: &WittContext, fr: &EndFrobenius, count: usize, rng: &mut impl Rng) -> bool {
    let r = fr.r;
    for _ in 0..count {
        let x = Mat::random(ctx, r, r, rng);
        let y = Mat::random(ctx, r, r, rng);
        let (fx, d) = fr.apply_elem(ctx, &x, 0);
        let (fy, _) = fr.apply_elem(ctx, &y, 0);
        let lhs = trace(ctx, &fx, &fy);
        let rhs = ctx.frobenius(trace(ctx, &x, &y), 1);
        // lhs carries p^{-2d}
        let ok = if d >= 0 {
            ctx.sub(lhs, ctx.mul_p_pow(rhs, 2 * d as u32))
        } else {
            ctx.sub(ctx.mul_p_pow(lhs, (-2 * d) as u32), rhs)
        };
        let prec = fr.phi.prec.saturating_sub(2 * d.unsigned_abs());
        if ctx.valuation(ok) < prec {
            return false;
        }
    }
    true
}

/// Whether the trace pairing between two lattices of equal rank is perfect.
pub fn gram_is_perfect(ctx: &WittContext, a: &Lattice, b: &Lattice, r: usize) -> bool {
    if a.rank() != b.rank() {
        return false;
    }
    if a.is_zero() {
        return true;
    }
    let g = trace_gram(ctx, a, b, r);
    a.scale() + b.scale() == 0 && matrix::rank_mod_p(ctx, &g) == g.rows
}

/// `V_+(Y)`: saturated sum of `Hom(W(α), W(β))` for `(α, β) ∈ Y`.
pub fn plus_block(ctx: &WittContext, decomp: &EndDecomposition, r: usize, y: &SlopePairSet) -> Result<Lattice> {
    let ls: Vec<Lattice> = y.pairs.iter().map(|&(i, j)| decomp.block(i, j).clone()).collect();
    Lattice::sum_all(ctx, r * r, &ls)?.saturate(ctx, &Lattice::full(ctx, r * r))
}

/// `V_-(Y)`: saturated sum of `Hom(W(β), W(α))` for `(α, β) ∈ Y`.
pub fn minus_block(ctx: &WittContext, decomp: &EndDecomposition, r: usize, y: &SlopePairSet) -> Result<Lattice> {
    let ls: Vec<Lattice> = y.pairs.iter().map(|&(i, j)| decomp.block(j, i).clone()).collect();
    Lattice::sum_all(ctx, r * r, &ls)?.saturate(ctx, &Lattice::full(ctx, r * r))
}

/// `{y ∈ frame[1/p] : Tr(L, y) ⊆ W}`, where `frame` spans the opposite block.
/// The result is known to `v` fewer digits, `p^v` the largest Gram divisor.
pub fn dual_lattice(ctx: &WittContext, l: &Lattice, frame: &Lattice, r: usize) -> Result<Lattice> {
    if l.rank() != frame.rank() {
        return Err(Error::Shape(format!(
            "lattice of rank {} cannot be paired with a block of rank {}",
            l.rank(),
            frame.rank()
        )));
    }
    if l.is_zero() {
        return Ok(Lattice::zero(ctx, frame.ambient()));
    }
    let t = l.prec().min(frame.prec());
    let g = trace_gram(ctx, l, frame, r);
    let el = matrix::eliminate(ctx, &g, t, true, None);
    if el.rank < g.rows {
        return Err(Error::precision("dual_lattice", "trace pairing is degenerate at working precision"));
    }
    let vmax = el.divisors.iter().copied().max().unwrap_or(0);
    let q = el.q.unwrap();
    // G z ∈ p^{e_L + e_F} W  <=>  z ∈ p^{e_L + e_F} Q diag(p^{-v_i}) W
    let mut dq = q.clone();
    for (i, &v) in el.divisors.iter().enumerate() {
        for row in 0..dq.rows {
            dq[(row, i)] = ctx.mul_p_pow(q[(row, i)], vmax - v);
        }
    }
    let basis = frame.basis().mul(ctx, &dq);
    Lattice::new(ctx, basis, vmax as i32 - l.scale(), t.saturating_sub(vmax))
}

#[derive(Clone, Debug)]
pub struct SignModuleSet {
    pub pairs: SlopePairSet,
    pub v_plus: Lattice,
    pub v_minus: Lattice,
    pub o_plus: Lattice,
    pub o_minus: Lattice,
    /// `B(O_-)`, equal to the smallest `(φ, pφ^{-1})`-stable lattice over `B(V_-)`.
    pub o_plus_minus: Lattice,
    /// `B(O_+)`, equal to the smallest `(pφ, φ^{-1})`-stable lattice over `B(V_+)`.
    pub o_minus_plus: Lattice,
    pub v_plus_minus: Lattice,
    pub v_minus_plus: Lattice,
    /// `V_+ ⊆ V_{+,-}`, `V_- ⊆ V_{-,+}`, `O_+ ⊆ O_{+,-}`, `O_- ⊆ O_{-,+}`.
    pub inclusions: bool,
    /// Trace pairing on `V_+(Y) × V_-(Y)` is perfect.
    pub pairing_perfect: bool,
    pub max_loss: u32,
}

pub fn sign_modules(
    ctx: &WittContext,
    fr: &EndFrobenius,
    decomp: &EndDecomposition,
    y: &SlopePairSet,
) -> Result<SignModuleSet> {
    let r = fr.r;
    let v_plus = plus_block(ctx, decomp, r, y)?;
    let v_minus = minus_block(ctx, decomp, r, y)?;
    let o_minus = largest_sub_dieudonne(ctx, fr, &v_minus, StableMode::Minus)?;
    let o_plus = largest_sub_dieudonne(ctx, fr, &v_plus, StableMode::Plus)?;

    let v_plus_minus = dual_lattice(ctx, &v_minus, &v_plus, r)?;
    let v_minus_plus = dual_lattice(ctx, &v_plus, &v_minus, r)?;
    let o_plus_minus = dual_lattice(ctx, &o_minus, &v_plus, r)?;
    let o_minus_plus = dual_lattice(ctx, &o_plus, &v_minus, r)?;
    let pm_iter = smallest_super_dieudonne(ctx, fr, &v_plus_minus, &v_plus, SuperMode::Phi)?;
    let mp_iter = smallest_super_dieudonne(ctx, fr, &v_minus_plus, &v_minus, SuperMode::PPhi)?;
    if !pm_iter.equals(ctx, &o_plus_minus) {
        return Err(Error::DualityMismatch(format!(
            "{}: dual of O_- and the generated (φ, pφ^-1)-lattice differ",
            format!("{:?}", y.pairs)
        )));
    }
    if !mp_iter.equals(ctx, &o_minus_plus) {
        return Err(Error::DualityMismatch(format!(
            "{}: dual of O_+ and the generated (pφ, φ^-1)-lattice differ",
            format!("{:?}", y.pairs)
        )));
    }
    let inclusions = v_plus.is_sublattice_of(ctx, &v_plus_minus)?
        && v_minus.is_sublattice_of(ctx, &v_minus_plus)?
        && o_plus.is_sublattice_of(ctx, &o_plus_minus)?
        && o_minus.is_sublattice_of(ctx, &o_minus_plus)?;
    let pairing_perfect = gram_is_perfect(ctx, &v_plus, &v_minus, r);
    let max_loss = [&o_plus, &o_minus, &o_plus_minus, &o_minus_plus, &pm_iter, &mp_iter]
        .iter()
        .map(|l| l.loss(ctx))
        .max()
        .unwrap();
    Ok(SignModuleSet {
        pairs: y.clone(),
        v_plus,
        v_minus,
        o_plus,
        o_minus,
        o_plus_minus,
        o_minus_plus,
        v_plus_minus,
        v_minus_plus,
        inclusions,
        pairing_perfect,
        max_loss,
    })
}

/// `O_-(Y)` alone.
pub fn o_minus(ctx: &WittContext, fr: &EndFrobenius, decomp: &EndDecomposition, y: &SlopePairSet) -> Result<Lattice> {
    let v = minus_block(ctx, decomp, fr.r, y)?;
    largest_sub_dieudonne(ctx, fr, &v, StableMode::Minus)
}

/// `r_α r_β (β - α)`.
pub fn pair_codim(s: &SlopeData, i: usize, j: usize) -> i64 {
    let v = Q::from((s.mults[i] * s.mults[j]) as i64) * (s.slopes[j] - s.slopes[i]);
    assert!(v.is_integer(), "r_α r_β (β - α) is always an integer");
    v.to_integer()
}

/// Closed form `Σ_{(α,β) ∈ Y} r_α r_β (β - α)`.
pub fn closed_form_codim(s: &SlopeData, y: &SlopePairSet) -> i64 {
    y.pairs.iter().map(|&(i, j)| pair_codim(s, i, j)).sum()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuasiFactorEntry {
    pub pair: (usize, usize),
    pub closed_form: i64,
    pub lattice: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuasiFactorTable {
    pub entries: Vec<QuasiFactorEntry>,
    pub total_closed_form: i64,
    /// `dim ν(O_-)` over all pairs, when verified.
    pub total_lattice: Option<usize>,
}

/// Closed-form codimensions per pair; with `verify`, recomputed from the
/// lattices `O_-({(α, β)})` and `O_-` and compared.
pub fn quasi_factor_codims(
    ctx: &WittContext,
    fr: &EndFrobenius,
    decomp: &EndDecomposition,
    s: &SlopeData,
    split: Option<&HodgeSplitting>,
    verify: bool,
) -> Result<QuasiFactorTable> {
    let m = s.slopes.len();
    let all = SlopePairSet::all(m);
    let mut entries = Vec::new();
    let mut lattice_sum = 0usize;
    for &(i, j) in &all.pairs {
        let closed = pair_codim(s, i, j);
        let lattice = if verify {
            let o = o_minus(ctx, fr, decomp, &SlopePairSet::singleton(i, j))?;
            let c = codim_of_dieudonne(ctx, fr, &o)?;
            if c as i64 != closed {
                return Err(Error::VerificationMismatch(format!(
                    "pair ({}, {}): lattice codimension {c}, closed form {closed}",
                    s.slopes[i], s.slopes[j]
                )));
            }
            lattice_sum += c;
            Some(c)
        } else {
            None
        };
        entries.push(QuasiFactorEntry { pair: (i, j), closed_form: closed, lattice });
    }
    let total_closed_form = closed_form_codim(s, &all);
    let mut total_lattice = None;
    if verify {
        let o = o_minus(ctx, fr, decomp, &all)?;
        let total = match split {
            Some(sp) => nu_image(ctx, &o, sp)?.1,
            None => codim_of_dieudonne(ctx, fr, &o)?,
        };
        if total != lattice_sum || total as i64 != total_closed_form {
            return Err(Error::VerificationMismatch(format!(
                "total {total}, sum over pairs {lattice_sum}, closed form {total_closed_form}"
            )));
        }
        total_lattice = Some(total);
    }
    Ok(QuasiFactorTable { entries, total_closed_form, total_lattice })
}

#[derive(Clone, Debug)]
pub struct SubsliceCheck {
    pub pairs: SlopePairSet,
    /// `O_-(Y₁) = O_-(Y) ∩ V_-(Y₁)`.
    pub restriction_holds: bool,
}

#[derive(Clone, Debug)]
pub struct SliceReport {
    pub pairs: SlopePairSet,
    pub square_zero: bool,
    pub o_minus: Lattice,
    pub products_vanish: bool,
    pub nu_dim: Option<usize>,
    pub codim: usize,
    pub closed_form: i64,
    pub subslices: Vec<SubsliceCheck>,
}

/// Slice data for `Y`; sub-slices are checked for every nonempty proper subset
/// when `Y` has at most 6 pairs.
pub fn slice_report(
    ctx: &WittContext,
    fr: &EndFrobenius,
    decomp: &EndDecomposition,
    s: &SlopeData,
    split: Option<&HodgeSplitting>,
    y: &SlopePairSet,
) -> Result<SliceReport> {
    let r = fr.r;
    let o = o_minus(ctx, fr, decomp, y)?;
    let products_vanish = square_zero_witness(ctx, &o, r)?.is_none();
    let nu_dim = match split {
        Some(sp) => Some(nu_image(ctx, &o, sp)?.1),
        None => None,
    };
    let codim = codim_of_dieudonne(ctx, fr, &o)?;
    let mut subslices = Vec::new();
    if y.len() <= 6 {
        for y1 in y.proper_subsets() {
            let o1 = o_minus(ctx, fr, decomp, &y1)?;
            let restricted = o.intersect(ctx, &minus_block(ctx, decomp, r, &y1)?)?;
            subslices.push(SubsliceCheck { restriction_holds: o1.equals(ctx, &restricted), pairs: y1 });
        }
    }
    Ok(SliceReport {
        pairs: y.clone(),
        square_zero: y.is_square_zero(),
        o_minus: o,
        products_vanish,
        nu_dim,
        codim,
        closed_form: closed_form_codim(s, y),
        subslices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isocrystal::{end_decompose, slope_split, FIsocrystal};

    #[test]
    fn pair_set_combinatorics() {
        assert_eq!(SlopePairSet::all(2).len(), 1);
        let y = SlopePairSet::new(4, &[(2, 3), (0, 3), (0, 1)]).unwrap();
        assert!(y.is_square_zero());
        assert!(!SlopePairSet::new(3, &[(0, 1), (1, 2)]).unwrap().is_square_zero());
        assert_eq!(SlopePairSet::lower_string(3, 2).pairs, vec![(0, 2), (1, 2)]);
        assert_eq!(slice_chain(4)[1].len(), 4);
        assert_eq!(max_square_zero_size(4), 4);
        assert!(SlopePairSet::new(3, &[(1, 1)]).is_err());
    }

    #[test]
    fn ordinary_duality() {
        let ctx = WittContext::new(2, 1, 20).unwrap();
        let x = FIsocrystal::new(&ctx, Mat::from_ints(&ctx, &[vec![1, 0], vec![0, 2]])).unwrap();
        let s = slope_split(&ctx, &x).unwrap();
        let d = end_decompose(&ctx, &x, &s).unwrap();
        let fr = EndFrobenius::new(&ctx, &x).unwrap();
        let set = sign_modules(&ctx, &fr, &d, &SlopePairSet::all(2)).unwrap();
        assert_eq!(set.o_minus.rank(), 1);
        assert_eq!(set.o_plus_minus.rank(), 1);
        assert!(set.inclusions && set.pairing_perfect);
        let g = trace_gram(&ctx, &set.o_minus, &set.o_plus_minus, 2);
        assert!(ctx.is_unit(g[(0, 0)]));
        assert_eq!(trace(&ctx, &Mat::identity(&ctx, 2), &Mat::identity(&ctx, 2)), ctx.from_u64(2));
        let back = dual_lattice(&ctx, &set.o_plus_minus, &set.v_minus, 2).unwrap();
        assert!(back.equals(&ctx, &set.o_minus));
    }
}
