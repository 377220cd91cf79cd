//! Newton slopes, slope decomposition, and the induced decomposition of End(M).

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, SemilinearMap};
use crate::matrix::{self, Mat};
use crate::witt::WittContext;

pub type Q = Ratio<i64>;

/// `(M, φ)` with `M = Z_q^r` and `φ` a σ-linear map bijective after inverting p.
#[derive(Clone, Debug)]
pub struct FIsocrystal {
    pub phi: SemilinearMap,
}

/// An element of `End(M)[1/p]` stored as `p^{-denom} mat`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Projector {
    pub mat: Mat,
    pub denom: u32,
}

#[derive(Clone, Debug)]
pub struct SlopeData {
    /// Distinct slopes in increasing order.
    pub slopes: Vec<Q>,
    pub mults: Vec<usize>,
    pub projectors: Vec<Projector>,
    /// `M ∩ W(α)` for each slope.
    pub components: Vec<Lattice>,
    /// Columns: concatenated component bases.
    pub adapted_basis: Mat,
    /// Whether `M` is the direct sum of its slope components.
    pub split: bool,
}

#[derive(Clone, Debug)]
pub struct EndDecomposition {
    /// `(i, j, lattice)`: `End(M) ∩ Hom(W(α_i), W(α_j))`.
    pub blocks: Vec<(usize, usize, Lattice)>,
    pub v_plus: Lattice,
    pub v_zero: Lattice,
    pub v_minus: Lattice,
}

impl FIsocrystal {
    pub fn new(ctx: &WittContext, mat: Mat) -> Result<FIsocrystal> {
        FIsocrystal::from_map(ctx, SemilinearMap::new(ctx, mat, 1, 0))
    }

    pub fn from_map(ctx: &WittContext, phi: SemilinearMap) -> Result<FIsocrystal> {
        if !phi.mat.is_square() {
            return Err(Error::Shape(format!(
                "Frobenius matrix is {}x{}",
                phi.mat.rows, phi.mat.cols
            )));
        }
        if ctx.degree() > 1 && phi.twist != 1 {
            return Err(Error::Shape("Frobenius must be σ-linear".into()));
        }
        if matrix::rank_at(ctx, &phi.mat, phi.prec) < phi.mat.rows {
            return Err(Error::SingularMap("Frobenius is not injective".into()));
        }
        Ok(FIsocrystal { phi })
    }

    pub fn rank(&self) -> usize {
        self.phi.mat.rows
    }

    pub fn module(&self, ctx: &WittContext) -> Lattice {
        Lattice::full(ctx, self.rank())
    }

    /// `p M ⊆ φ(M) ⊆ M`.
    pub fn is_dieudonne(&self, ctx: &WittContext) -> Result<bool> {
        let m = self.module(ctx);
        let img = m.apply(ctx, &self.phi)?;
        Ok(img.is_sublattice_of(ctx, &m)? && m.scaled(1).is_sublattice_of(ctx, &img)?)
    }

    pub fn phi_inverse(&self, ctx: &WittContext) -> Result<SemilinearMap> {
        self.phi.inverse(ctx)
    }

    /// Verschiebung `p φ^{-1}`.
    pub fn verschiebung(&self, ctx: &WittContext) -> Result<SemilinearMap> {
        Ok(self.phi.inverse(ctx)?.times_p_pow(1))
    }

    pub fn newton_slopes(&self, ctx: &WittContext) -> Result<Vec<(Q, usize)>> {
        newton_slopes(ctx, &self.phi)
    }

    /// `(c, d)`: codimension and dimension.
    pub fn dim_codim(&self, ctx: &WittContext) -> Result<(usize, usize)> {
        let m = self.module(ctx);
        let fm = m.apply(ctx, &self.phi)?;
        let vm = m.apply(ctx, &self.verschiebung(ctx)?)?;
        if !fm.is_sublattice_of(ctx, &m)? || !vm.is_sublattice_of(ctx, &m)? {
            return Err(Error::InclusionViolated("not a Dieudonné module".into()));
        }
        let d = Lattice::mod_p_dimension(ctx, &fm, &m)?;
        let c = Lattice::mod_p_dimension(ctx, &vm, &m)?;
        Ok((c, d))
    }

    /// `(End(M), x ↦ φ x φ^{-1})` with `End(M)` vectorized column by column.
    pub fn end_isocrystal(&self, ctx: &WittContext) -> Result<FIsocrystal> {
        FIsocrystal::from_map(ctx, end_phi(ctx, &self.phi)?)
    }
}

/// Frobenius `x ↦ φ x φ^{-1}` on vectorized endomorphisms.
pub fn end_phi(ctx: &WittContext, phi: &SemilinearMap) -> Result<SemilinearMap> {
    let (b, a) = matrix::scaled_inverse(ctx, &phi.mat, phi.prec)?;
    // vec(A σ(x) B) = (Bᵀ ⊗ A) σ(vec x), and A^{-1} = p^{-a} B
    let k = b.transpose().kron(ctx, &phi.mat);
    Ok(SemilinearMap::new(ctx, k, phi.twist, a as i32).with_prec(phi.prec.saturating_sub(a)))
}

/// Inverse `x ↦ φ^{-1} x φ` on vectorized endomorphisms.
pub fn end_phi_inverse(ctx: &WittContext, phi: &SemilinearMap) -> Result<SemilinearMap> {
    let (b, a) = matrix::scaled_inverse(ctx, &phi.mat, phi.prec)?;
    // φ^{-1} x φ = σ^{-1}(A^{-1} x A) = p^{-a} σ^{-1}(B x A)
    let k = phi.mat.transpose().kron(ctx, &b).frobenius(ctx, -phi.twist);
    Ok(SemilinearMap::new(ctx, k, -phi.twist, a as i32).with_prec(phi.prec.saturating_sub(a)))
}

/// Matrix of `φ^n` (linear) without its denominator `n · denom`.
pub fn linearization(ctx: &WittContext, phi: &SemilinearMap) -> Mat {
    let n = ctx.degree();
    let mut acc = phi.mat.clone();
    for i in 1..n {
        acc = acc.mul(ctx, &phi.mat.frobenius(ctx, i as i64));
    }
    acc
}

/// Lower convex hull of `(i, v_i)`; returns `(valuation of roots, multiplicity)`
/// in increasing valuation order. Entries `None` are treated as infinite.
pub fn newton_polygon(vals: &[Option<u32>]) -> Vec<(Q, usize)> {
    let pts: Vec<(i64, i64)> = vals
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i as i64, v as i64)))
        .collect();
    let mut hull: Vec<(i64, i64)> = Vec::new();
    for &pt in &pts {
        while hull.len() >= 2 {
            let (x1, y1) = hull[hull.len() - 2];
            let (x2, y2) = hull[hull.len() - 1];
            // drop the middle point if it is on or above the segment
            if (y2 - y1) * (pt.0 - x1) >= (pt.1 - y1) * (x2 - x1) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    let mut out: Vec<(Q, usize)> = Vec::new();
    // Segments read right to left give increasing root valuations.
    for w in hull.windows(2).rev() {
        let ((x1, y1), (x2, y2)) = (w[0], w[1]);
        let len = (x2 - x1) as usize;
        let val = Q::new(y1 - y2, x2 - x1);
        out.push((val, len));
    }
    out
}

/// Newton slopes of a σ-linear map on `K^r`.
pub fn newton_slopes(ctx: &WittContext, phi: &SemilinearMap) -> Result<Vec<(Q, usize)>> {
    let n = ctx.degree() as i64;
    // pull the content out of the matrix so the determinant stays within precision
    let k = phi.mat.valuation(ctx).min(phi.prec.saturating_sub(1));
    let phi = &SemilinearMap::new(ctx, phi.mat.div_p_pow(ctx, k), phi.twist, phi.denom - k as i32)
        .with_prec(phi.prec - k);
    let lam = linearization(ctx, phi);
    let cp = matrix::charpoly(ctx, &lam);
    let t = phi.prec;
    let vals: Vec<Option<u32>> = cp
        .iter()
        .map(|&c| {
            let v = ctx.valuation(ctx.reduce_mod_p_pow(c, t));
            (v < t).then_some(v)
        })
        .collect();
    if vals[0].is_none() {
        return Err(Error::precision(
            "newton_slopes",
            "determinant of the linearization vanishes at working precision",
        ));
    }
    Ok(newton_polygon(&vals)
        .into_iter()
        .map(|(v, m)| (v / n - Q::from(phi.denom as i64), m))
        .collect())
}

/// Expands `[(α, m)]` into a sorted list with repetitions.
pub fn expand_slopes(s: &[(Q, usize)]) -> Vec<Q> {
    let mut out = Vec::new();
    for &(a, m) in s {
        out.extend(std::iter::repeat(a).take(m));
    }
    out.sort();
    out
}

/// Fitting idempotent of an integral matrix: the projection onto the part
/// where it acts invertibly, along the topologically nilpotent part.
fn unit_idempotent(ctx: &WittContext, x: &Mat) -> Result<Mat> {
    let k = x.rows;
    let q = ctx.residue_size();
    let mut y = x.clone();
    for i in 1..=k {
        // y^(q^i - 1) as the product of z^(q^t), t < i, with z = y^(q-1)
        let mut z = y.pow(ctx, q - 1);
        let mut acc = z.clone();
        for _ in 1..i {
            z = z.pow(ctx, q);
            acc = acc.mul(ctx, &z);
        }
        y = acc;
    }
    let mut pc = 1u128;
    while pc < k as u128 {
        pc *= ctx.p() as u128;
    }
    y = y.pow(ctx, pc);
    let cap = 2 * ctx.precision() as usize + 8;
    for _ in 0..cap {
        let z = y.pow(ctx, ctx.p() as u128);
        if z == y {
            if y.mul(ctx, &y) != y {
                return Err(Error::precision("slope_split", "limit is not idempotent"));
            }
            return Ok(y);
        }
        y = z;
    }
    Err(Error::NonConvergence { op: "slope_split", iterations: cap })
}

pub fn slope_split(ctx: &WittContext, x: &FIsocrystal) -> Result<SlopeData> {
    let r = x.rank();
    let global = x.newton_slopes(ctx)?;
    let mut frame = x.module(ctx);
    let mut components = Vec::new();
    for (idx, &(_, mult)) in global.iter().enumerate() {
        if idx + 1 == global.len() {
            if frame.rank() != mult {
                return Err(Error::FieldTooSmall(format!(
                    "last component has rank {} but multiplicity {mult}",
                    frame.rank()
                )));
            }
            components.push(frame.clone());
            break;
        }
        let local = x.phi.restrict(ctx, &frame)?;
        let k = frame.rank();
        let lam = linearization(ctx, &local);
        let cp = matrix::charpoly(ctx, &lam);
        let vals: Vec<Option<u32>> = cp
            .iter()
            .map(|&c| {
                let v = ctx.valuation(ctx.reduce_mod_p_pow(c, local.prec));
                (v < local.prec).then_some(v)
            })
            .collect();
        let poly = newton_polygon(&vals);
        let (lowest, lmult) = poly[0];
        if lmult != mult {
            return Err(Error::FieldTooSmall(format!(
                "slope multiplicity {lmult} differs from {mult}"
            )));
        }
        let (u, w) = (*lowest.numer() as i32, *lowest.denom() as u128);
        let psi = SemilinearMap::new(ctx, lam.pow(ctx, w), 0, u).with_prec(local.prec);
        let mut l = Lattice::full(ctx, k);
        let mut stable = false;
        for _ in 0..=k + 1 {
            let next = l.sum(ctx, &l.apply(ctx, &psi)?)?;
            if next.equals(ctx, &l) {
                stable = true;
                break;
            }
            l = next;
        }
        if !stable {
            return Err(Error::NonConvergence { op: "slope_split", iterations: k + 2 });
        }
        let psi_l = psi.restrict(ctx, &l)?;
        let psi_int = integral_part(ctx, &psi_l)?;
        let e = unit_idempotent(ctx, &psi_int)?;
        let one = Mat::identity(ctx, k);
        let comp_coords = l.basis().mul(ctx, &e);
        let rest_coords = l.basis().mul(ctx, &one.sub(ctx, &e));
        let full_k = Lattice::full(ctx, k);
        // dividing out p^denom costs that many digits
        let t = psi_l.prec.saturating_sub(psi_l.denom.max(0) as u32);
        let comp = Lattice::new(ctx, comp_coords, 0, t)?.saturate(ctx, &full_k)?;
        let rest = Lattice::new(ctx, rest_coords, 0, t)?.saturate(ctx, &full_k)?;
        if comp.rank() != mult || rest.rank() != k - mult {
            return Err(Error::FieldTooSmall(format!(
                "idempotent rank {} does not match multiplicity {mult}",
                comp.rank()
            )));
        }
        components.push(comp.from_coords(ctx, &frame)?);
        frame = rest.from_coords(ctx, &frame)?;
    }
    let mut cols = Mat::zeros(r, 0);
    for c in &components {
        cols = cols.hcat(&c.integral_basis(ctx)?);
    }
    let (binv, a) = matrix::scaled_inverse(ctx, &cols, ctx.precision())?;
    let split = a == 0;
    let mut projectors = Vec::new();
    let mut start = 0;
    for c in &components {
        let mut d = Mat::zeros(r, r);
        for i in start..start + c.rank() {
            d[(i, i)] = ctx.one();
        }
        start += c.rank();
        projectors.push(Projector { mat: cols.mul(ctx, &d).mul(ctx, &binv), denom: a });
    }
    Ok(SlopeData {
        slopes: global.iter().map(|s| s.0).collect(),
        mults: global.iter().map(|s| s.1).collect(),
        projectors,
        components,
        adapted_basis: cols,
        split,
    })
}

/// The matrix `p^{-denom} mat` of a linear map known to be integral.
fn integral_part(ctx: &WittContext, f: &SemilinearMap) -> Result<Mat> {
    if f.denom <= 0 {
        return Ok(f.mat.mul_p_pow(ctx, (-f.denom) as u32));
    }
    let d = f.denom as u32;
    if f.mat.valuation(ctx) < d {
        return Err(Error::precision("slope_split", "restricted operator is not integral"));
    }
    Ok(f.mat.div_p_pow(ctx, d))
}

impl SlopeData {
    pub fn rank(&self) -> usize {
        self.mults.iter().sum()
    }

    /// Precision to which the components, and hence the projector numerators, are known.
    pub fn prec(&self, ctx: &WittContext) -> u32 {
        self.components.iter().map(|c| c.prec()).min().unwrap_or(ctx.precision())
    }

    /// Index in the slope list of a given slope.
    pub fn index_of(&self, a: Q) -> Option<usize> {
        self.slopes.iter().position(|&s| s == a)
    }

    /// `c_α = (1 - α) r_α` and `d_α = α r_α`.
    pub fn hodge_parts(&self, i: usize) -> (Q, Q) {
        let r = Q::from(self.mults[i] as i64);
        ((Q::from(1) - self.slopes[i]) * r, self.slopes[i] * r)
    }

    pub fn expanded(&self) -> Vec<Q> {
        let v: Vec<(Q, usize)> = self.slopes.iter().copied().zip(self.mults.iter().copied()).collect();
        expand_slopes(&v)
    }
}

/// The image in `End(M)[1/p]` of `x ↦ e_j x e_i`, i.e. `Hom(W(α_i), W(α_j))`.
pub fn hom_block_image(ctx: &WittContext, s: &SlopeData, i: usize, j: usize) -> Result<Lattice> {
    let r = s.rank();
    let ei = &s.projectors[i];
    let ej = &s.projectors[j];
    let op = ei.mat.transpose().kron(ctx, &ej.mat);
    let l = Lattice::full(ctx, r * r);
    let f = SemilinearMap::new(ctx, op, 0, (ei.denom + ej.denom) as i32)
        .with_prec(s.prec(ctx).saturating_sub(ei.denom.max(ej.denom)));
    l.apply(ctx, &f)
}

pub fn end_decompose(ctx: &WittContext, _x: &FIsocrystal, s: &SlopeData) -> Result<EndDecomposition> {
    let r = s.rank();
    let end = Lattice::full(ctx, r * r);
    let m = s.slopes.len();
    let mut blocks = Vec::new();
    let (mut plus, mut zero, mut minus) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..m {
        for j in 0..m {
            let img = hom_block_image(ctx, s, i, j)?;
            let sat = img.saturate(ctx, &end)?;
            match s.slopes[j].cmp(&s.slopes[i]) {
                std::cmp::Ordering::Greater => plus.push(img),
                std::cmp::Ordering::Equal => zero.push(img),
                std::cmp::Ordering::Less => minus.push(img),
            }
            blocks.push((i, j, sat));
        }
    }
    let v_plus = Lattice::sum_all(ctx, r * r, &plus)?.saturate(ctx, &end)?;
    let v_zero = Lattice::sum_all(ctx, r * r, &zero)?.saturate(ctx, &end)?;
    let v_minus = Lattice::sum_all(ctx, r * r, &minus)?.saturate(ctx, &end)?;
    Ok(EndDecomposition { blocks, v_plus, v_zero, v_minus })
}

impl EndDecomposition {
    pub fn block(&self, i: usize, j: usize) -> &Lattice {
        &self.blocks.iter().find(|b| b.0 == i && b.1 == j).expect("block exists").2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> Q {
        Q::new(a, b)
    }

    #[test]
    fn ordinary_and_supersingular_slopes() {
        let ctx = WittContext::new(2, 1, 20).unwrap();
        let ord = FIsocrystal::new(&ctx, Mat::from_ints(&ctx, &[vec![1, 0], vec![0, 2]])).unwrap();
        assert_eq!(ord.newton_slopes(&ctx).unwrap(), vec![(q(0, 1), 1), (q(1, 1), 1)]);
        let ss = FIsocrystal::new(&ctx, Mat::from_ints(&ctx, &[vec![0, 2], vec![1, 0]])).unwrap();
        assert_eq!(ss.newton_slopes(&ctx).unwrap(), vec![(q(1, 2), 2)]);
        assert_eq!(ord.dim_codim(&ctx).unwrap(), (1, 1));
        assert_eq!(ss.dim_codim(&ctx).unwrap(), (1, 1));
    }

    #[test]
    fn ordinary_split_projectors() {
        let ctx = WittContext::new(3, 2, 16).unwrap();
        let ord = FIsocrystal::new(&ctx, Mat::from_ints(&ctx, &[vec![1, 1], vec![0, 3]])).unwrap();
        let s = slope_split(&ctx, &ord).unwrap();
        assert!(s.split);
        assert_eq!(s.slopes, vec![q(0, 1), q(1, 1)]);
        let sum = s.projectors[0].mat.add(&ctx, &s.projectors[1].mat);
        assert_eq!(sum, Mat::identity(&ctx, 2));
        let d = end_decompose(&ctx, &ord, &s).unwrap();
        assert_eq!(d.v_minus.rank(), 1);
        assert_eq!(d.v_plus.rank(), 1);
    }

    #[test]
    fn newton_polygon_hull() {
        let poly = newton_polygon(&[Some(3), Some(1), None, Some(0)]);
        assert_eq!(poly, vec![(q(1, 2), 2), (q(2, 1), 1)]);
    }
}
