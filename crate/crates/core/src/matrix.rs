//! Dense matrices over `Z_q` and elimination by minimal-valuation pivoting.

use rand::Rng;

use crate::error::{Error, Result};
use crate::witt::{WittContext, Zq};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Zq>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![Zq::ZERO; rows * cols] }
    }

    pub fn identity(ctx: &WittContext, n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ctx.one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Zq) -> Mat {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_ints(ctx: &WittContext, rows: &[Vec<i64>]) -> Mat {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        Mat::from_fn(r, c, |i, j| ctx.from_i64(rows[i][j]))
    }

    pub fn diag(ctx: &WittContext, entries: &[Zq]) -> Mat {
        let n = entries.len();
        let mut m = Mat::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        let _ = ctx;
        m
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn col(&self, j: usize) -> Vec<Zq> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> Vec<Zq> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn from_cols(rows: usize, cols: &[Vec<Zq>]) -> Mat {
        Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
    }

    pub fn select_cols(&self, idx: &[usize]) -> Mat {
        Mat::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }

    pub fn select_rows(&self, idx: &[usize]) -> Mat {
        Mat::from_fn(idx.len(), self.cols, |i, j| self[(idx[i], j)])
    }

    pub fn col_range(&self, start: usize, end: usize) -> Mat {
        Mat::from_fn(self.rows, end - start, |i, j| self[(i, start + j)])
    }

    pub fn row_range(&self, start: usize, end: usize) -> Mat {
        Mat::from_fn(end - start, self.cols, |i, j| self[(start + i, j)])
    }

    pub fn hcat(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows);
        Mat::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        })
    }

    pub fn vcat(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols);
        Mat::from_fn(self.rows + other.rows, self.cols, |i, j| {
            if i < self.rows {
                self[(i, j)]
            } else {
                other[(i - self.rows, j)]
            }
        })
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(Zq) -> Zq) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn add(&self, ctx: &WittContext, o: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(&a, &b)| ctx.add(a, b)).collect(),
        }
    }

    pub fn sub(&self, ctx: &WittContext, o: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(&a, &b)| ctx.sub(a, b)).collect(),
        }
    }

    pub fn neg(&self, ctx: &WittContext) -> Mat {
        self.map(|x| ctx.neg(x))
    }

    pub fn scale(&self, ctx: &WittContext, s: Zq) -> Mat {
        self.map(|x| ctx.mul(x, s))
    }

    pub fn mul_p_pow(&self, ctx: &WittContext, k: u32) -> Mat {
        self.map(|x| ctx.mul_p_pow(x, k))
    }

    /// Exact division by `p^k`; entries must be divisible.
    pub fn div_p_pow(&self, ctx: &WittContext, k: u32) -> Mat {
        self.map(|x| ctx.div_p_pow(x, k))
    }

    pub fn frobenius(&self, ctx: &WittContext, e: i64) -> Mat {
        if ctx.degree() == 1 || e.rem_euclid(ctx.degree() as i64) == 0 {
            return self.clone();
        }
        self.map(|x| ctx.frobenius(x, e))
    }

    pub fn reduce_mod_p_pow(&self, ctx: &WittContext, k: u32) -> Mat {
        self.map(|x| ctx.reduce_mod_p_pow(x, k))
    }

    pub fn mul(&self, ctx: &WittContext, o: &Mat) -> Mat {
        assert_eq!(self.cols, o.rows, "matrix product shape");
        let mut out = Mat::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = o[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] = ctx.add(out[(i, j)], ctx.mul(a, b));
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, ctx: &WittContext, v: &[Zq]) -> Vec<Zq> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = ctx.zero();
                for (k, &x) in v.iter().enumerate() {
                    acc = ctx.add(acc, ctx.mul(self[(i, k)], x));
                }
                acc
            })
            .collect()
    }

    /// Kronecker product `self ⊗ o`.
    pub fn kron(&self, ctx: &WittContext, o: &Mat) -> Mat {
        Mat::from_fn(self.rows * o.rows, self.cols * o.cols, |i, j| {
            ctx.mul(self[(i / o.rows, j / o.cols)], o[(i % o.rows, j % o.cols)])
        })
    }

    pub fn trace(&self, ctx: &WittContext) -> Zq {
        let mut t = ctx.zero();
        for i in 0..self.rows.min(self.cols) {
            t = ctx.add(t, self[(i, i)]);
        }
        t
    }

    /// Minimal valuation over all entries (`N` for the zero matrix).
    pub fn valuation(&self, ctx: &WittContext) -> u32 {
        self.data.iter().map(|&x| ctx.valuation(x)).min().unwrap_or(ctx.precision())
    }

    /// Column-major vectorization.
    pub fn vec_cols(&self) -> Vec<Zq> {
        let mut v = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                v.push(self[(i, j)]);
            }
        }
        v
    }

    pub fn unvec_cols(v: &[Zq], rows: usize, cols: usize) -> Mat {
        assert_eq!(v.len(), rows * cols);
        Mat::from_fn(rows, cols, |i, j| v[j * rows + i])
    }

    pub fn pow(&self, ctx: &WittContext, mut e: u128) -> Mat {
        let mut acc = Mat::identity(ctx, self.rows);
        let mut b = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(ctx, &b);
            }
            e >>= 1;
            if e > 0 {
                b = b.mul(ctx, &b);
            }
        }
        acc
    }

    pub fn random(ctx: &WittContext, rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
        Mat::from_fn(rows, cols, |_, _| ctx.random(rng))
    }

    /// A random matrix invertible over `Z_q`.
    pub fn random_unimodular(ctx: &WittContext, n: usize, rng: &mut impl Rng) -> Mat {
        loop {
            let m = Mat::random(ctx, n, n, rng);
            if rank_mod_p(ctx, &m) == n {
                return m;
            }
        }
    }

    /// Rows and columns equal modulo `p^k`.
    pub fn eq_mod(&self, ctx: &WittContext, o: &Mat, k: u32) -> bool {
        (self.rows, self.cols) == (o.rows, o.cols)
            && self.sub(ctx, o).valuation(ctx) >= k.min(ctx.precision())
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = Zq;
    fn index(&self, (i, j): (usize, usize)) -> &Zq {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Zq {
        &mut self.data[i * self.cols + j]
    }
}

/// Result of full-pivot elimination `P A Q = D`.
///
/// `D` has `p^{v_i}` in its first `rank` diagonal slots and entries of
/// valuation at least the threshold in the trailing block. Row operations
/// were also applied to the companion matrix, giving `P Y`.
#[derive(Clone, Debug)]
pub struct Elimination {
    pub rank: usize,
    pub divisors: Vec<u32>,
    pub q: Option<Mat>,
    pub companion: Option<Mat>,
    /// The reduced working matrix `P A Q`.
    pub reduced: Mat,
}

pub fn eliminate(
    ctx: &WittContext,
    a: &Mat,
    threshold: u32,
    track_q: bool,
    companion: Option<&Mat>,
) -> Elimination {
    let (m, n) = (a.rows, a.cols);
    let mut w = a.clone();
    let mut q = if track_q { Some(Mat::identity(ctx, n)) } else { None };
    let mut y = companion.cloned();
    if let Some(y) = &y {
        assert_eq!(y.rows, m, "companion must share the row count");
    }
    let mut divisors = Vec::new();
    let mut k = 0;
    while k < m.min(n) {
        let mut best = (threshold, 0, 0);
        'search: for i in k..m {
            for j in k..n {
                let v = ctx.valuation(w[(i, j)]);
                if v < best.0 {
                    best = (v, i, j);
                    if v == 0 {
                        break 'search;
                    }
                }
            }
        }
        let (v, pi, pj) = best;
        if v >= threshold {
            break;
        }
        swap_rows(&mut w, k, pi);
        if let Some(y) = &mut y {
            swap_rows(y, k, pi);
        }
        swap_cols(&mut w, k, pj);
        if let Some(q) = &mut q {
            swap_cols(q, k, pj);
        }
        let unit = ctx.div_p_pow(w[(k, k)], v);
        let uinv = ctx.inv(unit).expect("pivot unit part is invertible");
        scale_row(ctx, &mut w, k, uinv);
        if let Some(y) = &mut y {
            scale_row(ctx, y, k, uinv);
        }
        // The pivot is now p^v modulo p^N, up to garbage above p^(N-v) which we clear.
        w[(k, k)] = ctx.p_pow(v);
        for i in k + 1..m {
            let e = w[(i, k)];
            if e.is_zero() {
                continue;
            }
            let c = ctx.div_p_pow(e, v);
            row_axpy(ctx, &mut w, i, k, c, k);
            if let Some(y) = &mut y {
                row_axpy(ctx, y, i, k, c, 0);
            }
            w[(i, k)] = ctx.zero();
        }
        for j in k + 1..n {
            let e = w[(k, j)];
            if e.is_zero() {
                continue;
            }
            let c = ctx.div_p_pow(e, v);
            // Column k of w is p^v e_k at this point, so only w[k][j] changes.
            w[(k, j)] = ctx.zero();
            if let Some(q) = &mut q {
                col_axpy(ctx, q, j, k, c);
            }
        }
        divisors.push(v);
        k += 1;
    }
    Elimination { rank: k, divisors, q, companion: y, reduced: w }
}

fn swap_rows(m: &mut Mat, a: usize, b: usize) {
    if a == b {
        return;
    }
    for j in 0..m.cols {
        m.data.swap(a * m.cols + j, b * m.cols + j);
    }
}

fn swap_cols(m: &mut Mat, a: usize, b: usize) {
    if a == b {
        return;
    }
    for i in 0..m.rows {
        m.data.swap(i * m.cols + a, i * m.cols + b);
    }
}

fn scale_row(ctx: &WittContext, m: &mut Mat, i: usize, s: Zq) {
    for j in 0..m.cols {
        m[(i, j)] = ctx.mul(m[(i, j)], s);
    }
}

/// row_i -= c * row_k, starting at column `from`.
fn row_axpy(ctx: &WittContext, m: &mut Mat, i: usize, k: usize, c: Zq, from: usize) {
    for j in from..m.cols {
        let x = m[(k, j)];
        if !x.is_zero() {
            m[(i, j)] = ctx.sub(m[(i, j)], ctx.mul(c, x));
        }
    }
}

/// col_j -= c * col_k.
fn col_axpy(ctx: &WittContext, m: &mut Mat, j: usize, k: usize, c: Zq) {
    for i in 0..m.rows {
        let x = m[(i, k)];
        if !x.is_zero() {
            m[(i, j)] = ctx.sub(m[(i, j)], ctx.mul(c, x));
        }
    }
}

/// Rank of the reduction modulo p.
pub fn rank_mod_p(ctx: &WittContext, a: &Mat) -> usize {
    eliminate(ctx, a, 1, false, None).rank
}

/// Rank at precision threshold `t` (pivots of valuation `< t`).
pub fn rank_at(ctx: &WittContext, a: &Mat, t: u32) -> usize {
    eliminate(ctx, a, t, false, None).rank
}

/// Elementary divisor valuations of `a`, ignoring those at or above `t`.
pub fn elementary_divisors(ctx: &WittContext, a: &Mat, t: u32) -> Vec<u32> {
    let mut d = eliminate(ctx, a, t, false, None).divisors;
    d.sort_unstable();
    d
}

/// Saturated basis of `{x : A x ≡ 0 mod p^t}` modulo torsion, as columns.
pub fn kernel(ctx: &WittContext, a: &Mat, t: u32) -> Mat {
    let el = eliminate(ctx, a, t, true, None);
    let q = el.q.unwrap();
    q.col_range(el.rank, a.cols)
}

/// Solution of `A C = Y` returned with the maximum pivot valuation used.
///
/// The answer is meaningful modulo `p^(t - loss)`. Fails with
/// `InclusionViolated` when no integral solution exists at that precision.
pub fn solve(ctx: &WittContext, a: &Mat, y: &Mat, t: u32) -> Result<(Mat, u32)> {
    let el = eliminate(ctx, a, t, true, Some(y));
    let q = el.q.unwrap();
    let py = el.companion.unwrap();
    let loss = el.divisors.iter().copied().max().unwrap_or(0);
    let mut z = Mat::zeros(a.cols, y.cols);
    for (i, &v) in el.divisors.iter().enumerate() {
        for j in 0..y.cols {
            let e = ctx.reduce_mod_p_pow(py[(i, j)], t);
            if ctx.valuation(e) < v {
                return Err(Error::InclusionViolated(format!(
                    "right-hand side column {j} is not in the image (needs p^{v})"
                )));
            }
            z[(i, j)] = ctx.div_p_pow(e, v);
        }
    }
    for i in el.rank..a.rows {
        for j in 0..y.cols {
            if ctx.valuation(py[(i, j)]) < t.saturating_sub(loss) {
                return Err(Error::InclusionViolated(format!(
                    "right-hand side column {j} leaves the column span"
                )));
            }
        }
    }
    Ok((q.mul(ctx, &z), loss))
}

/// For square `a` of full rank at threshold `t`: returns `(B, e)` with
/// `A B = B A = p^e I`, where `e` is the largest elementary divisor.
pub fn scaled_inverse(ctx: &WittContext, a: &Mat, t: u32) -> Result<(Mat, u32)> {
    assert!(a.is_square());
    let n = a.rows;
    let el = eliminate(ctx, a, t, true, Some(&Mat::identity(ctx, n)));
    if el.rank < n {
        return Err(Error::SingularMap(format!("rank {} < {n} at precision {t}", el.rank)));
    }
    let e = el.divisors.iter().copied().max().unwrap_or(0);
    let mut z = el.companion.unwrap();
    for (i, &v) in el.divisors.iter().enumerate() {
        for j in 0..n {
            z[(i, j)] = ctx.mul_p_pow(z[(i, j)], e - v);
        }
    }
    Ok((el.q.unwrap().mul(ctx, &z), e))
}

/// Inverse over `Z_q`; fails unless the matrix is invertible modulo p.
pub fn inverse_unimodular(ctx: &WittContext, a: &Mat) -> Result<Mat> {
    let (b, e) = scaled_inverse(ctx, a, 1)?;
    debug_assert_eq!(e, 0);
    Ok(b)
}

/// Characteristic polynomial `det(λ - A)`, coefficients from the constant term up.
/// Division free, so exact modulo `p^N`.
pub fn charpoly(ctx: &WittContext, a: &Mat) -> Vec<Zq> {
    assert!(a.is_square());
    let n = a.rows;
    if n == 0 {
        return vec![ctx.one()];
    }
    // highest degree first
    let mut poly = vec![ctx.one(), ctx.neg(a[(n - 1, n - 1)])];
    for k in (0..n - 1).rev() {
        let m = n - 1 - k;
        let mut t = vec![ctx.one(), ctx.neg(a[(k, k)])];
        // power = A1^j C
        let mut vecp: Vec<Zq> = (0..m).map(|i| a[(k + 1 + i, k)]).collect();
        for _ in 0..m {
            let mut dot = ctx.zero();
            for (i, &x) in vecp.iter().enumerate() {
                dot = ctx.add(dot, ctx.mul(a[(k, k + 1 + i)], x));
            }
            t.push(ctx.neg(dot));
            let mut next = vec![ctx.zero(); m];
            for (r, nx) in next.iter_mut().enumerate() {
                let mut acc = ctx.zero();
                for (c, &x) in vecp.iter().enumerate() {
                    acc = ctx.add(acc, ctx.mul(a[(k + 1 + r, k + 1 + c)], x));
                }
                *nx = acc;
            }
            vecp = next;
        }
        let mut new_poly = vec![ctx.zero(); m + 2];
        for (i, np) in new_poly.iter_mut().enumerate() {
            let mut acc = ctx.zero();
            for j in 0..=m {
                if i >= j && i - j < t.len() {
                    acc = ctx.add(acc, ctx.mul(t[i - j], poly[j]));
                }
            }
            *np = acc;
        }
        poly = new_poly;
    }
    poly.reverse();
    poly
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_of_rank_one() {
        let ctx = WittContext::new(3, 1, 10).unwrap();
        let a = Mat::from_ints(&ctx, &[vec![1, 2], vec![3, 6]]);
        let k = kernel(&ctx, &a, 10);
        assert_eq!(k.cols, 1);
        assert!(a.mul(&ctx, &k).is_zero());
        assert_eq!(crate::matrix::rank_mod_p(&ctx, &k), 1);
    }

    #[test]
    fn scaled_inverse_identity() {
        let ctx = WittContext::new(2, 2, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a = Mat::random(&ctx, 4, 4, &mut rng);
            if let Ok((b, e)) = scaled_inverse(&ctx, &a, 12) {
                let pe = Mat::identity(&ctx, 4).mul_p_pow(&ctx, e);
                assert!(a.mul(&ctx, &b).eq_mod(&ctx, &pe, 12 - e));
                assert!(b.mul(&ctx, &a).eq_mod(&ctx, &pe, 12 - e));
            }
        }
    }

    #[test]
    fn solve_consistent_system() {
        let ctx = WittContext::new(5, 1, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = Mat::random(&ctx, 4, 3, &mut rng);
        let x = Mat::random(&ctx, 3, 2, &mut rng);
        let y = a.mul(&ctx, &x);
        let (c, loss) = solve(&ctx, &a, &y, 10).unwrap();
        assert!(a.mul(&ctx, &c).eq_mod(&ctx, &y, 10 - loss));
    }

    #[test]
    fn charpoly_small() {
        let ctx = WittContext::new(7, 1, 6).unwrap();
        let a = Mat::from_ints(&ctx, &[vec![1, 2, 0], vec![3, 4, 1], vec![0, 5, 6]]);
        let cp = charpoly(&ctx, &a);
        // det(l - A) = l^3 - 11 l^2 + 23 l + 17 by cofactor expansion
        let want: Vec<Zq> = [17, 23, -11, 1].iter().map(|&v| ctx.from_i64(v)).collect();
        assert_eq!(cp, want);
    }

    #[test]
    fn elementary_divisors_diagonal() {
        let ctx = WittContext::new(2, 1, 10).unwrap();
        let a = Mat::from_ints(&ctx, &[vec![4, 0], vec![0, 6]]);
        assert_eq!(elementary_divisors(&ctx, &a, 10), vec![1, 2]);
    }
}
