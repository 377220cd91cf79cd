//! Builders for Dieudonné modules with prescribed slopes.

use num_integer::Integer;
use rand::Rng;

use crate::isocrystal::Q;
use crate::matrix::Mat;
use crate::witt::WittContext;

/// Cyclic Frobenius of slope `a/b` on a basis of size `b`:
/// `φ(e_i) = p^{ε_i} e_{i+1}` with `Σ ε_i = a`, each `ε_i ∈ {0, 1}`.
pub fn isoclinic_block(ctx: &WittContext, slope: Q) -> Mat {
    let (a, b) = (*slope.numer(), *slope.denom());
    assert!(0 <= a && a <= b && a.gcd(&b) == 1, "slope must be a reduced fraction in [0, 1]");
    let b = b as usize;
    let mut m = Mat::zeros(b, b);
    for i in 0..b {
        let eps = ((i as i64 + 1) * a) / b as i64 - (i as i64 * a) / b as i64;
        m[((i + 1) % b, i)] = ctx.p_pow(eps as u32);
    }
    m
}

pub fn block_diagonal(blocks: &[Mat]) -> Mat {
    let n: usize = blocks.iter().map(|b| b.rows).sum();
    let mut m = Mat::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        for i in 0..b.rows {
            for j in 0..b.cols {
                m[(off + i, off + j)] = b[(i, j)];
            }
        }
        off += b.rows;
    }
    m
}

/// Frobenius matrix in the basis given by the columns of `u`: `u^{-1} A σ(u)`.
pub fn change_basis(ctx: &WittContext, a: &Mat, u: &Mat) -> Mat {
    let uinv = crate::matrix::inverse_unimodular(ctx, u).expect("unimodular change of basis");
    uinv.mul(ctx, a).mul(ctx, &u.frobenius(ctx, 1))
}

/// Direct sum of isoclinic blocks with slopes drawn from `choices`, total
/// rank at most `max_rank`, at least two distinct slopes, in a random basis.
pub fn random_split_instance(
    ctx: &WittContext,
    rng: &mut impl Rng,
    choices: &[Q],
    max_rank: usize,
) -> (Mat, Vec<Q>) {
    loop {
        let mut slopes = Vec::new();
        let mut rank = 0;
        loop {
            let s = choices[rng.gen_range(0..choices.len())];
            let b = *s.denom() as usize;
            if rank + b > max_rank {
                break;
            }
            rank += b;
            slopes.push(s);
            if rng.gen_bool(0.3) {
                break;
            }
        }
        slopes.sort();
        let distinct = slopes.windows(2).filter(|w| w[0] != w[1]).count() + 1;
        if slopes.len() < 2 || distinct < 2 {
            continue;
        }
        let blocks: Vec<Mat> = slopes.iter().map(|&s| isoclinic_block(ctx, s)).collect();
        let a = block_diagonal(&blocks);
        let u = Mat::random_unimodular(ctx, rank, rng);
        return (change_basis(ctx, &a, &u), slopes);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isocrystal::FIsocrystal;
    use rand::SeedableRng;

    #[test]
    fn blocks_have_requested_slopes() {
        let ctx = WittContext::new(3, 2, 20).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let choices = [Q::new(0, 1), Q::new(1, 3), Q::new(1, 2), Q::new(2, 3), Q::new(1, 1)];
        for _ in 0..5 {
            let (a, slopes) = random_split_instance(&ctx, &mut rng, &choices, 10);
            let x = FIsocrystal::new(&ctx, a).unwrap();
            assert!(x.is_dieudonne(&ctx).unwrap());
            let got: Vec<Q> = crate::isocrystal::expand_slopes(&x.newton_slopes(&ctx).unwrap());
            let mut want = Vec::new();
            for s in slopes {
                for _ in 0..*s.denom() {
                    want.push(s);
                }
            }
            assert_eq!(got, want);
        }
    }
}
