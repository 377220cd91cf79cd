//! Arithmetic in `W(F_{p^n})` truncated modulo `p^N`.
//!
//! Elements are stored in the power basis `1, g, ..., g^{n-1}` where `g` is a
//! root of a fixed monic lift `f` of an irreducible polynomial over `F_p`. The
//! Frobenius automorphism is the linear map sending `g` to the Hensel lift of
//! the root of `f` congruent to `g^p`.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Largest residue degree supported by the fixed-size coefficient storage.
pub const MAX_DEGREE: usize = 8;

/// An element of the truncated Witt ring. Unused coefficient slots are zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Zq {
    c: [u64; MAX_DEGREE],
}

impl Zq {
    pub const ZERO: Zq = Zq { c: [0; MAX_DEGREE] };

    pub fn coeffs(&self, n: usize) -> &[u64] {
        &self.c[..n]
    }

    pub fn coeff(&self, i: usize) -> u64 {
        self.c[i]
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&x| x == 0)
    }
}

impl fmt::Debug for Zq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.c.iter().rposition(|&x| x != 0).unwrap_or(0);
        write!(f, "{:?}", &self.c[..=last])
    }
}

/// Context for `Z_q = W(F_{p^n}) mod p^N`. Immutable after construction.
#[derive(Clone, Debug)]
pub struct WittContext {
    p: u64,
    n: usize,
    prec: u32,
    modulus: u64,
    pows: Vec<u64>,
    /// Monic defining polynomial, low degree first, length `n + 1`.
    f: Vec<u64>,
    /// `g^k` for `k` in `n..2n-1`, expressed in the power basis.
    reduction: Vec<Zq>,
    frob_image: Zq,
    /// `frob_mats[e][i][j]`: coefficient of `g^i` in `sigma^e(g^j)`.
    frob_mats: Vec<Vec<Vec<u64>>>,
    loss_budget: u32,
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

// Polynomials over F_p as coefficient vectors, low degree first, trimmed.
fn fp_trim(mut a: Vec<u64>) -> Vec<u64> {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

fn fp_inv(a: u64, p: u64) -> u64 {
    let mut r = 1u64;
    let (mut b, mut e) = (a % p, p - 2);
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

fn fp_rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let mut a = a.to_vec();
    let dm = m.len() - 1;
    let lead_inv = fp_inv(m[dm], p);
    while a.len() > dm {
        let top = a.len() - 1;
        let c = a[top] * lead_inv % p;
        if c != 0 {
            for i in 0..=dm {
                let idx = top - dm + i;
                a[idx] = (a[idx] + p * p - c * m[i] % p) % p;
            }
        }
        a.pop();
        a = fp_trim(a);
        if a.len() <= dm {
            break;
        }
    }
    fp_trim(a)
}

fn fp_mulmod(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x * y) % p;
        }
    }
    fp_rem(&fp_trim(out), m, p)
}

fn fp_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let (mut a, mut b) = (fp_trim(a.to_vec()), fp_trim(b.to_vec()));
    while !b.is_empty() {
        let r = fp_rem(&a, &b, p);
        a = b;
        b = r;
    }
    a
}

/// Ben-Or irreducibility test over F_p.
fn fp_irreducible(f: &[u64], p: u64) -> bool {
    let n = f.len() - 1;
    if n == 1 {
        return true;
    }
    let x = vec![0, 1];
    let mut xp = x.clone();
    for _ in 0..n / 2 {
        // xp <- xp^p mod f
        let mut acc = vec![1u64];
        let mut base = xp.clone();
        let mut e = p;
        while e > 0 {
            if e & 1 == 1 {
                acc = fp_mulmod(&acc, &base, f, p);
            }
            base = fp_mulmod(&base, &base, f, p);
            e >>= 1;
        }
        xp = acc;
        let mut diff = xp.clone();
        diff.resize(diff.len().max(2), 0);
        diff[1] = (diff[1] + p - 1) % p;
        let g = fp_gcd(f, &fp_trim(diff), p);
        if g.len() != 1 {
            return false;
        }
    }
    true
}

/// Lexicographically smallest monic irreducible polynomial of degree `n`,
/// comparing coefficient vectors from `x^{n-1}` down to the constant term.
fn smallest_irreducible(p: u64, n: usize) -> Vec<u64> {
    let total = p.pow(n as u32);
    for idx in 0..total {
        // idx written in base p gives (a_{n-1}, ..., a_0), most significant first.
        let mut f = vec![0u64; n + 1];
        f[n] = 1;
        let mut t = idx;
        for i in 0..n {
            f[i] = t % p;
            t /= p;
        }
        if n > 1 && f[0] == 0 {
            continue;
        }
        if fp_irreducible(&f, p) {
            return f;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

impl WittContext {
    pub fn new(p: u64, n: usize, prec: u32) -> Result<WittContext> {
        if !is_prime(p) {
            return Err(Error::InvalidContext(format!("{p} is not prime")));
        }
        if n == 0 || n > MAX_DEGREE {
            return Err(Error::InvalidContext(format!(
                "residue degree {n} outside 1..={MAX_DEGREE}"
            )));
        }
        if prec < 2 {
            return Err(Error::InvalidContext(format!("precision {prec} < 2")));
        }
        let mut pows = vec![1u64];
        for _ in 0..prec {
            let last = *pows.last().unwrap();
            match last.checked_mul(p) {
                Some(v) if v < (1u64 << 62) => pows.push(v),
                _ => {
                    return Err(Error::InvalidContext(format!(
                        "p^N = {p}^{prec} exceeds 2^62"
                    )))
                }
            }
        }
        let modulus = pows[prec as usize];
        let f = smallest_irreducible(p, n);
        let mut ctx = WittContext {
            p,
            n,
            prec,
            modulus,
            pows,
            f,
            reduction: Vec::new(),
            frob_image: Zq::ZERO,
            frob_mats: Vec::new(),
            loss_budget: prec / 2,
        };
        ctx.build_reduction();
        ctx.build_frobenius()?;
        Ok(ctx)
    }

    fn build_reduction(&mut self) {
        let n = self.n;
        // g^n = -(f_0 + ... + f_{n-1} g^{n-1})
        let mut cur = Zq::ZERO;
        for i in 0..n {
            cur.c[i] = (self.modulus - self.f[i] % self.modulus) % self.modulus;
        }
        let mut red = Vec::new();
        if n > 1 {
            red.push(cur);
            for _ in n + 1..2 * n - 1 {
                // multiply by g
                let top = cur.c[n - 1];
                let mut next = Zq::ZERO;
                for i in (1..n).rev() {
                    next.c[i] = cur.c[i - 1];
                }
                for i in 0..n {
                    next.c[i] = self.addm(next.c[i], self.mulm(top, red[0].c[i]));
                }
                red.push(next);
                cur = next;
            }
        }
        self.reduction = red;
    }

    fn build_frobenius(&mut self) -> Result<()> {
        let n = self.n;
        if n == 1 {
            self.frob_image = self.one();
            self.frob_mats = vec![vec![vec![1]]];
            return Ok(());
        }
        let g = self.generator();
        let mut x = self.pow(g, self.p as u128);
        // Newton iteration for the root of f lifting g^p.
        for _ in 0..(2 * 64) {
            let fx = self.eval_f(x, false);
            if fx.is_zero() {
                break;
            }
            let dfx = self.eval_f(x, true);
            let inv = self
                .inv(dfx)
                .ok_or_else(|| Error::InvalidContext("f is not separable mod p".into()))?;
            x = self.sub(x, self.mul(fx, inv));
        }
        if !self.eval_f(x, false).is_zero() {
            return Err(Error::InvalidContext("Hensel lift of Frobenius failed".into()));
        }
        self.frob_image = x;
        // sigma^1 matrix: columns sigma(g^j) = x^j
        let mut one_step = vec![vec![0u64; n]; n];
        let mut xp = self.one();
        for j in 0..n {
            for i in 0..n {
                one_step[i][j] = xp.c[i];
            }
            xp = self.mul(xp, x);
        }
        let mut mats = vec![identity_u64(n)];
        for e in 1..n {
            let prev = &mats[e - 1];
            let mut m = vec![vec![0u64; n]; n];
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0u64;
                    for k in 0..n {
                        acc = self.addm(acc, self.mulm(one_step[i][k], prev[k][j]));
                    }
                    m[i][j] = acc;
                }
            }
            mats.push(m);
        }
        self.frob_mats = mats;
        if self.frobenius(g, n as i64) != g {
            return Err(Error::InvalidContext("sigma^n(g) != g".into()));
        }
        Ok(())
    }

    fn eval_f(&self, x: Zq, derivative: bool) -> Zq {
        let mut acc = Zq::ZERO;
        if derivative {
            for i in (1..=self.n).rev() {
                acc = self.add(self.mul(acc, x), self.from_u64(self.f[i] * i as u64));
            }
        } else {
            for i in (0..=self.n).rev() {
                acc = self.add(self.mul(acc, x), self.from_u64(self.f[i]));
            }
        }
        acc
    }

    /// Lattice operations fail once their precision loss exceeds this budget.
    pub fn with_loss_budget(mut self, budget: u32) -> WittContext {
        self.loss_budget = budget.min(self.prec - 1);
        self
    }
    pub fn loss_budget(&self) -> u32 {
        self.loss_budget
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn degree(&self) -> usize {
        self.n
    }
    pub fn precision(&self) -> u32 {
        self.prec
    }
    pub fn modulus(&self) -> u64 {
        self.modulus
    }
    /// `p^k` as an integer, for `k <= N`.
    pub fn p_pow_int(&self, k: u32) -> u64 {
        self.pows[k as usize]
    }
    /// The defining polynomial, low degree first.
    pub fn defining_poly(&self) -> &[u64] {
        &self.f
    }
    pub fn frob_image(&self) -> Zq {
        self.frob_image
    }
    /// Size of the residue field.
    pub fn residue_size(&self) -> u128 {
        (self.p as u128).pow(self.n as u32)
    }

    #[inline]
    fn addm(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.modulus {
            s - self.modulus
        } else {
            s
        }
    }
    #[inline]
    fn subm(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.modulus - b
        }
    }
    #[inline]
    fn mulm(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.modulus as u128) as u64
    }

    pub fn zero(&self) -> Zq {
        Zq::ZERO
    }
    pub fn one(&self) -> Zq {
        self.from_u64(1)
    }
    pub fn generator(&self) -> Zq {
        if self.n == 1 {
            // g is a root of the linear polynomial x + f_0.
            return self.neg(self.from_u64(self.f[0]));
        }
        let mut z = Zq::ZERO;
        z.c[1] = 1;
        z
    }
    pub fn from_u64(&self, v: u64) -> Zq {
        let mut z = Zq::ZERO;
        z.c[0] = v % self.modulus;
        z
    }
    pub fn from_i64(&self, v: i64) -> Zq {
        let m = self.modulus as i128;
        let r = (v as i128).rem_euclid(m) as u64;
        let mut z = Zq::ZERO;
        z.c[0] = r;
        z
    }
    /// Builds a scalar from power-basis coefficients (extra coefficients must be absent).
    pub fn from_coeffs(&self, coeffs: &[i64]) -> Result<Zq> {
        if coeffs.len() > self.n {
            return Err(Error::Shape(format!(
                "scalar has {} coefficients, residue degree is {}",
                coeffs.len(),
                self.n
            )));
        }
        let m = self.modulus as i128;
        let mut z = Zq::ZERO;
        for (i, &c) in coeffs.iter().enumerate() {
            z.c[i] = (c as i128).rem_euclid(m) as u64;
        }
        Ok(z)
    }
    /// Coefficients as signed integers in the symmetric range, for display.
    pub fn signed_coeffs(&self, a: Zq) -> Vec<i64> {
        (0..self.n)
            .map(|i| {
                let c = a.c[i];
                if c > self.modulus / 2 {
                    -((self.modulus - c) as i64)
                } else {
                    c as i64
                }
            })
            .collect()
    }

    pub fn add(&self, a: Zq, b: Zq) -> Zq {
        let mut z = Zq::ZERO;
        for i in 0..self.n {
            z.c[i] = self.addm(a.c[i], b.c[i]);
        }
        z
    }
    pub fn sub(&self, a: Zq, b: Zq) -> Zq {
        let mut z = Zq::ZERO;
        for i in 0..self.n {
            z.c[i] = self.subm(a.c[i], b.c[i]);
        }
        z
    }
    pub fn neg(&self, a: Zq) -> Zq {
        self.sub(Zq::ZERO, a)
    }
    pub fn mul(&self, a: Zq, b: Zq) -> Zq {
        let n = self.n;
        if n == 1 {
            let mut z = Zq::ZERO;
            z.c[0] = self.mulm(a.c[0], b.c[0]);
            return z;
        }
        let m = self.modulus as u128;
        let mut t = [0u128; 2 * MAX_DEGREE];
        for i in 0..n {
            if a.c[i] == 0 {
                continue;
            }
            for j in 0..n {
                t[i + j] += (a.c[i] as u128 * b.c[j] as u128) % m;
            }
        }
        let mut z = Zq::ZERO;
        for i in 0..n {
            z.c[i] = (t[i] % m) as u64;
        }
        for k in n..2 * n - 1 {
            let hi = (t[k] % m) as u64;
            if hi == 0 {
                continue;
            }
            let red = &self.reduction[k - n];
            for i in 0..n {
                z.c[i] = self.addm(z.c[i], self.mulm(hi, red.c[i]));
            }
        }
        z
    }
    /// Multiplication by an integer.
    pub fn scale_int(&self, a: Zq, k: i64) -> Zq {
        self.mul(a, self.from_i64(k))
    }
    pub fn pow(&self, a: Zq, mut e: u128) -> Zq {
        let mut acc = self.one();
        let mut b = a;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        acc
    }
    pub fn p_pow(&self, k: u32) -> Zq {
        if k >= self.prec {
            Zq::ZERO
        } else {
            self.from_u64(self.pows[k as usize])
        }
    }
    pub fn mul_p_pow(&self, a: Zq, k: u32) -> Zq {
        if k == 0 {
            return a;
        }
        if k >= self.prec {
            return Zq::ZERO;
        }
        let mut z = Zq::ZERO;
        for i in 0..self.n {
            z.c[i] = self.mulm(a.c[i], self.pows[k as usize]);
        }
        z
    }

    /// `sigma^e(a)`, exponent taken modulo `n`.
    pub fn frobenius(&self, a: Zq, e: i64) -> Zq {
        let n = self.n;
        if n == 1 {
            return a;
        }
        let e = e.rem_euclid(n as i64) as usize;
        if e == 0 {
            return a;
        }
        let m = &self.frob_mats[e];
        let mut z = Zq::ZERO;
        for i in 0..n {
            let mut acc = 0u64;
            for j in 0..n {
                if a.c[j] != 0 {
                    acc = self.addm(acc, self.mulm(m[i][j], a.c[j]));
                }
            }
            z.c[i] = acc;
        }
        z
    }

    /// Largest `v <= N` with `a = 0 mod p^v`; `N` stands for "at least N".
    pub fn valuation(&self, a: Zq) -> u32 {
        let mut best = self.prec;
        for i in 0..self.n {
            let mut c = a.c[i];
            if c == 0 {
                continue;
            }
            let mut v = 0;
            while c % self.p == 0 {
                c /= self.p;
                v += 1;
            }
            best = best.min(v);
            if best == 0 {
                break;
            }
        }
        best
    }

    pub fn is_unit(&self, a: Zq) -> bool {
        self.valuation(a) == 0
    }

    /// Exact division by `p^v`; the caller guarantees divisibility.
    pub fn div_p_pow(&self, a: Zq, v: u32) -> Zq {
        if v == 0 {
            return a;
        }
        let d = self.pows[v as usize];
        let mut z = Zq::ZERO;
        for i in 0..self.n {
            debug_assert!(a.c[i] % d == 0);
            z.c[i] = a.c[i] / d;
        }
        z
    }

    /// Splits `a = p^v * u` with `u` reduced below `p^(N-v)`. Returns `None` for zero.
    pub fn split_p_power(&self, a: Zq) -> Option<(u32, Zq)> {
        let v = self.valuation(a);
        if v >= self.prec {
            None
        } else {
            Some((v, self.div_p_pow(a, v)))
        }
    }

    /// Coefficient-wise reduction modulo `p^k`.
    pub fn reduce_mod_p_pow(&self, a: Zq, k: u32) -> Zq {
        if k >= self.prec {
            return a;
        }
        let d = self.pows[k as usize];
        let mut z = Zq::ZERO;
        for i in 0..self.n {
            z.c[i] = a.c[i] % d;
        }
        z
    }

    /// Coefficient-wise quotient by `p^k` (floor), used for canonical reduction.
    pub fn quot_p_pow(&self, a: Zq, k: u32) -> Zq {
        let d = self.pows[k as usize];
        let mut z = Zq::ZERO;
        for i in 0..self.n {
            z.c[i] = a.c[i] / d;
        }
        z
    }

    /// Multiplicative inverse of a unit.
    pub fn inv(&self, a: Zq) -> Option<Zq> {
        if !self.is_unit(a) {
            return None;
        }
        if self.n == 1 {
            let (mut r0, mut r1) = (self.modulus as i128, a.c[0] as i128);
            let (mut s0, mut s1) = (0i128, 1i128);
            while r1 != 0 {
                let q = r0 / r1;
                (r0, r1) = (r1, r0 - q * r1);
                (s0, s1) = (s1, s0 - q * s1);
            }
            return Some(self.from_i64(s0.rem_euclid(self.modulus as i128) as i64));
        }
        // a^(q-2) inverts a modulo p; Newton steps lift the inverse.
        let q = self.residue_size();
        let mut x = self.pow(a, q - 2);
        let two = self.from_u64(2);
        let mut good = 1u32;
        while good < self.prec {
            x = self.mul(x, self.sub(two, self.mul(a, x)));
            good *= 2;
        }
        debug_assert_eq!(self.mul(a, x), self.one());
        Some(x)
    }

    /// Reduction modulo p as a residue-field element (coefficients in `[0, p)`).
    pub fn residue(&self, a: Zq) -> Zq {
        self.reduce_mod_p_pow(a, 1)
    }

    /// The Teichmuller lift of the residue class of `c`.
    pub fn teichmuller(&self, c: Zq) -> Zq {
        let q = self.residue_size();
        let mut x = self.residue(c);
        for _ in 0..=self.prec + 1 {
            let next = self.pow(x, q);
            if next == x {
                break;
            }
            x = next;
        }
        x
    }

    pub fn random(&self, rng: &mut impl Rng) -> Zq {
        let mut z = Zq::ZERO;
        for i in 0..self.n {
            z.c[i] = rng.gen_range(0..self.modulus);
        }
        z
    }

    pub fn random_residue(&self, rng: &mut impl Rng) -> Zq {
        let mut z = Zq::ZERO;
        for i in 0..self.n {
            z.c[i] = rng.gen_range(0..self.p);
        }
        z
    }

    pub fn random_unit(&self, rng: &mut impl Rng) -> Zq {
        loop {
            let z = self.random(rng);
            if self.is_unit(z) {
                return z;
            }
        }
    }
}

fn identity_u64(n: usize) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1;
    }
    m
}
