//! Exact arithmetic in `F_p` and `F_{p^m}` (`m <= 4`), plus enumeration of `SL(2, F_q)`.
//!
//! Elements are stored as small integer codes: the little-endian coefficient
//! vector in the modulus root, read as a base-`p` number. Multiplication,
//! inversion and powers go through discrete log tables built once per field;
//! addition in extension fields uses Zech logarithms.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

/// Largest supported characteristic.
pub const MAX_P: u32 = 31;
/// Largest supported extension degree.
pub const MAX_M: u32 = 4;
/// Default ceiling on the number of group elements an enumeration may produce.
pub const DEFAULT_ENUM_BUDGET: u64 = 1_000_000;

const NONE: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("enumeration needs {needed} elements, budget is {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("unsupported field: {0}")]
    Unsupported(String),
    #[error("modulus {modulus:?} is reducible over F_{p}")]
    Reducible { p: u32, modulus: Vec<u32> },
}

/// An element of a finite field, as an integer code relative to its [`FieldCtx`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct FqElem(u32);

impl FqElem {
    pub const ZERO: FqElem = FqElem(0);
    pub const ONE: FqElem = FqElem(1);

    pub fn code(self) -> u32 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// The element with code `i`; the caller guarantees `i < q`.
    pub(crate) fn from_index(i: usize) -> FqElem {
        FqElem(i as u32)
    }
}

/// A 2x2 matrix `(a, b, c, d)` read row by row.
pub type Sl2 = [FqElem; 4];

struct Inner {
    p: u32,
    m: u32,
    q: u32,
    modulus: Option<Vec<u32>>,
    gen: u32,
    exp: Vec<u32>,
    log: Vec<u32>,
    zech: Vec<u32>,
}

/// A finite field `F_q`, `q = p^m`. Cheap to clone; immutable after construction.
#[derive(Clone)]
pub struct FieldCtx(Arc<Inner>);

impl PartialEq for FieldCtx {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.p == other.0.p && self.0.m == other.0.m && self.0.modulus == other.0.modulus)
    }
}

impl Eq for FieldCtx {}

impl fmt::Debug for FieldCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.0.q)?;
        if let Some(m) = &self.0.modulus {
            write!(f, " mod {m:?}")?;
        }
        Ok(())
    }
}

fn is_prime(p: u32) -> bool {
    p >= 2 && (2..p).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

fn poly_rem(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
    // b is monic
    let mut r: Vec<u32> = a.to_vec();
    let db = b.len() - 1;
    while r.len() > db {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - db;
        if lead != 0 {
            for (i, &bc) in b.iter().enumerate() {
                let idx = shift + i;
                r[idx] = (r[idx] + p - (lead * bc) % p) % p;
            }
        }
        r.pop();
    }
    r
}

/// True when the monic polynomial `f` (little-endian, degree <= 4) has no factor
/// of degree between 1 and `deg f / 2`.
pub fn is_irreducible(f: &[u32], p: u32) -> bool {
    let deg = f.len() - 1;
    if deg == 0 {
        return false;
    }
    for k in 1..=deg / 2 {
        let count = (p as u64).pow(k as u32);
        for code in 0..count {
            let mut g = Vec::with_capacity(k + 1);
            let mut c = code;
            for _ in 0..k {
                g.push((c % p as u64) as u32);
                c /= p as u64;
            }
            g.push(1);
            if poly_rem(f, &g, p).iter().all(|&x| x == 0) {
                return false;
            }
        }
    }
    true
}

/// The modulus used when none is supplied: the first monic irreducible polynomial
/// of degree `m`, scanning lower coefficients as a little-endian base-`p` counter.
/// For `m = 2` this yields `x^2+x+1`, `x^2+1`, `x^2+2` over `F_2`, `F_3`, `F_5`.
pub fn default_modulus(p: u32, m: u32) -> Vec<u32> {
    let count = (p as u64).pow(m);
    for code in 0..count {
        let mut f = Vec::with_capacity(m as usize + 1);
        let mut c = code;
        for _ in 0..m {
            f.push((c % p as u64) as u32);
            c /= p as u64;
        }
        f.push(1);
        if is_irreducible(&f, p) {
            return f;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

fn digits(code: u32, p: u32, m: u32) -> Vec<u32> {
    let mut c = code;
    (0..m)
        .map(|_| {
            let d = c % p;
            c /= p;
            d
        })
        .collect()
}

fn undigits(ds: &[u32], p: u32) -> u32 {
    ds.iter().rev().fold(0, |acc, &d| acc * p + d)
}

fn slow_mul(x: u32, y: u32, p: u32, modulus: &[u32]) -> u32 {
    let m = (modulus.len() - 1) as u32;
    let a = digits(x, p, m);
    let b = digits(y, p, m);
    let mut prod = vec![0u32; 2 * m as usize];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + ai * bj) % p;
        }
    }
    let r = poly_rem(&prod, modulus, p);
    let mut r = r;
    r.resize(m as usize, 0);
    undigits(&r, p)
}

impl FieldCtx {
    /// `F_{p^m}` with the default modulus.
    pub fn new(p: u32, m: u32) -> Result<Self, FieldError> {
        if m == 0 || m > MAX_M {
            return Err(FieldError::Unsupported(format!("extension degree {m} (allowed 1..={MAX_M})")));
        }
        if m == 1 {
            return Self::build(p, 1, None);
        }
        if !is_prime(p) || p > MAX_P {
            return Err(FieldError::Unsupported(format!("characteristic {p}")));
        }
        Self::build(p, m, Some(default_modulus(p, m)))
    }

    /// The prime field `F_p`.
    pub fn prime(p: u32) -> Result<Self, FieldError> {
        Self::new(p, 1)
    }

    /// `F_p[x]/(modulus)`; `modulus` is monic, little-endian, and must be irreducible.
    pub fn with_modulus(p: u32, modulus: Vec<u32>) -> Result<Self, FieldError> {
        let m = modulus.len().saturating_sub(1) as u32;
        if m == 0 || m > MAX_M {
            return Err(FieldError::Unsupported(format!("modulus degree {m}")));
        }
        if modulus.last() != Some(&1) || modulus.iter().any(|&c| c >= p) {
            return Err(FieldError::Unsupported("modulus must be monic with residues in [0,p)".into()));
        }
        if m == 1 {
            return Self::build(p, 1, None);
        }
        Self::build(p, m, Some(modulus))
    }

    fn build(p: u32, m: u32, modulus: Option<Vec<u32>>) -> Result<Self, FieldError> {
        if !is_prime(p) || p > MAX_P {
            return Err(FieldError::Unsupported(format!("characteristic {p} (primes up to {MAX_P})")));
        }
        if let Some(f) = &modulus {
            if !is_irreducible(f, p) {
                return Err(FieldError::Reducible { p, modulus: f.clone() });
            }
        }
        let q = p.pow(m);
        let mulf = |x: u32, y: u32| -> u32 {
            match &modulus {
                None => ((x as u64 * y as u64) % p as u64) as u32,
                Some(f) => slow_mul(x, y, p, f),
            }
        };
        let order = q - 1;
        let mut gen = 1;
        let mut exp = vec![0u32; order as usize];
        for cand in 1..q {
            let mut x = 1u32;
            let mut ok = true;
            for (i, slot) in exp.iter_mut().enumerate() {
                *slot = x;
                x = mulf(x, cand);
                if x == 1 && (i as u32) + 1 < order {
                    ok = false;
                    break;
                }
            }
            if ok {
                gen = cand;
                break;
            }
        }
        let mut log = vec![NONE; q as usize];
        for (i, &e) in exp.iter().enumerate() {
            log[e as usize] = i as u32;
        }
        let zech = exp
            .iter()
            .map(|&e| {
                // e + 1: bump the constant digit
                let c0 = e % p;
                let v = e - c0 + (c0 + 1) % p;
                if v == 0 {
                    NONE
                } else {
                    log[v as usize]
                }
            })
            .collect();
        Ok(FieldCtx(Arc::new(Inner { p, m, q, modulus, gen, exp, log, zech })))
    }

    pub fn p(&self) -> u32 {
        self.0.p
    }

    pub fn m(&self) -> u32 {
        self.0.m
    }

    /// Field order `q = p^m`.
    pub fn q(&self) -> u32 {
        self.0.q
    }

    pub fn modulus(&self) -> Option<&[u32]> {
        self.0.modulus.as_deref()
    }

    /// The fixed primitive element: the smallest code generating `F_q^x`.
    pub fn primitive(&self) -> FqElem {
        FqElem(self.0.gen)
    }

    pub fn zero(&self) -> FqElem {
        FqElem(0)
    }

    pub fn one(&self) -> FqElem {
        FqElem(1)
    }

    /// Image of an integer in the prime subfield.
    pub fn from_int(&self, n: i64) -> FqElem {
        FqElem(n.rem_euclid(self.0.p as i64) as u32)
    }

    pub fn from_code(&self, code: u32) -> Option<FqElem> {
        (code < self.0.q).then_some(FqElem(code))
    }

    pub fn from_coeffs(&self, coeffs: &[u32]) -> Option<FqElem> {
        if coeffs.len() != self.0.m as usize || coeffs.iter().any(|&c| c >= self.0.p) {
            return None;
        }
        Some(FqElem(undigits(coeffs, self.0.p)))
    }

    /// The `m` residues of `x`, little-endian in the modulus root.
    pub fn coeffs(&self, x: FqElem) -> Vec<u32> {
        digits(x.0, self.0.p, self.0.m)
    }

    /// Whether `x` lies in the prime subfield.
    pub fn in_prime_field(&self, x: FqElem) -> bool {
        x.0 < self.0.p
    }

    pub fn add(&self, x: FqElem, y: FqElem) -> FqElem {
        let inner = &*self.0;
        if inner.m == 1 {
            let s = x.0 + y.0;
            return FqElem(if s >= inner.p { s - inner.p } else { s });
        }
        if x.0 == 0 {
            return y;
        }
        if y.0 == 0 {
            return x;
        }
        let order = inner.q - 1;
        let lx = inner.log[x.0 as usize];
        let ly = inner.log[y.0 as usize];
        let n = if ly >= lx { ly - lx } else { ly + order - lx };
        let z = inner.zech[n as usize];
        if z == NONE {
            return FqElem(0);
        }
        let s = lx + z;
        FqElem(inner.exp[(if s >= order { s - order } else { s }) as usize])
    }

    pub fn neg(&self, x: FqElem) -> FqElem {
        let inner = &*self.0;
        if x.0 == 0 || inner.p == 2 {
            return x;
        }
        if inner.m == 1 {
            return FqElem(inner.p - x.0);
        }
        let order = inner.q - 1;
        let s = inner.log[x.0 as usize] + order / 2;
        FqElem(inner.exp[(if s >= order { s - order } else { s }) as usize])
    }

    pub fn sub(&self, x: FqElem, y: FqElem) -> FqElem {
        self.add(x, self.neg(y))
    }

    pub fn mul(&self, x: FqElem, y: FqElem) -> FqElem {
        let inner = &*self.0;
        if inner.m == 1 {
            return FqElem((x.0 * y.0) % inner.p);
        }
        if x.0 == 0 || y.0 == 0 {
            return FqElem(0);
        }
        let order = inner.q - 1;
        let s = inner.log[x.0 as usize] + inner.log[y.0 as usize];
        FqElem(inner.exp[(if s >= order { s - order } else { s }) as usize])
    }

    /// Multiplicative inverse.
    pub fn inv(&self, x: FqElem) -> Result<FqElem, FieldError> {
        if x.0 == 0 {
            return Err(FieldError::ZeroInverse);
        }
        let inner = &*self.0;
        let order = inner.q - 1;
        let l = inner.log[x.0 as usize];
        Ok(FqElem(inner.exp[((order - l) % order) as usize]))
    }

    /// `x^n` for any signed `n`; `x^0 = 1` (including `0^0`).
    pub fn pow(&self, x: FqElem, n: i64) -> Result<FqElem, FieldError> {
        if x.0 == 0 {
            return match n.signum() {
                0 => Ok(self.one()),
                1 => Ok(self.zero()),
                _ => Err(FieldError::ZeroInverse),
            };
        }
        let inner = &*self.0;
        let order = (inner.q - 1) as i128;
        let l = inner.log[x.0 as usize] as i128;
        let e = (l * (n as i128)).rem_euclid(order);
        Ok(FqElem(inner.exp[e as usize]))
    }

    /// `x^n` for `n >= 0`; never fails.
    pub fn pow_u(&self, x: FqElem, n: u64) -> FqElem {
        if n == 0 {
            return self.one();
        }
        if x.0 == 0 {
            return x;
        }
        let inner = &*self.0;
        let order = (inner.q - 1) as u64;
        let l = inner.log[x.0 as usize] as u64;
        let e = ((l as u128 * n as u128) % order as u128) as usize;
        FqElem(inner.exp[e])
    }

    /// `g^k` for the fixed primitive element `g`.
    pub fn gen_pow(&self, k: i64) -> FqElem {
        let order = (self.0.q - 1) as i64;
        FqElem(self.0.exp[k.rem_euclid(order) as usize])
    }

    /// Discrete log base the primitive element; `None` for zero.
    pub fn log(&self, x: FqElem) -> Option<u32> {
        (x.0 != 0).then(|| self.0.log[x.0 as usize])
    }

    /// `x^(p^e)`.
    pub fn frobenius(&self, x: FqElem, e: u32) -> FqElem {
        self.pow_u(x, (self.0.p as u64).pow(e))
    }

    /// All elements in code order.
    pub fn elements(&self) -> impl Iterator<Item = FqElem> + Clone {
        (0..self.0.q).map(FqElem)
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FqElem {
        FqElem(rng.random_range(0..self.0.q))
    }

    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> FqElem {
        FqElem(rng.random_range(1..self.0.q))
    }

    /// Human-readable form: a decimal residue for prime fields, a polynomial in `g` otherwise.
    pub fn display(&self, x: FqElem) -> String {
        if self.0.m == 1 {
            return x.0.to_string();
        }
        let cs = self.coeffs(x);
        let mut parts = Vec::new();
        for (i, &c) in cs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            let mono = match i {
                0 => String::new(),
                1 => "x".to_string(),
                _ => format!("x^{i}"),
            };
            parts.push(match (c, i) {
                (_, 0) => c.to_string(),
                (1, _) => mono,
                _ => format!("{c}*{mono}"),
            });
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }

    pub fn sl2_mul(&self, x: &Sl2, y: &Sl2) -> Sl2 {
        let f = |i: usize, j: usize, k: usize, l: usize| self.add(self.mul(x[i], y[j]), self.mul(x[k], y[l]));
        [f(0, 0, 1, 2), f(0, 1, 1, 3), f(2, 0, 3, 2), f(2, 1, 3, 3)]
    }

    pub fn sl2_inv(&self, x: &Sl2) -> Sl2 {
        [x[3], self.neg(x[1]), self.neg(x[2]), x[0]]
    }

    pub fn sl2_det(&self, x: &Sl2) -> FqElem {
        self.sub(self.mul(x[0], x[3]), self.mul(x[1], x[2]))
    }

    /// A uniformly random element of `SL(2, F_q)`.
    pub fn random_sl2<R: Rng + ?Sized>(&self, rng: &mut R) -> Sl2 {
        let (a, b) = loop {
            let a = self.random(rng);
            let b = self.random(rng);
            if !(a.is_zero() && b.is_zero()) {
                break (a, b);
            }
        };
        if !a.is_zero() {
            let c = self.random(rng);
            let d = self.mul(self.add(self.one(), self.mul(b, c)), self.inv(a).unwrap());
            [a, b, c, d]
        } else {
            let c = self.neg(self.inv(b).unwrap());
            [a, b, c, self.random(rng)]
        }
    }

    /// Number of elements of `SL(2, F_q)`: `q^3 - q`.
    pub fn sl2_order(&self) -> u64 {
        let q = self.0.q as u64;
        q * q * q - q
    }
}

/// All of `SL(2, F_q)` in lexicographic order of `(a, b, c, d)` codes.
pub fn enumerate_sl2(ctx: &FieldCtx, budget: u64) -> Result<Vec<Sl2>, FieldError> {
    let needed = ctx.sl2_order();
    if needed > budget {
        return Err(FieldError::BudgetExceeded { needed, budget });
    }
    let minus_one = ctx.neg(ctx.one());
    let mut out = Vec::with_capacity(needed as usize);
    for a in ctx.elements() {
        let a_inv = ctx.inv(a).ok();
        for b in ctx.elements() {
            for c in ctx.elements() {
                let bc = ctx.mul(b, c);
                match a_inv {
                    Some(ai) => out.push([a, b, c, ctx.mul(ctx.add(ctx.one(), bc), ai)]),
                    None if bc == minus_one => out.extend(ctx.elements().map(|d| [a, b, c, d])),
                    None => {}
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inverses_in_f5() {
        let f = FieldCtx::prime(5).unwrap();
        assert_eq!(f.inv(f.from_int(2)).unwrap(), f.from_int(3));
        assert_eq!(f.inv(f.from_int(0)), Err(FieldError::ZeroInverse));
        let f2 = FieldCtx::prime(2).unwrap();
        assert_eq!(f2.inv(f2.one()).unwrap(), f2.one());
    }

    #[test]
    fn powers() {
        let f = FieldCtx::prime(5).unwrap();
        assert_eq!(f.pow(f.from_int(2), 4).unwrap(), f.one());
        assert_eq!(f.pow(f.from_int(2), -1).unwrap(), f.from_int(3));
        assert_eq!(f.pow(f.zero(), -2), Err(FieldError::ZeroInverse));
        // F_4 = F_2[x]/(x^2+x+1): x^2 = x + 1
        let f4 = FieldCtx::new(2, 2).unwrap();
        assert_eq!(f4.modulus().unwrap(), &[1, 1, 1]);
        let x = f4.from_coeffs(&[0, 1]).unwrap();
        assert_eq!(f4.pow(x, 2).unwrap(), f4.from_coeffs(&[1, 1]).unwrap());
    }

    #[test]
    fn builtin_quadratic_moduli() {
        assert_eq!(FieldCtx::new(3, 2).unwrap().modulus().unwrap(), &[1, 0, 1]);
        assert_eq!(FieldCtx::new(5, 2).unwrap().modulus().unwrap(), &[2, 0, 1]);
        assert!(matches!(FieldCtx::with_modulus(5, vec![1, 0, 1]), Err(FieldError::Reducible { .. })));
        assert!(FieldCtx::new(6, 1).is_err());
        assert!(FieldCtx::new(2, 5).is_err());
    }

    #[test]
    fn primitive_has_full_order() {
        for (p, m) in [(2, 1), (2, 4), (3, 3), (5, 2), (7, 2), (31, 1)] {
            let f = FieldCtx::new(p, m).unwrap();
            let g = f.primitive();
            let order = f.q() - 1;
            let mut x = f.one();
            for k in 1..=order {
                x = f.mul(x, g);
                if x == f.one() {
                    assert_eq!(k, order, "F_{}", f.q());
                }
            }
        }
    }

    #[test]
    fn addition_matches_digitwise() {
        for (p, m) in [(2, 3), (3, 2), (5, 2)] {
            let f = FieldCtx::new(p, m).unwrap();
            for x in f.elements() {
                for y in f.elements() {
                    let s: Vec<u32> = f.coeffs(x).iter().zip(f.coeffs(y)).map(|(a, b)| (a + b) % p).collect();
                    assert_eq!(f.coeffs(f.add(x, y)), s);
                    assert_eq!(f.add(y, f.neg(y)), f.zero());
                }
            }
        }
    }

    #[test]
    fn sl2_counts() {
        for (p, m, n) in [(2, 1, 6), (3, 1, 24), (2, 2, 60)] {
            let f = FieldCtx::new(p, m).unwrap();
            let all = enumerate_sl2(&f, DEFAULT_ENUM_BUDGET).unwrap();
            assert_eq!(all.len(), n);
            assert!(all.windows(2).all(|w| w[0] < w[1]));
            assert!(all.iter().all(|x| f.sl2_det(x) == f.one()));
        }
        let big = FieldCtx::new(2, 4).unwrap();
        assert!(matches!(enumerate_sl2(&big, 100), Err(FieldError::BudgetExceeded { .. })));
    }

    #[test]
    fn sl2_closed_under_product_and_inverse() {
        use rand::{Rng, SeedableRng};
        let f = FieldCtx::new(3, 2).unwrap();
        let all = enumerate_sl2(&f, DEFAULT_ENUM_BUDGET).unwrap();
        let set: std::collections::HashSet<_> = all.iter().copied().collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = all[rng.random_range(0..all.len())];
            let y = all[rng.random_range(0..all.len())];
            assert!(set.contains(&f.sl2_mul(&x, &y)));
            assert!(set.contains(&f.sl2_inv(&x)));
        }
    }

    fn field_strategy() -> impl Strategy<Value = FieldCtx> {
        prop::sample::select(vec![(2u32, 1u32), (2, 3), (3, 2), (5, 1), (5, 2), (7, 1)])
            .prop_map(|(p, m)| FieldCtx::new(p, m).unwrap())
    }

    proptest! {
        #[test]
        fn inverse_of_product(f in field_strategy(), a in 1u32..10_000, b in 1u32..10_000) {
            let x = f.from_code(1 + a % (f.q() - 1)).unwrap();
            let y = f.from_code(1 + b % (f.q() - 1)).unwrap();
            let lhs = f.inv(f.mul(x, y)).unwrap();
            let rhs = f.mul(f.inv(y).unwrap(), f.inv(x).unwrap());
            prop_assert_eq!(lhs, rhs);
            prop_assert_eq!(f.mul(x, f.inv(x).unwrap()), f.one());
        }

        #[test]
        fn pow_is_additive_in_exponent(f in field_strategy(), c in 1u32..10_000, a in -50i64..=50, b in -50i64..=50) {
            let x = f.from_code(1 + c % (f.q() - 1)).unwrap();
            let lhs = f.pow(x, a + b).unwrap();
            let rhs = f.mul(f.pow(x, a).unwrap(), f.pow(x, b).unwrap());
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn random_sl2_has_det_one(f in field_strategy(), seed in any::<u64>()) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = f.random_sl2(&mut rng);
            prop_assert_eq!(f.sl2_det(&x), f.one());
        }
    }
}
