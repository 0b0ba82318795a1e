//! Sparse multivariate polynomials over `F_p` and normal forms modulo `ad - bc - 1`.
//!
//! Terms are keyed by exponent vectors. The textual format is
//! `3*a^2*d + b*c`: explicit `*`, `^` for exponents, coefficients as residues.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::field::{FieldCtx, FqElem};

/// Ordered variable names shared between polynomials of one ring.
pub type Vars = Arc<[String]>;

/// Total degree ceiling for symbolic identity checks.
pub const SYMBOLIC_DEGREE_CAP: u32 = 64;
/// Hard ceiling on any single exponent stored in a polynomial.
pub const EXPONENT_LIMIT: u32 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SymbolicError {
    #[error("variable lists differ: {left:?} vs {right:?}")]
    VarMismatch { left: Vec<String>, right: Vec<String> },
    #[error("variable {0} is not bound")]
    UnboundVariable(String),
    #[error("characteristic mismatch: polynomial over F_{poly}, field of characteristic {field}")]
    CharMismatch { poly: u32, field: u32 },
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("exponent {0} exceeds the storage limit")]
    ExponentOverflow(u64),
}

pub fn vars(names: &[&str]) -> Vars {
    names.iter().map(|s| s.to_string()).collect::<Vec<_>>().into()
}

fn inv_mod(a: u32, p: u32) -> Option<u32> {
    let a = a % p;
    if a == 0 {
        return None;
    }
    // p is prime: a^(p-2)
    let mut r: u64 = 1;
    let mut b = a as u64;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p as u64;
        }
        b = b * b % p as u64;
        e >>= 1;
    }
    Some(r as u32)
}

/// `C(n, k) mod p` by Lucas' theorem.
pub fn binom_mod(mut n: u64, mut k: u64, p: u32) -> u32 {
    let p64 = p as u64;
    let mut acc: u64 = 1;
    while k > 0 || n > 0 {
        let (ni, ki) = (n % p64, k % p64);
        if ki > ni {
            return 0;
        }
        let mut c: u64 = 1;
        for i in 0..ki {
            c = c * ((ni - i) % p64) % p64;
            c = c * inv_mod(((i + 1) % p64) as u32, p).unwrap() as u64 % p64;
        }
        acc = acc * c % p64;
        n /= p64;
        k /= p64;
    }
    acc as u32
}

/// A polynomial in `vars` with coefficients in `F_p`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MPoly {
    p: u32,
    vars: Vars,
    terms: BTreeMap<Vec<u32>, u32>,
}

impl MPoly {
    pub fn zero(p: u32, vars: &Vars) -> Self {
        MPoly { p, vars: vars.clone(), terms: BTreeMap::new() }
    }

    pub fn constant(p: u32, vars: &Vars, c: i64) -> Self {
        let mut f = Self::zero(p, vars);
        let c = c.rem_euclid(p as i64) as u32;
        if c != 0 {
            f.terms.insert(vec![0; vars.len()], c);
        }
        f
    }

    pub fn one(p: u32, vars: &Vars) -> Self {
        Self::constant(p, vars, 1)
    }

    /// The variable at position `i`.
    pub fn var_at(p: u32, vars: &Vars, i: usize) -> Self {
        Self::monomial(p, vars, 1, {
            let mut e = vec![0; vars.len()];
            e[i] = 1;
            e
        })
    }

    pub fn var(p: u32, vars: &Vars, name: &str) -> Result<Self, SymbolicError> {
        let i = vars.iter().position(|v| v == name).ok_or_else(|| SymbolicError::UnknownVariable(name.to_string()))?;
        Ok(Self::var_at(p, vars, i))
    }

    pub fn monomial(p: u32, vars: &Vars, coef: i64, exps: Vec<u32>) -> Self {
        assert_eq!(exps.len(), vars.len());
        let mut f = Self::zero(p, vars);
        let c = coef.rem_euclid(p as i64) as u32;
        if c != 0 {
            f.terms.insert(exps, c);
        }
        f
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    /// Terms as `(exponents, coefficient)` in ascending lexicographic exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], u32)> {
        self.terms.iter().map(|(e, &c)| (e.as_slice(), c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, exps: &[u32]) -> u32 {
        self.terms.get(exps).copied().unwrap_or(0)
    }

    pub fn constant_term(&self) -> u32 {
        self.coefficient(&vec![0; self.vars.len()])
    }

    /// Constant value if the polynomial has no variable terms.
    pub fn as_constant(&self) -> Option<u32> {
        match self.terms.len() {
            0 => Some(0),
            1 => self.terms.iter().next().filter(|(e, _)| e.iter().all(|&x| x == 0)).map(|(_, &c)| c),
            _ => None,
        }
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum::<u32>()).max().unwrap_or(0)
    }

    pub fn degree_in(&self, i: usize) -> u32 {
        self.terms.keys().map(|e| e[i]).max().unwrap_or(0)
    }

    pub fn same_ring(&self, other: &MPoly) -> bool {
        self.p == other.p && (Arc::ptr_eq(&self.vars, &other.vars) || self.vars == other.vars)
    }

    fn check_ring(&self, other: &MPoly) -> Result<(), SymbolicError> {
        if self.p != other.p {
            return Err(SymbolicError::CharMismatch { poly: self.p, field: other.p });
        }
        if !self.same_ring(other) {
            return Err(SymbolicError::VarMismatch { left: self.vars.to_vec(), right: other.vars.to_vec() });
        }
        Ok(())
    }

    fn add_term(&mut self, exps: Vec<u32>, c: u32) {
        if c == 0 {
            return;
        }
        let p = self.p;
        match self.terms.entry(exps) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c % p);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = (*o.get() + c) % p;
                if s == 0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn try_add(&self, other: &MPoly) -> Result<MPoly, SymbolicError> {
        self.check_ring(other)?;
        let mut r = self.clone();
        for (e, &c) in &other.terms {
            r.add_term(e.clone(), c);
        }
        Ok(r)
    }

    pub fn neg(&self) -> MPoly {
        self.scale(self.p as i64 - 1)
    }

    pub fn try_sub(&self, other: &MPoly) -> Result<MPoly, SymbolicError> {
        self.try_add(&other.neg())
    }

    pub fn scale(&self, c: i64) -> MPoly {
        let c = c.rem_euclid(self.p as i64) as u64;
        let mut r = MPoly::zero(self.p, &self.vars);
        if c != 0 {
            for (e, &v) in &self.terms {
                r.terms.insert(e.clone(), ((v as u64 * c) % self.p as u64) as u32);
            }
        }
        r
    }

    pub fn try_mul(&self, other: &MPoly) -> Result<MPoly, SymbolicError> {
        self.check_ring(other)?;
        let mut r = MPoly::zero(self.p, &self.vars);
        for (e1, &c1) in &self.terms {
            for (e2, &c2) in &other.terms {
                let mut e = Vec::with_capacity(e1.len());
                for (a, b) in e1.iter().zip(e2) {
                    let s = a + b;
                    if s > EXPONENT_LIMIT {
                        return Err(SymbolicError::ExponentOverflow(s as u64));
                    }
                    e.push(s);
                }
                r.add_term(e, ((c1 as u64 * c2 as u64) % self.p as u64) as u32);
            }
        }
        Ok(r)
    }

    pub fn pow(&self, mut n: u32) -> Result<MPoly, SymbolicError> {
        let mut base = self.clone();
        let mut acc = MPoly::one(self.p, &self.vars);
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.try_mul(&base)?;
            }
            n >>= 1;
            if n > 0 {
                base = base.try_mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// Evaluation at a point given in variable order.
    pub fn eval(&self, ctx: &FieldCtx, point: &[FqElem]) -> Result<FqElem, SymbolicError> {
        if ctx.p() != self.p {
            return Err(SymbolicError::CharMismatch { poly: self.p, field: ctx.p() });
        }
        if point.len() != self.vars.len() {
            let missing = self.vars.get(point.len()).cloned().unwrap_or_default();
            return Err(SymbolicError::UnboundVariable(missing));
        }
        Ok(self.eval_unchecked(ctx, point))
    }

    /// Evaluation without ring checks; the caller guarantees `point.len() == vars.len()`
    /// and matching characteristic.
    pub fn eval_unchecked(&self, ctx: &FieldCtx, point: &[FqElem]) -> FqElem {
        let mut acc = ctx.zero();
        for (e, &c) in &self.terms {
            let mut t = ctx.from_int(c as i64);
            for (&x, &k) in point.iter().zip(e) {
                if k > 0 {
                    t = ctx.mul(t, ctx.pow_u(x, k as u64));
                }
            }
            acc = ctx.add(acc, t);
        }
        acc
    }

    /// Evaluation with named bindings; extra bindings are ignored.
    pub fn eval_map(&self, ctx: &FieldCtx, point: &HashMap<String, FqElem>) -> Result<FqElem, SymbolicError> {
        let vals = self
            .vars
            .iter()
            .map(|v| point.get(v).copied().ok_or_else(|| SymbolicError::UnboundVariable(v.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        self.eval(ctx, &vals)
    }

    /// Substitute `images[i]` for variable `i`; all images live in one target ring.
    pub fn compose(&self, images: &[MPoly]) -> Result<MPoly, SymbolicError> {
        assert_eq!(images.len(), self.vars.len());
        let target = images.first().map(|f| (f.p, f.vars.clone()));
        let (p, tv) = target.unwrap_or((self.p, self.vars.clone()));
        if p != self.p {
            return Err(SymbolicError::CharMismatch { poly: self.p, field: p });
        }
        let mut cache: Vec<BTreeMap<u32, MPoly>> = vec![BTreeMap::new(); images.len()];
        let mut acc = MPoly::zero(p, &tv);
        for (e, &c) in &self.terms {
            let mut t = MPoly::constant(p, &tv, c as i64);
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                if !cache[i].contains_key(&k) {
                    let pw = images[i].pow(k)?;
                    cache[i].insert(k, pw);
                }
                t = t.try_mul(&cache[i][&k])?;
            }
            acc = acc.try_add(&t)?;
        }
        Ok(acc)
    }

    /// Monomial substitution: variable `i` becomes `target[map[i].0]^map[i].1`.
    pub fn monomial_map(&self, target: &Vars, map: &[(usize, u32)]) -> Result<MPoly, SymbolicError> {
        assert_eq!(map.len(), self.vars.len());
        let mut r = MPoly::zero(self.p, target);
        for (e, &c) in &self.terms {
            let mut ne = vec![0u32; target.len()];
            for (i, &k) in e.iter().enumerate() {
                let (j, mult) = map[i];
                let add = k as u64 * mult as u64;
                let v = ne[j] as u64 + add;
                if v > EXPONENT_LIMIT as u64 {
                    return Err(SymbolicError::ExponentOverflow(v));
                }
                ne[j] = v as u32;
            }
            r.add_term(ne, c);
        }
        Ok(r)
    }

    /// Re-express the polynomial in a variable list that contains all of its own names.
    pub fn embed(&self, target: &Vars) -> Result<MPoly, SymbolicError> {
        let map = self
            .vars
            .iter()
            .map(|v| target.iter().position(|t| t == v).map(|j| (j, 1)).ok_or_else(|| SymbolicError::UnknownVariable(v.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        self.monomial_map(target, &map)
    }

    /// Multiply every exponent by `p^e`; with prime-field coefficients this is the
    /// Frobenius twist `f -> f^(p^e)`.
    pub fn frobenius_twist(&self, e: u32) -> Result<MPoly, SymbolicError> {
        let k = self.p.checked_pow(e).ok_or(SymbolicError::ExponentOverflow(u64::MAX))?;
        let map: Vec<(usize, u32)> = (0..self.vars.len()).map(|i| (i, k)).collect();
        self.monomial_map(&self.vars, &map)
    }

    /// Parse the textual format. Accepts `+ - * / ^`, parentheses, integer constants and
    /// the names in `vars`; division is allowed only by constants invertible mod `p`.
    pub fn parse(p: u32, vars: &Vars, text: &str) -> Result<MPoly, SymbolicError> {
        let toks = tokenize(text)?;
        let mut parser = Parser { toks, pos: 0, p, vars: vars.clone() };
        let f = parser.expr()?;
        if parser.pos != parser.toks.len() {
            return Err(SymbolicError::Parse(format!("unexpected token {:?}", parser.toks[parser.pos])));
        }
        Ok(f)
    }

    fn sorted_terms(&self) -> Vec<(&Vec<u32>, u32)> {
        let mut ts: Vec<_> = self.terms.iter().map(|(e, &c)| (e, c)).collect();
        ts.sort_by(|(a, _), (b, _)| {
            let da: u32 = a.iter().sum();
            let db: u32 = b.iter().sum();
            db.cmp(&da).then_with(|| b.cmp(a))
        });
        ts
    }
}

impl fmt::Display for MPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.sorted_terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let mut factors: Vec<String> = Vec::new();
            if c != 1 || e.iter().all(|&x| x == 0) {
                factors.push(c.to_string());
            }
            for (v, &k) in self.vars.iter().zip(e) {
                match k {
                    0 => {}
                    1 => factors.push(v.clone()),
                    _ => factors.push(format!("{v}^{k}")),
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

impl fmt::Debug for MPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MPoly[F_{}]({})", self.p, self)
    }
}

macro_rules! forward_op {
    ($trait:ident, $method:ident, $inner:ident) => {
        impl std::ops::$trait<&MPoly> for &MPoly {
            type Output = MPoly;
            fn $method(self, rhs: &MPoly) -> MPoly {
                self.$inner(rhs).expect("polynomials from different rings")
            }
        }
        impl std::ops::$trait<MPoly> for MPoly {
            type Output = MPoly;
            fn $method(self, rhs: MPoly) -> MPoly {
                (&self).$inner(&rhs).expect("polynomials from different rings")
            }
        }
    };
}

forward_op!(Add, add, try_add);
forward_op!(Sub, sub, try_sub);
forward_op!(Mul, mul, try_mul);

/// Product with variable-list checking.
pub fn mp_mul(f: &MPoly, g: &MPoly) -> Result<MPoly, SymbolicError> {
    f.try_mul(g)
}

/// The determinant relation `a*d -> b*c + 1`, one rule per `(a, b, c, d)` block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteSystem {
    blocks: Vec<[usize; 4]>,
}

impl RewriteSystem {
    /// Detect blocks `a{s}, b{s}, c{s}, d{s}` sharing a suffix `s` (possibly empty).
    pub fn for_vars(vars: &[String]) -> Self {
        let mut blocks = Vec::new();
        for (ia, v) in vars.iter().enumerate() {
            let Some(suffix) = v.strip_prefix('a') else { continue };
            let find = |c: char| vars.iter().position(|w| *w == format!("{c}{suffix}"));
            if let (Some(ib), Some(ic), Some(id)) = (find('b'), find('c'), find('d')) {
                blocks.push([ia, ib, ic, id]);
            }
        }
        RewriteSystem { blocks }
    }

    pub fn blocks(&self) -> &[[usize; 4]] {
        &self.blocks
    }

    /// Normal form: no monomial divisible by both `a` and `d` of one block.
    pub fn reduce(&self, f: &MPoly) -> MPoly {
        let p = f.p;
        let mut out = MPoly::zero(p, &f.vars);
        for (e, &c) in &f.terms {
            let mut cur: Vec<(Vec<u32>, u32)> = vec![(e.clone(), c)];
            for &[ia, ib, ic, id] in &self.blocks {
                let mut next = Vec::new();
                for (ex, cx) in cur {
                    let k = ex[ia].min(ex[id]);
                    if k == 0 {
                        next.push((ex, cx));
                        continue;
                    }
                    // (ad)^k = (bc + 1)^k
                    for j in 0..=k {
                        let b = binom_mod(k as u64, j as u64, p);
                        if b == 0 {
                            continue;
                        }
                        let mut ne = ex.clone();
                        ne[ia] -= k;
                        ne[id] -= k;
                        ne[ib] += j;
                        ne[ic] += j;
                        next.push((ne, ((cx as u64 * b as u64) % p as u64) as u32));
                    }
                }
                cur = next;
            }
            for (ex, cx) in cur {
                out.add_term(ex, cx);
            }
        }
        out
    }

    pub fn is_normal(&self, f: &MPoly) -> bool {
        f.terms.keys().all(|e| self.blocks.iter().all(|b| e[b[0]] == 0 || e[b[3]] == 0))
    }
}

/// Normal form of `f` modulo the determinant relation of every block in its variables.
pub fn sl2_reduce(f: &MPoly) -> MPoly {
    RewriteSystem::for_vars(&f.vars).reduce(f)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(u64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>, SymbolicError> {
    let mut out = Vec::new();
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            let t: String = cs[start..i].iter().collect();
            out.push(Tok::Num(t.parse().map_err(|_| SymbolicError::Parse(format!("bad number {t}")))?));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || cs[i] == '_' || cs[i] == '\'') {
                i += 1;
            }
            out.push(Tok::Ident(cs[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(SymbolicError::Parse(format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    p: u32,
    vars: Vars,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some(Tok::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<MPoly, SymbolicError> {
        let mut acc = MPoly::zero(self.p, &self.vars);
        let mut sign = 1i64;
        match self.peek_op() {
            Some('-') => {
                sign = -1;
                self.pos += 1;
            }
            Some('+') => self.pos += 1,
            _ => {}
        }
        loop {
            let t = self.term()?;
            acc = acc.try_add(&t.scale(sign))?;
            match self.peek_op() {
                Some('+') => sign = 1,
                Some('-') => sign = -1,
                _ => break,
            }
            self.pos += 1;
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<MPoly, SymbolicError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek_op() {
                Some('*') => {
                    self.pos += 1;
                    let f = self.factor()?;
                    acc = acc.try_mul(&f)?;
                }
                Some('/') => {
                    self.pos += 1;
                    let f = self.factor()?;
                    let c = f.as_constant().ok_or_else(|| SymbolicError::Parse("division by a non-constant".into()))?;
                    let inv =
                        inv_mod(c, self.p).ok_or_else(|| SymbolicError::Parse(format!("division by zero mod {}", self.p)))?;
                    acc = acc.scale(inv as i64);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<MPoly, SymbolicError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            match self.toks.get(self.pos) {
                Some(Tok::Num(n)) => {
                    let n = *n;
                    self.pos += 1;
                    if n > EXPONENT_LIMIT as u64 {
                        return Err(SymbolicError::ExponentOverflow(n));
                    }
                    return base.pow(n as u32);
                }
                other => return Err(SymbolicError::Parse(format!("expected exponent, found {other:?}"))),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<MPoly, SymbolicError> {
        let tok = self.toks.get(self.pos).cloned();
        self.pos += 1;
        match tok {
            Some(Tok::Num(n)) => Ok(MPoly::constant(self.p, &self.vars, (n % self.p as u64) as i64)),
            Some(Tok::Ident(name)) => MPoly::var(self.p, &self.vars, &name),
            Some(Tok::Op('(')) => {
                let e = self.expr()?;
                if self.peek_op() != Some(')') {
                    return Err(SymbolicError::Parse("missing )".into()));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(Tok::Op('-')) => Ok(self.factor()?.neg()),
            other => Err(SymbolicError::Parse(format!("unexpected {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::enumerate_sl2;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn abcd() -> Vars {
        vars(&["a", "b", "c", "d"])
    }

    fn parse(p: u32, v: &Vars, s: &str) -> MPoly {
        MPoly::parse(p, v, s).unwrap()
    }

    #[test]
    fn products_and_characteristic() {
        let v = abcd();
        let f = parse(5, &v, "a+b");
        let g = parse(5, &v, "a-b");
        assert_eq!(mp_mul(&f, &g).unwrap(), parse(5, &v, "a^2 - b^2"));
        let h = parse(2, &v, "a+b");
        assert_eq!(h.pow(2).unwrap(), parse(2, &v, "a^2+b^2"));
        assert!(parse(3, &v, "3*a").is_zero());
    }

    #[test]
    fn ring_mismatch_is_reported() {
        let f = parse(5, &abcd(), "a");
        let g = parse(5, &vars(&["t"]), "t");
        assert!(matches!(mp_mul(&f, &g), Err(SymbolicError::VarMismatch { .. })));
    }

    #[test]
    fn determinant_rewrites() {
        let v = abcd();
        let rs = RewriteSystem::for_vars(&v);
        assert_eq!(rs.blocks(), &[[0, 1, 2, 3]]);
        assert_eq!(rs.reduce(&parse(7, &v, "a*d")), parse(7, &v, "b*c+1"));
        assert_eq!(rs.reduce(&parse(7, &v, "a^2*d")), parse(7, &v, "a*b*c + a"));
        assert_eq!(rs.reduce(&parse(7, &v, "a*d^2")), parse(7, &v, "b*c*d + d"));
    }

    #[test]
    fn rewrite_order_does_not_matter() {
        let v = abcd();
        let rs = RewriteSystem::for_vars(&v);
        let adad = parse(5, &v, "a*d*a*d");
        // reduce one factor at a time, then the whole product
        let one = rs.reduce(&parse(5, &v, "a*d"));
        let stepwise = rs.reduce(&(&one * &one));
        assert_eq!(rs.reduce(&adad), stepwise);
        let mixed = rs.reduce(&(&rs.reduce(&parse(5, &v, "a^2*d")) * &parse(5, &v, "d")));
        assert_eq!(rs.reduce(&adad), mixed);
    }

    #[test]
    fn two_blocks() {
        let v = vars(&["a1", "b1", "c1", "d1", "a2", "b2", "c2", "d2"]);
        let rs = RewriteSystem::for_vars(&v);
        assert_eq!(rs.blocks().len(), 2);
        let f = parse(3, &v, "a1*d1*a2*d2");
        assert_eq!(rs.reduce(&f), parse(3, &v, "(b1*c1+1)*(b2*c2+1)"));
        assert!(rs.is_normal(&rs.reduce(&parse(3, &v, "a1^3*d1^2*d2*a2 + a1*d2"))));
    }

    #[test]
    fn evaluation() {
        let f5 = FieldCtx::prime(5).unwrap();
        let v = vars(&["a", "b"]);
        let f = parse(5, &v, "a^2-b^2");
        assert_eq!(f.eval(&f5, &[f5.from_int(2), f5.from_int(1)]).unwrap(), f5.from_int(3));
        let mut bind = HashMap::new();
        bind.insert("a".to_string(), f5.from_int(2));
        assert_eq!(f.eval_map(&f5, &bind), Err(SymbolicError::UnboundVariable("b".into())));
        let f3 = FieldCtx::prime(3).unwrap();
        assert!(matches!(f.eval(&f3, &[f3.one(), f3.one()]), Err(SymbolicError::CharMismatch { .. })));
        // t^p is the Frobenius on F_4
        let f4 = FieldCtx::new(2, 2).unwrap();
        let t = parse(2, &vars(&["t"]), "t^2");
        let g = f4.primitive();
        assert_eq!(t.eval(&f4, &[g]).unwrap(), f4.frobenius(g, 1));
    }

    #[test]
    fn determinant_identity_on_points() {
        let f = FieldCtx::new(3, 2).unwrap();
        let v = abcd();
        let bc1 = parse(3, &v, "b*c+1");
        let ad = parse(3, &v, "a*d");
        for m in enumerate_sl2(&f, 1 << 20).unwrap() {
            assert_eq!(bc1.eval(&f, &m).unwrap(), ad.eval(&f, &m).unwrap());
        }
    }

    #[test]
    fn display_and_parse_roundtrip() {
        let v = abcd();
        let f = parse(5, &v, "3*a^2*d + b*c - 1");
        assert_eq!(f.to_string(), "3*a^2*d + b*c + 4");
        assert_eq!(parse(5, &v, &f.to_string()), f);
        assert_eq!(parse(5, &v, "1/2*a"), parse(5, &v, "3*a"));
        assert!(MPoly::parse(5, &v, "a/b").is_err());
        assert!(MPoly::parse(5, &v, "a/5").is_err());
        assert!(MPoly::parse(5, &v, "x").is_err());
    }

    #[test]
    fn lucas_binomials() {
        assert_eq!(binom_mod(5, 2, 7), 3);
        assert_eq!(binom_mod(9, 3, 3), 3 % 3);
        assert_eq!(binom_mod(10, 4, 5), (210 % 5) as u32);
        assert_eq!(binom_mod(27, 9, 3), 0);
        assert_eq!(binom_mod(28, 1, 3), 1);
    }

    fn random_poly(p: u32, v: &Vars, rng: &mut rand_chacha::ChaCha8Rng, terms: usize, maxdeg: u32) -> MPoly {
        use rand::Rng;
        let mut f = MPoly::zero(p, v);
        for _ in 0..terms {
            let e: Vec<u32> = (0..v.len()).map(|_| rng.random_range(0..=maxdeg)).collect();
            f = &f + &MPoly::monomial(p, v, rng.random_range(1..p as i64), e);
        }
        f
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn reduction_preserves_values(seed in any::<u64>(), pi in 0usize..3) {
            let p = [2u32, 3, 5][pi];
            let ctx = FieldCtx::new(p, 2).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let v = abcd();
            let f = random_poly(p, &v, &mut rng, 6, 4);
            let r = sl2_reduce(&f);
            prop_assert!(RewriteSystem::for_vars(&v).is_normal(&r));
            let m = ctx.random_sl2(&mut rng);
            prop_assert_eq!(f.eval(&ctx, &m).unwrap(), r.eval(&ctx, &m).unwrap());
        }

        #[test]
        fn frobenius_is_a_ring_map(seed in any::<u64>(), pi in 0usize..3, e in 0u32..3) {
            let p = [2u32, 3, 5][pi];
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let v = vars(&["t"]);
            let f = random_poly(p, &v, &mut rng, 4, 5);
            let g = random_poly(p, &v, &mut rng, 4, 5);
            prop_assert_eq!((&f + &g).frobenius_twist(e).unwrap(),
                &f.frobenius_twist(e).unwrap() + &g.frobenius_twist(e).unwrap());
            prop_assert_eq!((&f * &g).frobenius_twist(e).unwrap(),
                &f.frobenius_twist(e).unwrap() * &g.frobenius_twist(e).unwrap());
            // entrywise p^e-th power agrees with the twist
            prop_assert_eq!(f.pow(p.pow(e)).unwrap(), f.frobenius_twist(e).unwrap());
        }
    }
}
