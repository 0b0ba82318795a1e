//! Dense matrices over a finite field or over polynomial rings.

use std::fmt;

use thiserror::Error;

use crate::field::{FieldCtx, FqElem};
use crate::symbolic::{MPoly, RewriteSystem, SymbolicError, Vars};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("entries live in different rings")]
    RingMismatch,
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("matrix is singular")]
    Singular,
    #[error("entry is not in the prime field")]
    NotPrimeField,
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

/// Minimal commutative ring interface used by [`Mat`].
pub trait Ring: Clone + fmt::Debug + Send + Sync {
    type Elem: Clone + PartialEq + fmt::Debug + Send + Sync;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn add(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem;
    fn sub(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem;
    fn mul(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem;
    fn neg(&self, x: &Self::Elem) -> Self::Elem;
    fn is_zero(&self, x: &Self::Elem) -> bool;
    fn same_ring(&self, other: &Self) -> bool;
    #[allow(clippy::wrong_self_convention)]
    fn from_int(&self, n: i64) -> Self::Elem;
}

impl Ring for FieldCtx {
    type Elem = FqElem;
    fn zero(&self) -> FqElem {
        FqElem::ZERO
    }
    fn one(&self) -> FqElem {
        FqElem::ONE
    }
    fn add(&self, x: &FqElem, y: &FqElem) -> FqElem {
        FieldCtx::add(self, *x, *y)
    }
    fn sub(&self, x: &FqElem, y: &FqElem) -> FqElem {
        FieldCtx::sub(self, *x, *y)
    }
    fn mul(&self, x: &FqElem, y: &FqElem) -> FqElem {
        FieldCtx::mul(self, *x, *y)
    }
    fn neg(&self, x: &FqElem) -> FqElem {
        FieldCtx::neg(self, *x)
    }
    fn is_zero(&self, x: &FqElem) -> bool {
        x.is_zero()
    }
    fn same_ring(&self, other: &Self) -> bool {
        self == other
    }
    fn from_int(&self, n: i64) -> FqElem {
        FieldCtx::from_int(self, n)
    }
}

/// `F_p[vars]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyRing {
    pub p: u32,
    pub vars: Vars,
}

impl PolyRing {
    pub fn new(p: u32, vars: &Vars) -> Self {
        PolyRing { p, vars: vars.clone() }
    }
}

impl Ring for PolyRing {
    type Elem = MPoly;
    fn zero(&self) -> MPoly {
        MPoly::zero(self.p, &self.vars)
    }
    fn one(&self) -> MPoly {
        MPoly::one(self.p, &self.vars)
    }
    fn add(&self, x: &MPoly, y: &MPoly) -> MPoly {
        x + y
    }
    fn sub(&self, x: &MPoly, y: &MPoly) -> MPoly {
        x - y
    }
    fn mul(&self, x: &MPoly, y: &MPoly) -> MPoly {
        x * y
    }
    fn neg(&self, x: &MPoly) -> MPoly {
        x.neg()
    }
    fn is_zero(&self, x: &MPoly) -> bool {
        x.is_zero()
    }
    fn same_ring(&self, other: &Self) -> bool {
        self == other
    }
    fn from_int(&self, n: i64) -> MPoly {
        MPoly::constant(self.p, &self.vars, n)
    }
}

/// Row-major dense matrix.
#[derive(Clone)]
pub struct Mat<R: Ring> {
    ring: R,
    rows: usize,
    cols: usize,
    data: Vec<R::Elem>,
}

pub type FqMat = Mat<FieldCtx>;
pub type PolyMat = Mat<PolyRing>;

impl<R: Ring> PartialEq for Mat<R> {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.ring.same_ring(&other.ring) && self.data == other.data
    }
}

impl<R: Ring> fmt::Debug for Mat<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl<R: Ring> Mat<R> {
    pub fn new(ring: &R, rows: usize, cols: usize, data: Vec<R::Elem>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimMismatch(format!("{} entries for {rows}x{cols}", data.len())));
        }
        Ok(Mat { ring: ring.clone(), rows, cols, data })
    }

    pub fn from_fn(ring: &R, rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> R::Elem) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { ring: ring.clone(), rows, cols, data }
    }

    pub fn zeros(ring: &R, rows: usize, cols: usize) -> Self {
        Self::from_fn(ring, rows, cols, |_, _| ring.zero())
    }

    pub fn identity(ring: &R, n: usize) -> Self {
        Self::from_fn(ring, n, n, |i, j| if i == j { ring.one() } else { ring.zero() })
    }

    pub fn diag(ring: &R, entries: &[R::Elem]) -> Self {
        let n = entries.len();
        Self::from_fn(ring, n, n, |i, j| if i == j { entries[i].clone() } else { ring.zero() })
    }

    /// Permutation matrix exchanging basis vectors `l` and `m` (1-based).
    pub fn swap(ring: &R, n: usize, l: usize, m: usize) -> Self {
        assert!(l >= 1 && m >= 1 && l <= n && m <= n);
        let (l, m) = (l - 1, m - 1);
        let perm = |i: usize| {
            if i == l {
                m
            } else if i == m {
                l
            } else {
                i
            }
        };
        Self::from_fn(ring, n, n, |i, j| if perm(i) == j { ring.one() } else { ring.zero() })
    }

    /// Matrix unit `E_{i,j}` (1-based).
    pub fn unit(ring: &R, n: usize, i: usize, j: usize) -> Self {
        Self::from_fn(ring, n, n, |a, b| if a + 1 == i && b + 1 == j { ring.one() } else { ring.zero() })
    }

    pub fn from_ints(ring: &R, rows: usize, cols: usize, vals: &[i64]) -> Self {
        assert_eq!(vals.len(), rows * cols);
        Self::from_fn(ring, rows, cols, |i, j| ring.from_int(vals[i * cols + j]))
    }

    pub fn ring(&self) -> &R {
        &self.ring
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &R::Elem {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: R::Elem) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[R::Elem] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[R::Elem] {
        &self.data
    }

    pub fn map<S: Ring>(&self, ring: &S, f: impl Fn(&R::Elem) -> S::Elem) -> Mat<S> {
        Mat { ring: ring.clone(), rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn try_map<S: Ring, E>(&self, ring: &S, f: impl Fn(&R::Elem) -> Result<S::Elem, E>) -> Result<Mat<S>, E> {
        let data = self.data.iter().map(f).collect::<Result<Vec<_>, E>>()?;
        Ok(Mat { ring: ring.clone(), rows: self.rows, cols: self.cols, data })
    }

    pub fn is_identity(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| {
                (0..self.cols).all(|j| {
                    let v = self.get(i, j);
                    if i == j {
                        *v == self.ring.one()
                    } else {
                        self.ring.is_zero(v)
                    }
                })
            })
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| self.ring.is_zero(x))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(&self.ring, self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    /// Anti-transpose: `result[i][j] = A[n-1-j][n-1-i]`.
    pub fn tau(&self) -> Result<Self, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare { rows: self.rows, cols: self.cols });
        }
        let n = self.rows;
        Ok(Self::from_fn(&self.ring, n, n, |i, j| self.get(n - 1 - j, n - 1 - i).clone()))
    }

    fn check_ring(&self, other: &Self) -> Result<(), LinalgError> {
        if self.ring.same_ring(&other.ring) {
            Ok(())
        } else {
            Err(LinalgError::RingMismatch)
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_ring(other)?;
        if self.cols != other.rows {
            return Err(LinalgError::DimMismatch(format!("{}x{} times {}x{}", self.rows, self.cols, other.rows, other.cols)));
        }
        let r = &self.ring;
        Ok(Self::from_fn(r, self.rows, other.cols, |i, j| {
            let mut acc = r.zero();
            for k in 0..self.cols {
                let a = self.get(i, k);
                if r.is_zero(a) {
                    continue;
                }
                let b = other.get(k, j);
                if r.is_zero(b) {
                    continue;
                }
                acc = r.add(&acc, &r.mul(a, b));
            }
            acc
        }))
    }

    fn zip(&self, other: &Self, f: impl Fn(&R::Elem, &R::Elem) -> R::Elem) -> Result<Self, LinalgError> {
        self.check_ring(other)?;
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::DimMismatch("entrywise operation".into()));
        }
        Ok(Mat {
            ring: self.ring.clone(),
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        let r = self.ring.clone();
        self.zip(other, |a, b| r.add(a, b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        let r = self.ring.clone();
        self.zip(other, |a, b| r.sub(a, b))
    }

    pub fn scale(&self, c: &R::Elem) -> Self {
        self.map(&self.ring, |x| self.ring.mul(c, x))
    }

    /// Kronecker product: block `(i, j)` is `A[i][j] * B`.
    pub fn kron(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_ring(other)?;
        let (br, bc) = (other.rows, other.cols);
        let r = &self.ring;
        Ok(Self::from_fn(r, self.rows * br, self.cols * bc, |i, j| r.mul(self.get(i / br, j / bc), other.get(i % br, j % bc))))
    }

    /// Block-diagonal sum.
    pub fn direct_sum(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_ring(other)?;
        let r = &self.ring;
        Ok(Self::from_fn(r, self.rows + other.rows, self.cols + other.cols, |i, j| match (i < self.rows, j < self.cols) {
            (true, true) => self.get(i, j).clone(),
            (false, false) => other.get(i - self.rows, j - self.cols).clone(),
            _ => r.zero(),
        }))
    }

    /// Rows stacked on top of each other.
    pub fn vstack(mats: &[Self]) -> Result<Self, LinalgError> {
        let first = mats.first().ok_or_else(|| LinalgError::DimMismatch("empty stack".into()))?;
        let mut data = Vec::new();
        let mut rows = 0;
        for m in mats {
            first.check_ring(m)?;
            if m.cols != first.cols {
                return Err(LinalgError::DimMismatch("stack column count".into()));
            }
            data.extend_from_slice(&m.data);
            rows += m.rows;
        }
        Ok(Mat { ring: first.ring.clone(), rows, cols: first.cols, data })
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(&self.ring, rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]).clone())
    }

    pub fn pow(&self, mut n: u64) -> Result<Self, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare { rows: self.rows, cols: self.cols });
        }
        let mut acc = Self::identity(&self.ring, self.rows);
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }
}

/// Result of a row reduction.
#[derive(Clone, Debug)]
pub struct Rref {
    pub matrix: FqMat,
    pub pivots: Vec<usize>,
}

impl Mat<FieldCtx> {
    pub fn ctx(&self) -> &FieldCtx {
        &self.ring
    }

    /// Reduced row echelon form with first-nonzero pivoting.
    pub fn rref(&self) -> Rref {
        let f = &self.ring;
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(pr) = (r..m.rows).find(|&i| !m.get(i, c).is_zero()) else { continue };
            if pr != r {
                for j in 0..m.cols {
                    m.data.swap(pr * m.cols + j, r * m.cols + j);
                }
            }
            let inv = f.inv(*m.get(r, c)).expect("pivot is nonzero");
            for j in c..m.cols {
                let v = f.mul(*m.get(r, j), inv);
                m.set(r, j, v);
            }
            for i in 0..m.rows {
                if i == r {
                    continue;
                }
                let factor = *m.get(i, c);
                if factor.is_zero() {
                    continue;
                }
                for j in c..m.cols {
                    let v = f.sub(*m.get(i, j), f.mul(factor, *m.get(r, j)));
                    m.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        Rref { matrix: m, pivots }
    }

    pub fn rank(&self) -> usize {
        self.rref().pivots.len()
    }

    /// Basis of `{v : A v = 0}`, one vector per free column.
    pub fn nullspace(&self) -> Vec<Vec<FqElem>> {
        let f = &self.ring;
        let Rref { matrix, pivots } = self.rref();
        let mut basis = Vec::new();
        for free in (0..self.cols).filter(|c| !pivots.contains(c)) {
            let mut v = vec![FqElem::ZERO; self.cols];
            v[free] = FqElem::ONE;
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = f.neg(*matrix.get(r, free));
            }
            basis.push(v);
        }
        basis
    }

    pub fn nullity(&self) -> usize {
        self.cols - self.rank()
    }

    pub fn inverse(&self) -> Result<Self, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare { rows: self.rows, cols: self.cols });
        }
        let n = self.rows;
        let f = &self.ring;
        let aug = Self::from_fn(f, n, 2 * n, |i, j| {
            if j < n {
                *self.get(i, j)
            } else if j - n == i {
                FqElem::ONE
            } else {
                FqElem::ZERO
            }
        });
        let red = aug.rref();
        if red.pivots.len() < n || red.pivots[n - 1] != n - 1 {
            return Err(LinalgError::Singular);
        }
        Ok(Self::from_fn(f, n, n, |i, j| *red.matrix.get(i, j + n)))
    }

    pub fn det(&self) -> Result<FqElem, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare { rows: self.rows, cols: self.cols });
        }
        let f = &self.ring;
        let n = self.rows;
        let mut m = self.clone();
        let mut det = FqElem::ONE;
        for c in 0..n {
            let Some(pr) = (c..n).find(|&i| !m.get(i, c).is_zero()) else { return Ok(FqElem::ZERO) };
            if pr != c {
                for j in 0..n {
                    m.data.swap(pr * n + j, c * n + j);
                }
                det = f.neg(det);
            }
            let piv = *m.get(c, c);
            det = f.mul(det, piv);
            let inv = f.inv(piv).expect("nonzero pivot");
            for i in c + 1..n {
                let factor = f.mul(*m.get(i, c), inv);
                if factor.is_zero() {
                    continue;
                }
                for j in c..n {
                    let v = f.sub(*m.get(i, j), f.mul(factor, *m.get(c, j)));
                    m.set(i, j, v);
                }
            }
        }
        Ok(det)
    }

    /// `Inn_P(A) = P^{-1} A P`.
    pub fn inn(&self, p: &Self) -> Result<Self, LinalgError> {
        p.inverse()?.mul(self)?.mul(p)
    }

    pub fn apply(&self, v: &[FqElem]) -> Vec<FqElem> {
        let f = &self.ring;
        (0..self.rows).map(|i| (0..self.cols).fold(FqElem::ZERO, |acc, j| f.add(acc, f.mul(*self.get(i, j), v[j])))).collect()
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(ctx: &FieldCtx, n: usize, cols: &[Vec<FqElem>]) -> Self {
        Self::from_fn(ctx, n, cols.len(), |i, j| cols[j][i])
    }

    /// Entrywise `x -> x^(p^e)`.
    pub fn frobenius(&self, e: u32) -> Self {
        self.map(&self.ring, |x| self.ring.frobenius(*x, e))
    }

    /// Nested residue codes, as used in JSON output.
    pub fn to_codes(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|i| self.row(i).iter().map(|x| x.code()).collect()).collect()
    }

    pub fn from_codes(ctx: &FieldCtx, codes: &[Vec<u32>]) -> Result<Self, LinalgError> {
        let rows = codes.len();
        let cols = codes.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows * cols);
        for r in codes {
            if r.len() != cols {
                return Err(LinalgError::DimMismatch("ragged rows".into()));
            }
            for &c in r {
                data.push(ctx.from_code(c).ok_or_else(|| LinalgError::DimMismatch(format!("code {c} out of range")))?);
            }
        }
        Self::new(ctx, rows, cols, data)
    }

    /// Constant polynomial matrix; entries must lie in the prime field.
    pub fn to_poly(&self, ring: &PolyRing) -> Result<PolyMat, LinalgError> {
        let f = &self.ring;
        self.try_map(ring, |x| {
            if !f.in_prime_field(*x) {
                return Err(LinalgError::NotPrimeField);
            }
            Ok(MPoly::constant(ring.p, &ring.vars, x.code() as i64))
        })
    }

    /// Random invertible matrix.
    pub fn random_invertible<G: rand::Rng + ?Sized>(ctx: &FieldCtx, n: usize, rng: &mut G) -> Self {
        loop {
            let m = Self::from_fn(ctx, n, n, |_, _| ctx.random(rng));
            if m.rank() == n {
                return m;
            }
        }
    }
}

impl Mat<PolyRing> {
    pub fn eval(&self, ctx: &FieldCtx, point: &[FqElem]) -> Result<FqMat, LinalgError> {
        Ok(self.try_map(ctx, |f| f.eval(ctx, point))?)
    }

    /// Evaluation without per-entry checks; `point` must match the variable list.
    pub fn eval_unchecked(&self, ctx: &FieldCtx, point: &[FqElem]) -> FqMat {
        self.map(ctx, |f| f.eval_unchecked(ctx, point))
    }

    pub fn reduce(&self, rs: &RewriteSystem) -> Self {
        self.map(&self.ring, |f| rs.reduce(f))
    }

    pub fn sl2_reduce(&self) -> Self {
        let rs = RewriteSystem::for_vars(&self.ring.vars);
        self.reduce(&rs)
    }

    pub fn frobenius_twist(&self, e: u32) -> Result<Self, LinalgError> {
        Ok(self.try_map(&self.ring, |f| f.frobenius_twist(e))?)
    }

    pub fn monomial_map(&self, target: &Vars, map: &[(usize, u32)]) -> Result<Self, LinalgError> {
        let ring = PolyRing::new(self.ring.p, target);
        Ok(self.try_map(&ring, |f| f.monomial_map(target, map))?)
    }

    pub fn compose(&self, images: &[MPoly]) -> Result<Self, LinalgError> {
        let ring = match images.first() {
            Some(f) => PolyRing::new(f.p(), f.vars()),
            None => self.ring.clone(),
        };
        Ok(self.try_map(&ring, |f| f.compose(images))?)
    }

    pub fn total_degree(&self) -> u32 {
        self.data.iter().map(|f| f.total_degree()).max().unwrap_or(0)
    }

    /// Entries rendered in the textual polynomial format.
    pub fn to_strings(&self) -> Vec<Vec<String>> {
        (0..self.rows).map(|i| self.row(i).iter().map(|f| f.to_string()).collect()).collect()
    }

    pub fn parse(ring: &PolyRing, rows: &[&[&str]]) -> Result<Self, LinalgError> {
        let n = rows.len();
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n * cols);
        for r in rows {
            if r.len() != cols {
                return Err(LinalgError::DimMismatch("ragged rows".into()));
            }
            for s in r.iter() {
                data.push(MPoly::parse(ring.p, &ring.vars, s)?);
            }
        }
        Self::new(ring, n, cols, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::enumerate_sl2;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn f5() -> FieldCtx {
        FieldCtx::prime(5).unwrap()
    }

    fn random_mat(ctx: &FieldCtx, r: usize, c: usize, rng: &mut rand_chacha::ChaCha8Rng) -> FqMat {
        FqMat::from_fn(ctx, r, c, |_, _| ctx.random(rng))
    }

    #[test]
    fn tau_examples() {
        let f = f5();
        assert_eq!(FqMat::unit(&f, 4, 1, 2).tau().unwrap(), FqMat::unit(&f, 4, 3, 4));
        let d = FqMat::diag(&f, &[f.from_int(1), f.from_int(2), f.from_int(3), f.from_int(4)]);
        let rd = FqMat::diag(&f, &[f.from_int(4), f.from_int(3), f.from_int(2), f.from_int(1)]);
        assert_eq!(d.tau().unwrap(), rd);
        assert!(matches!(FqMat::zeros(&f, 2, 3).tau(), Err(LinalgError::NotSquare { .. })));
    }

    #[test]
    fn nullspace_examples() {
        let f = f5();
        assert_eq!(FqMat::zeros(&f, 4, 4).nullity(), 4);
        let f3 = FieldCtx::prime(3).unwrap();
        let n = FqMat::from_ints(&f3, 2, 2, &[0, 1, 0, 0]);
        assert_eq!(n.nullity(), 1);
        assert_eq!(FqMat::identity(&f, 4).nullity(), 0);
    }

    #[test]
    fn kron_and_sum_examples() {
        let f = f5();
        let i2 = FqMat::identity(&f, 2);
        assert_eq!(i2.kron(&i2).unwrap(), FqMat::identity(&f, 4));
        assert_eq!(i2.direct_sum(&i2).unwrap(), FqMat::identity(&f, 4));
        let e = FqMat::unit(&f, 2, 1, 1).kron(&FqMat::unit(&f, 2, 2, 2)).unwrap();
        assert_eq!(e, FqMat::unit(&f, 4, 2, 2));
        let f3 = FieldCtx::prime(3).unwrap();
        let all = enumerate_sl2(&f3, 1000).unwrap();
        let to_mat = |m: &[FqElem; 4]| FqMat::new(&f3, 2, 2, m.to_vec()).unwrap();
        let s = to_mat(&all[5]).direct_sum(&to_mat(&all[17])).unwrap();
        assert_eq!(s.det().unwrap(), f3.one());
        for (i, j) in [(0, 2), (0, 3), (1, 2), (3, 0), (2, 1)] {
            assert!(s.get(i, j).is_zero());
        }
        let g = FieldCtx::prime(7).unwrap();
        assert!(matches!(i2.kron(&FqMat::identity(&g, 2)), Err(LinalgError::RingMismatch)));
    }

    #[test]
    fn swaps_and_inverse() {
        let f = f5();
        let p = FqMat::swap(&f, 4, 3, 4);
        assert_eq!(p.mul(&p).unwrap(), FqMat::identity(&f, 4));
        let a = FqMat::from_ints(&f, 2, 2, &[2, 1, 1, 1]);
        assert_eq!(a.mul(&a.inverse().unwrap()).unwrap(), FqMat::identity(&f, 2));
        assert_eq!(FqMat::from_ints(&f, 2, 2, &[1, 2, 2, 4]).inverse(), Err(LinalgError::Singular));
        // conjugation by a swap exchanges diagonal entries
        let d = FqMat::diag(&f, &[f.from_int(1), f.from_int(2), f.from_int(3), f.from_int(4)]);
        let c = d.inn(&p).unwrap();
        assert_eq!(c.get(2, 2), &f.from_int(4));
    }

    #[test]
    fn polynomial_matrices() {
        let ring = PolyRing::new(5, &crate::symbolic::vars(&["a", "b", "c", "d"]));
        let x = PolyMat::parse(&ring, &[&["a", "b"], &["c", "d"]]).unwrap();
        let det = x.get(0, 0) * x.get(1, 1) - x.get(0, 1) * x.get(1, 0);
        let rs = RewriteSystem::for_vars(&ring.vars);
        assert_eq!(rs.reduce(&det), MPoly::one(5, &ring.vars));
        let f = f5();
        let m = [f.from_int(2), f.from_int(1), f.from_int(1), f.from_int(1)];
        assert_eq!(x.eval(&f, &m).unwrap(), FqMat::new(&f, 2, 2, m.to_vec()).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn tau_reverses_products(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = FieldCtx::new(3, 2).unwrap();
            let a = random_mat(&f, 4, 4, &mut rng);
            let b = random_mat(&f, 4, 4, &mut rng);
            prop_assert_eq!(a.mul(&b).unwrap().tau().unwrap(), b.tau().unwrap().mul(&a.tau().unwrap()).unwrap());
            prop_assert_eq!(a.tau().unwrap().tau().unwrap(), a);
        }

        #[test]
        fn conjugation_composes(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = FieldCtx::new(2, 3).unwrap();
            let a = random_mat(&f, 4, 4, &mut rng);
            let p = FqMat::random_invertible(&f, 4, &mut rng);
            let q = FqMat::random_invertible(&f, 4, &mut rng);
            prop_assert_eq!(a.inn(&q).unwrap().inn(&p).unwrap(), a.inn(&q.mul(&p).unwrap()).unwrap());
        }

        #[test]
        fn mixed_product_law(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = f5();
            let [a, b, c, d] = [0; 4].map(|_| random_mat(&f, 2, 2, &mut rng));
            let lhs = a.kron(&b).unwrap().mul(&c.kron(&d).unwrap()).unwrap();
            let rhs = a.mul(&c).unwrap().kron(&b.mul(&d).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn nullspace_is_sound(seed in any::<u64>(), r in 1usize..7, c in 1usize..7) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = FieldCtx::new(2, 2).unwrap();
            let a = random_mat(&f, r, c, &mut rng);
            let ns = a.nullspace();
            prop_assert_eq!(a.rank() + ns.len(), c);
            for v in &ns {
                prop_assert!(a.apply(v).iter().all(|x| x.is_zero()));
            }
            if !ns.is_empty() {
                prop_assert_eq!(FqMat::from_columns(&f, c, &ns).rank(), ns.len());
            }
        }

        #[test]
        fn det_is_multiplicative(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = FieldCtx::new(5, 2).unwrap();
            let a = random_mat(&f, 4, 4, &mut rng);
            let b = random_mat(&f, 4, 4, &mut rng);
            prop_assert_eq!(a.mul(&b).unwrap().det().unwrap(), f.mul(a.det().unwrap(), b.det().unwrap()));
            prop_assert_eq!(a.direct_sum(&b).unwrap().det().unwrap(), f.mul(a.det().unwrap(), b.det().unwrap()));
        }
    }
}
