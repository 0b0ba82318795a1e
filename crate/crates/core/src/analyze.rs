//! Invariants, classification, equivalence and direct-sum decomposition of
//! representations `SL(2, F_q) -> SL(n, F_q)` given by generator images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::catalog::{build_sigma, instances, CatalogError, ClosedFormRep, Family, FormSpec, Label, Small, SHARP_LABELS};
use crate::field::{FieldCtx, FieldError, FqElem, Sl2};
use crate::linalg::{FqMat, LinalgError};
use crate::verify::{lower, torus, upper, Evaluator, RepRef, VerifyError, DEFAULT_SEED};

/// Default ceiling on enumerated idempotent or intertwiner candidates.
pub const SEARCH_BUDGET: u64 = 1_000_000;
/// Random `F_q`-combinations tried after the prime-field enumeration in equivalence checks.
pub const EQUIV_SAMPLES: usize = 256;
/// Exponent ceiling of the classification table.
pub const CLASSIFY_MAX_E: i64 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalyzeError {
    #[error("field F_{0} is too small; invariants need q >= 4")]
    FieldTooSmall(u32),
    #[error("no catalog class has signature {0}")]
    NoMatch(String),
    #[error("signature {signature} matches several classes: {candidates:?}")]
    AmbiguousMatch { signature: String, candidates: Vec<String> },
    #[error("search space of {size} candidates exceeds the budget {budget}")]
    SearchBudgetExceeded { size: String, budget: u64 },
    #[error("summand of dimension {0} is not equivalent to a small-dimensional catalog form")]
    UnidentifiedSummand(usize),
    #[error("representations live over different fields or dimensions")]
    Incompatible,
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Field used for invariants at characteristic `p`: `F_{p^4}` while it stays small, else `F_{p^2}`.
///
/// Four is the largest supported extension degree, so Frobenius twists up to `e = 3`
/// remain distinguishable.
pub fn analysis_field(p: u32) -> Result<FieldCtx, FieldError> {
    let m = if (p as u64).pow(4) <= 50_000 { 4 } else { 2 };
    FieldCtx::new(p, m)
}

/// Images of a generating set of `SL(2, F_q)`.
///
/// Order: `upper(1)`, `lower(1)`, `torus(g)` for the field's primitive element `g`, then
/// `upper(x)` and `lower(x)` for the remaining `F_p`-basis elements `x` of `F_q`.
#[derive(Clone, Debug)]
pub struct GenImages {
    pub ctx: FieldCtx,
    pub images: Vec<FqMat>,
    /// Coefficient matrices `C_k` of the torus image `sum_k u^k C_k`, when known.
    /// The rank of `C_k` is the multiplicity of weight `k`.
    pub torus_coeffs: Option<Vec<(i64, FqMat)>>,
}

/// The generator elements whose images [`GenImages`] stores.
pub fn generators(ctx: &FieldCtx) -> Vec<Sl2> {
    let mut g = vec![upper(ctx, ctx.one()), lower(ctx, ctx.one()), torus(ctx, ctx.primitive())];
    for i in 1..ctx.m() {
        let x = ctx.from_code(ctx.p().pow(i)).expect("basis element");
        g.push(upper(ctx, x));
        g.push(lower(ctx, x));
    }
    g
}

fn closed_torus_coeffs(rep: &ClosedFormRep, ctx: &FieldCtx) -> Vec<(i64, FqMat)> {
    let n = rep.n();
    let mut out: Vec<(i64, FqMat)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for (e, c) in rep.entries.get(i, j).terms() {
                if e[1] != 0 || e[2] != 0 {
                    continue;
                }
                let w = e[0] as i64 - e[3] as i64;
                let k = match out.iter().position(|(x, _)| *x == w) {
                    Some(k) => k,
                    None => {
                        out.push((w, FqMat::zeros(ctx, n, n)));
                        out.len() - 1
                    }
                };
                let v = ctx.add(*out[k].1.get(i, j), ctx.from_int(c as i64));
                out[k].1.set(i, j, v);
            }
        }
    }
    out.sort_by_key(|(w, _)| -w);
    out
}

impl GenImages {
    pub fn from_rep(rep: RepRef<'_>, ctx: &FieldCtx) -> Result<Self, AnalyzeError> {
        let ev = Evaluator::new(rep, ctx)?;
        let images = generators(ctx).iter().map(|g| ev.eval(g)).collect();
        let torus_coeffs = match rep {
            RepRef::Closed(c) => Some(closed_torus_coeffs(c, ctx)),
            RepRef::Datum(d) => {
                let n = d.n();
                let mut ws = d.weights.clone();
                ws.sort_unstable_by(|a, b| b.cmp(a));
                ws.dedup();
                Some(
                    ws.into_iter()
                        .map(|w| {
                            let m = FqMat::from_fn(
                                ctx,
                                n,
                                n,
                                |i, j| if i == j && d.weights[i] == w { ctx.one() } else { ctx.zero() },
                            );
                            (w, m)
                        })
                        .collect(),
                )
            }
        };
        Ok(GenImages { ctx: ctx.clone(), images, torus_coeffs })
    }

    pub fn of_closed(rep: &ClosedFormRep, ctx: &FieldCtx) -> Result<Self, AnalyzeError> {
        Self::from_rep(RepRef::Closed(rep), ctx)
    }

    pub fn n(&self) -> usize {
        self.images[0].rows()
    }

    pub fn upper_one(&self) -> &FqMat {
        &self.images[0]
    }

    pub fn lower_one(&self) -> &FqMat {
        &self.images[1]
    }

    /// Images of `upper(x)` for an `F_p`-basis `x` of `F_q`; they generate the upper unipotent image.
    pub fn upper_images(&self) -> Vec<FqMat> {
        let mut v = vec![self.images[0].clone()];
        v.extend(self.images[3..].iter().step_by(2).cloned());
        v
    }

    pub fn lower_images(&self) -> Vec<FqMat> {
        let mut v = vec![self.images[1].clone()];
        v.extend(self.images[4..].iter().step_by(2).cloned());
        v
    }

    pub fn torus_gen(&self) -> &FqMat {
        &self.images[2]
    }

    /// `Inn_P`: every image becomes `P^{-1} A P`.
    pub fn conjugate(&self, pm: &FqMat) -> Result<Self, AnalyzeError> {
        let images = self.images.iter().map(|a| a.inn(pm)).collect::<Result<_, _>>()?;
        let torus_coeffs = match &self.torus_coeffs {
            Some(cs) => Some(cs.iter().map(|(w, c)| Ok((*w, c.inn(pm)?))).collect::<Result<_, LinalgError>>()?),
            None => None,
        };
        Ok(GenImages { ctx: self.ctx.clone(), images, torus_coeffs })
    }

    /// Images restricted to the coordinates `range` after conjugating by `q`.
    ///
    /// The caller guarantees that `q^{-1} A q` is block diagonal with `range` as a block.
    fn block(&self, q: &FqMat, range: std::ops::Range<usize>) -> Result<Self, AnalyzeError> {
        let idx: Vec<usize> = range.collect();
        let conj = self.conjugate(q)?;
        let cut = |m: &FqMat| m.submatrix(&idx, &idx);
        let torus_coeffs = conj.torus_coeffs.as_ref().and_then(|cs| {
            // weights colliding modulo q - 1 need not split along the block
            let outside: Vec<usize> = (0..self.n()).filter(|i| !idx.contains(i)).collect();
            let split = cs.iter().all(|(_, c)| c.submatrix(&idx, &outside).is_zero() && c.submatrix(&outside, &idx).is_zero());
            split.then(|| cs.iter().map(|(w, c)| (*w, cut(c))).filter(|(_, c)| !c.is_zero()).collect())
        });
        Ok(GenImages { ctx: self.ctx.clone(), images: conj.images.iter().map(cut).collect(), torus_coeffs })
    }
}

fn minus_identity(a: &FqMat) -> FqMat {
    let ctx = a.ctx();
    FqMat::from_fn(ctx, a.rows(), a.cols(), |i, j| if i == j { ctx.sub(*a.get(i, j), ctx.one()) } else { *a.get(i, j) })
}

fn fixed_dim(mats: &[FqMat]) -> Result<usize, AnalyzeError> {
    let stacked = FqMat::vstack(&mats.iter().map(minus_identity).collect::<Vec<_>>())?;
    Ok(stacked.nullity())
}

/// Dimensions of the fixed column vectors and fixed row vectors of the whole group.
pub fn fixed_dims(g: &GenImages) -> Result<(usize, usize), AnalyzeError> {
    if g.ctx.q() < 4 {
        return Err(AnalyzeError::FieldTooSmall(g.ctx.q()));
    }
    let cols = fixed_dim(&g.images)?;
    let rows = fixed_dim(&g.images.iter().map(|a| a.transpose()).collect::<Vec<_>>())?;
    Ok((cols, rows))
}

/// Conjugation-invariant data separating the catalog classes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Signature {
    /// Torus weights in decreasing order.
    pub weights: Vec<i64>,
    /// Fixed column and row dimensions of the group.
    pub d_sigma: (usize, usize),
    /// Fixed column dimensions of the upper and lower unipotent images.
    pub d_unipotent: (usize, usize),
    /// Dimension of the commutant of the image.
    pub end_dim: usize,
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "weights {:?}, d {:?}, unipotent {:?}, end {}", self.weights, self.d_sigma, self.d_unipotent, self.end_dim)
    }
}

/// Weights as eigenvalue multiplicities of the torus generator image: `w` is counted
/// `dim ker(A - g^w I)` times, for `w` in the symmetric residue range modulo `q - 1`.
pub fn weights_mod(g: &GenImages) -> Vec<i64> {
    let ctx = &g.ctx;
    let order = ctx.q() as i64 - 1;
    let a = g.torus_gen();
    let n = g.n();
    let lo = -(order - 1) / 2;
    let mut out = Vec::new();
    for w in lo..lo + order {
        let gw = ctx.pow(ctx.primitive(), w).expect("nonzero");
        let shifted = FqMat::from_fn(ctx, n, n, |i, j| if i == j { ctx.sub(*a.get(i, j), gw) } else { *a.get(i, j) });
        for _ in 0..shifted.nullity() {
            out.push(w);
        }
    }
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

/// Torus weights: exact from coefficient matrices when available, else read modulo `q - 1`.
pub fn weights(g: &GenImages) -> Vec<i64> {
    match &g.torus_coeffs {
        Some(cs) => {
            let mut out: Vec<i64> = cs.iter().flat_map(|(w, c)| std::iter::repeat_n(*w, c.rank())).collect();
            out.sort_unstable_by(|a, b| b.cmp(a));
            out
        }
        None => weights_mod(g),
    }
}

pub fn signature(g: &GenImages) -> Result<Signature, AnalyzeError> {
    let d_sigma = fixed_dims(g)?;
    let d_unipotent = (fixed_dim(&g.upper_images())?, fixed_dim(&g.lower_images())?);
    let end_dim = endomorphism_algebra(g)?.dim();
    Ok(Signature { weights: weights(g), d_sigma, d_unipotent, end_dim })
}

/// Signature of a catalog form over `ctx`.
pub fn signature_of(spec: &FormSpec, ctx: &FieldCtx) -> Result<Signature, AnalyzeError> {
    let rep = build_sigma(spec)?;
    signature(&GenImages::of_closed(&rep, ctx)?)
}

/// Precomputed signatures of catalog classes at one characteristic.
#[derive(Clone, Debug)]
pub struct SignatureTable {
    pub ctx: FieldCtx,
    pub entries: Vec<(FormSpec, Signature)>,
}

impl SignatureTable {
    fn build(ctx: &FieldCtx, specs: Vec<FormSpec>) -> Result<Self, AnalyzeError> {
        let entries = specs.into_par_iter().map(|s| signature_of(&s, ctx).map(|sig| (s, sig))).collect::<Result<Vec<_>, _>>()?;
        Ok(SignatureTable { ctx: ctx.clone(), entries })
    }

    /// All sharp forms with exponents at most `max_e`.
    pub fn sharp(ctx: &FieldCtx, max_e: i64) -> Result<Self, AnalyzeError> {
        let specs = SHARP_LABELS.iter().flat_map(|&l| instances(Family::Sharp(l), ctx.p(), max_e)).collect();
        Self::build(ctx, specs)
    }

    /// Indecomposable small-dimensional forms with exponents at most `max_e`.
    pub fn small(ctx: &FieldCtx, max_e: i64) -> Result<Self, AnalyzeError> {
        let specs = Small::ALL
            .iter()
            .filter(|s| s.is_indecomposable())
            .flat_map(|&s| instances(Family::Small(s), ctx.p(), max_e))
            .collect();
        Self::build(ctx, specs)
    }

    /// Pairs of entries sharing a signature.
    pub fn collisions(&self) -> Vec<(FormSpec, FormSpec)> {
        let mut out = Vec::new();
        for (i, (a, sa)) in self.entries.iter().enumerate() {
            for (b, sb) in &self.entries[i + 1..] {
                if sa == sb {
                    out.push((a.clone(), b.clone()));
                }
            }
        }
        out
    }

    /// Distinct labels present in the table.
    pub fn labels(&self) -> Vec<Label> {
        let mut out: Vec<Label> = self
            .entries
            .iter()
            .filter_map(|(s, _)| match s.family {
                Family::Sharp(l) | Family::Star(l) | Family::Plus(l) | Family::Borel(l) => Some(l),
                Family::Small(_) => None,
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn lookup(&self, sig: &Signature) -> Result<FormSpec, AnalyzeError> {
        let hits: Vec<&FormSpec> = self.entries.iter().filter(|(_, s)| s == sig).map(|(f, _)| f).collect();
        match hits.as_slice() {
            [] => Err(AnalyzeError::NoMatch(sig.to_string())),
            [one] => Ok((*one).clone()),
            many => Err(AnalyzeError::AmbiguousMatch {
                signature: sig.to_string(),
                candidates: many.iter().map(|f| f.to_string()).collect(),
            }),
        }
    }

    pub fn classify(&self, g: &GenImages) -> Result<FormSpec, AnalyzeError> {
        if g.ctx != self.ctx {
            return Err(AnalyzeError::Incompatible);
        }
        self.lookup(&signature(g)?)
    }
}

/// Classify a four-dimensional representation against the sharp catalog.
pub fn classify(g: &GenImages) -> Result<FormSpec, AnalyzeError> {
    SignatureTable::sharp(&g.ctx, CLASSIFY_MAX_E)?.classify(g)
}

/// Commutant of the generator images.
#[derive(Clone, Debug)]
pub struct EndAlgebra {
    pub basis: Vec<FqMat>,
}

impl EndAlgebra {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Basis of `{X : X B_i = A_i X}`, in reduced echelon order of the flattened matrices.
fn intertwiners(a: &[FqMat], b: &[FqMat]) -> Result<Vec<FqMat>, AnalyzeError> {
    let n = a[0].rows();
    let ctx = a[0].ctx().clone();
    // row (g, i, j) of the system: sum_k X_ik B_kj - A_ik X_kj = 0, unknown X_rs at column r*n+s
    let mut rows = Vec::with_capacity(a.len() * n * n);
    for (ag, bg) in a.iter().zip(b) {
        for i in 0..n {
            for j in 0..n {
                let mut row = vec![ctx.zero(); n * n];
                for k in 0..n {
                    row[i * n + k] = ctx.add(row[i * n + k], *bg.get(k, j));
                    row[k * n + j] = ctx.sub(row[k * n + j], *ag.get(i, k));
                }
                rows.push(row);
            }
        }
    }
    let sys = FqMat::from_fn(&ctx, rows.len(), n * n, |r, c| rows[r][c]);
    let mut basis: Vec<Vec<FqElem>> = sys.nullspace();
    // reduced echelon order: row reduce the basis vectors themselves
    if !basis.is_empty() {
        let m = FqMat::from_fn(&ctx, basis.len(), n * n, |r, c| basis[r][c]);
        let red = m.rref();
        basis = (0..red.pivots.len()).map(|r| red.matrix.row(r).to_vec()).collect();
    }
    Ok(basis.into_iter().map(|v| FqMat::from_fn(&ctx, n, n, |i, j| v[i * n + j])).collect())
}

pub fn endomorphism_algebra(g: &GenImages) -> Result<EndAlgebra, AnalyzeError> {
    Ok(EndAlgebra { basis: intertwiners(&g.images, &g.images)? })
}

/// Prime-field combinations of `basis` in lexicographic order (last coordinate fastest),
/// skipping the zero vector. Yields at most `budget` items; the flag tells whether that
/// covers the whole space.
fn prime_combinations<'a>(ctx: &FieldCtx, basis: &'a [FqMat], budget: u64) -> (impl Iterator<Item = FqMat> + 'a, bool) {
    let p = ctx.p() as u64;
    let dim = basis.len() as u32;
    let size = p.checked_pow(dim);
    let complete = size.is_some_and(|s| s <= budget);
    let end = size.unwrap_or(u64::MAX).min(budget);
    let ctx = ctx.clone();
    let it = (1..end).map(move |mut code| {
        let mut coeffs = vec![0u64; basis.len()];
        for c in coeffs.iter_mut().rev() {
            *c = code % p;
            code /= p;
        }
        combine(&ctx, basis, &coeffs.iter().map(|&c| ctx.from_int(c as i64)).collect::<Vec<_>>())
    });
    (it, complete)
}

fn budget_error(ctx: &FieldCtx, dim: usize, budget: u64) -> AnalyzeError {
    AnalyzeError::SearchBudgetExceeded { size: format!("{}^{dim}", ctx.p()), budget }
}

fn combine(ctx: &FieldCtx, basis: &[FqMat], coeffs: &[FqElem]) -> FqMat {
    let n = basis[0].rows();
    let mut x = FqMat::zeros(ctx, n, n);
    for (b, &c) in basis.iter().zip(coeffs) {
        if c.is_zero() {
            continue;
        }
        x = x.add(&b.scale(&c)).expect("same shape");
    }
    x
}

/// First nontrivial idempotent of the endomorphism algebra, if any.
pub fn find_idempotent(end: &EndAlgebra, ctx: &FieldCtx, budget: u64) -> Result<Option<FqMat>, AnalyzeError> {
    if end.basis.is_empty() {
        return Ok(None);
    }
    let (candidates, complete) = prime_combinations(ctx, &end.basis, budget);
    for x in candidates {
        if !x.is_identity() && x.mul(&x)? == x {
            return Ok(Some(x));
        }
    }
    if complete {
        Ok(None)
    } else {
        Err(budget_error(ctx, end.dim(), budget))
    }
}

/// Whether 0 and I are the only idempotents among prime-field combinations of the commutant basis.
pub fn is_indecomposable(g: &GenImages) -> Result<bool, AnalyzeError> {
    let end = endomorphism_algebra(g)?;
    Ok(find_idempotent(&end, &g.ctx, SEARCH_BUDGET)?.is_none())
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport {
    /// Summand classes with multiplicities, in order of first appearance.
    pub summands: Vec<(FormSpec, usize)>,
    /// Conjugator `Q` such that `Q^{-1} A Q` is block diagonal for every generator image.
    #[serde(serialize_with = "ser_codes")]
    pub conjugator: FqMat,
    /// Block sizes along the diagonal of the conjugated images.
    pub blocks: Vec<usize>,
}

fn ser_codes<S: serde::Serializer>(m: &FqMat, s: S) -> Result<S::Ok, S::Error> {
    m.to_codes().serialize(s)
}

/// Column-space basis of `x` as a list of columns.
fn column_space(x: &FqMat) -> Vec<Vec<FqElem>> {
    let pivots = x.rref().pivots;
    pivots.iter().map(|&c| (0..x.rows()).map(|i| *x.get(i, c)).collect()).collect()
}

fn split(g: &GenImages, budget: u64) -> Result<Vec<(FqMat, GenImages)>, AnalyzeError> {
    let end = endomorphism_algebra(g)?;
    let Some(x) = find_idempotent(&end, &g.ctx, budget)? else {
        return Ok(vec![(FqMat::identity(&g.ctx, g.n()), g.clone())]);
    };
    let im = column_space(&x);
    let ker = x.nullspace();
    let r = im.len();
    let cols: Vec<Vec<FqElem>> = im.into_iter().chain(ker).collect();
    let q = FqMat::from_columns(&g.ctx, g.n(), &cols);
    let mut out = Vec::new();
    for range in [0..r, r..g.n()] {
        let sub = g.block(&q, range.clone())?;
        for (qs, leaf) in split(&sub, budget)? {
            // embed the sub-conjugator as columns of the full space
            let idx: Vec<usize> = range.clone().collect();
            let cols_sub = q.submatrix(&(0..g.n()).collect::<Vec<_>>(), &idx);
            out.push((cols_sub.mul(&qs)?, leaf));
        }
    }
    Ok(out)
}

/// Split into indecomposable summands and name each one.
///
/// Summands of dimension at most three are named from the small-dimensional catalog;
/// an indecomposable four-dimensional representation is named from the sharp catalog.
pub fn decompose(g: &GenImages) -> Result<DecompositionReport, AnalyzeError> {
    let parts = split(g, SEARCH_BUDGET)?;
    let small = SignatureTable::small(&g.ctx, CLASSIFY_MAX_E)?;
    let mut summands: Vec<(FormSpec, usize)> = Vec::new();
    let mut blocks = Vec::new();
    let mut cols: Vec<Vec<FqElem>> = Vec::new();
    for (qpart, leaf) in &parts {
        let dim = leaf.n();
        let name = if dim <= 3 {
            small.classify(leaf).map_err(|_| AnalyzeError::UnidentifiedSummand(dim))?
        } else {
            classify(leaf).map_err(|_| AnalyzeError::UnidentifiedSummand(dim))?
        };
        match summands.iter_mut().find(|(s, _)| *s == name) {
            Some(entry) => entry.1 += 1,
            None => summands.push((name, 1)),
        }
        blocks.push(dim);
        for c in 0..qpart.cols() {
            cols.push((0..qpart.rows()).map(|i| *qpart.get(i, c)).collect());
        }
    }
    let conjugator = FqMat::from_columns(&g.ctx, g.n(), &cols);
    Ok(DecompositionReport { summands, conjugator, blocks })
}

/// Evidence behind a negative equivalence verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonEquivalence {
    /// No nonzero intertwiner exists.
    ZeroIntertwiners,
    /// Every prime-field combination and the random `F_q` samples are singular.
    Exhausted,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Equivalence {
    Equivalent(FqMat),
    NotEquivalent(NonEquivalence),
}

/// Search for `P` with `P^{-1} A_i P = B_i` for all generators.
pub fn check_equivalence(a: &GenImages, b: &GenImages, seed: u64, budget: u64) -> Result<Equivalence, AnalyzeError> {
    if a.ctx != b.ctx || a.n() != b.n() || a.images.len() != b.images.len() {
        return Err(AnalyzeError::Incompatible);
    }
    let ctx = &a.ctx;
    let space = intertwiners(&a.images, &b.images)?;
    if space.is_empty() {
        return Ok(Equivalence::NotEquivalent(NonEquivalence::ZeroIntertwiners));
    }
    let invertible = |x: &FqMat| x.det().map(|d| !d.is_zero()).unwrap_or(false);
    let verified = |x: &FqMat| a.images.iter().zip(&b.images).all(|(ai, bi)| ai.inn(x).map(|c| c == *bi).unwrap_or(false));
    let (mut candidates, exhaustive) = prime_combinations(ctx, &space, budget);
    if let Some(x) = candidates.find(|x| invertible(x)) {
        debug_assert!(verified(&x));
        return Ok(Equivalence::Equivalent(x));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..EQUIV_SAMPLES {
        let coeffs: Vec<FqElem> = space.iter().map(|_| ctx.random(&mut rng)).collect();
        let x = combine(ctx, &space, &coeffs);
        if invertible(&x) && verified(&x) {
            return Ok(Equivalence::Equivalent(x));
        }
    }
    if exhaustive {
        Ok(Equivalence::NotEquivalent(NonEquivalence::Exhausted))
    } else {
        Err(budget_error(ctx, space.len(), budget))
    }
}

/// Random invertible matrix over `ctx`, drawn from a seeded generator.
pub fn random_conjugator(ctx: &FieldCtx, n: usize, seed: u64) -> FqMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let _: u32 = rng.random();
    FqMat::random_invertible(ctx, n, &mut rng)
}

/// Default seed for random conjugators in tests and the CLI.
pub const CONJUGATOR_SEED: u64 = DEFAULT_SEED;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ClosedFormRep, Params};

    fn images(form: &str, p: u32, params: &str) -> GenImages {
        let rep = build_sigma(&FormSpec::parse(form, p, params).unwrap()).unwrap();
        GenImages::of_closed(&rep, &analysis_field(p).unwrap()).unwrap()
    }

    fn sharp(form: &str, p: u32, params: &str) -> Signature {
        signature(&images(form, p, params)).unwrap()
    }

    #[test]
    fn fixed_dimension_examples() {
        assert_eq!(fixed_dims(&images("sharp:XI", 2, "e1=0")).unwrap(), (1, 2));
        assert_eq!(fixed_dims(&images("sharp:XIX", 2, "e1=0")).unwrap(), (2, 1));
        assert_eq!(fixed_dims(&images("sharp:XXVI", 3, "")).unwrap(), (4, 4));
        let rep = build_sigma(&FormSpec::parse("sharp:XI", 2, "e1=0").unwrap()).unwrap();
        let small = GenImages::of_closed(&rep, &FieldCtx::new(2, 1).unwrap()).unwrap();
        assert_eq!(fixed_dims(&small), Err(AnalyzeError::FieldTooSmall(2)));
    }

    #[test]
    fn signature_examples() {
        let s = sharp("sharp:II", 3, "e1=0");
        assert_eq!((s.weights.clone(), s.d_sigma, s.d_unipotent), (vec![3, 1, -1, -3], (0, 0), (1, 1)));
        let s = sharp("sharp:VII", 3, "e1=0");
        assert_eq!((s.weights.clone(), s.d_sigma, s.d_unipotent), (vec![3, 1, -1, -3], (0, 0), (2, 2)));
        let s = sharp("sharp:XXIV", 2, "e2=1");
        assert_eq!((s.weights.clone(), s.d_sigma), (vec![2, 0, 0, -2], (2, 2)));
    }

    #[test]
    fn modular_weights_agree_when_small() {
        let g = images("sharp:II", 3, "e1=0");
        assert_eq!(weights_mod(&g), vec![3, 1, -1, -3]);
        let ctx = analysis_field(2).unwrap();
        let g = images("sharp:V", 2, "e1=2");
        assert_eq!(weights(&g), vec![8, 0, 0, -8]);
        // 8 and -8 wrap around modulo 15
        assert_eq!(weights_mod(&g), vec![7, 0, 0, -7]);
        assert_eq!(ctx.q(), 16);
    }

    #[test]
    fn signature_is_conjugation_invariant() {
        let g = images("sharp:XV", 3, "e2=1,e3=0");
        let pm = random_conjugator(&g.ctx, 4, 7);
        let h = g.conjugate(&pm).unwrap();
        assert_eq!(signature(&g).unwrap(), signature(&h).unwrap());
        assert_eq!(classify(&h).unwrap(), FormSpec::parse("sharp:XV", 3, "e2=1,e3=0").unwrap());
        // raw images without coefficient data fall back to the modular reading
        let raw = GenImages { torus_coeffs: None, ..h };
        assert_eq!(classify(&raw).unwrap(), FormSpec::parse("sharp:XV", 3, "e2=1,e3=0").unwrap());
    }

    #[test]
    fn classify_star_forms() {
        let ctx = analysis_field(2).unwrap();
        for e in 0..=1 {
            let rep = build_sigma(&FormSpec::new(Family::Star(Label::XXI), 2, Params::new().with("e1", e))).unwrap();
            let got = classify(&GenImages::of_closed(&rep, &ctx).unwrap()).unwrap();
            assert_eq!(got, FormSpec::new(Family::Sharp(Label::V), 2, Params::new().with("e1", e)));
        }
        let rep = build_sigma(&FormSpec::parse("star:XXII", 3, "e1=1").unwrap()).unwrap();
        let got = classify(&GenImages::of_closed(&rep, &analysis_field(3).unwrap()).unwrap()).unwrap();
        assert_eq!(got, FormSpec::parse("sharp:XV", 3, "e2=1,e3=1").unwrap());
    }

    #[test]
    fn endomorphism_dimensions() {
        assert_eq!(endomorphism_algebra(&images("sharp:XXVI", 2, "")).unwrap().dim(), 16);
        let rep = build_sigma(&FormSpec::parse("small:2.1", 2, "e=0").unwrap()).unwrap();
        let g = GenImages::of_closed(&rep, &FieldCtx::new(2, 2).unwrap()).unwrap();
        assert_eq!(endomorphism_algebra(&g).unwrap().dim(), 1);
        let end = endomorphism_algebra(&images("sharp:XV", 2, "e2=1,e3=0")).unwrap();
        assert_eq!(end.dim(), 2);
        assert!(end.basis.iter().any(|b| b.is_identity()) || end.basis.len() == 2);
    }

    #[test]
    fn indecomposability_examples() {
        assert!(is_indecomposable(&images("sharp:IV", 2, "e1=0,e2=1")).unwrap());
        assert!(!is_indecomposable(&images("sharp:XXVI", 2, "")).unwrap());
        let rep: ClosedFormRep = build_sigma(&FormSpec::parse("small:2.1", 2, "e=0").unwrap()).unwrap();
        assert!(is_indecomposable(&GenImages::of_closed(&rep, &analysis_field(2).unwrap()).unwrap()).unwrap());
    }

    fn names(r: &DecompositionReport) -> Vec<(String, usize)> {
        let mut v: Vec<(String, usize)> = r.summands.iter().map(|(s, k)| (s.to_string(), *k)).collect();
        v.sort();
        v
    }

    #[test]
    fn decomposition_examples() {
        let g = images("sharp:XV", 2, "e2=1,e3=0");
        let r = decompose(&g).unwrap();
        let mut want = vec![
            (FormSpec::parse("small:2.1", 2, "e=1").unwrap().to_string(), 1),
            (FormSpec::parse("small:2.1", 2, "e=0").unwrap().to_string(), 1),
        ];
        want.sort();
        assert_eq!(names(&r), want);
        // the conjugator block-diagonalizes every image
        for a in g.conjugate(&r.conjugator).unwrap().images {
            assert!(a.submatrix(&[0, 1], &[2, 3]).is_zero() && a.submatrix(&[2, 3], &[0, 1]).is_zero());
        }

        let r = decompose(&images("sharp:IX", 3, "e1=0")).unwrap();
        let mut want = vec![
            (FormSpec::parse("small:3.2a", 3, "e=0").unwrap().to_string(), 1),
            (FormSpec::parse("small:1", 3, "").unwrap().to_string(), 1),
        ];
        want.sort();
        assert_eq!(names(&r), want);

        let r = decompose(&images("sharp:XXVI", 3, "")).unwrap();
        assert_eq!(names(&r), vec![(FormSpec::parse("small:1", 3, "").unwrap().to_string(), 4)]);

        let r = decompose(&images("sharp:IV", 2, "e1=0,e2=1")).unwrap();
        assert_eq!(names(&r), vec![(FormSpec::parse("sharp:IV", 2, "e1=0,e2=1").unwrap().to_string(), 1)]);
    }

    #[test]
    fn equivalence_examples() {
        let g = images("sharp:II", 3, "e1=0");
        assert!(matches!(check_equivalence(&g, &g, 1, SEARCH_BUDGET).unwrap(), Equivalence::Equivalent(_)));
        let h = images("sharp:VII", 3, "e1=0");
        assert!(matches!(check_equivalence(&g, &h, 1, SEARCH_BUDGET).unwrap(), Equivalence::NotEquivalent(_)));

        let ctx = analysis_field(2).unwrap();
        let a = GenImages::of_closed(&build_sigma(&FormSpec::parse("star:XXI", 2, "e1=0").unwrap()).unwrap(), &ctx).unwrap();
        let b = GenImages::of_closed(&build_sigma(&FormSpec::parse("star:V", 2, "e1=0").unwrap()).unwrap(), &ctx).unwrap();
        match check_equivalence(&a, &b, 1, SEARCH_BUDGET).unwrap() {
            Equivalence::Equivalent(pm) => {
                for (x, y) in a.images.iter().zip(&b.images) {
                    assert_eq!(&x.inn(&pm).unwrap(), y);
                }
            }
            other => panic!("expected equivalence, got {other:?}"),
        }
    }

    #[test]
    fn sharp_table_is_separating() {
        for (p, count) in [(2, 7), (3, 7), (5, 6)] {
            let t = SignatureTable::sharp(&analysis_field(p).unwrap(), CLASSIFY_MAX_E).unwrap();
            assert!(t.collisions().is_empty(), "p={p}: {:?}", t.collisions());
            assert_eq!(t.labels().len(), count);
        }
    }
}
