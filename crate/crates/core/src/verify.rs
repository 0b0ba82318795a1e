//! Homomorphism checks for Borel pairs and SL(2) representations.
//!
//! Two backends are available. The symbolic backend proves an identity in a polynomial
//! ring (or in the coordinate ring of SL(2)). The exhaustive backend evaluates over
//! finite fields. Every report names the backend that produced it.
//!
//! Exhaustive SL(2) checks test `sigma(g M) = sigma(g) sigma(M)` for every `M` in
//! `SL(2, F_q)` and every `g` in a generating set, together with `sigma(I) = I`.
//! This implies multiplicativity on all pairs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::catalog::{s_vars, t_vars, ClosedFormRep, GenDatum};
use crate::field::{enumerate_sl2, FieldCtx, FieldError, FqElem, Sl2, DEFAULT_ENUM_BUDGET};
use crate::linalg::{FqMat, LinalgError, PolyMat};
use crate::symbolic::{vars, MPoly, RewriteSystem, SymbolicError, SYMBOLIC_DEGREE_CAP};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("symbolic mode needs an untwisted closed form (twist {0}); use exhaustive mode")]
    DegreeTooLarge(u32),
    #[error("matrix is not in SL(2)")]
    NotUnimodular,
    #[error("generator datum has no phi_minus")]
    MissingPhiMinus,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("characteristic mismatch: rep over p = {rep}, field over p = {field}")]
    CharMismatch { rep: u32, field: u32 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Symbolic,
    Exhaustive,
    #[default]
    Auto,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "symbolic" => Ok(Mode::Symbolic),
            "exhaustive" => Ok(Mode::Exhaustive),
            "auto" => Ok(Mode::Auto),
            _ => Err(format!("unknown mode `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Symbolic,
    Exhaustive,
    Sampled,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Symbolic => "symbolic",
            Backend::Exhaustive => "exhaustive",
            Backend::Sampled => "sampled",
        })
    }
}

/// Points checked over one field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub q: u32,
    pub checked: u64,
    pub complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub q: u32,
    pub relation: String,
    /// Field elements of the failing point, in the field's display format.
    pub point: Vec<String>,
    pub lhs: Vec<Vec<u32>>,
    pub rhs: Vec<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub passed: bool,
    pub backend: Backend,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub coverage: Vec<Coverage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    /// First nonzero normal-form difference of a failed symbolic check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<String>,
    pub relations: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckReport {
    fn symbolic(relation: &str) -> Self {
        CheckReport {
            passed: true,
            backend: Backend::Symbolic,
            coverage: vec![],
            counterexample: None,
            residual: None,
            relations: vec![relation.to_string()],
            notes: vec![],
        }
    }

    fn exhaustive(relation: &str) -> Self {
        CheckReport { backend: Backend::Exhaustive, ..CheckReport::symbolic(relation) }
    }

    fn add_coverage(&mut self, c: Coverage) {
        if !c.complete {
            self.backend = Backend::Sampled;
        }
        self.coverage.push(c);
    }

    /// Conjunction of two reports. The weaker backend wins and the first failure is kept.
    pub fn merge(mut self, other: CheckReport) -> CheckReport {
        let rank = |b: Backend| match b {
            Backend::Symbolic => 0,
            Backend::Exhaustive => 1,
            Backend::Sampled => 2,
        };
        if rank(other.backend) > rank(self.backend) {
            self.backend = other.backend;
        }
        if self.passed && !other.passed {
            self.counterexample = other.counterexample;
            self.residual = other.residual;
        }
        self.passed &= other.passed;
        self.coverage.extend(other.coverage);
        self.relations.extend(other.relations);
        self.notes.extend(other.notes);
        self
    }
}

/// Settings shared by the checks.
#[derive(Clone, Debug)]
pub struct CheckConfig {
    pub mode: Mode,
    /// Fields for exhaustive scans; empty means the defaults for the characteristic.
    pub fields: Vec<FieldCtx>,
    /// Largest `SL(2, F_q)` that is enumerated; larger groups are sampled.
    pub enum_budget: u64,
    /// Number of random pairs when a group is sampled.
    pub samples: u64,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { mode: Mode::Auto, fields: vec![], enum_budget: DEFAULT_ENUM_BUDGET, samples: 10_000, seed: DEFAULT_SEED }
    }
}

pub const DEFAULT_SEED: u64 = 0x5eed;

impl CheckConfig {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_fields(mut self, fields: Vec<FieldCtx>) -> Self {
        self.fields = fields;
        self
    }

    fn point_fields(&self, p: u32) -> Result<Vec<FieldCtx>, VerifyError> {
        if !self.fields.is_empty() {
            return Ok(self.fields.clone());
        }
        default_point_fields(p)
    }

    fn group_fields(&self, p: u32) -> Result<Vec<FieldCtx>, VerifyError> {
        if !self.fields.is_empty() {
            return Ok(self.fields.clone());
        }
        default_group_fields(p)
    }
}

/// Fields `F_q, F_{q^2}` for scans over pairs of field elements.
pub fn default_point_fields(p: u32) -> Result<Vec<FieldCtx>, VerifyError> {
    let m = if p <= 5 { 2 } else { 1 };
    Ok(vec![FieldCtx::new(p, m)?, FieldCtx::new(p, 2 * m)?])
}

/// Fields `F_q, F_{q^2}` for scans over `SL(2, F_q)`.
pub fn default_group_fields(p: u32) -> Result<Vec<FieldCtx>, VerifyError> {
    let m = if p <= 3 { 2 } else { 1 };
    Ok(vec![FieldCtx::new(p, m)?, FieldCtx::new(p, 2 * m)?])
}

fn check_char(rep: u32, ctx: &FieldCtx) -> Result<(), VerifyError> {
    if rep != ctx.p() {
        return Err(VerifyError::CharMismatch { rep, field: ctx.p() });
    }
    Ok(())
}

fn show(ctx: &FieldCtx, xs: &[FqElem]) -> Vec<String> {
    xs.iter().map(|&x| ctx.display(x)).collect()
}

/// Table of a one-variable matrix evaluated at every field element, indexed by code.
fn table(m: &PolyMat, ctx: &FieldCtx) -> Vec<FqMat> {
    ctx.elements().map(|x| m.eval_unchecked(ctx, &[x])).collect()
}

fn omega(ctx: &FieldCtx, weights: &[i64], u: FqElem) -> FqMat {
    let d: Vec<FqElem> = weights.iter().map(|&w| ctx.pow(u, w).expect("nonzero torus argument")).collect();
    FqMat::diag(ctx, &d)
}

/// Verifies `phi(t + t') = phi(t) phi(t')`.
pub fn check_ga_homomorphism(phi: &PolyMat, cfg: &CheckConfig) -> Result<CheckReport, VerifyError> {
    const REL: &str = "ga-additive";
    let p = phi.ring().p;
    if phi.ring().vars.len() != 1 || !phi.is_square() {
        return Err(VerifyError::Unsupported("phi must be a square matrix in one variable".into()));
    }
    if !phi.eval_unchecked(&FieldCtx::prime(p)?, &[FqElem::ZERO]).is_identity() {
        return Err(VerifyError::Unsupported("phi(0) must be the identity".into()));
    }
    let symbolic = match cfg.mode {
        Mode::Symbolic => true,
        Mode::Exhaustive => false,
        Mode::Auto => true,
    };
    if symbolic {
        let tu = vars(&["t", "u"]);
        let sum = [MPoly::var_at(p, &tu, 0) + MPoly::var_at(p, &tu, 1)];
        let lhs = phi.compose(&sum)?;
        let rhs = phi.monomial_map(&tu, &[(0, 1)])?.mul(&phi.monomial_map(&tu, &[(1, 1)])?)?;
        let mut rep = CheckReport::symbolic(REL);
        if let Some(r) = first_difference(&lhs, &rhs)? {
            rep.passed = false;
            rep.residual = Some(r);
            rep.counterexample = scan_ga(phi, &cfg.point_fields(p)?).1;
        }
        return Ok(rep);
    }
    let fields = cfg.point_fields(p)?;
    let (cov, cex) = scan_ga(phi, &fields);
    let mut rep = CheckReport::exhaustive(REL);
    for c in cov {
        rep.add_coverage(c);
    }
    rep.passed = cex.is_none();
    rep.counterexample = cex;
    Ok(rep)
}

fn scan_ga(phi: &PolyMat, fields: &[FieldCtx]) -> (Vec<Coverage>, Option<Counterexample>) {
    let mut cov = Vec::new();
    for ctx in fields {
        let tab = table(phi, ctx);
        let q = ctx.q() as usize;
        let cex = (0..q * q).into_par_iter().find_map_first(|k| {
            let (i, j) = (k / q, k % q);
            let (t, u) = (FqElem::from_index(i), FqElem::from_index(j));
            let lhs = &tab[ctx.add(t, u).code() as usize];
            let rhs = tab[i].mul(&tab[j]).expect("square");
            (lhs != &rhs).then(|| Counterexample {
                q: ctx.q(),
                relation: "ga-additive".into(),
                point: show(ctx, &[t, u]),
                lhs: lhs.to_codes(),
                rhs: rhs.to_codes(),
            })
        });
        cov.push(Coverage { q: ctx.q(), checked: (q * q) as u64, complete: true, seed: None });
        if cex.is_some() {
            return (cov, cex);
        }
    }
    (cov, None)
}

fn first_difference(lhs: &PolyMat, rhs: &PolyMat) -> Result<Option<String>, VerifyError> {
    for i in 0..lhs.rows() {
        for j in 0..lhs.cols() {
            let d = lhs.get(i, j).try_sub(rhs.get(i, j))?;
            if !d.is_zero() {
                return Ok(Some(format!("entry ({},{}): {}", i + 1, j + 1, d)));
            }
        }
    }
    Ok(None)
}

/// Verifies the Borel homomorphism criterion: `phi` additive, weights summing to zero,
/// and `omega(u) phi(t) omega(u)^{-1} = phi(u^2 t)`.
pub fn check_borel_pair(datum: &GenDatum, cfg: &CheckConfig) -> Result<CheckReport, VerifyError> {
    const REL: &str = "torus-equivariance";
    let mut rep = check_ga_homomorphism(&datum.phi_plus, cfg)?;
    let sum: i64 = datum.weights.iter().sum();
    let mut torus = CheckReport::symbolic("torus-sum-zero");
    if sum != 0 {
        torus.passed = false;
        torus.residual = Some(format!("weights sum to {sum}"));
    }
    rep = rep.merge(torus);
    let symbolic = cfg.mode != Mode::Exhaustive;
    let fields = cfg.point_fields(datum.p)?;
    let equiv = if symbolic {
        // entrywise: u^{d_i - d_j} a_ij(t) = a_ij(u^2 t) as Laurent polynomials
        let mut r = CheckReport::symbolic(REL);
        'outer: for i in 0..datum.n() {
            for j in 0..datum.n() {
                let gap = datum.weights[i] - datum.weights[j];
                for (e, c) in datum.phi_plus.get(i, j).terms() {
                    if i != j && 2 * e[0] as i64 != gap {
                        r.passed = false;
                        r.residual = Some(format!(
                            "entry ({},{}): term {c}*t^{} needs weight gap {}, found {gap}",
                            i + 1,
                            j + 1,
                            e[0],
                            2 * e[0]
                        ));
                        break 'outer;
                    }
                }
            }
        }
        if !r.passed {
            r.counterexample = scan_equivariance(datum, &fields).1;
        }
        r
    } else {
        let (cov, cex) = scan_equivariance(datum, &fields);
        let mut r = CheckReport::exhaustive(REL);
        for c in cov {
            r.add_coverage(c);
        }
        r.passed = cex.is_none();
        r.counterexample = cex;
        r
    };
    Ok(rep.merge(equiv))
}

fn scan_equivariance(datum: &GenDatum, fields: &[FieldCtx]) -> (Vec<Coverage>, Option<Counterexample>) {
    let mut cov = Vec::new();
    for ctx in fields {
        let tab = table(&datum.phi_plus, ctx);
        let q = ctx.q() as usize;
        let cex = (q..q * q).into_par_iter().find_map_first(|k| {
            let (iu, it) = (k / q, k % q);
            let (u, t) = (FqElem::from_index(iu), FqElem::from_index(it));
            let w = omega(ctx, &datum.weights, u);
            let winv = omega(ctx, &datum.weights, ctx.inv(u).expect("nonzero"));
            let lhs = w.mul(&tab[it]).and_then(|x| x.mul(&winv)).expect("square");
            let rhs = &tab[ctx.mul(ctx.mul(u, u), t).code() as usize];
            (&lhs != rhs).then(|| Counterexample {
                q: ctx.q(),
                relation: "torus-equivariance".into(),
                point: show(ctx, &[u, t]),
                lhs: lhs.to_codes(),
                rhs: rhs.to_codes(),
            })
        });
        cov.push(Coverage { q: ctx.q(), checked: ((q - 1) * q) as u64, complete: true, seed: None });
        if cex.is_some() {
            return (cov, cex);
        }
    }
    (cov, None)
}

/// Verifies `phi(t) phi_minus(s) = phi_minus(s/(1+ts)) omega(1+ts) phi(t/(1+ts))` at every
/// point with `1 + ts != 0`. Only the exhaustive backend exists for this relation.
pub fn check_opposite_relation(datum: &GenDatum, cfg: &CheckConfig) -> Result<CheckReport, VerifyError> {
    const REL: &str = "opposite-relation";
    if cfg.mode == Mode::Symbolic {
        return Err(VerifyError::Unsupported("the opposite relation has rational arguments; use exhaustive mode".into()));
    }
    let minus = datum.phi_minus.as_ref().ok_or(VerifyError::MissingPhiMinus)?;
    let mut rep = CheckReport::exhaustive(REL);
    for ctx in cfg.point_fields(datum.p)? {
        check_char(datum.p, &ctx)?;
        let plus_t = table(&datum.phi_plus, &ctx);
        let minus_t = table(minus, &ctx);
        let q = ctx.q() as usize;
        let cex = (0..q * q).into_par_iter().find_map_first(|k| {
            let (it, is) = (k / q, k % q);
            let (t, s) = (FqElem::from_index(it), FqElem::from_index(is));
            let r = ctx.add(ctx.one(), ctx.mul(t, s));
            if r.is_zero() {
                return None;
            }
            let rinv = ctx.inv(r).expect("nonzero");
            let lhs = plus_t[it].mul(&minus_t[is]).expect("square");
            let rhs = minus_t[ctx.mul(s, rinv).code() as usize]
                .mul(&omega(&ctx, &datum.weights, r))
                .and_then(|x| x.mul(&plus_t[ctx.mul(t, rinv).code() as usize]))
                .expect("square");
            (lhs != rhs).then(|| Counterexample {
                q: ctx.q(),
                relation: REL.into(),
                point: show(&ctx, &[t, s]),
                lhs: lhs.to_codes(),
                rhs: rhs.to_codes(),
            })
        });
        rep.add_coverage(Coverage { q: ctx.q(), checked: (q * q) as u64, complete: true, seed: None });
        if cex.is_some() {
            rep.passed = false;
            rep.counterexample = cex;
            break;
        }
    }
    Ok(rep)
}

/// `w = (0, -1; 1, 0)`.
pub fn weyl(ctx: &FieldCtx) -> Sl2 {
    [ctx.zero(), ctx.neg(ctx.one()), ctx.one(), ctx.zero()]
}

pub fn upper(ctx: &FieldCtx, t: FqElem) -> Sl2 {
    [ctx.one(), t, ctx.zero(), ctx.one()]
}

pub fn lower(ctx: &FieldCtx, s: FqElem) -> Sl2 {
    [ctx.one(), ctx.zero(), s, ctx.one()]
}

pub fn torus(ctx: &FieldCtx, u: FqElem) -> Sl2 {
    [u, ctx.zero(), ctx.zero(), ctx.inv(u).expect("nonzero torus argument")]
}

/// Whether `lower(1) upper(-1) lower(1) = w` over `ctx`.
pub fn weyl_factorization_holds(ctx: &FieldCtx) -> bool {
    let one = ctx.one();
    let m = ctx.sl2_mul(&ctx.sl2_mul(&lower(ctx, one), &upper(ctx, ctx.neg(one))), &lower(ctx, one));
    m == weyl(ctx)
}

/// Anti-transpose of a 2x2 matrix: `(a b; c d) -> (d b; c a)`.
pub fn tau2(m: &Sl2) -> Sl2 {
    [m[3], m[1], m[2], m[0]]
}

/// A representation given either by closed-form entries or by generator data.
#[derive(Clone, Copy, Debug)]
pub enum RepRef<'a> {
    Closed(&'a ClosedFormRep),
    Datum(&'a GenDatum),
}

impl<'a> From<&'a ClosedFormRep> for RepRef<'a> {
    fn from(r: &'a ClosedFormRep) -> Self {
        RepRef::Closed(r)
    }
}

impl<'a> From<&'a GenDatum> for RepRef<'a> {
    fn from(d: &'a GenDatum) -> Self {
        RepRef::Datum(d)
    }
}

impl RepRef<'_> {
    pub fn p(&self) -> u32 {
        match self {
            RepRef::Closed(r) => r.p,
            RepRef::Datum(d) => d.p,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            RepRef::Closed(r) => r.n(),
            RepRef::Datum(d) => d.n(),
        }
    }
}

/// Evaluates a representation at elements of `SL(2, F_q)` for one field.
pub struct Evaluator {
    ctx: FieldCtx,
    kind: EvalKind,
}

enum EvalKind {
    Closed(PolyMat),
    Datum { plus: Vec<FqMat>, minus: Vec<FqMat>, weights: Vec<i64>, w_image: FqMat },
}

impl Evaluator {
    pub fn new(rep: RepRef<'_>, ctx: &FieldCtx) -> Result<Self, VerifyError> {
        check_char(rep.p(), ctx)?;
        let kind = match rep {
            RepRef::Closed(r) => EvalKind::Closed(r.entries.clone()),
            RepRef::Datum(d) => {
                let minus_m = d.phi_minus.as_ref().ok_or(VerifyError::MissingPhiMinus)?;
                if !weyl_factorization_holds(ctx) {
                    return Err(VerifyError::Unsupported("Weyl factorization failed".into()));
                }
                let plus = table(&d.phi_plus, ctx);
                let minus = table(minus_m, ctx);
                let one = ctx.one().code() as usize;
                let neg_one = ctx.neg(ctx.one()).code() as usize;
                let w_image = minus[one].mul(&plus[neg_one])?.mul(&minus[one])?;
                EvalKind::Datum { plus, minus, weights: d.weights.clone(), w_image }
            }
        };
        Ok(Evaluator { ctx: ctx.clone(), kind })
    }

    pub fn ctx(&self) -> &FieldCtx {
        &self.ctx
    }

    /// Evaluation without the determinant check.
    pub fn eval(&self, m: &Sl2) -> FqMat {
        let ctx = &self.ctx;
        match &self.kind {
            EvalKind::Closed(e) => e.eval_unchecked(ctx, m),
            EvalKind::Datum { plus, minus, weights, w_image } => {
                let tri = |m: &Sl2| {
                    let ainv = ctx.inv(m[0]).expect("nonzero");
                    minus[ctx.mul(m[2], ainv).code() as usize]
                        .mul(&omega(ctx, weights, m[0]))
                        .and_then(|x| x.mul(&plus[ctx.mul(m[1], ainv).code() as usize]))
                        .expect("square")
                };
                if !m[0].is_zero() {
                    tri(m)
                } else {
                    let winv = ctx.sl2_inv(&weyl(ctx));
                    w_image.mul(&tri(&ctx.sl2_mul(&winv, m))).expect("square")
                }
            }
        }
    }

    pub fn eval_checked(&self, m: &Sl2) -> Result<FqMat, VerifyError> {
        if self.ctx.sl2_det(m) != self.ctx.one() {
            return Err(VerifyError::NotUnimodular);
        }
        Ok(self.eval(m))
    }
}

/// Evaluate a representation at one group element.
pub fn evaluate(rep: RepRef<'_>, ctx: &FieldCtx, m: &Sl2) -> Result<FqMat, VerifyError> {
    Evaluator::new(rep, ctx)?.eval_checked(m)
}

/// Generators of `SL(2, F_q)`: `upper(x)`, `lower(x)` for `x` in an `F_p`-basis.
pub fn sl2_generators(ctx: &FieldCtx) -> Vec<Sl2> {
    let basis: Vec<FqElem> = (0..ctx.m()).map(|i| ctx.from_code(ctx.p().pow(i)).expect("basis element")).collect();
    basis.iter().flat_map(|&x| [upper(ctx, x), lower(ctx, x)]).collect()
}

/// Verifies `sigma(M1 M2) = sigma(M1) sigma(M2)`.
pub fn check_sl2_homomorphism(rep: RepRef<'_>, cfg: &CheckConfig) -> Result<CheckReport, VerifyError> {
    const REL: &str = "sl2-multiplicative";
    let symbolic = match (cfg.mode, rep) {
        (Mode::Symbolic, RepRef::Closed(r)) => {
            if r.twist > 0 {
                return Err(VerifyError::DegreeTooLarge(r.twist));
            }
            if r.entries.total_degree() > SYMBOLIC_DEGREE_CAP {
                return Err(VerifyError::DegreeTooLarge(r.twist));
            }
            true
        }
        (Mode::Symbolic, RepRef::Datum(_)) => {
            return Err(VerifyError::Unsupported("symbolic mode needs a closed form".into()));
        }
        (Mode::Auto, RepRef::Closed(r)) => r.twist == 0 && r.entries.total_degree() <= SYMBOLIC_DEGREE_CAP,
        _ => false,
    };
    let fields = cfg.group_fields(rep.p())?;
    if symbolic {
        let RepRef::Closed(r) = rep else { unreachable!() };
        let mut report = CheckReport::symbolic(REL);
        if let Some(res) = symbolic_sl2_difference(r)? {
            report.passed = false;
            report.residual = Some(res);
            report.counterexample = scan_sl2(rep, &fields, cfg)?.1;
        }
        return Ok(report);
    }
    let (cov, cex) = scan_sl2(rep, &fields, cfg)?;
    let mut report = CheckReport::exhaustive(REL);
    for c in cov {
        report.add_coverage(c);
    }
    report.passed = cex.is_none();
    report.counterexample = cex;
    Ok(report)
}

fn symbolic_sl2_difference(r: &ClosedFormRep) -> Result<Option<String>, VerifyError> {
    let v8 = vars(&["a", "b", "c", "d", "a2", "b2", "c2", "d2"]);
    let p = r.p;
    let x = |i| MPoly::var_at(p, &v8, i);
    let prod = [x(0) * x(4) + x(1) * x(6), x(0) * x(5) + x(1) * x(7), x(2) * x(4) + x(3) * x(6), x(2) * x(5) + x(3) * x(7)];
    let rs = RewriteSystem::for_vars(&v8);
    let lhs = r.entries.compose(&prod)?.reduce(&rs);
    let left = r.entries.monomial_map(&v8, &[(0, 1), (1, 1), (2, 1), (3, 1)])?;
    let right = r.entries.monomial_map(&v8, &[(4, 1), (5, 1), (6, 1), (7, 1)])?;
    let rhs = left.mul(&right)?.reduce(&rs);
    first_difference(&lhs, &rhs)
}

fn pair_cex(ctx: &FieldCtx, m1: &Sl2, m2: &Sl2, lhs: &FqMat, rhs: &FqMat) -> Counterexample {
    let mut pt = show(ctx, m1);
    pt.extend(show(ctx, m2));
    Counterexample { q: ctx.q(), relation: "sl2-multiplicative".into(), point: pt, lhs: lhs.to_codes(), rhs: rhs.to_codes() }
}

fn scan_sl2(
    rep: RepRef<'_>,
    fields: &[FieldCtx],
    cfg: &CheckConfig,
) -> Result<(Vec<Coverage>, Option<Counterexample>), VerifyError> {
    let mut cov = Vec::new();
    for ctx in fields {
        let ev = Evaluator::new(rep, ctx)?;
        let id = [ctx.one(), ctx.zero(), ctx.zero(), ctx.one()];
        let at_id = ev.eval(&id);
        if !at_id.is_identity() {
            let ident = FqMat::identity(ctx, rep.n());
            return Ok((cov, Some(pair_cex(ctx, &id, &id, &at_id, &ident))));
        }
        match enumerate_sl2(ctx, cfg.enum_budget) {
            Ok(group) => {
                let gens: Vec<(Sl2, FqMat)> = sl2_generators(ctx).into_iter().map(|g| (g, ev.eval(&g))).collect();
                let cex = group.par_iter().find_map_first(|m| {
                    let sm = ev.eval(m);
                    gens.iter().find_map(|(g, sg)| {
                        let lhs = ev.eval(&ctx.sl2_mul(g, m));
                        let rhs = sg.mul(&sm).expect("square");
                        (lhs != rhs).then(|| pair_cex(ctx, g, m, &lhs, &rhs))
                    })
                });
                cov.push(Coverage { q: ctx.q(), checked: (group.len() * gens.len()) as u64, complete: true, seed: None });
                if cex.is_some() {
                    return Ok((cov, cex));
                }
            }
            Err(FieldError::BudgetExceeded { .. }) => {
                let seed = cfg.seed ^ ctx.q() as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let pairs: Vec<(Sl2, Sl2)> =
                    (0..cfg.samples).map(|_| (ctx.random_sl2(&mut rng), ctx.random_sl2(&mut rng))).collect();
                let cex = pairs.par_iter().find_map_first(|(m1, m2)| {
                    let lhs = ev.eval(&ctx.sl2_mul(m1, m2));
                    let rhs = ev.eval(m1).mul(&ev.eval(m2)).expect("square");
                    (lhs != rhs).then(|| pair_cex(ctx, m1, m2, &lhs, &rhs))
                });
                cov.push(Coverage { q: ctx.q(), checked: cfg.samples, complete: false, seed: Some(seed) });
                if cex.is_some() {
                    return Ok((cov, cex));
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((cov, None))
}

/// `psi(t, u) = phi(t) omega(u)`, the Borel homomorphism on `(t, u)`.
pub fn psi_eval(datum: &GenDatum, ctx: &FieldCtx, t: FqElem, u: FqElem) -> FqMat {
    datum.phi_plus.eval_unchecked(ctx, &[t]).mul(&omega(ctx, &datum.weights, u)).expect("square")
}

/// Inverse in the semidirect product: `(t, u)^{-1} = (-t/u^2, 1/u)`.
pub fn borel_inverse(ctx: &FieldCtx, t: FqElem, u: FqElem) -> (FqElem, FqElem) {
    let ui = ctx.inv(u).expect("nonzero");
    (ctx.neg(ctx.mul(t, ctx.mul(ui, ui))), ui)
}

/// `f*(t, u) = tau(f((t, u)^{-1}))` for a map on the Borel group.
pub fn borel_star<F>(ctx: &FieldCtx, f: F) -> impl Fn(FqElem, FqElem) -> FqMat
where
    F: Fn(FqElem, FqElem) -> FqMat,
{
    let ctx = ctx.clone();
    move |t, u| {
        let (ti, ui) = borel_inverse(&ctx, t, u);
        f(ti, ui).tau().expect("square")
    }
}

/// `omega*(u) = tau(omega(u)^{-1})`.
pub fn omega_star(ctx: &FieldCtx, weights: &[i64], u: FqElem) -> FqMat {
    omega(ctx, weights, u).inverse().expect("diagonal").tau().expect("square")
}

/// The torus image `diag(u^{d_1}, ..., u^{d_n})`.
pub fn omega_eval(ctx: &FieldCtx, weights: &[i64], u: FqElem) -> FqMat {
    omega(ctx, weights, u)
}

/// `phi(t) = sigma(upper(t))` as a polynomial matrix in `t`.
pub fn restrict_upper(rep: &ClosedFormRep) -> Result<PolyMat, VerifyError> {
    let tv = t_vars();
    let p = rep.p;
    let t = MPoly::var_at(p, &tv, 0);
    Ok(rep.entries.compose(&[MPoly::one(p, &tv), t, MPoly::zero(p, &tv), MPoly::one(p, &tv)])?)
}

/// `phi_minus(s) = sigma(lower(s))` as a polynomial matrix in `s`.
pub fn restrict_lower(rep: &ClosedFormRep) -> Result<PolyMat, VerifyError> {
    let sv = s_vars();
    let p = rep.p;
    let s = MPoly::var_at(p, &sv, 0);
    Ok(rep.entries.compose(&[MPoly::one(p, &sv), MPoly::zero(p, &sv), s, MPoly::one(p, &sv)])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_borel_pair, build_sigma, FormSpec};
    use crate::linalg::PolyRing;

    fn spec(form: &str, p: u32, params: &str) -> FormSpec {
        FormSpec::parse(form, p, params).unwrap()
    }

    fn one_var(p: u32, rows: &[&[&str]]) -> PolyMat {
        PolyMat::parse(&PolyRing::new(p, &t_vars()), rows).unwrap()
    }

    fn lower_mat(p: u32, rows: &[&[&str]]) -> PolyMat {
        PolyMat::parse(&PolyRing::new(p, &s_vars()), rows).unwrap()
    }

    #[test]
    fn ga_examples() {
        let cfg = CheckConfig::default();
        let i5 = build_borel_pair(&spec("borel:I", 5, "e1=0")).unwrap();
        let r = check_ga_homomorphism(&i5.phi_plus, &cfg).unwrap();
        assert!(r.passed);
        assert_eq!(r.backend, Backend::Symbolic);
        assert!(check_ga_homomorphism(&one_var(2, &[&["1", "t+t^2"], &["0", "1"]]), &cfg).unwrap().passed);
        let sq = one_var(5, &[&["1", "t^2"], &["0", "1"]]);
        let ex = CheckConfig::default().with_mode(Mode::Exhaustive).with_fields(vec![FieldCtx::prime(5).unwrap()]);
        let r = check_ga_homomorphism(&sq, &ex).unwrap();
        assert!(!r.passed);
        assert_eq!(r.counterexample.unwrap().point, vec!["1", "1"]);
        let r = check_ga_homomorphism(&sq, &cfg).unwrap();
        assert!(!r.passed && r.residual.is_some() && r.counterexample.is_some());
    }

    #[test]
    fn borel_pair_examples() {
        let cfg = CheckConfig::default();
        let i5 = build_borel_pair(&spec("borel:I", 5, "e1=0")).unwrap();
        assert!(check_borel_pair(&i5, &cfg).unwrap().passed);
        assert!(check_borel_pair(&i5, &cfg.clone().with_mode(Mode::Exhaustive)).unwrap().passed);
        let permuted = GenDatum::new(i5.phi_plus.clone(), vec![1, 3, -3, -1], None).unwrap();
        let r = check_borel_pair(&permuted, &cfg).unwrap();
        assert!(!r.passed);
        assert_eq!(r.counterexample.as_ref().unwrap().relation, "torus-equivariance");
        let r = check_borel_pair(&permuted, &cfg.clone().with_mode(Mode::Exhaustive)).unwrap();
        assert!(!r.passed && r.counterexample.is_some());
        let xii = build_borel_pair(&spec("borel:XII", 2, "e1=0,d2=0")).unwrap();
        assert!(check_borel_pair(&xii, &cfg).unwrap().passed);
    }

    #[test]
    fn opposite_relation_examples() {
        let cfg = CheckConfig::default();
        let i5 = build_borel_pair(&spec("borel:I", 5, "e1=0")).unwrap();
        let golden = lower_mat(
            5,
            &[&["1", "0", "0", "0"], &["3*s", "1", "0", "0"], &["6*s^2", "4*s", "1", "0"], &["6*s^3", "6*s^2", "3*s", "1"]],
        );
        assert!(check_opposite_relation(&i5.with_phi_minus(golden).unwrap(), &cfg).unwrap().passed);
        let ident = PolyMat::identity(&PolyRing::new(5, &s_vars()), 4);
        let r = check_opposite_relation(&i5.with_phi_minus(ident.clone()).unwrap(), &cfg).unwrap();
        assert!(!r.passed && r.counterexample.is_some());
        let xxvi = build_borel_pair(&spec("borel:XXVI", 3, "d1=0,d2=0")).unwrap();
        let r = check_opposite_relation(&xxvi.with_phi_minus(PolyMat::identity(&PolyRing::new(3, &s_vars()), 4)).unwrap(), &cfg)
            .unwrap();
        assert!(r.passed);
        assert!(check_opposite_relation(&i5.with_phi_minus(ident).unwrap(), &cfg.with_mode(Mode::Symbolic)).is_err());
    }

    #[test]
    fn weyl_factorization() {
        for (p, m) in [(2, 1), (3, 2), (5, 1), (7, 1)] {
            assert!(weyl_factorization_holds(&FieldCtx::new(p, m).unwrap()));
        }
    }

    #[test]
    fn datum_evaluation_matches_closed_form() {
        let st = build_sigma(&spec("star:IV", 2, "e1=0,e2=1")).unwrap();
        let b = build_borel_pair(&spec("borel:IV", 2, "e1=0,e2=1")).unwrap();
        let datum = b.with_phi_minus(restrict_lower(&st).unwrap()).unwrap();
        let f2 = FieldCtx::prime(2).unwrap();
        let w = [f2.zero(), f2.one(), f2.one(), f2.zero()];
        assert_eq!(evaluate(RepRef::Datum(&datum), &f2, &w).unwrap(), evaluate(RepRef::Closed(&st), &f2, &w).unwrap());
        let f4 = FieldCtx::new(2, 2).unwrap();
        let ev = Evaluator::new(RepRef::Datum(&datum), &f4).unwrap();
        for m in enumerate_sl2(&f4, 1000).unwrap() {
            assert_eq!(ev.eval(&m), st.eval(&f4, &m));
        }
        assert_eq!(ev.eval_checked(&[f4.one(), f4.one(), f4.zero(), f4.zero()]), Err(VerifyError::NotUnimodular));
    }

    #[test]
    fn sl2_examples() {
        let cfg = CheckConfig::default();
        let plus_i = build_sigma(&spec("plus:I", 5, "")).unwrap();
        let r = check_sl2_homomorphism(RepRef::Closed(&plus_i), &cfg).unwrap();
        assert!(r.passed);
        assert_eq!(r.backend, Backend::Symbolic);
        let xv = build_sigma(&spec("sharp:XV", 3, "e2=1,e3=0")).unwrap();
        let ex = cfg.clone().with_mode(Mode::Exhaustive).with_fields(vec![FieldCtx::new(3, 2).unwrap()]);
        let r = check_sl2_homomorphism(RepRef::Closed(&xv), &ex).unwrap();
        assert!(r.passed);
        assert_eq!(r.backend, Backend::Exhaustive);
        assert_eq!(
            check_sl2_homomorphism(RepRef::Closed(&xv), &cfg.clone().with_mode(Mode::Symbolic)),
            Err(VerifyError::DegreeTooLarge(1))
        );
        // bump the (2,3) coefficient of plus:I
        let mut bumped = plus_i.clone();
        let e = bumped.entries.get(1, 2).clone() + MPoly::parse(5, &crate::catalog::sl2_vars(), "b*c").unwrap();
        bumped.entries.set(1, 2, e);
        let r = check_sl2_homomorphism(RepRef::Closed(&bumped), &cfg).unwrap();
        assert!(!r.passed && r.residual.is_some() && r.counterexample.is_some());
    }

    #[test]
    fn sampling_is_reported() {
        let xv = build_sigma(&spec("sharp:XV", 3, "e2=1,e3=0")).unwrap();
        let cfg = CheckConfig { enum_budget: 100, samples: 200, ..CheckConfig::default() }
            .with_mode(Mode::Exhaustive)
            .with_fields(vec![FieldCtx::new(3, 2).unwrap()]);
        let r = check_sl2_homomorphism(RepRef::Closed(&xv), &cfg).unwrap();
        assert!(r.passed);
        assert_eq!(r.backend, Backend::Sampled);
        assert_eq!(r.coverage[0].checked, 200);
    }

    #[test]
    fn restrictions_of_star_forms() {
        let st = build_sigma(&spec("star:I", 5, "e1=0")).unwrap();
        let b = build_borel_pair(&spec("borel:I", 5, "e1=0")).unwrap();
        assert_eq!(restrict_upper(&st).unwrap(), b.phi_plus);
    }
}
