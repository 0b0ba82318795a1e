//! Extension of Borel pairs to SL(2).
//!
//! [`solve_phi_minus`] treats the coefficients of the lower unitriangular `phi_minus(s)`
//! as unknowns over `F_p` and imposes the opposite relation at finite-field points. Both
//! sides of the relation are linear in the unknowns. The result is either a unique
//! solution or a certificate that the system is inconsistent.
//!
//! [`assemble_sigma`] interpolates the closed form `sigma(a, b; c, d)` from the triple
//! product `phi_minus(c/a) omega(a) phi(b/a)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{s_vars, sl2_vars, CatalogError, ClosedFormRep, GenDatum};
use crate::field::{enumerate_sl2, FieldCtx, FieldError, FqElem, Sl2, DEFAULT_ENUM_BUDGET, MAX_M};
use crate::linalg::{FqMat, LinalgError, PolyMat, PolyRing};
use crate::symbolic::MPoly;
use crate::verify::{
    check_borel_pair, check_ga_homomorphism, check_opposite_relation, check_sl2_homomorphism, default_group_fields, Backend,
    CheckConfig, CheckReport, Counterexample, Coverage, Evaluator, Mode, RepRef, VerifyError,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtendError {
    #[error("linear system is underdetermined up to F_{q}; a larger field is needed")]
    AmbiguousSolution { q: u32 },
    #[error("degree bound {bound} is below the largest half weight gap {needed}")]
    DegreeBoundTooSmall { bound: u32, needed: u32 },
    #[error("interpolation failed: {0}")]
    InterpolationFailed(String),
    #[error("input is not a Borel homomorphism: {0}")]
    NotBorelPair(String),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtensionStatus {
    Unique,
    Inconsistent,
}

/// One point equation of the linear system, in the unknowns `b{i}{j}_{k}` (coefficient of
/// `s^k` in entry `(i, j)`, 1-based).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertEquation {
    pub q: u32,
    pub point: Vec<String>,
    pub entry: (usize, usize),
    /// Index of the `F_p`-coordinate of the `F_q` equation.
    pub component: usize,
    pub multiplier: u32,
    pub text: String,
}

/// A linear combination of point equations whose left side vanishes and whose right side
/// is the nonzero constant `constant`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub p: u32,
    pub degree_bound: u32,
    pub equations: Vec<CertEquation>,
    pub constant: u32,
}

#[derive(Clone, Debug)]
pub struct PhiMinusSolution {
    pub status: ExtensionStatus,
    pub phi_minus: Option<PolyMat>,
    pub certificate: Option<Certificate>,
    pub degree_bound: u32,
    /// Field sizes whose points entered the linear system.
    pub fields: Vec<u32>,
    /// Additivity and opposite-relation checks of a unique solution.
    pub checks: Option<CheckReport>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ExtendConfig {
    /// Degree bound for each entry of `phi_minus`; defaults to the largest half weight gap.
    pub degree_bound: Option<u32>,
    /// Largest field size `q` whose `q^2` points are scanned.
    pub max_points: u64,
    pub check: CheckConfig,
}

impl Default for ExtendConfig {
    fn default() -> Self {
        ExtendConfig { degree_bound: None, max_points: 400_000, check: CheckConfig::default() }
    }
}

/// Dense row over `F_p` with the combination of source equations that produced it.
#[derive(Clone, Debug)]
struct Row {
    coeffs: Vec<u32>,
    rhs: u32,
    combo: Vec<(usize, u32)>,
}

/// Reduced row echelon form grown one row at a time.
struct Echelon {
    p: u32,
    ncols: usize,
    rows: Vec<Row>,
    pivots: Vec<usize>,
    track: bool,
}

enum AddOutcome {
    Pivot,
    Redundant,
    Contradiction(Row),
}

fn combo_axpy(p: u32, dst: &mut Vec<(usize, u32)>, f: u32, src: &[(usize, u32)]) {
    // dst += f * src, both sorted by source id
    let mut out = Vec::with_capacity(dst.len() + src.len());
    let (mut i, mut j) = (0, 0);
    while i < dst.len() || j < src.len() {
        let take_dst = j >= src.len() || (i < dst.len() && dst[i].0 < src[j].0);
        let take_src = i >= dst.len() || (j < src.len() && src[j].0 < dst[i].0);
        if take_dst {
            out.push(dst[i]);
            i += 1;
        } else if take_src {
            out.push((src[j].0, (f as u64 * src[j].1 as u64 % p as u64) as u32));
            j += 1;
        } else {
            let v = (dst[i].1 as u64 + f as u64 * src[j].1 as u64) % p as u64;
            if v != 0 {
                out.push((dst[i].0, v as u32));
            }
            i += 1;
            j += 1;
        }
    }
    *dst = out;
}

fn inv_p(x: u32, p: u32) -> u32 {
    // Fermat; p is prime
    let mut r = 1u64;
    let mut b = x as u64 % p as u64;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p as u64;
        }
        b = b * b % p as u64;
        e >>= 1;
    }
    r as u32
}

impl Echelon {
    fn new(p: u32, ncols: usize, track: bool) -> Self {
        Echelon { p, ncols, rows: vec![], pivots: vec![], track }
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }

    fn add(&mut self, mut r: Row) -> AddOutcome {
        let p = self.p as u64;
        for (row, &pc) in self.rows.iter().zip(&self.pivots) {
            let f = r.coeffs[pc];
            if f == 0 {
                continue;
            }
            let nf = (p - f as u64) as u32;
            for (x, &y) in r.coeffs.iter_mut().zip(&row.coeffs) {
                if y != 0 {
                    *x = ((*x as u64 + nf as u64 * y as u64) % p) as u32;
                }
            }
            r.rhs = ((r.rhs as u64 + nf as u64 * row.rhs as u64) % p) as u32;
            if self.track {
                combo_axpy(self.p, &mut r.combo, nf, &row.combo);
            }
        }
        let Some(pc) = r.coeffs.iter().position(|&x| x != 0) else {
            return if r.rhs == 0 { AddOutcome::Redundant } else { AddOutcome::Contradiction(r) };
        };
        let inv = inv_p(r.coeffs[pc], self.p) as u64;
        for x in r.coeffs.iter_mut() {
            *x = (*x as u64 * inv % p) as u32;
        }
        r.rhs = (r.rhs as u64 * inv % p) as u32;
        for c in r.combo.iter_mut() {
            c.1 = (c.1 as u64 * inv % p) as u32;
        }
        for row in self.rows.iter_mut() {
            let f = row.coeffs[pc];
            if f == 0 {
                continue;
            }
            let nf = (p - f as u64) as u32;
            for (x, &y) in row.coeffs.iter_mut().zip(&r.coeffs) {
                if y != 0 {
                    *x = ((*x as u64 + nf as u64 * y as u64) % p) as u32;
                }
            }
            row.rhs = ((row.rhs as u64 + nf as u64 * r.rhs as u64) % p) as u32;
            if self.track {
                combo_axpy(self.p, &mut row.combo, nf, &r.combo);
            }
        }
        self.rows.push(r);
        self.pivots.push(pc);
        AddOutcome::Pivot
    }

    /// Unique solution when the rank is full.
    fn solution(&self) -> Option<Vec<u32>> {
        if self.rank() < self.ncols {
            return None;
        }
        let mut x = vec![0; self.ncols];
        for (row, &pc) in self.rows.iter().zip(&self.pivots) {
            x[pc] = row.rhs;
        }
        Some(x)
    }
}

fn residual(p: u32, coeffs: &[u32], rhs: u32, x: &[u32]) -> u32 {
    let p64 = p as u64;
    let lhs = coeffs.iter().zip(x).fold(0u64, |acc, (&c, &v)| (acc + c as u64 * v as u64) % p64);
    ((lhs + p64 - rhs as u64 % p64) % p64) as u32
}

/// Strictly lower positions `(i, j)`, `i > j`, in row order.
fn lower_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).collect()
}

/// A point equation before splitting into `F_p` coordinates.
struct PointEq {
    t: FqElem,
    s: FqElem,
    entry: (usize, usize),
    /// Coefficient per unknown `(pair, k)`, flattened as `pair * bound + (k - 1)`.
    coeffs: Vec<FqElem>,
    rhs: FqElem,
}

struct SystemShape {
    n: usize,
    bound: usize,
    pairs: Vec<(usize, usize)>,
    pair_index: Vec<Vec<Option<usize>>>,
}

impl SystemShape {
    fn new(n: usize, bound: usize) -> Self {
        let pairs = lower_pairs(n);
        let mut pair_index = vec![vec![None; n]; n];
        for (k, &(i, j)) in pairs.iter().enumerate() {
            pair_index[i][j] = Some(k);
        }
        SystemShape { n, bound, pairs, pair_index }
    }

    fn unknowns(&self) -> usize {
        self.pairs.len() * self.bound
    }

    fn name(&self, col: usize) -> String {
        let (i, j) = self.pairs[col / self.bound];
        format!("b{}{}_{}", i + 1, j + 1, col % self.bound + 1)
    }
}

struct FieldTables {
    plus: Vec<FqMat>,
    /// `pows[k-1][code]` is `s^k`.
    pows: Vec<Vec<FqElem>>,
}

fn field_tables(datum: &GenDatum, ctx: &FieldCtx, bound: usize) -> FieldTables {
    let plus = ctx.elements().map(|x| datum.phi_plus.eval_unchecked(ctx, &[x])).collect();
    let pows = (1..=bound as u64).map(|k| ctx.elements().map(|x| ctx.pow_u(x, k)).collect()).collect();
    FieldTables { plus, pows }
}

/// All nontrivial equations at one point `(t, s)` with `1 + ts != 0`.
fn point_equations(ctx: &FieldCtx, datum: &GenDatum, sh: &SystemShape, tabs: &FieldTables, t: FqElem, s: FqElem) -> Vec<PointEq> {
    let r = ctx.add(ctx.one(), ctx.mul(t, s));
    let rinv = ctx.inv(r).expect("nonzero");
    let s2 = ctx.mul(s, rinv);
    let phi_t = &tabs.plus[t.code() as usize];
    let om: Vec<FqElem> = datum.weights.iter().map(|&w| ctx.pow(r, w).expect("nonzero")).collect();
    let phi_t2 = &tabs.plus[ctx.mul(t, rinv).code() as usize];
    let n = sh.n;
    let bound = sh.bound;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let mut coeffs = vec![ctx.zero(); sh.unknowns()];
            let mut any = false;
            // lhs: sum_{l>j} phi(t)_{il} b_{lj}(s)
            for l in j + 1..n {
                let f = *phi_t.get(i, l);
                if f.is_zero() {
                    continue;
                }
                let pi = sh.pair_index[l][j].expect("lower");
                for k in 1..=bound {
                    let c = ctx.mul(f, tabs.pows[k - 1][s.code() as usize]);
                    let col = pi * bound + k - 1;
                    coeffs[col] = ctx.add(coeffs[col], c);
                    any |= !c.is_zero();
                }
            }
            // rhs: sum_{l<i} b_{il}(s') N_{lj} with N = omega(r) phi(t')
            for (l, &oml) in om.iter().enumerate().take(i) {
                let nl = ctx.mul(oml, *phi_t2.get(l, j));
                if nl.is_zero() {
                    continue;
                }
                let pi = sh.pair_index[i][l].expect("lower");
                for k in 1..=bound {
                    let c = ctx.mul(nl, tabs.pows[k - 1][s2.code() as usize]);
                    let col = pi * bound + k - 1;
                    coeffs[col] = ctx.sub(coeffs[col], c);
                    any |= !c.is_zero();
                }
            }
            let nij = ctx.mul(om[i], *phi_t2.get(i, j));
            let rhs = ctx.sub(nij, *phi_t.get(i, j));
            if any || !rhs.is_zero() {
                out.push(PointEq { t, s, entry: (i, j), coeffs, rhs });
            }
        }
    }
    out
}

/// Collapse columns with equal `k mod (q-1)` and split into `F_p` coordinates.
fn collapse_rows(ctx: &FieldCtx, eq: &PointEq, sh: &SystemShape, classes: usize) -> Vec<(usize, Vec<u32>, u32)> {
    let m = ctx.m() as usize;
    let mut cols: Vec<FqElem> = vec![ctx.zero(); sh.pairs.len() * classes];
    for (col, &c) in eq.coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        // columns within a class coincide; the class representative is the smallest k
        let (pi, k0) = (col / sh.bound, col % sh.bound);
        if k0 < classes {
            cols[pi * classes + k0] = c;
        }
    }
    let split: Vec<Vec<u32>> = cols.iter().map(|&c| ctx.coeffs(c)).collect();
    let rhs = ctx.coeffs(eq.rhs);
    (0..m)
        .map(|comp| (comp, split.iter().map(|v| v[comp]).collect::<Vec<u32>>(), rhs[comp]))
        .filter(|(_, c, r)| *r != 0 || c.iter().any(|&x| x != 0))
        .collect()
}

fn equation_text(ctx: &FieldCtx, eq: &PointEq, sh: &SystemShape, comp: usize) -> String {
    let mut terms = Vec::new();
    for (col, &c) in eq.coeffs.iter().enumerate() {
        let v = ctx.coeffs(c)[comp];
        if v != 0 {
            terms.push(if v == 1 { sh.name(col) } else { format!("{v}*{}", sh.name(col)) });
        }
    }
    let lhs = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
    format!("{lhs} = {}", ctx.coeffs(eq.rhs)[comp])
}

struct Source {
    ctx_q: u32,
    eq_index: usize,
    comp: usize,
}

/// Outcome of scanning one field.
enum FieldScan {
    Contradiction(Certificate),
    Solved(Vec<u32>),
    Open,
}

fn scan_field(ctx: &FieldCtx, datum: &GenDatum, sh: &SystemShape, track: bool) -> FieldScan {
    let p = ctx.p();
    let q = ctx.q() as usize;
    let classes = sh.bound.min(q - 1).max(1);
    let tabs = field_tables(datum, ctx, sh.bound);
    let mut ech = Echelon::new(p, sh.pairs.len() * classes, track);
    let mut kept: Vec<PointEq> = Vec::new();
    let mut sources: Vec<Source> = Vec::new();
    let mut solution: Option<Vec<u32>> = None;
    const CHUNK: usize = 256;
    let points: Vec<(usize, usize)> = (0..q).flat_map(|i| (0..q).map(move |j| (i, j))).collect();
    for chunk in points.chunks(CHUNK) {
        let eqs: Vec<Vec<PointEq>> = chunk
            .par_iter()
            .map(|&(it, is)| {
                let (t, s) = (FqElem::from_index(it), FqElem::from_index(is));
                if ctx.add(ctx.one(), ctx.mul(t, s)).is_zero() {
                    vec![]
                } else {
                    point_equations(ctx, datum, sh, &tabs, t, s)
                }
            })
            .collect();
        for eq in eqs.into_iter().flatten() {
            let rows = collapse_rows(ctx, &eq, sh, classes);
            let mut eq_slot: Option<usize> = None;
            for (comp, coeffs, rhs) in rows {
                if let Some(x) = &solution {
                    if residual(p, &coeffs, rhs, x) == 0 {
                        continue;
                    }
                }
                let id = sources.len();
                let slot = *eq_slot.get_or_insert_with(|| {
                    kept.push(PointEq { t: eq.t, s: eq.s, entry: eq.entry, coeffs: eq.coeffs.clone(), rhs: eq.rhs });
                    kept.len() - 1
                });
                sources.push(Source { ctx_q: ctx.q(), eq_index: slot, comp });
                let row = Row { coeffs, rhs, combo: if track { vec![(id, 1)] } else { vec![] } };
                match ech.add(row) {
                    AddOutcome::Contradiction(r) => {
                        return FieldScan::Contradiction(certificate(ctx, sh, &kept, &sources, &r, p));
                    }
                    AddOutcome::Pivot if ech.rank() == ech.ncols => solution = ech.solution(),
                    _ => {}
                }
            }
        }
    }
    match solution {
        Some(x) if classes == sh.bound => FieldScan::Solved(x),
        _ => FieldScan::Open,
    }
}

fn certificate(ctx: &FieldCtx, sh: &SystemShape, kept: &[PointEq], sources: &[Source], r: &Row, p: u32) -> Certificate {
    let equations = r
        .combo
        .iter()
        .map(|&(id, mult)| {
            let src = &sources[id];
            let eq = &kept[src.eq_index];
            CertEquation {
                q: src.ctx_q,
                point: vec![ctx.display(eq.t), ctx.display(eq.s)],
                entry: (eq.entry.0 + 1, eq.entry.1 + 1),
                component: src.comp,
                multiplier: mult,
                text: equation_text(ctx, eq, sh, src.comp),
            }
        })
        .collect();
    Certificate { p, degree_bound: sh.bound as u32, equations, constant: r.rhs }
}

/// Fields `F_{p^m}` scanned by the solver, smallest first.
fn solver_fields(p: u32, max_points: u64) -> Result<Vec<FieldCtx>, FieldError> {
    let mut out = Vec::new();
    for m in 1..=MAX_M {
        let q = (p as u64).pow(m);
        if q * q > max_points && !out.is_empty() {
            break;
        }
        out.push(FieldCtx::new(p, m)?);
    }
    Ok(out)
}

fn solve_at(datum: &GenDatum, bound: u32, cfg: &ExtendConfig) -> Result<(FieldScan, Vec<u32>), ExtendError> {
    let sh = SystemShape::new(datum.n(), bound.max(1) as usize);
    let mut used = Vec::new();
    let mut last_q = datum.p;
    for ctx in solver_fields(datum.p, cfg.max_points)? {
        used.push(ctx.q());
        last_q = ctx.q();
        match scan_field(&ctx, datum, &sh, true) {
            FieldScan::Open => continue,
            done => return Ok((done, used)),
        }
    }
    let _ = last_q;
    Ok((FieldScan::Open, used))
}

fn phi_minus_from(datum: &GenDatum, bound: usize, x: &[u32]) -> PolyMat {
    let sv = s_vars();
    let p = datum.p;
    let ring = PolyRing::new(p, &sv);
    let mut m = PolyMat::identity(&ring, datum.n());
    let sh = SystemShape::new(datum.n(), bound);
    for (pi, &(i, j)) in sh.pairs.iter().enumerate() {
        let mut f = MPoly::zero(p, &sv);
        for k in 1..=bound {
            let c = x[pi * bound + k - 1];
            if c != 0 {
                f = f + MPoly::monomial(p, &sv, c as i64, vec![k as u32]);
            }
        }
        m.set(i, j, f);
    }
    m
}

/// Decide whether a Borel pair extends, returning `phi_minus` or an inconsistency certificate.
pub fn solve_phi_minus(datum: &GenDatum, cfg: &ExtendConfig) -> Result<PhiMinusSolution, ExtendError> {
    let borel = check_borel_pair(datum, &cfg.check)?;
    if !borel.passed {
        return Err(ExtendError::NotBorelPair(borel.residual.unwrap_or_else(|| "relation failed".into())));
    }
    let needed = datum.max_half_gap() as u32;
    let bound = match cfg.degree_bound {
        Some(b) if b < needed => return Err(ExtendError::DegreeBoundTooSmall { bound: b, needed }),
        Some(b) => b,
        None => needed,
    }
    .max(1);
    let (scan, fields) = solve_at(datum, bound, cfg)?;
    let mut notes = Vec::new();
    match scan {
        FieldScan::Solved(x) => {
            let phi_minus = phi_minus_from(datum, bound as usize, &x);
            let full = datum.with_phi_minus(phi_minus.clone())?;
            let ga_cfg = CheckConfig { mode: Mode::Auto, ..cfg.check.clone() };
            let opp_cfg = CheckConfig { mode: Mode::Exhaustive, ..cfg.check.clone() };
            let checks = check_ga_homomorphism(&phi_minus, &ga_cfg)?.merge(check_opposite_relation(&full, &opp_cfg)?);
            if !checks.passed {
                notes.push("the solution of the point system fails the relation on a larger field".into());
            }
            Ok(PhiMinusSolution {
                status: ExtensionStatus::Unique,
                phi_minus: Some(phi_minus),
                certificate: None,
                degree_bound: bound,
                fields,
                checks: Some(checks),
                notes,
            })
        }
        FieldScan::Contradiction(cert) => {
            // confirm with a doubled bound
            let (again, _) = solve_at(datum, 2 * bound, cfg)?;
            match again {
                FieldScan::Contradiction(_) => notes.push(format!("also inconsistent with degree bound {}", 2 * bound)),
                _ => notes.push(format!("degree bound {} admits a solution; bound {bound} was too small", 2 * bound)),
            }
            notes.push(format!("certified for phi_minus entries of degree <= {bound} over the listed fields"));
            Ok(PhiMinusSolution {
                status: ExtensionStatus::Inconsistent,
                phi_minus: None,
                certificate: Some(cert),
                degree_bound: bound,
                fields,
                checks: None,
                notes,
            })
        }
        FieldScan::Open => Err(ExtendError::AmbiguousSolution { q: *fields.last().unwrap_or(&datum.p) }),
    }
}

/// Re-evaluates a certificate: the combination must cancel every unknown and leave the
/// stated nonzero constant.
pub fn check_certificate(datum: &GenDatum, cert: &Certificate) -> Result<bool, ExtendError> {
    let p = datum.p;
    let sh = SystemShape::new(datum.n(), cert.degree_bound as usize);
    let mut acc = vec![0u64; sh.unknowns()];
    let mut rhs = 0u64;
    let mut fields: Vec<FieldCtx> = Vec::new();
    for e in &cert.equations {
        let m = (1..=MAX_M)
            .find(|&m| p.pow(m) == e.q)
            .ok_or_else(|| FieldError::Unsupported(format!("q = {} is not a power of {p}", e.q)))?;
        let ctx = match fields.iter().find(|c| c.q() == e.q) {
            Some(c) => c.clone(),
            None => {
                let c = FieldCtx::new(p, m)?;
                fields.push(c.clone());
                c
            }
        };
        let find = |text: &str| ctx.elements().find(|&x| ctx.display(x) == text);
        let (Some(t), Some(s)) = (find(&e.point[0]), find(&e.point[1])) else {
            return Ok(false);
        };
        let classes = sh.bound.min(ctx.q() as usize - 1).max(1);
        let tabs = field_tables(datum, &ctx, sh.bound);
        let eqs = point_equations(&ctx, datum, &sh, &tabs, t, s);
        let Some(eq) = eqs.iter().find(|q| q.entry == (e.entry.0 - 1, e.entry.1 - 1)) else {
            return Ok(false);
        };
        let mut cols: Vec<FqElem> = vec![ctx.zero(); sh.pairs.len() * classes];
        for (col, &c) in eq.coeffs.iter().enumerate() {
            let (pi, k0) = (col / sh.bound, col % sh.bound);
            if k0 < classes {
                cols[pi * classes + k0] = c;
            }
        }
        for (cc, &c) in cols.iter().enumerate() {
            let v = ctx.coeffs(c)[e.component] as u64;
            let (pi, k0) = (cc / classes, cc % classes);
            let col = pi * sh.bound + k0;
            acc[col] = (acc[col] + e.multiplier as u64 * v) % p as u64;
        }
        rhs = (rhs + e.multiplier as u64 * ctx.coeffs(eq.rhs)[e.component] as u64) % p as u64;
    }
    Ok(acc.iter().all(|&x| x == 0) && rhs as u32 == cert.constant && cert.constant != 0)
}

#[derive(Clone, Debug)]
pub struct AssembledSigma {
    pub rep: ClosedFormRep,
    /// Field on which the interpolation was solved.
    pub fit_q: u32,
    /// Agreement with the triple product on all points (including `a = 0` through the
    /// Weyl element) and the SL(2) homomorphism check.
    pub report: CheckReport,
}

/// Normal-form monomials `(alpha, beta, gamma, delta)` compatible with the weights of entry `(i, j)`.
fn entry_basis(weights: &[i64], i: usize, j: usize) -> Vec<[u32; 4]> {
    let (di, dj) = (weights[i], weights[j]);
    if (di + dj) % 2 != 0 {
        return vec![];
    }
    let dmax = weights.iter().map(|w| w.abs()).max().unwrap_or(0);
    let alpha0 = (di + dj) / 2;
    let h = (di - dj) / 2;
    let fixed = di.abs().max(dj.abs());
    let extra = (2 * dmax - fixed).max(0) / 2;
    (0..=extra)
        .map(|g| [alpha0.max(0) as u32, (h.max(0) + g) as u32, ((-h).max(0) + g) as u32, (-alpha0).max(0) as u32])
        .collect()
}

fn monomial_value(ctx: &FieldCtx, e: &[u32; 4], m: &Sl2) -> FqElem {
    (0..4).fold(ctx.one(), |acc, k| ctx.mul(acc, ctx.pow_u(m[k], e[k] as u64)))
}

/// Smallest `q - 1` needed so that the basis monomials are independent as functions.
fn exponent_need(bases: &[Vec<[u32; 4]>]) -> u64 {
    bases.iter().flatten().map(|e| e[1].max(e[2]) as u64).max().unwrap_or(0)
}

/// Interpolate the closed form of a generator datum with `phi_minus`.
pub fn assemble_sigma(datum: &GenDatum, cfg: &CheckConfig) -> Result<AssembledSigma, ExtendError> {
    if datum.phi_minus.is_none() {
        return Err(VerifyError::MissingPhiMinus.into());
    }
    let p = datum.p;
    let n = datum.n();
    let bases: Vec<Vec<[u32; 4]>> = (0..n * n).map(|k| entry_basis(&datum.weights, k / n, k % n)).collect();
    let need = exponent_need(&bases);
    let fit_ctx = (1..=MAX_M)
        .map(|m| FieldCtx::new(p, m))
        .find(|c| c.as_ref().map(|c| c.q() as u64 > need.max(2) && c.sl2_order() <= cfg.enum_budget).unwrap_or(true))
        .ok_or_else(|| {
            ExtendError::InterpolationFailed(format!("no field F_{p}^m with m <= {MAX_M} separates degree {need}"))
        })??;
    let ev = Evaluator::new(RepRef::Datum(datum), &fit_ctx)?;
    let points: Vec<Sl2> = enumerate_sl2(&fit_ctx, cfg.enum_budget)?.into_iter().filter(|m| !m[0].is_zero()).collect();
    let values: Vec<FqMat> = points.par_iter().map(|m| ev.eval(m)).collect();
    let sv = sl2_vars();
    let ring = PolyRing::new(p, &sv);
    let entries: Vec<Result<MPoly, ExtendError>> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n, k % n);
            let basis = &bases[k];
            fit_entry(&fit_ctx, basis, &points, &values, i, j).map(|coefs| {
                basis.iter().zip(coefs).fold(MPoly::zero(p, &sv), |acc, (e, c)| {
                    if c == 0 {
                        acc
                    } else {
                        acc + MPoly::monomial(p, &sv, c as i64, e.to_vec())
                    }
                })
            })
        })
        .collect();
    let data = entries.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mat = PolyMat::new(&ring, n, n, data)?;
    let deg = mat.total_degree() as u64;
    let mut twist = 0u32;
    while 3 * (p as u64).pow(twist) < deg {
        twist += 1;
    }
    let rep = ClosedFormRep::new(mat, twist)?;
    let mut fields = vec![fit_ctx.clone()];
    for f in default_group_fields(p)? {
        if !fields.contains(&f) {
            fields.push(f);
        }
    }
    let mut report = agreement(datum, &rep, &fields, cfg)?;
    report = report.merge(check_sl2_homomorphism(RepRef::Closed(&rep), &CheckConfig { mode: Mode::Auto, ..cfg.clone() })?);
    Ok(AssembledSigma { rep, fit_q: fit_ctx.q(), report })
}

fn fit_entry(
    ctx: &FieldCtx,
    basis: &[[u32; 4]],
    points: &[Sl2],
    values: &[FqMat],
    i: usize,
    j: usize,
) -> Result<Vec<u32>, ExtendError> {
    let p = ctx.p();
    let fail = |why: &str| ExtendError::InterpolationFailed(format!("entry ({},{}): {why}", i + 1, j + 1));
    if basis.is_empty() {
        return if values.iter().all(|v| v.get(i, j).is_zero()) {
            Ok(vec![])
        } else {
            Err(fail("no monomial has the entry's torus weight"))
        };
    }
    let mut ech = Echelon::new(p, basis.len(), false);
    let mut sol: Option<Vec<u32>> = None;
    for (m, v) in points.iter().zip(values) {
        let vals: Vec<Vec<u32>> = basis.iter().map(|e| ctx.coeffs(monomial_value(ctx, e, m))).collect();
        let rhs = ctx.coeffs(*v.get(i, j));
        for comp in 0..ctx.m() as usize {
            let coeffs: Vec<u32> = vals.iter().map(|x| x[comp]).collect();
            if let Some(x) = &sol {
                if residual(p, &coeffs, rhs[comp], x) != 0 {
                    return Err(fail("no exact fit"));
                }
                continue;
            }
            match ech.add(Row { coeffs, rhs: rhs[comp], combo: vec![] }) {
                AddOutcome::Contradiction(_) => return Err(fail("no exact fit")),
                AddOutcome::Pivot if ech.rank() == ech.ncols => sol = ech.solution(),
                _ => {}
            }
        }
    }
    sol.ok_or_else(|| fail("fit is not unique on this field"))
}

fn agreement(datum: &GenDatum, rep: &ClosedFormRep, fields: &[FieldCtx], cfg: &CheckConfig) -> Result<CheckReport, ExtendError> {
    let mut report = CheckReport {
        passed: true,
        backend: Backend::Exhaustive,
        coverage: vec![],
        counterexample: None,
        residual: None,
        relations: vec!["closed-form-agreement".into()],
        notes: vec![],
    };
    for ctx in fields {
        let ev = Evaluator::new(RepRef::Datum(datum), ctx)?;
        let group = match enumerate_sl2(ctx, cfg.enum_budget) {
            Ok(g) => g,
            Err(FieldError::BudgetExceeded { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        let cex = group.par_iter().find_map_first(|m| {
            let a = rep.eval(ctx, m);
            let b = ev.eval(m);
            (a != b).then(|| Counterexample {
                q: ctx.q(),
                relation: "closed-form-agreement".into(),
                point: m.iter().map(|&x| ctx.display(x)).collect(),
                lhs: a.to_codes(),
                rhs: b.to_codes(),
            })
        });
        report.coverage.push(Coverage { q: ctx.q(), checked: group.len() as u64, complete: true, seed: None });
        if cex.is_some() {
            report.passed = false;
            report.counterexample = cex;
            break;
        }
    }
    Ok(report)
}

/// Default enumeration budget for interpolation fields.
pub const ASSEMBLY_BUDGET: u64 = DEFAULT_ENUM_BUDGET;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_borel_pair, build_sigma, FormSpec};

    fn datum(form: &str, p: u32, params: &str) -> GenDatum {
        build_borel_pair(&FormSpec::parse(form, p, params).unwrap()).unwrap()
    }

    fn lower(p: u32, rows: &[&[&str]]) -> PolyMat {
        PolyMat::parse(&PolyRing::new(p, &s_vars()), rows).unwrap()
    }

    #[test]
    fn form_i_unique() {
        let d = datum("borel:I", 5, "e1=0");
        let sol = solve_phi_minus(&d, &ExtendConfig { degree_bound: Some(3), ..Default::default() }).unwrap();
        assert_eq!(sol.status, ExtensionStatus::Unique);
        let expected =
            lower(5, &[&["1", "0", "0", "0"], &["3*s", "1", "0", "0"], &["s^2", "4*s", "1", "0"], &["s^3", "s^2", "3*s", "1"]]);
        assert_eq!(sol.phi_minus.unwrap(), expected);
        assert!(sol.checks.unwrap().passed);
    }

    #[test]
    fn form_xii_inconsistent_with_valid_certificate() {
        let d = datum("borel:XII", 2, "e1=0,d2=0");
        let sol = solve_phi_minus(&d, &ExtendConfig::default()).unwrap();
        assert_eq!(sol.status, ExtensionStatus::Inconsistent);
        let cert = sol.certificate.unwrap();
        assert!(check_certificate(&d, &cert).unwrap());
        let mut forged = cert.clone();
        forged.constant = 0;
        assert!(!check_certificate(&d, &forged).unwrap());
    }

    #[test]
    fn form_xxiv_depends_on_d2() {
        let sol = solve_phi_minus(&datum("borel:XXIV", 2, "e2=0,d2=1"), &ExtendConfig::default()).unwrap();
        assert_eq!(sol.status, ExtensionStatus::Inconsistent);
        let sol = solve_phi_minus(&datum("borel:XXIV", 2, "e2=0,d2=0"), &ExtendConfig::default()).unwrap();
        assert_eq!(sol.status, ExtensionStatus::Unique);
        let expected = lower(2, &[&["1", "0", "0", "0"], &["0", "1", "0", "0"], &["0", "0", "1", "0"], &["s", "0", "0", "1"]]);
        assert_eq!(sol.phi_minus.unwrap(), expected);
    }

    #[test]
    fn bound_below_gap_is_rejected() {
        let d = datum("borel:I", 5, "e1=0");
        let r = solve_phi_minus(&d, &ExtendConfig { degree_bound: Some(2), ..Default::default() });
        assert_eq!(r.unwrap_err(), ExtendError::DegreeBoundTooSmall { bound: 2, needed: 3 });
    }

    #[test]
    fn non_borel_input_is_rejected() {
        let d = datum("borel:I", 5, "e1=0");
        let bad = GenDatum::new(d.phi_plus.clone(), vec![1, 3, -3, -1], None).unwrap();
        assert!(matches!(solve_phi_minus(&bad, &ExtendConfig::default()), Err(ExtendError::NotBorelPair(_))));
    }

    #[test]
    fn assemble_ix_and_trivial() {
        let d = datum("borel:IX", 3, "e1=0");
        let sol = solve_phi_minus(&d, &ExtendConfig::default()).unwrap();
        let full = d.with_phi_minus(sol.phi_minus.unwrap()).unwrap();
        let a = assemble_sigma(&full, &CheckConfig::default()).unwrap();
        assert!(a.report.passed);
        let star = build_sigma(&FormSpec::parse("star:IX", 3, "e1=0").unwrap()).unwrap();
        assert_eq!(a.rep.entries, star.entries);
        assert_eq!(a.rep.entries.get(1, 1), &MPoly::parse(3, &sl2_vars(), "2*b*c + 1").unwrap());

        let z = datum("borel:XXVI", 3, "d1=0,d2=0");
        let full = z.with_phi_minus(PolyMat::identity(&PolyRing::new(3, &s_vars()), 4)).unwrap();
        let a = assemble_sigma(&full, &CheckConfig::default()).unwrap();
        assert!(a.rep.entries.is_identity());
    }

    #[test]
    fn echelon_certificate_combination() {
        // x = 1, x = 2 over F_3
        let mut e = Echelon::new(3, 1, true);
        assert!(matches!(e.add(Row { coeffs: vec![1], rhs: 1, combo: vec![(0, 1)] }), AddOutcome::Pivot));
        match e.add(Row { coeffs: vec![1], rhs: 2, combo: vec![(1, 1)] }) {
            AddOutcome::Contradiction(r) => {
                assert_eq!(r.rhs, 1);
                assert_eq!(r.combo, vec![(0, 2), (1, 1)]);
            }
            _ => panic!("expected a contradiction"),
        }
    }

    #[test]
    fn entry_basis_respects_weights() {
        let w = [3, 1, -1, -3];
        let b = entry_basis(&w, 0, 3);
        assert_eq!(b[0], [0, 3, 0, 0]);
        let b = entry_basis(&w, 1, 1);
        assert_eq!(b[0], [1, 0, 0, 0]);
        assert!(entry_basis(&[1, 0, 0, -1], 0, 1).is_empty());
    }
}
