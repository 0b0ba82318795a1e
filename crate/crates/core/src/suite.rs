//! The acceptance battery: eight criteria over the whole catalog, each reported with
//! its evidence level.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analyze::{
    analysis_field, decompose, fixed_dims, is_indecomposable, random_conjugator, GenImages, SignatureTable, CLASSIFY_MAX_E,
};
use crate::catalog::{
    build_borel_pair, build_sigma, conjugator_identity, conjugator_instances, extension_constraints_hold, instances,
    star_of_borel, ClosedFormRep, Conjugator, Family, FormSpec, Label, Params, Small, EXTENDABLE, PLUS_LABELS, SHARP_LABELS,
};
use crate::extend::{assemble_sigma, check_certificate, solve_phi_minus, ExtendConfig, ExtensionStatus};
use crate::field::{enumerate_sl2, FieldCtx};
use crate::linalg::FqMat;
use crate::verify::{
    borel_star, check_borel_pair, check_sl2_homomorphism, default_group_fields, default_point_fields, omega_eval, omega_star,
    psi_eval, restrict_lower, Backend, CheckConfig, CheckReport, RepRef,
};

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub primes: Vec<u32>,
    /// Exponent ceiling for criteria 1-4 and 6-7; criterion 5 uses [`CLASSIFY_MAX_E`].
    pub max_e: i64,
    pub seed: u64,
    /// Random instances per property in criterion 8.
    pub property_cases: usize,
    /// Random conjugators per form in the classification round trip.
    pub conjugations: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { primes: vec![2, 3, 5], max_e: 1, seed: crate::verify::DEFAULT_SEED, property_cases: 200, conjugations: 10 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    /// How the verdict was reached, e.g. "symbolic" or "exhaustive over F_9, F_81".
    pub evidence: String,
    pub checked: usize,
    pub failures: Vec<String>,
    pub seconds: f64,
}

pub const TITLES: [&str; 8] = [
    "Borel catalog soundness",
    "extension dichotomy",
    "assembled closed forms",
    "fixed-vector dimensions",
    "classification separation",
    "decomposition table",
    "conjugator identities",
    "property suites",
];

/// Fixed-vector dimensions `(columns, rows)` of the star forms.
pub fn expected_fixed_dims(label: Label) -> Option<(usize, usize)> {
    use Label as L;
    Some(match label {
        L::I | L::II | L::IV | L::VII | L::XV => (0, 0),
        L::V | L::IX => (1, 1),
        L::XI => (1, 2),
        L::XIX => (2, 1),
        L::XXIV => (2, 2),
        L::XXVI => (4, 4),
        _ => return None,
    })
}

/// Number of sharp families at characteristic `p`.
pub fn expected_class_count(p: u32) -> usize {
    match p {
        2 | 3 => 7,
        _ => 6,
    }
}

/// Indecomposable summands of a sharp form, as small-family specs (self for indecomposables).
pub fn expected_summands(spec: &FormSpec) -> Vec<FormSpec> {
    use Label as L;
    let Family::Sharp(label) = spec.family else { return vec![spec.clone()] };
    let p = spec.p;
    let e = |k: &str| spec.param(k).unwrap_or(0);
    let small = |s: Small, ev: Option<i64>| {
        let params = match ev {
            Some(x) => Params::new().with("e", x),
            None => Params::new(),
        };
        FormSpec::new(Family::Small(s), p, params)
    };
    let one = || small(Small::N1, None);
    match label {
        L::XI => vec![small(Small::N3_1b, Some(e("e1"))), one()],
        L::XIX => vec![small(Small::N3_1a, Some(e("e1"))), one()],
        L::IX => vec![small(Small::N3_2a, Some(e("e1"))), one()],
        L::XV => vec![small(Small::N2_1, Some(e("e2"))), small(Small::N2_1, Some(e("e3")))],
        L::XXIV => vec![small(Small::N2_1, Some(e("e2"))), one(), one()],
        L::XXVI => vec![one(), one(), one(), one()],
        _ => vec![spec.clone()],
    }
}

/// Summands of the decomposable small families.
pub fn expected_small_summands(spec: &FormSpec) -> Vec<FormSpec> {
    let Family::Small(s) = spec.family else { return vec![spec.clone()] };
    let p = spec.p;
    let one = FormSpec::new(Family::Small(Small::N1), p, Params::new());
    let two = || FormSpec::new(Family::Small(Small::N2_1), p, Params::new().with("e", spec.param("e").unwrap_or(0)));
    match s {
        Small::N2_2 => vec![one.clone(), one],
        Small::N3_1c | Small::N3_2b => vec![two(), one],
        Small::N3_1d | Small::N3_2c => vec![one.clone(), one.clone(), one],
        _ => vec![spec.clone()],
    }
}

fn admissible_borel(cfg: &SuiteConfig) -> Vec<FormSpec> {
    cfg.primes.iter().flat_map(|&p| Label::ALL.iter().flat_map(move |&l| instances(Family::Borel(l), p, cfg.max_e))).collect()
}

fn evidence_of(reports: &[CheckReport]) -> String {
    let mut backends: Vec<&str> = reports
        .iter()
        .map(|r| match r.backend {
            Backend::Symbolic => "symbolic",
            Backend::Exhaustive => "exhaustive",
            Backend::Sampled => "sampled",
        })
        .collect();
    backends.sort();
    backends.dedup();
    let mut qs: Vec<u32> = reports.iter().flat_map(|r| r.coverage.iter().map(|c| c.q)).collect();
    qs.sort();
    qs.dedup();
    let fields: Vec<String> = qs.iter().map(|q| format!("F_{q}")).collect();
    if fields.is_empty() {
        backends.join("+")
    } else {
        format!("{} over {}", backends.join("+"), fields.join(", "))
    }
}

struct Tally {
    checked: usize,
    failures: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Tally { checked: 0, failures: vec![] }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures.push(what());
        }
    }
}

fn finish(id: u8, start: Instant, tally: Tally, evidence: String) -> CriterionReport {
    CriterionReport {
        id,
        title: TITLES[id as usize - 1],
        passed: tally.failures.is_empty() && tally.checked > 0,
        evidence,
        checked: tally.checked,
        failures: tally.failures,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn criterion_borel(cfg: &SuiteConfig) -> CriterionReport {
    let start = Instant::now();
    let specs = admissible_borel(cfg);
    let results: Vec<(FormSpec, Result<CheckReport, String>)> = specs
        .into_par_iter()
        .map(|s| {
            let r = build_borel_pair(&s)
                .map_err(|e| e.to_string())
                .and_then(|d| check_borel_pair(&d, &CheckConfig::default()).map_err(|e| e.to_string()));
            (s, r)
        })
        .collect();
    let mut tally = Tally::new();
    let mut reports = Vec::new();
    for (s, r) in results {
        match r {
            Ok(rep) => {
                tally.check(rep.passed, || format!("{s}: {:?}", rep.counterexample.as_ref().map(|c| &c.point)));
                reports.push(rep);
            }
            Err(e) => tally.check(false, || format!("{s}: {e}")),
        }
    }
    finish(1, start, tally, evidence_of(&reports))
}

fn expected_extendable(spec: &FormSpec) -> bool {
    matches!(spec.family, Family::Borel(l) if EXTENDABLE.contains(&l)) && extension_constraints_hold(spec)
}

/// Criteria 2 and 3 share the solver runs.
pub fn criteria_extension(cfg: &SuiteConfig) -> (CriterionReport, CriterionReport) {
    let start = Instant::now();
    let specs = admissible_borel(cfg);
    type Outcome = (FormSpec, Result<(bool, bool, Option<String>, Option<(bool, bool, CheckReport)>), String>);
    let results: Vec<Outcome> = specs
        .into_par_iter()
        .map(|spec| {
            let run = || -> Result<_, String> {
                let d = build_borel_pair(&spec).map_err(|e| e.to_string())?;
                let sol = solve_phi_minus(&d, &ExtendConfig::default()).map_err(|e| e.to_string())?;
                let unique = sol.status == ExtensionStatus::Unique;
                let mut note = None;
                let mut matches_printed = true;
                let mut assembled = None;
                if let Some(cert) = &sol.certificate {
                    if !check_certificate(&d, cert).map_err(|e| e.to_string())? {
                        note = Some("certificate does not re-verify".to_string());
                        matches_printed = false;
                    }
                }
                if let (Some(pm), Some(star)) = (&sol.phi_minus, star_of_borel(&spec)) {
                    let rep = build_sigma(&star).map_err(|e| e.to_string())?;
                    let printed = restrict_lower(&rep).map_err(|e| e.to_string())?;
                    matches_printed = *pm == printed;
                    if !matches_printed {
                        note = Some(format!("phi_minus {:?} differs from {:?}", pm.to_strings(), printed.to_strings()));
                    }
                    let full = d.with_phi_minus(pm.clone()).map_err(|e| e.to_string())?;
                    let a = assemble_sigma(&full, &CheckConfig::default()).map_err(|e| e.to_string())?;
                    assembled = Some((a.rep.entries == rep.entries, a.report.passed, a.report));
                }
                Ok((unique, matches_printed, note, assembled))
            };
            let r = run();
            (spec, r)
        })
        .collect();
    let mut t2 = Tally::new();
    let mut t3 = Tally::new();
    let mut reports = Vec::new();
    for (spec, r) in results {
        match r {
            Ok((unique, printed, note, assembled)) => {
                let want = expected_extendable(&spec);
                t2.check(unique == want && printed, || {
                    format!("{spec}: extendable={unique}, expected {want}{}", note.map(|n| format!(" ({n})")).unwrap_or_default())
                });
                if let Some((same, passed, report)) = assembled {
                    t3.check(same && passed, || format!("{spec}: matches closed form {same}, homomorphism check {passed}"));
                    reports.push(report);
                }
            }
            Err(e) => t2.check(false, || format!("{spec}: {e}")),
        }
    }
    // untwisted plus forms carry the exact coordinate-ring check; star = plus o F^e is criterion 7
    let plus: Vec<FormSpec> =
        cfg.primes.iter().flat_map(|&p| PLUS_LABELS.iter().flat_map(move |&l| instances(Family::Plus(l), p, 0))).collect();
    let plus_checks: Vec<(FormSpec, Result<CheckReport, String>)> = plus
        .into_par_iter()
        .map(|s| {
            let r = build_sigma(&s)
                .map_err(|e| e.to_string())
                .and_then(|r| check_sl2_homomorphism(RepRef::Closed(&r), &CheckConfig::default()).map_err(|e| e.to_string()));
            (s, r)
        })
        .collect();
    for (spec, r) in plus_checks {
        match r {
            Ok(rep) => {
                t3.check(rep.passed, || format!("{spec}: homomorphism check failed"));
                reports.push(rep);
            }
            Err(e) => t3.check(false, || format!("{spec}: {e}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let mut c2 = finish(2, start, t2, "exact linear algebra over F_p".into());
    let mut c3 = finish(3, start, t3, evidence_of(&reports));
    c2.seconds = secs;
    c3.seconds = secs;
    (c2, c3)
}

fn star_specs(cfg: &SuiteConfig, labels: &[Label]) -> Vec<FormSpec> {
    cfg.primes.iter().flat_map(|&p| labels.iter().flat_map(move |&l| instances(Family::Star(l), p, cfg.max_e))).collect()
}

pub fn criterion_fixed_dims(cfg: &SuiteConfig) -> CriterionReport {
    let start = Instant::now();
    let mut tally = Tally::new();
    let labels: Vec<Label> = SHARP_LABELS.to_vec();
    for spec in star_specs(cfg, &labels) {
        let Family::Star(l) = spec.family else { continue };
        let want = expected_fixed_dims(l);
        let got = analysis_field(spec.p)
            .map_err(|e| e.to_string())
            .and_then(|ctx| build_sigma(&spec).map_err(|e| e.to_string()).map(|r| (ctx, r)))
            .and_then(|(ctx, r)| GenImages::of_closed(&r, &ctx).and_then(|g| fixed_dims(&g)).map_err(|e| e.to_string()));
        tally.check(got.as_ref().ok() == want.as_ref(), || format!("{spec}: got {got:?}, expected {want:?}"));
    }
    finish(4, start, tally, "exact ranks over the analysis fields".into())
}

pub fn criterion_classification(cfg: &SuiteConfig) -> CriterionReport {
    let start = Instant::now();
    let mut tally = Tally::new();
    for &p in &cfg.primes {
        let table = match analysis_field(p)
            .map_err(|e| e.to_string())
            .and_then(|ctx| SignatureTable::sharp(&ctx, CLASSIFY_MAX_E).map_err(|e| e.to_string()))
        {
            Ok(t) => t,
            Err(e) => {
                tally.check(false, || format!("p={p}: {e}"));
                continue;
            }
        };
        let collisions = table.collisions();
        tally.check(collisions.is_empty(), || format!("p={p}: colliding signatures {collisions:?}"));
        let count = table.labels().len();
        tally
            .check(count == expected_class_count(p), || format!("p={p}: {count} families, expected {}", expected_class_count(p)));
        let outcomes: Vec<(String, bool)> = table
            .entries
            .par_iter()
            .enumerate()
            .flat_map_iter(|(i, (spec, _))| {
                let table = &table;
                (0..cfg.conjugations).map(move |k| {
                    let seed = cfg.seed ^ ((p as u64) << 40) ^ ((i as u64) << 20) ^ k as u64;
                    let got = build_sigma(spec)
                        .map_err(|e| e.to_string())
                        .and_then(|r| GenImages::of_closed(&r, &table.ctx).map_err(|e| e.to_string()))
                        .and_then(|g| g.conjugate(&random_conjugator(&table.ctx, 4, seed)).map_err(|e| e.to_string()))
                        .and_then(|g| table.classify(&g).map_err(|e| e.to_string()));
                    (format!("{spec} (conjugator {k}): {got:?}"), got.as_ref() == Ok(spec))
                })
            })
            .collect();
        for (what, ok) in outcomes {
            tally.check(ok, || what);
        }
    }
    finish(5, start, tally, format!("signature table with exponents up to {CLASSIFY_MAX_E}"))
}

fn multiset(v: &[FormSpec]) -> Vec<String> {
    let mut s: Vec<String> = v.iter().map(|f| f.to_string()).collect();
    s.sort();
    s
}

pub fn criterion_decomposition(cfg: &SuiteConfig) -> CriterionReport {
    let start = Instant::now();
    let mut tally = Tally::new();
    let mut specs: Vec<FormSpec> = cfg
        .primes
        .iter()
        .flat_map(|&p| SHARP_LABELS.iter().flat_map(move |&l| instances(Family::Sharp(l), p, cfg.max_e)))
        .collect();
    specs
        .extend(cfg.primes.iter().flat_map(|&p| Small::ALL.iter().flat_map(move |&s| instances(Family::Small(s), p, cfg.max_e))));
    type Split = Result<(Vec<FormSpec>, bool), String>;
    let results: Vec<(FormSpec, Split)> = specs
        .into_par_iter()
        .map(|spec| {
            let r = (|| -> Result<_, String> {
                let ctx = analysis_field(spec.p).map_err(|e| e.to_string())?;
                let g = GenImages::of_closed(&build_sigma(&spec).map_err(|e| e.to_string())?, &ctx).map_err(|e| e.to_string())?;
                let indec = is_indecomposable(&g).map_err(|e| e.to_string())?;
                let rep = decompose(&g).map_err(|e| e.to_string())?;
                let flat: Vec<FormSpec> = rep.summands.iter().flat_map(|(s, k)| std::iter::repeat_n(s.clone(), *k)).collect();
                Ok((flat, indec))
            })();
            (spec, r)
        })
        .collect();
    for (spec, r) in results {
        let want = match spec.family {
            Family::Small(_) => expected_small_summands(&spec),
            _ => expected_summands(&spec),
        };
        match r {
            Ok((got, indec)) => {
                tally.check(multiset(&got) == multiset(&want), || {
                    format!("{spec}: got {:?}, expected {:?}", multiset(&got), multiset(&want))
                });
                let want_indec = want.len() == 1;
                tally.check(indec == want_indec, || format!("{spec}: indecomposable={indec}, expected {want_indec}"));
            }
            Err(e) => tally.check(false, || format!("{spec}: {e}")),
        }
    }
    finish(6, start, tally, "idempotent search over the analysis fields".into())
}

fn exhaustive_equal(a: &ClosedFormRep, b: &ClosedFormRep, fields: &[FieldCtx]) -> Result<(bool, Vec<u32>), String> {
    let mut qs = Vec::new();
    for ctx in fields {
        let group = enumerate_sl2(ctx, crate::field::DEFAULT_ENUM_BUDGET).map_err(|e| e.to_string())?;
        let ok = group.par_iter().all(|m| a.eval(ctx, m) == b.eval(ctx, m));
        qs.push(ctx.q());
        if !ok {
            return Ok((false, qs));
        }
    }
    Ok((true, qs))
}

pub fn criterion_conjugators(cfg: &SuiteConfig) -> CriterionReport {
    let start = Instant::now();
    let mut tally = Tally::new();
    let mut qs: Vec<u32> = Vec::new();
    for &p in &cfg.primes {
        let fields = match default_group_fields(p) {
            Ok(f) => f,
            Err(e) => {
                tally.check(false, || format!("p={p}: {e}"));
                continue;
            }
        };
        for id in Conjugator::all() {
            for params in conjugator_instances(id, p, cfg.max_e) {
                let r = conjugator_identity(id, p, &params)
                    .map_err(|e| e.to_string())
                    .and_then(|(l, r)| exhaustive_equal(&l, &r, &fields));
                if let Ok((_, q)) = &r {
                    qs.extend(q);
                }
                tally.check(matches!(r, Ok((true, _))), || format!("{} at p={p} ({params}): {r:?}", id.name()));
            }
        }
        // the tau partner of (VII)# is (II)#
        if p == 3 {
            for e in 0..=cfg.max_e {
                let pr = Params::new().with("e1", e);
                let r = (|| -> Result<_, String> {
                    let vii = build_sigma(&FormSpec::new(Family::Sharp(Label::VII), p, pr.clone())).map_err(|e| e.to_string())?;
                    let ii = build_sigma(&FormSpec::new(Family::Sharp(Label::II), p, pr.clone())).map_err(|e| e.to_string())?;
                    exhaustive_equal(&vii.tau_conjugate().map_err(|e| e.to_string())?, &ii, &fields)
                })();
                tally.check(matches!(r, Ok((true, _))), || format!("tau of sharp VII at e1={e}: {r:?}"));
            }
        }
    }
    qs.sort();
    qs.dedup();
    let fields: Vec<String> = qs.iter().map(|q| format!("F_{q}")).collect();
    finish(7, start, tally, format!("exhaustive over {}", fields.join(", ")))
}

fn random_mat(ctx: &FieldCtx, n: usize, rng: &mut ChaCha8Rng) -> FqMat {
    FqMat::from_fn(ctx, n, n, |_, _| ctx.random(rng))
}

fn closed_forms(cfg: &SuiteConfig) -> Vec<ClosedFormRep> {
    let mut out = Vec::new();
    for &p in &cfg.primes {
        for &l in &Label::ALL {
            for fam in [Family::Star(l), Family::Sharp(l), Family::Plus(l)] {
                let ok = match fam {
                    Family::Sharp(l) => SHARP_LABELS.contains(&l),
                    Family::Plus(l) => PLUS_LABELS.contains(&l),
                    _ => true,
                };
                if ok {
                    out.extend(instances(fam, p, cfg.max_e).iter().filter_map(|s| build_sigma(s).ok()));
                }
            }
        }
        for &s in &Small::ALL {
            out.extend(instances(Family::Small(s), p, cfg.max_e).iter().filter_map(|s| build_sigma(s).ok()));
        }
    }
    out
}

/// Involution laws, the monomial constraint, Frobenius multiplicativity and the
/// mixed-product law, each on `property_cases` seeded random instances.
pub fn criterion_properties(cfg: &SuiteConfig) -> CriterionReport {
    let start = Instant::now();
    let mut tally = Tally::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let borel: Vec<FormSpec> = admissible_borel(cfg);
    let forms = closed_forms(cfg);
    let fields: Vec<FieldCtx> = cfg.primes.iter().flat_map(|&p| default_point_fields(p).unwrap_or_default()).collect();
    let n = cfg.property_cases;
    let pick_field = |rng: &mut ChaCha8Rng, p: u32| {
        let fs: Vec<&FieldCtx> = fields.iter().filter(|f| f.p() == p).collect();
        fs[rng.random_range(0..fs.len())].clone()
    };
    // the monomial constraint is cheap enough to check on every entry
    for spec in &borel {
        let d = build_borel_pair(spec).expect("catalog instance");
        let w = &d.weights;
        let mono = (0..d.n())
            .all(|i| (0..d.n()).all(|j| i == j || d.phi_plus.get(i, j).terms().all(|(e, _)| 2 * e[0] as i64 == w[i] - w[j])));
        tally.check(mono, || format!("monomial constraint: {spec}"));
    }
    for case in 0..n {
        // psi** = psi and omega** = omega on a random Borel datum
        let spec = &borel[rng.random_range(0..borel.len())];
        let d = build_borel_pair(spec).expect("catalog instance");
        let ctx = pick_field(&mut rng, spec.p);
        let t = ctx.random(&mut rng);
        let u = ctx.random_nonzero(&mut rng);
        let psi = |t, u| psi_eval(&d, &ctx, t, u);
        let twice = borel_star(&ctx, borel_star(&ctx, psi));
        tally.check(twice(t, u) == psi_eval(&d, &ctx, t, u), || format!("psi** != psi: {spec} case {case}"));
        let w = &d.weights;
        let om_star_star = omega_star(&ctx, w, u).inverse().expect("invertible").tau().expect("square");
        tally.check(om_star_star == omega_eval(&ctx, w, u), || format!("omega** != omega: {spec} case {case}"));
        if d.is_antisymmetric() {
            tally.check(omega_star(&ctx, w, u) == omega_eval(&ctx, w, u), || format!("omega* != omega: {spec} case {case}"));
        }

        // tau tau = id, Frobenius multiplicativity, mixed products
        let ctx = fields[rng.random_range(0..fields.len())].clone();
        let a = random_mat(&ctx, 4, &mut rng);
        let b = random_mat(&ctx, 4, &mut rng);
        tally.check(a.tau().and_then(|x| x.tau()).map(|x| x == a).unwrap_or(false), || format!("tau tau != id, case {case}"));
        let e = rng.random_range(0..4);
        let lhs = a.mul(&b).expect("4x4").frobenius(e);
        let rhs = a.frobenius(e).mul(&b.frobenius(e)).expect("4x4");
        tally.check(lhs == rhs, || format!("Frobenius of a product, case {case}"));
        let (c2, d2) = (random_mat(&ctx, 2, &mut rng), random_mat(&ctx, 2, &mut rng));
        let (a2, b2) = (random_mat(&ctx, 2, &mut rng), random_mat(&ctx, 2, &mut rng));
        let lhs = a2.kron(&b2).and_then(|x| x.mul(&c2.kron(&d2)?));
        let rhs = a2.mul(&c2).and_then(|x| x.kron(&b2.mul(&d2)?));
        tally.check(lhs.is_ok() && lhs == rhs, || format!("mixed-product law, case {case}"));

        // tau-conjugating a closed form twice is the identity; sigma o F^e stays multiplicative
        let rep = &forms[rng.random_range(0..forms.len())];
        tally.check(rep.tau_conjugate().and_then(|r| r.tau_conjugate()).map(|r| r == *rep).unwrap_or(false), || {
            format!("double tau conjugate, case {case}")
        });
        let ctx = pick_field(&mut rng, rep.p);
        let e = rng.random_range(0..3);
        let twisted = rep.frobenius(e).expect("twist within limits");
        let (m1, m2) = (ctx.random_sl2(&mut rng), ctx.random_sl2(&mut rng));
        let prod = twisted.eval(&ctx, &ctx.sl2_mul(&m1, &m2));
        let split = twisted.eval(&ctx, &m1).mul(&twisted.eval(&ctx, &m2)).expect("square");
        tally.check(prod == split, || format!("sigma o F^{e} not multiplicative, case {case}"));
    }
    finish(8, start, tally, format!("{n} seeded random instances per property"))
}

/// Run one criterion by number (criteria 2 and 3 share work; asking for either runs both).
pub fn run_criteria(ids: &[u8], cfg: &SuiteConfig) -> Vec<CriterionReport> {
    let want = |k: u8| ids.is_empty() || ids.contains(&k);
    let jobs: Vec<u8> = (1..=8).filter(|&k| want(k) && k != 3).collect();
    let mut out: Vec<CriterionReport> = jobs
        .par_iter()
        .flat_map_iter(|&k| match k {
            1 => vec![criterion_borel(cfg)],
            2 => {
                let (a, b) = criteria_extension(cfg);
                vec![a, b]
            }
            4 => vec![criterion_fixed_dims(cfg)],
            5 => vec![criterion_classification(cfg)],
            6 => vec![criterion_decomposition(cfg)],
            7 => vec![criterion_conjugators(cfg)],
            _ => vec![criterion_properties(cfg)],
        })
        .collect();
    if want(3) && !want(2) {
        out.push(criteria_extension(cfg).1);
    }
    out.retain(|r| want(r.id));
    out.sort_by_key(|r| r.id);
    out
}

pub fn run_suite(cfg: &SuiteConfig) -> Vec<CriterionReport> {
    run_criteria(&[], cfg)
}

/// Checks an SL(2) closed form on the default fields; convenience for callers without a config.
pub fn verify_closed(rep: &ClosedFormRep) -> Result<CheckReport, crate::verify::VerifyError> {
    check_sl2_homomorphism(RepRef::Closed(rep), &CheckConfig::default())
}
