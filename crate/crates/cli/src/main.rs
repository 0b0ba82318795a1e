use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use sl2kit::analyze::{self, check_equivalence, random_conjugator, Equivalence, GenImages, NonEquivalence, SEARCH_BUDGET};
use sl2kit::catalog::{
    build_borel_pair, build_sigma, instances, param_names, star_of_borel, Family, Label, Small, PLUS_LABELS, SHARP_LABELS,
};
use sl2kit::extend::{assemble_sigma, solve_phi_minus, ExtendConfig, ExtensionStatus};
use sl2kit::field::DEFAULT_ENUM_BUDGET;
use sl2kit::suite::{run_criteria, SuiteConfig};
use sl2kit::verify::{check_borel_pair, check_sl2_homomorphism, default_point_fields, CheckConfig, Mode, RepRef, DEFAULT_SEED};
use sl2kit::{ClosedFormRep, FieldCtx, FormSpec, FqMat, GenDatum, PolyMat};

const SCHEMA: u32 = 1;

#[derive(Parser)]
#[command(
    name = "sl2kit",
    version,
    about = "Build, verify, extend, classify and decompose SL(2) homomorphisms over finite fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List catalog instances, or print one entry.
    Catalog(Common),
    /// Check a Borel pair: additivity and torus equivariance.
    VerifyBorel(Common),
    /// Check that a closed form (or an extended Borel pair) is multiplicative on SL(2).
    VerifySl2(Common),
    /// Solve for the lower unipotent part, or certify that none exists.
    Extend(Common),
    /// Torus weights, fixed-vector dimensions and the full signature.
    Invariants(Common),
    /// Identify the catalog class, optionally after a random change of basis.
    Classify(Common),
    /// Split into indecomposable summands.
    Decompose(Common),
    /// Decide equivalence of `--form` and `--with`.
    Equiv(Common),
    /// Run the acceptance battery.
    Suite(SuiteArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Form such as `borel:I`, `star:IX`, `sharp:XV`, `plus:I` or `small:2.1`.
    #[arg(long)]
    form: Option<String>,
    #[arg(long)]
    p: Option<u32>,
    /// Field degree: checks run over F_{p^m} and F_{p^2m}; analysis runs over F_{p^m}.
    #[arg(long)]
    m: Option<u32>,
    /// Parameters as `k=v,...`.
    #[arg(long, default_value = "")]
    params: String,
    #[arg(long, default_value = "auto")]
    mode: Mode,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Enumeration budget for checks, search budget for idempotents and intertwiners.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Second form for `equiv`.
    #[arg(long)]
    with: Option<String>,
    /// Parameters of the second form.
    #[arg(long, default_value = "")]
    with_params: String,
    /// Conjugate by a random invertible matrix (seeded) before analysing.
    #[arg(long)]
    conjugate: bool,
    /// Exponent ceiling when listing the catalog.
    #[arg(long, default_value_t = 1)]
    max_e: i64,
    /// Degree bound for `extend`.
    #[arg(long)]
    degree_bound: Option<u32>,
}

#[derive(Args, Clone)]
struct SuiteArgs {
    /// Characteristics, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [2u32, 3, 5])]
    primes: Vec<u32>,
    #[arg(long, default_value_t = 1)]
    max_e: i64,
    /// Criteria to run, comma separated; all by default.
    #[arg(long, value_delimiter = ',')]
    criteria: Vec<u8>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    cases: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

/// Outcome of a command: the report and whether it records a verified failure.
struct Outcome {
    report: Value,
    failed: bool,
}

fn ok(report: Value) -> Result<Outcome, String> {
    Ok(Outcome { report, failed: false })
}

fn verdict(report: Value, passed: bool) -> Result<Outcome, String> {
    Ok(Outcome { report, failed: !passed })
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (jobs, out) = match &cli.command {
        Command::Suite(a) => (a.jobs, a.out.clone()),
        Command::Catalog(c)
        | Command::VerifyBorel(c)
        | Command::VerifySl2(c)
        | Command::Extend(c)
        | Command::Invariants(c)
        | Command::Classify(c)
        | Command::Decompose(c)
        | Command::Equiv(c) => (c.jobs, c.out.clone()),
    };
    if let Some(n) = jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let (name, result) = match cli.command {
        Command::Catalog(c) => ("catalog", catalog(&c)),
        Command::VerifyBorel(c) => ("verify-borel", verify_borel(&c)),
        Command::VerifySl2(c) => ("verify-sl2", verify_sl2(&c)),
        Command::Extend(c) => ("extend", extend(&c)),
        Command::Invariants(c) => ("invariants", invariants(&c)),
        Command::Classify(c) => ("classify", classify(&c)),
        Command::Decompose(c) => ("decompose", decompose(&c)),
        Command::Equiv(c) => ("equiv", equiv(&c)),
        Command::Suite(a) => ("suite", suite(&a)),
    };
    match result {
        Ok(Outcome { report, failed }) => {
            let mut doc = json!({ "schema": SCHEMA, "command": name });
            if let (Value::Object(d), Value::Object(r)) = (&mut doc, report) {
                d.extend(r);
            }
            let text = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
            match out {
                Some(path) => {
                    if let Err(e) = fs::write(&path, text + "\n") {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                }
                None => println!("{text}"),
            }
            ExitCode::from(if failed { 1 } else { 0 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn spec_of(c: &Common) -> Result<FormSpec, String> {
    let form = c.form.as_deref().ok_or("--form is required")?;
    let p = c.p.ok_or("--p is required")?;
    FormSpec::parse(form, p, &c.params).map_err(err)
}

fn check_config(c: &Common, p: u32) -> Result<CheckConfig, String> {
    let mut cfg =
        CheckConfig { mode: c.mode, seed: c.seed, enum_budget: c.budget.unwrap_or(DEFAULT_ENUM_BUDGET), ..Default::default() };
    if let Some(m) = c.m {
        cfg.fields = vec![FieldCtx::new(p, m).map_err(err)?, FieldCtx::new(p, 2 * m).map_err(err)?];
    }
    Ok(cfg)
}

fn analysis_ctx(c: &Common, p: u32) -> Result<FieldCtx, String> {
    match c.m {
        Some(m) => FieldCtx::new(p, m).map_err(err),
        None => analyze::analysis_field(p).map_err(err),
    }
}

fn poly_strings(m: &PolyMat) -> Value {
    json!(m.to_strings())
}

/// Entries as residue sequences (coefficients over the prime field, low degree first).
fn residues(ctx: &FieldCtx, m: &FqMat) -> Value {
    let rows: Vec<Vec<Vec<u32>>> = (0..m.rows()).map(|i| (0..m.cols()).map(|j| ctx.coeffs(*m.get(i, j))).collect()).collect();
    json!(rows)
}

fn family_json(spec: &FormSpec) -> Value {
    json!({ "form": spec.family.to_string(), "p": spec.p, "params": spec.params.to_string() })
}

fn closed_json(rep: &ClosedFormRep) -> Value {
    json!({ "entries": poly_strings(&rep.entries), "twist": rep.twist })
}

fn datum_json(d: &GenDatum) -> Value {
    json!({
        "phi_plus": poly_strings(&d.phi_plus),
        "weights": d.weights,
        "phi_minus": d.phi_minus.as_ref().map(poly_strings),
    })
}

fn catalog(c: &Common) -> Result<Outcome, String> {
    if c.form.is_some() {
        let spec = spec_of(c)?;
        let body = match spec.family {
            Family::Borel(_) => datum_json(&build_borel_pair(&spec).map_err(err)?),
            _ => closed_json(&build_sigma(&spec).map_err(err)?),
        };
        return ok(json!({ "spec": family_json(&spec), "entry": body }));
    }
    let primes: Vec<u32> = match c.p {
        Some(p) => vec![p],
        None => vec![2, 3, 5, 7],
    };
    let mut families: Vec<Family> = Vec::new();
    families.extend(Label::ALL.iter().map(|&l| Family::Borel(l)));
    families.extend(sl2kit::catalog::EXTENDABLE.iter().map(|&l| Family::Star(l)));
    families.extend(SHARP_LABELS.iter().map(|&l| Family::Sharp(l)));
    families.extend(PLUS_LABELS.iter().map(|&l| Family::Plus(l)));
    families.extend(Small::ALL.iter().map(|&s| Family::Small(s)));
    let mut rows = Vec::new();
    for fam in families {
        for &p in &primes {
            let specs = instances(fam, p, c.max_e);
            if specs.is_empty() {
                continue;
            }
            let params: Vec<String> = specs.iter().map(|s| s.params.to_string()).collect();
            rows.push(json!({ "form": fam.to_string(), "p": p, "param_names": param_names(fam), "instances": params }));
        }
    }
    ok(json!({ "max_e": c.max_e, "families": rows }))
}

fn verify_borel(c: &Common) -> Result<Outcome, String> {
    let spec = spec_of(c)?;
    if !matches!(spec.family, Family::Borel(_)) {
        return Err(format!("verify-borel needs a borel form, got {}", spec.family));
    }
    let d = build_borel_pair(&spec).map_err(err)?;
    let report = check_borel_pair(&d, &check_config(c, spec.p)?).map_err(err)?;
    let passed = report.passed;
    let mut v = serde_json::to_value(&report).map_err(err)?;
    v["spec"] = family_json(&spec);
    verdict(v, passed)
}

/// Extends a Borel pair when possible; closed forms pass through.
enum Built {
    Closed(ClosedFormRep),
    Datum(GenDatum),
}

impl Built {
    fn rep(&self) -> RepRef<'_> {
        match self {
            Built::Closed(r) => RepRef::Closed(r),
            Built::Datum(d) => RepRef::Datum(d),
        }
    }
}

fn build(spec: &FormSpec) -> Result<Built, String> {
    match spec.family {
        Family::Borel(_) => {
            let d = build_borel_pair(spec).map_err(err)?;
            let sol = solve_phi_minus(&d, &ExtendConfig::default()).map_err(err)?;
            match sol.phi_minus {
                Some(pm) => Ok(Built::Datum(d.with_phi_minus(pm).map_err(err)?)),
                None => Err(format!("{spec} does not extend to SL(2); see `extend`")),
            }
        }
        _ => build_sigma(spec).map(Built::Closed).map_err(err),
    }
}

fn verify_sl2(c: &Common) -> Result<Outcome, String> {
    let spec = spec_of(c)?;
    let built = build(&spec)?;
    let report = check_sl2_homomorphism(built.rep(), &check_config(c, spec.p)?).map_err(err)?;
    let passed = report.passed;
    let mut v = serde_json::to_value(&report).map_err(err)?;
    v["spec"] = family_json(&spec);
    verdict(v, passed)
}

fn extend(c: &Common) -> Result<Outcome, String> {
    if c.mode == Mode::Symbolic {
        return Err("extend checks a relation with rational arguments; use --mode exhaustive or auto".into());
    }
    let spec = spec_of(c)?;
    if !matches!(spec.family, Family::Borel(_)) {
        return Err(format!("extend needs a borel form, got {}", spec.family));
    }
    let d = build_borel_pair(&spec).map_err(err)?;
    let check = check_config(c, spec.p)?;
    let cfg = ExtendConfig { degree_bound: c.degree_bound, check: check.clone(), ..Default::default() };
    let sol = solve_phi_minus(&d, &cfg).map_err(err)?;
    let mut v = json!({
        "spec": family_json(&spec),
        "status": sol.status,
        "degree_bound": sol.degree_bound,
        "fields": sol.fields,
        "notes": sol.notes,
    });
    if let Some(cert) = &sol.certificate {
        v["certificate"] = serde_json::to_value(cert).map_err(err)?;
    }
    if let Some(checks) = &sol.checks {
        v["checks"] = serde_json::to_value(checks).map_err(err)?;
    }
    let mut passed = sol.status == ExtensionStatus::Unique && sol.checks.as_ref().is_none_or(|r| r.passed);
    if let Some(pm) = &sol.phi_minus {
        v["phi_minus"] = poly_strings(pm);
        let full = d.with_phi_minus(pm.clone()).map_err(err)?;
        let sigma = assemble_sigma(&full, &check).map_err(err)?;
        passed &= sigma.report.passed;
        v["sigma"] = closed_json(&sigma.rep);
        v["sigma_check"] = serde_json::to_value(&sigma.report).map_err(err)?;
        if let Some(star) = star_of_borel(&spec) {
            v["matches_catalog"] = json!(build_sigma(&star).map(|r| r.entries == sigma.rep.entries).unwrap_or(false));
        }
    }
    verdict(v, passed)
}

fn images(c: &Common, spec: &FormSpec, ctx: &FieldCtx) -> Result<GenImages, String> {
    let built = build(spec)?;
    let g = GenImages::from_rep(built.rep(), ctx).map_err(err)?;
    if c.conjugate {
        let pm = random_conjugator(ctx, g.n(), c.seed);
        return g.conjugate(&pm).map_err(err);
    }
    Ok(g)
}

fn invariants(c: &Common) -> Result<Outcome, String> {
    let spec = spec_of(c)?;
    let ctx = analysis_ctx(c, spec.p)?;
    let g = images(c, &spec, &ctx)?;
    let sig = analyze::signature(&g).map_err(err)?;
    ok(json!({
        "spec": family_json(&spec),
        "q": ctx.q(),
        "fixed_dims": sig.d_sigma,
        "signature": sig,
    }))
}

fn classify(c: &Common) -> Result<Outcome, String> {
    let spec = spec_of(c)?;
    let ctx = analysis_ctx(c, spec.p)?;
    let g = images(c, &spec, &ctx)?;
    let sig = analyze::signature(&g).map_err(err)?;
    let class = analyze::classify(&g).map_err(err)?;
    ok(json!({ "spec": family_json(&spec), "q": ctx.q(), "signature": sig, "class": family_json(&class) }))
}

fn decompose(c: &Common) -> Result<Outcome, String> {
    let spec = spec_of(c)?;
    let ctx = analysis_ctx(c, spec.p)?;
    let g = images(c, &spec, &ctx)?;
    let rep = analyze::decompose(&g).map_err(err)?;
    let flat: Vec<String> = rep.summands.iter().flat_map(|(s, k)| std::iter::repeat_n(s.family.to_string(), *k)).collect();
    let detailed: Vec<Value> = rep.summands.iter().map(|(s, k)| json!({ "class": family_json(s), "multiplicity": k })).collect();
    ok(json!({
        "spec": family_json(&spec),
        "q": ctx.q(),
        "summands": flat,
        "classes": detailed,
        "blocks": rep.blocks,
        "conjugator": residues(&ctx, &rep.conjugator),
    }))
}

fn equiv(c: &Common) -> Result<Outcome, String> {
    let a = spec_of(c)?;
    let other = c.with.as_deref().ok_or("--with is required")?;
    let b = FormSpec::parse(other, a.p, &c.with_params).map_err(err)?;
    let ctx = analysis_ctx(c, a.p)?;
    let ga = images(&Common { conjugate: false, ..c.clone() }, &a, &ctx)?;
    let gb = images(c, &b, &ctx)?;
    let budget = c.budget.unwrap_or(SEARCH_BUDGET);
    let result = check_equivalence(&ga, &gb, c.seed, budget).map_err(err)?;
    let mut v = json!({ "spec": family_json(&a), "with": family_json(&b), "q": ctx.q() });
    let equivalent = match &result {
        Equivalence::Equivalent(x) => {
            v["equivalent"] = json!(true);
            v["conjugator"] = residues(&ctx, x);
            true
        }
        Equivalence::NotEquivalent(why) => {
            v["equivalent"] = json!(false);
            v["evidence"] = json!(match why {
                NonEquivalence::ZeroIntertwiners => "exact: no nonzero intertwiners",
                NonEquivalence::Exhausted => "search exhausted without an invertible intertwiner",
            });
            false
        }
    };
    verdict(v, equivalent)
}

fn suite(a: &SuiteArgs) -> Result<Outcome, String> {
    for &p in &a.primes {
        default_point_fields(p).map_err(err)?;
    }
    if let Some(bad) = a.criteria.iter().find(|&&k| !(1..=8).contains(&k)) {
        return Err(format!("no criterion {bad}; criteria are numbered 1 to 8"));
    }
    let cfg =
        SuiteConfig { primes: a.primes.clone(), max_e: a.max_e, seed: a.seed, property_cases: a.cases, ..Default::default() };
    let reports = run_criteria(&a.criteria, &cfg);
    for r in &reports {
        eprintln!("criterion {}: {}  {} [{}]", r.id, if r.passed { "PASS" } else { "FAIL" }, r.title, r.evidence);
    }
    let passed = reports.iter().all(|r| r.passed);
    verdict(json!({ "passed": passed, "primes": a.primes, "max_e": a.max_e, "criteria": reports }), passed)
}
