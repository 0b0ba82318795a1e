//! Closed catalogs of Borel pairs, SL2 representations on `k^4`, explicit conjugators
//! and the small-dimension families.
//!
//! Closed forms are stored as templates in the letters `A..H`; `A..D` stand for
//! `a..d` raised to the first Frobenius power and `E..H` for the second one.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldCtx;
use crate::linalg::{FqMat, LinalgError, PolyMat, PolyRing};
use crate::symbolic::{vars, MPoly, SymbolicError, Vars};

/// Largest Frobenius exponent accepted by the builders.
pub const MAX_E: i64 = 3;
/// Largest free weight parameter accepted by the builders.
pub const MAX_D: i64 = 64;
/// Largest weight (and hence entry degree) the builders will produce.
pub const WEIGHT_LIMIT: i64 = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CatalogError {
    #[error("unknown form `{0}`")]
    UnknownForm(String),
    #[error("bad parameters for {form}: {reason}")]
    BadParams { form: String, reason: String },
    #[error("{form} requires {requirement}, got p = {p}")]
    BadCharacteristic { form: String, requirement: String, p: u32 },
    #[error("no conjugator recorded for `{0}`")]
    UnknownConjugator(String),
    #[error("malformed generator datum: {0}")]
    BadDatum(String),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

macro_rules! labels {
    ($($name:ident),*) => {
        /// Labels of the 26 Borel forms.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum Label { $($name),* }

        impl Label {
            pub const ALL: [Label; 26] = [$(Label::$name),*];

            pub fn roman(self) -> &'static str {
                match self { $(Label::$name => stringify!($name)),* }
            }
        }

        impl FromStr for Label {
            type Err = CatalogError;
            fn from_str(s: &str) -> Result<Self, CatalogError> {
                match s {
                    $(stringify!($name) => Ok(Label::$name),)*
                    _ => Err(CatalogError::UnknownForm(s.to_string())),
                }
            }
        }
    };
}

labels!(
    I, II, III, IV, V, VI, VII, VIII, IX, X, XI, XII, XIII, XIV, XV, XVI, XVII, XVIII, XIX, XX, XXI, XXII, XXIII, XXIV, XXV, XXVI
);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.roman())
    }
}

use Label as L;

/// Borel forms that extend to SL(2) under suitable parameter constraints.
pub const EXTENDABLE: [Label; 13] =
    [L::I, L::II, L::IV, L::V, L::VII, L::IX, L::XI, L::XV, L::XIX, L::XXI, L::XXII, L::XXIV, L::XXVI];
/// Labels of the representative forms on `k^4`.
pub const SHARP_LABELS: [Label; 11] = [L::I, L::II, L::IV, L::V, L::VII, L::IX, L::XI, L::XV, L::XIX, L::XXIV, L::XXVI];
/// Labels with an untwisted form; the sharp labels plus XXI.
pub const PLUS_LABELS: [Label; 12] = [L::I, L::II, L::IV, L::V, L::VII, L::IX, L::XI, L::XV, L::XIX, L::XXI, L::XXIV, L::XXVI];

/// Families of dimension at most three.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Small {
    N1,
    N2_1,
    N2_2,
    N3_1a,
    N3_1b,
    N3_1c,
    N3_1d,
    N3_2a,
    N3_2b,
    N3_2c,
}

impl Small {
    pub const ALL: [Small; 10] = [
        Small::N1,
        Small::N2_1,
        Small::N2_2,
        Small::N3_1a,
        Small::N3_1b,
        Small::N3_1c,
        Small::N3_1d,
        Small::N3_2a,
        Small::N3_2b,
        Small::N3_2c,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Small::N1 => "1",
            Small::N2_1 => "2.1",
            Small::N2_2 => "2.2",
            Small::N3_1a => "3.1a",
            Small::N3_1b => "3.1b",
            Small::N3_1c => "3.1c",
            Small::N3_1d => "3.1d",
            Small::N3_2a => "3.2a",
            Small::N3_2b => "3.2b",
            Small::N3_2c => "3.2c",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Small::N1 => 1,
            Small::N2_1 | Small::N2_2 => 2,
            _ => 3,
        }
    }

    pub fn has_twist(self) -> bool {
        matches!(self, Small::N2_1 | Small::N3_1a | Small::N3_1b | Small::N3_1c | Small::N3_2a | Small::N3_2b)
    }

    /// Whether the family is indecomposable.
    pub fn is_indecomposable(self) -> bool {
        matches!(self, Small::N1 | Small::N2_1 | Small::N3_1a | Small::N3_1b | Small::N3_2a)
    }

    fn char_req(self) -> CharReq {
        match self {
            Small::N3_1a | Small::N3_1b | Small::N3_1c | Small::N3_1d => CharReq::Eq(2),
            Small::N3_2a | Small::N3_2b | Small::N3_2c => CharReq::AtLeast(3),
            _ => CharReq::Any,
        }
    }
}

/// A tagged catalog family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Borel(Label),
    Star(Label),
    Sharp(Label),
    Plus(Label),
    Small(Small),
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Borel(l) => write!(f, "borel:{l}"),
            Family::Star(l) => write!(f, "star:{l}"),
            Family::Sharp(l) => write!(f, "sharp:{l}"),
            Family::Plus(l) => write!(f, "plus:{l}"),
            Family::Small(s) => write!(f, "small:{}", s.code()),
        }
    }
}

impl FromStr for Family {
    type Err = CatalogError;
    fn from_str(s: &str) -> Result<Self, CatalogError> {
        let unknown = || CatalogError::UnknownForm(s.to_string());
        let (kind, name) = s.split_once(':').ok_or_else(unknown)?;
        let fam = match kind {
            "borel" => Family::Borel(name.parse()?),
            "star" => Family::Star(name.parse()?),
            "sharp" => Family::Sharp(name.parse()?),
            "plus" => Family::Plus(name.parse()?),
            "small" => Family::Small(*Small::ALL.iter().find(|x| x.code() == name).ok_or_else(unknown)?),
            _ => return Err(unknown()),
        };
        match fam {
            Family::Star(l) if !EXTENDABLE.contains(&l) => Err(unknown()),
            Family::Sharp(l) if !SHARP_LABELS.contains(&l) => Err(unknown()),
            Family::Plus(l) if !PLUS_LABELS.contains(&l) => Err(unknown()),
            f => Ok(f),
        }
    }
}

/// Named integer parameters (`e1`, `e2`, `e3`, `e4`, `f`, `d1`, `d2`).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Params(pub BTreeMap<String, i64>);

impl Params {
    pub fn new() -> Self {
        Params::default()
    }

    pub fn with(mut self, k: &str, v: i64) -> Self {
        self.0.insert(k.to_string(), v);
        self
    }

    pub fn get(&self, k: &str) -> Option<i64> {
        self.0.get(k).copied()
    }

    pub fn parse(s: &str) -> Result<Self, CatalogError> {
        let mut out = Params::new();
        for part in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let bad = || CatalogError::BadParams { form: "?".into(), reason: format!("cannot read `{part}`") };
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            let v: i64 = v.trim().parse().map_err(|_| bad())?;
            out.0.insert(k.trim().to_string(), v);
        }
        Ok(out)
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// A catalog form with parameters, in a fixed characteristic.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FormSpec {
    pub family: Family,
    pub p: u32,
    pub params: Params,
}

impl FormSpec {
    pub fn new(family: Family, p: u32, params: Params) -> Self {
        FormSpec { family, p, params }
    }

    pub fn parse(form: &str, p: u32, params: &str) -> Result<Self, CatalogError> {
        Ok(FormSpec { family: form.parse()?, p, params: Params::parse(params)? })
    }

    pub fn param(&self, k: &str) -> Option<i64> {
        self.params.get(k)
    }

    fn bad(&self, reason: impl Into<String>) -> CatalogError {
        CatalogError::BadParams { form: self.family.to_string(), reason: reason.into() }
    }
}

impl fmt::Display for FormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.params.0.is_empty() {
            write!(f, "{} (p={})", self.family, self.p)
        } else {
            write!(f, "{} (p={}; {})", self.family, self.p, self.params)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CharReq {
    Any,
    Eq(u32),
    AtLeast(u32),
}

impl CharReq {
    fn check(self, family: Family, p: u32) -> Result<(), CatalogError> {
        let (ok, text) = match self {
            CharReq::Any => (true, String::new()),
            CharReq::Eq(q) => (p == q, format!("p = {q}")),
            CharReq::AtLeast(q) => (p >= q, format!("p >= {q}")),
        };
        if ok {
            Ok(())
        } else {
            Err(CatalogError::BadCharacteristic { form: family.to_string(), requirement: text, p })
        }
    }

    fn admits(self, p: u32) -> bool {
        match self {
            CharReq::Any => true,
            CharReq::Eq(q) => p == q,
            CharReq::AtLeast(q) => p >= q,
        }
    }
}

fn borel_char(label: Label) -> CharReq {
    match label {
        L::I => CharReq::AtLeast(5),
        L::II | L::VII => CharReq::Eq(3),
        L::III | L::VIII | L::IX => CharReq::AtLeast(3),
        L::XXI => CharReq::Eq(2),
        _ => CharReq::Any,
    }
}

/// Characteristic restriction of the representation forms (star, sharp, plus).
fn sigma_char(label: Label) -> CharReq {
    match label {
        L::V | L::XI | L::XIX | L::XXI => CharReq::Eq(2),
        l => borel_char(l),
    }
}

/// Parameter names a family takes.
pub fn param_names(family: Family) -> &'static [&'static str] {
    match family {
        Family::Borel(l) => borel_params(l),
        Family::Star(l) => match l {
            L::IV => &["e1", "e2"],
            L::XV => &["e2", "e3"],
            L::XXIV => &["e2"],
            L::XXVI => &[],
            _ => &["e1"],
        },
        Family::Sharp(l) => match l {
            L::IV => &["e1", "e2"],
            L::XV => &["e2", "e3"],
            L::XXIV => &["e2"],
            L::XXVI => &[],
            _ => &["e1"],
        },
        Family::Plus(_) => &[],
        Family::Small(s) => {
            if s.has_twist() {
                &["e"]
            } else {
                &[]
            }
        }
    }
}

fn borel_params(l: Label) -> &'static [&'static str] {
    match l {
        L::I | L::II | L::III | L::VII | L::VIII | L::IX | L::XXI => &["e1"],
        L::IV | L::X | L::XVIII => &["e1", "e2"],
        L::V => &["e1", "f"],
        L::VI | L::XII | L::XX => &["e1", "d2"],
        L::XI | L::XIX => &["e1", "e3"],
        L::XIII | L::XIV => &["e1", "e3"],
        L::XV => &["e2", "e3"],
        L::XVI => &["e3", "e4"],
        L::XVII => &["e3", "d1"],
        L::XXII | L::XXIII => &["e1", "d1"],
        L::XXIV => &["e2", "d2"],
        L::XXV => &["e3", "d1"],
        L::XXVI => &["d1", "d2"],
    }
}

fn is_exponent_param(k: &str) -> bool {
    k.starts_with('e') || k == "f"
}

/// Reads and range-checks the parameters a family requires; rejects unknown names.
fn read_params(spec: &FormSpec, names: &[&'static str]) -> Result<BTreeMap<&'static str, i64>, CatalogError> {
    for k in spec.params.0.keys() {
        if !names.contains(&k.as_str()) {
            return Err(spec.bad(format!("unexpected parameter {k}")));
        }
    }
    let mut out = BTreeMap::new();
    for &k in names {
        let v = spec.param(k).ok_or_else(|| spec.bad(format!("missing parameter {k}")))?;
        if v < 0 {
            return Err(spec.bad(format!("{k} must be non-negative")));
        }
        if is_exponent_param(k) && v > MAX_E {
            return Err(spec.bad(format!("{k} = {v} exceeds the ceiling {MAX_E}")));
        }
        if !is_exponent_param(k) && v > MAX_D {
            return Err(spec.bad(format!("{k} = {v} exceeds the ceiling {MAX_D}")));
        }
        out.insert(k, v);
    }
    Ok(out)
}

fn ppow(p: u32, e: i64) -> i64 {
    (p as i64).pow(e as u32)
}

/// A nonzero entry `coef * t^deg` of a Borel unipotent image.
#[derive(Clone, Copy, Debug)]
struct BorelEntry {
    i: usize,
    j: usize,
    num: i64,
    den: i64,
    deg: i64,
}

fn ent(i: usize, j: usize, deg: i64) -> BorelEntry {
    BorelEntry { i, j, num: 1, den: 1, deg }
}

fn half(i: usize, j: usize, deg: i64) -> BorelEntry {
    BorelEntry { i, j, num: 1, den: 2, deg }
}

/// Weights `(d1, d2)` and nonzero entries of a Borel form.
fn borel_shape(spec: &FormSpec, label: Label) -> Result<((i64, i64), Vec<BorelEntry>), CatalogError> {
    let p = spec.p;
    borel_char(label).check(spec.family, p)?;
    let v = read_params(spec, borel_params(label))?;
    let g = |k: &str| v[k];
    let q = |k: &str| ppow(p, v[k]);
    let need = |cond: bool, why: &str| if cond { Ok(()) } else { Err(spec.bad(why.to_string())) };
    let (w, e) = match label {
        L::I => {
            let q1 = q("e1");
            (
                (3 * q1, q1),
                vec![
                    ent(0, 1, q1),
                    half(0, 2, 2 * q1),
                    BorelEntry { i: 0, j: 3, num: 1, den: 6, deg: 3 * q1 },
                    ent(1, 2, q1),
                    half(1, 3, 2 * q1),
                    ent(2, 3, q1),
                ],
            )
        }
        L::II => {
            let q1 = q("e1");
            ((q1 * p as i64, q1), vec![ent(0, 1, q1), half(0, 2, 2 * q1), ent(0, 3, q1 * p as i64), ent(1, 2, q1)])
        }
        L::III => {
            let q1 = q("e1");
            ((3 * q1, q1), vec![ent(0, 1, q1), half(0, 2, 2 * q1), ent(1, 2, q1)])
        }
        L::IV | L::X | L::XVIII => {
            need(g("e2") > g("e1"), "e2 > e1 required")?;
            let (q1, q2) = (q("e1"), q("e2"));
            let entries = match label {
                L::IV => vec![ent(0, 1, q1), ent(0, 2, q2), ent(0, 3, q1 + q2), ent(1, 3, q2), ent(2, 3, q1)],
                L::X => vec![ent(0, 1, q1), ent(0, 2, q2)],
                _ => vec![ent(1, 3, q2), ent(2, 3, q1)],
            };
            ((q1 + q2, q2 - q1), entries)
        }
        L::V => {
            need(g("f") > g("e1"), "f >= e1 + 1 required")?;
            let (q1, qf) = (q("e1"), q("f"));
            ((qf, qf - 2 * q1), vec![ent(0, 1, q1), ent(0, 3, qf), ent(2, 3, q1)])
        }
        L::VI | L::XII | L::XX => {
            let (q1, d2) = (q("e1"), g("d2"));
            let entries = match label {
                L::VI => vec![ent(0, 1, q1), ent(2, 3, q1)],
                L::XII => vec![ent(0, 1, q1)],
                _ => vec![ent(2, 3, q1)],
            };
            ((d2 + 2 * q1, d2), entries)
        }
        L::VII => {
            let q1 = q("e1");
            ((q1 * p as i64, q1), vec![ent(0, 3, q1 * p as i64), ent(1, 2, q1), half(1, 3, 2 * q1), ent(2, 3, q1)])
        }
        L::VIII => {
            let q1 = q("e1");
            ((3 * q1, q1), vec![ent(1, 2, q1), half(1, 3, 2 * q1), ent(2, 3, q1)])
        }
        L::IX => {
            let q1 = q("e1");
            ((2 * q1, 0), vec![ent(0, 1, q1), half(0, 3, 2 * q1), ent(1, 3, q1)])
        }
        L::XI | L::XIX => {
            need(g("e3") > g("e1"), "e3 >= e1 + 1 required")?;
            let (q1, q3) = (q("e1"), q("e3"));
            let entries = if label == L::XI { vec![ent(0, 1, q1), ent(0, 3, q3)] } else { vec![ent(0, 3, q3), ent(2, 3, q1)] };
            ((q3, q3 - 2 * q1), entries)
        }
        L::XIII | L::XIV => {
            need(g("e1") > g("e3"), "e1 > e3 required")?;
            let (q1, q3) = (q("e1"), q("e3"));
            let mut entries = vec![ent(0, 2, q1), ent(1, 2, q3)];
            if label == L::XIII {
                entries.push(ent(1, 3, q1));
            }
            ((2 * q1 - q3, q3), entries)
        }
        L::XV => {
            need(g("e2") >= g("e3"), "e2 >= e3 required")?;
            let (q2, q3) = (q("e2"), q("e3"));
            ((q2, q3), vec![ent(0, 3, q2), ent(1, 2, q3)])
        }
        L::XVI => {
            need(g("e4") > g("e3"), "e4 > e3 required")?;
            let (q3, q4) = (q("e3"), q("e4"));
            ((2 * q4 - q3, q3), vec![ent(1, 2, q3), ent(1, 3, q4)])
        }
        L::XVII => {
            let (q3, d1) = (q("e3"), g("d1"));
            need(d1 >= q3, "d1 >= p^e3 required")?;
            ((d1, q3), vec![ent(1, 2, q3)])
        }
        L::XXI => {
            let q1 = q("e1");
            ((2 * q1, 0), vec![ent(0, 2, q1), ent(0, 3, 2 * q1), ent(1, 3, q1)])
        }
        L::XXII | L::XXIII | L::XXV => {
            let e = if label == L::XXV { "e3" } else { "e1" };
            let (qe, d1) = (q(e), g("d1"));
            need(d1 >= qe && d1 <= 2 * qe, "p^e <= d1 <= 2 p^e required")?;
            let entries = match label {
                L::XXII => vec![ent(0, 2, qe), ent(1, 3, qe)],
                L::XXIII => vec![ent(0, 2, qe)],
                _ => vec![ent(1, 3, qe)],
            };
            ((d1, 2 * qe - d1), entries)
        }
        L::XXIV => {
            let (q2, d2) = (q("e2"), g("d2"));
            need(d2 <= q2, "0 <= d2 <= p^e2 required")?;
            ((q2, d2), vec![ent(0, 3, q2)])
        }
        L::XXVI => {
            let (d1, d2) = (g("d1"), g("d2"));
            need(d1 >= d2, "d1 >= d2 >= 0 required")?;
            ((d1, d2), vec![])
        }
    };
    if w.0 > WEIGHT_LIMIT {
        return Err(spec.bad(format!("weight {} exceeds the storage limit {WEIGHT_LIMIT}", w.0)));
    }
    Ok((w, e))
}

fn inv_mod(a: i64, p: u32) -> i64 {
    let p = p as i64;
    let a = a.rem_euclid(p);
    (1..p).find(|x| a * x % p == 1).expect("invertible residue")
}

pub fn t_vars() -> Vars {
    vars(&["t"])
}

pub fn s_vars() -> Vars {
    vars(&["s"])
}

pub fn sl2_vars() -> Vars {
    vars(&["a", "b", "c", "d"])
}

fn template_vars() -> Vars {
    vars(&["A", "B", "C", "D", "E", "F", "G", "H"])
}

/// Generator data of a homomorphism: `phi_plus(t)`, torus weights and optionally `phi_minus(s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GenDatum {
    pub p: u32,
    pub phi_plus: PolyMat,
    pub weights: Vec<i64>,
    pub phi_minus: Option<PolyMat>,
}

impl GenDatum {
    pub fn new(phi_plus: PolyMat, weights: Vec<i64>, phi_minus: Option<PolyMat>) -> Result<Self, CatalogError> {
        let n = phi_plus.rows();
        let p = phi_plus.ring().p;
        if !phi_plus.is_square() || weights.len() != n {
            return Err(CatalogError::BadDatum("dimension mismatch".into()));
        }
        if phi_plus.ring().vars.len() != 1 {
            return Err(CatalogError::BadDatum("phi_plus must be a matrix in one variable".into()));
        }
        if weights.iter().sum::<i64>() != 0 {
            return Err(CatalogError::BadDatum("weights must sum to zero".into()));
        }
        let unitri = |m: &PolyMat, upper: bool| {
            (0..n).all(|i| {
                (0..n).all(|j| {
                    let f = m.get(i, j);
                    if i == j {
                        f.constant_term() == 1
                    } else if (upper && i > j) || (!upper && i < j) {
                        f.is_zero()
                    } else {
                        f.constant_term() == 0
                    }
                })
            })
        };
        if !unitri(&phi_plus, true) {
            return Err(CatalogError::BadDatum("phi_plus must be upper unitriangular with phi_plus(0) = I".into()));
        }
        if let Some(m) = &phi_minus {
            if m.rows() != n || !m.is_square() || m.ring().p != p || m.ring().vars.len() != 1 {
                return Err(CatalogError::BadDatum("phi_minus shape".into()));
            }
            if !unitri(m, false) {
                return Err(CatalogError::BadDatum("phi_minus must be lower unitriangular with phi_minus(0) = I".into()));
            }
        }
        Ok(GenDatum { p, phi_plus, weights, phi_minus })
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn with_phi_minus(&self, phi_minus: PolyMat) -> Result<Self, CatalogError> {
        GenDatum::new(self.phi_plus.clone(), self.weights.clone(), Some(phi_minus))
    }

    /// Antisymmetric: non-increasing and `d_i = -d_{n+1-i}`.
    pub fn is_antisymmetric(&self) -> bool {
        let w = &self.weights;
        let n = w.len();
        w.windows(2).all(|x| x[0] >= x[1]) && (0..n).all(|i| w[i] == -w[n - 1 - i])
    }

    /// Largest `(d_i - d_j) / 2` over pairs `i < j`.
    pub fn max_half_gap(&self) -> i64 {
        let w = &self.weights;
        let mut best = 0;
        for i in 0..w.len() {
            for j in i + 1..w.len() {
                best = best.max((w[i] - w[j]).abs() / 2);
            }
        }
        best
    }

    /// Ordered partition read off the superdiagonal of `phi_plus`.
    pub fn partition(&self) -> Vec<usize> {
        partition_of(&self.phi_plus)
    }
}

/// Block sizes of consecutive indices joined by nonzero superdiagonal entries.
pub fn partition_of(m: &PolyMat) -> Vec<usize> {
    let n = m.rows();
    let mut parts = Vec::new();
    let mut cur = 1;
    for i in 0..n.saturating_sub(1) {
        if m.get(i, i + 1).is_zero() {
            parts.push(cur);
            cur = 1;
        } else {
            cur += 1;
        }
    }
    if n > 0 {
        parts.push(cur);
    }
    parts
}

/// A homomorphism `SL(2) -> SL(n)` given by polynomial entries in `a, b, c, d`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedFormRep {
    pub p: u32,
    pub entries: PolyMat,
    /// Largest Frobenius exponent involved; zero for untwisted forms.
    pub twist: u32,
}

impl ClosedFormRep {
    pub fn new(entries: PolyMat, twist: u32) -> Result<Self, CatalogError> {
        if !entries.is_square() || entries.ring().vars.as_ref() != sl2_vars().as_ref() {
            return Err(CatalogError::BadDatum("closed forms are square matrices in a, b, c, d".into()));
        }
        Ok(ClosedFormRep { p: entries.ring().p, entries: entries.sl2_reduce(), twist })
    }

    pub fn n(&self) -> usize {
        self.entries.rows()
    }

    pub fn eval(&self, ctx: &FieldCtx, m: &crate::field::Sl2) -> FqMat {
        self.entries.eval_unchecked(ctx, m)
    }

    /// Determinant of the entries, reduced modulo the determinant relation.
    pub fn det_normal_form(&self) -> MPoly {
        let r = crate::symbolic::RewriteSystem::for_vars(&sl2_vars());
        poly_det(&self.entries, &r)
    }

    /// Conjugate by a constant prime-field matrix: `P^{-1} sigma P`.
    pub fn conjugate(&self, pmat: &FqMat) -> Result<Self, CatalogError> {
        let ring = self.entries.ring().clone();
        let pinv = pmat.inverse()?.to_poly(&ring)?;
        let pp = pmat.to_poly(&ring)?;
        let m = pinv.mul(&self.entries)?.mul(&pp)?;
        Ok(ClosedFormRep { p: self.p, entries: m.sl2_reduce(), twist: self.twist })
    }

    /// `sigma o F^e`.
    pub fn frobenius(&self, e: u32) -> Result<Self, CatalogError> {
        Ok(ClosedFormRep { p: self.p, entries: self.entries.frobenius_twist(e)?.sl2_reduce(), twist: self.twist + e })
    }

    /// `A -> tau(sigma(tau A))`; on 2x2 matrices `tau` swaps `a` and `d`.
    pub fn tau_conjugate(&self) -> Result<Self, CatalogError> {
        let v = sl2_vars();
        let swapped = self.entries.monomial_map(&v, &[(3, 1), (1, 1), (2, 1), (0, 1)])?;
        Ok(ClosedFormRep { p: self.p, entries: swapped.tau()?.sl2_reduce(), twist: self.twist })
    }

    pub fn direct_sum(&self, other: &Self) -> Result<Self, CatalogError> {
        Ok(ClosedFormRep { p: self.p, entries: self.entries.direct_sum(&other.entries)?, twist: self.twist.max(other.twist) })
    }
}

fn poly_det(m: &PolyMat, rs: &crate::symbolic::RewriteSystem) -> MPoly {
    // cofactor expansion along the first row; n <= 4 in practice
    let n = m.rows();
    let ring = m.ring();
    if n == 1 {
        return m.get(0, 0).clone();
    }
    let mut acc = MPoly::zero(ring.p, &ring.vars);
    for j in 0..n {
        if m.get(0, j).is_zero() {
            continue;
        }
        let rows: Vec<usize> = (1..n).collect();
        let cols: Vec<usize> = (0..n).filter(|&c| c != j).collect();
        let minor = poly_det(&m.submatrix(&rows, &cols), rs);
        let term = rs.reduce(&(m.get(0, j) * &minor));
        acc = if j % 2 == 0 { &acc + &term } else { &acc - &term };
    }
    rs.reduce(&acc)
}

/// The Borel pair of a `borel:` form.
pub fn build_borel_pair(spec: &FormSpec) -> Result<GenDatum, CatalogError> {
    let Family::Borel(label) = spec.family else {
        return Err(CatalogError::UnknownForm(format!("{} is not a Borel form", spec.family)));
    };
    let ((d1, d2), entries) = borel_shape(spec, label)?;
    let p = spec.p;
    let tv = t_vars();
    let ring = PolyRing::new(p, &tv);
    let mut m = PolyMat::identity(&ring, 4);
    for e in entries {
        let c = e.num * inv_mod(e.den, p);
        m.set(e.i, e.j, MPoly::monomial(p, &tv, c, vec![e.deg as u32]));
    }
    GenDatum::new(m, vec![d1, d2, -d2, -d1], None)
}

/// Full Borel parameters of a `star:` form, with the extension constraints filled in.
pub fn star_borel_params(spec: &FormSpec) -> Result<FormSpec, CatalogError> {
    let Family::Star(label) = spec.family else {
        return Err(CatalogError::UnknownForm(format!("{} is not a star form", spec.family)));
    };
    sigma_char(label).check(spec.family, spec.p)?;
    let v = read_params(spec, param_names(spec.family))?;
    let mut params = Params::new();
    for (k, x) in &v {
        params = params.with(k, *x);
    }
    let q = |e: i64| ppow(spec.p, e);
    params = match label {
        L::V => params.with("f", v["e1"] + 1),
        L::XI | L::XIX => params.with("e3", v["e1"] + 1),
        L::XXII => params.with("d1", q(v["e1"])),
        L::XXIV => params.with("d2", 0),
        L::XXVI => params.with("d1", 0).with("d2", 0),
        _ => params,
    };
    let b = FormSpec::new(Family::Borel(label), spec.p, params);
    // validates ranges and inequalities
    borel_shape(&b, label)?;
    Ok(b)
}

type Template = &'static [&'static [&'static str]];

const STAR_I: Template = &[
    &["A^3", "A^2*B", "1/2*A*B^2", "1/6*B^3"],
    &["3*A^2*C", "A*(A*D+2*B*C)", "B*(A*D+1/2*B*C)", "1/2*B^2*D"],
    &["6*A*C^2", "4*C*(A*D+1/2*B*C)", "D*(A*D+2*B*C)", "B*D^2"],
    &["6*C^3", "6*C^2*D", "3*C*D^2", "D^3"],
];
const STAR_II: Template =
    &[&["A^3", "A^2*B", "1/2*A*B^2", "B^3"], &["0", "A", "B", "0"], &["0", "C", "D", "0"], &["C^3", "C^2*D", "1/2*C*D^2", "D^3"]];
const KRON: Template =
    &[&["E*A", "E*B", "F*A", "F*B"], &["E*C", "E*D", "F*C", "F*D"], &["G*A", "G*B", "H*A", "H*B"], &["G*C", "G*D", "H*C", "H*D"]];
const STAR_V: Template =
    &[&["A^2", "A*B", "0", "B^2"], &["0", "1", "0", "0"], &["A*C", "B*C", "1", "B*D"], &["C^2", "C*D", "0", "D^2"]];
const STAR_VII: Template =
    &[&["A^3", "0", "0", "B^3"], &["1/2*A^2*C", "A", "B", "1/2*B^2*D"], &["A*C^2", "C", "D", "B*D^2"], &["C^3", "0", "0", "D^3"]];
const STAR_IX: Template =
    &[&["A^2", "A*B", "0", "1/2*B^2"], &["2*A*C", "A*D+B*C", "0", "B*D"], &["0", "0", "1", "0"], &["2*C^2", "2*C*D", "0", "D^2"]];
const STAR_XI: Template =
    &[&["A^2", "A*B", "0", "B^2"], &["0", "1", "0", "0"], &["0", "0", "1", "0"], &["C^2", "C*D", "0", "D^2"]];
const STAR_XV: Template = &[&["E", "0", "0", "F"], &["0", "A", "B", "0"], &["0", "C", "D", "0"], &["G", "0", "0", "H"]];
const STAR_XIX: Template =
    &[&["A^2", "0", "0", "B^2"], &["0", "1", "0", "0"], &["A*C", "0", "1", "B*D"], &["C^2", "0", "0", "D^2"]];
const STAR_XXI: Template =
    &[&["A^2", "0", "A*B", "B^2"], &["A*C", "1", "B*C", "B*D"], &["0", "0", "1", "0"], &["C^2", "0", "C*D", "D^2"]];
const STAR_XXII: Template = &[&["A", "0", "B", "0"], &["0", "A", "0", "B"], &["C", "0", "D", "0"], &["0", "C", "0", "D"]];
const STAR_XXIV: Template = &[&["A", "0", "0", "B"], &["0", "1", "0", "0"], &["0", "0", "1", "0"], &["C", "0", "0", "D"]];
const IDENTITY4: Template = &[&["1", "0", "0", "0"], &["0", "1", "0", "0"], &["0", "0", "1", "0"], &["0", "0", "0", "1"]];

const SHARP_I: Template = &[
    &["A^3", "A^2*B", "A*B^2", "B^3"],
    &["3*A^2*C", "A*(A*D+2*B*C)", "B*(2*A*D+B*C)", "3*B^2*D"],
    &["3*A*C^2", "C*(2*A*D+B*C)", "D*(A*D+2*B*C)", "3*B*D^2"],
    &["C^3", "C^2*D", "C*D^2", "D^3"],
];
const PLUS_II: Template =
    &[&["A^3", "B^3", "A^2*B", "1/2*A*B^2"], &["C^3", "D^3", "C^2*D", "1/2*C*D^2"], &["0", "0", "A", "B"], &["0", "0", "C", "D"]];
const PLUS_V: Template =
    &[&["1", "0", "0", "0"], &["A*B", "A^2", "B^2", "0"], &["C*D", "C^2", "D^2", "0"], &["B*C", "A*C", "B*D", "1"]];
const PLUS_VII: Template =
    &[&["A", "B", "1/2*A^2*C", "1/2*B^2*D"], &["C", "D", "A*C^2", "B*D^2"], &["0", "0", "A^3", "B^3"], &["0", "0", "C^3", "D^3"]];
const SHARP_IX: Template =
    &[&["A^2", "A*B", "B^2", "0"], &["2*A*C", "A*D+B*C", "2*B*D", "0"], &["C^2", "C*D", "D^2", "0"], &["0", "0", "0", "1"]];
const PLUS_IX: Template =
    &[&["A^2", "A*B", "1/2*B^2", "0"], &["2*A*C", "A*D+B*C", "B*D", "0"], &["2*C^2", "2*C*D", "D^2", "0"], &["0", "0", "0", "1"]];
const PLUS_XI: Template =
    &[&["A^2", "B^2", "A*B", "0"], &["C^2", "D^2", "C*D", "0"], &["0", "0", "1", "0"], &["0", "0", "0", "1"]];
const BLOCK_SUM: Template = &[&["E", "F", "0", "0"], &["G", "H", "0", "0"], &["0", "0", "A", "B"], &["0", "0", "C", "D"]];
const PLUS_XIX: Template =
    &[&["A^2", "B^2", "0", "0"], &["C^2", "D^2", "0", "0"], &["A*C", "B*D", "1", "0"], &["0", "0", "0", "1"]];
const PLUS_XXI: Template =
    &[&["1", "A*C", "B*D", "B*C"], &["0", "A^2", "B^2", "A*B"], &["0", "C^2", "D^2", "C*D"], &["0", "0", "0", "1"]];
const PLUS_XXIV: Template = &[&["A", "B", "0", "0"], &["C", "D", "0", "0"], &["0", "0", "1", "0"], &["0", "0", "0", "1"]];

const N1: Template = &[&["1"]];
const N2_1: Template = &[&["A", "B"], &["C", "D"]];
const N2_2: Template = &[&["1", "0"], &["0", "1"]];
const N3_1A: Template = &[&["A^2", "B^2", "0"], &["C^2", "D^2", "0"], &["A*C", "B*D", "1"]];
const N3_1B: Template = &[&["A^2", "B^2", "A*B"], &["C^2", "D^2", "C*D"], &["0", "0", "1"]];
const N3_C: Template = &[&["A", "B", "0"], &["C", "D", "0"], &["0", "0", "1"]];
const N3_D: Template = &[&["1", "0", "0"], &["0", "1", "0"], &["0", "0", "1"]];
const N3_2A: Template = &[&["A^2", "A*B", "B^2"], &["2*A*C", "A*D+B*C", "2*B*D"], &["C^2", "C*D", "D^2"]];

fn instantiate(p: u32, t: Template, k1: u32, k2: u32, twist: u32) -> Result<ClosedFormRep, CatalogError> {
    let ring = PolyRing::new(p, &template_vars());
    let m = PolyMat::parse(&ring, t)?;
    let map = [(0, k1), (1, k1), (2, k1), (3, k1), (0, k2), (1, k2), (2, k2), (3, k2)];
    let sub = m.monomial_map(&sl2_vars(), &map)?;
    ClosedFormRep::new(sub, twist)
}

fn star_template(l: Label) -> Template {
    match l {
        L::I => STAR_I,
        L::II => STAR_II,
        L::IV => KRON,
        L::V => STAR_V,
        L::VII => STAR_VII,
        L::IX => STAR_IX,
        L::XI => STAR_XI,
        L::XV => STAR_XV,
        L::XIX => STAR_XIX,
        L::XXI => STAR_XXI,
        L::XXII => STAR_XXII,
        L::XXIV => STAR_XXIV,
        _ => IDENTITY4,
    }
}

fn plus_template(l: Label) -> Template {
    match l {
        L::I => STAR_I,
        L::II => PLUS_II,
        L::IV => KRON,
        L::V => PLUS_V,
        L::VII => PLUS_VII,
        L::IX => PLUS_IX,
        L::XI => PLUS_XI,
        L::XV => BLOCK_SUM,
        L::XIX => PLUS_XIX,
        L::XXI => PLUS_XXI,
        L::XXIV => PLUS_XXIV,
        _ => IDENTITY4,
    }
}

fn sharp_template(l: Label) -> Template {
    match l {
        L::I => SHARP_I,
        L::IX => SHARP_IX,
        l => plus_template(l),
    }
}

/// Frobenius exponents `(first, second)` used to instantiate a form's template.
fn template_exponents(spec: &FormSpec, v: &BTreeMap<&'static str, i64>) -> (i64, i64) {
    let get = |k: &str| v.get(k).copied().unwrap_or(0);
    match spec.family {
        Family::Star(L::IV) | Family::Sharp(L::IV) => (get("e1"), get("e2")),
        Family::Star(L::XV) | Family::Sharp(L::XV) => (get("e3"), get("e2")),
        Family::Star(L::XXIV) | Family::Sharp(L::XXIV) => (get("e2"), 0),
        Family::Small(_) => (get("e"), 0),
        _ => (get("e1"), 0),
    }
}

/// The closed form of a `star:`, `sharp:`, `plus:` or `small:` form.
pub fn build_sigma(spec: &FormSpec) -> Result<ClosedFormRep, CatalogError> {
    let p = spec.p;
    let (template, req) = match spec.family {
        Family::Borel(_) => return Err(CatalogError::UnknownForm(format!("{} is a Borel form", spec.family))),
        Family::Star(l) => {
            star_borel_params(spec)?;
            (star_template(l), sigma_char(l))
        }
        Family::Sharp(l) => (sharp_template(l), sigma_char(l)),
        Family::Plus(l) => (plus_template(l), sigma_char(l)),
        Family::Small(s) => (
            match s {
                Small::N1 => N1,
                Small::N2_1 => N2_1,
                Small::N2_2 => N2_2,
                Small::N3_1a => N3_1A,
                Small::N3_1b => N3_1B,
                Small::N3_1c | Small::N3_2b => N3_C,
                Small::N3_1d | Small::N3_2c => N3_D,
                Small::N3_2a => N3_2A,
            },
            s.char_req(),
        ),
    };
    req.check(spec.family, p)?;
    let v = read_params(spec, param_names(spec.family))?;
    if let Family::Sharp(L::IV) = spec.family {
        if v["e2"] <= v["e1"] {
            return Err(spec.bad("e2 > e1 required"));
        }
    }
    if let Family::Sharp(L::XV) = spec.family {
        if v["e2"] < v["e3"] {
            return Err(spec.bad("e2 >= e3 required"));
        }
    }
    let (e_first, e_second) = template_exponents(spec, &v);
    // the largest entry degree is at most 3 p^e
    if 3 * ppow(p, e_first.max(e_second)) > WEIGHT_LIMIT {
        return Err(spec.bad("entry degrees exceed the storage limit"));
    }
    let twist = e_first.max(e_second) as u32;
    instantiate(p, template, ppow(p, e_first) as u32, ppow(p, e_second) as u32, twist)
}

/// Torus weights of a closed form, read from the image of `diag(a, 1/a)`.
pub fn torus_weights(rep: &ClosedFormRep) -> Result<Vec<i64>, CatalogError> {
    let n = rep.n();
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..n {
            let f = rep.entries.get(i, j);
            let torus_part: Vec<_> = f.terms().filter(|(e, _)| e[1] == 0 && e[2] == 0).collect();
            if i != j && !torus_part.is_empty() {
                return Err(CatalogError::BadDatum("torus image is not diagonal".into()));
            }
            if i == j {
                if torus_part.len() != 1 {
                    return Err(CatalogError::BadDatum("torus entry is not a monomial".into()));
                }
                let e = torus_part[0].0;
                w.push(e[0] as i64 - e[3] as i64);
            }
        }
    }
    Ok(w)
}

/// Identifiers of the recorded conjugating matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Conjugator {
    /// `Inn_P o star = sharp`.
    StarToSharp(Label),
    /// `Inn_P o star = plus o F^e`.
    StarToPlus(Label),
    /// `Inn_P o plus:XXI = plus:V`.
    PlusXxiToPlusV,
    /// `Inn_P o star:XXI = star:V`, with `P = P2 P1 P2` and `P2 = P_{3,4} P_{1,2}`.
    StarXxiToStarV,
    /// `Inn_P o star:XXII = star:XV` with `e2 = e3 = e1`.
    StarXxiiToStarXv,
    /// `Inn_Q o tau(sharp:XV)^tau = sharp:XV`.
    SharpXvTauSymmetry,
}

impl Conjugator {
    pub fn all() -> Vec<Conjugator> {
        let mut v: Vec<Conjugator> = SHARP_LABELS.iter().map(|&l| Conjugator::StarToSharp(l)).collect();
        v.extend(STAR_TO_PLUS.iter().map(|&l| Conjugator::StarToPlus(l)));
        v.extend([
            Conjugator::PlusXxiToPlusV,
            Conjugator::StarXxiToStarV,
            Conjugator::StarXxiiToStarXv,
            Conjugator::SharpXvTauSymmetry,
        ]);
        v
    }

    pub fn name(&self) -> String {
        match self {
            Conjugator::StarToSharp(l) => format!("star-to-sharp:{l}"),
            Conjugator::StarToPlus(l) => format!("star-to-plus:{l}"),
            Conjugator::PlusXxiToPlusV => "plus-xxi-to-plus-v".into(),
            Conjugator::StarXxiToStarV => "star-xxi-to-star-v".into(),
            Conjugator::StarXxiiToStarXv => "star-xxii-to-star-xv".into(),
            Conjugator::SharpXvTauSymmetry => "sharp-xv-tau-symmetry".into(),
        }
    }
}

impl FromStr for Conjugator {
    type Err = CatalogError;
    fn from_str(s: &str) -> Result<Self, CatalogError> {
        Conjugator::all().into_iter().find(|c| c.name() == s).ok_or_else(|| CatalogError::UnknownConjugator(s.to_string()))
    }
}

/// Labels with a single-Frobenius factorization through the untwisted form.
pub const STAR_TO_PLUS: [Label; 9] = [L::I, L::II, L::V, L::VII, L::IX, L::XI, L::XIX, L::XXI, L::XXIV];

fn swaps(ctx: &FieldCtx, pairs: &[(usize, usize)]) -> FqMat {
    pairs.iter().fold(FqMat::identity(ctx, 4), |acc, &(l, m)| acc.mul(&FqMat::swap(ctx, 4, l, m)).expect("4x4"))
}

/// The conjugating matrix over `F_p`.
pub fn conjugator_for(id: Conjugator, p: u32) -> Result<FqMat, CatalogError> {
    let ctx = FieldCtx::prime(p).map_err(|e| CatalogError::BadParams { form: id.name(), reason: e.to_string() })?;
    let unknown = || CatalogError::UnknownConjugator(id.name());
    let diag = |v: [i64; 4]| FqMat::diag(&ctx, &v.map(|x| ctx.from_int(x)));
    let m = match id {
        Conjugator::StarToSharp(l) => match l {
            L::I => diag([1, 1, 2, 6]),
            L::II | L::XI | L::XV | L::XXIV => swaps(&ctx, &[(3, 4), (2, 3)]),
            L::IV | L::XXVI => FqMat::identity(&ctx, 4),
            L::V => swaps(&ctx, &[(3, 4), (1, 2)]),
            L::VII => swaps(&ctx, &[(1, 2), (2, 3)]),
            L::IX => swaps(&ctx, &[(3, 4)]).mul(&diag([1, 1, 2, 1]))?,
            L::XIX => swaps(&ctx, &[(2, 3), (3, 4), (2, 3)]),
            _ => return Err(unknown()),
        },
        Conjugator::StarToPlus(l) => match l {
            L::I => FqMat::identity(&ctx, 4),
            L::II | L::XI | L::XXIV => swaps(&ctx, &[(3, 4), (2, 3)]),
            L::V | L::XXI => swaps(&ctx, &[(3, 4), (1, 2)]),
            L::VII => swaps(&ctx, &[(1, 2), (2, 3)]),
            L::IX => swaps(&ctx, &[(3, 4)]),
            L::XIX => swaps(&ctx, &[(2, 3), (3, 4), (2, 3)]),
            _ => return Err(unknown()),
        },
        Conjugator::PlusXxiToPlusV => p1(&ctx),
        Conjugator::StarXxiToStarV => {
            let p2 = swaps(&ctx, &[(3, 4), (1, 2)]);
            p2.mul(&p1(&ctx))?.mul(&p2)?
        }
        Conjugator::StarXxiiToStarXv => swaps(&ctx, &[(3, 4)]),
        Conjugator::SharpXvTauSymmetry => FqMat::from_ints(&ctx, 4, 4, &[0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 1, 0, 0]),
    };
    Ok(m)
}

fn p1(ctx: &FieldCtx) -> FqMat {
    FqMat::from_ints(ctx, 4, 4, &[1, 0, 0, 1, 0, 1, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0])
}

/// Both sides of a conjugator identity at given parameters: `(Inn_P o lhs, rhs)`.
pub fn conjugator_identity(id: Conjugator, p: u32, params: &Params) -> Result<(ClosedFormRep, ClosedFormRep), CatalogError> {
    let pm = conjugator_for(id, p)?;
    let e_of = |k: &str| params.get(k).unwrap_or(0);
    let (lhs, rhs) = match id {
        Conjugator::StarToSharp(l) => (
            build_sigma(&FormSpec::new(Family::Star(l), p, params.clone()))?,
            build_sigma(&FormSpec::new(Family::Sharp(l), p, params.clone()))?,
        ),
        Conjugator::StarToPlus(l) => {
            let e = if l == L::XXIV { e_of("e2") } else { e_of("e1") };
            (
                build_sigma(&FormSpec::new(Family::Star(l), p, params.clone()))?,
                build_sigma(&FormSpec::new(Family::Plus(l), p, Params::new()))?.frobenius(e as u32)?,
            )
        }
        Conjugator::PlusXxiToPlusV => (
            build_sigma(&FormSpec::new(Family::Plus(L::XXI), p, Params::new()))?,
            build_sigma(&FormSpec::new(Family::Plus(L::V), p, Params::new()))?,
        ),
        Conjugator::StarXxiToStarV => (
            build_sigma(&FormSpec::new(Family::Star(L::XXI), p, params.clone()))?,
            build_sigma(&FormSpec::new(Family::Star(L::V), p, params.clone()))?,
        ),
        Conjugator::StarXxiiToStarXv => {
            let e = e_of("e1");
            (
                build_sigma(&FormSpec::new(Family::Star(L::XXII), p, params.clone()))?,
                build_sigma(&FormSpec::new(Family::Star(L::XV), p, Params::new().with("e2", e).with("e3", e)))?,
            )
        }
        Conjugator::SharpXvTauSymmetry => {
            let s = build_sigma(&FormSpec::new(Family::Sharp(L::XV), p, params.clone()))?;
            (s.tau_conjugate()?, s)
        }
    };
    Ok((lhs.conjugate(&pm)?, rhs))
}

/// Parameter sets of a conjugator identity with every exponent at most `max_e`.
pub fn conjugator_instances(id: Conjugator, p: u32, max_e: i64) -> Vec<Params> {
    let star = |l: Label| instances(Family::Star(l), p, max_e);
    match id {
        Conjugator::StarToSharp(l) | Conjugator::StarToPlus(l) => star(l).into_iter().map(|s| s.params).collect(),
        Conjugator::PlusXxiToPlusV => {
            if p == 2 {
                vec![Params::new()]
            } else {
                vec![]
            }
        }
        Conjugator::StarXxiToStarV => star(L::XXI).into_iter().map(|s| s.params).collect(),
        Conjugator::StarXxiiToStarXv => star(L::XXII).into_iter().map(|s| s.params).collect(),
        Conjugator::SharpXvTauSymmetry => instances(Family::Sharp(L::XV), p, max_e).into_iter().map(|s| s.params).collect(),
    }
}

fn exp_grid(names: &[&str], max_e: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in names {
        out = out.into_iter().flat_map(|v| (0..=max_e).map(move |x| [v.clone(), vec![x]].concat())).collect();
    }
    out
}

/// All admissible instances of a family with exponent parameters at most `max_e`.
///
/// Free weight parameters are taken at their smallest and largest legal values
/// (unbounded ones are capped at [`MAX_D`]).
pub fn instances(family: Family, p: u32, max_e: i64) -> Vec<FormSpec> {
    let names = param_names(family);
    let exp_names: Vec<&str> = names.iter().copied().filter(|k| is_exponent_param(k)).collect();
    let d_names: Vec<&str> = names.iter().copied().filter(|k| !is_exponent_param(k)).collect();
    let mut out = Vec::new();
    for ev in exp_grid(&exp_names, max_e) {
        let mut base = Params::new();
        for (k, x) in exp_names.iter().zip(&ev) {
            base = base.with(k, *x);
        }
        let candidates: Vec<Params> = if d_names.is_empty() {
            vec![base.clone()]
        } else {
            d_choices(family, p, &base)
                .into_iter()
                .map(|ds| {
                    let mut pr = base.clone();
                    for (k, x) in d_names.iter().zip(ds) {
                        pr = pr.with(k, x);
                    }
                    pr
                })
                .collect()
        };
        for pr in candidates {
            let spec = FormSpec::new(family, p, pr);
            let ok = match family {
                Family::Borel(_) => build_borel_pair(&spec).is_ok(),
                Family::Star(_) => star_borel_params(&spec).is_ok(),
                _ => build_sigma(&spec).is_ok(),
            };
            if ok && !out.contains(&spec) {
                out.push(spec);
            }
        }
    }
    out
}

fn d_choices(family: Family, p: u32, base: &Params) -> Vec<Vec<i64>> {
    let q = |k: &str| ppow(p, base.get(k).unwrap_or(0));
    match family {
        Family::Borel(L::VI) | Family::Borel(L::XII) | Family::Borel(L::XX) => {
            let top = MAX_D - 2 * q("e1");
            vec![vec![0], vec![top.max(0)]]
        }
        Family::Borel(L::XVII) => vec![vec![q("e3")], vec![MAX_D.max(q("e3"))]],
        Family::Borel(L::XXII) | Family::Borel(L::XXIII) => vec![vec![q("e1")], vec![2 * q("e1")]],
        Family::Borel(L::XXV) => vec![vec![q("e3")], vec![2 * q("e3")]],
        Family::Borel(L::XXIV) => vec![vec![0], vec![q("e2")]],
        Family::Borel(L::XXVI) => vec![vec![0, 0], vec![MAX_D, 0], vec![MAX_D, MAX_D]],
        _ => vec![],
    }
}

/// Whether a Borel instance satisfies the constraints under which it extends to SL(2).
pub fn extension_constraints_hold(spec: &FormSpec) -> bool {
    let Family::Borel(l) = spec.family else { return false };
    if !EXTENDABLE.contains(&l) || !sigma_char(l).admits(spec.p) {
        return false;
    }
    let g = |k: &str| spec.param(k).unwrap_or(0);
    match l {
        L::V => g("f") == g("e1") + 1,
        L::XI | L::XIX => g("e3") == g("e1") + 1,
        L::XXII => g("d1") == ppow(spec.p, g("e1")),
        L::XXIV => g("d2") == 0,
        L::XXVI => g("d1") == 0 && g("d2") == 0,
        _ => true,
    }
}

/// The star form a Borel instance extends to, when the constraints hold.
pub fn star_of_borel(spec: &FormSpec) -> Option<FormSpec> {
    if !extension_constraints_hold(spec) {
        return None;
    }
    let Family::Borel(l) = spec.family else { return None };
    let fam = Family::Star(l);
    let mut params = Params::new();
    for k in param_names(fam) {
        params = params.with(k, spec.param(k)?);
    }
    Some(FormSpec::new(fam, spec.p, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::enumerate_sl2;

    fn spec(form: &str, p: u32, params: &str) -> FormSpec {
        FormSpec::parse(form, p, params).unwrap()
    }

    fn t_poly(p: u32, s: &str) -> MPoly {
        MPoly::parse(p, &t_vars(), s).unwrap()
    }

    #[test]
    fn borel_i_at_five() {
        let d = build_borel_pair(&spec("borel:I", 5, "e1=0")).unwrap();
        assert_eq!(d.weights, vec![3, 1, -1, -3]);
        assert_eq!(d.phi_plus.get(0, 1), &t_poly(5, "t"));
        assert_eq!(d.phi_plus.get(0, 2), &t_poly(5, "3*t^2"));
        assert_eq!(d.phi_plus.get(0, 3), &t_poly(5, "t^3"));
        assert_eq!(d.partition(), vec![4]);
    }

    #[test]
    fn borel_examples() {
        let d = build_borel_pair(&spec("borel:XXVI", 5, "d1=2,d2=1")).unwrap();
        assert!(d.phi_plus.is_identity());
        assert_eq!(d.weights, vec![2, 1, -1, -2]);
        assert!(matches!(build_borel_pair(&spec("borel:III", 2, "e1=0")), Err(CatalogError::BadCharacteristic { .. })));
        assert!(matches!(build_borel_pair(&spec("borel:IV", 2, "e1=1,e2=1")), Err(CatalogError::BadParams { .. })));
        assert!(matches!(build_borel_pair(&spec("borel:V", 2, "e1=0,f=0")), Err(CatalogError::BadParams { .. })));
        assert!(matches!(build_borel_pair(&spec("borel:XII", 2, "e1=0")), Err(CatalogError::BadParams { .. })));
        assert!(matches!(build_borel_pair(&spec("borel:XII", 2, "e1=0,d2=65")), Err(CatalogError::BadParams { .. })));
        assert_eq!(build_borel_pair(&spec("borel:XV", 3, "e2=1,e3=0")).unwrap().partition(), vec![1, 2, 1]);
        // the (1,4) entry of IX has degree 2 p^e1
        let ix = build_borel_pair(&spec("borel:IX", 3, "e1=1")).unwrap();
        assert_eq!(ix.phi_plus.get(0, 3), &t_poly(3, "2*t^6"));
    }

    #[test]
    fn sigma_examples() {
        assert!(build_sigma(&spec("star:XXVI", 3, "")).unwrap().entries.is_identity());
        let s = build_sigma(&spec("sharp:XXIV", 3, "e2=0")).unwrap();
        let r = PolyRing::new(3, &sl2_vars());
        let expected =
            PolyMat::parse(&r, &[&["a", "b", "0", "0"], &["c", "d", "0", "0"], &["0", "0", "1", "0"], &["0", "0", "0", "1"]])
                .unwrap();
        assert_eq!(s.entries, expected);
        let f = FieldCtx::new(2, 2).unwrap();
        let iv = build_sigma(&spec("sharp:IV", 2, "e1=0,e2=1")).unwrap();
        assert!(iv.eval(&f, &[f.one(), f.zero(), f.zero(), f.one()]).is_identity());
        // IX star entry (2,2) is a d + b c = 2 b c + 1 in normal form
        let ix = build_sigma(&spec("star:IX", 3, "e1=0")).unwrap();
        assert_eq!(ix.entries.get(1, 1), &MPoly::parse(3, &sl2_vars(), "2*b*c + 1").unwrap());
    }

    #[test]
    fn closed_forms_have_unit_determinant() {
        for (form, p, params) in [
            ("plus:I", 5, ""),
            ("plus:II", 3, ""),
            ("plus:IV", 3, ""),
            ("plus:V", 2, ""),
            ("plus:VII", 3, ""),
            ("plus:IX", 5, ""),
            ("plus:XI", 2, ""),
            ("plus:XV", 5, ""),
            ("plus:XIX", 2, ""),
            ("plus:XXI", 2, ""),
            ("sharp:I", 7, "e1=0"),
            ("sharp:IX", 3, "e1=0"),
            ("star:XXII", 3, "e1=0"),
            ("small:3.2a", 5, "e=0"),
            ("small:3.1a", 2, "e=0"),
            ("small:3.1b", 2, "e=0"),
        ] {
            let s = build_sigma(&spec(form, p, params)).unwrap();
            assert_eq!(s.det_normal_form(), MPoly::one(p, &sl2_vars()), "{form}");
        }
    }

    #[test]
    fn sigma_restricts_to_borel_pair() {
        // star(a, b; 0, 1/a) = omega(a) phi(b/a); check at points with c = 0
        let f = FieldCtx::new(3, 2).unwrap();
        for l in [L::II, L::IV, L::VII, L::IX, L::XV, L::XXII, L::XXIV] {
            for st in instances(Family::Star(l), 3, 1) {
                let sig = build_sigma(&st).unwrap();
                let b = build_borel_pair(&star_borel_params(&st).unwrap()).unwrap();
                for m in enumerate_sl2(&f, 1 << 20).unwrap().into_iter().filter(|m| m[2].is_zero()) {
                    let a = m[0];
                    let t = f.mul(m[1], f.inv(a).unwrap());
                    let phi = b.phi_plus.eval(&f, &[t]).unwrap();
                    let om = FqMat::diag(&f, &b.weights.iter().map(|&w| f.pow(a, w).unwrap()).collect::<Vec<_>>());
                    assert_eq!(sig.eval(&f, &m), om.mul(&phi).unwrap(), "{st}");
                }
            }
        }
    }

    #[test]
    fn monomial_entries_of_borel_forms() {
        for p in [2, 3, 5] {
            for l in Label::ALL {
                for s in instances(Family::Borel(l), p, 1) {
                    let d = build_borel_pair(&s).unwrap();
                    for i in 0..4 {
                        for j in i + 1..4 {
                            let f = d.phi_plus.get(i, j);
                            if f.is_zero() {
                                continue;
                            }
                            assert_eq!(f.num_terms(), 1, "{s}");
                            let gap = d.weights[i] - d.weights[j];
                            assert_eq!(2 * f.total_degree() as i64, gap, "{s} entry ({i},{j})");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn parsing_and_display() {
        for f in ["borel:IX", "star:XV", "sharp:IV", "plus:I", "small:3.2a", "small:1", "small:2.1"] {
            assert_eq!(f.parse::<Family>().unwrap().to_string(), f);
        }
        assert!("star:III".parse::<Family>().is_err());
        assert!("sharp:XXI".parse::<Family>().is_err());
        assert_eq!(Params::parse("e1=0,e2=1").unwrap().to_string(), "e1=0,e2=1");
        for c in Conjugator::all() {
            assert_eq!(c.name().parse::<Conjugator>().unwrap(), c);
        }
    }

    #[test]
    fn conjugator_examples() {
        let c = conjugator_for(Conjugator::StarToSharp(L::I), 7).unwrap();
        let f = FieldCtx::prime(7).unwrap();
        assert_eq!(c, FqMat::diag(&f, &[1, 1, 2, 6].map(|x| f.from_int(x))));
        let c = conjugator_for(Conjugator::StarToPlus(L::II), 3).unwrap();
        let f3 = FieldCtx::prime(3).unwrap();
        assert_eq!(c, FqMat::swap(&f3, 4, 3, 4).mul(&FqMat::swap(&f3, 4, 2, 3)).unwrap());
        assert_eq!(conjugator_for(Conjugator::StarXxiiToStarXv, 3).unwrap(), FqMat::swap(&f3, 4, 3, 4));
        assert!(conjugator_for(Conjugator::StarToPlus(L::IV), 3).is_err());
    }

    #[test]
    fn ix_printed_swap_lands_on_untwisted_form() {
        // P_{3,4} alone gives the untwisted form; the sharp form needs diag(1,1,2,1) as well
        for p in [3, 5] {
            let st = build_sigma(&spec("star:IX", p, "e1=0")).unwrap();
            let f = FieldCtx::prime(p).unwrap();
            let swapped = st.conjugate(&FqMat::swap(&f, 4, 3, 4)).unwrap();
            let plus = build_sigma(&spec("plus:IX", p, "")).unwrap();
            let sharp = build_sigma(&spec("sharp:IX", p, "e1=0")).unwrap();
            assert_eq!(swapped, plus);
            assert_ne!(swapped, sharp);
            let d = FqMat::diag(&f, &[1, 1, 2, 1].map(|x| f.from_int(x)));
            assert_eq!(swapped.conjugate(&d).unwrap(), sharp);
        }
    }

    #[test]
    fn sharp_weights() {
        let w = |form: &str, p: u32, params: &str| torus_weights(&build_sigma(&spec(form, p, params)).unwrap()).unwrap();
        let mut ii = w("sharp:II", 3, "e1=0");
        ii.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(ii, vec![3, 1, -1, -3]);
        let mut xxiv = w("sharp:XXIV", 2, "e2=1");
        xxiv.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(xxiv, vec![2, 0, 0, -2]);
        let mut i = w("sharp:I", 5, "e1=1");
        i.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(i, vec![15, 5, -5, -15]);
    }

    #[test]
    fn instance_grids() {
        assert_eq!(instances(Family::Sharp(L::XV), 2, 1).len(), 3);
        assert_eq!(instances(Family::Sharp(L::IV), 3, 2).len(), 3);
        assert!(instances(Family::Sharp(L::I), 3, 2).is_empty());
        assert_eq!(instances(Family::Borel(L::XXVI), 2, 1).len(), 3);
        let xxii = instances(Family::Borel(L::XXII), 3, 0);
        assert_eq!(xxii.len(), 2);
        assert_eq!(xxii.iter().filter(|s| extension_constraints_hold(s)).count(), 1);
    }

    #[test]
    fn conjugator_identities_hold_symbolically() {
        for p in [2, 3, 5, 7] {
            for id in Conjugator::all() {
                for params in conjugator_instances(id, p, 1) {
                    let (lhs, rhs) = conjugator_identity(id, p, &params).unwrap();
                    assert_eq!(lhs.entries, rhs.entries, "{} p={p} {params}", id.name());
                }
            }
        }
    }

    #[test]
    fn xxi_two_factor_conjugator_gives_twisted_untwisted_form() {
        // P2 P1 alone takes star:XXI to plus:V o F^e1, not to star:V
        let f = FieldCtx::prime(2).unwrap();
        let p2 = FqMat::swap(&f, 4, 3, 4).mul(&FqMat::swap(&f, 4, 1, 2)).unwrap();
        let pm = p2.mul(&p1(&f)).unwrap();
        for e in 0..=1 {
            let st = build_sigma(&spec("star:XXI", 2, &format!("e1={e}"))).unwrap();
            let plus_v = build_sigma(&spec("plus:V", 2, "")).unwrap().frobenius(e as u32).unwrap();
            let star_v = build_sigma(&spec("star:V", 2, &format!("e1={e}"))).unwrap();
            let got = st.conjugate(&pm).unwrap();
            assert_eq!(got.entries, plus_v.entries);
            assert_ne!(got.entries, star_v.entries);
        }
    }
}
