//! Exact tools for SL(2) homomorphisms into SL(4) and smaller ranks over finite fields:
//! Borel data, extension to the full group, verification, invariants and decomposition.

pub mod analyze;
pub mod catalog;
pub mod extend;
pub mod field;
pub mod linalg;
pub mod suite;
pub mod symbolic;
pub mod verify;

pub use analyze::{DecompositionReport, Equivalence, GenImages, Signature};
pub use catalog::{ClosedFormRep, Family, FormSpec, GenDatum, Label, Params, Small};
pub use extend::{ExtensionStatus, PhiMinusSolution};
pub use field::{FieldCtx, FqElem};
pub use linalg::{FqMat, PolyMat};
pub use suite::{CriterionReport, SuiteConfig};
pub use symbolic::MPoly;
pub use verify::{CheckConfig, CheckReport, Mode};
