//! Fixtures shared by the benchmarks.

use sl2kit::analyze::{analysis_field, GenImages};
use sl2kit::catalog::{build_borel_pair, build_sigma};
use sl2kit::{FieldCtx, FormSpec, FqMat, GenDatum};

pub fn spec(form: &str, p: u32, params: &str) -> FormSpec {
    FormSpec::parse(form, p, params).expect("catalog form")
}

pub fn borel(form: &str, p: u32, params: &str) -> GenDatum {
    build_borel_pair(&spec(form, p, params)).expect("catalog form")
}

pub fn images(form: &str, p: u32, params: &str) -> GenImages {
    let s = spec(form, p, params);
    GenImages::of_closed(&build_sigma(&s).expect("catalog form"), &analysis_field(p).expect("supported p")).expect("images")
}

/// A deterministic dense `n x n` matrix.
pub fn dense(ctx: &FieldCtx, n: usize) -> FqMat {
    FqMat::from_fn(ctx, n, n, |i, j| ctx.from_int((i * 7 + j * 13 + i * j) as i64))
}
