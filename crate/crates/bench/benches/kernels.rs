use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use sl2kit::analyze::{decompose, signature};
use sl2kit::catalog::build_sigma;
use sl2kit::extend::{solve_phi_minus, ExtendConfig};
use sl2kit::verify::{check_borel_pair, check_sl2_homomorphism, CheckConfig, Mode, RepRef};
use sl2kit::FieldCtx;
use sl2kit_bench::{borel, dense, images, spec};

fn linalg(c: &mut Criterion) {
    let ctx = FieldCtx::new(3, 4).unwrap();
    let a = dense(&ctx, 24);
    c.bench_function("rref 24x24 over F_81", |b| b.iter(|| black_box(&a).rank()));
    c.bench_function("mul 24x24 over F_81", |b| b.iter(|| black_box(&a).mul(&a).unwrap()));
}

fn verification(c: &mut Criterion) {
    let d = borel("borel:I", 5, "e1=0");
    c.bench_function("borel check, symbolic", |b| {
        b.iter(|| check_borel_pair(black_box(&d), &CheckConfig::default().with_mode(Mode::Symbolic)).unwrap())
    });
    let rep = build_sigma(&spec("sharp:XV", 3, "e2=1,e3=0")).unwrap();
    let cfg = CheckConfig { fields: vec![FieldCtx::new(3, 2).unwrap()], ..CheckConfig::default().with_mode(Mode::Exhaustive) };
    let mut g = c.benchmark_group("sl2");
    g.sample_size(10);
    g.bench_function("sl2 check over F_9", |b| b.iter(|| check_sl2_homomorphism(RepRef::Closed(black_box(&rep)), &cfg).unwrap()));
    g.finish();
}

fn extension(c: &mut Criterion) {
    let mut g = c.benchmark_group("extend");
    g.sample_size(10);
    for (form, p, params) in [("borel:I", 5, "e1=0"), ("borel:XII", 2, "e1=0,d2=0")] {
        let d = borel(form, p, params);
        g.bench_function(format!("{form} p={p}"), |b| {
            b.iter(|| solve_phi_minus(black_box(&d), &ExtendConfig::default()).unwrap())
        });
    }
    g.finish();
}

fn analysis(c: &mut Criterion) {
    let xv = images("sharp:XV", 3, "e2=1,e3=0");
    c.bench_function("signature sharp:XV p=3", |b| b.iter(|| signature(black_box(&xv)).unwrap()));
    let ix = images("sharp:IX", 3, "e1=0");
    c.bench_function("decompose sharp:IX p=3", |b| b.iter(|| decompose(black_box(&ix)).unwrap()));
}

criterion_group!(benches, linalg, verification, extension, analysis);
criterion_main!(benches);
