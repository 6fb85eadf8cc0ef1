use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mindiv::divergence::{divergence, DivergenceKind};
use mindiv::glm::{self, EstimatorKind, GmRef};
use mindiv::optim::OptimConfig;
use mindiv::{boltzmann, boosting, ppp};
use mindiv_bench as fx;

fn divergences(c: &mut Criterion) {
    let mut g = c.benchmark_group("divergence");
    let (p, q) = fx::pmf_pair(64, 1);
    for (name, kind) in [
        ("kl", DivergenceKind::KL),
        ("gamma", DivergenceKind::Gamma(0.5)),
        ("gm", DivergenceKind::GM),
        ("hm", DivergenceKind::HM),
    ] {
        g.bench_function(name, |b| b.iter(|| divergence(black_box(&p), black_box(&q), kind).unwrap()));
    }
    g.finish();
}

fn glm_scores(c: &mut Criterion) {
    let mut g = c.benchmark_group("glm_loss_and_score");
    let (spec, data, theta) = fx::logistic(2000, 5, 2);
    for kind in [EstimatorKind::ML, EstimatorKind::Gamma(0.5), EstimatorKind::GM(GmRef::Default), EstimatorKind::HM] {
        g.bench_function(kind.label(), |b| {
            b.iter(|| glm::loss_and_score(&spec, &kind, &data, black_box(&theta)).unwrap())
        });
    }
    g.finish();
    c.bench_function("glm_fit_gamma", |b| {
        b.iter(|| glm::fit(&spec, &EstimatorKind::Gamma(0.5), &data, None, &OptimConfig::default()).unwrap())
    });
}

fn presence_only(c: &mut Criterion) {
    let data = fx::presence(3);
    let cfg = OptimConfig::default();
    c.bench_function("ppp_gm_fit", |b| b.iter(|| ppp::gm_fit(black_box(&data), None, &cfg).unwrap()));
    c.bench_function("ppp_f_fit", |b| {
        b.iter(|| ppp::f_fit(black_box(&data), &ppp::CdfWeight::pareto_sigma(1.2), None, &cfg).unwrap())
    });
}

fn boltzmann_losses(c: &mut Criterion) {
    let mut g = c.benchmark_group("boltzmann");
    for d in [6, 10, 14] {
        let (params, data) = fx::boltzmann(d, 500, 4);
        g.bench_with_input(BenchmarkId::new("nll_exact", d), &d, |b, _| {
            b.iter(|| boltzmann::nll_exact(black_box(&params), &data).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("gm_loss", d), &d, |b, _| {
            b.iter(|| boltzmann::gm_loss(black_box(&params), &data).unwrap())
        });
    }
    g.finish();
}

fn boosting_rounds(c: &mut Criterion) {
    let data = fx::boosting(500, 4, 5);
    c.bench_function("adaboost_50", |b| b.iter(|| boosting::train_adaboost(black_box(&data), 50).unwrap()));
    c.bench_function("gamma_boost_50", |b| b.iter(|| boosting::train_gamma_boost(black_box(&data), 50, 0.5).unwrap()));
}

criterion_group!(benches, divergences, glm_scores, presence_only, boltzmann_losses, boosting_rounds);
criterion_main!(benches);
