mod common;

use common::*;
use mindiv::glm::*;
use mindiv::optim::OptimConfig;
use mindiv::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn scores_match_finite_differences() {
    for (i, (family, kinds)) in family_kinds().into_iter().enumerate() {
        for (j, kind) in kinds.iter().enumerate() {
            let gap = gradient_gap(family, kind, GRAD_INSTANCES, 100 * i as u64 + j as u64);
            assert!(gap < GRAD_TOL, "{family:?} {}: {gap:e}", kind.label());
        }
    }
}

/// Exact E_y[score] at θ for fixed covariates, outcomes enumerated.
fn expected_score(spec: &GlmSpec, kind: &EstimatorKind, rows: &[Vec<f64>], theta: &[f64]) -> Vec<f64> {
    let mut total = vec![0.0; theta.len()];
    for x in rows {
        let outcomes: Vec<(f64, f64)> = match spec.family {
            Family::Poisson => {
                let lam = linear_predictor(theta, x).exp();
                let mut p = (-lam).exp();
                (0..120)
                    .map(|y| {
                        if y > 0 {
                            p *= lam / y as f64;
                        }
                        (y as f64, p)
                    })
                    .collect()
            }
            _ => class_probs(spec, theta, x).unwrap().into_iter().enumerate().map(|(c, p)| (c as f64, p)).collect(),
        };
        for (y, p) in outcomes {
            let d = Dataset::new(vec![x.clone()], vec![y]).unwrap();
            let s = score(spec, kind, &d, theta).unwrap();
            total.iter_mut().zip(&s).for_each(|(t, v)| *t += p * v);
        }
    }
    total.iter().map(|v| v / rows.len() as f64).collect()
}

#[test]
fn scores_unbiased_at_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let kinds = [
        EstimatorKind::ML,
        EstimatorKind::Gamma(-2.0),
        EstimatorKind::Gamma(-0.5),
        EstimatorKind::Gamma(0.3),
        EstimatorKind::Gamma(0.8),
        EstimatorKind::GM(GmRef::Default),
        EstimatorKind::HM,
    ];
    for family in [Family::Bernoulli, Family::Categorical { k: 3 }, Family::Ordinal { k: 3 }, Family::Poisson] {
        let spec = GlmSpec::new(family, 2).unwrap();
        for _ in 0..10 {
            let theta = random_theta(&spec, &mut rng);
            let rows: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)]).collect();
            for kind in &kinds {
                let e = expected_score(&spec, kind, &rows, &theta);
                assert!(inf_norm(&e) < 1e-10, "{family:?} {}: {e:?}", kind.label());
            }
        }
    }
}

#[test]
fn ml_loss_is_negative_log_likelihood() {
    let spec = GlmSpec::new(Family::Bernoulli, 1).unwrap();
    let d = Dataset::new(vec![vec![0.5], vec![-1.0], vec![2.0]], vec![1.0, 0.0, 0.0]).unwrap();
    let theta = [0.2, -0.7];
    let nll: f64 = (0..3)
        .map(|i| {
            let p1 = 1.0 / (1.0 + (-linear_predictor(&theta, d.row(i))).exp());
            -(if d.y()[i] == 1.0 { p1 } else { 1.0 - p1 }).ln()
        })
        .sum::<f64>()
        / 3.0;
    assert!((loss(&spec, &EstimatorKind::ML, &d, &theta).unwrap() - nll).abs() < 1e-14);
}

#[test]
fn gm_half_matches_exponential_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spec = GlmSpec::new(Family::Bernoulli, 2).unwrap();
    let theta = random_theta(&spec, &mut rng);
    let data = random_dataset(&spec, &theta, 40, &mut rng);
    let at = [0.3, -0.4, 0.9];
    // Y ∈ {0,1} ↦ ±1 and f = ω/2
    let f: Vec<f64> = (0..data.n()).map(|i| 0.5 * linear_predictor(&at, data.row(i))).collect();
    let y: Vec<i32> = data.y().iter().map(|&v| if v == 1.0 { 1 } else { -1 }).collect();
    let exp = mindiv::boosting::exp_loss(&f, &y);
    let gm = loss(&spec, &EstimatorKind::GM(GmRef::Default), &data, &at).unwrap();
    assert!((2.0 * gm - exp).abs() < 1e-14, "{gm} {exp}");
}

#[test]
fn gamma_expression_examples() {
    let spec = GlmSpec::new(Family::Bernoulli, 1).unwrap();
    let GammaExpression::Pmf(p) = gamma_expression(&spec, &[1.0, 0.0], &[0.0], 1.0).unwrap() else { panic!() };
    let e2 = 2f64.exp();
    assert!((p.probs()[1] - e2 / (1.0 + e2)).abs() < 1e-15);
    let GammaExpression::Pmf(p0) = gamma_expression(&spec, &[0.3, 0.5], &[1.0], 0.0).unwrap() else { panic!() };
    assert!((p0.probs()[1] - class_probs(&spec, &[0.3, 0.5], &[1.0]).unwrap()[1]).abs() < 1e-15);
    let cat = GlmSpec::new(Family::Categorical { k: 3 }, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let theta = random_theta(&cat, &mut rng);
        let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let g = rng.random_range(-0.9..3.0);
        let GammaExpression::Pmf(p) = gamma_expression(&cat, &theta, &x, g).unwrap() else { panic!() };
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(gamma_expression(&spec, &[0.0, 1.0], &[1.0], -1.0).is_err());
    let nor = GlmSpec::new(Family::Normal { sigma2: 2.0 }, 1).unwrap();
    assert_eq!(
        gamma_expression(&nor, &[1.0, 2.0], &[0.5], 1.0).unwrap(),
        GammaExpression::Normal { mean: 2.0, variance: 1.0 }
    );
}

#[test]
fn gamma_near_zero_fits_track_ml() {
    let cfg = OptimConfig::default();
    for (family, seed) in [(Family::Bernoulli, 1), (Family::Poisson, 2), (Family::Categorical { k: 3 }, 3), (Family::Ordinal { k: 2 }, 4)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = GlmSpec::new(family, 2).unwrap();
        let truth = random_theta(&spec, &mut rng);
        let data = random_dataset(&spec, &truth, 200, &mut rng);
        let ml = fit(&spec, &EstimatorKind::ML, &data, None, &cfg).unwrap();
        assert!(ml.converged());
        for g in [1e-4, 1e-6] {
            let gf = fit(&spec, &EstimatorKind::Gamma(g), &data, None, &cfg).unwrap();
            assert!(gf.converged());
            let gap = gf.theta.iter().zip(&ml.theta).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(gap < 1e-3, "{family:?} γ={g}: {gap}");
        }
    }
}

#[test]
fn categorical_without_covariates_recovers_frequencies() {
    let y: Vec<f64> = [0, 0, 1, 2, 2, 2, 1, 0, 2, 2].iter().map(|&v| v as f64).collect();
    let freq = [0.3, 0.2, 0.5];
    let data = Dataset::new(vec![vec![]; y.len()], y).unwrap();
    let spec = GlmSpec::new(Family::Categorical { k: 3 }, 0).unwrap();
    let cfg = OptimConfig::default();
    for kind in [EstimatorKind::ML, EstimatorKind::Gamma(0.5), EstimatorKind::Gamma(-0.5), EstimatorKind::HM, EstimatorKind::Beta(0.5)] {
        let f = fit(&spec, &kind, &data, None, &cfg).unwrap();
        assert!(f.converged(), "{}", kind.label());
        let p = class_probs(&spec, &f.theta, &[]).unwrap();
        for (a, b) in p.iter().zip(freq) {
            assert!((a - b).abs() < 1e-6, "{}: {p:?}", kind.label());
        }
    }
}

#[test]
fn normal_fits() {
    // noiseless data: exact least squares
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 3.0, ((i * 7) % 5) as f64]).collect();
    let y: Vec<f64> = rows.iter().map(|x| 0.5 + 1.5 * x[0] - 2.0 * x[1]).collect();
    let data = Dataset::new(rows, y).unwrap();
    let spec = GlmSpec::new(Family::Normal { sigma2: 1.0 }, 2).unwrap();
    let f = fit(&spec, &EstimatorKind::ML, &data, None, &OptimConfig::default()).unwrap();
    for (a, b) in f.theta.iter().zip([0.5, 1.5, -2.0]) {
        assert!((a - b).abs() < 1e-8);
    }
    let j = fit_normal_joint(0.3, &data, None, &OptimConfig::default());
    assert!(matches!(j, Err(Error::Degenerate(_))), "{j:?}");
    assert!(fit(&spec, &EstimatorKind::GM(GmRef::Default), &data, None, &OptimConfig::default()).is_err());
}

/// Root of s ↦ s − (γ+1) Σ e r² / Σ e by bisection.
fn sigma_fixed_point_oracle(r: &[f64], g: f64) -> f64 {
    let h = |s: f64| {
        let (mut num, mut den) = (0.0, 0.0);
        for v in r {
            let e = (-g * v * v / (2.0 * s)).exp();
            num += e * v * v;
            den += e;
        }
        s - (g + 1.0) * num / den
    };
    let (mut lo, mut hi) = (1e-6, 100.0);
    assert!(h(lo) < 0.0 && h(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn sigma_joint_update_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let spec = GlmSpec::new(Family::Normal { sigma2: 1.0 }, 2).unwrap();
    let theta = [0.5, 1.5, 1.0];
    let data = random_dataset(&spec, &theta, 100, &mut rng);
    let r: Vec<f64> = (0..data.n()).map(|i| data.y()[i] - linear_predictor(&theta, data.row(i))).collect();
    let msr = r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64;
    assert!((sigma_joint_update(&theta, &data, 1e-9, 1.0).unwrap() - msr).abs() < 1e-6);
    let g = 0.3;
    let mut s = 1.0;
    for _ in 0..500 {
        s = sigma_joint_update(&theta, &data, g, s).unwrap();
    }
    assert!((s - sigma_fixed_point_oracle(&r, g)).abs() < 1e-6);
    let flat = Dataset::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![2.0, 1.5]).unwrap();
    assert!(sigma_joint_update(&theta, &flat, g, 1.0).is_err());
}

#[test]
fn separable_bernoulli_flags_nonconvergence() {
    let spec = GlmSpec::new(Family::Bernoulli, 1).unwrap();
    let data = Dataset::new(vec![vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
    let f = fit(&spec, &EstimatorKind::ML, &data, None, &OptimConfig::default()).unwrap();
    assert!(!f.converged());
}

#[test]
fn geometry() {
    assert_eq!(distance_to_boundary(&[3.0, 5.0], &[0.0, 1.0, 0.0]).unwrap(), 3.0);
    assert!(distance_to_boundary(&[3.0, 5.0], &[1.0, 0.0, 0.0]).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
        let theta: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        // explicit projection onto {θ₀ + θ₁ᵀx = 0}
        let n2: f64 = theta[1..].iter().map(|v| v * v).sum();
        let f = linear_predictor(&theta, &x);
        let proj: Vec<f64> = x.iter().zip(&theta[1..]).map(|(a, b)| a - f * b / n2).collect();
        assert!(linear_predictor(&theta, &proj).abs() < 1e-10);
        let dist = x.iter().zip(&proj).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!((distance_to_boundary(&x, &theta).unwrap() - dist).abs() < 1e-12);
        let (z, w) = orthogonal_decompose(&x, &theta[1..]).unwrap();
        let dot: f64 = z.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-12);
        let nx: f64 = x.iter().map(|v| v * v).sum();
        let nz: f64 = z.iter().map(|v| v * v).sum();
        let nw: f64 = w.iter().map(|v| v * v).sum();
        assert!((nx - nz - nw).abs() < 1e-12 * nx.max(1.0));
    }
}

#[test]
fn predict_rules() {
    let b = GlmSpec::new(Family::Bernoulli, 1).unwrap();
    assert_eq!(predict(&b, &[0.0, 1.0], &[0.0]).unwrap(), 0.0);
    let cat = GlmSpec::new(Family::Categorical { k: 3 }, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let theta = random_theta(&cat, &mut rng);
        let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let p = class_probs(&cat, &theta, &x).unwrap();
        let best = (0..3).fold(0, |b, c| if p[c] > p[b] { c } else { b });
        assert_eq!(predict(&cat, &theta, &x).unwrap(), best as f64);
    }
}

fn margin_families() -> Vec<(&'static str, MarginFamily)> {
    vec![
        ("bernoulli", MarginFamily::Bernoulli),
        ("categorical", MarginFamily::Categorical { b: vec![0.0, 1.0, -0.5] }),
        ("normal", MarginFamily::Normal { sigma2: 1.0, ys: (-6..=6).map(|v| v as f64 * 0.5).collect() }),
        ("poisson", MarginFamily::Poisson { ymax: 30 }),
    ]
}

#[test]
fn boundedness_dichotomy() {
    for (name, fam) in margin_families() {
        for g in [0.3, 0.8, -2.0] {
            if name == "normal" && g < -1.0 {
                assert!(margin_bound_diagnostics(&fam, g, 25.0, 0.01).is_err());
                continue;
            }
            let a = margin_bound_diagnostics(&fam, g, 25.0, 0.01).unwrap().sup;
            let b = margin_bound_diagnostics(&fam, g, 50.0, 0.01).unwrap().sup;
            assert!(b.is_finite() && (b - a).abs() / a < 1e-6, "{name} γ={g}: {a} → {b}");
        }
        for g in [0.0, -1.0] {
            if name == "normal" && g < -0.5 {
                continue;
            }
            let a = margin_bound_diagnostics(&fam, g, 5.0, 0.01).unwrap().sup;
            let b = margin_bound_diagnostics(&fam, g, 50.0, 0.01).unwrap().sup;
            assert!(b > 5.0 * a, "{name} γ={g}: {a} → {b}");
        }
    }
}

#[test]
fn normal_sup_bound() {
    for g in [0.5, 1.0, 2.0] {
        for y in [0.0, 1.0, -2.5, 3.0] {
            let fam = MarginFamily::Normal { sigma2: 1.0, ys: vec![y] };
            let sup = margin_bound_diagnostics(&fam, g, 50.0, 1e-3).unwrap().sup;
            let bound = 2.0 / g * (-1.0f64).exp() + y.abs() * g.powf(-0.5) * (-0.5f64).exp();
            assert!(sup <= bound + 1e-9, "γ={g} y={y}: {sup} > {bound}");
        }
        let fam = MarginFamily::Normal { sigma2: 1.0, ys: vec![0.0] };
        let sup = margin_bound_diagnostics(&fam, g, 50.0, 1e-3).unwrap().sup;
        assert!((sup - 2.0 / g * (-1.0f64).exp()).abs() < 1e-5);
    }
}

#[test]
fn ordinal_single_cut_is_binary_logistic() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let ord = GlmSpec::new(Family::Ordinal { k: 1 }, 2).unwrap();
    let ber = GlmSpec::new(Family::Bernoulli, 2).unwrap();
    let truth = random_theta(&ord, &mut rng);
    let data = random_dataset(&ord, &truth, 30, &mut rng);
    // Z = I(Y ≤ 0) with predictor θ_cut + θ₁ᵀx
    let z: Vec<f64> = data.y().iter().map(|&v| if v <= 0.0 { 1.0 } else { 0.0 }).collect();
    let rows: Vec<Vec<f64>> = (0..data.n()).map(|i| data.row(i).to_vec()).collect();
    let bin = Dataset::new(rows, z).unwrap();
    let theta = random_theta(&ord, &mut rng);
    for kind in [EstimatorKind::ML, EstimatorKind::Gamma(0.5), EstimatorKind::GM(GmRef::Default), EstimatorKind::HM] {
        let (l, _) = ordinal_dichotomized_loss(&ord, &kind, &data, &theta).unwrap();
        assert!((l - loss(&ber, &kind, &bin, &theta).unwrap()).abs() < 1e-14);
    }
    assert!(ordinal_dichotomized_loss(&ber, &EstimatorKind::ML, &bin, &theta).is_err());
    assert!(loss(&ord, &EstimatorKind::ML, &data, &[1.0, 0.0]).is_err());
    let unordered = GlmSpec::new(Family::Ordinal { k: 2 }, 2).unwrap();
    let d3 = Dataset::new(vec![vec![0.0, 0.0]], vec![1.0]).unwrap();
    assert!(loss(&unordered, &EstimatorKind::ML, &d3, &[1.0, -1.0, 0.0, 0.0]).is_err());
}

#[test]
fn poisson_overflow_is_an_error() {
    let spec = GlmSpec::new(Family::Poisson, 1).unwrap();
    let data = Dataset::new(vec![vec![100.0]], vec![1.0]).unwrap();
    assert!(matches!(loss(&spec, &EstimatorKind::Gamma(0.5), &data, &[0.0, 5.0]), Err(Error::Overflow(_))));
}
