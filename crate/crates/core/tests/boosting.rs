use mindiv::boosting::*;
use mindiv::glm::{self, Dataset, EstimatorKind, Family, GlmSpec, GmRef};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn blobs(centers: &[(f64, f64, i32, usize)], sd: f64, seed: u64) -> LabeledData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nd = Normal::new(0.0, sd).unwrap();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for &(cx, cy, lab, m) in centers {
        for _ in 0..m {
            rows.push(vec![cx + nd.sample(&mut rng), cy + nd.sample(&mut rng)]);
            y.push(lab);
        }
    }
    LabeledData::new(rows, y).unwrap()
}

fn noisy_linear(n: usize, seed: u64) -> LabeledData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let eta = x[0] - 0.5 * x[1] + 0.3 * x[2];
        let p = 1.0 / (1.0 + (-2.0 * eta).exp());
        y.push(if rng.random::<f64>() < p { 1 } else { -1 });
        rows.push(x);
    }
    LabeledData::new(rows, y).unwrap()
}

fn xor_like() -> LabeledData {
    blobs(
        &[(-1.0, -1.0, 1, 40), (1.0, 1.0, 1, 10), (-1.0, 1.0, -1, 40), (1.0, -1.0, -1, 40)],
        0.3,
        11,
    )
}

fn training_error(e: &Ensemble, d: &LabeledData) -> f64 {
    1.0 - e.accuracy(d)
}

#[test]
fn xor_like_error_drops() {
    let d = xor_like();
    let e = train_adaboost(&d, 50).unwrap();
    assert!(training_error(&e, &d) < 0.1, "{}", training_error(&e, &d));
}

#[test]
fn adaboost_alpha_matches_line_search() {
    let d = noisy_linear(200, 3);
    let e = train_adaboost(&d, 60).unwrap();
    for t in 0..e.steps.len() {
        let f: Vec<f64> = (0..d.n()).map(|i| e.score(d.row(i), t)).collect();
        let h: Vec<f64> = (0..d.n()).map(|i| e.steps[t].stump.eval(d.row(i)) as f64).collect();
        let a = line_minimize(
            |a| {
                let g: Vec<f64> = f.iter().zip(&h).map(|(f, h)| f + a * h).collect();
                exp_loss(&g, d.y())
            },
            1e-10,
        );
        assert!((a - e.steps[t].alpha).abs() < 1e-6, "step {t}: {a} vs {}", e.steps[t].alpha);
    }
    assert!(e.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn adaboost_weights_follow_recursion() {
    let d = noisy_linear(150, 8);
    let e = train_adaboost(&d, 25).unwrap();
    let n = d.n() as f64;
    for i in 0..d.n() {
        let m = d.y()[i] as f64 * e.score(d.row(i), e.steps.len());
        let w = (-m).exp() / n;
        assert!((w - e.weights[i]).abs() <= 1e-10 * w.max(1.0));
    }
}

#[test]
fn gm_and_exp_select_same_stumps() {
    let d = noisy_linear(300, 5);
    let a = train_adaboost(&d, 40).unwrap();
    let g = train_gm_boost(&d, 40).unwrap();
    assert_eq!(a.steps.len(), g.steps.len());
    for (s, t) in a.steps.iter().zip(&g.steps) {
        assert_eq!(s.stump, t.stump);
        assert!((s.alpha - t.alpha).abs() < 1e-6);
    }
    for (x, y) in a.trace.iter().zip(&g.trace) {
        assert!((x - 2.0 * y).abs() < 1e-8);
    }
}

#[test]
fn exp_loss_is_twice_glm_gm() {
    let d = noisy_linear(80, 9);
    let theta = [0.3, -0.7, 0.4, 1.1];
    let rows: Vec<Vec<f64>> = (0..d.n()).map(|i| d.row(i).to_vec()).collect();
    let y01: Vec<f64> = d.y().iter().map(|&v| if v > 0 { 1.0 } else { 0.0 }).collect();
    let gd = Dataset::new(rows, y01).unwrap();
    let spec = GlmSpec::new(Family::Bernoulli, 3).unwrap();
    let gm = glm::loss(&spec, &EstimatorKind::GM(GmRef::Scalar(0.5)), &gd, &theta).unwrap();
    let f: Vec<f64> = (0..d.n()).map(|i| 0.5 * glm::linear_predictor(&theta, d.row(i))).collect();
    assert!((exp_loss(&f, d.y()) - 2.0 * gm).abs() < 1e-12);
}

#[test]
fn imbalanced_half_matches_adaboost() {
    let d = noisy_linear(200, 4);
    let a = train_adaboost(&d, 30).unwrap();
    let b = train_adaboost_imbalanced(&d, 30, Some(0.5)).unwrap();
    for (s, t) in a.steps.iter().zip(&b.steps) {
        assert_eq!(s.stump, t.stump);
        assert!((2.0 * s.alpha - t.alpha).abs() < 1e-6);
    }
}

#[test]
fn imbalanced_weights_recompute() {
    let d = blobs(&[(0.0, 0.0, 1, 20), (1.5, 1.0, -1, 120)], 0.8, 2);
    let pi1 = 20.0 / 140.0;
    let e = train_adaboost_imbalanced(&d, 30, None).unwrap();
    let n = d.n() as f64;
    for i in 0..d.n() {
        let y = d.y()[i];
        let own = if y > 0 { pi1 } else { 1.0 - pi1 };
        let f = e.score(d.row(i), e.steps.len());
        let w = (-own * y as f64 * f).exp() / n;
        assert!((w - e.weights[i]).abs() <= 1e-10 * w.max(1.0));
    }
    assert!(e.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn gamma_boost_traces_and_weights() {
    let d = noisy_linear(200, 6);
    for g in [0.5, 1.0, -2.0] {
        let e = train_gamma_boost(&d, 40, g).unwrap();
        assert!(e.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12), "γ={g}");
        assert!(e.weights.iter().all(|w| w.is_finite() && *w > 0.0));
        assert!(e.steps.iter().all(|s| s.alpha.is_finite()));
    }
}

#[test]
fn gamma_near_zero_first_stump_is_logit() {
    let d = noisy_linear(200, 7);
    let a = train_gamma_boost(&d, 1, 1e-7).unwrap();
    let b = train_gamma_boost(&d, 1, 0.0).unwrap();
    let c = train_adaboost(&d, 1).unwrap();
    assert_eq!(a.steps[0].stump, b.steps[0].stump);
    assert_eq!(b.steps[0].stump, c.steps[0].stump);
}

#[test]
fn gamma_minus_one_rejected() {
    assert!(train_gamma_boost(&noisy_linear(20, 1), 3, -1.0).is_err());
}

#[test]
fn multiclass_two_classes_match_binary() {
    let d = noisy_linear(150, 12);
    let rows: Vec<Vec<f64>> = (0..d.n()).map(|i| d.row(i).to_vec()).collect();
    let ym: Vec<i32> = d.y().iter().map(|&v| i32::from(v > 0)).collect();
    let dm = LabeledData::new(rows, ym).unwrap();
    for g in [0.5, 1.0] {
        let b = train_gamma_boost(&d, 20, g).unwrap();
        let m = train_multiclass_gamma_boost(&dm, 20, 2, g).unwrap();
        for (s, t) in b.steps.iter().zip(&m.steps) {
            assert_eq!(s.stump.feature, t.stump.feature);
            assert_eq!(s.stump.threshold, t.stump.threshold);
        }
        for i in 0..d.n() {
            let pb = b.predict(d.row(i));
            let pm = m.predict(dm.row(i));
            assert_eq!(i32::from(pb > 0), pm);
        }
    }
}

#[test]
fn multiclass_blobs_accuracy() {
    let d = blobs(&[(0.0, 0.0, 0, 60), (3.0, 0.0, 1, 60), (1.5, 2.6, 2, 60)], 0.8, 21);
    let e = train_multiclass_gamma_boost(&d, 100, 3, 0.5).unwrap();
    assert!(e.accuracy(&d) >= 0.9, "{}", e.accuracy(&d));
    assert!(e.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    for i in 0..d.n() {
        assert!(e.class_scores(d.row(i), e.steps.len()).iter().sum::<f64>().abs() < 1e-9);
    }
}

#[test]
fn ensemble_json_roundtrip() {
    let d = noisy_linear(60, 13);
    let e = train_adaboost(&d, 5).unwrap();
    let s = serde_json::to_string(&e).unwrap();
    let back: Ensemble = serde_json::from_str(&s).unwrap();
    assert_eq!(back.steps, e.steps);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flipped_alphas_flip_predictions(seed in 0u64..1000) {
        let d = noisy_linear(60, seed);
        let e = train_adaboost(&d, 8).unwrap();
        let mut f = e.clone();
        for s in &mut f.steps { s.alpha = -s.alpha; }
        for i in 0..d.n() {
            let x = d.row(i);
            let direct: f64 = e.steps.iter().map(|s| s.alpha * if x[s.stump.feature] > s.stump.threshold { s.stump.above as f64 } else { s.stump.below as f64 }).sum();
            prop_assert!((direct - e.score(x, e.steps.len())).abs() < 1e-12);
            if direct != 0.0 {
                prop_assert_eq!(e.predict(x), -f.predict(x));
            }
        }
    }

    #[test]
    fn traces_monotone(seed in 0u64..1000, g in 0.1f64..2.0) {
        let d = noisy_linear(80, seed);
        let e = train_gamma_boost(&d, 15, g).unwrap();
        prop_assert!(e.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let a = train_adaboost(&d, 15).unwrap();
        prop_assert!(a.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}
