//! Fixtures shared by the criterion benchmarks.

use mindiv::boltzmann::{gibbs_sample, BinarySamples, BmParams};
use mindiv::boosting::LabeledData;
use mindiv::glm::{Dataset, Family, GlmSpec};
use mindiv::ppp::PresenceData;
use mindiv::simlab::{generate, Generated, Scenario};
use mindiv::FinitePmf;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two strictly positive pmfs on `k` atoms.
pub fn pmf_pair(k: usize, seed: u64) -> (FinitePmf, FinitePmf) {
    let mut r = rng(seed);
    let mut draw = || FinitePmf::from_unnormalized((0..k).map(|_| r.random_range(0.05..1.0)).collect()).unwrap();
    (draw(), draw())
}

/// Logistic regression data with `d` standard normal covariates.
pub fn logistic(n: usize, d: usize, seed: u64) -> (GlmSpec, Dataset, Vec<f64>) {
    let mut r = rng(seed);
    let theta: Vec<f64> = (0..=d).map(|j| if j == 0 { 0.3 } else { 1.0 / j as f64 }).collect();
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
        let eta = mindiv::glm::linear_predictor(&theta, &x);
        y.push(if r.random::<f64>() < 1.0 / (1.0 + (-eta).exp()) { 1.0 } else { 0.0 });
        rows.push(x);
    }
    (GlmSpec::new(Family::Bernoulli, d).unwrap(), Dataset::new(rows, y).unwrap(), theta)
}

/// One presence/background draw of the misspecified point-process scenario.
pub fn presence(seed: u64) -> PresenceData {
    match generate(&Scenario::ppp_misspec(0.1), &mut rng(seed)).unwrap() {
        Generated::Presence(d) => d,
        _ => unreachable!(),
    }
}

/// Gibbs samples from a random Boltzmann machine.
pub fn boltzmann(d: usize, n: usize, seed: u64) -> (BmParams, BinarySamples) {
    let mut r = rng(seed);
    let params = BmParams::random(d, 0.5, 0.2, &mut r);
    let data = gibbs_sample(&params, n, 200, 2, &mut r).unwrap();
    (params, data)
}

/// Noisy ±1 labels from a linear rule.
pub fn boosting(n: usize, d: usize, seed: u64) -> LabeledData {
    let mut r = rng(seed);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
        let noise: f64 = StandardNormal.sample(&mut r);
        let s = x.iter().sum::<f64>() + 0.5 * noise;
        y.push(if s > 0.0 { 1 } else { -1 });
        rows.push(x);
    }
    LabeledData::new(rows, y).unwrap()
}
