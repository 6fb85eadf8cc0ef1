//! Synthetic scenarios and the replication engine.
//!
//! Replication `r` draws from `ChaCha8Rng::seed_from_u64(base_seed + r)`, so a
//! summary depends only on (scenario, estimators, reps, base_seed).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{self, Dataset, EstimatorKind, Family, GlmSpec};
use crate::optim::OptimConfig;
use crate::ppp::{self, PppEstimator, PresenceData, RegionGrid};
use crate::similarity::{self, CosineParams};

/// Failure rate above which a summary is marked invalid.
pub const MAX_FAILURE_RATE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hetero {
    Zero,
    NegSlope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairKind {
    Proportional,
    Orthogonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Scenario {
    NormalMixture { pi: f64, n: usize },
    LogisticCaseControl { pi: f64, sigma: f64, n: usize },
    BernoulliImbalance { eps: f64, n: usize, n_test: usize },
    PoissonMixture { pi: f64, hetero: Hetero, n: usize },
    PppMisspec { eps: f64, n_side: usize, region_area: f64, grid_seed: u64 },
    CosinePair { kind: PairKind, sigma2: f64, d: usize },
    ClusterBlobs { clusters: usize, per_cluster: usize, d: usize, spikes: usize, amplitude: f64 },
    PcaBlock { n: usize, d: usize, d0: usize, eps: f64 },
}

impl Scenario {
    pub fn normal_mixture(pi: f64) -> Self {
        Scenario::NormalMixture { pi, n: 200 }
    }

    pub fn logistic_case_control(pi: f64) -> Self {
        Scenario::LogisticCaseControl { pi, sigma: -4.0, n: 200 }
    }

    pub fn bernoulli_imbalance(eps: f64) -> Self {
        Scenario::BernoulliImbalance { eps, n: 1000, n_test: 1000 }
    }

    pub fn poisson_mixture(pi: f64, hetero: Hetero) -> Self {
        Scenario::PoissonMixture { pi, hetero, n: 100 }
    }

    pub fn ppp_misspec(eps: f64) -> Self {
        Scenario::PppMisspec { eps, n_side: 40, region_area: 32.0, grid_seed: 7 }
    }

    pub fn cosine_pair(kind: PairKind, sigma2: f64) -> Self {
        Scenario::CosinePair { kind, sigma2, d: 1000 }
    }

    pub fn cluster_blobs() -> Self {
        Scenario::ClusterBlobs { clusters: 8, per_cluster: 15, d: 1000, spikes: 3, amplitude: 6.0 }
    }

    pub fn pca_block() -> Self {
        Scenario::PcaBlock { n: 500, d: 1000, d0: 10, eps: 0.1 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::NormalMixture { .. } => "normal-mixture",
            Scenario::LogisticCaseControl { .. } => "logistic-case-control",
            Scenario::BernoulliImbalance { .. } => "bernoulli-imbalance",
            Scenario::PoissonMixture { .. } => "poisson-mixture",
            Scenario::PppMisspec { .. } => "ppp-misspec",
            Scenario::CosinePair { .. } => "cosine-pair",
            Scenario::ClusterBlobs { .. } => "cluster-blobs",
            Scenario::PcaBlock { .. } => "pca-block",
        }
    }

    /// Data-generating parameter, when the scenario has one.
    pub fn truth(&self) -> Option<Vec<f64>> {
        match self {
            Scenario::NormalMixture { .. } => Some(vec![0.5, 1.5, 1.0]),
            Scenario::LogisticCaseControl { .. } => Some(vec![0.0, 1.0, 1.0]),
            Scenario::BernoulliImbalance { .. } => Some(vec![0.5, 1.0, 1.5]),
            Scenario::PoissonMixture { .. } => Some(vec![0.5, 0.5, 1.5, -1.0]),
            Scenario::PppMisspec { .. } => Some(vec![0.5, 1.5, -1.0]),
            _ => None,
        }
    }

    pub fn default_estimators(&self) -> Vec<Estimator> {
        use EstimatorKind as K;
        match self {
            Scenario::NormalMixture { .. } => vec![Estimator::Glm(K::ML), Estimator::Glm(K::Gamma(0.3))],
            Scenario::LogisticCaseControl { .. } => vec![
                Estimator::Glm(K::ML),
                Estimator::Glm(K::Gamma(0.8)),
                Estimator::Glm(K::GM(glm::GmRef::Default)),
                Estimator::Glm(K::HM),
            ],
            Scenario::BernoulliImbalance { .. } => {
                vec![Estimator::Glm(K::ML), Estimator::Glm(K::InverseWeightedGM)]
            }
            Scenario::PoissonMixture { .. } => vec![Estimator::Glm(K::ML), Estimator::Glm(K::Gamma(0.05))],
            Scenario::PppMisspec { .. } => vec![
                Estimator::Ppp(PppEstimator::ML),
                Estimator::Ppp(PppEstimator::F(ppp::CdfWeight::pareto_sigma(1.2))),
                Estimator::Ppp(PppEstimator::Beta(-0.1)),
            ],
            _ => Vec::new(),
        }
    }

    fn glm_spec(&self) -> Option<GlmSpec> {
        let (family, d) = match self {
            Scenario::NormalMixture { .. } => (Family::Normal { sigma2: 1.0 }, 2),
            Scenario::LogisticCaseControl { .. } | Scenario::BernoulliImbalance { .. } => (Family::Bernoulli, 2),
            Scenario::PoissonMixture { .. } => (Family::Poisson, 3),
            _ => return None,
        };
        GlmSpec::new(family, d).ok()
    }
}

/// One replication's data.
#[derive(Debug, Clone, PartialEq)]
pub enum Generated {
    Regression(Dataset),
    /// `minority` counts training rows drawn from the rare covariate component.
    Classification { train: Dataset, test: Dataset, minority: usize },
    Presence(PresenceData),
    Pair(Vec<f64>, Vec<f64>),
    Rows { rows: Vec<Vec<f64>>, labels: Vec<usize> },
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("{name} must lie in [0,1]")))
    }
}

/// Presence-only grid of the PPP scenario, fixed by its own seed.
pub fn ppp_grid(n_side: usize, region_area: f64, grid_seed: u64) -> Result<RegionGrid> {
    RegionGrid::gaussian(n_side, 2, region_area, &mut ChaCha8Rng::seed_from_u64(grid_seed))
}

/// Mixture intensity (1−ε) exp(θᵀx) + ε exp(θ*ᵀx) on the PPP grid, θ* = (θ₀, −θ₁).
pub fn ppp_intensity(scenario: &Scenario) -> Result<(RegionGrid, Vec<f64>)> {
    let Scenario::PppMisspec { eps, n_side, region_area, grid_seed } = *scenario else {
        return Err(Error::InvalidParam("not a point-process scenario".into()));
    };
    check_prob("ε", eps)?;
    let grid = ppp_grid(n_side, region_area, grid_seed)?;
    let th = scenario.truth().unwrap_or_default();
    let out = vec![th[0], -th[1], -th[2]];
    let lam = ppp::mixture_on_grid(&grid, &th, &out, eps)?;
    Ok((grid, lam))
}

fn cosine_means(d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mu1 = vec![0.0; d];
    let mut mu20 = vec![0.0; d];
    for i in 0..10.min(d) {
        mu1[i] = (10 - i) as f64;
        mu20[i] = (i + 1) as f64;
    }
    let c = dot(&mu1, &mu20) / dot(&mu1, &mu1);
    let mu2 = mu20.iter().zip(&mu1).map(|(a, b)| a - c * b).collect();
    (mu1, mu2)
}

/// Draws one replication.
pub fn generate(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Result<Generated> {
    let theta = scenario.truth();
    match *scenario {
        Scenario::NormalMixture { pi, n } => {
            check_prob("π", pi)?;
            let th = theta.unwrap_or_default();
            let mut rows = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let x = vec![normal(rng), normal(rng)];
                let slope = dot(&th[1..], &x);
                let mean = if rng.random::<f64>() < pi { th[0] - slope } else { th[0] + slope };
                y.push(mean + normal(rng));
                rows.push(x);
            }
            Ok(Generated::Regression(Dataset::new(rows, y)?))
        }
        Scenario::LogisticCaseControl { pi, sigma, n } => {
            check_prob("π", pi)?;
            let mu1 = [0.5, 0.5];
            let npos = Binomial::new(n as u64, 0.5).map_err(|e| Error::InvalidParam(e.to_string()))?.sample(rng) as usize;
            let mut rows = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for i in 0..n {
                let pos = i < npos;
                let centre = if !pos {
                    [-mu1[0], -mu1[1]]
                } else if rng.random::<f64>() < pi {
                    [sigma * mu1[0], sigma * mu1[1]]
                } else {
                    mu1
                };
                rows.push(vec![centre[0] + normal(rng), centre[1] + normal(rng)]);
                y.push(if pos { 1.0 } else { 0.0 });
            }
            Ok(Generated::Regression(Dataset::new(rows, y)?))
        }
        Scenario::BernoulliImbalance { eps, n, n_test } => {
            check_prob("ε", eps)?;
            let th = theta.unwrap_or_default();
            let draw = |m: usize, rng: &mut ChaCha8Rng| -> Result<(Dataset, usize)> {
                let mut rows = Vec::with_capacity(m);
                let mut y = Vec::with_capacity(m);
                let mut minority = 0;
                for _ in 0..m {
                    let rare = rng.random::<f64>() < eps;
                    minority += usize::from(rare);
                    let c = if rare { 2.0 } else { -2.0 };
                    let x = vec![c + normal(rng), c + normal(rng)];
                    let p = glm::kernels::sigmoid(glm::linear_predictor(&th, &x));
                    y.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
                    rows.push(x);
                }
                Ok((Dataset::new(rows, y)?, minority))
            };
            let (train, minority) = draw(n, rng)?;
            let (test, _) = draw(n_test, rng)?;
            Ok(Generated::Classification { train, test, minority })
        }
        Scenario::PoissonMixture { pi, hetero, n } => {
            check_prob("π", pi)?;
            let th = theta.unwrap_or_default();
            let sd = 0.2f64.sqrt();
            let mut rows = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let x: Vec<f64> = (0..3).map(|_| sd * normal(rng)).collect();
                let eta = if rng.random::<f64>() < pi {
                    match hetero {
                        Hetero::Zero => th[0],
                        Hetero::NegSlope => th[0] - dot(&th[1..], &x),
                    }
                } else {
                    glm::linear_predictor(&th, &x)
                };
                let count: f64 = Poisson::new(eta.exp()).map_err(|e| Error::InvalidParam(e.to_string()))?.sample(rng);
                y.push(count);
                rows.push(x);
            }
            Ok(Generated::Regression(Dataset::new(rows, y)?))
        }
        Scenario::PppMisspec { .. } => {
            let (grid, lam) = ppp_intensity(scenario)?;
            Ok(Generated::Presence(ppp::simulate_ppp(&grid, &lam, rng)?))
        }
        Scenario::CosinePair { kind, sigma2, d } => {
            if !(sigma2 >= 0.0) || d == 0 {
                return Err(Error::InvalidParam("σ² ≥ 0 and d ≥ 1 required".into()));
            }
            let (mu1, mu2) = cosine_means(d);
            let sd = sigma2.sqrt();
            let x: Vec<f64> = mu1.iter().map(|m| m + sd * normal(rng)).collect();
            let target = if kind == PairKind::Proportional { &mu1 } else { &mu2 };
            let y: Vec<f64> = target.iter().map(|m| m + sd * normal(rng)).collect();
            Ok(Generated::Pair(x, y))
        }
        Scenario::ClusterBlobs { clusters, per_cluster, d, spikes, amplitude } => {
            if clusters * spikes > d {
                return Err(Error::InvalidParam("not enough coordinates for distinct spikes".into()));
            }
            let mut coords: Vec<usize> = (0..d).collect();
            for i in 0..clusters * spikes {
                let j = rng.random_range(i..d);
                coords.swap(i, j);
            }
            let mut rows = Vec::with_capacity(clusters * per_cluster);
            let mut labels = Vec::with_capacity(clusters * per_cluster);
            for c in 0..clusters {
                for _ in 0..per_cluster {
                    let mut x: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
                    for &j in &coords[c * spikes..(c + 1) * spikes] {
                        x[j] += amplitude;
                    }
                    rows.push(x);
                    labels.push(c);
                }
            }
            Ok(Generated::Rows { rows, labels })
        }
        Scenario::PcaBlock { n, d, d0, eps } => {
            if d0 == 0 || d0 > d || !(eps > 0.0) {
                return Err(Error::InvalidParam("need 1 ≤ d₀ ≤ d and ε > 0".into()));
            }
            // Σ₀ = diag(5, …, 1) with d₀ evenly spaced entries
            let sd0: Vec<f64> = (0..d0)
                .map(|j| if d0 == 1 { 5.0 } else { 5.0 - 4.0 * j as f64 / (d0 - 1) as f64 }.sqrt())
                .collect();
            let sd1 = eps.sqrt();
            let rows = (0..n)
                .map(|_| (0..d).map(|j| normal(rng) * if j < d0 { sd0[j] } else { sd1 }).collect())
                .collect();
            Ok(Generated::Rows { rows, labels: vec![0; n] })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Estimator {
    Glm(EstimatorKind),
    Ppp(PppEstimator),
}

impl Estimator {
    pub fn label(&self) -> String {
        match self {
            Estimator::Glm(k) => k.label(),
            Estimator::Ppp(p) => p.label(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: String,
    pub mean: Vec<f64>,
    pub rmse: f64,
    pub failures: usize,
    pub reps: usize,
    /// Test-set rates, classification scenarios only.
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
}

impl EstimatorSummary {
    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.reps as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub base_seed: u64,
    pub reps: usize,
    pub rows: Vec<EstimatorSummary>,
    pub valid: bool,
}

/// Formats with 6 significant digits; plain decimal inside [1e-4, 1e6).
pub fn fmt_sig(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-4..1e6).contains(&a) {
        let decimals = (5 - a.log10().floor() as i32).max(0) as usize;
        let s = format!("{v:.decimals$}");
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{v:.5e}")
    }
}

impl Summary {
    /// scenario, estimator, mean components, rmse, failures, reps, seed (plus tpr/tnr when present).
    pub fn to_csv(&self) -> String {
        let p = self.rows.iter().map(|r| r.mean.len()).max().unwrap_or(0);
        let rates = self.rows.iter().any(|r| r.tpr.is_some());
        let mut out = String::from("scenario,estimator");
        for j in 0..p {
            out.push_str(&format!(",mean{j}"));
        }
        out.push_str(",rmse,failures,reps,seed");
        if rates {
            out.push_str(",tpr,tnr");
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{}", self.scenario, r.estimator));
            for j in 0..p {
                out.push(',');
                out.push_str(&r.mean.get(j).map_or("NaN".into(), |v| fmt_sig(*v)));
            }
            out.push_str(&format!(",{},{},{},{}", fmt_sig(r.rmse), r.failures, r.reps, self.base_seed));
            if rates {
                let f = |v: Option<f64>| v.map_or("NaN".into(), fmt_sig);
                out.push_str(&format!(",{},{}", f(r.tpr), f(r.tnr)));
            }
            out.push('\n');
        }
        out
    }
}

struct RepOutcome {
    theta: Option<Vec<f64>>,
    rates: Option<(f64, f64)>,
}

fn fit_glm(spec: &GlmSpec, kind: &EstimatorKind, data: &Dataset, cfg: &OptimConfig) -> Option<Vec<f64>> {
    let fit = match (spec.family, kind) {
        (Family::Normal { .. }, EstimatorKind::Gamma(g)) => glm::fit_normal_joint(*g, data, None, cfg),
        _ => glm::fit(spec, kind, data, None, cfg),
    };
    match fit {
        Ok(f) if f.converged() && f.theta.iter().all(|v| v.is_finite()) => Some(f.theta),
        _ => None,
    }
}

fn rates(theta: &[f64], test: &Dataset) -> (f64, f64) {
    let (mut tp, mut pos, mut tn, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..test.n() {
        let hit = glm::linear_predictor(theta, test.row(i)) > 0.0;
        if test.y()[i] > 0.5 {
            pos += 1;
            tp += usize::from(hit);
        } else {
            neg += 1;
            tn += usize::from(!hit);
        }
    }
    let r = |a: usize, b: usize| if b == 0 { f64::NAN } else { a as f64 / b as f64 };
    (r(tp, pos), r(tn, neg))
}

fn run_rep(scenario: &Scenario, estimators: &[Estimator], seed: u64, cfg: &OptimConfig) -> Result<Vec<RepOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = generate(scenario, &mut rng)?;
    let spec = scenario.glm_spec();
    Ok(estimators
        .iter()
        .map(|est| match (est, &data, &spec) {
            (Estimator::Glm(kind), Generated::Regression(d), Some(spec)) => {
                RepOutcome { theta: fit_glm(spec, kind, d, cfg), rates: None }
            }
            (Estimator::Glm(kind), Generated::Classification { train, test, .. }, Some(spec)) => {
                let theta = fit_glm(spec, kind, train, cfg);
                let rates = theta.as_ref().map(|t| rates(t, test));
                RepOutcome { theta, rates }
            }
            (Estimator::Ppp(p), Generated::Presence(d), _) => {
                let fit = match p {
                    PppEstimator::GM => ppp::gm_fit(d, None, cfg),
                    _ => ppp::fit(p, d, None, cfg),
                };
                let theta = match fit {
                    Ok(f) if f.converged() => Some(f.theta),
                    _ => None,
                };
                RepOutcome { theta, rates: None }
            }
            _ => RepOutcome { theta: None, rates: None },
        })
        .collect())
}

fn check_compatible(scenario: &Scenario, estimators: &[Estimator]) -> Result<()> {
    for e in estimators {
        let ok = match e {
            Estimator::Glm(_) => scenario.glm_spec().is_some(),
            Estimator::Ppp(_) => matches!(scenario, Scenario::PppMisspec { .. }),
        };
        if !ok {
            return Err(Error::InvalidParam(format!("{} does not apply to {}", e.label(), scenario.name())));
        }
    }
    Ok(())
}

/// Runs `reps` replications in parallel and reduces them in replication order.
pub fn run_experiment(scenario: &Scenario, estimators: &[Estimator], reps: usize, base_seed: u64) -> Result<Summary> {
    if reps == 0 {
        return Err(Error::InvalidParam("reps must be at least 1".into()));
    }
    if estimators.is_empty() {
        return Err(Error::InvalidParam("no estimators".into()));
    }
    check_compatible(scenario, estimators)?;
    let truth = scenario
        .truth()
        .ok_or_else(|| Error::InvalidParam(format!("{} has no estimation target", scenario.name())))?;
    let cfg = OptimConfig::default();
    let outcomes: Vec<Vec<RepOutcome>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| run_rep(scenario, estimators, base_seed.wrapping_add(r), &cfg))
        .collect::<Result<_>>()?;
    let p = truth.len();
    let mut rows = Vec::with_capacity(estimators.len());
    for (k, est) in estimators.iter().enumerate() {
        let mut sum = vec![0.0; p];
        let mut sq = 0.0;
        let mut ok = 0usize;
        let (mut tpr, mut tnr, mut nr) = (0.0, 0.0, 0usize);
        for rep in &outcomes {
            let o = &rep[k];
            if let Some(t) = &o.theta {
                ok += 1;
                for j in 0..p {
                    sum[j] += t[j];
                }
                sq += t.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            }
            if let Some((a, b)) = o.rates {
                tpr += a;
                tnr += b;
                nr += 1;
            }
        }
        let denom = ok.max(1) as f64;
        let mean = if ok == 0 { vec![f64::NAN; p] } else { sum.iter().map(|s| s / denom).collect() };
        let rmse = if ok == 0 { f64::NAN } else { (sq / denom).sqrt() };
        let avg = |v: f64| if nr == 0 { None } else { Some(v / nr as f64) };
        rows.push(EstimatorSummary {
            estimator: est.label(),
            mean,
            rmse,
            failures: reps - ok,
            reps,
            tpr: avg(tpr),
            tnr: avg(tnr),
        });
    }
    let valid = rows.iter().all(|r| r.failure_rate() <= MAX_FAILURE_RATE);
    Ok(Summary { scenario: scenario.name().into(), base_seed, reps, rows, valid })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineRow {
    pub kind: PairKind,
    pub sigma2: f64,
    pub beta: f64,
    pub gamma: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Mean and standard deviation of cos_(β,γ)(X, Y) over `reps` CosinePair draws per σ².
pub fn cosine_table(
    kind: PairKind,
    sigma2s: &[f64],
    params: &[CosineParams],
    d: usize,
    reps: usize,
    base_seed: u64,
) -> Result<Vec<CosineRow>> {
    if reps < 2 {
        return Err(Error::InvalidParam("need at least two replications".into()));
    }
    let mut out = Vec::new();
    for &s2 in sigma2s {
        let scen = Scenario::CosinePair { kind, sigma2: s2, d };
        let vals: Vec<Vec<f64>> = (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(r));
                let Generated::Pair(x, y) = generate(&scen, &mut rng)? else { unreachable!() };
                params.iter().map(|p| similarity::beta_gamma_cos(&x, &y, p.beta, p.gamma)).collect()
            })
            .collect::<Result<_>>()?;
        for (k, p) in params.iter().enumerate() {
            let n = reps as f64;
            let mean = vals.iter().map(|v| v[k]).sum::<f64>() / n;
            let var = vals.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            out.push(CosineRow { kind, sigma2: s2, beta: p.beta, gamma: p.gamma, mean, sd: var.sqrt() });
        }
    }
    Ok(out)
}

/// Silhouette of average-linkage clustering (cut at the true cluster count) per parameter pair.
pub fn cluster_silhouettes(scenario: &Scenario, params: &[CosineParams], seed: u64) -> Result<Vec<(CosineParams, f64)>> {
    let Scenario::ClusterBlobs { clusters, .. } = *scenario else {
        return Err(Error::InvalidParam("not a clustering scenario".into()));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Generated::Rows { rows, .. } = generate(scenario, &mut rng)? else { unreachable!() };
    params
        .iter()
        .map(|p| {
            let dist = similarity::pairwise_distance(&rows, *p)?;
            let labels = similarity::agglomerative_cluster(&dist, clusters)?;
            Ok((*p, similarity::silhouette(&dist, &labels)?))
        })
        .collect()
}

/// Cumulative contribution ratios of γ-PCA on one PcaBlock draw, per γ.
pub fn pca_cumulative(scenario: &Scenario, gammas: &[f64], seed: u64) -> Result<Vec<(f64, Vec<f64>)>> {
    if !matches!(scenario, Scenario::PcaBlock { .. }) {
        return Err(Error::InvalidParam("not a PCA scenario".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Generated::Rows { rows, .. } = generate(scenario, &mut rng)? else { unreachable!() };
    gammas.iter().map(|&g| Ok((g, similarity::gamma_pca(&rows, g)?.cumulative))).collect()
}
