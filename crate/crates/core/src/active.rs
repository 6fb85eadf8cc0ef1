//! Query-by-committee acquisition with power-mean consensus.
//!
//! Committee members map a feature vector to a zero-sum predictor ξ over k
//! classes with pmf softmax(ξ). The consensus is the log-sum-exp mean
//! (1/γ) log Σ w_l exp(γ ξ^(l)), whose exponential is the γ-power mean of the
//! members' exp(ξ^(l)). Disagreement is scored by the weighted dual
//! γ-divergence of each member from the consensus.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::{dual_gamma_div, FinitePmf, DISPATCH_TOL};
use crate::error::{Error, Result};
use crate::glm::kernels::{log_sum_exp, sigmoid};

fn check_weights(w: &[f64], m: usize) -> Result<()> {
    if w.len() != m || m == 0 {
        return Err(Error::InvalidParam("one weight per member required".into()));
    }
    if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidParam("weights must be positive".into()));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParam(format!("weights sum to {s}")));
    }
    Ok(())
}

/// Componentwise weighted power mean (Σ w_j v_j^γ)^{1/γ}; γ = 0 is the geometric mean.
pub fn power_mean(vectors: &[Vec<f64>], w: &[f64], g: f64) -> Result<Vec<f64>> {
    check_weights(w, vectors.len())?;
    let k = vectors[0].len();
    if vectors.iter().any(|v| v.len() != k) {
        return Err(Error::SupportMismatch("vectors differ in length".into()));
    }
    if vectors.iter().flatten().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidParam("power mean needs positive entries".into()));
    }
    Ok((0..k)
        .map(|i| {
            if g.abs() < DISPATCH_TOL {
                vectors.iter().zip(w).map(|(v, wj)| wj * v[i].ln()).sum::<f64>().exp()
            } else {
                // log-domain evaluation keeps large |γ| finite
                let logs: Vec<f64> = vectors.iter().zip(w).map(|(v, wj)| wj.ln() + g * v[i].ln()).collect();
                (log_sum_exp(&logs) / g).exp()
            }
        })
        .collect())
}

/// Normalized power mean of pmfs taken on densities, the minimizer of Σ w_j D*_γ(P, Q_j).
pub fn power_mean_pmf(q_list: &[FinitePmf], w: &[f64], g: f64) -> Result<FinitePmf> {
    let Some(first) = q_list.first() else {
        return Err(Error::InvalidParam("empty committee".into()));
    };
    for q in q_list {
        if q.labels() != first.labels() || q.ref_weights() != first.ref_weights() {
            return Err(Error::SupportMismatch("pmfs must share support and reference".into()));
        }
    }
    let dens: Vec<Vec<f64>> = q_list.iter().map(|q| q.densities()).collect();
    let m = power_mean(&dens, w, g)?;
    let mass: Vec<f64> = m.iter().zip(first.ref_weights()).map(|(a, r)| a * r).collect();
    let s: f64 = mass.iter().sum();
    FinitePmf::with_labels(first.labels().to_vec(), mass.iter().map(|v| v / s).collect())?
        .with_ref_weights(first.ref_weights().to_vec())
}

/// Softmax of a predictor vector.
pub fn softmax(xi: &[f64]) -> Vec<f64> {
    let l = log_sum_exp(xi);
    xi.iter().map(|v| (v - l).exp()).collect()
}

fn recentre(mut v: Vec<f64>) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|a| *a -= m);
    v
}

pub trait Predictor: Send + Sync {
    fn predict(&self, x: &[f64]) -> Vec<f64>;
}

impl<F: Fn(&[f64]) -> Vec<f64> + Send + Sync> Predictor for F {
    fn predict(&self, x: &[f64]) -> Vec<f64> {
        self(x)
    }
}

/// Binary linear member ξ = (−η/2, η/2) with η = θ₀ + θ₁ᵀx.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMember {
    pub theta: Vec<f64>,
}

impl Predictor for LinearMember {
    fn predict(&self, x: &[f64]) -> Vec<f64> {
        let eta = crate::glm::linear_predictor(&self.theta, x);
        vec![-0.5 * eta, 0.5 * eta]
    }
}

#[derive(Clone)]
pub struct Committee {
    members: Vec<Arc<dyn Predictor>>,
    weights: Vec<f64>,
}

impl Committee {
    pub fn new(members: Vec<Arc<dyn Predictor>>, weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights, members.len())?;
        Ok(Self { members, weights })
    }

    pub fn equal(members: Vec<Arc<dyn Predictor>>) -> Result<Self> {
        let m = members.len();
        Self::new(members, vec![1.0 / m as f64; m])
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Member predictors at x, recentred to zero sum.
    pub fn member_predictions(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let out: Vec<Vec<f64>> = self.members.iter().map(|m| recentre(m.predict(x))).collect();
        let k = out[0].len();
        if k < 2 || out.iter().any(|v| v.len() != k || v.iter().any(|a| !a.is_finite())) {
            return Err(Error::InvalidParam("members must return finite vectors of a common length ≥ 2".into()));
        }
        Ok(out)
    }
}

/// Log-sum-exp consensus (1/γ) log Σ w_l exp(γ ξ^(l)), recentred; γ = 0 gives the weighted mean.
pub fn consensus_from(preds: &[Vec<f64>], w: &[f64], g: f64) -> Vec<f64> {
    let k = preds[0].len();
    let out = (0..k)
        .map(|y| {
            if g.abs() < DISPATCH_TOL {
                preds.iter().zip(w).map(|(p, wl)| wl * p[y]).sum()
            } else {
                let terms: Vec<f64> = preds.iter().zip(w).map(|(p, wl)| wl.ln() + g * p[y]).collect();
                log_sum_exp(&terms) / g
            }
        })
        .collect();
    recentre(out)
}

pub fn consensus_predictor(committee: &Committee, x: &[f64], g: f64) -> Result<Vec<f64>> {
    if !g.is_finite() {
        return Err(Error::InvalidParam("γ must be finite".into()));
    }
    let preds = committee.member_predictions(x)?;
    Ok(consensus_from(&preds, &committee.weights, g))
}

/// Σ_l w_l D*_γ(P(·|ξ^(l)(x)), P(·|ξ̂(x))).
pub fn acquisition(committee: &Committee, x: &[f64], g: f64) -> Result<f64> {
    let preds = committee.member_predictions(x)?;
    let hat = FinitePmf::new(normalized(softmax(&consensus_from(&preds, &committee.weights, g))))?;
    let mut total = 0.0;
    for (p, wl) in preds.iter().zip(&committee.weights) {
        let pl = FinitePmf::new(normalized(softmax(p)))?;
        total += wl * dual_gamma_div(&pl, &hat, g)?;
    }
    Ok(total.max(0.0))
}

// softmax output renormalized so the pmf constructor's 1e-12 sum check holds
fn normalized(v: Vec<f64>) -> Vec<f64> {
    let floor = 1e-300;
    let v: Vec<f64> = v.into_iter().map(|a| a.max(floor)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|a| a / s).collect()
}

/// Index of the pool point with the largest acquisition; ties go to the lowest index.
pub fn select_next(committee: &Committee, pool: &[Vec<f64>], g: f64) -> Result<(usize, f64)> {
    if pool.is_empty() {
        return Err(Error::InvalidData("empty pool".into()));
    }
    let scores: Vec<f64> = pool
        .par_iter()
        .map(|x| acquisition(committee, x, g))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok((best, scores[best]))
}

/// Ridge-penalized logistic regression by Newton's method; labels in {0,1}.
pub fn ridge_logistic(x: &[Vec<f64>], y: &[f64], ridge: f64) -> Result<Vec<f64>> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::InvalidData("rows and labels must be nonempty and aligned".into()));
    }
    let p = x[0].len() + 1;
    let mut theta = vec![0.0; p];
    for _ in 0..100 {
        let mut grad = DVector::<f64>::zeros(p);
        let mut hess = DMatrix::<f64>::identity(p, p) * ridge;
        for j in 0..p {
            grad[j] = ridge * theta[j];
        }
        for (xi, yi) in x.iter().zip(y) {
            let mu = sigmoid(crate::glm::linear_predictor(&theta, xi));
            let z: Vec<f64> = std::iter::once(1.0).chain(xi.iter().copied()).collect();
            for a in 0..p {
                grad[a] += (mu - yi) * z[a];
                for b in 0..p {
                    hess[(a, b)] += mu * (1.0 - mu) * z[a] * z[b];
                }
            }
        }
        let step = hess
            .cholesky()
            .ok_or_else(|| Error::Degenerate("ridge Hessian not positive definite".into()))?
            .solve(&grad);
        for j in 0..p {
            theta[j] -= step[j];
        }
        if step.amax() < 1e-10 {
            return Ok(theta);
        }
    }
    Ok(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveConfig {
    pub gamma: f64,
    pub members: usize,
    pub rounds: usize,
    pub initial: usize,
    pub pool: usize,
    pub test: usize,
    pub ridge: f64,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        Self { gamma: 0.5, members: 5, rounds: 20, initial: 10, pool: 500, test: 1000, ridge: 1e-2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub chosen: usize,
    pub acquisition: f64,
    pub test_accuracy: f64,
    pub random_accuracy: f64,
}

fn draw_two_class(n: usize, rng: &mut impl Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mu = [1.0, 0.5];
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let lab = if rng.random::<bool>() { 1.0 } else { 0.0 };
        let s = 2.0 * lab - 1.0;
        x.push(
            mu.iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(rng);
                    s * m + z
                })
                .collect::<Vec<f64>>(),
        );
        y.push(lab);
    }
    (x, y)
}

fn accuracy(theta: &[f64], x: &[Vec<f64>], y: &[f64]) -> f64 {
    let hits = x
        .iter()
        .zip(y)
        .filter(|(xi, yi)| (crate::glm::linear_predictor(theta, xi) > 0.0) == (**yi > 0.5))
        .count();
    hits as f64 / y.len() as f64
}

fn bootstrap_committee(
    x: &[Vec<f64>],
    y: &[f64],
    cfg: &ActiveConfig,
    rng: &mut impl Rng,
) -> Result<Committee> {
    let n = x.len();
    let mut members: Vec<Arc<dyn Predictor>> = Vec::with_capacity(cfg.members);
    for _ in 0..cfg.members {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let bx: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
        let by: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        members.push(Arc::new(LinearMember { theta: ridge_logistic(&bx, &by, cfg.ridge)? }));
    }
    Committee::equal(members)
}

/// Two-class acquisition loop with a random-sampling baseline run alongside.
pub fn active_learning_demo(cfg: &ActiveConfig, rng: &mut impl Rng) -> Result<Vec<RoundLog>> {
    if cfg.members == 0 || cfg.initial < 2 || cfg.pool < cfg.rounds || cfg.test == 0 {
        return Err(Error::InvalidParam("inconsistent active-learning configuration".into()));
    }
    let (pool_x, pool_y) = draw_two_class(cfg.pool, rng);
    let (test_x, test_y) = draw_two_class(cfg.test, rng);
    let (mut lx, mut ly) = draw_two_class(cfg.initial, rng);
    // guarantee both classes in the seed set
    ly[0] = 0.0;
    ly[1] = 1.0;
    let (mut rx, mut ry) = (lx.clone(), ly.clone());
    let mut available: Vec<usize> = (0..cfg.pool).collect();
    let mut random_available = available.clone();
    let mut log = Vec::with_capacity(cfg.rounds);
    for round in 1..=cfg.rounds {
        let committee = bootstrap_committee(&lx, &ly, cfg, rng)?;
        let cand: Vec<Vec<f64>> = available.iter().map(|&i| pool_x[i].clone()).collect();
        let (pos, value) = select_next(&committee, &cand, cfg.gamma)?;
        let chosen = available.remove(pos);
        lx.push(pool_x[chosen].clone());
        ly.push(pool_y[chosen]);
        let r = random_available.remove(rng.random_range(0..random_available.len()));
        rx.push(pool_x[r].clone());
        ry.push(pool_y[r]);
        let theta = ridge_logistic(&lx, &ly, cfg.ridge)?;
        let theta_r = ridge_logistic(&rx, &ry, cfg.ridge)?;
        log.push(RoundLog {
            round,
            chosen,
            acquisition: value,
            test_accuracy: accuracy(&theta, &test_x, &test_y),
            random_accuracy: accuracy(&theta_r, &test_x, &test_y),
        });
    }
    Ok(log)
}
