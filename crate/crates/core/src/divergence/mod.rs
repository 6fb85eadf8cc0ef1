//! Power divergences between finite discrete distributions.
//!
//! A [`FinitePmf`] stores counting probabilities together with reference
//! weights `w = dΛ/dC`. The density against Λ is `p/w` and every integral is
//! evaluated as `Σ g(p/w)·w`. KL and α-divergences ignore the weights; the
//! β, γ, dual-γ, log-γ, GM and HM divergences depend on them.

pub mod closed;
pub mod raw;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use closed::{
    categorical_div, multinomial_div, normal_div, poisson_div, poisson_gm_div, CategoricalKind,
    NormalKind,
};

/// Tolerance band that routes γ to the KL or GM limit.
pub const DISPATCH_TOL: f64 = 1e-9;
const MIN_ATOM: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitePmf {
    labels: Vec<String>,
    probs: Vec<f64>,
    ref_weights: Vec<f64>,
}

impl FinitePmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let labels = (0..probs.len()).map(|i| i.to_string()).collect();
        Self::with_labels(labels, probs)
    }

    pub fn with_labels(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(Error::InvalidPmf(format!(
                "{} labels for {} probabilities",
                labels.len(),
                probs.len()
            )));
        }
        if probs.is_empty() {
            return Err(Error::InvalidPmf("empty support".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidPmf("negative or non-finite probability".into()));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidPmf(format!("probabilities sum to {s}")));
        }
        let k = probs.len();
        Ok(Self {
            labels,
            probs,
            ref_weights: vec![1.0; k],
        })
    }

    /// Normalizes a positive vector.
    pub fn from_unnormalized(values: Vec<f64>) -> Result<Self> {
        let s: f64 = values.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidPmf("nonpositive total mass".into()));
        }
        Self::new(values.into_iter().map(|v| v / s).collect())
    }

    pub fn with_ref_weights(mut self, w: Vec<f64>) -> Result<Self> {
        if w.len() != self.probs.len() {
            return Err(Error::InvalidPmf("reference weight length mismatch".into()));
        }
        if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidPmf("reference weights must be positive".into()));
        }
        self.ref_weights = w;
        Ok(self)
    }

    pub fn bernoulli(p1: f64) -> Result<Self> {
        Self::new(vec![1.0 - p1, p1])
    }

    /// Poisson pmf on 0..=ymax with reference weights 1/y!.
    pub fn poisson(lambda: f64, ymax: usize) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParam("Poisson intensity must be positive".into()));
        }
        let mut log_fact = 0.0;
        let mut probs = Vec::with_capacity(ymax + 1);
        let mut w = Vec::with_capacity(ymax + 1);
        for y in 0..=ymax {
            if y > 0 {
                log_fact += (y as f64).ln();
            }
            probs.push((y as f64 * lambda.ln() - lambda - log_fact).exp());
            w.push((-log_fact).exp().max(f64::MIN_POSITIVE));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!(
                "truncation at {ymax} loses mass {:e}",
                1.0 - s
            )));
        }
        Self::new(probs)?.with_ref_weights(w)
    }

    /// Multinomial MN(π, m) over all count vectors, carrier weights m!/Π y_j!.
    pub fn multinomial(pi: &[f64], m: usize) -> Result<Self> {
        check_prob_vector(pi)?;
        let mut labels = Vec::new();
        let mut probs = Vec::new();
        let mut w = Vec::new();
        for y in compositions(m, pi.len()) {
            let coef = multinomial_coef(m, &y);
            let dens: f64 = y.iter().zip(pi).map(|(&c, p)| p.powi(c as i32)).product();
            labels.push(
                y.iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
            probs.push(coef * dens);
            w.push(coef);
        }
        let s: f64 = probs.iter().sum();
        let probs = probs.into_iter().map(|p| p / s).collect();
        Self::with_labels(labels, probs)?.with_ref_weights(w)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn ref_weights(&self) -> &[f64] {
        &self.ref_weights
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Densities against the reference measure.
    pub fn densities(&self) -> Vec<f64> {
        self.probs
            .iter()
            .zip(&self.ref_weights)
            .map(|(p, w)| p / w)
            .collect()
    }

    fn require_positive(&self) -> Result<()> {
        if self.probs.iter().any(|&p| p < MIN_ATOM) {
            return Err(Error::InvalidPmf(
                "strictly positive probabilities required".into(),
            ));
        }
        Ok(())
    }
}

/// All count vectors of length `k` summing to `m`, in lexicographic order.
pub fn compositions(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(rem: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            cur.push(rem);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in 0..=rem {
            cur.push(c);
            rec(rem - c, k - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k > 0 {
        rec(m, k, &mut Vec::new(), &mut out);
    }
    out
}

pub fn multinomial_coef(m: usize, y: &[usize]) -> f64 {
    let lf = |n: usize| (1..=n).map(|i| (i as f64).ln()).sum::<f64>();
    (lf(m) - y.iter().map(|&c| lf(c)).sum::<f64>()).exp().round()
}

pub(crate) fn check_prob_vector(v: &[f64]) -> Result<()> {
    if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x >= MIN_ATOM)) {
        return Err(Error::InvalidPmf("strictly positive entries required".into()));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidPmf(format!("entries sum to {s}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DivergenceKind {
    KL,
    Alpha(f64),
    Beta(f64),
    Gamma(f64),
    DualGamma(f64),
    LogGamma(f64),
    GM,
    HM,
}

fn check_pair(p: &FinitePmf, q: &FinitePmf) -> Result<()> {
    if p.labels != q.labels {
        return Err(Error::SupportMismatch("label sets differ".into()));
    }
    let same_ref = p
        .ref_weights
        .iter()
        .zip(&q.ref_weights)
        .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()));
    if !same_ref {
        return Err(Error::SupportMismatch("reference measures differ".into()));
    }
    p.require_positive()?;
    q.require_positive()
}

fn near(x: f64, target: f64) -> bool {
    (x - target).abs() < DISPATCH_TOL
}

pub fn kl_div(p: &FinitePmf, q: &FinitePmf) -> Result<f64> {
    check_pair(p, q)?;
    Ok(raw::kl(&p.probs, &q.probs))
}

/// α-divergence (1/(α(1−α))) Σ p [1 − (q/p)^α].
pub fn alpha_div(p: &FinitePmf, q: &FinitePmf, a: f64) -> Result<f64> {
    check_pair(p, q)?;
    if near(a, 0.0) {
        Ok(raw::kl(&p.probs, &q.probs))
    } else if near(a, 1.0) {
        Ok(raw::kl(&q.probs, &p.probs))
    } else {
        Ok(raw::alpha(&p.probs, &q.probs, a))
    }
}

pub fn beta_div(p: &FinitePmf, q: &FinitePmf, b: f64) -> Result<f64> {
    check_pair(p, q)?;
    if near(b, 0.0) {
        Ok(raw::kl(&p.probs, &q.probs))
    } else if near(b, -1.0) {
        Ok(raw::itakura_saito(&p.probs, &q.probs, &p.ref_weights))
    } else {
        Ok(raw::beta(&p.probs, &q.probs, &p.ref_weights, b))
    }
}

pub fn gamma_div(p: &FinitePmf, q: &FinitePmf, g: f64) -> Result<f64> {
    check_pair(p, q)?;
    if near(g, 0.0) {
        Ok(raw::kl(&p.probs, &q.probs))
    } else if near(g, -1.0) {
        Ok(raw::gm(&p.probs, &q.probs, &p.ref_weights))
    } else {
        Ok(raw::gamma(&p.probs, &q.probs, &p.ref_weights, g))
    }
}

/// γ-cross entropy H_γ(p,q); convex-linear in `p`.
pub fn gamma_cross_entropy(p: &FinitePmf, q: &FinitePmf, g: f64) -> Result<f64> {
    check_pair(p, q)?;
    if near(g, 0.0) || near(g, -1.0) {
        return Err(Error::InvalidParam("γ-cross entropy needs γ ∉ {0, −1}".into()));
    }
    Ok(raw::gamma_cross(&p.probs, &q.probs, &p.ref_weights, g))
}

/// Dual γ-divergence H*_γ(p,q) − H*_γ(q,q).
pub fn dual_gamma_div(p: &FinitePmf, q: &FinitePmf, g: f64) -> Result<f64> {
    check_pair(p, q)?;
    if near(g, 0.0) {
        Ok(raw::kl(&p.probs, &q.probs))
    } else if near(g, -1.0) {
        Ok(raw::dual_gm(&p.probs, &q.probs, &p.ref_weights))
    } else {
        Ok(raw::dual_gamma(&p.probs, &q.probs, &p.ref_weights, g))
    }
}

pub fn log_gamma_div(p: &FinitePmf, q: &FinitePmf, g: f64) -> Result<f64> {
    check_pair(p, q)?;
    if near(g, 0.0) {
        Ok(raw::kl(&p.probs, &q.probs))
    } else if near(g, -1.0) {
        Ok(raw::log_gm(&p.probs, &q.probs, &p.ref_weights))
    } else {
        Ok(raw::log_gamma(&p.probs, &q.probs, &p.ref_weights, g))
    }
}

/// GM divergence with reference pmf `r`, using densities of `p`, `q`.
pub fn gm_div(p: &FinitePmf, q: &FinitePmf, r: &FinitePmf) -> Result<f64> {
    check_pair(p, q)?;
    if r.labels != p.labels {
        return Err(Error::SupportMismatch("reference pmf support differs".into()));
    }
    Ok(raw::gm_densities(&p.densities(), &q.densities(), &r.probs))
}

pub fn hm_div(p: &FinitePmf, q: &FinitePmf) -> Result<f64> {
    check_pair(p, q)?;
    Ok(raw::hm(&p.probs, &q.probs, &p.ref_weights))
}

/// Evaluates any [`DivergenceKind`]; GM uses the reference pmf ∝ ref_weights.
pub fn divergence(p: &FinitePmf, q: &FinitePmf, kind: DivergenceKind) -> Result<f64> {
    match kind {
        DivergenceKind::KL => kl_div(p, q),
        DivergenceKind::Alpha(a) => alpha_div(p, q, a),
        DivergenceKind::Beta(b) => beta_div(p, q, b),
        DivergenceKind::Gamma(g) => gamma_div(p, q, g),
        DivergenceKind::DualGamma(g) => dual_gamma_div(p, q, g),
        DivergenceKind::LogGamma(g) => log_gamma_div(p, q, g),
        DivergenceKind::GM => {
            check_pair(p, q)?;
            Ok(raw::gm(&p.probs, &q.probs, &p.ref_weights))
        }
        DivergenceKind::HM => hm_div(p, q),
    }
}
