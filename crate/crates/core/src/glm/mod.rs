//! Generalized linear models under minimum-divergence losses.
//!
//! Covariates are augmented with a leading 1 internally. Parameter layouts:
//!
//! | family | layout |
//! |--------|--------|
//! | Normal, Bernoulli, Poisson | `[θ₀, θ₁…]` (d + 1) |
//! | Categorical{k} | classes 1..k−1, each `[θ₀, θ₁…]`; class 0 fixed at zero |
//! | Ordinal{k} | thresholds `θ₀0 ≤ … ≤ θ₀(k−1)`, then shared slope (k + d) |
//!
//! Reference measures: counting (Bernoulli, Categorical, Ordinal), 1/y!
//! (Poisson), Lebesgue (Normal). The Normal γ-loss drops its multiplicative
//! constant, so values compare only within a fixed (family, kind, γ).

pub mod geometry;
pub mod kernels;

use serde::{Deserialize, Serialize};

use crate::divergence::FinitePmf;
use crate::error::{Error, Result};
use crate::optim::{self, OptimConfig, Status};
use kernels::{BinaryLoss, MultiLoss, NormalLoss, PoissonLoss};

pub use geometry::{distance_to_boundary, margin_bound_diagnostics, orthogonal_decompose, MarginFamily, MarginSup};

const NEAR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Normal { sigma2: f64 },
    Bernoulli,
    Categorical { k: usize },
    Ordinal { k: usize },
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmSpec {
    pub family: Family,
    /// Number of covariates, intercept excluded.
    pub d: usize,
}

impl GlmSpec {
    pub fn new(family: Family, d: usize) -> Result<Self> {
        match family {
            Family::Normal { sigma2 } if !(sigma2 > 0.0) => {
                return Err(Error::InvalidParam("σ² must be positive".into()))
            }
            Family::Categorical { k } if k < 2 => {
                return Err(Error::InvalidParam("categorical needs k ≥ 2".into()))
            }
            Family::Ordinal { k } if k < 1 => {
                return Err(Error::InvalidParam("ordinal needs at least one cut".into()))
            }
            _ => {}
        }
        Ok(Self { family, d })
    }

    pub fn n_params(&self) -> usize {
        match self.family {
            Family::Categorical { k } => (k - 1) * (self.d + 1),
            Family::Ordinal { k } => k + self.d,
            _ => self.d + 1,
        }
    }

    pub fn reference_measure(&self) -> &'static str {
        match self.family {
            Family::Normal { .. } => "lebesgue",
            Family::Poisson => "inverse-factorial",
            _ => "counting",
        }
    }
}

/// Reference used by a GM loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GmRef {
    /// r = 1/2 (Bernoulli, Ordinal), uniform (Categorical), Po(1) (Poisson).
    Default,
    /// r ∈ (0,1) for binary outcomes, τ > 0 for Poisson.
    Scalar(f64),
    Pmf(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EstimatorKind {
    ML,
    Gamma(f64),
    GM(GmRef),
    HM,
    InverseWeightedGM,
    Huber(f64),
    Tukey(f64),
    Beta(f64),
}

impl EstimatorKind {
    pub fn label(&self) -> String {
        match self {
            EstimatorKind::ML => "ML".into(),
            EstimatorKind::Gamma(g) => format!("gamma({g})"),
            EstimatorKind::GM(GmRef::Default) => "GM".into(),
            EstimatorKind::GM(GmRef::Scalar(r)) => format!("GM({r})"),
            EstimatorKind::GM(GmRef::Pmf(_)) => "GM(pmf)".into(),
            EstimatorKind::HM => "HM".into(),
            EstimatorKind::InverseWeightedGM => "GM-iw".into(),
            EstimatorKind::Huber(k) => format!("huber({k})"),
            EstimatorKind::Tukey(c) => format!("tukey({c})"),
            EstimatorKind::Beta(b) => format!("beta({b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || n != y.len() {
            return Err(Error::InvalidData(format!("{n} rows for {} outcomes", y.len())));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidData("ragged covariate rows".into()));
        }
        let x: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_flat(n, d, x, y)
    }

    pub fn from_flat(n: usize, d: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n == 0 || x.len() != n * d || y.len() != n {
            return Err(Error::InvalidData("inconsistent dataset dimensions".into()));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite entry".into()));
        }
        Ok(Self { n, d, x, y })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    fn validate(&self, spec: &GlmSpec) -> Result<()> {
        if self.d != spec.d {
            return Err(Error::InvalidData(format!(
                "dataset has {} covariates, model expects {}",
                self.d, spec.d
            )));
        }
        let is_int = |v: f64| v >= 0.0 && v.fract() == 0.0;
        let bad = match spec.family {
            Family::Normal { .. } => None,
            Family::Bernoulli => self.y.iter().position(|&v| v != 0.0 && v != 1.0),
            Family::Categorical { k } => self.y.iter().position(|&v| !is_int(v) || v >= k as f64),
            Family::Ordinal { k } => self.y.iter().position(|&v| !is_int(v) || v > k as f64),
            Family::Poisson => self.y.iter().position(|&v| !is_int(v)),
        };
        match bad {
            Some(i) => Err(Error::InvalidData(format!(
                "outcome {} at row {i} invalid for {:?}",
                self.y[i], spec.family
            ))),
            None => Ok(()),
        }
    }
}

/// Linear predictor θ₀ + θ₁ᵀx.
pub fn linear_predictor(theta: &[f64], x: &[f64]) -> f64 {
    theta[0] + theta[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
enum Resolved {
    Normal(NormalLoss, f64),
    Binary(BinaryLoss),
    Multi(MultiLoss),
    Ordinal(BinaryLoss),
    Poisson(PoissonLoss),
}

fn class_freqs(data: &Dataset, k: usize) -> Vec<f64> {
    let mut c = vec![0.0; k];
    for &y in &data.y {
        c[y as usize] += 1.0;
    }
    c.iter().map(|v| v / data.n as f64).collect()
}

fn binary_kind(kind: &EstimatorKind, data: &Dataset, ordinal: bool) -> Result<BinaryLoss> {
    let r_of = |r: &GmRef| -> Result<f64> {
        let r = match r {
            GmRef::Default => 0.5,
            GmRef::Scalar(r) => *r,
            GmRef::Pmf(v) if v.len() == 2 => v[1],
            GmRef::Pmf(_) => return Err(Error::InvalidParam("binary GM needs a 2-atom pmf".into())),
        };
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidParam("GM reference r must lie in (0,1)".into()));
        }
        Ok(r)
    };
    Ok(match kind {
        EstimatorKind::ML => BinaryLoss::Ml,
        EstimatorKind::Gamma(g) if g.abs() < NEAR => BinaryLoss::Ml,
        EstimatorKind::Gamma(g) if (g + 1.0).abs() < NEAR => BinaryLoss::Gm(0.5),
        EstimatorKind::Gamma(g) => BinaryLoss::Gamma(*g),
        EstimatorKind::GM(r) => BinaryLoss::Gm(r_of(r)?),
        EstimatorKind::HM => BinaryLoss::Gamma(-2.0),
        EstimatorKind::InverseWeightedGM if !ordinal => {
            let pi0 = data.y.iter().filter(|&&v| v == 0.0).count() as f64 / data.n as f64;
            if !(pi0 > 0.0 && pi0 < 1.0) {
                return Err(Error::InvalidData("inverse weighting needs both classes".into()));
            }
            BinaryLoss::Gm(pi0)
        }
        EstimatorKind::Beta(b) if b.abs() < NEAR => BinaryLoss::Ml,
        EstimatorKind::Beta(b) if !ordinal => BinaryLoss::Beta(*b),
        other => {
            return Err(Error::InvalidParam(format!(
                "{} not available for this family",
                other.label()
            )))
        }
    })
}

fn resolve(spec: &GlmSpec, kind: &EstimatorKind, data: &Dataset) -> Result<Resolved> {
    match spec.family {
        Family::Normal { sigma2 } => {
            let nk = match kind {
                EstimatorKind::ML => NormalLoss::Ml,
                EstimatorKind::Gamma(g) if g.abs() < NEAR => NormalLoss::Ml,
                EstimatorKind::Gamma(g) if *g > -1.0 => NormalLoss::Gamma(*g),
                EstimatorKind::Beta(b) if b.abs() < NEAR => NormalLoss::Ml,
                EstimatorKind::Beta(b) if *b > 0.0 => NormalLoss::Beta(*b),
                EstimatorKind::Huber(k) if *k > 0.0 => NormalLoss::Huber(*k),
                EstimatorKind::Tukey(c) if *c > 0.0 => NormalLoss::Tukey(*c),
                other => {
                    return Err(Error::InvalidParam(format!(
                        "{} undefined for the normal family (γ ≤ −1 has no finite reference)",
                        other.label()
                    )))
                }
            };
            Ok(Resolved::Normal(nk, sigma2))
        }
        Family::Bernoulli => Ok(Resolved::Binary(binary_kind(kind, data, false)?)),
        Family::Ordinal { .. } => Ok(Resolved::Ordinal(binary_kind(kind, data, true)?)),
        Family::Categorical { k } => {
            let mk = match kind {
                EstimatorKind::ML => MultiLoss::Ml,
                EstimatorKind::Gamma(g) if g.abs() < NEAR => MultiLoss::Ml,
                EstimatorKind::Gamma(g) if (g + 1.0).abs() < NEAR => {
                    MultiLoss::Gm(vec![1.0 / k as f64; k])
                }
                EstimatorKind::Gamma(g) => MultiLoss::Gamma(*g),
                EstimatorKind::HM => MultiLoss::Gamma(-2.0),
                EstimatorKind::GM(GmRef::Default) => MultiLoss::Gm(vec![1.0 / k as f64; k]),
                EstimatorKind::GM(GmRef::Pmf(r)) => {
                    crate::divergence::check_prob_vector(r)?;
                    if r.len() != k {
                        return Err(Error::InvalidParam("GM reference pmf length".into()));
                    }
                    MultiLoss::Gm(r.clone())
                }
                EstimatorKind::InverseWeightedGM => {
                    let f = class_freqs(data, k);
                    if f.iter().any(|&v| v == 0.0) {
                        return Err(Error::InvalidData("inverse weighting needs every class".into()));
                    }
                    let inv: Vec<f64> = f.iter().map(|v| 1.0 / v).collect();
                    let s: f64 = inv.iter().sum();
                    MultiLoss::Gm(inv.into_iter().map(|v| v / s).collect())
                }
                EstimatorKind::Beta(b) if b.abs() < NEAR => MultiLoss::Ml,
                EstimatorKind::Beta(b) => MultiLoss::Beta(*b),
                other => {
                    return Err(Error::InvalidParam(format!(
                        "{} not available for the categorical family",
                        other.label()
                    )))
                }
            };
            Ok(Resolved::Multi(mk))
        }
        Family::Poisson => {
            let pk = match kind {
                EstimatorKind::ML => PoissonLoss::Ml,
                EstimatorKind::Gamma(g) if g.abs() < NEAR => PoissonLoss::Ml,
                EstimatorKind::Gamma(g) if (g + 1.0).abs() < NEAR => PoissonLoss::Gm(1.0),
                EstimatorKind::Gamma(g) => PoissonLoss::Gamma(*g),
                EstimatorKind::HM => PoissonLoss::Gamma(-2.0),
                EstimatorKind::GM(GmRef::Default) => PoissonLoss::Gm(1.0),
                EstimatorKind::GM(GmRef::Scalar(t)) if *t > 0.0 => PoissonLoss::Gm(*t),
                other => {
                    return Err(Error::InvalidParam(format!(
                        "{} not available for the Poisson family",
                        other.label()
                    )))
                }
            };
            Ok(Resolved::Poisson(pk))
        }
    }
}

fn check_theta(spec: &GlmSpec, theta: &[f64]) -> Result<()> {
    if theta.len() != spec.n_params() {
        return Err(Error::InvalidParam(format!(
            "θ has {} entries, model needs {}",
            theta.len(),
            spec.n_params()
        )));
    }
    if let Family::Ordinal { k } = spec.family {
        if theta[..k].windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParam("ordinal thresholds must be nondecreasing".into()));
        }
    }
    Ok(())
}

fn evaluate(spec: &GlmSpec, res: &Resolved, data: &Dataset, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_theta(spec, theta)?;
    let p = theta.len();
    let d = spec.d;
    let mut total = 0.0;
    let mut grad = vec![0.0; p];
    for i in 0..data.n {
        let x = data.row(i);
        let y = data.y[i];
        match res {
            Resolved::Normal(kind, s2) => {
                let (l, dl) = kernels::normal(*kind, y, linear_predictor(theta, x), *s2);
                total += l;
                add_scaled(&mut grad, dl, x);
            }
            Resolved::Binary(kind) => {
                let (l, dl) = kernels::binary(*kind, y, linear_predictor(theta, x))?;
                total += l;
                add_scaled(&mut grad, dl, x);
            }
            Resolved::Poisson(kind) => {
                let (l, dl) = kernels::poisson(*kind, y, linear_predictor(theta, x))?;
                total += l;
                add_scaled(&mut grad, dl, x);
            }
            Resolved::Multi(kind) => {
                let k = p / (d + 1) + 1;
                let eta = class_predictors(theta, x, k, d);
                let mut dl = vec![0.0; k];
                total += kernels::multi(kind, y as usize, &eta, &mut dl)?;
                for c in 1..k {
                    add_scaled(&mut grad[(c - 1) * (d + 1)..c * (d + 1)], dl[c], x);
                }
            }
            Resolved::Ordinal(kind) => {
                let k = p - d;
                let slope: f64 = theta[k..].iter().zip(x).map(|(a, b)| a * b).sum();
                for cut in 0..k {
                    let z = if y <= cut as f64 { 1.0 } else { 0.0 };
                    let (l, dl) = kernels::binary(*kind, z, theta[cut] + slope)?;
                    total += l;
                    grad[cut] += dl;
                    for (g, xv) in grad[k..].iter_mut().zip(x) {
                        *g += dl * xv;
                    }
                }
            }
        }
    }
    let n = data.n as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((total / n, grad))
}

fn add_scaled(grad: &mut [f64], c: f64, x: &[f64]) {
    grad[0] += c;
    for (g, v) in grad[1..].iter_mut().zip(x) {
        *g += c * v;
    }
}

fn class_predictors(theta: &[f64], x: &[f64], k: usize, d: usize) -> Vec<f64> {
    let mut eta = vec![0.0; k];
    for c in 1..k {
        eta[c] = linear_predictor(&theta[(c - 1) * (d + 1)..c * (d + 1)], x);
    }
    eta
}

/// Empirical mean loss at θ.
pub fn loss(spec: &GlmSpec, kind: &EstimatorKind, data: &Dataset, theta: &[f64]) -> Result<f64> {
    loss_and_score(spec, kind, data, theta).map(|(l, _)| l)
}

/// Gradient of [`loss`] in θ (the estimating function).
pub fn score(spec: &GlmSpec, kind: &EstimatorKind, data: &Dataset, theta: &[f64]) -> Result<Vec<f64>> {
    loss_and_score(spec, kind, data, theta).map(|(_, g)| g)
}

pub fn loss_and_score(
    spec: &GlmSpec,
    kind: &EstimatorKind,
    data: &Dataset,
    theta: &[f64],
) -> Result<(f64, Vec<f64>)> {
    data.validate(spec)?;
    let res = resolve(spec, kind, data)?;
    evaluate(spec, &res, data, theta)
}

/// Dichotomized ordinal loss and score; errors unless the family is ordinal.
pub fn ordinal_dichotomized_loss(
    spec: &GlmSpec,
    kind: &EstimatorKind,
    data: &Dataset,
    theta: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if !matches!(spec.family, Family::Ordinal { .. }) {
        return Err(Error::InvalidParam("ordinal family required".into()));
    }
    match kind {
        EstimatorKind::ML | EstimatorKind::Gamma(_) | EstimatorKind::GM(_) | EstimatorKind::HM => {
            loss_and_score(spec, kind, data, theta)
        }
        other => Err(Error::InvalidParam(format!("{} not defined for ordinal", other.label()))),
    }
}

/// Escort model p^{(γ)}(·|x,θ) = p(·|x,(γ+1)ω).
#[derive(Debug, Clone, PartialEq)]
pub enum GammaExpression {
    Pmf(FinitePmf),
    Poisson { intensity: f64 },
    Normal { mean: f64, variance: f64 },
}

pub fn gamma_expression(spec: &GlmSpec, theta: &[f64], x: &[f64], g: f64) -> Result<GammaExpression> {
    check_theta(spec, theta)?;
    if (g + 1.0).abs() < NEAR {
        return Err(Error::InvalidParam("γ = −1 gives a degenerate escort model".into()));
    }
    let a = g + 1.0;
    match spec.family {
        Family::Normal { sigma2 } => {
            if a <= 0.0 {
                return Err(Error::InvalidParam("normal escort needs γ > −1".into()));
            }
            Ok(GammaExpression::Normal {
                mean: linear_predictor(theta, x),
                variance: sigma2 / a,
            })
        }
        Family::Bernoulli => {
            let p1 = kernels::sigmoid(a * linear_predictor(theta, x));
            Ok(GammaExpression::Pmf(FinitePmf::new(vec![1.0 - p1, p1])?))
        }
        Family::Categorical { k } => {
            let eta: Vec<f64> = class_predictors(theta, x, k, spec.d).iter().map(|v| a * v).collect();
            let lse = kernels::log_sum_exp(&eta);
            let mut p: Vec<f64> = eta.iter().map(|v| (v - lse).exp()).collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= s);
            Ok(GammaExpression::Pmf(FinitePmf::new(p)?))
        }
        Family::Poisson => {
            let w = a * linear_predictor(theta, x);
            if w > kernels::EXP_LIMIT {
                return Err(Error::Overflow("Poisson escort intensity".into()));
            }
            Ok(GammaExpression::Poisson { intensity: w.exp() })
        }
        Family::Ordinal { .. } => Err(Error::InvalidParam(
            "ordinal models use dichotomized cuts, not an escort pmf".into(),
        )),
    }
}

/// Class probabilities of a categorical or ordinal model.
pub fn class_probs(spec: &GlmSpec, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_theta(spec, theta)?;
    match spec.family {
        Family::Bernoulli => {
            let p1 = kernels::sigmoid(linear_predictor(theta, x));
            Ok(vec![1.0 - p1, p1])
        }
        Family::Categorical { k } => {
            let eta = class_predictors(theta, x, k, spec.d);
            let lse = kernels::log_sum_exp(&eta);
            Ok(eta.iter().map(|v| (v - lse).exp()).collect())
        }
        Family::Ordinal { k } => {
            let slope: f64 = theta[k..].iter().zip(x).map(|(a, b)| a * b).sum();
            let cum: Vec<f64> = (0..k).map(|c| kernels::sigmoid(theta[c] + slope)).collect();
            let mut p = Vec::with_capacity(k + 1);
            p.push(cum[0]);
            for c in 1..k {
                p.push(cum[c] - cum[c - 1]);
            }
            p.push(1.0 - cum[k - 1]);
            Ok(p)
        }
        _ => Err(Error::InvalidParam("class probabilities need a discrete family".into())),
    }
}

fn argmax_lowest(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Bayes-rule class (ties to the lowest index) or the mean response.
pub fn predict(spec: &GlmSpec, theta: &[f64], x: &[f64]) -> Result<f64> {
    check_theta(spec, theta)?;
    match spec.family {
        Family::Normal { .. } => Ok(linear_predictor(theta, x)),
        Family::Poisson => Ok(linear_predictor(theta, x).exp()),
        Family::Bernoulli => Ok(if linear_predictor(theta, x) > 0.0 { 1.0 } else { 0.0 }),
        Family::Categorical { k } => {
            Ok(argmax_lowest(&class_predictors(theta, x, k, spec.d)) as f64)
        }
        Family::Ordinal { .. } => Ok(argmax_lowest(&class_probs(spec, theta, x)?) as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: Vec<f64>,
    pub status: Status,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub warnings: Vec<String>,
    pub sigma2: Option<f64>,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

fn is_redescending(res: &Resolved) -> bool {
    match res {
        Resolved::Normal(NormalLoss::Gamma(g), _) => *g > 0.0,
        Resolved::Normal(NormalLoss::Beta(_) | NormalLoss::Tukey(_), _) => true,
        Resolved::Binary(BinaryLoss::Gamma(g)) | Resolved::Ordinal(BinaryLoss::Gamma(g)) => {
            *g > 0.0 || *g < -1.0
        }
        Resolved::Binary(BinaryLoss::Beta(_)) => true,
        Resolved::Multi(MultiLoss::Gamma(g)) => *g > 0.0 || *g < -1.0,
        Resolved::Multi(MultiLoss::Beta(_)) => true,
        Resolved::Poisson(PoissonLoss::Gamma(g)) => *g > 0.0 || *g < -1.0,
        _ => false,
    }
}

fn default_init(spec: &GlmSpec, data: &Dataset) -> Vec<f64> {
    let mut init = vec![0.0; spec.n_params()];
    if let Family::Ordinal { k } = spec.family {
        let n = data.n as f64;
        for c in 0..k {
            let frac = data.y.iter().filter(|&&v| v <= c as f64).count() as f64 / n;
            let f = frac.clamp(0.5 / n, 1.0 - 0.5 / n);
            init[c] = (f / (1.0 - f)).ln();
        }
        for c in 1..k {
            init[c] = init[c].max(init[c - 1]);
        }
    }
    init
}

/// Smallest fitted probability of the observed outcome (or cut indicator).
fn min_observed_prob(spec: &GlmSpec, data: &Dataset, theta: &[f64]) -> Option<f64> {
    let mut m = f64::INFINITY;
    for i in 0..data.n {
        let x = data.row(i);
        let y = data.y[i];
        match spec.family {
            Family::Bernoulli | Family::Categorical { .. } => {
                let p = class_probs(spec, theta, x).ok()?;
                m = m.min(p[y as usize]);
            }
            Family::Ordinal { k } => {
                let slope: f64 = theta[k..].iter().zip(x).map(|(a, b)| a * b).sum();
                for c in 0..k {
                    let p1 = kernels::sigmoid(theta[c] + slope);
                    m = m.min(if y <= c as f64 { p1 } else { 1.0 - p1 });
                }
            }
            _ => return None,
        }
    }
    Some(m)
}

/// Minimizes the empirical loss. Redescending losses warm-start from ML.
pub fn fit(
    spec: &GlmSpec,
    kind: &EstimatorKind,
    data: &Dataset,
    init: Option<&[f64]>,
    cfg: &OptimConfig,
) -> Result<FitResult> {
    data.validate(spec)?;
    let res = resolve(spec, kind, data)?;
    let mut warnings = Vec::new();
    let start = match init {
        Some(v) => {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParam("initial value must be finite".into()));
            }
            v.to_vec()
        }
        None => {
            let base = default_init(spec, data);
            let is_ml = matches!(
                res,
                Resolved::Normal(NormalLoss::Ml, _)
                    | Resolved::Binary(BinaryLoss::Ml)
                    | Resolved::Multi(MultiLoss::Ml)
                    | Resolved::Ordinal(BinaryLoss::Ml)
                    | Resolved::Poisson(PoissonLoss::Ml)
            );
            if is_ml {
                base
            } else {
                match fit(spec, &EstimatorKind::ML, data, Some(&base), cfg) {
                    Ok(f) if f.theta.iter().all(|v| v.abs() < 1e3) => f.theta,
                    _ => base,
                }
            }
        }
    };
    let objective = |t: &[f64]| evaluate(spec, &res, data, t);
    let out = optim::minimize(objective, &start, cfg)?;
    let mut status = out.status;
    if is_redescending(&res) {
        warnings.push(format!(
            "redescending loss: local minima possible; achieved loss {:.6e}",
            out.value
        ));
    }
    let ml_like = matches!(
        res,
        Resolved::Binary(BinaryLoss::Ml) | Resolved::Multi(MultiLoss::Ml) | Resolved::Ordinal(BinaryLoss::Ml)
    );
    if ml_like {
        if let Some(m) = min_observed_prob(spec, data, &out.theta) {
            // every observation strictly on its own side: the data are linearly separable
            if m > 0.5 {
                status = Status::NonConverged;
                warnings.push("complete separation: coefficients diverge".into());
            }
        }
    }
    if status == Status::NonConverged && out.grad_norm >= cfg.tol {
        warnings.push(format!("no convergence: gradient norm {:.3e}", out.grad_norm));
    }
    Ok(FitResult {
        theta: out.theta,
        status,
        loss: out.value,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        warnings,
        sigma2: None,
    })
}

fn normal_weights(theta: &[f64], data: &Dataset, g: f64, s2: f64) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..data.n {
        let r = data.y[i] - linear_predictor(theta, data.row(i));
        let e = (-g * r * r / (2.0 * s2)).exp();
        num += e * r * r;
        den += e;
    }
    (num, den)
}

/// One dispersion update σ² ← (γ+1) Σ e r² / Σ e with e = exp{−γ r²/(2σ²)}.
pub fn sigma_joint_update(theta: &[f64], data: &Dataset, g: f64, s2: f64) -> Result<f64> {
    if !(s2 > 0.0) || g <= -1.0 {
        return Err(Error::InvalidParam("σ² > 0 and γ > −1 required".into()));
    }
    let (num, den) = normal_weights(theta, data, g, s2);
    let next = (g + 1.0) * num / den;
    if !(next > 1e-300) {
        return Err(Error::Degenerate("zero residuals: dispersion collapses to 0".into()));
    }
    Ok(next)
}

/// Joint (θ, σ²) fit for the Normal family by alternating θ-minimization
/// and dispersion fixed-point updates, warm-started from ML.
pub fn fit_normal_joint(g: f64, data: &Dataset, init: Option<&[f64]>, cfg: &OptimConfig) -> Result<FitResult> {
    if g <= -1.0 {
        return Err(Error::InvalidParam("γ > −1 required for the normal family".into()));
    }
    let d = data.d;
    let ml_spec = GlmSpec::new(Family::Normal { sigma2: 1.0 }, d)?;
    let ml = fit(&ml_spec, &EstimatorKind::ML, data, init, cfg)?;
    let mut theta = ml.theta.clone();
    let mut s2 = data
        .y
        .iter()
        .enumerate()
        .map(|(i, y)| (y - linear_predictor(&theta, data.row(i))).powi(2))
        .sum::<f64>()
        / data.n as f64;
    let scale = data.y.iter().map(|y| y * y).sum::<f64>() / data.n as f64;
    if !(s2 > 1e-14 * scale.max(1.0)) {
        return Err(Error::Degenerate("zero residuals: dispersion collapses to 0".into()));
    }
    if g.abs() < NEAR {
        return Ok(FitResult { sigma2: Some(s2), ..ml });
    }
    let mut last = ml;
    let mut warnings = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iter.min(200) {
        let spec = GlmSpec::new(Family::Normal { sigma2: s2 }, d)?;
        let f = fit(&spec, &EstimatorKind::Gamma(g), data, Some(&theta), cfg)?;
        let mut s2_new = s2;
        for _ in 0..cfg.max_iter {
            let nxt = sigma_joint_update(&f.theta, data, g, s2_new)?;
            let done = (nxt - s2_new).abs() < 1e-12 * s2_new;
            s2_new = nxt;
            if done {
                break;
            }
        }
        let dtheta = f
            .theta
            .iter()
            .zip(&theta)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let ds2 = (s2_new - s2).abs() / s2;
        theta = f.theta.clone();
        s2 = s2_new;
        last = f;
        if dtheta < 1e-8 && ds2 < 1e-8 {
            converged = true;
            break;
        }
    }
    warnings.extend(last.warnings.iter().cloned());
    if !converged {
        warnings.push("joint (θ, σ²) iteration did not settle".into());
    }
    let spec = GlmSpec::new(Family::Normal { sigma2: s2 }, d)?;
    let (l, gr) = loss_and_score(&spec, &EstimatorKind::Gamma(g), data, &theta)?;
    let gn = gr.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(FitResult {
        theta,
        status: if converged && gn < cfg.tol { Status::Converged } else { Status::NonConverged },
        loss: l,
        grad_norm: gn,
        iterations: last.iterations,
        warnings,
        sigma2: Some(s2),
    })
}
