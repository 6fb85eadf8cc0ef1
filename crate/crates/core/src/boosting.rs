//! Stagewise boosting of decision stumps under exponential, GM, γ and
//! imbalance-adjusted losses.
//!
//! Binary labels are coded ±1 and the γ-expression is the logistic pmf
//! p(y|f) = e^{yf}/(e^{f}+e^{−f}) evaluated at (γ+1)f. Multiclass labels are
//! 0..k and predictors live on the zero-sum subspace through the embedding
//! f_h(x) = (I(h(x) = y) − 1/k)_y.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::kernels::{self, BinaryLoss};

/// Golden-section minimizer of a unimodal function on [lo, hi].
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Golden section on [−5, 5], widened while the minimizer sits on an end.
pub fn line_minimize(f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    let mut half = 5.0;
    loop {
        let a = golden_section(&f, -half, half, tol);
        if half - a.abs() > 10.0 * tol || half >= 1e3 {
            return a;
        }
        half *= 4.0;
    }
}

/// Zero of a nondecreasing function, bracketed outward from [−5, 5] and bisected
/// to machine precision.
pub fn increasing_root(d: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (-5.0, 5.0);
    while d(lo) > 0.0 && lo > -1e3 {
        hi = lo;
        lo *= 4.0;
    }
    while d(hi) < 0.0 && hi < 1e3 {
        lo = hi;
        hi *= 4.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if d(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Rows with integer labels: ±1 for binary problems, 0..k for multiclass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledData {
    n: usize,
    d: usize,
    x: Vec<f64>,
    y: Vec<i32>,
}

impl LabeledData {
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<i32>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || n != y.len() {
            return Err(Error::InvalidData("rows and labels must be nonempty and aligned".into()));
        }
        let d = rows[0].len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidData("ragged feature rows".into()));
        }
        let x: Vec<f64> = rows.concat();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite feature".into()));
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

    pub fn y(&self) -> &[i32] {
        &self.y
    }

    fn check_binary(&self) -> Result<()> {
        if self.y.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::InvalidData("binary labels must be ±1".into()));
        }
        if !self.y.contains(&1) || !self.y.contains(&-1) {
            return Err(Error::InvalidData("both classes must be present".into()));
        }
        Ok(())
    }

    fn check_multiclass(&self, k: usize) -> Result<()> {
        if k < 2 {
            return Err(Error::InvalidParam("need at least two classes".into()));
        }
        let mut seen = vec![false; k];
        for &v in &self.y {
            if v < 0 || v as usize >= k {
                return Err(Error::InvalidData(format!("label {v} outside 0..{k}")));
            }
            seen[v as usize] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidData("every class must be present".into()));
        }
        Ok(())
    }
}

/// Axis-aligned stump: `above` when x_f > threshold, otherwise `below`.
/// Binary stumps output ±1 with `above = polarity`; multiclass stumps output class indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub above: i32,
    pub below: i32,
}

impl Stump {
    pub fn eval(&self, x: &[f64]) -> i32 {
        if x[self.feature] > self.threshold {
            self.above
        } else {
            self.below
        }
    }

    pub fn polarity(&self) -> i32 {
        self.above
    }
}

/// Finds the stump maximizing Σ gain_i(assigned class) with distinct sides.
/// `gain` is n × m (row-major), `labels` maps class slots to output labels.
fn best_stump(data: &LabeledData, gain: &[f64], labels: &[i32]) -> Option<(Stump, f64)> {
    let m = labels.len();
    let n = data.n;
    let mut total = vec![0.0; m];
    for i in 0..n {
        for c in 0..m {
            total[c] += gain[i * m + c];
        }
    }
    // gains within this margin count as ties and keep the earlier stump
    let tie = 1e-12 * gain.iter().map(|v| v.abs()).sum::<f64>();
    let per_feature: Vec<Option<(Stump, f64)>> = (0..data.d)
        .into_par_iter()
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| data.x[a * data.d + f].total_cmp(&data.x[b * data.d + f]));
            let mut left = vec![0.0; m];
            let mut best: Option<(Stump, f64)> = None;
            for pos in 0..n - 1 {
                let i = idx[pos];
                for c in 0..m {
                    left[c] += gain[i * m + c];
                }
                let v0 = data.x[i * data.d + f];
                let v1 = data.x[idx[pos + 1] * data.d + f];
                if v1 <= v0 {
                    continue;
                }
                let thr = 0.5 * (v0 + v1);
                for hi in 0..m {
                    for lo in 0..m {
                        if hi == lo {
                            continue;
                        }
                        let g = left[lo] + total[hi] - left[hi];
                        if best.as_ref().is_none_or(|b| g > b.1 + tie) {
                            let s = Stump { feature: f, threshold: thr, above: labels[hi], below: labels[lo] };
                            best = Some((s, g));
                        }
                    }
                }
            }
            best
        })
        .collect();
    let mut best: Option<(Stump, f64)> = None;
    for cand in per_feature.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| cand.1 > b.1 + tie) {
            best = Some(cand);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoostLoss {
    /// AdaBoost: (1/n) Σ exp(−Y f).
    Exponential,
    /// Bernoulli GM loss with r = ½ at ω = 2f, i.e. half the exponential loss.
    Gm,
    /// −(1/γ) p^{(γ)}(Y|f)^{γ/(γ+1)}; γ = 0 is the logistic log loss.
    Gamma(f64),
    /// (1/n) Σ π_{other} exp(−π_{own} Y f) with positive-class prior π₁.
    Imbalanced { pi1: f64 },
    /// Multiclass γ-loss on the zero-sum predictor space.
    MulticlassGamma { k: usize, gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostStep {
    pub alpha: f64,
    pub stump: Stump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub loss: BoostLoss,
    pub steps: Vec<BoostStep>,
    /// Training loss after each step, starting with f ≡ 0.
    pub trace: Vec<f64>,
    pub flags: Vec<String>,
    /// Observation weights after the last step (multiplicative recursion for
    /// the exponential-type losses, −∂ℓ/∂m otherwise).
    #[serde(skip, default)]
    pub weights: Vec<f64>,
}

impl Ensemble {
    pub fn classes(&self) -> usize {
        match self.loss {
            BoostLoss::MulticlassGamma { k, .. } => k,
            _ => 2,
        }
    }

    /// Additive binary score Σ α_t h_t(x) over the first `upto` steps.
    pub fn score(&self, x: &[f64], upto: usize) -> f64 {
        self.steps[..upto.min(self.steps.len())]
            .iter()
            .map(|s| s.alpha * s.stump.eval(x) as f64)
            .sum()
    }

    /// Zero-sum multiclass predictor Σ α_t f_{h_t}(x).
    pub fn class_scores(&self, x: &[f64], upto: usize) -> Vec<f64> {
        let k = self.classes();
        let mut f = vec![0.0; k];
        for s in &self.steps[..upto.min(self.steps.len())] {
            add_embedded(&mut f, s.stump.eval(x) as usize, s.alpha);
        }
        f
    }

    /// Sign of the score (−1 on ties) or the lowest argmax class.
    pub fn predict(&self, x: &[f64]) -> i32 {
        match self.loss {
            BoostLoss::MulticlassGamma { .. } => {
                let f = self.class_scores(x, self.steps.len());
                let mut best = 0;
                for (c, v) in f.iter().enumerate() {
                    if *v > f[best] {
                        best = c;
                    }
                }
                best as i32
            }
            _ => {
                if self.score(x, self.steps.len()) > 0.0 {
                    1
                } else {
                    -1
                }
            }
        }
    }

    pub fn accuracy(&self, data: &LabeledData) -> f64 {
        let hits = (0..data.n).filter(|&i| self.predict(data.row(i)) == data.y[i]).count();
        hits as f64 / data.n as f64
    }
}

fn add_embedded(f: &mut [f64], h: usize, alpha: f64) {
    let k = f.len() as f64;
    for (c, v) in f.iter_mut().enumerate() {
        *v += alpha * (if c == h { 1.0 } else { 0.0 } - 1.0 / k);
    }
}

/// Exponential loss (1/n) Σ exp(−Y_i f_i).
pub fn exp_loss(f: &[f64], y: &[i32]) -> f64 {
    f.iter().zip(y).map(|(fi, &yi)| (-(yi as f64) * fi).exp()).sum::<f64>() / f.len() as f64
}

/// p^{(γ)}(Y|f) = σ(2(γ+1) Y f).
fn escort(g: f64, m: f64) -> f64 {
    kernels::sigmoid(2.0 * (g + 1.0) * m)
}

/// π_γ(Y, f) = p^{(γ)}(+1) p^{(γ)}(−1) / p^{(γ)}(Y)^{1/(γ+1)} at margin m = Y f.
pub fn gamma_weight(g: f64, m: f64) -> f64 {
    let py = escort(g, m);
    let pn = escort(g, -m);
    py * pn / py.powf(1.0 / (g + 1.0))
}

fn class_priors(pi1: f64) -> Result<(f64, f64)> {
    if !(pi1 > 0.0 && pi1 < 1.0) {
        return Err(Error::InvalidParam("class prior must lie in (0,1)".into()));
    }
    Ok((pi1, 1.0 - pi1))
}

/// Per-observation binary loss at margin m = Y f (label needed for the imbalance weights).
fn binary_loss(loss: BoostLoss, y: i32, m: f64) -> Result<f64> {
    Ok(match loss {
        BoostLoss::Exponential => (-m).exp(),
        BoostLoss::Gm => {
            let y01 = if y > 0 { 1.0 } else { 0.0 };
            kernels::binary(BinaryLoss::Gm(0.5), y01, 2.0 * y as f64 * m)?.0
        }
        BoostLoss::Gamma(g) if g.abs() < 1e-12 => kernels::softplus(-2.0 * m),
        BoostLoss::Gamma(g) => -escort(g, m).powf(g / (g + 1.0)) / g,
        BoostLoss::Imbalanced { pi1 } => {
            let (p1, p0) = class_priors(pi1)?;
            let (own, other) = if y > 0 { (p1, p0) } else { (p0, p1) };
            other * (-own * m).exp()
        }
        BoostLoss::MulticlassGamma { .. } => unreachable!("binary path"),
    })
}

/// −∂ℓ/∂m, the stump-selection weight.
fn binary_weight(loss: BoostLoss, y: i32, m: f64) -> Result<f64> {
    Ok(match loss {
        BoostLoss::Exponential => (-m).exp(),
        BoostLoss::Gm => {
            let y01 = if y > 0 { 1.0 } else { 0.0 };
            let (_, dw) = kernels::binary(BinaryLoss::Gm(0.5), y01, 2.0 * y as f64 * m)?;
            -dw * 2.0 * y as f64
        }
        BoostLoss::Gamma(g) => 2.0 * gamma_weight(g, m),
        BoostLoss::Imbalanced { pi1 } => {
            let (p1, p0) = class_priors(pi1)?;
            let (own, other) = if y > 0 { (p1, p0) } else { (p0, p1) };
            other * own * (-own * m).exp()
        }
        BoostLoss::MulticlassGamma { .. } => unreachable!("binary path"),
    })
}

fn mean_loss(loss: BoostLoss, y: &[i32], margins: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (yi, m) in y.iter().zip(margins) {
        s += binary_loss(loss, *yi, *m)?;
    }
    Ok(s / y.len() as f64)
}

const LINE_TOL: f64 = 1e-10;

/// Binary boosting for T rounds under `loss`.
pub fn train_binary(data: &LabeledData, t_max: usize, loss: BoostLoss) -> Result<Ensemble> {
    data.check_binary()?;
    if t_max == 0 {
        return Err(Error::InvalidParam("T must be at least 1".into()));
    }
    match loss {
        BoostLoss::Gamma(g) if (g + 1.0).abs() < 1e-12 || !g.is_finite() => {
            return Err(Error::InvalidParam("γ-boost needs γ ≠ −1".into()))
        }
        BoostLoss::Imbalanced { pi1 } => {
            class_priors(pi1)?;
        }
        BoostLoss::MulticlassGamma { .. } => {
            return Err(Error::InvalidParam("use train_multiclass_gamma_boost".into()))
        }
        _ => {}
    }
    let n = data.n;
    let y = &data.y;
    let mut margins = vec![0.0; n];
    // multiplicative weights of the AdaBoost-type recursions
    let mut w = vec![1.0 / n as f64; n];
    let mut ens = Ensemble {
        loss,
        steps: Vec::new(),
        trace: vec![mean_loss(loss, y, &margins)?],
        flags: Vec::new(),
        weights: Vec::new(),
    };
    let labels = [-1, 1];
    for _ in 0..t_max {
        let u: Vec<f64> = match loss {
            BoostLoss::Exponential => w.clone(),
            BoostLoss::Imbalanced { pi1 } => {
                let (p1, p0) = class_priors(pi1)?;
                (0..n)
                    .map(|i| if y[i] > 0 { p0 * p1 * w[i] } else { p1 * p0 * w[i] })
                    .collect()
            }
            _ => (0..n).map(|i| binary_weight(loss, y[i], margins[i])).collect::<Result<_>>()?,
        };
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { detail: "boosting weights".into(), iterations: ens.steps.len(), last: u });
        }
        let mass: f64 = u.iter().sum();
        if !(mass > 1e-300) {
            ens.flags.push(format!("weights vanished at step {}; stopped early", ens.steps.len() + 1));
            break;
        }
        let mut gain = vec![0.0; 2 * n];
        for i in 0..n {
            gain[2 * i + usize::from(y[i] > 0)] = u[i];
        }
        let Some((stump, _)) = best_stump(data, &gain, &labels) else {
            return Err(Error::InvalidData("no feature has two distinct values".into()));
        };
        let yh: Vec<f64> = (0..n).map(|i| (y[i] * stump.eval(data.row(i))) as f64).collect();
        let alpha = match loss {
            BoostLoss::Exponential => {
                let err: f64 = (0..n).filter(|&i| yh[i] < 0.0).map(|i| w[i]).sum::<f64>() / mass;
                let eps = 1e-12;
                if err < eps {
                    ens.flags.push(format!("zero weighted error at step {}; α capped", ens.steps.len() + 1));
                }
                let e = err.clamp(eps, 1.0 - eps);
                0.5 * ((1.0 - e) / e).ln()
            }
            _ => {
                let obj = |a: f64| {
                    let m: Vec<f64> = margins.iter().zip(&yh).map(|(m, s)| m + a * s).collect();
                    mean_loss(loss, y, &m).unwrap_or(f64::INFINITY)
                };
                let a = match loss {
                    BoostLoss::Gamma(_) => golden_section(&obj, -5.0, 5.0, LINE_TOL),
                    // convex in α: solve the stationarity equation instead
                    _ => increasing_root(|a| {
                        let mut s = 0.0;
                        for i in 0..n {
                            s -= binary_weight(loss, y[i], margins[i] + a * yh[i]).unwrap_or(f64::NAN) * yh[i];
                        }
                        s
                    }),
                };
                if obj(a) <= obj(0.0) {
                    a
                } else {
                    0.0
                }
            }
        };
        for i in 0..n {
            margins[i] += alpha * yh[i];
        }
        match loss {
            BoostLoss::Exponential => {
                for i in 0..n {
                    w[i] *= (-alpha * yh[i]).exp();
                }
            }
            BoostLoss::Imbalanced { pi1 } => {
                let (p1, p0) = class_priors(pi1)?;
                for i in 0..n {
                    let own = if y[i] > 0 { p1 } else { p0 };
                    w[i] *= (-own * alpha * yh[i]).exp();
                }
            }
            _ => {}
        }
        ens.steps.push(BoostStep { alpha, stump });
        ens.trace.push(mean_loss(loss, y, &margins)?);
        if alpha == 0.0 {
            ens.flags.push(format!("no descent at step {}; stopped early", ens.steps.len()));
            break;
        }
    }
    ens.weights = match loss {
        BoostLoss::Exponential | BoostLoss::Imbalanced { .. } => w,
        _ => (0..n).map(|i| binary_weight(loss, y[i], margins[i])).collect::<Result<_>>()?,
    };
    Ok(ens)
}

/// AdaBoost with the closed-form α_t = ½ log((1 − err)/err).
pub fn train_adaboost(data: &LabeledData, t_max: usize) -> Result<Ensemble> {
    train_binary(data, t_max, BoostLoss::Exponential)
}

/// Boosting under the Bernoulli GM loss (r = ½).
pub fn train_gm_boost(data: &LabeledData, t_max: usize) -> Result<Ensemble> {
    train_binary(data, t_max, BoostLoss::Gm)
}

pub fn train_gamma_boost(data: &LabeledData, t_max: usize, g: f64) -> Result<Ensemble> {
    train_binary(data, t_max, BoostLoss::Gamma(g))
}

/// Imbalance-adjusted AdaBoost; `pi1 = None` estimates the prior from the labels.
pub fn train_adaboost_imbalanced(data: &LabeledData, t_max: usize, pi1: Option<f64>) -> Result<Ensemble> {
    let p = match pi1 {
        Some(p) => p,
        None => data.y.iter().filter(|&&v| v > 0).count() as f64 / data.n as f64,
    };
    train_binary(data, t_max, BoostLoss::Imbalanced { pi1: p })
}

/// (loss, u, p) for the multiclass γ-loss at predictor f and label y.
fn multi_terms(g: f64, f: &[f64], y: usize) -> (f64, f64, Vec<f64>) {
    let a = g + 1.0;
    let scaled: Vec<f64> = f.iter().map(|v| a * v).collect();
    let lse = kernels::log_sum_exp(&scaled);
    let p: Vec<f64> = scaled.iter().map(|v| (v - lse).exp()).collect();
    let log_q = scaled[y] - lse;
    if g.abs() < 1e-12 {
        (-log_q, 1.0, p)
    } else {
        let u = (g / a * log_q).exp();
        (-u / g, u, p)
    }
}

fn multi_mean_loss(g: f64, f: &[Vec<f64>], y: &[i32]) -> f64 {
    f.iter().zip(y).map(|(fi, &yi)| multi_terms(g, fi, yi as usize).0).sum::<f64>() / y.len() as f64
}

/// Multiclass γ-boost over embedded stumps.
pub fn train_multiclass_gamma_boost(data: &LabeledData, t_max: usize, k: usize, g: f64) -> Result<Ensemble> {
    data.check_multiclass(k)?;
    if (g + 1.0).abs() < 1e-12 || !g.is_finite() {
        return Err(Error::InvalidParam("γ-boost needs γ ≠ −1".into()));
    }
    if t_max == 0 {
        return Err(Error::InvalidParam("T must be at least 1".into()));
    }
    let n = data.n;
    let y = &data.y;
    let mut f = vec![vec![0.0; k]; n];
    let loss = BoostLoss::MulticlassGamma { k, gamma: g };
    let mut ens = Ensemble {
        loss,
        steps: Vec::new(),
        trace: vec![multi_mean_loss(g, &f, y)],
        flags: Vec::new(),
        weights: Vec::new(),
    };
    let labels: Vec<i32> = (0..k as i32).collect();
    for _ in 0..t_max {
        let mut gain = vec![0.0; n * k];
        let mut mass = 0.0;
        for i in 0..n {
            let yi = y[i] as usize;
            let (_, u, p) = multi_terms(g, &f[i], yi);
            mass += u;
            for c in 0..k {
                gain[i * k + c] = u * (if c == yi { 1.0 } else { 0.0 } - p[c]);
            }
        }
        if !(mass > 1e-300) {
            ens.flags.push(format!("weight mass vanished at step {}; stopped early", ens.steps.len() + 1));
            break;
        }
        let Some((stump, _)) = best_stump(data, &gain, &labels) else {
            return Err(Error::InvalidData("no feature has two distinct values".into()));
        };
        let h: Vec<usize> = (0..n).map(|i| stump.eval(data.row(i)) as usize).collect();
        let obj = |a: f64| {
            let mut s = 0.0;
            for i in 0..n {
                let mut fi = f[i].clone();
                add_embedded(&mut fi, h[i], a);
                s += multi_terms(g, &fi, y[i] as usize).0;
            }
            s / n as f64
        };
        let mut alpha = golden_section(&obj, -5.0, 5.0, LINE_TOL);
        if obj(alpha) > obj(0.0) {
            alpha = 0.0;
        }
        for i in 0..n {
            add_embedded(&mut f[i], h[i], alpha);
            debug_assert!(f[i].iter().sum::<f64>().abs() < 1e-9 * (1.0 + alpha.abs() * ens.steps.len() as f64));
        }
        ens.steps.push(BoostStep { alpha, stump });
        ens.trace.push(multi_mean_loss(g, &f, y));
        if alpha == 0.0 {
            ens.flags.push(format!("no descent at step {}; stopped early", ens.steps.len()));
            break;
        }
    }
    Ok(ens)
}
