//! Per-observation losses and their derivatives in the linear predictor.

use crate::error::{Error, Result};

pub(crate) const EXP_LIMIT: f64 = 700.0;

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn guarded_exp(x: f64, what: &str) -> Result<f64> {
    if x > EXP_LIMIT {
        return Err(Error::Overflow(format!("{what}: exponent {x:.3e}")));
    }
    Ok(x.exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinaryLoss {
    Ml,
    Gamma(f64),
    Gm(f64),
    Beta(f64),
}

/// Loss of a binary outcome `y ∈ {0,1}` with logit `w`, and d/dw.
pub fn binary(kind: BinaryLoss, y: f64, w: f64) -> Result<(f64, f64)> {
    match kind {
        BinaryLoss::Ml => Ok((softplus(w) - y * w, sigmoid(w) - y)),
        BinaryLoss::Gamma(g) => {
            let a = g + 1.0;
            let log_p = a * y * w - softplus(a * w);
            let e = guarded_exp(g / a * log_p, "binary γ-loss")?;
            Ok((-e / g, -e * (y - sigmoid(a * w))))
        }
        BinaryLoss::Gm(r) => {
            let log_l = y * r.ln() + (1.0 - y) * (1.0 - r).ln() + (r - y) * w;
            let l = guarded_exp(log_l, "binary GM-loss")?;
            Ok((l, l * (r - y)))
        }
        BinaryLoss::Beta(b) => {
            let p1 = sigmoid(w);
            let p0 = sigmoid(-w);
            let py = if y > 0.5 { p1 } else { p0 };
            let pb = py.powf(b);
            let loss = -pb / b + (p1.powf(b + 1.0) + p0.powf(b + 1.0)) / (b + 1.0);
            let d = -pb * (y - p1) + (p1.powf(b) - p0.powf(b)) * p1 * p0;
            Ok((loss, d))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MultiLoss {
    Ml,
    Gamma(f64),
    Gm(Vec<f64>),
    Beta(f64),
}

fn softmax(eta: &[f64], scale: f64) -> Vec<f64> {
    let m = eta.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(scale * b));
    let e: Vec<f64> = eta.iter().map(|&v| (scale * v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Loss of class `y` under class predictors `eta` (η₀ = 0); fills dℓ/dη.
pub fn multi(kind: &MultiLoss, y: usize, eta: &[f64], grad: &mut [f64]) -> Result<f64> {
    let k = eta.len();
    match kind {
        MultiLoss::Ml => {
            let p = softmax(eta, 1.0);
            for j in 0..k {
                grad[j] = p[j] - if j == y { 1.0 } else { 0.0 };
            }
            Ok(log_sum_exp(eta) - eta[y])
        }
        MultiLoss::Gamma(g) => {
            let a = g + 1.0;
            let scaled: Vec<f64> = eta.iter().map(|v| a * v).collect();
            let p = softmax(eta, a);
            let log_py = scaled[y] - log_sum_exp(&scaled);
            let e = guarded_exp(g / a * log_py, "multiclass γ-loss")?;
            for j in 0..k {
                grad[j] = -e * ((if j == y { 1.0 } else { 0.0 }) - p[j]);
            }
            Ok(-e / g)
        }
        MultiLoss::Gm(r) => {
            let bar: f64 = r.iter().zip(eta).map(|(a, b)| a * b).sum();
            let l = guarded_exp(r[y].ln() + bar - eta[y], "multiclass GM-loss")?;
            for j in 0..k {
                grad[j] = l * (r[j] - if j == y { 1.0 } else { 0.0 });
            }
            Ok(l)
        }
        MultiLoss::Beta(b) => {
            let p = softmax(eta, 1.0);
            let s: f64 = p.iter().map(|v| v.powf(b + 1.0)).sum();
            let pyb = p[y].powf(*b);
            for j in 0..k {
                let dy = if j == y { 1.0 } else { 0.0 };
                grad[j] = -pyb * (dy - p[j]) + p[j].powf(b + 1.0) - p[j] * s;
            }
            Ok(-pyb / b + s / (b + 1.0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormalLoss {
    Ml,
    Gamma(f64),
    Beta(f64),
    Huber(f64),
    Tukey(f64),
}

/// Normal loss in the residual r = y − w with known σ²; derivative in w.
pub fn normal(kind: NormalLoss, y: f64, w: f64, s2: f64) -> (f64, f64) {
    let r = y - w;
    match kind {
        NormalLoss::Ml => (r * r / (2.0 * s2), -r / s2),
        NormalLoss::Gamma(g) => {
            let e = (-g * r * r / (2.0 * s2)).exp();
            (-e / g, -e * r / s2)
        }
        NormalLoss::Beta(b) => {
            let c = (2.0 * std::f64::consts::PI * s2).powf(-b / 2.0);
            let e = (-b * r * r / (2.0 * s2)).exp();
            (-c * e / b, -c * e * r / s2)
        }
        NormalLoss::Huber(k) => {
            let s = s2.sqrt();
            let z = r / s;
            let rho = if z.abs() <= k { 0.5 * z * z } else { k * z.abs() - 0.5 * k * k };
            (rho, -z.clamp(-k, k) / s)
        }
        NormalLoss::Tukey(c) => {
            let s = s2.sqrt();
            let z = r / s;
            if z.abs() <= c {
                let u = 1.0 - (z / c).powi(2);
                (c * c / 6.0 * (1.0 - u * u * u), -z * u * u / s)
            } else {
                (c * c / 6.0, 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoissonLoss {
    Ml,
    Gamma(f64),
    Gm(f64),
}

/// Poisson loss of count `y` at log-intensity `w` (log y! dropped).
pub fn poisson(kind: PoissonLoss, y: f64, w: f64) -> Result<(f64, f64)> {
    match kind {
        PoissonLoss::Ml => {
            let mu = guarded_exp(w, "Poisson intensity")?;
            Ok((mu - y * w, mu - y))
        }
        PoissonLoss::Gamma(g) => {
            let a = g + 1.0;
            let mu = guarded_exp(a * w, "Poisson γ-intensity")?;
            let e = guarded_exp(g * y * w - g / a * mu, "Poisson γ-loss")?;
            Ok((-e / g, -e * (y - mu)))
        }
        PoissonLoss::Gm(tau) => {
            let l = guarded_exp(y * tau.ln() - tau + (tau - y) * w, "Poisson GM-loss")?;
            Ok((l, l * (tau - y)))
        }
    }
}
