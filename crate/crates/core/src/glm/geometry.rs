//! Decision-boundary geometry and bounded-influence diagnostics.

use serde::{Deserialize, Serialize};

use super::kernels::{self, BinaryLoss, MultiLoss, NormalLoss, PoissonLoss};
use super::NEAR;
use crate::error::{Error, Result};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Euclidean distance from `x` to the hyperplane θ₀ + θ₁ᵀx = 0.
pub fn distance_to_boundary(x: &[f64], theta: &[f64]) -> Result<f64> {
    if theta.len() != x.len() + 1 {
        return Err(Error::InvalidParam("θ must be [θ₀, θ₁] with θ₁ matching x".into()));
    }
    let n1 = norm(&theta[1..]);
    if n1 == 0.0 {
        return Err(Error::InvalidParam("zero slope vector".into()));
    }
    Ok(super::linear_predictor(theta, x).abs() / n1)
}

/// Splits `x` into its component along θ₁ and the orthogonal remainder.
pub fn orthogonal_decompose(x: &[f64], theta1: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != theta1.len() {
        return Err(Error::InvalidParam("dimension mismatch".into()));
    }
    let nn: f64 = theta1.iter().map(|a| a * a).sum();
    if nn == 0.0 {
        return Err(Error::InvalidParam("zero θ₁".into()));
    }
    let c = theta1.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / nn;
    let z: Vec<f64> = theta1.iter().map(|a| c * a).collect();
    let w: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a - b).collect();
    Ok((z, w))
}

/// Outcome model used for the influence scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MarginFamily {
    Bernoulli,
    /// Class predictors η = s·b, b[0] = 0 by convention.
    Categorical { b: Vec<f64> },
    Normal { sigma2: f64, ys: Vec<f64> },
    Poisson { ymax: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginSup {
    pub sup: f64,
    pub arg_s: f64,
    pub arg_y: f64,
}

/// Grid supremum of |s · ∂ℓ/∂s| over s ∈ [−radius, radius] and all outcomes.
/// γ = 0 scans the log loss, γ = −1 the GM loss, anything else the γ-loss.
pub fn margin_bound_diagnostics(
    family: &MarginFamily,
    g: f64,
    radius: f64,
    spacing: f64,
) -> Result<MarginSup> {
    if !(radius > 0.0 && spacing > 0.0) || !g.is_finite() {
        return Err(Error::InvalidParam("radius and spacing must be positive".into()));
    }
    let ml = g.abs() < NEAR;
    let gm = (g + 1.0).abs() < NEAR;
    let steps = (radius / spacing).round() as i64;
    let mut best = MarginSup { sup: 0.0, arg_s: 0.0, arg_y: 0.0 };
    let mut consider = |val: Result<f64>, s: f64, y: f64| {
        let v = match val {
            Ok(v) => (s * v).abs(),
            Err(_) => f64::INFINITY,
        };
        if v > best.sup {
            best = MarginSup { sup: v, arg_s: s, arg_y: y };
        }
    };
    match family {
        MarginFamily::Bernoulli => {
            let kind = if ml {
                BinaryLoss::Ml
            } else if gm {
                BinaryLoss::Gm(0.5)
            } else {
                BinaryLoss::Gamma(g)
            };
            for i in -steps..=steps {
                let s = i as f64 * spacing;
                for y in [0.0, 1.0] {
                    consider(kernels::binary(kind, y, s).map(|r| r.1), s, y);
                }
            }
        }
        MarginFamily::Categorical { b } => {
            let k = b.len();
            if k < 2 {
                return Err(Error::InvalidParam("categorical needs k ≥ 2".into()));
            }
            let kind = if ml {
                MultiLoss::Ml
            } else if gm {
                MultiLoss::Gm(vec![1.0 / k as f64; k])
            } else {
                MultiLoss::Gamma(g)
            };
            let mut grad = vec![0.0; k];
            for i in -steps..=steps {
                let s = i as f64 * spacing;
                let eta: Vec<f64> = b.iter().map(|v| s * v).collect();
                for y in 0..k {
                    let d = kernels::multi(&kind, y, &eta, &mut grad)
                        .map(|_| grad.iter().zip(b).map(|(a, c)| a * c).sum::<f64>());
                    consider(d, s, y as f64);
                }
            }
        }
        MarginFamily::Normal { sigma2, ys } => {
            if !(*sigma2 > 0.0) {
                return Err(Error::InvalidParam("σ² must be positive".into()));
            }
            let kind = if ml {
                NormalLoss::Ml
            } else if g > -1.0 {
                NormalLoss::Gamma(g)
            } else {
                return Err(Error::InvalidParam(
                    "normal γ-loss undefined for γ ≤ −1".into(),
                ));
            };
            for i in -steps..=steps {
                let s = i as f64 * spacing;
                for &y in ys {
                    consider(Ok(kernels::normal(kind, y, s, *sigma2).1), s, y);
                }
            }
        }
        MarginFamily::Poisson { ymax } => {
            let kind = if ml {
                PoissonLoss::Ml
            } else if gm {
                PoissonLoss::Gm(1.0)
            } else {
                PoissonLoss::Gamma(g)
            };
            for i in -steps..=steps {
                let s = i as f64 * spacing;
                for y in 0..=*ymax {
                    let y = y as f64;
                    consider(kernels::poisson(kind, y, s).map(|r| r.1), s, y);
                }
            }
        }
    }
    Ok(best)
}
