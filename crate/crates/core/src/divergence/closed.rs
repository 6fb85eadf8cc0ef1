//! Closed forms for Poisson, multinomial, normal and categorical families.

use serde::{Deserialize, Serialize};

use super::{check_prob_vector, DivergenceKind, DISPATCH_TOL};
use crate::error::{Error, Result};

fn near(x: f64, t: f64) -> bool {
    (x - t).abs() < DISPATCH_TOL
}

/// Poisson divergences under the reference measure dR/dC = 1/y!.
///
/// Built on Σ_y p(y,λ)^a / y! = exp(λ^a − aλ) and
/// Σ_y p(y,λ₀) p(y,λ₁)^b / y! = exp(λ₀λ₁^b − λ₀ − bλ₁).
pub fn poisson_div(l0: f64, l1: f64, kind: DivergenceKind) -> Result<f64> {
    if !(l0 > 0.0 && l1 > 0.0 && l0.is_finite() && l1.is_finite()) {
        return Err(Error::InvalidParam("Poisson intensities must be positive".into()));
    }
    let kl = l0 * (l0 / l1).ln() - l0 + l1;
    let v = match kind {
        DivergenceKind::KL => kl,
        DivergenceKind::Alpha(a) => {
            if near(a, 0.0) {
                kl
            } else if near(a, 1.0) {
                l1 * (l1 / l0).ln() - l1 + l0
            } else {
                let e = l0.powf(1.0 - a) * l1.powf(a) - (1.0 - a) * l0 - a * l1;
                -e.exp_m1() / (a * (1.0 - a))
            }
        }
        DivergenceKind::Beta(b) => {
            if near(b, 0.0) {
                kl
            } else {
                let pp = (l0.powf(b + 1.0) - (b + 1.0) * l0).exp();
                let pq = (l0 * l1.powf(b) - l0 - b * l1).exp();
                let qq = (l1.powf(b + 1.0) - (b + 1.0) * l1).exp();
                pp / (b * (b + 1.0)) - pq / b + qq / (b + 1.0)
            }
        }
        DivergenceKind::Gamma(g) => {
            if near(g, 0.0) {
                kl
            } else if near(g, -1.0) {
                poisson_gm_div(l0, l1, 1.0)?
            } else {
                let ln_a = l0 * l1.powf(g) - l0 - g * l1.powf(g + 1.0) / (g + 1.0);
                let ln_b = l0.powf(g + 1.0) / (g + 1.0) - l0;
                (ln_b.exp() - ln_a.exp()) / g
            }
        }
        DivergenceKind::DualGamma(g) => {
            if near(g, 0.0) {
                kl
            } else {
                let ln_first = l0 * l1.powf(g) - g * l1 - l0.powf(g + 1.0) / (g + 1.0);
                let ln_second = g * l1.powf(g + 1.0) / (g + 1.0) - g * l1;
                (ln_second.exp() - ln_first.exp()) / g
            }
        }
        DivergenceKind::LogGamma(g) => {
            if near(g, 0.0) {
                kl
            } else {
                (l0.powf(g + 1.0) - (g + 1.0) * l0) / (g * (g + 1.0))
                    - (l0 * l1.powf(g) - l0 - g * l1) / g
                    + (l1.powf(g + 1.0) - (g + 1.0) * l1) / (g + 1.0)
            }
        }
        DivergenceKind::GM => poisson_gm_div(l0, l1, 1.0)?,
        DivergenceKind::HM => {
            let ln_a = l0 / (l1 * l1) - l0 - 2.0 / l1;
            let ln_b = -1.0 / l0 - l0;
            0.5 * (ln_a.exp() - ln_b.exp())
        }
    };
    Ok(v)
}

/// GM divergence between Po(λ₀) and Po(λ₁) with reference Po(τ).
pub fn poisson_gm_div(l0: f64, l1: f64, tau: f64) -> Result<f64> {
    if !(l0 > 0.0 && l1 > 0.0 && tau > 0.0) {
        return Err(Error::InvalidParam("Poisson parameters must be positive".into()));
    }
    Ok((-l0).exp() * (l1.powf(tau) * (tau * (l0 / l1 - 1.0)).exp() - l0.powf(tau)))
}

/// Multinomial MN(π,m) vs MN(ρ,m) with the carrier reference m!/Π y_j!.
pub fn multinomial_div(pi: &[f64], rho: &[f64], m: usize, kind: DivergenceKind) -> Result<f64> {
    check_prob_vector(pi)?;
    check_prob_vector(rho)?;
    if pi.len() != rho.len() {
        return Err(Error::SupportMismatch("category counts differ".into()));
    }
    if m == 0 {
        return Err(Error::InvalidParam("m must be positive".into()));
    }
    let mf = m as f64;
    let s = |f: &dyn Fn(f64, f64) -> f64| pi.iter().zip(rho).map(|(&a, &b)| f(a, b)).sum::<f64>();
    let kl = mf * s(&|a, b| a * (a / b).ln());
    let v = match kind {
        DivergenceKind::KL => kl,
        DivergenceKind::Alpha(a) => {
            if near(a, 0.0) {
                kl
            } else if near(a, 1.0) {
                mf * s(&|x, y| y * (y / x).ln())
            } else {
                (1.0 - s(&|x, y| x.powf(1.0 - a) * y.powf(a)).powf(mf)) / (a * (1.0 - a))
            }
        }
        DivergenceKind::Beta(b) => {
            if near(b, 0.0) {
                kl
            } else {
                let pp = s(&|x, _| x.powf(b + 1.0)).powf(mf);
                let pq = s(&|x, y| x * y.powf(b)).powf(mf);
                let qq = s(&|_, y| y.powf(b + 1.0)).powf(mf);
                pp / (b * (b + 1.0)) - pq / b + qq / (b + 1.0)
            }
        }
        DivergenceKind::Gamma(g) => {
            if near(g, 0.0) {
                kl
            } else if near(g, -1.0) {
                return Err(Error::InvalidParam(
                    "γ = −1 needs a probability reference".into(),
                ));
            } else {
                let a = s(&|x, y| x * y.powf(g)).powf(mf)
                    / s(&|_, y| y.powf(g + 1.0)).powf(mf * g / (g + 1.0));
                let b = s(&|x, _| x.powf(g + 1.0)).powf(mf / (g + 1.0));
                (b - a) / g
            }
        }
        _ => {
            return Err(Error::InvalidParam(
                "multinomial closed forms cover KL, Alpha, Beta and Gamma".into(),
            ))
        }
    };
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormalKind {
    KL,
    Gamma(f64),
}

/// Divergence between Nor(μ₀,σ₀²) and Nor(μ₁,σ₁²) under Lebesgue measure.
pub fn normal_div(mu0: f64, var0: f64, mu1: f64, var1: f64, kind: NormalKind) -> Result<f64> {
    if !(var0 > 0.0 && var1 > 0.0) {
        return Err(Error::InvalidParam("variances must be positive".into()));
    }
    let d2 = (mu0 - mu1).powi(2);
    match kind {
        NormalKind::KL => Ok(0.5 * (var1 / var0).ln() + (var0 + d2) / (2.0 * var1) - 0.5),
        NormalKind::Gamma(g) => {
            if (var0 - var1).abs() > 1e-12 * var0.max(var1) {
                return Err(Error::InvalidParam(
                    "γ closed form requires equal variances".into(),
                ));
            }
            if near(g, 0.0) {
                return Ok(d2 / (2.0 * var0));
            }
            if g <= -1.0 {
                return Err(Error::InvalidParam("γ ≤ −1 undefined for the normal family".into()));
            }
            let c = (2.0 * std::f64::consts::PI * var0).powf(-g / (2.0 * (g + 1.0)))
                * (1.0 + g).powf(-1.0 / (2.0 * (g + 1.0)));
            Ok(-c * (-g * d2 / (2.0 * var0 * (g + 1.0))).exp_m1() / g)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CategoricalKind {
    KL,
    Gamma(f64),
    GM(Vec<f64>),
    HM,
}

pub fn categorical_div(pi: &[f64], rho: &[f64], kind: &CategoricalKind) -> Result<f64> {
    check_prob_vector(pi)?;
    check_prob_vector(rho)?;
    if pi.len() != rho.len() {
        return Err(Error::SupportMismatch("category counts differ".into()));
    }
    let s = |f: &dyn Fn(f64, f64) -> f64| pi.iter().zip(rho).map(|(&a, &b)| f(a, b)).sum::<f64>();
    let kl = s(&|a, b| a * (a / b).ln());
    let v = match kind {
        CategoricalKind::KL => kl,
        CategoricalKind::Gamma(g) => {
            let g = *g;
            if near(g, 0.0) {
                kl
            } else if near(g, -1.0) {
                let r = vec![1.0 / pi.len() as f64; pi.len()];
                return categorical_div(pi, rho, &CategoricalKind::GM(r));
            } else {
                let a = s(&|x, y| x * y.powf(g)) / s(&|_, y| y.powf(g + 1.0)).powf(g / (g + 1.0));
                let b = s(&|x, _| x.powf(g + 1.0)).powf(1.0 / (g + 1.0));
                (b - a) / g
            }
        }
        CategoricalKind::GM(r) => {
            check_prob_vector(r)?;
            if r.len() != pi.len() {
                return Err(Error::SupportMismatch("reference pmf length".into()));
            }
            let ratio: f64 = pi.iter().zip(rho).zip(r).map(|((a, b), c)| c * a / b).sum();
            let lq: f64 = rho.iter().zip(r).map(|(b, c)| c * b.ln()).sum();
            let lp: f64 = pi.iter().zip(r).map(|(a, c)| c * a.ln()).sum();
            ratio * lq.exp() - lp.exp()
        }
        CategoricalKind::HM => {
            let inv_q = s(&|_, y| 1.0 / y);
            let inv_p = s(&|x, _| 1.0 / x);
            0.5 * (s(&|x, y| x / (y * y)) / (inv_q * inv_q) - 1.0 / inv_p)
        }
    };
    Ok(v)
}
