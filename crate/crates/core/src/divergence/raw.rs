//! Divergences on raw mass vectors.
//!
//! Every function takes counting masses `p`, `q` (not necessarily normalized)
//! and reference weights `w = dΛ/dC`. Densities are `p/w` and integrals are
//! `Σ g(p/w)·w`. Callers are responsible for strict positivity.

fn dens(m: f64, w: f64) -> f64 {
    m / w
}

/// ∫ g(p, q) dΛ over densities.
pub fn integral(p: &[f64], q: &[f64], w: &[f64], g: impl Fn(f64, f64) -> f64) -> f64 {
    p.iter()
        .zip(q)
        .zip(w)
        .map(|((&a, &b), &wi)| g(dens(a, wi), dens(b, wi)) * wi)
        .sum()
}

fn power_integral(p: &[f64], w: &[f64], a: f64) -> f64 {
    p.iter().zip(w).map(|(&m, &wi)| dens(m, wi).powf(a) * wi).sum()
}

/// Extended KL divergence Σ p log(p/q) − p + q.
pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| a * (a / b).ln() - a + b)
        .sum()
}

/// Extended α-divergence, KL(p,q) at α→0 and KL(q,p) at α→1.
pub fn alpha(p: &[f64], q: &[f64], a: f64) -> f64 {
    let s: f64 = p
        .iter()
        .zip(q)
        .map(|(&x, &y)| (1.0 - a) * x + a * y - x.powf(1.0 - a) * y.powf(a))
        .sum();
    s / (a * (1.0 - a))
}

pub fn beta(p: &[f64], q: &[f64], w: &[f64], b: f64) -> f64 {
    integral(p, q, w, |x, y| {
        x.powf(b + 1.0) / (b * (b + 1.0)) - x * y.powf(b) / b + y.powf(b + 1.0) / (b + 1.0)
    })
}

/// β = −1 member: ∫ (p/q − log(p/q) − 1) dΛ.
pub fn itakura_saito(p: &[f64], q: &[f64], w: &[f64]) -> f64 {
    integral(p, q, w, |x, y| x / y - (x / y).ln() - 1.0)
}

/// γ-cross entropy H_γ(p,q) = −(1/γ) ∫ p q^γ / (∫ q^{γ+1})^{γ/(γ+1)}.
pub fn gamma_cross(p: &[f64], q: &[f64], w: &[f64], g: f64) -> f64 {
    let pq = integral(p, q, w, |x, y| x * y.powf(g));
    let qq = power_integral(q, w, g + 1.0);
    -pq / qq.powf(g / (g + 1.0)) / g
}

pub fn gamma(p: &[f64], q: &[f64], w: &[f64], g: f64) -> f64 {
    let pq = integral(p, q, w, |x, y| x * y.powf(g));
    let qq = power_integral(q, w, g + 1.0);
    let pp = power_integral(p, w, g + 1.0);
    let a = pq / qq.powf(g / (g + 1.0));
    let b = pp.powf(1.0 / (g + 1.0));
    (b - a) / g
}

pub fn dual_gamma(p: &[f64], q: &[f64], w: &[f64], g: f64) -> f64 {
    let pq = integral(p, q, w, |x, y| x * y.powf(g));
    let qq = power_integral(q, w, g + 1.0);
    let pp = power_integral(p, w, g + 1.0);
    -pq / pp.powf(1.0 / (g + 1.0)) / g + qq.powf(g / (g + 1.0)) / g
}

pub fn log_gamma(p: &[f64], q: &[f64], w: &[f64], g: f64) -> f64 {
    let pq = integral(p, q, w, |x, y| x * y.powf(g));
    let qq = power_integral(q, w, g + 1.0);
    let pp = power_integral(p, w, g + 1.0);
    pp.ln() / (g * (g + 1.0)) - pq.ln() / g + qq.ln() / (g + 1.0)
}

fn reference_pmf(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn geometric_mean(d: &[f64], r: &[f64]) -> f64 {
    d.iter().zip(r).map(|(x, ri)| ri * x.ln()).sum::<f64>().exp()
}

/// GM divergence on densities `dp`, `dq` with a reference pmf `r`.
pub fn gm_densities(dp: &[f64], dq: &[f64], r: &[f64]) -> f64 {
    let ratio: f64 = dp.iter().zip(dq).zip(r).map(|((x, y), ri)| ri * x / y).sum();
    ratio * geometric_mean(dq, r) - geometric_mean(dp, r)
}

/// GM divergence with the reference probability proportional to `w`.
pub fn gm(p: &[f64], q: &[f64], w: &[f64]) -> f64 {
    let r = reference_pmf(w);
    let dp: Vec<f64> = p.iter().zip(w).map(|(m, wi)| m / wi).collect();
    let dq: Vec<f64> = q.iter().zip(w).map(|(m, wi)| m / wi).collect();
    gm_densities(&dp, &dq, &r)
}

/// Dual GM divergence Σ r p/q / G(p) − 1/G(q).
pub fn dual_gm_densities(dp: &[f64], dq: &[f64], r: &[f64]) -> f64 {
    let ratio: f64 = dp.iter().zip(dq).zip(r).map(|((x, y), ri)| ri * x / y).sum();
    ratio / geometric_mean(dp, r) - 1.0 / geometric_mean(dq, r)
}

pub fn dual_gm(p: &[f64], q: &[f64], w: &[f64]) -> f64 {
    let r = reference_pmf(w);
    let dp: Vec<f64> = p.iter().zip(w).map(|(m, wi)| m / wi).collect();
    let dq: Vec<f64> = q.iter().zip(w).map(|(m, wi)| m / wi).collect();
    dual_gm_densities(&dp, &dq, &r)
}

/// log-form at γ = −1: log Σ r p/q − Σ r log(p/q).
pub fn log_gm(p: &[f64], q: &[f64], w: &[f64]) -> f64 {
    let r = reference_pmf(w);
    let mut ratio = 0.0;
    let mut mean_log = 0.0;
    for ((&a, &b), ri) in p.iter().zip(q).zip(&r) {
        ratio += ri * a / b;
        mean_log += ri * (a / b).ln();
    }
    ratio.ln() - mean_log
}

/// HM divergence ½[∫ p/q² / (∫ 1/q)² − 1/∫ 1/p].
pub fn hm(p: &[f64], q: &[f64], w: &[f64]) -> f64 {
    let pq = integral(p, q, w, |x, y| x / (y * y));
    let iq = power_integral(q, w, -1.0);
    let ip = power_integral(p, w, -1.0);
    0.5 * (pq / (iq * iq) - 1.0 / ip)
}
