//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use mindiv::DivergenceKind;
use rand::Rng;

/// Strictly positive pmf with entries bounded away from zero.
pub fn rand_pmf<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Divergence value from the power integrals I(a, b) = ∫ p^a q^b dΛ of
/// two densities, plus their KL and GM values.
pub fn from_integrals(i: &dyn Fn(f64, f64) -> f64, kl: f64, gm: f64, kind: DivergenceKind) -> f64 {
    match kind {
        DivergenceKind::KL => kl,
        DivergenceKind::Alpha(a) => (1.0 - i(1.0 - a, a)) / (a * (1.0 - a)),
        DivergenceKind::Beta(b) => {
            i(b + 1.0, 0.0) / (b * (b + 1.0)) - i(1.0, b) / b + i(0.0, b + 1.0) / (b + 1.0)
        }
        DivergenceKind::Gamma(g) => {
            (i(g + 1.0, 0.0).powf(1.0 / (g + 1.0)) - i(1.0, g) / i(0.0, g + 1.0).powf(g / (g + 1.0))) / g
        }
        DivergenceKind::DualGamma(g) => {
            -i(1.0, g) / i(g + 1.0, 0.0).powf(1.0 / (g + 1.0)) / g + i(0.0, g + 1.0).powf(g / (g + 1.0)) / g
        }
        DivergenceKind::LogGamma(g) => {
            i(g + 1.0, 0.0).ln() / (g * (g + 1.0)) - i(1.0, g).ln() / g + i(0.0, g + 1.0).ln() / (g + 1.0)
        }
        DivergenceKind::GM => gm,
        DivergenceKind::HM => 0.5 * (i(1.0, -2.0) / i(0.0, -1.0).powi(2) - 1.0 / i(-1.0, 0.0)),
    }
}

/// Direct summation over a finite support with counting masses and weights.
pub fn finite_oracle(p: &[f64], q: &[f64], w: &[f64], kind: DivergenceKind) -> f64 {
    let dp: Vec<f64> = p.iter().zip(w).map(|(a, b)| a / b).collect();
    let dq: Vec<f64> = q.iter().zip(w).map(|(a, b)| a / b).collect();
    let i = |a: f64, b: f64| -> f64 { (0..w.len()).map(|j| w[j] * dp[j].powf(a) * dq[j].powf(b)).sum() };
    let kl: f64 = p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum::<f64>() - p.iter().sum::<f64>()
        + q.iter().sum::<f64>();
    let ws: f64 = w.iter().sum();
    let r: Vec<f64> = w.iter().map(|x| x / ws).collect();
    let gm = gm_oracle(&dp, &dq, &r);
    from_integrals(&i, kl, gm, kind)
}

/// Σ r p/q · exp(Σ r log q) − exp(Σ r log p) on densities.
pub fn gm_oracle(dp: &[f64], dq: &[f64], r: &[f64]) -> f64 {
    let mut ratio = 0.0;
    let mut lq = 0.0;
    let mut lp = 0.0;
    for j in 0..r.len() {
        ratio += r[j] * dp[j] / dq[j];
        lq += r[j] * dq[j].ln();
        lp += r[j] * dp[j].ln();
    }
    ratio * lq.exp() - lp.exp()
}

pub const POISSON_YMAX: usize = 200;

fn ln_fact(y: usize) -> f64 {
    (1..=y).map(|v| (v as f64).ln()).sum()
}

/// Σ_{y ≤ 200} exp(ℓ(y)) where ℓ is a log term; asserts the dropped tail is
/// below 1e-12 of the partial sum using the ratio of the last two terms.
pub fn truncated_series(log_term: impl Fn(usize) -> f64) -> f64 {
    let terms: Vec<f64> = (0..=POISSON_YMAX).map(|y| log_term(y).exp()).collect();
    let total: f64 = terms.iter().sum();
    let last = terms[POISSON_YMAX];
    let ratio = (log_term(POISSON_YMAX + 1) - log_term(POISSON_YMAX)).exp();
    assert!(ratio < 1.0);
    let tail = last * ratio / (1.0 - ratio);
    assert!(tail < 1e-12 * total.abs(), "tail {tail:e} vs sum {total:e}");
    total
}

/// Poisson divergences under dR/dC = 1/y! by truncated series; GM uses Po(1).
pub fn poisson_oracle(l0: f64, l1: f64, kind: DivergenceKind) -> f64 {
    let (a0, a1) = (l0.ln(), l1.ln());
    // density p(y)·y! = λ^y e^{−λ}
    let i = |a: f64, b: f64| {
        truncated_series(|y| {
            let yf = y as f64;
            a * (yf * a0 - l0) + b * (yf * a1 - l1) - ln_fact(y)
        })
    };
    let kl = (0..=POISSON_YMAX)
        .map(|y| {
            let yf = y as f64;
            (yf * a0 - l0 - ln_fact(y)).exp() * (yf * (a0 - a1) - l0 + l1)
        })
        .sum::<f64>();
    let gm = {
        let r: Vec<f64> = (0..=POISSON_YMAX).map(|y| (-1.0 - ln_fact(y)).exp()).collect();
        let dp: Vec<f64> = (0..=POISSON_YMAX).map(|y| (y as f64 * a0 - l0).exp()).collect();
        let dq: Vec<f64> = (0..=POISSON_YMAX).map(|y| (y as f64 * a1 - l1).exp()).collect();
        gm_oracle(&dp, &dq, &r)
    };
    from_integrals(&i, kl, gm, kind)
}

/// Every count vector of length k summing to m.
pub fn count_vectors(m: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![m]];
    }
    let mut out = Vec::new();
    for first in 0..=m {
        for mut rest in count_vectors(m - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Multinomial divergences by brute force, carrier weight m!/Π y_j!.
pub fn multinomial_oracle(pi: &[f64], rho: &[f64], m: usize, kind: DivergenceKind) -> f64 {
    let mut p = Vec::new();
    let mut q = Vec::new();
    let mut w = Vec::new();
    for y in count_vectors(m, pi.len()) {
        let coef = (ln_fact(m) - y.iter().map(|&c| ln_fact(c)).sum::<f64>()).exp();
        let dp: f64 = y.iter().zip(pi).map(|(&c, v)| v.powi(c as i32)).product();
        let dq: f64 = y.iter().zip(rho).map(|(&c, v)| v.powi(c as i32)).product();
        p.push(coef * dp);
        q.push(coef * dq);
        w.push(coef);
    }
    finite_oracle(&p, &q, &w, kind)
}

/// Composite Simpson rule on [a, b] with n (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for j in 1..n {
        let x = a + j as f64 * h;
        s += if j % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}

/// Normal divergences (equal or unequal variances) by Simpson quadrature.
pub fn normal_oracle(mu0: f64, v0: f64, mu1: f64, v1: f64, kind: DivergenceKind) -> f64 {
    let pdf = |x: f64, m: f64, v: f64| (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
    let lo = mu0.min(mu1) - 30.0 * v0.max(v1).sqrt();
    let hi = mu0.max(mu1) + 30.0 * v0.max(v1).sqrt();
    let n = 200_000;
    let i = |a: f64, b: f64| simpson(|x| pdf(x, mu0, v0).powf(a) * pdf(x, mu1, v1).powf(b), lo, hi, n);
    let kl = simpson(
        |x| {
            let p = pdf(x, mu0, v0);
            if p == 0.0 {
                0.0
            } else {
                p * ((mu1 - x).powi(2) / (2.0 * v1) - (mu0 - x).powi(2) / (2.0 * v0) + 0.5 * (v1 / v0).ln())
            }
        },
        lo,
        hi,
        n,
    );
    from_integrals(&i, kl, f64::NAN, kind)
}

/// max_j |a_j − b_j| / max(‖b‖∞, floor).
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(floor);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

use mindiv::glm::{self, Dataset, EstimatorKind, Family, GlmSpec, GmRef};
use rand_distr::{Distribution, Normal as NormalDist, Poisson as PoissonDist};

pub const GRAD_N: usize = 20;
pub const GRAD_INSTANCES: usize = 50;
pub const GRAD_TOL: f64 = 1e-5;

/// Every (family, estimator) pair with a loss and score.
pub fn family_kinds() -> Vec<(Family, Vec<EstimatorKind>)> {
    use EstimatorKind as E;
    vec![
        (
            Family::Normal { sigma2: 1.3 },
            vec![E::ML, E::Gamma(0.3), E::Gamma(0.8), E::Gamma(-0.5), E::Beta(0.5), E::Huber(1.345), E::Tukey(4.685)],
        ),
        (
            Family::Bernoulli,
            vec![
                E::ML,
                E::Gamma(0.3),
                E::Gamma(0.8),
                E::Gamma(-0.5),
                E::Gamma(-2.0),
                E::HM,
                E::GM(GmRef::Default),
                E::GM(GmRef::Scalar(0.3)),
                E::InverseWeightedGM,
                E::Beta(0.5),
            ],
        ),
        (
            Family::Categorical { k: 3 },
            vec![
                E::ML,
                E::Gamma(0.3),
                E::Gamma(0.8),
                E::Gamma(-0.5),
                E::HM,
                E::GM(GmRef::Default),
                E::GM(GmRef::Pmf(vec![0.2, 0.3, 0.5])),
                E::InverseWeightedGM,
                E::Beta(0.5),
            ],
        ),
        (
            Family::Ordinal { k: 2 },
            vec![E::ML, E::Gamma(0.3), E::Gamma(0.8), E::Gamma(-0.5), E::HM, E::GM(GmRef::Default)],
        ),
        (
            Family::Poisson,
            vec![
                E::ML,
                E::Gamma(0.05),
                E::Gamma(0.5),
                E::Gamma(-0.5),
                E::HM,
                E::GM(GmRef::Default),
                E::GM(GmRef::Scalar(2.0)),
            ],
        ),
    ]
}

fn draw_outcome<R: Rng>(spec: &GlmSpec, theta: &[f64], x: &[f64], rng: &mut R) -> f64 {
    match spec.family {
        Family::Normal { sigma2 } => {
            glm::linear_predictor(theta, x) + NormalDist::new(0.0, sigma2.sqrt()).unwrap().sample(rng)
        }
        Family::Poisson => PoissonDist::new(glm::linear_predictor(theta, x).exp()).unwrap().sample(rng),
        _ => {
            let p = glm::class_probs(spec, theta, x).unwrap();
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (c, pc) in p.iter().enumerate() {
                acc += pc;
                if u < acc {
                    return c as f64;
                }
            }
            (p.len() - 1) as f64
        }
    }
}

/// Random parameter with sorted ordinal thresholds.
pub fn random_theta<R: Rng>(spec: &GlmSpec, rng: &mut R) -> Vec<f64> {
    let scale = if spec.family == Family::Poisson { 0.5 } else { 1.0 };
    let mut t: Vec<f64> = (0..spec.n_params()).map(|_| rng.random_range(-scale..scale)).collect();
    if let Family::Ordinal { k } = spec.family {
        t[..k].sort_by(f64::total_cmp);
    }
    t
}

/// Covariates N(0,1), outcomes from the model at θ; Normal data carry two outliers.
pub fn random_dataset<R: Rng>(spec: &GlmSpec, theta: &[f64], n: usize, rng: &mut R) -> Dataset {
    let std = NormalDist::new(0.0, 1.0).unwrap();
    loop {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..spec.d).map(|_| std.sample(rng)).collect()).collect();
        let mut y: Vec<f64> = rows.iter().map(|x| draw_outcome(spec, theta, x, rng)).collect();
        if let Family::Normal { .. } = spec.family {
            y[0] += 8.0;
            y[1] -= 6.0;
        }
        let classes = match spec.family {
            Family::Bernoulli => 2,
            Family::Categorical { k } => k,
            _ => 0,
        };
        // inverse weighting needs every class present
        if (0..classes).all(|c| y.contains(&(c as f64))) {
            return Dataset::new(rows, y).unwrap();
        }
    }
}

/// Worst relative gap between the score and central differences of the loss
/// over random instances.
pub fn gradient_gap(family: Family, kind: &EstimatorKind, instances: usize, seed: u64) -> f64 {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let spec = GlmSpec::new(family, 2).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let truth = random_theta(&spec, &mut rng);
        let data = random_dataset(&spec, &truth, GRAD_N, &mut rng);
        let theta = random_theta(&spec, &mut rng);
        let s = glm::score(&spec, kind, &data, &theta).unwrap();
        let fd = mindiv::optim::finite_diff_grad(|t| glm::loss(&spec, kind, &data, t).unwrap(), &theta, 1e-6);
        worst = worst.max(rel_err(&s, &fd, 1e-2));
    }
    worst
}

use rand::SeedableRng;
