//! Poisson point-process species distribution models.
//!
//! The study region is a grid of equal-area cells, each carrying a feature
//! vector. Presence points snap to the cell that contains them. The quadrature
//! set is the presence sites followed by every cell centre; a cell's area is
//! shared equally among its centre and the presence points inside it.
//!
//! Scores here are estimating functions, i.e. the negative gradient of the
//! matching loss.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::divergence::raw;
use crate::error::{Error, Result};
use crate::optim::{self, OptimConfig, Status};

const ETA_LIMIT: f64 = 700.0;
const NEAR: f64 = 1e-9;

/// Equal-area cells with one feature vector each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    d: usize,
    features: Vec<f64>,
    cell_area: f64,
}

impl RegionGrid {
    pub fn new(rows: Vec<Vec<f64>>, cell_area: f64) -> Result<Self> {
        if rows.is_empty() || !(cell_area > 0.0) {
            return Err(Error::InvalidParam("need cells and a positive cell area".into()));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidData("ragged feature rows".into()));
        }
        let features: Vec<f64> = rows.into_iter().flatten().collect();
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite feature".into()));
        }
        Ok(Self { d, features, cell_area })
    }

    /// `n_side × n_side` cells over a region of total area `area`, features N(0, I_d).
    pub fn gaussian<R: Rng + ?Sized>(n_side: usize, d: usize, area: f64, rng: &mut R) -> Result<Self> {
        let n = n_side * n_side;
        if n == 0 || !(area > 0.0) {
            return Err(Error::InvalidParam("grid needs cells and a positive area".into()));
        }
        let features: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        Ok(Self { d, features, cell_area: area / n as f64 })
    }

    pub fn n_cells(&self) -> usize {
        self.features.len() / self.d.max(1)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn feature(&self, j: usize) -> &[f64] {
        &self.features[j * self.d..(j + 1) * self.d]
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_area
    }

    pub fn area(&self) -> f64 {
        self.cell_area * self.n_cells() as f64
    }
}

/// Quadrature sites: presence points first, then every cell centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresenceData {
    d: usize,
    m: usize,
    sites: Vec<f64>,
    weights: Vec<f64>,
    presence_cells: Vec<usize>,
}

impl PresenceData {
    /// Builds the quadrature set from the cells holding each presence point.
    pub fn from_cells(grid: &RegionGrid, presence_cells: &[usize]) -> Result<Self> {
        let nc = grid.n_cells();
        let mut counts = vec![0usize; nc];
        for &c in presence_cells {
            if c >= nc {
                return Err(Error::InvalidData(format!("presence cell {c} outside grid")));
            }
            counts[c] += 1;
        }
        let d = grid.d();
        let m = presence_cells.len();
        let mut sites = Vec::with_capacity((m + nc) * d);
        let mut weights = Vec::with_capacity(m + nc);
        for &c in presence_cells {
            sites.extend_from_slice(grid.feature(c));
            weights.push(grid.cell_area() / (counts[c] + 1) as f64);
        }
        for (c, &k) in counts.iter().enumerate() {
            sites.extend_from_slice(grid.feature(c));
            weights.push(grid.cell_area() / (k + 1) as f64);
        }
        Ok(Self { d, m, sites, weights, presence_cells: presence_cells.to_vec() })
    }

    /// Arbitrary sites and weights; the first `m` sites are presences.
    pub fn from_parts(d: usize, m: usize, sites: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        if sites.len() != n * d || m > n {
            return Err(Error::InvalidData("inconsistent presence data".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidData("quadrature weights must be positive".into()));
        }
        Ok(Self { d, m, sites, weights, presence_cells: Vec::new() })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn site(&self, j: usize) -> &[f64] {
        &self.sites[j * self.d..(j + 1) * self.d]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn presence_cells(&self) -> &[usize] {
        &self.presence_cells
    }

    pub fn z(&self, j: usize) -> bool {
        j < self.m
    }

    /// Region mean Σ w_j x₀(S_j).
    pub fn background_mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.d + 1];
        for j in 0..self.n() {
            let w = self.weights[j];
            out[0] += w;
            for (o, x) in out[1..].iter_mut().zip(self.site(j)) {
                *o += w * x;
            }
        }
        out
    }
}

/// λ(x) = exp(θ₀ + θ₁ᵀx).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLinearIntensity {
    pub theta: Vec<f64>,
}

impl LogLinearIntensity {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    pub fn predictor(&self, x: &[f64]) -> Result<f64> {
        predictor(&self.theta, x)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.predictor(x).map(f64::exp)
    }

    pub fn on_grid(&self, grid: &RegionGrid) -> Result<Vec<f64>> {
        (0..grid.n_cells()).map(|j| self.eval(grid.feature(j))).collect()
    }
}

fn predictor(theta: &[f64], x: &[f64]) -> Result<f64> {
    if theta.len() != x.len() + 1 {
        return Err(Error::InvalidParam(format!(
            "θ has {} entries for {} features",
            theta.len(),
            x.len()
        )));
    }
    let eta = theta[0] + theta[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    if !(eta.abs() <= ETA_LIMIT) {
        return Err(Error::Overflow(format!("linear predictor {eta:.3e}")));
    }
    Ok(eta)
}

/// (1−ε) λ(·,θ) + ε λ(·,θ_out) on the grid.
pub fn mixture_on_grid(grid: &RegionGrid, theta: &[f64], theta_out: &[f64], eps: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParam("mixing weight must lie in [0,1]".into()));
    }
    let a = LogLinearIntensity::new(theta.to_vec()).on_grid(grid)?;
    let b = LogLinearIntensity::new(theta_out.to_vec()).on_grid(grid)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (1.0 - eps) * x + eps * y).collect())
}

/// Draws M ~ Po(Σ w λ) and places each point in a cell with probability ∝ w λ.
pub fn simulate_ppp<R: Rng + ?Sized>(grid: &RegionGrid, lambda: &[f64], rng: &mut R) -> Result<PresenceData> {
    if lambda.len() != grid.n_cells() {
        return Err(Error::InvalidParam("one intensity value per cell required".into()));
    }
    if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::Overflow("intensity must be finite and nonnegative".into()));
    }
    let total: f64 = lambda.iter().sum::<f64>() * grid.cell_area();
    if !total.is_finite() {
        return Err(Error::Overflow("integrated intensity".into()));
    }
    if total == 0.0 {
        return PresenceData::from_cells(grid, &[]);
    }
    let m = Poisson::new(total)
        .map_err(|e| Error::InvalidParam(e.to_string()))?
        .sample(rng) as usize;
    let pick = WeightedIndex::new(lambda).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let cells: Vec<usize> = (0..m).map(|_| pick.sample(rng)).collect();
    PresenceData::from_cells(grid, &cells)
}

fn check(theta: &[f64], data: &PresenceData) -> Result<Vec<f64>> {
    if theta.len() != data.d + 1 {
        return Err(Error::InvalidParam(format!(
            "θ has {} entries, model needs {}",
            theta.len(),
            data.d + 1
        )));
    }
    (0..data.n()).map(|j| predictor(theta, data.site(j))).collect()
}

fn accumulate(grad: &mut [f64], c: f64, x: &[f64]) {
    grad[0] += c;
    for (g, v) in grad[1..].iter_mut().zip(x) {
        *g += c * v;
    }
}

/// Negative log-likelihood −Σ_pres log λ + Σ w λ and its gradient.
pub fn neg_loglik(theta: &[f64], data: &PresenceData) -> Result<(f64, Vec<f64>)> {
    let eta = check(theta, data)?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for j in 0..data.n() {
        let x = data.site(j);
        let lam = eta[j].exp();
        let w = data.weights[j];
        let z = if data.z(j) { 1.0 } else { 0.0 };
        loss += w * lam - z * eta[j];
        accumulate(&mut grad, w * lam - z, x);
    }
    Ok((loss, grad))
}

/// Σ_j (Z_j − w_j λ_j) x₀(S_j).
pub fn ml_score(theta: &[f64], data: &PresenceData) -> Result<Vec<f64>> {
    neg_loglik(theta, data).map(|(_, g)| negate(g))
}

fn negate(mut g: Vec<f64>) -> Vec<f64> {
    g.iter_mut().for_each(|v| *v = -*v);
    g
}

/// β-loss −(1/β) Σ_pres λ^β + (1/(β+1)) Σ w λ^{β+1} and its gradient.
pub fn beta_loss(theta: &[f64], data: &PresenceData, b: f64) -> Result<(f64, Vec<f64>)> {
    if b.abs() < NEAR || (b + 1.0).abs() < NEAR {
        return Err(Error::InvalidParam("β ∉ {0, −1}; use the ML or GM forms".into()));
    }
    let eta = check(theta, data)?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for j in 0..data.n() {
        let x = data.site(j);
        let w = data.weights[j];
        let lb1 = ((b + 1.0) * eta[j]).exp();
        loss += w * lb1 / (b + 1.0);
        let mut c = w * lb1;
        if data.z(j) {
            let lb = (b * eta[j]).exp();
            loss -= lb / b;
            c -= lb;
        }
        accumulate(&mut grad, c, x);
    }
    Ok((loss, grad))
}

/// Σ_j (Z_j − w_j λ_j) λ_j^β x₀(S_j).
pub fn beta_score(theta: &[f64], data: &PresenceData, b: f64) -> Result<Vec<f64>> {
    beta_loss(theta, data, b).map(|(_, g)| negate(g))
}

/// γ-loss −(1/γ) Σ_pres λ^γ / (Σ w λ^{γ+1})^{γ/(γ+1)}; constant in θ₀.
pub fn gamma_loss(theta: &[f64], data: &PresenceData, g: f64) -> Result<(f64, Vec<f64>)> {
    if g.abs() < NEAR || (g + 1.0).abs() < NEAR {
        return Err(Error::InvalidParam("γ ∉ {0, −1}".into()));
    }
    let eta = check(theta, data)?;
    let p = theta.len();
    let mut s = 0.0;
    let mut t = 0.0;
    let mut ds = vec![0.0; p];
    let mut dt = vec![0.0; p];
    for j in 0..data.n() {
        let x = data.site(j);
        let lt = data.weights[j] * ((g + 1.0) * eta[j]).exp();
        t += lt;
        accumulate(&mut dt, lt, x);
        if data.z(j) {
            let lg = (g * eta[j]).exp();
            s += lg;
            accumulate(&mut ds, lg, x);
        }
    }
    let c = g / (g + 1.0);
    let tc = t.powf(c);
    let loss = -s / tc / g;
    let grad = ds
        .iter()
        .zip(&dt)
        .map(|(a, b)| -(a - s * b / t) / tc)
        .collect();
    Ok((loss, grad))
}

pub fn gamma_score(theta: &[f64], data: &PresenceData, g: f64) -> Result<Vec<f64>> {
    gamma_loss(theta, data, g).map(|(_, gr)| negate(gr))
}

/// GM loss Σ_pres 1/λ + Σ w log λ and its gradient.
pub fn gm_loss(theta: &[f64], data: &PresenceData) -> Result<(f64, Vec<f64>)> {
    let eta = check(theta, data)?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for j in 0..data.n() {
        let x = data.site(j);
        let w = data.weights[j];
        loss += w * eta[j];
        let mut c = w;
        if data.z(j) {
            let inv = (-eta[j]).exp();
            loss += inv;
            c -= inv;
        }
        accumulate(&mut grad, c, x);
    }
    Ok((loss, grad))
}

/// Σ_pres e^{−θᵀx₀} x₀ − Σ w x₀.
pub fn gm_score(theta: &[f64], data: &PresenceData) -> Result<Vec<f64>> {
    gm_loss(theta, data).map(|(_, g)| negate(g))
}

/// Estimating weight F on [0, ∞).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CdfWeight {
    /// F(t) = 1 − (1 + η c t)^{−1/η}.
    Pareto { c: f64, eta: f64 },
    /// F ≡ 1 on (0, ∞); reproduces maximum likelihood.
    PointMassAtZero,
    /// Piecewise linear through (z_k, F_k), z₀ = 0, F₀ = 0, last F = 1.
    Tabulated { z: Vec<f64>, f: Vec<f64> },
}

impl CdfWeight {
    /// Pareto with η = 1 and scale σ folded into c.
    pub fn pareto_sigma(sigma: f64) -> Self {
        CdfWeight::Pareto { c: sigma, eta: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CdfWeight::Pareto { c, eta } if !(*c > 0.0 && *eta > 0.0) => {
                Err(Error::InvalidParam("Pareto c and η must be positive".into()))
            }
            CdfWeight::Tabulated { z, f } => {
                let ok = z.len() == f.len()
                    && z.len() >= 2
                    && z[0] == 0.0
                    && f[0] == 0.0
                    && (f[f.len() - 1] - 1.0).abs() < 1e-12
                    && z.windows(2).all(|w| w[1] > w[0])
                    && f.windows(2).all(|w| w[1] >= w[0]);
                if ok {
                    Ok(())
                } else {
                    Err(Error::InvalidParam("tabulated CDF must be nondecreasing from (0,0) to 1".into()))
                }
            }
            _ => Ok(()),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            CdfWeight::Pareto { c, eta } => {
                if *eta == 1.0 {
                    c * t / (1.0 + c * t)
                } else {
                    -(-(eta * c * t).ln_1p() / eta).exp_m1()
                }
            }
            CdfWeight::PointMassAtZero => 1.0,
            CdfWeight::Tabulated { z, f } => {
                if t >= z[z.len() - 1] {
                    return 1.0;
                }
                let k = z.partition_point(|&v| v <= t) - 1;
                f[k] + (f[k + 1] - f[k]) * (t - z[k]) / (z[k + 1] - z[k])
            }
        }
    }

    /// (a_F(λ), b_F(λ)) with a_F = ∫₀^λ F(z)/z dz and b_F = ∫₀^λ F(z) dz.
    pub fn primitives(&self, lam: f64) -> Result<(f64, f64)> {
        match self {
            CdfWeight::PointMassAtZero => Ok((lam.ln(), lam)),
            CdfWeight::Pareto { c, eta } if *eta == 1.0 => {
                let a = (c * lam).ln_1p();
                Ok((a, lam - a / c))
            }
            CdfWeight::Pareto { .. } => {
                let ia = quadrature::double_exponential::integrate(|z| self.cdf(z) / z, 0.0, lam, 1e-10);
                let ib = quadrature::double_exponential::integrate(|z| self.cdf(z), 0.0, lam, 1e-10);
                if !(ia.integral.is_finite() && ib.integral.is_finite()) {
                    return Err(Error::NonFinite {
                        detail: "CDF weight quadrature".into(),
                        iterations: 0,
                        last: vec![lam],
                    });
                }
                Ok((ia.integral, ib.integral))
            }
            CdfWeight::Tabulated { z, f } => {
                let mut a = 0.0;
                let mut b = 0.0;
                for k in 0..z.len() - 1 {
                    if lam <= z[k] {
                        break;
                    }
                    let lo = z[k];
                    let hi = z[k + 1].min(lam);
                    let slope = (f[k + 1] - f[k]) / (z[k + 1] - z[k]);
                    let icpt = f[k] - slope * z[k];
                    b += icpt * (hi - lo) + 0.5 * slope * (hi * hi - lo * lo);
                    a += slope * (hi - lo);
                    if icpt != 0.0 {
                        a += icpt * (hi / lo).ln();
                    }
                }
                let zk = z[z.len() - 1];
                if lam > zk {
                    a += (lam / zk).ln();
                    b += lam - zk;
                }
                Ok((a, b))
            }
        }
    }
}

/// F-loss −Σ_pres a_F(λ) + Σ w b_F(λ) and its gradient.
pub fn f_loss(theta: &[f64], data: &PresenceData, f: &CdfWeight) -> Result<(f64, Vec<f64>)> {
    f.validate()?;
    let eta = check(theta, data)?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for j in 0..data.n() {
        let x = data.site(j);
        let w = data.weights[j];
        let lam = eta[j].exp();
        let (a, b) = f.primitives(lam)?;
        let fw = f.cdf(lam);
        loss += w * b;
        let mut c = w * fw * lam;
        if data.z(j) {
            loss -= a;
            c -= fw;
        }
        accumulate(&mut grad, c, x);
    }
    Ok((loss, grad))
}

/// Σ_j (Z_j − w_j λ_j) F(λ_j) x₀(S_j).
pub fn f_score(theta: &[f64], data: &PresenceData, f: &CdfWeight) -> Result<Vec<f64>> {
    f_loss(theta, data, f).map(|(_, g)| negate(g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PppEstimator {
    ML,
    Beta(f64),
    Gamma(f64),
    GM,
    F(CdfWeight),
}

impl PppEstimator {
    pub fn label(&self) -> String {
        match self {
            PppEstimator::ML => "ML".into(),
            PppEstimator::Beta(b) => format!("beta({b})"),
            PppEstimator::Gamma(g) => format!("gamma({g})"),
            PppEstimator::GM => "GM".into(),
            PppEstimator::F(CdfWeight::Pareto { c, .. }) => format!("F({c})"),
            PppEstimator::F(_) => "F".into(),
        }
    }

    /// Loss and gradient of this estimator at θ.
    pub fn loss(&self, theta: &[f64], data: &PresenceData) -> Result<(f64, Vec<f64>)> {
        match self {
            PppEstimator::ML => neg_loglik(theta, data),
            PppEstimator::Beta(b) if b.abs() < NEAR => neg_loglik(theta, data),
            PppEstimator::Beta(b) if (b + 1.0).abs() < NEAR => gm_loss(theta, data),
            PppEstimator::Beta(b) => beta_loss(theta, data, *b),
            PppEstimator::Gamma(g) => gamma_loss(theta, data, *g),
            PppEstimator::GM => gm_loss(theta, data),
            PppEstimator::F(f) => f_loss(theta, data, f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PppFit {
    pub theta: Vec<f64>,
    pub status: Status,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl PppFit {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

fn default_init(data: &PresenceData) -> Result<Vec<f64>> {
    if data.m == 0 {
        return Err(Error::InvalidData("no presence points".into()));
    }
    let area: f64 = data.weights.iter().sum();
    let mut t = vec![0.0; data.d + 1];
    t[0] = (data.m as f64 / area).ln();
    Ok(t)
}

/// Minimizes the estimator's loss. The γ-loss keeps θ₀ at its initial value.
/// The losses are sums over sites, so the gradient tolerance is scaled by max(1, m).
pub fn fit(est: &PppEstimator, data: &PresenceData, init: Option<&[f64]>, user_cfg: &OptimConfig) -> Result<PppFit> {
    let scaled = OptimConfig { tol: user_cfg.tol * (data.m as f64).max(1.0), ..*user_cfg };
    let cfg = &scaled;
    let base = match init {
        Some(v) => v.to_vec(),
        None => {
            let t = default_init(data)?;
            match est {
                PppEstimator::ML => t,
                _ => match fit(&PppEstimator::ML, data, Some(&t), user_cfg) {
                    Ok(f) if f.converged() => f.theta,
                    _ => t,
                },
            }
        }
    };
    if let PppEstimator::Gamma(g) = est {
        let theta0 = base[0];
        let obj = |t1: &[f64]| {
            let mut full = vec![theta0];
            full.extend_from_slice(t1);
            let (l, gr) = gamma_loss(&full, data, *g)?;
            Ok((l, gr[1..].to_vec()))
        };
        let out = optim::minimize(obj, &base[1..], cfg)?;
        let mut theta = vec![theta0];
        theta.extend(out.theta);
        return Ok(PppFit {
            theta,
            status: out.status,
            loss: out.value,
            grad_norm: out.grad_norm,
            iterations: out.iterations,
            warnings: vec!["γ-loss is constant in θ₀; intercept held at its initial value".into()],
        });
    }
    let out = optim::minimize(|t: &[f64]| est.loss(t, data), &base, cfg)?;
    Ok(PppFit {
        theta: out.theta,
        status: out.status,
        loss: out.value,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        warnings: Vec::new(),
    })
}

/// F-estimator fit.
pub fn f_fit(data: &PresenceData, f: &CdfWeight, init: Option<&[f64]>, cfg: &OptimConfig) -> Result<PppFit> {
    fit(&PppEstimator::F(f.clone()), data, init, cfg)
}

/// GM estimator by Newton iterations that touch only the presence sites;
/// the region mean is computed once.
pub fn gm_fit(data: &PresenceData, init: Option<&[f64]>, cfg: &OptimConfig) -> Result<PppFit> {
    cfg.validate()?;
    let p = data.d + 1;
    if data.m < p {
        return Err(Error::InvalidData(format!("GM fit needs at least {p} presence points")));
    }
    let xbar = data.background_mean();
    let pres: Vec<Vec<f64>> = (0..data.m)
        .map(|i| std::iter::once(1.0).chain(data.site(i).iter().copied()).collect())
        .collect();
    let objective = |t: &[f64]| -> Result<(f64, Vec<f64>, nalgebra::DMatrix<f64>)> {
        let mut val: f64 = t.iter().zip(&xbar).map(|(a, b)| a * b).sum();
        let mut grad = xbar.clone();
        let mut hess = nalgebra::DMatrix::<f64>::zeros(p, p);
        for x in &pres {
            let eta: f64 = t.iter().zip(x).map(|(a, b)| a * b).sum();
            if eta.abs() > ETA_LIMIT {
                return Err(Error::Overflow(format!("linear predictor {eta:.3e}")));
            }
            let e = (-eta).exp();
            val += e;
            for a in 0..p {
                grad[a] -= e * x[a];
                for b in 0..p {
                    hess[(a, b)] += e * x[a] * x[b];
                }
            }
        }
        Ok((val, grad, hess))
    };
    let mut theta = match init {
        Some(v) if v.len() == p => v.to_vec(),
        Some(_) => return Err(Error::InvalidParam("initial θ has the wrong length".into())),
        None => default_init(data)?,
    };
    let (mut val, mut grad, mut hess) = objective(&theta)?;
    let inf = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut it = 0;
    while inf(&grad) >= cfg.tol && it < cfg.max_iter {
        it += 1;
        let step = hess
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Degenerate("presence design is rank deficient".into()))?
            .solve(&nalgebra::DVector::from_column_slice(&grad));
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            if let Ok((v, g, h)) = objective(&trial) {
                if v <= val {
                    theta = trial;
                    val = v;
                    grad = g;
                    hess = h;
                    break;
                }
            }
            t *= cfg.shrink;
            if t < cfg.step_floor {
                return Ok(PppFit {
                    theta,
                    status: Status::NonConverged,
                    loss: val,
                    grad_norm: inf(&grad),
                    iterations: it,
                    warnings: vec!["line search stalled".into()],
                });
            }
        }
    }
    let status = if inf(&grad) < cfg.tol { Status::Converged } else { Status::NonConverged };
    Ok(PppFit { theta, status, loss: val, grad_norm: inf(&grad), iterations: it, warnings: Vec::new() })
}

/// Divergence between intensity functions on a shared quadrature grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IntensityKind {
    Beta(f64),
    Gamma(f64),
    GM,
}

pub fn intensity_divergence(lam: &[f64], eta: &[f64], w: &[f64], kind: IntensityKind) -> Result<f64> {
    if lam.len() != eta.len() || lam.len() != w.len() || lam.is_empty() {
        return Err(Error::SupportMismatch("intensity grids differ in length".into()));
    }
    if lam.iter().chain(eta).chain(w).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidParam("intensities and weights must be positive".into()));
    }
    let pm: Vec<f64> = lam.iter().zip(w).map(|(a, b)| a * b).collect();
    let qm: Vec<f64> = eta.iter().zip(w).map(|(a, b)| a * b).collect();
    Ok(match kind {
        IntensityKind::GM => raw::itakura_saito(&pm, &qm, w),
        IntensityKind::Beta(b) if b.abs() < NEAR => raw::kl(&pm, &qm),
        IntensityKind::Beta(b) if (b + 1.0).abs() < NEAR => raw::itakura_saito(&pm, &qm, w),
        IntensityKind::Beta(b) => raw::beta(&pm, &qm, w, b),
        IntensityKind::Gamma(g) if g.abs() < NEAR || (g + 1.0).abs() < NEAR => {
            return Err(Error::InvalidParam("intensity γ-divergence needs γ ∉ {0, −1}".into()))
        }
        IntensityKind::Gamma(g) => raw::gamma(&pm, &qm, w, g),
    })
}

/// Log γ-divergence between the point-process laws with intensities λ and η,
/// evaluated through the moments E_P[q(Ξ)^γ] of the Radon-Nikodym
/// derivatives against the unit-rate process.
pub fn ppp_log_gamma_div(lam: &[f64], eta: &[f64], w: &[f64], g: f64) -> Result<f64> {
    if lam.len() != eta.len() || lam.len() != w.len() || lam.is_empty() {
        return Err(Error::SupportMismatch("intensity grids differ in length".into()));
    }
    if g.abs() < NEAR || (g + 1.0).abs() < NEAR {
        return Err(Error::InvalidParam("γ ∉ {0, −1}".into()));
    }
    let area: f64 = w.iter().sum();
    let total = |f: &[f64]| f.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
    // log E_P[q(Ξ)^γ] with q(ξ) = e^{|A| − ∫η} Π η(s_i)
    let log_moment = |p: &[f64], q: &[f64]| {
        let prod: f64 = p.iter().zip(q).zip(w).map(|((a, b), c)| a * (b.powf(g) - 1.0) * c).sum();
        g * (area - total(q)) + prod
    };
    let a1 = log_moment(lam, eta);
    let a2 = log_moment(eta, eta);
    let a3 = log_moment(lam, lam);
    Ok(-(a1 - g / (g + 1.0) * a2 - a3 / (g + 1.0)) / g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::finite_diff_grad;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> PresenceData {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grid = RegionGrid::gaussian(10, 2, 20.0, &mut rng).unwrap();
        let lam = LogLinearIntensity::new(vec![0.5, 1.0, -0.5]).on_grid(&grid).unwrap();
        simulate_ppp(&grid, &lam, &mut rng).unwrap()
    }

    #[test]
    fn zero_intensity_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let grid = RegionGrid::gaussian(4, 2, 1.0, &mut rng).unwrap();
        let d = simulate_ppp(&grid, &[0.0; 16], &mut rng).unwrap();
        assert_eq!(d.m(), 0);
        assert_eq!(d.n(), 16);
    }

    #[test]
    fn weights_cover_region() {
        let d = toy();
        let s: f64 = d.weights().iter().sum();
        assert!((s - 20.0).abs() < 1e-12);
    }

    #[test]
    fn losses_match_finite_differences() {
        let d = toy();
        let th = [0.3, 0.8, -0.2];
        let pareto = CdfWeight::Pareto { c: 1.2, eta: 0.5 };
        let cases: Vec<Box<dyn Fn(&[f64]) -> Result<(f64, Vec<f64>)>>> = vec![
            Box::new(|t| neg_loglik(t, &d)),
            Box::new(|t| beta_loss(t, &d, 0.3)),
            Box::new(|t| gamma_loss(t, &d, 0.5)),
            Box::new(|t| gm_loss(t, &d)),
            Box::new(|t| f_loss(t, &d, &CdfWeight::pareto_sigma(1.2))),
            Box::new(|t| f_loss(t, &d, &pareto)),
        ];
        for f in &cases {
            let (_, g) = f(&th).unwrap();
            let n = finite_diff_grad(|t| f(t).unwrap().0, &th, 1e-5);
            for (a, b) in g.iter().zip(&n) {
                assert!((a - b).abs() < 1e-5 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn gamma_loss_ignores_intercept() {
        let d = toy();
        let a = gamma_loss(&[0.3, 0.8, -0.2], &d, 0.5).unwrap().0;
        let b = gamma_loss(&[2.3, 0.8, -0.2], &d, 0.5).unwrap().0;
        assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn point_mass_cdf_is_ml() {
        let d = toy();
        let th = [0.3, 0.8, -0.2];
        assert_eq!(
            f_score(&th, &d, &CdfWeight::PointMassAtZero).unwrap(),
            ml_score(&th, &d).unwrap()
        );
    }

    #[test]
    fn tabulated_primitives() {
        let f = CdfWeight::Tabulated { z: vec![0.0, 2.0], f: vec![0.0, 1.0] };
        let (a, b) = f.primitives(3.0).unwrap();
        assert!((a - (1.0 + (1.5f64).ln())).abs() < 1e-14);
        assert!((b - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gm_fast_matches_generic() {
        let d = toy();
        let cfg = OptimConfig { tol: 1e-11, ..OptimConfig::default() };
        let fast = gm_fit(&d, None, &cfg).unwrap();
        let slow = fit(&PppEstimator::GM, &d, None, &cfg).unwrap();
        for (a, b) in fast.theta.iter().zip(&slow.theta) {
            assert!((a - b).abs() < 1e-8);
        }
        let s = gm_score(&fast.theta, &d).unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn log_gamma_equals_beta_intensity() {
        let lam = [0.5, 1.2, 3.0, 0.1];
        let eta = [0.7, 1.0, 2.0, 0.4];
        let w = [0.25, 0.5, 0.125, 0.125];
        for g in [-0.5, 0.3, 1.5, -2.0] {
            let a = ppp_log_gamma_div(&lam, &eta, &w, g).unwrap();
            let b = intensity_divergence(&lam, &eta, &w, IntensityKind::Beta(g)).unwrap();
            assert!((a - b).abs() < 1e-10, "{g}: {a} vs {b}");
        }
    }
}
