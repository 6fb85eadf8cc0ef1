//! Boltzmann machines fitted by the GM divergence.
//!
//! Visible-only machines live on {−1,1}^d with energy E(x) = −bᵀx − xᵀWx,
//! W symmetric with zero diagonal, so each pair enters twice. Machines with
//! hidden units live on {0,1}^d × {0,1}^ℓ. The GM loss needs no partition
//! function; the exact likelihood enumerates all 2^d states and is guarded
//! at d ≤ 20.
//!
//! Parameter vectors flatten as `[b, W_jk for j < k]` (visible) and
//! `[b, c, W row-major]` (hidden). Scores are negative loss gradients.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::kernels::{log_sum_exp, sigmoid, softplus};
use crate::optim::{self, OptimConfig, Status};

pub const MAX_EXACT_DIM: usize = 20;
const EXP_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alphabet {
    PlusMinus,
    ZeroOne,
}

impl Alphabet {
    fn admits(self, v: f64) -> bool {
        match self {
            Alphabet::PlusMinus => v == 1.0 || v == -1.0,
            Alphabet::ZeroOne => v == 0.0 || v == 1.0,
        }
    }

    fn state(self, bits: usize, d: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate().take(d) {
            let on = (bits >> j) & 1 == 1;
            *o = match (self, on) {
                (Alphabet::PlusMinus, true) => 1.0,
                (Alphabet::PlusMinus, false) => -1.0,
                (Alphabet::ZeroOne, true) => 1.0,
                (Alphabet::ZeroOne, false) => 0.0,
            };
        }
    }
}

/// Rows of binary observations over a fixed alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySamples {
    d: usize,
    alphabet: Alphabet,
    x: Vec<f64>,
}

impl BinarySamples {
    pub fn new(d: usize, alphabet: Alphabet, x: Vec<f64>) -> Result<Self> {
        if d == 0 || x.is_empty() || x.len() % d != 0 {
            return Err(Error::InvalidData("sample length must be a positive multiple of d".into()));
        }
        if let Some(i) = x.iter().position(|&v| !alphabet.admits(v)) {
            return Err(Error::InvalidData(format!(
                "value {} at row {} column {} outside the {alphabet:?} alphabet",
                x[i],
                i / d,
                i % d
            )));
        }
        Ok(Self { d, alphabet, x })
    }

    pub fn from_rows(rows: &[Vec<f64>], alphabet: Alphabet) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidData("ragged rows".into()));
        }
        Self::new(d, alphabet, rows.concat())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.x.len() / self.d
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }
}

/// Visible-unit machine on {−1,1}^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmParams {
    d: usize,
    b: Vec<f64>,
    w: Vec<f64>,
}

impl BmParams {
    pub fn zeros(d: usize) -> Self {
        Self { d, b: vec![0.0; d], w: vec![0.0; d * d] }
    }

    /// From biases and a full matrix; rejects asymmetry or a nonzero diagonal.
    pub fn new(b: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let d = b.len();
        if w.len() != d * d {
            return Err(Error::InvalidParam("W must be d × d".into()));
        }
        for j in 0..d {
            if w[j * d + j] != 0.0 {
                return Err(Error::InvalidParam("W must have a zero diagonal".into()));
            }
            for k in 0..j {
                if w[j * d + k] != w[k * d + j] {
                    return Err(Error::InvalidParam("W must be symmetric".into()));
                }
            }
        }
        if b.iter().chain(&w).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("non-finite parameter".into()));
        }
        Ok(Self { d, b, w })
    }

    pub fn n_params(d: usize) -> usize {
        d + d * (d - 1) / 2
    }

    pub fn from_vec(d: usize, v: &[f64]) -> Result<Self> {
        if v.len() != Self::n_params(d) {
            return Err(Error::InvalidParam("parameter vector length".into()));
        }
        let mut p = Self::zeros(d);
        p.b.copy_from_slice(&v[..d]);
        let mut idx = d;
        for j in 0..d {
            for k in j + 1..d {
                p.w[j * d + k] = v[idx];
                p.w[k * d + j] = v[idx];
                idx += 1;
            }
        }
        Ok(p)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let d = self.d;
        let mut v = self.b.clone();
        for j in 0..d {
            for k in j + 1..d {
                v.push(self.w[j * d + k]);
            }
        }
        v
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn w(&self, j: usize, k: usize) -> f64 {
        self.w[j * self.d + k]
    }

    /// Uniform draws b_j ∈ [−sb, sb], W_jk ∈ [−sw, sw].
    pub fn random<R: Rng + ?Sized>(d: usize, sb: f64, sw: f64, rng: &mut R) -> Self {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-sb..=sb)).collect();
        v.extend((0..d * (d - 1) / 2).map(|_| rng.random_range(-sw..=sw)));
        Self::from_vec(d, &v).expect("length matches by construction")
    }

    fn energy_unchecked(&self, x: &[f64]) -> f64 {
        let d = self.d;
        let mut e = 0.0;
        for j in 0..d {
            let row = &self.w[j * d..(j + 1) * d];
            let wx: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            e -= x[j] * (self.b[j] + wx);
        }
        e
    }

    /// Sufficient statistic −∂E/∂θ = [x, 2 x_j x_k].
    fn stat(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        out[..d].copy_from_slice(x);
        let mut idx = d;
        for j in 0..d {
            for k in j + 1..d {
                out[idx] = 2.0 * x[j] * x[k];
                idx += 1;
            }
        }
    }
}

/// E(x) = −bᵀx − xᵀWx on {−1,1}^d.
pub fn energy(x: &[f64], params: &BmParams) -> Result<f64> {
    if x.len() != params.d {
        return Err(Error::InvalidData("state length differs from d".into()));
    }
    if x.iter().any(|&v| !Alphabet::PlusMinus.admits(v)) {
        return Err(Error::InvalidData("visible states take values in {−1, 1}".into()));
    }
    Ok(params.energy_unchecked(x))
}

fn check_visible(params: &BmParams, data: &BinarySamples) -> Result<()> {
    if data.alphabet != Alphabet::PlusMinus {
        return Err(Error::InvalidData("visible machine expects {−1, 1} data".into()));
    }
    if data.d != params.d {
        return Err(Error::InvalidData("data dimension differs from d".into()));
    }
    Ok(())
}

/// log Z and model moments E_θ[−∂E/∂θ] by enumeration.
fn enumerate_moments(params: &BmParams) -> Result<(f64, Vec<f64>)> {
    let d = params.d;
    if d > MAX_EXACT_DIM {
        return Err(Error::InvalidParam(format!("exact enumeration limited to d ≤ {MAX_EXACT_DIM}")));
    }
    let p = BmParams::n_params(d);
    let m = 1usize << d;
    let mut x = vec![0.0; d];
    let neg: Vec<f64> = (0..m)
        .map(|s| {
            Alphabet::PlusMinus.state(s, d, &mut x);
            -params.energy_unchecked(&x)
        })
        .collect();
    let log_z = log_sum_exp(&neg);
    let mut mom = vec![0.0; p];
    let mut st = vec![0.0; p];
    for (s, ne) in neg.iter().enumerate() {
        Alphabet::PlusMinus.state(s, d, &mut x);
        params.stat(&x, &mut st);
        let pr = (ne - log_z).exp();
        for (a, b) in mom.iter_mut().zip(&st) {
            *a += pr * b;
        }
    }
    Ok((log_z, mom))
}

fn log_partition(params: &BmParams) -> Result<f64> {
    let d = params.d;
    if d > MAX_EXACT_DIM {
        return Err(Error::InvalidParam(format!("exact enumeration limited to d ≤ {MAX_EXACT_DIM}")));
    }
    let mut x = vec![0.0; d];
    let neg: Vec<f64> = (0..1usize << d)
        .map(|s| {
            Alphabet::PlusMinus.state(s, d, &mut x);
            -params.energy_unchecked(&x)
        })
        .collect();
    Ok(log_sum_exp(&neg))
}

/// Σ E(x_i) + N log Z by exhaustive enumeration (d ≤ 20).
pub fn nll_exact(params: &BmParams, data: &BinarySamples) -> Result<f64> {
    check_visible(params, data)?;
    let log_z = log_partition(params)?;
    let s: f64 = (0..data.n()).map(|i| params.energy_unchecked(data.row(i))).sum();
    Ok(s + data.n() as f64 * log_z)
}

/// Per-observation negative log-likelihood and its gradient in the flat parameter.
pub fn nll_exact_mean(params: &BmParams, data: &BinarySamples) -> Result<(f64, Vec<f64>)> {
    check_visible(params, data)?;
    let (log_z, mom) = enumerate_moments(params)?;
    let p = mom.len();
    let n = data.n() as f64;
    let mut loss = 0.0;
    let mut grad = mom;
    let mut st = vec![0.0; p];
    for i in 0..data.n() {
        let x = data.row(i);
        loss += params.energy_unchecked(x);
        params.stat(x, &mut st);
        for (g, s) in grad.iter_mut().zip(&st) {
            *g -= s / n;
        }
    }
    Ok((loss / n + log_z, grad))
}

/// Averaged energy over {−1,1}^d; exactly zero because x̄ = 0, avg xxᵀ = I and diag W = 0.
pub fn mean_energy(params: &BmParams) -> f64 {
    debug_assert!((0..params.d).all(|j| params.w(j, j) == 0.0));
    0.0
}

/// GM loss (1/N) Σ exp{E(x_i) − Ē}.
pub fn gm_loss(params: &BmParams, data: &BinarySamples) -> Result<f64> {
    check_visible(params, data)?;
    let ebar = mean_energy(params);
    let mut s = 0.0;
    for i in 0..data.n() {
        let e = params.energy_unchecked(data.row(i)) - ebar;
        if e > EXP_LIMIT {
            return Err(Error::Overflow(format!("exp of energy {e:.3e}")));
        }
        s += e.exp();
    }
    Ok(s / data.n() as f64)
}

/// Loss, gradient and Hessian of the GM loss.
fn gm_derivs(params: &BmParams, data: &BinarySamples, hessian: bool) -> Result<(f64, Vec<f64>, Option<DMatrix<f64>>)> {
    check_visible(params, data)?;
    let p = BmParams::n_params(params.d);
    let n = data.n() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; p];
    let mut hess = if hessian { Some(DMatrix::<f64>::zeros(p, p)) } else { None };
    let mut st = vec![0.0; p];
    for i in 0..data.n() {
        let x = data.row(i);
        let e = params.energy_unchecked(x) - mean_energy(params);
        if e > EXP_LIMIT {
            return Err(Error::Overflow(format!("exp of energy {e:.3e}")));
        }
        let we = e.exp() / n;
        loss += we;
        params.stat(x, &mut st);
        for (g, s) in grad.iter_mut().zip(&st) {
            *g -= we * s;
        }
        if let Some(h) = hess.as_mut() {
            for a in 0..p {
                let sa = we * st[a];
                for b in a..p {
                    h[(a, b)] += sa * st[b];
                }
            }
        }
    }
    if let Some(h) = hess.as_mut() {
        for a in 0..p {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
    }
    Ok((loss, grad, hess))
}

/// (1/N) Σ exp{E(x_i) − Ē} [x_i; 2 x_ij x_ik], the negative loss gradient.
pub fn gm_score(params: &BmParams, data: &BinarySamples) -> Result<Vec<f64>> {
    let (_, g, _) = gm_derivs(params, data, false)?;
    Ok(g.into_iter().map(|v| -v).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonStep {
    pub params: BmParams,
    pub step_norm: f64,
    /// True when the moment matrix needed Levenberg damping.
    pub damped: bool,
}

/// One Newton step θ ← θ + {Σ e^{E_i} s_i s_iᵀ}⁻¹ S_GM(θ).
pub fn newton_update(params: &BmParams, data: &BinarySamples) -> Result<NewtonStep> {
    let (_, grad, hess) = gm_derivs(params, data, true)?;
    let h = hess.expect("requested");
    let g = DVector::from_column_slice(&grad);
    let mut damped = false;
    let step = match h.clone().cholesky() {
        Some(c) => c.solve(&g),
        None => {
            damped = true;
            let scale = h.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
            let mut lam = 1e-8 * scale;
            loop {
                let mut hd = h.clone();
                for a in 0..hd.nrows() {
                    hd[(a, a)] += lam;
                }
                if let Some(c) = hd.cholesky() {
                    break c.solve(&g);
                }
                lam *= 10.0;
                if lam > 1e12 * scale {
                    return Err(Error::Degenerate("moment matrix cannot be regularized".into()));
                }
            }
        }
    };
    let theta: Vec<f64> = params.to_vec().iter().zip(step.iter()).map(|(a, s)| a - s).collect();
    Ok(NewtonStep {
        params: BmParams::from_vec(params.d, &theta)?,
        step_norm: step.norm(),
        damped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmFit {
    pub params: BmParams,
    pub status: Status,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub damped_steps: usize,
}

/// GM estimator by damped Newton steps with step halving.
pub fn gm_fit(data: &BinarySamples, init: Option<&BmParams>, cfg: &OptimConfig) -> Result<BmFit> {
    cfg.validate()?;
    let d = data.d;
    let mut params = init.cloned().unwrap_or_else(|| BmParams::zeros(d));
    let (mut loss, mut grad, _) = gm_derivs(&params, data, false)?;
    let inf = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut it = 0;
    let mut damped_steps = 0;
    while inf(&grad) >= cfg.tol && it < cfg.max_iter {
        it += 1;
        let nt = newton_update(&params, data)?;
        damped_steps += nt.damped as usize;
        let base = params.to_vec();
        let full = nt.params.to_vec();
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = base.iter().zip(&full).map(|(a, b)| a + t * (b - a)).collect();
            let cand = BmParams::from_vec(d, &trial)?;
            if let Ok((l, g, _)) = gm_derivs(&cand, data, false) {
                if l <= loss {
                    params = cand;
                    loss = l;
                    grad = g;
                    break;
                }
            }
            t *= cfg.shrink;
            if t < cfg.step_floor {
                return Ok(BmFit {
                    params,
                    status: Status::NonConverged,
                    loss,
                    grad_norm: inf(&grad),
                    iterations: it,
                    damped_steps,
                });
            }
        }
    }
    let status = if inf(&grad) < cfg.tol { Status::Converged } else { Status::NonConverged };
    Ok(BmFit { params, status, loss, grad_norm: inf(&grad), iterations: it, damped_steps })
}

/// Exact maximum likelihood through enumeration (d ≤ 20).
pub fn ml_fit(data: &BinarySamples, init: Option<&BmParams>, cfg: &OptimConfig) -> Result<BmFit> {
    let d = data.d;
    let start = init.cloned().unwrap_or_else(|| BmParams::zeros(d)).to_vec();
    let out = optim::minimize(
        |t: &[f64]| nll_exact_mean(&BmParams::from_vec(d, t)?, data),
        &start,
        cfg,
    )?;
    Ok(BmFit {
        params: BmParams::from_vec(d, &out.theta)?,
        status: out.status,
        loss: out.value,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        damped_steps: 0,
    })
}

/// Single-site Gibbs chain on {−1,1}^d, keeping every `thin`-th sweep.
pub fn gibbs_sample<R: Rng + ?Sized>(
    params: &BmParams,
    n: usize,
    burn_in: usize,
    thin: usize,
    rng: &mut R,
) -> Result<BinarySamples> {
    let d = params.d;
    if n == 0 || thin == 0 {
        return Err(Error::InvalidParam("n and thin must be positive".into()));
    }
    let mut x: Vec<f64> = (0..d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let mut out = Vec::with_capacity(n * d);
    let sweep = |x: &mut Vec<f64>, rng: &mut R| {
        for j in 0..d {
            let row = &params.w[j * d..(j + 1) * d];
            let field = params.b[j] + 2.0 * row.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>();
            x[j] = if rng.random::<f64>() < sigmoid(2.0 * field) { 1.0 } else { -1.0 };
        }
    };
    for _ in 0..burn_in {
        sweep(&mut x, rng);
    }
    for _ in 0..n {
        for _ in 0..thin {
            sweep(&mut x, rng);
        }
        out.extend_from_slice(&x);
    }
    BinarySamples::new(d, Alphabet::PlusMinus, out)
}

/// Machine with ℓ hidden units on {0,1}^d × {0,1}^ℓ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenBmParams {
    pub d: usize,
    pub l: usize,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// d × ℓ, row-major.
    pub w: Vec<f64>,
}

impl HiddenBmParams {
    pub fn new(b: Vec<f64>, c: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let (d, l) = (b.len(), c.len());
        if w.len() != d * l {
            return Err(Error::InvalidParam("W must be d × ℓ".into()));
        }
        if b.iter().chain(&c).chain(&w).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("non-finite parameter".into()));
        }
        Ok(Self { d, l, b, c, w })
    }

    pub fn from_vec(d: usize, l: usize, v: &[f64]) -> Result<Self> {
        if v.len() != d + l + d * l {
            return Err(Error::InvalidParam("parameter vector length".into()));
        }
        Self::new(v[..d].to_vec(), v[d..d + l].to_vec(), v[d + l..].to_vec())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        [self.b.as_slice(), &self.c, &self.w].concat()
    }

    fn activations(&self, x: &[f64]) -> Vec<f64> {
        (0..self.l)
            .map(|k| self.c[k] + (0..self.d).map(|j| x[j] * self.w[j * self.l + k]).sum::<f64>())
            .collect()
    }

    fn tilde(&self, x: &[f64]) -> f64 {
        let bx: f64 = self.b.iter().zip(x).map(|(a, b)| a * b).sum();
        -bx - self.activations(x).into_iter().map(softplus).sum::<f64>()
    }

    /// ∂Ẽ/∂θ at x.
    fn tilde_grad(&self, x: &[f64], out: &mut [f64]) {
        let (d, l) = (self.d, self.l);
        let act = self.activations(x);
        for j in 0..d {
            out[j] = -x[j];
        }
        for k in 0..l {
            let h = sigmoid(act[k]);
            out[d + k] = -h;
            for j in 0..d {
                out[d + l + j * l + k] = -x[j] * h;
            }
        }
    }
}

fn check_hidden_state(x: &[f64], params: &HiddenBmParams) -> Result<()> {
    if x.len() != params.d || x.iter().any(|&v| !Alphabet::ZeroOne.admits(v)) {
        return Err(Error::InvalidData("hidden-unit machines take states in {0,1}^d".into()));
    }
    Ok(())
}

/// Joint energy −bᵀx − cᵀh − xᵀWh.
pub fn joint_energy(x: &[f64], h: &[f64], params: &HiddenBmParams) -> Result<f64> {
    check_hidden_state(x, params)?;
    if h.len() != params.l || h.iter().any(|&v| !Alphabet::ZeroOne.admits(v)) {
        return Err(Error::InvalidData("hidden states take values in {0,1}".into()));
    }
    let mut e = -params.b.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    e -= params.c.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
    for j in 0..params.d {
        for k in 0..params.l {
            e -= x[j] * params.w[j * params.l + k] * h[k];
        }
    }
    Ok(e)
}

/// Ẽ(x) = −bᵀx − Σ_k log(1 + exp{c_k + Σ_j x_j W_jk}).
pub fn hidden_tilde_energy(x: &[f64], params: &HiddenBmParams) -> Result<f64> {
    check_hidden_state(x, params)?;
    Ok(params.tilde(x))
}

/// E[H_k | x] = logistic(c_k + Σ_j x_j W_jk).
pub fn hidden_conditional_means(x: &[f64], params: &HiddenBmParams) -> Result<Vec<f64>> {
    check_hidden_state(x, params)?;
    Ok(params.activations(x).into_iter().map(sigmoid).collect())
}

/// Ē and ∇Ē averaged over all 2^d visible states.
fn hidden_mean_energy(params: &HiddenBmParams) -> Result<(f64, Vec<f64>)> {
    let d = params.d;
    if d > MAX_EXACT_DIM {
        return Err(Error::InvalidParam(format!("state average limited to d ≤ {MAX_EXACT_DIM}")));
    }
    let p = d + params.l + d * params.l;
    let m = 1usize << d;
    let mut x = vec![0.0; d];
    let mut g = vec![0.0; p];
    let mut tmp = vec![0.0; p];
    let mut e = 0.0;
    for s in 0..m {
        Alphabet::ZeroOne.state(s, d, &mut x);
        e += params.tilde(&x);
        params.tilde_grad(&x, &mut tmp);
        for (a, b) in g.iter_mut().zip(&tmp) {
            *a += b;
        }
    }
    let mf = m as f64;
    g.iter_mut().for_each(|v| *v /= mf);
    Ok((e / mf, g))
}

fn check_hidden_data(params: &HiddenBmParams, data: &BinarySamples) -> Result<()> {
    if data.alphabet != Alphabet::ZeroOne || data.d != params.d {
        return Err(Error::InvalidData("hidden-unit machine expects {0,1}^d data".into()));
    }
    Ok(())
}

/// (1/N) Σ exp{Ẽ(x_i) − Ē} and its gradient.
pub fn hidden_gm_loss(params: &HiddenBmParams, data: &BinarySamples) -> Result<(f64, Vec<f64>)> {
    check_hidden_data(params, data)?;
    let (ebar, gbar) = hidden_mean_energy(params)?;
    let p = gbar.len();
    let n = data.n() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; p];
    let mut tmp = vec![0.0; p];
    for i in 0..data.n() {
        let x = data.row(i);
        let e = params.tilde(x) - ebar;
        if e > EXP_LIMIT {
            return Err(Error::Overflow(format!("exp of energy {e:.3e}")));
        }
        let we = e.exp() / n;
        loss += we;
        params.tilde_grad(x, &mut tmp);
        for a in 0..p {
            grad[a] += we * (tmp[a] - gbar[a]);
        }
    }
    Ok((loss, grad))
}

/// Negative gradient of [`hidden_gm_loss`].
pub fn hidden_gm_score(params: &HiddenBmParams, data: &BinarySamples) -> Result<Vec<f64>> {
    hidden_gm_loss(params, data).map(|(_, g)| g.into_iter().map(|v| -v).collect())
}

/// Machine with hidden units and a categorical output y ∈ {0..k−1}:
/// E = −bᵀx − cᵀh − d_y − xᵀWh − hᵀU e(y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedBmParams {
    pub hidden: HiddenBmParams,
    pub dy: Vec<f64>,
    /// ℓ × k, row-major.
    pub u: Vec<f64>,
}

impl SupervisedBmParams {
    pub fn new(hidden: HiddenBmParams, dy: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if dy.is_empty() || u.len() != hidden.l * dy.len() {
            return Err(Error::InvalidParam("U must be ℓ × k".into()));
        }
        Ok(Self { hidden, dy, u })
    }

    fn tilde(&self, x: &[f64], y: usize) -> f64 {
        let h = &self.hidden;
        let k = self.dy.len();
        let bx: f64 = h.b.iter().zip(x).map(|(a, b)| a * b).sum();
        let act = h.activations(x);
        -bx - self.dy[y] - (0..h.l).map(|j| softplus(act[j] + self.u[j * k + y])).sum::<f64>()
    }
}

/// GM loss (1/N) Σ exp{Ẽ(x_i, y_i) − Ē}, Ē averaged over {0,1}^d × labels.
pub fn supervised_gm_loss(params: &SupervisedBmParams, data: &BinarySamples, y: &[usize]) -> Result<f64> {
    check_hidden_data(&params.hidden, data)?;
    let k = params.dy.len();
    if y.len() != data.n() || y.iter().any(|&v| v >= k) {
        return Err(Error::InvalidData("labels must match rows and lie in 0..k".into()));
    }
    let d = params.hidden.d;
    if d > MAX_EXACT_DIM {
        return Err(Error::InvalidParam(format!("state average limited to d ≤ {MAX_EXACT_DIM}")));
    }
    let mut x = vec![0.0; d];
    let mut ebar = 0.0;
    for s in 0..1usize << d {
        Alphabet::ZeroOne.state(s, d, &mut x);
        for c in 0..k {
            ebar += params.tilde(&x, c);
        }
    }
    ebar /= ((1usize << d) * k) as f64;
    let mut s = 0.0;
    for i in 0..data.n() {
        let e = params.tilde(data.row(i), y[i]) - ebar;
        if e > EXP_LIMIT {
            return Err(Error::Overflow(format!("exp of energy {e:.3e}")));
        }
        s += e.exp();
    }
    Ok(s / data.n() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub d: usize,
    pub n: usize,
    /// Absent above the enumeration guard.
    pub t_nll_ms: Option<f64>,
    pub t_gm_ms: f64,
}

/// Median wall-clock time of `f` over repeated runs totalling at least `budget_ms`.
pub fn median_time_ms<T>(mut f: impl FnMut() -> T, budget_ms: f64) -> f64 {
    let mut times = Vec::new();
    let mut total = 0.0;
    while times.len() < 3 || total < budget_ms {
        let t0 = Instant::now();
        std::hint::black_box(f());
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        total += ms;
        times.push(ms);
        if times.len() >= 10_000 {
            break;
        }
    }
    times.sort_by(f64::total_cmp);
    times[times.len() / 2]
}

/// Per-evaluation times of the exact likelihood and the GM loss on uniform data.
pub fn timing_benchmark<R: Rng + ?Sized>(dims: &[usize], n: usize, rng: &mut R) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::with_capacity(dims.len());
    for &d in dims {
        if d == 0 || n == 0 {
            return Err(Error::InvalidParam("dimensions and sample size must be positive".into()));
        }
        let params = BmParams::random(d, 0.3, 0.2 / (d as f64).sqrt(), rng);
        let x: Vec<f64> = (0..n * d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let data = BinarySamples::new(d, Alphabet::PlusMinus, x)?;
        gm_loss(&params, &data)?;
        let t_gm_ms = median_time_ms(|| gm_loss(&params, &data), 50.0);
        let t_nll_ms = if d <= MAX_EXACT_DIM {
            Some(median_time_ms(|| nll_exact(&params, &data), 50.0))
        } else {
            None
        };
        rows.push(TimingRow { d, n, t_nll_ms, t_gm_ms });
    }
    Ok(rows)
}
