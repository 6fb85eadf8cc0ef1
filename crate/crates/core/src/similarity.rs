//! Power-transformed cosine measures, clustering utilities and γ-PCA.
//!
//! The (β,γ)-cosine of x and y is ⟨(x/‖x‖_{β+γ})^{⊖β}, (y/‖y‖_{β+γ})^{⊖γ}⟩ where
//! v^{⊖a} = sign(v)|v|^a. The γ-cosine is the β = 1 member and (1,1) is the usual cosine.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Componentwise sign(x)|x|^γ; γ = 0 gives the sign vector.
pub fn signed_power(x: &[f64], g: f64) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            if v == 0.0 {
                0.0
            } else if g == 0.0 {
                v.signum()
            } else {
                v.signum() * v.abs().powf(g)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineParams {
    pub beta: f64,
    pub gamma: f64,
}

impl CosineParams {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        if !(beta >= 0.0 && gamma >= 0.0 && beta + gamma > 0.0) || !beta.is_finite() || !gamma.is_finite() {
            return Err(Error::InvalidParam("need β, γ ≥ 0 with β + γ > 0".into()));
        }
        Ok(Self { beta, gamma })
    }

    pub fn standard() -> Self {
        Self { beta: 1.0, gamma: 1.0 }
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// ‖x‖_p computed on x/‖x‖_∞ to avoid overflow at large p.
pub fn lp_norm(x: &[f64], p: f64) -> f64 {
    let m = max_abs(x);
    if m == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return m;
    }
    m * x.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidData("vectors must have equal nonzero length".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite entry".into()));
    }
    if max_abs(x) == 0.0 || max_abs(y) == 0.0 {
        return Err(Error::InvalidData("zero vector".into()));
    }
    Ok(())
}

pub fn beta_gamma_cos(x: &[f64], y: &[f64], beta: f64, g: f64) -> Result<f64> {
    let p = CosineParams::new(beta, g)?;
    check_pair(x, y)?;
    let r = p.beta + p.gamma;
    let nx = lp_norm(x, r);
    let ny = lp_norm(y, r);
    let ex = signed_power(&x.iter().map(|v| v / nx).collect::<Vec<_>>(), p.beta);
    let ey = signed_power(&y.iter().map(|v| v / ny).collect::<Vec<_>>(), p.gamma);
    Ok(ex.iter().zip(&ey).map(|(a, b)| a * b).sum())
}

/// γ-cosine, the (1, γ) member.
pub fn gamma_cos(x: &[f64], y: &[f64], g: f64) -> Result<f64> {
    beta_gamma_cos(x, y, 1.0, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CosLimit {
    GammaZero,
    GammaInf,
}

/// sign(y_i) I(|y_i| = ‖y‖_∞).
pub fn sign_inf(y: &[f64]) -> Vec<f64> {
    let m = max_abs(y);
    y.iter().map(|v| if v.abs() == m { v.signum() } else { 0.0 }).collect()
}

pub fn cos_limit(x: &[f64], y: &[f64], beta: f64, which: CosLimit) -> Result<f64> {
    check_pair(x, y)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParam("β must be finite and nonnegative".into()));
    }
    let (nx, ey) = match which {
        CosLimit::GammaZero => {
            if beta == 0.0 {
                return Err(Error::InvalidParam("γ → 0 limit needs β > 0".into()));
            }
            (lp_norm(x, beta), signed_power(y, 0.0))
        }
        CosLimit::GammaInf => {
            let s = sign_inf(y);
            let l1: f64 = s.iter().map(|v| v.abs()).sum();
            (max_abs(x), s.into_iter().map(|v| v / l1).collect())
        }
    };
    let ex = signed_power(&x.iter().map(|v| v / nx).collect::<Vec<_>>(), beta);
    Ok(ex.iter().zip(&ey).map(|(a, b)| a * b).sum())
}

/// Row-major symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DistMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidData("distance matrix must be n × n".into()));
        }
        Ok(Self { n, data })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// d(x,y) = 1 − ½[cos(x,y) + cos(y,x)] with a zero diagonal.
pub fn pairwise_distance(rows: &[Vec<f64>], params: CosineParams) -> Result<DistMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::InvalidData("no rows".into()));
    }
    let CosineParams { beta, gamma } = CosineParams::new(params.beta, params.gamma)?;
    let r = beta + gamma;
    let mut ex = Vec::with_capacity(n);
    let mut ey = Vec::with_capacity(n);
    for row in rows {
        check_pair(row, row)?;
        let nr = lp_norm(row, r);
        let unit: Vec<f64> = row.iter().map(|v| v / nr).collect();
        ex.push(signed_power(&unit, beta));
        ey.push(signed_power(&unit, gamma));
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let data: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let ex = &ex;
            let ey = &ey;
            (0..n).map(move |j| {
                if i == j {
                    0.0
                } else {
                    1.0 - 0.5 * (dot(&ex[i], &ey[j]) + dot(&ex[j], &ey[i]))
                }
            })
        })
        .collect();
    DistMatrix::new(n, data)
}

/// Average-linkage agglomeration cut at k clusters. Labels follow first appearance.
pub fn agglomerative_cluster(dist: &DistMatrix, k: usize) -> Result<Vec<usize>> {
    let n = dist.n;
    if k == 0 || k > n {
        return Err(Error::InvalidParam(format!("cannot cut {n} points into {k} clusters")));
    }
    let mut size = vec![1usize; n];
    let mut alive = vec![true; n];
    let mut owner: Vec<usize> = (0..n).collect();
    let mut d = dist.data.clone();
    for _ in 0..n - k {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for j in i + 1..n {
                if alive[j] && d[i * n + j] < best.0 {
                    best = (d[i * n + j], i, j);
                }
            }
        }
        let (_, a, b) = best;
        // Lance-Williams update for average linkage
        for c in 0..n {
            if alive[c] && c != a && c != b {
                let v = (size[a] as f64 * d[a * n + c] + size[b] as f64 * d[b * n + c]) / (size[a] + size[b]) as f64;
                d[a * n + c] = v;
                d[c * n + a] = v;
            }
        }
        size[a] += size[b];
        alive[b] = false;
        for o in owner.iter_mut() {
            if *o == b {
                *o = a;
            }
        }
    }
    Ok(relabel(&owner))
}

pub(crate) fn relabel(owner: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    owner
        .iter()
        .map(|o| {
            let next = map.len();
            *map.entry(*o).or_insert(next)
        })
        .collect()
}

/// Mean silhouette (b − a)/max(a, b); singletons score 0.
pub fn silhouette(dist: &DistMatrix, labels: &[usize]) -> Result<f64> {
    let n = dist.n;
    if labels.len() != n {
        return Err(Error::InvalidData("one label per point required".into()));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(Error::Degenerate("silhouette needs at least two clusters".into()));
    }
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    let mut total = 0.0;
    let mut defined = 0;
    for i in 0..n {
        let li = labels[i];
        if counts[li] == 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += dist.get(i, j);
            }
        }
        let a = sums[li] / (counts[li] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != li && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 1e-12 {
            total += (b - a) / m;
            defined += 1;
        }
    }
    if defined == 0 {
        return Err(Error::Degenerate("all distances vanish; silhouette undefined".into()));
    }
    Ok(total / n as f64)
}

fn transformed_centred(rows: &[Vec<f64>], g: f64) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidData("need at least two rows".into()));
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidData("rows must be finite and of equal length".into()));
    }
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::InvalidParam("γ must be positive".into()));
    }
    let mut z = DMatrix::<f64>::zeros(n, d);
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in signed_power(r, g).into_iter().enumerate() {
            z[(i, j)] = v;
        }
    }
    for j in 0..d {
        let m = z.column(j).sum() / n as f64;
        z.column_mut(j).add_scalar_mut(-m);
    }
    if z.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("zero variance after transformation".into()));
    }
    Ok(z)
}

/// γ-sample covariance (1/n) Σ (x_i^{⊖γ} − mean)(x_i^{⊖γ} − mean)ᵀ.
pub fn gamma_cov(rows: &[Vec<f64>], g: f64) -> Result<DMatrix<f64>> {
    let z = transformed_centred(rows, g)?;
    Ok(z.transpose() * &z / rows.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaPca {
    /// Nonzero-spectrum eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors as columns, aligned with `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub cumulative: Vec<f64>,
}

/// Eigen-decomposition of the γ-covariance. When n < d the n × n Gram matrix is
/// diagonalized instead; the nonzero spectra coincide.
pub fn gamma_pca(rows: &[Vec<f64>], g: f64) -> Result<GammaPca> {
    let z = transformed_centred(rows, g)?;
    let n = z.nrows();
    let d = z.ncols();
    let (vals, vecs) = if n < d {
        let gram = &z * z.transpose() / n as f64;
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut vecs = DMatrix::<f64>::zeros(d, n);
        let mut vals = Vec::with_capacity(n);
        for (c, &o) in order.iter().enumerate() {
            let lam = eig.eigenvalues[o].max(0.0);
            vals.push(lam);
            if lam > 1e-12 {
                let v = z.transpose() * eig.eigenvectors.column(o);
                let nv = v.norm();
                vecs.set_column(c, &(v / nv));
            }
        }
        (vals, vecs)
    } else {
        let eig = SymmetricEigen::new(z.transpose() * &z / n as f64);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut vecs = DMatrix::<f64>::zeros(d, d);
        let mut vals = Vec::with_capacity(d);
        for (c, &o) in order.iter().enumerate() {
            vals.push(eig.eigenvalues[o].max(0.0));
            vecs.set_column(c, &eig.eigenvectors.column(o));
        }
        (vals, vecs)
    };
    let total: f64 = vals.iter().sum();
    let mut acc = 0.0;
    let mut cumulative: Vec<f64> = vals
        .iter()
        .map(|v| {
            acc += v;
            (acc / total).min(1.0)
        })
        .collect();
    if let Some(last) = cumulative.last_mut() {
        *last = 1.0;
    }
    Ok(GammaPca { eigenvalues: vals, eigenvectors: vecs, cumulative })
}
