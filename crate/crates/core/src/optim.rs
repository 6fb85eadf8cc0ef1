//! Smooth minimization and estimating-equation solvers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    GradientDescent,
    DampedNewton,
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    /// ∞-norm threshold on the gradient (or residual).
    pub tol: f64,
    pub max_iter: usize,
    pub shrink: f64,
    /// Sufficient-decrease constant of the Armijo rule.
    pub armijo: f64,
    pub method: Method,
    pub step_floor: f64,
    /// Iterates with larger Euclidean norm abort as divergent.
    pub max_norm: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            shrink: 0.5,
            armijo: 1e-4,
            method: Method::DampedNewton,
            step_floor: 1e-16,
            max_norm: 1e8,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParam("tol > 0 and max_iter ≥ 1 required".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidParam("shrink must lie in (0,1)".into()));
        }
        Ok(())
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    NonConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub theta: Vec<f64>,
    pub status: Status,
    pub iterations: usize,
    pub value: f64,
    pub grad_norm: f64,
    /// Objective value at every accepted iterate, starting with `init`.
    pub trace: Vec<f64>,
}

impl OptimResult {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn axpy(theta: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    theta.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

/// Central-difference gradient.
pub fn finite_diff_grad(f: impl Fn(&[f64]) -> f64, theta: &[f64], h: f64) -> Vec<f64> {
    let mut x = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            x[i] = theta[i] + h;
            let up = f(&x);
            x[i] = theta[i] - h;
            let down = f(&x);
            x[i] = theta[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Jacobian, rows indexed by field component.
pub fn finite_diff_jacobian(
    field: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    theta: &[f64],
    m: usize,
) -> Result<DMatrix<f64>> {
    let p = theta.len();
    let mut jac = DMatrix::zeros(m, p);
    let mut x = theta.to_vec();
    for j in 0..p {
        let h = 1e-6 * theta[j].abs().max(1.0);
        x[j] = theta[j] + h;
        let up = field(&x)?;
        x[j] = theta[j] - h;
        let down = field(&x)?;
        x[j] = theta[j];
        for i in 0..m {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn check_finite(value: f64, grad: &[f64], theta: &[f64], it: usize) -> Result<()> {
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            detail: "objective or gradient".into(),
            iterations: it,
            last: theta.to_vec(),
        });
    }
    Ok(())
}

fn check_norm(theta: &[f64], cfg: &OptimConfig, it: usize, trace: &[f64]) -> Result<()> {
    let n = l2_norm(theta);
    if n > cfg.max_norm {
        return Err(Error::Divergent {
            norm: n,
            iterations: it,
            trace: trace.to_vec(),
        });
    }
    Ok(())
}

/// Solves (A + λI)x = b by Cholesky, raising λ until A + λI is positive definite.
fn damped_solve(a: &DMatrix<f64>, b: &DVector<f64>, lambda: &mut f64) -> Option<DVector<f64>> {
    let p = a.nrows();
    let scale = (0..p).map(|i| a[(i, i)].abs()).fold(1e-12, f64::max);
    for _ in 0..80 {
        let m = a + DMatrix::identity(p, p) * *lambda;
        if let Some(ch) = m.cholesky() {
            let x = ch.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        *lambda = (*lambda * 2.0).max(1e-10 * scale);
    }
    None
}

/// Minimizes `f` returning (value, gradient).
pub fn minimize<F>(f: F, init: &[f64], cfg: &OptimConfig) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    match cfg.method {
        Method::GradientDescent => gradient_descent(&f, init, cfg),
        Method::DampedNewton => damped_newton(&f, init, cfg),
        Method::FixedPoint => Err(Error::InvalidParam(
            "FixedPoint iterates a map; use fixed_point".into(),
        )),
    }
}

fn trial<F>(f: &F, x: &[f64]) -> Option<(f64, Vec<f64>)>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    match f(x) {
        Ok((v, g)) if v.is_finite() && g.iter().all(|z| z.is_finite()) => Some((v, g)),
        _ => None,
    }
}

/// Armijo backtracking along `dir`; falls back to plain non-increase at t = 1.
fn line_search<F>(
    f: &F,
    theta: &[f64],
    value: f64,
    slope: f64,
    dir: &[f64],
    t0: f64,
    cfg: &OptimConfig,
) -> Option<(f64, Vec<f64>, f64, Vec<f64>)>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut t = t0;
    let mut first = true;
    while t >= cfg.step_floor {
        let x = axpy(theta, t, dir);
        if let Some((v, g)) = trial(f, &x) {
            if v <= value + cfg.armijo * t * slope || (first && v <= value && slope < 0.0) {
                return Some((t, x, v, g));
            }
        }
        first = false;
        t *= cfg.shrink;
    }
    None
}

fn gradient_descent<F>(f: &F, init: &[f64], cfg: &OptimConfig) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (mut value, mut grad) = f(init)?;
    check_finite(value, &grad, init, 0)?;
    let mut theta = init.to_vec();
    let mut trace = vec![value];
    let mut t: f64 = 1.0;
    for it in 0..cfg.max_iter {
        let gn = inf_norm(&grad);
        if gn < cfg.tol {
            return Ok(done(theta, Status::Converged, it, value, gn, trace));
        }
        let dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        let slope = -grad.iter().map(|g| g * g).sum::<f64>();
        match line_search(f, &theta, value, slope, &dir, (t * 2.0).min(1e6), cfg) {
            Some((tt, x, v, g)) => {
                t = tt;
                theta = x;
                value = v;
                grad = g;
                trace.push(value);
                check_norm(&theta, cfg, it + 1, &trace)?;
            }
            None => {
                return Ok(done(theta, Status::NonConverged, it, value, gn, trace));
            }
        }
    }
    let gn = inf_norm(&grad);
    let status = if gn < cfg.tol { Status::Converged } else { Status::NonConverged };
    Ok(done(theta, status, cfg.max_iter, value, gn, trace))
}

fn done(theta: Vec<f64>, status: Status, iterations: usize, value: f64, grad_norm: f64, trace: Vec<f64>) -> OptimResult {
    OptimResult {
        theta,
        status,
        iterations,
        value,
        grad_norm,
        trace,
    }
}

fn fd_hessian<F>(f: &F, theta: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let p = theta.len();
    let grad = |x: &[f64]| f(x).map(|(_, g)| g);
    let mut h = finite_diff_jacobian(&grad, theta, p)?;
    let ht = h.transpose();
    h = (h + ht) * 0.5;
    Ok(h)
}

fn damped_newton<F>(f: &F, init: &[f64], cfg: &OptimConfig) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (mut value, mut grad) = f(init)?;
    check_finite(value, &grad, init, 0)?;
    let mut theta = init.to_vec();
    let mut trace = vec![value];
    let mut lambda = 0.0;
    for it in 0..cfg.max_iter {
        let gn = inf_norm(&grad);
        if gn < cfg.tol {
            return Ok(done(theta, Status::Converged, it, value, gn, trace));
        }
        let hess = match fd_hessian(f, &theta) {
            Ok(h) if h.iter().all(|v| v.is_finite()) => h,
            _ => DMatrix::identity(theta.len(), theta.len()),
        };
        let b = DVector::from_iterator(grad.len(), grad.iter().map(|g| -g));
        lambda /= 4.0;
        let mut accepted = false;
        for _ in 0..60 {
            let Some(step) = damped_solve(&hess, &b, &mut lambda) else {
                break;
            };
            let dir: Vec<f64> = step.iter().copied().collect();
            let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
            if slope < 0.0 {
                // Near the optimum loss differences drop below rounding; a full step
                // that halves the gradient while the value stays level is accepted.
                let x = axpy(&theta, 1.0, &dir);
                if let Some((v, g)) = trial(f, &x) {
                    let noise = 1e-12 * value.abs().max(1.0);
                    if v <= value + noise && inf_norm(&g) < 0.5 * gn {
                        theta = x;
                        value = v;
                        grad = g;
                        trace.push(value);
                        accepted = true;
                        break;
                    }
                }
                if let Some((_, x, v, g)) = line_search(f, &theta, value, slope, &dir, 1.0, cfg) {
                    theta = x;
                    value = v;
                    grad = g;
                    trace.push(value);
                    accepted = true;
                    break;
                }
            }
            let scale = (0..hess.nrows()).map(|i| hess[(i, i)].abs()).fold(1e-12, f64::max);
            lambda = (lambda * 2.0).max(1e-8 * scale);
        }
        if !accepted {
            // Last resort: steepest descent.
            let dir: Vec<f64> = grad.iter().map(|g| -g).collect();
            let slope = -grad.iter().map(|g| g * g).sum::<f64>();
            match line_search(f, &theta, value, slope, &dir, 1.0, cfg) {
                Some((_, x, v, g)) => {
                    theta = x;
                    value = v;
                    grad = g;
                    trace.push(value);
                }
                None => return Ok(done(theta, Status::NonConverged, it, value, gn, trace)),
            }
        }
        check_norm(&theta, cfg, it + 1, &trace)?;
    }
    let gn = inf_norm(&grad);
    let status = if gn < cfg.tol { Status::Converged } else { Status::NonConverged };
    Ok(done(theta, status, cfg.max_iter, value, gn, trace))
}

/// Solves S(θ) = 0 by damped Gauss-Newton on ½‖S‖² with a finite-difference Jacobian.
pub fn solve_score<S>(field: S, init: &[f64], cfg: &OptimConfig) -> Result<OptimResult>
where
    S: Fn(&[f64]) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    let phi = |x: &[f64]| -> Result<f64> {
        let s = field(x)?;
        Ok(0.5 * s.iter().map(|v| v * v).sum::<f64>())
    };
    let mut theta = init.to_vec();
    let mut s = field(&theta)?;
    let m = s.len();
    check_finite(0.0, &s, &theta, 0)?;
    let mut value = 0.5 * s.iter().map(|v| v * v).sum::<f64>();
    let mut trace = vec![value];
    let mut lambda = 0.0;
    for it in 0..cfg.max_iter {
        let sn = inf_norm(&s);
        if sn < cfg.tol {
            return Ok(done(theta, Status::Converged, it, value, sn, trace));
        }
        let jac = finite_diff_jacobian(&field, &theta, m)?;
        let sv = DVector::from_column_slice(&s);
        let grad = jac.transpose() * &sv;
        if inf_norm(grad.as_slice()) < 1e-300 {
            return Ok(done(theta, Status::NonConverged, it, value, sn, trace));
        }
        let jtj = jac.transpose() * &jac;
        lambda /= 4.0;
        let mut accepted = false;
        let slope_of = |d: &[f64]| d.iter().zip(grad.iter()).map(|(a, b)| a * b).sum::<f64>();
        for _ in 0..60 {
            let Some(step) = damped_solve(&jtj, &(-&grad), &mut lambda) else {
                break;
            };
            let dir: Vec<f64> = step.iter().copied().collect();
            let slope = slope_of(&dir);
            if slope < 0.0 {
                if let Some((x, v)) = backtrack_value(&phi, &theta, value, slope, &dir, cfg) {
                    theta = x;
                    value = v;
                    accepted = true;
                    break;
                }
            }
            let scale = (0..jtj.nrows()).map(|i| jtj[(i, i)].abs()).fold(1e-12, f64::max);
            lambda = (lambda * 2.0).max(1e-8 * scale);
        }
        if !accepted {
            let dir: Vec<f64> = grad.iter().map(|g| -g).collect();
            let slope = slope_of(&dir);
            match backtrack_value(&phi, &theta, value, slope, &dir, cfg) {
                Some((x, v)) => {
                    theta = x;
                    value = v;
                }
                None => return Ok(done(theta, Status::NonConverged, it, value, sn, trace)),
            }
        }
        s = field(&theta)?;
        trace.push(value);
        check_norm(&theta, cfg, it + 1, &trace)?;
    }
    let sn = inf_norm(&s);
    let status = if sn < cfg.tol { Status::Converged } else { Status::NonConverged };
    Ok(done(theta, status, cfg.max_iter, value, sn, trace))
}

fn backtrack_value(
    phi: &dyn Fn(&[f64]) -> Result<f64>,
    theta: &[f64],
    value: f64,
    slope: f64,
    dir: &[f64],
    cfg: &OptimConfig,
) -> Option<(Vec<f64>, f64)> {
    let mut t = 1.0;
    let mut first = true;
    while t >= cfg.step_floor {
        let x = axpy(theta, t, dir);
        if let Ok(v) = phi(&x) {
            if v.is_finite() && (v <= value + cfg.armijo * t * slope || (first && v < value)) {
                return Some((x, v));
            }
        }
        first = false;
        t *= cfg.shrink;
    }
    None
}

/// Iterates θ ← T(θ) until ‖T(θ) − θ‖∞ < tol.
pub fn fixed_point<T>(map: T, init: &[f64], cfg: &OptimConfig) -> Result<OptimResult>
where
    T: Fn(&[f64]) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    let mut theta = init.to_vec();
    let mut trace = Vec::new();
    for it in 0..cfg.max_iter {
        let next = map(&theta)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                detail: "fixed-point map".into(),
                iterations: it,
                last: theta,
            });
        }
        let resid = theta
            .iter()
            .zip(&next)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        trace.push(resid);
        theta = next;
        if resid < cfg.tol {
            return Ok(done(theta, Status::Converged, it + 1, resid, resid, trace));
        }
        check_norm(&theta, cfg, it + 1, &trace)?;
    }
    let resid = *trace.last().unwrap_or(&f64::INFINITY);
    Ok(done(theta, Status::NonConverged, cfg.max_iter, resid, resid, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quad(a: Vec<f64>) -> impl Fn(&[f64]) -> Result<(f64, Vec<f64>)> {
        move |x: &[f64]| {
            let v = x.iter().zip(&a).map(|(p, q)| (p - q).powi(2)).sum();
            let g = x.iter().zip(&a).map(|(p, q)| 2.0 * (p - q)).collect();
            Ok((v, g))
        }
    }

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((v, g))
    }

    fn monotone(trace: &[f64]) -> bool {
        trace.windows(2).all(|w| w[1] <= w[0])
    }

    #[test]
    fn quadratic_both_methods() {
        let a = vec![1.0, -2.0, 3.5];
        for m in [Method::DampedNewton, Method::GradientDescent] {
            let cfg = OptimConfig::default().with_method(m);
            let r = minimize(quad(a.clone()), &[0.0, 0.0, 0.0], &cfg).unwrap();
            assert!(r.converged());
            assert!(r.iterations <= 50);
            for (x, y) in r.theta.iter().zip(&a) {
                assert!((x - y).abs() < 1e-8);
            }
            assert!(monotone(&r.trace));
        }
    }

    #[test]
    fn rosenbrock_newton() {
        let r = minimize(rosenbrock, &[-1.2, 1.0], &OptimConfig::default()).unwrap();
        assert!(r.converged());
        assert!((r.theta[0] - 1.0).abs() < 1e-4 && (r.theta[1] - 1.0).abs() < 1e-4);
        assert!(monotone(&r.trace));
    }

    #[test]
    fn rosenbrock_gradient_descent_monotone() {
        let cfg = OptimConfig {
            max_iter: 20000,
            tol: 1e-6,
            method: Method::GradientDescent,
            ..Default::default()
        };
        let r = minimize(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
        assert!(monotone(&r.trace));
        assert!((r.theta[0] - 1.0).abs() < 1e-4, "{:?}", r.theta);
    }

    #[test]
    fn fd_grad_examples() {
        let g = finite_diff_grad(|x| x[0] * x[1], &[2.0, 3.0], 1e-6);
        assert!((g[0] - 3.0).abs() < 1e-6 && (g[1] - 2.0).abs() < 1e-6);
        let g = finite_diff_grad(|x| x.iter().map(|v| v * v).sum(), &[0.0, 0.0], 1e-6);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn solve_linear_field() {
        let a = [[2.0, 1.0], [0.5, 3.0]];
        let target = [1.0, -1.0];
        let field = |x: &[f64]| -> Result<Vec<f64>> {
            Ok((0..2)
                .map(|i| (0..2).map(|j| a[i][j] * (x[j] - target[j])).sum())
                .collect())
        };
        let r = solve_score(field, &[5.0, 5.0], &OptimConfig::default()).unwrap();
        assert!(r.converged());
        assert_abs_diff_eq!(r.theta[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(r.theta[1], -1.0, epsilon = 1e-8);
    }

    #[test]
    fn solve_score_matches_minimize() {
        let grad_field = |x: &[f64]| rosenbrock(x).map(|(_, g)| g);
        let a = solve_score(grad_field, &[0.5, 0.5], &OptimConfig::default()).unwrap();
        let b = minimize(rosenbrock, &[0.5, 0.5], &OptimConfig::default()).unwrap();
        assert!(a.converged() && b.converged());
        for (x, y) in a.theta.iter().zip(&b.theta) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn solve_constant_field_nonconverged() {
        let field = |_: &[f64]| -> Result<Vec<f64>> { Ok(vec![1.0, -2.0]) };
        let r = solve_score(field, &[0.0, 0.0], &OptimConfig::default()).unwrap();
        assert_eq!(r.status, Status::NonConverged);
    }

    #[test]
    fn step_floor_terminates() {
        // Gradient pointing the wrong way: no step can decrease the value.
        let bad = |x: &[f64]| -> Result<(f64, Vec<f64>)> { Ok((x[0], vec![-1.0])) };
        let cfg = OptimConfig::default().with_method(Method::GradientDescent);
        let r = minimize(bad, &[0.0], &cfg).unwrap();
        assert_eq!(r.status, Status::NonConverged);
    }

    #[test]
    fn divergence_is_reported() {
        let lin = |x: &[f64]| -> Result<(f64, Vec<f64>)> { Ok((-x[0], vec![-1.0])) };
        let cfg = OptimConfig {
            method: Method::GradientDescent,
            max_iter: 10000,
            ..Default::default()
        };
        match minimize(lin, &[0.0], &cfg) {
            Err(Error::Divergent { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn fixed_point_cosine() {
        let r = fixed_point(|x| Ok(vec![x[0].cos()]), &[1.0], &OptimConfig::default()).unwrap();
        assert!(r.converged());
        assert!((r.theta[0] - r.theta[0].cos()).abs() < 1e-8);
    }

    #[test]
    fn non_finite_init_errors() {
        let f = |_: &[f64]| -> Result<(f64, Vec<f64>)> { Ok((f64::NAN, vec![0.0])) };
        assert!(minimize(f, &[0.0], &OptimConfig::default()).is_err());
    }

    #[test]
    fn deterministic() {
        let a = minimize(rosenbrock, &[-1.2, 1.0], &OptimConfig::default()).unwrap();
        let b = minimize(rosenbrock, &[-1.2, 1.0], &OptimConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
