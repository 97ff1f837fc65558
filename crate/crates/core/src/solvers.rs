//! Block sub-solvers: L1-penalized weighted least squares for `beta`, the
//! regularized linear system for `alpha`, and spectral projected gradient
//! for the nonnegative garrote weights.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagonal added when the `alpha` system is singular.
pub const ALPHA_JITTER: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    /// Record the penalized objective after every sweep.
    pub record_trace: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_sweeps: 1000, record_trace: false }
    }
}

#[derive(Debug, Clone)]
pub struct LassoFit {
    pub beta: DVector<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

#[inline]
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// `(1/2n) sum_i w_i (y_i - o_i - x_i' b)^2 + lambda1 |b|_1`.
pub fn lasso_objective(
    y: &[f64],
    w: &[f64],
    offset: &[f64],
    x: &DMatrix<f64>,
    lambda1: f64,
    beta: &DVector<f64>,
) -> f64 {
    let n = y.len();
    let fitted = if x.ncols() > 0 { x * beta } else { DVector::zeros(n) };
    let rss: f64 = (0..n)
        .map(|i| {
            let r = y[i] - offset[i] - fitted[i];
            w[i] * r * r
        })
        .sum();
    rss / (2.0 * n as f64) + lambda1 * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Minimizes [`lasso_objective`] by cyclic coordinate descent with
/// soft-threshold updates. Uses covariance updates when `P > n`, naive
/// residual updates otherwise. Non-convergence is reported through
/// `converged`, with the last iterate returned.
pub fn lasso_wls(
    y: &[f64],
    w: &[f64],
    offset: &[f64],
    x: &DMatrix<f64>,
    lambda1: f64,
    beta_init: &DVector<f64>,
    opts: &LassoOptions,
) -> Result<LassoFit> {
    let (n, p) = x.shape();
    if y.len() != n || w.len() != n || offset.len() != n || beta_init.len() != p {
        return Err(Error::DimensionMismatch("lasso_wls inputs disagree in length".into()));
    }
    if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidConfig("lasso weights must be positive and finite".into()));
    }
    if y.iter().chain(offset).any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lasso_wls input"));
    }
    if !(lambda1.is_finite() && lambda1 >= 0.0) {
        return Err(Error::InvalidConfig("lambda1 must be finite and >= 0".into()));
    }
    if p == 0 {
        return Ok(LassoFit { beta: DVector::zeros(0), sweeps: 0, converged: true, objective_trace: vec![] });
    }
    if p > n {
        Ok(lasso_covariance(y, w, offset, x, lambda1, beta_init, opts))
    } else {
        Ok(lasso_naive(y, w, offset, x, lambda1, beta_init, opts))
    }
}

fn lasso_naive(
    y: &[f64],
    w: &[f64],
    offset: &[f64],
    x: &DMatrix<f64>,
    lambda1: f64,
    beta_init: &DVector<f64>,
    opts: &LassoOptions,
) -> LassoFit {
    let (n, p) = x.shape();
    let v: Vec<f64> = w.iter().map(|wi| wi / n as f64).collect();
    let mut beta = beta_init.clone();
    let fitted = x * &beta;
    let mut r: Vec<f64> = (0..n).map(|i| y[i] - offset[i] - fitted[i]).collect();
    let scale: Vec<f64> = (0..p)
        .map(|j| x.column(j).iter().zip(&v).map(|(xi, vi)| vi * xi * xi).sum())
        .collect();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let col = x.column(j);
            let old = beta[j];
            let new = if scale[j] > 0.0 {
                let z: f64 = col.iter().zip(&v).zip(&r).map(|((xi, vi), ri)| vi * xi * ri).sum::<f64>()
                    + scale[j] * old;
                soft_threshold(z, lambda1) / scale[j]
            } else {
                0.0
            };
            if new != old {
                let delta = new - old;
                for (ri, xi) in r.iter_mut().zip(col.iter()) {
                    *ri -= xi * delta;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if opts.record_trace {
            trace.push(lasso_objective(y, w, offset, x, lambda1, &beta));
        }
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }
    LassoFit { beta, sweeps, converged, objective_trace: trace }
}

fn lasso_covariance(
    y: &[f64],
    w: &[f64],
    offset: &[f64],
    x: &DMatrix<f64>,
    lambda1: f64,
    beta_init: &DVector<f64>,
    opts: &LassoOptions,
) -> LassoFit {
    let (n, p) = x.shape();
    let v: Vec<f64> = w.iter().map(|wi| wi / n as f64).collect();
    let target: Vec<f64> = (0..n).map(|i| v[i] * (y[i] - offset[i])).collect();
    let scale: Vec<f64> = (0..p)
        .map(|j| x.column(j).iter().zip(&v).map(|(xi, vi)| vi * xi * xi).sum())
        .collect();
    // corr[j] = sum_i v_i x_ij r_i with r = y - o - X beta, kept current.
    let mut corr: Vec<f64> = (0..p).map(|j| x.column(j).dot(&DVector::from_column_slice(&target))).collect();
    // Weighted inner products <x_j, v x_k> for every column k that has been active.
    let mut cross: Vec<Option<Vec<f64>>> = vec![None; p];
    let cross_col = |k: usize| -> Vec<f64> {
        let vk: Vec<f64> = x.column(k).iter().zip(&v).map(|(xi, vi)| xi * vi).collect();
        let vk = DVector::from_vec(vk);
        (0..p).map(|j| x.column(j).dot(&vk)).collect()
    };
    let mut beta = beta_init.clone();
    for k in 0..p {
        if beta[k] != 0.0 {
            let col = cross_col(k);
            for j in 0..p {
                corr[j] -= col[j] * beta[k];
            }
            cross[k] = Some(col);
        }
    }
    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let old = beta[j];
            let new = if scale[j] > 0.0 { soft_threshold(corr[j] + scale[j] * old, lambda1) / scale[j] } else { 0.0 };
            if new != old {
                let delta = new - old;
                let col = cross[j].get_or_insert_with(|| cross_col(j));
                for (c, g) in corr.iter_mut().zip(col.iter()) {
                    *c -= g * delta;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if opts.record_trace {
            trace.push(lasso_objective(y, w, offset, x, lambda1, &beta));
        }
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }
    LassoFit { beta, sweeps, converged, objective_trace: trace }
}

#[derive(Debug, Clone)]
pub struct AlphaSolution {
    pub alpha: DVector<f64>,
    pub jittered: bool,
    /// `|A alpha - b| / |b|` for the system actually solved.
    pub relative_residual: f64,
}

const ALPHA_RESIDUAL_TOL: f64 = 1e-8;

/// Solves `[(1/n) K W K + lambda3 K] alpha = (1/n) K W (y - x_beta)`.
///
/// Falls back to the system with [`ALPHA_JITTER`] added on the diagonal when
/// the Cholesky factorization fails or leaves a residual above 1e-8.
pub fn alpha_solve(
    k: &DMatrix<f64>,
    w: &[f64],
    y: &[f64],
    x_beta: &[f64],
    lambda3: f64,
) -> Result<AlphaSolution> {
    let n = k.nrows();
    if k.ncols() != n || w.len() != n || y.len() != n || x_beta.len() != n {
        return Err(Error::DimensionMismatch("alpha_solve inputs disagree in size".into()));
    }
    if !(lambda3.is_finite() && lambda3 > 0.0) {
        return Err(Error::InvalidConfig("lambda3 must be finite and > 0".into()));
    }
    let inv_n = 1.0 / n as f64;
    let mut kw = k.clone();
    for (j, mut col) in kw.column_iter_mut().enumerate() {
        col *= w[j] * inv_n;
    }
    let resid = DVector::from_iterator(n, (0..n).map(|i| y[i] - x_beta[i]));
    let b = &kw * &resid;
    let mut a = &kw * k + k * lambda3;
    a = (&a + a.transpose()) * 0.5;
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("alpha system"));
    }
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok(AlphaSolution { alpha: DVector::zeros(n), jittered: false, relative_residual: 0.0 });
    }
    if let Some((alpha, rel)) = cholesky_solve(&a, &b, b_norm) {
        if rel <= ALPHA_RESIDUAL_TOL {
            return Ok(AlphaSolution { alpha, jittered: false, relative_residual: rel });
        }
    }
    let mut aj = a;
    for i in 0..n {
        aj[(i, i)] += ALPHA_JITTER;
    }
    match cholesky_solve(&aj, &b, b_norm) {
        Some((alpha, rel)) if rel <= ALPHA_RESIDUAL_TOL => {
            Ok(AlphaSolution { alpha, jittered: true, relative_residual: rel })
        }
        _ => Err(Error::SingularAfterJitter),
    }
}

/// Cholesky solve with one step of iterative refinement.
fn cholesky_solve(a: &DMatrix<f64>, b: &DVector<f64>, b_norm: f64) -> Option<(DVector<f64>, f64)> {
    let chol = a.clone().cholesky()?;
    let mut x = chol.solve(b);
    let r = b - a * &x;
    x += chol.solve(&r);
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let rel = (b - a * &x).norm() / b_norm;
    Some((x, rel))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpgConfig {
    pub max_iter: usize,
    /// Nonmonotone memory (number of past values in the acceptance test).
    pub memory: usize,
    pub step_min: f64,
    pub step_max: f64,
    /// Sufficient-increase parameter.
    pub gamma: f64,
    /// Backtracking factor bounds for the safeguarded quadratic interpolation.
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Tolerance on the infinity norm of the projected gradient step.
    pub tol: f64,
    pub max_backtracks: usize,
}

impl Default for SpgConfig {
    fn default() -> Self {
        Self {
            max_iter: 300,
            memory: 10,
            step_min: 1e-10,
            step_max: 1e10,
            gamma: 1e-4,
            sigma_min: 0.1,
            sigma_max: 0.9,
            tol: 1e-6,
            max_backtracks: 60,
        }
    }
}

impl SpgConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if self.memory < 1
            || self.max_iter < 1
            || !pos(self.step_min)
            || !pos(self.step_max)
            || self.step_min > self.step_max
            || !pos(self.gamma)
            || !pos(self.tol)
            || !(0.0 < self.sigma_min && self.sigma_min <= self.sigma_max && self.sigma_max < 1.0)
        {
            return Err(Error::InvalidConfig("invalid SPG configuration".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SpgResult {
    /// Best iterate found; always componentwise nonnegative.
    pub x: Vec<f64>,
    /// Objective at `x`.
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn project(v: &mut [f64]) {
    for x in v.iter_mut() {
        if !(*x > 0.0) {
            *x = 0.0;
        }
    }
}

fn projected_step_norm(x: &[f64], g: &[f64], step: f64) -> f64 {
    x.iter()
        .zip(g)
        .map(|(xi, gi)| ((xi - step * gi).max(0.0) - xi).abs())
        .fold(0.0, f64::max)
}

/// Maximizes `f` over the nonnegative orthant by spectral projected
/// gradient with Barzilai-Borwein steps and a nonmonotone (GLL) line search.
///
/// `oracle` returns `(f(x), grad f(x))`; it is only ever called at feasible
/// points. An oracle error at a trial point is treated as a failed step.
pub fn spg_maximize<F>(mut oracle: F, x0: &[f64], cfg: &SpgConfig) -> Result<SpgResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    let dim = x0.len();
    let mut x = x0.to_vec();
    project(&mut x);
    // Internally minimize phi = -f.
    let (f0, g0) = oracle(&x)?;
    if !f0.is_finite() || g0.len() != dim || g0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("SPG starting point"));
    }
    let mut phi = -f0;
    let mut g: Vec<f64> = g0.iter().map(|v| -v).collect();
    let mut evaluations = 1;
    let mut history = vec![phi];
    let mut best_x = x.clone();
    let mut best_phi = phi;

    let mut pg = projected_step_norm(&x, &g, 1.0);
    if pg <= cfg.tol {
        return Ok(SpgResult { x, value: -phi, iterations: 0, evaluations, converged: true });
    }
    let mut step = (1.0 / pg).clamp(cfg.step_min, cfg.step_max);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iter {
        iterations += 1;
        let mut d: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| (xi - step * gi).max(0.0) - xi).collect();
        let mut gtd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if gtd >= 0.0 {
            // Only possible through rounding; fall back to the unit step.
            d = x.iter().zip(&g).map(|(xi, gi)| (xi - gi).max(0.0) - xi).collect();
            gtd = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            if gtd >= 0.0 {
                converged = true;
                break;
            }
        }
        let phi_max = history.iter().rev().take(cfg.memory).copied().fold(f64::NEG_INFINITY, f64::max);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            project(&mut trial);
            let eval = oracle(&trial);
            evaluations += 1;
            let (f_new, g_new) = match eval {
                Ok((f, gr)) if f.is_finite() && gr.iter().all(|v| v.is_finite()) => (f, gr),
                _ => {
                    t *= 0.5;
                    continue;
                }
            };
            let phi_new = -f_new;
            if phi_new <= phi_max + cfg.gamma * t * gtd {
                accepted = Some((trial, phi_new, g_new));
                break;
            }
            let denom = phi_new - phi - t * gtd;
            let t_quad = -0.5 * t * t * gtd / denom;
            t = if t_quad.is_finite() && denom > 0.0 {
                t_quad.clamp(cfg.sigma_min * t, cfg.sigma_max * t)
            } else {
                0.5 * t
            };
        }
        let Some((x_new, phi_new, g_new)) = accepted else {
            break;
        };
        let g_new: Vec<f64> = g_new.iter().map(|v| -v).collect();
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sts: f64 = s.iter().map(|v| v * v).sum();
        let sty: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        step = if sty <= 0.0 { cfg.step_max } else { (sts / sty).clamp(cfg.step_min, cfg.step_max) };

        x = x_new;
        phi = phi_new;
        g = g_new;
        history.push(phi);
        if phi < best_phi {
            best_phi = phi;
            best_x.clone_from(&x);
        }
        pg = projected_step_norm(&x, &g, 1.0);
        if pg <= cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(SpgResult { x: best_x, value: -best_phi, iterations, evaluations, converged })
}
