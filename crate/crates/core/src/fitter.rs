//! Block coordinate ascent for the penalized kernel Cox objective, out-of-sample
//! risk scores, model persistence and the linear LASSO-Cox baseline.
//!
//! One cycle updates `beta` (weighted lasso on the IRLS working response with
//! offset `K alpha`), then `alpha` (regularized linear system on a fresh
//! linearization), then `delta` (spectral projected gradient on the exact
//! objective). The solvers take the weights of the unnormalized likelihood,
//! `n * (-d^2 l_n / d eta^2)`, so their `1/n` factors reproduce the quadratic
//! model of `l_n` and every block targets the same objective.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coxlik::{
    delta_gradient, eta_derivatives, linear_predictor, log_partial_likelihood, objective, working_response,
    FitState, LambdaTriple,
};
use crate::data::{RiskIndex, Standardization, SurvivalDataset};
use crate::error::{Error, Result};
use crate::kernel::{kernel_row, GarroteKernelSpec, KernelCache, KernelFamily};
use crate::solvers::{alpha_solve, lasso_wls, spg_maximize, LassoOptions, SpgConfig};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_outer_cycles: usize,
    /// Stop when the relative change of the objective over a cycle is below this.
    pub tol: f64,
    pub kernel: KernelFamily,
    pub spg: SpgConfig,
    pub lasso: LassoOptions,
    /// Step halvings tried when a `beta` or `alpha` update lowers the objective.
    pub max_halvings: usize,
    /// IRLS iterations for the linear LASSO-Cox fits (initial `beta` and baseline).
    pub linear_max_iter: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_outer_cycles: 50,
            tol: 1e-5,
            kernel: KernelFamily::GaussianGarrote,
            spg: SpgConfig::default(),
            lasso: LassoOptions::default(),
            max_halvings: 10,
            linear_max_iter: 100,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_cycles < 1 {
            return Err(Error::InvalidConfig("max_outer_cycles must be >= 1".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be positive".into()));
        }
        if !(self.lasso.tol > 0.0) || self.lasso.max_sweeps < 1 || self.linear_max_iter < 1 {
            return Err(Error::InvalidConfig("inner solver budgets must be positive".into()));
        }
        self.kernel.validate()?;
        self.spg.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Init,
    Beta,
    Alpha,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub cycle: usize,
    pub block: Block,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FitDiagnostics {
    pub cycles: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub trace: Vec<BlockRecord>,
    /// Cycles whose objective dropped by more than 1e-6.
    pub flagged_cycles: Vec<usize>,
    pub alpha_jitter_count: usize,
    pub spg_unconverged_count: usize,
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub delta: Vec<f64>,
    pub lambda: LambdaTriple,
    pub kernel: KernelFamily,
    pub standardization: Standardization,
    /// Standardized training genomic rows (representer points).
    pub train_z: DMatrix<f64>,
    /// Training linear predictor at the fitted parameters.
    pub train_eta: DVector<f64>,
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
    pub diagnostics: FitDiagnostics,
}

/// A fitted model that can score covariates on its training scale.
pub trait RiskModel {
    /// Linear predictor for rows already standardized with the training
    /// statistics.
    fn eta_standardized(&self, x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<Vec<f64>>;

    fn standardization(&self) -> &Standardization;

    /// Risk scores for raw (unstandardized) covariates.
    fn predict(&self, x_raw: &DMatrix<f64>, z_raw: &DMatrix<f64>) -> Result<Vec<f64>> {
        let s = self.standardization();
        let x = s.apply_x(x_raw)?;
        let z = s.apply_z(z_raw)?;
        self.eta_standardized(&x, &z)
    }
}

impl RiskModel for FittedModel {
    fn eta_standardized(&self, x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.beta.len() || z.ncols() != self.delta.len() || x.nrows() != z.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} x and {} z columns, got {} and {}",
                self.beta.len(),
                self.delta.len(),
                x.ncols(),
                z.ncols()
            )));
        }
        let spec = GarroteKernelSpec { family: self.kernel, delta: self.delta.clone() };
        let mut out = Vec::with_capacity(x.nrows());
        for i in 0..x.nrows() {
            let zi: Vec<f64> = z.row(i).iter().copied().collect();
            let k = kernel_row(&spec, &zi, &self.train_z)?;
            let lin: f64 = x.row(i).iter().zip(self.beta.iter()).map(|(a, b)| a * b).sum();
            out.push(lin + k.dot(&self.alpha));
        }
        Ok(out)
    }

    fn standardization(&self) -> &Standardization {
        &self.standardization
    }
}

/// Risk score `x' beta + h(z)` for one subject with raw covariates.
pub fn predict_risk(model: &FittedModel, x_new: &[f64], z_new: &[f64]) -> Result<f64> {
    let x = DMatrix::from_row_slice(1, x_new.len(), x_new);
    let z = DMatrix::from_row_slice(1, z_new.len(), z_new);
    Ok(model.predict(&x, &z)?[0])
}

fn require_standardized(ds: &SurvivalDataset) -> Result<&Standardization> {
    ds.standardization().ok_or(Error::NotStandardized)
}

fn l1(v: &DVector<f64>) -> f64 {
    v.iter().map(|b| b.abs()).sum()
}

/// IRLS with weighted-lasso steps for the linear Cox model `eta = offset + X beta`,
/// maximizing `l_n(eta) - lambda1 |beta|_1`.
pub(crate) fn linear_cox_lasso(
    x: &DMatrix<f64>,
    offset: &[f64],
    risk: &RiskIndex,
    status: &[bool],
    lambda1: f64,
    beta_init: &DVector<f64>,
    cfg: &FitConfig,
) -> Result<(DVector<f64>, bool)> {
    let n = x.nrows();
    let p = x.ncols();
    if p == 0 {
        return Ok((DVector::zeros(0), true));
    }
    let eta_of = |b: &DVector<f64>| -> Vec<f64> {
        let xb = x * b;
        (0..n).map(|i| offset[i] + xb[i]).collect()
    };
    let penalized = |b: &DVector<f64>| -> Result<f64> {
        Ok(log_partial_likelihood(&eta_of(b), risk, status)? - lambda1 * l1(b))
    };
    let mut beta = beta_init.clone();
    let mut current = penalized(&beta)?;
    for _ in 0..cfg.linear_max_iter {
        let eta = eta_of(&beta);
        let d = eta_derivatives(&eta, risk, status)?;
        let (y, w) = working_response(&eta, &d.gradient, &d.hessian_diag);
        let w: Vec<f64> = w.iter().map(|v| v * n as f64).collect();
        let step = lasso_wls(&y, &w, offset, x, lambda1, &beta, &cfg.lasso)?;
        let (next, value) = halve_towards(&beta, &step.beta, current, cfg.max_halvings, |b| penalized(b))?;
        let change = (&next - &beta).amax();
        let gain = value - current;
        beta = next;
        current = value;
        if change < 1e-9 || gain.abs() <= 1e-13 * current.abs().max(1.0) {
            return Ok((beta, true));
        }
    }
    Ok((beta, false))
}

/// Accepts `proposal` if it does not lower `eval`, otherwise tries points
/// halfway back towards `start`. Returns `start` if nothing improves.
fn halve_towards<F>(
    start: &DVector<f64>,
    proposal: &DVector<f64>,
    start_value: f64,
    max_halvings: usize,
    mut eval: F,
) -> Result<(DVector<f64>, f64)>
where
    F: FnMut(&DVector<f64>) -> Result<f64>,
{
    let dir = proposal - start;
    let mut t = 1.0;
    for _ in 0..=max_halvings {
        let cand = start + &dir * t;
        if let Ok(v) = eval(&cand) {
            if v >= start_value {
                return Ok((cand, v));
            }
        }
        t *= 0.5;
    }
    Ok((start.clone(), start_value))
}

/// Starting point: `delta = 1/Q`, `alpha = 1/n`, and `beta` the linear
/// LASSO-Cox estimate on `X` alone.
pub fn init_state(ds: &SurvivalDataset, lam: &LambdaTriple, cfg: &FitConfig, kernel: &KernelCache) -> Result<FitState> {
    lam.validate()?;
    let n = ds.n();
    let q = ds.q();
    let risk = ds.risk_index();
    let delta = vec![if q > 0 { 1.0 / q as f64 } else { 0.0 }; q];
    let alpha = DVector::from_element(n, 1.0 / n as f64);
    let (beta, _) = linear_cox_lasso(ds.x(), &vec![0.0; n], &risk, ds.status(), lam.lambda1, &DVector::zeros(ds.p()), cfg)?;
    FitState::new(alpha, beta, delta, ds.x(), kernel)
}

fn penalty_free_quad(state_alpha: &DVector<f64>, gram: &DMatrix<f64>) -> f64 {
    state_alpha.dot(&(gram * state_alpha))
}

/// Fits the model at fixed regularization.
pub fn fit(ds: &SurvivalDataset, lam: &LambdaTriple, cfg: &FitConfig) -> Result<FittedModel> {
    let scaling = require_standardized(ds)?.clone();
    lam.validate()?;
    cfg.validate()?;
    if ds.n() == 0 {
        return Err(Error::DimensionMismatch("empty dataset".into()));
    }
    let kernel = KernelCache::new(cfg.kernel, ds.z())?;
    let risk = ds.risk_index();
    let state = init_state(ds, lam, cfg, &kernel)?;
    let (state, diagnostics) = cycle(ds, &risk, &kernel, lam, cfg, state)?;
    Ok(FittedModel {
        alpha: state.alpha,
        beta: state.beta,
        delta: state.delta,
        lambda: *lam,
        kernel: cfg.kernel,
        standardization: scaling,
        train_z: ds.z().clone(),
        train_eta: state.eta,
        x_names: ds.x_names().to_vec(),
        z_names: ds.z_names().to_vec(),
        diagnostics,
    })
}

fn cycle(
    ds: &SurvivalDataset,
    risk: &RiskIndex,
    kernel: &KernelCache,
    lam: &LambdaTriple,
    cfg: &FitConfig,
    mut state: FitState,
) -> Result<(FitState, FitDiagnostics)> {
    let x = ds.x();
    let status = ds.status();
    let n = ds.n();
    let mut diag = FitDiagnostics::default();
    let mut current = objective(&state, lam, risk, status)?;
    diag.trace.push(BlockRecord { cycle: 0, block: Block::Init, objective: current });

    for c in 1..=cfg.max_outer_cycles {
        let cycle_start = current;

        // beta block
        if x.ncols() > 0 {
            let d = eta_derivatives(state.eta.as_slice(), risk, status)?;
            let (y, w) = working_response(state.eta.as_slice(), &d.gradient, &d.hessian_diag);
            let w: Vec<f64> = w.iter().map(|v| v * n as f64).collect();
            let kalpha = &state.gram * &state.alpha;
            let step = lasso_wls(&y, &w, kalpha.as_slice(), x, lam.lambda1, &state.beta, &cfg.lasso)?;
            let quad = penalty_free_quad(&state.alpha, &state.gram);
            let fixed = lam.lambda2 * state.delta.iter().sum::<f64>() + 0.5 * lam.lambda3 * quad;
            let (beta, value) = halve_towards(&state.beta, &step.beta, current, cfg.max_halvings, |b| {
                let eta = linear_predictor(x, b, &state.gram, &state.alpha);
                Ok(log_partial_likelihood(eta.as_slice(), risk, status)? - lam.lambda1 * l1(b) - fixed)
            })?;
            state.beta = beta;
            state.refresh_eta(x);
            current = value;
        }
        diag.trace.push(BlockRecord { cycle: c, block: Block::Beta, objective: current });

        // alpha block
        {
            let d = eta_derivatives(state.eta.as_slice(), risk, status)?;
            let (y, w) = working_response(state.eta.as_slice(), &d.gradient, &d.hessian_diag);
            let w: Vec<f64> = w.iter().map(|v| v * n as f64).collect();
            let xb: Vec<f64> = if x.ncols() > 0 { (x * &state.beta).iter().copied().collect() } else { vec![0.0; n] };
            let sol = alpha_solve(&state.gram, &w, &y, &xb, lam.lambda3)?;
            if sol.jittered {
                diag.alpha_jitter_count += 1;
            }
            let fixed = lam.lambda1 * l1(&state.beta) + lam.lambda2 * state.delta.iter().sum::<f64>();
            let (alpha, value) = halve_towards(&state.alpha, &sol.alpha, current, cfg.max_halvings, |a| {
                let eta = linear_predictor(x, &state.beta, &state.gram, a);
                Ok(log_partial_likelihood(eta.as_slice(), risk, status)?
                    - fixed
                    - 0.5 * lam.lambda3 * penalty_free_quad(a, &state.gram))
            })?;
            state.alpha = alpha;
            state.refresh_eta(x);
            current = value;
        }
        diag.trace.push(BlockRecord { cycle: c, block: Block::Alpha, objective: current });

        // delta block
        if ds.q() > 0 {
            let alpha = state.alpha.clone();
            let beta = state.beta.clone();
            let res = spg_maximize(
                |delta| {
                    let mut trial = FitState {
                        alpha: alpha.clone(),
                        beta: beta.clone(),
                        delta: delta.to_vec(),
                        eta: DVector::zeros(0),
                        gram: kernel.gram(delta)?,
                    };
                    trial.refresh_eta(x);
                    let f = objective(&trial, lam, risk, status)?;
                    let g = delta_gradient(&trial, lam, risk, status, kernel)?;
                    Ok((f, g))
                },
                &state.delta,
                &cfg.spg,
            )?;
            if !res.converged {
                diag.spg_unconverged_count += 1;
            }
            state.delta = res.x;
            state.refresh_all(x, kernel)?;
            current = objective(&state, lam, risk, status)?;
        }
        diag.trace.push(BlockRecord { cycle: c, block: Block::Delta, objective: current });
        diag.cycles = c;

        if current < cycle_start - 1e-6 {
            diag.flagged_cycles.push(c);
        }
        if (current - cycle_start).abs() / cycle_start.abs().max(1.0) < cfg.tol {
            diag.converged = true;
            break;
        }
    }
    diag.final_objective = current;
    Ok((state, diag))
}

/// Linear Cox model with an L1 penalty on the joint design `[X | Z]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoCoxModel {
    pub beta: Vec<f64>,
    pub lambda1: f64,
    pub p: usize,
    pub standardization: Standardization,
    pub converged: bool,
}

impl LassoCoxModel {
    pub fn x_coefficients(&self) -> &[f64] {
        &self.beta[..self.p]
    }

    pub fn z_coefficients(&self) -> &[f64] {
        &self.beta[self.p..]
    }
}

impl RiskModel for LassoCoxModel {
    fn eta_standardized(&self, x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() + z.ncols() != self.beta.len() || x.nrows() != z.nrows() {
            return Err(Error::DimensionMismatch("LASSO-Cox design width mismatch".into()));
        }
        Ok((0..x.nrows())
            .map(|i| {
                x.row(i).iter().chain(z.row(i).iter()).zip(&self.beta).map(|(a, b)| a * b).sum()
            })
            .collect())
    }

    fn standardization(&self) -> &Standardization {
        &self.standardization
    }
}

pub(crate) fn joint_design(ds: &SurvivalDataset) -> DMatrix<f64> {
    let n = ds.n();
    let (p, q) = (ds.p(), ds.q());
    let mut design = DMatrix::zeros(n, p + q);
    design.columns_mut(0, p).copy_from(ds.x());
    design.columns_mut(p, q).copy_from(ds.z());
    design
}

pub fn fit_lasso_cox(ds: &SurvivalDataset, lambda1: f64) -> Result<LassoCoxModel> {
    fit_lasso_cox_with(ds, lambda1, &FitConfig::default())
}

pub fn fit_lasso_cox_with(ds: &SurvivalDataset, lambda1: f64, cfg: &FitConfig) -> Result<LassoCoxModel> {
    let scaling = require_standardized(ds)?.clone();
    if !(lambda1.is_finite() && lambda1 >= 0.0) {
        return Err(Error::InvalidConfig("lambda1 must be finite and >= 0".into()));
    }
    let design = joint_design(ds);
    let risk = ds.risk_index();
    let (beta, converged) = linear_cox_lasso(
        &design,
        &vec![0.0; ds.n()],
        &risk,
        ds.status(),
        lambda1,
        &DVector::zeros(design.ncols()),
        cfg,
    )?;
    Ok(LassoCoxModel { beta: beta.iter().copied().collect(), lambda1, p: ds.p(), standardization: scaling, converged })
}

/// Linear LASSO-Cox on the clinical block only (the `beta` initializer).
pub fn fit_linear_lasso_cox_x(ds: &SurvivalDataset, lambda1: f64, cfg: &FitConfig) -> Result<(DVector<f64>, bool)> {
    let risk = ds.risk_index();
    linear_cox_lasso(ds.x(), &vec![0.0; ds.n()], &risk, ds.status(), lambda1, &DVector::zeros(ds.p()), cfg)
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    kernel: KernelFamily,
    lambda: LambdaTriple,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    delta: Vec<f64>,
    standardization: Standardization,
    x_names: Vec<String>,
    z_names: Vec<String>,
    train_z: Vec<Vec<f64>>,
    train_eta: Vec<f64>,
    diagnostics: FitDiagnostics,
}

impl FittedModel {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_VERSION,
            kernel: self.kernel,
            lambda: self.lambda,
            alpha: self.alpha.iter().copied().collect(),
            beta: self.beta.iter().copied().collect(),
            delta: self.delta.clone(),
            standardization: self.standardization.clone(),
            x_names: self.x_names.clone(),
            z_names: self.z_names.clone(),
            train_z: self.train_z.row_iter().map(|r| r.iter().copied().collect()).collect(),
            train_eta: self.train_eta.iter().copied().collect(),
            diagnostics: self.diagnostics.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text)?;
        if f.version != MODEL_VERSION {
            return Err(Error::Model(format!("unsupported model version {}", f.version)));
        }
        let n = f.alpha.len();
        let q = f.delta.len();
        if f.train_z.len() != n || f.train_z.iter().any(|r| r.len() != q) || f.train_eta.len() != n {
            return Err(Error::Model("training rows do not match alpha/delta".into()));
        }
        if f.beta.len() != f.standardization.x_mean.len() || q != f.standardization.z_mean.len() {
            return Err(Error::Model("standardization does not match coefficients".into()));
        }
        if f.delta.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::Model("negative garrote weight".into()));
        }
        f.lambda.validate()?;
        f.kernel.validate()?;
        let flat: Vec<f64> = f.train_z.iter().flatten().copied().collect();
        Ok(Self {
            alpha: DVector::from_vec(f.alpha),
            beta: DVector::from_vec(f.beta),
            delta: f.delta,
            lambda: f.lambda,
            kernel: f.kernel,
            standardization: f.standardization,
            train_z: DMatrix::from_row_slice(n, q, &flat),
            train_eta: DVector::from_vec(f.train_eta),
            x_names: f.x_names,
            z_names: f.z_names,
            diagnostics: f.diagnostics,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        f.write_all(self.to_json()?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut s = String::new();
        File::open(path)?.read_to_string(&mut s)?;
        Self::from_json(&s)
    }

    /// Penalized objective recomputed from scratch on `ds` (the standardized
    /// training data).
    pub fn objective_on(&self, ds: &SurvivalDataset) -> Result<f64> {
        let kernel = KernelCache::new(self.kernel, ds.z())?;
        let state = FitState::new(self.alpha.clone(), self.beta.clone(), self.delta.clone(), ds.x(), &kernel)?;
        objective(&state, &self.lambda, &ds.risk_index(), ds.status())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, seed: u64) -> SurvivalDataset {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>());
        let z = DMatrix::from_fn(n, 3, |_, _| rng.random::<f64>() * 3.0);
        let time: Vec<f64> = (0..n).map(|i| {
            let eta = x[(i, 0)] + (z[(i, 0)] - 1.5).powi(2);
            -rng.random::<f64>().ln() / eta.exp()
        }).collect();
        let status = (0..n).map(|_| rng.random::<f64>() < 0.8).collect();
        SurvivalDataset::new(time, status, x, z).unwrap().standardize().unwrap()
    }

    #[test]
    fn init_values() {
        let ds = toy(40, 1);
        let lam = LambdaTriple::new(1e3, 0.1, 0.1).unwrap();
        let cfg = FitConfig::default();
        let kernel = KernelCache::new(cfg.kernel, ds.z()).unwrap();
        let st = init_state(&ds, &lam, &cfg, &kernel).unwrap();
        assert!(st.delta.iter().all(|d| (*d - 1.0 / 3.0).abs() < 1e-15));
        assert!(st.alpha.iter().all(|a| (*a - 1.0 / 40.0).abs() < 1e-15));
        assert!(st.beta.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn requires_standardized_data() {
        let ds = toy(20, 2).destandardize().unwrap();
        let lam = LambdaTriple::new(0.1, 0.1, 0.1).unwrap();
        assert!(matches!(fit(&ds, &lam, &FitConfig::default()), Err(Error::NotStandardized)));
    }

    #[test]
    fn model_json_round_trip() {
        let ds = toy(30, 3);
        let lam = LambdaTriple::new(0.05, 0.05, 0.1).unwrap();
        let cfg = FitConfig { max_outer_cycles: 3, ..FitConfig::default() };
        let m = fit(&ds, &lam, &cfg).unwrap();
        let back = FittedModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.alpha, m.alpha);
        assert_eq!(back.delta, m.delta);
        assert_eq!(back.train_z, m.train_z);
        let bad = m.to_json().unwrap().replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(FittedModel::from_json(&bad), Err(Error::Model(_))));
    }

    #[test]
    fn training_rows_reproduce_eta() {
        let ds = toy(30, 4);
        let lam = LambdaTriple::new(0.05, 0.05, 0.1).unwrap();
        let cfg = FitConfig { max_outer_cycles: 5, ..FitConfig::default() };
        let m = fit(&ds, &lam, &cfg).unwrap();
        let raw = ds.destandardize().unwrap();
        for i in 0..ds.n() {
            let xr: Vec<f64> = raw.x().row(i).iter().copied().collect();
            let zr: Vec<f64> = raw.z().row(i).iter().copied().collect();
            let s = predict_risk(&m, &xr, &zr).unwrap();
            assert!((s - m.train_eta[i]).abs() < 1e-10, "row {i}: {s} vs {}", m.train_eta[i]);
        }
    }

    #[test]
    fn lasso_cox_huge_penalty_is_null() {
        let ds = toy(30, 5);
        let m = fit_lasso_cox(&ds, 1e6).unwrap();
        assert!(m.beta.iter().all(|b| *b == 0.0));
    }
}
