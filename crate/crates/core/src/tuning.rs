//! K-fold cross-validated partial log-likelihood and grid search with
//! log-scale refinement over `(lambda1, lambda2, lambda3)`.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coxlik::{log_partial_likelihood_sum, LambdaTriple};
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::fitter::{fit, fit_lasso_cox_with, FitConfig, FittedModel, LassoCoxModel, RiskModel};

/// One axis of the regularization grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridAxis {
    List { values: Vec<f64> },
    LogRange { lo: f64, hi: f64, points: usize },
}

impl GridAxis {
    pub fn log_range(lo: f64, hi: f64, points: usize) -> Self {
        GridAxis::LogRange { lo, hi, points }
    }

    pub fn list(values: Vec<f64>) -> Self {
        GridAxis::List { values }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            GridAxis::List { values } => values.clone(),
            GridAxis::LogRange { lo, hi, points } => {
                if *points == 1 {
                    return vec![(lo * hi).sqrt()];
                }
                let (a, b) = (lo.ln(), hi.ln());
                (0..*points)
                    .map(|k| {
                        if k + 1 == *points {
                            *hi
                        } else {
                            (a + (b - a) * k as f64 / (*points - 1) as f64).exp()
                        }
                    })
                    .collect()
            }
        }
    }

    fn validate(&self, name: &str, strictly_positive: bool) -> Result<()> {
        let ok = |v: f64| v.is_finite() && if strictly_positive { v > 0.0 } else { v >= 0.0 };
        let valid = match self {
            GridAxis::List { values } => !values.is_empty() && values.iter().all(|v| ok(*v)),
            GridAxis::LogRange { lo, hi, points } => *points >= 1 && *lo > 0.0 && lo.is_finite() && hi.is_finite() && lo <= hi,
        };
        if valid {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid grid axis for {name}")))
        }
    }

    /// Log range of the same size centred on `center` whose log-width is
    /// `1/shrink` of the current one. Lists are left unchanged.
    pub fn refine(&self, center: f64, shrink: f64) -> Self {
        match self {
            GridAxis::List { .. } => self.clone(),
            GridAxis::LogRange { lo, hi, points } => {
                let half = (hi.ln() - lo.ln()) / (2.0 * shrink);
                GridAxis::LogRange { lo: (center.ln() - half).exp(), hi: (center.ln() + half).exp(), points: *points }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub lambda1: GridAxis,
    pub lambda2: GridAxis,
    pub lambda3: GridAxis,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self {
            lambda1: GridAxis::log_range(1e-3, 1.0, 4),
            lambda2: GridAxis::log_range(1e-3, 1.0, 4),
            lambda3: GridAxis::log_range(1e-3, 1.0, 4),
        }
    }
}

impl LambdaGrid {
    pub fn single(lam: LambdaTriple) -> Self {
        Self {
            lambda1: GridAxis::list(vec![lam.lambda1]),
            lambda2: GridAxis::list(vec![lam.lambda2]),
            lambda3: GridAxis::list(vec![lam.lambda3]),
        }
    }

    pub fn points(&self) -> Vec<LambdaTriple> {
        let mut out = Vec::new();
        for &l1 in &self.lambda1.values() {
            for &l2 in &self.lambda2.values() {
                for &l3 in &self.lambda3.values() {
                    out.push(LambdaTriple { lambda1: l1, lambda2: l2, lambda3: l3 });
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        self.lambda1.validate("lambda1", false)?;
        self.lambda2.validate("lambda2", false)?;
        self.lambda3.validate("lambda3", true)
    }

    fn refine(&self, at: &LambdaTriple, shrink: f64) -> Self {
        Self {
            lambda1: self.lambda1.refine(at.lambda1, shrink),
            lambda2: self.lambda2.refine(at.lambda2, shrink),
            lambda3: self.lambda3.refine(at.lambda3, shrink),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub folds: usize,
    pub seed: u64,
    pub grid: LambdaGrid,
    pub refine_rounds: usize,
    /// Log-width reduction of each refined range.
    pub shrink: f64,
    pub fit: FitConfig,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self { folds: 5, seed: 0, grid: LambdaGrid::default(), refine_rounds: 2, shrink: 4.0, fit: FitConfig::default() }
    }
}

impl CvPlan {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidConfig("cross-validation needs at least 2 folds".into()));
        }
        if !(self.shrink.is_finite() && self.shrink > 1.0) {
            return Err(Error::InvalidConfig("shrink factor must exceed 1".into()));
        }
        self.grid.validate()?;
        self.fit.validate()
    }
}

/// Seeded fold labels in `0..k`, dealt round-robin over shuffled events and
/// then over shuffled censored subjects so that every fold gets an event.
pub fn fold_assignment(status: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidConfig("cross-validation needs at least 2 folds".into()));
    }
    let mut events: Vec<usize> = (0..status.len()).filter(|&i| status[i]).collect();
    let mut censored: Vec<usize> = (0..status.len()).filter(|&i| !status[i]).collect();
    if events.len() < k {
        return Err(Error::InsufficientEvents);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    events.shuffle(&mut rng);
    censored.shuffle(&mut rng);
    let mut folds = vec![0; status.len()];
    for (pos, &i) in events.iter().chain(censored.iter()).enumerate() {
        folds[i] = pos % k;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub cvpl: f64,
    /// Folds whose fit failed and were left out of the sum.
    pub failed_folds: Vec<usize>,
    pub converged: bool,
}

impl CvResult {
    pub fn partial(&self) -> bool {
        !self.failed_folds.is_empty()
    }
}

/// Cross-validated partial log-likelihood for an arbitrary fitting routine.
///
/// For each fold `k` the model is fitted on the other folds and contributes
/// `l(theta_k)` on all subjects minus `l_{-k}(theta_k)` on its training rows,
/// both as unnormalized log partial likelihoods. `fit_fold` returns the model
/// and its convergence flag.
pub fn cvpl_with<M, F>(ds: &SurvivalDataset, folds: &[usize], k: usize, fit_fold: F) -> Result<CvResult>
where
    M: RiskModel,
    F: Fn(&SurvivalDataset) -> Result<(M, bool)>,
{
    if folds.len() != ds.n() {
        return Err(Error::DimensionMismatch("fold labels do not match dataset".into()));
    }
    let full_risk = ds.risk_index();
    let mut total = 0.0;
    let mut failed = Vec::new();
    let mut converged = true;
    for fold in 0..k {
        let train: Vec<usize> = (0..ds.n()).filter(|&i| folds[i] != fold).collect();
        let sub = ds.subset(&train);
        let contribution = fit_fold(&sub).and_then(|(model, conv)| {
            let eta_full = model.eta_standardized(ds.x(), ds.z())?;
            let eta_train: Vec<f64> = train.iter().map(|&i| eta_full[i]).collect();
            let full = log_partial_likelihood_sum(&eta_full, &full_risk, ds.status())?;
            let part = log_partial_likelihood_sum(&eta_train, &sub.risk_index(), sub.status())?;
            Ok((full - part, conv))
        });
        match contribution {
            Ok((v, conv)) => {
                total += v;
                converged &= conv;
            }
            Err(_) => failed.push(fold),
        }
    }
    if failed.len() == k {
        return Err(Error::FoldFitFailed(failed[0]));
    }
    Ok(CvResult { cvpl: total, failed_folds: failed, converged })
}

/// CVPL of the kernel model at `lam`.
pub fn cvpl(ds: &SurvivalDataset, lam: &LambdaTriple, plan: &CvPlan) -> Result<CvResult> {
    plan.validate()?;
    lam.validate()?;
    if !ds.is_standardized() {
        return Err(Error::NotStandardized);
    }
    let folds = fold_assignment(ds.status(), plan.folds, plan.seed)?;
    cvpl_with(ds, &folds, plan.folds, |sub| {
        let m = fit(sub, lam, &plan.fit)?;
        let conv = m.diagnostics.converged;
        Ok((m, conv))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub lambda: LambdaTriple,
    pub cvpl: f64,
    pub converged: bool,
    pub partial: bool,
    /// Refinement round in which the point was first evaluated.
    pub round: usize,
}

#[derive(Debug, Clone)]
pub struct GridSearch<M> {
    pub best: LambdaTriple,
    pub best_cvpl: f64,
    pub surface: Vec<SurfacePoint>,
    pub model: M,
}

fn key(l: &LambdaTriple) -> [u64; 3] {
    [l.lambda1.to_bits(), l.lambda2.to_bits(), l.lambda3.to_bits()]
}

/// Ordering used to pick the winner: complete CV runs first, then larger
/// CVPL, then more regularization.
fn better(a: &SurfacePoint, b: &SurfacePoint) -> bool {
    if a.partial != b.partial {
        return !a.partial;
    }
    if a.cvpl != b.cvpl {
        return a.cvpl > b.cvpl;
    }
    (a.lambda.lambda1, a.lambda.lambda2, a.lambda.lambda3) > (b.lambda.lambda1, b.lambda.lambda2, b.lambda.lambda3)
}

fn search_points<M, F, R>(ds: &SurvivalDataset, plan: &CvPlan, fit_one: F, refit: R) -> Result<GridSearch<M>>
where
    M: RiskModel + Send,
    F: Fn(&SurvivalDataset, &LambdaTriple) -> Result<(M, bool)> + Sync,
    R: Fn(&SurvivalDataset, &LambdaTriple) -> Result<M>,
{
    if !ds.is_standardized() {
        return Err(Error::NotStandardized);
    }
    let folds = fold_assignment(ds.status(), plan.folds, plan.seed)?;
    let mut seen: HashMap<[u64; 3], usize> = HashMap::new();
    let mut surface: Vec<SurfacePoint> = Vec::new();
    let mut best: Option<usize> = None;
    let mut grid = plan.grid.clone();
    for round in 0..=plan.refine_rounds {
        let mut fresh: Vec<LambdaTriple> = Vec::new();
        for l in grid.points() {
            if !seen.contains_key(&key(&l)) && !fresh.iter().any(|f| key(f) == key(&l)) {
                fresh.push(l);
            }
        }
        let results: Vec<Option<SurfacePoint>> = fresh
            .par_iter()
            .map(|lam| {
                cvpl_with(ds, &folds, plan.folds, |sub| fit_one(sub, lam)).ok().map(|r| SurfacePoint {
                    lambda: *lam,
                    cvpl: r.cvpl,
                    converged: r.converged,
                    partial: r.partial(),
                    round,
                })
            })
            .collect();
        for (lam, res) in fresh.iter().zip(results) {
            seen.insert(key(lam), surface.len());
            if let Some(p) = res {
                surface.push(p);
                let idx = surface.len() - 1;
                if best.map_or(true, |b| better(&surface[idx], &surface[b])) {
                    best = Some(idx);
                }
            }
        }
        let Some(b) = best else {
            return Err(Error::AllFitsFailed);
        };
        if round < plan.refine_rounds {
            grid = grid.refine(&surface[b].lambda, plan.shrink);
        }
    }
    let b = best.ok_or(Error::AllFitsFailed)?;
    let winner = surface[b].lambda;
    let model = refit(ds, &winner)?;
    Ok(GridSearch { best: winner, best_cvpl: surface[b].cvpl, surface, model })
}

/// Maximizes CVPL of the kernel model over the plan's grid, then refits on
/// all of `ds` at the winner.
pub fn grid_search(ds: &SurvivalDataset, plan: &CvPlan) -> Result<GridSearch<FittedModel>> {
    plan.validate()?;
    search_points(
        ds,
        plan,
        |sub, lam| {
            let m = fit(sub, lam, &plan.fit)?;
            let conv = m.diagnostics.converged;
            Ok((m, conv))
        },
        |full, lam| fit(full, lam, &plan.fit),
    )
}

/// Tunes the LASSO-Cox baseline over `lambda1` with the same folds and
/// refinement schedule (`lambda2`, `lambda3` are unused).
pub fn tune_lasso_cox(ds: &SurvivalDataset, lambda1: &GridAxis, plan: &CvPlan) -> Result<GridSearch<LassoCoxModel>> {
    lambda1.validate("lambda1", false)?;
    let lasso_plan = CvPlan {
        grid: LambdaGrid { lambda1: lambda1.clone(), lambda2: GridAxis::list(vec![0.0]), lambda3: GridAxis::list(vec![1.0]) },
        ..plan.clone()
    };
    if lasso_plan.folds < 2 {
        return Err(Error::InvalidConfig("cross-validation needs at least 2 folds".into()));
    }
    let cfg = plan.fit;
    search_points(
        ds,
        &lasso_plan,
        |sub, lam| {
            let m = fit_lasso_cox_with(sub, lam.lambda1, &cfg)?;
            let conv = m.converged;
            Ok((m, conv))
        },
        |full, lam| fit_lasso_cox_with(full, lam.lambda1, &cfg),
    )
}

pub fn write_surface_csv<W: Write>(surface: &[SurfacePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda1", "lambda2", "lambda3", "cvpl", "converged", "partial", "round"])?;
    for p in surface {
        w.write_record([
            p.lambda.lambda1.to_string(),
            p.lambda.lambda2.to_string(),
            p.lambda.lambda3.to_string(),
            p.cvpl.to_string(),
            (p.converged as u8).to_string(),
            (p.partial as u8).to_string(),
            p.round.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_surface_csv_file(surface: &[SurfacePoint], path: &Path) -> Result<()> {
    write_surface_csv(surface, std::fs::File::create(path)?)
}
