//! Simulation settings 1 to 7, censoring calibration and the Monte-Carlo
//! benchmark comparing the kernel model with LASSO-Cox.

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coxlik::log_partial_likelihood_sum;
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::fitter::{fit, fit_lasso_cox_with, RiskModel};
use crate::metrics::{auc_integrated, c_statistic};
use crate::tuning::{grid_search, tune_lasso_cox, CvPlan, GridAxis};

pub const PILOT_DRAWS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HFunction {
    /// Five-coordinate interaction surface of Settings 1 and 2.
    A,
    /// Three-coordinate surface of Settings 3 to 7.
    B,
    Zero,
}

impl HFunction {
    pub fn min_q(self) -> usize {
        match self {
            HFunction::A => 5,
            HFunction::B => 3,
            HFunction::Zero => 0,
        }
    }
}

pub fn h_eval(h: HFunction, z: &[f64]) -> Result<f64> {
    if z.len() < h.min_q() {
        return Err(Error::DimensionMismatch(format!("h needs {} coordinates, got {}", h.min_q(), z.len())));
    }
    Ok(match h {
        HFunction::A => {
            let (z1, z2, z3, z4, z5) = (z[0], z[1], z[2], z[3], z[4]);
            0.6 * z1.cos() * z2 + 0.36 * z1 * z1 - 0.3 * z1.exp() * z2 - 0.36 * z2.sin() * z3.cos()
                + 0.6 * z3.exp() * z4.sin()
                - 0.48 * z2 * z4.sin()
                - 0.12 * z3.cos() * z4 * z4
                - 0.12 * z4.exp() * z5.cos()
                - 0.48 * z4.sin() * z5 * z5
        }
        HFunction::B => {
            let (z1, z2, z3) = (z[0], z[1], z[2]);
            0.72 * z1.cos() * z2 - 0.24 * z1.exp() * z2 + 0.72 * z2.exp() * z3.sin()
                - 0.12 * z1.cos() * z3 * z3
                - 0.12 * z2.exp() * z3.cos()
        }
        HFunction::Zero => 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSpec {
    pub id: u8,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub beta: Vec<f64>,
    pub h: HFunction,
    /// Target censoring fraction in `[0, 1)`.
    pub censor_rate: f64,
    pub seed: u64,
}

impl SettingSpec {
    /// The published configuration of setting `id` with `n = 100`.
    pub fn builtin(id: u8, censor_rate: f64, seed: u64) -> Result<Self> {
        let (p, q, h) = match id {
            1 => (1, 5, HFunction::A),
            2 => (2, 15, HFunction::A),
            3 => (200, 15, HFunction::B),
            4 => (15, 200, HFunction::B),
            5 => (200, 200, HFunction::B),
            6 => (1, 1000, HFunction::B),
            7 => (1000, 1000, HFunction::B),
            _ => return Err(Error::InvalidConfig(format!("unknown setting {id}"))),
        };
        let active = if p >= 5 { 5 } else { 1 };
        let beta = (0..p).map(|j| if j < active { 1.0 } else { 0.0 }).collect();
        let spec = Self { id, n: 100, p, q, beta, h, censor_rate, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.len() != self.p {
            return Err(Error::DimensionMismatch("beta length differs from P".into()));
        }
        if self.q < self.h.min_q() {
            return Err(Error::DimensionMismatch(format!("Q = {} below the h minimum {}", self.q, self.h.min_q())));
        }
        if self.n < 2 {
            return Err(Error::InvalidConfig("n must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.censor_rate) {
            return Err(Error::InvalidConfig("censor rate must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Number of leading coordinates that enter `x' beta`.
    fn active_p(&self) -> usize {
        self.beta.iter().rposition(|b| *b != 0.0).map_or(0, |k| k + 1)
    }
}

/// Censoring mechanism: `C ~ Exponential(mean U exp(eta))` with
/// `U ~ Uniform(lo, hi)`, or no censoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CensoringPlan {
    None,
    Uniform { lo: f64, hi: f64, achieved: f64 },
}

/// Seed for the calibration pilot; shared by all replications of a setting
/// and target so they use the same censoring law.
fn pilot_seed(spec: &SettingSpec, target: f64) -> u64 {
    splitmix64(0x5eed_ca11 ^ ((spec.id as u64) << 32) ^ target.to_bits())
}

/// Finds `c` so that `U ~ Uniform(c, 3c)` yields the target censoring rate
/// within one percentage point on a pilot sample, by bisection on `log c`
/// with common random numbers.
pub fn calibrate_censoring(spec: &SettingSpec, target: f64, draws: usize) -> Result<CensoringPlan> {
    spec.validate()?;
    if target == 0.0 {
        return Ok(CensoringPlan::None);
    }
    if !(target > 0.0 && target < 1.0) || draws == 0 {
        return Err(Error::InvalidConfig("calibration target must lie in (0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(pilot_seed(spec, target));
    let ap = spec.active_p();
    let mut pilot = Vec::with_capacity(draws);
    let mut z = vec![0.0; spec.h.min_q()];
    for _ in 0..draws {
        let mut eta = 0.0;
        for j in 0..ap {
            eta += spec.beta[j] * rng.random_range(-0.01..0.01);
        }
        for v in z.iter_mut() {
            *v = rng.random_range(0.0..3.0);
        }
        eta += h_eval(spec.h, &z)?;
        let d = -(1.0 - rng.random::<f64>()).ln() / eta.exp();
        let spread = 1.0 + 2.0 * rng.random::<f64>();
        let e = -(1.0 - rng.random::<f64>()).ln() * eta.exp();
        // censoring time at scale c is c * spread * e
        pilot.push((d, spread * e));
    }
    let rate = |c: f64| pilot.iter().filter(|(d, u)| c * u < *d).count() as f64 / draws as f64;
    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    let (r_lo, r_hi) = (rate(lo.exp()), rate(hi.exp()));
    if !(r_lo >= target && r_hi <= target) {
        return Err(Error::CalibrationFailed(format!("target {target} outside [{r_hi}, {r_lo}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = rate(mid.exp());
        if (r - target).abs() <= 0.01 {
            let c = mid.exp();
            return Ok(CensoringPlan::Uniform { lo: c, hi: 3.0 * c, achieved: r });
        }
        if r > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::CalibrationFailed(format!("no scale within 1pp of {target}")))
}

/// Draws a raw dataset for `spec` under an explicit censoring plan.
pub fn generate_with(spec: &SettingSpec, censoring: &CensoringPlan) -> Result<SurvivalDataset> {
    spec.validate()?;
    let (n, p, q) = (spec.n, spec.p, spec.q);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x = DMatrix::from_row_iterator(n, p, (0..n * p).map(|_| rng.random_range(-0.01..0.01)));
    let z = DMatrix::from_row_iterator(n, q, (0..n * q).map(|_| rng.random_range(0.0..3.0)));
    let mut time = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    let mut zi = vec![0.0; q];
    for i in 0..n {
        for (k, v) in zi.iter_mut().enumerate() {
            *v = z[(i, k)];
        }
        let eta: f64 = (0..p).map(|j| x[(i, j)] * spec.beta[j]).sum::<f64>() + h_eval(spec.h, &zi)?;
        let d = -(1.0 - rng.random::<f64>()).ln() / eta.exp();
        let spread = rng.random::<f64>();
        let e = -(1.0 - rng.random::<f64>()).ln();
        let c = match censoring {
            CensoringPlan::None => f64::INFINITY,
            CensoringPlan::Uniform { lo, hi, .. } => (lo + (hi - lo) * spread) * eta.exp() * e,
        };
        time.push(d.min(c));
        status.push(d <= c);
    }
    let x_names = (1..=p).map(|j| format!("x{j}")).collect();
    let z_names = (1..=q).map(|j| format!("z{j}")).collect();
    SurvivalDataset::with_names(time, status, x, z, x_names, z_names)
}

/// Calibrates censoring for the setting's target and draws a raw dataset.
pub fn generate(spec: &SettingSpec) -> Result<SurvivalDataset> {
    let plan = calibrate_censoring(spec, spec.censor_rate, PILOT_DRAWS)?;
    generate_with(spec, &plan)
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RegGkm,
    LassoCox,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::RegGkm => "RegGKM",
            Method::LassoCox => "LASSO-COX",
        }
    }
}

/// How tuning data is separated from the evaluation data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Tune by CVPL on the training sample, evaluate on an independent test sample.
    Cv,
    /// Fit each grid point on training data, choose by partial likelihood on
    /// an independent validation sample, evaluate on a test sample.
    Holdout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub settings: Vec<u8>,
    pub censor_rate: f64,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub split: SplitMode,
    pub plan: CvPlan,
    pub lasso_grid: GridAxis,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            settings: vec![1],
            censor_rate: 0.0,
            methods: vec![Method::RegGkm, Method::LassoCox],
            replications: 50,
            split: SplitMode::Cv,
            plan: CvPlan::default(),
            lasso_grid: GridAxis::log_range(1e-3, 1.0, 8),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub setting: u8,
    pub rep: usize,
    pub method: Method,
    pub cvpl: f64,
    pub cstat: f64,
    pub auc: f64,
    pub censor_rate: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub setting: u8,
    pub censor_target: f64,
    pub method: Method,
    pub completed: usize,
    pub failed: usize,
    pub cvpl_mean: f64,
    pub cvpl_sd: f64,
    pub cstat_mean: f64,
    pub cstat_sd: f64,
    pub auc_mean: f64,
    pub auc_sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub records: Vec<ReplicationRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Seeds of the training, validation and test samples of one replication.
pub fn replication_seeds(base: u64, setting: u8, rep: usize) -> [u64; 3] {
    let root = splitmix64(base ^ splitmix64(((setting as u64) << 40) ^ rep as u64));
    [splitmix64(root ^ 1), splitmix64(root ^ 2), splitmix64(root ^ 3)]
}

struct Tuned {
    model: Box<dyn RiskModel + Send>,
    score: f64,
    converged: bool,
}

fn tune_method(method: Method, cfg: &BenchConfig, train: &SurvivalDataset, valid: Option<&SurvivalDataset>) -> Result<Tuned> {
    match (cfg.split, method) {
        (SplitMode::Cv, Method::RegGkm) => {
            let g = grid_search(train, &cfg.plan)?;
            let converged = g.model.diagnostics.converged;
            Ok(Tuned { model: Box::new(g.model), score: g.best_cvpl, converged })
        }
        (SplitMode::Cv, Method::LassoCox) => {
            let g = tune_lasso_cox(train, &cfg.lasso_grid, &cfg.plan)?;
            let converged = g.model.converged;
            Ok(Tuned { model: Box::new(g.model), score: g.best_cvpl, converged })
        }
        (SplitMode::Holdout, _) => {
            let valid = valid.ok_or_else(|| Error::InvalidConfig("holdout split needs a validation sample".into()))?;
            let vrisk = valid.risk_index();
            let candidates: Vec<Result<(Box<dyn RiskModel + Send>, bool)>> = match method {
                Method::RegGkm => cfg
                    .plan
                    .grid
                    .points()
                    .par_iter()
                    .map(|lam| {
                        let m = fit(train, lam, &cfg.plan.fit)?;
                        let conv = m.diagnostics.converged;
                        Ok((Box::new(m) as Box<dyn RiskModel + Send>, conv))
                    })
                    .collect(),
                Method::LassoCox => cfg
                    .lasso_grid
                    .values()
                    .par_iter()
                    .map(|l1| {
                        let m = fit_lasso_cox_with(train, *l1, &cfg.plan.fit)?;
                        let conv = m.converged;
                        Ok((Box::new(m) as Box<dyn RiskModel + Send>, conv))
                    })
                    .collect(),
            };
            let mut best: Option<Tuned> = None;
            for c in candidates.into_iter().flatten() {
                let (model, converged) = c;
                let Ok(eta) = model.eta_standardized(valid.x(), valid.z()) else { continue };
                let Ok(score) = log_partial_likelihood_sum(&eta, &vrisk, valid.status()) else { continue };
                if best.as_ref().map_or(true, |b| score > b.score) {
                    best = Some(Tuned { model, score, converged });
                }
            }
            best.ok_or(Error::AllFitsFailed)
        }
    }
}

fn run_replication(cfg: &BenchConfig, setting: u8, rep: usize) -> Vec<Result<ReplicationRecord>> {
    let seeds = replication_seeds(cfg.seed, setting, rep);
    let prepared = (|| -> Result<_> {
        let template = SettingSpec::builtin(setting, cfg.censor_rate, seeds[0])?;
        let plan = calibrate_censoring(&template, cfg.censor_rate, PILOT_DRAWS)?;
        let train_raw = generate_with(&template, &plan)?;
        let test = generate_with(&SettingSpec { seed: seeds[2], ..template.clone() }, &plan)?;
        let train = train_raw.standardize()?;
        let valid = match cfg.split {
            SplitMode::Holdout => {
                let raw = generate_with(&SettingSpec { seed: seeds[1], ..template.clone() }, &plan)?;
                Some(raw.standardize_with(train.standardization().ok_or(Error::NotStandardized)?)?)
            }
            SplitMode::Cv => None,
        };
        Ok((train_raw.censor_rate(), train, valid, test))
    })();
    let (cr, train, valid, test) = match prepared {
        Ok(v) => v,
        Err(e) => {
            let msg = e.to_string();
            return cfg.methods.iter().map(|_| Err(Error::Model(msg.clone()))).collect();
        }
    };
    cfg.methods
        .iter()
        .map(|&method| {
            let tuned = tune_method(method, cfg, &train, valid.as_ref())?;
            let scores = tuned.model.predict(test.x(), test.z())?;
            Ok(ReplicationRecord {
                setting,
                rep,
                method,
                cvpl: tuned.score,
                cstat: c_statistic(test.time(), test.status(), &scores, None)?,
                auc: auc_integrated(test.time(), test.status(), &scores, None)?,
                censor_rate: cr,
                converged: tuned.converged,
            })
        })
        .collect()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (m, var.sqrt())
}

/// Mean and sample SD per (setting, method) over completed replications.
pub fn summarize(records: &[ReplicationRecord], cfg: &BenchConfig, failures: &[(u8, Method)]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &s in &cfg.settings {
        for &m in &cfg.methods {
            let sel: Vec<&ReplicationRecord> = records.iter().filter(|r| r.setting == s && r.method == m).collect();
            let col = |f: fn(&ReplicationRecord) -> f64| mean_sd(&sel.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (cvpl_mean, cvpl_sd) = col(|r| r.cvpl);
            let (cstat_mean, cstat_sd) = col(|r| r.cstat);
            let (auc_mean, auc_sd) = col(|r| r.auc);
            rows.push(SummaryRow {
                setting: s,
                censor_target: cfg.censor_rate,
                method: m,
                completed: sel.len(),
                failed: failures.iter().filter(|f| **f == (s, m)).count(),
                cvpl_mean,
                cvpl_sd,
                cstat_mean,
                cstat_sd,
                auc_mean,
                auc_sd,
            });
        }
    }
    rows
}

pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchResult> {
    if cfg.replications < 1 {
        return Err(Error::InvalidConfig("at least one replication is required".into()));
    }
    if cfg.methods.is_empty() || cfg.settings.is_empty() {
        return Err(Error::InvalidConfig("benchmark needs a setting and a method".into()));
    }
    cfg.plan.validate()?;
    let jobs: Vec<(u8, usize)> =
        cfg.settings.iter().flat_map(|&s| (0..cfg.replications).map(move |r| (s, r))).collect();
    let outcomes: Vec<Vec<Result<ReplicationRecord>>> =
        jobs.par_iter().map(|&(s, r)| run_replication(cfg, s, r)).collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (&(s, _), outs) in jobs.iter().zip(outcomes) {
        for (&m, o) in cfg.methods.iter().zip(outs) {
            match o {
                Ok(rec) => records.push(rec),
                Err(_) => failures.push((s, m)),
            }
        }
    }
    let summary = summarize(&records, cfg, &failures);
    Ok(BenchResult { records, summary })
}

pub fn write_records_csv<W: Write>(records: &[ReplicationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["setting", "rep", "method", "cvpl", "cstat", "auc", "censor_rate", "converged"])?;
    for r in records {
        w.write_record([
            r.setting.to_string(),
            r.rep.to_string(),
            r.method.label().to_string(),
            r.cvpl.to_string(),
            r.cstat.to_string(),
            r.auc.to_string(),
            r.censor_rate.to_string(),
            (r.converged as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "setting", "censor_rate", "method", "completed", "failed", "cvpl_mean", "cvpl_sd", "cstat_mean", "cstat_sd",
        "auc_mean", "auc_sd",
    ])?;
    for r in rows {
        w.write_record([
            r.setting.to_string(),
            r.censor_target.to_string(),
            r.method.label().to_string(),
            r.completed.to_string(),
            r.failed.to_string(),
            r.cvpl_mean.to_string(),
            r.cvpl_sd.to_string(),
            r.cstat_mean.to_string(),
            r.cstat_sd.to_string(),
            r.auc_mean.to_string(),
            r.auc_sd.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width table with `mean (sd)` cells.
pub fn format_table(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<8} {:<4} {:<10} {:>20} {:>18} {:>18}", "Setting", "CR", "Method", "CVPL", "C-statistic", "AUC");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<8} {:<4} {:<10} {:>20} {:>18} {:>18}",
            r.setting,
            format!("{:.0}%", r.censor_target * 100.0),
            r.method.label(),
            format!("{:.4} ({:.4})", r.cvpl_mean, r.cvpl_sd),
            format!("{:.4} ({:.4})", r.cstat_mean, r.cstat_sd),
            format!("{:.4} ({:.4})", r.auc_mean, r.auc_sd),
        );
    }
    s
}
