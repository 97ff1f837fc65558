//! Penalized Cox partially linear models with a garrotized kernel machine for
//! the nonparametric part: fitting, cross-validated tuning, discrimination
//! metrics and a simulation harness.

pub mod cli;
pub mod coxlik;
pub mod data;
pub mod error;
pub mod fitter;
pub mod kernel;
pub mod metrics;
pub mod simgen;
pub mod solvers;
pub mod tuning;

pub use coxlik::{FitState, LambdaTriple};
pub use data::{CsvSchema, RiskIndex, Standardization, SurvivalDataset};
pub use error::{Error, Result};
pub use fitter::{fit, fit_lasso_cox, predict_risk, FitConfig, FittedModel, LassoCoxModel, RiskModel};
pub use kernel::{GarroteKernelSpec, KernelCache, KernelFamily};
pub use metrics::{auc_integrated, c_statistic, EvalReport};
pub use tuning::{cvpl, grid_search, CvPlan, GridAxis, LambdaGrid};
