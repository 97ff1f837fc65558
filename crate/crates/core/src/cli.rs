//! Command-line front end. `run` parses arguments, dispatches a subcommand
//! and maps failures to exit codes: 0 success, 1 usage, 2 data, 3 numerical.

use std::ffi::OsString;
use std::fs::File;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::coxlik::LambdaTriple;
use crate::data::{read_csv, read_csv_header, write_csv_file, CsvSchema, SurvivalDataset};
use crate::error::{Error, Result};
use crate::fitter::{fit, FitConfig, FitDiagnostics, FittedModel, RiskModel};
use crate::kernel::KernelFamily;
use crate::metrics::{evaluate, EvalReport};
use crate::simgen::{format_table, generate, run_benchmark, write_records_csv, write_summary_csv, BenchConfig, Method, SettingSpec, SplitMode};
use crate::tuning::{cvpl, grid_search, write_surface_csv_file, CvPlan, GridAxis, LambdaGrid};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "reggkm", version, about = "Penalized kernel machine Cox regression")]
pub struct Cli {
    /// Worker threads for grids and replications (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model at fixed regularization.
    Fit(FitArgs),
    /// Choose regularization by cross-validated partial likelihood.
    Tune(TuneArgs),
    /// Score new rows with a saved model.
    Predict(PredictArgs),
    /// C-statistic, AUC and optionally CVPL for a model or a score file.
    Evaluate(EvaluateArgs),
    /// Write a simulated dataset for one of the built-in settings.
    Simulate(SimulateArgs),
    /// Monte-Carlo comparison of the kernel model and LASSO-Cox.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Column schema JSON; inferred from `time`, `status`, `x*`, `z*` headers when absent.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    Polynomial,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelArg,
    /// Polynomial degree.
    #[arg(long, default_value_t = 2)]
    pub degree: u32,
    /// Polynomial offset.
    #[arg(long, default_value_t = 1.0)]
    pub offset: f64,
    #[arg(long, default_value_t = 50)]
    pub max_cycles: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
}

impl KernelArgs {
    fn config(&self) -> FitConfig {
        let kernel = match self.kernel {
            KernelArg::Gaussian => KernelFamily::GaussianGarrote,
            KernelArg::Polynomial => KernelFamily::PolynomialGarrote { degree: self.degree, offset: self.offset },
        };
        FitConfig { kernel, max_outer_cycles: self.max_cycles, tol: self.tol, ..FitConfig::default() }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub lambda1: f64,
    #[arg(long)]
    pub lambda2: f64,
    #[arg(long)]
    pub lambda3: f64,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Model JSON output.
    #[arg(long)]
    pub out: PathBuf,
    /// Fit report JSON (default: `<out stem>.report.json`).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Grid JSON with `lambda1`, `lambda2`, `lambda3` axes; overrides the range flags.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Log-spaced range `lo,hi,points` used for all three penalties.
    #[arg(long, value_parser = parse_range, default_value = "0.001,1,4")]
    pub range: (f64, f64, usize),
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 2)]
    pub rounds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl GridArgs {
    fn plan(&self, fit: FitConfig) -> Result<CvPlan> {
        let grid = match &self.grid {
            Some(p) => serde_json::from_reader(File::open(p)?)?,
            None => {
                let (lo, hi, k) = self.range;
                let axis = GridAxis::log_range(lo, hi, k);
                LambdaGrid { lambda1: axis.clone(), lambda2: axis.clone(), lambda3: axis }
            }
        };
        let plan = CvPlan { folds: self.folds, seed: self.seed, grid, refine_rounds: self.rounds, fit, ..CvPlan::default() };
        plan.validate()?;
        Ok(plan)
    }
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err("expected lo,hi,points".into());
    }
    let lo: f64 = parts[0].parse().map_err(|_| "bad lo")?;
    let hi: f64 = parts[1].parse().map_err(|_| "bad hi")?;
    let k: usize = parts[2].parse().map_err(|_| "bad points")?;
    if !(lo > 0.0 && hi >= lo && k >= 1) {
        return Err("need 0 < lo <= hi and points >= 1".into());
    }
    Ok((lo, hi, k))
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Directory receiving `surface.csv` and `model.json`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV holding the model's covariate columns.
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV with one `risk` column.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model to score the data with.
    #[arg(long, conflicts_with = "scores", required_unless_present = "scores")]
    pub model: Option<PathBuf>,
    /// CSV with a `risk` column aligned with the data rows.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// C-statistic truncation time (default: 70th percentile of times).
    #[arg(long)]
    pub xi_c: Option<f64>,
    /// AUC integration limit (default: 90% of the largest time).
    #[arg(long)]
    pub xi_auc: Option<f64>,
    /// Also compute CVPL at the model's penalties (requires --model).
    #[arg(long, requires = "model")]
    pub cvpl: bool,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report JSON output (printed to stdout otherwise).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=7))]
    pub setting: u8,
    /// Target censoring rate in percent.
    #[arg(long, default_value_t = 0.0)]
    pub cr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n: Option<usize>,
    /// Output CSV; a `<stem>.schema.json` is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Cv,
    Holdout,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long = "setting", required = true, value_parser = clap::value_parser!(u8).range(1..=7))]
    pub settings: Vec<u8>,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    /// Target censoring rate in percent.
    #[arg(long, default_value_t = 0.0)]
    pub cr: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "cv")]
    pub split: SplitArg,
    /// Log-spaced range `lo,hi,points` for the kernel model's penalties.
    #[arg(long, value_parser = parse_range, default_value = "0.001,1,3")]
    pub range: (f64, f64, usize),
    /// Log-spaced range `lo,hi,points` for the LASSO-Cox penalty.
    #[arg(long, value_parser = parse_range, default_value = "0.001,1,8")]
    pub lasso_range: (f64, f64, usize),
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub rounds: usize,
    #[arg(long, default_value_t = 50)]
    pub max_cycles: usize,
    /// Directory receiving `replications.csv` and `summary.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        // A pool may already exist when run is called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        _ if e.is_numerical() => EXIT_NUMERICAL,
        Error::Io(_) | Error::InvalidConfig(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Fit(a) => cmd_fit(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn load_data(a: &DataArgs) -> Result<SurvivalDataset> {
    if !a.data.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("data file {} not found", a.data.display()),
        )));
    }
    let schema = match &a.schema {
        Some(p) if !p.exists() => {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("schema file {} not found", p.display()),
            )))
        }
        Some(p) => CsvSchema::from_json_file(p)?,
        None => CsvSchema::infer(&read_csv_header(&a.data)?)?,
    };
    read_csv(&a.data, &schema)
}

#[derive(Serialize)]
struct FitReport<'a> {
    n: usize,
    p: usize,
    q: usize,
    lambda: LambdaTriple,
    diagnostics: &'a FitDiagnostics,
    in_sample: Option<EvalReport>,
}

fn fit_report(ds: &SurvivalDataset, m: &FittedModel) -> Result<String> {
    let in_sample = evaluate(ds.time(), ds.status(), m.train_eta.as_slice(), None, None).ok();
    let r = FitReport { n: ds.n(), p: ds.p(), q: ds.q(), lambda: m.lambda, diagnostics: &m.diagnostics, in_sample };
    Ok(serde_json::to_string_pretty(&r)?)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let ds = load_data(&a.data)?.standardize()?;
    let lam = LambdaTriple::new(a.lambda1, a.lambda2, a.lambda3)?;
    let cfg = a.kernel.config();
    cfg.validate()?;
    let m = fit(&ds, &lam, &cfg)?;
    if !m.diagnostics.converged {
        eprintln!("warning: stopped after {} cycles without meeting the tolerance", m.diagnostics.cycles);
    }
    m.save(&a.out)?;
    let report = a.report.clone().unwrap_or_else(|| sibling(&a.out, ".report.json"));
    std::fs::write(report, fit_report(&ds, &m)? + "\n")?;
    println!("objective {:.10} after {} cycles", m.diagnostics.final_objective, m.diagnostics.cycles);
    Ok(())
}

fn cmd_tune(a: TuneArgs) -> Result<()> {
    let ds = load_data(&a.data)?.standardize()?;
    let cfg = a.kernel.config();
    let plan = a.grid.plan(cfg)?;
    let g = grid_search(&ds, &plan)?;
    std::fs::create_dir_all(&a.out_dir)?;
    write_surface_csv_file(&g.surface, &a.out_dir.join("surface.csv"))?;
    g.model.save(&a.out_dir.join("model.json"))?;
    std::fs::write(a.out_dir.join("model.report.json"), fit_report(&ds, &g.model)? + "\n")?;
    println!(
        "best lambda1={} lambda2={} lambda3={} cvpl={:.10}",
        g.best.lambda1, g.best.lambda2, g.best.lambda3, g.best_cvpl
    );
    Ok(())
}

/// Reads the named numeric columns of a CSV into a row-major matrix.
fn read_columns(path: &Path, names: &[String]) -> Result<(usize, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let cols = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::SchemaMismatch(format!("column `{n}` not in header")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for &c in &cols {
            let raw = rec.get(c).map(str::trim).unwrap_or("");
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
                return Err(Error::MissingValue { row: r + 1, col: header[c].clone() });
            }
            values.push(raw.parse::<f64>().map_err(|_| Error::Parse { row: r + 1, col: header[c].clone() })?);
        }
        rows += 1;
    }
    Ok((rows, values))
}

fn read_matrix(path: &Path, names: &[String]) -> Result<DMatrix<f64>> {
    let (rows, v) = read_columns(path, names)?;
    Ok(DMatrix::from_row_slice(rows, names.len(), &v))
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let m = FittedModel::load(&a.model)?;
    if !a.data.exists() {
        return Err(Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, "data file not found")));
    }
    let x = read_matrix(&a.data, &m.x_names)?;
    let z = read_matrix(&a.data, &m.z_names)?;
    let scores = m.predict(&x, &z)?;
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["risk"])?;
    for s in scores {
        w.write_record([s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let ds = load_data(&a.data)?;
    let (scores, model) = match (&a.model, &a.scores) {
        (Some(p), _) => {
            let m = FittedModel::load(p)?;
            (m.predict(ds.x(), ds.z())?, Some(m))
        }
        (None, Some(p)) => {
            let (rows, v) = read_columns(p, &["risk".to_string()])?;
            if rows != ds.n() {
                return Err(Error::DimensionMismatch(format!("{rows} scores for {} rows", ds.n())));
            }
            (v, None)
        }
        (None, None) => return Err(Error::InvalidConfig("either --model or --scores is required".into())),
    };
    let mut report = evaluate(ds.time(), ds.status(), &scores, a.xi_c, a.xi_auc)?;
    if a.cvpl {
        if let Some(m) = &model {
            let std = ds.standardize_with(&m.standardization)?;
            let plan = CvPlan {
                folds: a.folds,
                seed: a.seed,
                grid: LambdaGrid::single(m.lambda),
                fit: FitConfig { kernel: m.kernel, ..FitConfig::default() },
                ..CvPlan::default()
            };
            report.cvpl = Some(cvpl(&std, &m.lambda, &plan)?.cvpl);
        }
    }
    let text = serde_json::to_string_pretty(&report)?;
    match &a.out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    eprintln!(
        "{:<12} {:>10} {:>10}\n{:<12} {:>10.4} {:>10.4}",
        "metric", "value", "horizon", "C-statistic", report.c_statistic, report.c_horizon
    );
    eprintln!("{:<12} {:>10.4} {:>10.4}", "AUC", report.auc, report.auc_horizon);
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    if !(0.0..100.0).contains(&a.cr) {
        return Err(Error::InvalidConfig("--cr is a percentage in [0, 100)".into()));
    }
    let mut spec = SettingSpec::builtin(a.setting, a.cr / 100.0, a.seed)?;
    if let Some(n) = a.n {
        spec.n = n;
    }
    let ds = generate(&spec)?;
    write_csv_file(&ds, &a.out)?;
    ds.schema().write_json_file(&sibling(&a.out, ".schema.json"))?;
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    if !(0.0..100.0).contains(&a.cr) {
        return Err(Error::InvalidConfig("--cr is a percentage in [0, 100)".into()));
    }
    let (lo, hi, k) = a.range;
    let axis = GridAxis::log_range(lo, hi, k);
    let (llo, lhi, lk) = a.lasso_range;
    let cfg = BenchConfig {
        settings: a.settings.clone(),
        censor_rate: a.cr / 100.0,
        methods: vec![Method::RegGkm, Method::LassoCox],
        replications: a.reps,
        split: match a.split {
            SplitArg::Cv => SplitMode::Cv,
            SplitArg::Holdout => SplitMode::Holdout,
        },
        plan: CvPlan {
            folds: a.folds,
            seed: a.seed,
            grid: LambdaGrid { lambda1: axis.clone(), lambda2: axis.clone(), lambda3: axis },
            refine_rounds: a.rounds,
            fit: FitConfig { max_outer_cycles: a.max_cycles, ..FitConfig::default() },
            ..CvPlan::default()
        },
        lasso_grid: GridAxis::log_range(llo, lhi, lk),
        seed: a.seed,
    };
    let res = run_benchmark(&cfg)?;
    std::fs::create_dir_all(&a.out_dir)?;
    write_records_csv(&res.records, File::create(a.out_dir.join("replications.csv"))?)?;
    write_summary_csv(&res.summary, File::create(a.out_dir.join("summary.csv"))?)?;
    print!("{}", format_table(&res.summary));
    let failed: usize = res.summary.iter().map(|r| r.failed).sum();
    if failed > 0 {
        eprintln!("warning: {failed} replication fits failed and were excluded");
    }
    Ok(())
}
