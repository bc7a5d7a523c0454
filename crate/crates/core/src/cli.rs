//! The `fairprice` command line.
//!
//! Exit codes: `0` success, `1` usage or data error, `2` fairness threshold
//! violated (audit only). JSON goes to the file named by `--out` or stdout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::compatibility::{self, Criterion, SearchStrategy};
use crate::confusion::confusion_by_group;
use crate::dataset::{load_dataset, numeric_columns, Dataset, Schema};
use crate::eo_classifier::{self, EtaSample, SolveOptions};
use crate::gaussian_eo::{self, GaussianConfig, LinearPredictor};
use crate::metrics;
use crate::report::{audit, FailOn};
use crate::transport::{self, RepairPlan};
use crate::SCHEMA_VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "FAIRPRICE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "fairprice",
    version,
    about = "Fairness audits, data repair and fair predictors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Group-fairness metrics of a prediction column.
    Audit(AuditArgs),
    /// Move feature distributions of every group onto their barycenter.
    Repair(RepairArgs),
    /// Fit a fair or unconstrained model.
    Fit(FitArgs),
    /// Monte Carlo excess risk of the Gaussian equality-of-odds predictor.
    Simulate(SimulateArgs),
    /// Long-format plotting table from a saved excess-risk curve.
    PlotData(PlotDataArgs),
    /// Search joint distributions for two fairness criteria holding at once.
    Certify(CertifyArgs),
}

#[derive(Debug, clap::Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub sensitive: String,
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub pred: String,
    /// Score column in [0, 1] for balance and calibration metrics.
    #[arg(long)]
    pub score: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// `none`, or comma-separated `di:<tau>` and `eo:<gap>`.
    #[arg(long, default_value = "di:0.8")]
    pub fail_on: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct RepairArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub sensitive: String,
    /// Comma-separated feature columns; defaults to every numeric column
    /// other than the sensitive and target columns.
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Left untouched and excluded from the default feature set.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replay a saved plan instead of fitting one.
    #[arg(long, conflicts_with_all = ["lambda", "seed"])]
    pub replay: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub plan: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMethod {
    GaussianEo,
    EoClassifier,
    Unconstrained,
}

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub method: FitMethod,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub sensitive: String,
    #[arg(long)]
    pub target: String,
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Largest accepted rate-condition residual (eo-classifier).
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON generating configuration; the built-in default otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct PlotDataArgs {
    /// `curve.json` written by `simulate`.
    #[arg(long)]
    pub curve: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct CertifyArgs {
    /// Two criteria among sp, eo, pp, ppv, e.g. `eo,pp`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub pair: Vec<String>,
    /// Smallest base-rate gap a witness must have.
    #[arg(long, default_value_t = 0.2)]
    pub gap: f64,
    /// Lattice step over the probability simplex.
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    /// Use this many uniform random draws instead of the lattice.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // Fails only if the pool was already built, in which case it is kept.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Audit(a) => cmd_audit(&a),
        Command::Repair(a) => cmd_repair(&a).map(|_| EXIT_OK),
        Command::Fit(a) => cmd_fit(&a).map(|_| EXIT_OK),
        Command::Simulate(a) => cmd_simulate(&a).map(|_| EXIT_OK),
        Command::PlotData(a) => cmd_plot_data(&a).map(|_| EXIT_OK),
        Command::Certify(a) => cmd_certify(&a).map(|_| EXIT_OK),
    }
}

fn seed_or_entropy(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s: u64 = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

fn write_json(out: Option<&Path>, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn create(path: &Path) -> anyhow::Result<std::io::BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}

fn resolve_features(
    data: &Path,
    given: &Option<Vec<String>>,
    sensitive: &str,
    target: Option<&str>,
) -> anyhow::Result<Vec<String>> {
    if let Some(f) = given {
        return Ok(f.clone());
    }
    let mut exclude = vec![sensitive];
    exclude.extend(target);
    let cols = numeric_columns(data, &exclude)?;
    if cols.is_empty() {
        bail!("no numeric feature columns found; pass --features");
    }
    Ok(cols)
}

pub fn cmd_audit(a: &AuditArgs) -> anyhow::Result<i32> {
    let fail_on: FailOn = a.fail_on.parse()?;
    let ds = load_dataset(
        &a.data,
        &Schema::new(vec![], a.sensitive.clone(), Some(a.target.clone())),
    )?;
    let truth = ds.binary_target()?;
    let pred = ds.column_binary(&a.pred)?;
    let scores = a.score.as_deref().map(|c| ds.column_f64(c)).transpose()?;
    let report = audit(&truth, &pred, ds.groups(), ds.group_labels(), scores.as_deref(), a.bins)?;
    write_json(a.out.as_deref(), &report)?;
    let violations = fail_on.violations(&report);
    for v in &violations {
        eprintln!("threshold violated: {v}");
    }
    Ok(if violations.is_empty() { EXIT_OK } else { EXIT_VIOLATION })
}

pub fn cmd_repair(a: &RepairArgs) -> anyhow::Result<RepairPlan> {
    let features = resolve_features(&a.data, &a.features, &a.sensitive, a.target.as_deref())?;
    let ds = load_dataset(&a.data, &Schema::new(features, a.sensitive.clone(), a.target.clone()))?;
    let (out, plan) = match &a.replay {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let plan: RepairPlan = serde_json::from_str(&text)?;
            (transport::apply_plan(&ds, &plan)?, plan)
        }
        None => {
            if !(0.0..=1.0).contains(&a.lambda) {
                bail!("--lambda must lie in [0, 1], got {}", a.lambda);
            }
            transport::random_repair(&ds, a.lambda, seed_or_entropy(a.seed))?
        }
    };
    out.save_csv(&a.out)?;
    if let Some(path) = &a.plan {
        write_json(Some(path), &plan)?;
    }
    Ok(plan)
}

fn empirical_mse(ds: &Dataset, s: &[f64], pred: &LinearPredictor) -> anyhow::Result<f64> {
    let y = ds.target().context("target column required")?;
    Ok((0..ds.n_rows())
        .map(|i| (y[i] - pred.predict(&ds.row_features(i), s[i])).powi(2))
        .sum::<f64>()
        / ds.n_rows() as f64)
}

pub fn cmd_fit(a: &FitArgs) -> anyhow::Result<serde_json::Value> {
    let features = resolve_features(&a.data, &a.features, &a.sensitive, Some(&a.target))?;
    let ds = load_dataset(
        &a.data,
        &Schema::new(features.clone(), a.sensitive.clone(), Some(a.target.clone())),
    )?;
    let report = match a.method {
        FitMethod::GaussianEo | FitMethod::Unconstrained => {
            let s = ds.sensitive_values()?;
            let est = gaussian_eo::estimate_covariance(ds.features(), &s, ds.target().context("target required")?)?;
            let cm = &est.model;
            let pred = if a.method == FitMethod::GaussianEo {
                gaussian_eo::fit_eo_fair_linear(cm)?
            } else {
                gaussian_eo::fit_unconstrained_linear(cm)?
            };
            json!({
                "schema_version": SCHEMA_VERSION,
                "method": if a.method == FitMethod::GaussianEo { "gaussian-eo" } else { "unconstrained" },
                "features": features,
                "sensitive": a.sensitive,
                "target": a.target,
                "predictor": pred,
                "constraint_residual": gaussian_eo::constraint_residual(cm, &pred),
                "train_risk": empirical_mse(&ds, &s, &pred)?,
                "model_risk": gaussian_eo::population_risk(cm, &pred)?,
                "covariance_projected": est.projected,
            })
        }
        FitMethod::EoClassifier => {
            let model = eo_classifier::fit_eta_logistic(&ds)?;
            let groups = ds.binary_groups()?;
            let eta = model.eta_of(&ds)?;
            let law = EtaSample::new(&eta, &groups)?;
            let opts = SolveOptions {
                tolerance: a.tolerance,
                ..SolveOptions::default()
            };
            let sol = eo_classifier::solve_theta(&law, model.priors, &opts)?;
            let g = sol.classifier(model.priors);
            let truth = ds.binary_target()?;
            let pred: Vec<u8> = eta
                .iter()
                .zip(&groups)
                .map(|(&e, &s)| u8::from(eo_classifier::Classifier::decide(&g, e, s as usize)))
                .collect();
            let conf = confusion_by_group(&truth, &pred, &groups)?;
            let (tpr_gap, fpr_gap) = metrics::equalized_odds_gaps(&conf)?;
            let errors = truth.iter().zip(&pred).filter(|(a, b)| a != b).count();
            json!({
                "schema_version": SCHEMA_VERSION,
                "method": "eo-classifier",
                "score_model": model,
                "theta": sol.theta,
                "pinned_group": sol.pinned,
                "tpr_residual": sol.tpr_residual,
                "fpr_residual": sol.fpr_residual,
                "train_risk": errors as f64 / truth.len() as f64,
                "train_equalized_odds_tpr_gap": tpr_gap,
                "train_equalized_odds_fpr_gap": fpr_gap,
            })
        }
    };
    write_json(a.out.as_deref(), &report)?;
    Ok(report)
}

pub fn cmd_simulate(a: &SimulateArgs) -> anyhow::Result<gaussian_eo::ExcessRiskCurve> {
    let config: GaussianConfig = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid configuration {}", path.display()))?
        }
        None => GaussianConfig::default(),
    };
    let sizes = a.sizes.clone().unwrap_or_else(|| gaussian_eo::DEFAULT_SIZES.to_vec());
    let seed = seed_or_entropy(a.seed);
    let curve = gaussian_eo::simulate_excess_risk(&config, &sizes, a.reps, seed)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("cannot create {}", a.out_dir.display()))?;
    curve.write_csv(create(&a.out_dir.join("curve.csv"))?)?;
    curve.write_replicates_csv(create(&a.out_dir.join("replicates.csv"))?)?;
    curve.write_long_csv(create(&a.out_dir.join("curve_long.csv"))?)?;
    write_json(Some(&a.out_dir.join("curve.json")), &curve)?;
    Ok(curve)
}

pub fn cmd_plot_data(a: &PlotDataArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&a.curve).with_context(|| format!("cannot read {}", a.curve.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let population = v["population_excess_risk"]
        .as_f64()
        .context("curve lacks population_excess_risk")?;
    let points = v["points"].as_array().context("curve lacks points")?;
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        let n = p["n"].as_u64().context("point lacks n")? as usize;
        rows.push((n, p["mean"].as_f64(), p["sd"].as_f64()));
    }
    gaussian_eo::write_long_csv(create(&a.out)?, population, rows.into_iter())?;
    Ok(())
}

pub fn cmd_certify(a: &CertifyArgs) -> anyhow::Result<compatibility::SearchOutcome> {
    if a.pair.len() != 2 {
        bail!("--pair takes exactly two criteria, e.g. eo,pp");
    }
    let pair = [a.pair[0].parse::<Criterion>()?, a.pair[1].parse::<Criterion>()?];
    let strategy = match a.random {
        Some(samples) => SearchStrategy::Random {
            samples,
            seed: seed_or_entropy(a.seed),
        },
        None => {
            let divisions = (1.0 / a.step).round();
            if !(a.step > 0.0) || (divisions * a.step - 1.0).abs() > 1e-9 {
                bail!("--step must divide 1, got {}", a.step);
            }
            SearchStrategy::Grid {
                divisions: divisions as u32,
            }
        }
    };
    let outcome = compatibility::impossibility_witness_search(pair, a.gap, strategy, a.tol)?;
    write_json(
        a.out.as_deref(),
        &json!({ "schema_version": SCHEMA_VERSION, "search": outcome }),
    )?;
    Ok(outcome)
}
