//! `mindiv` command-line front end.
//!
//! Data files are CSV with a header row. Labelled data put the response in a
//! leading `y` column followed by features `x1..xd`. All numbers are printed
//! with 6 significant digits.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use io::Format;

const DATA_HELP: &str = "CSV schema: header row, `y` column first, then features x1..xd";

#[derive(Parser, Debug)]
#[command(name = "mindiv", version, about = "Minimum-divergence estimation toolkit", after_help = DATA_HELP)]
pub struct Cli {
    /// Base RNG seed.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; model documents default to json, tables to csv.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate a divergence between two distributions.
    Divergence(DivergenceArgs),
    /// Fit a GLM by minimum divergence; prints the fitted model as JSON.
    Fit(FitArgs),
    /// Predict with a model written by `fit`.
    Predict(PredictArgs),
    /// Run a named simulation experiment and summarize the estimators.
    Simulate(SimulateArgs),
    /// Presence-only point process data.
    #[command(subcommand)]
    Ppp(PppCommand),
    /// Fully visible Boltzmann machines.
    #[command(subcommand)]
    Bm(BmCommand),
    /// Boosting with decision stumps.
    #[command(subcommand)]
    Boost(BoostCommand),
    /// Query-by-committee active learning demo.
    Active(ActiveArgs),
    /// (β,γ)-cosine similarity, clustering and γ-PCA.
    #[command(subcommand)]
    Similarity(SimilarityCommand),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
pub enum DivKind {
    Kl,
    Alpha,
    Beta,
    Gamma,
    DualGamma,
    LogGamma,
    Gm,
    Hm,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct DivergenceArgs {
    #[arg(long, value_enum)]
    pub kind: DivKind,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Poisson intensities λ₀ λ₁.
    #[arg(long, num_args = 2, value_names = ["L0", "L1"])]
    pub poisson: Option<Vec<f64>>,
    /// GM reference intensity for the Poisson family.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Normal parameters μ₀ σ₀² μ₁ σ₁².
    #[arg(long, num_args = 4, value_names = ["MU0", "V0", "MU1", "V1"])]
    pub normal: Option<Vec<f64>>,
    /// Multinomial trial count; cell probabilities come from --p and --q.
    #[arg(long)]
    pub multinomial: Option<usize>,
    /// Comma-separated probabilities of the first distribution.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<f64>>,
    /// Comma-separated GM reference pmf (categorical only).
    #[arg(long, value_delimiter = ',')]
    pub r: Option<Vec<f64>>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
pub enum FamilyArg {
    Normal,
    Bernoulli,
    Categorical,
    Ordinal,
    Poisson,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
pub enum GlmEstimatorArg {
    Ml,
    Gamma,
    Beta,
    Gm,
    Hm,
    IwGm,
    Huber,
    Tukey,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true, after_help = DATA_HELP)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, value_enum, default_value_t = GlmEstimatorArg::Ml)]
    pub estimator: GlmEstimatorArg,
    #[arg(long)]
    pub data: PathBuf,
    /// Number of classes (categorical, ordinal); inferred from the labels when absent.
    #[arg(long)]
    pub classes: Option<usize>,
    /// Known error variance (normal).
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    /// Estimate σ² jointly with θ (normal, gamma estimator).
    #[arg(long)]
    pub joint: bool,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Huber or Tukey tuning constant.
    #[arg(long)]
    pub c: Option<f64>,
    /// Scalar GM reference.
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Args, Debug)]
#[command(after_help = DATA_HELP)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Feature CSV; a leading `y` column is carried through.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
pub enum ScenarioArg {
    NormalMixture,
    LogisticCaseControl,
    BernoulliImbalance,
    PoissonMixture,
    PppMisspec,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
pub enum HeteroArg {
    Zero,
    NegSlope,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub scenario: ScenarioArg,
    #[arg(long, default_value_t = 300)]
    pub reps: usize,
    /// Contamination fraction (mixture scenarios).
    #[arg(long)]
    pub pi: Option<f64>,
    /// Minority fraction (bernoulli-imbalance) or outlier fraction (ppp-misspec).
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_enum, default_value_t = HeteroArg::NegSlope)]
    pub hetero: HeteroArg,
}

#[derive(Subcommand, Debug)]
pub enum PppCommand {
    /// Draw one presence/background data set; columns z,w,x1..xd.
    Simulate {
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
    },
    /// Fit a log-linear intensity.
    #[command(allow_negative_numbers = true)]
    Fit(PppFitArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
pub enum PppEstimatorArg {
    Ml,
    Beta,
    Gamma,
    Gm,
    F,
}

#[derive(Args, Debug)]
pub struct PppFitArgs {
    #[arg(long, value_enum, default_value_t = PppEstimatorArg::F)]
    pub estimator: PppEstimatorArg,
    /// Pareto scale of the F estimator.
    #[arg(long, default_value_t = 1.2)]
    pub sigma: f64,
    #[arg(long, default_value_t = -0.1)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// CSV with columns z (1 presence, 0 background), w (quadrature weight), x1..xd.
    /// Simulated from ppp-misspec when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
pub enum AlphabetArg {
    PlusMinus,
    ZeroOne,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
pub enum BmMethod {
    Gm,
    Ml,
}

#[derive(Subcommand, Debug)]
pub enum BmCommand {
    /// Fit a Boltzmann machine to binary rows (header row, one column per unit).
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = BmMethod::Gm)]
        method: BmMethod,
        #[arg(long, value_enum, default_value_t = AlphabetArg::PlusMinus)]
        alphabet: AlphabetArg,
    },
    /// Time the exact likelihood against the GM loss.
    Bench {
        /// Dimensions as a range `5..10` or a list `5,10,20`.
        #[arg(long, default_value = "5..10")]
        dims: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
pub enum BoostLossArg {
    Exp,
    Gm,
    Gamma,
    Imbalanced,
    Multiclass,
}

#[derive(Subcommand, Debug)]
#[command(after_help = DATA_HELP)]
pub enum BoostCommand {
    /// Train an ensemble; labels are ±1, or 0..k-1 for multiclass.
    #[command(allow_negative_numbers = true)]
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 100)]
        rounds: usize,
        #[arg(long, value_enum, default_value_t = BoostLossArg::Exp)]
        loss: BoostLossArg,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// Number of classes (multiclass); inferred from the labels when absent.
        #[arg(long)]
        classes: Option<usize>,
        /// Positive-class prior (imbalanced); the empirical fraction when absent.
        #[arg(long)]
        pi1: Option<f64>,
    },
    /// Accuracy of a trained ensemble.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct ActiveArgs {
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 5)]
    pub members: usize,
    #[arg(long, default_value_t = 20)]
    pub rounds: usize,
    #[arg(long, default_value_t = 10)]
    pub initial: usize,
    #[arg(long, default_value_t = 500)]
    pub pool: usize,
    #[arg(long, default_value_t = 1000)]
    pub test: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub ridge: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
pub enum PairKindArg {
    Proportional,
    Orthogonal,
}

#[derive(Subcommand, Debug)]
pub enum SimilarityCommand {
    /// (β,γ)-cosine of two vectors.
    #[command(allow_negative_numbers = true)]
    Cos {
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
    },
    /// Mean and sd of the cosine over simulated vector pairs.
    Table {
        #[arg(long, value_enum, default_value_t = PairKindArg::Proportional)]
        kind: PairKindArg,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.5")]
        sigma2: Vec<f64>,
        /// β:γ pairs, comma separated.
        #[arg(long, default_value = "1:1,2:2,1:5")]
        pairs: String,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        #[arg(long, default_value_t = 1000)]
        d: usize,
    },
    /// Average-linkage clustering silhouettes per (β,γ).
    Cluster {
        #[arg(long, default_value = "1:1,1:5")]
        pairs: String,
        /// Feature CSV (header row, no `y`); simulated blobs when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Cluster count for --data.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Cumulative contribution ratios of γ-PCA.
    Pca {
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        gammas: Vec<f64>,
        /// Number of leading components reported.
        #[arg(long, default_value_t = 10)]
        components: usize,
        /// Feature CSV (header row, no `y`); simulated block data when absent.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn configure_threads() -> io::CliResult<()> {
    let Ok(v) = std::env::var("GAMMA_DIV_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| io::CliError::Usage(format!("GAMMA_DIV_THREADS must be a positive integer, found {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| io::CliError::Usage(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> io::CliResult<Option<io::CliError>> {
    configure_threads()?;
    let outcome = commands::dispatch(cli)?;
    let text = outcome.report.render(cli.format.unwrap_or(outcome.report.default_format()));
    match &cli.out {
        Some(p) => std::fs::write(p, text).map_err(|e| io::CliError::Usage(format!("{}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    Ok(outcome.failure)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let err = match run(&cli) {
        Ok(None) => return ExitCode::SUCCESS,
        Ok(Some(e)) | Err(e) => e,
    };
    eprintln!("mindiv: {err}");
    ExitCode::from(err.exit_code() as u8)
}
