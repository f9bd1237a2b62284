//! Command-line arguments.

use std::path::PathBuf;

use bjns::gibbs::{DiagSampler, PriorOddsMode};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "bjns", version, about = "Joint selection of Gaussian graphical models across related groups")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one chain on a dataset and summarize it.
    Fit(FitArgs),
    /// Generate a synthetic dataset with a known decomposition.
    Simulate(SimulateArgs),
    /// Prune the component family with pairwise fits, then refit.
    Screen(ScreenArgs),
    /// Compare a fit against a known truth.
    Score(ScoreArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PriorOdds {
    Literal,
    Corrected,
}

impl From<PriorOdds> for PriorOddsMode {
    fn from(p: PriorOdds) -> Self {
        match p {
            PriorOdds::Literal => PriorOddsMode::Literal,
            PriorOdds::Corrected => PriorOddsMode::Corrected,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DiagMode {
    Grid,
    Point,
}

impl From<DiagMode> for DiagSampler {
    fn from(d: DiagMode) -> Self {
        match d {
            DiagMode::Grid => DiagSampler::Grid,
            DiagMode::Point => DiagSampler::PointMass,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TraceMode {
    /// Every edge of every retained sweep.
    Full,
    /// Present edges only.
    Present,
    /// No trace file.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Relative,
    TwoMeans,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Design {
    Ar2ChainK4,
    RandomSharedK4,
    BlockK6,
}

#[derive(Clone, Debug, Args)]
pub struct ChainArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = DiagMode::Point)]
    pub diag_sampler: DiagMode,
}

#[derive(Clone, Debug, Args)]
pub struct FitArgs {
    /// Group manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// "full" or a spec JSON file.
    #[arg(long, default_value = "full")]
    pub spec: String,
    #[arg(long, value_enum, default_value_t = PriorOdds::Literal)]
    pub prior_odds: PriorOdds,
    /// Known truth; switches the per-sweep output from stability to kappa.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TraceMode::Present)]
    pub trace: TraceMode,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub design: Design,
    #[arg(long)]
    pub p: usize,
    /// Observations per group.
    #[arg(long, default_value_t = 150)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// Share of absent edges per group (random_shared_k4 only).
    #[arg(long, default_value_t = 0.95)]
    pub sparsity: f64,
    /// Share of each group's edges common to all groups (random_shared_k4 only).
    #[arg(long, default_value_t = 0.5)]
    pub shared_fraction: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct ScreenArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Chain settings of the reduced fits.
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 1000)]
    pub pairwise_burnin: usize,
    #[arg(long, default_value_t = 1000)]
    pub pairwise_samples: usize,
    #[arg(long, value_enum, default_value_t = PriorOdds::Corrected)]
    pub prior_odds: PriorOdds,
    #[arg(long, value_enum, default_value_t = Rule::Relative)]
    pub rule: Rule,
    /// Cutoff of the relative rule, as a fraction of the largest count.
    #[arg(long, default_value_t = 0.2)]
    pub alpha: f64,
    #[arg(long, default_value_t = 5)]
    pub max_rounds: usize,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct ScoreArgs {
    /// fit.json written by fit or screen.
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
