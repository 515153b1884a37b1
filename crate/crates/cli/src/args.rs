use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "jointshape", version, about = "Joint shape, feature and indicator models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a cohort directory.
    Fit(FitArgs),
    /// Condition a model on named values and summarize the posterior.
    Condition(ConditionArgs),
    /// Draw samples from a model or a conditional model.
    Sample(SampleArgs),
    /// Write the instance at `t` standard deviations along a principal mode.
    Mode(ModeArgs),
    /// Generate a synthetic cohort.
    Synth(SynthArgs),
    /// Run the held-out reconstruction benchmark.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CohortArgs {
    /// Directory with one mesh (and feature file) per instance.
    #[arg(long)]
    pub meshes: PathBuf,
    /// Indicator table; defaults to `<meshes>/indicators.csv`.
    #[arg(long)]
    pub indicators: Option<PathBuf>,
    /// Cohort specification; defaults to `<meshes>/specs.json`.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FitOptions {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Retained components; defaults to the training size minus one.
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    pub jitter: f64,
    /// Number of tie-breaking rankings.
    #[arg(long, default_value_t = 50)]
    pub rankings: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SigmaArgs {
    #[arg(long)]
    pub sigma_shape: Option<f64>,
    #[arg(long)]
    pub sigma_feature: Option<f64>,
    #[arg(long)]
    pub sigma_indicator: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ObservationArgs {
    /// Model file (`.json`, or `.cbor`/`.bin` for the binary form).
    #[arg(long)]
    pub model: PathBuf,
    /// Observed value, `name=value`. Repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    pub assignments: Vec<String>,
    #[command(flatten)]
    pub sigmas: SigmaArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub cohort: CohortArgs,
    #[command(flatten)]
    pub fit: FitOptions,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConditionArgs {
    #[command(flatten)]
    pub observation: ObservationArgs,
    /// Summary file (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Number of posterior modes in the summary.
    #[arg(long, default_value_t = 5)]
    pub modes: usize,
    /// Also write the predicted mesh (`.obj` or `.csm`).
    #[arg(long)]
    pub mesh: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub observation: ObservationArgs,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Comma-separated variable names; all components when omitted.
    #[arg(long, value_delimiter = ',')]
    pub vars: Vec<String>,
    /// Samples, one row per draw (CSV).
    #[arg(long)]
    pub out: PathBuf,
    /// Histograms of the selected variables (CSV).
    #[arg(long)]
    pub histograms: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct ModeArgs {
    #[command(flatten)]
    pub observation: ObservationArgs,
    /// Mode index, starting at 1.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Position in standard deviations.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub t: f64,
    /// `.obj`/`.csm` for the mesh alone, `.json` for the whole instance.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthOptions {
    #[arg(long, default_value_t = 793)]
    pub instances: usize,
    #[arg(long, default_value_t = 200)]
    pub vertices: usize,
    #[arg(long, default_value_t = 4)]
    pub factors: usize,
    #[arg(long, default_value_t = 1.0)]
    pub loading_scale: f64,
    #[arg(long, default_value_t = 0.35)]
    pub noise: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub synth: SynthOptions,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrdinalScoringArg {
    Level,
    Expected,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Cohort directory; a synthetic cohort is generated when omitted.
    #[arg(long)]
    pub meshes: Option<PathBuf>,
    #[arg(long, requires = "meshes")]
    pub indicators: Option<PathBuf>,
    #[arg(long, requires = "meshes")]
    pub spec: Option<PathBuf>,
    #[command(flatten)]
    pub synth: SynthOptions,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Fixed observation noise. Blocks without a flag use 0; with no flag at
    /// all the noise is chosen by cross-validation on the training set.
    #[command(flatten)]
    pub sigmas: SigmaArgs,
    /// Share of instances used for training; defaults to 600 of 793.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "age,sex,mrs,shape,feature")]
    pub targets: Vec<String>,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    #[arg(long, value_enum, default_value_t = OrdinalScoringArg::Level)]
    pub ordinal_scoring: OrdinalScoringArg,
    /// Include the rows where a block target observes itself.
    #[arg(long)]
    pub include_self: bool,
    /// Directory for `report.csv` and `report.txt`.
    #[arg(long)]
    pub out: PathBuf,
}
