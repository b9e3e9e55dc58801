//! Command-line definitions and the `key=value` config-file merge.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{ArgMatches, Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "roundtrip", version, about = "Roundtrip neural density estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a simulation task and write the points with their true log-density.
    Simulate(SimulateArgs),
    /// Train a model on a CSV of points and write a checkpoint.
    Train(TrainCmdArgs),
    /// Estimate the log-density of every row of a CSV with a checkpoint.
    Estimate(EstimateArgs),
    /// Evaluate a log-density on a regular 2-D grid.
    Grid(GridArgs),
    /// Simulate, split, train/fit, estimate and score against the true density.
    Benchmark(BenchmarkArgs),
    /// Rank points by estimated density and score precision@k.
    Outlier(OutlierArgs),
    /// Fit a Gaussian KDE and evaluate it.
    Kde(KdeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExecArg {
    Parallel,
    Sequential,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Base seed for every random stream of the run.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Flat `key=value` file with defaults for any long flag; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Row-level execution mode; outputs are identical in both modes.
    #[arg(long, value_enum, default_value = "parallel")]
    pub exec: ExecArg,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// indep-mixture, octagon or involute.
    #[arg(long)]
    pub task: String,
    /// Dimension of indep-mixture (the other tasks are 2-D).
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 20_000)]
    pub count: usize,
    /// Quadrature nodes for the involute density.
    #[arg(long, default_value_t = 10_000)]
    pub quad_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Small,
    Full,
}

/// Training hyperparameters shared by `train`, `benchmark` and `outlier`.
#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Latent dimension; defaults to the data dimension.
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long, value_enum, default_value = "small")]
    pub preset: PresetArg,
    #[arg(long, default_value_t = 10.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.0002)]
    pub lr: f64,
    /// Early-stopping patience in epochs.
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 500)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 20)]
    pub pretrain_epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// Iterations per epoch; defaults to one pass over the training rows.
    #[arg(long)]
    pub iterations_per_epoch: Option<usize>,
    /// Importance samples per validation point during training.
    #[arg(long, default_value_t = 2000)]
    pub val_is_samples: usize,
    /// Cap on validation points scored per epoch.
    #[arg(long)]
    pub val_max_points: Option<usize>,
    /// Comma-separated candidate noise scales.
    #[arg(long, default_value = "0.01,0.05,0.1,0.2,0.4,0.5")]
    pub sigma_grid: String,
    /// Min-max normalize features before training. Defaults to true for CSV
    /// input and false for simulated data, which is already on the latent
    /// scale.
    #[arg(long, action = clap::ArgAction::Set)]
    pub normalize: Option<bool>,
}

/// Importance-sampling settings.
#[derive(Debug, Args)]
pub struct IsArgs {
    /// Importance samples per point.
    #[arg(long, default_value_t = 40_000)]
    pub n_is: usize,
    #[arg(long, default_value_t = 5.0)]
    pub proposal_dof: f64,
    #[arg(long, default_value_t = 1.0)]
    pub proposal_scale: f64,
}

#[derive(Debug, Args)]
pub struct TrainCmdArgs {
    #[command(flatten)]
    pub common: Common,
    /// CSV of training points; `label` and `true_log_density` columns are ignored.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub is: IsArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Is,
    Lp,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "is")]
    pub method: MethodArg,
    #[command(flatten)]
    pub is: IsArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvaluatorArg {
    True,
    Is,
    Lp,
    Kde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Scott,
    Silverman,
    /// Fit both rules and keep the better validation log-likelihood.
    Auto,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub evaluator: EvaluatorArg,
    /// Task whose true density is rendered (evaluator `true`).
    #[arg(long)]
    pub task: Option<String>,
    /// Checkpoint for evaluators `is` and `lp`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// KDE training points for evaluator `kde`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    pub kde_rule: RuleArg,
    /// `x1_lo,x1_hi,x2_lo,x2_hi`; defaults to the task's bounds.
    #[arg(long)]
    pub bounds: Option<String>,
    /// Points per axis, endpoints included.
    #[arg(long, default_value_t = 100)]
    pub resolution: usize,
    #[command(flatten)]
    pub is: IsArgs,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub task: String,
    /// Comma-separated dimensions (indep-mixture only; others are 2-D).
    #[arg(long, default_value = "2")]
    pub dims: String,
    /// Comma-separated subset of roundtrip-is, roundtrip-lp, kde.
    #[arg(long, default_value = "roundtrip-is,roundtrip-lp,kde")]
    pub methods: String,
    /// Points simulated per dimension before splitting.
    #[arg(long, default_value_t = 20_000)]
    pub count: usize,
    /// Cap on the number of test points scored.
    #[arg(long)]
    pub test_points: Option<usize>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub is: IsArgs,
}

#[derive(Debug, Args)]
pub struct OutlierArgs {
    #[command(flatten)]
    pub common: Common,
    /// Labeled CSV; the label column marks outliers with 1.
    #[arg(long, conflicts_with = "fraction")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Generate a synthetic dataset with this outlier fraction instead.
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Dimension of the synthetic dataset.
    #[arg(long, default_value_t = 6)]
    pub dim: usize,
    /// Size of the synthetic dataset.
    #[arg(long, default_value_t = 10_000)]
    pub count: usize,
    /// Comma-separated subset of roundtrip-is, roundtrip-lp, kde.
    #[arg(long, default_value = "roundtrip-is,kde")]
    pub methods: String,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub is: IsArgs,
}

#[derive(Debug, Args)]
pub struct KdeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Training points.
    #[arg(long)]
    pub data: PathBuf,
    /// Query points; defaults to the training points.
    #[arg(long)]
    pub query: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    pub rule: RuleArg,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Simulate(a) => &a.common,
            Command::Train(a) => &a.common,
            Command::Estimate(a) => &a.common,
            Command::Grid(a) => &a.common,
            Command::Benchmark(a) => &a.common,
            Command::Outlier(a) => &a.common,
            Command::Kde(a) => &a.common,
        }
    }
}

/// Turns a config file into `--key value` arguments. Blank lines and lines
/// starting with `#` are skipped; `_` in keys is read as `-`.
pub fn config_file_args(text: &str) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected key=value, got '{line}'", i + 1))
        })?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(CliError::Usage(format!("config line {}: invalid key", i + 1)));
        }
        out.push(format!("--{key}").into());
        out.push(value.trim().into());
    }
    Ok(out)
}

/// Locates `--config <path>` or `--config=<path>` in raw arguments.
fn find_config(args: &[OsString]) -> Option<PathBuf> {
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return iter.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Inserts config-file arguments right after the subcommand so that explicit
/// flags, which come later, override them.
pub fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = find_config(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let extra = config_file_args(&text)?;
    if args.len() < 2 {
        return Ok(args);
    }
    let mut merged = args[..2].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&args[2..]);
    Ok(merged)
}

/// `key=value` lines for every resolved argument of the subcommand, sorted by
/// key. The output directory and config path are left out so that the echo
/// depends only on settings that affect results.
pub fn resolved_config(matches: &ArgMatches) -> String {
    let Some((name, sub)) = matches.subcommand() else {
        return String::new();
    };
    let command = Cli::command();
    let Some(def) = command.find_subcommand(name) else {
        return String::new();
    };
    let mut entries: Vec<(String, String)> = def
        .get_arguments()
        .map(|arg| arg.get_id().as_str())
        .filter(|id| !matches!(*id, "out" | "config" | "help" | "version"))
        .filter_map(|id| {
            let raw = sub.get_raw(id)?;
            let values: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            Some((id.replace('-', "_"), values.join(",")))
        })
        .collect();
    entries.sort();
    let mut out = format!("command={name}\n");
    for (k, v) in entries {
        out.push_str(&format!("{k}={v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines() {
        let args = config_file_args("# c\nseed = 3\nmax_epochs=0\n\n").unwrap();
        let args: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert_eq!(args, ["--seed", "3", "--max-epochs", "0"]);
        assert!(config_file_args("novalue\n").is_err());
    }

    #[test]
    fn find_config_forms() {
        let a: Vec<OsString> = ["x", "train", "--config", "c.txt"].map(Into::into).to_vec();
        assert_eq!(find_config(&a), Some(PathBuf::from("c.txt")));
        let b: Vec<OsString> = ["x", "train", "--config=d.txt"].map(Into::into).to_vec();
        assert_eq!(find_config(&b), Some(PathBuf::from("d.txt")));
    }
}
