use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "tempofuse", version, about = "Temporal refinement and hierarchical SVM fusion for event recognition")]
pub struct Cli {
    /// Root seed; every stage derives its own seed from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Only print results, no progress messages.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and a pipeline config for it.
    Synth(SynthArgs),
    /// Fit one temporal model per class from manifest capture dates.
    FitTemporal(FitTemporalArgs),
    /// Train a one-vs-one model on a single feature source.
    Train(TrainArgs),
    /// Train the two-level fusion model.
    TrainFusion(TrainFusionArgs),
    /// Score manifest items with a fusion model.
    Predict(PredictArgs),
    /// Apply temporal refinement to a probability table.
    Refine(RefineArgs),
    /// Per-class average precision and mean AP of a probability table.
    Evaluate(EvaluateArgs),
    /// Keep external items whose capture day scores above a threshold.
    FilterAugment(FilterAugmentArgs),
    /// Run every stage from a JSON run configuration.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with a full synthetic dataset description.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub per_class_train: Option<usize>,
    #[arg(long)]
    pub per_class_test: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub sources: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Fraction of items carrying a capture date.
    #[arg(long)]
    pub coverage: Option<f64>,
    /// Make classes 2k and 2k+1 share nearby feature means.
    #[arg(long)]
    pub pair_adjacent: bool,
    /// Placement written into the generated pipeline config.
    #[arg(long, default_value = "low")]
    pub placement: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitTemporalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub classes: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub smoothing: Option<f64>,
    #[arg(long)]
    pub pad: Option<usize>,
    /// Also use dated validation items.
    #[arg(long)]
    pub merge_validation: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub cost: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Class count; defaults to the largest training label plus one.
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub l2_normalize: bool,
    #[arg(long)]
    pub merge_validation: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainFusionArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    pub features: Vec<PathBuf>,
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[arg(long, default_value = "low")]
    pub placement: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 1.0)]
    pub cost: f64,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub l2_normalize: bool,
    #[arg(long)]
    pub merge_validation: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub fusion: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    pub features: Vec<PathBuf>,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Temporal models; required unless the fusion placement is `none`.
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// Manifest split to score: train, validation, test or all.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RefineArgs {
    #[arg(long)]
    pub probs: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub probs: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory receiving one `recall,precision` CSV per class.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// `step` or `interp11`.
    #[arg(long, default_value = "step")]
    pub ap: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FilterAugmentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub class_map: PathBuf,
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub placement: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub cost: Option<f64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub ap: Option<String>,
}
