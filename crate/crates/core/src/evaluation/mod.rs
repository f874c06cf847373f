//! Ranking metrics and synthetic benchmark data.

pub mod metrics;
pub mod synthetic;

pub use metrics::{
    average_precision, average_precision_with, class_curves, evaluate, pr_curve, ApConvention,
    ClassAp, EvalReport, PrCurve,
};
pub use synthetic::{generate_synthetic, spread_windows, DateWindow, SyntheticConfig, SyntheticDataset};
