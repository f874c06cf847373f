//! Temporal occurrence models and hierarchical SVM fusion for recognizing
//! recurring events in photo collections.
//!
//! The pipeline learns, for every event class, a day-of-year score curve
//! from capture dates, trains one-vs-one linear SVMs per precomputed feature
//! source, stacks their calibrated probabilities into a second-level SVM,
//! and penalizes class probabilities that disagree with the temporal score
//! of an item's capture day.
//!
//! The numerical kernels are generic over [`Scalar`] / [`Real`]; the
//! aliases below fix them to `f64`, which every file format uses.

pub mod augment;
pub mod classifier;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod ingest;
pub mod probability;
pub mod refinement;
pub mod scalar;
pub mod seeding;
pub mod spline;
pub mod temporal_model;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};

pub use augment::{filter_by_temporal, AugmentItem, FilterDecision};
pub use classifier::{MultiClassModel, TrainOptions};
pub use evaluation::{evaluate, ApConvention, EvalReport};
pub use fusion::{predict_fusion, train_fusion, FusionModel, Placement, StackingPlan};
pub use ingest::{day_of_year, parse_manifest, DayIndex, FeatureMatrix, ItemRecord, Split};
pub use probability::ProbabilityTable;
pub use refinement::{refine, refine_batch};
pub use temporal_model::{fit_temporal_model, DayHistogram, TemporalConfig, TemporalModel};

/// Smoothing spline over `f64` knots.
pub type SplineFit = spline::SplineFit<f64>;
/// Linear SVM with `f64` weights.
pub type BinarySvm = classifier::BinarySvm<f64>;
pub type SigmoidCalibrator = classifier::SigmoidCalibrator<f64>;
pub type PrCurve = evaluation::PrCurve<f64>;
/// Per-class probabilities of one item.
pub type ProbabilityVector = Vec<f64>;
/// Per-class probabilities of many items, one row per item.
pub type ProbabilityMatrix = ndarray::Array2<f64>;
