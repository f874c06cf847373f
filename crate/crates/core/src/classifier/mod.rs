//! One-vs-one linear SVMs with sigmoid calibration and pairwise coupling.

pub mod calibration;
pub mod coupling;
pub mod multiclass;
pub mod svm;

pub use calibration::{fit_sigmoid, SigmoidCalibrator};
pub use coupling::couple_pairwise;
pub use multiclass::{
    argmax_rows, predict_proba, stratified_folds, train_multiclass, MultiClassModel, PairModel, TrainOptions,
};
pub use svm::{decision_values, solve_binary_svm, train_binary_svm, BinarySvm, SvmOptions, SvmSolution};
