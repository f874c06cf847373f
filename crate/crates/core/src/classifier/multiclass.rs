use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::calibration::{fit_sigmoid, SigmoidCalibrator};
use super::coupling::couple_pairwise;
use super::svm::{train_binary_svm, BinarySvm, SvmOptions};
use crate::error::{Error, Result};

/// Pairwise probabilities are clipped away from 0 and 1 before coupling.
const MIN_PAIR_PROBABILITY: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub cost: f64,
    pub l2_normalize: bool,
    pub seed: u64,
    /// Folds used to produce out-of-fold decision values for calibration.
    pub calibration_folds: usize,
    pub tolerance: f64,
    pub max_epochs: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        let svm = SvmOptions::default();
        TrainOptions {
            cost: svm.cost,
            l2_normalize: false,
            seed: 0,
            calibration_folds: 3,
            tolerance: svm.tolerance,
            max_epochs: svm.max_epochs,
        }
    }
}

impl TrainOptions {
    fn svm_options(&self) -> SvmOptions {
        SvmOptions {
            cost: self.cost,
            tolerance: self.tolerance,
            max_epochs: self.max_epochs,
            seed: self.seed,
        }
    }
}

/// Binary model separating class `a` (positive) from class `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawPair", into = "RawPair")]
pub struct PairModel {
    pub a: usize,
    pub b: usize,
    pub svm: BinarySvm<f64>,
    pub calibrator: SigmoidCalibrator<f64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawPair {
    a: usize,
    b: usize,
    weights: Vec<f64>,
    bias: f64,
    #[serde(rename = "A")]
    sigmoid_a: f64,
    #[serde(rename = "B")]
    sigmoid_b: f64,
    #[serde(default = "default_cost")]
    cost: f64,
}

fn default_cost() -> f64 {
    1.0
}

impl From<RawPair> for PairModel {
    fn from(raw: RawPair) -> Self {
        PairModel {
            a: raw.a,
            b: raw.b,
            svm: BinarySvm {
                weights: raw.weights,
                bias: raw.bias,
                cost: raw.cost,
            },
            calibrator: SigmoidCalibrator {
                a: raw.sigmoid_a,
                b: raw.sigmoid_b,
            },
        }
    }
}

impl From<PairModel> for RawPair {
    fn from(pair: PairModel) -> Self {
        RawPair {
            a: pair.a,
            b: pair.b,
            weights: pair.svm.weights,
            bias: pair.svm.bias,
            sigmoid_a: pair.calibrator.a,
            sigmoid_b: pair.calibrator.b,
            cost: pair.svm.cost,
        }
    }
}

/// One-vs-one classifier for a single feature source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct MultiClassModel {
    pub n_classes: usize,
    pub feature_dim: usize,
    pub source_name: String,
    pub l2_normalize: bool,
    pub seed: u64,
    pub pairs: Vec<PairModel>,
}

#[derive(Deserialize)]
struct RawModel {
    n_classes: usize,
    feature_dim: usize,
    source_name: String,
    l2_normalize: bool,
    #[serde(default)]
    seed: u64,
    pairs: Vec<PairModel>,
}

impl TryFrom<RawModel> for MultiClassModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        let model = MultiClassModel {
            n_classes: raw.n_classes,
            feature_dim: raw.feature_dim,
            source_name: raw.source_name,
            l2_normalize: raw.l2_normalize,
            seed: raw.seed,
            pairs: raw.pairs,
        };
        model.validate()?;
        Ok(model)
    }
}

fn pair_index(n_classes: usize, a: usize, b: usize) -> usize {
    a * n_classes - a * (a + 1) / 2 + (b - a - 1)
}

impl MultiClassModel {
    /// Checks that exactly one pair exists per unordered class pair, in
    /// lexicographic order, with consistent dimensions.
    pub fn validate(&self) -> Result<()> {
        let c = self.n_classes;
        if c < 2 {
            return Err(Error::FormatError(format!("model has {c} classes")));
        }
        if self.pairs.len() != c * (c - 1) / 2 {
            return Err(Error::FormatError(format!(
                "{} classes need {} pairs, found {}",
                c,
                c * (c - 1) / 2,
                self.pairs.len()
            )));
        }
        for (i, pair) in self.pairs.iter().enumerate() {
            if pair.a >= pair.b || pair.b >= c || pair_index(c, pair.a, pair.b) != i {
                return Err(Error::FormatError(format!(
                    "pair {i} is ({}, {}), out of order or out of range",
                    pair.a, pair.b
                )));
            }
            if pair.svm.weights.len() != self.feature_dim {
                return Err(Error::FormatError(format!(
                    "pair ({}, {}) has {} weights, expected {}",
                    pair.a,
                    pair.b,
                    pair.svm.weights.len(),
                    self.feature_dim
                )));
            }
        }
        Ok(())
    }

    pub fn pair(&self, a: usize, b: usize) -> &PairModel {
        &self.pairs[pair_index(self.n_classes, a, b)]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        predict_proba(self, x)
    }

    /// Most probable class per row.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.predict_proba(x)?))
    }
}

pub fn argmax_rows(probs: &Array2<f64>) -> Vec<usize> {
    probs
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

fn l2_normalized(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    out
}

/// Seeded stratified fold assignment: each class is shuffled and dealt
/// round-robin, continuing the deal where the previous class stopped.
pub fn stratified_folds(labels: &[usize], n_folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = next % n_folds;
            next += 1;
        }
    }
    folds
}

/// Deterministic round-robin folds per sign, in row order.
fn sign_folds(y: &[i8], n_folds: usize) -> Vec<usize> {
    let (mut pos, mut neg) = (0, 0);
    y.iter()
        .map(|&label| {
            let counter = if label > 0 { &mut pos } else { &mut neg };
            let fold = *counter % n_folds;
            *counter += 1;
            fold
        })
        .collect()
}

fn train_pair(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    a: usize,
    b: usize,
    options: &TrainOptions,
) -> Result<PairModel> {
    let rows: Vec<usize> = (0..labels.len())
        .filter(|&i| labels[i] == a || labels[i] == b)
        .collect();
    let xs = x.select(Axis(0), &rows);
    let y: Vec<i8> = rows.iter().map(|&i| if labels[i] == a { 1 } else { -1 }).collect();
    let svm_options = options.svm_options();
    let svm = train_binary_svm(xs.view(), &y, &svm_options)?;

    let k = options.calibration_folds.max(2);
    let folds = sign_folds(&y, k);
    let mut out_of_fold = vec![0.0; rows.len()];
    for fold in 0..k {
        let (train, held): (Vec<usize>, Vec<usize>) = (0..rows.len()).partition(|&i| folds[i] != fold);
        if held.is_empty() {
            continue;
        }
        let fold_y: Vec<i8> = train.iter().map(|&i| y[i]).collect();
        let fold_svm = train_binary_svm(xs.select(Axis(0), &train).view(), &fold_y, &svm_options)?;
        for i in held {
            out_of_fold[i] = fold_svm.decision_value(xs.row(i).as_slice().expect("owned row"));
        }
    }
    let calibrator = fit_sigmoid(&out_of_fold, &y)?;
    Ok(PairModel { a, b, svm, calibrator })
}

/// Trains one calibrated binary SVM per unordered class pair.
pub fn train_multiclass(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    source_name: &str,
    options: &TrainOptions,
) -> Result<MultiClassModel> {
    if labels.len() != x.nrows() {
        return Err(Error::DimensionError(format!(
            "{} rows but {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    if n_classes < 2 {
        return Err(Error::DegenerateLabels);
    }
    let mut counts = vec![0usize; n_classes];
    for &label in labels {
        *counts.get_mut(label).ok_or(Error::LabelOutOfRange {
            item: String::from("<training row>"),
            label,
            n_classes,
        })? += 1;
    }
    if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &n)| n < 2) {
        return Err(Error::TooFewExamples {
            class,
            count,
            required: 2,
        });
    }
    let features = if options.l2_normalize {
        l2_normalized(x)
    } else {
        x.to_owned()
    };
    let pairs: Vec<(usize, usize)> = (0..n_classes)
        .flat_map(|a| (a + 1..n_classes).map(move |b| (a, b)))
        .collect();
    let pairs = pairs
        .par_iter()
        .map(|&(a, b)| train_pair(features.view(), labels, a, b, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiClassModel {
        n_classes,
        feature_dim: x.ncols(),
        source_name: source_name.to_string(),
        l2_normalize: options.l2_normalize,
        seed: options.seed,
        pairs,
    })
}

/// Coupled class probabilities for each row; rows sum to one.
pub fn predict_proba(model: &MultiClassModel, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if x.ncols() != model.feature_dim {
        return Err(Error::DimensionError(format!(
            "model `{}` expects {} features, input has {}",
            model.source_name,
            model.feature_dim,
            x.ncols()
        )));
    }
    let features = if model.l2_normalize {
        l2_normalized(x)
    } else {
        x.as_standard_layout().into_owned()
    };
    let k = model.n_classes;
    let rows: Vec<Vec<f64>> = features
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|row| {
            let row = row.as_slice().expect("standard layout");
            let mut r = Array2::<f64>::zeros((k, k));
            for pair in &model.pairs {
                let p = model_pair_probability(pair, row);
                r[[pair.a, pair.b]] = p;
                r[[pair.b, pair.a]] = 1.0 - p;
            }
            couple_pairwise(&r)
        })
        .collect::<Result<_>>()?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((x.nrows(), k), flat).expect("rows have k entries"))
}

fn model_pair_probability(pair: &PairModel, row: &[f64]) -> f64 {
    pair.calibrator
        .probability(pair.svm.decision_value(row))
        .clamp(MIN_PAIR_PROBABILITY, 1.0 - MIN_PAIR_PROBABILITY)
}
