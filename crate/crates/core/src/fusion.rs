//! Two-level late fusion of feature sources.
//!
//! One one-vs-one model is trained per feature source. Out-of-fold class
//! probabilities of all sources, optionally temporally refined, are
//! concatenated source by source and used to train a high-level model whose
//! probabilities are the final output. Every source contributes exactly
//! `n_classes` columns to the high level, whatever its dimensionality.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{predict_proba, stratified_folds, train_multiclass, MultiClassModel, TrainOptions};
use crate::error::{Error, Result};
use crate::ingest::{DayIndex, FeatureMatrix, ItemRecord, Split};
use crate::refinement::refine_batch;
use crate::seeding::derive_seed;
use crate::temporal_model::{check_coverage, TemporalModel};

/// Where temporal refinement is applied in the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    None,
    /// Low-level outputs, before stacking.
    #[default]
    Low,
    /// High-level output.
    High,
    Both,
}

impl Placement {
    pub fn refines_low(self) -> bool {
        matches!(self, Placement::Low | Placement::Both)
    }

    pub fn refines_high(self) -> bool {
        matches!(self, Placement::High | Placement::Both)
    }

    pub fn needs_models(self) -> bool {
        self != Placement::None
    }
}

impl FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Placement::None),
            "low" => Ok(Placement::Low),
            "high" => Ok(Placement::High),
            "both" => Ok(Placement::Both),
            other => Err(Error::ConfigError(format!(
                "unknown placement `{other}` (expected none, low, high or both)"
            ))),
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::None => "none",
            Placement::Low => "low",
            Placement::High => "high",
            Placement::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackingPlan {
    pub n_folds: usize,
    pub seed: u64,
}

impl Default for StackingPlan {
    fn default() -> Self {
        StackingPlan { n_folds: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub placement: Placement,
    pub n_classes: usize,
    pub source_names: Vec<String>,
    pub stacking: StackingPlan,
    pub low_models: Vec<MultiClassModel>,
    pub high_model: MultiClassModel,
}

impl FusionModel {
    pub fn validate(&self) -> Result<()> {
        let c = self.n_classes;
        if self.low_models.len() != self.source_names.len() || self.low_models.is_empty() {
            return Err(Error::FormatError(format!(
                "{} low models for {} sources",
                self.low_models.len(),
                self.source_names.len()
            )));
        }
        for (model, name) in self.low_models.iter().zip(&self.source_names) {
            if model.n_classes != c || &model.source_name != name {
                return Err(Error::FormatError(format!(
                    "low model `{}` does not match source `{name}` with {c} classes",
                    model.source_name
                )));
            }
        }
        if self.high_model.n_classes != c || self.high_model.feature_dim != c * self.low_models.len() {
            return Err(Error::FormatError(format!(
                "high model input dim {} but {} sources x {c} classes",
                self.high_model.feature_dim,
                self.low_models.len()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fusion model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: FusionModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Labeled training rows selected from a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub item_ids: Vec<String>,
    pub labels: Vec<usize>,
    pub days: Vec<Option<DayIndex>>,
}

impl TrainingSet {
    pub fn from_manifest(manifest: &[ItemRecord], splits: &[Split]) -> Self {
        let rows: Vec<&ItemRecord> = manifest
            .iter()
            .filter(|r| splits.contains(&r.split) && r.label.is_some())
            .collect();
        TrainingSet {
            item_ids: rows.iter().map(|r| r.item_id.clone()).collect(),
            labels: rows.iter().map(|r| r.label.expect("filtered")).collect(),
            days: rows.iter().map(|r| r.day()).collect(),
        }
    }

    fn ids(&self) -> Vec<&str> {
        self.item_ids.iter().map(String::as_str).collect()
    }
}

/// Result of fusion training, including the stacked high-level inputs.
#[derive(Debug, Clone)]
pub struct FusionTrace {
    pub model: FusionModel,
    /// Out-of-fold low-level probabilities per source, after refinement.
    pub low_blocks: Vec<Array2<f64>>,
    pub stacked: Array2<f64>,
}

fn source_matrix(source: &FeatureMatrix, ids: &[&str]) -> Result<Array2<f64>> {
    Ok(source.select(ids)?.to_array::<f64>())
}

fn out_of_fold(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    folds: &[usize],
    n_folds: usize,
    n_classes: usize,
    name: &str,
    options: &TrainOptions,
) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((x.nrows(), n_classes));
    for fold in 0..n_folds {
        let (train, held): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| folds[i] != fold);
        if held.is_empty() {
            continue;
        }
        let fold_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let model = train_multiclass(x.select(Axis(0), &train).view(), &fold_labels, n_classes, name, options)?;
        let probs = predict_proba(&model, x.select(Axis(0), &held).view())?;
        for (row, &i) in held.iter().enumerate() {
            out.row_mut(i).assign(&probs.row(row));
        }
    }
    Ok(out)
}

fn concat_blocks(blocks: &[Array2<f64>]) -> Array2<f64> {
    let views: Vec<ArrayView2<'_, f64>> = blocks.iter().map(|b| b.view()).collect();
    concatenate(Axis(1), &views).expect("blocks share row count")
}

fn require_models<'a>(
    placement: Placement,
    models: Option<&'a [TemporalModel]>,
    n_classes: usize,
) -> Result<&'a [TemporalModel]> {
    match models {
        Some(models) => {
            check_coverage(models, n_classes)?;
            Ok(models)
        }
        None if placement.needs_models() => Err(Error::MissingModel(0)),
        None => Ok(&[]),
    }
}

pub fn train_fusion_with_trace(
    sources: &[FeatureMatrix],
    training: &TrainingSet,
    n_classes: usize,
    models: Option<&[TemporalModel]>,
    placement: Placement,
    plan: &StackingPlan,
    options: &TrainOptions,
) -> Result<FusionTrace> {
    if sources.is_empty() {
        return Err(Error::AlignmentError("no feature sources given".into()));
    }
    let models = require_models(placement, models, n_classes)?;
    if plan.n_folds < 2 {
        return Err(Error::ConfigError(format!("need at least 2 folds, got {}", plan.n_folds)));
    }
    let mut counts = vec![0usize; n_classes];
    for (i, &l) in training.labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::LabelOutOfRange {
                item: training.item_ids[i].clone(),
                label: l,
                n_classes,
            });
        }
        counts[l] += 1;
    }
    if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &n)| n < plan.n_folds) {
        return Err(Error::TooFewExamples {
            class,
            count,
            required: plan.n_folds,
        });
    }

    let ids = training.ids();
    let low_options = TrainOptions {
        seed: derive_seed(plan.seed, "low"),
        ..*options
    };
    let folds = stratified_folds(&training.labels, plan.n_folds, derive_seed(plan.seed, "folds"));

    let low: Vec<(MultiClassModel, Array2<f64>)> = sources
        .par_iter()
        .map(|source| {
            let x = source_matrix(source, &ids)?;
            let name = source.source_name();
            let model = train_multiclass(x.view(), &training.labels, n_classes, name, &low_options)?;
            let mut block = out_of_fold(
                x.view(),
                &training.labels,
                &folds,
                plan.n_folds,
                n_classes,
                name,
                &low_options,
            )?;
            if placement.refines_low() {
                block = refine_batch(&block, &training.days, models)?;
            }
            Ok((model, block))
        })
        .collect::<Result<_>>()?;
    let (low_models, low_blocks): (Vec<_>, Vec<_>) = low.into_iter().unzip();

    let stacked = concat_blocks(&low_blocks);
    let high_options = TrainOptions {
        seed: derive_seed(plan.seed, "high"),
        ..*options
    };
    let high_model = train_multiclass(stacked.view(), &training.labels, n_classes, "high", &high_options)?;

    let model = FusionModel {
        placement,
        n_classes,
        source_names: sources.iter().map(|s| s.source_name().to_string()).collect(),
        stacking: *plan,
        low_models,
        high_model,
    };
    Ok(FusionTrace {
        model,
        low_blocks,
        stacked,
    })
}

pub fn train_fusion(
    sources: &[FeatureMatrix],
    manifest: &[ItemRecord],
    n_classes: usize,
    models: Option<&[TemporalModel]>,
    placement: Placement,
    plan: &StackingPlan,
    options: &TrainOptions,
) -> Result<FusionModel> {
    let training = TrainingSet::from_manifest(manifest, &[Split::Train]);
    train_fusion_with_trace(sources, &training, n_classes, models, placement, plan, options).map(|t| t.model)
}

/// Final class scores for `item_ids`, refined according to the placement.
pub fn predict_fusion(
    fusion: &FusionModel,
    sources: &[FeatureMatrix],
    item_ids: &[&str],
    days: &[Option<DayIndex>],
    models: Option<&[TemporalModel]>,
) -> Result<Array2<f64>> {
    if sources.len() != fusion.low_models.len() {
        return Err(Error::AlignmentError(format!(
            "fusion model has {} sources, {} given",
            fusion.low_models.len(),
            sources.len()
        )));
    }
    if days.len() != item_ids.len() {
        return Err(Error::DimensionError(format!(
            "{} items but {} days",
            item_ids.len(),
            days.len()
        )));
    }
    for (source, expected) in sources.iter().zip(&fusion.source_names) {
        if source.source_name() != expected {
            return Err(Error::AlignmentError(format!(
                "expected source `{expected}`, got `{}`",
                source.source_name()
            )));
        }
    }
    let models = require_models(fusion.placement, models, fusion.n_classes)?;
    let blocks: Vec<Array2<f64>> = sources
        .par_iter()
        .zip(&fusion.low_models)
        .map(|(source, low)| {
            let x = source_matrix(source, item_ids)?;
            let probs = predict_proba(low, x.view())?;
            if fusion.placement.refines_low() {
                refine_batch(&probs, days, models)
            } else {
                Ok(probs)
            }
        })
        .collect::<Result<_>>()?;
    let stacked = concat_blocks(&blocks);
    let out = predict_proba(&fusion.high_model, stacked.view())?;
    if fusion.placement.refines_high() {
        refine_batch(&out, days, models)
    } else {
        Ok(out)
    }
}
