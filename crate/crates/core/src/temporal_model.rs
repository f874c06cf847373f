//! Per-class temporal occurrence models over the day of the year.
//!
//! Capture days are binned into a 365-day histogram, padded circularly so
//! the fit does not see an artificial boundary at New Year, smoothed with a
//! cubic smoothing spline and peak-normalized into scores in `[0, 1]`.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{DayIndex, ItemRecord, Split, DAYS_IN_YEAR};
use crate::spline::fit_smoothing_spline;

/// Count of capture days per day of the year.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayHistogram {
    counts: Vec<u32>,
}

impl DayHistogram {
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn count(&self, day: DayIndex) -> u32 {
        self.counts[day.index()]
    }
}

pub fn build_histogram(days: &[DayIndex]) -> DayHistogram {
    let mut counts = vec![0u32; DAYS_IN_YEAR];
    for day in days {
        counts[day.index()] += 1;
    }
    DayHistogram { counts }
}

/// Smoothing heuristic `1 / (1 + h^3 / 6)` for daily bins (`h = 1`).
pub const DEFAULT_SMOOTHING: f64 = 6.0 / 7.0;
pub const DEFAULT_PAD: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalConfig {
    pub smoothing: f64,
    pub pad: usize,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        TemporalConfig {
            smoothing: DEFAULT_SMOOTHING,
            pad: DEFAULT_PAD,
        }
    }
}

/// Peak-normalized day-of-year scores for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTemporalModel")]
pub struct TemporalModel {
    class_id: usize,
    n_samples: usize,
    scores: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTemporalModel {
    class_id: usize,
    n_samples: usize,
    scores: Vec<f64>,
}

impl TryFrom<RawTemporalModel> for TemporalModel {
    type Error = Error;

    fn try_from(raw: RawTemporalModel) -> Result<Self> {
        TemporalModel::from_scores(raw.class_id, raw.n_samples, raw.scores)
    }
}

impl TemporalModel {
    pub fn from_scores(class_id: usize, n_samples: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != DAYS_IN_YEAR {
            return Err(Error::DimensionError(format!(
                "temporal model for class {class_id} has {} scores, expected {DAYS_IN_YEAR}",
                scores.len()
            )));
        }
        if let Some(&bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::BadScore(bad));
        }
        Ok(TemporalModel {
            class_id,
            n_samples,
            scores,
        })
    }

    /// A model that never contradicts the classifier: every day scores 1.
    pub fn uninformative(class_id: usize) -> Self {
        TemporalModel {
            class_id,
            n_samples: 0,
            scores: vec![1.0; DAYS_IN_YEAR],
        }
    }

    pub fn class_id(&self) -> usize {
        self.class_id
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn score(&self, day: DayIndex) -> f64 {
        self.scores[day.index()]
    }

    /// Day with the highest score, earliest on ties.
    pub fn peak_day(&self) -> DayIndex {
        let mut best = 0;
        for (i, &s) in self.scores.iter().enumerate() {
            if s > self.scores[best] {
                best = i;
            }
        }
        DayIndex::new(best as u16 + 1).expect("index within year")
    }
}

pub fn score(model: &TemporalModel, day: DayIndex) -> f64 {
    model.score(day)
}

/// Scores of every class for one day; `models[c]` must be class `c`.
pub fn score_vector(models: &[TemporalModel], n_classes: usize, day: DayIndex) -> Result<Vec<f64>> {
    check_coverage(models, n_classes)?;
    Ok(models[..n_classes].iter().map(|m| m.score(day)).collect())
}

/// Checks that `models[c]` exists and describes class `c` for all classes.
pub fn check_coverage(models: &[TemporalModel], n_classes: usize) -> Result<()> {
    for c in 0..n_classes {
        match models.get(c) {
            Some(m) if m.class_id == c => {}
            _ => return Err(Error::MissingModel(c)),
        }
    }
    Ok(())
}

/// Fits the temporal model of one class from its capture days.
pub fn fit_temporal_model(
    class_id: usize,
    days: &[DayIndex],
    config: &TemporalConfig,
) -> Result<TemporalModel> {
    if days.is_empty() {
        return Err(Error::NoTimestamps);
    }
    if !(config.smoothing > 0.0 && config.smoothing <= 1.0) {
        return Err(Error::BadSmoothing(config.smoothing));
    }
    if config.pad > DAYS_IN_YEAR {
        return Err(Error::ConfigError(format!(
            "pad {} exceeds one year",
            config.pad
        )));
    }
    let histogram = build_histogram(days);
    let counts = histogram.counts();
    let pad = config.pad as i64;
    let year = DAYS_IN_YEAR as i64;

    let x: Vec<f64> = (1 - pad..=year + pad).map(|d| d as f64).collect();
    let y: Vec<f64> = (1 - pad..=year + pad)
        .map(|d| f64::from(counts[(d - 1).rem_euclid(year) as usize]))
        .collect();
    let w = vec![1.0; x.len()];
    let fit = fit_smoothing_spline(&x, &y, &w, config.smoothing)?;

    let fitted = fit.fitted_values();
    let mut scores: Vec<f64> = fitted[config.pad..config.pad + DAYS_IN_YEAR]
        .iter()
        .map(|&v| v.max(0.0))
        .collect();
    let peak = scores.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        for s in &mut scores {
            *s /= peak;
        }
    } else {
        let max_count = f64::from(*counts.iter().max().expect("non-empty histogram"));
        scores = counts.iter().map(|&c| f64::from(c) / max_count).collect();
    }

    Ok(TemporalModel {
        class_id,
        n_samples: days.len(),
        scores,
    })
}

/// Fits one model per class from the labeled, dated items of the given splits.
///
/// Classes without any dated item get an [`TemporalModel::uninformative`]
/// model so refinement leaves them untouched.
pub fn fit_class_models(
    records: &[ItemRecord],
    n_classes: usize,
    splits: &[Split],
    config: &TemporalConfig,
) -> Result<Vec<TemporalModel>> {
    let mut per_class: Vec<Vec<DayIndex>> = vec![Vec::new(); n_classes];
    for record in records.iter().filter(|r| splits.contains(&r.split)) {
        if let (Some(label), Some(day)) = (record.label, record.day()) {
            let slot = per_class.get_mut(label).ok_or(Error::LabelOutOfRange {
                item: record.item_id.clone(),
                label,
                n_classes,
            })?;
            slot.push(day);
        }
    }
    per_class
        .par_iter()
        .enumerate()
        .map(|(class, days)| {
            if days.is_empty() {
                Ok(TemporalModel::uninformative(class))
            } else {
                fit_temporal_model(class, days, config)
            }
        })
        .collect()
}

pub fn models_to_json(models: &[TemporalModel]) -> String {
    serde_json::to_string_pretty(models).expect("temporal models serialize")
}

pub fn models_from_json(text: &str) -> Result<Vec<TemporalModel>> {
    let mut models: Vec<TemporalModel> = serde_json::from_str(text)?;
    models.sort_by_key(|m| m.class_id);
    Ok(models)
}

pub fn read_models(path: impl AsRef<Path>) -> Result<Vec<TemporalModel>> {
    models_from_json(&fs::read_to_string(path)?)
}
