//! Seeded synthetic event-recognition datasets.
//!
//! Each class has one feature mean per source on the unit sphere and a
//! window of days on which its events happen. Items are noisy copies of
//! their class mean and, with probability `timestamp_coverage`, carry a
//! capture date drawn uniformly from the class window.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{DayIndex, FeatureMatrix, ItemRecord, Split, DAYS_IN_YEAR};

/// Days on which a class occurs: `length` consecutive days from `start`,
/// wrapping past Dec 31.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: u16,
    pub length: u16,
}

impl DateWindow {
    pub fn contains(&self, day: DayIndex) -> bool {
        let offset = (i32::from(day.get()) - i32::from(self.start)).rem_euclid(DAYS_IN_YEAR as i32);
        offset < i32::from(self.length)
    }

    fn day_at(&self, offset: u16) -> DayIndex {
        let zero_based = (usize::from(self.start) - 1 + usize::from(offset)) % DAYS_IN_YEAR;
        DayIndex::new(zero_based as u16 + 1).expect("wrapped into year")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_classes: usize,
    pub per_class_train: usize,
    pub per_class_test: usize,
    pub feature_dim: usize,
    pub n_sources: usize,
    pub feature_noise: f64,
    /// One window per class; evenly spaced disjoint windows when empty.
    pub date_windows: Vec<DateWindow>,
    pub timestamp_coverage: f64,
    pub confusable_pairs: Vec<(usize, usize)>,
    /// Non-leap year used for generated dates.
    pub year: i32,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_classes: 10,
            per_class_train: 40,
            per_class_test: 40,
            feature_dim: 16,
            n_sources: 2,
            feature_noise: 0.15,
            date_windows: Vec::new(),
            timestamp_coverage: 1.0,
            confusable_pairs: Vec::new(),
            year: 2015,
        }
    }
}

/// Evenly spaced, pairwise disjoint windows covering part of the year.
pub fn spread_windows(n_classes: usize) -> Vec<DateWindow> {
    let spacing = (DAYS_IN_YEAR / n_classes.max(1)).max(1);
    let length = spacing.saturating_sub(spacing / 3).clamp(1, 21);
    (0..n_classes)
        .map(|c| DateWindow {
            start: (1 + (c * spacing) % DAYS_IN_YEAR) as u16,
            length: length as u16,
        })
        .collect()
}

impl SyntheticConfig {
    pub fn windows(&self) -> Vec<DateWindow> {
        if self.date_windows.is_empty() {
            spread_windows(self.n_classes)
        } else {
            self.date_windows.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::ConfigError(msg));
        if self.n_classes < 2 {
            return fail(format!("need at least 2 classes, got {}", self.n_classes));
        }
        if self.feature_dim == 0 || self.n_sources == 0 {
            return fail("feature_dim and n_sources must be positive".into());
        }
        if self.per_class_train < 2 {
            return fail("per_class_train must be at least 2".into());
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return fail(format!("feature_noise {} must be non-negative", self.feature_noise));
        }
        if !(0.0..=1.0).contains(&self.timestamp_coverage) {
            return fail(format!("timestamp_coverage {} outside [0, 1]", self.timestamp_coverage));
        }
        if chrono::NaiveDate::from_ymd_opt(self.year, 2, 29).is_some() {
            return fail(format!("year {} is a leap year", self.year));
        }
        let windows = self.windows();
        if windows.len() != self.n_classes {
            return fail(format!(
                "{} date windows for {} classes",
                windows.len(),
                self.n_classes
            ));
        }
        for (c, w) in windows.iter().enumerate() {
            if DayIndex::new(w.start).is_none() || w.length == 0 || usize::from(w.length) > DAYS_IN_YEAR {
                return fail(format!("invalid date window for class {c}: {w:?}"));
            }
        }
        for &(a, b) in &self.confusable_pairs {
            if a == b || a >= self.n_classes || b >= self.n_classes {
                return fail(format!("invalid confusable pair ({a}, {b})"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub manifest: Vec<ItemRecord>,
    pub sources: Vec<FeatureMatrix>,
    /// Class of every manifest item, in manifest order.
    pub labels: Vec<usize>,
    pub windows: Vec<DateWindow>,
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn generate_synthetic(config: &SyntheticConfig, seed: u64) -> Result<SyntheticDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let windows = config.windows();
    let dim = config.feature_dim;
    let offset = 0.5 * config.feature_noise * (dim as f64).sqrt();

    let means: Vec<Vec<Vec<f64>>> = (0..config.n_sources)
        .map(|_| {
            let mut class_means: Vec<Vec<f64>> =
                (0..config.n_classes).map(|_| unit_vector(&mut rng, dim)).collect();
            for &(a, b) in &config.confusable_pairs {
                let direction = unit_vector(&mut rng, dim);
                class_means[b] = class_means[a]
                    .iter()
                    .zip(&direction)
                    .map(|(m, d)| m + offset * d)
                    .collect();
            }
            class_means
        })
        .collect();

    let mut manifest = Vec::new();
    let mut labels = Vec::new();
    for (split, per_class) in [(Split::Train, config.per_class_train), (Split::Test, config.per_class_test)] {
        for class in 0..config.n_classes {
            for i in 0..per_class {
                let dated = rng.random_bool(config.timestamp_coverage);
                let window = windows[class];
                let day = window.day_at(rng.random_range(0..window.length));
                manifest.push(ItemRecord {
                    item_id: format!("{split}-{class:03}-{i:04}"),
                    split,
                    label: Some(class),
                    capture_date: dated.then(|| day.to_date(config.year)),
                });
                labels.push(class);
            }
        }
    }

    let noise = Normal::new(0.0, config.feature_noise).map_err(|e| Error::ConfigError(e.to_string()))?;
    let row_ids: Vec<String> = manifest.iter().map(|r| r.item_id.clone()).collect();
    let sources = means
        .iter()
        .enumerate()
        .map(|(s, class_means)| {
            let mut values = Vec::with_capacity(labels.len() * dim);
            for &label in &labels {
                for &m in &class_means[label] {
                    values.push((m + noise.sample(&mut rng)) as f32);
                }
            }
            FeatureMatrix::new(format!("src{s}"), dim, values, row_ids.clone())
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SyntheticDataset {
        manifest,
        sources,
        labels,
        windows,
    })
}
