//! Asymmetric temporal re-weighting of classifier probabilities.
//!
//! For each class, `d = P - s` and `w = max(d, 0) + 1`; the refined value is
//! `P / w`. A temporal score at least as large as the classifier probability
//! leaves the probability untouched, a smaller one penalizes it in proportion
//! to the disagreement. Rows are not renormalized.

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::DayIndex;
use crate::scalar::Scalar;
use crate::temporal_model::{check_coverage, TemporalModel};

/// Per-class weights `max(P - s, 0) + 1`, each at least one.
pub fn refinement_weights<T: Scalar>(probs: &[T], scores: &[T]) -> Result<Vec<T>> {
    if probs.len() != scores.len() {
        return Err(Error::DimensionError(format!(
            "{} probabilities but {} temporal scores",
            probs.len(),
            scores.len()
        )));
    }
    if let Some(&bad) = scores
        .iter()
        .find(|&&s| !(s >= T::zero() && s <= T::one()))
    {
        return Err(Error::BadScore(bad.to_f64_lossy()));
    }
    Ok(probs
        .iter()
        .zip(scores)
        .map(|(&p, &s)| (p - s).max_of(T::zero()) + T::one())
        .collect())
}

pub fn refine<T: Scalar>(probs: &[T], scores: &[T]) -> Result<Vec<T>> {
    let weights = refinement_weights(probs, scores)?;
    Ok(probs
        .iter()
        .zip(weights)
        .map(|(&p, w)| p / w)
        .collect())
}

/// Refines every row that has a capture day; rows without one pass through.
pub fn refine_batch(
    probs: &Array2<f64>,
    days: &[Option<DayIndex>],
    models: &[TemporalModel],
) -> Result<Array2<f64>> {
    if probs.nrows() != days.len() {
        return Err(Error::DimensionError(format!(
            "{} probability rows but {} days",
            probs.nrows(),
            days.len()
        )));
    }
    let n_classes = probs.ncols();
    if days.iter().any(Option::is_some) {
        check_coverage(models, n_classes)?;
    }
    let mut out = probs.clone();
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(days.par_iter())
        .try_for_each(|(mut row, day)| -> Result<()> {
            if let Some(day) = day {
                let scores: Vec<f64> = models[..n_classes].iter().map(|m| m.score(*day)).collect();
                let refined = refine(row.as_slice().expect("contiguous row"), &scores)?;
                row.assign(&ndarray::ArrayView1::from(&refined));
            }
            Ok(())
        })?;
    Ok(out)
}
