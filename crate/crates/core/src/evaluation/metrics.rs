use std::cmp::Ordering;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How average precision is summarized from a ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApConvention {
    /// Mean of precision@k over the ranks of relevant items.
    #[default]
    Step,
    /// Mean of the interpolated precision at recall 0, 0.1, ..., 1.
    Interp11,
}

impl std::str::FromStr for ApConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step" => Ok(ApConvention::Step),
            "interp11" => Ok(ApConvention::Interp11),
            other => Err(Error::ConfigError(format!(
                "unknown AP convention `{other}` (expected `step` or `interp11`)"
            ))),
        }
    }
}

/// Precision/recall at every rank holding a relevant item.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve<T> {
    pub points: Vec<(T, T)>,
}

impl<T: Scalar> PrCurve<T> {
    /// Mean precision over the points: the step-sum average precision.
    pub fn average_precision(&self) -> T {
        let sum = self.points.iter().fold(T::zero(), |acc, &(_, p)| acc + p);
        sum / T::from_usize(self.points.len()).expect("count representable")
    }

    pub fn interpolated_11_point(&self) -> T {
        let mut total = T::zero();
        for step in 0..=10 {
            let level = T::from_usize(step).expect("small int") / T::from_usize(10).expect("small int");
            let best = self
                .points
                .iter()
                .filter(|(recall, _)| *recall >= level)
                .fold(T::zero(), |acc, &(_, p)| acc.max_of(p));
            total += best;
        }
        total / T::from_usize(11).expect("small int")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("recall,precision\n");
        for (r, p) in &self.points {
            out.push_str(&format!("{},{}\n", r.to_f64_lossy(), p.to_f64_lossy()));
        }
        out
    }
}

/// Item indices sorted by descending score; ties keep ascending index order.
pub fn rank_order<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    order
}

pub fn pr_curve<T: Scalar>(scores: &[T], relevance: &[bool]) -> Result<PrCurve<T>> {
    if scores.len() != relevance.len() {
        return Err(Error::DimensionError(format!(
            "{} scores but {} relevance flags",
            scores.len(),
            relevance.len()
        )));
    }
    let n_relevant = relevance.iter().filter(|&&r| r).count();
    if n_relevant == 0 {
        return Err(Error::NoPositives(0));
    }
    let total = T::from_usize(n_relevant).expect("count representable");
    let mut hits = 0usize;
    let mut points = Vec::with_capacity(n_relevant);
    for (rank, &item) in rank_order(scores).iter().enumerate() {
        if relevance[item] {
            hits += 1;
            let h = T::from_usize(hits).expect("count representable");
            let k = T::from_usize(rank + 1).expect("count representable");
            points.push((h / total, h / k));
        }
    }
    Ok(PrCurve { points })
}

pub fn average_precision<T: Scalar>(scores: &[T], relevance: &[bool]) -> Result<T> {
    Ok(pr_curve(scores, relevance)?.average_precision())
}

pub fn average_precision_with<T: Scalar>(
    scores: &[T],
    relevance: &[bool],
    convention: ApConvention,
) -> Result<T> {
    let curve = pr_curve(scores, relevance)?;
    Ok(match convention {
        ApConvention::Step => curve.average_precision(),
        ApConvention::Interp11 => curve.interpolated_11_point(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class: usize,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub map: f64,
    pub per_class: Vec<ClassAp>,
    pub n_items: usize,
    pub n_classes: usize,
    pub convention: ApConvention,
}

impl EvalReport {
    pub fn per_class_ap(&self) -> Vec<f64> {
        self.per_class.iter().map(|c| c.ap).collect()
    }
}

fn relevance_for(labels: &[usize], class: usize) -> Vec<bool> {
    labels.iter().map(|&l| l == class).collect()
}

/// Per-class AP over the columns of `probs` and their mean.
pub fn evaluate(probs: &Array2<f64>, labels: &[usize], convention: ApConvention) -> Result<EvalReport> {
    if probs.nrows() != labels.len() {
        return Err(Error::DimensionError(format!(
            "{} probability rows but {} labels",
            probs.nrows(),
            labels.len()
        )));
    }
    let n_classes = probs.ncols();
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::DimensionError(format!(
            "label {bad} outside {n_classes} probability columns"
        )));
    }
    let per_class = (0..n_classes)
        .into_par_iter()
        .map(|class| {
            let column = probs.column(class).to_vec();
            average_precision_with(&column, &relevance_for(labels, class), convention)
                .map(|ap| ClassAp { class, ap })
                .map_err(|e| match e {
                    Error::NoPositives(_) => Error::NoPositives(class),
                    other => other,
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let map = per_class.iter().map(|c| c.ap).sum::<f64>() / n_classes as f64;
    Ok(EvalReport {
        map,
        per_class,
        n_items: labels.len(),
        n_classes,
        convention,
    })
}

/// Precision/recall curves of every class.
pub fn class_curves(probs: &Array2<f64>, labels: &[usize]) -> Result<Vec<PrCurve<f64>>> {
    (0..probs.ncols())
        .map(|class| {
            pr_curve(&probs.column(class).to_vec(), &relevance_for(labels, class))
                .map_err(|_| Error::NoPositives(class))
        })
        .collect()
}
