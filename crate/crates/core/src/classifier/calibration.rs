//! Sigmoid calibration of decision values (Platt scaling).
//!
//! Fits `p(f) = 1 / (1 + exp(A f + B))` by Newton's method with a
//! backtracking line search on the cross-entropy against smoothed targets
//! `t+ = (N+ + 1) / (N+ + 2)` and `t- = 1 / (N- + 2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_ITERATIONS: usize = 100;
const MIN_STEP: f64 = 1e-10;
const HESSIAN_RIDGE: f64 = 1e-12;
const GRADIENT_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidCalibrator<T> {
    #[serde(rename = "A")]
    pub a: T,
    #[serde(rename = "B")]
    pub b: T,
}

impl<T: Real> SigmoidCalibrator<T> {
    /// Probability of the positive class for decision value `f`.
    pub fn probability(&self, f: T) -> T {
        let z = self.a * f + self.b;
        if z >= T::zero() {
            let e = (-z).exp();
            e / (T::one() + e)
        } else {
            T::one() / (T::one() + z.exp())
        }
    }
}

/// Cross-entropy of the sigmoid against the targets, computed without
/// overflow for large `|A f + B|`.
fn cross_entropy<T: Real>(f: &[T], targets: &[T], a: T, b: T) -> T {
    f.iter()
        .zip(targets)
        .map(|(&fi, &t)| {
            let z = fi * a + b;
            if z >= T::zero() {
                t * z + (T::one() + (-z).exp()).ln()
            } else {
                (t - T::one()) * z + (T::one() + z.exp()).ln()
            }
        })
        .fold(T::zero(), |acc, v| acc + v)
}

pub fn fit_sigmoid<T: Real>(f: &[T], y: &[i8]) -> Result<SigmoidCalibrator<T>> {
    if f.len() != y.len() {
        return Err(Error::DimensionError(format!(
            "{} decision values but {} labels",
            f.len(),
            y.len()
        )));
    }
    let positives = y.iter().filter(|&&v| v > 0).count();
    let negatives = y.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels);
    }
    let (n_pos, n_neg) = (T::lit(positives as f64), T::lit(negatives as f64));
    let hi = (n_pos + T::one()) / (n_pos + T::lit(2.0));
    let lo = T::one() / (n_neg + T::lit(2.0));
    let targets: Vec<T> = y.iter().map(|&v| if v > 0 { hi } else { lo }).collect();

    // Without spread in f only the intercept is identifiable.
    if f.iter().all(|&v| v == f[0]) {
        let mean = targets.iter().fold(T::zero(), |acc, &t| acc + t) / T::lit(f.len() as f64);
        return Ok(SigmoidCalibrator {
            a: T::zero(),
            b: ((T::one() - mean) / mean).ln(),
        });
    }

    let ridge = T::lit(HESSIAN_RIDGE);
    let tolerance = T::lit(GRADIENT_TOLERANCE);
    let min_step = T::lit(MIN_STEP);
    let mut a = T::zero();
    let mut b = ((n_neg + T::one()) / (n_pos + T::one())).ln();
    let mut value = cross_entropy(f, &targets, a, b);

    for _ in 0..MAX_ITERATIONS {
        let (mut h11, mut h22, mut h21) = (ridge, ridge, T::zero());
        let (mut g1, mut g2) = (T::zero(), T::zero());
        for (&fi, &t) in f.iter().zip(&targets) {
            let z = fi * a + b;
            let (p, q) = if z >= T::zero() {
                let e = (-z).exp();
                (e / (T::one() + e), T::one() / (T::one() + e))
            } else {
                let e = z.exp();
                (T::one() / (T::one() + e), e / (T::one() + e))
            };
            let d2 = p * q;
            h11 += fi * fi * d2;
            h22 += d2;
            h21 += fi * d2;
            let d1 = t - p;
            g1 += fi * d1;
            g2 += d1;
        }
        if g1.abs() < tolerance && g2.abs() < tolerance {
            return Ok(SigmoidCalibrator { a, b });
        }

        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let slope = g1 * da + g2 * db;

        let mut step = T::one();
        loop {
            let (na, nb) = (a + step * da, b + step * db);
            let candidate = cross_entropy(f, &targets, na, nb);
            if candidate < value + T::lit(1e-4) * step * slope {
                a = na;
                b = nb;
                value = candidate;
                break;
            }
            step = step / T::lit(2.0);
            if step < min_step {
                // Line search exhausted floating-point progress; the current
                // point is as good as this precision allows.
                return Ok(SigmoidCalibrator { a, b });
            }
        }
    }
    Err(Error::CalibrationFailure(MAX_ITERATIONS))
}
