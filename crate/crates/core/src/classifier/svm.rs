//! L2-regularized hinge-loss linear SVM trained by dual coordinate descent.
//!
//! The bias is learned by appending a constant feature equal to one, so the
//! primal objective is `0.5 * (|w|^2 + b^2) + C * sum_i max(0, 1 - y_i f(x_i))`
//! and the dual is a box-constrained QP over `0 <= alpha_i <= C`.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmOptions {
    pub cost: f64,
    /// Stop once the largest projected-gradient magnitude of an epoch falls
    /// below this value.
    pub tolerance: f64,
    pub max_epochs: usize,
    /// Seed of the per-epoch coordinate permutation.
    pub seed: u64,
}

impl Default for SvmOptions {
    fn default() -> Self {
        SvmOptions {
            cost: 1.0,
            tolerance: 1e-4,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub cost: T,
}

impl<T: Real> BinarySvm<T> {
    pub fn decision_value(&self, x: &[T]) -> T {
        dot(&self.weights, x) + self.bias
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.len()
    }

    /// Primal objective on a training set.
    pub fn primal_objective(&self, x: ArrayView2<'_, T>, y: &[i8]) -> T {
        let half = T::lit(0.5);
        let norm = dot(&self.weights, &self.weights) + self.bias * self.bias;
        let hinge = x
            .rows()
            .into_iter()
            .zip(y)
            .map(|(row, &label)| {
                let margin = sign::<T>(label)
                    * self.decision_value(row.as_slice().expect("standard layout"));
                (T::one() - margin).max(T::zero())
            })
            .fold(T::zero(), |acc, v| acc + v);
        half * norm + self.cost * hinge
    }
}

/// Result of a dual solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmSolution<T> {
    pub model: BinarySvm<T>,
    pub alpha: Vec<T>,
    pub epochs: usize,
    pub max_violation: T,
    pub converged: bool,
}

impl<T: Real> SvmSolution<T> {
    /// Dual objective `sum(alpha) - 0.5 * |w~|^2`, to be maximized.
    pub fn dual_objective(&self) -> T {
        let m = &self.model;
        let norm = dot(&m.weights, &m.weights) + m.bias * m.bias;
        self.alpha.iter().fold(T::zero(), |acc, &a| acc + a) - T::lit(0.5) * norm
    }

    pub fn duality_gap(&self, x: ArrayView2<'_, T>, y: &[i8]) -> T {
        self.model.primal_objective(x, y) - self.dual_objective()
    }
}

#[inline]
fn sign<T: Real>(label: i8) -> T {
    if label > 0 {
        T::one()
    } else {
        -T::one()
    }
}

fn check_labels(n_rows: usize, y: &[i8]) -> Result<()> {
    if y.len() != n_rows {
        return Err(Error::DimensionError(format!(
            "{n_rows} rows but {} labels",
            y.len()
        )));
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1 && v != -1) {
        return Err(Error::DimensionError(format!("label {bad} is not +1 or -1")));
    }
    if !(y.contains(&1) && y.contains(&-1)) {
        return Err(Error::DegenerateLabels);
    }
    Ok(())
}

/// Solves the dual and keeps the multipliers alongside the model.
pub fn solve_binary_svm<T: Real>(
    x: ArrayView2<'_, T>,
    y: &[i8],
    options: &SvmOptions,
) -> Result<SvmSolution<T>> {
    check_labels(x.nrows(), y)?;
    if !(options.cost > 0.0) || !options.cost.is_finite() {
        return Err(Error::ConfigError(format!("cost must be positive, got {}", options.cost)));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DimensionError("training matrix has non-finite entries".into()));
    }
    let x = x.as_standard_layout();
    let n = x.nrows();
    let dim = x.ncols();
    let cost = T::lit(options.cost);
    let tolerance = T::lit(options.tolerance);

    let rows: Vec<&[T]> = x
        .rows()
        .into_iter()
        .map(|r| r.to_slice().expect("standard layout"))
        .collect();
    let diag: Vec<T> = rows.iter().map(|r| dot(r, r) + T::one()).collect();
    let y_t: Vec<T> = y.iter().map(|&v| sign::<T>(v)).collect();

    let mut alpha = vec![T::zero(); n];
    let mut w = vec![T::zero(); dim];
    let mut b = T::zero();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let mut epochs = 0;
    let mut max_violation = T::infinity();
    let mut converged = false;
    while epochs < options.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        max_violation = T::zero();
        for &i in &order {
            let gradient = y_t[i] * (dot(&w, rows[i]) + b) - T::one();
            let a = alpha[i];
            let projected = if a <= T::zero() {
                gradient.min(T::zero())
            } else if a >= cost {
                gradient.max(T::zero())
            } else {
                gradient
            };
            max_violation = max_violation.max(projected.abs());
            if projected != T::zero() {
                let updated = (a - gradient / diag[i]).max(T::zero()).min(cost);
                let delta = (updated - a) * y_t[i];
                if delta != T::zero() {
                    for (wj, &xj) in w.iter_mut().zip(rows[i]) {
                        *wj += delta * xj;
                    }
                    b += delta;
                }
                alpha[i] = updated;
            }
        }
        if max_violation < tolerance {
            converged = true;
            break;
        }
    }

    Ok(SvmSolution {
        model: BinarySvm {
            weights: w,
            bias: b,
            cost,
        },
        alpha,
        epochs,
        max_violation,
        converged,
    })
}

pub fn train_binary_svm<T: Real>(
    x: ArrayView2<'_, T>,
    y: &[i8],
    options: &SvmOptions,
) -> Result<BinarySvm<T>> {
    solve_binary_svm(x, y, options).map(|s| s.model)
}

pub fn decision_values<T: Real>(model: &BinarySvm<T>, x: ArrayView2<'_, T>) -> Result<Vec<T>> {
    if x.ncols() != model.feature_dim() {
        return Err(Error::DimensionError(format!(
            "model expects {} features, input has {}",
            model.feature_dim(),
            x.ncols()
        )));
    }
    Ok(x
        .rows()
        .into_iter()
        .map(|row| dot(&model.weights, &row.to_vec()) + model.bias)
        .collect())
}
