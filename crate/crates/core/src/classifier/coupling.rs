//! Pairwise coupling of one-vs-one probabilities into one class distribution.
//!
//! Minimizes `sum_{a != b} (r_ba p_a - r_ab p_b)^2` subject to `sum p = 1`
//! using the fixed-point iteration of the second Wu-Lin-Weng method.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const COUPLING_TOLERANCE: f64 = 1e-10;
const CONSISTENCY_TOLERANCE: f64 = 1e-6;

/// `r[[a, b]]` is the probability of class `a` given that the item is either
/// `a` or `b`. The diagonal is ignored.
pub fn couple_pairwise<T: Real>(r: &Array2<T>) -> Result<Vec<T>> {
    let k = r.nrows();
    if r.ncols() != k {
        return Err(Error::DimensionError(format!(
            "pairwise matrix must be square, got {}x{}",
            k,
            r.ncols()
        )));
    }
    if k == 0 {
        return Err(Error::DimensionError("pairwise matrix is empty".into()));
    }
    let consistency = T::lit(CONSISTENCY_TOLERANCE);
    for a in 0..k {
        for b in a + 1..k {
            let (ab, ba) = (r[[a, b]], r[[b, a]]);
            let in_range = |v: T| v >= T::zero() && v <= T::one();
            if !in_range(ab) || !in_range(ba) || (ab + ba - T::one()).abs() > consistency {
                return Err(Error::BadPairwise { a, b });
            }
        }
    }
    if k == 1 {
        return Ok(vec![T::one()]);
    }

    let mut q = Array2::<T>::zeros((k, k));
    for t in 0..k {
        for j in 0..k {
            if j == t {
                continue;
            }
            q[[t, t]] += r[[j, t]] * r[[j, t]];
            q[[t, j]] = -r[[j, t]] * r[[t, j]];
        }
    }

    let kt = T::lit(k as f64);
    let mut p = vec![T::one() / kt; k];
    let mut qp = vec![T::zero(); k];
    let tolerance = T::lit(COUPLING_TOLERANCE);
    let max_iterations = 1000 * k.max(100);

    for _ in 0..max_iterations {
        let mut pqp = T::zero();
        for t in 0..k {
            qp[t] = (0..k).fold(T::zero(), |acc, j| acc + q[[t, j]] * p[j]);
            pqp += p[t] * qp[t];
        }
        let residual = qp
            .iter()
            .fold(T::zero(), |acc, &v| acc.max((v - pqp).abs()));
        if residual < tolerance {
            break;
        }
        for t in 0..k {
            if q[[t, t]] <= T::zero() {
                continue;
            }
            let diff = (-qp[t] + pqp) / q[[t, t]];
            p[t] += diff;
            let denom = T::one() + diff;
            pqp = (pqp + diff * (diff * q[[t, t]] + T::lit(2.0) * qp[t])) / (denom * denom);
            for j in 0..k {
                qp[j] = (qp[j] + diff * q[[t, j]]) / denom;
                p[j] /= denom;
            }
        }
    }

    // Remove rounding drift so the result is a distribution.
    for v in &mut p {
        *v = v.max(T::zero());
    }
    let total = p.iter().fold(T::zero(), |acc, &v| acc + v);
    for v in &mut p {
        *v /= total;
    }
    Ok(p)
}
