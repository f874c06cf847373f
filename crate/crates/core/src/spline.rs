//! Cubic smoothing splines in the Reinsch formulation.
//!
//! Given knots `x`, data `y`, weights `w` and a smoothing parameter `p`,
//! the natural cubic spline `f` with knots at `x` minimizing
//!
//! ```text
//! p * sum_j w_j (y_j - f(x_j))^2 + (1 - p) * integral f''(t)^2 dt
//! ```
//!
//! is found by solving the pentadiagonal system
//! `(R + lambda * Q' W^-1 Q) gamma = Q' y` with `lambda = (1 - p) / p` for
//! the interior second derivatives `gamma`, then `g = y - lambda W^-1 Q gamma`
//! for the fitted knot values.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A fitted natural cubic spline stored as one local cubic per interval.
///
/// On interval `i`, `f(x) = a + b t + c t^2 + d t^3` with `t = x - knots[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineFit<T> {
    knots: Vec<T>,
    coefficients: Vec<[T; 4]>,
    smoothing: T,
    second_derivatives: Vec<T>,
}

impl<T: Real> SplineFit<T> {
    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    /// `[a, b, c, d]` per interval, `knots.len() - 1` entries.
    pub fn coefficients(&self) -> &[[T; 4]] {
        &self.coefficients
    }

    pub fn smoothing(&self) -> T {
        self.smoothing
    }

    /// Second derivative at every knot; zero at both ends.
    pub fn second_derivatives(&self) -> &[T] {
        &self.second_derivatives
    }

    /// Spline values at the knots.
    pub fn fitted_values(&self) -> Vec<T> {
        let mut out: Vec<T> = self.coefficients.iter().map(|c| c[0]).collect();
        out.push(self.evaluate(*self.knots.last().expect("at least 3 knots")));
        out
    }

    fn interval(&self, x: T) -> usize {
        let last = self.coefficients.len() - 1;
        self.knots[1..].partition_point(|&k| k < x).min(last)
    }

    /// Evaluates the spline. Outside `[x_1, x_n]` the natural spline is
    /// continued linearly.
    pub fn evaluate(&self, x: T) -> T {
        let first = self.knots[0];
        let last = *self.knots.last().expect("non-empty knots");
        if x < first {
            let [a, b, _, _] = self.coefficients[0];
            return a + b * (x - first);
        }
        if x > last {
            let value = self.evaluate(last);
            return value + self.derivative(last) * (x - last);
        }
        let i = self.interval(x);
        let t = x - self.knots[i];
        let [a, b, c, d] = self.coefficients[i];
        a + t * (b + t * (c + t * d))
    }

    pub fn derivative(&self, x: T) -> T {
        let i = self.interval(x);
        let t = x - self.knots[i];
        let [_, b, c, d] = self.coefficients[i];
        let (two, three) = (T::lit(2.0), T::lit(3.0));
        b + t * (two * c + three * d * t)
    }

    pub fn second_derivative(&self, x: T) -> T {
        if x < self.knots[0] || x > *self.knots.last().expect("non-empty knots") {
            return T::zero();
        }
        let i = self.interval(x);
        let t = x - self.knots[i];
        let [_, _, c, d] = self.coefficients[i];
        T::lit(2.0) * c + T::lit(6.0) * d * t
    }

    /// Exact value of the integrated squared second derivative.
    pub fn roughness(&self) -> T {
        let g = &self.second_derivatives;
        self.knots
            .windows(2)
            .enumerate()
            .map(|(i, k)| {
                let h = k[1] - k[0];
                h * (g[i] * g[i] + g[i] * g[i + 1] + g[i + 1] * g[i + 1]) / T::lit(3.0)
            })
            .fold(T::zero(), |acc, v| acc + v)
    }

    /// The penalized least-squares objective this fit minimizes.
    pub fn objective(&self, y: &[T], w: &[T]) -> T {
        let fitted = self.fitted_values();
        let rss = y
            .iter()
            .zip(w)
            .zip(&fitted)
            .fold(T::zero(), |acc, ((&y, &w), &f)| acc + w * (y - f) * (y - f));
        self.smoothing * rss + (T::one() - self.smoothing) * self.roughness()
    }

    /// Natural cubic interpolant through `(x, y)`.
    pub fn interpolate(x: &[T], y: &[T]) -> Result<Self> {
        let w = vec![T::one(); x.len()];
        fit_smoothing_spline(x, y, &w, T::one())
    }
}

/// Symmetric positive definite matrix with two super-diagonals.
struct Pentadiagonal<T> {
    diag: Vec<T>,
    upper1: Vec<T>,
    upper2: Vec<T>,
}

impl<T: Real> Pentadiagonal<T> {
    fn zeros(n: usize) -> Self {
        Pentadiagonal {
            diag: vec![T::zero(); n],
            upper1: vec![T::zero(); n.saturating_sub(1)],
            upper2: vec![T::zero(); n.saturating_sub(2)],
        }
    }

    fn add(&mut self, i: usize, j: usize, v: T) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        match hi - lo {
            0 => self.diag[lo] += v,
            1 => self.upper1[lo] += v,
            2 => self.upper2[lo] += v,
            _ => unreachable!("outside band"),
        }
    }

    /// Solves `A x = b` by a banded `L D L'` factorization.
    fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.diag.len();
        let mut d = vec![T::zero(); n];
        let mut l1 = vec![T::zero(); n];
        let mut l2 = vec![T::zero(); n];
        for i in 0..n {
            if i >= 2 {
                l2[i] = self.upper2[i - 2] / d[i - 2];
            }
            if i >= 1 {
                let mut v = self.upper1[i - 1];
                if i >= 2 {
                    v -= l2[i] * d[i - 2] * l1[i - 1];
                }
                l1[i] = v / d[i - 1];
            }
            let mut v = self.diag[i];
            if i >= 1 {
                v -= l1[i] * l1[i] * d[i - 1];
            }
            if i >= 2 {
                v -= l2[i] * l2[i] * d[i - 2];
            }
            d[i] = v;
        }
        let mut z = b.to_vec();
        for i in 0..n {
            if i >= 1 {
                let prev = z[i - 1];
                z[i] -= l1[i] * prev;
            }
            if i >= 2 {
                let prev = z[i - 2];
                z[i] -= l2[i] * prev;
            }
        }
        for i in 0..n {
            z[i] /= d[i];
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                let next = z[i + 1];
                z[i] -= l1[i + 1] * next;
            }
            if i + 2 < n {
                let next = z[i + 2];
                z[i] -= l2[i + 2] * next;
            }
        }
        z
    }
}

/// Fits a cubic smoothing spline with knots at `x`.
pub fn fit_smoothing_spline<T: Real>(x: &[T], y: &[T], w: &[T], p: T) -> Result<SplineFit<T>> {
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewKnots(n));
    }
    if y.len() != n || w.len() != n {
        return Err(Error::DimensionError(format!(
            "{n} knots but {} values and {} weights",
            y.len(),
            w.len()
        )));
    }
    if let Some(i) = x.windows(2).position(|k| !(k[1] > k[0])) {
        return Err(Error::BadKnots(i + 1));
    }
    if !(p > T::zero() && p <= T::one()) {
        return Err(Error::BadSmoothing(p.to_f64_lossy()));
    }
    if let Some(bad) = w.iter().find(|&&v| !(v > T::zero()) || !v.is_finite()) {
        return Err(Error::BadWeights(format!("weight {bad:?} is not positive")));
    }

    let h: Vec<T> = x.windows(2).map(|k| k[1] - k[0]).collect();
    let lambda = (T::one() - p) / p;
    let m = n - 2;
    let (three, six) = (T::lit(3.0), T::lit(6.0));

    // Column j of Q (interior knot j + 1) is nonzero in rows j, j + 1, j + 2.
    let q_entry = |row: usize, col: usize| -> T {
        let k = col + 1;
        if row + 1 == k {
            T::one() / h[k - 1]
        } else if row == k {
            -T::one() / h[k - 1] - T::one() / h[k]
        } else if row == k + 1 {
            T::one() / h[k]
        } else {
            T::zero()
        }
    };

    let mut system = Pentadiagonal::zeros(m);
    for j in 0..m {
        system.add(j, j, (h[j] + h[j + 1]) / three);
        if j + 1 < m {
            system.add(j, j + 1, h[j + 1] / six);
        }
    }
    if lambda > T::zero() {
        for row in 0..n {
            let cols_lo = row.saturating_sub(2);
            let cols_hi = row.min(m - 1);
            for a in cols_lo..=cols_hi {
                for b in a..=cols_hi {
                    let v = lambda * q_entry(row, a) * q_entry(row, b) / w[row];
                    system.add(a, b, v);
                }
            }
        }
    }

    let rhs: Vec<T> = (0..m)
        .map(|j| (y[j + 2] - y[j + 1]) / h[j + 1] - (y[j + 1] - y[j]) / h[j])
        .collect();
    let interior = system.solve(&rhs);

    let mut gamma = vec![T::zero(); n];
    gamma[1..n - 1].copy_from_slice(&interior);

    let g: Vec<T> = if lambda > T::zero() {
        (0..n)
            .map(|row| {
                let cols_lo = row.saturating_sub(2);
                let cols_hi = row.min(m - 1);
                let q_gamma = (cols_lo..=cols_hi)
                    .fold(T::zero(), |acc, col| acc + q_entry(row, col) * interior[col]);
                y[row] - lambda * q_gamma / w[row]
            })
            .collect()
    } else {
        y.to_vec()
    };

    let two = T::lit(2.0);
    let coefficients = (0..n - 1)
        .map(|i| {
            let hi = h[i];
            let slope = (g[i + 1] - g[i]) / hi;
            [
                g[i],
                slope - hi * (two * gamma[i] + gamma[i + 1]) / six,
                gamma[i] / two,
                (gamma[i + 1] - gamma[i]) / (six * hi),
            ]
        })
        .collect();

    Ok(SplineFit {
        knots: x.to_vec(),
        coefficients,
        smoothing: p,
        second_derivatives: gamma,
    })
}
