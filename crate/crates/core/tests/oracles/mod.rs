//! Independent reference implementations used to check the library.
//!
//! Nothing in here calls into the crate under test; each oracle solves its
//! problem the slow, obvious way with dense linear algebra.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Fitted knot values of the penalized least-squares spline problem,
/// solved over a truncated-power basis with dense linear algebra.
///
/// The natural cubic splines with knots `x` are
/// `f(t) = c0 + c1 t + sum_j theta_j (t - x_j)_+^3` with `sum theta_j = 0`
/// and `sum theta_j x_j = 0`. The roughness `integral f''^2` is discretized
/// by the trapezoid rule on a `grid_points` grid merged with the knots,
/// and the constrained quadratic program is solved through its KKT system.
pub fn smoothing_spline_values(x: &[f64], y: &[f64], w: &[f64], p: f64, grid_points: usize) -> Vec<f64> {
    let n = x.len();
    let m = n + 2;

    // Values at the knots: row i holds the basis functions at x_i.
    let design = DMatrix::from_fn(n, m, |i, k| match k {
        0 => 1.0,
        1 => x[i],
        _ => (x[i] - x[k - 2]).max(0.0).powi(3),
    });

    let (lo, hi) = (x[0], x[n - 1]);
    let mut grid: Vec<f64> = (0..grid_points)
        .map(|g| lo + (hi - lo) * g as f64 / (grid_points - 1) as f64)
        .chain(x.iter().copied())
        .collect();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();

    // Second derivatives of the basis on the grid; the affine part has none.
    let second = |t: f64, k: usize| -> f64 {
        if k < 2 {
            0.0
        } else {
            6.0 * (t - x[k - 2]).max(0.0)
        }
    };
    let mut gram = DMatrix::<f64>::zeros(m, m);
    for pair in grid.windows(2) {
        let h = pair[1] - pair[0];
        let left: Vec<f64> = (0..m).map(|k| second(pair[0], k)).collect();
        let right: Vec<f64> = (0..m).map(|k| second(pair[1], k)).collect();
        for a in 2..m {
            for b in 2..m {
                gram[(a, b)] += 0.5 * h * (left[a] * left[b] + right[a] * right[b]);
            }
        }
    }

    let weights = DMatrix::from_diagonal(&DVector::from_column_slice(w));
    let yv = DVector::from_column_slice(y);
    let hessian = &design.transpose() * &weights * &design * p + &gram * (1.0 - p);
    let rhs = &design.transpose() * &weights * &yv * p;

    let mut constraints = DMatrix::<f64>::zeros(2, m);
    for j in 0..n {
        constraints[(0, j + 2)] = 1.0;
        constraints[(1, j + 2)] = x[j];
    }

    let mut kkt = DMatrix::<f64>::zeros(m + 2, m + 2);
    kkt.view_mut((0, 0), (m, m)).copy_from(&hessian);
    kkt.view_mut((m, 0), (2, m)).copy_from(&constraints);
    kkt.view_mut((0, m), (m, 2)).copy_from(&constraints.transpose());
    let mut full_rhs = DVector::<f64>::zeros(m + 2);
    full_rhs.rows_mut(0, m).copy_from(&rhs);

    let solution = kkt.lu().solve(&full_rhs).expect("KKT system is nonsingular");
    let beta = solution.rows(0, m).into_owned();
    (&design * beta).iter().copied().collect()
}

/// Optimal value of the bias-augmented linear SVM dual
/// `max sum(alpha) - 0.5 alpha' Q alpha` over `0 <= alpha <= cost`, with
/// `Q_ij = y_i y_j (x_i . x_j + 1)`, found by enumerating every assignment
/// of each multiplier to lower bound, upper bound, or free.
pub fn svm_dual_optimum(rows: &[Vec<f64>], y: &[i8], cost: f64) -> f64 {
    let n = rows.len();
    assert!(n <= 12, "exhaustive search is exponential");
    let q = DMatrix::from_fn(n, n, |i, j| {
        let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
        f64::from(y[i]) * f64::from(y[j]) * (dot + 1.0)
    });
    let objective = |alpha: &DVector<f64>| alpha.sum() - 0.5 * (alpha.transpose() * &q * alpha)[(0, 0)];

    let mut best = f64::NEG_INFINITY;
    let mut state = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha = DVector::from_fn(n, |i, _| if state[i] == 1 { cost } else { 0.0 });
        let mut feasible = true;
        if !free.is_empty() {
            let qff = DMatrix::from_fn(free.len(), free.len(), |a, b| q[(free[a], free[b])]);
            let bound_part = &q * &alpha;
            let rhs = DVector::from_fn(free.len(), |a, _| 1.0 - bound_part[free[a]]);
            // Every feasible point bounds the optimum from below, so a
            // poorly conditioned solve can only lose candidates, never
            // overshoot; the vertex-like candidates are well posed.
            let solved = match qff.clone().lu().solve(&rhs) {
                Some(v) => v,
                None => qff.clone().svd(true, true).solve(&rhs, 1e-12).expect("svd solve"),
            };
            let residual = (&qff * &solved - &rhs).amax();
            if residual > 1e-9 {
                feasible = false;
            }
            for (a, &i) in free.iter().enumerate() {
                let v = solved[a];
                if !(-1e-12..=cost + 1e-12).contains(&v) {
                    feasible = false;
                }
                alpha[i] = v.clamp(0.0, cost);
            }
        }
        if feasible {
            best = best.max(objective(&alpha));
        }

        // Next assignment in base 3.
        let mut k = 0;
        while k < n && state[k] == 2 {
            state[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
        state[k] += 1;
    }
    best
}

/// Element-wise temporal re-weighting written directly from its definition.
pub fn refine_scalar(p: f64, s: f64) -> f64 {
    let disagreement = p - s;
    let weight = if disagreement > 0.0 { disagreement + 1.0 } else { 1.0 };
    p / weight
}
