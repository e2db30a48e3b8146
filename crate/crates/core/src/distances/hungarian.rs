use crate::error::{Error, Result};

/// Longest vector fed to the assignment solver; longer inputs are block-averaged.
pub const HUNGARIAN_MAX_LEN: usize = 256;
pub(crate) const CHI2_EPS: f64 = 1e-10;

/// Minimum-cost perfect assignment on a square cost matrix given row-major.
/// Returns `(total cost, column assigned to each row)`.
///
/// Shortest augmenting path with row/column potentials (the O(n³)
/// Kuhn-Munkres formulation).
pub fn solve_assignment(cost: &[f64], n: usize) -> (f64, Vec<usize>) {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return (0.0, Vec::new());
    }
    // 1-based internally; column 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|f| *f = false);
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of_col[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    (total, assignment)
}

/// Averages consecutive blocks so that the result has at most `max_len` entries.
pub fn block_average(x: &[f64], max_len: usize) -> Vec<f64> {
    if x.len() <= max_len {
        return x.to_vec();
    }
    (0..max_len)
        .map(|b| {
            let (lo, hi) = (b * x.len() / max_len, (b + 1) * x.len() / max_len);
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Symmetric chi-squared between two scalars. Magnitudes in the denominator
/// keep it non-negative for signed (DCT) inputs.
#[inline]
pub(crate) fn chi2_term(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d == 0.0 {
        0.0
    } else {
        d * d / (a.abs() + b.abs() + CHI2_EPS)
    }
}

/// Optimal assignment cost between the elements of `a` and `b` under the
/// element-wise chi-squared cost.
///
/// The cost has non-positive mixed differences (a Monge array once both
/// sides are sorted), so pairing the sorted sequences is an optimal
/// assignment and the cubic solver is not needed. `solve_assignment` on the
/// full cost matrix gives the same value.
pub fn hungarian_chi2(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let mut a = block_average(a, HUNGARIAN_MAX_LEN);
    let mut b = block_average(b, HUNGARIAN_MAX_LEN);
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(&x, &y)| chi2_term(x, y)).sum())
}

/// Same value as [`hungarian_chi2`], through the general assignment solver.
pub fn hungarian_chi2_dense(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let a = block_average(a, HUNGARIAN_MAX_LEN);
    let b = block_average(b, HUNGARIAN_MAX_LEN);
    let n = a.len();
    let mut cost = Vec::with_capacity(n * n);
    for &x in &a {
        cost.extend(b.iter().map(|&y| chi2_term(x, y)));
    }
    Ok(solve_assignment(&cost, n).0.max(0.0))
}
