use crate::error::{Error, Result};

type Cell = (f64, u32);

#[inline(always)]
fn cheaper(x: f64, y: f64) -> f64 {
    if y < x {
        y
    } else {
        x
    }
}

/// Cheapest predecessor, then the shortest among equally cheap ones, plus
/// the local cost. Plain compares and bit masks keep this free of
/// data-dependent branches, which random inputs mispredict. `left` comes
/// last because it is the only input on the serial chain of a row.
#[inline(always)]
fn step(up: Cell, diag: Cell, left: Cell, local: f64) -> Cell {
    let cost = cheaper(cheaper(up.0, diag.0), left.0);
    let len_if_cheapest = |c: Cell| c.1 | u32::from(c.0 != cost).wrapping_neg();
    let len = len_if_cheapest(up).min(len_if_cheapest(diag)).min(len_if_cheapest(left));
    (cost + local, len + 1)
}

/// Optimal accumulated cost and step count of the cost-optimal warping path.
/// Among equal-cost paths the shortest one is reported.
pub fn dtw_with_length(a: &[f64], b: &[f64]) -> Result<(f64, usize)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyVector);
    }
    let m = b.len();
    // (cost, path length) per cell of the last finished row.
    let mut prev: Vec<Cell> = Vec::with_capacity(m);
    let (mut acc, mut len) = (0.0, 0u32);
    for &bj in b {
        acc += (a[0] - bj).abs();
        len += 1;
        prev.push((acc, len));
    }
    let mut cur = prev.clone();
    let mut rows = a[1..].chunks_exact(2);
    // Two rows per sweep: cell j of the upper row and cell j − 1 of the
    // lower row are independent, so their chains overlap. The upper row is
    // only ever needed through three carried cells.
    for pair in &mut rows {
        let (x, y) = (pair[0], pair[1]);
        let mut upper = (prev[0].0 + (x - b[0]).abs(), prev[0].1 + 1);
        let mut upper_before = upper;
        let mut lower = (upper.0 + (y - b[0]).abs(), upper.1 + 1);
        cur[0] = lower;
        if m > 1 {
            upper = step(prev[1], prev[0], upper, (x - b[1]).abs());
        }
        for j in 2..m {
            let next_upper = step(prev[j], prev[j - 1], upper, (x - b[j]).abs());
            lower = step(upper, upper_before, lower, (y - b[j - 1]).abs());
            cur[j - 1] = lower;
            upper_before = upper;
            upper = next_upper;
        }
        if m > 1 {
            cur[m - 1] = step(upper, upper_before, lower, (y - b[m - 1]).abs());
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    if let [x] = *rows.remainder() {
        let mut left = (prev[0].0 + (x - b[0]).abs(), prev[0].1 + 1);
        cur[0] = left;
        for j in 1..m {
            left = step(prev[j], prev[j - 1], left, (x - b[j]).abs());
            cur[j] = left;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (cost, len) = prev[m - 1];
    Ok((cost, len as usize))
}

/// Dynamic time warping with absolute-difference local cost, unconstrained.
pub fn dtw(a: &[f64], b: &[f64]) -> Result<f64> {
    dtw_with_length(a, b).map(|(cost, _)| cost)
}

/// DTW cost divided by the number of cells on the optimal path.
pub fn dtw_normalized(a: &[f64], b: &[f64]) -> Result<f64> {
    dtw_with_length(a, b).map(|(cost, len)| cost / len as f64)
}
