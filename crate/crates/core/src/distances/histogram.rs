use serde::{Deserialize, Serialize};

use super::hungarian::chi2_term;
use crate::error::{Error, Result};

const JEFFREY_EPS: f64 = 1e-10;
const BHATTACHARYYA_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramKind {
    Intersection,
    Chi2,
    Jeffrey,
    Ks,
    Hellinger,
    Bhattacharyya,
    L1,
    L2,
    CumL1,
    CumL2,
    PairwiseChi2Min,
}

impl HistogramKind {
    pub const ALL: [HistogramKind; 11] = [
        HistogramKind::Intersection,
        HistogramKind::Chi2,
        HistogramKind::Jeffrey,
        HistogramKind::Ks,
        HistogramKind::Hellinger,
        HistogramKind::Bhattacharyya,
        HistogramKind::L1,
        HistogramKind::L2,
        HistogramKind::CumL1,
        HistogramKind::CumL2,
        HistogramKind::PairwiseChi2Min,
    ];

    /// Kinds that compare probability vectors rather than raw values.
    pub fn is_probabilistic(self) -> bool {
        matches!(
            self,
            HistogramKind::Intersection
                | HistogramKind::Jeffrey
                | HistogramKind::Ks
                | HistogramKind::Hellinger
                | HistogramKind::Bhattacharyya
        )
    }
}

/// Shifts by the minimum so every entry is ≥ 0, then scales to unit mass.
/// A constant vector becomes the uniform distribution.
pub fn to_distribution(x: &[f64]) -> Vec<f64> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = x.iter().map(|v| v - lo).collect();
    let total: f64 = shifted.iter().sum();
    if total > 0.0 {
        shifted.into_iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / x.len() as f64; x.len()]
    }
}

fn cumsum(x: &[f64]) -> Vec<f64> {
    x.iter()
        .scan(0.0, |acc, &v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

fn bhattacharyya_coefficient(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum::<f64>().min(1.0)
}

/// Smallest element-wise chi-squared term over all pairs `(a_i, b_j)`.
///
/// For fixed `x` the term decreases in `y` up to `y = x` and increases after
/// it, so only the neighbours of `x` in sorted `b` need checking.
fn pairwise_chi2_min(a: &[f64], b: &[f64]) -> f64 {
    let mut sorted = b.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = f64::INFINITY;
    for &x in a {
        let k = sorted.partition_point(|&y| y < x);
        if k < sorted.len() {
            best = best.min(chi2_term(x, sorted[k]));
        }
        if k > 0 {
            best = best.min(chi2_term(x, sorted[k - 1]));
        }
    }
    best
}

pub fn histogram_distance(kind: HistogramKind, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::EmptyVector);
    }
    let (p, q);
    let (a, b) = if kind.is_probabilistic() {
        p = to_distribution(a);
        q = to_distribution(b);
        (p.as_slice(), q.as_slice())
    } else {
        (a, b)
    };

    let d = match kind {
        HistogramKind::Intersection => 1.0 - a.iter().zip(b).map(|(x, y)| x.min(*y)).sum::<f64>(),
        HistogramKind::Chi2 => a.iter().zip(b).map(|(&x, &y)| chi2_term(x, y)).sum(),
        HistogramKind::Jeffrey => a
            .iter()
            .zip(b)
            .map(|(&x, &y)| {
                let (x, y) = (x + JEFFREY_EPS, y + JEFFREY_EPS);
                let m = (x + y) / 2.0;
                x * (x / m).ln() + y * (y / m).ln()
            })
            .sum(),
        HistogramKind::Ks => cumsum(a)
            .iter()
            .zip(cumsum(b))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max),
        // Same value as sqrt(1 − BC) on unit-mass inputs, without the
        // cancellation that leaves ~1e-8 on identical ones.
        HistogramKind::Hellinger => {
            (0.5 * a.iter().zip(b).map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum::<f64>()).sqrt()
        }
        HistogramKind::Bhattacharyya => (-bhattacharyya_coefficient(a, b).max(BHATTACHARYYA_EPS).ln()).max(0.0),
        HistogramKind::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        HistogramKind::L2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        HistogramKind::CumL1 => cumsum(a).iter().zip(cumsum(b)).map(|(x, y)| (x - y).abs()).sum(),
        HistogramKind::CumL2 => cumsum(a)
            .iter()
            .zip(cumsum(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        HistogramKind::PairwiseChi2Min => pairwise_chi2_min(a, b),
    };
    Ok(d.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_kind_is_zero_on_equal_inputs() {
        let x = [3.0, -1.0, 0.0, 2.5, 7.0];
        for kind in HistogramKind::ALL {
            let d = histogram_distance(kind, &x, &x).unwrap();
            let tol = if kind == HistogramKind::Bhattacharyya { 1e-6 } else { 1e-9 };
            assert!(d.abs() <= tol, "{kind:?}: {d}");
        }
    }

    #[test]
    fn disjoint_point_masses() {
        let (p, q) = ([1.0, 0.0], [0.0, 1.0]);
        assert_eq!(histogram_distance(HistogramKind::Ks, &p, &q).unwrap(), 1.0);
        assert_eq!(histogram_distance(HistogramKind::Hellinger, &p, &q).unwrap(), 1.0);
        assert_eq!(histogram_distance(HistogramKind::Intersection, &p, &q).unwrap(), 1.0);
    }

    #[test]
    fn raw_norms() {
        let (a, b) = ([1.0, 2.0, 3.0], [2.0, 2.0, 1.0]);
        assert_eq!(histogram_distance(HistogramKind::L1, &a, &b).unwrap(), 3.0);
        assert_eq!(histogram_distance(HistogramKind::L2, &a, &b).unwrap(), 5f64.sqrt());
        // cumsums [1,3,6] vs [2,4,5]
        assert_eq!(histogram_distance(HistogramKind::CumL1, &a, &b).unwrap(), 3.0);
        assert_eq!(histogram_distance(HistogramKind::CumL2, &a, &b).unwrap(), 3f64.sqrt());
    }

    #[test]
    fn pairwise_min_matches_exhaustive_search() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 5, 30, 200] {
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let brute = a.iter().flat_map(|&x| b.iter().map(move |&y| chi2_term(x, y))).fold(f64::INFINITY, f64::min);
            assert_eq!(pairwise_chi2_min(&a, &b), brute, "n={n}");
        }
    }

    #[test]
    fn pairwise_min_finds_closest_elements() {
        let d = histogram_distance(HistogramKind::PairwiseChi2Min, &[1.0, 10.0], &[4.0, 9.0]).unwrap();
        assert!((d - 1.0 / 19.0).abs() < 1e-9);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            histogram_distance(HistogramKind::L1, &[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn constant_vector_becomes_uniform() {
        assert_eq!(to_distribution(&[4.0, 4.0]), vec![0.5, 0.5]);
    }
}
