use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { k: 3, restarts: 20, max_iter: 300 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub wcss: f64,
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.0 {
            best = (d, c);
        }
    }
    best.1
}

pub fn wcss(points: &[Vec<f64>], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points.iter().zip(assignments).map(|(p, &c)| sq_dist(p, &centroids[c])).sum()
}

fn distinct_count(points: &[Vec<f64>], at_least: usize) -> usize {
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !distinct.iter().any(|d| *d == p) {
            distinct.push(p);
            if distinct.len() >= at_least {
                break;
            }
        }
    }
    distinct.len()
}

/// Lloyd's algorithm with k-means++ seeding; the restart with the lowest
/// within-cluster sum of squares wins.
pub fn kmeans(points: &[Vec<f64>], config: &KMeansConfig, seed: u64) -> Result<KMeansResult> {
    let k = config.k;
    if k == 0 || distinct_count(points, k) < k {
        return Err(Error::DegenerateData(format!("k-means needs at least {k} distinct points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..config.restarts.max(1) {
        let centroids = plus_plus_seeds(points, k, &mut rng);
        let run = lloyd(points, centroids, config.max_iter);
        if best.as_ref().map_or(true, |b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

fn plus_plus_seeds(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            while d2[chosen] == 0.0 {
                chosen -= 1;
            }
            chosen
        } else {
            rng.gen_range(0..points.len())
        };
        let c = points[pick].clone();
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> KMeansResult {
    let k = centroids.len();
    let dim = points[0].len();
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    for _ in 0..max_iter {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // Re-seed an emptied cluster at the point farthest from its centroid.
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = sq_dist(&points[a], &centroids[assignments[a]]);
                        let db = sq_dist(&points[b], &centroids[assignments[b]]);
                        da.total_cmp(&db)
                    })
                    .unwrap();
                centroids[c] = points[far].clone();
                assignments[far] = c;
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }
    transfer_refine(points, &mut assignments, &mut centroids, max_iter);
    let wcss = wcss(points, &assignments, &centroids);
    KMeansResult { assignments, centroids, wcss }
}

fn centroid_of(points: &[Vec<f64>], assignments: &[usize], c: usize) -> (Vec<f64>, usize) {
    let mut sum = vec![0.0; points[0].len()];
    let mut count = 0;
    for (p, _) in points.iter().zip(assignments).filter(|(_, &a)| a == c) {
        count += 1;
        for (s, v) in sum.iter_mut().zip(p) {
            *s += v;
        }
    }
    (sum.into_iter().map(|s| s / count.max(1) as f64).collect(), count)
}

/// Single-point transfers (Hartigan): move a point whenever that lowers the
/// total within-cluster sum of squares, counting the centroid shifts. Lloyd
/// fixed points are often not stable under such moves.
fn transfer_refine(points: &[Vec<f64>], assignments: &mut [usize], centroids: &mut [Vec<f64>], max_passes: usize) {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for c in 0..k {
        (centroids[c], counts[c]) = centroid_of(points, assignments, c);
    }
    for _ in 0..max_passes {
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let from = assignments[i];
            if counts[from] < 2 {
                continue;
            }
            let n = counts[from] as f64;
            let removal = n / (n - 1.0) * sq_dist(p, &centroids[from]);
            let mut best = (removal, from);
            for (to, centroid) in centroids.iter().enumerate() {
                if to != from {
                    let m = counts[to] as f64;
                    let addition = m / (m + 1.0) * sq_dist(p, centroid);
                    if addition < best.0 * (1.0 - 1e-12) {
                        best = (addition, to);
                    }
                }
            }
            if best.1 != from {
                let to = best.1;
                assignments[i] = to;
                (centroids[from], counts[from]) = centroid_of(points, assignments, from);
                (centroids[to], counts[to]) = centroid_of(points, assignments, to);
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}
