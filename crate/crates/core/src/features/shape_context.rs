use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::imaging::BinaryImage;

const ANGLE_BINS: usize = 12;
const RADIUS_BINS: usize = 5;
const NATIVE_DIM: usize = ANGLE_BINS * RADIUS_BINS;
const R_INNER: f64 = 0.125;
const R_OUTER: f64 = 2.0;
const MIN_EDGE_POINTS: usize = 6;

#[derive(Clone, Copy, Debug)]
pub struct ShapeContextConfig {
    pub points: usize,
    pub dim: usize,
}

/// Edge pixels: ink with at least one background 8-neighbour (outside the
/// image counts as background), in raster order.
pub fn edge_points(img: &BinaryImage) -> Vec<(f64, f64)> {
    img.ink_pixels()
        .filter(|&(x, y)| img.ink_neighbours(x, y) < 8)
        .map(|(x, y)| (x as f64, y as f64))
        .collect()
}

/// Aggregated log-polar shape context of the signature edge.
///
/// `points` reference points are taken at evenly spaced ranks of the
/// raster-ordered edge. Each point's 12×5 histogram of the other sampled
/// points is accumulated, with radii scaled by the mean pairwise distance and
/// log-spaced bin edges between 1/8 and 2 (closer points go to the first
/// ring, farther ones to the last). The sum is normalized to unit mass.
/// Index is `radius_bin * 12 + angle_bin`; outputs longer than 60 are
/// zero-padded.
pub fn extract_shape_context(img: &BinaryImage, config: &ShapeContextConfig) -> Result<Vec<f64>> {
    let edge = edge_points(img);
    if edge.len() < MIN_EDGE_POINTS {
        return Err(Error::TooFewEdgePoints(edge.len()));
    }
    let sampled: Vec<(f64, f64)> = if edge.len() <= config.points {
        edge
    } else {
        (0..config.points).map(|i| edge[i * edge.len() / config.points]).collect()
    };
    let mut hist = log_polar_histogram(&sampled);
    let total: f64 = hist.iter().sum();
    if total > 0.0 {
        hist.iter_mut().for_each(|v| *v /= total);
    }
    hist.resize(config.dim.max(NATIVE_DIM), 0.0);
    hist.truncate(config.dim);
    Ok(hist)
}

/// Unnormalized 60-bin sum of per-point log-polar histograms.
pub fn log_polar_histogram(points: &[(f64, f64)]) -> Vec<f64> {
    let n = points.len();
    let mut hist = vec![0.0; NATIVE_DIM];
    if n < 2 {
        return hist;
    }
    let mut dist_sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            dist_sum += (points[i].0 - points[j].0).hypot(points[i].1 - points[j].1);
        }
    }
    let mean = dist_sum / (n * (n - 1) / 2) as f64;
    if mean == 0.0 {
        return hist;
    }
    let log_inner = R_INNER.ln();
    let log_step = (R_OUTER.ln() - log_inner) / RADIUS_BINS as f64;
    for (i, &(xi, yi)) in points.iter().enumerate() {
        for (j, &(xj, yj)) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let (dx, dy) = (xj - xi, yj - yi);
            let r = dx.hypot(dy) / mean;
            let r_bin = if r <= R_INNER {
                0
            } else {
                (((r.ln() - log_inner) / log_step) as usize).min(RADIUS_BINS - 1)
            };
            let theta = dy.atan2(dx).rem_euclid(TAU);
            let a_bin = ((theta / TAU * ANGLE_BINS as f64) as usize).min(ANGLE_BINS - 1);
            hist[r_bin * ANGLE_BINS + a_bin] += 1.0;
        }
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_is_flat_across_angles() {
        let pts: Vec<(f64, f64)> = (0..240)
            .map(|i| {
                let t = i as f64 / 240.0 * TAU + 0.01;
                (100.0 * t.cos(), 100.0 * t.sin())
            })
            .collect();
        let hist = log_polar_histogram(&pts);
        let per_angle: Vec<f64> =
            (0..ANGLE_BINS).map(|a| (0..RADIUS_BINS).map(|r| hist[r * ANGLE_BINS + a]).sum()).collect();
        let mean = per_angle.iter().sum::<f64>() / ANGLE_BINS as f64;
        for v in per_angle {
            assert!((v - mean).abs() / mean < 0.10, "{v} vs {mean}");
        }
    }

    #[test]
    fn two_points_are_scale_invariant() {
        // Mean pairwise distance equals the only distance, so r = 1 lands in
        // ring floor((ln 1 - ln 1/8) / (ln 16 / 5)) = floor(3.75) = 3. The
        // pair is horizontal: angles 0 and π give bins 0 and 6.
        let a = log_polar_histogram(&[(0.0, 0.0), (3.0, 0.0)]);
        let b = log_polar_histogram(&[(0.0, 0.0), (6.0, 0.0)]);
        let mut expected = vec![0.0; 60];
        expected[3 * 12] = 1.0;
        expected[3 * 12 + 6] = 1.0;
        assert_eq!(a, expected);
        assert_eq!(b, expected);
    }

    #[test]
    fn normalized_and_padded() {
        let img = BinaryImage::from_fn(30, 20, |x, y| (x as i32 - 15).pow(2) + (y as i32 - 10).pow(2) < 64);
        let v = extract_shape_context(&img, &ShapeContextConfig { points: 200, dim: 60 }).unwrap();
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let p = extract_shape_context(&img, &ShapeContextConfig { points: 200, dim: 256 }).unwrap();
        assert_eq!(p.len(), 256);
        assert_eq!(&p[..60], &v[..]);
        assert!(p[60..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn tiny_edge_is_rejected() {
        let img = BinaryImage::from_fn(2, 2, |_, _| true);
        assert!(matches!(
            extract_shape_context(&img, &ShapeContextConfig { points: 200, dim: 60 }),
            Err(Error::TooFewEdgePoints(4))
        ));
    }
}
