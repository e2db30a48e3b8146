//! Polar and Cartesian grid descriptors.

use std::f64::consts::TAU;

use crate::imaging::BinaryImage;

const WEDGES: usize = 9;
const RINGS: usize = 7;
const GRID: usize = 8;
const PROFILE_BINS: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct PolarFeatures {
    /// Radial extent of the ink in each sector, relative to the largest
    /// centroid-to-ink distance.
    pub radii: Vec<f64>,
    /// Angular extent (radians) of the ink in each sector.
    pub angles: Vec<f64>,
    pub counts: Vec<f64>,
    /// Set when the ink is a single point or collinear; radii are then zero.
    pub degenerate: bool,
}

/// 63 sectors = 9 angular wedges × 7 rings around the ink centroid, ring
/// radii scaled by the largest centroid-to-ink distance. Sector index is
/// `wedge * 7 + ring`.
pub fn extract_polar(img: &BinaryImage) -> PolarFeatures {
    let n = WEDGES * RINGS;
    let pixels: Vec<(f64, f64)> = img.ink_pixels().map(|(x, y)| (x as f64, y as f64)).collect();
    let mut counts = vec![0.0; n];
    if pixels.is_empty() {
        return PolarFeatures { radii: vec![0.0; n], angles: vec![0.0; n], counts, degenerate: true };
    }
    let m = pixels.len() as f64;
    let cx = pixels.iter().map(|p| p.0).sum::<f64>() / m;
    let cy = pixels.iter().map(|p| p.1).sum::<f64>() / m;

    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    let polar: Vec<(f64, f64)> = pixels
        .iter()
        .map(|&(x, y)| {
            let (dx, dy) = (x - cx, y - cy);
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
            (dx.hypot(dy), dy.atan2(dx).rem_euclid(TAU))
        })
        .collect();
    let rmax = polar.iter().map(|p| p.0).fold(0.0, f64::max);
    let trace = sxx + syy;
    let degenerate = rmax == 0.0 || (sxx * syy - sxy * sxy).abs() <= 1e-12 * trace * trace;

    let mut r_lo = vec![f64::INFINITY; n];
    let mut r_hi = vec![f64::NEG_INFINITY; n];
    let mut a_lo = vec![f64::INFINITY; n];
    let mut a_hi = vec![f64::NEG_INFINITY; n];
    for &(r, theta) in &polar {
        let ring = if rmax > 0.0 { ((RINGS as f64 * r / rmax) as usize).min(RINGS - 1) } else { 0 };
        let wedge = ((WEDGES as f64 * theta / TAU) as usize).min(WEDGES - 1);
        let s = wedge * RINGS + ring;
        counts[s] += 1.0;
        r_lo[s] = r_lo[s].min(r);
        r_hi[s] = r_hi[s].max(r);
        a_lo[s] = a_lo[s].min(theta);
        a_hi[s] = a_hi[s].max(theta);
    }

    // Each pixel spans half a pixel either side of its centre, clipped to
    // the ring it falls in.
    let ring_width = rmax / RINGS as f64;
    let radii = (0..n)
        .map(|s| {
            if counts[s] == 0.0 || degenerate {
                return 0.0;
            }
            let ring = (s % RINGS) as f64;
            let hi = (r_hi[s] + 0.5).min((ring + 1.0) * ring_width);
            let lo = (r_lo[s] - 0.5).max(ring * ring_width);
            (hi - lo).max(0.0) / rmax
        })
        .collect();
    let angles = (0..n).map(|s| if counts[s] > 0.0 { a_hi[s] - a_lo[s] } else { 0.0 }).collect();
    PolarFeatures { radii, angles, counts, degenerate }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CartesianFeatures {
    /// Per column: distance from the horizontal centre line to the farthest
    /// ink pixel, in units of half the height, resampled to 64 bins.
    pub env_h: Vec<f64>,
    /// Per row: distance from the vertical centre line to the farthest ink
    /// pixel, in units of half the width, resampled to 64 bins.
    pub env_v: Vec<f64>,
    /// Ink/background transitions inside each cell of an 8×8 grid, row-major.
    pub transitions: Vec<f64>,
}

pub fn extract_cartesian(img: &BinaryImage) -> CartesianFeatures {
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let half_w = (w as f64 / 2.0).max(0.5);
    let half_h = (h as f64 / 2.0).max(0.5);

    let mut col_env = vec![0.0; w];
    let mut row_env = vec![0.0; h];
    for (x, y) in img.ink_pixels() {
        col_env[x] = f64::max(col_env[x], ((y as f64 - cy).abs() + 0.5) / half_h);
        row_env[y] = f64::max(row_env[y], ((x as f64 - cx).abs() + 0.5) / half_w);
    }

    CartesianFeatures {
        env_h: resample(&col_env, PROFILE_BINS),
        env_v: resample(&row_env, PROFILE_BINS),
        transitions: cell_transitions(img),
    }
}

/// Averages a profile into `bins` equal spans; spans narrower than one
/// sample take the nearest sample.
fn resample(profile: &[f64], bins: usize) -> Vec<f64> {
    let len = profile.len();
    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for (i, &v) in profile.iter().enumerate() {
        let b = i * bins / len;
        sums[b] += v;
        counts[b] += 1;
    }
    (0..bins)
        .map(|b| {
            if counts[b] > 0 {
                sums[b] / counts[b] as f64
            } else {
                profile[((2 * b + 1) * len / (2 * bins)).min(len - 1)]
            }
        })
        .collect()
}

/// Cell `(row, col)` spans `[col*W/8, (col+1)*W/8)` × `[row*H/8, (row+1)*H/8)`.
/// Transitions are counted between 4-adjacent pixels inside the same cell,
/// along rows and along columns.
fn cell_transitions(img: &BinaryImage) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut out = vec![0.0; GRID * GRID];
    for row in 0..GRID {
        let (y0, y1) = (row * h / GRID, (row + 1) * h / GRID);
        for col in 0..GRID {
            let (x0, x1) = (col * w / GRID, (col + 1) * w / GRID);
            let mut t = 0usize;
            for y in y0..y1 {
                for x in x0..x1 {
                    if x + 1 < x1 && img.get(x, y) != img.get(x + 1, y) {
                        t += 1;
                    }
                    if y + 1 < y1 && img.get(x, y) != img.get(x, y + 1) {
                        t += 1;
                    }
                }
            }
            out[row * GRID + col] = t as f64;
        }
    }
    out
}
