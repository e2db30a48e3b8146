//! Signature complexity: eight bounding-box measurements, k-means grouping
//! into three levels, the consistency/spread/correlation criteria used to
//! pick a feature subset, and routing of signature pairs by level.

mod kmeans;

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use kmeans::{kmeans, wcss, KMeansConfig, KMeansResult};

use crate::binfmt::{RecordReader, RecordWriter};
use crate::error::{Error, Result};
use crate::imaging::{connected_components, BinaryImage};

pub const COMPLEXITY_FEATURES: usize = 8;
pub const SUBSET_COUNT: usize = (1 << COMPLEXITY_FEATURES) - 1;
/// F1, F6 and F8.
pub const DEFAULT_SUBSET: [usize; 3] = [1, 6, 8];

const MODEL_MAGIC: &[u8; 4] = b"SVCX";
const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityFeatures {
    pub f1_x_size: f64,
    pub f2_y_size: f64,
    pub f3_pixel_percent: f64,
    pub f4_hole_percent: f64,
    pub f5_components: f64,
    pub f6_median_col_pixels: f64,
    pub f7_percent_col_empty: f64,
    pub f8_median_row_pixels: f64,
}

impl ComplexityFeatures {
    pub fn as_array(&self) -> [f64; COMPLEXITY_FEATURES] {
        [
            self.f1_x_size,
            self.f2_y_size,
            self.f3_pixel_percent,
            self.f4_hole_percent,
            self.f5_components,
            self.f6_median_col_pixels,
            self.f7_percent_col_empty,
            self.f8_median_row_pixels,
        ]
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Background pixels not reachable from the border through 4-connected background.
fn enclosed_background(img: &BinaryImage) -> usize {
    let (w, h) = (img.width(), img.height());
    let mut reached = vec![false; w * h];
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            if border && !img.get(x, y) {
                reached[y * w + x] = true;
                stack.push((x, y));
            }
        }
    }
    while let Some((x, y)) = stack.pop() {
        let mut visit = |nx: usize, ny: usize| {
            let i = ny * w + nx;
            if !reached[i] && !img.get(nx, ny) {
                reached[i] = true;
                stack.push((nx, ny));
            }
        };
        if x > 0 {
            visit(x - 1, y);
        }
        if x + 1 < w {
            visit(x + 1, y);
        }
        if y > 0 {
            visit(x, y - 1);
        }
        if y + 1 < h {
            visit(x, y + 1);
        }
    }
    (0..w * h).filter(|&i| !img.as_slice()[i] && !reached[i]).count()
}

/// Measurements on a tightly cropped binary signature.
pub fn complexity_features(img: &BinaryImage) -> ComplexityFeatures {
    let (w, h) = (img.width(), img.height());
    let area = (w * h) as f64;
    let mut cols = vec![0.0; w];
    let mut rows = vec![0.0; h];
    for (x, y) in img.ink_pixels() {
        cols[x] += 1.0;
        rows[y] += 1.0;
    }
    let ink: f64 = cols.iter().sum();
    let empty_cols = cols.iter().filter(|&&c| c == 0.0).count() as f64;
    ComplexityFeatures {
        f1_x_size: w as f64,
        f2_y_size: h as f64,
        f3_pixel_percent: 100.0 * ink / area,
        f4_hole_percent: 100.0 * enclosed_background(img) as f64 / area,
        f5_components: connected_components(img).count as f64,
        f6_median_col_pixels: median(&mut cols),
        f7_percent_col_empty: 100.0 * empty_cols / w as f64,
        f8_median_row_pixels: median(&mut rows),
    }
}

/// Per-column mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZScoreStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ZScoreStats {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
        Self { mean, std }
    }

    /// Columns with zero spread; they map to 0.
    pub fn degenerate(&self) -> Vec<bool> {
        self.std.iter().map(|&s| s == 0.0).collect()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

/// Fractional ranks (1-based), ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson correlation of average ranks);
/// 0 when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Writers whose signatures all fall in one cluster.
pub fn consistency_metric<W: PartialEq>(assignments: &[usize], writer_ids: &[W]) -> usize {
    let mut writers: Vec<(&W, usize, bool)> = Vec::new();
    for (w, &a) in writer_ids.iter().zip(assignments) {
        match writers.iter_mut().find(|(id, ..)| *id == w) {
            Some(entry) => entry.2 &= entry.1 == a,
            None => writers.push((w, a, true)),
        }
    }
    writers.iter().filter(|(.., ok)| *ok).count()
}

/// `N − largest cluster size`: 0 when everything lands in one cluster,
/// `N − N/k` for a perfectly even split.
pub fn spread_metric(assignments: &[usize]) -> f64 {
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    (assignments.len() - sizes.into_iter().max().unwrap_or(0)) as f64
}

/// Mean over the raw feature columns of |Spearman ρ| against the group level.
pub fn correlation_metric(groups: &[usize], raw_rows: &[Vec<f64>]) -> f64 {
    let dim = raw_rows.first().map_or(0, Vec::len);
    if dim == 0 {
        return 0.0;
    }
    let g: Vec<f64> = groups.iter().map(|&v| v as f64).collect();
    (0..dim)
        .map(|c| {
            let col: Vec<f64> = raw_rows.iter().map(|r| r[c]).collect();
            spearman(&g, &col).abs()
        })
        .sum::<f64>()
        / dim as f64
}

/// Group level (1-based) of each cluster: clusters sorted by the sum of their
/// centroid coordinates, i.e. from low to high standardized feature values.
pub fn group_order(centroids: &[Vec<f64>]) -> Vec<usize> {
    let key = |c: &Vec<f64>| (c.iter().sum::<f64>(), c.iter().map(|v| v * v).sum::<f64>());
    let mut order: Vec<usize> = (0..centroids.len()).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (key(&centroids[a]), key(&centroids[b]));
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(a.cmp(&b))
    });
    let mut level = vec![0; centroids.len()];
    for (rank, &c) in order.iter().enumerate() {
        level[c] = rank + 1;
    }
    level
}

/// Metrics of one feature subset's clustering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    /// 1-based feature numbers, ascending.
    pub features: Vec<usize>,
    pub consistency: usize,
    pub spread: f64,
    pub correlation: f64,
    pub rank_consistency: usize,
    pub rank_spread: usize,
    pub rank_correlation: usize,
    pub rank_sum: usize,
    /// Position in the final ordering, 1 = best.
    pub rank_of_ranks: usize,
}

impl SubsetScore {
    pub fn label(&self) -> String {
        self.features.iter().map(|f| format!("F{f}")).collect::<Vec<_>>().join("+")
    }
}

fn subset_features(mask: usize) -> Vec<usize> {
    (0..COMPLEXITY_FEATURES).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).collect()
}

fn select(row: &[f64], features: &[usize]) -> Vec<f64> {
    features.iter().map(|&f| row[f - 1]).collect()
}

/// Clusters one subset and scores it. A subset with fewer than three distinct
/// standardized points is scored as a single cluster.
fn score_subset(
    rows: &[[f64; COMPLEXITY_FEATURES]],
    writer_ids: &[String],
    features: Vec<usize>,
    config: &KMeansConfig,
    seed: u64,
) -> SubsetScore {
    let raw: Vec<Vec<f64>> = rows.iter().map(|r| select(r, &features)).collect();
    let z = ZScoreStats::fit(&raw).apply_all(&raw);
    let (assignments, groups) = match kmeans(&z, config, seed) {
        Ok(km) => {
            let level = group_order(&km.centroids);
            let groups = km.assignments.iter().map(|&a| level[a]).collect();
            (km.assignments, groups)
        }
        Err(_) => (vec![0; rows.len()], vec![1; rows.len()]),
    };
    SubsetScore {
        consistency: consistency_metric(&assignments, writer_ids),
        spread: spread_metric(&assignments),
        correlation: correlation_metric(&groups, &raw),
        features,
        rank_consistency: 0,
        rank_spread: 0,
        rank_correlation: 0,
        rank_sum: 0,
        rank_of_ranks: 0,
    }
}

/// Competition ranks where larger values are better (1 = best, ties share
/// the smallest rank).
fn descending_ranks(values: &[f64]) -> Vec<usize> {
    values.iter().map(|v| 1 + values.iter().filter(|&&o| o > *v).count()).collect()
}

/// Scores all 255 non-empty subsets of the eight features and orders them by
/// rank of summed per-metric ranks. Ties go to the smaller subset, then to
/// the lexicographically smaller feature list.
pub fn rank_subsets(
    rows: &[[f64; COMPLEXITY_FEATURES]],
    writer_ids: &[String],
    config: &KMeansConfig,
    seed: u64,
) -> Result<Vec<SubsetScore>> {
    if rows.len() != writer_ids.len() {
        return Err(Error::InsufficientData("feature rows and writer ids differ in length".into()));
    }
    if rows.len() < config.k {
        return Err(Error::DegenerateData(format!("need at least {} signatures", config.k)));
    }
    let mut scores: Vec<SubsetScore> = (1..=SUBSET_COUNT)
        .into_par_iter()
        .map(|mask| score_subset(rows, writer_ids, subset_features(mask), config, seed))
        .collect();

    let cons: Vec<f64> = scores.iter().map(|s| s.consistency as f64).collect();
    let spread: Vec<f64> = scores.iter().map(|s| s.spread).collect();
    let corr: Vec<f64> = scores.iter().map(|s| s.correlation).collect();
    let (rc, rs, rr) = (descending_ranks(&cons), descending_ranks(&spread), descending_ranks(&corr));
    for (i, s) in scores.iter_mut().enumerate() {
        s.rank_consistency = rc[i];
        s.rank_spread = rs[i];
        s.rank_correlation = rr[i];
        s.rank_sum = rc[i] + rs[i] + rr[i];
    }
    scores.sort_by(|a, b| {
        a.rank_sum
            .cmp(&b.rank_sum)
            .then(a.features.len().cmp(&b.features.len()))
            .then(a.features.cmp(&b.features))
    });
    for (i, s) in scores.iter_mut().enumerate() {
        s.rank_of_ranks = i + 1;
    }
    Ok(scores)
}

/// Complexity level pair of two signatures, unordered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairClass {
    C11,
    C22,
    C33,
    C12,
    C13,
    C23,
}

impl PairClass {
    pub const ALL: [PairClass; 6] =
        [PairClass::C11, PairClass::C22, PairClass::C33, PairClass::C12, PairClass::C13, PairClass::C23];

    pub fn from_levels(a: u8, b: u8) -> PairClass {
        match (a.min(b), a.max(b)) {
            (1, 1) => PairClass::C11,
            (2, 2) => PairClass::C22,
            (3, 3) => PairClass::C33,
            (1, 2) => PairClass::C12,
            (1, 3) => PairClass::C13,
            (2, 3) => PairClass::C23,
            other => panic!("complexity levels must be 1..=3, got {other:?}"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PairClass::C11 => "C11",
            PairClass::C22 => "C22",
            PairClass::C33 => "C33",
            PairClass::C12 => "C12",
            PairClass::C13 => "C13",
            PairClass::C23 => "C23",
        }
    }
}

impl fmt::Display for PairClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn pair_class(a: u8, b: u8) -> PairClass {
    PairClass::from_levels(a, b)
}

/// Fitted three-level complexity grouping.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexityModel {
    /// 1-based feature numbers.
    pub feature_indices: Vec<usize>,
    pub znorm: ZScoreStats,
    pub centroids: Vec<Vec<f64>>,
    /// Level (1..=3) of each centroid.
    pub group_order: Vec<usize>,
}

impl ComplexityModel {
    pub fn fit(
        rows: &[[f64; COMPLEXITY_FEATURES]],
        feature_indices: &[usize],
        config: &KMeansConfig,
        seed: u64,
    ) -> Result<Self> {
        if feature_indices.is_empty() || feature_indices.iter().any(|&f| f == 0 || f > COMPLEXITY_FEATURES) {
            return Err(Error::Config(format!("invalid complexity subset {feature_indices:?}")));
        }
        let raw: Vec<Vec<f64>> = rows.iter().map(|r| select(r, feature_indices)).collect();
        let znorm = ZScoreStats::fit(&raw);
        let km = kmeans(&znorm.apply_all(&raw), config, seed)?;
        let group_order = group_order(&km.centroids);
        Ok(Self { feature_indices: feature_indices.to_vec(), znorm, centroids: km.centroids, group_order })
    }

    /// Level of an already standardized subset vector.
    pub fn assign_normalized(&self, z: &[f64]) -> u8 {
        self.group_order[kmeans::nearest(z, &self.centroids)] as u8
    }

    pub fn assign(&self, features: &ComplexityFeatures) -> u8 {
        let row = select(&features.as_array(), &self.feature_indices);
        self.assign_normalized(&self.znorm.apply(&row))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = RecordWriter::new(MODEL_MAGIC, MODEL_VERSION);
        let idx: Vec<f64> = self.feature_indices.iter().map(|&f| f as f64).collect();
        w.put_f64s(&idx).put_f64s(&self.znorm.mean).put_f64s(&self.znorm.std);
        w.put_u64(self.centroids.len() as u64);
        for c in &self.centroids {
            w.put_f64s(c);
        }
        let order: Vec<f64> = self.group_order.iter().map(|&g| g as f64).collect();
        w.put_f64s(&order);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = RecordReader::new(bytes, MODEL_MAGIC)?;
        if r.version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported complexity model version {}", r.version)));
        }
        let feature_indices = r.get_f64s()?.into_iter().map(|f| f as usize).collect();
        let mean = r.get_f64s()?;
        let std = r.get_f64s()?;
        let k = r.get_u64()? as usize;
        let centroids = (0..k).map(|_| r.get_f64s()).collect::<Result<Vec<_>>>()?;
        let group_order: Vec<usize> = r.get_f64s()?.into_iter().map(|g| g as usize).collect();
        r.finish()?;
        let mut sorted = group_order.clone();
        sorted.sort_unstable();
        if sorted != (1..=k).collect::<Vec<_>>() {
            return Err(Error::Format("group order is not a permutation".into()));
        }
        Ok(Self { feature_indices, znorm: ZScoreStats { mean, std }, centroids, group_order })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solid_rectangle_closed_form() {
        let (w, h) = (12, 5);
        let f = complexity_features(&BinaryImage::from_fn(w, h, |_, _| true));
        assert_eq!(f.f1_x_size, 12.0);
        assert_eq!(f.f2_y_size, 5.0);
        assert_eq!(f.f3_pixel_percent, 100.0);
        assert_eq!(f.f4_hole_percent, 0.0);
        assert_eq!(f.f5_components, 1.0);
        assert_eq!(f.f6_median_col_pixels, 5.0);
        assert_eq!(f.f7_percent_col_empty, 0.0);
        assert_eq!(f.f8_median_row_pixels, 12.0);
    }

    #[test]
    fn ring_encloses_its_hole() {
        let ring = BinaryImage::from_fn(10, 10, |x, y| !((2..8).contains(&x) && (2..8).contains(&y)));
        assert_eq!(complexity_features(&ring).f4_hole_percent, 36.0);
    }

    #[test]
    fn corner_dots() {
        let w = 9;
        let img = BinaryImage::from_fn(w, 4, |x, y| (x, y) == (0, 0) || (x, y) == (w - 1, 3));
        let f = complexity_features(&img);
        assert_eq!(f.f5_components, 2.0);
        assert!((f.f7_percent_col_empty - 100.0 * (w - 2) as f64 / w as f64).abs() < 1e-12);
    }

    #[test]
    fn zscore_basics() {
        let stats = ZScoreStats::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        assert_eq!(stats.apply(&[1.0, 5.0]), vec![-1.0, 0.0]);
        assert_eq!(stats.apply(&[3.0, 5.0]), vec![1.0, 0.0]);
        assert_eq!(stats.degenerate(), vec![false, true]);
    }

    #[test]
    fn consistency_counts_unsplit_writers() {
        let writers: Vec<u32> = (0..10).flat_map(|w| [w, w]).collect();
        let mut a: Vec<usize> = (0..10).flat_map(|w| [w % 3, w % 3]).collect();
        assert_eq!(consistency_metric(&a, &writers), 10);
        a[1] = (a[1] + 1) % 3;
        assert_eq!(consistency_metric(&a, &writers), 9);
    }

    #[test]
    fn spread_extremes() {
        assert_eq!(spread_metric(&[0; 50]), 0.0);
        let even: Vec<usize> = (0..300).map(|i| i % 3).collect();
        assert_eq!(spread_metric(&even), 200.0);
    }

    #[test]
    fn correlation_is_absolute() {
        let g = [1, 1, 2, 2, 3, 3];
        let up: Vec<Vec<f64>> = g.iter().map(|&v| vec![v as f64]).collect();
        let down: Vec<Vec<f64>> = g.iter().map(|&v| vec![-(v as f64)]).collect();
        assert!((correlation_metric(&g, &up) - 1.0).abs() < 1e-12);
        assert!((correlation_metric(&g, &down) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_classes_are_unordered() {
        assert_eq!(pair_class(1, 3), pair_class(3, 1));
        assert_eq!(pair_class(2, 2), PairClass::C22);
        let mut classes: Vec<PairClass> =
            (1..=3).flat_map(|a| (1..=3).map(move |b| pair_class(a, b))).collect();
        classes.sort();
        classes.dedup();
        assert_eq!(classes.len(), 6);
    }

    fn blob_rows() -> Vec<[f64; COMPLEXITY_FEATURES]> {
        let mut rows = Vec::new();
        for level in 0..3 {
            for i in 0..8 {
                let base = 100.0 * (level + 1) as f64 + i as f64 * 0.5;
                rows.push([base, 30.0, 10.0, 1.0, 2.0, base / 10.0, 0.0, base / 2.0]);
            }
        }
        rows
    }

    #[test]
    fn model_levels_follow_blob_order() {
        let rows = blob_rows();
        let model = ComplexityModel::fit(&rows, &DEFAULT_SUBSET, &KMeansConfig::default(), 3).unwrap();
        let mut sorted = model.group_order.clone();
        sorted.sort();
        assert_eq!(sorted, vec![1, 2, 3]);
        for (i, row) in rows.iter().enumerate() {
            let f = ComplexityFeatures {
                f1_x_size: row[0],
                f2_y_size: row[1],
                f3_pixel_percent: row[2],
                f4_hole_percent: row[3],
                f5_components: row[4],
                f6_median_col_pixels: row[5],
                f7_percent_col_empty: row[6],
                f8_median_row_pixels: row[7],
            };
            assert_eq!(model.assign(&f) as usize, i / 8 + 1);
        }
    }

    #[test]
    fn model_bytes_round_trip_and_refit_is_identical() {
        let rows = blob_rows();
        let a = ComplexityModel::fit(&rows, &DEFAULT_SUBSET, &KMeansConfig::default(), 3).unwrap();
        let b = ComplexityModel::fit(&rows, &DEFAULT_SUBSET, &KMeansConfig::default(), 3).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_eq!(ComplexityModel::from_bytes(&a.to_bytes()).unwrap(), a);
    }

    #[test]
    fn centroid_maps_to_its_own_level() {
        let rows = blob_rows();
        let model = ComplexityModel::fit(&rows, &DEFAULT_SUBSET, &KMeansConfig::default(), 3).unwrap();
        for (c, centroid) in model.centroids.iter().enumerate() {
            assert_eq!(model.assign_normalized(centroid) as usize, model.group_order[c]);
        }
    }
}
