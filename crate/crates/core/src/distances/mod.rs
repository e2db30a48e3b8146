//! The fifteen vector distances and the 10×15 feature-distance matrix of a
//! signature pair.

mod dtw;
mod edit;
mod histogram;
mod hungarian;

use serde::{Deserialize, Serialize};

pub use dtw::{dtw, dtw_normalized, dtw_with_length};
pub use edit::{edit_distance, levenshtein, levenshtein_bits, quantize_pair, EDIT_LEVELS};
pub use histogram::{histogram_distance, to_distribution, HistogramKind};
pub use hungarian::{block_average, hungarian_chi2, hungarian_chi2_dense, solve_assignment, HUNGARIAN_MAX_LEN};

use crate::complexity::PairClass;
use crate::error::{Error, Result};
use crate::features::{FeatureBundle, FeatureKind, FEATURE_COUNT};

pub const DISTANCE_COUNT: usize = 15;
pub const FD_LEN: usize = FEATURE_COUNT * DISTANCE_COUNT;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Dtw,
    DtwNormalized,
    Edit,
    HungarianChi2,
    Histogram(HistogramKind),
}

impl DistanceKind {
    /// Column order of the feature-distance matrix.
    pub const ALL: [DistanceKind; DISTANCE_COUNT] = [
        DistanceKind::Dtw,
        DistanceKind::DtwNormalized,
        DistanceKind::Edit,
        DistanceKind::HungarianChi2,
        DistanceKind::Histogram(HistogramKind::Intersection),
        DistanceKind::Histogram(HistogramKind::Chi2),
        DistanceKind::Histogram(HistogramKind::Jeffrey),
        DistanceKind::Histogram(HistogramKind::Ks),
        DistanceKind::Histogram(HistogramKind::Hellinger),
        DistanceKind::Histogram(HistogramKind::Bhattacharyya),
        DistanceKind::Histogram(HistogramKind::L1),
        DistanceKind::Histogram(HistogramKind::L2),
        DistanceKind::Histogram(HistogramKind::CumL1),
        DistanceKind::Histogram(HistogramKind::CumL2),
        DistanceKind::Histogram(HistogramKind::PairwiseChi2Min),
    ];
}

pub fn distance(kind: DistanceKind, a: &[f64], b: &[f64]) -> Result<f64> {
    match kind {
        DistanceKind::Dtw => dtw(a, b),
        DistanceKind::DtwNormalized => dtw_normalized(a, b),
        DistanceKind::Edit => edit_distance(a, b),
        DistanceKind::HungarianChi2 => hungarian_chi2(a, b),
        DistanceKind::Histogram(h) => histogram_distance(h, a, b),
    }
}

/// Distances between one signature pair: row = feature, column = distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FDMatrix {
    /// Row-major, `FEATURE_COUNT × DISTANCE_COUNT`.
    pub values: Vec<f64>,
    pub pair: (String, String),
    pub complexity_class: Option<PairClass>,
}

impl FDMatrix {
    pub fn get(&self, feature: usize, distance: usize) -> f64 {
        self.values[feature * DISTANCE_COUNT + distance]
    }

    /// Row-major flattening used as classifier input.
    pub fn flatten(&self) -> &[f64] {
        &self.values
    }

    pub fn from_flat(values: Vec<f64>, pair: (String, String)) -> Result<Self> {
        if values.len() != FD_LEN {
            return Err(Error::DimMismatch { expected: FD_LEN, got: values.len() });
        }
        Ok(Self { values, pair, complexity_class: None })
    }
}

/// Distance values only, without identities.
pub fn fd_values(fa: &FeatureBundle, fb: &FeatureBundle) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(FD_LEN);
    for kind in FeatureKind::ALL {
        let (a, b) = (fa.get(kind), fb.get(kind));
        // Both DTW columns come from one alignment.
        let (cost, len) = dtw_with_length(a, b)?;
        for d in DistanceKind::ALL {
            values.push(match d {
                DistanceKind::Dtw => cost,
                DistanceKind::DtwNormalized => cost / len as f64,
                _ => distance(d, a, b)?,
            });
        }
    }
    Ok(values)
}

pub fn feature_distance_matrix(
    fa: &FeatureBundle,
    fb: &FeatureBundle,
    pair: (String, String),
) -> Result<FDMatrix> {
    Ok(FDMatrix { values: fd_values(fa, fb)?, pair, complexity_class: None })
}
