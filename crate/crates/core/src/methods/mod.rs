//! The three set-verification methods.
//!
//! * Method 1 trains a one-class model per signature on its texture vector
//!   and synthetic duplicates, scores every set member against every model,
//!   and classifies the resulting n×n similarity matrix with a per-size
//!   classifier.
//! * Method 2 scores the feature-distance matrix of every pair in the set
//!   with one classifier and fuses the pair scores.
//! * Method 3 does the same with six classifiers, one per complexity pair
//!   class.

mod bundle;
mod method1;
mod method2;
mod method3;
mod store;

use serde::{Deserialize, Serialize};

pub use bundle::{
    score_set, threshold_key, train_bundle, verify, BundleMeta, GridRange, MethodBundle, MethodConfig, Provenance,
    SetScore, VerificationResult, BUNDLE_SCHEMA,
};
pub use method1::{method1_matrix, method1_train, SimilarityMatrix};
pub use method2::{method2_pairs, method2_verify, pair_scores, train_pair_model, LabeledPair, PairScore};
pub use method3::{method3_train, method3_verify, Method3Models};
pub use store::{PreparedSignature, SignatureStore};

use crate::error::{Error, Result};

/// Score displacement applied to Method-1 scores: `s + R1` above `T1`,
/// `s − R2` below `T2`, unchanged in between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Eq1Params {
    pub r1: f64,
    pub r2: f64,
    pub t1: f64,
    pub t2: f64,
}

impl Default for Eq1Params {
    fn default() -> Self {
        Self { r1: 1.0, r2: 1.0, t1: 1.0, t2: -1.0 }
    }
}

impl Eq1Params {
    /// Both thresholds at 1.
    pub fn literal() -> Self {
        Self { t2: 1.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t2 <= self.t1 && self.r1 >= 0.0 && self.r2 >= 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid score displacement parameters {self:?}")))
        }
    }
}

pub fn eq1_transform(s: f64, p: &Eq1Params) -> f64 {
    if s > p.t1 {
        s + p.r1
    } else if s < p.t2 {
        s - p.r2
    } else {
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    Min,
    Max,
    Avg,
}

impl Fusion {
    pub const ALL: [Fusion; 3] = [Fusion::Min, Fusion::Max, Fusion::Avg];

    pub fn name(self) -> &'static str {
        match self {
            Fusion::Min => "min",
            Fusion::Max => "max",
            Fusion::Avg => "avg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "min" => Ok(Fusion::Min),
            "max" => Ok(Fusion::Max),
            "avg" | "mean" => Ok(Fusion::Avg),
            _ => Err(Error::Config(format!("unknown fusion {s:?}"))),
        }
    }

    pub fn fuse(self, scores: &[f64]) -> Result<f64> {
        if scores.is_empty() {
            return Err(Error::EmptyVector);
        }
        Ok(match self {
            Fusion::Min => scores.iter().copied().fold(f64::INFINITY, f64::min),
            Fusion::Max => scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Fusion::Avg => scores.iter().sum::<f64>() / scores.len() as f64,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "1")]
    M1,
    #[serde(rename = "2")]
    M2,
    #[serde(rename = "3")]
    M3,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::M1, Method::M2, Method::M3];

    pub fn number(self) -> u8 {
        match self {
            Method::M1 => 1,
            Method::M2 => 2,
            Method::M3 => 3,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Method::M1),
            "2" => Ok(Method::M2),
            "3" => Ok(Method::M3),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }

    /// Method 1 produces one score per set; fusion does not apply.
    pub fn fusions(self) -> &'static [Fusion] {
        match self {
            Method::M1 => &[Fusion::Avg],
            _ => &Fusion::ALL,
        }
    }
}

/// All unordered index pairs `(i, j)`, `i < j`, in row order.
pub fn index_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

pub(crate) fn check_set_size(n: usize) -> Result<()> {
    if (2..=5).contains(&n) {
        Ok(())
    } else {
        Err(Error::InvalidSet(format!("a set holds 2 to 5 signatures, got {n}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eq1_branches() {
        let p = Eq1Params::default();
        assert_eq!(eq1_transform(0.0, &p), 0.0);
        assert_eq!(eq1_transform(1.2, &p), 2.2);
        assert_eq!(eq1_transform(-1.5, &p), -2.5);
        assert_eq!(eq1_transform(1.0, &p), 1.0);
        assert_eq!(eq1_transform(-1.0, &p), -1.0);
        let lit = Eq1Params::literal();
        assert_eq!(eq1_transform(0.5, &lit), -0.5);
        assert_eq!(eq1_transform(1.0, &lit), 1.0);
    }

    #[test]
    fn fusion_arithmetic() {
        let s = [-0.2, 0.4, 0.6];
        assert_eq!(Fusion::Min.fuse(&s).unwrap(), -0.2);
        assert_eq!(Fusion::Max.fuse(&s).unwrap(), 0.6);
        assert!((Fusion::Avg.fuse(&s).unwrap() - 0.266_666_666_666_666_7).abs() < 1e-12);
        assert!(Fusion::Avg.fuse(&[]).is_err());
    }

    #[test]
    fn pair_counts() {
        for n in 2..=5 {
            assert_eq!(index_pairs(n).len(), n * (n - 1) / 2);
        }
    }
}
