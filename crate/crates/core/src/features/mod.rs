//! The ten fixed-length descriptors computed for every signature.

mod geometric;
mod poset;
mod shape_context;
mod texture;

use serde::{Deserialize, Serialize};

pub use geometric::{extract_cartesian, extract_polar, CartesianFeatures, PolarFeatures};
pub use poset::{extract_poset, POSET_CELLS_X, POSET_CELLS_Y, POSET_PROBES, ROTATE_180};
pub use shape_context::{extract_shape_context, ShapeContextConfig};
pub use texture::{dct2_prefix, extract_lbp, extract_ldp, lbp_codes, ldp_codes, region_histograms};

use crate::error::Result;
use crate::record::SignatureRecord;

pub const POLAR_DIM: usize = 63;
pub const CARTESIAN_DIM: usize = 64;
pub const LBP_DIM: usize = 256;
pub const LDP_DIM: usize = 168;
pub const POSET_DIM: usize = 1280;
pub const SHAPE_CONTEXT_DIM: usize = 60;

/// Number of descriptors per signature.
pub const FEATURE_COUNT: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    PolarRadii,
    PolarAngles,
    PolarCounts,
    CartEnvH,
    CartEnvV,
    CartTransitions,
    Lbp,
    Ldp,
    Poset,
    ShapeContext,
}

impl FeatureKind {
    /// Bundle field order, which is also the row order of a feature-distance matrix.
    pub const ALL: [FeatureKind; FEATURE_COUNT] = [
        FeatureKind::PolarRadii,
        FeatureKind::PolarAngles,
        FeatureKind::PolarCounts,
        FeatureKind::CartEnvH,
        FeatureKind::CartEnvV,
        FeatureKind::CartTransitions,
        FeatureKind::Lbp,
        FeatureKind::Ldp,
        FeatureKind::Poset,
        FeatureKind::ShapeContext,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::PolarRadii => "polar_radii",
            FeatureKind::PolarAngles => "polar_angles",
            FeatureKind::PolarCounts => "polar_counts",
            FeatureKind::CartEnvH => "cart_env_h",
            FeatureKind::CartEnvV => "cart_env_v",
            FeatureKind::CartTransitions => "cart_transitions",
            FeatureKind::Lbp => "lbp",
            FeatureKind::Ldp => "ldp",
            FeatureKind::Poset => "poset",
            FeatureKind::ShapeContext => "shape_context",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Reference points sampled on the edge for shape context.
    pub sc_points: usize,
    /// Shape-context output length; 60 native bins, zero-padded beyond.
    pub sc_dim: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { sc_points: 200, sc_dim: SHAPE_CONTEXT_DIM }
    }
}

/// The ten descriptor vectors of one signature, in field order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub polar_radii: Vec<f64>,
    pub polar_angles: Vec<f64>,
    pub polar_counts: Vec<f64>,
    pub cart_env_h: Vec<f64>,
    pub cart_env_v: Vec<f64>,
    pub cart_transitions: Vec<f64>,
    pub lbp: Vec<f64>,
    pub ldp: Vec<f64>,
    pub poset: Vec<f64>,
    pub shape_context: Vec<f64>,
}

impl FeatureBundle {
    pub fn get(&self, kind: FeatureKind) -> &[f64] {
        match kind {
            FeatureKind::PolarRadii => &self.polar_radii,
            FeatureKind::PolarAngles => &self.polar_angles,
            FeatureKind::PolarCounts => &self.polar_counts,
            FeatureKind::CartEnvH => &self.cart_env_h,
            FeatureKind::CartEnvV => &self.cart_env_v,
            FeatureKind::CartTransitions => &self.cart_transitions,
            FeatureKind::Lbp => &self.lbp,
            FeatureKind::Ldp => &self.ldp,
            FeatureKind::Poset => &self.poset,
            FeatureKind::ShapeContext => &self.shape_context,
        }
    }

    pub fn vectors(&self) -> impl Iterator<Item = (FeatureKind, &[f64])> {
        FeatureKind::ALL.into_iter().map(move |k| (k, self.get(k)))
    }

    pub fn dims(&self) -> [usize; FEATURE_COUNT] {
        FeatureKind::ALL.map(|k| self.get(k).len())
    }

    /// Texture descriptor used by the per-signature models: lbp followed by ldp.
    pub fn texture(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.lbp.len() + self.ldp.len());
        v.extend_from_slice(&self.lbp);
        v.extend_from_slice(&self.ldp);
        v
    }
}

pub fn extract_all(sig: &SignatureRecord, config: &FeatureConfig) -> Result<FeatureBundle> {
    let polar = extract_polar(&sig.binary);
    let cart = extract_cartesian(&sig.binary);
    let sc = extract_shape_context(
        &sig.binary,
        &ShapeContextConfig { points: config.sc_points, dim: config.sc_dim },
    )?;
    Ok(FeatureBundle {
        polar_radii: polar.radii,
        polar_angles: polar.angles,
        polar_counts: polar.counts,
        cart_env_h: cart.env_h,
        cart_env_v: cart.env_v,
        cart_transitions: cart.transitions,
        lbp: extract_lbp(&sig.gray),
        ldp: extract_ldp(&sig.gray),
        poset: extract_poset(&sig.skeleton),
        shape_context: sc,
    })
}

/// Only the texture descriptor (lbp ⊕ ldp), for images that never need the
/// full bundle such as training duplicates.
pub fn extract_texture(sig: &SignatureRecord) -> Vec<f64> {
    let mut v = extract_lbp(&sig.gray);
    v.extend(extract_ldp(&sig.gray));
    v
}
