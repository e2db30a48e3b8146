//! Common-authorship verification for small sets of off-line signatures.
//!
//! A set of 2 to 5 signature images is declared genuine when all of them were
//! written by the same person. Three verification methods are provided:
//! per-signature one-class models over texture features, a single classifier
//! over pairwise feature-distance matrices, and a complexity-routed variant
//! of the latter with one classifier per pair class.

pub mod binfmt;
pub mod classifier;
pub mod config;
pub mod complexity;
pub mod datasets;
pub mod distances;
pub mod duplication;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod imaging;
pub mod methods;
pub mod record;
pub mod seed;

pub use error::{Error, Result};
