//! Run configuration: one TOML file covering every tunable, with command-line
//! overrides applied on top. Its canonical hash goes into every artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::SynthParams;
use crate::error::{Error, Result};
use crate::evaluation::LikertRule;
use crate::methods::{Fusion, Method, MethodConfig, Provenance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_root: Option<PathBuf>,
    pub bundle_dir: Option<PathBuf>,
    /// Methods to train or evaluate.
    pub methods: Vec<Method>,
    pub seed: u64,
    pub repetitions: usize,
    /// Decision thresholds that replace the trained ones at verification,
    /// keyed like `m1` or `m2_avg`.
    pub thresholds: BTreeMap<String, f64>,
    pub likert: LikertRule,
    pub synth: SynthParams,
    pub method: MethodConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus_root: None,
            bundle_dir: None,
            methods: vec![Method::M1, Method::M2, Method::M3],
            seed: 0,
            repetitions: 10,
            thresholds: BTreeMap::new(),
            likert: LikertRule::default(),
            synth: SynthParams::default(),
            method: MethodConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn fusion(&self) -> Fusion {
        self.method.fusion
    }

    /// Hash of the canonical JSON form, 16 hex digits. Paths and the seed are
    /// excluded: the seed is recorded next to the hash, and relocating a
    /// corpus does not change results.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.corpus_root = None;
        canonical.bundle_dir = None;
        canonical.seed = 0;
        let json = serde_json::to_vec(&canonical)?;
        let digest = Sha256::digest(&json);
        Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn provenance(&self) -> Result<Provenance> {
        Ok(Provenance::new(self.hash()?, self.seed))
    }

    pub fn validate(&self) -> Result<()> {
        self.method.validate()?;
        if self.methods.is_empty() {
            return Err(Error::Config("no method selected".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be positive".into()));
        }
        if self.likert.multiple_max >= self.likert.same_min {
            return Err(Error::Config("likert bounds overlap".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_defaults() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        let partial = RunConfig::from_toml("seed = 7\n[method]\nset_folds = 5\n").unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.method.set_folds, 5);
        assert_eq!(partial.repetitions, 10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("sead = 7\n").is_err());
    }

    #[test]
    fn hash_ignores_seed_but_not_settings() {
        let a = RunConfig::default();
        let b = RunConfig { seed: 99, ..a.clone() };
        let mut c = a.clone();
        c.method.set_folds = 5;
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }
}
