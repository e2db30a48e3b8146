use std::collections::BTreeMap;

use super::{pair_scores, Fusion, LabeledPair, PairScore, SignatureStore};
use crate::classifier::{GridChoice, GridSpec, LssvmModel};
use crate::complexity::{pair_class, ComplexityModel, KMeansConfig, PairClass, COMPLEXITY_FEATURES};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Clone, Debug)]
pub struct Method3Models {
    pub complexity: ComplexityModel,
    pub pools: BTreeMap<PairClass, LssvmModel>,
    /// Classes whose pool could not be trained; their pairs use the
    /// single-model classifier.
    pub fallback: Vec<PairClass>,
}

impl Method3Models {
    pub fn class_of(&self, store: &SignatureStore, a: &str, b: &str) -> Result<PairClass> {
        let la = self.complexity.assign(&store.prepared(a)?.complexity);
        let lb = self.complexity.assign(&store.prepared(b)?.complexity);
        Ok(pair_class(la, lb))
    }
}

/// Fits the complexity grouping on `genuine_ids`, routes the training pairs
/// into six pools and trains one classifier per pool. A pool without enough
/// examples of both labels is recorded as a fallback class. Also returns the
/// grid-search result of every trained pool.
pub fn method3_train(
    store: &SignatureStore,
    pairs: &[LabeledPair],
    genuine_ids: &[String],
    subset: &[usize],
    kmeans: &KMeansConfig,
    grid: &GridSpec,
    seed: u64,
) -> Result<(Method3Models, BTreeMap<PairClass, GridChoice>)> {
    let rows = genuine_ids
        .iter()
        .map(|id| Ok(store.prepared(id)?.complexity.as_array()))
        .collect::<Result<Vec<[f64; COMPLEXITY_FEATURES]>>>()?;
    let complexity = ComplexityModel::fit(&rows, subset, kmeans, derive_seed(seed, "complexity"))?;
    let mut models = Method3Models { complexity, pools: BTreeMap::new(), fallback: Vec::new() };
    let mut choices = BTreeMap::new();
    let mut pools: BTreeMap<PairClass, Vec<LabeledPair>> = BTreeMap::new();
    for p in pairs {
        pools.entry(models.class_of(store, &p.a, &p.b)?).or_default().push(p.clone());
    }
    for class in PairClass::ALL {
        let pool = pools.remove(&class).unwrap_or_default();
        let grid = GridSpec { seed: derive_seed(grid.seed, class.name()), ..grid.clone() };
        match super::train_pair_model(store, &pool, &grid) {
            Ok((m, choice)) => {
                models.pools.insert(class, m);
                choices.insert(class, choice);
            }
            Err(Error::InsufficientData(_)) => models.fallback.push(class),
            Err(e) => return Err(e),
        }
    }
    Ok((models, choices))
}

pub fn method3_verify(
    store: &SignatureStore,
    ids: &[String],
    models: &Method3Models,
    fallback: &LssvmModel,
    fusion: Fusion,
) -> Result<(f64, Vec<PairScore>)> {
    let per_pair = pair_scores(store, ids, |a, b| {
        let class = models.class_of(store, a, b)?;
        Ok(match models.pools.get(&class) {
            Some(m) => (m, Some(class), false),
            None => (fallback, Some(class), true),
        })
    })?;
    let scores: Vec<f64> = per_pair.iter().map(|p| p.score).collect();
    Ok((fusion.fuse(&scores)?, per_pair))
}
