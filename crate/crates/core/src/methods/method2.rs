use serde::{Deserialize, Serialize};

use super::{check_set_size, index_pairs, Fusion, SignatureStore};
use crate::classifier::{grid_search, GridChoice, GridSpec, LssvmModel};
use crate::complexity::PairClass;
use crate::datasets::SetEntry;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub a: String,
    pub b: String,
    pub label: f64,
}

/// Every unordered pair of every set. A pair is positive only when both
/// signatures are genuine specimens of the same writer.
pub fn method2_pairs(sets: &[SetEntry]) -> Vec<LabeledPair> {
    let mut out = Vec::new();
    for s in sets {
        for (i, j) in index_pairs(s.signatures.len()) {
            let (a, b) = (&s.signatures[i], &s.signatures[j]);
            let same = a.genuine && b.genuine && a.writer == b.writer;
            out.push(LabeledPair { a: a.path.clone(), b: b.path.clone(), label: if same { 1.0 } else { -1.0 } });
        }
    }
    out
}

pub fn train_pair_model(
    store: &SignatureStore,
    pairs: &[LabeledPair],
    grid: &GridSpec,
) -> Result<(LssvmModel, GridChoice)> {
    let x = pairs.iter().map(|p| Ok(store.fd(&p.a, &p.b)?.to_vec())).collect::<Result<Vec<_>>>()?;
    let y: Vec<f64> = pairs.iter().map(|p| p.label).collect();
    let choice = grid_search(&x, &y, grid)?;
    Ok((LssvmModel::train(&x, &y, choice.sigma, choice.gamma)?, choice))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub a: String,
    pub b: String,
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<PairClass>,
    /// Scored by the single-model fallback because the class had no model.
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub fallback: bool,
}

/// Scores all pairs of a set; `route` picks the model and class of a pair.
pub fn pair_scores<'m>(
    store: &SignatureStore,
    ids: &[String],
    route: impl Fn(&str, &str) -> Result<(&'m LssvmModel, Option<PairClass>, bool)>,
) -> Result<Vec<PairScore>> {
    check_set_size(ids.len())?;
    index_pairs(ids.len())
        .into_iter()
        .map(|(i, j)| {
            let (a, b) = (&ids[i], &ids[j]);
            let (model, class, fallback) = route(a, b)?;
            let score = model.score(&store.fd(a, b)?)?;
            Ok(PairScore { a: a.clone(), b: b.clone(), score, class, fallback })
        })
        .collect()
}

pub fn method2_verify(
    store: &SignatureStore,
    ids: &[String],
    model: &LssvmModel,
    fusion: Fusion,
) -> Result<(f64, Vec<PairScore>)> {
    let per_pair = pair_scores(store, ids, |_, _| Ok((model, None, false)))?;
    let scores: Vec<f64> = per_pair.iter().map(|p| p.score).collect();
    Ok((fusion.fuse(&scores)?, per_pair))
}
