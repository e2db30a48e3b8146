use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_set_size, eq1_transform, Eq1Params, SignatureStore};
use crate::classifier::{grid_search, GridChoice, GridSpec, LssvmModel};
use crate::error::{Error, Result};

/// `values[i * n + j]` is signature `j` scored by the model of signature `i`,
/// after the score displacement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub n: usize,
    pub values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Row-major classifier input.
    pub fn flatten(&self) -> &[f64] {
        &self.values
    }

    pub fn from_flat(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimMismatch { expected: n * n, got: values.len() });
        }
        Ok(Self { n, values })
    }
}

pub fn method1_matrix(store: &SignatureStore, ids: &[String], eq1: &Eq1Params) -> Result<SimilarityMatrix> {
    check_set_size(ids.len())?;
    let models = ids.iter().map(|id| store.one_class_model(id)).collect::<Result<Vec<_>>>()?;
    let textures = ids.iter().map(|id| Ok(store.prepared(id)?.features.texture())).collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(ids.len() * ids.len());
    for m in &models {
        for t in &textures {
            values.push(eq1_transform(m.score(t)?, eq1));
        }
    }
    Ok(SimilarityMatrix { n: ids.len(), values })
}

/// One binary classifier per set size over flattened similarity matrices.
/// Labels are +1 for single-writer sets and −1 otherwise.
pub fn method1_train(
    data: &[(SimilarityMatrix, f64)],
    grid: &GridSpec,
) -> Result<BTreeMap<usize, (LssvmModel, GridChoice)>> {
    let mut by_size: BTreeMap<usize, (Vec<Vec<f64>>, Vec<f64>)> = BTreeMap::new();
    for (m, y) in data {
        let e = by_size.entry(m.n).or_default();
        e.0.push(m.values.clone());
        e.1.push(*y);
    }
    let mut out = BTreeMap::new();
    for (n, (x, y)) in by_size {
        let pos = y.iter().filter(|&&v| v > 0.0).count();
        if pos < 2 || y.len() - pos < 2 {
            return Err(Error::InsufficientData(format!("sets of size {n} need two examples of each class")));
        }
        let choice = grid_search(&x, &y, grid)?;
        out.insert(n, (LssvmModel::train(&x, &y, choice.sigma, choice.gamma)?, choice));
    }
    Ok(out)
}
