use std::collections::HashMap;
use std::hash::Hash;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::classifier::{grid_search_one_class, GridSpec, LssvmModel};
use crate::complexity::{complexity_features, ComplexityFeatures};
use crate::distances::fd_values;
use crate::duplication::{duplicate, dump_duplicates, DuplicationParams};
use crate::error::Result;
use crate::features::{extract_all, extract_texture, FeatureBundle, FeatureConfig};
use crate::imaging::{load_signature, GrayImage};
use crate::record::SignatureRecord;
use crate::seed::derive_seed;

/// Everything the methods need from one signature image.
#[derive(Clone, Debug)]
pub struct PreparedSignature {
    pub id: String,
    pub features: FeatureBundle,
    pub complexity: ComplexityFeatures,
}

struct Cache<K, V>(Mutex<HashMap<K, Arc<V>>>);

impl<K: Eq + Hash + Clone, V> Cache<K, V> {
    fn new() -> Self {
        Self(Mutex::new(HashMap::new()))
    }

    /// Computes outside the lock; concurrent misses may compute twice and
    /// keep the first result, which is identical anyway.
    fn get_or(&self, key: &K, compute: impl FnOnce() -> Result<V>) -> Result<Arc<V>> {
        if let Some(v) = self.0.lock().unwrap().get(key) {
            return Ok(v.clone());
        }
        let v = Arc::new(compute()?);
        Ok(self.0.lock().unwrap().entry(key.clone()).or_insert(v).clone())
    }
}

/// Signature images addressed by id, with memoized features, pair distances
/// and per-signature one-class models. Ids are paths relative to `root`, or
/// names registered with [`SignatureStore::insert_image`].
///
/// The one-class model of a signature depends only on the image, the
/// duplication and grid settings and the store seed, so it can be reused
/// across experiment repetitions.
pub struct SignatureStore {
    root: Option<PathBuf>,
    features: FeatureConfig,
    duplication: DuplicationParams,
    signature_grid: GridSpec,
    seed: u64,
    dump_dir: Option<PathBuf>,
    images: Mutex<HashMap<String, Arc<GrayImage>>>,
    prepared: Cache<String, PreparedSignature>,
    distances: Cache<(String, String), Vec<f64>>,
    one_class: Cache<String, LssvmModel>,
}

impl SignatureStore {
    pub fn new(
        root: Option<PathBuf>,
        features: FeatureConfig,
        duplication: DuplicationParams,
        signature_grid: GridSpec,
        seed: u64,
    ) -> Self {
        Self {
            root,
            features,
            duplication,
            signature_grid,
            seed,
            dump_dir: None,
            images: Mutex::new(HashMap::new()),
            prepared: Cache::new(),
            distances: Cache::new(),
            one_class: Cache::new(),
        }
    }

    /// Also write every generated duplicate as PNG under `dir`.
    pub fn with_dump_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.dump_dir = Some(dir.into());
        self
    }

    pub fn insert_image(&self, id: impl Into<String>, img: GrayImage) {
        self.images.lock().unwrap().insert(id.into(), Arc::new(img));
    }

    fn image(&self, id: &str) -> Result<Arc<GrayImage>> {
        if let Some(img) = self.images.lock().unwrap().get(id) {
            return Ok(img.clone());
        }
        let path = match &self.root {
            Some(root) => root.join(id),
            None => PathBuf::from(id),
        };
        Ok(Arc::new(load_signature(path)?))
    }

    pub fn record(&self, id: &str) -> Result<SignatureRecord> {
        SignatureRecord::from_gray(id, self.image(id)?.as_ref())
    }

    pub fn prepared(&self, id: &str) -> Result<Arc<PreparedSignature>> {
        self.prepared.get_or(&id.to_string(), || {
            let rec = self.record(id)?;
            Ok(PreparedSignature {
                id: id.to_string(),
                features: extract_all(&rec, &self.features)?,
                complexity: complexity_features(&rec.binary),
            })
        })
    }

    /// Flattened feature-distance matrix of a pair. Every distance is
    /// symmetric, so the pair is cached unordered.
    pub fn fd(&self, a: &str, b: &str) -> Result<Arc<Vec<f64>>> {
        let key = if a <= b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.distances.get_or(&key, || fd_values(&self.prepared(&key.0)?.features, &self.prepared(&key.1)?.features))
    }

    /// Texture vectors of the signature and its duplicates, original first.
    pub fn training_textures(&self, id: &str) -> Result<Vec<Vec<f64>>> {
        let rec = self.record(id)?;
        let params = DuplicationParams { seed: derive_seed(self.duplication.seed ^ self.seed, id), ..self.duplication.clone() };
        let dups = duplicate(&rec.gray, &params)?;
        if let Some(dir) = &self.dump_dir {
            let stem = id.rsplit_once('.').map_or(id, |(s, _)| s).replace(['/', '\\'], "_");
            dump_duplicates(dir, &stem, &dups)?;
        }
        let mut x = vec![extract_texture(&rec)];
        let rest: Vec<Vec<f64>> = dups
            .par_iter()
            .map(|d| Ok(extract_texture(&SignatureRecord::from_gray(id, d)?)))
            .collect::<Result<_>>()?;
        x.extend(rest);
        Ok(x)
    }

    pub fn one_class_model(&self, id: &str) -> Result<Arc<LssvmModel>> {
        self.one_class.get_or(&id.to_string(), || {
            let x = self.training_textures(id)?;
            let grid = GridSpec { seed: derive_seed(self.signature_grid.seed ^ self.seed, id), ..self.signature_grid.clone() };
            let choice = grid_search_one_class(&x, &grid)?;
            LssvmModel::train_one_class(&x, choice.sigma, choice.gamma)
        })
    }

    /// Fills the feature and distance caches for all pairs of the given sets.
    pub fn prefetch_pairs(&self, pairs: &[(String, String)]) -> Result<()> {
        let mut ids: Vec<&String> = pairs.iter().flat_map(|(a, b)| [a, b]).collect();
        ids.sort();
        ids.dedup();
        ids.par_iter().try_for_each(|id| self.prepared(id).map(|_| ()))?;
        pairs.par_iter().try_for_each(|(a, b)| self.fd(a, b).map(|_| ()))
    }

    pub fn prefetch_one_class(&self, ids: &[String]) -> Result<()> {
        ids.par_iter().try_for_each(|id| self.one_class_model(id).map(|_| ()))
    }
}
