use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    method1_matrix, method1_train, method2_pairs, method2_verify, method3_train, method3_verify, train_pair_model,
    Eq1Params, Fusion, Method, Method3Models, PairScore, SignatureStore, SimilarityMatrix,
};
use crate::classifier::{log_grid, GridChoice, GridSpec, LssvmModel};
use crate::complexity::{ComplexityModel, KMeansConfig, PairClass, DEFAULT_SUBSET};
use crate::datasets::{SetEntry, Truth};
use crate::duplication::DuplicationParams;
use crate::error::{Error, Result};
use crate::evaluation::{eer, ScoredOutcome};
use crate::features::FeatureConfig;
use crate::seed::derive_seed;

pub const BUNDLE_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRange {
    pub lo_exp: i32,
    pub hi_exp: i32,
    pub count: usize,
}

impl GridRange {
    pub fn values(&self) -> Vec<f64> {
        log_grid(self.lo_exp, self.hi_exp, self.count)
    }
}

/// Settings shared by training and inference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodConfig {
    pub eq1: Eq1Params,
    pub duplication: DuplicationParams,
    pub features: FeatureConfig,
    /// Folds for the per-signature one-class models.
    pub signature_folds: usize,
    /// Folds for the set and pair classifiers.
    pub set_folds: usize,
    pub sigma_grid: GridRange,
    pub gamma_grid: GridRange,
    pub kmeans: KMeansConfig,
    /// 1-based complexity features used for grouping.
    pub complexity_subset: Vec<usize>,
    pub fusion: Fusion,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            eq1: Eq1Params::default(),
            duplication: DuplicationParams::default(),
            features: FeatureConfig::default(),
            signature_folds: 2,
            set_folds: 10,
            sigma_grid: GridRange { lo_exp: 0, hi_exp: 2, count: 50 },
            gamma_grid: GridRange { lo_exp: 0, hi_exp: 3, count: 50 },
            kmeans: KMeansConfig::default(),
            complexity_subset: DEFAULT_SUBSET.to_vec(),
            fusion: Fusion::Avg,
        }
    }
}

impl MethodConfig {
    pub fn grid(&self, folds: usize, seed: u64) -> GridSpec {
        GridSpec { sigma: self.sigma_grid.values(), gamma: self.gamma_grid.values(), folds, seed }
    }

    pub fn store(&self, root: Option<PathBuf>, seed: u64) -> SignatureStore {
        SignatureStore::new(
            root,
            self.features,
            self.duplication.clone(),
            self.grid(self.signature_folds, derive_seed(seed, "signature-grid")),
            seed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.eq1.validate()?;
        self.duplication.validate()?;
        if self.signature_folds < 2 || self.set_folds < 2 {
            return Err(Error::Config("cross-validation needs at least 2 folds".into()));
        }
        if self.sigma_grid.count == 0 || self.gamma_grid.count == 0 {
            return Err(Error::Config("empty hyperparameter grid".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self { tool_version: env!("CARGO_PKG_VERSION").to_string(), config_hash: config_hash.into(), seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub methods: Vec<Method>,
    pub config: MethodConfig,
    /// Decision threshold per method and fusion, see [`threshold_key`].
    pub thresholds: BTreeMap<String, f64>,
    pub grid_choices: BTreeMap<String, GridChoice>,
    pub method3_fallback: Vec<PairClass>,
    pub training_sets: usize,
}

/// Trained models of one or more methods.
#[derive(Clone, Debug)]
pub struct MethodBundle {
    pub meta: BundleMeta,
    pub method1: BTreeMap<usize, LssvmModel>,
    pub method2: Option<LssvmModel>,
    pub method3: Option<Method3Models>,
}

pub fn threshold_key(method: Method, fusion: Fusion) -> String {
    match method {
        Method::M1 => "m1".to_string(),
        _ => format!("m{}_{}", method.number(), fusion.name()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetScore {
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_pair: Option<Vec<PairScore>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity: Option<SimilarityMatrix>,
}

fn missing(what: &str) -> Error {
    Error::MissingModel(what.to_string())
}

pub fn score_set(
    store: &SignatureStore,
    bundle: &MethodBundle,
    ids: &[String],
    method: Method,
    fusion: Fusion,
) -> Result<SetScore> {
    super::check_set_size(ids.len())?;
    match method {
        Method::M1 => {
            let model = bundle.method1.get(&ids.len()).ok_or_else(|| missing(&format!("m1_n{}", ids.len())))?;
            let m = method1_matrix(store, ids, &bundle.meta.config.eq1)?;
            Ok(SetScore { score: model.score(m.flatten())?, per_pair: None, similarity: Some(m) })
        }
        Method::M2 => {
            let model = bundle.method2.as_ref().ok_or_else(|| missing("m2"))?;
            let (score, per_pair) = method2_verify(store, ids, model, fusion)?;
            Ok(SetScore { score, per_pair: Some(per_pair), similarity: None })
        }
        Method::M3 => {
            let m3 = bundle.method3.as_ref().ok_or_else(|| missing("m3"))?;
            let fallback = bundle.method2.as_ref().ok_or_else(|| missing("m2"))?;
            let (score, per_pair) = method3_verify(store, ids, m3, fallback, fusion)?;
            Ok(SetScore { score, per_pair: Some(per_pair), similarity: None })
        }
    }
}

pub(crate) fn set_ids(set: &SetEntry) -> Vec<String> {
    set.signatures.iter().map(|s| s.path.clone()).collect()
}

/// Trains the requested methods on labeled sets and sets every decision
/// threshold at the equal-error point of the training scores.
pub fn train_bundle(
    store: &SignatureStore,
    train: &[SetEntry],
    methods: &[Method],
    config: &MethodConfig,
    provenance: Provenance,
) -> Result<MethodBundle> {
    config.validate()?;
    let seed = provenance.seed;
    let methods: Vec<Method> = methods.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let mut meta = BundleMeta {
        schema_version: BUNDLE_SCHEMA,
        provenance,
        methods: methods.clone(),
        config: config.clone(),
        thresholds: BTreeMap::new(),
        grid_choices: BTreeMap::new(),
        method3_fallback: Vec::new(),
        training_sets: train.len(),
    };
    let mut bundle = MethodBundle { meta: meta.clone(), method1: BTreeMap::new(), method2: None, method3: None };

    if methods.contains(&Method::M1) {
        let mut ids: Vec<String> = train.iter().flat_map(set_ids).collect();
        ids.sort();
        ids.dedup();
        store.prefetch_one_class(&ids)?;
        let data = train
            .iter()
            .map(|s| Ok((method1_matrix(store, &set_ids(s), &config.eq1)?, s.truth.label())))
            .collect::<Result<Vec<_>>>()?;
        for (n, (model, choice)) in method1_train(&data, &config.grid(config.set_folds, derive_seed(seed, "m1-sets")))? {
            meta.grid_choices.insert(format!("m1_n{n}"), choice);
            bundle.method1.insert(n, model);
        }
    }
    if methods.contains(&Method::M2) || methods.contains(&Method::M3) {
        let pairs = method2_pairs(train);
        let keys: Vec<(String, String)> = pairs.iter().map(|p| (p.a.clone(), p.b.clone())).collect();
        store.prefetch_pairs(&keys)?;
        let (model, choice) = train_pair_model(store, &pairs, &config.grid(config.set_folds, derive_seed(seed, "m2")))?;
        meta.grid_choices.insert("m2".into(), choice);
        bundle.method2 = Some(model);
        if methods.contains(&Method::M3) {
            let mut genuine: Vec<String> =
                train.iter().flat_map(|s| s.signatures.iter().filter(|r| r.genuine).map(|r| r.path.clone())).collect();
            genuine.sort();
            genuine.dedup();
            let grid = config.grid(config.set_folds, derive_seed(seed, "m3"));
            let (m3, choices) =
                method3_train(store, &pairs, &genuine, &config.complexity_subset, &config.kmeans, &grid, seed)?;
            for (class, choice) in choices {
                meta.grid_choices.insert(format!("m3_{class}"), choice);
            }
            meta.method3_fallback = m3.fallback.clone();
            bundle.method3 = Some(m3);
        }
    }
    bundle.meta = meta;

    let mut thresholds = BTreeMap::new();
    for &method in &methods {
        for &fusion in method.fusions() {
            let outcomes = train
                .iter()
                .map(|s| Ok(ScoredOutcome { score: score_set(store, &bundle, &set_ids(s), method, fusion)?.score, truth: s.truth }))
                .collect::<Result<Vec<_>>>()?;
            thresholds.insert(threshold_key(method, fusion), eer(&outcomes)?.threshold);
        }
    }
    bundle.meta.thresholds = thresholds;
    Ok(bundle)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fusion: Option<Fusion>,
    pub n: usize,
    pub signatures: Vec<String>,
    pub score: f64,
    pub threshold: f64,
    pub decision: Truth,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_pair: Option<Vec<PairScore>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity: Option<SimilarityMatrix>,
    pub provenance: Provenance,
}

/// Scores a set and applies the stored threshold: single writer iff the
/// score reaches it.
pub fn verify(
    store: &SignatureStore,
    bundle: &MethodBundle,
    ids: &[String],
    method: Method,
    fusion: Fusion,
) -> Result<VerificationResult> {
    let key = threshold_key(method, fusion);
    let threshold = *bundle.meta.thresholds.get(&key).ok_or_else(|| missing(&format!("threshold {key}")))?;
    let s = score_set(store, bundle, ids, method, fusion)?;
    Ok(VerificationResult {
        method,
        fusion: (method != Method::M1).then_some(fusion),
        n: ids.len(),
        signatures: ids.to_vec(),
        score: s.score,
        threshold,
        decision: if s.score >= threshold { Truth::SingleWriter } else { Truth::MultipleWriters },
        per_pair: s.per_pair,
        similarity: s.similarity,
        provenance: bundle.meta.provenance.clone(),
    })
}

impl MethodBundle {
    /// Writes `meta.json` and one file per model into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&self.meta)?)?;
        for (n, m) in &self.method1 {
            m.save(dir.join(format!("m1_n{n}.model")))?;
        }
        if let Some(m) = &self.method2 {
            m.save(dir.join("m2.model"))?;
        }
        if let Some(m3) = &self.method3 {
            m3.complexity.save(dir.join("complexity.model"))?;
            for (class, m) in &m3.pools {
                m.save(dir.join(format!("m3_{class}.model")))?;
            }
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: BundleMeta = serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)?;
        if meta.schema_version != BUNDLE_SCHEMA {
            return Err(Error::Format(format!("unsupported bundle schema {}", meta.schema_version)));
        }
        let load = |name: String| -> Result<LssvmModel> {
            let path = dir.join(&name);
            if !path.exists() {
                return Err(missing(&name));
            }
            LssvmModel::load(path)
        };
        let mut method1 = BTreeMap::new();
        if meta.methods.contains(&Method::M1) {
            for n in 2..=5 {
                let name = format!("m1_n{n}.model");
                if dir.join(&name).exists() {
                    method1.insert(n, load(name)?);
                }
            }
        }
        let needs_m2 = meta.methods.iter().any(|m| matches!(m, Method::M2 | Method::M3));
        let method2 = if needs_m2 { Some(load("m2.model".into())?) } else { None };
        let method3 = if meta.methods.contains(&Method::M3) {
            let path = dir.join("complexity.model");
            if !path.exists() {
                return Err(missing("complexity.model"));
            }
            let complexity = ComplexityModel::load(path)?;
            let mut pools = BTreeMap::new();
            for class in PairClass::ALL {
                if !meta.method3_fallback.contains(&class) {
                    pools.insert(class, load(format!("m3_{class}.model"))?);
                }
            }
            Some(Method3Models { complexity, pools, fallback: meta.method3_fallback.clone() })
        } else {
            None
        };
        Ok(Self { meta, method1, method2, method3 })
    }
}
