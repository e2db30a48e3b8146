//! Corpus indexing, construction of the 400-set dataset (100 sets per size,
//! half single-writer, half mixed), stratified train/test splits, and the
//! synthetic corpus generator.

mod synth;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use synth::{synth_corpus, SynthParams};

use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA: u32 = 1;
pub const SET_SIZES: [usize; 4] = [2, 3, 4, 5];
pub const SETS_PER_CLASS: usize = 50;

const IMAGE_EXTENSIONS: [&str; 6] = ["png", "bmp", "tif", "tiff", "jpg", "jpeg"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriterEntry {
    pub writer_id: String,
    /// Paths relative to the corpus root, `/`-separated.
    pub genuine_paths: Vec<String>,
    pub forgery_paths: Vec<String>,
    /// The writer has no forgery directory.
    pub missing_forgeries: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub root: PathBuf,
    pub writers: Vec<WriterEntry>,
}

impl CorpusIndex {
    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.root.join(relative)
    }

    /// Content-independent identity of the layout: a hash of all relative paths.
    pub fn corpus_id(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.writers {
            h.update(w.writer_id.as_bytes());
            for p in w.genuine_paths.iter().chain(&w.forgery_paths) {
                h.update([0]);
                h.update(p.as_bytes());
            }
            h.update([1]);
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn list_images(root: &Path, dir: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if path.is_file() && is_image {
            let rel = path.strip_prefix(root).expect("listed under root");
            let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            out.push(parts.join("/"));
        }
    }
    out.sort();
    Ok(out)
}

/// Indexes `root/<writer>/genuine/*` and `root/<writer>/forgery/*`.
pub fn index_corpus(root: impl AsRef<Path>) -> Result<CorpusIndex> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::BadLayout(format!("{} is not a directory", root.display())));
    }
    let mut writer_dirs: Vec<(String, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(root)? {
        let path = entry?.path();
        if path.is_dir() {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            writer_dirs.push((name, path));
        }
    }
    writer_dirs.sort();
    if writer_dirs.is_empty() {
        return Err(Error::BadLayout(format!("no writer directories under {}", root.display())));
    }
    let mut writers = Vec::new();
    for (writer_id, dir) in writer_dirs {
        let genuine_dir = dir.join("genuine");
        if !genuine_dir.is_dir() {
            return Err(Error::BadLayout(format!("{} has no genuine/ directory", dir.display())));
        }
        let genuine_paths = list_images(root, &genuine_dir)?;
        if genuine_paths.is_empty() {
            return Err(Error::EmptyWriter(writer_id));
        }
        let forgery_dir = dir.join("forgery");
        let missing_forgeries = !forgery_dir.is_dir();
        let forgery_paths = if missing_forgeries { Vec::new() } else { list_images(root, &forgery_dir)? };
        writers.push(WriterEntry { writer_id, genuine_paths, forgery_paths, missing_forgeries });
    }
    Ok(CorpusIndex { root: root.to_path_buf(), writers })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    SingleWriter,
    MultipleWriters,
}

impl Truth {
    pub fn label(self) -> f64 {
        match self {
            Truth::SingleWriter => 1.0,
            Truth::MultipleWriters => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Truth::SingleWriter => "single_writer",
            Truth::MultipleWriters => "multiple_writers",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignatureRef {
    pub path: String,
    /// Writer whose signature this is (genuine) or imitates (forgery).
    pub writer: String,
    pub genuine: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetEntry {
    pub set_id: String,
    pub n: usize,
    pub truth: Truth,
    pub target_writer: String,
    pub signatures: Vec<SignatureRef>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub corpus_id: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<crate::methods::Provenance>,
    pub sets: Vec<SetEntry>,
}

impl DatasetManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.schema_version != MANIFEST_SCHEMA {
            return Err(Error::Format(format!("unsupported manifest schema {}", m.schema_version)));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Count of sets per (n, truth).
    pub fn cell_counts(&self) -> BTreeMap<(usize, Truth), usize> {
        let mut counts = BTreeMap::new();
        for s in &self.sets {
            *counts.entry((s.n, s.truth)).or_insert(0) += 1;
        }
        counts
    }

    /// Checks the dataset structure: 50 sets per (n, truth), set sizes,
    /// no repeated file within a set, and mixed sets holding at least one
    /// genuine and one forged signature of their target writer.
    pub fn validate(&self) -> Result<()> {
        for n in SET_SIZES {
            for t in [Truth::SingleWriter, Truth::MultipleWriters] {
                let c = self.cell_counts().get(&(n, t)).copied().unwrap_or(0);
                if c != SETS_PER_CLASS {
                    return Err(Error::InvalidSet(format!("{c} sets for n={n}, {}", t.name())));
                }
            }
        }
        check_sets(&self.sets)
    }
}

fn check_sets(sets: &[SetEntry]) -> Result<()> {
    for s in sets {
        if s.signatures.len() != s.n || !(2..=5).contains(&s.n) {
            return Err(Error::InvalidSet(format!("{}: size mismatch", s.set_id)));
        }
        let mut paths: Vec<&str> = s.signatures.iter().map(|r| r.path.as_str()).collect();
        paths.sort();
        paths.dedup();
        if paths.len() != s.n {
            return Err(Error::InvalidSet(format!("{}: repeated signature", s.set_id)));
        }
        let genuine = s.signatures.iter().filter(|r| r.genuine).count();
        let ok = match s.truth {
            Truth::SingleWriter => genuine == s.n && s.signatures.iter().all(|r| r.writer == s.target_writer),
            Truth::MultipleWriters => genuine >= 1 && genuine < s.n,
        };
        if !ok {
            return Err(Error::InvalidSet(format!("{}: composition does not match truth", s.set_id)));
        }
    }
    Ok(())
}

fn pick<'a>(rng: &mut ChaCha8Rng, paths: &'a [String], k: usize) -> Vec<&'a String> {
    paths.choose_multiple(rng, k).collect()
}

/// Builds the 400-set dataset. Single-writer sets hold `n` genuine
/// signatures of one writer; mixed sets hold `k ∈ 1..n−1` forgeries of a
/// writer plus `n − k` of that writer's genuine signatures.
pub fn build_dataset(index: &CorpusIndex, seed: u64) -> Result<DatasetManifest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = Vec::with_capacity(SET_SIZES.len() * 2 * SETS_PER_CLASS);
    for n in SET_SIZES {
        let single: Vec<&WriterEntry> = index.writers.iter().filter(|w| w.genuine_paths.len() >= n).collect();
        if single.is_empty() {
            return Err(Error::InsufficientCorpus(format!("no writer has {n} genuine signatures")));
        }
        for i in 0..SETS_PER_CLASS {
            let w = single[rng.gen_range(0..single.len())];
            let mut signatures: Vec<SignatureRef> = pick(&mut rng, &w.genuine_paths, n)
                .into_iter()
                .map(|p| SignatureRef { path: p.clone(), writer: w.writer_id.clone(), genuine: true })
                .collect();
            signatures.shuffle(&mut rng);
            sets.push(SetEntry {
                set_id: format!("n{n}_single_{i:02}"),
                n,
                truth: Truth::SingleWriter,
                target_writer: w.writer_id.clone(),
                signatures,
            });
        }
        for i in 0..SETS_PER_CLASS {
            let forgeries = rng.gen_range(1..n);
            let eligible: Vec<&WriterEntry> = index
                .writers
                .iter()
                .filter(|w| w.forgery_paths.len() >= forgeries && w.genuine_paths.len() >= n - forgeries)
                .collect();
            if eligible.is_empty() {
                return Err(Error::InsufficientCorpus(format!(
                    "no writer has {forgeries} forgeries and {} genuine signatures",
                    n - forgeries
                )));
            }
            let w = eligible[rng.gen_range(0..eligible.len())];
            let mut signatures: Vec<SignatureRef> = pick(&mut rng, &w.genuine_paths, n - forgeries)
                .into_iter()
                .map(|p| SignatureRef { path: p.clone(), writer: w.writer_id.clone(), genuine: true })
                .chain(
                    pick(&mut rng, &w.forgery_paths, forgeries)
                        .into_iter()
                        .map(|p| SignatureRef { path: p.clone(), writer: w.writer_id.clone(), genuine: false }),
                )
                .collect();
            signatures.shuffle(&mut rng);
            sets.push(SetEntry {
                set_id: format!("n{n}_mixed_{i:02}"),
                n,
                truth: Truth::MultipleWriters,
                target_writer: w.writer_id.clone(),
                signatures,
            });
        }
    }
    let manifest = DatasetManifest { schema_version: MANIFEST_SCHEMA, corpus_id: index.corpus_id(), seed, provenance: None, sets };
    manifest.validate()?;
    Ok(manifest)
}

/// Stratified split by (n, truth); `ratio` of each cell goes to the first
/// half. Sets keep their manifest order within each half.
pub fn split(manifest: &DatasetManifest, ratio: f64, seed: u64) -> (Vec<SetEntry>, Vec<SetEntry>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells: BTreeMap<(usize, Truth), Vec<usize>> = BTreeMap::new();
    for (i, s) in manifest.sets.iter().enumerate() {
        cells.entry((s.n, s.truth)).or_default().push(i);
    }
    let mut in_train = vec![false; manifest.sets.len()];
    for members in cells.values_mut() {
        members.shuffle(&mut rng);
        let take = (members.len() as f64 * ratio).round() as usize;
        for &i in &members[..take.min(members.len())] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) = manifest.sets.iter().cloned().zip(&in_train).partition(|(_, &t)| t);
    (train.into_iter().map(|(s, _)| s).collect(), test.into_iter().map(|(s, _)| s).collect())
}
