use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use setverify::complexity::{complexity_features, rank_subsets};
use setverify::config::RunConfig;
use setverify::datasets::{build_dataset, index_corpus, split, synth_corpus, CorpusIndex, DatasetManifest};
use setverify::evaluation::{det_csv, det_svg, likert_metrics_file, run_experiment};
use setverify::methods::{train_bundle, verify, MethodBundle, Provenance, SignatureStore};
use setverify::record::SignatureRecord;
use setverify::seed::derive_seed;

use crate::{parse_methods, resolve_config, Cli, Command, ComplexityAction, GlobalArgs};

/// A request that is wrong regardless of the data, such as a missing path.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn corpus_root(flag: &Option<PathBuf>, cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    flag.clone().or_else(|| cfg.corpus_root.clone()).ok_or_else(|| usage("no corpus given (--corpus or corpus_root)"))
}

fn bundle_dir(flag: &Option<PathBuf>, cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    flag.clone().or_else(|| cfg.bundle_dir.clone()).ok_or_else(|| usage("no bundle directory given (--out/--bundle or bundle_dir)"))
}

fn make_store(g: &GlobalArgs, cfg: &RunConfig, root: Option<PathBuf>) -> SignatureStore {
    let store = cfg.method.store(root, cfg.seed);
    match &g.dump_duplicates {
        Some(dir) => store.with_dump_dir(dir),
        None => store,
    }
}

fn provenance_comment(p: &Provenance) -> String {
    format!("# tool_version={} config_hash={} seed={}\n", p.tool_version, p.config_hash, p.seed)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let g = cli.global;
    if let Some(t) = g.threads {
        if t == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("starting worker pool")?;
    }
    let mut cfg = resolve_config(&g)?;
    match cli.command {
        Command::Synth { out, writers } => {
            if let Some(w) = writers {
                cfg.synth.writers = w;
            }
            if let Some(seed) = g.seed {
                cfg.synth.seed = seed;
            }
            let index = synth_corpus(&out, &cfg.synth)?;
            eprintln!("wrote {} writers to {}", index.writers.len(), out.display());
        }
        Command::Build { corpus, out } => {
            let index = index_corpus(corpus_root(&corpus, &cfg)?)?;
            let mut manifest = build_dataset(&index, cfg.seed)?;
            manifest.provenance = Some(cfg.provenance()?);
            write(&out, manifest.to_json()?)?;
            eprintln!("wrote {} sets to {}", manifest.sets.len(), out.display());
        }
        Command::Train { manifest, corpus, out, train_half } => {
            let manifest = DatasetManifest::load(&manifest).with_context(|| format!("reading {}", manifest.display()))?;
            let root = corpus_root(&corpus, &cfg)?;
            let index = index_corpus(&root)?;
            if index.corpus_id() != manifest.corpus_id {
                eprintln!("warning: manifest was built from a different corpus ({})", manifest.corpus_id);
            }
            let sets = if train_half {
                split(&manifest, 0.5, derive_seed(cfg.seed, "split")).0
            } else {
                manifest.sets.clone()
            };
            let dir = bundle_dir(&out, &cfg)?;
            let store = make_store(&g, &cfg, Some(root));
            let bundle = train_bundle(&store, &sets, &cfg.methods, &cfg.method, cfg.provenance()?)?;
            bundle.save(&dir)?;
            eprintln!("trained methods {:?} on {} sets into {}", cfg.methods, sets.len(), dir.display());
        }
        Command::Verify { bundle, set } => {
            let dir = bundle_dir(&bundle, &cfg)?;
            let bundle = MethodBundle::load(&dir).with_context(|| format!("loading bundle {}", dir.display()))?;
            let methods = match &g.method {
                Some(m) => parse_methods(m)?,
                None => bundle.meta.methods.clone(),
            };
            let mut bundle = bundle;
            bundle.meta.thresholds.extend(cfg.thresholds.clone());
            let store = bundle.meta.config.store(None, bundle.meta.provenance.seed);
            let store = match &g.dump_duplicates {
                Some(d) => store.with_dump_dir(d),
                None => store,
            };
            let ids: Vec<String> = set.iter().map(|p| p.to_string_lossy().into_owned()).collect();
            let fusion = cfg.method.fusion;
            let results = methods
                .iter()
                .map(|&m| verify(&store, &bundle, &ids, m, fusion))
                .collect::<setverify::Result<Vec<_>>>()?;
            let json = if results.len() == 1 {
                serde_json::to_string_pretty(&results[0])?
            } else {
                serde_json::to_string_pretty(&results)?
            };
            println!("{json}");
        }
        Command::Evaluate { corpus, out, repetitions, normal_deviate } => {
            if let Some(r) = repetitions {
                cfg.repetitions = r;
            }
            cfg.validate()?;
            let root = corpus_root(&corpus, &cfg)?;
            let index = index_corpus(&root)?;
            let store = make_store(&g, &cfg, Some(root));
            let provenance = cfg.provenance()?;
            let progress = |msg: &str| eprintln!("{msg}");
            let summary =
                run_experiment(&store, &index, &cfg.methods, &cfg.method, cfg.repetitions, provenance.clone(), &progress)?;
            write_reports(&out, &summary, &provenance, normal_deviate)?;
            print!("{}", summary_table(&summary));
        }
        Command::Complexity { action: ComplexityAction::Rank { corpus, out } } => {
            let root = corpus_root(&corpus, &cfg)?;
            let index = index_corpus(&root)?;
            let csv = complexity_rank_csv(&index, &cfg)?;
            write(&out, csv)?;
            eprintln!("wrote subset ranking to {}", out.display());
        }
        Command::Likert { responses } => {
            let m = likert_metrics_file(&responses, &cfg.likert)?;
            let json = serde_json::json!({ "metrics": m, "rule": cfg.likert, "provenance": cfg.provenance()? });
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
    }
    Ok(())
}

fn write_reports(
    out: &Path,
    summary: &setverify::evaluation::ExperimentSummary,
    provenance: &Provenance,
    normal_deviate: bool,
) -> anyhow::Result<()> {
    write(&out.join("report.json"), summary.to_json()?)?;
    let mut curves = Vec::new();
    for r in &summary.reports {
        let stem = match r.fusion {
            Some(f) => format!("det_m{}_{}", r.method.number(), f.name()),
            None => format!("det_m{}", r.method.number()),
        };
        write(&out.join(format!("{stem}.csv")), provenance_comment(provenance) + &det_csv(&r.det_points))?;
        curves.push((r.label(), r.det_points.clone()));
    }
    write(&out.join("det.svg"), det_svg(&curves, normal_deviate))
}

fn summary_table(summary: &setverify::evaluation::ExperimentSummary) -> String {
    let mut s = String::from("method              EER (%)          AUC (%)\n");
    for r in &summary.reports {
        writeln!(s, "{:<18}  {:6.2} ± {:5.2}   {:6.2} ± {:5.2}", r.label(), r.eer_mean, r.eer_std, r.auc_mean, r.auc_std)
            .unwrap();
    }
    s
}

/// Complexity features of every genuine signature, then the 255-subset
/// ranking as CSV.
pub fn complexity_rank_csv(index: &CorpusIndex, cfg: &RunConfig) -> anyhow::Result<String> {
    let items: Vec<(String, String)> = index
        .writers
        .iter()
        .flat_map(|w| w.genuine_paths.iter().map(move |p| (w.writer_id.clone(), p.clone())))
        .collect();
    let rows = items
        .par_iter()
        .map(|(_, p)| Ok(complexity_features(&SignatureRecord::load(index.resolve(p))?.binary).as_array()))
        .collect::<setverify::Result<Vec<_>>>()?;
    let writers: Vec<String> = items.into_iter().map(|(w, _)| w).collect();
    let ranked = rank_subsets(&rows, &writers, &cfg.method.kmeans, derive_seed(cfg.seed, "complexity-rank"))?;
    let mut csv = provenance_comment(&cfg.provenance()?);
    csv.push_str("rank,subset,consistency,spread,correlation,rank_consistency,rank_spread,rank_correlation,rank_sum\n");
    for r in &ranked {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.rank_of_ranks,
            r.label(),
            r.consistency,
            r.spread,
            r.correlation,
            r.rank_consistency,
            r.rank_spread,
            r.rank_correlation,
            r.rank_sum
        )
        .unwrap();
    }
    Ok(csv)
}
