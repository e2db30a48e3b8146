//! `setverify`: build datasets, train models, verify sets of signatures and
//! run evaluation experiments from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use setverify::config::RunConfig;
use setverify::methods::{Eq1Params, Fusion, Method};

#[derive(Parser, Debug)]
#[command(name = "setverify", version, about = "Common-authorship verification for sets of signature images")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true, env = "SETVERIFY_THREADS")]
    pub threads: Option<usize>,
    /// Method: 1, 2, 3 or all.
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Pair-score fusion for methods 2 and 3: min, max or avg.
    #[arg(long, global = true)]
    pub fusion: Option<String>,
    /// Use T1 = T2 = 1 for the Method-1 score displacement.
    #[arg(long, global = true)]
    pub eq1_literal: bool,
    /// Write every synthetic duplicate as PNG into this directory.
    #[arg(long, global = true)]
    pub dump_duplicates: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic corpus of genuine signatures and forgeries.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        writers: Option<usize>,
    },
    /// Build the 400-set dataset manifest from a corpus.
    Build {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the selected methods on the sets of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Bundle directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Train on the training half of a seeded split only.
        #[arg(long)]
        train_half: bool,
    },
    /// Score a set of 2 to 5 signature images and print a JSON verdict.
    Verify {
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// Signature images of the set.
        #[arg(long = "set", num_args = 1.., required = true)]
        set: Vec<PathBuf>,
    },
    /// Repeated train/test experiment; writes the report and DET curves.
    Evaluate {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Probit-scaled axes in the DET plot.
        #[arg(long)]
        normal_deviate: bool,
    },
    /// Complexity-feature analysis.
    Complexity {
        #[command(subcommand)]
        action: ComplexityAction,
    },
    /// Error rates of Likert judgements read from CSV `set_id,truth,likert`.
    Likert {
        #[arg(long)]
        responses: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum ComplexityAction {
    /// Rank all 255 feature subsets by clustering quality on genuine signatures.
    Rank {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `1`, `2`, `3`, `all` or a comma list.
pub fn parse_methods(s: &str) -> setverify::Result<Vec<Method>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    let mut v = s.split(',').map(|m| Method::parse(m.trim())).collect::<setverify::Result<Vec<_>>>()?;
    v.sort();
    v.dedup();
    Ok(v)
}

/// Loads the configuration file, if any, then applies flag overrides.
pub fn resolve_config(g: &GlobalArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(m) = &g.method {
        cfg.methods = parse_methods(m)?;
    }
    if let Some(f) = &g.fusion {
        cfg.method.fusion = Fusion::parse(f)?;
    }
    if g.eq1_literal {
        cfg.method.eq1 = Eq1Params::literal();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// 1 for requests that can never succeed as written, 2 for failures caused
/// by the data.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<setverify::Error>() {
        Some(e) if !e.is_data_error() => 1,
        Some(_) => 2,
        None if err.downcast_ref::<commands::UsageError>().is_some() => 1,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
