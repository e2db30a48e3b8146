use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

const CONFIG: &str = r#"
seed = 3
repetitions = 2

[synth]
writers = 5
genuine_per = 5
forgeries_per = 5
seed = 3

[method]
set_folds = 3

[method.duplication]
count = 4

[method.sigma_grid]
lo_exp = 0
hi_exp = 2
count = 3

[method.gamma_grid]
lo_exp = 0
hi_exp = 3
count = 3
"#;

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn setverify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_setverify")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = setverify(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Corpus, manifest and an all-methods bundle, built once through the CLI.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let f = Fixture { dir: tempfile::tempdir().unwrap() };
        std::fs::write(f.path("run.toml"), CONFIG).unwrap();
        let cfg = f.path("run.toml");
        ok(&["--config", s(&cfg), "synth", "--out", s(&f.path("corpus"))]);
        ok(&["--config", s(&cfg), "build", "--corpus", s(&f.path("corpus")), "--out", s(&f.path("manifest.json"))]);
        ok(&[
            "--config",
            s(&cfg),
            "--method",
            "all",
            "train",
            "--manifest",
            s(&f.path("manifest.json")),
            "--corpus",
            s(&f.path("corpus")),
            "--out",
            s(&f.path("bundle")),
            "--train-half",
        ]);
        f
    })
}

fn first_set(f: &Fixture, n: usize) -> Vec<String> {
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(f.path("manifest.json")).unwrap()).unwrap();
    let set = manifest["sets"].as_array().unwrap().iter().find(|s| s["n"] == n).unwrap();
    set["signatures"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| s(&f.path("corpus").join(r["path"].as_str().unwrap())).to_string())
        .collect()
}

#[test]
fn help_and_version_succeed() {
    assert!(setverify(&["--help"]).status.success());
    assert!(setverify(&["--version"]).status.success());
}

#[test]
fn malformed_requests_exit_with_one() {
    assert_eq!(setverify(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(setverify(&["verify"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("a.png");
    // No bundle given anywhere.
    assert_eq!(setverify(&["verify", "--set", s(&img), s(&img)]).status.code(), Some(1));
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "colour = \"blue\"\n").unwrap();
    assert_eq!(setverify(&["--config", s(&cfg), "likert", "--responses", "x.csv"]).status.code(), Some(1));
    assert_eq!(setverify(&["--fusion", "median", "likert", "--responses", "x.csv"]).status.code(), Some(1));
}

#[test]
fn train_all_writes_every_model() {
    let f = fixture();
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(f.path("bundle/meta.json")).unwrap()).unwrap();
    let fallback = meta["method3_fallback"].as_array().unwrap().len();
    let mut names: Vec<String> = std::fs::read_dir(f.path("bundle"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for n in 2..=5 {
        assert!(names.contains(&format!("m1_n{n}.model")), "{names:?}");
    }
    for name in ["meta.json", "m2.model", "complexity.model"] {
        assert!(names.contains(&name.to_string()), "{names:?}");
    }
    let m3 = names.iter().filter(|n| n.starts_with("m3_")).count();
    assert_eq!(m3 + fallback, 6);
    assert_eq!(names.len(), 7 + m3);
}

#[test]
fn verify_prints_the_same_verdict_every_time() {
    let f = fixture();
    let set = first_set(f, 3);
    let mut args = vec!["verify", "--bundle", s(&f.path("bundle")).to_owned().leak(), "--set"];
    args.extend(set.iter().map(String::as_str));
    let a = ok(&args);
    let b = ok(&args);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let all = v.as_array().expect("all trained methods by default");
    assert_eq!(all.len(), 3);
    for r in all {
        let single = r["score"].as_f64().unwrap() >= r["threshold"].as_f64().unwrap();
        assert_eq!(r["decision"] == "single_writer", single);
        assert_eq!(r["n"], 3);
    }
    assert_eq!(all[0]["similarity"]["values"].as_array().unwrap().len(), 9);
    assert_eq!(all[1]["per_pair"].as_array().unwrap().len(), 3);

    let mut one = vec!["--method", "2", "--fusion", "min"];
    one.extend(&args);
    let r: serde_json::Value = serde_json::from_slice(&ok(&one).stdout).unwrap();
    assert_eq!(r["method"], "2");
    assert_eq!(r["fusion"], "min");
}

#[test]
fn unreadable_image_is_a_data_error() {
    let f = fixture();
    let missing = f.path("nowhere.png");
    let out = setverify(&["verify", "--bundle", s(&f.path("bundle")), "--set", s(&missing), s(&missing)]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn evaluate_reruns_are_byte_identical() {
    let f = fixture();
    let cfg = f.path("run.toml");
    let run = |out: &str, threads: &str| {
        ok(&[
            "--config",
            s(&cfg),
            "--method",
            "2",
            "--threads",
            threads,
            "evaluate",
            "--corpus",
            s(&f.path("corpus")),
            "--out",
            s(&f.path(out)),
        ]);
        std::fs::read(f.path(out).join("report.json")).unwrap()
    };
    let a = run("eval_a", "1");
    let b = run("eval_b", "2");
    assert_eq!(a, b);
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["repetitions"], 2);
    assert_eq!(report["reports"].as_array().unwrap().len(), 3);
    for fusion in ["min", "max", "avg"] {
        let csv = std::fs::read_to_string(f.path("eval_a").join(format!("det_m2_{fusion}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# tool_version="));
        assert_eq!(lines.next().unwrap(), "threshold,far,frr");
    }
    assert!(std::fs::read_to_string(f.path("eval_a").join("det.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn literal_displacement_flag_reaches_the_bundle() {
    let f = fixture();
    let out = f.path("bundle_literal");
    ok(&[
        "--config",
        s(&f.path("run.toml")),
        "--method",
        "1",
        "--eq1-literal",
        "train",
        "--manifest",
        s(&f.path("manifest.json")),
        "--corpus",
        s(&f.path("corpus")),
        "--out",
        s(&out),
        "--train-half",
    ]);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["eq1"]["t1"], 1.0);
    assert_eq!(meta["config"]["eq1"]["t2"], 1.0);
    let default: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(f.path("bundle/meta.json")).unwrap()).unwrap();
    assert_eq!(default["config"]["eq1"]["t2"], -1.0);
    assert_ne!(meta["provenance"]["config_hash"], default["provenance"]["config_hash"]);
}

#[test]
fn complexity_rank_lists_every_subset() {
    let f = fixture();
    let out = f.path("ranks.csv");
    ok(&["--config", s(&f.path("run.toml")), "complexity", "rank", "--corpus", s(&f.path("corpus")), "--out", s(&out)]);
    let csv = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with('#'));
    assert!(lines[1].starts_with("rank,subset,"));
    assert_eq!(lines.len(), 2 + 255);
    assert!(lines[2].starts_with("1,"));
}

#[test]
fn likert_reports_rates_and_rejects_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("r.csv");
    std::fs::write(
        &good,
        "set_id,truth,likert\na,single_writer,5\nb,single_writer,2\nc,multiple_writers,6\nd,multiple_writers,1\ne,single_writer,4\n",
    )
    .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&ok(&["likert", "--responses", s(&good)]).stdout).unwrap();
    assert_eq!(v["metrics"]["fssr"], 50.0);
    assert_eq!(v["metrics"]["fmsr"], 50.0);
    assert_eq!(v["metrics"]["confused"], 1);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "set_id,truth,likert\na,single_writer,nine\n").unwrap();
    assert_eq!(setverify(&["likert", "--responses", s(&bad)]).status.code(), Some(2));
}
