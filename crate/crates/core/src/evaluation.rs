//! Error rates, DET curves, EER and AUC of scored sets, the repeated
//! train/test experiment, and error rates of human Likert judgements.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::datasets::{build_dataset, split, CorpusIndex, Truth};
use crate::error::{Error, Result};
use crate::methods::{score_set, train_bundle, Fusion, Method, MethodConfig, Provenance, SignatureStore};
use crate::seed::derive_seed;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredOutcome {
    pub score: f64,
    pub truth: Truth,
}

fn class_counts(outcomes: &[ScoredOutcome]) -> Result<(usize, usize)> {
    let single = outcomes.iter().filter(|o| o.truth == Truth::SingleWriter).count();
    let multiple = outcomes.len() - single;
    if single == 0 || multiple == 0 {
        return Err(Error::OneClassOnly);
    }
    if outcomes.iter().any(|o| !o.score.is_finite()) {
        return Err(Error::DegenerateData("non-finite score".into()));
    }
    Ok((single, multiple))
}

/// `(FAR, FRR)` in percent. A set is accepted as single-writer when its
/// score reaches the threshold.
pub fn far_frr(outcomes: &[ScoredOutcome], threshold: f64) -> Result<(f64, f64)> {
    let (single, multiple) = class_counts(outcomes)?;
    let fa = outcomes.iter().filter(|o| o.truth == Truth::MultipleWriters && o.score >= threshold).count();
    let fr = outcomes.iter().filter(|o| o.truth == Truth::SingleWriter && o.score < threshold).count();
    Ok((100.0 * fa as f64 / multiple as f64, 100.0 * fr as f64 / single as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// Candidate thresholds in ascending order: one below every score, the
/// midpoints between consecutive distinct scores, one above every score.
pub fn candidate_thresholds(outcomes: &[ScoredOutcome]) -> Vec<f64> {
    let mut s: Vec<f64> = outcomes.iter().map(|o| o.score).collect();
    s.sort_by(f64::total_cmp);
    s.dedup();
    if s.is_empty() {
        return Vec::new();
    }
    let mut t = Vec::with_capacity(s.len() + 1);
    t.push(s[0] - 1.0);
    t.extend(s.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    t.push(s[s.len() - 1] + 1.0);
    t
}

/// FAR and FRR at every candidate threshold, ascending in threshold, so FAR
/// never increases and FRR never decreases along the list.
pub fn det_points(outcomes: &[ScoredOutcome]) -> Result<Vec<DetPoint>> {
    let (single, multiple) = class_counts(outcomes)?;
    let mut sorted: Vec<ScoredOutcome> = outcomes.to_vec();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));
    let mut points = Vec::new();
    let (mut below_single, mut below_multiple, mut k) = (0usize, 0usize, 0usize);
    for t in candidate_thresholds(outcomes) {
        while k < sorted.len() && sorted[k].score < t {
            match sorted[k].truth {
                Truth::SingleWriter => below_single += 1,
                Truth::MultipleWriters => below_multiple += 1,
            }
            k += 1;
        }
        points.push(DetPoint {
            threshold: t,
            far: 100.0 * (multiple - below_multiple) as f64 / multiple as f64,
            frr: 100.0 * below_single as f64 / single as f64,
        });
    }
    Ok(points)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EerPoint {
    /// `(FAR + FRR) / 2` at the threshold, percent.
    pub eer: f64,
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// Threshold with the smallest |FAR − FRR|; ties go to the lowest threshold.
pub fn eer(outcomes: &[ScoredOutcome]) -> Result<EerPoint> {
    let mut best: Option<DetPoint> = None;
    for p in det_points(outcomes)? {
        if best.map_or(true, |b| (p.far - p.frr).abs() < (b.far - b.frr).abs()) {
            best = Some(p);
        }
    }
    let b = best.expect("at least two candidate thresholds");
    Ok(EerPoint { eer: 0.5 * (b.far + b.frr), threshold: b.threshold, far: b.far, frr: b.frr })
}

/// Area under the ROC curve (true-accept rate against false-accept rate),
/// trapezoidal, in percent.
pub fn auc(outcomes: &[ScoredOutcome]) -> Result<f64> {
    let pts = det_points(outcomes)?;
    // Descending threshold walks the ROC from (0, 0) to (1, 1).
    let mut area = 0.0;
    for w in pts.windows(2).rev() {
        let (hi, lo) = (w[1], w[0]);
        let (x0, x1) = (hi.far / 100.0, lo.far / 100.0);
        let (y0, y1) = (1.0 - hi.frr / 100.0, 1.0 - lo.frr / 100.0);
        area += (x1 - x0) * (y0 + y1) / 2.0;
    }
    Ok(100.0 * area)
}

pub fn det_csv(points: &[DetPoint]) -> String {
    let mut s = String::from("threshold,far,frr\n");
    for p in points {
        writeln!(s, "{},{},{}", p.threshold, p.far, p.frr).unwrap();
    }
    s
}

/// DET curve as a standalone SVG. With `normal_deviate` both axes are
/// probit-scaled (rates clipped to 0.1–99.9%), otherwise linear in percent.
pub fn det_svg(curves: &[(String, Vec<DetPoint>)], normal_deviate: bool) -> String {
    const SIZE: f64 = 480.0;
    const MARGIN: f64 = 56.0;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let (lo, hi) = if normal_deviate { (normal.inverse_cdf(0.001), normal.inverse_cdf(0.999)) } else { (0.0, 100.0) };
    let axis = |pct: f64| -> f64 {
        let v = if normal_deviate { normal.inverse_cdf((pct / 100.0).clamp(0.001, 0.999)) } else { pct };
        (v - lo) / (hi - lo) * SIZE
    };
    let colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];
    let total = SIZE + 2.0 * MARGIN;
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<g transform="translate({MARGIN},{MARGIN})" font-family="sans-serif" font-size="11">"#).unwrap();
    writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#).unwrap();
    let ticks: &[f64] = if normal_deviate { &[0.1, 1.0, 5.0, 20.0, 50.0, 80.0, 95.0, 99.0, 99.9] } else { &[0.0, 20.0, 40.0, 60.0, 80.0, 100.0] };
    for &t in ticks {
        let p = axis(t);
        writeln!(s, r##"<line x1="{p:.2}" y1="0" x2="{p:.2}" y2="{SIZE}" stroke="#ddd"/><text x="{p:.2}" y="{:.2}" text-anchor="middle">{t}</text>"##, SIZE + 16.0).unwrap();
        let q = SIZE - p;
        writeln!(s, r##"<line x1="0" y1="{q:.2}" x2="{SIZE}" y2="{q:.2}" stroke="#ddd"/><text x="-6" y="{:.2}" text-anchor="end">{t}</text>"##, q + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">FAR (%)</text>"#, SIZE / 2.0, SIZE + 36.0).unwrap();
    writeln!(s, r#"<text transform="translate(-40,{:.2}) rotate(-90)" text-anchor="middle">FRR (%)</text>"#, SIZE / 2.0).unwrap();
    for (i, (name, points)) in curves.iter().enumerate() {
        let colour = colours[i % colours.len()];
        let coords: Vec<String> =
            points.iter().map(|p| format!("{:.2},{:.2}", axis(p.far), SIZE - axis(p.frr))).collect();
        writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, coords.join(" ")).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" fill="{colour}">{name}</text>"#, SIZE - 150.0, 16.0 + 14.0 * i as f64).unwrap();
    }
    s.push_str("</g>\n</svg>\n");
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub seed: u64,
    pub eer: f64,
    pub auc: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fusion: Option<Fusion>,
    pub repetitions: Vec<RepetitionResult>,
    pub eer_mean: f64,
    /// Sample standard deviation over repetitions; 0 for a single one.
    pub eer_std: f64,
    pub auc_mean: f64,
    pub auc_std: f64,
    /// DET points of the test outcomes pooled over all repetitions.
    pub det_points: Vec<DetPoint>,
}

impl ExperimentReport {
    pub fn label(&self) -> String {
        match self.fusion {
            Some(f) => format!("method {} ({})", self.method.number(), f.name()),
            None => format!("method {}", self.method.number()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub corpus_id: String,
    pub repetitions: usize,
    pub reports: Vec<ExperimentReport>,
}

impl ExperimentSummary {
    pub fn report(&self, method: Method, fusion: Option<Fusion>) -> Option<&ExperimentReport> {
        self.reports.iter().find(|r| r.method == method && r.fusion == fusion)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        if s.schema_version != REPORT_SCHEMA {
            return Err(Error::Format(format!("unsupported report schema {}", s.schema_version)));
        }
        Ok(s)
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, std)
}

/// Repeats: build a fresh dataset, split it in halves, train on one half and
/// score the other. Each repetition draws its dataset and split from its
/// own seed derived from the master seed, so repetitions run in parallel
/// and the report does not depend on scheduling.
pub fn run_experiment(
    store: &SignatureStore,
    index: &CorpusIndex,
    methods: &[Method],
    config: &MethodConfig,
    repetitions: usize,
    provenance: Provenance,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<ExperimentSummary> {
    if repetitions == 0 {
        return Err(Error::Config("at least one repetition is needed".into()));
    }
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let keys: Vec<(Method, Option<Fusion>)> = methods
        .iter()
        .flat_map(|&m| m.fusions().iter().map(move |&f| (m, (m != Method::M1).then_some(f))))
        .collect();
    type Key = (Method, Option<Fusion>);
    let per_rep = (0..repetitions)
        .into_par_iter()
        .map(|r| -> Result<BTreeMap<Key, (RepetitionResult, Vec<ScoredOutcome>)>> {
            let seed = derive_seed(provenance.seed, &format!("repetition-{r}"));
            let manifest = build_dataset(index, seed)?;
            let (train, test) = split(&manifest, 0.5, derive_seed(seed, "split"));
            progress(&format!("repetition {}/{}: training", r + 1, repetitions));
            let rep_prov = Provenance { seed, ..provenance.clone() };
            let bundle = train_bundle(store, &train, &methods, config, rep_prov)?;
            progress(&format!("repetition {}/{}: scoring", r + 1, repetitions));
            let mut outcomes: BTreeMap<Key, Vec<ScoredOutcome>> = BTreeMap::new();
            for &method in &methods {
                for set in &test {
                    let ids: Vec<String> = set.signatures.iter().map(|s| s.path.clone()).collect();
                    let scored = score_set(store, &bundle, &ids, method, Fusion::Avg)?;
                    match &scored.per_pair {
                        None => outcomes
                            .entry((method, None))
                            .or_default()
                            .push(ScoredOutcome { score: scored.score, truth: set.truth }),
                        Some(pairs) => {
                            let s: Vec<f64> = pairs.iter().map(|p| p.score).collect();
                            for f in Fusion::ALL {
                                outcomes
                                    .entry((method, Some(f)))
                                    .or_default()
                                    .push(ScoredOutcome { score: f.fuse(&s)?, truth: set.truth });
                            }
                        }
                    }
                }
            }
            outcomes
                .into_iter()
                .map(|(key, o)| {
                    let e = eer(&o)?;
                    let row = RepetitionResult { repetition: r, seed, eer: e.eer, auc: auc(&o)?, threshold: e.threshold };
                    Ok((key, (row, o)))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows: BTreeMap<Key, Vec<RepetitionResult>> = BTreeMap::new();
    let mut pooled: BTreeMap<Key, Vec<ScoredOutcome>> = BTreeMap::new();
    for rep in per_rep {
        for (key, (row, o)) in rep {
            rows.entry(key).or_default().push(row);
            pooled.entry(key).or_default().extend(o);
        }
    }

    let reports = keys
        .into_iter()
        .map(|key| {
            let reps = rows.remove(&key).unwrap_or_default();
            let (eer_mean, eer_std) = mean_std(&reps.iter().map(|r| r.eer).collect::<Vec<_>>());
            let (auc_mean, auc_std) = mean_std(&reps.iter().map(|r| r.auc).collect::<Vec<_>>());
            Ok(ExperimentReport {
                method: key.0,
                fusion: key.1,
                repetitions: reps,
                eer_mean,
                eer_std,
                auc_mean,
                auc_std,
                det_points: det_points(&pooled.remove(&key).unwrap_or_default())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentSummary { schema_version: REPORT_SCHEMA, provenance, corpus_id: index.corpus_id(), repetitions, reports })
}

/// Mapping of a 1–7 response to a decision; values strictly between the two
/// bounds count as confused.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LikertRule {
    /// Responses at or above this are "same writer".
    pub same_min: u8,
    /// Responses at or below this are "multiple writers".
    pub multiple_max: u8,
}

impl Default for LikertRule {
    fn default() -> Self {
        Self { same_min: 5, multiple_max: 3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LikertMetrics {
    /// Multiple-writer sets judged single-writer, percent of decided ones.
    pub fssr: f64,
    /// Single-writer sets judged multiple-writer, percent of decided ones.
    pub fmsr: f64,
    pub ace: f64,
    pub decided: usize,
    pub confused: usize,
}

#[derive(Debug, Deserialize)]
struct LikertRow {
    set_id: String,
    truth: String,
    likert: String,
}

fn parse_truth(s: &str) -> Option<Truth> {
    match s.trim().to_ascii_lowercase().as_str() {
        "single_writer" | "single" | "same" | "genuine" => Some(Truth::SingleWriter),
        "multiple_writers" | "multiple" | "mixed" => Some(Truth::MultipleWriters),
        _ => None,
    }
}

/// Error rates of judgements read from CSV `set_id,truth,likert` (header
/// required).
pub fn likert_metrics(csv_text: &str, rule: &LikertRule) -> Result<LikertMetrics> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(csv_text.as_bytes());
    let (mut same_judged_multiple, mut same_total) = (0usize, 0usize);
    let (mut multi_judged_same, mut multi_total) = (0usize, 0usize);
    let mut confused = 0;
    for (i, row) in reader.deserialize::<LikertRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::MalformedRow { line, reason: e.to_string() })?;
        if row.set_id.is_empty() {
            return Err(Error::MalformedRow { line, reason: "empty set id".into() });
        }
        let truth = parse_truth(&row.truth)
            .ok_or_else(|| Error::MalformedRow { line, reason: format!("unknown truth {:?}", row.truth) })?;
        let v: u8 = row
            .likert
            .parse()
            .ok()
            .filter(|v| (1..=7).contains(v))
            .ok_or_else(|| Error::MalformedRow { line, reason: format!("likert must be 1..7, got {:?}", row.likert) })?;
        let judged_same = if v >= rule.same_min {
            true
        } else if v <= rule.multiple_max {
            false
        } else {
            confused += 1;
            continue;
        };
        match truth {
            Truth::SingleWriter => {
                same_total += 1;
                same_judged_multiple += usize::from(!judged_same);
            }
            Truth::MultipleWriters => {
                multi_total += 1;
                multi_judged_same += usize::from(judged_same);
            }
        }
    }
    if same_total + multi_total == 0 {
        return Err(Error::AllConfused);
    }
    let rate = |k: usize, n: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
    let fssr = rate(multi_judged_same, multi_total);
    let fmsr = rate(same_judged_multiple, same_total);
    Ok(LikertMetrics { fssr, fmsr, ace: 0.5 * (fssr + fmsr), decided: same_total + multi_total, confused })
}

pub fn likert_metrics_file(path: impl AsRef<Path>, rule: &LikertRule) -> Result<LikertMetrics> {
    likert_metrics(&std::fs::read_to_string(path)?, rule)
}
