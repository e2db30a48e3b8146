//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. `ACCEPTANCE_ONLY=1,4,8` restricts the run to some criteria.

use std::collections::{BTreeMap, HashMap};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use setverify::classifier::{GridSpec, LssvmModel, MAX_RELATIVE_RESIDUAL};
use setverify::complexity::{kmeans, rank_subsets, spearman, KMeansConfig, COMPLEXITY_FEATURES, SUBSET_COUNT};
use setverify::config::RunConfig;
use setverify::datasets::{build_dataset, index_corpus, split, synth_corpus, CorpusIndex, Truth};
use setverify::distances::{
    dtw_with_length, edit_distance, fd_values, hungarian_chi2, levenshtein_bits, solve_assignment, DistanceKind,
    HistogramKind, DISTANCE_COUNT, FD_LEN,
};
use setverify::evaluation::{auc, eer, run_experiment, ExperimentSummary, ScoredOutcome};
use setverify::features::{
    FeatureBundle, FeatureKind, CARTESIAN_DIM, FEATURE_COUNT, LBP_DIM, LDP_DIM, POLAR_DIM, POSET_DIM,
    SHAPE_CONTEXT_DIM,
};
use setverify::methods::{
    eq1_transform, method1_matrix, method2_pairs, method2_verify, train_pair_model, Eq1Params, Fusion, Method,
    MethodConfig, SignatureStore,
};
use setverify::seed::derive_seed;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<Duration, String> {
    let t = start.elapsed();
    check(t < budget, || format!("took {t:.1?}, budget {budget:?}"))?;
    Ok(t)
}

fn dyadic(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-32..=32) as f64 / 8.0).collect()
}

// ---------------------------------------------------------------- 1

/// Cost and length of the lexicographically smallest (cost, length) path
/// over every warping path ending at (i, j).
fn dtw_paths(a: &[f64], b: &[f64], i: usize, j: usize) -> (f64, usize) {
    let here = (a[i] - b[j]).abs();
    if i == 0 && j == 0 {
        return (here, 1);
    }
    let mut best = (f64::INFINITY, usize::MAX);
    let mut consider = |(c, l): (f64, usize)| {
        if c < best.0 || (c == best.0 && l < best.1) {
            best = (c, l);
        }
    };
    if i > 0 {
        consider(dtw_paths(a, b, i - 1, j));
    }
    if j > 0 {
        consider(dtw_paths(a, b, i, j - 1));
    }
    if i > 0 && j > 0 {
        consider(dtw_paths(a, b, i - 1, j - 1));
    }
    (best.0 + here, best.1 + 1)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn edit_oracle(a: &[u8], b: &[u8], memo: &mut HashMap<(usize, usize), usize>) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    if let Some(&v) = memo.get(&(a.len(), b.len())) {
        return v;
    }
    let (ra, rb) = (&a[1..], &b[1..]);
    let v = (edit_oracle(ra, rb, memo) + usize::from(a[0] != b[0]))
        .min(edit_oracle(ra, b, memo) + 1)
        .min(edit_oracle(a, rb, memo) + 1);
    memo.insert((a.len(), b.len()), v);
    v
}

fn levels(a: &[f64], b: &[f64]) -> (Vec<u8>, Vec<u8>) {
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let q = |v: &f64| if hi > lo { ((16.0 * (v - lo) / (hi - lo)).floor() as u8).min(15) } else { 0 };
    (a.iter().map(q).collect(), b.iter().map(q).collect())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for t in 0..500 {
        let (n, m) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let (a, b) = (dyadic(&mut rng, n), dyadic(&mut rng, m));
        let got = dtw_with_length(&a, &b).map_err(|e| e.to_string())?;
        let want = dtw_paths(&a, &b, n - 1, m - 1);
        check(got == want, || format!("dtw pair {t}: {got:?} vs enumeration {want:?} for {a:?} {b:?}"))?;
    }
    for t in 0..500 {
        let n = rng.gen_range(1..=6);
        let cost = dyadic(&mut rng, n * n);
        let (total, assignment) = solve_assignment(&cost, n);
        let brute = permutations(n)
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let mut seen = assignment.clone();
        seen.sort();
        check(seen == (0..n).collect::<Vec<_>>(), || format!("matrix {t}: {assignment:?} is not a permutation"))?;
        let realized: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
        check(total == brute && realized == brute, || format!("matrix {t}: {total} / {realized} vs brute force {brute}"))?;
    }
    // The element-wise chi-squared assignment distance against its own
    // brute force (sums in different orders, hence relative 1e-12).
    for t in 0..200 {
        let n = rng.gen_range(1..=6);
        let (a, b) = (dyadic(&mut rng, n), dyadic(&mut rng, n));
        let term = |x: f64, y: f64| (x - y).powi(2) / (x.abs() + y.abs() + 1e-10);
        let brute = permutations(n)
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| term(a[i], b[j])).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let got = hungarian_chi2(&a, &b).map_err(|e| e.to_string())?;
        check((got - brute).abs() <= 1e-12 * brute.max(1.0), || format!("chi2 assignment {t}: {got} vs {brute}"))?;
    }
    for t in 0..500 {
        let (n, m) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let (qa, qb) = levels(&a, &b);
        let want = edit_oracle(&qa, &qb, &mut HashMap::new()) as f64;
        let got = edit_distance(&a, &b).map_err(|e| e.to_string())?;
        check(got == want, || format!("edit pair {t}: {got} vs oracle {want}"))?;
    }
    // The bit-parallel kernel on sequences longer than one machine word.
    for t in 0..40 {
        let (n, m) = (rng.gen_range(1..=200), rng.gen_range(1..=200));
        let a: Vec<u8> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let b: Vec<u8> = (0..m).map(|_| rng.gen_range(0..4)).collect();
        let mut memo = HashMap::new();
        let want = edit_oracle(&a, &b, &mut memo);
        check(levenshtein_bits(&a, &b) == want, || format!("long edit pair {t}"))?;
    }
    let t = within_budget(start, Duration::from_secs(10))?;
    Ok(format!("500 DTW pairs, 500 assignments, 500 edit pairs exact; {t:.1?} < 10 s"))
}

// ---------------------------------------------------------------- 2

fn random_bundle(rng: &mut ChaCha8Rng) -> FeatureBundle {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut v = |len: usize, non_negative: bool| -> Vec<f64> {
        (0..len)
            .map(|_| {
                let x: f64 = normal.sample(rng);
                if non_negative {
                    x.abs() * 10.0
                } else {
                    x
                }
            })
            .collect()
    };
    FeatureBundle {
        polar_radii: v(POLAR_DIM, true),
        polar_angles: v(POLAR_DIM, true),
        polar_counts: v(POLAR_DIM, true),
        cart_env_h: v(CARTESIAN_DIM, true),
        cart_env_v: v(CARTESIAN_DIM, true),
        cart_transitions: v(CARTESIAN_DIM, true),
        lbp: v(LBP_DIM, false),
        ldp: v(LDP_DIM, false),
        poset: v(POSET_DIM, true),
        shape_context: v(SHAPE_CONTEXT_DIM, true),
    }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bundles: Vec<FeatureBundle> = (0..1000).map(|_| random_bundle(&mut rng)).collect();
    let start = Instant::now();
    let bhattacharyya = DistanceKind::ALL
        .iter()
        .position(|&k| k == DistanceKind::Histogram(HistogramKind::Bhattacharyya))
        .unwrap();
    let mut worst_identity = 0.0f64;
    let mut worst_symmetry = 0.0f64;
    for i in 0..bundles.len() {
        let (a, b) = (&bundles[i], &bundles[(i + 1) % bundles.len()]);
        let same = fd_values(a, a).map_err(|e| e.to_string())?;
        let ab = fd_values(a, b).map_err(|e| e.to_string())?;
        let ba = fd_values(b, a).map_err(|e| e.to_string())?;
        for idx in 0..FD_LEN {
            let (f, d) = (idx / DISTANCE_COUNT, idx % DISTANCE_COUNT);
            let what = || format!("{} / {:?} on bundle {i}", FeatureKind::ALL[f].name(), DistanceKind::ALL[d]);
            let tol = if d == bhattacharyya { 1e-6 } else { 1e-9 };
            check(same[idx].abs() <= tol, || format!("identity {}: {}", what(), same[idx]))?;
            check(ab[idx] >= 0.0 && ba[idx] >= 0.0, || format!("negative distance {}: {}", what(), ab[idx]))?;
            let asym = (ab[idx] - ba[idx]).abs() / ab[idx].abs().max(1.0);
            check(asym <= 1e-9, || format!("symmetry {}: {} vs {}", what(), ab[idx], ba[idx]))?;
            if d != bhattacharyya {
                worst_identity = worst_identity.max(same[idx].abs());
            }
            worst_symmetry = worst_symmetry.max(asym);
        }
    }
    let t = within_budget(start, Duration::from_secs(30))?;
    Ok(format!(
        "{} kinds x {FEATURE_COUNT} features x 1000 bundles; worst identity {worst_identity:.1e}, worst relative asymmetry {worst_symmetry:.1e}; {t:.1?} < 30 s",
        DistanceKind::ALL.len()
    ))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut trained = 0;
    let mut worst = 0.0f64;
    for &sigma in &[1.0, 10.0, 100.0] {
        for &gamma in &[1.0, 31.6, 1000.0] {
            for _ in 0..10 {
                let n = rng.gen_range(6..60);
                let dim = rng.gen_range(1..40);
                let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
                let mut y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
                y.shuffle(&mut rng);
                for model in [LssvmModel::train(&x, &y, sigma, gamma), LssvmModel::train_one_class(&x, sigma, gamma)] {
                    let model = model.map_err(|e| format!("training at sigma={sigma} gamma={gamma}: {e}"))?;
                    check(model.residual < MAX_RELATIVE_RESIDUAL && MAX_RELATIVE_RESIDUAL == 1e-6, || {
                        format!("residual {} at sigma={sigma} gamma={gamma}", model.residual)
                    })?;
                    worst = worst.max(model.residual);
                    trained += 1;
                }
            }
        }
    }

    let xor = vec![vec![1.0, 1.0], vec![-1.0, -1.0], vec![1.0, -1.0], vec![-1.0, 1.0]];
    let labels = [1.0, 1.0, -1.0, -1.0];
    let model = LssvmModel::train(&xor, &labels, 1.0, 100.0).map_err(|e| e.to_string())?;
    let mut correct = 0;
    for (x, &y) in xor.iter().zip(&labels) {
        if model.decision(x).map_err(|e| e.to_string())?.signum() == y {
            correct += 1;
        }
    }
    check(correct == 4, || format!("XOR classified {correct}/4"))?;

    let mut worst_flip = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(4..40);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let mut y: Vec<f64> = (0..n).map(|i| if i < n / 2 { 1.0 } else { -1.0 }).collect();
        y.shuffle(&mut rng);
        let flipped: Vec<f64> = y.iter().map(|v| -v).collect();
        let (sigma, gamma) = (rng.gen_range(0.5..20.0), rng.gen_range(1.0..500.0));
        let m = LssvmModel::train(&x, &y, sigma, gamma).map_err(|e| e.to_string())?;
        let f = LssvmModel::train(&x, &flipped, sigma, gamma).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let probe: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let (p, q) = (m.decision(&probe).map_err(|e| e.to_string())?, f.decision(&probe).map_err(|e| e.to_string())?);
            worst_flip = worst_flip.max((p + q).abs());
        }
    }
    check(worst_flip <= 1e-6, || format!("label flip changes decisions by {worst_flip:e}"))?;

    let grid = GridSpec::standard(10, 0);
    let cfg = MethodConfig::default();
    for (name, values, lo, hi) in [
        ("sigma", &grid.sigma, 1.0, 100.0),
        ("gamma", &grid.gamma, 1.0, 1000.0),
        ("configured sigma", &cfg.sigma_grid.values(), 1.0, 100.0),
        ("configured gamma", &cfg.gamma_grid.values(), 1.0, 1000.0),
    ] {
        check(values.len() == 50 && values[0] == lo && values[49] == hi, || {
            format!("{name} grid has {} values from {:?} to {:?}", values.len(), values.first(), values.last())
        })?;
        let steps: Vec<f64> = values.windows(2).map(|w| (w[1] / w[0]).log10()).collect();
        let expected = (hi / lo).log10() / 49.0;
        check(steps.iter().all(|s| (s - expected).abs() < 1e-12), || format!("{name} grid is not log-uniform"))?;
    }
    Ok(format!(
        "{trained} trainings, worst residual {worst:.1e} < 1e-6; XOR 4/4; flip asymmetry {worst_flip:.1e}; grids [1,100] and [1,1000] x 50"
    ))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let p = Eq1Params::default();
    let cases = [(1.5, 2.5), (1.0, 1.0), (0.0, 0.0), (-1.0, -1.0), (-1.5, -2.5), (0.999, 0.999), (-0.999, -0.999)];
    for (s, want) in cases {
        let got = eq1_transform(s, &p);
        check(got == want, || format!("default transform of {s}: {got}, expected {want}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut scores: Vec<f64> = (0..10_000).map(|_| rng.gen_range(-4.0..4.0)).collect();
    scores.sort_by(f64::total_cmp);
    for params in [p, Eq1Params::literal()] {
        let mapped: Vec<f64> = scores.iter().map(|&s| eq1_transform(s, &params)).collect();
        check(mapped.windows(2).all(|w| w[0] <= w[1]), || format!("not monotone under {params:?}"))?;
    }
    let lit = Eq1Params::literal();
    check(lit.t1 == 1.0 && lit.t2 == 1.0 && lit.r1 == 1.0 && lit.r2 == 1.0, || format!("literal parameters {lit:?}"))?;
    for (s, want) in [(1.5, 2.5), (1.0, 1.0), (0.5, -0.5), (-2.0, -3.0)] {
        let got = eq1_transform(s, &lit);
        check(got == want, || format!("literal transform of {s}: {got}, expected {want}"))?;
    }
    Ok("three regions exact, monotone over 10000 scores, literal switch T1 = T2 = 1".into())
}

// ---------------------------------------------------------------- 5

fn criterion_5(corpus: &Corpus) -> Outcome {
    let manifest = build_dataset(&corpus.index, 5).map_err(|e| e.to_string())?;
    let small_grid = GridSpec { sigma: vec![3.0, 30.0], gamma: vec![10.0, 100.0], folds: 3, seed: 5 };
    let pairs = method2_pairs(&manifest.sets[..60]);
    let (model, _) = train_pair_model(&corpus.store, &pairs, &small_grid).map_err(|e| e.to_string())?;
    let mut report = Vec::new();
    for n in 2..=5 {
        let set = manifest.sets.iter().find(|s| s.n == n).ok_or(format!("no set of size {n}"))?;
        let ids: Vec<String> = set.signatures.iter().map(|s| s.path.clone()).collect();
        let (_, per_pair) = method2_verify(&corpus.store, &ids, &model, Fusion::Avg).map_err(|e| e.to_string())?;
        check(per_pair.len() == n * (n - 1) / 2, || format!("n = {n}: {} pair matrices", per_pair.len()))?;
        for p in &per_pair {
            let fd = corpus.store.fd(&p.a, &p.b).map_err(|e| e.to_string())?;
            check(fd.len() == FEATURE_COUNT * DISTANCE_COUNT, || format!("FD matrix with {} entries", fd.len()))?;
        }
        let m = method1_matrix(&corpus.store, &ids, &Eq1Params::default()).map_err(|e| e.to_string())?;
        check(m.values.len() == n * n, || format!("n = {n}: {} method-1 scores", m.values.len()))?;
        report.push(format!("n={n}: {} FD, {} scores", per_pair.len(), m.values.len()));
    }
    Ok(report.join("; "))
}

// ---------------------------------------------------------------- 6

fn exhaustive_wcss(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    loop {
        let mut used = vec![false; k];
        labels.iter().for_each(|&l| used[l] = true);
        if used.iter().all(|&u| u) {
            let mut total = 0.0;
            for c in 0..k {
                let members: Vec<&Vec<f64>> = points.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
                let dim = members[0].len();
                let centre: Vec<f64> =
                    (0..dim).map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64).collect();
                total += members.iter().map(|p| p.iter().zip(&centre).map(|(x, c)| (x - c).powi(2)).sum::<f64>()).sum::<f64>();
            }
            best = best.min(total);
        }
        // Next labeling in base k.
        let mut i = 0;
        while i < n && labels[i] == k - 1 {
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
        labels[i] += 1;
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let config = KMeansConfig::default();
    for t in 0..200 {
        let n = rng.gen_range(3..=8);
        let dim = rng.gen_range(1..=3);
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let got = kmeans(&points, &config, t).map_err(|e| e.to_string())?.wcss;
        let want = exhaustive_wcss(&points, 3);
        check((got - want).abs() <= 1e-9 * want.max(1.0), || format!("instance {t}: WCSS {got} vs optimum {want}"))?;
    }
    for t in 0..200 {
        let n = rng.gen_range(3..60);
        let mut a: Vec<f64> = (0..n).map(|i| i as f64 + rng.gen_range(0.0..0.5)).collect();
        let mut b: Vec<f64> = (0..n).map(|i| i as f64 * 3.0 + rng.gen_range(0.0..0.5)).collect();
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        // Ranks by counting, then the closed-form coefficient for distinct values.
        let rank = |v: &[f64], x: f64| v.iter().filter(|&&o| o < x).count() as f64 + 1.0;
        let d2: f64 = a.iter().zip(&b).map(|(&x, &y)| (rank(&a, x) - rank(&b, y)).powi(2)).sum();
        let nf = n as f64;
        let want = 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0));
        let got = spearman(&a, &b);
        check((got - want).abs() <= 1e-9, || format!("spearman case {t}: {got} vs {want}"))?;
    }

    // Feature 6 carries a three-tier writer level; every other feature is noise.
    let (writers, per) = (30, 10);
    let mut rows = Vec::new();
    let mut ids = Vec::new();
    for w in 0..writers {
        let tier = (w % 3) as f64;
        for _ in 0..per {
            let mut row = [0.0; COMPLEXITY_FEATURES];
            for (f, v) in row.iter_mut().enumerate() {
                *v = if f == 5 { 10.0 * tier + rng.gen_range(-0.5..0.5) } else { rng.gen_range(0.0..30.0) };
            }
            rows.push(row);
            ids.push(format!("w{w}"));
        }
    }
    let ranked = rank_subsets(&rows, &ids, &config, 6).map_err(|e| e.to_string())?;
    check(ranked.len() == SUBSET_COUNT && SUBSET_COUNT == 255, || format!("{} subsets ranked", ranked.len()))?;
    let mut labels: Vec<String> = ranked.iter().map(|r| r.label()).collect();
    labels.sort();
    labels.dedup();
    check(labels.len() == 255, || "duplicate subsets".into())?;
    let best_single = ranked.iter().find(|r| r.features.len() == 1).unwrap();
    check(best_single.features == vec![6], || format!("best single feature is {}", best_single.label()))?;
    Ok(format!(
        "200 k-means instances at the exhaustive optimum; 200 Spearman cases; 255 subsets; F6 first single feature (overall rank {})",
        best_single.rank_of_ranks
    ))
}

// ---------------------------------------------------------------- 7

fn criterion_7(corpus: &Corpus) -> Outcome {
    let manifest = build_dataset(&corpus.index, 7).map_err(|e| e.to_string())?;
    check(manifest.sets.len() == 400, || format!("{} sets", manifest.sets.len()))?;
    let cells = manifest.cell_counts();
    for n in 2..=5 {
        for truth in [Truth::SingleWriter, Truth::MultipleWriters] {
            let c = cells.get(&(n, truth)).copied().unwrap_or(0);
            check(c == 50, || format!("cell n={n} {}: {c} sets", truth.name()))?;
        }
        let size = manifest.sets.iter().filter(|s| s.n == n && s.signatures.len() == n).count();
        check(size == 100, || format!("{size} well-formed sets of size {n}"))?;
    }
    let (train, test) = split(&manifest, 0.5, derive_seed(7, "split"));
    for half in [&train, &test] {
        let mut counts: BTreeMap<(usize, Truth), usize> = BTreeMap::new();
        half.iter().for_each(|s| *counts.entry((s.n, s.truth)).or_default() += 1);
        check(counts.len() == 8 && counts.values().all(|&c| c == 25), || format!("split cells {counts:?}"))?;
    }
    let again = build_dataset(&index_corpus(&corpus.root).map_err(|e| e.to_string())?, 7).map_err(|e| e.to_string())?;
    let (a, b) = (manifest.to_json().map_err(|e| e.to_string())?, again.to_json().map_err(|e| e.to_string())?);
    check(a.as_bytes() == b.as_bytes(), || "rebuild under the same seed differs".into())?;
    Ok(format!("400 sets, 8 cells of 50, split 25/25 per cell, rebuild byte-identical ({} bytes)", a.len()))
}

// ---------------------------------------------------------------- 8

fn brute_eer(outcomes: &[ScoredOutcome]) -> f64 {
    let mut thresholds: Vec<f64> = outcomes.iter().map(|o| o.score).collect();
    thresholds.push(f64::INFINITY);
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let single = outcomes.iter().filter(|o| o.truth == Truth::SingleWriter).count() as f64;
    let multiple = outcomes.len() as f64 - single;
    let mut best = (f64::INFINITY, 0.0);
    for t in thresholds {
        let far = 100.0 * outcomes.iter().filter(|o| o.truth == Truth::MultipleWriters && o.score >= t).count() as f64 / multiple;
        let frr = 100.0 * outcomes.iter().filter(|o| o.truth == Truth::SingleWriter && o.score < t).count() as f64 / single;
        if (far - frr).abs() < best.0 {
            best = ((far - frr).abs(), 0.5 * (far + frr));
        }
    }
    best.1
}

fn mann_whitney_auc(outcomes: &[ScoredOutcome]) -> f64 {
    let pos: Vec<f64> = outcomes.iter().filter(|o| o.truth == Truth::SingleWriter).map(|o| o.score).collect();
    let neg: Vec<f64> = outcomes.iter().filter(|o| o.truth == Truth::MultipleWriters).map(|o| o.score).collect();
    let mut u = 0.0;
    for p in &pos {
        for n in &neg {
            u += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    100.0 * u / (pos.len() * neg.len()) as f64
}

fn random_outcomes(rng: &mut ChaCha8Rng, n: usize, shift: f64, discrete: bool) -> Vec<ScoredOutcome> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let truth = if i % 2 == 0 { Truth::SingleWriter } else { Truth::MultipleWriters };
        let centre = if truth == Truth::SingleWriter { shift } else { 0.0 };
        let raw: f64 = centre + Normal::new(0.0, 1.0).unwrap().sample(rng);
        out.push(ScoredOutcome { score: if discrete { raw.round() } else { raw }, truth });
    }
    out
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for t in 0..1000 {
        let n = rng.gen_range(2..120);
        let shift = rng.gen_range(-1.0..3.0);
        let outcomes = random_outcomes(&mut rng, n, shift, t % 3 == 0);
        let e = eer(&outcomes).map_err(|e| e.to_string())?.eer;
        let a = auc(&outcomes).map_err(|e| e.to_string())?;
        let (be, ba) = (brute_eer(&outcomes), mann_whitney_auc(&outcomes));
        check((e - be).abs() <= 1e-9, || format!("outcome set {t}: EER {e} vs sweep {be}"))?;
        check((a - ba).abs() <= 1e-9, || format!("outcome set {t}: AUC {a} vs Mann-Whitney {ba}"))?;
    }
    let separated: Vec<ScoredOutcome> = (0..40)
        .map(|i| ScoredOutcome {
            score: i as f64,
            truth: if i >= 20 { Truth::SingleWriter } else { Truth::MultipleWriters },
        })
        .collect();
    let (e, a) = (eer(&separated).map_err(|e| e.to_string())?.eer, auc(&separated).map_err(|e| e.to_string())?);
    check(e == 0.0 && a == 100.0, || format!("perfect separation gives EER {e}, AUC {a}"))?;
    let trials = 500;
    let mean: f64 = (0..trials)
        .map(|_| eer(&random_outcomes(&mut rng, 200, 0.0, false)).map(|p| p.eer).unwrap_or(f64::NAN))
        .sum::<f64>()
        / trials as f64;
    check((mean - 50.0).abs() <= 5.0, || format!("identical distributions give mean EER {mean}"))?;
    Ok(format!("1000 outcome sets match sweep and Mann-Whitney at 1e-9; separation 0/100; null mean EER {mean:.2}"))
}

// ---------------------------------------------------------------- 9, 10

struct Corpus {
    _dir: tempfile::TempDir,
    root: std::path::PathBuf,
    index: CorpusIndex,
    store: SignatureStore,
}

fn synthetic_corpus(dir: tempfile::TempDir, cfg: &RunConfig) -> Result<Corpus, String> {
    let root = dir.path().join("corpus");
    let index = synth_corpus(&root, &cfg.synth).map_err(|e| e.to_string())?;
    let store = cfg.method.store(Some(root.clone()), cfg.seed);
    Ok(Corpus { _dir: dir, root, index, store })
}

fn experiment(corpus: &Corpus, cfg: &RunConfig, store: &SignatureStore, reps: usize) -> Result<ExperimentSummary, String> {
    let quiet = |_: &str| {};
    run_experiment(store, &corpus.index, &Method::ALL, &cfg.method, reps, cfg.provenance().map_err(|e| e.to_string())?, &quiet)
        .map_err(|e| e.to_string())
}

fn criterion_9(corpus: &Corpus, summary: &ExperimentSummary) -> Outcome {
    check(corpus.index.writers.len() == 30, || format!("{} writers", corpus.index.writers.len()))?;
    check(summary.repetitions == 10, || format!("{} repetitions", summary.repetitions))?;
    let mean = |m: Method, f: Option<Fusion>| summary.report(m, f).map(|r| r.eer_mean).ok_or(format!("no report for {m:?} {f:?}"));
    let m2 = [mean(Method::M2, Some(Fusion::Min))?, mean(Method::M2, Some(Fusion::Max))?, mean(Method::M2, Some(Fusion::Avg))?];
    let m3 = [mean(Method::M3, Some(Fusion::Min))?, mean(Method::M3, Some(Fusion::Max))?, mean(Method::M3, Some(Fusion::Avg))?];
    mean(Method::M1, None)?;
    let table = summary.reports.iter().map(|r| format!("{} {:.2}", r.label(), r.eer_mean)).collect::<Vec<_>>().join(", ");
    let mut failures = Vec::new();
    if m2[2] > 25.0 {
        failures.push(format!("(a) method 2 avg EER {:.2} > 25", m2[2]));
    }
    for (name, v) in [("method 2", m2), ("method 3", m3)] {
        if v[2] > v[0] + 2.0 || v[2] > v[1] + 2.0 {
            failures.push(format!("(b) {name} avg {:.2} vs min {:.2} / max {:.2}", v[2], v[0], v[1]));
        }
    }
    if m3[2] > m2[2] + 2.0 {
        failures.push(format!("(c) method 3 avg {:.2} > method 2 avg {:.2} + 2", m3[2], m2[2]));
    }
    if let Some(r) = summary.reports.iter().find(|r| !(r.eer_mean < 45.0)) {
        failures.push(format!("(d) {} mean EER {:.2} >= 45", r.label(), r.eer_mean));
    }
    if failures.is_empty() {
        Ok(format!("mean EER over 10 repetitions: {table}"))
    } else {
        Err(format!("{}; mean EER: {table}", failures.join("; ")))
    }
}

fn criterion_10(corpus: &Corpus, cfg: &RunConfig, full: &ExperimentSummary) -> Outcome {
    // A cold store against the warm one: caches must not leak into results.
    let reps = 2;
    let warm = experiment(corpus, cfg, &corpus.store, reps)?.to_json().map_err(|e| e.to_string())?;
    let cold_store = cfg.method.store(Some(corpus.root.clone()), cfg.seed);
    let cold = experiment(corpus, cfg, &cold_store, reps)?.to_json().map_err(|e| e.to_string())?;
    check(warm.as_bytes() == cold.as_bytes(), || "rerun with a fresh store changed the report".into())?;
    let short = ExperimentSummary::from_json(&cold).map_err(|e| e.to_string())?;
    for (a, b) in short.reports.iter().zip(&full.reports) {
        check(a.repetitions[..] == b.repetitions[..reps], || format!("{}: repetitions differ from the full run", a.label()))?;
    }
    check(short.provenance == full.provenance, || "provenance differs".into())?;
    Ok(format!("{reps}-repetition reruns byte-identical ({} bytes), repetitions agree with the full run", cold.len()))
}

// ---------------------------------------------------------------- main

fn main() -> ExitCode {
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let wanted = |c: usize| only.as_ref().map_or(true, |o| o.contains(&c));

    let cfg = RunConfig::default();
    let needs_corpus = [5, 7, 9, 10].iter().any(|&c| wanted(c));
    let corpus = if needs_corpus {
        match tempfile::tempdir().map_err(|e| e.to_string()).and_then(|d| synthetic_corpus(d, &cfg)) {
            Ok(c) => Some(c),
            Err(e) => {
                println!("FAIL synthetic corpus: {e}");
                return ExitCode::FAILURE;
            }
        }
    } else {
        None
    };
    let full = if wanted(9) || wanted(10) {
        let c = corpus.as_ref().unwrap();
        Some(experiment(c, &cfg, &c.store, cfg.repetitions))
    } else {
        None
    };

    let mut failed = 0;
    let mut report = |n: usize, title: &str, run: &dyn Fn() -> Outcome| {
        if !wanted(n) {
            return;
        }
        let start = Instant::now();
        let outcome = run();
        let t = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS criterion {n:>2} {title}: {detail} [{t:.1?}]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n:>2} {title}: {detail} [{t:.1?}]");
            }
        }
    };
    let c = || corpus.as_ref().unwrap();
    let full_run = || full.as_ref().unwrap().as_ref().map_err(|e| format!("experiment failed: {e}"));

    report(1, "distance oracles", &criterion_1);
    report(2, "distance axioms", &criterion_2);
    report(3, "LS-SVM", &criterion_3);
    report(4, "score displacement", &criterion_4);
    report(5, "combinatorics", &|| criterion_5(c()));
    report(6, "complexity", &criterion_6);
    report(7, "dataset manifest", &|| criterion_7(c()));
    report(8, "metrics", &criterion_8);
    report(9, "end-to-end synthetic experiment", &|| criterion_9(c(), full_run()?));
    report(10, "reproducibility", &|| criterion_10(c(), &cfg, full_run()?));

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
