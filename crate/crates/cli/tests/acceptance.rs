//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p vine-cli --test acceptance`.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vine_core::clustering::{agglomerative_cluster, merge_clusters, merge_qualifies, slope_features, ClusterAssignment};
use vine_core::dataset::{load_csv, quantile_grid, synth_interaction, ColumnSchema, EncodingOptions, FeatureKind};
use vine_core::evaluation::{correspondence_baseline, information_ceiling, percent_label, random_cluster_baseline};
use vine_core::explain::{best_split, fit_stump, fit_stump_sorted, Direction, FitMetrics, Predicate, SortedColumns};
use vine_core::interaction::h_statistic;
use vine_core::model::{train_gbm, train_gbm_traced, FnOracle, GbmParams};
use vine_core::pdcurves::{compute_ice, mean_prediction};
use vine_core::pipeline::{analyze, analyze_features, VineConfig};
use vine_core::{Dataset64 as Dataset, VineError};

type Check = Result<(bool, String), String>;

struct Suite {
    failures: usize,
}

impl Suite {
    fn run(&mut self, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Check) {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (mut pass, mut detail) = match outcome {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(limit) = limit {
            if elapsed > limit {
                pass = false;
                detail.push_str(&format!("; over the {:.0?} limit", limit));
            }
        }
        if !pass {
            self.failures += 1;
        }
        println!(
            "{} {name} [{:.2}s] {detail}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
}

fn err(e: VineError) -> String {
    e.to_string()
}

fn numeric_dataset(x: Array2<f64>) -> Dataset {
    let schema = (0..x.ncols())
        .map(|j| ColumnSchema::new(format!("x{}", j + 1), FeatureKind::Numeric))
        .collect();
    let n = x.nrows();
    Dataset::new("fixture", schema, x, Array1::zeros(n)).unwrap()
}

fn quadratic(r: &[f64]) -> f64 {
    1.0 + 2.0 * r[0] - r[1] + 0.5 * r[0] * r[0] + r[0] * r[1] - 0.3 * r[1] * r[1]
}

fn ice_pdp_substitution() -> Check {
    let x = ndarray::array![
        [0.5, 2.0],
        [-1.0, 0.0],
        [2.5, -1.5],
        [1.0, 1.0],
        [0.0, 3.0],
        [-2.0, 0.5]
    ];
    let ds = numeric_dataset(x.clone());
    let oracle = FnOracle::new(2, |r: ArrayView1<f64>| quadratic(r.as_slice().unwrap()));
    let n = x.nrows() as f64;
    let brute_mean: f64 = x.rows().into_iter().map(|r| quadratic(&r.to_vec())).sum::<f64>() / n;
    let mean = mean_prediction(&ds, &oracle).map_err(err)?;
    let mut worst = (mean - brute_mean).abs();
    for f in 0..2 {
        let grid = quantile_grid(&ds, f, 20).map_err(err)?;
        let curves = compute_ice(&ds, &oracle, &grid, mean).map_err(err)?;
        for (j, &v) in grid.values.iter().enumerate() {
            let mut col_sum = 0.0;
            for i in 0..x.nrows() {
                let mut row = x.row(i).to_vec();
                row[f] = v;
                let expect = quadratic(&row) - brute_mean;
                col_sum += expect;
                worst = worst.max((curves.ice[[i, j]] - expect).abs());
            }
            worst = worst.max((curves.pdp[j] - col_sum / n).abs());
        }
    }
    Ok((worst <= 1e-9, format!("max |diff| = {worst:.2e} (tol 1e-9)")))
}

fn additive_collapse() -> Check {
    // few distinct levels per column, so every value is a grid point
    let n = 140;
    let x = Array2::from_shape_fn((n, 3), |(i, j)| ((i * (j + 3) + j) % 7) as f64);
    let ds = numeric_dataset(x);
    let oracle = FnOracle::new(3, |r: ArrayView1<f64>| 3.0 * r[0] - 2.0 * r[1] + 0.25 * r[2] * r[2]);
    let analysis = analyze(&ds, &oracle, &VineConfig::default()).map_err(err)?;
    let report = information_ceiling(&ds, &oracle, &analysis).map_err(err)?;
    let (pdp, ice) = (report.r2.pdp, report.r2.ice);
    let pass = (pdp - 1.0).abs() <= 1e-6 && (ice - 1.0).abs() <= 1e-6;
    Ok((pass, format!("r2 pdp = {pdp:.9}, ice = {ice:.9} (tol 1e-6)")))
}

fn planted_recovery() -> Check {
    let mut hits = Vec::new();
    for seed in 0..10u64 {
        let ds: Dataset = synth_interaction(2000, seed).map_err(err)?;
        let model = train_gbm(&ds, &GbmParams::default()).map_err(err)?;
        let analysis = analyze_features(&ds, &model, &VineConfig::default(), &[2]).map_err(err)?;
        let fa = analysis.feature(2).ok_or("x3 was skipped")?;
        let best_f1 = fa
            .vine_curves
            .iter()
            .filter(|v| v.predicate.feature == 3)
            .map(|v| v.predicate.metrics.f1)
            .fold(f64::NEG_INFINITY, f64::max);
        if best_f1 >= 0.9 {
            hits.push(seed);
        }
    }
    Ok((hits.len() >= 9, format!("{}/10 seeds with an x4 predicate at f1 >= 0.9 (need 9)", hits.len())))
}

fn ceiling_ordering() -> Check {
    let mut wins = 0;
    let mut margins = Vec::new();
    for seed in 0..10u64 {
        let ds: Dataset = synth_interaction(1000, seed).map_err(err)?;
        let model = train_gbm(&ds, &GbmParams::default()).map_err(err)?;
        let analysis = analyze(&ds, &model, &VineConfig::default()).map_err(err)?;
        let r = information_ceiling(&ds, &model, &analysis).map_err(err)?;
        if r.r2.vine > r.r2.pdp {
            wins += 1;
        }
        margins.push(r.r2.vine - r.r2.pdp);
    }
    let min = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((wins >= 9, format!("r2(VINE) > r2(PDP) on {wins}/10 seeds (need 9), smallest margin {min:.4}")))
}

fn random_baseline() -> Check {
    let mut wins = 0;
    let mut real = 0.0;
    let mut random = 0.0;
    for seed in 0..100u64 {
        let ds: Dataset = synth_interaction(1000, seed).map_err(err)?;
        let model = train_gbm(&ds, &GbmParams::default()).map_err(err)?;
        let analysis = analyze(&ds, &model, &VineConfig::default()).map_err(err)?;
        let r = random_cluster_baseline(&ds, &analysis, seed).map_err(err)?;
        if r.real_mean_accuracy > r.random_mean_accuracy {
            wins += 1;
        }
        real += r.real_mean_accuracy;
        random += r.random_mean_accuracy;
    }
    Ok((
        wins >= 95,
        format!(
            "real > random on {wins}/100 trials (need 95); mean accuracy real {:.3}, random {:.3}",
            real / 100.0,
            random / 100.0
        ),
    ))
}

fn baseline_constants() -> Check {
    let got: Vec<String> = [10, 13, 11].iter().map(|&k| percent_label(correspondence_baseline(k))).collect();
    let want = ["30.0%", "23.1%", "27.3%"];
    Ok((got == want, format!("K=10,13,11 -> {}", got.join(", "))))
}

fn h_calibration() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 400;
    let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
    let ds = numeric_dataset(x);
    let additive = FnOracle::new(3, |r: ArrayView1<f64>| 3.0 * r[0] - 2.0 * r[1] + r[2] * r[2]);
    let product = FnOracle::new(3, |r: ArrayView1<f64>| r[0] * r[1]);
    let mut worst_additive: f64 = 0.0;
    let mut weakest_product = f64::INFINITY;
    for seed in 0..5u64 {
        for (j, k) in [(0, 1), (0, 2), (1, 2)] {
            let h = h_statistic(&ds, &additive, j, k, 100, seed).map_err(err)?;
            worst_additive = worst_additive.max(h.abs());
        }
        let h = h_statistic(&ds, &product, 0, 1, 100, seed).map_err(err)?;
        weakest_product = weakest_product.min(h);
    }
    Ok((
        worst_additive <= 1e-6 && weakest_product > 0.7,
        format!("additive max H = {worst_additive:.2e} (tol 1e-6), product min H = {weakest_product:.4} (need > 0.7), 5 seeds"),
    ))
}

fn diabetes_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/diabetes.csv")
}

fn gbm_fidelity() -> Check {
    let ds: Dataset = load_csv(diabetes_path(), "target", &EncodingOptions::default()).map_err(err)?;
    let params = GbmParams {
        n_trees: 300,
        min_leaf: 100,
        ..GbmParams::default()
    };
    let (_, trace) = train_gbm_traced(&ds, &params).map_err(err)?;
    let shape = format!("{} rows x {} features", ds.n_rows(), ds.n_features());
    let r2 = trace.r_squared;
    Ok((r2 >= 0.85, format!("training r2 = {r2:.4} (need >= 0.85), {shape}, min_leaf 100")))
}

fn gbm_small_leaf_note() {
    let Ok(ds) = load_csv::<f64>(diabetes_path(), "target", &EncodingOptions::default()) else {
        return;
    };
    let params = GbmParams {
        n_trees: 300,
        min_leaf: 10,
        ..GbmParams::default()
    };
    if let Ok((_, trace)) = train_gbm_traced(&ds, &params) {
        println!("INFO gbm-fidelity with min_leaf 10: training r2 = {:.4}", trace.r_squared);
    }
}

fn determinism() -> Check {
    let csv = diabetes_path();
    let run = |extra: &[&str]| -> Result<Vec<u8>, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_vine"))
            .arg("analyze")
            .arg(&csv)
            .args(["--target", "target", "--seed", "7", "--with-eval"])
            .args(extra)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("vine exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
        }
        Ok(out.stdout)
    };
    let first = run(&[])?;
    let second = run(&[])?;
    let single = run(&["--jobs", "1"])?;
    let same = first == second;
    let same_single = first == single;
    Ok((
        same && same_single && !first.is_empty(),
        format!(
            "{} bytes; repeat identical: {same}; --jobs 1 identical: {same_single}",
            first.len()
        ),
    ))
}

fn entropy(pos: usize, n: usize) -> f64 {
    if n == 0 || pos == 0 || pos == n {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

/// Information gain of splitting `members` by `x[f] <= t`, counted directly.
fn split_gain(x: &Array2<f64>, member: &[bool], f: usize, t: f64) -> f64 {
    let n = member.len();
    let pos = member.iter().filter(|&&m| m).count();
    let (mut ln, mut lp) = (0, 0);
    for i in 0..n {
        if x[[i, f]] <= t {
            ln += 1;
            lp += member[i] as usize;
        }
    }
    let (rn, rp) = (n - ln, pos - lp);
    entropy(pos, n) - ln as f64 / n as f64 * entropy(lp, ln) - rn as f64 / n as f64 * entropy(rp, rn)
}

fn brute_best_gain(x: &Array2<f64>, member: &[bool]) -> f64 {
    let mut best: f64 = 0.0;
    for f in 0..x.ncols() {
        for t in x.column(f).iter() {
            best = best.max(split_gain(x, member, f, *t));
        }
    }
    best
}

fn stump_optimality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut degenerate = 0;
    for _ in 0..50 {
        let n = rng.random_range(2..=200);
        let k = rng.random_range(1..=4);
        let levels = if rng.random_bool(0.5) { rng.random_range(2..=8) } else { 0 };
        let x = Array2::from_shape_fn((n, k), |_| {
            if levels > 0 {
                rng.random_range(0..levels) as f64
            } else {
                rng.random_range(-5.0..5.0)
            }
        });
        let p = rng.random_range(0.05..0.95);
        let member: Vec<bool> = (0..n).map(|_| rng.random_bool(p)).collect();
        let members: Vec<usize> = (0..n).filter(|&i| member[i]).collect();
        let ds = numeric_dataset(x.clone());
        let brute = brute_best_gain(&x, &member);
        let split = best_split(&ds, &SortedColumns::new(&ds), &member);
        match (split, fit_stump(&ds, &members)) {
            (Some(s), Ok(pred)) => {
                let realized = split_gain(&x, &member, pred.feature, pred.value);
                worst = worst.max((s.gain - brute).abs()).max((realized - brute).abs());
            }
            (None, Err(VineError::DegenerateSplit)) => {
                degenerate += 1;
                worst = worst.max(brute);
            }
            (s, p) => return Err(format!("split {s:?} disagrees with stump {p:?}")),
        }
    }
    Ok((
        worst <= 1e-12,
        format!("50 fixtures ({degenerate} without an informative split), max |gain - brute force| = {worst:.2e}"),
    ))
}

fn predicate(feature: usize, direction: Direction, value: f64) -> Predicate {
    Predicate {
        feature,
        direction,
        value,
        metrics: FitMetrics {
            accuracy: 1.0,
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            cluster_size: 0,
            matched_size: 0,
        },
    }
}

/// Two disjoint clusters (even and odd rows above x2 = 5) carrying the given
/// predicates; returns how many clusters survive merging.
fn merged_count(a: Predicate, b: Predicate) -> Result<usize, String> {
    let n = 101;
    let x = Array2::from_shape_fn((n, 3), |(i, j)| match j {
        0 => (i % 13) as f64,
        1 => i as f64 / 10.0,
        _ => ((i * 7) % n) as f64 / 10.0,
    });
    let ds = numeric_dataset(x);
    let oracle = FnOracle::new(3, |r: ArrayView1<f64>| r[0] + r[1] * r[2]);
    let mean = mean_prediction(&ds, &oracle).map_err(err)?;
    let curves = compute_ice(&ds, &oracle, &quantile_grid(&ds, 0, 10).map_err(err)?, mean).map_err(err)?;
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let mut assignment = ClusterAssignment::from_labels(&labels, &curves.ice);
    for c in &mut assignment.clusters {
        c.members.retain(|&i| ds.x()[[i, 1]] > 5.0);
    }
    let sorted = SortedColumns::new(&ds);
    let (merged, _) = merge_clusters(&ds, &sorted, &curves, assignment, vec![a, b], 0.05).map_err(err)?;
    Ok(merged.clusters.len())
}

fn merge_rule() -> Check {
    use Direction::{Gt, Le};
    let mut notes = Vec::new();
    let mut pass = true;
    let cases = [
        (predicate(1, Gt, 5.0), predicate(1, Gt, 5.2), true, "(x2 > 5.0, x2 > 5.2)"),
        (predicate(1, Gt, 5.0), predicate(1, Le, 5.0), false, "(x2 > 5.0, x2 <= 5.0)"),
        (predicate(1, Gt, 5.0), predicate(2, Gt, 5.0), false, "(x2 > 5.0, x3 > 5.0)"),
    ];
    for (a, b, expect, label) in cases {
        let rule = merge_qualifies(&a, &b, 10.0, 0.05);
        let count = merged_count(a, b)?;
        let ok = rule == expect && count == if expect { 1 } else { 2 };
        pass &= ok;
        notes.push(format!("{label} merged={rule} clusters={count}"));
    }

    // fixpoint over real pipelines, with a loose threshold so merges fire
    let mut fired = 0;
    let mut leftover = 0;
    for seed in 0..5u64 {
        let ds: Dataset = synth_interaction(600, seed).map_err(err)?;
        let oracle = FnOracle::new(4, |r: ArrayView1<f64>| r[0] + 2.0 * r[1] + 5.0 * r[2] * r[3]);
        let mean = mean_prediction(&ds, &oracle).map_err(err)?;
        let sorted = SortedColumns::new(&ds);
        for f in 0..3 {
            let curves = compute_ice(&ds, &oracle, &quantile_grid(&ds, f, 20).map_err(err)?, mean).map_err(err)?;
            let slopes = slope_features(&curves).map_err(err)?;
            let all = agglomerative_cluster(&slopes, &curves.ice, 10).map_err(err)?;
            let mut kept = ClusterAssignment {
                n_rows: all.n_rows,
                clusters: Vec::new(),
            };
            let mut preds = Vec::new();
            for c in all.clusters {
                if let Ok(p) = fit_stump_sorted(&ds, &sorted, &c.members) {
                    kept.clusters.push(c);
                    preds.push(p);
                }
            }
            for threshold in [0.05, 0.25] {
                let before = preds.len();
                let (after, out) =
                    merge_clusters(&ds, &sorted, &curves, kept.clone(), preds.clone(), threshold).map_err(err)?;
                fired += before - after.clusters.len();
                for i in 0..out.len() {
                    for j in i + 1..out.len() {
                        let (lo, hi) = ds.feature_range(out[i].feature);
                        if merge_qualifies(&out[i], &out[j], hi - lo, threshold) {
                            leftover += 1;
                        }
                    }
                }
            }
        }
    }
    pass &= leftover == 0 && fired > 0;
    notes.push(format!("fixpoint: {fired} merges fired, {leftover} qualifying pairs left"));
    Ok((pass, notes.join("; ")))
}

fn main() -> ExitCode {
    let mut suite = Suite { failures: 0 };
    let secs = Duration::from_secs;
    suite.run("ice-pdp-substitution", Some(secs(1)), ice_pdp_substitution);
    suite.run("additive-collapse", Some(secs(5)), additive_collapse);
    suite.run("planted-interaction-recovery", Some(secs(60)), planted_recovery);
    suite.run("ceiling-ordering", Some(secs(120)), ceiling_ordering);
    suite.run("random-baseline-separation", Some(secs(300)), random_baseline);
    suite.run("baseline-constants", None, baseline_constants);
    suite.run("h-statistic-calibration", Some(secs(30)), h_calibration);
    suite.run("gbm-fidelity", Some(secs(30)), gbm_fidelity);
    gbm_small_leaf_note();
    suite.run("determinism", None, determinism);
    suite.run("stump-optimality", None, stump_optimality);
    suite.run("merge-rule", None, merge_rule);
    if suite.failures == 0 {
        println!("all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", suite.failures);
        ExitCode::FAILURE
    }
}
