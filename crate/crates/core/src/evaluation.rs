//! Benchmarks for explanation quality: a random-partition baseline, agreement
//! with H-statistic interactions, and the Information Ceiling fidelity score.

use ndarray::ArrayView1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureGrid};
use crate::error::{Result, VineError};
use crate::explain::{fit_stump_sorted, FitMetrics, SortedColumns};
use crate::interaction::HMatrix;
use crate::model::{predict, ModelOracle};
use crate::pipeline::{Analysis, FeatureAnalysis};
use crate::scalar::{self, Scalar};

/// Number of clusters in each random partition.
pub const BASELINE_CLUSTERS: usize = 5;
/// Interaction partners counted as "strong".
pub const TOP_INTERACTORS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBaseline {
    pub feature: usize,
    pub name: String,
    pub real: Vec<FitMetrics>,
    pub random: Vec<FitMetrics>,
    pub random_sizes: Vec<usize>,
    pub real_mean_accuracy: f64,
    pub random_mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub dataset: String,
    pub seed: u64,
    pub features: Vec<FeatureBaseline>,
    /// Means over every cluster of every feature.
    pub real_mean_accuracy: f64,
    pub random_mean_accuracy: f64,
    pub real_mean_f1: f64,
    pub random_mean_f1: f64,
}

fn to_f64_metrics<T: Scalar>(m: &FitMetrics<T>) -> FitMetrics {
    FitMetrics {
        accuracy: m.accuracy.as_f64(),
        precision: m.precision.as_f64(),
        recall: m.recall.as_f64(),
        f1: m.f1.as_f64(),
        cluster_size: m.cluster_size,
        matched_size: m.matched_size,
    }
}

/// Sizes of a uniformly random composition of `n` into `parts` positive
/// parts: sorted distinct cut points in `1..n`.
pub fn random_composition(n: usize, parts: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    assert!(parts >= 1 && n >= parts);
    let mut cuts: Vec<usize> = rand::seq::index::sample(rng, n - 1, parts - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    let mut sizes = Vec::with_capacity(parts);
    let mut last = 0;
    for c in cuts.into_iter().chain(std::iter::once(n)) {
        sizes.push(c - last);
        last = c;
    }
    sizes
}

/// Random partition of `0..n` into clusters of the given sizes.
pub fn random_partition(n: usize, parts: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let sizes = random_composition(n, parts, rng);
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(rng);
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for s in sizes {
        let mut members = rows[start..start + s].to_vec();
        members.sort_unstable();
        out.push(members);
        start += s;
    }
    out
}

/// For every analyzed feature, explains a random 5-way partition with the
/// same stump procedure and pairs its metrics with those of the feature's
/// real clusters (as explained before merging and filtering).
pub fn random_cluster_baseline<T: Scalar>(ds: &Dataset<T>, analysis: &Analysis<T>, seed: u64) -> Result<BaselineReport> {
    let n = ds.n_rows();
    if n < 2 * BASELINE_CLUSTERS {
        return Err(VineError::InvalidArgument(format!(
            "random baseline needs at least {} rows",
            2 * BASELINE_CLUSTERS
        )));
    }
    let sorted = SortedColumns::new(ds);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(analysis.features.len());
    for fa in &analysis.features {
        let partition = random_partition(n, BASELINE_CLUSTERS, &mut rng);
        let random_sizes = partition.iter().map(Vec::len).collect();
        let mut random = Vec::new();
        for members in &partition {
            match fit_stump_sorted(ds, &sorted, members) {
                Ok(p) => random.push(to_f64_metrics(&p.metrics)),
                Err(VineError::DegenerateSplit) => {}
                Err(e) => return Err(e),
            }
        }
        let real: Vec<FitMetrics> = fa.initial.iter().map(|c| to_f64_metrics(&c.predicate.metrics)).collect();
        features.push(FeatureBaseline {
            feature: fa.feature_index,
            name: ds.schema()[fa.feature_index].name.clone(),
            real_mean_accuracy: scalar::mean(real.iter().map(|m| m.accuracy)),
            random_mean_accuracy: scalar::mean(random.iter().map(|m| m.accuracy)),
            real,
            random,
            random_sizes,
        });
    }
    let all_real = || features.iter().flat_map(|f| f.real.iter());
    let all_random = || features.iter().flat_map(|f| f.random.iter());
    Ok(BaselineReport {
        dataset: ds.name().to_string(),
        seed,
        real_mean_accuracy: scalar::mean(all_real().map(|m| m.accuracy)),
        random_mean_accuracy: scalar::mean(all_random().map(|m| m.accuracy)),
        real_mean_f1: scalar::mean(all_real().map(|m| m.f1)),
        random_mean_f1: scalar::mean(all_random().map(|m| m.f1)),
        features,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrespondence {
    pub feature: usize,
    pub name: String,
    /// Split feature of each surviving cluster's explanation.
    pub explanation_features: Vec<usize>,
    pub top_interactors: Vec<usize>,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceReport {
    pub dataset: String,
    /// Fraction of explanations whose feature is a top-3 H interactor of
    /// the plotted feature.
    pub pct_top3: f64,
    /// `3 / K`: the chance rate.
    pub baseline: f64,
    pub hits: usize,
    pub total_clusters: usize,
    pub n_features: usize,
    pub features: Vec<FeatureCorrespondence>,
}

impl CorrespondenceReport {
    pub fn pct_top3_label(&self) -> String {
        percent_label(self.pct_top3)
    }

    pub fn baseline_label(&self) -> String {
        percent_label(self.baseline)
    }
}

/// Percentage with one decimal, e.g. `0.2307 -> "23.1%"`.
pub fn percent_label(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}

/// Chance rate of a random feature landing among the top three of `k`.
pub fn correspondence_baseline(k: usize) -> f64 {
    TOP_INTERACTORS as f64 / k as f64
}

pub fn hstat_correspondence<T: Scalar>(analysis: &Analysis<T>, hmatrix: &HMatrix<T>) -> Result<CorrespondenceReport> {
    let k = hmatrix.features.len();
    if k != analysis.n_features {
        return Err(VineError::InvalidArgument(format!(
            "H matrix covers {k} features, analysis has {}",
            analysis.n_features
        )));
    }
    let mut features = Vec::new();
    let (mut hits, mut total) = (0, 0);
    for fa in analysis.features.iter().filter(|f| !f.vine_curves.is_empty()) {
        let top: Vec<usize> = hmatrix
            .ranked_partners(fa.feature_index)
            .into_iter()
            .take(TOP_INTERACTORS)
            .collect();
        let explanation_features: Vec<usize> = fa.vine_curves.iter().map(|v| v.predicate.feature).collect();
        let feature_hits = explanation_features.iter().filter(|f| top.contains(f)).count();
        hits += feature_hits;
        total += explanation_features.len();
        features.push(FeatureCorrespondence {
            feature: fa.feature_index,
            name: hmatrix.features[fa.feature_index].clone(),
            explanation_features,
            top_interactors: top,
            hits: feature_hits,
        });
    }
    if total == 0 {
        return Err(VineError::NoClusters);
    }
    Ok(CorrespondenceReport {
        dataset: analysis.dataset_name.clone(),
        pct_top3: hits as f64 / total as f64,
        baseline: correspondence_baseline(k),
        hits,
        total_clusters: total,
        n_features: k,
        features,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub pdp: f64,
    pub vine: f64,
    pub ice: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCeiling {
    pub feature: usize,
    pub name: String,
    pub vine_curves: usize,
    pub n_multi_match: usize,
    pub n_no_match: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeilingReport {
    pub dataset: String,
    pub r2: MethodScores,
    /// (point, feature) pairs matching two or more predicates.
    pub n_multi_match: usize,
    /// (point, feature) pairs matching no predicate.
    pub n_no_match: usize,
    /// Model output has zero variance; every r2 is reported as 1.
    pub degenerate_variance: bool,
    pub n_points: usize,
    pub features: Vec<FeatureCeiling>,
}

/// Per-instance reconstructions behind the Information Ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct CeilingPredictions<T: Scalar = f64> {
    pub model: Vec<T>,
    pub pdp: Vec<T>,
    pub vine: Vec<T>,
    pub ice: Vec<T>,
    pub features: Vec<FeatureCeiling>,
}

/// Shifts a curve so its grid mean equals `level`, the grid mean of the
/// PDP. This is the additive reading of a centered curve: the level an
/// instance's other features contribute is removed, so summing one value per
/// feature does not count it `K` times. Averaging pinned ICE rows still gives
/// the PDP, and for an additive model every pinned row equals the PDP.
fn pinned_lookup<T: Scalar>(grid: &FeatureGrid<T>, curve: &[T], x: T, level: T) -> T {
    grid.lookup(curve, x) - scalar::mean(curve.iter().copied()) + level
}

/// Reads the VINE curve for one point: the mean of every matching cluster's
/// pinned centroid, or the PDP when none matches. Returns the value and the
/// match count.
fn vine_lookup<T: Scalar>(fa: &FeatureAnalysis<T>, row: ArrayView1<'_, T>, level: T) -> (T, usize) {
    let grid = &fa.curves.grid;
    let x = row[fa.feature_index];
    let mut sum = T::zero();
    let mut matched = 0;
    for v in fa.vine_curves.iter().filter(|v| v.predicate.matches(row)) {
        sum += pinned_lookup(grid, &v.centroid, x, level);
        matched += 1;
    }
    if matched == 0 {
        (grid.lookup(fa.curves.pdp.as_slice().unwrap(), x), 0)
    } else {
        (sum / T::from_count(matched), matched)
    }
}

/// Additive reconstructions: the mean prediction plus one curve value per
/// analysed feature, read at the instance's own feature value. ICE and VINE
/// curves are pinned to the PDP's level first.
pub fn ceiling_predictions<T: Scalar, O: ModelOracle<T> + ?Sized>(
    ds: &Dataset<T>,
    oracle: &O,
    analysis: &Analysis<T>,
) -> Result<CeilingPredictions<T>> {
    let n = ds.n_rows();
    let model = predict(oracle, ds.x().view())?.to_vec();
    let base = analysis.mean_prediction;
    let mut pdp = vec![base; n];
    let mut vine = vec![base; n];
    let mut ice = vec![base; n];
    let mut features = Vec::with_capacity(analysis.features.len());
    for fa in &analysis.features {
        let grid = &fa.curves.grid;
        let pdp_curve = fa.curves.pdp.as_slice().expect("contiguous pdp");
        let level = scalar::mean(pdp_curve.iter().copied());
        let mut stats = FeatureCeiling {
            feature: fa.feature_index,
            name: ds.schema()[fa.feature_index].name.clone(),
            vine_curves: fa.vine_curves.len(),
            n_multi_match: 0,
            n_no_match: 0,
        };
        for (i, row) in ds.x().rows().into_iter().enumerate() {
            let x = row[fa.feature_index];
            pdp[i] += grid.lookup(pdp_curve, x);
            let own = fa.curves.ice.row(i);
            ice[i] += pinned_lookup(grid, own.as_slice().expect("contiguous ice row"), x, level);
            let (value, matched) = vine_lookup(fa, row, level);
            vine[i] += value;
            match matched {
                0 => stats.n_no_match += 1,
                1 => {}
                _ => stats.n_multi_match += 1,
            }
        }
        features.push(stats);
    }
    Ok(CeilingPredictions {
        model,
        pdp,
        vine,
        ice,
        features,
    })
}

/// r2 of each curve family's additive reconstruction against the model.
pub fn information_ceiling<T: Scalar, O: ModelOracle<T> + ?Sized>(
    ds: &Dataset<T>,
    oracle: &O,
    analysis: &Analysis<T>,
) -> Result<CeilingReport> {
    let preds = ceiling_predictions(ds, oracle, analysis)?;
    let center = analysis.mean_prediction;
    let r2 = |approx: &[T]| scalar::r_squared(&preds.model, approx, center).map(|r| r.as_f64());
    let scores = match (r2(&preds.pdp), r2(&preds.vine), r2(&preds.ice)) {
        (Some(pdp), Some(vine), Some(ice)) => Some(MethodScores { pdp, vine, ice }),
        _ => None,
    };
    Ok(CeilingReport {
        dataset: ds.name().to_string(),
        degenerate_variance: scores.is_none(),
        r2: scores.unwrap_or(MethodScores {
            pdp: 1.0,
            vine: 1.0,
            ice: 1.0,
        }),
        n_multi_match: preds.features.iter().map(|f| f.n_multi_match).sum(),
        n_no_match: preds.features.iter().map(|f| f.n_no_match).sum(),
        n_points: ds.n_rows(),
        features: preds.features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_interaction, ColumnSchema, FeatureKind};
    use crate::interaction::h_matrix;
    use crate::model::FnOracle;
    use crate::pipeline::{analyze, VineConfig};
    use ndarray::{Array1, Array2};

    #[test]
    fn composition_is_positive_and_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [5usize, 10, 37, 1000] {
            let sizes = random_composition(n, 5, &mut rng);
            assert_eq!(sizes.len(), 5);
            assert!(sizes.iter().all(|&s| s > 0));
            assert_eq!(sizes.iter().sum::<usize>(), n);
        }
        let parts = random_partition(50, 5, &mut rng);
        let mut all: Vec<usize> = parts.concat();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn baseline_constants() {
        assert_eq!(percent_label(correspondence_baseline(10)), "30.0%");
        assert_eq!(percent_label(correspondence_baseline(13)), "23.1%");
        assert_eq!(percent_label(correspondence_baseline(11)), "27.3%");
    }

    fn truth_oracle() -> FnOracle<impl Fn(ArrayView1<f64>) -> f64 + Send + Sync> {
        FnOracle::new(4, |r: ArrayView1<f64>| r[0] + 2.0 * r[1] + 5.0 * r[2] * r[3])
    }

    #[test]
    fn baseline_is_deterministic_and_real_beats_random() {
        let ds: Dataset = synth_interaction(500, 2).unwrap();
        let oracle = truth_oracle();
        let analysis = analyze(&ds, &oracle, &VineConfig::default()).unwrap();
        let a = random_cluster_baseline(&ds, &analysis, 11).unwrap();
        let b = random_cluster_baseline(&ds, &analysis, 11).unwrap();
        assert_eq!(a, b);
        for f in &a.features {
            assert_eq!(f.random_sizes.iter().sum::<usize>(), 500);
            assert_eq!(f.random_sizes.len(), 5);
        }
        assert!(a.real_mean_accuracy.is_finite());
        let x3 = a.features.iter().find(|f| f.feature == 2).unwrap();
        assert!(x3.real_mean_accuracy > x3.random_mean_accuracy);
    }

    #[test]
    fn correspondence_counts_top_three() {
        let ds: Dataset = synth_interaction(400, 3).unwrap();
        let oracle = truth_oracle();
        let analysis = analyze(&ds, &oracle, &VineConfig::default()).unwrap();
        let hm = h_matrix(&ds, &oracle, 60, 1).unwrap();
        let report = hstat_correspondence(&analysis, &hm).unwrap();
        assert_eq!(report.baseline, 0.75);
        let x3 = report.features.iter().find(|f| f.feature == 2).unwrap();
        assert_eq!(x3.top_interactors[0], 3);
        assert!(x3.explanation_features.iter().all(|&f| f == 3));
        assert_eq!(x3.hits, x3.explanation_features.len());
    }

    #[test]
    fn correspondence_without_clusters_fails() {
        let ds: Dataset = synth_interaction(200, 3).unwrap();
        let oracle = FnOracle::new(4, |r: ArrayView1<f64>| r[0] + r[1]);
        let analysis = analyze(&ds, &oracle, &VineConfig::default()).unwrap();
        let hm = h_matrix(&ds, &oracle, 30, 1).unwrap();
        assert!(matches!(hstat_correspondence(&analysis, &hm), Err(VineError::NoClusters)));
    }

    fn grid_aligned(n: usize) -> Dataset {
        // few distinct levels so every value is a grid point
        let x = Array2::from_shape_fn((n, 3), |(i, j)| ((i * (j + 3) + j) % 7) as f64);
        let schema = (0..3).map(|j| ColumnSchema::new(format!("x{j}"), FeatureKind::Numeric)).collect();
        Dataset::new("add", schema, x, Array1::zeros(n)).unwrap()
    }

    #[test]
    fn additive_model_is_reconstructed_exactly() {
        let ds = grid_aligned(140);
        let oracle = FnOracle::new(3, |r: ArrayView1<f64>| 3.0 * r[0] - 2.0 * r[1] + r[2] * r[2]);
        let analysis = analyze(&ds, &oracle, &VineConfig::default()).unwrap();
        let report = information_ceiling(&ds, &oracle, &analysis).unwrap();
        assert!((report.r2.pdp - 1.0).abs() < 1e-9);
        assert!((report.r2.ice - 1.0).abs() < 1e-9);
        // nothing survives filtering, so VINE falls back to the PDP everywhere
        assert_eq!(analysis.total_vine_curves(), 0);
        assert_eq!(report.r2.vine, report.r2.pdp);
        assert_eq!(report.n_no_match, 140 * 3);
    }

    #[test]
    fn ice_lookup_on_grid_is_exact() {
        let ds = grid_aligned(70);
        let oracle = FnOracle::new(3, |r: ArrayView1<f64>| r[0] * r[1] + r[2]);
        let analysis = analyze(&ds, &oracle, &VineConfig::default()).unwrap();
        for fa in &analysis.features {
            for i in 0..ds.n_rows() {
                let x = ds.x()[[i, fa.feature_index]];
                let j = fa.curves.grid.values.iter().position(|&v| v == x).unwrap();
                let own = fa.curves.ice.row(i).to_vec();
                assert_eq!(fa.curves.grid.lookup(&own, x), fa.curves.ice[[i, j]]);
            }
        }
    }

    #[test]
    fn constant_model_is_degenerate() {
        let ds: Dataset = synth_interaction(100, 1).unwrap();
        let oracle = FnOracle::new(4, |_: ArrayView1<f64>| 2.5);
        let analysis = analyze(&ds, &oracle, &VineConfig::default()).unwrap();
        let report = information_ceiling(&ds, &oracle, &analysis).unwrap();
        assert!(report.degenerate_variance);
        assert_eq!(report.r2, MethodScores { pdp: 1.0, vine: 1.0, ice: 1.0 });
    }

    #[test]
    fn interaction_fixture_vine_beats_pdp() {
        let ds: Dataset = synth_interaction(500, 6).unwrap();
        let oracle = truth_oracle();
        let analysis = analyze(&ds, &oracle, &VineConfig::default()).unwrap();
        let report = information_ceiling(&ds, &oracle, &analysis).unwrap();
        assert!(report.r2.vine > report.r2.pdp, "{:?}", report.r2);
        assert!(report.r2.vine <= 1.0 && report.r2.pdp <= 1.0);
    }

    #[test]
    fn r2_is_shift_invariant() {
        let ds: Dataset = synth_interaction(300, 2).unwrap();
        let a = FnOracle::new(4, |r: ArrayView1<f64>| r[0] + 5.0 * r[2] * r[3]);
        let b = FnOracle::new(4, |r: ArrayView1<f64>| r[0] + 5.0 * r[2] * r[3] + 100.0);
        let ra = information_ceiling(&ds, &a, &analyze(&ds, &a, &VineConfig::default()).unwrap()).unwrap();
        let rb = information_ceiling(&ds, &b, &analyze(&ds, &b, &VineConfig::default()).unwrap()).unwrap();
        assert!((ra.r2.pdp - rb.r2.pdp).abs() < 1e-9);
        assert!((ra.r2.ice - rb.r2.ice).abs() < 1e-9);
    }
}
