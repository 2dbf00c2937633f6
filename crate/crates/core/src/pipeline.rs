//! End-to-end analysis: curves, clusters, explanations and scores for every
//! feature of a dataset.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    agglomerative_cluster, filter_clusters, merge_clusters, slope_features, ClusterAssignment, FilterParams,
    DEFAULT_CLUSTERS, DEFAULT_MERGE_THRESHOLD,
};
use crate::dataset::{quantile_grid, Dataset, DEFAULT_GRID_SIZE};
use crate::error::{Result, VineError};
use crate::explain::{fit_stump_sorted, Predicate, SortedColumns};
use crate::interaction::{feature_scores, FeatureScores};
use crate::model::ModelOracle;
use crate::pdcurves::{compute_ice_batched, mean_prediction, BatchPolicy, CurveSet};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VineConfig {
    pub grid_size: usize,
    pub clusters: usize,
    pub merge_threshold: f64,
    pub filter: FilterParams,
    /// Cap on rows per oracle call; `None` batches a whole feature at once.
    pub max_batch_rows: Option<usize>,
}

impl Default for VineConfig {
    fn default() -> Self {
        VineConfig {
            grid_size: DEFAULT_GRID_SIZE,
            clusters: DEFAULT_CLUSTERS,
            merge_threshold: DEFAULT_MERGE_THRESHOLD,
            filter: FilterParams::default(),
            max_batch_rows: None,
        }
    }
}

/// A surviving cluster: its members, centroid curve and explanation.
#[derive(Debug, Clone, PartialEq)]
pub struct VineCurve<T: Scalar = f64> {
    pub members: Vec<usize>,
    pub centroid: Vec<T>,
    pub predicate: Predicate<T>,
}

/// A cluster as first explained, before merging and filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplainedCluster<T: Scalar = f64> {
    pub members: Vec<usize>,
    pub predicate: Predicate<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureAnalysis<T: Scalar = f64> {
    pub feature_index: usize,
    pub curves: CurveSet<T>,
    /// Clusters straight out of Ward clustering that admitted a predicate.
    pub initial: Vec<ExplainedCluster<T>>,
    pub vine_curves: Vec<VineCurve<T>>,
    pub scores: FeatureScores<T>,
}

impl<T: Scalar> FeatureAnalysis<T> {
    pub fn centroid_matrix(&self) -> Array2<T> {
        let m = self.curves.grid.len();
        let mut out = Array2::zeros((self.vine_curves.len(), m));
        for (i, v) in self.vine_curves.iter().enumerate() {
            for (j, &c) in v.centroid.iter().enumerate() {
                out[[i, j]] = c;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis<T: Scalar = f64> {
    pub dataset_name: String,
    pub n_rows: usize,
    pub n_features: usize,
    pub mean_prediction: T,
    /// Ascending by feature index; constant features are skipped.
    pub features: Vec<FeatureAnalysis<T>>,
    pub skipped: Vec<usize>,
}

impl<T: Scalar> Analysis<T> {
    pub fn feature(&self, index: usize) -> Option<&FeatureAnalysis<T>> {
        self.features.iter().find(|f| f.feature_index == index)
    }

    pub fn total_vine_curves(&self) -> usize {
        self.features.iter().map(|f| f.vine_curves.len()).sum()
    }
}

/// Runs the pipeline on every feature. Features are processed in parallel
/// on the current rayon pool.
pub fn analyze<T: Scalar, O: ModelOracle<T> + ?Sized>(
    ds: &Dataset<T>,
    oracle: &O,
    config: &VineConfig,
) -> Result<Analysis<T>> {
    let features: Vec<usize> = (0..ds.n_features()).collect();
    analyze_features(ds, oracle, config, &features)
}

pub fn analyze_features<T: Scalar, O: ModelOracle<T> + ?Sized>(
    ds: &Dataset<T>,
    oracle: &O,
    config: &VineConfig,
    features: &[usize],
) -> Result<Analysis<T>> {
    if config.clusters == 0 {
        return Err(VineError::InvalidArgument("cluster count must be positive".into()));
    }
    let mean = mean_prediction(ds, oracle)?;
    let sorted = SortedColumns::new(ds);
    let results: Vec<Option<FeatureAnalysis<T>>> = features
        .par_iter()
        .map(|&f| match analyze_feature(ds, oracle, config, &sorted, f, mean) {
            Err(VineError::ConstantFeature(_)) => {
                log::warn!("skipping constant feature `{}`", ds.schema()[f].name);
                Ok(None)
            }
            other => other.map(Some),
        })
        .collect::<Result<_>>()?;
    let skipped = features
        .iter()
        .zip(&results)
        .filter(|(_, r)| r.is_none())
        .map(|(&f, _)| f)
        .collect();
    Ok(Analysis {
        dataset_name: ds.name().to_string(),
        n_rows: ds.n_rows(),
        n_features: ds.n_features(),
        mean_prediction: mean,
        features: results.into_iter().flatten().collect(),
        skipped,
    })
}

fn analyze_feature<T: Scalar, O: ModelOracle<T> + ?Sized>(
    ds: &Dataset<T>,
    oracle: &O,
    config: &VineConfig,
    sorted: &SortedColumns,
    feature: usize,
    mean: T,
) -> Result<FeatureAnalysis<T>> {
    let grid = quantile_grid(ds, feature, config.grid_size)?;
    let policy = BatchPolicy {
        max_rows: config.max_batch_rows,
    };
    let curves = compute_ice_batched(ds, oracle, &grid, mean, policy)?;
    let slopes = slope_features(&curves)?;
    let k = config.clusters.min(ds.n_rows());
    let assignment = agglomerative_cluster(&slopes, &curves.ice, k)?;

    let mut explained = ClusterAssignment {
        n_rows: assignment.n_rows,
        clusters: Vec::new(),
    };
    let mut predicates = Vec::new();
    for cluster in assignment.clusters {
        match fit_stump_sorted(ds, sorted, &cluster.members) {
            Ok(p) => {
                explained.clusters.push(cluster);
                predicates.push(p);
            }
            Err(VineError::DegenerateSplit) => continue,
            Err(e) => return Err(e),
        }
    }
    let initial = explained
        .clusters
        .iter()
        .zip(&predicates)
        .map(|(c, p)| ExplainedCluster {
            members: c.members.clone(),
            predicate: p.clone(),
        })
        .collect();

    let (merged, predicates) = merge_clusters(
        ds,
        sorted,
        &curves,
        explained,
        predicates,
        T::lit(config.merge_threshold),
    )?;
    let (kept, predicates) = filter_clusters(merged, predicates, &curves, &config.filter);
    let centroids = kept.centroid_matrix(curves.grid.len());
    let scores = feature_scores(&curves, &centroids);
    let vine_curves = kept
        .clusters
        .into_iter()
        .zip(predicates)
        .map(|(c, predicate)| VineCurve {
            members: c.members,
            centroid: c.centroid.to_vec(),
            predicate,
        })
        .collect();
    Ok(FeatureAnalysis {
        feature_index: feature,
        curves,
        initial,
        vine_curves,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth_interaction;
    use crate::explain::Direction;
    use crate::model::FnOracle;
    use ndarray::ArrayView1;

    #[test]
    fn planted_interaction_with_true_function() {
        let ds: Dataset = synth_interaction(600, 1).unwrap();
        let oracle = FnOracle::new(4, |r: ArrayView1<f64>| r[0] + 2.0 * r[1] + 5.0 * r[2] * r[3]);
        let analysis = analyze(&ds, &oracle, &VineConfig::default()).unwrap();
        let x3 = analysis.feature(2).unwrap();
        assert!(!x3.vine_curves.is_empty());
        for v in &x3.vine_curves {
            assert_eq!(v.predicate.feature, 3);
            assert!(v.predicate.metrics.f1 > 0.99);
        }
        let on = x3.vine_curves.iter().find(|v| v.predicate.direction == Direction::Gt).unwrap();
        assert!(on.centroid.last().unwrap() - on.centroid[0] > 4.5);
        // additive features have identical ICE slopes: nothing distinguishes a cluster
        assert!(analysis.feature(0).unwrap().vine_curves.is_empty());
        assert!(analysis.feature(1).unwrap().vine_curves.is_empty());
        assert_eq!(analysis.feature(0).unwrap().scores.interaction_strength, 0.0);
        assert!(x3.scores.interaction_strength > 0.0);
    }

    #[test]
    fn constant_features_are_skipped() {
        let ds: Dataset = synth_interaction(100, 1).unwrap();
        let mut x = ds.x().clone();
        x.column_mut(0).fill(1.0);
        let ds = Dataset::new("c", ds.schema().to_vec(), x, ds.y().clone()).unwrap();
        let oracle = FnOracle::new(4, |r: ArrayView1<f64>| r[1]);
        let a = analyze(&ds, &oracle, &VineConfig::default()).unwrap();
        assert_eq!(a.skipped, vec![0]);
        assert_eq!(a.features.len(), 3);
    }
}
