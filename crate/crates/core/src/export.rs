//! The versioned JSON document consumed by the exploration UI.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureKind};
use crate::evaluation::{BaselineReport, CeilingReport, CorrespondenceReport};
use crate::explain::{Direction, FitMetrics};
use crate::pipeline::Analysis;
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: &str = "vine/1";

/// JSON Schema for [`ExportDocument`].
pub const JSON_SCHEMA: &str = include_str!("../schema/vine-1.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportOptions {
    /// Maximum ICE curves kept per cluster.
    pub ice_sample_cap: usize,
    pub histogram_bins: usize,
    pub seed: u64,
}

impl Default for ExportOptions {
    fn default() -> Self {
        ExportOptions {
            ice_sample_cap: 200,
            histogram_bins: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportDocument {
    pub schema_version: String,
    pub dataset: DatasetSummary,
    pub mean_prediction: f64,
    pub features: Vec<FeatureDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reports: Option<Reports>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n: usize,
    pub features: Vec<FeatureSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub name: String,
    pub display_name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_column: Option<String>,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
}

/// Equal-width bins; `edges` has one more entry than `counts`. Values equal
/// to the last edge fall in the last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn equal_width(min: f64, max: f64, bins: usize) -> Self {
        let bins = bins.max(1);
        let edges = (0..=bins)
            .map(|i| {
                if i == bins {
                    max
                } else {
                    min + (max - min) * i as f64 / bins as f64
                }
            })
            .collect();
        Histogram {
            edges,
            counts: vec![0; bins],
        }
    }

    pub fn bin_of(&self, v: f64) -> usize {
        let bins = self.counts.len();
        let (lo, hi) = (self.edges[0], self.edges[bins]);
        if hi <= lo {
            return 0;
        }
        (((v - lo) / (hi - lo) * bins as f64).floor().max(0.0) as usize).min(bins - 1)
    }

    pub fn add(&mut self, v: f64) {
        let b = self.bin_of(v);
        self.counts[b] += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDocument {
    pub feature_index: usize,
    pub name: String,
    pub grid: Vec<f64>,
    pub pdp: Vec<f64>,
    pub scores: ScoresDocument,
    pub vine_curves: Vec<VineCurveDocument>,
    pub ice_sample: Vec<IceSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoresDocument {
    pub importance: f64,
    pub interaction_strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineCurveDocument {
    pub id: usize,
    pub size: usize,
    pub centroid: Vec<f64>,
    pub predicate: PredicateDocument,
    pub metrics: FitMetrics,
    /// Keyed by split feature name.
    pub member_histograms: BTreeMap<String, MemberHistogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateDocument {
    pub feature: usize,
    pub feature_name: String,
    pub direction: Direction,
    pub value: f64,
    pub text: String,
}

/// Cluster members binned on the dataset histogram's edges, split by
/// whether they satisfy the predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberHistogram {
    pub in_region: Vec<usize>,
    pub out_region: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IceSample {
    pub row: usize,
    pub cluster: usize,
    pub curve: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Reports {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ceiling: Option<CeilingReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correspondence: Option<CorrespondenceReport>,
}

/// Rounds to six significant digits.
pub fn round6(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.5e}").parse().expect("formatted float")
}

fn round_all<T: Scalar>(values: impl IntoIterator<Item = T>) -> Vec<f64> {
    values.into_iter().map(|v| round6(v.as_f64())).collect()
}

fn round_metrics<T: Scalar>(m: &FitMetrics<T>) -> FitMetrics {
    FitMetrics {
        accuracy: round6(m.accuracy.as_f64()),
        precision: round6(m.precision.as_f64()),
        recall: round6(m.recall.as_f64()),
        f1: round6(m.f1.as_f64()),
        cluster_size: m.cluster_size,
        matched_size: m.matched_size,
    }
}

fn histogram_for<T: Scalar>(ds: &Dataset<T>, feature: usize, bins: usize) -> Histogram {
    let (min, max) = ds.feature_range(feature);
    let bins = if ds.schema()[feature].kind == FeatureKind::Binary { 2 } else { bins };
    let mut h = Histogram::equal_width(min.as_f64(), max.as_f64(), bins);
    for &v in ds.column(feature) {
        h.add(v.as_f64());
    }
    h
}

/// Deterministic: identical inputs and options give an identical document.
pub fn export_document<T: Scalar>(
    ds: &Dataset<T>,
    analysis: &Analysis<T>,
    reports: Option<Reports>,
    options: &ExportOptions,
) -> ExportDocument {
    let histograms: Vec<Histogram> = (0..ds.n_features())
        .map(|f| histogram_for(ds, f, options.histogram_bins))
        .collect();
    let features_summary = ds
        .schema()
        .iter()
        .enumerate()
        .map(|(f, col)| {
            let (min, max) = ds.feature_range(f);
            FeatureSummary {
                name: col.name.clone(),
                display_name: col.label().to_string(),
                kind: col.kind,
                source_column: col.source_column.clone(),
                min: round6(min.as_f64()),
                max: round6(max.as_f64()),
                histogram: Histogram {
                    edges: histograms[f].edges.iter().map(|&e| round6(e)).collect(),
                    counts: histograms[f].counts.clone(),
                },
            }
        })
        .collect();

    let features = analysis
        .features
        .iter()
        .map(|fa| {
            let mut ice_sample = Vec::new();
            let vine_curves = fa
                .vine_curves
                .iter()
                .enumerate()
                .map(|(id, v)| {
                    let p = &v.predicate;
                    let split_hist = &histograms[p.feature];
                    let mut in_region = vec![0; split_hist.counts.len()];
                    let mut out_region = vec![0; split_hist.counts.len()];
                    for &r in &v.members {
                        let x = ds.x()[[r, p.feature]];
                        let bin = split_hist.bin_of(x.as_f64());
                        if p.matches_value(x) {
                            in_region[bin] += 1;
                        } else {
                            out_region[bin] += 1;
                        }
                    }
                    let mut member_histograms = BTreeMap::new();
                    member_histograms.insert(
                        ds.schema()[p.feature].name.clone(),
                        MemberHistogram { in_region, out_region },
                    );

                    for row in sample_members(&v.members, options.ice_sample_cap, options.seed, fa.feature_index, id) {
                        ice_sample.push(IceSample {
                            row,
                            cluster: id,
                            curve: round_all(fa.curves.ice.row(row).iter().copied()),
                        });
                    }

                    VineCurveDocument {
                        id,
                        size: v.members.len(),
                        centroid: round_all(v.centroid.iter().copied()),
                        predicate: PredicateDocument {
                            feature: p.feature,
                            feature_name: ds.schema()[p.feature].name.clone(),
                            direction: p.direction,
                            value: round6(p.value.as_f64()),
                            text: p.render(ds.schema()),
                        },
                        metrics: round_metrics(&p.metrics),
                        member_histograms,
                    }
                })
                .collect();
            FeatureDocument {
                feature_index: fa.feature_index,
                name: ds.schema()[fa.feature_index].name.clone(),
                grid: round_all(fa.curves.grid.values.iter().copied()),
                pdp: round_all(fa.curves.pdp.iter().copied()),
                scores: ScoresDocument {
                    importance: round6(fa.scores.importance.as_f64()),
                    interaction_strength: round6(fa.scores.interaction_strength.as_f64()),
                },
                vine_curves,
                ice_sample,
            }
        })
        .collect();

    ExportDocument {
        schema_version: SCHEMA_VERSION.to_string(),
        dataset: DatasetSummary {
            name: ds.name().to_string(),
            n: ds.n_rows(),
            features: features_summary,
        },
        mean_prediction: round6(analysis.mean_prediction.as_f64()),
        features,
        reports,
    }
}

/// Seeded uniform subsample of at most `cap` members, ascending.
fn sample_members(members: &[usize], cap: usize, seed: u64, feature: usize, cluster: usize) -> Vec<usize> {
    if members.len() <= cap {
        return members.to_vec();
    }
    let stream = seed ^ ((feature as u64) << 32) ^ (cluster as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, members.len(), cap)
        .into_iter()
        .map(|i| members[i])
        .collect();
    picked.sort_unstable();
    picked
}

impl ExportDocument {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}
