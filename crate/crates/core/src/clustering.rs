//! Slope-space Ward clustering of ICE curves, merging of clusters with
//! near-identical explanations, and filtering of uninformative clusters.

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Result, VineError};
use crate::explain::{fit_stump_sorted, Predicate, SortedColumns};
use crate::interaction::{dtw, max_abs};
use crate::pdcurves::{pinned, CurveSet};
use crate::scalar::{self, Scalar};

pub const DEFAULT_CLUSTERS: usize = 5;
pub const DEFAULT_MERGE_THRESHOLD: f64 = 0.05;

/// Finite-difference slopes of each ICE curve, `N x (M' - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeMatrix<T: Scalar = f64>(pub Array2<T>);

impl<T: Scalar> SlopeMatrix<T> {
    pub fn rows(&self) -> usize {
        self.0.nrows()
    }
}

/// Divides adjacent ICE differences by the actual grid spacing.
///
/// Differences are first snapped to a multiple of the ICE round-off floor,
/// so curves that are parallel up to round-off get identical slopes.
/// Otherwise the round-off, which scales with the level contributed by the
/// other features, would be clustered as if it were signal.
pub fn slope_features<T: Scalar>(curves: &CurveSet<T>) -> Result<SlopeMatrix<T>> {
    let grid = &curves.grid.values;
    let m = grid.len();
    if m < 2 || curves.ice.ncols() != m {
        return Err(VineError::DegenerateGrid);
    }
    let n = curves.ice.nrows();
    let quantum = curves.roundoff_floor();
    let snap = |d: T| if quantum > T::zero() { (d / quantum).round() * quantum } else { d };
    let slopes = Array2::from_shape_fn((n, m - 1), |(i, j)| {
        snap(curves.ice[[i, j + 1]] - curves.ice[[i, j]]) / (grid[j + 1] - grid[j])
    });
    Ok(SlopeMatrix(slopes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster<T: Scalar = f64> {
    /// Ascending row indices.
    pub members: Vec<usize>,
    /// Column means of the members' ICE rows: the subset's PDP.
    pub centroid: Array1<T>,
}

/// Disjoint nonempty clusters over `n_rows` curves. Straight out of
/// clustering they cover every row; merging and filtering may leave rows
/// unassigned.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment<T: Scalar = f64> {
    pub n_rows: usize,
    pub clusters: Vec<Cluster<T>>,
}

impl<T: Scalar> ClusterAssignment<T> {
    /// Groups rows by label (ids `0..k`) and averages their ICE rows.
    pub fn from_labels(labels: &[usize], ice: &Array2<T>) -> Self {
        let k = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut members = vec![Vec::new(); k];
        for (row, &l) in labels.iter().enumerate() {
            members[l].push(row);
        }
        let clusters = members
            .into_iter()
            .filter(|m| !m.is_empty())
            .map(|m| Cluster {
                centroid: centroid_of(&m, ice),
                members: m,
            })
            .collect();
        ClusterAssignment {
            n_rows: labels.len(),
            clusters,
        }
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    /// Cluster id per row, `None` for unassigned rows.
    pub fn labels(&self) -> Vec<Option<usize>> {
        let mut labels = vec![None; self.n_rows];
        for (id, c) in self.clusters.iter().enumerate() {
            for &r in &c.members {
                labels[r] = Some(id);
            }
        }
        labels
    }

    /// Centroids stacked as a `k x M'` matrix.
    pub fn centroid_matrix(&self, m: usize) -> Array2<T> {
        let mut out = Array2::zeros((self.clusters.len(), m));
        for (i, c) in self.clusters.iter().enumerate() {
            out.row_mut(i).assign(&c.centroid);
        }
        out
    }
}

pub fn centroid_of<T: Scalar>(members: &[usize], ice: &Array2<T>) -> Array1<T> {
    let mut sum = Array1::zeros(ice.ncols());
    for &r in members {
        sum += &ice.row(r);
    }
    if members.is_empty() {
        sum
    } else {
        sum.mapv(|v: T| v / T::from_count(members.len()))
    }
}

#[inline]
fn condensed(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    n * i - i * (i + 1) / 2 + j - i - 1
}

fn squared_distance<T: Scalar>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    a.iter().zip(b.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Ward-linkage agglomeration of the slope rows stopped at `k` clusters.
/// Label ids are assigned in order of each cluster's lowest row.
///
/// Runs the nearest-neighbour-chain algorithm with Lance-Williams updates
/// on a condensed squared-distance matrix: `O(N^2)` time and memory.
pub fn ward_labels<T: Scalar>(slopes: &SlopeMatrix<T>, k: usize) -> Result<Vec<usize>> {
    let x = &slopes.0;
    let n = x.nrows();
    if k == 0 || k > n {
        return Err(VineError::KTooLarge { k, n });
    }
    if n == 1 {
        return Ok(vec![0]);
    }
    let mut dist: Vec<T> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let xi = x.row(i);
            (i + 1..n).map(move |j| squared_distance(xi, x.row(j)))
        })
        .collect();

    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    let mut merges: Vec<(usize, usize, T)> = Vec::with_capacity(n - 1);

    while merges.len() < n - 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("an active cluster"));
        }
        let (a, b, d) = loop {
            let top = chain[chain.len() - 1];
            let prev = (chain.len() >= 2).then(|| chain[chain.len() - 2]);
            // prefer the predecessor on ties so reciprocal pairs terminate
            let (mut best, mut best_d) = match prev {
                Some(p) => (p, dist[condensed(n, top, p)]),
                None => (usize::MAX, T::infinity()),
            };
            for c in 0..n {
                if c == top || !active[c] {
                    continue;
                }
                let d = dist[condensed(n, top, c)];
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            if Some(best) == prev {
                chain.pop();
                chain.pop();
                break (top.min(best), top.max(best), best_d);
            }
            chain.push(best);
        };

        // merged cluster lives at `a`
        let (na, nb) = (size[a], size[b]);
        for c in 0..n {
            if !active[c] || c == a || c == b {
                continue;
            }
            let nc = size[c];
            let dac = dist[condensed(n, a, c)];
            let dbc = dist[condensed(n, b, c)];
            let total = T::from_count(na + nb + nc);
            dist[condensed(n, a, c)] =
                (T::from_count(na + nc) * dac + T::from_count(nb + nc) * dbc - T::from_count(nc) * d) / total;
        }
        active[b] = false;
        size[a] = na + nb;
        merges.push((a, b, d));
    }

    // replay the cheapest n - k merges
    let mut order: Vec<usize> = (0..merges.len()).collect();
    order.sort_by(|&p, &q| merges[p].2.partial_cmp(&merges[q].2).unwrap().then(p.cmp(&q)));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for &m in order.iter().take(n - k) {
        let (a, b, _) = merges[m];
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra.max(rb)] = ra.min(rb);
    }
    let mut ids = vec![usize::MAX; n];
    let mut next = 0;
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let root = find(&mut parent, i);
        if ids[root] == usize::MAX {
            ids[root] = next;
            next += 1;
        }
        labels.push(ids[root]);
    }
    Ok(labels)
}

/// Ward clustering of the slope rows, with centroids taken from `ice`.
pub fn agglomerative_cluster<T: Scalar>(
    slopes: &SlopeMatrix<T>,
    ice: &Array2<T>,
    k: usize,
) -> Result<ClusterAssignment<T>> {
    let labels = ward_labels(slopes, k)?;
    Ok(ClusterAssignment::from_labels(&labels, ice))
}

/// Merge rule: same feature, same direction, and threshold gap no more
/// than `threshold` of the feature's observed range.
pub fn merge_qualifies<T: Scalar>(a: &Predicate<T>, b: &Predicate<T>, range: T, threshold: T) -> bool {
    if a.feature != b.feature || a.direction != b.direction {
        return false;
    }
    let gap = (a.value - b.value).abs();
    if range > T::zero() {
        gap / range <= threshold
    } else {
        gap == T::zero()
    }
}

/// Merges clusters whose predicates qualify under [`merge_qualifies`],
/// refitting the predicate on each union, until no pair qualifies.
/// A union whose refit has no informative split (e.g. it covers every
/// row) is indistinguishable from the PDP and is dropped.
pub fn merge_clusters<T: Scalar>(
    ds: &Dataset<T>,
    sorted: &SortedColumns,
    curves: &CurveSet<T>,
    assignment: ClusterAssignment<T>,
    predicates: Vec<Predicate<T>>,
    threshold: T,
) -> Result<(ClusterAssignment<T>, Vec<Predicate<T>>)> {
    if assignment.clusters.len() != predicates.len() {
        return Err(VineError::InvalidArgument("one predicate per cluster required".into()));
    }
    let ranges: Vec<T> = (0..ds.n_features())
        .map(|f| {
            let (lo, hi) = ds.feature_range(f);
            hi - lo
        })
        .collect();
    let mut clusters = assignment.clusters;
    let mut predicates = predicates;
    'scan: loop {
        for i in 0..clusters.len() {
            for dupe in i + 1..clusters.len() {
                let range = ranges[predicates[i].feature];
                if !merge_qualifies(&predicates[i], &predicates[dupe], range, threshold) {
                    continue;
                }
                let absorbed = clusters.remove(dupe);
                predicates.remove(dupe);
                let mut members = std::mem::take(&mut clusters[i].members);
                members.extend(absorbed.members);
                members.sort_unstable();
                match fit_stump_sorted(ds, sorted, &members) {
                    Ok(p) => {
                        clusters[i] = Cluster {
                            centroid: centroid_of(&members, &curves.ice),
                            members,
                        };
                        predicates[i] = p;
                    }
                    Err(VineError::DegenerateSplit) => {
                        clusters.remove(i);
                        predicates.remove(i);
                    }
                    Err(e) => return Err(e),
                }
                continue 'scan;
            }
        }
        break;
    }
    Ok((
        ClusterAssignment {
            n_rows: assignment.n_rows,
            clusters,
        },
        predicates,
    ))
}

/// Thresholds for discarding clusters that say nothing beyond the PDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    pub min_f1: f64,
    /// Minimum DTW(centroid, PDP) / max |PDP|.
    pub min_dtw_ratio: f64,
    /// Minimum members; `None` means `max(20, 0.02 N)`.
    pub min_size: Option<usize>,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            min_f1: 0.75,
            min_dtw_ratio: 0.05,
            min_size: None,
        }
    }
}

impl FilterParams {
    pub fn min_size_for(&self, n: usize) -> f64 {
        match self.min_size {
            Some(s) => s as f64,
            None => (0.02 * n as f64).max(20.0),
        }
    }
}

/// DTW distance of a centroid's shape from the PDP relative to `max |pdp|`.
///
/// The centroid is pinned to the PDP's level first: clusters are formed on
/// slopes, so a pure vertical offset is not something a cluster explains.
/// When `max |pdp|` does not exceed `floor` the PDP is treated as zero and
/// the distance is left unnormalized.
pub fn dtw_ratio<T: Scalar>(centroid: &[T], pdp: &[T], floor: T) -> T {
    let level = scalar::mean(pdp.iter().copied());
    let d = dtw(&pinned(centroid, level), pdp).expect("non-empty curves");
    let scale = max_abs(pdp);
    if scale > floor {
        d / scale
    } else {
        d
    }
}

pub fn filter_clusters<T: Scalar>(
    assignment: ClusterAssignment<T>,
    predicates: Vec<Predicate<T>>,
    curves: &CurveSet<T>,
    params: &FilterParams,
) -> (ClusterAssignment<T>, Vec<Predicate<T>>) {
    let pdp = curves.pdp.to_vec();
    let floor = curves.roundoff_floor();
    let min_size = params.min_size_for(assignment.n_rows);
    let min_f1 = T::lit(params.min_f1);
    let min_ratio = T::lit(params.min_dtw_ratio);
    let (clusters, predicates): (Vec<_>, Vec<_>) = assignment
        .clusters
        .into_iter()
        .zip(predicates)
        .filter(|(c, p)| {
            p.metrics.f1 >= min_f1
                && (c.members.len() as f64) >= min_size
                && dtw_ratio(&c.centroid.to_vec(), &pdp, floor) >= min_ratio
        })
        .unzip();
    (
        ClusterAssignment {
            n_rows: assignment.n_rows,
            clusters,
        },
        predicates,
    )
}
