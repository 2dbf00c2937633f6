//! Curve distances, overview scores and Friedman's pairwise H-statistic.

use ndarray::{Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Result, VineError};
use crate::model::{predict, ModelOracle};
use crate::pdcurves::{pinned, CurveSet};
use crate::scalar::{self, Scalar};

/// Default number of rows sampled for the H-statistic.
pub const DEFAULT_H_SAMPLE: usize = 100;

/// Unconstrained dynamic time warping with absolute-difference local cost;
/// returns the total cost of the cheapest warping path.
pub fn dtw<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(VineError::EmptySeries);
    }
    let m = b.len();
    let mut prev = vec![T::infinity(); m + 1];
    let mut curr = vec![T::infinity(); m + 1];
    prev[0] = T::zero();
    for &ai in a {
        curr[0] = T::infinity();
        for j in 1..=m {
            let cost = (ai - b[j - 1]).abs();
            curr[j] = cost + prev[j].min(curr[j - 1]).min(prev[j - 1]);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m])
}

/// Overview coordinates of one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScores<T: Scalar = f64> {
    pub feature_index: usize,
    /// Population standard deviation of the PDP.
    pub importance: T,
    /// Summed DTW distance from each VINE curve to the PDP over `max |pdp|`.
    pub interaction_strength: T,
}

/// `centroids` holds one VINE curve per row, on the PDP's grid. A PDP that
/// is identically zero leaves the DTW sum unnormalized.
/// Importance is the PDP's population standard deviation. Interaction
/// strength sums the DTW distance of each pinned centroid from the PDP and
/// divides by `max |pdp|`, or leaves the sum unnormalized when the PDP is
/// zero up to round-off.
pub fn feature_scores<T: Scalar>(curves: &CurveSet<T>, centroids: &Array2<T>) -> FeatureScores<T> {
    let pdp = curves.pdp.as_slice().expect("contiguous pdp");
    FeatureScores {
        feature_index: curves.feature_index,
        importance: std_dev(pdp),
        interaction_strength: interaction_strength(pdp, centroids.rows().into_iter(), curves.roundoff_floor()),
    }
}

pub fn std_dev<T: Scalar>(values: &[T]) -> T {
    let m = scalar::mean(values.iter().copied());
    scalar::mean(values.iter().map(|&v| (v - m) * (v - m))).sqrt()
}

pub fn max_abs<T: Scalar>(values: &[T]) -> T {
    values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
}

fn interaction_strength<'a, T: Scalar>(
    pdp: &[T],
    centroids: impl Iterator<Item = ArrayView1<'a, T>>,
    floor: T,
) -> T {
    let level = scalar::mean(pdp.iter().copied());
    let total: T = centroids
        .map(|c| dtw(&pinned(&c.to_vec(), level), pdp).expect("non-empty curves"))
        .sum();
    let scale = max_abs(pdp);
    if scale > floor {
        total / scale
    } else {
        total
    }
}

fn sample_rows(n: usize, sample_size: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = rand::seq::index::sample(&mut rng, n, sample_size.min(n)).into_vec();
    rows.sort_unstable();
    rows
}

/// Partial dependence on `features`, evaluated at each sampled row's own
/// values and averaged over the sample, then centered over the sample.
fn centered_partial_dependence<T: Scalar, O: ModelOracle<T> + ?Sized>(
    sample: &Array2<T>,
    oracle: &O,
    features: &[usize],
) -> Result<(Array1<T>, T)> {
    let s = sample.nrows();
    let mut batch = Array2::zeros((s * s, sample.ncols()));
    for i in 0..s {
        let mut block = batch.slice_mut(ndarray::s![i * s..(i + 1) * s, ..]);
        block.assign(sample);
        for &f in features {
            block.column_mut(f).fill(sample[[i, f]]);
        }
    }
    let out = predict(oracle, batch.view())?;
    let pd: Array1<T> = (0..s)
        .map(|i| scalar::mean(out.slice(ndarray::s![i * s..(i + 1) * s]).iter().copied()))
        .collect();
    let scale = max_abs(pd.as_slice().unwrap());
    let center = scalar::mean(pd.iter().copied());
    Ok((pd.mapv(|v| v - center), scale))
}

fn h_from_parts<T: Scalar>(pd_jk: &Array1<T>, raw_scale: T, pd_j: &Array1<T>, pd_k: &Array1<T>) -> T {
    let mut num = T::zero();
    let mut den = T::zero();
    for i in 0..pd_jk.len() {
        let d = pd_jk[i] - pd_j[i] - pd_k[i];
        num += d * d;
        den += pd_jk[i] * pd_jk[i];
    }
    let floor = T::epsilon() * T::lit(1024.0) * raw_scale;
    if den <= floor * floor * T::from_count(pd_jk.len()) {
        log::warn!("joint partial dependence is identically zero; H-statistic set to 0");
        return T::zero();
    }
    (num / den).min(T::one()).max(T::zero()).sqrt()
}

/// Friedman's H for the feature pair `(j, k)` on a seeded sample of rows.
pub fn h_statistic<T: Scalar, O: ModelOracle<T> + ?Sized>(
    ds: &Dataset<T>,
    oracle: &O,
    j: usize,
    k: usize,
    sample_size: usize,
    seed: u64,
) -> Result<T> {
    if j == k {
        return Err(VineError::InvalidArgument("H-statistic needs two distinct features".into()));
    }
    if j >= ds.n_features() || k >= ds.n_features() {
        return Err(VineError::InvalidArgument("feature index out of range".into()));
    }
    let (sample, _) = sample_matrix(ds, sample_size, seed)?;
    let (pd_j, _) = centered_partial_dependence(&sample, oracle, &[j])?;
    let (pd_k, _) = centered_partial_dependence(&sample, oracle, &[k])?;
    let (pd_jk, scale) = centered_partial_dependence(&sample, oracle, &[j.min(k), j.max(k)])?;
    Ok(h_from_parts(&pd_jk, scale, &pd_j, &pd_k))
}

fn sample_matrix<T: Scalar>(ds: &Dataset<T>, sample_size: usize, seed: u64) -> Result<(Array2<T>, Vec<usize>)> {
    if sample_size < 2 || sample_size > ds.n_rows() {
        return Err(VineError::InvalidArgument(format!(
            "H-statistic sample size must be in 2..={}, got {sample_size}",
            ds.n_rows()
        )));
    }
    let rows = sample_rows(ds.n_rows(), sample_size, seed);
    Ok((ds.x().select(ndarray::Axis(0), &rows), rows))
}

/// Pairwise H-statistics over all features on one shared row sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HMatrix<T: Scalar = f64> {
    pub features: Vec<String>,
    /// Symmetric; the diagonal holds NaN.
    pub values: Array2<T>,
    pub sample_indices: Vec<usize>,
    pub seed: u64,
}

impl<T: Scalar> HMatrix<T> {
    pub fn get(&self, j: usize, k: usize) -> Option<T> {
        (j != k).then(|| self.values[[j, k]])
    }

    /// Other features ordered by descending H with `feature`, ties by index.
    pub fn ranked_partners(&self, feature: usize) -> Vec<usize> {
        let mut others: Vec<usize> = (0..self.features.len()).filter(|&k| k != feature).collect();
        others.sort_by(|&a, &b| {
            self.values[[feature, b]]
                .partial_cmp(&self.values[[feature, a]])
                .unwrap()
                .then(a.cmp(&b))
        });
        others
    }

    /// Feature-by-feature CSV with a header row and a leading name column;
    /// diagonal cells are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature");
        for name in &self.features {
            out.push(',');
            out.push_str(&csv_field(name));
        }
        out.push('\n');
        for (j, name) in self.features.iter().enumerate() {
            out.push_str(&csv_field(name));
            for k in 0..self.features.len() {
                out.push(',');
                if let Some(h) = self.get(j, k) {
                    out.push_str(&format!("{:.6}", h.as_f64()));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// All pairwise H values. One-way partial dependences are computed once per
/// feature and shared across pairs; pairs run in parallel.
pub fn h_matrix<T: Scalar, O: ModelOracle<T> + ?Sized>(
    ds: &Dataset<T>,
    oracle: &O,
    sample_size: usize,
    seed: u64,
) -> Result<HMatrix<T>> {
    let (sample, rows) = sample_matrix(ds, sample_size, seed)?;
    let k = ds.n_features();
    let one_way: Vec<Array1<T>> = (0..k)
        .into_par_iter()
        .map(|f| centered_partial_dependence(&sample, oracle, &[f]).map(|(pd, _)| pd))
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
    let hs: Vec<T> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (pd_ab, scale) = centered_partial_dependence(&sample, oracle, &[a, b])?;
            Ok(h_from_parts(&pd_ab, scale, &one_way[a], &one_way[b]))
        })
        .collect::<Result<_>>()?;
    let mut values = Array2::from_elem((k, k), T::nan());
    for (&(a, b), &h) in pairs.iter().zip(&hs) {
        values[[a, b]] = h;
        values[[b, a]] = h;
    }
    Ok(HMatrix {
        features: ds.schema().iter().map(|c| c.name.clone()).collect(),
        values,
        sample_indices: rows,
        seed,
    })
}
