//! Individual conditional expectation curves and the partial dependence
//! curve, on the mean-centered scale.

use ndarray::{Array1, Array2, Axis};

use crate::dataset::{Dataset, FeatureGrid};
use crate::error::{Result, VineError};
use crate::model::{predict, ModelOracle};
use crate::scalar::{self, Scalar};

/// ICE matrix and PDP for one feature.
///
/// `ice[i][j]` is the prediction for row `i` with the feature set to
/// `grid.values[j]`, minus `mean_prediction`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet<T: Scalar = f64> {
    pub feature_index: usize,
    pub grid: FeatureGrid<T>,
    pub ice: Array2<T>,
    pub pdp: Array1<T>,
    pub mean_prediction: T,
    pub centered: bool,
}

impl<T: Scalar> CurveSet<T> {
    pub fn n_curves(&self) -> usize {
        self.ice.nrows()
    }

    /// Grid mean of the PDP: the level every pinned curve is shifted to.
    pub fn pdp_level(&self) -> T {
        scalar::mean(self.pdp.iter().copied())
    }

    /// Magnitude below which values are treated as round-off of the ICE
    /// matrix: `4096 * eps * max|ice|`.
    pub fn roundoff_floor(&self) -> T {
        let scale = self.ice.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        T::epsilon() * T::lit(4096.0) * scale
    }

    /// Same curves on the prediction scale.
    pub fn to_raw(&self) -> CurveSet<T> {
        if !self.centered {
            return self.clone();
        }
        let m = self.mean_prediction;
        CurveSet {
            ice: self.ice.mapv(|v| v + m),
            pdp: self.pdp.mapv(|v| v + m),
            centered: false,
            ..self.clone()
        }
    }
}

/// Limits on how predictions are batched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchPolicy {
    /// Upper bound on rows per oracle call; `None` sends the full N x M'
    /// substitution matrix at once. Batches never split a grid point.
    pub max_rows: Option<usize>,
}

impl Default for BatchPolicy {
    fn default() -> Self {
        BatchPolicy { max_rows: None }
    }
}

/// Mean oracle prediction over the unmodified dataset.
pub fn mean_prediction<T: Scalar, O: ModelOracle<T> + ?Sized>(ds: &Dataset<T>, oracle: &O) -> Result<T> {
    let out = predict(oracle, ds.x().view())?;
    Ok(scalar::mean(out.iter().copied()))
}

pub fn compute_ice<T: Scalar, O: ModelOracle<T> + ?Sized>(
    ds: &Dataset<T>,
    oracle: &O,
    grid: &FeatureGrid<T>,
    mean_prediction: T,
) -> Result<CurveSet<T>> {
    compute_ice_batched(ds, oracle, grid, mean_prediction, BatchPolicy::default())
}

/// Substitutes each grid value into the feature column of every row and
/// predicts: exactly `N * M'` oracle evaluations.
pub fn compute_ice_batched<T: Scalar, O: ModelOracle<T> + ?Sized>(
    ds: &Dataset<T>,
    oracle: &O,
    grid: &FeatureGrid<T>,
    mean_prediction: T,
    policy: BatchPolicy,
) -> Result<CurveSet<T>> {
    let f = grid.feature_index;
    if f >= ds.n_features() {
        return Err(VineError::InvalidArgument(format!("grid refers to missing feature {f}")));
    }
    let n = ds.n_rows();
    let m = grid.len();
    let points_per_batch = match policy.max_rows {
        Some(cap) => (cap / n).max(1),
        None => m,
    };
    let mut ice = Array2::zeros((n, m));
    let mut start = 0;
    while start < m {
        let end = (start + points_per_batch).min(m);
        let mut batch = Array2::zeros((n * (end - start), ds.n_features()));
        for (b, j) in (start..end).enumerate() {
            let mut block = batch.slice_mut(ndarray::s![b * n..(b + 1) * n, ..]);
            block.assign(ds.x());
            block.column_mut(f).fill(grid.values[j]);
        }
        let out = predict(oracle, batch.view())?;
        for (b, j) in (start..end).enumerate() {
            for i in 0..n {
                ice[[i, j]] = out[b * n + i] - mean_prediction;
            }
        }
        start = end;
    }
    let pdp = column_means(&ice);
    Ok(CurveSet {
        feature_index: f,
        grid: grid.clone(),
        ice,
        pdp,
        mean_prediction,
        centered: true,
    })
}

/// The PDP: column means of the ICE matrix.
pub fn pdp_of<T: Scalar>(curves: &CurveSet<T>) -> Array1<T> {
    column_means(&curves.ice)
}

/// `curve` shifted so that its grid mean equals `level`.
///
/// Centered curves still carry the level contributed by an instance's other
/// features. Pinning every curve to the PDP's level removes it, leaving only
/// shape: for an additive model every pinned ICE row equals the PDP, and the
/// mean of pinned rows is still the PDP.
pub fn pinned<T: Scalar>(curve: &[T], level: T) -> Vec<T> {
    let shift = level - scalar::mean(curve.iter().copied());
    curve.iter().map(|&v| v + shift).collect()
}

pub(crate) fn column_means<T: Scalar>(m: &Array2<T>) -> Array1<T> {
    if m.nrows() == 0 {
        return Array1::zeros(m.ncols());
    }
    m.sum_axis(Axis(0)).mapv(|s| s / T::from_count(m.nrows()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{quantile_grid, synth_interaction, ColumnSchema, FeatureKind};
    use crate::model::FnOracle;
    use ndarray::{array, ArrayView1, ArrayView2};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn ds_from(x: Array2<f64>) -> Dataset {
        let schema = (0..x.ncols())
            .map(|j| ColumnSchema::new(format!("x{j}"), FeatureKind::Numeric))
            .collect();
        let n = x.nrows();
        Dataset::new("t", schema, x, Array1::zeros(n)).unwrap()
    }

    #[test]
    fn constant_oracle_centers_to_zero() {
        let ds = ds_from(array![[1.0, 2.0], [3.0, 4.0], [5.0, 0.0]]);
        let oracle = FnOracle::new(2, |_: ArrayView1<f64>| 7.5);
        let mean = mean_prediction(&ds, &oracle).unwrap();
        assert_eq!(mean, 7.5);
        let grid = quantile_grid(&ds, 0, 3).unwrap();
        let c = compute_ice(&ds, &oracle, &grid, mean).unwrap();
        assert!(c.ice.iter().all(|&v| v == 0.0));
        assert!(c.pdp.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_single_feature_by_hand() {
        let ds = ds_from(array![[1.0], [2.0], [3.0]]);
        let oracle = FnOracle::new(1, |r: ArrayView1<f64>| 2.0 * r[0]);
        let mean = mean_prediction(&ds, &oracle).unwrap();
        assert_eq!(mean, 4.0);
        let grid = FeatureGrid::new(0, vec![1.0, 2.0, 3.0]).unwrap();
        let c = compute_ice(&ds, &oracle, &grid, mean).unwrap();
        assert_eq!(c.pdp, array![-2.0, 0.0, 2.0]);
        for row in c.ice.rows() {
            assert_eq!(row, c.pdp);
        }
        let raw = c.to_raw();
        assert_eq!(raw.pdp, array![2.0, 4.0, 6.0]);
    }

    #[test]
    fn product_oracle_splits_into_two_families() {
        // x2 in {0,1}, half each; feature x1 swept over [0, 1]
        let ds = ds_from(array![[0.2, 0.0], [0.7, 1.0], [0.4, 0.0], [0.9, 1.0]]);
        let oracle = FnOracle::new(2, |r: ArrayView1<f64>| r[0] * r[1]);
        let mean = mean_prediction(&ds, &oracle).unwrap();
        let grid = FeatureGrid::new(0, vec![0.0, 1.0]).unwrap();
        let c = compute_ice(&ds, &oracle, &grid, mean).unwrap();
        for (i, row) in c.ice.rows().into_iter().enumerate() {
            let slope = row[1] - row[0];
            let expect = ds.x()[[i, 1]];
            assert!((slope - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn single_row_pdp_is_the_ice_row() {
        let c = CurveSet {
            feature_index: 0,
            grid: FeatureGrid::new(0, vec![0.0, 1.0, 2.0]).unwrap(),
            ice: array![[0.5, -1.0, 2.0]],
            pdp: array![0.5, -1.0, 2.0],
            mean_prediction: 0.0,
            centered: true,
        };
        assert_eq!(pdp_of(&c), c.ice.row(0));
    }

    struct Counting<O> {
        inner: O,
        rows: AtomicUsize,
        calls: AtomicUsize,
    }

    impl<O: ModelOracle<f64>> ModelOracle<f64> for Counting<O> {
        fn feature_count(&self) -> usize {
            self.inner.feature_count()
        }
        fn predict_batch(&self, batch: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
            self.rows.fetch_add(batch.nrows(), Ordering::SeqCst);
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.predict_batch(batch)
        }
    }

    #[test]
    fn evaluation_count_and_batch_fallback() {
        let ds: Dataset = synth_interaction(120, 3).unwrap();
        let oracle = Counting {
            inner: FnOracle::new(4, |r: ArrayView1<f64>| r[0] + r[2] * r[3]),
            rows: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        };
        let grid = quantile_grid(&ds, 2, 10).unwrap();
        let full = compute_ice(&ds, &oracle, &grid, 0.0).unwrap();
        assert_eq!(oracle.rows.load(Ordering::SeqCst), 120 * grid.len());
        assert_eq!(oracle.calls.load(Ordering::SeqCst), 1);

        oracle.rows.store(0, Ordering::SeqCst);
        oracle.calls.store(0, Ordering::SeqCst);
        let capped = compute_ice_batched(&ds, &oracle, &grid, 0.0, BatchPolicy { max_rows: Some(250) }).unwrap();
        assert_eq!(oracle.rows.load(Ordering::SeqCst), 120 * grid.len());
        assert_eq!(oracle.calls.load(Ordering::SeqCst), grid.len().div_ceil(2));
        assert_eq!(full, capped);
    }

    #[test]
    fn additive_model_rows_are_vertical_shifts_of_pdp() {
        let ds: Dataset = synth_interaction(200, 8).unwrap();
        let oracle = FnOracle::new(4, |r: ArrayView1<f64>| r[0].powi(2) + 3.0 * r[1] - r[2].sin() + r[3]);
        let mean = mean_prediction(&ds, &oracle).unwrap();
        let grid = quantile_grid(&ds, 0, 12).unwrap();
        let c = compute_ice(&ds, &oracle, &grid, mean).unwrap();
        let pdp_mean = c.pdp.mean().unwrap();
        for row in c.ice.rows() {
            let row_mean = row.mean().unwrap();
            for (a, b) in row.iter().zip(&c.pdp) {
                assert!(((a - row_mean) - (b - pdp_mean)).abs() < 1e-9);
            }
        }
        // centered per-feature effect: g(v) - mean_i g(x_i)
        let g_mean = ds.column(0).iter().map(|v| v * v).sum::<f64>() / 200.0;
        for (j, &v) in grid.values.iter().enumerate() {
            assert!((c.pdp[j] - (v * v - g_mean)).abs() < 1e-9);
        }
    }

    #[test]
    fn other_columns_pass_through() {
        // permuting a column other than f changes only which rows see which value
        let ds: Dataset = synth_interaction(60, 2).unwrap();
        let oracle = FnOracle::new(4, |r: ArrayView1<f64>| r[0] * r[1] + r[2]);
        let grid = quantile_grid(&ds, 0, 6).unwrap();
        let base = compute_ice(&ds, &oracle, &grid, 0.0).unwrap();
        for i in 0..ds.n_rows() {
            for (j, &v) in grid.values.iter().enumerate() {
                let r = ds.x().row(i);
                assert_eq!(base.ice[[i, j]], v * r[1] + r[2]);
            }
        }
    }
}
