//! Prediction oracles: the contract the engine queries, an internal
//! gradient-boosted tree model and a child-process bridge to external models.

mod external;
pub(crate) mod gbm;

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Result, VineError};
use crate::scalar::Scalar;

pub use external::ExternalOracle;
pub use gbm::{train_gbm, train_gbm_traced, GbmModel, GbmParams, RegressionTree, TrainingTrace, TreeNode};

/// Opaque batch prediction function. Implementations must be deterministic
/// and free of observable side effects.
pub trait ModelOracle<T: Scalar>: Send + Sync {
    fn feature_count(&self) -> usize;

    /// Predicts one value per batch row. Callers go through [`predict`],
    /// which validates shapes and outputs.
    fn predict_batch(&self, batch: ArrayView2<'_, T>) -> Result<Array1<T>>;
}

impl<T: Scalar, O: ModelOracle<T> + ?Sized> ModelOracle<T> for &O {
    fn feature_count(&self) -> usize {
        (**self).feature_count()
    }
    fn predict_batch(&self, batch: ArrayView2<'_, T>) -> Result<Array1<T>> {
        (**self).predict_batch(batch)
    }
}

impl<T: Scalar, O: ModelOracle<T> + ?Sized> ModelOracle<T> for Box<O> {
    fn feature_count(&self) -> usize {
        (**self).feature_count()
    }
    fn predict_batch(&self, batch: ArrayView2<'_, T>) -> Result<Array1<T>> {
        (**self).predict_batch(batch)
    }
}

impl<T: Scalar, O: ModelOracle<T> + ?Sized> ModelOracle<T> for Arc<O> {
    fn feature_count(&self) -> usize {
        (**self).feature_count()
    }
    fn predict_batch(&self, batch: ArrayView2<'_, T>) -> Result<Array1<T>> {
        (**self).predict_batch(batch)
    }
}

/// Validated prediction: checks the column count, skips the oracle for an
/// empty batch, and rejects wrong-length or non-finite output.
pub fn predict<T: Scalar, O: ModelOracle<T> + ?Sized>(oracle: &O, batch: ArrayView2<'_, T>) -> Result<Array1<T>> {
    if batch.ncols() != oracle.feature_count() {
        return Err(VineError::ShapeMismatch {
            expected: oracle.feature_count(),
            got: batch.ncols(),
        });
    }
    if batch.nrows() == 0 {
        return Ok(Array1::zeros(0));
    }
    let out = oracle.predict_batch(batch)?;
    if out.len() != batch.nrows() {
        return Err(VineError::ProtocolViolation(format!(
            "expected {} predictions, got {}",
            batch.nrows(),
            out.len()
        )));
    }
    if let Some(row) = out.iter().position(|v| !v.is_finite()) {
        return Err(VineError::NonFinitePrediction(row));
    }
    Ok(out)
}

/// Oracle backed by a per-row closure.
pub struct FnOracle<F> {
    feature_count: usize,
    f: F,
}

impl<F> FnOracle<F> {
    pub fn new(feature_count: usize, f: F) -> Self {
        FnOracle { feature_count, f }
    }
}

impl<T, F> ModelOracle<T> for FnOracle<F>
where
    T: Scalar,
    F: Fn(ArrayView1<'_, T>) -> T + Send + Sync,
{
    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn predict_batch(&self, batch: ArrayView2<'_, T>) -> Result<Array1<T>> {
        Ok(batch.rows().into_iter().map(|r| (self.f)(r)).collect())
    }
}

/// Predicts every row of `x` in one batch.
pub fn predict_all<T: Scalar, O: ModelOracle<T> + ?Sized>(oracle: &O, x: &Array2<T>) -> Result<Array1<T>> {
    predict(oracle, x.view())
}
