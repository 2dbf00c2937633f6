//! Floating point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::Serialize;

/// Real scalar the engine computes with: `f32` or `f64`.
///
/// Implemented automatically for every type satisfying the super-trait
/// bounds.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot hold.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal not representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + Serialize
        + 'static
{
}

/// Arithmetic mean; zero for an empty slice.
pub fn mean<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        T::zero()
    } else {
        sum / T::from_count(n)
    }
}

/// Coefficient of determination of `approx` against `truth`, using `center`
/// as the reference level. Returns `None` when `truth` has zero variance
/// around `center`.
pub fn r_squared<T: Scalar>(truth: &[T], approx: &[T], center: T) -> Option<T> {
    debug_assert_eq!(truth.len(), approx.len());
    let mut ss_res = T::zero();
    let mut ss_tot = T::zero();
    for (&t, &a) in truth.iter().zip(approx) {
        ss_res += (t - a) * (t - a);
        ss_tot += (t - center) * (t - center);
    }
    let scale = truth.iter().fold(T::zero(), |m, &t| m.max(t.abs()));
    let floor = T::epsilon() * T::lit(64.0) * scale;
    if ss_tot <= floor * floor * T::from_count(truth.len().max(1)) {
        None
    } else {
        Some(T::one() - ss_res / ss_tot)
    }
}
