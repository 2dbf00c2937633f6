//! One-split explanations of cluster membership and their fidelity metrics.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnSchema, Dataset};
use crate::error::{Result, VineError};
use crate::model::gbm::midpoint;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
}

impl Direction {
    pub fn symbol(self) -> &'static str {
        match self {
            Direction::Le => "<=",
            Direction::Gt => ">",
        }
    }
}

/// Agreement between a cluster (set A) and the rows its predicate selects
/// (set B).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics<T: Scalar = f64> {
    pub accuracy: T,
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub cluster_size: usize,
    pub matched_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate<T: Scalar = f64> {
    pub feature: usize,
    pub direction: Direction,
    pub value: T,
    pub metrics: FitMetrics<T>,
}

impl<T: Scalar> Predicate<T> {
    pub fn matches(&self, row: ArrayView1<'_, T>) -> bool {
        self.matches_value(row[self.feature])
    }

    pub fn matches_value(&self, v: T) -> bool {
        match self.direction {
            Direction::Le => v <= self.value,
            Direction::Gt => v > self.value,
        }
    }

    /// `"<label> <= v"` with `v` at four significant digits.
    pub fn render(&self, schema: &[ColumnSchema]) -> String {
        format!(
            "{} {} {}",
            schema[self.feature].label(),
            self.direction.symbol(),
            format_significant(self.value.as_f64(), 4)
        )
    }
}

/// `printf("%.{digits}g")`-style formatting.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_fraction(mantissa);
        format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Per-feature row orders, sorted by value then row index. Build once per
/// dataset and reuse across many stump fits.
#[derive(Debug, Clone)]
pub struct SortedColumns {
    order: Vec<Vec<usize>>,
}

impl SortedColumns {
    pub fn new<T: Scalar>(ds: &Dataset<T>) -> Self {
        let order = (0..ds.n_features())
            .map(|f| {
                let col = ds.column(f);
                let mut idx: Vec<usize> = (0..ds.n_rows()).collect();
                idx.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap().then(a.cmp(&b)));
                idx
            })
            .collect();
        SortedColumns { order }
    }
}

/// Best one-vs-all split of a membership labelling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StumpSplit<T> {
    pub feature: usize,
    pub threshold: T,
    /// Information gain in bits.
    pub gain: T,
    pub direction: Direction,
}

/// Binary entropy in bits of a `pos` out of `n` labelling.
pub fn binary_entropy<T: Scalar>(pos: usize, n: usize) -> T {
    if n == 0 || pos == 0 || pos == n {
        return T::zero();
    }
    let p = T::from_count(pos) / T::from_count(n);
    let q = T::one() - p;
    -(p * p.log2() + q * q.log2())
}

/// Exhaustive search over every feature and every midpoint between adjacent
/// distinct values for the split of maximal information gain. Ties keep the
/// lowest feature, then the lowest threshold.
pub fn best_split<T: Scalar>(ds: &Dataset<T>, sorted: &SortedColumns, membership: &[bool]) -> Option<StumpSplit<T>> {
    let n = ds.n_rows();
    let total_pos = membership.iter().filter(|&&m| m).count();
    let parent: T = binary_entropy(total_pos, n);
    let nt = T::from_count(n);
    let floor = T::epsilon() * T::lit(16.0);
    let mut best: Option<StumpSplit<T>> = None;
    for (f, order) in sorted.order.iter().enumerate() {
        let col = ds.column(f);
        let mut left_pos = 0usize;
        for idx in 0..n - 1 {
            let r = order[idx];
            if membership[r] {
                left_pos += 1;
            }
            let v = col[r];
            let next = col[order[idx + 1]];
            if v == next {
                continue;
            }
            let left_n = idx + 1;
            let right_n = n - left_n;
            let right_pos = total_pos - left_pos;
            let gain = parent
                - T::from_count(left_n) / nt * binary_entropy::<T>(left_pos, left_n)
                - T::from_count(right_n) / nt * binary_entropy::<T>(right_pos, right_n);
            if gain > floor && best.as_ref().is_none_or(|b| gain > b.gain) {
                // matched side is the branch denser in members
                let direction = if left_pos * right_n > right_pos * left_n {
                    Direction::Le
                } else {
                    Direction::Gt
                };
                best = Some(StumpSplit {
                    feature: f,
                    threshold: midpoint(v, next),
                    gain,
                    direction,
                });
            }
        }
    }
    best
}

pub fn membership_mask(n: usize, members: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; n];
    for &m in members {
        mask[m] = true;
    }
    mask
}

/// Fits a depth-1 tree predicting membership of `members` against all
/// other rows.
pub fn fit_stump<T: Scalar>(ds: &Dataset<T>, members: &[usize]) -> Result<Predicate<T>> {
    fit_stump_sorted(ds, &SortedColumns::new(ds), members)
}

pub fn fit_stump_sorted<T: Scalar>(ds: &Dataset<T>, sorted: &SortedColumns, members: &[usize]) -> Result<Predicate<T>> {
    let mask = membership_mask(ds.n_rows(), members);
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 || count == ds.n_rows() {
        return Err(VineError::DegenerateSplit);
    }
    let split = best_split(ds, sorted, &mask).ok_or(VineError::DegenerateSplit)?;
    let mut predicate = Predicate {
        feature: split.feature,
        direction: split.direction,
        value: split.threshold,
        metrics: FitMetrics {
            accuracy: T::zero(),
            precision: T::zero(),
            recall: T::zero(),
            f1: T::zero(),
            cluster_size: 0,
            matched_size: 0,
        },
    };
    predicate.metrics = metrics_for_mask(ds, &predicate, &mask);
    Ok(predicate)
}

pub fn evaluate_predicate<T: Scalar>(ds: &Dataset<T>, p: &Predicate<T>, members: &[usize]) -> FitMetrics<T> {
    metrics_for_mask(ds, p, &membership_mask(ds.n_rows(), members))
}

fn metrics_for_mask<T: Scalar>(ds: &Dataset<T>, p: &Predicate<T>, mask: &[bool]) -> FitMetrics<T> {
    let col = ds.column(p.feature);
    let (mut both, mut neither, mut a, mut b) = (0usize, 0usize, 0usize, 0usize);
    for (&in_a, &v) in mask.iter().zip(col.iter()) {
        let in_b = p.matches_value(v);
        a += in_a as usize;
        b += in_b as usize;
        match (in_a, in_b) {
            (true, true) => both += 1,
            (false, false) => neither += 1,
            _ => {}
        }
    }
    metrics_from_counts(mask.len(), a, b, both, neither)
}

pub fn metrics_from_counts<T: Scalar>(n: usize, a: usize, b: usize, both: usize, neither: usize) -> FitMetrics<T> {
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            T::zero()
        } else {
            T::from_count(num) / T::from_count(den)
        }
    };
    let precision = ratio(both, b);
    let recall = ratio(both, a);
    let f1 = if precision + recall > T::zero() {
        T::lit(2.0) * precision * recall / (precision + recall)
    } else {
        T::zero()
    };
    FitMetrics {
        accuracy: ratio(both + neither, n),
        precision,
        recall,
        f1,
        cluster_size: a,
        matched_size: b,
    }
}
