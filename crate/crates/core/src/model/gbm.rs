use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::ModelOracle;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::scalar::{self, Scalar};

/// Least-squares boosting hyperparameters. Defaults: 300 trees with at
/// least 100 rows per leaf, learning rate 0.1 and depth 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmParams {
    pub n_trees: usize,
    pub min_leaf: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// Recorded for reproducibility; training uses no randomness.
    pub seed: u64,
}

impl Default for GbmParams {
    fn default() -> Self {
        GbmParams {
            n_trees: 300,
            min_leaf: 100,
            learning_rate: 0.1,
            max_depth: 3,
            seed: 0,
        }
    }
}

/// Node layout: nodes live in a flat array with the root at index 0;
/// `left`/`right` are indices into that array. Rows go left iff
/// `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode<T: Scalar> {
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf {
        value: T,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree<T: Scalar = f64> {
    pub nodes: Vec<TreeNode<T>>,
}

impl<T: Scalar> RegressionTree<T> {
    pub fn evaluate(&self, row: ArrayView1<'_, T>) -> T {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<T: Scalar>(nodes: &[TreeNode<T>], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel<T: Scalar = f64> {
    #[serde(rename = "base")]
    pub base_prediction: T,
    pub learning_rate: T,
    pub n_trees: usize,
    pub min_leaf: usize,
    pub max_depth: usize,
    pub feature_count: usize,
    pub trees: Vec<RegressionTree<T>>,
}

impl<T: Scalar> GbmModel<T> {
    pub fn predict_row(&self, row: ArrayView1<'_, T>) -> T {
        let mut p = self.base_prediction;
        for tree in &self.trees {
            p += self.learning_rate * tree.evaluate(row);
        }
        p
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self>
    where
        T: serde::de::DeserializeOwned,
    {
        Ok(serde_json::from_str(s)?)
    }
}

impl<T: Scalar> ModelOracle<T> for GbmModel<T> {
    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn predict_batch(&self, batch: ArrayView2<'_, T>) -> Result<Array1<T>> {
        Ok(batch.rows().into_iter().map(|r| self.predict_row(r)).collect())
    }
}

/// Side products of training.
#[derive(Debug, Clone)]
pub struct TrainingTrace<T: Scalar> {
    /// In-sample predictions after the last tree.
    pub fitted: Array1<T>,
    /// Training MSE after the base prediction (index 0) and after each tree.
    pub mse: Vec<T>,
    pub r_squared: T,
}

pub fn train_gbm<T: Scalar>(ds: &Dataset<T>, params: &GbmParams) -> Result<GbmModel<T>> {
    train_gbm_traced(ds, params).map(|(m, _)| m)
}

/// Fits least-squares gradient boosting on the whole dataset: each tree is
/// a greedy variance-reduction CART fit to the current residuals.
pub fn train_gbm_traced<T: Scalar>(ds: &Dataset<T>, params: &GbmParams) -> Result<(GbmModel<T>, TrainingTrace<T>)> {
    let x = ds.x().view();
    let y = ds.y();
    let n = ds.n_rows();
    let min_leaf = params.min_leaf.max(1);
    let learning_rate = T::lit(params.learning_rate);

    let base = if y.iter().all(|&v| v == y[0]) {
        y[0]
    } else {
        scalar::mean(y.iter().copied())
    };
    let mut model = GbmModel {
        base_prediction: base,
        learning_rate,
        n_trees: params.n_trees,
        min_leaf,
        max_depth: params.max_depth,
        feature_count: ds.n_features(),
        trees: Vec::with_capacity(params.n_trees),
    };
    let mut fitted = Array1::from_elem(n, base);
    let mse = |fitted: &Array1<T>| scalar::mean(y.iter().zip(fitted).map(|(&a, &b)| (a - b) * (a - b)));
    let mut history = vec![mse(&fitted)];

    if n <= 2 * min_leaf {
        log::warn!(
            "{n} rows cannot hold two leaves of {min_leaf}; fitting a constant model"
        );
    } else {
        let presorted: Vec<Vec<usize>> = (0..ds.n_features())
            .map(|f| {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| x[[a, f]].partial_cmp(&x[[b, f]]).unwrap().then(a.cmp(&b)));
                order
            })
            .collect();
        let mut builder = TreeBuilder {
            x,
            presorted: &presorted,
            min_leaf,
            max_depth: params.max_depth,
            residual: vec![T::zero(); n],
            in_node: vec![false; n],
        };
        for _ in 0..params.n_trees {
            for i in 0..n {
                builder.residual[i] = y[i] - fitted[i];
            }
            let tree = builder.build();
            for (i, row) in x.rows().into_iter().enumerate() {
                fitted[i] += learning_rate * tree.evaluate(row);
            }
            model.trees.push(tree);
            history.push(mse(&fitted));
        }
    }

    let r_squared = scalar::r_squared(
        y.as_slice().expect("contiguous target"),
        fitted.as_slice().unwrap(),
        scalar::mean(y.iter().copied()),
    )
    .unwrap_or(T::one());
    Ok((
        model,
        TrainingTrace {
            fitted,
            mse: history,
            r_squared,
        },
    ))
}

struct TreeBuilder<'a, T: Scalar> {
    x: ArrayView2<'a, T>,
    presorted: &'a [Vec<usize>],
    min_leaf: usize,
    max_depth: usize,
    residual: Vec<T>,
    in_node: Vec<bool>,
}

struct Split<T> {
    feature: usize,
    threshold: T,
    gain: T,
}

impl<T: Scalar> TreeBuilder<'_, T> {
    fn build(&mut self) -> RegressionTree<T> {
        let mut nodes = Vec::new();
        let rows: Vec<usize> = (0..self.x.nrows()).collect();
        self.grow(&mut nodes, rows, 0);
        RegressionTree { nodes }
    }

    fn grow(&mut self, nodes: &mut Vec<TreeNode<T>>, rows: Vec<usize>, depth: usize) -> usize {
        let at = nodes.len();
        let sum: T = rows.iter().map(|&r| self.residual[r]).sum();
        let leaf_value = sum / T::from_count(rows.len());
        nodes.push(TreeNode::Leaf { value: leaf_value });
        if depth >= self.max_depth || rows.len() < 2 * self.min_leaf {
            return at;
        }
        let Some(split) = self.best_split(&rows, sum) else {
            return at;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.x[[r, split.feature]] <= split.threshold);
        let left = self.grow(nodes, left_rows, depth + 1);
        let right = self.grow(nodes, right_rows, depth + 1);
        nodes[at] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }

    /// Maximizes `SL^2/nL + SR^2/nR - S^2/n` over midpoints of adjacent
    /// distinct values; strict improvement keeps the lowest feature and
    /// threshold on ties.
    fn best_split(&mut self, rows: &[usize], sum: T) -> Option<Split<T>> {
        let n = rows.len();
        for &r in rows {
            self.in_node[r] = true;
        }
        let parent = sum * sum / T::from_count(n);
        let mut best: Option<Split<T>> = None;
        let mut ordered = Vec::with_capacity(n);
        for (f, order) in self.presorted.iter().enumerate() {
            ordered.clear();
            ordered.extend(order.iter().copied().filter(|&r| self.in_node[r]));
            let mut left_sum = T::zero();
            for idx in 0..n - 1 {
                let r = ordered[idx];
                left_sum += self.residual[r];
                let left_n = idx + 1;
                if left_n < self.min_leaf {
                    continue;
                }
                if n - left_n < self.min_leaf {
                    break;
                }
                let v = self.x[[r, f]];
                let next = self.x[[ordered[idx + 1], f]];
                if v == next {
                    continue;
                }
                let right_sum = sum - left_sum;
                let gain = left_sum * left_sum / T::from_count(left_n)
                    + right_sum * right_sum / T::from_count(n - left_n)
                    - parent;
                if gain > T::zero() && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Split {
                        feature: f,
                        threshold: midpoint(v, next),
                        gain,
                    });
                }
            }
        }
        for &r in rows {
            self.in_node[r] = false;
        }
        best
    }
}

pub(crate) fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let mid = lo + (hi - lo) / T::lit(2.0);
    if mid < hi {
        mid
    } else {
        lo
    }
}
