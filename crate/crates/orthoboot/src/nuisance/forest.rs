//! Regression random forest with small-subsample trees.
//!
//! Each tree is grown on a without-replacement subsample of size
//! floor(n^subsample_exponent). Splits are axis-aligned, placed at the
//! midpoint between sorted unique feature values, and chosen by variance
//! reduction over a random feature subset per node.

use rand::seq::index::sample as sample_without_replacement;
use rand::Rng;
use rayon::prelude::*;

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::nuisance::Predictor;
use crate::scalar::{real, Scalar};
use crate::stream::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Count(usize),
    /// ceil(q / 3), resolved when the data dimension is known.
    ThirdOfFeatures,
}

impl MaxFeatures {
    fn resolve(self, q: usize) -> Result<usize> {
        let m = match self {
            MaxFeatures::All => q,
            MaxFeatures::Count(c) => {
                if c == 0 {
                    return Err(Error::invalid("max_features must be positive"));
                }
                c.min(q)
            }
            MaxFeatures::ThirdOfFeatures => q.div_ceil(3),
        };
        Ok(m.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ForestConfig {
    pub num_trees: usize,
    pub subsample_exponent: f64,
    pub min_leaf: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            num_trees: 200,
            subsample_exponent: 0.49,
            min_leaf: 5,
            max_features: MaxFeatures::ThirdOfFeatures,
            seed: 0,
        }
    }
}

impl ForestConfig {
    fn validate(&self, n: usize) -> Result<usize> {
        if self.num_trees == 0 {
            return Err(Error::invalid("num_trees must be positive"));
        }
        if self.min_leaf == 0 {
            return Err(Error::invalid("min_leaf must be positive"));
        }
        if !(0.0..1.0).contains(&self.subsample_exponent) || self.subsample_exponent <= 0.0 {
            return Err(Error::invalid("subsample_exponent must lie in (0, 1)"));
        }
        let m = (n as f64).powf(self.subsample_exponent).floor() as usize;
        Ok(m.clamp(1, n))
    }
}

#[derive(Debug, Clone)]
enum Node<F> {
    Leaf(F),
    Split {
        feature: usize,
        threshold: F,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone)]
struct Tree<F> {
    nodes: Vec<Node<F>>,
}

impl<F: Scalar> Tree<F> {
    fn predict(&self, x: &[F]) -> F {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

/// A fitted regression forest; prediction averages the member trees.
pub struct Forest<F> {
    trees: Vec<Tree<F>>,
}

impl<F: Scalar> Predictor<F> for Forest<F> {
    fn predict(&self, x: &[F]) -> F {
        let sum: F = self.trees.iter().map(|t| t.predict(x)).sum();
        sum / real::<F>(self.trees.len() as f64)
    }
}

struct TreeBuilder<'a, F> {
    x: &'a Matrix<F>,
    y: &'a [F],
    min_leaf: usize,
    mtry: usize,
    nodes: Vec<Node<F>>,
}

impl<'a, F: Scalar> TreeBuilder<'a, F> {
    fn build<R: Rng>(&mut self, indices: &mut [usize], rng: &mut R) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf(F::zero())); // placeholder
        let target_mean = self.mean(indices);
        if indices.len() < 2 * self.min_leaf {
            self.nodes[id as usize] = Node::Leaf(target_mean);
            return id;
        }
        match self.best_split(indices, rng) {
            None => {
                self.nodes[id as usize] = Node::Leaf(target_mean);
                id
            }
            Some((feature, threshold)) => {
                let split_at = partition(indices, |i| self.x.row(i)[feature] <= threshold);
                // both sides non-empty by construction of the threshold
                let (left_idx, right_idx) = indices.split_at_mut(split_at);
                let left = self.build(left_idx, rng);
                let right = self.build(right_idx, rng);
                self.nodes[id as usize] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                id
            }
        }
    }

    fn mean(&self, indices: &[usize]) -> F {
        let sum: F = indices.iter().map(|&i| self.y[i]).sum();
        sum / real::<F>(indices.len() as f64)
    }

    /// Best (feature, midpoint threshold) by sum-of-squares reduction over a
    /// random subset of features, honoring min_leaf on both sides.
    fn best_split<R: Rng>(&self, indices: &[usize], rng: &mut R) -> Option<(usize, F)> {
        let q = self.x.ncols();
        let features = sample_without_replacement(rng, q, self.mtry.min(q));
        let n = indices.len();
        let mut best: Option<(usize, F, F)> = None; // (feature, threshold, score)

        let mut order: Vec<usize> = Vec::with_capacity(n);
        for f in features.iter() {
            order.clear();
            order.extend_from_slice(indices);
            order.sort_by(|&a, &b| {
                self.x.row(a)[f]
                    .partial_cmp(&self.x.row(b)[f])
                    .expect("NaN covariate")
            });

            let total: F = order.iter().map(|&i| self.y[i]).sum();
            let mut left_sum = F::zero();
            for k in 1..n {
                left_sum += self.y[order[k - 1]];
                if k < self.min_leaf || n - k < self.min_leaf {
                    continue;
                }
                let xl = self.x.row(order[k - 1])[f];
                let xr = self.x.row(order[k])[f];
                if xl >= xr {
                    continue; // tied values cannot be separated
                }
                // maximizing sum_l^2/n_l + sum_r^2/n_r is equivalent to
                // minimizing the children's pooled sum of squares
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / real::<F>(k as f64)
                    + right_sum * right_sum / real::<F>((n - k) as f64);
                if best.map_or(true, |(_, _, s)| score > s) {
                    let threshold = (xl + xr) / real::<F>(2.0);
                    best = Some((f, threshold, score));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }
}

/// Stable partition of `indices` by `pred`; returns the boundary.
fn partition<P: Fn(usize) -> bool>(indices: &mut [usize], pred: P) -> usize {
    let mut hold: Vec<usize> = Vec::with_capacity(indices.len());
    let mut k = 0;
    for pos in 0..indices.len() {
        let i = indices[pos];
        if pred(i) {
            indices[k] = i;
            k += 1;
        } else {
            hold.push(i);
        }
    }
    indices[k..].copy_from_slice(&hold);
    k
}

/// Fit a regression forest of `cfg.num_trees` trees, each grown on a
/// without-replacement subsample of size floor(n^subsample_exponent).
pub fn fit_forest<F: Scalar>(x: &Matrix<F>, y: &[F], cfg: &ForestConfig) -> Result<Forest<F>> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("fit_forest requires n >= 2"));
    }
    if y.len() != n {
        return Err(Error::invalid("y length must match x rows"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("targets must be finite"));
    }
    let subsample = cfg.validate(n)?;
    let mtry = cfg.max_features.resolve(x.ncols())?;

    let trees: Vec<Tree<F>> = (0..cfg.num_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(cfg.seed, t as u64);
            let mut indices: Vec<usize> =
                sample_without_replacement(&mut rng, n, subsample).into_vec();
            let mut builder = TreeBuilder {
                x,
                y,
                min_leaf: cfg.min_leaf,
                mtry,
                nodes: Vec::new(),
            };
            builder.build(&mut indices, &mut rng);
            Tree {
                nodes: builder.nodes,
            }
        })
        .collect();

    Ok(Forest { trees })
}
