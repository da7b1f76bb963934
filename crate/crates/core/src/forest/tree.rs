//! CART-style classification tree grown on a bootstrap sample.

use std::cmp::Ordering;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{BinaryLabel, PerClass};
use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::scalar::Scalar;

use super::TreeParams;

/// Posterior class probabilities.
pub type Posterior<T> = PerClass<T>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node<T> {
    /// `x[feature] <= threshold` goes to `left`.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    /// Class counts of the (bootstrap) training instances that reached this leaf.
    Leaf { counts: PerClass<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<T> {
    dimension: usize,
    nodes: Vec<Node<T>>,
}

/// Column-major copy of a training set, shared by every tree of a forest.
#[derive(Debug, Clone)]
pub(crate) struct TrainingMatrix<T> {
    pub columns: Vec<Vec<T>>,
    pub labels: Vec<BinaryLabel>,
}

impl<T: Scalar> TrainingMatrix<T> {
    pub fn from_rows<'a>(
        dimension: usize,
        rows: impl Iterator<Item = (&'a [T], BinaryLabel)>,
    ) -> Result<Self> {
        let mut columns = vec![Vec::new(); dimension];
        let mut labels = Vec::new();
        for (features, label) in rows {
            if features.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: features.len(),
                });
            }
            for (col, &v) in columns.iter_mut().zip(features) {
                if !v.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "non-finite feature value {v}"
                    )));
                }
                col.push(v);
            }
            labels.push(label);
        }
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(TrainingMatrix { columns, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn dimension(&self) -> usize {
        self.columns.len()
    }
}

/// Exact comparison of Gini split quality.
///
/// For children with class counts `(a0, a1)` and `(b0, b1)` the weighted Gini impurity is
/// minimised exactly when `(a0² + a1²)/nA + (b0² + b1²)/nB` is maximised. Scores are kept
/// as integer fractions so equal-quality splits compare equal and tie-breaking is exact.
#[derive(Debug, Clone, Copy)]
struct SplitScore {
    num: u128,
    den: u128,
}

impl SplitScore {
    fn node(c: [u64; 2]) -> Self {
        let n = (c[0] + c[1]) as u128;
        SplitScore {
            num: (c[0] as u128).pow(2) + (c[1] as u128).pow(2),
            den: n,
        }
    }

    fn split(left: [u64; 2], right: [u64; 2]) -> Self {
        let l = SplitScore::node(left);
        let r = SplitScore::node(right);
        SplitScore {
            num: l.num * r.den + r.num * l.den,
            den: l.den * r.den,
        }
    }

    fn beats(&self, other: &SplitScore) -> bool {
        self.num * other.den > other.num * self.den
    }
}

struct Candidate<T> {
    feature: usize,
    threshold: T,
    score: SplitScore,
}

struct Grower<'a, T> {
    data: &'a TrainingMatrix<T>,
    params: &'a TreeParams,
    mtry: usize,
    weights: Vec<u32>,
    nodes: Vec<Node<T>>,
    scratch: Vec<(T, u32, BinaryLabel)>,
}

impl<'a, T: Scalar> Grower<'a, T> {
    fn counts(&self, samples: &[usize]) -> [u64; 2] {
        let mut c = [0u64; 2];
        for &i in samples {
            c[self.data.labels[i].index()] += self.weights[i] as u64;
        }
        c
    }

    fn best_split<R: Rng>(
        &mut self,
        samples: &[usize],
        parent: [u64; 2],
        rng: &mut R,
    ) -> Option<Candidate<T>> {
        let d = self.data.dimension();
        let mut features = index::sample(rng, d, self.mtry).into_vec();
        features.sort_unstable();

        let min_leaf = self.params.min_leaf_count as u64;
        let parent_score = SplitScore::node(parent);
        let mut best: Option<Candidate<T>> = None;

        for f in features {
            let column = &self.data.columns[f];
            self.scratch.clear();
            self.scratch.extend(
                samples
                    .iter()
                    .map(|&i| (column[i], self.weights[i], self.data.labels[i])),
            );
            self.scratch
                .sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

            let mut left = [0u64; 2];
            for k in 0..self.scratch.len() - 1 {
                let (v, w, label) = self.scratch[k];
                left[label.index()] += w as u64;
                let next = self.scratch[k + 1].0;
                // values are finite, so this only skips ties
                if v >= next {
                    continue;
                }
                let right = [parent[0] - left[0], parent[1] - left[1]];
                if left[0] + left[1] < min_leaf || right[0] + right[1] < min_leaf {
                    continue;
                }
                let score = SplitScore::split(left, right);
                if !score.beats(&parent_score) {
                    continue;
                }
                if best.as_ref().is_none_or(|b| score.beats(&b.score)) {
                    best = Some(Candidate {
                        feature: f,
                        threshold: midpoint(v, next),
                        score,
                    });
                }
            }
        }
        best
    }

    fn grow<R: Rng>(mut self, mut samples: Vec<usize>, rng: &mut R) -> Vec<Node<T>> {
        // (node slot, sample range, depth)
        let mut stack = vec![(0usize, 0usize, samples.len(), 0usize)];
        self.nodes.push(Node::Leaf {
            counts: PerClass::default(),
        });
        while let Some((slot, start, end, depth)) = stack.pop() {
            let range = &samples[start..end];
            let counts = self.counts(range);
            let leaf = Node::Leaf {
                counts: PerClass::new(counts[0] as u32, counts[1] as u32),
            };
            let pure = counts[0] == 0 || counts[1] == 0;
            let depth_capped = self.params.max_depth.is_some_and(|m| depth >= m);
            let too_small = counts[0] + counts[1] < 2 * self.params.min_leaf_count.max(1) as u64;
            if pure || depth_capped || too_small || range.len() < 2 {
                self.nodes[slot] = leaf;
                continue;
            }
            let Some(best) = self.best_split(range, counts, rng) else {
                self.nodes[slot] = leaf;
                continue;
            };
            let column = &self.data.columns[best.feature];
            let mid = start + partition(&mut samples[start..end], |&i| column[i] <= best.threshold);
            let left = self.nodes.len();
            let right = left + 1;
            self.nodes.push(Node::Leaf {
                counts: PerClass::default(),
            });
            self.nodes.push(Node::Leaf {
                counts: PerClass::default(),
            });
            self.nodes[slot] = Node::Split {
                feature: best.feature,
                threshold: best.threshold,
                left,
                right,
            };
            stack.push((right, mid, end, depth + 1));
            stack.push((left, start, mid, depth + 1));
        }
        self.nodes
    }
}

/// Midpoint of two consecutive distinct values, kept strictly below `hi`.
fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let mid = lo + (hi - lo) / T::lit(2.0);
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Stable-order-agnostic in-place partition; returns the number of elements satisfying `pred`.
fn partition<F: Fn(&usize) -> bool>(items: &mut [usize], pred: F) -> usize {
    let mut next = 0;
    for k in 0..items.len() {
        if pred(&items[k]) {
            items.swap(next, k);
            next += 1;
        }
    }
    next
}

pub(crate) fn grow_tree<T: Scalar>(
    data: &TrainingMatrix<T>,
    params: &TreeParams,
    mtry: usize,
    seed: RngSeed,
) -> DecisionTree<T> {
    let n = data.len();
    let mut rng = seed.rng();
    let mut weights = vec![0u32; n];
    if params.bootstrap {
        for _ in 0..n {
            weights[rng.random_range(0..n)] += 1;
        }
    } else {
        weights.fill(1);
    }
    let samples: Vec<usize> = (0..n).filter(|&i| weights[i] > 0).collect();
    let grower = Grower {
        data,
        params,
        mtry,
        weights,
        nodes: Vec::new(),
        scratch: Vec::with_capacity(samples.len()),
    };
    let nodes = grower.grow(samples, &mut rng);
    DecisionTree {
        dimension: data.dimension(),
        nodes,
    }
}

impl<T: Scalar> DecisionTree<T> {
    /// Builds a tree from explicit nodes; node 0 is the root.
    pub fn from_nodes(dimension: usize, nodes: Vec<Node<T>>) -> Result<Self> {
        let tree = DecisionTree { dimension, nodes };
        tree.validate()?;
        Ok(tree)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::ModelFormat("tree without nodes".into()));
        }
        let n = self.nodes.len();
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    left,
                    right,
                    ..
                } => {
                    if feature >= self.dimension {
                        return Err(Error::ModelFormat(format!(
                            "node {i} splits on feature {feature} of {}",
                            self.dimension
                        )));
                    }
                    if left <= i || right <= i || left >= n || right >= n {
                        return Err(Error::ModelFormat(format!("node {i} has invalid children")));
                    }
                }
                Node::Leaf { counts } => {
                    if counts.benign + counts.malicious == 0 {
                        return Err(Error::ModelFormat(format!("leaf {i} is empty")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_counts(&self, x: &[T]) -> PerClass<u32> {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Fraction of each class among the training instances in the leaf `x` falls into.
    pub fn posterior(&self, x: &[T]) -> Posterior<T> {
        let c = self.leaf_counts(x);
        let total = T::from_count((c.benign + c.malicious) as usize);
        PerClass::new(
            T::from_count(c.benign as usize) / total,
            T::from_count(c.malicious as usize) / total,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_ratio_posterior() {
        let tree = DecisionTree::<f64>::from_nodes(
            1,
            vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf {
                    counts: PerClass::new(3, 1),
                },
                Node::Leaf {
                    counts: PerClass::new(5, 0),
                },
            ],
        )
        .unwrap();
        assert_eq!(tree.posterior(&[0.2]), PerClass::new(0.75, 0.25));
        assert_eq!(tree.posterior(&[0.9]), PerClass::new(1.0, 0.0));
        assert_eq!(tree.posterior(&[0.5]), PerClass::new(0.75, 0.25));
    }

    #[test]
    fn rejects_bad_structure() {
        let bad = vec![Node::<f64>::Split {
            feature: 3,
            threshold: 0.0,
            left: 1,
            right: 2,
        }];
        assert!(DecisionTree::from_nodes(2, bad).is_err());
        assert!(DecisionTree::<f64>::from_nodes(1, vec![]).is_err());
    }

    #[test]
    fn split_score_prefers_purer_children() {
        let pure = SplitScore::split([4, 0], [0, 4]);
        let mixed = SplitScore::split([3, 1], [1, 3]);
        assert!(pure.beats(&mixed));
        assert!(!mixed.beats(&pure));
        let parent = SplitScore::node([4, 4]);
        assert!(mixed.beats(&parent));
        // identical class proportions gain nothing
        assert!(!SplitScore::split([2, 2], [2, 2]).beats(&parent));
    }

    #[test]
    fn midpoint_stays_below_upper() {
        assert_eq!(midpoint(1.0f64, 3.0), 2.0);
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        assert_eq!(midpoint(lo, hi), lo);
    }
}
