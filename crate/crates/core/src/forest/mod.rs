//! Random forest classifier whose averaged leaf-ratio posteriors drive the
//! nonconformity measure.

mod tree;

pub use tree::{DecisionTree, Node, Posterior};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BinaryLabel, Dataset, PerClass};
use crate::error::{Error, Result};
use crate::rng::{RngSeed, Stream};
use crate::scalar::Scalar;
use tree::{grow_tree, TrainingMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitCriterion {
    #[default]
    Gini,
}

/// Growth settings of a single tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// Candidate features per node; `None` means `floor(sqrt(d))`.
    pub mtry: Option<usize>,
    pub min_leaf_count: usize,
    pub max_depth: Option<usize>,
    /// Grow on a bootstrap sample of size `n`; `false` uses every instance once.
    pub bootstrap: bool,
    pub criterion: SplitCriterion,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            mtry: None,
            min_leaf_count: 1,
            max_depth: None,
            bootstrap: true,
            criterion: SplitCriterion::Gini,
        }
    }
}

impl TreeParams {
    pub fn resolve_mtry(&self, dimension: usize) -> Result<usize> {
        let mtry = self.mtry.unwrap_or_else(|| default_mtry(dimension));
        if mtry == 0 || mtry > dimension {
            return Err(Error::InvalidParameter(format!(
                "mtry {mtry} outside 1..={dimension}"
            )));
        }
        if self.min_leaf_count == 0 {
            return Err(Error::InvalidParameter(
                "min_leaf_count must be at least 1".into(),
            ));
        }
        Ok(mtry)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub trees: usize,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            tree: TreeParams::default(),
        }
    }
}

/// `floor(sqrt(d))`, at least 1.
pub fn default_mtry(dimension: usize) -> usize {
    let mut r = (dimension as f64).sqrt() as usize;
    while (r + 1) * (r + 1) <= dimension {
        r += 1;
    }
    while r * r > dimension {
        r -= 1;
    }
    r.max(1)
}

/// Grows one tree on `proper_training` (every instance must be labelled).
pub fn train_tree<T: Scalar>(
    proper_training: &Dataset<T>,
    params: &TreeParams,
    seed: RngSeed,
) -> Result<DecisionTree<T>> {
    let matrix = matrix_of(proper_training)?;
    let mtry = params.resolve_mtry(proper_training.dimension())?;
    Ok(grow_tree(&matrix, params, mtry, seed))
}

fn matrix_of<T: Scalar>(data: &Dataset<T>) -> Result<TrainingMatrix<T>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labels = data.labels()?;
    TrainingMatrix::from_rows(
        data.dimension(),
        data.instances()
            .iter()
            .zip(labels)
            .map(|(inst, l)| (inst.features.as_slice(), l)),
    )
}

/// Ensemble of trees averaging their leaf posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest<T> {
    trees: Vec<DecisionTree<T>>,
    mtry: usize,
    seed: RngSeed,
    dimension: usize,
}

impl<T: Scalar> RandomForest<T> {
    /// Trains `params.trees` trees in parallel; tree `t` uses the child seed `(Tree, t)`.
    pub fn train(
        proper_training: &Dataset<T>,
        params: &ForestParams,
        seed: RngSeed,
    ) -> Result<Self> {
        if params.trees == 0 {
            return Err(Error::InvalidParameter(
                "forest needs at least one tree".into(),
            ));
        }
        let matrix = matrix_of(proper_training)?;
        let mtry = params.tree.resolve_mtry(proper_training.dimension())?;
        let trees = (0..params.trees)
            .into_par_iter()
            .map(|t| {
                grow_tree(
                    &matrix,
                    &params.tree,
                    mtry,
                    seed.child(Stream::Tree, t as u64),
                )
            })
            .collect();
        Ok(RandomForest {
            trees,
            mtry,
            seed,
            dimension: proper_training.dimension(),
        })
    }

    /// Assembles a forest from already grown trees.
    pub fn from_trees(trees: Vec<DecisionTree<T>>, mtry: usize, seed: RngSeed) -> Result<Self> {
        let dimension = trees
            .first()
            .map(DecisionTree::dimension)
            .ok_or_else(|| Error::InvalidParameter("forest needs at least one tree".into()))?;
        let forest = RandomForest {
            trees,
            mtry,
            seed,
            dimension,
        };
        forest.validate()?;
        Ok(forest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::ModelFormat("forest without trees".into()));
        }
        for tree in &self.trees {
            if tree.dimension() != self.dimension {
                return Err(Error::ModelFormat("trees disagree on dimension".into()));
            }
            tree.validate()?;
        }
        Ok(())
    }

    pub fn trees(&self) -> &[DecisionTree<T>] {
        &self.trees
    }

    pub fn mtry(&self) -> usize {
        self.mtry
    }

    pub fn seed(&self) -> RngSeed {
        self.seed
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Mean of the per-tree posteriors.
    pub fn posterior(&self, x: &[T]) -> Result<Posterior<T>> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: x.len(),
            });
        }
        let mut sum = PerClass::new(T::zero(), T::zero());
        for tree in &self.trees {
            let p = tree.posterior(x);
            sum.benign = sum.benign + p.benign;
            sum.malicious = sum.malicious + p.malicious;
        }
        let t = T::from_count(self.trees.len());
        Ok(PerClass::new(sum.benign / t, sum.malicious / t))
    }

    pub fn posteriors(&self, data: &Dataset<T>) -> Result<Vec<Posterior<T>>> {
        data.instances()
            .par_iter()
            .map(|inst| self.posterior(&inst.features))
            .collect()
    }
}

/// Class with the larger posterior; equal posteriors resolve to `on_tie`.
pub fn argmax<T: Scalar>(p: &Posterior<T>, on_tie: BinaryLabel) -> BinaryLabel {
    if p.benign > p.malicious {
        BinaryLabel::Benign
    } else if p.malicious > p.benign {
        BinaryLabel::Malicious
    } else {
        on_tie
    }
}
