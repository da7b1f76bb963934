//! Full (transductive) conformal p-values. Every call retrains the underlying
//! algorithm on the training set extended with the test pair, so these are only
//! practical on small problems.

use crate::data::{BinaryLabel, Dataset, Instance};
use crate::error::Result;
use crate::forest::{ForestParams, RandomForest};
use crate::rng::RngSeed;
use crate::scalar::{ratio, Scalar};

use super::nonconformity;

/// Scores every example of a bag against the whole bag.
///
/// Implementations must be invariant to the order of `examples` for the
/// transductive validity guarantee to hold.
pub trait ExchangeableScorer<T> {
    fn score_all(&self, examples: &[(&[T], BinaryLabel)]) -> Result<Vec<T>>;
}

impl<T, F> ExchangeableScorer<T> for F
where
    F: Fn(&[(&[T], BinaryLabel)]) -> Result<Vec<T>>,
{
    fn score_all(&self, examples: &[(&[T], BinaryLabel)]) -> Result<Vec<T>> {
        self(examples)
    }
}

fn extended_scores<T: Scalar, S: ExchangeableScorer<T> + ?Sized>(
    training: &Dataset<T>,
    test: &[T],
    hypothesized: BinaryLabel,
    scorer: &S,
) -> Result<(Vec<BinaryLabel>, Vec<T>)> {
    training.check_dimension(test)?;
    let labels = training.labels()?;
    let mut bag: Vec<(&[T], BinaryLabel)> = training
        .instances()
        .iter()
        .zip(&labels)
        .map(|(inst, &l)| (inst.features.as_slice(), l))
        .collect();
    bag.push((test, hypothesized));
    let scores = scorer.score_all(&bag)?;
    assert_eq!(scores.len(), bag.len(), "scorer must score every example");
    Ok((labels, scores))
}

/// `(#{i <= l : a_i >= a_{l+1}} + 1) / (l + 1)` with the bag extended by `(test, hypothesized)`.
pub fn tcp_pvalue<T: Scalar, S: ExchangeableScorer<T> + ?Sized>(
    training: &Dataset<T>,
    test: &[T],
    hypothesized: BinaryLabel,
    scorer: &S,
) -> Result<T> {
    let (_, scores) = extended_scores(training, test, hypothesized, scorer)?;
    let (own, rest) = scores.split_last().expect("bag is non-empty");
    let at_least = rest.iter().filter(|&&a| a >= *own).count();
    Ok(ratio(at_least + 1, rest.len() + 1))
}

/// Label-conditional transductive p-value: only training examples labelled
/// `hypothesized` enter the comparison, with `+1` in numerator and denominator.
pub fn lcmcp_pvalue<T: Scalar, S: ExchangeableScorer<T> + ?Sized>(
    training: &Dataset<T>,
    test: &[T],
    hypothesized: BinaryLabel,
    scorer: &S,
) -> Result<T> {
    let (labels, scores) = extended_scores(training, test, hypothesized, scorer)?;
    let (own, rest) = scores.split_last().expect("bag is non-empty");
    let mut same = 0;
    let mut at_least = 0;
    for (a, &l) in rest.iter().zip(&labels) {
        if l == hypothesized {
            same += 1;
            if *a >= *own {
                at_least += 1;
            }
        }
    }
    Ok(ratio(at_least + 1, same + 1))
}

/// 1-nearest-neighbour nonconformity: distance to the nearest other example with
/// the same label divided by distance to the nearest example with a different label.
#[derive(Debug, Clone, Copy, Default)]
pub struct NearestNeighbourScorer;

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(T::zero(), |acc, v| acc + v)
}

impl<T: Scalar> ExchangeableScorer<T> for NearestNeighbourScorer {
    fn score_all(&self, examples: &[(&[T], BinaryLabel)]) -> Result<Vec<T>> {
        let n = examples.len();
        let mut same = vec![T::infinity(); n];
        let mut other = vec![T::infinity(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = sq_dist(examples[i].0, examples[j].0);
                let slot = if examples[i].1 == examples[j].1 {
                    &mut same
                } else {
                    &mut other
                };
                slot[i] = slot[i].min(d);
                slot[j] = slot[j].min(d);
            }
        }
        Ok(same
            .into_iter()
            .zip(other)
            .map(|(s, o)| {
                let r = s.sqrt() / o.sqrt();
                if r.is_nan() {
                    T::zero()
                } else {
                    r
                }
            })
            .collect())
    }
}

/// Trains a forest on the bag and scores each example by `1 - P(own label | x)`.
#[derive(Debug, Clone)]
pub struct ForestScorer {
    pub params: ForestParams,
    pub seed: RngSeed,
}

impl<T: Scalar> ExchangeableScorer<T> for ForestScorer {
    fn score_all(&self, examples: &[(&[T], BinaryLabel)]) -> Result<Vec<T>> {
        let dim = examples.first().map_or(0, |e| e.0.len());
        let data = Dataset::unnamed(
            dim,
            examples
                .iter()
                .enumerate()
                .map(|(i, (x, y))| Instance::new(i.to_string(), x.to_vec(), Some(*y)))
                .collect(),
        )?;
        let forest = RandomForest::train(&data, &self.params, self.seed)?;
        examples
            .iter()
            .map(|(x, y)| forest.posterior(x).map(|p| nonconformity(&p, *y)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(points: &[(f64, BinaryLabel)]) -> Dataset<f64> {
        Dataset::unnamed(
            1,
            points
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| Instance::new(format!("{i}"), vec![x], Some(y)))
                .collect(),
        )
        .unwrap()
    }

    use BinaryLabel::{Benign as B, Malicious as M};

    #[test]
    fn single_training_example_has_two_ranks() {
        for (x, y) in [(0.0, B), (1.0, M)] {
            let train = data(&[(x, y)]);
            for test in [-1.0, 0.0, 0.5, 2.0] {
                for hyp in BinaryLabel::ALL {
                    let p = tcp_pvalue(&train, &[test], hyp, &NearestNeighbourScorer).unwrap();
                    assert!(p == 0.5 || p == 1.0, "p = {p}");
                }
            }
        }
    }

    #[test]
    fn duplicate_training_pair_is_counted() {
        let train = data(&[(0.0, B), (0.3, B), (1.0, M), (1.2, M), (0.7, M)]);
        let l = train.len() as f64;
        let p = tcp_pvalue(&train, &[0.3], B, &NearestNeighbourScorer).unwrap();
        assert!(p >= 2.0 / (l + 1.0));
        let p = lcmcp_pvalue(&train, &[1.2], M, &NearestNeighbourScorer).unwrap();
        assert!(p >= 2.0 / 4.0);

        let forest = ForestScorer {
            params: ForestParams {
                trees: 10,
                ..ForestParams::default()
            },
            seed: RngSeed(5),
        };
        let p = tcp_pvalue(&train, &[1.0], M, &forest).unwrap();
        assert!(p >= 2.0 / (l + 1.0));
    }

    #[test]
    fn no_examples_of_hypothesized_class() {
        let train = data(&[(0.0, B), (0.3, B)]);
        let p = lcmcp_pvalue(&train, &[5.0], M, &NearestNeighbourScorer).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn closures_are_scorers() {
        let constant =
            |ex: &[(&[f64], BinaryLabel)]| -> Result<Vec<f64>> { Ok(vec![0.5; ex.len()]) };
        let train = data(&[(0.0, B), (0.3, M), (0.6, B)]);
        assert_eq!(tcp_pvalue(&train, &[0.1], B, &constant).unwrap(), 1.0);
        assert_eq!(lcmcp_pvalue(&train, &[0.1], B, &constant).unwrap(), 1.0);
    }

    #[test]
    fn nearest_neighbour_ratio() {
        let a = [0.0];
        let b = [1.0];
        let c = [3.0];
        let s = NearestNeighbourScorer
            .score_all(&[(&a[..], B), (&b[..], M), (&c[..], B)])
            .unwrap();
        assert_eq!(s, vec![3.0 / 1.0, f64::INFINITY, 3.0 / 2.0]);
    }
}
