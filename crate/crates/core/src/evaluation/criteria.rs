//! Validity curves and p-value quality criteria.

use serde::{Deserialize, Serialize};

use crate::conformal::{PValues, PredictionSet};
use crate::data::{BinaryLabel, PerClass};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A statistic reported over all test instances and per true class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Grouped {
    pub all: Option<f64>,
    pub malicious: Option<f64>,
    pub benign: Option<f64>,
}

#[derive(Default)]
struct GroupAccumulator {
    sum: PerClass<f64>,
    count: PerClass<usize>,
}

impl GroupAccumulator {
    fn add(&mut self, label: BinaryLabel, v: f64) {
        self.sum[label] += v;
        self.count[label] += 1;
    }

    fn finish(&self) -> Grouped {
        let mean = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
        Grouped {
            all: mean(
                self.sum.benign + self.sum.malicious,
                self.count.benign + self.count.malicious,
            ),
            malicious: mean(self.sum.malicious, self.count.malicious),
            benign: mean(self.sum.benign, self.count.benign),
        }
    }
}

/// Per-class error rate of prediction sets over a grid of significance levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityCurve {
    pub deltas: Vec<f64>,
    /// `errors[class][k]`: fraction of that class's test instances whose set at
    /// `deltas[k]` misses the true label.
    pub errors: PerClass<Vec<Option<f64>>>,
}

/// `sets[i][k]` is the set of test instance `i` at `deltas[k]`.
pub fn validity_curve<T: Scalar>(
    deltas: &[f64],
    sets: &[Vec<PredictionSet<T>>],
    truths: &[BinaryLabel],
) -> Result<ValidityCurve> {
    if sets.len() != truths.len() {
        return Err(Error::InvalidParameter(
            "sets and truths differ in length".into(),
        ));
    }
    let mut misses: PerClass<Vec<usize>> =
        PerClass::new(vec![0; deltas.len()], vec![0; deltas.len()]);
    let mut count: PerClass<usize> = PerClass::default();
    for (row, &truth) in sets.iter().zip(truths) {
        if row.len() != deltas.len() {
            return Err(Error::InvalidParameter(
                "set row does not match delta grid".into(),
            ));
        }
        count[truth] += 1;
        for (k, set) in row.iter().enumerate() {
            if !set.contains(truth) {
                misses[truth][k] += 1;
            }
        }
    }
    Ok(ValidityCurve {
        deltas: deltas.to_vec(),
        errors: misses.map(|label, m| {
            m.iter()
                .map(|&e| (count[label] > 0).then(|| e as f64 / count[label] as f64))
                .collect()
        }),
    })
}

/// Mean of several curves over the same grid.
pub fn mean_curve(curves: &[ValidityCurve]) -> Option<ValidityCurve> {
    let first = curves.first()?;
    let k = first.deltas.len();
    let errors = PerClass::from_fn(|label| {
        (0..k)
            .map(|j| {
                let v: Vec<f64> = curves.iter().filter_map(|c| c.errors[label][j]).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect()
    });
    Some(ValidityCurve {
        deltas: first.deltas.clone(),
        errors,
    })
}

/// Observed unconfidence: mean p-value of the wrong class.
pub fn ou_criterion<T: Scalar>(p: &[(PValues<T>, BinaryLabel)]) -> Result<Grouped> {
    if p.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut acc = GroupAccumulator::default();
    for (pv, truth) in p {
        acc.add(*truth, pv.get(truth.other()).as_f64());
    }
    Ok(acc.finish())
}

/// Average prediction-set size per significance level: `sets[i][k]` at `deltas[k]`.
pub fn n_criterion<T: Scalar>(
    sets: &[Vec<PredictionSet<T>>],
    truths: &[BinaryLabel],
    levels: usize,
) -> Result<Vec<Grouped>> {
    if sets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if sets.len() != truths.len() {
        return Err(Error::InvalidParameter(
            "sets and truths differ in length".into(),
        ));
    }
    (0..levels)
        .map(|k| {
            let mut acc = GroupAccumulator::default();
            for (row, &truth) in sets.iter().zip(truths) {
                let set = row.get(k).ok_or_else(|| {
                    Error::InvalidParameter("set row shorter than level count".into())
                })?;
                acc.add(truth, set.len() as f64);
            }
            Ok(acc.finish())
        })
        .collect()
}

/// Mean of each group over several reports.
pub fn mean_grouped(items: &[Grouped]) -> Grouped {
    fn avg(v: impl Iterator<Item = Option<f64>>) -> Option<f64> {
        let v: Vec<f64> = v.flatten().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
    Grouped {
        all: avg(items.iter().map(|g| g.all)),
        malicious: avg(items.iter().map(|g| g.malicious)),
        benign: avg(items.iter().map(|g| g.benign)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{prediction_set, uniform, CpVariant};
    use BinaryLabel::{Benign as B, Malicious as M};

    fn pv(b: f64, m: f64) -> PValues<f64> {
        PValues::new(b, m, CpVariant::LabelConditionalInductive)
    }

    fn set(b: bool, m: bool) -> PredictionSet<f64> {
        PredictionSet {
            members: PerClass::new(b, m),
            significance: uniform(0.1),
        }
    }

    #[test]
    fn ou_mean_of_wrong_class() {
        let g = ou_criterion(&[(pv(0.9, 0.1), B), (pv(0.3, 0.8), M)]).unwrap();
        assert!((g.all.unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(g.benign, Some(0.1));
        assert_eq!(g.malicious, Some(0.3));
    }

    #[test]
    fn n_criterion_average_size() {
        let sets = vec![
            vec![set(true, false)],
            vec![set(true, true)],
            vec![set(false, false)],
        ];
        let g = n_criterion(&sets, &[B, M, B], 1).unwrap();
        assert_eq!(g[0].all, Some(1.0));
        assert_eq!(g[0].benign, Some(0.5));
        assert_eq!(g[0].malicious, Some(2.0));
    }

    #[test]
    fn zero_significance_keeps_both_labels() {
        let ps = [pv(0.001, 0.5), pv(1.0, 0.002)];
        let sets: Vec<Vec<_>> = ps
            .iter()
            .map(|p| vec![prediction_set(p, uniform(0.0))])
            .collect();
        let curve = validity_curve(&[0.0], &sets, &[B, M]).unwrap();
        assert_eq!(curve.errors.benign[0], Some(0.0));
        assert_eq!(curve.errors.malicious[0], Some(0.0));
        assert_eq!(n_criterion(&sets, &[B, M], 1).unwrap()[0].all, Some(2.0));
    }

    #[test]
    fn empty_sets_are_errors() {
        let sets = vec![vec![set(false, false)], vec![set(false, false)]];
        let curve = validity_curve(&[0.99], &sets, &[B, M]).unwrap();
        assert_eq!(curve.errors.benign[0], Some(1.0));
        assert_eq!(curve.errors.malicious[0], Some(1.0));
    }

    #[test]
    fn class_without_instances_is_undefined() {
        let sets = vec![vec![set(true, false)]];
        let curve = validity_curve(&[0.5], &sets, &[B]).unwrap();
        assert_eq!(curve.errors.malicious[0], None);
    }
}
