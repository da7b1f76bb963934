//! Dataset representation, min-max normalization and seeded splitting.

use std::collections::HashSet;
use std::fmt;
use std::ops::{Index, IndexMut};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::scalar::Scalar;

/// Class of an application. Integer codes are stable: benign = 0, malicious = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLabel {
    Benign = 0,
    Malicious = 1,
}

impl BinaryLabel {
    pub const ALL: [BinaryLabel; 2] = [BinaryLabel::Benign, BinaryLabel::Malicious];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(BinaryLabel::Benign),
            1 => Some(BinaryLabel::Malicious),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            BinaryLabel::Benign => BinaryLabel::Malicious,
            BinaryLabel::Malicious => BinaryLabel::Benign,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinaryLabel::Benign => "benign",
            BinaryLabel::Malicious => "malicious",
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A pair of values, one per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PerClass<V> {
    pub benign: V,
    pub malicious: V,
}

impl<V> PerClass<V> {
    pub fn new(benign: V, malicious: V) -> Self {
        PerClass { benign, malicious }
    }

    pub fn from_fn(mut f: impl FnMut(BinaryLabel) -> V) -> Self {
        PerClass {
            benign: f(BinaryLabel::Benign),
            malicious: f(BinaryLabel::Malicious),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(BinaryLabel, &V) -> U) -> PerClass<U> {
        PerClass {
            benign: f(BinaryLabel::Benign, &self.benign),
            malicious: f(BinaryLabel::Malicious, &self.malicious),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (BinaryLabel, &V)> {
        [
            (BinaryLabel::Benign, &self.benign),
            (BinaryLabel::Malicious, &self.malicious),
        ]
        .into_iter()
    }
}

impl<V> Index<BinaryLabel> for PerClass<V> {
    type Output = V;
    fn index(&self, label: BinaryLabel) -> &V {
        match label {
            BinaryLabel::Benign => &self.benign,
            BinaryLabel::Malicious => &self.malicious,
        }
    }
}

impl<V> IndexMut<BinaryLabel> for PerClass<V> {
    fn index_mut(&mut self, label: BinaryLabel) -> &mut V {
        match label {
            BinaryLabel::Benign => &mut self.benign,
            BinaryLabel::Malicious => &mut self.malicious,
        }
    }
}

/// Feature vector with an optional label and an opaque application id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance<T> {
    pub id: String,
    pub features: Vec<T>,
    pub label: Option<BinaryLabel>,
}

impl<T> Instance<T> {
    pub fn new(id: impl Into<String>, features: Vec<T>, label: Option<BinaryLabel>) -> Self {
        Instance {
            id: id.into(),
            features,
            label,
        }
    }

    pub fn labelled(&self) -> Result<BinaryLabel> {
        self.label
            .ok_or_else(|| Error::MissingLabel(self.id.clone()))
    }
}

/// Ordered collection of instances sharing one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    instances: Vec<Instance<T>>,
    dimension: usize,
    feature_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    /// Validates that every instance has `feature_names.len()` features and that ids are unique.
    pub fn new(feature_names: Vec<String>, instances: Vec<Instance<T>>) -> Result<Self> {
        let dimension = feature_names.len();
        if dimension == 0 {
            return Err(Error::InvalidParameter(
                "dataset dimension must be positive".into(),
            ));
        }
        let mut seen = HashSet::with_capacity(instances.len());
        for inst in &instances {
            if inst.features.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: inst.features.len(),
                });
            }
            if !seen.insert(inst.id.as_str()) {
                return Err(Error::DuplicateId(inst.id.clone()));
            }
        }
        Ok(Dataset {
            instances,
            dimension,
            feature_names,
        })
    }

    /// Dataset with generated feature names `f0..f{d-1}`.
    pub fn unnamed(dimension: usize, instances: Vec<Instance<T>>) -> Result<Self> {
        Self::new((0..dimension).map(|i| format!("f{i}")).collect(), instances)
    }

    pub fn instances(&self) -> &[Instance<T>] {
        &self.instances
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, i: usize) -> &Instance<T> {
        &self.instances[i]
    }

    /// Labels of every instance; fails on the first unlabelled one.
    pub fn labels(&self) -> Result<Vec<BinaryLabel>> {
        self.instances.iter().map(Instance::labelled).collect()
    }

    pub fn class_counts(&self) -> PerClass<usize> {
        let mut counts = PerClass::default();
        for label in self.instances.iter().filter_map(|i| i.label) {
            counts[label] += 1;
        }
        counts
    }

    /// Indices of labelled instances of `label`, in dataset order.
    pub fn indices_of(&self, label: BinaryLabel) -> Vec<usize> {
        self.instances
            .iter()
            .enumerate()
            .filter(|(_, inst)| inst.label == Some(label))
            .map(|(i, _)| i)
            .collect()
    }

    /// New dataset holding the instances at `indices` in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset<T> {
        Dataset {
            instances: indices.iter().map(|&i| self.instances[i].clone()).collect(),
            dimension: self.dimension,
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn check_dimension(&self, features: &[T]) -> Result<()> {
        if features.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: features.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn map_features(&self, mut f: impl FnMut(usize, T) -> T) -> Dataset<T> {
        Dataset {
            instances: self
                .instances
                .iter()
                .map(|inst| Instance {
                    id: inst.id.clone(),
                    label: inst.label,
                    features: inst
                        .features
                        .iter()
                        .enumerate()
                        .map(|(j, &v)| f(j, v))
                        .collect(),
                })
                .collect(),
            dimension: self.dimension,
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn into_instances(self) -> Vec<Instance<T>> {
        self.instances
    }
}

/// Per-feature min/max fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Scalar> NormalizationParams<T> {
    pub fn fit(train: &Dataset<T>) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = train.dimension();
        let mut min = vec![T::infinity(); d];
        let mut max = vec![T::neg_infinity(); d];
        for inst in train.instances() {
            for (j, &v) in inst.features.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(NormalizationParams { min, max })
    }

    pub fn dimension(&self) -> usize {
        self.min.len()
    }

    /// Maps one value of feature `j` into `[0, 1]`. Constant features map to 0.
    pub fn scale(&self, j: usize, v: T) -> T {
        let (lo, hi) = (self.min[j], self.max[j]);
        if hi <= lo {
            return T::zero();
        }
        ((v - lo) / (hi - lo)).max(T::zero()).min(T::one())
    }

    pub fn apply_features(&self, features: &[T]) -> Result<Vec<T>> {
        if features.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: features.len(),
            });
        }
        Ok(features
            .iter()
            .enumerate()
            .map(|(j, &v)| self.scale(j, v))
            .collect())
    }

    pub fn apply(&self, data: &Dataset<T>) -> Result<Dataset<T>> {
        if data.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: data.dimension(),
            });
        }
        Ok(data.map_features(|j, v| self.scale(j, v)))
    }
}

/// Scaled training set, scaled other datasets, and the fitted parameters.
pub type Normalized<T> = (Dataset<T>, Vec<Dataset<T>>, NormalizationParams<T>);

/// Fits min-max scaling on `train` and applies it to `train` and every dataset in `others`.
pub fn normalize<T: Scalar>(train: &Dataset<T>, others: &[&Dataset<T>]) -> Result<Normalized<T>> {
    let params = NormalizationParams::fit(train)?;
    let scaled_train = params.apply(train)?;
    let scaled_others = others
        .iter()
        .map(|d| params.apply(d))
        .collect::<Result<Vec<_>>>()?;
    Ok((scaled_train, scaled_others, params))
}

/// Draws exactly `counts[k]` instances of each class without replacement.
///
/// Returns `(selected, remainder)`, both sorted ascending. Unlabelled
/// instances always land in the remainder.
pub fn stratified_sample<T: Scalar>(
    data: &Dataset<T>,
    counts: PerClass<usize>,
    seed: RngSeed,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = seed.rng();
    let mut selected = Vec::with_capacity(counts.benign + counts.malicious);
    for label in BinaryLabel::ALL {
        let mut pool = data.indices_of(label);
        let want = counts[label];
        if pool.len() < want {
            return Err(Error::InsufficientClass {
                label,
                requested: want,
                available: pool.len(),
            });
        }
        let (chosen, _) = pool.partial_shuffle(&mut rng, want);
        selected.extend_from_slice(chosen);
    }
    selected.sort_unstable();
    let mut mask = vec![false; data.len()];
    for &i in &selected {
        mask[i] = true;
    }
    let remainder = (0..data.len()).filter(|&i| !mask[i]).collect();
    Ok((selected, remainder))
}

/// Index sets of one inductive split. Indices refer to the dataset the plan was built from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitPlan {
    pub proper_training: Vec<usize>,
    pub calibration: Vec<usize>,
    pub test: Vec<usize>,
}

/// Number of calibration examples taken from a class of `n` training examples:
/// `round(fraction * n) - 1`, so the label-conditional p-value denominator is a round number.
pub fn calibration_count(n: usize, fraction: f64) -> i64 {
    (fraction * n as f64).round() as i64 - 1
}

/// Splits `training` into proper training and calibration parts, per class.
pub fn calibration_split<T: Scalar>(
    training: &Dataset<T>,
    fraction: f64,
    seed: RngSeed,
) -> Result<SplitPlan> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "calibration fraction {fraction} outside (0, 1)"
        )));
    }
    let available = training.class_counts();
    let mut counts = PerClass::default();
    for label in BinaryLabel::ALL {
        let n = available[label];
        let q = calibration_count(n, fraction);
        if n < 2 || q < 1 {
            return Err(Error::EmptyCalibrationClass {
                label,
                available: n,
            });
        }
        counts[label] = q as usize;
    }
    let (calibration, proper_training) = stratified_sample(training, counts, seed)?;
    Ok(SplitPlan {
        proper_training,
        calibration,
        test: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> Dataset<f64> {
        let inst = values
            .iter()
            .enumerate()
            .map(|(i, &v)| Instance::new(format!("a{i}"), vec![v], Some(BinaryLabel::Benign)))
            .collect();
        Dataset::unnamed(1, inst).unwrap()
    }

    fn labelled(benign: usize, malicious: usize) -> Dataset<f64> {
        let mut inst = Vec::new();
        for i in 0..benign {
            inst.push(Instance::new(
                format!("b{i}"),
                vec![i as f64],
                Some(BinaryLabel::Benign),
            ));
        }
        for i in 0..malicious {
            inst.push(Instance::new(
                format!("m{i}"),
                vec![i as f64],
                Some(BinaryLabel::Malicious),
            ));
        }
        Dataset::unnamed(1, inst).unwrap()
    }

    #[test]
    fn normalize_maps_endpoints() {
        let (train, _, _) = normalize(&column(&[2.0, 4.0, 6.0]), &[]).unwrap();
        let v: Vec<f64> = train.instances().iter().map(|i| i.features[0]).collect();
        assert_eq!(v, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn normalize_clamps_test_values() {
        let test = column(&[8.0, -3.0]);
        let (_, others, params) = normalize(&column(&[2.0, 4.0, 6.0]), &[&test]).unwrap();
        assert_eq!(others[0].get(0).features[0], 1.0);
        assert_eq!(others[0].get(1).features[0], 0.0);
        assert_eq!(params.min, vec![2.0]);
        assert_eq!(params.max, vec![6.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let (train, _, _) = normalize(&column(&[5.0, 5.0, 5.0]), &[]).unwrap();
        assert!(train.instances().iter().all(|i| i.features[0] == 0.0));
    }

    #[test]
    fn normalize_rejects_dimension_mismatch() {
        let other = Dataset::unnamed(2, vec![Instance::new("x", vec![0.0, 1.0], None)]).unwrap();
        assert!(matches!(
            normalize(&column(&[1.0, 2.0]), &[&other]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dataset_rejects_duplicate_ids_and_bad_rows() {
        let dup = vec![
            Instance::new("a", vec![1.0], None),
            Instance::new("a", vec![2.0], None),
        ];
        assert!(matches!(
            Dataset::unnamed(1, dup),
            Err(Error::DuplicateId(_))
        ));
        let bad = vec![Instance::new("a", vec![1.0, 2.0], None)];
        assert!(matches!(
            Dataset::<f64>::unnamed(1, bad),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn stratified_sample_exact_counts() {
        let data = labelled(4816, 1866);
        let (sel, rest) = stratified_sample(&data, PerClass::new(300, 300), RngSeed(7)).unwrap();
        assert_eq!(sel.len(), 600);
        assert_eq!(rest.len(), data.len() - 600);
        let picked = data.subset(&sel).class_counts();
        assert_eq!(picked, PerClass::new(300, 300));
        let again = stratified_sample(&data, PerClass::new(300, 300), RngSeed(7)).unwrap();
        assert_eq!(again.0, sel);
    }

    #[test]
    fn stratified_sample_zero_counts() {
        let data = labelled(5, 5);
        let (sel, rest) = stratified_sample(&data, PerClass::new(0, 0), RngSeed(1)).unwrap();
        assert!(sel.is_empty());
        assert_eq!(rest, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn stratified_sample_names_short_class() {
        let data = labelled(5, 2);
        let err = stratified_sample(&data, PerClass::new(1, 3), RngSeed(1)).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientClass {
                label: BinaryLabel::Malicious,
                requested: 3,
                available: 2
            }
        ));
        assert!(err.to_string().contains("malicious"));
    }

    #[test]
    fn calibration_counts_reproduce_reported_sizes() {
        assert_eq!(calibration_count(4500, 0.2), 899);
        assert_eq!(calibration_count(1500, 0.2), 299);
        assert_eq!(calibration_count(500, 0.2), 99);
        assert_eq!(calibration_count(10, 0.2), 1);

        let plan = calibration_split(&labelled(4500, 500), 0.2, RngSeed(3)).unwrap();
        let data = labelled(4500, 500);
        assert_eq!(
            data.subset(&plan.calibration).class_counts(),
            PerClass::new(899, 99)
        );
        assert_eq!(plan.proper_training.len() + plan.calibration.len(), 5000);
    }

    #[test]
    fn calibration_split_small_classes() {
        let data = labelled(10, 10);
        let plan = calibration_split(&data, 0.2, RngSeed(3)).unwrap();
        assert_eq!(
            data.subset(&plan.calibration).class_counts(),
            PerClass::new(1, 1)
        );
        // round(0.2 * 4) - 1 = 0
        assert!(matches!(
            calibration_split(&labelled(10, 4), 0.2, RngSeed(3)),
            Err(Error::EmptyCalibrationClass {
                label: BinaryLabel::Malicious,
                ..
            })
        ));
        assert!(calibration_split(&data, 1.0, RngSeed(3)).is_err());
    }
}
