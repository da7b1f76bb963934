//! Turning conventional forest posteriors into prediction sets for comparison.

use rand::Rng;

use crate::conformal::{uniform, PredictionSet, TieRule};
use crate::data::PerClass;
use crate::forest::{argmax, Posterior};
use crate::rng::RngSeed;
use crate::scalar::Scalar;

/// Probability of adding the runner-up class `k` to the set `{j}` at level `delta`:
/// `clamp((1 - delta - p_j) / p_k, 0, 1)`, and 0 when `p_k = 0`.
pub fn inclusion_probability<T: Scalar>(posterior: &Posterior<T>, delta: T, tie: TieRule) -> T {
    let top = argmax(posterior, tie.label());
    let p_top = posterior[top];
    let p_other = posterior[top.other()];
    if p_other <= T::zero() {
        return T::zero();
    }
    ((T::one() - delta - p_top) / p_other)
        .max(T::zero())
        .min(T::one())
}

/// One uniform draw per instance, so sets built from the same seed at
/// different levels are nested.
pub fn baseline_draws<T: Scalar>(n: usize, seed: RngSeed) -> Vec<T> {
    let mut rng = seed.rng();
    (0..n).map(|_| T::lit(rng.random::<f64>())).collect()
}

/// Sets that always contain the most probable class and add the other one at random.
pub fn baseline_rf_sets<T: Scalar>(
    posteriors: &[Posterior<T>],
    delta: T,
    seed: RngSeed,
    tie: TieRule,
) -> Vec<PredictionSet<T>> {
    let draws = baseline_draws::<T>(posteriors.len(), seed);
    baseline_sets_with_draws(posteriors, delta, &draws, tie)
}

pub fn baseline_sets_with_draws<T: Scalar>(
    posteriors: &[Posterior<T>],
    delta: T,
    draws: &[T],
    tie: TieRule,
) -> Vec<PredictionSet<T>> {
    posteriors
        .iter()
        .zip(draws)
        .map(|(p, &u)| {
            let top = argmax(p, tie.label());
            let include_other = u < inclusion_probability(p, delta, tie);
            let mut members = PerClass::new(false, false);
            members[top] = true;
            members[top.other()] = include_other;
            PredictionSet {
                members,
                significance: uniform(delta),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::BinaryLabel;

    #[test]
    fn inclusion_probabilities() {
        let tie = TieRule::Benign;
        let p: f64 = inclusion_probability(&PerClass::new(0.9, 0.1), 0.05, tie);
        assert!((p - 0.5).abs() < 1e-12);
        assert_eq!(
            inclusion_probability(&PerClass::new(1.0, 0.0), 0.0, tie),
            0.0
        );
        assert_eq!(
            inclusion_probability(&PerClass::new(0.6, 0.4), 0.5, tie),
            0.0
        );
        assert_eq!(
            inclusion_probability(&PerClass::new(0.3, 0.7), 0.0, tie),
            1.0
        );
    }

    #[test]
    fn sets_contain_argmax_and_are_nested() {
        let posteriors: Vec<Posterior<f64>> = (0..200)
            .map(|i| {
                let b = i as f64 / 199.0;
                PerClass::new(b, 1.0 - b)
            })
            .collect();
        let seed = RngSeed(11);
        let mut prev: Option<Vec<PredictionSet<f64>>> = None;
        for k in 0..20 {
            let delta = k as f64 / 20.0;
            let sets = baseline_rf_sets(&posteriors, delta, seed, TieRule::Benign);
            for (p, s) in posteriors.iter().zip(&sets) {
                assert!(s.contains(argmax(p, BinaryLabel::Benign)));
            }
            if let Some(prev) = &prev {
                assert!(sets
                    .iter()
                    .zip(prev)
                    .all(|(now, before)| now.is_subset_of(before)));
            }
            prev = Some(sets);
        }
        let certain = baseline_rf_sets(&[PerClass::new(1.0, 0.0)], 0.0, seed, TieRule::Benign);
        assert_eq!(certain[0].len(), 1);
    }

    #[test]
    fn empirical_inclusion_rate() {
        let posteriors = vec![PerClass::new(0.9, 0.1); 20_000];
        let sets = baseline_rf_sets(&posteriors, 0.05, RngSeed(3), TieRule::Benign);
        let rate = sets.iter().filter(|s| s.len() == 2).count() as f64 / 20_000.0;
        assert!((rate - 0.5).abs() < 0.02, "rate {rate}");
    }
}
