//! Uncertainty scores for the cheap model's answers.
//!
//! Both scores live in `[0, 1]`; larger means less trustworthy.

use crate::error::{CoreError, Result};

/// Per-token conditional probabilities of one generated answer.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenProbs {
    probs: Vec<f64>,
}

impl TokenProbs {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(CoreError::EmptySequence);
        }
        if let Some(&p) = probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(CoreError::OutOfRange(p));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Self-reported confidences from repeated verbalized trials.
#[derive(Debug, Clone, PartialEq)]
pub struct VerbalizedTrials {
    confidences: Vec<f64>,
}

impl VerbalizedTrials {
    pub fn new(confidences: Vec<f64>) -> Result<Self> {
        if confidences.is_empty() {
            return Err(CoreError::EmptySequence);
        }
        if let Some(&c) = confidences.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(CoreError::OutOfRange(c));
        }
        Ok(Self { confidences })
    }

    pub fn confidences(&self) -> &[f64] {
        &self.confidences
    }

    pub fn n_trials(&self) -> usize {
        self.confidences.len()
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// One minus the average token probability.
pub fn logits_uncertainty(tp: &TokenProbs) -> f64 {
    (1.0 - mean(&tp.probs)).clamp(0.0, 1.0)
}

/// One minus the average verbalized confidence.
pub fn verbalized_uncertainty(vt: &VerbalizedTrials) -> f64 {
    (1.0 - mean(&vt.confidences)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn logits_examples() {
        let u = |p: Vec<f64>| logits_uncertainty(&TokenProbs::new(p).unwrap());
        assert_eq!(u(vec![1.0, 1.0, 1.0]), 0.0);
        assert_eq!(u(vec![0.5]), 0.5);
        assert!((u(vec![0.9, 0.8, 0.7]) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn verbalized_examples() {
        let u = |c: Vec<f64>| verbalized_uncertainty(&VerbalizedTrials::new(c).unwrap());
        assert_eq!(u(vec![1.0; 10]), 0.0);
        assert_eq!(u(vec![0.0; 10]), 1.0);
        assert!((u(vec![0.9, 0.7]) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(matches!(TokenProbs::new(vec![]), Err(CoreError::EmptySequence)));
        assert!(matches!(TokenProbs::new(vec![0.5, 0.0]), Err(CoreError::OutOfRange(_))));
        assert!(matches!(TokenProbs::new(vec![1.1]), Err(CoreError::OutOfRange(_))));
        assert!(matches!(
            VerbalizedTrials::new(vec![0.5, 1.5]),
            Err(CoreError::OutOfRange(v)) if v == 1.5
        ));
        assert!(matches!(VerbalizedTrials::new(vec![-0.1]), Err(CoreError::OutOfRange(_))));
        assert!(VerbalizedTrials::new(vec![]).is_err());
    }

    proptest! {
        #[test]
        fn logits_score_in_unit_interval_and_permutation_invariant(
            mut probs in prop::collection::vec(1e-6f64..=1.0, 1..64),
        ) {
            let a = logits_uncertainty(&TokenProbs::new(probs.clone()).unwrap());
            prop_assert!((0.0..1.0).contains(&a));
            probs.reverse();
            let b = logits_uncertainty(&TokenProbs::new(probs).unwrap());
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn raising_a_probability_lowers_the_score(
            probs in prop::collection::vec(0.01f64..0.9, 1..32),
            idx in any::<prop::sample::Index>(),
            bump in 0.01f64..0.09,
        ) {
            let i = idx.index(probs.len());
            let mut raised = probs.clone();
            raised[i] += bump;
            let before = logits_uncertainty(&TokenProbs::new(probs).unwrap());
            let after = logits_uncertainty(&TokenProbs::new(raised).unwrap());
            prop_assert!(after < before);
        }

        #[test]
        fn raising_a_confidence_lowers_the_score(
            conf in prop::collection::vec(0.0f64..0.9, 1..12),
            idx in any::<prop::sample::Index>(),
        ) {
            let i = idx.index(conf.len());
            let mut raised = conf.clone();
            raised[i] += 0.1;
            let before = verbalized_uncertainty(&VerbalizedTrials::new(conf).unwrap());
            let after = verbalized_uncertainty(&VerbalizedTrials::new(raised).unwrap());
            prop_assert!(after < before);
            prop_assert!((0.0..=1.0).contains(&after));
        }
    }
}
