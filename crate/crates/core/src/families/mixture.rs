//! Mixtures of deterministic classifiers: pick component `i` with probability `alpha_i`.

use crate::error::{Error, Result};
use crate::model::{Classifier, Individual, OutcomeDistribution, SharedClassifier, PROB_SUM_TOL};

#[derive(Clone, Debug)]
pub struct MixtureClassifier {
    components: Vec<SharedClassifier>,
    weights: Vec<f64>,
}

impl MixtureClassifier {
    pub fn new(components: Vec<SharedClassifier>, weights: Vec<f64>) -> Result<Self> {
        let k = components
            .first()
            .ok_or_else(|| Error::contract("a mixture needs at least one component"))?
            .num_outcomes();
        if weights.len() != components.len() {
            return Err(Error::DimensionMismatch {
                context: "mixture weights",
                expected: components.len(),
                got: weights.len(),
            });
        }
        if let Some(g) = components.iter().find(|g| g.num_outcomes() != k) {
            return Err(Error::DimensionMismatch {
                context: "mixture component outcomes",
                expected: k,
                got: g.num_outcomes(),
            });
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::contract(format!(
                "mixture weights must be nonnegative and sum to 1 (sum {sum})"
            )));
        }
        Ok(Self { components, weights })
    }

    pub fn components(&self) -> &[SharedClassifier] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `probs[y] = sum_i alpha_i 1{g_i(x) = y}`.
pub fn mixture_distribution(h: &MixtureClassifier, x: &Individual) -> Result<OutcomeDistribution> {
    let mut probs = vec![0.0; h.components[0].num_outcomes()];
    for (g, w) in h.components.iter().zip(&h.weights) {
        probs[g.predict(x)?] += w;
    }
    OutcomeDistribution::new(probs)
}

impl Classifier for MixtureClassifier {
    fn num_outcomes(&self) -> usize {
        self.components[0].num_outcomes()
    }

    fn distribution(&self, x: &Individual) -> Result<OutcomeDistribution> {
        mixture_distribution(self, x)
    }
}
