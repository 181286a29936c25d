//! Linear-argmax classifiers `g(x) = argmax_y w . psi(x, y)` and pool files.

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{argmax, dot, DeterministicClassifier, Individual, SharedClassifier};

use super::FiniteFamily;

/// Joint feature map `psi(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FeatureMap {
    /// `(x, 1)` placed in the block of outcome `y`, zeros elsewhere; dimension `(input_dim + 1) k`.
    OneVsAll { input_dim: usize, outcomes: usize },
}

impl FeatureMap {
    pub fn dim(&self) -> usize {
        match *self {
            FeatureMap::OneVsAll { input_dim, outcomes } => (input_dim + 1) * outcomes,
        }
    }

    pub fn num_outcomes(&self) -> usize {
        match *self {
            FeatureMap::OneVsAll { outcomes, .. } => outcomes,
        }
    }

    pub fn features(&self, x: &Individual, y: usize) -> Result<Vec<f64>> {
        let mut psi = vec![0.0; self.dim()];
        match *self {
            FeatureMap::OneVsAll { input_dim, outcomes } => {
                self.check(x)?;
                if y >= outcomes {
                    return Err(Error::contract(format!("outcome {y} outside 0..{outcomes}")));
                }
                let block = &mut psi[y * (input_dim + 1)..(y + 1) * (input_dim + 1)];
                block[..input_dim].copy_from_slice(&x.features);
                block[input_dim] = 1.0;
            }
        }
        Ok(psi)
    }

    fn check(&self, x: &Individual) -> Result<()> {
        let FeatureMap::OneVsAll { input_dim, .. } = *self;
        if x.dim() != input_dim {
            return Err(Error::DimensionMismatch {
                context: "feature map input",
                expected: input_dim,
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// `w . psi(x, y)` for every outcome.
    fn scores(&self, w: &[f64], x: &Individual) -> Result<Vec<f64>> {
        self.check(x)?;
        match *self {
            FeatureMap::OneVsAll { input_dim, outcomes } => Ok((0..outcomes)
                .map(|y| {
                    let block = &w[y * (input_dim + 1)..(y + 1) * (input_dim + 1)];
                    dot(&block[..input_dim], &x.features) + block[input_dim]
                })
                .collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearArgmaxClassifier {
    pub weights: Vec<f64>,
    pub feature_map: FeatureMap,
}

impl LinearArgmaxClassifier {
    pub fn new(weights: Vec<f64>, feature_map: FeatureMap) -> Result<Self> {
        if weights.len() != feature_map.dim() {
            return Err(Error::DimensionMismatch {
                context: "linear classifier weights",
                expected: feature_map.dim(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::contract("non-finite classifier weight"));
        }
        Ok(Self { weights, feature_map })
    }

    /// Weights drawn uniformly from `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(feature_map: FeatureMap, rng: &mut R) -> Self {
        let weights = (0..feature_map.dim()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Self { weights, feature_map }
    }
}

impl DeterministicClassifier for LinearArgmaxClassifier {
    fn num_outcomes(&self) -> usize {
        self.feature_map.num_outcomes()
    }

    fn predict(&self, x: &Individual) -> Result<usize> {
        Ok(argmax(&self.feature_map.scores(&self.weights, x)?))
    }
}

/// Pool file: a feature map and one weight vector per classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSpec {
    pub feature_map: FeatureMap,
    pub weights: Vec<Vec<f64>>,
}

impl PoolSpec {
    pub fn random<R: Rng + ?Sized>(feature_map: FeatureMap, size: usize, rng: &mut R) -> Self {
        let weights = (0..size)
            .map(|_| LinearArgmaxClassifier::random(feature_map, rng).weights)
            .collect();
        Self { feature_map, weights }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    pub fn classifiers(&self) -> Result<Vec<SharedClassifier>> {
        self.weights
            .iter()
            .map(|w| {
                let g = LinearArgmaxClassifier::new(w.clone(), self.feature_map)?;
                Ok(Arc::new(g) as SharedClassifier)
            })
            .collect()
    }

    pub fn into_family(self, domain: Vec<Individual>) -> Result<FiniteFamily> {
        FiniteFamily::new(self.classifiers()?, domain, self.feature_map.num_outcomes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    const MAP: FeatureMap = FeatureMap::OneVsAll { input_dim: 2, outcomes: 3 };

    #[test]
    fn feature_layout() {
        let x = Individual::new(0, vec![0.5, -2.0]).unwrap();
        assert_eq!(MAP.dim(), 9);
        assert_eq!(
            MAP.features(&x, 1).unwrap(),
            vec![0.0, 0.0, 0.0, 0.5, -2.0, 1.0, 0.0, 0.0, 0.0]
        );
        assert!(MAP.features(&x, 3).is_err());
        assert!(MAP.features(&Individual::opaque(1), 0).is_err());
    }

    #[test]
    fn scores_match_explicit_features() {
        let mut rng = stream_rng(3, 0);
        for i in 0..50 {
            let g = LinearArgmaxClassifier::random(MAP, &mut rng);
            let x = Individual::new(i, vec![rng.gen(), rng.gen()]).unwrap();
            let explicit: Vec<f64> = (0..3)
                .map(|y| dot(&g.weights, &MAP.features(&x, y).unwrap()))
                .collect();
            let fast = MAP.scores(&g.weights, &x).unwrap();
            for (a, b) in explicit.iter().zip(&fast) {
                assert!((a - b).abs() < 1e-12);
            }
            assert_eq!(g.predict(&x).unwrap(), argmax(&explicit));
        }
    }

    #[test]
    fn ties_go_to_smallest_outcome() {
        let g = LinearArgmaxClassifier::new(vec![0.0; 9], MAP).unwrap();
        assert_eq!(g.predict(&Individual::new(0, vec![0.3, 0.4]).unwrap()).unwrap(), 0);
        assert!(LinearArgmaxClassifier::new(vec![0.0; 8], MAP).is_err());
    }

    #[test]
    fn pool_spec_json() {
        let json = r#"{"feature_map": {"name": "one-vs-all", "input_dim": 1, "outcomes": 2},
                       "weights": [[1, 0, 0, 0.5], [0, 0, 1, 0]]}"#;
        let spec: PoolSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.feature_map.dim(), 4);
        let gs = spec.classifiers().unwrap();
        let x = Individual::new(0, vec![0.25]).unwrap();
        assert_eq!(gs[0].predict(&x).unwrap(), 1);
        assert_eq!(gs[1].predict(&x).unwrap(), 1);
        assert!(serde_json::from_str::<PoolSpec>(r#"{"feature_map": {"name": "x"}, "weights": []}"#).is_err());
        let bad = r#"{"feature_map": {"name": "one-vs-all", "input_dim": 1, "outcomes": 2},
                      "weights": [[1, 0]]}"#;
        assert!(serde_json::from_str::<PoolSpec>(bad).unwrap().classifiers().is_err());
    }
}
