//! Individuals, outcome distributions, utility/loss models and the classifier traits.

use std::collections::HashMap;
use std::fmt;
use std::marker::PhantomData;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lowerbound::GridWorld;

/// Tolerance on the total mass of an outcome distribution.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// A point of the individual space together with a sample-unique identifier.
#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub id: u64,
    pub features: Vec<f64>,
}

impl Individual {
    pub fn new(id: u64, features: Vec<f64>) -> Result<Self> {
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::contract(format!(
                "individual {id} has a non-finite feature {v}"
            )));
        }
        Ok(Self { id, features })
    }

    /// An individual known only by id (utility tables carry no features).
    pub fn opaque(id: u64) -> Self {
        Self {
            id,
            features: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// Finite outcome space `{0, .., k-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct OutcomeSpace {
    k: usize,
}

impl OutcomeSpace {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::contract("outcome space must have at least one outcome"));
        }
        Ok(Self { k })
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A probability vector over outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::contract("distribution over zero outcomes"));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::contract(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::contract(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Builds a distribution from solver output: entries within `tol` below zero are
    /// snapped to zero before validation.
    pub fn from_solver(mut probs: Vec<f64>, tol: f64) -> Result<Self> {
        for p in probs.iter_mut() {
            if *p < 0.0 && *p >= -tol {
                *p = 0.0;
            }
        }
        Self::new(probs)
    }

    pub fn point_mass(k: usize, y: usize) -> Result<Self> {
        if y >= k {
            return Err(Error::DimensionMismatch {
                context: "point mass outcome",
                expected: k,
                got: y,
            });
        }
        let mut probs = vec![0.0; k];
        probs[y] = 1.0;
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        OutcomeSpace::new(k)?;
        Ok(Self {
            probs: vec![1.0 / k as f64; k],
        })
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

    /// Most likely outcome, ties to the smallest index.
    pub fn mode(&self) -> usize {
        argmax(&self.probs)
    }
}

/// Index of the largest entry; ties go to the smallest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Concrete representations of a map `(individual, outcome) -> [0, 1]`.
#[derive(Clone)]
pub enum ScoreModel {
    /// Dense `n x k` table addressed by individual id.
    Table {
        index: HashMap<u64, usize>,
        values: Vec<Vec<f64>>,
        k: usize,
    },
    /// `clamp(bias[y] + weights[y] . x, 0, 1)`.
    LinearFeature {
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
    },
    /// Tent utility of the cube construction; see [`GridWorld::utility`].
    Grid(Arc<GridWorld>),
}

impl fmt::Debug for ScoreModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreModel::Table { values, k, .. } => {
                write!(f, "Table({} x {})", values.len(), k)
            }
            ScoreModel::LinearFeature { weights, .. } => {
                write!(f, "LinearFeature(k = {})", weights.len())
            }
            ScoreModel::Grid(w) => write!(f, "Grid(q = {}, m = {})", w.q(), w.num_cubes()),
        }
    }
}

impl ScoreModel {
    pub fn num_outcomes(&self) -> usize {
        match self {
            ScoreModel::Table { k, .. } => *k,
            ScoreModel::LinearFeature { weights, .. } => weights.len(),
            ScoreModel::Grid(_) => 2,
        }
    }

    pub fn value(&self, x: &Individual, y: usize) -> Result<f64> {
        let k = self.num_outcomes();
        if y >= k {
            return Err(Error::DimensionMismatch {
                context: "outcome index",
                expected: k,
                got: y,
            });
        }
        match self {
            ScoreModel::Table { index, values, .. } => {
                let row = index.get(&x.id).ok_or(Error::UnknownIndividual(x.id))?;
                Ok(values[*row][y])
            }
            ScoreModel::LinearFeature { weights, bias } => {
                let w = &weights[y];
                if w.len() != x.dim() {
                    return Err(Error::DimensionMismatch {
                        context: "linear-feature model",
                        expected: w.len(),
                        got: x.dim(),
                    });
                }
                let raw = bias[y] + dot(w, &x.features);
                Ok(raw.clamp(0.0, 1.0))
            }
            ScoreModel::Grid(world) => world.utility(&x.features, y),
        }
    }

    /// All `k` values for one individual.
    pub fn row(&self, x: &Individual) -> Result<Vec<f64>> {
        (0..self.num_outcomes()).map(|y| self.value(x, y)).collect()
    }

    /// Value matrix over a sample, row `i` for `sample[i]`.
    pub fn matrix(&self, sample: &[Individual]) -> Result<Vec<Vec<f64>>> {
        sample.iter().map(|x| self.row(x)).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Marker for utility models.
#[derive(Clone, Copy, Debug)]
pub struct Utility;
/// Marker for loss models.
#[derive(Clone, Copy, Debug)]
pub struct Loss;

/// A [`ScoreModel`] tagged with its role so utilities and losses cannot be swapped.
#[derive(Clone, Debug)]
pub struct ValueModel<Role> {
    inner: ScoreModel,
    _role: PhantomData<Role>,
}

pub type UtilityModel = ValueModel<Utility>;
pub type LossModel = ValueModel<Loss>;

impl<Role> ValueModel<Role> {
    pub fn from_score(inner: ScoreModel) -> Self {
        Self {
            inner,
            _role: PhantomData,
        }
    }

    /// Table variant; `ids[i]` labels row `i`. Every value must lie in `[0, 1]`.
    pub fn table(ids: &[u64], values: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != values.len() {
            return Err(Error::DimensionMismatch {
                context: "table ids vs rows",
                expected: values.len(),
                got: ids.len(),
            });
        }
        let k = values.first().map_or(0, Vec::len);
        OutcomeSpace::new(k)?;
        let mut index = HashMap::with_capacity(ids.len());
        for (row, (&id, vals)) in ids.iter().zip(&values).enumerate() {
            if vals.len() != k {
                return Err(Error::DimensionMismatch {
                    context: "table row length",
                    expected: k,
                    got: vals.len(),
                });
            }
            if let Some(v) = vals.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::contract(format!(
                    "value {v} for individual {id} outside [0, 1]"
                )));
            }
            if index.insert(id, row).is_some() {
                return Err(Error::contract(format!("duplicate individual id {id}")));
            }
        }
        Ok(Self::from_score(ScoreModel::Table { index, values, k }))
    }

    /// Linear-feature variant: one weight vector and bias per outcome, clamped to `[0, 1]`.
    pub fn linear(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        OutcomeSpace::new(weights.len())?;
        if bias.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                context: "linear-feature bias",
                expected: weights.len(),
                got: bias.len(),
            });
        }
        let q = weights[0].len();
        if weights.iter().any(|w| w.len() != q) {
            return Err(Error::contract("ragged linear-feature weights"));
        }
        if weights.iter().flatten().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::contract("non-finite linear-feature coefficient"));
        }
        Ok(Self::from_score(ScoreModel::LinearFeature { weights, bias }))
    }

    pub fn grid(world: Arc<GridWorld>) -> Self {
        Self::from_score(ScoreModel::Grid(world))
    }

    pub fn score(&self) -> &ScoreModel {
        &self.inner
    }

    pub fn num_outcomes(&self) -> usize {
        self.inner.num_outcomes()
    }

    pub fn value(&self, x: &Individual, y: usize) -> Result<f64> {
        self.inner.value(x, y)
    }

    pub fn row(&self, x: &Individual) -> Result<Vec<f64>> {
        self.inner.row(x)
    }

    pub fn matrix(&self, sample: &[Individual]) -> Result<Vec<Vec<f64>>> {
        self.inner.matrix(sample)
    }
}

/// A randomized classifier, evaluable on (a subset of) the individual space.
pub trait Classifier: Send + Sync {
    fn num_outcomes(&self) -> usize;
    fn distribution(&self, x: &Individual) -> Result<OutcomeDistribution>;
}

/// A deterministic classifier `X -> Y`.
pub trait DeterministicClassifier: Send + Sync + fmt::Debug {
    fn num_outcomes(&self) -> usize;
    fn predict(&self, x: &Individual) -> Result<usize>;
}

pub type SharedClassifier = Arc<dyn DeterministicClassifier>;

impl<C: Classifier + ?Sized> Classifier for Arc<C> {
    fn num_outcomes(&self) -> usize {
        (**self).num_outcomes()
    }
    fn distribution(&self, x: &Individual) -> Result<OutcomeDistribution> {
        (**self).distribution(x)
    }
}

impl<C: Classifier + ?Sized> Classifier for Box<C> {
    fn num_outcomes(&self) -> usize {
        (**self).num_outcomes()
    }
    fn distribution(&self, x: &Individual) -> Result<OutcomeDistribution> {
        (**self).distribution(x)
    }
}

impl<D: DeterministicClassifier + ?Sized> DeterministicClassifier for Arc<D> {
    fn num_outcomes(&self) -> usize {
        (**self).num_outcomes()
    }
    fn predict(&self, x: &Individual) -> Result<usize> {
        (**self).predict(x)
    }
}

/// Views a deterministic classifier as a randomized one with point-mass outputs.
#[derive(Clone, Debug)]
pub struct PointMass<D>(pub D);

impl<D: DeterministicClassifier> Classifier for PointMass<D> {
    fn num_outcomes(&self) -> usize {
        self.0.num_outcomes()
    }
    fn distribution(&self, x: &Individual) -> Result<OutcomeDistribution> {
        OutcomeDistribution::point_mass(self.0.num_outcomes(), self.0.predict(x)?)
    }
}

/// Same outcome distribution for everyone.
#[derive(Clone, Debug)]
pub struct ConstantClassifier {
    pub dist: OutcomeDistribution,
}

impl Classifier for ConstantClassifier {
    fn num_outcomes(&self) -> usize {
        self.dist.len()
    }
    fn distribution(&self, _x: &Individual) -> Result<OutcomeDistribution> {
        Ok(self.dist.clone())
    }
}

/// Maps every individual to its utility-maximizing outcome (ties to the smallest index).
#[derive(Clone, Debug)]
pub struct FavoriteClassifier {
    pub utility: UtilityModel,
}

impl DeterministicClassifier for FavoriteClassifier {
    fn num_outcomes(&self) -> usize {
        self.utility.num_outcomes()
    }
    fn predict(&self, x: &Individual) -> Result<usize> {
        Ok(argmax(&self.utility.row(x)?))
    }
}

/// Explicit labels keyed by individual id.
#[derive(Clone, Debug)]
pub struct LabelTable {
    k: usize,
    labels: HashMap<u64, usize>,
}

impl LabelTable {
    pub fn new(k: usize, labels: impl IntoIterator<Item = (u64, usize)>) -> Result<Self> {
        OutcomeSpace::new(k)?;
        let labels: HashMap<_, _> = labels.into_iter().collect();
        if let Some((id, y)) = labels.iter().find(|(_, y)| **y >= k) {
            return Err(Error::contract(format!(
                "label {y} for individual {id} outside 0..{k}"
            )));
        }
        Ok(Self { k, labels })
    }

    /// Labels `sample[i]` with `labels[i]`.
    pub fn from_sample(k: usize, sample: &[Individual], labels: &[usize]) -> Result<Self> {
        if sample.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "label table",
                expected: sample.len(),
                got: labels.len(),
            });
        }
        Self::new(k, sample.iter().map(|x| x.id).zip(labels.iter().copied()))
    }
}

impl DeterministicClassifier for LabelTable {
    fn num_outcomes(&self) -> usize {
        self.k
    }
    fn predict(&self, x: &Individual) -> Result<usize> {
        self.labels
            .get(&x.id)
            .copied()
            .ok_or(Error::UnknownIndividual(x.id))
    }
}

/// A classifier on a sample: one outcome distribution per sample individual.
#[derive(Clone, Debug)]
pub struct RandomizedAssignment {
    sample: Vec<Individual>,
    rows: Vec<OutcomeDistribution>,
    index: HashMap<u64, usize>,
}

impl RandomizedAssignment {
    pub fn new(sample: Vec<Individual>, rows: Vec<OutcomeDistribution>) -> Result<Self> {
        if sample.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                context: "assignment rows",
                expected: sample.len(),
                got: rows.len(),
            });
        }
        if sample.is_empty() {
            return Err(Error::contract("assignment over an empty sample"));
        }
        let k = rows[0].len();
        if let Some(r) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::DimensionMismatch {
                context: "assignment row length",
                expected: k,
                got: r.len(),
            });
        }
        let mut index = HashMap::with_capacity(sample.len());
        for (i, x) in sample.iter().enumerate() {
            if index.insert(x.id, i).is_some() {
                return Err(Error::contract(format!("duplicate individual id {}", x.id)));
            }
        }
        Ok(Self { sample, rows, index })
    }

    pub fn sample(&self) -> &[Individual] {
        &self.sample
    }

    pub fn rows(&self) -> &[OutcomeDistribution] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_empty()
    }

    pub fn num_outcomes(&self) -> usize {
        self.rows[0].len()
    }
}

impl Classifier for RandomizedAssignment {
    fn num_outcomes(&self) -> usize {
        RandomizedAssignment::num_outcomes(self)
    }
    fn distribution(&self, x: &Individual) -> Result<OutcomeDistribution> {
        let i = self.index.get(&x.id).ok_or(Error::UnknownIndividual(x.id))?;
        Ok(self.rows[*i].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_validation() {
        assert!(OutcomeDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(OutcomeDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(OutcomeDistribution::new(vec![-0.1, 1.1]).is_err());
        assert!(OutcomeDistribution::new(vec![]).is_err());
        let d = OutcomeDistribution::from_solver(vec![-1e-12, 1.0], 1e-9).unwrap();
        assert_eq!(d.probs(), &[0.0, 1.0]);
        assert_eq!(OutcomeDistribution::new(vec![0.4, 0.4, 0.2]).unwrap().mode(), 0);
    }

    #[test]
    fn individual_rejects_nan() {
        assert!(Individual::new(0, vec![f64::NAN]).is_err());
        assert!(Individual::new(0, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn table_model_checks() {
        let u = UtilityModel::table(&[7, 9], vec![vec![0.0, 1.0], vec![0.3, 0.2]]).unwrap();
        assert_eq!(u.value(&Individual::opaque(9), 0).unwrap(), 0.3);
        assert!(matches!(
            u.value(&Individual::opaque(1), 0),
            Err(Error::UnknownIndividual(1))
        ));
        assert!(u.value(&Individual::opaque(7), 2).is_err());
        assert!(UtilityModel::table(&[1, 1], vec![vec![0.0], vec![0.0]]).is_err());
        assert!(UtilityModel::table(&[1], vec![vec![1.5]]).is_err());
    }

    #[test]
    fn linear_model_clamps() {
        let u = UtilityModel::linear(vec![vec![2.0], vec![-2.0]], vec![0.0, 0.5]).unwrap();
        let x = Individual::new(0, vec![0.75]).unwrap();
        assert_eq!(u.value(&x, 0).unwrap(), 1.0);
        assert_eq!(u.value(&x, 1).unwrap(), 0.0);
        let x = Individual::new(0, vec![0.1]).unwrap();
        assert!((u.value(&x, 1).unwrap() - 0.3).abs() < 1e-12);
        assert!(u.value(&Individual::opaque(0), 0).is_err());
    }

    #[test]
    fn favorite_breaks_ties_low() {
        let u = UtilityModel::table(&[0], vec![vec![0.5, 0.5, 0.1]]).unwrap();
        let fav = FavoriteClassifier { utility: u };
        assert_eq!(fav.predict(&Individual::opaque(0)).unwrap(), 0);
    }

    #[test]
    fn assignment_lookup() {
        let s = vec![Individual::opaque(3), Individual::opaque(5)];
        let rows = vec![
            OutcomeDistribution::point_mass(2, 0).unwrap(),
            OutcomeDistribution::point_mass(2, 1).unwrap(),
        ];
        let h = RandomizedAssignment::new(s, rows).unwrap();
        assert_eq!(h.distribution(&Individual::opaque(5)).unwrap().probs(), &[0.0, 1.0]);
        assert!(h.distribution(&Individual::opaque(4)).is_err());
    }
}
