//! Nearest-neighbor extension of a sample classifier to the whole individual space,
//! net-radius diagnostics and the covering sample-size calculator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Classifier, Individual, OutcomeDistribution, RandomizedAssignment};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Linf,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Metric::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Metric::Linf => diffs.fold(0.0, f64::max),
        }
    }
}

/// Index of the closest sample point; ties go to the smallest index.
pub fn nearest_neighbor(sample: &[Individual], x: &Individual, metric: Metric) -> Result<usize> {
    Ok(nearest_with_distance(sample, x, metric)?.0)
}

fn nearest_with_distance(
    sample: &[Individual],
    x: &Individual,
    metric: Metric,
) -> Result<(usize, f64)> {
    let first = sample
        .first()
        .ok_or_else(|| Error::contract("nearest neighbor in an empty sample"))?;
    if first.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            context: "nearest neighbor",
            expected: first.dim(),
            got: x.dim(),
        });
    }
    let mut best = (0, metric.distance(&first.features, &x.features));
    for (i, s) in sample.iter().enumerate().skip(1) {
        let d = metric.distance(&s.features, &x.features);
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

/// `x -> base(NN_S(x))`.
#[derive(Clone, Debug)]
pub struct NnExtension {
    base: RandomizedAssignment,
    metric: Metric,
}

pub fn extend(base: RandomizedAssignment, metric: Metric) -> NnExtension {
    NnExtension { base, metric }
}

impl NnExtension {
    pub fn base(&self) -> &RandomizedAssignment {
        &self.base
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Row index in the base sample used for `x`.
    pub fn source_index(&self, x: &Individual) -> Result<usize> {
        // A sample member always maps to itself, even if another member shares its features.
        if let Some(i) = self
            .base
            .sample()
            .iter()
            .position(|s| s.id == x.id && s.features == x.features)
        {
            return Ok(i);
        }
        nearest_neighbor(self.base.sample(), x, self.metric)
    }
}

impl Classifier for NnExtension {
    fn num_outcomes(&self) -> usize {
        self.base.num_outcomes()
    }

    fn distribution(&self, x: &Individual) -> Result<OutcomeDistribution> {
        Ok(self.base.rows()[self.source_index(x)?].clone())
    }
}

/// Largest distance from a test point to its nearest sample point.
pub fn net_radius(sample: &[Individual], test_points: &[Individual], metric: Metric) -> Result<f64> {
    if test_points.is_empty() {
        return Err(Error::contract("net radius over no test points"));
    }
    test_points.iter().try_fold(0.0f64, |worst, x| {
        Ok(worst.max(nearest_with_distance(sample, x, metric)?.1))
    })
}

/// Number of cubes of side `beta / (2 L sqrt(q))` needed to cover a cube of side `D`.
pub fn covering_cube_count(beta: f64, lipschitz: f64, diameter: f64, q: u32) -> f64 {
    let side = beta / (2.0 * lipschitz * (q as f64).sqrt());
    (diameter / side).ceil().powi(q as i32)
}

/// Sample size after which the sample is a `beta/(2L)`-net for a `1 - alpha` mass with
/// probability `1 - delta`: `ceil((m/alpha) ln(m/delta))` with `m = ceil(D/s)^q` cubes of
/// side `s = beta / (2 L sqrt(q))`.
pub fn covering_sample_size(
    alpha: f64,
    beta: f64,
    lipschitz: f64,
    diameter: f64,
    q: u32,
    delta: f64,
) -> Result<u64> {
    if !(alpha > 0.0 && alpha < 1.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::contract("alpha and delta must lie in (0, 1)"));
    }
    if !(beta > 0.0 && lipschitz > 0.0 && diameter > 0.0) || q == 0 {
        return Err(Error::contract("beta, L, D and q must be positive"));
    }
    let cubes = covering_cube_count(beta, lipschitz, diameter, q);
    let n = (cubes / alpha) * (cubes / delta).ln();
    let limit = 2f64.powi(63);
    if !n.is_finite() || n.ceil() >= limit {
        return Err(Error::TooLarge(format!(
            "covering sample size {n:e} exceeds 2^63"
        )));
    }
    Ok(n.ceil() as u64)
}
