//! The cube-grid adversarial construction: `4^q` cubes of side 1/4 in `[0, 1]^q`, each
//! center with a random favorite in `{0, 1}` and a tent-shaped utility that is zero on
//! every cube boundary. Sampling half of the centers, assigning favorites and extending
//! to the rest forces envy on a constant fraction of center pairs, which is measured here
//! exactly by enumerating all ordered center pairs.

use std::sync::Arc;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envy::{envy_all_pairs, EnvyReport};
use crate::error::{Error, Result};
use crate::extension::{extend, Metric};
use crate::model::{
    Classifier, ConstantClassifier, Individual, OutcomeDistribution, RandomizedAssignment,
};
use crate::rng::{derive_seed, stream_rng};

/// Cube side length.
pub const SIDE: f64 = 0.25;
/// Largest Lipschitz constant keeping utilities in `[0, 1]` (`L * SIDE / 2 <= 1`).
pub const MAX_LIPSCHITZ: f64 = 2.0 / SIDE;
pub const MAX_Q: usize = 8;
/// Reference slack for the favorite-balance diagnostics.
pub const BALANCE_EPS: f64 = 0.1;
/// Offset below `L/8` at which envy is counted.
pub const BETA_OFFSET: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct GridWorld {
    q: usize,
    lipschitz: f64,
    centers: Vec<Vec<f64>>,
    favorites: Vec<usize>,
}

const PER_AXIS: usize = 4;

/// Builds the world with i.i.d. fair-coin favorites drawn from `seed`.
pub fn build_grid(q: usize, lipschitz: f64, seed: u64) -> Result<GridWorld> {
    check_shape(q, lipschitz)?;
    let m = PER_AXIS.pow(q as u32);
    let mut rng = stream_rng(seed, 0);
    let favorites = (0..m).map(|_| rng.gen_bool(0.5) as usize).collect();
    GridWorld::with_favorites(q, lipschitz, favorites)
}

fn check_shape(q: usize, lipschitz: f64) -> Result<()> {
    if !(1..=MAX_Q).contains(&q) {
        return Err(Error::Budget {
            what: "grid dimension",
            needed: q as u128,
            budget: MAX_Q as u128,
        });
    }
    if !(lipschitz > 0.0 && lipschitz <= MAX_LIPSCHITZ) {
        return Err(Error::contract(format!(
            "Lipschitz constant must lie in (0, {MAX_LIPSCHITZ}], got {lipschitz}"
        )));
    }
    Ok(())
}

impl GridWorld {
    /// World with explicit favorites (row-major center order).
    pub fn with_favorites(q: usize, lipschitz: f64, favorites: Vec<usize>) -> Result<Self> {
        check_shape(q, lipschitz)?;
        let m = PER_AXIS.pow(q as u32);
        if favorites.len() != m {
            return Err(Error::DimensionMismatch {
                context: "grid favorites",
                expected: m,
                got: favorites.len(),
            });
        }
        if favorites.iter().any(|f| *f > 1) {
            return Err(Error::contract("favorites must be 0 or 1"));
        }
        let centers = (0..m)
            .map(|idx| {
                let mut c = vec![0.0; q];
                let mut rest = idx;
                for axis in (0..q).rev() {
                    c[axis] = ((rest % PER_AXIS) as f64 + 0.5) * SIDE;
                    rest /= PER_AXIS;
                }
                c
            })
            .collect();
        Ok(Self {
            q,
            lipschitz,
            centers,
            favorites,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn side(&self) -> f64 {
        SIDE
    }

    pub fn num_cubes(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn favorites(&self) -> &[usize] {
        &self.favorites
    }

    /// Centers as individuals, id = center index.
    pub fn center_individuals(&self) -> Vec<Individual> {
        self.centers
            .iter()
            .enumerate()
            .map(|(i, c)| Individual {
                id: i as u64,
                features: c.clone(),
            })
            .collect()
    }

    /// Index of the cube containing `x`. Cubes are half-open `[a, a + s)` per axis except
    /// the last, which is closed.
    pub fn cube_of(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.q {
            return Err(Error::DimensionMismatch {
                context: "grid point",
                expected: self.q,
                got: x.len(),
            });
        }
        let mut idx = 0;
        for &v in x {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::contract(format!("grid coordinate {v} outside [0, 1]")));
            }
            let cell = ((v / SIDE).floor() as usize).min(PER_AXIS - 1);
            idx = idx * PER_AXIS + cell;
        }
        Ok(idx)
    }

    /// `L (s/2 - |x - mu_j|_inf)` for the favorite of the containing cube `j`, 0 otherwise.
    pub fn utility(&self, x: &[f64], y: usize) -> Result<f64> {
        if y > 1 {
            return Err(Error::DimensionMismatch {
                context: "grid outcome",
                expected: 2,
                got: y,
            });
        }
        let j = self.cube_of(x)?;
        if self.favorites[j] != y {
            return Ok(0.0);
        }
        let dist = x
            .iter()
            .zip(&self.centers[j])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok((self.lipschitz * (SIDE / 2.0 - dist)).max(0.0))
    }

    /// Envy magnitude between centers with opposite assignments: `L s / 2`.
    pub fn peak_utility(&self) -> f64 {
        self.lipschitz * SIDE / 2.0
    }
}

/// Point mass on each sampled center's favorite.
pub fn favorite_classifier(world: &GridWorld, sample: &[usize]) -> Result<RandomizedAssignment> {
    let m = world.num_cubes();
    let mut individuals = Vec::with_capacity(sample.len());
    let mut rows = Vec::with_capacity(sample.len());
    for &i in sample {
        if i >= m {
            return Err(Error::contract(format!("center index {i} out of range 0..{m}")));
        }
        individuals.push(Individual {
            id: i as u64,
            features: world.centers[i].clone(),
        });
        rows.push(OutcomeDistribution::point_mass(2, world.favorites[i])?);
    }
    RandomizedAssignment::new(individuals, rows)
}

/// How a sample classifier is extended to every center (the algorithm under attack).
pub trait ExtensionStrategy: Sync {
    fn extend(&self, base: &RandomizedAssignment) -> Result<Box<dyn Classifier>>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NearestNeighborStrategy {
    pub metric: Metric,
}

impl ExtensionStrategy for NearestNeighborStrategy {
    fn extend(&self, base: &RandomizedAssignment) -> Result<Box<dyn Classifier>> {
        Ok(Box::new(extend(base.clone(), self.metric)))
    }
}

/// Ignores the sample and hands everyone the same distribution.
#[derive(Clone, Debug)]
pub struct ConstantStrategy {
    pub dist: OutcomeDistribution,
}

impl ExtensionStrategy for ConstantStrategy {
    fn extend(&self, _base: &RandomizedAssignment) -> Result<Box<dyn Classifier>> {
        Ok(Box::new(ConstantClassifier {
            dist: self.dist.clone(),
        }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Nn,
    Constant,
}

impl StrategyKind {
    pub fn build(self) -> Box<dyn ExtensionStrategy> {
        match self {
            StrategyKind::Nn => Box::new(NearestNeighborStrategy::default()),
            StrategyKind::Constant => Box::new(ConstantStrategy {
                dist: OutcomeDistribution::uniform(2).expect("two outcomes"),
            }),
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nn" => Ok(StrategyKind::Nn),
            "constant" => Ok(StrategyKind::Constant),
            other => Err(Error::Config(format!(
                "unknown strategy `{other}` (expected nn or constant)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AdversarialRunResult {
    /// Sampled center indices, ascending.
    pub sample_indices: Vec<usize>,
    /// Outcome assigned (by mode) to at least half of the out-of-sample centers.
    pub y_star: usize,
    /// Fraction of out-of-sample centers assigned `y_star`.
    pub theta: f64,
    /// Sample favorites equal to 0 and to 1.
    pub favorite_balance: (usize, usize),
    /// Fraction of centers assigned `y_star` out of sample whose favorite is the other outcome.
    pub z_star_other_favorite: f64,
    /// Both balance events of the construction hold at slack [`BALANCE_EPS`].
    pub balanced: bool,
    pub envy_report: EnvyReport,
}

/// Samples half of the centers without replacement, assigns favorites, extends with
/// `strategy` and measures envy exactly over all ordered center pairs at `beta = L/8 - 1e-9`.
pub fn run_adversarial_experiment(
    world: &GridWorld,
    strategy: &dyn ExtensionStrategy,
    seed: u64,
) -> Result<AdversarialRunResult> {
    let m = world.num_cubes();
    let mut rng = stream_rng(derive_seed(seed, 0x5a5a), 0);
    let mut sample: Vec<usize> = sample_indices(&mut rng, m, m / 2).into_vec();
    sample.sort_unstable();

    let base = favorite_classifier(world, &sample)?;
    let ext = strategy.extend(&base)?;
    let centers = world.center_individuals();
    let rows = centers
        .par_iter()
        .map(|c| ext.distribution(c).map(|d| d.probs().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    if rows.iter().any(|r| r.len() != 2) {
        return Err(Error::contract("extension must output distributions over {0, 1}"));
    }
    let utils = centers
        .iter()
        .map(|c| Ok(vec![world.utility(&c.features, 0)?, world.utility(&c.features, 1)?]))
        .collect::<Result<Vec<_>>>()?;

    let mut in_sample = vec![false; m];
    for &i in &sample {
        in_sample[i] = true;
    }
    let mode = |r: &[f64]| usize::from(r[1] > r[0]);
    let mut z_counts = [0usize; 2];
    for j in (0..m).filter(|&j| !in_sample[j]) {
        z_counts[mode(&rows[j])] += 1;
    }
    let y_star = usize::from(z_counts[1] > z_counts[0]);
    let out_of_sample = m - sample.len();
    let theta = z_counts[y_star] as f64 / out_of_sample as f64;
    let other_fav = (0..m)
        .filter(|&j| !in_sample[j] && mode(&rows[j]) == y_star && world.favorites[j] != y_star)
        .count();
    let z_star_other_favorite = if z_counts[y_star] == 0 {
        0.0
    } else {
        other_fav as f64 / z_counts[y_star] as f64
    };
    let zeros = sample.iter().filter(|&&i| world.favorites[i] == 0).count();
    let balance = (zeros, sample.len() - zeros);
    let frac0 = zeros as f64 / sample.len() as f64;
    let balanced = (frac0 - 0.5).abs() <= BALANCE_EPS && z_star_other_favorite >= 0.5 - BALANCE_EPS;

    let beta = world.lipschitz / 8.0 - BETA_OFFSET;
    let envy_report = envy_all_pairs(&utils, &rows, beta)?;
    Ok(AdversarialRunResult {
        sample_indices: sample,
        y_star,
        theta,
        favorite_balance: balance,
        z_star_other_favorite,
        balanced,
        envy_report,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PNorm {
    L1,
    L2,
    Linf,
}

impl PNorm {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            PNorm::L1 => v.iter().map(|x| x.abs()).sum(),
            PNorm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            PNorm::Linf => v.iter().map(|x| x.abs()).fold(0.0, f64::max),
        }
    }
}

/// `max_y |u(x, y) - u(x', y)| / |x - x'|_p`, `None` for coincident points.
pub fn lipschitz_ratio(world: &GridWorld, x: &[f64], xp: &[f64], p: PNorm) -> Result<Option<f64>> {
    let diff: Vec<f64> = x.iter().zip(xp).map(|(a, b)| a - b).collect();
    let dist = p.norm(&diff);
    if dist == 0.0 {
        return Ok(None);
    }
    let mut worst: f64 = 0.0;
    for y in 0..2 {
        worst = worst.max((world.utility(x, y)? - world.utility(xp, y)?).abs());
    }
    Ok(Some(worst / dist))
}

/// Largest observed difference quotient over `n_pairs` random pairs in `[0, 1]^q`. Even
/// pairs are independent uniform points; odd pairs perturb the first point by at most
/// `SIDE / 4` per axis, which exercises nearby points across cube boundaries.
pub fn verify_lipschitz(world: &GridWorld, n_pairs: u64, p: PNorm, seed: u64) -> Result<f64> {
    if n_pairs == 0 {
        return Err(Error::contract("n_pairs must be >= 1"));
    }
    let q = world.q;
    (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let x: Vec<f64> = (0..q).map(|_| rng.gen::<f64>()).collect();
            let xp: Vec<f64> = if i % 2 == 0 {
                (0..q).map(|_| rng.gen::<f64>()).collect()
            } else {
                x.iter()
                    .map(|v| (v + rng.gen_range(-SIDE / 4.0..SIDE / 4.0)).clamp(0.0, 1.0))
                    .collect()
            };
            Ok(lipschitz_ratio(world, &x, &xp, p)?.unwrap_or(0.0))
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Shared handle used by [`crate::model::UtilityModel::grid`].
pub fn shared(world: GridWorld) -> Arc<GridWorld> {
    Arc::new(world)
}
