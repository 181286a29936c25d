//! Deterministic classifier families: linear-argmax classifiers, finite families with
//! restriction counts and brute-force Natarajan dimension, product families, mixtures over
//! families and grid covers of the weight simplex.

mod cover;
mod fit;
mod linear;
mod mixture;

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{DeterministicClassifier, Individual, OutcomeSpace, SharedClassifier};

pub use cover::{build_weight_cover, build_weight_cover_with_budget, WeightCover, DEFAULT_COVER_BUDGET};
pub use fit::{fit_ef_mixture, fit_ef_mixture_on_pairs, MixtureFit};
pub use linear::{FeatureMap, LinearArgmaxClassifier, PoolSpec};
pub use mixture::{mixture_distribution, MixtureClassifier};

/// Largest domain `natarajan_dim` will search.
pub const MAX_DIM_DOMAIN: usize = 20;
/// Largest family `natarajan_dim` will search.
pub const MAX_DIM_MEMBERS: usize = 10_000;
/// Largest product family `product_family` will build.
pub const MAX_PRODUCT_MEMBERS: usize = 1_000_000;

/// An explicit finite family with the domain used for dimension and restriction work.
#[derive(Clone, Debug)]
pub struct FiniteFamily {
    members: Vec<SharedClassifier>,
    domain: Vec<Individual>,
    k: usize,
}

impl FiniteFamily {
    pub fn new(members: Vec<SharedClassifier>, domain: Vec<Individual>, k: usize) -> Result<Self> {
        OutcomeSpace::new(k)?;
        if members.is_empty() {
            return Err(Error::contract("a family needs at least one member"));
        }
        if let Some(g) = members.iter().find(|g| g.num_outcomes() != k) {
            return Err(Error::DimensionMismatch {
                context: "family member outcomes",
                expected: k,
                got: g.num_outcomes(),
            });
        }
        Ok(Self { members, domain, k })
    }

    /// Family of explicit label vectors over `domain` (`labels[g][i]` is member `g` on `domain[i]`).
    pub fn from_label_vectors(domain: Vec<Individual>, k: usize, labels: &[Vec<usize>]) -> Result<Self> {
        let members = labels
            .iter()
            .map(|row| {
                let table = crate::model::LabelTable::from_sample(k, &domain, row)?;
                Ok(Arc::new(table) as SharedClassifier)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(members, domain, k)
    }

    pub fn members(&self) -> &[SharedClassifier] {
        &self.members
    }

    pub fn domain(&self) -> &[Individual] {
        &self.domain
    }

    pub fn num_outcomes(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `labels[g][i] = members[g](points[i])`.
    pub fn label_matrix(&self, points: &[Individual]) -> Result<Vec<Vec<usize>>> {
        self.members
            .iter()
            .map(|g| points.iter().map(|x| g.predict(x)).collect())
            .collect()
    }
}

/// Distinct labelings of `sample` realized by the family, in order of first appearance.
pub fn restrict_family(family: &FiniteFamily, sample: &[Individual]) -> Result<Vec<Vec<usize>>> {
    if sample.is_empty() {
        return Err(Error::contract("restriction to an empty sample"));
    }
    Ok(dedup(family.label_matrix(sample)?))
}

fn dedup(rows: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for row in rows {
        if seen.insert(row.clone(), ()).is_none() {
            out.push(row);
        }
    }
    out
}

/// Bitset over distinct labelings.
type Cell = Vec<u64>;

fn and(a: &Cell, b: &Cell) -> Cell {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

fn nonempty(c: &Cell) -> bool {
    c.iter().any(|w| *w != 0)
}

struct Shattering {
    /// `masks[p][y]`: labelings that give point `p` label `y`.
    masks: Vec<Vec<Cell>>,
    /// Labels realized at each point.
    realized: Vec<Vec<usize>>,
    distinct: usize,
}

impl Shattering {
    /// Deepest shattered extension of `cells` using points after `next - 1`.
    fn search(&self, cells: &[Cell], next: usize, depth: usize, best: &mut usize) {
        *best = (*best).max(depth);
        let points = self.masks.len();
        // Need 2^(depth+1) distinct labelings and enough points left to beat `best`.
        if (1usize << (depth + 1)) > self.distinct || depth + (points - next) <= *best {
            return;
        }
        for p in next..points {
            if depth + (points - p) <= *best {
                return;
            }
            let labels = &self.realized[p];
            for (ai, &a) in labels.iter().enumerate() {
                for &b in &labels[ai + 1..] {
                    let mut split = Vec::with_capacity(cells.len() * 2);
                    let ok = cells.iter().all(|c| {
                        let left = and(c, &self.masks[p][a]);
                        let right = and(c, &self.masks[p][b]);
                        let both = nonempty(&left) && nonempty(&right);
                        split.push(left);
                        split.push(right);
                        both
                    });
                    if ok {
                        self.search(&split, p + 1, depth + 1, best);
                    }
                }
            }
        }
    }
}

/// Natarajan dimension of the family restricted to its domain, by exhaustive search.
///
/// A set of points is shattered when each point has two distinct labels such that every
/// choice between them is realized by a member.
pub fn natarajan_dim(family: &FiniteFamily) -> Result<usize> {
    let domain = family.domain();
    if domain.len() > MAX_DIM_DOMAIN {
        return Err(Error::Budget {
            what: "Natarajan dimension domain",
            needed: domain.len() as u128,
            budget: MAX_DIM_DOMAIN as u128,
        });
    }
    if family.len() > MAX_DIM_MEMBERS {
        return Err(Error::Budget {
            what: "Natarajan dimension family size",
            needed: family.len() as u128,
            budget: MAX_DIM_MEMBERS as u128,
        });
    }
    if domain.is_empty() {
        return Ok(0);
    }
    let labelings = dedup(family.label_matrix(domain)?);
    let distinct = labelings.len();
    let words = distinct.div_ceil(64);
    let k = family.num_outcomes();
    let mut masks = vec![vec![vec![0u64; words]; k]; domain.len()];
    for (g, row) in labelings.iter().enumerate() {
        for (p, &y) in row.iter().enumerate() {
            masks[p][y][g / 64] |= 1 << (g % 64);
        }
    }
    let realized = masks
        .iter()
        .map(|per_label| (0..k).filter(|&y| nonempty(&per_label[y])).collect())
        .collect();
    let search = Shattering { masks, realized, distinct };
    let mut full = vec![u64::MAX; words];
    if !distinct.is_multiple_of(64) {
        full[words - 1] = (1u64 << (distinct % 64)) - 1;
    }
    let mut best = 0;
    search.search(&[full], 0, 0, &mut best);
    Ok(best)
}

/// `x -> (g1(x), g2(x))`, encoded as the label `g1(x) * k + g2(x)`.
#[derive(Clone, Debug)]
pub struct PairClassifier {
    pub first: SharedClassifier,
    pub second: SharedClassifier,
}

impl DeterministicClassifier for PairClassifier {
    fn num_outcomes(&self) -> usize {
        self.first.num_outcomes() * self.second.num_outcomes()
    }

    fn predict(&self, x: &Individual) -> Result<usize> {
        Ok(self.first.predict(x)? * self.second.num_outcomes() + self.second.predict(x)?)
    }
}

/// All ordered pairs of members, acting into the product label space of size `k^2`.
pub fn product_family(family: &FiniteFamily) -> Result<FiniteFamily> {
    let n = family.len();
    let needed = (n as u128) * (n as u128);
    if needed > MAX_PRODUCT_MEMBERS as u128 {
        return Err(Error::Budget {
            what: "product family size",
            needed,
            budget: MAX_PRODUCT_MEMBERS as u128,
        });
    }
    let mut members = Vec::with_capacity(n * n);
    for a in family.members() {
        for b in family.members() {
            members.push(Arc::new(PairClassifier {
                first: a.clone(),
                second: b.clone(),
            }) as SharedClassifier);
        }
    }
    FiniteFamily::new(members, family.domain.clone(), family.k * family.k)
}
