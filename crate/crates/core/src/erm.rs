//! Loss-minimizing envy-free classifiers on a sample.
//!
//! Three solvers share one contract (minimize mean expected loss subject to envy-freeness):
//! the randomized LP over per-individual outcome distributions, exhaustive search over
//! deterministic assignments, and an LP over mixing weights of fixed deterministic components.

use serde::Serialize;

use crate::envy::{max_gap_all_pairs, ENVY_EPS};
use crate::error::{Error, Result};
use crate::lp::{self, LazyConstraints, LinearProgram, LpStatus};
use crate::model::{
    argmax, dot, DeterministicClassifier, Individual, LossModel, OutcomeDistribution,
    OutcomeSpace, RandomizedAssignment, UtilityModel,
};

/// Tolerance for EF checks on solver output.
pub const EF_TOL: f64 = 1e-7;
/// Default cap on `k^n` for deterministic enumeration.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErmStatus {
    Optimal,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct ErmResult {
    pub assignment: RandomizedAssignment,
    /// Mean expected loss over the sample.
    pub loss: f64,
    /// Summed expected loss over the sample (`loss * n`).
    pub total_loss: f64,
    pub status: ErmStatus,
    /// Outcome per individual when the assignment is deterministic.
    pub labels: Option<Vec<usize>>,
}

type Matrix = Vec<Vec<f64>>;

fn check_instance(
    sample: &[Individual],
    u: &UtilityModel,
    loss: &LossModel,
    k: OutcomeSpace,
) -> Result<(Matrix, Matrix)> {
    if sample.is_empty() {
        return Err(Error::contract("ERM over an empty sample"));
    }
    for (what, got) in [("utility", u.num_outcomes()), ("loss", loss.num_outcomes())] {
        if got != k.len() {
            return Err(Error::DimensionMismatch {
                context: if what == "utility" { "utility outcomes" } else { "loss outcomes" },
                expected: k.len(),
                got,
            });
        }
    }
    Ok((u.matrix(sample)?, loss.matrix(sample)?))
}

/// EF rows `sum_y p[i,y] u(x_i,y) >= sum_y p[j,y] u(x_i,y)` over `n*k` variables, generated
/// on demand. Rows of individuals indifferent between all outcomes are never violated.
struct PairwiseEfRows<'a> {
    utils: &'a [Vec<f64>],
    k: usize,
    /// Ordered pairs `(i, j)`, `i != j`, whose row can bind.
    pairs: Vec<(usize, usize)>,
}

impl<'a> PairwiseEfRows<'a> {
    fn new(utils: &'a [Vec<f64>], k: usize) -> Self {
        let n = utils.len();
        let mut pairs = Vec::new();
        for (i, row) in utils.iter().enumerate() {
            if row.iter().all(|v| *v == row[0]) {
                continue;
            }
            pairs.extend((0..n).filter(|&j| j != i).map(|j| (i, j)));
        }
        Self { utils, k, pairs }
    }
}

impl LazyConstraints for PairwiseEfRows<'_> {
    fn len(&self) -> usize {
        self.pairs.len()
    }

    fn row(&self, id: usize) -> (Vec<f64>, f64) {
        let (i, j) = self.pairs[id];
        let mut row = vec![0.0; self.utils.len() * self.k];
        for y in 0..self.k {
            row[i * self.k + y] += self.utils[i][y];
            row[j * self.k + y] -= self.utils[i][y];
        }
        (row, 0.0)
    }

    fn slacks(&self, z: &[f64]) -> Vec<f64> {
        let k = self.k;
        self.pairs
            .iter()
            .map(|&(i, j)| {
                let u = &self.utils[i];
                dot(u, &z[i * k..(i + 1) * k]) - dot(u, &z[j * k..(j + 1) * k])
            })
            .collect()
    }
}

/// Minimum mean-loss randomized classifier that is EF on `sample`.
pub fn solve_randomized_ef_erm(
    sample: &[Individual],
    u: &UtilityModel,
    loss: &LossModel,
    k: OutcomeSpace,
) -> Result<ErmResult> {
    let (utils, losses) = check_instance(sample, u, loss, k)?;
    let n = sample.len();
    let k = k.len();
    let objective: Vec<f64> = losses
        .iter()
        .flat_map(|row| row.iter().map(|l| l / n as f64))
        .collect();
    let mut base = LinearProgram::minimize(objective);
    for i in 0..n {
        let mut row = vec![0.0; n * k];
        row[i * k..(i + 1) * k].fill(1.0);
        base.eq(row, 1.0);
    }
    let ef_rows = PairwiseEfRows::new(&utils, k);
    let sol = lp::solve_lazy(&base, &ef_rows, (4 * n).max(32))?;
    if sol.status != LpStatus::Optimal {
        // The favorite assignment is always feasible, so this is a solver failure.
        return Err(Error::Lp(format!(
            "EF ERM LP reported {:?} (n = {n}, k = {k}, {} pivots)",
            sol.status, sol.iterations
        )));
    }
    let rows = sol
        .z
        .chunks(k)
        .map(|chunk| {
            let total: f64 = chunk.iter().map(|p| p.max(0.0)).sum();
            OutcomeDistribution::new(chunk.iter().map(|p| p.max(0.0) / total).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    finish(sample, &utils, &losses, rows, None)
}

fn finish(
    sample: &[Individual],
    utils: &[Vec<f64>],
    losses: &[Vec<f64>],
    rows: Vec<OutcomeDistribution>,
    labels: Option<Vec<usize>>,
) -> Result<ErmResult> {
    let probs: Vec<&[f64]> = rows.iter().map(|r| r.probs()).collect();
    let worst = max_gap_all_pairs(utils, &probs);
    if worst > EF_TOL {
        return Err(Error::Lp(format!(
            "solver output violates envy-freeness by {worst:.3e}"
        )));
    }
    let total_loss: f64 = losses.iter().zip(&probs).map(|(l, p)| dot(l, p)).sum();
    Ok(ErmResult {
        assignment: RandomizedAssignment::new(sample.to_vec(), rows)?,
        loss: total_loss / sample.len() as f64,
        total_loss,
        status: ErmStatus::Optimal,
        labels,
    })
}

/// Minimum-loss deterministic EF assignment by exhaustive lexicographic search
/// (`labels[0]` most significant); the first optimum found is kept.
pub fn solve_deterministic_ef_erm(
    sample: &[Individual],
    u: &UtilityModel,
    loss: &LossModel,
    k: OutcomeSpace,
    budget: u128,
) -> Result<ErmResult> {
    let (utils, losses) = check_instance(sample, u, loss, k)?;
    let n = sample.len();
    let k = k.len();
    let needed = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::Budget {
            what: "deterministic EF enumeration",
            needed,
            budget,
        });
    }

    let mut labels = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut used = vec![0usize; k];
    loop {
        used.fill(0);
        for &y in &labels {
            used[y] += 1;
        }
        let envy_free = (0..n).all(|i| {
            let own = utils[i][labels[i]];
            (0..k).all(|y| used[y] == 0 || utils[i][y] - own <= ENVY_EPS)
        });
        if envy_free {
            let total: f64 = (0..n).map(|i| losses[i][labels[i]]).sum();
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                best = Some((total, labels.clone()));
            }
        }
        // Odometer increment, last position fastest.
        let mut pos = n;
        loop {
            if pos == 0 {
                let (_, labels) = best.ok_or_else(|| {
                    Error::Lp("no deterministic EF assignment found".into())
                })?;
                let rows = labels
                    .iter()
                    .map(|&y| OutcomeDistribution::point_mass(k, y))
                    .collect::<Result<Vec<_>>>()?;
                return finish(sample, &utils, &losses, rows, Some(labels));
            }
            pos -= 1;
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
        }
    }
}

/// Everyone gets their favorite outcome (ties to the smallest index).
pub fn favorite_assignment(sample: &[Individual], u: &UtilityModel) -> Result<Vec<usize>> {
    sample.iter().map(|x| Ok(argmax(&u.row(x)?))).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct MixtureWeights {
    /// Weights on the simplex; empty when infeasible.
    pub weights: Vec<f64>,
    /// Mean expected loss over the sample (NaN when infeasible).
    pub loss: f64,
    pub status: ErmStatus,
}

/// Best mixing weights for fixed deterministic `components`, EF over all ordered pairs of
/// `sample`.
pub fn optimize_mixture_weights<D: DeterministicClassifier + ?Sized>(
    components: &[&D],
    sample: &[Individual],
    u: &UtilityModel,
    loss: &LossModel,
) -> Result<MixtureWeights> {
    let n = sample.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    optimize_mixture_weights_on_pairs(components, sample, &pairs, 0.0, u, loss)
}

/// As [`optimize_mixture_weights`], with envy required to stay at most `beta` only on the
/// given ordered index pairs; `(i, j)` constrains how much `sample[i]` may envy `sample[j]`.
pub fn optimize_mixture_weights_on_pairs<D: DeterministicClassifier + ?Sized>(
    components: &[&D],
    sample: &[Individual],
    pairs: &[(usize, usize)],
    beta: f64,
    u: &UtilityModel,
    loss: &LossModel,
) -> Result<MixtureWeights> {
    if !(beta >= 0.0) {
        return Err(Error::contract(format!("beta must be >= 0, got {beta}")));
    }
    if components.is_empty() {
        return Err(Error::contract("mixture needs at least one component"));
    }
    if sample.is_empty() {
        return Err(Error::contract("mixture weights over an empty sample"));
    }
    let n = sample.len();
    if let Some(&(i, j)) = pairs.iter().find(|(i, j)| *i >= n || *j >= n) {
        return Err(Error::contract(format!("pair ({i}, {j}) out of range 0..{n}")));
    }
    let m = components.len();
    let labels: Vec<Vec<usize>> = components
        .iter()
        .map(|g| sample.iter().map(|x| g.predict(x)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let utils = u.matrix(sample)?;
    let losses = loss.matrix(sample)?;
    let objective: Vec<f64> = labels
        .iter()
        .map(|lab| (0..n).map(|i| losses[i][lab[i]]).sum::<f64>() / n as f64)
        .collect();

    // Row for pair (i, j): sum_c alpha_c (u(x_i, g_c(x_i)) - u(x_i, g_c(x_j))) >= -beta.
    // Rows with no negative coefficient hold for every alpha >= 0 and are dropped.
    let rows: Vec<(Vec<f64>, f64)> = pairs
        .iter()
        .map(|&(i, j)| {
            let coeffs: Vec<f64> = labels
                .iter()
                .map(|lab| utils[i][lab[i]] - utils[i][lab[j]])
                .collect();
            (coeffs, -beta)
        })
        .filter(|(c, _)| c.iter().any(|v| *v < 0.0))
        .collect();

    let mut base = LinearProgram::minimize(objective.clone());
    base.eq(vec![1.0; m], 1.0);
    let lazy = lp::DenseRows { rows };
    let sol = lp::solve_lazy(&base, &lazy, 64)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Ok(MixtureWeights {
                weights: Vec::new(),
                loss: f64::NAN,
                status: ErmStatus::Infeasible,
            })
        }
        LpStatus::Unbounded => return Err(Error::Lp("mixture LP unbounded".into())),
    }
    let total: f64 = sol.z.iter().map(|a| a.max(0.0)).sum();
    let weights: Vec<f64> = sol.z.iter().map(|a| a.max(0.0) / total).collect();
    Ok(MixtureWeights {
        loss: dot(&objective, &weights),
        weights,
        status: ErmStatus::Optimal,
    })
}
