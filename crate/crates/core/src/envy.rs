//! Expected utility/loss and envy-freeness: exact predicates on samples, exact rates on
//! finite pair sets, and seeded Monte Carlo estimates against a distribution.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    dot, Classifier, Individual, LossModel, OutcomeDistribution, RandomizedAssignment,
    UtilityModel,
};
use crate::rng::stream_rng;

/// A gap counts as envy only if it exceeds the threshold by more than this.
pub const ENVY_EPS: f64 = 1e-12;

/// Measured envy statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvyReport {
    pub beta: f64,
    /// Fraction of ordered pairs `(x, x')` where `x` envies `x'` by more than `beta`.
    pub alpha_hat: f64,
    /// Largest `u(x, h(x')) - u(x, h(x))` seen.
    pub worst_gap: f64,
    pub n_pairs: u64,
    pub exact: bool,
    /// Hoeffding half-width for Monte Carlo reports, 0 when exact.
    pub ci_halfwidth: f64,
}

impl EnvyReport {
    fn from_counts(beta: f64, violations: u64, worst_gap: f64, n_pairs: u64) -> Self {
        Self {
            beta,
            alpha_hat: violations as f64 / n_pairs as f64,
            worst_gap,
            n_pairs,
            exact: true,
            ci_halfwidth: 0.0,
        }
    }
}

pub fn expected_utility(u: &UtilityModel, x: &Individual, p: &OutcomeDistribution) -> Result<f64> {
    check_len(u.num_outcomes(), p)?;
    Ok(dot(&u.row(x)?, p.probs()))
}

pub fn expected_loss(loss: &LossModel, x: &Individual, p: &OutcomeDistribution) -> Result<f64> {
    check_len(loss.num_outcomes(), p)?;
    Ok(dot(&loss.row(x)?, p.probs()))
}

fn check_len(k: usize, p: &OutcomeDistribution) -> Result<()> {
    if p.len() != k {
        return Err(Error::DimensionMismatch {
            context: "outcome distribution",
            expected: k,
            got: p.len(),
        });
    }
    Ok(())
}

/// `u(x, other) - u(x, own)` given `x`'s utility row.
#[inline]
pub fn envy_gap(u_row: &[f64], own: &[f64], other: &[f64]) -> f64 {
    dot(u_row, other) - dot(u_row, own)
}

#[inline]
pub(crate) fn is_violation(gap: f64, beta: f64) -> bool {
    gap > beta + ENVY_EPS
}

/// True iff no sample individual prefers another's distribution by more than `tol`.
pub fn is_ef_on_sample(h: &RandomizedAssignment, u: &UtilityModel, tol: f64) -> Result<bool> {
    if !(tol >= 0.0) {
        return Err(Error::contract(format!("tolerance must be >= 0, got {tol}")));
    }
    if h.is_empty() {
        return Err(Error::contract("empty sample"));
    }
    check_len(u.num_outcomes(), &h.rows()[0])?;
    let utils = u.matrix(h.sample())?;
    let rows: Vec<&[f64]> = h.rows().iter().map(|r| r.probs()).collect();
    Ok(max_gap_all_pairs(&utils, &rows) <= tol + ENVY_EPS)
}

/// Largest envy gap over all ordered pairs of a sample.
pub(crate) fn max_gap_all_pairs(utils: &[Vec<f64>], rows: &[&[f64]]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (i, u_row) in utils.iter().enumerate() {
        let own = dot(u_row, rows[i]);
        for other in rows {
            worst = worst.max(dot(u_row, other) - own);
        }
    }
    worst
}

/// Exact (alpha, beta)-pairwise rate of `h` on an explicit list of ordered pairs.
pub fn pairwise_ef_rate<C: Classifier + ?Sized>(
    h: &C,
    pairs: &[(Individual, Individual)],
    u: &UtilityModel,
    beta: f64,
) -> Result<EnvyReport> {
    if pairs.is_empty() {
        return Err(Error::contract("no pairs to evaluate"));
    }
    if !(beta >= 0.0) {
        return Err(Error::contract(format!("beta must be >= 0, got {beta}")));
    }
    let gaps = pairs
        .par_iter()
        .map(|(x, xp)| pair_gap(h, u, x, xp))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(&gaps, beta))
}

fn pair_gap<C: Classifier + ?Sized>(
    h: &C,
    u: &UtilityModel,
    x: &Individual,
    xp: &Individual,
) -> Result<f64> {
    let own = h.distribution(x)?;
    check_len(u.num_outcomes(), &own)?;
    let u_row = u.row(x)?;
    if x == xp {
        return Ok(0.0);
    }
    let other = h.distribution(xp)?;
    Ok(envy_gap(&u_row, own.probs(), other.probs()))
}

fn summarize(gaps: &[f64], beta: f64) -> EnvyReport {
    let violations = gaps.iter().filter(|g| is_violation(**g, beta)).count() as u64;
    let worst = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    EnvyReport::from_counts(beta, violations, worst, gaps.len() as u64)
}

/// Exact envy over all `n^2` ordered pairs of a finite population, given each member's
/// utility row and assigned distribution. Under the uniform distribution on the population
/// this is the exact envy probability.
pub fn envy_all_pairs(utils: &[Vec<f64>], rows: &[Vec<f64>], beta: f64) -> Result<EnvyReport> {
    if utils.is_empty() || utils.len() != rows.len() {
        return Err(Error::DimensionMismatch {
            context: "population envy",
            expected: utils.len(),
            got: rows.len(),
        });
    }
    let n = utils.len();
    let (violations, worst) = (0..n)
        .into_par_iter()
        .map(|i| {
            let u_row = &utils[i];
            let own = dot(u_row, &rows[i]);
            let mut count = 0u64;
            let mut worst = f64::NEG_INFINITY;
            for (j, other) in rows.iter().enumerate() {
                let gap = if i == j { 0.0 } else { dot(u_row, other) - own };
                count += is_violation(gap, beta) as u64;
                worst = worst.max(gap);
            }
            (count, worst)
        })
        .reduce(
            || (0, f64::NEG_INFINITY),
            |a, b| (a.0 + b.0, a.1.max(b.1)),
        );
    Ok(EnvyReport::from_counts(beta, violations, worst, (n * n) as u64))
}

/// Source of i.i.d. individuals.
pub trait IndividualSampler: Sync {
    /// Draw one individual; `id` is a suggested unique identifier.
    fn draw(&self, rng: &mut ChaCha8Rng, id: u64) -> Result<Individual>;
}

/// Uniform on `[0, 1]^q`.
#[derive(Clone, Copy, Debug)]
pub struct UniformCube {
    pub q: usize,
}

impl IndividualSampler for UniformCube {
    fn draw(&self, rng: &mut ChaCha8Rng, id: u64) -> Result<Individual> {
        let features = (0..self.q).map(|_| rng.gen::<f64>()).collect();
        Ok(Individual { id, features })
    }
}

/// Uniform over a fixed finite population (keeps the members' own ids).
#[derive(Clone, Debug)]
pub struct UniformFinite {
    pub population: Vec<Individual>,
}

impl IndividualSampler for UniformFinite {
    fn draw(&self, rng: &mut ChaCha8Rng, _id: u64) -> Result<Individual> {
        if self.population.is_empty() {
            return Err(Error::contract("empty population"));
        }
        Ok(self.population[rng.gen_range(0..self.population.len())].clone())
    }
}

/// Ordered pair number `index` drawn from its own stream of `seed`.
pub fn draw_pair<S: IndividualSampler + ?Sized>(
    sampler: &S,
    seed: u64,
    index: u64,
) -> Result<(Individual, Individual)> {
    let mut rng = stream_rng(seed, index);
    let x = sampler.draw(&mut rng, 2 * index)?;
    let xp = sampler.draw(&mut rng, 2 * index + 1)?;
    Ok((x, xp))
}

pub fn draw_pairs<S: IndividualSampler + ?Sized>(
    sampler: &S,
    seed: u64,
    n_pairs: usize,
) -> Result<Vec<(Individual, Individual)>> {
    (0..n_pairs as u64)
        .into_par_iter()
        .map(|i| draw_pair(sampler, seed, i))
        .collect()
}

/// Two-sided Hoeffding half-width `sqrt(ln(2/delta) / (2n))`.
pub fn hoeffding_halfwidth(n: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Monte Carlo estimate of the envy probability of `h` under `sampler`.
pub fn estimate_ef<C, S>(
    h: &C,
    sampler: &S,
    u: &UtilityModel,
    beta: f64,
    n_pairs: u64,
    seed: u64,
    delta: f64,
) -> Result<EnvyReport>
where
    C: Classifier + ?Sized,
    S: IndividualSampler + ?Sized,
{
    if n_pairs == 0 {
        return Err(Error::contract("n_pairs must be >= 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::contract(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(beta >= 0.0) {
        return Err(Error::contract(format!("beta must be >= 0, got {beta}")));
    }
    let gaps = (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let (x, xp) = draw_pair(sampler, seed, i)?;
            pair_gap(h, u, &x, &xp)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = summarize(&gaps, beta);
    report.exact = false;
    report.ci_halfwidth = hoeffding_halfwidth(n_pairs, delta);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstantClassifier, FavoriteClassifier, PointMass};

    fn ind(id: u64) -> Individual {
        Individual::opaque(id)
    }

    #[test]
    fn expected_utility_examples() {
        let u = UtilityModel::table(&[0], vec![vec![0.0, 1.0, 0.25]]).unwrap();
        let pm = OutcomeDistribution::point_mass(3, 1).unwrap();
        assert_eq!(expected_utility(&u, &ind(0), &pm).unwrap(), 1.0);
        let p = OutcomeDistribution::new(vec![0.75, 0.25, 0.0]).unwrap();
        // 0.75 * 0 + 0.25 * 1 + 0 * 0.25
        let oracle: f64 = [0.75 * 0.0, 0.25 * 1.0, 0.0 * 0.25].iter().sum();
        assert_eq!(expected_utility(&u, &ind(0), &p).unwrap(), oracle);
        assert!((oracle - 0.25).abs() < 1e-15);

        let c = UtilityModel::table(&[0], vec![vec![0.4; 5]]).unwrap();
        let uni = OutcomeDistribution::uniform(5).unwrap();
        assert!((expected_utility(&c, &ind(0), &uni).unwrap() - 0.4).abs() < 1e-15);

        let wrong = OutcomeDistribution::uniform(2).unwrap();
        assert!(matches!(
            expected_utility(&u, &ind(0), &wrong),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn expected_loss_examples() {
        let gamma = 4.0;
        let l = LossModel::table(&[0, 1], vec![vec![0.0, 1.0, 1.0], vec![0.2, 0.4, 1.0]]).unwrap();
        let p = OutcomeDistribution::new(vec![1.0 - 1.0 / gamma, 1.0 / gamma, 0.0]).unwrap();
        assert!((expected_loss(&l, &ind(0), &p).unwrap() - 0.25).abs() < 1e-15);
        let zero = OutcomeDistribution::point_mass(3, 0).unwrap();
        assert_eq!(expected_loss(&l, &ind(0), &zero).unwrap(), 0.0);
        let half = OutcomeDistribution::new(vec![0.5, 0.5, 0.0]).unwrap();
        let oracle = 0.5 * 0.2 + 0.5 * 0.4;
        assert!((expected_loss(&l, &ind(1), &half).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - 0.3).abs() < 1e-15);
    }

    fn example1(gamma: f64) -> UtilityModel {
        UtilityModel::table(
            &[0, 1],
            vec![vec![0.0, 1.0, 1.0 / gamma], vec![0.0, 0.0, 1.0]],
        )
        .unwrap()
    }

    fn assignment(rows: Vec<Vec<f64>>) -> RandomizedAssignment {
        let sample = (0..rows.len() as u64).map(ind).collect();
        let rows = rows
            .into_iter()
            .map(|r| OutcomeDistribution::new(r).unwrap())
            .collect();
        RandomizedAssignment::new(sample, rows).unwrap()
    }

    #[test]
    fn ef_on_sample_example1() {
        let u = example1(4.0);
        let h0 = assignment(vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]);
        assert!(!is_ef_on_sample(&h0, &u, 0.0).unwrap());
        let hstar = assignment(vec![vec![0.75, 0.25, 0.0], vec![0.0, 0.0, 1.0]]);
        assert!(is_ef_on_sample(&hstar, &u, 0.0).unwrap());
        // favorites: x1 -> y2, x2 -> y3
        let fav = assignment(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        assert!(is_ef_on_sample(&fav, &u, 0.0).unwrap());
        assert!(is_ef_on_sample(&h0, &u, -1.0).is_err());
    }

    #[test]
    fn pairwise_rate_hand_built() {
        // x_i has utility (0, 1) and is assigned outcome 0 w.p. 1; x'_i gets outcome 1 w.p.
        // (gap + offset) so gaps come out as -0.2, 0.05 and 0.3.
        let u = UtilityModel::table(
            &[0, 1, 2, 10, 11, 12],
            vec![
                vec![0.0, 1.0],
                vec![0.0, 1.0],
                vec![0.0, 1.0],
                vec![0.0, 0.0],
                vec![0.0, 0.0],
                vec![0.0, 0.0],
            ],
        )
        .unwrap();
        let sample: Vec<_> = [0, 1, 2, 10, 11, 12].into_iter().map(ind).collect();
        let rows = [
            vec![0.8, 0.2],
            vec![0.8, 0.2],
            vec![0.8, 0.2],
            vec![1.0, 0.0],
            vec![0.75, 0.25],
            vec![0.5, 0.5],
        ]
        .into_iter()
        .map(|r| OutcomeDistribution::new(r).unwrap())
        .collect();
        let h = RandomizedAssignment::new(sample, rows).unwrap();
        let pairs = vec![(ind(0), ind(10)), (ind(1), ind(11)), (ind(2), ind(12))];
        let expected_gaps = [-0.2, 0.05, 0.3];
        let oracle = expected_gaps.iter().filter(|g| **g > 0.1).count() as f64 / 3.0;
        let r = pairwise_ef_rate(&h, &pairs, &u, 0.1).unwrap();
        assert_eq!(r.alpha_hat, oracle);
        assert!((r.alpha_hat - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.worst_gap - 0.3).abs() < 1e-12);
        assert!(r.exact);
        assert_eq!(r.ci_halfwidth, 0.0);
        assert!(pairwise_ef_rate(&h, &[], &u, 0.1).is_err());
    }

    #[test]
    fn self_pairs_never_envious() {
        let u = example1(4.0);
        let h0 = assignment(vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let pairs = vec![(ind(0), ind(0)), (ind(1), ind(1))];
        let r = pairwise_ef_rate(&h0, &pairs, &u, 0.0).unwrap();
        assert_eq!(r.alpha_hat, 0.0);
        assert_eq!(r.worst_gap, 0.0);
    }

    #[test]
    fn halfwidth_closed_form() {
        let w = hoeffding_halfwidth(200, 0.05);
        assert!((w - (40f64.ln() / 400.0).sqrt()).abs() < 1e-15);
        assert!((w - 0.0961).abs() < 1e-3);
    }

    #[test]
    fn constant_classifier_has_no_envy() {
        let u = UtilityModel::linear(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap();
        let h = ConstantClassifier {
            dist: OutcomeDistribution::new(vec![0.3, 0.7]).unwrap(),
        };
        let r = estimate_ef(&h, &UniformCube { q: 2 }, &u, 0.0, 500, 1, 0.05).unwrap();
        assert_eq!(r.alpha_hat, 0.0);
        assert!(!r.exact);
        assert!(r.ci_halfwidth > 0.0);
    }

    #[test]
    fn favorite_classifier_is_ef_everywhere() {
        let u = UtilityModel::linear(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.1]).unwrap();
        let h = PointMass(FavoriteClassifier { utility: u.clone() });
        let r = estimate_ef(&h, &UniformCube { q: 2 }, &u, 0.0, 2000, 3, 0.05).unwrap();
        assert_eq!(r.alpha_hat, 0.0);
        assert!(r.worst_gap <= 0.0);
    }

    #[test]
    fn estimate_is_deterministic() {
        let u = UtilityModel::linear(vec![vec![1.0, -1.0], vec![-0.5, 1.0]], vec![0.2, 0.3]).unwrap();
        let h = PointMass(FavoriteClassifier {
            utility: UtilityModel::linear(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0, 0.0])
                .unwrap(),
        });
        let a = estimate_ef(&h, &UniformCube { q: 2 }, &u, 0.05, 3000, 9, 0.05).unwrap();
        let b = estimate_ef(&h, &UniformCube { q: 2 }, &u, 0.05, 3000, 9, 0.05).unwrap();
        assert_eq!(a, b);
        assert!(a.alpha_hat > 0.0);
    }
}
