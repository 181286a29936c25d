//! Fitting envy-free mixtures of `m` components drawn from a pool, by random restarts.

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::erm::{optimize_mixture_weights_on_pairs, ErmStatus};
use crate::error::{Error, Result};
use crate::model::{
    DeterministicClassifier, FavoriteClassifier, Individual, LossModel, SharedClassifier,
    UtilityModel,
};
use crate::rng::stream_rng;

use super::{FiniteFamily, MixtureClassifier};

#[derive(Clone, Debug)]
pub struct MixtureFit {
    pub mixture: MixtureClassifier,
    /// Mean expected loss on the fitting sample.
    pub loss: f64,
    /// Restart that produced the result.
    pub restart: usize,
    /// Whether the favorite classifier had to be added to reach feasibility.
    pub used_fallback: bool,
}

/// Fit requiring EF over all ordered pairs of `sample`.
pub fn fit_ef_mixture(
    pool: &FiniteFamily,
    m: usize,
    sample: &[Individual],
    u: &UtilityModel,
    loss: &LossModel,
    seed: u64,
    restarts: usize,
) -> Result<MixtureFit> {
    let n = sample.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    fit_ef_mixture_on_pairs(pool, m, sample, &pairs, 0.0, u, loss, seed, restarts)
}

/// Fit allowing envy up to `beta` on the given ordered index pairs of `sample`.
///
/// Each restart draws `m` pool members (without replacement while the pool allows) and
/// optimizes their weights; the lowest-loss feasible restart wins, ties to the lowest
/// restart index. If every restart is infeasible the restarts are rerun with the favorite
/// classifier replacing the last component, which is feasible with weight 1.
#[allow(clippy::too_many_arguments)]
pub fn fit_ef_mixture_on_pairs(
    pool: &FiniteFamily,
    m: usize,
    sample: &[Individual],
    pairs: &[(usize, usize)],
    beta: f64,
    u: &UtilityModel,
    loss: &LossModel,
    seed: u64,
    restarts: usize,
) -> Result<MixtureFit> {
    if m == 0 {
        return Err(Error::contract("mixture size must be at least 1"));
    }
    let restarts = restarts.max(1);
    let selections: Vec<Vec<SharedClassifier>> = (0..restarts)
        .map(|r| select(pool, m, seed, r as u64))
        .collect();
    if let Some(fit) = best_restart(&selections, sample, pairs, beta, u, loss, false)? {
        return Ok(fit);
    }
    let favorite: SharedClassifier = Arc::new(FavoriteClassifier { utility: u.clone() });
    let augmented: Vec<Vec<SharedClassifier>> = selections
        .into_iter()
        .map(|mut s| {
            *s.last_mut().expect("m >= 1") = favorite.clone();
            s
        })
        .collect();
    best_restart(&augmented, sample, pairs, beta, u, loss, true)?
        .ok_or_else(|| Error::Lp("mixture with the favorite classifier reported infeasible".into()))
}

fn select(pool: &FiniteFamily, m: usize, seed: u64, restart: u64) -> Vec<SharedClassifier> {
    let mut rng = stream_rng(seed, restart);
    let members = pool.members();
    let mut picked: Vec<SharedClassifier> = index::sample(&mut rng, members.len(), m.min(members.len()))
        .into_iter()
        .map(|i| members[i].clone())
        .collect();
    while picked.len() < m {
        picked.push(members[rng.gen_range(0..members.len())].clone());
    }
    picked
}

fn best_restart(
    selections: &[Vec<SharedClassifier>],
    sample: &[Individual],
    pairs: &[(usize, usize)],
    beta: f64,
    u: &UtilityModel,
    loss: &LossModel,
    used_fallback: bool,
) -> Result<Option<MixtureFit>> {
    let results = selections
        .par_iter()
        .map(|components| {
            let refs: Vec<&dyn DeterministicClassifier> =
                components.iter().map(|c| c.as_ref()).collect();
            optimize_mixture_weights_on_pairs(&refs, sample, pairs, beta, u, loss)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(usize, f64)> = None;
    for (r, w) in results.iter().enumerate() {
        if w.status == ErmStatus::Optimal && best.is_none_or(|(_, l)| w.loss < l) {
            best = Some((r, w.loss));
        }
    }
    let Some((restart, loss_value)) = best else {
        return Ok(None);
    };
    let mixture =
        MixtureClassifier::new(selections[restart].clone(), results[restart].weights.clone())?;
    Ok(Some(MixtureFit {
        mixture,
        loss: loss_value,
        restart,
        used_fallback,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envy::is_ef_on_sample;
    use crate::families::{FeatureMap, PoolSpec};
    use crate::model::{Classifier, LabelTable, RandomizedAssignment};

    fn assignment(h: &MixtureClassifier, sample: &[Individual]) -> RandomizedAssignment {
        let rows = sample.iter().map(|x| h.distribution(x).unwrap()).collect();
        RandomizedAssignment::new(sample.to_vec(), rows).unwrap()
    }

    #[test]
    fn favorite_pool() {
        let s: Vec<Individual> = (0..3).map(Individual::opaque).collect();
        let u = UtilityModel::table(&[0, 1, 2], vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.5, 0.4]]).unwrap();
        let l = LossModel::table(&[0, 1, 2], vec![vec![0.3, 0.0], vec![0.0, 0.6], vec![1.0, 0.0]]).unwrap();
        let fav: SharedClassifier = Arc::new(FavoriteClassifier { utility: u.clone() });
        let pool = FiniteFamily::new(vec![fav], s.clone(), 2).unwrap();
        let fit = fit_ef_mixture(&pool, 1, &s, &u, &l, 0, 3).unwrap();
        assert!((fit.loss - (0.3 + 0.6 + 1.0) / 3.0).abs() < 1e-12);
        assert!(!fit.used_fallback);
        assert!(is_ef_on_sample(&assignment(&fit.mixture, &s), &u, 1e-7).unwrap());
    }

    #[test]
    fn example1_pool() {
        let s: Vec<Individual> = (0..2).map(Individual::opaque).collect();
        let u = UtilityModel::table(&[0, 1], vec![vec![0.0, 1.0, 0.25], vec![0.0, 0.0, 1.0]]).unwrap();
        let l = LossModel::table(&[0, 1], vec![vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 0.0]]).unwrap();
        let h0: SharedClassifier = Arc::new(LabelTable::new(3, [(0, 0), (1, 2)]).unwrap());
        let he: SharedClassifier = Arc::new(LabelTable::new(3, [(0, 1), (1, 2)]).unwrap());
        let pool = FiniteFamily::new(vec![h0, he], s.clone(), 3).unwrap();
        let fit = fit_ef_mixture(&pool, 2, &s, &u, &l, 1, 4).unwrap();
        assert!((fit.loss * 2.0 - 0.25).abs() < 1e-9);
    }

    #[test]
    fn infeasible_pool_falls_back() {
        let s: Vec<Individual> = (0..2).map(Individual::opaque).collect();
        let u = UtilityModel::table(&[0, 1], vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let l = LossModel::table(&[0, 1], vec![vec![0.0, 0.5], vec![0.0, 0.5]]).unwrap();
        let g: SharedClassifier = Arc::new(LabelTable::new(2, [(0, 0), (1, 1)]).unwrap());
        let pool = FiniteFamily::new(vec![g], s.clone(), 2).unwrap();
        let fit = fit_ef_mixture(&pool, 2, &s, &u, &l, 0, 2).unwrap();
        assert!(fit.used_fallback);
        assert!(is_ef_on_sample(&assignment(&fit.mixture, &s), &u, 1e-7).unwrap());
    }

    #[test]
    fn linear_pool_is_ef_on_sample_and_deterministic() {
        let mut rng = stream_rng(77, 0);
        let map = FeatureMap::OneVsAll { input_dim: 2, outcomes: 3 };
        let s: Vec<Individual> = (0..40)
            .map(|i| Individual::new(i, vec![rng.gen(), rng.gen()]).unwrap())
            .collect();
        let u = UtilityModel::linear(
            (0..3).map(|_| vec![rng.gen(), rng.gen()]).collect(),
            vec![0.0; 3],
        )
        .unwrap();
        let l = LossModel::linear(
            (0..3).map(|_| vec![rng.gen(), rng.gen()]).collect(),
            vec![0.0; 3],
        )
        .unwrap();
        let pool = PoolSpec::random(map, 30, &mut rng).into_family(s.clone()).unwrap();
        let a = fit_ef_mixture(&pool, 3, &s, &u, &l, 9, 8).unwrap();
        assert!(is_ef_on_sample(&assignment(&a.mixture, &s), &u, 1e-7).unwrap());
        let b = fit_ef_mixture(&pool, 3, &s, &u, &l, 9, 8).unwrap();
        assert_eq!(a.restart, b.restart);
        assert_eq!(a.mixture.weights(), b.mixture.weights());
    }
}
