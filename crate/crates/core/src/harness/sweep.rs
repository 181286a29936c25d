//! Generalization experiments on a synthetic population: the train/test envy sweep for
//! fitted mixtures, the finite-class uniform convergence control and the sample-size
//! formulas with unit constants.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::envy::{draw_pairs, is_violation, pairwise_ef_rate, UniformCube};
use crate::error::{Error, Result};
use crate::families::{fit_ef_mixture_on_pairs, FeatureMap, FiniteFamily, PoolSpec};
use crate::model::{Individual, LossModel, SharedClassifier, UtilityModel};
use crate::rng::{derive_seed, stream_rng};

use super::config::ExperimentConfig;

/// Train rate, test rate, train loss and whether the fallback pool was used.
type TrialStats = (f64, f64, f64, bool);

/// Seeded instance: uniform individuals on `[0, 1]^q`, clamped linear utility and loss,
/// and a pool of linear-argmax classifiers.
#[derive(Clone, Debug)]
pub struct SyntheticProblem {
    pub sampler: UniformCube,
    pub utility: UtilityModel,
    pub loss: LossModel,
    pub pool: Vec<SharedClassifier>,
    pub outcomes: usize,
}

impl SyntheticProblem {
    pub fn generate(config: &ExperimentConfig, seed: u64, pool_size: usize) -> Result<Self> {
        let (q, k) = (config.input_dim, config.outcomes);
        let mut rng = stream_rng(seed, 0);
        let affine = |rng: &mut rand_chacha::ChaCha8Rng| {
            let w: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..q).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let b: Vec<f64> = (0..k).map(|_| rng.gen_range(0.25..0.75)).collect();
            (w, b)
        };
        let (uw, ub) = affine(&mut rng);
        let (lw, lb) = affine(&mut rng);
        let spec = match &config.pool_path {
            Some(path) => {
                let spec = PoolSpec::read(path)?;
                let expected = FeatureMap::OneVsAll { input_dim: q, outcomes: k };
                if spec.feature_map != expected {
                    return Err(Error::Config(format!(
                        "pool feature map {:?} does not match input_dim {q} and outcomes {k}",
                        spec.feature_map
                    )));
                }
                spec
            }
            None => perturbed_favorite_pool(&uw, &ub, pool_size, config.pool_noise, seed),
        };
        Ok(Self {
            sampler: UniformCube { q },
            utility: UtilityModel::linear(uw, ub)?,
            loss: LossModel::linear(lw, lb)?,
            pool: spec.classifiers()?,
            outcomes: k,
        })
    }
}

/// Linear-argmax classifiers whose weights are those of the favorite classifier of the
/// (unclamped) affine utility plus uniform noise; member `i` gets noise amplitude
/// `noise * i / size`, so the pool ranges from exactly favorite to far from it.
fn perturbed_favorite_pool(uw: &[Vec<f64>], ub: &[f64], size: usize, noise: f64, seed: u64) -> PoolSpec {
    let (k, q) = (uw.len(), uw[0].len());
    let mut base = Vec::with_capacity((q + 1) * k);
    for (w, b) in uw.iter().zip(ub) {
        base.extend_from_slice(w);
        base.push(*b);
    }
    let mut rng = stream_rng(seed, 1);
    let weights = (0..size)
        .map(|i| {
            let amp = noise * i as f64 / size as f64;
            base.iter().map(|w| w + amp * rng.gen_range(-1.0..=1.0)).collect()
        })
        .collect();
    PoolSpec {
        feature_map: FeatureMap::OneVsAll { input_dim: q, outcomes: k },
        weights,
    }
}

/// One row of the sweep, averaged over seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    /// Envy rate on the training pairs at `beta`.
    pub train_alpha: f64,
    /// Envy rate on holdout pairs at `beta + 4 gamma`.
    pub test_alpha: f64,
    pub gap: f64,
    pub train_loss: f64,
    /// Fraction of seeds that needed the favorite-classifier fallback.
    pub fallback_rate: f64,
}

/// Flattens pairs into a sample of `2n` individuals and the ordered index pairs to constrain
/// (both directions of each drawn pair).
fn pair_sample(pairs: &[(Individual, Individual)]) -> (Vec<Individual>, Vec<(usize, usize)>) {
    let mut sample = Vec::with_capacity(2 * pairs.len());
    let mut idx = Vec::with_capacity(2 * pairs.len());
    for (i, (a, b)) in pairs.iter().enumerate() {
        sample.push(a.clone());
        sample.push(b.clone());
        idx.push((2 * i, 2 * i + 1));
        idx.push((2 * i + 1, 2 * i));
    }
    (sample, idx)
}

/// For each training size, fit an EF mixture of `m` pool members on the training pairs and
/// compare the train envy rate at `beta` with the holdout rate at `beta + 4 gamma`. Training
/// sets are nested prefixes of one pair stream and the holdout is shared across sizes, per
/// seed; rows average over `trials` seeds.
pub fn generalization_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let max_n = *config.sizes.last().expect("validated");
    let test_beta = config.beta + 4.0 * config.gamma;
    let per_seed: Vec<Vec<(f64, f64, f64, bool)>> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(config.seed, t);
            let problem = SyntheticProblem::generate(config, seed, config.pool_size)?;
            let pool = FiniteFamily::new(problem.pool.clone(), Vec::new(), problem.outcomes)?;
            let train = draw_pairs(&problem.sampler, derive_seed(seed, 2), max_n)?;
            let holdout = draw_pairs(&problem.sampler, derive_seed(seed, 3), config.holdout_pairs)?;
            config
                .sizes
                .iter()
                .map(|&n| {
                    let (sample, idx) = pair_sample(&train[..n]);
                    let fit = fit_ef_mixture_on_pairs(
                        &pool,
                        config.m,
                        &sample,
                        &idx,
                        config.beta,
                        &problem.utility,
                        &problem.loss,
                        derive_seed(seed, 4),
                        config.restarts,
                    )?;
                    let tr = pairwise_ef_rate(&fit.mixture, &train[..n], &problem.utility, config.beta)?;
                    let te = pairwise_ef_rate(&fit.mixture, &holdout, &problem.utility, test_beta)?;
                    Ok((tr.alpha_hat, te.alpha_hat, fit.loss, fit.used_fallback))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let seeds = per_seed.len() as f64;
    Ok(config
        .sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mean = |f: &dyn Fn(&TrialStats) -> f64| {
                per_seed.iter().map(|rows| f(&rows[i])).sum::<f64>() / seeds
            };
            let train_alpha = mean(&|r| r.0);
            let test_alpha = mean(&|r| r.1);
            SweepRow {
                n,
                train_alpha,
                test_alpha,
                gap: test_alpha - train_alpha,
                train_loss: mean(&|r| r.2),
                fallback_rate: mean(&|r| r.3 as u8 as f64),
            }
        })
        .collect())
}

/// Pairs needed for uniform convergence of envy rates over a finite class:
/// `ceil(ln(|H| / delta) / (2 gamma^2))`.
pub fn finite_class_sample_size(class_size: usize, gamma: f64, delta: f64) -> u64 {
    ((class_size as f64 / delta).ln() / (2.0 * gamma * gamma)).ceil() as u64
}

#[derive(Clone, Debug, Serialize)]
pub struct FiniteClassTrial {
    pub trial: usize,
    /// `max_h (test rate - train rate)`.
    pub worst_excess: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FiniteClassReport {
    pub n_pairs: u64,
    pub class_size: usize,
    /// Reference envy rate of each classifier on the holdout.
    pub test_alpha: Vec<f64>,
    pub trials: Vec<FiniteClassTrial>,
}

impl FiniteClassReport {
    pub fn violations(&self) -> usize {
        self.trials.iter().filter(|t| t.violated).count()
    }
}

/// Envy rates at `beta` of every deterministic classifier in `class` on `pairs`.
fn class_rates(
    class: &[SharedClassifier],
    pairs: &[(Individual, Individual)],
    u: &UtilityModel,
    beta: f64,
) -> Result<Vec<f64>> {
    let counts = pairs
        .par_iter()
        .map(|(x, xp)| {
            let ux = u.row(x)?;
            class
                .iter()
                .map(|g| {
                    let gap = ux[g.predict(xp)?] - ux[g.predict(x)?];
                    Ok(is_violation(gap, beta) as u64)
                })
                .collect::<Result<Vec<_>>>()
        })
        .try_fold(
            || vec![0u64; class.len()],
            |mut acc, row| {
                for (a, r) in acc.iter_mut().zip(row?) {
                    *a += r;
                }
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(
            || vec![0u64; class.len()],
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
        )?;
    Ok(counts.iter().map(|c| *c as f64 / pairs.len() as f64).collect())
}

/// Draws a fixed class of `class_size` linear-argmax classifiers, measures each one's
/// envy rate on a large holdout, then for each trial draws a fresh training sample of the
/// uniform-convergence size and records whether any classifier's holdout rate exceeds its
/// training rate by more than `gamma`.
pub fn finite_class_control(config: &ExperimentConfig) -> Result<FiniteClassReport> {
    config.validate()?;
    let problem = SyntheticProblem::generate(config, config.seed, config.class_size)?;
    let class = &problem.pool;
    let n = finite_class_sample_size(class.len(), config.gamma, config.delta);
    let holdout = draw_pairs(&problem.sampler, derive_seed(config.seed, 3), config.holdout_pairs)?;
    let test_alpha = class_rates(class, &holdout, &problem.utility, config.beta)?;
    let trials = (0..config.trials)
        .map(|t| {
            let train = draw_pairs(
                &problem.sampler,
                derive_seed(config.seed, 1000 + t as u64),
                n as usize,
            )?;
            let train_alpha = class_rates(class, &train, &problem.utility, config.beta)?;
            let worst_excess = test_alpha
                .iter()
                .zip(&train_alpha)
                .map(|(te, tr)| te - tr)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(FiniteClassTrial {
                trial: t,
                worst_excess,
                violated: worst_excess > config.gamma,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FiniteClassReport {
        n_pairs: n,
        class_size: class.len(),
        test_alpha,
        trials,
    })
}

/// Sample-size formulas for mixtures with all hidden constants set to 1 (order-of-magnitude
/// guidance only).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SampleSizeBounds {
    /// `(1/g^2) (d m^2 ln(d m k ln(m k / g) / g) + ln(1/g))`, the mixture bound as usually
    /// printed.
    pub mixture_as_printed: u64,
    /// The same with the last term read as `ln(1/delta)`.
    pub mixture_with_log_delta: u64,
    /// Single-class bound `(1/g^2) (d ln k + ln(1/delta))`.
    pub single_class: u64,
}

pub fn sample_size_helper(d: u32, m: u32, k: u32, gamma: f64, delta: f64) -> Result<SampleSizeBounds> {
    if d == 0 || m == 0 || k < 2 {
        return Err(Error::contract("need d >= 1, m >= 1 and k >= 2"));
    }
    if !(gamma > 0.0 && gamma < 1.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::contract("gamma and delta must lie in (0, 1)"));
    }
    let (d, m, k) = (d as f64, m as f64, k as f64);
    let inner = d * m * k * (m * k / gamma).ln() / gamma;
    let main = d * m * m * inner.ln();
    let scale = 1.0 / (gamma * gamma);
    let to_int = |v: f64| -> Result<u64> {
        if !v.is_finite() || v >= 2f64.powi(63) {
            return Err(Error::TooLarge(format!("sample size {v:e}")));
        }
        Ok(v.ceil() as u64)
    };
    Ok(SampleSizeBounds {
        mixture_as_printed: to_int(scale * (main + (1.0 / gamma).ln()))?,
        mixture_with_log_delta: to_int(scale * (main + (1.0 / delta).ln()))?,
        single_class: to_int(scale * (d * k.ln() + (1.0 / delta).ln()))?,
    })
}
