use envyfree_core::envy::{envy_all_pairs, estimate_ef, hoeffding_halfwidth, UniformFinite};
use envyfree_core::model::{LabelTable, PointMass, UtilityModel};
use envyfree_core::rng::stream_rng;
use envyfree_core::Individual;
use rand::Rng;

struct Population {
    sampler: UniformFinite,
    u: UtilityModel,
    h: PointMass<LabelTable>,
    exact: f64,
}

fn population(seed: u64, beta: f64) -> Population {
    let mut rng = stream_rng(seed, 0);
    let n = 25;
    let k = 3;
    let ids: Vec<u64> = (0..n).collect();
    let utils: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.gen()).collect()).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let members: Vec<Individual> = ids.iter().map(|&i| Individual::opaque(i)).collect();
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&y| (0..k).map(|c| (c == y) as u8 as f64).collect())
        .collect();
    // Direct count over all ordered pairs, including self-pairs.
    let violations = (0..n as usize)
        .flat_map(|i| (0..n as usize).map(move |j| (i, j)))
        .filter(|&(i, j)| utils[i][labels[j]] - utils[i][labels[i]] > beta + 1e-12)
        .count();
    let exact = violations as f64 / (n * n) as f64;
    assert_eq!(envy_all_pairs(&utils, &rows, beta).unwrap().alpha_hat, exact);
    Population {
        h: PointMass(LabelTable::from_sample(k, &members, &labels).unwrap()),
        sampler: UniformFinite { population: members },
        u: UtilityModel::table(&ids, utils).unwrap(),
        exact,
    }
}

#[test]
fn hoeffding_interval_covers_exact_rate() {
    let delta = 0.05;
    let mut misses = 0;
    for seed in 0..100u64 {
        let pop = population(seed, 0.1);
        let r = estimate_ef(&pop.h, &pop.sampler, &pop.u, 0.1, 2000, 500 + seed, delta).unwrap();
        assert_eq!(r.ci_halfwidth, hoeffding_halfwidth(2000, delta));
        assert!(!r.exact);
        misses += ((r.alpha_hat - pop.exact).abs() > r.ci_halfwidth) as u32;
    }
    // Hoeffding is conservative; 5 expected misses at most, allow a margin.
    assert!(misses <= 10, "{misses} of 100 intervals miss");
}

#[test]
fn estimate_converges() {
    let pop = population(7, 0.0);
    let r = estimate_ef(&pop.h, &pop.sampler, &pop.u, 0.0, 200_000, 1, 0.05).unwrap();
    assert!((r.alpha_hat - pop.exact).abs() < 0.01, "{} vs {}", r.alpha_hat, pop.exact);
}

#[test]
fn estimate_is_reproducible() {
    let pop = population(3, 0.05);
    let a = estimate_ef(&pop.h, &pop.sampler, &pop.u, 0.05, 5000, 9, 0.05).unwrap();
    let b = estimate_ef(&pop.h, &pop.sampler, &pop.u, 0.05, 5000, 9, 0.05).unwrap();
    assert_eq!(a, b);
}

#[test]
fn halfwidth_value() {
    // sqrt(ln(40) / 200)
    let oracle = (40f64.ln() / 200.0).sqrt();
    assert!((hoeffding_halfwidth(100, 0.05) - oracle).abs() < 1e-15);
    assert!((oracle - 0.1358).abs() < 1e-4);
}
