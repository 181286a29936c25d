//! Deterministic fixtures shared by the benchmarks.

use envyfree_core::envy::{draw_pairs, UniformCube};
use envyfree_core::erm::favorite_assignment;
use envyfree_core::harness::lipschitz_linear_utility;
use envyfree_core::{Individual, LossModel, Result, UtilityModel};

type Matrix = Vec<Vec<f64>>;

pub struct ErmInstance {
    pub sample: Vec<Individual>,
    pub utility: UtilityModel,
    pub loss: LossModel,
}

/// `n` points uniform on the unit square with a 1-Lipschitz linear utility over 3 outcomes.
pub fn erm_instance(n: usize, seed: u64) -> Result<ErmInstance> {
    let sample = draw_pairs(&UniformCube { q: 2 }, seed, n.div_ceil(2))?
        .into_iter()
        .flat_map(|(a, b)| [a, b])
        .take(n)
        .collect();
    let utility = lipschitz_linear_utility(2, 3, 1.0, seed)?;
    let loss = LossModel::linear(
        vec![vec![0.4, -0.3], vec![-0.5, 0.2], vec![0.1, 0.1]],
        vec![0.5, 0.5, 0.3],
    )?;
    Ok(ErmInstance { sample, utility, loss })
}

/// Utility rows and favorite-outcome point masses for `n` individuals.
pub fn envy_population(n: usize, seed: u64) -> Result<(Matrix, Matrix)> {
    let inst = erm_instance(n, seed)?;
    let utils = inst.utility.matrix(&inst.sample)?;
    let rows = favorite_assignment(&inst.sample, &inst.utility)?
        .into_iter()
        .enumerate()
        // Shift every third individual to outcome 0 so some pairs envy.
        .map(|(i, y)| {
            let y = if i % 3 == 0 { 0 } else { y };
            (0..3).map(|c| if c == y { 1.0 } else { 0.0 }).collect()
        })
        .collect();
    Ok((utils, rows))
}
