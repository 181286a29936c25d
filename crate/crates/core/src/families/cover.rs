//! Finite grid covers of the probability simplex in L1.

use crate::error::{Error, Result};

/// Largest cover `build_weight_cover` will materialize.
pub const DEFAULT_COVER_BUDGET: u128 = 10_000_000;

/// All points of the simplex whose coordinates are multiples of `1/N`, `N = ceil(m/gamma)`.
///
/// Any `p` on the simplex rounds to a grid point with each coordinate moved by less than
/// `1/N`, so the L1 distance is below `m/N <= gamma`.
#[derive(Clone, Debug)]
pub struct WeightCover {
    m: usize,
    gamma: f64,
    resolution: u32,
    /// Row-major integer numerators, `m` per point.
    grid: Vec<u32>,
}

impl WeightCover {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Grid denominator `N`.
    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.grid.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Point `i`; the last coordinate absorbs rounding so the sum is 1.
    pub fn point(&self, i: usize) -> Vec<f64> {
        to_point(&self.grid[i * self.m..(i + 1) * self.m], self.resolution)
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    /// The grid point closest to `p` in L1, by largest-remainder rounding.
    pub fn nearest(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.m {
            return Err(Error::DimensionMismatch {
                context: "weight vector",
                expected: self.m,
                got: p.len(),
            });
        }
        let n = self.resolution as f64;
        let scaled: Vec<f64> = p.iter().map(|v| v.max(0.0) * n).collect();
        let mut counts: Vec<u32> = scaled.iter().map(|s| s.floor() as u32).collect();
        let used: u32 = counts.iter().sum();
        let mut order: Vec<usize> = (0..self.m).collect();
        order.sort_by(|&a, &b| {
            let fa = scaled[a] - scaled[a].floor();
            let fb = scaled[b] - scaled[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        let mut remaining = self.resolution.saturating_sub(used);
        for &i in order.iter().cycle() {
            if remaining == 0 {
                break;
            }
            counts[i] += 1;
            remaining -= 1;
        }
        // Inputs summing above 1 by rounding noise can overshoot; trim the smallest remainders.
        let mut excess = counts.iter().sum::<u32>().saturating_sub(self.resolution);
        for &i in order.iter().rev() {
            while excess > 0 && counts[i] > 0 {
                counts[i] -= 1;
                excess -= 1;
            }
        }
        Ok(to_point(&counts, self.resolution))
    }
}

fn to_point(counts: &[u32], resolution: u32) -> Vec<f64> {
    let n = resolution as f64;
    let mut point: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let last = point.len() - 1;
    point[last] = 1.0 - point[..last].iter().sum::<f64>();
    point
}

fn binomial(n: u128, r: u128) -> u128 {
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

pub fn build_weight_cover(m: usize, gamma: f64) -> Result<WeightCover> {
    build_weight_cover_with_budget(m, gamma, DEFAULT_COVER_BUDGET)
}

pub fn build_weight_cover_with_budget(m: usize, gamma: f64, budget: u128) -> Result<WeightCover> {
    if m == 0 || !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::contract("weight cover needs m >= 1 and gamma in (0, 1]"));
    }
    let resolution = (m as f64 / gamma).ceil();
    if resolution > u32::MAX as f64 {
        return Err(Error::TooLarge(format!("cover resolution {resolution}")));
    }
    let resolution = resolution as u32;
    let size = binomial(resolution as u128 + m as u128 - 1, m as u128 - 1);
    if size > budget {
        return Err(Error::Budget {
            what: "weight cover points",
            needed: size,
            budget,
        });
    }
    let mut grid = Vec::with_capacity(size as usize * m);
    let mut current = vec![0u32; m];
    compositions(&mut current, 0, resolution, &mut grid);
    Ok(WeightCover { m, gamma, resolution, grid })
}

/// Appends every composition of `left` into `current[pos..]`, lexicographically descending
/// in the first coordinate.
fn compositions(current: &mut [u32], pos: usize, left: u32, out: &mut Vec<u32>) {
    if pos + 1 == current.len() {
        current[pos] = left;
        out.extend_from_slice(current);
        return;
    }
    for v in (0..=left).rev() {
        current[pos] = v;
        compositions(current, pos + 1, left - v, out);
    }
}
