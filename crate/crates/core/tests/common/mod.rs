//! Independent oracles shared by integration tests.

#![allow(dead_code, clippy::needless_range_loop)]

use envyfree_core::lp::{LinearProgram, LpStatus};
use rand::Rng;

/// Solves `a x = b` by Gaussian elimination with partial pivoting; `None` if singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    rec(0, n, r, &mut cur, &mut out);
    out
}

/// Polyhedron `{z : ge rows, eq rows}` as hyperplanes; returns every vertex.
fn vertices(n: usize, ge: &[(Vec<f64>, f64)], eq: &[(Vec<f64>, f64)]) -> Vec<Vec<f64>> {
    let planes: Vec<&(Vec<f64>, f64)> = ge.iter().chain(eq).collect();
    let mut out = Vec::new();
    for s in subsets(planes.len(), n) {
        let a = s.iter().map(|&i| planes[i].0.clone()).collect();
        let b = s.iter().map(|&i| planes[i].1).collect();
        let Some(z) = solve_square(a, b) else { continue };
        let dot = |r: &[f64]| r.iter().zip(&z).map(|(x, y)| x * y).sum::<f64>();
        let feasible = ge.iter().all(|(r, rhs)| dot(r) >= rhs - 1e-7)
            && eq.iter().all(|(r, rhs)| (dot(r) - rhs).abs() <= 1e-7);
        if feasible {
            out.push(z);
        }
    }
    out
}

/// Status and optimal value by vertex enumeration. Every variable has a finite lower
/// bound, so a feasible region is pointed: optimal values are attained at vertices and
/// unboundedness means the recession cone meets `{c . d = -1}`.
pub fn vertex_oracle(lp: &LinearProgram) -> (LpStatus, Option<f64>) {
    let n = lp.num_vars();
    let mut ge = lp.ge.clone();
    for (i, b) in lp.bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        ge.push((e.clone(), b.lo));
        if let Some(hi) = b.hi {
            ge.push((e.iter().map(|v| -v).collect(), -hi));
        }
    }
    let verts = vertices(n, &ge, &lp.eq);
    if verts.is_empty() {
        return (LpStatus::Infeasible, None);
    }
    let cone_ge: Vec<(Vec<f64>, f64)> = ge.iter().map(|(r, _)| (r.clone(), 0.0)).collect();
    let mut cone_eq: Vec<(Vec<f64>, f64)> = lp.eq.iter().map(|(r, _)| (r.clone(), 0.0)).collect();
    cone_eq.push((lp.objective.clone(), -1.0));
    if !vertices(n, &cone_ge, &cone_eq).is_empty() {
        return (LpStatus::Unbounded, None);
    }
    let best = verts
        .iter()
        .map(|z| z.iter().zip(&lp.objective).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    (LpStatus::Optimal, Some(best))
}

/// Small program with integer data: up to 3 variables, mixed rows, shifted and boxed bounds.
pub fn random_lp<R: Rng>(rng: &mut R) -> LinearProgram {
    let n = rng.gen_range(1..=3);
    let int = |rng: &mut R, lo: i32, hi: i32| rng.gen_range(lo..=hi) as f64;
    let objective = (0..n).map(|_| int(rng, -3, 3)).collect();
    let mut lp = LinearProgram::minimize(objective);
    for _ in 0..rng.gen_range(1..=4) {
        let row: Vec<f64> = (0..n).map(|_| int(rng, -3, 3)).collect();
        let rhs = int(rng, -4, 4);
        match rng.gen_range(0..5) {
            0 => {
                lp.eq(row, rhs);
            }
            1 | 2 => {
                lp.le(row, rhs);
            }
            _ => {
                lp.ge(row, rhs);
            }
        }
    }
    for i in 0..n {
        match rng.gen_range(0..4) {
            0 => {
                let lo = int(rng, -2, 1);
                lp.bound(i, lo, Some(lo + int(rng, 0, 3)));
            }
            1 => {
                lp.bound(i, int(rng, -2, 2), None);
            }
            _ => {}
        }
    }
    lp
}

/// Uniform point on the probability simplex.
pub fn random_simplex<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..m).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
