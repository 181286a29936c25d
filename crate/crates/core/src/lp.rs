//! Dense two-phase primal simplex.
//!
//! Problems are stated as: minimize `c . z` subject to `A z >= b`, `E z = f` and per-variable
//! bounds `lo <= z <= hi` (`hi` optional). Variables are shifted by `lo` internally, finite
//! upper bounds become rows, and each row gets a slack (basic from the start when its sign
//! allows) or an artificial. Phase 1 minimizes the artificials; phase 2 the real objective.

use crate::error::{Error, Result};

/// Smallest magnitude accepted as a pivot and threshold for negative reduced costs.
pub const PIVOT_TOL: f64 = 1e-10;
/// Allowed constraint residual in a returned solution.
pub const FEAS_TOL: f64 = 1e-7;

const HARRIS_TOL: f64 = 1e-9;
const DEGENERATE_SWITCH: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: Option<f64>,
}

impl Default for Bounds {
    fn default() -> Self {
        Self { lo: 0.0, hi: None }
    }
}

#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// Rows `a` with `a . z >= b`.
    pub ge: Vec<(Vec<f64>, f64)>,
    /// Rows `e` with `e . z == f`.
    pub eq: Vec<(Vec<f64>, f64)>,
    pub bounds: Vec<Bounds>,
}

impl LinearProgram {
    /// `minimize objective . z` over `z >= 0`.
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            ge: Vec::new(),
            eq: Vec::new(),
            bounds: vec![Bounds::default(); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn ge(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.ge.push((row, rhs));
        self
    }

    pub fn le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.ge.push((row.into_iter().map(|v| -v).collect(), -rhs));
        self
    }

    pub fn eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.eq.push((row, rhs));
        self
    }

    pub fn bound(&mut self, var: usize, lo: f64, hi: Option<f64>) -> &mut Self {
        self.bounds[var] = Bounds { lo, hi };
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(Error::DimensionMismatch {
                context: "LP bounds",
                expected: n,
                got: self.bounds.len(),
            });
        }
        for (row, rhs) in self.ge.iter().chain(&self.eq) {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "LP constraint row",
                    expected: n,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) || !rhs.is_finite() {
                return Err(Error::Lp("non-finite constraint coefficient".into()));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::Lp("non-finite objective coefficient".into()));
        }
        for b in &self.bounds {
            if !b.lo.is_finite() || b.hi.is_some_and(|h| h.is_nan()) {
                return Err(Error::Lp("lower bounds must be finite".into()));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `z`.
    pub fn max_residual(&self, z: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, rhs) in &self.ge {
            worst = worst.max(rhs - dot(row, z));
        }
        for (row, rhs) in &self.eq {
            worst = worst.max((dot(row, z) - rhs).abs());
        }
        for (b, v) in self.bounds.iter().zip(z) {
            worst = worst.max(b.lo - v);
            if let Some(hi) = b.hi {
                worst = worst.max(v - hi);
            }
        }
        worst
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point (empty unless `status == Optimal`).
    pub z: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, iterations: usize) -> Self {
        Self {
            status,
            z: Vec::new(),
            objective_value: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::NAN,
            },
            iterations,
        }
    }
}

struct Tableau {
    /// Row-major `rows x (cols + 1)`; last column is the right-hand side.
    data: Vec<f64>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
    /// Rows found redundant after phase 1; skipped thereafter.
    dead: Vec<bool>,
    iterations: usize,
    max_iterations: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Tableau {
    #[inline]
    fn width(&self) -> usize {
        self.cols + 1
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width() + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize, cost: &mut [f64]) {
        let w = self.width();
        let p = self.data[pr * w + pc];
        {
            let row = &mut self.data[pr * w..(pr + 1) * w];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[pc] = 1.0;
        }
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[r * w..(r + 1) * w];
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            row[pc] = 0.0;
        }
        let f = cost[pc];
        if f != 0.0 {
            for (v, pv) in cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            cost[pc] = 0.0;
        }
        self.basis[pr] = pc;
        self.iterations += 1;
    }

    /// Reduced-cost row for `costs` under the current basis; the last entry holds `-c_B . x_B`.
    fn reduced_costs(&self, costs: &[f64]) -> Vec<f64> {
        let mut red = costs.to_vec();
        red.push(0.0);
        for r in 0..self.rows {
            if self.dead[r] {
                continue;
            }
            let cb = costs[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            let w = self.width();
            for (v, a) in red.iter_mut().zip(&self.data[r * w..(r + 1) * w]) {
                *v -= cb * a;
            }
        }
        red
    }

    /// Primal simplex over columns `0..allowed`. Prices by most negative reduced cost and
    /// switches to Bland's rule after a run of degenerate pivots, which rules out cycling.
    fn run(&mut self, cost: &mut [f64], allowed: usize) -> Result<Phase> {
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(Error::Lp(format!(
                    "iteration limit {} reached ({} rows, {} columns)",
                    self.max_iterations, self.rows, self.cols
                )));
            }
            let bland = degenerate_run >= DEGENERATE_SWITCH;
            let enter = if bland {
                (0..allowed).find(|&c| cost[c] < -PIVOT_TOL)
            } else {
                (0..allowed)
                    .filter(|&c| cost[c] < -PIVOT_TOL)
                    .min_by(|&a, &b| cost[a].total_cmp(&cost[b]))
            };
            let Some(enter) = enter else {
                return Ok(Phase::Optimal);
            };
            let leave = if bland {
                self.bland_ratio_test(enter)
            } else {
                self.harris_ratio_test(enter)
            };
            let Some(r) = leave else {
                return Ok(Phase::Unbounded);
            };
            let step = self.rhs(r).max(0.0) / self.at(r, enter);
            if step <= FEAS_TOL * 1e-2 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, enter, cost);
        }
    }

    fn bland_ratio_test(&self, enter: usize) -> Option<usize> {
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            if self.dead[r] {
                continue;
            }
            let a = self.at(r, enter);
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = self.rhs(r).max(0.0) / a;
            leave = match leave {
                None => Some((r, ratio)),
                Some((lr, lratio)) => {
                    let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                    if ratio < lratio && !tie || tie && self.basis[r] < self.basis[lr] {
                        Some((r, ratio))
                    } else {
                        Some((lr, lratio))
                    }
                }
            };
        }
        leave.map(|(r, _)| r)
    }

    /// Two-pass ratio test: bound the step with slightly relaxed right-hand sides, then take
    /// the largest pivot among rows whose exact ratio fits under that bound.
    fn harris_ratio_test(&self, enter: usize) -> Option<usize> {
        let candidates: Vec<(usize, f64)> = (0..self.rows)
            .filter(|&r| !self.dead[r])
            .map(|r| (r, self.at(r, enter)))
            .filter(|&(_, a)| a > PIVOT_TOL)
            .collect();
        let bound = candidates
            .iter()
            .map(|&(r, a)| (self.rhs(r).max(0.0) + HARRIS_TOL) / a)
            .fold(f64::INFINITY, f64::min);
        candidates
            .into_iter()
            .filter(|&(r, a)| self.rhs(r).max(0.0) / a <= bound)
            .max_by(|x, y| x.1.total_cmp(&y.1).then(self.basis[y.0].cmp(&self.basis[x.0])))
            .map(|(r, _)| r)
    }
}

/// Solves `lp`. Infeasibility and unboundedness are reported through
/// [`LpSolution::status`]; `Err` is reserved for malformed input or numerical breakdown.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();

    // Rows in shifted variables z' = z - lo, each as (coeffs, rhs, kind).
    #[derive(PartialEq)]
    enum Kind {
        Ge,
        Eq,
    }
    let mut rows: Vec<(Vec<f64>, f64, Kind)> = Vec::new();
    let shift = |row: &[f64], rhs: f64| -> f64 {
        rhs - row.iter().zip(&lp.bounds).map(|(a, b)| a * b.lo).sum::<f64>()
    };
    // Each row is divided by its largest coefficient magnitude.
    let scaled = |row: &[f64], rhs: f64| -> (Vec<f64>, f64) {
        let s = row.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        if s > 0.0 {
            (row.iter().map(|a| a / s).collect(), rhs / s)
        } else {
            (row.to_vec(), rhs)
        }
    };
    for (row, rhs) in &lp.ge {
        let (row, rhs) = scaled(row, shift(row, *rhs));
        rows.push((row, rhs, Kind::Ge));
    }
    for (row, rhs) in &lp.eq {
        let (row, rhs) = scaled(row, shift(row, *rhs));
        rows.push((row, rhs, Kind::Eq));
    }
    for (j, b) in lp.bounds.iter().enumerate() {
        if let Some(hi) = b.hi {
            if hi.is_finite() {
                // -z'_j >= -(hi - lo)
                let mut row = vec![0.0; n];
                row[j] = -1.0;
                rows.push((row, -(hi - b.lo), Kind::Ge));
            }
        }
    }

    // Column layout: [structural | slacks | artificials].
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.2 == Kind::Ge).count();
    let n_art = rows
        .iter()
        .filter(|(_, rhs, kind)| *kind == Kind::Eq || *rhs > 0.0)
        .count();
    let cols = n + n_slack + n_art;
    let w = cols + 1;
    let mut t = Tableau {
        data: vec![0.0; m * w],
        rows: m,
        cols,
        basis: vec![0; m],
        dead: vec![false; m],
        iterations: 0,
        max_iterations: 50_000 + 20 * (m + cols),
    };
    let mut next_slack = n;
    let mut next_art = n + n_slack;
    for (r, (row, rhs, kind)) in rows.iter().enumerate() {
        let line = &mut t.data[r * w..(r + 1) * w];
        match kind {
            Kind::Ge if *rhs <= 0.0 => {
                // -a z' + s = -rhs >= 0, slack basic.
                for (v, a) in line.iter_mut().zip(row) {
                    *v = -a;
                }
                line[next_slack] = 1.0;
                line[cols] = -rhs;
                t.basis[r] = next_slack;
                next_slack += 1;
            }
            Kind::Ge => {
                // a z' - s + art = rhs > 0.
                line[..n].copy_from_slice(row);
                line[next_slack] = -1.0;
                line[next_art] = 1.0;
                line[cols] = *rhs;
                t.basis[r] = next_art;
                next_slack += 1;
                next_art += 1;
            }
            Kind::Eq => {
                let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
                for (v, a) in line.iter_mut().zip(row) {
                    *v = sign * a;
                }
                line[next_art] = 1.0;
                line[cols] = sign * rhs;
                t.basis[r] = next_art;
                next_art += 1;
            }
        }
    }

    let art_start = n + n_slack;
    if n_art > 0 {
        let phase1: Vec<f64> = (0..cols).map(|c| if c >= art_start { 1.0 } else { 0.0 }).collect();
        let mut cost = t.reduced_costs(&phase1);
        match t.run(&mut cost, cols)? {
            Phase::Optimal => {}
            Phase::Unbounded => return Err(Error::Lp("phase 1 reported unbounded".into())),
        }
        let infeasibility = -cost[cols];
        if infeasibility > FEAS_TOL {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, t.iterations));
        }
        // Drive remaining (zero-valued) artificials out of the basis.
        for r in 0..m {
            if t.basis[r] < art_start {
                continue;
            }
            let entering = (0..art_start).find(|&c| t.at(r, c).abs() > PIVOT_TOL);
            match entering {
                Some(c) => {
                    let mut scratch = vec![0.0; w];
                    t.pivot(r, c, &mut scratch);
                }
                None => t.dead[r] = true,
            }
        }
    }

    let mut costs = vec![0.0; cols];
    costs[..n].copy_from_slice(&lp.objective);
    let mut cost = t.reduced_costs(&costs);
    match t.run(&mut cost, art_start)? {
        Phase::Optimal => {}
        Phase::Unbounded => {
            return Ok(LpSolution::without_point(LpStatus::Unbounded, t.iterations))
        }
    }

    let mut z: Vec<f64> = lp.bounds.iter().map(|b| b.lo).collect();
    for r in 0..m {
        if !t.dead[r] && t.basis[r] < n {
            z[t.basis[r]] += t.rhs(r);
        }
    }
    // Snap round-off against the bounds.
    for (v, b) in z.iter_mut().zip(&lp.bounds) {
        if *v < b.lo {
            *v = b.lo;
        }
        if let Some(hi) = b.hi {
            if *v > hi {
                *v = hi;
            }
        }
    }
    let residual = lp.max_residual(&z);
    if residual > FEAS_TOL {
        return Err(Error::Lp(format!(
            "numerical breakdown: residual {residual:.3e} after {} pivots",
            t.iterations
        )));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: dot(&lp.objective, &z),
        z,
        iterations: t.iterations,
    })
}

/// A large family of `row . z >= rhs` constraints that is only partially materialized.
pub trait LazyConstraints {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dense coefficients and right-hand side of constraint `id`.
    fn row(&self, id: usize) -> (Vec<f64>, f64);

    /// `row . z - rhs` for every constraint, in id order.
    fn slacks(&self, z: &[f64]) -> Vec<f64>;
}

/// Constraints stored as dense rows.
#[derive(Clone, Debug, Default)]
pub struct DenseRows {
    pub rows: Vec<(Vec<f64>, f64)>,
}

impl LazyConstraints for DenseRows {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn row(&self, id: usize) -> (Vec<f64>, f64) {
        self.rows[id].clone()
    }

    fn slacks(&self, z: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|(r, b)| dot(r, z) - b).collect()
    }
}

/// Slack below which a lazy constraint counts as violated.
pub const LAZY_TOL: f64 = 1e-9;

/// Solves `base` plus every constraint in `lazy` by row generation: solve the current
/// relaxation, add up to `batch` of the most violated lazy rows, repeat until none is
/// violated by more than [`LAZY_TOL`]. The result is optimal for the full program.
pub fn solve_lazy(
    base: &LinearProgram,
    lazy: &dyn LazyConstraints,
    batch: usize,
) -> Result<LpSolution> {
    let batch = batch.max(1);
    let mut lp = base.clone();
    let mut added = vec![false; lazy.len()];
    let mut iterations = 0;
    loop {
        let mut sol = solve(&lp)?;
        iterations += sol.iterations;
        sol.iterations = iterations;
        match sol.status {
            LpStatus::Infeasible => return Ok(sol),
            LpStatus::Unbounded => {
                if added.iter().all(|a| *a) {
                    return Ok(sol);
                }
                // The relaxation may be unbounded only for lack of rows; add them all.
                for (id, a) in added.iter_mut().enumerate() {
                    if !*a {
                        let (row, rhs) = lazy.row(id);
                        lp.ge(row, rhs);
                        *a = true;
                    }
                }
                continue;
            }
            LpStatus::Optimal => {}
        }
        let slacks = lazy.slacks(&sol.z);
        let mut violated: Vec<(usize, f64)> = slacks
            .iter()
            .enumerate()
            .filter(|(id, s)| **s < -LAZY_TOL && !added[*id])
            .map(|(id, s)| (id, *s))
            .collect();
        if violated.is_empty() {
            return Ok(sol);
        }
        violated.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        for &(id, _) in violated.iter().take(batch) {
            let (row, rhs) = lazy.row(id);
            lp.ge(row, rhs);
            added[id] = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_nonnegative() {
        let lp = LinearProgram::minimize(vec![1.0]);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.z, vec![0.0]);
        assert_eq!(s.objective_value, 0.0);
    }

    #[test]
    fn segment_optimum() {
        let mut lp = LinearProgram::minimize(vec![-1.0, -1.0]);
        lp.le(vec![1.0, 1.0], 1.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value + 1.0).abs() < 1e-9);
        assert!(lp.max_residual(&s.z) <= FEAS_TOL);
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.ge(vec![1.0], 1.0).le(vec![1.0], 0.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.ge(vec![1.0], 1.0).bound(0, 0.0, Some(0.0));
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::minimize(vec![-1.0, 0.0]);
        lp.ge(vec![1.0, -1.0], 0.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equalities_and_shifted_bounds() {
        // min x + 2y s.t. x + y = 3, x in [-1, 1], y >= 0.5
        let mut lp = LinearProgram::minimize(vec![1.0, 2.0]);
        lp.eq(vec![1.0, 1.0], 3.0)
            .bound(0, -1.0, Some(1.0))
            .bound(1, 0.5, None);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.z[0] - 1.0).abs() < 1e-12 && (s.z[1] - 2.0).abs() < 1e-12);
        assert!((s.objective_value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.eq(vec![1.0, 1.0], 1.0).eq(vec![2.0, 2.0], 2.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_rejected() {
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.ge(vec![1.0], 0.0);
        assert!(solve(&lp).is_err());
        let mut lp = LinearProgram::minimize(vec![f64::NAN]);
        lp.ge(vec![1.0], 0.0);
        assert!(solve(&lp).is_err());
    }

    #[test]
    fn lazy_matches_eager() {
        // min -x - y over the unit-ish polygon cut by several rows.
        let rows = vec![
            (vec![-1.0, -2.0], -4.0),
            (vec![-3.0, -1.0], -6.0),
            (vec![-1.0, -1.0], -2.5),
            (vec![1.0, -1.0], -2.0),
        ];
        let mut eager = LinearProgram::minimize(vec![-1.0, -1.0]);
        for (r, b) in &rows {
            eager.ge(r.clone(), *b);
        }
        let mut base = LinearProgram::minimize(vec![-1.0, -1.0]);
        base.bound(0, 0.0, Some(10.0)).bound(1, 0.0, Some(10.0));
        let lazy = DenseRows { rows };
        let a = solve(&eager).unwrap();
        let b = solve_lazy(&base, &lazy, 1).unwrap();
        assert_eq!(b.status, LpStatus::Optimal);
        assert!((a.objective_value - b.objective_value).abs() < 1e-9);
        assert!(lazy.slacks(&b.z).iter().all(|s| *s >= -LAZY_TOL));
    }

    #[test]
    fn lazy_infeasible_and_unbounded() {
        let base = LinearProgram::minimize(vec![-1.0]);
        let lazy = DenseRows { rows: vec![(vec![-1.0], -3.0)] };
        let s = solve_lazy(&base, &lazy, 4).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.z[0] - 3.0).abs() < 1e-12);
        let lazy = DenseRows { rows: vec![(vec![1.0], -3.0)] };
        assert_eq!(solve_lazy(&base, &lazy, 4).unwrap().status, LpStatus::Unbounded);
        let mut base = LinearProgram::minimize(vec![1.0]);
        base.bound(0, 0.0, Some(1.0));
        let lazy = DenseRows { rows: vec![(vec![1.0], 2.0)] };
        assert_eq!(solve_lazy(&base, &lazy, 4).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's classic cycling instance; Bland's rule must terminate.
        let mut lp = LinearProgram::minimize(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.le(vec![0.25, -60.0, -0.04, 9.0], 0.0)
            .le(vec![0.5, -90.0, -0.02, 3.0], 0.0)
            .le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value + 0.05).abs() < 1e-9);
    }
}
