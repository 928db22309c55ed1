//! Bounded dual simplex over a dense tableau, in floating point.
//!
//! The tableau starts from the slack basis and persists across solves, so a
//! re-solve after bound changes starts from the previous basis. Every column
//! has finite bounds: nonbasic columns sit at the bound matching the sign of
//! their reduced cost, which keeps every basis dual feasible.
//!
//! Results are advisory: callers turn the returned duals into a bound with
//! exact arithmetic, so a sloppy answer can only weaken the bound.

use crate::ilp::Sense;

#[derive(Debug, Clone)]
pub struct LpRow {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `min c x` subject to rows and finite column bounds.
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    /// `duals[i]` is the multiplier of row `i`: `>= 0` on `Ge` rows, `<= 0` on `Le` rows.
    Optimal { x: Vec<f64>, duals: Vec<f64>, value: f64 },
    /// Stopped early with a dual feasible basis whose objective reached the
    /// cutoff; `duals` are valid multipliers, `value` their dual objective.
    Cutoff { duals: Vec<f64>, value: f64 },
    /// Row multipliers of the infeasible tableau row, up to sign.
    Infeasible { ray: Vec<f64> },
    Failed,
}

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-7;
/// Largest tolerated row residual or reduced-cost error before a rebuild.
const DRIFT_TOL: f64 = 1e-6;
const PERTURBATION: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

/// Small positive cost shift per column, spread to break dual ties.
fn perturbation(j: usize) -> f64 {
    let h = (j as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 40;
    PERTURBATION * (1.0 + h as f64 / (1u64 << 24) as f64)
}

/// Persistent dual simplex state for one problem. Row `i` has slack column
/// `n + i` with `a x + s = b`.
#[derive(Debug, Clone)]
pub struct DualSimplex {
    problem: LpProblem,
    n: usize,
    rows: usize,
    cols: usize,
    /// `B^-1 [A | I]`, row-major.
    a: Vec<f64>,
    /// `B^-1 b`.
    beta: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    pub pivots: u64,
    pub rebuilds: u64,
}

impl DualSimplex {
    /// `None` when a bound is not finite.
    pub fn new(problem: &LpProblem) -> Option<Self> {
        if problem.lower.iter().chain(&problem.upper).any(|v| !v.is_finite()) {
            return None;
        }
        let n = problem.cost.len();
        let rows = problem.rows.len();
        let cols = n + rows;
        let mut s = DualSimplex {
            problem: problem.clone(),
            n,
            rows,
            cols,
            a: Vec::new(),
            beta: Vec::new(),
            d: Vec::new(),
            cost: Vec::new(),
            lower: vec![0.0; cols],
            upper: vec![0.0; cols],
            x: vec![0.0; cols],
            basis: Vec::new(),
            status: Vec::new(),
            pivots: 0,
            rebuilds: 0,
        };
        s.lower[..n].copy_from_slice(&problem.lower);
        s.upper[..n].copy_from_slice(&problem.upper);
        // Slack ranges implied by the column bounds keep every column boxed.
        for (i, row) in problem.rows.iter().enumerate() {
            let (mut lo, mut hi) = (0.0, 0.0);
            for &(j, a) in &row.terms {
                lo += (a * problem.lower[j]).min(a * problem.upper[j]);
                hi += (a * problem.lower[j]).max(a * problem.upper[j]);
            }
            let (slo, shi) = (row.rhs - hi, row.rhs - lo);
            let (l, u) = match row.sense {
                Sense::Le => (slo.max(0.0), shi.max(0.0)),
                Sense::Ge => (slo.min(0.0), shi.min(0.0)),
                Sense::Eq => (0.0, 0.0),
            };
            s.lower[n + i] = l;
            s.upper[n + i] = u.max(l);
        }
        s.reset();
        Some(s)
    }

    /// Back to the slack basis.
    fn reset(&mut self) {
        let (n, rows, cols) = (self.n, self.rows, self.cols);
        self.a = vec![0.0; rows * cols];
        for (i, row) in self.problem.rows.iter().enumerate() {
            for &(j, a) in &row.terms {
                self.a[i * cols + j] += a;
            }
            self.a[i * cols + n + i] = 1.0;
        }
        self.beta = self.problem.rows.iter().map(|r| r.rhs).collect();
        let scale = self.cost_scale();
        self.cost = vec![0.0; cols];
        for (j, (c, &v)) in self.cost.iter_mut().zip(&self.problem.cost).enumerate() {
            *c = v / scale + perturbation(j);
        }
        self.d = self.cost.clone();
        self.basis = (n..cols).collect();
        self.status = vec![Status::AtLower; cols];
        for s in &mut self.status[n..] {
            *s = Status::Basic;
        }
    }

    fn cost_scale(&self) -> f64 {
        let m = self.problem.cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }

    /// Solves with structural bounds `lower`/`upper`, which must lie within
    /// the bounds the problem was built with.
    pub fn solve(&mut self, lower: &[f64], upper: &[f64]) -> LpOutcome {
        self.solve_with_cutoff(lower, upper, None)
    }

    /// [`DualSimplex::solve`] that stops once the dual objective reaches
    /// `cutoff`.
    pub fn solve_with_cutoff(&mut self, lower: &[f64], upper: &[f64], cutoff: Option<f64>) -> LpOutcome {
        for attempt in 0..2 {
            if attempt == 1 {
                self.rebuilds += 1;
                self.reset();
            }
            match self.run(lower, upper, cutoff) {
                Some(outcome) if !self.drifted() => return outcome,
                _ => {}
            }
        }
        LpOutcome::Failed
    }

    fn run(&mut self, lower: &[f64], upper: &[f64], cutoff: Option<f64>) -> Option<LpOutcome> {
        let n = self.n;
        if lower.iter().zip(upper).any(|(l, u)| !(l.is_finite() && u.is_finite()) || l > u) {
            return None;
        }
        self.lower[..n].copy_from_slice(lower);
        self.upper[..n].copy_from_slice(upper);
        for j in 0..self.cols {
            if self.status[j] == Status::Basic {
                continue;
            }
            let dj = self.d[j];
            self.status[j] = if dj > DUAL_TOL {
                Status::AtLower
            } else if dj < -DUAL_TOL {
                Status::AtUpper
            } else {
                self.status[j]
            };
            self.x[j] = if self.status[j] == Status::AtUpper { self.upper[j] } else { self.lower[j] };
        }
        self.recompute_basic();

        let max_iterations = 4 * self.rows + 1000;
        for _ in 0..max_iterations {
            let Some((r, below)) = self.leaving_row() else {
                return self.optimal();
            };
            if let Some(cut) = cutoff {
                let value = self.objective();
                if value >= cut {
                    return Some(LpOutcome::Cutoff { duals: self.duals(), value });
                }
            }
            let Some((q, flips)) = self.entering_column(r, below) else {
                let ray: Vec<f64> = (0..self.rows).map(|i| self.at(r, n + i)).collect();
                return Some(LpOutcome::Infeasible { ray });
            };
            self.flip(&flips);
            self.pivot(r, q, below);
        }
        None
    }

    fn recompute_basic(&mut self) {
        let active: Vec<(usize, f64)> =
            (0..self.cols).filter(|&j| self.status[j] != Status::Basic && self.x[j] != 0.0).map(|j| (j, self.x[j])).collect();
        for i in 0..self.rows {
            let row = &self.a[i * self.cols..(i + 1) * self.cols];
            let v = self.beta[i] - active.iter().map(|&(j, xj)| row[j] * xj).sum::<f64>();
            self.x[self.basis[i]] = v;
        }
    }

    /// Dual steepest-edge choice: largest squared infeasibility over the
    /// squared norm of the row of `B^-1`; `below` when under the lower bound.
    fn leaving_row(&self) -> Option<(usize, bool)> {
        let mut best: Option<(usize, bool)> = None;
        let mut score = 0.0;
        for i in 0..self.rows {
            let b = self.basis[i];
            let v = self.x[b];
            let tol = PRIMAL_TOL * v.abs().max(1.0);
            let (gap, below) = if v < self.lower[b] - tol {
                (self.lower[b] - v, true)
            } else if v > self.upper[b] + tol {
                (v - self.upper[b], false)
            } else {
                continue;
            };
            let weight: f64 = self.a[i * self.cols + self.n..(i + 1) * self.cols].iter().map(|v| v * v).sum();
            let s = gap * gap / weight.max(1e-12);
            if s > score {
                score = s;
                best = Some((i, below));
            }
        }
        best
    }

    /// Bound-flipping dual ratio test over row `r`. Returns the entering
    /// column and the columns to move to their opposite bound.
    fn entering_column(&self, r: usize, below: bool) -> Option<(usize, Vec<usize>)> {
        let row = &self.a[r * self.cols..(r + 1) * self.cols];
        let leaving = self.basis[r];
        let mut slope =
            if below { self.lower[leaving] - self.x[leaving] } else { self.x[leaving] - self.upper[leaving] };
        // (ratio, |alpha|, column) for columns whose move reduces the infeasibility.
        let mut breaks: Vec<(f64, f64, usize)> = Vec::new();
        for (j, &alpha) in row.iter().enumerate() {
            if self.status[j] == Status::Basic || self.upper[j] <= self.lower[j] {
                continue;
            }
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            // Raising the leaving variable needs alpha < 0 at lower or alpha > 0 at upper.
            let up = self.status[j] == Status::AtLower;
            let ok = if below { (alpha < 0.0) == up } else { (alpha > 0.0) == up };
            if ok {
                breaks.push((self.d[j].abs() / alpha.abs(), alpha.abs(), j));
            }
        }
        if breaks.is_empty() {
            return None;
        }
        breaks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        // Pass breakpoints while flipping them still leaves the row infeasible.
        let mut k = 0;
        while k + 1 < breaks.len() {
            let (_, alpha, j) = breaks[k];
            let step = alpha * (self.upper[j] - self.lower[j]);
            if slope - step <= 0.0 {
                break;
            }
            slope -= step;
            k += 1;
        }
        // Harris pass over the remaining breakpoints.
        let bound = breaks[k..]
            .iter()
            .map(|&(_, alpha, j)| (self.d[j].abs() + DUAL_TOL) / alpha)
            .fold(f64::INFINITY, f64::min);
        let mut pick = k;
        for (i, &(ratio, alpha, _)) in breaks.iter().enumerate().skip(k) {
            if ratio > bound {
                break;
            }
            if alpha > breaks[pick].1 {
                pick = i;
            }
        }
        let q = breaks[pick].2;
        let flips = breaks[..k].iter().map(|b| b.2).collect();
        Some((q, flips))
    }

    /// Moves nonbasic columns to their opposite bound and updates the basics.
    fn flip(&mut self, columns: &[usize]) {
        for &j in columns {
            let (to, status) = match self.status[j] {
                Status::AtLower => (self.upper[j], Status::AtUpper),
                _ => (self.lower[j], Status::AtLower),
            };
            let delta = to - self.x[j];
            self.x[j] = to;
            self.status[j] = status;
            for i in 0..self.rows {
                let a = self.a[i * self.cols + j];
                if a != 0.0 {
                    self.x[self.basis[i]] -= a * delta;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize, below: bool) {
        self.pivots += 1;
        let cols = self.cols;
        let leaving = self.basis[r];
        let target = if below { self.lower[leaving] } else { self.upper[leaving] };
        let alpha = self.at(r, q);
        let delta = (self.x[leaving] - target) / alpha;

        let column: Vec<f64> = (0..self.rows).map(|i| self.at(i, q)).collect();
        for (&b, &c) in self.basis.iter().zip(&column) {
            if c != 0.0 {
                self.x[b] -= c * delta;
            }
        }
        self.x[q] += delta;
        self.x[leaving] = target;

        for v in &mut self.a[r * cols..(r + 1) * cols] {
            *v /= alpha;
        }
        self.beta[r] /= alpha;
        let pivot_row: Vec<(usize, f64)> =
            self.a[r * cols..(r + 1) * cols].iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, &v)| (j, v)).collect();
        for (i, &f) in column.iter().enumerate() {
            if i == r || f == 0.0 {
                continue;
            }
            let row = &mut self.a[i * cols..(i + 1) * cols];
            for &(j, v) in &pivot_row {
                row[j] -= f * v;
            }
            row[q] = 0.0;
            self.beta[i] -= f * self.beta[r];
        }
        let theta = self.d[q];
        if theta != 0.0 {
            for &(j, v) in &pivot_row {
                self.d[j] -= theta * v;
            }
        }
        self.d[q] = 0.0;

        self.basis[r] = q;
        self.status[q] = Status::Basic;
        self.status[leaving] = if below { Status::AtLower } else { Status::AtUpper };
    }

    /// Row residuals or reduced costs have wandered from the original data.
    fn drifted(&self) -> bool {
        let n = self.n;
        for (i, row) in self.problem.rows.iter().enumerate() {
            let lhs: f64 = row.terms.iter().map(|&(j, a)| a * self.x[j]).sum::<f64>() + self.x[n + i];
            if (lhs - row.rhs).abs() > DRIFT_TOL * row.rhs.abs().max(1.0) {
                return true;
            }
        }
        let mut d: Vec<f64> = self.cost[..n].to_vec();
        for (i, row) in self.problem.rows.iter().enumerate() {
            // y_i = -d_{n+i}.
            let y = -self.d[n + i];
            for &(j, a) in &row.terms {
                d[j] -= y * a;
            }
        }
        d.iter().zip(&self.d[..n]).any(|(a, b)| (a - b).abs() > DRIFT_TOL)
    }

    fn optimal(&self) -> Option<LpOutcome> {
        let n = self.n;
        let x = self.x[..n].to_vec();
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(LpOutcome::Optimal { x, duals: self.duals(), value: self.objective() })
    }

    /// Row multipliers `y_i = -d_{n+i}` in unscaled cost units.
    fn duals(&self) -> Vec<f64> {
        let scale = self.cost_scale();
        (0..self.rows).map(|i| -self.d[self.n + i] * scale).collect()
    }

    /// `c x` at the current basis; the dual objective while primal infeasible.
    fn objective(&self) -> f64 {
        self.x[..self.n].iter().zip(&self.problem.cost).map(|(a, b)| a * b).sum()
    }
}

/// One-shot solve from the slack basis.
pub fn solve_lp(problem: &LpProblem) -> LpOutcome {
    match DualSimplex::new(problem) {
        Some(mut s) => s.solve(&problem.lower, &problem.upper),
        None => LpOutcome::Failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(terms: &[(usize, f64)], sense: Sense, rhs: f64) -> LpRow {
        LpRow { terms: terms.to_vec(), sense, rhs }
    }

    #[test]
    fn small_covering_lp() {
        // min x + y, x + 2y >= 3, 2x + y >= 3, 0 <= x,y <= 5. Optimum (1,1).
        let p = LpProblem {
            cost: vec![1.0, 1.0],
            lower: vec![0.0, 0.0],
            upper: vec![5.0, 5.0],
            rows: vec![row(&[(0, 1.0), (1, 2.0)], Sense::Ge, 3.0), row(&[(0, 2.0), (1, 1.0)], Sense::Ge, 3.0)],
        };
        let LpOutcome::Optimal { x, duals, value } = solve_lp(&p) else { panic!("not optimal") };
        assert!((value - 2.0).abs() < 1e-6);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6);
        assert!(duals.iter().all(|&y| y >= -1e-12));
        assert!((duals[0] - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn upper_bounds_bind() {
        // max x + y as min -x - y, x + y <= 10, x,y in [0,3].
        let p = LpProblem {
            cost: vec![-1.0, -1.0],
            lower: vec![0.0, 0.0],
            upper: vec![3.0, 3.0],
            rows: vec![row(&[(0, 1.0), (1, 1.0)], Sense::Le, 10.0)],
        };
        let LpOutcome::Optimal { value, .. } = solve_lp(&p) else { panic!() };
        assert!((value + 6.0).abs() < 1e-6);
    }

    #[test]
    fn equality_and_infeasibility() {
        let p = LpProblem {
            cost: vec![1.0],
            lower: vec![0.0],
            upper: vec![1.0],
            rows: vec![row(&[(0, 1.0)], Sense::Eq, 2.0)],
        };
        let LpOutcome::Infeasible { ray } = solve_lp(&p) else { panic!("expected infeasible") };
        // y * 2 + min(-y * 0, -y * 1) > 0 certifies it.
        assert!(ray[0] * 2.0 + (-ray[0]).min(0.0) > 0.0);
    }

    #[test]
    fn le_rows_have_nonpositive_duals() {
        // min -x, x <= 2, x in [0, 5].
        let p = LpProblem {
            cost: vec![-1.0],
            lower: vec![0.0],
            upper: vec![5.0],
            rows: vec![row(&[(0, 1.0)], Sense::Le, 2.0)],
        };
        let LpOutcome::Optimal { value, duals, .. } = solve_lp(&p) else { panic!() };
        assert!((value + 2.0).abs() < 1e-6);
        assert!((duals[0] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn warm_resolves_match_fresh_solves() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.gen_range(2..8);
            let m = rng.gen_range(1..6);
            let sense = [Sense::Le, Sense::Ge, Sense::Eq];
            let p = LpProblem {
                cost: (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect(),
                lower: vec![0.0; n],
                upper: (0..n).map(|_| rng.gen_range(1..=3) as f64).collect(),
                rows: (0..m)
                    .map(|_| {
                        let mut terms = Vec::new();
                        for j in 0..n {
                            if rng.gen_bool(0.6) {
                                terms.push((j, rng.gen_range(-3..=3) as f64));
                            }
                        }
                        row(&terms, sense[rng.gen_range(0..3)], rng.gen_range(-2..=6) as f64)
                    })
                    .collect(),
            };
            let mut warm = DualSimplex::new(&p).unwrap();
            let (mut lo, mut hi) = (p.lower.clone(), p.upper.clone());
            for _ in 0..6 {
                let got = warm.solve(&lo, &hi);
                let fresh = solve_lp(&LpProblem { lower: lo.clone(), upper: hi.clone(), ..p.clone() });
                match (&got, &fresh) {
                    (LpOutcome::Optimal { value: a, .. }, LpOutcome::Optimal { value: b, .. }) => assert!((a - b).abs() < 1e-5),
                    (LpOutcome::Infeasible { .. }, LpOutcome::Infeasible { .. }) => {}
                    _ => panic!("warm {got:?} fresh {fresh:?}"),
                }
                assert!(!warm.drifted(), "{:?}", got);
                let j = rng.gen_range(0..n);
                if rng.gen_bool(0.5) { lo[j] = hi[j]; } else { hi[j] = lo[j]; }
                if rng.gen_bool(0.2) { lo = p.lower.clone(); hi = p.upper.clone(); }
            }
        }
    }
}
