//! Depth-first branch and bound over an [`IlpModel`].
//!
//! Nodes are bound boxes over the integer variables. Each node is tightened
//! by propagation, bounded by a [`BoundProvider`], and split on one variable.
//! All objective and feasibility decisions are made in exact integer
//! arithmetic; floating point only guides branching.

mod bounds;
mod brute;
mod propagate;
mod simplex;

use std::time::{Duration, Instant};

use num_rational::Ratio;

use crate::ilp::IlpModel;

pub use bounds::{
    ceil, lower_bound_demand, lp_relaxation_bound, trivial_bound, BoundCounters, BoundKind, BoundProvider,
    DemandBound, LpBound, LpRelaxation, NodeBound, ReducedCosts, Relaxation, TrivialBound,
};
pub use brute::{brute_force_schedule, search_space, BruteForceError, BruteForceResult, SEARCH_SPACE_GUARD};
pub use propagate::Propagator;
pub use simplex::{solve_lp, DualSimplex, LpOutcome, LpProblem, LpRow};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveLimits {
    pub max_nodes: Option<u64>,
    pub max_wall_time: Option<Duration>,
    /// Stop once `(incumbent - bound) / max(1, |incumbent|)` is at most this.
    pub target_gap: Ratio<i64>,
    /// Emit a progress line every this many nodes; `None` disables them.
    pub log_interval: Option<u64>,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits { max_nodes: None, max_wall_time: None, target_gap: Ratio::from_integer(0), log_interval: Some(10_000) }
    }
}

impl SolveLimits {
    pub fn nodes(max_nodes: u64) -> Self {
        SolveLimits { max_nodes: Some(max_nodes), ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    /// Stopped at the target gap with an incumbent.
    Feasible,
    Infeasible,
    LimitReached,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::LimitReached => "limit-reached",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: u64,
    pub wall_time: Duration,
    pub lp_solves: u64,
    pub lp_fallbacks: u64,
    pub incumbent_updates: u64,
    pub fixed_by_reduced_cost: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IlpSolution {
    pub status: SolveStatus,
    /// Objective of the incumbent in the model's objective units.
    pub objective_value: Option<i128>,
    pub objective_scale: u64,
    /// Incumbent, re-checked against every constraint.
    pub assignment: Option<Vec<i64>>,
    /// Valid lower bound on the optimum; equals the objective when optimal.
    pub bound: Option<i128>,
    pub stats: SolveStats,
}

impl IlpSolution {
    /// Relative gap `(objective - bound) / max(1, |objective|)`.
    pub fn gap(&self) -> Option<Ratio<i128>> {
        let (obj, bound) = (self.objective_value?, self.bound?);
        Some(Ratio::new((obj - bound).max(0), obj.abs().max(1)))
    }
}

/// Called at every node after bounding with the node box and its bound.
pub type NodeObserver<'a> = dyn FnMut(&[i64], &[i64], &NodeBound) + 'a;

struct Node {
    lower: Vec<i64>,
    upper: Vec<i64>,
    /// Bound inherited from the parent; valid for this node.
    bound: i128,
}

const INTEGRAL_TOL: f64 = 1e-6;

pub fn solve(model: &IlpModel, limits: &SolveLimits, provider: &dyn BoundProvider) -> IlpSolution {
    solve_observed(model, limits, provider, &mut |_, _, _| {})
}

/// [`solve`] with a callback at every bounded node.
pub fn solve_observed(
    model: &IlpModel,
    limits: &SolveLimits,
    provider: &dyn BoundProvider,
    observer: &mut NodeObserver<'_>,
) -> IlpSolution {
    solve_with(model, limits, provider, None, observer)
}

/// [`solve_observed`] seeded with `initial` as the first incumbent. An
/// initial assignment that violates the model is ignored.
pub fn solve_with(
    model: &IlpModel,
    limits: &SolveLimits,
    provider: &dyn BoundProvider,
    initial: Option<&[i64]>,
    observer: &mut NodeObserver<'_>,
) -> IlpSolution {
    let started = Instant::now();
    provider.reset();
    let propagator = Propagator::new(model);
    let mut counters = BoundCounters::default();
    let mut stats = SolveStats::default();
    let (lower, upper) = bounds::root_bounds(model);
    let root_bound = trivial_bound(model, &lower, &upper);
    let mut stack = vec![Node { lower, upper, bound: root_bound }];
    let mut incumbent: Option<(i128, Vec<i64>)> = None;
    if let Some(x) = initial {
        match model.check_assignment(x) {
            Ok(()) => {
                incumbent = Some((model.evaluate(x), x.to_vec()));
                stats.incumbent_updates += 1;
            }
            Err(e) => log::warn!("initial assignment rejected: {e}"),
        }
    }
    let mut limit_hit = false;
    let mut gap_met = false;

    while let Some(mut node) = stack.pop() {
        let out_of_nodes = limits.max_nodes.is_some_and(|max| stats.nodes >= max);
        let out_of_time = limits.max_wall_time.is_some_and(|max| started.elapsed() >= max);
        if out_of_nodes || out_of_time {
            stack.push(node);
            limit_hit = true;
            break;
        }
        if let Some((best, _)) = &incumbent {
            if node.bound >= *best {
                continue;
            }
        }
        stats.nodes += 1;
        if let Some(every) = limits.log_interval {
            if every > 0 && stats.nodes % every == 0 {
                let global = stack.iter().map(|n| n.bound).chain([node.bound]).min();
                log::info!(
                    "nodes={} incumbent={} bound={} open={}",
                    stats.nodes,
                    incumbent.as_ref().map_or("-".to_string(), |(v, _)| v.to_string()),
                    global.map_or("-".to_string(), |b| b.to_string()),
                    stack.len() + 1
                );
            }
        }

        if !propagator.propagate(model, &mut node.lower, &mut node.upper) {
            observer(&node.lower, &node.upper, &NodeBound::Infeasible);
            continue;
        }
        let cutoff = incumbent.as_ref().map(|(best, _)| *best);
        let bound = provider.node_bound(model, &node.lower, &node.upper, cutoff, &mut counters);
        observer(&node.lower, &node.upper, &bound);
        let (value, point, reduced) = match bound {
            NodeBound::Infeasible => continue,
            NodeBound::Bound { value, point, reduced } => (value.max(node.bound), point, reduced),
        };
        if incumbent.as_ref().is_some_and(|(best, _)| value >= *best) {
            continue;
        }

        // A relaxation point that is integral and feasible is a candidate.
        if let Some(p) = &point {
            if let Some(x) = integral_point(p, &node.lower, &node.upper) {
                if model.check_assignment(&x).is_ok() {
                    let obj = model.evaluate(&x);
                    if incumbent.as_ref().is_none_or(|(best, _)| obj < *best) {
                        incumbent = Some((obj, x));
                        stats.incumbent_updates += 1;
                        log::debug!("incumbent {obj} at node {}", stats.nodes);
                    }
                    if obj <= value {
                        continue;
                    }
                }
            }
        }

        if let (Some(rc), Some((best, _))) = (&reduced, &incumbent) {
            stats.fixed_by_reduced_cost += rc.fix(*best, &mut node.lower, &mut node.upper) as u64;
        }

        let Some((var, split, up_first)) = choose_branch(point.as_deref(), &node.lower, &node.upper) else {
            // Every variable is fixed and propagation accepted the box.
            let x = node.lower.clone();
            if model.check_assignment(&x).is_ok() {
                let obj = model.evaluate(&x);
                if incumbent.as_ref().is_none_or(|(best, _)| obj < *best) {
                    incumbent = Some((obj, x));
                    stats.incumbent_updates += 1;
                }
            }
            continue;
        };

        let mut down = Node { lower: node.lower.clone(), upper: node.upper.clone(), bound: value };
        down.upper[var] = split;
        let mut up = Node { lower: node.lower, upper: node.upper, bound: value };
        up.lower[var] = split + 1;
        if up_first {
            stack.push(down);
            stack.push(up);
        } else {
            stack.push(up);
            stack.push(down);
        }

        if *limits.target_gap.numer() > 0 {
            if let Some((best, _)) = &incumbent {
                let global = stack.iter().map(|n| n.bound).min().unwrap_or(*best).min(*best);
                let gap = Ratio::new(best - global, best.abs().max(1));
                let target = Ratio::new(i128::from(*limits.target_gap.numer()), i128::from(*limits.target_gap.denom()));
                if gap <= target {
                    gap_met = true;
                    break;
                }
            }
        }
    }

    stats.lp_solves = counters.lp_solves;
    stats.lp_fallbacks = counters.lp_fallbacks;
    stats.wall_time = started.elapsed();

    let open_bound = stack.iter().map(|n| n.bound).min();
    let (status, bound) = match (&incumbent, open_bound) {
        (Some((best, _)), None) => (SolveStatus::Optimal, Some(*best)),
        (Some((best, _)), Some(open)) => {
            let b = open.min(*best);
            if b >= *best {
                (SolveStatus::Optimal, Some(*best))
            } else if gap_met {
                (SolveStatus::Feasible, Some(b))
            } else {
                (SolveStatus::LimitReached, Some(b))
            }
        }
        (None, None) => (SolveStatus::Infeasible, None),
        (None, Some(open)) => {
            debug_assert!(limit_hit);
            (SolveStatus::LimitReached, Some(open))
        }
    };
    if let Some((_, x)) = &incumbent {
        // Exact re-check; the search only stores checked points.
        model.check_assignment(x).expect("incumbent violates the model");
    }
    log::info!(
        "status={} objective={} bound={} nodes={} lp_solves={} lp_fallbacks={} time={:.3}s",
        status.name(),
        incumbent.as_ref().map_or("-".to_string(), |(v, _)| v.to_string()),
        bound.map_or("-".to_string(), |b| b.to_string()),
        stats.nodes,
        stats.lp_solves,
        stats.lp_fallbacks,
        stats.wall_time.as_secs_f64()
    );
    IlpSolution {
        status,
        objective_value: incumbent.as_ref().map(|(v, _)| *v),
        objective_scale: model.objective_scale(),
        assignment: incumbent.map(|(_, x)| x),
        bound,
        stats,
    }
}

/// Rounds a relaxation point that is integral within tolerance.
fn integral_point(point: &[f64], lower: &[i64], upper: &[i64]) -> Option<Vec<i64>> {
    let mut x = Vec::with_capacity(point.len());
    for (j, &v) in point.iter().enumerate() {
        let r = v.round();
        if (v - r).abs() > INTEGRAL_TOL {
            return None;
        }
        x.push((r as i64).clamp(lower[j], upper[j]));
    }
    Some(x)
}

/// Picks `(variable, split, up_first)`: the down child gets `x <= split`,
/// the up child `x >= split + 1`. Most fractional relaxation value first,
/// lowest index on ties; without a fractional value, the first unfixed
/// variable, exploring its upper branch first.
fn choose_branch(point: Option<&[f64]>, lower: &[i64], upper: &[i64]) -> Option<(usize, i64, bool)> {
    if let Some(p) = point {
        let mut best: Option<(usize, f64)> = None;
        for (j, &v) in p.iter().enumerate() {
            if lower[j] == upper[j] {
                continue;
            }
            let frac = v - v.floor();
            let dist = frac.min(1.0 - frac);
            if dist > INTEGRAL_TOL && best.is_none_or(|(_, d)| dist > d) {
                best = Some((j, dist));
            }
        }
        if let Some((j, _)) = best {
            let v = p[j];
            let split = (v.floor() as i64).clamp(lower[j], upper[j] - 1);
            return Some((j, split, v - v.floor() >= 0.5));
        }
    }
    let j = (0..lower.len()).find(|&j| lower[j] < upper[j])?;
    Some((j, upper[j] - 1, true))
}
