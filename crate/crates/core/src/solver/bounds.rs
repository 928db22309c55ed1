//! Lower bounds on the optimum of a node, i.e. the model restricted to
//! variable bounds `lower..=upper`.
//!
//! Every bound here is valid: it never exceeds the objective of any integer
//! point inside the node that satisfies the model.

use std::sync::Mutex;

use num_rational::Ratio;

use crate::ilp::{IlpModel, ModelKind, Sense, VarId, VarKey};
use crate::instance::Instance;
use crate::patterns::PatternCatalog;

use super::simplex::{DualSimplex, LpOutcome, LpProblem, LpRow};

/// Outcome of bounding one node.
#[derive(Debug, Clone)]
pub enum NodeBound {
    Infeasible,
    /// `value` is already rounded up to an integer objective value. `point`
    /// is a relaxation optimum over all model variables when one was computed.
    Bound { value: i128, point: Option<Vec<f64>>, reduced: Option<ReducedCosts> },
}

/// Exact Lagrangian certificate of a node: every integer point `x` of the
/// node that satisfies the model has
/// `objective(x) * denom >= base + sum_j |reduced_j| * distance_j`, where
/// `distance_j` is how far `x_j` sits from the bound that minimises
/// `reduced_j * x_j` (the lower bound when `reduced_j > 0`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedCosts {
    pub base: i128,
    pub denom: i128,
    pub reduced: Vec<(VarId, i128)>,
}

impl ReducedCosts {
    /// Tightens bounds so that no point left out could beat `incumbent`.
    /// Returns the number of variables tightened.
    pub fn fix(&self, incumbent: i128, lower: &mut [i64], upper: &mut [i64]) -> usize {
        // Improving points satisfy objective <= incumbent - 1.
        let budget = (incumbent - 1) * self.denom - self.base;
        if budget < 0 {
            return 0;
        }
        let mut fixed = 0;
        for &(j, r) in &self.reduced {
            let reach = budget / r.abs();
            if r > 0 {
                let cap = i128::from(lower[j]) + reach;
                if cap < i128::from(upper[j]) {
                    upper[j] = cap as i64;
                    fixed += 1;
                }
            } else if r < 0 {
                let floor = i128::from(upper[j]) - reach;
                if floor > i128::from(lower[j]) {
                    lower[j] = floor as i64;
                    fixed += 1;
                }
            }
        }
        fixed
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BoundCounters {
    pub lp_solves: u64,
    pub lp_fallbacks: u64,
}

pub trait BoundProvider: Send + Sync {
    fn name(&self) -> &'static str;

    /// `cutoff` is the incumbent value, if any; a provider may stop early
    /// once it proves the node cannot beat it.
    fn node_bound(
        &self,
        model: &IlpModel,
        lower: &[i64],
        upper: &[i64],
        cutoff: Option<i128>,
        counters: &mut BoundCounters,
    ) -> NodeBound;

    /// Called once before a search; drops state carried over from earlier
    /// searches so that results depend only on the model and limits.
    fn reset(&self) {}
}

/// Which provider to use, by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    Trivial,
    DemandLb,
    LpRelaxation,
}

impl BoundKind {
    pub const ALL: [BoundKind; 3] = [BoundKind::Trivial, BoundKind::DemandLb, BoundKind::LpRelaxation];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Trivial => "trivial",
            BoundKind::DemandLb => "demand-lb",
            BoundKind::LpRelaxation => "lp-relaxation",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        BoundKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Builds the provider. The LP provider falls back to the demand bound
    /// when the relaxation fails numerically.
    pub fn provider(self, inst: &Instance, cat: &PatternCatalog, model: &IlpModel) -> Box<dyn BoundProvider> {
        match self {
            BoundKind::Trivial => Box::new(TrivialBound),
            BoundKind::DemandLb => Box::new(DemandBound::new(inst, cat, model)),
            BoundKind::LpRelaxation => Box::new(LpBound::new(Box::new(DemandBound::new(inst, cat, model)))),
        }
    }
}

/// Sum of each objective term at its cheaper bound.
pub fn trivial_bound(model: &IlpModel, lower: &[i64], upper: &[i64]) -> i128 {
    model
        .objective()
        .iter()
        .map(|&(j, c)| {
            let c = i128::from(c);
            (c * i128::from(lower[j])).min(c * i128::from(upper[j]))
        })
        .sum()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrivialBound;

impl BoundProvider for TrivialBound {
    fn name(&self) -> &'static str {
        "trivial"
    }

    fn node_bound(&self, model: &IlpModel, lower: &[i64], upper: &[i64], _: Option<i128>, _: &mut BoundCounters) -> NodeBound {
        NodeBound::Bound { value: trivial_bound(model, lower, upper), point: None, reduced: None }
    }
}

#[derive(Debug, Clone)]
struct StartInfo {
    beam_type: usize,
    counts: Vec<u32>,
    used: u64,
}

/// Combinatorial bound from residual demand.
///
/// For `m1` the residual length of each type must be filled by starts whose
/// idle cost per unit of used capacity is at least the cheapest such ratio.
/// For `m3` each start occupies its curing time in cells, so the residual
/// needs enough starts of the largest remaining capacity. `m2` and `am2`
/// get the trivial bound.
#[derive(Debug, Clone)]
pub struct DemandBound {
    kind: Option<ModelKind>,
    /// Per variable, the start it represents if it can deliver demand.
    starts: Vec<Option<StartInfo>>,
    /// Per type, `(length, demand)` pairs.
    demand: Vec<Vec<(u64, u32)>>,
    curing: Vec<u32>,
    objective: Vec<i64>,
}

impl DemandBound {
    pub fn new(inst: &Instance, cat: &PatternCatalog, model: &IlpModel) -> Self {
        let periods = inst.periods();
        let starts = (0..model.num_vars())
            .map(|j| match model.key(j) {
                Some(VarKey::Start { period, pattern, .. }) if pattern > 0 => {
                    let duration = cat.duration(pattern);
                    if period + duration - 1 > periods {
                        return None;
                    }
                    let p = cat.pattern(pattern);
                    Some(StartInfo {
                        beam_type: p.beam_type(),
                        counts: p.counts().to_vec(),
                        used: cat.used_capacity(pattern).base_units(),
                    })
                }
                _ => None,
            })
            .collect();
        let demand = inst
            .beam_types()
            .iter()
            .map(|bt| bt.lengths().iter().map(|l| l.base_units()).zip(bt.demands().iter().copied()).collect())
            .collect();
        let mut objective = vec![0i64; model.num_vars()];
        for &(j, c) in model.objective() {
            objective[j] += c;
        }
        DemandBound {
            kind: model.kind(),
            starts,
            demand,
            curing: inst.beam_types().iter().map(|bt| bt.curing_time()).collect(),
            objective,
        }
    }

    /// Residual demand volume per type after the starts fixed to 1, plus the
    /// number of those starts per type.
    fn residual(&self, lower: &[i64]) -> (Vec<u128>, Vec<u64>) {
        let mut delivered: Vec<Vec<u64>> = self.demand.iter().map(|d| vec![0; d.len()]).collect();
        let mut fixed = vec![0u64; self.demand.len()];
        for (j, s) in self.starts.iter().enumerate() {
            if let (Some(s), true) = (s, lower[j] >= 1) {
                fixed[s.beam_type] += 1;
                for (k, &a) in s.counts.iter().enumerate() {
                    delivered[s.beam_type][k] += u64::from(a);
                }
            }
        }
        let volume = self
            .demand
            .iter()
            .zip(&delivered)
            .map(|(d, got)| {
                d.iter()
                    .zip(got)
                    .map(|(&(len, dem), &g)| u128::from(u64::from(dem).saturating_sub(g)) * u128::from(len))
                    .sum()
            })
            .collect();
        (volume, fixed)
    }

    /// The bound as an exact rational, or `None` when the free starts cannot
    /// carry the residual volume.
    pub fn bound(&self, model: &IlpModel, lower: &[i64], upper: &[i64]) -> Option<Ratio<i128>> {
        let trivial = trivial_bound(model, lower, upper);
        let (volume, fixed) = self.residual(lower);
        let types = self.demand.len();
        let mut capacity = vec![0u128; types];
        let mut best_ratio: Vec<Option<Ratio<i128>>> = vec![None; types];
        let mut largest = vec![0u64; types];
        for (j, s) in self.starts.iter().enumerate() {
            let Some(s) = s else { continue };
            if lower[j] >= 1 || upper[j] < 1 || s.used == 0 {
                continue;
            }
            let c = s.beam_type;
            capacity[c] += u128::from(s.used);
            largest[c] = largest[c].max(s.used);
            let ratio = Ratio::new(i128::from(self.objective[j].max(0)), i128::from(s.used));
            if best_ratio[c].is_none_or(|r| ratio < r) {
                best_ratio[c] = Some(ratio);
            }
        }
        if (0..types).any(|c| volume[c] > capacity[c]) {
            return None;
        }
        match self.kind {
            Some(ModelKind::M1) => {
                let mut total = Ratio::from_integer(trivial);
                for c in 0..types {
                    if volume[c] > 0 {
                        let rho = best_ratio[c].expect("capacity is positive");
                        total += rho * Ratio::from_integer(volume[c] as i128);
                    }
                }
                Some(total)
            }
            Some(ModelKind::M3) => {
                let mut cells: i128 = 0;
                for c in 0..types {
                    let mut starts = i128::from(fixed[c] as i64);
                    if volume[c] > 0 {
                        starts += volume[c].div_ceil(u128::from(largest[c])) as i128;
                    }
                    cells += starts * i128::from(self.curing[c]);
                }
                Some(Ratio::from_integer(trivial.max(cells)))
            }
            _ => Some(Ratio::from_integer(trivial)),
        }
    }
}

impl BoundProvider for DemandBound {
    fn name(&self) -> &'static str {
        "demand-lb"
    }

    fn node_bound(&self, model: &IlpModel, lower: &[i64], upper: &[i64], _: Option<i128>, _: &mut BoundCounters) -> NodeBound {
        match self.bound(model, lower, upper) {
            None => NodeBound::Infeasible,
            Some(r) => NodeBound::Bound { value: ceil(r), point: None, reduced: None },
        }
    }
}

/// Residual-demand bound on a model built from `inst` and `cat`, at the
/// model's own variable bounds.
pub fn lower_bound_demand(inst: &Instance, cat: &PatternCatalog, model: &IlpModel) -> Option<Ratio<i128>> {
    let (lower, upper) = root_bounds(model);
    DemandBound::new(inst, cat, model).bound(model, &lower, &upper)
}

pub(crate) fn root_bounds(model: &IlpModel) -> (Vec<i64>, Vec<i64>) {
    model.variables().iter().map(|v| (v.lower, v.upper)).unzip()
}

pub fn ceil(r: Ratio<i128>) -> i128 {
    r.ceil().to_integer()
}

/// Result of the continuous relaxation of a node.
#[derive(Debug, Clone)]
pub enum LpRelaxation {
    /// `value` is a certified lower bound derived from the relaxation duals;
    /// `point` is the (floating) relaxation optimum over all variables, absent
    /// when the solve stopped at a cutoff.
    Bound { value: Ratio<i128>, point: Option<Vec<f64>>, reduced: Option<ReducedCosts> },
    /// Certified by a Farkas combination checked in integer arithmetic.
    Infeasible,
    /// The floating solve or its certificate did not go through.
    Failed,
}

/// Multipliers are quantised to multiples of `1 / DUAL_DENOMINATOR`.
const DUAL_DENOMINATOR: i128 = 1 << 20;

struct Row {
    terms: Vec<(usize, i128)>,
    sense: Sense,
    rhs: i128,
}

/// Continuous relaxation of one model, re-solved warm across nodes.
pub struct Relaxation {
    key: ModelKey,
    cost: Vec<i128>,
    rows: Vec<Row>,
    engine: DualSimplex,
}

/// Identifies the model a [`Relaxation`] was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ModelKey {
    address: usize,
    vars: usize,
    constraints: usize,
}

impl ModelKey {
    fn of(model: &IlpModel) -> Self {
        ModelKey {
            address: model as *const IlpModel as usize,
            vars: model.num_vars(),
            constraints: model.constraints().len(),
        }
    }
}

impl Relaxation {
    /// `None` when a variable bound of the model is not finite.
    pub fn new(model: &IlpModel) -> Option<Self> {
        let n = model.num_vars();
        let mut cost = vec![0i128; n];
        for &(j, c) in model.objective() {
            cost[j] += i128::from(c);
        }
        let rows: Vec<Row> = model
            .constraints()
            .iter()
            .map(|c| Row {
                terms: c.terms.iter().map(|&(j, a)| (j, i128::from(a))).collect(),
                sense: c.sense,
                rhs: i128::from(c.rhs),
            })
            .collect();
        let (lower, upper) = root_bounds(model);
        let problem = LpProblem {
            cost: cost.iter().map(|&c| c as f64).collect(),
            lower: lower.iter().map(|&v| v as f64).collect(),
            upper: upper.iter().map(|&v| v as f64).collect(),
            rows: rows
                .iter()
                .map(|r| LpRow { terms: r.terms.iter().map(|&(j, a)| (j, a as f64)).collect(), sense: r.sense, rhs: r.rhs as f64 })
                .collect(),
        };
        let engine = DualSimplex::new(&problem)?;
        Some(Relaxation { key: ModelKey::of(model), cost, rows, engine })
    }

    /// Lagrangian value `y b + sum_j min(r_j l_j, r_j u_j)` with `r = c - y A`,
    /// for sign-feasible integer multipliers `round(y * DUAL_DENOMINATOR)`.
    fn lagrangian(&self, y: &[f64], with_cost: bool, lower: &[i64], upper: &[i64]) -> Option<(i128, Vec<i128>)> {
        let mut yq = Vec::with_capacity(self.rows.len());
        for (row, &v) in self.rows.iter().zip(y) {
            let s = v * DUAL_DENOMINATOR as f64;
            if !s.is_finite() || s.abs() > 1e30 {
                return None;
            }
            let q = s.round() as i128;
            yq.push(match row.sense {
                Sense::Ge => q.max(0),
                Sense::Le => q.min(0),
                Sense::Eq => q,
            });
        }
        let mut reduced: Vec<i128> =
            if with_cost { self.cost.iter().map(|&c| c * DUAL_DENOMINATOR).collect() } else { vec![0; self.cost.len()] };
        let mut total: i128 = 0;
        for (row, &y) in self.rows.iter().zip(&yq) {
            if y == 0 {
                continue;
            }
            total += y * row.rhs;
            for &(j, a) in &row.terms {
                reduced[j] -= y * a;
            }
        }
        for (j, r) in reduced.iter().enumerate() {
            total += (r * i128::from(lower[j])).min(r * i128::from(upper[j]));
        }
        Some((total, reduced))
    }

    /// Solves the relaxation of the node and certifies the result exactly.
    pub fn bound(&mut self, lower: &[i64], upper: &[i64]) -> LpRelaxation {
        self.bound_with_cutoff(lower, upper, None)
    }

    /// [`Relaxation::bound`] that may stop early, without a point, once the
    /// relaxation provably cannot go below `cutoff - 1`.
    pub fn bound_with_cutoff(&mut self, lower: &[i64], upper: &[i64], cutoff: Option<i128>) -> LpRelaxation {
        if lower.iter().zip(upper).any(|(l, u)| l > u) {
            return LpRelaxation::Infeasible;
        }
        let lo: Vec<f64> = lower.iter().map(|&v| v as f64).collect();
        let hi: Vec<f64> = upper.iter().map(|&v| v as f64).collect();
        // Integer objectives: a relaxation above cutoff - 1 rounds up to the cutoff.
        let stop = cutoff.map(|c| c as f64 - 0.5);
        let (point, duals) = match self.engine.solve_with_cutoff(&lo, &hi, stop) {
            LpOutcome::Optimal { x, duals, .. } => (Some(x), duals),
            LpOutcome::Cutoff { duals, .. } => (None, duals),
            LpOutcome::Infeasible { ray } => return self.certify_infeasible(&ray, lower, upper),
            LpOutcome::Failed => return LpRelaxation::Failed,
        };
        match self.lagrangian(&duals, true, lower, upper) {
            Some((base, reduced)) => {
                let reduced =
                    reduced.into_iter().enumerate().filter(|&(j, r)| r != 0 && lower[j] < upper[j]).collect();
                LpRelaxation::Bound {
                    value: Ratio::new(base, DUAL_DENOMINATOR),
                    point,
                    reduced: Some(ReducedCosts { base, denom: DUAL_DENOMINATOR, reduced }),
                }
            }
            None => LpRelaxation::Failed,
        }
    }

    fn certify_infeasible(&self, ray: &[f64], lower: &[i64], upper: &[i64]) -> LpRelaxation {
        let scale = ray.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 || !scale.is_finite() {
            return LpRelaxation::Failed;
        }
        // The ray's sign is not tracked; either orientation may certify.
        for sign in [1.0, -1.0] {
            let y: Vec<f64> = ray.iter().map(|v| sign * v / scale).collect();
            if matches!(self.lagrangian(&y, false, lower, upper), Some((total, _)) if total > 0) {
                return LpRelaxation::Infeasible;
            }
        }
        LpRelaxation::Failed
    }
}

impl Relaxation {
    pub fn pivots(&self) -> u64 {
        self.engine.pivots
    }
}

/// One-shot relaxation of a node from the slack basis.
pub fn lp_relaxation_bound(model: &IlpModel, lower: &[i64], upper: &[i64]) -> LpRelaxation {
    match Relaxation::new(model) {
        Some(mut r) => r.bound(lower, upper),
        None => LpRelaxation::Failed,
    }
}

/// Relaxation bound with a fallback provider for nodes where the floating
/// solve fails. The relaxation of the last model seen is kept warm.
pub struct LpBound {
    fallback: Box<dyn BoundProvider>,
    warm: Mutex<Option<Relaxation>>,
}

impl LpBound {
    pub fn new(fallback: Box<dyn BoundProvider>) -> Self {
        LpBound { fallback, warm: Mutex::new(None) }
    }

    fn relax(&self, model: &IlpModel, lower: &[i64], upper: &[i64], cutoff: Option<i128>) -> LpRelaxation {
        let mut warm = self.warm.lock().unwrap_or_else(|e| e.into_inner());
        if warm.as_ref().is_none_or(|r| r.key != ModelKey::of(model)) {
            *warm = Relaxation::new(model);
        }
        match warm.as_mut() {
            Some(r) => r.bound_with_cutoff(lower, upper, cutoff),
            None => LpRelaxation::Failed,
        }
    }
}

impl Default for LpBound {
    fn default() -> Self {
        LpBound::new(Box::new(TrivialBound))
    }
}

impl BoundProvider for LpBound {
    fn name(&self) -> &'static str {
        "lp-relaxation"
    }

    fn reset(&self) {
        *self.warm.lock().unwrap_or_else(|e| e.into_inner()) = None;
        self.fallback.reset();
    }

    fn node_bound(
        &self,
        model: &IlpModel,
        lower: &[i64],
        upper: &[i64],
        cutoff: Option<i128>,
        counters: &mut BoundCounters,
    ) -> NodeBound {
        counters.lp_solves += 1;
        match self.relax(model, lower, upper, cutoff) {
            LpRelaxation::Bound { value, point, reduced } => {
                // The fallback may be tighter on nodes with little LP slack.
                let fallback = match self.fallback.node_bound(model, lower, upper, cutoff, counters) {
                    NodeBound::Infeasible => return NodeBound::Infeasible,
                    NodeBound::Bound { value, .. } => value,
                };
                NodeBound::Bound { value: ceil(value).max(fallback), point, reduced }
            }
            LpRelaxation::Infeasible => NodeBound::Infeasible,
            LpRelaxation::Failed => {
                counters.lp_fallbacks += 1;
                log::debug!("relaxation failed; using {} bound", self.fallback.name());
                self.fallback.node_bound(model, lower, upper, cutoff, counters)
            }
        }
    }
}
