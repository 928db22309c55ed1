//! Integer programs over a pattern catalog.
//!
//! [`IlpModel`] is a solver-neutral integer linear program: bounded integer
//! variables, sparse linear constraints with integer coefficients, and a
//! minimization objective whose integer coefficients are read in units of
//! `1 / objective_scale`. The builders in this module instantiate the four
//! planning models over a [`PatternCatalog`]:
//!
//! | model | objective |
//! |-------|-----------|
//! | `m1`  | total idle capacity |
//! | `m2`  | number of production periods, with per-mold contiguity |
//! | `am2` | index of the last production period (one general integer) |
//! | `m3`  | number of occupied mold-periods, with per-mold contiguity |
//!
//! Variables `x_i_m_t` mark pattern `i` starting in mold `m` at period `t`;
//! `i = 0` is the continuation marker. `z_t` and `z` are the makespan
//! variables of `m2` and `am2`.

pub mod lp_format;

use std::collections::HashMap;
use std::fmt;

use crate::instance::Instance;
use crate::patterns::PatternCatalog;

pub use lp_format::{export_lp, validate_lp, LpGrammarError, ParsedLp};

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Binary,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: i64,
    pub upper: i64,
}

/// Structured name of a planning-model variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKey {
    /// `x_i^{m,t}`: `pattern` is a catalog index (0 = continuation), `mold`
    /// is 0-based, `period` is 1-based.
    Start { mold: usize, period: u32, pattern: usize },
    /// `z_t` of `m2`.
    PeriodUsed(u32),
    /// `z` of `am2`.
    Makespan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }

    pub fn holds(self, lhs: i128, rhs: i128) -> bool {
        match self {
            Sense::Le => lhs <= rhs,
            Sense::Ge => lhs >= rhs,
            Sense::Eq => lhs == rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, i64)>,
    pub sense: Sense,
    pub rhs: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    M1,
    M2,
    AM2,
    M3,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::M1, ModelKind::M2, ModelKind::AM2, ModelKind::M3];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::M1 => "m1",
            ModelKind::M2 => "m2",
            ModelKind::AM2 => "am2",
            ModelKind::M3 => "m3",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An assignment violating a model, found by exact re-evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssignmentError {
    Length { expected: usize, got: usize },
    Bound { var: String, value: i64 },
    Constraint { name: String, lhs: i128, sense: Sense, rhs: i64 },
}

impl fmt::Display for AssignmentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssignmentError::Length { expected, got } => write!(f, "assignment has {got} values, model has {expected} variables"),
            AssignmentError::Bound { var, value } => write!(f, "{var} = {value} is outside its bounds"),
            AssignmentError::Constraint { name, lhs, sense, rhs } => {
                write!(f, "constraint {name}: {lhs} {} {rhs} does not hold", sense.symbol())
            }
        }
    }
}

impl std::error::Error for AssignmentError {}

#[derive(Debug, Clone, Default)]
pub struct IlpModel {
    name: String,
    kind: Option<ModelKind>,
    variables: Vec<Variable>,
    keys: Vec<Option<VarKey>>,
    var_index: HashMap<VarKey, VarId>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, i64)>,
    objective_scale: u64,
}

impl IlpModel {
    pub fn new(name: impl Into<String>) -> Self {
        IlpModel { name: name.into(), objective_scale: 1, ..Default::default() }
    }

    pub fn add_var(&mut self, key: Option<VarKey>, name: impl Into<String>, kind: VarKind, lower: i64, upper: i64) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0), upper.min(1)),
            VarKind::Integer => (lower, upper),
        };
        let id = self.variables.len();
        self.variables.push(Variable { name: name.into(), kind, lower, upper });
        self.keys.push(key);
        if let Some(key) = key {
            self.var_index.insert(key, id);
        }
        id
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, terms: Vec<(VarId, i64)>, sense: Sense, rhs: i64) {
        let terms = terms.into_iter().filter(|&(_, a)| a != 0).collect();
        self.constraints.push(Constraint { name: name.into(), terms, sense, rhs });
    }

    /// Sets the objective; coefficient `a` stands for `a / scale`.
    pub fn set_objective(&mut self, terms: Vec<(VarId, i64)>, scale: u64) {
        self.objective = terms.into_iter().filter(|&(_, a)| a != 0).collect();
        self.objective_scale = scale.max(1);
    }

    #[inline]
    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn kind(&self) -> Option<ModelKind> {
        self.kind
    }

    #[inline]
    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    #[inline]
    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    #[inline]
    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    #[inline]
    pub fn objective(&self) -> &[(VarId, i64)] {
        &self.objective
    }

    #[inline]
    pub fn objective_scale(&self) -> u64 {
        self.objective_scale
    }

    #[inline]
    pub fn key(&self, var: VarId) -> Option<VarKey> {
        self.keys[var]
    }

    #[inline]
    pub fn var(&self, key: VarKey) -> Option<VarId> {
        self.var_index.get(&key).copied()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.constraints.iter().map(|c| c.terms.len()).sum()
    }

    /// Objective value of an assignment, in objective units.
    pub fn evaluate(&self, x: &[i64]) -> i128 {
        self.objective.iter().map(|&(j, a)| i128::from(a) * i128::from(x[j])).sum()
    }

    /// Checks bounds and every constraint in exact integer arithmetic.
    pub fn check_assignment(&self, x: &[i64]) -> Result<(), AssignmentError> {
        if x.len() != self.variables.len() {
            return Err(AssignmentError::Length { expected: self.variables.len(), got: x.len() });
        }
        for (v, &value) in self.variables.iter().zip(x) {
            if value < v.lower || value > v.upper {
                return Err(AssignmentError::Bound { var: v.name.clone(), value });
            }
        }
        for c in &self.constraints {
            let lhs: i128 = c.terms.iter().map(|&(j, a)| i128::from(a) * i128::from(x[j])).sum();
            if !c.sense.holds(lhs, i128::from(c.rhs)) {
                return Err(AssignmentError::Constraint { name: c.name.clone(), lhs, sense: c.sense, rhs: c.rhs });
            }
        }
        Ok(())
    }

    /// One-line structural summary.
    pub fn stats_line(&self) -> String {
        format!(
            "model={} variables={} constraints={} nonzeros={}",
            self.name,
            self.num_vars(),
            self.constraints.len(),
            self.num_nonzeros()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Omit start variables whose cure would run past the horizon.
    pub prune_horizon: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { prune_horizon: true }
    }
}

pub fn build_m1(inst: &Instance, cat: &PatternCatalog) -> IlpModel {
    build_model(inst, cat, ModelKind::M1, BuildOptions::default())
}

pub fn build_m2(inst: &Instance, cat: &PatternCatalog) -> IlpModel {
    build_model(inst, cat, ModelKind::M2, BuildOptions::default())
}

pub fn build_am2(inst: &Instance, cat: &PatternCatalog) -> IlpModel {
    build_model(inst, cat, ModelKind::AM2, BuildOptions::default())
}

pub fn build_m3(inst: &Instance, cat: &PatternCatalog) -> IlpModel {
    build_model(inst, cat, ModelKind::M3, BuildOptions::default())
}

pub fn build_model(inst: &Instance, cat: &PatternCatalog, kind: ModelKind, options: BuildOptions) -> IlpModel {
    let periods = inst.periods();
    let molds = inst.num_molds();
    let r = inst.max_curing_time();
    let mut model = IlpModel::new(kind.name());
    model.kind = Some(kind);

    // Start variables in (mold, period, pattern) order, continuation first.
    let last_start = |i: usize| periods + 1 - cat.duration(i);
    for m in 0..molds {
        for t in 1..=periods {
            model.add_var(
                Some(VarKey::Start { mold: m, period: t, pattern: 0 }),
                format!("x_0_{}_{t}", m + 1),
                VarKind::Binary,
                0,
                1,
            );
            for &i in cat.compatible(m) {
                if options.prune_horizon && t > last_start(i) {
                    continue;
                }
                model.add_var(
                    Some(VarKey::Start { mold: m, period: t, pattern: i }),
                    format!("x_{i}_{}_{t}", m + 1),
                    VarKind::Binary,
                    0,
                    1,
                );
            }
        }
    }
    let x = |model: &IlpModel, i: usize, m: usize, t: u32| model.var(VarKey::Start { mold: m, period: t, pattern: i });
    // Every variable at cell (m, t), continuation included.
    let cell = |model: &IlpModel, m: usize, t: u32| -> Vec<VarId> {
        std::iter::once(0)
            .chain(cat.compatible(m).iter().copied())
            .filter_map(|i| x(model, i, m, t))
            .collect()
    };

    // At most one pattern per mold and period.
    for m in 0..molds {
        for t in 1..=periods {
            let terms = cell(&model, m, t).into_iter().map(|v| (v, 1)).collect();
            model.add_constraint(format!("one_{}_{t}", m + 1), terms, Sense::Le, 1);
        }
    }

    // Demand, counting only starts that finish within the horizon.
    for (c, bt) in inst.beam_types().iter().enumerate() {
        for (k, &demand) in bt.demands().iter().enumerate() {
            if demand == 0 {
                continue;
            }
            let mut terms = Vec::new();
            for m in 0..molds {
                for &i in cat.compatible(m) {
                    let p = cat.pattern(i);
                    if p.beam_type() != c || p.count(k) == 0 || cat.duration(i) > periods {
                        continue;
                    }
                    for t in 1..=last_start(i) {
                        if let Some(v) = x(&model, i, m, t) {
                            terms.push((v, i64::from(p.count(k))));
                        }
                    }
                }
            }
            model.add_constraint(format!("dem_{}_{}", c + 1, k + 1), terms, Sense::Ge, i64::from(demand));
        }
    }

    // A start occupies its mold with continuations for E - 1 periods.
    for m in 0..molds {
        for &i in cat.compatible(m) {
            let e = cat.duration(i);
            if e < 2 || e > periods {
                continue;
            }
            for t in 1..=last_start(i) {
                let Some(start) = x(&model, i, m, t) else { continue };
                let mut terms = vec![(start, i64::from(e - 1))];
                for alpha in 1..e {
                    terms.push((x(&model, 0, m, t + alpha).expect("continuation var"), -1));
                }
                model.add_constraint(format!("seq_{i}_{}_{t}", m + 1), terms, Sense::Le, 0);
            }
        }
    }

    // No continuation in the first period.
    for m in 0..molds {
        let v = x(&model, 0, m, 1).expect("continuation var");
        model.add_constraint(format!("init_{}", m + 1), vec![(v, 1)], Sense::Eq, 0);
    }

    // A continuation needs an unfinished start before it.
    for m in 0..molds {
        for t in 2..=periods {
            let mut terms = vec![(x(&model, 0, m, t).expect("continuation var"), 1)];
            for beta in 2..=r {
                if t < beta {
                    break;
                }
                let origin = t - beta + 1;
                for j in beta..=r {
                    for &i in cat.by_curing(j) {
                        if !cat.is_compatible(i, m) {
                            continue;
                        }
                        if let Some(v) = x(&model, i, m, origin) {
                            terms.push((v, -1));
                        }
                    }
                }
            }
            model.add_constraint(format!("cover_{}_{t}", m + 1), terms, Sense::Le, 0);
        }
    }

    let contiguity = |model: &mut IlpModel| {
        for m in 0..molds {
            for t in 1..periods {
                let mut terms: Vec<(VarId, i64)> = cell(model, m, t).into_iter().map(|v| (v, 1)).collect();
                terms.extend(cell(model, m, t + 1).into_iter().map(|v| (v, -1)));
                model.add_constraint(format!("contig_{}_{t}", m + 1), terms, Sense::Ge, 0);
            }
        }
    };

    match kind {
        ModelKind::M1 => {
            let mut objective = Vec::new();
            for v in 0..model.num_vars() {
                if let Some(VarKey::Start { mold, pattern, .. }) = model.key(v) {
                    if pattern > 0 {
                        let f = cat.idle_cost(pattern, mold).expect("compatible pattern has an idle cost");
                        objective.push((v, f as i64));
                    }
                }
            }
            model.set_objective(objective, inst.unit_scale().factor());
        }
        ModelKind::M2 => {
            let used: Vec<VarId> = (1..=periods)
                .map(|t| model.add_var(Some(VarKey::PeriodUsed(t)), format!("z_{t}"), VarKind::Binary, 0, 1))
                .collect();
            for t in 1..=periods {
                let mut terms = vec![(used[t as usize - 1], molds as i64)];
                for m in 0..molds {
                    terms.extend(cell(&model, m, t).into_iter().map(|v| (v, -1)));
                }
                model.add_constraint(format!("use_{t}"), terms, Sense::Ge, 0);
            }
            contiguity(&mut model);
            model.set_objective(used.into_iter().map(|v| (v, 1)).collect(), 1);
        }
        ModelKind::AM2 => {
            let z = model.add_var(Some(VarKey::Makespan), "z", VarKind::Integer, 1, i64::from(periods));
            for m in 0..molds {
                for t in 1..=periods {
                    let mut terms = vec![(z, 1)];
                    terms.extend(cell(&model, m, t).into_iter().map(|v| (v, -i64::from(t))));
                    model.add_constraint(format!("last_{}_{t}", m + 1), terms, Sense::Ge, 0);
                }
            }
            model.set_objective(vec![(z, 1)], 1);
        }
        ModelKind::M3 => {
            contiguity(&mut model);
            let all = (0..model.num_vars()).filter(|&v| matches!(model.key(v), Some(VarKey::Start { .. })));
            let objective = all.map(|v| (v, 1)).collect();
            model.set_objective(objective, 1);
        }
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{parse_instance, BeamType};
    use crate::patterns::{build_catalog, CatalogMode};
    use crate::units::{Length, UnitScale};

    pub(crate) fn toy() -> Instance {
        parse_instance("molds = [10.0]\nperiods = 3\n[[beam_types]]\ncuring_time = 3\nlengths = [6.0]\ndemands = [1]\n").unwrap()
    }

    #[test]
    fn toy_m1_structure() {
        let inst = toy();
        let cat = build_catalog(&inst, CatalogMode::Maximal).unwrap();
        let model = build_m1(&inst, &cat);
        // x_1_1_1 plus three continuations.
        assert_eq!(model.num_vars(), 4);
        assert!(model.var(VarKey::Start { mold: 0, period: 1, pattern: 1 }).is_some());
        assert!(model.var(VarKey::Start { mold: 0, period: 2, pattern: 1 }).is_none());
        assert_eq!(model.objective(), &[(model.var(VarKey::Start { mold: 0, period: 1, pattern: 1 }).unwrap(), 12_000)]);
        assert_eq!(model.objective_scale(), 1000);
        // The forced schedule satisfies every constraint.
        let mut x = vec![0; 4];
        for t in 2..=3 {
            x[model.var(VarKey::Start { mold: 0, period: t, pattern: 0 }).unwrap()] = 1;
        }
        x[model.var(VarKey::Start { mold: 0, period: 1, pattern: 1 }).unwrap()] = 1;
        assert_eq!(model.check_assignment(&x), Ok(()));
        assert_eq!(model.evaluate(&x), 12_000);
        // Dropping a continuation breaks the sequencing constraint.
        x[model.var(VarKey::Start { mold: 0, period: 3, pattern: 0 }).unwrap()] = 0;
        assert!(matches!(model.check_assignment(&x), Err(AssignmentError::Constraint { name, .. }) if name == "seq_1_1_1"));
    }

    #[test]
    fn zero_demand_all_zero_is_feasible() {
        let inst = Instance::new(
            UnitScale::DEFAULT,
            vec![Length::from_base_units(10_000)],
            3,
            vec![BeamType::new(2, vec![(Length::from_base_units(6_000), 0)])],
        )
        .unwrap();
        let cat = build_catalog(&inst, CatalogMode::Maximal).unwrap();
        for kind in [ModelKind::M1, ModelKind::M2, ModelKind::M3] {
            let model = build_model(&inst, &cat, kind, BuildOptions::default());
            let x = vec![0; model.num_vars()];
            assert_eq!(model.check_assignment(&x), Ok(()));
            assert_eq!(model.evaluate(&x), 0);
        }
        let am2 = build_am2(&inst, &cat);
        let mut x = vec![0; am2.num_vars()];
        assert!(am2.check_assignment(&x).is_err());
        x[am2.var(VarKey::Makespan).unwrap()] = 1;
        assert_eq!(am2.check_assignment(&x), Ok(()));
    }

    #[test]
    fn unpruned_model_keeps_late_starts() {
        let inst = toy();
        let cat = build_catalog(&inst, CatalogMode::Maximal).unwrap();
        let model = build_model(&inst, &cat, ModelKind::M1, BuildOptions { prune_horizon: false });
        assert_eq!(model.num_vars(), 6);
        // Late starts appear in neither demand nor sequencing rows.
        let late = model.var(VarKey::Start { mold: 0, period: 3, pattern: 1 }).unwrap();
        for c in model.constraints() {
            if c.name.starts_with("dem") || c.name.starts_with("seq") {
                assert!(c.terms.iter().all(|&(v, _)| v != late));
            }
        }
    }

    #[test]
    fn model_kinds_round_trip_names() {
        for k in ModelKind::ALL {
            assert_eq!(ModelKind::from_name(k.name()), Some(k));
        }
        assert_eq!(ModelKind::from_name("m4"), None);
    }
}
