//! Constructive priority rules and the size-reduction heuristic.
//!
//! A priority rule walks the horizon period by period. Whenever a mold is
//! free it picks a beam type with open demand by curing time and packs
//! beams of that type by length, never exceeding the open demand. Phase 2
//! then tops every cast pattern up to a maximal one, largest lengths first.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::ilp::{build_model, BuildOptions, IlpModel, ModelKind};
use crate::instance::Instance;
use crate::patterns::{select_qc_maximal, Pattern, PatternCatalog, PatternError};
use crate::plan::{decode, DecodeError, ProductionPlan};
use crate::solver::{solve, BoundKind, IlpSolution, SolveLimits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CuringPriority {
    ShortestFirst,
    LongestFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LengthPriority {
    ShortestFirst,
    LargestFirst,
    /// Shortest, largest, second shortest, second largest, ...
    Alternate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RuleSpec {
    pub curing: CuringPriority,
    pub length: LengthPriority,
}

impl RuleSpec {
    pub const ALL: [RuleSpec; 6] = [
        RuleSpec { curing: CuringPriority::ShortestFirst, length: LengthPriority::ShortestFirst },
        RuleSpec { curing: CuringPriority::ShortestFirst, length: LengthPriority::LargestFirst },
        RuleSpec { curing: CuringPriority::ShortestFirst, length: LengthPriority::Alternate },
        RuleSpec { curing: CuringPriority::LongestFirst, length: LengthPriority::ShortestFirst },
        RuleSpec { curing: CuringPriority::LongestFirst, length: LengthPriority::LargestFirst },
        RuleSpec { curing: CuringPriority::LongestFirst, length: LengthPriority::Alternate },
    ];

    pub fn name(self) -> &'static str {
        use CuringPriority as C;
        use LengthPriority as L;
        match (self.curing, self.length) {
            (C::ShortestFirst, L::ShortestFirst) => "sctsl",
            (C::ShortestFirst, L::LargestFirst) => "sctll",
            (C::ShortestFirst, L::Alternate) => "sctal",
            (C::LongestFirst, L::ShortestFirst) => "lctsl",
            (C::LongestFirst, L::LargestFirst) => "lctll",
            (C::LongestFirst, L::Alternate) => "lctal",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let lower = name.to_ascii_lowercase();
        RuleSpec::ALL.into_iter().find(|r| r.name() == lower)
    }
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A plan together with the catalog its start indices refer to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogPlan {
    pub catalog: PatternCatalog,
    pub plan: ProductionPlan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleRun {
    pub rule: RuleSpec,
    /// Demand met exactly, no surplus.
    pub phase1: CatalogPlan,
    /// Every pattern of phase 1 filled up to a maximal pattern.
    pub phase2: CatalogPlan,
    /// Beam batches placed across both phases.
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeuristicError {
    #[error("rule {rule}: {open} demanded beams remain after the last period")]
    HorizonExhausted { rule: RuleSpec, open: u64 },
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Visiting order over `q` lengths sorted ascending, as positions in that list.
fn length_order(priority: LengthPriority, q: usize) -> Vec<usize> {
    match priority {
        LengthPriority::ShortestFirst => (0..q).collect(),
        LengthPriority::LargestFirst => (0..q).rev().collect(),
        LengthPriority::Alternate => {
            let (mut lo, mut hi) = (0usize, q);
            let mut out = Vec::with_capacity(q);
            while lo < hi {
                out.push(lo);
                lo += 1;
                if lo < hi {
                    hi -= 1;
                    out.push(hi);
                }
            }
            out
        }
    }
}

fn build_plan(inst: &Instance, starts: &[(usize, u32, Pattern)]) -> Result<CatalogPlan, HeuristicError> {
    let distinct: BTreeSet<Pattern> = starts.iter().map(|(_, _, p)| p.clone()).collect();
    let catalog = PatternCatalog::from_patterns(inst, distinct)?;
    let mut plan = ProductionPlan::for_instance(inst);
    for (m, t, p) in starts {
        let i = catalog.index_of(p).expect("pattern was added to the catalog");
        plan.place(*m, *t, i, catalog.duration(i));
    }
    Ok(CatalogPlan { catalog, plan })
}

/// Phase 1 and phase 2 of one rule.
pub fn run_priority_rule(inst: &Instance, rule: RuleSpec) -> Result<RuleRun, HeuristicError> {
    let mut steps = 0u64;
    let phase1_starts = phase_one(inst, rule, &mut steps)?;
    let phase1 = build_plan(inst, &phase1_starts)?;
    let phase2_starts: Vec<_> = phase1_starts
        .iter()
        .map(|(m, t, p)| (*m, *t, fill_pattern(inst, *m, p, &mut steps)))
        .collect();
    let phase2 = build_plan(inst, &phase2_starts)?;
    Ok(RuleRun { rule, phase1, phase2, steps })
}

fn phase_one(inst: &Instance, rule: RuleSpec, steps: &mut u64) -> Result<Vec<(usize, u32, Pattern)>, HeuristicError> {
    let periods = inst.periods();
    let mut open: Vec<Vec<u32>> = inst.beam_types().iter().map(|bt| bt.demands().to_vec()).collect();
    let mut type_order: Vec<usize> = (0..inst.num_types()).collect();
    // Stable sort keeps lower type indices first among equal curing times.
    match rule.curing {
        CuringPriority::ShortestFirst => type_order.sort_by_key(|&c| inst.beam_type(c).curing_time()),
        CuringPriority::LongestFirst => type_order.sort_by_key(|&c| std::cmp::Reverse(inst.beam_type(c).curing_time())),
    }
    let mut busy_until = vec![0u32; inst.num_molds()];
    let mut starts = Vec::new();

    for t in 1..=periods {
        for (m, busy) in busy_until.iter_mut().enumerate() {
            if *busy >= t {
                continue;
            }
            let capacity = inst.mold(m).base_units();
            for &c in &type_order {
                let bt = inst.beam_type(c);
                if open[c].iter().all(|&d| d == 0) || t + bt.curing_time() - 1 > periods {
                    continue;
                }
                let mut remaining = capacity;
                let mut counts = vec![0u32; bt.num_lengths()];
                let pending: Vec<usize> = (0..bt.num_lengths()).filter(|&k| open[c][k] > 0).collect();
                for pos in length_order(rule.length, pending.len()) {
                    let k = pending[pos];
                    let len = bt.lengths()[k].base_units();
                    if len > remaining {
                        continue;
                    }
                    let n = (remaining / len).min(u64::from(open[c][k])) as u32;
                    counts[k] = n;
                    open[c][k] -= n;
                    remaining -= u64::from(n) * len;
                    *steps += 1;
                }
                if counts.iter().any(|&a| a > 0) {
                    *busy = t + bt.curing_time() - 1;
                    starts.push((m, t, Pattern::new(c, counts)));
                    break;
                }
            }
        }
    }
    let left: u64 = open.iter().flatten().map(|&d| u64::from(d)).sum();
    if left > 0 {
        return Err(HeuristicError::HorizonExhausted { rule, open: left });
    }
    Ok(starts)
}

/// Adds beams of the pattern's type, largest length first, until none fits.
fn fill_pattern(inst: &Instance, m: usize, p: &Pattern, steps: &mut u64) -> Pattern {
    let bt = inst.beam_type(p.beam_type());
    let mut counts = p.counts().to_vec();
    let used: u64 = counts.iter().zip(bt.lengths()).map(|(&a, l)| u64::from(a) * l.base_units()).sum();
    let mut remaining = inst.mold(m).base_units() - used;
    for k in (0..bt.num_lengths()).rev() {
        let len = bt.lengths()[k].base_units();
        if len <= remaining {
            let n = remaining / len;
            counts[k] += n as u32;
            remaining -= n * len;
            *steps += 1;
        }
    }
    Pattern::new(p.beam_type(), counts)
}

/// Phase 2 on an arbitrary plan: every start is replaced by its filled-up
/// pattern. Start periods and beam types are unchanged.
pub fn maximalize(inst: &Instance, cat: &PatternCatalog, plan: &ProductionPlan) -> Result<CatalogPlan, HeuristicError> {
    let mut steps = 0;
    let starts: Vec<_> = plan
        .starts()
        .into_iter()
        .map(|(m, t, i)| (m, t, fill_pattern(inst, m, cat.pattern(i), &mut steps)))
        .collect();
    build_plan(inst, &starts)
}

/// Result of solving a model restricted to the qc-maximal catalog. The
/// solution bounds the full problem from above only when it is feasible.
#[derive(Debug, Clone)]
pub struct SrhRun {
    pub catalog: PatternCatalog,
    pub model: IlpModel,
    pub solution: IlpSolution,
    pub plan: Option<ProductionPlan>,
}

pub fn run_srh(inst: &Instance, kind: ModelKind, limits: &SolveLimits, bound: BoundKind) -> Result<SrhRun, HeuristicError> {
    let catalog = select_qc_maximal(inst)?;
    let model = build_model(inst, &catalog, kind, BuildOptions::default());
    let provider = bound.provider(inst, &catalog, &model);
    let solution = solve(&model, limits, provider.as_ref());
    let plan = match &solution.assignment {
        Some(x) => Some(decode(inst, &model, x)?),
        None => None,
    };
    Ok(SrhRun { catalog, model, solution, plan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::BeamType;
    use crate::patterns::is_maximal;
    use crate::plan::{metrics, verify, Cell};
    use crate::solver::SolveStatus;
    use crate::units::{Length, UnitScale};

    fn len(tenths: u64) -> Length {
        Length::from_base_units(tenths * 100)
    }

    #[test]
    fn names_in_order() {
        let names: Vec<_> = RuleSpec::ALL.iter().map(|r| r.name()).collect();
        assert_eq!(names, ["sctsl", "sctll", "sctal", "lctsl", "lctll", "lctal"]);
        assert_eq!(RuleSpec::from_name("LCTAL"), Some(RuleSpec::ALL[5]));
    }

    #[test]
    fn alternate_order() {
        assert_eq!(length_order(LengthPriority::Alternate, 5), vec![0, 4, 1, 3, 2]);
        assert_eq!(length_order(LengthPriority::Alternate, 2), vec![0, 1]);
    }

    #[test]
    fn alternate_skips_exhausted_lengths() {
        // Lengths 1.0 (no demand), 2.0, 3.0, 4.0 in a 7.0 mold: 2.0 first, then 4.0.
        let inst = Instance::new(
            UnitScale::DEFAULT,
            vec![len(70)],
            2,
            vec![BeamType::new(1, vec![(len(10), 0), (len(20), 1), (len(30), 1), (len(40), 1)])],
        )
        .unwrap();
        let run = run_priority_rule(&inst, RuleSpec::from_name("sctal").unwrap()).unwrap();
        let Cell::Start(i) = run.phase1.plan.cell(0, 1) else { panic!() };
        assert_eq!(run.phase1.catalog.pattern(i).counts(), &[0, 1, 0, 1]);
    }

    #[test]
    fn two_molds_share_demand() {
        let inst =
            Instance::new(UnitScale::DEFAULT, vec![len(100), len(100)], 1, vec![BeamType::new(1, vec![(len(60), 2)])]).unwrap();
        let run = run_priority_rule(&inst, RuleSpec::ALL[0]).unwrap();
        let p = &run.phase1.plan;
        assert_eq!((p.cell(0, 1), p.cell(1, 1)), (Cell::Start(1), Cell::Start(1)));
        assert_eq!(run.phase1.catalog.pattern(1).counts(), &[1]);
    }

    #[test]
    fn curing_priority_picks_the_type() {
        let inst = Instance::new(
            UnitScale::DEFAULT,
            vec![len(100)],
            3,
            vec![BeamType::new(1, vec![(len(50), 1)]), BeamType::new(2, vec![(len(50), 1)])],
        )
        .unwrap();
        let first_type = |rule: &str| {
            let run = run_priority_rule(&inst, RuleSpec::from_name(rule).unwrap()).unwrap();
            let Cell::Start(i) = run.phase1.plan.cell(0, 1) else { panic!() };
            run.phase1.catalog.pattern(i).beam_type()
        };
        assert_eq!(first_type("sctsl"), 0);
        assert_eq!(first_type("lctsl"), 1);
    }

    #[test]
    fn zero_demand_idle_plan() {
        let inst = Instance::new(UnitScale::DEFAULT, vec![len(100)], 2, vec![BeamType::new(1, vec![(len(60), 0)])]).unwrap();
        for rule in RuleSpec::ALL {
            let run = run_priority_rule(&inst, rule).unwrap();
            assert_eq!(run.phase2.plan, ProductionPlan::new(1, 2));
        }
    }

    #[test]
    fn phase_two_fills_largest_first() {
        let inst =
            Instance::new(UnitScale::DEFAULT, vec![len(100)], 1, vec![BeamType::new(1, vec![(len(30), 0), (len(60), 1)])]).unwrap();
        let run = run_priority_rule(&inst, RuleSpec::ALL[0]).unwrap();
        assert_eq!(run.phase1.catalog.pattern(1).counts(), &[0, 1]);
        assert_eq!(run.phase2.catalog.pattern(1).counts(), &[1, 1]);
        let m = metrics(&inst, &run.phase2.catalog, &run.phase2.plan).unwrap();
        assert_eq!(m.surplus, vec![vec![1, 0]]);
        // Fixed point.
        let again = maximalize(&inst, &run.phase2.catalog, &run.phase2.plan).unwrap();
        assert_eq!(again, run.phase2);
    }

    #[test]
    fn exact_fill_is_unchanged() {
        let inst = Instance::new(UnitScale::DEFAULT, vec![len(100)], 1, vec![BeamType::new(1, vec![(len(50), 2)])]).unwrap();
        let run = run_priority_rule(&inst, RuleSpec::ALL[1]).unwrap();
        assert_eq!(run.phase1.catalog.pattern(1), run.phase2.catalog.pattern(1));
    }

    #[test]
    fn horizon_exhaustion() {
        let inst = Instance::new(UnitScale::DEFAULT, vec![len(100)], 1, vec![BeamType::new(1, vec![(len(60), 2)])]).unwrap();
        let err = run_priority_rule(&inst, RuleSpec::ALL[0]).unwrap_err();
        assert!(matches!(err, HeuristicError::HorizonExhausted { open: 1, .. }));
    }

    #[test]
    fn short_mold_falls_through_to_next_type() {
        // Mold 1 (5.0) fits only type 2; type 1 needs the 10.0 mold.
        let inst = Instance::new(
            UnitScale::DEFAULT,
            vec![len(50), len(100)],
            1,
            vec![BeamType::new(1, vec![(len(80), 1)]), BeamType::new(1, vec![(len(40), 1)])],
        )
        .unwrap();
        let run = run_priority_rule(&inst, RuleSpec::ALL[0]).unwrap();
        let cat = &run.phase1.catalog;
        let types: Vec<_> = run.phase1.plan.starts().iter().map(|&(m, _, i)| (m, cat.pattern(i).beam_type())).collect();
        assert_eq!(types, vec![(0, 1), (1, 0)]);
        assert!(verify(&inst, &run.phase2.catalog, &run.phase2.plan).is_empty());
        for (m, _, i) in run.phase2.plan.starts() {
            assert!(is_maximal(run.phase2.catalog.pattern(i), inst.mold(m), &inst));
        }
    }

    #[test]
    fn srh_adversarial_toy_is_reduced_infeasible() {
        // Three 3.0 beams in one period need pattern (3, 0); the full model has it.
        let inst =
            Instance::new(UnitScale::DEFAULT, vec![len(100)], 1, vec![BeamType::new(1, vec![(len(30), 3), (len(40), 0)])]).unwrap();
        let srh = run_srh(&inst, ModelKind::M1, &SolveLimits::default(), BoundKind::LpRelaxation).unwrap();
        assert_eq!(srh.solution.status, SolveStatus::Infeasible);
        assert!(srh.plan.is_none());
        let full = crate::patterns::build_catalog(&inst, crate::patterns::CatalogMode::Maximal).unwrap();
        let oracle = crate::solver::brute_force_schedule(&inst, &full, crate::plan::Objective::Idle).unwrap();
        assert_eq!(oracle.value, 1000);
    }

    #[test]
    fn srh_equals_exact_when_catalogs_agree() {
        let inst = Instance::new(UnitScale::DEFAULT, vec![len(100)], 3, vec![BeamType::new(3, vec![(len(60), 1)])]).unwrap();
        let srh = run_srh(&inst, ModelKind::M1, &SolveLimits::default(), BoundKind::DemandLb).unwrap();
        assert_eq!(srh.solution.objective_value, Some(12_000));
    }

    #[test]
    fn rule_plans_encode_as_model_incumbents() {
        use crate::generator::{suite, Preset};
        use crate::ilp::{build_model, BuildOptions};
        use crate::patterns::{build_catalog, CatalogMode};
        use crate::plan::encode;
        for entry in suite(Preset::Small, 7, 10).unwrap() {
            let inst = &entry.instance;
            let cat = build_catalog(inst, CatalogMode::Maximal).unwrap();
            let Ok(run) = run_priority_rule(inst, RuleSpec::ALL[0]) else { continue };
            let m = metrics(inst, &run.phase2.catalog, &run.phase2.plan).unwrap();
            for kind in ModelKind::ALL {
                let model = build_model(inst, &cat, kind, BuildOptions::default());
                let x = encode(inst, &model, &cat, &run.phase2.catalog, &run.phase2.plan).unwrap();
                assert!(model.check_assignment(&x).is_ok(), "{} {}", entry.name, kind.name());
                assert_eq!(model.evaluate(&x), i128::from(m.model_objective(kind)));
            }
        }
    }
}
