//! Exhaustive schedule search for tiny instances.
//!
//! Works on schedules directly, never on an [`IlpModel`](crate::ilp::IlpModel),
//! so it can serve as an oracle for the model encodings.

use thiserror::Error;

use crate::instance::Instance;
use crate::patterns::PatternCatalog;
use crate::plan::{Cell, Objective, ProductionPlan};

/// Largest admissible product of `|Q(m)| + 2` over all cells.
pub const SEARCH_SPACE_GUARD: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BruteForceError {
    #[error("search space {size} exceeds the brute-force guard {SEARCH_SPACE_GUARD}")]
    Guard { size: u128 },
    #[error("no schedule meets the demand")]
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteForceResult {
    pub plan: ProductionPlan,
    pub value: u64,
}

/// `Π (|Q(m)| + 2)` over every `(m, t)`, saturating at `u128::MAX`.
pub fn search_space(inst: &Instance, cat: &PatternCatalog) -> u128 {
    let mut size: u128 = 1;
    for m in 0..inst.num_molds() {
        let per_cell = cat.compatible(m).len() as u128 + 2;
        for _ in 0..inst.periods() {
            size = size.saturating_mul(per_cell);
        }
    }
    size
}

struct MoldSchedule {
    cells: Vec<Cell>,
    /// Flattened `(type, length)` production.
    produced: Vec<u64>,
    idle: u64,
    last_used: u32,
    occupied: u64,
}

/// All valid schedules of one mold. With `prefix_only`, occupied cells must
/// form a prefix of the horizon.
fn mold_schedules(inst: &Instance, cat: &PatternCatalog, m: usize, offsets: &[usize], prefix_only: bool) -> Vec<MoldSchedule> {
    let periods = inst.periods();
    let width = *offsets.last().unwrap();
    let mut out = Vec::new();
    let mut cells = Vec::with_capacity(periods as usize);
    let mut produced = vec![0u64; width];

    #[allow(clippy::too_many_arguments)]
    fn rec(
        inst: &Instance,
        cat: &PatternCatalog,
        m: usize,
        offsets: &[usize],
        prefix_only: bool,
        t: u32,
        idle_seen: bool,
        cells: &mut Vec<Cell>,
        produced: &mut Vec<u64>,
        idle: u64,
        last_used: u32,
        occupied: u64,
        out: &mut Vec<MoldSchedule>,
    ) {
        let periods = inst.periods();
        if t > periods {
            out.push(MoldSchedule { cells: cells.clone(), produced: produced.clone(), idle, last_used, occupied });
            return;
        }
        cells.push(Cell::Idle);
        rec(inst, cat, m, offsets, prefix_only, t + 1, true, cells, produced, idle, last_used, occupied, out);
        cells.pop();
        if prefix_only && idle_seen {
            return;
        }
        for &i in cat.compatible(m) {
            let e = cat.duration(i);
            if t + e - 1 > periods {
                continue;
            }
            let p = cat.pattern(i);
            let base = offsets[p.beam_type()];
            for (k, &a) in p.counts().iter().enumerate() {
                produced[base + k] += u64::from(a);
            }
            cells.push(Cell::Start(i));
            for _ in 1..e {
                cells.push(Cell::Continue);
            }
            let f = cat.idle_cost(i, m).expect("compatible pattern");
            rec(
                inst,
                cat,
                m,
                offsets,
                prefix_only,
                t + e,
                false,
                cells,
                produced,
                idle + f,
                t + e - 1,
                occupied + u64::from(e),
                out,
            );
            cells.truncate(cells.len() - e as usize);
            for (k, &a) in p.counts().iter().enumerate() {
                produced[base + k] -= u64::from(a);
            }
        }
    }

    rec(inst, cat, m, offsets, prefix_only, 1, false, &mut cells, &mut produced, 0, 0, 0, &mut out);
    out
}

/// Optimal schedule by enumeration. Ties keep the first schedule found in
/// enumeration order.
pub fn brute_force_schedule(
    inst: &Instance,
    cat: &PatternCatalog,
    objective: Objective,
) -> Result<BruteForceResult, BruteForceError> {
    let size = search_space(inst, cat);
    if size > SEARCH_SPACE_GUARD {
        return Err(BruteForceError::Guard { size });
    }
    let mut offsets = vec![0usize];
    for bt in inst.beam_types() {
        offsets.push(offsets.last().unwrap() + bt.num_lengths());
    }
    let demand: Vec<u64> = inst.beam_types().iter().flat_map(|bt| bt.demands().iter().map(|&d| u64::from(d))).collect();
    let prefix_only = objective != Objective::Idle;
    let per_mold: Vec<Vec<MoldSchedule>> =
        (0..inst.num_molds()).map(|m| mold_schedules(inst, cat, m, &offsets, prefix_only)).collect();

    struct Search<'a> {
        per_mold: &'a [Vec<MoldSchedule>],
        demand: &'a [u64],
        objective: Objective,
        choice: Vec<usize>,
        best: Option<(u64, Vec<usize>)>,
    }

    impl Search<'_> {
        fn rec(&mut self, m: usize, produced: &mut Vec<u64>, idle: u64, makespan: u32, occupied: u64) {
            let partial = match self.objective {
                Objective::Idle => idle,
                Objective::Makespan => u64::from(makespan),
                Objective::TotalCompletion => occupied,
            };
            // Every objective is monotone in the molds added so far.
            if self.best.as_ref().is_some_and(|(v, _)| partial >= *v) {
                return;
            }
            if m == self.per_mold.len() {
                if produced.iter().zip(self.demand).all(|(p, d)| p >= d) {
                    self.best = Some((partial, self.choice.clone()));
                }
                return;
            }
            for s in 0..self.per_mold[m].len() {
                let sched = &self.per_mold[m][s];
                for (p, &a) in produced.iter_mut().zip(&sched.produced) {
                    *p += a;
                }
                self.choice.push(s);
                let (idle2, span2, occ2) = (idle + sched.idle, makespan.max(sched.last_used), occupied + sched.occupied);
                self.rec(m + 1, produced, idle2, span2, occ2);
                self.choice.pop();
                let sched = &self.per_mold[m][s];
                for (p, &a) in produced.iter_mut().zip(&sched.produced) {
                    *p -= a;
                }
            }
        }
    }

    let mut search = Search { per_mold: &per_mold, demand: &demand, objective, choice: Vec::new(), best: None };
    let mut produced = vec![0u64; demand.len()];
    search.rec(0, &mut produced, 0, 0, 0);
    let (value, choice) = search.best.ok_or(BruteForceError::Infeasible)?;
    let mut plan = ProductionPlan::for_instance(inst);
    for (m, &s) in choice.iter().enumerate() {
        for (t, &cell) in per_mold[m][s].cells.iter().enumerate() {
            plan.set(m, t as u32 + 1, cell);
        }
    }
    Ok(BruteForceResult { plan, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::BeamType;
    use crate::patterns::{build_catalog, CatalogMode};
    use crate::plan::{metrics, verify};
    use crate::units::{Length, UnitScale};

    fn len(units: u64) -> Length {
        Length::from_base_units(units * 1000)
    }

    #[test]
    fn toy_idle_optimum() {
        let inst = Instance::new(UnitScale::DEFAULT, vec![len(10)], 3, vec![BeamType::new(3, vec![(len(6), 1)])]).unwrap();
        let cat = build_catalog(&inst, CatalogMode::Maximal).unwrap();
        let r = brute_force_schedule(&inst, &cat, Objective::Idle).unwrap();
        assert_eq!(r.value, 12_000);
        assert!(verify(&inst, &cat, &r.plan).is_empty());
        assert_eq!(metrics(&inst, &cat, &r.plan).unwrap().total_idle, 12_000);
    }

    #[test]
    fn zero_demand_gives_empty_plan() {
        let inst = Instance::new(UnitScale::DEFAULT, vec![len(10)], 2, vec![BeamType::new(1, vec![(len(6), 0)])]).unwrap();
        let cat = build_catalog(&inst, CatalogMode::Maximal).unwrap();
        for obj in [Objective::Idle, Objective::Makespan, Objective::TotalCompletion] {
            let r = brute_force_schedule(&inst, &cat, obj).unwrap();
            assert_eq!(r.value, 0);
            assert_eq!(r.plan, ProductionPlan::new(1, 2));
        }
    }

    #[test]
    fn infeasible_and_guard() {
        let inst = Instance::new(UnitScale::DEFAULT, vec![len(10)], 1, vec![BeamType::new(1, vec![(len(6), 2)])]).unwrap();
        let cat = build_catalog(&inst, CatalogMode::Maximal).unwrap();
        assert_eq!(brute_force_schedule(&inst, &cat, Objective::Idle), Err(BruteForceError::Infeasible));

        let big = Instance::new(
            UnitScale::DEFAULT,
            vec![len(10); 4],
            12,
            vec![BeamType::new(1, vec![(len(1), 1), (len(2), 1), (len(3), 1)])],
        )
        .unwrap();
        let cat = build_catalog(&big, CatalogMode::Maximal).unwrap();
        assert!(matches!(brute_force_schedule(&big, &cat, Objective::Idle), Err(BruteForceError::Guard { .. })));
    }

    #[test]
    fn makespan_prefers_parallel_molds() {
        // Two molds, two beams, E = 1: both in period 1.
        let inst = Instance::new(UnitScale::DEFAULT, vec![len(10), len(10)], 3, vec![BeamType::new(1, vec![(len(6), 2)])]).unwrap();
        let cat = build_catalog(&inst, CatalogMode::Maximal).unwrap();
        assert_eq!(brute_force_schedule(&inst, &cat, Objective::Makespan).unwrap().value, 1);
        assert_eq!(brute_force_schedule(&inst, &cat, Objective::TotalCompletion).unwrap().value, 2);
        assert_eq!(brute_force_schedule(&inst, &cat, Objective::Idle).unwrap().value, 8_000);
    }
}
