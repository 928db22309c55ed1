//! Production plans: a mold-by-period grid of starts, continuations and idle
//! cells, with a verifier that reads only the instance and the catalog.

use std::fmt;

use thiserror::Error;

use crate::ilp::{IlpModel, ModelKind, VarKey};
use crate::instance::Instance;
use crate::patterns::{build_catalog, CatalogMode, Pattern, PatternCatalog, PatternError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    /// Catalog index of the pattern cast in this period.
    Start(usize),
    Continue,
    Idle,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Start(i) => write!(f, "S{i}"),
            Cell::Continue => f.write_str("C"),
            Cell::Idle => f.write_str("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProductionPlan {
    molds: usize,
    periods: u32,
    cells: Vec<Cell>,
}

impl ProductionPlan {
    pub fn new(molds: usize, periods: u32) -> Self {
        ProductionPlan { molds, periods, cells: vec![Cell::Idle; molds * periods as usize] }
    }

    pub fn for_instance(inst: &Instance) -> Self {
        Self::new(inst.num_molds(), inst.periods())
    }

    #[inline]
    pub fn molds(&self) -> usize {
        self.molds
    }

    #[inline]
    pub fn periods(&self) -> u32 {
        self.periods
    }

    fn index(&self, m: usize, t: u32) -> usize {
        assert!(m < self.molds && (1..=self.periods).contains(&t), "cell ({m}, {t}) outside the plan");
        m * self.periods as usize + (t - 1) as usize
    }

    /// `m` is 0-based, `t` is 1-based.
    pub fn cell(&self, m: usize, t: u32) -> Cell {
        self.cells[self.index(m, t)]
    }

    pub fn set(&mut self, m: usize, t: u32, cell: Cell) {
        let idx = self.index(m, t);
        self.cells[idx] = cell;
    }

    /// Writes `Start(pattern)` at `t` followed by continuations, clipped to the horizon.
    pub fn place(&mut self, m: usize, t: u32, pattern: usize, duration: u32) {
        self.set(m, t, Cell::Start(pattern));
        for s in t + 1..(t + duration).min(self.periods + 1) {
            self.set(m, s, Cell::Continue);
        }
    }

    pub fn row(&self, m: usize) -> &[Cell] {
        let p = self.periods as usize;
        &self.cells[m * p..(m + 1) * p]
    }

    /// `(mold, period, pattern)` of every start, in grid order.
    pub fn starts(&self) -> Vec<(usize, u32, usize)> {
        let mut out = Vec::new();
        for m in 0..self.molds {
            for t in 1..=self.periods {
                if let Cell::Start(i) = self.cell(m, t) {
                    out.push((m, t, i));
                }
            }
        }
        out
    }

    /// Grid lines, one per mold, tokens separated by single spaces.
    pub fn render_grid(&self) -> String {
        let mut out = String::new();
        for m in 0..self.molds {
            let line: Vec<String> = self.row(m).iter().map(Cell::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanViolation {
    #[error("plan is {molds}x{periods} but the instance has {expected_molds} molds and {expected_periods} periods")]
    Shape { molds: usize, periods: u32, expected_molds: usize, expected_periods: u32 },
    #[error("cell ({mold}, {period}): continuation without an unfinished start before it")]
    OrphanContinuation { mold: usize, period: u32 },
    #[error("cell ({mold}, {period}): pattern {pattern} is not in the catalog")]
    UnknownPattern { mold: usize, period: u32, pattern: usize },
    #[error("cell ({mold}, {period}): pattern {pattern} does not fit mold {mold}")]
    Incompatible { mold: usize, period: u32, pattern: usize },
    #[error("cell ({mold}, {period}): pattern {pattern} needs {expected} periods but its cure runs past the horizon")]
    PastHorizon { mold: usize, period: u32, pattern: usize, expected: u32 },
    #[error("cell ({mold}, {period}): pattern {pattern} needs a run of {expected} periods but occupies {found}")]
    ShortRun { mold: usize, period: u32, pattern: usize, expected: u32, found: u32 },
    #[error("type {beam_type} length {length_index}: produced {produced}, demand {demand}")]
    Shortfall { beam_type: usize, length_index: usize, produced: u64, demand: u32 },
}

/// Beams produced per `(type, length)` by starts that finish within the horizon.
fn production(inst: &Instance, cat: &PatternCatalog, plan: &ProductionPlan) -> Vec<Vec<u64>> {
    let mut produced: Vec<Vec<u64>> = inst.beam_types().iter().map(|bt| vec![0; bt.num_lengths()]).collect();
    for (_, t, i) in plan.starts() {
        if i == 0 || i > cat.len() || t + cat.duration(i) - 1 > inst.periods() {
            continue;
        }
        let p = cat.pattern(i);
        for (k, &a) in p.counts().iter().enumerate() {
            produced[p.beam_type()][k] += u64::from(a);
        }
    }
    produced
}

/// Every way the plan departs from a feasible schedule. Mold and period
/// numbers in the violations are 1-based.
pub fn verify(inst: &Instance, cat: &PatternCatalog, plan: &ProductionPlan) -> Vec<PlanViolation> {
    let mut out = Vec::new();
    if plan.molds() != inst.num_molds() || plan.periods() != inst.periods() {
        out.push(PlanViolation::Shape {
            molds: plan.molds(),
            periods: plan.periods(),
            expected_molds: inst.num_molds(),
            expected_periods: inst.periods(),
        });
        return out;
    }
    let periods = plan.periods();
    for m in 0..plan.molds() {
        let mold = m + 1;
        let mut t = 1;
        while t <= periods {
            match plan.cell(m, t) {
                Cell::Idle => t += 1,
                Cell::Continue => {
                    out.push(PlanViolation::OrphanContinuation { mold, period: t });
                    t += 1;
                }
                Cell::Start(i) => {
                    if i == 0 || i > cat.len() {
                        out.push(PlanViolation::UnknownPattern { mold, period: t, pattern: i });
                        t += 1;
                        continue;
                    }
                    if !cat.is_compatible(i, m) {
                        out.push(PlanViolation::Incompatible { mold, period: t, pattern: i });
                    }
                    let expected = cat.duration(i);
                    let mut run = 1;
                    while run < expected && t + run <= periods && plan.cell(m, t + run) == Cell::Continue {
                        run += 1;
                    }
                    if run < expected {
                        if t + run > periods {
                            out.push(PlanViolation::PastHorizon { mold, period: t, pattern: i, expected });
                        } else {
                            out.push(PlanViolation::ShortRun { mold, period: t, pattern: i, expected, found: run });
                        }
                    }
                    t += run;
                }
            }
        }
    }
    let produced = production(inst, cat, plan);
    for (c, bt) in inst.beam_types().iter().enumerate() {
        for (k, &demand) in bt.demands().iter().enumerate() {
            if produced[c][k] < u64::from(demand) {
                out.push(PlanViolation::Shortfall {
                    beam_type: c + 1,
                    length_index: k + 1,
                    produced: produced[c][k],
                    demand,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanMetrics {
    /// Sum of `F` over starts, in base units times periods.
    pub total_idle: u64,
    /// Last period with an occupied cell, 0 for an empty plan.
    pub makespan: u32,
    /// Number of occupied cells.
    pub total_completion: u64,
    /// `produced - demand` per type and length.
    pub surplus: Vec<Vec<u64>>,
    pub demand_met: bool,
}

impl PlanMetrics {
    pub fn total_surplus(&self) -> u64 {
        self.surplus.iter().flatten().sum()
    }

    pub fn value(&self, objective: Objective) -> u64 {
        match objective {
            Objective::Idle => self.total_idle,
            Objective::Makespan => u64::from(self.makespan),
            Objective::TotalCompletion => self.total_completion,
        }
    }

    /// The optimal objective value a model of `kind` assigns to this plan.
    /// `am2` cannot express makespan 0, so an empty plan maps to 1 there.
    pub fn model_objective(&self, kind: ModelKind) -> u64 {
        match kind {
            ModelKind::M1 => self.total_idle,
            ModelKind::M2 => u64::from(self.makespan),
            ModelKind::AM2 => u64::from(self.makespan.max(1)),
            ModelKind::M3 => self.total_completion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("plan does not verify: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct UnverifiedPlan(pub Vec<PlanViolation>);

pub fn metrics(inst: &Instance, cat: &PatternCatalog, plan: &ProductionPlan) -> Result<PlanMetrics, UnverifiedPlan> {
    let violations = verify(inst, cat, plan);
    if !violations.is_empty() {
        return Err(UnverifiedPlan(violations));
    }
    let mut total_idle = 0u64;
    let mut makespan = 0u32;
    let mut total_completion = 0u64;
    for m in 0..plan.molds() {
        for t in 1..=plan.periods() {
            match plan.cell(m, t) {
                Cell::Idle => {}
                cell => {
                    makespan = makespan.max(t);
                    total_completion += 1;
                    if let Cell::Start(i) = cell {
                        total_idle += cat.idle_cost(i, m).expect("verified start fits its mold");
                    }
                }
            }
        }
    }
    let produced = production(inst, cat, plan);
    let surplus = inst
        .beam_types()
        .iter()
        .zip(&produced)
        .map(|(bt, got)| bt.demands().iter().zip(got).map(|(&d, &g)| g - u64::from(d)).collect())
        .collect();
    Ok(PlanMetrics { total_idle, makespan, total_completion, surplus, demand_met: true })
}

/// Objective a schedule is judged by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    Idle,
    Makespan,
    TotalCompletion,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Idle => "idle",
            Objective::Makespan => "makespan",
            Objective::TotalCompletion => "tct",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Objective::Idle, Objective::Makespan, Objective::TotalCompletion].into_iter().find(|o| o.name() == name)
    }

    pub fn for_model(kind: ModelKind) -> Self {
        match kind {
            ModelKind::M1 => Objective::Idle,
            ModelKind::M2 | ModelKind::AM2 => Objective::Makespan,
            ModelKind::M3 => Objective::TotalCompletion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("assignment has {got} values for {expected} variables")]
    Length { expected: usize, got: usize },
    #[error("cell ({mold}, {period}) holds more than one pattern")]
    Overlap { mold: usize, period: u32 },
    #[error("variable {var} refers to a cell outside the {molds}x{periods} grid")]
    OutOfGrid { var: String, molds: usize, periods: u32 },
}

/// Reads starts and continuations off the model's keyed variables.
pub fn decode(inst: &Instance, model: &IlpModel, assignment: &[i64]) -> Result<ProductionPlan, DecodeError> {
    if assignment.len() != model.num_vars() {
        return Err(DecodeError::Length { expected: model.num_vars(), got: assignment.len() });
    }
    let mut plan = ProductionPlan::for_instance(inst);
    for (j, &value) in assignment.iter().enumerate() {
        let Some(VarKey::Start { mold, period, pattern }) = model.key(j) else { continue };
        if value == 0 {
            continue;
        }
        if mold >= plan.molds() || period == 0 || period > plan.periods() {
            return Err(DecodeError::OutOfGrid {
                var: model.variables()[j].name.clone(),
                molds: plan.molds(),
                periods: plan.periods(),
            });
        }
        if plan.cell(mold, period) != Cell::Idle {
            return Err(DecodeError::Overlap { mold: mold + 1, period });
        }
        plan.set(mold, period, if pattern == 0 { Cell::Continue } else { Cell::Start(pattern) });
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("plan grid is {molds}x{periods}, model expects {expected_molds}x{expected_periods}")]
    Shape { molds: usize, periods: u32, expected_molds: usize, expected_periods: u32 },
    #[error("pattern {index} of the plan's catalog is missing from the model's catalog")]
    UnknownPattern { index: usize },
    #[error("model has no variable for the cell ({mold}, {period})")]
    MissingVariable { mold: usize, period: u32 },
}

/// Inverse of [`decode`]: the assignment of `model` (built over `model_cat`)
/// that reproduces `plan`, whose starts index `plan_cat`. The period
/// variables are set to the tightest values the plan allows.
pub fn encode(
    inst: &Instance,
    model: &IlpModel,
    model_cat: &PatternCatalog,
    plan_cat: &PatternCatalog,
    plan: &ProductionPlan,
) -> Result<Vec<i64>, EncodeError> {
    let (molds, periods) = (inst.num_molds(), inst.periods());
    if plan.molds() != molds || plan.periods() != periods {
        return Err(EncodeError::Shape {
            molds: plan.molds(),
            periods: plan.periods(),
            expected_molds: molds,
            expected_periods: periods,
        });
    }
    let mut x = vec![0i64; model.num_vars()];
    let mut last = 0u32;
    for m in 0..molds {
        for t in 1..=periods {
            let pattern = match plan.cell(m, t) {
                Cell::Idle => continue,
                Cell::Continue => 0,
                Cell::Start(i) => {
                    model_cat.index_of(plan_cat.pattern(i)).ok_or(EncodeError::UnknownPattern { index: i })?
                }
            };
            let var = model
                .var(VarKey::Start { mold: m, period: t, pattern })
                .ok_or(EncodeError::MissingVariable { mold: m + 1, period: t })?;
            x[var] = 1;
            last = last.max(t);
        }
    }
    for t in 1..=last {
        if let Some(var) = model.var(VarKey::PeriodUsed(t)) {
            x[var] = 1;
        }
    }
    if let Some(var) = model.var(VarKey::Makespan) {
        x[var] = i64::from(last.max(1));
    }
    Ok(x)
}

/// Contents of a plan file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanFile {
    pub instance: String,
    pub catalog: CatalogMode,
    /// Listed only for custom catalogs, in catalog order.
    pub patterns: Vec<Pattern>,
    pub plan: ProductionPlan,
}

impl PlanFile {
    /// The catalog the grid's start indices refer to.
    pub fn catalog(&self, inst: &Instance) -> Result<PatternCatalog, PatternError> {
        match self.catalog {
            CatalogMode::Custom => {
                let cat = PatternCatalog::from_patterns(inst, self.patterns.iter().cloned())?;
                // Indices in the grid are positions in the listed order.
                let listed = self.patterns.iter().enumerate().all(|(i, p)| cat.index_of(p) == Some(i + 1));
                if !listed || cat.len() != self.patterns.len() {
                    return Err(PatternError::Malformed("pattern list is not in canonical catalog order".into()));
                }
                Ok(cat)
            }
            mode => build_catalog(inst, mode),
        }
    }
}

pub const PLAN_MAGIC: &str = "beamplan-plan 1";

/// Serializes a plan. Custom catalogs are written out in full so the file
/// stands alone; other modes are rebuilt from the instance on reading.
pub fn write_plan(instance: &str, cat: &PatternCatalog, plan: &ProductionPlan) -> String {
    let mut out = String::new();
    out.push_str(PLAN_MAGIC);
    out.push('\n');
    out.push_str(&format!("instance: {instance}\n"));
    out.push_str(&format!("catalog: {}\n", cat.mode()));
    if cat.mode() == CatalogMode::Custom {
        for (i, p) in cat.patterns() {
            let counts: Vec<String> = p.counts().iter().map(u32::to_string).collect();
            out.push_str(&format!("pattern: {i} {} {}\n", p.beam_type() + 1, counts.join(",")));
        }
    }
    out.push_str(&format!("grid: {} x {}\n", plan.molds(), plan.periods()));
    out.push_str(&plan.render_grid());
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("plan line {line}: {message}")]
pub struct PlanParseError {
    pub line: usize,
    pub message: String,
}

pub fn parse_plan(text: &str) -> Result<PlanFile, PlanParseError> {
    let err = |line: usize, message: &str| PlanParseError { line, message: message.to_string() };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end())).filter(|(_, l)| !l.is_empty());
    let (n, first) = lines.next().ok_or_else(|| err(1, "empty plan file"))?;
    if first != PLAN_MAGIC {
        return Err(err(n, &format!("expected '{PLAN_MAGIC}'")));
    }
    let (n, line) = lines.next().ok_or_else(|| err(n + 1, "missing instance header"))?;
    let instance = line.strip_prefix("instance:").ok_or_else(|| err(n, "expected 'instance:'"))?.trim().to_string();
    let (n, line) = lines.next().ok_or_else(|| err(n + 1, "missing catalog header"))?;
    let mode_name = line.strip_prefix("catalog:").ok_or_else(|| err(n, "expected 'catalog:'"))?.trim();
    let catalog = CatalogMode::from_name(mode_name).ok_or_else(|| err(n, &format!("unknown catalog mode '{mode_name}'")))?;

    let mut patterns = Vec::new();
    let mut last = n;
    let (grid_line, molds, periods) = loop {
        let (n, line) = lines.next().ok_or_else(|| err(last + 1, "missing grid header"))?;
        last = n;
        if let Some(rest) = line.strip_prefix("pattern:") {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            let [index, beam_type, counts] = fields[..] else {
                return Err(err(n, "expected 'pattern: <index> <type> <counts>'"));
            };
            let index: usize = index.parse().map_err(|_| err(n, "bad pattern index"))?;
            if index != patterns.len() + 1 {
                return Err(err(n, "pattern indices must run 1, 2, ... in order"));
            }
            let beam_type: usize = beam_type.parse().map_err(|_| err(n, "bad beam type"))?;
            if beam_type == 0 {
                return Err(err(n, "beam types are numbered from 1"));
            }
            let counts = counts
                .split(',')
                .map(|c| c.parse::<u32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| err(n, "bad pattern counts"))?;
            patterns.push(Pattern::new(beam_type - 1, counts));
            continue;
        }
        let rest = line.strip_prefix("grid:").ok_or_else(|| err(n, "expected 'pattern:' or 'grid:'"))?;
        let (a, b) = rest.split_once('x').ok_or_else(|| err(n, "expected 'grid: <molds> x <periods>'"))?;
        let molds: usize = a.trim().parse().map_err(|_| err(n, "bad mold count"))?;
        let periods: u32 = b.trim().parse().map_err(|_| err(n, "bad period count"))?;
        break (n, molds, periods);
    };
    if catalog != CatalogMode::Custom && !patterns.is_empty() {
        return Err(err(grid_line, "patterns may only be listed for a custom catalog"));
    }

    let mut plan = ProductionPlan::new(molds, periods);
    for m in 0..molds {
        let (n, line) = lines.next().ok_or_else(|| err(last + 1, &format!("missing grid row for mold {}", m + 1)))?;
        last = n;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != periods as usize {
            return Err(err(n, &format!("expected {periods} cells, found {}", tokens.len())));
        }
        for (t, tok) in tokens.iter().enumerate() {
            let cell = match *tok {
                "C" => Cell::Continue,
                "." => Cell::Idle,
                s => match s.strip_prefix('S').and_then(|i| i.parse::<usize>().ok()) {
                    Some(i) if i > 0 => Cell::Start(i),
                    _ => return Err(err(n, &format!("bad cell token '{s}'"))),
                },
            };
            plan.set(m, t as u32 + 1, cell);
        }
    }
    if let Some((n, _)) = lines.next() {
        return Err(err(n, "unexpected content after the grid"));
    }
    Ok(PlanFile { instance, catalog, patterns, plan })
}
