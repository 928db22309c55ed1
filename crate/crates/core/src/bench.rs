//! Benchmark sweeps: every method on every instance, one report row each.
//!
//! Cells run in parallel; rows come out in instance-major, method-minor
//! order regardless of completion order. A failing cell becomes a row with
//! status `error` and never aborts the sweep.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::generator::SuiteEntry;
use crate::heuristics::{run_priority_rule, run_srh, HeuristicError, RuleSpec};
use crate::ilp::{build_model, BuildOptions, ModelKind};
use crate::instance::Instance;
use crate::patterns::{build_catalog, CatalogMode, PatternCatalog};
use crate::plan::{decode, metrics, write_plan, Objective, PlanMetrics, ProductionPlan};
use crate::solver::{solve, BoundKind, IlpSolution, SolveLimits, SolveStatus};
use crate::units::format_fixed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Exact solve over the maximal catalog.
    Exact(ModelKind),
    Rule(RuleSpec),
    /// Exact solve over the qc-maximal catalog.
    Srh(ModelKind),
}

impl Method {
    pub fn name(self) -> String {
        match self {
            Method::Exact(k) => format!("{}-exact", k.name()),
            Method::Rule(r) => r.name().to_string(),
            Method::Srh(k) => format!("srh-{}", k.name()),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        if let Some(k) = name.strip_suffix("-exact") {
            return ModelKind::from_name(k).map(Method::Exact);
        }
        if let Some(k) = name.strip_prefix("srh-") {
            return ModelKind::from_name(k).map(Method::Srh);
        }
        RuleSpec::from_name(name).map(Method::Rule)
    }

    /// The objective the method's `objective` column reports.
    pub fn objective(self) -> Objective {
        match self {
            Method::Exact(k) | Method::Srh(k) => Objective::for_model(k),
            Method::Rule(_) => Objective::Idle,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchOptions {
    pub limits: SolveLimits,
    pub bound: BoundKind,
    /// Where plan files go; `None` keeps plans in memory only.
    pub plan_dir: Option<PathBuf>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { limits: SolveLimits::default(), bound: BoundKind::LpRelaxation, plan_dir: None }
    }
}

/// Report columns, in order.
pub const COLUMNS: [&str; 16] = [
    "instance",
    "seed",
    "method",
    "status",
    "objective_kind",
    "objective",
    "bound",
    "gap",
    "wall_ms",
    "nodes",
    "total_idle",
    "makespan",
    "total_completion",
    "surplus",
    "plan_file",
    "note",
];

/// One report row. Empty strings stand for "not applicable".
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BenchRow {
    pub instance: String,
    pub seed: String,
    pub method: String,
    pub status: String,
    pub objective_kind: String,
    pub objective: String,
    pub bound: String,
    pub gap: String,
    pub wall_ms: String,
    pub nodes: String,
    pub total_idle: String,
    pub makespan: String,
    pub total_completion: String,
    pub surplus: String,
    pub plan_file: String,
    pub note: String,
}

impl BenchRow {
    fn fields(&self) -> [&str; 16] {
        [
            &self.instance,
            &self.seed,
            &self.method,
            &self.status,
            &self.objective_kind,
            &self.objective,
            &self.bound,
            &self.gap,
            &self.wall_ms,
            &self.nodes,
            &self.total_idle,
            &self.makespan,
            &self.total_completion,
            &self.surplus,
            &self.plan_file,
            &self.note,
        ]
    }

    fn from_fields(f: &[String]) -> Self {
        let g = |i: usize| f.get(i).cloned().unwrap_or_default();
        BenchRow {
            instance: g(0),
            seed: g(1),
            method: g(2),
            status: g(3),
            objective_kind: g(4),
            objective: g(5),
            bound: g(6),
            gap: g(7),
            wall_ms: g(8),
            nodes: g(9),
            total_idle: g(10),
            makespan: g(11),
            total_completion: g(12),
            surplus: g(13),
            plan_file: g(14),
            note: g(15),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BenchReport {
    /// Free-form `key=value` lines written as `#` comments above the header.
    pub comments: Vec<String>,
    pub rows: Vec<BenchRow>,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("report header does not match the column schema")]
    Header,
}

impl BenchReport {
    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COLUMNS)?;
        for row in &self.rows {
            w.write_record(row.fields())?;
        }
        let body = w.into_inner().map_err(|e| ReportError::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(body).expect("csv output is UTF-8"));
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self, ReportError> {
        let comments =
            text.lines().take_while(|l| l.starts_with('#')).map(|l| l.trim_start_matches('#').trim().to_string()).collect();
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        if r.headers()?.iter().ne(COLUMNS) {
            return Err(ReportError::Header);
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let fields: Vec<String> = rec?.iter().map(str::to_string).collect();
            rows.push(BenchRow::from_fields(&fields));
        }
        Ok(BenchReport { comments, rows })
    }
}

fn status_name(status: SolveStatus, reduced: bool) -> &'static str {
    match (status, reduced) {
        (SolveStatus::Infeasible, true) => "infeasible-reduced",
        (s, _) => s.name(),
    }
}

fn ratio_text(r: num_rational::Ratio<i128>) -> String {
    format!("{:.6}", *r.numer() as f64 / *r.denom() as f64)
}

struct CellOutcome {
    row: BenchRow,
    plan: Option<(PatternCatalog, ProductionPlan)>,
}

fn fill_metrics(row: &mut BenchRow, inst: &Instance, m: &PlanMetrics) {
    row.total_idle = format_fixed(i128::from(m.total_idle), inst.unit_scale());
    row.makespan = m.makespan.to_string();
    row.total_completion = m.total_completion.to_string();
    row.surplus = m.total_surplus().to_string();
}

/// Objective value in report units: decimal lengths times periods for idle
/// cost, plain integers otherwise.
pub fn objective_text(inst: &Instance, objective: Objective, value: i128) -> String {
    match objective {
        Objective::Idle => format_fixed(value, inst.unit_scale()),
        _ => value.to_string(),
    }
}

/// Records the solution columns and checks the decoded plan against the
/// solver's objective.
fn exact_cell(
    inst: &Instance,
    kind: ModelKind,
    cat: PatternCatalog,
    model: &crate::ilp::IlpModel,
    sol: &IlpSolution,
    reduced: bool,
    row: &mut BenchRow,
) -> Option<(PatternCatalog, ProductionPlan)> {
    let objective = Objective::for_model(kind);
    row.status = status_name(sol.status, reduced).to_string();
    row.nodes = sol.stats.nodes.to_string();
    row.bound = sol.bound.map(|b| objective_text(inst, objective, b)).unwrap_or_default();
    row.gap = sol.gap().map(ratio_text).unwrap_or_default();
    let x = sol.assignment.as_ref()?;
    let value = sol.objective_value.expect("incumbent has a value");
    row.objective = objective_text(inst, objective, value);
    let plan = match decode(inst, model, x) {
        Ok(p) => p,
        Err(e) => {
            row.status = "error".into();
            row.note = e.to_string();
            return None;
        }
    };
    match metrics(inst, &cat, &plan) {
        Ok(m) => {
            fill_metrics(row, inst, &m);
            if i128::from(m.model_objective(kind)) != value {
                row.status = "error".into();
                row.note = format!("plan metrics give {} but the solver reports {value}", m.model_objective(kind));
            }
        }
        Err(e) => {
            row.status = "error".into();
            row.note = e.to_string();
        }
    }
    Some((cat, plan))
}

fn run_cell(entry: &SuiteEntry, method: Method, options: &BenchOptions) -> CellOutcome {
    let inst = &entry.instance;
    let mut row = BenchRow {
        instance: entry.name.clone(),
        seed: entry.seed.to_string(),
        method: method.name(),
        objective_kind: method.objective().name().to_string(),
        ..Default::default()
    };
    let started = Instant::now();
    let plan = match method {
        Method::Exact(kind) => match build_catalog(inst, CatalogMode::Maximal) {
            Err(e) => {
                row.status = "error".into();
                row.note = e.to_string();
                None
            }
            Ok(cat) => {
                let model = build_model(inst, &cat, kind, BuildOptions::default());
                let provider = options.bound.provider(inst, &cat, &model);
                let sol = solve(&model, &options.limits, provider.as_ref());
                exact_cell(inst, kind, cat, &model, &sol, false, &mut row)
            }
        },
        Method::Srh(kind) => match run_srh(inst, kind, &options.limits, options.bound) {
            Err(e) => {
                row.status = "error".into();
                row.note = e.to_string();
                None
            }
            Ok(run) => exact_cell(inst, kind, run.catalog, &run.model, &run.solution, true, &mut row),
        },
        Method::Rule(rule) => match run_priority_rule(inst, rule) {
            Err(HeuristicError::HorizonExhausted { open, .. }) => {
                row.status = "horizon-exhausted".into();
                row.note = format!("{open} beams left");
                None
            }
            Err(e) => {
                row.status = "error".into();
                row.note = e.to_string();
                None
            }
            Ok(run) => match metrics(inst, &run.phase2.catalog, &run.phase2.plan) {
                Ok(m) => {
                    row.status = "feasible".into();
                    row.objective = objective_text(inst, Objective::Idle, i128::from(m.total_idle));
                    fill_metrics(&mut row, inst, &m);
                    Some((run.phase2.catalog, run.phase2.plan))
                }
                Err(e) => {
                    row.status = "error".into();
                    row.note = e.to_string();
                    None
                }
            },
        },
    };
    row.wall_ms = format!("{:.3}", started.elapsed().as_secs_f64() * 1000.0);
    CellOutcome { row, plan }
}

fn plan_file_name(instance: &str, method: Method) -> String {
    format!("{instance}.{}.plan", method.name())
}

/// Runs every method on every suite entry. Plans are written to
/// `options.plan_dir` when set; a write failure is noted in the row.
pub fn run_benchmark(suite: &[SuiteEntry], methods: &[Method], options: &BenchOptions) -> BenchReport {
    let cells: Vec<(usize, Method)> = (0..suite.len()).flat_map(|i| methods.iter().map(move |&m| (i, m))).collect();
    let rows: Vec<BenchRow> = cells
        .par_iter()
        .map(|&(i, method)| {
            let entry = &suite[i];
            let mut outcome = run_cell(entry, method, options);
            if let (Some(dir), Some((cat, plan))) = (&options.plan_dir, &outcome.plan) {
                let name = plan_file_name(&entry.name, method);
                match std::fs::write(dir.join(&name), write_plan(&entry.name, cat, plan)) {
                    Ok(()) => outcome.row.plan_file = name,
                    Err(e) => outcome.row.note = format!("plan not written: {e}"),
                }
            }
            outcome.row
        })
        .collect();
    let mut comments = vec![
        format!("methods={}", methods.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")),
        format!(
            "bound={} max_nodes={} max_wall_ms={} target_gap={}",
            options.bound.name(),
            options.limits.max_nodes.map_or("none".into(), |n| n.to_string()),
            options.limits.max_wall_time.map_or("none".into(), |d| d.as_millis().to_string()),
            options.limits.target_gap
        ),
    ];
    if let Some(first) = suite.first() {
        comments.push(format!("first_seed={} instances={}", first.seed, suite.len()));
    }
    BenchReport { comments, rows }
}

/// Directory-relative path of a row's plan file.
pub fn plan_path(dir: &Path, row: &BenchRow) -> Option<PathBuf> {
    (!row.plan_file.is_empty()).then(|| dir.join(&row.plan_file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{suite, Preset};
    use crate::instance::BeamType;
    use crate::units::{Length, UnitScale};

    #[test]
    fn method_names_round_trip() {
        for name in ["m1-exact", "am2-exact", "sctsl", "lctal", "srh-m3"] {
            assert_eq!(Method::from_name(name).unwrap().name(), name);
        }
        assert_eq!(Method::from_name("m9-exact"), None);
    }

    #[test]
    fn three_instances_two_methods() {
        let s = suite(Preset::Tiny, 3, 3).unwrap();
        let methods = [Method::Exact(ModelKind::M1), Method::Rule(RuleSpec::ALL[0])];
        let report = run_benchmark(&s, &methods, &BenchOptions::default());
        assert_eq!(report.rows.len(), 6);
        let order: Vec<_> = report.rows.iter().map(|r| (r.instance.as_str(), r.method.as_str())).collect();
        assert_eq!(order[0], ("tiny-3", "m1-exact"));
        assert_eq!(order[1], ("tiny-3", "sctsl"));
        assert_eq!(order[5], ("tiny-5", "sctsl"));
        let text = report.to_csv().unwrap();
        assert_eq!(BenchReport::parse(&text).unwrap(), report);
    }

    #[test]
    fn empty_method_list_is_header_only() {
        let s = suite(Preset::Tiny, 3, 2).unwrap();
        let report = run_benchmark(&s, &[], &BenchOptions::default());
        assert!(report.rows.is_empty());
        let text = report.to_csv().unwrap();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1);
    }

    #[test]
    fn srh_adversarial_row() {
        let l = |tenths: u64| Length::from_base_units(tenths * 100);
        let inst =
            Instance::new(UnitScale::DEFAULT, vec![l(100)], 1, vec![BeamType::new(1, vec![(l(30), 3), (l(40), 0)])]).unwrap();
        let entry = SuiteEntry { name: "adversarial".into(), seed: 0, instance: inst };
        let report = run_benchmark(&[entry], &[Method::Srh(ModelKind::M1), Method::Exact(ModelKind::M1)], &BenchOptions::default());
        assert_eq!(report.rows[0].status, "infeasible-reduced");
        assert_eq!(report.rows[1].status, "optimal");
        assert_eq!(report.rows[1].objective, "1");
    }
}
