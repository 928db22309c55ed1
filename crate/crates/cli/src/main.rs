use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Ratio;

use beamplan_core::bench::{objective_text, run_benchmark, BenchOptions, Method};
use beamplan_core::generator::{generate, suite_from, Periods, Preset};
use beamplan_core::heuristics::{run_priority_rule, run_srh, HeuristicError, RuleSpec};
use beamplan_core::ilp::{build_model, export_lp, BuildOptions, ModelKind};
use beamplan_core::instance::{parse_instance, write_instance, Instance};
use beamplan_core::patterns::{build_catalog, CatalogMode, PatternCatalog};
use beamplan_core::plan::{decode, encode, metrics, parse_plan, verify, write_plan, Objective, ProductionPlan};
use beamplan_core::solver::{solve_with, BoundKind, IlpSolution, SolveLimits, SolveStatus};

const EXIT_USAGE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_NO_INCUMBENT: u8 = 3;

#[derive(Parser)]
#[command(name = "beamplan", version, about = "Production planning for precast beams on reusable molds")]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded instances.
    Gen(GenArgs),
    /// Solve an instance exactly with branch and bound.
    Solve(SolveArgs),
    /// Run a priority rule.
    Heuristic(HeuristicArgs),
    /// Solve over the reduced qc-maximal catalog.
    Srh(SrhArgs),
    /// Verify a plan file against an instance.
    Check(CheckArgs),
    /// Write a model in LP format.
    ExportLp(ExportArgs),
    /// Run methods over a generated suite and emit a CSV report.
    Bench(BenchArgs),
    /// List the pattern catalog of an instance.
    Catalog(CatalogArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    M1,
    M2,
    Am2,
    M3,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::M1 => ModelKind::M1,
            ModelArg::M2 => ModelKind::M2,
            ModelArg::Am2 => ModelKind::AM2,
            ModelArg::M3 => ModelKind::M3,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternsArg {
    Maximal,
    All,
    QcMaximal,
}

impl From<PatternsArg> for CatalogMode {
    fn from(p: PatternsArg) -> Self {
        match p {
            PatternsArg::Maximal => CatalogMode::Maximal,
            PatternsArg::All => CatalogMode::AllFeasible,
            PatternsArg::QcMaximal => CatalogMode::QcMaximal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundArg {
    Trivial,
    Demand,
    Lp,
}

impl From<BoundArg> for BoundKind {
    fn from(b: BoundArg) -> Self {
        match b {
            BoundArg::Trivial => BoundKind::Trivial,
            BoundArg::Demand => BoundKind::DemandLb,
            BoundArg::Lp => BoundKind::LpRelaxation,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Tiny,
    Small,
    Medium,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Tiny => Preset::Tiny,
            PresetArg::Small => Preset::Small,
            PresetArg::Medium => Preset::Medium,
        }
    }
}

#[derive(Args)]
struct LimitArgs {
    /// Stop after this many branch-and-bound nodes.
    #[arg(long)]
    max_nodes: Option<u64>,
    /// Stop after this many seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Stop once the relative gap is at most this decimal, e.g. 0.01.
    #[arg(long, default_value = "0", value_parser = parse_gap)]
    gap: Ratio<i64>,
}

impl LimitArgs {
    fn limits(&self) -> Result<SolveLimits> {
        let max_wall_time = match self.time_limit {
            Some(s) if !(s.is_finite() && s >= 0.0) => bail!("--time-limit must be a non-negative number of seconds"),
            Some(s) => Some(Duration::from_secs_f64(s)),
            None => None,
        };
        Ok(SolveLimits { max_nodes: self.max_nodes, max_wall_time, target_gap: self.gap, ..Default::default() })
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "small")]
    preset: PresetArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of instances, seeds `seed`, `seed + 1`, ...
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Fixed horizon instead of the automatic one.
    #[arg(long)]
    periods: Option<u32>,
    /// Output file (single instance); stdout when neither this nor --dir is given.
    #[arg(long, conflicts_with = "dir")]
    out: Option<PathBuf>,
    /// Directory receiving `<preset>-<seed>.toml` files.
    #[arg(long)]
    dir: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "m1")]
    model: ModelArg,
    #[arg(long, value_enum, default_value = "maximal")]
    patterns: PatternsArg,
    #[arg(long, value_enum, default_value = "lp")]
    bound: BoundArg,
    #[command(flatten)]
    limits: LimitArgs,
    /// Seed the search with the best priority-rule plan.
    #[arg(long)]
    warm_start: bool,
    /// Keep variables for starts that run past the horizon.
    #[arg(long)]
    no_horizon_pruning: bool,
    /// Write the plan file here.
    #[arg(long)]
    plan_out: Option<PathBuf>,
}

#[derive(Args)]
struct HeuristicArgs {
    instance: PathBuf,
    /// One of sctsl, sctll, sctal, lctsl, lctll, lctal.
    #[arg(long, value_parser = parse_rule)]
    rule: RuleSpec,
    /// Report the phase-1 plan instead of the maximalized one.
    #[arg(long)]
    phase1: bool,
    #[arg(long)]
    plan_out: Option<PathBuf>,
}

#[derive(Args)]
struct SrhArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "m1")]
    model: ModelArg,
    #[arg(long, value_enum, default_value = "lp")]
    bound: BoundArg,
    #[command(flatten)]
    limits: LimitArgs,
    #[arg(long)]
    plan_out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    instance: PathBuf,
    plan: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "m1")]
    model: ModelArg,
    #[arg(long, value_enum, default_value = "maximal")]
    patterns: PatternsArg,
    #[arg(long)]
    no_horizon_pruning: bool,
    /// Output file; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "small")]
    preset: PresetArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Comma-separated: m1-exact, m2-exact, am2-exact, m3-exact, srh-<model>, or a rule name.
    #[arg(long, value_delimiter = ',', default_value = "m1-exact,m2-exact,sctsl", value_parser = parse_method)]
    methods: Vec<Method>,
    #[arg(long, value_enum, default_value = "lp")]
    bound: BoundArg,
    #[command(flatten)]
    limits: LimitArgs,
    /// Report file; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory receiving one plan file per solved cell.
    #[arg(long)]
    plan_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CatalogArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "maximal")]
    patterns: PatternsArg,
}

/// Decimal such as `0.05` as an exact ratio.
fn parse_gap(text: &str) -> Result<Ratio<i64>, String> {
    let bad = || format!("`{text}` is not a non-negative decimal");
    let (whole, frac) = text.split_once('.').unwrap_or((text, ""));
    if whole.is_empty() && frac.is_empty() || frac.len() > 12 {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let denom = 10i64.pow(frac.len() as u32);
    let whole: i64 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| bad())? };
    let frac: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let numer = whole.checked_mul(denom).and_then(|w| w.checked_add(frac)).ok_or_else(bad)?;
    Ok(Ratio::new(numer, denom))
}

fn parse_rule(text: &str) -> Result<RuleSpec, String> {
    RuleSpec::from_name(text).ok_or_else(|| {
        let names: Vec<_> = RuleSpec::ALL.iter().map(|r| r.name()).collect();
        format!("unknown rule `{text}`; expected one of {}", names.join(", "))
    })
}

fn parse_method(text: &str) -> Result<Method, String> {
    Method::from_name(text).ok_or_else(|| format!("unknown method `{text}`"))
}

fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_instance(&text).with_context(|| format!("parsing {}", path.display()))
}

fn instance_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| "instance".to_string(), |s| s.to_string_lossy().into_owned())
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn print_plan(inst: &Instance, cat: &PatternCatalog, plan: &ProductionPlan) -> Result<()> {
    let m = metrics(inst, cat, plan).map_err(|e| anyhow!("plan failed verification: {e}"))?;
    println!("total_idle: {}", objective_text(inst, Objective::Idle, i128::from(m.total_idle)));
    println!("makespan: {}", m.makespan);
    println!("total_completion: {}", m.total_completion);
    println!("surplus: {}", m.total_surplus());
    print!("{}", plan.render_grid());
    Ok(())
}

/// Prints a solver outcome and returns the exit code it maps to.
fn report_solution(inst: &Instance, kind: ModelKind, sol: &IlpSolution) -> u8 {
    let objective = Objective::for_model(kind);
    let text = |v: Option<i128>| v.map_or("-".to_string(), |v| objective_text(inst, objective, v));
    println!("status: {}", sol.status.name());
    println!("objective: {}", text(sol.objective_value));
    println!("bound: {}", text(sol.bound));
    if let Some(g) = sol.gap() {
        println!("gap: {:.6}", *g.numer() as f64 / *g.denom() as f64);
    }
    println!(
        "nodes: {} lp_solves: {} wall_ms: {}",
        sol.stats.nodes,
        sol.stats.lp_solves,
        sol.stats.wall_time.as_millis()
    );
    match (sol.status, &sol.assignment) {
        (SolveStatus::Infeasible, _) => EXIT_INFEASIBLE,
        (_, None) => EXIT_NO_INCUMBENT,
        _ => 0,
    }
}

fn emit_solution(
    inst: &Instance,
    name: &str,
    cat: &PatternCatalog,
    model: &beamplan_core::ilp::IlpModel,
    sol: &IlpSolution,
    plan_out: Option<&Path>,
) -> Result<()> {
    let Some(x) = &sol.assignment else { return Ok(()) };
    let plan = decode(inst, model, x)?;
    print_plan(inst, cat, &plan)?;
    if let Some(path) = plan_out {
        write_output(Some(path), &write_plan(name, cat, &plan))?;
    }
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<u8> {
    let preset = Preset::from(args.preset);
    let mut base = preset.config(args.seed);
    if let Some(t) = args.periods {
        base.periods = Periods::Fixed(t);
    }
    let entries = if args.count == 1 && args.dir.is_none() {
        vec![(format!("{}-{}", preset.name(), args.seed), base.clone(), generate(&base)?)]
    } else {
        suite_from(&base, preset.name(), args.count)?
            .into_iter()
            .map(|e| {
                let cfg = beamplan_core::generator::GeneratorConfig { seed: e.seed, ..base.clone() };
                (e.name, cfg, e.instance)
            })
            .collect()
    };
    for (name, cfg, inst) in &entries {
        let text = format!("# generator: preset={} {cfg}\n{}", preset.name(), write_instance(inst));
        match &args.dir {
            Some(dir) => {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                write_output(Some(&dir.join(format!("{name}.toml"))), &text)?;
            }
            None => write_output(args.out.as_deref(), &text)?,
        }
    }
    Ok(0)
}

fn cmd_solve(args: &SolveArgs) -> Result<u8> {
    let inst = read_instance(&args.instance)?;
    let kind = ModelKind::from(args.model);
    let cat = build_catalog(&inst, args.patterns.into())?;
    let model = build_model(&inst, &cat, kind, BuildOptions { prune_horizon: !args.no_horizon_pruning });
    println!("{}", model.stats_line());
    let provider = BoundKind::from(args.bound).provider(&inst, &cat, &model);
    let initial = if args.warm_start { best_rule_assignment(&inst, &cat, &model) } else { None };
    let sol = solve_with(&model, &args.limits.limits()?, provider.as_ref(), initial.as_deref(), &mut |_, _, _| {});
    let code = report_solution(&inst, kind, &sol);
    emit_solution(&inst, &instance_name(&args.instance), &cat, &model, &sol, args.plan_out.as_deref())?;
    Ok(code)
}

/// The lowest-objective rule plan that the model can represent.
fn best_rule_assignment(inst: &Instance, cat: &PatternCatalog, model: &beamplan_core::ilp::IlpModel) -> Option<Vec<i64>> {
    RuleSpec::ALL
        .iter()
        .filter_map(|&rule| run_priority_rule(inst, rule).ok())
        .filter_map(|run| encode(inst, model, cat, &run.phase2.catalog, &run.phase2.plan).ok())
        .filter(|x| model.check_assignment(x).is_ok())
        .min_by_key(|x| model.evaluate(x))
}

fn cmd_heuristic(args: &HeuristicArgs) -> Result<u8> {
    let inst = read_instance(&args.instance)?;
    let run = match run_priority_rule(&inst, args.rule) {
        Ok(run) => run,
        Err(e @ HeuristicError::HorizonExhausted { .. }) => {
            println!("status: horizon-exhausted");
            eprintln!("{e}");
            return Ok(EXIT_INFEASIBLE);
        }
        Err(e) => return Err(e.into()),
    };
    let chosen = if args.phase1 { &run.phase1 } else { &run.phase2 };
    println!("rule: {} steps: {}", args.rule, run.steps);
    print_plan(&inst, &chosen.catalog, &chosen.plan)?;
    if let Some(path) = &args.plan_out {
        write_output(Some(path), &write_plan(&instance_name(&args.instance), &chosen.catalog, &chosen.plan))?;
    }
    Ok(0)
}

fn cmd_srh(args: &SrhArgs) -> Result<u8> {
    let inst = read_instance(&args.instance)?;
    let kind = ModelKind::from(args.model);
    let run = run_srh(&inst, kind, &args.limits.limits()?, args.bound.into())?;
    println!("{} patterns={}", run.model.stats_line(), run.catalog.len());
    let code = report_solution(&inst, kind, &run.solution);
    if run.solution.status == SolveStatus::Infeasible {
        println!("note: the reduced catalog admits no plan; the full model may still be feasible");
    }
    emit_solution(&inst, &instance_name(&args.instance), &run.catalog, &run.model, &run.solution, args.plan_out.as_deref())?;
    Ok(code)
}

fn cmd_check(args: &CheckArgs) -> Result<u8> {
    let inst = read_instance(&args.instance)?;
    let text = fs::read_to_string(&args.plan).with_context(|| format!("reading {}", args.plan.display()))?;
    let file = parse_plan(&text).with_context(|| format!("parsing {}", args.plan.display()))?;
    let cat = file.catalog(&inst)?;
    let violations = verify(&inst, &cat, &file.plan);
    if violations.is_empty() {
        println!("ok");
        print_plan(&inst, &cat, &file.plan)?;
        Ok(0)
    } else {
        for v in &violations {
            println!("violation: {v}");
        }
        Ok(EXIT_INFEASIBLE)
    }
}

fn cmd_export(args: &ExportArgs) -> Result<u8> {
    let inst = read_instance(&args.instance)?;
    let cat = build_catalog(&inst, args.patterns.into())?;
    let model = build_model(&inst, &cat, args.model.into(), BuildOptions { prune_horizon: !args.no_horizon_pruning });
    write_output(args.out.as_deref(), &export_lp(&model))?;
    Ok(0)
}

fn cmd_bench(args: &BenchArgs) -> Result<u8> {
    let preset = Preset::from(args.preset);
    let base = preset.config(args.seed);
    let suite = suite_from(&base, preset.name(), args.count)?;
    if let Some(dir) = &args.plan_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let options = BenchOptions { limits: args.limits.limits()?, bound: args.bound.into(), plan_dir: args.plan_dir.clone() };
    let mut report = run_benchmark(&suite, &args.methods, &options);
    report.comments.insert(0, format!("generator: preset={} {base}", preset.name()));
    write_output(args.out.as_deref(), &report.to_csv()?)?;
    Ok(0)
}

fn cmd_catalog(args: &CatalogArgs) -> Result<u8> {
    let inst = read_instance(&args.instance)?;
    let cat = build_catalog(&inst, args.patterns.into())?;
    print!("{}", cat.dump(&inst));
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Heuristic(a) => cmd_heuristic(a),
        Command::Srh(a) => cmd_srh(a),
        Command::Check(a) => cmd_check(a),
        Command::ExportLp(a) => cmd_export(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Catalog(a) => cmd_catalog(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_parses_exactly() {
        assert_eq!(parse_gap("0.05"), Ok(Ratio::new(1, 20)));
        assert_eq!(parse_gap("1"), Ok(Ratio::from_integer(1)));
        assert_eq!(parse_gap(".5"), Ok(Ratio::new(1, 2)));
        assert!(parse_gap("-1").is_err());
        assert!(parse_gap(".").is_err());
        assert!(parse_gap("1e-3").is_err());
    }
}
