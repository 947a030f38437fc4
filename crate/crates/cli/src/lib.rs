//! The `bespal` command line: argument definitions, report types and
//! dispatch. `main` only parses arguments and maps the outcome to an exit
//! status.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use bespal_core::dot::stage_to_dot;
use bespal_core::relation::{RelationFileError, DEFAULT_BUDGET};
use bespal_core::scenario::{self, ScenarioError, ScenarioSpec, Semantics};
use bespal_core::update::{stage_edges, StageEdges};
use bespal_core::validity::template_atoms;
use bespal_core::{
    axiom_suite, check_modal_conditions, construct_update_sequence, load_relation_set, parse, relation_set_to_specs, standard_schemas,
    template_pool, translate, AgentRelationSet, Base, Completion, ConditionReport, Counterexample, EngineError, Formula, KripkeError,
    KripkeModel, KripkeSpec, ParseError, RelationError, RelationMode, RelationSpec, ScenarioReport, Space, SuiteReport, SupportEngine,
    SupportMode, Universe, UniverseError, UniverseSpec, UpdateError, UpdateStages,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Parser)]
#[command(name = "bespal", version, about = "Public announcement logic over Kripke models and base-extension semantics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// How support for knowledge after announcements picks updates.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Canonical)]
    pub mode: ModeArg,
    /// Seed for sampled relation sets.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Directory for DOT files of relation stages.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Largest number of candidate relations an enumeration may visit.
    #[arg(long, global = true, env = "BESPAL_BUDGET")]
    pub budget: Option<u128>,
    /// Include wall-clock time in the output.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Support of a formula at a base.
    Check {
        #[command(flatten)]
        source: Source,
        /// Base reference; defaults to the scenario's actual base.
        #[arg(long)]
        base: Option<String>,
        #[arg(long)]
        formula: String,
        /// Announcements made so far, in order.
        #[arg(long = "delta")]
        delta: Vec<String>,
        /// Context formulas.
        #[arg(long = "context")]
        context: Vec<String>,
    },
    /// Truth of a formula at a world of a Kripke model.
    KripkeCheck {
        /// Model JSON file.
        #[arg(long, conflicts_with = "scenario")]
        model: Option<PathBuf>,
        /// Built-in scenario name or scenario JSON file.
        #[arg(long)]
        scenario: Option<String>,
        /// Defaults to the scenario's actual world.
        #[arg(long)]
        world: Option<String>,
        #[arg(long)]
        formula: String,
    },
    /// Structural conditions of each agent's relation.
    ValidateRelation {
        #[command(flatten)]
        source: Source,
    },
    /// Canonical update by a sequence of announcements at a base.
    Update {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        base: Option<String>,
        /// Announced formulas, in order.
        #[arg(long = "formula", required = true)]
        formulas: Vec<String>,
    },
    /// Support of a formula at every base under every relation set.
    Valid {
        #[command(flatten)]
        universe: UniverseSource,
        #[arg(long)]
        formula: String,
        /// Sample this many relation sets instead of enumerating all.
        #[arg(long)]
        sample: Option<usize>,
    },
    /// Instances of the S5 and announcement schemas.
    Axioms {
        #[command(flatten)]
        universe: UniverseSource,
        /// Depth of the formulas substituted for metavariables.
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Number of universe atoms used in templates.
        #[arg(long, default_value_t = 2)]
        atoms: usize,
        #[arg(long)]
        sample: Option<usize>,
    },
    /// The announcement-free translation and its complexity.
    Translate { formula: String },
    /// Built-in or file scenarios.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
}

#[derive(Debug, Subcommand)]
pub enum ScenarioCommand {
    /// Runs a scenario script; `card-game`, `muddy`, `muddy-counterexample`
    /// or a path.
    Run { scenario: String },
    /// Prints a built-in scenario as JSON.
    Show { scenario: String },
}

/// A universe with relations: a scenario, or a universe file with a
/// relation file.
#[derive(Debug, Args)]
pub struct Source {
    /// Built-in scenario name or scenario JSON file.
    #[arg(long, conflicts_with_all = ["universe", "relations"])]
    pub scenario: Option<String>,
    /// Universe JSON file.
    #[arg(long, requires = "relations")]
    pub universe: Option<PathBuf>,
    /// Relation JSON file: a list of per-agent relations.
    #[arg(long, requires = "universe")]
    pub relations: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = CompletionArg::Auto)]
    pub completion: CompletionArg,
}

/// A universe alone: from a scenario or a universe file.
#[derive(Debug, Args)]
pub struct UniverseSource {
    #[arg(long, conflicts_with = "universe")]
    pub scenario: Option<String>,
    #[arg(long)]
    pub universe: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Canonical,
    Exhaustive,
}

impl From<ModeArg> for SupportMode {
    fn from(m: ModeArg) -> SupportMode {
        match m {
            ModeArg::Canonical => SupportMode::Canonical,
            ModeArg::Exhaustive => SupportMode::Exhaustive,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum CompletionArg {
    Steps,
    Refine,
    Auto,
}

impl From<CompletionArg> for Completion {
    fn from(c: CompletionArg) -> Completion {
        match c {
            CompletionArg::Steps => Completion::Steps,
            CompletionArg::Refine => Completion::Refine,
            CompletionArg::Auto => Completion::Auto,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid JSON in {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Universe(#[from] UniverseError),
    #[error(transparent)]
    RelationFile(#[from] RelationFileError),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error(transparent)]
    Kripke(#[from] KripkeError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

/// Exit statuses.
pub mod status {
    pub const OK: i32 = 0;
    pub const FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const BUDGET: i32 = 3;
}

fn engine_status(e: &EngineError) -> i32 {
    match e {
        EngineError::Relation(_) => status::BUDGET,
        EngineError::Universe(_) => status::USAGE,
        EngineError::Update(_) => status::FAILED,
    }
}

impl CliError {
    /// Exit status for the error: 3 when a budget was exceeded, 1 for
    /// semantic failures, 2 for bad input.
    pub fn status(&self) -> i32 {
        match self {
            CliError::Relation(_) => status::BUDGET,
            CliError::Engine(e) => engine_status(e),
            CliError::Update(UpdateError::Engine(e)) => engine_status(e),
            CliError::Scenario(ScenarioError::Engine(e)) => engine_status(e),
            CliError::Scenario(ScenarioError::Update(UpdateError::Engine(e))) => engine_status(e),
            CliError::RelationFile(RelationFileError::Saturation(_))
            | CliError::Scenario(ScenarioError::Saturation(_))
            | CliError::Update(_)
            | CliError::Scenario(ScenarioError::Update(_)) => status::FAILED,
            _ => status::USAGE,
        }
    }
}

/// A report and, when `--timing` is set, the elapsed time.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Envelope<T> {
    #[serde(flatten)]
    pub report: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckReport {
    pub base: String,
    pub context: Vec<String>,
    pub delta: Vec<String>,
    pub formula: String,
    pub mode: SupportMode,
    pub verdict: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KripkeReport {
    pub world: String,
    pub formula: String,
    pub verdict: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AgentConditions {
    pub agent: String,
    pub conditions: ConditionReport,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RelationReport {
    pub completion: Completion,
    pub agents: Vec<AgentConditions>,
    pub all_hold: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StageReport {
    pub stage: String,
    pub edges: Vec<StageEdges>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct UpdateReport {
    pub base: String,
    pub delta: Vec<String>,
    pub s_star_domain: Vec<String>,
    pub stages: Vec<StageReport>,
    pub modal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// The final relation in relation-file form.
    pub updated: Vec<RelationSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ValidReport {
    pub formula: String,
    pub relations: RelationMode,
    pub relation_sets: usize,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AxiomsReport {
    pub relations: RelationMode,
    pub depth: usize,
    pub suite: SuiteReport,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TranslateReport {
    pub formula: String,
    pub translation: String,
    pub complexity: u64,
    pub translation_complexity: u64,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|source| CliError::Json { path: path.display().to_string(), source })
}

fn parse_all(xs: &[String]) -> Result<Vec<Formula>, CliError> {
    xs.iter().map(|x| parse(x).map_err(CliError::from)).collect()
}

/// A universe with one relation set and a default base.
struct Loaded {
    universe: Universe,
    relations: Arc<AgentRelationSet>,
    completion: Completion,
    actual: Option<Base>,
}

fn resolve_scenario(reference: &str) -> Result<ScenarioSpec, CliError> {
    scenario::resolve(reference).map_err(|e| match e {
        ScenarioError::Io(source) => CliError::Io { path: reference.to_string(), source },
        ScenarioError::Json(source) => CliError::Json { path: reference.to_string(), source },
        other => other.into(),
    })
}

fn load_source(source: &Source) -> Result<Loaded, CliError> {
    if let Some(s) = &source.scenario {
        let mut spec = resolve_scenario(s)?;
        spec.completion = source.completion.into();
        let s = spec.load()?;
        return Ok(Loaded { universe: s.universe, relations: s.relations, completion: s.completion, actual: Some(s.actual) });
    }
    let (Some(u), Some(r)) = (&source.universe, &source.relations) else {
        return Err(CliError::Usage("give --scenario, or --universe with --relations".into()));
    };
    let universe = read_json::<UniverseSpec>(u)?.build()?;
    let specs: Vec<RelationSpec> = read_json(r)?;
    let saturated = load_relation_set(&universe, &specs, source.completion.into())?;
    Ok(Loaded { universe, relations: Arc::new(saturated.relations), completion: saturated.completion, actual: None })
}

fn load_universe(source: &UniverseSource) -> Result<Universe, CliError> {
    match (&source.scenario, &source.universe) {
        (Some(s), _) => Ok(resolve_scenario(s)?.universe.build()?),
        (None, Some(path)) => Ok(read_json::<UniverseSpec>(path)?.build()?),
        (None, None) => Err(CliError::Usage("give --scenario or --universe".into())),
    }
}

fn pick_base(loaded: &Loaded, base: &Option<String>) -> Result<Base, CliError> {
    match (base, loaded.actual) {
        (Some(b), _) => Ok(loaded.universe.resolve_base(b)?),
        (None, Some(b)) => Ok(b),
        (None, None) => Err(CliError::Usage("give --base".into())),
    }
}

fn relation_mode(sample: Option<usize>, seed: u64) -> RelationMode {
    match sample {
        Some(n) => RelationMode::Sample { n, seed },
        None => RelationMode::Exhaustive,
    }
}

/// What a command produced: the JSON value, the text rendering, DOT
/// graphs by file stem, and the exit status.
struct Output {
    json: serde_json::Value,
    text: String,
    dots: Vec<(String, String)>,
    status: i32,
}

impl Output {
    fn new<T: Serialize>(report: &T, text: String, ok: bool) -> Output {
        Output {
            json: serde_json::to_value(report).expect("reports serialize"),
            text,
            dots: Vec::new(),
            status: if ok { status::OK } else { status::FAILED },
        }
    }
}

fn check_cmd(
    cli: &Cli,
    source: &Source,
    base: &Option<String>,
    formula: &str,
    delta: &[String],
    context: &[String],
) -> Result<Output, CliError> {
    let loaded = load_source(source)?;
    let b = pick_base(&loaded, base)?;
    let f = parse(formula)?;
    let delta = parse_all(delta)?;
    let context = parse_all(context)?;
    let engine = SupportEngine::new(&loaded.universe, cli.mode.into()).with_budget(budget(cli));
    let verdict = engine.supports_in_context(&loaded.relations, b, &context, &delta, &f)?;
    let report = CheckReport {
        base: loaded.universe.base_name(b),
        context: context.iter().map(Formula::render).collect(),
        delta: delta.iter().map(Formula::render).collect(),
        formula: f.render(),
        mode: cli.mode.into(),
        verdict,
    };
    let text = format!("{}: {}", report.base, if verdict { "supported" } else { "not supported" });
    Ok(Output::new(&report, text, verdict))
}

fn kripke_cmd(model: &Option<PathBuf>, scenario_ref: &Option<String>, world: &Option<String>, formula: &str) -> Result<Output, CliError> {
    let (m, default_world): (KripkeModel, Option<String>) = match (model, scenario_ref) {
        (Some(path), _) => (read_json::<KripkeSpec>(path)?.build()?, None),
        (None, Some(s)) => {
            let spec = resolve_scenario(s)?;
            let k = spec.kripke.as_ref().ok_or(ScenarioError::NoKripke)?;
            (k.build()?, spec.actual_world.clone())
        }
        (None, None) => return Err(CliError::Usage("give --model or --scenario".into())),
    };
    let w = world.clone().or(default_world).ok_or_else(|| CliError::Usage("give --world".into()))?;
    let f = parse(formula)?;
    let verdict = m.eval(&w, &f)?;
    let report = KripkeReport { world: w, formula: f.render(), verdict };
    let text = format!("{}: {}", report.world, verdict);
    Ok(Output::new(&report, text, verdict))
}

fn validate_cmd(source: &Source) -> Result<Output, CliError> {
    let loaded = load_source(source)?;
    let u = &loaded.universe;
    let agents: Vec<AgentConditions> = u
        .agents()
        .iter()
        .zip(loaded.relations.relations())
        .map(|(a, r)| AgentConditions { agent: a.clone(), conditions: check_modal_conditions(u, r) })
        .collect();
    let all_hold = agents.iter().all(|a| a.conditions.all_hold());
    let report = RelationReport { completion: loaded.completion, agents, all_hold };
    let mut text = String::new();
    for a in &report.agents {
        text.push_str(&format!("{}: {}\n", a.agent, a.conditions));
    }
    text.push_str(if all_hold { "modal" } else { "not modal" });
    let mut out = Output::new(&report, text, all_hold);
    out.dots.push(("relations".into(), stage_to_dot(u, loaded.relations.relations(), "relations")));
    Ok(out)
}

fn update_cmd(source: &Source, base: &Option<String>, formulas: &[String], cli: &Cli) -> Result<Output, CliError> {
    let loaded = load_source(source)?;
    let u = &loaded.universe;
    let b = pick_base(&loaded, base)?;
    let delta = parse_all(formulas)?;
    let engine = SupportEngine::new(u, cli.mode.into()).with_budget(budget(cli));
    let stages: UpdateStages = construct_update_sequence(&engine, &loaded.relations, &delta, b)?;
    let failure = stages.verify(u).err().map(|e| e.to_string());
    let report = UpdateReport {
        base: u.base_name(b),
        delta: delta.iter().map(Formula::render).collect(),
        s_star_domain: stages.s_star_domain().iter().map(|&x| u.base_name(x)).collect(),
        stages: UpdateStages::STAGE_NAMES
            .iter()
            .map(|name| StageReport { stage: name.to_string(), edges: stage_edges(u, stages.stage(name).expect("known stage"), None) })
            .collect(),
        modal: failure.is_none(),
        failure,
        updated: relation_set_to_specs(u, &stages.r),
    };
    let mut text = String::new();
    text.push_str(&format!("s_star domain: {}\n", report.s_star_domain.join(" ")));
    for s in &report.stages {
        for e in &s.edges {
            let es: Vec<String> = e.edges.iter().map(|(x, y)| format!("{x}-{y}")).collect();
            text.push_str(&format!("{} {}: {}\n", s.stage, e.agent, es.join(" ")));
        }
    }
    text.push_str(&match &report.failure {
        None => "modal".to_string(),
        Some(f) => format!("not modal: {f}"),
    });
    let modal = report.modal;
    let mut out = Output::new(&report, text, modal);
    for name in UpdateStages::STAGE_NAMES {
        let title = format!("update_{name}");
        out.dots.push((format!("update.{name}"), stage_to_dot(u, stages.stage(name).expect("known stage"), &title)));
    }
    Ok(out)
}

fn valid_cmd(cli: &Cli, source: &UniverseSource, formula: &str, sample: Option<usize>) -> Result<Output, CliError> {
    let u = load_universe(source)?;
    let f = parse(formula)?;
    let mode = relation_mode(sample, cli.seed);
    let space = Space::new(&u, mode, cli.mode.into(), budget(cli))?;
    let counterexample = space.valid(&f)?;
    let report = ValidReport {
        formula: f.render(),
        relations: mode,
        relation_sets: space.sets().len(),
        valid: counterexample.is_none(),
        counterexample,
    };
    let text = match &report.counterexample {
        None => format!("valid over {} relation sets", report.relation_sets),
        Some(c) => format!("not valid: fails at {} under relation set {}", c.base, c.relation_set),
    };
    let ok = report.valid;
    Ok(Output::new(&report, text, ok))
}

fn axioms_cmd(cli: &Cli, source: &UniverseSource, depth: usize, atoms: usize, sample: Option<usize>) -> Result<Output, CliError> {
    let u = load_universe(source)?;
    let mode = relation_mode(sample, cli.seed);
    let space = Space::new(&u, mode, cli.mode.into(), budget(cli))?;
    let atoms = template_atoms(&u, atoms);
    let pool = template_pool(&atoms, u.agents(), depth);
    let suite = axiom_suite(&space, &standard_schemas(), &pool, &atoms)?;
    let mut text = String::new();
    for s in &suite.schemas {
        text.push_str(&format!("{}: {} instances, {} failures\n", s.name, s.instances, s.failures));
        for c in &s.examples {
            text.push_str(&format!("  {} fails at {} under relation set {}\n", c.formula, c.base, c.relation_set));
        }
    }
    text.push_str(&format!("{} instances over {} relation sets, {} failures", suite.instances(), suite.relation_sets, suite.failures()));
    let ok = suite.failures() == 0;
    let report = AxiomsReport { relations: mode, depth, suite };
    Ok(Output::new(&report, text, ok))
}

fn translate_cmd(formula: &str) -> Result<Output, CliError> {
    let f = parse(formula)?;
    let t = translate(&f);
    let report = TranslateReport {
        formula: f.render(),
        translation: t.render(),
        complexity: f.complexity(),
        translation_complexity: t.complexity(),
    };
    let text = format!("{}\nc={}", report.translation, report.complexity);
    Ok(Output::new(&report, text, true))
}

fn scenario_cmd(cli: &Cli, name: &str) -> Result<Output, CliError> {
    let loaded = resolve_scenario(name)?.load()?;
    let (report, stages): (ScenarioReport, Vec<UpdateStages>) = loaded.run(cli.mode.into(), None)?;
    let mut text = format!("{} (completion {:?})\n", report.scenario, report.completion);
    for a in &report.announcements {
        text.push_str(&format!("after [{}]: s_star over {}", a.delta.join(", "), a.s_star_domain.join(" ")));
        text.push_str(if a.modal { "\n" } else { " (not modal)\n" });
    }
    for c in &report.checks {
        let tag = if c.passed { "ok" } else { "MISMATCH" };
        let sem = match c.semantics {
            Semantics::Base => "base",
            Semantics::Kripke => "kripke",
        };
        text.push_str(&format!("{tag} [{sem}] {}: {} at {}\n", c.label, c.verdict, c.at));
    }
    text.push_str(if report.passed { "all checks passed" } else { "some checks failed" });
    let ok = report.passed;
    let mut out = Output::new(&report, text, ok);
    let u = &loaded.universe;
    for (a, st) in report.announcements.iter().zip(&stages) {
        for name in UpdateStages::STAGE_NAMES {
            let stem = format!("{}.{}.{}", report.scenario, a.step, name);
            let title = format!("{}_{}_{}", report.scenario, a.step, name);
            out.dots.push((stem, stage_to_dot(u, st.stage(name).expect("known stage"), &title)));
        }
    }
    Ok(out)
}

fn show_cmd(name: &str) -> Result<Output, CliError> {
    let spec = resolve_scenario(name)?;
    let text = serde_json::to_string_pretty(&spec).expect("scenarios serialize");
    Ok(Output::new(&spec, text, true))
}

fn budget(cli: &Cli) -> u128 {
    cli.budget.unwrap_or(DEFAULT_BUDGET)
}

/// Runs the command, writing the report to `out`. Returns the exit status.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let start = Instant::now();
    let output = match &cli.command {
        Command::Check { source, base, formula, delta, context } => check_cmd(cli, source, base, formula, delta, context)?,
        Command::KripkeCheck { model, scenario, world, formula } => kripke_cmd(model, scenario, world, formula)?,
        Command::ValidateRelation { source } => validate_cmd(source)?,
        Command::Update { source, base, formulas } => update_cmd(source, base, formulas, cli)?,
        Command::Valid { universe, formula, sample } => valid_cmd(cli, universe, formula, *sample)?,
        Command::Axioms { universe, depth, atoms, sample } => axioms_cmd(cli, universe, *depth, *atoms, *sample)?,
        Command::Translate { formula } => translate_cmd(formula)?,
        Command::Scenario(ScenarioCommand::Run { scenario }) => scenario_cmd(cli, scenario)?,
        Command::Scenario(ScenarioCommand::Show { scenario }) => show_cmd(scenario)?,
    };
    let elapsed_ms = cli.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        for (stem, dot) in &output.dots {
            std::fs::write(dir.join(format!("{stem}.dot")), dot)?;
        }
    }
    match cli.format {
        Format::Text => {
            writeln!(out, "{}", output.text)?;
            if let Some(ms) = elapsed_ms {
                writeln!(out, "elapsed: {ms:.1} ms")?;
            }
        }
        Format::Json => {
            let env = Envelope { report: output.json, elapsed_ms };
            writeln!(out, "{}", serde_json::to_string_pretty(&env).expect("reports serialize"))?;
        }
        Format::Dot => {
            if output.dots.is_empty() {
                return Err(CliError::Usage("this command has no graph output".into()));
            }
            if cli.out.is_none() {
                for (_, dot) in &output.dots {
                    write!(out, "{dot}")?;
                }
            }
        }
    }
    Ok(output.status)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bespal_core::Base;
    use clap::CommandFactory;

    #[test]
    fn exit_statuses_follow_the_error_kind() {
        let budget = RelationError::BudgetExceeded { needed: 10, budget: 1 };
        assert_eq!(CliError::Relation(budget.clone()).status(), status::BUDGET);
        assert_eq!(CliError::Engine(EngineError::Relation(budget.clone())).status(), status::BUDGET);
        assert_eq!(CliError::Update(UpdateError::Engine(EngineError::Relation(budget))).status(), status::BUDGET);
        assert_eq!(CliError::Update(UpdateError::PreconditionUnsupported(Base(0))).status(), status::FAILED);
        assert_eq!(CliError::Usage("x".into()).status(), status::USAGE);
    }

    #[test]
    fn every_subcommand_parses() {
        Cli::command().debug_assert();
    }
}
