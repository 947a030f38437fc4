//! Worked scenarios: universes, named bases, core relations, a Kripke twin
//! and a script of announcements and checks.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dot::stage_to_dot;
use crate::formula::{parse, Formula, ParseError};
use crate::kripke::{KripkeError, KripkeModel, KripkeSpec};
use crate::relation::{saturate_core_relation, AgentRelationSet, Completion, CoreRelation, SaturationError};
use crate::support::{EngineError, SupportEngine, SupportMode};
use crate::universe::builders::SENTINEL;
use crate::universe::{Base, BaseRule, GroupSpec, Universe, UniverseError, UniverseSpec};
use crate::update::{construct_update_sequence, stage_edges, StageEdges, UpdateError, UpdateStages};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Step {
    /// Appends to the announcement sequence and builds the canonical
    /// update of the sequence so far at the actual base.
    Announce { formula: String },
    /// Support at a base (default: the actual base) after the sequence so far.
    Check {
        label: String,
        formula: String,
        #[serde(default)]
        base: Option<String>,
        #[serde(default)]
        expect: Option<bool>,
    },
    /// Truth in the Kripke twin, at a world (default: the actual world).
    KripkeCheck {
        label: String,
        formula: String,
        #[serde(default)]
        world: Option<String>,
        #[serde(default)]
        expect: Option<bool>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub universe: UniverseSpec,
    /// Per agent, edges between named bases.
    pub core_edges: BTreeMap<String, Vec<(String, String)>>,
    pub actual_base: String,
    #[serde(default)]
    pub kripke: Option<KripkeSpec>,
    #[serde(default)]
    pub actual_world: Option<String>,
    #[serde(default)]
    pub completion: Completion,
    pub script: Vec<Step>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Universe(#[from] UniverseError),
    #[error(transparent)]
    Saturation(#[from] SaturationError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error(transparent)]
    Kripke(#[from] KripkeError),
    #[error("scenario has no Kripke model")]
    NoKripke,
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// A scenario with its universe built and its relation saturated.
pub struct LoadedScenario {
    pub spec: ScenarioSpec,
    pub universe: Universe,
    pub relations: Arc<AgentRelationSet>,
    pub actual: Base,
    pub kripke: Option<KripkeModel>,
    /// The completion actually used; never `Auto`.
    pub completion: Completion,
}

impl ScenarioSpec {
    pub fn core_relation(&self, u: &Universe) -> Result<CoreRelation, UniverseError> {
        let mut edges = Vec::new();
        for agent in u.agents() {
            let mut es = Vec::new();
            for (x, y) in self.core_edges.get(agent).map(Vec::as_slice).unwrap_or(&[]) {
                es.push((u.resolve_base(x)?, u.resolve_base(y)?));
            }
            edges.push(es);
        }
        let core_bases = u.named_bases().iter().map(|(_, b)| *b).collect();
        Ok(CoreRelation { core_bases, edges })
    }

    pub fn load(&self) -> Result<LoadedScenario, ScenarioError> {
        let universe = self.universe.build()?;
        let core = self.core_relation(&universe)?;
        let saturated = saturate_core_relation(&universe, &core, self.completion)?;
        let actual = universe.resolve_base(&self.actual_base)?;
        let kripke = self.kripke.as_ref().map(|k| k.build()).transpose()?;
        Ok(LoadedScenario {
            spec: self.clone(),
            universe,
            relations: Arc::new(saturated.relations),
            actual,
            kripke,
            completion: saturated.completion,
        })
    }
}

/// Which semantics a check was evaluated in.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semantics {
    Base,
    Kripke,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CheckOutcome {
    pub label: String,
    pub semantics: Semantics,
    pub formula: String,
    pub at: String,
    pub delta: Vec<String>,
    pub verdict: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<bool>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AnnouncementOutcome {
    pub step: usize,
    pub delta: Vec<String>,
    pub s_star_domain: Vec<String>,
    pub s_star: Vec<StageEdges>,
    /// Whether the completed relation meets every condition, and the
    /// first failure otherwise.
    pub modal: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScenarioReport {
    pub scenario: String,
    pub mode: SupportMode,
    pub completion: Completion,
    pub announcements: Vec<AnnouncementOutcome>,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

impl LoadedScenario {
    /// Runs the script. Stage graphs are written to `dot_dir` when given,
    /// one file per announcement and stage.
    pub fn run(&self, mode: SupportMode, dot_dir: Option<&Path>) -> Result<(ScenarioReport, Vec<UpdateStages>), ScenarioError> {
        let u = &self.universe;
        let engine = SupportEngine::new(u, mode);
        let mut delta: Vec<Formula> = Vec::new();
        let mut announcements = Vec::new();
        let mut stages_out = Vec::new();
        let mut checks = Vec::new();
        for (i, step) in self.spec.script.iter().enumerate() {
            match step {
                Step::Announce { formula } => {
                    delta.push(parse(formula)?);
                    let stages = construct_update_sequence(&engine, &self.relations, &delta, self.actual)?;
                    if let Some(dir) = dot_dir {
                        std::fs::create_dir_all(dir)?;
                        for name in UpdateStages::STAGE_NAMES {
                            let rels = stages.stage(name).expect("known stage");
                            let dot = stage_to_dot(u, rels, &format!("{}_{}_{}", self.spec.name, i, name));
                            std::fs::write(dir.join(format!("{}.{}.{}.dot", self.spec.name, i, name)), dot)?;
                        }
                    }
                    announcements.push(AnnouncementOutcome {
                        step: i,
                        delta: delta.iter().map(Formula::render).collect(),
                        s_star_domain: stages.s_star_domain().iter().map(|&b| u.base_name(b)).collect(),
                        s_star: stage_edges(u, &stages.s_star, None),
                        modal: stages.is_modal(),
                        failure: stages.verify(u).err().map(|e| e.to_string()),
                    });
                    stages_out.push(stages);
                }
                Step::Check { label, formula, base, expect } => {
                    let f = parse(formula)?;
                    let b = match base {
                        Some(r) => u.resolve_base(r)?,
                        None => self.actual,
                    };
                    let verdict = engine.supports(&self.relations, b, &delta, &f)?;
                    checks.push(CheckOutcome {
                        label: label.clone(),
                        semantics: Semantics::Base,
                        formula: f.render(),
                        at: u.base_name(b),
                        delta: delta.iter().map(Formula::render).collect(),
                        verdict,
                        expected: *expect,
                        passed: expect.is_none_or(|e| e == verdict),
                    });
                }
                Step::KripkeCheck { label, formula, world, expect } => {
                    let m = self.kripke.as_ref().ok_or(ScenarioError::NoKripke)?;
                    let f = parse(formula)?;
                    let w = world.clone().or_else(|| self.spec.actual_world.clone()).ok_or(ScenarioError::NoKripke)?;
                    let verdict = m.eval(&w, &f)?;
                    checks.push(CheckOutcome {
                        label: label.clone(),
                        semantics: Semantics::Kripke,
                        formula: f.render(),
                        at: w,
                        delta: Vec::new(),
                        verdict,
                        expected: *expect,
                        passed: expect.is_none_or(|e| e == verdict),
                    });
                }
            }
        }
        let passed = checks.iter().all(|c| c.passed);
        Ok((
            ScenarioReport { scenario: self.spec.name.clone(), mode, completion: self.completion, announcements, checks, passed },
            stages_out,
        ))
    }
}

/// Names of the built-in scenarios.
pub const BUILTIN: [&str; 3] = ["card-game", "muddy", "muddy-counterexample"];

pub fn builtin(name: &str) -> Result<ScenarioSpec, ScenarioError> {
    match name {
        "card-game" => Ok(card_game()),
        "muddy" => Ok(muddy()),
        "muddy-counterexample" => Ok(muddy_counterexample()),
        other => Err(ScenarioError::Unknown(other.to_string())),
    }
}

/// A built-in name, or a path to a scenario JSON file.
pub fn resolve(name_or_path: &str) -> Result<ScenarioSpec, ScenarioError> {
    if BUILTIN.contains(&name_or_path) {
        return builtin(name_or_path);
    }
    let text = std::fs::read_to_string(name_or_path)?;
    Ok(serde_json::from_str(&text)?)
}

fn pairs(list: &[(&str, &str)]) -> Vec<(String, String)> {
    list.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

const CARD_AGENTS: [&str; 3] = ["a", "b", "c"];
/// Deals, each listing the cards of a, b and c.
pub const DEALS: [&str; 6] = ["012", "021", "102", "120", "201", "210"];

fn card_atom(card: char, agent: &str) -> String {
    format!("{card}_{agent}")
}

/// Three agents each hold one of the cards 0, 1, 2. Atom `N_i` says `i`
/// holds `N`. A base holding two cards for one agent, or one card for two
/// agents, is explosive.
pub fn card_game() -> ScenarioSpec {
    let atoms: Vec<String> = "012".chars().flat_map(|n| CARD_AGENTS.iter().map(move |i| card_atom(n, i))).collect();
    let mut fixed = Vec::new();
    for n in "012".chars() {
        for (x, i) in CARD_AGENTS.iter().enumerate() {
            for j in &CARD_AGENTS[x + 1..] {
                for p in &atoms {
                    fixed.push(BaseRule::new(&[&card_atom(n, i), &card_atom(n, j)], p));
                }
            }
        }
    }
    for i in CARD_AGENTS {
        for (x, n) in "012".chars().enumerate() {
            for m in "012".chars().skip(x + 1) {
                for p in &atoms {
                    fixed.push(BaseRule::new(&[&card_atom(n, i), &card_atom(m, i)], p));
                }
            }
        }
    }
    let groups = atoms.iter().map(|p| GroupSpec { name: p.clone(), rules: vec![BaseRule::new(&[], p)] }).collect();
    let deal_atoms = |d: &str| -> Vec<String> { d.chars().zip(CARD_AGENTS).map(|(n, i)| card_atom(n, i)).collect() };
    let named_bases = DEALS.iter().map(|d| (format!("B_{d}"), deal_atoms(d))).collect();
    let core_edges = [
        ("a", [("B_012", "B_021"), ("B_102", "B_120"), ("B_201", "B_210")]),
        ("b", [("B_102", "B_201"), ("B_012", "B_210"), ("B_021", "B_120")]),
        ("c", [("B_120", "B_210"), ("B_021", "B_201"), ("B_012", "B_102")]),
    ]
    .into_iter()
    .map(|(a, es)| (a.to_string(), pairs(&es)))
    .collect();
    let mut relations = BTreeMap::new();
    let mut valuation: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (k, &i) in CARD_AGENTS.iter().enumerate() {
        let mut es = Vec::new();
        for d in DEALS {
            for e in DEALS {
                if d.as_bytes()[k] == e.as_bytes()[k] {
                    es.push((d.to_string(), e.to_string()));
                }
            }
        }
        relations.insert(i.to_string(), es);
    }
    for d in DEALS {
        for p in deal_atoms(d) {
            valuation.entry(p).or_default().push(d.to_string());
        }
    }
    let goal = "[~1_a] K[c] (0_a & 1_b & 2_c)";
    ScenarioSpec {
        name: "card-game".into(),
        universe: UniverseSpec {
            atoms,
            agents: CARD_AGENTS.iter().map(|s| s.to_string()).collect(),
            fixed_rules: fixed,
            optional_groups: groups,
            named_bases,
        },
        core_edges,
        actual_base: "B_012".into(),
        kripke: Some(KripkeSpec { worlds: DEALS.iter().map(|s| s.to_string()).collect(), relations, valuation, s5_closure: false }),
        actual_world: Some("012".into()),
        completion: Completion::Auto,
        script: vec![
            Step::KripkeCheck { label: "kripke: c learns the deal".into(), formula: goal.into(), world: None, expect: Some(true) },
            Step::Check { label: "c learns the deal".into(), formula: goal.into(), base: None, expect: Some(true) },
            Step::Announce { formula: "~1_a".into() },
            Step::Check {
                label: "c knows the deal after the announcement".into(),
                formula: "K[c] (0_a & 1_b & 2_c)".into(),
                base: None,
                expect: Some(true),
            },
        ],
    }
}

const CHILDREN: [&str; 3] = ["a", "b", "c"];

/// Subsets of the children, in the order none, a, b, c, ab, ac, bc, abc.
pub const MUDDY_SETS: [&str; 8] = ["", "a", "b", "c", "ab", "ac", "bc", "abc"];

pub fn muddy_base_name(set: &str) -> String {
    if set.is_empty() {
        "B_none".into()
    } else {
        format!("B_{set}")
    }
}

fn muddy_world_name(set: &str) -> String {
    if set.is_empty() {
        "none".into()
    } else {
        set.to_string()
    }
}

fn muddy_core_edges() -> BTreeMap<String, Vec<(String, String)>> {
    let mut out = BTreeMap::new();
    for child in CHILDREN {
        let c = child.chars().next().unwrap();
        let mut es = Vec::new();
        for set in MUDDY_SETS.iter().filter(|s| !s.contains(c)) {
            let mut with: Vec<char> = set.chars().chain([c]).collect();
            with.sort_unstable();
            let with: String = with.into_iter().collect();
            es.push((muddy_base_name(set), muddy_base_name(&with)));
        }
        out.insert(child.to_string(), es);
    }
    out
}

fn muddy_kripke() -> KripkeSpec {
    let mut relations = BTreeMap::new();
    for (child, es) in muddy_core_edges() {
        let strip = |s: &String| muddy_world_name(s.trim_start_matches("B_").trim_start_matches("none"));
        relations.insert(child, es.iter().map(|(x, y)| (strip(x), strip(y))).collect());
    }
    let valuation = CHILDREN
        .iter()
        .map(|c| {
            let worlds = MUDDY_SETS.iter().filter(|s| s.contains(c)).map(|s| muddy_world_name(s)).collect();
            (format!("m_{c}"), worlds)
        })
        .collect();
    KripkeSpec { worlds: MUDDY_SETS.iter().map(|s| muddy_world_name(s)).collect(), relations, valuation, s5_closure: true }
}

pub const MUDDY_PHI: &str = "m_a | m_b | m_c";
pub const MUDDY_PSI: &str = "~(K[a] m_a | K[a] ~m_a) & ~(K[b] m_b | K[b] ~m_b) & ~(K[c] m_c | K[c] ~m_c)";

fn muddy_script(counterexample: bool) -> Vec<Step> {
    let goal = "[m_a | m_b | m_c] [~(K[a] m_a | K[a] ~m_a) & ~(K[b] m_b | K[b] ~m_b) & ~(K[c] m_c | K[c] ~m_c)] (K[a] m_a & K[b] m_b)";
    let mut steps = vec![
        Step::KripkeCheck { label: "kripke: a and b learn they are muddy".into(), formula: goal.into(), world: None, expect: Some(true) },
        Step::KripkeCheck {
            label: "kripke: c does not know".into(),
            formula: format!("[{MUDDY_PHI}] [{MUDDY_PSI}] K[c] m_c"),
            world: None,
            expect: Some(false),
        },
        Step::Announce { formula: MUDDY_PHI.into() },
        Step::Announce { formula: MUDDY_PSI.into() },
    ];
    if counterexample {
        steps.push(Step::Check { label: "b learns b is muddy".into(), formula: "K[b] m_b".into(), base: None, expect: Some(true) });
        steps.push(Step::Check {
            label: "a does not learn a is muddy".into(),
            formula: "K[a] m_a".into(),
            base: None,
            expect: Some(false),
        });
    } else {
        steps.push(Step::Check {
            label: "a and b learn they are muddy".into(),
            formula: "K[a] m_a & K[b] m_b".into(),
            base: None,
            expect: Some(true),
        });
    }
    steps
}

/// Three children; the actual state has a and b muddy. Each child has an
/// axiom group `⇒m_i` and a group making `m_i` explosive.
pub fn muddy() -> ScenarioSpec {
    let mut atoms: Vec<String> = CHILDREN.iter().map(|c| format!("m_{c}")).collect();
    atoms.push(SENTINEL.to_string());
    let mut groups = Vec::new();
    for c in CHILDREN {
        groups.push(GroupSpec { name: format!("m_{c}"), rules: vec![BaseRule::new(&[], &format!("m_{c}"))] });
    }
    for c in CHILDREN {
        groups
            .push(GroupSpec { name: format!("clean_{c}"), rules: atoms.iter().map(|q| BaseRule::new(&[&format!("m_{c}")], q)).collect() });
    }
    let named_bases = MUDDY_SETS
        .iter()
        .map(|set| {
            let gs = CHILDREN.iter().map(|c| if set.contains(c) { format!("m_{c}") } else { format!("clean_{c}") }).collect();
            (muddy_base_name(set), gs)
        })
        .collect();
    ScenarioSpec {
        name: "muddy".into(),
        universe: UniverseSpec {
            atoms,
            agents: CHILDREN.iter().map(|s| s.to_string()).collect(),
            fixed_rules: vec![],
            optional_groups: groups,
            named_bases,
        },
        core_edges: muddy_core_edges(),
        actual_base: "B_ab".into(),
        kripke: Some(muddy_kripke()),
        actual_world: Some("ab".into()),
        completion: Completion::Auto,
        script: muddy_script(false),
    }
}

/// The muddy children without blocking groups. Each state is one group
/// holding a marker axiom `p_N` and `m_i` for every muddy child `i`; the
/// state where nobody is muddy also has `p_none ⇒ m_a`. Two distinct
/// markers together are explosive, so every state is maximal consistent.
pub fn muddy_counterexample() -> ScenarioSpec {
    let marker = |set: &str| format!("p_{}", muddy_world_name(set));
    let mut atoms: Vec<String> = CHILDREN.iter().map(|c| format!("m_{c}")).collect();
    atoms.extend(MUDDY_SETS.iter().map(|s| marker(s)));
    atoms.push(SENTINEL.to_string());
    let groups: Vec<GroupSpec> = MUDDY_SETS
        .iter()
        .map(|set| {
            let mut rules = vec![BaseRule::new(&[], &marker(set))];
            if set.is_empty() {
                rules.push(BaseRule::new(&["p_none"], "m_a"));
            }
            rules.extend(set.chars().map(|c| BaseRule::new(&[], &format!("m_{c}"))));
            GroupSpec { name: format!("g_{}", muddy_world_name(set)), rules }
        })
        .collect();
    let mut fixed = Vec::new();
    for (i, x) in MUDDY_SETS.iter().enumerate() {
        for y in &MUDDY_SETS[i + 1..] {
            for q in &atoms {
                fixed.push(BaseRule::new(&[&marker(x), &marker(y)], q));
            }
        }
    }
    let named_bases = MUDDY_SETS.iter().map(|set| (muddy_base_name(set), vec![format!("g_{}", muddy_world_name(set))])).collect();
    ScenarioSpec {
        name: "muddy-counterexample".into(),
        universe: UniverseSpec {
            atoms,
            agents: CHILDREN.iter().map(|s| s.to_string()).collect(),
            fixed_rules: fixed,
            optional_groups: groups,
            named_bases,
        },
        core_edges: muddy_core_edges(),
        actual_base: "B_ab".into(),
        kripke: Some(muddy_kripke()),
        actual_world: Some("ab".into()),
        completion: Completion::Auto,
        script: muddy_script(true),
    }
}
