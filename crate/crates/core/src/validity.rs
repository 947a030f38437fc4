//! Validity over a finite space of bases and relation sets: single
//! formulas, axiom schemas and the translation cross-check.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::formula::{self, parse, translate, Formula};
use crate::relation::{relation_sets, AgentRelationSet, RelationMode};
use crate::support::{EngineError, SupportEngine, SupportMode};
use crate::universe::builders::SENTINEL;
use crate::universe::{Base, Universe};

/// Where a formula fails: a relation set (by index into the space) and a
/// base.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub formula: String,
    pub relation_set: usize,
    pub base: String,
}

/// A universe with the relation sets to quantify over.
pub struct Space<'u> {
    engine: SupportEngine<'u>,
    sets: Vec<Arc<AgentRelationSet>>,
}

impl<'u> Space<'u> {
    pub fn new(u: &'u Universe, relations: RelationMode, support: SupportMode, budget: u128) -> Result<Space<'u>, EngineError> {
        let sets = relation_sets(u, relations, budget)?;
        Ok(Space::with_sets(SupportEngine::new(u, support).with_budget(budget), sets))
    }

    pub fn with_sets(engine: SupportEngine<'u>, sets: Vec<Arc<AgentRelationSet>>) -> Space<'u> {
        Space { engine, sets }
    }

    pub fn universe(&self) -> &'u Universe {
        self.engine.universe()
    }

    pub fn engine(&self) -> &SupportEngine<'u> {
        &self.engine
    }

    pub fn sets(&self) -> &[Arc<AgentRelationSet>] {
        &self.sets
    }

    fn counterexample(&self, f: &Formula, set: usize, b: Base) -> Counterexample {
        Counterexample { formula: f.render(), relation_set: set, base: self.universe().base_name(b) }
    }

    /// First failure of each formula, checked set by set. Caches are
    /// cleared between sets.
    pub fn check_all(&self, formulas: &[Formula]) -> Result<Vec<Option<Counterexample>>, EngineError> {
        let prepared = formulas.iter().map(|f| self.engine.prepare(&[], f)).collect::<Result<Vec<_>, _>>()?;
        let mut out = vec![None; formulas.len()];
        for (i, rs) in self.sets.iter().enumerate() {
            for ((f, p), slot) in formulas.iter().zip(&prepared).zip(out.iter_mut()) {
                if slot.is_some() {
                    continue;
                }
                if let Some(b) = self.engine.truth_prepared(rs, *p)?.first_missing() {
                    let b = Base(b as u32);
                    *slot = Some(self.counterexample(f, i, b));
                }
            }
            self.engine.clear_caches();
        }
        Ok(out)
    }

    /// Whether `f` is supported at every base under every relation set.
    pub fn valid(&self, f: &Formula) -> Result<Option<Counterexample>, EngineError> {
        Ok(self.check_all(std::slice::from_ref(f))?.pop().flatten())
    }

    /// First base and set where `f` and its translation disagree.
    pub fn translation_crosscheck(&self, f: &Formula) -> Result<Option<Counterexample>, EngineError> {
        let (pf, pt) = (self.engine.prepare(&[], f)?, self.engine.prepare(&[], &translate(f))?);
        for (i, rs) in self.sets.iter().enumerate() {
            let diff = self.engine.truth_prepared(rs, pf)?.symmetric_difference(&self.engine.truth_prepared(rs, pt)?);
            if let Some(b) = diff.minimum() {
                return Ok(Some(self.counterexample(f, i, Base(b as u32))));
            }
        }
        Ok(None)
    }
}

/// Entry point for one formula.
pub fn valid_in_space(
    u: &Universe,
    f: &Formula,
    relations: RelationMode,
    support: SupportMode,
    budget: u128,
) -> Result<Option<Counterexample>, EngineError> {
    Space::new(u, relations, support, budget)?.valid(f)
}

/// A point where two support modes give different verdicts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disagreement {
    pub formula: String,
    pub relation_set: usize,
    pub base: String,
    pub canonical: bool,
    pub exhaustive: bool,
}

/// Compares canonical and exhaustive support of each formula over `sets`.
pub fn mode_disagreements(
    u: &Universe,
    sets: &[Arc<AgentRelationSet>],
    formulas: &[Formula],
    budget: u128,
) -> Result<Vec<Disagreement>, EngineError> {
    let canonical = SupportEngine::new(u, SupportMode::Canonical);
    let exhaustive = SupportEngine::new(u, SupportMode::Exhaustive).with_budget(budget);
    let mut out = Vec::new();
    for (i, rs) in sets.iter().enumerate() {
        for f in formulas {
            let c = canonical.truth_set(rs, &[], f)?;
            let mut diff = exhaustive.truth_set(rs, &[], f)?;
            diff.symmetric_difference_with(&c);
            for b in diff.ones() {
                out.push(Disagreement {
                    formula: f.render(),
                    relation_set: i,
                    base: u.base_name(Base(b as u32)),
                    canonical: c.contains(b),
                    exhaustive: !c.contains(b),
                });
            }
        }
        canonical.clear_caches();
        exhaustive.clear_caches();
    }
    Ok(out)
}

/// An axiom schema. Metavariables are atoms named `_0`, `_1`, ... (any
/// formula of the pool), `_p` (an atom of the universe) and agents named
/// `_a`, `_b` (any agent).
#[derive(Clone, Debug)]
pub struct Schema {
    pub name: String,
    pub template: Formula,
}

impl Schema {
    pub fn new(name: &str, template: &str) -> Schema {
        Schema { name: name.to_string(), template: parse(template).expect("schema template parses") }
    }

    fn formula_vars(&self) -> Vec<String> {
        let mut v: Vec<String> = self.template.atoms().into_iter().filter(|a| is_meta_formula(a)).collect();
        v.sort();
        v
    }

    fn agent_vars(&self) -> Vec<String> {
        let mut v: Vec<String> = self.template.agents().into_iter().filter(|a| a.starts_with('_')).collect();
        v.sort();
        v
    }

    /// Every instance over `pool`, the atoms `atoms` and the agents `agents`.
    pub fn instances(&self, pool: &[Formula], atoms: &[Formula], agents: &[String]) -> Vec<Formula> {
        let fvars = self.formula_vars();
        let avars = self.agent_vars();
        let ranges: Vec<&[Formula]> = fvars.iter().map(|v| if v == "_p" { atoms } else { pool }).collect();
        let mut out = Vec::new();
        for fs in product(&ranges) {
            let fmap: HashMap<&str, &Formula> = fvars.iter().map(String::as_str).zip(fs.iter().copied()).collect();
            let agent_ranges: Vec<&[String]> = avars.iter().map(|_| agents).collect();
            for ags in product(&agent_ranges) {
                let amap: HashMap<&str, &str> = avars.iter().map(String::as_str).zip(ags.iter().map(|s| s.as_str())).collect();
                out.push(substitute(&self.template, &fmap, &amap));
            }
        }
        out
    }
}

fn is_meta_formula(name: &str) -> bool {
    name.starts_with('_')
}

fn product<'a, T>(ranges: &[&'a [T]]) -> Vec<Vec<&'a T>> {
    let mut out: Vec<Vec<&T>> = vec![Vec::new()];
    for r in ranges {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                r.iter().map(move |x| {
                    let mut v = prefix.clone();
                    v.push(x);
                    v
                })
            })
            .collect();
    }
    out
}

fn substitute(f: &Formula, fs: &HashMap<&str, &Formula>, agents: &HashMap<&str, &str>) -> Formula {
    let sub = |x: &Formula| substitute(x, fs, agents);
    match f {
        Formula::Atom(p) => fs.get(p.as_str()).map_or_else(|| f.clone(), |g| (*g).clone()),
        Formula::Bot => Formula::Bot,
        Formula::Implies(a, b) => formula::implies(sub(a), sub(b)),
        Formula::Knows(ag, x) => formula::knows(agents.get(ag.as_str()).copied().unwrap_or(ag), sub(x)),
        Formula::Announce(a, b) => formula::announce(sub(a), sub(b)),
        Formula::Not(x) => formula::not(sub(x)),
        Formula::And(a, b) => formula::and(sub(a), sub(b)),
        Formula::Or(a, b) => formula::or(sub(a), sub(b)),
        Formula::Iff(a, b) => formula::iff(sub(a), sub(b)),
    }
}

/// The schemas of S5 and of public announcement logic.
pub fn standard_schemas() -> Vec<Schema> {
    [
        ("A1", "_0 -> (_1 -> _0)"),
        ("A2", "(_0 -> (_1 -> _2)) -> ((_0 -> _1) -> (_0 -> _2))"),
        ("A3", "(~_0 -> ~_1) -> (_1 -> _0)"),
        ("K", "K[_a] (_0 -> _1) -> (K[_a] _0 -> K[_a] _1)"),
        ("T", "K[_a] _0 -> _0"),
        ("4", "K[_a] _0 -> K[_a] K[_a] _0"),
        ("5", "~K[_a] _0 -> K[_a] ~K[_a] _0"),
        ("atomic-permanence", "[_0] _p <-> (_0 -> _p)"),
        ("announcement-bot", "[_0] bot <-> (_0 -> bot)"),
        ("announcement-implication", "[_0] (_1 -> _2) <-> ([_0] _1 -> [_0] _2)"),
        ("announcement-knowledge", "[_0] K[_a] _1 <-> (_0 -> K[_a] [_0] _1)"),
        ("announcement-composition", "[_0] [_1] _2 <-> [_0 & [_0] _1] _2"),
    ]
    .into_iter()
    .map(|(n, t)| Schema::new(n, t))
    .collect()
}

/// Atoms of `u` used in templates: at most `max` of them, without the
/// sentinel.
pub fn template_atoms(u: &Universe, max: usize) -> Vec<Formula> {
    u.atoms().iter().filter(|a| a.as_str() != SENTINEL).take(max).map(|a| formula::atom(a)).collect()
}

/// Formulas of depth at most `depth` over `atoms` and `agents`. Depth 1 is
/// the atoms and `⊥`; depth 2 adds `¬x`, `K_a x`, `x → y` with `x ≠ y` and
/// `[x]y` over depth-1 formulas.
pub fn template_pool(atoms: &[Formula], agents: &[String], depth: usize) -> Vec<Formula> {
    if depth == 0 {
        return Vec::new();
    }
    let mut base: Vec<Formula> = atoms.to_vec();
    base.push(formula::bot());
    if depth == 1 {
        return base;
    }
    let mut out = base.clone();
    for x in &base {
        out.push(formula::not(x.clone()));
        for a in agents {
            out.push(formula::knows(a, x.clone()));
        }
    }
    for x in &base {
        for y in &base {
            if x != y {
                out.push(formula::implies(x.clone(), y.clone()));
            }
            out.push(formula::announce(x.clone(), y.clone()));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaReport {
    pub name: String,
    pub instances: usize,
    pub failures: usize,
    /// Up to the first few failing instances.
    pub examples: Vec<Counterexample>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub relation_sets: usize,
    pub bases: usize,
    pub schemas: Vec<SchemaReport>,
}

impl SuiteReport {
    pub fn failures(&self) -> usize {
        self.schemas.iter().map(|s| s.failures).sum()
    }

    pub fn instances(&self) -> usize {
        self.schemas.iter().map(|s| s.instances).sum()
    }
}

const KEPT_EXAMPLES: usize = 3;

fn record(name: &str, results: Vec<Option<Counterexample>>) -> SchemaReport {
    let instances = results.len();
    let fails: Vec<Counterexample> = results.into_iter().flatten().collect();
    SchemaReport { name: name.to_string(), instances, failures: fails.len(), examples: fails.into_iter().take(KEPT_EXAMPLES).collect() }
}

/// Checks every instance of `schemas` over `pool`, then the rules:
/// modus ponens at each base, and necessitation for knowledge and for
/// announcements over the pool members valid in the space.
pub fn axiom_suite(space: &Space<'_>, schemas: &[Schema], pool: &[Formula], atoms: &[Formula]) -> Result<SuiteReport, EngineError> {
    let u = space.universe();
    let agents = u.agents().to_vec();
    let mut reports = Vec::new();
    for s in schemas {
        let inst = s.instances(pool, atoms, &agents);
        reports.push(record(&s.name, space.check_all(&inst)?));
    }
    if !pool.is_empty() {
        reports.push(modus_ponens(space, pool)?);
        let valid: Vec<Formula> = pool.iter().zip(space.check_all(pool)?).filter(|(_, c)| c.is_none()).map(|(f, _)| f.clone()).collect();
        let nec: Vec<Formula> = valid.iter().flat_map(|f| agents.iter().map(move |a| formula::knows(a, f.clone()))).collect();
        reports.push(record("NEC", space.check_all(&nec)?));
        let nec_ann: Vec<Formula> = valid.iter().flat_map(|f| pool.iter().map(move |g| formula::announce(g.clone(), f.clone()))).collect();
        reports.push(record("announcement-necessitation", space.check_all(&nec_ann)?));
    }
    Ok(SuiteReport { relation_sets: space.sets().len(), bases: u.num_bases(), schemas: reports })
}

/// Modus ponens at each base: support of `φ` and `φ → ψ` gives `ψ`.
fn modus_ponens(space: &Space<'_>, pool: &[Formula]) -> Result<SchemaReport, EngineError> {
    let e = space.engine();
    let u = space.universe();
    let prepared = pool.iter().map(|f| e.prepare(&[], f)).collect::<Result<Vec<_>, _>>()?;
    let mut imps = Vec::with_capacity(pool.len() * pool.len());
    for phi in pool {
        for psi in pool {
            imps.push(e.prepare(&[], &formula::implies(phi.clone(), psi.clone()))?);
        }
    }
    let instances = imps.len();
    let mut fails = Vec::new();
    for (i, rs) in space.sets().iter().enumerate() {
        for (j, phi) in pool.iter().enumerate() {
            for (k, psi) in pool.iter().enumerate() {
                let bad = e
                    .truth_prepared(rs, prepared[j])?
                    .intersection(&e.truth_prepared(rs, imps[j * pool.len() + k])?)
                    .difference(&e.truth_prepared(rs, prepared[k])?);
                if let Some(b) = bad.minimum() {
                    fails.push(Counterexample {
                        formula: format!("{} ; {}", phi.render(), formula::implies(phi.clone(), psi.clone()).render()),
                        relation_set: i,
                        base: u.base_name(Base(b as u32)),
                    });
                }
            }
        }
        e.clear_caches();
    }
    Ok(SchemaReport { name: "MP".into(), instances, failures: fails.len(), examples: fails.into_iter().take(KEPT_EXAMPLES).collect() })
}
