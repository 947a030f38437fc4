//! Helpers shared by the integration tests: independent oracles and
//! generators.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, OnceLock};

use bespal_core::formula::{and, announce, bot, iff, implies, knows, not, or};
use bespal_core::relation::{random_partition, DEFAULT_BUDGET};
use bespal_core::universe::builders::{classical, SENTINEL};
use bespal_core::{
    compose_delta, construct_update, relation_sets, AgentRelationSet, Base, Formula, KripkeModel, KripkeSpec, RelationMode, SupportEngine,
    Universe, UniverseSpec,
};
use proptest::prelude::*;
use rand::Rng;

/// Micro universes with at most four optional groups and two agents.
pub fn micro_specs() -> Vec<(&'static str, UniverseSpec)> {
    vec![
        ("p;a,b", classical(&["p"], &["a", "b"])),
        ("p,q;a", classical(&["p", "q"], &["a"])),
        ("p,q;a,b", classical(&["p", "q"], &["a", "b"])),
    ]
}

pub struct Fixture {
    pub u: Universe,
    pub sets: Vec<Arc<AgentRelationSet>>,
}

/// Micro universe `which` with every relation set, built once.
pub fn fixture(which: usize) -> &'static Fixture {
    static CELLS: [OnceLock<Fixture>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    CELLS[which].get_or_init(|| {
        let u = micro_specs().remove(which).1.build().unwrap();
        let sets = relation_sets(&u, RelationMode::Exhaustive, DEFAULT_BUDGET).unwrap();
        Fixture { u, sets }
    })
}

/// Formulas over the atoms and agents of micro universe `which`.
pub fn strategy(which: usize, depth: u32) -> BoxedStrategy<Formula> {
    let u = &fixture(which).u;
    let atoms = u.atoms().iter().filter(|a| a.as_str() != SENTINEL).cloned().collect();
    formula_strategy(atoms, u.agents().to_vec(), depth)
}

/// Forward chaining from the rules of `b` until nothing new is derived.
pub fn naive_closure(u: &Universe, b: Base) -> BTreeSet<usize> {
    let rules = u.rules_of(b);
    let mut known = BTreeSet::new();
    loop {
        let before = known.len();
        for r in &rules {
            if r.premises.iter().all(|p| known.contains(p)) {
                known.insert(r.conclusion);
            }
        }
        if known.len() == before {
            return known;
        }
    }
}

/// Support computed clause by clause, quantifying over supersets
/// explicitly. Knowledge after announcements uses the row of the full
/// canonical update construction at each superset.
pub struct Oracle<'a, 'u> {
    pub u: &'u Universe,
    pub engine: &'a SupportEngine<'u>,
    pub rs: Arc<AgentRelationSet>,
    memo: HashMap<(u32, Vec<Formula>, Formula), bool>,
}

impl<'a, 'u> Oracle<'a, 'u> {
    pub fn new(engine: &'a SupportEngine<'u>, rs: Arc<AgentRelationSet>) -> Self {
        Oracle { u: engine.universe(), engine, rs, memo: HashMap::new() }
    }

    fn supersets(&self, b: Base) -> Vec<Base> {
        self.u.bases().filter(|c| b.is_subset_of(*c)).collect()
    }

    pub fn supports(&mut self, b: Base, delta: &[Formula], f: &Formula) -> bool {
        let f = f.desugar();
        let delta: Vec<Formula> = delta.iter().map(Formula::desugar).collect();
        self.eval(b, &delta, &f)
    }

    fn eval(&mut self, b: Base, delta: &[Formula], f: &Formula) -> bool {
        let key = (b.0, delta.to_vec(), f.clone());
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let v = match f {
            Formula::Atom(p) => naive_closure(self.u, b).contains(&self.u.atom_id(p).unwrap()),
            Formula::Bot => naive_closure(self.u, b).len() == self.u.atoms().len(),
            Formula::Implies(x, y) => self.supersets(b).into_iter().all(|c| !self.eval(c, delta, x) || self.eval(c, delta, y)),
            Formula::Knows(a, x) if delta.is_empty() => {
                let a = self.u.agent_id(a).unwrap();
                let succ: Vec<Base> = self.rs.agent(a).row(b).ones().map(|i| Base(i as u32)).collect();
                succ.into_iter().all(|c| self.eval(c, delta, x))
            }
            Formula::Knows(a, x) => {
                let ai = self.u.agent_id(a).unwrap();
                let g = compose_delta(delta).desugar();
                let mut ok = true;
                for c in self.supersets(b) {
                    if !self.eval(c, &[], &g) {
                        continue;
                    }
                    let stages = construct_update(self.engine, &self.rs, &g, c).unwrap();
                    let succ: Vec<Base> = stages.r.agent(ai).row(c).ones().map(|i| Base(i as u32)).collect();
                    if !succ.into_iter().all(|d| self.eval(d, delta, x)) {
                        ok = false;
                        break;
                    }
                }
                ok
            }
            Formula::Announce(x, y) => {
                let mut next = delta.to_vec();
                next.push((**x).clone());
                self.supersets(b).into_iter().all(|c| !self.eval(c, delta, x) || self.eval(c, &next, y))
            }
            _ => unreachable!("oracle runs on desugared formulas"),
        };
        self.memo.insert(key, v);
        v
    }
}

/// Formulas over `atoms` and `agents` with at most `depth` connectives
/// nested, including sugar.
pub fn formula_strategy(atoms: Vec<String>, agents: Vec<String>, depth: u32) -> BoxedStrategy<Formula> {
    let leaf = prop_oneof![
        4 => proptest::sample::select(atoms).prop_map(Formula::Atom),
        1 => Just(bot()),
    ];
    leaf.prop_recursive(depth, 24, 2, move |inner| {
        let agents = agents.clone();
        prop_oneof![
            inner.clone().prop_map(not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| implies(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| or(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| iff(a, b)),
            (proptest::sample::select(agents), inner.clone()).prop_map(|(a, f)| knows(&a, f)),
            (inner.clone(), inner).prop_map(|(a, b)| announce(a, b)),
        ]
    })
    .boxed()
}

/// A random formula with at most `depth` nested connectives.
pub fn random_formula<R: Rng>(rng: &mut R, atoms: &[&str], agents: &[&str], depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.15) { bot() } else { Formula::Atom(atoms[rng.gen_range(0..atoms.len())].to_string()) };
    }
    let sub = |rng: &mut R| random_formula(rng, atoms, agents, depth - 1);
    match rng.gen_range(0..7) {
        0 => not(sub(rng)),
        1 => implies(sub(rng), sub(rng)),
        2 => and(sub(rng), sub(rng)),
        3 => or(sub(rng), sub(rng)),
        4 => iff(sub(rng), sub(rng)),
        5 => knows(agents[rng.gen_range(0..agents.len())], sub(rng)),
        _ => announce(sub(rng), sub(rng)),
    }
}

/// A random S5 model on `n` worlds: one random partition per agent and a
/// random valuation.
pub fn random_s5_model<R: Rng>(rng: &mut R, n: usize, atoms: &[&str], agents: &[&str]) -> KripkeModel {
    let worlds: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
    let mut relations = BTreeMap::new();
    for a in agents {
        let labels = random_partition(n, rng);
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if labels[i] == labels[j] {
                    pairs.push((worlds[i].clone(), worlds[j].clone()));
                }
            }
        }
        relations.insert(a.to_string(), pairs);
    }
    let valuation = atoms
        .iter()
        .map(|p| {
            let ws = worlds.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
            (p.to_string(), ws)
        })
        .collect();
    KripkeSpec { worlds, relations, valuation, s5_closure: false }.build().unwrap()
}
