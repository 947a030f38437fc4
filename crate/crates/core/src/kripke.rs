//! Multi-agent S5 Kripke models with public announcement by restriction.

use std::collections::{BTreeMap, HashMap};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::Formula;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KripkeError {
    #[error("unknown world `{0}`")]
    UnknownWorld(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("duplicate world `{0}`")]
    DuplicateWorld(String),
    #[error("relation for `{agent}` is not {property}: {witness:?}")]
    NotS5 { agent: String, property: &'static str, witness: Vec<String> },
}

/// Serialized model.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KripkeSpec {
    pub worlds: Vec<String>,
    pub relations: BTreeMap<String, Vec<(String, String)>>,
    #[serde(default)]
    pub valuation: BTreeMap<String, Vec<String>>,
    /// Replace each relation by its equivalence closure on load.
    #[serde(default)]
    pub s5_closure: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KripkeModel {
    worlds: Vec<String>,
    index: HashMap<String, usize>,
    agents: Vec<String>,
    rel: Vec<Vec<FixedBitSet>>,
    val: BTreeMap<String, FixedBitSet>,
}

impl KripkeSpec {
    pub fn build(&self) -> Result<KripkeModel, KripkeError> {
        let n = self.worlds.len();
        let mut index = HashMap::new();
        for (i, w) in self.worlds.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(KripkeError::DuplicateWorld(w.clone()));
            }
        }
        let look = |w: &String| index.get(w).copied().ok_or_else(|| KripkeError::UnknownWorld(w.clone()));
        let mut agents = Vec::new();
        let mut rel = Vec::new();
        for (agent, pairs) in &self.relations {
            let mut rows = vec![FixedBitSet::with_capacity(n); n];
            for (a, b) in pairs {
                rows[look(a)?].insert(look(b)?);
            }
            if self.s5_closure {
                rows = equivalence_closure(&rows);
            }
            agents.push(agent.clone());
            rel.push(rows);
        }
        let mut val = BTreeMap::new();
        for (p, ws) in &self.valuation {
            let mut s = FixedBitSet::with_capacity(n);
            for w in ws {
                s.insert(look(w)?);
            }
            val.insert(p.clone(), s);
        }
        Ok(KripkeModel { worlds: self.worlds.clone(), index, agents, rel, val })
    }
}

fn equivalence_closure(rows: &[FixedBitSet]) -> Vec<FixedBitSet> {
    let n = rows.len();
    let mut comp = vec![usize::MAX; n];
    let mut out = vec![FixedBitSet::with_capacity(n); n];
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut members = FixedBitSet::with_capacity(n);
        let mut stack = vec![start];
        comp[start] = start;
        while let Some(x) = stack.pop() {
            members.insert(x);
            let nbrs: Vec<usize> = rows[x].ones().chain((0..n).filter(|&y| rows[y].contains(x))).collect();
            for y in nbrs {
                if comp[y] == usize::MAX {
                    comp[y] = start;
                    stack.push(y);
                }
            }
        }
        for x in members.ones() {
            out[x] = members.clone();
        }
    }
    out
}

impl KripkeModel {
    pub fn worlds(&self) -> &[String] {
        &self.worlds
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn world_id(&self, w: &str) -> Option<usize> {
        self.index.get(w).copied()
    }

    pub fn related(&self, agent: &str, w: &str, v: &str) -> bool {
        match (self.agents.iter().position(|a| a == agent), self.world_id(w), self.world_id(v)) {
            (Some(a), Some(w), Some(v)) => self.rel[a][w].contains(v),
            _ => false,
        }
    }

    /// Unordered, loop-free edges of `agent`, by world name.
    pub fn edges(&self, agent: &str) -> Vec<(String, String)> {
        let Some(a) = self.agents.iter().position(|x| x == agent) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (i, row) in self.rel[a].iter().enumerate() {
            for j in row.ones().filter(|&j| j > i) {
                out.push((self.worlds[i].clone(), self.worlds[j].clone()));
            }
        }
        out
    }

    /// Ok when every relation is reflexive, transitive and Euclidean;
    /// otherwise the first failure with a witness.
    pub fn is_s5_model(&self) -> Result<(), KripkeError> {
        let name = |i: usize| self.worlds[i].clone();
        for (a, rows) in self.rel.iter().enumerate() {
            let fail = |property, witness: Vec<usize>| KripkeError::NotS5 {
                agent: self.agents[a].clone(),
                property,
                witness: witness.into_iter().map(name).collect(),
            };
            if let Some(w) = (0..rows.len()).find(|&w| !rows[w].contains(w)) {
                return Err(fail("reflexive", vec![w]));
            }
            for w in 0..rows.len() {
                for v in rows[w].ones() {
                    if let Some(u) = rows[v].difference(&rows[w]).next() {
                        return Err(fail("transitive", vec![w, v, u]));
                    }
                    if let Some(u) = rows[w].difference(&rows[v]).next() {
                        return Err(fail("euclidean", vec![w, v, u]));
                    }
                }
            }
        }
        Ok(())
    }

    fn agent_index(&self, a: &str) -> Result<usize, KripkeError> {
        self.agents.iter().position(|x| x == a).ok_or_else(|| KripkeError::UnknownAgent(a.to_string()))
    }

    fn restrict_to(&self, keep: &FixedBitSet) -> KripkeModel {
        let ids: Vec<usize> = keep.ones().collect();
        let n = ids.len();
        let mut new_id = vec![usize::MAX; self.worlds.len()];
        for (k, &i) in ids.iter().enumerate() {
            new_id[i] = k;
        }
        let map = |s: &FixedBitSet| {
            let mut out = FixedBitSet::with_capacity(n);
            for i in s.ones().filter(|&i| new_id[i] != usize::MAX) {
                out.insert(new_id[i]);
            }
            out
        };
        let worlds: Vec<String> = ids.iter().map(|&i| self.worlds[i].clone()).collect();
        KripkeModel {
            index: worlds.iter().enumerate().map(|(k, w)| (w.clone(), k)).collect(),
            worlds,
            agents: self.agents.clone(),
            rel: self.rel.iter().map(|rows| ids.iter().map(|&i| map(&rows[i])).collect()).collect(),
            val: self.val.iter().map(|(p, s)| (p.clone(), map(s))).collect(),
        }
    }

    /// The submodel of worlds where `f` is true. World names are kept.
    pub fn restrict(&self, f: &Formula) -> Result<KripkeModel, KripkeError> {
        self.is_s5_model()?;
        let keep = self.truth_set(f)?;
        Ok(self.restrict_to(&keep))
    }

    pub fn eval(&self, w: &str, f: &Formula) -> Result<bool, KripkeError> {
        let id = self.world_id(w).ok_or_else(|| KripkeError::UnknownWorld(w.to_string()))?;
        Ok(self.truth_set(f)?.contains(id))
    }

    /// Worlds where `f` is true.
    pub fn truth_set(&self, f: &Formula) -> Result<FixedBitSet, KripkeError> {
        let n = self.worlds.len();
        let full = || {
            let mut s = FixedBitSet::with_capacity(n);
            s.insert_range(..);
            s
        };
        let complement = |s: &FixedBitSet| {
            let mut c = full();
            c.difference_with(s);
            c
        };
        Ok(match f {
            Formula::Atom(p) => self.val.get(p).cloned().unwrap_or_else(|| FixedBitSet::with_capacity(n)),
            Formula::Bot => FixedBitSet::with_capacity(n),
            Formula::Implies(a, b) => {
                let mut s = complement(&self.truth_set(a)?);
                s.union_with(&self.truth_set(b)?);
                s
            }
            Formula::Knows(ag, x) => {
                let a = self.agent_index(ag)?;
                let t = self.truth_set(x)?;
                let mut s = FixedBitSet::with_capacity(n);
                for w in 0..n {
                    if self.rel[a][w].is_subset(&t) {
                        s.insert(w);
                    }
                }
                s
            }
            Formula::Announce(a, b) => {
                let pre = self.truth_set(a)?;
                let sub = self.restrict_to(&pre);
                let inner = sub.truth_set(b)?;
                let mut s = complement(&pre);
                for (k, &w) in pre.ones().collect::<Vec<_>>().iter().enumerate() {
                    if inner.contains(k) {
                        s.insert(w);
                    }
                }
                s
            }
            Formula::Not(x) => complement(&self.truth_set(x)?),
            Formula::And(a, b) => {
                let mut s = self.truth_set(a)?;
                s.intersect_with(&self.truth_set(b)?);
                s
            }
            Formula::Or(a, b) => {
                let mut s = self.truth_set(a)?;
                s.union_with(&self.truth_set(b)?);
                s
            }
            Formula::Iff(a, b) => {
                let (x, y) = (self.truth_set(a)?, self.truth_set(b)?);
                let mut s = full();
                for w in 0..n {
                    if x.contains(w) != y.contains(w) {
                        s.set(w, false);
                    }
                }
                s
            }
        })
    }

    pub fn to_spec(&self) -> KripkeSpec {
        KripkeSpec {
            worlds: self.worlds.clone(),
            relations: self
                .agents
                .iter()
                .zip(&self.rel)
                .map(|(a, rows)| {
                    let pairs = rows
                        .iter()
                        .enumerate()
                        .flat_map(|(i, r)| r.ones().map(move |j| (i, j)))
                        .map(|(i, j)| (self.worlds[i].clone(), self.worlds[j].clone()))
                        .collect();
                    (a.clone(), pairs)
                })
                .collect(),
            valuation: self.val.iter().map(|(p, s)| (p.clone(), s.ones().map(|i| self.worlds[i].clone()).collect())).collect(),
            s5_closure: false,
        }
    }
}
