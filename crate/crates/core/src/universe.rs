//! Finite base spaces: a universe of atoms, fixed rules and optional rule
//! groups. A base is a selection of optional groups; its rules are the
//! fixed rules plus the rules of every selected group.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::OnceLock;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MAX_GROUPS: usize = 20;

/// A selection of optional groups, as a bitmask over group indices.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Base(pub u32);

impl Base {
    pub const EMPTY: Base = Base(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn contains_group(self, g: usize) -> bool {
        self.0 >> g & 1 == 1
    }

    pub fn with_group(self, g: usize) -> Base {
        Base(self.0 | 1 << g)
    }

    pub fn is_subset_of(self, other: Base) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_proper_subset_of(self, other: Base) -> bool {
        self != other && self.is_subset_of(other)
    }

    pub fn union(self, other: Base) -> Base {
        Base(self.0 | other.0)
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

/// A rule `p1, …, pn ⇒ q` over atom indices. Premises are sorted and
/// deduplicated.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rule {
    pub premises: Vec<usize>,
    pub conclusion: usize,
}

impl Rule {
    pub fn new(mut premises: Vec<usize>, conclusion: usize) -> Rule {
        premises.sort_unstable();
        premises.dedup();
        Rule { premises, conclusion }
    }
}

/// Serialized rule, with atoms by name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BaseRule {
    #[serde(default)]
    pub premises: Vec<String>,
    pub conclusion: String,
}

impl BaseRule {
    pub fn new(premises: &[&str], conclusion: &str) -> BaseRule {
        BaseRule { premises: premises.iter().map(|s| s.to_string()).collect(), conclusion: conclusion.to_string() }
    }
}

impl fmt::Display for BaseRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} => {}", self.premises.join(", "), self.conclusion)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub rules: Vec<BaseRule>,
}

/// Serialized universe.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniverseSpec {
    pub atoms: Vec<String>,
    pub agents: Vec<String>,
    #[serde(default)]
    pub fixed_rules: Vec<BaseRule>,
    pub optional_groups: Vec<GroupSpec>,
    /// Optional base names, each a list of group names.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub named_bases: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UniverseError {
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("unknown optional group `{0}`")]
    UnknownGroup(String),
    #[error("unknown base `{0}`")]
    UnknownBase(String),
    #[error("duplicate name `{0}`")]
    Duplicate(String),
    #[error("{count} optional groups exceed the limit of {limit}")]
    TooManyGroups { count: usize, limit: usize },
}

#[derive(Debug)]
pub struct Universe {
    atoms: Vec<String>,
    atom_index: HashMap<String, usize>,
    agents: Vec<String>,
    agent_index: HashMap<String, usize>,
    fixed: Vec<Rule>,
    group_names: Vec<String>,
    groups: Vec<Vec<Rule>>,
    named: Vec<(String, Base)>,
    closures: Vec<OnceLock<FixedBitSet>>,
    consistent: OnceLock<FixedBitSet>,
    rule_ids: OnceLock<RuleIds>,
}

#[derive(Debug)]
struct RuleIds {
    fixed: FixedBitSet,
    groups: Vec<FixedBitSet>,
    rules: Vec<Rule>,
}

fn index_of(names: &[String]) -> Result<HashMap<String, usize>, UniverseError> {
    let mut map = HashMap::new();
    for (i, n) in names.iter().enumerate() {
        if map.insert(n.clone(), i).is_some() {
            return Err(UniverseError::Duplicate(n.clone()));
        }
    }
    Ok(map)
}

impl UniverseSpec {
    pub fn build(&self) -> Result<Universe, UniverseError> {
        self.build_with_limit(DEFAULT_MAX_GROUPS)
    }

    pub fn build_with_limit(&self, max_groups: usize) -> Result<Universe, UniverseError> {
        let max_groups = max_groups.min(30);
        if self.optional_groups.len() > max_groups {
            return Err(UniverseError::TooManyGroups { count: self.optional_groups.len(), limit: max_groups });
        }
        let atom_index = index_of(&self.atoms)?;
        let agent_index = index_of(&self.agents)?;
        let rule = |r: &BaseRule| -> Result<Rule, UniverseError> {
            let look = |a: &String| atom_index.get(a).copied().ok_or_else(|| UniverseError::UnknownAtom(a.clone()));
            let premises = r.premises.iter().map(look).collect::<Result<Vec<_>, _>>()?;
            Ok(Rule::new(premises, look(&r.conclusion)?))
        };
        let fixed = self.fixed_rules.iter().map(rule).collect::<Result<Vec<_>, _>>()?;
        let mut group_names = Vec::new();
        let mut groups = Vec::new();
        for g in &self.optional_groups {
            if group_names.contains(&g.name) {
                return Err(UniverseError::Duplicate(g.name.clone()));
            }
            group_names.push(g.name.clone());
            groups.push(g.rules.iter().map(rule).collect::<Result<Vec<_>, _>>()?);
        }
        let n = 1usize << groups.len();
        let mut u = Universe {
            atoms: self.atoms.clone(),
            atom_index,
            agents: self.agents.clone(),
            agent_index,
            fixed,
            group_names,
            groups,
            named: Vec::new(),
            closures: (0..n).map(|_| OnceLock::new()).collect(),
            consistent: OnceLock::new(),
            rule_ids: OnceLock::new(),
        };
        for (name, gs) in &self.named_bases {
            let b = u.base_from_groups(gs)?;
            u.named.push((name.clone(), b));
        }
        Ok(u)
    }
}

impl Universe {
    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    pub fn group_rules(&self, g: usize) -> &[Rule] {
        &self.groups[g]
    }

    pub fn fixed_rules(&self) -> &[Rule] {
        &self.fixed
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_bases(&self) -> usize {
        1 << self.groups.len()
    }

    pub fn bases(&self) -> impl Iterator<Item = Base> {
        (0..self.num_bases() as u32).map(Base)
    }

    /// The base selecting every optional group.
    pub fn top(&self) -> Base {
        Base((self.num_bases() - 1) as u32)
    }

    pub fn atom_id(&self, name: &str) -> Option<usize> {
        self.atom_index.get(name).copied()
    }

    pub fn agent_id(&self, name: &str) -> Option<usize> {
        self.agent_index.get(name).copied()
    }

    pub fn group_id(&self, name: &str) -> Option<usize> {
        self.group_names.iter().position(|g| g == name)
    }

    pub fn named_bases(&self) -> &[(String, Base)] {
        &self.named
    }

    pub fn add_named_base(&mut self, name: &str, base: Base) {
        self.named.retain(|(n, _)| n != name);
        self.named.push((name.to_string(), base));
    }

    pub fn named_base(&self, name: &str) -> Option<Base> {
        self.named.iter().find(|(n, _)| n == name).map(|(_, b)| *b)
    }

    pub fn base_from_groups<S: AsRef<str>>(&self, groups: &[S]) -> Result<Base, UniverseError> {
        let mut b = Base::EMPTY;
        for g in groups {
            let id = self.group_id(g.as_ref()).ok_or_else(|| UniverseError::UnknownGroup(g.as_ref().to_string()))?;
            b = b.with_group(id);
        }
        Ok(b)
    }

    /// Resolves a base reference: a declared base name, `{}` for the empty
    /// base, or a comma- or plus-separated list of group names.
    pub fn resolve_base(&self, reference: &str) -> Result<Base, UniverseError> {
        let r = reference.trim();
        if let Some(b) = self.named_base(r) {
            return Ok(b);
        }
        let inner = r.trim_start_matches('{').trim_end_matches('}').trim();
        if inner.is_empty() {
            return Ok(Base::EMPTY);
        }
        let parts: Vec<&str> = inner.split([',', '+']).map(str::trim).collect();
        self.base_from_groups(&parts).map_err(|_| UniverseError::UnknownBase(r.to_string()))
    }

    pub fn groups_of(&self, b: Base) -> Vec<&str> {
        (0..self.num_groups()).filter(|&g| b.contains_group(g)).map(|g| self.group_names[g].as_str()).collect()
    }

    /// Display name: the declared name if any, else the group list.
    pub fn base_name(&self, b: Base) -> String {
        if let Some((n, _)) = self.named.iter().find(|(_, x)| *x == b) {
            return n.clone();
        }
        format!("{{{}}}", self.groups_of(b).join(","))
    }

    /// The rules of a base, fixed rules first.
    pub fn rules_of(&self, b: Base) -> Vec<&Rule> {
        let mut out: Vec<&Rule> = self.fixed.iter().collect();
        for g in 0..self.num_groups() {
            if b.contains_group(g) {
                out.extend(self.groups[g].iter());
            }
        }
        out
    }

    pub fn rule_to_spec(&self, r: &Rule) -> BaseRule {
        BaseRule { premises: r.premises.iter().map(|&p| self.atoms[p].clone()).collect(), conclusion: self.atoms[r.conclusion].clone() }
    }

    /// Least set of atoms closed under the rules of `b`, by forward chaining
    /// with premise counters. Cached per base.
    pub fn closure(&self, b: Base) -> &FixedBitSet {
        self.closures[b.index()].get_or_init(|| self.compute_closure(b))
    }

    fn compute_closure(&self, b: Base) -> FixedBitSet {
        let rules = self.rules_of(b);
        let mut derived = FixedBitSet::with_capacity(self.atoms.len());
        let mut missing: Vec<usize> = rules.iter().map(|r| r.premises.len()).collect();
        let mut watchers: Vec<Vec<usize>> = vec![Vec::new(); self.atoms.len()];
        let mut queue = Vec::new();
        for (i, r) in rules.iter().enumerate() {
            for &p in &r.premises {
                watchers[p].push(i);
            }
            if r.premises.is_empty() && !derived.put(r.conclusion) {
                queue.push(r.conclusion);
            }
        }
        while let Some(a) = queue.pop() {
            for &i in &watchers[a] {
                missing[i] -= 1;
                if missing[i] == 0 {
                    let c = rules[i].conclusion;
                    if !derived.put(c) {
                        queue.push(c);
                    }
                }
            }
        }
        derived
    }

    pub fn derives(&self, b: Base, atom: usize) -> bool {
        self.closure(b).contains(atom)
    }

    /// Consistency flags for every base, indexed by base id.
    pub fn consistent_set(&self) -> &FixedBitSet {
        self.consistent.get_or_init(|| {
            let mut s = FixedBitSet::with_capacity(self.num_bases());
            let all = self.atoms.len();
            for b in self.bases() {
                if self.closure(b).count_ones(..) < all {
                    s.insert(b.index());
                }
            }
            s
        })
    }

    /// A base is consistent iff its closure misses some atom.
    pub fn is_consistent(&self, b: Base) -> bool {
        self.consistent_set().contains(b.index())
    }

    /// Consistent, and adding any single unselected group makes it
    /// inconsistent.
    pub fn is_max_consistent(&self, b: Base) -> bool {
        self.is_consistent(b) && (0..self.num_groups()).all(|g| b.contains_group(g) || !self.is_consistent(b.with_group(g)))
    }

    pub fn max_consistent_bases(&self) -> Vec<Base> {
        self.bases().filter(|&b| self.is_max_consistent(b)).collect()
    }

    /// Supersets of `b` in increasing id order, `b` first.
    pub fn supersets(&self, b: Base, consistent_only: bool) -> Supersets<'_> {
        let comp = (self.num_bases() as u32 - 1) & !b.0;
        Supersets { u: self, base: b.0, comp, next: Some(0), consistent_only }
    }

    /// Subsets of `b`, the empty base first.
    pub fn subsets(&self, b: Base) -> impl Iterator<Item = Base> {
        let mask = b.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == mask { None } else { Some((cur | !mask).wrapping_add(1) & mask) };
            Some(Base(cur))
        })
    }

    /// Every consistent base missing an atom has a maximal consistent
    /// extension that still misses it. Classical reasoning over the
    /// finite space relies on this.
    pub fn is_atom_complete(&self) -> bool {
        let max = self.max_consistent_bases();
        self.bases().filter(|&b| self.is_consistent(b)).all(|b| {
            let cl = self.closure(b);
            (0..self.atoms.len()).filter(|&p| !cl.contains(p)).all(|p| max.iter().any(|&m| b.is_subset_of(m) && !self.derives(m, p)))
        })
    }

    fn rule_ids(&self) -> &RuleIds {
        self.rule_ids.get_or_init(|| {
            let mut rules: Vec<Rule> = Vec::new();
            let mut id = |r: &Rule| match rules.iter().position(|x| x == r) {
                Some(i) => i,
                None => {
                    rules.push(r.clone());
                    rules.len() - 1
                }
            };
            let fixed_ids: Vec<usize> = self.fixed.iter().map(&mut id).collect();
            let group_ids: Vec<Vec<usize>> = self.groups.iter().map(|g| g.iter().map(&mut id).collect()).collect();
            let set = |ids: &[usize], n: usize| {
                let mut s = FixedBitSet::with_capacity(n);
                ids.iter().for_each(|&i| s.insert(i));
                s
            };
            let n = rules.len();
            RuleIds { fixed: set(&fixed_ids, n), groups: group_ids.iter().map(|g| set(g, n)).collect(), rules }
        })
    }

    /// The rule set of a base as a bitset over distinct rules.
    pub fn rule_set(&self, b: Base) -> FixedBitSet {
        let ids = self.rule_ids();
        let mut s = ids.fixed.clone();
        for g in 0..self.num_groups() {
            if b.contains_group(g) {
                s.union_with(&ids.groups[g]);
            }
        }
        s
    }

    pub fn rule_by_id(&self, id: usize) -> &Rule {
        &self.rule_ids().rules[id]
    }

    pub fn num_distinct_rules(&self) -> usize {
        self.rule_ids().rules.len()
    }

    pub fn to_spec(&self) -> UniverseSpec {
        UniverseSpec {
            atoms: self.atoms.clone(),
            agents: self.agents.clone(),
            fixed_rules: self.fixed.iter().map(|r| self.rule_to_spec(r)).collect(),
            optional_groups: self
                .groups
                .iter()
                .zip(&self.group_names)
                .map(|(rs, n)| GroupSpec { name: n.clone(), rules: rs.iter().map(|r| self.rule_to_spec(r)).collect() })
                .collect(),
            named_bases: self.named.iter().map(|(n, b)| (n.clone(), self.groups_of(*b).iter().map(|s| s.to_string()).collect())).collect(),
        }
    }
}

pub struct Supersets<'u> {
    u: &'u Universe,
    base: u32,
    comp: u32,
    next: Option<u32>,
    consistent_only: bool,
}

impl Iterator for Supersets<'_> {
    type Item = Base;
    fn next(&mut self) -> Option<Base> {
        loop {
            let cur = self.next?;
            self.next = if cur == self.comp { None } else { Some((cur | !self.comp).wrapping_add(1) & self.comp) };
            let b = Base(self.base | cur);
            if !self.consistent_only || self.u.is_consistent(b) {
                return Some(b);
            }
        }
    }
}

/// Builders for universes used across tests and scenarios.
pub mod builders {
    use super::*;

    /// Atom never concluded except by explosion, so that deriving every
    /// listed atom is not by itself inconsistent.
    pub const SENTINEL: &str = "sentinel";

    /// One axiom group `⇒p` and one blocking group `{p ⇒ q : q}` per atom,
    /// plus [`SENTINEL`].
    pub fn classical(atoms: &[&str], agents: &[&str]) -> UniverseSpec {
        let mut all: Vec<&str> = atoms.to_vec();
        all.push(SENTINEL);
        let mut groups = Vec::new();
        for &p in atoms {
            groups.push(GroupSpec { name: p.to_string(), rules: vec![BaseRule::new(&[], p)] });
            groups.push(GroupSpec { name: format!("not_{p}"), rules: all.iter().map(|&q| BaseRule::new(&[p], q)).collect() });
        }
        UniverseSpec {
            atoms: all.iter().map(|s| s.to_string()).collect(),
            agents: agents.iter().map(|s| s.to_string()).collect(),
            fixed_rules: vec![],
            optional_groups: groups,
            named_bases: BTreeMap::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Universe {
        UniverseSpec {
            atoms: vec!["p".into(), "q".into(), "r".into()],
            agents: vec!["a".into()],
            fixed_rules: vec![BaseRule::new(&["p", "q"], "r")],
            optional_groups: vec![
                GroupSpec { name: "p".into(), rules: vec![BaseRule::new(&[], "p")] },
                GroupSpec { name: "q".into(), rules: vec![BaseRule::new(&[], "q")] },
            ],
            named_bases: BTreeMap::new(),
        }
        .build()
        .unwrap()
    }

    #[test]
    fn closure_chains_through_fixed_rules() {
        let u = toy();
        assert_eq!(u.closure(Base(0b01)).ones().collect::<Vec<_>>(), vec![0]);
        assert_eq!(u.closure(Base(0b11)).ones().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(u.is_consistent(Base(0b01)));
        assert!(!u.is_consistent(Base(0b11)));
        assert!(u.is_max_consistent(Base(0b01)));
        assert!(!u.is_max_consistent(Base(0)));
    }

    #[test]
    fn superset_enumeration_includes_base() {
        let u = toy();
        let all: Vec<Base> = u.supersets(Base(0b01), false).collect();
        assert_eq!(all, vec![Base(0b01), Base(0b11)]);
        let cons: Vec<Base> = u.supersets(Base(0), true).collect();
        assert_eq!(cons, vec![Base(0), Base(1), Base(2)]);
        let subs: Vec<Base> = u.subsets(Base(0b11)).collect();
        assert_eq!(subs, vec![Base(0), Base(1), Base(2), Base(3)]);
    }

    #[test]
    fn resolve_base_references() {
        let u = toy();
        assert_eq!(u.resolve_base("{}").unwrap(), Base(0));
        assert_eq!(u.resolve_base("p,q").unwrap(), Base(3));
        assert_eq!(u.resolve_base("{q}").unwrap(), Base(2));
        assert!(u.resolve_base("z").is_err());
    }

    #[test]
    fn group_limit_enforced() {
        let spec = builders::classical(&["a", "b", "c"], &["x"]);
        assert!(matches!(spec.build_with_limit(4), Err(UniverseError::TooManyGroups { count: 6, limit: 4 })));
        assert!(matches!(
            UniverseSpec { atoms: vec!["p".into()], fixed_rules: vec![BaseRule::new(&[], "z")], ..Default::default() }.build(),
            Err(UniverseError::UnknownAtom(_))
        ));
    }

    #[test]
    fn classical_universe_is_atom_complete() {
        let u = builders::classical(&["p", "q"], &["a"]).build().unwrap();
        assert_eq!(u.bases().filter(|&b| u.is_consistent(b)).count(), 9);
        assert!(u.is_atom_complete());
        let bare = UniverseSpec {
            atoms: vec!["p".into(), "q".into()],
            agents: vec![],
            fixed_rules: vec![],
            optional_groups: vec![GroupSpec { name: "p".into(), rules: vec![BaseRule::new(&[], "p")] }],
            named_bases: BTreeMap::new(),
        }
        .build()
        .unwrap();
        assert!(!bare.is_atom_complete());
    }
}
