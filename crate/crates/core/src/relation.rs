//! Relations between bases, one per agent, and the structural conditions a
//! relation must meet to serve as an epistemic accessibility relation over
//! a base space.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::universe::{Base, BaseRule, Universe, UniverseError};
use crate::update::complete;

const _: () = assert!(usize::BITS == 64);

/// A binary relation over all bases of a universe, stored as one row
/// bitset per base.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentRelation {
    rows: Vec<FixedBitSet>,
}

impl AgentRelation {
    pub fn empty(n: usize) -> AgentRelation {
        AgentRelation { rows: (0..n).map(|_| FixedBitSet::with_capacity(n)).collect() }
    }

    pub fn num_bases(&self) -> usize {
        self.rows.len()
    }

    pub fn insert(&mut self, b: Base, c: Base) {
        self.rows[b.index()].insert(c.index());
    }

    /// Inserts both directions.
    pub fn link(&mut self, b: Base, c: Base) {
        self.insert(b, c);
        self.insert(c, b);
    }

    pub fn contains(&self, b: Base, c: Base) -> bool {
        self.rows[b.index()].contains(c.index())
    }

    pub fn row(&self, b: Base) -> &FixedBitSet {
        &self.rows[b.index()]
    }

    pub fn row_mut(&mut self, b: Base) -> &mut FixedBitSet {
        &mut self.rows[b.index()]
    }

    pub fn successors(&self, b: Base) -> impl Iterator<Item = Base> + '_ {
        self.rows[b.index()].ones().map(|i| Base(i as u32))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Base, Base)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, r)| r.ones().map(move |j| (Base(i as u32), Base(j as u32))))
    }

    pub fn num_pairs(&self) -> usize {
        self.rows.iter().map(|r| r.count_ones(..)).sum()
    }

    /// Bases occurring in some pair.
    pub fn domain(&self) -> FixedBitSet {
        let mut d = FixedBitSet::with_capacity(self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            if !r.is_clear() {
                d.insert(i);
                d.union_with(r);
            }
        }
        d
    }

    /// Equivalence closure over the bases in `nodes`: the pairs given,
    /// plus reflexive loops on every node, closed under symmetry and
    /// transitivity.
    pub fn equivalence_closure(n: usize, nodes: &FixedBitSet, pairs: &[(Base, Base)]) -> AgentRelation {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let next = p[y];
                p[y] = r;
                y = next;
            }
            r
        }
        let mut all = nodes.clone();
        for &(b, c) in pairs {
            all.insert(b.index());
            all.insert(c.index());
            let (rb, rc) = (find(&mut parent, b.index()), find(&mut parent, c.index()));
            parent[rb] = rc;
        }
        let mut classes: HashMap<usize, FixedBitSet> = HashMap::new();
        for i in all.ones() {
            let r = find(&mut parent, i);
            classes.entry(r).or_insert_with(|| FixedBitSet::with_capacity(n)).insert(i);
        }
        let mut rel = AgentRelation::empty(n);
        for i in all.ones() {
            let r = find(&mut parent, i);
            rel.rows[i] = classes[&r].clone();
        }
        rel
    }
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// One relation per agent of a universe, tagged with a process-unique id
/// used as a cache key.
#[derive(Clone, Debug)]
pub struct AgentRelationSet {
    id: u64,
    relations: Vec<AgentRelation>,
}

impl PartialEq for AgentRelationSet {
    fn eq(&self, other: &Self) -> bool {
        self.relations == other.relations
    }
}

impl AgentRelationSet {
    pub fn new(relations: Vec<AgentRelation>) -> AgentRelationSet {
        AgentRelationSet { id: NEXT_ID.fetch_add(1, Ordering::Relaxed), relations }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn agent(&self, a: usize) -> &AgentRelation {
        &self.relations[a]
    }

    pub fn relations(&self) -> &[AgentRelation] {
        &self.relations
    }

    pub fn num_agents(&self) -> usize {
        self.relations.len()
    }

    pub fn into_relations(self) -> Vec<AgentRelation> {
        self.relations
    }
}

/// One of the seven structural conditions.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Inconsistent bases reach some base, and only inconsistent ones.
    InconsistentClosed,
    /// Consistent bases reach only consistent ones.
    ConsistentClosed,
    /// Related bases extend to related supersets.
    UpwardCover,
    /// Related bases, the target consistent, restrict to related subsets.
    DownwardCover,
    Reflexive,
    Transitive,
    Euclidean,
}

impl Condition {
    pub const ALL: [Condition; 7] = [
        Condition::InconsistentClosed,
        Condition::ConsistentClosed,
        Condition::UpwardCover,
        Condition::DownwardCover,
        Condition::Reflexive,
        Condition::Transitive,
        Condition::Euclidean,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Condition::InconsistentClosed => "a",
            Condition::ConsistentClosed => "b",
            Condition::UpwardCover => "c",
            Condition::DownwardCover => "d",
            Condition::Reflexive => "reflexive",
            Condition::Transitive => "transitive",
            Condition::Euclidean => "euclidean",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub condition: Condition,
    pub holds: bool,
    /// Smallest violating tuple in base-id order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<Base>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub verdicts: Vec<Verdict>,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.verdicts.iter().all(|v| v.holds)
    }

    pub fn verdict(&self, c: Condition) -> &Verdict {
        self.verdicts.iter().find(|v| v.condition == c).expect("all conditions reported")
    }

    pub fn first_failure(&self) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| !v.holds)
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.verdicts {
            write!(f, "{}={} ", v.condition.label(), if v.holds { "ok" } else { "FAIL" })?;
            if let Some(w) = &v.witness {
                write!(f, "{:?} ", w.iter().map(|b| b.0).collect::<Vec<_>>())?;
            }
        }
        Ok(())
    }
}

// Bit masks selecting positions whose bit `i` is clear, for i < 6.
const LOW_MASKS: [usize; 6] = [
    0x5555_5555_5555_5555,
    0x3333_3333_3333_3333,
    0x0F0F_0F0F_0F0F_0F0F,
    0x00FF_00FF_00FF_00FF,
    0x0000_FFFF_0000_FFFF,
    0x0000_0000_FFFF_FFFF,
];

/// Adds every subset of a member, over a lattice of `2^groups` bases.
pub fn down_closure(set: &FixedBitSet, groups: usize) -> FixedBitSet {
    let mut out = set.clone();
    down_close_words(out.as_mut_slice(), groups);
    out
}

/// In-place [`down_closure`] on the words of a bitset.
pub fn down_close_words(words: &mut [usize], groups: usize) {
    for (i, mask) in LOW_MASKS.iter().enumerate().take(groups) {
        let s = 1 << i;
        for w in words.iter_mut() {
            *w |= (*w >> s) & mask;
        }
    }
    for i in 6..groups.max(6) {
        let k = 1 << (i - 6);
        for j in 0..words.len() {
            if j & k == 0 {
                words[j] |= words[j | k];
            }
        }
    }
}

/// Adds every superset of a member, over a lattice of `2^groups` bases.
pub fn up_closure(set: &FixedBitSet, groups: usize) -> FixedBitSet {
    let mut out = set.clone();
    let words = out.as_mut_slice();
    for (i, mask) in LOW_MASKS.iter().enumerate().take(groups) {
        let s = 1 << i;
        for w in words.iter_mut() {
            *w |= (*w & mask) << s;
        }
    }
    for i in 6..groups.max(6) {
        let k = 1 << (i - 6);
        for j in 0..words.len() {
            if j & k == 0 {
                words[j | k] |= words[j];
            }
        }
    }
    if groups < 6 {
        let n = 1usize << groups;
        for w in words.iter_mut() {
            *w &= (1usize << n) - 1;
        }
    }
    out
}

fn first_diff(a: &FixedBitSet, b: &FixedBitSet) -> Option<usize> {
    a.difference(b).next()
}

/// Checks all seven conditions for one agent's relation.
pub fn check_modal_conditions(u: &Universe, rel: &AgentRelation) -> ConditionReport {
    let n = u.num_bases();
    let g = u.num_groups();
    let cons = u.consistent_set();
    let mut verdicts = Vec::with_capacity(7);
    let mut push = |c: Condition, w: Option<Vec<Base>>| verdicts.push(Verdict { condition: c, holds: w.is_none(), witness: w });
    let bases = || (0..n as u32).map(Base);

    // (a)
    let w = bases().filter(|b| !cons.contains(b.index())).find_map(|b| {
        let row = rel.row(b);
        match row.ones().find(|&c| cons.contains(c)) {
            Some(c) => Some(vec![b, Base(c as u32)]),
            None if row.is_clear() => Some(vec![b]),
            None => None,
        }
    });
    push(Condition::InconsistentClosed, w);

    // (b)
    let w = bases()
        .filter(|b| cons.contains(b.index()))
        .find_map(|b| rel.row(b).ones().find(|&c| !cons.contains(c)).map(|c| vec![b, Base(c as u32)]));
    push(Condition::ConsistentClosed, w);

    // (c): every C with R B C is below some successor of each consistent D ⊇ B.
    let mut down_rows: Vec<Option<FixedBitSet>> = vec![None; n];
    let mut w = None;
    for b in bases().filter(|b| cons.contains(b.index())) {
        let row = rel.row(b);
        if row.is_clear() {
            continue;
        }
        let mut best: Option<(usize, Base)> = None;
        for d in u.supersets(b, true) {
            let dr = down_rows[d.index()].get_or_insert_with(|| down_closure(rel.row(d), g));
            if let Some(c) = first_diff(row, dr) {
                if best.is_none_or(|(bc, _)| c < bc) {
                    best = Some((c, d));
                }
            }
        }
        if let Some((c, d)) = best {
            w = Some(vec![b, Base(c as u32), d]);
            break;
        }
    }
    push(Condition::UpwardCover, w);

    // (d): every consistent C with R B C is above some successor of each D ⊆ B.
    let mut up_rows: Vec<Option<FixedBitSet>> = vec![None; n];
    let mut w = None;
    for b in bases() {
        let mut row = rel.row(b).clone();
        row.intersect_with(cons);
        if row.is_clear() {
            continue;
        }
        let mut best: Option<(usize, Base)> = None;
        for d in u.subsets(b) {
            let ur = up_rows[d.index()].get_or_insert_with(|| up_closure(rel.row(d), g));
            if let Some(c) = first_diff(&row, ur) {
                if best.is_none_or(|(bc, _)| c < bc) {
                    best = Some((c, d));
                }
            }
        }
        if let Some((c, d)) = best {
            w = Some(vec![b, Base(c as u32), d]);
            break;
        }
    }
    push(Condition::DownwardCover, w);

    let refl = bases().find(|b| !rel.contains(*b, *b)).map(|b| vec![b]);
    let equivalence = refl.is_none() && rows_constant_on_classes(rel);
    push(Condition::Reflexive, refl);
    if equivalence {
        push(Condition::Transitive, None);
        push(Condition::Euclidean, None);
    } else {
        let trans = bases().find_map(|b| {
            rel.row(b).ones().find_map(|c| first_diff(rel.row(Base(c as u32)), rel.row(b)).map(|d| vec![b, Base(c as u32), Base(d as u32)]))
        });
        push(Condition::Transitive, trans);
        let eucl = bases().find_map(|b| {
            rel.row(b).ones().find_map(|c| first_diff(rel.row(b), rel.row(Base(c as u32))).map(|d| vec![b, Base(c as u32), Base(d as u32)]))
        });
        push(Condition::Euclidean, eucl);
    }
    ConditionReport { verdicts }
}

/// True when every base's successors all have the same row as the base.
fn rows_constant_on_classes(rel: &AgentRelation) -> bool {
    let mut ids: HashMap<&[usize], u32> = HashMap::new();
    let row_id: Vec<u32> = rel
        .rows
        .iter()
        .map(|r| {
            let next = ids.len() as u32;
            *ids.entry(r.as_slice()).or_insert(next)
        })
        .collect();
    rel.rows.iter().enumerate().all(|(i, r)| r.ones().all(|j| row_id[j] == row_id[i]))
}

/// Quick yes/no form of [`check_modal_conditions`].
pub fn is_modal(u: &Universe, rel: &AgentRelation) -> bool {
    check_modal_conditions(u, rel).all_hold()
}

/// Bases reachable from `b` through any agent's relation, `b` included.
pub fn reachable_set(rs: &AgentRelationSet, b: Base) -> FixedBitSet {
    let n = rs.relations.first().map_or(b.index() + 1, |r| r.num_bases());
    let mut seen = FixedBitSet::with_capacity(n);
    seen.insert(b.index());
    let mut stack = vec![b.index()];
    while let Some(x) = stack.pop() {
        for rel in &rs.relations {
            for y in rel.rows[x].ones() {
                if !seen.put(y) {
                    stack.push(y);
                }
            }
        }
    }
    seen
}

/// Bases occurring in any pair of any agent's relation.
pub fn relation_domain(rs: &AgentRelationSet) -> Vec<Base> {
    let Some(first) = rs.relations.first() else {
        return Vec::new();
    };
    let mut d = FixedBitSet::with_capacity(first.num_bases());
    for r in &rs.relations {
        d.union_with(&r.domain());
    }
    d.ones().map(|i| Base(i as u32)).collect()
}

/// Union of the rules of every base in the relation domain.
pub fn rule_union(u: &Universe, rs: &AgentRelationSet) -> Vec<BaseRule> {
    let dom = relation_domain(rs);
    let mut ids = FixedBitSet::with_capacity(u.num_distinct_rules());
    for b in dom {
        ids.union_with(&u.rule_set(b));
    }
    let mut out: Vec<BaseRule> = ids.ones().map(|i| u.rule_to_spec(u.rule_by_id(i))).collect();
    out.sort();
    out
}

/// Edges between named core bases for each agent, before saturation.
#[derive(Clone, Debug, Default)]
pub struct CoreRelation {
    /// Extra core bases with no edges; edge endpoints are always core.
    pub core_bases: Vec<Base>,
    /// Per agent, in universe agent order.
    pub edges: Vec<Vec<(Base, Base)>>,
}

#[derive(Debug, Clone, Error)]
pub enum SaturationError {
    #[error("core base {0:?} is inconsistent")]
    InconsistentCore(Base),
    #[error("expected edges for {expected} agents, got {got}")]
    AgentCount { expected: usize, got: usize },
    #[error("saturated relation for agent `{agent}` fails: {report}")]
    Failed { agent: String, report: ConditionReport },
    #[error("completion for agent `{agent}` separates core bases {pair:?}")]
    SplitCore { agent: String, pair: (Base, Base) },
}

/// How a relation fixed on a core layer is extended to the whole lattice.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Completion {
    /// Subset and superset wiring by the cover rules of the update
    /// construction.
    Steps,
    /// Coarsest partition refinement that separates the core classes and
    /// meets the subset and superset conditions.
    Refine,
    /// `Steps`, falling back to `Refine` when the result is not modal.
    #[default]
    Auto,
}

/// A saturated relation set and the completion that produced it.
#[derive(Clone, Debug)]
pub struct Saturated {
    pub relations: AgentRelationSet,
    pub completion: Completion,
}

fn core_layer(u: &Universe, core: &CoreRelation) -> Result<FixedBitSet, SaturationError> {
    if core.edges.len() != u.agents().len() {
        return Err(SaturationError::AgentCount { expected: u.agents().len(), got: core.edges.len() });
    }
    let mut layer = FixedBitSet::with_capacity(u.num_bases());
    for &b in &core.core_bases {
        layer.insert(b.index());
    }
    for &(b, c) in core.edges.iter().flatten() {
        layer.insert(b.index());
        layer.insert(c.index());
    }
    if let Some(b) = layer.ones().map(|i| Base(i as u32)).find(|&b| !u.is_consistent(b)) {
        return Err(SaturationError::InconsistentCore(b));
    }
    Ok(layer)
}

fn first_failure(u: &Universe, rels: &[AgentRelation]) -> Option<SaturationError> {
    rels.iter().enumerate().find_map(|(a, rel)| {
        let report = check_modal_conditions(u, rel);
        (!report.all_hold()).then(|| SaturationError::Failed { agent: u.agents()[a].clone(), report })
    })
}

/// Closes the core edges to an equivalence on the core layer, completes
/// the rest of the lattice around it and verifies the result.
pub fn saturate_core_relation(u: &Universe, core: &CoreRelation, completion: Completion) -> Result<Saturated, SaturationError> {
    let layer = core_layer(u, core)?;
    let n = u.num_bases();
    let star: Vec<AgentRelation> = core.edges.iter().map(|es| AgentRelation::equivalence_closure(n, &layer, es)).collect();
    let steps = || {
        let (_, r) = complete(u, &star, &layer);
        match first_failure(u, &r) {
            Some(e) => Err(e),
            None => Ok(Saturated { relations: AgentRelationSet::new(r), completion: Completion::Steps }),
        }
    };
    let refine = || {
        let mut r = Vec::new();
        for (a, s) in star.iter().enumerate() {
            r.push(
                refine_completion(u, &layer, s)
                    .map_err(|(x, y)| SaturationError::SplitCore { agent: u.agents()[a].clone(), pair: (x, y) })?,
            );
        }
        match first_failure(u, &r) {
            Some(e) => Err(e),
            None => Ok(Saturated { relations: AgentRelationSet::new(r), completion: Completion::Refine }),
        }
    };
    match completion {
        Completion::Steps => steps(),
        Completion::Refine => refine(),
        Completion::Auto => steps().or_else(|_| refine()),
    }
}

/// The coarsest equivalence on the consistent bases that keeps the classes
/// of `star` on `layer` whole and apart, puts no other base with them,
/// and in which related bases reach the same classes through their subsets
/// and through their consistent supersets. Inconsistent bases form one
/// clique. Fails with a pair of core bases the refinement separated.
pub fn refine_completion(u: &Universe, layer: &FixedBitSet, star: &AgentRelation) -> Result<AgentRelation, (Base, Base)> {
    let block = refine_blocks(u, layer, star);
    for x in layer.ones() {
        if let Some(y) = star.row(Base(x as u32)).ones().find(|&y| block[y] != block[x]) {
            return Err((Base(x as u32), Base(y as u32)));
        }
    }
    Ok(blocks_to_relation(u, &block))
}

/// As [`refine_completion`], keeping the result when classes of `star` are
/// split.
pub fn coarsest_refinement(u: &Universe, layer: &FixedBitSet, star: &AgentRelation) -> AgentRelation {
    blocks_to_relation(u, &refine_blocks(u, layer, star))
}

fn refine_blocks(u: &Universe, layer: &FixedBitSet, star: &AgentRelation) -> Vec<u32> {
    let n = u.num_bases();
    let groups = u.num_groups();
    let cons = u.consistent_set();
    const NONE: u32 = u32::MAX;
    let mut block = vec![NONE; n];
    let mut ids: HashMap<usize, u32> = HashMap::new();
    let rest = 0u32;
    for x in cons.ones() {
        block[x] = if layer.contains(x) {
            let rep = star.row(Base(x as u32)).minimum().unwrap_or(x);
            let next = ids.len() as u32 + 1;
            *ids.entry(rep).or_insert(next)
        } else {
            rest
        };
    }
    let mut count = ids.len() + 1;
    loop {
        let mut down = vec![FixedBitSet::new(); n];
        for x in cons.ones() {
            let mut s = FixedBitSet::with_capacity(count);
            s.insert(block[x] as usize);
            for g in (0..groups).filter(|g| x >> g & 1 == 1) {
                s.union_with(&down[x & !(1 << g)]);
            }
            down[x] = s;
        }
        let mut up = vec![FixedBitSet::new(); n];
        for x in (0..n).rev().filter(|&x| cons.contains(x)) {
            let mut s = FixedBitSet::with_capacity(count);
            s.insert(block[x] as usize);
            for g in (0..groups).filter(|g| x >> g & 1 == 0) {
                let y = x | 1 << g;
                if cons.contains(y) {
                    s.union_with(&up[y]);
                }
            }
            up[x] = s;
        }
        let mut sigs: HashMap<(u32, FixedBitSet, FixedBitSet), u32> = HashMap::new();
        let mut next = vec![NONE; n];
        for x in cons.ones() {
            let key = (block[x], std::mem::take(&mut down[x]), std::mem::take(&mut up[x]));
            let fresh = sigs.len() as u32;
            next[x] = *sigs.entry(key).or_insert(fresh);
        }
        let stable = sigs.len() == count;
        count = sigs.len();
        block = next;
        if stable {
            return block;
        }
    }
}

fn blocks_to_relation(u: &Universe, block: &[u32]) -> AgentRelation {
    let n = u.num_bases();
    let cons = u.consistent_set();
    let mut rel = clique_rows(u);
    let mut members: HashMap<u32, FixedBitSet> = HashMap::new();
    for x in cons.ones() {
        members.entry(block[x]).or_insert_with(|| FixedBitSet::with_capacity(n)).insert(x);
    }
    for x in cons.ones() {
        rel.rows[x] = members[&block[x]].clone();
    }
    rel
}

/// One agent's relation in file form. Edge endpoints are base references
/// (see [`Universe::resolve_base`]). Core edges are saturated on load;
/// `raw` edges are taken as the complete relation, as directed pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub agent: String,
    #[serde(default)]
    pub core_edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub raw: bool,
}

#[derive(Debug, Clone, Error)]
pub enum RelationFileError {
    #[error(transparent)]
    Universe(#[from] UniverseError),
    #[error(transparent)]
    Saturation(#[from] SaturationError),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("agent `{0}` is listed twice")]
    DuplicateAgent(String),
    #[error("raw and saturated relations cannot be mixed")]
    MixedRaw,
}

/// Builds a relation set from per-agent specs. Agents without a spec get
/// no core edges, or the empty relation when the specs are raw.
pub fn load_relation_set(u: &Universe, specs: &[RelationSpec], completion: Completion) -> Result<Saturated, RelationFileError> {
    let raw = specs.first().is_some_and(|s| s.raw);
    if specs.iter().any(|s| s.raw != raw) {
        return Err(RelationFileError::MixedRaw);
    }
    let mut edges: Vec<Option<Vec<(Base, Base)>>> = vec![None; u.agents().len()];
    for spec in specs {
        let a = u.agent_id(&spec.agent).ok_or_else(|| RelationFileError::UnknownAgent(spec.agent.clone()))?;
        if edges[a].is_some() {
            return Err(RelationFileError::DuplicateAgent(spec.agent.clone()));
        }
        let mut es = Vec::with_capacity(spec.core_edges.len());
        for (x, y) in &spec.core_edges {
            es.push((u.resolve_base(x)?, u.resolve_base(y)?));
        }
        edges[a] = Some(es);
    }
    let edges: Vec<Vec<(Base, Base)>> = edges.into_iter().map(Option::unwrap_or_default).collect();
    if raw {
        let rels = edges
            .iter()
            .map(|es| {
                let mut r = AgentRelation::empty(u.num_bases());
                for &(x, y) in es {
                    r.insert(x, y);
                }
                r
            })
            .collect();
        return Ok(Saturated { relations: AgentRelationSet::new(rels), completion });
    }
    let core = CoreRelation { core_bases: Vec::new(), edges };
    Ok(saturate_core_relation(u, &core, completion)?)
}

/// The raw file form of `rs`: every pair, named.
pub fn relation_set_to_specs(u: &Universe, rs: &AgentRelationSet) -> Vec<RelationSpec> {
    rs.relations()
        .iter()
        .zip(u.agents())
        .map(|(r, agent)| RelationSpec {
            agent: agent.clone(),
            core_edges: r.pairs().map(|(x, y)| (u.base_name(x), u.base_name(y))).collect(),
            raw: true,
        })
        .collect()
}

/// How relation sets are drawn from a universe.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationMode {
    /// Every partition of the consistent bases, per agent, plus the
    /// inconsistent clique, kept when it meets all conditions.
    Exhaustive,
    /// Random partitions of the maximal consistent bases, saturated.
    Sample { n: usize, seed: u64 },
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RelationError {
    #[error("exhaustive enumeration needs at most {max_groups} groups and {max_agents} agents")]
    TooLarge { max_groups: usize, max_agents: usize },
    #[error("enumeration needs {needed} candidates, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
}

pub const EXHAUSTIVE_MAX_GROUPS: usize = 4;
pub const EXHAUSTIVE_MAX_AGENTS: usize = 2;
pub const DEFAULT_BUDGET: u128 = 2_000_000;

pub fn bell(n: usize) -> u128 {
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = vec![*row.last().unwrap()];
        for &x in &row {
            let v = next.last().unwrap().saturating_add(x);
            next.push(v);
        }
        row = next;
    }
    row[0]
}

/// Relation sets of a universe under the given mode.
pub fn relation_sets(u: &Universe, mode: RelationMode, budget: u128) -> Result<Vec<Arc<AgentRelationSet>>, RelationError> {
    match mode {
        RelationMode::Exhaustive => exhaustive(u, budget),
        RelationMode::Sample { n, seed } => Ok(sampled(u, n, seed)),
    }
}

fn clique_rows(u: &Universe) -> AgentRelation {
    let n = u.num_bases();
    let cons = u.consistent_set();
    let mut inc = FixedBitSet::with_capacity(n);
    inc.insert_range(..);
    inc.difference_with(cons);
    let mut rel = AgentRelation::empty(n);
    for i in inc.ones() {
        rel.rows[i] = inc.clone();
    }
    rel
}

fn exhaustive(u: &Universe, budget: u128) -> Result<Vec<Arc<AgentRelationSet>>, RelationError> {
    if u.num_groups() > EXHAUSTIVE_MAX_GROUPS || u.agents().len() > EXHAUSTIVE_MAX_AGENTS {
        return Err(RelationError::TooLarge { max_groups: EXHAUSTIVE_MAX_GROUPS, max_agents: EXHAUSTIVE_MAX_AGENTS });
    }
    let cons: Vec<usize> = u.consistent_set().ones().collect();
    let needed = bell(cons.len());
    if needed > budget {
        return Err(RelationError::BudgetExceeded { needed, budget });
    }
    let base = clique_rows(u);
    let mut valid = Vec::new();
    let k = cons.len();
    let mut labels = vec![0usize; k];
    let mut maxes = vec![0usize; k];
    loop {
        let mut rel = base.clone();
        let blocks = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut members = vec![FixedBitSet::with_capacity(u.num_bases()); blocks];
        for (i, &l) in labels.iter().enumerate() {
            members[l].insert(cons[i]);
        }
        for (i, &l) in labels.iter().enumerate() {
            rel.rows[cons[i]] = members[l].clone();
        }
        if is_modal(u, &rel) {
            valid.push(rel);
        }
        // Next restricted growth string.
        let mut i = k;
        loop {
            if i <= 1 {
                return Ok(product(valid, u.agents().len()));
            }
            i -= 1;
            if labels[i] <= maxes[i - 1] {
                labels[i] += 1;
                let m = maxes[i - 1].max(labels[i]);
                maxes[i] = m;
                for j in i + 1..k {
                    labels[j] = 0;
                    maxes[j] = m;
                }
                break;
            }
        }
    }
}

fn product(per_agent: Vec<AgentRelation>, agents: usize) -> Vec<Arc<AgentRelationSet>> {
    let mut out: Vec<Vec<AgentRelation>> = vec![Vec::new()];
    for _ in 0..agents {
        let mut next = Vec::new();
        for prefix in &out {
            for r in &per_agent {
                let mut v = prefix.clone();
                v.push(r.clone());
                next.push(v);
            }
        }
        out = next;
    }
    out.into_iter().map(|v| Arc::new(AgentRelationSet::new(v))).collect()
}

/// Uniformly random set partition of `0..n`, as block labels.
pub fn random_partition<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let bells: Vec<f64> = (0..=n).map(|k| bell(k) as f64).collect();
    let mut labels = vec![usize::MAX; n];
    let mut rest: Vec<usize> = (0..n).collect();
    let mut block = 0;
    while let Some(&first) = rest.first() {
        let m = rest.len();
        // Size of the block holding `first`, minus one, weighted by the
        // number of partitions of what remains.
        let mut binom = 1.0f64;
        let weights: Vec<f64> = (0..m)
            .map(|k| {
                let w = binom * bells[m - 1 - k];
                binom = binom * (m - 1 - k) as f64 / (k + 1) as f64;
                w
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut x = rng.gen::<f64>() * total;
        let mut k = m - 1;
        for (i, w) in weights.iter().enumerate() {
            if x < *w {
                k = i;
                break;
            }
            x -= w;
        }
        labels[first] = block;
        let others: Vec<usize> = sample(rng, m - 1, k).into_iter().map(|i| rest[i + 1]).collect();
        for &o in &others {
            labels[o] = block;
        }
        rest.retain(|x| labels[*x] == usize::MAX);
        block += 1;
    }
    labels
}

/// Random partitions of the maximal consistent bases, one agent at a time,
/// completed by the update steps when that gives a modal relation and
/// otherwise by [`coarsest_refinement`]. Draws that are still not modal are
/// discarded; at most 50 are made per agent relation.
fn sampled(u: &Universe, n: usize, seed: u64) -> Vec<Arc<AgentRelationSet>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max = u.max_consistent_bases();
    let nb = u.num_bases();
    let mut layer = FixedBitSet::with_capacity(nb);
    max.iter().for_each(|b| layer.insert(b.index()));
    let draw = |rng: &mut ChaCha8Rng| -> Option<AgentRelation> {
        for _ in 0..50 {
            let labels = random_partition(max.len(), rng);
            let mut edges = Vec::new();
            for i in 0..max.len() {
                for j in i + 1..max.len() {
                    if labels[i] == labels[j] {
                        edges.push((max[i], max[j]));
                    }
                }
            }
            let star = AgentRelation::equivalence_closure(nb, &layer, &edges);
            let (_, mut r) = complete(u, std::slice::from_ref(&star), &layer);
            let rel = r.pop().expect("one agent");
            if is_modal(u, &rel) {
                return Some(rel);
            }
            let rel = coarsest_refinement(u, &layer, &star);
            if is_modal(u, &rel) {
                return Some(rel);
            }
        }
        None
    };
    let mut out = Vec::new();
    'outer: for _ in 0..n {
        let mut rels = Vec::new();
        for _ in 0..u.agents().len() {
            match draw(&mut rng) {
                Some(r) => rels.push(r),
                None => break 'outer,
            }
        }
        out.push(Arc::new(AgentRelationSet::new(rels)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::universe::builders::classical;

    #[test]
    fn bell_numbers() {
        let b: Vec<u128> = (0..8).map(bell).collect();
        assert_eq!(b, vec![1, 1, 2, 5, 15, 52, 203, 877]);
    }

    #[test]
    fn closures_match_naive() {
        for groups in [2usize, 5, 7, 8] {
            let n = 1usize << groups;
            let mut s = FixedBitSet::with_capacity(n);
            for i in (0..n).step_by(7) {
                s.insert(i);
            }
            let down = down_closure(&s, groups);
            let up = up_closure(&s, groups);
            for x in 0..n {
                let d = s.ones().any(|y| x & !y == 0);
                let u = s.ones().any(|y| y & !x == 0);
                assert_eq!(down.contains(x), d, "down {groups} {x}");
                assert_eq!(up.contains(x), u, "up {groups} {x}");
            }
        }
    }

    #[test]
    fn exhaustive_sets_are_modal() {
        let u = classical(&["p"], &["a"]).build().unwrap();
        let sets = relation_sets(&u, RelationMode::Exhaustive, DEFAULT_BUDGET).unwrap();
        assert!(!sets.is_empty());
        for rs in &sets {
            assert!(is_modal(&u, rs.agent(0)));
        }
        let too_many = classical(&["p", "q", "r"], &["a"]).build().unwrap();
        assert!(matches!(relation_sets(&too_many, RelationMode::Exhaustive, DEFAULT_BUDGET), Err(RelationError::TooLarge { .. })));
    }

    #[test]
    fn empty_relation_witnesses() {
        let u = classical(&["p"], &["a"]).build().unwrap();
        let empty = AgentRelation::empty(u.num_bases());
        let rep = check_modal_conditions(&u, &empty);
        assert!(!rep.verdict(Condition::Reflexive).holds);
        assert_eq!(rep.verdict(Condition::Reflexive).witness, Some(vec![Base(0)]));
        assert_eq!(rep.verdict(Condition::InconsistentClosed).witness, Some(vec![Base(3)]));
    }

    #[test]
    fn random_partitions_cover_all_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..2000 {
            let l = random_partition(3, &mut rng);
            let canon: Vec<bool> = vec![l[0] == l[1], l[0] == l[2], l[1] == l[2]];
            seen.insert(canon);
        }
        assert_eq!(seen.len(), 5);
    }

    #[test]
    fn relation_files_round_trip() {
        let u = classical(&["p"], &["a", "b"]).build().unwrap();
        for rs in relation_sets(&u, RelationMode::Exhaustive, DEFAULT_BUDGET).unwrap() {
            let specs = relation_set_to_specs(&u, &rs);
            let json = serde_json::to_string(&specs).unwrap();
            let back: Vec<RelationSpec> = serde_json::from_str(&json).unwrap();
            let loaded = load_relation_set(&u, &back, Completion::Auto).unwrap();
            assert_eq!(loaded.relations, *rs);
        }
    }

    #[test]
    fn relation_files_saturate_core_edges() {
        let u = classical(&["p"], &["a"]).build().unwrap();
        let specs: Vec<RelationSpec> = serde_json::from_str(r#"[{"agent": "a", "core_edges": [["{p}", "{not_p}"]]}]"#).unwrap();
        let loaded = load_relation_set(&u, &specs, Completion::Auto).unwrap();
        let (p, np) = (u.resolve_base("p").unwrap(), u.resolve_base("not_p").unwrap());
        assert!(loaded.relations.agent(0).contains(p, np));
        assert!(check_modal_conditions(&u, loaded.relations.agent(0)).all_hold());
        let unknown: Vec<RelationSpec> = serde_json::from_str(r#"[{"agent": "z"}]"#).unwrap();
        assert!(matches!(load_relation_set(&u, &unknown, Completion::Auto), Err(RelationFileError::UnknownAgent(_))));
    }
}
