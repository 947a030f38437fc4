//! Relation updates after a public announcement at a base.
//!
//! The canonical update runs four stages. The relation is restricted to
//! what the base reaches; edges whose endpoints disagree on the announced
//! formula are cut; what the base no longer reaches is dropped; the rest
//! of the lattice is then re-attached around the surviving core.

use std::collections::HashMap;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{compose_delta, Formula};
use crate::relation::{
    check_modal_conditions, down_closure, reachable_set, relation_sets, AgentRelation, AgentRelationSet, ConditionReport, RelationMode,
};
use crate::support::{EngineError, SupportEngine, SupportMode};
use crate::universe::{Base, Universe};

#[derive(Debug, Clone, Error)]
pub enum UpdateError {
    #[error("base {0:?} does not support the announced formula")]
    PreconditionUnsupported(Base),
    #[error("updated relation for agent `{agent}` fails: {report}")]
    VerificationFailure { agent: String, report: ConditionReport },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Every intermediate relation of an update, one relation per agent.
#[derive(Clone, Debug)]
pub struct UpdateStages {
    pub base: Base,
    pub formula: Formula,
    /// Restriction to the bases reachable from `base`.
    pub s: Vec<AgentRelation>,
    /// Edges of `s` whose endpoints agree on the formula.
    pub s_announced: Vec<AgentRelation>,
    /// Edges of `s_announced` still reachable from `base`.
    pub s_star: Vec<AgentRelation>,
    /// `s_star` with proper subsets of its domain attached.
    pub t_stage: Vec<AgentRelation>,
    /// The final relation set.
    pub r: Arc<AgentRelationSet>,
    /// Condition report of each agent's relation in `r`.
    pub reports: Vec<ConditionReport>,
}

impl UpdateStages {
    pub fn stage(&self, name: &str) -> Option<&[AgentRelation]> {
        match name {
            "s" => Some(&self.s),
            "s_announced" => Some(&self.s_announced),
            "s_star" => Some(&self.s_star),
            "t_stage" => Some(&self.t_stage),
            "r" => Some(self.r.relations()),
            _ => None,
        }
    }

    pub const STAGE_NAMES: [&'static str; 5] = ["s", "s_announced", "s_star", "t_stage", "r"];

    pub fn is_modal(&self) -> bool {
        self.reports.iter().all(ConditionReport::all_hold)
    }

    /// The first agent whose final relation fails a condition.
    pub fn verify(&self, u: &Universe) -> Result<(), UpdateError> {
        match self.reports.iter().position(|r| !r.all_hold()) {
            None => Ok(()),
            Some(a) => Err(UpdateError::VerificationFailure { agent: u.agents()[a].clone(), report: self.reports[a].clone() }),
        }
    }

    pub fn s_star_domain(&self) -> Vec<Base> {
        domain_of(&self.s_star)
    }
}

pub fn domain_of(rels: &[AgentRelation]) -> Vec<Base> {
    let Some(first) = rels.first() else { return Vec::new() };
    let mut d = FixedBitSet::with_capacity(first.num_bases());
    for r in rels {
        d.union_with(&r.domain());
    }
    d.ones().map(|i| Base(i as u32)).collect()
}

fn restrict(rel: &AgentRelation, keep: &FixedBitSet) -> AgentRelation {
    let mut out = AgentRelation::empty(rel.num_bases());
    for x in keep.ones() {
        let row = out.row_mut(Base(x as u32));
        row.union_with(rel.row(Base(x as u32)));
        row.intersect_with(keep);
    }
    out
}

/// Bases reached from `b` using only edges between members of `allowed`.
fn component_within(rels: &[AgentRelation], b: Base, allowed: &FixedBitSet) -> FixedBitSet {
    let mut seen = FixedBitSet::with_capacity(allowed.len());
    seen.insert(b.index());
    let mut stack = vec![b.index()];
    while let Some(x) = stack.pop() {
        for rel in rels {
            for y in rel.row(Base(x as u32)).ones() {
                if allowed.contains(y) && !seen.put(y) {
                    stack.push(y);
                }
            }
        }
    }
    seen
}

/// The canonical update of `rs` by `phi` at `b`, failing when the final
/// relation is not modal.
pub fn canonical_update(engine: &SupportEngine<'_>, rs: &AgentRelationSet, phi: &Formula, b: Base) -> Result<UpdateStages, UpdateError> {
    let stages = construct_update(engine, rs, phi, b)?;
    stages.verify(engine.universe())?;
    Ok(stages)
}

/// The four stages of the canonical update, with condition reports but
/// without failing on them.
pub fn construct_update(engine: &SupportEngine<'_>, rs: &AgentRelationSet, phi: &Formula, b: Base) -> Result<UpdateStages, UpdateError> {
    let u = engine.universe();
    if !engine.supports(rs, b, &[], phi)? {
        return Err(UpdateError::PreconditionUnsupported(b));
    }
    let reach = reachable_set(rs, b);
    let mut sup = FixedBitSet::with_capacity(u.num_bases());
    for x in reach.ones() {
        if engine.supports(rs, Base(x as u32), &[], phi)? {
            sup.insert(x);
        }
    }
    let s: Vec<AgentRelation> = rs.relations().iter().map(|r| restrict(r, &reach)).collect();
    let s_announced: Vec<AgentRelation> = s
        .iter()
        .map(|r| {
            let mut out = AgentRelation::empty(r.num_bases());
            for x in reach.ones() {
                let row = out.row_mut(Base(x as u32));
                row.union_with(r.row(Base(x as u32)));
                if sup.contains(x) {
                    row.intersect_with(&sup);
                } else {
                    row.difference_with(&sup);
                }
            }
            out
        })
        .collect();
    let dom = component_within(&s_announced, b, &reach);
    let s_star: Vec<AgentRelation> = s_announced.iter().map(|r| restrict(r, &dom)).collect();
    Ok(finish(u, b, phi.clone(), s, s_announced, s_star, &dom))
}

fn finish(
    u: &Universe,
    b: Base,
    formula: Formula,
    s: Vec<AgentRelation>,
    s_announced: Vec<AgentRelation>,
    s_star: Vec<AgentRelation>,
    dom: &FixedBitSet,
) -> UpdateStages {
    let (t_stage, r) = complete(u, &s_star, dom);
    let reports = r.iter().map(|rel| check_modal_conditions(u, rel)).collect();
    UpdateStages { base: b, formula, s, s_announced, s_star, t_stage, r: Arc::new(AgentRelationSet::new(r)), reports }
}

/// Canonical update by a sequence, failing when the final relation is not
/// modal.
pub fn canonical_update_sequence(
    engine: &SupportEngine<'_>,
    rs: &AgentRelationSet,
    delta: &[Formula],
    b: Base,
) -> Result<UpdateStages, UpdateError> {
    let stages = construct_update_sequence(engine, rs, delta, b)?;
    stages.verify(engine.universe())?;
    Ok(stages)
}

/// Canonical update by a sequence, one announcement at a time. Stage `k`
/// keeps the bases of the previous surviving component that support the
/// `k`-th announcement after the earlier ones, then takes the component
/// of `b`. Completion runs once on the final component.
pub fn construct_update_sequence(
    engine: &SupportEngine<'_>,
    rs: &AgentRelationSet,
    delta: &[Formula],
    b: Base,
) -> Result<UpdateStages, UpdateError> {
    let u = engine.universe();
    let reach = reachable_set(rs, b);
    let s: Vec<AgentRelation> = rs.relations().iter().map(|r| restrict(r, &reach)).collect();
    let mut dom = reach.clone();
    let mut s_announced = s.clone();
    for (k, phi) in delta.iter().enumerate() {
        let before = &delta[..k];
        if !engine.supports(rs, b, before, phi)? {
            return Err(UpdateError::PreconditionUnsupported(b));
        }
        let mut sup = FixedBitSet::with_capacity(u.num_bases());
        for x in dom.ones() {
            if engine.supports(rs, Base(x as u32), before, phi)? {
                sup.insert(x);
            }
        }
        let current: Vec<AgentRelation> = s.iter().map(|r| restrict(r, &dom)).collect();
        s_announced = current
            .iter()
            .map(|r| {
                let mut out = AgentRelation::empty(r.num_bases());
                for x in dom.ones() {
                    let row = out.row_mut(Base(x as u32));
                    row.union_with(r.row(Base(x as u32)));
                    if sup.contains(x) {
                        row.intersect_with(&sup);
                    } else {
                        row.difference_with(&sup);
                    }
                }
                out
            })
            .collect();
        dom = component_within(&s_announced, b, &dom);
    }
    let s_star: Vec<AgentRelation> = s_announced.iter().map(|r| restrict(r, &dom)).collect();
    Ok(finish(u, b, compose_delta(delta), s, s_announced, s_star, &dom))
}

/// Class representative of every member of `dom` when `rel` restricted to
/// `dom` is an equivalence, else `None`.
fn classes_on(rel: &AgentRelation, dom: &FixedBitSet) -> Option<HashMap<usize, usize>> {
    let mut rep = HashMap::new();
    for x in dom.ones() {
        let row = rel.row(Base(x as u32));
        if !row.contains(x) || !row.is_subset(dom) {
            return None;
        }
        rep.insert(x, row.minimum()?);
    }
    for x in dom.ones() {
        let row = rel.row(Base(x as u32));
        if row.ones().any(|y| rel.row(Base(y as u32)) != row) {
            return None;
        }
    }
    Some(rep)
}

/// Re-attaches the rest of the lattice around a core relation.
///
/// Proper subsets of the core domain are related when, for each agent,
/// every core superset of one has a related core superset of the other
/// and vice versa. Remaining consistent bases are related when the same
/// holds of their proper subsets among everything related so far, and
/// they carry the same rules outside that part's rule union. Inconsistent
/// bases form one clique. Returns the intermediate and final relations.
pub fn complete(u: &Universe, star: &[AgentRelation], dom: &FixedBitSet) -> (Vec<AgentRelation>, Vec<AgentRelation>) {
    let n = u.num_bases();
    let g = u.num_groups();
    let cons = u.consistent_set();

    let mut down = down_closure(dom, g);
    down.difference_with(dom);
    down.intersect_with(cons);

    let mut inc = FixedBitSet::with_capacity(n);
    inc.insert_range(..);
    inc.difference_with(cons);

    let mut ts = Vec::with_capacity(star.len());
    let mut rs = Vec::with_capacity(star.len());
    for rel in star {
        let mut t = AgentRelation::empty(n);
        for x in dom.ones() {
            t.row_mut(Base(x as u32)).union_with(rel.row(Base(x as u32)));
        }
        let above = |x: usize| dom.ones().filter(move |&y| x & !y == 0 && x != y);
        relate_by_cover(&mut t, &down, rel, dom, above);

        let mut tdom = dom.clone();
        tdom.union_with(&down);
        let mut tr = FixedBitSet::with_capacity(u.num_distinct_rules());
        for x in tdom.ones() {
            tr.union_with(&u.rule_set(Base(x as u32)));
        }
        let mut rest = cons.clone();
        rest.difference_with(&tdom);

        let mut r = t.clone();
        let below = |x: usize| tdom.ones().filter(move |&y| y & !x == 0 && x != y);
        let residue = |x: usize| {
            let mut s = u.rule_set(Base(x as u32));
            s.difference_with(&tr);
            s
        };
        relate_rest(&mut r, &rest, &t, &tdom, below, residue);
        for x in inc.ones() {
            r.row_mut(Base(x as u32)).union_with(&inc);
        }
        ts.push(t);
        rs.push(r);
    }
    (ts, rs)
}

/// Relates members `c, d` of `pool` when every `c' ∈ cover(c)` has a
/// `rel`-successor in `cover_parent(d)` and vice versa, where the cover of
/// a base and the parents searched are given by `cover`.
fn relate_by_cover<F, I>(out: &mut AgentRelation, pool: &FixedBitSet, rel: &AgentRelation, dom: &FixedBitSet, cover: F)
where
    F: Fn(usize) -> I,
    I: Iterator<Item = usize>,
{
    let members: Vec<usize> = pool.ones().collect();
    if let Some(rep) = classes_on(rel, dom) {
        let mut groups: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for &x in &members {
            let mut key: Vec<usize> = cover(x).map(|y| rep[&y]).collect();
            key.sort_unstable();
            key.dedup();
            groups.entry(key).or_default().push(x);
        }
        for class in groups.values() {
            link_all(out, class);
        }
    } else {
        let covers: Vec<Vec<usize>> = members.iter().map(|&x| cover(x).collect()).collect();
        for (i, &c) in members.iter().enumerate() {
            for (j, &d) in members.iter().enumerate() {
                let fwd = covers[i].iter().all(|&c2| covers[j].iter().any(|&d2| rel.contains(Base(c2 as u32), Base(d2 as u32))));
                let bwd = covers[j].iter().all(|&d2| covers[i].iter().any(|&c2| rel.contains(Base(d2 as u32), Base(c2 as u32))));
                if fwd && bwd {
                    out.insert(Base(c as u32), Base(d as u32));
                }
            }
        }
    }
}

fn relate_rest<F, I, R>(out: &mut AgentRelation, rest: &FixedBitSet, t: &AgentRelation, tdom: &FixedBitSet, below: F, residue: R)
where
    F: Fn(usize) -> I,
    I: Iterator<Item = usize>,
    R: Fn(usize) -> FixedBitSet,
{
    let members: Vec<usize> = rest.ones().collect();
    if let Some(rep) = classes_on(t, tdom) {
        let mut groups: HashMap<(Vec<usize>, Vec<usize>), Vec<usize>> = HashMap::new();
        for &x in &members {
            let mut key: Vec<usize> = below(x).map(|y| rep[&y]).collect();
            key.sort_unstable();
            key.dedup();
            groups.entry((key, residue(x).ones().collect())).or_default().push(x);
        }
        for class in groups.values() {
            link_all(out, class);
        }
    } else {
        let covers: Vec<Vec<usize>> = members.iter().map(|&x| below(x).collect()).collect();
        let residues: Vec<FixedBitSet> = members.iter().map(|&x| residue(x)).collect();
        for (i, &c) in members.iter().enumerate() {
            for (j, &d) in members.iter().enumerate() {
                if residues[i] != residues[j] {
                    continue;
                }
                let fwd = covers[i].iter().all(|&c2| covers[j].iter().any(|&d2| t.contains(Base(c2 as u32), Base(d2 as u32))));
                let bwd = covers[j].iter().all(|&d2| covers[i].iter().any(|&c2| t.contains(Base(d2 as u32), Base(c2 as u32))));
                if fwd && bwd {
                    out.insert(Base(c as u32), Base(d as u32));
                }
            }
        }
    }
}

fn link_all(out: &mut AgentRelation, class: &[usize]) {
    let n = out.num_bases();
    let mut set = FixedBitSet::with_capacity(n);
    class.iter().for_each(|&x| set.insert(x));
    for &x in class {
        out.row_mut(Base(x as u32)).union_with(&set);
    }
}

/// Why a relation set is not an effective update.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectiveViolation {
    /// The agent's relation fails a structural condition.
    NotModal { agent: String, report: ConditionReport },
    /// A reachable pair whose edge should be the reverse of `present`.
    Edge { agent: String, from: String, to: String, present: bool },
}

/// The first reason `updated` is not an effective update of `rs` by `phi`
/// at `b`, or `None` when it is. Pinned edges are checked before the
/// structural conditions.
pub fn effective_update_violation(
    engine: &SupportEngine<'_>,
    rs: &AgentRelationSet,
    updated: &AgentRelationSet,
    phi: &Formula,
    b: Base,
) -> Result<Option<EffectiveViolation>, EngineError> {
    let u = engine.universe();
    if let Some((a, x, y, present)) = engine.pinned_edge_violation(rs, updated, phi, b)? {
        return Ok(Some(EffectiveViolation::Edge { agent: u.agents()[a].clone(), from: u.base_name(x), to: u.base_name(y), present }));
    }
    for (a, r) in updated.relations().iter().enumerate() {
        let report = check_modal_conditions(u, r);
        if !report.all_hold() {
            return Ok(Some(EffectiveViolation::NotModal { agent: u.agents()[a].clone(), report }));
        }
    }
    Ok(None)
}

/// Whether `updated` is an effective update of `rs` by `phi` at `b`: it
/// meets every structural condition, and on the bases `b` reaches under
/// `rs` it keeps exactly the edges whose endpoints both support `phi`.
pub fn is_effective_update(
    engine: &SupportEngine<'_>,
    rs: &AgentRelationSet,
    updated: &AgentRelationSet,
    phi: &Formula,
    b: Base,
) -> Result<bool, EngineError> {
    Ok(effective_update_violation(engine, rs, updated, phi, b)?.is_none())
}

/// Effective updates of `rs` by the sequence `delta` at `b`, under the
/// engine's mode. Empty when `b` does not support the composed formula.
pub fn effective_updates(
    engine: &SupportEngine<'_>,
    rs: &AgentRelationSet,
    delta: &[Formula],
    b: Base,
) -> Result<Vec<Arc<AgentRelationSet>>, UpdateError> {
    let phi = compose_delta(delta);
    if !engine.supports(rs, b, &[], &phi)? {
        return Ok(Vec::new());
    }
    match engine.mode() {
        SupportMode::Canonical => Ok(vec![canonical_update(engine, rs, &phi, b)?.r]),
        SupportMode::Exhaustive => {
            let all = relation_sets(engine.universe(), RelationMode::Exhaustive, engine.budget()).map_err(EngineError::from)?;
            let mut out = Vec::new();
            for cand in all {
                if is_effective_update(engine, rs, &cand, &phi, b)? {
                    out.push(cand);
                }
            }
            Ok(out)
        }
    }
}

/// Edge summary of a stage, for reports.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct StageEdges {
    pub agent: String,
    pub edges: Vec<(String, String)>,
}

/// Unordered, loop-free edges of each agent restricted to `keep`, named.
pub fn stage_edges(u: &Universe, rels: &[AgentRelation], keep: Option<&FixedBitSet>) -> Vec<StageEdges> {
    rels.iter()
        .enumerate()
        .map(|(a, r)| {
            let mut edges: Vec<(String, String)> = r
                .pairs()
                .filter(|(x, y)| x < y)
                .filter(|(x, y)| keep.is_none_or(|k| k.contains(x.index()) && k.contains(y.index())))
                .map(|(x, y)| {
                    let (x, y) = (u.base_name(x), u.base_name(y));
                    if x <= y {
                        (x, y)
                    } else {
                        (y, x)
                    }
                })
                .collect();
            edges.sort();
            StageEdges { agent: u.agents()[a].clone(), edges }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;
    use crate::relation::DEFAULT_BUDGET;
    use crate::universe::builders::classical;

    fn fixture() -> (Universe, Vec<Arc<AgentRelationSet>>) {
        let u = classical(&["p"], &["a"]).build().unwrap();
        let sets = relation_sets(&u, RelationMode::Exhaustive, DEFAULT_BUDGET).unwrap();
        (u, sets)
    }

    #[test]
    fn unchanged_relation_is_witnessed_by_an_edge_to_a_refuting_base() {
        let (u, sets) = fixture();
        let e = SupportEngine::new(&u, SupportMode::Canonical);
        let phi = parse("p").unwrap();
        let mut seen = 0;
        for rs in &sets {
            for b in u.bases().filter(|b| u.is_consistent(*b)) {
                if !e.supports(rs, b, &[], &phi).unwrap() {
                    continue;
                }
                let reach = reachable_set(rs, b);
                let refuted = reach.ones().any(|x| !e.supports(rs, Base(x as u32), &[], &phi).unwrap());
                let v = effective_update_violation(&e, rs, rs, &phi, b).unwrap();
                if !refuted {
                    assert_eq!(v, None);
                    continue;
                }
                seen += 1;
                let Some(EffectiveViolation::Edge { from, to, present, .. }) = v else { panic!("{v:?}") };
                assert!(present);
                let named = |n: &str| u.bases().find(|c| u.base_name(*c) == n).unwrap();
                let ends = [named(&from), named(&to)];
                assert!(ends.iter().any(|c| !e.supports(rs, *c, &[], &phi).unwrap()));
                assert!(!is_effective_update(&e, rs, rs, &phi, b).unwrap());
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn deleted_pinned_edge_is_the_witness() {
        let (u, sets) = fixture();
        let e = SupportEngine::new(&u, SupportMode::Canonical);
        let top = parse("p -> p").unwrap();
        let b = u.bases().find(|b| u.is_consistent(*b)).unwrap();
        let rs = sets.iter().find(|rs| reachable_set(rs, b).count_ones(..) > 1).expect("a relation set linking the base");
        assert_eq!(effective_update_violation(&e, rs, rs, &top, b).unwrap(), None);

        let reach = reachable_set(rs, b);
        let (x, y) = rs.agent(0).pairs().find(|(x, y)| x < y && reach.contains(x.index())).unwrap();
        let mut rel = rs.agent(0).clone();
        rel.row_mut(x).set(y.index(), false);
        rel.row_mut(y).set(x.index(), false);
        let cut = AgentRelationSet::new(vec![rel]);
        let v = effective_update_violation(&e, rs, &cut, &top, b).unwrap();
        assert_eq!(v, Some(EffectiveViolation::Edge { agent: "a".into(), from: u.base_name(x), to: u.base_name(y), present: false }));
    }
}
