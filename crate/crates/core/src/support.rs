//! Support of formulas at bases, relative to a relation set and a sequence
//! of prior announcements.
//!
//! Clauses, for a base `B`, relation set `R` and announcement sequence `Δ`:
//!
//! * atom `p`: `p` is in the closure of `B`;
//! * `⊥`: every atom is in the closure of `B`;
//! * `φ→ψ`: every superset supporting `φ` supports `ψ`;
//! * `K_a φ` with empty `Δ`: every `R_a`-successor of `B` supports `φ`;
//! * `K_a φ` otherwise: for every superset `C`, every update of `R` by `Δ`
//!   at `C`, and every successor of `C` in that update, `φ` is supported
//!   there (against `R` and `Δ`);
//! * `[φ]ψ`: every superset supporting `φ` supports `ψ` after `Δ, φ`.
//!
//! Each formula is evaluated at all bases at once, as a bitset over the
//! lattice. "At every superset" is the complement of the down-closure of
//! the complement.

use std::sync::{Arc, OnceLock, RwLock};

use dashmap::DashMap;
use fixedbitset::FixedBitSet;
use rustc_hash::{FxBuildHasher, FxHashMap};
use smallvec::{smallvec, SmallVec};
use thiserror::Error;

use crate::formula::Formula;
use crate::relation::{down_close_words, reachable_set, relation_sets, AgentRelationSet, RelationError, RelationMode, DEFAULT_BUDGET};
use crate::universe::{Base, Universe, UniverseError};
use crate::update::{construct_update, UpdateError};

/// How the updates quantified over by knowledge after announcements are
/// obtained.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportMode {
    /// The single canonical update.
    Canonical,
    /// Every enumerated relation set that is an effective update.
    Exhaustive,
}

#[derive(Debug, Clone, Error)]
pub enum EngineError {
    #[error(transparent)]
    Universe(#[from] UniverseError),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error("update check failed: {0}")]
    Update(Box<UpdateError>),
}

/// A support question, `Γ ⊩^Δ_B φ` against a relation set.
#[derive(Clone, Debug)]
pub struct Judgement {
    pub context: Vec<Formula>,
    pub base: Base,
    pub relations: Arc<AgentRelationSet>,
    pub delta: Vec<Formula>,
    pub goal: Formula,
}

type FId = u32;
type DId = u32;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
enum Node {
    Atom(u32),
    Bot,
    Imp(FId, FId),
    K(u32, FId),
    Ann(FId, FId),
}

#[derive(Default)]
struct Interner {
    nodes: Vec<Node>,
    /// Whether the node contains a knowledge operator.
    modal: Vec<bool>,
    ids: FxHashMap<Node, FId>,
    deltas: Vec<(DId, FId)>,
    delta_ids: FxHashMap<(DId, FId), DId>,
    composed: FxHashMap<DId, FId>,
}

impl Interner {
    fn new() -> Interner {
        let mut i = Interner::default();
        // Delta 0 is the empty sequence.
        i.deltas.push((0, 0));
        i
    }

    fn node(&mut self, n: Node) -> FId {
        if let Some(&id) = self.ids.get(&n) {
            return id;
        }
        let id = self.nodes.len() as FId;
        let modal = match n {
            Node::Atom(_) | Node::Bot => false,
            Node::K(..) => true,
            Node::Imp(a, b) | Node::Ann(a, b) => self.modal[a as usize] || self.modal[b as usize],
        };
        self.nodes.push(n);
        self.modal.push(modal);
        self.ids.insert(n, id);
        id
    }

    fn neg(&mut self, f: FId) -> FId {
        let bot = self.node(Node::Bot);
        self.node(Node::Imp(f, bot))
    }

    fn conj(&mut self, a: FId, b: FId) -> FId {
        let nna = {
            let na = self.neg(a);
            self.neg(na)
        };
        let nb = self.neg(b);
        let imp = self.node(Node::Imp(nna, nb));
        self.neg(imp)
    }

    fn delta_child(&mut self, d: DId, f: FId) -> DId {
        if let Some(&id) = self.delta_ids.get(&(d, f)) {
            return id;
        }
        let id = self.deltas.len() as DId;
        self.deltas.push((d, f));
        self.delta_ids.insert((d, f), id);
        id
    }

    fn delta_items(&self, mut d: DId) -> Vec<FId> {
        let mut out = Vec::new();
        while d != 0 {
            let (parent, f) = self.deltas[d as usize];
            out.push(f);
            d = parent;
        }
        out.reverse();
        out
    }

    fn composed(&mut self, d: DId) -> FId {
        if let Some(&f) = self.composed.get(&d) {
            return f;
        }
        let items = self.delta_items(d);
        let f = self.compose(&items);
        self.composed.insert(d, f);
        f
    }

    fn compose(&mut self, items: &[FId]) -> FId {
        match items {
            [] => {
                let bot = self.node(Node::Bot);
                self.node(Node::Imp(bot, bot))
            }
            [only] => *only,
            [first, rest @ ..] => {
                let inner = self.compose(rest);
                let ann = self.node(Node::Ann(*first, inner));
                self.conj(*first, ann)
            }
        }
    }
}

/// A set of bases, stored inline for lattices of up to 512 bases.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TruthSet {
    len: usize,
    words: SmallVec<[usize; 8]>,
}

const WORD: usize = usize::BITS as usize;

impl TruthSet {
    fn empty(len: usize) -> TruthSet {
        TruthSet { len, words: smallvec![0; len.div_ceil(WORD)] }
    }

    fn full(len: usize) -> TruthSet {
        let mut s = TruthSet { len, words: smallvec![usize::MAX; len.div_ceil(WORD)] };
        s.mask_tail();
        s
    }

    fn from_bitset(b: &FixedBitSet) -> TruthSet {
        TruthSet { len: b.len(), words: SmallVec::from_slice(b.as_slice()) }
    }

    fn mask_tail(&mut self) {
        let r = self.len % WORD;
        if r != 0 {
            if let Some(w) = self.words.last_mut() {
                *w &= (1usize << r) - 1;
            }
        }
    }

    fn complement(&mut self) {
        for w in self.words.iter_mut() {
            *w = !*w;
        }
        self.mask_tail();
    }

    fn zip(&self, other: &TruthSet, op: impl Fn(usize, usize) -> usize) -> TruthSet {
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(&other.words) {
            *w = op(*w, *o);
        }
        out.mask_tail();
        out
    }

    fn insert(&mut self, i: usize) {
        self.words[i / WORD] |= 1 << (i % WORD);
    }

    fn remove(&mut self, i: usize) {
        self.words[i / WORD] &= !(1 << (i % WORD));
    }

    /// Number of bases in the lattice.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Members in increasing order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                (w != 0).then(|| {
                    let t = w.trailing_zeros() as usize;
                    w &= w - 1;
                    k * WORD + t
                })
            })
        })
    }

    /// Lowest member.
    pub fn minimum(&self) -> Option<usize> {
        let k = self.words.iter().position(|&w| w != 0)?;
        Some(k * WORD + self.words[k].trailing_zeros() as usize)
    }

    /// Lowest base not in the set.
    pub fn first_missing(&self) -> Option<usize> {
        let mut c = self.clone();
        c.complement();
        c.minimum()
    }

    pub fn intersection(&self, other: &TruthSet) -> TruthSet {
        self.zip(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &TruthSet) -> TruthSet {
        self.zip(other, |a, b| a & !b)
    }

    pub fn symmetric_difference(&self, other: &TruthSet) -> TruthSet {
        self.zip(other, |a, b| a ^ b)
    }

    /// Bases outside `self` or in `other`.
    fn implies(&self, other: &TruthSet) -> TruthSet {
        self.zip(other, |a, b| !a | b)
    }

    fn is_subset_words(&self, words: &[usize]) -> bool {
        words.iter().zip(&self.words).all(|(a, b)| a & !b == 0)
    }

    pub fn to_bitset(&self) -> FixedBitSet {
        FixedBitSet::with_capacity_and_blocks(self.len, self.words.iter().copied())
    }
}

type TruthKey = (u64, DId, FId);
type FxMap<K, V> = DashMap<K, V, FxBuildHasher>;

/// A formula and announcement sequence interned in one engine.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Prepared {
    delta: DId,
    formula: FId,
}

/// Memoizing evaluator of the support relation over one universe.
///
/// Verdicts are computed as truth sets: for a relation set, announcement
/// sequence and formula, the set of all bases supporting it.
pub struct SupportEngine<'u> {
    u: &'u Universe,
    mode: SupportMode,
    budget: u128,
    verify_updates: bool,
    forms: RwLock<Interner>,
    truth: FxMap<TruthKey, TruthSet>,
    /// Truth sets of formulas without knowledge operators, which depend on
    /// neither the relation set nor the announcements.
    fixed: FxMap<FId, TruthSet>,
    reach: FxMap<(u64, u32), Arc<FixedBitSet>>,
    atom_sets: OnceLock<Vec<TruthSet>>,
    all_sets: OnceLock<Result<Arc<Vec<Arc<AgentRelationSet>>>, RelationError>>,
    inconsistent: TruthSet,
}

impl<'u> SupportEngine<'u> {
    pub fn new(u: &'u Universe, mode: SupportMode) -> SupportEngine<'u> {
        let mut inconsistent = TruthSet::from_bitset(u.consistent_set());
        inconsistent.complement();
        SupportEngine {
            u,
            mode,
            budget: DEFAULT_BUDGET,
            verify_updates: false,
            forms: RwLock::new(Interner::new()),
            truth: FxMap::default(),
            fixed: FxMap::default(),
            reach: FxMap::default(),
            atom_sets: OnceLock::new(),
            all_sets: OnceLock::new(),
            inconsistent,
        }
    }

    /// Budget on enumerated candidates in exhaustive mode.
    pub fn with_budget(mut self, budget: u128) -> Self {
        self.budget = budget;
        self
    }

    /// In canonical mode, build the full update at every base where one is
    /// used and check its row against the successors read directly off
    /// the surviving component. Slow; meant for tests.
    pub fn with_update_verification(mut self, on: bool) -> Self {
        self.verify_updates = on;
        self
    }

    pub fn universe(&self) -> &'u Universe {
        self.u
    }

    pub fn mode(&self) -> SupportMode {
        self.mode
    }

    pub fn budget(&self) -> u128 {
        self.budget
    }

    /// Number of memoized truth sets.
    pub fn memo_len(&self) -> usize {
        self.truth.len() + self.fixed.len()
    }

    /// Drops every memoized truth set that depends on a relation set, and
    /// every reachability set. Interned formulas and the enumerated
    /// relation sets are kept.
    pub fn clear_caches(&self) {
        self.truth.clear();
        self.reach.clear();
    }

    fn intern(&self, f: &Formula) -> Result<FId, EngineError> {
        let core = f.desugar();
        let mut forms = self.forms.write().expect("interner lock");
        self.intern_core(&mut forms, &core)
    }

    fn intern_core(&self, forms: &mut Interner, f: &Formula) -> Result<FId, EngineError> {
        Ok(match f {
            Formula::Atom(p) => {
                let id = self.u.atom_id(p).ok_or_else(|| UniverseError::UnknownAtom(p.clone()))?;
                forms.node(Node::Atom(id as u32))
            }
            Formula::Bot => forms.node(Node::Bot),
            Formula::Implies(a, b) => {
                let (a, b) = (self.intern_core(forms, a)?, self.intern_core(forms, b)?);
                forms.node(Node::Imp(a, b))
            }
            Formula::Knows(ag, x) => {
                let id = self.u.agent_id(ag).ok_or_else(|| UniverseError::UnknownAgent(ag.clone()))?;
                let x = self.intern_core(forms, x)?;
                forms.node(Node::K(id as u32, x))
            }
            Formula::Announce(a, b) => {
                let (a, b) = (self.intern_core(forms, a)?, self.intern_core(forms, b)?);
                forms.node(Node::Ann(a, b))
            }
            _ => unreachable!("desugared"),
        })
    }

    fn intern_delta(&self, delta: &[Formula]) -> Result<DId, EngineError> {
        let mut d = 0;
        for f in delta {
            let id = self.intern(f)?;
            d = self.forms.write().expect("interner lock").delta_child(d, id);
        }
        Ok(d)
    }

    fn node(&self, f: FId) -> Node {
        self.forms.read().expect("interner lock").nodes[f as usize]
    }

    fn node_and_modal(&self, f: FId) -> (Node, bool) {
        let forms = self.forms.read().expect("interner lock");
        (forms.nodes[f as usize], forms.modal[f as usize])
    }

    fn child(&self, d: DId, f: FId) -> DId {
        self.forms.write().expect("interner lock").delta_child(d, f)
    }

    fn composed(&self, d: DId) -> FId {
        self.forms.write().expect("interner lock").composed(d)
    }

    /// Interns `f` after `delta` for repeated evaluation.
    pub fn prepare(&self, delta: &[Formula], f: &Formula) -> Result<Prepared, EngineError> {
        Ok(Prepared { delta: self.intern_delta(delta)?, formula: self.intern(f)? })
    }

    /// Bases supporting a prepared formula against `rs`.
    pub fn truth_prepared(&self, rs: &AgentRelationSet, p: Prepared) -> Result<TruthSet, EngineError> {
        self.truth(rs, p.delta, p.formula)
    }

    /// Bases `B` with `⊩^Δ_B φ` against `rs`.
    pub fn truth_set(&self, rs: &AgentRelationSet, delta: &[Formula], f: &Formula) -> Result<FixedBitSet, EngineError> {
        let p = self.prepare(delta, f)?;
        Ok(self.truth_prepared(rs, p)?.to_bitset())
    }

    /// `⊩^Δ_B φ` against `rs`.
    pub fn supports(&self, rs: &AgentRelationSet, b: Base, delta: &[Formula], f: &Formula) -> Result<bool, EngineError> {
        let p = self.prepare(delta, f)?;
        Ok(self.truth_prepared(rs, p)?.contains(b.index()))
    }

    /// `Γ ⊩^Δ_B φ`: every superset supporting all of `Γ` supports `φ`.
    pub fn supports_in_context(
        &self,
        rs: &AgentRelationSet,
        b: Base,
        context: &[Formula],
        delta: &[Formula],
        goal: &Formula,
    ) -> Result<bool, EngineError> {
        if context.is_empty() {
            return self.supports(rs, b, delta, goal);
        }
        let mut hyp = TruthSet::full(self.u.num_bases());
        for g in context {
            hyp = hyp.intersection(&self.truth_prepared(rs, self.prepare(delta, g)?)?);
        }
        let goal = self.truth_prepared(rs, self.prepare(delta, goal)?)?;
        Ok(self.interior(hyp.implies(&goal)).contains(b.index()))
    }

    pub fn evaluate(&self, j: &Judgement) -> Result<bool, EngineError> {
        self.supports_in_context(&j.relations, j.base, &j.context, &j.delta, &j.goal)
    }

    /// Bases all of whose supersets lie in `local`.
    fn interior(&self, mut local: TruthSet) -> TruthSet {
        local.complement();
        down_close_words(&mut local.words, self.u.num_groups());
        local.complement();
        local
    }

    fn atom_set(&self, p: usize) -> &TruthSet {
        &self.atom_sets.get_or_init(|| {
            let n = self.u.num_bases();
            let mut sets = vec![TruthSet::empty(n); self.u.atoms().len()];
            for b in self.u.bases() {
                for q in self.u.closure(b).ones() {
                    sets[q].insert(b.index());
                }
            }
            sets
        })[p]
    }

    fn truth(&self, rs: &AgentRelationSet, d: DId, f: FId) -> Result<TruthSet, EngineError> {
        let (node, modal) = self.node_and_modal(f);
        let key = (rs.id(), d, f);
        let cached = if modal { self.truth.get(&key).map(|v| v.clone()) } else { self.fixed.get(&f).map(|v| v.clone()) };
        if let Some(v) = cached {
            return Ok(v);
        }
        let v = match node {
            Node::Atom(p) => self.atom_set(p as usize).clone(),
            Node::Bot => self.inconsistent.clone(),
            Node::Imp(x, y) => {
                let (x, y) = (self.truth(rs, d, x)?, self.truth(rs, d, y)?);
                self.interior(x.implies(&y))
            }
            Node::Ann(x, y) => {
                let pre = self.truth(rs, d, x)?;
                let post = self.truth(rs, self.child(d, x), y)?;
                self.interior(pre.implies(&post))
            }
            Node::K(a, x) if d == 0 => {
                let x = self.truth(rs, d, x)?;
                let rel = rs.agent(a as usize);
                let mut out = TruthSet::empty(self.u.num_bases());
                for b in self.u.bases() {
                    if x.is_subset_words(rel.row(b).as_slice()) {
                        out.insert(b.index());
                    }
                }
                out
            }
            Node::K(a, x) => {
                let g = self.composed(d);
                let x = self.truth(rs, d, x)?;
                let pre = self.truth(rs, 0, g)?;
                let mut local = TruthSet::full(self.u.num_bases());
                let fast = self.mode == SupportMode::Canonical && !self.verify_updates;
                let incons_ok = self.inconsistent.difference(&x).is_empty();
                for c in pre.ones() {
                    let ok = if fast {
                        let row = rs.agent(a as usize).row(Base(c as u32)).as_slice();
                        let escapes = row.iter().zip(&pre.words).zip(&x.words).any(|((r, p), x)| r & p & !x != 0);
                        !escapes && (incons_ok || self.u.is_consistent(Base(c as u32)))
                    } else {
                        let nbrs = self.updated_successors(rs, g, &pre, Base(c as u32), a)?;
                        x.is_subset_words(nbrs.as_slice())
                    };
                    if !ok {
                        local.remove(c);
                    }
                }
                self.interior(local)
            }
        };
        if modal {
            self.truth.insert(key, v.clone());
        } else {
            self.fixed.insert(f, v.clone());
        }
        Ok(v)
    }

    fn reachable(&self, rs: &AgentRelationSet, b: Base) -> Arc<FixedBitSet> {
        if let Some(v) = self.reach.get(&(rs.id(), b.0)) {
            return v.clone();
        }
        let v = Arc::new(reachable_set(rs, b));
        self.reach.insert((rs.id(), b.0), v.clone());
        v
    }

    /// Union, over the updates of `rs` by `g` at `c`, of the successors of
    /// `c` for agent `a`. `pre` is the truth set of `g` and contains `c`.
    fn updated_successors(&self, rs: &AgentRelationSet, g: FId, pre: &TruthSet, c: Base, a: u32) -> Result<FixedBitSet, EngineError> {
        match self.mode {
            SupportMode::Canonical => {
                // The update leaves the rows of the surviving component
                // alone apart from the inconsistent clique, so the row of
                // `c` is its supporting direct successors.
                let mut out = rs.agent(a as usize).row(c).clone();
                out.intersect_with(&pre.to_bitset());
                if !self.u.is_consistent(c) {
                    out.union_with(&self.inconsistent.to_bitset());
                }
                if self.verify_updates {
                    self.verify_canonical_row(rs, g, c, a, &out)?;
                }
                Ok(out)
            }
            SupportMode::Exhaustive => {
                let mut out = FixedBitSet::with_capacity(self.u.num_bases());
                for cand in self.enumerated()?.iter() {
                    if self.pins(rs, cand, pre, c) {
                        out.union_with(cand.agent(a as usize).row(c));
                    }
                }
                Ok(out)
            }
        }
    }

    fn verify_canonical_row(&self, rs: &AgentRelationSet, g: FId, c: Base, a: u32, row: &FixedBitSet) -> Result<(), EngineError> {
        let phi = self.to_formula(g);
        let stages = construct_update(self, rs, &phi, c).map_err(|e| EngineError::Update(Box::new(e)))?;
        let full = stages.r.agent(a as usize).row(c);
        assert_eq!(full, row, "canonical successor shortcut disagrees with the full update at {c:?}");
        Ok(())
    }

    fn to_formula(&self, f: FId) -> Formula {
        use crate::formula::{announce, bot, implies, knows, Formula as F};
        match self.node(f) {
            Node::Atom(p) => F::Atom(self.u.atoms()[p as usize].clone()),
            Node::Bot => bot(),
            Node::Imp(x, y) => implies(self.to_formula(x), self.to_formula(y)),
            Node::K(a, x) => knows(&self.u.agents()[a as usize], self.to_formula(x)),
            Node::Ann(x, y) => announce(self.to_formula(x), self.to_formula(y)),
        }
    }

    fn enumerated(&self) -> Result<Arc<Vec<Arc<AgentRelationSet>>>, EngineError> {
        self.all_sets
            .get_or_init(|| relation_sets(self.u, RelationMode::Exhaustive, self.budget).map(Arc::new))
            .clone()
            .map_err(EngineError::from)
    }

    /// On the bases `b` reaches under `rs`, `cand` keeps exactly the
    /// edges of `rs` whose endpoints both lie in `pre`.
    fn pins(&self, rs: &AgentRelationSet, cand: &AgentRelationSet, pre: &TruthSet, b: Base) -> bool {
        self.pins_witness(rs, cand, pre, b).is_none()
    }

    /// The first reachable pair on which `cand` departs from the pinned
    /// edges, as (agent, from, to, present in `cand`).
    fn pins_witness(&self, rs: &AgentRelationSet, cand: &AgentRelationSet, pre: &TruthSet, b: Base) -> Option<(usize, Base, Base, bool)> {
        let reach = self.reachable(rs, b);
        let mut sup = pre.to_bitset();
        sup.intersect_with(&reach);
        for (a, (orig, new)) in rs.relations().iter().zip(cand.relations()).enumerate() {
            for x in reach.ones() {
                let bx = Base(x as u32);
                let mut want = orig.row(bx).clone();
                if sup.contains(x) {
                    want.intersect_with(&sup);
                } else {
                    want.clear();
                }
                let mut got = new.row(bx).clone();
                got.intersect_with(&reach);
                if let Some(y) = got.symmetric_difference(&want).next() {
                    return Some((a, bx, Base(y as u32), got.contains(y)));
                }
            }
        }
        None
    }

    pub(crate) fn pinned_edge_violation(
        &self,
        rs: &AgentRelationSet,
        cand: &AgentRelationSet,
        phi: &Formula,
        b: Base,
    ) -> Result<Option<(usize, Base, Base, bool)>, EngineError> {
        let pre = self.truth_prepared(rs, self.prepare(&[], phi)?)?;
        Ok(self.pins_witness(rs, cand, &pre, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;
    use crate::relation::{relation_sets, RelationMode};
    use crate::universe::builders::classical;

    #[test]
    fn atoms_and_bot() {
        let u = classical(&["p"], &["a"]).build().unwrap();
        let rs = &relation_sets(&u, RelationMode::Exhaustive, DEFAULT_BUDGET).unwrap()[0];
        let e = SupportEngine::new(&u, SupportMode::Canonical);
        let p = parse("p").unwrap();
        let top = u.top();
        assert!(!e.supports(rs, Base(0), &[], &p).unwrap());
        assert!(e.supports(rs, Base(1), &[], &p).unwrap());
        assert!(e.supports(rs, top, &[], &parse("bot").unwrap()).unwrap());
        assert!(e.supports(rs, Base(2), &[], &parse("~p").unwrap()).unwrap());
        assert!(!e.supports(rs, Base(0), &[], &parse("~p").unwrap()).unwrap());
        assert!(e.supports(rs, Base(0), &[], &parse("p | ~p").unwrap()).unwrap());
    }

    #[test]
    fn unknown_symbols_are_errors() {
        let u = classical(&["p"], &["a"]).build().unwrap();
        let rs = &relation_sets(&u, RelationMode::Exhaustive, DEFAULT_BUDGET).unwrap()[0];
        let e = SupportEngine::new(&u, SupportMode::Canonical);
        assert!(matches!(e.supports(rs, Base(0), &[], &parse("z").unwrap()), Err(EngineError::Universe(UniverseError::UnknownAtom(_)))));
        assert!(e.supports(rs, Base(0), &[], &parse("K[b] p").unwrap()).is_err());
    }
}
