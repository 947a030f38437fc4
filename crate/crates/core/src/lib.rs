//! Public announcement logic over two semantics: S5 Kripke models and
//! base-extension support over finite spaces of rule bases.

pub mod dot;
pub mod formula;
pub mod kripke;
pub mod relation;
pub mod scenario;
pub mod support;
pub mod universe;
pub mod update;
pub mod validity;

pub use formula::{compose_delta, parse, translate, translate_traced, Formula, ParseError};
pub use kripke::{KripkeError, KripkeModel, KripkeSpec};
pub use relation::{
    check_modal_conditions, coarsest_refinement, load_relation_set, reachable_set, refine_completion, relation_domain,
    relation_set_to_specs, relation_sets, rule_union, saturate_core_relation, AgentRelation, AgentRelationSet, Completion, Condition,
    ConditionReport, CoreRelation, RelationError, RelationFileError, RelationMode, RelationSpec, Saturated,
};
pub use scenario::{LoadedScenario, ScenarioError, ScenarioReport, ScenarioSpec, Semantics, Step};
pub use support::{EngineError, Judgement, SupportEngine, SupportMode};
pub use universe::{Base, BaseRule, Universe, UniverseError, UniverseSpec};
pub use update::{
    canonical_update, canonical_update_sequence, construct_update, construct_update_sequence, effective_update_violation,
    effective_updates, is_effective_update, EffectiveViolation, UpdateError, UpdateStages,
};
pub use validity::{
    axiom_suite, mode_disagreements, standard_schemas, template_pool, valid_in_space, Counterexample, Schema, Space, SuiteReport,
};
