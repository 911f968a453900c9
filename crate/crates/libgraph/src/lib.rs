//! Kconfig-driven library orchestration.
//!
//! A Kconfig tree is parsed into a [`LibGraph`]. An objective is parsed into
//! an [`ObjectiveSpec`], scored walks over the graph pick candidate symbols,
//! and [`generate_config`] turns them into the highest-utility selection that
//! passes [`validate_config`].
//!
//! Keyword relevance stands in for semantic retrieval; there is no embedding
//! model or vector store.

pub mod corpus;
pub mod expr;
pub mod generate;
pub mod graph;
pub mod objective;
pub mod orchestrate;
pub mod parse;
pub mod score;
pub mod select;
pub mod validate;

use thiserror::Error;

pub use expr::{parse_expr, Atom, Env, Expr, Tri};
pub use generate::{generate_config, GenerateParams, Generation, PruneReason, Pruned};
pub use graph::{Edge, Item, KconfigNode, LibGraph, NodeId, NodeType, Relation, Value, ValueType};
pub use objective::{
    Goal, GoalKind, API_KEY_VAR, ENDPOINT_VAR, HttpTransport, MockParser, ObjectiveParser, ObjectiveSpec, RemoteParser, Transport,
};
pub use orchestrate::{
    check_composition, orchestrate, orchestrate_parsed, OrchestrateParams, Orchestration, Report, Strategy,
};
pub use parse::{parse_kconfig, parse_str, parse_tree, Diagnostic, FsLoader, MemLoader, Parsed, SourceLoader};
pub use score::{score_selection, utility};
pub use select::{candidate_scores, relevance, select_candidates, ScoredPath, SelectParams};
pub use validate::{validate_config, ConfigSelection, Provenance, Validation, Violation, ViolationKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("{file}:{line}: syntax error, expected {expected}")]
    Syntax { file: String, line: usize, expected: String },
    #[error("cannot resolve source `{0}`")]
    UnresolvedSource(String),
    #[error("`{0}` is sourced recursively")]
    CircularSource(String),
    #[error("objective text is empty")]
    EmptyObjective,
    #[error("remote parser unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("objective does not match the schema: {0}")]
    SchemaViolation(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("hard constraints cannot all hold: {0}")]
    ConstraintConflict(String),
    #[error("search budget of {0} nodes exhausted without a valid selection")]
    SearchBudget(u64),
    #[error("symbol `{0}` is not declared in the graph")]
    UnknownSymbol(String),
    #[error("constraint on `{symbol}` is invalid: {reason}")]
    InvalidConstraint { symbol: String, reason: String },
    #[error("selection is invalid: {} violation(s)", .0.len())]
    InvalidSelection(Vec<Violation>),
    #[error("library mapping: {0}")]
    Mapping(String),
}
