//! End-to-end pipeline.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tenonos_core::{CompositionReport, LibraryPool, MicroLibrary};

use crate::expr::Expr;
use crate::generate::{generate_config, GenerateParams, Pruned};
use crate::graph::LibGraph;
use crate::objective::{ObjectiveParser, ObjectiveSpec};
use crate::parse::{parse_kconfig, Diagnostic, Parsed};
use crate::select::{candidate_scores, select_candidates, ScoredPath, SelectParams};
use crate::validate::{validate_config, ConfigSelection, Provenance, Validation};
use crate::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Mock,
    Remote,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OrchestrateParams {
    pub select: SelectParams,
    pub generate: GenerateParams,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub objective: ObjectiveSpec,
    pub candidates: Vec<ScoredPath>,
    pub pruned: Vec<Pruned>,
    /// Symbols enabled only to satisfy dependencies or selects.
    pub repairs: Vec<String>,
    pub utility: f64,
    pub exact: bool,
    /// No candidate matched the objective.
    pub low_confidence: bool,
    pub validation: Validation,
    pub diagnostics: Vec<Diagnostic>,
    pub composition: Option<CompositionReport>,
    pub explored: u64,
    pub elapsed_us: u128,
}

#[derive(Debug, Clone)]
pub struct Orchestration {
    pub graph: LibGraph,
    pub selection: ConfigSelection,
    pub report: Report,
}

pub fn orchestrate(
    tree: &Path,
    objective: &str,
    parser: &dyn ObjectiveParser,
    params: &OrchestrateParams,
    mapping: Option<&BTreeMap<String, String>>,
) -> Result<Orchestration, GraphError> {
    let started = Instant::now();
    let parsed = parse_kconfig(tree)?;
    orchestrate_from(parsed, objective, parser, params, mapping, started)
}

pub fn orchestrate_parsed(
    parsed: Parsed,
    objective: &str,
    parser: &dyn ObjectiveParser,
    params: &OrchestrateParams,
    mapping: Option<&BTreeMap<String, String>>,
) -> Result<Orchestration, GraphError> {
    orchestrate_from(parsed, objective, parser, params, mapping, Instant::now())
}

fn orchestrate_from(
    parsed: Parsed,
    objective: &str,
    parser: &dyn ObjectiveParser,
    params: &OrchestrateParams,
    mapping: Option<&BTreeMap<String, String>>,
    started: Instant,
) -> Result<Orchestration, GraphError> {
    let Parsed { graph, diagnostics } = parsed;
    let spec = parser.parse(objective)?;
    let candidates = select_candidates(&graph, &spec, &params.select)?;
    let scores = candidate_scores(&graph, &candidates);
    let generation = generate_config(&graph, &scores, &spec, &params.generate)?;
    let selection = generation.selection;
    let validation = validate_config(&graph, &selection);
    let composition = mapping.map(|m| check_composition(&graph, &selection, m)).transpose()?;
    let repairs = selection
        .provenance
        .iter()
        .filter(|(_, p)| **p == Provenance::DependencyClosure)
        .map(|(s, _)| s.clone())
        .collect();
    let report = Report {
        objective: spec,
        low_confidence: scores.is_empty(),
        candidates,
        pruned: generation.pruned,
        repairs,
        utility: generation.utility,
        exact: generation.exact,
        validation,
        diagnostics,
        composition,
        explored: generation.explored,
        elapsed_us: started.elapsed().as_micros(),
    };
    Ok(Orchestration { graph, selection, report })
}

/// Composes the libraries behind enabled symbols.
///
/// Each library provides `cfg:<SYMBOL>` for its mapped symbols and requires
/// the same tag for every mapped symbol its symbols depend on (bare
/// conjuncts) or select.
pub fn check_composition(
    graph: &LibGraph,
    selection: &ConfigSelection,
    mapping: &BTreeMap<String, String>,
) -> Result<CompositionReport, GraphError> {
    let mut libs: BTreeMap<&str, MicroLibrary> = BTreeMap::new();
    for (sym, lib) in mapping {
        let node = graph.get(sym).ok_or_else(|| GraphError::Mapping(format!("unknown symbol {sym}")))?;
        let entry = libs.entry(lib.as_str()).or_insert_with(|| MicroLibrary::new(lib.clone()));
        *entry = entry.clone().provides(format!("cfg:{sym}"));
        let mut needs: Vec<String> = node
            .effective_deps()
            .map(|d| {
                d.conjuncts()
                    .into_iter()
                    .filter_map(|c| match c {
                        Expr::Sym(s) => Some(s.clone()),
                        _ => None,
                    })
                    .collect()
            })
            .unwrap_or_default();
        needs.extend(node.selects.iter().map(|s| s.target.clone()));
        for n in needs {
            if mapping.get(&n).is_some_and(|l| l != lib) {
                *entry = entry.clone().requires(format!("cfg:{n}"));
            }
        }
    }
    let mut pool = LibraryPool::new();
    for lib in libs.into_values() {
        pool.register(lib).map_err(|e| GraphError::Mapping(e.to_string()))?;
    }
    let mut chosen: Vec<&str> = selection
        .enabled()
        .filter_map(|s| mapping.get(s).map(String::as_str))
        .collect();
    chosen.sort_unstable();
    chosen.dedup();
    pool.compose_image(chosen).map_err(|e| GraphError::Mapping(e.to_string()))
}
