//! Selection utility.

use std::collections::BTreeMap;

use crate::graph::LibGraph;
use crate::objective::ObjectiveSpec;
use crate::validate::{validate_config, ConfigSelection};
use crate::GraphError;

pub const DEFAULT_LAMBDA: f64 = 0.01;

/// Sum of candidate scores for enabled candidates, minus `lambda` for every
/// other enabled bool/tristate symbol not named by a hard constraint.
pub fn utility(
    graph: &LibGraph,
    selection: &ConfigSelection,
    spec: &ObjectiveSpec,
    candidates: &BTreeMap<String, f64>,
    lambda: f64,
) -> f64 {
    let mut gain = 0.0;
    let mut extra = 0usize;
    for sym in selection.enabled() {
        if let Some(s) = candidates.get(sym) {
            gain += s;
        } else if !spec.hard_constraints.contains_key(sym) && graph.get(sym).is_some_and(|n| n.is_tri()) {
            extra += 1;
        }
    }
    gain - lambda * extra as f64
}

pub fn score_selection(
    graph: &LibGraph,
    selection: &ConfigSelection,
    spec: &ObjectiveSpec,
    candidates: &BTreeMap<String, f64>,
    lambda: f64,
) -> Result<f64, GraphError> {
    let v = validate_config(graph, selection);
    if !v.is_valid() {
        return Err(GraphError::InvalidSelection(v.violations().to_vec()));
    }
    Ok(utility(graph, selection, spec, candidates, lambda))
}
