//! Candidate discovery by scored walks over the graph.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::graph::{LibGraph, NodeId, NodeType, Relation};
use crate::objective::{contains_phrase, ObjectiveSpec};
use crate::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectParams {
    pub decay: f64,
    /// Paths must score strictly above this.
    pub threshold: f64,
    pub max_depth: usize,
}

impl Default for SelectParams {
    fn default() -> Self {
        SelectParams { decay: 0.85, threshold: 0.3, max_depth: 3 }
    }
}

impl SelectParams {
    pub fn validate(&self) -> Result<(), GraphError> {
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(GraphError::InvalidParams(format!("decay {} must lie in (0, 1)", self.decay)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(GraphError::InvalidParams(format!("threshold {} must lie in [0, 1]", self.threshold)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPath {
    /// Node names from seed to terminal.
    pub path: Vec<String>,
    pub score: f64,
}

impl ScoredPath {
    pub fn terminal(&self) -> &str {
        self.path.last().map(String::as_str).unwrap_or("")
    }

    pub fn len(&self) -> usize {
        self.path.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }
}

/// Text a node is matched on: symbol words, prompt and help.
pub fn node_text(graph: &LibGraph, id: NodeId) -> String {
    let n = graph.node(id);
    let mut parts = Vec::new();
    if !n.anonymous {
        parts.push(n.name.replace('_', " "));
    }
    parts.extend(n.prompt.clone());
    parts.extend(n.help.clone());
    parts.join(" ").to_lowercase()
}

/// Fraction of total keyword weight matched by the node's text.
pub fn relevance(graph: &LibGraph, id: NodeId, spec: &ObjectiveSpec) -> f64 {
    let total = spec.total_weight();
    if total <= 0.0 || graph.node(id).node_type == NodeType::HelpText {
        return 0.0;
    }
    let text = node_text(graph, id);
    let hit: f64 = spec.keywords.iter().filter(|(k, _)| contains_phrase(&text, &k.to_lowercase())).map(|(_, w)| w).sum();
    (hit / total).clamp(0.0, 1.0)
}

/// Outgoing hops: parent-of both ways, dependency and select edges forward,
/// and a describes hop into a help node, which ends the walk.
pub fn neighbors(graph: &LibGraph) -> Vec<Vec<NodeId>> {
    let mut adj = vec![Vec::new(); graph.len()];
    for e in &graph.edges {
        adj[e.src.0].push(e.dst);
        if e.relation == Relation::ParentOf {
            adj[e.dst.0].push(e.src);
        }
    }
    for a in &mut adj {
        a.sort();
        a.dedup();
    }
    adj
}

pub fn select_candidates(graph: &LibGraph, spec: &ObjectiveSpec, params: &SelectParams) -> Result<Vec<ScoredPath>, GraphError> {
    params.validate()?;
    let adj = neighbors(graph);
    let mut best: BTreeMap<NodeId, (f64, Vec<NodeId>)> = BTreeMap::new();

    for seed in graph.ids() {
        let rel = relevance(graph, seed, spec);
        if rel <= 0.0 {
            continue;
        }
        // Shortest hop counts give the best score per terminal since decay < 1.
        let mut prev: BTreeMap<NodeId, Option<NodeId>> = BTreeMap::from([(seed, None)]);
        let mut queue = VecDeque::from([(seed, 0usize)]);
        while let Some((node, depth)) = queue.pop_front() {
            let path = trace(&prev, node);
            let score = rel * params.decay.powi(depth as i32);
            if score > params.threshold {
                let better = match best.get(&node) {
                    None => true,
                    Some((s, p)) => score > *s || (score == *s && (path.len(), &path) < (p.len(), p)),
                };
                if better {
                    best.insert(node, (score, path));
                }
            }
            if depth == params.max_depth || graph.node(node).node_type == NodeType::HelpText {
                continue;
            }
            for &next in &adj[node.0] {
                if let std::collections::btree_map::Entry::Vacant(e) = prev.entry(next) {
                    e.insert(Some(node));
                    queue.push_back((next, depth + 1));
                }
            }
        }
    }

    let mut out: Vec<ScoredPath> = best
        .into_values()
        .map(|(score, path)| ScoredPath { path: path.iter().map(|id| graph.node(*id).name.clone()).collect(), score })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.terminal().cmp(b.terminal())));
    Ok(out)
}

fn trace(prev: &BTreeMap<NodeId, Option<NodeId>>, mut node: NodeId) -> Vec<NodeId> {
    let mut path = vec![node];
    while let Some(Some(p)) = prev.get(&node) {
        path.push(*p);
        node = *p;
    }
    path.reverse();
    path
}

/// Best score per bool/tristate symbol among retained path terminals.
pub fn candidate_scores(graph: &LibGraph, paths: &[ScoredPath]) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for p in paths {
        if graph.get(p.terminal()).is_some_and(|n| n.is_tri()) {
            let e = out.entry(p.terminal().to_string()).or_insert(0.0);
            *e = e.max(p.score);
        }
    }
    out
}
