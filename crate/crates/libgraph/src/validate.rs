//! Selections and dependency validation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::expr::{Env, Expr, Tri};
use crate::graph::{LibGraph, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    UserConstraint,
    PathSelected,
    DependencyClosure,
    /// Left at its default: the type's zero or first applicable `default`.
    Default,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigSelection {
    pub assignments: BTreeMap<String, Value>,
    pub provenance: BTreeMap<String, Provenance>,
}

impl ConfigSelection {
    pub fn new() -> Self {
        ConfigSelection::default()
    }

    pub fn set(&mut self, sym: impl Into<String>, value: Value, why: Provenance) {
        let sym = sym.into();
        self.provenance.insert(sym.clone(), why);
        self.assignments.insert(sym, value);
    }

    pub fn with(mut self, sym: &str, value: Value) -> Self {
        self.set(sym, value, Provenance::UserConstraint);
        self
    }

    pub fn get(&self, sym: &str) -> Option<&Value> {
        self.assignments.get(sym)
    }

    pub fn tri(&self, sym: &str) -> Tri {
        self.get(sym).map_or(Tri::N, Value::tri)
    }

    pub fn enabled(&self) -> impl Iterator<Item = &str> {
        self.assignments.iter().filter(|(_, v)| v.is_enabled()).map(|(k, _)| k.as_str())
    }

    /// `.config` text in graph declaration order; strays are appended.
    pub fn to_dotconfig(&self, graph: &LibGraph) -> String {
        let mut out = String::new();
        let mut emitted = std::collections::BTreeSet::new();
        let order = graph.symbols().map(|n| n.name.as_str()).chain(self.assignments.keys().map(String::as_str));
        for sym in order {
            if !emitted.insert(sym) {
                continue;
            }
            match self.assignments.get(sym) {
                Some(Value::Tri(Tri::N)) => {
                    let _ = writeln!(out, "# {sym} is not set");
                }
                Some(v) => {
                    let _ = writeln!(out, "{sym}={v}");
                }
                None => {}
            }
        }
        out
    }

    /// Parses `.config` text; types come from `graph` where known.
    pub fn from_dotconfig(text: &str, graph: &LibGraph) -> Result<ConfigSelection, String> {
        let mut sel = ConfigSelection::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("# ").and_then(|r| r.strip_suffix(" is not set")) {
                sel.set(rest, Value::Tri(Tri::N), Provenance::UserConstraint);
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (sym, raw) = line.split_once('=').ok_or_else(|| format!("line {}: expected SYMBOL=value", i + 1))?;
            let value = if let Some(q) = raw.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
                Value::Str(q.replace("\\\"", "\"").replace("\\\\", "\\"))
            } else if let Some(ty) = graph.get(sym).and_then(|n| n.value_type) {
                Value::parse_as(raw, ty).ok_or_else(|| format!("line {}: `{raw}` is not a {}", i + 1, ty.keyword()))?
            } else {
                serde_json::from_value(serde_json::Value::String(raw.to_string())).map_err(|e| e.to_string())?
            };
            sel.set(sym, value, Provenance::UserConstraint);
        }
        Ok(sel)
    }
}

/// Resolves symbols against a selection; unassigned tri symbols are `n`.
pub(crate) struct SelectionEnv<'a> {
    pub graph: &'a LibGraph,
    pub selection: &'a ConfigSelection,
}

impl Env for SelectionEnv<'_> {
    fn tri(&self, sym: &str) -> Tri {
        match self.graph.get(sym) {
            Some(n) if n.is_tri() => self.selection.tri(sym),
            _ => Tri::N,
        }
    }

    fn text(&self, sym: &str) -> String {
        match self.selection.get(sym) {
            Some(v) => v.text(),
            None if self.graph.get(sym).is_some_and(|n| n.is_tri()) => "n".into(),
            None => String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UnknownSymbol,
    TypeMismatch,
    Depends,
    Select,
    Choice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub symbol: String,
    pub kind: ViolationKind,
    pub clause: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Validation {
    Valid,
    Violations(Vec<Violation>),
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validation::Valid)
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            Validation::Valid => &[],
            Validation::Violations(v) => v,
        }
    }
}

/// Checks types, dependency bounds, select lower bounds and choice
/// exclusivity. A tri symbol at value `v` needs its dependencies to
/// evaluate to at least `v`. A select of `T` from a symbol at `v` with
/// condition `c` needs `T >= min(v, c)`.
pub fn validate_config(graph: &LibGraph, selection: &ConfigSelection) -> Validation {
    let env = SelectionEnv { graph, selection };
    let mut out = Vec::new();
    let mut push = |symbol: &str, kind, clause: String| {
        out.push(Violation { symbol: symbol.to_string(), kind, clause });
    };

    for (sym, value) in &selection.assignments {
        let Some(node) = graph.get(sym).filter(|n| n.node_type.is_assignable()) else {
            push(sym, ViolationKind::UnknownSymbol, "not declared".into());
            continue;
        };
        let ty = node.value_type.expect("assignable nodes are typed");
        if !value.matches(ty) {
            push(sym, ViolationKind::TypeMismatch, format!("{value} is not a valid {}", ty.keyword()));
            continue;
        }
        if !value.is_enabled() {
            continue;
        }
        let need = if ty.is_tri() { value.tri() } else { Tri::M };
        if let Some(deps) = node.effective_deps() {
            if deps.eval(&env) < need {
                push(sym, ViolationKind::Depends, format!("depends on {deps}"));
            }
        }
        if ty.is_tri() {
            for s in &node.selects {
                let bound = s.cond.as_ref().map_or(value.tri(), |c| c.eval(&env).min(value.tri()));
                if bound > Tri::N && env.tri(&s.target) < bound {
                    let clause = match &s.cond {
                        Some(c) => format!("select {} if {c}", s.target),
                        None => format!("select {}", s.target),
                    };
                    push(sym, ViolationKind::Select, clause);
                }
            }
        }
    }

    for choice in graph.choices() {
        let node = graph.node(choice);
        let visible = node.effective_deps().map_or(Tri::Y, |d| d.eval(&env));
        if visible == Tri::N {
            continue;
        }
        let members = graph.choice_members(choice);
        let any_visible = members
            .iter()
            .any(|m| graph.node(*m).effective_deps().map_or(Tri::Y, |d| d.eval(&env)) > Tri::N);
        let enabled: Vec<&str> = members
            .iter()
            .map(|m| graph.node(*m).name.as_str())
            .filter(|m| selection.get(m).is_some_and(Value::is_enabled))
            .collect();
        if any_visible && enabled.len() != 1 {
            push(&node.name, ViolationKind::Choice, format!("exactly one member enabled, found {}", enabled.len()));
        }
    }

    if out.is_empty() {
        Validation::Valid
    } else {
        Validation::Violations(out)
    }
}

/// Evaluates `expr` against a selection.
pub fn eval_under(graph: &LibGraph, selection: &ConfigSelection, expr: &Expr) -> Tri {
    expr.eval(&SelectionEnv { graph, selection })
}
