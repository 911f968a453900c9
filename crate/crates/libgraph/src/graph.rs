//! The library relation graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::expr::{escape, Expr, Tri};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeType {
    Config,
    Menuconfig,
    Choice,
    Menu,
    HelpText,
}

impl NodeType {
    pub fn is_config_like(self) -> bool {
        matches!(self, NodeType::Config | NodeType::Menuconfig | NodeType::Choice)
    }

    /// Config and menuconfig entries carry user-assignable values.
    pub fn is_assignable(self) -> bool {
        matches!(self, NodeType::Config | NodeType::Menuconfig)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    Bool,
    Tristate,
    Int,
    Hex,
    String,
}

impl ValueType {
    pub fn keyword(self) -> &'static str {
        match self {
            ValueType::Bool => "bool",
            ValueType::Tristate => "tristate",
            ValueType::Int => "int",
            ValueType::Hex => "hex",
            ValueType::String => "string",
        }
    }

    pub fn from_keyword(w: &str) -> Option<ValueType> {
        Some(match w {
            "bool" => ValueType::Bool,
            "tristate" => ValueType::Tristate,
            "int" => ValueType::Int,
            "hex" => ValueType::Hex,
            "string" => ValueType::String,
            _ => return None,
        })
    }

    pub fn is_tri(self) -> bool {
        matches!(self, ValueType::Bool | ValueType::Tristate)
    }

    /// Values a symbol of this type may take, for tri types.
    pub fn tri_domain(self) -> &'static [Tri] {
        match self {
            ValueType::Bool => &[Tri::N, Tri::Y],
            ValueType::Tristate => &Tri::ALL,
            _ => &[],
        }
    }
}

/// An assigned symbol value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Tri(Tri),
    Int(i64),
    Hex(u64),
    Str(String),
}

impl Value {
    pub fn is_enabled(&self) -> bool {
        !matches!(self, Value::Tri(Tri::N))
    }

    pub fn tri(&self) -> Tri {
        match self {
            Value::Tri(t) => *t,
            _ => Tri::N,
        }
    }

    pub fn matches(&self, ty: ValueType) -> bool {
        match (self, ty) {
            (Value::Tri(Tri::M), ValueType::Bool) => false,
            (Value::Tri(_), t) => t.is_tri(),
            (Value::Int(_), ValueType::Int) => true,
            (Value::Hex(_), ValueType::Hex) => true,
            (Value::Str(_), ValueType::String) => true,
            _ => false,
        }
    }

    /// Text used by `=` / `!=` comparisons.
    pub fn text(&self) -> String {
        match self {
            Value::Tri(t) => t.as_str().to_string(),
            Value::Int(i) => i.to_string(),
            Value::Hex(h) => format!("0x{h:x}"),
            Value::Str(s) => s.clone(),
        }
    }

    /// Parses a literal for a symbol of type `ty`.
    pub fn parse_as(text: &str, ty: ValueType) -> Option<Value> {
        match ty {
            ValueType::Bool | ValueType::Tristate => {
                Tri::parse(text).map(Value::Tri).filter(|v| v.matches(ty))
            }
            ValueType::Int => text.parse().ok().map(Value::Int),
            ValueType::Hex => {
                let h = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")).unwrap_or(text);
                u64::from_str_radix(h, 16).ok().map(Value::Hex)
            }
            ValueType::String => Some(Value::Str(text.to_string())),
        }
    }

    /// Reinterprets a loosely typed value (e.g. from JSON) for `ty`.
    pub fn coerce(&self, ty: ValueType) -> Option<Value> {
        if self.matches(ty) {
            return Some(self.clone());
        }
        match (self, ty) {
            (Value::Int(i), ValueType::Hex) if *i >= 0 => Some(Value::Hex(*i as u64)),
            (Value::Str(s), _) => Value::parse_as(s, ty),
            (v, ValueType::String) => Some(Value::Str(v.text())),
            _ => None,
        }
    }

    pub fn zero(ty: ValueType) -> Value {
        match ty {
            ValueType::Bool | ValueType::Tristate => Value::Tri(Tri::N),
            ValueType::Int => Value::Int(0),
            ValueType::Hex => Value::Hex(0),
            ValueType::String => Value::Str(String::new()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => write!(f, "\"{}\"", escape(s)),
            other => f.write_str(&other.text()),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(i) => s.serialize_i64(*i),
            Value::Str(v) => s.serialize_str(v),
            other => s.serialize_str(&other.text()),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    /// Numbers become `Int`; `"y"`/`"m"`/`"n"` become tri values; `"0x.."`
    /// becomes `Hex`; any other string is `Str`. Booleans map to `y`/`n`.
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Bool(b) => Ok(Value::Tri(if b { Tri::Y } else { Tri::N })),
            serde_json::Value::Number(n) => {
                n.as_i64().map(Value::Int).ok_or_else(|| D::Error::custom("integer out of range"))
            }
            serde_json::Value::String(s) => Ok(match Tri::parse(&s) {
                Some(t) => Value::Tri(t),
                None => match Value::parse_as(&s, ValueType::Hex) {
                    Some(h) if s.starts_with("0x") || s.starts_with("0X") => h,
                    _ => Value::Str(s),
                },
            }),
            other => Err(D::Error::custom(format!("unsupported value {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Select {
    pub target: String,
    pub cond: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Default {
    pub value: Expr,
    pub cond: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KconfigNode {
    pub name: String,
    pub node_type: NodeType,
    pub value_type: Option<ValueType>,
    pub prompt: Option<String>,
    /// The entry's own `depends on` clauses, joined with `&&`.
    pub depends_on: Option<Expr>,
    /// Conditions inherited from enclosing menus, choices and `if` blocks.
    pub inherited: Option<Expr>,
    pub selects: Vec<Select>,
    pub defaults: Vec<Default>,
    pub help: Option<String>,
    /// Synthesized name (menus, unnamed choices, help texts).
    pub anonymous: bool,
}

impl KconfigNode {
    pub(crate) fn new(name: impl Into<String>, node_type: NodeType) -> Self {
        KconfigNode {
            name: name.into(),
            node_type,
            value_type: None,
            prompt: None,
            depends_on: None,
            inherited: None,
            selects: Vec::new(),
            defaults: Vec::new(),
            help: None,
            anonymous: false,
        }
    }

    /// Inherited conditions and own dependencies, in that order.
    pub fn effective_deps(&self) -> Option<Expr> {
        Expr::conjunction(self.inherited.iter().chain(self.depends_on.iter()).cloned())
    }

    pub fn is_tri(&self) -> bool {
        self.node_type.is_assignable() && self.value_type.is_some_and(ValueType::is_tri)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    ParentOf,
    Describes,
    DependsOn,
    Selects,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub relation: Relation,
}

/// Block structure kept for unparsing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Item {
    Entry(NodeId),
    Menu(NodeId, Vec<Item>),
    Choice(NodeId, Vec<Item>),
    If(Expr, Vec<Item>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibGraph {
    pub title: Option<String>,
    pub nodes: Vec<KconfigNode>,
    pub edges: BTreeSet<Edge>,
    pub layout: Vec<Item>,
    #[serde(skip)]
    index: BTreeMap<String, NodeId>,
}

impl LibGraph {
    pub fn new() -> Self {
        LibGraph::default()
    }

    pub(crate) fn add_node(&mut self, node: KconfigNode) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.index.insert(node.name.clone(), id);
        self.nodes.push(node);
        id
    }

    pub(crate) fn add_edge(&mut self, src: NodeId, dst: NodeId, relation: Relation) {
        self.edges.insert(Edge { src, dst, relation });
    }

    pub(crate) fn reindex(&mut self) {
        self.index = self.nodes.iter().enumerate().map(|(i, n)| (n.name.clone(), NodeId(i))).collect();
    }

    pub fn node(&self, id: NodeId) -> &KconfigNode {
        &self.nodes[id.0]
    }

    pub fn lookup(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&KconfigNode> {
        self.lookup(name).map(|id| self.node(id))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    /// Assignable symbols in declaration order.
    pub fn symbols(&self) -> impl Iterator<Item = &KconfigNode> {
        self.nodes.iter().filter(|n| n.node_type.is_assignable())
    }

    /// Bool and tristate symbols in declaration order.
    pub fn tri_symbols(&self) -> impl Iterator<Item = &KconfigNode> {
        self.nodes.iter().filter(|n| n.is_tri())
    }

    pub fn edges_of(&self, relation: Relation) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.relation == relation)
    }

    pub fn children(&self, id: NodeId) -> Vec<NodeId> {
        self.edges_of(Relation::ParentOf).filter(|e| e.src == id).map(|e| e.dst).collect()
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.edges_of(Relation::ParentOf).find(|e| e.dst == id).map(|e| e.src)
    }

    pub fn help_of(&self, id: NodeId) -> Option<NodeId> {
        self.edges_of(Relation::Describes).find(|e| e.src == id).map(|e| e.dst)
    }

    /// Members of a choice group.
    pub fn choice_members(&self, choice: NodeId) -> Vec<NodeId> {
        self.children(choice).into_iter().filter(|c| self.node(*c).node_type.is_assignable()).collect()
    }

    pub fn choices(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids().filter(|id| self.node(*id).node_type == NodeType::Choice)
    }

    /// Checks the structural invariants; returns human-readable failures.
    pub fn check_shape(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut indegree: BTreeMap<NodeId, usize> = BTreeMap::new();
        for e in self.edges_of(Relation::ParentOf) {
            *indegree.entry(e.dst).or_default() += 1;
        }
        for (id, d) in &indegree {
            if *d > 1 {
                problems.push(format!("{} has {d} parents", self.node(*id).name));
            }
        }
        for id in self.ids() {
            let mut seen = BTreeSet::from([id]);
            let mut cur = id;
            while let Some(p) = self.parent(cur) {
                if !seen.insert(p) {
                    problems.push(format!("parent cycle through {}", self.node(id).name));
                    break;
                }
                cur = p;
            }
        }
        for id in self.ids() {
            let n = self.node(id);
            let describes = self.edges_of(Relation::Describes).filter(|e| e.src == id).count();
            let want = usize::from(n.node_type.is_config_like() && n.help.is_some());
            if describes != want {
                problems.push(format!("{} has {describes} describes edges, expected {want}", n.name));
            }
            if n.node_type == NodeType::HelpText && (n.depends_on.is_some() || !n.selects.is_empty()) {
                problems.push(format!("help node {} carries dependencies", n.name));
            }
        }
        problems
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph libgraph {\n  rankdir=LR;\n");
        for n in &self.nodes {
            let shape = match n.node_type {
                NodeType::Config => "box",
                NodeType::Menuconfig => "box3d",
                NodeType::Choice => "diamond",
                NodeType::Menu => "folder",
                NodeType::HelpText => "note",
            };
            let label = match n.node_type {
                NodeType::Menu => n.prompt.clone().unwrap_or_else(|| n.name.clone()),
                NodeType::HelpText => "help".to_string(),
                _ => n.name.clone(),
            };
            let _ = writeln!(out, "  \"{}\" [shape={shape}, label=\"{}\"];", escape(&n.name), escape(&label));
        }
        for e in &self.edges {
            let style = match e.relation {
                Relation::ParentOf => "solid",
                Relation::Describes => "dotted",
                Relation::DependsOn => "dashed",
                Relation::Selects => "bold",
            };
            let rel = serde_json::to_value(e.relation).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{rel}\", style={style}];",
                escape(&self.node(e.src).name),
                escape(&self.node(e.dst).name)
            );
        }
        out.push_str("}\n");
        out
    }

    /// Canonical Kconfig text. `source` directives are inlined.
    pub fn unparse(&self) -> String {
        let mut out = String::new();
        if let Some(t) = &self.title {
            let _ = writeln!(out, "mainmenu \"{}\"\n", escape(t));
        }
        self.unparse_items(&self.layout, &mut out);
        out
    }

    fn unparse_items(&self, items: &[Item], out: &mut String) {
        for item in items {
            match item {
                Item::Entry(id) => self.unparse_entry(*id, out),
                Item::Menu(id, inner) => {
                    let n = self.node(*id);
                    let _ = writeln!(out, "menu \"{}\"", escape(n.prompt.as_deref().unwrap_or("")));
                    if let Some(d) = &n.depends_on {
                        let _ = writeln!(out, "\tdepends on {d}");
                    }
                    out.push('\n');
                    self.unparse_items(inner, out);
                    out.push_str("endmenu\n\n");
                }
                Item::Choice(id, inner) => {
                    let n = self.node(*id);
                    if n.anonymous {
                        out.push_str("choice\n");
                    } else {
                        let _ = writeln!(out, "choice {}", n.name);
                    }
                    self.unparse_attrs(n, out);
                    out.push('\n');
                    self.unparse_items(inner, out);
                    out.push_str("endchoice\n\n");
                }
                Item::If(cond, inner) => {
                    let _ = writeln!(out, "if {cond}\n");
                    self.unparse_items(inner, out);
                    out.push_str("endif\n\n");
                }
            }
        }
    }

    fn unparse_entry(&self, id: NodeId, out: &mut String) {
        let n = self.node(id);
        let kw = if n.node_type == NodeType::Menuconfig { "menuconfig" } else { "config" };
        let _ = writeln!(out, "{kw} {}", n.name);
        self.unparse_attrs(n, out);
        out.push('\n');
    }

    fn unparse_attrs(&self, n: &KconfigNode, out: &mut String) {
        match (n.value_type, &n.prompt) {
            (Some(t), Some(p)) => {
                let _ = writeln!(out, "\t{} \"{}\"", t.keyword(), escape(p));
            }
            (Some(t), None) => {
                let _ = writeln!(out, "\t{}", t.keyword());
            }
            (None, Some(p)) => {
                let _ = writeln!(out, "\tprompt \"{}\"", escape(p));
            }
            (None, None) => {}
        }
        if let Some(d) = &n.depends_on {
            let _ = writeln!(out, "\tdepends on {d}");
        }
        for s in &n.selects {
            match &s.cond {
                Some(c) => writeln!(out, "\tselect {} if {c}", s.target),
                None => writeln!(out, "\tselect {}", s.target),
            }
            .ok();
        }
        for d in &n.defaults {
            match &d.cond {
                Some(c) => writeln!(out, "\tdefault {} if {c}", d.value),
                None => writeln!(out, "\tdefault {}", d.value),
            }
            .ok();
        }
        if let Some(h) = &n.help {
            out.push_str("\thelp\n");
            for line in h.lines() {
                if line.is_empty() {
                    out.push('\n');
                } else {
                    let _ = writeln!(out, "\t  {line}");
                }
            }
        }
    }
}
