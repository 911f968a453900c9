//! Configuration generation.
//!
//! Builds the maximum-utility valid selection by depth-first
//! branch-and-bound over the bool/tristate symbols that can influence it.
//! Symbols outside that set stay `n`: they are never required and enabling
//! them only adds penalty.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::expr::{normalize_literal, Atom, Expr, Tri};
use crate::graph::{LibGraph, NodeType, Value, ValueType};
use crate::objective::ObjectiveSpec;
use crate::score::{utility, DEFAULT_LAMBDA};
use crate::validate::{eval_under, validate_config, ConfigSelection, Provenance};
use crate::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerateParams {
    pub lambda: f64,
    /// Search nodes per run before settling for the best found.
    pub node_budget: u64,
}

impl Default for GenerateParams {
    fn default() -> Self {
        GenerateParams { lambda: DEFAULT_LAMBDA, node_budget: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneReason {
    /// No valid selection enables it under the hard constraints.
    Unsatisfiable,
    /// Enabling it lowers utility.
    LowUtility,
    /// The search budget ran out before deciding.
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pruned {
    pub symbol: String,
    pub reason: PruneReason,
    pub clause: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub selection: ConfigSelection,
    pub pruned: Vec<Pruned>,
    pub utility: f64,
    /// False when the budget cut the search short.
    pub exact: bool,
    pub explored: u64,
}

pub fn generate_config(
    graph: &LibGraph,
    candidates: &BTreeMap<String, f64>,
    spec: &ObjectiveSpec,
    params: &GenerateParams,
) -> Result<Generation, GraphError> {
    let hard = resolve_constraints(graph, spec)?;
    let problem = Problem::build(graph, candidates, &hard, params.lambda);

    let mut search = Search::new(&problem, params.node_budget, None);
    search.run();
    let explored = search.nodes;
    let exact = !search.exhausted;
    let Some((best, util)) = search.best else {
        return Err(if exact {
            GraphError::ConstraintConflict(
                hard.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", "),
            )
        } else {
            GraphError::SearchBudget(params.node_budget)
        });
    };

    let mut pruned = Vec::new();
    for sym in candidates.keys() {
        if best.tri(sym) != Tri::N || graph.get(sym).is_none_or(|n| !n.is_tri()) {
            continue;
        }
        let clause = graph
            .get(sym)
            .and_then(|n| n.effective_deps())
            .map(|d| format!("depends on {d}"))
            .unwrap_or_default();
        let reason = if hard.get(sym).is_some_and(|v| !v.is_enabled()) {
            PruneReason::Unsatisfiable
        } else {
            let var = problem.var_of[sym.as_str()];
            let mut feas = Search::new(&problem, params.node_budget, Some(var));
            feas.run();
            match (&feas.best, feas.exhausted) {
                (Some(_), _) => PruneReason::LowUtility,
                (None, false) => PruneReason::Unsatisfiable,
                (None, true) => PruneReason::Undecided,
            }
        };
        let clause = if hard.contains_key(sym) { "hard constraint".to_string() } else { clause };
        pruned.push(Pruned { symbol: sym.clone(), reason, clause });
    }

    Ok(Generation { selection: best, pruned, utility: util, exact, explored })
}

/// Checks hard constraints against the graph and coerces them to type.
pub fn resolve_constraints(graph: &LibGraph, spec: &ObjectiveSpec) -> Result<BTreeMap<String, Value>, GraphError> {
    let mut out = BTreeMap::new();
    for (sym, v) in &spec.hard_constraints {
        let node = graph
            .get(sym)
            .filter(|n| n.node_type.is_assignable())
            .ok_or_else(|| GraphError::UnknownSymbol(sym.clone()))?;
        let ty = node.value_type.expect("assignable nodes are typed");
        let value = v.coerce(ty).ok_or_else(|| GraphError::InvalidConstraint {
            symbol: sym.clone(),
            reason: format!("{v} is not a valid {}", ty.keyword()),
        })?;
        out.insert(sym.clone(), value);
    }
    Ok(out)
}

/// Fills bool/tristate values from `tri` and derives the rest: hard
/// constraints first, then the first applicable `default` of each visible
/// parameter symbol, else the type's zero.
pub(crate) fn complete(
    graph: &LibGraph,
    tri: &BTreeMap<&str, Tri>,
    hard: &BTreeMap<String, Value>,
    candidates: &BTreeMap<String, f64>,
) -> ConfigSelection {
    let mut sel = ConfigSelection::new();
    for n in graph.tri_symbols() {
        let v = tri.get(n.name.as_str()).copied().unwrap_or(Tri::N);
        let why = if hard.contains_key(&n.name) {
            Provenance::UserConstraint
        } else if v == Tri::N {
            Provenance::Default
        } else if candidates.contains_key(&n.name) {
            Provenance::PathSelected
        } else {
            Provenance::DependencyClosure
        };
        sel.set(n.name.clone(), Value::Tri(v), why);
    }
    for n in graph.symbols().filter(|n| !n.is_tri()) {
        if let Some(v) = hard.get(&n.name) {
            sel.set(n.name.clone(), v.clone(), Provenance::UserConstraint);
            continue;
        }
        let visible = n.effective_deps().is_none_or(|d| eval_under(graph, &sel, &d) > Tri::N);
        if !visible {
            continue;
        }
        let ty = n.value_type.expect("assignable nodes are typed");
        let value = n
            .defaults
            .iter()
            .find(|d| d.cond.as_ref().is_none_or(|c| eval_under(graph, &sel, c) > Tri::N))
            .and_then(|d| default_literal(graph, &sel, &d.value, ty))
            .unwrap_or_else(|| Value::zero(ty));
        sel.set(n.name.clone(), value, Provenance::Default);
    }
    sel
}

fn default_literal(graph: &LibGraph, sel: &ConfigSelection, e: &Expr, ty: ValueType) -> Option<Value> {
    match e {
        Expr::Lit(l) => Value::parse_as(l, ty),
        Expr::Const(t) => Value::parse_as(t.as_str(), ty),
        Expr::Sym(s) if graph.get(s).is_some_and(|n| n.value_type == Some(ty)) => sel.get(s).cloned(),
        _ => None,
    }
}

/// Compiled expression over decision-variable indices.
#[derive(Debug, Clone)]
enum CExpr {
    Const(u8),
    Var(usize),
    Unknown,
    Not(Box<CExpr>),
    And(Box<CExpr>, Box<CExpr>),
    Or(Box<CExpr>, Box<CExpr>),
    /// Variable compared with a tri literal; `None` never matches.
    CmpLit { var: usize, lit: Option<u8>, ne: bool },
    CmpVars { a: usize, b: usize, ne: bool },
}

impl CExpr {
    fn vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            CExpr::Var(v) | CExpr::CmpLit { var: v, .. } => {
                out.insert(*v);
            }
            CExpr::CmpVars { a, b, .. } => {
                out.insert(*a);
                out.insert(*b);
            }
            CExpr::Not(e) => e.vars(out),
            CExpr::And(a, b) | CExpr::Or(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            CExpr::Const(_) | CExpr::Unknown => {}
        }
    }

    /// Bounds on the value under a partial assignment.
    fn range(&self, a: &[Option<u8>]) -> (u8, u8) {
        match self {
            CExpr::Const(c) => (*c, *c),
            CExpr::Var(v) => a[*v].map_or((0, 2), |x| (x, x)),
            CExpr::Unknown => (0, 2),
            CExpr::Not(e) => {
                let (lo, hi) = e.range(a);
                (2 - hi, 2 - lo)
            }
            CExpr::And(x, y) => {
                let (a1, b1) = x.range(a);
                let (a2, b2) = y.range(a);
                (a1.min(a2), b1.min(b2))
            }
            CExpr::Or(x, y) => {
                let (a1, b1) = x.range(a);
                let (a2, b2) = y.range(a);
                (a1.max(a2), b1.max(b2))
            }
            CExpr::CmpLit { var, lit, ne } => match (lit, a[*var]) {
                (None, _) => fixed(*ne),
                (Some(l), Some(x)) => fixed((x == *l) != *ne),
                _ => (0, 2),
            },
            CExpr::CmpVars { a: x, b: y, ne } => match (a[*x], a[*y]) {
                (Some(p), Some(q)) => fixed((p == q) != *ne),
                _ => (0, 2),
            },
        }
    }
}

fn fixed(truth: bool) -> (u8, u8) {
    if truth {
        (2, 2)
    } else {
        (0, 0)
    }
}

#[derive(Debug)]
enum Constraint {
    /// `x <= deps`; for an assigned parameter symbol, `deps >= m`.
    Dep { x: Option<usize>, deps: CExpr },
    Sel { x: usize, target: Option<usize>, cond: Option<CExpr> },
    Choice { visible: CExpr, members: Vec<(usize, CExpr)> },
}

struct Problem<'g> {
    graph: &'g LibGraph,
    names: Vec<&'g str>,
    var_of: BTreeMap<&'g str, usize>,
    domain: Vec<&'static [Tri]>,
    initial: Vec<Option<u8>>,
    score: Vec<f64>,
    demanded: Vec<bool>,
    constraints: Vec<Constraint>,
    touching: Vec<Vec<usize>>,
    order: Vec<usize>,
    hard: BTreeMap<String, Value>,
    candidates: BTreeMap<String, f64>,
    lambda: f64,
}

enum AtomRef {
    Var(usize),
    Fixed(String),
    Unknown,
}

impl<'g> Problem<'g> {
    fn build(
        graph: &'g LibGraph,
        candidates: &BTreeMap<String, f64>,
        hard: &BTreeMap<String, Value>,
        lambda: f64,
    ) -> Self {
        let tri: Vec<_> = graph.tri_symbols().collect();
        let names: Vec<&str> = tri.iter().map(|n| n.name.as_str()).collect();
        let var_of: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let n = names.len();
        let domain = tri.iter().map(|t| t.value_type.unwrap().tri_domain()).collect();
        let score: Vec<f64> = names.iter().map(|s| candidates.get(*s).copied().unwrap_or(0.0)).collect();
        let demanded = names.iter().map(|s| candidates.contains_key(*s) || hard.contains_key(*s)).collect();

        let mut p = Problem {
            graph,
            names,
            var_of,
            domain,
            initial: vec![None; n],
            score,
            demanded,
            constraints: Vec::new(),
            touching: vec![Vec::new(); n],
            order: Vec::new(),
            hard: hard.clone(),
            candidates: candidates.clone(),
            lambda,
        };

        let relevant = p.relevant(candidates, hard);
        for (i, name) in p.names.iter().enumerate() {
            if let Some(v) = hard.get(*name) {
                p.initial[i] = Some(v.tri().level());
            } else if !relevant.contains(name) {
                p.initial[i] = Some(0);
            }
        }

        for node in graph.symbols() {
            let deps = node.effective_deps();
            if node.is_tri() {
                let x = p.var_of[node.name.as_str()];
                if let Some(d) = &deps {
                    p.constraints.push(Constraint::Dep { x: Some(x), deps: p.compile(d) });
                }
                for s in &node.selects {
                    let target = p.var_of.get(s.target.as_str()).copied();
                    let cond = s.cond.as_ref().map(|c| p.compile(c));
                    p.constraints.push(Constraint::Sel { x, target, cond });
                }
            } else if hard.get(&node.name).is_some_and(Value::is_enabled) {
                if let Some(d) = &deps {
                    p.constraints.push(Constraint::Dep { x: None, deps: p.compile(d) });
                }
            }
        }
        for c in graph.choices() {
            let visible = graph.node(c).effective_deps().map_or(CExpr::Const(2), |d| p.compile(&d));
            let members = graph
                .choice_members(c)
                .into_iter()
                .filter_map(|m| {
                    let node = graph.node(m);
                    let var = p.var_of.get(node.name.as_str()).copied()?;
                    Some((var, node.effective_deps().map_or(CExpr::Const(2), |d| p.compile(&d))))
                })
                .collect();
            p.constraints.push(Constraint::Choice { visible, members });
        }

        for (ci, c) in p.constraints.iter().enumerate() {
            let mut vars = BTreeSet::new();
            match c {
                Constraint::Dep { x, deps } => {
                    vars.extend(*x);
                    deps.vars(&mut vars);
                }
                Constraint::Sel { x, target, cond } => {
                    vars.insert(*x);
                    vars.extend(*target);
                    if let Some(c) = cond {
                        c.vars(&mut vars);
                    }
                }
                Constraint::Choice { visible, members } => {
                    visible.vars(&mut vars);
                    for (m, d) in members {
                        vars.insert(*m);
                        d.vars(&mut vars);
                    }
                }
            }
            for v in vars {
                p.touching[v].push(ci);
            }
        }

        p.order = p.decision_order(&relevant);
        p
    }

    fn relevant(&self, candidates: &BTreeMap<String, f64>, hard: &BTreeMap<String, Value>) -> BTreeSet<&'g str> {
        let g = self.graph;
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut queue: VecDeque<&str> = VecDeque::new();
        let push = |s: &'g str, seen: &mut BTreeSet<&'g str>, q: &mut VecDeque<&'g str>| {
            if seen.insert(s) {
                q.push_back(s);
            }
        };
        for n in g.symbols() {
            if candidates.contains_key(&n.name) || hard.contains_key(&n.name) {
                push(&n.name, &mut seen, &mut queue);
            }
        }
        for c in g.choices() {
            push(&g.node(c).name, &mut seen, &mut queue);
            for m in g.choice_members(c) {
                push(&g.node(m).name, &mut seen, &mut queue);
            }
        }
        while let Some(s) = queue.pop_front() {
            let Some(node) = g.get(s) else { continue };
            let mut refs: Vec<&'g str> = Vec::new();
            let take = |e: &'g Expr, refs: &mut Vec<&'g str>| refs.extend(e.symbols());
            if let Some(d) = &node.inherited {
                take(d, &mut refs);
            }
            if let Some(d) = &node.depends_on {
                take(d, &mut refs);
            }
            for sel in &node.selects {
                refs.push(&sel.target);
                if let Some(c) = &sel.cond {
                    take(c, &mut refs);
                }
            }
            if !node.is_tri() {
                for d in &node.defaults {
                    take(&d.value, &mut refs);
                    if let Some(c) = &d.cond {
                        take(c, &mut refs);
                    }
                }
            }
            for r in refs {
                if g.get(r).is_some() {
                    push(r, &mut seen, &mut queue);
                }
            }
        }
        seen
    }

    /// Candidates by descending score, then the rest in discovery order.
    fn decision_order(&self, relevant: &BTreeSet<&str>) -> Vec<usize> {
        let free: Vec<usize> = (0..self.names.len()).filter(|i| self.initial[*i].is_none()).collect();
        let mut cands: Vec<usize> = free.iter().copied().filter(|i| self.score[*i] > 0.0).collect();
        cands.sort_by(|a, b| self.score[*b].total_cmp(&self.score[*a]).then(a.cmp(b)));
        let mut order = cands.clone();
        let mut placed: BTreeSet<usize> = cands.iter().copied().collect();
        let mut queue: VecDeque<usize> = cands.into();
        while let Some(v) = queue.pop_front() {
            for &ci in &self.touching[v] {
                let mut vars = BTreeSet::new();
                match &self.constraints[ci] {
                    Constraint::Dep { deps, .. } => deps.vars(&mut vars),
                    Constraint::Sel { target, cond, .. } => {
                        vars.extend(*target);
                        if let Some(c) = cond {
                            c.vars(&mut vars);
                        }
                    }
                    Constraint::Choice { members, .. } => vars.extend(members.iter().map(|m| m.0)),
                }
                for u in vars {
                    if self.initial[u].is_none() && placed.insert(u) {
                        order.push(u);
                        queue.push_back(u);
                    }
                }
            }
        }
        for v in free {
            if relevant.contains(self.names[v]) && placed.insert(v) {
                order.push(v);
            }
        }
        order
    }

    fn compile(&self, e: &Expr) -> CExpr {
        match e {
            Expr::Const(t) => CExpr::Const(t.level()),
            Expr::Sym(s) => self.var_of.get(s.as_str()).map_or(CExpr::Const(0), |v| CExpr::Var(*v)),
            Expr::Lit(l) => CExpr::Const(Tri::parse(l).map_or(0, Tri::level)),
            Expr::Not(a) => CExpr::Not(Box::new(self.compile(a))),
            Expr::And(a, b) => CExpr::And(Box::new(self.compile(a)), Box::new(self.compile(b))),
            Expr::Or(a, b) => CExpr::Or(Box::new(self.compile(a)), Box::new(self.compile(b))),
            Expr::Eq(a, b) | Expr::Ne(a, b) => {
                let ne = matches!(e, Expr::Ne(..));
                match (self.atom(a), self.atom(b)) {
                    (AtomRef::Fixed(x), AtomRef::Fixed(y)) => CExpr::Const(if (x == y) != ne { 2 } else { 0 }),
                    (AtomRef::Var(v), AtomRef::Fixed(l)) | (AtomRef::Fixed(l), AtomRef::Var(v)) => {
                        CExpr::CmpLit { var: v, lit: Tri::parse(&l).map(Tri::level), ne }
                    }
                    (AtomRef::Var(x), AtomRef::Var(y)) => CExpr::CmpVars { a: x, b: y, ne },
                    _ => CExpr::Unknown,
                }
            }
        }
    }

    fn atom(&self, a: &Atom) -> AtomRef {
        match a {
            Atom::Lit(l) => AtomRef::Fixed(normalize_literal(l)),
            Atom::Sym(s) => {
                if let Some(v) = self.var_of.get(s.as_str()) {
                    return AtomRef::Var(*v);
                }
                match self.graph.get(s) {
                    Some(n) if n.node_type.is_assignable() => match self.hard.get(s) {
                        Some(v) => AtomRef::Fixed(v.text()),
                        None => AtomRef::Unknown,
                    },
                    _ => AtomRef::Fixed(String::new()),
                }
            }
        }
    }

    fn holds(&self, ci: usize, a: &[Option<u8>]) -> bool {
        match &self.constraints[ci] {
            Constraint::Dep { x: Some(x), deps } => a[*x].is_none_or(|v| v <= deps.range(a).1),
            Constraint::Dep { x: None, deps } => deps.range(a).1 >= 1,
            Constraint::Sel { x, target, cond } => {
                let lo_x = a[*x].unwrap_or(0);
                let need = cond.as_ref().map_or(lo_x, |c| c.range(a).0.min(lo_x));
                let hi_t = match target {
                    Some(t) => a[*t].unwrap_or(2),
                    None => 0,
                };
                need == 0 || hi_t >= need
            }
            Constraint::Choice { visible, members } => {
                if visible.range(a).0 == 0 {
                    return true;
                }
                let on = members.iter().filter(|(m, _)| a[*m].is_some_and(|v| v > 0)).count();
                if on > 1 {
                    return false;
                }
                let may = members
                    .iter()
                    .filter(|(m, d)| a[*m].map_or(d.range(a).1 > 0, |v| v > 0))
                    .count();
                let must_show = members.iter().any(|(_, d)| d.range(a).0 > 0);
                !(must_show && may == 0)
            }
        }
    }
}

const EPS: f64 = 1e-12;

struct Search<'p, 'g> {
    p: &'p Problem<'g>,
    assign: Vec<Option<u8>>,
    budget: u64,
    nodes: u64,
    exhausted: bool,
    /// Feasibility mode: this variable must be enabled; stop at first hit.
    force: Option<usize>,
    gain: f64,
    penalty: f64,
    remaining: f64,
    best: Option<(ConfigSelection, f64)>,
}

impl<'p, 'g> Search<'p, 'g> {
    fn new(p: &'p Problem<'g>, budget: u64, force: Option<usize>) -> Self {
        let assign = p.initial.clone();
        let mut gain = 0.0;
        let mut penalty = 0.0;
        let mut remaining = 0.0;
        for (i, v) in assign.iter().enumerate() {
            match v {
                Some(x) if *x > 0 => {
                    if p.score[i] > 0.0 {
                        gain += p.score[i];
                    } else if !p.demanded[i] {
                        penalty += p.lambda;
                    }
                }
                None => remaining += p.score[i],
                _ => {}
            }
        }
        Search { p, assign, budget, nodes: 0, exhausted: false, force, gain, penalty, remaining, best: None }
    }

    fn run(&mut self) {
        if self.force.is_some_and(|f| self.assign[f] == Some(0)) {
            return;
        }
        if (0..self.p.constraints.len()).all(|c| self.p.holds(c, &self.assign)) {
            self.dfs(0);
        }
    }

    fn done(&self) -> bool {
        self.exhausted || (self.force.is_some() && self.best.is_some())
    }

    fn dfs(&mut self, k: usize) {
        if self.done() {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return;
        }
        if self.force.is_none() {
            if let Some((_, best)) = &self.best {
                if self.gain + self.remaining - self.penalty <= best + EPS {
                    return;
                }
            }
        }
        if k == self.p.order.len() {
            self.leaf();
            return;
        }
        let v = self.p.order[k];
        let dom = self.p.domain[v];
        let values: Vec<u8> = if self.force == Some(v) {
            dom.iter().rev().filter(|t| **t != Tri::N).map(|t| t.level()).collect()
        } else if self.p.score[v] > 0.0 {
            dom.iter().rev().map(|t| t.level()).collect()
        } else {
            // n first, then y before m.
            let mut d: Vec<u8> = dom.iter().map(|t| t.level()).collect();
            d.sort_by_key(|x| match x {
                0 => 0,
                2 => 1,
                _ => 2,
            });
            d
        };
        self.remaining -= self.p.score[v];
        for val in values {
            let (dg, dp) = if val == 0 {
                (0.0, 0.0)
            } else if self.p.score[v] > 0.0 {
                (self.p.score[v], 0.0)
            } else if !self.p.demanded[v] {
                (0.0, self.p.lambda)
            } else {
                (0.0, 0.0)
            };
            self.assign[v] = Some(val);
            self.gain += dg;
            self.penalty += dp;
            if self.p.touching[v].iter().all(|c| self.p.holds(*c, &self.assign)) {
                self.dfs(k + 1);
            }
            self.gain -= dg;
            self.penalty -= dp;
            if self.done() {
                break;
            }
        }
        self.assign[v] = None;
        self.remaining += self.p.score[v];
    }

    fn leaf(&mut self) {
        let tri: BTreeMap<&str, Tri> = self
            .p
            .names
            .iter()
            .zip(&self.assign)
            .map(|(n, v)| (*n, Tri::from_level(v.unwrap_or(0))))
            .collect();
        let sel = complete(self.p.graph, &tri, &self.p.hard, &self.p.candidates);
        if !validate_config(self.p.graph, &sel).is_valid() {
            return;
        }
        let pseudo = ObjectiveSpec {
            goals: Vec::new(),
            keywords: BTreeMap::new(),
            hard_constraints: self.p.hard.clone(),
        };
        let u = utility(self.p.graph, &sel, &pseudo, &self.p.candidates, self.p.lambda);
        if self.best.as_ref().is_none_or(|(_, b)| u > b + EPS) {
            self.best = Some((sel, u));
        }
    }
}

/// Symbols whose kind makes them eligible as candidates.
pub fn is_candidate_kind(graph: &LibGraph, sym: &str) -> bool {
    graph.get(sym).is_some_and(|n| n.is_tri() && n.node_type != NodeType::Choice)
}
