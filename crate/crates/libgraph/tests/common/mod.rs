#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tenonos_libgraph::{Atom, Expr, Tri};

pub const WORDS: &[&str] = &[
    "memory", "allocator", "network", "tcp", "socket", "real-time", "scheduler", "latency", "power", "tickless",
    "security", "isolation", "filesystem", "storage", "cache", "driver", "timer", "console", "debug", "logging",
];

/// Shape knobs for [`random_kconfig`].
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_syms: usize,
    /// Emit int/hex/string parameters alongside bool/tristate symbols.
    pub params: bool,
    pub choices: bool,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn words(rng: &mut impl Rng, n: usize) -> String {
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn expr_over(rng: &mut impl Rng, pool: &[String], depth: u32) -> String {
    let pick = |rng: &mut dyn RngCore| pool.choose(rng).unwrap().clone();
    match rng.random_range(0..if depth == 0 { 3 } else { 7 }) {
        0 | 1 => pick(rng),
        2 => format!("!{}", pick(rng)),
        3 => format!("{} && {}", expr_over(rng, pool, depth - 1), expr_over(rng, pool, depth - 1)),
        4 => format!("({} || {})", expr_over(rng, pool, depth - 1), expr_over(rng, pool, depth - 1)),
        5 => format!("{} = {}", pick(rng), ["y", "m", "n"].choose(rng).unwrap()),
        _ => format!("{} != n", pick(rng)),
    }
}

/// Random Kconfig text over bool/tristate symbols `S0..`, with menus,
/// `if` blocks, menuconfig nesting and (optionally) choices and
/// int/hex/string parameters.
pub fn random_kconfig(rng: &mut impl Rng, shape: Shape) -> String {
    let n = rng.random_range(1..=shape.max_syms);
    let mut out = String::new();
    let mut declared: Vec<String> = Vec::new();
    let mut tri_decl: Vec<String> = Vec::new();
    let mut i = 0;
    let mut blocks: Vec<&str> = Vec::new();

    while i < n {
        let roll = rng.random_range(0..100);
        if roll < 8 && blocks.len() < 2 {
            let _ = writeln!(out, "menu \"{}\"", words(rng, 2));
            if !tri_decl.is_empty() && rng.random_bool(0.3) {
                let _ = writeln!(out, "\tdepends on {}", expr_over(rng, &tri_decl, 0));
            }
            blocks.push("endmenu");
            continue;
        }
        if roll < 14 && blocks.len() < 2 && !tri_decl.is_empty() {
            let _ = writeln!(out, "if {}", expr_over(rng, &tri_decl, 1));
            blocks.push("endif");
            continue;
        }
        if roll < 22 && !blocks.is_empty() {
            let _ = writeln!(out, "{}\n", blocks.pop().unwrap());
            continue;
        }
        if shape.choices && roll < 30 && n - i >= 2 {
            let members = rng.random_range(2..=3.min(n - i));
            let _ = writeln!(out, "choice\n\tprompt \"{}\"", words(rng, 2));
            if !tri_decl.is_empty() && rng.random_bool(0.3) {
                let _ = writeln!(out, "\tdepends on {}", expr_over(rng, &tri_decl, 0));
            }
            out.push('\n');
            let mut local = Vec::new();
            for _ in 0..members {
                let name = format!("S{i}");
                let _ = writeln!(out, "config {name}\n\tbool \"{}\"", words(rng, 3));
                if !tri_decl.is_empty() && rng.random_bool(0.25) {
                    let _ = writeln!(out, "\tdepends on {}", expr_over(rng, &tri_decl, 0));
                }
                if rng.random_bool(0.3) {
                    let _ = writeln!(out, "\thelp\n\t  {}", words(rng, 4));
                }
                out.push('\n');
                local.push(name);
                i += 1;
            }
            let _ = writeln!(out, "endchoice\n");
            declared.extend(local.iter().cloned());
            tri_decl.extend(local);
            continue;
        }

        let name = format!("S{i}");
        i += 1;
        if shape.params && rng.random_bool(0.12) {
            let (ty, lit) = match rng.random_range(0..3) {
                0 => ("int", rng.random_range(0..100).to_string()),
                1 => ("hex", format!("0x{:x}", rng.random_range(0..4096))),
                _ => ("string", format!("\"{}\"", words(rng, 1))),
            };
            let _ = writeln!(out, "config {name}\n\t{ty} \"{}\"\n\tdefault {lit}", words(rng, 2));
            if !tri_decl.is_empty() && rng.random_bool(0.4) {
                let _ = writeln!(out, "\tdepends on {}", expr_over(rng, &tri_decl, 0));
            }
            out.push('\n');
            declared.push(name);
            continue;
        }

        let keyword = if rng.random_bool(0.1) { "menuconfig" } else { "config" };
        let ty = if rng.random_bool(0.3) { "tristate" } else { "bool" };
        let _ = writeln!(out, "{keyword} {name}\n\t{ty} \"{}\"", words(rng, 3));
        if !tri_decl.is_empty() && rng.random_bool(0.5) {
            let _ = writeln!(out, "\tdepends on {}", expr_over(rng, &tri_decl, 1));
        }
        if !tri_decl.is_empty() && rng.random_bool(0.25) {
            let target = tri_decl.choose(rng).unwrap().clone();
            if rng.random_bool(0.3) {
                let _ = writeln!(out, "\tselect {target} if {}", expr_over(rng, &tri_decl, 0));
            } else {
                let _ = writeln!(out, "\tselect {target}");
            }
        }
        if rng.random_bool(0.2) {
            let _ = writeln!(out, "\tdefault {}", if ty == "bool" { "y" } else { "m" });
        }
        if rng.random_bool(0.5) {
            let _ = writeln!(out, "\thelp\n\t  {}\n\t  {}", words(rng, 4), words(rng, 3));
        }
        out.push('\n');
        declared.push(name.clone());
        tri_decl.push(name);
    }
    while let Some(end) = blocks.pop() {
        let _ = writeln!(out, "{end}\n");
    }
    out
}

/// Tri-valued evaluation from first principles: `n`=0, `m`=1, `y`=2.
pub fn eval(e: &Expr, vals: &BTreeMap<String, u8>) -> u8 {
    let text = |a: &Atom| match a {
        Atom::Sym(s) => ["n", "m", "y"][*vals.get(s).unwrap_or(&0) as usize].to_string(),
        Atom::Lit(l) => l.clone(),
    };
    match e {
        Expr::Const(t) => t.level(),
        Expr::Sym(s) => *vals.get(s).unwrap_or(&0),
        Expr::Lit(l) => Tri::parse(l).map_or(0, Tri::level),
        Expr::Not(a) => 2 - eval(a, vals),
        Expr::And(a, b) => eval(a, vals).min(eval(b, vals)),
        Expr::Or(a, b) => eval(a, vals).max(eval(b, vals)),
        Expr::Eq(a, b) => 2 * u8::from(text(a) == text(b)),
        Expr::Ne(a, b) => 2 * u8::from(text(a) != text(b)),
    }
}

/// Symbols violating the dependency rules under a bool/tristate-only
/// assignment, computed straight from the graph's node records.
pub fn oracle_violations(g: &tenonos_libgraph::LibGraph, vals: &BTreeMap<String, u8>) -> std::collections::BTreeSet<String> {
    use tenonos_libgraph::{NodeType, Relation};
    let mut bad = std::collections::BTreeSet::new();
    for n in &g.nodes {
        let v = *vals.get(&n.name).unwrap_or(&0);
        if v == 0 || !n.is_tri() {
            continue;
        }
        if n.effective_deps().is_some_and(|d| eval(&d, vals) < v) {
            bad.insert(n.name.clone());
        }
        for s in &n.selects {
            let bound = s.cond.as_ref().map_or(v, |c| eval(c, vals).min(v));
            if bound > 0 && *vals.get(&s.target).unwrap_or(&0) < bound {
                bad.insert(n.name.clone());
            }
        }
    }
    for (i, n) in g.nodes.iter().enumerate() {
        if n.node_type != NodeType::Choice {
            continue;
        }
        if n.effective_deps().is_some_and(|d| eval(&d, vals) == 0) {
            continue;
        }
        let members: Vec<_> = g
            .edges
            .iter()
            .filter(|e| e.relation == Relation::ParentOf && e.src.0 == i && g.nodes[e.dst.0].is_tri())
            .map(|e| &g.nodes[e.dst.0])
            .collect();
        let visible = members.iter().any(|m| m.effective_deps().is_none_or(|d| eval(&d, vals) > 0));
        let on = members.iter().filter(|m| vals.get(&m.name).is_some_and(|v| *v > 0)).count();
        if visible && on != 1 {
            bad.insert(n.name.clone());
        }
    }
    bad
}

/// Every bool/tristate assignment of the graph's symbols, in a fixed order.
pub fn assignments(g: &tenonos_libgraph::LibGraph) -> Vec<BTreeMap<String, u8>> {
    let syms: Vec<(String, u8)> = g
        .nodes
        .iter()
        .filter(|n| n.is_tri())
        .map(|n| (n.name.clone(), if n.value_type == Some(tenonos_libgraph::ValueType::Tristate) { 3 } else { 2 }))
        .collect();
    let mut out = vec![BTreeMap::new()];
    for (name, card) in syms {
        let mut next = Vec::with_capacity(out.len() * card as usize);
        for m in &out {
            for v in 0..card {
                let mut m = m.clone();
                m.insert(name.clone(), if card == 2 { v * 2 } else { v });
                next.push(m);
            }
        }
        out = next;
    }
    out
}

pub fn to_selection(vals: &BTreeMap<String, u8>) -> tenonos_libgraph::ConfigSelection {
    let mut sel = tenonos_libgraph::ConfigSelection::new();
    for (k, v) in vals {
        sel.set(k.clone(), tenonos_libgraph::Value::Tri(Tri::from_level(*v)), tenonos_libgraph::Provenance::UserConstraint);
    }
    sel
}
