mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::Rng;
use tenonos_libgraph::*;

fn spec(keywords: &[(&str, f64)]) -> ObjectiveSpec {
    ObjectiveSpec {
        goals: vec![Goal { kind: GoalKind::Performance, description: "test".into() }],
        keywords: keywords.iter().map(|(k, w)| (k.to_string(), *w)).collect(),
        hard_constraints: BTreeMap::new(),
    }
}

const CHAIN: &str = "\
config A
\tbool \"memory\"
\tselect B

config B
\tbool \"second\"
\tselect C

config C
\tbool \"third\"
";

#[test]
fn depth_two_path_score() {
    let g = parse_str(CHAIN).unwrap().graph;
    let paths = select_candidates(&g, &spec(&[("memory", 1.0)]), &SelectParams::default()).unwrap();
    let by: BTreeMap<_, _> = paths.iter().map(|p| (p.terminal().to_string(), p.clone())).collect();
    assert_eq!(by["A"].score, 1.0);
    assert!((by["B"].score - 0.85).abs() < 1e-12);
    assert!((by["C"].score - 0.7225).abs() < 1e-12);
    assert_eq!(by["C"].path, ["A", "B", "C"]);
    assert_eq!(by["C"].len(), 2);
}

#[test]
fn threshold_one_retains_nothing() {
    let g = parse_str(CHAIN).unwrap().graph;
    for decay in [0.1, 0.5, 0.85, 0.999] {
        let p = SelectParams { decay, threshold: 1.0, max_depth: 5 };
        assert!(select_candidates(&g, &spec(&[("memory", 1.0)]), &p).unwrap().is_empty());
    }
}

#[test]
fn no_overlap_gives_no_candidates() {
    let g = parse_str(CHAIN).unwrap().graph;
    assert!(select_candidates(&g, &spec(&[("zebra", 1.0)]), &SelectParams::default()).unwrap().is_empty());
}

#[test]
fn parameters_are_checked() {
    let g = parse_str(CHAIN).unwrap().graph;
    let s = spec(&[("memory", 1.0)]);
    for p in [
        SelectParams { decay: 1.0, ..SelectParams::default() },
        SelectParams { decay: 0.0, ..SelectParams::default() },
        SelectParams { threshold: 1.5, ..SelectParams::default() },
        SelectParams { threshold: -0.1, ..SelectParams::default() },
    ] {
        assert!(matches!(select_candidates(&g, &s, &p), Err(GraphError::InvalidParams(_))));
    }
}

#[test]
fn help_nodes_end_walks_and_only_symbols_score() {
    let text = "config A\n\tbool \"memory\"\n\thelp\n\t  see B\n\nconfig B\n\tint \"size\"\n\tdepends on A\n";
    let g = parse_str(text).unwrap().graph;
    let paths = select_candidates(&g, &spec(&[("memory", 1.0)]), &SelectParams::default()).unwrap();
    let terminals: BTreeSet<_> = paths.iter().map(|p| p.terminal().to_string()).collect();
    assert!(terminals.contains("A.help"));
    // B reaches A, but nothing flows from A to B, and help is terminal.
    assert!(!terminals.contains("B"));
    assert_eq!(candidate_scores(&g, &paths).keys().collect::<Vec<_>>(), ["A"]);
}

#[test]
fn relevance_is_normalized_weight_overlap() {
    let g = parse_str("config NET_TCP\n\tbool \"tcp transport\"\n").unwrap().graph;
    let id = g.lookup("NET_TCP").unwrap();
    let s = spec(&[("tcp", 0.8), ("network", 1.0), ("net", 0.2)]);
    assert!((relevance(&g, id, &s) - 1.0 / 2.0).abs() < 1e-12);
}

// Brute-force oracle: every simple walk from every seed.

fn words(s: &str) -> Vec<String> {
    s.to_lowercase().split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(String::from).collect()
}

fn oracle_relevance(g: &LibGraph, id: NodeId, spec: &ObjectiveSpec) -> f64 {
    let n = g.node(id);
    if n.node_type == NodeType::HelpText {
        return 0.0;
    }
    let mut text = Vec::new();
    if !n.anonymous {
        text.extend(words(&n.name.replace('_', " ")));
    }
    for t in [&n.prompt, &n.help].into_iter().flatten() {
        text.extend(words(t));
    }
    let total: f64 = spec.keywords.values().sum();
    let hit: f64 = spec
        .keywords
        .iter()
        .filter(|(k, _)| {
            let k = words(k);
            !k.is_empty() && text.windows(k.len()).any(|w| w == k.as_slice())
        })
        .map(|(_, w)| w)
        .sum();
    if total > 0.0 {
        hit / total
    } else {
        0.0
    }
}

fn oracle(g: &LibGraph, spec: &ObjectiveSpec, p: &SelectParams) -> BTreeMap<String, f64> {
    let mut hops: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for e in &g.edges {
        hops.entry(e.src).or_default().insert(e.dst);
        if e.relation == Relation::ParentOf {
            hops.entry(e.dst).or_default().insert(e.src);
        }
    }
    fn walk(
        g: &LibGraph,
        hops: &BTreeMap<NodeId, BTreeSet<NodeId>>,
        path: &mut Vec<NodeId>,
        rel: f64,
        p: &SelectParams,
        out: &mut BTreeMap<String, f64>,
    ) {
        let node = *path.last().unwrap();
        let score = rel * p.decay.powi(path.len() as i32 - 1);
        if score > p.threshold {
            let e = out.entry(g.node(node).name.clone()).or_insert(0.0);
            *e = e.max(score);
        }
        if path.len() - 1 == p.max_depth || g.node(node).node_type == NodeType::HelpText {
            return;
        }
        for next in hops.get(&node).into_iter().flatten() {
            if !path.contains(next) {
                path.push(*next);
                walk(g, hops, path, rel, p, out);
                path.pop();
            }
        }
    }
    let mut out = BTreeMap::new();
    for id in g.ids() {
        let rel = oracle_relevance(g, id, spec);
        if rel > 0.0 {
            walk(g, &hops, &mut vec![id], rel, p, &mut out);
        }
    }
    out
}

fn random_case(seed: u64) -> (LibGraph, ObjectiveSpec, SelectParams) {
    let mut rng = common::rng(seed);
    let text = common::random_kconfig(&mut rng, common::Shape { max_syms: 9, params: true, choices: true });
    let g = parse_str(&text).unwrap().graph;
    let k = rng.random_range(1..=4);
    let kw: Vec<(&str, f64)> =
        (0..k).map(|_| (*common::WORDS.choose(&mut rng).unwrap(), rng.random_range(1..=10) as f64 / 10.0)).collect();
    let params = SelectParams {
        decay: rng.random_range(0.3..0.95),
        threshold: rng.random_range(0.0..0.6),
        max_depth: rng.random_range(0..=4),
    };
    (g, spec(&kw), params)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn agrees_with_path_enumeration(seed in any::<u64>()) {
        let (g, s, p) = random_case(seed);
        prop_assume!(g.len() <= 20);
        let got: BTreeMap<String, f64> =
            select_candidates(&g, &s, &p).unwrap().iter().map(|sp| (sp.terminal().to_string(), sp.score)).collect();
        let want = oracle(&g, &s, &p);
        prop_assert_eq!(got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>());
        for (k, v) in &got {
            prop_assert!((v - want[k]).abs() < 1e-12, "{}: {} vs {}", k, v, want[k]);
        }
    }

    #[test]
    fn raising_threshold_never_adds(seed in any::<u64>(), bump in 0.0f64..0.5) {
        let (g, s, p) = random_case(seed);
        let terms = |t: f64| -> BTreeSet<String> {
            let q = SelectParams { threshold: t.min(1.0), ..p };
            select_candidates(&g, &s, &q).unwrap().iter().map(|sp| sp.terminal().to_string()).collect()
        };
        let low = terms(p.threshold);
        let high = terms(p.threshold + bump);
        prop_assert!(high.is_subset(&low));
    }

    #[test]
    fn paths_are_well_formed(seed in any::<u64>()) {
        let (g, s, p) = random_case(seed);
        let paths = select_candidates(&g, &s, &p).unwrap();
        let mut seen = BTreeSet::new();
        for sp in &paths {
            prop_assert!(seen.insert(sp.terminal().to_string()), "duplicate terminal");
            prop_assert!(sp.len() <= p.max_depth);
            prop_assert!(sp.score > p.threshold && sp.score <= 1.0);
            let seed_rel = relevance(&g, g.lookup(&sp.path[0]).unwrap(), &s);
            prop_assert!((sp.score - seed_rel * p.decay.powi(sp.len() as i32)).abs() < 1e-12);
            // A one-hop-longer path from the same seed scores strictly less.
            prop_assert!(seed_rel * p.decay.powi(sp.len() as i32 + 1) < sp.score);
            for w in sp.path.windows(2) {
                let (a, b) = (g.lookup(&w[0]).unwrap(), g.lookup(&w[1]).unwrap());
                let linked = g.edges.iter().any(|e| {
                    (e.src == a && e.dst == b) || (e.relation == Relation::ParentOf && e.src == b && e.dst == a)
                });
                prop_assert!(linked, "{} -> {} is not an edge", w[0], w[1]);
            }
        }
        let order: Vec<f64> = paths.iter().map(|sp| sp.score).collect();
        prop_assert!(order.windows(2).all(|w| w[0] >= w[1]));
    }
}
