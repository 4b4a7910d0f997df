//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::Rng;

use lsts::graph::{compile, dag_accepts, AbstractGraph, EdgeId, GuardedEdge, NodeId};
use lsts::spec::{sat_spec, AtomLiteral, LabelSet, LabelTrace, Predicate, SpecAst};
use lsts::teacher::{TeacherParams, TeacherState};

pub const ATOMS: [&str; 3] = ["a", "b", "c"];

/// Predicates with at most `atoms` literals and `conns` binary connectives,
/// paired with the literals and connectives each one uses.
fn predicates(atoms: usize, conns: usize) -> Vec<(Predicate, usize, usize)> {
    let mut out = Vec::new();
    if atoms == 0 {
        return out;
    }
    for name in ATOMS {
        for negated in [false, true] {
            out.push((Predicate::Literal(AtomLiteral::new(name, negated).unwrap()), 1, 0));
        }
    }
    if atoms >= 2 && conns >= 1 {
        for (l, la, lc) in predicates(atoms - 1, conns - 1) {
            for (r, ra, rc) in predicates(atoms - la, conns - 1 - lc) {
                out.push((l.clone().and(r.clone()), la + ra, lc + rc + 1));
                out.push((l.clone().or(r), la + ra, lc + rc + 1));
            }
        }
    }
    out
}

fn specs(atoms: usize, conns: usize) -> Vec<(SpecAst, usize, usize)> {
    let mut out: Vec<(SpecAst, usize, usize)> =
        predicates(atoms, conns).into_iter().map(|(p, a, c)| (SpecAst::achieve(p), a, c)).collect();
    if atoms >= 2 && conns >= 1 {
        for (s, sa, sc) in specs(atoms - 1, conns - 1) {
            for (p, pa, pc) in predicates(atoms - sa, conns - 1 - sc) {
                out.push((s.clone().ensuring(p), sa + pa, sc + pc + 1));
            }
            for (r, ra, rc) in specs(atoms - sa, conns - 1 - sc) {
                out.push((s.clone().then(r.clone()), sa + ra, sc + rc + 1));
                out.push((s.clone().or(r), sa + ra, sc + rc + 1));
            }
        }
    }
    out
}

fn rename_pred(p: &Predicate, map: &mut BTreeMap<String, String>) -> Predicate {
    match p {
        Predicate::Literal(l) => {
            let next = ATOMS[map.len().min(ATOMS.len() - 1)].to_string();
            let name = map.entry(l.name.clone()).or_insert(next).clone();
            Predicate::Literal(AtomLiteral::new(name, l.negated).unwrap())
        }
        Predicate::And(a, b) => {
            let a = rename_pred(a, map);
            a.and(rename_pred(b, map))
        }
        Predicate::Or(a, b) => {
            let a = rename_pred(a, map);
            a.or(rename_pred(b, map))
        }
    }
}

fn rename_spec(s: &SpecAst, map: &mut BTreeMap<String, String>) -> SpecAst {
    match s {
        SpecAst::Achieve(p) => SpecAst::achieve(rename_pred(p, map)),
        SpecAst::Ensuring(phi, p) => {
            let phi = rename_spec(phi, map);
            phi.ensuring(rename_pred(p, map))
        }
        SpecAst::Seq(a, b) => {
            let a = rename_spec(a, map);
            a.then(rename_spec(b, map))
        }
        SpecAst::Or(a, b) => {
            let a = rename_spec(a, map);
            a.or(rename_spec(b, map))
        }
    }
}

/// Every spec with at most `atoms` literal occurrences and `conns`
/// connectives (`;`, `or`, `ensuring`, `&`, `|`), with atoms renamed to
/// a, b, c in order of first occurrence and duplicates removed.
pub fn enumerate_specs(atoms: usize, conns: usize) -> Vec<SpecAst> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (s, _, _) in specs(atoms, conns) {
        let c = rename_spec(&s, &mut BTreeMap::new());
        if seen.insert(c.to_string()) {
            out.push(c);
        }
    }
    out
}

pub fn spec_atoms(s: &SpecAst) -> BTreeSet<String> {
    fn go(s: &SpecAst, out: &mut BTreeSet<String>) {
        match s {
            SpecAst::Achieve(p) => out.extend(p.atoms().into_iter().map(String::from)),
            SpecAst::Ensuring(phi, p) => {
                go(phi, out);
                out.extend(p.atoms().into_iter().map(String::from));
            }
            SpecAst::Seq(a, b) | SpecAst::Or(a, b) => {
                go(a, out);
                go(b, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(s, &mut out);
    out
}

/// All traces of length 1..=`max_len` over subsets of `atoms`.
pub fn all_traces(atoms: &[String], max_len: usize) -> Vec<LabelTrace> {
    let sets: Vec<LabelSet> = (0..1usize << atoms.len())
        .map(|m| LabelSet::from_atoms(atoms.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, a)| a)).unwrap())
        .collect();
    let mut out = Vec::new();
    let mut layer: Vec<Vec<LabelSet>> = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|t| {
                sets.iter().map(move |s| {
                    let mut t = t.clone();
                    t.push(s.clone());
                    t
                })
            })
            .collect();
        out.extend(layer.iter().cloned().map(LabelTrace::new));
    }
    out
}

pub struct Equivalence {
    pub specs: usize,
    pub checks: usize,
    pub mismatches: Vec<(String, LabelTrace)>,
}

/// Compares graph acceptance with direct satisfaction on every enumerated
/// spec and every trace over its atoms.
pub fn check_equivalence(atoms: usize, conns: usize, max_len: usize) -> Equivalence {
    let all = enumerate_specs(atoms, conns);
    let mut traces_by_atoms: BTreeMap<BTreeSet<String>, Vec<LabelTrace>> = BTreeMap::new();
    let mut result = Equivalence { specs: all.len(), checks: 0, mismatches: Vec::new() };
    for phi in &all {
        let g = compile(phi).unwrap();
        let atoms = spec_atoms(phi);
        let traces = traces_by_atoms
            .entry(atoms.clone())
            .or_insert_with(|| all_traces(&atoms.iter().cloned().collect::<Vec<_>>(), max_len));
        for t in traces.iter() {
            result.checks += 1;
            if dag_accepts(&g, t) != sat_spec(phi, t).unwrap() {
                result.mismatches.push((phi.to_string(), t.clone()));
            }
        }
    }
    result
}

/// Random DAG on at most `max_nodes` nodes with edges from lower to higher
/// ids, q0 = 0 and a nonempty set of finals.
pub fn random_dag<R: Rng>(rng: &mut R, max_nodes: usize) -> AbstractGraph {
    let n = rng.gen_range(2..=max_nodes);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(0.4) {
                edges.push(GuardedEdge {
                    src: NodeId(u),
                    dst: NodeId(v),
                    guard: Predicate::atom(&format!("p{u}_{v}")),
                    safety: None,
                });
            }
        }
    }
    let mut finals: BTreeSet<NodeId> = (1..n).filter(|_| rng.gen_bool(0.3)).map(NodeId).collect();
    if finals.is_empty() {
        finals.insert(NodeId(n - 1));
    }
    AbstractGraph { node_count: n, edges, q0: NodeId(0), finals }
}

/// Every node sequence starting at `from` (every prefix included).
fn walks(g: &AbstractGraph, from: NodeId) -> Vec<Vec<NodeId>> {
    let mut out = vec![vec![from]];
    for e in &g.edges {
        if e.src == from {
            for mut w in walks(g, e.dst) {
                w.insert(0, from);
                out.push(w);
            }
        }
    }
    out
}

/// The discard rule decided by enumerating paths: `(u, v)` goes when it is
/// not learned, some walk from q0 reaches `u`, no walk from `p` does, and
/// every complete q0-to-final path using the edge visits `p`.
pub fn discard_oracle(g: &AbstractGraph, p: NodeId, learned: &BTreeSet<EdgeId>) -> BTreeSet<EdgeId> {
    let from_q0 = walks(g, g.q0);
    let from_p = walks(g, p);
    let complete: Vec<&Vec<NodeId>> = from_q0.iter().filter(|w| g.finals.contains(w.last().unwrap())).collect();
    let mut out = BTreeSet::new();
    for (i, e) in g.edges.iter().enumerate() {
        if learned.contains(&EdgeId(i)) {
            continue;
        }
        let reachable = from_q0.iter().any(|w| w.contains(&e.src));
        let after_p = from_p.iter().any(|w| w.contains(&e.src));
        let uses = |w: &&&Vec<NodeId>| w.windows(2).any(|s| s[0] == e.src && s[1] == e.dst);
        let all_through_p = complete.iter().filter(uses).all(|w| w.contains(&p));
        if reachable && !after_p && all_through_p {
            out.insert(EdgeId(i));
        }
    }
    out
}

/// Largest gap between `update_teacher` and the closed form
/// `sum_i alpha (1 - alpha)^(n - i) g_i` over `runs` random sequences.
pub fn teacher_recursion_error<R: Rng>(rng: &mut R, runs: usize) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..runs {
        let alpha = rng.gen_range(0.01..1.0);
        let mut ts = TeacherState::new(TeacherParams { alpha, ..TeacherParams::default() });
        ts.activate(EdgeId(0));
        let len = rng.gen_range(1..50);
        let gs: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0)).collect();
        for &g in &gs {
            ts.update_teacher(EdgeId(0), g).unwrap();
        }
        let n = gs.len();
        let closed: f64 = gs.iter().enumerate().map(|(i, g)| alpha * (1.0 - alpha).powi((n - 1 - i) as i32) * g).sum();
        worst = worst.max((ts.q[&EdgeId(0)] - closed).abs());
    }
    worst
}
