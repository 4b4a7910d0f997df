//! Text renderings of a graph: Graphviz DOT and a line format used for
//! golden files.
//!
//! Line format, one record per line:
//!
//! ```text
//! NODES <count>
//! INIT <id>
//! EDGE <src> <dst> <guard>
//! SAFE <src> <dst> <predicate>     # after the EDGE it belongs to, if any
//! FINAL <id>
//! ```

use std::collections::BTreeSet;
use std::fmt::Write;

use super::{AbstractGraph, GraphError, GuardedEdge, NodeId};
use crate::spec::{parse_predicate, print_predicate};

pub fn to_dot(g: &AbstractGraph) -> String {
    let mut out = String::from("digraph task {\n  rankdir=LR;\n");
    for v in 0..g.node_count {
        let shape = if g.finals.contains(&NodeId(v)) { "doublecircle" } else { "circle" };
        let _ = writeln!(out, "  q{v} [shape={shape}];");
    }
    for e in &g.edges {
        let label = print_predicate(&e.guard).replace('"', "\\\"");
        let _ = writeln!(out, "  q{} -> q{} [label=\"{}\"];", e.src.0, e.dst.0, label);
    }
    out.push_str("}\n");
    out
}

pub fn to_plain(g: &AbstractGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NODES {}", g.node_count);
    let _ = writeln!(out, "INIT {}", g.q0.0);
    for e in &g.edges {
        let _ = writeln!(out, "EDGE {} {} {}", e.src.0, e.dst.0, print_predicate(&e.guard));
        if let Some(s) = &e.safety {
            let _ = writeln!(out, "SAFE {} {} {}", e.src.0, e.dst.0, print_predicate(s));
        }
    }
    for f in &g.finals {
        let _ = writeln!(out, "FINAL {}", f.0);
    }
    out
}

pub fn parse_plain(text: &str) -> Result<AbstractGraph, GraphError> {
    let mut node_count = None;
    let mut q0 = NodeId(0);
    let mut edges: Vec<GuardedEdge> = Vec::new();
    let mut finals = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |msg: &str| GraphError::Format { line, msg: msg.to_string() };
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let (kw, rest) = raw.split_once(' ').ok_or_else(|| err("missing fields"))?;
        let num = |s: &str| s.parse::<usize>().map_err(|_| err("expected a node index"));
        match kw {
            "NODES" => node_count = Some(num(rest)?),
            "INIT" => q0 = NodeId(num(rest)?),
            "FINAL" => {
                finals.insert(NodeId(num(rest)?));
            }
            "EDGE" | "SAFE" => {
                let mut parts = rest.splitn(3, ' ');
                let src = NodeId(num(parts.next().unwrap_or(""))?);
                let dst = NodeId(num(parts.next().unwrap_or(""))?);
                let pred = parse_predicate(parts.next().ok_or_else(|| err("missing predicate"))?)
                    .map_err(|e| err(&e.to_string()))?;
                if kw == "EDGE" {
                    edges.push(GuardedEdge { src, dst, guard: pred, safety: None });
                } else {
                    let last = edges
                        .last_mut()
                        .filter(|e| e.src == src && e.dst == dst)
                        .ok_or_else(|| err("SAFE must follow its EDGE"))?;
                    last.safety = Some(pred);
                }
            }
            _ => return Err(err("unknown record")),
        }
    }
    let node_count = node_count.ok_or(GraphError::Format { line: 0, msg: "missing NODES".into() })?;
    let in_range = |v: NodeId| v.0 < node_count;
    if !in_range(q0) || !edges.iter().all(|e| in_range(e.src) && in_range(e.dst)) || !finals.iter().all(|&f| in_range(f)) {
        return Err(GraphError::Format { line: 0, msg: "node index out of range".into() });
    }
    Ok(AbstractGraph { node_count, edges, q0, finals })
}
