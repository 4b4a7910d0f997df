use std::collections::{BTreeSet, VecDeque};

use super::{AbstractGraph, EdgeId, GraphError, GuardedEdge, NodeId, SubTask};

pub const DEFAULT_PATH_CAP: usize = 10_000;

fn forward_reach(g: &AbstractGraph, from: NodeId, blocked: Option<NodeId>) -> Vec<bool> {
    let mut seen = vec![false; g.node_count];
    if Some(from) == blocked {
        return seen;
    }
    seen[from.0] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for e in &g.edges {
            if e.src == u && !seen[e.dst.0] && Some(e.dst) != blocked {
                seen[e.dst.0] = true;
                queue.push_back(e.dst);
            }
        }
    }
    seen
}

/// Nodes from which some final node is reachable without visiting `blocked`.
fn backward_reach(g: &AbstractGraph, blocked: Option<NodeId>) -> Vec<bool> {
    let mut seen = vec![false; g.node_count];
    let mut queue = VecDeque::new();
    for &f in &g.finals {
        if Some(f) != blocked {
            seen[f.0] = true;
            queue.push_back(f);
        }
    }
    while let Some(v) = queue.pop_front() {
        for e in &g.edges {
            if e.dst == v && !seen[e.src.0] && Some(e.src) != blocked {
                seen[e.src.0] = true;
                queue.push_back(e.src);
            }
        }
    }
    seen
}

/// Keeps exactly the edges lying on some `q0 -> finals` path and compacts
/// node ids, preserving their relative order.
pub fn prune_unreachable(g: &AbstractGraph) -> AbstractGraph {
    let fwd = forward_reach(g, g.q0, None);
    let bwd = backward_reach(g, None);
    let edges: Vec<&GuardedEdge> = g.edges.iter().filter(|e| fwd[e.src.0] && bwd[e.dst.0]).collect();

    let mut keep = vec![false; g.node_count];
    keep[g.q0.0] = true;
    for e in &edges {
        keep[e.src.0] = true;
        keep[e.dst.0] = true;
    }
    let mut map = vec![None; g.node_count];
    let mut next = 0;
    for v in 0..g.node_count {
        if keep[v] {
            map[v] = Some(next);
            next += 1;
        }
    }
    let remap = |v: NodeId| NodeId(map[v.0].expect("kept"));
    AbstractGraph {
        node_count: next,
        edges: edges
            .into_iter()
            .map(|e| GuardedEdge { src: remap(e.src), dst: remap(e.dst), guard: e.guard.clone(), safety: e.safety.clone() })
            .collect(),
        q0: remap(g.q0),
        finals: g.finals.iter().filter(|f| keep[f.0] && fwd[f.0]).map(|&f| remap(f)).collect(),
    }
}

pub fn subtask_of(g: &AbstractGraph, id: EdgeId) -> Result<SubTask, GraphError> {
    let edge = g.edge(id)?.clone();
    let avoid = g.out_edges(edge.src).filter(|&o| o != id).map(|o| g.edges[o.0].guard.clone()).collect();
    Ok(SubTask { id, achieve: edge.guard.clone(), edge, avoid })
}

pub fn initial_tasks(g: &AbstractGraph) -> Vec<SubTask> {
    g.out_edges(g.q0).map(|id| subtask_of(g, id).expect("edge of g")).collect()
}

/// Sub-tasks for the out-edges of `reached` that are not in `discarded`.
pub fn next_tasks(g: &AbstractGraph, reached: NodeId, discarded: &BTreeSet<EdgeId>) -> Vec<SubTask> {
    g.out_edges(reached)
        .filter(|id| !discarded.contains(id))
        .map(|id| subtask_of(g, id).expect("edge of g"))
        .collect()
}

/// Edges made redundant once `p` can be reached with learned policies.
///
/// An edge `(u, v)` is returned when it is not learned, `u` is reachable
/// from `q0` but not from `p`, and either `v == p` or every path from `v` to
/// a final node passes through `p`.
pub fn discarded_edges(g: &AbstractGraph, p: NodeId, learned: &BTreeSet<EdgeId>) -> BTreeSet<EdgeId> {
    let from_q0 = forward_reach(g, g.q0, None);
    let after_p = forward_reach(g, p, None);
    let bypass = backward_reach(g, Some(p));
    g.edges
        .iter()
        .enumerate()
        .filter(|(i, e)| {
            !learned.contains(&EdgeId(*i))
                && from_q0[e.src.0]
                && !after_p[e.src.0]
                && (e.dst == p || !bypass[e.dst.0])
        })
        .map(|(i, _)| EdgeId(i))
        .collect()
}

/// All distinct node sequences from `q0` to a final node, in lexicographic
/// order.
pub fn enumerate_paths(g: &AbstractGraph, cap: usize) -> Result<Vec<Vec<NodeId>>, GraphError> {
    let succ: Vec<BTreeSet<NodeId>> = (0..g.node_count)
        .map(|v| g.edges.iter().filter(|e| e.src.0 == v).map(|e| e.dst).collect())
        .collect();
    let mut paths = Vec::new();
    let mut stack = vec![g.q0];
    walk(g, &succ, &mut stack, &mut paths, cap)?;
    Ok(paths)
}

fn walk(
    g: &AbstractGraph,
    succ: &[BTreeSet<NodeId>],
    stack: &mut Vec<NodeId>,
    paths: &mut Vec<Vec<NodeId>>,
    cap: usize,
) -> Result<(), GraphError> {
    let here = *stack.last().expect("nonempty");
    if g.is_final(here) {
        if paths.len() == cap {
            return Err(GraphError::PathExplosion { cap });
        }
        paths.push(stack.clone());
    }
    for &next in &succ[here.0] {
        if stack.contains(&next) {
            continue;
        }
        stack.push(next);
        walk(g, succ, stack, paths, cap)?;
        stack.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::compile;
    use crate::spec::{parse_predicate, parse_spec};

    fn running() -> AbstractGraph {
        compile(&parse_spec("((achieve k1 or achieve k2) ; achieve d ; achieve g) ensuring !l").unwrap()).unwrap()
    }

    fn id(g: &AbstractGraph, src: usize, dst: usize) -> EdgeId {
        EdgeId(g.edges.iter().position(|e| e.src.0 == src && e.dst.0 == dst).unwrap())
    }

    fn raw(node_count: usize, edges: &[(usize, usize)], finals: &[usize]) -> AbstractGraph {
        AbstractGraph {
            node_count,
            edges: edges
                .iter()
                .map(|&(s, d)| GuardedEdge {
                    src: NodeId(s),
                    dst: NodeId(d),
                    guard: parse_predicate(&format!("a{s}_{d}")).unwrap(),
                    safety: None,
                })
                .collect(),
            q0: NodeId(0),
            finals: finals.iter().map(|&f| NodeId(f)).collect(),
        }
    }

    #[test]
    fn prune_drops_dangling_sink() {
        let g = raw(4, &[(0, 1), (1, 2), (0, 3)], &[2]);
        let p = prune_unreachable(&g);
        assert_eq!(p.node_count, 3);
        assert_eq!(p.edges.len(), 2);
        assert_eq!(prune_unreachable(&p), p);
        assert_eq!(prune_unreachable(&running()), running());
    }

    #[test]
    fn running_example_subtasks() {
        let g = running();
        let t = subtask_of(&g, id(&g, 0, 1)).unwrap();
        assert_eq!(t.achieve, parse_predicate("!l & k1").unwrap());
        assert_eq!(t.avoid, vec![parse_predicate("!l & k2").unwrap()]);
        assert!(subtask_of(&g, id(&g, 3, 4)).unwrap().avoid.is_empty());
        assert_eq!(subtask_of(&g, EdgeId(99)), Err(GraphError::UnknownEdge(EdgeId(99))));

        let init: Vec<EdgeId> = initial_tasks(&g).into_iter().map(|t| t.id).collect();
        assert_eq!(init, vec![id(&g, 0, 1), id(&g, 0, 2)]);
        let next: Vec<EdgeId> = next_tasks(&g, NodeId(1), &BTreeSet::new()).into_iter().map(|t| t.id).collect();
        assert_eq!(next, vec![id(&g, 1, 3)]);
        assert!(next_tasks(&g, NodeId(4), &BTreeSet::new()).is_empty());
    }

    #[test]
    fn fan_out_avoids_all_siblings() {
        let g = raw(5, &[(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4)], &[4]);
        assert_eq!(subtask_of(&g, EdgeId(1)).unwrap().avoid.len(), 2);
    }

    #[test]
    fn running_example_discard() {
        let g = running();
        let learned = BTreeSet::from([id(&g, 0, 2), id(&g, 2, 3)]);
        let dt = discarded_edges(&g, NodeId(3), &learned);
        assert_eq!(dt, BTreeSet::from([id(&g, 0, 1), id(&g, 1, 3)]));
        assert!(!dt.contains(&id(&g, 3, 4)));
    }

    #[test]
    fn bypass_is_kept() {
        // 0->1->3, 0->2->3, 3->4 and a bypass 0->4
        let g = raw(5, &[(0, 1), (0, 2), (1, 3), (2, 3), (3, 4), (0, 4)], &[4]);
        let learned = BTreeSet::from([EdgeId(1), EdgeId(3)]);
        let dt = discarded_edges(&g, NodeId(3), &learned);
        assert_eq!(dt, BTreeSet::from([EdgeId(0), EdgeId(2)]));
    }

    #[test]
    fn paths() {
        let g = running();
        let ps = enumerate_paths(&g, DEFAULT_PATH_CAP).unwrap();
        let as_ids: Vec<Vec<usize>> = ps.iter().map(|p| p.iter().map(|n| n.0).collect()).collect();
        assert_eq!(as_ids, vec![vec![0, 1, 3, 4], vec![0, 2, 3, 4]]);
        assert_eq!(enumerate_paths(&g, 1), Err(GraphError::PathExplosion { cap: 1 }));
        let chain = compile(&parse_spec("achieve a ; achieve b ; achieve c").unwrap()).unwrap();
        assert_eq!(enumerate_paths(&chain, DEFAULT_PATH_CAP).unwrap().len(), 1);
    }
}
