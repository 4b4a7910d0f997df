//! Abstract task graphs: a DAG whose edges carry predicate guards, compiled
//! from a [`SpecAst`], plus the reachability queries the scheduler needs.

mod analysis;
mod export;
mod monitor;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::spec::{Predicate, SpecAst};

pub use analysis::{
    discarded_edges, enumerate_paths, initial_tasks, next_tasks, prune_unreachable, subtask_of,
    DEFAULT_PATH_CAP,
};
pub use export::{parse_plain, to_dot, to_plain};
pub use monitor::{dag_accepts, AcceptanceMonitor};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("specification has no satisfying path in its task graph")]
    EmptyGraph,
    #[error("edge {0} is not part of the graph")]
    UnknownEdge(EdgeId),
    #[error("more than {cap} initial-to-final paths")]
    PathExplosion { cap: usize },
    #[error("malformed graph text at line {line}: {msg}")]
    Format { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// Index of an edge in [`AbstractGraph::edges`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// A labeled transition `src --guard--> dst`.
///
/// `safety` is the conjunction of every `ensuring` predicate in scope; it
/// must hold at each step spent at `src` while waiting for this edge.
/// `guard` already includes it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GuardedEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub guard: Predicate,
    pub safety: Option<Predicate>,
}

impl GuardedEdge {
    pub fn is_safe(&self, labels: &crate::spec::LabelSet) -> bool {
        self.safety.as_ref().is_none_or(|s| s.eval(labels))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractGraph {
    pub node_count: usize,
    pub edges: Vec<GuardedEdge>,
    pub q0: NodeId,
    pub finals: BTreeSet<NodeId>,
}

/// Reach-avoid objective for one edge: make `achieve` true while no sibling
/// guard becomes true and the edge's safety predicate keeps holding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubTask {
    pub id: EdgeId,
    pub edge: GuardedEdge,
    pub achieve: Predicate,
    pub avoid: Vec<Predicate>,
}

impl AbstractGraph {
    pub fn edge(&self, id: EdgeId) -> Result<&GuardedEdge, GraphError> {
        self.edges.get(id.0).ok_or(GraphError::UnknownEdge(id))
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edges.len()).map(EdgeId)
    }

    pub fn out_edges(&self, node: NodeId) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges.iter().enumerate().filter(move |(_, e)| e.src == node).map(|(i, _)| EdgeId(i))
    }

    pub fn in_edges(&self, node: NodeId) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges.iter().enumerate().filter(move |(_, e)| e.dst == node).map(|(i, _)| EdgeId(i))
    }

    pub fn is_final(&self, node: NodeId) -> bool {
        self.finals.contains(&node)
    }

    /// Adjacency matrix `X[u][v]` holding the edge between `u` and `v`.
    pub fn adjacency(&self) -> Vec<Vec<Option<EdgeId>>> {
        let mut x = vec![vec![None; self.node_count]; self.node_count];
        for (i, e) in self.edges.iter().enumerate() {
            x[e.src.0][e.dst.0].get_or_insert(EdgeId(i));
        }
        x
    }

    /// Edge-count distance from each node to the nearest final node.
    pub fn distance_to_finals(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count];
        let mut queue: std::collections::VecDeque<NodeId> = self.finals.iter().copied().collect();
        for f in &self.finals {
            dist[f.0] = Some(0);
        }
        while let Some(v) = queue.pop_front() {
            let d = dist[v.0].unwrap_or(0);
            for e in self.in_edges(v) {
                let u = self.edges[e.0].src;
                if dist[u.0].is_none() {
                    dist[u.0] = Some(d + 1);
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    /// Kahn's algorithm with lowest-index tie break; `None` if cyclic.
    pub fn topological_order(&self) -> Option<Vec<NodeId>> {
        let mut indeg = vec![0usize; self.node_count];
        for e in &self.edges {
            indeg[e.dst.0] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..self.node_count).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.node_count);
        while let Some(v) = ready.pop_first() {
            order.push(NodeId(v));
            for e in &self.edges {
                if e.src.0 == v {
                    indeg[e.dst.0] -= 1;
                    if indeg[e.dst.0] == 0 {
                        ready.insert(e.dst.0);
                    }
                }
            }
        }
        (order.len() == self.node_count).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Renumbers nodes so ids follow topological order with `q0 = 0`.
    fn renumbered(&self) -> AbstractGraph {
        let order = self.topological_order().expect("compiled graphs are acyclic");
        let mut map = vec![0usize; self.node_count];
        // q0 has no in-edges, so it can always go first
        let mut next = 1;
        map[self.q0.0] = 0;
        for v in order {
            if v != self.q0 {
                map[v.0] = next;
                next += 1;
            }
        }
        let mut edges: Vec<GuardedEdge> = self
            .edges
            .iter()
            .map(|e| GuardedEdge {
                src: NodeId(map[e.src.0]),
                dst: NodeId(map[e.dst.0]),
                guard: e.guard.clone(),
                safety: e.safety.clone(),
            })
            .collect();
        edges.sort_by_key(|e| (e.src, e.dst));
        AbstractGraph {
            node_count: self.node_count,
            edges,
            q0: NodeId(0),
            finals: self.finals.iter().map(|f| NodeId(map[f.0])).collect(),
        }
    }
}

/// Graph under construction; node ids are local and dense.
#[derive(Debug, Clone)]
struct Fragment {
    nodes: usize,
    edges: Vec<GuardedEdge>,
    init: usize,
    finals: BTreeSet<usize>,
}

impl Fragment {
    fn achieve(b: &Predicate) -> Self {
        Fragment {
            nodes: 2,
            edges: vec![GuardedEdge { src: NodeId(0), dst: NodeId(1), guard: b.clone(), safety: None }],
            init: 0,
            finals: BTreeSet::from([1]),
        }
    }

    fn ensuring(mut self, b: &Predicate) -> Self {
        for e in &mut self.edges {
            e.guard = b.clone().and(e.guard.clone());
            e.safety = Some(match e.safety.take() {
                None => b.clone(),
                Some(s) => b.clone().and(s),
            });
        }
        self
    }

    /// Appends `other`'s nodes except its initial node; returns the id map.
    fn absorb(&mut self, other: &Fragment) -> Vec<Option<usize>> {
        let mut map = vec![None; other.nodes];
        for (v, slot) in map.iter_mut().enumerate() {
            if v != other.init {
                *slot = Some(self.nodes);
                self.nodes += 1;
            }
        }
        map
    }

    fn seq(mut self, second: Fragment) -> Self {
        let map = self.absorb(&second);
        let firsts: Vec<usize> = self.finals.iter().copied().collect();
        for e in &second.edges {
            let dst = NodeId(map[e.dst.0].expect("initial nodes have no in-edges"));
            if e.src.0 == second.init {
                for &f in &firsts {
                    self.edges.push(GuardedEdge { src: NodeId(f), dst, ..e.clone() });
                }
            } else {
                let src = NodeId(map[e.src.0].expect("non-initial"));
                self.edges.push(GuardedEdge { src, dst, ..e.clone() });
            }
        }
        self.finals = second.finals.iter().map(|f| map[*f].expect("finals are not initial")).collect();
        self
    }

    fn or(mut self, second: Fragment) -> Self {
        let map = self.absorb(&second);
        let resolve = |v: usize| if v == second.init { self.init } else { map[v].expect("mapped") };
        let moved: Vec<GuardedEdge> = second
            .edges
            .iter()
            .map(|e| GuardedEdge { src: NodeId(resolve(e.src.0)), dst: NodeId(resolve(e.dst.0)), ..e.clone() })
            .collect();
        self.edges.extend(moved);
        let extra: Vec<usize> = second.finals.iter().map(|f| resolve(*f)).collect();
        self.finals.extend(extra);
        self
    }

    fn build(phi: &SpecAst) -> Fragment {
        match phi {
            SpecAst::Achieve(b) => Fragment::achieve(b),
            SpecAst::Ensuring(inner, b) => Fragment::build(inner).ensuring(b),
            SpecAst::Seq(a, b) => Fragment::build(a).seq(Fragment::build(b)),
            SpecAst::Or(a, b) => Fragment::build(a).or(Fragment::build(b)),
        }
    }

    fn into_graph(self) -> AbstractGraph {
        AbstractGraph {
            node_count: self.nodes,
            edges: self.edges,
            q0: NodeId(self.init),
            finals: self.finals.into_iter().map(NodeId).collect(),
        }
    }
}

/// Collapses all final nodes into one; finals are always sinks here.
fn merge_finals(g: &mut AbstractGraph) {
    let Some(&keep) = g.finals.iter().next() else { return };
    for e in &mut g.edges {
        if g.finals.contains(&e.dst) {
            e.dst = keep;
        }
    }
    g.finals = BTreeSet::from([keep]);
    dedup_edges(g);
}

fn dedup_edges(g: &mut AbstractGraph) {
    let mut seen = BTreeSet::new();
    g.edges.retain(|e| seen.insert(e.clone()));
}

/// Merges the targets of sibling edges with identical labels when neither
/// target has another way in, so `a ; x or a ; y` shares the `a` edge.
fn merge_common_prefixes(g: &mut AbstractGraph) {
    loop {
        let mut indeg = vec![0usize; g.node_count];
        for e in &g.edges {
            indeg[e.dst.0] += 1;
        }
        let mut by_label: BTreeMap<(NodeId, &Predicate, &Option<Predicate>), Vec<NodeId>> = BTreeMap::new();
        for e in &g.edges {
            by_label.entry((e.src, &e.guard, &e.safety)).or_default().push(e.dst);
        }
        let pair = by_label.values().find_map(|dsts| {
            let candidates: Vec<NodeId> = dsts.iter().copied().filter(|d| indeg[d.0] == 1).collect();
            candidates.iter().enumerate().find_map(|(i, &a)| {
                candidates[i + 1..]
                    .iter()
                    .find(|&&b| b != a && g.is_final(a) == g.is_final(b))
                    .map(|&b| (a, b))
            })
        });
        let Some((keep, gone)) = pair else { break };
        for e in &mut g.edges {
            if e.src == gone {
                e.src = keep;
            }
            if e.dst == gone {
                e.dst = keep;
            }
        }
        g.finals.remove(&gone);
        dedup_edges(g);
    }
}

/// Compiles a specification into its abstract task graph.
///
/// `achieve b` is a single edge; `phi ; psi` glues `psi`'s initial node onto
/// every final node of `phi`; `phi or psi` shares the initial node;
/// `phi ensuring b` conjoins `b` onto every guard and safety predicate.
/// Afterwards final nodes are merged, sibling edges with identical labels
/// are merged into one, unreachable parts are pruned and nodes are numbered
/// in topological order.
pub fn compile(phi: &SpecAst) -> Result<AbstractGraph, GraphError> {
    let mut g = Fragment::build(phi).into_graph();
    merge_finals(&mut g);
    merge_common_prefixes(&mut g);
    let g = prune_unreachable(&g);
    if g.finals.is_empty() || g.edges.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    Ok(g.renumbered())
}
