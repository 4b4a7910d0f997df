use std::collections::BTreeSet;

use super::{AbstractGraph, EdgeId};
use crate::spec::{LabelSet, LabelTrace};

/// Online acceptance check over all branches of the graph.
///
/// A run splits the trace into consecutive segments, one per edge of a path.
/// Every step of the segment for edge `e` must satisfy `e.safety`, and at
/// least one must satisfy `e.guard`. A segment may continue past its guard
/// step while safety holds; the next segment starts on the following step.
/// The tracked state is the set of `(edge, guard_seen)` pairs.
#[derive(Debug, Clone)]
pub struct AcceptanceMonitor<'g> {
    graph: &'g AbstractGraph,
    active: BTreeSet<(EdgeId, bool)>,
    started: bool,
    accepted: bool,
}

impl<'g> AcceptanceMonitor<'g> {
    pub fn new(graph: &'g AbstractGraph) -> Self {
        Self { graph, active: BTreeSet::new(), started: false, accepted: false }
    }

    fn open_segments(&self, from: super::NodeId, labels: &LabelSet, into: &mut BTreeSet<(EdgeId, bool)>) {
        for id in self.graph.out_edges(from) {
            let e = &self.graph.edges[id.0];
            if e.is_safe(labels) {
                into.insert((id, e.guard.eval(labels)));
            }
        }
    }

    /// Feeds one step; returns whether some prefix seen so far is accepted.
    pub fn observe(&mut self, labels: &LabelSet) -> bool {
        let mut next = BTreeSet::new();
        if !self.started {
            self.started = true;
            self.open_segments(self.graph.q0, labels, &mut next);
        } else {
            for &(id, seen) in &self.active {
                let e = &self.graph.edges[id.0];
                if e.is_safe(labels) {
                    next.insert((id, seen || e.guard.eval(labels)));
                }
                if seen {
                    self.open_segments(e.dst, labels, &mut next);
                }
            }
        }
        self.active = next;
        if self.active.iter().any(|&(id, seen)| seen && self.graph.is_final(self.graph.edges[id.0].dst)) {
            self.accepted = true;
        }
        self.accepted
    }

    pub fn accepted(&self) -> bool {
        self.accepted
    }

    /// True once no branch can make further progress.
    pub fn is_dead(&self) -> bool {
        self.started && self.active.is_empty()
    }
}

pub fn dag_accepts(g: &AbstractGraph, trace: &LabelTrace) -> bool {
    let mut m = AcceptanceMonitor::new(g);
    trace.steps.iter().any(|labels| m.observe(labels))
}
