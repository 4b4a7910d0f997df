//! The Teacher: an epsilon-greedy nonstationary bandit over the active
//! sub-tasks that drives the Student through the task graph, plus the
//! continuation variant that chains sub-tasks inside one episode.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{EnvError, LabeledMdp};
use crate::graph::{discarded_edges, initial_tasks, next_tasks, AbstractGraph, EdgeId, NodeId, SubTask};
use crate::student::{
    all_subtasks, compose_episode, run_prefix, success_rate, train_burst, train_episode, BurstStats, PolicyTable,
    StudentParams, TabularPolicy,
};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum TeacherError {
    #[error("no active tasks to sample")]
    EmptyActiveSet,
    #[error("edge {0} is not active")]
    UnknownEdge(EdgeId),
    #[error("edge {0} has fewer than two recorded returns")]
    InsufficientHistory(EdgeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeacherParams {
    pub alpha: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub tau: f64,
    /// Interactions per training burst.
    pub x: u64,
    /// Greedy evaluation episodes kept for the success rate.
    pub window: usize,
    /// When set, discarded edges stay samplable during exploration with
    /// this relative weight instead of being removed.
    pub soft_discard_bias: Option<f64>,
}

impl Default for TeacherParams {
    fn default() -> Self {
        Self { alpha: 0.1, epsilon: 0.2, eta: 0.95, tau: 0.01, x: 500, window: 20, soft_discard_bias: None }
    }
}

#[derive(Debug, Clone)]
pub struct TeacherState {
    pub params: TeacherParams,
    pub q: BTreeMap<EdgeId, f64>,
    pub at: BTreeSet<EdgeId>,
    pub lt: BTreeSet<EdgeId>,
    pub dt: BTreeSet<EdgeId>,
    /// The last two returns per edge, oldest first.
    pub recent_g: BTreeMap<EdgeId, Vec<f64>>,
    pub window: BTreeMap<EdgeId, VecDeque<bool>>,
}

impl TeacherState {
    pub fn new(params: TeacherParams) -> Self {
        Self {
            params,
            q: BTreeMap::new(),
            at: BTreeSet::new(),
            lt: BTreeSet::new(),
            dt: BTreeSet::new(),
            recent_g: BTreeMap::new(),
            window: BTreeMap::new(),
        }
    }

    /// Adds `e` to the active set with a zero value.
    pub fn activate(&mut self, e: EdgeId) {
        if self.at.insert(e) {
            self.q.entry(e).or_insert(0.0);
            if self.params.soft_discard_bias.is_none() {
                self.q.insert(e, 0.0);
            }
        }
    }

    pub fn sample_task<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<EdgeId, TeacherError> {
        if self.at.is_empty() {
            return Err(TeacherError::EmptyActiveSet);
        }
        if rng.gen::<f64>() < self.params.epsilon {
            return Ok(match self.params.soft_discard_bias {
                Some(bias) if !self.dt.is_empty() => {
                    let total = self.at.len() as f64 + bias * self.dt.len() as f64;
                    let mut u = rng.gen::<f64>() * total;
                    let weighted = self.at.iter().map(|&e| (e, 1.0)).chain(self.dt.iter().map(|&e| (e, bias)));
                    let mut pick = *self.at.iter().next().expect("nonempty");
                    for (e, w) in weighted {
                        pick = e;
                        if u < w {
                            break;
                        }
                        u -= w;
                    }
                    pick
                }
                _ => *self.at.iter().nth(rng.gen_range(0..self.at.len())).expect("in range"),
            });
        }
        let mut best = None;
        for &e in &self.at {
            let v = self.q[&e];
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((e, v));
            }
        }
        Ok(best.expect("nonempty").0)
    }

    /// `Q[e] <- alpha * g + (1 - alpha) * Q[e]`.
    pub fn update_teacher(&mut self, e: EdgeId, g: f64) -> Result<(), TeacherError> {
        let soft = self.params.soft_discard_bias.is_some() && self.dt.contains(&e);
        if !self.at.contains(&e) && !soft {
            return Err(TeacherError::UnknownEdge(e));
        }
        let a = self.params.alpha;
        let q = self.q.entry(e).or_insert(0.0);
        *q = a * g + (1.0 - a) * *q;
        let hist = self.recent_g.entry(e).or_default();
        hist.push(g);
        if hist.len() > 2 {
            hist.remove(0);
        }
        Ok(())
    }

    /// Records `wins` successes out of `n` evaluation episodes and returns
    /// the windowed success rate.
    pub fn record_eval(&mut self, e: EdgeId, wins: usize, n: usize) -> f64 {
        let cap = self.params.window.max(1);
        let w = self.window.entry(e).or_default();
        for i in 0..n {
            w.push_back(i < wins);
            if w.len() > cap {
                w.pop_front();
            }
        }
        w.iter().filter(|&&b| b).count() as f64 / w.len().max(1) as f64
    }

    pub fn check_convergence(&self, e: EdgeId, rate: f64) -> Result<bool, TeacherError> {
        match self.recent_g.get(&e).map(Vec::as_slice) {
            Some(&[prev, last]) => Ok(rate >= self.params.eta && (last - prev).abs() < self.params.tau),
            _ => Err(TeacherError::InsufficientHistory(e)),
        }
    }

    fn disjoint(&self) -> bool {
        self.at.is_disjoint(&self.lt) && self.at.is_disjoint(&self.dt) && self.lt.is_disjoint(&self.dt)
    }
}

/// Shortest path (by edge count) over `allowed` edges from `q0` to any node
/// satisfying `target`; among equal lengths the lowest edge ids win.
pub fn path_over(
    g: &AbstractGraph,
    allowed: &BTreeSet<EdgeId>,
    target: impl Fn(NodeId) -> bool,
) -> Option<Vec<EdgeId>> {
    let mut parent: Vec<Option<EdgeId>> = vec![None; g.node_count];
    let mut seen = vec![false; g.node_count];
    seen[g.q0.0] = true;
    let mut queue = VecDeque::from([g.q0]);
    while let Some(u) = queue.pop_front() {
        if target(u) {
            let mut path = Vec::new();
            let mut v = u;
            while let Some(e) = parent[v.0] {
                path.push(e);
                v = g.edges[e.0].src;
            }
            path.reverse();
            return Some(path);
        }
        for &e in allowed {
            let edge = &g.edges[e.0];
            if edge.src == u && !seen[edge.dst.0] {
                seen[edge.dst.0] = true;
                parent[edge.dst.0] = Some(e);
                queue.push_back(edge.dst);
            }
        }
    }
    None
}

pub fn path_nodes(g: &AbstractGraph, edges: &[EdgeId]) -> Vec<NodeId> {
    let mut nodes = vec![g.q0];
    nodes.extend(edges.iter().map(|e| g.edges[e.0].dst));
    nodes
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurstEvent {
    /// Interaction counter after the burst.
    pub stamp: u64,
    pub edge: EdgeId,
    pub g: f64,
    pub success_rate: f64,
    pub interactions: u64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub stamp: u64,
    /// `None` for the composed task.
    pub edge: Option<EdgeId>,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub policy_table: PolicyTable,
    pub total_interactions: u64,
    pub curves: Vec<CurvePoint>,
    pub converged: bool,
    pub bursts: Vec<BurstEvent>,
    /// (stamp, edge) for each edge as it entered the discarded set.
    pub discards: Vec<(u64, EdgeId)>,
    /// Node sequence of the ordered policy list, empty if none.
    pub learned_path: Vec<NodeId>,
    /// Set by learners without an ordered policy list.
    pub final_success_rate: Option<f64>,
}

impl RunResult {
    /// Interactions spent training `e`, summed over its bursts.
    pub fn interactions_on(&self, e: EdgeId) -> u64 {
        self.bursts.iter().filter(|b| b.edge == e).map(|b| b.interactions).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LstsParams {
    pub teacher: TeacherParams,
    pub student: StudentParams,
}

#[derive(Clone, Copy)]
enum Variant {
    Reset,
    Continue,
}

pub fn lsts_run<E: LabeledMdp + ?Sized>(
    graph: &AbstractGraph,
    env: &mut E,
    params: &LstsParams,
    budget: u64,
    seed: u64,
) -> Result<RunResult, EnvError> {
    run(graph, env, params, budget, seed, Variant::Reset)
}

/// As [`lsts_run`], but a successful sub-task episode continues into a
/// follow-on task drawn from the successor node's non-discarded out-edges.
pub fn lsts_ct_run<E: LabeledMdp + ?Sized>(
    graph: &AbstractGraph,
    env: &mut E,
    params: &LstsParams,
    budget: u64,
    seed: u64,
) -> Result<RunResult, EnvError> {
    run(graph, env, params, budget, seed, Variant::Continue)
}

fn run<E: LabeledMdp + ?Sized>(
    graph: &AbstractGraph,
    env: &mut E,
    params: &LstsParams,
    budget: u64,
    seed: u64,
    variant: Variant,
) -> Result<RunResult, EnvError> {
    let mut teacher_rng = crate::rng::stream(seed, "teacher");
    let mut student_rng = crate::rng::stream(seed, "student");
    let tasks = all_subtasks(graph);
    let sp = &params.student;
    let mut ts = TeacherState::new(params.teacher.clone());
    for t in initial_tasks(graph) {
        ts.activate(t.id);
    }
    let mut table = PolicyTable::default();
    let mut counter = 0u64;
    let mut result = RunResult {
        policy_table: PolicyTable::default(),
        total_interactions: 0,
        curves: Vec::new(),
        converged: false,
        bursts: Vec::new(),
        discards: Vec::new(),
        learned_path: Vec::new(),
        final_success_rate: None,
    };

    while counter < budget {
        let Ok(e) = ts.sample_task(&mut teacher_rng) else { break };
        let src = graph.edges[e.0].src;
        let prefix = path_over(graph, &ts.lt, |v| v == src).expect("active edges start at learned nodes");
        let stats = match variant {
            Variant::Reset => {
                train_burst(&mut table, e, &tasks, &prefix, env, sp, ts.params.x, false, &mut counter, &mut student_rng)?
            }
            Variant::Continue => continuation_burst(
                &mut table,
                e,
                &tasks,
                &prefix,
                graph,
                &ts,
                env,
                sp,
                &mut counter,
                &mut student_rng,
                &mut teacher_rng,
            )?,
        };
        ts.update_teacher(e, stats.g).expect("sampled edge is known");
        let n = ts.params.window;
        let rate = success_rate(&table, e, &tasks, &prefix, env, sp.step_budget, n)?;
        let rate = ts.record_eval(e, (rate * n as f64).round() as usize, n);
        let done = ts.check_convergence(e, rate).unwrap_or(false) && ts.at.contains(&e);
        result.bursts.push(BurstEvent {
            stamp: counter,
            edge: e,
            g: stats.g,
            success_rate: rate,
            interactions: stats.interactions,
            converged: done,
        });
        result.curves.push(CurvePoint { stamp: counter, edge: Some(e), success_rate: rate });
        if !done {
            continue;
        }

        ts.at.remove(&e);
        ts.lt.insert(e);
        table.converged.insert(e);
        let p = graph.edges[e.0].dst;
        for d in discarded_edges(graph, p, &ts.lt) {
            if ts.dt.insert(d) {
                ts.at.remove(&d);
                if ts.params.soft_discard_bias.is_none() {
                    ts.q.remove(&d);
                }
                result.discards.push((counter, d));
            }
        }
        for t in next_tasks(graph, p, &ts.dt) {
            if !ts.lt.contains(&t.id) {
                ts.activate(t.id);
            }
        }
        debug_assert!(ts.disjoint());
        if let Some(path) = path_over(graph, &ts.lt, |v| graph.is_final(v)) {
            table.ordered = Some(path.clone());
            result.learned_path = path_nodes(graph, &path);
            let (_, reached) = compose_episode(&table, &path, env, graph, sp.step_budget, 0)?;
            result.curves.push(CurvePoint { stamp: counter, edge: None, success_rate: reached as u8 as f64 });
            if graph.is_final(p) {
                result.converged = true;
                break;
            }
        }
    }
    result.total_interactions = counter;
    result.policy_table = table;
    Ok(result)
}

/// One burst of the continuation variant. Steps of follow-on tasks count
/// towards the burst but not towards `e`'s return.
#[allow(clippy::too_many_arguments)]
fn continuation_burst<E: LabeledMdp + ?Sized>(
    table: &mut PolicyTable,
    e: EdgeId,
    tasks: &[SubTask],
    prefix: &[EdgeId],
    graph: &AbstractGraph,
    ts: &TeacherState,
    env: &mut E,
    sp: &StudentParams,
    counter: &mut u64,
    student_rng: &mut ChaCha8Rng,
    teacher_rng: &mut ChaCha8Rng,
) -> Result<BurstStats, EnvError> {
    let x = ts.params.x;
    let mut stats = BurstStats::default();
    let mut total_ret = 0.0;
    while stats.interactions < x {
        env.reset(student_rng.gen());
        let (ok, pre) = run_prefix(table, tasks, prefix, env, sp.step_budget, u64::MAX)?;
        stats.interactions += pre;
        stats.episodes += 1;
        if !ok {
            stats.prefix_failures += 1;
            continue;
        }
        let ep = with_policy(table, e, env.action_count(), sp, |pi| {
            train_episode(pi, &tasks[e.0], env, sp.step_budget, u64::MAX, student_rng)
        })?;
        stats.interactions += ep.steps as u64;
        stats.successes += ep.success as usize;
        total_ret += ep.ret;
        let (mut ok, mut terminal) = (ep.success, ep.base_terminal);
        let mut node = graph.edges[e.0].dst;
        while ok && !terminal && !graph.is_final(node) {
            let options: Vec<EdgeId> = graph.out_edges(node).filter(|f| !ts.dt.contains(f)).collect();
            if options.is_empty() {
                break;
            }
            let f = options[teacher_rng.gen_range(0..options.len())];
            let follow = if ts.lt.contains(&f) {
                let (ok, steps) = run_prefix(table, tasks, &[f], env, sp.step_budget, u64::MAX)?;
                stats.interactions += steps;
                // a greedy segment that fails has either hit the budget or a
                // base terminal; both end the episode
                (ok, false)
            } else {
                let r = with_policy(table, f, env.action_count(), sp, |pi| {
                    train_episode(pi, &tasks[f.0], env, sp.step_budget, u64::MAX, student_rng)
                })?;
                stats.interactions += r.steps as u64;
                (r.success, r.base_terminal)
            };
            (ok, terminal) = follow;
            node = graph.edges[f.0].dst;
        }
    }
    *counter += stats.interactions;
    stats.g = if stats.episodes > 0 { total_ret / stats.episodes as f64 } else { 0.0 };
    Ok(stats)
}

fn with_policy<T>(
    table: &mut PolicyTable,
    e: EdgeId,
    actions: usize,
    sp: &StudentParams,
    f: impl FnOnce(&mut TabularPolicy) -> T,
) -> T {
    let pi = table.by_edge.entry(e).or_insert_with(|| TabularPolicy::new(actions, sp));
    f(pi)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::graph::compile;
    use crate::spec::parse_spec;

    fn state(edges: &[usize]) -> TeacherState {
        let mut ts = TeacherState::new(TeacherParams::default());
        for &e in edges {
            ts.activate(EdgeId(e));
        }
        ts
    }

    #[test]
    fn sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(state(&[]).sample_task(&mut rng), Err(TeacherError::EmptyActiveSet));
        assert_eq!(state(&[4]).sample_task(&mut rng), Ok(EdgeId(4)));

        let mut ts = state(&[1, 2]);
        ts.params.epsilon = 0.0;
        ts.q.insert(EdgeId(1), 0.2);
        ts.q.insert(EdgeId(2), 0.5);
        assert_eq!(ts.sample_task(&mut rng), Ok(EdgeId(2)));
        ts.q.insert(EdgeId(1), 0.5);
        assert_eq!(ts.sample_task(&mut rng), Ok(EdgeId(1)));

        ts.params.epsilon = 1.0;
        let ones = (0..10_000).filter(|_| ts.sample_task(&mut rng) == Ok(EdgeId(1))).count();
        assert!((ones as f64 / 10_000.0 - 0.5).abs() < 0.02, "{ones}");
    }

    #[test]
    fn update_rule() {
        let mut ts = state(&[0]);
        ts.update_teacher(EdgeId(0), 0.5).unwrap();
        assert!((ts.q[&EdgeId(0)] - 0.05).abs() < 1e-15);
        ts.params.alpha = 1.0;
        ts.update_teacher(EdgeId(0), 0.7).unwrap();
        assert_eq!(ts.q[&EdgeId(0)], 0.7);
        assert_eq!(ts.update_teacher(EdgeId(3), 0.1), Err(TeacherError::UnknownEdge(EdgeId(3))));
    }

    #[test]
    fn convergence_rule() {
        let mut ts = state(&[0]);
        let e = EdgeId(0);
        assert_eq!(ts.check_convergence(e, 1.0), Err(TeacherError::InsufficientHistory(e)));
        ts.update_teacher(e, 0.90).unwrap();
        ts.update_teacher(e, 0.905).unwrap();
        assert_eq!(ts.check_convergence(e, 0.96), Ok(true));
        assert_eq!(ts.check_convergence(e, 0.5), Ok(false));
        ts.update_teacher(e, 0.5).unwrap();
        ts.update_teacher(e, 0.9).unwrap();
        assert_eq!(ts.check_convergence(e, 0.96), Ok(false));
    }

    #[test]
    fn window_keeps_recent_outcomes() {
        let mut ts = state(&[0]);
        assert_eq!(ts.record_eval(EdgeId(0), 0, 20), 0.0);
        assert_eq!(ts.record_eval(EdgeId(0), 10, 10), 0.5);
        assert_eq!(ts.record_eval(EdgeId(0), 20, 20), 1.0);
    }

    #[test]
    fn learned_paths() {
        let g = compile(&parse_spec("((achieve k1 or achieve k2) ; achieve d ; achieve g) ensuring !l").unwrap())
            .unwrap();
        let lt = BTreeSet::from([EdgeId(1), EdgeId(3), EdgeId(4)]);
        let p = path_over(&g, &lt, |v| g.is_final(v)).unwrap();
        assert_eq!(p, vec![EdgeId(1), EdgeId(3), EdgeId(4)]);
        assert_eq!(path_nodes(&g, &p), vec![NodeId(0), NodeId(2), NodeId(3), NodeId(4)]);
        assert_eq!(path_over(&g, &lt, |v| v == g.q0), Some(vec![]));
        assert_eq!(path_over(&g, &BTreeSet::new(), |v| v == NodeId(3)), None);
    }
}
