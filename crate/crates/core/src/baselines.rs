//! Comparison algorithms on the same Student, environments and interaction
//! accounting: learning from scratch, distance-shaped rewards, reward-machine
//! Q-learning, Dijkstra over the task graph (fixed budget or until
//! convergence) and a slope-driven curriculum without the graph.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::env::{track_from, LabeledMdp, StateKey};
use crate::graph::{enumerate_paths, AbstractGraph, AcceptanceMonitor, EdgeId, NodeId, DEFAULT_PATH_CAP};
use crate::spec::{sat_spec, LabelTrace, SpecAst};
use crate::student::{
    all_subtasks, compose_episode, success_rate, train_burst, PolicyTable, StudentError, TabularPolicy,
};
use crate::teacher::{path_nodes, BurstEvent, CurvePoint, LstsParams, RunResult, TeacherParams, TeacherState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algo {
    Lsts,
    LstsCt,
    Lfs,
    Gsrs,
    Qrm,
    Dirl,
    DirlC,
    Tscl,
}

impl Algo {
    pub const ALL: [Algo; 8] =
        [Algo::Lsts, Algo::LstsCt, Algo::Lfs, Algo::Gsrs, Algo::Qrm, Algo::Dirl, Algo::DirlC, Algo::Tscl];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Lsts => "lsts",
            Algo::LstsCt => "lsts_ct",
            Algo::Lfs => "lfs",
            Algo::Gsrs => "gsrs",
            Algo::Qrm => "qrm",
            Algo::Dirl => "dirl",
            Algo::DirlC => "dirl_c",
            Algo::Tscl => "tscl",
        }
    }

    pub fn parse(s: &str) -> Option<Algo> {
        Algo::ALL.into_iter().find(|a| a.name() == s)
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    pub per_edge_budget: u64,
    pub gsrs_scale: f64,
    /// Number of recent returns in the learning-progress slope.
    pub tscl_window: usize,
    /// Interactions between evaluations of single-policy learners.
    pub eval_every: u64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self { per_edge_budget: 50_000, gsrs_scale: 1.0, tscl_window: 10, eval_every: 10_000 }
    }
}

/// Everything a baseline run needs besides the environment.
pub struct Problem<'a> {
    pub graph: &'a AbstractGraph,
    pub spec: &'a SpecAst,
    pub lsts: &'a LstsParams,
    pub baseline: &'a BaselineParams,
    pub budget: u64,
    pub seed: u64,
}

fn empty_result() -> RunResult {
    RunResult {
        policy_table: PolicyTable::default(),
        total_interactions: 0,
        curves: Vec::new(),
        converged: false,
        bursts: Vec::new(),
        discards: Vec::new(),
        learned_path: Vec::new(),
        final_success_rate: None,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Single {
    Lfs,
    Gsrs,
    Qrm,
}

/// Whole-task learner state: one Q-function, or one per graph node.
struct SingleLearner<'a> {
    kind: Single,
    graph: &'a AbstractGraph,
    q: Vec<TabularPolicy>,
    dist: Vec<Option<usize>>,
    scale: f64,
}

impl SingleLearner<'_> {
    fn key(&self, s: StateKey, node: NodeId) -> StateKey {
        match self.kind {
            Single::Lfs | Single::Qrm => s,
            Single::Gsrs => s.with_node(node),
        }
    }

    fn policy(&self, node: NodeId) -> &TabularPolicy {
        match self.kind {
            Single::Qrm => &self.q[node.0],
            _ => &self.q[0],
        }
    }

    /// Plays one episode; returns (steps, satisfied).
    fn episode<E: LabeledMdp + ?Sized, R: Rng + ?Sized>(
        &mut self,
        env: &mut E,
        spec: &SpecAst,
        learn: bool,
        seed: u64,
        rng: &mut R,
    ) -> Result<(u64, bool), StudentError> {
        let g = self.graph;
        let horizon = env.max_episode_steps();
        env.reset(seed);
        let first = env.labels();
        let mut node = track_from(g, g.q0, &first);
        let mut monitor = AcceptanceMonitor::new(g);
        let mut accepted = monitor.observe(&first);
        let mut trace = LabelTrace::new(vec![first]);
        let mut s = env.state_key();
        let mut t = 0;
        while !accepted && t < horizon && !monitor.is_dead() {
            let k = self.key(s, node);
            let a = if learn { self.policy(node).explore(k, rng) } else { self.policy(node).greedy(k) };
            let tr = env.step(a)?;
            t += 1;
            let labels = env.labels();
            let next_node = track_from(g, node, &labels);
            accepted = monitor.observe(&labels);
            trace.push(labels);
            let s2 = env.state_key();
            let done = accepted || tr.terminal.is_some() || monitor.is_dead();
            if learn {
                let sat = done && accepted;
                match self.kind {
                    Single::Lfs => {
                        let r = if sat { 1.0 - 0.9 * t as f64 / horizon as f64 } else { 0.0 };
                        self.q[0].update(s, a, r, (!done).then_some(s2));
                    }
                    Single::Gsrs => {
                        let mut r = if sat { 1.0 } else { 0.0 };
                        if next_node != node {
                            let d = self.dist[next_node.0].unwrap_or(usize::MAX / 2);
                            r += self.scale / (1.0 + d as f64);
                        }
                        let (k, k2) = (s.with_node(node), s2.with_node(next_node));
                        self.q[0].update(k, a, r, (!done).then_some(k2));
                    }
                    Single::Qrm => {
                        let after = self.q[0..].len();
                        let labels = trace.steps.last().expect("pushed");
                        for u in 0..after {
                            let un = NodeId(u);
                            if g.is_final(un) {
                                continue;
                            }
                            let v = track_from(g, un, labels);
                            let r = if v != un { 1.0 } else { 0.0 };
                            let end = g.is_final(v) || tr.terminal.is_some();
                            let boot = if end { 0.0 } else { self.q[v.0].discount * max_q(&self.q[v.0], s2) };
                            let pi = &mut self.q[u];
                            let target = r + boot;
                            let old = pi.q(s, a);
                            pi.set_q(s, a, old + pi.learning_rate * (target - old));
                        }
                    }
                }
            }
            node = next_node;
            s = s2;
            if tr.terminal.is_some() {
                break;
            }
        }
        let sat = sat_spec(spec, &trace)?;
        Ok((t as u64, sat))
    }
}

fn max_q(p: &TabularPolicy, s: StateKey) -> f64 {
    (0..p.action_count()).map(|a| p.q(s, a)).fold(f64::NEG_INFINITY, f64::max)
}

fn run_single<E: LabeledMdp + ?Sized>(env: &mut E, pb: &Problem, kind: Single) -> Result<RunResult, StudentError> {
    let mut rng = crate::rng::stream(pb.seed, "student");
    let sp = &pb.lsts.student;
    let copies = if kind == Single::Qrm { pb.graph.node_count } else { 1 };
    let mut learner = SingleLearner {
        kind,
        graph: pb.graph,
        q: (0..copies).map(|_| TabularPolicy::new(env.action_count(), sp)).collect(),
        dist: pb.graph.distance_to_finals(),
        scale: pb.baseline.gsrs_scale,
    };
    let eta = pb.lsts.teacher.eta;
    let n_eval = if env.is_deterministic() { 1 } else { pb.lsts.teacher.window.max(1) };
    let mut result = empty_result();
    let mut counter = 0;
    let mut next_eval = pb.baseline.eval_every;
    let mut rate = 0.0;
    while counter < pb.budget {
        let seed = rng.gen();
        let (steps, _) = learner.episode(env, pb.spec, true, seed, &mut rng)?;
        counter += steps;
        if counter >= next_eval || counter >= pb.budget {
            next_eval = counter + pb.baseline.eval_every;
            let mut wins = 0;
            for i in 0..n_eval {
                wins += learner.episode(env, pb.spec, false, i as u64, &mut rng)?.1 as usize;
            }
            rate = wins as f64 / n_eval as f64;
            result.curves.push(CurvePoint { stamp: counter, edge: None, success_rate: rate });
            if rate >= eta {
                result.converged = true;
                break;
            }
        }
    }
    result.total_interactions = counter;
    result.final_success_rate = Some(rate);
    Ok(result)
}

/// Learning from scratch: one policy, reward only for satisfying the spec.
pub fn run_lfs<E: LabeledMdp + ?Sized>(env: &mut E, pb: &Problem) -> Result<RunResult, StudentError> {
    run_single(env, pb, Single::Lfs)
}

/// One policy over (state, graph node) with a bonus of `scale / (1 + d)` on
/// every move to a node at distance `d` from the finals.
pub fn run_gsrs<E: LabeledMdp + ?Sized>(env: &mut E, pb: &Problem) -> Result<RunResult, StudentError> {
    run_single(env, pb, Single::Gsrs)
}

/// One Q-function per node, all updated from every transition.
pub fn run_qrm<E: LabeledMdp + ?Sized>(env: &mut E, pb: &Problem) -> Result<RunResult, StudentError> {
    run_single(env, pb, Single::Qrm)
}

/// Dijkstra over the graph, training each out-edge of a settled node for
/// exactly `per_edge_budget` interactions; edge cost is `1 - success rate`.
pub fn run_dirl<E: LabeledMdp + ?Sized>(env: &mut E, pb: &Problem) -> Result<RunResult, StudentError> {
    dijkstra(env, pb, false)
}

/// As [`run_dirl`], but each edge trains until the convergence test passes.
pub fn run_dirl_c<E: LabeledMdp + ?Sized>(env: &mut E, pb: &Problem) -> Result<RunResult, StudentError> {
    dijkstra(env, pb, true)
}

fn dijkstra<E: LabeledMdp + ?Sized>(env: &mut E, pb: &Problem, until_converged: bool) -> Result<RunResult, StudentError> {
    let g = pb.graph;
    let mut rng = crate::rng::stream(pb.seed, "student");
    let tasks = all_subtasks(g);
    let sp = &pb.lsts.student;
    let mut ts = TeacherState::new(TeacherParams { epsilon: 0.0, ..pb.lsts.teacher.clone() });
    let n = ts.params.window;
    let mut table = PolicyTable::default();
    let mut result = empty_result();
    let mut counter = 0u64;
    let mut dist = vec![f64::INFINITY; g.node_count];
    let mut pred: Vec<Option<EdgeId>> = vec![None; g.node_count];
    let mut settled = vec![false; g.node_count];
    let mut rates: BTreeMap<EdgeId, f64> = BTreeMap::new();
    dist[g.q0.0] = 0.0;

    let path_to = |pred: &[Option<EdgeId>], v: NodeId| {
        let mut path = Vec::new();
        let mut v = v;
        while let Some(e) = pred[v.0] {
            path.push(e);
            v = g.edges[e.0].src;
        }
        path.reverse();
        path
    };

    'outer: loop {
        let next = (0..g.node_count).filter(|&v| !settled[v] && dist[v].is_finite()).min_by(|&a, &b| {
            dist[a].partial_cmp(&dist[b]).expect("finite").then(a.cmp(&b))
        });
        let Some(u) = next.map(NodeId) else { break };
        settled[u.0] = true;
        if g.is_final(u) {
            let path = path_to(&pred, u);
            result.converged = path.iter().all(|e| rates[e] >= ts.params.eta);
            let (trace, _) = compose_episode(&table, &path, env, g, sp.step_budget, 0)?;
            let sat = sat_spec(pb.spec, &trace)?;
            result.curves.push(CurvePoint { stamp: counter, edge: None, success_rate: sat as u8 as f64 });
            table.ordered = Some(path.clone());
            result.learned_path = path_nodes(g, &path);
            break;
        }
        let prefix = path_to(&pred, u);
        for e in g.out_edges(u).collect::<Vec<_>>() {
            ts.activate(e);
            let mut spent = 0;
            let mut rate;
            loop {
                let chunk = if until_converged {
                    ts.params.x.min(pb.budget - counter)
                } else {
                    ts.params.x.min(pb.baseline.per_edge_budget - spent).min(pb.budget - counter)
                };
                let stats = train_burst(&mut table, e, &tasks, &prefix, env, sp, chunk, true, &mut counter, &mut rng)?;
                spent += stats.interactions;
                ts.update_teacher(e, stats.g).expect("active");
                let r = success_rate(&table, e, &tasks, &prefix, env, sp.step_budget, n)?;
                rate = ts.record_eval(e, (r * n as f64).round() as usize, n);
                let conv = ts.check_convergence(e, rate).unwrap_or(false);
                result.bursts.push(BurstEvent {
                    stamp: counter,
                    edge: e,
                    g: stats.g,
                    success_rate: rate,
                    interactions: stats.interactions,
                    converged: conv,
                });
                result.curves.push(CurvePoint { stamp: counter, edge: Some(e), success_rate: rate });
                if counter >= pb.budget {
                    rates.insert(e, rate);
                    break 'outer;
                }
                let finished = if until_converged { conv } else { spent >= pb.baseline.per_edge_budget };
                if finished {
                    break;
                }
            }
            rates.insert(e, rate);
            if rate >= ts.params.eta {
                table.converged.insert(e);
            }
            let v = g.edges[e.0].dst;
            let d = dist[u.0] + (1.0 - rate);
            if d < dist[v.0] {
                dist[v.0] = d;
                pred[v.0] = Some(e);
            }
        }
    }
    result.total_interactions = counter;
    result.policy_table = table;
    Ok(result)
}

/// Least-squares slope of `ys` against their index.
pub fn slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        num += dx * (y - my);
        den += dx * dx;
    }
    num / den
}

/// Curriculum over the graph's sub-tasks without the graph: every episode
/// starts from the initial state, nothing is discarded, and the Teacher
/// prefers tasks whose returns change fastest.
pub fn run_tscl<E: LabeledMdp + ?Sized>(env: &mut E, pb: &Problem) -> Result<RunResult, StudentError> {
    let g = pb.graph;
    let mut teacher_rng = crate::rng::stream(pb.seed, "teacher");
    let mut rng = crate::rng::stream(pb.seed, "student");
    let tasks = all_subtasks(g);
    let sp = &pb.lsts.student;
    let tp = &pb.lsts.teacher;
    let paths = enumerate_paths(g, DEFAULT_PATH_CAP).unwrap_or_default();
    let path_edges: Vec<Vec<EdgeId>> = paths
        .iter()
        .map(|p| {
            p.windows(2)
                .map(|w| g.edge_ids().find(|&e| g.edges[e.0].src == w[0] && g.edges[e.0].dst == w[1]).expect("edge"))
                .collect()
        })
        .collect();
    let mut ts = TeacherState::new(tp.clone());
    for e in g.edge_ids() {
        ts.activate(e);
    }
    let mut history: BTreeMap<EdgeId, Vec<f64>> = BTreeMap::new();
    let mut table = PolicyTable::default();
    let mut result = empty_result();
    let mut counter = 0;
    let mut next_eval = pb.baseline.eval_every;
    let mut best = 0.0;
    let n_eval = if env.is_deterministic() { 1 } else { tp.window.max(1) };
    while counter < pb.budget {
        let e = ts.sample_task(&mut teacher_rng).expect("all edges active");
        let stats = train_burst(&mut table, e, &tasks, &[], env, sp, tp.x, false, &mut counter, &mut rng)?;
        let h = history.entry(e).or_default();
        h.push(stats.g);
        let from = h.len().saturating_sub(pb.baseline.tscl_window);
        ts.q.insert(e, slope(&h[from..]).abs());
        let r = success_rate(&table, e, &tasks, &[], env, sp.step_budget, n_eval)?;
        result.bursts.push(BurstEvent {
            stamp: counter,
            edge: e,
            g: stats.g,
            success_rate: r,
            interactions: stats.interactions,
            converged: false,
        });
        result.curves.push(CurvePoint { stamp: counter, edge: Some(e), success_rate: r });
        if counter >= next_eval || counter >= pb.budget {
            next_eval = counter + pb.baseline.eval_every;
            best = 0.0;
            let mut best_path = None;
            for p in &path_edges {
                let mut wins = 0;
                for i in 0..n_eval {
                    let (trace, _) = compose_episode(&table, p, env, g, sp.step_budget, i as u64)?;
                    wins += sat_spec(pb.spec, &trace)? as usize;
                }
                let rate = wins as f64 / n_eval as f64;
                if rate > best || best_path.is_none() {
                    best = rate;
                    best_path = Some(p.clone());
                }
            }
            result.curves.push(CurvePoint { stamp: counter, edge: None, success_rate: best });
            if best >= tp.eta {
                let p = best_path.expect("some path");
                result.learned_path = path_nodes(g, &p);
                table.converged.extend(p.iter().copied());
                table.ordered = Some(p);
                result.converged = true;
                break;
            }
        }
    }
    result.total_interactions = counter;
    result.final_success_rate = Some(best);
    result.policy_table = table;
    Ok(result)
}

/// Edges trained at least once in `r`.
pub fn trained_edges(r: &RunResult) -> BTreeSet<EdgeId> {
    r.bursts.iter().map(|b| b.edge).collect()
}
