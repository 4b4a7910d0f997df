//! Labeled MDP interface, graph tracking along rollouts and the reach-avoid
//! sub-task wrapper that defines the Student's episodes and rewards.

use crate::graph::{AbstractGraph, NodeId, SubTask};
use crate::spec::{LabelSet, LabelTrace};

pub const DEFAULT_STEP_BUDGET: usize = 100;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("step called on a finished episode")]
    StepAfterTerminal,
    #[error("action {action} out of range for {count} actions")]
    InvalidAction { action: usize, count: usize },
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
}

/// Opaque tabular index of an MDP state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateKey(pub u64);

impl StateKey {
    /// Tags the key with a graph node for product-state learners. Base keys
    /// must fit in 48 bits.
    pub fn with_node(self, node: NodeId) -> StateKey {
        debug_assert!(self.0 < 1 << 48);
        StateKey(self.0 | ((node.0 as u64) << 48))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalReason {
    Goal,
    Hazard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub terminal: Option<TerminalReason>,
}

/// Episodic MDP whose states carry a set of true atoms.
pub trait LabeledMdp {
    fn action_count(&self) -> usize;

    /// Horizon for whole-task episodes.
    fn max_episode_steps(&self) -> usize;

    /// Returns the initial state's key. Equal seeds give equal episodes.
    fn reset(&mut self, seed: u64) -> StateKey;

    fn step(&mut self, action: usize) -> Result<Transition, EnvError>;

    fn labels(&self) -> LabelSet;

    fn state_key(&self) -> StateKey;

    /// Whether transitions and the initial state ignore the seed entirely.
    fn is_deterministic(&self) -> bool {
        false
    }
}

/// The node of `graph` reached from `from` after observing `labels`: the
/// destination of the enabled out-edge with the lowest destination index, or
/// `from` itself when no guard holds.
pub fn track_from(graph: &AbstractGraph, from: NodeId, labels: &LabelSet) -> NodeId {
    graph
        .out_edges(from)
        .map(|id| &graph.edges[id.0])
        .filter(|e| e.guard.eval(labels))
        .map(|e| e.dst)
        .min()
        .unwrap_or(from)
}

#[derive(Debug, Clone)]
pub struct DagTracker<'g> {
    pub graph: &'g AbstractGraph,
    pub current: NodeId,
    pub history: Vec<NodeId>,
}

impl<'g> DagTracker<'g> {
    pub fn new(graph: &'g AbstractGraph) -> Self {
        Self { graph, current: graph.q0, history: vec![graph.q0] }
    }

    pub fn track(&mut self, labels: &LabelSet) -> NodeId {
        let next = track_from(self.graph, self.current, labels);
        if next != self.current {
            self.current = next;
            self.history.push(next);
        }
        self.current
    }

    pub fn at_final(&self) -> bool {
        self.graph.is_final(self.current)
    }
}

/// `1 - 0.9 * steps / budget` on success, 0 otherwise.
pub fn subtask_reward(success: bool, steps_taken: usize, budget: usize) -> f64 {
    if success {
        1.0 - 0.9 * steps_taken as f64 / budget as f64
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    /// A sibling edge's guard became true.
    Avoid,
    /// The edge's safety predicate was violated.
    Unsafe,
    BaseTerminal,
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubStatus {
    Running,
    Success,
    Failed(Failure),
}

impl SubStatus {
    pub fn is_done(self) -> bool {
        self != SubStatus::Running
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubStep {
    pub reward: f64,
    pub status: SubStatus,
    pub labels: LabelSet,
    pub base_terminal: bool,
}

/// One sub-task episode on top of a base MDP already positioned at the
/// sub-task's start state.
pub struct SubTaskEnv<'a, E: LabeledMdp + ?Sized> {
    pub base: &'a mut E,
    pub task: &'a SubTask,
    pub step_budget: usize,
    pub steps_taken: usize,
    status: SubStatus,
}

impl<'a, E: LabeledMdp + ?Sized> SubTaskEnv<'a, E> {
    pub fn new(base: &'a mut E, task: &'a SubTask, step_budget: usize) -> Self {
        Self { base, task, step_budget, steps_taken: 0, status: SubStatus::Running }
    }

    pub fn status(&self) -> SubStatus {
        self.status
    }

    pub fn step(&mut self, action: usize) -> Result<SubStep, EnvError> {
        if self.status.is_done() {
            return Err(EnvError::StepAfterTerminal);
        }
        let t = self.base.step(action)?;
        self.steps_taken += 1;
        let labels = self.base.labels();
        let achieved = self.task.achieve.eval(&labels);
        let avoided = self.task.avoid.iter().any(|b| b.eval(&labels));
        self.status = if avoided {
            SubStatus::Failed(Failure::Avoid)
        } else if !self.task.edge.is_safe(&labels) {
            SubStatus::Failed(Failure::Unsafe)
        } else if achieved {
            SubStatus::Success
        } else if t.terminal.is_some() {
            SubStatus::Failed(Failure::BaseTerminal)
        } else if self.steps_taken >= self.step_budget {
            SubStatus::Failed(Failure::Budget)
        } else {
            SubStatus::Running
        };
        let reward = subtask_reward(self.status == SubStatus::Success, self.steps_taken, self.step_budget);
        Ok(SubStep { reward, status: self.status, labels, base_terminal: t.terminal.is_some() })
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub ret: f64,
    pub success: bool,
    pub steps: usize,
    pub trace: LabelTrace,
}

/// Plays `policy` on the sub-task from the current base state until the
/// episode ends. The trace holds the start labels plus one entry per step.
pub fn rollout<E, P>(env: &mut SubTaskEnv<'_, E>, mut policy: P) -> Result<EpisodeOutcome, EnvError>
where
    E: LabeledMdp + ?Sized,
    P: FnMut(StateKey) -> usize,
{
    let mut trace = LabelTrace::new(vec![env.base.labels()]);
    let mut ret = 0.0;
    loop {
        let a = policy(env.base.state_key());
        let s = env.step(a)?;
        ret += s.reward;
        trace.push(s.labels);
        if s.status.is_done() {
            return Ok(EpisodeOutcome { ret, success: s.status == SubStatus::Success, steps: env.steps_taken, trace });
        }
    }
}

/// Resets the base MDP with `seed` and plays one sub-task episode.
pub fn run_episode<E, P>(env: &mut SubTaskEnv<'_, E>, policy: P, seed: u64) -> Result<EpisodeOutcome, EnvError>
where
    E: LabeledMdp + ?Sized,
    P: FnMut(StateKey) -> usize,
{
    env.base.reset(seed);
    env.steps_taken = 0;
    env.status = SubStatus::Running;
    rollout(env, policy)
}
