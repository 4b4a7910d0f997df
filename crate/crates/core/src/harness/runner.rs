//! Seeded multi-trial runs.

use std::time::Instant;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::output::TrialRecord;
use crate::baselines::{self, Algo, Problem};
use crate::env::EnvError;
use crate::graph::{compile, AbstractGraph, GraphError};
use crate::student::{compose_eval, StudentError};
use crate::teacher::{lsts_ct_run, lsts_run, RunResult};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Student(#[from] StudentError),
}

/// One finished trial: its record and the full run for curve and event
/// output.
#[derive(Debug, Clone)]
pub struct Trial {
    pub record: TrialRecord,
    pub result: RunResult,
}

/// Runs `algo` under `seed`. Everything but `wall_time_ms` is a function of
/// (config, algo, seed).
pub fn run_trial(cfg: &ExperimentConfig, graph: &AbstractGraph, algo: Algo, seed: u64) -> Result<Trial, RunError> {
    let start = Instant::now();
    let mut env = cfg.make_env()?;
    let pb = Problem { graph, spec: &cfg.spec, lsts: &cfg.lsts, baseline: &cfg.baseline, budget: cfg.budget, seed };
    let result = match algo {
        Algo::Lsts => lsts_run(graph, &mut env, &cfg.lsts, cfg.budget, seed)?,
        Algo::LstsCt => lsts_ct_run(graph, &mut env, &cfg.lsts, cfg.budget, seed)?,
        Algo::Lfs => baselines::run_lfs(&mut env, &pb)?,
        Algo::Gsrs => baselines::run_gsrs(&mut env, &pb)?,
        Algo::Qrm => baselines::run_qrm(&mut env, &pb)?,
        Algo::Dirl => baselines::run_dirl(&mut env, &pb)?,
        Algo::DirlC => baselines::run_dirl_c(&mut env, &pb)?,
        Algo::Tscl => baselines::run_tscl(&mut env, &pb)?,
    };
    let final_success_rate = match (&result.policy_table.ordered, result.final_success_rate) {
        (Some(_), _) => {
            let step_budget = cfg.lsts.student.step_budget;
            compose_eval(&result.policy_table, &mut env, graph, &cfg.spec, step_budget, cfg.eval_episodes)?.sat_rate
        }
        (None, Some(r)) => r,
        (None, None) => 0.0,
    };
    let record = TrialRecord {
        algo: algo.name().to_string(),
        seed,
        total_interactions: result.total_interactions,
        converged: result.converged,
        final_success_rate,
        wall_time_ms: start.elapsed().as_millis() as u64,
        learned_path: result.learned_path.iter().map(|n| n.0).collect(),
    };
    Ok(Trial { record, result })
}

/// Every (algo, seed) pair of `cfg`, run in parallel and returned sorted by
/// (algo, seed).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<Trial>, RunError> {
    let graph = compile(&cfg.spec)?;
    let jobs: Vec<(Algo, u64)> = cfg.algos.iter().flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s))).collect();
    let mut trials = jobs
        .into_par_iter()
        .map(|(a, s)| run_trial(cfg, &graph, a, s))
        .collect::<Result<Vec<_>, _>>()?;
    trials.sort_by(|a, b| (&a.record.algo, a.record.seed).cmp(&(&b.record.algo, b.record.seed)));
    Ok(trials)
}
