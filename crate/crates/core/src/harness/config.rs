//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [env]
//! name = "doorkey"            # or "search_rescue"
//! layout = "doorkey.layout"   # relative to the config file
//! max_episode_steps = 300     # optional
//!
//! [spec]
//! path = "doorkey.spec"       # or: text = "achieve g"
//!
//! [run]
//! algos = ["lsts", "dirl"]
//! seeds = [0, 1, 2]
//! budget = 2000000
//! out = "out/doorkey"         # relative to the working directory
//! eval_episodes = 200
//! threshold = 0.9
//!
//! [teacher]     # alpha, epsilon, eta, tau, x, window, soft_discard_bias
//! [student]     # learning_rate, discount, epsilon, step_budget
//! [baselines]   # per_edge_budget, gsrs_scale, tscl_window, eval_every
//! ```
//!
//! Every table except `[env]`, `[spec]` and `[run]` is optional, as is every
//! key with a default.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::baselines::{Algo, BaselineParams};
use crate::env::EnvError;
use crate::grid::{GridEnv, GridLayout};
use crate::spec::{parse_spec, SpecAst};
use crate::student::StudentParams;
use crate::teacher::{LstsParams, TeacherParams};

#[derive(Debug, thiserror::Error)]
#[error("{path}: {msg}")]
pub struct ConfigError {
    /// Dotted key path, or the file name for whole-file problems.
    pub path: String,
    pub msg: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, msg: impl ToString) -> Self {
        Self { path: path.into(), msg: msg.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvName {
    Doorkey,
    SearchRescue,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnv {
    name: EnvName,
    layout: PathBuf,
    max_episode_steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    text: Option<String>,
    path: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    algos: Vec<String>,
    seeds: Vec<u64>,
    budget: u64,
    out: PathBuf,
    #[serde(default = "default_eval_episodes")]
    eval_episodes: usize,
    #[serde(default = "default_threshold")]
    threshold: f64,
}

fn default_eval_episodes() -> usize {
    200
}

fn default_threshold() -> f64 {
    0.9
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTeacher {
    alpha: Option<f64>,
    epsilon: Option<f64>,
    eta: Option<f64>,
    tau: Option<f64>,
    x: Option<u64>,
    window: Option<usize>,
    soft_discard_bias: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStudent {
    learning_rate: Option<f64>,
    discount: Option<f64>,
    epsilon: Option<f64>,
    step_budget: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBaselines {
    per_edge_budget: Option<u64>,
    gsrs_scale: Option<f64>,
    tscl_window: Option<usize>,
    eval_every: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    env: RawEnv,
    spec: RawSpec,
    run: RawRun,
    #[serde(default)]
    teacher: RawTeacher,
    #[serde(default)]
    student: RawStudent,
    #[serde(default)]
    baselines: RawBaselines,
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub env: EnvName,
    pub layout: GridLayout,
    pub max_episode_steps: Option<usize>,
    pub spec_text: String,
    pub spec: SpecAst,
    pub algos: Vec<Algo>,
    pub seeds: Vec<u64>,
    pub budget: u64,
    pub out: PathBuf,
    pub eval_episodes: usize,
    pub threshold: f64,
    pub lsts: LstsParams,
    pub baseline: BaselineParams,
}

impl ExperimentConfig {
    /// Reads and validates the file at `path`; relative layout and spec
    /// paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(path.display().to_string(), e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::new("<toml>", e.message()))?;
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(path, e.into_inner().message())
        })?;
        Self::validate(raw, base_dir)
    }

    fn validate(raw: RawConfig, base_dir: &Path) -> Result<Self, ConfigError> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
        let layout_path = resolve(&raw.env.layout);
        let layout_text = std::fs::read_to_string(&layout_path)
            .map_err(|e| ConfigError::new("env.layout", format!("{}: {e}", layout_path.display())))?;
        let layout = GridLayout::parse(&layout_text).map_err(|e| ConfigError::new("env.layout", e))?;
        if raw.env.max_episode_steps == Some(0) {
            return Err(ConfigError::new("env.max_episode_steps", "must be positive"));
        }

        let spec_text = match (raw.spec.text, raw.spec.path) {
            (Some(t), None) => t,
            (None, Some(p)) => {
                let p = resolve(&p);
                std::fs::read_to_string(&p).map_err(|e| ConfigError::new("spec.path", format!("{}: {e}", p.display())))?
            }
            _ => return Err(ConfigError::new("spec", "exactly one of `text` and `path` is required")),
        };
        let spec = parse_spec(&spec_text).map_err(|e| ConfigError::new("spec", e))?;

        let mut algos = Vec::new();
        for (i, name) in raw.run.algos.iter().enumerate() {
            let a = Algo::parse(name).ok_or_else(|| ConfigError::new(format!("run.algos[{i}]"), format!("unknown algorithm `{name}`")))?;
            algos.push(a);
        }

        let teacher_default = TeacherParams::default();
        let t = raw.teacher;
        let teacher = TeacherParams {
            alpha: t.alpha.unwrap_or(teacher_default.alpha),
            epsilon: t.epsilon.unwrap_or(teacher_default.epsilon),
            eta: t.eta.unwrap_or(teacher_default.eta),
            tau: t.tau.unwrap_or(teacher_default.tau),
            x: t.x.unwrap_or(teacher_default.x),
            window: t.window.unwrap_or(teacher_default.window),
            soft_discard_bias: t.soft_discard_bias,
        };
        let student_default = StudentParams::default();
        let s = raw.student;
        let student = StudentParams {
            learning_rate: s.learning_rate.unwrap_or(student_default.learning_rate),
            discount: s.discount.unwrap_or(student_default.discount),
            epsilon: s.epsilon.unwrap_or(student_default.epsilon),
            step_budget: s.step_budget.unwrap_or(student_default.step_budget),
        };
        let base_default = BaselineParams::default();
        let b = raw.baselines;
        let baseline = BaselineParams {
            per_edge_budget: b.per_edge_budget.unwrap_or(base_default.per_edge_budget),
            gsrs_scale: b.gsrs_scale.unwrap_or(base_default.gsrs_scale),
            tscl_window: b.tscl_window.unwrap_or(base_default.tscl_window),
            eval_every: b.eval_every.unwrap_or(base_default.eval_every),
        };

        let cfg = ExperimentConfig {
            env: raw.env.name,
            layout,
            max_episode_steps: raw.env.max_episode_steps,
            spec_text,
            spec,
            algos,
            seeds: raw.run.seeds,
            budget: raw.run.budget,
            out: raw.run.out,
            eval_episodes: raw.run.eval_episodes,
            threshold: raw.run.threshold,
            lsts: LstsParams { teacher, student },
            baseline,
        };
        cfg.check()?;
        cfg.make_env().map_err(|e| ConfigError::new("env", e))?;
        Ok(cfg)
    }

    /// Checks the invariants that command-line overrides can break.
    pub fn check(&self) -> Result<(), ConfigError> {
        if self.algos.is_empty() {
            return Err(ConfigError::new("run.algos", "must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::new("run.seeds", "must not be empty"));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(ConfigError::new("run.seeds", "must be distinct"));
        }
        if self.budget == 0 {
            return Err(ConfigError::new("run.budget", "must be positive"));
        }
        if self.eval_episodes == 0 {
            return Err(ConfigError::new("run.eval_episodes", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ConfigError::new("run.threshold", "must lie in [0, 1]"));
        }
        let t = &self.lsts.teacher;
        for (name, v) in [("teacher.alpha", t.alpha), ("teacher.epsilon", t.epsilon), ("teacher.eta", t.eta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::new(name, "must lie in [0, 1]"));
            }
        }
        if t.tau < 0.0 {
            return Err(ConfigError::new("teacher.tau", "must be non-negative"));
        }
        if t.x == 0 {
            return Err(ConfigError::new("teacher.x", "must be positive"));
        }
        if t.window == 0 {
            return Err(ConfigError::new("teacher.window", "must be positive"));
        }
        if t.soft_discard_bias.is_some_and(|b| !(0.0..=1.0).contains(&b)) {
            return Err(ConfigError::new("teacher.soft_discard_bias", "must lie in [0, 1]"));
        }
        let s = &self.lsts.student;
        for (name, v) in [("student.learning_rate", s.learning_rate), ("student.discount", s.discount), ("student.epsilon", s.epsilon)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::new(name, "must lie in [0, 1]"));
            }
        }
        if s.step_budget == 0 {
            return Err(ConfigError::new("student.step_budget", "must be positive"));
        }
        let b = &self.baseline;
        if b.per_edge_budget == 0 {
            return Err(ConfigError::new("baselines.per_edge_budget", "must be positive"));
        }
        if b.eval_every == 0 {
            return Err(ConfigError::new("baselines.eval_every", "must be positive"));
        }
        if b.tscl_window < 2 {
            return Err(ConfigError::new("baselines.tscl_window", "must be at least 2"));
        }
        Ok(())
    }

    /// A fresh environment in its initial state.
    pub fn make_env(&self) -> Result<GridEnv, EnvError> {
        let mut env = match self.env {
            EnvName::Doorkey => GridEnv::doorkey(self.layout.clone())?,
            EnvName::SearchRescue => GridEnv::search_rescue(self.layout.clone())?,
        };
        if let Some(k) = self.max_episode_steps {
            env.max_steps = k;
        }
        Ok(env)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAYOUT: &str = "#######\n#A1.#G#\n#2..D.#\n#######\nA@E\n";

    fn write_layout() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("tiny.layout"), LAYOUT).unwrap();
        dir
    }

    fn toml_with(extra: &str) -> String {
        format!(
            "[env]\nname = \"doorkey\"\nlayout = \"tiny.layout\"\n\n[spec]\ntext = \"achieve g\"\n\n\
             [run]\nalgos = [\"lsts\"]\nseeds = [0, 1]\nbudget = 1000\nout = \"out\"\n{extra}"
        )
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let dir = write_layout();
        let cfg = ExperimentConfig::from_toml(&toml_with(""), dir.path()).unwrap();
        assert_eq!(cfg.algos, vec![Algo::Lsts]);
        assert_eq!(cfg.lsts, LstsParams::default());
        assert_eq!(cfg.baseline, BaselineParams::default());
        assert_eq!(cfg.eval_episodes, 200);
        assert_eq!(cfg.threshold, 0.9);
    }

    #[test]
    fn errors_name_the_field() {
        let dir = write_layout();
        let cases = [
            ("[teacher]\nalpha = \"high\"\n", "teacher.alpha"),
            ("[teacher]\nbogus = 1\n", "teacher"),
            ("[teacher]\neta = 1.5\n", "teacher.eta"),
            ("[student]\nstep_budget = 0\n", "student.step_budget"),
        ];
        for (extra, path) in cases {
            let err = ExperimentConfig::from_toml(&toml_with(extra), dir.path()).unwrap_err();
            assert!(err.path.starts_with(path), "{extra:?} gave {err}");
        }
        let bad_seeds = toml_with("").replace("seeds = [0, 1]", "seeds = [3, 3]");
        assert_eq!(ExperimentConfig::from_toml(&bad_seeds, dir.path()).unwrap_err().path, "run.seeds");
        let no_seeds = toml_with("").replace("seeds = [0, 1]", "seeds = []");
        assert_eq!(ExperimentConfig::from_toml(&no_seeds, dir.path()).unwrap_err().path, "run.seeds");
        let zero = toml_with("").replace("budget = 1000", "budget = 0");
        assert_eq!(ExperimentConfig::from_toml(&zero, dir.path()).unwrap_err().path, "run.budget");
        let algo = toml_with("").replace("[\"lsts\"]", "[\"lsts\", \"ppo\"]");
        assert_eq!(ExperimentConfig::from_toml(&algo, dir.path()).unwrap_err().path, "run.algos[1]");
        let spec = toml_with("").replace("achieve g", "achieve (");
        assert_eq!(ExperimentConfig::from_toml(&spec, dir.path()).unwrap_err().path, "spec");
    }
}
