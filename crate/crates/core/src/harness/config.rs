//! Experiment configuration: `[section]` headers followed by `key = value`
//! lines. Sections are `task`, `agent`, `replay` and `multiscale`; unknown
//! sections, unknown keys and repeated keys are errors. `#` starts a comment.
//!
//! ```text
//! [task]
//! template = two-stream
//! kind = transition-reval
//! phase2_episodes = 50
//!
//! [agent]
//! kind = sr-dyna
//! gamma = 0.9
//!
//! [replay]
//! budget = 100
//! mode = successor-pe
//!
//! [multiscale]
//! scales = [0.3, 0.5, 0.7, 0.9]
//! ```

use std::collections::HashSet;
use std::path::Path;
use std::str::FromStr;

use super::task::{ScheduleParams, TaskKind};
use crate::agents::{AgentKind, LearningRate};
use crate::mdp::Template;
use crate::multiscale::default_scales;
use crate::replay::{PriorityMode, Refresh, Selection};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfig {
    pub template: Template,
    /// Task for single-trial runs.
    pub kind: TaskKind,
    /// Tasks swept by a suite.
    pub kinds: Vec<TaskKind>,
    pub phase1_episodes: usize,
    pub phase2_episodes: usize,
    pub rest_windows: usize,
    /// Lapse rate of the final test choice.
    pub test_epsilon: f64,
    /// Master seed for suites.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    /// Agent for single-trial runs.
    pub kind: AgentKind,
    /// Agents swept by a suite.
    pub kinds: Vec<AgentKind>,
    pub alpha: f64,
    pub gamma: f64,
    /// Exploration rate while learning.
    pub epsilon: f64,
    /// Step size of the learned transition model.
    pub model_rate: LearningRate,
    pub vi_tol: f64,
    pub vi_max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayConfig {
    /// Total per trial, spread over the rest windows.
    pub budget: usize,
    pub mode: PriorityMode,
    pub selection: Selection,
    pub capacity: usize,
    /// Keep only the latest transition per `(s, a)`.
    pub keyed: bool,
    pub refresh: Refresh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiscaleConfig {
    pub scales: Vec<f64>,
    pub max_lag: usize,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub task: TaskConfig,
    pub agent: AgentConfig,
    pub replay: ReplayConfig,
    pub multiscale: MultiscaleConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            task: TaskConfig {
                template: Template::by_name("two-stream").expect("built-in"),
                kind: TaskKind::TransitionReval,
                kinds: TaskKind::ALL.to_vec(),
                phase1_episodes: 100,
                phase2_episodes: 50,
                rest_windows: 3,
                test_epsilon: 0.0,
                seed: 0,
            },
            agent: AgentConfig {
                kind: AgentKind::SrDyna,
                kinds: AgentKind::ALL.to_vec(),
                alpha: 0.1,
                gamma: 0.9,
                epsilon: 0.1,
                model_rate: LearningRate::Constant(0.1),
                vi_tol: 1e-8,
                vi_max_iter: 10_000,
            },
            replay: ReplayConfig {
                budget: 100,
                mode: PriorityMode::SuccessorPe,
                selection: Selection::Greedy,
                capacity: 1000,
                keyed: true,
                refresh: Refresh::Lazy,
            },
            multiscale: MultiscaleConfig {
                scales: default_scales(),
                max_lag: 10,
                grid: (1..=9).map(|i| i as f64 / 10.0).collect(),
            },
        }
    }
}

fn cfg_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn scalar<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| cfg_err(line, format!("bad value `{v}` for `{key}`")))
}

fn list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    let inner = v
        .strip_prefix('[')
        .and_then(|x| x.strip_suffix(']'))
        .unwrap_or(v)
        .trim();
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|x| scalar(line, key, x.trim()))
        .collect()
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(cfg_err(line, format!("bad boolean `{v}` for `{key}`"))),
    }
}

fn parse_rate(line: usize, key: &str, v: &str) -> Result<LearningRate> {
    if v == "harmonic" {
        return Ok(LearningRate::Harmonic);
    }
    Ok(LearningRate::Constant(scalar(line, key, v)?))
}

fn parse_refresh(line: usize, key: &str, v: &str) -> Result<Refresh> {
    match v {
        "lazy" => Ok(Refresh::Lazy),
        "full" => Ok(Refresh::Full),
        _ => Err(cfg_err(line, format!("bad value `{v}` for `{key}`"))),
    }
}

fn typed<T: FromStr<Err = Error>>(line: usize, v: &str) -> Result<T> {
    v.parse::<T>().map_err(|e| cfg_err(line, e.to_string()))
}

fn typed_list<T: FromStr<Err = Error>>(line: usize, v: &str) -> Result<Vec<T>> {
    let inner = v
        .strip_prefix('[')
        .and_then(|x| x.strip_suffix(']'))
        .unwrap_or(v);
    inner.split(',').map(|x| typed(line, x.trim())).collect()
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse()
    }

    pub fn schedule_params(&self) -> ScheduleParams {
        ScheduleParams {
            phase1_episodes: self.task.phase1_episodes,
            phase2_episodes: self.task.phase2_episodes,
            rest_windows: self.task.rest_windows,
            replay_budget: self.replay.budget,
        }
    }

    /// Checks ranges that the parser cannot see.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let a = &self.agent;
        if !(0.0..=1.0).contains(&a.alpha) {
            return bad(format!("agent.alpha {} outside [0, 1]", a.alpha));
        }
        if !(0.0..1.0).contains(&a.gamma) {
            return bad(format!("agent.gamma {} outside [0, 1)", a.gamma));
        }
        if !(0.0..=1.0).contains(&a.epsilon) {
            return bad(format!("agent.epsilon {} outside [0, 1]", a.epsilon));
        }
        if let LearningRate::Constant(r) = a.model_rate {
            if !(r > 0.0 && r <= 1.0) {
                return bad(format!("agent.model_rate {r} outside (0, 1]"));
            }
        }
        if !(a.vi_tol > 0.0) || a.vi_max_iter == 0 {
            return bad("agent.vi_tol and agent.vi_max_iter must be positive".into());
        }
        if a.kinds.is_empty() || self.task.kinds.is_empty() {
            return bad("agent.kinds and task.kinds must not be empty".into());
        }
        if !(0.0..=1.0).contains(&self.task.test_epsilon) {
            return bad(format!("task.test_epsilon {} outside [0, 1]", self.task.test_epsilon));
        }
        if self.task.rest_windows == 0 {
            return bad("task.rest_windows must be at least 1".into());
        }
        if !matches!(self.task.template, Template::TwoStream { .. } | Template::Tree { .. }) {
            return bad(format!(
                "task.template `{}` is not a revaluation template",
                self.task.template.name()
            ));
        }
        if self.replay.capacity == 0 {
            return bad("replay.capacity must be positive".into());
        }
        let m = &self.multiscale;
        if m.max_lag == 0 {
            return bad("multiscale.max_lag must be at least 1".into());
        }
        if m.grid.is_empty() || m.grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return bad("multiscale.grid must be a non-empty list in [0, 1]".into());
        }
        if m.scales.len() < 2
            || m.scales.iter().any(|g| !(*g > 0.0 && *g < 1.0))
            || m.scales.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("multiscale.scales must be >= 2 strictly increasing values in (0, 1)".into());
        }
        Ok(())
    }

    fn set(&mut self, section: &str, key: &str, v: &str, line: usize, rewards: &mut Option<Vec<f64>>) -> Result<()> {
        let unknown = || cfg_err(line, format!("unknown key `{key}` in [{section}]"));
        match section {
            "task" => {
                let t = &mut self.task;
                match key {
                    "template" => {
                        t.template = Template::by_name(v).map_err(|e| cfg_err(line, e.to_string()))?
                    }
                    "rewards" => *rewards = Some(list(line, key, v)?),
                    "kind" => t.kind = typed(line, v)?,
                    "kinds" => t.kinds = typed_list(line, v)?,
                    "phase1_episodes" => t.phase1_episodes = scalar(line, key, v)?,
                    "phase2_episodes" => t.phase2_episodes = scalar(line, key, v)?,
                    "rest_windows" => t.rest_windows = scalar(line, key, v)?,
                    "test_epsilon" => t.test_epsilon = scalar(line, key, v)?,
                    "seed" => t.seed = scalar(line, key, v)?,
                    _ => return Err(unknown()),
                }
            }
            "agent" => {
                let a = &mut self.agent;
                match key {
                    "kind" => a.kind = typed(line, v)?,
                    "kinds" => a.kinds = typed_list(line, v)?,
                    "alpha" => a.alpha = scalar(line, key, v)?,
                    "gamma" => a.gamma = scalar(line, key, v)?,
                    "epsilon" => a.epsilon = scalar(line, key, v)?,
                    "model_rate" => a.model_rate = parse_rate(line, key, v)?,
                    "vi_tol" => a.vi_tol = scalar(line, key, v)?,
                    "vi_max_iter" => a.vi_max_iter = scalar(line, key, v)?,
                    _ => return Err(unknown()),
                }
            }
            "replay" => {
                let r = &mut self.replay;
                match key {
                    "budget" => r.budget = scalar(line, key, v)?,
                    "mode" => r.mode = typed(line, v)?,
                    "selection" => r.selection = typed(line, v)?,
                    "capacity" => r.capacity = scalar(line, key, v)?,
                    "keyed" => r.keyed = parse_bool(line, key, v)?,
                    "refresh" => r.refresh = parse_refresh(line, key, v)?,
                    _ => return Err(unknown()),
                }
            }
            "multiscale" => {
                let m = &mut self.multiscale;
                match key {
                    "scales" => m.scales = list(line, key, v)?,
                    "max_lag" => m.max_lag = scalar(line, key, v)?,
                    "grid" => m.grid = list(line, key, v)?,
                    _ => return Err(unknown()),
                }
            }
            _ => unreachable!("section checked by the caller"),
        }
        Ok(())
    }
}

impl FromStr for Config {
    type Err = Error;

    fn from_str(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        let mut section: Option<String> = None;
        let mut seen = HashSet::new();
        let mut rewards = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[').and_then(|x| x.strip_suffix(']')) {
                let name = name.trim();
                if !matches!(name, "task" | "agent" | "replay" | "multiscale") {
                    return Err(cfg_err(line, format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(cfg_err(line, format!("expected `key = value`, got `{body}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(sec) = section.as_deref() else {
                return Err(cfg_err(line, format!("`{key}` appears before any section")));
            };
            if !seen.insert(format!("{sec}.{key}")) {
                return Err(cfg_err(line, format!("`{key}` repeated in [{sec}]")));
            }
            cfg.set(sec, key, value, line, &mut rewards)?;
        }
        if let Some(r) = rewards {
            match &mut cfg.task.template {
                Template::TwoStream { reward_a, reward_b } if r.len() == 2 => {
                    *reward_a = r[0];
                    *reward_b = r[1];
                }
                Template::Tree { leaf_rewards } if r.len() == 4 => *leaf_rewards = r,
                other => {
                    return Err(Error::Config(format!(
                        "task.rewards has {} values, which does not fit template `{}`",
                        r.len(),
                        other.name()
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
