use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::mdp::{make_graph_env, two_stream, tree, GraphEdit, TaskGraph, Template};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "reward-reval")]
    RewardReval,
    #[serde(rename = "transition-reval")]
    TransitionReval,
    #[serde(rename = "control")]
    Control,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [
        TaskKind::RewardReval,
        TaskKind::TransitionReval,
        TaskKind::Control,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::RewardReval => "reward-reval",
            TaskKind::TransitionReval => "transition-reval",
            TaskKind::Control => "control",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::param(format!("unknown task kind `{s}`")))
    }
}

/// The single decision scored at the end of a trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestSpec {
    /// Pick the best of several start states.
    ChooseStart { options: Vec<usize> },
    /// Pick the best action in one state.
    ChooseAction { state: usize },
}

impl TestSpec {
    pub fn n_options(&self, n_actions: usize) -> usize {
        match self {
            TestSpec::ChooseStart { options } => options.len(),
            TestSpec::ChooseAction { .. } => n_actions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestWindow {
    /// Replay happens once this many phase-2 episodes have finished.
    pub after_episode: usize,
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub phase1_episodes: usize,
    pub phase2_episodes: usize,
    pub phase1_starts: Vec<usize>,
    /// Mid-stream states only; the phase-1 starts are never revisited.
    pub phase2_starts: Vec<usize>,
    /// Applied at phase-2 onset. `None` for control.
    pub edit: Option<GraphEdit>,
    pub rest_windows: Vec<RestWindow>,
    pub test: TestSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleParams {
    pub phase1_episodes: usize,
    pub phase2_episodes: usize,
    pub rest_windows: usize,
    /// Total replay budget, split across the rest windows.
    pub replay_budget: usize,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams {
            phase1_episodes: 100,
            phase2_episodes: 50,
            rest_windows: 3,
            replay_budget: 100,
        }
    }
}

/// Rest windows evenly spread over phase 2. Window `k` of `w` comes after
/// episode `ceil(k * p2 / w)`; earlier windows get the budget remainder.
pub fn rest_schedule(phase2_episodes: usize, windows: usize, budget: usize) -> Vec<RestWindow> {
    (1..=windows)
        .map(|k| RestWindow {
            after_episode: (k * phase2_episodes).div_ceil(windows),
            budget: budget / windows + usize::from(k - 1 < budget % windows),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub kind: TaskKind,
    /// The graph before any edit.
    pub graph: TaskGraph,
    pub schedule: PhaseSchedule,
}

impl Task {
    /// The graph in force during phase 2 and at test.
    pub fn edited_graph(&self) -> Result<TaskGraph> {
        match &self.schedule.edit {
            Some(e) => self.graph.apply_edit(e),
            None => Ok(self.graph.clone()),
        }
    }
}

/// Revaluation task on the two-stream or tree template.
pub fn build_task(kind: TaskKind, template: &Template, params: &ScheduleParams) -> Result<Task> {
    let graph = make_graph_env(template)?;
    let (edit, phase2_starts, test) = match template {
        Template::TwoStream { .. } => {
            use two_stream::*;
            let edit = match kind {
                TaskKind::RewardReval => Some(GraphEdit::RewardSwap { a: END_5, b: END_6 }),
                TaskKind::TransitionReval => Some(GraphEdit::TransitionRewire {
                    first: (MID_3, 0),
                    second: (MID_4, 0),
                }),
                TaskKind::Control => None,
            };
            let test = TestSpec::ChooseStart {
                options: vec![START_1, START_2],
            };
            (edit, vec![MID_3, MID_4], test)
        }
        Template::Tree { .. } => {
            use tree::*;
            let edit = match kind {
                TaskKind::RewardReval => Some(GraphEdit::RewardSwap {
                    a: LEAVES[0],
                    b: LEAVES[2],
                }),
                TaskKind::TransitionReval => Some(GraphEdit::TransitionRewire {
                    first: (MID_A, 0),
                    second: (MID_B, 0),
                }),
                TaskKind::Control => None,
            };
            (edit, vec![MID_A, MID_B], TestSpec::ChooseAction { state: ROOT })
        }
        other => {
            return Err(Error::param(format!(
                "revaluation tasks need the two-stream or tree template, not `{}`",
                other.name()
            )))
        }
    };
    let schedule = PhaseSchedule {
        phase1_episodes: params.phase1_episodes,
        phase2_episodes: params.phase2_episodes,
        phase1_starts: graph.start_states().to_vec(),
        phase2_starts,
        edit,
        rest_windows: rest_schedule(params.phase2_episodes, params.rest_windows, params.replay_budget),
        test,
    };
    Ok(Task {
        kind,
        graph,
        schedule,
    })
}
