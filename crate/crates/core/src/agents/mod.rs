//! Learning agents: model-free Q tables, a learned world model solved by value
//! iteration, and successor representations.

mod qtable;
mod sr;
mod value_iteration;
mod world_model;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Rng};

pub use qtable::QTable;
pub use sr::{sr_analytic, value_from_sr, SrMatrix, SrState};
pub use value_iteration::{value_iteration, Mdp, ValueSolution};
pub use world_model::WorldModel;

/// The agent families compared in the revaluation experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentKind {
    #[serde(rename = "mf-sarsa")]
    MfSarsa,
    #[serde(rename = "mf-q")]
    MfQ,
    #[serde(rename = "mb")]
    Mb,
    #[serde(rename = "sr-td")]
    SrTd,
    #[serde(rename = "sr-dyna")]
    SrDyna,
}

impl AgentKind {
    pub const ALL: [AgentKind; 5] = [
        AgentKind::MfSarsa,
        AgentKind::MfQ,
        AgentKind::Mb,
        AgentKind::SrTd,
        AgentKind::SrDyna,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::MfSarsa => "mf-sarsa",
            AgentKind::MfQ => "mf-q",
            AgentKind::Mb => "mb",
            AgentKind::SrTd => "sr-td",
            AgentKind::SrDyna => "sr-dyna",
        }
    }

    pub fn is_model_free(self) -> bool {
        matches!(self, AgentKind::MfSarsa | AgentKind::MfQ)
    }

    pub fn is_sr(self) -> bool {
        matches!(self, AgentKind::SrTd | AgentKind::SrDyna)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::param(format!("unknown agent `{s}`")))
    }
}

/// Step-size schedule. `Harmonic` uses `1/k` where `k` counts updates of the
/// row being changed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    Constant(f64),
    Harmonic,
}

impl LearningRate {
    pub fn at(self, k: u64) -> f64 {
        match self {
            LearningRate::Constant(a) => a,
            LearningRate::Harmonic => 1.0 / k.max(1) as f64,
        }
    }

    pub(crate) fn validate(self) -> Result<Self> {
        if let LearningRate::Constant(a) = self {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::param(format!("learning rate {a} outside [0, 1]")));
            }
        }
        Ok(self)
    }
}

impl Default for LearningRate {
    fn default() -> Self {
        LearningRate::Constant(0.1)
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::param(format!("discount {gamma} outside [0, 1)")));
    }
    Ok(())
}

/// Index of the largest value, lowest index on ties. `None` for an empty input.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Epsilon-greedy choice. One uniform draw decides explore/exploit, so the
/// stream advances the same way whatever the values are.
pub fn select_action(values: &[f64], epsilon: f64, rng: &mut Rng) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::param("no actions to choose from"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::param("NaN action value"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::param(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let explore = rng.gen::<f64>() < epsilon;
    if explore {
        Ok(rng.gen_range(0..values.len()))
    } else {
        Ok(argmax(values.iter().copied()).expect("non-empty"))
    }
}

/// Operation count for one decision, used as a reaction-time proxy.
///
/// Model-free agents read `n_actions` cached values. SR agents take one
/// `n_states`-long dot product per option. Model-based agents pay for every
/// value-iteration sweep over all state-action pairs and successors.
pub fn decision_cost(kind: AgentKind, n_states: usize, n_actions: usize, vi_iters: usize) -> u64 {
    let (n, a, it) = (n_states as u64, n_actions as u64, vi_iters as u64);
    match kind {
        AgentKind::MfSarsa | AgentKind::MfQ => a,
        AgentKind::SrTd | AgentKind::SrDyna => a * n,
        AgentKind::Mb => it * n * n * a,
    }
}
