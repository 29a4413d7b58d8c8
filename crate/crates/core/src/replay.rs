//! Prioritized replay of stored experience.
//!
//! Priorities are prediction-error magnitudes: either the reward (value) TD
//! error or the successor prediction error of the SR update. A replay pass
//! picks stored transitions by priority, re-applies the agent's online update
//! to each, and refreshes the priorities the update could have changed.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::agents::{QTable, SrState};
use crate::mdp::Transition;
use crate::{Error, Result, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriorityMode {
    #[serde(rename = "reward-pe")]
    RewardPe,
    #[serde(rename = "successor-pe")]
    SuccessorPe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selection {
    #[serde(rename = "greedy")]
    Greedy,
    #[serde(rename = "proportional")]
    Proportional,
}

/// Which priorities a pass recomputes after each update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Refresh {
    /// The replayed item and the items whose destination is its origin.
    #[default]
    Lazy,
    /// Every item, after every update.
    Full,
}

macro_rules! str_enum {
    ($ty:ty { $($variant:path => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::param(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"),
                        other
                    ))),
                }
            }
        }
    };
}

str_enum!(PriorityMode {
    PriorityMode::RewardPe => "reward-pe",
    PriorityMode::SuccessorPe => "successor-pe",
});

str_enum!(Selection {
    Selection::Greedy => "greedy",
    Selection::Proportional => "proportional",
});

/// An agent that can learn from replayed transitions.
pub trait ReplayLearner {
    /// Re-applies the online update for `tr`.
    fn replay_update(&mut self, tr: &Transition) -> Result<()>;

    /// Current prediction-error magnitude of `tr`.
    fn priority(&self, tr: &Transition, mode: PriorityMode) -> Result<f64>;
}

/// Prediction-error priority of `tr` under the agent's current estimates.
pub fn priority_from_pe<L: ReplayLearner + ?Sized>(
    agent: &L,
    tr: &Transition,
    mode: PriorityMode,
) -> Result<f64> {
    agent.priority(tr, mode)
}

impl ReplayLearner for SrState {
    fn replay_update(&mut self, tr: &Transition) -> Result<()> {
        self.learn(tr).map(|_| ())
    }

    fn priority(&self, tr: &Transition, mode: PriorityMode) -> Result<f64> {
        match mode {
            PriorityMode::SuccessorPe => Ok(self.sr().transition_error(tr)?.lp_norm(1)),
            PriorityMode::RewardPe => {
                let n = self.n();
                if tr.s >= n || tr.s_next >= n {
                    return Err(Error::index("state", tr.s.max(tr.s_next), n));
                }
                // SR values count the current state's own reward, so the
                // consistency condition is V(s) = R(s) + gamma V(s'), with the
                // observed reward substituted for R_hat(s').
                let r_hat = self.r_hat();
                let v_next = if tr.done {
                    r_hat[tr.s_next]
                } else {
                    self.state_value(tr.s_next)
                };
                let target = r_hat[tr.s] + self.gamma() * (tr.r - r_hat[tr.s_next] + v_next);
                Ok((target - self.state_value(tr.s)).abs())
            }
        }
    }
}

/// Q-learning agent for the model-free Dyna baseline.
#[derive(Debug, Clone)]
pub struct QReplay {
    pub q: QTable,
    pub alpha: f64,
    pub gamma: f64,
}

impl ReplayLearner for QReplay {
    fn replay_update(&mut self, tr: &Transition) -> Result<()> {
        self.q.q_learning_update(tr, self.alpha, self.gamma).map(|_| ())
    }

    fn priority(&self, tr: &Transition, mode: PriorityMode) -> Result<f64> {
        match mode {
            PriorityMode::RewardPe => {
                let mut probe = self.q.clone();
                Ok(probe.q_learning_update(tr, 0.0, self.gamma)?.abs())
            }
            PriorityMode::SuccessorPe => Err(Error::param(
                "successor-pe priorities need an SR agent",
            )),
        }
    }
}

/// Bounded store of experienced transitions with priorities.
///
/// With `keyed` set, a new transition from an `(s, a)` already in the buffer
/// replaces the stored one, so the buffer keeps the latest outcome per
/// state-action pair.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    priority: Vec<f64>,
    inserted: Vec<u64>,
    capacity: usize,
    keyed: bool,
    counter: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::param("replay capacity must be positive"));
        }
        Ok(ReplayBuffer {
            items: Vec::new(),
            priority: Vec::new(),
            inserted: Vec::new(),
            capacity,
            keyed: false,
            counter: 0,
        })
    }

    pub fn keyed(mut self, keyed: bool) -> Self {
        self.keyed = keyed;
        self
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn items(&self) -> &[Transition] {
        &self.items
    }

    pub fn priorities(&self) -> &[f64] {
        &self.priority
    }

    pub fn push(&mut self, tr: Transition, priority: f64) -> Result<()> {
        if !(priority >= 0.0) || !priority.is_finite() {
            return Err(Error::param(format!("priority {priority} must be finite and >= 0")));
        }
        self.counter += 1;
        if self.keyed {
            if let Some(i) = self.items.iter().position(|x| x.s == tr.s && x.a == tr.a) {
                self.items[i] = tr;
                self.priority[i] = priority;
                self.inserted[i] = self.counter;
                return Ok(());
            }
        }
        self.items.push(tr);
        self.priority.push(priority);
        self.inserted.push(self.counter);
        if self.items.len() > self.capacity {
            let victim = (0..self.items.len())
                .min_by(|&a, &b| {
                    self.priority[a]
                        .total_cmp(&self.priority[b])
                        .then(self.inserted[a].cmp(&self.inserted[b]))
                })
                .expect("non-empty");
            self.items.remove(victim);
            self.priority.remove(victim);
            self.inserted.remove(victim);
        }
        Ok(())
    }

    fn set_priority(&mut self, i: usize, p: f64) {
        self.priority[i] = if p.is_finite() { p.max(0.0) } else { 0.0 };
    }

    fn pick(&self, selection: Selection, rng: &mut Rng) -> usize {
        match selection {
            Selection::Greedy => {
                let mut best = 0;
                for i in 1..self.priority.len() {
                    if self.priority[i] > self.priority[best] {
                        best = i;
                    }
                }
                best
            }
            Selection::Proportional => {
                let total: f64 = self.priority.iter().sum();
                if total <= 0.0 {
                    return rng.gen_range(0..self.items.len());
                }
                let u = rng.gen::<f64>() * total;
                let mut acc = 0.0;
                for (i, p) in self.priority.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return i;
                    }
                }
                // rounding at the top end
                self.priority.iter().rposition(|&p| p > 0.0).expect("total > 0")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEvent {
    /// Buffer index of the replayed item.
    pub index: usize,
    /// Its priority when it was selected.
    pub priority: f64,
    pub transition: Transition,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayTrace {
    pub replayed: Vec<ReplayEvent>,
    pub budget_used: usize,
}

impl ReplayTrace {
    pub fn extend(&mut self, other: ReplayTrace) {
        self.budget_used += other.budget_used;
        self.replayed.extend(other.replayed);
    }
}

/// Replays up to `budget` stored transitions into `agent`.
pub fn replay_pass<L: ReplayLearner + ?Sized>(
    agent: &mut L,
    buf: &mut ReplayBuffer,
    budget: usize,
    selection: Selection,
    mode: PriorityMode,
    refresh: Refresh,
    rng: &mut Rng,
) -> Result<ReplayTrace> {
    let mut trace = ReplayTrace::default();
    if buf.is_empty() {
        return Ok(trace);
    }
    for _ in 0..budget {
        let i = buf.pick(selection, rng);
        let tr = buf.items[i];
        trace.replayed.push(ReplayEvent {
            index: i,
            priority: buf.priority[i],
            transition: tr,
        });
        agent.replay_update(&tr)?;
        match refresh {
            Refresh::Full => {
                for j in 0..buf.len() {
                    let p = agent.priority(&buf.items[j], mode)?;
                    buf.set_priority(j, p);
                }
            }
            Refresh::Lazy => {
                for j in 0..buf.len() {
                    if j == i || buf.items[j].s_next == tr.s {
                        let p = agent.priority(&buf.items[j], mode)?;
                        buf.set_priority(j, p);
                    }
                }
            }
        }
    }
    trace.budget_used = trace.replayed.len();
    Ok(trace)
}
