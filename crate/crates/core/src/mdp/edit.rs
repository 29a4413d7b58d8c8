use serde::{Deserialize, Serialize};

use super::TaskGraph;
use crate::{Error, Result};

/// Structural change to a task graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphEdit {
    /// Exchange the rewards of two states.
    RewardSwap { a: usize, b: usize },
    /// Exchange the outcome rows of two state-action pairs.
    TransitionRewire {
        first: (usize, usize),
        second: (usize, usize),
    },
    /// Block the edge `state -a-> target`; its mass turns into a self-transition.
    EdgeRemove {
        state: usize,
        action: usize,
        target: usize,
    },
    /// Redirect `state -a->` deterministically to `target`.
    EdgeAdd {
        state: usize,
        action: usize,
        target: usize,
    },
}

impl GraphEdit {
    pub fn name(&self) -> &'static str {
        match self {
            GraphEdit::RewardSwap { .. } => "reward-swap",
            GraphEdit::TransitionRewire { .. } => "transition-rewire",
            GraphEdit::EdgeRemove { .. } => "edge-remove",
            GraphEdit::EdgeAdd { .. } => "edge-add",
        }
    }
}

impl TaskGraph {
    /// Returns the edited graph; `self` is left untouched.
    pub fn apply_edit(&self, edit: &GraphEdit) -> Result<TaskGraph> {
        let mut g = self.clone();
        let n = g.n_states();
        let na = g.n_actions();
        let check_s = |s: usize| {
            if s >= n {
                Err(Error::index("state", s, n))
            } else {
                Ok(())
            }
        };
        let check_a = |a: usize| {
            if a >= na {
                Err(Error::index("action", a, na))
            } else {
                Ok(())
            }
        };
        let (trans, reward, terminal) = g.parts_mut();
        match *edit {
            GraphEdit::RewardSwap { a, b } => {
                check_s(a)?;
                check_s(b)?;
                reward.swap(a, b);
            }
            GraphEdit::TransitionRewire {
                first: (s1, a1),
                second: (s2, a2),
            } => {
                check_s(s1)?;
                check_s(s2)?;
                check_a(a1)?;
                check_a(a2)?;
                if terminal[s1] != terminal[s2] {
                    return Err(Error::InvalidGraph(
                        "rewire between a terminal and a non-terminal row".into(),
                    ));
                }
                let row1 = trans[a1].row(s1).clone_owned();
                let row2 = trans[a2].row(s2).clone_owned();
                trans[a1].set_row(s1, &row2);
                trans[a2].set_row(s2, &row1);
            }
            GraphEdit::EdgeRemove {
                state,
                action,
                target,
            } => {
                check_s(state)?;
                check_s(target)?;
                check_a(action)?;
                let m = &mut trans[action];
                let p = m[(state, target)];
                if p == 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "no edge {state} -{action}-> {target} to remove"
                    )));
                }
                if target == state {
                    return Err(Error::InvalidGraph("cannot remove a self-transition".into()));
                }
                m[(state, target)] = 0.0;
                m[(state, state)] += p;
            }
            GraphEdit::EdgeAdd {
                state,
                action,
                target,
            } => {
                check_s(state)?;
                check_s(target)?;
                check_a(action)?;
                if terminal[state] {
                    return Err(Error::InvalidGraph(format!(
                        "terminal state {state} cannot gain an outgoing edge"
                    )));
                }
                let m = &mut trans[action];
                for j in 0..n {
                    m[(state, j)] = 0.0;
                }
                m[(state, target)] = 1.0;
            }
        }
        g.validate()?;
        Ok(g)
    }
}
