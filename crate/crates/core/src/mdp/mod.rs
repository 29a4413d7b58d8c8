//! Finite graph MDPs.
//!
//! Rewards are attached to states and received on arrival, so the expected
//! reward of taking `a` in `s` is `sum_s' p(s'|s,a) * reward[s']`. Terminal
//! states carry all-zero transition rows for every action.

mod edit;
mod format;
mod templates;

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::{Error, Result, Rng};

pub use edit::GraphEdit;
pub use format::{parse_graph, write_graph};
pub use templates::{make_graph_env, two_stream, tree, Template};

/// Tolerance for row sums of stochastic matrices.
pub const ROW_TOL: f64 = 1e-9;

/// A finite MDP over a small graph.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGraph {
    n_states: usize,
    n_actions: usize,
    trans: Vec<DMatrix<f64>>,
    reward: Vec<f64>,
    terminal: Vec<bool>,
    start_states: Vec<usize>,
}

impl TaskGraph {
    /// Builds a graph and checks every structural invariant.
    pub fn new(
        trans: Vec<DMatrix<f64>>,
        reward: Vec<f64>,
        terminal: Vec<bool>,
        start_states: Vec<usize>,
    ) -> Result<Self> {
        let n_actions = trans.len();
        if n_actions == 0 {
            return Err(Error::InvalidGraph("graph needs at least one action".into()));
        }
        let n_states = reward.len();
        if n_states == 0 {
            return Err(Error::InvalidGraph("graph needs at least one state".into()));
        }
        let g = TaskGraph {
            n_states,
            n_actions,
            trans,
            reward,
            terminal,
            start_states,
        };
        g.validate()?;
        Ok(g)
    }

    /// Re-checks the invariants. Every constructor and edit ends with this.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_states;
        if self.terminal.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.terminal.len(),
            });
        }
        for (a, m) in self.trans.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidGraph(format!(
                    "action {a} matrix is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            for s in 0..n {
                let row = m.row(s);
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(Error::InvalidGraph(format!(
                        "row ({s}, action {a}) has an entry outside [0, 1]"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if self.terminal[s] {
                    if sum != 0.0 {
                        return Err(Error::InvalidGraph(format!(
                            "terminal state {s} has a non-zero row under action {a}"
                        )));
                    }
                } else if (sum - 1.0).abs() > ROW_TOL {
                    return Err(Error::InvalidGraph(format!(
                        "row ({s}, action {a}) sums to {sum}"
                    )));
                }
            }
        }
        if let Some(r) = self.reward.iter().find(|r| !r.is_finite()) {
            return Err(Error::InvalidGraph(format!("non-finite reward {r}")));
        }
        if self.start_states.is_empty() {
            return Err(Error::InvalidGraph("no start states".into()));
        }
        if let Some(&s) = self.start_states.iter().find(|&&s| s >= n) {
            return Err(Error::index("start state", s, n));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// `p(s' | s, a)` for every `s'`: row `s` of action `a`'s matrix.
    pub fn trans(&self, a: usize) -> &DMatrix<f64> {
        &self.trans[a]
    }

    pub fn prob(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.trans[a][(s, s_next)]
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn terminal(&self) -> &[bool] {
        &self.terminal
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn start_states(&self) -> &[usize] {
        &self.start_states
    }

    pub(crate) fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.n_states {
            return Err(Error::index("state", s, self.n_states));
        }
        Ok(())
    }

    pub(crate) fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.n_actions {
            return Err(Error::index("action", a, self.n_actions));
        }
        Ok(())
    }

    /// Samples one transition. `t` is the caller's step counter and is only
    /// recorded on the result.
    pub fn step(&self, s: usize, a: usize, t: u64, rng: &mut Rng) -> Result<Transition> {
        self.check_state(s)?;
        self.check_action(a)?;
        if self.terminal[s] {
            return Err(Error::TerminalState(s));
        }
        let row = self.trans[a].row(s);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = None;
        for (s_next, &p) in row.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            chosen = Some(s_next);
            if u < acc {
                break;
            }
        }
        // rows sum to 1 so `chosen` is set; rounding can leave u >= acc, in
        // which case the last positive entry wins
        let s_next = chosen.expect("non-terminal row has positive mass");
        Ok(Transition {
            s,
            a,
            s_next,
            r: self.reward[s_next],
            t,
            done: self.terminal[s_next],
        })
    }

    /// `T_pi[s][s'] = sum_a pi(a|s) p(s'|s,a)`.
    pub fn transition_matrix_under_policy(&self, policy: &Policy) -> Result<DMatrix<f64>> {
        let probs = policy.probs();
        if probs.nrows() != self.n_states {
            return Err(Error::DimensionMismatch {
                expected: self.n_states,
                got: probs.nrows(),
            });
        }
        if probs.ncols() != self.n_actions {
            return Err(Error::DimensionMismatch {
                expected: self.n_actions,
                got: probs.ncols(),
            });
        }
        let n = self.n_states;
        let mut t_pi = DMatrix::zeros(n, n);
        for (a, m) in self.trans.iter().enumerate() {
            for s in 0..n {
                let w = probs[(s, a)];
                if w == 0.0 {
                    continue;
                }
                for s_next in 0..n {
                    t_pi[(s, s_next)] += w * m[(s, s_next)];
                }
            }
        }
        Ok(t_pi)
    }

    /// States reachable from `from` (including itself) through edges with
    /// positive probability under any action.
    pub fn reachable_from(&self, from: usize) -> Result<Vec<bool>> {
        self.check_state(from)?;
        let mut seen = vec![false; self.n_states];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(s) = queue.pop_front() {
            for m in &self.trans {
                for s_next in 0..self.n_states {
                    if m[(s, s_next)] > 0.0 && !seen[s_next] {
                        seen[s_next] = true;
                        queue.push_back(s_next);
                    }
                }
            }
        }
        Ok(seen)
    }

    /// Outcomes of `(s, a)` with positive probability.
    pub fn successors(&self, s: usize, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let row = self.trans[a].row(s);
        (0..self.n_states).filter_map(move |j| {
            let p = row[j];
            (p > 0.0).then_some((j, p))
        })
    }

    pub(crate) fn parts_mut(
        &mut self,
    ) -> (&mut Vec<DMatrix<f64>>, &mut Vec<f64>, &mut Vec<bool>) {
        (&mut self.trans, &mut self.reward, &mut self.terminal)
    }
}

/// A stochastic policy `pi(a|s)` stored as an `n_states x n_actions` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    probs: DMatrix<f64>,
}

impl Policy {
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        for (s, row) in probs.row_iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::param(format!("policy row {s} has an entry outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::param(format!("policy row {s} sums to {sum}")));
            }
        }
        Ok(Policy { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy {
            probs: DMatrix::from_element(n_states, n_actions, 1.0 / n_actions as f64),
        }
    }

    /// Always picks `action` (e.g. "always move right" on a track).
    pub fn constant(n_states: usize, n_actions: usize, action: usize) -> Result<Self> {
        if action >= n_actions {
            return Err(Error::index("action", action, n_actions));
        }
        let mut probs = DMatrix::zeros(n_states, n_actions);
        for s in 0..n_states {
            probs[(s, action)] = 1.0;
        }
        Ok(Policy { probs })
    }

    /// Epsilon-greedy over a table of action values, ties to the lowest index.
    pub fn epsilon_greedy(values: &DMatrix<f64>, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::param(format!("epsilon {epsilon} outside [0, 1]")));
        }
        let (n, a) = values.shape();
        let mut probs = DMatrix::from_element(n, a, epsilon / a as f64);
        for s in 0..n {
            let best = crate::agents::argmax(values.row(s).iter().copied())
                .ok_or_else(|| Error::param("empty action set"))?;
            probs[(s, best)] += 1.0 - epsilon;
        }
        Ok(Policy { probs })
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }
}

/// One experienced step `(s, a) -> s_next` with the arrival reward.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
    pub r: f64,
    /// Global step counter at generation time.
    pub t: u64,
    /// `s_next` is terminal.
    pub done: bool,
}
