use nalgebra::DMatrix;

use crate::mdp::Transition;
use crate::{Error, Result};

/// Cached state-action values of a model-free learner.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    q: DMatrix<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        QTable {
            q: DMatrix::zeros(n_states, n_actions),
        }
    }

    pub fn from_matrix(q: DMatrix<f64>) -> Result<Self> {
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("Q table entries must be finite"));
        }
        Ok(QTable { q })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn n_states(&self) -> usize {
        self.q.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.q.ncols()
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.q[(s, a)]
    }

    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.q[(s, a)] = value;
    }

    pub fn row(&self, s: usize) -> Vec<f64> {
        self.q.row(s).iter().copied().collect()
    }

    /// `max_a Q(s, a)`.
    pub fn state_value(&self, s: usize) -> f64 {
        self.q.row(s).max()
    }

    fn check(&self, tr: &Transition, a_next: Option<usize>) -> Result<()> {
        let (n, na) = self.q.shape();
        for (what, i, size) in [
            ("state", tr.s, n),
            ("state", tr.s_next, n),
            ("action", tr.a, na),
            ("action", a_next.unwrap_or(0), na),
        ] {
            if i >= size {
                return Err(Error::index(what, i, size));
            }
        }
        Ok(())
    }

    fn apply(&mut self, tr: &Transition, bootstrap: f64, alpha: f64, gamma: f64) -> f64 {
        let target = tr.r + gamma * bootstrap;
        let delta = target - self.q[(tr.s, tr.a)];
        self.q[(tr.s, tr.a)] += alpha * delta;
        delta
    }

    /// On-policy update `Q(s,a) += alpha [r + gamma Q(s',a') - Q(s,a)]`.
    /// Returns the TD error before scaling.
    pub fn sarsa_update(
        &mut self,
        tr: &Transition,
        a_next: usize,
        alpha: f64,
        gamma: f64,
    ) -> Result<f64> {
        self.check(tr, Some(a_next))?;
        let boot = if tr.done {
            0.0
        } else {
            self.q[(tr.s_next, a_next)]
        };
        Ok(self.apply(tr, boot, alpha, gamma))
    }

    /// Off-policy update bootstrapping on `max_a' Q(s', a')`.
    pub fn q_learning_update(&mut self, tr: &Transition, alpha: f64, gamma: f64) -> Result<f64> {
        self.check(tr, None)?;
        let boot = if tr.done {
            0.0
        } else {
            self.state_value(tr.s_next)
        };
        Ok(self.apply(tr, boot, alpha, gamma))
    }
}
