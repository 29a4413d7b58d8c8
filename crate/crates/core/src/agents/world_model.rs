use nalgebra::DMatrix;

use super::{LearningRate, Mdp};
use crate::mdp::Transition;
use crate::{Error, Result};

/// One-step model learned from experience.
///
/// Each visited `(s, a)` row is a convex combination of observed outcomes.
/// With [`LearningRate::Harmonic`] it is the empirical frequency; with a
/// constant rate older outcomes decay geometrically, so a changed edge takes
/// over after a handful of visits. Rewards keep the last value observed on
/// arrival.
#[derive(Debug, Clone)]
pub struct WorldModel {
    t_hat: Vec<DMatrix<f64>>,
    r_hat: Vec<f64>,
    visit_counts: DMatrix<u64>,
    terminal_seen: Vec<bool>,
    rate: LearningRate,
}

impl WorldModel {
    pub fn new(n_states: usize, n_actions: usize, rate: LearningRate) -> Result<Self> {
        Ok(WorldModel {
            t_hat: vec![DMatrix::zeros(n_states, n_states); n_actions],
            r_hat: vec![0.0; n_states],
            visit_counts: DMatrix::zeros(n_states, n_actions),
            terminal_seen: vec![false; n_states],
            rate: rate.validate()?,
        })
    }

    pub fn update(&mut self, tr: &Transition) -> Result<()> {
        let n = self.r_hat.len();
        let na = self.t_hat.len();
        for (what, i, size) in [("state", tr.s, n), ("state", tr.s_next, n), ("action", tr.a, na)] {
            if i >= size {
                return Err(Error::index(what, i, size));
            }
        }
        let k = self.visit_counts[(tr.s, tr.a)] + 1;
        self.visit_counts[(tr.s, tr.a)] = k;
        let m = &mut self.t_hat[tr.a];
        let alpha = if k == 1 { 1.0 } else { self.rate.at(k) };
        for j in 0..n {
            let target = if j == tr.s_next { 1.0 } else { 0.0 };
            m[(tr.s, j)] += alpha * (target - m[(tr.s, j)]);
        }
        self.r_hat[tr.s_next] = tr.r;
        if tr.done {
            self.terminal_seen[tr.s_next] = true;
        }
        Ok(())
    }

    pub fn t_hat(&self, a: usize) -> &DMatrix<f64> {
        &self.t_hat[a]
    }

    pub fn r_hat(&self) -> &[f64] {
        &self.r_hat
    }

    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visit_counts[(s, a)]
    }
}

impl Mdp for WorldModel {
    fn n_states(&self) -> usize {
        self.r_hat.len()
    }

    fn n_actions(&self) -> usize {
        self.t_hat.len()
    }

    fn is_terminal(&self, s: usize) -> bool {
        self.terminal_seen[s]
    }

    fn is_available(&self, s: usize, a: usize) -> bool {
        self.visit_counts[(s, a)] > 0
    }

    fn backup(&self, s: usize, a: usize, v: &[f64], gamma: f64) -> f64 {
        let row = self.t_hat[a].row(s);
        row.iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(j, &p)| p * (self.r_hat[j] + gamma * v[j]))
            .sum()
    }
}
