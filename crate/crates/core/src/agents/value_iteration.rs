use nalgebra::{DMatrix, DVector};

use super::check_gamma;
use crate::mdp::TaskGraph;
use crate::{Error, Result};

/// What value iteration needs to know about a (true or learned) model.
pub trait Mdp {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn is_terminal(&self, s: usize) -> bool;
    /// Unavailable actions are excluded from the max; a non-terminal state
    /// with no available action is worth zero.
    fn is_available(&self, s: usize, a: usize) -> bool;
    /// `sum_s' p(s'|s,a) * (R(s') + gamma * v[s'])`.
    fn backup(&self, s: usize, a: usize, v: &[f64], gamma: f64) -> f64;
}

impl Mdp for TaskGraph {
    fn n_states(&self) -> usize {
        TaskGraph::n_states(self)
    }

    fn n_actions(&self) -> usize {
        TaskGraph::n_actions(self)
    }

    fn is_terminal(&self, s: usize) -> bool {
        TaskGraph::is_terminal(self, s)
    }

    fn is_available(&self, _s: usize, _a: usize) -> bool {
        true
    }

    fn backup(&self, s: usize, a: usize, v: &[f64], gamma: f64) -> f64 {
        self.successors(s, a)
            .map(|(s2, p)| p * (self.reward()[s2] + gamma * v[s2]))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution {
    pub v: DVector<f64>,
    /// Action values; unavailable actions hold `-inf`, terminal rows zero.
    pub q: DMatrix<f64>,
    /// Sweeps performed, also the model-based cost proxy.
    pub iters: usize,
}

impl ValueSolution {
    /// Largest `|V - max_a Q|` over states, i.e. the Bellman residual of `v`.
    pub fn residual<M: Mdp + ?Sized>(&self, model: &M, gamma: f64) -> f64 {
        let v: Vec<f64> = self.v.iter().copied().collect();
        let next = sweep(model, &v, gamma);
        next.iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn sweep<M: Mdp + ?Sized>(model: &M, v: &[f64], gamma: f64) -> Vec<f64> {
    (0..model.n_states())
        .map(|s| {
            if model.is_terminal(s) {
                return 0.0;
            }
            (0..model.n_actions())
                .filter(|&a| model.is_available(s, a))
                .map(|a| model.backup(s, a, v, gamma))
                .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |m| m.max(x))))
                .unwrap_or(0.0)
        })
        .collect()
}

/// Synchronous Bellman optimality sweeps from `V = 0` until successive
/// iterates differ by less than `tol` in max norm.
pub fn value_iteration<M: Mdp + ?Sized>(
    model: &M,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ValueSolution> {
    check_gamma(gamma)?;
    if !(tol > 0.0) {
        return Err(Error::param(format!("tolerance {tol} must be positive")));
    }
    let n = model.n_states();
    let mut v = vec![0.0; n];
    let mut iters = 0;
    let mut delta = f64::INFINITY;
    while iters < max_iter {
        let next = sweep(model, &v, gamma);
        iters += 1;
        delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta < tol {
            break;
        }
    }
    if delta >= tol {
        return Err(Error::NotConverged {
            iters,
            residual: delta,
        });
    }
    let na = model.n_actions();
    let q = DMatrix::from_fn(n, na, |s, a| {
        if model.is_terminal(s) {
            0.0
        } else if model.is_available(s, a) {
            model.backup(s, a, &v, gamma)
        } else {
            f64::NEG_INFINITY
        }
    });
    Ok(ValueSolution {
        v: DVector::from_vec(v),
        q,
        iters,
    })
}
