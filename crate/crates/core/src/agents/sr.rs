//! Successor representation: `M[s][s']` is the expected discounted number of
//! visits to `s'` starting from `s`, counting the start itself.

use nalgebra::{DMatrix, DVector};

use super::{check_gamma, LearningRate};
use crate::mdp::Transition;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SrMatrix {
    m: DMatrix<f64>,
    gamma: f64,
}

impl SrMatrix {
    pub fn identity(n: usize, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(SrMatrix {
            m: DMatrix::identity(n, n),
            gamma,
        })
    }

    pub fn from_matrix(m: DMatrix<f64>, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        Ok(SrMatrix { m, gamma })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, s: usize, s2: usize) -> f64 {
        self.m[(s, s2)]
    }

    /// Discounted future occupancy from `s`.
    pub fn row(&self, s: usize) -> DVector<f64> {
        self.m.row(s).transpose()
    }

    /// Discounted occupancy of `s` from every predecessor.
    pub fn column(&self, s: usize) -> DVector<f64> {
        self.m.column(s).clone_owned()
    }

    fn check(&self, s: usize) -> Result<()> {
        if s >= self.n() {
            return Err(Error::index("state", s, self.n()));
        }
        Ok(())
    }

    /// `onehot(s) + gamma * next_row - M(s)`.
    fn error_against(&self, s: usize, next_row: DVector<f64>) -> DVector<f64> {
        let mut err = next_row * self.gamma - self.row(s);
        err[s] += 1.0;
        err
    }

    /// Successor prediction error for `s -> s_next`, bootstrapping on the
    /// stored row of `s_next`.
    pub fn successor_error(&self, s: usize, s_next: usize) -> Result<DVector<f64>> {
        self.check(s)?;
        self.check(s_next)?;
        Ok(self.error_against(s, self.row(s_next)))
    }

    /// Like [`successor_error`](Self::successor_error), but a terminal
    /// `s_next` is occupied once on arrival and never again.
    pub fn transition_error(&self, tr: &Transition) -> Result<DVector<f64>> {
        self.check(tr.s)?;
        self.check(tr.s_next)?;
        let next = if tr.done {
            let mut e = DVector::zeros(self.n());
            e[tr.s_next] = 1.0;
            e
        } else {
            self.row(tr.s_next)
        };
        Ok(self.error_against(tr.s, next))
    }

    /// Adds `alpha * err` to row `s`.
    fn apply(&mut self, s: usize, err: &DVector<f64>, alpha: f64) {
        for (j, e) in err.iter().enumerate() {
            self.m[(s, j)] += alpha * e;
        }
    }

    /// `M V`-style readout: `sum_s' M[s][s'] * reward[s']` for every `s`.
    pub fn value(&self, reward: &[f64]) -> Result<DVector<f64>> {
        if reward.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: reward.len(),
            });
        }
        Ok(&self.m * DVector::from_column_slice(reward))
    }
}

/// `M = (I - gamma T)^-1`, the closed form of `sum_t gamma^t T^t`.
pub fn sr_analytic(t_pi: &DMatrix<f64>, gamma: f64) -> Result<SrMatrix> {
    check_gamma(gamma)?;
    if !t_pi.is_square() {
        return Err(Error::DimensionMismatch {
            expected: t_pi.nrows(),
            got: t_pi.ncols(),
        });
    }
    let n = t_pi.nrows();
    let a = DMatrix::identity(n, n) - t_pi * gamma;
    let m = a
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("I - gamma T is not invertible".into()))?;
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular("I - gamma T is numerically singular".into()));
    }
    Ok(SrMatrix { m, gamma })
}

/// An SR learner: occupancy matrix plus a separately stored reward estimate.
#[derive(Debug, Clone)]
pub struct SrState {
    m: SrMatrix,
    r_hat: Vec<f64>,
    rate: LearningRate,
    reward_rate: LearningRate,
    row_updates: Vec<u64>,
    reward_updates: Vec<u64>,
}

impl SrState {
    /// Identity-initialised SR with zero reward estimates.
    pub fn new(n: usize, gamma: f64, rate: LearningRate) -> Result<Self> {
        Ok(SrState {
            m: SrMatrix::identity(n, gamma)?,
            r_hat: vec![0.0; n],
            rate: rate.validate()?,
            reward_rate: rate,
            row_updates: vec![0; n],
            reward_updates: vec![0; n],
        })
    }

    pub fn with_reward_rate(mut self, rate: LearningRate) -> Result<Self> {
        self.reward_rate = rate.validate()?;
        Ok(self)
    }

    pub fn from_parts(m: SrMatrix, r_hat: Vec<f64>, rate: LearningRate) -> Result<Self> {
        if r_hat.len() != m.n() {
            return Err(Error::DimensionMismatch {
                expected: m.n(),
                got: r_hat.len(),
            });
        }
        let n = m.n();
        Ok(SrState {
            m,
            r_hat,
            rate: rate.validate()?,
            reward_rate: rate,
            row_updates: vec![0; n],
            reward_updates: vec![0; n],
        })
    }

    pub fn sr(&self) -> &SrMatrix {
        &self.m
    }

    pub fn gamma(&self) -> f64 {
        self.m.gamma
    }

    pub fn r_hat(&self) -> &[f64] {
        &self.r_hat
    }

    pub fn n(&self) -> usize {
        self.m.n()
    }

    /// TD update of row `s` towards `onehot(s) + gamma M(s_next)`. Returns the
    /// L1 norm of the successor prediction error before the update.
    pub fn td_update(&mut self, s: usize, s_next: usize) -> Result<f64> {
        let err = self.m.successor_error(s, s_next)?;
        Ok(self.apply_row(s, &err))
    }

    /// TD update from a full transition (terminal arrivals bootstrap on a
    /// one-hot row) followed by the reward update.
    pub fn learn(&mut self, tr: &Transition) -> Result<f64> {
        let err = self.m.transition_error(tr)?;
        let size = self.apply_row(tr.s, &err);
        self.reward_update(tr.s_next, tr.r)?;
        Ok(size)
    }

    fn apply_row(&mut self, s: usize, err: &DVector<f64>) -> f64 {
        self.row_updates[s] += 1;
        let alpha = self.rate.at(self.row_updates[s]);
        self.m.apply(s, err, alpha);
        err.lp_norm(1)
    }

    /// Delta-rule estimate of the reward received on arrival at `s`.
    pub fn reward_update(&mut self, s: usize, r: f64) -> Result<()> {
        if s >= self.n() {
            return Err(Error::index("state", s, self.n()));
        }
        self.reward_updates[s] += 1;
        let beta = self.reward_rate.at(self.reward_updates[s]);
        self.r_hat[s] += beta * (r - self.r_hat[s]);
        Ok(())
    }

    /// `V = M R_hat`.
    pub fn value(&self) -> DVector<f64> {
        self.m.value(&self.r_hat).expect("dimensions fixed at construction")
    }

    pub fn state_value(&self, s: usize) -> f64 {
        self.m
            .m
            .row(s)
            .iter()
            .zip(&self.r_hat)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// State values `V = M R_hat`; one length-n dot product per state.
pub fn value_from_sr(st: &SrState) -> DVector<f64> {
    st.value()
}
