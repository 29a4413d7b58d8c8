use rand::SeedableRng;
use serde::Serialize;

use super::config::{AgentConfig, Config, ReplayConfig};
use super::task::{Task, TaskKind, TestSpec};
use crate::agents::{
    argmax, decision_cost, select_action, value_iteration, AgentKind, LearningRate, QTable, SrState, WorldModel,
};
use crate::mdp::{TaskGraph, Transition};
use crate::replay::{replay_pass, ReplayBuffer, ReplayLearner, ReplayTrace};
use crate::{Error, Result, Rng};

/// Episodes on cyclic graphs are cut off after this many steps.
pub const MAX_EPISODE_STEPS: usize = 10_000;

/// Everything a single trial needs besides the task and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub kind: AgentKind,
    pub agent: AgentConfig,
    pub replay: ReplayConfig,
    pub test_epsilon: f64,
}

impl TrialConfig {
    pub fn from_config(cfg: &Config, kind: AgentKind) -> Self {
        TrialConfig {
            kind,
            agent: cfg.agent.clone(),
            replay: cfg.replay.clone(),
            test_epsilon: cfg.task.test_epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub agent_kind: AgentKind,
    pub task_kind: TaskKind,
    pub seed: u64,
    /// Chosen start state, or chosen action for an action test.
    pub test_choice: usize,
    /// The oracle's choice on the edited graph.
    pub optimal_choice: usize,
    pub correct: bool,
    pub decision_cost: u64,
    /// Replay budget made available over the trial.
    pub replay_budget: usize,
    pub replay_trace: ReplayTrace,
    /// Replayed items that were experienced before phase 2.
    pub phase1_replays: usize,
    /// Experienced transitions of phase 1 and phase 2.
    pub phase_traces: [Vec<Transition>; 2],
}

enum Learner {
    Mf(QTable),
    Mb(WorldModel),
    Sr(SrState),
}

struct Agent<'a> {
    cfg: &'a TrialConfig,
    n_actions: usize,
    learner: Learner,
    /// Last observed successor of each `(s, a)`, row-major.
    last_next: Vec<Option<usize>>,
    buffer: Option<ReplayBuffer>,
}

impl<'a> Agent<'a> {
    fn new(cfg: &'a TrialConfig, n: usize, na: usize) -> Result<Self> {
        let a = &cfg.agent;
        let learner = match cfg.kind {
            AgentKind::MfSarsa | AgentKind::MfQ => Learner::Mf(QTable::zeros(n, na)),
            AgentKind::Mb => Learner::Mb(WorldModel::new(n, na, a.model_rate)?),
            AgentKind::SrTd | AgentKind::SrDyna => {
                Learner::Sr(SrState::new(n, a.gamma, LearningRate::Constant(a.alpha))?)
            }
        };
        let buffer = match cfg.kind {
            AgentKind::SrDyna => Some(ReplayBuffer::new(cfg.replay.capacity)?.keyed(cfg.replay.keyed)),
            _ => None,
        };
        Ok(Agent {
            cfg,
            n_actions: na,
            learner,
            last_next: vec![None; n * na],
            buffer,
        })
    }

    fn plan(&self, model: &WorldModel) -> Result<crate::agents::ValueSolution> {
        value_iteration(model, self.cfg.agent.gamma, self.cfg.agent.vi_tol, self.cfg.agent.vi_max_iter)
    }

    /// SR action value: value of the last observed successor.
    fn sr_action_value(&self, st: &SrState, s: usize, a: usize) -> Option<f64> {
        self.last_next[s * self.n_actions + a].map(|s2| st.state_value(s2))
    }

    /// Values guiding behaviour while learning; untried actions count as 0.
    fn behaviour_values(&self, s: usize) -> Result<Vec<f64>> {
        if self.n_actions == 1 {
            return Ok(vec![0.0]);
        }
        Ok(match &self.learner {
            Learner::Mf(q) => q.row(s),
            Learner::Mb(m) => {
                let sol = self.plan(m)?;
                sol.q
                    .row(s)
                    .iter()
                    .map(|&x| if x.is_finite() { x } else { 0.0 })
                    .collect()
            }
            Learner::Sr(st) => (0..self.n_actions)
                .map(|a| self.sr_action_value(st, s, a).unwrap_or(0.0))
                .collect(),
        })
    }

    fn act(&self, s: usize, rng: &mut Rng) -> Result<usize> {
        select_action(&self.behaviour_values(s)?, self.cfg.agent.epsilon, rng)
    }

    fn learn(&mut self, tr: &Transition, a_next: Option<usize>) -> Result<()> {
        let (alpha, gamma) = (self.cfg.agent.alpha, self.cfg.agent.gamma);
        self.last_next[tr.s * self.n_actions + tr.a] = Some(tr.s_next);
        match &mut self.learner {
            Learner::Mf(q) => {
                if self.cfg.kind == AgentKind::MfSarsa {
                    q.sarsa_update(tr, a_next.unwrap_or(0), alpha, gamma)?;
                } else {
                    q.q_learning_update(tr, alpha, gamma)?;
                }
            }
            Learner::Mb(m) => m.update(tr)?,
            Learner::Sr(st) => {
                st.learn(tr)?;
                if let Some(buf) = &mut self.buffer {
                    let p = st.priority(tr, self.cfg.replay.mode)?;
                    buf.push(*tr, p)?;
                }
            }
        }
        Ok(())
    }

    fn rest(&mut self, budget: usize, rng: &mut Rng) -> Result<ReplayTrace> {
        let r = &self.cfg.replay;
        match (&mut self.learner, &mut self.buffer) {
            (Learner::Sr(st), Some(buf)) => replay_pass(st, buf, budget, r.selection, r.mode, r.refresh, rng),
            _ => Ok(ReplayTrace::default()),
        }
    }

    /// Values of the test options and the planning sweeps spent on them.
    fn test_values(&self, test: &TestSpec) -> Result<(Vec<f64>, usize)> {
        let vals = match (&self.learner, test) {
            (Learner::Mf(q), TestSpec::ChooseStart { options }) => {
                options.iter().map(|&s| q.state_value(s)).collect()
            }
            (Learner::Mf(q), TestSpec::ChooseAction { state }) => q.row(*state),
            (Learner::Mb(m), _) => {
                let sol = self.plan(m)?;
                let vals = match test {
                    TestSpec::ChooseStart { options } => options.iter().map(|&s| sol.v[s]).collect(),
                    TestSpec::ChooseAction { state } => sol.q.row(*state).iter().copied().collect(),
                };
                return Ok((vals, sol.iters));
            }
            (Learner::Sr(st), TestSpec::ChooseStart { options }) => {
                options.iter().map(|&s| st.state_value(s)).collect()
            }
            (Learner::Sr(st), TestSpec::ChooseAction { state }) => (0..self.n_actions)
                .map(|a| self.sr_action_value(st, *state, a).unwrap_or(f64::NEG_INFINITY))
                .collect(),
        };
        Ok((vals, 0))
    }
}

fn run_episode(
    agent: &mut Agent<'_>,
    graph: &TaskGraph,
    start: usize,
    clock: &mut u64,
    trace: &mut Vec<Transition>,
    rng: &mut Rng,
) -> Result<()> {
    let mut s = start;
    let mut a = agent.act(s, rng)?;
    for _ in 0..MAX_EPISODE_STEPS {
        let tr = graph.step(s, a, *clock, rng)?;
        *clock += 1;
        let a_next = if tr.done { None } else { Some(agent.act(tr.s_next, rng)?) };
        agent.learn(&tr, a_next)?;
        trace.push(tr);
        match a_next {
            Some(next) => {
                s = tr.s_next;
                a = next;
            }
            None => break,
        }
    }
    Ok(())
}

fn pick_start(starts: &[usize], rng: &mut Rng) -> Result<usize> {
    use rand::Rng as _;
    if starts.is_empty() {
        return Err(Error::param("no start states for this phase"));
    }
    Ok(starts[rng.gen_range(0..starts.len())])
}

/// One learning / relearning / test run. Deterministic in `seed`.
pub fn run_trial(cfg: &TrialConfig, task: &Task, seed: u64) -> Result<TrialRecord> {
    let mut rng = Rng::seed_from_u64(seed);
    let sched = &task.schedule;
    let g1 = &task.graph;
    let g2 = task.edited_graph()?;
    let (n, na) = (g1.n_states(), g1.n_actions());
    let mut agent = Agent::new(cfg, n, na)?;
    let mut clock = 0u64;
    let mut phase1 = Vec::new();
    let mut phase2 = Vec::new();
    for _ in 0..sched.phase1_episodes {
        let start = pick_start(&sched.phase1_starts, &mut rng)?;
        run_episode(&mut agent, g1, start, &mut clock, &mut phase1, &mut rng)?;
    }
    let onset = clock;
    let mut replay = ReplayTrace::default();
    let mut rest = |agent: &mut Agent<'_>, done: usize, rng: &mut Rng| -> Result<()> {
        for w in sched.rest_windows.iter().filter(|w| w.after_episode == done) {
            replay.extend(agent.rest(w.budget, rng)?);
        }
        Ok(())
    };
    rest(&mut agent, 0, &mut rng)?;
    for ep in 1..=sched.phase2_episodes {
        let start = pick_start(&sched.phase2_starts, &mut rng)?;
        run_episode(&mut agent, &g2, start, &mut clock, &mut phase2, &mut rng)?;
        rest(&mut agent, ep, &mut rng)?;
    }

    let (values, iters) = agent.test_values(&sched.test)?;
    let pick = select_action(&values, cfg.test_epsilon, &mut rng)?;
    let oracle = value_iteration(&g2, cfg.agent.gamma, cfg.agent.vi_tol, cfg.agent.vi_max_iter)?;
    let (test_choice, optimal_choice) = match &sched.test {
        TestSpec::ChooseStart { options } => {
            let best = argmax(options.iter().map(|&s| oracle.v[s])).expect("options non-empty");
            (options[pick], options[best])
        }
        TestSpec::ChooseAction { state } => {
            let best = argmax(oracle.q.row(*state).iter().copied()).expect("actions non-empty");
            (pick, best)
        }
    };
    let phase1_replays = replay.replayed.iter().filter(|e| e.transition.t < onset).count();
    Ok(TrialRecord {
        agent_kind: cfg.kind,
        task_kind: task.kind,
        seed,
        test_choice,
        optimal_choice,
        correct: test_choice == optimal_choice,
        decision_cost: decision_cost(cfg.kind, n, sched.test.n_options(na), iters),
        replay_budget: sched.rest_windows.iter().map(|w| w.budget).sum(),
        replay_trace: replay,
        phase1_replays,
        phase_traces: [phase1, phase2],
    })
}
