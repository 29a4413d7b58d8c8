use std::collections::BTreeMap;

use rand::{Rng as _, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use super::config::Config;
use super::task::{build_task, ScheduleParams, Task, TaskKind};
use super::trial::{run_trial, TrialConfig, TrialRecord};
use crate::agents::AgentKind;
use crate::stats::{binomial_stderr, spearman};
use crate::{Error, Result, Rng};

/// Minimum trials per task for a replay/behaviour correlation.
pub const MIN_CORRELATION_SAMPLE: usize = 30;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `(agent, task, seed index)` under `master`: each index is
/// folded in through a splitmix64 round.
pub fn trial_seed(master: u64, agent_idx: usize, task_idx: usize, seed_idx: usize) -> u64 {
    [agent_idx, task_idx, seed_idx]
        .into_iter()
        .fold(splitmix64(master), |h, x| splitmix64(h ^ x as u64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub agent: AgentKind,
    pub task: TaskKind,
    /// Trials that completed.
    pub trials: usize,
    /// Trials that failed with an error.
    pub errors: usize,
    pub pass_rate: f64,
    pub stderr: f64,
    pub mean_cost: f64,
    pub mean_replay: f64,
}

/// Agent-by-task pass rates, rows in agent order, columns in task order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultMatrix {
    pub seeds: usize,
    pub cells: Vec<CellResult>,
}

impl ResultMatrix {
    pub fn cell(&self, agent: AgentKind, task: TaskKind) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.agent == agent && c.task == task)
    }
}

fn summarize(agent: AgentKind, task: TaskKind, results: &[Result<TrialRecord>]) -> CellResult {
    let ok: Vec<&TrialRecord> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let k = ok.len();
    let mean = |f: &dyn Fn(&TrialRecord) -> f64| {
        if k == 0 {
            0.0
        } else {
            ok.iter().map(|r| f(r)).sum::<f64>() / k as f64
        }
    };
    let pass_rate = mean(&|r| f64::from(u8::from(r.correct)));
    CellResult {
        agent,
        task,
        trials: k,
        errors: results.len() - k,
        pass_rate,
        stderr: binomial_stderr(pass_rate, k),
        mean_cost: mean(&|r| r.decision_cost as f64),
        mean_replay: mean(&|r| r.replay_trace.budget_used as f64),
    }
}

fn tasks_for(cfg: &Config, kinds: &[TaskKind], params: &ScheduleParams) -> Result<Vec<Task>> {
    kinds
        .iter()
        .map(|&k| build_task(k, &cfg.task.template, params))
        .collect()
}

/// Every configured agent on every configured task, `seeds` trials each.
///
/// Trials run in parallel; results are merged in (agent, task, seed) order,
/// so the matrix depends only on the config and the master seed. A failing
/// trial is counted in its cell's `errors` and left out of the rates.
pub fn run_suite(cfg: &Config, master_seed: u64, seeds: usize) -> Result<ResultMatrix> {
    if seeds == 0 {
        return Err(Error::param("a suite needs at least one seed"));
    }
    cfg.validate()?;
    let tasks = tasks_for(cfg, &cfg.task.kinds, &cfg.schedule_params())?;
    let agents = &cfg.agent.kinds;
    let jobs: Vec<(usize, usize, usize)> = (0..agents.len())
        .flat_map(|a| (0..tasks.len()).flat_map(move |t| (0..seeds).map(move |s| (a, t, s))))
        .collect();
    let results: Vec<Result<TrialRecord>> = jobs
        .par_iter()
        .map(|&(a, t, s)| {
            let tc = TrialConfig::from_config(cfg, agents[a]);
            run_trial(&tc, &tasks[t], trial_seed(master_seed, a, t, s))
        })
        .collect();
    let cells = results
        .chunks(seeds)
        .zip(jobs.iter().step_by(seeds))
        .map(|(rs, &(a, t, _))| summarize(agents[a], tasks[t].kind, rs))
        .collect();
    Ok(ResultMatrix { seeds, cells })
}

/// Pass rate of `kind` on `task` over `seeds` trials with a given total
/// replay budget.
pub fn pass_rate_at_budget(
    cfg: &Config,
    kind: AgentKind,
    task: TaskKind,
    budget: usize,
    master_seed: u64,
    seeds: usize,
) -> Result<f64> {
    let mut params = cfg.schedule_params();
    params.replay_budget = budget;
    let t = build_task(task, &cfg.task.template, &params)?;
    let tc = TrialConfig::from_config(cfg, kind);
    let ti = TaskKind::ALL.iter().position(|&k| k == task).expect("listed");
    let ai = AgentKind::ALL.iter().position(|&k| k == kind).expect("listed");
    let passes = (0..seeds)
        .into_par_iter()
        .map(|s| run_trial(&tc, &t, trial_seed(master_seed, ai, ti, s)).map(|r| r.correct))
        .collect::<Result<Vec<bool>>>()?;
    Ok(passes.iter().filter(|&&c| c).count() as f64 / seeds.max(1) as f64)
}

/// Smallest total budget in `[lo, hi]` at which the pass rate reaches
/// `threshold`, by bisection (the rate is taken to be non-decreasing in the
/// budget). `None` if even `hi` falls short.
#[allow(clippy::too_many_arguments)]
pub fn min_budget_for(
    cfg: &Config,
    kind: AgentKind,
    task: TaskKind,
    threshold: f64,
    lo: usize,
    hi: usize,
    master_seed: u64,
    seeds: usize,
) -> Result<Option<usize>> {
    if lo > hi {
        return Err(Error::param(format!("empty budget range {lo}..={hi}")));
    }
    let ok = |b: usize| -> Result<bool> {
        Ok(pass_rate_at_budget(cfg, kind, task, b, master_seed, seeds)? >= threshold)
    };
    if !ok(hi)? {
        return Ok(None);
    }
    if ok(lo)? {
        return Ok(Some(lo));
    }
    // invariant: lo fails, hi passes
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// `trials` sr-dyna runs per configured task with total budgets drawn
/// uniformly from `0..=max_budget`.
pub fn correlation_study(cfg: &Config, master_seed: u64, trials: usize, max_budget: usize) -> Result<Vec<TrialRecord>> {
    let tc = TrialConfig::from_config(cfg, AgentKind::SrDyna);
    let kinds = &cfg.task.kinds;
    let jobs: Vec<(usize, usize)> = (0..kinds.len())
        .flat_map(|t| (0..trials).map(move |i| (t, i)))
        .collect();
    jobs.par_iter()
        .map(|&(t, i)| {
            let seed = trial_seed(master_seed, usize::MAX, t, i);
            let budget = Rng::seed_from_u64(splitmix64(seed)).gen_range(0..=max_budget);
            let mut params = cfg.schedule_params();
            params.replay_budget = budget;
            let task = build_task(kinds[t], &cfg.task.template, &params)?;
            run_trial(&tc, &task, seed)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub rho: f64,
    pub n: usize,
}

/// Spearman correlation, per task, between the number of replayed phase-1
/// transitions and test correctness.
pub fn replay_behavior_correlation(records: &[TrialRecord]) -> Result<BTreeMap<TaskKind, Correlation>> {
    let mut groups: BTreeMap<TaskKind, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let g = groups.entry(r.task_kind).or_default();
        g.0.push(r.phase1_replays as f64);
        g.1.push(f64::from(u8::from(r.correct)));
    }
    let mut out = BTreeMap::new();
    for (task, (replays, correct)) in groups {
        if replays.len() < MIN_CORRELATION_SAMPLE {
            return Err(Error::InsufficientSample {
                needed: MIN_CORRELATION_SAMPLE,
                got: replays.len(),
            });
        }
        let rho = spearman(&replays, &correct).map_err(|e| match e {
            Error::Degenerate(_) => Error::Degenerate(format!(
                "{task}: replay counts or outcomes do not vary"
            )),
            other => other,
        })?;
        out.insert(
            task,
            Correlation {
                rho,
                n: replays.len(),
            },
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    fn small() -> Config {
        let mut c = Config::default();
        c.task.phase1_episodes = 30;
        c.task.phase2_episodes = 10;
        c
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let mut seen = HashSet::new();
        for a in 0..5 {
            for t in 0..3 {
                for s in 0..50 {
                    assert!(seen.insert(trial_seed(7, a, t, s)));
                }
            }
        }
        assert_eq!(trial_seed(7, 1, 2, 3), trial_seed(7, 1, 2, 3));
        assert_ne!(trial_seed(7, 1, 2, 3), trial_seed(8, 1, 2, 3));
    }

    #[test]
    fn single_seed_gives_binary_cells() {
        let m = run_suite(&small(), 1, 1).unwrap();
        assert_eq!(m.cells.len(), 15);
        for c in &m.cells {
            assert!(c.pass_rate == 0.0 || c.pass_rate == 1.0);
            assert_eq!(c.stderr, 0.0);
            assert_eq!(c.trials + c.errors, 1);
        }
        assert!(run_suite(&small(), 1, 0).is_err());
    }

    #[test]
    fn suite_is_reproducible() {
        assert_eq!(run_suite(&small(), 5, 3).unwrap(), run_suite(&small(), 5, 3).unwrap());
    }

    #[test]
    fn correlation_needs_enough_varied_trials() {
        let mut c = small();
        c.task.kinds = vec![TaskKind::RewardReval];
        let few = correlation_study(&c, 0, 5, 100).unwrap();
        assert!(matches!(
            replay_behavior_correlation(&few),
            Err(Error::InsufficientSample { .. })
        ));
        let zero = correlation_study(&c, 0, 30, 0).unwrap();
        assert!(zero.iter().all(|r| r.replay_budget == 0));
        assert!(matches!(
            replay_behavior_correlation(&zero),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn bisection_bounds() {
        let c = Config::default();
        let r = min_budget_for(&c, AgentKind::SrTd, TaskKind::RewardReval, 0.9, 0, 8, 0, 10).unwrap();
        assert_eq!(r, Some(0));
        let r = min_budget_for(&c, AgentKind::SrTd, TaskKind::TransitionReval, 0.9, 0, 8, 0, 10).unwrap();
        assert_eq!(r, None);
        assert!(min_budget_for(&c, AgentKind::SrTd, TaskKind::RewardReval, 0.9, 5, 1, 0, 10).is_err());
    }
}
