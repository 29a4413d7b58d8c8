//! `srplan`: run revaluation trials and suites, and export SR field and
//! multiscale data as CSV.
//!
//! Exit status is 0 on success, 1 for usage, config or input-file errors and
//! 2 when a run fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use rand::{Rng as _, SeedableRng};

use srplan::agents::sr_analytic;
use srplan::harness::output::Value;
use srplan::harness::{build_task, emit_results, run_suite, run_trial, Config, Format, Table, TrialConfig};
use srplan::mdp::{parse_graph, Policy, TaskGraph};
use srplan::multiscale::{
    build_ensemble, default_scales, distance_to_goal, horizon_fit, path_representations, reconstruct_occupancy,
    Source,
};
use srplan::spectral::{eigenmaps, field_statistics, place_field, FieldMap, Geometry};
use srplan::{Error, Rng};

#[derive(Parser)]
#[command(name = "srplan", version, about = "Predictive-map planning experiments on small graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and write its record, transitions and replay log.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every configured agent on every configured task.
    Suite {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seeds: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: Format,
        /// Master seed; defaults to the config's `task.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Place fields and eigenmaps of the uniform-policy SR of a graph.
    Fields {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        out: PathBuf,
        /// `line`, `ring` or `grid:WxH`.
        #[arg(long, default_value = "line")]
        layout: Layout,
        /// Number of eigenmaps; defaults to min(n, 6).
        #[arg(long)]
        eigen: Option<usize>,
    },
    /// Distances, occupancy reconstruction and horizon profiles from an
    /// SR ensemble of a graph under the uniform policy.
    Multiscale {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        scales: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
        /// Supplies defaults from its `[multiscale]` section.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        max_lag: Option<usize>,
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        /// Length of the random walk used for horizon profiles.
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy)]
enum Layout {
    Line,
    Ring,
    Grid { width: usize, height: usize },
}

impl FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "line" => return Ok(Layout::Line),
            "ring" => return Ok(Layout::Ring),
            _ => {}
        }
        let dims = s
            .strip_prefix("grid:")
            .ok_or_else(|| format!("unknown layout `{s}` (line, ring or grid:WxH)"))?;
        let (w, h) = dims
            .split_once('x')
            .ok_or_else(|| format!("grid layout `{dims}` is not WxH"))?;
        let parse = |x: &str| x.parse::<usize>().map_err(|e| format!("grid size `{x}`: {e}"));
        Ok(Layout::Grid {
            width: parse(w)?,
            height: parse(h)?,
        })
    }
}

impl Layout {
    fn geometry(self, n: usize) -> Geometry {
        match self {
            Layout::Line => Geometry::line(n),
            Layout::Ring => Geometry::Ring { n },
            Layout::Grid { width, height } => Geometry::Grid { width, height },
        }
    }
}

enum Failure {
    Usage(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome = Result<(), Failure>;

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    let cfg = match path {
        Some(p) => Config::load(p).map_err(Failure::Usage)?,
        None => Config::default(),
    };
    cfg.validate().map_err(Failure::Usage)?;
    Ok(cfg)
}

fn load_graph(path: &Path) -> Result<TaskGraph, Failure> {
    let text = fs::read_to_string(path).map_err(|source| {
        Failure::Usage(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })?;
    parse_graph(&text).map_err(Failure::Usage)
}

fn simulate(config: Option<&Path>, seed: u64, out: &Path) -> Outcome {
    let cfg = load_config(config)?;
    let task = build_task(cfg.task.kind, &cfg.task.template, &cfg.schedule_params())?;
    let rec = run_trial(&TrialConfig::from_config(&cfg, cfg.agent.kind), &task, seed)?;

    let mut summary = Table::new(vec![
        "agent",
        "task",
        "seed",
        "test_choice",
        "optimal_choice",
        "correct",
        "decision_cost",
        "replay_budget",
        "replay_used",
        "phase1_replays",
    ]);
    summary.push(vec![
        rec.agent_kind.as_str().into(),
        rec.task_kind.as_str().into(),
        Value::Str(rec.seed.to_string()),
        rec.test_choice.into(),
        rec.optimal_choice.into(),
        Value::Bool(rec.correct),
        Value::Int(rec.decision_cost as i64),
        rec.replay_budget.into(),
        rec.replay_trace.budget_used.into(),
        rec.phase1_replays.into(),
    ]);
    emit_results(&summary, Format::Json, &out.join("trial.json"))?;

    let mut trans = Table::new(vec!["phase", "t", "s", "a", "s_next", "r", "done"]);
    for (phase, trace) in rec.phase_traces.iter().enumerate() {
        for tr in trace {
            trans.push(vec![
                (phase + 1).into(),
                Value::Int(tr.t as i64),
                tr.s.into(),
                tr.a.into(),
                tr.s_next.into(),
                tr.r.into(),
                Value::Bool(tr.done),
            ]);
        }
    }
    emit_results(&trans, Format::Csv, &out.join("transitions.csv"))?;

    let mut replay = Table::new(vec!["order", "t", "s", "a", "s_next", "priority"]);
    for (i, ev) in rec.replay_trace.replayed.iter().enumerate() {
        let tr = &ev.transition;
        replay.push(vec![
            i.into(),
            Value::Int(tr.t as i64),
            tr.s.into(),
            tr.a.into(),
            tr.s_next.into(),
            ev.priority.into(),
        ]);
    }
    emit_results(&replay, Format::Csv, &out.join("replay.csv"))?;
    Ok(())
}

fn suite(config: Option<&Path>, seeds: usize, out: &Path, format: Format, seed: Option<u64>) -> Outcome {
    let cfg = load_config(config)?;
    if seeds == 0 {
        return Err(Failure::Usage(Error::InvalidParameter("--seeds must be at least 1".into())));
    }
    let m = run_suite(&cfg, seed.unwrap_or(cfg.task.seed), seeds)?;
    for c in m.cells.iter().filter(|c| c.errors > 0) {
        eprintln!("warning: {} on {}: {} of {} trials failed", c.agent, c.task, c.errors, m.seeds);
    }
    emit_results(&m, format, &out.join(format!("results.{}", format.extension())))?;
    Ok(())
}

fn uniform_walk(g: &TaskGraph) -> Result<nalgebra::DMatrix<f64>, Error> {
    g.transition_matrix_under_policy(&Policy::uniform(g.n_states(), g.n_actions()))
}

fn field_table(f: &FieldMap, geo: &Geometry) -> Table {
    let mut t = Table::new(vec!["state", "x", "y", "value"]);
    for (s, &v) in f.values().iter().enumerate() {
        let (x, y) = geo.coords(s);
        t.push(vec![s.into(), x.into(), y.into(), v.into()]);
    }
    t
}

fn fields(graph: &Path, gamma: f64, out: &Path, layout: Layout, eigen: Option<usize>) -> Outcome {
    let g = load_graph(graph)?;
    let n = g.n_states();
    let geo = layout.geometry(n);
    if geo.len() != n {
        return Err(Failure::Usage(Error::DimensionMismatch {
            expected: n,
            got: geo.len(),
        }));
    }
    let m = sr_analytic(&uniform_walk(&g)?, gamma).map_err(|e| match e {
        Error::InvalidParameter(_) => Failure::Usage(e),
        other => Failure::Runtime(other),
    })?;
    let direction: Vec<f64> = vec![1.0; geo.dims()];
    let direction = (geo.dims() == 1).then_some(direction.as_slice());

    let mut stats = Table::new(vec!["state", "com_shift", "elongation_ratio"]);
    for s in 0..n {
        let f = place_field(&m, s)?.with_geometry(geo.clone())?;
        emit_results(&field_table(&f, &geo), Format::Csv, &out.join(format!("field_{s}.csv")))?;
        let row = match field_statistics(&f, direction) {
            Ok(st) => vec![s.into(), st.com_shift.into(), st.elongation_ratio.into()],
            Err(_) => vec![s.into(), Value::Missing, Value::Missing],
        };
        stats.push(row);
    }
    emit_results(&stats, Format::Csv, &out.join("field_stats.csv"))?;

    let k = eigen.unwrap_or(n.min(6));
    let es = eigenmaps(&m, k).map_err(|e| match e {
        Error::InvalidParameter(_) => Failure::Usage(e),
        other => Failure::Runtime(other),
    })?;
    if !es.symmetric_input {
        eprintln!("warning: SR is not symmetric; eigenmaps use its symmetric part");
    }
    let mut values = Table::new(vec!["k", "eigenvalue"]);
    for (i, (lambda, v)) in es.values.iter().zip(&es.vectors).enumerate() {
        values.push(vec![i.into(), (*lambda).into()]);
        let f = FieldMap::new(v.clone(), Some(geo.clone()))?;
        emit_results(&field_table(&f, &geo), Format::Csv, &out.join(format!("eigen_{i}.csv")))?;
    }
    emit_results(&values, Format::Csv, &out.join("eigenvalues.csv"))?;
    Ok(())
}

/// Uniform random walk of `steps` states, restarting after terminals.
fn random_path(g: &TaskGraph, steps: usize, seed: u64) -> Result<Vec<usize>, Error> {
    let mut rng = Rng::seed_from_u64(seed);
    let starts: Vec<usize> = if g.start_states().is_empty() {
        vec![0]
    } else {
        g.start_states().to_vec()
    };
    let mut path = Vec::with_capacity(steps);
    let mut s = starts[rng.gen_range(0..starts.len())];
    for t in 0..steps {
        path.push(s);
        s = if g.is_terminal(s) {
            starts[rng.gen_range(0..starts.len())]
        } else {
            let a = rng.gen_range(0..g.n_actions());
            g.step(s, a, t as u64, &mut rng)?.s_next
        };
    }
    Ok(path)
}

#[allow(clippy::too_many_arguments)]
fn multiscale(
    graph: &Path,
    scales: Option<Vec<f64>>,
    out: &Path,
    config: Option<&Path>,
    max_lag: Option<usize>,
    grid: Option<Vec<f64>>,
    steps: usize,
    seed: u64,
) -> Outcome {
    let ms = match config {
        Some(_) => load_config(config)?.multiscale,
        None => Config::default().multiscale,
    };
    let g = load_graph(graph)?;
    let scales = scales.unwrap_or(if config.is_some() { ms.scales } else { default_scales() });
    let max_lag = max_lag.unwrap_or(ms.max_lag);
    let grid = grid.unwrap_or(ms.grid);
    let n = g.n_states();
    let ens = build_ensemble(&uniform_walk(&g)?, &scales, Source::Analytic).map_err(|e| match e {
        Error::InvalidParameter(_) => Failure::Usage(e),
        other => Failure::Runtime(other),
    })?;

    let mut dist = Table::new(vec!["state", "goal", "distance"]);
    for s in 0..n {
        for goal in 0..n {
            dist.push(vec![s.into(), goal.into(), distance_to_goal(&ens, s, goal)?.into()]);
        }
    }
    emit_results(&dist, Format::Csv, &out.join("distance.csv"))?;

    let mut summary = Table::new(vec!["t", "condition", "clamped"]);
    for t in 0..ens.len() {
        let occ = reconstruct_occupancy(&ens, t)?;
        let mut tab = Table::new(vec!["state", "next", "p"]);
        for s in 0..n {
            for s2 in 0..n {
                tab.push(vec![s.into(), s2.into(), occ.p[(s, s2)].into()]);
            }
        }
        emit_results(&tab, Format::Csv, &out.join(format!("occupancy_t{t}.csv")))?;
        summary.push(vec![t.into(), occ.condition.into(), occ.clamped.into()]);
    }
    emit_results(&summary, Format::Csv, &out.join("occupancy.csv"))?;

    let path = random_path(&g, steps, seed)?;
    let mut best = Table::new(vec!["scale", "best_gamma"]);
    for (i, m) in ens.mats().iter().enumerate() {
        let (reps, codes) = path_representations(m, &path)?;
        let prof = horizon_fit(&reps, Some(&codes), &grid, max_lag)?;
        emit_results(&prof, Format::Csv, &out.join(format!("horizon_{i}.csv")))?;
        best.push(vec![m.gamma().into(), prof.best.into()]);
    }
    emit_results(&best, Format::Csv, &out.join("horizon.csv"))?;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Simulate { config, seed, out } => simulate(config.as_deref(), seed, &out),
        Command::Suite {
            config,
            seeds,
            out,
            format,
            seed,
        } => suite(config.as_deref(), seeds, &out, format, seed),
        Command::Fields {
            graph,
            gamma,
            out,
            layout,
            eigen,
        } => fields(&graph, gamma, &out, layout, eigen),
        Command::Multiscale {
            graph,
            scales,
            out,
            config,
            max_lag,
            grid,
            steps,
            seed,
        } => multiscale(&graph, scales, &out, config.as_deref(), max_lag, grid, steps, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

