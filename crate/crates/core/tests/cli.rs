use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn srplan(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srplan"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

const RING: &str = "states=6 actions=2\n\
    T 0 0 1 1\nT 1 0 2 1\nT 2 0 3 1\nT 3 0 4 1\nT 4 0 5 1\nT 5 0 0 1\n\
    T 0 1 5 1\nT 1 1 0 1\nT 2 1 1 1\nT 3 1 2 1\nT 4 1 3 1\nT 5 1 4 1\n\
    START 0\n";

const CHAIN: &str = "states=5 actions=1\nT 0 0 1 1\nT 1 0 2 1\nT 2 0 3 1\nT 3 0 4 1\nTERM 4\nR 4 1\nSTART 0\n";

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&srplan(&["--help"], dir.path())), 0);
    assert_eq!(code(&srplan(&["--version"], dir.path())), 0);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&srplan(&[], p)), 1);
    assert_eq!(code(&srplan(&["frobnicate"], p)), 1);
    assert_eq!(code(&srplan(&["suite", "--seeds", "2"], p)), 1);
    assert_eq!(code(&srplan(&["suite", "--seeds", "2", "--out", "o", "--format", "xml"], p)), 1);
    assert_eq!(code(&srplan(&["suite", "--seeds", "0", "--out", "o"], p)), 1);
    assert_eq!(code(&srplan(&["fields", "--graph", "missing.g", "--gamma", "0.5", "--out", "o"], p)), 1);

    fs::write(p.join("bad.ini"), "[task]\nphase1_episodes = 10\nwobble = 3\n").unwrap();
    let o = srplan(&["simulate", "--config", "bad.ini", "--seed", "1", "--out", "o"], p);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("wobble"));

    fs::write(p.join("ring.g"), RING).unwrap();
    let o = srplan(&["fields", "--graph", "ring.g", "--gamma", "0.5", "--out", "o", "--layout", "grid:4x4"], p);
    assert_eq!(code(&o), 1);
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("blocker"), "").unwrap();
    let o = srplan(&["suite", "--seeds", "1", "--out", "blocker/sub"], p);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_writes_trial_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("c.ini"), "[task]\nkind = reward-reval\nphase1_episodes = 30\nphase2_episodes = 10\n").unwrap();
    let o = srplan(&["simulate", "--config", "c.ini", "--seed", "4", "--out", "sim"], p);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rec: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("sim/trial.json")).unwrap()).unwrap();
    assert_eq!(rec[0]["task"], "reward-reval");
    assert_eq!(rec[0]["agent"], "sr-dyna");
    assert_eq!(header(&p.join("sim/transitions.csv")), "phase,t,s,a,s_next,r,done");
    assert_eq!(header(&p.join("sim/replay.csv")), "order,t,s,a,s_next,priority");
    let rows = fs::read_to_string(p.join("sim/transitions.csv")).unwrap();
    // phase-2 episodes never leave from a start state
    for line in rows.lines().skip(1).filter(|l| l.starts_with("2,")) {
        let s: usize = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(s >= 2, "{line}");
    }
}

#[test]
fn suite_csv_has_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("c.ini"), "[task]\nphase1_episodes = 30\nphase2_episodes = 10\nkinds = [control]\n").unwrap();
    let o = srplan(&["suite", "--config", "c.ini", "--seeds", "2", "--out", "s", "--seed", "9"], p);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(p.join("s/results.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "agent,task,pass_rate,stderr,mean_cost,mean_replay");
    assert_eq!(lines.count(), 5);
}

#[test]
fn fields_writes_maps_and_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("ring.g"), RING).unwrap();
    let o = srplan(&["fields", "--graph", "ring.g", "--gamma", "0.8", "--out", "f", "--layout", "ring"], p);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for s in 0..6 {
        assert_eq!(header(&p.join(format!("f/field_{s}.csv"))), "state,x,y,value");
    }
    assert_eq!(header(&p.join("f/eigen_0.csv")), "state,x,y,value");
    assert_eq!(header(&p.join("f/field_stats.csv")), "state,com_shift,elongation_ratio");
    let eig = fs::read_to_string(p.join("f/eigenvalues.csv")).unwrap();
    // top eigenvalue of a ring walk's SR is 1 / (1 - gamma)
    assert_eq!(eig.lines().nth(1).unwrap(), "0,5");
}

#[test]
fn multiscale_writes_distances_and_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("chain.g"), CHAIN).unwrap();
    let o = srplan(
        &[
            "multiscale", "--graph", "chain.g", "--scales", "0.3,0.5,0.7,0.9", "--out", "m", "--max-lag", "2",
            "--steps", "200",
        ],
        p,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dist = fs::read_to_string(p.join("m/distance.csv")).unwrap();
    assert!(dist.lines().any(|l| l == "0,4,4"));
    assert!(dist.lines().any(|l| l == "4,0,"));
    for t in 0..4 {
        assert!(p.join(format!("m/occupancy_t{t}.csv")).exists());
    }
    assert_eq!(header(&p.join("m/horizon_0.csv")), "gamma,similarity");
    assert_eq!(header(&p.join("m/horizon.csv")), "scale,best_gamma");

    let o = srplan(&["multiscale", "--graph", "chain.g", "--scales", "0.5,0.4", "--out", "m2"], p);
    assert_eq!(code(&o), 1);
}
