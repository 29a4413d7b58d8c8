use nalgebra::DMatrix;

use super::TaskGraph;
use crate::{Error, Result};

/// Built-in task families.
#[derive(Debug, Clone, PartialEq)]
pub enum Template {
    /// Two parallel three-state streams ending in rewarded terminals.
    TwoStream { reward_a: f64, reward_b: f64 },
    /// Root choice between two mid states, each choosing between two leaves.
    Tree { leaf_rewards: Vec<f64> },
    /// Track of `n` states. Directed tracks move right with one action and
    /// end in a terminal; bidirectional tracks have left/right actions and
    /// reflecting ends.
    Line {
        n: usize,
        bidirectional: bool,
        rewards: Option<Vec<f64>>,
    },
    /// Cycle of `n` states with actions right (0) and left (1).
    Ring { n: usize, rewards: Option<Vec<f64>> },
    /// Open field with von Neumann moves up/right/down/left; walls reflect.
    Grid2d {
        width: usize,
        height: usize,
        rewards: Option<Vec<f64>>,
    },
}

impl Template {
    /// Looks up a template by its config/CLI name with default parameters.
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "two-stream" => Template::TwoStream {
                reward_a: 10.0,
                reward_b: 1.0,
            },
            "tree" => Template::Tree {
                leaf_rewards: tree::DEFAULT_LEAF_REWARDS.to_vec(),
            },
            "line" => Template::Line {
                n: 10,
                bidirectional: false,
                rewards: None,
            },
            "ring" => Template::Ring { n: 8, rewards: None },
            "grid2d" => Template::Grid2d {
                width: 5,
                height: 5,
                rewards: None,
            },
            other => return Err(Error::UnknownTemplate(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Template::TwoStream { .. } => "two-stream",
            Template::Tree { .. } => "tree",
            Template::Line { .. } => "line",
            Template::Ring { .. } => "ring",
            Template::Grid2d { .. } => "grid2d",
        }
    }
}

pub fn make_graph_env(template: &Template) -> Result<TaskGraph> {
    match template {
        Template::TwoStream { reward_a, reward_b } => two_stream(*reward_a, *reward_b),
        Template::Tree { leaf_rewards } => tree(leaf_rewards),
        Template::Line {
            n,
            bidirectional,
            rewards,
        } => line(*n, *bidirectional, rewards.as_deref()),
        Template::Ring { n, rewards } => ring(*n, rewards.as_deref()),
        Template::Grid2d {
            width,
            height,
            rewards,
        } => grid2d(*width, *height, rewards.as_deref()),
    }
}

/// State indices of the two-stream task. Paper-style labels 1..6 map to
/// indices 0..5.
pub mod two_stream {
    pub const START_1: usize = 0;
    pub const START_2: usize = 1;
    pub const MID_3: usize = 2;
    pub const MID_4: usize = 3;
    pub const END_5: usize = 4;
    pub const END_6: usize = 5;
    pub const N_STATES: usize = 6;
}

/// `1 -> 3 -> 5` and `2 -> 4 -> 6`, one action, rewards at the stream ends.
pub fn two_stream(reward_a: f64, reward_b: f64) -> Result<TaskGraph> {
    use two_stream::*;
    let mut m = DMatrix::zeros(N_STATES, N_STATES);
    m[(START_1, MID_3)] = 1.0;
    m[(MID_3, END_5)] = 1.0;
    m[(START_2, MID_4)] = 1.0;
    m[(MID_4, END_6)] = 1.0;
    let mut reward = vec![0.0; N_STATES];
    reward[END_5] = reward_a;
    reward[END_6] = reward_b;
    let mut terminal = vec![false; N_STATES];
    terminal[END_5] = true;
    terminal[END_6] = true;
    TaskGraph::new(vec![m], reward, terminal, vec![START_1, START_2])
}

/// State indices of the tree task.
pub mod tree {
    pub const ROOT: usize = 0;
    pub const MID_A: usize = 1;
    pub const MID_B: usize = 2;
    /// Leaves under `MID_A` are 3 and 4, under `MID_B` 5 and 6.
    pub const LEAVES: [usize; 4] = [3, 4, 5, 6];
    pub const N_STATES: usize = 7;
    pub const DEFAULT_LEAF_REWARDS: [f64; 4] = [10.0, 0.0, 1.0, 0.0];
}

/// Root picks a mid state (action 0 or 1), each mid state picks a leaf.
pub fn tree(leaf_rewards: &[f64]) -> Result<TaskGraph> {
    use tree::*;
    if leaf_rewards.len() != LEAVES.len() {
        return Err(Error::DimensionMismatch {
            expected: LEAVES.len(),
            got: leaf_rewards.len(),
        });
    }
    let mut a0 = DMatrix::zeros(N_STATES, N_STATES);
    let mut a1 = DMatrix::zeros(N_STATES, N_STATES);
    a0[(ROOT, MID_A)] = 1.0;
    a1[(ROOT, MID_B)] = 1.0;
    a0[(MID_A, LEAVES[0])] = 1.0;
    a1[(MID_A, LEAVES[1])] = 1.0;
    a0[(MID_B, LEAVES[2])] = 1.0;
    a1[(MID_B, LEAVES[3])] = 1.0;
    let mut reward = vec![0.0; N_STATES];
    let mut terminal = vec![false; N_STATES];
    for (&leaf, &r) in LEAVES.iter().zip(leaf_rewards) {
        reward[leaf] = r;
        terminal[leaf] = true;
    }
    TaskGraph::new(vec![a0, a1], reward, terminal, vec![ROOT])
}

fn rewards_or_zero(n: usize, rewards: Option<&[f64]>) -> Result<Vec<f64>> {
    match rewards {
        None => Ok(vec![0.0; n]),
        Some(r) if r.len() == n => Ok(r.to_vec()),
        Some(r) => Err(Error::DimensionMismatch {
            expected: n,
            got: r.len(),
        }),
    }
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::param(format!("{name} must be positive")));
    }
    Ok(())
}

fn line(n: usize, bidirectional: bool, rewards: Option<&[f64]>) -> Result<TaskGraph> {
    positive("n", n)?;
    let reward = rewards_or_zero(n, rewards)?;
    if bidirectional {
        let mut right = DMatrix::zeros(n, n);
        let mut left = DMatrix::zeros(n, n);
        for s in 0..n {
            right[(s, (s + 1).min(n - 1))] = 1.0;
            left[(s, s.saturating_sub(1))] = 1.0;
        }
        TaskGraph::new(vec![right, left], reward, vec![false; n], vec![0])
    } else {
        let mut right = DMatrix::zeros(n, n);
        for s in 0..n - 1 {
            right[(s, s + 1)] = 1.0;
        }
        let mut terminal = vec![false; n];
        terminal[n - 1] = true;
        TaskGraph::new(vec![right], reward, terminal, vec![0])
    }
}

fn ring(n: usize, rewards: Option<&[f64]>) -> Result<TaskGraph> {
    positive("n", n)?;
    let reward = rewards_or_zero(n, rewards)?;
    let mut right = DMatrix::zeros(n, n);
    let mut left = DMatrix::zeros(n, n);
    for s in 0..n {
        right[(s, (s + 1) % n)] = 1.0;
        left[(s, (s + n - 1) % n)] = 1.0;
    }
    TaskGraph::new(vec![right, left], reward, vec![false; n], vec![0])
}

/// Grid state index for column `x`, row `y`.
pub fn grid_index(width: usize, x: usize, y: usize) -> usize {
    y * width + x
}

fn grid2d(width: usize, height: usize, rewards: Option<&[f64]>) -> Result<TaskGraph> {
    positive("width", width)?;
    positive("height", height)?;
    let n = width * height;
    let reward = rewards_or_zero(n, rewards)?;
    // up, right, down, left
    let moves: [(isize, isize); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];
    let mut trans = Vec::with_capacity(4);
    for (dx, dy) in moves {
        let mut m = DMatrix::zeros(n, n);
        for y in 0..height {
            for x in 0..width {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                let inside = nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height;
                let dest = if inside {
                    grid_index(width, nx as usize, ny as usize)
                } else {
                    grid_index(width, x, y)
                };
                m[(grid_index(width, x, y), dest)] = 1.0;
            }
        }
        trans.push(m);
    }
    TaskGraph::new(trans, reward, vec![false; n], vec![0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Policy;

    #[test]
    fn two_stream_structure() {
        use two_stream::*;
        let g = two_stream(10.0, 1.0).unwrap();
        let row: Vec<f64> = g.trans(0).row(START_1).iter().copied().collect();
        let mut want = vec![0.0; N_STATES];
        want[MID_3] = 1.0;
        assert_eq!(row, want);
        assert_eq!(g.reward()[END_5], 10.0);
        assert_eq!(g.reward()[END_6], 1.0);
        assert_eq!(g.start_states(), &[START_1, START_2]);
        // each stream reaches exactly one rewarded terminal
        for (start, end) in [(START_1, END_5), (START_2, END_6)] {
            let reach = g.reachable_from(start).unwrap();
            let rewarded: Vec<usize> = (0..N_STATES)
                .filter(|&s| reach[s] && g.is_terminal(s) && g.reward()[s] != 0.0)
                .collect();
            assert_eq!(rewarded, vec![end]);
        }
    }

    #[test]
    fn line_of_one_is_terminal() {
        let g = make_graph_env(&Template::Line {
            n: 1,
            bidirectional: false,
            rewards: None,
        })
        .unwrap();
        assert_eq!(g.n_states(), 1);
        assert!(g.is_terminal(0));
        assert_eq!(g.trans(0).sum(), 0.0);
    }

    #[test]
    fn ring_uniform_rows_have_two_halves() {
        let g = make_graph_env(&Template::Ring { n: 4, rewards: None }).unwrap();
        let t = g.transition_matrix_under_policy(&Policy::uniform(4, 2)).unwrap();
        for s in 0..4 {
            let halves = t.row(s).iter().filter(|&&p| p == 0.5).count();
            assert_eq!(halves, 2);
        }
    }

    #[test]
    fn grid_walls_reflect() {
        let g = make_graph_env(&Template::Grid2d {
            width: 3,
            height: 3,
            rewards: None,
        })
        .unwrap();
        // corner (0,0): up and left bounce back
        assert_eq!(g.prob(0, 0, 0), 1.0);
        assert_eq!(g.prob(0, 3, 0), 1.0);
        assert_eq!(g.prob(0, 1, 1), 1.0);
        assert_eq!(g.prob(0, 2, 3), 1.0);
        let center = grid_index(3, 1, 1);
        for a in 0..4 {
            assert_eq!(g.prob(center, a, center), 0.0);
        }
    }

    #[test]
    fn tree_structure() {
        use tree::*;
        let g = tree(&DEFAULT_LEAF_REWARDS).unwrap();
        assert_eq!(g.n_actions(), 2);
        assert_eq!(g.prob(ROOT, 0, MID_A), 1.0);
        assert_eq!(g.prob(ROOT, 1, MID_B), 1.0);
        assert!(LEAVES.iter().all(|&l| g.is_terminal(l)));
        assert_eq!(g.reward()[LEAVES[0]], 10.0);
    }

    #[test]
    fn template_errors() {
        assert!(matches!(Template::by_name("maze"), Err(Error::UnknownTemplate(_))));
        assert!(make_graph_env(&Template::Ring { n: 0, rewards: None }).is_err());
        assert!(matches!(
            make_graph_env(&Template::Ring {
                n: 3,
                rewards: Some(vec![1.0])
            }),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(tree(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
