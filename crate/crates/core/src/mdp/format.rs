//! Line-oriented graph files.
//!
//! ```text
//! states=3 actions=1
//! T 0 0 1 1.0
//! R 1 5.0
//! TERM 2
//! START 0
//! ```
//!
//! Blank lines and `#` comments are ignored. Anything else is an error.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::TaskGraph;
use crate::{Error, Result};

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| perr(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| perr(line, format!("bad {what} `{tok}`")))
}

pub fn parse_graph(text: &str) -> Result<TaskGraph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or_else(|| perr(1, "empty graph file"))?;
    let mut n_states = None;
    let mut n_actions = None;
    for tok in header.split_whitespace() {
        match tok.split_once('=') {
            Some(("states", v)) => n_states = Some(num::<usize>(hline, Some(v), "state count")?),
            Some(("actions", v)) => {
                n_actions = Some(num::<usize>(hline, Some(v), "action count")?)
            }
            _ => return Err(perr(hline, format!("unexpected header token `{tok}`"))),
        }
    }
    let n = n_states.ok_or_else(|| perr(hline, "header lacks states="))?;
    let na = n_actions.ok_or_else(|| perr(hline, "header lacks actions="))?;
    if n == 0 || na == 0 {
        return Err(perr(hline, "states and actions must be positive"));
    }

    let mut trans = vec![DMatrix::zeros(n, n); na];
    let mut set = vec![vec![false; n * n]; na];
    let mut reward = vec![0.0; n];
    let mut terminal = vec![false; n];
    let mut starts = Vec::new();

    let state = |line: usize, tok: Option<&str>| -> Result<usize> {
        let s: usize = num(line, tok, "state")?;
        if s >= n {
            return Err(perr(line, format!("state {s} out of range")));
        }
        Ok(s)
    };

    for (ln, line) in lines {
        let mut toks = line.split_whitespace();
        let kw = toks.next().unwrap_or_default();
        match kw {
            "T" => {
                let s = state(ln, toks.next())?;
                let a: usize = num(ln, toks.next(), "action")?;
                if a >= na {
                    return Err(perr(ln, format!("action {a} out of range")));
                }
                let s2 = state(ln, toks.next())?;
                let p: f64 = num(ln, toks.next(), "probability")?;
                if set[a][s * n + s2] {
                    return Err(perr(ln, format!("duplicate entry T {s} {a} {s2}")));
                }
                set[a][s * n + s2] = true;
                trans[a][(s, s2)] = p;
            }
            "R" => {
                let s = state(ln, toks.next())?;
                reward[s] = num(ln, toks.next(), "reward")?;
            }
            "TERM" => terminal[state(ln, toks.next())?] = true,
            "START" => starts.push(state(ln, toks.next())?),
            other => return Err(perr(ln, format!("unknown keyword `{other}`"))),
        }
        if let Some(extra) = toks.next() {
            return Err(perr(ln, format!("trailing token `{extra}`")));
        }
    }
    TaskGraph::new(trans, reward, terminal, starts)
}

/// Serialises a graph; zero entries and zero rewards are omitted.
pub fn write_graph(g: &TaskGraph) -> String {
    let mut out = String::new();
    let n = g.n_states();
    let _ = writeln!(out, "states={} actions={}", n, g.n_actions());
    for a in 0..g.n_actions() {
        for s in 0..n {
            for s2 in 0..n {
                let p = g.prob(s, a, s2);
                if p != 0.0 {
                    let _ = writeln!(out, "T {s} {a} {s2} {p}");
                }
            }
        }
    }
    for (s, r) in g.reward().iter().enumerate() {
        if *r != 0.0 {
            let _ = writeln!(out, "R {s} {r}");
        }
    }
    for s in (0..n).filter(|&s| g.is_terminal(s)) {
        let _ = writeln!(out, "TERM {s}");
    }
    for s in g.start_states() {
        let _ = writeln!(out, "START {s}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{make_graph_env, two_stream, Template};

    #[test]
    fn parses_small_graph() {
        let g = parse_graph(
            "# chain\nstates=3 actions=1\nT 0 0 1 1.0\nT 1 0 2 1\nR 2 5.5\nTERM 2\nSTART 0\n",
        )
        .unwrap();
        assert_eq!(g.n_states(), 3);
        assert_eq!(g.reward()[2], 5.5);
        assert!(g.is_terminal(2));
        assert_eq!(g.start_states(), &[0]);
    }

    #[test]
    fn round_trips_templates() {
        for g in [
            two_stream(10.0, 1.0).unwrap(),
            make_graph_env(&Template::Grid2d {
                width: 3,
                height: 2,
                rewards: None,
            })
            .unwrap(),
        ] {
            assert_eq!(parse_graph(&write_graph(&g)).unwrap(), g);
        }
    }

    #[test]
    fn strict_parsing() {
        let bad = [
            "",
            "states=2\nSTART 0",
            "states=2 actions=1 extra=1\n",
            "states=2 actions=1\nFOO 1\n",
            "states=2 actions=1\nT 0 0 5 1.0\n",
            "states=2 actions=1\nT 0 0 1 1.0\nT 0 0 1 1.0\nTERM 1\nSTART 0\n",
            "states=2 actions=1\nR 0 1 2\n",
            "states=2 actions=1\nT 0 0 1 0.5\nTERM 1\nSTART 0\n",
        ];
        for text in bad {
            assert!(parse_graph(text).is_err(), "accepted {text:?}");
        }
    }
}
