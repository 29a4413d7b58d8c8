//! Place fields, eigenmaps and field-shape statistics derived from an SR.
//!
//! Column `s` of `M` says how strongly every state predicts a future visit to
//! `s`, which is the model's place field for `s`. Eigenvectors of `M` are
//! smooth, often periodic maps over the state space.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::agents::SrMatrix;
use crate::{Error, Result};

/// Symmetry test tolerance, relative to the largest entry.
const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues closer than this (relative) are considered repeated.
const DEGENERACY_TOL: f64 = 1e-8;
const ZERO_TOL: f64 = 1e-12;

/// Spatial layout of the states.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// One coordinate per state on an open track.
    Line(Vec<f64>),
    /// `n` states on a circle, state `i` at position `i`.
    Ring { n: usize },
    /// Row-major grid, state `y * width + x` at `(x, y)`.
    Grid { width: usize, height: usize },
}

impl Geometry {
    pub fn line(n: usize) -> Self {
        Geometry::Line((0..n).map(|i| i as f64).collect())
    }

    pub fn len(&self) -> usize {
        match self {
            Geometry::Line(c) => c.len(),
            Geometry::Ring { n } => *n,
            Geometry::Grid { width, height } => width * height,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> usize {
        match self {
            Geometry::Grid { .. } => 2,
            _ => 1,
        }
    }

    /// `(x, y)` of state `s`; `y` is zero in one dimension.
    pub fn coords(&self, s: usize) -> (f64, f64) {
        match self {
            Geometry::Line(c) => (c[s], 0.0),
            Geometry::Ring { .. } => (s as f64, 0.0),
            Geometry::Grid { width, .. } => ((s % width) as f64, (s / width) as f64),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Geometry::Line(c) = self {
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::param("non-finite coordinate"));
            }
            let mut sorted = c.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::param("two states share a coordinate"));
            }
        }
        Ok(())
    }

    /// Displacement from `from` to `to`; on a ring the shorter way round,
    /// with the antipode left ambiguous (`None`).
    fn displacement(&self, from: usize, to: usize) -> Option<(f64, f64)> {
        match self {
            Geometry::Ring { n } => {
                let n = *n as i64;
                let d = (to as i64 - from as i64).rem_euclid(n);
                if 2 * d == n {
                    None
                } else if 2 * d < n {
                    Some((d as f64, 0.0))
                } else {
                    Some(((d - n) as f64, 0.0))
                }
            }
            _ => {
                let (a, b) = (self.coords(from), self.coords(to));
                Some((b.0 - a.0, b.1 - a.1))
            }
        }
    }
}

/// Activation of one unit over all states.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    values: DVector<f64>,
    geometry: Option<Geometry>,
}

impl FieldMap {
    pub fn new(values: DVector<f64>, geometry: Option<Geometry>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("field values must be finite"));
        }
        let f = FieldMap {
            values,
            geometry: None,
        };
        match geometry {
            Some(g) => f.with_geometry(g),
            None => Ok(f),
        }
    }

    pub fn with_geometry(mut self, geometry: Geometry) -> Result<Self> {
        geometry.validate()?;
        if geometry.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: geometry.len(),
            });
        }
        self.geometry = Some(geometry);
        Ok(self)
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn geometry(&self) -> Option<&Geometry> {
        self.geometry.as_ref()
    }
}

/// Column `s` of `M`: how much each state predicts visiting `s`.
pub fn place_field(m: &SrMatrix, s: usize) -> Result<FieldMap> {
    if s >= m.n() {
        return Err(Error::index("state", s, m.n()));
    }
    FieldMap::new(m.column(s), None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSet {
    /// Sorted by decreasing magnitude.
    pub values: Vec<f64>,
    /// Unit norm, first clearly non-zero entry positive.
    pub vectors: Vec<DVector<f64>>,
    /// False when `M` was not symmetric and its symmetric part was used.
    pub symmetric_input: bool,
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= SYMMETRY_TOL * scale
}

/// Top-`k` eigenpairs of `M`.
///
/// A non-symmetric `M` is replaced by `(M + M^T) / 2`, which keeps the
/// decomposition real and orthogonal.
pub fn eigenmaps(m: &SrMatrix, k: usize) -> Result<EigenSet> {
    let n = m.n();
    if k == 0 || k > n {
        return Err(Error::param(format!("eigenpair count {k} outside 1..={n}")));
    }
    let symmetric_input = is_symmetric(m.matrix());
    let a = if symmetric_input {
        m.matrix().clone()
    } else {
        (m.matrix() + m.matrix().transpose()) * 0.5
    };
    let max_iter = 1000 * n.max(1);
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, max_iter).ok_or(Error::NotConverged {
        iters: max_iter,
        residual: f64::NAN,
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .abs()
            .total_cmp(&eig.eigenvalues[i].abs())
            .then(eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]))
    });
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let mut v = eig.eigenvectors.column(i).clone_owned();
        v /= v.norm();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-9) {
            if *first < 0.0 {
                v = -v;
            }
        }
        values.push(eig.eigenvalues[i]);
        vectors.push(v);
    }
    Ok(EigenSet {
        values,
        vectors,
        symmetric_input,
    })
}

/// Autocorrelation peaks below this height are ignored.
const PEAK_MIN: f64 = 0.1;

/// Number of local maxima, at height `PEAK_MIN` or more, of the normalized
/// autocorrelation of `values` over non-zero shifts. Periodic maps score
/// higher than single bumps.
///
/// A descriptive score only: it does not decide whether a map is grid-like.
pub fn periodicity_score(values: &DVector<f64>, geometry: &Geometry) -> Result<usize> {
    let n = values.len();
    if geometry.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: geometry.len(),
        });
    }
    let mean = values.mean();
    let dev: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let var = dev.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if var <= ZERO_TOL {
        return Err(Error::Degenerate("constant map has no autocorrelation".into()));
    }
    let (w, h, periodic) = match geometry {
        Geometry::Line(_) => (n as i64, 1, false),
        Geometry::Ring { n } => (*n as i64, 1, true),
        Geometry::Grid { width, height } => (*width as i64, *height as i64, false),
    };
    // mean product over the overlapping region, relative to the variance
    let ac = |dx: i64, dy: i64| {
        let mut sum = 0.0;
        let mut count = 0usize;
        for y in 0..h {
            for x in 0..w {
                let (mut x2, y2) = (x + dx, y + dy);
                if periodic {
                    x2 = x2.rem_euclid(w);
                }
                if (0..w).contains(&x2) && (0..h).contains(&y2) {
                    sum += dev[(y * w + x) as usize] * dev[(y2 * w + x2) as usize];
                    count += 1;
                }
            }
        }
        sum / count as f64 / var
    };
    let in_range = |dx: i64, dy: i64| {
        let x_ok = if periodic { dx.abs() <= w / 2 } else { dx.abs() < w };
        x_ok && dy.abs() < h
    };
    let mut peaks = 0;
    for dy in -(h - 1)..h {
        for dx in -(w - 1)..w {
            if (dx, dy) == (0, 0) || !in_range(dx, dy) {
                continue;
            }
            let c = ac(dx, dy);
            if c < PEAK_MIN {
                continue;
            }
            let is_peak = (-1..=1)
                .flat_map(|ey| (-1..=1).map(move |ex| (ex, ey)))
                .filter(|&(ex, ey)| (ex, ey) != (0, 0) && in_range(dx + ex, dy + ey))
                .all(|(ex, ey)| ac(dx + ex, dy + ey) < c);
            if is_peak {
                peaks += 1;
            }
        }
    }
    Ok(peaks)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldStats {
    /// Centre of mass minus peak position. Signed along the travel direction
    /// when one is given; in 2D without a direction, the shift's length.
    pub com_shift: f64,
    /// 2D only: spread along the nearest wall over spread across it.
    pub elongation_ratio: Option<f64>,
}

/// Shape statistics over the states at or above half the field's maximum.
///
/// `direction` has one component per geometry dimension.
pub fn field_statistics(f: &FieldMap, direction: Option<&[f64]>) -> Result<FieldStats> {
    let geo = f
        .geometry()
        .ok_or_else(|| Error::param("field statistics need a geometry"))?;
    let v = f.values();
    if v.iter().any(|&x| x < 0.0) {
        return Err(Error::param("field values must be non-negative"));
    }
    let peak_val = v.max();
    if peak_val <= ZERO_TOL {
        return Err(Error::Degenerate("all-zero field".into()));
    }
    if let Some(d) = direction {
        if d.len() != geo.dims() {
            return Err(Error::DimensionMismatch {
                expected: geo.dims(),
                got: d.len(),
            });
        }
        if d.iter().all(|x| *x == 0.0) || d.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("travel direction must be a finite non-zero vector"));
        }
    }
    let peak = v.iter().position(|&x| x == peak_val).expect("max present");
    let half = 0.5 * peak_val;
    let mut mass = 0.0;
    let mut shift = (0.0, 0.0);
    let mut kept = Vec::new();
    for s in (0..v.len()).filter(|&s| v[s] >= half) {
        mass += v[s];
        if let Some(d) = geo.displacement(peak, s) {
            shift.0 += v[s] * d.0;
            shift.1 += v[s] * d.1;
            kept.push((s, d));
        }
    }
    let shift = (shift.0 / mass, shift.1 / mass);
    let com_shift = match (direction, geo.dims()) {
        (Some(d), 1) => shift.0 * d[0].signum(),
        (Some(d), _) => (shift.0 * d[0] + shift.1 * d[1]) / (d[0].hypot(d[1])),
        (None, 1) => shift.0,
        (None, _) => shift.0.hypot(shift.1),
    };
    let elongation_ratio = match geo {
        Geometry::Grid { width, height } => {
            let (px, py) = geo.coords(peak);
            let (mx, my) = kept.iter().fold((0.0, 0.0), |acc, &(s, d)| {
                (acc.0 + v[s] * d.0, acc.1 + v[s] * d.1)
            });
            let (mx, my) = (mx / mass, my / mass);
            let (vx, vy) = kept.iter().fold((0.0, 0.0), |acc, &(s, d)| {
                (
                    acc.0 + v[s] * (d.0 - mx).powi(2),
                    acc.1 + v[s] * (d.1 - my).powi(2),
                )
            });
            let to_x_wall = px.min(*width as f64 - 1.0 - px);
            let to_y_wall = py.min(*height as f64 - 1.0 - py);
            // a wall at constant x runs along y
            let (along, across) = if to_x_wall <= to_y_wall {
                (vy, vx)
            } else {
                (vx, vy)
            };
            (across > ZERO_TOL).then(|| along / across)
        }
        _ => None,
    };
    Ok(FieldStats {
        com_shift,
        elongation_ratio,
    })
}

/// Undirected neighbour lists of the graph with an edge wherever `t` moves
/// between two distinct states in either direction.
pub fn adjacency(t: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = t.nrows();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && (t[(i, j)] > 0.0 || t[(j, i)] > 0.0))
                .collect()
        })
        .collect()
}

fn sign(x: f64) -> i8 {
    if x > ZERO_TOL {
        1
    } else if x < -ZERO_TOL {
        -1
    } else {
        0
    }
}

/// Boundary states of the partition induced by the second eigenvector.
///
/// A state is a candidate if a neighbour has a different sign; candidates are
/// ranked by the largest value jump across such an edge, then by closeness
/// to zero, then by index.
pub fn subgoal_candidates(es: &EigenSet, neighbors: &[Vec<usize>], count: usize) -> Result<Vec<usize>> {
    if es.vectors.len() < 2 {
        return Err(Error::param("need at least two eigenvectors"));
    }
    let v = &es.vectors[1];
    if neighbors.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            got: neighbors.len(),
        });
    }
    let spread = v.max() - v.min();
    if spread <= DEGENERACY_TOL {
        return Err(Error::Degenerate("second eigenvector is constant".into()));
    }
    if let Some(&l3) = es.values.get(2) {
        let l2 = es.values[1];
        if (l2 - l3).abs() <= DEGENERACY_TOL * l2.abs().max(1.0) {
            return Err(Error::Degenerate(
                "second eigenvalue is repeated, so its eigenvector is not unique".into(),
            ));
        }
    }
    let mut cands: Vec<(usize, f64)> = Vec::new();
    for (s, nb) in neighbors.iter().enumerate() {
        let mut grad: Option<f64> = None;
        for &j in nb {
            if j >= v.len() {
                return Err(Error::index("neighbor", j, v.len()));
            }
            if sign(v[j]) != sign(v[s]) {
                let g = (v[j] - v[s]).abs();
                grad = Some(grad.map_or(g, |x| x.max(g)));
            }
        }
        if let Some(g) = grad {
            cands.push((s, g));
        }
    }
    cands.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(v[a.0].abs().total_cmp(&v[b.0].abs()))
            .then(a.0.cmp(&b.0))
    });
    Ok(cands.into_iter().take(count).map(|(s, _)| s).collect())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::agents::sr_analytic;
    use crate::mdp::{make_graph_env, two_stream, Policy, TaskGraph, Template};

    fn uniform_t(g: &TaskGraph) -> DMatrix<f64> {
        g.transition_matrix_under_policy(&Policy::uniform(g.n_states(), g.n_actions()))
            .unwrap()
    }

    fn ring_t(n: usize) -> DMatrix<f64> {
        uniform_t(&make_graph_env(&Template::Ring { n, rewards: None }).unwrap())
    }

    fn open_chain_t(n: usize) -> DMatrix<f64> {
        uniform_t(
            &make_graph_env(&Template::Line {
                n,
                bidirectional: true,
                rewards: None,
            })
            .unwrap(),
        )
    }

    fn forward_chain_t(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
    }

    #[test]
    fn zero_discount_field_is_one_hot() {
        let m = sr_analytic(&ring_t(5), 0.0).unwrap();
        let f = place_field(&m, 2).unwrap();
        assert_eq!(f.values().as_slice(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(place_field(&m, 5).is_err());
    }

    #[test]
    fn terminal_field_covers_its_predecessors() {
        use two_stream::*;
        let g = two_stream(10.0, 1.0).unwrap();
        let m = sr_analytic(&uniform_t(&g), 0.9).unwrap();
        let f = place_field(&m, END_6).unwrap();
        let support: Vec<usize> = (0..N_STATES).filter(|&s| f.values()[s] > 0.0).collect();
        assert_eq!(support, vec![START_2, MID_4, END_6]);
    }

    #[test]
    fn ring_field_is_symmetric() {
        let n = 6;
        let m = sr_analytic(&ring_t(n), 0.8).unwrap();
        for s in 0..n {
            let f = place_field(&m, s).unwrap();
            for d in 1..n {
                assert_abs_diff_eq!(
                    f.values()[(s + d) % n],
                    f.values()[(s + n - d) % n],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn identity_eigenvalues() {
        let es = eigenmaps(&SrMatrix::identity(4, 0.5).unwrap(), 4).unwrap();
        assert!(es.symmetric_input);
        for v in &es.values {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ring4_eigenvalues() {
        let m = sr_analytic(&ring_t(4), 0.5).unwrap();
        let es = eigenmaps(&m, 4).unwrap();
        let want = [2.0, 1.0, 1.0, 2.0 / 3.0];
        for (g, w) in es.values.iter().zip(want) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-9);
        }
        assert!(eigenmaps(&m, 0).is_err());
        assert!(eigenmaps(&m, 5).is_err());
    }

    #[test]
    fn eigen_relation_on_ring() {
        // closed form for the uniform ring walk: lambda_T = cos(2 pi k / n)
        let n = 9;
        let gamma = 0.7;
        let m = sr_analytic(&ring_t(n), gamma).unwrap();
        let es = eigenmaps(&m, n).unwrap();
        let mut want: Vec<f64> = (0..n)
            .map(|k| 1.0 / (1.0 - gamma * (2.0 * PI * k as f64 / n as f64).cos()))
            .collect();
        want.sort_by(|a, b| b.total_cmp(a));
        for (g, w) in es.values.iter().zip(&want) {
            assert_abs_diff_eq!(*g, *w, epsilon = 1e-8);
        }
        for (lam, v) in es.values.iter().zip(&es.vectors) {
            assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-9);
            assert!((m.matrix() * v - v * *lam).amax() < 1e-8);
        }
        for i in 0..n {
            for j in 0..i {
                assert!(es.vectors[i].dot(&es.vectors[j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn non_symmetric_input_is_flagged() {
        let m = sr_analytic(&forward_chain_t(4), 0.5).unwrap();
        let es = eigenmaps(&m, 2).unwrap();
        assert!(!es.symmetric_input);
        assert_abs_diff_eq!(es.vectors[0].norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn chain_second_mode_changes_sign_once() {
        for n in [5, 8, 11] {
            let m = sr_analytic(&open_chain_t(n), 0.9).unwrap();
            let es = eigenmaps(&m, 2).unwrap();
            let v = &es.vectors[1];
            let changes = (1..n).filter(|&i| sign(v[i]) != sign(v[i - 1]) && sign(v[i]) != 0).count();
            assert_eq!(changes, 1, "n = {n}: {v:?}");
        }
    }

    #[test]
    fn chain_subgoal_is_midpoint() {
        let n = 7;
        let t = open_chain_t(n);
        let es = eigenmaps(&sr_analytic(&t, 0.9).unwrap(), 3).unwrap();
        assert_eq!(subgoal_candidates(&es, &adjacency(&t), 1).unwrap(), vec![3]);
        let t = open_chain_t(8);
        let es = eigenmaps(&sr_analytic(&t, 0.9).unwrap(), 3).unwrap();
        let mut got = subgoal_candidates(&es, &adjacency(&t), 2).unwrap();
        got.sort_unstable();
        assert_eq!(got, vec![3, 4]);
    }

    fn cliques(k: usize, bridge: bool) -> DMatrix<f64> {
        let n = if bridge { 2 * k } else { k };
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j && (i < k) == (j < k) {
                    a[(i, j)] = 1.0;
                }
            }
        }
        if bridge {
            a[(k - 1, k)] = 1.0;
            a[(k, k - 1)] = 1.0;
        }
        let rows: Vec<f64> = a.row_iter().map(|r| r.sum()).collect();
        DMatrix::from_fn(n, n, |i, j| a[(i, j)] / rows[i])
    }

    #[test]
    fn bridge_endpoints_come_first() {
        let t = cliques(4, true);
        let es = eigenmaps(&sr_analytic(&t, 0.9).unwrap(), 3).unwrap();
        let mut got = subgoal_candidates(&es, &adjacency(&t), 2).unwrap();
        got.sort_unstable();
        assert_eq!(got, vec![3, 4]);
    }

    #[test]
    fn single_clique_is_degenerate() {
        let t = cliques(5, false);
        let es = eigenmaps(&sr_analytic(&t, 0.9).unwrap(), 3).unwrap();
        assert!(matches!(
            subgoal_candidates(&es, &adjacency(&t), 2),
            Err(Error::Degenerate(_))
        ));
        let one = eigenmaps(&sr_analytic(&t, 0.9).unwrap(), 1).unwrap();
        assert!(subgoal_candidates(&one, &adjacency(&t), 2).is_err());
    }

    #[test]
    fn forward_travel_expands_backwards() {
        let n = 10;
        let m = sr_analytic(&forward_chain_t(n), 0.9).unwrap();
        for s in 1..n - 1 {
            let f = place_field(&m, s).unwrap().with_geometry(Geometry::line(n)).unwrap();
            let st = field_statistics(&f, Some(&[1.0])).unwrap();
            assert!(st.com_shift < 0.0, "state {s}: {st:?}");
            let rev = field_statistics(&f, Some(&[-1.0])).unwrap();
            assert_abs_diff_eq!(rev.com_shift, -st.com_shift, epsilon = 1e-12);
            assert_eq!(st.elongation_ratio, None);
        }
    }

    #[test]
    fn uniform_ring_has_no_shift() {
        for n in [6, 7] {
            let m = sr_analytic(&ring_t(n), 0.9).unwrap();
            for s in 0..n {
                let f = place_field(&m, s).unwrap().with_geometry(Geometry::Ring { n }).unwrap();
                let st = field_statistics(&f, Some(&[1.0])).unwrap();
                assert!(st.com_shift.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn symmetric_field_has_zero_shift() {
        let f = FieldMap::new(
            DVector::from_vec(vec![0.0, 1.0, 3.0, 1.0, 0.0]),
            Some(Geometry::line(5)),
        )
        .unwrap();
        assert_eq!(field_statistics(&f, None).unwrap().com_shift, 0.0);
    }

    #[test]
    fn wall_elongation() {
        // field hugging the left wall of a 5x5 grid, stretched along y
        let (w, h) = (5, 5);
        let mut v = DVector::zeros(w * h);
        for y in 0..h {
            v[y * w] = if y == 2 { 1.0 } else { 0.8 };
        }
        v[2 * w + 1] = 0.6;
        let f = FieldMap::new(v, Some(Geometry::Grid { width: w, height: h })).unwrap();
        let st = field_statistics(&f, None).unwrap();
        assert!(st.elongation_ratio.unwrap() > 1.0);
    }

    #[test]
    fn statistics_errors() {
        let f = FieldMap::new(DVector::from_vec(vec![0.0, 0.0]), Some(Geometry::line(2))).unwrap();
        assert!(matches!(field_statistics(&f, None), Err(Error::Degenerate(_))));
        let g = FieldMap::new(DVector::from_vec(vec![1.0, 0.0]), None).unwrap();
        assert!(field_statistics(&g, None).is_err());
        assert!(FieldMap::new(DVector::from_vec(vec![1.0]), Some(Geometry::line(2))).is_err());
        assert!(FieldMap::new(
            DVector::from_vec(vec![1.0, 2.0]),
            Some(Geometry::Line(vec![0.0, 0.0]))
        )
        .is_err());
        let h = FieldMap::new(DVector::from_vec(vec![1.0, 0.5]), Some(Geometry::line(2))).unwrap();
        assert!(field_statistics(&h, Some(&[1.0, 0.0])).is_err());
        assert!(field_statistics(&h, Some(&[0.0])).is_err());
    }

    #[test]
    fn periodic_maps_score_higher() {
        let n = 24;
        let m = sr_analytic(&ring_t(n), 0.9).unwrap();
        let es = eigenmaps(&m, n).unwrap();
        let geo = Geometry::Ring { n };
        // a low mode against a higher-frequency mode
        let low = periodicity_score(&es.vectors[1], &geo).unwrap();
        let high = periodicity_score(&es.vectors[7], &geo).unwrap();
        assert!(high > low, "{low} vs {high}");
        let grid = Geometry::Grid { width: 8, height: 8 };
        let wave = |k: usize| (2.0 * PI * k as f64 / 4.0).cos();
        let lattice = DVector::from_fn(64, |i, _| wave(i % 8) + wave(i / 8));
        let bump = DVector::from_fn(64, |i, _| if i == 27 { 1.0 } else { 0.0 });
        assert!(periodicity_score(&lattice, &grid).unwrap() > periodicity_score(&bump, &grid).unwrap());
        assert!(periodicity_score(&DVector::from_element(64, 1.0), &grid).is_err());
    }

    proptest! {
        #[test]
        fn field_is_column(n in 2usize..9, gamma in 0.0f64..0.95, s in 0usize..9) {
            let s = s % n;
            let m = sr_analytic(&ring_t(n), gamma).unwrap();
            let f = place_field(&m, s).unwrap();
            for r in 0..n {
                prop_assert_eq!(f.values()[r], m.get(r, s));
            }
        }

        #[test]
        fn grid_eigen_relation(w in 2usize..5, h in 2usize..5, gamma in 0.1f64..0.95) {
            let t = uniform_t(&make_graph_env(&Template::Grid2d { width: w, height: h, rewards: None }).unwrap());
            let m = sr_analytic(&t, gamma).unwrap();
            let te = SymmetricEigen::new(t.clone());
            for (i, lt) in te.eigenvalues.iter().enumerate() {
                let v = te.eigenvectors.column(i);
                let mv = m.matrix() * v;
                prop_assert!((mv - v / (1.0 - gamma * lt)).amax() < 1e-8);
            }
        }
    }
}
