//! Ensembles of successor representations at several discounts.
//!
//! Stacking `M_gamma = sum_t gamma^t P_t` over scales is a discrete Laplace
//! transform of the future occupancies `P_t`. Its log-derivative across
//! scales reads off the number of steps to a goal, and inverting the
//! power-basis system recovers the `P_t` themselves.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::agents::{sr_analytic, LearningRate, SrMatrix, SrState};
use crate::mdp::Transition;
use crate::stats::{mean, pearson};
use crate::{Error, Result};

/// Entries at or below this are treated as "never visited".
pub const OCCUPANCY_FLOOR: f64 = 1e-12;

/// Reconstructions with a larger power-basis condition estimate are refused.
pub const MAX_CONDITION: f64 = 1e12;

/// `k` discounts spaced geometrically from `lo` to `hi` inclusive.
pub fn geometric_scales(k: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if k < 2 || !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(Error::param(format!(
            "need k >= 2 and 0 < lo < hi < 1, got k={k}, lo={lo}, hi={hi}"
        )));
    }
    let ratio = hi / lo;
    Ok((0..k)
        .map(|i| lo * ratio.powf(i as f64 / (k - 1) as f64))
        .collect())
}

/// Six scales from 0.3 to 0.95.
pub fn default_scales() -> Vec<f64> {
    geometric_scales(6, 0.3, 0.95).expect("valid constants")
}

/// How the per-scale matrices are obtained.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    /// `(I - gamma T)^-1` for each scale.
    Analytic,
    /// TD learning at each scale over one shared experience stream.
    Td {
        stream: &'a [Transition],
        rate: LearningRate,
    },
}

#[derive(Debug, Clone)]
pub struct ScaleEnsemble {
    scales: Vec<f64>,
    mats: Vec<SrMatrix>,
}

fn check_scales(scales: &[f64]) -> Result<()> {
    if scales.len() < 2 {
        return Err(Error::param(format!(
            "an ensemble needs at least two scales, got {}",
            scales.len()
        )));
    }
    if let Some(&g) = scales.iter().find(|&&g| !(g > 0.0 && g < 1.0)) {
        return Err(Error::param(format!("scale {g} outside (0, 1)")));
    }
    for w in scales.windows(2) {
        if w[0] == w[1] {
            return Err(Error::param(format!("duplicate scale {}", w[0])));
        }
        if w[0] > w[1] {
            return Err(Error::param("scales must be strictly increasing"));
        }
    }
    Ok(())
}

/// One SR per scale over the same policy matrix.
pub fn build_ensemble(t_pi: &DMatrix<f64>, scales: &[f64], source: Source<'_>) -> Result<ScaleEnsemble> {
    check_scales(scales)?;
    if !t_pi.is_square() {
        return Err(Error::DimensionMismatch {
            expected: t_pi.nrows(),
            got: t_pi.ncols(),
        });
    }
    let n = t_pi.nrows();
    for (s, row) in t_pi.row_iter().enumerate() {
        if row.iter().any(|&p| !(p >= 0.0)) || row.sum() > 1.0 + 1e-9 {
            return Err(Error::InvalidGraph(format!(
                "row {s} of the policy matrix is not (sub)stochastic"
            )));
        }
    }
    let mats = scales
        .par_iter()
        .map(|&gamma| match source {
            Source::Analytic => sr_analytic(t_pi, gamma),
            Source::Td { stream, rate } => {
                let mut st = SrState::new(n, gamma, rate)?;
                for tr in stream {
                    st.learn(tr)?;
                }
                Ok(st.sr().clone())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScaleEnsemble {
        scales: scales.to_vec(),
        mats,
    })
}

impl ScaleEnsemble {
    /// Wraps precomputed matrices, checking scales and dimensions.
    pub fn from_parts(scales: Vec<f64>, mats: Vec<SrMatrix>) -> Result<Self> {
        check_scales(&scales)?;
        if mats.len() != scales.len() {
            return Err(Error::DimensionMismatch {
                expected: scales.len(),
                got: mats.len(),
            });
        }
        let n = mats[0].n();
        if let Some(m) = mats.iter().find(|m| m.n() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.n(),
            });
        }
        Ok(ScaleEnsemble { scales, mats })
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn mats(&self) -> &[SrMatrix] {
        &self.mats
    }

    pub fn n(&self) -> usize {
        self.mats[0].n()
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest discarded tail `gamma^K / (1 - gamma)` when the `K`-term
    /// power basis is fitted to a non-episodic transform.
    pub fn truncation_bound(&self) -> f64 {
        let k = self.len() as i32;
        self.scales
            .iter()
            .map(|g| g.powi(k) / (1.0 - g))
            .fold(0.0, f64::max)
    }
}

/// Steps from `s` to `g` estimated as the least-squares slope of
/// `ln M_gamma(s, g)` against `ln gamma`.
///
/// `None` when `g` is (numerically) never reached from `s` at some scale.
/// Exact whenever every visit to `g` happens at the same step count.
pub fn distance_to_goal(e: &ScaleEnsemble, s: usize, g: usize) -> Result<Option<f64>> {
    let n = e.n();
    for x in [s, g] {
        if x >= n {
            return Err(Error::index("state", x, n));
        }
    }
    let mut xs = Vec::with_capacity(e.len());
    let mut ys = Vec::with_capacity(e.len());
    for (gamma, m) in e.scales.iter().zip(&e.mats) {
        let v = m.get(s, g);
        if !(v > OCCUPANCY_FLOOR) {
            return Ok(None);
        }
        xs.push(gamma.ln());
        ys.push(v.ln());
    }
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(Some((sxy / sxx).max(0.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    /// Estimated `t`-step visit probabilities, negatives clamped to zero.
    pub p: DMatrix<f64>,
    /// Largest magnitude clamped away.
    pub clamped: f64,
    /// 2-norm condition estimate of the power-basis system.
    pub condition: f64,
}

/// Solves `sum_{t<K} gamma_k^t P_t = M_k` entrywise and returns `P_t`.
pub fn reconstruct_occupancy(e: &ScaleEnsemble, t: usize) -> Result<Occupancy> {
    reconstruct_occupancy_with(e, t, MAX_CONDITION)
}

pub fn reconstruct_occupancy_with(e: &ScaleEnsemble, t: usize, max_condition: f64) -> Result<Occupancy> {
    let k = e.len();
    if t >= k {
        return Err(Error::index("step", t, k));
    }
    let vander = DMatrix::from_fn(k, k, |i, j| e.scales[i].powi(j as i32));
    let sv = vander.clone().svd(false, false).singular_values;
    let condition = sv.max() / sv.min();
    if !(condition <= max_condition) {
        return Err(Error::IllConditioned { condition });
    }
    let inv = vander
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("power-basis system".into()))?;
    // P_t = sum_k inv[t][k] M_k
    let n = e.n();
    let mut p = DMatrix::zeros(n, n);
    for (w, m) in inv.row(t).iter().zip(&e.mats) {
        p += m.matrix() * *w;
    }
    let mut clamped = 0.0f64;
    for x in p.iter_mut() {
        if *x < 0.0 {
            clamped = clamped.max(-*x);
            *x = 0.0;
        }
    }
    Ok(Occupancy {
        p,
        clamped,
        condition,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonProfile {
    pub gammas: Vec<f64>,
    /// Mean correlation per grid value.
    pub similarity: Vec<f64>,
    pub best: f64,
}

/// Representations and one-hot state codes along a path, for [`horizon_fit`].
#[allow(clippy::type_complexity)]
pub fn path_representations(m: &SrMatrix, path: &[usize]) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let n = m.n();
    let mut reps = Vec::with_capacity(path.len());
    let mut codes = Vec::with_capacity(path.len());
    for &s in path {
        if s >= n {
            return Err(Error::index("state", s, n));
        }
        reps.push(m.row(s));
        let mut c = DVector::zeros(n);
        c[s] = 1.0;
        codes.push(c);
    }
    Ok((reps, codes))
}

/// Predictive horizon of representations sampled along a trajectory.
///
/// For each grid value `gamma` and point `i`, the representation `reps[i]` is
/// correlated with the discounted sum of upcoming codes
/// `w_i = sum_{k=1..max_lag} gamma^(k-1) codes[i+k]`, and scores are averaged
/// over points. With `codes = None` the representations themselves are
/// summed and every dimension is compared. With explicit codes, the
/// dimensions occupied by `codes[i]` are left out of the correlation, so a
/// representation's trivial self-match does not bias the fit. Points whose
/// correlation is undefined at some grid value (a constant side) are left
/// out at every grid value. Ties go to the smaller `gamma`.
pub fn horizon_fit(
    reps: &[DVector<f64>],
    codes: Option<&[DVector<f64>]>,
    gammas: &[f64],
    max_lag: usize,
) -> Result<HorizonProfile> {
    if gammas.is_empty() {
        return Err(Error::param("empty discount grid"));
    }
    if let Some(&g) = gammas.iter().find(|&&g| !(0.0..=1.0).contains(&g)) {
        return Err(Error::param(format!("grid value {g} outside [0, 1]")));
    }
    if max_lag == 0 {
        return Err(Error::param("max_lag must be at least 1"));
    }
    if reps.len() <= max_lag {
        return Err(Error::InsufficientSample {
            needed: max_lag + 1,
            got: reps.len(),
        });
    }
    let dim = reps[0].len();
    if let Some(r) = reps.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: r.len(),
        });
    }
    let (codes, masked) = match codes {
        Some(c) => {
            if c.len() != reps.len() {
                return Err(Error::DimensionMismatch {
                    expected: reps.len(),
                    got: c.len(),
                });
            }
            if let Some(x) = c.iter().find(|x| x.len() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x.len(),
                });
            }
            (c, true)
        }
        None => (reps, false),
    };
    let points = reps.len() - max_lag;
    let mut totals = vec![0.0; gammas.len()];
    let mut used = 0usize;
    let mut scores = Vec::with_capacity(gammas.len());
    'points: for i in 0..points {
        let keep: Vec<usize> = (0..dim).filter(|&j| !masked || codes[i][j] == 0.0).collect();
        let a: Vec<f64> = keep.iter().map(|&j| reps[i][j]).collect();
        scores.clear();
        for &gamma in gammas {
            let mut w = DVector::zeros(dim);
            let mut coef = 1.0;
            for k in 1..=max_lag {
                w.axpy(coef, &codes[i + k], 1.0);
                coef *= gamma;
            }
            let b: Vec<f64> = keep.iter().map(|&j| w[j]).collect();
            match pearson(&a, &b) {
                Ok(r) => scores.push(r),
                Err(Error::Degenerate(_)) => continue 'points,
                Err(e) => return Err(e),
            }
        }
        used += 1;
        for (t, r) in totals.iter_mut().zip(&scores) {
            *t += r;
        }
    }
    if used == 0 {
        return Err(Error::Degenerate(
            "no path point has a non-constant representation and target".into(),
        ));
    }
    let similarity: Vec<f64> = totals.iter().map(|t| t / used as f64).collect();
    let mut best = 0;
    for i in 1..gammas.len() {
        let (si, sb) = (similarity[i], similarity[best]);
        if si > sb || (si == sb && gammas[i] < gammas[best]) {
            best = i;
        }
    }
    Ok(HorizonProfile {
        gammas: gammas.to_vec(),
        best: gammas[best],
        similarity,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;

    use super::*;
    use crate::mdp::{make_graph_env, Policy, TaskGraph, Template};
    use crate::Rng;

    fn uniform_t(g: &TaskGraph) -> DMatrix<f64> {
        g.transition_matrix_under_policy(&Policy::uniform(g.n_states(), g.n_actions()))
            .unwrap()
    }

    fn directed_chain(n: usize) -> DMatrix<f64> {
        uniform_t(
            &make_graph_env(&Template::Line {
                n,
                bidirectional: false,
                rewards: None,
            })
            .unwrap(),
        )
    }

    fn ring(n: usize) -> DMatrix<f64> {
        uniform_t(&make_graph_env(&Template::Ring { n, rewards: None }).unwrap())
    }

    fn grid() -> Vec<f64> {
        (1..=9).map(|i| i as f64 / 10.0).collect()
    }

    #[test]
    fn scale_validation() {
        let t = ring(4);
        assert!(build_ensemble(&t, &[0.0], Source::Analytic).is_err());
        assert!(build_ensemble(&t, &[0.5], Source::Analytic).is_err());
        assert!(build_ensemble(&t, &[0.5, 0.5], Source::Analytic).is_err());
        assert!(build_ensemble(&t, &[0.6, 0.5], Source::Analytic).is_err());
        assert!(build_ensemble(&t, &[0.0, 0.5], Source::Analytic).is_err());
        assert!(build_ensemble(&t, &[0.5, 1.0], Source::Analytic).is_err());
        assert!(build_ensemble(&DMatrix::from_element(2, 2, 0.9), &[0.3, 0.5], Source::Analytic).is_err());
    }

    #[test]
    fn geometric_grid() {
        let s = default_scales();
        assert_eq!(s.len(), 6);
        assert_abs_diff_eq!(s[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(s[5], 0.95, epsilon = 1e-15);
        for w in s.windows(3) {
            assert_abs_diff_eq!(w[1] / w[0], w[2] / w[1], epsilon = 1e-12);
        }
        assert!(geometric_scales(1, 0.3, 0.9).is_err());
    }

    #[test]
    fn analytic_rows_sum_to_horizon() {
        let e = build_ensemble(&ring(4), &[0.3, 0.6], Source::Analytic).unwrap();
        for (g, m) in e.scales().iter().zip(e.mats()) {
            for s in 0..4 {
                assert_abs_diff_eq!(m.row(s).sum(), 1.0 / (1.0 - g), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn td_ensemble_tracks_analytic() {
        let g = make_graph_env(&Template::Ring { n: 4, rewards: None }).unwrap();
        let mut rng = Rng::seed_from_u64(11);
        let mut s = 0;
        let mut stream = Vec::with_capacity(100_000);
        for t in 0..100_000u64 {
            let a = if rand::Rng::gen::<bool>(&mut rng) { 1 } else { 0 };
            let tr = g.step(s, a, t, &mut rng).unwrap();
            s = tr.s_next;
            stream.push(tr);
        }
        let scales = [0.3, 0.6];
        let td = build_ensemble(
            &uniform_t(&g),
            &scales,
            Source::Td {
                stream: &stream,
                rate: LearningRate::Harmonic,
            },
        )
        .unwrap();
        let an = build_ensemble(&uniform_t(&g), &scales, Source::Analytic).unwrap();
        for (a, b) in td.mats().iter().zip(an.mats()) {
            assert!((a.matrix() - b.matrix()).amax() < 0.05);
        }
    }

    #[test]
    fn chain_distance_is_exact() {
        let e = build_ensemble(&directed_chain(5), &[0.5, 0.8], Source::Analytic).unwrap();
        assert_abs_diff_eq!(distance_to_goal(&e, 0, 3).unwrap().unwrap(), 3.0, epsilon = 1e-9);
        assert_eq!(distance_to_goal(&e, 2, 2).unwrap(), Some(0.0));
        assert_eq!(distance_to_goal(&e, 3, 0).unwrap(), None);
        assert!(distance_to_goal(&e, 0, 9).is_err());
    }

    #[test]
    fn stochastic_branch_distance_ignores_visit_probability() {
        // 0 -> {1, 2} evenly, 1 -> 3, 2 -> 4; state 3 visited with p = 1/2 at step 2
        let mut t = DMatrix::zeros(5, 5);
        t[(0, 1)] = 0.5;
        t[(0, 2)] = 0.5;
        t[(1, 3)] = 1.0;
        t[(2, 4)] = 1.0;
        let e = build_ensemble(&t, &default_scales(), Source::Analytic).unwrap();
        assert_abs_diff_eq!(distance_to_goal(&e, 0, 3).unwrap().unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn occupancy_of_episodic_chain() {
        let t = directed_chain(4);
        let e = build_ensemble(&t, &default_scales(), Source::Analytic).unwrap();
        let p0 = reconstruct_occupancy(&e, 0).unwrap();
        assert!((p0.p - DMatrix::identity(4, 4)).amax() < 1e-6);
        let p1 = reconstruct_occupancy(&e, 1).unwrap();
        assert!((p1.p - &t).amax() < 1e-6);
        let p2 = reconstruct_occupancy(&e, 2).unwrap();
        for j in 0..4 {
            assert_abs_diff_eq!(p2.p[(0, j)], if j == 2 { 1.0 } else { 0.0 }, epsilon = 1e-6);
        }
        assert!(p2.condition > 1.0 && p2.condition < MAX_CONDITION);
        assert!(reconstruct_occupancy(&e, 6).is_err());
    }

    #[test]
    fn transform_consistency() {
        let t = directed_chain(5);
        let e = build_ensemble(&t, &default_scales(), Source::Analytic).unwrap();
        let ps: Vec<Occupancy> = (0..e.len()).map(|i| reconstruct_occupancy(&e, i).unwrap()).collect();
        let slack = ps.iter().map(|o| o.clamped).fold(0.0, f64::max) * e.len() as f64 + 1e-6;
        for (g, m) in e.scales().iter().zip(e.mats()) {
            let mut sum = DMatrix::zeros(5, 5);
            for (i, o) in ps.iter().enumerate() {
                sum += &o.p * g.powi(i as i32);
            }
            assert!((sum - m.matrix()).amax() < slack + e.truncation_bound());
        }
    }

    #[test]
    fn ill_conditioning_is_reported() {
        let scales: Vec<f64> = (1..=12).map(|i| 0.5 + i as f64 * 0.01).collect();
        let e = build_ensemble(&directed_chain(3), &scales, Source::Analytic).unwrap();
        assert!(matches!(
            reconstruct_occupancy(&e, 1),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn horizon_recovers_generating_discount() {
        let n = 24;
        let path: Vec<usize> = (0..3 * n).map(|i| i % n).collect();
        for &gs in &[0.3, 0.6, 0.9] {
            let m = sr_analytic(&directed_ring(n), gs).unwrap();
            let (reps, codes) = path_representations(&m, &path).unwrap();
            let prof = horizon_fit(&reps, Some(&codes), &grid(), n - 1).unwrap();
            assert!((prof.best - gs).abs() < 0.1 + 1e-9, "{gs}: {prof:?}");
            assert!(prof.similarity.iter().all(|x| x.is_finite()));
        }
    }

    fn directed_ring(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| if j == (i + 1) % n { 1.0 } else { 0.0 })
    }

    #[test]
    fn single_grid_value_wins() {
        let m = sr_analytic(&directed_ring(6), 0.5).unwrap();
        let (reps, codes) = path_representations(&m, &[0, 1, 2, 3, 4, 5, 0, 1]).unwrap();
        let prof = horizon_fit(&reps, Some(&codes), &[0.7], 2).unwrap();
        assert_eq!(prof.best, 0.7);
    }

    #[test]
    fn one_hot_representations_have_no_successor_overlap() {
        let n = 8;
        let m = sr_analytic(&directed_ring(n), 0.0).unwrap();
        let path: Vec<usize> = (0..n).collect();
        let (reps, _) = path_representations(&m, &path).unwrap();
        let prof = horizon_fit(&reps, None, &[1e-6, 0.5], 1).unwrap();
        // corr(e_i, e_{i+1}) = -1/(n-1)
        for s in prof.similarity {
            assert_abs_diff_eq!(s, -1.0 / (n as f64 - 1.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn horizon_errors() {
        let m = sr_analytic(&directed_ring(4), 0.5).unwrap();
        let (reps, codes) = path_representations(&m, &[0, 1, 2]).unwrap();
        assert!(horizon_fit(&reps, Some(&codes), &[0.5], 3).is_err());
        assert!(horizon_fit(&reps, Some(&codes), &[], 1).is_err());
        assert!(horizon_fit(&reps, Some(&codes), &[0.5], 0).is_err());
        let flat = vec![DVector::from_element(4, 1.0); 5];
        assert!(matches!(
            horizon_fit(&flat, None, &[0.5], 1),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn constant_points_are_left_out() {
        // a terminal state's masked row is all zero
        let m = sr_analytic(&directed_chain(6), 0.6).unwrap();
        let path: Vec<usize> = (0..18).map(|i| i % 6).collect();
        let (reps, codes) = path_representations(&m, &path).unwrap();
        let prof = horizon_fit(&reps, Some(&codes), &grid(), 3).unwrap();
        assert!(prof.similarity.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn ties_prefer_smaller_discount() {
        // max_lag = 1 ignores gamma entirely, so every grid value ties
        let m = sr_analytic(&directed_ring(5), 0.5).unwrap();
        let (reps, codes) = path_representations(&m, &[0, 1, 2, 3, 4, 0]).unwrap();
        let prof = horizon_fit(&reps, Some(&codes), &[0.8, 0.2, 0.5], 1).unwrap();
        assert_eq!(prof.best, 0.2);
    }

    proptest! {
        #[test]
        fn analytic_sr_is_monotone_in_discount(
            n in 2usize..8,
            seed in 0u64..1000,
            g1 in 0.05f64..0.9,
            dg in 0.01f64..0.09,
        ) {
            let mut rng = Rng::seed_from_u64(seed);
            let t = DMatrix::from_fn(n, n, |_, _| rand::Rng::gen::<f64>(&mut rng));
            let rows: Vec<f64> = t.row_iter().map(|r| r.sum()).collect();
            let t = DMatrix::from_fn(n, n, |i, j| t[(i, j)] / rows[i]);
            let e = build_ensemble(&t, &[g1, g1 + dg], Source::Analytic).unwrap();
            let d = e.mats()[1].matrix() - e.mats()[0].matrix();
            prop_assert!(d.min() >= -1e-9);
        }

        #[test]
        fn unreachable_iff_sentinel(n in 2usize..9, seed in 0u64..500) {
            // random directed graph with sparse deterministic successors
            let mut rng = Rng::seed_from_u64(seed);
            let mut t = DMatrix::zeros(n, n);
            for s in 0..n {
                if rand::Rng::gen_bool(&mut rng, 0.8) {
                    let j = rand::Rng::gen_range(&mut rng, 0..n);
                    t[(s, j)] = 1.0;
                }
            }
            let e = build_ensemble(&t, &[0.4, 0.8], Source::Analytic).unwrap();
            for s in 0..n {
                let mut seen = vec![false; n];
                let mut cur = Some(s);
                while let Some(c) = cur {
                    if seen[c] { break; }
                    seen[c] = true;
                    cur = (0..n).find(|&j| t[(c, j)] > 0.0);
                }
                for (g, &reached) in seen.iter().enumerate() {
                    let d = distance_to_goal(&e, s, g).unwrap();
                    prop_assert_eq!(d.is_none(), !reached);
                }
            }
        }
    }
}
