//! The linear-UCB learner for cascade semi-bandits: optimistic weight
//! construction, incremental least-squares statistics with rank-one inverse
//! updates, and the per-round loop tying the oracle and the environment
//! together.
//!
//! The gram-matrix inverse starts as the identity and is kept in a diagonal
//! representation for as long as every observed feature row is a scaled
//! standard basis vector — which is always, in the tabular case — so tabular
//! rounds cost O(|E|) instead of O(|E|·d²). The first general row densifies
//! the state transparently.

use rand::Rng;

use crate::cascade::{run_cascade, CascadeOutcome};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::{Graph, ProbabilityWeights, SeedSet};
use crate::oracle::Solver;

/// Learner state: inverse gram matrix, statistics vector, and parameters.
#[derive(Debug, Clone)]
pub struct AgentState {
    dim: usize,
    sigma: f64,
    c: f64,
    round: usize,
    inv_gram: GramInverse,
    stat: Vec<f64>,
}

#[derive(Debug, Clone)]
enum GramInverse {
    Diagonal(Vec<f64>),
    Dense(Vec<f64>),
}

impl AgentState {
    /// Fresh state: identity inverse gram matrix, zero statistics.
    pub fn new(dim: usize, sigma: f64, c: f64) -> Result<AgentState> {
        if dim < 1 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if !(sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        if !(c >= 0.0) {
            return Err(Error::invalid(format!("c must be nonnegative, got {c}")));
        }
        Ok(AgentState {
            dim,
            sigma,
            c,
            round: 0,
            inv_gram: GramInverse::Diagonal(vec![1.0; dim]),
            stat: vec![0.0; dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Rounds absorbed so far.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn stat(&self) -> &[f64] {
        &self.stat
    }

    /// Inverse gram matrix in dense row-major form.
    pub fn inv_gram_dense(&self) -> Vec<f64> {
        match &self.inv_gram {
            GramInverse::Diagonal(diag) => {
                let d = self.dim;
                let mut m = vec![0.0; d * d];
                for (i, &v) in diag.iter().enumerate() {
                    m[i * d + i] = v;
                }
                m
            }
            GramInverse::Dense(m) => m.clone(),
        }
    }

    /// θ̄ = σ⁻² M⁻¹ B.
    pub fn theta_hat(&self) -> Vec<f64> {
        let inv_sig2 = 1.0 / (self.sigma * self.sigma);
        match &self.inv_gram {
            GramInverse::Diagonal(diag) => diag
                .iter()
                .zip(&self.stat)
                .map(|(m, b)| inv_sig2 * m * b)
                .collect(),
            GramInverse::Dense(m) => {
                let d = self.dim;
                (0..d)
                    .map(|i| {
                        inv_sig2
                            * m[i * d..(i + 1) * d]
                                .iter()
                                .zip(&self.stat)
                                .map(|(a, b)| a * b)
                                .sum::<f64>()
                    })
                    .collect()
            }
        }
    }

    /// x·θ̄ for a single feature row, avoiding the full θ̄ materialization.
    fn quad_form(&self, x: &[f64]) -> f64 {
        match &self.inv_gram {
            GramInverse::Diagonal(diag) => x
                .iter()
                .zip(diag)
                .map(|(xi, m)| xi * xi * m)
                .sum(),
            GramInverse::Dense(m) => {
                let d = self.dim;
                let mut total = 0.0;
                for (i, &xi) in x.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    total += xi
                        * m[i * d..(i + 1) * d]
                            .iter()
                            .zip(x)
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                }
                total
            }
        }
    }

    /// Per-edge point estimate x_e·θ̄ and unscaled radius sqrt(x_e'M⁻¹x_e).
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<(f64, f64)>> {
        if features.dim() != self.dim {
            return Err(Error::invalid(format!(
                "feature dimension {} does not match agent dimension {}",
                features.dim(),
                self.dim
            )));
        }
        let theta = self.theta_hat();
        Ok((0..features.edge_count())
            .map(|e| {
                let x = features.row(e);
                let mean: f64 = x.iter().zip(&theta).map(|(a, b)| a * b).sum();
                // Round-off can push the radicand a hair negative.
                let var = self.quad_form(x).max(0.0);
                (mean, var.sqrt())
            })
            .collect())
    }

    /// Optimistic edge weights: Proj_[0,1](x_e·θ̄ + c·sqrt(x_e'M⁻¹x_e)).
    pub fn compute_ucb(&self, features: &FeatureMatrix) -> Result<UcbWeights> {
        let parts = self.predict(features)?;
        let values = parts
            .iter()
            .map(|&(mean, radius)| (mean + self.c * radius).clamp(0.0, 1.0))
            .collect();
        Ok(UcbWeights {
            weights: ProbabilityWeights::from_vec(values).expect("clamped to [0,1]"),
            theta: self.theta_hat(),
        })
    }

    /// Absorb one round of edge feedback: a rank-one inverse update and a
    /// statistics increment per observed edge, then advance the round
    /// counter. The result does not depend on the order of observed edges.
    pub fn update(&mut self, feedback: &CascadeOutcome, features: &FeatureMatrix) -> Result<()> {
        if features.dim() != self.dim {
            return Err(Error::invalid(format!(
                "feature dimension {} does not match agent dimension {}",
                features.dim(),
                self.dim
            )));
        }
        let sig2 = self.sigma * self.sigma;
        for &(e, value) in &feedback.observed_edges {
            if e >= features.edge_count() {
                return Err(Error::invalid(format!("observed edge index {e} out of range")));
            }
            let x = features.row(e);
            self.rank_one_update(x, sig2);
            if value {
                for (b, xi) in self.stat.iter_mut().zip(x) {
                    *b += xi;
                }
            }
        }
        self.round += 1;
        Ok(())
    }

    /// M⁻¹ ← M⁻¹ − (M⁻¹ x x' M⁻¹) / (x' M⁻¹ x + σ²).
    fn rank_one_update(&mut self, x: &[f64], sig2: f64) {
        // A row with at most one nonzero keeps a diagonal inverse diagonal.
        if let GramInverse::Diagonal(diag) = &mut self.inv_gram {
            let nonzero: Vec<usize> = x
                .iter()
                .enumerate()
                .filter_map(|(i, &v)| (v != 0.0).then_some(i))
                .collect();
            match nonzero.len() {
                0 => return,
                1 => {
                    let i = nonzero[0];
                    let xi = x[i];
                    let m = diag[i];
                    diag[i] = m - (m * xi) * (xi * m) / (xi * m * xi + sig2);
                    return;
                }
                _ => {
                    let dense = self.inv_gram_dense();
                    self.inv_gram = GramInverse::Dense(dense);
                }
            }
        }
        let GramInverse::Dense(m) = &mut self.inv_gram else {
            unreachable!()
        };
        let d = self.dim;
        let mut y = vec![0.0; d];
        for i in 0..d {
            y[i] = m[i * d..(i + 1) * d]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum();
        }
        let denom: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() + sig2;
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] -= y[i] * y[j] / denom;
            }
        }
    }
}

/// Optimistic weights plus the point estimate they came from.
#[derive(Debug, Clone)]
pub struct UcbWeights {
    pub weights: ProbabilityWeights,
    pub theta: Vec<f64>,
}

/// Theoretical confidence-radius multiplier at failure probability `delta`:
/// (1/σ)·sqrt(d·log(1 + n·budget/(d·σ²)) + 2·log(1/δ)) + norm_bound.
pub fn confidence_radius(
    d: usize,
    n: usize,
    edge_budget: usize,
    sigma: f64,
    delta: f64,
    norm_bound: f64,
) -> f64 {
    let d_f = d as f64;
    let inner = d_f * (1.0 + (n * edge_budget) as f64 / (d_f * sigma * sigma)).ln()
        + 2.0 * (1.0 / delta).ln();
    inner.sqrt() / sigma + norm_bound
}

/// The default radius: `confidence_radius` at σ = 1 and δ = 1/(n(L+1−K)).
pub fn default_c(d: usize, n: usize, edge_budget: usize, l: usize, k: usize, norm_bound: f64) -> f64 {
    let delta = 1.0 / (n as f64 * (l + 1 - k) as f64);
    confidence_radius(d, n, edge_budget, 1.0, delta, norm_bound)
}

/// One full round: compute optimistic weights, ask the oracle for a seed
/// set, run a cascade under the true weights, and absorb the feedback.
pub fn run_round(
    state: &mut AgentState,
    graph: &Graph,
    k: usize,
    features: &FeatureMatrix,
    solver: &Solver,
    weights_true: &ProbabilityWeights,
    rng: &mut impl Rng,
) -> Result<(CascadeOutcome, SeedSet)> {
    let ucb = state.compute_ucb(features)?;
    let eval_seed: u64 = rng.gen();
    let seeds = solver.solve(graph, k, &ucb.weights, eval_seed)?;
    let outcome = run_cascade(graph, &seeds, weights_true, rng);
    state.update(&outcome, features)?;
    Ok((outcome, seeds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_topology, EdgeId, TopologyKind};
    use crate::oracle::OracleSpec;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn outcome_with(edges: Vec<(EdgeId, bool)>) -> CascadeOutcome {
        CascadeOutcome {
            influenced: BTreeSet::from([1]),
            observed_edges: edges,
            reward: 1,
        }
    }

    fn identity_features(m: usize) -> FeatureMatrix {
        let rows = (0..m)
            .map(|e| (0..m).map(|j| if e == j { 1.0 } else { 0.0 }).collect())
            .collect();
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn fresh_state_is_identity() {
        let s = AgentState::new(3, 1.0, 1.0).unwrap();
        assert_eq!(s.inv_gram_dense(), vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.stat(), &[0.0, 0.0, 0.0]);
        assert_eq!(s.round(), 0);

        let s = AgentState::new(1, 2.0, 0.0).unwrap();
        assert_eq!(s.inv_gram_dense(), vec![1.0]);

        assert!(AgentState::new(0, 1.0, 1.0).is_err());
        assert!(AgentState::new(2, 0.0, 1.0).is_err());
        assert!(AgentState::new(2, -1.0, 1.0).is_err());
        assert!(AgentState::new(2, 1.0, -0.5).is_err());
    }

    #[test]
    fn fresh_ucb_equals_bonus_and_projects() {
        let feats = identity_features(3);
        // Unit feature row on a fresh state: 0 + c·1, clamped.
        let s = AgentState::new(3, 1.0, 1.0).unwrap();
        let u = s.compute_ucb(&feats).unwrap();
        assert!(u.weights.as_slice().iter().all(|&v| v == 1.0));

        let s = AgentState::new(3, 1.0, 0.0).unwrap();
        let u = s.compute_ucb(&feats).unwrap();
        assert!(u.weights.as_slice().iter().all(|&v| v == 0.0));
        assert!(u.theta.iter().all(|&v| v == 0.0));

        let s = AgentState::new(3, 1.0, 5.0).unwrap();
        let u = s.compute_ucb(&feats).unwrap();
        assert!(u.weights.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn single_tabular_observation_closed_form() {
        let feats = identity_features(2);
        let mut s = AgentState::new(2, 1.0, 0.7).unwrap();
        s.update(&outcome_with(vec![(0, true)]), &feats).unwrap();
        assert_eq!(s.round(), 1);
        // M_00 = 2, so θ̄_0 = 1/2 and the bonus is c/sqrt(2).
        let u = s.compute_ucb(&feats).unwrap();
        assert!((u.theta[0] - 0.5).abs() < 1e-15);
        let expected = (0.5 + 0.7 / 2.0_f64.sqrt()).min(1.0);
        assert!((u.weights.get(0) - expected).abs() < 1e-12);
        // Unobserved edge untouched.
        assert_eq!(u.theta[1], 0.0);
        assert!((u.weights.get(1) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn empty_feedback_only_advances_round() {
        let feats = identity_features(2);
        let mut s = AgentState::new(2, 1.0, 1.0).unwrap();
        s.update(&outcome_with(vec![]), &feats).unwrap();
        assert_eq!(s.round(), 1);
        assert_eq!(s.inv_gram_dense(), vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.stat(), &[0.0, 0.0]);
    }

    #[test]
    fn one_dimensional_update() {
        let feats = FeatureMatrix::from_rows(vec![vec![1.0]]).unwrap();
        let mut s = AgentState::new(1, 1.0, 0.0).unwrap();
        s.update(&outcome_with(vec![(0, true)]), &feats).unwrap();
        assert!((s.inv_gram_dense()[0] - 0.5).abs() < 1e-15);
        assert_eq!(s.stat(), &[1.0]);
        assert!((s.theta_hat()[0] - 0.5).abs() < 1e-15);
    }

    /// Gauss-Jordan inversion, the independent check for the incremental
    /// inverse.
    pub(crate) fn invert(matrix: &[f64], d: usize) -> Vec<f64> {
        let mut a = matrix.to_vec();
        let mut inv = vec![0.0; d * d];
        for i in 0..d {
            inv[i * d + i] = 1.0;
        }
        for col in 0..d {
            let pivot_row = (col..d)
                .max_by(|&r1, &r2| {
                    a[r1 * d + col]
                        .abs()
                        .partial_cmp(&a[r2 * d + col].abs())
                        .unwrap()
                })
                .unwrap();
            if pivot_row != col {
                for j in 0..d {
                    a.swap(col * d + j, pivot_row * d + j);
                    inv.swap(col * d + j, pivot_row * d + j);
                }
            }
            let pivot = a[col * d + col];
            for j in 0..d {
                a[col * d + j] /= pivot;
                inv[col * d + j] /= pivot;
            }
            for r in 0..d {
                if r == col {
                    continue;
                }
                let factor = a[r * d + col];
                if factor == 0.0 {
                    continue;
                }
                for j in 0..d {
                    a[r * d + j] -= factor * a[col * d + j];
                    inv[r * d + j] -= factor * inv[col * d + j];
                }
            }
        }
        inv
    }

    fn frobenius_distance(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn incremental_inverse_tracks_direct_inversion() {
        let d = 4;
        let mut rng = crate::seed::stream(31, &[1]);
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|_| {
                let mut row: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() - 0.5).collect();
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                row.iter_mut().for_each(|x| *x /= norm.max(1.0));
                row
            })
            .collect();
        let feats = FeatureMatrix::from_rows(rows.clone()).unwrap();
        let sigma = 0.8;
        let mut s = AgentState::new(d, sigma, 1.0).unwrap();
        let observed: Vec<(EdgeId, bool)> = (0..10).map(|e| (e, e % 2 == 0)).collect();
        s.update(&outcome_with(observed), &feats).unwrap();

        // Direct M = I + σ⁻² Σ x x'.
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            m[i * d + i] = 1.0;
        }
        for row in &rows {
            for i in 0..d {
                for j in 0..d {
                    m[i * d + j] += row[i] * row[j] / (sigma * sigma);
                }
            }
        }
        let direct = invert(&m, d);
        assert!(frobenius_distance(&s.inv_gram_dense(), &direct) < 1e-8);
    }

    #[test]
    fn default_c_examples() {
        let expected = (3.0 * 2.0_f64.ln()).sqrt();
        assert!((default_c(1, 1, 1, 2, 1, 0.0) - expected).abs() < 1e-9);
        assert!((default_c(1, 1, 1, 2, 1, 10.0) - (expected + 10.0)).abs() < 1e-9);
        assert!(default_c(1, 10, 1, 2, 1, 0.0) > default_c(1, 1, 1, 2, 1, 0.0));
        assert!(default_c(1, 100, 1, 2, 1, 0.0) > default_c(1, 10, 1, 2, 1, 0.0));
    }

    #[test]
    fn run_round_with_full_seed_budget_selects_everyone() {
        let g = build_topology(TopologyKind::Star, 4, 0).unwrap();
        let w = ProbabilityWeights::constant(g.edge_count(), 0.3).unwrap();
        let feats = tabular(&g);
        let mut s = AgentState::new(g.edge_count(), 1.0, 1.0).unwrap();
        let solver = Solver::new(&g, 4, &OracleSpec::exact()).unwrap();
        let mut rng = crate::seed::stream(32, &[1]);
        let (_, seeds) = run_round(&mut s, &g, 4, &feats, &solver, &w, &mut rng).unwrap();
        assert_eq!(seeds.as_slice(), &[1, 2, 3, 4]);
        assert_eq!(s.round(), 1);
    }

    fn tabular(g: &Graph) -> FeatureMatrix {
        crate::features::tabular_features(g, None)
    }

    #[test]
    fn run_round_optimistic_start_solves_deterministic_im() {
        // Fresh tabular state with a big c: U ≡ 1, so the oracle solves
        // plain reachability maximization and takes the hub.
        let g = build_topology(TopologyKind::Star, 5, 0).unwrap();
        let w = ProbabilityWeights::constant(g.edge_count(), 0.5).unwrap();
        let feats = tabular(&g);
        let mut s = AgentState::new(g.edge_count(), 1.0, 3.0).unwrap();
        let solver = Solver::new(&g, 1, &OracleSpec::exact()).unwrap();
        let mut rng = crate::seed::stream(33, &[1]);
        let (_, seeds) = run_round(&mut s, &g, 1, &feats, &solver, &w, &mut rng).unwrap();
        assert_eq!(seeds.as_slice(), &[1]);
    }

    #[test]
    fn well_trained_agent_matches_exact_oracle() {
        // Feed the tabular agent a long synthetic history whose empirical
        // means are the true weights, then check it picks the true optimum.
        let g = build_topology(TopologyKind::Star, 6, 0).unwrap();
        let mut weights = ProbabilityWeights::constant(g.edge_count(), 0.2).unwrap();
        for e in 0..g.edge_count() {
            let (a, _) = g.edge(e);
            weights.set(e, if a == 1 { 0.8 } else { 0.2 }).unwrap();
        }
        let feats = tabular(&g);
        let reps = 2000usize;
        let mut s = AgentState::new(g.edge_count(), 1.0, 0.0).unwrap();
        for rep in 0..reps {
            let observed: Vec<(EdgeId, bool)> = (0..g.edge_count())
                .map(|e| {
                    let successes = (weights.get(e) * reps as f64).round() as usize;
                    (e, rep < successes)
                })
                .collect();
            s.update(&outcome_with(observed), &feats).unwrap();
        }
        let u = s.compute_ucb(&feats).unwrap();
        for e in 0..g.edge_count() {
            assert!((u.weights.get(e) - weights.get(e)).abs() < 0.01);
        }
        let solver = Solver::new(&g, 1, &OracleSpec::exact()).unwrap();
        let learned = solver.solve(&g, 1, &u.weights, 0).unwrap();
        let optimal = crate::oracle::oracle_exact(&g, 1, &weights).unwrap();
        assert_eq!(learned, optimal);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn update_is_order_invariant(perm_seed in 0u64..1000) {
            let d = 5;
            let mut rng = crate::seed::stream(perm_seed, &[34]);
            let rows: Vec<Vec<f64>> = (0..8)
                .map(|_| {
                    let mut row: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() - 0.5).collect();
                    let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                    row.iter_mut().for_each(|x| *x /= norm.max(1.0));
                    row
                })
                .collect();
            let feats = FeatureMatrix::from_rows(rows).unwrap();
            let mut observed: Vec<(EdgeId, bool)> = (0..8).map(|e| (e, rng.gen())).collect();

            let mut forward = AgentState::new(d, 1.0, 1.0).unwrap();
            forward.update(&outcome_with(observed.clone()), &feats).unwrap();

            use rand::seq::SliceRandom;
            observed.shuffle(&mut rng);
            let mut shuffled = AgentState::new(d, 1.0, 1.0).unwrap();
            shuffled.update(&outcome_with(observed), &feats).unwrap();

            let (a, b) = (forward.inv_gram_dense(), shuffled.inv_gram_dense());
            prop_assert!(frobenius_distance(&a, &b) < 1e-10);
            for (x, y) in forward.stat().iter().zip(shuffled.stat()) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn ucb_values_stay_in_unit_interval(seed in 0u64..500) {
            let d = 4;
            let mut rng = crate::seed::stream(seed, &[35]);
            let rows: Vec<Vec<f64>> = (0..6)
                .map(|_| {
                    let mut row: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
                    let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                    row.iter_mut().for_each(|x| *x /= norm.max(1.0));
                    row
                })
                .collect();
            let feats = FeatureMatrix::from_rows(rows).unwrap();
            let mut s = AgentState::new(d, 1.0, rng.gen::<f64>() * 3.0).unwrap();
            for _ in 0..5 {
                let mut observed: Vec<(EdgeId, bool)> = Vec::new();
                for e in 0..6 {
                    if rng.gen::<bool>() {
                        observed.push((e, rng.gen()));
                    }
                }
                s.update(&outcome_with(observed), &feats).unwrap();
                let u = s.compute_ucb(&feats).unwrap();
                for e in 0..6 {
                    let v = u.weights.get(e);
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
