//! Offline influence-maximization solvers: exact enumeration over K-subsets
//! for small instances, and lazy greedy (CELF) with Monte-Carlo spread
//! estimates for everything else.
//!
//! The exact solver precomputes the relevance structure of every candidate
//! seed set once, so re-solving against fresh weight vectors — which the
//! learning loop does every round — is pure arithmetic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use itertools::Itertools;
use rand::Rng;

use crate::cascade::{influence_probs_dp, spread_mc, spread_mc_scratch, CascadeScratch, InfluencePlan};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, ProbabilityWeights, SeedSet};
use crate::seed;

/// Largest candidate count the exact solver will enumerate.
const EXACT_CANDIDATE_CAP: usize = 1_000_000;

/// Which solver to run, and the approximation factors it declares. The
/// scaled-regret accounting multiplies rewards by 1/(αγ).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OracleSpec {
    pub kind: OracleKind,
    /// Monte-Carlo samples per spread evaluation (greedy only).
    pub mc_samples: usize,
    pub alpha: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    ExactEnum,
    Greedy,
}

impl OracleSpec {
    /// Exact enumeration; an (α, γ) = (1, 1) oracle.
    pub fn exact() -> OracleSpec {
        OracleSpec {
            kind: OracleKind::ExactEnum,
            mc_samples: 0,
            alpha: 1.0,
            gamma: 1.0,
        }
    }

    /// Lazy greedy declaring the asymptotic (1, 1 − 1/e) guarantee.
    pub fn greedy(mc_samples: usize) -> OracleSpec {
        OracleSpec {
            kind: OracleKind::Greedy,
            mc_samples,
            alpha: 1.0,
            gamma: 1.0 - 1.0 / std::f64::consts::E,
        }
    }

    pub fn eta(&self) -> f64 {
        self.alpha * self.gamma
    }
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for i in 0..k.min(n) {
        acc = acc.checked_mul(n - i)?;
        acc /= i + 1;
        if acc > EXACT_CANDIDATE_CAP * 64 {
            return None;
        }
    }
    (k <= n).then_some(acc)
}

/// Exact solver over all K-subsets, with per-candidate evaluation plans
/// built once at construction. Ties go to the lexicographically smallest
/// seed set.
#[derive(Debug, Clone)]
pub struct ExactSolver {
    k: usize,
    candidates: Vec<SeedSet>,
    plans: Vec<InfluencePlan>,
}

impl ExactSolver {
    pub fn new(graph: &Graph, k: usize) -> Result<ExactSolver> {
        let l = graph.node_count();
        if k < 1 || k > l {
            return Err(Error::invalid(format!("seed budget {k} outside 1..={l}")));
        }
        match binomial(l, k) {
            Some(count) if count <= EXACT_CANDIDATE_CAP => {}
            _ => {
                return Err(Error::capacity(format!(
                    "exact oracle would enumerate C({l}, {k}) > {EXACT_CANDIDATE_CAP} seed sets; use the greedy oracle"
                )));
            }
        }
        let candidates: Vec<SeedSet> = (1..=l)
            .combinations(k)
            .map(|nodes| SeedSet::new(nodes, l).expect("valid by construction"))
            .collect();
        let plans = candidates
            .iter()
            .map(|s| InfluencePlan::new(graph, s))
            .collect();
        Ok(ExactSolver {
            k,
            candidates,
            plans,
        })
    }

    /// Arg-max of the exact spread under `weights`.
    pub fn solve(&self, graph: &Graph, weights: &ProbabilityWeights) -> Result<SeedSet> {
        self.solve_tie_broken(graph, weights, TieBreak::Lexicographic, 0)
    }

    /// Arg-max with an explicit rule for exactly-equal maxima. Lexicographic
    /// keeps the first (smallest) candidate; Random picks uniformly among
    /// the tied maxima from a stream derived from `eval_seed`, which keeps
    /// runs reproducible.
    pub fn solve_tie_broken(
        &self,
        graph: &Graph,
        weights: &ProbabilityWeights,
        tie_break: TieBreak,
        eval_seed: u64,
    ) -> Result<SeedSet> {
        let mut best_value = f64::NEG_INFINITY;
        let mut tied: Vec<usize> = Vec::new();
        for (i, plan) in self.plans.iter().enumerate() {
            let value = plan.spread(graph, weights)?;
            if value > best_value {
                best_value = value;
                tied.clear();
                tied.push(i);
            } else if value == best_value {
                tied.push(i);
            }
        }
        let idx = match tie_break {
            TieBreak::Lexicographic => tied[0],
            TieBreak::Random => {
                let mut rng = seed::stream(eval_seed, &[seed::TAG_ORACLE_TIE]);
                tied[rng.gen_range(0..tied.len())]
            }
        };
        Ok(self.candidates[idx].clone())
    }

    /// Arg-max of Monte-Carlo spread estimates under `weights`. Each
    /// candidate's estimate comes from a stream keyed by (eval_seed, set),
    /// so a given call is deterministic, while estimates across rounds are
    /// independent. Exact ties still go to the lexicographically smallest
    /// set.
    pub fn solve_mc(
        &self,
        graph: &Graph,
        weights: &ProbabilityWeights,
        samples: usize,
        eval_seed: u64,
    ) -> Result<SeedSet> {
        self.solve_mc_tie_broken(graph, weights, samples, eval_seed, TieBreak::Lexicographic)
    }

    pub fn solve_mc_tie_broken(
        &self,
        graph: &Graph,
        weights: &ProbabilityWeights,
        samples: usize,
        eval_seed: u64,
        tie_break: TieBreak,
    ) -> Result<SeedSet> {
        if samples == 0 {
            return Err(Error::invalid("Monte-Carlo spread evaluation needs samples >= 1"));
        }
        let mut scratch = CascadeScratch::new(graph.node_count());
        let mut best_value = f64::NEG_INFINITY;
        let mut tied: Vec<usize> = Vec::new();
        for (i, set) in self.candidates.iter().enumerate() {
            let mut rng = seed::stream(
                eval_seed,
                &[seed::TAG_ORACLE_EVAL, seed::node_set_tag(set.as_slice())],
            );
            let value = spread_mc_scratch(graph, set, weights, samples, &mut rng, &mut scratch)?.mean;
            if value > best_value {
                best_value = value;
                tied.clear();
                tied.push(i);
            } else if value == best_value {
                tied.push(i);
            }
        }
        let idx = match tie_break {
            TieBreak::Lexicographic => tied[0],
            TieBreak::Random => {
                let mut rng = seed::stream(eval_seed, &[seed::TAG_ORACLE_TIE]);
                tied[rng.gen_range(0..tied.len())]
            }
        };
        Ok(self.candidates[idx].clone())
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Spread evaluation inside the enumeration oracle: exact values or
/// Monte-Carlo estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadEval {
    Exact,
    Mc,
}

/// What to do with exactly-equal maxima. The lexicographic rule is the
/// library default; the seeded-random rule exists for experiments where a
/// fixed preference among indistinguishable optimistic candidates would
/// decide every early round (an optimistic learner starts with every
/// candidate clamped to the same value).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    Lexicographic,
    Random,
}

/// Exact influence maximization by enumeration; spreads are computed
/// exactly, so the result is the true optimum.
pub fn oracle_exact(graph: &Graph, k: usize, weights: &ProbabilityWeights) -> Result<SeedSet> {
    ExactSolver::new(graph, k)?.solve(graph, weights)
}

/// Enumeration oracle with Monte-Carlo spread evaluation; the arg-max is
/// exact up to estimation noise.
pub fn oracle_exact_mc(
    graph: &Graph,
    k: usize,
    weights: &ProbabilityWeights,
    samples: usize,
    eval_seed: u64,
) -> Result<SeedSet> {
    ExactSolver::new(graph, k)?.solve_mc(graph, weights, samples, eval_seed)
}

/// Whether greedy marginal gains can be evaluated exactly: the whole-graph
/// subset DP has to fit for singleton candidates, the worst case.
fn greedy_exact_feasible(graph: &Graph) -> bool {
    graph.node_count() <= 14
}

/// Spread of one candidate set inside a greedy run. Deterministic in
/// (seed, set): Monte-Carlo draws come from a stream keyed by the set, so an
/// evaluation's value never depends on when the greedy loop asks for it.
fn greedy_eval(
    graph: &Graph,
    nodes: &[NodeId],
    weights: &ProbabilityWeights,
    mc_samples: usize,
    eval_seed: u64,
    exact: bool,
) -> Result<f64> {
    let set = SeedSet::new(nodes.iter().copied(), graph.node_count())?;
    if exact {
        return Ok(influence_probs_dp(graph, &set, weights)?.iter().sum());
    }
    let mut rng = seed::stream(eval_seed, &[seed::TAG_ORACLE_EVAL, seed::node_set_tag(nodes)]);
    Ok(spread_mc(graph, &set, weights, mc_samples, &mut rng)?.mean)
}

struct GainEntry {
    gain: f64,
    node: NodeId,
    evaluated_at: usize,
}

impl PartialEq for GainEntry {
    fn eq(&self, other: &Self) -> bool {
        self.gain == other.gain && self.node == other.node
    }
}
impl Eq for GainEntry {}
impl PartialOrd for GainEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for GainEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on gain; ties pop the smaller node id first.
        self.gain
            .partial_cmp(&other.gain)
            .expect("gains are finite")
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Lazy greedy (CELF): cached marginal gains are re-evaluated only when they
/// surface at the top of the priority queue. With exact (or per-set
/// deterministic) spread values this returns the same seed set as naive
/// greedy with full re-evaluation.
pub fn oracle_greedy(
    graph: &Graph,
    k: usize,
    weights: &ProbabilityWeights,
    mc_samples: usize,
    eval_seed: u64,
) -> Result<SeedSet> {
    let l = graph.node_count();
    if k < 1 || k > l {
        return Err(Error::invalid(format!("seed budget {k} outside 1..={l}")));
    }
    let exact = greedy_exact_feasible(graph);
    if !exact && mc_samples == 0 {
        return Err(Error::invalid("greedy oracle needs mc_samples >= 1"));
    }
    let eval = |nodes: &[NodeId]| greedy_eval(graph, nodes, weights, mc_samples, eval_seed, exact);

    let mut chosen: Vec<NodeId> = Vec::with_capacity(k);
    let mut current_value = 0.0;
    let mut heap: BinaryHeap<GainEntry> = (1..=l)
        .map(|v| {
            Ok(GainEntry {
                gain: eval(&[v])?,
                node: v,
                evaluated_at: 0,
            })
        })
        .collect::<Result<_>>()?;

    while chosen.len() < k {
        let top = heap.pop().expect("heap holds every unchosen node");
        if top.evaluated_at == chosen.len() {
            chosen.push(top.node);
            current_value += top.gain;
            continue;
        }
        let mut with_node = chosen.clone();
        with_node.push(top.node);
        with_node.sort_unstable();
        heap.push(GainEntry {
            gain: eval(&with_node)? - current_value,
            node: top.node,
            evaluated_at: chosen.len(),
        });
    }
    SeedSet::new(chosen, l)
}

/// A configured solver, reusable across rounds. The exact variant carries
/// its precomputed candidate plans.
#[derive(Debug, Clone)]
pub enum Solver {
    Exact {
        solver: ExactSolver,
        spread: SpreadEval,
        mc_samples: usize,
        tie_break: TieBreak,
    },
    Greedy {
        mc_samples: usize,
    },
}

impl Solver {
    pub fn new(graph: &Graph, k: usize, spec: &OracleSpec) -> Result<Solver> {
        Self::with_spread(graph, k, spec, SpreadEval::Exact)
    }

    pub fn with_spread(
        graph: &Graph,
        k: usize,
        spec: &OracleSpec,
        spread: SpreadEval,
    ) -> Result<Solver> {
        Self::with_options(graph, k, spec, spread, TieBreak::Lexicographic)
    }

    pub fn with_options(
        graph: &Graph,
        k: usize,
        spec: &OracleSpec,
        spread: SpreadEval,
        tie_break: TieBreak,
    ) -> Result<Solver> {
        match spec.kind {
            OracleKind::ExactEnum => {
                if spread == SpreadEval::Mc && spec.mc_samples == 0 {
                    return Err(Error::invalid(
                        "Monte-Carlo spread evaluation needs mc_samples >= 1",
                    ));
                }
                Ok(Solver::Exact {
                    solver: ExactSolver::new(graph, k)?,
                    spread,
                    mc_samples: spec.mc_samples,
                    tie_break,
                })
            }
            OracleKind::Greedy => Ok(Solver::Greedy {
                mc_samples: spec.mc_samples,
            }),
        }
    }

    pub fn solve(
        &self,
        graph: &Graph,
        k: usize,
        weights: &ProbabilityWeights,
        eval_seed: u64,
    ) -> Result<SeedSet> {
        match self {
            Solver::Exact {
                solver,
                spread,
                mc_samples,
                tie_break,
            } => {
                debug_assert_eq!(solver.k(), k);
                match spread {
                    SpreadEval::Exact => {
                        solver.solve_tie_broken(graph, weights, *tie_break, eval_seed)
                    }
                    SpreadEval::Mc => solver.solve_mc_tie_broken(
                        graph,
                        weights,
                        *mc_samples,
                        eval_seed,
                        *tie_break,
                    ),
                }
            }
            Solver::Greedy { mc_samples } => {
                oracle_greedy(graph, k, weights, *mc_samples, eval_seed)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::spread_exact;
    use crate::graph::{build_topology, TopologyKind};
    use crate::testutil::directed_line;

    #[test]
    fn exact_oracle_picks_the_hub() {
        let g = build_topology(TopologyKind::Star, 4, 0).unwrap();
        let w = ProbabilityWeights::constant(g.edge_count(), 0.8).unwrap();
        // Hub: 1 + 3·0.8 = 3.4; leaf: 1 + 0.8 + 2·0.64 = 3.08.
        let s = oracle_exact(&g, 1, &w).unwrap();
        assert_eq!(s.as_slice(), &[1]);
    }

    #[test]
    fn exact_oracle_full_budget_returns_everyone() {
        let g = build_topology(TopologyKind::Grid, 5, 0).unwrap();
        let w = ProbabilityWeights::constant(g.edge_count(), 0.3).unwrap();
        let s = oracle_exact(&g, 5, &w).unwrap();
        assert_eq!(s.as_slice(), &[1, 2, 3, 4, 5]);
    }

    #[test]
    fn exact_oracle_breaks_ties_lexicographically() {
        let g = build_topology(TopologyKind::Star, 5, 0).unwrap();
        let w = ProbabilityWeights::constant(g.edge_count(), 0.0).unwrap();
        let s = oracle_exact(&g, 2, &w).unwrap();
        assert_eq!(s.as_slice(), &[1, 2]);
    }

    #[test]
    fn exact_oracle_capacity_cap() {
        let g = build_topology(TopologyKind::Complete, 60, 0).unwrap();
        let w = ProbabilityWeights::constant(g.edge_count(), 0.1).unwrap();
        match oracle_exact(&g, 5, &w) {
            Err(Error::Capacity(_)) => {}
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn greedy_matches_exact_on_star() {
        let g = build_topology(TopologyKind::Star, 4, 0).unwrap();
        let w = ProbabilityWeights::constant(g.edge_count(), 0.8).unwrap();
        let s = oracle_greedy(&g, 1, &w, 0, 7).unwrap();
        assert_eq!(s.as_slice(), &[1]);
    }

    #[test]
    fn greedy_tie_breaks_to_smallest_id() {
        let g = build_topology(TopologyKind::Star, 4, 0).unwrap();
        let w = ProbabilityWeights::constant(g.edge_count(), 1.0).unwrap();
        let s = oracle_greedy(&g, 1, &w, 0, 7).unwrap();
        assert_eq!(s.as_slice(), &[1]);
    }

    #[test]
    fn greedy_on_forward_line_takes_head_then_ties() {
        let g = directed_line(4);
        let w = ProbabilityWeights::constant(g.edge_count(), 1.0).unwrap();
        // {1} already reaches everyone; all second picks gain zero, so the
        // tie rule gives {1, 2}.
        let s = oracle_greedy(&g, 2, &w, 0, 7).unwrap();
        assert_eq!(s.as_slice(), &[1, 2]);
    }

    /// Naive greedy with full re-evaluation each step, the reference CELF
    /// must match when spread values are deterministic.
    fn naive_greedy(g: &Graph, k: usize, w: &ProbabilityWeights) -> SeedSet {
        let mut chosen: Vec<NodeId> = Vec::new();
        for _ in 0..k {
            let mut best: Option<(f64, NodeId)> = None;
            for v in g.nodes().filter(|v| !chosen.contains(v)) {
                let mut with_v = chosen.clone();
                with_v.push(v);
                let set = SeedSet::new(with_v, g.node_count()).unwrap();
                let value = spread_exact(g, &set, w).unwrap();
                if best.map_or(true, |(b, _)| value > b) {
                    best = Some((value, v));
                }
            }
            chosen.push(best.unwrap().1);
        }
        SeedSet::new(chosen, g.node_count()).unwrap()
    }

    #[test]
    fn lazy_greedy_equals_naive_greedy_with_exact_values() {
        let mut rng = crate::seed::stream(41, &[1]);
        use rand::Rng;
        for kind in TopologyKind::ALL {
            for l in 3..=7 {
                let g = build_topology(kind, l, 5).unwrap();
                let w = ProbabilityWeights::from_vec(
                    (0..g.edge_count()).map(|_| rng.gen()).collect(),
                )
                .unwrap();
                for k in 1..=2 {
                    let lazy = oracle_greedy(&g, k, &w, 0, 99).unwrap();
                    let naive = naive_greedy(&g, k, &w);
                    assert_eq!(lazy, naive, "{kind:?} L={l} K={k}");
                }
            }
        }
    }

    #[test]
    fn greedy_respects_approximation_guarantee_small() {
        let g = build_topology(TopologyKind::Grid, 6, 0).unwrap();
        let w = ProbabilityWeights::constant(g.edge_count(), 0.5).unwrap();
        let greedy = oracle_greedy(&g, 2, &w, 0, 3).unwrap();
        let exact = oracle_exact(&g, 2, &w).unwrap();
        let fg = spread_exact(&g, &greedy, &w).unwrap();
        let fe = spread_exact(&g, &exact, &w).unwrap();
        assert!(fg >= (1.0 - 1.0 / std::f64::consts::E) * fe - 1e-9);
    }

    #[test]
    fn greedy_mc_is_deterministic_per_seed() {
        let g = build_topology(TopologyKind::RandomTree, 40, 3).unwrap();
        let w = ProbabilityWeights::constant(g.edge_count(), 0.2).unwrap();
        let a = oracle_greedy(&g, 3, &w, 50, 123).unwrap();
        let b = oracle_greedy(&g, 3, &w, 50, 123).unwrap();
        assert_eq!(a, b);
        let validity = a.as_slice();
        assert_eq!(validity.len(), 3);
        assert!(validity.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn solver_wrapper_routes_to_both_kinds() {
        let g = build_topology(TopologyKind::Star, 5, 0).unwrap();
        let w = ProbabilityWeights::constant(g.edge_count(), 0.6).unwrap();
        let exact = Solver::new(&g, 1, &OracleSpec::exact()).unwrap();
        let greedy = Solver::new(&g, 1, &OracleSpec::greedy(100)).unwrap();
        assert_eq!(
            exact.solve(&g, 1, &w, 5).unwrap(),
            greedy.solve(&g, 1, &w, 5).unwrap()
        );
    }
}
