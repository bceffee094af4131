//! Complexity quantities of a cascade semi-bandit instance: per-edge
//! relevance counts and observation probabilities, the maximum observed
//! relevance C*, its worst-case topology bounds, and the effective edge
//! budget of disconnected graphs.

use itertools::Itertools;

use crate::cascade::InfluencePlan;
use crate::error::{Error, Result};
use crate::graph::{relevance_sets, EdgeId, Graph, NodeId, ProbabilityWeights, SeedSet};
use crate::oracle;
use crate::seed;

/// Per-edge relevance counts and observation probabilities for one seed set,
/// with the aggregate score sqrt(Σ_e N² P).
#[derive(Debug, Clone)]
pub struct RelevanceProfile {
    pub counts: Vec<usize>,
    pub obs_probs: Vec<f64>,
    pub score: f64,
}

/// How observation probabilities are computed.
#[derive(Debug, Clone, Copy)]
pub enum ProbMode {
    Exact,
    Mc { samples: usize, seed: u64 },
}

/// How the seed-set maximum in C* is taken.
#[derive(Debug, Clone, Copy)]
pub enum CStarMode {
    /// Enumerate every K-subset; the true maximum.
    Exact,
    /// Maximize over `n_sets` sampled seed sets plus the greedy-oracle seed
    /// set; a lower bound.
    Sampled {
        n_sets: usize,
        mc_samples: usize,
        seed: u64,
    },
}

/// C* together with how trustworthy it is and where the maximum was found.
#[derive(Debug, Clone)]
pub struct CStarReport {
    pub value: f64,
    pub is_lower_bound: bool,
    pub argmax: SeedSet,
}

/// Worst-case quantities depending only on topology.
#[derive(Debug, Clone, Copy)]
pub struct WorstCaseMetrics {
    /// max_S sqrt(Σ N²): C* with every weight forced to one.
    pub c_g: f64,
    /// Limit of C* as all weights vanish: only source-outgoing edges count.
    pub c_g_zero: f64,
    /// (L − K)·sqrt(|E|), the size-only bound.
    pub size_bound: f64,
}

/// The serializable bundle the experiment harness embeds in its JSON output.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MetricsReport {
    pub c_star: Option<f64>,
    pub c_star_is_lower_bound: Option<bool>,
    pub c_g: Option<f64>,
    pub c_g_zero: Option<f64>,
    pub size_bound: f64,
    pub e_star: usize,
}

/// Number of non-source nodes that edge `e` is relevant to.
pub fn relevance_count(graph: &Graph, sources: &SeedSet, e: EdgeId) -> Result<usize> {
    if e >= graph.edge_count() {
        return Err(Error::invalid(format!("edge index {e} out of range")));
    }
    let rel = bounded_relevance(graph, sources)?;
    Ok(count_from_sets(&rel, graph.edge_count())[e])
}

fn bounded_relevance(
    graph: &Graph,
    sources: &SeedSet,
) -> Result<Vec<std::collections::BTreeSet<EdgeId>>> {
    relevance_sets(graph, sources).ok_or_else(|| {
        Error::capacity(
            "simple-path enumeration over budget; relevance counts are infeasible on this graph".to_string(),
        )
    })
}

fn count_from_sets(rel: &[std::collections::BTreeSet<EdgeId>], edge_count: usize) -> Vec<usize> {
    let mut counts = vec![0usize; edge_count];
    for set in rel {
        for &e in set {
            counts[e] += 1;
        }
    }
    counts
}

/// Probability that edge `e` is observed given the seed set: the influence
/// probability of its start node.
pub fn observation_prob(
    graph: &Graph,
    sources: &SeedSet,
    e: EdgeId,
    weights: &ProbabilityWeights,
    mode: ProbMode,
) -> Result<f64> {
    if e >= graph.edge_count() {
        return Err(Error::invalid(format!("edge index {e} out of range")));
    }
    Ok(start_node_probs(graph, sources, weights, mode)?[graph.edge(e).0 - 1])
}

/// Influence probability of every node, by the requested mode.
fn start_node_probs(
    graph: &Graph,
    sources: &SeedSet,
    weights: &ProbabilityWeights,
    mode: ProbMode,
) -> Result<Vec<f64>> {
    match mode {
        ProbMode::Exact => InfluencePlan::new(graph, sources).node_probs(graph, weights),
        ProbMode::Mc { samples, seed } => {
            if samples == 0 {
                return Err(Error::invalid("Monte-Carlo mode needs samples >= 1"));
            }
            let mut rng = seed::stream(seed, &[seed::TAG_METRICS, seed::node_set_tag(sources.as_slice())]);
            let mut hits = vec![0usize; graph.node_count()];
            for _ in 0..samples {
                let out = crate::cascade::run_cascade(graph, sources, weights, &mut rng);
                for &v in &out.influenced {
                    hits[v - 1] += 1;
                }
            }
            Ok(hits.iter().map(|&h| h as f64 / samples as f64).collect())
        }
    }
}

/// Relevance counts and observation probabilities for one seed set.
pub fn relevance_profile(
    graph: &Graph,
    sources: &SeedSet,
    weights: &ProbabilityWeights,
    mode: ProbMode,
) -> Result<RelevanceProfile> {
    let rel = bounded_relevance(graph, sources)?;
    let counts = count_from_sets(&rel, graph.edge_count());
    let node_probs = start_node_probs(graph, sources, weights, mode)?;
    let obs_probs: Vec<f64> = graph
        .edges()
        .iter()
        .map(|&(a, _)| node_probs[a - 1])
        .collect();
    let score = profile_score(&counts, &obs_probs);
    Ok(RelevanceProfile {
        counts,
        obs_probs,
        score,
    })
}

fn profile_score(counts: &[usize], obs_probs: &[f64]) -> f64 {
    counts
        .iter()
        .zip(obs_probs)
        .map(|(&n, &p)| (n * n) as f64 * p)
        .sum::<f64>()
        .sqrt()
}

fn all_seed_sets(graph: &Graph, k: usize) -> Result<Vec<SeedSet>> {
    let l = graph.node_count();
    if k < 1 || k > l {
        return Err(Error::invalid(format!("seed budget {k} outside 1..={l}")));
    }
    let count = (1..=k).fold(1.0f64, |acc, i| acc * (l + 1 - i) as f64 / i as f64);
    if count > 1e6 {
        return Err(Error::capacity(format!(
            "exact maximization over C({l}, {k}) seed sets exceeds the 1e6 cap; use sampled mode"
        )));
    }
    Ok((1..=l)
        .combinations(k)
        .map(|nodes| SeedSet::new(nodes, l).expect("valid"))
        .collect())
}

/// Maximum observed relevance: max over seed sets of the P-weighted 2-norm
/// of relevance counts.
pub fn max_observed_relevance(
    graph: &Graph,
    k: usize,
    weights: &ProbabilityWeights,
    mode: CStarMode,
) -> Result<CStarReport> {
    let (sets, is_lower_bound, prob_mode) = match mode {
        CStarMode::Exact => (all_seed_sets(graph, k)?, false, ProbMode::Exact),
        CStarMode::Sampled {
            n_sets,
            mc_samples,
            seed: s,
        } => {
            let mut sets = Vec::with_capacity(n_sets + 1);
            let mut rng = seed::stream(s, &[seed::TAG_METRICS, 0]);
            use rand::seq::SliceRandom;
            let nodes: Vec<NodeId> = graph.nodes().collect();
            for _ in 0..n_sets {
                let sample: Vec<NodeId> = nodes
                    .choose_multiple(&mut rng, k)
                    .copied()
                    .collect();
                sets.push(SeedSet::new(sample, graph.node_count())?);
            }
            sets.push(oracle::oracle_greedy(graph, k, weights, mc_samples.max(1), s)?);
            sets.sort();
            sets.dedup();
            (
                sets,
                true,
                ProbMode::Mc {
                    samples: mc_samples,
                    seed: s,
                },
            )
        }
    };
    let mut best: Option<(f64, &SeedSet)> = None;
    for set in &sets {
        let profile = relevance_profile(graph, set, weights, prob_mode)?;
        if best.map_or(true, |(b, _)| profile.score > b) {
            best = Some((profile.score, set));
        }
    }
    let (value, argmax) = best.expect("at least one seed set");
    Ok(CStarReport {
        value,
        is_lower_bound,
        argmax: argmax.clone(),
    })
}

/// Topology-only worst cases: C_G (all weights one), C_G^0 (all weights
/// vanishing), and the size bound (L − K)·sqrt(|E|).
pub fn worst_case_metrics(graph: &Graph, k: usize) -> Result<WorstCaseMetrics> {
    let sets = all_seed_sets(graph, k)?;
    let mut c_g = 0.0f64;
    let mut c_g_zero = 0.0f64;
    for set in &sets {
        let rel = bounded_relevance(graph, set)?;
        let counts = count_from_sets(&rel, graph.edge_count());
        let full: f64 = counts.iter().map(|&n| (n * n) as f64).sum::<f64>().sqrt();
        let source_out: f64 = graph
            .edges()
            .iter()
            .enumerate()
            .filter(|&(_, &(a, _))| set.contains(a))
            .map(|(e, _)| (counts[e] * counts[e]) as f64)
            .sum::<f64>()
            .sqrt();
        c_g = c_g.max(full);
        c_g_zero = c_g_zero.max(source_out);
    }
    let l = graph.node_count();
    Ok(WorstCaseMetrics {
        c_g,
        c_g_zero,
        size_bound: (l - k) as f64 * (graph.edge_count() as f64).sqrt(),
    })
}

/// Effective edge budget E*: total edges of the min(m, K) weakly-connected
/// components with the most edges.
pub fn effective_edge_budget(graph: &Graph, k: usize) -> usize {
    let mut edge_counts: Vec<usize> = graph
        .weakly_connected_components()
        .iter()
        .map(|members| {
            let inside: std::collections::BTreeSet<NodeId> = members.iter().copied().collect();
            graph
                .edges()
                .iter()
                .filter(|&&(a, _)| inside.contains(&a))
                .count()
        })
        .collect();
    edge_counts.sort_unstable_by(|a, b| b.cmp(a));
    edge_counts.iter().take(k).sum()
}

/// Full metrics bundle; exact where feasible, otherwise sampled (C*) or
/// absent (C_G on oversized instances).
pub fn metrics_report(
    graph: &Graph,
    k: usize,
    weights: &ProbabilityWeights,
    mc_samples: usize,
    master_seed: u64,
) -> Result<MetricsReport> {
    let worst = match worst_case_metrics(graph, k) {
        Ok(w) => Some(w),
        Err(Error::Capacity(_)) => None,
        Err(other) => return Err(other),
    };
    let c_star = match max_observed_relevance(graph, k, weights, CStarMode::Exact) {
        Ok(report) => Some(report),
        Err(Error::Capacity(_)) => {
            match max_observed_relevance(
                graph,
                k,
                weights,
                CStarMode::Sampled {
                    n_sets: 64,
                    mc_samples: mc_samples.clamp(100, 2000),
                    seed: master_seed,
                },
            ) {
                Ok(report) => Some(report),
                Err(Error::Capacity(_)) => None,
                Err(other) => return Err(other),
            }
        }
        Err(other) => return Err(other),
    };
    let l = graph.node_count();
    Ok(MetricsReport {
        c_star: c_star.as_ref().map(|r| r.value),
        c_star_is_lower_bound: c_star.as_ref().map(|r| r.is_lower_bound),
        c_g: worst.as_ref().map(|w| w.c_g),
        c_g_zero: worst.as_ref().map(|w| w.c_g_zero),
        size_bound: (l - k) as f64 * (graph.edge_count() as f64).sqrt(),
        e_star: effective_edge_budget(graph, k),
    })
}
