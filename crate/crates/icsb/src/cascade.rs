//! Independent cascade diffusion: realization sampling, cascade execution
//! with breadth-first edge feedback, and exact / Monte-Carlo computation of
//! spreads and per-node influence probabilities.
//!
//! Exact computation picks between two routes per node: enumeration over the
//! node's relevant edges (with a product shortcut when those edges form a
//! single simple path, which covers trees of any size), and a
//! subset-dynamic-program over final influenced sets for small dense graphs.
//! Both routes compute the same quantity and are cross-checked in tests.

use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{
    relevance_sets, BinaryRealization, EdgeId, Graph, NodeId, ProbabilityWeights, SeedSet,
};

/// Hard cap on per-node enumeration: at most 2^20 realization states.
const EDGE_ENUM_CAP: usize = 20;
/// Hard cap on the subset DP: at most 3^13 (subset, superset) pairs.
const DP_NODE_CAP: usize = 13;

/// Edge semi-bandit feedback from one cascade.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CascadeOutcome {
    /// Sources plus everyone reached through realized edges.
    pub influenced: BTreeSet<NodeId>,
    /// (edge index, realization) for every edge whose start node was
    /// influenced, in breadth-first observation order.
    pub observed_edges: Vec<(EdgeId, bool)>,
    /// f(S, w) = |influenced|.
    pub reward: usize,
}

/// Monte-Carlo spread estimate; `samples == 0` marks an exact value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Draw a full Bernoulli realization of every edge.
pub fn sample_realization(weights: &ProbabilityWeights, rng: &mut impl Rng) -> BinaryRealization {
    let mut out = BinaryRealization::unsampled(weights.len());
    for e in 0..weights.len() {
        out.set(e, rng.gen::<f64>() < weights.get(e));
    }
    out
}

/// Core breadth-first cascade. Sources enter the node queue in ascending id
/// order and downstream neighbors are visited in ascending id order, so the
/// observed-edge order is deterministic given the edge values.
fn cascade_core(
    graph: &Graph,
    sources: &SeedSet,
    mut edge_value: impl FnMut(EdgeId) -> bool,
) -> CascadeOutcome {
    let mut influenced = vec![false; graph.node_count()];
    let mut queue: std::collections::VecDeque<NodeId> = sources.iter().collect();
    for s in sources.iter() {
        influenced[s - 1] = true;
    }
    let mut observed = Vec::new();
    while let Some(v) = queue.pop_front() {
        for &(u, e) in graph.out_edges(v) {
            let value = edge_value(e);
            observed.push((e, value));
            if value && !influenced[u - 1] {
                influenced[u - 1] = true;
                queue.push_back(u);
            }
        }
    }
    let influenced: BTreeSet<NodeId> = influenced
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i + 1))
        .collect();
    CascadeOutcome {
        reward: influenced.len(),
        influenced,
        observed_edges: observed,
    }
}

/// Run one cascade, sampling each edge's Bernoulli lazily at the moment it
/// is first observed. Distributionally identical to sampling the whole
/// realization up front.
pub fn run_cascade(
    graph: &Graph,
    sources: &SeedSet,
    weights: &ProbabilityWeights,
    rng: &mut impl Rng,
) -> CascadeOutcome {
    cascade_core(graph, sources, |e| rng.gen::<f64>() < weights.get(e))
}

/// Run one cascade against a pre-sampled realization. Every edge reachable
/// from the sources must be sampled.
pub fn cascade_on_realization(
    graph: &Graph,
    sources: &SeedSet,
    realization: &BinaryRealization,
) -> CascadeOutcome {
    cascade_core(graph, sources, |e| realization.require(e))
}

/// Reusable buffers for repeated cascade counting. Epoch stamping makes the
/// reset between cascades O(1).
#[derive(Debug, Clone)]
pub(crate) struct CascadeScratch {
    epoch: u32,
    stamp: Vec<u32>,
    queue: Vec<NodeId>,
}

impl CascadeScratch {
    pub(crate) fn new(node_count: usize) -> CascadeScratch {
        CascadeScratch {
            epoch: 0,
            stamp: vec![0; node_count],
            queue: Vec::with_capacity(node_count),
        }
    }

    /// Influenced-node count of one lazily-sampled cascade. Identical in
    /// distribution to `run_cascade(..).reward`, without building feedback.
    pub(crate) fn count(
        &mut self,
        graph: &Graph,
        sources: &SeedSet,
        weights: &ProbabilityWeights,
        rng: &mut impl Rng,
    ) -> usize {
        self.epoch += 1;
        let epoch = self.epoch;
        self.queue.clear();
        for s in sources.iter() {
            self.stamp[s - 1] = epoch;
            self.queue.push(s);
        }
        let mut count = sources.len();
        let mut head = 0;
        while head < self.queue.len() {
            let v = self.queue[head];
            head += 1;
            for &(u, e) in graph.out_edges(v) {
                if rng.gen::<f64>() < weights.get(e) && self.stamp[u - 1] != epoch {
                    self.stamp[u - 1] = epoch;
                    self.queue.push(u);
                    count += 1;
                }
            }
        }
        count
    }
}

/// Unbiased Monte-Carlo estimate of f(S, w̄) over independent cascades.
pub fn spread_mc(
    graph: &Graph,
    sources: &SeedSet,
    weights: &ProbabilityWeights,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<SpreadEstimate> {
    let mut scratch = CascadeScratch::new(graph.node_count());
    spread_mc_scratch(graph, sources, weights, samples, rng, &mut scratch)
}

pub(crate) fn spread_mc_scratch(
    graph: &Graph,
    sources: &SeedSet,
    weights: &ProbabilityWeights,
    samples: usize,
    rng: &mut impl Rng,
    scratch: &mut CascadeScratch,
) -> Result<SpreadEstimate> {
    if samples == 0 {
        return Err(Error::invalid("spread_mc needs at least one sample"));
    }
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..samples {
        let reward = scratch.count(graph, sources, weights, rng) as f64;
        sum += reward;
        sumsq += reward * reward;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 {
        ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(SpreadEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
    })
}

// ---------------------------------------------------------------------------
// Exact computation.

/// How one node's exact influence probability gets evaluated.
#[derive(Debug, Clone)]
enum PlanCase {
    Source,
    /// No source-avoiding path reaches the node at all.
    Unreachable,
    /// Relevant edges form a single simple path; probability is the product.
    Path(Vec<EdgeId>),
    /// Enumerate realizations of the node's relevant subgraph.
    Enumerate(EnumCase),
    /// Relevant set too large; fall back to the whole-graph subset DP.
    SubsetDp,
}

#[derive(Debug, Clone)]
struct EnumCase {
    edges: Vec<EdgeId>,
    /// Local adjacency: per local node, (local node, local edge) pairs.
    adj: Vec<Vec<(usize, usize)>>,
    local_sources: Vec<usize>,
    target: usize,
}

impl EnumCase {
    fn build(graph: &Graph, sources: &SeedSet, v: NodeId, rel: &BTreeSet<EdgeId>) -> EnumCase {
        let edges: Vec<EdgeId> = rel.iter().copied().collect();
        let mut locals: Vec<NodeId> = Vec::new();
        let mut local_of = std::collections::BTreeMap::new();
        let mut intern = |node: NodeId, locals: &mut Vec<NodeId>| -> usize {
            *local_of.entry(node).or_insert_with(|| {
                locals.push(node);
                locals.len() - 1
            })
        };
        let mut adj: Vec<Vec<(usize, usize)>> = Vec::new();
        for (le, &e) in edges.iter().enumerate() {
            let (a, b) = graph.edge(e);
            let la = intern(a, &mut locals);
            let lb = intern(b, &mut locals);
            adj.resize(locals.len(), Vec::new());
            adj[la].push((lb, le));
        }
        let target = intern(v, &mut locals);
        adj.resize(locals.len(), Vec::new());
        let local_sources = sources
            .iter()
            .filter_map(|s| local_of.get(&s).copied())
            .collect();
        EnumCase {
            edges,
            adj,
            local_sources,
            target,
        }
    }

    /// Sum over all realizations of the relevant subgraph of
    /// P(realization) * 1{target reachable}.
    fn evaluate(&self, weights: &ProbabilityWeights) -> f64 {
        let k = self.edges.len();
        let p: Vec<f64> = self.edges.iter().map(|&e| weights.get(e)).collect();
        let mut total = 0.0;
        let mut visited = vec![false; self.adj.len()];
        let mut stack = Vec::with_capacity(self.adj.len());
        'mask: for mask in 0u32..(1u32 << k) {
            let mut prob = 1.0;
            for (i, &pi) in p.iter().enumerate() {
                prob *= if mask >> i & 1 == 1 { pi } else { 1.0 - pi };
                if prob == 0.0 {
                    continue 'mask;
                }
            }
            visited.iter_mut().for_each(|b| *b = false);
            stack.clear();
            for &s in &self.local_sources {
                visited[s] = true;
                stack.push(s);
            }
            let mut hit = visited[self.target];
            while let Some(x) = stack.pop() {
                if hit {
                    break;
                }
                for &(y, le) in &self.adj[x] {
                    if mask >> le & 1 == 1 && !visited[y] {
                        visited[y] = true;
                        if y == self.target {
                            hit = true;
                        }
                        stack.push(y);
                    }
                }
            }
            if hit {
                total += prob;
            }
        }
        total
    }
}

/// Precomputed exact-evaluation plan for a fixed (graph, sources) pair.
/// Reusable across weight vectors, which is what makes per-round exact
/// oracle calls affordable in the experiments.
#[derive(Debug, Clone)]
pub(crate) struct InfluencePlan {
    sources: SeedSet,
    cases: Vec<PlanCase>,
    needs_dp: bool,
}

impl InfluencePlan {
    pub(crate) fn new(graph: &Graph, sources: &SeedSet) -> InfluencePlan {
        // Path enumeration can blow up on dense graphs; the subset DP then
        // carries every node.
        let Some(rel) = relevance_sets(graph, sources) else {
            let cases = graph
                .nodes()
                .map(|v| {
                    if sources.contains(v) {
                        PlanCase::Source
                    } else {
                        PlanCase::SubsetDp
                    }
                })
                .collect();
            return InfluencePlan {
                sources: sources.clone(),
                cases,
                needs_dp: true,
            };
        };
        let mut needs_dp = false;
        let cases = graph
            .nodes()
            .map(|v| {
                if sources.contains(v) {
                    return PlanCase::Source;
                }
                let rv = &rel[v - 1];
                if rv.is_empty() {
                    return PlanCase::Unreachable;
                }
                if let Some(path) = as_simple_path(graph, sources, v, rv) {
                    return PlanCase::Path(path);
                }
                if rv.len() <= EDGE_ENUM_CAP {
                    return PlanCase::Enumerate(EnumCase::build(graph, sources, v, rv));
                }
                needs_dp = true;
                PlanCase::SubsetDp
            })
            .collect();
        InfluencePlan {
            sources: sources.clone(),
            cases,
            needs_dp,
        }
    }

    /// Exact influence probability of every node.
    pub(crate) fn node_probs(&self, graph: &Graph, weights: &ProbabilityWeights) -> Result<Vec<f64>> {
        let dp = if self.needs_dp {
            Some(influence_probs_dp(graph, &self.sources, weights)?)
        } else {
            None
        };
        Ok(self
            .cases
            .iter()
            .enumerate()
            .map(|(i, case)| match case {
                PlanCase::Source => 1.0,
                PlanCase::Unreachable => 0.0,
                PlanCase::Path(edges) => edges.iter().map(|&e| weights.get(e)).product(),
                PlanCase::Enumerate(en) => en.evaluate(weights),
                PlanCase::SubsetDp => dp.as_ref().expect("dp computed")[i],
            })
            .collect())
    }

    pub(crate) fn spread(&self, graph: &Graph, weights: &ProbabilityWeights) -> Result<f64> {
        Ok(self.node_probs(graph, weights)?.iter().sum())
    }
}

/// If the relevant edges form one simple path from a single source to `v`,
/// return its edges in path order.
fn as_simple_path(
    graph: &Graph,
    sources: &SeedSet,
    v: NodeId,
    rel: &BTreeSet<EdgeId>,
) -> Option<Vec<EdgeId>> {
    use std::collections::BTreeMap;
    let mut out: BTreeMap<NodeId, EdgeId> = BTreeMap::new();
    let mut indeg: BTreeMap<NodeId, usize> = BTreeMap::new();
    for &e in rel {
        let (a, b) = graph.edge(e);
        if out.insert(a, e).is_some() {
            return None; // branching
        }
        *indeg.entry(b).or_insert(0) += 1;
    }
    let start = {
        let mut starts = rel
            .iter()
            .map(|&e| graph.edge(e).0)
            .filter(|a| indeg.get(a).copied().unwrap_or(0) == 0);
        let s = starts.next()?;
        if starts.next().is_some() {
            return None;
        }
        s
    };
    if !sources.contains(start) {
        return None;
    }
    let mut path = Vec::with_capacity(rel.len());
    let mut cur = start;
    for _ in 0..rel.len() {
        let e = *out.get(&cur)?;
        path.push(e);
        cur = graph.edge(e).1;
    }
    (cur == v && path.len() == rel.len()).then_some(path)
}

/// Exact per-node influence probabilities by dynamic programming over the
/// distribution of final influenced sets. Feasible when the number of
/// non-source nodes is at most `DP_NODE_CAP`.
///
/// For a candidate final set S ∪ T, the probability of ending exactly there
/// factorizes into "T fully reached within S ∪ T" times "every edge leaving
/// S ∪ T is dead" — disjoint edge sets, hence independent.
pub(crate) fn influence_probs_dp(
    graph: &Graph,
    sources: &SeedSet,
    weights: &ProbabilityWeights,
) -> Result<Vec<f64>> {
    let others: Vec<NodeId> = graph.nodes().filter(|&v| !sources.contains(v)).collect();
    let m = others.len();
    if m > DP_NODE_CAP {
        return Err(Error::capacity(format!(
            "exact influence needs {m} non-source nodes <= {DP_NODE_CAP}; use spread_mc instead"
        )));
    }
    let slot: std::collections::BTreeMap<NodeId, usize> = others
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();

    // For node a, probability that all its edges into the node mask `m` are
    // dead.
    let dead_into = |a: NodeId, mask: u32| -> f64 {
        let mut p = 1.0;
        for &(b, e) in graph.out_edges(a) {
            if let Some(&i) = slot.get(&b) {
                if mask >> i & 1 == 1 {
                    p *= 1.0 - weights.get(e);
                }
            }
        }
        p
    };
    let members = |mask: u32| (0..m).filter(move |i| mask >> i & 1 == 1);

    let full = (1u32 << m) - 1;
    let mut q = vec![0.0f64; 1 << m]; // P(everything in T reached | play within S ∪ T)
    let mut probs = vec![0.0f64; graph.node_count()];
    for s in sources.iter() {
        probs[s - 1] = 1.0;
    }
    for t in 0..=full {
        // Sum over proper subsets t' of t: the process confined to S ∪ T
        // dies out exactly on S ∪ T'.
        let mut stopped_short = 0.0;
        let mut tp = (t.wrapping_sub(1)) & t;
        loop {
            if tp == t {
                break;
            }
            // Edges from S ∪ T' into T \ T' must all be dead.
            let frontier = t & !tp;
            let mut dead = sources.iter().map(|s| dead_into(s, frontier)).product::<f64>();
            for i in members(tp) {
                dead *= dead_into(others[i], frontier);
            }
            stopped_short += q[tp as usize] * dead;
            if tp == 0 {
                break;
            }
            tp = (tp - 1) & t;
        }
        q[t as usize] = if t == 0 { 1.0 } else { 1.0 - stopped_short };

        // Outside probability: all edges from S ∪ T into V \ (S ∪ T) dead.
        let outside = !t & full;
        let mut dead_out = sources.iter().map(|s| dead_into(s, outside)).product::<f64>();
        for i in members(t) {
            dead_out *= dead_into(others[i], outside);
        }
        let p_final = q[t as usize] * dead_out;
        for i in members(t) {
            probs[others[i] - 1] += p_final;
        }
    }
    Ok(probs)
}

/// Exact probability that `v` is influenced; f(S, w̄, v).
pub fn influence_prob_exact(
    graph: &Graph,
    sources: &SeedSet,
    weights: &ProbabilityWeights,
    v: NodeId,
) -> Result<f64> {
    if v < 1 || v > graph.node_count() {
        return Err(Error::invalid(format!("node {v} out of range")));
    }
    if sources.contains(v) {
        return Ok(1.0);
    }
    let plan = InfluencePlan::new(graph, sources);
    Ok(plan.node_probs(graph, weights)?[v - 1])
}

/// Exact expected spread f(S, w̄) = Σ_v f(S, w̄, v).
pub fn spread_exact(graph: &Graph, sources: &SeedSet, weights: &ProbabilityWeights) -> Result<f64> {
    InfluencePlan::new(graph, sources).spread(graph, weights)
}

/// First-order sensitivity of v's influence probability to w̄(e): the
/// difference between forcing the edge on and forcing it off. Nonnegative.
pub fn partial_derivative_exact(
    graph: &Graph,
    sources: &SeedSet,
    weights: &ProbabilityWeights,
    e: EdgeId,
    v: NodeId,
) -> Result<f64> {
    if e >= graph.edge_count() {
        return Err(Error::invalid(format!("edge index {e} out of range")));
    }
    let mut hi = weights.clone();
    hi.set(e, 1.0)?;
    let mut lo = weights.clone();
    lo.set(e, 0.0)?;
    Ok(influence_prob_exact(graph, sources, &hi, v)? - influence_prob_exact(graph, sources, &lo, v)?)
}
