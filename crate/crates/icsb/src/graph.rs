//! Directed graphs with canonical edge indexing, topology generators, and
//! the reachability / relevance primitives everything else is built on.
//!
//! Node ids run 1..=L. Edges are stored in lexicographic order by
//! (start, end) and an edge's position in that order is its dense index;
//! feature rows, weight vectors, and CSV output all rely on this indexing
//! being stable.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type EdgeId = usize;

/// Immutable directed graph. No self-loops, no duplicate edges.
#[derive(Debug, Clone)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(NodeId, NodeId)>,
    /// Per node (0-based), outgoing (neighbor, edge index) sorted by neighbor.
    out_adj: Vec<Vec<(NodeId, EdgeId)>>,
    /// Per node (0-based), incoming (neighbor, edge index) sorted by neighbor.
    in_adj: Vec<Vec<(NodeId, EdgeId)>>,
}

impl Graph {
    /// Build a graph from a directed edge list. Edges are sorted into
    /// canonical (start, end) order; duplicates and self-loops are rejected.
    pub fn new(node_count: usize, mut edges: Vec<(NodeId, NodeId)>) -> Result<Graph> {
        if node_count < 1 {
            return Err(Error::invalid("graph needs at least one node"));
        }
        edges.sort_unstable();
        for window in edges.windows(2) {
            if window[0] == window[1] {
                return Err(Error::invalid(format!(
                    "duplicate edge ({}, {})",
                    window[0].0, window[0].1
                )));
            }
        }
        let mut out_adj = vec![Vec::new(); node_count];
        let mut in_adj = vec![Vec::new(); node_count];
        for (idx, &(a, b)) in edges.iter().enumerate() {
            if a == b {
                return Err(Error::invalid(format!("self-loop at node {a}")));
            }
            if a < 1 || a > node_count || b < 1 || b > node_count {
                return Err(Error::invalid(format!(
                    "edge ({a}, {b}) outside node range 1..={node_count}"
                )));
            }
            out_adj[a - 1].push((b, idx));
            in_adj[b - 1].push((a, idx));
        }
        // Lexicographic edge order already sorts each adjacency list by
        // neighbor id; incoming lists need their own sort.
        for list in &mut in_adj {
            list.sort_unstable();
        }
        Ok(Graph {
            node_count,
            edges,
            out_adj,
            in_adj,
        })
    }

    /// Number of nodes L.
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Node ids 1..=L.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        1..=self.node_count
    }

    /// Edges in canonical order; an edge's slice position is its index.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn edge(&self, idx: EdgeId) -> (NodeId, NodeId) {
        self.edges[idx]
    }

    pub fn edge_index(&self, from: NodeId, to: NodeId) -> Option<EdgeId> {
        self.edges.binary_search(&(from, to)).ok()
    }

    /// Outgoing (neighbor, edge index) pairs of `v`, ascending by neighbor.
    pub fn out_edges(&self, v: NodeId) -> &[(NodeId, EdgeId)] {
        &self.out_adj[v - 1]
    }

    /// Incoming (neighbor, edge index) pairs of `v`, ascending by neighbor.
    pub fn in_edges(&self, v: NodeId) -> &[(NodeId, EdgeId)] {
        &self.in_adj[v - 1]
    }

    /// Render the canonical edge list, one "start end" pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }

    /// Weakly-connected components as sorted node lists, ordered by first node.
    pub fn weakly_connected_components(&self) -> Vec<Vec<NodeId>> {
        let mut comp = vec![usize::MAX; self.node_count];
        let mut components = Vec::new();
        for start in 1..=self.node_count {
            if comp[start - 1] != usize::MAX {
                continue;
            }
            let id = components.len();
            let mut members = vec![start];
            comp[start - 1] = id;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &(u, _) in self.out_edges(v).iter().chain(self.in_edges(v)) {
                    if comp[u - 1] == usize::MAX {
                        comp[u - 1] = id;
                        members.push(u);
                        stack.push(u);
                    }
                }
            }
            members.sort_unstable();
            components.push(members);
        }
        components
    }
}

/// Edge probabilities w̄ ∈ [0,1]^{|E|}, indexed canonically.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityWeights(Vec<f64>);

impl ProbabilityWeights {
    pub fn from_vec(values: Vec<f64>) -> Result<ProbabilityWeights> {
        for (i, &p) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!(
                    "probability {p} at edge {i} is outside [0, 1]"
                )));
            }
        }
        Ok(ProbabilityWeights(values))
    }

    /// All edges share one probability.
    pub fn constant(edge_count: usize, p: f64) -> Result<ProbabilityWeights> {
        Self::from_vec(vec![p; edge_count])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, e: EdgeId) -> f64 {
        self.0[e]
    }

    pub fn set(&mut self, e: EdgeId, p: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        self.0[e] = p;
        Ok(())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// One Bernoulli draw per edge; entries may be left unsampled by lazy
/// cascade execution.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryRealization(Vec<Option<bool>>);

impl BinaryRealization {
    pub fn unsampled(edge_count: usize) -> BinaryRealization {
        BinaryRealization(vec![None; edge_count])
    }

    pub fn from_values(values: Vec<bool>) -> BinaryRealization {
        BinaryRealization(values.into_iter().map(Some).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, e: EdgeId) -> Option<bool> {
        self.0[e]
    }

    pub fn set(&mut self, e: EdgeId, value: bool) {
        self.0[e] = Some(value);
    }

    /// Value of a sampled edge; panics if `e` was never sampled.
    pub fn require(&self, e: EdgeId) -> bool {
        self.0[e].expect("edge realization read before being sampled")
    }
}

/// A set of K source nodes, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SeedSet {
    nodes: Vec<NodeId>,
}

impl SeedSet {
    pub fn new(nodes: impl IntoIterator<Item = NodeId>, node_count: usize) -> Result<SeedSet> {
        let set: BTreeSet<NodeId> = nodes.into_iter().collect();
        if set.is_empty() {
            return Err(Error::invalid("seed set must not be empty"));
        }
        if let Some(&v) = set.iter().find(|&&v| v < 1 || v > node_count) {
            return Err(Error::invalid(format!(
                "seed node {v} outside 1..={node_count}"
            )));
        }
        Ok(SeedSet {
            nodes: set.into_iter().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.nodes.binary_search(&v).is_ok()
    }

    /// Ascending node ids.
    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn as_slice(&self) -> &[NodeId] {
        &self.nodes
    }

    /// '+'-joined ascending ids, the CSV serialization.
    pub fn display(&self) -> String {
        self.nodes
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("+")
    }
}

/// Canonical topology families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Bar,
    Star,
    Ray,
    Grid,
    Complete,
    Line,
    RandomTree,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 7] = [
        TopologyKind::Bar,
        TopologyKind::Star,
        TopologyKind::Ray,
        TopologyKind::Grid,
        TopologyKind::Complete,
        TopologyKind::Line,
        TopologyKind::RandomTree,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TopologyKind::Bar => "bar",
            TopologyKind::Star => "star",
            TopologyKind::Ray => "ray",
            TopologyKind::Grid => "grid",
            TopologyKind::Complete => "complete",
            TopologyKind::Line => "line",
            TopologyKind::RandomTree => "random_tree",
        }
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<TopologyKind> {
        match s {
            "bar" => Ok(TopologyKind::Bar),
            "star" => Ok(TopologyKind::Star),
            "ray" => Ok(TopologyKind::Ray),
            "grid" => Ok(TopologyKind::Grid),
            "complete" => Ok(TopologyKind::Complete),
            "line" => Ok(TopologyKind::Line),
            "random_tree" => Ok(TopologyKind::RandomTree),
            other => Err(Error::invalid(format!("unknown topology kind '{other}'"))),
        }
    }
}

/// Build one of the canonical topologies on L nodes. Undirected families
/// (everything except `complete`) place two opposite directed edges per
/// undirected edge. `seed` is only consumed by `random_tree`.
pub fn build_topology(kind: TopologyKind, l: usize, seed: u64) -> Result<Graph> {
    if l < 2 {
        return Err(Error::invalid(format!(
            "topology needs at least 2 nodes, got {l}"
        )));
    }
    let mut undirected: Vec<(NodeId, NodeId)> = Vec::new();
    match kind {
        TopologyKind::Bar => {
            // Nodes i and i+1 connected when i is odd; an odd L leaves the
            // last node isolated.
            let mut i = 1;
            while i + 1 <= l {
                undirected.push((i, i + 1));
                i += 2;
            }
        }
        TopologyKind::Star => {
            for v in 2..=l {
                undirected.push((1, v));
            }
        }
        TopologyKind::Ray => {
            // Star with k = ceil(sqrt(L-1)) arms; remainder handled by
            // giving the first arms one extra node (sizes descending).
            let rest = l - 1;
            let k = (rest as f64).sqrt().ceil() as usize;
            let base = rest / k;
            let extra = rest % k;
            let mut next = 2;
            for arm in 0..k {
                let size = if arm < extra { base + 1 } else { base };
                let mut prev = 1;
                for _ in 0..size {
                    undirected.push((prev, next));
                    prev = next;
                    next += 1;
                }
            }
        }
        TopologyKind::Grid => {
            // ceil(sqrt(L))-column row-major lattice, trailing nodes dropped.
            let cols = (l as f64).sqrt().ceil() as usize;
            for v in 1..=l {
                let (r, c) = ((v - 1) / cols, (v - 1) % cols);
                if c + 1 < cols && v + 1 <= l {
                    undirected.push((v, v + 1));
                }
                let below = (r + 1) * cols + c + 1;
                if below <= l {
                    undirected.push((v, below));
                }
            }
        }
        TopologyKind::Complete => {
            let mut edges = Vec::with_capacity(l * (l - 1));
            for a in 1..=l {
                for b in 1..=l {
                    if a != b {
                        edges.push((a, b));
                    }
                }
            }
            return Graph::new(l, edges);
        }
        TopologyKind::Line => {
            for v in 1..l {
                undirected.push((v, v + 1));
            }
        }
        TopologyKind::RandomTree => {
            // Uniform random recursive tree: node n attaches to a uniform
            // predecessor.
            let mut rng = crate::seed::stream(seed, &[crate::seed::TAG_GRAPH]);
            for v in 2..=l {
                let parent = rng.gen_range(1..v);
                undirected.push((parent, v));
            }
        }
    }
    let mut edges = Vec::with_capacity(2 * undirected.len());
    for (a, b) in undirected {
        edges.push((a, b));
        edges.push((b, a));
    }
    Graph::new(l, edges)
}

/// Influenced set: the sources plus every node reachable through edges whose
/// realization is 1. The realization must be sampled on every edge the walk
/// can see (lazy entries are fine elsewhere).
pub fn reachable(graph: &Graph, realization: &BinaryRealization, sources: &SeedSet) -> BTreeSet<NodeId> {
    let mut influenced = vec![false; graph.node_count()];
    let mut stack: Vec<NodeId> = sources.iter().collect();
    for v in sources.iter() {
        influenced[v - 1] = true;
    }
    while let Some(v) = stack.pop() {
        for &(u, e) in graph.out_edges(v) {
            if realization.require(e) && !influenced[u - 1] {
                influenced[u - 1] = true;
                stack.push(u);
            }
        }
    }
    influenced
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i + 1))
        .collect()
}

/// Number of nodes influenced under `realization`; f(S, w).
pub fn influenced_count(graph: &Graph, realization: &BinaryRealization, sources: &SeedSet) -> usize {
    reachable(graph, realization, sources).len()
}

/// Default step budget for simple-path enumeration. Dense graphs blow up
/// combinatorially; callers fall back to other exact routes or error out.
pub(crate) const RELEVANCE_DFS_BUDGET: usize = 5_000_000;

/// Edges relevant to `v` under `sources`: those lying on at least one simple
/// path from a source to `v` that passes through no other source.
pub fn relevant_edges(graph: &Graph, sources: &SeedSet, v: NodeId) -> Result<BTreeSet<EdgeId>> {
    if sources.contains(v) {
        return Err(Error::invalid(format!(
            "node {v} is a source; relevance is defined for non-sources"
        )));
    }
    if v < 1 || v > graph.node_count() {
        return Err(Error::invalid(format!("node {v} out of range")));
    }
    let sets = relevance_sets(graph, sources).ok_or_else(|| {
        Error::capacity(format!(
            "simple-path enumeration exceeded {RELEVANCE_DFS_BUDGET} steps; the graph is too dense for exact relevance"
        ))
    })?;
    Ok(sets[v - 1].iter().copied().collect())
}

/// Relevant-edge sets for every node at once (empty for sources), or `None`
/// when the path enumeration exceeds its step budget.
///
/// One depth-first enumeration of simple paths per source; a path may not
/// visit any other source. Worst-case exponential in dense graphs, linear on
/// doubled trees, which is what the big experiment topologies are.
pub(crate) fn relevance_sets(graph: &Graph, sources: &SeedSet) -> Option<Vec<BTreeSet<EdgeId>>> {
    let l = graph.node_count();
    let mut rel: Vec<BTreeSet<EdgeId>> = vec![BTreeSet::new(); l];
    let mut on_path = vec![false; l];
    let mut blocked = vec![false; l];
    for s in sources.iter() {
        blocked[s - 1] = true;
    }
    let mut budget = RELEVANCE_DFS_BUDGET;
    for s in sources.iter() {
        on_path[s - 1] = true;
        let mut path_edges: Vec<EdgeId> = Vec::new();
        let ok = dfs_paths(
            graph,
            s,
            s,
            &mut on_path,
            &blocked,
            &mut path_edges,
            &mut rel,
            &mut budget,
        );
        on_path[s - 1] = false;
        if !ok {
            return None;
        }
    }
    Some(rel)
}

#[allow(clippy::too_many_arguments)]
fn dfs_paths(
    graph: &Graph,
    source: NodeId,
    v: NodeId,
    on_path: &mut Vec<bool>,
    blocked: &[bool],
    path_edges: &mut Vec<EdgeId>,
    rel: &mut [BTreeSet<EdgeId>],
    budget: &mut usize,
) -> bool {
    for &(u, e) in graph.out_edges(v) {
        if on_path[u - 1] || (blocked[u - 1] && u != source) {
            continue;
        }
        match budget.checked_sub(path_edges.len() + 1) {
            Some(rest) => *budget = rest,
            None => return false,
        }
        path_edges.push(e);
        for &pe in path_edges.iter() {
            rel[u - 1].insert(pe);
        }
        on_path[u - 1] = true;
        let ok = dfs_paths(graph, source, u, on_path, blocked, path_edges, rel, budget);
        on_path[u - 1] = false;
        path_edges.pop();
        if !ok {
            return false;
        }
    }
    true
}

/// Parse the edge-list file format: one "start end [probability]" line per
/// directed edge, '#' comments and blank lines ignored. Node ids are
/// compacted to 1..=L preserving numeric order; edges are reindexed
/// canonically, and the optional third column follows them.
pub fn load_graph(path: impl AsRef<Path>) -> Result<(Graph, Option<ProbabilityWeights>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_edge_list(&text, &path.display().to_string())
}

pub(crate) fn parse_edge_list(
    text: &str,
    path: &str,
) -> Result<(Graph, Option<ProbabilityWeights>)> {
    let err = |line: usize, message: String| Error::Load {
        path: path.to_string(),
        line,
        message,
    };
    let mut raw: Vec<(u64, u64)> = Vec::new();
    let mut probs: Vec<(usize, f64)> = Vec::new();
    let mut seen: BTreeSet<(u64, u64)> = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(err(lineno, format!("expected 2 or 3 fields, got {}", fields.len())));
        }
        let a: u64 = fields[0]
            .parse()
            .map_err(|_| err(lineno, format!("bad node id '{}'", fields[0])))?;
        let b: u64 = fields[1]
            .parse()
            .map_err(|_| err(lineno, format!("bad node id '{}'", fields[1])))?;
        if a == 0 || b == 0 {
            return Err(err(lineno, "node ids must be positive".into()));
        }
        if a == b {
            return Err(err(lineno, format!("self-loop at node {a}")));
        }
        if !seen.insert((a, b)) {
            return Err(err(lineno, format!("duplicate edge ({a}, {b})")));
        }
        if fields.len() == 3 {
            let p: f64 = fields[2]
                .parse()
                .map_err(|_| err(lineno, format!("bad probability '{}'", fields[2])))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(err(lineno, format!("probability {p} outside [0, 1]")));
            }
            probs.push((raw.len(), p));
        }
        raw.push((a, b));
    }
    if raw.is_empty() {
        return Err(err(0, "no edges in file".into()));
    }
    if !probs.is_empty() && probs.len() != raw.len() {
        return Err(err(
            0,
            "probability column must be present on all edges or none".into(),
        ));
    }

    // Compact node ids to 1..=L in numeric order.
    let ids: BTreeSet<u64> = raw.iter().flat_map(|&(a, b)| [a, b]).collect();
    let index: std::collections::BTreeMap<u64, NodeId> = ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i + 1))
        .collect();
    let l = ids.len();
    let compacted: Vec<(NodeId, NodeId)> = raw.iter().map(|&(a, b)| (index[&a], index[&b])).collect();
    let graph = Graph::new(l, compacted.clone())?;

    let weights = if probs.is_empty() {
        None
    } else {
        let mut w = vec![0.0; graph.edge_count()];
        for (raw_idx, p) in probs {
            let (a, b) = compacted[raw_idx];
            let e = graph
                .edge_index(a, b)
                .expect("edge present by construction");
            w[e] = p;
        }
        Some(ProbabilityWeights::from_vec(w)?)
    };
    Ok((graph, weights))
}
