//! Influence-maximization semi-bandits under the independent cascade model.
//!
//! The crate simulates the full learning loop: a directed social graph with
//! unknown edge activation probabilities, a linear-UCB learner that picks K
//! seed nodes per round through an offline influence-maximization oracle,
//! edge-level semi-bandit feedback from the resulting cascade, and scaled
//! cumulative regret against the oracle's choice on the true weights. It
//! also computes the complexity metrics that govern how that regret scales
//! with topology.
//!
//! Modules follow the pipeline: [`graph`] (topologies, reachability,
//! relevance), [`cascade`] (diffusion and spread computation), [`features`]
//! (edge feature construction), [`agent`] (the learner), [`oracle`] (offline
//! IM solvers), [`metrics`] (complexity quantities), and [`experiment`]
//! (configuration, runs, persistence). The `icsb` binary in [`cli`] fronts
//! the harness.

pub mod agent;
pub mod cascade;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod features;
pub mod graph;
pub mod metrics;
pub mod oracle;
pub mod seed;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil {
    use crate::graph::Graph;

    /// Forward-only directed line 1 -> 2 -> ... -> l.
    pub fn directed_line(l: usize) -> Graph {
        Graph::new(l, (1..l).map(|v| (v, v + 1)).collect()).unwrap()
    }

    /// The two-route diamond: 1 -> {2, 3} -> 4.
    pub fn diamond() -> Graph {
        Graph::new(4, vec![(1, 2), (1, 3), (2, 4), (3, 4)]).unwrap()
    }
}
