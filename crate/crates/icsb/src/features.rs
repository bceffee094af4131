//! Edge feature matrices: the tabular identity, synthetic features with an
//! exactly-linear ground truth, and features derived from per-node vectors.
//!
//! Every constructor keeps row norms at or below one. When a ground-truth
//! coefficient vector is known the matrix records it together with the
//! worst-case linear-model error rho = max_e |w̄(e) - x_e·θ*|.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, NodeId, ProbabilityWeights};

/// |E| x d feature matrix in row-major order.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    rows: usize,
    dim: usize,
    theta_star: Option<Vec<f64>>,
    rho: Option<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<FeatureMatrix> {
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::invalid("feature matrix needs at least one column"));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::invalid(format!(
                    "feature row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1.0 + 1e-9 {
                return Err(Error::invalid(format!(
                    "feature row {i} has norm {norm} > 1"
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(FeatureMatrix {
            rows: rows.len(),
            dim,
            data,
            theta_star: None,
            rho: None,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, e: EdgeId) -> &[f64] {
        &self.data[e * self.dim..(e + 1) * self.dim]
    }

    /// Ground-truth coefficients, when the matrix was built from one.
    pub fn theta_star(&self) -> Option<&[f64]> {
        self.theta_star.as_deref()
    }

    /// Worst-case linear-model error, when the ground truth is known.
    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    /// Bound on ‖θ*‖₂ used for confidence radii: the exact norm when a
    /// ground truth is recorded, 1 otherwise.
    pub fn theta_norm_bound(&self) -> f64 {
        match &self.theta_star {
            Some(t) => t.iter().map(|x| x * x).sum::<f64>().sqrt(),
            None => 1.0,
        }
    }

    fn with_ground_truth(mut self, theta: Vec<f64>, weights: &ProbabilityWeights) -> FeatureMatrix {
        let rho = (0..self.rows)
            .map(|e| {
                let fit: f64 = self
                    .row(e)
                    .iter()
                    .zip(&theta)
                    .map(|(x, t)| x * t)
                    .sum();
                (weights.get(e) - fit).abs()
            })
            .fold(0.0f64, f64::max);
        self.theta_star = Some(theta);
        self.rho = Some(rho);
        self
    }
}

/// The naive identity matrix: one independent coordinate per edge. With the
/// true weights supplied the ground truth is θ* = w̄ and rho is zero.
pub fn tabular_features(graph: &Graph, weights: Option<&ProbabilityWeights>) -> FeatureMatrix {
    let m = graph.edge_count();
    let mut data = vec![0.0; m * m];
    for e in 0..m {
        data[e * m + e] = 1.0;
    }
    let fm = FeatureMatrix {
        data,
        rows: m,
        dim: m,
        theta_star: None,
        rho: None,
    };
    match weights {
        Some(w) => fm.with_ground_truth(w.as_slice().to_vec(), w),
        None => fm,
    }
}

/// Synthetic features realizing w̄(e) = x_e·θ* exactly: θ* is uniform on the
/// unit sphere and each row is w̄(e)·θ* plus a random perpendicular
/// component, rescaled so the row norm stays at most one.
pub fn synth_features(
    weights: &ProbabilityWeights,
    d: usize,
    rng: &mut impl Rng,
) -> Result<FeatureMatrix> {
    if d < 2 {
        return Err(Error::invalid("synthetic features need dimension >= 2"));
    }
    let gaussian = |rng: &mut dyn rand::RngCore| -> f64 {
        // Box-Muller; plenty for feature generation.
        let u1: f64 = loop {
            let u: f64 = rand::Rng::gen(rng);
            if u > 0.0 {
                break u;
            }
        };
        let u2: f64 = rand::Rng::gen(rng);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };

    let mut theta: Vec<f64> = (0..d).map(|_| gaussian(rng)).collect();
    let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
    theta.iter_mut().for_each(|x| *x /= norm);

    let mut data = Vec::with_capacity(weights.len() * d);
    for e in 0..weights.len() {
        let w = weights.get(e);
        let mut z: Vec<f64> = (0..d).map(|_| gaussian(rng)).collect();
        let along: f64 = z.iter().zip(&theta).map(|(a, b)| a * b).sum();
        for (zi, ti) in z.iter_mut().zip(&theta) {
            *zi -= along * ti;
        }
        let z_norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        let budget = (1.0 - w * w).max(0.0).sqrt();
        let scale = if z_norm > 0.0 && z_norm > budget {
            budget / z_norm
        } else if z_norm > 0.0 {
            1.0
        } else {
            0.0
        };
        for i in 0..d {
            data.push(w * theta[i] + scale * z[i]);
        }
    }
    let fm = FeatureMatrix {
        data,
        rows: weights.len(),
        dim: d,
        theta_star: None,
        rho: None,
    };
    Ok(fm.with_ground_truth(theta, weights))
}

/// Edge features as the element-wise product of the endpoint node features,
/// rescaled globally by the largest row norm so every norm is at most one.
pub fn edge_features_from_nodes(graph: &Graph, node_features: &[Vec<f64>]) -> Result<FeatureMatrix> {
    if node_features.len() != graph.node_count() {
        return Err(Error::invalid(format!(
            "need {} node feature rows, got {}",
            graph.node_count(),
            node_features.len()
        )));
    }
    let d = node_features[0].len();
    if d == 0 {
        return Err(Error::invalid("node features need at least one column"));
    }
    if let Some(bad) = node_features.iter().position(|r| r.len() != d) {
        return Err(Error::invalid(format!(
            "node {} has {} feature entries, expected {d}",
            bad + 1,
            node_features[bad].len()
        )));
    }
    let mut data = Vec::with_capacity(graph.edge_count() * d);
    for &(a, b) in graph.edges() {
        for i in 0..d {
            data.push(node_features[a - 1][i] * node_features[b - 1][i]);
        }
    }
    let max_norm = (0..graph.edge_count())
        .map(|e| {
            data[e * d..(e + 1) * d]
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0f64, f64::max);
    if max_norm > 0.0 {
        data.iter_mut().for_each(|x| *x /= max_norm);
    }
    Ok(FeatureMatrix {
        data,
        rows: graph.edge_count(),
        dim: d,
        theta_star: None,
        rho: None,
    })
}

/// Parse a node-feature file: one "node_id v1 v2 ... vd" line per node,
/// '#' comments ignored. Every node of the graph must appear exactly once.
pub fn load_node_features(path: impl AsRef<Path>, node_count: usize) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_node_features(&text, &path.display().to_string(), node_count)
}

pub(crate) fn parse_node_features(
    text: &str,
    path: &str,
    node_count: usize,
) -> Result<Vec<Vec<f64>>> {
    let err = |line: usize, message: String| Error::Load {
        path: path.to_string(),
        line,
        message,
    };
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; node_count];
    let mut dim: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut fields = body.split_whitespace();
        let id: NodeId = fields
            .next()
            .unwrap()
            .parse()
            .map_err(|_| err(lineno, "bad node id".into()))?;
        if id < 1 || id > node_count {
            return Err(err(lineno, format!("node id {id} outside 1..={node_count}")));
        }
        let values: Vec<f64> = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(lineno, "bad feature value".into()))?;
        if values.is_empty() {
            return Err(err(lineno, "node line has no feature values".into()));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(err(lineno, format!("expected {d} values, got {}", values.len())));
            }
            _ => {}
        }
        if rows[id - 1].replace(values).is_some() {
            return Err(err(lineno, format!("duplicate features for node {id}")));
        }
    }
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or_else(|| Error::invalid(format!("missing features for node {}", i + 1))))
        .collect()
}
