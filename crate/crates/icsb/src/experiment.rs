//! Experiment harness: configuration, seeded multi-run execution of the
//! learning loop, scaled-regret accounting, power-law exponent estimation,
//! and CSV/JSON persistence.
//!
//! Randomness is derived per (master seed, role) so two experiments that
//! share a master seed also share their graph, weights, features, and
//! baseline, and a re-run is byte-identical.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{default_c, run_round, AgentState};
use crate::cascade::{cascade_on_realization, sample_realization, spread_exact, spread_mc};
use crate::error::{Error, Result};
use crate::features::{
    edge_features_from_nodes, load_node_features, synth_features, tabular_features, FeatureMatrix,
};
use crate::graph::{
    build_topology, influenced_count, load_graph, Graph, ProbabilityWeights, SeedSet, TopologyKind,
};
use crate::metrics::{metrics_report, MetricsReport};
use crate::oracle::{OracleSpec, Solver, SpreadEval, TieBreak};
use crate::seed;

fn default_runs() -> usize {
    1
}
fn default_sigma() -> f64 {
    1.0
}
fn default_mc_samples() -> usize {
    1000
}
fn default_oracle_spread() -> SpreadEval {
    SpreadEval::Exact
}
fn default_c_scale() -> f64 {
    1.0
}

/// Confidence-radius choice: the theoretical default or an explicit value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CChoice {
    Eq4,
    Explicit(f64),
}

impl Default for CChoice {
    fn default() -> Self {
        CChoice::Eq4
    }
}

impl Serialize for CChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CChoice::Eq4 => s.serialize_str("eq4"),
            CChoice::Explicit(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for CChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(CChoice::Explicit(v)),
            Raw::Text(t) if t == "eq4" => Ok(CChoice::Eq4),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "c must be a number or \"eq4\", got \"{t}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightModelKey {
    Constant,
    Uniform,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureModeKey {
    Tabular,
    Synthetic,
    NodeFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKey {
    Exact,
    Greedy,
}

/// Per-round regret accounting mode.
///
/// `Hybrid` scores each round against the fixed expected baseline
/// F* = f(S*, w̄); `Coupled` draws one realization per round and evaluates
/// both the baseline seed set and the chosen seed set on it, which is the
/// literal definition of per-round scaled regret.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegretMode {
    #[default]
    Hybrid,
    Coupled,
}

/// Flat experiment configuration; field names are exactly the config-file
/// keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologyKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    pub k: usize,
    pub rounds: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    pub weight_model: WeightModelKey,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_high: Option<f64>,
    pub feature_mode: FeatureModeKey,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_feature_file: Option<PathBuf>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub c: CChoice,
    /// Multiplier applied to the theoretical radius when `c = "eq4"`;
    /// ignored for explicit values.
    #[serde(default = "default_c_scale")]
    pub c_scale: f64,
    pub oracle: OracleKey,
    /// Spread evaluation inside the enumeration oracle: exact or Monte-Carlo.
    #[serde(default = "default_oracle_spread")]
    pub oracle_spread: SpreadEval,
    /// Rule for exactly-equal oracle maxima; `random` is seeded and
    /// reproducible.
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub regret_mode: RegretMode,
    /// Override for the regret scale; defaults to the oracle's αγ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::config(msg.to_string()));
        match (&self.topology, &self.graph_file) {
            (None, None) => return fail("one of `topology` or `graph_file` is required"),
            (Some(_), Some(_)) => return fail("`topology` and `graph_file` are exclusive"),
            (Some(_), None) if self.l.is_none() => return fail("`topology` requires `l`"),
            _ => {}
        }
        if self.rounds < 1 {
            return fail("`rounds` must be at least 1");
        }
        if self.runs < 1 {
            return fail("`runs` must be at least 1");
        }
        if self.k < 1 {
            return fail("`k` must be at least 1");
        }
        if let Some(l) = self.l {
            if self.k > l {
                return fail("`k` cannot exceed `l`");
            }
        }
        match self.weight_model {
            WeightModelKey::Constant => match self.omega {
                Some(w) if (0.0..=1.0).contains(&w) => {}
                Some(_) => return fail("`omega` must lie in [0, 1]"),
                None => return fail("weight_model = \"constant\" requires `omega`"),
            },
            WeightModelKey::Uniform => match (self.weight_low, self.weight_high) {
                (Some(a), Some(b)) if (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b) && a <= b => {}
                (Some(_), Some(_)) => return fail("uniform bounds must satisfy 0 <= low <= high <= 1"),
                _ => return fail("weight_model = \"uniform\" requires `weight_low` and `weight_high`"),
            },
            WeightModelKey::File => {
                if self.graph_file.is_none() {
                    return fail("weight_model = \"file\" requires `graph_file` with a probability column");
                }
            }
        }
        match self.feature_mode {
            FeatureModeKey::Synthetic => match self.feature_dim {
                Some(d) if d >= 2 => {}
                _ => return fail("feature_mode = \"synthetic\" requires `feature_dim` >= 2"),
            },
            FeatureModeKey::NodeFile => {
                if self.node_feature_file.is_none() {
                    return fail("feature_mode = \"node_file\" requires `node_feature_file`");
                }
            }
            FeatureModeKey::Tabular => {}
        }
        if !(self.sigma > 0.0) {
            return fail("`sigma` must be positive");
        }
        if let CChoice::Explicit(c) = self.c {
            if !(c >= 0.0) {
                return fail("`c` must be nonnegative");
            }
        }
        if !(self.c_scale > 0.0) {
            return fail("`c_scale` must be positive");
        }
        if self.oracle == OracleKey::Greedy && self.mc_samples < 1 {
            return fail("greedy oracle requires `mc_samples` >= 1");
        }
        if self.oracle_spread == SpreadEval::Mc && self.mc_samples < 1 {
            return fail("oracle_spread = \"mc\" requires `mc_samples` >= 1");
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) {
                return fail("`eta` must be positive");
            }
        }
        Ok(())
    }
}

/// One CSV row of the regret log.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub run: usize,
    pub round: usize,
    pub seeds: SeedSet,
    pub reward: usize,
    pub regret: f64,
    pub cum_regret: f64,
}

/// Sidecar metadata written next to the CSV.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentMeta {
    pub config: ExperimentConfig,
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
    pub f_star: f64,
    pub baseline_seeds: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub c_used: f64,
    pub feature_dim: usize,
    pub metrics: MetricsReport,
    pub wall_clock_secs: f64,
}

/// Full result of one experiment: per-round records plus metadata.
#[derive(Debug, Clone)]
pub struct RegretLog {
    pub records: Vec<RoundRecord>,
    pub meta: ExperimentMeta,
}

/// Format with six significant digits, plain notation.
pub(crate) fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

impl RegretLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("run,round,seed_set,reward,regret,cum_regret\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.run,
                r.round,
                r.seeds.display(),
                r.reward,
                fmt_sig(r.regret),
                fmt_sig(r.cum_regret)
            ));
        }
        out
    }

    /// Write `<prefix>.csv` and `<prefix>.meta.json`.
    pub fn write(&self, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
        let csv_path = prefix.with_extension("csv");
        let json_path = prefix.with_extension("meta.json");
        if let Some(dir) = csv_path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        std::fs::write(&csv_path, self.to_csv())?;
        let json = serde_json::to_string_pretty(&self.meta)
            .map_err(|e| Error::config(format!("metadata serialization failed: {e}")))?;
        std::fs::write(&json_path, json)?;
        Ok((csv_path, json_path))
    }

    /// Final cumulative regret of each run, in run order.
    pub fn final_regret_per_run(&self) -> Vec<f64> {
        let runs = self.records.iter().map(|r| r.run).max().map_or(0, |m| m + 1);
        let mut finals = vec![0.0; runs];
        for r in &self.records {
            finals[r.run] = r.cum_regret;
        }
        finals
    }

    pub fn mean_final_regret(&self) -> f64 {
        let finals = self.final_regret_per_run();
        finals.iter().sum::<f64>() / finals.len() as f64
    }

    /// Most frequent seed set over the last `window` rounds of each run;
    /// count ties go to the lexicographically smaller set.
    pub fn modal_seeds(&self, window: usize) -> Vec<SeedSet> {
        let runs = self.records.iter().map(|r| r.run).max().map_or(0, |m| m + 1);
        let rounds = self.records.iter().map(|r| r.round).max().unwrap_or(0);
        let cutoff = rounds.saturating_sub(window);
        (0..runs)
            .map(|run| {
                let mut counts: std::collections::BTreeMap<&SeedSet, usize> = Default::default();
                for r in self.records.iter().filter(|r| r.run == run && r.round > cutoff) {
                    *counts.entry(&r.seeds).or_insert(0) += 1;
                }
                counts
                    .iter()
                    .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
                    .map(|(s, _)| (*s).clone())
                    .expect("runs are nonempty")
            })
            .collect()
    }
}

struct Setup {
    graph: Graph,
    weights: ProbabilityWeights,
    features: FeatureMatrix,
    oracle_spec: OracleSpec,
    solver: Solver,
    c_used: f64,
    eta: f64,
    f_star: f64,
    baseline: SeedSet,
}

fn build_setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let (graph, file_weights) = match (&cfg.topology, &cfg.graph_file) {
        (Some(kind), None) => (build_topology(*kind, cfg.l.unwrap(), cfg.seed)?, None),
        (None, Some(path)) => {
            let (g, w) = load_graph(path)?;
            if let Some(l) = cfg.l {
                if l != g.node_count() {
                    return Err(Error::config(format!(
                        "`l` = {l} but {} has {} nodes",
                        path.display(),
                        g.node_count()
                    )));
                }
            }
            (g, w)
        }
        _ => unreachable!("validated"),
    };
    if cfg.k > graph.node_count() {
        return Err(Error::config("`k` cannot exceed the node count"));
    }

    let weights = match cfg.weight_model {
        WeightModelKey::Constant => {
            ProbabilityWeights::constant(graph.edge_count(), cfg.omega.unwrap())?
        }
        WeightModelKey::Uniform => {
            let (low, high) = (cfg.weight_low.unwrap(), cfg.weight_high.unwrap());
            let mut rng = seed::stream(cfg.seed, &[seed::TAG_WEIGHTS]);
            ProbabilityWeights::from_vec(
                (0..graph.edge_count())
                    .map(|_| low + (high - low) * rng.gen::<f64>())
                    .collect(),
            )?
        }
        WeightModelKey::File => file_weights.ok_or_else(|| {
            Error::config("graph file carries no probability column for weight_model = \"file\"")
        })?,
    };

    let features = match cfg.feature_mode {
        FeatureModeKey::Tabular => tabular_features(&graph, Some(&weights)),
        FeatureModeKey::Synthetic => synth_features(
            &weights,
            cfg.feature_dim.unwrap(),
            &mut seed::stream(cfg.seed, &[seed::TAG_FEATURES]),
        )?,
        FeatureModeKey::NodeFile => {
            let rows = load_node_features(cfg.node_feature_file.as_ref().unwrap(), graph.node_count())?;
            edge_features_from_nodes(&graph, &rows)?
        }
    };

    let oracle_spec = match cfg.oracle {
        OracleKey::Exact => OracleSpec {
            mc_samples: cfg.mc_samples,
            ..OracleSpec::exact()
        },
        OracleKey::Greedy => OracleSpec::greedy(cfg.mc_samples),
    };
    let solver = Solver::with_options(&graph, cfg.k, &oracle_spec, cfg.oracle_spread, cfg.tie_break)?;

    let c_used = match cfg.c {
        CChoice::Explicit(v) => v,
        CChoice::Eq4 => {
            cfg.c_scale
                * default_c(
                    features.dim(),
                    cfg.rounds,
                    graph.edge_count(),
                    graph.node_count(),
                    cfg.k,
                    features.theta_norm_bound(),
                )
        }
    };
    let eta = cfg.eta.unwrap_or_else(|| oracle_spec.eta());

    // The baseline is measurement apparatus: the enumeration oracle always
    // evaluates it with exact spreads, even when per-round calls use
    // Monte-Carlo estimates.
    let baseline_solver = match &solver {
        Solver::Exact { solver, .. } => Solver::Exact {
            solver: solver.clone(),
            spread: SpreadEval::Exact,
            mc_samples: cfg.mc_samples,
            tie_break: TieBreak::Lexicographic,
        },
        greedy => greedy.clone(),
    };
    let baseline = baseline_solver.solve(
        &graph,
        cfg.k,
        &weights,
        seed::mix(cfg.seed, &[seed::TAG_BASELINE, 0]),
    )?;
    let f_star = match spread_exact(&graph, &baseline, &weights) {
        Ok(v) => v,
        Err(Error::Capacity(_)) => {
            let mut rng = seed::stream(cfg.seed, &[seed::TAG_BASELINE, 1]);
            spread_mc(&graph, &baseline, &weights, cfg.mc_samples.max(1), &mut rng)?.mean
        }
        Err(other) => return Err(other),
    };

    Ok(Setup {
        graph,
        weights,
        features,
        oracle_spec,
        solver,
        c_used,
        eta,
        f_star,
        baseline,
    })
}

/// Run the configured experiment: one agent per run, `rounds` rounds each,
/// scaled-regret accounting against the oracle baseline on the true weights.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RegretLog> {
    cfg.validate()?;
    let started = Instant::now();
    let setup = build_setup(cfg)?;
    let Setup {
        graph,
        weights,
        features,
        oracle_spec,
        solver,
        c_used,
        eta,
        f_star,
        baseline,
    } = &setup;

    let mut records = Vec::with_capacity(cfg.runs * cfg.rounds);
    for run in 0..cfg.runs {
        let mut agent = AgentState::new(features.dim(), cfg.sigma, *c_used)?;
        let mut cum = 0.0;
        for round in 1..=cfg.rounds {
            let mut rng = seed::stream(cfg.seed, &[seed::TAG_ROUND, run as u64, round as u64]);
            let (outcome, seeds, baseline_term) = match cfg.regret_mode {
                RegretMode::Hybrid => {
                    let (outcome, seeds) = run_round(
                        &mut agent,
                        graph,
                        cfg.k,
                        features,
                        solver,
                        weights,
                        &mut rng,
                    )?;
                    (outcome, seeds, *f_star)
                }
                RegretMode::Coupled => {
                    let ucb = agent.compute_ucb(features)?;
                    let eval_seed: u64 = rng.gen();
                    let seeds = solver.solve(graph, cfg.k, &ucb.weights, eval_seed)?;
                    let realization = sample_realization(weights, &mut rng);
                    let outcome = cascade_on_realization(graph, &seeds, &realization);
                    let base = influenced_count(graph, &realization, baseline) as f64;
                    agent.update(&outcome, features)?;
                    (outcome, seeds, base)
                }
            };
            let regret = baseline_term - outcome.reward as f64 / eta;
            cum += regret;
            records.push(RoundRecord {
                run,
                round,
                seeds,
                reward: outcome.reward,
                regret,
                cum_regret: cum,
            });
        }
    }

    let metrics = metrics_report(&setup.graph, cfg.k, &setup.weights, cfg.mc_samples, cfg.seed)?;
    let meta = ExperimentMeta {
        config: cfg.clone(),
        alpha: oracle_spec.alpha,
        gamma: oracle_spec.gamma,
        eta: *eta,
        f_star: *f_star,
        baseline_seeds: baseline.display(),
        rho: features.rho(),
        c_used: *c_used,
        feature_dim: features.dim(),
        metrics,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    let log = RegretLog { records, meta };
    if let Some(prefix) = &cfg.out {
        log.write(prefix)?;
    }
    Ok(log)
}

/// Ordinary least squares of log(regret) on log(L).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LogLogFit {
    pub exponent: f64,
    /// Natural-log intercept; exp of this is the power-law amplitude.
    pub log_intercept: f64,
    pub r_squared: f64,
}

pub fn fit_loglog(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 2 {
        return Err(Error::invalid("log-log fit needs at least 2 points"));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(l, r) in points {
        if !(l > 0.0) {
            return Err(Error::invalid(format!("nonpositive size {l}")));
        }
        if !(r > 0.0) {
            return Err(Error::invalid(format!(
                "nonpositive regret {r}; a power-law fit needs positive values"
            )));
        }
        xs.push(l.ln());
        ys.push(r.ln());
    }
    let distinct = {
        let mut sorted = xs.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted.dedup();
        sorted.len()
    };
    if distinct < 2 {
        return Err(Error::invalid("log-log fit needs at least 2 distinct sizes"));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fit = intercept + slope * x;
            (y - fit) * (y - fit)
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y) * (y - mean_y)).sum();
    let r_squared = if ss_tot > 1e-300 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(LogLogFit {
        exponent: slope,
        log_intercept: intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub l: usize,
    pub mean_final_regret: f64,
    pub per_run_final: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub points: Vec<SweepPoint>,
    pub fit: LogLogFit,
}

pub struct SweepOutcome {
    pub summary: SweepSummary,
    pub logs: Vec<RegretLog>,
}

/// Run the base experiment at each size in `l_values` (seeds derived per
/// size) and fit the regret growth exponent.
pub fn run_sweep(base: &ExperimentConfig, l_values: &[usize]) -> Result<SweepOutcome> {
    if l_values.len() < 2 {
        return Err(Error::invalid("sweep needs at least two sizes"));
    }
    let mut points = Vec::new();
    let mut logs = Vec::new();
    for &l in l_values {
        let mut cfg = base.clone();
        cfg.l = Some(l);
        cfg.seed = seed::mix(base.seed, &[l as u64]);
        cfg.out = None;
        cfg.validate()?;
        let log = run_experiment(&cfg)?;
        points.push(SweepPoint {
            l,
            mean_final_regret: log.mean_final_regret(),
            per_run_final: log.final_regret_per_run(),
        });
        logs.push(log);
    }
    let fit = fit_loglog(
        &points
            .iter()
            .map(|p| (p.l as f64, p.mean_final_regret))
            .collect::<Vec<_>>(),
    )?;
    Ok(SweepOutcome {
        summary: SweepSummary { points, fit },
        logs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            topology: Some(TopologyKind::Star),
            graph_file: None,
            l: Some(4),
            k: 1,
            rounds: 5,
            runs: 2,
            seed: 9,
            weight_model: WeightModelKey::Constant,
            omega: Some(0.8),
            weight_low: None,
            weight_high: None,
            feature_mode: FeatureModeKey::Tabular,
            feature_dim: None,
            node_feature_file: None,
            sigma: 1.0,
            c: CChoice::Explicit(1.0),
            oracle: OracleKey::Exact,
            oracle_spread: SpreadEval::Exact,
            tie_break: TieBreak::Lexicographic,
            c_scale: 1.0,
            mc_samples: 200,
            regret_mode: RegretMode::Hybrid,
            eta: None,
            out: None,
        }
    }

    #[test]
    fn config_parsing_and_validation() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
topology = "star"
l = 8
k = 1
rounds = 100
runs = 3
seed = 42
weight_model = "constant"
omega = 0.8
feature_mode = "tabular"
c = "eq4"
oracle = "exact"
"#,
        )
        .unwrap();
        assert_eq!(cfg.topology, Some(TopologyKind::Star));
        assert_eq!(cfg.c, CChoice::Eq4);
        assert_eq!(cfg.sigma, 1.0);

        let explicit = ExperimentConfig::from_toml_str(
            r#"
topology = "ray"
l = 8
k = 1
rounds = 10
weight_model = "constant"
omega = 0.5
feature_mode = "tabular"
c = 0.25
oracle = "exact"
"#,
        )
        .unwrap();
        assert_eq!(explicit.c, CChoice::Explicit(0.25));

        for bad in [
            "k = 1\nrounds = 1\nweight_model = \"constant\"\nomega = 0.5\nfeature_mode = \"tabular\"\noracle = \"exact\"",
            "topology = \"star\"\nl = 4\nk = 9\nrounds = 1\nweight_model = \"constant\"\nomega = 0.5\nfeature_mode = \"tabular\"\noracle = \"exact\"",
            "topology = \"star\"\nl = 4\nk = 1\nrounds = 1\nweight_model = \"constant\"\nomega = 1.5\nfeature_mode = \"tabular\"\noracle = \"exact\"",
            "topology = \"star\"\nl = 4\nk = 1\nrounds = 1\nweight_model = \"constant\"\nomega = 0.5\nfeature_mode = \"synthetic\"\noracle = \"exact\"",
        ] {
            assert!(ExperimentConfig::from_toml_str(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn full_seed_budget_has_identically_zero_regret() {
        let mut cfg = tiny_config();
        cfg.k = 4;
        cfg.rounds = 10;
        let log = run_experiment(&cfg).unwrap();
        for r in &log.records {
            assert_eq!(r.reward, 4);
            assert_eq!(r.regret, 0.0);
            assert_eq!(r.seeds.as_slice(), &[1, 2, 3, 4]);
        }
    }

    #[test]
    fn deterministic_star_learns_after_one_round() {
        // ω = 1 with c = 0: after the first cascade from the hub every edge
        // has been observed once, the oracle still ranks the hub first, and
        // realized regret is exactly zero from round 1 on.
        let mut cfg = tiny_config();
        cfg.omega = Some(1.0);
        cfg.c = CChoice::Explicit(0.0);
        cfg.rounds = 8;
        let log = run_experiment(&cfg).unwrap();
        for r in &log.records {
            assert!(r.round == 1 || r.regret == 0.0, "round {} regret {}", r.round, r.regret);
            assert_eq!(r.seeds.as_slice(), &[1]);
        }
    }

    #[test]
    fn csv_roundtrip_and_accounting() {
        let cfg = tiny_config();
        let log = run_experiment(&cfg).unwrap();
        let csv = log.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "run,round,seed_set,reward,regret,cum_regret");
        // Recompute prefix sums from the regret column; agreement is up to
        // the 6-significant-digit print rounding of each term.
        let mut cum_by_run = std::collections::BTreeMap::new();
        for (line, record) in lines.zip(&log.records) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 6);
            let run: usize = fields[0].parse().unwrap();
            let regret: f64 = fields[4].parse().unwrap();
            let cum: f64 = fields[5].parse().unwrap();
            let acc = cum_by_run.entry(run).or_insert(0.0);
            *acc += regret;
            let slack = 1e-5 * (1.0 + acc.abs()) * log.records.len() as f64;
            assert!((*acc - cum).abs() < slack, "prefix sum mismatch");
            let reward: usize = fields[3].parse().unwrap();
            assert!((cfg.k..=cfg.l.unwrap()).contains(&reward));
            assert!(record.regret <= log.meta.f_star - cfg.k as f64 / log.meta.eta + 1e-9);
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let cfg = tiny_config();
        let a = run_experiment(&cfg).unwrap().to_csv();
        let b = run_experiment(&cfg).unwrap().to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn coupled_mode_couples_the_baseline() {
        let mut cfg = tiny_config();
        cfg.regret_mode = RegretMode::Coupled;
        cfg.omega = Some(1.0);
        cfg.c = CChoice::Explicit(0.0);
        let log = run_experiment(&cfg).unwrap();
        // Under deterministic weights both seed sets influence everyone, so
        // coupled regret is exactly zero whenever the agent picks the
        // baseline-equivalent set.
        for r in &log.records {
            assert_eq!(r.regret, 0.0);
        }
    }

    #[test]
    fn fit_recovers_exact_power_law() {
        let points: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0]
            .iter()
            .map(|&l| (l, 3.0 * l * l))
            .collect();
        let fit = fit_loglog(&points).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-9);
        assert!((fit.log_intercept.exp() - 3.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_interpolates_two_points() {
        let fit = fit_loglog(&[(2.0, 5.0), (8.0, 11.0)]).unwrap();
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let predicted = (fit.log_intercept + fit.exponent * 8.0f64.ln()).exp();
        assert!((predicted - 11.0).abs() < 1e-9);
    }

    #[test]
    fn fit_rejects_nonpositive_regret() {
        assert!(fit_loglog(&[(2.0, 1.0)]).is_err());
        assert!(fit_loglog(&[(2.0, 1.0), (4.0, 0.0)]).is_err());
        assert!(fit_loglog(&[(2.0, 1.0), (4.0, -3.0)]).is_err());
        assert!(fit_loglog(&[(2.0, 1.0), (2.0, 2.0)]).is_err());
    }

    #[test]
    fn sig_digit_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(25.8), "25.8000");
        assert_eq!(fmt_sig(-25.8), "-25.8000");
        assert_eq!(fmt_sig(0.00123456789), "0.00123457");
        assert_eq!(fmt_sig(123456.0), "123456");
    }

    #[test]
    fn sweep_runs_and_fits() {
        let mut cfg = tiny_config();
        cfg.rounds = 30;
        cfg.runs = 2;
        let outcome = run_sweep(&cfg, &[4, 6, 8]).unwrap();
        assert_eq!(outcome.summary.points.len(), 3);
        assert_eq!(outcome.logs.len(), 3);
        assert!(outcome.summary.fit.exponent.is_finite());
    }
}
