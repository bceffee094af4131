//! Command-line interface: `run`, `sweep`, `metrics`, and `topology`
//! subcommands. Exit codes: 0 success, 1 configuration or argument error,
//! 2 capacity error (instance too large for an exact computation).

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiment::{run_experiment, run_sweep, ExperimentConfig};
use crate::graph::{build_topology, load_graph, ProbabilityWeights, TopologyKind};
use crate::metrics::metrics_report;

#[derive(Parser, Debug)]
#[command(
    name = "icsb",
    about = "Influence-maximization semi-bandit simulator under the independent cascade model",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute an experiment described by a config file.
    Run(RunArgs),
    /// Run the config at several graph sizes and fit the regret exponent.
    Sweep(SweepArgs),
    /// Emit the complexity-metric report for a graph and weights.
    Metrics(MetricsArgs),
    /// Emit a generated topology as an edge list.
    Topology(TopologyArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output prefix override; writes <out>.csv and <out>.meta.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated node counts, e.g. 8,12,16,24,32.
    #[arg(long = "L-values", value_delimiter = ',', required = true)]
    l_values: Vec<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON sweep summary here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// Topology kind (bar|star|ray|grid|complete|line|random_tree).
    #[arg(long, conflicts_with = "graph_file")]
    kind: Option<String>,
    /// Node count for --kind.
    #[arg(long = "L")]
    l: Option<usize>,
    /// Seed-set cardinality.
    #[arg(long = "K", default_value_t = 1)]
    k: usize,
    /// Edge-list file; a third column supplies the weights.
    #[arg(long)]
    graph_file: Option<PathBuf>,
    /// Constant edge weight when the graph file carries none.
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    /// Monte-Carlo samples for sampled estimation on large instances.
    #[arg(long, default_value_t = 1000)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TopologyArgs {
    #[arg(long)]
    kind: String,
    #[arg(long = "L")]
    l: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: &mut dyn Write, target: &Option<PathBuf>, content: &str) -> Result<()> {
    match target {
        Some(path) => {
            std::fs::write(path, content)?;
            writeln!(out, "wrote {}", path.display())?;
        }
        None => out.write_all(content.as_bytes())?,
    }
    Ok(())
}

fn cmd_run(args: RunArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(prefix) = args.out {
        cfg.out = Some(prefix);
    }
    let log = run_experiment(&cfg)?;
    match &cfg.out {
        Some(prefix) => {
            writeln!(out, "wrote {}.csv and {}.meta.json", prefix.display(), prefix.display())?;
            writeln!(
                out,
                "runs = {}, rounds = {}, mean final cumulative regret = {}",
                cfg.runs,
                cfg.rounds,
                crate::experiment::fmt_sig(log.mean_final_regret())
            )?;
        }
        None => out.write_all(log.to_csv().as_bytes())?,
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let outcome = run_sweep(&cfg, &args.l_values)?;
    let json = serde_json::to_string_pretty(&outcome.summary)
        .map_err(|e| Error::config(format!("summary serialization failed: {e}")))?;
    emit(out, &args.out, &(json + "\n"))?;
    if args.out.is_some() {
        writeln!(
            out,
            "fitted exponent = {:.4}, r^2 = {:.4}",
            outcome.summary.fit.exponent, outcome.summary.fit.r_squared
        )?;
    }
    Ok(())
}

fn cmd_metrics(args: MetricsArgs, out: &mut dyn Write) -> Result<()> {
    let (graph, file_weights) = match (&args.kind, &args.graph_file) {
        (Some(kind), None) => {
            let l = args
                .l
                .ok_or_else(|| Error::config("--kind requires --L".to_string()))?;
            (build_topology(kind.parse()?, l, args.seed)?, None)
        }
        (None, Some(path)) => load_graph(path)?,
        _ => return Err(Error::config("exactly one of --kind or --graph-file".to_string())),
    };
    if !(0.0..=1.0).contains(&args.omega) {
        return Err(Error::config("--omega must lie in [0, 1]".to_string()));
    }
    let weights = match file_weights {
        Some(w) => w,
        None => ProbabilityWeights::constant(graph.edge_count(), args.omega)?,
    };
    if args.k < 1 || args.k > graph.node_count() {
        return Err(Error::config(format!(
            "--K must lie in 1..={}",
            graph.node_count()
        )));
    }
    let report = metrics_report(&graph, args.k, &weights, args.mc_samples, args.seed)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::config(format!("report serialization failed: {e}")))?;
    emit(out, &args.out, &(json + "\n"))
}

fn cmd_topology(args: TopologyArgs, out: &mut dyn Write) -> Result<()> {
    let kind: TopologyKind = args.kind.parse()?;
    let graph = build_topology(kind, args.l, args.seed)?;
    emit(out, &args.out, &graph.to_edge_list())
}

/// Entry point shared by the binary and the CLI tests.
pub fn cli_main(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders --help/--version as "errors" with success status.
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 1;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args, out),
        Command::Sweep(args) => cmd_sweep(args, out),
        Command::Metrics(args) => cmd_metrics(args, out),
        Command::Topology(args) => cmd_topology(args, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Capacity(_) => 2,
                _ => 1,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_cli(args: &[&str]) -> (i32, String, String) {
        let argv: Vec<String> = std::iter::once("icsb".to_string())
            .chain(args.iter().map(|s| s.to_string()))
            .collect();
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = cli_main(&argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn topology_star_prints_six_edges() {
        let (code, out, _) = run_cli(&["topology", "--kind", "star", "--L", "4"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], "1 2");
    }

    #[test]
    fn metrics_bar_reports_unit_worst_case() {
        let (code, out, _) = run_cli(&[
            "metrics", "--kind", "bar", "--L", "8", "--K", "1", "--omega", "1.0",
        ]);
        assert_eq!(code, 0);
        let report: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((report["c_g"].as_f64().unwrap() - 1.0).abs() < 1e-9);
        assert!((report["c_star"].as_f64().unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(report["e_star"].as_u64().unwrap(), 2);
    }

    #[test]
    fn missing_config_exits_one() {
        let (code, _, err) = run_cli(&["run", "--config", "does-not-exist.toml"]);
        assert_eq!(code, 1);
        assert!(err.contains("error"));
    }

    #[test]
    fn bad_arguments_exit_one() {
        let (code, _, _) = run_cli(&["topology", "--kind", "noodle", "--L", "4"]);
        assert_eq!(code, 1);
        let (code, _, _) = run_cli(&["metrics", "--kind", "star"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn oversized_metrics_fall_back_to_sampled_mode() {
        // C(200, 3) is over the exact-enumeration cap.
        let (code, out, err) = run_cli(&[
            "metrics", "--kind", "random_tree", "--L", "200", "--K", "3", "--omega", "0.2",
            "--mc-samples", "200",
        ]);
        assert_eq!(code, 0, "{err}");
        let report: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(report["c_star_is_lower_bound"], serde_json::Value::Bool(true));
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_cli(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("topology"));
    }
}
