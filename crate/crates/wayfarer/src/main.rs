use std::path::PathBuf;

use clap::{Parser, Subcommand};

use wayfarer::bench::{emit_dot, reproduce_table3, run_sweep, to_csv, ExperimentDesign};
use wayfarer::graph::{build_fixture_illustrative, erdos_renyi, ErdosRenyiConfig, GraphInstance};
use wayfarer::oracle::{clairvoyant_exact, OracleCaps};
use wayfarer::policy::{PolicyParams, StandardPolicy};
use wayfarer::sim::{run_episode, EpisodeConfig};

/// Bayesian traversal of graphs with unknown edge costs and node rewards.
#[derive(Parser)]
#[command(name = "wayfarer", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a connected Erdős–Rényi instance and print it as JSON.
    Gen {
        /// Number of nodes.
        #[arg(long)]
        n: usize,
        /// Edge probability.
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Episode step budget stored on the instance.
        #[arg(long, default_value_t = 500)]
        horizon: usize,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one policy episode on an instance and print the log as JSON.
    Run {
        /// Instance JSON path; the built-in illustrative fixture when omitted.
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Policy spec: M, UCB:lambda=1, HP:alpha=1,H=3[,solver=exhaustive],
        /// SC:beta=100[,V=2E].
        #[arg(long, default_value = "M")]
        policy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the perfect-information optimum exactly and print it as JSON.
    Oracle {
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000_000)]
        max_expansions: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the factorial sweep and emit the result CSV.
    Sweep {
        /// Design JSON; the full default factorial when omitted.
        #[arg(long)]
        design: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; WAYFARER_PARALLELISM or all cores when omitted.
        #[arg(long)]
        parallelism: Option<usize>,
        /// Record wall-clock per episode (makes output nondeterministic).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce the illustrative-fixture results table.
    Table3,
    /// Render an episode over an instance as GraphViz DOT.
    Dot {
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value = "M")]
        policy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_instance(path: &Option<PathBuf>) -> Result<GraphInstance, Box<dyn std::error::Error>> {
    match path {
        Some(p) => Ok(GraphInstance::from_json(&std::fs::read_to_string(p)?)?),
        None => Ok(build_fixture_illustrative()),
    }
}

fn write_out(out: &Option<PathBuf>, text: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Gen {
            n,
            p,
            seed,
            horizon,
            out,
        } => {
            let inst = erdos_renyi(
                n,
                p,
                seed,
                ErdosRenyiConfig {
                    horizon,
                    ..ErdosRenyiConfig::default()
                },
            )?;
            write_out(&out, &(inst.to_json() + "\n"))?;
        }
        Command::Run {
            instance,
            policy,
            seed,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let params: PolicyParams = policy.parse()?;
            let mut pol = StandardPolicy::new(params, seed);
            let log = run_episode(&inst, &mut pol, &EpisodeConfig::default())?;
            write_out(&out, &(log.to_json() + "\n"))?;
        }
        Command::Oracle {
            instance,
            max_expansions,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let result = clairvoyant_exact(
                &inst,
                OracleCaps {
                    max_expansions,
                    ..OracleCaps::default()
                },
            )?;
            let walk: Vec<usize> = result.walk.iter().map(|n| n.0).collect();
            let doc = serde_json::json!({
                "value": result.value,
                "walk": walk,
                "expansions": result.expansions,
                "proved": result.proved,
            });
            write_out(&out, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
        }
        Command::Sweep {
            design,
            seed,
            parallelism,
            timing,
            out,
        } => {
            let mut design = match design {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                None => ExperimentDesign::default(),
            };
            if let Some(seed) = seed {
                design.master_seed = seed;
            }
            let threads = parallelism.or_else(|| {
                std::env::var("WAYFARER_PARALLELISM")
                    .ok()
                    .and_then(|v| v.parse().ok())
            });
            let rows = match threads {
                Some(t) => rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()?
                    .install(|| run_sweep(&design, timing))?,
                None => run_sweep(&design, timing)?,
            };
            write_out(&out, &to_csv(&rows))?;
        }
        Command::Table3 => {
            let report = reproduce_table3()?;
            print!("{report}");
        }
        Command::Dot {
            instance,
            policy,
            seed,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let params: PolicyParams = policy.parse()?;
            let mut pol = StandardPolicy::new(params, seed);
            let log = run_episode(&inst, &mut pol, &EpisodeConfig::default())?;
            write_out(&out, &emit_dot(&log, &inst))?;
        }
    }
    Ok(())
}
