use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use tenonos_bench::{
    load_profile, resolve_objective, run_bench, run_boot, run_colocate, run_orchestrate, BenchError, BenchOptions,
    BenchmarkSuite, ColocateConfig, Format, OrchestrateOptions, ReferenceData, TreeSource, EXIT_FAILURE, EXIT_INPUT,
};
use tenonos_libgraph::{OrchestrateParams, SelectParams, Strategy};
use tenonos_rt::Scenario;

#[derive(Parser)]
#[command(name = "tenonos", version, about = "TenonOS simulator harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Mock,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportArg {
    Dot,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark suite (a file, or `builtin:<name>`).
    Bench {
        suite: String,
        #[arg(long, default_value = "tenon-paper")]
        profile: String,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Alternative reference data file.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        allow_empty: bool,
    },
    /// Simulate a static or dynamic boot.
    Boot {
        config: PathBuf,
        /// Boot the guest without the hypervisor.
        #[arg(long)]
        bare: bool,
        #[arg(long, default_value = "tenon-paper")]
        profile: String,
        #[arg(long)]
        json: bool,
    },
    /// Generate a .config for a Kconfig tree (a path, or `corpus:<name>`).
    Orchestrate {
        tree: String,
        /// Objective text, or `@file`.
        #[arg(long)]
        objective: Option<String>,
        #[arg(long, value_enum, default_value_t = StrategyArg::Mock)]
        strategy: StrategyArg,
        #[arg(long)]
        decay: Option<f64>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        max_depth: Option<usize>,
        /// JSON map from symbol to library id.
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Run one scenario bare, in Mode 1, and in Mode 1 next to a neighbor.
    Colocate {
        scenario: PathBuf,
        config: Option<PathBuf>,
        #[arg(long, default_value = "tenon-paper")]
        profile: String,
        #[arg(long)]
        json: bool,
    },
    /// Print the Lib-Graph of a Kconfig tree.
    Graph {
        tree: String,
        #[arg(long, value_enum, default_value_t = ExportArg::Dot)]
        export: ExportArg,
    },
}

fn read(path: &PathBuf) -> Result<String, BenchError> {
    std::fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.clone(), source })
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Bench { suite, profile, format, out, seed, reference, allow_empty } => {
            let suite = BenchmarkSuite::load(&suite)?;
            let refs = match reference {
                Some(p) => ReferenceData::from_file(&p)?,
                None => ReferenceData::bundled(),
            };
            let opts = BenchOptions { seed, ..BenchOptions::new(load_profile(&profile)?) };
            let report = run_bench(&suite, &refs, &opts)?;
            match out {
                Some(path) if format == Format::Csv => report.emit_csv(&path, allow_empty)?,
                Some(path) => {
                    if report.is_empty() && !allow_empty {
                        return Err(BenchError::EmptyReport.into());
                    }
                    std::fs::write(&path, report.render(format)).with_context(|| path.display().to_string())?;
                }
                None => print!("{}", report.render(format)),
            }
        }
        Command::Boot { config, bare, profile, json } => {
            let report = run_boot(&read(&config)?, &load_profile(&profile)?, bare)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.to_text());
            }
        }
        Command::Orchestrate { tree, objective, strategy, decay, threshold, max_depth, mapping, out, json } => {
            let mut select = SelectParams::default();
            select.decay = decay.unwrap_or(select.decay);
            select.threshold = threshold.unwrap_or(select.threshold);
            select.max_depth = max_depth.unwrap_or(select.max_depth);
            let mapping: Option<BTreeMap<String, String>> = match mapping {
                Some(p) => Some(serde_json::from_str(&read(&p)?).map_err(|e| BenchError::Config(format!("mapping: {e}")))?),
                None => None,
            };
            let opts = OrchestrateOptions {
                objective: objective.as_deref().map(resolve_objective).transpose()?,
                strategy: match strategy {
                    StrategyArg::Mock => Strategy::Mock,
                    StrategyArg::Remote => Strategy::Remote,
                },
                params: OrchestrateParams { select, ..OrchestrateParams::default() },
                mapping,
                out_dir: out,
            };
            let outcome = run_orchestrate(&TreeSource::parse(&tree)?, &opts)?;
            if json {
                println!("{}", outcome.report_json());
            } else {
                print!("{}", outcome.dotconfig);
                let r = &outcome.orchestration.report;
                eprintln!(
                    "{}: {:?}, utility {:.4}, {} candidates, {} pruned, {} repairs, {} us",
                    outcome.tree,
                    r.validation,
                    r.utility,
                    r.candidates.len(),
                    r.pruned.len(),
                    r.repairs.len(),
                    outcome.end_to_end_us
                );
                if r.low_confidence {
                    eprintln!("warning: the objective matched no symbol");
                }
            }
            if !outcome.valid() {
                return Ok(EXIT_FAILURE);
            }
        }
        Command::Colocate { scenario, config, profile, json } => {
            let s = Scenario::from_json(&read(&scenario)?)
                .map_err(|e| BenchError::ScenarioParse { name: scenario.display().to_string(), reason: e.to_string() })?;
            let cfg = match config {
                Some(p) => ColocateConfig::from_json(&read(&p)?)?,
                None => ColocateConfig::default(),
            };
            let report = run_colocate(&s, &cfg, &load_profile(&profile)?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.to_table());
            }
        }
        Command::Graph { tree, export: ExportArg::Dot } => {
            let parsed = TreeSource::parse(&tree)?.parse_graph()?;
            for d in &parsed.diagnostics {
                eprintln!("warning: {d:?}");
            }
            print!("{}", parsed.graph.to_dot());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<BenchError>().map_or(EXIT_INPUT, BenchError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
