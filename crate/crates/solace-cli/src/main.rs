//! Command-line front end: scenario configs in, CSV results and SVG
//! arrival charts out.

mod chart;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use solace::engine::{
    batch_map, result_csv, run, summarize_finals, summary_csv, trace_csv, EngineError,
    MetricsFrame,
};

use crate::chart::ChartSpec;
use crate::config::{load_config, parse_seeds};

/// Process failures, sorted by exit code: 1 bad config or arguments, 2 bad
/// environment data, 3 failure during simulation or output writing.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Environment(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Environment(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<EngineError> for CliError {
    /// Engine-side config rejections stay config errors; everything else
    /// that goes wrong mid-simulation is a runtime failure.
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::BadConfig(msg) => CliError::Config(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "solace", version, about = "Seismic evacuation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its result and trace CSVs.
    Run {
        /// Scenario config file (TOML).
        config: PathBuf,
        /// Pick a named entry from the config's scenario list.
        #[arg(long)]
        scenario: Option<String>,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override a config value by dotted path, e.g. scenario.intensity=8.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Print the fully resolved config instead of running.
        #[arg(long)]
        print_effective_config: bool,
    },
    /// Simulate scenarios over a seed range and write a summary CSV.
    Batch {
        /// Scenario config file (TOML).
        config: PathBuf,
        /// Comma-separated scenario names; defaults to the whole list.
        #[arg(long, value_delimiter = ',')]
        scenarios: Vec<String>,
        /// Seed or inclusive range, e.g. 7 or 1..30.
        #[arg(long)]
        seeds: String,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Parallel workers; SOLACE_THREADS caps this.
        #[arg(long)]
        workers: Option<usize>,
        /// Override a config value by dotted path.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Print the fully resolved config instead of running.
        #[arg(long)]
        print_effective_config: bool,
    },
    /// Draw arrival-fraction curves from result CSVs as one SVG chart.
    Chart {
        /// Result CSV files from run or batch.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Comma-separated categories to plot.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        series: Vec<String>,
        /// Output SVG path.
        #[arg(long, default_value = "chart.svg")]
        out: PathBuf,
        /// Chart title; defaults to the input file names.
        #[arg(long)]
        title: Option<String>,
    },
    /// Check a config file and its environment without simulating.
    Validate {
        /// Scenario config file (TOML).
        config: PathBuf,
        /// Override a config value by dotted path.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        // Bad invocations are config errors like any other.
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            config,
            scenario,
            seed,
            out,
            set,
            print_effective_config,
        } => cmd_run(&config, scenario, seed, &out, &set, print_effective_config),
        Command::Batch {
            config,
            scenarios,
            seeds,
            out,
            workers,
            set,
            print_effective_config,
        } => cmd_batch(
            &config,
            &scenarios,
            &seeds,
            &out,
            workers,
            &set,
            print_effective_config,
        ),
        Command::Chart {
            inputs,
            series,
            out,
            title,
        } => cmd_chart(ChartSpec {
            inputs,
            series,
            out,
            title,
        }),
        Command::Validate { config, set } => cmd_validate(&config, &set),
    }
}

fn cmd_run(
    config_path: &std::path::Path,
    scenario: Option<String>,
    seed: Option<u64>,
    out: &std::path::Path,
    set: &[String],
    print_effective_config: bool,
) -> Result<(), CliError> {
    let mut cfg = load_config(config_path, set)?;
    if let Some(name) = scenario {
        cfg.scenario = cfg.scenario_named(&name)?.clone();
    }
    if let Some(seed) = seed {
        cfg.scenario.seed = seed;
    }
    if print_effective_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let spec = cfg.run_spec(cfg.scenario.clone());
    spec.validate().map_err(CliError::from)?;
    let env = cfg.load_environment()?;

    let result = run(&env, &spec)?;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", out.display())))?;
    let base = out.join(format!("{}_{}", spec.scenario.name, spec.scenario.seed));
    let result_path = base.with_extension("csv");
    let trace_path = out.join(format!(
        "{}_{}_trace.csv",
        spec.scenario.name, spec.scenario.seed
    ));
    write_file(&result_path, &result_csv(&result))?;
    write_file(&trace_path, &trace_csv(&result))?;
    println!("wrote {} and {}", result_path.display(), trace_path.display());
    Ok(())
}

fn cmd_batch(
    config_path: &std::path::Path,
    scenario_names: &[String],
    seeds: &str,
    out: &std::path::Path,
    workers: Option<usize>,
    set: &[String],
    print_effective_config: bool,
) -> Result<(), CliError> {
    let cfg = load_config(config_path, set)?;
    if print_effective_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let scenarios = if scenario_names.is_empty() {
        if cfg.scenarios.is_empty() {
            vec![cfg.scenario.clone()]
        } else {
            cfg.scenarios.clone()
        }
    } else {
        scenario_names
            .iter()
            .map(|name| cfg.scenario_named(name).cloned())
            .collect::<Result<_, _>>()?
    };
    let seeds = parse_seeds(seeds)?;

    let mut specs = Vec::with_capacity(scenarios.len() * seeds.len());
    for scenario in &scenarios {
        for &seed in &seeds {
            let mut scenario = scenario.clone();
            scenario.seed = seed;
            let spec = cfg.run_spec(scenario);
            spec.validate().map_err(CliError::from)?;
            specs.push(spec);
        }
    }
    let env = cfg.load_environment()?;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", out.display())))?;

    // Each run's CSVs are written inside the map so only (scenario, seed,
    // final frame) digests accumulate.
    type Digest = (String, u64, MetricsFrame);
    let digests: Vec<Result<Digest, CliError>> =
        batch_map(&env, &specs, effective_workers(workers)?, |r| {
            let base = out.join(format!("{}_{}", r.scenario, r.seed));
            write_file(&base.with_extension("csv"), &result_csv(&r))?;
            write_file(
                &out.join(format!("{}_{}_trace.csv", r.scenario, r.seed)),
                &trace_csv(&r),
            )?;
            let last = *r.frames.last().expect("runs always have frames");
            Ok((r.scenario, r.seed, last))
        })?;
    let digests: Vec<Digest> = digests.into_iter().collect::<Result<_, _>>()?;

    let rows = summarize_finals(digests.iter().map(|(s, _, f)| (s.as_str(), f)));
    let summary_path = out.join("summary.csv");
    write_file(&summary_path, &summary_csv(&rows))?;
    println!(
        "wrote {} runs and {}",
        digests.len(),
        summary_path.display()
    );
    Ok(())
}

fn cmd_chart(spec: ChartSpec) -> Result<(), CliError> {
    let svg = chart::render(&spec)?;
    if let Some(dir) = spec.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("creating {}: {e}", dir.display())))?;
    }
    write_file(&spec.out, &svg)?;
    println!("wrote {}", spec.out.display());
    Ok(())
}

fn cmd_validate(config_path: &std::path::Path, set: &[String]) -> Result<(), CliError> {
    let cfg = load_config(config_path, set)?;
    let mut names = Vec::new();
    for scenario in std::iter::once(&cfg.scenario).chain(&cfg.scenarios) {
        cfg.run_spec(scenario.clone())
            .validate()
            .map_err(CliError::from)?;
        names.push(scenario.name.as_str());
    }
    println!("config ok: scenarios {}", names.join(", "));
    let env = cfg.load_environment()?;
    println!(
        "environment ok: {} buildings, {} nodes, {} edges, {} safe areas",
        env.buildings.len(),
        env.graph.nodes.len(),
        env.graph.edges.len(),
        env.safe_areas.len()
    );
    Ok(())
}

/// Worker count for batch: the flag, else all available cores, capped by
/// the SOLACE_THREADS environment variable when set.
fn effective_workers(flag: Option<usize>) -> Result<usize, CliError> {
    let requested = flag.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    let capped = match std::env::var("SOLACE_THREADS") {
        Ok(raw) => {
            let cap: usize = raw.parse().map_err(|_| {
                CliError::Config(format!(
                    "SOLACE_THREADS must be a positive integer, got `{raw}`"
                ))
            })?;
            if cap == 0 {
                return Err(CliError::Config(
                    "SOLACE_THREADS must be a positive integer, got `0`".into(),
                ));
            }
            requested.min(cap)
        }
        Err(_) => requested,
    };
    Ok(capped.max(1))
}

fn write_file(path: &std::path::Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}
