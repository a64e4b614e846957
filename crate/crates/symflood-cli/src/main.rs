//! Command-line runner: executes experiment spec files or built-in
//! experiments, writes summary CSVs and SVG figures, and re-renders
//! figures from existing CSVs.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use symflood::experiments::{
    built_in, emit_plots, list_builtins, run_experiment_with, ExperimentSpec, ResultTable,
};

#[derive(Parser)]
#[command(
    name = "symflood",
    version,
    about = "Deterministic simulator for symbol-synchronous pulse flooding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the master seed of the experiment
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the number of packets per sweep cell
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Directory for CSV and SVG output
    #[arg(long, global = true, default_value = "results")]
    out_dir: PathBuf,
    /// Worker thread count (default: all cores; affects wall time only,
    /// never results)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also dump per-cell packet traces as JSON lines
    #[arg(long, global = true)]
    dump_traces: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML spec file
    Run {
        /// Path to the experiment spec
        spec: PathBuf,
    },
    /// List the built-in experiments
    ListExperiments,
    /// Run a built-in experiment by id
    Reproduce {
        /// One of the ids shown by list-experiments
        id: String,
    },
    /// Render the figure for an existing summary CSV
    Plot {
        /// Path to a CSV written by run or reproduce
        csv: PathBuf,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("building the thread pool")?;
    }
    match &cli.command {
        Command::Run { spec } => {
            let spec = ExperimentSpec::load(spec)
                .with_context(|| format!("loading {}", spec.display()))?;
            execute(spec, &cli)
        }
        Command::ListExperiments => {
            for (id, description) in list_builtins() {
                println!("{id:<6} {description}");
            }
            Ok(())
        }
        Command::Reproduce { id } => {
            let Some(spec) = built_in(id) else {
                bail!("unknown experiment {id:?}; see list-experiments");
            };
            execute(spec, &cli)
        }
        Command::Plot { csv } => plot_csv(csv, &cli.out_dir),
    }
}

fn execute(mut spec: ExperimentSpec, cli: &Cli) -> Result<()> {
    if let Some(seed) = cli.seed {
        spec.base_config.rng_seed = seed;
    }
    if let Some(trials) = cli.trials {
        spec.n_packets = trials;
    }
    spec.validate()?;
    let trace_dir = cli
        .dump_traces
        .then(|| cli.out_dir.join(format!("{}_traces", spec.id)));
    let table = run_experiment_with(&spec, trace_dir.as_deref())
        .with_context(|| format!("running experiment {:?}", spec.id))?;
    let mut written = table.write_files(&cli.out_dir)?;
    written.extend(emit_plots(&table, &cli.out_dir)?);
    for path in &written {
        println!("wrote {}", path.display());
    }
    if let Some(dir) = &trace_dir {
        println!("wrote traces under {}", dir.display());
    }
    Ok(())
}

fn plot_csv(csv: &Path, out_dir: &Path) -> Result<()> {
    let text = std::fs::read_to_string(csv)
        .with_context(|| format!("reading {}", csv.display()))?;
    let mut table = ResultTable::parse_csv(&text)?;
    // A single-row table plots latency vs hops when its hop table
    // sits next to the CSV.
    if table.rows.len() == 1 {
        let hops_path = csv.with_file_name(format!("{}_hops.csv", table.experiment_id));
        if let Ok(hops_text) = std::fs::read_to_string(&hops_path) {
            table.rows[0].per_hop = ResultTable::parse_hops_csv(&hops_text)?;
        }
    }
    for path in emit_plots(&table, out_dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
