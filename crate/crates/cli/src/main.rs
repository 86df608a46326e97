//! `spatial-cqa`: consistency checks, repairs, cores and consistent answers
//! over spatial instances, plus the synthetic generator and benchmark.

mod cmd;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const SEED_ENV: &str = "SPATIAL_CQA_SEED";

#[derive(Parser, Debug)]
#[command(name = "spatial-cqa", version, about = "Inconsistency-tolerant spatial query engine")]
struct Cli {
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// RNG seed; the SPATIAL_CQA_SEED environment variable takes precedence.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Geojson,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Geojson => "geojson",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Route {
    Auto,
    Core,
    Repairs,
}

/// Schema, data, constraints and tolerances shared by most commands.
#[derive(Args, Debug, Clone)]
pub struct Inputs {
    /// Schema JSON.
    #[arg(long)]
    schema: PathBuf,
    /// Data file as `RELATION=PATH`, or a bare path named after its relation.
    #[arg(long, required = true)]
    data: Vec<String>,
    /// Constraint JSON (one object or an array).
    #[arg(long)]
    sics: Option<PathBuf>,
    /// Buffer distance; defaults to 1e-3 of the extent diagonal.
    #[arg(long)]
    d: Option<f64>,
    /// Area tolerance; defaults to 1e-9 of the extent area.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Cap on explored repair-search nodes.
    #[arg(long)]
    limit_nodes: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List constraint violations; exits with 1 when any are found.
    Check {
        #[command(flatten)]
        inputs: Inputs,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Enumerate minimal repairs into numbered GeoJSON files and a manifest.
    Repair {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        out: PathBuf,
        /// Export every consistent leaf, not only the minimal ones.
        #[arg(long)]
        all_leaves: bool,
        /// Branch on every violation instead of the first one.
        #[arg(long)]
        all_orderings: bool,
    },
    /// Compute the core, directly or by intersecting the minimal repairs.
    Core {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Geojson)]
        format: Format,
        #[arg(long, value_enum, default_value_t = Route::Auto)]
        via: Route,
    },
    /// Consistent answers to one or more queries.
    Cqa {
        #[command(flatten)]
        inputs: Inputs,
        /// Query JSON; repeat for several queries.
        #[arg(long, required = true)]
        query: Vec<PathBuf>,
        /// Output directory; answers go to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, value_enum, default_value_t = Route::Auto)]
        via: Route,
        /// Compute the core once, reuse it for every query, and write it out.
        #[arg(long)]
        materialize: bool,
        /// Add the relative area change of each answer geometry.
        #[arg(long)]
        explain: bool,
    },
    /// Emit SQL views computing the core.
    Sqlgen {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        sics: PathBuf,
        /// Distance text placed in Buffer(...).
        #[arg(long, default_value = "d")]
        d: String,
        /// Carry all attributes rather than only the key.
        #[arg(long)]
        all_attributes: bool,
        #[arg(long)]
        materialize: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic instance with injected conflicts.
    Gen {
        #[arg(long)]
        n: usize,
        /// Percentage of tuples in conflict.
        #[arg(long, default_value_t = 10.0)]
        pct: f64,
        /// equals, iintersects or intersects.
        #[arg(long, default_value = "iintersects")]
        mode: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Time core computation and query answering over generated data.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = vec![1000usize, 2000, 4000, 8000])]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![10.0f64])]
        pcts: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec!["equals".to_string(), "iintersects".into(), "intersects".into()])]
        modes: Vec<String>,
        /// Window side as a fraction of the extent side.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.01f64])]
        window_fracs: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        windows: usize,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long)]
        no_joins: bool,
        /// CSV report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn effective_seed(flag: u64) -> anyhow::Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| anyhow::anyhow!("{SEED_ENV}={v} is not an unsigned integer")),
        Err(_) => Ok(flag),
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let threads = cli.threads.unwrap_or(0);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let parallel = threads != 1;
    let seed = effective_seed(cli.seed)?;
    match cli.command {
        Command::Check { inputs, report } => cmd::check(&inputs, report.as_deref()),
        Command::Repair { inputs, out, all_leaves, all_orderings } => {
            cmd::repair(&inputs, &out, all_leaves, all_orderings, parallel)
        }
        Command::Core { inputs, out, format, via } => cmd::core(&inputs, &out, format, via, parallel),
        Command::Cqa { inputs, query, out, format, via, materialize, explain } => cmd::cqa(
            &inputs,
            &cmd::CqaArgs { queries: query, out, format, via, materialize, explain, parallel, threads },
        ),
        Command::Sqlgen { schema, sics, d, all_attributes, materialize, out } => {
            cmd::sqlgen(&schema, &sics, d, all_attributes, materialize, out.as_deref())
        }
        Command::Gen { n, pct, mode, out, format } => cmd::gen(n, pct, &mode, seed, &out, format),
        Command::Bench { sizes, pcts, modes, window_fracs, windows, runs, no_joins, out } => {
            let modes = modes.iter().map(|m| m.parse()).collect::<Result<Vec<_>, _>>()?;
            let cfg = spatial_cqa::bench::BenchConfig {
                sizes,
                pcts,
                modes,
                window_fracs,
                windows,
                runs,
                seed,
                joins: !no_joins,
            };
            cmd::bench(&cfg, out.as_deref())
        }
    }
}
