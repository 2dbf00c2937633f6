//! `vine`: regional explanations of tabular regression models from the
//! command line.
//!
//! Exit codes: 0 success, 2 input error, 3 model oracle error, 4 internal
//! error.

mod commands;
mod config;
mod serve;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vine_core::VineError;

use crate::config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Vine(VineError),
    Input(String),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Vine(e) if e.is_input_error() => 2,
            CliError::Vine(e) if e.is_oracle_error() => 3,
            CliError::Vine(_) | CliError::Internal(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Vine(e) => write!(f, "{e}"),
            CliError::Input(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<VineError> for CliError {
    fn from(e: VineError) -> Self {
        CliError::Vine(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "vine", version, about = "Cluster ICE curves into explained VINE curves")]
struct Cli {
    /// Worker threads for per-feature parallelism (default: all cores)
    #[arg(long, global = true, env = "VINE_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full pipeline and write the JSON document for the UI
    Analyze {
        #[command(flatten)]
        run: RunArgs,
        /// Also run the ceiling, baseline and H-statistic benchmarks
        #[arg(long)]
        with_eval: bool,
    },
    /// Run one benchmark and print its table
    Eval {
        #[arg(value_enum)]
        which: Benchmark,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Pairwise H-statistic matrix as CSV
    Hstat {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write a synthetic dataset with a planted x3*x4 interaction
    Synth {
        /// Number of rows
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the UI and an exported document over local HTTP
    Serve {
        /// Exported JSON document
        doc: PathBuf,
        #[arg(long, default_value_t = 8000)]
        port: u16,
        /// Directory holding a built UI (an embedded page is used otherwise)
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Benchmark {
    Ceiling,
    Baseline,
    HstatCorr,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Input CSV with a header row
    csv: Option<PathBuf>,
    /// Target column
    #[arg(long)]
    target: Option<String>,
    /// JSON run configuration; flags take precedence over it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed for every randomized step
    #[arg(long)]
    seed: Option<u64>,
    /// Numeric columns to one-hot encode (comma separated or repeated)
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    /// Integer columns with at most this many levels are ordinal
    #[arg(long)]
    ordinal_max_cardinality: Option<usize>,
    /// Quantile grid size M
    #[arg(long)]
    grid_size: Option<usize>,
    /// Clusters per feature before merging
    #[arg(long)]
    clusters: Option<usize>,
    /// Merge predicates whose values differ by at most this fraction of the range
    #[arg(long)]
    merge_threshold: Option<f64>,
    /// Drop clusters whose explanation F1 is below this
    #[arg(long)]
    min_f1: Option<f64>,
    /// Drop clusters closer to the PDP than this DTW / max|PDP| ratio
    #[arg(long)]
    min_dtw_ratio: Option<f64>,
    /// Drop clusters with fewer members (default max(20, 2% of rows))
    #[arg(long)]
    min_cluster_size: Option<usize>,
    /// Cap on rows per oracle call
    #[arg(long)]
    max_batch_rows: Option<usize>,
    /// Rows sampled for the H-statistic
    #[arg(long)]
    sample: Option<usize>,
    /// External model: shell command speaking the CSV line protocol
    #[arg(long)]
    oracle_cmd: Option<String>,
    /// Seconds to wait for each external model reply
    #[arg(long)]
    oracle_timeout: Option<u64>,
    /// Internal GBM: number of trees
    #[arg(long)]
    n_trees: Option<usize>,
    /// Internal GBM: minimum rows per leaf
    #[arg(long)]
    min_leaf: Option<usize>,
    /// Internal GBM: learning rate
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Internal GBM: maximum tree depth
    #[arg(long)]
    max_depth: Option<usize>,
    /// Maximum ICE curves exported per VINE curve
    #[arg(long)]
    ice_sample_cap: Option<usize>,
    /// Histogram bins for non-binary features
    #[arg(long)]
    histogram_bins: Option<usize>,
}

impl RunArgs {
    fn resolve(self, jobs: Option<usize>) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        fn set<T>(slot: &mut T, v: Option<T>) {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if self.csv.is_some() {
            c.dataset = self.csv;
        }
        if self.target.is_some() {
            c.target = self.target;
        }
        if self.out.is_some() {
            c.out = self.out;
        }
        if self.oracle_cmd.is_some() {
            c.oracle_cmd = self.oracle_cmd;
        }
        if !self.categorical.is_empty() {
            c.categorical = self.categorical;
        }
        if self.min_cluster_size.is_some() {
            c.vine.filter.min_size = self.min_cluster_size;
        }
        if self.max_batch_rows.is_some() {
            c.vine.max_batch_rows = self.max_batch_rows;
        }
        if jobs.is_some() {
            c.jobs = jobs;
        }
        set(&mut c.seed, self.seed);
        set(&mut c.ordinal_max_cardinality, self.ordinal_max_cardinality);
        set(&mut c.vine.grid_size, self.grid_size);
        set(&mut c.vine.clusters, self.clusters);
        set(&mut c.vine.merge_threshold, self.merge_threshold);
        set(&mut c.vine.filter.min_f1, self.min_f1);
        set(&mut c.vine.filter.min_dtw_ratio, self.min_dtw_ratio);
        set(&mut c.h_sample, self.sample);
        set(&mut c.oracle_timeout_secs, self.oracle_timeout);
        set(&mut c.model.n_trees, self.n_trees);
        set(&mut c.model.min_leaf, self.min_leaf);
        set(&mut c.model.learning_rate, self.learning_rate);
        set(&mut c.model.max_depth, self.max_depth);
        set(&mut c.export.ice_sample_cap, self.ice_sample_cap);
        set(&mut c.export.histogram_bins, self.histogram_bins);
        c.propagate_seed();
        Ok(c)
    }
}

fn init_pool(jobs: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::Input("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let jobs = cli.jobs;
    match cli.command {
        Command::Analyze { run, with_eval } => {
            let config = run.resolve(jobs)?;
            init_pool(config.jobs)?;
            commands::analyze(&config, with_eval)
        }
        Command::Eval { which, run } => {
            let config = run.resolve(jobs)?;
            init_pool(config.jobs)?;
            commands::eval(&config, which)
        }
        Command::Hstat { run } => {
            let config = run.resolve(jobs)?;
            init_pool(config.jobs)?;
            commands::hstat(&config)
        }
        Command::Synth { n, seed, out } => commands::synth(n, seed, out.as_deref()),
        Command::Serve { doc, port, ui_dir } => serve::serve(&doc, port, ui_dir.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
