//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use histaxo_core::RootMode;
use histaxo_pipeline::ProviderMode;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "histaxo",
    version,
    about = "Build and evaluate hierarchical event taxonomies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract or load events and induce a taxonomy bottom-up.
    Induce {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        input: EventInput,
    },
    /// Deduplicate and expand an induced taxonomy top-down.
    Expand {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        taxonomy: PathBuf,
    },
    /// Insert candidate events from frequency, topic and relation sources.
    Enrich {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        taxonomy: PathBuf,
        /// Events with their domains, as written by `induce`.
        #[arg(long)]
        events: PathBuf,
        #[command(flatten)]
        sources: SourceArgs,
    },
    /// Induce, expand and enrich in one run.
    Pipeline {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        input: EventInput,
        #[command(flatten)]
        sources: SourceArgs,
    },
    /// Compute the metric report for a taxonomy.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Held-out events for coverage and significance.
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::PerDomain)]
        mode: ModeArg,
        /// Also write the report here; `.md` selects markdown, anything else JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Row name in the report table.
        #[arg(long, default_value = "histaxo")]
        name: String,
        /// Skip path granularity instead of calling the judge.
        #[arg(long)]
        no_judge: bool,
    },
    /// Print structural statistics of a taxonomy.
    Stats {
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::PerDomain)]
        mode: ModeArg,
        #[arg(long, default_value = "histaxo")]
        name: String,
        #[arg(long, value_enum, default_value_t = Format::Md)]
        format: Format,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the similarity threshold everywhere it is used.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Serve every provider call from the deterministic mock.
    #[arg(long, conflicts_with = "live")]
    pub mock: bool,
    /// Call the configured providers.
    #[arg(long)]
    pub live: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixture file or directory for the mock.
    #[arg(long, requires = "mock")]
    pub fixtures: Option<PathBuf>,
    /// Exact run directory; must not exist or be empty.
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    /// Parent of generated run directories.
    #[arg(long, default_value = "runs")]
    pub runs_root: PathBuf,
}

impl RunArgs {
    pub fn provider_mode(&self) -> Result<ProviderMode, CliError> {
        match (self.mock, self.live) {
            (true, false) => Ok(ProviderMode::Mock {
                seed: self.seed,
                fixtures: self.fixtures.clone(),
            }),
            (false, true) => Ok(ProviderMode::Live),
            _ => Err(CliError::Usage("pass --mock or --live".into())),
        }
    }
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct EventInput {
    /// Pre-extracted events (JSON lines).
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Corpus root holding `<book>/<chapter>.txt`.
    #[arg(long)]
    pub chapters: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    #[arg(long)]
    pub topics: Option<PathBuf>,
    #[arg(long)]
    pub relations: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    PerDomain,
    Global,
}

impl From<ModeArg> for RootMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PerDomain => RootMode::PerDomain,
            ModeArg::Global => RootMode::Global,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Md,
    Json,
}
