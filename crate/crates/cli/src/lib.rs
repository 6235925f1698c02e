//! `mtest` command-line tool: p-values, probability grids, simulations,
//! power curves, table-space counts and timing runs.
//!
//! Output is CSV by default and one JSON object per command with
//! `--format json`. Exit codes: 0 success, 1 I/O failure, 2 usage error,
//! 3 capacity error, 4 numeric error.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

mod commands;
pub mod report;
pub mod table_text;

pub use table_text::{parse_table, ParseError};

/// Environment variable overriding the enumeration capacity cap.
pub const MAX_TABLES_ENV: &str = "MTEST_MAX_TABLES";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] mtest::Error),
    #[error("table: {0}")]
    Table(#[from] ParseError),
    #[error("{0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(mtest::Error::Argument(_)) | CliError::Table(_) | CliError::Usage(_) => 2,
            CliError::Core(mtest::Error::Capacity(_)) => 3,
            CliError::Core(mtest::Error::Numeric(_)) => 4,
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SidedArg {
    Two,
    One,
}

impl From<SidedArg> for mtest::Sided {
    fn from(s: SidedArg) -> Self {
        match s {
            SidedArg::Two => mtest::Sided::Two,
            SidedArg::One => mtest::Sided::One,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridSided {
    Two,
    One,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HypothesisArg {
    Null,
    Alternative,
    OneSidedNull,
}

impl From<HypothesisArg> for mtest::montecarlo::Hypothesis {
    fn from(h: HypothesisArg) -> Self {
        use mtest::montecarlo::Hypothesis;
        match h {
            HypothesisArg::Null => Hypothesis::NullShared,
            HypothesisArg::Alternative => Hypothesis::AlternativeIndependent,
            HypothesisArg::OneSidedNull => Hypothesis::OneSidedNull,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Workload {
    All,
    #[value(name = "2x2-400")]
    TwoByTwo400,
    #[value(name = "2x5-16")]
    TwoByFive16,
}

#[derive(Debug, Parser)]
#[command(name = "mtest", version, about = "Exact unconditional m-test for contingency tables")]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Worker threads for enumeration and simulation (output does not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// p-value of an observed table.
    P(PArgs),
    /// Every probability of a 2 x 2 table space.
    Grid(GridArgs),
    /// Simulated tables, optionally with their p-values.
    Simulate(SimulateArgs),
    /// True and false positive rates of several tests on simulated tables.
    Power(PowerArgs),
    /// Size of a table space.
    Count(CountArgs),
    /// Time the reference workloads.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["table", "input"]))]
pub struct PArgs {
    /// Table as "r1c1,r1c2;r2c1,r2c2"; row 1 holds successes.
    #[arg(long)]
    pub table: Option<String>,
    /// CSV file with a `table` column (e.g. `simulate` output).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SidedArg::Two)]
    pub sided: SidedArg,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Column marginals n1,n2.
    #[arg(long, value_delimiter = ',', required = true)]
    pub marginals: Vec<usize>,
    #[arg(long, value_enum, default_value_t = GridSided::Both)]
    pub sided: GridSided,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub marginals: Vec<usize>,
    /// Number of outcome rows.
    #[arg(long, default_value_t = 2)]
    pub rows: usize,
    /// Number of simulated tables.
    #[arg(short = 'N', long = "n-sims")]
    pub n_sims: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = HypothesisArg::Null)]
    pub hypothesis: HypothesisArg,
    /// Also report each table's m-test p-value.
    #[arg(long)]
    pub pvalues: bool,
    #[arg(long, value_enum, default_value_t = SidedArg::Two)]
    pub sided: SidedArg,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub marginals: Vec<usize>,
    /// Simulations under each of the null and alternative models.
    #[arg(short = 'N', long = "n-sims")]
    pub n_sims: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "mtest,fisher,barnard")]
    pub tests: Vec<mtest::montecarlo::TestKind>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1")]
    pub alphas: Vec<f64>,
    /// Nuisance grid size for Barnard's test.
    #[arg(long, default_value_t = mtest::baselines::DEFAULT_BARNARD_GRID)]
    pub grid_points: usize,
    /// Emit the full ROC curves instead of the per-alpha table.
    #[arg(long)]
    pub roc: bool,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub marginals: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    pub rows: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Workload::All)]
    pub workload: Workload,
}

/// Parse `args` (including the program name) and execute, writing results
/// to `out` and diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    use clap::CommandFactory;
                    let _ = write!(err, "{}\n{}", e.render(), Cli::command().render_help());
                    2
                }
            };
        }
    };
    match commands::execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
