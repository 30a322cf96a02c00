use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pairrank_core::eval::MetricMode;
use pairrank_core::labeling::StdMode;
use pairrank_core::Method;
use pairrank_survey::Strategy;

#[derive(Debug, Parser)]
#[command(name = "pairrank", version, about = "Rate items from pairwise comparisons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate comparisons from a synthetic Bradley-Terry world.
    Simulate(SimulateArgs),
    /// Fit one method on all records and write its score table.
    Score(ScoreArgs),
    /// Train/test evaluation over several random splits.
    Evaluate(EvaluateArgs),
    /// Evaluate every cell of a parameter grid and report the best.
    Grid(GridArgs),
    /// Label scored items safe, unsafe or neutral.
    Label(LabelArgs),
    /// Run the survey HTTP service.
    Serve(ServeArgs),
    /// Print a score table with normalized values, highest first.
    Dump(DumpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Elo,
    Trueskill,
    Co,
    Lsr,
    Gp,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Elo => Method::Elo,
            MethodArg::Trueskill => Method::TrueSkill,
            MethodArg::Co => Method::Co,
            MethodArg::Lsr => Method::Lsr,
            MethodArg::Gp => Method::Gp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Binary,
    Ternary,
}

impl From<ModeArg> for MetricMode {
    fn from(m: ModeArg) -> MetricMode {
        match m {
            ModeArg::Binary => MetricMode::Binary,
            ModeArg::Ternary => MetricMode::Ternary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StdArg {
    Population,
    Sample,
}

impl From<StdArg> for StdMode {
    fn from(m: StdArg) -> StdMode {
        match m {
            StdArg::Population => StdMode::Population,
            StdArg::Sample => StdMode::Sample,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Uniform,
    Uncertainty,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::Uniform => Strategy::Uniform,
            StrategyArg::Uncertainty => Strategy::Uncertainty,
        }
    }
}

/// `name=value` with a numeric value.
pub fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    let v = v.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Comparison file (CSV `a,b,outcome[,timestamp,session]` or JSONL).
    #[arg(short, long)]
    pub input: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Catalog manifest listing every item, including uncompared ones.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MethodArgs {
    #[arg(short, long, value_enum)]
    pub method: MethodArg,
    /// Parameter override `name=value`; repeatable.
    #[arg(short = 'p', long = "param", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// JSON object of parameter overrides, as written by `grid --best`.
    /// `--param` entries take precedence.
    #[arg(long)]
    pub params_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Comma-separated split seeds.
    #[arg(long, value_delimiter = ',', default_values_t = pairrank_core::eval::DEFAULT_SEEDS)]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = pairrank_core::eval::DEFAULT_TEST_FRACTION)]
    pub test_fraction: f64,
    /// `binary` drops test ties; `ternary` scores all three outcomes.
    #[arg(long, value_enum, default_value = "binary")]
    pub mode: ModeArg,
}

#[derive(Debug, Args)]
pub struct ReportFormat {
    /// JSON instead of a text table.
    #[arg(long, conflicts_with = "csv")]
    pub json: bool,
    /// CSV with one row per report.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 50)]
    pub items: usize,
    /// Number of comparisons.
    #[arg(short, long, default_value_t = 5000)]
    pub n: usize,
    /// Standard deviation of the true scores.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 0.1)]
    pub tie_rate: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Output format; guessed from the extension, CSV on stdout.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Also write the true scores as `item,score` CSV.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Min-max scale scores to [0, 1].
    #[arg(long)]
    pub normalize: bool,
    /// JSON instead of CSV.
    #[arg(long)]
    pub json: bool,
    /// Write the CO linear program listing to this file.
    #[arg(long)]
    pub dump_lp: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub report: ReportFormat,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Grid axis `name=v1,v2,...`; repeatable. The method's default grid
    /// is used when omitted.
    #[arg(short, long = "grid")]
    pub grid: Vec<String>,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub report: ReportFormat,
    /// Write the best cell's parameters as a JSON object.
    #[arg(long)]
    pub best: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Score CSV as written by `score`.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Half-width of the neutral band in standard deviations.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Prior standard deviation. When given, items whose `sigma` column is
    /// above `sigma_filter_ratio * sigma0` are left out.
    #[arg(long)]
    pub sigma0: Option<f64>,
    #[arg(long, default_value_t = 5.0 / 6.0)]
    pub sigma_filter_ratio: f64,
    #[arg(long = "std", value_enum, default_value = "population")]
    pub std_mode: StdArg,
    /// Leave neutral items out of the output.
    #[arg(long)]
    pub drop_neutral: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "PAIRRANK_DATA_DIR")]
    pub data_dir: PathBuf,
    /// Catalog manifest; needed on first start only.
    #[arg(long, env = "PAIRRANK_CATALOG")]
    pub catalog: Option<PathBuf>,
    /// Directory served under `/images`; defaults to the catalog's.
    #[arg(long, env = "PAIRRANK_IMAGE_DIR")]
    pub image_dir: Option<PathBuf>,
    #[arg(long, env = "PAIRRANK_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Pair selection when a request names none.
    #[arg(long, env = "PAIRRANK_STRATEGY", value_enum, default_value = "uniform")]
    pub strategy: StrategyArg,
    /// Seconds before an unanswered pair is released.
    #[arg(long, env = "PAIRRANK_IDLE_TIMEOUT", default_value_t = 1800)]
    pub idle_timeout: u64,
    /// Seed for pair selection; random when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    /// Score CSV as written by `score`.
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long)]
    pub json: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}
