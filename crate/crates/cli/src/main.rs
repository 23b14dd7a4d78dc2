use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rpcfuzz::app::{
    check_schema, parse_seed_list, run_compare, run_fuzz, run_replay, AppError, FuzzConfig, ReplayConfig,
    SchemaFormat, TargetConfig,
};
use rpcfuzz::experiment::comparison_table;
use rpcfuzz::harness::harness_catalog;
use rpcfuzz::schema::{to_json_string, Severity};
use rpcfuzz::search::Algorithm;

/// `println!` that exits quietly when stdout is closed, e.g. by `| head`.
macro_rules! out {
    ($($arg:tt)*) => {{
        let mut stdout = std::io::stdout().lock();
        if writeln!(stdout, $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

/// Search-based fuzzer for RPC APIs.
#[derive(Parser)]
#[command(name = "rpcfuzz", version)]
struct Cli {
    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a test suite against a harness or an HTTP endpoint.
    Fuzz(FuzzArgs),
    /// Parse and validate a schema.
    Parse(ParseArgs),
    /// Re-run a generated suite and report execution-class mismatches.
    Replay(ReplayArgs),
    /// List the built-in simulated services.
    ListHarness {
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Compare MIO with Random on built-in harnesses over several seeds.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportArg {
    Harness,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Thrift,
    Json,
}

impl From<FormatArg> for SchemaFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Thrift => SchemaFormat::Thrift,
            FormatArg::Json => SchemaFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Mio,
    Random,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Mio => Algorithm::Mio,
            AlgorithmArg::Random => Algorithm::Random,
        }
    }
}

#[derive(Args)]
struct TargetArgs {
    /// Schema file. Defaults to the harness's own IDL; required for http.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Schema format [default: from extension, .json is json, else thrift].
    #[arg(long, value_enum)]
    schema_format: Option<FormatArg>,
    /// Where calls go.
    #[arg(long, value_enum, default_value = "harness")]
    transport: TransportArg,
    /// Built-in harness for the harness transport.
    #[arg(long, default_value = "ncs")]
    harness: String,
    /// Endpoint URL for the http transport.
    #[arg(long)]
    endpoint: Option<String>,
    /// URL receiving a POST before each test (http transport).
    #[arg(long)]
    reset_url: Option<String>,
    /// Per-call timeout for the http transport.
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
    /// JSON rows replacing the harness's seed data, `{"table": [row, ...]}`.
    #[arg(long)]
    init_data: Option<PathBuf>,
}

impl TargetArgs {
    fn target(&self) -> Result<TargetConfig, AppError> {
        match self.transport {
            TransportArg::Harness => {
                if self.endpoint.is_some() || self.reset_url.is_some() {
                    return Err(AppError::Config("--endpoint and --reset-url need --transport http".into()));
                }
                Ok(TargetConfig::Harness {
                    name: self.harness.clone(),
                })
            }
            TransportArg::Http => {
                let endpoint = self
                    .endpoint
                    .clone()
                    .ok_or_else(|| AppError::Config("--transport http needs --endpoint".into()))?;
                Ok(TargetConfig::Http {
                    endpoint,
                    reset_url: self.reset_url.clone(),
                    timeout_ms: self.timeout_ms,
                })
            }
        }
    }
}

#[derive(Args)]
struct FuzzArgs {
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long, value_enum, default_value = "mio")]
    algorithm: AlgorithmArg,
    /// Budget in RPC calls, logins included.
    #[arg(long, default_value_t = 10_000)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "rpcfuzz-out")]
    out: PathBuf,
    /// Most actions in one test.
    #[arg(long, default_value_t = 10)]
    max_actions: usize,
    /// JSON array of auth settings [default: the harness's own, none for http].
    #[arg(long)]
    auth_config: Option<PathBuf>,
    /// Built-in result categorizer, e.g. status-field.
    #[arg(long)]
    categorizer: Option<String>,
    /// JSON object mapping `Interface.function.param` to seed values.
    #[arg(long)]
    seed_catalog: Option<PathBuf>,
}

#[derive(Args)]
struct ParseArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, value_enum)]
    schema_format: Option<FormatArg>,
    /// Print the normalized JSON schema.
    #[arg(long)]
    emit_json: bool,
}

#[derive(Args)]
struct ReplayArgs {
    /// Machine suite to replay.
    #[arg(long, default_value = "rpcfuzz-out/suite.json")]
    suite: PathBuf,
    #[command(flatten)]
    target: TargetArgs,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Comma-separated harness names.
    #[arg(long, default_value = "ncs,scs", value_delimiter = ',')]
    harness: Vec<String>,
    /// Seeds per algorithm: `7`, `1,2,3` or `1..10`.
    #[arg(long, default_value = "1..10")]
    seeds: String,
    #[arg(long, default_value_t = 10_000)]
    budget: u64,
    /// Also write the full report as JSON.
    #[arg(long)]
    json_out: Option<PathBuf>,
}

fn fuzz(a: FuzzArgs) -> Result<i32, AppError> {
    let config = FuzzConfig {
        schema: a.target.schema.clone(),
        schema_format: a.target.schema_format.map(Into::into),
        target: a.target.target()?,
        algorithm: a.algorithm.into(),
        budget: a.budget,
        seed: a.seed,
        out: a.out,
        max_actions: a.max_actions,
        auth_config: a.auth_config,
        categorizer: a.categorizer,
        seed_catalog: a.seed_catalog,
        init_data: a.target.init_data,
    };
    let run = run_fuzz(&config)?;
    let m = &run.manifest;
    out!(
        "{} tests, {}/{} targets covered, {} faults, {} calls -> {}",
        m.suite_tests,
        m.targets_covered,
        m.targets_total,
        m.faults_flagged,
        m.calls_executed,
        config.out.display()
    );
    if let Some(reason) = &m.aborted {
        eprintln!("search stopped early: {reason}");
    }
    Ok(run.exit_code())
}

fn parse(a: ParseArgs) -> Result<i32, AppError> {
    let (schema, diags) = check_schema(&a.schema, a.schema_format.map(Into::into))?;
    for d in &diags {
        eprintln!("{d}");
    }
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Ok(1);
    }
    if a.emit_json {
        out!("{}", to_json_string(&schema).trim_end());
    } else {
        for i in &schema.interfaces {
            out!("{}: {} functions", i.interface_id, i.functions.len());
        }
        out!("{} types, sha256 {}", schema.type_defs.len(), schema.content_hash());
    }
    Ok(0)
}

fn replay(a: ReplayArgs) -> Result<i32, AppError> {
    let config = ReplayConfig {
        suite: a.suite,
        schema: a.target.schema.clone(),
        schema_format: a.target.schema_format.map(Into::into),
        target: a.target.target()?,
        init_data: a.target.init_data.clone(),
    };
    let report = run_replay(&config)?;
    if a.json {
        out!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        for m in &report.mismatches {
            let at = m.action.map(|i| format!(" action {i}")).unwrap_or_default();
            out!("mismatch {}{at}: expected {}, observed {}", m.test, m.expected, m.observed);
        }
        for f in &report.assertion_failures {
            out!("assertion {f}");
        }
        out!(
            "{} tests replayed, {} ER-class mismatches, {} assertion failures",
            report.tests,
            report.mismatches.len(),
            report.assertion_failures.len()
        );
    }
    Ok(if report.mismatches.is_empty() { 0 } else { 1 })
}

fn list_harness(json: bool) -> i32 {
    let catalog = harness_catalog();
    if json {
        out!("{}", serde_json::to_string_pretty(&catalog).expect("catalog serializes"));
    } else {
        for h in catalog {
            out!("{:<6} {:<12} {:<12} {:>3}  {}", h.name, h.label, h.interface, h.functions, h.description);
        }
    }
    0
}

fn compare(a: CompareArgs) -> Result<i32, AppError> {
    let seeds = parse_seed_list(&a.seeds).map_err(AppError::Config)?;
    let report = run_compare(&a.harness, &seeds, a.budget)?;
    out!("{}", comparison_table(&report.comparisons).trim_end());
    if let Some(path) = &a.json_out {
        let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        std::fs::write(path, text).map_err(|source| AppError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Fuzz(a) => fuzz(a),
        Command::Parse(a) => parse(a),
        Command::Replay(a) => replay(a),
        Command::ListHarness { json } => Ok(list_harness(json)),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
