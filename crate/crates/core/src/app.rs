//! Command implementations shared by the CLI and tests: load inputs, pick a
//! transport, run, and write artifacts.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::Serialize;

use crate::executor::{HttpJsonTransport, Transport, DEFAULT_HTTP_TIMEOUT};
use crate::experiment::{compare, run_sweep, sweep_jobs, Comparison, SweepResult};
use crate::fitness::{builtin_categorizer, TargetKind, BUILTIN_CATEGORIZERS};
use crate::genes::SeedCatalog;
use crate::harness::{build_harness, SimulatedService, HARNESS_NAMES};
use crate::schema::{load_json_schema, parse_thrift_idl, validate_schema, AuthSpec, Diagnostic, RpcSchema, SchemaError};
use crate::search::{run_search, Algorithm, SearchConfig, SearchInputs, SearchOutcome};
use crate::writer::{replay_suite, write_suite, MachineSuite, ReplayError, ReplayReport, WriterConfig, STATS_FILE};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "rpcfuzz-manifest/1";

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Schema { path: String, source: SchemaError },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("transport failure: {0}")]
    Transport(String),
}

impl AppError {
    /// 2 for transport failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Transport(_) => 2,
            _ => 1,
        }
    }
}

fn read(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path).map_err(|source| AppError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), AppError> {
    std::fs::write(path, text).map_err(|source| AppError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaFormat {
    Thrift,
    Json,
}

impl SchemaFormat {
    /// `.json` is JSON, anything else Thrift.
    pub fn detect(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => SchemaFormat::Json,
            _ => SchemaFormat::Thrift,
        }
    }
}

impl FromStr for SchemaFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "thrift" => Ok(SchemaFormat::Thrift),
            "json" => Ok(SchemaFormat::Json),
            other => Err(format!("unknown schema format '{other}' (expected thrift or json)")),
        }
    }
}

impl fmt::Display for SchemaFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemaFormat::Thrift => "thrift",
            SchemaFormat::Json => "json",
        })
    }
}

pub fn parse_schema_text(text: &str, format: SchemaFormat) -> Result<RpcSchema, SchemaError> {
    match format {
        SchemaFormat::Thrift => parse_thrift_idl(text),
        SchemaFormat::Json => load_json_schema(text),
    }
}

pub fn load_schema(path: &Path, format: Option<SchemaFormat>) -> Result<RpcSchema, AppError> {
    let text = read(path)?;
    parse_schema_text(&text, format.unwrap_or_else(|| SchemaFormat::detect(path))).map_err(|source| AppError::Schema {
        path: path.display().to_string(),
        source,
    })
}

/// Parses and validates a schema file; errors carry line and column.
pub fn check_schema(path: &Path, format: Option<SchemaFormat>) -> Result<(RpcSchema, Vec<Diagnostic>), AppError> {
    let schema = load_schema(path, format)?;
    let diags = validate_schema(&schema);
    Ok((schema, diags))
}

/// An auth config file holds a JSON array of auth settings.
pub fn load_auth_config(path: &Path) -> Result<Vec<AuthSpec>, AppError> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
}

/// A seed file maps `Interface.function.param` to candidate values.
pub fn load_seed_catalog(path: &Path) -> Result<SeedCatalog, AppError> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
}

/// Where calls go.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum TargetConfig {
    Harness {
        name: String,
    },
    Http {
        endpoint: String,
        #[serde(rename = "resetUrl")]
        reset_url: Option<String>,
        #[serde(rename = "timeoutMs")]
        timeout_ms: u64,
    },
}

impl TargetConfig {
    pub fn http(endpoint: impl Into<String>, reset_url: Option<String>) -> Self {
        TargetConfig::Http {
            endpoint: endpoint.into(),
            reset_url,
            timeout_ms: DEFAULT_HTTP_TIMEOUT.as_millis() as u64,
        }
    }
}

fn harness(name: &str) -> Result<SimulatedService, AppError> {
    build_harness(name)
        .ok_or_else(|| AppError::Config(format!("unknown harness '{name}' (available: {})", HARNESS_NAMES.join(", "))))
}

/// A ready transport with the schema and default auth that go with it.
pub struct Resolved {
    pub schema: RpcSchema,
    pub default_auth: Vec<AuthSpec>,
    pub transport: Box<dyn Transport>,
}

/// Schema from `schema` when given, otherwise the harness's own IDL.
/// Init data, when given, replaces the harness's seed rows.
pub fn resolve_target(
    target: &TargetConfig,
    schema: Option<(&Path, Option<SchemaFormat>)>,
    init_data: Option<&Path>,
) -> Result<Resolved, AppError> {
    let explicit = schema.map(|(p, f)| load_schema(p, f)).transpose()?;
    match target {
        TargetConfig::Harness { name } => {
            let mut sut = harness(name)?;
            if let Some(p) = init_data {
                let text = read(p)?;
                sut.store_mut()
                    .load_init_data_json(&text)
                    .map_err(|e| AppError::Config(format!("{}: {e}", p.display())))?;
            }
            Ok(Resolved {
                schema: explicit.unwrap_or_else(|| sut.schema().clone()),
                default_auth: sut.default_auth().to_vec(),
                transport: Box::new(sut),
            })
        }
        TargetConfig::Http {
            endpoint,
            reset_url,
            timeout_ms,
        } => {
            if init_data.is_some() {
                return Err(AppError::Config("--init-data applies to harness targets only".into()));
            }
            let schema = explicit.ok_or_else(|| AppError::Config("--schema is required with --transport http".into()))?;
            Ok(Resolved {
                schema,
                default_auth: Vec::new(),
                transport: Box::new(HttpJsonTransport::new(
                    endpoint.clone(),
                    reset_url.clone(),
                    Duration::from_millis(*timeout_ms),
                )),
            })
        }
    }
}

/// Everything `fuzz` needs; also recorded verbatim in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FuzzConfig {
    pub schema: Option<PathBuf>,
    pub schema_format: Option<SchemaFormat>,
    pub target: TargetConfig,
    pub algorithm: Algorithm,
    pub budget: u64,
    pub seed: u64,
    pub out: PathBuf,
    pub max_actions: usize,
    pub auth_config: Option<PathBuf>,
    pub categorizer: Option<String>,
    pub seed_catalog: Option<PathBuf>,
    pub init_data: Option<PathBuf>,
}

impl FuzzConfig {
    pub fn for_harness(name: &str, out: impl Into<PathBuf>) -> Self {
        let defaults = SearchConfig::default();
        FuzzConfig {
            schema: None,
            schema_format: None,
            target: TargetConfig::Harness { name: name.to_string() },
            algorithm: defaults.algorithm,
            budget: defaults.budget,
            seed: defaults.seed,
            out: out.into(),
            max_actions: defaults.max_actions,
            auth_config: None,
            categorizer: None,
            seed_catalog: None,
            init_data: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub format: String,
    pub tool_version: String,
    pub config: FuzzConfig,
    pub schema_hash: String,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub calls_executed: u64,
    pub tests_evaluated: u64,
    pub suite_tests: usize,
    pub targets_covered: usize,
    pub targets_total: usize,
    pub faults_flagged: usize,
    pub skipped_functions: Vec<String>,
    pub aborted: Option<String>,
}

#[derive(Debug)]
pub struct FuzzRun {
    pub outcome: SearchOutcome,
    pub manifest: RunManifest,
}

impl FuzzRun {
    /// 2 when the SUT became unreachable during the search.
    pub fn exit_code(&self) -> i32 {
        if self.outcome.aborted.is_some() {
            2
        } else {
            0
        }
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Searches, then writes suite, test text, stats and manifest under
/// `config.out`. Artifacts are written even when the search aborted.
pub fn run_fuzz(config: &FuzzConfig) -> Result<FuzzRun, AppError> {
    let started_at = now();
    if config.max_actions == 0 {
        return Err(AppError::Config("--max-actions must be at least 1".into()));
    }
    let categorizer = match &config.categorizer {
        Some(name) => Some(builtin_categorizer(name).ok_or_else(|| {
            AppError::Config(format!(
                "unknown categorizer '{name}' (available: {})",
                BUILTIN_CATEGORIZERS.join(", ")
            ))
        })?),
        None => None,
    };
    let seeds = config.seed_catalog.as_deref().map(load_seed_catalog).transpose()?;
    let schema_arg = config.schema.as_deref().map(|p| (p, config.schema_format));
    let mut resolved = resolve_target(&config.target, schema_arg, config.init_data.as_deref())?;
    let auth = match &config.auth_config {
        Some(p) => load_auth_config(p)?,
        None => resolved.default_auth.clone(),
    };
    let schema = &resolved.schema;
    let search = SearchConfig {
        algorithm: config.algorithm,
        budget: config.budget,
        seed: config.seed,
        max_actions: config.max_actions,
        ..SearchConfig::default()
    };
    let inputs = SearchInputs {
        schema,
        auth: &auth,
        categorizer: categorizer.as_deref(),
        seeds: seeds.as_ref(),
    };
    let outcome = run_search(inputs, resolved.transport.as_mut(), &search).map_err(|e| AppError::Config(e.to_string()))?;
    let writer = WriterConfig {
        seed: config.seed,
        budget: config.budget,
        algorithm: config.algorithm.to_string(),
        ..WriterConfig::default()
    };
    let mut rendered = write_suite(&outcome.suite, schema, &auth, &writer);
    rendered.files.insert(STATS_FILE.to_string(), outcome.stats_csv());
    rendered.write_to_dir(&config.out).map_err(|source| AppError::Io {
        path: config.out.display().to_string(),
        source,
    })?;
    let manifest = RunManifest {
        format: MANIFEST_FORMAT.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        schema_hash: schema.content_hash(),
        seed: config.seed,
        started_at,
        finished_at: now(),
        calls_executed: outcome.calls_used,
        tests_evaluated: outcome.tests_evaluated,
        suite_tests: outcome.suite.tests.len(),
        targets_covered: outcome.covered_targets(),
        targets_total: outcome.stats.len(),
        faults_flagged: outcome.covered_of_kind(TargetKind::Fault),
        skipped_functions: outcome.skipped_functions.clone(),
        aborted: outcome.aborted.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write(&config.out.join(MANIFEST_FILE), &text)?;
    Ok(FuzzRun { outcome, manifest })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayConfig {
    pub suite: PathBuf,
    pub schema: Option<PathBuf>,
    pub schema_format: Option<SchemaFormat>,
    pub target: TargetConfig,
    pub init_data: Option<PathBuf>,
}

pub fn run_replay(config: &ReplayConfig) -> Result<ReplayReport, AppError> {
    let suite = MachineSuite::from_json(&read(&config.suite)?)
        .map_err(|e| AppError::Config(format!("{}: {e}", config.suite.display())))?;
    let schema_arg = config.schema.as_deref().map(|p| (p, config.schema_format));
    let mut resolved = resolve_target(&config.target, schema_arg, config.init_data.as_deref())?;
    replay_suite(&suite, &resolved.schema, resolved.transport.as_mut()).map_err(|e| match e {
        ReplayError::Transport(m) => AppError::Transport(m),
        other => AppError::Config(other.to_string()),
    })
}

/// `"3"`, `"1,4,9"` or an inclusive range `"1..10"`.
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>, String> {
    let bad = |part: &str| format!("bad seed list '{s}' near '{part}'");
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad(part))?;
            let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad(part))?;
            if a > b {
                return Err(bad(part));
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad(part))?);
        }
    }
    if out.is_empty() {
        return Err(format!("empty seed list '{s}'"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CompareReport {
    pub budget: u64,
    pub seeds: Vec<u64>,
    pub runs: Vec<SweepResult>,
    pub comparisons: Vec<Comparison>,
}

/// MIO vs Random on bundled harnesses, every seed for each.
pub fn run_compare(harnesses: &[String], seeds: &[u64], budget: u64) -> Result<CompareReport, AppError> {
    for h in harnesses {
        harness(h)?;
    }
    let names: Vec<&str> = harnesses.iter().map(String::as_str).collect();
    let runs = run_sweep(&sweep_jobs(&names, &Algorithm::ALL, seeds), budget);
    Ok(CompareReport {
        budget,
        seeds: seeds.to_vec(),
        comparisons: compare(&runs),
        runs,
    })
}
