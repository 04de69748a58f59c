//! Command-line interface: `fuzz`, `validate`, `replay` and `fixtures`.
//!
//! Every flag can also be set through an `APIFUZZ_` environment variable
//! (e.g. `APIFUZZ_MAX_TIME=10m`); flags given on the command line win.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::auth::{parse_auth_config, parse_header_flag, select_auth, AuthMechanism, AuthSpec};
use crate::clock::{Clock, RealClock, VirtualClock};
use crate::coverage::minimized_suite;
use crate::emitter::{build_suite, emit_suite, parse_plan_yaml, replay_suite, OutputFormat, SuiteFile};
use crate::engine::{
    parse_derived_rules, run_session, DerivedParams, SessionConfig, SessionEnv, SessionError, SessionOutcome,
    TransformRegistry, MOCK_CIPHER_SECRET, MOCK_SIGNING_SECRET,
};
use crate::fixtures::{serve, FixtureApi, SimTransport};
use crate::http::{NetworkTransport, Transport};
use crate::model::{build_model, filter_endpoints, ApiModel};
use crate::schema::{load_schema, render_json, render_text, validate_schema, SchemaSource, SchemaWarning, Severity};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ENVIRONMENT: i32 = 3;

/// Base URL prefix selecting the in-process fixture APIs on a virtual clock.
pub const SIM_SCHEME: &str = "sim:";

fn parse_duration(s: &str) -> Result<Duration, String> {
    humantime::parse_duration(s).map_err(|e| format!("invalid duration `{s}` ({e}); use forms like 30s, 10m, 1h"))
}

#[derive(Debug, Parser)]
#[command(name = "apifuzz", version, about = "Black-box fuzzer for REST APIs described by OpenAPI schemas")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Fuzz an API and write a minimized test suite.
    Fuzz(FuzzArgs),
    /// Load and validate a schema without calling the API.
    Validate(ValidateArgs),
    /// Run an emitted plan-yaml suite against an API.
    Replay(ReplayArgs),
    /// Serve the bundled fixture APIs on localhost.
    Fixtures(FixturesArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FuzzArgs {
    /// Schema file path or URL.
    #[arg(long, env = "APIFUZZ_SCHEMA")]
    pub schema: String,
    /// API base URL; `sim:` runs against the in-process fixtures.
    #[arg(long = "baseUrl", env = "APIFUZZ_BASE_URL")]
    pub base_url: String,
    #[arg(long = "maxTime", env = "APIFUZZ_MAX_TIME", default_value = "60s", value_parser = parse_duration)]
    pub max_time: Duration,
    /// Stop after this long without new coverage.
    #[arg(long = "prematureStop", env = "APIFUZZ_PREMATURE_STOP", value_parser = parse_duration)]
    pub premature_stop: Option<Duration>,
    #[arg(long = "ratePerMinute", env = "APIFUZZ_RATE_PER_MINUTE")]
    pub rate_per_minute: Option<u32>,
    #[arg(long = "endpointPrefix", env = "APIFUZZ_ENDPOINT_PREFIX")]
    pub endpoint_prefix: Option<String>,
    /// Comma-separated tags; endpoints with any of them are kept.
    #[arg(long = "endpointTagFilter", env = "APIFUZZ_ENDPOINT_TAG_FILTER", value_delimiter = ',')]
    pub endpoint_tag_filter: Vec<String>,
    /// Static header NAME:VALUE sent with every request (repeatable).
    #[arg(long, env = "APIFUZZ_HEADER")]
    pub header: Vec<String>,
    /// YAML or TOML file declaring auth entries.
    #[arg(long = "authConfig", env = "APIFUZZ_AUTH_CONFIG")]
    pub auth_config: Option<PathBuf>,
    /// Auth entry to use when the config declares several.
    #[arg(long, env = "APIFUZZ_AUTH")]
    pub auth: Option<String>,
    /// YAML or TOML file of derived-parameter rules.
    #[arg(long = "derivedParams", env = "APIFUZZ_DERIVED_PARAMS")]
    pub derived_params: Option<PathBuf>,
    #[arg(long = "outputDir", env = "APIFUZZ_OUTPUT_DIR", default_value = "generated")]
    pub output_dir: PathBuf,
    /// plan-yaml and/or curl-script, comma-separated.
    #[arg(long, env = "APIFUZZ_FORMAT", value_delimiter = ',', default_value = "plan-yaml")]
    pub format: Vec<OutputFormat>,
    #[arg(long, env = "APIFUZZ_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "suiteName", env = "APIFUZZ_SUITE_NAME", default_value = "apifuzz")]
    pub suite_name: String,
    #[arg(long = "requestTimeout", env = "APIFUZZ_REQUEST_TIMEOUT", default_value = "30s", value_parser = parse_duration)]
    pub request_timeout: Duration,
    /// Do not append DELETE calls for created resources.
    #[arg(long = "noCleanup", env = "APIFUZZ_NO_CLEANUP")]
    pub no_cleanup: bool,
    /// Do not reuse ids harvested from collection responses.
    #[arg(long = "noDictionary", env = "APIFUZZ_NO_DICTIONARY")]
    pub no_dictionary: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long, env = "APIFUZZ_SCHEMA")]
    pub schema: String,
    /// Print warnings as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// A `.plan.yaml` file written by `fuzz`.
    #[arg(long, env = "APIFUZZ_PLAN")]
    pub plan: PathBuf,
    #[arg(long = "baseUrl", env = "APIFUZZ_BASE_URL")]
    pub base_url: String,
    #[arg(long = "requestTimeout", env = "APIFUZZ_REQUEST_TIMEOUT", default_value = "30s", value_parser = parse_duration)]
    pub request_timeout: Duration,
}

#[derive(Debug, Clone, Args)]
pub struct FixturesArgs {
    #[arg(long, env = "APIFUZZ_HOST", default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = "APIFUZZ_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Server-side lifetime of login tokens.
    #[arg(long = "tokenLifetime", env = "APIFUZZ_TOKEN_LIFETIME", value_parser = parse_duration)]
    pub token_lifetime: Option<Duration>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Environment(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Environment(_) => EXIT_ENVIRONMENT,
        }
    }
}

fn config<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

/// Result of a completed `fuzz` run.
pub struct FuzzRun {
    pub model: ApiModel,
    pub warnings: Vec<SchemaWarning>,
    pub outcome: SessionOutcome,
    pub suite: SuiteFile,
    pub written: Vec<PathBuf>,
}

fn load_model(schema: &str) -> Result<(ApiModel, Vec<SchemaWarning>), CliError> {
    let source = SchemaSource::parse(schema).map_err(config)?;
    let (graph, mut warnings) = load_schema(&source).map_err(config)?;
    warnings.extend(validate_schema(&graph));
    let (model, more) = build_model(&graph);
    warnings.extend(more);
    Ok((model, warnings))
}

fn session_auth(args: &FuzzArgs) -> Result<Option<AuthSpec>, CliError> {
    let configured = match &args.auth_config {
        Some(path) => select_auth(parse_auth_config(path).map_err(config)?, args.auth.as_deref()).map_err(config)?,
        None => None,
    };
    let headers = args
        .header
        .iter()
        .map(|h| parse_header_flag(h))
        .collect::<Result<Vec<_>, _>>()
        .map_err(config)?;
    match (configured, headers.is_empty()) {
        (a, true) => Ok(a),
        (None, false) => Ok(Some(AuthSpec {
            name: "header".into(),
            mechanism: AuthMechanism::StaticHeaders(headers),
        })),
        (Some(AuthSpec { name, mechanism: AuthMechanism::StaticHeaders(mut hs) }), false) => {
            hs.extend(headers);
            Ok(Some(AuthSpec {
                name,
                mechanism: AuthMechanism::StaticHeaders(hs),
            }))
        }
        (Some(_), false) => Err(CliError::Config(
            "--header cannot be combined with a login-endpoint auth entry".into(),
        )),
    }
}

type Backend = (Box<dyn Transport>, Arc<dyn Clock>);

fn backend(base_url: &str, seed: u64, timeout: Duration) -> Result<Backend, CliError> {
    if base_url.starts_with(SIM_SCHEME) {
        let clock = Arc::new(VirtualClock::new());
        let api = Arc::new(FixtureApi::new(clock.clone()));
        return Ok((Box::new(SimTransport::new(api, clock.clone(), seed)), clock));
    }
    let transport = NetworkTransport::new(base_url, timeout).map_err(config)?;
    Ok((Box::new(transport), Arc::new(RealClock::new())))
}

/// Runs the whole pipeline: load, validate, filter, fuzz, minimize, emit.
pub fn fuzz(args: &FuzzArgs) -> Result<FuzzRun, CliError> {
    let (model, warnings) = load_model(&args.schema)?;
    let tags: Option<BTreeSet<String>> =
        (!args.endpoint_tag_filter.is_empty()).then(|| args.endpoint_tag_filter.iter().cloned().collect());
    let model = filter_endpoints(&model, args.endpoint_prefix.as_deref(), tags.as_ref()).map_err(config)?;
    let auth = session_auth(args)?;
    let derived = match &args.derived_params {
        Some(path) => Some(
            DerivedParams::new(
                parse_derived_rules(path).map_err(config)?,
                TransformRegistry::with_defaults(MOCK_CIPHER_SECRET, MOCK_SIGNING_SECRET),
            )
            .map_err(config)?,
        ),
        None => None,
    };

    let mut cfg = SessionConfig::new(args.base_url.clone(), args.max_time);
    cfg.premature_stop = args.premature_stop;
    cfg.rate_per_minute = args.rate_per_minute;
    cfg.seed = args.seed;
    cfg.cleanup = !args.no_cleanup;
    cfg.dictionary = !args.no_dictionary;

    let (transport, clock) = backend(&args.base_url, args.seed, args.request_timeout)?;
    let env = SessionEnv {
        transport,
        clock,
        auth: auth.clone(),
        derived,
    };
    let outcome = run_session(&model, &cfg, env).map_err(|e| match e {
        SessionError::Unreachable { .. } => CliError::Environment(e.to_string()),
        other => config(other),
    })?;
    let suite = build_suite(&args.suite_name, &minimized_suite(&outcome.archive), &model, auth.as_ref());
    let written = emit_suite(&args.output_dir, &suite, &args.format).map_err(|e| CliError::Environment(e.to_string()))?;
    Ok(FuzzRun {
        model,
        warnings,
        outcome,
        suite,
        written,
    })
}

fn print_warnings(err: &mut dyn Write, warnings: &[SchemaWarning]) {
    if !warnings.is_empty() {
        let _ = write!(err, "{}", render_text(warnings));
    }
}

fn cmd_fuzz(args: &FuzzArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let run = fuzz(args)?;
    print_warnings(err, &run.warnings);
    for w in &run.outcome.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let s = &run.outcome.stats;
    let _ = write!(out, "{}", run.outcome.archive.report(&run.model).to_table());
    let _ = writeln!(
        out,
        "stopped: {} after {:.1}s, {} tests, {} requests, {} logins",
        s.stop_reason,
        s.elapsed.as_secs_f64(),
        s.tests,
        s.requests,
        s.logins
    );
    let faults: Vec<_> = run
        .suite
        .tests
        .iter()
        .flat_map(|t| t.summary.faults.iter().map(move |f| (t, f)))
        .collect();
    let _ = writeln!(out, "faults: {}", faults.len());
    for (t, f) in faults {
        let _ = writeln!(out, "  [{}] {} step {}: {}", f.code, t.name, f.step, f.message);
    }
    for p in &run.written {
        let _ = writeln!(out, "wrote {}", p.display());
    }
    Ok(EXIT_OK)
}

fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (_, warnings) = load_model(&args.schema)?;
    if args.json {
        let _ = writeln!(out, "{}", render_json(&warnings));
    } else {
        let _ = write!(out, "{}", render_text(&warnings));
    }
    let serious = warnings.iter().filter(|w| w.severity == Severity::Warn).count();
    if !args.json {
        let _ = writeln!(out, "{serious} warning(s)");
    }
    Ok(if serious == 0 { EXIT_OK } else { EXIT_FINDINGS })
}

fn cmd_replay(args: &ReplayArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(&args.plan)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.plan.display())))?;
    let suite = parse_plan_yaml(&text).map_err(|e| CliError::Config(format!("{}: {e}", args.plan.display())))?;
    let (mut transport, _) = backend(&args.base_url, 0, args.request_timeout)?;
    let report = replay_suite(&suite, &mut *transport);
    let _ = writeln!(out, "{report}");
    Ok(if report.failed() == 0 { EXIT_OK } else { EXIT_FINDINGS })
}

fn cmd_fixtures(args: &FixturesArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let api = FixtureApi::with_token_lifetime(Arc::new(RealClock::new()), args.token_lifetime);
    let server = serve(Arc::new(api), &format!("{}:{}", args.host, args.port))
        .map_err(|e| CliError::Environment(format!("cannot listen on {}:{}: {e}", args.host, args.port)))?;
    let _ = writeln!(out, "fixture APIs listening on {}", server.base_url());
    let _ = out.flush();
    server.wait();
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().ansi().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Fuzz(a) => cmd_fuzz(a, out, err),
        Command::Validate(a) => cmd_validate(a, out),
        Command::Replay(a) => cmd_replay(a, out),
        Command::Fixtures(a) => cmd_fixtures(a, out),
    };
    result.unwrap_or_else(|e| {
        let _ = writeln!(err, "error: {e}");
        e.exit_code()
    })
}
