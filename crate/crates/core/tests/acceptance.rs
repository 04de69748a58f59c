//! Acceptance criteria, one pass/fail line each. Exits non-zero if any fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use apifuzz::auth::{parse_auth_config_str, select_auth, AuthMechanism, ConfigFormat};
use apifuzz::cli::{self, Cli, Command, FuzzArgs};
use apifuzz::clock::{RealClock, VirtualClock};
use apifuzz::coverage::{derive_targets, minimized_suite, CoverageTarget, Qualifier, TargetKind};
use apifuzz::emitter::{build_suite, parse_plan_yaml, render_plan_yaml, replay_suite, SuiteFile};
use apifuzz::engine::{
    parse_derived_rules_str, run_session, DerivedParams, LogEntry, SessionConfig, SessionEnv, SessionOutcome,
    StopReason, TransformRegistry, MOCK_CIPHER_SECRET, MOCK_SIGNING_SECRET,
};
use apifuzz::fixtures::{
    self, serve, FixtureApi, Handler, SimTransport, CRUD_SCHEMA, DERIVED_RULES, DERIVED_SCHEMA, ENUM_SCHEMA,
    LINKS_SCHEMA, LOGINTOKEN_AUTH, LOGINTOKEN_SCHEMA,
};
use apifuzz::http::{HttpRequest, Method, NetworkTransport};
use apifuzz::model::{build_model, ApiModel, JsonValue};
use apifuzz::schema::{load_schema_with, validate_schema, MemoryFetcher, SchemaSource, WarningCode};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn model_of(text: &str) -> ApiModel {
    let mut f = MemoryFetcher::default();
    f.insert("http://fixtures.local/schema.yaml", text);
    let (graph, _) = load_schema_with(&SchemaSource::parse("http://fixtures.local/schema.yaml").unwrap(), &mut f)
        .expect("fixture schema loads");
    build_model(&graph).0
}

struct Sim {
    api: Arc<FixtureApi>,
    clock: Arc<VirtualClock>,
}

impl Sim {
    fn new(token_lifetime: Option<Duration>) -> Sim {
        let clock = Arc::new(VirtualClock::new());
        Sim {
            api: Arc::new(FixtureApi::with_token_lifetime(clock.clone(), token_lifetime)),
            clock,
        }
    }

    fn env(&self, seed: u64) -> SessionEnv {
        SessionEnv {
            transport: Box::new(SimTransport::new(self.api.clone(), self.clock.clone(), seed)),
            clock: self.clock.clone(),
            auth: None,
            derived: None,
        }
    }
}

fn session(model: &ApiModel, cfg: &SessionConfig, env: SessionEnv) -> Result<SessionOutcome, String> {
    run_session(model, cfg, env).map_err(|e| e.to_string())
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("apifuzz").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&err).into_owned())
}

fn fuzz_args(args: &[&str]) -> FuzzArgs {
    let cli = <Cli as clap::Parser>::try_parse_from(["apifuzz", "fuzz"].iter().chain(args)).expect("valid flags");
    match cli.command {
        Command::Fuzz(a) => a,
        _ => unreachable!(),
    }
}

fn read_suite(path: &Path) -> Result<SuiteFile, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_plan_yaml(&text).map_err(|e| e.to_string())
}

fn real_server() -> Result<fixtures::FixtureServer, String> {
    serve(Arc::new(FixtureApi::new(Arc::new(RealClock::new()))), "127.0.0.1:0").map_err(|e| e.to_string())
}

fn c1_link_chaining() -> Outcome {
    let server = real_server()?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().to_str().unwrap();
    let schema = fixture_path("links.yaml");
    let (code, _, err) = cli(&[
        "fuzz",
        "--schema",
        schema.to_str().unwrap(),
        "--baseUrl",
        &server.base_url(),
        "--maxTime",
        "30s",
        "--prematureStop",
        "5s",
        "--outputDir",
        out,
    ]);
    ensure!(code == 0, "fuzz exited {code}: {err}");
    let suite = read_suite(&dir.path().join("apifuzz.plan.yaml"))?;
    let chained = suite.tests.iter().find(|t| {
        t.steps.len() == 2 && {
            let (post, get) = (&t.steps[0], &t.steps[1]);
            let var_for = |from: &str| post.extract.iter().find(|e| e.from == from).map(|e| e.var.clone());
            match (var_for("/data/id"), var_for("/data/code")) {
                (Some(id), Some(code)) => {
                    post.verb == "POST"
                        && get.path == format!("/api/links/users/${{{id}}}/${{{code}}}")
                        && get.query.iter().any(|q| q.name == "name" && q.value == "BAR")
                }
                _ => false,
            }
        }
    });
    let Some(plan) = chained else {
        return Err(format!("no chained plan among {} tests", suite.tests.len()));
    };
    let one = SuiteFile {
        suite: suite.suite.clone(),
        tests: vec![plan.clone()],
    };
    let mut transport = NetworkTransport::new(&server.base_url(), Duration::from_secs(5)).map_err(|e| e.to_string())?;
    let report = replay_suite(&one, &mut transport);
    let statuses: Vec<Option<u16>> = report.tests[0].steps.iter().map(|s| s.status).collect();
    ensure!(statuses == [Some(200), Some(200)], "replay statuses {statuses:?}");
    Ok(format!("{} chained via data/id, data/code; replay 200,200", plan.name))
}

fn c2_schema_validation() -> Outcome {
    let faulty = fixture_path("links-faulty.yaml");
    let good = fixture_path("links.yaml");
    let (code_bad, out_bad, _) = cli(&["validate", "--schema", faulty.to_str().unwrap()]);
    let (code_good, out_good, _) = cli(&["validate", "--schema", good.to_str().unwrap()]);
    ensure!(code_bad == 1, "faulty variant exited {code_bad}");
    ensure!(
        out_bad.contains(WarningCode::MisplacedKey.as_str()) && out_bad.contains("links"),
        "no misplaced-links warning in:\n{out_bad}"
    );
    ensure!(code_good == 0, "correct variant exited {code_good}:\n{out_good}");
    Ok("faulty → 1 (misplaced links), correct → 0".into())
}

fn c3_token_auth() -> Outcome {
    let lifetime = Duration::from_secs(300);
    let sim = Sim::new(Some(lifetime));
    let specs = parse_auth_config_str(LOGINTOKEN_AUTH, ConfigFormat::Toml, "logintoken-auth.toml").map_err(|e| e.to_string())?;
    let mut auth = select_auth(specs, None).map_err(|e| e.to_string())?.ok_or("no auth entry")?;
    if let AuthMechanism::LoginEndpoint(flow) = &mut auth.mechanism {
        flow.lifetime = Some(lifetime);
    }
    let model = model_of(LOGINTOKEN_SCHEMA);
    let mut cfg = SessionConfig::new("sim:", Duration::from_secs(360));
    cfg.rate_per_minute = Some(120);
    let mut env = sim.env(3);
    env.auth = Some(auth.clone());
    let outcome = session(&model, &cfg, env)?;

    let issued = sim.api.tokens.issued();
    let checks = sim.api.tokens.checks();
    ensure!(!checks.is_empty(), "no authenticated calls");
    for c in &checks {
        let ok = c
            .authorization
            .as_deref()
            .and_then(|a| a.strip_prefix("Bearer "))
            .is_some_and(|t| issued.iter().any(|i| i == t));
        ensure!(ok, "call carried {:?}, issued {issued:?}", c.authorization);
        ensure!(c.status == 200, "authenticated call got {}", c.status);
    }
    ensure!(sim.api.tokens.logins() == 2, "{} logins in 6 virtual minutes", sim.api.tokens.logins());

    let suite = build_suite("auth", &minimized_suite(&outcome.archive), &model, Some(&auth));
    let text = render_plan_yaml(&suite).map_err(|e| e.to_string())?;
    ensure!(!suite.tests.is_empty(), "empty suite");
    for t in &suite.tests {
        let login = t.login.as_ref().ok_or_else(|| format!("{} has no login step", t.name))?;
        ensure!(login.extract.from == "/token/authToken", "login extracts {}", login.extract.from);
    }
    for token in &issued {
        ensure!(!text.contains(token.as_str()), "plan contains hard-coded token {token}");
    }
    Ok(format!("{} calls all Bearer <issued token>, 2 logins, 0 hard-coded tokens", checks.len()))
}

fn c4_rate_limiter() -> Outcome {
    let sim = Sim::new(None);
    let model = model_of(LINKS_SCHEMA);
    let mut cfg = SessionConfig::new("sim:", Duration::from_secs(300));
    cfg.rate_per_minute = Some(30);
    let outcome = session(&model, &cfg, sim.env(4))?;
    let log: &[LogEntry] = &outcome.log;
    ensure!(log.len() > 60, "only {} requests logged", log.len());
    ensure!(log.len() == sim.api.request_count(), "log has {} entries, fixture saw {}", log.len(), sim.api.request_count());
    let window = Duration::from_secs(60);
    for (i, e) in log.iter().enumerate() {
        let n = log[i..].iter().take_while(|o| o.started_at < e.started_at + window).count();
        ensure!(n <= 30, "{n} requests in the 60 s window starting at {:?}", e.started_at);
    }
    let interval = Duration::from_millis(60_000 / 30);
    ensure!(log[0].waited == Duration::ZERO, "first request waited {:?}", log[0].waited);
    for w in log.windows(2) {
        let expected = interval.checked_sub(w[0].duration).unwrap_or(Duration::ZERO);
        ensure!(w[1].waited == expected, "waited {:?} after X={:?}, expected {expected:?}", w[1].waited, w[0].duration);
    }
    Ok(format!("{} requests, max 30 per window, waits exact", log.len()))
}

fn c5_premature_stop() -> Outcome {
    let server = real_server()?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let args = fuzz_args(&[
        "--schema",
        fixture_path("ping.yaml").to_str().unwrap(),
        "--baseUrl",
        &server.base_url(),
        "--maxTime",
        "60s",
        "--prematureStop",
        "5s",
        "--outputDir",
        dir.path().to_str().unwrap(),
    ]);
    let run = cli::fuzz(&args).map_err(|e| e.to_string())?;
    let s = &run.outcome.stats;
    ensure!(run.model.endpoints.len() == 1, "{} endpoints", run.model.endpoints.len());
    ensure!(s.stop_reason == StopReason::Premature, "stop reason {}", s.stop_reason);
    let one_request = run.outcome.log.iter().map(|e| e.duration).max().unwrap_or_default();
    let bound = s.last_new_coverage + Duration::from_secs(5) + one_request;
    ensure!(s.elapsed <= bound, "stopped at {:?}, bound {bound:?}", s.elapsed);
    Ok(format!(
        "premature at {:.3}s, last new {:.3}s",
        s.elapsed.as_secs_f64(),
        s.last_new_coverage.as_secs_f64()
    ))
}

fn enum_target(t: &CoverageTarget) -> bool {
    matches!(t.kind, TargetKind::EnumValue { .. })
}

fn c6_coverage_criteria() -> Outcome {
    let model = model_of(ENUM_SCHEMA);
    let enum_targets: BTreeSet<CoverageTarget> = derive_targets(&model).into_iter().filter(enum_target).collect();
    ensure!(enum_targets.len() == 20, "{} enum targets", enum_targets.len());
    let sim = Sim::new(None);
    let cfg = SessionConfig::new("sim:", Duration::from_secs(120));
    let outcome = session(&model, &cfg, sim.env(6))?;
    let archive = &outcome.archive;
    let any = enum_targets.iter().filter(|t| t.qualifier == Some(Qualifier::AnyStatus) && archive.is_covered(t)).count();
    let ok = enum_targets.iter().filter(|t| t.qualifier == Some(Qualifier::Success2xx) && archive.is_covered(t)).count();
    ensure!(any == 10 && ok == 10, "covered {any}/10 any-status, {ok}/10 success-2xx");
    let covered: BTreeSet<&CoverageTarget> = archive.covered.keys().collect();
    let suite = minimized_suite(archive);
    let union: BTreeSet<&CoverageTarget> = suite.iter().flat_map(|t| t.targets.iter()).collect();
    ensure!(union == covered, "minimized union {} targets, archive {}", union.len(), covered.len());
    Ok(format!("20/20 enum targets; {} archived → {} minimized, union equal", archive.tests.len(), suite.len()))
}

fn c7_response_dictionary() -> Outcome {
    let model = model_of(CRUD_SCHEMA);
    let sim = Sim::new(None);
    let cfg = SessionConfig::new("sim:", Duration::from_secs(300));
    let outcome = session(&model, &cfg, sim.env(7))?;
    let products = outcome
        .dictionary
        .ids_for("/api/crud/products/{id}")
        .cloned()
        .ok_or("no product ids harvested")?;
    let sourced: Vec<&LogEntry> = outcome.log.iter().filter(|e| e.dictionary_sourced).collect();
    ensure!(!sourced.is_empty(), "no dictionary-sourced actions");
    ensure!(sourced.iter().all(|e| e.verb == Method::Get), "dictionary-sourced non-GET action");
    for (verb, path) in sim.api.crud.mutations() {
        let last = path.rsplit('/').next().unwrap_or_default();
        ensure!(!products.contains(last), "{verb} {path} uses harvested id");
    }
    Ok(format!(
        "{} harvested ids, {} dictionary-sourced actions, all GET",
        products.len(),
        sourced.len()
    ))
}

fn c8_cleanup() -> Outcome {
    let server = real_server()?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (code, _, err) = cli(&[
        "fuzz",
        "--schema",
        fixture_path("crud.yaml").to_str().unwrap(),
        "--baseUrl",
        &server.base_url(),
        "--maxTime",
        "30s",
        "--prematureStop",
        "3s",
        "--outputDir",
        dir.path().to_str().unwrap(),
    ]);
    ensure!(code == 0, "fuzz exited {code}: {err}");
    drop(server);
    let suite = read_suite(&dir.path().join("apifuzz.plan.yaml"))?;
    let mut creations = 0;
    for t in &suite.tests {
        for (i, s) in t.steps.iter().enumerate() {
            let created = s.verb == "POST" && s.path == "/api/crud/users" && s.expect.status.is_some_and(|c| (200..300).contains(&c));
            if created {
                creations += 1;
                let cleaned = t.steps[i + 1..]
                    .iter()
                    .any(|d| d.verb == "DELETE" && d.path.starts_with("/api/crud/user/${"));
                ensure!(cleaned, "{}: POST /users without DELETE /user/{{id}}", t.name);
            }
        }
    }
    ensure!(creations > 0, "no 2xx POST /users in the suite");
    let fresh = real_server()?;
    let mut transport = NetworkTransport::new(&fresh.base_url(), Duration::from_secs(5)).map_err(|e| e.to_string())?;
    let statuses = |r: &apifuzz::emitter::ReplayReport| -> Vec<Option<u16>> {
        r.tests.iter().flat_map(|t| t.steps.iter().map(|s| s.status)).collect()
    };
    let first = replay_suite(&suite, &mut transport);
    let second = replay_suite(&suite, &mut transport);
    ensure!(statuses(&first) == statuses(&second), "statuses differ between runs:\n{first}\n{second}");
    ensure!(second.failed() == 0, "second run:\n{second}");
    Ok(format!("{creations} creations each cleaned up; two replays identical"))
}

fn c9_derived_params() -> Outcome {
    let registry = || TransformRegistry::with_defaults(MOCK_CIPHER_SECRET, MOCK_SIGNING_SECRET);
    let rules = parse_derived_rules_str(DERIVED_RULES, ConfigFormat::Toml, "derived-rules.toml").map_err(|e| e.to_string())?;
    let business = r#"{"cardNumber":"4111111111111111","holder":"Foo"}"#;
    let payload = JsonValue::object([
        ("key", JsonValue::string("session-key-1")),
        ("data", JsonValue::string(business)),
        ("sign", JsonValue::string("")),
    ]);
    let send = |rules: Vec<_>| -> Result<u16, String> {
        let derived = DerivedParams::new(rules, registry()).map_err(|e| e.to_string())?;
        let body = derived.apply(&payload, "/api/derived/bind-card").map_err(|e| e.to_string())?;
        let api = FixtureApi::new(Arc::new(VirtualClock::new()));
        let mut r = HttpRequest::new(Method::Post, "/api/derived/bind-card");
        r.set_header("Content-Type", "application/json");
        r.body = Some(body.to_json_string());
        let status = api.handle(&r).status;
        if status == 200 {
            let d = api.derived.decrypted();
            if d.last().map(String::as_str) != Some(business) {
                return Err(format!("decrypted {d:?}"));
            }
        }
        Ok(status)
    };
    let ordered = send(rules.clone())?;
    ensure!(ordered == 200, "ordered rules → {ordered}");
    let permuted: Vec<_> = rules
        .into_iter()
        .map(|mut r| {
            r.order = if r.name == "sign" { 0 } else { 1 };
            r
        })
        .collect();
    let wrong = send(permuted)?;
    ensure!((400..500).contains(&wrong), "sign-first rules → {wrong}");

    let model = model_of(DERIVED_SCHEMA);
    let sim = Sim::new(None);
    let mut env = sim.env(9);
    env.derived = Some(
        DerivedParams::new(
            parse_derived_rules_str(DERIVED_RULES, ConfigFormat::Toml, "derived-rules.toml").map_err(|e| e.to_string())?,
            registry(),
        )
        .map_err(|e| e.to_string())?,
    );
    let mut cfg = SessionConfig::new("sim:", Duration::from_secs(30));
    cfg.premature_stop = Some(Duration::from_secs(10));
    let outcome = session(&model, &cfg, env)?;
    let ok = outcome.log.iter().filter(|e| e.status == Some(200)).count();
    ensure!(ok > 0, "session never passed verification");
    Ok(format!("ordered → 200 (decrypt round-trips), sign-first → {wrong}; session {ok} verified calls"))
}

fn c10_fault_summary() -> Outcome {
    let model = model_of(LINKS_SCHEMA);
    let sim = Sim::new(None);
    let mut cfg = SessionConfig::new("sim:", Duration::from_secs(60));
    cfg.premature_stop = Some(Duration::from_secs(10));
    let outcome = session(&model, &cfg, sim.env(10))?;
    let suite = build_suite("links", &minimized_suite(&outcome.archive), &model, None);
    let expected = "Calls:\n1 - (200) POST:/api/links/create\n2 - (200) GET:/api/links/users/{name}/{code}\nFound 1 potential fault of type-code 101\nFollowed 1 link:\n  200:LinkToGetUser";
    let plan = suite
        .tests
        .iter()
        .find(|t| t.summary.faults.iter().any(|f| f.code == 101) && t.summary.render() == expected)
        .ok_or_else(|| {
            let shown: Vec<String> = suite.tests.iter().map(|t| format!("{}\n{}", t.name, t.summary.render())).collect();
            format!("no plan with the expected summary:\n{}", shown.join("\n---\n"))
        })?;
    let suffix = plan.name.splitn(3, '_').nth(2).unwrap_or_default();
    let index_ok = plan.name.split('_').nth(1).is_some_and(|i| i.parse::<usize>().is_ok());
    ensure!(
        index_ok && suffix == "getOnUserReturnsMismatchResponseWithSchema",
        "name {}",
        plan.name
    );
    ensure!(
        plan.summary.faults[0].message.contains("[Path '/errrors']"),
        "fault message {}",
        plan.summary.faults[0].message
    );
    Ok(plan.name.clone())
}

fn c11_determinism() -> Outcome {
    let mut compared = 0;
    for schema in ["links.yaml", "crud.yaml", "enum.yaml"] {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let (code, _, err) = cli(&[
                "fuzz",
                "--schema",
                fixture_path(schema).to_str().unwrap(),
                "--baseUrl",
                "sim:",
                "--maxTime",
                "60s",
                "--prematureStop",
                "10s",
                "--seed",
                "11",
                "--format",
                "plan-yaml,curl-script",
                "--outputDir",
                dir.path().to_str().unwrap(),
            ]);
            ensure!(code == 0, "{schema}: fuzz exited {code}: {err}");
            let read = |ext: &str| std::fs::read(dir.path().join(format!("apifuzz.{ext}"))).map_err(|e| e.to_string());
            outputs.push((read("plan.yaml")?, read("curl.sh")?));
        }
        ensure!(outputs[0] == outputs[1], "{schema}: runs differ");
        compared += 2;
    }
    Ok(format!("{compared} file pairs byte-identical"))
}

fn multi_fetcher(customers: &str) -> MemoryFetcher {
    let mut f = MemoryFetcher::default();
    let read = |n: &str| std::fs::read_to_string(fixture_path(&format!("multi/{n}"))).expect("fixture readable");
    f.insert("http://fixtures.local/specs/root.yaml", &read("root.yaml"));
    f.insert("http://fixtures.local/specs/orders.yaml", &read("orders.yaml"));
    f.insert("http://fixtures.local/specs/customers.yaml", customers);
    f
}

fn c12_multi_file() -> Outcome {
    let root = SchemaSource::parse("http://fixtures.local/specs/root.yaml").map_err(|e| e.to_string())?;
    let customers = std::fs::read_to_string(fixture_path("multi/customers.yaml")).map_err(|e| e.to_string())?;
    let mut f = multi_fetcher(&customers);
    let (graph, warnings) = load_schema_with(&root, &mut f).map_err(|e| e.to_string())?;
    ensure!(f.fetch_count() == 3, "{} fetches: {:?}", f.fetch_count(), f.fetches());
    ensure!(graph.nodes.len() == 3, "{} documents", graph.nodes.len());
    ensure!(graph.dangling.is_empty(), "dangling {:?}", graph.dangling);
    for e in &graph.edges {
        ensure!(graph.resolve(&e.from, &e.reference).is_some(), "unresolved {} in {}", e.reference, e.from);
    }
    let validation = validate_schema(&graph);
    ensure!(warnings.is_empty() && validation.is_empty(), "warnings {warnings:?} {validation:?}");
    let edges = graph.edges.len();

    let broken = customers.replace("orders.yaml#/components/schemas/Order", "orders.yaml#/components/schemas/Missing");
    let mut f = multi_fetcher(&broken);
    let (graph, _) = load_schema_with(&root, &mut f).map_err(|e| e.to_string())?;
    let validation = validate_schema(&graph);
    ensure!(
        validation.iter().any(|w| w.code == WarningCode::DanglingRef),
        "no dangling-ref warning: {validation:?}"
    );
    let (model, _) = build_model(&graph);
    ensure!(!model.endpoints.is_empty(), "model lost its endpoints");
    Ok(format!("3 fetches, {edges} refs resolved; dangling ref → warning"))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "link chaining", limit: Duration::from_secs(60), run: c1_link_chaining },
        Criterion { id: 2, name: "schema validation", limit: Duration::from_secs(1), run: c2_schema_validation },
        Criterion { id: 3, name: "token auth", limit: Duration::from_secs(10), run: c3_token_auth },
        Criterion { id: 4, name: "rate limiter", limit: Duration::from_secs(5), run: c4_rate_limiter },
        Criterion { id: 5, name: "premature stop", limit: Duration::from_secs(15), run: c5_premature_stop },
        Criterion { id: 6, name: "coverage criteria", limit: Duration::from_secs(60), run: c6_coverage_criteria },
        Criterion { id: 7, name: "response dictionary", limit: Duration::from_secs(30), run: c7_response_dictionary },
        Criterion { id: 8, name: "cleanup", limit: Duration::from_secs(60), run: c8_cleanup },
        Criterion { id: 9, name: "derived params", limit: Duration::from_secs(10), run: c9_derived_params },
        Criterion { id: 10, name: "fault classification & summary", limit: Duration::from_secs(60), run: c10_fault_summary },
        Criterion { id: 11, name: "determinism", limit: Duration::from_secs(60), run: c11_determinism },
        Criterion { id: 12, name: "multi-file schemas", limit: Duration::from_secs(1), run: c12_multi_file },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let result = match result {
            Ok(_) if took > c.limit => Err(format!("took {took:.2?}, limit {:?}", c.limit)),
            other => other,
        };
        match result {
            Ok(detail) => println!("PASS {:>2} {} ({took:.2?}): {detail}", c.id, c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {} ({took:.2?}): {why}", c.id, c.name);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
