//! Fuzz → minimize → emit → replay on the simulated fixtures.

use std::sync::Arc;
use std::time::Duration;

use apifuzz::auth::{parse_auth_config_str, select_auth, AuthSpec, ConfigFormat};
use apifuzz::clock::VirtualClock;
use apifuzz::coverage::minimized_suite;
use apifuzz::emitter::{
    build_suite, parse_plan_yaml, render_curl, render_plan_yaml, replay_suite, Expect, PlanBody, PlanStep, SuiteFile,
    SuiteHeader, Summary, TestPlan,
};
use apifuzz::engine::{
    parse_derived_rules_str, run_session, DerivedParams, SessionConfig, SessionEnv, TransformRegistry,
    MOCK_CIPHER_SECRET, MOCK_SIGNING_SECRET,
};
use apifuzz::fixtures::{
    FixtureApi, SimTransport, CRUD_SCHEMA, DERIVED_RULES, DERIVED_SCHEMA, ENUM_SCHEMA, LINKS_SCHEMA, LOGINTOKEN_AUTH,
    LOGINTOKEN_SCHEMA,
};
use apifuzz::model::{build_model, ApiModel};
use apifuzz::schema::{load_schema_with, MemoryFetcher, SchemaSource};
use proptest::prelude::*;

fn model_of(text: &str) -> ApiModel {
    let mut f = MemoryFetcher::default();
    f.insert("http://fixtures.local/s.yaml", text);
    let (g, _) = load_schema_with(&SchemaSource::parse("http://fixtures.local/s.yaml").unwrap(), &mut f).unwrap();
    build_model(&g).0
}

fn sim_transport(seed: u64) -> (Arc<FixtureApi>, SimTransport) {
    let clock = Arc::new(VirtualClock::new());
    let api = Arc::new(FixtureApi::new(clock.clone()));
    (api.clone(), SimTransport::new(api, clock, seed))
}

fn fuzz_suite(schema: &str, auth: Option<AuthSpec>, derived: Option<DerivedParams>, seed: u64) -> (ApiModel, SuiteFile) {
    let model = model_of(schema);
    let clock = Arc::new(VirtualClock::new());
    let api = Arc::new(FixtureApi::new(clock.clone()));
    let env = SessionEnv {
        transport: Box::new(SimTransport::new(api, clock.clone(), seed)),
        clock,
        auth: auth.clone(),
        derived,
    };
    let mut cfg = SessionConfig::new("sim:", Duration::from_secs(120));
    cfg.premature_stop = Some(Duration::from_secs(20));
    cfg.seed = seed;
    let outcome = run_session(&model, &cfg, env).unwrap();
    let suite = build_suite("pipeline", &minimized_suite(&outcome.archive), &model, auth.as_ref());
    (model, suite)
}

fn logintoken_auth() -> AuthSpec {
    select_auth(parse_auth_config_str(LOGINTOKEN_AUTH, ConfigFormat::Toml, "auth").unwrap(), None)
        .unwrap()
        .unwrap()
}

fn derived_params() -> DerivedParams {
    DerivedParams::new(
        parse_derived_rules_str(DERIVED_RULES, ConfigFormat::Toml, "rules").unwrap(),
        TransformRegistry::with_defaults(MOCK_CIPHER_SECRET, MOCK_SIGNING_SECRET),
    )
    .unwrap()
}

fn assert_replays_green(suite: &SuiteFile) {
    assert!(!suite.tests.is_empty());
    let text = render_plan_yaml(suite).unwrap();
    let parsed = parse_plan_yaml(&text).unwrap();
    assert_eq!(&parsed, suite);
    let (_, mut transport) = sim_transport(99);
    let report = replay_suite(&parsed, &mut transport);
    assert_eq!(report.failed(), 0, "{report}");
}

#[test]
fn links_suite_replays() {
    assert_replays_green(&fuzz_suite(LINKS_SCHEMA, None, None, 1).1);
}

#[test]
fn crud_suite_replays() {
    assert_replays_green(&fuzz_suite(CRUD_SCHEMA, None, None, 2).1);
}

#[test]
fn enum_suite_replays() {
    assert_replays_green(&fuzz_suite(ENUM_SCHEMA, None, None, 3).1);
}

#[test]
fn logintoken_suite_replays_with_fresh_login() {
    let (_, suite) = fuzz_suite(LOGINTOKEN_SCHEMA, Some(logintoken_auth()), None, 4);
    assert!(suite.tests.iter().all(|t| t.login.is_some()));
    assert!(!render_plan_yaml(&suite).unwrap().contains("token-1"));
    assert_replays_green(&suite);
}

#[test]
fn derived_suite_replays() {
    let (_, suite) = fuzz_suite(DERIVED_SCHEMA, None, Some(derived_params()), 5);
    assert!(suite.tests.iter().any(|t| t.steps.iter().any(|s| s.expect.status == Some(200))));
    assert_replays_green(&suite);
}

#[test]
fn fault_plans_retrigger_their_fault() {
    let (_, suite) = fuzz_suite(LINKS_SCHEMA, None, None, 6);
    let faulty: Vec<&TestPlan> = suite
        .tests
        .iter()
        .filter(|t| t.steps.iter().any(|s| s.expect.fault == Some(101)))
        .collect();
    assert!(!faulty.is_empty());
    for t in faulty {
        let step = t.steps.iter().find(|s| s.expect.fault == Some(101)).unwrap();
        assert!(!step.expect.body_checks.is_empty(), "{} has no body checks", t.name);
    }
}

#[test]
fn link_values_are_never_inlined() {
    let (_, suite) = fuzz_suite(LINKS_SCHEMA, None, None, 7);
    for t in &suite.tests {
        for s in &t.steps {
            if s.path.starts_with("/api/links/users/") && t.steps.len() > 1 {
                assert!(s.path.contains("${link_"), "{}: {}", t.name, s.path);
            }
        }
    }
}

#[test]
fn created_ids_are_extracted_for_cleanup() {
    let (_, suite) = fuzz_suite(CRUD_SCHEMA, None, None, 8);
    let mut checked = 0;
    for t in &suite.tests {
        if !t.steps.iter().any(|s| s.verb == "POST") {
            continue;
        }
        for s in t.steps.iter().filter(|s| s.verb == "DELETE" && !s.expect.status_any_of.is_empty()) {
            assert!(s.path.contains("${created_"), "{}: cleanup on {}", t.name, s.path);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn emission_is_byte_deterministic() {
    let a = fuzz_suite(CRUD_SCHEMA, None, None, 9).1;
    let b = fuzz_suite(CRUD_SCHEMA, None, None, 9).1;
    assert_eq!(render_plan_yaml(&a).unwrap(), render_plan_yaml(&b).unwrap());
    assert_eq!(render_curl(&a), render_curl(&b));
}

#[test]
fn replay_reports_status_drift() {
    let (_, mut suite) = fuzz_suite(LINKS_SCHEMA, None, None, 10);
    suite.tests[0].steps[0].expect.status = Some(418);
    let (_, mut transport) = sim_transport(0);
    let report = replay_suite(&suite, &mut transport);
    assert_eq!(report.failed(), 1);
    assert!(report.to_string().contains("expected 418"));
}

fn text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z0-9 _./{}-]{0,20}",
        any::<String>(),
        Just("null".to_string()),
        Just("- 'x': \"y\"\n#z".to_string()),
    ]
}

proptest! {
    #[test]
    fn plan_yaml_round_trips(
        name in "[a-z_0-9]{1,20}",
        call in text(),
        path in text(),
        json in text(),
        status in proptest::option::of(100u16..600),
    ) {
        let suite = SuiteFile {
            suite: SuiteHeader { name: "p".into(), created_with: "apifuzz".into(), base_url_var: "BASE_URL".into() },
            tests: vec![TestPlan {
                name,
                summary: Summary { calls: vec![call], ..Summary::default() },
                timeout_ms: 60_000,
                login: None,
                steps: vec![PlanStep {
                    comment: None,
                    verb: "POST".into(),
                    path,
                    query: vec![],
                    headers: vec![],
                    body: Some(PlanBody { media_type: "application/json".into(), json }),
                    extract: vec![],
                    expect: Expect { status, ..Expect::default() },
                }],
            }],
        };
        let text = render_plan_yaml(&suite).unwrap();
        prop_assert_eq!(parse_plan_yaml(&text).unwrap(), suite);
    }
}
