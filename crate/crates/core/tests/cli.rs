use std::path::PathBuf;
use std::process::{Command, Output};

fn apifuzz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apifuzz"))
        .args(args)
        .env_remove("APIFUZZ_MAX_TIME")
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn fuzz_without_schema_prints_usage_and_exits_2() {
    let o = apifuzz(&["fuzz", "--baseUrl", "sim:"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn validate_exit_codes() {
    assert_eq!(apifuzz(&["validate", "--schema", &fixture("links-faulty.yaml")]).status.code(), Some(1));
    assert_eq!(apifuzz(&["validate", "--schema", &fixture("links.yaml")]).status.code(), Some(0));
    assert_eq!(apifuzz(&["validate", "--schema", "/nonexistent/x.yaml"]).status.code(), Some(2));
}

#[test]
fn validate_json_output() {
    let o = apifuzz(&["validate", "--json", "--schema", &fixture("links-faulty.yaml")]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(v.as_array().is_some_and(|a| !a.is_empty()));
}

#[test]
fn config_errors_exit_2() {
    let out = tempfile::tempdir().unwrap();
    let dir = out.path().to_str().unwrap();
    let base = ["fuzz", "--schema", &fixture("links.yaml"), "--baseUrl", "sim:", "--outputDir", dir];
    let with = |extra: &[&str]| apifuzz(&[&base[..], extra].concat()).status.code();
    assert_eq!(with(&["--ratePerMinute", "0"]), Some(2));
    assert_eq!(with(&["--maxTime", "10s", "--prematureStop", "1m"]), Some(2));
    assert_eq!(with(&["--endpointPrefix", "/nothing"]), Some(2));
    assert_eq!(with(&["--derivedParams", "/nonexistent.toml"]), Some(2));
    assert_eq!(with(&["--maxTime", "forever"]), Some(2));
    assert_eq!(with(&["--header", "no-colon"]), Some(2));
}

#[test]
fn unreachable_api_exits_3() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let out = tempfile::tempdir().unwrap();
    let o = apifuzz(&[
        "fuzz",
        "--schema",
        &fixture("ping.yaml"),
        "--baseUrl",
        &format!("http://127.0.0.1:{port}"),
        "--maxTime",
        "30s",
        "--outputDir",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn env_overrides_flags_defaults() {
    let out = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_apifuzz"))
        .args(["fuzz", "--schema", &fixture("enum.yaml"), "--baseUrl", "sim:"])
        .env("APIFUZZ_MAX_TIME", "5s")
        .env("APIFUZZ_OUTPUT_DIR", out.path())
        .env("APIFUZZ_SUITE_NAME", "fromenv")
        .env("APIFUZZ_FORMAT", "curl-script")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.path().join("fromenv.curl.sh").exists());
    assert!(!out.path().join("fromenv.plan.yaml").exists());
    assert!(stdout(&o).contains("after 5.0s") || stdout(&o).contains("all-covered"), "{}", stdout(&o));
}

#[test]
fn fuzz_then_replay_on_simulation() {
    let out = tempfile::tempdir().unwrap();
    let dir = out.path().to_str().unwrap();
    let o = apifuzz(&[
        "fuzz",
        "--schema",
        &fixture("derived.yaml"),
        "--baseUrl",
        "sim:",
        "--derivedParams",
        &fixture("derived-rules.toml"),
        "--maxTime",
        "20s",
        "--outputDir",
        dir,
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("POST:/api/derived/bind-card"));
    let plan = out.path().join("apifuzz.plan.yaml");
    let r = apifuzz(&["replay", "--plan", plan.to_str().unwrap(), "--baseUrl", "sim:"]);
    assert_eq!(r.status.code(), Some(0), "{}", stdout(&r));
    assert!(stdout(&r).contains("0 failed"));
}

#[test]
fn replay_missing_plan_exits_2() {
    assert_eq!(apifuzz(&["replay", "--plan", "/nonexistent.plan.yaml", "--baseUrl", "sim:"]).status.code(), Some(2));
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(apifuzz(&["--help"]).status.code(), Some(0));
    assert_eq!(apifuzz(&["--version"]).status.code(), Some(0));
    assert!(stdout(&apifuzz(&["fixtures", "--help"])).contains("--tokenLifetime"));
}
