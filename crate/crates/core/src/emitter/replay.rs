use std::collections::BTreeMap;
use std::fmt;

use super::{LoginStep, PlanStep, SuiteFile, TestPlan};
use crate::http::{encode_path_segment, HttpRequest, HttpResponse, Method, Transport};
use crate::model::{BodyPointer, JsonValue};

pub fn parse_plan_yaml(text: &str) -> Result<SuiteFile, serde_yaml::Error> {
    serde_yaml::from_str(text)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepReport {
    pub step: usize,
    pub status: Option<u16>,
    pub problems: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestReport {
    pub name: String,
    pub steps: Vec<StepReport>,
    pub error: Option<String>,
}

impl TestReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.steps.iter().all(|s| s.problems.is_empty())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayReport {
    pub tests: Vec<TestReport>,
}

impl ReplayReport {
    pub fn passed(&self) -> usize {
        self.tests.iter().filter(|t| t.passed()).count()
    }

    pub fn failed(&self) -> usize {
        self.tests.len() - self.passed()
    }
}

impl fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tests {
            writeln!(f, "{} {}", if t.passed() { "PASS" } else { "FAIL" }, t.name)?;
            if let Some(e) = &t.error {
                writeln!(f, "  {e}")?;
            }
            for s in &t.steps {
                for p in &s.problems {
                    writeln!(f, "  step {}: {p}", s.step)?;
                }
            }
        }
        write!(f, "{} passed, {} failed", self.passed(), self.failed())
    }
}

#[derive(Default)]
struct Vars(BTreeMap<String, JsonValue>);

impl Vars {
    fn raw(&self, name: &str) -> Option<String> {
        self.0.get(name).map(JsonValue::render_scalar)
    }

    /// Replaces `${var}`; unknown variables are left as written.
    fn substitute(&self, text: &str, encode: bool) -> String {
        let mut out = String::new();
        let mut rest = text;
        while let Some(start) = rest.find("${") {
            let Some(len) = rest[start..].find('}') else { break };
            out.push_str(&rest[..start]);
            let name = &rest[start + 2..start + len];
            match self.raw(name) {
                Some(v) if encode => out.push_str(&encode_path_segment(&v)),
                Some(v) => out.push_str(&v),
                None => out.push_str(&rest[start..start + len + 1]),
            }
            rest = &rest[start + len + 1..];
        }
        out.push_str(rest);
        out
    }

    /// A JSON string consisting of one placeholder takes the variable's JSON
    /// value, keeping its type.
    fn substitute_json(&self, json: &str) -> String {
        let mut out = json.to_string();
        for (k, v) in &self.0 {
            out = out.replace(&format!("\"${{{k}}}\""), &v.to_json_string());
        }
        self.substitute(&out, false)
    }
}

fn parse_verb(v: &str) -> Result<Method, String> {
    v.parse::<Method>().map_err(|_| format!("unknown verb `{v}`"))
}

fn login(step: &LoginStep, transport: &mut dyn Transport, vars: &mut Vars) -> Result<(), String> {
    let mut r = HttpRequest::new(parse_verb(&step.verb)?, step.path.clone());
    r.set_header("Content-Type", step.content_type.clone());
    r.body = Some(step.payload.clone());
    let resp = transport.send(&r).map_err(|e| format!("login failed: {e}"))?;
    if !resp.is_success() {
        return Err(format!("login returned {}", resp.status));
    }
    let body = resp.body_json();
    let token = body
        .pointer(&BodyPointer::parse(&step.extract.from))
        .filter(|v| !v.is_undefined() && !v.is_null())
        .ok_or_else(|| format!("login response has no token at {}", step.extract.from))?;
    let prefix = step.extract.prefix.clone().unwrap_or_default();
    vars.0.insert(step.extract.var.clone(), JsonValue::String(prefix + &token.render_scalar()));
    Ok(())
}

fn check(step: &PlanStep, resp: &HttpResponse) -> Vec<String> {
    let mut problems = Vec::new();
    if !step.expect.accepts_status(resp.status) {
        let expected = step.expect.status.map_or_else(|| step.expect.status_any_of.join("|"), |s| s.to_string());
        problems.push(format!("status {} (expected {expected})", resp.status));
    }
    if !step.expect.body_checks.is_empty() {
        let body = resp.body_json();
        for c in &step.expect.body_checks {
            let found = match body.pointer(&BodyPointer::parse(&c.pointer)).map(JsonValue::type_name) {
                None => "undefined",
                Some("integer") => "number",
                Some(t) => t,
            };
            if found != c.kind {
                problems.push(format!("type at '{}' is {found} (expected {})", c.pointer, c.kind));
            }
        }
    }
    problems
}

fn run_step(n: usize, step: &PlanStep, transport: &mut dyn Transport, vars: &mut Vars) -> StepReport {
    let mut report = StepReport {
        step: n,
        status: None,
        problems: Vec::new(),
    };
    let verb = match parse_verb(&step.verb) {
        Ok(v) => v,
        Err(e) => {
            report.problems.push(e);
            return report;
        }
    };
    let mut r = HttpRequest::new(verb, vars.substitute(&step.path, true));
    r.query = step.query.iter().map(|q| (q.name.clone(), vars.substitute(&q.value, false))).collect();
    for h in &step.headers {
        r.set_header(&h.name, vars.substitute(&h.value, false));
    }
    if let Some(b) = &step.body {
        r.set_header("Content-Type", b.media_type.clone());
        r.body = Some(vars.substitute_json(&b.json));
    }
    let resp = match transport.send(&r) {
        Ok(resp) => resp,
        Err(e) => {
            report.problems.push(format!("no response: {e}"));
            return report;
        }
    };
    report.status = Some(resp.status);
    report.problems = check(step, &resp);
    if !step.extract.is_empty() {
        let body = resp.body_json();
        for e in &step.extract {
            match body.pointer(&BodyPointer::parse(&e.from)).filter(|v| !v.is_undefined()) {
                Some(v) => {
                    vars.0.insert(e.var.clone(), v.clone());
                }
                None => report.problems.push(format!("nothing to extract at {}", e.from)),
            }
        }
    }
    report
}

fn replay_test(t: &TestPlan, transport: &mut dyn Transport) -> TestReport {
    let mut vars = Vars::default();
    let mut report = TestReport {
        name: t.name.clone(),
        steps: Vec::new(),
        error: None,
    };
    if let Some(l) = &t.login {
        if let Err(e) = login(l, transport, &mut vars) {
            report.error = Some(e);
            return report;
        }
    }
    for (i, step) in t.steps.iter().enumerate() {
        report.steps.push(run_step(i + 1, step, transport, &mut vars));
    }
    report
}

/// Runs every test of the suite in order and checks its expectations.
pub fn replay_suite(suite: &SuiteFile, transport: &mut dyn Transport) -> ReplayReport {
    ReplayReport {
        tests: suite.tests.iter().map(|t| replay_test(t, transport)).collect(),
    }
}
