//! Test plans: naming, summaries, the plan-yaml and curl-script formats
//! and replay of emitted plans.

mod format;
mod replay;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::auth::{token_var, AuthMechanism, AuthSpec};
use crate::coverage::{ActionFault, ExecutedTest};
use crate::engine::singular;
use crate::faults::{FAULT_SCHEMA_MISMATCH, FAULT_SERVER_ERROR};
use crate::http::encode_path_segment;
use crate::model::{ApiModel, JsonValue};
use crate::testcase::{set_pointer, Action, ActionKind, Exchange, Outcome, Slot, TestCase};

pub use format::{emit_suite, render_curl, render_plan_yaml, EmitError, OutputFormat};
pub use replay::{parse_plan_yaml, replay_suite, ReplayReport, StepReport, TestReport};

pub const TIMEOUT_MS: u64 = 60_000;
pub const BASE_URL_VAR: &str = "BASE_URL";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SuiteHeader {
    pub name: String,
    pub created_with: String,
    pub base_url_var: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SuiteFile {
    pub suite: SuiteHeader,
    #[serde(default)]
    pub tests: Vec<TestPlan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FaultNote {
    /// 1-based step number.
    pub step: usize,
    pub code: u16,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Summary {
    pub calls: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<FaultNote>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub examples: Vec<String>,
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

impl Summary {
    /// The comment block shown above each plan.
    pub fn render(&self) -> String {
        let mut lines = vec!["Calls:".to_string()];
        lines.extend(self.calls.iter().enumerate().map(|(i, c)| format!("{} - {c}", i + 1)));
        if !self.faults.is_empty() {
            let mut codes: Vec<u16> = self.faults.iter().map(|f| f.code).collect();
            codes.sort_unstable();
            codes.dedup();
            let list = codes.iter().map(u16::to_string).collect::<Vec<_>>().join(", ");
            let kind = if codes.len() == 1 { "type-code" } else { "type-codes" };
            lines.push(format!("Found {} of {kind} {list}", plural(self.faults.len(), "potential fault")));
        }
        if !self.links.is_empty() {
            lines.push(format!("Followed {}:", plural(self.links.len(), "link")));
            lines.extend(self.links.iter().map(|l| format!("  {l}")));
        }
        if !self.examples.is_empty() {
            lines.push(format!("Used {}:", plural(self.examples.len(), "example")));
            lines.extend(self.examples.iter().map(|e| format!("  {e}")));
        }
        lines.join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Extract {
    pub var: String,
    pub from: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct LoginStep {
    pub auth: String,
    pub verb: String,
    pub path: String,
    pub content_type: String,
    pub payload: String,
    pub extract: Extract,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameValue {
    pub name: String,
    pub value: String,
}

/// A request body as JSON text; `null` is an explicit null body, an absent
/// body field means no body at all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PlanBody {
    pub media_type: String,
    pub json: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BodyCheck {
    pub pointer: String,
    /// JSON type observed at `pointer`.
    #[serde(rename = "type")]
    pub kind: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Expect {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    /// Exact codes or families such as `2xx`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub status_any_of: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<u16>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub body_checks: Vec<BodyCheck>,
}

impl Expect {
    pub fn accepts_status(&self, status: u16) -> bool {
        if let Some(s) = self.status {
            return s == status;
        }
        if self.status_any_of.is_empty() {
            return true;
        }
        self.status_any_of.iter().any(|e| match e.strip_suffix("xx") {
            Some(d) => d.parse::<u16>().is_ok_and(|d| status / 100 == d),
            None => e.parse::<u16>() == Ok(status),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PlanStep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    pub verb: String,
    pub path: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub query: Vec<NameValue>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub headers: Vec<NameValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<PlanBody>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extract: Vec<Extract>,
    pub expect: Expect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TestPlan {
    pub name: String,
    pub summary: Summary,
    pub timeout_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub login: Option<LoginStep>,
    pub steps: Vec<PlanStep>,
}

fn is_cleanup(a: &Action) -> bool {
    matches!(a.kind, ActionKind::Cleanup { .. })
}

fn camel_words(s: &str) -> String {
    s.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| {
            let mut c = w.chars();
            c.next().map(|f| f.to_ascii_uppercase().to_string() + c.as_str()).unwrap_or_default()
        })
        .collect()
}

/// Resource noun of a path: its last literal segment, singular when a
/// parameter follows it.
fn resource_noun(path: &str) -> String {
    let segs: Vec<&str> = path.split('/').filter(|s| !s.is_empty()).collect();
    let Some(pos) = segs.iter().rposition(|s| !s.starts_with('{')) else {
        return "Root".into();
    };
    let word = if pos + 1 < segs.len() { singular(segs[pos]) } else { segs[pos].to_string() };
    camel_words(&word)
}

/// `test_<index>_<verb>On<Resource><Outcome>`, from the last non-cleanup
/// action and the faults found.
pub fn name_test(index: usize, test: &TestCase, exchanges: &[Exchange], faults: &[ActionFault]) -> String {
    let named = test
        .actions
        .iter()
        .rposition(|a| !is_cleanup(a))
        .unwrap_or(test.actions.len().saturating_sub(1));
    let Some(action) = test.actions.get(named) else {
        return format!("test_{index}_empty");
    };
    let outcome = match exchanges.get(named).map(|e| &e.outcome) {
        _ if faults.iter().any(|f| f.fault.code == FAULT_SCHEMA_MISMATCH) => "ReturnsMismatchResponseWithSchema".to_string(),
        Some(Outcome::Response(r)) if r.status < 500 && faults.iter().any(|f| f.fault.code == FAULT_SERVER_ERROR) => {
            "CausesServerError".to_string()
        }
        Some(Outcome::Response(r)) => format!("Returns{}", r.status),
        Some(Outcome::LinkBroken(_)) => "HasBrokenLink".to_string(),
        Some(Outcome::NetworkError(_)) => "FailsToConnect".to_string(),
        Some(Outcome::NotExecuted) | None => "IsNotExecuted".to_string(),
    };
    format!("test_{index}_{}On{}{outcome}", action.verb.lower(), resource_noun(&action.path))
}

/// Calls with their statuses, faults, followed links and used examples.
pub fn summarize(test: &TestCase, exchanges: &[Exchange], faults: &[ActionFault]) -> Summary {
    let calls = test
        .actions
        .iter()
        .zip(exchanges)
        .map(|(a, e)| {
            let status = match &e.outcome {
                Outcome::Response(r) => r.status.to_string(),
                Outcome::LinkBroken(_) => "link broken".into(),
                Outcome::NetworkError(_) => "no response".into(),
                Outcome::NotExecuted => "not executed".into(),
            };
            format!("({status}) {}", a.endpoint())
        })
        .collect();
    let links = test
        .actions
        .iter()
        .filter_map(|a| match &a.kind {
            ActionKind::Link { status, link, .. } => Some(format!("{status}:{link}")),
            _ => None,
        })
        .collect();
    let examples = test
        .actions
        .iter()
        .flat_map(|a| a.meta.examples_used.iter().map(move |(slot, i)| format!("{} {slot} example {i}", a.endpoint())))
        .collect();
    let mut faults: Vec<FaultNote> = faults
        .iter()
        .map(|f| FaultNote {
            step: f.action + 1,
            code: f.fault.code,
            message: f.fault.message.clone(),
        })
        .collect();
    faults.sort_by_key(|a| (a.step, a.code));
    Summary {
        calls,
        faults,
        links,
        examples,
    }
}

fn placeholder(var: &str) -> String {
    format!("${{{var}}}")
}

fn step_path(action: &Action, bound: &BTreeMap<&Slot, &str>) -> String {
    let mut out = String::new();
    let mut rest = action.path.as_str();
    while let Some(start) = rest.find('{') {
        let Some(len) = rest[start..].find('}') else { break };
        out.push_str(&rest[..start]);
        let name = &rest[start + 1..start + len];
        match bound.get(&Slot::PathParam(name.to_string())) {
            Some(var) => out.push_str(&placeholder(var)),
            None => {
                let v = action.path_params.get(name).map(JsonValue::render_scalar).unwrap_or_default();
                out.push_str(&encode_path_segment(&v));
            }
        }
        rest = &rest[start + len + 1..];
    }
    out.push_str(rest);
    out
}

fn build_step(
    j: usize,
    executed: &ExecutedTest,
    model: &ApiModel,
    auth: Option<&AuthSpec>,
) -> PlanStep {
    let test = &executed.test;
    let action = &test.actions[j];
    let bound: BTreeMap<&Slot, &str> = test.bindings_into(j).map(|b| (&b.slot, b.id.as_str())).collect();

    let mut query = Vec::new();
    for (k, v) in &action.query {
        if let Some(var) = bound.get(&Slot::QueryParam(k.clone())) {
            query.push(NameValue {
                name: k.clone(),
                value: placeholder(var),
            });
            continue;
        }
        match v {
            JsonValue::Undefined => {}
            JsonValue::Array(items) => query.extend(items.iter().map(|i| NameValue {
                name: k.clone(),
                value: i.render_scalar(),
            })),
            other => query.push(NameValue {
                name: k.clone(),
                value: other.render_scalar(),
            }),
        }
    }

    let mut headers: Vec<NameValue> = action
        .headers
        .iter()
        .map(|(k, v)| NameValue {
            name: k.clone(),
            value: bound.get(&Slot::Header(k.clone())).map_or_else(|| v.clone(), |var| placeholder(var)),
        })
        .collect();
    match auth.map(|a| (&a.name, &a.mechanism)) {
        Some((_, AuthMechanism::StaticHeaders(hs))) => headers.extend(hs.iter().map(|(k, v)| NameValue {
            name: k.clone(),
            value: v.clone(),
        })),
        Some((name, AuthMechanism::LoginEndpoint(flow))) => headers.push(NameValue {
            name: flow.header_name.clone(),
            value: placeholder(&token_var(name)),
        }),
        None => {}
    }

    let body = action.body.as_ref().filter(|b| !b.value.is_undefined()).map(|b| {
        let mut value = b.value.clone();
        for (slot, var) in &bound {
            if let Slot::BodyField(p) = slot {
                set_pointer(&mut value, p, JsonValue::String(placeholder(var)));
            }
        }
        let media_type = if b.media_type.contains('*') { "application/json".to_string() } else { b.media_type.clone() };
        PlanBody {
            media_type,
            json: value.to_json_string(),
        }
    });

    let extract = test
        .bindings
        .iter()
        .filter(|b| b.source_action == j)
        .map(|b| Extract {
            var: b.id.clone(),
            from: b.extraction.to_string(),
            prefix: None,
        })
        .fold(Vec::new(), |mut acc: Vec<Extract>, e| {
            if !acc.iter().any(|x| x.var == e.var) {
                acc.push(e);
            }
            acc
        });

    let exchange = executed.exchanges.get(j);
    let fault = executed.faults.iter().filter(|f| f.action == j).map(|f| f.fault.code).max();
    let mut expect = Expect::default();
    if is_cleanup(action) {
        expect.status_any_of = vec!["2xx".into(), "404".into()];
    } else {
        expect.status = exchange.and_then(Exchange::status);
        expect.fault = fault;
    }
    if fault == Some(FAULT_SCHEMA_MISMATCH) {
        expect.body_checks = mismatch_checks(action, exchange, model);
    }
    let comment = executed
        .faults
        .iter()
        .filter(|f| f.action == j)
        .map(|f| f.fault.headline())
        .collect::<Vec<_>>();

    PlanStep {
        comment: (!comment.is_empty()).then(|| comment.join("\n")),
        verb: action.verb.as_str().to_string(),
        path: step_path(action, &bound),
        query,
        headers,
        body,
        extract,
        expect,
    }
}

/// Observed types at the paths where the response broke its schema.
fn mismatch_checks(action: &Action, exchange: Option<&Exchange>, model: &ApiModel) -> Vec<BodyCheck> {
    let (Some(ep), Some(resp)) = (model.endpoint(&action.endpoint()), exchange.and_then(Exchange::response)) else {
        return Vec::new();
    };
    let Some(schema) = ep.response_for(resp.status).and_then(|r| r.schema.as_ref()) else {
        return Vec::new();
    };
    let body = resp.body_json();
    let mut checks: Vec<BodyCheck> = schema
        .validate(&body)
        .iter()
        .map(|m| {
            let pointer = m.path().to_string();
            let observed = body.pointer(&crate::model::BodyPointer::parse(&pointer));
            BodyCheck {
                kind: observed.map_or("undefined", |v| match v.type_name() {
                    "integer" => "number",
                    t => t,
                }).to_string(),
                pointer,
            }
        })
        .collect();
    checks.dedup();
    checks
}

/// The plan of one executed test, `index` being its position in the suite.
pub fn build_plan(index: usize, executed: &ExecutedTest, model: &ApiModel, auth: Option<&AuthSpec>) -> TestPlan {
    let test = &executed.test;
    let login = match auth.map(|a| (&a.name, &a.mechanism)) {
        Some((name, AuthMechanism::LoginEndpoint(flow))) => Some(LoginStep {
            auth: name.clone(),
            verb: flow.verb.as_str().to_string(),
            path: flow.endpoint.clone(),
            content_type: flow.content_type.clone(),
            payload: flow.payload.clone(),
            extract: Extract {
                var: token_var(name),
                from: flow.token_extraction.to_string(),
                prefix: Some(flow.header_prefix.clone()).filter(|p| !p.is_empty()),
            },
        }),
        _ => None,
    };
    TestPlan {
        name: name_test(index, test, &executed.exchanges, &executed.faults),
        summary: summarize(test, &executed.exchanges, &executed.faults),
        timeout_ms: TIMEOUT_MS,
        login,
        steps: (0..test.actions.len()).map(|j| build_step(j, executed, model, auth)).collect(),
    }
}

pub fn build_suite(name: &str, tests: &[&ExecutedTest], model: &ApiModel, auth: Option<&AuthSpec>) -> SuiteFile {
    SuiteFile {
        suite: SuiteHeader {
            name: name.to_string(),
            created_with: concat!("apifuzz ", env!("CARGO_PKG_VERSION")).to_string(),
            base_url_var: BASE_URL_VAR.to_string(),
        },
        tests: tests
            .iter()
            .enumerate()
            .map(|(i, t)| build_plan(i, t, model, auth))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faults::Fault;
    use crate::http::{HttpResponse, Method};

    fn resp(status: u16) -> Exchange {
        Exchange {
            request: None,
            outcome: Outcome::Response(HttpResponse::new(status, "")),
        }
    }

    #[test]
    fn single_get_items_name() {
        let t = TestCase::single(Action::new(Method::Get, "/items"));
        assert_eq!(name_test(0, &t, &[resp(200)], &[]), "test_0_getOnItemsReturns200");
    }

    #[test]
    fn fig11_shape() {
        let mut t = TestCase::single(Action::new(Method::Post, "/api/links/create"));
        let mut get = Action::new(Method::Get, "/api/links/users/{name}/{code}");
        get.kind = ActionKind::Link {
            source: 0,
            status: "200".into(),
            link: "LinkToGetUser".into(),
        };
        t.actions.push(get);
        let faults = [ActionFault {
            action: 0,
            endpoint: t.actions[0].endpoint(),
            fault: Fault {
                code: 101,
                message: "m".into(),
            },
        }];
        let ex = [resp(200), resp(200)];
        assert_eq!(name_test(1, &t, &ex, &faults), "test_1_getOnUserReturnsMismatchResponseWithSchema");
        assert_eq!(
            summarize(&t, &ex, &faults).render(),
            "Calls:\n1 - (200) POST:/api/links/create\n2 - (200) GET:/api/links/users/{name}/{code}\nFound 1 potential fault of type-code 101\nFollowed 1 link:\n  200:LinkToGetUser"
        );
    }

    #[test]
    fn names_are_content_determined() {
        let t = TestCase::single(Action::new(Method::Delete, "/api/crud/user/{id}"));
        let a = name_test(3, &t, &[resp(404)], &[]);
        let b = name_test(7, &t, &[resp(404)], &[]);
        assert_eq!(a.strip_prefix("test_3_"), b.strip_prefix("test_7_"));
        assert_eq!(a, "test_3_deleteOnUserReturns404");
    }

    #[test]
    fn no_fault_summary_is_call_list_only() {
        let t = TestCase::single(Action::new(Method::Get, "/"));
        assert_eq!(summarize(&t, &[resp(200)], &[]).render(), "Calls:\n1 - (200) GET:/");
        assert_eq!(name_test(0, &t, &[resp(200)], &[]), "test_0_getOnRootReturns200");
    }

    #[test]
    fn expectations() {
        let e = Expect {
            status_any_of: vec!["2xx".into(), "404".into()],
            ..Expect::default()
        };
        assert!(e.accepts_status(204) && e.accepts_status(404) && !e.accepts_status(400));
    }
}
