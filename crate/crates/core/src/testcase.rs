//! Test cases: ordered HTTP actions plus the bindings that carry values
//! extracted from earlier responses into later requests.

use std::fmt;

use indexmap::IndexMap;

use crate::gen::{InputAssignment, Generator};
use crate::http::{encode_path_segment, HttpRequest, HttpResponse, Method};
use crate::model::{BodyPointer, EndpointKey, EndpointSpec, JsonValue, ParamLocation};

/// Where a bound value is written in the target action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    PathParam(String),
    QueryParam(String),
    Header(String),
    BodyField(BodyPointer),
}

impl Slot {
    pub fn for_param(location: ParamLocation, name: &str) -> Slot {
        match location {
            ParamLocation::Path => Slot::PathParam(name.to_string()),
            ParamLocation::Query => Slot::QueryParam(name.to_string()),
            ParamLocation::Header => Slot::Header(name.to_string()),
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::PathParam(n) => write!(f, "path.{n}"),
            Slot::QueryParam(n) => write!(f, "query.{n}"),
            Slot::Header(n) => write!(f, "header.{n}"),
            Slot::BodyField(p) => write!(f, "body{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    /// Variable name in emitted plans, e.g. `link_0__data_id`.
    pub id: String,
    pub source_action: usize,
    pub extraction: BodyPointer,
    pub target_action: usize,
    pub slot: Slot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionKind {
    Fuzz,
    /// Follows `link` declared under response `status` of action `source`.
    Link { source: usize, status: String, link: String },
    /// Deletes what action `created_by` created.
    Cleanup { created_by: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub media_type: String,
    pub value: JsonValue,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActionMeta {
    /// (slot designator, example index) for slots filled from examples.
    pub examples_used: Vec<(String, usize)>,
    /// Path values taken from the response dictionary.
    pub dictionary_sourced: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub verb: Method,
    /// Path template, e.g. `/api/links/users/{name}/{code}`.
    pub path: String,
    pub path_params: IndexMap<String, JsonValue>,
    /// `Undefined` values are not sent.
    pub query: IndexMap<String, JsonValue>,
    pub headers: IndexMap<String, String>,
    pub body: Option<Body>,
    pub kind: ActionKind,
    pub meta: ActionMeta,
}

impl Action {
    pub fn new(verb: Method, path: impl Into<String>) -> Action {
        Action {
            verb,
            path: path.into(),
            path_params: IndexMap::new(),
            query: IndexMap::new(),
            headers: IndexMap::new(),
            body: None,
            kind: ActionKind::Fuzz,
            meta: ActionMeta::default(),
        }
    }

    pub fn endpoint(&self) -> EndpointKey {
        EndpointKey::new(self.verb, self.path.clone())
    }

    /// Random inputs for `ep`. An assignment pins optional-query presence
    /// and swept enum values; without one, optional parameters are present
    /// with probability 0.5.
    pub fn generate(ep: &EndpointSpec, assignment: Option<&InputAssignment>, gen: &mut Generator) -> Action {
        let mut a = Action::new(ep.verb, ep.path.clone());
        let mut optional_idx = 0;
        for p in &ep.params {
            let present = match (p.location, p.required) {
                (_, true) => true,
                (ParamLocation::Query, false) => {
                    let bit = assignment.and_then(|asg| asg.mask.as_bytes().get(optional_idx).copied());
                    optional_idx += 1;
                    match bit {
                        Some(b) => b == b'1',
                        None => gen.chance(0.5),
                    }
                }
                (_, false) => gen.chance(0.5),
            };
            if !present {
                continue;
            }
            let value = match assignment.and_then(|asg| asg.fixed_value(p.location, &p.name)) {
                Some(v) => v.clone(),
                None => {
                    let (v, ex) = gen.slot(&p.schema, &p.all_examples());
                    if let Some(i) = ex {
                        a.meta.examples_used.push((p.designator(), i));
                    }
                    v
                }
            };
            match p.location {
                ParamLocation::Path => {
                    a.path_params.insert(p.name.clone(), value);
                }
                ParamLocation::Query => {
                    a.query.insert(p.name.clone(), value);
                }
                ParamLocation::Header => {
                    a.headers.insert(p.name.clone(), value.render_scalar());
                }
            }
        }
        if ep.verb.has_body() {
            if let Some(b) = ep.json_body() {
                if ep.body_required || gen.chance(0.9) {
                    let (value, ex) = gen.slot(&b.schema, &b.schema.examples);
                    if let Some(i) = ex {
                        a.meta.examples_used.push(("body".into(), i));
                    }
                    a.body = Some(Body {
                        media_type: b.media_type.clone(),
                        value,
                    });
                }
            }
        }
        a
    }

    /// Presence mask of `ep`'s optional query parameters in this action.
    pub fn optional_mask(&self, ep: &EndpointSpec) -> String {
        crate::gen::optional_query_params(ep)
            .iter()
            .map(|p| if self.query.get(&p.name).is_some_and(|v| !v.is_undefined()) { '1' } else { '0' })
            .collect()
    }

    pub fn param_value(&self, location: ParamLocation, name: &str) -> Option<&JsonValue> {
        let v = match location {
            ParamLocation::Path => self.path_params.get(name),
            ParamLocation::Query => self.query.get(name),
            ParamLocation::Header => return None,
        };
        v.filter(|v| !v.is_undefined())
    }

    /// Writes `value` into `slot`.
    pub fn set_slot(&mut self, slot: &Slot, value: JsonValue) {
        match slot {
            Slot::PathParam(n) => {
                self.path_params.insert(n.clone(), value);
            }
            Slot::QueryParam(n) => {
                self.query.insert(n.clone(), value);
            }
            Slot::Header(n) => {
                self.headers.insert(n.clone(), value.render_scalar());
            }
            Slot::BodyField(p) => {
                let body = self.body.get_or_insert_with(|| Body {
                    media_type: "application/json".into(),
                    value: JsonValue::Object(IndexMap::new()),
                });
                set_pointer(&mut body.value, p, value);
            }
        }
    }

    /// Concrete path with parameters substituted and encoded.
    pub fn concrete_path(&self) -> String {
        let mut out = String::new();
        let mut rest = self.path.as_str();
        while let Some(start) = rest.find('{') {
            let Some(len) = rest[start..].find('}') else { break };
            out.push_str(&rest[..start]);
            let name = &rest[start + 1..start + len];
            let v = self.path_params.get(name).map(JsonValue::render_scalar).unwrap_or_default();
            out.push_str(&encode_path_segment(&v));
            rest = &rest[start + len + 1..];
        }
        out.push_str(rest);
        out
    }

    pub fn to_request(&self) -> HttpRequest {
        let mut r = HttpRequest::new(self.verb, self.concrete_path());
        for (k, v) in &self.query {
            match v {
                JsonValue::Undefined => {}
                JsonValue::Array(items) => r.query.extend(items.iter().map(|i| (k.clone(), i.render_scalar()))),
                other => r.query.push((k.clone(), other.render_scalar())),
            }
        }
        for (k, v) in &self.headers {
            r.set_header(k, v.clone());
        }
        if let Some(b) = &self.body {
            if !b.value.is_undefined() {
                let media = if b.media_type.contains('*') { "application/json" } else { b.media_type.as_str() };
                r.set_header("Content-Type", media);
                r.body = Some(b.value.to_json_string());
            }
        }
        r
    }
}

/// Sets the value at `pointer`, creating intermediate objects.
pub fn set_pointer(root: &mut JsonValue, pointer: &BodyPointer, value: JsonValue) {
    let mut cur = root;
    for seg in pointer.segments() {
        if !matches!(cur, JsonValue::Object(_) | JsonValue::Array(_)) {
            *cur = JsonValue::Object(IndexMap::new());
        }
        cur = match cur {
            JsonValue::Array(items) => match seg.parse::<usize>() {
                Ok(i) if i < items.len() => &mut items[i],
                _ => return,
            },
            JsonValue::Object(map) => map.entry(seg.clone()).or_insert(JsonValue::Undefined),
            _ => unreachable!(),
        };
    }
    *cur = value;
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TestCase {
    pub actions: Vec<Action>,
    pub bindings: Vec<Binding>,
}

impl TestCase {
    pub fn single(action: Action) -> TestCase {
        TestCase {
            actions: vec![action],
            bindings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn bindings_into(&self, target: usize) -> impl Iterator<Item = &Binding> {
        self.bindings.iter().filter(move |b| b.target_action == target)
    }

    /// Every binding reads from an earlier action and writes to an
    /// existing one.
    pub fn check_topology(&self) -> Result<(), String> {
        for b in &self.bindings {
            if b.source_action >= b.target_action {
                return Err(format!(
                    "binding `{}` reads action {} but feeds action {}",
                    b.id, b.source_action, b.target_action
                ));
            }
            if b.target_action >= self.actions.len() {
                return Err(format!("binding `{}` targets missing action {}", b.id, b.target_action));
            }
        }
        Ok(())
    }
}

/// What happened when one action was run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Response(HttpResponse),
    /// A binding could not be evaluated; the request was not sent.
    LinkBroken(String),
    NetworkError(String),
    /// The test was aborted before reaching this action.
    NotExecuted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exchange {
    pub request: Option<HttpRequest>,
    pub outcome: Outcome,
}

impl Exchange {
    pub fn response(&self) -> Option<&HttpResponse> {
        match &self.outcome {
            Outcome::Response(r) => Some(r),
            _ => None,
        }
    }

    pub fn status(&self) -> Option<u16> {
        self.response().map(|r| r.status)
    }
}
