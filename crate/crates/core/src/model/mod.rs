//! Typed model of an API, built from a loaded [`SchemaGraph`].

mod builder;
pub mod pointer;
pub mod schema;
pub mod value;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::Method;

pub use builder::build_model;
pub use pointer::BodyPointer;
pub use schema::{CompositeKind, Constraints, FieldSchema, Mismatch, SchemaKind, ValueSchema};
pub use value::{JsonValue, Number};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamLocation {
    Path,
    Query,
    Header,
}

impl ParamLocation {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamLocation::Path => "path",
            ParamLocation::Query => "query",
            ParamLocation::Header => "header",
        }
    }

    pub fn parse(s: &str) -> Option<ParamLocation> {
        match s {
            "path" => Some(ParamLocation::Path),
            "query" => Some(ParamLocation::Query),
            "header" => Some(ParamLocation::Header),
            _ => None,
        }
    }
}

impl fmt::Display for ParamLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub location: ParamLocation,
    pub required: bool,
    pub schema: ValueSchema,
    /// Parameter-level examples (`example` / `examples`), already type-checked.
    pub examples: Vec<JsonValue>,
}

impl ParamSpec {
    /// `location.name`, e.g. `query.name`.
    pub fn designator(&self) -> String {
        format!("{}.{}", self.location, self.name)
    }

    /// Parameter examples followed by schema-level examples.
    pub fn all_examples(&self) -> Vec<JsonValue> {
        let mut v = self.examples.clone();
        v.extend(self.schema.examples.iter().cloned());
        v
    }
}

/// Response map key: exact code, `2XX`-style range or `default`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StatusKey {
    Code(u16),
    Range(u8),
    Default,
}

impl StatusKey {
    pub fn parse(s: &str) -> Option<StatusKey> {
        if s == "default" {
            return Some(StatusKey::Default);
        }
        if s.len() == 3 && s.ends_with("XX") {
            return s[..1].parse::<u8>().ok().filter(|d| (1..=5).contains(d)).map(StatusKey::Range);
        }
        s.parse::<u16>().ok().filter(|c| (100..600).contains(c)).map(StatusKey::Code)
    }

    pub fn matches(self, status: u16) -> bool {
        match self {
            StatusKey::Code(c) => c == status,
            StatusKey::Range(d) => status / 100 == d as u16,
            StatusKey::Default => true,
        }
    }
}

impl fmt::Display for StatusKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatusKey::Code(c) => write!(f, "{c}"),
            StatusKey::Range(d) => write!(f, "{d}XX"),
            StatusKey::Default => f.write_str("default"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamDesignator {
    pub location: Option<ParamLocation>,
    pub name: String,
}

impl ParamDesignator {
    /// `path.name` → (path, name); anything without a known location prefix
    /// is a bare name.
    pub fn parse(s: &str) -> ParamDesignator {
        if let Some((loc, name)) = s.split_once('.') {
            if let Some(location) = ParamLocation::parse(loc) {
                return ParamDesignator {
                    location: Some(location),
                    name: name.to_string(),
                };
            }
        }
        ParamDesignator {
            location: None,
            name: s.to_string(),
        }
    }
}

impl fmt::Display for ParamDesignator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.location {
            Some(l) => write!(f, "{l}.{}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinkBinding {
    Constant(JsonValue),
    /// `$response.body#/pointer`
    ResponseBody(BodyPointer),
    /// Any other runtime expression (`$request.*`, `$response.header.*`, ...).
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub name: String,
    pub target_operation_id: String,
    pub bindings: Vec<(ParamDesignator, LinkBinding)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResponseSpec {
    pub schema: Option<ValueSchema>,
    pub links: Vec<LinkSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestBody {
    pub media_type: String,
    pub schema: ValueSchema,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EndpointKey {
    pub verb: Method,
    pub path: String,
}

impl EndpointKey {
    pub fn new(verb: Method, path: impl Into<String>) -> EndpointKey {
        EndpointKey {
            verb,
            path: path.into(),
        }
    }
}

impl fmt::Display for EndpointKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.verb, self.path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointSpec {
    pub verb: Method,
    pub path: String,
    pub params: Vec<ParamSpec>,
    pub request_bodies: Vec<RequestBody>,
    pub body_required: bool,
    pub responses: BTreeMap<StatusKey, ResponseSpec>,
    pub tags: BTreeSet<String>,
    pub operation_id: Option<String>,
}

impl EndpointSpec {
    pub fn key(&self) -> EndpointKey {
        EndpointKey::new(self.verb, self.path.clone())
    }

    pub fn param(&self, location: ParamLocation, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.location == location && p.name == name)
    }

    /// Resolves a link designator; a bare name prefers the path parameter.
    pub fn param_for(&self, d: &ParamDesignator) -> Option<&ParamSpec> {
        match d.location {
            Some(loc) => self.param(loc, &d.name),
            None => [ParamLocation::Path, ParamLocation::Query, ParamLocation::Header]
                .into_iter()
                .find_map(|loc| self.param(loc, &d.name)),
        }
    }

    /// Declared response for a concrete status: exact code, then range,
    /// then `default`.
    pub fn response_for(&self, status: u16) -> Option<&ResponseSpec> {
        self.responses
            .get(&StatusKey::Code(status))
            .or_else(|| self.responses.get(&StatusKey::Range((status / 100) as u8)))
            .or_else(|| self.responses.get(&StatusKey::Default))
    }

    pub fn declares_status(&self, status: u16) -> bool {
        self.responses.keys().any(|k| k.matches(status))
    }

    /// Every link with the status key it is declared under.
    pub fn links(&self) -> impl Iterator<Item = (StatusKey, &LinkSpec)> {
        self.responses
            .iter()
            .flat_map(|(k, r)| r.links.iter().map(move |l| (*k, l)))
    }

    pub fn json_body(&self) -> Option<&RequestBody> {
        self.request_bodies
            .iter()
            .find(|b| b.media_type.contains("json"))
            .or_else(|| self.request_bodies.first())
    }
}

/// Names of `{param}` segments in a path template, in order.
pub fn path_template_params(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let Some(end) = rest[start..].find('}') else { break };
        out.push(rest[start + 1..start + end].to_string());
        rest = &rest[start + end + 1..];
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ApiModel {
    pub title: Option<String>,
    pub endpoints: Vec<EndpointSpec>,
}

impl ApiModel {
    pub fn endpoint(&self, key: &EndpointKey) -> Option<&EndpointSpec> {
        self.endpoints.iter().find(|e| e.verb == key.verb && e.path == key.path)
    }

    pub fn by_operation_id(&self, id: &str) -> Option<&EndpointSpec> {
        self.endpoints.iter().find(|e| e.operation_id.as_deref() == Some(id))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FilterError {
    #[error("endpoint filter (prefix {prefix:?}, tags {tags:?}) leaves no endpoint to fuzz")]
    NothingLeft {
        prefix: Option<String>,
        tags: Option<Vec<String>>,
    },
}

/// Keeps endpoints whose path starts with `prefix` (a trailing `*` is
/// ignored) and whose tags intersect `tags`. Absent filters match all.
pub fn filter_endpoints(
    model: &ApiModel,
    prefix: Option<&str>,
    tags: Option<&BTreeSet<String>>,
) -> Result<ApiModel, FilterError> {
    if prefix.is_none() && tags.is_none() {
        return Ok(model.clone());
    }
    let prefix_str = prefix.map(|p| p.trim_end_matches('*'));
    let endpoints: Vec<EndpointSpec> = model
        .endpoints
        .iter()
        .filter(|e| prefix_str.is_none_or(|p| e.path.starts_with(p)))
        .filter(|e| tags.is_none_or(|t| e.tags.iter().any(|tag| t.contains(tag))))
        .cloned()
        .collect();
    if endpoints.is_empty() {
        return Err(FilterError::NothingLeft {
            prefix: prefix.map(str::to_string),
            tags: tags.map(|t| t.iter().cloned().collect()),
        });
    }
    Ok(ApiModel {
        title: model.title.clone(),
        endpoints,
    })
}
