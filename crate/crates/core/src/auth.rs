//! Authentication configuration and credentials.
//!
//! Config files are YAML or TOML (JSON is refused: it has no comments). A file
//! holds an `auth` list; each entry either sends fixed headers or logs in
//! through an endpoint and forwards the extracted token as a header:
//!
//! ```toml
//! [[auth]]
//! name = "logintoken"
//! [auth.loginEndpointAuth]
//! endpoint = "/api/logintoken/login"
//! payloadRaw = '{"userId": "foo", "password":"123"}'
//! verb = "POST"
//! contentType = "application/json"
//! expireAfterSeconds = 300
//! [auth.loginEndpointAuth.token]
//! headerPrefix = "Bearer "
//! extractFromField = "/token/authToken"
//! httpHeaderName = "Authorization"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::RwLock;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::clock::Clock;
use crate::http::{HttpRequest, Method, Transport, TransportError};
use crate::model::{BodyPointer, JsonValue};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthSpec {
    pub name: String,
    pub mechanism: AuthMechanism,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuthMechanism {
    StaticHeaders(Vec<(String, String)>),
    LoginEndpoint(LoginFlow),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoginFlow {
    pub endpoint: String,
    pub verb: Method,
    /// Sent byte for byte.
    pub payload: String,
    pub content_type: String,
    pub token_extraction: BodyPointer,
    pub header_name: String,
    pub header_prefix: String,
    pub lifetime: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenState {
    /// Raw token, without the header prefix.
    pub value: String,
    pub obtained_at: Duration,
    pub expires_at: Option<Duration>,
}

impl TokenState {
    pub fn is_valid_at(&self, now: Duration) -> bool {
        self.expires_at.is_none_or(|e| now < e)
    }
}

#[derive(Debug, Error)]
pub enum AuthError {
    #[error("JSON not supported for config files (use YAML or TOML): {0}")]
    JsonConfig(String),
    #[error("cannot read auth config `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("cannot parse auth config {location}: {message}")]
    Parse { location: String, message: String },
    #[error("invalid auth config: {0}")]
    Invalid(String),
    #[error("unsupported auth config: {0}")]
    Unsupported(String),
    #[error("login to {endpoint} failed with status {status}")]
    LoginStatus { endpoint: String, status: u16 },
    #[error("login response has no token at `{path}`")]
    Extraction { path: String },
    #[error("login request failed: {0}")]
    Transport(#[from] TransportError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    auth: Vec<RawAuth>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawAuth {
    name: String,
    #[serde(default)]
    fixed_headers: Vec<RawHeader>,
    login_endpoint_auth: Option<RawLogin>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHeader {
    name: String,
    value: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawLogin {
    endpoint: String,
    #[serde(default)]
    payload_raw: String,
    #[serde(default = "default_verb")]
    verb: String,
    #[serde(default = "default_content_type")]
    content_type: String,
    expire_after_seconds: Option<u64>,
    token: RawToken,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawToken {
    #[serde(default)]
    header_prefix: String,
    extract_from_field: String,
    #[serde(default = "default_header")]
    http_header_name: String,
    send_in: Option<String>,
}

fn default_verb() -> String {
    "POST".into()
}

fn default_content_type() -> String {
    "application/json".into()
}

fn default_header() -> String {
    "Authorization".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigFormat {
    Toml,
    Yaml,
    /// Decide from content: TOML first, then YAML.
    Detect,
}

impl ConfigFormat {
    pub fn from_path(path: &Path) -> ConfigFormat {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("toml") => ConfigFormat::Toml,
            Some("yaml" | "yml") => ConfigFormat::Yaml,
            _ => ConfigFormat::Detect,
        }
    }
}

pub fn parse_auth_config(path: &Path) -> Result<Vec<AuthSpec>, AuthError> {
    let shown = path.display().to_string();
    if path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        return Err(AuthError::JsonConfig(shown));
    }
    let text = std::fs::read_to_string(path).map_err(|e| AuthError::Io {
        path: shown.clone(),
        message: e.to_string(),
    })?;
    parse_auth_config_str(&text, ConfigFormat::from_path(path), &shown)
}

/// Parses config text; `origin` names the source in error messages.
pub fn parse_auth_config_str(text: &str, format: ConfigFormat, origin: &str) -> Result<Vec<AuthSpec>, AuthError> {
    let meaningful = text
        .lines()
        .any(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    if !meaningful {
        return Ok(Vec::new());
    }
    if serde_json::from_str::<serde_json::Value>(text).is_ok_and(|v| v.is_object() || v.is_array()) {
        return Err(AuthError::JsonConfig(origin.to_string()));
    }
    let parse_toml = |t: &str| {
        toml::from_str::<RawFile>(t).map_err(|e| AuthError::Parse {
            location: match e.span() {
                Some(span) => format!("`{origin}` line {}", line_of(t, span.start)),
                None => format!("`{origin}`"),
            },
            message: e.message().to_string(),
        })
    };
    let parse_yaml = |t: &str| {
        serde_yaml::from_str::<RawFile>(t).map_err(|e| AuthError::Parse {
            location: match e.location() {
                Some(l) => format!("`{origin}` line {} column {}", l.line(), l.column()),
                None => format!("`{origin}`"),
            },
            message: e.to_string(),
        })
    };
    let raw = match format {
        ConfigFormat::Toml => parse_toml(text)?,
        ConfigFormat::Yaml => parse_yaml(text)?,
        ConfigFormat::Detect => match parse_toml(text) {
            Ok(r) => r,
            Err(toml_err) => parse_yaml(text).map_err(|_| toml_err)?,
        },
    };
    convert(raw)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn convert(raw: RawFile) -> Result<Vec<AuthSpec>, AuthError> {
    let mut names = BTreeSet::new();
    let mut out = Vec::new();
    for a in raw.auth {
        if !names.insert(a.name.clone()) {
            return Err(AuthError::Invalid(format!("duplicate auth name `{}`", a.name)));
        }
        let mechanism = match (a.fixed_headers.is_empty(), a.login_endpoint_auth) {
            (false, None) => AuthMechanism::StaticHeaders(a.fixed_headers.into_iter().map(|h| (h.name, h.value)).collect()),
            (true, Some(l)) => AuthMechanism::LoginEndpoint(convert_login(&a.name, l)?),
            _ => {
                return Err(AuthError::Invalid(format!(
                    "auth `{}` must declare exactly one of `fixedHeaders` or `loginEndpointAuth`",
                    a.name
                )))
            }
        };
        out.push(AuthSpec { name: a.name, mechanism });
    }
    Ok(out)
}

fn convert_login(name: &str, l: RawLogin) -> Result<LoginFlow, AuthError> {
    if let Some(send_in) = l.token.send_in.as_deref() {
        if !send_in.eq_ignore_ascii_case("header") {
            return Err(AuthError::Unsupported(format!(
                "auth `{name}`: sending tokens in `{send_in}` is not supported, only `header`"
            )));
        }
    }
    let verb = l
        .verb
        .parse::<Method>()
        .map_err(|e| AuthError::Invalid(format!("auth `{name}`: {e}")))?;
    let pointer = BodyPointer::parse(&l.token.extract_from_field);
    if pointer.is_root() {
        return Err(AuthError::Invalid(format!("auth `{name}`: `extractFromField` must not be empty")));
    }
    Ok(LoginFlow {
        endpoint: l.endpoint,
        verb,
        // TOML multi-line strings keep the surrounding newlines.
        payload: l.payload_raw.trim().to_string(),
        content_type: l.content_type,
        token_extraction: pointer,
        header_name: l.token.http_header_name,
        header_prefix: l.token.header_prefix,
        lifetime: l.expire_after_seconds.map(Duration::from_secs),
    })
}

/// The login request a flow sends.
pub fn login_request(flow: &LoginFlow) -> HttpRequest {
    let mut req = HttpRequest::new(flow.verb, flow.endpoint.clone());
    req.set_header("Content-Type", flow.content_type.clone());
    if !flow.payload.is_empty() {
        req.body = Some(flow.payload.clone());
    }
    req
}

/// Performs the login call and extracts the token (prefix not applied).
pub fn acquire_token(flow: &LoginFlow, transport: &mut dyn Transport, clock: &dyn Clock) -> Result<TokenState, AuthError> {
    let obtained_at = clock.now();
    let resp = transport.send(&login_request(flow))?;
    if !resp.is_success() {
        return Err(AuthError::LoginStatus {
            endpoint: flow.endpoint.clone(),
            status: resp.status,
        });
    }
    let token = match resp.body_json().pointer(&flow.token_extraction) {
        Some(v @ (JsonValue::String(_) | JsonValue::Number(_) | JsonValue::Bool(_))) => v.render_scalar(),
        _ => {
            return Err(AuthError::Extraction {
                path: flow.token_extraction.to_string(),
            })
        }
    };
    Ok(TokenState {
        value: token,
        obtained_at,
        expires_at: flow.lifetime.map(|l| obtained_at + l),
    })
}

/// Per-spec token store: many readers, exclusive refresh.
#[derive(Debug, Default)]
pub struct TokenCache {
    tokens: RwLock<BTreeMap<String, TokenState>>,
}

impl TokenCache {
    pub fn valid(&self, name: &str, now: Duration) -> Option<TokenState> {
        self.tokens
            .read()
            .unwrap()
            .get(name)
            .filter(|t| t.is_valid_at(now))
            .cloned()
    }

    pub fn invalidate(&self, name: &str) {
        self.tokens.write().unwrap().remove(name);
    }

    /// Returns a valid token, logging in when none is cached or it expired.
    pub fn get_or_refresh(
        &self,
        name: &str,
        flow: &LoginFlow,
        transport: &mut dyn Transport,
        clock: &dyn Clock,
    ) -> Result<TokenState, AuthError> {
        if let Some(t) = self.valid(name, clock.now()) {
            return Ok(t);
        }
        let mut guard = self.tokens.write().unwrap();
        if let Some(t) = guard.get(name).filter(|t| t.is_valid_at(clock.now())) {
            return Ok(t.clone());
        }
        let t = acquire_token(flow, transport, clock)?;
        guard.insert(name.to_string(), t.clone());
        Ok(t)
    }
}

/// Adds the spec's headers to `request`, refreshing the token if needed.
pub fn attach_auth(
    mut request: HttpRequest,
    spec: &AuthSpec,
    cache: &TokenCache,
    transport: &mut dyn Transport,
    clock: &dyn Clock,
) -> Result<HttpRequest, AuthError> {
    match &spec.mechanism {
        AuthMechanism::StaticHeaders(headers) => {
            for (k, v) in headers {
                request.set_header(k, v.clone());
            }
        }
        AuthMechanism::LoginEndpoint(flow) => {
            let t = cache.get_or_refresh(&spec.name, flow, transport, clock)?;
            request.set_header(&flow.header_name, format!("{}{}", flow.header_prefix, t.value));
        }
    }
    Ok(request)
}

/// Variable holding a login token in emitted plans.
pub fn token_var(spec_name: &str) -> String {
    let clean: String = spec_name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    format!("token_{clean}")
}

/// Picks the session's auth spec: the named one, or the only one declared.
pub fn select_auth(specs: Vec<AuthSpec>, name: Option<&str>) -> Result<Option<AuthSpec>, AuthError> {
    match name {
        Some(n) => specs
            .into_iter()
            .find(|s| s.name == n)
            .map(Some)
            .ok_or_else(|| AuthError::Invalid(format!("no auth entry named `{n}`"))),
        None if specs.len() <= 1 => Ok(specs.into_iter().next()),
        None => Err(AuthError::Invalid(format!(
            "config declares {} auth entries ({}); choose one with --auth",
            specs.len(),
            specs.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(", ")
        ))),
    }
}

/// Parses a `NAME:VALUE` header flag.
pub fn parse_header_flag(s: &str) -> Result<(String, String), AuthError> {
    match s.split_once(':') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(AuthError::Invalid(format!("header `{s}` must have the form NAME:VALUE"))),
    }
}
