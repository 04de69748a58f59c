//! Loading OpenAPI documents, following external `$ref`s across files and
//! servers, and validating the result.
//!
//! Loading is best-effort: only an unreadable or unparseable root document
//! is fatal. Everything else degrades into [`SchemaWarning`]s.

mod fetch;
mod validate;
mod warning;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use serde_json::Value;
use thiserror::Error;
use url::Url;

pub use fetch::{DefaultFetcher, DocumentFetcher, FetchError, MemoryFetcher};
pub use validate::validate_schema;
pub use warning::{render_json, render_text, SchemaWarning, Severity, WarningCode, WarningLocation};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("cannot read schema `{location}`: {message}")]
    Unreadable { location: String, message: String },
    #[error("cannot parse schema `{location}` as YAML or JSON: {message}")]
    Unparseable { location: String, message: String },
    #[error("invalid schema location `{0}`")]
    InvalidLocation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    File,
    Http,
    Https,
    /// Scheme-relative reference (`//host/path`); takes the scheme of the
    /// referencing document. Never valid for a root.
    Inherited,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaSource {
    pub location: String,
    pub protocol: Protocol,
}

impl SchemaSource {
    /// Interprets `location` as a URL when it has an `http`, `https` or
    /// `file` scheme, otherwise as a filesystem path.
    pub fn parse(location: &str) -> Result<SchemaSource, SchemaError> {
        let location = location.trim();
        if location.starts_with("//") {
            return Err(SchemaError::InvalidLocation(format!(
                "{location} (scheme-relative locations need a referencing document)"
            )));
        }
        let protocol = match Url::parse(location) {
            Ok(u) if u.scheme() == "http" => Protocol::Http,
            Ok(u) if u.scheme() == "https" => Protocol::Https,
            Ok(u) if u.scheme() == "file" => Protocol::File,
            _ => Protocol::File,
        };
        Ok(SchemaSource {
            location: location.to_string(),
            protocol,
        })
    }

    pub fn from_path(path: &Path) -> SchemaSource {
        SchemaSource {
            location: path.display().to_string(),
            protocol: Protocol::File,
        }
    }

    /// Absolute URL for this source, with dot segments removed and no fragment.
    pub fn to_url(&self) -> Result<Url, SchemaError> {
        let bad = || SchemaError::InvalidLocation(self.location.clone());
        match self.protocol {
            Protocol::Inherited => Err(bad()),
            Protocol::Http | Protocol::Https => Url::parse(&self.location).map(canonical).map_err(|_| bad()),
            Protocol::File => {
                if let Ok(u) = Url::parse(&self.location) {
                    if u.scheme() == "file" {
                        return Ok(canonical(u));
                    }
                }
                let path = Path::new(&self.location);
                let abs = if path.is_absolute() {
                    path.to_path_buf()
                } else {
                    std::env::current_dir().map_err(|_| bad())?.join(path)
                };
                let u = Url::from_file_path(&abs).map_err(|_| bad())?;
                // Re-parsing removes `.`/`..` segments.
                Url::parse(u.as_str()).map(canonical).map_err(|_| bad())
            }
        }
    }
}

fn canonical(mut url: Url) -> Url {
    url.set_fragment(None);
    url
}

/// Protocol a reference string would be fetched with, relative to the
/// referencing document.
pub fn reference_protocol(reference: &str) -> Protocol {
    if reference.starts_with("//") {
        return Protocol::Inherited;
    }
    match Url::parse(reference) {
        Ok(u) if u.scheme() == "http" => Protocol::Http,
        Ok(u) if u.scheme() == "https" => Protocol::Https,
        _ => Protocol::File,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaDocument {
    pub url: Url,
    pub content: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RefEdge {
    pub from: String,
    pub reference: String,
    pub to: String,
}

/// All documents reachable from the root through `$ref`s. Immutable once
/// loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaGraph {
    pub nodes: BTreeMap<String, SchemaDocument>,
    pub edges: BTreeSet<RefEdge>,
    pub root: String,
    /// Canonical locations that were referenced but could not be loaded.
    pub dangling: BTreeSet<String>,
}

/// A reference resolved to a concrete position in a loaded document.
#[derive(Debug, Clone)]
pub struct Resolved<'a> {
    pub document: &'a str,
    pub pointer: String,
    pub value: &'a Value,
}

impl SchemaGraph {
    pub fn root_document(&self) -> &SchemaDocument {
        &self.nodes[&self.root]
    }

    /// Canonical location of the document `reference` points to, seen from
    /// `from_doc`, or `None` when the reference is local (`#/...`).
    pub fn target_document(&self, from_doc: &str, reference: &str) -> Option<Result<String, ()>> {
        let (doc_part, _) = split_reference(reference);
        if doc_part.is_empty() {
            return None;
        }
        let base = match self.nodes.get(from_doc) {
            Some(d) => &d.url,
            None => return Some(Err(())),
        };
        Some(base.join(doc_part).map(|u| canonical(u).to_string()).map_err(|_| ()))
    }

    /// Resolves `reference` (local or external) relative to `from_doc`.
    pub fn resolve(&self, from_doc: &str, reference: &str) -> Option<Resolved<'_>> {
        let (_, fragment) = split_reference(reference);
        let doc_key = match self.target_document(from_doc, reference) {
            None => from_doc.to_string(),
            Some(Ok(k)) => k,
            Some(Err(())) => return None,
        };
        let (document, doc) = self.nodes.get_key_value(&doc_key)?;
        let pointer = fragment_pointer(fragment);
        let value = doc.content.pointer(&pointer)?;
        Some(Resolved {
            document,
            pointer,
            value,
        })
    }

    /// Follows `$ref` chains starting at `value` until a non-reference node
    /// is reached. Returns `None` for dangling or circular chains.
    pub fn deref<'a>(&'a self, document: &'a str, value: &'a Value) -> Option<(&'a str, &'a Value)> {
        let mut doc = document;
        let mut cur = value;
        for _ in 0..32 {
            match cur.get("$ref").and_then(Value::as_str) {
                Some(r) => {
                    let res = self.resolve(doc, r)?;
                    doc = res.document;
                    cur = res.value;
                }
                None => return Some((doc, cur)),
            }
        }
        None
    }
}

/// Splits `doc#fragment`.
pub fn split_reference(reference: &str) -> (&str, &str) {
    match reference.find('#') {
        Some(i) => (&reference[..i], &reference[i + 1..]),
        None => (reference, ""),
    }
}

fn fragment_pointer(fragment: &str) -> String {
    if fragment.is_empty() || fragment == "/" {
        String::new()
    } else if fragment.starts_with('/') {
        percent_decode(fragment)
    } else {
        format!("/{}", percent_decode(fragment))
    }
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            if let Ok(b) = u8::from_str_radix(&s[i + 1..i + 3], 16) {
                out.push(b);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// Escapes one JSON pointer segment.
pub fn escape_pointer_segment(seg: &str) -> String {
    seg.replace('~', "~0").replace('/', "~1")
}

/// Parses a document as JSON or YAML. Non-string mapping keys (e.g. an
/// unquoted `200:` status) are converted to strings.
pub fn parse_document(text: &str) -> Result<Value, String> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        if let Ok(v) = serde_json::from_str::<Value>(text) {
            return Ok(v);
        }
    }
    let yaml: serde_yaml::Value = serde_yaml::from_str(text).map_err(|e| e.to_string())?;
    Ok(yaml_to_json(yaml))
}

fn yaml_to_json(v: serde_yaml::Value) -> Value {
    use serde_yaml::Value as Y;
    match v {
        Y::Null => Value::Null,
        Y::Bool(b) => Value::Bool(b),
        Y::Number(n) => n
            .to_string()
            .parse::<serde_json::Number>()
            .map(Value::Number)
            .unwrap_or(Value::Null),
        Y::String(s) => Value::String(s),
        Y::Sequence(items) => Value::Array(items.into_iter().map(yaml_to_json).collect()),
        Y::Mapping(map) => Value::Object(
            map.into_iter()
                .map(|(k, v)| {
                    let key = match k {
                        Y::String(s) => s,
                        Y::Number(n) => n.to_string(),
                        Y::Bool(b) => b.to_string(),
                        Y::Null => "null".to_string(),
                        other => serde_yaml::to_string(&other).unwrap_or_default().trim().to_string(),
                    };
                    (key, yaml_to_json(v))
                })
                .collect(),
        ),
        Y::Tagged(t) => yaml_to_json(t.value),
    }
}

/// Collects every `$ref` string in `value` together with the JSON pointer of
/// the object holding it.
pub fn collect_refs(value: &Value) -> Vec<(String, String)> {
    let mut out = Vec::new();
    collect_refs_into(value, String::new(), &mut out);
    out
}

fn collect_refs_into(value: &Value, path: String, out: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            if let Some(Value::String(r)) = map.get("$ref") {
                out.push((path.clone(), r.clone()));
            }
            for (k, v) in map {
                collect_refs_into(v, format!("{path}/{}", escape_pointer_segment(k)), out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                collect_refs_into(v, format!("{path}/{i}"), out);
            }
        }
        _ => {}
    }
}

/// Loads `root` and every document it transitively references, using the
/// default file/HTTP fetcher.
pub fn load_schema(root: &SchemaSource) -> Result<(SchemaGraph, Vec<SchemaWarning>), SchemaError> {
    load_schema_with(root, &mut DefaultFetcher::default())
}

pub fn load_schema_with(
    root: &SchemaSource,
    fetcher: &mut dyn DocumentFetcher,
) -> Result<(SchemaGraph, Vec<SchemaWarning>), SchemaError> {
    let root_url = root.to_url()?;
    let root_key = root_url.to_string();
    let text = fetcher.fetch(&root_url).map_err(|e| SchemaError::Unreadable {
        location: root_key.clone(),
        message: e.to_string(),
    })?;
    let content = parse_document(&text).map_err(|message| SchemaError::Unparseable {
        location: root_key.clone(),
        message,
    })?;

    let mut warnings = Vec::new();
    check_version(&root_key, &content, &mut warnings);

    let mut nodes = BTreeMap::new();
    let mut edges = BTreeSet::new();
    let mut dangling = BTreeSet::new();
    let mut attempted: BTreeSet<String> = BTreeSet::new();
    attempted.insert(root_key.clone());
    nodes.insert(
        root_key.clone(),
        SchemaDocument {
            url: root_url,
            content,
        },
    );

    let mut queue = VecDeque::from([root_key.clone()]);
    while let Some(doc_key) = queue.pop_front() {
        let (base, refs) = {
            let doc = &nodes[&doc_key];
            (doc.url.clone(), collect_refs(&doc.content))
        };
        for (path, reference) in refs {
            let (doc_part, _) = split_reference(&reference);
            if doc_part.is_empty() {
                continue;
            }
            let target = match base.join(doc_part) {
                Ok(u) => canonical(u),
                Err(e) => {
                    warnings.push(SchemaWarning::warn(
                        WarningCode::InvalidRef,
                        &doc_key,
                        &path,
                        format!("cannot resolve reference `{reference}`: {e}"),
                    ));
                    continue;
                }
            };
            let target_key = target.to_string();
            edges.insert(RefEdge {
                from: doc_key.clone(),
                reference: reference.clone(),
                to: target_key.clone(),
            });
            if !attempted.insert(target_key.clone()) {
                continue;
            }
            match fetcher.fetch(&target) {
                Ok(text) => match parse_document(&text) {
                    Ok(content) => {
                        nodes.insert(target_key.clone(), SchemaDocument { url: target, content });
                        queue.push_back(target_key);
                    }
                    Err(message) => {
                        dangling.insert(target_key.clone());
                        warnings.push(SchemaWarning::warn(
                            WarningCode::UnparseableRef,
                            &doc_key,
                            &path,
                            format!("referenced document `{target_key}` is not valid YAML/JSON: {message}"),
                        ));
                    }
                },
                Err(e) => {
                    dangling.insert(target_key.clone());
                    warnings.push(SchemaWarning::warn(
                        WarningCode::UnreadableRef,
                        &doc_key,
                        &path,
                        format!("referenced document `{target_key}` could not be fetched: {e}"),
                    ));
                }
            }
        }
    }

    Ok((
        SchemaGraph {
            nodes,
            edges,
            root: root_key,
            dangling,
        },
        warnings,
    ))
}

fn check_version(doc: &str, content: &Value, warnings: &mut Vec<SchemaWarning>) {
    let openapi = content.get("openapi").and_then(Value::as_str);
    let swagger = content.get("swagger").and_then(Value::as_str);
    match (openapi, swagger) {
        (Some(v), _) if v.starts_with("3.") => {}
        (_, Some("2.0")) => {}
        (Some(v), _) => warnings.push(SchemaWarning::info(
            WarningCode::UnknownVersion,
            doc,
            "/openapi",
            format!("unsupported OpenAPI version `{v}`, parsing best-effort"),
        )),
        _ => warnings.push(SchemaWarning::info(
            WarningCode::UnknownVersion,
            doc,
            "",
            "document declares neither `openapi` nor `swagger` version, parsing best-effort",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fetcher(docs: &[(&str, &str)]) -> MemoryFetcher {
        let mut f = MemoryFetcher::default();
        for (url, text) in docs {
            f.insert(url, text);
        }
        f
    }

    #[test]
    fn relative_ref_creates_second_node() {
        let mut f = fetcher(&[
            (
                "http://h/api/v1/root.yaml",
                "openapi: 3.0.1\npaths: {}\ncomponents:\n  schemas:\n    X:\n      \"$ref\": \"../foo/bar.yaml#/definitions/BodyDto\"\n",
            ),
            ("http://h/api/foo/bar.yaml", "definitions:\n  BodyDto:\n    type: object\n"),
        ]);
        let src = SchemaSource::parse("http://h/api/v1/root.yaml").unwrap();
        let (g, w) = load_schema_with(&src, &mut f).unwrap();
        assert!(w.is_empty(), "{w:?}");
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 1);
        let e = g.edges.iter().next().unwrap();
        assert_eq!(e.reference, "../foo/bar.yaml#/definitions/BodyDto");
        assert_eq!(e.to, "http://h/api/foo/bar.yaml");
        assert_eq!(f.fetch_count(), 2);
    }

    #[test]
    fn no_external_refs_single_node() {
        let mut f = fetcher(&[(
            "http://h/a.yaml",
            "openapi: 3.0.0\npaths: {}\ncomponents: {schemas: {A: {type: string}, B: {$ref: '#/components/schemas/A'}}}\n",
        )]);
        let (g, w) = load_schema_with(&SchemaSource::parse("http://h/a.yaml").unwrap(), &mut f).unwrap();
        assert_eq!((g.nodes.len(), g.edges.len(), w.len()), (1, 0, 0));
    }

    #[test]
    fn cycle_is_fetched_once_per_document() {
        let mut f = fetcher(&[
            ("http://h/a.yaml", "openapi: 3.0.0\nx: {$ref: 'b.yaml#/y'}\n"),
            ("http://h/b.yaml", "y: {$ref: 'a.yaml#/x'}\n"),
        ]);
        let (g, _) = load_schema_with(&SchemaSource::parse("http://h/a.yaml").unwrap(), &mut f).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 2);
        // manual count: a.yaml once, b.yaml once
        assert_eq!(f.fetch_count(), 2);
    }

    #[test]
    fn protocol_less_ref_inherits_scheme() {
        let mut f = fetcher(&[
            ("https://h/a.yaml", "openapi: 3.0.0\nx: {$ref: '//other:8080/foo/bar.yaml#/d'}\n"),
            ("https://other:8080/foo/bar.yaml", "d: {type: string}\n"),
        ]);
        let (g, w) = load_schema_with(&SchemaSource::parse("https://h/a.yaml").unwrap(), &mut f).unwrap();
        assert!(w.is_empty());
        assert!(g.nodes.contains_key("https://other:8080/foo/bar.yaml"));
        assert_eq!(reference_protocol("//other:8080/foo/bar.yaml#/d"), Protocol::Inherited);
        assert!(SchemaSource::parse("//other/x.yaml").is_err());
    }

    #[test]
    fn unreadable_ref_is_a_warning() {
        let mut f = fetcher(&[("http://h/a.yaml", "openapi: 3.0.0\nx: {$ref: 'missing.yaml#/d'}\n")]);
        let (g, w) = load_schema_with(&SchemaSource::parse("http://h/a.yaml").unwrap(), &mut f).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert!(g.dangling.contains("http://h/missing.yaml"));
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].code, WarningCode::UnreadableRef);
    }

    #[test]
    fn unreadable_root_is_fatal() {
        let mut f = MemoryFetcher::default();
        assert!(matches!(
            load_schema_with(&SchemaSource::parse("http://h/none.yaml").unwrap(), &mut f),
            Err(SchemaError::Unreadable { .. })
        ));
        f.insert("http://h/bad.yaml", "a: [unclosed");
        assert!(matches!(
            load_schema_with(&SchemaSource::parse("http://h/bad.yaml").unwrap(), &mut f),
            Err(SchemaError::Unparseable { .. })
        ));
    }

    #[test]
    fn unknown_version_is_info() {
        let mut f = fetcher(&[("http://h/a.yaml", "openapi: 4.2.0\npaths: {}\n")]);
        let (_, w) = load_schema_with(&SchemaSource::parse("http://h/a.yaml").unwrap(), &mut f).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].severity, Severity::Info);
    }

    #[test]
    fn integer_yaml_keys_become_strings() {
        let v = parse_document("responses:\n  200:\n    description: ok\n").unwrap();
        assert!(v.pointer("/responses/200").is_some());
    }

    #[test]
    fn file_paths_are_canonicalized() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("root.yaml"), "openapi: 3.0.0\nx: {$ref: './sub/../sub/d.yaml#/d'}\n").unwrap();
        std::fs::write(dir.path().join("sub/d.yaml"), "d: {type: string}\n").unwrap();
        let src = SchemaSource::from_path(&dir.path().join("sub/../root.yaml"));
        let (g, w) = load_schema(&src).unwrap();
        assert!(w.is_empty(), "{w:?}");
        assert_eq!(g.nodes.len(), 2);
        assert!(g.root.ends_with("/root.yaml") && !g.root.contains(".."));
    }
}
